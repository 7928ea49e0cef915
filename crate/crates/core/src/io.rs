//! Binary field and value-function dumps with JSON sidecars, and 8-bit PGM
//! rendering.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Grid2D, ScalarField, UNREACHABLE};
use crate::hji::ValueFunction4D;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub m: usize,
    pub h: f64,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueHeader {
    pub m: usize,
    pub h: f64,
    pub f_p: f64,
    pub f_e: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub iterations: usize,
    pub scene_hash: String,
}

pub fn to_le_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn from_le_bytes(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::InvalidParameter(format!(
            "{} bytes is not a whole number of reals",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn write_pair(dir: &Path, name: &str, header: &impl Serialize, data: &[u8]) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let json = dir.join(format!("{name}.json"));
    let bin = dir.join(format!("{name}.bin"));
    fs::write(&json, serde_json::to_string_pretty(header)?)?;
    fs::write(&bin, data)?;
    Ok((json, bin))
}

/// Writes `<name>.json` and `<name>.bin` into `dir`.
pub fn write_field(dir: &Path, name: &str, field: &ScalarField) -> Result<(PathBuf, PathBuf)> {
    let grid = field.grid();
    let header = FieldHeader {
        m: grid.m(),
        h: grid.h(),
        name: name.to_string(),
    };
    write_pair(dir, name, &header, &to_le_bytes(field.values()))
}

/// Reads a field dump given the path of its sidecar.
pub fn read_field(json: &Path) -> Result<(FieldHeader, ScalarField)> {
    let header: FieldHeader = serde_json::from_str(&fs::read_to_string(json)?)?;
    let values = from_le_bytes(&fs::read(json.with_extension("bin"))?)?;
    let field = ScalarField::new(Grid2D::new(header.m)?, values)?;
    Ok((header, field))
}

pub fn value_header(v: &ValueFunction4D) -> ValueHeader {
    let grid = v.grid();
    ValueHeader {
        m: grid.m(),
        h: grid.h(),
        f_p: v.problem().f_p(),
        f_e: v.problem().f_e(),
        horizon: v.horizon,
        dt: v.dt,
        iterations: v.iterations,
        scene_hash: v.scene_hash.clone(),
    }
}

/// Writes the reported 4-D values in `(i,j,k,l)` row-major order.
pub fn write_value_dump(dir: &Path, name: &str, v: &ValueFunction4D) -> Result<(PathBuf, PathBuf)> {
    write_pair(dir, name, &value_header(v), &to_le_bytes(&v.reported_values()))
}

pub fn read_value_dump(json: &Path) -> Result<(ValueHeader, Vec<f64>)> {
    let header: ValueHeader = serde_json::from_str(&fs::read_to_string(json)?)?;
    let values = from_le_bytes(&fs::read(json.with_extension("bin"))?)?;
    let expected = header.m.pow(4);
    if values.len() != expected {
        return Err(Error::FieldSize {
            expected,
            got: values.len(),
        });
    }
    Ok((header, values))
}

/// Gray level for one value: negatives in `0..=127`, positives in
/// `128..=255`, each scaled by the largest finite magnitude of its sign.
/// Sentinel magnitudes saturate.
fn sign_level(v: f64, neg_scale: f64, pos_scale: f64) -> u8 {
    if v >= UNREACHABLE {
        255
    } else if v <= -UNREACHABLE {
        0
    } else if v > 0.0 {
        128 + (127.0 * v / pos_scale).round().clamp(0.0, 127.0) as u8
    } else {
        127 - (127.0 * -v / neg_scale).round().clamp(0.0, 127.0) as u8
    }
}

/// Binary (P5) PGM with the sign palette. Row 0 of the image is the top of
/// the domain (largest `j`).
pub fn pgm_bytes(field: &ScalarField) -> Vec<u8> {
    let grid = field.grid();
    let m = grid.m();
    let finite = field.values().iter().filter(|v| v.abs() < UNREACHABLE);
    let (mut neg, mut pos) = (0.0f64, 0.0f64);
    for &v in finite {
        if v > 0.0 {
            pos = pos.max(v);
        } else {
            neg = neg.max(-v);
        }
    }
    let (neg, pos) = (neg.max(f64::MIN_POSITIVE), pos.max(f64::MIN_POSITIVE));
    let mut out = format!("P5\n{m} {m}\n255\n").into_bytes();
    for row in 0..m {
        let j = m - 1 - row;
        for i in 0..m {
            out.push(sign_level(field.values()[i * m + j], neg, pos));
        }
    }
    out
}

pub fn write_pgm(path: &Path, field: &ScalarField) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, pgm_bytes(field))?;
    Ok(())
}
