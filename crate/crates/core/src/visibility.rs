//! Visibility, grazing, auxiliary and shadow level-set fields seen from a
//! vantage cell, and the joint-occlusion test that ends a game.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cell, Grid2D, ScalarField};

/// Which field the auxiliary function takes its first argument from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxSource {
    /// `A = max{ψ, g}`
    #[default]
    Visibility,
    /// `A = max{φ, g}`
    Occluder,
}

/// Every level-set field for one vantage point.
#[derive(Clone, Debug)]
pub struct VantageFields {
    pub vantage: Cell,
    pub psi: ScalarField,
    pub grazing: ScalarField,
    pub aux: ScalarField,
    pub aux_visibility: ScalarField,
    pub xi: ScalarField,
}

fn check_vantage(phi: &ScalarField, x0: Cell) -> Result<()> {
    phi.grid().check(x0)?;
    if phi.get(x0) <= 0.0 {
        return Err(Error::InsideObstacle(x0));
    }
    Ok(())
}

/// Minimum of `field` along the segment `from → to`, sampled every `h/2`.
fn segment_min(field: &ScalarField, from: [f64; 2], to: [f64; 2], h: f64) -> f64 {
    let d = [to[0] - from[0], to[1] - from[1]];
    let n = (d[0].hypot(d[1]) / (0.5 * h)).ceil() as usize;
    let mut best = field.bilinear(from);
    for k in 1..=n {
        let r = k as f64 / n as f64;
        best = best.min(field.bilinear([from[0] + r * d[0], from[1] + r * d[1]]));
    }
    best
}

fn par_field(grid: Grid2D, f: impl Fn(Cell) -> f64 + Sync) -> ScalarField {
    let values: Vec<f64> = (0..grid.len()).into_par_iter().map(|k| f(grid.cell(k))).collect();
    ScalarField::new(grid, values).expect("field values are finite")
}

/// `ψ(x, x₀) = min_{r∈[0,1]} φ(x₀ + r(x − x₀))`; positive iff `x` is visible.
pub fn visibility_field(phi: &ScalarField, x0: Cell) -> Result<ScalarField> {
    check_vantage(phi, x0)?;
    Ok(visibility_from(phi, phi.grid().center(x0)))
}

fn visibility_from(phi: &ScalarField, p0: [f64; 2]) -> ScalarField {
    let grid = phi.grid();
    par_field(grid, |c| segment_min(phi, p0, grid.center(c), grid.h()))
}

/// `g(x, x₀) = (x₀ − x)·∇φ(x)`.
pub fn grazing_field(phi: &ScalarField, x0: Cell) -> Result<ScalarField> {
    let grid = phi.grid();
    grid.check(x0)?;
    Ok(grazing_from(phi, grid.center(x0)))
}

fn grazing_from(phi: &ScalarField, p0: [f64; 2]) -> ScalarField {
    let grid = phi.grid();
    ScalarField::from_fn(grid, |c| {
        let p = grid.center(c);
        let g = phi.gradient(c);
        (p0[0] - p[0]) * g[0] + (p0[1] - p[1]) * g[1]
    })
}

/// All six level-set fields for vantage cell `x0`.
pub fn vantage_fields(phi: &ScalarField, x0: Cell, aux_source: AuxSource) -> Result<VantageFields> {
    check_vantage(phi, x0)?;
    Ok(fields_from(phi, phi.grid().center(x0), x0, aux_source))
}

/// Level-set fields for an arbitrary free point `p0` (not necessarily a cell
/// center). `vantage` records the cell containing it.
pub fn vantage_fields_at(phi: &ScalarField, p0: [f64; 2], aux_source: AuxSource) -> Result<VantageFields> {
    let grid = phi.grid();
    let cell = grid
        .cell_at(p0)
        .ok_or_else(|| Error::InvalidParameter(format!("vantage {p0:?} outside the domain")))?;
    if phi.bilinear(p0) <= 0.0 {
        return Err(Error::InsideObstacle(cell));
    }
    Ok(fields_from(phi, p0, cell, aux_source))
}

fn fields_from(phi: &ScalarField, p0: [f64; 2], vantage: Cell, aux_source: AuxSource) -> VantageFields {
    let grid = phi.grid();
    let psi = visibility_from(phi, p0);
    let grazing = grazing_from(phi, p0);
    let first = match aux_source {
        AuxSource::Visibility => &psi,
        AuxSource::Occluder => phi,
    };
    let aux_values: Vec<f64> = first
        .values()
        .iter()
        .zip(grazing.values())
        .map(|(a, g)| a.max(*g))
        .collect();
    let aux = ScalarField::new(grid, aux_values).expect("finite");
    let aux_visibility = par_field(grid, |c| segment_min(&aux, grid.center(c), p0, grid.h()));
    let xi_values: Vec<f64> = aux_visibility
        .values()
        .iter()
        .zip(phi.values())
        .map(|(a, p)| a.max(-p))
        .collect();
    let xi = ScalarField::new(grid, xi_values).expect("finite");
    VantageFields {
        vantage,
        psi,
        grazing,
        aux,
        aux_visibility,
        xi,
    }
}

/// Shadow function `ξ(·, x₀)`: nonpositive exactly on occluded free space.
pub fn shadow_field(phi: &ScalarField, x0: Cell) -> Result<ScalarField> {
    Ok(vantage_fields(phi, x0, AuxSource::Visibility)?.xi)
}

/// Memoized shadow fields keyed by vantage cell.
#[derive(Debug)]
pub struct ShadowCache {
    phi: Arc<ScalarField>,
    aux_source: AuxSource,
    fields: RwLock<HashMap<Cell, Arc<ScalarField>>>,
}

impl ShadowCache {
    pub fn new(phi: Arc<ScalarField>) -> Self {
        Self::with_aux_source(phi, AuxSource::Visibility)
    }

    pub fn with_aux_source(phi: Arc<ScalarField>, aux_source: AuxSource) -> Self {
        Self {
            phi,
            aux_source,
            fields: RwLock::new(HashMap::new()),
        }
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn grid(&self) -> Grid2D {
        self.phi.grid()
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.grid().contains(c) && self.phi.get(c) > 0.0
    }

    pub fn len(&self) -> usize {
        self.fields.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn xi(&self, vantage: Cell) -> Result<Arc<ScalarField>> {
        if let Some(f) = self.fields.read().expect("cache lock").get(&vantage) {
            return Ok(Arc::clone(f));
        }
        let xi = Arc::new(vantage_fields(&self.phi, vantage, self.aux_source)?.xi);
        let mut guard = self.fields.write().expect("cache lock");
        Ok(Arc::clone(guard.entry(vantage).or_insert(xi)))
    }

    /// Free cells hidden from every pursuer.
    pub fn joint_shadow(&self, pursuers: &[Cell]) -> Result<Vec<bool>> {
        let fields = pursuers.iter().map(|p| self.xi(*p)).collect::<Result<Vec<_>>>()?;
        let phi = self.phi.values();
        Ok((0..phi.len())
            .map(|k| phi[k] > 0.0 && fields.iter().all(|f| f.values()[k] <= 0.0))
            .collect())
    }

    /// Whether some evader is hidden from all pursuers.
    pub fn is_end_game(&self, pursuers: &[Cell], evaders: &[Cell]) -> Result<bool> {
        let fields = pursuers.iter().map(|p| self.xi(*p)).collect::<Result<Vec<_>>>()?;
        for e in evaders {
            self.grid().check(*e)?;
        }
        Ok(evaders.iter().any(|e| fields.iter().all(|f| f.get(*e) <= 0.0)))
    }
}

/// One-shot end-game test without a persistent cache.
pub fn is_end_game(phi: &ScalarField, pursuers: &[Cell], evaders: &[Cell]) -> Result<bool> {
    ShadowCache::new(Arc::new(phi.clone())).is_end_game(pursuers, evaders)
}
