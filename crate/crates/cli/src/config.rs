//! Run configuration: one schema for every default, loaded from JSON and
//! overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use shadowgame_core::engine::{Controller, DEFAULT_K_MAX};
use shadowgame_core::geometry::{Cell, Scene};
use shadowgame_core::hji::{ObstacleMode, SolveOptions, DEFAULT_MAX_M, DEFAULT_STOP_TOL};
use shadowgame_core::mcts::{DEFAULT_ALPHA, DEFAULT_NOISE, DEFAULT_TAU};

pub const DEFAULT_M: usize = 16;
pub const DEFAULT_HORIZON: f64 = 10.0;
pub const DEFAULT_CONTROLLER: &str = "blend";
pub const DEFAULT_OUT: &str = "out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene: Option<PathBuf>,
    pub m: usize,
    /// Replaces the scene's pursuer speed.
    pub f_p: Option<f64>,
    /// Replaces the scene's evader speed.
    pub f_e: Option<f64>,
    pub controller: String,
    /// Search iterations; replaces the count in `controller`.
    pub iterations: Option<usize>,
    pub noise: f64,
    pub alpha: f64,
    pub tau: f64,
    pub k_max: usize,
    pub seed: u64,
    pub out: PathBuf,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: Option<f64>,
    pub stop_tol: f64,
    pub mode: ObstacleMode,
    pub max_m: usize,
    /// Worker threads; all cores when absent.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: None,
            m: DEFAULT_M,
            f_p: None,
            f_e: None,
            controller: DEFAULT_CONTROLLER.into(),
            iterations: None,
            noise: DEFAULT_NOISE,
            alpha: DEFAULT_ALPHA,
            tau: DEFAULT_TAU,
            k_max: DEFAULT_K_MAX,
            seed: 0,
            out: PathBuf::from(DEFAULT_OUT),
            horizon: DEFAULT_HORIZON,
            dt: None,
            stop_tol: DEFAULT_STOP_TOL,
            mode: ObstacleMode::default(),
            max_m: DEFAULT_MAX_M,
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// The scene file with any speed overrides applied.
    pub fn scene(&self) -> Result<Scene> {
        let Some(path) = &self.scene else {
            bail!("no scene given; pass --scene or set `scene` in the config")
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut scene = Scene::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(f) = self.f_p {
            scene.f_p = f;
        }
        if let Some(f) = self.f_e {
            scene.f_e = f;
        }
        scene.validate()?;
        Ok(scene)
    }

    pub fn controller(&self) -> Result<Controller> {
        let mut c: Controller = self
            .controller
            .parse()
            .with_context(|| format!("controller {:?}", self.controller))?;
        if let Controller::Mcts { params, .. } = &mut c {
            if let Some(n) = self.iterations {
                params.iterations = n;
            }
            params.noise = self.noise;
            params.alpha = self.alpha;
            params.tau = self.tau;
            params.validate()?;
        }
        Ok(c)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            horizon: self.horizon,
            dt: self.dt,
            stop_tol: self.stop_tol,
            mode: self.mode,
            eps: None,
            v_min: shadowgame_core::geometry::V_MIN,
            max_m: self.max_m,
        }
    }
}

/// `i,j`
pub fn parse_cell(s: &str) -> Result<Cell> {
    let (i, j) = s
        .trim()
        .split_once(',')
        .with_context(|| format!("expected `i,j`, got {s:?}"))?;
    Ok(Cell::new(i.trim().parse()?, j.trim().parse()?))
}

/// `i,j;k,l;...`; empty for an empty string.
pub fn parse_cells(s: &str) -> Result<Vec<Cell>> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_cell).collect()
}

/// `x,y`
pub fn parse_point(s: &str) -> Result<[f64; 2]> {
    let (x, y) = s
        .trim()
        .split_once(',')
        .with_context(|| format!("expected `x,y`, got {s:?}"))?;
    Ok([x.trim().parse()?, y.trim().parse()?])
}
