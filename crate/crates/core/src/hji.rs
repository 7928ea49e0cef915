//! Finite-horizon value function of the one-pursuer, one-evader game, solved
//! with an explicit upwind scheme on the 4-D lattice of joint positions.
//!
//! `V[i,j,k,l]` is the game time when the pursuer starts in cell `(i,j)` and
//! the evader in cell `(k,l)`. The buffer is row-major in `(i,j,k,l)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    default_regularization_width, regularize_speed, signed_distance, Cell, Grid2D, ScalarField, Scene, LARGE,
    UNREACHABLE, V_MIN,
};
use crate::visibility::{vantage_fields_at, AuxSource, ShadowCache};

/// Default cap on `m` for the dense 4-D buffer.
pub const DEFAULT_MAX_M: usize = 32;
/// Default L¹ change below which iteration stops.
pub const DEFAULT_STOP_TOL: f64 = 1e-5;
/// Fraction of the horizon used as the winning threshold.
pub const WIN_FRACTION: f64 = 0.9;
const CONTROL_EPS: f64 = 1e-9;

/// `a⁺` if it dominates `b⁻`, otherwise `−b⁻`.
#[inline]
pub fn sgnmax(a: f64, b: f64) -> f64 {
    let a_plus = a.max(0.0);
    let b_minus = -(b.min(0.0));
    if a_plus >= b_minus {
        a_plus
    } else {
        -b_minus
    }
}

/// Largest stable time step for the given speeds.
pub fn cfl_bound(h: f64, f_p: f64, f_e: f64) -> f64 {
    h / (16.0 * f_p.max(f_e))
}

/// How obstacles enter the scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObstacleMode {
    /// Players keep moving through obstacles at a smoothly reduced speed; the
    /// interior is only masked to `LARGE` when values are reported.
    #[default]
    Regularized,
    /// Obstacle cells are removed from the lattice and act like the grid edge.
    Walled,
}

/// Everything the time stepper needs besides the current values.
#[derive(Debug, Clone)]
pub struct HjiProblem {
    grid: Grid2D,
    phi: Arc<ScalarField>,
    speed_p: ScalarField,
    speed_e: ScalarField,
    f_p: f64,
    f_e: f64,
    obstacle: Vec<bool>,
    terminal: Vec<bool>,
    mode: ObstacleMode,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    pub horizon: f64,
    /// Defaults to the CFL bound.
    pub dt: Option<f64>,
    pub stop_tol: f64,
    pub mode: ObstacleMode,
    /// Transition width for speed regularization; defaults to `16h`.
    pub eps: Option<f64>,
    pub v_min: f64,
    pub max_m: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            horizon: 10.0,
            dt: None,
            stop_tol: DEFAULT_STOP_TOL,
            mode: ObstacleMode::default(),
            eps: None,
            v_min: V_MIN,
            max_m: DEFAULT_MAX_M,
        }
    }
}

fn speed_field(raw: f64, phi: &ScalarField, eps: f64, v_min: f64) -> ScalarField {
    if raw <= v_min {
        // a stationary (or crawling) player moves at its raw speed everywhere
        ScalarField::constant(phi.grid(), raw)
    } else {
        regularize_speed(raw, phi, eps, v_min)
    }
}

impl HjiProblem {
    pub fn new(scene: &Scene, grid: Grid2D, opts: &SolveOptions) -> Result<Self> {
        let phi = Arc::new(signed_distance(scene, grid));
        Self::with_phi(phi, scene.f_p, scene.f_e, opts)
    }

    /// Builds the problem and precomputes the end-game set.
    pub fn with_phi(phi: Arc<ScalarField>, f_p: f64, f_e: f64, opts: &SolveOptions) -> Result<Self> {
        let grid = phi.grid();
        let m = grid.m();
        if m > opts.max_m {
            return Err(Error::GridTooLarge { m, limit: opts.max_m });
        }
        if !(f_p >= 0.0 && f_e > 0.0 && f_p.is_finite() && f_e.is_finite()) {
            return Err(Error::InvalidParameter(format!("speeds f_p={f_p}, f_e={f_e}")));
        }
        let eps = opts.eps.unwrap_or_else(|| default_regularization_width(grid));
        let speed_p = speed_field(f_p, &phi, eps, opts.v_min);
        let speed_e = speed_field(f_e, &phi, eps, opts.v_min);
        let obstacle: Vec<bool> = phi.values().iter().map(|&v| v <= 0.0).collect();
        let cache = ShadowCache::new(Arc::clone(&phi));
        let n2 = grid.len();
        let slabs: Vec<Vec<bool>> = (0..n2)
            .into_par_iter()
            .map(|p| {
                if obstacle[p] {
                    // Nothing is visible from inside an obstacle.
                    return obstacle.iter().map(|o| !o).collect();
                }
                let xi = cache.xi(grid.cell(p)).expect("free vantage");
                xi.values().iter().map(|&v| v <= 0.0).collect()
            })
            .collect();
        let terminal = slabs.into_iter().flatten().collect();
        Ok(Self {
            grid,
            phi,
            speed_p,
            speed_e,
            f_p,
            f_e,
            obstacle,
            terminal,
            mode: opts.mode,
        })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn speeds(&self) -> (&ScalarField, &ScalarField) {
        (&self.speed_p, &self.speed_e)
    }

    pub fn f_p(&self) -> f64 {
        self.f_p
    }

    pub fn f_e(&self) -> f64 {
        self.f_e
    }

    pub fn mode(&self) -> ObstacleMode {
        self.mode
    }

    #[inline]
    pub fn flat(&self, p: Cell, e: Cell) -> usize {
        self.grid.index(p) * self.grid.len() + self.grid.index(e)
    }

    pub fn is_terminal(&self, p: Cell, e: Cell) -> bool {
        self.terminal[self.flat(p, e)]
    }

    pub fn terminal_mask(&self) -> &[bool] {
        &self.terminal
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.obstacle[self.grid.index(c)]
    }

    /// Whether an index sits in the free × free part of the lattice.
    pub fn is_free_pair(&self, flat: usize) -> bool {
        let n2 = self.grid.len();
        !self.obstacle[flat / n2] && !self.obstacle[flat % n2]
    }

    pub fn cfl_bound(&self) -> f64 {
        cfl_bound(self.grid.h(), self.f_p, self.f_e)
    }

    fn check_dt(&self, dt: f64) -> Result<()> {
        let bound = self.cfl_bound();
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, bound });
        }
        Ok(())
    }

    /// Neighbour value along one axis, or the centre value when the
    /// neighbour is off the lattice.
    #[inline]
    fn neighbour(
        &self,
        v: &[f64],
        flat: usize,
        center: f64,
        cell_of: usize,
        stride: usize,
        step: isize,
        axis_pos: usize,
    ) -> f64 {
        let m = self.grid.m();
        let next = axis_pos as isize + step;
        if next < 0 || next >= m as isize {
            return center;
        }
        let nflat = if step > 0 { flat + stride } else { flat - stride };
        if self.mode == ObstacleMode::Walled {
            let n2 = self.grid.len();
            let ncell = if cell_of == 0 { nflat / n2 } else { nflat % n2 };
            if self.obstacle[ncell] {
                return center;
            }
        }
        v[nflat]
    }

    /// Upwind gradient magnitudes `(|∇_P V|, |∇_E V|)` at a lattice index.
    pub fn gradient_norms(&self, v: &[f64], flat: usize) -> (f64, f64) {
        let (p, e) = self.upwind_partials(v, flat);
        (p[0].hypot(p[1]), e[0].hypot(e[1]))
    }

    /// Signed upwind partial derivatives for pursuer and evader axes.
    pub fn upwind_partials(&self, v: &[f64], flat: usize) -> ([f64; 2], [f64; 2]) {
        let m = self.grid.m();
        let h = self.grid.h();
        let (i, j, k, l) = (flat / (m * m * m), (flat / (m * m)) % m, (flat / m) % m, flat % m);
        let c = v[flat];
        let strides = [m * m * m, m * m, m, 1];
        let pos = [i, j, k, l];
        let mut d = [0.0; 4];
        for axis in 0..4 {
            let owner = if axis < 2 { 0 } else { 1 };
            let up = self.neighbour(v, flat, c, owner, strides[axis], 1, pos[axis]);
            let down = self.neighbour(v, flat, c, owner, strides[axis], -1, pos[axis]);
            let fwd = (up - c) / h;
            let bwd = (c - down) / h;
            d[axis] = if axis < 2 { sgnmax(fwd, bwd) } else { sgnmax(bwd, fwd) };
        }
        ([d[0], d[1]], [d[2], d[3]])
    }

    /// One explicit step of the scheme. Terminal indices are pinned to zero;
    /// in walled mode obstacle indices are pinned to `LARGE`.
    pub fn step(&self, v: &[f64], dt: f64) -> Result<Vec<f64>> {
        self.check_dt(dt)?;
        let n2 = self.grid.len();
        let mut out = vec![0.0; v.len()];
        out.par_chunks_mut(n2).enumerate().for_each(|(p, slab)| {
            let fp = self.speed_p.values()[p];
            let p_obstacle = self.obstacle[p];
            for (e, slot) in slab.iter_mut().enumerate() {
                let flat = p * n2 + e;
                *slot = if self.terminal[flat] {
                    0.0
                } else if self.mode == ObstacleMode::Walled && (p_obstacle || self.obstacle[e]) {
                    LARGE
                } else {
                    let fe = self.speed_e.values()[e];
                    let (gp, ge) = self.gradient_norms(v, flat);
                    v[flat] + dt * (1.0 + fp * gp - fe * ge)
                };
            }
        });
        Ok(out)
    }

    /// Initial values: zero on the lattice, `LARGE` on walled obstacles.
    pub fn initial_values(&self) -> Vec<f64> {
        let n2 = self.grid.len();
        (0..n2 * n2)
            .map(|flat| {
                if self.mode == ObstacleMode::Walled && !self.is_free_pair(flat) {
                    LARGE
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// L¹ norm of the change between two iterates over free × free indices.
    pub fn l1_change(&self, a: &[f64], b: &[f64]) -> f64 {
        let h2 = self.grid.h().powi(2);
        a.iter()
            .zip(b)
            .enumerate()
            .filter(|(k, _)| self.is_free_pair(*k))
            .map(|(_, (x, y))| (x - y).abs())
            .sum::<f64>()
            * h2
            * h2
    }
}

/// Solved value function with its run metadata.
#[derive(Clone, Debug)]
pub struct ValueFunction4D {
    problem: Arc<HjiProblem>,
    values: Vec<f64>,
    pub horizon: f64,
    pub iterations: usize,
    pub dt: f64,
    pub last_change: f64,
    pub scene_hash: String,
}

impl ValueFunction4D {
    pub fn from_values(
        problem: Arc<HjiProblem>,
        values: Vec<f64>,
        horizon: f64,
        dt: f64,
        iterations: usize,
    ) -> Result<Self> {
        let n2 = problem.grid.len();
        if values.len() != n2 * n2 {
            return Err(Error::FieldSize {
                expected: n2 * n2,
                got: values.len(),
            });
        }
        Ok(Self {
            problem,
            values,
            horizon,
            iterations,
            dt,
            last_change: f64::NAN,
            scene_hash: String::new(),
        })
    }

    pub fn problem(&self) -> &HjiProblem {
        &self.problem
    }

    pub fn grid(&self) -> Grid2D {
        self.problem.grid
    }

    /// Working values of the scheme, including the evolved obstacle interior
    /// in regularized mode.
    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    /// Reported value: `LARGE` when either player is inside an obstacle.
    pub fn value(&self, p: Cell, e: Cell) -> f64 {
        if self.problem.is_obstacle(p) || self.problem.is_obstacle(e) {
            LARGE
        } else {
            self.values[self.problem.flat(p, e)]
        }
    }

    /// Reported values for the whole lattice.
    pub fn reported_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(k, &v)| if self.problem.is_free_pair(k) { v } else { LARGE })
            .collect()
    }

    /// `V(p, ·)` over evader cells.
    pub fn slice_fixed_pursuer(&self, p: Cell) -> ScalarField {
        ScalarField::from_fn(self.grid(), |e| self.value(p, e))
    }

    /// `V(·, e)` over pursuer cells.
    pub fn slice_fixed_evader(&self, e: Cell) -> ScalarField {
        ScalarField::from_fn(self.grid(), |p| self.value(p, e))
    }

    pub fn gradient_norms(&self, p: Cell, e: Cell) -> (f64, f64) {
        self.problem.gradient_norms(&self.values, self.problem.flat(p, e))
    }

    /// Multilinear interpolation of the working values at continuous
    /// positions; lattice corners at `LARGE` are dropped from the stencil.
    pub fn interpolate(&self, xp: [f64; 2], xe: [f64; 2]) -> f64 {
        let m = self.grid().m();
        let coords = [xp[0], xp[1], xe[0], xe[1]];
        let mut base = [0usize; 4];
        let mut frac = [0.0; 4];
        for a in 0..4 {
            let x = (coords[a] * m as f64 - 0.5).clamp(0.0, (m - 1) as f64);
            let b = (x.floor() as usize).min(m - 2);
            base[a] = b;
            frac[a] = x - b as f64;
        }
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for corner in 0..16usize {
            let mut w = 1.0;
            let mut flat = 0;
            for a in 0..4 {
                let bit = (corner >> (3 - a)) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat = flat * m + base[a] + bit;
            }
            let v = self.values[flat];
            if w > 0.0 && v < UNREACHABLE {
                acc += w * v;
                wsum += w;
            }
        }
        if wsum > 0.0 {
            acc / wsum
        } else {
            LARGE
        }
    }
}

/// Iterates the scheme from `V ≡ 0` until the horizon is reached or the
/// per-step L¹ change drops below `stop_tol`.
pub fn solve_value_function(scene: &Scene, grid: Grid2D, opts: &SolveOptions) -> Result<ValueFunction4D> {
    solve_with_progress(scene, grid, opts, |_, _| {})
}

pub fn solve_with_progress(
    scene: &Scene,
    grid: Grid2D,
    opts: &SolveOptions,
    mut progress: impl FnMut(usize, f64),
) -> Result<ValueFunction4D> {
    let problem = Arc::new(HjiProblem::new(scene, grid, opts)?);
    let dt = opts.dt.unwrap_or_else(|| problem.cfl_bound());
    problem.check_dt(dt)?;
    let mut values = problem.initial_values();
    let mut n = 0usize;
    let mut last_change = f64::INFINITY;
    while (n as f64) * dt < opts.horizon - 1e-12 {
        let next = problem.step(&values, dt)?;
        last_change = problem.l1_change(&next, &values);
        values = next;
        n += 1;
        progress(n, last_change);
        if last_change < opts.stop_tol {
            break;
        }
    }
    tracing::debug!(iterations = n, last_change, "value function solve finished");
    let mut vf = ValueFunction4D::from_values(problem, values, opts.horizon, dt, n)?;
    vf.last_change = last_change;
    vf.scene_hash = scene.hash();
    Ok(vf)
}

/// Feedback controls `σ_P = ∇_P V/|∇_P V|`, `σ_E = −∇_E V/|∇_E V|`; a
/// vanishing gradient yields the zero control.
pub fn optimal_controls(v: &ValueFunction4D, p: Cell, e: Cell) -> ([f64; 2], [f64; 2]) {
    let (gp, ge) = v.problem.upwind_partials(&v.values, v.problem.flat(p, e));
    (normalize(gp, 1.0), normalize(ge, -1.0))
}

fn normalize(g: [f64; 2], sign: f64) -> [f64; 2] {
    let n = g[0].hypot(g[1]);
    if n < CONTROL_EPS {
        [0.0, 0.0]
    } else {
        [sign * g[0] / n, sign * g[1] / n]
    }
}

/// Controls at continuous positions from upwind differences of the
/// interpolated value function.
pub fn interpolated_controls(v: &ValueFunction4D, xp: [f64; 2], xe: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let h = v.grid().h();
    let c = v.interpolate(xp, xe);
    let shift = |d: [f64; 4]| v.interpolate([xp[0] + d[0], xp[1] + d[1]], [xe[0] + d[2], xe[1] + d[3]]);
    let mut d = [0.0; 4];
    for (axis, slot) in d.iter_mut().enumerate() {
        let mut up = [0.0; 4];
        up[axis] = h;
        let mut down = [0.0; 4];
        down[axis] = -h;
        let fwd = (shift(up) - c) / h;
        let bwd = (c - shift(down)) / h;
        *slot = if axis < 2 { sgnmax(fwd, bwd) } else { sgnmax(bwd, fwd) };
    }
    (normalize([d[0], d[1]], 1.0), normalize([d[2], d[3]], -1.0))
}

/// Pursuer- and evader-winning masks over the lattice, threshold `0.9·T`.
/// Indices with a player inside an obstacle belong to neither.
pub fn winning_regions(v: &ValueFunction4D, horizon: f64) -> (Vec<bool>, Vec<bool>) {
    let threshold = WIN_FRACTION * horizon;
    let n = v.values.len();
    let mut pursuer = vec![false; n];
    let mut evader = vec![false; n];
    for k in 0..n {
        if v.problem.is_free_pair(k) {
            if v.values[k] > threshold {
                pursuer[k] = true;
            } else {
                evader[k] = true;
            }
        }
    }
    (pursuer, evader)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    PursuerWin,
    EvaderWin,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub pursuer: Vec<[f64; 2]>,
    pub evader: Vec<[f64; 2]>,
    pub outcome: Outcome,
}

fn clamp_unit(p: [f64; 2], h: f64) -> [f64; 2] {
    let lo = 0.5 * h;
    let hi = 1.0 - 0.5 * h;
    [p[0].clamp(lo, hi), p[1].clamp(lo, hi)]
}

/// Euler playback of optimal feedback play from continuous start positions.
pub fn play_hji_trajectory(
    v: &ValueFunction4D,
    start_p: [f64; 2],
    start_e: [f64; 2],
    dt: f64,
    max_steps: usize,
) -> Result<Trajectory> {
    let grid = v.grid();
    let problem = &v.problem;
    for s in [start_p, start_e] {
        let c = grid
            .cell_at(s)
            .ok_or_else(|| Error::InvalidParameter(format!("start {s:?} outside domain")))?;
        if problem.phi.bilinear(s) <= 0.0 || problem.is_obstacle(c) {
            return Err(Error::InsideObstacle(c));
        }
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt}")));
    }
    let terminal = |xp: [f64; 2], xe: [f64; 2]| problem.is_terminal(grid.nearest_cell(xp), grid.nearest_cell(xe));
    let mut traj = Trajectory {
        times: vec![0.0],
        pursuer: vec![start_p],
        evader: vec![start_e],
        outcome: Outcome::PursuerWin,
    };
    if terminal(start_p, start_e) {
        traj.outcome = Outcome::EvaderWin;
        return Ok(traj);
    }
    let (sp, se) = problem.speeds();
    let (mut xp, mut xe) = (start_p, start_e);
    let mut t = 0.0;
    for _ in 0..max_steps {
        if t >= v.horizon - 1e-12 {
            break;
        }
        let (cp, ce) = interpolated_controls(v, xp, xe);
        let (fp, fe) = (sp.bilinear(xp), se.bilinear(xe));
        xp = clamp_unit([xp[0] + dt * fp * cp[0], xp[1] + dt * fp * cp[1]], grid.h());
        xe = clamp_unit([xe[0] + dt * fe * ce[0], xe[1] + dt * fe * ce[1]], grid.h());
        t += dt;
        traj.times.push(t);
        traj.pursuer.push(xp);
        traj.evader.push(xe);
        if terminal(xp, xe) {
            traj.outcome = Outcome::EvaderWin;
            break;
        }
    }
    Ok(traj)
}

/// Time-stepping solver for a fixed pursuer (`f_P = 0`): the evader's
/// travel time to the shadow of a stationary vantage.
#[derive(Debug, Clone)]
pub struct StationaryProblem {
    grid: Grid2D,
    speed_e: ScalarField,
    terminal: Vec<bool>,
    obstacle: Vec<bool>,
    mode: ObstacleMode,
}

impl StationaryProblem {
    /// Pursuer fixed at the center of cell `pursuer`.
    pub fn new(phi: &ScalarField, pursuer: Cell, f_e: f64, opts: &SolveOptions) -> Result<Self> {
        phi.grid().check(pursuer)?;
        Self::at_point(phi, phi.grid().center(pursuer), f_e, opts)
    }

    /// Pursuer fixed at an arbitrary free point.
    pub fn at_point(phi: &ScalarField, pursuer: [f64; 2], f_e: f64, opts: &SolveOptions) -> Result<Self> {
        let grid = phi.grid();
        let eps = opts.eps.unwrap_or_else(|| default_regularization_width(grid));
        let xi = vantage_fields_at(phi, pursuer, AuxSource::Visibility)?.xi;
        Ok(Self {
            grid,
            speed_e: speed_field(f_e, phi, eps, opts.v_min),
            terminal: xi.values().iter().map(|&v| v <= 0.0).collect(),
            obstacle: phi.values().iter().map(|&v| v <= 0.0).collect(),
            mode: opts.mode,
        })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn terminal(&self) -> &[bool] {
        &self.terminal
    }

    pub fn obstacle(&self) -> &[bool] {
        &self.obstacle
    }

    pub fn initial_values(&self) -> Vec<f64> {
        self.obstacle
            .iter()
            .map(|&o| {
                if o && self.mode == ObstacleMode::Walled {
                    LARGE
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Same update as the 4-D scheme restricted to one pursuer cell.
    pub fn step(&self, v: &[f64], dt: f64) -> Vec<f64> {
        let m = self.grid.m();
        let h = self.grid.h();
        let walled = self.mode == ObstacleMode::Walled;
        let get = |k: usize, c: f64, ok: bool| -> f64 {
            if !ok || (walled && self.obstacle[k]) {
                c
            } else {
                v[k]
            }
        };
        (0..v.len())
            .map(|e| {
                if self.terminal[e] {
                    return 0.0;
                }
                if walled && self.obstacle[e] {
                    return LARGE;
                }
                let (k, l) = (e / m, e % m);
                let c = v[e];
                let xu = get(e.wrapping_add(m), c, k + 1 < m);
                let xd = get(e.wrapping_sub(m), c, k > 0);
                let yu = get(e.wrapping_add(1), c, l + 1 < m);
                let yd = get(e.wrapping_sub(1), c, l > 0);
                let dx = sgnmax((c - xd) / h, (xu - c) / h);
                let dy = sgnmax((c - yd) / h, (yu - c) / h);
                c + dt * (1.0 - self.speed_e.values()[e] * dx.hypot(dy))
            })
            .collect()
    }

    pub fn l1_change(&self, a: &[f64], b: &[f64]) -> f64 {
        let h2 = self.grid.h().powi(2);
        a.iter()
            .zip(b)
            .zip(&self.obstacle)
            .filter(|(_, o)| !**o)
            .map(|((x, y), _)| (x - y).abs())
            .sum::<f64>()
            * h2
    }

    /// Iterates to steady state; returns the field and the iteration count.
    pub fn solve(&self, dt: f64, stop_tol: f64, max_time: f64) -> (ScalarField, usize) {
        let mut v = self.initial_values();
        let mut n = 0;
        while (n as f64) * dt < max_time {
            let next = self.step(&v, dt);
            let change = self.l1_change(&next, &v);
            v = next;
            n += 1;
            if change < stop_tol {
                break;
            }
        }
        let values = v
            .iter()
            .zip(&self.obstacle)
            .map(|(&x, &o)| if o { LARGE } else { x })
            .collect();
        (ScalarField::new(self.grid, values).expect("finite values"), n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;

    fn circle(f_p: f64, f_e: f64) -> Scene {
        Scene::new(
            vec![Shape::Circle {
                center: [0.5, 0.5],
                radius: 0.15,
            }],
            f_p,
            f_e,
            1,
            1,
        )
        .unwrap()
    }

    #[test]
    fn sgnmax_cases() {
        assert_eq!(sgnmax(1.0, 2.0), 1.0);
        assert_eq!(sgnmax(-1.0, -2.0), -2.0);
        assert_eq!(sgnmax(0.0, 0.0), 0.0);
        assert_eq!(sgnmax(3.0, -1.0), 3.0);
        assert_eq!(sgnmax(1.0, -3.0), -3.0);
    }

    fn empty_problem(m: usize) -> HjiProblem {
        let grid = Grid2D::new(m).unwrap();
        let scene = Scene::new(vec![], 1.0, 1.0, 1, 1).unwrap();
        HjiProblem::new(&scene, grid, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn gradient_of_linear_fields() {
        let pr = empty_problem(8);
        let m = 8;
        let h = pr.grid().h();
        let c = 0.7;
        let n2 = m * m;
        let lin_p: Vec<f64> = (0..n2 * n2).map(|k| c * ((k / (m * m * m)) as f64) * h).collect();
        let lin_e: Vec<f64> = (0..n2 * n2).map(|k| c * (((k / m) % m) as f64) * h).collect();
        let flat = pr.flat(Cell::new(3, 4), Cell::new(5, 2));
        let (gp, ge) = pr.gradient_norms(&lin_p, flat);
        assert!((gp - c).abs() < 1e-12 && ge.abs() < 1e-12);
        let (gp, ge) = pr.gradient_norms(&lin_e, flat);
        assert!(gp.abs() < 1e-12 && (ge - c).abs() < 1e-12);
        let constant = vec![2.5; n2 * n2];
        assert_eq!(pr.gradient_norms(&constant, flat), (0.0, 0.0));
    }

    #[test]
    fn step_from_zero_and_cfl() {
        let grid = Grid2D::new(8).unwrap();
        let pr = HjiProblem::new(&circle(2.0, 1.0), grid, &SolveOptions::default()).unwrap();
        let dt = pr.cfl_bound();
        assert!(matches!(
            pr.step(&pr.initial_values(), dt * 1.5),
            Err(Error::Cfl { .. })
        ));
        let v1 = pr.step(&pr.initial_values(), dt).unwrap();
        for (k, &v) in v1.iter().enumerate() {
            if pr.terminal_mask()[k] {
                assert_eq!(v, 0.0);
            } else {
                assert!((v - dt).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_horizon_is_zero() {
        let grid = Grid2D::new(8).unwrap();
        let opts = SolveOptions {
            horizon: 0.0,
            ..Default::default()
        };
        let v = solve_value_function(&circle(2.0, 1.0), grid, &opts).unwrap();
        assert_eq!(v.iterations, 0);
        assert!(v.raw_values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn grid_cap_enforced() {
        let grid = Grid2D::new(64).unwrap();
        assert!(matches!(
            HjiProblem::new(&circle(2.0, 1.0), grid, &SolveOptions::default()),
            Err(Error::GridTooLarge { .. })
        ));
    }

    #[test]
    fn controls_follow_linear_fields() {
        let pr = Arc::new(empty_problem(8));
        let m = 8;
        let h = pr.grid().h();
        let n2 = m * m;
        let lin_p: Vec<f64> = (0..n2 * n2).map(|k| ((k / (m * m * m)) as f64) * h).collect();
        let v = ValueFunction4D::from_values(Arc::clone(&pr), lin_p, 1.0, 0.01, 1).unwrap();
        let (sp, se) = optimal_controls(&v, Cell::new(3, 3), Cell::new(4, 4));
        assert_eq!(sp, [1.0, 0.0]);
        assert_eq!(se, [0.0, 0.0]);
        let lin_e: Vec<f64> = (0..n2 * n2).map(|k| (((k / m) % m) as f64) * h).collect();
        let v = ValueFunction4D::from_values(pr, lin_e, 1.0, 0.01, 1).unwrap();
        let (sp, se) = optimal_controls(&v, Cell::new(3, 3), Cell::new(4, 4));
        assert_eq!(sp, [0.0, 0.0]);
        assert_eq!(se, [-1.0, 0.0]);
    }

    #[test]
    fn winning_region_edge_cases() {
        let pr = Arc::new(empty_problem(8));
        let n = pr.grid().len().pow(2);
        let v = ValueFunction4D::from_values(Arc::clone(&pr), vec![10.0; n], 10.0, 0.01, 1).unwrap();
        let (pw, ew) = winning_regions(&v, 10.0);
        assert!(pw.iter().all(|&b| b) && ew.iter().all(|&b| !b));
        let v = ValueFunction4D::from_values(pr, vec![0.0; n], 10.0, 0.01, 1).unwrap();
        let (pw, ew) = winning_regions(&v, 10.0);
        assert!(pw.iter().all(|&b| !b) && ew.iter().all(|&b| b));
    }
}
