//! Discrete multi-player game: action sets, the local pursuer policies
//! (distance, shadow, blend) and the greedy evader rule.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{masked_speed, signed_distance, solve_eikonal, Cell, Grid2D, ScalarField, Scene, LARGE, V_MIN};
use crate::visibility::ShadowCache;

/// Exponent cap applied to time-to-occlusion before the softmax.
pub const SOFTMAX_CLAMP: f64 = 50.0;

/// Positions of both teams and the turn counter.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameState {
    pub pursuers: Vec<Cell>,
    pub evaders: Vec<Cell>,
    pub turn: usize,
}

impl GameState {
    pub fn new(pursuers: Vec<Cell>, evaders: Vec<Cell>) -> Self {
        Self {
            pursuers,
            evaders,
            turn: 0,
        }
    }
}

/// Target cells for each member of a team, in team order.
pub type JointAction = Vec<Cell>;

/// Cells one player can reach within a time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    pub player: usize,
    /// Ordered by displacement, then lexicographically.
    pub cells: Vec<Cell>,
    pub dt: f64,
}

/// Probability weights over joint actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub support: Vec<JointAction>,
    pub weights: Vec<f64>,
}

#[derive(Serialize)]
struct PolicyEntry<'a> {
    action: &'a [Cell],
    weight: f64,
}

impl Policy {
    /// Softmax of `scores` over `support`.
    pub fn softmax(support: Vec<JointAction>, scores: &[f64]) -> Self {
        Self {
            support,
            weights: softmax(scores),
        }
    }

    pub fn uniform(support: Vec<JointAction>) -> Self {
        let n = support.len();
        Self {
            support,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Index of the largest weight; the earliest wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.weights)
    }

    pub fn best(&self) -> &JointAction {
        &self.support[self.argmax()]
    }

    /// Elementwise product with another policy on the same support,
    /// renormalized.
    pub fn product(&self, other: &Policy) -> Policy {
        debug_assert_eq!(self.support, other.support);
        let raw: Vec<f64> = self.weights.iter().zip(&other.weights).map(|(a, b)| a * b).collect();
        Policy {
            support: self.support.clone(),
            weights: normalize(raw),
        }
    }

    /// JSON list of `{action, weight}` entries.
    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<PolicyEntry<'_>> = self
            .support
            .iter()
            .zip(&self.weights)
            .map(|(a, &w)| PolicyEntry { action: a, weight: w })
            .collect();
        serde_json::to_value(entries).expect("policy serializes")
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

fn normalize(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    if total > 0.0 && total.is_finite() {
        raw.into_iter().map(|w| w / total).collect()
    } else {
        let n = raw.len();
        vec![1.0 / n as f64; n]
    }
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    normalize(scores.iter().map(|s| (s - top).exp()).collect())
}

/// Hausdorff-like cost with the max replaced by a sum. `arrival[j]` is the
/// pursuer arrival-time field to evader `j`.
pub fn distance_cost(candidate: &[Cell], arrival: &[&ScalarField]) -> f64 {
    let d = |i: usize, j: usize| arrival[j].get(candidate[i]);
    let per_pursuer: f64 = (0..candidate.len())
        .map(|i| {
            (0..arrival.len())
                .map(|j| d(i, j))
                .fold(f64::INFINITY, f64::min)
                .powi(2)
        })
        .sum();
    let per_evader: f64 = (0..arrival.len())
        .map(|j| {
            (0..candidate.len())
                .map(|i| d(i, j))
                .fold(f64::INFINITY, f64::min)
                .powi(2)
        })
        .sum();
    0.5 * per_pursuer.sqrt() + 0.5 * per_evader.sqrt()
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

fn displacement2(a: Cell, b: Cell) -> usize {
    let di = a.i.abs_diff(b.i);
    let dj = a.j.abs_diff(b.j);
    di * di + dj * dj
}

/// Cells reachable from `position` within `dt`, using local arrival times on
/// the 8-connected lattice (edge cost: step length over the mean slowness).
/// Only free cells are returned.
pub fn valid_actions(position: Cell, speed: &ScalarField, phi: &ScalarField, dt: f64) -> ActionSet {
    let grid = speed.grid();
    let h = grid.h();
    let sp = speed.values();
    let mut best: HashMap<usize, f64> = HashMap::new();
    let start = grid.index(position);
    best.insert(start, 0.0);
    let mut heap = BinaryHeap::from([Frontier(0.0, start)]);
    while let Some(Frontier(t, k)) = heap.pop() {
        if t > best[&k] {
            continue;
        }
        let c = grid.cell(k);
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let Some(n) = grid.offset(c, di, dj) else { continue };
                let nk = grid.index(n);
                let len = h * ((di * di + dj * dj) as f64).sqrt();
                let nt = t + len * 0.5 * (1.0 / sp[k] + 1.0 / sp[nk]);
                // relative slack absorbs rounding in exact lattice distances
                if nt > dt * (1.0 + 1e-12) {
                    continue;
                }
                if best.get(&nk).is_none_or(|&old| nt < old) {
                    best.insert(nk, nt);
                    heap.push(Frontier(nt, nk));
                }
            }
        }
    }
    let mut cells: Vec<Cell> = best
        .keys()
        .map(|&k| grid.cell(k))
        .filter(|&c| phi.get(c) > 0.0 || c == position)
        .collect();
    cells.sort_by_key(|&c| (displacement2(c, position), c));
    ActionSet { player: 0, cells, dt }
}

/// Cartesian product of per-member action sets, ordered by total squared
/// displacement and then lexicographically.
pub fn joint_actions(sets: &[ActionSet], origin: &[Cell]) -> Vec<JointAction> {
    let mut out: Vec<JointAction> = vec![Vec::new()];
    for set in sets {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                set.cells.iter().map(move |&c| {
                    let mut next = prefix.clone();
                    next.push(c);
                    next
                })
            })
            .collect();
    }
    out.sort_by_key(|a| {
        let disp: usize = a.iter().zip(origin).map(|(c, o)| displacement2(*c, *o)).sum();
        (disp, a.clone())
    });
    out
}

/// Map, speeds and memoized fields shared by every game on one scene.
#[derive(Debug)]
pub struct GameWorld {
    scene: Scene,
    grid: Grid2D,
    dt: f64,
    shadows: Arc<ShadowCache>,
    speed_p: ScalarField,
    speed_e: ScalarField,
    arrival_p: RwLock<HashMap<Cell, Arc<ScalarField>>>,
    arrival_e: RwLock<HashMap<Cell, Arc<ScalarField>>>,
    eikonal_solves: AtomicUsize,
}

impl GameWorld {
    /// World with the default step `Δt = 1.5h / f_E`.
    pub fn new(scene: Scene, grid: Grid2D) -> Result<Self> {
        let dt = 1.5 * grid.h() / scene.f_e;
        Self::with_dt(scene, grid, dt)
    }

    pub fn with_dt(scene: Scene, grid: Grid2D, dt: f64) -> Result<Self> {
        scene.validate()?;
        if scene.f_p <= 0.0 {
            return Err(Error::InvalidScene(
                "discrete games need f_p > 0; use the stationary controller".into(),
            ));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {dt}")));
        }
        let phi = Arc::new(signed_distance(&scene, grid));
        let speed_p = masked_speed(scene.f_p, &phi, V_MIN);
        let speed_e = masked_speed(scene.f_e, &phi, V_MIN);
        Ok(Self {
            shadows: Arc::new(ShadowCache::new(phi)),
            scene,
            grid,
            dt,
            speed_p,
            speed_e,
            arrival_p: RwLock::new(HashMap::new()),
            arrival_e: RwLock::new(HashMap::new()),
            eikonal_solves: AtomicUsize::new(0),
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn phi(&self) -> &ScalarField {
        self.shadows.phi()
    }

    pub fn shadows(&self) -> &ShadowCache {
        &self.shadows
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.shadows.is_free(c)
    }

    /// Number of arrival-time solves performed so far.
    pub fn eikonal_solves(&self) -> usize {
        self.eikonal_solves.load(AtomicOrdering::Relaxed)
    }

    pub fn validate_state(&self, s: &GameState) -> Result<()> {
        if s.pursuers.len() != self.scene.k_p || s.evaders.len() != self.scene.k_e {
            return Err(Error::InvalidParameter(format!(
                "state has {} pursuers and {} evaders, scene expects {} and {}",
                s.pursuers.len(),
                s.evaders.len(),
                self.scene.k_p,
                self.scene.k_e
            )));
        }
        for c in s.pursuers.iter().chain(&s.evaders) {
            self.grid.check(*c)?;
            if !self.is_free(*c) {
                return Err(Error::InsideObstacle(*c));
            }
        }
        Ok(())
    }

    fn cached_arrival(
        &self,
        cache: &RwLock<HashMap<Cell, Arc<ScalarField>>>,
        speed: &ScalarField,
        from: Cell,
    ) -> Result<Arc<ScalarField>> {
        if let Some(f) = cache.read().expect("arrival cache").get(&from) {
            return Ok(Arc::clone(f));
        }
        let field = Arc::new(solve_eikonal(speed, &[from])?);
        self.eikonal_solves.fetch_add(1, AtomicOrdering::Relaxed);
        let mut guard = cache.write().expect("arrival cache");
        Ok(Arc::clone(guard.entry(from).or_insert(field)))
    }

    /// Pursuer-speed arrival times to `target`.
    pub fn pursuer_arrival(&self, target: Cell) -> Result<Arc<ScalarField>> {
        self.cached_arrival(&self.arrival_p, &self.speed_p, target)
    }

    /// Evader-speed arrival times from `origin`.
    pub fn evader_arrival(&self, origin: Cell) -> Result<Arc<ScalarField>> {
        self.cached_arrival(&self.arrival_e, &self.speed_e, origin)
    }

    pub fn pursuer_actions(&self, position: Cell) -> ActionSet {
        valid_actions(position, &self.speed_p, self.phi(), self.dt)
    }

    pub fn evader_actions(&self, position: Cell) -> ActionSet {
        valid_actions(position, &self.speed_e, self.phi(), self.dt)
    }

    /// Joint pursuer actions for the current state.
    pub fn pursuer_joint_actions(&self, s: &GameState) -> Vec<JointAction> {
        let sets: Vec<ActionSet> = s
            .pursuers
            .iter()
            .enumerate()
            .map(|(k, p)| ActionSet {
                player: k,
                ..self.pursuer_actions(*p)
            })
            .collect();
        joint_actions(&sets, &s.pursuers)
    }

    pub fn is_end_game(&self, s: &GameState) -> Result<bool> {
        self.shadows.is_end_game(&s.pursuers, &s.evaders)
    }

    /// Shortest evader travel time from `e` into the joint shadow of
    /// `pursuers`; `LARGE` when there is no shadow.
    pub fn time_to_occlusion(&self, pursuers: &[Cell], e: Cell) -> Result<f64> {
        let shadow = self.shadows.joint_shadow(pursuers)?;
        self.time_to_mask(&shadow, e)
    }

    fn time_to_mask(&self, shadow: &[bool], e: Cell) -> Result<f64> {
        if !shadow.iter().any(|&b| b) {
            return Ok(LARGE);
        }
        let arrival = self.evader_arrival(e)?;
        Ok(arrival
            .values()
            .iter()
            .zip(shadow)
            .filter(|(_, &s)| s)
            .map(|(&t, _)| t)
            .fold(LARGE, f64::min))
    }

    pub fn distance_policy(&self, s: &GameState) -> Result<Policy> {
        let support = self.pursuer_joint_actions(s);
        let fields = s
            .evaders
            .iter()
            .map(|e| self.pursuer_arrival(*e))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&ScalarField> = fields.iter().map(|f| f.as_ref()).collect();
        let scores: Vec<f64> = support.iter().map(|x| -distance_cost(x, &refs)).collect();
        Ok(Policy::softmax(support, &scores))
    }

    /// Worst-case time-to-occlusion `t**` for each candidate joint action.
    pub fn anticipated_occlusion_times(&self, s: &GameState, support: &[JointAction]) -> Result<Vec<f64>> {
        let evader_moves: Vec<ActionSet> = s.evaders.iter().map(|e| self.evader_actions(*e)).collect();
        support
            .iter()
            .map(|x| {
                let shadow = self.shadows.joint_shadow(x)?;
                let mut worst = LARGE;
                for set in &evader_moves {
                    for y in &set.cells {
                        worst = worst.min(self.time_to_mask(&shadow, *y)?);
                    }
                }
                Ok(worst)
            })
            .collect()
    }

    pub fn shadow_policy(&self, s: &GameState) -> Result<Policy> {
        let support = self.pursuer_joint_actions(s);
        let times = self.anticipated_occlusion_times(s, &support)?;
        let scores: Vec<f64> = times.iter().map(|t| t.min(SOFTMAX_CLAMP)).collect();
        Ok(Policy::softmax(support, &scores))
    }

    pub fn blend_policy(&self, s: &GameState) -> Result<Policy> {
        Ok(self.shadow_policy(s)?.product(&self.distance_policy(s)?))
    }

    pub fn policy(&self, kind: PolicyKind, s: &GameState) -> Result<Policy> {
        match kind {
            PolicyKind::Distance => self.distance_policy(s),
            PolicyKind::Shadow => self.shadow_policy(s),
            PolicyKind::Blend => self.blend_policy(s),
        }
    }

    /// Each evader greedily moves to the reachable cell with the smallest
    /// time-to-occlusion against `pursuers`.
    pub fn evader_rule(&self, pursuers: &[Cell], evaders: &[Cell]) -> Result<JointAction> {
        let shadow = self.shadows.joint_shadow(pursuers)?;
        evaders
            .iter()
            .map(|e| {
                let set = self.evader_actions(*e);
                let mut best = (f64::INFINITY, *e);
                for y in set.cells {
                    let t = self.time_to_mask(&shadow, y)?;
                    if t < best.0 {
                        best = (t, y);
                    }
                }
                Ok(best.1)
            })
            .collect()
    }

    /// Pursuers take `action`, evaders respond, turn advances.
    pub fn transition(&self, s: &GameState, action: &[Cell]) -> Result<GameState> {
        if action.len() != s.pursuers.len() {
            return Err(Error::InvalidAction(format!(
                "expected {} pursuer targets, got {}",
                s.pursuers.len(),
                action.len()
            )));
        }
        for (p, target) in s.pursuers.iter().zip(action) {
            if !self.pursuer_actions(*p).cells.contains(target) {
                return Err(Error::InvalidAction(format!("{target} is not reachable from {p}")));
            }
        }
        let evaders = self.evader_rule(action, &s.evaders)?;
        Ok(GameState {
            pursuers: action.to_vec(),
            evaders,
            turn: s.turn + 1,
        })
    }

    /// Like `transition`, but the evader targets are given (validated against
    /// the evader action sets from the pre-move state).
    pub fn transition_with_evaders(
        &self,
        s: &GameState,
        pursuer_action: &[Cell],
        evader_action: &[Cell],
    ) -> Result<GameState> {
        if evader_action.len() != s.evaders.len() {
            return Err(Error::InvalidAction("evader action has the wrong length".into()));
        }
        for (e, target) in s.evaders.iter().zip(evader_action) {
            if !self.evader_actions(*e).cells.contains(target) {
                return Err(Error::InvalidAction(format!("{target} is not reachable from {e}")));
            }
        }
        let mut next = self.transition(s, pursuer_action)?;
        next.evaders = evader_action.to_vec();
        Ok(next)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Distance,
    Shadow,
    Blend,
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance" => Ok(Self::Distance),
            "shadow" => Ok(Self::Shadow),
            "blend" => Ok(Self::Blend),
            other => Err(Error::UnknownEvaluator(other.to_string())),
        }
    }
}
