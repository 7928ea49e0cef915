//! Turn loop for the discrete game, batch sweeps over evader starts, and
//! search-depth statistics.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cell, ScalarField, LARGE};
use crate::hji::Outcome;
use crate::mcts::{mcts_search, EvaluatorKind, PursuitGame, SearchParams, TraceEntry};
use crate::strategies::{GameState, GameWorld, JointAction, PolicyKind};

/// Default horizon in turns.
pub const DEFAULT_K_MAX: usize = 100;

/// How the pursuer team picks its joint action each turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Controller {
    /// Pursuers never move.
    Stationary,
    /// Argmax of a local policy.
    Policy { policy: PolicyKind },
    /// Argmax of the refined search policy.
    Mcts {
        evaluator: EvaluatorKind,
        params: SearchParams,
    },
}

impl Controller {
    pub fn mcts(evaluator: EvaluatorKind, iterations: usize) -> Self {
        Self::Mcts {
            evaluator,
            params: SearchParams {
                iterations,
                ..SearchParams::default()
            },
        }
    }

    /// Joint pursuer action for `s`.
    pub fn choose(
        &self,
        world: &Arc<GameWorld>,
        s: &GameState,
        k_max: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<JointAction> {
        match self {
            Self::Stationary => Ok(s.pursuers.clone()),
            Self::Policy { policy } => Ok(world.policy(*policy, s)?.best().clone()),
            Self::Mcts { evaluator, params } => {
                let game = PursuitGame::new(Arc::clone(world), k_max);
                let result = mcts_search(&game, evaluator, s, params, rng)?;
                Ok(result.best().clone())
            }
        }
    }
}

impl fmt::Display for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Stationary => f.write_str("stationary"),
            Self::Policy { policy } => f.write_str(match policy {
                PolicyKind::Distance => "distance",
                PolicyKind::Shadow => "shadow",
                PolicyKind::Blend => "blend",
            }),
            Self::Mcts { evaluator, params } => write!(f, "mcts:{evaluator}:{}", params.iterations),
        }
    }
}

impl FromStr for Controller {
    type Err = Error;

    /// `stationary`, `distance`, `shadow`, `blend`, or
    /// `mcts:<evaluator>[:<iterations>]`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "stationary" {
            return Ok(Self::Stationary);
        }
        if let Some(rest) = s.strip_prefix("mcts") {
            let rest = rest.strip_prefix(':').unwrap_or(rest);
            let (eval, iterations) = match rest.rsplit_once(':') {
                Some((e, n)) => {
                    let n: usize = n
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("iteration count {n:?}")))?;
                    (e, n)
                }
                None => (rest, crate::mcts::DEFAULT_ITERATIONS),
            };
            let eval = if eval.is_empty() { "distance" } else { eval };
            return Ok(Self::mcts(eval.parse()?, iterations));
        }
        Ok(Self::Policy { policy: s.parse()? })
    }
}

const DEFAULT_PURSUER_SPOTS: [[f64; 2]; 4] = [[0.5, 0.25], [0.5, 0.75], [0.25, 0.5], [0.75, 0.5]];
const DEFAULT_EVADER_SPOTS: [[f64; 2]; 4] = [[0.125, 0.5], [0.875, 0.5], [0.5, 0.875], [0.5, 0.125]];

/// Start used when none is given: pursuers near `(1/2, 1/4)`, `(1/2, 3/4)`,
/// ..., evaders near `(1/8, 1/2)`, `(7/8, 1/2)`, ..., up to four per team.
pub fn default_start(world: &GameWorld) -> Result<GameState> {
    let scene = world.scene();
    if scene.k_p > DEFAULT_PURSUER_SPOTS.len() || scene.k_e > DEFAULT_EVADER_SPOTS.len() {
        return Err(Error::InvalidParameter(
            "no default start for more than four players per team".into(),
        ));
    }
    let grid = world.grid();
    let pick = |spots: &[[f64; 2]]| spots.iter().map(|p| grid.nearest_cell(*p)).collect::<Vec<Cell>>();
    let state = GameState::new(
        pick(&DEFAULT_PURSUER_SPOTS[..scene.k_p]),
        pick(&DEFAULT_EVADER_SPOTS[..scene.k_e]),
    );
    world.validate_state(&state)?;
    Ok(state)
}

/// One turn of a game: the pursuer action and the resulting state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub pursuer_action: JointAction,
    pub evader_action: JointAction,
    pub state: GameState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub scene_hash: String,
    pub m: usize,
    pub dt: f64,
    pub k_max: usize,
    pub seed: u64,
    pub controller: Controller,
    pub initial: GameState,
    pub turns: Vec<Turn>,
    pub outcome: Outcome,
    pub length: usize,
    pub time: f64,
}

impl GameRecord {
    pub fn final_state(&self) -> &GameState {
        self.turns.last().map_or(&self.initial, |t| &t.state)
    }
}

/// Plays one game from `start` until an evader hides or `k_max` turns pass.
pub fn run_game(
    world: &Arc<GameWorld>,
    start: &GameState,
    controller: &Controller,
    k_max: usize,
    seed: u64,
) -> Result<GameRecord> {
    world.validate_state(start)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = start.clone();
    let mut turns = Vec::new();
    let outcome = loop {
        if world.is_end_game(&state)? {
            break Outcome::EvaderWin;
        }
        if turns.len() >= k_max {
            break Outcome::PursuerWin;
        }
        let action = controller.choose(world, &state, k_max, &mut rng)?;
        let next = world.transition(&state, &action)?;
        turns.push(Turn {
            pursuer_action: action,
            evader_action: next.evaders.clone(),
            state: next.clone(),
        });
        state = next;
    };
    let length = turns.len();
    Ok(GameRecord {
        scene_hash: world.scene().hash(),
        m: world.grid().m(),
        dt: world.dt(),
        k_max,
        seed,
        controller: controller.clone(),
        initial: start.clone(),
        turns,
        outcome,
        length,
        time: length as f64 * world.dt(),
    })
}

/// Re-applies the recorded pursuer actions and checks every state and the
/// outcome. Returns the final state.
pub fn replay(world: &GameWorld, record: &GameRecord) -> Result<GameState> {
    world.validate_state(&record.initial)?;
    let mut state = record.initial.clone();
    for (k, turn) in record.turns.iter().enumerate() {
        if world.is_end_game(&state)? {
            return Err(Error::InvalidAction(format!("turn {k} starts from a terminal state")));
        }
        state = world.transition(&state, &turn.pursuer_action)?;
        if state != turn.state {
            return Err(Error::InvalidAction(format!(
                "turn {k} does not reproduce the recorded state"
            )));
        }
    }
    let ended = world.is_end_game(&state)?;
    let expected = if ended { Outcome::EvaderWin } else { Outcome::PursuerWin };
    if expected != record.outcome || (!ended && record.length != record.k_max) {
        return Err(Error::InvalidAction(
            "recorded outcome does not match the replay".into(),
        ));
    }
    Ok(state)
}

/// Which evader is swept, and where everyone else stands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepLayout {
    pub pursuers: Vec<Cell>,
    /// Evaders other than the swept one, in team order.
    #[serde(default)]
    pub other_evaders: Vec<Cell>,
    /// Position of the swept evader within the evader team.
    #[serde(default)]
    pub swept: usize,
}

impl SweepLayout {
    pub fn one_on_one(pursuer: Cell) -> Self {
        Self {
            pursuers: vec![pursuer],
            other_evaders: Vec::new(),
            swept: 0,
        }
    }

    fn state_with(&self, e: Cell) -> GameState {
        let mut evaders = self.other_evaders.clone();
        evaders.insert(self.swept.min(evaders.len()), e);
        GameState::new(self.pursuers.clone(), evaders)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub outcome: Outcome,
    pub turns: usize,
    pub time: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub controller: String,
    pub win_pct: f64,
    pub mean_time: f64,
    pub mean_turns: f64,
    pub n_games: usize,
    pub pursuer_wins: usize,
    /// Free starts skipped because the evader was already hidden.
    pub n_filtered: usize,
}

#[derive(Clone, Debug)]
pub struct MatchStatistics {
    pub summary: Summary,
    pub results: Vec<CellResult>,
    /// Game time per swept start: zero at filtered starts, `LARGE` inside
    /// obstacles.
    pub slice: ScalarField,
}

impl MatchStatistics {
    /// CSV with columns `cell_i, cell_j, outcome, turns, time`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["cell_i", "cell_j", "outcome", "turns", "time"])
            .map_err(csv_error)?;
        for r in &self.results {
            let outcome = match r.outcome {
                Outcome::PursuerWin => "pursuer-win",
                Outcome::EvaderWin => "evader-win",
            };
            w.write_record([
                r.cell.i.to_string(),
                r.cell.j.to_string(),
                outcome.to_string(),
                r.turns.to_string(),
                r.time.to_string(),
            ])
            .map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Independent per-game seed from a master seed and a cell index.
pub fn derive_seed(master: u64, index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Aggregates per-game results into a summary.
pub fn summarize(controller: &Controller, results: &[CellResult], n_filtered: usize) -> Summary {
    let n = results.len();
    let wins = results.iter().filter(|r| r.outcome == Outcome::PursuerWin).count();
    let mean = |f: &dyn Fn(&CellResult) -> f64| {
        if n == 0 {
            0.0
        } else {
            results.iter().map(f).sum::<f64>() / n as f64
        }
    };
    Summary {
        controller: controller.to_string(),
        win_pct: if n == 0 { 0.0 } else { 100.0 * wins as f64 / n as f64 },
        mean_time: mean(&|r| r.time),
        mean_turns: mean(&|r| r.turns as f64),
        n_games: n,
        pursuer_wins: wins,
        n_filtered,
    }
}

/// Runs one game per free evader start with every other player fixed.
/// Starts that are already terminal are skipped and counted.
pub fn run_match_statistics(
    world: &Arc<GameWorld>,
    controller: &Controller,
    layout: &SweepLayout,
    k_max: usize,
    seed: u64,
) -> Result<MatchStatistics> {
    let grid = world.grid();
    for p in layout.pursuers.iter().chain(&layout.other_evaders) {
        if !world.is_free(*p) {
            return Err(Error::InsideObstacle(*p));
        }
    }
    let starts: Vec<Cell> = grid.cells().filter(|c| world.is_free(*c)).collect();
    let outcomes: Vec<Option<CellResult>> = starts
        .par_iter()
        .map(|&e| {
            let state = layout.state_with(e);
            if world.is_end_game(&state)? {
                return Ok(None);
            }
            let record = run_game(world, &state, controller, k_max, derive_seed(seed, grid.index(e)))?;
            Ok(Some(CellResult {
                cell: e,
                outcome: record.outcome,
                turns: record.length,
                time: record.time,
            }))
        })
        .collect::<Result<_>>()?;
    let n_filtered = outcomes.iter().filter(|o| o.is_none()).count();
    let results: Vec<CellResult> = outcomes.into_iter().flatten().collect();
    let mut slice = vec![LARGE; grid.len()];
    for c in &starts {
        slice[grid.index(*c)] = 0.0;
    }
    for r in &results {
        slice[grid.index(r.cell)] = r.time;
    }
    Ok(MatchStatistics {
        summary: summarize(controller, &results, n_filtered),
        results,
        slice: ScalarField::new(grid, slice)?,
    })
}

/// Leaf-depth counts for one block of consecutive iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthBin {
    pub first_iteration: usize,
    pub last_iteration: usize,
    /// `counts[d]` leaves at depth `d` turns.
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthHistogram {
    pub bin_width: usize,
    /// Game time of one unit of depth.
    pub dt: f64,
    pub bins: Vec<DepthBin>,
}

impl DepthHistogram {
    pub fn total(&self) -> usize {
        self.bins.iter().flat_map(|b| &b.counts).sum()
    }
}

/// Bins leaf depths per `bin_width` iterations.
pub fn leaf_depth_histogram(trace: &[TraceEntry], bin_width: usize, dt: f64) -> Result<DepthHistogram> {
    if bin_width == 0 {
        return Err(Error::InvalidParameter("bin width must be positive".into()));
    }
    let mut bins: Vec<DepthBin> = Vec::new();
    for t in trace {
        if t.iteration == 0 {
            return Err(Error::InvalidParameter("iterations are numbered from 1".into()));
        }
        let b = (t.iteration - 1) / bin_width;
        while bins.len() <= b {
            let first = bins.len() * bin_width + 1;
            bins.push(DepthBin {
                first_iteration: first,
                last_iteration: first + bin_width - 1,
                counts: Vec::new(),
            });
        }
        let counts = &mut bins[b].counts;
        if counts.len() <= t.depth {
            counts.resize(t.depth + 1, 0);
        }
        counts[t.depth] += 1;
    }
    Ok(DepthHistogram { bin_width, dt, bins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Grid2D, Scene, Shape};

    fn circle_world(m: usize) -> Arc<GameWorld> {
        let scene = Scene::new(
            vec![Shape::Circle {
                center: [0.5, 0.5],
                radius: 0.15,
            }],
            1.0,
            1.0,
            1,
            1,
        )
        .unwrap();
        Arc::new(GameWorld::new(scene, Grid2D::new(m).unwrap()).unwrap())
    }

    #[test]
    fn controller_names_round_trip() {
        for s in [
            "stationary",
            "distance",
            "shadow",
            "blend",
            "mcts:distance:100",
            "mcts:dirichlet(0.3):2000",
        ] {
            assert_eq!(s.parse::<Controller>().unwrap().to_string(), s);
        }
        assert_eq!(
            "mcts:uniform".parse::<Controller>().unwrap(),
            Controller::mcts(EvaluatorKind::Uniform, 1000)
        );
        assert!("greedy".parse::<Controller>().is_err());
        assert!("mcts:blend:many".parse::<Controller>().is_err());
    }

    #[test]
    fn degenerate_games() {
        let world = circle_world(16);
        let g = world.grid();
        let p = g.nearest_cell([0.125, 0.5]);
        let hidden = GameState::new(vec![p], vec![g.nearest_cell([0.875, 0.5])]);
        let r = run_game(&world, &hidden, &Controller::Stationary, 10, 0).unwrap();
        assert_eq!((r.outcome, r.length), (Outcome::EvaderWin, 0));
        let open = GameState::new(vec![p], vec![Cell::new(p.i, p.j + 1)]);
        let r = run_game(&world, &open, &Controller::Stationary, 0, 0).unwrap();
        assert_eq!((r.outcome, r.length), (Outcome::PursuerWin, 0));
        assert_eq!(replay(&world, &r).unwrap(), open);
    }

    #[test]
    fn seeds_are_spread() {
        let a: Vec<u64> = (0..100).map(|k| derive_seed(1, k)).collect();
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), a.len());
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn histogram_bins() {
        let trace: Vec<TraceEntry> = (1..=250)
            .map(|k| TraceEntry {
                iteration: k,
                path: vec![0; k % 3],
                depth: k % 3,
                value: 0.0,
                terminal: false,
            })
            .collect();
        let h = leaf_depth_histogram(&trace, 100, 0.1).unwrap();
        assert_eq!(h.bins.len(), 3);
        assert_eq!(h.total(), 250);
        assert_eq!(h.bins[2].first_iteration, 201);
        assert_eq!(h.bins[0].counts, vec![33, 34, 33]);
        let one = leaf_depth_histogram(&trace[..1], 100, 0.1).unwrap();
        assert_eq!(one.bins.len(), 1);
        assert!(leaf_depth_histogram(&trace, 0, 0.1).is_err());
    }
}
