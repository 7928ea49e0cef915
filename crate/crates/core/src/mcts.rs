//! Monte Carlo tree search over joint pursuer actions, generic over the game
//! and over the evaluator that supplies leaf priors and values.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strategies::{argmax, GameState, GameWorld, JointAction, PolicyKind};

pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_NOISE: f64 = 0.25;
pub const DEFAULT_ALPHA: f64 = 0.3;
pub const DEFAULT_TAU: f64 = 1.0;

/// A deterministic single-agent view of a game: actions, transitions and
/// terminal payoffs for the searching side.
pub trait SearchGame {
    type State: Clone + Eq + Hash;
    type Action: Clone;

    fn actions(&self, s: &Self::State) -> Result<Vec<Self::Action>>;
    fn transition(&self, s: &Self::State, a: &Self::Action) -> Result<Self::State>;
    /// `Some(v)` for terminal states.
    fn terminal_value(&self, s: &Self::State) -> Result<Option<f64>>;
}

/// Prior over the actions of a state, plus a value estimate in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub prior: Vec<f64>,
    pub value: f64,
}

pub trait Evaluator<G: SearchGame> {
    fn evaluate(&self, game: &G, s: &G::State, actions: &[G::Action], rng: &mut ChaCha8Rng) -> Result<Evaluation>;
}

/// Adapts a closure into an evaluator.
pub struct FnEvaluator<F>(pub F);

impl<G, F> Evaluator<G> for FnEvaluator<F>
where
    G: SearchGame,
    F: Fn(&G::State, &[G::Action]) -> Evaluation,
{
    fn evaluate(&self, _game: &G, s: &G::State, actions: &[G::Action], _rng: &mut ChaCha8Rng) -> Result<Evaluation> {
        Ok((self.0)(s, actions))
    }
}

/// Uniform prior, zero value.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformEvaluator;

impl<G: SearchGame> Evaluator<G> for UniformEvaluator {
    fn evaluate(&self, _game: &G, _s: &G::State, actions: &[G::Action], _rng: &mut ChaCha8Rng) -> Result<Evaluation> {
        let n = actions.len().max(1);
        Ok(Evaluation {
            prior: vec![1.0 / n as f64; actions.len()],
            value: 0.0,
        })
    }
}

/// Fresh symmetric Dirichlet draw per call, zero value.
#[derive(Clone, Copy, Debug)]
pub struct DirichletEvaluator {
    pub alpha: f64,
}

impl<G: SearchGame> Evaluator<G> for DirichletEvaluator {
    fn evaluate(&self, _game: &G, _s: &G::State, actions: &[G::Action], rng: &mut ChaCha8Rng) -> Result<Evaluation> {
        Ok(Evaluation {
            prior: dirichlet(actions.len(), self.alpha, rng)?,
            value: 0.0,
        })
    }
}

/// Sample from the symmetric Dirichlet distribution `Dir(α, …, α)` of
/// dimension `n` by normalizing Gamma draws.
pub fn dirichlet(n: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidParameter(format!("dirichlet alpha {alpha}: {e}")))?;
    let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        Ok(draws.into_iter().map(|g| g / total).collect())
    } else {
        // every draw underflowed; pick a vertex uniformly
        let k = rng.random_range(0..n);
        Ok((0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub iterations: usize,
    /// Weight of the Dirichlet noise mixed into leaf priors.
    pub noise: f64,
    pub alpha: f64,
    pub tau: f64,
    /// Record one trace entry per iteration.
    pub trace: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            noise: DEFAULT_NOISE,
            alpha: DEFAULT_ALPHA,
            tau: DEFAULT_TAU,
            trace: false,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidParameter("at least one iteration is required".into()));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::InvalidParameter(format!(
                "noise weight {} outside [0, 1]",
                self.noise
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("dirichlet alpha {}", self.alpha)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("temperature {}", self.tau)));
        }
        Ok(())
    }
}

/// Statistics for the actions of one expanded state.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeStats<A> {
    pub actions: Vec<A>,
    pub n: Vec<u32>,
    pub w: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl<A> NodeStats<A> {
    fn new(actions: Vec<A>, p: Vec<f64>) -> Self {
        let k = actions.len();
        Self {
            actions,
            n: vec![0; k],
            w: vec![0.0; k],
            q: vec![0.0; k],
            p,
        }
    }

    pub fn total_visits(&self) -> u32 {
        self.n.iter().sum()
    }

    /// Upper-confidence choice, or the largest prior before any visit.
    pub fn select(&self) -> usize {
        let total = self.total_visits();
        if total == 0 {
            return argmax(&self.p);
        }
        let root = f64::from(total).sqrt();
        let scores: Vec<f64> = (0..self.n.len())
            .map(|a| self.q[a] + self.p[a] * root / (1.0 + f64::from(self.n[a])))
            .collect();
        argmax(&scores)
    }

    fn backup(&mut self, a: usize, v: f64) {
        self.n[a] += 1;
        self.w[a] += v;
        self.q[a] = self.w[a] / f64::from(self.n[a]);
    }
}

/// One search iteration: the action indices taken from the root and the
/// value found at the leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub path: Vec<usize>,
    pub depth: usize,
    pub value: f64,
    pub terminal: bool,
}

#[derive(Clone, Debug)]
pub struct SearchResult<A> {
    pub actions: Vec<A>,
    /// Refined policy `π*`.
    pub policy: Vec<f64>,
    pub visits: Vec<u32>,
    pub root_prior: Vec<f64>,
    pub tree_size: usize,
    pub trace: Vec<TraceEntry>,
}

impl<A> SearchResult<A> {
    /// Index of the most likely action; ties go to the first.
    pub fn best_index(&self) -> usize {
        argmax(&self.policy)
    }

    pub fn best(&self) -> &A {
        &self.actions[self.best_index()]
    }
}

/// The search tree, keyed by state. A state is visited once it has stats.
pub struct SearchTree<G: SearchGame> {
    nodes: HashMap<G::State, NodeStats<G::Action>>,
}

impl<G: SearchGame> Default for SearchTree<G> {
    fn default() -> Self {
        Self { nodes: HashMap::new() }
    }
}

impl<G: SearchGame> SearchTree<G> {
    pub fn get(&self, s: &G::State) -> Option<&NodeStats<G::Action>> {
        self.nodes.get(s)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn check_evaluation(e: &Evaluation, n: usize) -> Result<()> {
    if e.prior.len() != n {
        return Err(Error::InvalidParameter(format!(
            "evaluator returned {} priors for {n} actions",
            e.prior.len()
        )));
    }
    if !(-1.0..=1.0).contains(&e.value) {
        return Err(Error::InvalidParameter(format!(
            "evaluator value {} outside [-1, 1]",
            e.value
        )));
    }
    if e.prior.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidParameter(
            "evaluator prior has negative or non-finite entries".into(),
        ));
    }
    Ok(())
}

/// Runs `params.iterations` iterations from `root` and returns the
/// visit-count policy over the root actions.
pub fn mcts_search<G, E>(
    game: &G,
    evaluator: &E,
    root: &G::State,
    params: &SearchParams,
    rng: &mut ChaCha8Rng,
) -> Result<SearchResult<G::Action>>
where
    G: SearchGame,
    E: Evaluator<G> + ?Sized,
{
    let mut tree = SearchTree::default();
    search_with_tree(game, evaluator, root, params, rng, &mut tree)
}

/// Like [`mcts_search`], exposing the tree afterwards.
pub fn search_with_tree<G, E>(
    game: &G,
    evaluator: &E,
    root: &G::State,
    params: &SearchParams,
    rng: &mut ChaCha8Rng,
    tree: &mut SearchTree<G>,
) -> Result<SearchResult<G::Action>>
where
    G: SearchGame,
    E: Evaluator<G> + ?Sized,
{
    params.validate()?;
    if game.terminal_value(root)?.is_some() {
        return Err(Error::Terminal("search root is terminal"));
    }
    tree.nodes.clear();
    let mut trace = Vec::new();
    let mut path: Vec<(G::State, usize)> = Vec::new();
    for iteration in 1..=params.iterations {
        path.clear();
        let mut s = root.clone();
        let (value, terminal) = loop {
            if let Some(v) = game.terminal_value(&s)? {
                break (v, true);
            }
            let Some(node) = tree.nodes.get(&s) else {
                let actions = game.actions(&s)?;
                let eval = evaluator.evaluate(game, &s, &actions, rng)?;
                check_evaluation(&eval, actions.len())?;
                let prior = if params.noise > 0.0 {
                    let eta = dirichlet(actions.len(), params.alpha, rng)?;
                    eval.prior
                        .iter()
                        .zip(&eta)
                        .map(|(p, e)| (1.0 - params.noise) * p + params.noise * e)
                        .collect()
                } else {
                    eval.prior
                };
                tree.nodes.insert(s, NodeStats::new(actions, prior));
                break (eval.value, false);
            };
            if node.actions.is_empty() {
                return Err(Error::Terminal("nonterminal state without actions"));
            }
            let a = node.select();
            let next = game.transition(&s, &node.actions[a])?;
            path.push((s, a));
            s = next;
        };
        for (state, a) in &path {
            tree.nodes
                .get_mut(state)
                .expect("path states are expanded")
                .backup(*a, value);
        }
        if params.trace {
            trace.push(TraceEntry {
                iteration,
                path: path.iter().map(|(_, a)| *a).collect(),
                depth: path.len(),
                value,
                terminal,
            });
        }
    }
    let node = tree.nodes.get(root).expect("root is expanded on the first iteration");
    Ok(SearchResult {
        actions: node.actions.clone(),
        policy: visit_policy(&node.n, &node.p, params.tau),
        visits: node.n.clone(),
        root_prior: node.p.clone(),
        tree_size: tree.nodes.len(),
        trace,
    })
}

/// `π*(a) ∝ N(a)^{1/τ}`, or the prior when nothing was visited.
pub fn visit_policy(visits: &[u32], prior: &[f64], tau: f64) -> Vec<f64> {
    let max = visits.iter().copied().max().unwrap_or(0);
    if max == 0 {
        let total: f64 = prior.iter().sum();
        return prior.iter().map(|p| p / total).collect();
    }
    let raw: Vec<f64> = visits
        .iter()
        .map(|&n| (f64::from(n) / f64::from(max)).powf(1.0 / tau))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// The pursuit game as seen by the pursuers: evaders answer with the
/// greedy rule inside each transition.
#[derive(Clone, Debug)]
pub struct PursuitGame {
    world: Arc<GameWorld>,
    k_max: usize,
}

impl PursuitGame {
    pub fn new(world: Arc<GameWorld>, k_max: usize) -> Self {
        Self { world, k_max }
    }

    pub fn world(&self) -> &GameWorld {
        &self.world
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }
}

impl SearchGame for PursuitGame {
    type State = GameState;
    type Action = JointAction;

    fn actions(&self, s: &GameState) -> Result<Vec<JointAction>> {
        Ok(self.world.pursuer_joint_actions(s))
    }

    fn transition(&self, s: &GameState, a: &JointAction) -> Result<GameState> {
        self.world.transition(s, a)
    }

    /// `−1` once an evader is hidden, `+1` once the horizon is reached.
    fn terminal_value(&self, s: &GameState) -> Result<Option<f64>> {
        if self.world.is_end_game(s)? {
            Ok(Some(-1.0))
        } else if s.turn >= self.k_max {
            Ok(Some(1.0))
        } else {
            Ok(None)
        }
    }
}

/// Leaf evaluators available for the pursuit game.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EvaluatorKind {
    Distance,
    Shadow,
    Blend,
    Uniform,
    Dirichlet { alpha: f64 },
}

impl std::fmt::Display for EvaluatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Distance => f.write_str("distance"),
            Self::Shadow => f.write_str("shadow"),
            Self::Blend => f.write_str("blend"),
            Self::Uniform => f.write_str("uniform"),
            Self::Dirichlet { alpha } => write!(f, "dirichlet({alpha})"),
        }
    }
}

impl std::str::FromStr for EvaluatorKind {
    type Err = Error;

    /// Accepts `distance`, `shadow`, `blend`, `uniform`, `dirichlet` and
    /// `dirichlet(α)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("dirichlet") {
            let rest = rest.trim();
            if rest.is_empty() {
                return Ok(Self::Dirichlet { alpha: DEFAULT_ALPHA });
            }
            let inner = rest
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| Error::UnknownEvaluator(s.to_string()))?;
            let alpha: f64 = inner
                .trim()
                .parse()
                .map_err(|_| Error::UnknownEvaluator(s.to_string()))?;
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::InvalidParameter(format!("dirichlet alpha {alpha}")));
            }
            return Ok(Self::Dirichlet { alpha });
        }
        match s {
            "uniform" => Ok(Self::Uniform),
            other => Ok(match other.parse::<PolicyKind>()? {
                PolicyKind::Distance => Self::Distance,
                PolicyKind::Shadow => Self::Shadow,
                PolicyKind::Blend => Self::Blend,
            }),
        }
    }
}

/// Parses an evaluator name.
pub fn make_evaluator(kind: &str) -> Result<EvaluatorKind> {
    kind.parse()
}

impl Evaluator<PursuitGame> for EvaluatorKind {
    fn evaluate(
        &self,
        game: &PursuitGame,
        s: &GameState,
        actions: &[JointAction],
        rng: &mut ChaCha8Rng,
    ) -> Result<Evaluation> {
        let kind = match self {
            Self::Uniform => return UniformEvaluator.evaluate(game, s, actions, rng),
            Self::Dirichlet { alpha } => return DirichletEvaluator { alpha: *alpha }.evaluate(game, s, actions, rng),
            Self::Distance => PolicyKind::Distance,
            Self::Shadow => PolicyKind::Shadow,
            Self::Blend => PolicyKind::Blend,
        };
        let policy = game.world.policy(kind, s)?;
        debug_assert_eq!(policy.support.as_slice(), actions);
        Ok(Evaluation {
            prior: policy.weights,
            value: 0.0,
        })
    }
}
