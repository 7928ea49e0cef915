//! Wire types shared by the service and its clients.

use serde::{Deserialize, Serialize};
use shadowgame_core::geometry::{Cell, Scene};
use shadowgame_core::strategies::GameState;

/// Boolean mask over the grid in row-major order (`i` outer), stored as
/// alternating run lengths starting with `first`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub first: bool,
    pub runs: Vec<usize>,
}

impl RleMask {
    pub fn encode(mask: &[bool]) -> Self {
        let first = mask.first().copied().unwrap_or(false);
        let mut runs = Vec::new();
        let mut current = first;
        let mut len = 0;
        for &b in mask {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        if len > 0 {
            runs.push(len);
        }
        Self { first, runs }
    }

    pub fn decode(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.runs.iter().sum());
        let mut value = self.first;
        for &n in &self.runs {
            out.extend(std::iter::repeat_n(value, n));
            value = !value;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Active,
    PursuerWon,
    EvaderWon,
}

/// Initial positions, one cell per player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Start {
    pub pursuers: Vec<Cell>,
    pub evaders: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub scene: Scene,
    pub m: usize,
    /// `stationary`, `distance`, `shadow`, `blend` or
    /// `mcts:<evaluator>[:<iterations>]`.
    #[serde(default = "default_controller")]
    pub controller: String,
    /// Defaults to pursuers near `(1/2, 1/4)` and evaders near `(1/8, 1/2)`.
    #[serde(default)]
    pub start: Option<Start>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_controller() -> String {
    "blend".into()
}

fn default_k_max() -> usize {
    shadowgame_core::engine::DEFAULT_K_MAX
}

/// The human's move: one target cell per evader.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveRequest {
    pub evaders: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overlays {
    /// Free cells hidden from every pursuer.
    pub shadow: RleMask,
    /// Pursuer policy behind the last move, as `{action, weight}` entries.
    /// Absent for search and stationary controllers, and before any move.
    #[serde(default)]
    pub policy: Option<serde_json::Value>,
}

/// Everything a client needs to draw the board and offer moves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub m: usize,
    pub h: f64,
    pub dt: f64,
    pub k_max: usize,
    pub controller: String,
    pub status: Status,
    pub state: GameState,
    pub obstacles: RleMask,
    pub overlays: Overlays,
    /// Reachable cells for each evader, in the order the server accepts.
    pub valid_moves: Vec<Vec<Cell>>,
    #[serde(default)]
    pub last_pursuer_action: Option<Vec<Cell>>,
}

/// One applied turn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedMove {
    pub evaders: Vec<Cell>,
    pub pursuers: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveLog {
    pub initial: GameState,
    pub moves: Vec<LoggedMove>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
}
