//! Session state machine, independent of the transport.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shadowgame_core::engine::{default_start, Controller};
use shadowgame_core::geometry::Cell;
use shadowgame_core::strategies::{GameState, GameWorld};

use crate::api::{CreateSession, LoggedMove, MoveLog, MoveRequest, Overlays, RleMask, SessionView, Status};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionError {
    BadRequest(String),
    NotFound(String),
    Finished,
    IllegalMove(String),
    Internal(String),
}

impl std::fmt::Display for SessionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::BadRequest(s) | Self::IllegalMove(s) | Self::Internal(s) => f.write_str(s),
            Self::NotFound(id) => write!(f, "no session {id}"),
            Self::Finished => f.write_str("game is over"),
        }
    }
}

impl std::error::Error for SessionError {}

fn bad(e: impl std::fmt::Display) -> SessionError {
    SessionError::BadRequest(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> SessionError {
    SessionError::Internal(e.to_string())
}

pub struct Session {
    id: String,
    world: Arc<GameWorld>,
    controller: Controller,
    k_max: usize,
    state: GameState,
    status: Status,
    rng: ChaCha8Rng,
    log: MoveLog,
    last_policy: Option<serde_json::Value>,
}

impl Session {
    pub fn create(id: String, world: Arc<GameWorld>, req: &CreateSession) -> Result<Self, SessionError> {
        let controller: Controller = req.controller.parse().map_err(bad)?;
        let state = match &req.start {
            Some(s) => GameState::new(s.pursuers.clone(), s.evaders.clone()),
            None => default_start(&world).map_err(bad)?,
        };
        world.validate_state(&state).map_err(bad)?;
        if world.is_end_game(&state).map_err(internal)? {
            return Err(bad("already occluded"));
        }
        let status = if req.k_max == 0 {
            Status::PursuerWon
        } else {
            Status::Active
        };
        Ok(Self {
            id,
            world,
            controller,
            k_max: req.k_max,
            log: MoveLog {
                initial: state.clone(),
                moves: Vec::new(),
            },
            state,
            status,
            rng: ChaCha8Rng::seed_from_u64(req.seed),
            last_policy: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn log(&self) -> &MoveLog {
        &self.log
    }

    pub fn valid_moves(&self) -> Vec<Vec<Cell>> {
        self.state
            .evaders
            .iter()
            .map(|e| self.world.evader_actions(*e).cells)
            .collect()
    }

    pub fn view(&self) -> Result<SessionView, SessionError> {
        let grid = self.world.grid();
        let obstacles: Vec<bool> = grid.cells().map(|c| !self.world.is_free(c)).collect();
        let shadow = self
            .world
            .shadows()
            .joint_shadow(&self.state.pursuers)
            .map_err(internal)?;
        Ok(SessionView {
            id: self.id.clone(),
            m: grid.m(),
            h: grid.h(),
            dt: self.world.dt(),
            k_max: self.k_max,
            controller: self.controller.to_string(),
            status: self.status,
            state: self.state.clone(),
            obstacles: RleMask::encode(&obstacles),
            overlays: Overlays {
                shadow: RleMask::encode(&shadow),
                policy: self.last_policy.clone(),
            },
            valid_moves: if self.status == Status::Active {
                self.valid_moves()
            } else {
                Vec::new()
            },
            last_pursuer_action: self.log.moves.last().map(|m| m.pursuers.clone()),
        })
    }

    /// Applies one human move. The pursuer controller decides on the state
    /// before the move; both actions are then applied together.
    pub fn submit(&mut self, mv: &MoveRequest) -> Result<(), SessionError> {
        if self.status != Status::Active {
            return Err(SessionError::Finished);
        }
        if mv.evaders.len() != self.state.evaders.len() {
            return Err(SessionError::IllegalMove(format!(
                "expected {} evader targets, got {}",
                self.state.evaders.len(),
                mv.evaders.len()
            )));
        }
        for (k, (target, allowed)) in mv.evaders.iter().zip(self.valid_moves()).enumerate() {
            if !allowed.contains(target) {
                return Err(SessionError::IllegalMove(format!("evader {k} cannot reach {target}")));
            }
        }
        let (action, policy) = match &self.controller {
            Controller::Policy { policy } => {
                let p = self.world.policy(*policy, &self.state).map_err(internal)?;
                (p.best().clone(), Some(p.to_json()))
            }
            other => (
                other
                    .choose(&self.world, &self.state, self.k_max, &mut self.rng)
                    .map_err(internal)?,
                None,
            ),
        };
        let next = self
            .world
            .transition_with_evaders(&self.state, &action, &mv.evaders)
            .map_err(|e| SessionError::IllegalMove(e.to_string()))?;
        self.status = if self.world.is_end_game(&next).map_err(internal)? {
            Status::EvaderWon
        } else if next.turn >= self.k_max {
            Status::PursuerWon
        } else {
            Status::Active
        };
        self.log.moves.push(LoggedMove {
            evaders: mv.evaders.clone(),
            pursuers: action,
        });
        self.state = next;
        self.last_policy = policy;
        Ok(())
    }
}

/// Re-applies a move log from its initial state.
pub fn replay_log(world: &GameWorld, log: &MoveLog) -> shadowgame_core::Result<GameState> {
    let mut s = log.initial.clone();
    for m in &log.moves {
        s = world.transition_with_evaders(&s, &m.pursuers, &m.evaders)?;
    }
    Ok(s)
}
