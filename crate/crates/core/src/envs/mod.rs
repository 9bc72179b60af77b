//! Task families, their filtered observations, and the task catalog.
//!
//! Every environment is a small value-like state machine. An [`Env`] is built
//! once per experiment (PoisonedDoors fixes its code from the experiment seed)
//! and then reset with a per-episode seed.

pub mod crossing;
pub mod lighthouse;
pub mod pd;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diffcore::ActionMask;

pub use crossing::{CrossingState, GRID_OBS_LEN, VIEW_SIZE};
pub use lighthouse::{Lighthouse1dState, Lighthouse2dState, LH2D_OBS_DIM};
pub use pd::PdState;

/// Training episodes draw their seeds from `[0, VALIDATION_SEED_START)`.
pub const VALIDATION_SEED_START: u64 = 1_000_000;
pub const VALIDATION_EPISODES: u64 = 200;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("action {action} is not legal in the current state")]
    IllegalAction { action: usize },
    #[error("step called on a finished episode")]
    Finished,
    #[error("invalid task `{id}`: {reason}")]
    InvalidTask { id: String, reason: String },
    #[error("maze generation failed for seed {seed} after {attempts} attempts")]
    Generation { seed: u64, attempts: usize },
    #[error("unknown task `{id}`; valid ids: {valid}")]
    UnknownTask { id: String, valid: String },
    #[error("task catalog: {0}")]
    Catalog(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    PoisonedDoors,
    Lighthouse1D,
    Lighthouse2D,
    WallCrossing,
    LavaCrossing,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[default]
    Base,
    SwitchOnce,
    SwitchFaulty,
    Corrupt,
}

/// Immutable task configuration.
///
/// `grid_size` is the side length S for crossing tasks and the half-width N
/// for the lighthouse tasks. `view_radius` (i) is the student's filtration and
/// `expert_radius` (j) the lighthouse expert's.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub family: Family,
    #[serde(default)]
    pub grid_size: usize,
    #[serde(default)]
    pub num_obstacles: usize,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub corrupt_distance: Option<usize>,
    #[serde(default)]
    pub doors: usize,
    #[serde(default)]
    pub code_length: usize,
    #[serde(default)]
    pub view_radius: usize,
    #[serde(default)]
    pub expert_radius: usize,
    #[serde(default)]
    pub max_episode_steps: usize,
    #[serde(default)]
    pub description: String,
}

impl TaskSpec {
    /// Fills derived limits and checks the family invariants.
    pub fn validated(mut self) -> Result<Self, EnvError> {
        let bad = |reason: String| EnvError::InvalidTask {
            id: self.id.clone(),
            reason,
        };
        match self.family {
            Family::PoisonedDoors => {
                if self.doors < 3 {
                    return Err(bad(format!("needs at least 3 doors, got {}", self.doors)));
                }
                if self.code_length == 0 {
                    return Err(bad("code_length must be positive".into()));
                }
                if self.doors + 3 > 8 {
                    return Err(bad("at most 5 doors fit the action mask".into()));
                }
                self.max_episode_steps = 1 + self.code_length;
            }
            Family::Lighthouse1D | Family::Lighthouse2D => {
                if self.grid_size == 0 {
                    return Err(bad("half-width N must be positive".into()));
                }
                if self.view_radius > self.grid_size || self.expert_radius > self.grid_size {
                    return Err(bad("view radii must not exceed N".into()));
                }
                if self.max_episode_steps == 0 {
                    self.max_episode_steps = lighthouse::LH_MAX_STEPS;
                }
            }
            Family::WallCrossing | Family::LavaCrossing => {
                let s = self.grid_size;
                if s < 5 || s % 2 == 0 {
                    return Err(bad(format!("grid size must be odd and >= 5, got {s}")));
                }
                let slots = 2 * (2..s - 2).step_by(2).count();
                if self.num_obstacles > slots {
                    return Err(bad(format!(
                        "{} obstacles do not fit a {s}x{s} grid (max {slots})",
                        self.num_obstacles
                    )));
                }
                if self.variant == Variant::Corrupt && self.corrupt_distance.is_none() {
                    return Err(bad("Corrupt variant needs corrupt_distance".into()));
                }
                self.max_episode_steps = 4 * s * s;
            }
        }
        if !matches!(self.family, Family::WallCrossing | Family::LavaCrossing) && self.variant != Variant::Base {
            return Err(bad("only crossing tasks have variants".into()));
        }
        Ok(self)
    }

    pub fn num_actions(&self) -> usize {
        match self.family {
            Family::PoisonedDoors => self.doors + 3,
            Family::Lighthouse1D => 2,
            Family::Lighthouse2D => 4,
            Family::WallCrossing | Family::LavaCrossing => {
                if self.has_switch() {
                    4
                } else {
                    3
                }
            }
        }
    }

    pub fn has_switch(&self) -> bool {
        matches!(self.variant, Variant::SwitchOnce | Variant::SwitchFaulty)
    }

    pub fn is_crossing(&self) -> bool {
        matches!(self.family, Family::WallCrossing | Family::LavaCrossing)
    }

    /// Copy of this task with different lighthouse radii, identified as
    /// `base@i<view>j<expert>`.
    pub fn with_radii(&self, view: usize, expert: usize) -> Result<Self, EnvError> {
        let mut t = self.clone();
        let base = self.id.split('@').next().unwrap_or(&self.id);
        t.id = format!("{base}@i{view}j{expert}");
        t.view_radius = view;
        t.expert_radius = expert;
        t.validated()
    }
}

/// What the student sees after the filtration function is applied.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Observation {
    /// PoisonedDoors phase token in `{0, 1, 2, 3}`.
    Doors(u8),
    /// 1D lighthouse: the current window plus the previous move.
    Line { view: Vec<i8>, last_move: Option<i8> },
    /// Index of the active entry of the 6400-dim one-hot encoding.
    Plane(u16),
    /// Egocentric `7 x 7 x 3` grid, index `(i * 7 + j) * 3 + channel`.
    Grid([u8; GRID_OBS_LEN]),
}

impl Observation {
    /// Canonical byte serialisation, used for hashing and demo files.
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Observation::Doors(t) => vec![0, *t],
            Observation::Line { view, last_move } => {
                let mut out = vec![1, last_move.map_or(0, |m| m as u8)];
                out.extend(view.iter().map(|&v| v as u8));
                out
            }
            Observation::Plane(i) => {
                let mut out = vec![2];
                out.extend_from_slice(&i.to_le_bytes());
                out
            }
            Observation::Grid(g) => {
                let mut out = vec![3];
                out.extend_from_slice(g);
                out
            }
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let (&tag, rest) = bytes.split_first()?;
        match tag {
            0 if rest.len() == 1 => Some(Observation::Doors(rest[0])),
            1 if !rest.is_empty() => Some(Observation::Line {
                last_move: (rest[0] != 0).then_some(rest[0] as i8),
                view: rest[1..].iter().map(|&v| v as i8).collect(),
            }),
            2 if rest.len() == 2 => Some(Observation::Plane(u16::from_le_bytes([rest[0], rest[1]]))),
            3 if rest.len() == GRID_OBS_LEN => {
                let mut g = [0u8; GRID_OBS_LEN];
                g.copy_from_slice(rest);
                Some(Observation::Grid(g))
            }
            _ => None,
        }
    }

    pub fn sha256_hex(&self) -> String {
        let digest = Sha256::digest(self.to_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn token(&self) -> Option<u8> {
        match self {
            Observation::Doors(t) => Some(*t),
            _ => None,
        }
    }

    pub fn plane_index(&self) -> Option<usize> {
        match self {
            Observation::Plane(i) => Some(*i as usize),
            _ => None,
        }
    }

    pub fn grid(&self) -> Option<&[u8; GRID_OBS_LEN]> {
        match self {
            Observation::Grid(g) => Some(g),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    /// Goal reached (crossing, lighthouse) or a positive door opened (PD).
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EnvState {
    Doors(PdState),
    Line(Lighthouse1dState),
    Plane(Lighthouse2dState),
    Grid(CrossingState),
}

/// One environment instance bound to a task.
#[derive(Clone, Debug)]
pub struct Env {
    task: TaskSpec,
    experiment_seed: u64,
    state: EnvState,
}

impl Env {
    /// Builds the environment and resets it with `experiment_seed` as the
    /// first episode seed.
    pub fn new(task: &TaskSpec, experiment_seed: u64) -> Result<Self, EnvError> {
        let task = task.clone().validated()?;
        let state = Self::fresh_state(&task, experiment_seed, experiment_seed)?;
        Ok(Self {
            task,
            experiment_seed,
            state,
        })
    }

    fn fresh_state(task: &TaskSpec, experiment_seed: u64, episode_seed: u64) -> Result<EnvState, EnvError> {
        Ok(match task.family {
            Family::PoisonedDoors => EnvState::Doors(PdState::new(task, experiment_seed, episode_seed)),
            Family::Lighthouse1D => EnvState::Line(Lighthouse1dState::new(task, episode_seed)),
            Family::Lighthouse2D => EnvState::Plane(Lighthouse2dState::new(task, episode_seed)),
            Family::WallCrossing | Family::LavaCrossing => {
                EnvState::Grid(CrossingState::generate(task, episode_seed)?)
            }
        })
    }

    pub fn reset(&mut self, episode_seed: u64) -> Result<Observation, EnvError> {
        self.state = Self::fresh_state(&self.task, self.experiment_seed, episode_seed)?;
        Ok(self.observe())
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn num_actions(&self) -> usize {
        self.task.num_actions()
    }

    pub fn observe(&self) -> Observation {
        match &self.state {
            EnvState::Doors(s) => s.observe(),
            EnvState::Line(s) => s.observe(self.task.view_radius),
            EnvState::Plane(s) => s.observe(self.task.view_radius),
            EnvState::Grid(s) => s.observe(),
        }
    }

    pub fn legal_actions(&self) -> ActionMask {
        match &self.state {
            EnvState::Doors(s) => s.legal_actions(),
            _ => crate::diffcore::ops::first_n(self.num_actions()),
        }
    }

    pub fn is_done(&self) -> bool {
        match &self.state {
            EnvState::Doors(s) => s.is_done(),
            EnvState::Line(s) => s.done,
            EnvState::Plane(s) => s.done,
            EnvState::Grid(s) => s.done,
        }
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome, EnvError> {
        if self.is_done() {
            return Err(EnvError::Finished);
        }
        if !crate::diffcore::ops::is_legal(self.legal_actions(), action) || action >= self.num_actions() {
            return Err(EnvError::IllegalAction { action });
        }
        let (reward, done, success) = match &mut self.state {
            EnvState::Doors(s) => s.step(action),
            EnvState::Line(s) => s.step(action),
            EnvState::Plane(s) => s.step(action),
            EnvState::Grid(s) => s.step(action),
        };
        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            done,
            success,
        })
    }

    /// Deterministic byte image of the full state.
    pub fn state_bytes(&self) -> Vec<u8> {
        match &self.state {
            EnvState::Doors(s) => s.to_bytes(),
            EnvState::Line(s) => s.to_bytes(),
            EnvState::Plane(s) => s.to_bytes(),
            EnvState::Grid(s) => s.to_bytes(),
        }
    }
}

const CATALOG_SRC: &str = include_str!("tasks.toml");

#[derive(Deserialize)]
struct CatalogFile {
    task: Vec<TaskSpec>,
}

/// All tasks from the embedded catalog, in file order.
pub fn catalog() -> Result<Vec<TaskSpec>, EnvError> {
    parse_catalog(CATALOG_SRC)
}

pub fn parse_catalog(src: &str) -> Result<Vec<TaskSpec>, EnvError> {
    let file: CatalogFile = toml::from_str(src).map_err(|e| EnvError::Catalog(e.to_string()))?;
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(file.task.len());
    for t in file.task {
        if !seen.insert(t.id.clone()) {
            return Err(EnvError::Catalog(format!("duplicate task id `{}`", t.id)));
        }
        out.push(t.validated()?);
    }
    Ok(out)
}

/// Catalog lookup (case-insensitive). Lighthouse ids accept a
/// `@i<view>j<expert>` suffix that overrides the radii.
pub fn task_by_id(id: &str) -> Result<TaskSpec, EnvError> {
    if let Some((base, radii)) = id.split_once('@') {
        let task = task_by_id(base)?;
        let bad = |reason: &str| EnvError::InvalidTask {
            id: id.to_string(),
            reason: reason.to_string(),
        };
        if !matches!(task.family, Family::Lighthouse1D | Family::Lighthouse2D) {
            return Err(bad("radius overrides apply to lighthouse tasks only"));
        }
        let (i, j) = radii
            .strip_prefix('i')
            .and_then(|r| r.split_once('j'))
            .ok_or_else(|| bad("expected `@i<view>j<expert>`"))?;
        let i: usize = i.parse().map_err(|_| bad("view radius is not an integer"))?;
        let j: usize = j.parse().map_err(|_| bad("expert radius is not an integer"))?;
        return task.with_radii(i, j);
    }
    let all = catalog()?;
    all.iter()
        .find(|t| t.id.eq_ignore_ascii_case(id))
        .cloned()
        .ok_or_else(|| EnvError::UnknownTask {
            id: id.to_string(),
            valid: all.iter().map(|t| t.id.as_str()).collect::<Vec<_>>().join(", "),
        })
}
