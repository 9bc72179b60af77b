//! Privileged experts, the corruption wrapper and demonstration recording.

mod demos;

pub use demos::{read_demonstrations, record_demonstrations, write_demonstrations, DemoError, DemoStep, Demonstration, DEMO_VERSION};

use thiserror::Error;

use crate::envs::crossing::{state_index, CrossingState, FORWARD, GOAL, LAVA, TURN_LEFT, TURN_RIGHT, UNREACHABLE};
use crate::envs::lighthouse::{
    CornerStatus, Lighthouse1dState, Lighthouse2dState, DOWN, LEFT, LEFT_1D, RIGHT, RIGHT_1D, UP,
};
use crate::envs::pd::{Phase, PdState};
use crate::envs::{Env, EnvState, Family, TaskSpec, Variant};

#[derive(Debug, Error)]
pub enum ExpertError {
    #[error("goal unreachable from the current crossing state")]
    Unreachable,
    #[error("expert `{expert}` cannot act in a `{family:?}` task")]
    WrongFamily { expert: &'static str, family: Family },
    #[error("expert queried on a finished episode")]
    Finished,
}

/// A privileged policy bound to one task family.
#[derive(Clone, Debug, PartialEq)]
pub enum Expert {
    ShortestPath,
    Lighthouse { radius: usize },
    PoisonedDoors,
    /// Uniform within `radius` actions of the goal, wrapped expert elsewhere.
    Corrupt { inner: Box<Expert>, radius: u32 },
}

impl Expert {
    pub fn for_task(task: &TaskSpec) -> Self {
        match task.family {
            Family::PoisonedDoors => Expert::PoisonedDoors,
            Family::Lighthouse1D | Family::Lighthouse2D => Expert::Lighthouse {
                radius: task.expert_radius,
            },
            Family::WallCrossing | Family::LavaCrossing => match (task.variant, task.corrupt_distance) {
                (Variant::Corrupt, Some(nc)) => Expert::Corrupt {
                    inner: Box::new(Expert::ShortestPath),
                    radius: nc as u32,
                },
                _ => Expert::ShortestPath,
            },
        }
    }

    pub fn kind(&self) -> String {
        match self {
            Expert::ShortestPath => "shortest-path".into(),
            Expert::Lighthouse { radius } => format!("lighthouse-j{radius}"),
            Expert::PoisonedDoors => "poisoned-doors".into(),
            Expert::Corrupt { inner, radius } => format!("corrupt-{radius}({})", inner.kind()),
        }
    }

    /// Action distribution over the task's full action space.
    pub fn distribution(&self, env: &Env) -> Result<Vec<f64>, ExpertError> {
        if env.is_done() {
            return Err(ExpertError::Finished);
        }
        let n = env.num_actions();
        let wrong = |expert| ExpertError::WrongFamily {
            expert,
            family: env.task().family,
        };
        Ok(match (self, env.state()) {
            (Expert::ShortestPath, EnvState::Grid(s)) => one_hot(shortest_path_action(s)?, n),
            (Expert::ShortestPath, _) => return Err(wrong("shortest-path")),
            (Expert::Lighthouse { radius }, EnvState::Line(s)) => one_hot(lighthouse1d_action(s, *radius), n),
            (Expert::Lighthouse { radius }, EnvState::Plane(s)) => one_hot(lighthouse2d_action(s, *radius), n),
            (Expert::Lighthouse { .. }, _) => return Err(wrong("lighthouse")),
            (Expert::PoisonedDoors, EnvState::Doors(s)) => one_hot(pd_action(s), n),
            (Expert::PoisonedDoors, _) => return Err(wrong("poisoned-doors")),
            (Expert::Corrupt { inner, radius }, EnvState::Grid(s)) => {
                let wrapped = inner.distribution(env)?;
                corrupt(wrapped, s.distance_to_goal(), *radius)
            }
            (Expert::Corrupt { .. }, _) => return Err(wrong("corrupt")),
        })
    }
}

pub fn one_hot(action: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[action] = 1.0;
    v
}

/// Uniform over the action space within `radius` of the goal, else `wrapped`.
pub fn corrupt(wrapped: Vec<f64>, distance: u32, radius: u32) -> Vec<f64> {
    if distance <= radius {
        let n = wrapped.len();
        vec![1.0 / n as f64; n]
    } else {
        wrapped
    }
}

/// First action of a shortest `(cell, heading)` path to the goal. Ties prefer
/// forward, then left, then right. Never switches the lights.
pub fn shortest_path_action(s: &CrossingState) -> Result<usize, ExpertError> {
    let here = s.distance_to_goal();
    if here == UNREACHABLE || here == 0 {
        return Err(ExpertError::Unreachable);
    }
    let (fx, fy) = s.front();
    let forward = match s.cell(fx, fy) {
        GOAL => 0,
        LAVA => UNREACHABLE,
        crate::envs::crossing::WALL => UNREACHABLE,
        _ => s.distance[state_index(s.size, fx, fy, s.dir)],
    };
    let left = s.distance[state_index(s.size, s.x, s.y, (s.dir + 3) % 4)];
    let right = s.distance[state_index(s.size, s.x, s.y, (s.dir + 1) % 4)];
    for (action, d) in [(FORWARD, forward), (TURN_LEFT, left), (TURN_RIGHT, right)] {
        if d != UNREACHABLE && d + 1 == here {
            return Ok(action);
        }
    }
    Err(ExpertError::Unreachable)
}

/// Sweep right; once the goal has entered the radius-`j` view head to it,
/// and if the right corner turned out empty head left.
pub fn lighthouse1d_action(s: &Lighthouse1dState, j: usize) -> usize {
    if s.goal_seen(j) {
        if s.goal > s.pos {
            RIGHT_1D
        } else {
            LEFT_1D
        }
    } else if s.corner_seen(1, j) {
        LEFT_1D
    } else {
        RIGHT_1D
    }
}

/// Alternate vertical and horizontal moves toward corner `c`.
fn toward_corner(s: &Lighthouse2dState, c: usize) -> usize {
    let (cx, cy) = s.corner(c);
    let vertical = if cy > s.y { UP } else { DOWN };
    let horizontal = if cx > s.x { RIGHT } else { LEFT };
    if cy == s.y {
        horizontal
    } else if cx == s.x {
        vertical
    } else if s.last_action() == Some(vertical) {
        horizontal
    } else {
        vertical
    }
}

/// The radius-`j` sweep: NE first, then along the top to NW, down to SW and
/// across to SE, heading straight for the goal once it has been seen.
pub fn lighthouse2d_action(s: &Lighthouse2dState, j: usize) -> usize {
    let st = s.statuses(j);
    if let Some(c) = st
        .iter()
        .position(|&x| matches!(x, CornerStatus::SeenGoal | CornerStatus::VisibleGoal))
    {
        return toward_corner(s, c);
    }
    let empty = st.map(|x| x == CornerStatus::SeenEmpty);
    let sweep = match empty {
        [false, false, false, false] => return toward_corner(s, 0),
        [true, false, false, false] => Some((LEFT, 1)),
        [true, true, false, false] => Some((DOWN, 2)),
        [true, true, true, false] => Some((RIGHT, 3)),
        _ => None,
    };
    match sweep {
        Some((action, target)) => {
            let blocked = match action {
                LEFT => s.x == -s.n,
                DOWN => s.y == -s.n,
                _ => s.x == s.n,
            };
            if blocked {
                toward_corner(s, target)
            } else {
                action
            }
        }
        None => toward_corner(s, st.iter().position(|&x| x == CornerStatus::Unseen).unwrap_or(0)),
    }
}

/// Opens the good door; on the code pad (only reachable by a student) it
/// enters the next digit of the code.
pub fn pd_action(s: &PdState) -> usize {
    match s.phase {
        Phase::ChooseDoor => s.good_door,
        _ => s.digit_action(s.code[s.entered.len().min(s.code.len() - 1)]),
    }
}

/// The 1D-Lighthouse closed form `0.5 N + 0.5 (3N - 2i)`.
pub fn lighthouse1d_expected_length(n: usize, i: usize) -> f64 {
    0.5 * n as f64 + 0.5 * (3 * n - 2 * i) as f64
}
