//! 1D and 2D Lighthouse.
//!
//! The agent starts at the centre of `[-N, N]` (or `[-N, N]^2`) and the goal
//! sits at a corner drawn per episode. A student with view radius `i` sees a
//! corner only within Chebyshev distance `i` but remembers its past actions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Observation, TaskSpec};

pub const LH_MAX_STEPS: usize = 1000;
pub const GOAL_REWARD: f64 = 0.99;
pub const TIMEOUT_REWARD: f64 = -1.0;
pub const STEP_REWARD: f64 = -0.01;

/// `4^4` corner-status configurations times `5^2` previous-action pairs.
pub const LH2D_OBS_DIM: usize = 6400;

pub const LEFT_1D: usize = 0;
pub const RIGHT_1D: usize = 1;

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

/// Corner order used by the encoding: NE, NW, SW, SE.
pub const CORNER_SIGNS: [(i32, i32); 4] = [(1, 1), (-1, 1), (-1, -1), (1, -1)];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum CornerStatus {
    Unseen = 0,
    SeenEmpty = 1,
    SeenGoal = 2,
    VisibleGoal = 3,
}

fn reward_for(reached: bool, t: usize, max_steps: usize) -> (f64, bool, bool) {
    if reached {
        (GOAL_REWARD, true, true)
    } else if t >= max_steps {
        (TIMEOUT_REWARD, true, false)
    } else {
        (STEP_REWARD, false, false)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lighthouse1dState {
    pub n: i32,
    /// `-N` or `N`.
    pub goal: i32,
    pub pos: i32,
    pub t: usize,
    pub min_pos: i32,
    pub max_pos: i32,
    pub last_move: Option<i8>,
    pub done: bool,
    pub max_steps: usize,
}

impl Lighthouse1dState {
    pub fn new(task: &TaskSpec, episode_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
        let n = task.grid_size as i32;
        let goal = if rng.gen_bool(0.5) { n } else { -n };
        Self::with_goal(n, goal, task.max_episode_steps)
    }

    pub fn with_goal(n: i32, goal: i32, max_steps: usize) -> Self {
        Self {
            n,
            goal,
            pos: 0,
            t: 0,
            min_pos: 0,
            max_pos: 0,
            last_move: None,
            done: false,
            max_steps,
        }
    }

    /// `1` where the window covers the goal, `-1` where it covers the empty
    /// corner, `0` elsewhere, for offsets `k = -i..=i`.
    pub fn view(&self, radius: usize) -> Vec<i8> {
        let r = radius as i32;
        (-r..=r)
            .map(|k| {
                let c = self.pos + k;
                (c == self.goal) as i8 - (c == -self.goal) as i8
            })
            .collect()
    }

    pub fn observe(&self, radius: usize) -> Observation {
        Observation::Line {
            view: self.view(radius),
            last_move: self.last_move,
        }
    }

    /// Whether the goal corner has entered a radius-`r` view at some point.
    pub fn goal_seen(&self, r: usize) -> bool {
        let r = r as i32;
        if self.goal > 0 {
            self.max_pos + r >= self.n
        } else {
            self.min_pos - r <= -self.n
        }
    }

    pub fn corner_seen(&self, sign: i32, r: usize) -> bool {
        let r = r as i32;
        if sign > 0 {
            self.max_pos + r >= self.n
        } else {
            self.min_pos - r <= -self.n
        }
    }

    pub(crate) fn step(&mut self, action: usize) -> (f64, bool, bool) {
        let delta: i8 = if action == LEFT_1D { -1 } else { 1 };
        self.pos = (self.pos + delta as i32).clamp(-self.n, self.n);
        self.t += 1;
        self.min_pos = self.min_pos.min(self.pos);
        self.max_pos = self.max_pos.max(self.pos);
        self.last_move = Some(delta);
        let out = reward_for(self.pos == self.goal, self.t, self.max_steps);
        self.done = out.1;
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [self.n, self.goal, self.pos, self.min_pos, self.max_pos] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.t as u64).to_le_bytes());
        out.push(self.last_move.map_or(0, |m| m as u8));
        out.push(self.done as u8);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lighthouse2dState {
    pub n: i32,
    /// Index into [`CORNER_SIGNS`].
    pub goal: usize,
    pub x: i32,
    pub y: i32,
    pub t: usize,
    /// Smallest Chebyshev distance to each corner over all visited cells.
    pub min_dist: [u32; 4],
    /// `[last, second to last]` actions, encoded `0` = none, `a + 1` otherwise.
    pub prev: [u8; 2],
    pub done: bool,
    pub max_steps: usize,
}

impl Lighthouse2dState {
    pub fn new(task: &TaskSpec, episode_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
        let goal = rng.gen_range(0..4);
        Self::with_goal(task.grid_size as i32, goal, task.max_episode_steps)
    }

    pub fn with_goal(n: i32, goal: usize, max_steps: usize) -> Self {
        let mut s = Self {
            n,
            goal,
            x: 0,
            y: 0,
            t: 0,
            min_dist: [u32::MAX; 4],
            prev: [0, 0],
            done: false,
            max_steps,
        };
        s.update_dist();
        s
    }

    pub fn corner(&self, c: usize) -> (i32, i32) {
        let (sx, sy) = CORNER_SIGNS[c];
        (sx * self.n, sy * self.n)
    }

    pub fn distance_to(&self, c: usize) -> u32 {
        let (cx, cy) = self.corner(c);
        (self.x - cx).unsigned_abs().max((self.y - cy).unsigned_abs())
    }

    fn update_dist(&mut self) {
        for c in 0..4 {
            self.min_dist[c] = self.min_dist[c].min(self.distance_to(c));
        }
    }

    /// Knowledge of corner `c` available to a viewer of radius `r`.
    pub fn status(&self, c: usize, r: usize) -> CornerStatus {
        let r = r as u32;
        if self.min_dist[c] > r {
            CornerStatus::Unseen
        } else if c != self.goal {
            CornerStatus::SeenEmpty
        } else if self.distance_to(c) <= r {
            CornerStatus::VisibleGoal
        } else {
            CornerStatus::SeenGoal
        }
    }

    pub fn statuses(&self, r: usize) -> [CornerStatus; 4] {
        [0, 1, 2, 3].map(|c| self.status(c, r))
    }

    pub fn encode(&self, r: usize) -> usize {
        let s = self.statuses(r);
        let mut idx = 0usize;
        for st in s {
            idx = idx * 4 + st as usize;
        }
        (idx * 5 + self.prev[0] as usize) * 5 + self.prev[1] as usize
    }

    pub fn observe(&self, radius: usize) -> Observation {
        Observation::Plane(self.encode(radius) as u16)
    }

    pub fn last_action(&self) -> Option<usize> {
        (self.prev[0] > 0).then(|| self.prev[0] as usize - 1)
    }

    pub(crate) fn step(&mut self, action: usize) -> (f64, bool, bool) {
        let (dx, dy) = match action {
            UP => (0, 1),
            DOWN => (0, -1),
            LEFT => (-1, 0),
            _ => (1, 0),
        };
        self.x = (self.x + dx).clamp(-self.n, self.n);
        self.y = (self.y + dy).clamp(-self.n, self.n);
        self.t += 1;
        self.prev = [action as u8 + 1, self.prev[0]];
        self.update_dist();
        let out = reward_for(self.corner(self.goal) == (self.x, self.y), self.t, self.max_steps);
        self.done = out.1;
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [self.n, self.goal as i32, self.x, self.y] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.t as u64).to_le_bytes());
        for d in self.min_dist {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&self.prev);
        out.push(self.done as u8);
        out
    }
}
