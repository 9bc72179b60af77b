//! Wall and lava crossing mazes with MiniGrid conventions.
//!
//! The grid is `S x S` with an outer wall, the agent starts at `(1, 1)`
//! facing east and the goal sits at `(S-2, S-2)`. Rivers run at even
//! rows/columns and each is pierced by one gap along a monotone path.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvError, Family, Observation, TaskSpec, Variant};

pub const VIEW_SIZE: usize = 7;
pub const GRID_OBS_LEN: usize = VIEW_SIZE * VIEW_SIZE * 3;

pub const TURN_LEFT: usize = 0;
pub const TURN_RIGHT: usize = 1;
pub const FORWARD: usize = 2;
pub const SWITCH: usize = 3;

/// Unit steps for headings east, south, west, north.
pub const DIR_VEC: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

pub const EMPTY: u8 = 0;
pub const WALL: u8 = 1;
pub const LAVA: u8 = 2;
pub const GOAL: u8 = 3;

/// `(type, color, state)` triples.
const ENC_UNSEEN: [u8; 3] = [0, 0, 0];
const ENC_EMPTY: [u8; 3] = [1, 0, 0];
const ENC_WALL: [u8; 3] = [2, 5, 0];
const ENC_GOAL: [u8; 3] = [8, 1, 0];
const ENC_LAVA: [u8; 3] = [9, 0, 0];
/// Lights-out sentinel, outside every vocabulary the lit encoder uses.
pub const ENC_DARK: [u8; 3] = [11, 6, 3];

pub const TYPE_VOCAB: usize = 12;
pub const COLOR_VOCAB: usize = 7;
pub const STATE_VOCAB: usize = 4;

const MAX_GENERATION_ATTEMPTS: usize = 64;

pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct CrossingState {
    pub size: usize,
    pub cells: Vec<u8>,
    pub x: i32,
    pub y: i32,
    pub dir: usize,
    pub t: usize,
    pub max_steps: usize,
    pub variant: Variant,
    pub lights_on: bool,
    /// Faulty switch: the next observation only is lit.
    pub flash: bool,
    pub done: bool,
    /// Actions-to-goal for every `(cell, heading)`, see [`distance_field`].
    pub distance: Vec<u32>,
}

impl CrossingState {
    pub fn generate(task: &TaskSpec, seed: u64) -> Result<Self, EnvError> {
        let obstacle = if task.family == Family::LavaCrossing { LAVA } else { WALL };
        let s = task.grid_size;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_GENERATION_ATTEMPTS {
            let cells = generate_cells(s, task.num_obstacles, obstacle, &mut rng);
            let distance = distance_field(&cells, s);
            if (0..4).any(|d| distance[state_index(s, 1, 1, d)] != UNREACHABLE) {
                return Ok(Self {
                    size: s,
                    cells,
                    x: 1,
                    y: 1,
                    dir: 0,
                    t: 0,
                    max_steps: task.max_episode_steps,
                    variant: task.variant,
                    lights_on: false,
                    flash: false,
                    done: false,
                    distance,
                });
            }
        }
        Err(EnvError::Generation {
            seed,
            attempts: MAX_GENERATION_ATTEMPTS,
        })
    }

    pub fn cell(&self, x: i32, y: i32) -> u8 {
        if x < 0 || y < 0 || x >= self.size as i32 || y >= self.size as i32 {
            WALL
        } else {
            self.cells[y as usize * self.size + x as usize]
        }
    }

    pub fn goal(&self) -> (i32, i32) {
        let g = self.size as i32 - 2;
        (g, g)
    }

    pub fn front(&self) -> (i32, i32) {
        let (dx, dy) = DIR_VEC[self.dir];
        (self.x + dx, self.y + dy)
    }

    /// Number of actions an optimal agent needs from the current state.
    pub fn distance_to_goal(&self) -> u32 {
        self.distance[state_index(self.size, self.x, self.y, self.dir)]
    }

    pub fn is_lit(&self) -> bool {
        match self.variant {
            Variant::SwitchOnce | Variant::SwitchFaulty => self.lights_on || self.flash,
            Variant::Base | Variant::Corrupt => true,
        }
    }

    pub fn observe(&self) -> Observation {
        if self.is_lit() {
            Observation::Grid(self.lit_view())
        } else {
            Observation::Grid(dark_view())
        }
    }

    /// The egocentric encoding regardless of the lights.
    pub fn lit_view(&self) -> [u8; GRID_OBS_LEN] {
        let v = VIEW_SIZE as i32;
        let (top_x, top_y) = match self.dir {
            0 => (self.x, self.y - v / 2),
            1 => (self.x - v / 2, self.y),
            2 => (self.x - v + 1, self.y - v / 2),
            _ => (self.x - v / 2, self.y - v + 1),
        };
        let mut view = [[WALL; VIEW_SIZE]; VIEW_SIZE];
        for (i, col) in view.iter_mut().enumerate() {
            for (j, c) in col.iter_mut().enumerate() {
                *c = self.cell(top_x + i as i32, top_y + j as i32);
            }
        }
        for _ in 0..self.dir + 1 {
            view = rotate_left(&view);
        }
        // the agent's own cell is always empty
        view[VIEW_SIZE / 2][VIEW_SIZE - 1] = EMPTY;
        let mask = visibility(&view);
        let mut out = [0u8; GRID_OBS_LEN];
        for i in 0..VIEW_SIZE {
            for j in 0..VIEW_SIZE {
                let enc = if !mask[i][j] {
                    ENC_UNSEEN
                } else {
                    match view[i][j] {
                        EMPTY => ENC_EMPTY,
                        WALL => ENC_WALL,
                        LAVA => ENC_LAVA,
                        _ => ENC_GOAL,
                    }
                };
                let k = (i * VIEW_SIZE + j) * 3;
                out[k..k + 3].copy_from_slice(&enc);
            }
        }
        out
    }

    pub(crate) fn step(&mut self, action: usize) -> (f64, bool, bool) {
        self.t += 1;
        self.flash = false;
        let mut outcome = (0.0, false, false);
        match action {
            TURN_LEFT => self.dir = (self.dir + 3) % 4,
            TURN_RIGHT => self.dir = (self.dir + 1) % 4,
            FORWARD => {
                let (fx, fy) = self.front();
                match self.cell(fx, fy) {
                    WALL => {}
                    c => {
                        self.x = fx;
                        self.y = fy;
                        if c == LAVA {
                            outcome = (0.0, true, false);
                        } else if c == GOAL {
                            let r = 1.0 - self.t as f64 / self.max_steps as f64;
                            outcome = (r, true, true);
                        }
                    }
                }
            }
            _ => match self.variant {
                Variant::SwitchOnce => self.lights_on = true,
                Variant::SwitchFaulty => self.flash = true,
                _ => {}
            },
        }
        if !outcome.1 && self.t >= self.max_steps {
            outcome = (0.0, true, false);
        }
        self.done = outcome.1;
        outcome
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![self.size as u8];
        out.extend_from_slice(&self.cells);
        out.extend_from_slice(&self.x.to_le_bytes());
        out.extend_from_slice(&self.y.to_le_bytes());
        out.push(self.dir as u8);
        out.extend_from_slice(&(self.t as u64).to_le_bytes());
        out.extend([self.lights_on as u8, self.flash as u8, self.done as u8]);
        out
    }
}

pub fn dark_view() -> [u8; GRID_OBS_LEN] {
    let mut out = [0u8; GRID_OBS_LEN];
    for c in out.chunks_exact_mut(3) {
        c.copy_from_slice(&ENC_DARK);
    }
    out
}

/// Lights-off observations become the all-dark sentinel; lit ones pass through.
pub fn apply_darkness(obs: &Observation, lights_on: bool) -> Observation {
    match obs {
        Observation::Grid(_) if !lights_on => Observation::Grid(dark_view()),
        other => other.clone(),
    }
}

fn rotate_left(view: &[[u8; VIEW_SIZE]; VIEW_SIZE]) -> [[u8; VIEW_SIZE]; VIEW_SIZE] {
    let mut out = [[EMPTY; VIEW_SIZE]; VIEW_SIZE];
    for (i, col) in view.iter().enumerate() {
        for (j, &c) in col.iter().enumerate() {
            out[j][VIEW_SIZE - 1 - i] = c;
        }
    }
    out
}

/// Line-of-sight mask from the agent cell `(3, 6)`; only walls block sight.
fn visibility(view: &[[u8; VIEW_SIZE]; VIEW_SIZE]) -> [[bool; VIEW_SIZE]; VIEW_SIZE] {
    let w = VIEW_SIZE;
    let mut mask = [[false; VIEW_SIZE]; VIEW_SIZE];
    mask[w / 2][w - 1] = true;
    for j in (0..w).rev() {
        for i in 0..w - 1 {
            if !mask[i][j] || view[i][j] == WALL {
                continue;
            }
            mask[i + 1][j] = true;
            if j > 0 {
                mask[i + 1][j - 1] = true;
                mask[i][j - 1] = true;
            }
        }
        for i in (1..w).rev() {
            if !mask[i][j] || view[i][j] == WALL {
                continue;
            }
            mask[i - 1][j] = true;
            if j > 0 {
                mask[i - 1][j - 1] = true;
                mask[i][j - 1] = true;
            }
        }
    }
    mask
}

fn generate_cells(s: usize, num_obstacles: usize, obstacle: u8, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut cells = vec![EMPTY; s * s];
    for k in 0..s {
        cells[k] = WALL;
        cells[(s - 1) * s + k] = WALL;
        cells[k * s] = WALL;
        cells[k * s + s - 1] = WALL;
    }
    cells[(s - 2) * s + (s - 2)] = GOAL;

    // (is_vertical, position)
    let mut rivers: Vec<(bool, usize)> = (2..s - 2).step_by(2).map(|p| (true, p)).collect();
    rivers.extend((2..s - 2).step_by(2).map(|p| (false, p)));
    rivers.shuffle(rng);
    rivers.truncate(num_obstacles);
    let mut rivers_v: Vec<usize> = rivers.iter().filter(|r| r.0).map(|r| r.1).collect();
    let mut rivers_h: Vec<usize> = rivers.iter().filter(|r| !r.0).map(|r| r.1).collect();
    rivers_v.sort_unstable();
    rivers_h.sort_unstable();
    for &row in &rivers_h {
        for x in 1..s - 1 {
            cells[row * s + x] = obstacle;
        }
    }
    for &col in &rivers_v {
        for y in 1..s - 1 {
            cells[y * s + col] = obstacle;
        }
    }

    // crossing a vertical river moves one room east, a horizontal one south
    let mut path: Vec<bool> = vec![true; rivers_v.len()];
    path.extend(std::iter::repeat(false).take(rivers_h.len()));
    path.shuffle(rng);
    let mut limits_v = vec![0];
    limits_v.extend(&rivers_v);
    limits_v.push(s - 1);
    let mut limits_h = vec![0];
    limits_h.extend(&rivers_h);
    limits_h.push(s - 1);
    let (mut room_i, mut room_j) = (0, 0);
    for east in path {
        let (x, y) = if east {
            let x = limits_v[room_i + 1];
            let y = rng.gen_range(limits_h[room_j] + 1..limits_h[room_j + 1]);
            room_i += 1;
            (x, y)
        } else {
            let x = rng.gen_range(limits_v[room_i] + 1..limits_v[room_i + 1]);
            let y = limits_h[room_j + 1];
            room_j += 1;
            (x, y)
        };
        cells[y * s + x] = EMPTY;
    }
    cells
}

pub fn state_index(s: usize, x: i32, y: i32, dir: usize) -> usize {
    (y as usize * s + x as usize) * 4 + dir
}

/// Minimum number of actions from every `(cell, heading)` to the goal,
/// found by breadth-first search backwards from the goal. Walls are
/// impassable, lava is fatal and therefore never on a path.
pub fn distance_field(cells: &[u8], s: usize) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; s * s * 4];
    let mut queue = VecDeque::new();
    let g = (s - 2) as i32;
    for d in 0..4 {
        dist[state_index(s, g, g, d)] = 0;
        queue.push_back((g, g, d));
    }
    let cell = |x: i32, y: i32| -> u8 {
        if x < 0 || y < 0 || x >= s as i32 || y >= s as i32 {
            WALL
        } else {
            cells[y as usize * s + x as usize]
        }
    };
    while let Some((x, y, d)) = queue.pop_front() {
        let next = dist[state_index(s, x, y, d)] + 1;
        let mut preds = Vec::with_capacity(3);
        // turning happens in place, so only on cells where the episode is live
        if cell(x, y) == EMPTY {
            preds.push((x, y, (d + 1) % 4));
            preds.push((x, y, (d + 3) % 4));
        }
        let (dx, dy) = DIR_VEC[d];
        let (px, py) = (x - dx, y - dy);
        if cell(px, py) == EMPTY {
            preds.push((px, py, d));
        }
        for (px, py, pd) in preds {
            let k = state_index(s, px, py, pd);
            if dist[k] == UNREACHABLE {
                dist[k] = next;
                queue.push_back((px, py, pd));
            }
        }
    }
    dist
}
