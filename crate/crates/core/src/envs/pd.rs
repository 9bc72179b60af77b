//! PoisonedDoors.
//!
//! Actions `0..N` open doors `d1..dN`; actions `N..N+3` enter digits 0, 1, 2.
//! Door `d1` leads to the code pad; the code is fixed per experiment seed and
//! the good door among `d2..dN` is drawn per episode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Observation, TaskSpec};
use crate::diffcore::ActionMask;

pub const NUM_DIGITS: usize = 3;
pub const GOOD_DOOR_REWARD: f64 = 2.0;
pub const BAD_DOOR_REWARD: f64 = -2.0;
pub const CODE_REWARD: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    ChooseDoor,
    DoorOneChosen,
    EnteringCode,
    Terminal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdState {
    pub doors: usize,
    pub code: Vec<u8>,
    /// Zero-based index of the +2 door, always in `1..doors`.
    pub good_door: usize,
    pub phase: Phase,
    pub entered: Vec<u8>,
}

/// The experiment's fixed code.
pub fn experiment_code(code_length: usize, experiment_seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(experiment_seed);
    (0..code_length).map(|_| rng.gen_range(0..NUM_DIGITS as u8)).collect()
}

impl PdState {
    pub fn new(task: &TaskSpec, experiment_seed: u64, episode_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
        Self {
            doors: task.doors,
            code: experiment_code(task.code_length, experiment_seed),
            good_door: rng.gen_range(1..task.doors),
            phase: Phase::ChooseDoor,
            entered: Vec::with_capacity(task.code_length),
        }
    }

    pub fn observe(&self) -> Observation {
        Observation::Doors(match self.phase {
            Phase::ChooseDoor => 0,
            Phase::DoorOneChosen => 1,
            Phase::EnteringCode => 2,
            Phase::Terminal => 3,
        })
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Terminal
    }

    pub fn digit_action(&self, digit: u8) -> usize {
        self.doors + digit as usize
    }

    pub fn legal_actions(&self) -> ActionMask {
        let doors = ((1u16 << self.doors) - 1) as u8;
        match self.phase {
            Phase::ChooseDoor => doors,
            Phase::DoorOneChosen | Phase::EnteringCode => 0b111 << self.doors,
            Phase::Terminal => 0,
        }
    }

    pub(crate) fn step(&mut self, action: usize) -> (f64, bool, bool) {
        match self.phase {
            Phase::ChooseDoor => {
                if action == 0 {
                    self.phase = Phase::DoorOneChosen;
                    (0.0, false, false)
                } else {
                    self.phase = Phase::Terminal;
                    if action == self.good_door {
                        (GOOD_DOOR_REWARD, true, true)
                    } else {
                        (BAD_DOOR_REWARD, true, false)
                    }
                }
            }
            Phase::DoorOneChosen | Phase::EnteringCode => {
                self.entered.push((action - self.doors) as u8);
                self.phase = Phase::EnteringCode;
                if self.entered.len() < self.code.len() {
                    return (0.0, false, false);
                }
                self.phase = Phase::Terminal;
                if self.entered == self.code {
                    (CODE_REWARD, true, true)
                } else {
                    (0.0, true, false)
                }
            }
            Phase::Terminal => unreachable!("guarded by Env::step"),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![self.doors as u8, self.good_door as u8, self.phase as u8];
        out.push(self.code.len() as u8);
        out.extend_from_slice(&self.code);
        out.push(self.entered.len() as u8);
        out.extend_from_slice(&self.entered);
        out
    }
}
