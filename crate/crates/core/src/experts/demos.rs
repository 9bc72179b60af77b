//! Recorded expert trajectories and their binary file format.
//!
//! ```text
//! magic       8 bytes "ADVDEMO\0"
//! version     u32
//! header_len  u32, then JSON {task, expert, seed, episodes}
//! per episode: u32 step count, then per step
//!   u16 obs_len, obs bytes, u8 legal mask, u8 expert action,
//!   u8 executed action, f64 reward, u8 done
//! ```

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Expert, ExpertError};
use crate::diffcore::ops::sample_index;
use crate::diffcore::ActionMask;
use crate::envs::{Env, EnvError, Observation, TaskSpec, VALIDATION_SEED_START};

const MAGIC: &[u8; 8] = b"ADVDEMO\0";
pub const DEMO_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct DemoStep {
    pub observation: Observation,
    pub legal: ActionMask,
    pub expert_action: u8,
    pub executed_action: u8,
    pub reward: f64,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    task: String,
    expert: String,
    seed: u64,
    episodes: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub task: String,
    pub expert: String,
    pub seed: u64,
    pub episodes: Vec<Vec<DemoStep>>,
}

impl Demonstration {
    pub fn num_steps(&self) -> usize {
        self.episodes.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Expert(#[from] ExpertError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("demonstration file: {0}")]
    Format(String),
}

/// Rolls out the task's expert with teacher forcing 1. Stochastic experts
/// (the corrupted one) have their executed action sampled; that sample is
/// also the recorded expert label. The experiment seed of the environment is
/// `seed`, so PoisonedDoors demonstrations share the training code.
pub fn record_demonstrations(task: &TaskSpec, num_episodes: usize, seed: u64) -> Result<Demonstration, DemoError> {
    let expert = Expert::for_task(task);
    let mut env = Env::new(task, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut episodes = Vec::with_capacity(num_episodes);
    for _ in 0..num_episodes {
        let mut obs = env.reset(rng.gen_range(0..VALIDATION_SEED_START))?;
        let mut steps = Vec::new();
        loop {
            let dist = expert.distribution(&env)?;
            let action = sample_index(&dist, rng.gen::<f64>());
            let legal = env.legal_actions();
            let out = env.step(action)?;
            steps.push(DemoStep {
                observation: obs,
                legal,
                expert_action: action as u8,
                executed_action: action as u8,
                reward: out.reward,
                done: out.done,
            });
            obs = out.observation;
            if out.done {
                break;
            }
        }
        episodes.push(steps);
    }
    Ok(Demonstration {
        task: task.id.clone(),
        expert: expert.kind(),
        seed,
        episodes,
    })
}

pub fn write_demonstrations<W: Write>(out: &mut W, demo: &Demonstration) -> Result<(), DemoError> {
    let header = serde_json::to_vec(&Header {
        task: demo.task.clone(),
        expert: demo.expert.clone(),
        seed: demo.seed,
        episodes: demo.episodes.len() as u32,
    })
    .map_err(|e| DemoError::Format(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&DEMO_VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u32).to_le_bytes())?;
    out.write_all(&header)?;
    for ep in &demo.episodes {
        out.write_all(&(ep.len() as u32).to_le_bytes())?;
        for s in ep {
            let obs = s.observation.to_bytes();
            out.write_all(&(obs.len() as u16).to_le_bytes())?;
            out.write_all(&obs)?;
            out.write_all(&[s.legal, s.expert_action, s.executed_action])?;
            out.write_all(&s.reward.to_le_bytes())?;
            out.write_all(&[s.done as u8])?;
        }
    }
    Ok(())
}

fn read_exact<const K: usize, R: Read>(r: &mut R) -> Result<[u8; K], DemoError> {
    let mut b = [0u8; K];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_demonstrations<R: Read>(input: &mut R) -> Result<Demonstration, DemoError> {
    if &read_exact::<8, _>(input)? != MAGIC {
        return Err(DemoError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_exact(input)?);
    if version != DEMO_VERSION {
        return Err(DemoError::Format(format!("unsupported version {version}")));
    }
    let len = u32::from_le_bytes(read_exact(input)?) as usize;
    let mut raw = vec![0u8; len];
    input.read_exact(&mut raw)?;
    let header: Header = serde_json::from_slice(&raw).map_err(|e| DemoError::Format(e.to_string()))?;
    let mut episodes = Vec::with_capacity(header.episodes as usize);
    for _ in 0..header.episodes {
        let n = u32::from_le_bytes(read_exact(input)?) as usize;
        let mut steps = Vec::with_capacity(n);
        for _ in 0..n {
            let olen = u16::from_le_bytes(read_exact(input)?) as usize;
            let mut ob = vec![0u8; olen];
            input.read_exact(&mut ob)?;
            let observation =
                Observation::from_bytes(&ob).ok_or_else(|| DemoError::Format("bad observation".into()))?;
            let [legal, expert_action, executed_action] = read_exact::<3, _>(input)?;
            let reward = f64::from_le_bytes(read_exact(input)?);
            let [done] = read_exact::<1, _>(input)?;
            steps.push(DemoStep {
                observation,
                legal,
                expert_action,
                executed_action,
                reward,
                done: done != 0,
            });
        }
        if steps.last().map_or(true, |s| !s.done) {
            return Err(DemoError::Format("episode without a terminal step".into()));
        }
        episodes.push(steps);
    }
    Ok(Demonstration {
        task: header.task,
        expert: header.expert,
        seed: header.seed,
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::crossing::{dark_view, SWITCH};
    use crate::envs::task_by_id;

    #[test]
    fn crossing_demos_all_succeed() {
        let t = task_by_id("lc-once-switch-s9").unwrap();
        let d = record_demonstrations(&t, 10, 3).unwrap();
        assert_eq!(d.episodes.len(), 10);
        for ep in &d.episodes {
            let last = ep.last().unwrap();
            assert!(last.done && last.reward > 0.0);
            // lights are never switched on, so the student sees darkness throughout
            assert!(ep.iter().all(|s| s.observation == Observation::Grid(dark_view())));
            assert!(ep.iter().all(|s| s.expert_action as usize != SWITCH));
            assert!(ep.iter().all(|s| s.expert_action == s.executed_action));
        }
    }

    #[test]
    fn corrupt_demos_contain_random_actions_near_goal() {
        let t = task_by_id("wc-corrupt-s9").unwrap();
        let d = record_demonstrations(&t, 20, 1).unwrap();
        // a left turn undone by a right turn (or vice versa) is never optimal
        let wasteful = d.episodes.iter().any(|ep| {
            ep.windows(2)
                .any(|w| w[0].expert_action < 2 && w[1].expert_action < 2 && w[0].expert_action != w[1].expert_action)
        });
        assert!(wasteful);
    }

    #[test]
    fn fixed_seed_gives_identical_bytes() {
        let t = task_by_id("wc-corrupt-s9").unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_demonstrations(&mut a, &record_demonstrations(&t, 5, 8).unwrap()).unwrap();
        write_demonstrations(&mut b, &record_demonstrations(&t, 5, 8).unwrap()).unwrap();
        assert_eq!(a, b);
        let back = read_demonstrations(&mut a.as_slice()).unwrap();
        assert_eq!(back, record_demonstrations(&t, 5, 8).unwrap());
    }

    #[test]
    fn pd_and_lighthouse_round_trip() {
        for id in ["pd", "lh2d-n7", "lh1d-n4"] {
            let t = task_by_id(id).unwrap();
            let d = record_demonstrations(&t, 4, 2).unwrap();
            let mut buf = Vec::new();
            write_demonstrations(&mut buf, &d).unwrap();
            assert_eq!(read_demonstrations(&mut buf.as_slice()).unwrap(), d);
        }
    }
}
