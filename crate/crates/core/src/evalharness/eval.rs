//! Greedy evaluation on the held-out validation episodes.

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::diffcore::lstm::LstmState;
use crate::diffcore::ops::argmax_legal;
use crate::diffcore::ParamStore;
use crate::envs::{Env, Observation, TaskSpec, VALIDATION_SEED_START};
use crate::experts::Expert;
use crate::learners::{NetSpec, Prepared};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub episodes: u64,
    pub mean_reward: f64,
    pub success_rate: f64,
    pub mean_length: f64,
}

/// A policy run on a shrinking set of parallel lanes.
pub trait GreedyPolicy {
    /// Starts fresh episodes on `lanes` lanes.
    fn begin(&mut self, lanes: usize);
    /// One action per active lane.
    fn act(&mut self, envs: &[&Env], obs: &[&Observation]) -> Result<Vec<usize>, HarnessError>;
    /// Drops finished lanes; `keep` lists surviving positions in order.
    fn retain(&mut self, keep: &[usize]);
}

/// Argmax over the legal actions of a network's main actor.
pub struct NetPolicy<'p> {
    net: Prepared<'p>,
    hidden: usize,
    state: LstmState,
    feats: Vec<u32>,
}

impl<'p> NetPolicy<'p> {
    pub fn new(spec: &NetSpec, params: &'p ParamStore) -> Result<Self, HarnessError> {
        Ok(Self {
            net: Prepared::new(spec, params)?,
            hidden: spec.hidden,
            state: LstmState::zeros(0, spec.hidden),
            feats: Vec::new(),
        })
    }
}

impl GreedyPolicy for NetPolicy<'_> {
    fn begin(&mut self, lanes: usize) {
        self.state = LstmState::zeros(lanes, self.hidden);
    }

    fn act(&mut self, envs: &[&Env], obs: &[&Observation]) -> Result<Vec<usize>, HarnessError> {
        self.feats.clear();
        let legal: Vec<_> = envs.iter().map(|e| e.legal_actions()).collect();
        for o in obs {
            self.net.spec().features(o, &mut self.feats)?;
        }
        let out = self.net.step(&self.feats, &legal, &mut self.state)?;
        Ok((0..envs.len()).map(|b| argmax_legal(out.main_logp_row(b), legal[b])).collect())
    }

    fn retain(&mut self, keep: &[usize]) {
        if keep.len() != self.state.lanes() {
            self.state = self.state.gather(keep);
        }
    }
}

/// Argmax of the task expert's distribution (privileged).
pub struct ExpertPolicy {
    expert: Expert,
}

impl ExpertPolicy {
    pub fn new(task: &TaskSpec) -> Self {
        Self {
            expert: Expert::for_task(task),
        }
    }
}

impl GreedyPolicy for ExpertPolicy {
    fn begin(&mut self, _lanes: usize) {}

    fn act(&mut self, envs: &[&Env], _obs: &[&Observation]) -> Result<Vec<usize>, HarnessError> {
        envs.iter()
            .map(|e| Ok(argmax_legal(&self.expert.distribution(e)?, e.legal_actions())))
            .collect()
    }

    fn retain(&mut self, _keep: &[usize]) {}
}

/// Panics unless training seeds `[0, VALIDATION_SEED_START)` and the
/// `episodes` validation seeds are disjoint.
pub fn assert_disjoint_seed_ranges(episodes: u64) {
    let end = VALIDATION_SEED_START.checked_add(episodes);
    assert!(end.is_some(), "validation seed range overflows");
    let training = 0..VALIDATION_SEED_START;
    assert!(
        !training.contains(&VALIDATION_SEED_START),
        "training and validation seed ranges overlap"
    );
}

/// Runs `n_episodes` validation episodes (seeds `VALIDATION_SEED_START..`)
/// side by side until each terminates.
pub fn evaluate_policy<P: GreedyPolicy + ?Sized>(
    policy: &mut P,
    task: &TaskSpec,
    experiment_seed: u64,
    n_episodes: u64,
) -> Result<EvalMetrics, HarnessError> {
    if n_episodes == 0 {
        return Err(HarnessError::Invalid("evaluation needs at least one episode".into()));
    }
    let mut envs = Vec::with_capacity(n_episodes as usize);
    let mut obs = Vec::with_capacity(n_episodes as usize);
    for k in 0..n_episodes {
        let mut env = Env::new(task, experiment_seed)?;
        obs.push(env.reset(VALIDATION_SEED_START + k)?);
        envs.push(env);
    }
    let mut active: Vec<usize> = (0..envs.len()).collect();
    let mut reward = vec![0.0; envs.len()];
    let mut length = vec![0u64; envs.len()];
    let mut success = vec![false; envs.len()];
    policy.begin(active.len());
    while !active.is_empty() {
        let actions = {
            let e: Vec<&Env> = active.iter().map(|&i| &envs[i]).collect();
            let o: Vec<&Observation> = active.iter().map(|&i| &obs[i]).collect();
            policy.act(&e, &o)?
        };
        let mut keep = Vec::with_capacity(active.len());
        let mut still = Vec::with_capacity(active.len());
        for (pos, (&i, &a)) in active.iter().zip(&actions).enumerate() {
            let out = envs[i].step(a)?;
            reward[i] += out.reward;
            length[i] += 1;
            if out.done {
                success[i] = out.success;
            } else {
                obs[i] = out.observation;
                keep.push(pos);
                still.push(i);
            }
        }
        policy.retain(&keep);
        active = still;
    }
    let n = n_episodes as f64;
    Ok(EvalMetrics {
        episodes: n_episodes,
        mean_reward: reward.iter().sum::<f64>() / n,
        success_rate: success.iter().filter(|&&s| s).count() as f64 / n,
        mean_length: length.iter().sum::<u64>() as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::ops::{is_legal, sample_index};
    use crate::envs::task_by_id;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct UniformDoors(ChaCha8Rng);

    impl GreedyPolicy for UniformDoors {
        fn begin(&mut self, _: usize) {}
        fn act(&mut self, envs: &[&Env], _: &[&Observation]) -> Result<Vec<usize>, HarnessError> {
            Ok(envs
                .iter()
                .map(|e| {
                    let mask = e.legal_actions();
                    let n = e.num_actions();
                    // the door choice skips d1
                    let legal: Vec<f64> = (0..n)
                        .map(|a| f64::from(u8::from(is_legal(mask, a) && !(mask & 1 == 1 && a == 0))))
                        .collect();
                    let total: f64 = legal.iter().sum();
                    let p: Vec<f64> = legal.iter().map(|x| x / total).collect();
                    sample_index(&p, self.0.gen())
                })
                .collect())
        }
        fn retain(&mut self, _: &[usize]) {}
    }

    #[test]
    fn omniscient_lighthouse_walks_straight() {
        let task = task_by_id("lh1d-n4").unwrap().with_radii(4, 4).unwrap();
        let m = evaluate_policy(&mut ExpertPolicy::new(&task), &task, 0, 50).unwrap();
        assert_eq!(m.mean_length, 4.0);
        assert_eq!(m.success_rate, 1.0);
    }

    #[test]
    fn random_poisoned_door_matches_closed_form() {
        let task = task_by_id("pd").unwrap();
        let n = task.doors as f64;
        let expected = -2.0 * (n - 3.0) / (n - 1.0);
        let m = evaluate_policy(&mut UniformDoors(ChaCha8Rng::seed_from_u64(5)), &task, 1, 200).unwrap();
        // 200 draws of +-2: standard error about 0.13
        assert!((m.mean_reward - expected).abs() < 0.4, "{} vs {expected}", m.mean_reward);
        assert_eq!(m.mean_length, 1.0);
    }

    #[test]
    fn expert_solves_poisoned_doors_and_zero_episodes_fail() {
        let task = task_by_id("pd").unwrap();
        let m = evaluate_policy(&mut ExpertPolicy::new(&task), &task, 3, 20).unwrap();
        assert_eq!(m.mean_reward, 2.0);
        assert!(evaluate_policy(&mut ExpertPolicy::new(&task), &task, 3, 0).is_err());
    }

    #[test]
    fn network_policy_is_deterministic_and_handles_compaction() {
        let task = task_by_id("lc-once-switch-s9").unwrap();
        let spec = NetSpec::for_task(&task).unwrap();
        let params = spec.init_params(2);
        let a = evaluate_policy(&mut NetPolicy::new(&spec, &params).unwrap(), &task, 0, 12).unwrap();
        let b = evaluate_policy(&mut NetPolicy::new(&spec, &params).unwrap(), &task, 0, 12).unwrap();
        assert_eq!(a, b);
        assert!(a.mean_length >= 1.0 && a.mean_length <= task.max_episode_steps as f64);
    }
}
