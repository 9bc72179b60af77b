//! Vectorized on-policy collection with teacher forcing, and demonstration
//! sampling.
//!
//! Every lane owns its environment, its random stream and its slice of the
//! recurrent state, so a lane's trajectory depends only on its own seed and
//! the (shared, frozen) parameters.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffcore::lstm::LstmState;
use crate::diffcore::ops::sample_index;
use crate::diffcore::ActionMask;
use crate::envs::{Env, Observation, TaskSpec, VALIDATION_SEED_START};
use crate::experts::{one_hot, Demonstration, Expert};
use crate::learners::losses::{gae_advantages, normalize_advantages, Objective};
use crate::learners::{LearnError, LossBatch, NetSpec, Prepared};

pub const NUM_LANES: usize = 20;
pub const SEGMENT_LEN: usize = 100;
pub const EPOCHS: usize = 4;
pub const MINIBATCHES: usize = 2;

/// Summary of an episode that finished during collection.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub lane: usize,
    pub reward: f64,
    pub length: usize,
    pub success: bool,
}

/// One collection of `lanes x steps` transitions, rows indexed `t * lanes + b`.
#[derive(Clone, Debug)]
pub struct RolloutBuffer {
    pub lanes: usize,
    pub steps: usize,
    pub num_actions: usize,
    pub features: Vec<u32>,
    pub legal: Vec<ActionMask>,
    /// 0 where the lane starts a new episode at that step.
    pub masks: Vec<f64>,
    pub actions: Vec<u8>,
    /// Behaviour log-probability of the executed action under the snapshot.
    pub logp: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub values: Vec<f64>,
    /// Whether the executed action came from the expert.
    pub forced: Vec<bool>,
    /// Expert distributions, `rows x actions`, when collected.
    pub expert: Option<Vec<f64>>,
    /// Recurrent state entering the segment.
    pub init_state: Option<LstmState>,
    /// Value of the state after the last step of each lane.
    pub bootstrap: Vec<f64>,
    pub episodes: Vec<EpisodeSummary>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.lanes * self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-lane GAE; returns `(advantages, returns)` in row order.
    pub fn advantages(&self, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let rows = self.len();
        let mut adv = vec![0.0; rows];
        let mut ret = vec![0.0; rows];
        for b in 0..self.lanes {
            let idx: Vec<usize> = (0..self.steps).map(|t| t * self.lanes + b).collect();
            let r: Vec<f64> = idx.iter().map(|&i| self.rewards[i]).collect();
            let v: Vec<f64> = idx.iter().map(|&i| self.values[i]).collect();
            let d: Vec<bool> = idx.iter().map(|&i| self.dones[i]).collect();
            let (a, g) = gae_advantages(&r, &v, &d, self.bootstrap[b], gamma, lambda);
            for (k, &i) in idx.iter().enumerate() {
                adv[i] = a[k];
                ret[i] = g[k];
            }
        }
        (adv, ret)
    }

    /// Training batch over a subset of lanes. `advantages` and `returns` are
    /// full-buffer arrays in row order.
    pub fn minibatch(
        &self,
        spec: &NetSpec,
        lanes: &[usize],
        advantages: &[f64],
        returns: &[f64],
        objective: Objective,
    ) -> LossBatch {
        let width = spec.feature_width();
        let a = self.num_actions;
        let n = lanes.len() * self.steps;
        let mut mb = LossBatch {
            spec: spec.clone(),
            lanes: lanes.len(),
            steps: self.steps,
            features: Vec::with_capacity(n * width),
            legal: Vec::with_capacity(n),
            masks: Vec::with_capacity(n),
            init: self.init_state.as_ref().map(|s| s.gather(lanes)),
            expert: self.expert.as_ref().map(|_| Vec::with_capacity(n * a)),
            actions: Vec::with_capacity(n),
            old_logp: Vec::with_capacity(n),
            advantages: Vec::with_capacity(n),
            returns: Vec::with_capacity(n),
            objective,
            frozen_weights: None,
        };
        for t in 0..self.steps {
            for &b in lanes {
                let r = t * self.lanes + b;
                mb.features.extend_from_slice(&self.features[r * width..(r + 1) * width]);
                mb.legal.push(self.legal[r]);
                mb.masks.push(self.masks[r]);
                if let (Some(dst), Some(src)) = (mb.expert.as_mut(), self.expert.as_ref()) {
                    dst.extend_from_slice(&src[r * a..(r + 1) * a]);
                }
                mb.actions.push(self.actions[r]);
                mb.old_logp.push(self.logp[r]);
                mb.advantages.push(advantages[r]);
                mb.returns.push(returns[r]);
            }
        }
        mb
    }
}

/// Splits `0..lanes` into `parts` shuffled groups for one epoch.
pub fn lane_groups<R: Rng>(lanes: usize, parts: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lanes).collect();
    order.shuffle(rng);
    let size = lanes.div_ceil(parts.max(1));
    order.chunks(size.max(1)).map(<[usize]>::to_vec).collect()
}

/// GAE plus per-buffer advantage normalization.
pub fn normalized_advantages(buf: &RolloutBuffer, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let (mut adv, ret) = buf.advantages(gamma, lambda);
    normalize_advantages(&mut adv);
    (adv, ret)
}

/// Persistent lanes that keep their episodes and recurrent state across
/// collections.
pub struct Collector {
    spec: NetSpec,
    expert: Expert,
    envs: Vec<Env>,
    rngs: Vec<ChaCha8Rng>,
    obs: Vec<Observation>,
    fresh: Vec<bool>,
    state: LstmState,
    ep_reward: Vec<f64>,
    ep_len: Vec<usize>,
}

/// Training episode seed drawn from a lane's stream; never in the
/// validation range.
fn training_seed(rng: &mut ChaCha8Rng) -> u64 {
    rng.gen_range(0..VALIDATION_SEED_START)
}

impl Collector {
    /// One lane per entry of `lane_seeds`. `experiment_seed` fixes
    /// per-experiment task constants (the PoisonedDoors code).
    pub fn new(task: &TaskSpec, spec: &NetSpec, experiment_seed: u64, lane_seeds: &[u64]) -> Result<Self, LearnError> {
        let mut envs = Vec::new();
        let mut rngs = Vec::new();
        let mut obs = Vec::new();
        for &s in lane_seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut env = Env::new(task, experiment_seed)?;
            obs.push(env.reset(training_seed(&mut rng))?);
            envs.push(env);
            rngs.push(rng);
        }
        let lanes = lane_seeds.len();
        Ok(Self {
            spec: spec.clone(),
            expert: Expert::for_task(task),
            envs,
            rngs,
            obs,
            fresh: vec![true; lanes],
            state: LstmState::zeros(lanes, spec.hidden),
            ep_reward: vec![0.0; lanes],
            ep_len: vec![0; lanes],
        })
    }

    pub fn lanes(&self) -> usize {
        self.envs.len()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.obs
    }

    /// Collects `steps` transitions per lane. With probability
    /// `teacher_forcing` a step executes an action drawn from the expert's
    /// distribution instead of the policy's. Expert distributions are stored
    /// when `store_expert` is set.
    pub fn collect(
        &mut self,
        net: &Prepared<'_>,
        steps: usize,
        teacher_forcing: f64,
        store_expert: bool,
    ) -> Result<RolloutBuffer, LearnError> {
        let lanes = self.lanes();
        let width = self.spec.feature_width();
        let a = self.spec.num_actions;
        let rows = lanes * steps;
        let need_expert = store_expert || teacher_forcing > 0.0;
        let mut buf = RolloutBuffer {
            lanes,
            steps,
            num_actions: a,
            features: Vec::with_capacity(rows * width),
            legal: Vec::with_capacity(rows),
            masks: Vec::with_capacity(rows),
            actions: Vec::with_capacity(rows),
            logp: Vec::with_capacity(rows),
            rewards: Vec::with_capacity(rows),
            dones: Vec::with_capacity(rows),
            values: Vec::with_capacity(rows),
            forced: Vec::with_capacity(rows),
            expert: store_expert.then(|| Vec::with_capacity(rows * a)),
            init_state: self.spec.is_recurrent().then(|| self.state.clone()),
            bootstrap: vec![0.0; lanes],
            episodes: Vec::new(),
        };
        let mut feats = Vec::with_capacity(lanes * width);
        for _ in 0..steps {
            feats.clear();
            let mut legal = Vec::with_capacity(lanes);
            for b in 0..lanes {
                self.spec.features(&self.obs[b], &mut feats)?;
                legal.push(self.envs[b].legal_actions());
            }
            let out = net.step(&feats, &legal, &mut self.state)?;
            buf.features.extend_from_slice(&feats);
            buf.legal.extend_from_slice(&legal);
            for b in 0..lanes {
                buf.masks.push(if self.fresh[b] { 0.0 } else { 1.0 });
                self.fresh[b] = false;
                let expert = if need_expert {
                    Some(self.expert.distribution(&self.envs[b])?)
                } else {
                    None
                };
                let rng = &mut self.rngs[b];
                let forced = teacher_forcing > 0.0 && rng.gen::<f64>() < teacher_forcing;
                let u = rng.gen::<f64>();
                let action = match (&expert, forced) {
                    (Some(e), true) => sample_index(e, u),
                    _ => sample_index(&out.main_probs_row(b), u),
                };
                if let (Some(dst), Some(e)) = (buf.expert.as_mut(), expert.as_ref()) {
                    dst.extend_from_slice(e);
                }
                let step = self.envs[b].step(action)?;
                buf.actions.push(action as u8);
                buf.logp.push(out.main_logp_row(b)[action]);
                buf.rewards.push(step.reward);
                buf.dones.push(step.done);
                buf.values.push(out.values[b]);
                buf.forced.push(forced);
                self.ep_reward[b] += step.reward;
                self.ep_len[b] += 1;
                if step.done {
                    buf.episodes.push(EpisodeSummary {
                        lane: b,
                        reward: self.ep_reward[b],
                        length: self.ep_len[b],
                        success: step.success,
                    });
                    self.ep_reward[b] = 0.0;
                    self.ep_len[b] = 0;
                    let seed = training_seed(&mut self.rngs[b]);
                    self.obs[b] = self.envs[b].reset(seed)?;
                    self.fresh[b] = true;
                    if self.spec.is_recurrent() {
                        self.state.reset_lane(b);
                    }
                } else {
                    self.obs[b] = step.observation;
                }
            }
        }
        // bootstrap values from a throwaway copy of the state
        feats.clear();
        let mut legal = Vec::with_capacity(lanes);
        for b in 0..lanes {
            self.spec.features(&self.obs[b], &mut feats)?;
            legal.push(self.envs[b].legal_actions());
        }
        let mut probe = self.state.clone();
        let out = net.step(&feats, &legal, &mut probe)?;
        for b in 0..lanes {
            let ended = steps > 0 && buf.dones[(steps - 1) * lanes + b];
            buf.bootstrap[b] = if ended { 0.0 } else { out.values[b] };
        }
        Ok(buf)
    }
}

/// Uniform sampling of demonstration windows.
pub struct DemoSampler {
    spec: NetSpec,
    num_actions: usize,
    features: Vec<u32>,
    legal: Vec<ActionMask>,
    starts: Vec<bool>,
    labels: Vec<u8>,
    rng: ChaCha8Rng,
}

impl DemoSampler {
    pub fn new(demo: &Demonstration, spec: &NetSpec, seed: u64) -> Result<Self, LearnError> {
        if demo.num_steps() == 0 {
            return Err(LearnError::Config("empty demonstration set".into()));
        }
        let mut s = Self {
            spec: spec.clone(),
            num_actions: spec.num_actions,
            features: Vec::new(),
            legal: Vec::new(),
            starts: Vec::new(),
            labels: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        for ep in &demo.episodes {
            for (k, step) in ep.iter().enumerate() {
                spec.features(&step.observation, &mut s.features)?;
                s.legal.push(step.legal);
                s.starts.push(k == 0);
                s.labels.push(step.expert_action);
            }
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Draws `windows` start positions uniformly with replacement and takes
    /// `window` consecutive transitions from each (wrapping at the end of the
    /// dataset). Each window starts from a zero recurrent state and resets
    /// at episode boundaries. Rows are `t * windows + w`.
    pub fn sample(&mut self, windows: usize, window: usize, objective: Objective) -> LossBatch {
        let n = self.len();
        let width = self.spec.feature_width();
        let a = self.num_actions;
        let starts: Vec<usize> = (0..windows).map(|_| self.rng.gen_range(0..n)).collect();
        let rows = windows * window;
        let mut mb = LossBatch {
            spec: self.spec.clone(),
            lanes: windows,
            steps: window,
            features: Vec::with_capacity(rows * width),
            legal: Vec::with_capacity(rows),
            masks: Vec::with_capacity(rows),
            init: None,
            expert: Some(Vec::with_capacity(rows * a)),
            actions: Vec::new(),
            old_logp: Vec::new(),
            advantages: Vec::new(),
            returns: Vec::new(),
            objective,
            frozen_weights: None,
        };
        let expert = mb.expert.as_mut().unwrap();
        for t in 0..window {
            for &s in &starts {
                let i = (s + t) % n;
                mb.features.extend_from_slice(&self.features[i * width..(i + 1) * width]);
                mb.legal.push(self.legal[i]);
                mb.masks.push(if t == 0 || self.starts[i] { 0.0 } else { 1.0 });
                expert.extend(one_hot(self.labels[i] as usize, a));
            }
        }
        mb
    }

    /// Expert label of transition `i` in dataset order.
    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::task_by_id;
    use crate::experts::record_demonstrations;
    use crate::learners::network::SeqBatch;

    fn setup(id: &str, seeds: &[u64]) -> (TaskSpec, NetSpec, Collector) {
        let task = task_by_id(id).unwrap();
        let spec = NetSpec::for_task(&task).unwrap();
        let c = Collector::new(&task, &spec, 7, seeds).unwrap();
        (task, spec, c)
    }

    fn seeds(n: usize) -> Vec<u64> {
        (0..n as u64).map(|i| 100 + i).collect()
    }

    #[test]
    fn full_teacher_forcing_executes_the_expert() {
        let (_, spec, mut c) = setup("lc-once-switch-s9", &seeds(4));
        let params = spec.init_params(1);
        let net = Prepared::new(&spec, &params).unwrap();
        let buf = c.collect(&net, 30, 1.0, true).unwrap();
        let e = buf.expert.as_ref().unwrap();
        for r in 0..buf.len() {
            let row = &e[r * 4..(r + 1) * 4];
            assert_eq!(row[buf.actions[r] as usize], 1.0);
            assert!(buf.forced[r]);
        }
    }

    #[test]
    fn stored_log_probs_match_recomputed_minibatches_exactly() {
        for id in ["pd", "wc-corrupt-s9", "lh2d-n7"] {
            let (_, spec, mut c) = setup(id, &seeds(NUM_LANES));
            let params = spec.init_params(3);
            let net = Prepared::new(&spec, &params).unwrap();
            // a first segment so the second starts from a carried state
            c.collect(&net, 17, 0.0, false).unwrap();
            let buf = c.collect(&net, SEGMENT_LEN, 0.0, false).unwrap();
            assert_eq!(buf.len(), 2000);
            let (adv, ret) = normalized_advantages(&buf, 0.99, 1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut seen = vec![0usize; NUM_LANES];
            for group in lane_groups(NUM_LANES, MINIBATCHES, &mut rng) {
                assert_eq!(group.len(), 10);
                group.iter().for_each(|&b| seen[b] += 1);
                let mb = buf.minibatch(&spec, &group, &adv, &ret, Objective::ppo(0.1));
                assert_eq!(mb.actions.len(), 1000);
                let fwd = net.forward(&mb.seq_batch()).unwrap();
                for r in 0..1000 {
                    assert_eq!(fwd.main_logp_row(r)[mb.actions[r] as usize], mb.old_logp[r], "{id} row {r}");
                }
            }
            assert!(seen.iter().all(|&k| k == 1));
        }
    }

    #[test]
    fn untrained_policy_samples_follow_its_distribution() {
        let (_, spec, mut c) = setup("pd", &seeds(NUM_LANES));
        let params = spec.init_params(3);
        let net = Prepared::new(&spec, &params).unwrap();
        let buf = c.collect(&net, 200, 0.0, false).unwrap();
        // door choices only: observation token 0
        let fwd = net.forward(&SeqBatch {
            lanes: 1,
            steps: 1,
            features: &[0],
            legal: &[0b1111],
            masks: &[0.0],
            init: None,
        });
        let p = fwd.unwrap().main_probs_row(0);
        let mut counts = [0.0; 4];
        let mut n = 0.0;
        for r in 0..buf.len() {
            if buf.masks[r] == 0.0 && buf.features[r] == 0 {
                counts[buf.actions[r] as usize] += 1.0;
                n += 1.0;
            }
        }
        assert!(n > 300.0);
        for k in 0..4 {
            assert!((counts[k] / n - p[k]).abs() < 0.08, "{k}: {} vs {}", counts[k] / n, p[k]);
        }
        assert!(buf.forced.iter().all(|&f| !f));
    }

    #[test]
    fn permuting_lane_seeds_permutes_trajectories() {
        let s = seeds(5);
        let mut rev = s.clone();
        rev.reverse();
        let (_, spec, mut a) = setup("wc-corrupt-s9", &s);
        let (_, _, mut b) = setup("wc-corrupt-s9", &rev);
        let params = spec.init_params(9);
        let net = Prepared::new(&spec, &params).unwrap();
        let ba = a.collect(&net, 40, 0.3, true).unwrap();
        let bb = b.collect(&net, 40, 0.3, true).unwrap();
        for t in 0..40 {
            for lane in 0..5 {
                let ra = t * 5 + lane;
                let rb = t * 5 + (4 - lane);
                assert_eq!(ba.actions[ra], bb.actions[rb]);
                assert_eq!(ba.logp[ra], bb.logp[rb]);
                assert_eq!(ba.rewards[ra], bb.rewards[rb]);
            }
        }
    }

    #[test]
    fn episodes_reset_lanes_and_masks() {
        let (_, spec, mut c) = setup("pd", &seeds(3));
        let params = spec.init_params(3);
        let net = Prepared::new(&spec, &params).unwrap();
        let buf = c.collect(&net, 50, 0.0, false).unwrap();
        assert!(!buf.episodes.is_empty());
        for r in 0..buf.len() {
            let next = r + 3;
            if buf.dones[r] && next < buf.len() {
                assert_eq!(buf.masks[next], 0.0);
                assert_eq!(buf.features[next], 0, "new PD episodes start at the door choice");
            }
        }
        let total: f64 = buf.rewards.iter().sum();
        let done_reward: f64 = buf.episodes.iter().map(|e| e.reward).sum();
        // every PD reward arrives on the terminal step
        assert!((total - done_reward).abs() < 1e-12);
    }

    #[test]
    fn demo_sampler_windows_and_errors() {
        let task = task_by_id("lc-once-switch-s9").unwrap();
        let spec = NetSpec::for_task(&task).unwrap();
        let demo = record_demonstrations(&task, 6, 2).unwrap();
        let mut a = DemoSampler::new(&demo, &spec, 5).unwrap();
        let mut b = DemoSampler::new(&demo, &spec, 5).unwrap();
        let ba = a.sample(10, 100, Objective::bc());
        let bb = b.sample(10, 100, Objective::bc());
        assert_eq!(ba.features, bb.features);
        assert_eq!(ba.features.len(), 1000 * 147);
        assert!(ba.masks[..10].iter().all(|&m| m == 0.0));
        let e = ba.expert.as_ref().unwrap();
        assert!(e.chunks(4).all(|row| row.iter().sum::<f64>() == 1.0));
        let empty = Demonstration {
            task: task.id.clone(),
            expert: "x".into(),
            seed: 0,
            episodes: vec![],
        };
        assert!(DemoSampler::new(&empty, &spec, 0).is_err());
    }

    #[test]
    fn single_transition_sampling_draws_from_the_dataset() {
        let task = task_by_id("lh2d-n7").unwrap();
        let spec = NetSpec::for_task(&task).unwrap();
        let demo = record_demonstrations(&task, 3, 2).unwrap();
        let mut s = DemoSampler::new(&demo, &spec, 1).unwrap();
        let n = s.len();
        let mb = s.sample(n, 1, Objective::bc());
        let pool: Vec<(u32, u8)> = (0..n).map(|i| (s.features[i], s.label(i))).collect();
        let e = mb.expert.as_ref().unwrap();
        for r in 0..n {
            let label = (0..4).find(|&k| e[r * 4 + k] == 1.0).unwrap() as u8;
            assert!(pool.contains(&(mb.features[r], label)));
        }
    }
}
