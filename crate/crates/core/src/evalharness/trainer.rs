//! One training run: staged losses over on-policy rollouts and/or
//! demonstrations, with periodic greedy validation.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eval::{assert_disjoint_seed_ranges, evaluate_policy, NetPolicy};
use super::hps::HpSample;
use super::records::{RunRecord, RunStatus, ValidationPoint};
use super::HarnessError;
use crate::diffcore::{adam_step, clip_global_norm, save_checkpoint, AdamState, ParamStore, GRAD_CLIP_NORM};
use crate::envs::{TaskSpec, VALIDATION_EPISODES};
use crate::experts::{record_demonstrations, Demonstration};
use crate::learners::losses::{GAE_LAMBDA, GAMMA};
use crate::learners::{clip_schedule, stage_scheduler, LossBatch, MethodId, NetSpec, Prepared};
use crate::rollout::{lane_groups, normalized_advantages, Collector, DemoSampler, EPOCHS, MINIBATCHES, NUM_LANES, SEGMENT_LEN};

/// Validation every 5% of the budget.
pub const VALIDATION_FRACTION: f64 = 0.05;
/// Demonstration transitions per imitation minibatch.
pub const DEMO_BATCH: usize = 1000;

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub validation_episodes: u64,
    /// Episodes recorded when a demo method has no `demos`.
    pub demo_episodes: usize,
    pub demos: Option<Demonstration>,
    pub checkpoint: Option<PathBuf>,
    /// Print each validation point to stderr.
    pub verbose: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            validation_episodes: VALIDATION_EPISODES,
            demo_episodes: super::config::DEFAULT_DEMO_EPISODES,
            demos: None,
            checkpoint: None,
            verbose: false,
        }
    }
}

pub struct TrainOutcome {
    pub record: RunRecord,
    pub params: ParamStore,
}

struct Optimizer {
    adam: AdamState,
    lr: f64,
}

impl Optimizer {
    /// One clipped Adam step on `batch`. `Ok(Some(reason))` flags a
    /// non-finite loss or gradient; parameters are left untouched then.
    fn step(&mut self, params: &mut ParamStore, batch: &LossBatch) -> Result<Option<String>, HarnessError> {
        let (rep, grads) = batch.report(params)?;
        if !rep.total.is_finite() {
            return Ok(Some(format!("non-finite loss {}", rep.total)));
        }
        if !grads.iter().all(|(_, g)| g.iter().all(|x| x.is_finite())) {
            return Ok(Some("non-finite gradient".into()));
        }
        params.set_grads(&grads)?;
        clip_global_norm(params, GRAD_CLIP_NORM);
        adam_step(params, &mut self.adam, self.lr)?;
        Ok(None)
    }
}

fn validate(
    spec: &NetSpec,
    params: &ParamStore,
    task: &TaskSpec,
    seed: u64,
    step: u64,
    episodes: u64,
) -> Result<ValidationPoint, HarnessError> {
    let m = evaluate_policy(&mut NetPolicy::new(spec, params)?, task, seed, episodes)?;
    Ok(ValidationPoint {
        step,
        reward: m.mean_reward,
        success: m.success_rate,
        ep_len: m.mean_length,
    })
}

/// Trains `method` with `hps` for `budget` environment steps (rounded up to
/// whole 2000-step updates). `seed` fixes the initialization, every random
/// stream, and the experiment constants of the task.
pub fn run_training(
    task: &TaskSpec,
    method: MethodId,
    hps: &HpSample,
    budget: u64,
    seed: u64,
    opts: &TrainOptions,
) -> Result<TrainOutcome, HarnessError> {
    assert_disjoint_seed_ranges(opts.validation_episodes);
    let started = Instant::now();
    let cfg = hps.config(method);
    cfg.validate()?;
    let spec = NetSpec::for_task(task)?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut params = spec.init_params(master.gen());
    let lane_seeds: Vec<u64> = (0..NUM_LANES).map(|_| master.gen()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(master.gen());
    let demo_seed: u64 = master.gen();

    let mut sampler = if method.uses_demos() {
        let recorded;
        let demo = match &opts.demos {
            Some(d) => d,
            None => {
                recorded = record_demonstrations(task, opts.demo_episodes, seed)?;
                &recorded
            }
        };
        if demo.task != task.id {
            return Err(HarnessError::Invalid(format!(
                "demonstrations are for `{}`, not `{}`",
                demo.task, task.id
            )));
        }
        Some(DemoSampler::new(demo, &spec, demo_seed)?)
    } else {
        None
    };
    // recurrent nets see contiguous windows; the linear net single transitions
    let window = if spec.is_recurrent() { SEGMENT_LEN } else { 1 };
    let windows = DEMO_BATCH / window;

    let mut collector = Collector::new(task, &spec, seed, &lane_seeds)?;
    let mut opt = Optimizer {
        adam: AdamState::new(&params),
        lr: cfg.lr,
    };
    let per_update = (NUM_LANES * SEGMENT_LEN) as u64;
    let cadence = ((budget as f64 * VALIDATION_FRACTION).ceil() as u64).max(1);
    let mut validation = Vec::new();
    let log = |p: &ValidationPoint| {
        if opts.verbose {
            eprintln!(
                "{} {} step {:>8}  reward {:+.4}  success {:.3}  len {:.2}",
                task.id, method, p.step, p.reward, p.success, p.ep_len
            );
        }
    };
    let mut next_eval = cadence;
    let mut t = 0u64;
    let mut failure = None;

    'train: while t < budget {
        let stage = stage_scheduler(method, t, budget, cfg.stage_split);
        let objectives = stage.objectives(&cfg, clip_schedule(t, budget))?;
        let rollout = match objectives.rollout {
            Some(obj) => {
                let net = Prepared::new(&spec, &params)?;
                let store = stage.needs_expert_on_rollouts() || obj.needs_expert();
                let buf = collector.collect(&net, SEGMENT_LEN, stage.teacher_forcing, store)?;
                let (adv, ret) = normalized_advantages(&buf, GAMMA, GAE_LAMBDA);
                Some((obj, buf, adv, ret))
            }
            None => None,
        };
        for _ in 0..EPOCHS {
            for group in lane_groups(NUM_LANES, MINIBATCHES, &mut shuffle_rng) {
                if let Some((obj, buf, adv, ret)) = &rollout {
                    let mb = buf.minibatch(&spec, &group, adv, ret, *obj);
                    if let Some(reason) = opt.step(&mut params, &mb)? {
                        failure = Some(reason);
                        break 'train;
                    }
                }
                if let (Some(obj), Some(s)) = (objectives.demo, sampler.as_mut()) {
                    let mb = s.sample(windows, window, obj);
                    if let Some(reason) = opt.step(&mut params, &mb)? {
                        failure = Some(reason);
                        break 'train;
                    }
                }
            }
        }
        t += per_update;
        if t >= next_eval || t >= budget {
            let p = validate(&spec, &params, task, seed, t, opts.validation_episodes)?;
            log(&p);
            validation.push(p);
            while next_eval <= t {
                next_eval += cadence;
            }
        }
    }

    // a zero budget, or a failure before the first point, still leaves one
    // point; a failed step never reaches the parameters
    if validation.is_empty() {
        let p = validate(&spec, &params, task, seed, t, opts.validation_episodes)?;
        log(&p);
        validation.push(p);
    }
    let status = match failure {
        Some(reason) => RunStatus::Failed {
            reason: format!("step {t}: {reason}"),
        },
        None => RunStatus::Completed,
    };
    let checkpoint = match (&opts.checkpoint, &status) {
        (Some(path), RunStatus::Completed) => {
            let meta = serde_json::json!({
                "task": task.id,
                "method": method.as_str(),
                "hps": hps,
                "seed": seed,
                "train_steps": t,
            });
            save_checkpoint(path, &params, &meta)?;
            Some(path.display().to_string())
        }
        _ => None,
    };
    Ok(TrainOutcome {
        record: RunRecord {
            task: task.id.clone(),
            method,
            hps: hps.clone(),
            seed,
            train_steps: t,
            validation,
            status,
            checkpoint,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
        params,
    })
}
