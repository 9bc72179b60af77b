//! BC, PPO, ADVISOR and static-mix objectives with exact gradients.
//!
//! Every objective is a per-row combination of four terms, averaged over the
//! rows of a batch:
//!
//! ```text
//! w_il * CE(expert, main) + w_rl * PPO + c_v * (V - R)^2 + [aux] CE(expert, aux)
//! ```
//!
//! `w_il` is fixed (BC, static mix) or the ADVISOR weight computed from
//! detached distributions; `w_rl = 1 - w_il` whenever the PPO term is on.

use serde::{Deserialize, Serialize};

use super::network::{Prepared, SeqBatch};
use super::LearnError;
use crate::diffcore::ops::{kl_divergence, PROB_FLOOR};
use crate::diffcore::{DiffError, Grads, LossProgram, ParamStore};
use crate::learners::network::NetSpec;
use crate::diffcore::lstm::LstmState;
use crate::diffcore::ActionMask;

pub const GAMMA: f64 = 0.99;
pub const GAE_LAMBDA: f64 = 1.0;
pub const PPO_CLIP: f64 = 0.1;
pub const VALUE_COEF: f64 = 0.5;
pub const ADVANTAGE_EPS: f64 = 1e-5;
pub const STATIC_MIX_WEIGHT: f64 = 0.5;

/// Clip range decayed linearly from `PPO_CLIP` to 0 over the run.
pub fn clip_schedule(step: u64, total: u64) -> f64 {
    if total == 0 {
        return PPO_CLIP;
    }
    PPO_CLIP * (1.0 - (step as f64 / total as f64).min(1.0))
}

/// Generalized advantage estimation over one lane. `dones[t]` marks that the
/// episode ended with the transition at `t`; `bootstrap` is the value of the
/// state after the last step. Returns `(advantages, returns)`.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap };
        let cont = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * cont - values[t];
        acc = delta + gamma * lambda * cont * acc;
        adv[t] = acc;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean and unit standard deviation.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let scale = 1.0 / (var.sqrt() + ADVANTAGE_EPS);
    adv.iter_mut().for_each(|a| *a = (*a - mean) * scale);
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvisorParams {
    pub alpha: f64,
    /// Cutoff on the divergence; `f64::INFINITY` disables it.
    pub beta: f64,
}

impl AdvisorParams {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            beta: f64::INFINITY,
        }
    }
}

/// `m(x) = exp(-alpha x) * 1[x <= beta]`.
pub fn weight_fn(x: f64, p: AdvisorParams) -> f64 {
    if x > p.beta {
        0.0
    } else {
        (-p.alpha * x).exp()
    }
}

/// ADVISOR weight from `KL(expert || aux)`.
pub fn advisor_weight(expert: &[f64], aux: &[f64], p: AdvisorParams) -> f64 {
    weight_fn(kl_divergence(expert, aux), p)
}

/// Cross-entropy of `target` against `exp(logp)` (floor-clamped) and its
/// gradient with respect to the logits of a masked softmax.
pub fn cross_entropy_logits(target: &[f64], logp: &[f64], d_logits: &mut [f64], scale: f64) -> f64 {
    let floor = PROB_FLOOR.ln();
    let mut loss = 0.0;
    let mut mass = 0.0;
    for (&t, &l) in target.iter().zip(logp) {
        if t > 0.0 {
            loss -= t * l.max(floor);
            if l > floor {
                mass += t;
            }
        }
    }
    for ((d, &t), &l) in d_logits.iter_mut().zip(target).zip(logp) {
        let c = if t > 0.0 && l > floor { t } else { 0.0 };
        *d += scale * (mass * l.exp() - c);
    }
    loss
}

/// Clipped surrogate `min(r A, clip(r, 1-eps, 1+eps) A)` and its derivative
/// with respect to the new log-probability.
pub fn ppo_surrogate(logp: f64, old_logp: f64, advantage: f64, clip: f64) -> (f64, f64) {
    let r = (logp - old_logp).exp();
    let unclipped = r * advantage;
    let clipped = r.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        (unclipped, unclipped)
    } else {
        (clipped, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ImitationWeight {
    Off,
    Constant(f64),
    Advisor(AdvisorParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub imitation: ImitationWeight,
    /// PPO clip range when the RL term is on.
    pub ppo_clip: Option<f64>,
    pub value_coef: f64,
    /// Imitation loss on the auxiliary actor.
    pub aux_imitation: bool,
}

impl Objective {
    pub fn bc() -> Self {
        Self {
            imitation: ImitationWeight::Constant(1.0),
            ppo_clip: None,
            value_coef: 0.0,
            aux_imitation: false,
        }
    }

    pub fn ppo(clip: f64) -> Self {
        Self {
            imitation: ImitationWeight::Off,
            ppo_clip: Some(clip),
            value_coef: VALUE_COEF,
            aux_imitation: false,
        }
    }

    pub fn advisor(p: AdvisorParams, clip: f64) -> Self {
        Self {
            imitation: ImitationWeight::Advisor(p),
            ppo_clip: Some(clip),
            value_coef: VALUE_COEF,
            aux_imitation: true,
        }
    }

    pub fn static_mix(weight: f64, clip: f64) -> Self {
        Self {
            imitation: ImitationWeight::Constant(weight),
            ppo_clip: Some(clip),
            value_coef: VALUE_COEF,
            aux_imitation: false,
        }
    }

    /// ADVISOR imitation on demonstrations: `w CE(expert, main) + CE(expert, aux)`.
    pub fn advisor_imitation(p: AdvisorParams) -> Self {
        Self {
            imitation: ImitationWeight::Advisor(p),
            ppo_clip: None,
            value_coef: 0.0,
            aux_imitation: true,
        }
    }

    /// Only the auxiliary actor's imitation term.
    pub fn aux_only() -> Self {
        Self {
            imitation: ImitationWeight::Off,
            ppo_clip: None,
            value_coef: 0.0,
            aux_imitation: true,
        }
    }

    pub fn needs_expert(&self) -> bool {
        self.aux_imitation || !matches!(self.imitation, ImitationWeight::Off)
    }
}

/// Per-row RL ingredients; advantages are already normalized.
#[derive(Clone, Copy)]
pub struct RlTargets<'a> {
    pub actions: &'a [u8],
    pub old_logp: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

#[derive(Clone, Copy, Default)]
pub struct Targets<'a> {
    /// Expert distributions, `rows x actions`.
    pub expert: Option<&'a [f64]>,
    pub rl: Option<RlTargets<'a>>,
    /// Imitation weights to use instead of recomputing them; lets finite
    /// differences see the weight as the constant it is for the gradient.
    pub frozen_weights: Option<&'a [f64]>,
}

/// Term-by-term means over the batch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub imitation: f64,
    pub policy: f64,
    pub value: f64,
    pub aux: f64,
    /// Imitation weight of every row.
    pub weights: Vec<f64>,
}

impl LossReport {
    pub fn mean_weight(&self) -> f64 {
        if self.weights.is_empty() {
            0.0
        } else {
            self.weights.iter().sum::<f64>() / self.weights.len() as f64
        }
    }
}

/// Loss and exact parameter gradients of `objective` on one batch.
pub fn evaluate_objective(
    net: &Prepared<'_>,
    batch: &SeqBatch<'_>,
    targets: &Targets<'_>,
    objective: &Objective,
) -> Result<(LossReport, Grads), LearnError> {
    let fwd = net.forward(batch)?;
    let rows = fwd.rows;
    let a = fwd.num_actions;
    if objective.needs_expert() && targets.expert.is_none() {
        return Err(LearnError::Config("objective needs expert labels".into()));
    }
    let needs_rl = objective.ppo_clip.is_some() || objective.value_coef > 0.0;
    if needs_rl && targets.rl.is_none() {
        return Err(LearnError::Config("objective needs rollout targets".into()));
    }
    let mut d_main = vec![0.0; rows * a];
    let mut d_aux = vec![0.0; rows * a];
    let mut d_value = vec![0.0; rows];
    let mut rep = LossReport {
        weights: vec![0.0; rows],
        ..Default::default()
    };
    let inv = 1.0 / rows.max(1) as f64;
    for r in 0..rows {
        let expert = targets.expert.map(|e| &e[r * a..(r + 1) * a]);
        let w_il = match (objective.imitation, targets.frozen_weights) {
            (ImitationWeight::Off, _) => 0.0,
            (ImitationWeight::Constant(c), _) => c,
            (ImitationWeight::Advisor(_), Some(w)) => w[r],
            (ImitationWeight::Advisor(p), None) => advisor_weight(expert.unwrap(), &fwd.aux_probs_row(r), p),
        };
        rep.weights[r] = w_il;
        if w_il != 0.0 {
            let ce = cross_entropy_logits(expert.unwrap(), fwd.main_logp_row(r), &mut d_main[r * a..(r + 1) * a], w_il * inv);
            rep.imitation += w_il * ce * inv;
        }
        if let (Some(clip), Some(rl)) = (objective.ppo_clip, targets.rl.as_ref()) {
            let w_rl = 1.0 - w_il;
            let act = rl.actions[r] as usize;
            let logp = fwd.main_logp_row(r);
            let (surr, d_surr) = ppo_surrogate(logp[act], rl.old_logp[r], rl.advantages[r], clip);
            rep.policy -= w_rl * surr * inv;
            // d(-surr)/d logits = -d_surr * (onehot(act) - p)
            let g = -w_rl * d_surr * inv;
            if g != 0.0 {
                for (k, d) in d_main[r * a..(r + 1) * a].iter_mut().enumerate() {
                    let ind = if k == act { 1.0 } else { 0.0 };
                    *d += g * (ind - logp[k].exp());
                }
            }
        }
        if objective.value_coef > 0.0 {
            let rl = targets.rl.as_ref().unwrap();
            let err = fwd.values[r] - rl.returns[r];
            rep.value += objective.value_coef * err * err * inv;
            d_value[r] = 2.0 * objective.value_coef * err * inv;
        }
        if objective.aux_imitation {
            let ce = cross_entropy_logits(expert.unwrap(), fwd.aux_logp_row(r), &mut d_aux[r * a..(r + 1) * a], inv);
            rep.aux += ce * inv;
        }
    }
    rep.total = rep.imitation + rep.policy + rep.value + rep.aux;
    let grads = net.backward(batch, &fwd, &d_main, &d_aux, &d_value);
    Ok((rep, grads))
}

/// An owned batch plus objective, usable wherever a [`LossProgram`] is expected.
#[derive(Clone, Debug)]
pub struct LossBatch {
    pub spec: NetSpec,
    pub lanes: usize,
    pub steps: usize,
    pub features: Vec<u32>,
    pub legal: Vec<ActionMask>,
    pub masks: Vec<f64>,
    pub init: Option<LstmState>,
    pub expert: Option<Vec<f64>>,
    pub actions: Vec<u8>,
    pub old_logp: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub objective: Objective,
    pub frozen_weights: Option<Vec<f64>>,
}

impl LossBatch {
    pub fn seq_batch(&self) -> SeqBatch<'_> {
        SeqBatch {
            lanes: self.lanes,
            steps: self.steps,
            features: &self.features,
            legal: &self.legal,
            masks: &self.masks,
            init: self.init.as_ref(),
        }
    }

    pub fn targets(&self) -> Targets<'_> {
        Targets {
            expert: self.expert.as_deref(),
            rl: if self.actions.is_empty() {
                None
            } else {
                Some(RlTargets {
                    actions: &self.actions,
                    old_logp: &self.old_logp,
                    advantages: &self.advantages,
                    returns: &self.returns,
                })
            },
            frozen_weights: self.frozen_weights.as_deref(),
        }
    }

    /// Pins the imitation weights to their values under `params`.
    pub fn freeze_weights(&mut self, params: &ParamStore) -> Result<(), LearnError> {
        self.frozen_weights = None;
        let (rep, _) = self.report(params)?;
        self.frozen_weights = Some(rep.weights);
        Ok(())
    }

    pub fn report(&self, params: &ParamStore) -> Result<(LossReport, Grads), LearnError> {
        let net = Prepared::new(&self.spec, params)?;
        evaluate_objective(&net, &self.seq_batch(), &self.targets(), &self.objective)
    }
}

impl LossProgram for LossBatch {
    fn name(&self) -> &str {
        "policy loss"
    }

    fn evaluate(&self, params: &ParamStore) -> Result<(f64, Grads), DiffError> {
        match self.report(params) {
            Ok((rep, g)) => Ok((rep.total, g)),
            Err(LearnError::Diff(e)) => Err(e),
            Err(e) => Err(DiffError::Invalid(e.to_string())),
        }
    }
}
