//! Random hyperparameter search space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::learners::{MethodConfig, MethodId};

pub const LR_RANGE: (f64, f64) = (1e-4, 0.5);
pub const STAGE_SPLIT_RANGE: (f64, f64) = (0.1, 0.9);
pub const ALPHA_CHOICES: [f64; 2] = [5.0, 20.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HpSample {
    pub sample_seed: u64,
    pub lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_split: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl HpSample {
    pub fn config(&self, method: MethodId) -> MethodConfig {
        MethodConfig::new(method, self.lr, self.stage_split, self.alpha)
    }
}

/// Draws lr (log-uniform), then stage-split and alpha when `method` searches
/// them. Unsearched fields are left empty.
pub fn sample_hps(method: MethodId, seed: u64) -> HpSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (LR_RANGE.0.ln(), LR_RANGE.1.ln());
    // exp can round up onto the open upper end
    let lr = rng.gen_range(lo..hi).exp().clamp(LR_RANGE.0, f64::from_bits(LR_RANGE.1.to_bits() - 1));
    let stage_split = method
        .searches_stage_split()
        .then(|| rng.gen_range(STAGE_SPLIT_RANGE.0..STAGE_SPLIT_RANGE.1));
    let alpha = method
        .searches_alpha()
        .then(|| ALPHA_CHOICES[rng.gen_range(0..ALPHA_CHOICES.len())]);
    HpSample {
        sample_seed: seed,
        lr,
        stage_split,
        alpha,
    }
}
