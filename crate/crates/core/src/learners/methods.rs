//! The fourteen training methods and their stage schedules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::losses::{AdvisorParams, Objective, STATIC_MIX_WEIGHT};
use super::LearnError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodId {
    Bc,
    Dagger,
    BcTf1,
    Ppo,
    BcThenPpo,
    DaggerThenPpo,
    BcTf1ThenPpo,
    BcPpoStatic,
    BcDemo,
    BcDemoPpo,
    Adv,
    DaggerThenAdv,
    BcTf1ThenAdv,
    AdvDemoPpo,
}

impl MethodId {
    pub const ALL: [MethodId; 14] = [
        MethodId::Bc,
        MethodId::Dagger,
        MethodId::BcTf1,
        MethodId::Ppo,
        MethodId::BcThenPpo,
        MethodId::DaggerThenPpo,
        MethodId::BcTf1ThenPpo,
        MethodId::BcPpoStatic,
        MethodId::BcDemo,
        MethodId::BcDemoPpo,
        MethodId::Adv,
        MethodId::DaggerThenAdv,
        MethodId::BcTf1ThenAdv,
        MethodId::AdvDemoPpo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Bc => "BC",
            MethodId::Dagger => "DAgger",
            MethodId::BcTf1 => "BCtf1",
            MethodId::Ppo => "PPO",
            MethodId::BcThenPpo => "BC→PPO",
            MethodId::DaggerThenPpo => "DAgger→PPO",
            MethodId::BcTf1ThenPpo => "BCtf1→PPO",
            MethodId::BcPpoStatic => "BC+PPO-static",
            MethodId::BcDemo => "BCdemo",
            MethodId::BcDemoPpo => "BCdemo+PPO",
            MethodId::Adv => "ADV",
            MethodId::DaggerThenAdv => "DAgger→ADV",
            MethodId::BcTf1ThenAdv => "BCtf1→ADV",
            MethodId::AdvDemoPpo => "ADVdemo+PPO",
        }
    }

    /// Comma-separated list of every id, for error messages.
    pub fn valid_ids() -> String {
        Self::ALL.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", ")
    }

    pub fn searches_stage_split(self) -> bool {
        matches!(
            self,
            MethodId::Dagger
                | MethodId::BcThenPpo
                | MethodId::DaggerThenPpo
                | MethodId::BcTf1ThenPpo
                | MethodId::DaggerThenAdv
                | MethodId::BcTf1ThenAdv
        )
    }

    pub fn searches_alpha(self) -> bool {
        matches!(
            self,
            MethodId::Adv | MethodId::DaggerThenAdv | MethodId::BcTf1ThenAdv | MethodId::AdvDemoPpo
        )
    }

    pub fn uses_demos(self) -> bool {
        matches!(self, MethodId::BcDemo | MethodId::BcDemoPpo | MethodId::AdvDemoPpo)
    }

    /// Whether the expert policy is queried during rollouts.
    pub fn queries_expert(self) -> bool {
        !matches!(self, MethodId::Ppo) && !self.uses_demos()
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn canonical(s: &str) -> String {
    s.trim()
        .replace('→', "->")
        .replace(['_', ' '], "")
        .to_ascii_lowercase()
}

impl FromStr for MethodId {
    type Err = LearnError;

    /// Case-insensitive; `->` and `→` are interchangeable.
    fn from_str(s: &str) -> Result<Self, LearnError> {
        let want = canonical(s);
        let alias = match want.as_str() {
            "bc+ppo" | "bc+ppo(static)" => Some(MethodId::BcPpoStatic),
            "bcdemo+adv" => Some(MethodId::AdvDemoPpo),
            _ => None,
        };
        alias
            .or_else(|| Self::ALL.into_iter().find(|m| canonical(m.as_str()) == want))
            .ok_or_else(|| LearnError::UnknownMethod {
                id: s.to_string(),
                valid: Self::valid_ids(),
            })
    }
}

impl Serialize for MethodId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MethodId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A method with its hyperparameters. Only the fields the method searches
/// (plus `beta` and the static mix weight) are set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: MethodId,
    pub lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_split: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// ADVISOR cutoff; absent means no cutoff.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_mix_weight: Option<f64>,
}

impl MethodConfig {
    /// Config with the default static mix weight and the given searched values.
    pub fn new(method: MethodId, lr: f64, stage_split: Option<f64>, alpha: Option<f64>) -> Self {
        Self {
            method,
            lr,
            stage_split,
            alpha,
            beta: None,
            static_mix_weight: (method == MethodId::BcPpoStatic).then_some(STATIC_MIX_WEIGHT),
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let m = self.method;
        let err = |msg: String| Err(LearnError::Config(format!("{m}: {msg}")));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return err(format!("lr must be positive, got {}", self.lr));
        }
        match (m.searches_stage_split(), self.stage_split) {
            (true, None) => return err("stage_split is required".into()),
            (false, Some(_)) => return err("stage_split does not apply".into()),
            (true, Some(s)) if !(0.0..=1.0).contains(&s) => return err(format!("stage_split {s} outside [0, 1]")),
            _ => {}
        }
        match (m.searches_alpha(), self.alpha) {
            (true, None) => return err("alpha is required".into()),
            (false, Some(_)) => return err("alpha does not apply".into()),
            (true, Some(a)) if !(a >= 0.0) => return err(format!("alpha {a} must be non-negative")),
            _ => {}
        }
        if let Some(b) = self.beta {
            if !m.searches_alpha() {
                return err("beta does not apply".into());
            }
            if !(b > 0.0) {
                return err(format!("beta {b} must be positive"));
            }
        }
        match (m == MethodId::BcPpoStatic, self.static_mix_weight) {
            (true, None) => return err("static_mix_weight is required".into()),
            (false, Some(_)) => return err("static_mix_weight does not apply".into()),
            (true, Some(w)) if !(0.0..=1.0).contains(&w) => return err(format!("static_mix_weight {w} outside [0, 1]")),
            _ => {}
        }
        Ok(())
    }

    pub fn advisor_params(&self) -> Option<AdvisorParams> {
        self.alpha.map(|alpha| AdvisorParams {
            alpha,
            beta: self.beta.unwrap_or(f64::INFINITY),
        })
    }
}

/// The loss active at a point of training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageLoss {
    Bc,
    Ppo,
    Advisor,
    StaticMix,
    BcDemo,
    BcDemoPpo,
    AdvDemoPpo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub loss: StageLoss,
    /// Probability that a rollout step executes the expert's action.
    pub teacher_forcing: f64,
}

/// Objectives for the rollout batch and the demonstration batch of one update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageObjectives {
    pub rollout: Option<Objective>,
    pub demo: Option<Objective>,
}

impl Stage {
    pub fn objectives(&self, cfg: &MethodConfig, clip: f64) -> Result<StageObjectives, LearnError> {
        let adv = || {
            cfg.advisor_params()
                .ok_or_else(|| LearnError::Config(format!("{}: ADVISOR stage without alpha", cfg.method)))
        };
        let (rollout, demo) = match self.loss {
            StageLoss::Bc => (Some(Objective::bc()), None),
            StageLoss::Ppo => (Some(Objective::ppo(clip)), None),
            StageLoss::Advisor => (Some(Objective::advisor(adv()?, clip)), None),
            StageLoss::StaticMix => {
                let w = cfg.static_mix_weight.unwrap_or(STATIC_MIX_WEIGHT);
                (Some(Objective::static_mix(w, clip)), None)
            }
            StageLoss::BcDemo => (None, Some(Objective::bc())),
            StageLoss::BcDemoPpo => (Some(Objective::ppo(clip)), Some(Objective::bc())),
            StageLoss::AdvDemoPpo => (Some(Objective::ppo(clip)), Some(Objective::advisor_imitation(adv()?))),
        };
        Ok(StageObjectives { rollout, demo })
    }

    /// Whether rollouts must carry expert distributions.
    pub fn needs_expert_on_rollouts(&self) -> bool {
        matches!(self.loss, StageLoss::Bc | StageLoss::Advisor | StageLoss::StaticMix) || self.teacher_forcing > 0.0
    }
}

/// Stage active at step `t` of `total`. Sequential methods switch at
/// `stage_split * total`; DAgger anneals teacher forcing from 1 to 0 over
/// its stage.
pub fn stage_scheduler(method: MethodId, t: u64, total: u64, stage_split: Option<f64>) -> Stage {
    let frac = if total == 0 { 0.0 } else { t as f64 / total as f64 };
    let split = stage_split.unwrap_or(0.0);
    let first = frac < split;
    let dagger_tf = if split > 0.0 { (1.0 - frac / split).max(0.0) } else { 0.0 };
    let st = |loss, teacher_forcing| Stage { loss, teacher_forcing };
    match method {
        MethodId::Bc => st(StageLoss::Bc, 0.0),
        MethodId::BcTf1 => st(StageLoss::Bc, 1.0),
        MethodId::Dagger => st(StageLoss::Bc, dagger_tf),
        MethodId::Ppo => st(StageLoss::Ppo, 0.0),
        MethodId::BcPpoStatic => st(StageLoss::StaticMix, 0.0),
        MethodId::BcDemo => st(StageLoss::BcDemo, 0.0),
        MethodId::BcDemoPpo => st(StageLoss::BcDemoPpo, 0.0),
        MethodId::Adv => st(StageLoss::Advisor, 0.0),
        MethodId::AdvDemoPpo => st(StageLoss::AdvDemoPpo, 0.0),
        MethodId::BcThenPpo if first => st(StageLoss::Bc, 0.0),
        MethodId::DaggerThenPpo | MethodId::DaggerThenAdv if first => st(StageLoss::Bc, dagger_tf),
        MethodId::BcTf1ThenPpo | MethodId::BcTf1ThenAdv if first => st(StageLoss::Bc, 1.0),
        MethodId::BcThenPpo | MethodId::DaggerThenPpo | MethodId::BcTf1ThenPpo => st(StageLoss::Ppo, 0.0),
        MethodId::DaggerThenAdv | MethodId::BcTf1ThenAdv => st(StageLoss::Advisor, 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip_and_parse_loosely() {
        for m in MethodId::ALL {
            assert_eq!(m.as_str().parse::<MethodId>().unwrap(), m);
        }
        assert_eq!("adv".parse::<MethodId>().unwrap(), MethodId::Adv);
        assert_eq!("dagger->adv".parse::<MethodId>().unwrap(), MethodId::DaggerThenAdv);
        assert_eq!("BCtf1→PPO".parse::<MethodId>().unwrap(), MethodId::BcTf1ThenPpo);
        assert_eq!("bc+ppo".parse::<MethodId>().unwrap(), MethodId::BcPpoStatic);
        let e = "a2c".parse::<MethodId>().unwrap_err().to_string();
        assert!(e.contains("ADVdemo+PPO") && e.contains("a2c"));
    }

    #[test]
    fn searched_fields_follow_the_table() {
        let searched: Vec<(bool, bool)> = MethodId::ALL
            .iter()
            .map(|m| (m.searches_stage_split(), m.searches_alpha()))
            .collect();
        let (f, t) = (false, true);
        assert_eq!(
            searched,
            vec![(f, f), (t, f), (f, f), (f, f), (t, f), (t, f), (t, f), (f, f), (f, f), (f, f), (f, t), (t, t), (t, t), (f, t)]
        );
    }

    #[test]
    fn validation_rejects_missing_and_extra_fields() {
        assert!(MethodConfig::new(MethodId::Ppo, 1e-3, None, None).validate().is_ok());
        assert!(MethodConfig::new(MethodId::Ppo, 1e-3, Some(0.5), None).validate().is_err());
        assert!(MethodConfig::new(MethodId::DaggerThenAdv, 1e-3, Some(0.5), None).validate().is_err());
        assert!(MethodConfig::new(MethodId::DaggerThenAdv, 1e-3, Some(0.5), Some(5.0)).validate().is_ok());
        assert!(MethodConfig::new(MethodId::BcPpoStatic, 1e-3, None, None).validate().is_ok());
        assert!(MethodConfig::new(MethodId::Bc, 0.0, None, None).validate().is_err());
    }

    #[test]
    fn dagger_anneals_linearly_over_its_stage() {
        let s = stage_scheduler(MethodId::DaggerThenPpo, 20, 100, Some(0.4));
        assert_eq!(s.loss, StageLoss::Bc);
        assert!((s.teacher_forcing - 0.5).abs() < 1e-12);
        let s = stage_scheduler(MethodId::Dagger, 0, 100, Some(0.4));
        assert_eq!(s.teacher_forcing, 1.0);
        // pure DAgger keeps imitating with tf 0 after the anneal
        let s = stage_scheduler(MethodId::Dagger, 70, 100, Some(0.4));
        assert_eq!((s.loss, s.teacher_forcing), (StageLoss::Bc, 0.0));
    }

    #[test]
    fn sequential_methods_switch_at_the_split() {
        let s = stage_scheduler(MethodId::BcTf1ThenPpo, 31, 100, Some(0.3));
        assert_eq!((s.loss, s.teacher_forcing), (StageLoss::Ppo, 0.0));
        let s = stage_scheduler(MethodId::BcTf1ThenPpo, 29, 100, Some(0.3));
        assert_eq!((s.loss, s.teacher_forcing), (StageLoss::Bc, 1.0));
        let s = stage_scheduler(MethodId::BcTf1ThenAdv, 90, 100, Some(0.3));
        assert_eq!((s.loss, s.teacher_forcing), (StageLoss::Advisor, 0.0));
    }

    #[test]
    fn plain_bc_never_forces() {
        for t in [0, 10, 99, 100] {
            assert_eq!(stage_scheduler(MethodId::Bc, t, 100, None).teacher_forcing, 0.0);
            assert_eq!(stage_scheduler(MethodId::BcTf1, t, 100, None).teacher_forcing, 1.0);
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = MethodConfig::new(MethodId::BcTf1ThenAdv, 0.01, Some(0.2), Some(20.0));
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("BCtf1→ADV"));
        assert_eq!(serde_json::from_str::<MethodConfig>(&s).unwrap(), c);
    }
}
