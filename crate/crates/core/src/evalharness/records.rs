//! Run records (JSON lines) and sweep reports.
//!
//! A record file holds a header line, one line per validation point, and a
//! closing line:
//!
//! ```text
//! {"kind":"header","schema":1,"task":"pd","method":"ADV","hps":{..},"seed":1,"train_steps":300000}
//! {"kind":"point","step":0,"reward":-0.6,"success":0.3,"ep_len":1.0}
//! {"kind":"end","status":{"state":"completed"},"checkpoint":null,"wall_clock_secs":41.2}
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::hps::HpSample;
use super::stats::{bootstrap_band, expected_max_ustat, DEFAULT_QUANTILES, DEFAULT_RESAMPLES};
use super::HarnessError;
use crate::learners::MethodId;

pub const RECORD_SCHEMA: u32 = 1;
pub const REPORT_SCHEMA: u32 = 1;
/// Largest hyperparameter budget plotted.
pub const MAX_BUDGET: usize = 45;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub step: u64,
    pub reward: f64,
    pub success: f64,
    pub ep_len: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed { reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub task: String,
    pub method: MethodId,
    pub hps: HpSample,
    pub seed: u64,
    pub train_steps: u64,
    pub validation: Vec<ValidationPoint>,
    pub status: RunStatus,
    pub checkpoint: Option<String>,
    pub wall_clock_secs: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header {
        schema: u32,
        task: String,
        method: MethodId,
        hps: HpSample,
        seed: u64,
        train_steps: u64,
    },
    Point(ValidationPoint),
    End {
        status: RunStatus,
        checkpoint: Option<String>,
        wall_clock_secs: f64,
    },
}

fn json_err(e: serde_json::Error) -> HarnessError {
    HarnessError::Record(e.to_string())
}

pub fn write_run_record<W: Write>(out: &mut W, rec: &RunRecord) -> Result<(), HarnessError> {
    let mut line = |l: &Line| -> Result<(), HarnessError> {
        serde_json::to_writer(&mut *out, l).map_err(json_err)?;
        out.write_all(b"\n")?;
        Ok(())
    };
    line(&Line::Header {
        schema: RECORD_SCHEMA,
        task: rec.task.clone(),
        method: rec.method,
        hps: rec.hps.clone(),
        seed: rec.seed,
        train_steps: rec.train_steps,
    })?;
    for p in &rec.validation {
        line(&Line::Point(p.clone()))?;
    }
    line(&Line::End {
        status: rec.status.clone(),
        checkpoint: rec.checkpoint.clone(),
        wall_clock_secs: rec.wall_clock_secs,
    })
}

pub fn read_run_record<R: BufRead>(input: R) -> Result<RunRecord, HarnessError> {
    let mut rec: Option<RunRecord> = None;
    let mut ended = false;
    for (no, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if ended {
            return Err(HarnessError::Record(format!("line {}: content after the end line", no + 1)));
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| HarnessError::Record(format!("line {}: {e}", no + 1)))?;
        match (parsed, rec.as_mut()) {
            (
                Line::Header {
                    schema,
                    task,
                    method,
                    hps,
                    seed,
                    train_steps,
                },
                None,
            ) => {
                if schema != RECORD_SCHEMA {
                    return Err(HarnessError::Record(format!("unsupported schema {schema}")));
                }
                rec = Some(RunRecord {
                    task,
                    method,
                    hps,
                    seed,
                    train_steps,
                    validation: Vec::new(),
                    status: RunStatus::Completed,
                    checkpoint: None,
                    wall_clock_secs: 0.0,
                });
            }
            (Line::Point(p), Some(r)) => r.validation.push(p),
            (
                Line::End {
                    status,
                    checkpoint,
                    wall_clock_secs,
                },
                Some(r),
            ) => {
                r.status = status;
                r.checkpoint = checkpoint;
                r.wall_clock_secs = wall_clock_secs;
                ended = true;
            }
            (Line::Header { .. }, Some(_)) => return Err(HarnessError::Record("duplicate header".into())),
            (_, None) => return Err(HarnessError::Record("missing header".into())),
        }
    }
    let rec = rec.ok_or_else(|| HarnessError::Record("empty record".into()))?;
    if !ended {
        return Err(HarnessError::Record("truncated record (no end line)".into()));
    }
    if rec.validation.is_empty() {
        return Err(HarnessError::Record("record has no validation points".into()));
    }
    Ok(rec)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Reward,
    Success,
}

impl std::str::FromStr for Metric {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "reward" => Ok(Metric::Reward),
            "success" => Ok(Metric::Success),
            _ => Err(HarnessError::Invalid(format!("unknown metric `{s}`; valid: reward, success"))),
        }
    }
}

/// Best validation value over the run's validation points.
pub fn best_validation(rec: &RunRecord, metric: Metric) -> f64 {
    rec.validation
        .iter()
        .map(|p| match metric {
            Metric::Reward => p.reward,
            Metric::Success => p.success,
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodCurve {
    pub method: MethodId,
    pub runs: usize,
    pub failed_runs: usize,
    /// Best validation value of every run, in file order.
    pub best_values: Vec<f64>,
    pub curve: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: u32,
    pub task: String,
    pub metric: Metric,
    pub resamples: usize,
    pub quantiles: (f64, f64),
    pub methods: Vec<MethodCurve>,
}

/// Folds the records of one task into expected-max curves per method for
/// `k = 1..=min(45, n)`. The reported band is the bootstrap quantile range,
/// widened to include the point estimate when a skewed bootstrap
/// distribution leaves it outside.
pub fn build_report(records: &[RunRecord], metric: Metric, seed: u64) -> Result<SweepReport, HarnessError> {
    let task = match records.first() {
        Some(r) => r.task.clone(),
        None => return Err(HarnessError::Invalid("no run records".into())),
    };
    let mut by_method: BTreeMap<MethodId, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        if r.task != task {
            return Err(HarnessError::Invalid(format!(
                "records mix tasks `{task}` and `{}`; report one task at a time",
                r.task
            )));
        }
        by_method.entry(r.method).or_default().push(r);
    }
    let mut methods = Vec::new();
    for (method, runs) in by_method {
        let best: Vec<f64> = runs.iter().map(|r| best_validation(r, metric)).collect();
        let mut curve = Vec::new();
        for k in 1..=best.len().min(MAX_BUDGET) {
            let value = expected_max_ustat(&best, k)?;
            let (lo, hi) = bootstrap_band(&best, k, DEFAULT_RESAMPLES, DEFAULT_QUANTILES, seed.wrapping_add(k as u64))?;
            curve.push(CurvePoint {
                k,
                value,
                lo: lo.min(value),
                hi: hi.max(value),
            });
        }
        methods.push(MethodCurve {
            method,
            runs: runs.len(),
            failed_runs: runs.iter().filter(|r| r.status != RunStatus::Completed).count(),
            best_values: best,
            curve,
        });
    }
    Ok(SweepReport {
        schema: REPORT_SCHEMA,
        task,
        metric,
        resamples: DEFAULT_RESAMPLES,
        quantiles: DEFAULT_QUANTILES,
        methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(method: MethodId, best: f64) -> RunRecord {
        RunRecord {
            task: "pd".into(),
            method,
            hps: HpSample {
                sample_seed: 4,
                lr: 3.1e-3,
                stage_split: None,
                alpha: Some(20.0),
            },
            seed: 9,
            train_steps: 4000,
            validation: vec![
                ValidationPoint {
                    step: 0,
                    reward: -0.1 / 3.0,
                    success: 0.25,
                    ep_len: 1.0,
                },
                ValidationPoint {
                    step: 4000,
                    reward: best,
                    success: 0.5,
                    ep_len: 11.0,
                },
            ],
            status: RunStatus::Completed,
            checkpoint: Some("runs/x.ckpt".into()),
            wall_clock_secs: 1.25,
        }
    }

    #[test]
    fn round_trip() {
        let mut rec = record(MethodId::Adv, 0.1 + 0.2);
        let mut buf = Vec::new();
        write_run_record(&mut buf, &rec).unwrap();
        assert_eq!(read_run_record(&buf[..]).unwrap(), rec);
        rec.status = RunStatus::Failed {
            reason: "non-finite loss".into(),
        };
        rec.checkpoint = None;
        buf.clear();
        write_run_record(&mut buf, &rec).unwrap();
        assert_eq!(read_run_record(&buf[..]).unwrap(), rec);
    }

    #[test]
    fn malformed_records_are_rejected() {
        let mut buf = Vec::new();
        write_run_record(&mut buf, &record(MethodId::Bc, 1.0)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let truncated = lines[..lines.len() - 1].join("\n");
        assert!(read_run_record(truncated.as_bytes()).is_err());
        let headless = lines[1..].join("\n");
        assert!(read_run_record(headless.as_bytes()).is_err());
        let no_points = format!("{}\n{}", lines[0], lines[lines.len() - 1]);
        assert!(read_run_record(no_points.as_bytes()).is_err());
        let future = text.replacen("\"schema\":1", "\"schema\":99", 1);
        assert!(read_run_record(future.as_bytes()).is_err());
    }

    #[test]
    fn report_groups_methods_and_keeps_bands_around_the_estimate() {
        let mut recs: Vec<RunRecord> = (0..7).map(|i| record(MethodId::Adv, f64::from(i) / 7.0)).collect();
        recs.extend((0..3).map(|i| record(MethodId::Ppo, f64::from(i))));
        let rep = build_report(&recs, Metric::Reward, 0).unwrap();
        assert_eq!(rep.methods.len(), 2);
        let adv = rep.methods.iter().find(|m| m.method == MethodId::Adv).unwrap();
        assert_eq!(adv.curve.len(), 7);
        assert_eq!(adv.curve[6].value, 6.0 / 7.0);
        for w in adv.curve.windows(2) {
            assert!(w[1].value >= w[0].value);
        }
        for c in &adv.curve {
            assert!(c.lo <= c.value && c.value <= c.hi);
        }
        let mut other = record(MethodId::Bc, 0.0);
        other.task = "lh2d".into();
        recs.push(other);
        assert!(build_report(&recs, Metric::Reward, 0).is_err());
        assert!(build_report(&[], Metric::Reward, 0).is_err());
    }
}
