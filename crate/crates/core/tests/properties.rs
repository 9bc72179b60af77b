use advisor_core::envs::VALIDATION_SEED_START;
use advisor_core::evalharness::{
    bootstrap_band, expected_max_ustat, read_run_record, sample_hps, write_run_record, HpSample, RunRecord,
    RunStatus, ValidationPoint,
};
use advisor_core::learners::{gae_advantages, normalize_advantages, weight_fn, AdvisorParams, MethodId};
use proptest::prelude::*;

/// Mean of max over every k-subset, by direct enumeration of index masks.
fn enumerate_expected_max(values: &[f64], k: usize) -> f64 {
    let n = values.len();
    let mut total = 0.0;
    let mut count = 0u32;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let m = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| values[i])
            .fold(f64::NEG_INFINITY, f64::max);
        total += m;
        count += 1;
    }
    total / f64::from(count)
}

fn any_method() -> impl Strategy<Value = MethodId> {
    (0..MethodId::ALL.len()).prop_map(|i| MethodId::ALL[i])
}

proptest! {
    #[test]
    fn ustat_matches_subset_enumeration(values in prop::collection::vec(-5.0f64..5.0, 1..=8)) {
        for k in 1..=values.len() {
            let u = expected_max_ustat(&values, k).unwrap();
            let e = enumerate_expected_max(&values, k);
            prop_assert!((u - e).abs() < 1e-12, "k={} {} vs {}", k, u, e);
        }
    }

    #[test]
    fn ustat_is_monotone_in_k(values in prop::collection::vec(-100.0f64..100.0, 1..40)) {
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=values.len() {
            let u = expected_max_ustat(&values, k).unwrap();
            prop_assert!(u >= prev - 1e-9);
            prev = u;
        }
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(expected_max_ustat(&values, values.len()).unwrap(), max);
    }

    #[test]
    fn bootstrap_band_is_ordered_and_within_the_sample(
        values in prop::collection::vec(-1.0f64..1.0, 1..12),
        kfrac in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let k = 1 + ((values.len() - 1) as f64 * kfrac) as usize;
        let (lo, hi) = bootstrap_band(&values, k, 60, (0.25, 0.75), seed).unwrap();
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= hi);
        prop_assert!(lo >= min - 1e-12 && hi <= max + 1e-12);
    }

    #[test]
    fn weight_function_shape(alpha in 0.0f64..50.0, beta in 0.0f64..5.0, a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let p = AdvisorParams { alpha, beta };
        prop_assert_eq!(weight_fn(0.0, p), 1.0);
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(weight_fn(x, p) >= weight_fn(y, p));
        if y > beta {
            prop_assert_eq!(weight_fn(y, p), 0.0);
        }
        let w = weight_fn(x, p);
        prop_assert!((0.0..=1.0).contains(&w));
    }

    #[test]
    fn gae_lambda_one_is_return_to_go_minus_value(
        steps in prop::collection::vec((-1.0f64..1.0, -2.0f64..2.0, prop::bool::weighted(0.15)), 1..60),
        bootstrap in -2.0f64..2.0,
        gamma in 0.5f64..1.0,
    ) {
        let rewards: Vec<f64> = steps.iter().map(|s| s.0).collect();
        let values: Vec<f64> = steps.iter().map(|s| s.1).collect();
        let dones: Vec<bool> = steps.iter().map(|s| s.2).collect();
        let (adv, ret) = gae_advantages(&rewards, &values, &dones, bootstrap, gamma, 1.0);
        for t in 0..rewards.len() {
            // forward sum until the episode ends or the segment runs out
            let mut g = 0.0;
            let mut disc = 1.0;
            let mut end = None;
            for u in t..rewards.len() {
                g += disc * rewards[u];
                disc *= gamma;
                if dones[u] {
                    end = Some(u);
                    break;
                }
            }
            if end.is_none() {
                g += disc * bootstrap;
            }
            prop_assert!((adv[t] - (g - values[t])).abs() < 1e-10);
            prop_assert!((ret[t] - g).abs() < 1e-10);
        }
    }

    #[test]
    fn normalized_advantages_are_standardized(mut adv in prop::collection::vec(-100.0f64..100.0, 2..200)) {
        let spread = adv.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - adv.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        normalize_advantages(&mut adv);
        let n = adv.len() as f64;
        let mean = adv.iter().sum::<f64>() / n;
        let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((var.sqrt() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn hp_samples_stay_in_range(m in any_method(), seed in any::<u64>()) {
        let s = sample_hps(m, seed);
        prop_assert!(s.lr >= 1e-4 && s.lr < 0.5);
        prop_assert_eq!(s.stage_split.is_some(), m.searches_stage_split());
        prop_assert_eq!(s.alpha.is_some(), m.searches_alpha());
        if let Some(x) = s.stage_split {
            prop_assert!((0.1..0.9).contains(&x));
        }
        if let Some(a) = s.alpha {
            prop_assert!(a == 5.0 || a == 20.0);
        }
        prop_assert!(s.config(m).validate().is_ok());
    }

    #[test]
    fn run_records_round_trip(
        m in any_method(),
        lr in 1e-4f64..0.5,
        points in prop::collection::vec((any::<u32>(), -20.0f64..2.0, 0.0f64..1.0, 1.0f64..1000.0), 1..30),
        failed in any::<bool>(),
        secs in 0.0f64..1e5,
    ) {
        let rec = RunRecord {
            task: "lc-once-switch-s9".into(),
            method: m,
            hps: HpSample { sample_seed: 17, lr, stage_split: m.searches_stage_split().then_some(0.3), alpha: m.searches_alpha().then_some(5.0) },
            seed: 17,
            train_steps: 123_456,
            validation: points
                .iter()
                .map(|&(step, reward, success, ep_len)| ValidationPoint { step: u64::from(step), reward, success, ep_len })
                .collect(),
            status: if failed { RunStatus::Failed { reason: "non-finite loss NaN".into() } } else { RunStatus::Completed },
            checkpoint: (!failed).then(|| "runs/x.ckpt".to_string()),
            wall_clock_secs: secs,
        };
        let mut buf = Vec::new();
        write_run_record(&mut buf, &rec).unwrap();
        prop_assert_eq!(read_run_record(&buf[..]).unwrap(), rec);
    }
}

#[test]
fn validation_seeds_sit_above_training_seeds() {
    assert_eq!(VALIDATION_SEED_START, 1_000_000);
    advisor_core::evalharness::assert_disjoint_seed_ranges(200);
}
