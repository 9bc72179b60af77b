//! Expected maximum of k random draws from a sample of run scores.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HarnessError;

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_QUANTILES: (f64, f64) = (0.25, 0.75);

/// Unbiased estimate of E[max of k draws without replacement]:
/// sum over ascending order statistics x_(i) of C(i-1, k-1) / C(n, k) x_(i).
pub fn expected_max_ustat(values: &[f64], k: usize) -> Result<f64, HarnessError> {
    let n = values.len();
    if n == 0 || k == 0 || k > n {
        return Err(HarnessError::Invalid(format!("expected max needs 1 <= k <= n, got k={k}, n={n}")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(HarnessError::Invalid("NaN among the values".into()));
    }
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    if k == n {
        return Ok(xs[n - 1]);
    }
    // weight ratio C(i-1,k-1)/C(n,k), advanced from i=k upward
    let mut w = 1.0;
    for j in 0..k {
        w *= (k - j) as f64 / (n - j) as f64;
    }
    // the weights sum to one; anchoring at the minimum keeps constant samples exact
    let base = xs[0];
    let mut total = 0.0;
    for i in k..=n {
        total += w * (xs[i - 1] - base);
        if i < n {
            // C(i,k-1)/C(i-1,k-1) = i/(i-k+1)
            w *= i as f64 / (i + 1 - k) as f64;
        }
    }
    Ok(base + total)
}

/// Bootstrap quantiles of [`expected_max_ustat`]: `n_resamples` resamples of
/// size n with replacement.
pub fn bootstrap_band(
    values: &[f64],
    k: usize,
    n_resamples: usize,
    quantiles: (f64, f64),
    seed: u64,
) -> Result<(f64, f64), HarnessError> {
    expected_max_ustat(values, k)?;
    if n_resamples == 0 {
        return Err(HarnessError::Invalid("bootstrap needs at least one resample".into()));
    }
    let (ql, qh) = quantiles;
    if !(0.0..=1.0).contains(&ql) || !(0.0..=1.0).contains(&qh) || ql > qh {
        return Err(HarnessError::Invalid(format!("bad quantiles ({ql}, {qh})")));
    }
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(n_resamples);
    let mut buf = vec![0.0; n];
    for _ in 0..n_resamples {
        for slot in buf.iter_mut() {
            *slot = values[rng.gen_range(0..n)];
        }
        stats.push(expected_max_ustat(&buf, k)?);
    }
    stats.sort_by(f64::total_cmp);
    Ok((quantile(&stats, ql), quantile(&stats, qh)))
}

/// Lower empirical quantile: the smallest element with at least a fraction
/// `q` of the sample at or below it. Always an attained value.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let v = [3.0, 1.0, 2.0];
        assert!((expected_max_ustat(&v, 1).unwrap() - 2.0).abs() < 1e-15);
        assert!((expected_max_ustat(&v, 2).unwrap() - 8.0 / 3.0).abs() < 1e-15);
        assert_eq!(expected_max_ustat(&v, 3).unwrap(), 3.0);
        assert!(expected_max_ustat(&v, 4).is_err());
        assert!(expected_max_ustat(&[], 1).is_err());
        assert!(expected_max_ustat(&v, 0).is_err());
    }

    #[test]
    fn band_edges() {
        let same = [0.7; 6];
        assert_eq!(bootstrap_band(&same, 3, 200, DEFAULT_QUANTILES, 1).unwrap(), (0.7, 0.7));
        let v = [0.1, 0.5, -0.2, 0.9, 0.3];
        let a = bootstrap_band(&v, 2, 300, DEFAULT_QUANTILES, 4).unwrap();
        assert_eq!(a, bootstrap_band(&v, 2, 300, DEFAULT_QUANTILES, 4).unwrap());
        assert!(a.0 <= a.1);
        assert!(bootstrap_band(&v, 2, 0, DEFAULT_QUANTILES, 4).is_err());
        assert!(bootstrap_band(&v, 2, 10, (0.8, 0.2), 4).is_err());
    }

    #[test]
    fn quantile_picks_attained_values() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&s, 0.25), 1.0);
        assert_eq!(quantile(&s, 0.75), 3.0);
        assert_eq!(quantile(&s, 0.0), 1.0);
        assert_eq!(quantile(&s, 1.0), 4.0);
    }
}
