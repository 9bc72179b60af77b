//! Probability-vector primitives shared by every loss.

/// Probabilities are clamped to at least this value before taking a log.
pub const PROB_FLOOR: f64 = 1e-8;

/// Bit `a` set means action `a` may be taken. At most eight actions.
pub type ActionMask = u8;

pub const ALL_ACTIONS: ActionMask = u8::MAX;

#[inline]
pub fn is_legal(mask: ActionMask, action: usize) -> bool {
    action < 8 && (mask >> action) & 1 == 1
}

/// Mask with the first `n` actions legal.
pub fn first_n(n: usize) -> ActionMask {
    debug_assert!(n <= 8);
    if n >= 8 {
        u8::MAX
    } else {
        ((1u16 << n) - 1) as u8
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    masked_softmax_into(logits, ALL_ACTIONS, &mut out);
    out
}

/// Softmax restricted to the legal actions; illegal entries are exactly zero.
pub fn masked_softmax_into(logits: &[f64], mask: ActionMask, out: &mut [f64]) {
    let max = logits
        .iter()
        .enumerate()
        .filter(|&(a, _)| is_legal(mask, a))
        .map(|(_, &l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (a, (o, &l)) in out.iter_mut().zip(logits).enumerate() {
        *o = if is_legal(mask, a) {
            let e = (l - max).exp();
            total += e;
            e
        } else {
            0.0
        };
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// Log-softmax over the legal actions; illegal entries are `-inf`.
pub fn masked_log_softmax_into(logits: &[f64], mask: ActionMask, out: &mut [f64]) {
    let max = logits
        .iter()
        .enumerate()
        .filter(|&(a, _)| is_legal(mask, a))
        .map(|(_, &l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(a, _)| is_legal(mask, a))
        .map(|(_, &l)| (l - max).exp())
        .sum();
    let log_z = max + total.ln();
    for (a, (o, &l)) in out.iter_mut().zip(logits).enumerate() {
        *o = if is_legal(mask, a) {
            l - log_z
        } else {
            f64::NEG_INFINITY
        };
    }
}

/// `-sum_a target(a) * log(max(predicted(a), PROB_FLOOR))`.
pub fn cross_entropy(target: &[f64], predicted: &[f64]) -> f64 {
    debug_assert_eq!(target.len(), predicted.len());
    target
        .iter()
        .zip(predicted)
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &p)| -t * p.max(PROB_FLOOR).ln())
        .sum()
}

/// `sum_a p(a) * log(p(a) / q(a))` with `q` floor-clamped; `p(a) = 0` terms vanish.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let kl: f64 = p
        .iter()
        .zip(q)
        .filter(|(&pa, _)| pa > 0.0)
        .map(|(&pa, &qa)| pa * (pa.ln() - qa.max(PROB_FLOOR).ln()))
        .sum();
    // clamping can push tiny mismatches a hair below zero
    kl.max(0.0)
}

pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Index of the largest legal entry; ties go to the lowest index.
pub fn argmax_legal(values: &[f64], mask: ActionMask) -> usize {
    let mut best = usize::MAX;
    let mut best_v = f64::NEG_INFINITY;
    for (a, &v) in values.iter().enumerate() {
        if is_legal(mask, a) && (best == usize::MAX || v > best_v) {
            best = a;
            best_v = v;
        }
    }
    best
}

/// Inverse-CDF draw from `probs` given `u` in `[0, 1)`. Zero-probability
/// entries are never returned.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (a, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = a;
        if u < acc {
            return a;
        }
    }
    last
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// `y[n x out] = x[n x in] * w^T + b` with `w` stored `out x in`.
pub fn linear_forward(x: &[f64], n: usize, w: &[f64], b: &[f64], out_dim: usize) -> Vec<f64> {
    let in_dim = w.len() / out_dim;
    let mut y = vec![0.0; n * out_dim];
    for r in 0..n {
        let xr = &x[r * in_dim..(r + 1) * in_dim];
        for o in 0..out_dim {
            y[r * out_dim + o] = b[o] + dot(&w[o * in_dim..(o + 1) * in_dim], xr);
        }
    }
    y
}

/// Accumulates `dw += dy^T x`, `db += sum dy`, and returns `dx = dy w`.
#[allow(clippy::too_many_arguments)]
pub fn linear_backward(
    x: &[f64],
    n: usize,
    w: &[f64],
    out_dim: usize,
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let in_dim = w.len() / out_dim;
    let mut dx = vec![0.0; n * in_dim];
    for r in 0..n {
        let xr = &x[r * in_dim..(r + 1) * in_dim];
        let dxr = &mut dx[r * in_dim..(r + 1) * in_dim];
        for o in 0..out_dim {
            let g = dy[r * out_dim + o];
            if g == 0.0 {
                continue;
            }
            db[o] += g;
            axpy(g, xr, &mut dw[o * in_dim..(o + 1) * in_dim]);
            axpy(g, &w[o * in_dim..(o + 1) * in_dim], dxr);
        }
    }
    dx
}
