//! Central finite-difference check of a [`LossProgram`]'s analytic gradient.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DiffError, LossProgram, ParamStore};

/// Step used for the central differences.
pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely.
pub const FD_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_error: f64,
    /// `name[index]` of the worst coordinate.
    pub worst: String,
}

/// `|a - n| / max(|a|, |n|, FD_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Compares analytic and numeric partials on a subset of coordinates: in
/// every tensor, the `per_tensor` coordinates with the largest analytic
/// gradient plus `per_tensor` uniformly drawn ones (every coordinate when the
/// tensor is small).
pub fn gradient_check<P: LossProgram + ?Sized>(
    program: &P,
    params: &ParamStore,
    per_tensor: usize,
    seed: u64,
) -> Result<GradCheck, DiffError> {
    let (_, grads) = program.evaluate(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = params.clone();
    let mut out = GradCheck {
        checked: 0,
        max_rel_error: 0.0,
        worst: String::new(),
    };
    let names: Vec<String> = params.names().map(String::from).collect();
    for name in names {
        let len = params.get(&name)?.len();
        let analytic = grads.get(&name).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; len]);
        let coords: Vec<usize> = if len <= 2 * per_tensor {
            (0..len).collect()
        } else {
            let mut order: Vec<usize> = (0..len).collect();
            order.sort_by(|&a, &b| analytic[b].abs().total_cmp(&analytic[a].abs()));
            let mut c: Vec<usize> = order[..per_tensor].to_vec();
            c.extend(sample(&mut rng, len, per_tensor).into_iter());
            c.sort_unstable();
            c.dedup();
            c
        };
        for i in coords {
            let orig = work.get(&name)?.data()[i];
            work.get_mut(&name)?.data_mut()[i] = orig + FD_STEP;
            let lp = program.evaluate(&work)?.0;
            work.get_mut(&name)?.data_mut()[i] = orig - FD_STEP;
            let lm = program.evaluate(&work)?.0;
            work.get_mut(&name)?.data_mut()[i] = orig;
            let numeric = (lp - lm) / (2.0 * FD_STEP);
            let err = relative_error(analytic[i], numeric);
            out.checked += 1;
            if out.worst.is_empty() || err > out.max_rel_error {
                out.max_rel_error = err;
                out.worst = format!("{name}[{i}] analytic {:e} numeric {:e}", analytic[i], numeric);
            }
        }
    }
    Ok(out)
}
