//! Minimal differentiable-compute core.
//!
//! Only the primitives the three policy networks need are provided: dense
//! linear maps, embedding tables, an LSTM cell, masked softmax, and the
//! probability losses. Every backward pass is derived by hand per layer and
//! checked against central finite differences in the tests.

pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod ops;
pub mod optim;
mod tensor;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use ops::{cross_entropy, kl_divergence, softmax, ActionMask, ALL_ACTIONS, PROB_FLOOR};
pub use optim::{adam_step, clip_global_norm, AdamState, GRAD_CLIP_NORM};
pub use tensor::{Grads, ParamStore, Tensor};

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("non-finite loss ({value}) in {context}")]
    NonFinite { context: String, value: f64 },
    #[error("unknown parameter `{0}`")]
    MissingParam(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A scalar loss over a parameter store with an exact gradient.
pub trait LossProgram {
    fn name(&self) -> &str {
        "loss"
    }

    /// Loss value plus the gradient for every parameter the loss touches.
    fn evaluate(&self, params: &ParamStore) -> Result<(f64, Grads), DiffError>;
}

/// Evaluates `program`, writes its gradients into `params` and returns the loss.
/// A NaN or infinite loss aborts with a diagnostic and leaves gradients untouched.
pub fn forward_backward<P: LossProgram + ?Sized>(program: &P, params: &mut ParamStore) -> Result<f64, DiffError> {
    let (loss, grads) = program.evaluate(params)?;
    if !loss.is_finite() {
        return Err(DiffError::NonFinite {
            context: program.name().to_string(),
            value: loss,
        });
    }
    if !grads.iter().all(|(_, g)| g.iter().all(|x| x.is_finite())) {
        return Err(DiffError::NonFinite {
            context: format!("{} gradient", program.name()),
            value: f64::NAN,
        });
    }
    params.set_grads(&grads)?;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::ops::{linear_backward, linear_forward, masked_log_softmax_into};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `sum(linear(x))`
    struct LinearSum {
        x: Vec<f64>,
        rows: usize,
        out: usize,
    }

    impl LossProgram for LinearSum {
        fn evaluate(&self, p: &ParamStore) -> Result<(f64, Grads), DiffError> {
            let (w, b) = (p.data("w"), p.data("b"));
            let y = linear_forward(&self.x, self.rows, w, b, self.out);
            let mut g = Grads::zeros_like(p);
            let dy = vec![1.0; y.len()];
            let mut dw = vec![0.0; w.len()];
            let mut db = vec![0.0; b.len()];
            linear_backward(&self.x, self.rows, w, self.out, &dy, &mut dw, &mut db);
            g.slot("w").copy_from_slice(&dw);
            g.slot("b").copy_from_slice(&db);
            Ok((y.iter().sum(), g))
        }
    }

    /// Mean cross-entropy of softmax(linear(x)) against soft targets.
    struct LinearSoftmaxCe {
        x: Vec<f64>,
        targets: Vec<f64>,
        rows: usize,
        out: usize,
    }

    impl LossProgram for LinearSoftmaxCe {
        fn evaluate(&self, p: &ParamStore) -> Result<(f64, Grads), DiffError> {
            let (w, b) = (p.data("w"), p.data("b"));
            let logits = linear_forward(&self.x, self.rows, w, b, self.out);
            let mut loss = 0.0;
            let mut dy = vec![0.0; logits.len()];
            let mut lp = vec![0.0; self.out];
            for r in 0..self.rows {
                let row = &logits[r * self.out..(r + 1) * self.out];
                masked_log_softmax_into(row, ALL_ACTIONS, &mut lp);
                let t = &self.targets[r * self.out..(r + 1) * self.out];
                for a in 0..self.out {
                    loss -= t[a] * lp[a] / self.rows as f64;
                    dy[r * self.out + a] = (lp[a].exp() - t[a]) / self.rows as f64;
                }
            }
            let mut g = Grads::zeros_like(p);
            let mut dw = vec![0.0; w.len()];
            let mut db = vec![0.0; b.len()];
            linear_backward(&self.x, self.rows, w, self.out, &dy, &mut dw, &mut db);
            g.slot("w").copy_from_slice(&dw);
            g.slot("b").copy_from_slice(&db);
            Ok((loss, g))
        }
    }

    fn linear_params(inp: usize, out: usize, rng: Option<&mut ChaCha8Rng>) -> ParamStore {
        let mut p = ParamStore::new();
        match rng {
            Some(r) => {
                p.insert("w", Tensor::uniform(&[out, inp], 0.5, r)).unwrap();
                p.insert("b", Tensor::uniform(&[out], 0.5, r)).unwrap();
            }
            None => {
                p.insert("w", Tensor::zeros(&[out, inp])).unwrap();
                p.insert("b", Tensor::zeros(&[out])).unwrap();
            }
        }
        p
    }

    #[test]
    fn zero_linear_sum_has_unit_bias_grad() {
        let mut p = linear_params(3, 2, None);
        let prog = LinearSum {
            x: vec![1.0, -2.0, 0.5, 4.0, 0.0, 1.0],
            rows: 2,
            out: 2,
        };
        let loss = forward_backward(&prog, &mut p).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(p.get("b").unwrap().grad().unwrap(), &[2.0, 2.0]);
    }

    #[test]
    fn linear_softmax_ce_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (rows, inp, out) = (5, 4, 3);
        let x: Vec<f64> = (0..rows * inp).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut targets = Vec::new();
        for _ in 0..rows {
            let raw: Vec<f64> = (0..out).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = raw.iter().sum();
            targets.extend(raw.iter().map(|v| v / s));
        }
        let prog = LinearSoftmaxCe { x, targets, rows, out };
        let mut p = linear_params(inp, out, Some(&mut rng));
        forward_backward(&prog, &mut p).unwrap();
        let analytic = p.flat_grads();
        let h = 1e-5;
        let names: Vec<String> = p.names().map(String::from).collect();
        let mut k = 0;
        for name in names {
            let len = p.get(&name).unwrap().len();
            for i in 0..len {
                let orig = p.get(&name).unwrap().data()[i];
                p.get_mut(&name).unwrap().data_mut()[i] = orig + h;
                let lp = prog.evaluate(&p).unwrap().0;
                p.get_mut(&name).unwrap().data_mut()[i] = orig - h;
                let lm = prog.evaluate(&p).unwrap().0;
                p.get_mut(&name).unwrap().data_mut()[i] = orig;
                let numeric = (lp - lm) / (2.0 * h);
                let denom = analytic[k].abs().max(numeric.abs()).max(1e-8);
                assert!((analytic[k] - numeric).abs() / denom < 1e-4);
                k += 1;
            }
        }
    }

    struct Broken;
    impl LossProgram for Broken {
        fn evaluate(&self, p: &ParamStore) -> Result<(f64, Grads), DiffError> {
            Ok((f64::NAN, Grads::zeros_like(p)))
        }
    }

    #[test]
    fn nan_loss_is_reported() {
        let mut p = linear_params(1, 1, None);
        assert!(matches!(
            forward_backward(&Broken, &mut p),
            Err(DiffError::NonFinite { .. })
        ));
    }
}
