//! Single-layer LSTM (input, forget, cell, output gates; no peepholes).
//!
//! Gate pre-activations are laid out `[i | f | g | o]`, each `hidden` wide.
//! Callers supply the input contribution `W_ih x_t` already projected, so the
//! same kernels serve the embedding-table encoders and dense inputs alike.
//! Episode boundaries are handled with a continuation mask: a lane whose mask
//! is zero at step `t` starts that step from a zero state.

use super::ops::sigmoid;

/// `c[m x n] = beta * c + a[m x k] * b[n x k]^T`.
pub fn gemm_a_bt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c[m x n] = beta * c + a[m x k] * b[k x n]`.
pub fn gemm_a_b(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c[m x n] = beta * c + a[k x m]^T * b[k x n]`.
pub fn gemm_at_b(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Recurrent state for a batch of lanes: `h` and `c`, each `lanes x hidden`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub hidden: usize,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(lanes: usize, hidden: usize) -> Self {
        Self {
            hidden,
            h: vec![0.0; lanes * hidden],
            c: vec![0.0; lanes * hidden],
        }
    }

    pub fn lanes(&self) -> usize {
        if self.hidden == 0 {
            0
        } else {
            self.h.len() / self.hidden
        }
    }

    pub fn reset_lane(&mut self, lane: usize) {
        let h = self.hidden;
        self.h[lane * h..(lane + 1) * h].iter_mut().for_each(|x| *x = 0.0);
        self.c[lane * h..(lane + 1) * h].iter_mut().for_each(|x| *x = 0.0);
    }

    pub fn lane(&self, lane: usize) -> (&[f64], &[f64]) {
        let h = self.hidden;
        (&self.h[lane * h..(lane + 1) * h], &self.c[lane * h..(lane + 1) * h])
    }

    pub fn gather(&self, lanes: &[usize]) -> Self {
        let h = self.hidden;
        let mut out = Self::zeros(lanes.len(), h);
        for (dst, &src) in lanes.iter().enumerate() {
            out.h[dst * h..(dst + 1) * h].copy_from_slice(&self.h[src * h..(src + 1) * h]);
            out.c[dst * h..(dst + 1) * h].copy_from_slice(&self.c[src * h..(src + 1) * h]);
        }
        out
    }
}

/// Borrowed LSTM weights: `w_hh` is `4H x H`, `bias` is `4H`.
#[derive(Clone, Copy)]
pub struct LstmWeights<'a> {
    pub w_hh: &'a [f64],
    pub bias: &'a [f64],
    pub hidden: usize,
}

/// Applies the gate nonlinearities for `lanes` rows of pre-activations and
/// writes the new cell and hidden values. `pre` is overwritten with the
/// activated gates.
fn cell_update(
    hidden: usize,
    lanes: usize,
    pre: &mut [f64],
    prev_c: &[f64],
    c_out: &mut [f64],
    tanh_c_out: &mut [f64],
    h_out: &mut [f64],
) {
    let g4 = 4 * hidden;
    for b in 0..lanes {
        let row = &mut pre[b * g4..(b + 1) * g4];
        for j in 0..hidden {
            let i = sigmoid(row[j]);
            let f = sigmoid(row[hidden + j]);
            let g = row[2 * hidden + j].tanh();
            let o = sigmoid(row[3 * hidden + j]);
            row[j] = i;
            row[hidden + j] = f;
            row[2 * hidden + j] = g;
            row[3 * hidden + j] = o;
            let c = f * prev_c[b * hidden + j] + i * g;
            let tc = c.tanh();
            c_out[b * hidden + j] = c;
            tanh_c_out[b * hidden + j] = tc;
            h_out[b * hidden + j] = o * tc;
        }
    }
}

/// Gate pre-activations `input_proj + bias + h_prev W_hh^T`.
fn gate_preactivations(w: LstmWeights<'_>, lanes: usize, input_proj: &[f64], prev_h: &[f64]) -> Vec<f64> {
    let g4 = 4 * w.hidden;
    let mut pre = vec![0.0; lanes * g4];
    for b in 0..lanes {
        let row = &mut pre[b * g4..(b + 1) * g4];
        let inp = &input_proj[b * g4..(b + 1) * g4];
        for ((p, &x), &bias) in row.iter_mut().zip(inp).zip(w.bias) {
            *p = x + bias;
        }
    }
    gemm_a_bt(lanes, w.hidden, g4, prev_h, w.w_hh, 1.0, &mut pre);
    pre
}

/// Advances every lane of `state` by one step in place.
pub fn step(w: LstmWeights<'_>, input_proj: &[f64], state: &mut LstmState) {
    let lanes = state.lanes();
    let hidden = w.hidden;
    let mut pre = gate_preactivations(w, lanes, input_proj, &state.h);
    let mut c = vec![0.0; lanes * hidden];
    let mut tc = vec![0.0; lanes * hidden];
    let mut h = vec![0.0; lanes * hidden];
    cell_update(hidden, lanes, &mut pre, &state.c, &mut c, &mut tc, &mut h);
    state.h = h;
    state.c = c;
}

/// Forward activations kept for backpropagation through time.
/// Rows are indexed `t * lanes + b`.
#[derive(Clone, Debug)]
pub struct LstmTrace {
    pub hidden: usize,
    pub lanes: usize,
    pub steps: usize,
    gates: Vec<f64>,
    cells: Vec<f64>,
    tanh_cells: Vec<f64>,
    prev_h: Vec<f64>,
    prev_c: Vec<f64>,
    masks: Vec<f64>,
    /// Hidden outputs `h_t`, `steps * lanes * hidden`.
    pub outputs: Vec<f64>,
}

impl LstmTrace {
    /// State after the last step.
    pub fn final_state(&self) -> LstmState {
        let block = self.lanes * self.hidden;
        if self.steps == 0 {
            return LstmState::zeros(self.lanes, self.hidden);
        }
        let t = self.steps - 1;
        LstmState {
            hidden: self.hidden,
            h: self.outputs[t * block..(t + 1) * block].to_vec(),
            c: self.cells[t * block..(t + 1) * block].to_vec(),
        }
    }
}

/// Runs `steps` steps for `lanes` lanes from `init`. `masks[t * lanes + b]`
/// is 0.0 when lane `b` starts a fresh episode at step `t`, else 1.0.
pub fn forward_sequence(
    w: LstmWeights<'_>,
    lanes: usize,
    steps: usize,
    input_proj: &[f64],
    init: &LstmState,
    masks: &[f64],
) -> LstmTrace {
    let hidden = w.hidden;
    let g4 = 4 * hidden;
    let rows = lanes * steps;
    let mut trace = LstmTrace {
        hidden,
        lanes,
        steps,
        gates: vec![0.0; rows * g4],
        cells: vec![0.0; rows * hidden],
        tanh_cells: vec![0.0; rows * hidden],
        prev_h: vec![0.0; rows * hidden],
        prev_c: vec![0.0; rows * hidden],
        masks: masks.to_vec(),
        outputs: vec![0.0; rows * hidden],
    };
    let mut h = init.h.clone();
    let mut c = init.c.clone();
    let block = lanes * hidden;
    for t in 0..steps {
        for b in 0..lanes {
            let m = masks[t * lanes + b];
            if m == 0.0 {
                h[b * hidden..(b + 1) * hidden].iter_mut().for_each(|x| *x = 0.0);
                c[b * hidden..(b + 1) * hidden].iter_mut().for_each(|x| *x = 0.0);
            }
        }
        trace.prev_h[t * block..(t + 1) * block].copy_from_slice(&h);
        trace.prev_c[t * block..(t + 1) * block].copy_from_slice(&c);
        let mut pre = gate_preactivations(w, lanes, &input_proj[t * lanes * g4..(t + 1) * lanes * g4], &h);
        let (cs, rest) = (
            &mut trace.cells[t * block..(t + 1) * block],
            &mut trace.tanh_cells[t * block..(t + 1) * block],
        );
        cell_update(hidden, lanes, &mut pre, &c, cs, rest, &mut trace.outputs[t * block..(t + 1) * block]);
        trace.gates[t * lanes * g4..(t + 1) * lanes * g4].copy_from_slice(&pre);
        h.copy_from_slice(&trace.outputs[t * block..(t + 1) * block]);
        c.copy_from_slice(&trace.cells[t * block..(t + 1) * block]);
    }
    trace
}

/// Gradients produced by [`backward_sequence`].
pub struct LstmGrads {
    /// Gradient w.r.t. the gate pre-activations (equivalently the projected
    /// inputs), `steps * lanes * 4H`.
    pub d_pre: Vec<f64>,
}

/// Backpropagation through time. `d_outputs` is the loss gradient w.r.t.
/// every `h_t`. Accumulates into `dw_hh` and `dbias`; the initial state is
/// treated as a constant.
pub fn backward_sequence(
    w: LstmWeights<'_>,
    trace: &LstmTrace,
    d_outputs: &[f64],
    dw_hh: &mut [f64],
    dbias: &mut [f64],
) -> LstmGrads {
    let hidden = trace.hidden;
    let lanes = trace.lanes;
    let g4 = 4 * hidden;
    let block = lanes * hidden;
    let mut d_pre = vec![0.0; trace.steps * lanes * g4];
    let mut dh_next = vec![0.0; block];
    let mut dc_next = vec![0.0; block];
    for t in (0..trace.steps).rev() {
        let gates = &trace.gates[t * lanes * g4..(t + 1) * lanes * g4];
        let tanh_c = &trace.tanh_cells[t * block..(t + 1) * block];
        let prev_c = &trace.prev_c[t * block..(t + 1) * block];
        let dg = &mut d_pre[t * lanes * g4..(t + 1) * lanes * g4];
        let mut dc_prev = vec![0.0; block];
        for b in 0..lanes {
            for j in 0..hidden {
                let k = b * hidden + j;
                let gi = b * g4;
                let (i, f, g, o) = (
                    gates[gi + j],
                    gates[gi + hidden + j],
                    gates[gi + 2 * hidden + j],
                    gates[gi + 3 * hidden + j],
                );
                let dh = d_outputs[t * block + k] + dh_next[k];
                let tc = tanh_c[k];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
                let di = dc * g;
                let dgg = dc * i;
                let df = dc * prev_c[k];
                dc_prev[k] = dc * f;
                dg[gi + j] = di * i * (1.0 - i);
                dg[gi + hidden + j] = df * f * (1.0 - f);
                dg[gi + 2 * hidden + j] = dgg * (1.0 - g * g);
                dg[gi + 3 * hidden + j] = d_o * o * (1.0 - o);
            }
        }
        // dh_{t-1} = dG_t W_hh, then gated by the continuation mask of step t
        let mut dh_prev = vec![0.0; block];
        gemm_a_b(lanes, g4, hidden, dg, w.w_hh, 0.0, &mut dh_prev);
        for b in 0..lanes {
            let m = trace.masks[t * lanes + b];
            for j in 0..hidden {
                let k = b * hidden + j;
                dh_next[k] = m * dh_prev[k];
                dc_next[k] = m * dc_prev[k];
            }
        }
    }
    let rows = trace.steps * lanes;
    gemm_at_b(g4, rows, hidden, &d_pre, &trace.prev_h, 1.0, dw_hh);
    for r in 0..rows {
        for (db, &d) in dbias.iter_mut().zip(&d_pre[r * g4..(r + 1) * g4]) {
            *db += d;
        }
    }
    LstmGrads { d_pre }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-s..s)).collect()
    }

    #[test]
    fn gemm_variants_agree_with_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (m, k, n) = (3, 5, 4);
        let a = rand_vec(&mut rng, m * k, 1.0);
        let bt = rand_vec(&mut rng, n * k, 1.0);
        let mut c = vec![0.0; m * n];
        gemm_a_bt(m, k, n, &a, &bt, 0.0, &mut c);
        for i in 0..m {
            for j in 0..n {
                let want: f64 = (0..k).map(|q| a[i * k + q] * bt[j * k + q]).sum();
                assert!((c[i * n + j] - want).abs() < 1e-12);
            }
        }
        let at: Vec<f64> = (0..k * m).map(|idx| a[(idx % m) * k + idx / m]).collect();
        let b: Vec<f64> = (0..k * n).map(|idx| bt[(idx % n) * k + idx / n]).collect();
        let mut c2 = vec![0.0; m * n];
        gemm_at_b(m, k, n, &at, &b, 0.0, &mut c2);
        let mut c3 = vec![0.0; m * n];
        gemm_a_b(m, k, n, &a, &b, 0.0, &mut c3);
        for idx in 0..m * n {
            assert!((c[idx] - c2[idx]).abs() < 1e-12);
            assert!((c[idx] - c3[idx]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_step_matches_sequence_first_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let hidden = 6;
        let lanes = 3;
        let w_hh = rand_vec(&mut rng, 4 * hidden * hidden, 0.5);
        let bias = rand_vec(&mut rng, 4 * hidden, 0.5);
        let w = LstmWeights { w_hh: &w_hh, bias: &bias, hidden };
        let inp = rand_vec(&mut rng, lanes * 4 * hidden, 1.0);
        let mut init = LstmState::zeros(lanes, hidden);
        init.h = rand_vec(&mut rng, lanes * hidden, 1.0);
        init.c = rand_vec(&mut rng, lanes * hidden, 1.0);
        let trace = forward_sequence(w, lanes, 1, &inp, &init, &[1.0; 3]);
        let mut st = init.clone();
        step(w, &inp, &mut st);
        assert_eq!(st.h, trace.outputs);
    }

    /// Loss = sum_t <r_t, h_t>; checks every parameter and input against
    /// central differences.
    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let hidden = 4;
        let lanes = 2;
        let steps = 4;
        let g4 = 4 * hidden;
        let mut w_hh = rand_vec(&mut rng, g4 * hidden, 0.6);
        let mut bias = rand_vec(&mut rng, g4, 0.6);
        let mut inp = rand_vec(&mut rng, steps * lanes * g4, 1.0);
        let r = rand_vec(&mut rng, steps * lanes * hidden, 1.0);
        let mut init = LstmState::zeros(lanes, hidden);
        init.h = rand_vec(&mut rng, lanes * hidden, 1.0);
        init.c = rand_vec(&mut rng, lanes * hidden, 1.0);
        let masks = vec![1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];

        let loss = |w_hh: &[f64], bias: &[f64], inp: &[f64]| {
            let w = LstmWeights { w_hh, bias, hidden };
            let tr = forward_sequence(w, lanes, steps, inp, &init, &masks);
            tr.outputs.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
        };
        let w = LstmWeights { w_hh: &w_hh, bias: &bias, hidden };
        let tr = forward_sequence(w, lanes, steps, &inp, &init, &masks);
        let mut dw = vec![0.0; w_hh.len()];
        let mut db = vec![0.0; bias.len()];
        let grads = backward_sequence(w, &tr, &r, &mut dw, &mut db);

        let h = 1e-5;
        let check = |analytic: f64, plus: f64, minus: f64| {
            let numeric = (plus - minus) / (2.0 * h);
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            assert!((analytic - numeric).abs() / denom < 1e-4, "{analytic} vs {numeric}");
        };
        for idx in 0..w_hh.len() {
            let orig = w_hh[idx];
            w_hh[idx] = orig + h;
            let p = loss(&w_hh, &bias, &inp);
            w_hh[idx] = orig - h;
            let m = loss(&w_hh, &bias, &inp);
            w_hh[idx] = orig;
            check(dw[idx], p, m);
        }
        for idx in 0..bias.len() {
            let orig = bias[idx];
            bias[idx] = orig + h;
            let p = loss(&w_hh, &bias, &inp);
            bias[idx] = orig - h;
            let m = loss(&w_hh, &bias, &inp);
            bias[idx] = orig;
            check(db[idx], p, m);
        }
        for idx in 0..inp.len() {
            let orig = inp[idx];
            inp[idx] = orig + h;
            let p = loss(&w_hh, &bias, &inp);
            inp[idx] = orig - h;
            let m = loss(&w_hh, &bias, &inp);
            inp[idx] = orig;
            check(grads.d_pre[idx], p, m);
        }
    }
}
