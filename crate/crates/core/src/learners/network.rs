//! Actor-critic networks.
//!
//! * `Lh2dLinear`: main actor, auxiliary actor and critic are each a linear map
//!   of the one-hot 6400-dim observation, i.e. a column lookup.
//! * `PdRecurrent`: token embedding (4 -> 128), LSTM(128), three linear heads.
//! * `CrossingRecurrent`: per-cell type/color/state embeddings of length 8,
//!   flattened to 7x7x24, LSTM(128), three linear heads.
//!
//! Both actors read the same representation. The recurrent encoders feed the
//! LSTM through a lookup table `T[slot][token] = W_ih[:, slot block] E[token]`,
//! which is exact because every input block is an embedding row.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::lstm::{backward_sequence, forward_sequence, LstmState, LstmTrace, LstmWeights};
use crate::diffcore::ops::{dot, linear_backward, masked_log_softmax_into};
use crate::diffcore::{ActionMask, DiffError, Grads, ParamStore, Tensor};
use crate::envs::crossing::{COLOR_VOCAB, GRID_OBS_LEN, STATE_VOCAB, TYPE_VOCAB};
use crate::envs::lighthouse::LH2D_OBS_DIM;
use crate::envs::{Family, Observation, TaskSpec};

pub const HIDDEN: usize = 128;
pub const GRID_EMBED: usize = 8;
pub const PD_VOCAB: usize = 4;

pub const MAIN_W: &str = "actor.main.w";
pub const MAIN_B: &str = "actor.main.b";
pub const AUX_W: &str = "actor.aux.w";
pub const AUX_B: &str = "actor.aux.b";
pub const CRITIC_W: &str = "critic.w";
pub const CRITIC_B: &str = "critic.b";
pub const LSTM_W_IH: &str = "lstm.w_ih";
pub const LSTM_W_HH: &str = "lstm.w_hh";
pub const LSTM_BIAS: &str = "lstm.bias";
pub const EMBED_TOKEN: &str = "embed.token";
pub const EMBED_TYPE: &str = "embed.type";
pub const EMBED_COLOR: &str = "embed.color";
pub const EMBED_STATE: &str = "embed.state";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    Lh2dLinear,
    PdRecurrent,
    CrossingRecurrent,
}

impl Architecture {
    pub fn for_task(task: &TaskSpec) -> Result<Self, DiffError> {
        match task.family {
            Family::Lighthouse2D => Ok(Self::Lh2dLinear),
            Family::PoisonedDoors => Ok(Self::PdRecurrent),
            Family::WallCrossing | Family::LavaCrossing => Ok(Self::CrossingRecurrent),
            Family::Lighthouse1D => Err(DiffError::Invalid(format!("no network for task `{}`", task.id))),
        }
    }
}

/// Layer sizes. [`NetSpec::for_task`] gives the full sizes; tests shrink them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub arch: Architecture,
    pub num_actions: usize,
    pub hidden: usize,
    pub embed_dim: usize,
}

impl NetSpec {
    pub fn for_task(task: &TaskSpec) -> Result<Self, DiffError> {
        let arch = Architecture::for_task(task)?;
        let (hidden, embed_dim) = match arch {
            Architecture::Lh2dLinear => (0, 0),
            Architecture::PdRecurrent => (HIDDEN, HIDDEN),
            Architecture::CrossingRecurrent => (HIDDEN, GRID_EMBED),
        };
        Ok(Self {
            arch,
            num_actions: task.num_actions(),
            hidden,
            embed_dim,
        })
    }

    pub fn is_recurrent(&self) -> bool {
        self.arch != Architecture::Lh2dLinear
    }

    /// Integer features per observation row.
    pub fn feature_width(&self) -> usize {
        match self.arch {
            Architecture::Lh2dLinear | Architecture::PdRecurrent => 1,
            Architecture::CrossingRecurrent => GRID_OBS_LEN,
        }
    }

    /// Width of the representation the heads read.
    pub fn trunk_width(&self) -> usize {
        match self.arch {
            Architecture::Lh2dLinear => LH2D_OBS_DIM,
            _ => self.hidden,
        }
    }

    fn slot_table(&self, slot: usize) -> (&'static str, usize) {
        match self.arch {
            Architecture::PdRecurrent => (EMBED_TOKEN, PD_VOCAB),
            Architecture::CrossingRecurrent => match slot % 3 {
                0 => (EMBED_TYPE, TYPE_VOCAB),
                1 => (EMBED_COLOR, COLOR_VOCAB),
                _ => (EMBED_STATE, STATE_VOCAB),
            },
            Architecture::Lh2dLinear => unreachable!("linear net has no embedding slots"),
        }
    }

    fn input_width(&self) -> usize {
        self.feature_width() * self.embed_dim
    }

    /// Appends the integer features of `obs` to `out`.
    pub fn features(&self, obs: &Observation, out: &mut Vec<u32>) -> Result<(), DiffError> {
        let bad = || DiffError::ShapeMismatch {
            context: format!("observation {obs:?} for {:?}", self.arch),
            expected: vec![self.feature_width()],
            found: vec![],
        };
        match (self.arch, obs) {
            (Architecture::Lh2dLinear, Observation::Plane(i)) => out.push(*i as u32),
            (Architecture::PdRecurrent, Observation::Doors(t)) if (*t as usize) < PD_VOCAB => out.push(*t as u32),
            (Architecture::CrossingRecurrent, Observation::Grid(g)) => {
                for (slot, &v) in g.iter().enumerate() {
                    if v as usize >= self.slot_table(slot).1 {
                        return Err(bad());
                    }
                    out.push(v as u32);
                }
            }
            _ => return Err(bad()),
        }
        Ok(())
    }

    /// Every parameter as `(name, shape, init bound)`. LSTM and heads are
    /// uniform in `±1/sqrt(fan_in)`, embeddings uniform with unit variance.
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>, f64)> {
        let a = self.num_actions;
        let trunk = self.trunk_width();
        let head = 1.0 / (trunk as f64).sqrt();
        let mut out = Vec::new();
        if self.is_recurrent() {
            let h = self.hidden;
            let lstm = 1.0 / (h as f64).sqrt();
            let emb = 3f64.sqrt();
            if self.arch == Architecture::PdRecurrent {
                out.push((EMBED_TOKEN, vec![PD_VOCAB, self.embed_dim], emb));
            } else {
                for (name, vocab) in [(EMBED_TYPE, TYPE_VOCAB), (EMBED_COLOR, COLOR_VOCAB), (EMBED_STATE, STATE_VOCAB)] {
                    out.push((name, vec![vocab, self.embed_dim], emb));
                }
            }
            out.push((LSTM_W_IH, vec![4 * h, self.input_width()], lstm));
            out.push((LSTM_W_HH, vec![4 * h, h], lstm));
            out.push((LSTM_BIAS, vec![4 * h], lstm));
        }
        out.push((MAIN_W, vec![a, trunk], head));
        out.push((MAIN_B, vec![a], head));
        out.push((AUX_W, vec![a, trunk], head));
        out.push((AUX_B, vec![a], head));
        out.push((CRITIC_W, vec![1, trunk], head));
        out.push((CRITIC_B, vec![1], head));
        out
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        for (name, shape, bound) in self.param_shapes() {
            p.insert(name, Tensor::uniform(&shape, bound, &mut rng)).expect("unique names");
        }
        p
    }

    /// Checks that `params` has every tensor this spec reads, with the right size.
    pub fn check_params(&self, params: &ParamStore) -> Result<(), DiffError> {
        for (name, shape, _) in self.param_shapes() {
            let got = params.get(name)?;
            if got.shape() != shape.as_slice() {
                return Err(DiffError::ShapeMismatch {
                    context: name.to_string(),
                    expected: shape,
                    found: got.shape().to_vec(),
                });
            }
        }
        Ok(())
    }
}

/// Parameter-dependent tables computed once per parameter snapshot.
pub struct Prepared<'p> {
    spec: NetSpec,
    params: &'p ParamStore,
    /// `proj[slot]` is `vocab x 4H`, the projected embedding of every token.
    proj: Vec<Vec<f64>>,
}

impl<'p> Prepared<'p> {
    pub fn new(spec: &NetSpec, params: &'p ParamStore) -> Result<Self, DiffError> {
        spec.check_params(params)?;
        let mut proj = Vec::new();
        if spec.is_recurrent() {
            let g4 = 4 * spec.hidden;
            let d = spec.embed_dim;
            let in_w = spec.input_width();
            let w_ih = params.data(LSTM_W_IH);
            for slot in 0..spec.feature_width() {
                let (table, vocab) = spec.slot_table(slot);
                let e = params.data(table);
                let mut t = vec![0.0; vocab * g4];
                for v in 0..vocab {
                    let ev = &e[v * d..(v + 1) * d];
                    for r in 0..g4 {
                        t[v * g4 + r] = dot(&w_ih[r * in_w + slot * d..r * in_w + (slot + 1) * d], ev);
                    }
                }
                proj.push(t);
            }
        }
        Ok(Self {
            spec: spec.clone(),
            params,
            proj,
        })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    fn lstm(&self) -> LstmWeights<'_> {
        LstmWeights {
            w_hh: self.params.data(LSTM_W_HH),
            bias: self.params.data(LSTM_BIAS),
            hidden: self.spec.hidden,
        }
    }

    fn input_projection(&self, features: &[u32], rows: usize) -> Vec<f64> {
        let g4 = 4 * self.spec.hidden;
        let width = self.spec.feature_width();
        let mut out = vec![0.0; rows * g4];
        for r in 0..rows {
            let dst = &mut out[r * g4..(r + 1) * g4];
            for (slot, &tok) in features[r * width..(r + 1) * width].iter().enumerate() {
                let src = &self.proj[slot][tok as usize * g4..(tok as usize + 1) * g4];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
            }
        }
        out
    }

    /// Head outputs for one row of representation.
    fn heads_row(&self, trunk_row: Option<&[f64]>, index: usize, legal: ActionMask, out: &mut Forward, row: usize) {
        let a = self.spec.num_actions;
        let p = self.params;
        let mut main = vec![0.0; a];
        let mut aux = vec![0.0; a];
        let (mw, mb, aw, ab) = (p.data(MAIN_W), p.data(MAIN_B), p.data(AUX_W), p.data(AUX_B));
        let (cw, cb) = (p.data(CRITIC_W), p.data(CRITIC_B));
        match trunk_row {
            Some(h) => {
                let n = h.len();
                for k in 0..a {
                    main[k] = mb[k] + dot(&mw[k * n..(k + 1) * n], h);
                    aux[k] = ab[k] + dot(&aw[k * n..(k + 1) * n], h);
                }
                out.values[row] = cb[0] + dot(cw, h);
            }
            None => {
                let n = LH2D_OBS_DIM;
                for k in 0..a {
                    main[k] = mb[k] + mw[k * n + index];
                    aux[k] = ab[k] + aw[k * n + index];
                }
                out.values[row] = cb[0] + cw[index];
            }
        }
        masked_log_softmax_into(&main, legal, &mut out.main_logp[row * a..(row + 1) * a]);
        masked_log_softmax_into(&aux, legal, &mut out.aux_logp[row * a..(row + 1) * a]);
    }

    /// Runs a `steps x lanes` block. Rows are `t * lanes + b`; `masks[row]` is
    /// 0 where the lane starts a new episode (state reset before the step).
    pub fn forward(&self, batch: &SeqBatch<'_>) -> Result<Forward, DiffError> {
        let rows = batch.lanes * batch.steps;
        let width = self.spec.feature_width();
        if batch.features.len() != rows * width || batch.legal.len() != rows || batch.masks.len() != rows {
            return Err(DiffError::ShapeMismatch {
                context: "SeqBatch".into(),
                expected: vec![rows * width, rows, rows],
                found: vec![batch.features.len(), batch.legal.len(), batch.masks.len()],
            });
        }
        let a = self.spec.num_actions;
        let mut out = Forward {
            rows,
            num_actions: a,
            main_logp: vec![0.0; rows * a],
            aux_logp: vec![0.0; rows * a],
            values: vec![0.0; rows],
            trace: None,
        };
        if self.spec.is_recurrent() {
            let hidden = self.spec.hidden;
            let zero;
            let init = match batch.init {
                Some(s) => s,
                None => {
                    zero = LstmState::zeros(batch.lanes, hidden);
                    &zero
                }
            };
            let inp = self.input_projection(batch.features, rows);
            let trace = forward_sequence(self.lstm(), batch.lanes, batch.steps, &inp, init, batch.masks);
            for r in 0..rows {
                self.heads_row(Some(&trace.outputs[r * hidden..(r + 1) * hidden]), 0, batch.legal[r], &mut out, r);
            }
            out.trace = Some(trace);
        } else {
            for r in 0..rows {
                self.heads_row(None, batch.features[r] as usize, batch.legal[r], &mut out, r);
            }
        }
        Ok(out)
    }

    /// One step for every lane of `state`, advancing it in place.
    pub fn step(&self, features: &[u32], legal: &[ActionMask], state: &mut LstmState) -> Result<Forward, DiffError> {
        let lanes = legal.len();
        let masks = vec![1.0; lanes];
        let batch = SeqBatch {
            lanes,
            steps: 1,
            features,
            legal,
            masks: &masks,
            init: if self.spec.is_recurrent() { Some(state) } else { None },
        };
        let out = self.forward(&batch)?;
        if let Some(trace) = &out.trace {
            *state = trace.final_state();
        }
        Ok(out)
    }

    /// Exact gradients given the loss gradient w.r.t. main logits, aux logits
    /// and values (all `rows`-major).
    pub fn backward(
        &self,
        batch: &SeqBatch<'_>,
        fwd: &Forward,
        d_main: &[f64],
        d_aux: &[f64],
        d_value: &[f64],
    ) -> Grads {
        let mut g = Grads::zeros_like(self.params);
        let a = self.spec.num_actions;
        let rows = fwd.rows;
        let p = self.params;
        match &fwd.trace {
            None => {
                let n = LH2D_OBS_DIM;
                for r in 0..rows {
                    let idx = batch.features[r] as usize;
                    for k in 0..a {
                        g.slot(MAIN_W)[k * n + idx] += d_main[r * a + k];
                        g.slot(MAIN_B)[k] += d_main[r * a + k];
                        g.slot(AUX_W)[k * n + idx] += d_aux[r * a + k];
                        g.slot(AUX_B)[k] += d_aux[r * a + k];
                    }
                    g.slot(CRITIC_W)[idx] += d_value[r];
                    g.slot(CRITIC_B)[0] += d_value[r];
                }
            }
            Some(trace) => {
                let h = self.spec.hidden;
                let hs = &trace.outputs;
                let mut dh = vec![0.0; rows * h];
                let heads = [(MAIN_W, MAIN_B, d_main, a), (AUX_W, AUX_B, d_aux, a), (CRITIC_W, CRITIC_B, d_value, 1)];
                for (wn, bn, dy, out_dim) in heads {
                    let mut dw = vec![0.0; out_dim * h];
                    let mut db = vec![0.0; out_dim];
                    let dx = linear_backward(hs, rows, p.data(wn), out_dim, dy, &mut dw, &mut db);
                    dh.iter_mut().zip(&dx).for_each(|(d, x)| *d += x);
                    g.slot(wn).copy_from_slice(&dw);
                    g.slot(bn).copy_from_slice(&db);
                }
                let mut dw_hh = vec![0.0; 4 * h * h];
                let mut dbias = vec![0.0; 4 * h];
                let lg = backward_sequence(self.lstm(), trace, &dh, &mut dw_hh, &mut dbias);
                g.slot(LSTM_W_HH).copy_from_slice(&dw_hh);
                g.slot(LSTM_BIAS).copy_from_slice(&dbias);
                self.backward_projection(batch.features, rows, &lg.d_pre, &mut g);
            }
        }
        g
    }

    fn backward_projection(&self, features: &[u32], rows: usize, d_pre: &[f64], g: &mut Grads) {
        let g4 = 4 * self.spec.hidden;
        let d = self.spec.embed_dim;
        let width = self.spec.feature_width();
        let in_w = self.spec.input_width();
        let mut d_proj: Vec<Vec<f64>> = self.proj.iter().map(|t| vec![0.0; t.len()]).collect();
        for r in 0..rows {
            let src = &d_pre[r * g4..(r + 1) * g4];
            for (slot, &tok) in features[r * width..(r + 1) * width].iter().enumerate() {
                let dst = &mut d_proj[slot][tok as usize * g4..(tok as usize + 1) * g4];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
            }
        }
        let w_ih = self.params.data(LSTM_W_IH);
        let mut dw = vec![0.0; w_ih.len()];
        for (slot, dt) in d_proj.iter().enumerate() {
            let (table, vocab) = self.spec.slot_table(slot);
            let e = self.params.data(table);
            let mut de = vec![0.0; vocab * d];
            for v in 0..vocab {
                let dv = &dt[v * g4..(v + 1) * g4];
                if dv.iter().all(|&x| x == 0.0) {
                    continue;
                }
                let ev = &e[v * d..(v + 1) * d];
                for (rr, &gr) in dv.iter().enumerate() {
                    let off = rr * in_w + slot * d;
                    let wrow = &w_ih[off..off + d];
                    let dwrow = &mut dw[off..off + d];
                    for q in 0..d {
                        dwrow[q] += gr * ev[q];
                        de[v * d + q] += gr * wrow[q];
                    }
                }
            }
            g.slot(table).iter_mut().zip(&de).for_each(|(x, y)| *x += y);
        }
        g.slot(LSTM_W_IH).copy_from_slice(&dw);
    }
}

/// A `steps x lanes` block of network inputs.
#[derive(Clone, Copy)]
pub struct SeqBatch<'a> {
    pub lanes: usize,
    pub steps: usize,
    pub features: &'a [u32],
    pub legal: &'a [ActionMask],
    pub masks: &'a [f64],
    /// Recurrent state entering step 0; zeros when `None`.
    pub init: Option<&'a LstmState>,
}

/// Network outputs per row. Illegal actions have log-probability `-inf`.
pub struct Forward {
    pub rows: usize,
    pub num_actions: usize,
    pub main_logp: Vec<f64>,
    pub aux_logp: Vec<f64>,
    pub values: Vec<f64>,
    pub trace: Option<LstmTrace>,
}

impl Forward {
    pub fn main_logp_row(&self, r: usize) -> &[f64] {
        &self.main_logp[r * self.num_actions..(r + 1) * self.num_actions]
    }

    pub fn aux_logp_row(&self, r: usize) -> &[f64] {
        &self.aux_logp[r * self.num_actions..(r + 1) * self.num_actions]
    }

    pub fn main_probs_row(&self, r: usize) -> Vec<f64> {
        self.main_logp_row(r).iter().map(|l| l.exp()).collect()
    }

    pub fn aux_probs_row(&self, r: usize) -> Vec<f64> {
        self.aux_logp_row(r).iter().map(|l| l.exp()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::ops::first_n;
    use crate::envs::task_by_id;
    use rand::Rng;

    #[test]
    fn full_sizes() {
        let pd = NetSpec::for_task(&task_by_id("pd").unwrap()).unwrap();
        let p = pd.init_params(0);
        assert_eq!(p.get(EMBED_TOKEN).unwrap().shape(), &[4, 128]);
        assert_eq!(p.get(LSTM_W_HH).unwrap().shape(), &[512, 128]);
        assert_eq!(p.get(MAIN_W).unwrap().shape(), &[7, 128]);
        assert_eq!(p.get(AUX_W).unwrap().shape(), &[7, 128]);
        assert_eq!(p.get(CRITIC_W).unwrap().shape(), &[1, 128]);
        let lc = NetSpec::for_task(&task_by_id("lc-once-switch").unwrap()).unwrap();
        let p = lc.init_params(0);
        assert_eq!(p.get(LSTM_W_IH).unwrap().shape(), &[512, 7 * 7 * 24]);
        assert_eq!(p.get(EMBED_TYPE).unwrap().shape(), &[12, 8]);
        assert_eq!(p.get(MAIN_W).unwrap().shape(), &[4, 128]);
        let lh = NetSpec::for_task(&task_by_id("lh2d").unwrap()).unwrap();
        let p = lh.init_params(0);
        assert_eq!(p.get(MAIN_W).unwrap().shape(), &[4, 6400]);
        assert_eq!(p.get(CRITIC_W).unwrap().shape(), &[1, 6400]);
        assert!(!p.contains(LSTM_W_IH));
    }

    #[test]
    fn stepping_matches_sequence_bit_for_bit() {
        let spec = NetSpec::for_task(&task_by_id("wc-corrupt-s9").unwrap()).unwrap();
        let params = spec.init_params(4);
        let net = Prepared::new(&spec, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (lanes, steps) = (4, 6);
        let rows = lanes * steps;
        let features: Vec<u32> = (0..rows * 147).map(|i| rng.gen_range(0..[12, 7, 4][i % 3])).collect();
        let legal = vec![first_n(3); rows];
        let mut masks = vec![1.0; rows];
        masks[2 * lanes + 1] = 0.0;
        let mut state = LstmState::zeros(lanes, spec.hidden);
        let mut stepped = Vec::new();
        for t in 0..steps {
            for b in 0..lanes {
                if masks[t * lanes + b] == 0.0 {
                    state.reset_lane(b);
                }
            }
            let f = &features[t * lanes * 147..(t + 1) * lanes * 147];
            let out = net.step(f, &legal[..lanes], &mut state).unwrap();
            stepped.extend(out.main_logp);
        }
        // a two-lane slice of the same data, as a training minibatch would see it
        let pick = [1usize, 3];
        let mut sub_f = Vec::new();
        let mut sub_m = Vec::new();
        for t in 0..steps {
            for &b in &pick {
                let r = t * lanes + b;
                sub_f.extend_from_slice(&features[r * 147..(r + 1) * 147]);
                sub_m.push(masks[r]);
            }
        }
        let batch = SeqBatch {
            lanes: 2,
            steps,
            features: &sub_f,
            legal: &legal[..2 * steps],
            masks: &sub_m,
            init: None,
        };
        let fwd = net.forward(&batch).unwrap();
        let a = spec.num_actions;
        for t in 0..steps {
            for (i, &b) in pick.iter().enumerate() {
                let want = &stepped[(t * lanes + b) * a..(t * lanes + b + 1) * a];
                assert_eq!(fwd.main_logp_row(t * 2 + i), want);
            }
        }
    }

    #[test]
    fn linear_net_is_a_column_lookup() {
        let spec = NetSpec::for_task(&task_by_id("lh2d").unwrap()).unwrap();
        let mut params = spec.init_params(0);
        params.get_mut(MAIN_W).unwrap().data_mut()[2 * 6400 + 77] = 30.0;
        let net = Prepared::new(&spec, &params).unwrap();
        let batch = SeqBatch {
            lanes: 2,
            steps: 1,
            features: &[77, 78],
            legal: &[first_n(4), first_n(4)],
            masks: &[1.0, 1.0],
            init: None,
        };
        let fwd = net.forward(&batch).unwrap();
        assert!(fwd.main_probs_row(0)[2] > 0.999);
        assert!(fwd.main_probs_row(1)[2] < 0.5);
    }

    #[test]
    fn illegal_actions_get_zero_probability() {
        let spec = NetSpec::for_task(&task_by_id("pd").unwrap()).unwrap();
        let params = spec.init_params(0);
        let net = Prepared::new(&spec, &params).unwrap();
        let mut st = LstmState::zeros(1, spec.hidden);
        let out = net.step(&[1], &[0b111_0000], &mut st).unwrap();
        let p = out.main_probs_row(0);
        assert!(p[..4].iter().all(|&x| x == 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_observations_are_rejected() {
        let spec = NetSpec::for_task(&task_by_id("pd").unwrap()).unwrap();
        let mut out = Vec::new();
        assert!(spec.features(&Observation::Doors(4), &mut out).is_err());
        assert!(spec.features(&Observation::Plane(3), &mut out).is_err());
        let params = spec.init_params(0);
        let other = NetSpec::for_task(&task_by_id("lc-corrupt").unwrap()).unwrap();
        assert!(Prepared::new(&other, &params).is_err());
    }
}
