//! Prediction and joint networks: a fast slice-based path for decoding and
//! tape builders for training. Both compute the same arithmetic.

use std::sync::Arc;

use crate::encoder::BoundParams;
use crate::model::{ArchConfig, ModelParams};
use crate::numerics::ops::logistic_scalar;
use crate::numerics::{NodeId, Tape, Tensor};

use super::{PosteriorLattice, PredState, Result, TokenSeq, TransducerError, BLANK};

fn matvec(x: &[f64], w: &Tensor) -> Vec<f64> {
    let (rows, cols) = (w.rows(), w.cols());
    assert_eq!(x.len(), rows);
    let mut out = vec![0.0; cols];
    let wd = w.data();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &wd[i * cols..(i + 1) * cols];
        for (o, wv) in out.iter_mut().zip(row) {
            *o += xi * wv;
        }
    }
    out
}

/// Prediction network: embedding lookup, one uni-directional LSTM step, and
/// a feed-forward projection. Resolves parameter tensors once.
pub struct PredNet<'a> {
    embed: &'a Tensor,
    wx: [&'a Tensor; 4],
    wh: [&'a Tensor; 4],
    b: [&'a Tensor; 4],
    proj_w: &'a Tensor,
    proj_b: &'a Tensor,
    hidden: usize,
    vocab: usize,
}

impl<'a> PredNet<'a> {
    pub fn new(params: &'a ModelParams) -> Self {
        PredNet {
            embed: params.get("pred.embed"),
            wx: [
                params.get("pred.lstm.wxi"),
                params.get("pred.lstm.wxf"),
                params.get("pred.lstm.wxg"),
                params.get("pred.lstm.wxo"),
            ],
            wh: [
                params.get("pred.lstm.whi"),
                params.get("pred.lstm.whf"),
                params.get("pred.lstm.whg"),
                params.get("pred.lstm.who"),
            ],
            b: [
                params.get("pred.lstm.bi"),
                params.get("pred.lstm.bf"),
                params.get("pred.lstm.bg"),
                params.get("pred.lstm.bo"),
            ],
            proj_w: params.get("pred.proj.w"),
            proj_b: params.get("pred.proj.b"),
            hidden: params.cfg.pred_hidden,
            vocab: params.cfg.vocab_size,
        }
    }

    pub fn start_state(&self) -> PredState {
        PredState::zeros(self.hidden)
    }

    /// Advance one step on the previous token (the blank id doubles as the
    /// start symbol). Returns the projected hidden vector and the new state.
    pub fn step(&self, y_prev: usize, state: &PredState) -> Result<(Vec<f64>, PredState)> {
        if y_prev > self.vocab {
            return Err(TransducerError::BadToken { id: y_prev, vocab: self.vocab });
        }
        let e = self.embed.row(y_prev);
        let mut gates: Vec<Vec<f64>> = Vec::with_capacity(4);
        for g in 0..4 {
            let mut acc = matvec(e, self.wx[g]);
            let hv = matvec(&state.hidden, self.wh[g]);
            let bd = self.b[g].data();
            for i in 0..self.hidden {
                acc[i] += hv[i] + bd[i];
            }
            gates.push(acc);
        }
        let mut cell = vec![0.0; self.hidden];
        let mut hidden = vec![0.0; self.hidden];
        for i in 0..self.hidden {
            let ig = logistic_scalar(gates[0][i]);
            let fg = logistic_scalar(gates[1][i]);
            let gg = gates[2][i].tanh();
            let og = logistic_scalar(gates[3][i]);
            cell[i] = fg * state.cell[i] + ig * gg;
            hidden[i] = og * cell[i].tanh();
        }
        let mut out = matvec(&hidden, self.proj_w);
        for (o, b) in out.iter_mut().zip(self.proj_b.data()) {
            *o += b;
        }
        Ok((out, PredState { hidden, cell }))
    }

    /// Unroll over the start symbol plus a label prefix: U+1 output rows.
    pub fn unroll(&self, labels: &TokenSeq) -> Result<Vec<Vec<f64>>> {
        let mut outs = Vec::with_capacity(labels.len() + 1);
        let mut state = self.start_state();
        let mut prev = BLANK;
        for step in 0..=labels.len() {
            let (out, next) = self.step(prev, &state)?;
            outs.push(out);
            state = next;
            if step < labels.len() {
                prev = labels.ids()[step];
            }
        }
        Ok(outs)
    }
}

/// Joint network: project encoder and prediction vectors into a shared
/// space, add, tanh, project to K+1 logits, log-softmax.
pub struct JointNet<'a> {
    enc_w: &'a Tensor,
    pred_w: &'a Tensor,
    bias: &'a Tensor,
    out_w: &'a Tensor,
    out_b: &'a Tensor,
}

impl<'a> JointNet<'a> {
    pub fn new(params: &'a ModelParams) -> Self {
        JointNet {
            enc_w: params.get("joint.enc.w"),
            pred_w: params.get("joint.pred.w"),
            bias: params.get("joint.bias"),
            out_w: params.get("joint.out.w"),
            out_b: params.get("joint.out.b"),
        }
    }

    /// Precompute the encoder-side projection of one frame, reusable across
    /// prediction states.
    pub fn project_enc(&self, h_asr: &[f64]) -> Vec<f64> {
        matvec(h_asr, self.enc_w)
    }

    pub fn project_pred(&self, h_pred: &[f64]) -> Vec<f64> {
        matvec(h_pred, self.pred_w)
    }

    /// K+1 log-probabilities from projected encoder/prediction vectors.
    pub fn log_probs_projected(&self, enc_p: &[f64], pred_p: &[f64]) -> Vec<f64> {
        let j = self.bias.numel();
        let mut z = vec![0.0; j];
        let bd = self.bias.data();
        for i in 0..j {
            z[i] = (enc_p[i] + pred_p[i] + bd[i]).tanh();
        }
        let mut logits = matvec(&z, self.out_w);
        for (l, b) in logits.iter_mut().zip(self.out_b.data()) {
            *l += b;
        }
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for l in logits.iter_mut() {
            *l -= lse;
        }
        logits
    }

    pub fn log_probs(&self, h_asr: &[f64], h_pred: &[f64]) -> Vec<f64> {
        self.log_probs_projected(&self.project_enc(h_asr), &self.project_pred(h_pred))
    }
}

/// Full posterior lattice for (encoder output, label sequence).
pub fn lattice_forward(
    params: &ModelParams,
    enc_hidden: &Tensor,
    labels: &TokenSeq,
) -> Result<PosteriorLattice> {
    let pred = PredNet::new(params);
    let joint = JointNet::new(params);
    let t = enc_hidden.rows();
    if t == 0 {
        return Err(TransducerError::EmptyLattice);
    }
    let u1 = labels.len() + 1;
    let kbar = params.cfg.n_tokens();
    let pred_rows = pred.unroll(labels)?;
    let pred_proj: Vec<Vec<f64>> = pred_rows.iter().map(|r| joint.project_pred(r)).collect();
    let mut log_probs = vec![0.0; t * u1 * kbar];
    for ti in 0..t {
        let enc_p = joint.project_enc(enc_hidden.row(ti));
        for (ui, pp) in pred_proj.iter().enumerate() {
            let lp = joint.log_probs_projected(&enc_p, pp);
            let base = (ti * u1 + ui) * kbar;
            log_probs[base..base + kbar].copy_from_slice(&lp);
        }
    }
    Ok(PosteriorLattice::new(t, u1, kbar, log_probs))
}

/// Tape builder for the same lattice (training path). Returns the lattice
/// node of shape [T*(U+1), K+1], normalized per row.
pub fn lattice_on_tape(
    tape: &mut Tape,
    bp: &BoundParams,
    cfg: &ArchConfig,
    enc_out: NodeId,
    labels: &TokenSeq,
) -> Result<NodeId> {
    for &id in labels.ids() {
        if id == BLANK || id > cfg.vocab_size {
            return Err(TransducerError::BadToken { id, vocab: cfg.vocab_size });
        }
    }
    let h = cfg.pred_hidden;

    // unroll the prediction network over [start, y_1, ..., y_U]
    let mut prev_h = tape.input(Tensor::zeros(vec![1, h]));
    let mut prev_c = tape.input(Tensor::zeros(vec![1, h]));
    let mut pred_rows = Vec::with_capacity(labels.len() + 1);
    for step in 0..=labels.len() {
        let y_prev = if step == 0 { BLANK } else { labels.ids()[step - 1] };
        let e = tape.embedding(bp.id("pred.embed"), Arc::new(vec![y_prev]))?;
        let gate = |tape: &mut Tape, name: &str| -> Result<NodeId> {
            let a = tape.matmul(e, bp.id(&format!("pred.lstm.wx{name}")), false)?;
            let b = tape.matmul(prev_h, bp.id(&format!("pred.lstm.wh{name}")), false)?;
            let s = tape.add(a, b)?;
            Ok(tape.add_row(s, bp.id(&format!("pred.lstm.b{name}")))?)
        };
        let gi = gate(tape, "i")?;
        let gf = gate(tape, "f")?;
        let gg = gate(tape, "g")?;
        let go = gate(tape, "o")?;
        let ig = tape.logistic(gi)?;
        let fg = tape.logistic(gf)?;
        let gg = tape.tanh(gg)?;
        let og = tape.logistic(go)?;
        let keep = tape.mul(fg, prev_c)?;
        let write = tape.mul(ig, gg)?;
        let cell = tape.add(keep, write)?;
        let cell_t = tape.tanh(cell)?;
        let hidden = tape.mul(og, cell_t)?;
        let proj = tape.matmul(hidden, bp.id("pred.proj.w"), false)?;
        let proj = tape.add_row(proj, bp.id("pred.proj.b"))?;
        pred_rows.push(proj);
        prev_h = hidden;
        prev_c = cell;
    }
    let pred_seq = tape.concat_rows(pred_rows)?; // [U+1, P]

    let enc_p = tape.matmul(enc_out, bp.id("joint.enc.w"), false)?; // [T, J]
    let pred_p = tape.matmul(pred_seq, bp.id("joint.pred.w"), false)?; // [U+1, J]
    let combined = tape.outer_add(enc_p, pred_p)?; // [T*(U+1), J]
    let combined = tape.add_row(combined, bp.id("joint.bias"))?;
    let z = tape.tanh(combined)?;
    let logits = tape.matmul(z, bp.id("joint.out.w"), false)?;
    let logits = tape.add_row(logits, bp.id("joint.out.b"))?;
    Ok(tape.log_softmax(logits)?)
}
