//! Scoring backends for the search algorithms: the real model (prediction +
//! joint networks over encoder frames) and a fixed lattice for oracle tests.

use crate::model::ModelParams;
use crate::numerics::Tensor;
use crate::transducer::{JointNet, PosteriorLattice, PredNet, PredState, Result as TResult};

/// What a transducer search needs: per-frame token log-posteriors
/// conditioned on a label-prefix state.
pub trait TransducerScorer {
    type State: Clone;

    /// Frames currently scoreable (grows during streaming).
    fn frames_available(&self) -> usize;

    /// K+1 including blank.
    fn n_tokens(&self) -> usize;

    fn start_state(&self) -> TResult<Self::State>;

    fn advance_label(&self, state: &Self::State, label: usize) -> TResult<Self::State>;

    /// log P(k | t, state) for all k.
    fn log_probs(&self, t: usize, state: &Self::State) -> Vec<f64>;
}

/// Prefix state for the model scorer: LSTM state plus the joint-projected
/// prediction vector for the current prefix.
#[derive(Clone)]
pub struct PredProjState {
    pub state: PredState,
    pub proj: Vec<f64>,
}

/// Real-model backend. Encoder-side joint projections are precomputed per
/// frame and shared across hypotheses; frames can be appended incrementally.
pub struct ModelScorer<'a> {
    pred: PredNet<'a>,
    joint: JointNet<'a>,
    enc_proj: Vec<Vec<f64>>,
    n_tokens: usize,
}

impl<'a> ModelScorer<'a> {
    pub fn new(params: &'a ModelParams) -> Self {
        ModelScorer {
            pred: PredNet::new(params),
            joint: JointNet::new(params),
            enc_proj: Vec::new(),
            n_tokens: params.cfg.n_tokens(),
        }
    }

    pub fn with_encoder(params: &'a ModelParams, enc_hidden: &Tensor) -> Self {
        let mut s = Self::new(params);
        s.push_frames(enc_hidden);
        s
    }

    /// Append encoder frames (rows of a [n, D] tensor).
    pub fn push_frames(&mut self, rows: &Tensor) {
        for t in 0..rows.rows() {
            self.enc_proj.push(self.joint.project_enc(rows.row(t)));
        }
    }
}

impl<'a> TransducerScorer for ModelScorer<'a> {
    type State = PredProjState;

    fn frames_available(&self) -> usize {
        self.enc_proj.len()
    }

    fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    fn start_state(&self) -> TResult<PredProjState> {
        let (out, state) = self.pred.step(crate::transducer::BLANK, &self.pred.start_state())?;
        Ok(PredProjState { proj: self.joint.project_pred(&out), state })
    }

    fn advance_label(&self, state: &PredProjState, label: usize) -> TResult<PredProjState> {
        let (out, next) = self.pred.step(label, &state.state)?;
        Ok(PredProjState { proj: self.joint.project_pred(&out), state: next })
    }

    fn log_probs(&self, t: usize, state: &PredProjState) -> Vec<f64> {
        self.joint.log_probs_projected(&self.enc_proj[t], &state.proj)
    }
}

/// Fixed-lattice backend for controlled tests: the state is just the label
/// count u, and scores come straight out of the stored lattice.
pub struct LatticeScorer<'a> {
    pub lattice: &'a PosteriorLattice,
}

impl<'a> TransducerScorer for LatticeScorer<'a> {
    type State = usize;

    fn frames_available(&self) -> usize {
        self.lattice.t
    }

    fn n_tokens(&self) -> usize {
        self.lattice.k
    }

    fn start_state(&self) -> TResult<usize> {
        Ok(0)
    }

    fn advance_label(&self, state: &usize, _label: usize) -> TResult<usize> {
        Ok(state + 1)
    }

    fn log_probs(&self, t: usize, state: &usize) -> Vec<f64> {
        assert!(
            *state < self.lattice.u1,
            "lattice scorer has no row for u={state}"
        );
        let base = (t * self.lattice.u1 + state) * self.lattice.k;
        self.lattice.log_probs[base..base + self.lattice.k].to_vec()
    }
}
