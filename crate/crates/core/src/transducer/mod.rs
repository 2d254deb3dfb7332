//! Prediction network, joint network, and the transducer loss via the
//! forward-backward dynamic program with analytic gradients.

mod loss;
mod network;

pub use loss::{rnnt_loss, rnnt_loss_on_tape, rnnt_loss_unchecked};
pub use network::{lattice_forward, lattice_on_tape, JointNet, PredNet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransducerError {
    #[error("lattice dims T={t} U+1={u1} K={k} do not match labels of length {labels}")]
    DimMismatch { t: usize, u1: usize, k: usize, labels: usize },
    #[error("lattice has no frames")]
    EmptyLattice,
    #[error("lattice is not normalized at (t={t}, u={u}): log-sum-exp {lse}")]
    NotNormalized { t: usize, u: usize, lse: f64 },
    #[error("token id {id} invalid for vocabulary of {vocab} (0 is the blank)")]
    BadToken { id: usize, vocab: usize },
    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),
}

pub type Result<T> = std::result::Result<T, TransducerError>;

/// The blank advances time without emitting a label.
pub const BLANK: usize = 0;

/// Blank-free label sequence; ids in 1..=K.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    ids: Vec<usize>,
}

impl TokenSeq {
    pub fn new(ids: Vec<usize>, vocab_size: usize) -> Result<Self> {
        for &id in &ids {
            if id == BLANK || id > vocab_size {
                return Err(TransducerError::BadToken { id, vocab: vocab_size });
            }
        }
        Ok(TokenSeq { ids })
    }

    pub fn empty() -> Self {
        TokenSeq { ids: Vec::new() }
    }

    /// Wrap ids produced by the search algorithms, which only ever emit
    /// valid non-blank labels.
    pub(crate) fn from_search(ids: Vec<usize>) -> Self {
        debug_assert!(ids.iter().all(|&id| id != BLANK));
        TokenSeq { ids }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// T x (U+1) x K log-posteriors from the joint network, normalized over the
/// token axis at every (t, u).
#[derive(Debug, Clone)]
pub struct PosteriorLattice {
    pub t: usize,
    /// U + 1 prediction positions (position u has consumed u labels).
    pub u1: usize,
    /// K + 1 tokens including blank.
    pub k: usize,
    /// Row-major [t][u][k].
    pub log_probs: Vec<f64>,
}

impl PosteriorLattice {
    pub fn new(t: usize, u1: usize, k: usize, log_probs: Vec<f64>) -> Self {
        assert_eq!(log_probs.len(), t * u1 * k);
        PosteriorLattice { t, u1, k, log_probs }
    }

    #[inline]
    pub fn at(&self, t: usize, u: usize, k: usize) -> f64 {
        self.log_probs[(t * self.u1 + u) * self.k + k]
    }

    /// Check log-sum-exp over tokens is 0 within `tol` at every node.
    pub fn validate_normalized(&self, tol: f64) -> Result<()> {
        for t in 0..self.t {
            for u in 0..self.u1 {
                let base = (t * self.u1 + u) * self.k;
                let row = &self.log_probs[base..base + self.k];
                let lse = crate::numerics::log_sum_exp(row)?;
                if lse.abs() > tol {
                    return Err(TransducerError::NotNormalized { t, u, lse });
                }
            }
        }
        Ok(())
    }
}

/// Recurrent state of the prediction network's LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct PredState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl PredState {
    pub fn zeros(dim: usize) -> Self {
        PredState { hidden: vec![0.0; dim], cell: vec![0.0; dim] }
    }
}
