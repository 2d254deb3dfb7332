//! Exhaustive decoding oracle: enumerate every label sequence up to a length
//! bound, score each by full-alignment marginalization (the same dynamic
//! program as the loss), and rank exactly.

use crate::transducer::{rnnt_loss_unchecked, PosteriorLattice, TokenSeq};

use super::alsd::rank;
use super::scorer::TransducerScorer;
use super::{DecodeError, NBest, Result};

/// Build the T x (U+1) x K lattice a label sequence induces under a scorer.
pub fn lattice_for_labels<S: TransducerScorer>(
    scorer: &S,
    labels: &[usize],
) -> crate::transducer::Result<PosteriorLattice> {
    let t_len = scorer.frames_available();
    let kbar = scorer.n_tokens();
    let u1 = labels.len() + 1;
    let mut states = Vec::with_capacity(u1);
    states.push(scorer.start_state()?);
    for &k in labels {
        let next = scorer.advance_label(states.last().unwrap(), k)?;
        states.push(next);
    }
    let mut log_probs = vec![0.0; t_len * u1 * kbar];
    for t in 0..t_len {
        for (u, st) in states.iter().enumerate() {
            let lp = scorer.log_probs(t, st);
            let base = (t * u1 + u) * kbar;
            log_probs[base..base + kbar].copy_from_slice(&lp);
        }
    }
    Ok(PosteriorLattice::new(t_len, u1, kbar, log_probs))
}

/// Marginalized log probability of one label sequence (the negative loss).
pub fn sequence_log_prob<S: TransducerScorer>(scorer: &S, labels: &[usize]) -> Result<f64> {
    let lattice = lattice_for_labels(scorer, labels)?;
    let tokens = TokenSeq::new(labels.to_vec(), lattice.k - 1)?;
    let (loss, _) = rnnt_loss_unchecked(&lattice, &tokens);
    Ok(-loss)
}

/// Enumerate and rank every sequence of length <= u_max. Errors if the
/// enumeration would exceed `budget` sequences.
pub fn exhaustive_oracle<S: TransducerScorer>(
    scorer: &S,
    u_max: usize,
    budget: usize,
) -> Result<NBest> {
    let k = scorer.n_tokens() - 1;
    let mut total: usize = 0;
    let mut layer: usize = 1;
    for _ in 0..=u_max {
        total = total.saturating_add(layer);
        layer = layer.saturating_mul(k);
        if total > budget {
            return Err(DecodeError::EnumerationBudget { needed: total, budget });
        }
    }

    let mut ranked: Vec<(Vec<usize>, f64)> = Vec::with_capacity(total);
    let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
    while let Some(seq) = stack.pop() {
        let score = sequence_log_prob(scorer, &seq)?;
        if seq.len() < u_max {
            for label in 1..=k {
                let mut next = seq.clone();
                next.push(label);
                stack.push(next);
            }
        }
        ranked.push((seq, score));
    }
    ranked.sort_by(rank);
    Ok(NBest::from_ranked(ranked))
}
