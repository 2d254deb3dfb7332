//! Transducer loss: forward-backward dynamic program over the T x (U+1)
//! lattice with analytic gradients w.r.t. the token log-posteriors.
//!
//! Node (t, u) means t frames consumed and u labels emitted. A blank at
//! (t, u) moves to (t+1, u); label y[u+1] moves to (t, u+1). Every complete
//! alignment ends with the blank at (T-1, U). All accumulation is in f64.

use crate::numerics::ops::log_add;
use crate::numerics::{NodeId, Tape, Tensor};

use super::{PosteriorLattice, Result, TokenSeq, TransducerError, BLANK};

const NORMALIZATION_TOL: f64 = 1e-5;

fn validate_dims(lattice: &PosteriorLattice, labels: &TokenSeq) -> Result<()> {
    if lattice.t == 0 {
        return Err(TransducerError::EmptyLattice);
    }
    if lattice.u1 != labels.len() + 1 {
        return Err(TransducerError::DimMismatch {
            t: lattice.t,
            u1: lattice.u1,
            k: lattice.k,
            labels: labels.len(),
        });
    }
    for &id in labels.ids() {
        if id == BLANK || id >= lattice.k {
            return Err(TransducerError::BadToken { id, vocab: lattice.k - 1 });
        }
    }
    Ok(())
}

/// Negative log-likelihood of the label sequence and the gradient of the
/// loss w.r.t. every lattice log-probability (same [t][u][k] layout).
pub fn rnnt_loss(lattice: &PosteriorLattice, labels: &TokenSeq) -> Result<(f64, Vec<f64>)> {
    validate_dims(lattice, labels)?;
    lattice.validate_normalized(NORMALIZATION_TOL)?;
    Ok(rnnt_loss_unchecked(lattice, labels))
}

/// The same computation without the normalization check; used by finite
/// difference oracles that perturb individual lattice entries.
pub fn rnnt_loss_unchecked(lattice: &PosteriorLattice, labels: &TokenSeq) -> (f64, Vec<f64>) {
    let (t_len, u1) = (lattice.t, lattice.u1);
    let u_len = u1 - 1;
    let y = labels.ids();
    let idx = |t: usize, u: usize| t * u1 + u;

    // forward: alpha(t, u) = log prob of consuming t frames and u labels
    let mut alpha = vec![f64::NEG_INFINITY; t_len * u1];
    alpha[idx(0, 0)] = 0.0;
    for t in 0..t_len {
        for u in 0..u1 {
            if t == 0 && u == 0 {
                continue;
            }
            let mut v = f64::NEG_INFINITY;
            if t > 0 {
                v = log_add(v, alpha[idx(t - 1, u)] + lattice.at(t - 1, u, BLANK));
            }
            if u > 0 {
                v = log_add(v, alpha[idx(t, u - 1)] + lattice.at(t, u - 1, y[u - 1]));
            }
            alpha[idx(t, u)] = v;
        }
    }
    let log_p = alpha[idx(t_len - 1, u_len)] + lattice.at(t_len - 1, u_len, BLANK);
    let loss = -log_p;

    // backward: beta(t, u) = log prob of completing from (t, u), including
    // the emissions taken at (t, u) itself
    let mut beta = vec![f64::NEG_INFINITY; t_len * u1];
    for t in (0..t_len).rev() {
        for u in (0..u1).rev() {
            let blank_next = if t + 1 < t_len {
                beta[idx(t + 1, u)]
            } else if u == u_len {
                0.0 // final blank exits the lattice
            } else {
                f64::NEG_INFINITY
            };
            let mut v = lattice.at(t, u, BLANK) + blank_next;
            if u < u_len {
                v = log_add(v, lattice.at(t, u, y[u]) + beta[idx(t, u + 1)]);
            }
            beta[idx(t, u)] = v;
        }
    }
    debug_assert!(
        log_p == f64::NEG_INFINITY || (beta[idx(0, 0)] - log_p).abs() < 1e-6,
        "forward/backward disagree: {} vs {}",
        beta[idx(0, 0)],
        log_p
    );

    // occupancy gradients: dL/d lp(t,u,k) = -exp(alpha + arc + suffix - logP)
    let mut grad = vec![0.0; t_len * u1 * lattice.k];
    if log_p > f64::NEG_INFINITY {
        for t in 0..t_len {
            for u in 0..u1 {
                let a = alpha[idx(t, u)];
                if a == f64::NEG_INFINITY {
                    continue;
                }
                let blank_next = if t + 1 < t_len {
                    beta[idx(t + 1, u)]
                } else if u == u_len {
                    0.0
                } else {
                    f64::NEG_INFINITY
                };
                let base = (t * u1 + u) * lattice.k;
                let g_blank = a + lattice.at(t, u, BLANK) + blank_next - log_p;
                if g_blank > f64::NEG_INFINITY {
                    grad[base + BLANK] -= g_blank.exp();
                }
                if u < u_len {
                    let g_label = a + lattice.at(t, u, y[u]) + beta[idx(t, u + 1)] - log_p;
                    grad[base + y[u]] -= g_label.exp();
                }
            }
        }
    }
    (loss, grad)
}

/// Record the loss on a tape. `lattice_node` holds the [T*(U+1), K+1]
/// log-softmax output; the DP runs outside the op set and registers its
/// analytic gradient.
pub fn rnnt_loss_on_tape(
    tape: &mut Tape,
    lattice_node: NodeId,
    labels: &TokenSeq,
    t_len: usize,
) -> Result<NodeId> {
    let v = tape.value(lattice_node);
    let u1 = labels.len() + 1;
    assert_eq!(v.rows(), t_len * u1, "lattice node rows");
    let kbar = v.cols();
    let lattice = PosteriorLattice::new(t_len, u1, kbar, v.data().to_vec());
    let (loss, grad) = rnnt_loss(&lattice, labels)?;
    let grad = Tensor::new(vec![t_len * u1, kbar], grad);
    Ok(tape.opaque_scalar(lattice_node, loss, grad)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{max_rel_err, SplitMix64};

    /// Independent oracle: enumerate every monotone alignment (interleaving
    /// of blanks and labels ending in the final blank) and sum path
    /// probabilities directly.
    fn brute_force_log_prob(lattice: &PosteriorLattice, labels: &TokenSeq) -> f64 {
        let y = labels.ids();
        let u_len = y.len();
        let mut total = f64::NEG_INFINITY;
        // stack of (t, u, acc)
        let mut stack = vec![(0usize, 0usize, 0.0f64)];
        while let Some((t, u, acc)) = stack.pop() {
            if t == lattice.t - 1 && u == u_len {
                total = log_add(total, acc + lattice.at(t, u, BLANK));
            }
            if t + 1 < lattice.t {
                stack.push((t + 1, u, acc + lattice.at(t, u, BLANK)));
            }
            if u < u_len {
                stack.push((t, u + 1, acc + lattice.at(t, u, y[u])));
            }
        }
        total
    }

    fn random_lattice(t: usize, u1: usize, k: usize, rng: &mut SplitMix64) -> PosteriorLattice {
        let mut log_probs = vec![0.0; t * u1 * k];
        for node in 0..t * u1 {
            let logits: Vec<f64> = (0..k).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            for (i, l) in logits.iter().enumerate() {
                log_probs[node * k + i] = l - lse;
            }
        }
        PosteriorLattice::new(t, u1, k, log_probs)
    }

    #[test]
    fn single_frame_empty_labels() {
        let mut rng = SplitMix64::new(1);
        let lattice = random_lattice(1, 1, 3, &mut rng);
        let (loss, grad) = rnnt_loss(&lattice, &TokenSeq::empty()).unwrap();
        assert!((loss + lattice.at(0, 0, BLANK)).abs() < 1e-12);
        // gradient of -lp(blank) w.r.t. lp(blank) is -1
        assert!((grad[BLANK] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_frames_one_label_uniform() {
        // two monotone paths, each probability (1/3)^3
        let k = 3;
        let lp = (1.0f64 / 3.0).ln();
        let lattice = PosteriorLattice::new(2, 2, k, vec![lp; 2 * 2 * k]);
        let labels = TokenSeq::new(vec![1], k - 1).unwrap();
        let (loss, _) = rnnt_loss(&lattice, &labels).unwrap();
        let expect = -(2.0 * (1.0f64 / 27.0)).ln();
        assert!((loss - expect).abs() < 1e-12, "{loss} vs {expect}");
    }

    #[test]
    fn dp_matches_path_enumeration_on_random_lattices() {
        let mut rng = SplitMix64::new(42);
        for trial in 0..100 {
            let t = 1 + rng.below(4);
            let u = rng.below(4);
            let k = 2 + rng.below(3); // 2..=4 including blank
            let labels =
                TokenSeq::new((0..u).map(|_| 1 + rng.below(k - 1)).collect(), k - 1).unwrap();
            let lattice = random_lattice(t, u + 1, k, &mut rng);
            let (loss, _) = rnnt_loss(&lattice, &labels).unwrap();
            let oracle = -brute_force_log_prob(&lattice, &labels);
            assert!(
                (loss - oracle).abs() < 1e-5,
                "trial {trial}: dp {loss} vs enumeration {oracle} (t={t}, u={u}, k={k})"
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = SplitMix64::new(43);
        let eps = 1e-4;
        for _ in 0..20 {
            let t = 1 + rng.below(3);
            let u = rng.below(3);
            let k = 2 + rng.below(3);
            let labels =
                TokenSeq::new((0..u).map(|_| 1 + rng.below(k - 1)).collect(), k - 1).unwrap();
            let lattice = random_lattice(t, u + 1, k, &mut rng);
            let (_, grad) = rnnt_loss(&lattice, &labels).unwrap();
            let mut fd = vec![0.0; grad.len()];
            for i in 0..fd.len() {
                let mut lp = lattice.clone();
                lp.log_probs[i] += eps;
                let (lplus, _) = rnnt_loss_unchecked(&lp, &labels);
                let mut lm = lattice.clone();
                lm.log_probs[i] -= eps;
                let (lminus, _) = rnnt_loss_unchecked(&lm, &labels);
                fd[i] = (lplus - lminus) / (2.0 * eps);
            }
            let a = Tensor::new(vec![grad.len()], grad);
            let f = Tensor::new(vec![fd.len()], fd);
            let err = max_rel_err(&a, &f);
            assert!(err < 1e-3, "gradient err {err}");
        }
    }

    #[test]
    fn per_node_gradient_mass_matches_alpha_beta_marginal() {
        let mut rng = SplitMix64::new(44);
        let t = 3;
        let u = 2;
        let k = 4;
        let labels = TokenSeq::new(vec![2, 1], k - 1).unwrap();
        let lattice = random_lattice(t, u + 1, k, &mut rng);
        let (_, grad) = rnnt_loss(&lattice, &labels).unwrap();

        // recompute alpha/beta the same way to get node marginals
        let y = labels.ids();
        let u1 = u + 1;
        let idx = |ti: usize, ui: usize| ti * u1 + ui;
        let mut alpha = vec![f64::NEG_INFINITY; t * u1];
        alpha[0] = 0.0;
        for ti in 0..t {
            for ui in 0..u1 {
                if ti == 0 && ui == 0 {
                    continue;
                }
                let mut v = f64::NEG_INFINITY;
                if ti > 0 {
                    v = log_add(v, alpha[idx(ti - 1, ui)] + lattice.at(ti - 1, ui, BLANK));
                }
                if ui > 0 {
                    v = log_add(v, alpha[idx(ti, ui - 1)] + lattice.at(ti, ui - 1, y[ui - 1]));
                }
                alpha[idx(ti, ui)] = v;
            }
        }
        let mut beta = vec![f64::NEG_INFINITY; t * u1];
        for ti in (0..t).rev() {
            for ui in (0..u1).rev() {
                let bn = if ti + 1 < t {
                    beta[idx(ti + 1, ui)]
                } else if ui == u {
                    0.0
                } else {
                    f64::NEG_INFINITY
                };
                let mut v = lattice.at(ti, ui, BLANK) + bn;
                if ui < u {
                    v = log_add(v, lattice.at(ti, ui, y[ui]) + beta[idx(ti, ui + 1)]);
                }
                beta[idx(ti, ui)] = v;
            }
        }
        let log_p = beta[0];
        for ti in 0..t {
            for ui in 0..u1 {
                let node_sum: f64 = (0..k).map(|ki| grad[(ti * u1 + ui) * k + ki]).sum();
                let marginal = -(alpha[idx(ti, ui)] + beta[idx(ti, ui)] - log_p).exp();
                assert!(
                    (node_sum - marginal).abs() < 1e-5,
                    "node ({ti},{ui}): {node_sum} vs {marginal}"
                );
            }
        }
    }

    #[test]
    fn loss_is_non_negative_and_zero_needs_a_sure_alignment() {
        let mut rng = SplitMix64::new(45);
        for _ in 0..30 {
            let lattice = random_lattice(1 + rng.below(4), 1 + rng.below(3), 3, &mut rng);
            let u = lattice.u1 - 1;
            let labels = TokenSeq::new(vec![1; u], 2).unwrap();
            let (loss, _) = rnnt_loss(&lattice, &labels).unwrap();
            assert!(loss >= -1e-9);
        }
        // a deterministic lattice that puts probability 1 on one path
        let neg = -1e9;
        let mut lattice = PosteriorLattice::new(2, 2, 2, vec![neg; 8]);
        // path: label at (0,0), blank at (0->1, u=1), final blank at (1,1)
        let set = |l: &mut PosteriorLattice, t: usize, u: usize, k: usize| {
            l.log_probs[(t * 2 + u) * 2 + k] = 0.0;
        };
        set(&mut lattice, 0, 0, 1);
        set(&mut lattice, 0, 1, BLANK);
        set(&mut lattice, 1, 1, BLANK);
        // remaining rows need to stay normalized: put mass on unused arcs
        set(&mut lattice, 1, 0, BLANK);
        let labels = TokenSeq::new(vec![1], 1).unwrap();
        let (loss, _) = rnnt_loss(&lattice, &labels).unwrap();
        assert!(loss.abs() < 1e-9, "sure path should have zero loss, got {loss}");
    }

    #[test]
    fn error_paths() {
        let mut rng = SplitMix64::new(46);
        let lattice = random_lattice(2, 2, 3, &mut rng);
        // U mismatch
        assert!(matches!(
            rnnt_loss(&lattice, &TokenSeq::empty()),
            Err(TransducerError::DimMismatch { .. })
        ));
        // non-normalized
        let mut broken = lattice.clone();
        broken.log_probs[0] += 0.5;
        assert!(matches!(
            rnnt_loss(&broken, &TokenSeq::new(vec![1], 2).unwrap()),
            Err(TransducerError::NotNormalized { .. })
        ));
        // empty lattice
        let empty = PosteriorLattice::new(0, 1, 3, vec![]);
        assert!(matches!(
            rnnt_loss(&empty, &TokenSeq::empty()),
            Err(TransducerError::EmptyLattice)
        ));
    }

    #[test]
    fn tape_hook_backpropagates_the_dp_gradient() {
        let mut rng = SplitMix64::new(47);
        let lattice = random_lattice(2, 2, 3, &mut rng);
        let labels = TokenSeq::new(vec![2], 2).unwrap();
        let (loss, grad) = rnnt_loss(&lattice, &labels).unwrap();
        let mut tape = Tape::new();
        let node = tape.input(Tensor::new(vec![4, 3], lattice.log_probs.clone()));
        let loss_node = rnnt_loss_on_tape(&mut tape, node, &labels, 2).unwrap();
        assert_eq!(tape.value(loss_node).scalar_value(), loss);
        let grads = tape.backward(loss_node).unwrap();
        assert_eq!(grads.get(node).data(), grad.as_slice());
    }
}
