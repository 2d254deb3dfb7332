//! Token error rate via Levenshtein edit distance.

use super::{DecodeError, Result};

/// Edit distance with unit substitution/insertion/deletion costs.
pub fn levenshtein(a: &[usize], b: &[usize]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ai) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &bj) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ai != bj);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Token error rate: edit distance / reference length. The reference must be
/// non-empty; the rate can exceed 1 for long hypotheses.
pub fn cer(reference: &[usize], hypothesis: &[usize]) -> Result<f64> {
    if reference.is_empty() {
        return Err(DecodeError::EmptyReference);
    }
    Ok(levenshtein(reference, hypothesis) as f64 / reference.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_sequences_are_zero() {
        assert_eq!(cer(&[1, 2, 3], &[1, 2, 3]).unwrap(), 0.0);
    }

    #[test]
    fn empty_hypothesis_is_one() {
        assert_eq!(cer(&[4, 5], &[]).unwrap(), 1.0);
    }

    #[test]
    fn single_substitution() {
        // "a b c" vs "a x c"
        let v = cer(&[1, 2, 3], &[1, 9, 3]).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_reference_errors() {
        assert!(cer(&[], &[1]).is_err());
    }

    proptest! {
        #[test]
        fn edit_distance_is_a_metric(
            a in proptest::collection::vec(1usize..5, 0..8),
            b in proptest::collection::vec(1usize..5, 0..8),
            c in proptest::collection::vec(1usize..5, 0..8),
        ) {
            // symmetric numerator
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            // identity of indiscernibles
            prop_assert_eq!(levenshtein(&a, &a), 0);
            // triangle inequality
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        }
    }
}
