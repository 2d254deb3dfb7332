//! Data-parallel helpers. With the `parallel` feature (default) the work is
//! spread over the rayon pool; without it the same entry points run
//! sequentially. Results are always collected in input order, so outputs are
//! identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map over items in parallel (or sequentially without the feature),
/// preserving input order.
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Map over an index range in parallel (or sequentially), preserving order.
pub fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential variants, always available; the criterion bench suite compares
/// these against the dispatching versions above.
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

pub fn map_indexed_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_in_order() {
        let xs: Vec<u64> = (0..100).collect();
        let par = map_collect(&xs, |x| x * x);
        let seq = map_collect_seq(&xs, |x| x * x);
        assert_eq!(par, seq);
        assert_eq!(map_indexed(10, |i| i * 3), map_indexed_seq(10, |i| i * 3));
    }
}
