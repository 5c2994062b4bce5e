//! Order-preserving data-parallel helpers.
//!
//! Every batch operation in the crate (per-tweet scoring, per-tweet
//! preprocessing, batch inference) routes through [`map_ordered`]. With the
//! `parallel` feature enabled the work is spread over the rayon thread pool;
//! without it, or when [`Execution::Sequential`] is requested, the same
//! closure runs on the calling thread. Output order always equals input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a batch operation distributes its per-item work.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is compiled in, otherwise
    /// degrades to [`Execution::Sequential`].
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// True when this mode will actually fan out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `items`, returning results in input order.
pub fn map_ordered<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Folds `items` into per-chunk accumulators and merges them.
///
/// `merge` must be associative and commutative over the accumulator for the
/// result to be independent of the chunking; counting maps satisfy that.
pub fn fold_reduce<T, A, Id, Fold, Merge>(
    items: &[T],
    exec: Execution,
    identity: Id,
    fold: Fold,
    merge: Merge,
) -> A
where
    T: Sync,
    A: Send,
    Id: Fn() -> A + Sync + Send,
    Fold: Fn(A, &T) -> A + Sync + Send,
    Merge: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items
            .par_iter()
            .fold(&identity, &fold)
            .reduce(&identity, &merge);
    }
    let _ = (exec, &merge);
    items.iter().fold(identity(), fold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_in_both_modes() {
        let items: Vec<u32> = (0..1000).collect();
        let seq = map_ordered(&items, Execution::Sequential, |x| x * 3);
        let par = map_ordered(&items, Execution::Parallel, |x| x * 3);
        assert_eq!(seq, par);
        assert_eq!(seq[999], 2997);
    }

    #[test]
    fn fold_reduce_sums_match() {
        let items: Vec<u64> = (1..=500).collect();
        let run = |exec| fold_reduce(&items, exec, || 0u64, |a, x| a + x, |a, b| a + b);
        assert_eq!(run(Execution::Sequential), 125_250);
        assert_eq!(run(Execution::Parallel), 125_250);
    }

    #[test]
    fn empty_input() {
        let items: Vec<u8> = Vec::new();
        assert!(map_ordered(&items, Execution::Parallel, |x| *x).is_empty());
    }
}
