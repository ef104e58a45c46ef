//! Execution policy for batched, independent evaluations.
//!
//! With the `parallel` feature the work is fanned out over rayon; results are
//! always collected in input order so reductions are bit-reproducible.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ExecPolicy {
    Sequential,
    #[default]
    Parallel,
}

impl ExecPolicy {
    /// True when this build can actually run in parallel.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecPolicy::Parallel
    }
}

/// Ordered map over a slice.
pub fn par_map<T, R, F>(policy: ExecPolicy, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if policy.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    let _ = policy;
    items.iter().map(f).collect()
}

/// Ordered map over `0..n`.
pub fn par_map_range<R, F>(policy: ExecPolicy, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if policy.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = policy;
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_results_match_sequential() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = par_map(ExecPolicy::Parallel, &xs, |x| x * x);
        let b = par_map(ExecPolicy::Sequential, &xs, |x| x * x);
        assert_eq!(a, b);
        let c = par_map_range(ExecPolicy::Parallel, 17, |i| i + 1);
        assert_eq!(c, (1..18).collect::<Vec<_>>());
    }
}
