//! Seed-level fan-out with a deterministic merge.
//!
//! Results are always returned in ascending seed order, whatever the
//! execution strategy, so reductions over them are bit-identical between
//! sequential and parallel execution.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// Uses rayon's global pool when the `parallel` feature is enabled and
    /// falls back to sequential execution otherwise.
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work actually runs on several threads.
    pub fn is_concurrent(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Applies `f` to every item and returns the results in input order.
pub fn map_ordered<T, R, F>(items: &[T], execution: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution == Execution::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = execution;
    items.iter().map(f).collect()
}

/// Applies `f` to every seed, returning `(seed, result)` pairs sorted by seed.
///
/// Duplicate seeds are collapsed.
pub fn map_seeds<R, F>(seeds: &[u64], execution: Execution, f: F) -> Vec<(u64, R)>
where
    R: Send,
    F: Fn(u64) -> R + Sync + Send,
{
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let results = map_ordered(&sorted, execution, |&s| f(s));
    sorted.into_iter().zip(results).collect()
}
