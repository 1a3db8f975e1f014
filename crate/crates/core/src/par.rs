//! Data-parallel batch helpers.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] fans work out
//! over a rayon pool; without it every call runs sequentially. Results keep
//! input order either way, so output is identical across modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether parallel execution is actually available in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Order-preserving map.
pub fn map<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Order-preserving map on a pool with a bounded number of workers.
///
/// `workers = None` uses the global pool.
pub fn map_bounded<T, U, F>(exec: Execution, workers: Option<usize>, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if let (true, Some(n)) = (exec.is_parallel(), workers) {
        match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => return pool.install(|| items.par_iter().map(&f).collect()),
            Err(e) => log::warn!("falling back to global pool: {e}"),
        }
    }
    let _ = workers;
    map(exec, items, f)
}
