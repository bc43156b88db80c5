//! Data-parallel execution of independent simulation batches.
//!
//! With the `parallel` feature (default) batches run on rayon; without it,
//! or when `ExecMode::Sequential` is requested, they run in order on the
//! calling thread. Results are positionally deterministic either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for independent batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for ExecMode {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        ExecMode::Parallel
    }
    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        ExecMode::Sequential
    }
}

/// Maps `f` over `0..n`, in parallel when requested and available.
pub fn map_indexed<U, F>(mode: ExecMode, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => (0..n).into_par_iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let f = |i: usize| (i * i) as u64;
        let seq = map_indexed(ExecMode::Sequential, 100, f);
        let def = map_indexed(ExecMode::default(), 100, f);
        assert_eq!(seq, def);
    }
}
