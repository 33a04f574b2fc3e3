//! Execution strategy: data-parallel fan-out with a sequential fallback.
//!
//! Per-user evaluation work is independent, so it is mapped over a worker
//! pool when the `parallel` feature (on by default) is enabled. Results are
//! collected in input order and reduced sequentially, which keeps every
//! output byte-identical at any worker count.

/// How per-item work is fanned out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    /// Use the worker pool when the `parallel` feature is enabled, otherwise
    /// run sequentially.
    #[default]
    Auto,
    /// Always run on the calling thread.
    Sequential,
}

/// Maps `f` over `items`, preserving input order in the output.
pub fn run_map<T, U, F>(mode: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode {
        Execution::Sequential => items.iter().map(f).collect(),
        Execution::Auto => pooled_map(items, f),
    }
}

#[cfg(feature = "parallel")]
fn pooled_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn pooled_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}
