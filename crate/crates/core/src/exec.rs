//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`ExecMode::Parallel`] runs
//! per-item work on the rayon pool. Without it, or with
//! [`ExecMode::Sequential`], work runs on the calling thread. Results are
//! returned in input order either way, so outputs are identical across modes.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// Whether `Parallel` actually uses worker threads in this build.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// `items.iter().map(f).collect()` honoring `mode`.
pub fn map_ordered<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}
