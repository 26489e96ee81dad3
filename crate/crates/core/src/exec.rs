//! Data-parallel mapping with a sequential fallback.
//!
//! Every fan-out in the crate (paths of a batch, replicates of an
//! experiment, nodes of a likelihood grid) goes through [`map_indexed`].
//! Results always come back in index order and every floating-point
//! reduction happens afterwards on the calling thread, so the numbers never
//! depend on the worker count.
//!
//! With the `parallel` feature disabled the map is a plain loop. With it
//! enabled, [`with_execution`] can still force the sequential path for the
//! current thread, which is what the benches use to compare both.

use std::cell::Cell;

/// How a fan-out is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Execution {
    /// The mode used when nothing has been overridden.
    pub fn default_mode() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Default for Execution {
    fn default() -> Self {
        Self::default_mode()
    }
}

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with the given execution mode in effect on this thread.
///
/// Sequential mode never spawns workers, so the override reaches every
/// nested fan-out. Parallel mode is a no-op when the feature is off.
pub fn with_execution<R>(mode: Execution, f: impl FnOnce() -> R) -> R {
    let previous = FORCE_SEQUENTIAL.with(|flag| flag.replace(mode == Execution::Sequential));
    let out = f();
    FORCE_SEQUENTIAL.with(|flag| flag.set(previous));
    out
}

/// The mode a fan-out started on this thread would use.
pub fn current() -> Execution {
    if FORCE_SEQUENTIAL.with(|flag| flag.get()) {
        Execution::Sequential
    } else {
        Execution::default_mode()
    }
}

/// Maps `f` over `0..len`, returning results in index order.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match current() {
        Execution::Sequential => (0..len).map(f).collect(),
        Execution::Parallel => parallel_map(len, f),
    }
}

/// Like [`map_indexed`] but stays sequential when the total work (in
/// arbitrary units supplied by the caller) is too small to amortize
/// scheduling.
pub fn map_indexed_weighted<T, F>(len: usize, work_per_item: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    const MIN_PARALLEL_WORK: usize = 1 << 16;
    if len.saturating_mul(work_per_item) < MIN_PARALLEL_WORK {
        (0..len).map(f).collect()
    } else {
        map_indexed(len, f)
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_in_both_modes() {
        let seq = with_execution(Execution::Sequential, || map_indexed(1000, |i| i * i));
        let par = with_execution(Execution::Parallel, || map_indexed(1000, |i| i * i));
        assert_eq!(seq, par);
        assert_eq!(seq[31], 961);
    }

    #[test]
    fn override_is_scoped() {
        let before = current();
        with_execution(Execution::Sequential, || {
            assert_eq!(current(), Execution::Sequential);
        });
        assert_eq!(current(), before);
    }
}
