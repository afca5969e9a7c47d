//! Data-parallel execution with a sequential fallback.
//!
//! Every parallel map in the crate goes through [`Parallelism::map`], which
//! returns results in input order regardless of scheduling. Reductions over
//! floating point values are always performed sequentially over the ordered
//! results so output is bit-identical between the two modes.
//!
//! Without the `parallel` feature, [`Parallelism::Parallel`] degrades to
//! sequential execution.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parallelism {
    Sequential,
    /// `workers == 0` means one worker per available processor.
    Parallel { workers: usize },
}

impl Default for Parallelism {
    fn default() -> Self {
        Parallelism::Parallel { workers: 0 }
    }
}

impl Parallelism {
    pub fn with_workers(workers: usize) -> Self {
        if workers == 1 {
            Parallelism::Sequential
        } else {
            Parallelism::Parallel { workers }
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && matches!(self, Parallelism::Parallel { .. })
    }

    /// Applies `f` to every item; the output order matches `items`.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Parallelism::Sequential => items.iter().map(f).collect(),
            Parallelism::Parallel { workers } => par_map(*workers, items, f),
        }
    }

    /// Like [`map`](Self::map) but over `0..n`.
    pub fn map_range<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        let idx: Vec<usize> = (0..n).collect();
        self.map(&idx, |&i| f(i))
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(workers: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;

    if items.len() < 2 {
        return items.iter().map(f).collect();
    }
    if workers == 0 {
        return items.par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        // Pool creation can fail under thread limits; run inline instead.
        Err(_) => items.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R, F>(_workers: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_results_in_both_modes() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Parallelism::Sequential.map(&items, |x| x * x);
        let par = Parallelism::Parallel { workers: 3 }.map(&items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[999], 999 * 999);
    }

    #[test]
    fn one_worker_is_sequential() {
        assert_eq!(Parallelism::with_workers(1), Parallelism::Sequential);
        assert!(!Parallelism::Sequential.is_parallel());
    }
}
