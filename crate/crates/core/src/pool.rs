//! Fixed-width worker pool for independent grid jobs. Results always come
//! back in input order, so output never depends on scheduling.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug)]
pub struct WorkerPool {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::invalid("run.workers", "need at least one worker"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("exciton-worker-{i}"))
            .build()
            .map_err(|e| Error::invalid("run.workers", e.to_string()))?;
        Ok(Self { pool, workers })
    }

    pub fn serial() -> Self {
        Self::new(1).expect("a single-thread pool can always be built")
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        self.pool.install(|| items.par_iter().map(&f).collect())
    }

    /// Like [`WorkerPool::map`], failing with the error of the earliest
    /// failing item in input order.
    pub fn try_map<T, R, F>(&self, items: &[T], f: F) -> Result<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> Result<R> + Sync,
    {
        self.map(items, f).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let items: Vec<u64> = (0..500).collect();
        for workers in [1, 3] {
            let pool = WorkerPool::new(workers).unwrap();
            let out = pool.map(&items, |x| x * x);
            assert_eq!(out, items.iter().map(|x| x * x).collect::<Vec<_>>());
        }
    }

    #[test]
    fn earliest_error_wins() {
        let pool = WorkerPool::new(2).unwrap();
        let items: Vec<usize> = (0..100).collect();
        let err = pool
            .try_map(&items, |&i| {
                if i % 30 == 17 {
                    Err(Error::DomainError(format!("item {i}")))
                } else {
                    Ok(i)
                }
            })
            .unwrap_err();
        assert_eq!(err, Error::DomainError("item 17".into()));
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(WorkerPool::new(0).is_err());
    }
}
