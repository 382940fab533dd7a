//! Rayon-backed executor.

use rayon::prelude::*;
use skewfsv_core::engine::Executor;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "SKEWFSV_THREADS";

/// Runs work items on a dedicated rayon pool. Results come back in index
/// order, so draws do not depend on the thread count.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
        Ok(Self { pool })
    }

    /// Pool sized by `SKEWFSV_THREADS`, or by the available cores when unset
    /// or unparsable.
    pub fn from_env() -> Result<Self, rayon::ThreadPoolBuildError> {
        let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or(cores);
        Self::new(threads)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Parallel {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }

    fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        self.pool.install(|| items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_keeps_index_order() {
        let ex = Parallel::new(4).unwrap();
        let v = ex.map(1000, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, x)| *x == i * i));
        let mut w = vec![0usize; 257];
        ex.for_each_mut(&mut w, |i, x| *x = i + 1);
        assert_eq!(w[256], 257);
    }
}
