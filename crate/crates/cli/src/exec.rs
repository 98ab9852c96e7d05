use std::ops::Range;

use cavity_core::ensemble::Executor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Runs ensemble chunks on a dedicated rayon pool. Results come back in
/// index order, so the reduction does not depend on the thread count.
pub struct RayonExecutor {
    pool: ThreadPool,
}

impl RayonExecutor {
    /// `threads = 0` lets rayon pick.
    pub fn new(threads: usize) -> Self {
        let pool = ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        RayonExecutor { pool }
    }
}

impl Executor for RayonExecutor {
    fn map<T, F>(&self, range: Range<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| range.into_par_iter().map(f).collect())
    }
}
