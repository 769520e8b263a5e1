use mixfield_core::joint::Executor;
use rayon::prelude::*;

use crate::error::{SimError, SimResult};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "SIM_THREADS";

/// Runs batches on the current rayon pool, keeping input order.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonExecutor;

impl Executor for RayonExecutor {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        items.into_par_iter().map(f).collect()
    }
}

/// Worker count from `SIM_THREADS`, or rayon's default when unset.
pub fn threads_from_env() -> SimResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(SimError::Spec(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

pub fn build_pool(threads: Option<usize>) -> SimResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| SimError::Spec(format!("cannot start worker pool: {e}")))
}
