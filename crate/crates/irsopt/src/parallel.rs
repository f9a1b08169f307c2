//! Thread-pool executor and wall clock for the core algorithms.

use std::time::Instant;

use irsopt_core::exec::{Clock, Executor};
use rayon::prelude::*;

/// Rayon-backed executor. Results keep input order, so every reduction in
/// the core crate gives the same bits as [`irsopt_core::exec::Sequential`].
#[derive(Clone, Copy, Debug, Default)]
pub struct Parallel;

impl Executor for Parallel {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect()
    }

    fn map_mut<T, R, F>(&self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut T) -> R + Sync + Send,
    {
        items.par_iter_mut().enumerate().map(|(i, x)| f(i, x)).collect()
    }
}

/// Seconds since construction.
#[derive(Clone, Copy, Debug)]
pub struct StdClock(Instant);

impl StdClock {
    pub fn new() -> Self {
        StdClock(Instant::now())
    }
}

impl Default for StdClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for StdClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Sets the global pool size; `0` keeps Rayon's default.
pub fn init_threads(n: usize) {
    if n > 0 {
        // fails only if the pool already exists, which is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
