//! Trial execution: a rayon work pool when the `parallel` feature is on, a
//! plain loop otherwise. Results never depend on which one ran, because
//! every trial draws from its own RNG stream keyed by `(seed, trial)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Environment variable holding the work-pool size.
pub const THREADS_ENV: &str = "GRAPH_STOIHT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Independent generator for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Pool size requested through [`THREADS_ENV`], if set to a positive integer.
pub fn requested_threads() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Sizes the global pool from [`THREADS_ENV`]. Later calls are no-ops.
pub fn init_pool() {
    #[cfg(feature = "parallel")]
    {
        use std::sync::Once;
        static INIT: Once = Once::new();
        INIT.call_once(|| {
            if let Some(n) = requested_threads() {
                // Fails only if someone else built the global pool first.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        });
    }
}

/// `f(0), …, f(count − 1)` in index order.
pub fn map_indexed<T, F>(count: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            init_pool();
            (0..count).into_par_iter().map(f).collect()
        }
        _ => (0..count).map(f).collect(),
    }
}
