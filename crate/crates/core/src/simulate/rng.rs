//! Per-replication random streams and the chunked parallel driver.
//!
//! Replication `i` of a run with seed `s` draws from the ChaCha8 stream
//! keyed by `s` with stream id `i`, so its numbers do not depend on which
//! worker runs it or in what order. Workers only exchange integer counts,
//! which add up the same way under any schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Replications handled by one task.
const CHUNK: u64 = 2048;

#[derive(Clone)]
pub(crate) struct StreamFactory {
    base: ChaCha8Rng,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        StreamFactory {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        rng
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {threads} worker threads: {e}")))
}

/// Runs `body(state, index, counts)` for every replication and returns the
/// summed counts. `init` builds per-task scratch state.
pub(crate) fn count_parallel<S, I, F>(
    replications: u64,
    width: usize,
    threads: usize,
    init: I,
    body: F,
) -> Result<Vec<u64>>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, u64, &mut [u64]) + Sync,
{
    let chunks = replications.div_ceil(CHUNK);
    let run = || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut state = init();
                let mut counts = vec![0u64; width];
                let end = ((c + 1) * CHUNK).min(replications);
                for i in c * CHUNK..end {
                    body(&mut state, i, &mut counts);
                }
                counts
            })
            .reduce(
                || vec![0u64; width],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    };
    Ok(pool(threads)?.install(run))
}

/// Runs `body(state, index)` for every replication and returns the outputs
/// in replication order.
pub(crate) fn map_parallel<S, T, I, F>(replications: u64, threads: usize, init: I, body: F) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, u64) -> T + Sync,
{
    let chunks = replications.div_ceil(CHUNK);
    let run = || {
        (0..chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let mut state = init();
                let end = ((c + 1) * CHUNK).min(replications);
                (c * CHUNK..end).map(|i| body(&mut state, i)).collect::<Vec<_>>()
            })
            .collect()
    };
    Ok(pool(threads)?.install(run))
}
