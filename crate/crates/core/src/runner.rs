//! Trajectory fan-out with deterministic reduction.
//!
//! Work is split into fixed-size chunks of trajectory indices. Each chunk is
//! mapped in parallel, collected in index order, and folded sequentially, so
//! results never depend on the worker count.

use rayon::prelude::*;

use crate::stochastic::{ChainSampler, GaussianIncrements, StreamSpec, TransitionMatrix};

const CHUNK: usize = 256;

/// Maps `f` over `0..count` on `workers` threads (0 = rayon default) and folds
/// the results in ascending index order.
pub fn map_fold<T, A, F, G>(count: usize, workers: usize, init: A, map: F, mut fold: G) -> A
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
    G: FnMut(A, u64, T) -> A,
{
    let pool = (workers > 0).then(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool")
    });
    let mut acc = init;
    let mut start = 0usize;
    while start < count {
        let end = (start + CHUNK).min(count);
        let batch_of = || -> Vec<T> {
            (start..end)
                .into_par_iter()
                .map(|i| map(i as u64))
                .collect()
        };
        let batch = match &pool {
            Some(pool) => pool.install(batch_of),
            None => batch_of(),
        };
        for (offset, item) in batch.into_iter().enumerate() {
            acc = fold(acc, (start + offset) as u64, item);
        }
        start = end;
    }
    acc
}

/// Collects `f(i)` for `i in 0..count`, in index order.
pub fn map_collect<T, F>(count: usize, workers: usize, map: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    map_fold(
        count,
        workers,
        Vec::with_capacity(count),
        map,
        |mut v, _, item| {
            v.push(item);
            v
        },
    )
}

/// Lazily generated `(r_k, ΔB_k)` pairs for one trajectory, identical to
/// materialising `brownian_lattice` and `sample_chain` with the same streams.
pub struct TrajectorySteps {
    increments: GaussianIncrements,
    chain: ChainSampler,
    remaining: usize,
    started: bool,
}

impl TrajectorySteps {
    pub fn new(p: &TransitionMatrix, r0: usize, steps: usize, seed: u64, index: u64) -> Self {
        TrajectorySteps {
            increments: GaussianIncrements::new(p.dt, StreamSpec::brownian(seed, index)),
            chain: ChainSampler::new(p, r0, StreamSpec::chain(seed, index)),
            remaining: steps,
            started: false,
        }
    }
}

impl Iterator for TrajectorySteps {
    type Item = (usize, f64);

    #[inline]
    fn next(&mut self) -> Option<(usize, f64)> {
        if self.remaining == 0 {
            return None;
        }
        if self.started {
            self.chain.step();
        } else {
            self.started = true;
        }
        self.remaining -= 1;
        let db = self.increments.next()?;
        Some((self.chain.current(), db))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}
