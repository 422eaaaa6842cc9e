//! Seedable randomness for trajectories.
//!
//! Every trajectory owns two independent ChaCha8 streams, one for Brownian
//! increments and one for the regime chain, selected purely from
//! `(master_seed, trajectory_index, purpose)`. Nothing here depends on
//! scheduling, so trajectories can be generated on any worker in any order.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::Generator;

const ROW_SUM_TOL: f64 = 1e-12;
const MAX_SQUARINGS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Brownian = 0,
    Chain = 1,
}

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSpec {
    pub master_seed: u64,
    pub trajectory_index: u64,
    pub purpose: Purpose,
}

impl StreamSpec {
    pub fn new(master_seed: u64, trajectory_index: u64, purpose: Purpose) -> Self {
        StreamSpec {
            master_seed,
            trajectory_index,
            purpose,
        }
    }

    pub fn brownian(master_seed: u64, trajectory_index: u64) -> Self {
        Self::new(master_seed, trajectory_index, Purpose::Brownian)
    }

    pub fn chain(master_seed: u64, trajectory_index: u64) -> Self {
        Self::new(master_seed, trajectory_index, Purpose::Chain)
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        assert!(
            self.trajectory_index < 1 << 56,
            "trajectory index {} exceeds the stream id space",
            self.trajectory_index
        );
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream((self.trajectory_index << 8) | self.purpose as u64);
        rng
    }
}

/// Endless `Normal(0, dt)` increments drawn from a stream.
pub struct GaussianIncrements {
    rng: ChaCha8Rng,
    sd: f64,
}

impl GaussianIncrements {
    pub fn new(dt: f64, stream: StreamSpec) -> Self {
        GaussianIncrements {
            rng: stream.rng(),
            sd: dt.sqrt(),
        }
    }
}

impl Iterator for GaussianIncrements {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        let z: f64 = self.rng.sample(StandardNormal);
        Some(self.sd * z)
    }
}

/// Brownian increments on the finest grid of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianLattice {
    pub dt_fine: f64,
    pub increments: Vec<f64>,
}

impl BrownianLattice {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// CSV dump with columns `index,time,value`; `time` is the left end of
    /// the increment's cell.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,time,value")?;
        for (k, v) in self.increments.iter().enumerate() {
            writeln!(out, "{},{},{}", k, k as f64 * self.dt_fine, v)?;
        }
        Ok(())
    }
}

pub fn brownian_lattice(
    dt_fine: f64,
    n_fine: usize,
    stream: StreamSpec,
) -> Result<BrownianLattice> {
    if !(dt_fine > 0.0 && dt_fine.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    Ok(BrownianLattice {
        dt_fine,
        increments: GaussianIncrements::new(dt_fine, stream)
            .take(n_fine)
            .collect(),
    })
}

/// Sums consecutive blocks of `factor` fine increments, in ascending index
/// order, so nested coarsenings agree exactly.
pub fn coarsen(lattice: &BrownianLattice, factor: usize) -> Result<Vec<f64>> {
    coarsen_slice(&lattice.increments, factor)
}

pub(crate) fn coarsen_slice(fine: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 || !fine.len().is_multiple_of(factor) {
        return Err(Error::NonDivisor {
            factor,
            len: fine.len(),
        });
    }
    if factor == 1 {
        return Ok(fine.to_vec());
    }
    Ok(fine
        .chunks_exact(factor)
        .map(|c| c.iter().fold(0.0, |acc, v| acc + v))
        .collect())
}

/// One-step transition probabilities `exp(dt·Γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub dt: f64,
    p: Matrix,
}

impl TransitionMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn regimes(&self) -> usize {
        self.p.dim()
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
/// The argument is scaled to infinity-norm at most 1/2 and the series is cut
/// once the remainder bound drops below 1e-16.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    let n = a.dim();
    let norm = a.norm_inf();
    if !norm.is_finite() {
        return Err(Error::NumericalOverflow { norm });
    }
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
        if squarings > MAX_SQUARINGS {
            return Err(Error::NumericalOverflow { norm });
        }
    }
    let scaled = a.scaled(0.5f64.powi(squarings as i32));
    let s_norm = scaled.norm_inf();

    // remainder of the series after degree d is at most 2·‖A‖^{d+1}/(d+1)!
    let mut degree = 1usize;
    let mut bound = s_norm * s_norm / 2.0;
    while 2.0 * bound > 1e-16 && degree < 40 {
        degree += 1;
        bound *= s_norm / (degree + 1) as f64;
    }

    // Horner: I + A(I + A/2(I + A/3(...)))
    let id = Matrix::identity(n);
    let mut acc = id.clone();
    for k in (1..=degree).rev() {
        acc = id.add(&scaled.mul(&acc).scaled(1.0 / k as f64));
    }
    for _ in 0..squarings {
        acc = acc.mul(&acc);
    }
    Ok(acc)
}

pub fn transition_matrix(gen: &Generator, dt: f64) -> Result<TransitionMatrix> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    let mut p = expm(&gen.matrix().scaled(dt))?;
    let m = p.dim();
    for i in 0..m {
        let mut sum = 0.0;
        for j in 0..m {
            let v = p[(i, j)].max(0.0);
            p[(i, j)] = v;
            sum += v;
        }
        if !sum.is_finite() || (sum - 1.0).abs() > 1e-8 {
            return Err(Error::NumericalOverflow { norm: sum });
        }
        for j in 0..m {
            p[(i, j)] /= sum;
        }
    }
    debug_assert!((0..m).all(|i| (p.row(i).iter().sum::<f64>() - 1.0).abs() <= ROW_SUM_TOL));
    Ok(TransitionMatrix { dt, p })
}

/// Regime indices `r_k` on the grid `t_k = k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPath {
    pub dt: f64,
    pub states: Vec<usize>,
}

impl ChainPath {
    /// Regime observed every `factor`-th grid point, for a coarser grid.
    pub fn stride(&self, factor: usize) -> Result<ChainPath> {
        let steps = self.states.len().saturating_sub(1);
        if factor == 0 || !steps.is_multiple_of(factor) {
            return Err(Error::NonDivisor { factor, len: steps });
        }
        Ok(ChainPath {
            dt: self.dt * factor as f64,
            states: self.states.iter().step_by(factor).copied().collect(),
        })
    }

    /// Fraction of grid points spent in each regime.
    pub fn occupation(&self, regimes: usize) -> Vec<f64> {
        let mut counts = vec![0usize; regimes];
        for &s in &self.states {
            counts[s] += 1;
        }
        let n = self.states.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,time,value")?;
        for (k, s) in self.states.iter().enumerate() {
            writeln!(out, "{},{},{}", k, k as f64 * self.dt, s)?;
        }
        Ok(())
    }
}

/// Steps a regime chain forward one grid cell at a time, one uniform per step.
pub struct ChainSampler {
    cumulative: Vec<Vec<f64>>,
    rng: Option<ChaCha8Rng>,
    state: usize,
}

impl ChainSampler {
    pub fn new(p: &TransitionMatrix, r0: usize, stream: StreamSpec) -> Self {
        let m = p.regimes();
        let cumulative = (0..m)
            .map(|i| {
                let mut acc = 0.0;
                p.matrix()
                    .row(i)
                    .iter()
                    .map(|v| {
                        acc += v;
                        acc
                    })
                    .collect()
            })
            .collect();
        ChainSampler {
            cumulative,
            // a single regime never consumes randomness
            rng: (m > 1).then(|| stream.rng()),
            state: r0,
        }
    }

    pub fn current(&self) -> usize {
        self.state
    }

    /// Advances one step and returns the new state.
    #[inline]
    pub fn step(&mut self) -> usize {
        if let Some(rng) = self.rng.as_mut() {
            let u: f64 = rng.random();
            let row = &self.cumulative[self.state];
            // first index whose cumulative mass exceeds u; ties go to the lower index
            let mut next = row.len() - 1;
            for (j, &c) in row.iter().enumerate() {
                if u < c {
                    next = j;
                    break;
                }
            }
            if next == row.len() - 1 && !(u < row[next]) {
                // rounding left u above the final cumulative sum: take the last reachable state
                let probs = |j: usize| if j == 0 { row[0] } else { row[j] - row[j - 1] };
                next = (0..row.len())
                    .rev()
                    .find(|&j| probs(j) > 0.0)
                    .unwrap_or(self.state);
            }
            self.state = next;
        }
        self.state
    }
}

pub fn sample_chain(p: &TransitionMatrix, r0: usize, n: usize, stream: StreamSpec) -> ChainPath {
    let mut sampler = ChainSampler::new(p, r0, stream);
    let mut states = Vec::with_capacity(n + 1);
    states.push(r0);
    for _ in 0..n {
        states.push(sampler.step());
    }
    ChainPath { dt: p.dt, states }
}
