//! The regime-switching logistic model
//! `dx = x[(b(r) - a(r)x)dt + σ(r)dB]`, its Markov-chain generator, and the
//! long-run classification driven by the chain's stationary distribution.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Default threshold used to decide whether `πa` or `πβ` is zero.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-12;

const ROW_SUM_TOL: f64 = 1e-12;

/// Per-regime coefficients: growth rate `b`, competition `a` and noise `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeParams {
    b: Vec<f64>,
    a: Vec<f64>,
    sigma: Vec<f64>,
}

impl RegimeParams {
    pub fn new(b: Vec<f64>, a: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::invalid("b", "at least one regime is required"));
        }
        let m = b.len();
        if a.len() != m {
            return Err(Error::invalid(
                "a",
                format!("expected {m} entries, found {}", a.len()),
            ));
        }
        if sigma.len() != m {
            return Err(Error::invalid(
                "sigma",
                format!("expected {m} entries, found {}", sigma.len()),
            ));
        }
        for (key, v) in [("b", &b), ("a", &a), ("sigma", &sigma)] {
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::invalid(key, format!("entry {i} is not finite")));
            }
        }
        for (key, v) in [("b", &b), ("a", &a)] {
            if let Some(i) = v.iter().position(|&x| x < 0.0) {
                return Err(Error::invalid(key, format!("entry {i} is negative")));
            }
        }
        Ok(RegimeParams { b, a, sigma })
    }

    pub fn regimes(&self) -> usize {
        self.b.len()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Drift of `log x` in each regime: `b - σ²/2`.
    pub fn beta(&self) -> Vec<f64> {
        self.b
            .iter()
            .zip(&self.sigma)
            .map(|(b, s)| b - 0.5 * s * s)
            .collect()
    }

    pub fn max_a(&self) -> f64 {
        self.a.iter().copied().fold(0.0, f64::max)
    }
}

/// Transition-rate matrix of the regime chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    q: Matrix,
}

impl Generator {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let q = Matrix::from_rows(&rows)
            .ok_or_else(|| Error::invalid("generator", "must be a square matrix"))?;
        if q.dim() == 0 {
            return Err(Error::invalid("generator", "must have at least one row"));
        }
        for i in 0..q.dim() {
            let row = q.row(i);
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(
                    "generator",
                    format!("row {i} has a non-finite entry"),
                ));
            }
            if let Some(j) = (0..row.len()).find(|&j| j != i && row[j] < 0.0) {
                return Err(Error::invalid(
                    "generator",
                    format!("off-diagonal entry ({i},{j}) is negative"),
                ));
            }
            let sum: f64 = row.iter().sum();
            let scale = row.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            if sum.abs() > ROW_SUM_TOL * scale {
                return Err(Error::invalid(
                    "generator",
                    format!("row {i} sums to {sum:e}, expected 0"),
                ));
            }
        }
        Ok(Generator { q })
    }

    pub fn regimes(&self) -> usize {
        self.q.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.q
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }

    /// True when the graph of positive off-diagonal rates is strongly
    /// connected (state 0 reaches everything, and everything reaches 0).
    pub fn is_irreducible(&self) -> bool {
        let m = self.regimes();
        let reach = |forward: bool| {
            let mut seen = vec![false; m];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(i) = queue.pop_front() {
                for j in 0..m {
                    let rate = if forward {
                        self.q[(i, j)]
                    } else {
                        self.q[(j, i)]
                    };
                    if j != i && rate > 0.0 && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }
}

/// Solves `πΓ = 0`, `Σπ = 1` by replacing the last equation of `Γᵀπ = 0`
/// with the normalisation row.
pub fn stationary_distribution(gen: &Generator) -> Result<Vec<f64>> {
    if !gen.is_irreducible() {
        return Err(Error::NonIrreducible);
    }
    let m = gen.regimes();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let mut system = gen.matrix().transpose();
    for j in 0..m {
        system[(m - 1, j)] = 1.0;
    }
    let mut rhs = vec![0.0; m];
    rhs[m - 1] = 1.0;
    let pi = system.solve(&rhs).ok_or(Error::SingularSystem)?;
    if pi.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(pi)
}

/// `Σ π_i c_i`.
pub fn pi_weighted(pi: &[f64], c: &[f64]) -> Result<f64> {
    if pi.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: pi.len(),
            found: c.len(),
        });
    }
    Ok(pi.iter().zip(c).map(|(p, v)| p * v).sum())
}

/// JSON form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    pub sigma: Vec<f64>,
    pub generator: Vec<Vec<f64>>,
    pub x0: f64,
    #[serde(default)]
    pub r0: usize,
}

/// A fully validated regime-switching logistic model with its initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingLogisticModel {
    params: RegimeParams,
    generator: Generator,
    x0: f64,
    r0: usize,
}

impl SwitchingLogisticModel {
    pub fn new(params: RegimeParams, generator: Generator, x0: f64, r0: usize) -> Result<Self> {
        let m = params.regimes();
        if generator.regimes() != m {
            return Err(Error::invalid(
                "generator",
                format!("expected {m}x{m}, found {0}x{0}", generator.regimes()),
            ));
        }
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::invalid(
                "x0",
                "initial population must be positive and finite",
            ));
        }
        if r0 >= m {
            return Err(Error::invalid(
                "r0",
                format!("regime index must be below {m}"),
            ));
        }
        Ok(SwitchingLogisticModel {
            params,
            generator,
            x0,
            r0,
        })
    }

    /// Single-regime model (no switching).
    pub fn scalar(b: f64, a: f64, sigma: f64, x0: f64) -> Result<Self> {
        Self::new(
            RegimeParams::new(vec![b], vec![a], vec![sigma])?,
            Generator::new(vec![vec![0.0]])?,
            x0,
            0,
        )
    }

    pub fn from_config(cfg: &ModelConfig) -> Result<Self> {
        let params = RegimeParams::new(cfg.b.clone(), cfg.a.clone(), cfg.sigma.clone())?;
        let generator = Generator::new(cfg.generator.clone())?;
        Self::new(params, generator, cfg.x0, cfg.r0)
    }

    pub fn to_config(&self) -> ModelConfig {
        ModelConfig {
            b: self.params.b.clone(),
            a: self.params.a.clone(),
            sigma: self.params.sigma.clone(),
            generator: self.generator.matrix().rows(),
            x0: self.x0,
            r0: self.r0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_str(text)?;
        Self::from_config(&cfg)
    }

    pub fn params(&self) -> &RegimeParams {
        &self.params
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn r0(&self) -> usize {
        self.r0
    }

    pub fn regimes(&self) -> usize {
        self.params.regimes()
    }

    pub fn with_initial(&self, x0: f64, r0: usize) -> Result<Self> {
        Self::new(self.params.clone(), self.generator.clone(), x0, r0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsKind {
    Permanent,
    Extinct,
    ExponentialGrowth,
    Indeterminate,
}

impl fmt::Display for DynamicsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DynamicsKind::Permanent => "Permanent",
            DynamicsKind::Extinct => "Extinct",
            DynamicsKind::ExponentialGrowth => "ExponentialGrowth",
            DynamicsKind::Indeterminate => "Indeterminate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsClass {
    pub kind: DynamicsKind,
    pub pi: Vec<f64>,
    pub pi_a: f64,
    pub pi_beta: f64,
}

/// Long-run behaviour from the signs of `πa` and `πβ`.
pub fn classify(model: &SwitchingLogisticModel, tol: f64) -> Result<DynamicsClass> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let pi = stationary_distribution(model.generator())?;
    let pi_a = pi_weighted(&pi, model.params().a())?;
    let pi_beta = pi_weighted(&pi, &model.params().beta())?;
    let kind = if pi_beta.abs() <= tol {
        DynamicsKind::Indeterminate
    } else if pi_beta < 0.0 {
        DynamicsKind::Extinct
    } else if pi_a > tol {
        DynamicsKind::Permanent
    } else {
        DynamicsKind::ExponentialGrowth
    };
    Ok(DynamicsClass {
        kind,
        pi,
        pi_a,
        pi_beta,
    })
}
