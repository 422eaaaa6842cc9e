//! Time-steppers for the switching logistic model.
//!
//! * truncated log-EM: Euler–Maruyama on `z = log x`, capped at
//!   `log(K·dt^{-θ})` after every step;
//! * plain log-EM: the same recursion without the cap;
//! * classical EM on `x` itself, which can lose positivity and blow up;
//! * the closed-form reference `x0·e^{A+S} / (1 + x0·∫a e^{A+S})` evaluated
//!   with left-point sums on the finest grid.
//!
//! All steppers take the regime sequence `r_0..r_n` and the increments
//! `ΔB_0..ΔB_{n-1}`; step `k` uses `r_k` and `ΔB_k`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SwitchingLogisticModel;
use crate::stochastic::{BrownianLattice, ChainPath};

/// Classical-EM values above this magnitude are treated as blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e150;
pub const DEFAULT_THETA: f64 = 0.4;
pub const DEFAULT_CAP_CONSTANT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta {
    Bounded(f64),
    /// Only meaningful without competition (`a ≡ 0`); the cap never binds.
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub dt: f64,
    pub cap_constant: f64,
    pub theta: Theta,
}

impl SchemeConfig {
    pub fn new(
        dt: f64,
        cap_constant: f64,
        theta: Theta,
        model: &SwitchingLogisticModel,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt < 1.0) {
            return Err(Error::invalid("dt", format!("{dt} is outside (0, 1)")));
        }
        let floor = model.x0().max(1.0);
        if !(cap_constant >= floor) || !cap_constant.is_finite() {
            return Err(Error::invalid(
                "K",
                format!("{cap_constant} is below max(x0, 1) = {floor}"),
            ));
        }
        match theta {
            Theta::Bounded(t) if !(t > 0.0 && t <= 0.5) => {
                return Err(Error::invalid("theta", format!("{t} is outside (0, 1/2]")));
            }
            Theta::Unbounded if model.params().max_a() > 0.0 => {
                return Err(Error::invalid(
                    "theta",
                    "unbounded theta requires zero competition in every regime",
                ));
            }
            _ => {}
        }
        Ok(SchemeConfig {
            dt,
            cap_constant,
            theta,
        })
    }

    /// `θ = 0.4` and `K = max(10, x0)`.
    pub fn with_defaults(dt: f64, model: &SwitchingLogisticModel) -> Result<Self> {
        Self::new(
            dt,
            DEFAULT_CAP_CONSTANT.max(model.x0()),
            Theta::Bounded(DEFAULT_THETA),
            model,
        )
    }

    /// Long-run experiments need `θ < 1/2` strictly.
    pub fn require_dynamics_preserving(&self) -> Result<()> {
        match self.theta {
            Theta::Bounded(t) if t >= 0.5 => Err(Error::invalid(
                "theta",
                "long-run experiments require theta < 1/2",
            )),
            _ => Ok(()),
        }
    }

    pub fn with_dt(&self, dt: f64, model: &SwitchingLogisticModel) -> Result<Self> {
        Self::new(dt, self.cap_constant, self.theta, model)
    }
}

/// Cap on the log-state, `log K − θ·log dt`.
pub fn truncation_cap(config: &SchemeConfig) -> f64 {
    match config.theta {
        Theta::Bounded(t) => config.cap_constant.ln() - t * config.dt.ln(),
        Theta::Unbounded => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Truncated,
    Plain,
    Classical,
    Reference,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Truncated => "truncated",
            SchemeKind::Plain => "plain",
            SchemeKind::Classical => "classical",
            SchemeKind::Reference => "reference",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truncated" => Ok(SchemeKind::Truncated),
            "plain" => Ok(SchemeKind::Plain),
            "classical" => Ok(SchemeKind::Classical),
            "reference" => Ok(SchemeKind::Reference),
            other => Err(Error::invalid(
                "scheme",
                format!("unknown scheme `{other}`"),
            )),
        }
    }
}

/// Which solution strong errors are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    /// Closed-form quotient evaluated by quadrature on the finest lattice.
    #[default]
    Quadrature,
    /// Truncated log-EM run on the finest lattice.
    Finest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemePath {
    pub kind: SchemeKind,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Log-state; `log|X|` for classical EM.
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub regimes: Vec<usize>,
    pub capped: Vec<bool>,
    pub cap_hits: usize,
    /// Index of the first classical-EM value beyond [`BLOWUP_THRESHOLD`].
    pub blowup: Option<usize>,
}

impl SchemePath {
    fn with_capacity(kind: SchemeKind, dt: f64, n: usize) -> Self {
        SchemePath {
            kind,
            dt,
            times: Vec::with_capacity(n + 1),
            z: Vec::with_capacity(n + 1),
            x: Vec::with_capacity(n + 1),
            regimes: Vec::with_capacity(n + 1),
            capped: Vec::with_capacity(n + 1),
            cap_hits: 0,
            blowup: None,
        }
    }

    fn push(&mut self, k: usize, r: usize, z: f64, x: f64, capped: bool) {
        self.times.push(k as f64 * self.dt);
        self.z.push(z);
        self.x.push(x);
        self.regimes.push(r);
        self.capped.push(capped);
        if capped {
            self.cap_hits += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn last_x(&self) -> f64 {
        *self.x.last().expect("paths always hold the initial state")
    }

    /// Columns `k,t,regime,z,x,cap_hit`; a classical-EM row that crossed the
    /// blow-up threshold carries `blowup` in the last column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,t,regime,z,x,cap_hit")?;
        for k in 0..self.len() {
            let flag = if self.blowup == Some(k) {
                "blowup"
            } else if self.capped[k] {
                "1"
            } else {
                "0"
            };
            writeln!(
                out,
                "{},{},{},{},{},{}",
                k, self.times[k], self.regimes[k], self.z[k], self.x[k], flag
            )?;
        }
        Ok(())
    }
}

fn check_lengths(
    model: &SwitchingLogisticModel,
    increments: &[f64],
    regimes: &[usize],
) -> Result<()> {
    if regimes.len() != increments.len() + 1 {
        return Err(Error::LengthMismatch {
            increments: increments.len(),
            regimes: regimes.len(),
        });
    }
    let m = model.regimes();
    if let Some(&r) = regimes.iter().find(|&&r| r >= m) {
        return Err(Error::invalid(
            "regimes",
            format!("state {r} is not below {m}"),
        ));
    }
    Ok(())
}

/// Per-regime `(β, a, σ)` gathered once so the inner loops index one table.
pub(crate) struct Coefficients {
    beta: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    sigma: Vec<f64>,
}

impl Coefficients {
    pub(crate) fn new(model: &SwitchingLogisticModel) -> Self {
        let p = model.params();
        Coefficients {
            beta: p.beta(),
            a: p.a().to_vec(),
            b: p.b().to_vec(),
            sigma: p.sigma().to_vec(),
        }
    }

    /// One log-EM step before truncation.
    #[inline]
    pub(crate) fn log_step(&self, z: f64, r: usize, dt: f64, db: f64) -> f64 {
        let a = self.a[r];
        let drift = if a == 0.0 {
            self.beta[r]
        } else {
            self.beta[r] - a * z.exp()
        };
        z + drift * dt + self.sigma[r] * db
    }
}

/// Terminal log-state and cap count of a log-EM run over `(r_k, ΔB_k)` pairs.
/// `cap = +∞` gives plain log-EM.
pub(crate) fn log_em_terminal(
    coef: &Coefficients,
    z0: f64,
    dt: f64,
    cap: f64,
    steps: impl Iterator<Item = (usize, f64)>,
) -> Result<(f64, usize)> {
    let mut z = z0;
    let mut hits = 0;
    for (k, (r, db)) in steps.enumerate() {
        let zbar = coef.log_step(z, r, dt, db);
        if zbar > cap {
            z = cap;
            hits += 1;
        } else {
            z = zbar;
        }
        if !z.is_finite() {
            return Err(Error::NonFiniteState { step: k + 1 });
        }
    }
    Ok((z, hits))
}

fn log_em_path(
    kind: SchemeKind,
    model: &SwitchingLogisticModel,
    dt: f64,
    cap: f64,
    increments: &[f64],
    regimes: &[usize],
) -> Result<SchemePath> {
    check_lengths(model, increments, regimes)?;
    let coef = Coefficients::new(model);
    let n = increments.len();
    let mut path = SchemePath::with_capacity(kind, dt, n);
    let mut z = model.x0().ln();
    path.push(0, regimes[0], z, z.exp(), false);
    for k in 0..n {
        let zbar = coef.log_step(z, regimes[k], dt, increments[k]);
        let capped = zbar > cap;
        z = if capped { cap } else { zbar };
        let x = z.exp();
        if !z.is_finite() || !x.is_finite() {
            return Err(Error::NonFiniteState { step: k + 1 });
        }
        path.push(k + 1, regimes[k + 1], z, x, capped);
    }
    Ok(path)
}

/// Truncated log-EM: `Z̄_{k+1} = Z_k + (β − a e^{Z_k})Δ + σΔB_k`,
/// `Z_{k+1} = min(Z̄_{k+1}, log(KΔ^{−θ}))`, `X_k = e^{Z_k}`.
pub fn truncated_log_em(
    model: &SwitchingLogisticModel,
    config: &SchemeConfig,
    increments: &[f64],
    regimes: &[usize],
) -> Result<SchemePath> {
    log_em_path(
        SchemeKind::Truncated,
        model,
        config.dt,
        truncation_cap(config),
        increments,
        regimes,
    )
}

/// Log-EM without truncation. `e^{Y}` may overflow, which is reported as
/// [`Error::NonFiniteState`].
pub fn plain_log_em(
    model: &SwitchingLogisticModel,
    config: &SchemeConfig,
    increments: &[f64],
    regimes: &[usize],
) -> Result<SchemePath> {
    log_em_path(
        SchemeKind::Plain,
        model,
        config.dt,
        f64::INFINITY,
        increments,
        regimes,
    )
}

/// Classical EM on `x`. Stops at the first step whose magnitude exceeds
/// [`BLOWUP_THRESHOLD`] and records it in `blowup`.
pub fn classical_em(
    model: &SwitchingLogisticModel,
    config: &SchemeConfig,
    increments: &[f64],
    regimes: &[usize],
) -> Result<SchemePath> {
    check_lengths(model, increments, regimes)?;
    let coef = Coefficients::new(model);
    let dt = config.dt;
    let n = increments.len();
    let mut path = SchemePath::with_capacity(SchemeKind::Classical, dt, n);
    let mut x = model.x0();
    path.push(0, regimes[0], x.abs().ln(), x, false);
    for k in 0..n {
        let r = regimes[k];
        x += x * ((coef.b[r] - coef.a[r] * x) * dt + coef.sigma[r] * increments[k]);
        path.push(k + 1, regimes[k + 1], x.abs().ln(), x, false);
        if !(x.abs() <= BLOWUP_THRESHOLD) {
            path.blowup = Some(k + 1);
            break;
        }
    }
    Ok(path)
}

/// First step at which classical EM crosses the blow-up threshold, without
/// storing the path.
pub(crate) fn classical_em_blowup_step(
    coef: &Coefficients,
    x0: f64,
    dt: f64,
    steps: impl Iterator<Item = (usize, f64)>,
) -> Option<usize> {
    let mut x = x0;
    for (k, (r, db)) in steps.enumerate() {
        x += x * ((coef.b[r] - coef.a[r] * x) * dt + coef.sigma[r] * db);
        if !(x.abs() <= BLOWUP_THRESHOLD) {
            return Some(k + 1);
        }
    }
    None
}

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log(1 + e^u)`.
#[inline]
fn softplus(u: f64) -> f64 {
    if u > 35.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Incremental evaluation of the closed-form solution. Works in logs so
/// neither growing nor collapsing paths overflow:
/// `log x_k = L_k − log(1 + Σ_{j<k} a(r_j) e^{L_j} Δ)` with
/// `L_k = log x0 + Σ_{j<k} (β(r_j)Δ + σ(r_j)ΔB_j)`.
pub(crate) struct ReferenceAccumulator<'a> {
    coef: &'a Coefficients,
    dt: f64,
    log_lin: f64,
    log_competition: f64,
}

impl<'a> ReferenceAccumulator<'a> {
    pub(crate) fn new(coef: &'a Coefficients, x0: f64, dt: f64) -> Self {
        ReferenceAccumulator {
            coef,
            dt,
            log_lin: x0.ln(),
            log_competition: f64::NEG_INFINITY,
        }
    }

    #[inline]
    pub(crate) fn log_state(&self) -> f64 {
        self.log_lin - softplus(self.log_competition)
    }

    #[inline]
    pub(crate) fn advance(&mut self, r: usize, db: f64) {
        let a = self.coef.a[r];
        if a > 0.0 {
            self.log_competition =
                log_add_exp(self.log_competition, (a * self.dt).ln() + self.log_lin);
        }
        // same association as the log-EM step, so a ≡ 0 reproduces it bit for bit
        self.log_lin = self.log_lin + self.coef.beta[r] * self.dt + self.coef.sigma[r] * db;
    }
}

/// Closed-form solution on the lattice grid, regime frozen on each cell.
pub fn exact_reference(
    model: &SwitchingLogisticModel,
    lattice: &BrownianLattice,
    chain: &ChainPath,
) -> Result<SchemePath> {
    check_lengths(model, &lattice.increments, &chain.states)?;
    let coef = Coefficients::new(model);
    let dt = lattice.dt_fine;
    let n = lattice.len();
    let mut path = SchemePath::with_capacity(SchemeKind::Reference, dt, n);
    let mut acc = ReferenceAccumulator::new(&coef, model.x0(), dt);
    let z = acc.log_state();
    path.push(0, chain.states[0], z, z.exp(), false);
    for k in 0..n {
        acc.advance(chain.states[k], lattice.increments[k]);
        let z = acc.log_state();
        path.push(k + 1, chain.states[k + 1], z, z.exp(), false);
    }
    Ok(path)
}
