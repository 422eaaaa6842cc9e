//! Strong-error curves over nested step sizes and their log-log slope.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SwitchingLogisticModel;
use crate::runner;
use crate::schemes::{
    log_em_terminal, truncation_cap, Coefficients, ReferenceAccumulator, ReferenceKind,
    SchemeConfig, SchemeKind, Theta,
};
use crate::stochastic::{sample_chain, transition_matrix, GaussianIncrements, StreamSpec};

/// Levels whose cap was active on more than this fraction of steps are left
/// out of slope fits.
pub const CAP_SATURATION_LIMIT: f64 = 0.01;

/// How per-trajectory errors `|x(T) − X(T)|^p` are summarised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorNorm {
    /// `E|e|^p`
    #[default]
    Moment,
    /// `(E|e|^p)^{1/p}`, e.g. root-mean-square for `p = 2`
    Root,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongErrorSetup {
    pub dts: Vec<f64>,
    pub paths: usize,
    pub horizon: f64,
    pub exponent: f64,
    pub norm: ErrorNorm,
    pub seed: u64,
    pub cap_constant: f64,
    pub theta: Theta,
    /// Step of the shared Brownian lattice and of the reference solution.
    pub reference_dt: f64,
    pub reference: ReferenceKind,
    /// `Truncated` or `Plain`.
    pub scheme: SchemeKind,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEntry {
    pub dt: f64,
    pub error: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Fraction of all steps at this level on which the cap was active.
    pub cap_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub horizon: f64,
    pub exponent: f64,
    pub norm: ErrorNorm,
    pub seed: u64,
    pub entries: Vec<ErrorEntry>,
}

impl ErrorCurve {
    /// Columns `dt,error,stderr,n,cap_fraction`, full precision.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "dt,error,stderr,n,cap_fraction")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{}",
                e.dt, e.error, e.stderr, e.samples, e.cap_fraction
            )?;
        }
        Ok(())
    }

    /// `dt error` pairs, one per line.
    pub fn write_plot<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.entries {
            writeln!(out, "{} {}", e.dt, e.error)?;
        }
        Ok(())
    }

    /// Number of leading (coarsest) levels with cap saturation.
    pub fn saturated_levels(&self) -> usize {
        self.entries
            .iter()
            .take_while(|e| e.cap_fraction > CAP_SATURATION_LIMIT)
            .count()
    }
}

/// Number of `dt` steps in `span`, or an error if `dt` does not divide it.
pub fn steps_in(span: f64, dt: f64) -> Result<usize> {
    let ratio = span / dt;
    let n = ratio.round();
    if !(dt > 0.0) || n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::GridMismatch(format!(
            "step {dt} does not divide {span}"
        )));
    }
    Ok(n as usize)
}

/// Monte Carlo strong error of a log-EM scheme at each step size, all levels
/// driven by one Brownian lattice and one regime path per trajectory.
pub fn strong_error(
    model: &SwitchingLogisticModel,
    setup: &StrongErrorSetup,
) -> Result<ErrorCurve> {
    if setup.dts.is_empty() {
        return Err(Error::GridMismatch("no step sizes given".into()));
    }
    if setup.dts.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::GridMismatch(
            "step sizes must be strictly decreasing".into(),
        ));
    }
    if setup.paths < 2 {
        return Err(Error::invalid("M", "need at least two trajectories"));
    }
    if !(setup.exponent > 0.0) {
        return Err(Error::invalid("p", "error exponent must be positive"));
    }
    if !matches!(setup.scheme, SchemeKind::Truncated | SchemeKind::Plain) {
        return Err(Error::invalid(
            "scheme",
            "strong error is measured for log-EM schemes",
        ));
    }
    let n_fine = steps_in(setup.horizon, setup.reference_dt)?;
    let mut levels = Vec::with_capacity(setup.dts.len());
    for &dt in &setup.dts {
        steps_in(setup.horizon, dt)?;
        let factor = steps_in(dt, setup.reference_dt)
            .map_err(|_| Error::GridMismatch(format!("reference step does not divide {dt}")))?;
        let config = SchemeConfig::new(dt, setup.cap_constant, setup.theta, model)?;
        let cap = match setup.scheme {
            SchemeKind::Truncated => truncation_cap(&config),
            _ => f64::INFINITY,
        };
        levels.push((dt, factor, cap));
    }
    let reference_cap = match setup.reference {
        ReferenceKind::Quadrature => None,
        ReferenceKind::Finest => Some(truncation_cap(&SchemeConfig::new(
            setup.reference_dt,
            setup.cap_constant,
            setup.theta,
            model,
        )?)),
    };

    let coef = Coefficients::new(model);
    let p_fine = transition_matrix(model.generator(), setup.reference_dt)?;
    let z0 = model.x0().ln();
    let exponent = setup.exponent;

    let per_path = |j: u64| -> Result<Vec<(f64, usize)>> {
        let increments: Vec<f64> =
            GaussianIncrements::new(setup.reference_dt, StreamSpec::brownian(setup.seed, j))
                .take(n_fine)
                .collect();
        let chain = sample_chain(
            &p_fine,
            model.r0(),
            n_fine,
            StreamSpec::chain(setup.seed, j),
        );
        let states = &chain.states;
        let reference = match reference_cap {
            None => {
                let mut acc = ReferenceAccumulator::new(&coef, model.x0(), setup.reference_dt);
                for k in 0..n_fine {
                    acc.advance(states[k], increments[k]);
                }
                acc.log_state().exp()
            }
            Some(cap) => {
                let steps = states.iter().copied().zip(increments.iter().copied());
                log_em_terminal(&coef, z0, setup.reference_dt, cap, steps)?
                    .0
                    .exp()
            }
        };
        levels
            .iter()
            .map(|&(dt, factor, cap)| {
                let steps = states.iter().step_by(factor).copied().zip(
                    increments
                        .chunks_exact(factor)
                        .map(|c| c.iter().fold(0.0, |acc, v| acc + v)),
                );
                let (z, hits) = log_em_terminal(&coef, z0, dt, cap, steps)?;
                Ok(((reference - z.exp()).abs().powf(exponent), hits))
            })
            .collect()
    };

    let nlev = levels.len();
    let init: Result<(Vec<f64>, Vec<f64>, Vec<usize>)> =
        Ok((vec![0.0; nlev], vec![0.0; nlev], vec![0; nlev]));
    let (sum, sum_sq, hits) = runner::map_fold(
        setup.paths,
        setup.workers,
        init,
        per_path,
        |acc, _, item| {
            let (mut s, mut s2, mut h) = acc?;
            for (l, (e, c)) in item?.into_iter().enumerate() {
                s[l] += e;
                s2[l] += e * e;
                h[l] += c;
            }
            Ok((s, s2, h))
        },
    )?;

    let m = setup.paths as f64;
    let entries = levels
        .iter()
        .enumerate()
        .map(|(l, &(dt, factor, _))| {
            let mean = sum[l] / m;
            let var = ((sum_sq[l] - m * mean * mean) / (m - 1.0)).max(0.0);
            let se = (var / m).sqrt();
            let (error, stderr) = match setup.norm {
                ErrorNorm::Moment => (mean, se),
                ErrorNorm::Root => {
                    let root = mean.powf(1.0 / exponent);
                    let d = if mean > 0.0 {
                        root / (exponent * mean)
                    } else {
                        0.0
                    };
                    (root, se * d)
                }
            };
            let steps = (n_fine / factor) as f64;
            ErrorEntry {
                dt,
                error,
                stderr,
                samples: setup.paths,
                cap_fraction: hits[l] as f64 / (m * steps),
            }
        })
        .collect();
    Ok(ErrorCurve {
        horizon: setup.horizon,
        exponent,
        norm: setup.norm,
        seed: setup.seed,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub levels: usize,
}

/// Least squares of `ln error` on `ln dt`, after dropping the `drop_levels`
/// coarsest entries.
pub fn fit_slope(curve: &ErrorCurve, drop_levels: usize) -> Result<SlopeFit> {
    let used = curve.entries.get(drop_levels..).unwrap_or(&[]);
    if used.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "need at least 3 levels to fit a slope, {} remain",
            used.len()
        )));
    }
    if let Some(e) = used
        .iter()
        .find(|e| !(e.error > 0.0) || !e.error.is_finite())
    {
        return Err(Error::DegenerateInput(format!(
            "error at dt = {} is {}; a log-log fit needs positive errors",
            e.dt, e.error
        )));
    }
    let xs: Vec<f64> = used.iter().map(|e| e.dt.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|e| e.error.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        levels: used.len(),
    })
}

/// [`fit_slope`] that also skips cap-saturated coarse levels.
pub fn fit_slope_unsaturated(curve: &ErrorCurve, drop_levels: usize) -> Result<SlopeFit> {
    fit_slope(curve, drop_levels.max(curve.saturated_levels()))
}
