//! Long-run Monte Carlo estimators over independent trajectories.

use crate::analysis::convergence::steps_in;
use crate::error::{Error, Result};
use crate::model::SwitchingLogisticModel;
use crate::runner::{self, TrajectorySteps};
use crate::schemes::{
    classical_em_blowup_step, truncation_cap, Coefficients, SchemeConfig, SchemeKind, SchemePath,
    BLOWUP_THRESHOLD,
};
use crate::stochastic::transition_matrix;

/// `log X_N / (N·Δ)` at the final index.
pub fn lyapunov_estimate(path: &SchemePath) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::DegenerateInput(
            "path needs at least two points".into(),
        ));
    }
    let n = path.len() - 1;
    Ok(path.z[n] / (n as f64 * path.dt))
}

/// Left-point Riemann average `(1/N)·Σ_{k<N} X_k`.
pub fn time_average(path: &SchemePath) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::DegenerateInput(
            "path needs at least two points".into(),
        ));
    }
    let n = path.len() - 1;
    Ok(path.x[..n].iter().sum::<f64>() / n as f64)
}

/// Common inputs of the ensemble estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ensemble {
    pub paths: usize,
    pub horizon: f64,
    pub seed: u64,
    pub workers: usize,
}

fn log_cap(kind: SchemeKind, config: &SchemeConfig) -> Result<f64> {
    match kind {
        SchemeKind::Truncated => Ok(truncation_cap(config)),
        SchemeKind::Plain => Ok(f64::INFINITY),
        other => Err(Error::invalid(
            "scheme",
            format!("`{other}` is not a log-EM scheme"),
        )),
    }
}

/// Terminal log-states `Z_N` of `paths` independent log-EM trajectories,
/// ordered by trajectory index.
pub fn terminal_log_states(
    model: &SwitchingLogisticModel,
    config: &SchemeConfig,
    scheme: SchemeKind,
    ensemble: &Ensemble,
) -> Result<Vec<f64>> {
    let cap = log_cap(scheme, config)?;
    let n = steps_in(ensemble.horizon, config.dt)?;
    let p = transition_matrix(model.generator(), config.dt)?;
    let coef = Coefficients::new(model);
    let z0 = model.x0().ln();
    let results = runner::map_collect(ensemble.paths, ensemble.workers, |j| {
        let steps = TrajectorySteps::new(&p, model.r0(), n, ensemble.seed, j);
        crate::schemes::log_em_terminal(&coef, z0, config.dt, cap, steps).map(|(z, _)| z)
    });
    results.into_iter().collect()
}

/// Samples of `X(T)` across independent trajectories.
pub fn harvest_terminal(
    model: &SwitchingLogisticModel,
    config: &SchemeConfig,
    scheme: SchemeKind,
    ensemble: &Ensemble,
) -> Result<Vec<f64>> {
    Ok(terminal_log_states(model, config, scheme, ensemble)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// Per-trajectory Lyapunov estimates `Z_N / T`.
pub fn lyapunov_ensemble(
    model: &SwitchingLogisticModel,
    config: &SchemeConfig,
    ensemble: &Ensemble,
) -> Result<Vec<f64>> {
    Ok(
        terminal_log_states(model, config, SchemeKind::Truncated, ensemble)?
            .into_iter()
            .map(|z| z / ensemble.horizon)
            .collect(),
    )
}

/// Per-trajectory left-point time averages of the truncated scheme over
/// `[0, T]`, computed without storing paths.
pub fn time_average_ensemble(
    model: &SwitchingLogisticModel,
    config: &SchemeConfig,
    ensemble: &Ensemble,
) -> Result<Vec<f64>> {
    let n = steps_in(ensemble.horizon, config.dt)?;
    let p = transition_matrix(model.generator(), config.dt)?;
    let coef = Coefficients::new(model);
    let cap = truncation_cap(config);
    let z0 = model.x0().ln();
    Ok(runner::map_collect(ensemble.paths, ensemble.workers, |j| {
        let mut z = z0;
        let mut sum = 0.0;
        for (r, db) in TrajectorySteps::new(&p, model.r0(), n, ensemble.seed, j) {
            sum += z.exp();
            z = coef.log_step(z, r, config.dt, db).min(cap);
        }
        sum / n as f64
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub exponent: f64,
    pub times: Vec<f64>,
    /// Sample mean of `X_k^p`.
    pub positive: Vec<f64>,
    /// Sample mean of `X_k^{-p}`.
    pub negative: Vec<f64>,
}

impl MomentEstimate {
    /// Running supremum of `positive`.
    pub fn running_sup(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.positive
            .iter()
            .map(|&v| {
                best = best.max(v);
                best
            })
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,mean_pos,mean_neg")?;
        for k in 0..self.times.len() {
            writeln!(
                out,
                "{},{},{}",
                self.times[k], self.positive[k], self.negative[k]
            )?;
        }
        Ok(())
    }
}

/// Sample means of `X_k^p` and `X_k^{-p}` for the truncated scheme at every
/// grid time.
pub fn moment_estimate(
    model: &SwitchingLogisticModel,
    config: &SchemeConfig,
    ensemble: &Ensemble,
    exponent: f64,
) -> Result<MomentEstimate> {
    if !(exponent > 0.0) {
        return Err(Error::invalid("p", "moment exponent must be positive"));
    }
    if ensemble.paths < 2 {
        return Err(Error::invalid("M", "need at least two trajectories"));
    }
    let n = steps_in(ensemble.horizon, config.dt)?;
    let p = transition_matrix(model.generator(), config.dt)?;
    let coef = Coefficients::new(model);
    let cap = truncation_cap(config);
    let z0 = model.x0().ln();

    let per_path = |j: u64| -> Vec<f64> {
        let mut zs = Vec::with_capacity(n + 1);
        let mut z = z0;
        zs.push(z);
        for (r, db) in TrajectorySteps::new(&p, model.r0(), n, ensemble.seed, j) {
            z = coef.log_step(z, r, config.dt, db).min(cap);
            zs.push(z);
        }
        zs
    };
    let init = (vec![0.0; n + 1], vec![0.0; n + 1]);
    let (pos, neg) = runner::map_fold(
        ensemble.paths,
        ensemble.workers,
        init,
        per_path,
        |(mut pos, mut neg), _, zs| {
            for (k, z) in zs.into_iter().enumerate() {
                pos[k] += (exponent * z).exp();
                neg[k] += (-exponent * z).exp();
            }
            (pos, neg)
        },
    );
    let m = ensemble.paths as f64;
    Ok(MomentEstimate {
        exponent,
        times: (0..=n).map(|k| k as f64 * config.dt).collect(),
        positive: pos.into_iter().map(|s| s / m).collect(),
        negative: neg.into_iter().map(|s| s / m).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    pub scheme: SchemeKind,
    pub paths: usize,
    /// First step beyond the blow-up threshold, per trajectory.
    pub first_steps: Vec<Option<usize>>,
}

impl BlowupReport {
    pub fn blown(&self) -> usize {
        self.first_steps.iter().filter(|s| s.is_some()).count()
    }

    pub fn fraction(&self) -> f64 {
        self.blown() as f64 / self.paths as f64
    }

    /// `(first step, count)` pairs sorted by step.
    pub fn step_histogram(&self) -> Vec<(usize, usize)> {
        let mut steps: Vec<usize> = self.first_steps.iter().flatten().copied().collect();
        steps.sort_unstable();
        let mut out: Vec<(usize, usize)> = Vec::new();
        for s in steps {
            match out.last_mut() {
                Some((last, c)) if *last == s => *c += 1,
                _ => out.push((s, 1)),
            }
        }
        out
    }
}

/// Fraction of trajectories whose state magnitude exceeds the blow-up
/// threshold before `T`. Classical EM is the interesting case; the log
/// schemes are accepted for comparison.
pub fn blowup_frequency(
    model: &SwitchingLogisticModel,
    config: &SchemeConfig,
    scheme: SchemeKind,
    ensemble: &Ensemble,
) -> Result<BlowupReport> {
    if ensemble.paths == 0 {
        return Err(Error::invalid("M", "need at least one trajectory"));
    }
    let n = steps_in(ensemble.horizon, config.dt)?;
    let p = transition_matrix(model.generator(), config.dt)?;
    let coef = Coefficients::new(model);
    let z0 = model.x0().ln();
    let log_threshold = BLOWUP_THRESHOLD.ln();
    let cap = match scheme {
        SchemeKind::Classical => f64::INFINITY,
        other => log_cap(other, config)?,
    };
    let first_steps = runner::map_collect(ensemble.paths, ensemble.workers, |j| {
        let steps = TrajectorySteps::new(&p, model.r0(), n, ensemble.seed, j);
        if scheme == SchemeKind::Classical {
            return classical_em_blowup_step(&coef, model.x0(), config.dt, steps);
        }
        let mut z = z0;
        for (k, (r, db)) in steps.enumerate() {
            z = coef.log_step(z, r, config.dt, db).min(cap);
            if !(z <= log_threshold) {
                return Some(k + 1);
            }
        }
        None
    });
    Ok(BlowupReport {
        scheme,
        paths: ensemble.paths,
        first_steps,
    })
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
