//! Experiment configuration and the subcommands of the `logswitch` binary.
//!
//! Every command reads one JSON experiment file, fans trajectories out over a
//! worker pool, and writes its files from a single thread once the reduction
//! is complete.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::convergence::steps_in;
use crate::analysis::{
    blowup_frequency, cdf_distance, default_bin_count, empirical_density, fit_slope,
    gamma_stationary, harvest_terminal, ks_statistic, lyapunov_ensemble, mean_stderr,
    moment_estimate, strong_error, time_average_ensemble, EmpiricalDistribution, Ensemble,
    ErrorNorm, StrongErrorSetup,
};
use crate::error::{Error, Result};
use crate::model::{classify, ModelConfig, SwitchingLogisticModel, DEFAULT_CLASSIFY_TOL};
use crate::schemes::{
    classical_em, exact_reference, plain_log_em, truncated_log_em, ReferenceKind, SchemeConfig,
    SchemeKind, Theta, DEFAULT_CAP_CONSTANT, DEFAULT_THETA,
};
use crate::stochastic::{brownian_lattice, sample_chain, transition_matrix, StreamSpec};

/// Version written to and accepted from experiment files.
pub const CONFIG_VERSION: u32 = 1;

/// Environment variable consulted for the master seed.
pub const SEED_ENV: &str = "LOGSWITCH_SEED";

const DEFAULT_HORIZON: f64 = 100.0;
const DEFAULT_DT: f64 = 0.02;
const DEFAULT_PATHS: usize = 1000;
const DEFAULT_OUT: &str = "out";
/// Reference lattice is this many times finer than the finest level by default.
const DEFAULT_REFERENCE_REFINEMENT: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaWord {
    Unbounded,
}

/// `theta` is a number in `(0, 1/2]` or the word `"unbounded"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Value(f64),
    Word(ThetaWord),
}

impl From<ThetaSpec> for Theta {
    fn from(t: ThetaSpec) -> Theta {
        match t {
            ThetaSpec::Value(v) => Theta::Bounded(v),
            ThetaSpec::Word(ThetaWord::Unbounded) => Theta::Unbounded,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<OneOrMany<f64>>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub cap_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<OneOrMany<SchemeKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<ErrorNorm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_levels: Option<usize>,
    /// Force (`true`) or suppress (`false`) the Gamma comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    /// Whitespace-separated `x y` pairs for external plotting.
    Plot,
    /// Debug dumps of the Brownian lattice and the regime path.
    Lattice,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<OutputFormat>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    /// Path of a separate model file, relative to the experiment file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<PathBuf>,
    #[serde(default)]
    pub scheme: SchemeBlock,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        if cfg.spec_version != CONFIG_VERSION {
            return Err(Error::invalid(
                "spec_version",
                format!(
                    "unsupported version {}, expected {CONFIG_VERSION}",
                    cfg.spec_version
                ),
            ));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

/// Settings supplied on the command line; they win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Flag or environment value, already merged by the argument parser.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: usize,
}

/// A loaded, validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    /// Effective configuration: inline model, resolved seed.
    pub config: ExperimentConfig,
    pub model: SwitchingLogisticModel,
    /// Step sizes, strictly decreasing.
    pub dts: Vec<f64>,
    /// Scheme settings at `dts[0]`.
    pub scheme: SchemeConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub workers: usize,
}

impl Experiment {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_config(ExperimentConfig::from_json(&text)?, base, overrides)
    }

    /// Validates `cfg`; `base` anchors a relative `model_file`.
    pub fn from_config(
        mut cfg: ExperimentConfig,
        base: &Path,
        overrides: &Overrides,
    ) -> Result<Self> {
        let model_cfg = match (cfg.model.take(), cfg.model_file.take()) {
            (Some(m), None) => m,
            (None, Some(file)) => {
                let full = base.join(&file);
                if !full.is_file() {
                    return Err(Error::invalid(
                        "model_file",
                        format!("{} does not exist", full.display()),
                    ));
                }
                serde_json::from_str(&fs::read_to_string(full)?)?
            }
            (Some(_), Some(_)) => {
                return Err(Error::invalid(
                    "model",
                    "give either `model` or `model_file`, not both",
                ))
            }
            (None, None) => return Err(Error::invalid("model", "missing model block")),
        };
        let model = SwitchingLogisticModel::from_config(&model_cfg)?;
        cfg.model = Some(model.to_config());

        let dts = cfg
            .scheme
            .dt
            .as_ref()
            .map(OneOrMany::to_vec)
            .unwrap_or_else(|| vec![DEFAULT_DT]);
        if dts.is_empty() {
            return Err(Error::invalid("dt", "step-size list is empty"));
        }
        if dts.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::invalid(
                "dt",
                "step sizes must be strictly decreasing",
            ));
        }
        let cap_constant = cfg
            .scheme
            .cap_constant
            .unwrap_or_else(|| DEFAULT_CAP_CONSTANT.max(model.x0()));
        let theta: Theta = cfg
            .scheme
            .theta
            .map(Theta::from)
            .unwrap_or(Theta::Bounded(DEFAULT_THETA));
        let mut scheme = None;
        for &dt in &dts {
            let c = SchemeConfig::new(dt, cap_constant, theta, &model)?;
            scheme.get_or_insert(c);
        }
        let scheme = scheme.expect("at least one dt");

        let run = &cfg.run;
        if let Some(t) = run.horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid("T", "horizon must be positive and finite"));
            }
        }
        if run.paths == Some(0) {
            return Err(Error::invalid("M", "need at least one trajectory"));
        }
        if let Some(p) = run.p {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::invalid("p", "exponent must be positive"));
            }
        }
        if let Some(r) = run.reference_dt {
            if !(r > 0.0 && r <= dts[dts.len() - 1]) {
                return Err(Error::invalid(
                    "reference_dt",
                    "must be positive and no coarser than the finest dt",
                ));
            }
        }
        if run.bins == Some(0) {
            return Err(Error::invalid("bins", "need at least one bin"));
        }

        let seed = overrides.seed.or(run.seed).unwrap_or(0);
        cfg.run.seed = Some(seed);
        let out_dir = overrides
            .out
            .clone()
            .or_else(|| cfg.output.directory.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        Ok(Experiment {
            config: cfg,
            model,
            dts,
            scheme,
            seed,
            out_dir,
            workers: overrides.workers,
        })
    }

    fn horizon(&self) -> f64 {
        self.config.run.horizon.unwrap_or(DEFAULT_HORIZON)
    }

    fn paths(&self) -> usize {
        self.config.run.paths.unwrap_or(DEFAULT_PATHS)
    }

    fn exponent(&self) -> f64 {
        self.config.run.p.unwrap_or(1.0)
    }

    fn schemes(&self) -> Vec<SchemeKind> {
        self.config
            .run
            .scheme
            .as_ref()
            .map(OneOrMany::to_vec)
            .unwrap_or_else(|| vec![SchemeKind::Truncated])
    }

    fn has_format(&self, f: OutputFormat) -> bool {
        match &self.config.output.formats {
            Some(list) => list.contains(&f),
            None => f == OutputFormat::Csv,
        }
    }

    fn ensemble(&self) -> Ensemble {
        Ensemble {
            paths: self.paths(),
            horizon: self.horizon(),
            seed: self.seed,
            workers: self.workers,
        }
    }

    fn single_dt(&self, command: &str) -> Result<f64> {
        match self.dts.as_slice() {
            [dt] => Ok(*dt),
            _ => Err(Error::invalid(
                "dt",
                format!("`{command}` takes a single step size"),
            )),
        }
    }

    /// Output directory, created on demand, with the effective config echoed
    /// into it.
    fn prepare_output(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out_dir)?;
        write_file(&self.out_dir, "config.json", |w| {
            writeln!(w, "{}", self.config.to_json())
        })?;
        Ok(&self.out_dir)
    }
}

fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Six significant digits, plain notation where it stays readable.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        format!("{:.*}", (5 - exp).max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

fn sig6_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&x| sig6(x)).collect();
    format!("[{}]", parts.join(", "))
}

pub fn cmd_classify(exp: &Experiment, out: &mut dyn Write) -> Result<()> {
    let class = classify(&exp.model, DEFAULT_CLASSIFY_TOL)?;
    writeln!(out, "π={}", sig6_list(&class.pi))?;
    writeln!(out, "πa={} πβ={}", sig6(class.pi_a), sig6(class.pi_beta))?;
    match class.kind {
        crate::model::DynamicsKind::Extinct => {
            writeln!(out, "{}, πβ={:.6}", class.kind, class.pi_beta)?
        }
        kind => writeln!(
            out,
            "{}, πa={:.6}, πβ={:.6}",
            kind, class.pi_a, class.pi_beta
        )?,
    }
    Ok(())
}

pub fn cmd_simulate(exp: &Experiment, out: &mut dyn Write) -> Result<()> {
    let dt = exp.single_dt("simulate")?;
    let n = steps_in(exp.horizon(), dt)?;
    let model = &exp.model;
    let lattice = brownian_lattice(dt, n, StreamSpec::brownian(exp.seed, 0))?;
    let p = transition_matrix(model.generator(), dt)?;
    let chain = sample_chain(&p, model.r0(), n, StreamSpec::chain(exp.seed, 0));

    let mut paths = Vec::new();
    for kind in exp.schemes() {
        let path = match kind {
            SchemeKind::Truncated => {
                truncated_log_em(model, &exp.scheme, &lattice.increments, &chain.states)?
            }
            SchemeKind::Plain => {
                plain_log_em(model, &exp.scheme, &lattice.increments, &chain.states)?
            }
            SchemeKind::Classical => {
                classical_em(model, &exp.scheme, &lattice.increments, &chain.states)?
            }
            SchemeKind::Reference => exact_reference(model, &lattice, &chain)?,
        };
        paths.push(path);
    }

    let dir = exp.prepare_output()?;
    for path in &paths {
        let name = path.kind.name();
        write_file(dir, &format!("path_{name}.csv"), |w| path.write_csv(w))?;
        if exp.has_format(OutputFormat::Plot) {
            write_file(dir, &format!("path_{name}.dat"), |w| {
                for (t, z) in path.times.iter().zip(&path.z) {
                    writeln!(w, "{t} {z}")?;
                }
                Ok(())
            })?;
        }
        let last = path.len() - 1;
        write!(
            out,
            "{name}: steps={} X(T)={} cap_hits={}",
            last,
            sig6(path.x[last]),
            path.cap_hits
        )?;
        match path.blowup {
            Some(k) => writeln!(out, " blowup at step {k} (t={})", sig6(k as f64 * dt))?,
            None => writeln!(out)?,
        }
    }
    if exp.has_format(OutputFormat::Lattice) {
        write_file(dir, "lattice.csv", |w| lattice.write_csv(w))?;
        write_file(dir, "chain.csv", |w| chain.write_csv(w))?;
    }
    Ok(())
}

pub fn cmd_converge(exp: &Experiment, out: &mut dyn Write) -> Result<()> {
    if exp.dts.len() < 2 {
        return Err(Error::invalid(
            "dt",
            "`converge` needs a list of step sizes",
        ));
    }
    let run = &exp.config.run;
    let finest = exp.dts[exp.dts.len() - 1];
    let scheme = match exp.schemes().as_slice() {
        [s @ (SchemeKind::Truncated | SchemeKind::Plain)] => *s,
        _ => {
            return Err(Error::invalid(
                "scheme",
                "`converge` measures a single log-EM scheme (truncated or plain)",
            ))
        }
    };
    let setup = StrongErrorSetup {
        dts: exp.dts.clone(),
        paths: exp.paths(),
        horizon: exp.horizon(),
        exponent: exp.exponent(),
        norm: run.norm.unwrap_or_default(),
        seed: exp.seed,
        cap_constant: exp.scheme.cap_constant,
        theta: exp.scheme.theta,
        reference_dt: run
            .reference_dt
            .unwrap_or(finest / DEFAULT_REFERENCE_REFINEMENT),
        reference: run.reference.unwrap_or_default(),
        scheme,
        workers: exp.workers,
    };
    let curve = strong_error(&exp.model, &setup)?;

    let dir = exp.prepare_output()?;
    write_file(dir, "error_curve.csv", |w| curve.write_csv(w))?;
    if exp.has_format(OutputFormat::Plot) {
        write_file(dir, "error_curve.dat", |w| curve.write_plot(w))?;
    }
    for e in &curve.entries {
        writeln!(
            out,
            "dt={} error={} stderr={} cap_fraction={}",
            sig6(e.dt),
            sig6(e.error),
            sig6(e.stderr),
            sig6(e.cap_fraction)
        )?;
    }
    let saturated = curve.saturated_levels();
    if saturated > 0 {
        writeln!(
            out,
            "note: {saturated} coarse level(s) hit the cap on more than 1% of steps"
        )?;
    }
    let fit = fit_slope(&curve, run.drop_levels.unwrap_or(0))?;
    writeln!(out, "slope={} r2={}", sig6(fit.slope), sig6(fit.r_squared))?;
    Ok(())
}

pub fn cmd_longrun(exp: &Experiment, out: &mut dyn Write) -> Result<()> {
    exp.single_dt("longrun")?;
    exp.scheme.require_dynamics_preserving()?;
    let ensemble = exp.ensemble();
    let lyap = lyapunov_ensemble(&exp.model, &exp.scheme, &ensemble)?;
    let moments = moment_estimate(&exp.model, &exp.scheme, &ensemble, exp.exponent())?;
    let averages = time_average_ensemble(&exp.model, &exp.scheme, &ensemble)?;

    let dir = exp.prepare_output()?;
    write_file(dir, "moments.csv", |w| moments.write_csv(w))?;
    write_file(dir, "lyapunov.csv", |w| {
        writeln!(w, "trajectory,lyapunov,time_average")?;
        for (j, (l, a)) in lyap.iter().zip(&averages).enumerate() {
            writeln!(w, "{j},{l},{a}")?;
        }
        Ok(())
    })?;
    if exp.has_format(OutputFormat::Plot) {
        write_file(dir, "moments.dat", |w| {
            for (t, v) in moments.times.iter().zip(&moments.positive) {
                writeln!(w, "{t} {v}")?;
            }
            Ok(())
        })?;
    }

    let (l_mean, l_err) = mean_stderr(&lyap);
    let (a_mean, a_err) = mean_stderr(&averages);
    let tail = &moments.positive[moments.positive.len() / 2..];
    let tail_neg = &moments.negative[moments.negative.len() / 2..];
    let plateau = tail.iter().sum::<f64>() / tail.len() as f64;
    let plateau_neg = tail_neg.iter().sum::<f64>() / tail_neg.len() as f64;
    let sup = moments.running_sup().last().copied().unwrap_or(f64::NAN);
    let p = moments.exponent;
    writeln!(
        out,
        "lyapunov={} ± {} (M={})",
        sig6(l_mean),
        sig6(l_err),
        lyap.len()
    )?;
    writeln!(
        out,
        "moment p={}: sup E[X^p]={} plateau E[X^p]={} plateau E[X^-p]={}",
        sig6(p),
        sig6(sup),
        sig6(plateau),
        sig6(plateau_neg)
    )?;
    writeln!(out, "time_average={} ± {}", sig6(a_mean), sig6(a_err))?;
    Ok(())
}

pub fn cmd_stationary(exp: &Experiment, out: &mut dyn Write) -> Result<()> {
    if exp.dts.len() > 2 {
        return Err(Error::invalid(
            "dt",
            "`stationary` takes one or two step sizes",
        ));
    }
    exp.scheme.require_dynamics_preserving()?;
    let ensemble = exp.ensemble();
    let harvest = |dt: f64| -> Result<EmpiricalDistribution> {
        let cfg = exp.scheme.with_dt(dt, &exp.model)?;
        EmpiricalDistribution::new(harvest_terminal(
            &exp.model,
            &cfg,
            SchemeKind::Truncated,
            &ensemble,
        )?)
    };
    let samples = harvest(exp.dts[0])?;
    let bins = exp
        .config
        .run
        .bins
        .unwrap_or_else(|| default_bin_count(samples.len()));
    let hist = empirical_density(&samples, bins)?;

    let wanted = exp.config.run.gamma;
    let params = exp.model.params();
    let gamma = if wanted == Some(false) {
        None
    } else if exp.model.regimes() > 1 {
        if wanted == Some(true) {
            return Err(Error::NotPermanent(
                "the Gamma law is only known without switching".into(),
            ));
        }
        None
    } else {
        match gamma_stationary(params.b()[0], params.a()[0], params.sigma()[0]) {
            Ok(g) => Some(g),
            Err(e) if wanted == Some(true) => return Err(e),
            Err(_) => None,
        }
    };
    let ks = match &gamma {
        Some(g) => Some(ks_statistic(&samples, |x| g.cdf(x))?),
        None => None,
    };
    let distance = match exp.dts.get(1) {
        Some(&dt) => Some((dt, cdf_distance(&samples, &harvest(dt)?)?)),
        None => None,
    };

    let dir = exp.prepare_output()?;
    write_file(dir, "histogram.csv", |w| hist.write_csv(w))?;
    if exp.has_format(OutputFormat::Plot) {
        write_file(dir, "histogram.dat", |w| hist.write_plot(w))?;
    }
    writeln!(
        out,
        "n={} mean={} bins={}",
        samples.len(),
        sig6(samples.mean()),
        hist.bins()
    )?;
    match (&gamma, &ks) {
        (Some(g), Some(ks)) => {
            write_file(dir, "ks.csv", |w| {
                writeln!(w, "n,statistic,critical,reject,shape,rate")?;
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    samples.len(),
                    ks.statistic,
                    ks.critical,
                    ks.reject,
                    g.shape,
                    g.rate
                )
            })?;
            writeln!(
                out,
                "KS {} at 0.05 vs Gamma({}, {}): D={} critical={}",
                if ks.reject {
                    "rejected"
                } else {
                    "not rejected"
                },
                sig6(g.shape),
                sig6(g.rate),
                sig6(ks.statistic),
                sig6(ks.critical)
            )?;
        }
        _ => writeln!(
            out,
            "Gamma comparison skipped: model has no known stationary Gamma law"
        )?,
    }
    if let Some((dt, (sup, l1))) = distance {
        write_file(dir, "cdf_distance.csv", |w| {
            writeln!(w, "dt_a,dt_b,sup,l1")?;
            writeln!(w, "{},{},{},{}", exp.dts[0], dt, sup, l1)
        })?;
        writeln!(
            out,
            "cdf distance dt={} vs dt={}: sup={} l1={}",
            sig6(exp.dts[0]),
            sig6(dt),
            sig6(sup),
            sig6(l1)
        )?;
    }
    Ok(())
}

pub fn cmd_blowup(exp: &Experiment, out: &mut dyn Write) -> Result<()> {
    exp.single_dt("blowup")?;
    let ensemble = exp.ensemble();
    let classical = blowup_frequency(&exp.model, &exp.scheme, SchemeKind::Classical, &ensemble)?;
    let truncated = blowup_frequency(&exp.model, &exp.scheme, SchemeKind::Truncated, &ensemble)?;
    let histogram = classical.step_histogram();

    let dir = exp.prepare_output()?;
    write_file(dir, "blowup.csv", |w| {
        writeln!(w, "step,count")?;
        for (s, c) in &histogram {
            writeln!(w, "{s},{c}")?;
        }
        Ok(())
    })?;
    writeln!(
        out,
        "classical: {} of {} paths blew up (fraction={})",
        classical.blown(),
        classical.paths,
        sig6(classical.fraction())
    )?;
    if let Some((first, _)) = histogram.first() {
        writeln!(
            out,
            "earliest blow-up step={first} (t={})",
            sig6(*first as f64 * exp.scheme.dt)
        )?;
    }
    for (s, c) in histogram.iter().take(10) {
        writeln!(out, "  step {s}: {c}")?;
    }
    writeln!(
        out,
        "truncated: {} of {} paths blew up (fraction={})",
        truncated.blown(),
        truncated.paths,
        sig6(truncated.fraction())
    )?;
    Ok(())
}
