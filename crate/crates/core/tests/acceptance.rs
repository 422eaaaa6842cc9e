//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion is red. Run with `cargo test --test acceptance`.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::{brute_force_ks, random_generator, uniformized};
use logswitch::analysis::{
    blowup_frequency, empirical_density, fit_slope, gamma_cdf, harvest_terminal, ks_statistic,
    lyapunov_ensemble, mean_stderr, strong_error, time_average, EmpiricalDistribution, Ensemble,
    ErrorNorm, GammaDistribution, StrongErrorSetup,
};
use logswitch::cli::{cmd_converge, Experiment, ExperimentConfig, Overrides};
use logswitch::linalg::Matrix;
use logswitch::model::{
    classify, Generator, RegimeParams, SwitchingLogisticModel, DEFAULT_CLASSIFY_TOL,
};
use logswitch::runner;
use logswitch::schemes::{truncated_log_em, ReferenceKind, SchemeConfig, SchemeKind, Theta};
use logswitch::stochastic::{brownian_lattice, expm, sample_chain, transition_matrix, StreamSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn table1() -> SwitchingLogisticModel {
    SwitchingLogisticModel::new(
        RegimeParams::new(vec![2.0, 1.0], vec![1.8, 2.5], vec![0.8, 2.0]).unwrap(),
        Generator::new(vec![vec![-8.0, 8.0], vec![2.0, -2.0]]).unwrap(),
        25.0,
        0,
    )
    .unwrap()
}

fn table2() -> SwitchingLogisticModel {
    SwitchingLogisticModel::new(
        RegimeParams::new(
            vec![0.7, 0.4, 1.0],
            vec![0.3, 0.8, 0.5],
            vec![3f64.sqrt(), 0.06, 0.04],
        )
        .unwrap(),
        Generator::new(vec![
            vec![-10.0, 0.0, 10.0],
            vec![2.0, -2.0, 0.0],
            vec![0.0, 1.0, -1.0],
        ])
        .unwrap(),
        0.5,
        2,
    )
    .unwrap()
}

fn logistic71() -> SwitchingLogisticModel {
    SwitchingLogisticModel::scalar(0.5, 0.8, 0.3, 50.0).unwrap()
}

fn dyadic(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

fn slope_criterion(
    model: &SwitchingLogisticModel,
    setup: &StrongErrorSetup,
    band: (f64, f64),
    r2_min: f64,
) -> Outcome {
    let curve = strong_error(model, setup).unwrap();
    let errors: Vec<String> = curve
        .entries
        .iter()
        .map(|e| format!("{:.3e}", e.error))
        .collect();
    match fit_slope(&curve, 0) {
        Ok(fit) => outcome(
            within(fit.slope, band.0, band.1) && fit.r_squared >= r2_min,
            format!(
                "slope={:.4} (want [{}, {}]) r2={:.4} (want >= {r2_min}); errors {}",
                fit.slope,
                band.0,
                band.1,
                fit.r_squared,
                errors.join(" ")
            ),
        ),
        Err(e) => outcome(false, format!("fit failed: {e}")),
    }
}

fn convergence_switching() -> Outcome {
    let setup = StrongErrorSetup {
        dts: dyadic(6, 11),
        paths: 1000,
        horizon: 8.0,
        exponent: 1.0,
        norm: ErrorNorm::Moment,
        seed: SEED,
        cap_constant: 25.0,
        theta: Theta::Bounded(0.5),
        reference_dt: 2f64.powi(-14),
        reference: ReferenceKind::Quadrature,
        scheme: SchemeKind::Truncated,
        workers: 0,
    };
    slope_criterion(&table1(), &setup, (0.40, 0.65), 0.95)
}

fn convergence_scalar() -> Outcome {
    let setup = StrongErrorSetup {
        dts: dyadic(6, 13),
        paths: 1000,
        horizon: 2.0,
        exponent: 2.0,
        norm: ErrorNorm::Root,
        seed: SEED,
        cap_constant: 50.0,
        theta: Theta::Bounded(0.4),
        reference_dt: 2f64.powi(-16),
        reference: ReferenceKind::Quadrature,
        scheme: SchemeKind::Truncated,
        workers: 0,
    };
    slope_criterion(&logistic71(), &setup, (0.85, 1.15), 0.97)
}

fn positivity_and_cap() -> Outcome {
    let cases = [
        ("table1", table1(), 25.0, 0.02, 100.0),
        ("table2", table2(), 10.0, 0.01, 50.0),
        ("logistic", logistic71(), 50.0, 0.1, 100.0),
    ];
    let theta = 0.4;
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, model, k, dt, horizon) in cases {
        let config = SchemeConfig::new(dt, k, Theta::Bounded(theta), &model).unwrap();
        // the only slack is rounding in evaluating K·Δ^{−θ} itself
        let bound = k * dt.powf(-theta) * (1.0 + 4.0 * f64::EPSILON);
        let n = (horizon / dt).round() as usize;
        let p = transition_matrix(model.generator(), dt).unwrap();
        let (violations, states) = runner::map_fold(
            1000,
            0,
            (0usize, 0usize),
            |j| {
                let lattice = brownian_lattice(dt, n, StreamSpec::brownian(SEED, j)).unwrap();
                let chain = sample_chain(&p, model.r0(), n, StreamSpec::chain(SEED, j));
                let path =
                    truncated_log_em(&model, &config, &lattice.increments, &chain.states).unwrap();
                let bad = path.x.iter().filter(|&&x| !(x > 0.0 && x <= bound)).count();
                (bad, path.x.len())
            },
            |(v, s), _, (bad, len)| (v + bad, s + len),
        );
        pass &= violations == 0;
        parts.push(format!(
            "{name}: {violations} violations in {states} states"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn sturges_bins(n: usize) -> usize {
    (n as f64).log2().ceil() as usize + 1
}

fn stationary_law() -> Outcome {
    let model = logistic71();
    let config = SchemeConfig::new(0.01, 50.0, Theta::Bounded(0.4), &model).unwrap();
    let ensemble = Ensemble {
        paths: 10_000,
        horizon: 500.0,
        seed: SEED,
        workers: 0,
    };
    let samples = EmpiricalDistribution::new(
        harvest_terminal(&model, &config, SchemeKind::Truncated, &ensemble).unwrap(),
    )
    .unwrap();
    let gamma = GammaDistribution::new(91.0 / 9.0, 160.0 / 9.0).unwrap();
    let ks = ks_statistic(&samples, |x| gamma_cdf(&gamma, x)).unwrap();
    let critical = 1.36 / (samples.len() as f64).sqrt();
    let bins = sturges_bins(samples.len());
    let hist = empirical_density(&samples, bins).unwrap();
    let dev = hist.sup_deviation(|x| gamma_cdf(&gamma, x));
    outcome(
        ks.statistic < critical && dev < 0.15,
        format!(
            "n={} KS D={:.5} (critical {:.5}); histogram sup-deviation {:.4} over {bins} bins (want < 0.15)",
            samples.len(),
            ks.statistic,
            critical,
            dev
        ),
    )
}

fn single_path_time_average() -> f64 {
    let model = logistic71();
    let dt = 0.01;
    let n = 100_000;
    let config = SchemeConfig::new(dt, 50.0, Theta::Bounded(0.4), &model).unwrap();
    let lattice = brownian_lattice(dt, n, StreamSpec::brownian(SEED, 0)).unwrap();
    let p = transition_matrix(model.generator(), dt).unwrap();
    let chain = sample_chain(&p, 0, n, StreamSpec::chain(SEED, 0));
    let path = truncated_log_em(&model, &config, &lattice.increments, &chain.states).unwrap();
    time_average(&path).unwrap()
}

fn ergodic_time_average(avg: f64) -> Outcome {
    let target = 0.284375;
    let rel = (avg / target - 1.0).abs();
    outcome(
        rel <= 0.05,
        format!(
            "time average {avg:.6} vs {target} (relative error {:.1}%, want <= 5%)",
            100.0 * rel
        ),
    )
}

fn ergodic_time_average_vs_gamma_mean(avg: f64) -> Outcome {
    // mean of Gamma(2b/σ² − 1, 2a/σ²) = (2b − σ²) / (2a)
    let (b, a, s) = (0.5, 0.8, 0.3);
    let mean = (2.0 * b - s * s) / (2.0 * a);
    let rel = (avg / mean - 1.0).abs();
    outcome(
        rel <= 0.05,
        format!(
            "time average {avg:.6} vs stationary mean {mean} (relative error {:.2}%)",
            100.0 * rel
        ),
    )
}

fn extinction_rate() -> Outcome {
    let model = table1();
    let config = SchemeConfig::new(0.02, 25.0, Theta::Bounded(0.4), &model).unwrap();
    let ensemble = Ensemble {
        paths: 100,
        horizon: 200.0,
        seed: SEED,
        workers: 0,
    };
    let rates = lyapunov_ensemble(&model, &config, &ensemble).unwrap();
    let (mean, err) = mean_stderr(&rates);
    outcome(
        within(mean, -0.564, -0.364),
        format!(
            "mean log(X_N)/(NΔ) = {mean:.5} ± {err:.5} over {} paths (want [-0.564, -0.364])",
            rates.len()
        ),
    )
}

/// π for the three-state generator, solved by hand: (1, 5, 10) / 16.
const TABLE2_PI: [f64; 3] = [1.0 / 16.0, 5.0 / 16.0, 10.0 / 16.0];

fn chain_stationary() -> Outcome {
    let model = table2();
    let class = classify(&model, DEFAULT_CLASSIFY_TOL).unwrap();
    let a_ok = (class.pi_a - 0.581250).abs() <= 1e-9;
    let beta_ok = (class.pi_beta - 0.698875).abs() <= 1e-9;

    let dt = 0.1;
    let steps = 1_000_000;
    let p = transition_matrix(model.generator(), dt).unwrap();
    let occ = sample_chain(&p, model.r0(), steps, StreamSpec::chain(SEED, 0)).occupation(3);
    let worst = (0..3)
        .map(|i| (occ[i] / TABLE2_PI[i] - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        a_ok && beta_ok && worst <= 0.02,
        format!(
            "πa={:.9} (want 0.581250) {}; πβ={:.9} (want 0.698875) {}; occupation {:?} worst relative deviation {:.2}% (want <= 2%)",
            class.pi_a,
            if a_ok { "ok" } else { "off" },
            class.pi_beta,
            if beta_ok { "ok" } else { "off" },
            occ.iter().map(|v| (v * 1e5).round() / 1e5).collect::<Vec<_>>(),
            100.0 * worst
        ),
    )
}

fn chain_stationary_vs_hand_value() -> Outcome {
    let b = [0.7, 0.4, 1.0];
    let s = [3f64.sqrt(), 0.06, 0.04];
    let hand: f64 = (0..3)
        .map(|i| TABLE2_PI[i] * (b[i] - 0.5 * s[i] * s[i]))
        .sum();
    let class = classify(&table2(), DEFAULT_CLASSIFY_TOL).unwrap();
    outcome(
        (class.pi_beta - hand).abs() <= 1e-9,
        format!("πβ={:.9} vs Σπ_i(b_i − σ_i²/2) = {hand:.9}", class.pi_beta),
    )
}

fn blowup_contrast() -> Outcome {
    let model = table1();
    let config = SchemeConfig::new(0.02, 25.0, Theta::Bounded(0.4), &model).unwrap();
    let ensemble = Ensemble {
        paths: 1000,
        horizon: 100.0,
        seed: SEED,
        workers: 0,
    };
    let classical = blowup_frequency(&model, &config, SchemeKind::Classical, &ensemble).unwrap();
    let truncated = blowup_frequency(&model, &config, SchemeKind::Truncated, &ensemble).unwrap();
    outcome(
        classical.fraction() > 0.0 && truncated.fraction() == 0.0,
        format!(
            "classical fraction {:.3} ({} of {}), truncated fraction {}",
            classical.fraction(),
            classical.blown(),
            classical.paths,
            truncated.fraction()
        ),
    )
}

fn rng_fidelity() -> Outcome {
    let dt = 0.01;
    let lattice = brownian_lattice(dt, 1_000_000, StreamSpec::brownian(SEED, 0)).unwrap();
    let n = lattice.len() as f64;
    let exp_moment = lattice
        .increments
        .iter()
        .map(|d| (d * d / (4.0 * dt)).exp())
        .sum::<f64>()
        / n;
    let fourth = lattice.increments.iter().map(|d| d.powi(4)).sum::<f64>() / n;
    let rel4 = (fourth / (3.0 * dt * dt) - 1.0).abs();
    outcome(
        within(exp_moment, 1.40, 1.43) && rel4 <= 0.03,
        format!(
            "E[exp(ΔB²/4Δ)]={exp_moment:.5} (want [1.40, 1.43], √2={:.5}); E|ΔB|⁴ relative error {:.2}% (want <= 3%)",
            2f64.sqrt(),
            100.0 * rel4
        ),
    )
}

fn oracle_equivalences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_expm: f64 = 0.0;
    for _ in 0..100 {
        let q = random_generator(&mut rng);
        let t = rng.random_range(0.001..1.0);
        let got = expm(&Matrix::from_rows(&q).unwrap().scaled(t)).unwrap();
        let want = uniformized(&q, t);
        for i in 0..q.len() {
            for j in 0..q.len() {
                worst_expm = worst_expm.max((got[(i, j)] - want[i][j]).abs());
            }
        }
    }

    let exp_cdf = |x: f64| if x <= 0.0 { 0.0 } else { 1.0 - (-x).exp() };
    let mut worst_ks: f64 = 0.0;
    for n in 1..=50 {
        let samples: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().ln()).collect();
        let ks = ks_statistic(
            &EmpiricalDistribution::new(samples.clone()).unwrap(),
            exp_cdf,
        )
        .unwrap();
        worst_ks = worst_ks.max((ks.statistic - brute_force_ks(&samples, exp_cdf)).abs());
    }

    let g = GammaDistribution::new(91.0 / 9.0, 160.0 / 9.0).unwrap();
    let h = 1e-5;
    let worst_pdf = (0..100)
        .map(|i| {
            let x = 0.05 + 1.95 * i as f64 / 99.0;
            let fd = (gamma_cdf(&g, x + h) - gamma_cdf(&g, x - h)) / (2.0 * h);
            (fd - g.pdf(x)).abs()
        })
        .fold(0.0, f64::max);

    outcome(
        worst_expm <= 1e-10 && worst_ks <= 1e-12 && worst_pdf <= 1e-6,
        format!(
            "expm vs uniformization max {worst_expm:.2e} (want <= 1e-10); KS vs brute force max {worst_ks:.2e}; d/dx gamma_cdf vs density max {worst_pdf:.2e} (want <= 1e-6)"
        ),
    )
}

const DETERMINISM_CONFIG: &str = r#"{
    "spec_version": 1,
    "model": {"b": [2, 1], "a": [1.8, 2.5], "sigma": [0.8, 2],
              "generator": [[-8, 8], [2, -2]], "x0": 25, "r0": 0},
    "scheme": {"dt": [0.0625, 0.03125, 0.015625, 0.0078125], "K": 25, "theta": 0.5},
    "run": {"T": 2, "M": 600, "seed": 42, "p": 1, "reference_dt": 0.0009765625},
    "output": {"formats": ["csv", "plot"]}
}"#;

fn converge_into(dir: &Path, workers: usize) -> (Vec<u8>, Vec<u8>) {
    let overrides = Overrides {
        seed: None,
        out: Some(dir.to_path_buf()),
        workers,
    };
    let exp = Experiment::from_config(
        ExperimentConfig::from_json(DETERMINISM_CONFIG).unwrap(),
        Path::new("."),
        &overrides,
    )
    .unwrap();
    let mut report = Vec::new();
    cmd_converge(&exp, &mut report).unwrap();
    (fs::read(dir.join("error_curve.csv")).unwrap(), report)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let (first, r1) = converge_into(&tmp.path().join("first"), 1);
    let (second, r2) = converge_into(&tmp.path().join("second"), 1);
    let (eight, r8) = converge_into(&tmp.path().join("eight"), 8);
    let repeat = first == second && r1 == r2;
    let workers = first == eight && r1 == r8;
    outcome(
        repeat && workers,
        format!(
            "same seed twice: {}; 1 vs 8 workers: {} ({} CSV bytes)",
            if repeat { "identical" } else { "DIFFERENT" },
            if workers { "identical" } else { "DIFFERENT" },
            first.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |label: &str, name: &str, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = run();
        println!(
            "[{label}] {} {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    };

    report(
        "1",
        "convergence order with switching",
        &mut convergence_switching,
    );
    report(
        "2",
        "convergence order without switching",
        &mut convergence_scalar,
    );
    report("3", "positivity and cap", &mut positivity_and_cap);
    report("4", "stationary Gamma law", &mut stationary_law);
    let avg = single_path_time_average();
    report("5", "ergodic time average", &mut || {
        ergodic_time_average(avg)
    });
    report("5+", "time average vs stationary mean", &mut || {
        ergodic_time_average_vs_gamma_mean(avg)
    });
    report("6", "extinction rate", &mut extinction_rate);
    report("7", "chain stationary distribution", &mut chain_stationary);
    report(
        "7+",
        "πβ vs hand evaluation",
        &mut chain_stationary_vs_hand_value,
    );
    report("8", "blow-up contrast", &mut blowup_contrast);
    report("9", "Gaussian increment moments", &mut rng_fidelity);
    report("10", "oracle equivalences", &mut oracle_equivalences);
    report("11", "converge determinism", &mut determinism);

    println!("acceptance: {failed} failing line(s)");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
