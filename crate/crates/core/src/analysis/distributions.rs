//! Empirical distributions, histograms, the stationary Gamma law of the
//! single-regime model and Kolmogorov–Smirnov comparisons.

use std::io::Write;

use crate::error::{Error, Result};

/// Asymptotic Kolmogorov–Smirnov coefficient at the 0.05 level.
pub const KS_COEFFICIENT_05: f64 = 1.36;

/// Sorted sample of a scalar quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::DegenerateInput("sample contains NaN".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.len() as f64
    }

    /// Right-continuous empirical CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }
}

/// Equal-width histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `count / (n · width)` per bin.
    pub fn density(&self) -> Vec<f64> {
        let n = self.total() as f64;
        (0..self.bins())
            .map(|i| self.counts[i] as f64 / (n * self.width(i)))
            .collect()
    }

    /// Largest gap between the histogram density and the bin-averaged
    /// density of `cdf`, i.e. `(F(right) − F(left)) / width`.
    pub fn sup_deviation(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        self.density()
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let expected = (cdf(self.edges[i + 1]) - cdf(self.edges[i])) / self.width(i);
                (d - expected).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "left,right,center,count,density")?;
        let density = self.density();
        for i in 0..self.bins() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.edges[i],
                self.edges[i + 1],
                0.5 * (self.edges[i] + self.edges[i + 1]),
                self.counts[i],
                density[i]
            )?;
        }
        Ok(())
    }

    /// `center density` pairs, one per line.
    pub fn write_plot<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (c, d) in self.centers().iter().zip(self.density()) {
            writeln!(out, "{c} {d}")?;
        }
        Ok(())
    }
}

/// `⌈√n⌉` clamped to `[10, 200]`.
pub fn default_bin_count(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).clamp(10, 200)
}

/// Equal-width bins over `[min, max]`; the last bin is closed on the right.
/// A degenerate sample (all values equal) gets one unit-width bin.
pub fn empirical_density(samples: &EmpiricalDistribution, bin_count: usize) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if bin_count == 0 {
        return Err(Error::invalid("bins", "need at least one bin"));
    }
    let (lo, hi) = (samples.min(), samples.max());
    if !(hi > lo) {
        return Ok(Histogram {
            edges: vec![lo - 0.5, lo + 0.5],
            counts: vec![samples.len()],
        });
    }
    let width = (hi - lo) / bin_count as f64;
    let mut edges: Vec<f64> = (0..=bin_count).map(|i| lo + i as f64 * width).collect();
    edges[bin_count] = hi;
    let mut counts = vec![0usize; bin_count];
    for &v in samples.samples() {
        let i = (((v - lo) / width) as usize).min(bin_count - 1);
        counts[i] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub critical: f64,
    pub reject: bool,
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF, with the
/// asymptotic 0.05 decision `D > 1.36/√n`.
pub fn ks_statistic(samples: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let nf = n as f64;
    let statistic = samples
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / nf - f;
            let below = f - i as f64 / nf;
            above.abs().max(below.abs())
        })
        .fold(0.0, f64::max);
    let critical = KS_COEFFICIENT_05 / nf.sqrt();
    Ok(KsResult {
        statistic,
        critical,
        reject: statistic > critical,
    })
}

/// Kolmogorov (sup) and L1 distances between two empirical CDFs, evaluated
/// exactly on the merged support.
pub fn cdf_distance(e1: &EmpiricalDistribution, e2: &EmpiricalDistribution) -> Result<(f64, f64)> {
    if e1.is_empty() || e2.is_empty() {
        return Err(Error::EmptySample);
    }
    let (a, b) = (e1.samples(), e2.samples());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup: f64 = 0.0;
    let mut l1 = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        if let Some((px, gap)) = prev {
            l1 += gap * (x - px);
        }
        let gap = (i as f64 / na - j as f64 / nb).abs();
        sup = sup.max(gap);
        prev = Some((x, gap));
    }
    Ok((sup, l1))
}

/// Stationary law of the single-regime logistic SDE: shape `2b/σ² − 1`,
/// rate `2a/σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaDistribution {
    pub shape: f64,
    pub rate: f64,
}

impl GammaDistribution {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(Error::invalid("gamma", "shape and rate must be positive"));
        }
        Ok(GammaDistribution { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x == 0.0 {
            return match self.shape {
                s if s < 1.0 => f64::INFINITY,
                1.0 => self.rate,
                _ => 0.0,
            };
        }
        (self.shape * self.rate.ln() - ln_gamma(self.shape) + (self.shape - 1.0) * x.ln()
            - self.rate * x)
            .exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        gamma_cdf(self, x)
    }
}

pub fn gamma_stationary(b: f64, a: f64, sigma: f64) -> Result<GammaDistribution> {
    if !(a > 0.0) {
        return Err(Error::NotPermanent(format!(
            "competition a = {a} must be positive"
        )));
    }
    let s2 = sigma * sigma;
    if !(2.0 * b > s2) {
        return Err(Error::NotPermanent(format!(
            "need 2b > σ², found 2b = {} and σ² = {}",
            2.0 * b,
            s2
        )));
    }
    Ok(GammaDistribution {
        shape: 2.0 * b / s2 - 1.0,
        rate: 2.0 * a / s2,
    })
}

/// `P(shape, rate·x)`, the regularised lower incomplete gamma function.
pub fn gamma_cdf(dist: &GammaDistribution, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    regularized_lower_gamma(dist.shape, dist.rate * x)
}

/// Lanczos approximation (g = 7, 9 terms), relative error around 1e-15.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Series expansion below `x < s + 1`, Lentz continued fraction above.
pub fn regularized_lower_gamma(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let log_prefactor = s * x.ln() - x - ln_gamma(s);
    if x < s + 1.0 {
        let mut term = 1.0 / s;
        let mut sum = term;
        let mut denom = s;
        for _ in 0..10_000 {
            denom += 1.0;
            term *= x / denom;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (sum.ln() + log_prefactor).exp().min(1.0)
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (1.0 - (log_prefactor.exp() * h)).max(0.0)
    }
}
