//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_generator(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let m = rng.random_range(1..=6);
    let mut rows = vec![vec![0.0; m]; m];
    for i in 0..m {
        let mut total = 0.0;
        for j in 0..m {
            if i != j {
                // keep a cycle so the chain is irreducible
                let forced = j == (i + 1) % m;
                let rate = if forced || rng.random_bool(0.6) {
                    rng.random_range(0.05..10.0)
                } else {
                    0.0
                };
                rows[i][j] = rate;
                total += rate;
            }
        }
        rows[i][i] = -total;
    }
    rows
}

/// `exp(tQ)` by uniformization: Poisson mixture of powers of `I + Q/λ`.
pub fn uniformized(q: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let m = q.len();
    let lambda = q.iter().enumerate().map(|(i, r)| -r[i]).fold(0.0, f64::max) * 1.05 + 1e-12;
    let mut step = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            step[i][j] = q[i][j] / lambda + if i == j { 1.0 } else { 0.0 };
        }
    }
    let lt = lambda * t;
    let mut power: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut weight = (-lt).exp();
    let mut acc = vec![vec![0.0; m]; m];
    let mut mass = 0.0;
    let mut k = 0usize;
    while 1.0 - mass > 1e-17 && k < 10_000 {
        for i in 0..m {
            for j in 0..m {
                acc[i][j] += weight * power[i][j];
            }
        }
        mass += weight;
        k += 1;
        weight *= lt / k as f64;
        let mut next = vec![vec![0.0; m]; m];
        for i in 0..m {
            for l in 0..m {
                for j in 0..m {
                    next[i][j] += power[i][l] * step[l][j];
                }
            }
        }
        power = next;
    }
    acc
}

pub fn brute_force_ks(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for &x in samples {
        let below = samples.iter().filter(|&&s| s < x).count() as f64 / n;
        let upto = samples.iter().filter(|&&s| s <= x).count() as f64 / n;
        d = d.max((upto - cdf(x)).abs()).max((cdf(x) - below).abs());
    }
    d
}

pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let c = 0.5 * (a + b);
        let left = simpson(f, a, c);
        let right = simpson(f, c, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        recurse(f, a, c, left, tol / 2.0, depth - 1) + recurse(f, c, b, right, tol / 2.0, depth - 1)
    }
    recurse(f, a, b, simpson(f, a, b), tol, 50)
}
