//! Deterministic checks of the discrete bridge formulas against densities
//! built directly from tridiagonal precision matrices.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bridge::{cameron_martin_log_density, rho_bridge_weight, sample_bridge};
use crate::discrete_gaussian::{bridge_law, bridge_with_mass};
use crate::error::{Error, Result};
use crate::rng::{self, standard_normal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactnessReport {
    pub n_steps: usize,
    pub cases: usize,
    /// Largest `|formula − oracle| / (1 + |oracle|)`.
    pub max_residual: f64,
}

/// Random strictly increasing grid on `[0, 2π]` with both ends included.
fn random_grid(n: usize, rng: &mut rng::StreamRng) -> Vec<f64> {
    let gaps: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
    let total: f64 = gaps.iter().sum();
    let mut t = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    t.push(0.0);
    for g in &gaps[..n - 1] {
        acc += g / total * 2.0 * PI;
        t.push(acc);
    }
    t.push(2.0 * PI);
    t
}

/// Real bridge on `times` pinned at `pin` at both ends.
fn real_bridge(times: &[f64], pin: f64, rng: &mut rng::StreamRng) -> Vec<f64> {
    let mut w = vec![0.0];
    for d in times.windows(2) {
        let last = *w.last().expect("non-empty");
        w.push(last + (d[1] - d[0]).sqrt() * standard_normal(rng));
    }
    let end = *w.last().expect("non-empty");
    let span = times[times.len() - 1] - times[0];
    times
        .iter()
        .zip(&w)
        .map(|(t, b)| pin + b - (t - times[0]) / span * end)
        .collect()
}

/// Shift with `k_0 = k_n = k_o`: a tent plus a few random sine modes.
fn random_shift(times: &[f64], rng: &mut rng::StreamRng) -> Vec<f64> {
    let k_o = standard_normal(rng);
    let peak = 2.0 * PI * (0.1 + 0.8 * rng.random::<f64>());
    let height = standard_normal(rng);
    let amps: Vec<f64> = (0..3).map(|_| 0.5 * standard_normal(rng)).collect();
    times
        .iter()
        .map(|&s| {
            let tent = if s <= peak { s / peak } else { (2.0 * PI - s) / (2.0 * PI - peak) };
            let wave: f64 = amps.iter().enumerate().map(|(j, a)| a * ((j + 1) as f64 * s / 2.0).sin()).sum();
            k_o + height * tent + wave
        })
        .collect()
}

/// Discrete Cameron-Martin formula against `log p_{x_o}(X − k) − log p_{x_o+k_o}(X)`,
/// where `p_a` is the bridge law pinned at `a` on a random nonuniform grid.
pub fn cameron_martin_exactness(n_steps: usize, pairs: usize, seed: u64) -> Result<ExactnessReport> {
    if n_steps < 2 || pairs == 0 {
        return Err(Error::Config(format!("need n ≥ 2 and at least one pair, got n = {n_steps}, {pairs} pairs")));
    }
    let mut max_residual: f64 = 0.0;
    for i in 0..pairs as u64 {
        let mut r = rng::stream(seed, i);
        let times = random_grid(n_steps, &mut r);
        let x_o = standard_normal(&mut r);
        let k = random_shift(&times, &mut r);
        let k_o = k[0];
        let x = real_bridge(&times, x_o + k_o, &mut r);
        let formula = cameron_martin_log_density(&times, &x, &k)?;
        let shifted: Vec<f64> = x.iter().zip(&k).map(|(a, b)| a - b).collect();
        let oracle = bridge_law(&times, x_o)?.log_density(&shifted[1..n_steps])
            - bridge_law(&times, x_o + k_o)?.log_density(&x[1..n_steps]);
        max_residual = max_residual.max((formula - oracle).abs() / (1.0 + oracle.abs()));
    }
    Ok(ExactnessReport { n_steps, cases: pairs, max_residual })
}

/// Bridge log-density plus the `ρ` weight against the log-density of the
/// discretised conditional `ρ` law (precision with a unit mass term). The two
/// agree up to a constant, so the residual is the spread of the difference
/// over `paths` complex bridges pinned at `endpoint`.
pub fn rho_bridge_exactness(n_steps: usize, paths: usize, endpoint: Complex64, seed: u64) -> Result<ExactnessReport> {
    if n_steps < 2 || paths < 2 {
        return Err(Error::Config(format!("need n ≥ 2 and at least two paths, got n = {n_steps}, {paths} paths")));
    }
    let times: Vec<f64> = (0..=n_steps).map(|k| 2.0 * PI * k as f64 / n_steps as f64).collect();
    let laws = [
        (bridge_law(&times, endpoint.re)?, bridge_with_mass(&times, endpoint.re, 1.0)?),
        (bridge_law(&times, endpoint.im)?, bridge_with_mass(&times, endpoint.im, 1.0)?),
    ];
    let mut offsets = Vec::with_capacity(paths);
    for i in 0..paths as u64 {
        let path = sample_bridge(endpoint, n_steps, seed, i)?;
        let interior = &path.values[1..n_steps];
        let re: Vec<f64> = interior.iter().map(|z| z.re).collect();
        let im: Vec<f64> = interior.iter().map(|z| z.im).collect();
        let bridge = laws[0].0.log_density(&re) + laws[1].0.log_density(&im);
        let rho = laws[0].1.log_density(&re) + laws[1].1.log_density(&im);
        offsets.push((rho, bridge + rho_bridge_weight(&path)));
    }
    let (rho0, lhs0) = offsets[0];
    let max_residual = offsets
        .iter()
        .map(|(rho, lhs)| ((lhs - lhs0) - (rho - rho0)).abs() / (1.0 + (rho - rho0).abs()))
        .fold(0.0, f64::max);
    Ok(ExactnessReport { n_steps, cases: paths, max_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cameron_martin_is_exact() {
        let r = cameron_martin_exactness(64, 5, 9).unwrap();
        assert!(r.max_residual < 1e-10, "{r:?}");
    }

    #[test]
    fn rho_bridge_difference_is_constant() {
        let r = rho_bridge_exactness(64, 10, Complex64::new(0.3, -0.7), 2).unwrap();
        assert!(r.max_residual < 1e-9, "{r:?}");
    }

    #[test]
    fn wrong_shift_sign_breaks_the_identity() {
        let mut r = rng::stream(1, 0);
        let times = random_grid(32, &mut r);
        let k = random_shift(&times, &mut r);
        let x = real_bridge(&times, k[0], &mut r);
        let neg: Vec<f64> = k.iter().map(|v| -v).collect();
        let plus = cameron_martin_log_density(&times, &x, &k).unwrap();
        let minus = cameron_martin_log_density(&times, &x, &neg).unwrap();
        assert!((plus - minus).abs() > 1e-3);
    }

    #[test]
    fn grid_is_increasing_and_spans_the_circle() {
        let t = random_grid(10, &mut rng::stream(0, 0));
        assert_eq!(t.len(), 11);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(t[10], 2.0 * PI);
    }
}
