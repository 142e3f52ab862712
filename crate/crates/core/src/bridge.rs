//! Complex Brownian bridges on `[0, 2π]`, the log/phase time change, and the
//! Cameron-Martin density for real bridges.
//!
//! A standard complex bridge has independent real and imaginary parts, each a
//! real bridge with unit diffusion: `Cov(Re Z(x), Re Z(y)) = min(x,y) − xy/2π`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::{self, standard_normal, StreamRng};

/// Modulus floor below which time-change statistics are not attempted.
pub const MODULUS_FLOOR: f64 = 1e-6;

/// Largest phase step accepted by the unwrapper.
pub const MAX_PHASE_STEP: f64 = FRAC_PI_2;

/// Discretised complex path on `x_k = 2πk/n`, `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgePath {
    pub values: Vec<Complex64>,
    pub endpoint: Complex64,
}

impl BridgePath {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::Size("a path needs at least two steps".into()));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Precondition("non-finite path value".into()));
        }
        let endpoint = values[0];
        Ok(Self { values, endpoint })
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.n_steps() as f64
    }

    /// Value at grid node `k`.
    pub fn at(&self, k: usize) -> Complex64 {
        self.values[k]
    }

    /// Value at `x`, which must be a grid node.
    pub fn at_x(&self, x: f64) -> Complex64 {
        let k = (x / self.dx()).round() as usize;
        self.values[k]
    }

    /// `|Z_k|²` for the `n` left nodes.
    pub fn modulus_sq(&self) -> Vec<f64> {
        self.values[..self.n_steps()].iter().map(|z| z.norm_sqr()).collect()
    }

    /// `m(Z) = (1/2π)∫|Z|²` by the (periodic) trapezoidal rule.
    pub fn mass(&self) -> f64 {
        self.modulus_sq().iter().sum::<f64>() / self.n_steps() as f64
    }

    /// Keeps every `factor`-th node.
    pub fn decimate(&self, factor: usize) -> Result<BridgePath> {
        if factor == 0 || self.n_steps() % factor != 0 {
            return Err(Error::Size(format!(
                "cannot decimate {} steps by {factor}",
                self.n_steps()
            )));
        }
        BridgePath::new(self.values.iter().step_by(factor).copied().collect())
    }
}

fn brownian_walk(n_steps: usize, rng: &mut StreamRng) -> Vec<Complex64> {
    let sd = (2.0 * PI / n_steps as f64).sqrt();
    let mut w = Vec::with_capacity(n_steps + 1);
    let mut acc = Complex64::new(0.0, 0.0);
    w.push(acc);
    for _ in 0..n_steps {
        let re = standard_normal(rng) * sd;
        let im = standard_normal(rng) * sd;
        acc += Complex64::new(re, im);
        w.push(acc);
    }
    w
}

/// Bridge pinned at `endpoint` at both ends, built as
/// `B_k − (x_k/2π) B_n + u_o` from a standard complex random walk.
pub fn sample_bridge_with(endpoint: Complex64, n_steps: usize, rng: &mut StreamRng) -> Result<BridgePath> {
    if n_steps < 2 {
        return Err(Error::Size(format!("need at least 2 steps, got {n_steps}")));
    }
    let w = brownian_walk(n_steps, rng);
    let last = w[n_steps];
    let mut values: Vec<Complex64> = w
        .iter()
        .enumerate()
        .map(|(k, b)| b - last * (k as f64 / n_steps as f64) + endpoint)
        .collect();
    values[0] = endpoint;
    values[n_steps] = endpoint;
    Ok(BridgePath { values, endpoint })
}

/// Bridge number `index` of the stream keyed by `seed`.
pub fn sample_bridge(endpoint: Complex64, n_steps: usize, seed: u64, index: u64) -> Result<BridgePath> {
    sample_bridge_with(endpoint, n_steps, &mut rng::stream(seed, index))
}

/// Complex Brownian motion on `[0, 2π]` started at `start`.
pub fn sample_brownian_motion(start: Complex64, n_steps: usize, seed: u64, index: u64) -> Vec<Complex64> {
    brownian_walk(n_steps, &mut rng::stream(seed, index))
        .into_iter()
        .map(|b| b + start)
        .collect()
}

/// Log-density of `ρ(·|u_o)` relative to the bridge law, up to a constant:
/// `−½∫|Z|²dx` by the trapezoidal rule.
pub fn rho_bridge_weight(path: &BridgePath) -> f64 {
    let n = path.n_steps();
    let dx = path.dx();
    let inner: f64 = path.values[1..n].iter().map(|z| z.norm_sqr()).sum();
    let ends = 0.5 * (path.values[0].norm_sqr() + path.values[n].norm_sqr());
    -0.5 * (inner + ends) * dx
}

/// A path expressed on the clock `s(x) = ∫₀ˣ dr/|Z(r)|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeChangedPath {
    /// `s_k`, strictly increasing from 0.
    pub s: Vec<f64>,
    /// `W_k = log|Z_k| + i·arg Z_k`, with the argument continued along the path.
    pub w: Vec<Complex64>,
    /// `S = s_n`.
    pub stop: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeChangeFailure {
    /// Some `|Z_k|` fell below [`MODULUS_FLOOR`].
    NearZero,
    /// Consecutive phases differ by more than [`MAX_PHASE_STEP`].
    PhaseJump,
}

/// Continuous argument along the path; fails on steps larger than `max_step`.
pub fn unwrap_phase(values: &[Complex64], max_step: f64) -> std::result::Result<Vec<f64>, usize> {
    let mut out = Vec::with_capacity(values.len());
    let mut prev = values[0].arg();
    out.push(prev);
    for (k, pair) in values.windows(2).enumerate() {
        let step = (pair[1] * pair[0].conj()).arg();
        if step.abs() > max_step {
            return Err(k + 1);
        }
        prev += step;
        out.push(prev);
    }
    Ok(out)
}

/// Left-Riemann clock `s_k = Σ_{j<k} Δx/|Z_j|²` and log-coordinates `W`.
pub fn time_change_values(values: &[Complex64], dx: f64) -> std::result::Result<TimeChangedPath, TimeChangeFailure> {
    if values.iter().any(|z| z.norm() < MODULUS_FLOOR) {
        return Err(TimeChangeFailure::NearZero);
    }
    let phase = unwrap_phase(values, MAX_PHASE_STEP).map_err(|_| TimeChangeFailure::PhaseJump)?;
    let mut s = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    s.push(acc);
    for z in &values[..values.len() - 1] {
        acc += dx / z.norm_sqr();
        s.push(acc);
    }
    let w = values
        .iter()
        .zip(&phase)
        .map(|(z, p)| Complex64::new(z.norm().ln(), *p))
        .collect();
    Ok(TimeChangedPath { stop: acc, s, w })
}

pub fn time_change(path: &BridgePath) -> std::result::Result<TimeChangedPath, TimeChangeFailure> {
    time_change_values(&path.values, path.dx())
}

/// Recovers `x_k = Σ_{j<k} e^{2 W₁(s_j)} (s_{j+1} − s_j)`.
pub fn inverse_time_change(path: &TimeChangedPath) -> Vec<f64> {
    let mut x = Vec::with_capacity(path.s.len());
    let mut acc = 0.0;
    x.push(acc);
    for (k, pair) in path.s.windows(2).enumerate() {
        acc += (2.0 * path.w[k].re).exp() * (pair[1] - pair[0]);
        x.push(acc);
    }
    x
}

/// Discrete Cameron-Martin log-density `Σ (Δk/Δs) ΔX − ½ Σ (Δk)²/Δs` for a
/// real path `X` and shift `k` on the grid `s`.
pub fn cameron_martin_log_density(times: &[f64], path: &[f64], shift: &[f64]) -> Result<f64> {
    if times.len() != path.len() || times.len() != shift.len() {
        return Err(Error::Size(format!(
            "grid {}, path {}, shift {}",
            times.len(),
            path.len(),
            shift.len()
        )));
    }
    let mut stochastic = 0.0;
    let mut energy = 0.0;
    for j in 0..times.len() - 1 {
        let ds = times[j + 1] - times[j];
        let dk = shift[j + 1] - shift[j];
        stochastic += dk / ds * (path[j + 1] - path[j]);
        energy += dk * dk / ds;
    }
    Ok(stochastic - 0.5 * energy)
}

/// Summary of the log/phase Gaussianity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalReport {
    pub paths: usize,
    /// Paths that came within [`MODULUS_FLOOR`] of the origin.
    pub excluded_near_zero: usize,
    /// Paths that had not reached the last clock target after the step budget.
    pub excluded_unfinished: usize,
    pub increments: usize,
    pub clock_step: f64,
    /// Sample mean of `ΔW₁/sqrt(Δs)` and `ΔW₂/sqrt(Δs)` in units of their stderr.
    pub mean_z_w1: f64,
    pub mean_z_w2: f64,
    /// `Var(ΔW)/Δs` with its standard error.
    pub var_ratio_w1: (f64, f64),
    pub var_ratio_w2: (f64, f64),
    /// Sample correlation of `ΔW₁` and `ΔW₂` with its standard error.
    pub correlation: (f64, f64),
    pub ks_p_w1: f64,
    pub ks_p_w2: f64,
}

impl ConformalReport {
    /// Largest deviation from the Gaussian-increment hypothesis, in standard errors.
    pub fn max_z(&self) -> f64 {
        let vr = |(v, se): (f64, f64)| (v - 1.0).abs() / se;
        [
            self.mean_z_w1.abs(),
            self.mean_z_w2.abs(),
            vr(self.var_ratio_w1),
            vr(self.var_ratio_w2),
            self.correlation.0.abs() / self.correlation.1,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Options for [`conformal_gaussianity_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalOptions {
    /// Clock increment `Δs` between sampled points.
    pub clock_step: f64,
    /// Increments taken per path.
    pub per_path: usize,
    /// Largest clock advance of a single walk step.
    pub max_clock_per_step: f64,
    /// Largest `|ΔB|/|B|` of a single walk step.
    pub max_relative_step: f64,
    /// Walk steps per path before giving up.
    pub step_budget: usize,
}

impl Default for ConformalOptions {
    fn default() -> Self {
        Self {
            clock_step: 0.25,
            per_path: 4,
            max_clock_per_step: 1e-3,
            max_relative_step: 0.05,
            step_budget: 10_000_000,
        }
    }
}

/// Complex Brownian motion from `B(0) = 1` walked forward in `x`, with every
/// step refined by exact bridge midpoints until it is short relative to `|B|`.
/// Records `W = log B` at the clock times `Δs, 2Δs, …`.
struct ClockWalk<'a> {
    rng: &'a mut StreamRng,
    opts: &'a ConformalOptions,
    z: Complex64,
    w: Complex64,
    s: f64,
    targets: Vec<Complex64>,
    steps: usize,
}

const MAX_REFINE_DEPTH: u32 = 48;

impl ClockWalk<'_> {
    fn done(&self) -> bool {
        self.targets.len() >= self.opts.per_path
    }

    fn segment(&mut self, z1: Complex64, h: f64, depth: u32) -> std::result::Result<(), TimeChangeFailure> {
        if self.done() {
            return Ok(());
        }
        let (r0, r1) = (self.z.norm(), z1.norm());
        let coarse = (z1 - self.z).norm() > self.opts.max_relative_step * r0.min(r1)
            || h / (r0 * r0) > self.opts.max_clock_per_step;
        if coarse && depth < MAX_REFINE_DEPTH {
            let sd = (h / 4.0).sqrt();
            let mid = (self.z + z1) * 0.5
                + Complex64::new(standard_normal(self.rng) * sd, standard_normal(self.rng) * sd);
            self.segment(mid, h / 2.0, depth + 1)?;
            return self.segment(z1, h / 2.0, depth + 1);
        }
        if r1 < MODULUS_FLOOR {
            return Err(TimeChangeFailure::NearZero);
        }
        self.steps += 1;
        let ds = 0.5 * h * (1.0 / (r0 * r0) + 1.0 / (r1 * r1));
        let w1 = Complex64::new(r1.ln(), self.w.im + (z1 * self.z.conj()).arg());
        loop {
            let target = (self.targets.len() + 1) as f64 * self.opts.clock_step;
            if self.done() || target > self.s + ds {
                break;
            }
            let t = (target - self.s) / ds;
            self.targets.push(self.w + (w1 - self.w) * t);
        }
        self.z = z1;
        self.w = w1;
        self.s += ds;
        Ok(())
    }

    fn run(mut self, dx: f64) -> std::result::Result<Vec<Complex64>, Option<TimeChangeFailure>> {
        while !self.done() {
            if self.steps >= self.opts.step_budget {
                return Err(None);
            }
            // step length is chosen from the current state only
            let r = self.z.norm();
            let h = dx.min(self.opts.max_clock_per_step * r * r);
            let sd = h.sqrt();
            let z1 = self.z + Complex64::new(standard_normal(self.rng) * sd, standard_normal(self.rng) * sd);
            self.segment(z1, h, 0).map_err(Some)?;
        }
        Ok(self.targets)
    }
}

/// Samples complex Brownian motions from `B(0) = 1`, changes clock to
/// `s = ∫dx/|B|²`, and tests that the increments of `W₁ = log|B|` and
/// `W₂ = arg B` over equal clock steps are independent `N(0, Δs)`.
///
/// The walk uses base steps of `2π/n_steps`, shortened and refined wherever
/// `|B|` is small, and runs past `x = 2π` until the last clock target is
/// reached, so no increment is selected on the basis of its own value.
pub fn conformal_gaussianity_check(
    count: usize,
    n_steps: usize,
    seed: u64,
    options: &ConformalOptions,
) -> Result<ConformalReport> {
    if count < 1000 {
        return Err(Error::Config(format!("conformal check needs at least 1000 paths, got {count}")));
    }
    if n_steps == 0 || options.per_path == 0 || !(options.clock_step > 0.0) {
        return Err(Error::Config("conformal check needs positive steps and clock increments".into()));
    }
    let dx = 2.0 * PI / n_steps as f64;
    let ds = options.clock_step;
    let outcomes: Vec<std::result::Result<Vec<Complex64>, Option<TimeChangeFailure>>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i);
            let walk = ClockWalk {
                rng: &mut rng,
                opts: options,
                z: Complex64::new(1.0, 0.0),
                w: Complex64::new(0.0, 0.0),
                s: 0.0,
                targets: Vec::with_capacity(options.per_path),
                steps: 0,
            };
            walk.run(dx)
        })
        .collect();
    let mut near_zero = 0;
    let mut unfinished = 0;
    let mut inc = Vec::with_capacity(count * options.per_path);
    for o in outcomes {
        match o {
            Ok(points) => {
                let mut prev = Complex64::new(0.0, 0.0);
                for p in points {
                    let d = p - prev;
                    inc.push((d.re, d.im));
                    prev = p;
                }
            }
            Err(Some(_)) => near_zero += 1,
            Err(None) => unfinished += 1,
        }
    }
    if near_zero + unfinished > count / 2 {
        return Err(Error::Degenerate(format!(
            "{near_zero} near-zero and {unfinished} unfinished paths out of {count}"
        )));
    }
    let n = inc.len() as f64;
    let sd = ds.sqrt();
    let z1: Vec<f64> = inc.iter().map(|(a, _)| a / sd).collect();
    let z2: Vec<f64> = inc.iter().map(|(_, b)| b / sd).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (m1, m2) = (mean(&z1), mean(&z2));
    let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let (v1, v2) = (var(&z1, m1), var(&z2, m2));
    // Var of the sample variance: (μ₄ − σ⁴)/n
    let var_se = |v: &[f64], m: f64, s2: f64| {
        let mu4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
        ((mu4 - s2 * s2) / n).sqrt()
    };
    let cov = z1.iter().zip(&z2).map(|(a, b)| (a - m1) * (b - m2)).sum::<f64>() / (n - 1.0);
    let corr = cov / (v1 * v2).sqrt();
    Ok(ConformalReport {
        paths: count,
        excluded_near_zero: near_zero,
        excluded_unfinished: unfinished,
        increments: inc.len(),
        clock_step: ds,
        mean_z_w1: m1 / (v1 / n).sqrt(),
        mean_z_w2: m2 / (v2 / n).sqrt(),
        var_ratio_w1: (v1, var_se(&z1, m1, v1)),
        var_ratio_w2: (v2, var_se(&z2, m2, v2)),
        correlation: (corr, (1.0 - corr * corr) / (n - 1.0).sqrt()),
        ks_p_w1: ks_normal_p_value(&z1),
        ks_p_w2: ks_normal_p_value(&z2),
    })
}

/// One-sample Kolmogorov–Smirnov test against `N(0,1)`, asymptotic p-value.
pub fn ks_normal_p_value(samples: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = normal.cdf(*x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    kolmogorov_survival((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn endpoints_are_pinned_exactly() {
        let u0 = c(0.3, -1.2);
        let p = sample_bridge(u0, 64, 9, 2).unwrap();
        assert_eq!(p.values[0], u0);
        assert_eq!(p.values[64], u0);
        assert!(sample_bridge(u0, 1, 9, 2).is_err());
    }

    #[test]
    fn rho_weight_examples() {
        let zero = BridgePath::new(vec![c(0.0, 0.0); 9]).unwrap();
        assert_eq!(rho_bridge_weight(&zero), 0.0);
        let one = BridgePath::new(vec![c(1.0, 0.0); 9]).unwrap();
        assert!((rho_bridge_weight(&one) + PI).abs() < 1e-14);
    }

    #[test]
    fn unit_and_double_modulus_clocks() {
        let n = 128;
        let dx = 2.0 * PI / n as f64;
        let circle: Vec<Complex64> = (0..=n).map(|k| Complex64::from_polar(1.0, 3.0 * k as f64 * dx)).collect();
        let tc = time_change_values(&circle, dx).unwrap();
        for (k, s) in tc.s.iter().enumerate() {
            assert!((s - k as f64 * dx).abs() < 1e-12);
        }
        assert!((tc.stop - 2.0 * PI).abs() < 1e-12);
        let double: Vec<Complex64> = circle.iter().map(|z| z * 2.0).collect();
        let tc2 = time_change_values(&double, dx).unwrap();
        assert!((tc2.stop - PI / 2.0).abs() < 1e-12);
        for (k, s) in tc2.s.iter().enumerate() {
            assert!((s - k as f64 * dx / 4.0).abs() < 1e-12);
        }
        // unwrapped phase of e^{3ix} winds three times
        assert!((tc.w[n].im - tc.w[0].im - 6.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn stopping_time_depends_only_on_modulus() {
        let p = sample_bridge(c(2.0, 1.0), 256, 4, 0).unwrap();
        let rotated: Vec<Complex64> = p
            .values
            .iter()
            .enumerate()
            .map(|(k, z)| z * Complex64::from_polar(1.0, (k as f64 * 0.01).sin()))
            .collect();
        let a = time_change(&p);
        let b = time_change_values(&rotated, p.dx());
        if let (Ok(a), Ok(b)) = (a, b) {
            assert_eq!(a.stop, b.stop);
        }
    }

    #[test]
    fn near_zero_paths_are_rejected() {
        let mut v = vec![c(1.0, 0.0); 9];
        v[4] = c(1e-8, 0.0);
        assert_eq!(time_change_values(&v, 0.1), Err(TimeChangeFailure::NearZero));
        let jump = vec![c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.01), c(-1.0, 0.0)];
        assert_eq!(time_change_values(&jump, 0.1), Err(TimeChangeFailure::PhaseJump));
    }

    #[test]
    fn inverse_time_change_recovers_grid() {
        let p = sample_bridge(c(3.0, 0.0), 512, 1, 1).unwrap();
        let tc = time_change(&p).expect("path stays away from zero");
        let x = inverse_time_change(&tc);
        for (k, xk) in x.iter().enumerate() {
            assert!((xk - k as f64 * p.dx()).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_shift_has_unit_density() {
        let times: Vec<f64> = (0..=16).map(|k| k as f64 * 0.1).collect();
        let x: Vec<f64> = times.iter().map(|t| t.sin()).collect();
        let k = vec![0.7; 17];
        assert_eq!(cameron_martin_log_density(&times, &x, &k).unwrap(), 0.0);
        assert!(cameron_martin_log_density(&times, &x, &k[..5]).is_err());
    }

    #[test]
    fn cameron_martin_stochastic_term_is_linear_in_shift() {
        let times: Vec<f64> = (0..=32).map(|k| k as f64 / 32.0).collect();
        let x: Vec<f64> = times.iter().map(|t| (7.0 * t).cos()).collect();
        let k1: Vec<f64> = times.iter().map(|t| t * (1.0 - t)).collect();
        let k2: Vec<f64> = times.iter().map(|t| (PI * t).sin()).collect();
        let stoch = |k: &[f64]| {
            let e: f64 = k.windows(2).zip(times.windows(2)).map(|(a, s)| (a[1] - a[0]).powi(2) / (s[1] - s[0])).sum();
            cameron_martin_log_density(&times, &x, k).unwrap() + 0.5 * e
        };
        let sum: Vec<f64> = k1.iter().zip(&k2).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        assert!((stoch(&sum) - (2.0 * stoch(&k1) - 3.0 * stoch(&k2))).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // P(K > 1.36) ≈ 0.049
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 1e-3);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        assert!(kolmogorov_survival(3.0) < 1e-6);
    }

    #[test]
    fn decimation_keeps_nodes() {
        let p = sample_bridge(c(0.0, 0.0), 64, 2, 0).unwrap();
        let d = p.decimate(4).unwrap();
        assert_eq!(d.n_steps(), 16);
        assert_eq!(d.values[3], p.values[12]);
        assert!(p.decimate(3).is_err());
    }

    #[test]
    fn conformal_increments_look_gaussian() {
        let r = conformal_gaussianity_check(2000, 256, 3, &ConformalOptions::default()).unwrap();
        assert_eq!(r.excluded_near_zero + r.excluded_unfinished, 0);
        assert_eq!(r.increments, 8000);
        assert!(r.max_z() < 4.0 && r.ks_p_w1 > 1e-3 && r.ks_p_w2 > 1e-3, "{r:?}");
        assert!(conformal_gaussianity_check(10, 256, 3, &ConformalOptions::default()).is_err());
    }
}
