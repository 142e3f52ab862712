//! The Gaussian measure `ρ_N`, the weighted measures `ν` and `μ`, and
//! weighted Monte Carlo estimation.
//!
//! `ρ_N` is the Fourier truncation of the Gaussian measure with density
//! `exp(−½∫(|u|² + |u_x|²))`. With `u = Σ û_n e^{inx}` the quadratic form is
//! `π Σ (1+n²)|û_n|²`, so the real and imaginary parts of `û_n` are
//! independent centred normals of variance `1/(2π(1+n²))`.
//!
//! `ν` and `μ` are represented by importance weights relative to `ρ_N`:
//! `log dν/dρ = −½N(u)` and `log dμ/dρ = −½𝒩(w)` (up to normalisation) on
//! the ball `‖·‖_{L²} <= B`, and `−∞` outside it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Integrals;
use crate::rng::{self, standard_normal, StreamRng};
use crate::spectral::SpectralField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Rho,
    Nu,
    Mu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    pub modes: usize,
    /// L² cutoff `B`.
    pub mass_cutoff: f64,
    /// Inverse temperature; 1 throughout the acceptance suite.
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub which: MeasureKind,
}

fn default_beta() -> f64 {
    1.0
}

impl MeasureConfig {
    pub fn new(modes: usize, mass_cutoff: f64, which: MeasureKind) -> Result<Self> {
        let c = Self {
            modes,
            mass_cutoff,
            beta: 1.0,
            which,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes < 1 {
            return Err(Error::Config("mode cutoff N must be at least 1".into()));
        }
        if !(self.mass_cutoff > 0.0) {
            return Err(Error::Config(format!("mass cutoff B must be positive, got {}", self.mass_cutoff)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }

    /// Variance of each real component of `û_n` under `ρ_N`.
    pub fn mode_variance(&self, n: i64) -> f64 {
        1.0 / (2.0 * PI * self.beta * (1.0 + (n * n) as f64))
    }

    /// Whether `‖u‖_{L²} <= B`.
    pub fn inside_cutoff(&self, u: &SpectralField) -> bool {
        u.l2_norm_sq() <= self.mass_cutoff * self.mass_cutoff
    }

    /// Log-weight of the configured measure relative to `ρ_N`.
    pub fn log_weight(&self, u: &SpectralField) -> f64 {
        match self.which {
            MeasureKind::Rho => 0.0,
            MeasureKind::Nu => log_weight_nu(u, self),
            MeasureKind::Mu => log_weight_mu(u, self),
        }
    }
}

/// Monte Carlo estimate with its standard error and effective sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub count: usize,
    pub ess: f64,
    /// Set when the effective sample size fell below the requested floor.
    #[serde(default)]
    pub low_ess: bool,
}

impl McEstimate {
    pub fn exact(value: f64, count: usize) -> Self {
        Self {
            value,
            stderr: 0.0,
            count,
            ess: count as f64,
            low_ess: false,
        }
    }

    /// `|a − b| / sqrt(se_a² + se_b²)`, zero when both are exact and equal.
    pub fn sigma_gap(&self, other: &McEstimate) -> f64 {
        sigma_gap(self.value - other.value, self.stderr.hypot(other.stderr))
    }
}

pub(crate) fn sigma_gap(diff: f64, stderr: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if stderr == 0.0 {
        f64::INFINITY
    } else {
        diff.abs() / stderr
    }
}

/// Samples plus log-weights relative to `ρ_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble {
    pub samples: Vec<SpectralField>,
    pub log_weights: Vec<f64>,
    pub seed: u64,
    pub config: MeasureConfig,
}

impl WeightedEnsemble {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Effective sample size of the stored weights.
    pub fn ess(&self) -> f64 {
        effective_sample_size(&self.log_weights)
    }

    /// Fraction of samples with finite weight.
    pub fn acceptance_fraction(&self) -> f64 {
        self.log_weights.iter().filter(|l| l.is_finite()).count() as f64 / self.len().max(1) as f64
    }
}

/// Draws one `ρ_N` sample from an explicit stream.
pub fn draw_rho(config: &MeasureConfig, rng: &mut StreamRng) -> SpectralField {
    SpectralField::from_fn(config.modes, |n| {
        let sd = config.mode_variance(n).sqrt();
        let re = standard_normal(rng) * sd;
        let im = standard_normal(rng) * sd;
        Complex64::new(re, im)
    })
}

/// Sample `index` of the `ρ_N` ensemble keyed by `seed`.
pub fn rho_sample(config: &MeasureConfig, seed: u64, index: u64) -> SpectralField {
    draw_rho(config, &mut rng::stream(seed, index))
}

/// `count` independent `ρ_N` samples weighted for `config.which`.
pub fn sample_weighted(config: &MeasureConfig, seed: u64, count: usize) -> Result<WeightedEnsemble> {
    config.validate()?;
    let samples: Vec<SpectralField> = (0..count as u64)
        .into_par_iter()
        .map(|i| rho_sample(config, seed, i))
        .collect();
    let log_weights = samples.par_iter().map(|u| config.log_weight(u)).collect();
    Ok(WeightedEnsemble {
        samples,
        log_weights,
        seed,
        config: *config,
    })
}

/// Independent `ρ_N` samples with zero log-weights.
pub fn sample_rho(config: &MeasureConfig, seed: u64, count: usize) -> Result<WeightedEnsemble> {
    let cfg = MeasureConfig {
        which: MeasureKind::Rho,
        ..*config
    };
    sample_weighted(&cfg, seed, count)
}

/// `−½N(u)` inside the L² ball, `−∞` outside.
pub fn log_weight_nu(u: &SpectralField, config: &MeasureConfig) -> f64 {
    if !config.inside_cutoff(u) {
        return f64::NEG_INFINITY;
    }
    -0.5 * config.beta * Integrals::of(u).nonquad()
}

/// `−½𝒩(w)` inside the L² ball, `−∞` outside.
pub fn log_weight_mu(w: &SpectralField, config: &MeasureConfig) -> f64 {
    if !config.inside_cutoff(w) {
        return f64::NEG_INFINITY;
    }
    -0.5 * config.beta * Integrals::of(w).gauged_nonquad()
}

/// `(Σw)²/Σw²`, computed stably from log-weights.
pub fn effective_sample_size(log_weights: &[f64]) -> f64 {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return 0.0;
    }
    let (s1, s2) = log_weights.iter().fold((0.0, 0.0), |(a, b), l| {
        let w = (l - max).exp();
        (a + w, b + w * w)
    });
    s1 * s1 / s2
}

/// Self-normalised importance estimate `Σ F_i e^{ℓ_i} / Σ e^{ℓ_i}` with a
/// delta-method standard error.
pub fn self_normalized(values: &[f64], log_weights: &[f64]) -> Result<McEstimate> {
    if values.len() != log_weights.len() {
        return Err(Error::Size(format!(
            "{} observable values for {} weights",
            values.len(),
            log_weights.len()
        )));
    }
    if values.is_empty() {
        return Err(Error::Degenerate("empty ensemble".into()));
    }
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Degenerate("every sample has zero weight".into()));
    }
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let value = w.iter().zip(values).map(|(wi, f)| wi * f).sum::<f64>() / sw;
    let var = w
        .iter()
        .zip(values)
        .map(|(wi, f)| wi * wi * (f - value) * (f - value))
        .sum::<f64>()
        / (sw * sw);
    Ok(McEstimate {
        value,
        stderr: var.sqrt(),
        count: values.len(),
        ess: sw * sw / sw2,
        low_ess: false,
    })
}

/// Difference of two self-normalised estimators computed on the same samples,
/// with the paired (common random numbers) delta-method standard error.
pub fn paired_difference(
    values_a: &[f64],
    log_weights_a: &[f64],
    values_b: &[f64],
    log_weights_b: &[f64],
) -> Result<(f64, f64)> {
    let infl = |values: &[f64], lw: &[f64]| -> Result<(f64, Vec<f64>)> {
        let est = self_normalized(values, lw)?;
        let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lw.iter().map(|l| (l - max).exp()).collect();
        let mean_w = w.iter().sum::<f64>() / w.len() as f64;
        Ok((
            est.value,
            w.iter()
                .zip(values)
                .map(|(wi, f)| wi * (f - est.value) / mean_w)
                .collect(),
        ))
    };
    if values_a.len() != values_b.len() {
        return Err(Error::Size("paired estimators need equal sample counts".into()));
    }
    let (va, ia) = infl(values_a, log_weights_a)?;
    let (vb, ib) = infl(values_b, log_weights_b)?;
    let n = ia.len() as f64;
    let var = ia.iter().zip(&ib).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (n * n);
    Ok((va - vb, var.sqrt()))
}

/// Weighted expectation of `observable` under an ensemble, optionally
/// reweighted by an extra log-density. Flags the estimate if the effective
/// sample size drops below `ess_floor` (a fraction of the count).
pub fn expectation<F, R>(
    ensemble: &WeightedEnsemble,
    observable: F,
    reweight: Option<R>,
    ess_floor: f64,
) -> Result<McEstimate>
where
    F: Fn(&SpectralField) -> f64 + Sync,
    R: Fn(&SpectralField) -> f64 + Sync,
{
    if ensemble.is_empty() {
        return Err(Error::Degenerate("empty ensemble".into()));
    }
    let values: Vec<f64> = ensemble.samples.par_iter().map(&observable).collect();
    let log_weights: Vec<f64> = match &reweight {
        Some(r) => ensemble
            .samples
            .par_iter()
            .zip(&ensemble.log_weights)
            .map(|(u, l)| l + r(u))
            .collect(),
        None => ensemble.log_weights.clone(),
    };
    let mut est = self_normalized(&values, &log_weights)?;
    est.low_ess = est.ess < ess_floor * est.count as f64;
    Ok(est)
}

/// Plain Monte Carlo mean of `e^{ℓ_i}` with a jackknife standard error.
pub fn mean_of_exp(log_values: &[f64]) -> McEstimate {
    let n = log_values.len();
    let max = log_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if n == 0 || !max.is_finite() {
        return McEstimate {
            value: 0.0,
            stderr: 0.0,
            count: n,
            ess: 0.0,
            low_ess: true,
        };
    }
    let scaled: Vec<f64> = log_values.iter().map(|l| (l - max).exp()).collect();
    let (value_scaled, se_scaled) = jackknife_mean(&scaled);
    let scale = max.exp();
    McEstimate {
        value: value_scaled * scale,
        stderr: se_scaled * scale,
        count: n,
        ess: effective_sample_size(log_values),
        low_ess: false,
    }
}

/// Delete-one jackknife estimate of the mean and its standard error.
pub fn jackknife_mean(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let total: f64 = values.iter().sum();
    let mean = total / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let loo: Vec<f64> = values.iter().map(|v| (total - v) / (n - 1) as f64).collect();
    let loo_mean = loo.iter().sum::<f64>() / n as f64;
    let var = (n - 1) as f64 / n as f64 * loo.iter().map(|v| (v - loo_mean).powi(2)).sum::<f64>();
    (mean, var.sqrt())
}

/// Estimates `𝒵 = E_ρ[χ_{‖u‖<=B} e^{−N(u)/2}]`.
pub fn estimate_normalization(config: &MeasureConfig, seed: u64, count: usize) -> Result<McEstimate> {
    if count < 100 {
        return Err(Error::Config(format!("normalisation needs at least 100 samples, got {count}")));
    }
    let cfg = MeasureConfig {
        which: MeasureKind::Nu,
        ..*config
    };
    let ens = sample_weighted(&cfg, seed, count)?;
    Ok(mean_of_exp(&ens.log_weights))
}

/// Tuning knobs for the Metropolis sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcOptions {
    /// `s` in the proposal `u' = sqrt(1−s²) u + s ξ`, `ξ ~ ρ_N`.
    pub step_scale: f64,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for McmcOptions {
    fn default() -> Self {
        Self {
            step_scale: 0.5,
            burn_in: 500,
            thin: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcDiagnostics {
    pub acceptance_rate: f64,
    pub proposals: usize,
    /// Acceptance rate outside `[0.1, 0.9]`.
    pub needs_tuning: bool,
}

/// Metropolis chain targeting `config.which` relative to `ρ_N`, using the
/// autoregressive proposal that leaves `ρ_N` invariant, so only the weight
/// ratio enters the acceptance probability. Emits every `thin`-th state after
/// `burn_in` steps, starting from `u = 0`.
pub fn mcmc_sample(
    config: &MeasureConfig,
    seed: u64,
    count: usize,
    options: &McmcOptions,
) -> Result<(WeightedEnsemble, McmcDiagnostics)> {
    config.validate()?;
    let s = options.step_scale;
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Config(format!("step scale must lie in (0, 1], got {s}")));
    }
    let thin = options.thin.max(1);
    let mut rng = rng::stream(seed, u64::MAX);
    let mut state = SpectralField::zeros(config.modes);
    let mut state_lw = config.log_weight(&state);
    let keep = (1.0 - s * s).sqrt();
    let total = options.burn_in + count * thin;
    let mut accepted = 0usize;
    let mut samples = Vec::with_capacity(count);
    for step in 0..total {
        let xi = draw_rho(config, &mut rng);
        let mut proposal = state.clone();
        for (p, x) in proposal.coeffs_mut().iter_mut().zip(xi.coeffs()) {
            *p = *p * keep + x * s;
        }
        let lw = config.log_weight(&proposal);
        let u: f64 = rand::Rng::random(&mut rng);
        if lw.is_finite() && u.ln() < lw - state_lw {
            state = proposal;
            state_lw = lw;
            accepted += 1;
        }
        if step >= options.burn_in && (step - options.burn_in) % thin == thin - 1 {
            samples.push(state.clone());
        }
    }
    let rate = accepted as f64 / total as f64;
    let ensemble = WeightedEnsemble {
        log_weights: vec![0.0; samples.len()],
        samples,
        seed,
        config: *config,
    };
    Ok((
        ensemble,
        McmcDiagnostics {
            acceptance_rate: rate,
            proposals: total,
            needs_tuning: !(0.1..=0.9).contains(&rate),
        },
    ))
}

/// Target-specific convenience wrapper for `ν`.
pub fn mcmc_sample_nu(
    config: &MeasureConfig,
    seed: u64,
    count: usize,
    options: &McmcOptions,
) -> Result<(WeightedEnsemble, McmcDiagnostics)> {
    let cfg = MeasureConfig {
        which: MeasureKind::Nu,
        ..*config
    };
    mcmc_sample(&cfg, seed, count, options)
}

/// Lag-window estimate of the integrated autocorrelation time of a chain trace.
pub fn integrated_autocorrelation(trace: &[f64]) -> f64 {
    let n = trace.len();
    if n < 4 {
        return 1.0;
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let var = trace.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let c = (0..n - lag)
            .map(|i| (trace[i] - mean) * (trace[i + lag] - mean))
            .sum::<f64>()
            / (n as f64 * var);
        if c <= 0.0 {
            break;
        }
        tau += 2.0 * c;
    }
    tau
}

/// Chain mean with standard error inflated by the autocorrelation time.
pub fn chain_estimate(trace: &[f64]) -> McEstimate {
    let n = trace.len();
    let mean = trace.iter().sum::<f64>() / n as f64;
    let var = trace.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    let tau = integrated_autocorrelation(trace);
    McEstimate {
        value: mean,
        stderr: (var * tau / n as f64).sqrt(),
        count: n,
        ess: n as f64 / tau,
        low_ess: false,
    }
}

/// A named scalar observable on fields.
#[derive(Clone, Copy)]
pub struct FieldObservable {
    pub name: &'static str,
    pub eval: fn(&SpectralField) -> f64,
}

impl std::fmt::Debug for FieldObservable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name)
    }
}

fn obs_mass(u: &SpectralField) -> f64 {
    crate::functionals::mass(u)
}

fn obs_quartic(u: &SpectralField) -> f64 {
    Integrals::of(u).quartic
}

fn obs_re_zero_mode(u: &SpectralField) -> f64 {
    u.coeff(0).re
}

fn obs_cos_re_origin(u: &SpectralField) -> f64 {
    let v: Complex64 = u.coeffs().iter().sum();
    v.re.cos()
}

/// `{m(u), ∫|u|⁴, Re û_0, cos(Re u(0))}`
pub fn standard_panel() -> Vec<FieldObservable> {
    vec![
        FieldObservable { name: "mass", eval: obs_mass },
        FieldObservable { name: "quartic", eval: obs_quartic },
        FieldObservable { name: "re_zero_mode", eval: obs_re_zero_mode },
        FieldObservable { name: "cos_re_origin", eval: obs_cos_re_origin },
    ]
}

/// One observable compared between `E_ν[F∘G]` and `E_μ[F]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardGap {
    pub name: String,
    pub nu_of_gauged: McEstimate,
    pub mu: McEstimate,
    pub sigma_gap: f64,
}

/// Result of [`pushforward_consistency`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardReport {
    pub modes: usize,
    pub mass_cutoff: f64,
    pub count: usize,
    pub seed: u64,
    pub ess_nu: f64,
    pub ess_mu: f64,
    pub observables: Vec<PushforwardGap>,
}

impl PushforwardReport {
    pub fn max_sigma_gap(&self) -> f64 {
        self.observables.iter().map(|o| o.sigma_gap).fold(0.0, f64::max)
    }

    /// Sum over the panel of `|E_ν[F∘G] − E_μ[F]|`.
    pub fn total_gap(&self) -> f64 {
        self.observables.iter().map(|o| (o.nu_of_gauged.value - o.mu.value).abs()).sum()
    }
}

/// Compares `E_ν[F(G(u))]` with `E_μ[F(w)]` on the standard panel, both by
/// importance sampling from one set of `ρ_N` draws. `G(u)` is represented
/// with `gauge_modes` modes.
pub fn pushforward_consistency(
    modes: usize,
    mass_cutoff: f64,
    seed: u64,
    count: usize,
    gauge_modes: usize,
) -> Result<PushforwardReport> {
    let nu = MeasureConfig::new(modes, mass_cutoff, MeasureKind::Nu)?;
    let mu = MeasureConfig {
        which: MeasureKind::Mu,
        ..nu
    };
    let spec = crate::gauge::GaugeSpec::cutoff(mass_cutoff)?.with_output_modes(gauge_modes);
    let panel = standard_panel();
    let rows: Vec<(f64, f64, Vec<f64>, Vec<f64>)> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let u = rho_sample(&nu, seed, i);
            let lw_nu = log_weight_nu(&u, &nu);
            let lw_mu = log_weight_mu(&u, &mu);
            if !lw_nu.is_finite() {
                let zeros = vec![0.0; panel.len()];
                return (lw_nu, lw_mu, zeros.clone(), zeros);
            }
            let g = crate::gauge::gauge(&u, &spec);
            (
                lw_nu,
                lw_mu,
                panel.iter().map(|o| (o.eval)(&g)).collect(),
                panel.iter().map(|o| (o.eval)(&u)).collect(),
            )
        })
        .collect();
    let lw_nu: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let lw_mu: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let observables = panel
        .iter()
        .enumerate()
        .map(|(j, o)| {
            let a: Vec<f64> = rows.iter().map(|r| r.2[j]).collect();
            let b: Vec<f64> = rows.iter().map(|r| r.3[j]).collect();
            let nu_of_gauged = self_normalized(&a, &lw_nu)?;
            let mu_est = self_normalized(&b, &lw_mu)?;
            Ok(PushforwardGap {
                name: o.name.to_string(),
                sigma_gap: nu_of_gauged.sigma_gap(&mu_est),
                nu_of_gauged,
                mu: mu_est,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PushforwardReport {
        modes,
        mass_cutoff,
        count,
        seed,
        ess_nu: effective_sample_size(&lw_nu),
        ess_mu: effective_sample_size(&lw_mu),
        observables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(modes: usize, b: f64, which: MeasureKind) -> MeasureConfig {
        MeasureConfig::new(modes, b, which).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(MeasureConfig::new(0, 1.0, MeasureKind::Rho).is_err());
        assert!(MeasureConfig::new(4, 0.0, MeasureKind::Rho).is_err());
        let mut c = cfg(4, 1.0, MeasureKind::Rho);
        c.beta = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn log_weight_examples() {
        let c = cfg(4, 1.0, MeasureKind::Nu);
        assert_eq!(log_weight_nu(&SpectralField::zeros(4), &c), 0.0);
        assert_eq!(log_weight_mu(&SpectralField::zeros(4), &c), 0.0);
        let big = SpectralField::constant(4, Complex64::new(1.0, 0.0)); // ‖u‖² = 2π > 1
        assert_eq!(log_weight_nu(&big, &c), f64::NEG_INFINITY);
        assert_eq!(log_weight_mu(&big, &c), f64::NEG_INFINITY);
        let a = 0.3;
        let k = SpectralField::constant(4, Complex64::new(0.0, a));
        assert_abs_diff_eq!(log_weight_nu(&k, &c), -PI * a.powi(6) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(log_weight_mu(&k, &c), -PI * a.powi(6) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn constant_observable_is_exact() {
        let ens = sample_weighted(&cfg(4, 1.0, MeasureKind::Nu), 3, 200).unwrap();
        let est = expectation(&ens, |_| 3.0, None::<fn(&SpectralField) -> f64>, 0.0).unwrap();
        assert_abs_diff_eq!(est.value, 3.0, epsilon = 1e-14);
        assert!(est.stderr < 1e-14);
    }

    #[test]
    fn all_rejected_is_degenerate() {
        let c = cfg(4, 1e-9, MeasureKind::Nu);
        let ens = sample_weighted(&c, 1, 100).unwrap();
        assert!(matches!(
            expectation(&ens, |_| 1.0, None::<fn(&SpectralField) -> f64>, 0.0),
            Err(Error::Degenerate(_))
        ));
        let z = estimate_normalization(&c, 1, 100).unwrap();
        assert_eq!(z.value, 0.0);
        assert_eq!(z.ess, 0.0);
        assert!(estimate_normalization(&c, 1, 99).is_err());
    }

    #[test]
    fn samples_are_reproducible_per_index() {
        let c = cfg(8, 2.0, MeasureKind::Rho);
        let a = sample_rho(&c, 11, 5).unwrap();
        let b = sample_rho(&c, 11, 9).unwrap();
        assert_eq!(a.samples[..], b.samples[..5]);
        assert_eq!(rho_sample(&c, 11, 3), a.samples[3]);
    }

    #[test]
    fn jackknife_of_mean_matches_standard_error() {
        let v = [1.0, 2.0, 4.0, 7.0, 11.0];
        let (m, se) = jackknife_mean(&v);
        let mean = 5.0;
        let s2 = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(m, mean);
        assert_abs_diff_eq!(se, (s2 / 5.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn ess_of_equal_weights_is_count() {
        assert_abs_diff_eq!(effective_sample_size(&[0.3; 10]), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(effective_sample_size(&[0.0, f64::NEG_INFINITY]), 1.0);
    }

    #[test]
    fn mcmc_is_deterministic_and_flags_tuning() {
        let c = cfg(4, 1.5, MeasureKind::Nu);
        let opts = McmcOptions { step_scale: 0.3, burn_in: 10, thin: 2 };
        let (a, da) = mcmc_sample(&c, 5, 50, &opts).unwrap();
        let (b, _) = mcmc_sample(&c, 5, 50, &opts).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.len(), 50);
        assert!(da.acceptance_rate > 0.0);
        let tiny = cfg(4, 1e-3, MeasureKind::Nu);
        let (_, dt) = mcmc_sample(&tiny, 5, 20, &opts).unwrap();
        assert!(dt.needs_tuning);
        assert!(mcmc_sample(&c, 5, 5, &McmcOptions { step_scale: 0.0, ..opts }).is_err());
    }
}
