//! Density of the gauge pushforward of the Brownian bridge, the exponential
//! moment check, and the two-sided transport experiment.
//!
//! For a bridge `Z` and `h = |Z|² − m(Z)`, the pushforward of the bridge law
//! under the path gauge `Z ↦ e^{−iJ}Z` has log-density
//! `Im∫h Z dZ̄ − ½∫h²|Z|²` with respect to the bridge law. On the grid the
//! stochastic integral is a left-point sum and `J` is the left-point
//! antiderivative of `h`, which makes the discrete statement exact up to the
//! Itô correction.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::{sample_bridge, BridgePath};
use crate::error::{Error, Result};
use crate::functionals::{density_exponent_pullback, gauged_nonquad, gaussian_pushforward_exponent, mass, nonquad};
use crate::gauge::{apply, path_phase, Direction, GaugeMode, GaugeSpec};
use crate::measures::{jackknife_mean, mean_of_exp, McEstimate};
use crate::spectral::SpectralField;

/// Smallest ensemble accepted by the Monte Carlo checks.
pub const MIN_COUNT: usize = 1000;

/// Orientation of the stochastic integral in the density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensitySign {
    /// `Im∫h Z dZ̄`
    Standard,
    /// `Im∫h Z̄ dZ`, the negative of the above. Kept as a negative control.
    Flipped,
}

impl DensitySign {
    fn factor(self) -> f64 {
        match self {
            DensitySign::Standard => 1.0,
            DensitySign::Flipped => -1.0,
        }
    }
}

/// Left-point sum `Im Σ_k h_k Z_k (Z̄_{k+1} − Z̄_k)`.
pub fn ito_integral(path: &BridgePath, h: &[f64]) -> Result<f64> {
    let n = path.n_steps();
    if h.len() != n && h.len() != n + 1 {
        return Err(Error::Size(format!("{} weights for a path of {n} steps", h.len())));
    }
    let z = &path.values;
    Ok((0..n)
        .map(|k| h[k] * (z[k] * (z[k + 1] - z[k]).conj()).im)
        .sum())
}

/// `Im∫h Z dZ̄ − ½∫h²|Z|²` for the gauge `spec`; zero where the cutoff is inactive.
pub fn rn_log_density(path: &BridgePath, spec: &GaugeSpec, sign: DensitySign) -> f64 {
    let modulus_sq = path.modulus_sq();
    match path_phase(&modulus_sq, spec) {
        Some((h, _)) => log_density_with(path, &h, &modulus_sq, sign),
        None => 0.0,
    }
}

fn log_density_with(path: &BridgePath, h: &[f64], modulus_sq: &[f64], sign: DensitySign) -> f64 {
    let stochastic = ito_integral(path, h).expect("phase is built on the path grid");
    // trapezoid and left sums agree on a closed path
    let quadratic: f64 = h.iter().zip(modulus_sq).map(|(a, r)| a * a * r).sum::<f64>() * path.dx();
    sign.factor() * stochastic - 0.5 * quadratic
}

/// The path gauge `Z_k ↦ e^{−iJ_k} Z_k` with the left-point phase.
pub fn gauge_path(path: &BridgePath, spec: &GaugeSpec) -> Vec<Complex64> {
    match path_phase(&path.modulus_sq(), spec) {
        Some((_, j)) => path
            .values
            .iter()
            .zip(&j)
            .map(|(z, jk)| z * Complex64::from_polar(1.0, -jk))
            .collect(),
        None => path.values.clone(),
    }
}

/// What an observable sees of a path.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    /// Values on `x_k = 2πk/n`, `k = 0..=n`.
    pub values: &'a [Complex64],
    /// `m(Z)`, identical for a path and its gauge image.
    pub mass: f64,
    /// `B²/2π` of the gauge under test.
    pub threshold: f64,
}

impl PathView<'_> {
    /// Value at `x`, rounded to the nearest node.
    pub fn at(&self, x: f64) -> Complex64 {
        let n = self.values.len() - 1;
        self.values[(x / (2.0 * PI) * n as f64).round() as usize]
    }
}

/// A named bounded path functional.
#[derive(Clone, Copy)]
pub struct PathObservable {
    pub name: &'static str,
    pub eval: fn(&PathView) -> f64,
}

impl std::fmt::Debug for PathObservable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name)
    }
}

fn cos_re_mid(p: &PathView) -> f64 {
    p.at(PI).re.cos()
}

fn exp_neg_norm(p: &PathView) -> f64 {
    (-2.0 * PI * p.mass).exp()
}

fn im_quarter_gauged(p: &PathView) -> f64 {
    if p.mass <= p.threshold {
        p.at(FRAC_PI_2).im
    } else {
        0.0
    }
}

fn capped_mass(p: &PathView) -> f64 {
    p.mass.min(1.0)
}

/// `Im(Z̄(π/2) Z(π)) / (1 + |Z(π/2)||Z(π)|)`: odd under conjugation, so it
/// separates the two density orientations when the endpoint is 0.
fn relative_phase(p: &PathView) -> f64 {
    let a = p.at(FRAC_PI_2);
    let b = p.at(PI);
    (a.conj() * b).im / (1.0 + a.norm() * b.norm())
}

/// `{cos(Re Z(π)), e^{−‖Z‖²}, Im Z(π/2)·1{m ≤ B²/2π}, m ∧ 1, relative phase}`
pub fn transport_panel() -> Vec<PathObservable> {
    vec![
        PathObservable { name: "cos_re_mid", eval: cos_re_mid },
        PathObservable { name: "exp_neg_norm", eval: exp_neg_norm },
        PathObservable { name: "im_quarter_gauged", eval: im_quarter_gauged },
        PathObservable { name: "capped_mass", eval: capped_mass },
        PathObservable { name: "relative_phase", eval: relative_phase },
    ]
}

/// Per-path quantities feeding every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub log_density: f64,
    pub gauged: bool,
    /// `F(G(Z))` per observable.
    pub pushed: Vec<f64>,
    /// `F(Z)·e^{ℓ(Z)}` per observable.
    pub weighted: Vec<f64>,
}

pub fn evaluate_path(path: &BridgePath, spec: &GaugeSpec, sign: DensitySign, observables: &[PathObservable]) -> PathRecord {
    let modulus_sq = path.modulus_sq();
    let m = modulus_sq.iter().sum::<f64>() / modulus_sq.len() as f64;
    let threshold = spec.mass_threshold();
    let (log_density, gauged_values, gauged) = match path_phase(&modulus_sq, spec) {
        Some((h, j)) => {
            let ld = log_density_with(path, &h, &modulus_sq, sign);
            let g: Vec<Complex64> = path
                .values
                .iter()
                .zip(&j)
                .map(|(z, jk)| z * Complex64::from_polar(1.0, -jk))
                .collect();
            (ld, g, true)
        }
        None => (0.0, path.values.clone(), false),
    };
    let plain = PathView {
        values: &path.values,
        mass: m,
        threshold,
    };
    let pushed_view = PathView {
        values: &gauged_values,
        mass: m,
        threshold,
    };
    let weight = log_density.exp();
    PathRecord {
        log_density,
        gauged,
        pushed: observables.iter().map(|o| (o.eval)(&pushed_view)).collect(),
        weighted: observables.iter().map(|o| (o.eval)(&plain) * weight).collect(),
    }
}

fn plain_mean(values: &[f64]) -> McEstimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    McEstimate {
        value: mean,
        stderr: (var / n as f64).sqrt(),
        count: n,
        ess: n as f64,
        low_ess: false,
    }
}

fn gap(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff.abs() / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Comparison of the two sides for one observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableGap {
    pub name: String,
    /// Mean of `F(G(Z))`.
    pub lhs: McEstimate,
    /// Mean of `F(Z)·dμ̃/dP(Z)`.
    pub rhs: McEstimate,
    /// `|lhs − rhs| / sqrt(se_lhs² + se_rhs²)`.
    pub sigma_gap: f64,
    /// The same gap using the paired standard error of the per-path difference.
    pub paired_sigma_gap: f64,
}

/// Parameters echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportParams {
    pub count: usize,
    pub n_steps: usize,
    pub spec: GaugeSpec,
    pub seed: u64,
    pub endpoint: [f64; 2],
    pub sign: DensitySign,
}

/// Output of the transport experiment at one resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnReport {
    pub novikov: McEstimate,
    pub gauged_fraction: f64,
    pub max_log_density: f64,
    /// Standard deviation of the log-density over gauged paths. For roughly
    /// Gaussian log-densities the mean of `e^ℓ` is carried by events of
    /// probability about `Φ(−sd)`.
    pub gauged_log_density_sd: f64,
    /// Set when the largest log-density exceeds `ln(count)`.
    pub extreme_weight: bool,
    pub observables: Vec<ObservableGap>,
    pub params: TransportParams,
}

impl RnReport {
    /// `|novikov − 1|` in standard errors.
    pub fn novikov_sigma(&self) -> f64 {
        gap(self.novikov.value - 1.0, self.novikov.stderr)
    }

    pub fn max_sigma_gap(&self) -> f64 {
        self.observables.iter().map(|o| o.sigma_gap).fold(0.0, f64::max)
    }

    /// Sum over the panel of `|lhs − rhs|`.
    pub fn total_gap(&self) -> f64 {
        self.observables.iter().map(|o| (o.lhs.value - o.rhs.value).abs()).sum()
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.novikov_sigma() <= threshold && self.max_sigma_gap() <= threshold
    }
}

/// Reduces per-path records (in index order) to a report.
pub fn aggregate(records: &[PathRecord], observables: &[PathObservable], params: TransportParams) -> Result<RnReport> {
    if records.len() < 2 {
        return Err(Error::Degenerate(format!("{} paths cannot give a standard error", records.len())));
    }
    let log_densities: Vec<f64> = records.iter().map(|r| r.log_density).collect();
    let novikov = mean_of_exp(&log_densities);
    if !novikov.value.is_finite() {
        return Err(Error::Degenerate("exponential moment overflowed".into()));
    }
    let max_log_density = log_densities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let gauged = records.iter().filter(|r| r.gauged).count();
    let gauged_ld: Vec<f64> = records.iter().filter(|r| r.gauged).map(|r| r.log_density).collect();
    let gauged_log_density_sd = if gauged_ld.len() > 1 {
        let mean = gauged_ld.iter().sum::<f64>() / gauged_ld.len() as f64;
        (gauged_ld.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (gauged_ld.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let observables = observables
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let lhs_v: Vec<f64> = records.iter().map(|r| r.pushed[i]).collect();
            let rhs_v: Vec<f64> = records.iter().map(|r| r.weighted[i]).collect();
            let diff: Vec<f64> = lhs_v.iter().zip(&rhs_v).map(|(a, b)| a - b).collect();
            let lhs = plain_mean(&lhs_v);
            let rhs = plain_mean(&rhs_v);
            let paired = plain_mean(&diff);
            ObservableGap {
                name: o.name.to_string(),
                sigma_gap: gap(lhs.value - rhs.value, lhs.stderr.hypot(rhs.stderr)),
                paired_sigma_gap: gap(paired.value, paired.stderr),
                lhs,
                rhs,
            }
        })
        .collect();
    Ok(RnReport {
        novikov,
        gauged_fraction: gauged as f64 / records.len() as f64,
        max_log_density,
        gauged_log_density_sd,
        extreme_weight: max_log_density > (records.len() as f64).ln(),
        observables,
        params,
    })
}

/// Settings shared by the Monte Carlo routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportConfig {
    pub count: usize,
    pub n_steps: usize,
    pub spec: GaugeSpec,
    pub seed: u64,
    pub endpoint: Complex64,
    pub sign: DensitySign,
}

impl TransportConfig {
    pub fn new(count: usize, n_steps: usize, spec: GaugeSpec, seed: u64) -> Self {
        Self {
            count,
            n_steps,
            spec,
            seed,
            endpoint: Complex64::new(0.0, 0.0),
            sign: DensitySign::Standard,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < MIN_COUNT {
            return Err(Error::Degenerate(format!(
                "{} paths is below the minimum of {MIN_COUNT}",
                self.count
            )));
        }
        if self.n_steps < 4 || self.n_steps % 4 != 0 {
            return Err(Error::Config(format!(
                "n_steps must be a positive multiple of 4, got {}",
                self.n_steps
            )));
        }
        Ok(())
    }

    fn params(&self, n_steps: usize) -> TransportParams {
        TransportParams {
            count: self.count,
            n_steps,
            spec: self.spec,
            seed: self.seed,
            endpoint: [self.endpoint.re, self.endpoint.im],
            sign: self.sign,
        }
    }
}

/// Monte Carlo estimate of `E[exp(ℓ(Z))]` over bridges; should be 1.
pub fn novikov_estimate(config: &TransportConfig) -> Result<RnReport> {
    config.validate()?;
    let records: Vec<PathRecord> = (0..config.count as u64)
        .into_par_iter()
        .map(|i| {
            let p = sample_bridge(config.endpoint, config.n_steps, config.seed, i).expect("validated step count");
            PathRecord {
                log_density: rn_log_density(&p, &config.spec, config.sign),
                gauged: config.spec.is_active(p.mass()),
                pushed: Vec::new(),
                weighted: Vec::new(),
            }
        })
        .collect();
    aggregate(&records, &[], config.params(config.n_steps))
}

/// Compares `E[F(G(Z))]` with `E[F(Z) e^{ℓ(Z)}]` over bridges.
pub fn verify_transport(config: &TransportConfig, observables: &[PathObservable]) -> Result<RnReport> {
    Ok(refinement_study(config, observables, 1)?.levels.remove(0))
}

/// Transport reports at `n_steps`, `n_steps/2`, … (`levels` entries), all
/// built from the same finest-level paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    /// Finest first.
    pub levels: Vec<RnReport>,
}

impl RefinementStudy {
    /// Whether the panel's total gap at the finest level is no larger than
    /// at the coarsest.
    pub fn gaps_shrink(&self) -> bool {
        match (self.levels.first(), self.levels.last()) {
            (Some(fine), Some(coarse)) => fine.total_gap() <= coarse.total_gap(),
            _ => true,
        }
    }
}

pub fn refinement_study(config: &TransportConfig, observables: &[PathObservable], levels: usize) -> Result<RefinementStudy> {
    config.validate()?;
    if levels == 0 || config.n_steps % (1 << (levels - 1)) != 0 || (config.n_steps >> (levels - 1)) < 4 {
        return Err(Error::Config(format!(
            "{} steps cannot be halved {} times",
            config.n_steps,
            levels.saturating_sub(1)
        )));
    }
    let per_path: Vec<Vec<PathRecord>> = (0..config.count as u64)
        .into_par_iter()
        .map(|i| {
            let p = sample_bridge(config.endpoint, config.n_steps, config.seed, i).expect("validated step count");
            (0..levels)
                .map(|l| {
                    let coarse = if l == 0 { p.clone() } else { p.decimate(1 << l).expect("divisible") };
                    evaluate_path(&coarse, &config.spec, config.sign, observables)
                })
                .collect()
        })
        .collect();
    let levels = (0..levels)
        .map(|l| {
            let records: Vec<PathRecord> = per_path.iter().map(|r| r[l].clone()).collect();
            aggregate(&records, observables, config.params(config.n_steps >> l))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RefinementStudy { levels })
}

/// `B` such that a fraction `target` of bridges (from a pilot run) has
/// `m(Z) ≤ B²/2π`.
pub fn cutoff_for_gauged_fraction(target: f64, n_steps: usize, endpoint: Complex64, pilot: usize, seed: u64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) || pilot < 10 {
        return Err(Error::Config(format!("cannot tune a cutoff for fraction {target} from {pilot} paths")));
    }
    let mut masses: Vec<f64> = (0..pilot as u64)
        .into_par_iter()
        .map(|i| sample_bridge(endpoint, n_steps, seed, i).map(|p| p.mass()))
        .collect::<Result<_>>()?;
    masses.sort_by(|a, b| a.total_cmp(b));
    let k = ((target * pilot as f64).ceil() as usize).clamp(1, pilot) - 1;
    Ok((2.0 * PI * masses[k]).sqrt())
}

/// Residuals of the field-level density chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityAlgebra {
    /// `N(G⁻¹w)` minus its closed form.
    pub pullback: f64,
    /// `−½N(G⁻¹w) + [Gaussian pushforward exponent](w) + ½𝒩(w)`.
    pub chain: f64,
    /// Sum of the magnitudes of the terms in the chain.
    pub scale: f64,
}

impl DensityAlgebra {
    pub fn max_relative(&self) -> f64 {
        self.pullback.abs().max(self.chain.abs()) / (1.0 + self.scale)
    }
}

/// Checks that the gauged density transforms into the Gaussian part plus
/// `−½𝒩`. `output_modes` is the cutoff used to represent `G⁻¹(w)`.
pub fn verify_density_algebra(w: &SpectralField, spec: &GaugeSpec, output_modes: usize) -> Result<DensityAlgebra> {
    let m = mass(w);
    if spec.mode == GaugeMode::Cutoff && !spec.is_active(m) {
        return Err(Error::Precondition(format!(
            "mass {m} exceeds the gauge threshold {}",
            spec.mass_threshold()
        )));
    }
    let plain = GaugeSpec {
        output_modes: Some(output_modes),
        ..GaugeSpec::plain()
    };
    let u = apply(w, &plain, Direction::Inverse).field;
    let n_u = nonquad(&u);
    let pullback = n_u - density_exponent_pullback(w);
    let gaussian = gaussian_pushforward_exponent(w);
    let script = gauged_nonquad(w);
    Ok(DensityAlgebra {
        pullback,
        chain: -0.5 * n_u + gaussian + 0.5 * script,
        scale: 0.5 * n_u.abs() + gaussian.abs() + 0.5 * script.abs(),
    })
}

/// Mean of `F(G(Z))` alone; used when only one side is needed.
pub fn pushforward_mean(config: &TransportConfig, observable: &PathObservable) -> Result<McEstimate> {
    config.validate()?;
    let threshold = config.spec.mass_threshold();
    let values: Vec<f64> = (0..config.count as u64)
        .into_par_iter()
        .map(|i| {
            let p = sample_bridge(config.endpoint, config.n_steps, config.seed, i).expect("validated step count");
            let g = gauge_path(&p, &config.spec);
            (observable.eval)(&PathView {
                values: &g,
                mass: p.mass(),
                threshold,
            })
        })
        .collect();
    let (value, stderr) = jackknife_mean(&values);
    Ok(McEstimate {
        value,
        stderr,
        count: values.len(),
        ess: values.len() as f64,
        low_ess: false,
    })
}
