//! Random sweeps over the algebraic identities linking the DNLS functionals
//! with their gauged counterparts, and over the exactness of the gauge.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::change_of_measure::verify_density_algebra;
use crate::error::{Error, Result};
use crate::functionals::{mass, pointwise_identity_residual, Integrals};
use crate::gauge::{self, GaugeSpec};
use crate::measures::{rho_sample, MeasureConfig, MeasureKind};
use crate::spectral::SpectralField;

/// Largest relative residual of each identity over a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// `E(u) = ℰ(G(u))`
    pub energy: f64,
    /// `H(u) = ℋ(G(u))`
    pub hamiltonian: f64,
    /// `ℰ(w) = 𝒮(w) + 2m ℋ(w) − 2π m³`
    pub energy_split: f64,
    /// `u²ū ū_x` in terms of `w`, pointwise
    pub pointwise_cubic: f64,
    /// `|u_x|²` in terms of `w`, pointwise
    pub pointwise_gradient: f64,
    /// Density chain of the gauge pushforward
    pub density_chain: f64,
    /// `N(G⁻¹w)` against its closed form
    pub pullback: f64,
}

impl IdentityResiduals {
    pub fn named(&self) -> [(&'static str, f64); 7] {
        [
            ("energy", self.energy),
            ("hamiltonian", self.hamiltonian),
            ("energy_split", self.energy_split),
            ("pointwise_cubic", self.pointwise_cubic),
            ("pointwise_gradient", self.pointwise_gradient),
            ("density_chain", self.density_chain),
            ("pullback", self.pullback),
        ]
    }

    pub fn max(&self) -> f64 {
        self.named().iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }

    fn merge(self, o: Self) -> Self {
        Self {
            energy: self.energy.max(o.energy),
            hamiltonian: self.hamiltonian.max(o.hamiltonian),
            energy_split: self.energy_split.max(o.energy_split),
            pointwise_cubic: self.pointwise_cubic.max(o.pointwise_cubic),
            pointwise_gradient: self.pointwise_gradient.max(o.pointwise_gradient),
            density_chain: self.density_chain.max(o.density_chain),
            pullback: self.pullback.max(o.pullback),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Cutoff for gauge images: `8N`, but never below 128 modes.
pub fn default_output_modes(modes: usize) -> usize {
    (8 * modes).max(128)
}

/// Options for [`identity_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub modes: usize,
    pub count: usize,
    pub seed: u64,
    /// Cutoff used to represent the non-band-limited gauge images.
    pub output_modes: usize,
    /// Deliberately flips the sign of `2mℋ` in the energy split, so the sweep
    /// must fail. Used to test the failure path.
    #[serde(default)]
    pub inject_sign_flip: bool,
}

impl SweepOptions {
    pub fn new(modes: usize, count: usize, seed: u64) -> Self {
        Self {
            modes,
            count,
            seed,
            output_modes: default_output_modes(modes),
            inject_sign_flip: false,
        }
    }
}

fn residuals_for(u: &SpectralField, options: &SweepOptions) -> IdentityResiduals {
    let plain = GaugeSpec::plain().with_output_modes(options.output_modes);
    let w_of_u = gauge::gauge(u, &plain);
    let iu = Integrals::of(u);
    let iw = Integrals::of(&w_of_u);
    // the same draw also serves as a band-limited w
    let w = u;
    let jw = Integrals::of(w);
    let m = jw.mass;
    let sign = if options.inject_sign_flip { -1.0 } else { 1.0 };
    let split = jw.script_energy() + sign * 2.0 * m * jw.gauged_hamiltonian() - 2.0 * PI * m * m * m;
    let pw = pointwise_identity_residual(w, options.output_modes);
    let chain = verify_density_algebra(w, &GaugeSpec::plain(), options.output_modes)
        .expect("the plain gauge has no cutoff");
    let scale = 1.0 + chain.scale;
    IdentityResiduals {
        energy: rel(iu.energy(), iw.gauged_energy()),
        hamiltonian: rel(iu.hamiltonian(), iw.gauged_hamiltonian()),
        energy_split: rel(jw.gauged_energy(), split),
        pointwise_cubic: pw.cubic_current / (1.0 + pw.scale),
        pointwise_gradient: pw.gradient / (1.0 + pw.scale),
        density_chain: chain.chain.abs() / scale,
        pullback: chain.pullback.abs() / scale,
    }
}

/// Evaluates every identity on `count` draws from `ρ_N`.
pub fn identity_sweep(options: &SweepOptions) -> Result<IdentityResiduals> {
    if options.count == 0 {
        return Err(Error::Config("identity sweep needs at least one field".into()));
    }
    if options.output_modes < 2 * options.modes {
        return Err(Error::Config(format!(
            "output cutoff {} is too small for N = {}",
            options.output_modes, options.modes
        )));
    }
    let cfg = MeasureConfig::new(options.modes, f64::INFINITY, MeasureKind::Rho)?;
    Ok((0..options.count as u64)
        .into_par_iter()
        .map(|i| residuals_for(&rho_sample(&cfg, options.seed, i), options))
        .reduce(IdentityResiduals::default, IdentityResiduals::merge))
}

/// Largest errors of the gauge over a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GaugeResiduals {
    /// `max |G⁻¹(G(f)) − f|` over coefficients.
    pub round_trip: f64,
    /// `max_x ||G(f)(x)| − |f(x)||`
    pub modulus: f64,
    /// `max_x |J(f)(x) − J_quad(f)(x)|` against nested quadrature.
    pub phase_oracle: f64,
}

impl GaugeResiduals {
    fn merge(self, o: Self) -> Self {
        Self {
            round_trip: self.round_trip.max(o.round_trip),
            modulus: self.modulus.max(o.modulus),
            phase_oracle: self.phase_oracle.max(o.phase_oracle),
        }
    }
}

fn eval_at(f: &SpectralField, x: f64) -> Complex64 {
    f.iter_modes().map(|(n, c)| c * Complex64::from_polar(1.0, n as f64 * x)).sum()
}

/// `J(x_j) = (1/2π)∫₀^{2π} ∫_θ^{x_j} (|f(y)|² − m) dy dθ` at `x_j = 2πj/points`,
/// by composite Gauss-Legendre on the inner integral and the trapezoidal
/// rule on the outer average. Direct summation of the Fourier series; slow.
pub fn nested_quadrature_phase(f: &SpectralField, points: usize) -> Vec<f64> {
    let m = mass(f);
    let gl = GaussLegendre::new(NonZeroUsize::new(24).expect("non-zero"));
    let panel = 2.0 * PI / points as f64;
    // K(θ_i) = ∫₀^{θ_i} h
    let mut k = Vec::with_capacity(points);
    let mut acc = 0.0;
    for i in 0..points {
        k.push(acc);
        let a = i as f64 * panel;
        acc += gl.integrate(a, a + panel, |y| eval_at(f, y).norm_sqr() - m);
    }
    // ∫_θ^x h = K(x) − K(θ); averaging over θ subtracts the mean of K
    let mean = k.iter().sum::<f64>() / points as f64;
    k.iter().map(|v| v - mean).collect()
}

/// Round trip, modulus and nested-quadrature checks on `count` draws from `ρ_N`.
pub fn gauge_sweep(modes: usize, count: usize, seed: u64) -> Result<GaugeResiduals> {
    if count == 0 {
        return Err(Error::Config("gauge sweep needs at least one field".into()));
    }
    let cfg = MeasureConfig::new(modes, f64::INFINITY, MeasureKind::Rho)?;
    let out = default_output_modes(modes);
    let plain = GaugeSpec::plain().with_output_modes(out);
    let back_spec = GaugeSpec::plain().with_output_modes(modes);
    let points = (4 * (2 * modes + 1)).next_power_of_two();
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| {
            let f = rho_sample(&cfg, seed, i);
            let g = gauge::gauge(&f, &plain);
            let back = gauge::gauge_inverse(&g, &back_spec);
            let fg = f.to_grid(4 * points).expect("fine grid");
            let gg = g.to_grid(4 * points).expect("fine grid");
            let modulus = fg
                .values
                .iter()
                .zip(&gg.values)
                .map(|(a, b)| (a.norm() - b.norm()).abs())
                .fold(0.0, f64::max);
            let j = gauge::phase_on(&f, &GaugeSpec::plain(), points);
            let oracle = nested_quadrature_phase(&f, points);
            let phase_oracle = j
                .values
                .iter()
                .zip(&oracle)
                .map(|(a, b)| (a.re - b).abs())
                .fold(0.0, f64::max);
            GaugeResiduals {
                round_trip: back.max_coeff_diff(&f),
                modulus,
                phase_oracle,
            }
        })
        .reduce(GaugeResiduals::default, GaugeResiduals::merge))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep_is_clean() {
        let r = identity_sweep(&SweepOptions::new(16, 20, 3)).unwrap();
        assert!(r.max() < 1e-9, "{r:?}");
    }

    #[test]
    fn injected_flip_is_caught() {
        let mut o = SweepOptions::new(8, 5, 3);
        o.inject_sign_flip = true;
        assert!(identity_sweep(&o).unwrap().energy_split > 1e-3);
        assert!(identity_sweep(&SweepOptions { count: 0, ..o }).is_err());
    }

    #[test]
    fn nested_quadrature_matches_sine_phase() {
        let mut f = SpectralField::constant(4, Complex64::new(1.0, 0.0));
        *f.coeff_mut(1) = Complex64::new(0.5, 0.0);
        let j = nested_quadrature_phase(&f, 64);
        for (k, v) in j.iter().enumerate() {
            let x = 2.0 * PI * k as f64 / 64.0;
            assert!((v - x.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn gauge_sweep_small() {
        let r = gauge_sweep(8, 5, 1).unwrap();
        assert!(r.round_trip < 1e-10 && r.modulus < 1e-11 && r.phase_oracle < 1e-9, "{r:?}");
    }
}
