//! The gauge transformation `G(f) = e^{-iJ(f)} f` and its inverse.
//!
//! `J(f)` is the zero-mean antiderivative of `h = |f|² − m(f)`; the
//! double-integral definition `(1/2π)∫₀^{2π}∫_θ^x h dy dθ` reduces to exactly
//! that, since averaging over the lower limit subtracts the mean of any
//! antiderivative. In cutoff mode the transformation is the identity on fields
//! whose mass exceeds `B²/2π`.
//!
//! Because `J` depends on `f` only through `|f|`, and `|G(f)| = |f|`, the same
//! phase serves both directions.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{fft_forward, fft_inverse, padded_size, GridField, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeMode {
    /// `J` is applied to every field.
    Plain,
    /// `J ≡ 0` whenever `m(f) > B²/2π`.
    Cutoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeSpec {
    /// The L² threshold `B`; fields with `‖f‖_{L²} <= B` are gauged in cutoff mode.
    pub mass_cutoff: f64,
    pub mode: GaugeMode,
    /// Cutoff of the returned field; `None` keeps the input cutoff.
    #[serde(default)]
    pub output_modes: Option<usize>,
}

impl GaugeSpec {
    pub fn plain() -> Self {
        Self {
            mass_cutoff: f64::INFINITY,
            mode: GaugeMode::Plain,
            output_modes: None,
        }
    }

    pub fn cutoff(mass_cutoff: f64) -> Result<Self> {
        if !(mass_cutoff > 0.0) {
            return Err(Error::Config(format!("mass cutoff must be positive, got {mass_cutoff}")));
        }
        Ok(Self {
            mass_cutoff,
            mode: GaugeMode::Cutoff,
            output_modes: None,
        })
    }

    pub fn with_output_modes(mut self, modes: usize) -> Self {
        self.output_modes = Some(modes);
        self
    }

    /// `B²/2π`, the largest mass `m` that is still gauged.
    pub fn mass_threshold(&self) -> f64 {
        self.mass_cutoff * self.mass_cutoff / (2.0 * PI)
    }

    /// Whether a field of mass `m` is transformed.
    pub fn is_active(&self, mass: f64) -> bool {
        match self.mode {
            GaugeMode::Plain => true,
            GaugeMode::Cutoff => mass <= self.mass_threshold(),
        }
    }
}

/// Direction of the phase rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `G(f) = e^{-iJ} f`
    Forward,
    /// `G⁻¹(f) = e^{+iJ} f`
    Inverse,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        }
    }
}

/// Zero-mean antiderivative of the trigonometric interpolant of `h` sampled on
/// an equispaced grid. The mean of `h` is discarded.
pub(crate) fn spectral_antiderivative(h: &[f64]) -> Vec<f64> {
    let m = h.len();
    let mut buf: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    let half = (m / 2) as i64;
    for k in 0..m {
        let n = if (k as i64) <= half { k as i64 } else { k as i64 - m as i64 };
        // The Nyquist mode of an even grid has no odd-symmetric antiderivative.
        if n == 0 || (m % 2 == 0 && n == half) {
            buf[k] = Complex64::new(0.0, 0.0);
        } else {
            buf[k] /= Complex64::new(0.0, n as f64 * m as f64);
        }
    }
    fft_inverse(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// `h` and `J` evaluated on the nodes of `g`. Returns zeros if the cutoff is
/// inactive for the grid mass.
pub fn phase_on_grid(g: &GridField, spec: &GaugeSpec) -> (Vec<f64>, Vec<f64>) {
    let abs_sq: Vec<f64> = g.values.iter().map(|c| c.norm_sqr()).collect();
    let mass = abs_sq.iter().sum::<f64>() / abs_sq.len().max(1) as f64;
    if !spec.is_active(mass) {
        return (vec![0.0; abs_sq.len()], vec![0.0; abs_sq.len()]);
    }
    let h: Vec<f64> = abs_sq.iter().map(|a| a - mass).collect();
    let j = spectral_antiderivative(&h);
    (h, j)
}

/// Rotates grid samples by `e^{∓iJ}`, with `J` computed from the samples.
/// Exactly invertible at fixed resolution.
pub fn gauge_grid(g: &GridField, spec: &GaugeSpec, direction: Direction) -> GridField {
    let (_, j) = phase_on_grid(g, spec);
    let s = direction.sign();
    GridField::new(
        g.values
            .iter()
            .zip(&j)
            .map(|(v, &jj)| v * Complex64::from_polar(1.0, s * jj))
            .collect(),
    )
}

/// The derivative functional `h(f) = |f|² − m(f)` on the padded grid of `f`
/// (zero when the cutoff switches the gauge off).
pub fn h(f: &SpectralField, spec: &GaugeSpec) -> GridField {
    let g = f.to_grid(padded_size(f.modes())).expect("padded grid holds the field");
    GridField::from_real(&phase_on_grid(&g, spec).0)
}

/// The phase `J(f)` on the padded grid of `f`.
pub fn phase(f: &SpectralField, spec: &GaugeSpec) -> GridField {
    phase_on(f, spec, padded_size(f.modes()))
}

/// The phase `J(f)` on a grid of `points` nodes (`points >= 4N+1` keeps `|f|²` exact).
pub fn phase_on(f: &SpectralField, spec: &GaugeSpec, points: usize) -> GridField {
    let points = points.max(4 * f.modes() + 1);
    let g = f.to_grid(points).expect("grid holds the field");
    GridField::from_real(&phase_on_grid(&g, spec).1)
}

/// Result of a spectral gauge application.
#[derive(Debug, Clone)]
pub struct Gauged {
    pub field: SpectralField,
    /// L² norm of the modes discarded by truncation, relative to `‖f‖_{L²}`.
    pub truncation_residual: f64,
}

fn work_grid(input_modes: usize, output_modes: usize) -> usize {
    padded_size(input_modes).max((4 * (2 * output_modes + 1)).next_power_of_two())
}

/// Applies `G` or `G⁻¹` and truncates to the configured output cutoff.
pub fn apply(f: &SpectralField, spec: &GaugeSpec, direction: Direction) -> Gauged {
    let out = spec.output_modes.unwrap_or(f.modes());
    let points = work_grid(f.modes(), out);
    let g = f.to_grid(points).expect("work grid holds the field");
    let rotated = gauge_grid(&g, spec, direction);
    let field = rotated.to_spectral(out).expect("work grid resolves the output cutoff");
    let total: f64 = rotated.values.iter().map(|c| c.norm_sqr()).sum::<f64>() / points as f64;
    let kept: f64 = field.coeffs().iter().map(|c| c.norm_sqr()).sum();
    let truncation_residual = if total > 0.0 {
        ((total - kept).max(0.0) / total).sqrt()
    } else {
        0.0
    };
    Gauged {
        field,
        truncation_residual,
    }
}

/// `G(f) = e^{-iJ(f)} f`.
pub fn gauge(f: &SpectralField, spec: &GaugeSpec) -> SpectralField {
    apply(f, spec, Direction::Forward).field
}

/// `G⁻¹(f) = e^{+iJ(f)} f`.
pub fn gauge_inverse(f: &SpectralField, spec: &GaugeSpec) -> SpectralField {
    apply(f, spec, Direction::Inverse).field
}

/// Left-endpoint phase on a path grid: `J_{k+1} − J_k = h_k Δx`, then shifted
/// to zero mean over the `n` left nodes. `modulus_sq` holds `|Z_k|²` for
/// `k = 0..n` (the closing node excluded). Returns `None` when the cutoff is
/// inactive.
pub fn path_phase(modulus_sq: &[f64], spec: &GaugeSpec) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = modulus_sq.len();
    let mass = modulus_sq.iter().sum::<f64>() / n as f64;
    if !spec.is_active(mass) {
        return None;
    }
    let dx = 2.0 * PI / n as f64;
    let h: Vec<f64> = modulus_sq.iter().map(|a| a - mass).collect();
    let mut j = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    j.push(0.0);
    for hk in &h {
        acc += hk * dx;
        j.push(acc);
    }
    let mean = j[..n].iter().sum::<f64>() / n as f64;
    for v in &mut j {
        *v -= mean;
    }
    Some((h, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::grid_points;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one_plus_half_e() -> SpectralField {
        let mut f = SpectralField::constant(4, c(1.0, 0.0));
        *f.coeff_mut(1) = c(0.5, 0.0);
        f
    }

    #[test]
    fn unimodular_field_has_zero_phase() {
        let f = SpectralField::plane_wave(5, 3, c(0.0, 1.0));
        let j = phase(&f, &GaugeSpec::plain());
        assert!(j.values.iter().all(|v| v.norm() < 1e-13));
        assert!(gauge(&f, &GaugeSpec::plain()).max_coeff_diff(&f) < 1e-13);
        assert!(gauge_inverse(&f, &GaugeSpec::plain()).max_coeff_diff(&f) < 1e-13);
    }

    #[test]
    fn phase_of_one_plus_half_e_is_sine() {
        let f = one_plus_half_e();
        let j = phase(&f, &GaugeSpec::plain());
        let hh = h(&f, &GaugeSpec::plain());
        for ((x, jv), hv) in grid_points(j.len()).zip(&j.values).zip(&hh.values) {
            assert!((jv.re - x.sin()).abs() < 1e-13);
            assert!((hv.re - x.cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn gauge_of_one_plus_half_e_matches_closed_form() {
        let spec = GaugeSpec::plain().with_output_modes(64);
        let f = one_plus_half_e();
        let g = gauge(&f, &spec);
        let grid = g.to_grid(256).unwrap();
        for (x, v) in grid_points(256).zip(&grid.values) {
            let expect = Complex64::from_polar(1.0, -x.sin()) * (c(1.0, 0.0) + 0.5 * Complex64::from_polar(1.0, x));
            assert!((v - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn constants_are_fixed() {
        let f = SpectralField::constant(3, c(0.7, -0.2));
        assert!(gauge(&f, &GaugeSpec::plain()).max_coeff_diff(&f) < 1e-15);
        assert!(gauge_inverse(&f, &GaugeSpec::plain()).max_coeff_diff(&f) < 1e-15);
        assert!(h(&f, &GaugeSpec::plain()).values.iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn cutoff_mode_switches_off_above_threshold() {
        let f = one_plus_half_e(); // m = 5/4
        let spec = GaugeSpec::cutoff(1.0).unwrap(); // threshold 1/2π < 5/4
        assert!(!spec.is_active(1.25));
        assert!(phase(&f, &spec).values.iter().all(|v| v.norm() == 0.0));
        assert!(h(&f, &spec).values.iter().all(|v| v.norm() == 0.0));
        assert!(gauge(&f, &spec).max_coeff_diff(&f) < 1e-15);
        let wide = GaugeSpec::cutoff(10.0).unwrap();
        assert!(wide.is_active(1.25));
        assert!(GaugeSpec::cutoff(0.0).is_err());
    }

    #[test]
    fn grid_gauge_round_trip_is_exact() {
        let f = one_plus_half_e().to_grid(64).unwrap();
        let spec = GaugeSpec::plain();
        let back = gauge_grid(&gauge_grid(&f, &spec, Direction::Forward), &spec, Direction::Inverse);
        for (a, b) in back.values.iter().zip(&f.values) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn path_phase_is_periodic_with_zero_mean() {
        let n = 64;
        let modulus_sq: Vec<f64> = (0..n).map(|k| 1.0 + (2.0 * PI * k as f64 / n as f64).cos()).collect();
        let (hv, j) = path_phase(&modulus_sq, &GaugeSpec::plain()).unwrap();
        assert!((j[0] - j[n]).abs() < 1e-13);
        assert!(j[..n].iter().sum::<f64>().abs() < 1e-12);
        assert!(hv.iter().sum::<f64>().abs() < 1e-12);
        assert!(path_phase(&modulus_sq, &GaugeSpec::cutoff(0.1).unwrap()).is_none());
    }
}
