//! Conserved quantities of the derivative NLS and their gauged counterparts.
//!
//! Every functional is a polynomial combination of a handful of integrals,
//! which [`Integrals`] computes once on the padded grid (trapezoid, exact for
//! the trigonometric polynomials that occur):
//!
//! | symbol | integral |
//! |---|---|
//! | `m` | `(1/2π)∫|u|²` |
//! | `grad` | `∫|u_x|²` |
//! | `current` | `Im ∫ u ū_x` |
//! | `cubic_current` | `Im ∫ u² ū ū_x` |
//! | `quartic` | `∫|u|⁴` |
//! | `sextic` | `∫|u|⁶` |

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::gauge::{self, GaugeSpec};
use crate::spectral::{padded_size, GridField, SpectralField};

/// The integrals every functional is assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integrals {
    pub mass: f64,
    pub grad: f64,
    pub current: f64,
    pub cubic_current: f64,
    pub quartic: f64,
    pub sextic: f64,
}

/// `u` and `u_x` sampled on the padded grid.
pub(crate) struct Sampled {
    pub u: GridField,
    pub ux: GridField,
}

impl Sampled {
    pub(crate) fn of(f: &SpectralField) -> Self {
        let m = padded_size(f.modes());
        Self {
            u: f.to_grid(m).expect("padded grid holds the field"),
            ux: f.derivative().to_grid(m).expect("padded grid holds the field"),
        }
    }
}

impl Integrals {
    pub fn of(f: &SpectralField) -> Self {
        let s = Sampled::of(f);
        let mut acc = [0.0f64; 5];
        for (u, ux) in s.u.values.iter().zip(&s.ux.values) {
            let a = u.norm_sqr();
            let j = (u * ux.conj()).im;
            acc[0] += ux.norm_sqr();
            acc[1] += j;
            acc[2] += a * j;
            acc[3] += a * a;
            acc[4] += a * a * a;
        }
        let w = 2.0 * PI / s.u.len() as f64;
        Integrals {
            mass: f.coeffs().iter().map(|c| c.norm_sqr()).sum(),
            grad: acc[0] * w,
            current: acc[1] * w,
            cubic_current: acc[2] * w,
            quartic: acc[3] * w,
            sextic: acc[4] * w,
        }
    }

    pub fn energy(&self) -> f64 {
        self.grad + self.nonquad()
    }

    pub fn hamiltonian(&self) -> f64 {
        self.current + 0.5 * self.quartic
    }

    pub fn nonquad(&self) -> f64 {
        1.5 * self.cubic_current + 0.5 * self.sextic
    }

    pub fn gauged_hamiltonian(&self) -> f64 {
        self.current - 0.5 * self.quartic + 2.0 * PI * self.mass * self.mass
    }

    pub fn gauged_nonquad(&self) -> f64 {
        let m = self.mass;
        -0.5 * self.cubic_current + 2.0 * m * self.current - 0.5 * m * self.quartic + 2.0 * PI * m.powi(3)
    }

    pub fn gauged_energy(&self) -> f64 {
        self.grad + self.gauged_nonquad()
    }

    pub fn script_energy(&self) -> f64 {
        // (1/4π)(∫|w|²)(∫|w|⁴) with ∫|w|² = 2πm
        self.grad - 0.5 * self.cubic_current + 0.5 * self.mass * self.quartic
    }

    pub fn psi(&self) -> f64 {
        -self.current / PI + self.quartic / (4.0 * PI) - self.mass * self.mass
    }

    pub fn density_exponent_pullback(&self) -> f64 {
        1.5 * self.cubic_current - self.sextic + 1.5 * self.mass * self.quartic
    }
}

/// Mass `m(u) = (1/2π)∫|u|² = Σ|û_n|²`.
pub fn mass(u: &SpectralField) -> f64 {
    u.coeffs().iter().map(|c| c.norm_sqr()).sum()
}

/// `∫|u_x|² = 2π Σ n²|û_n|²`.
pub fn gradient_norm_sq(u: &SpectralField) -> f64 {
    2.0 * PI * u.iter_modes().map(|(n, c)| (n * n) as f64 * c.norm_sqr()).sum::<f64>()
}

pub fn energy(u: &SpectralField) -> f64 {
    Integrals::of(u).energy()
}

pub fn hamiltonian(u: &SpectralField) -> f64 {
    Integrals::of(u).hamiltonian()
}

/// Non-quadratic part of the energy, `N(u) = E(u) − ∫|u_x|²`.
pub fn nonquad(u: &SpectralField) -> f64 {
    Integrals::of(u).nonquad()
}

pub fn gauged_hamiltonian(w: &SpectralField) -> f64 {
    Integrals::of(w).gauged_hamiltonian()
}

pub fn gauged_energy(w: &SpectralField) -> f64 {
    Integrals::of(w).gauged_energy()
}

/// Non-quadratic part of the gauged energy; the exponent of the gauged measure's density.
pub fn gauged_nonquad(w: &SpectralField) -> f64 {
    Integrals::of(w).gauged_nonquad()
}

pub fn script_energy(w: &SpectralField) -> f64 {
    Integrals::of(w).script_energy()
}

/// The scalar `ψ(w)` multiplying `w` in the gauged equation.
pub fn psi(w: &SpectralField) -> f64 {
    Integrals::of(w).psi()
}

/// Closed form of `N(G⁻¹(w))`.
pub fn density_exponent_pullback(w: &SpectralField) -> f64 {
    Integrals::of(w).density_exponent_pullback()
}

/// Gaussian-part exponent of the gauge pushforward,
/// `Im∫(|w|²−m) w w̄_x − (1/2)∫(|w|²−m)²|w|²`, integrated directly on the grid.
pub fn gaussian_pushforward_exponent(w: &SpectralField) -> f64 {
    let s = Sampled::of(w);
    let m = mass(w);
    let mut acc = 0.0;
    for (u, ux) in s.u.values.iter().zip(&s.ux.values) {
        let h = u.norm_sqr() - m;
        acc += h * (u * ux.conj()).im - 0.5 * h * h * u.norm_sqr();
    }
    acc * 2.0 * PI / s.u.len() as f64
}

/// All functionals at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub mass: f64,
    pub hamiltonian: f64,
    pub energy: f64,
    pub nonquad: f64,
    pub gauged_hamiltonian: f64,
    pub gauged_energy: f64,
    pub script_energy: f64,
    pub gauged_nonquad: f64,
    pub psi: f64,
}

impl FunctionalReport {
    pub fn of(f: &SpectralField) -> Self {
        let i = Integrals::of(f);
        Self {
            mass: i.mass,
            hamiltonian: i.hamiltonian(),
            energy: i.energy(),
            nonquad: i.nonquad(),
            gauged_hamiltonian: i.gauged_hamiltonian(),
            gauged_energy: i.gauged_energy(),
            script_energy: i.script_energy(),
            gauged_nonquad: i.gauged_nonquad(),
            psi: i.psi(),
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.mass,
            self.hamiltonian,
            self.energy,
            self.nonquad,
            self.gauged_hamiltonian,
            self.gauged_energy,
            self.script_energy,
            self.gauged_nonquad,
            self.psi,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Pointwise residuals of the product identities linking `u = G⁻¹(w)` and `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseResidual {
    /// `max |u²ū ū_x − (w²w̄ w̄_x − i|w|⁶ + i m|w|⁴)|`
    pub cubic_current: f64,
    /// `max ||u_x|² − (|w_x|² − 2Im w²w̄w̄_x + 2m Im ww̄_x + |w|⁶ − 2m|w|⁴ + m²|w|²)|`
    pub gradient: f64,
    /// Largest magnitude among the compared terms.
    pub scale: f64,
}

impl PointwiseResidual {
    pub fn max_relative(&self) -> f64 {
        self.cubic_current.max(self.gradient) / (1.0 + self.scale)
    }
}

/// Evaluates both product identities on a common fine grid, with `u = G⁻¹(w)`
/// represented at `output_modes`.
pub fn pointwise_identity_residual(w: &SpectralField, output_modes: usize) -> PointwiseResidual {
    let spec = GaugeSpec::plain().with_output_modes(output_modes);
    let u = gauge::gauge_inverse(w, &spec);
    let points = (2 * output_modes + 1).next_power_of_two();
    let ug = u.to_grid(points).expect("grid holds u");
    let uxg = u.derivative().to_grid(points).expect("grid holds u_x");
    let wg = w.to_grid(points).expect("grid holds w");
    let wxg = w.derivative().to_grid(points).expect("grid holds w_x");
    let m = mass(w);
    let i = Complex64::i();
    let mut res = PointwiseResidual {
        cubic_current: 0.0,
        gradient: 0.0,
        scale: 0.0,
    };
    for k in 0..points {
        let (u, ux, w, wx) = (ug.values[k], uxg.values[k], wg.values[k], wxg.values[k]);
        let a = w.norm_sqr();
        let cubic_w = w * w * w.conj() * wx.conj();
        let lhs3 = u * u * u.conj() * ux.conj();
        let rhs3 = cubic_w - i * a.powi(3) + i * m * a * a;
        let lhs2 = ux.norm_sqr();
        let rhs2 = wx.norm_sqr() - 2.0 * cubic_w.im + 2.0 * m * (w * wx.conj()).im + a.powi(3)
            - 2.0 * m * a * a
            + m * m * a;
        res.cubic_current = res.cubic_current.max((lhs3 - rhs3).norm());
        res.gradient = res.gradient.max((lhs2 - rhs2).abs());
        res.scale = res.scale.max(lhs3.norm()).max(lhs2).max(a.powi(3));
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Brute-force quadrature of a functional's integrand on a very fine grid,
    /// evaluating `u` and `u_x` pointwise from the Fourier series.
    fn fine_quadrature(u: &SpectralField, f: impl Fn(Complex64, Complex64) -> f64) -> f64 {
        let points = 4096;
        let dx = 2.0 * PI / points as f64;
        (0..points)
            .map(|j| {
                let x = j as f64 * dx;
                let (mut v, mut vx) = (c(0.0, 0.0), c(0.0, 0.0));
                for (n, a) in u.iter_modes() {
                    let e = Complex64::from_polar(1.0, n as f64 * x);
                    v += a * e;
                    vx += a * e * c(0.0, n as f64);
                }
                f(v, vx)
            })
            .sum::<f64>()
            * dx
    }

    #[test]
    fn mass_examples() {
        assert_abs_diff_eq!(mass(&SpectralField::constant(2, c(1.0, 0.0))), 1.0);
        assert_abs_diff_eq!(mass(&SpectralField::plane_wave(4, 3, c(1.0, 0.0))), 1.0);
        assert_abs_diff_eq!(mass(&SpectralField::constant(2, c(0.6, 0.8) * 1.5)), 2.25, epsilon = 1e-14);
    }

    #[test]
    fn single_mode_closed_forms_match_fine_quadrature() {
        for n in [-2i64, -1, 1, 2, 3] {
            let u = SpectralField::plane_wave(4, n, c(1.0, 0.0));
            let nf = n as f64;
            let closed_e = 2.0 * PI * nf * nf - 3.0 * PI * nf + PI;
            let oracle_e = fine_quadrature(&u, |v, vx| {
                vx.norm_sqr() + 1.5 * (v * v * v.conj() * vx.conj()).im + 0.5 * v.norm_sqr().powi(3)
            });
            assert_abs_diff_eq!(oracle_e, closed_e, epsilon = 1e-9);
            assert_abs_diff_eq!(energy(&u), closed_e, epsilon = 1e-11);
            assert_abs_diff_eq!(hamiltonian(&u), PI - 2.0 * PI * nf, epsilon = 1e-11);
            assert_abs_diff_eq!(nonquad(&u), PI - 3.0 * PI * nf, epsilon = 1e-11);
        }
        assert_abs_diff_eq!(energy(&SpectralField::plane_wave(4, 1, c(1.0, 0.0))), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(energy(&SpectralField::plane_wave(4, 2, c(1.0, 0.0))), 3.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(nonquad(&SpectralField::plane_wave(4, 1, c(1.0, 0.0))), -2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn constant_field_values() {
        let one = SpectralField::constant(3, c(1.0, 0.0));
        assert_abs_diff_eq!(energy(&one), PI, epsilon = 1e-13);
        assert_abs_diff_eq!(hamiltonian(&one), PI, epsilon = 1e-13);
        assert_abs_diff_eq!(nonquad(&one), PI, epsilon = 1e-13);
        assert_abs_diff_eq!(gauged_hamiltonian(&one), PI, epsilon = 1e-13);
        let cst = c(0.3, -0.4) * 2.0; // |c| = 1
        let k = SpectralField::constant(3, cst * 0.9);
        let a = 0.9f64;
        assert_abs_diff_eq!(gauged_energy(&k), PI * a.powi(6), epsilon = 1e-13);
        assert_abs_diff_eq!(gauged_nonquad(&k), PI * a.powi(6), epsilon = 1e-13);
        assert_abs_diff_eq!(script_energy(&k), PI * a.powi(6), epsilon = 1e-13);
        assert_abs_diff_eq!(psi(&k), -0.5 * a.powi(4), epsilon = 1e-13);
        assert_abs_diff_eq!(density_exponent_pullback(&k), PI * a.powi(6), epsilon = 1e-13);
    }

    #[test]
    fn zero_field_is_zero_everywhere() {
        let z = SpectralField::zeros(5);
        let r = FunctionalReport::of(&z);
        assert_eq!(r.hamiltonian, 0.0);
        assert_eq!(r.gauged_hamiltonian, 0.0);
        assert_eq!(r.script_energy, 0.0);
        assert_eq!(r.psi, 0.0);
        assert_eq!(r.energy, 0.0);
    }

    #[test]
    fn plane_wave_gauged_values() {
        let e = SpectralField::plane_wave(4, 1, c(1.0, 0.0));
        assert_abs_diff_eq!(gauged_hamiltonian(&e), -PI, epsilon = 1e-12);
        assert_abs_diff_eq!(gauged_energy(&e), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gauged_nonquad(&e), gauged_energy(&e) - 2.0 * PI, epsilon = 1e-12);
        let oracle = fine_quadrature(&e, |v, vx| {
            -0.5 * (v * v * v.conj() * vx.conj()).im + 2.0 * (v * vx.conj()).im - 0.5 * v.norm_sqr().powi(2)
        }) + 2.0 * PI;
        assert_abs_diff_eq!(gauged_nonquad(&e), oracle, epsilon = 1e-9);
        for amp in [0.3, 1.0, 1.7] {
            let w = SpectralField::plane_wave(4, 1, c(0.0, amp));
            assert_abs_diff_eq!(psi(&w), 2.0 * amp * amp - 0.5 * amp.powi(4), epsilon = 1e-12);
        }
    }

    #[test]
    fn pointwise_identities_on_simple_fields() {
        let uni = SpectralField::plane_wave(4, 2, c(0.6, 0.8));
        assert!(pointwise_identity_residual(&uni, 16).max_relative() < 1e-11);
        let k = SpectralField::constant(4, c(0.5, 0.5));
        assert!(pointwise_identity_residual(&k, 16).max_relative() < 1e-12);
        let mut smooth = SpectralField::constant(4, c(0.4, 0.0));
        *smooth.coeff_mut(1) = c(0.2, 0.1);
        *smooth.coeff_mut(-2) = c(0.05, -0.1);
        assert!(pointwise_identity_residual(&smooth, 64).max_relative() < 1e-9);
    }
}
