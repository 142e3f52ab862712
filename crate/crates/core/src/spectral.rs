//! Periodic complex fields on the circle `[0, 2π)`.
//!
//! A [`SpectralField`] stores the Fourier coefficients `û_n`, `|n| <= N`, of
//! `u(x) = Σ û_n e^{inx}`. A [`GridField`] stores samples at the equispaced
//! points `x_j = 2πj/M`. Nonlinear products are formed on a padded grid of
//! size [`padded_size`], large enough that quintic products of cutoff-`N`
//! fields are alias-free, and integrals use the trapezoidal rule, which is
//! exact for trigonometric polynomials of degree `< M`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

pub(crate) fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    let forward = direction == FftDirection::Forward;
    PLANS.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        cache
            .entry((len, forward))
            .or_insert_with(|| planner.plan_fft(len, direction))
            .clone()
    })
}

/// In-place unnormalised forward transform `X_k = Σ_j x_j e^{-2πijk/M}`.
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    plan(buf.len(), FftDirection::Forward).process(buf);
}

/// In-place unnormalised inverse transform `x_j = Σ_k X_k e^{+2πijk/M}`.
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    plan(buf.len(), FftDirection::Inverse).process(buf);
}

/// Grid size used for nonlinear products: the smallest power of two that is
/// at least `3(2N+1)`.
pub fn padded_size(modes: usize) -> usize {
    (3 * (2 * modes + 1)).next_power_of_two()
}

/// Index of mode `n` in a length-`len` FFT buffer.
#[inline]
pub(crate) fn fft_index(n: i64, len: usize) -> usize {
    n.rem_euclid(len as i64) as usize
}

/// Fourier coefficients `û_n` for `n = -N..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    modes: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    /// Builds a field from `2N+1` coefficients ordered `n = -N..=N`.
    pub fn new(modes: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 2 * modes + 1 {
            return Err(Error::Size(format!(
                "cutoff {modes} needs {} coefficients, got {}",
                2 * modes + 1,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Precondition("non-finite Fourier coefficient".into()));
        }
        Ok(Self { modes, coeffs })
    }

    pub fn zeros(modes: usize) -> Self {
        Self {
            modes,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * modes + 1],
        }
    }

    /// Field with coefficient `f(n)` at every mode.
    pub fn from_fn(modes: usize, mut f: impl FnMut(i64) -> Complex64) -> Self {
        let n = modes as i64;
        Self {
            modes,
            coeffs: (-n..=n).map(&mut f).collect(),
        }
    }

    /// Constant field `u ≡ c`.
    pub fn constant(modes: usize, c: Complex64) -> Self {
        let mut f = Self::zeros(modes);
        f.coeffs[modes] = c;
        f
    }

    /// Single Fourier mode `amplitude · e^{i n x}`.
    pub fn plane_wave(modes: usize, n: i64, amplitude: Complex64) -> Self {
        assert!(n.unsigned_abs() as usize <= modes, "mode {n} exceeds cutoff {modes}");
        let mut f = Self::zeros(modes);
        *f.coeff_mut(n) = amplitude;
        f
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Iterator over `(n, û_n)`.
    pub fn iter_modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n0 = -(self.modes as i64);
        self.coeffs.iter().enumerate().map(move |(k, c)| (n0 + k as i64, *c))
    }

    pub fn coeff(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.modes {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[(n + self.modes as i64) as usize]
    }

    pub fn coeff_mut(&mut self, n: i64) -> &mut Complex64 {
        &mut self.coeffs[(n + self.modes as i64) as usize]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Samples `Σ û_n e^{inx_j}` on `M` equispaced points.
    pub fn to_grid(&self, points: usize) -> Result<GridField> {
        if points < 2 * self.modes + 1 {
            return Err(Error::Size(format!(
                "grid of {points} points cannot hold cutoff {} (needs {})",
                self.modes,
                2 * self.modes + 1
            )));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); points];
        for (n, c) in self.iter_modes() {
            buf[fft_index(n, points)] = c;
        }
        fft_inverse(&mut buf);
        Ok(GridField { values: buf })
    }

    /// Coefficientwise `i n û_n`.
    pub fn derivative(&self) -> SpectralField {
        let n0 = -(self.modes as i64);
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| Complex64::new(0.0, (n0 + k as i64) as f64) * c)
            .collect();
        SpectralField { modes: self.modes, coeffs }
    }

    /// `‖u‖²_{L²} = 2π Σ |û_n|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        2.0 * PI * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Zero-pads or truncates to a new cutoff.
    pub fn resized(&self, modes: usize) -> SpectralField {
        SpectralField::from_fn(modes, |n| self.coeff(n))
    }

    /// `u(· + a)`, applied exactly in Fourier space.
    pub fn translated(&self, shift: f64) -> SpectralField {
        SpectralField::from_fn(self.modes, |n| {
            self.coeff(n) * Complex64::from_polar(1.0, n as f64 * shift)
        })
    }

    /// `e^{iθ} u`.
    pub fn rotated(&self, theta: f64) -> SpectralField {
        let phase = Complex64::from_polar(1.0, theta);
        SpectralField {
            modes: self.modes,
            coeffs: self.coeffs.iter().map(|c| c * phase).collect(),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> SpectralField {
        SpectralField {
            modes: self.modes,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Largest coefficient difference, comparing over the larger of the two cutoffs.
    pub fn max_coeff_diff(&self, other: &SpectralField) -> f64 {
        let n = self.modes.max(other.modes) as i64;
        (-n..=n)
            .map(|k| (self.coeff(k) - other.coeff(k)).norm())
            .fold(0.0, f64::max)
    }

    /// Sup-norm distance `max_j |u(x_j) − v(x_j)|` on a grid fine enough for both fields.
    pub fn sup_distance(&self, other: &SpectralField) -> f64 {
        let m = padded_size(self.modes.max(other.modes));
        let a = self.to_grid(m).expect("padded grid is large enough");
        let b = other.to_grid(m).expect("padded grid is large enough");
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// `max_j |u(x_j)|` on the padded grid.
    pub fn sup_norm(&self) -> f64 {
        let g = self.to_grid(padded_size(self.modes)).expect("padded grid is large enough");
        g.values.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Sum of `|û_n|²` over the top `fraction` of modes, relative to the total.
    pub fn top_band_fraction(&self, fraction: f64) -> f64 {
        let total: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let threshold = ((1.0 - fraction) * self.modes as f64).floor() as i64;
        let top: f64 = self
            .iter_modes()
            .filter(|(n, _)| n.abs() > threshold)
            .map(|(_, c)| c.norm_sqr())
            .sum();
        top / total
    }
}

/// Samples on the grid `x_j = 2πj/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub values: Vec<Complex64>,
}

impl GridField {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self {
            values: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    /// Samples `f(x_j)` on `points` equispaced nodes.
    pub fn from_fn(points: usize, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            values: grid_points(points).map(f).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Discrete Fourier coefficients truncated to `|n| <= N`.
    pub fn to_spectral(&self, modes: usize) -> Result<SpectralField> {
        let m = self.values.len();
        if m < 2 * modes + 1 {
            return Err(Error::Size(format!(
                "grid of {m} points cannot resolve cutoff {modes} (needs {})",
                2 * modes + 1
            )));
        }
        let mut buf = self.values.clone();
        fft_forward(&mut buf);
        let scale = 1.0 / m as f64;
        Ok(SpectralField::from_fn(modes, |n| buf[fft_index(n, m)] * scale))
    }

    /// Trapezoidal rule `(2π/M) Σ_j g_j`.
    pub fn quadrature(&self) -> Complex64 {
        let m = self.values.len();
        if m == 0 {
            return Complex64::new(0.0, 0.0);
        }
        self.values.iter().sum::<Complex64>() * (2.0 * PI / m as f64)
    }

    pub fn abs_sq(&self) -> GridField {
        GridField {
            values: self.values.iter().map(|c| Complex64::new(c.norm_sqr(), 0.0)).collect(),
        }
    }

    pub fn conj(&self) -> GridField {
        GridField {
            values: self.values.iter().map(|c| c.conj()).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> GridField {
        GridField {
            values: self.values.iter().map(|&c| f(c)).collect(),
        }
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.re).collect()
    }
}

/// The nodes `x_j = 2πj/M`.
pub fn grid_points(points: usize) -> impl Iterator<Item = f64> {
    let dx = 2.0 * PI / points as f64;
    (0..points).map(move |j| j as f64 * dx)
}

/// Pointwise product of operands sampled at a common padded resolution.
///
/// Callers truncating the result back to cutoff `N` must supply
/// `M_pad >= 3(2N+1)` for quintic products to come out alias-free.
pub fn dealiased_product(factors: &[&GridField]) -> Result<GridField> {
    let Some(first) = factors.first() else {
        return Err(Error::Size("empty product".into()));
    };
    let m = first.len();
    if let Some(bad) = factors.iter().find(|f| f.len() != m) {
        return Err(Error::Size(format!(
            "operands sampled at {m} and {} points",
            bad.len()
        )));
    }
    let mut values = first.values.clone();
    for f in &factors[1..] {
        for (v, w) in values.iter_mut().zip(&f.values) {
            *v *= w;
        }
    }
    Ok(GridField { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_mode_is_constant_on_grid() {
        let f = SpectralField::constant(3, c(1.0, 0.0));
        let g = f.to_grid(8).unwrap();
        assert_eq!(g.len(), 8);
        for v in &g.values {
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
        }
        let back = g.to_spectral(3).unwrap();
        assert!(back.max_coeff_diff(&f) < 1e-15);
    }

    #[test]
    fn first_mode_samples_exponential() {
        let f = SpectralField::plane_wave(3, 1, c(1.0, 0.0));
        let g = f.to_grid(8).unwrap();
        for (x, v) in grid_points(8).zip(&g.values) {
            assert!((v - Complex64::from_polar(1.0, x)).norm() < 1e-14);
        }
        let back = g.to_spectral(3).unwrap();
        assert!((back.coeff(1) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn grid_too_small_is_a_size_error() {
        let f = SpectralField::zeros(4);
        assert!(matches!(f.to_grid(8), Err(Error::Size(_))));
        let g = GridField::new(vec![c(0.0, 0.0); 8]);
        assert!(matches!(g.to_spectral(4), Err(Error::Size(_))));
        assert!(g.to_spectral(3).is_ok());
    }

    #[test]
    fn derivative_examples() {
        let f = SpectralField::plane_wave(4, 2, c(1.0, 0.0));
        assert_eq!(f.derivative().coeff(2), c(0.0, 2.0));
        let k = SpectralField::constant(4, c(2.5, -1.0));
        assert!(k.derivative().coeffs().iter().all(|z| z.norm() == 0.0));
        let g = SpectralField::plane_wave(4, -1, c(3.0, 0.0));
        assert_eq!(g.derivative().coeff(-1), c(0.0, -3.0));
    }

    #[test]
    fn quadrature_examples() {
        let one = GridField::new(vec![c(1.0, 0.0); 16]);
        assert_abs_diff_eq!(one.quadrature().re, 2.0 * PI, epsilon = 1e-14);
        let e = GridField::from_fn(16, |x| Complex64::from_polar(1.0, x));
        assert!(e.quadrature().norm() < 1e-14);
        assert_abs_diff_eq!(e.abs_sq().quadrature().re, 2.0 * PI, epsilon = 1e-13);
    }

    #[test]
    fn l2_norm_examples() {
        assert_abs_diff_eq!(SpectralField::constant(2, c(1.0, 0.0)).l2_norm_sq(), 2.0 * PI);
        let mut f = SpectralField::zeros(2);
        *f.coeff_mut(1) = c(1.0, 0.0);
        *f.coeff_mut(-1) = c(1.0, 0.0);
        assert_abs_diff_eq!(f.l2_norm_sq(), 4.0 * PI, epsilon = 1e-14);
    }

    #[test]
    fn padded_products_are_alias_free() {
        let n = 4;
        let e = SpectralField::plane_wave(n, 1, c(1.0, 0.0)).to_grid(32).unwrap();
        let sq = dealiased_product(&[&e, &e]).unwrap().to_spectral(15).unwrap();
        for (k, z) in sq.iter_modes() {
            let expect = if k == 2 { 1.0 } else { 0.0 };
            assert!((z - c(expect, 0.0)).norm() < 1e-14, "mode {k}");
        }
        let quint = dealiased_product(&[&e, &e, &e, &e, &e]).unwrap();
        let spec = quint.to_spectral(15).unwrap();
        for (k, z) in spec.iter_modes() {
            let expect = if k == 5 { 1.0 } else { 0.0 };
            assert!((z - c(expect, 0.0)).norm() < 1e-13, "mode {k}");
        }
        // Truncating to |n| <= N, the padded quintic correctly has no content,
        // while the unpadded one aliases e^{5ix} onto e^{-4ix}.
        let padded = spec.resized(n);
        assert!(padded.coeffs().iter().all(|z| z.norm() < 1e-13));
        let e_small = SpectralField::plane_wave(n, 1, c(1.0, 0.0)).to_grid(2 * n + 1).unwrap();
        let aliased = dealiased_product(&[&e_small; 5]).unwrap().to_spectral(n).unwrap();
        assert!((aliased.coeff(-4) - c(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn mismatched_operands_rejected() {
        let a = GridField::new(vec![c(1.0, 0.0); 8]);
        let b = GridField::new(vec![c(1.0, 0.0); 16]);
        assert!(matches!(dealiased_product(&[&a, &b]), Err(Error::Size(_))));
    }

    #[test]
    fn padded_size_is_power_of_two() {
        assert_eq!(padded_size(4), 32);
        assert_eq!(padded_size(32), 256);
        assert_eq!(padded_size(64), 512);
    }

    #[test]
    fn new_rejects_wrong_length_and_nan() {
        assert!(SpectralField::new(2, vec![c(0.0, 0.0); 4]).is_err());
        let mut v = vec![c(0.0, 0.0); 5];
        v[1] = c(f64::NAN, 0.0);
        assert!(SpectralField::new(2, v).is_err());
    }

    #[test]
    fn top_band_fraction_counts_highest_modes() {
        let f = SpectralField::from_fn(10, |n| if n.abs() == 10 { c(1.0, 0.0) } else if n == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        assert_abs_diff_eq!(f.top_band_fraction(0.1), 2.0 / 3.0, epsilon = 1e-15);
    }
}
