//! Finite-dimensional Gaussian densities with symmetric tridiagonal precision.
//!
//! These evaluate log-densities straight from the precision matrix (quadratic
//! form plus log-determinant), without any of the telescoped sums used by the
//! bridge and change-of-measure code, so they serve as an independent check
//! of those formulas.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i+1`.
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::Size(format!(
                "tridiagonal with {} diagonal and {} off-diagonal entries",
                diag.len(),
                off.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.off[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    /// LDLᵀ pivots; all positive iff the matrix is positive definite.
    fn pivots(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.dim());
        d.push(self.diag[0]);
        for i in 1..self.dim() {
            let prev = d[i - 1];
            d.push(self.diag[i] - self.off[i - 1] * self.off[i - 1] / prev);
        }
        d
    }

    pub fn log_det(&self) -> Result<f64> {
        let d = self.pivots();
        if d.iter().any(|p| *p <= 0.0) {
            return Err(Error::Precondition("precision matrix is not positive definite".into()));
        }
        Ok(d.iter().map(|p| p.ln()).sum())
    }

    /// Thomas algorithm.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let d = self.pivots();
        let mut y = rhs.to_vec();
        for i in 1..n {
            y[i] -= self.off[i - 1] / d[i - 1] * y[i - 1];
        }
        let mut x = vec![0.0; n];
        x[n - 1] = y[n - 1] / d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (y[i] - self.off[i] * x[i + 1]) / d[i];
        }
        x
    }
}

/// Multivariate normal `N(mean, precision⁻¹)`.
#[derive(Debug, Clone)]
pub struct TridiagonalGaussian {
    pub mean: Vec<f64>,
    pub precision: SymTridiagonal,
    log_det: f64,
}

impl TridiagonalGaussian {
    pub fn new(mean: Vec<f64>, precision: SymTridiagonal) -> Result<Self> {
        if mean.len() != precision.dim() {
            return Err(Error::Size("mean and precision dimensions differ".into()));
        }
        let log_det = precision.log_det()?;
        Ok(Self {
            mean,
            precision,
            log_det,
        })
    }

    /// Gaussian with precision `P` and linear term `b`, i.e. density
    /// `∝ exp(−½xᵀPx + bᵀx)`; the mean is `P⁻¹b`.
    pub fn from_canonical(precision: SymTridiagonal, linear: &[f64]) -> Result<Self> {
        let mean = precision.solve(linear);
        Self::new(mean, precision)
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let r: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let pr = self.precision.mul(&r);
        let quad: f64 = r.iter().zip(&pr).map(|(a, b)| a * b).sum();
        0.5 * self.log_det - 0.5 * self.dim() as f64 * (2.0 * PI).ln() - 0.5 * quad
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Law of the interior values `X_1..X_{n−1}` of a real Brownian bridge on the
/// grid `s_0 < … < s_n`, pinned at `X_0 = X_n = pin`.
pub fn bridge_law(times: &[f64], pin: f64) -> Result<TridiagonalGaussian> {
    bridge_with_mass(times, pin, 0.0)
}

/// Like [`bridge_law`] with an extra `exp(−½ mass Σ_k X_k² Δs_k)` factor on
/// the interior nodes (a discretised `e^{−½∫X²}` weight).
pub fn bridge_with_mass(times: &[f64], pin: f64, mass: f64) -> Result<TridiagonalGaussian> {
    let n = times.len().checked_sub(1).filter(|n| *n >= 2).ok_or_else(|| {
        Error::Size("a bridge needs at least three grid nodes".into())
    })?;
    let ds: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if ds.iter().any(|d| *d <= 0.0) {
        return Err(Error::Precondition("bridge grid must be strictly increasing".into()));
    }
    let interior = n - 1;
    let mut diag = Vec::with_capacity(interior);
    let mut off = Vec::with_capacity(interior.saturating_sub(1));
    let mut linear = vec![0.0; interior];
    for i in 0..interior {
        // node k = i + 1 couples to k−1 through ds[i] and to k+1 through ds[i+1]
        diag.push(1.0 / ds[i] + 1.0 / ds[i + 1] + mass * ds[i + 1]);
        if i + 1 < interior {
            off.push(-1.0 / ds[i + 1]);
        }
    }
    linear[0] += pin / ds[0];
    linear[interior - 1] += pin / ds[n - 1];
    TridiagonalGaussian::from_canonical(SymTridiagonal::new(diag, off)?, &linear)
}
