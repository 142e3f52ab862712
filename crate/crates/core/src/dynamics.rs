//! Galerkin-truncated DNLS and gauged DNLS flows, integrated with a fourth
//! order integrating-factor Runge-Kutta scheme.
//!
//! Equations (for `|n| <= N`, nonlinear products dealiased on an alias-free grid):
//!
//! * `Dnls`: `u_t = i u_xx + (|u|²u)_x`
//! * `GdnlsPlus`: `w_t = i w_xx + 2m w_x − w² w̄_x + (i/2)|w|⁴w − iψ(w) w − i m |w|² w`
//! * `GdnlsV`: as `GdnlsPlus` without `2m w_x`
//!
//! The dispersive part, and for `GdnlsPlus` the transport `2m w_x` with `m`
//! frozen at the start of each step, are integrated exactly. The difference
//! between the frozen and current `m` stays in the nonlinear part.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Integrals;
use crate::gauge::GaugeSpec;
use crate::measures::{
    chain_estimate, mcmc_sample, paired_difference, sample_weighted, self_normalized, McEstimate, McmcOptions,
    MeasureConfig, MeasureKind,
};
use crate::spectral::{fft_index, plan, SpectralField};

/// Fields whose coefficients exceed this are treated as blown up.
const BLOWUP: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Dnls,
    GdnlsPlus,
    GdnlsV,
}

impl std::str::FromStr for Equation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dnls" => Ok(Equation::Dnls),
            "gdnls_plus" | "gdnls-plus" => Ok(Equation::GdnlsPlus),
            "gdnls_v" | "gdnls-v" => Ok(Equation::GdnlsV),
            other => Err(Error::Config(format!("unknown equation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub modes: usize,
    pub dt: f64,
    pub horizon: f64,
    pub equation: Equation,
    /// `c` in the guard `dt <= c/N²`.
    pub stability_constant: f64,
    /// Conserved quantities are sampled every this many steps.
    pub record_every: usize,
}

impl SolverConfig {
    pub fn new(modes: usize, dt: f64, horizon: f64, equation: Equation) -> Self {
        Self {
            modes,
            dt,
            horizon,
            equation,
            stability_constant: 1.0,
            record_every: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes < 1 {
            return Err(Error::Config("mode cutoff must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be non-negative, got {}", self.horizon)));
        }
        let limit = self.stability_constant / (self.modes * self.modes) as f64;
        if self.dt > limit {
            return Err(Error::Config(format!(
                "dt = {} exceeds the stability guard {limit:.3e} for N = {}",
                self.dt, self.modes
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record interval must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps; the last step is shortened to land on the horizon.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Smallest `2^a 3^b 5^c` that is at least `n`.
fn smooth_size(n: usize) -> usize {
    (n..)
        .find(|&k| {
            let mut r = k;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            r == 1
        })
        .expect("smooth numbers are unbounded")
}

/// Alias-free grid for the nonlinearity: products of degree `d` need `M > (d + 1)N`.
fn dealiased_size(modes: usize, equation: Equation) -> usize {
    let degree = match equation {
        Equation::Dnls => 3,
        Equation::GdnlsPlus | Equation::GdnlsV => 5,
    };
    smooth_size((degree + 1) * modes + 1)
}

/// Scratch buffers for the right-hand side.
struct Workspace {
    modes: usize,
    equation: Equation,
    u: Vec<Complex64>,
    ux: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Workspace {
    fn new(modes: usize, equation: Equation) -> Self {
        let m = dealiased_size(modes, equation);
        let forward = plan(m, FftDirection::Forward);
        let inverse = plan(m, FftDirection::Inverse);
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self {
            modes,
            equation,
            u: vec![Complex64::new(0.0, 0.0); m],
            ux: vec![Complex64::new(0.0, 0.0); m],
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    /// Nonlinear part of the right-hand side. `frozen_mass` is the `m` already
    /// carried by the linear propagator.
    fn nonlinear(&mut self, c: &[Complex64], frozen_mass: f64, out: &mut [Complex64]) {
        let n0 = -(self.modes as i64);
        let m = self.u.len();
        self.u.fill(Complex64::new(0.0, 0.0));
        self.ux.fill(Complex64::new(0.0, 0.0));
        for (k, v) in c.iter().enumerate() {
            let n = n0 + k as i64;
            let idx = fft_index(n, m);
            self.u[idx] = *v;
            self.ux[idx] = Complex64::new(0.0, n as f64) * v;
        }
        self.inverse.process_with_scratch(&mut self.u, &mut self.scratch);
        self.inverse.process_with_scratch(&mut self.ux, &mut self.scratch);
        match self.equation {
            Equation::Dnls => {
                for (u, ux) in self.u.iter_mut().zip(&self.ux) {
                    let a = u.norm_sqr();
                    *u = 2.0 * a * ux + *u * *u * ux.conj();
                }
            }
            Equation::GdnlsPlus | Equation::GdnlsV => {
                let mass: f64 = c.iter().map(|v| v.norm_sqr()).sum();
                let (mut current, mut quartic) = (0.0, 0.0);
                for (u, ux) in self.u.iter().zip(&self.ux) {
                    let a = u.norm_sqr();
                    current += (u * ux.conj()).im;
                    quartic += a * a;
                }
                let w = 2.0 * PI / m as f64;
                let psi = -current * w / PI + quartic * w / (4.0 * PI) - mass * mass;
                let transport = match self.equation {
                    Equation::GdnlsPlus => 2.0 * (mass - frozen_mass),
                    _ => 0.0,
                };
                let i = Complex64::new(0.0, 1.0);
                for (u, ux) in self.u.iter_mut().zip(&self.ux) {
                    let a = u.norm_sqr();
                    let v = *u;
                    *u = transport * ux - v * v * ux.conj() + i * (0.5 * a * a - psi - mass * a) * v;
                }
            }
        }
        self.forward.process_with_scratch(&mut self.u, &mut self.scratch);
        let scale = 1.0 / m as f64;
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.u[fft_index(n0 + k as i64, m)] * scale;
        }
    }

    fn linear_symbol(&self, n: i64, frozen_mass: f64) -> Complex64 {
        let nf = n as f64;
        match self.equation {
            Equation::GdnlsPlus => Complex64::new(0.0, -nf * nf + 2.0 * frozen_mass * nf),
            _ => Complex64::new(0.0, -nf * nf),
        }
    }
}

/// Full right-hand side `u_t`.
pub fn rhs(u: &SpectralField, equation: Equation) -> SpectralField {
    let mut ws = Workspace::new(u.modes(), equation);
    let mass = crate::functionals::mass(u);
    let mut out = vec![Complex64::new(0.0, 0.0); u.coeffs().len()];
    ws.nonlinear(u.coeffs(), mass, &mut out);
    let n0 = -(u.modes() as i64);
    for (k, o) in out.iter_mut().enumerate() {
        *o += ws.linear_symbol(n0 + k as i64, mass) * u.coeffs()[k];
    }
    SpectralField::new(u.modes(), out).expect("cutoff preserved")
}

struct Stepper {
    ws: Workspace,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
    d: Vec<Complex64>,
    tmp: Vec<Complex64>,
    e_full: Vec<Complex64>,
    e_half: Vec<Complex64>,
    cached: Option<(f64, f64)>,
}

impl Stepper {
    fn new(modes: usize, equation: Equation) -> Self {
        let len = 2 * modes + 1;
        let z = vec![Complex64::new(0.0, 0.0); len];
        Self {
            ws: Workspace::new(modes, equation),
            a: z.clone(),
            b: z.clone(),
            c: z.clone(),
            d: z.clone(),
            tmp: z.clone(),
            e_full: z.clone(),
            e_half: z,
            cached: None,
        }
    }

    fn propagators(&mut self, dt: f64, frozen_mass: f64) {
        let key = (dt, if self.ws.equation == Equation::GdnlsPlus { frozen_mass } else { 0.0 });
        if self.cached == Some(key) {
            return;
        }
        let n0 = -(self.ws.modes as i64);
        for k in 0..self.e_full.len() {
            let l = self.ws.linear_symbol(n0 + k as i64, frozen_mass);
            self.e_full[k] = (l * dt).exp();
            self.e_half[k] = (l * (0.5 * dt)).exp();
        }
        self.cached = Some(key);
    }

    fn step(&mut self, u: &mut [Complex64], dt: f64) {
        let m0: f64 = u.iter().map(|v| v.norm_sqr()).sum();
        self.propagators(dt, m0);
        let len = u.len();
        self.ws.nonlinear(u, m0, &mut self.a);
        for k in 0..len {
            self.tmp[k] = self.e_half[k] * (u[k] + 0.5 * dt * self.a[k]);
        }
        self.ws.nonlinear(&self.tmp, m0, &mut self.b);
        for k in 0..len {
            self.tmp[k] = self.e_half[k] * u[k] + 0.5 * dt * self.b[k];
        }
        self.ws.nonlinear(&self.tmp, m0, &mut self.c);
        for k in 0..len {
            self.tmp[k] = self.e_full[k] * u[k] + dt * self.e_half[k] * self.c[k];
        }
        self.ws.nonlinear(&self.tmp, m0, &mut self.d);
        for k in 0..len {
            u[k] = self.e_full[k] * u[k]
                + dt / 6.0
                    * (self.e_full[k] * self.a[k] + 2.0 * self.e_half[k] * (self.b[k] + self.c[k]) + self.d[k]);
        }
    }
}

/// Conserved-quantity record of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub equation: Equation,
    pub steps: usize,
    /// Time reached; equals the horizon unless the run diverged.
    pub time: f64,
    pub diverged: bool,
    /// `max_t |m(t) − m(0)|`
    pub mass_drift: f64,
    /// `H` for DNLS, `ℋ` for the gauged equations.
    pub hamiltonian_drift: f64,
    /// `E` for DNLS, `ℰ` for the gauged equations.
    pub energy_drift: f64,
    pub script_energy_drift: f64,
    /// Largest share of `Σ|û_n|²` in the top tenth of the modes.
    pub max_top_band: f64,
    pub initial_top_band: f64,
    /// Top-band share grew beyond [`UNDER_RESOLVED_GROWTH`] times its initial
    /// value (and above `1e-6`).
    pub under_resolved: bool,
}

/// Growth factor of the top-band share that marks a run as under-resolved.
pub const UNDER_RESOLVED_GROWTH: f64 = 10.0;

#[derive(Debug, Clone, Copy)]
struct Conserved {
    mass: f64,
    hamiltonian: f64,
    energy: f64,
    script: f64,
}

fn conserved(u: &SpectralField, equation: Equation) -> Conserved {
    let i = Integrals::of(u);
    match equation {
        Equation::Dnls => Conserved {
            mass: i.mass,
            hamiltonian: i.hamiltonian(),
            energy: i.energy(),
            script: i.script_energy(),
        },
        _ => Conserved {
            mass: i.mass,
            hamiltonian: i.gauged_hamiltonian(),
            energy: i.gauged_energy(),
            script: i.script_energy(),
        },
    }
}

/// Integrates `u0` to the configured horizon.
pub fn evolve(u0: &SpectralField, config: &SolverConfig) -> Result<(SpectralField, TrajectoryReport)> {
    config.validate()?;
    if u0.modes() != config.modes {
        return Err(Error::Size(format!(
            "field has cutoff {} but the solver expects {}",
            u0.modes(),
            config.modes
        )));
    }
    let steps = config.steps();
    let mut u = u0.coeffs().to_vec();
    let mut stepper = Stepper::new(config.modes, config.equation);
    let c0 = conserved(u0, config.equation);
    let top0 = u0.top_band_fraction(0.1);
    let mut report = TrajectoryReport {
        equation: config.equation,
        steps,
        time: 0.0,
        diverged: false,
        mass_drift: 0.0,
        hamiltonian_drift: 0.0,
        energy_drift: 0.0,
        script_energy_drift: 0.0,
        max_top_band: top0,
        initial_top_band: top0,
        under_resolved: false,
    };
    let mut t = 0.0;
    let mut last_good = u.clone();
    for s in 0..steps {
        let dt = (config.horizon - t).min(config.dt);
        stepper.step(&mut u, dt);
        let size: f64 = u.iter().map(|v| v.norm_sqr()).sum();
        if !size.is_finite() || size > BLOWUP * BLOWUP {
            report.diverged = true;
            u = last_good;
            break;
        }
        t = if s + 1 == steps { config.horizon } else { t + dt };
        report.time = t;
        if (s + 1) % config.record_every == 0 || s + 1 == steps {
            let f = SpectralField::new(config.modes, u.clone()).expect("cutoff preserved");
            let c = conserved(&f, config.equation);
            report.mass_drift = report.mass_drift.max((c.mass - c0.mass).abs());
            report.hamiltonian_drift = report.hamiltonian_drift.max((c.hamiltonian - c0.hamiltonian).abs());
            report.energy_drift = report.energy_drift.max((c.energy - c0.energy).abs());
            report.script_energy_drift = report.script_energy_drift.max((c.script - c0.script).abs());
            report.max_top_band = report.max_top_band.max(f.top_band_fraction(0.1));
            last_good.copy_from_slice(&u);
        }
    }
    report.under_resolved = report.max_top_band > 1e-6 && report.max_top_band > UNDER_RESOLVED_GROWTH * top0;
    let out = SpectralField::new(config.modes, u).expect("cutoff preserved");
    Ok((out, report))
}

/// `A e^{i(nx − ωt)}` with `ω = n² − n|A|²`, which solves both DNLS and the
/// `+` gauged equation.
pub fn plane_wave_solution(modes: usize, n: i64, amplitude: Complex64, t: f64) -> SpectralField {
    let omega = (n * n) as f64 - n as f64 * amplitude.norm_sqr();
    SpectralField::plane_wave(modes, n, amplitude * Complex64::from_polar(1.0, -omega * t))
}

/// `‖P_N G(u(T)) − w(T)‖_∞` where `u` solves DNLS from `u0` and `w` solves
/// the `+` gauged equation from `P_N G(u0)`, with `G` the plain gauge and
/// `P_N` truncation to the solver cutoff.
pub fn gauge_equivariance_check(u0: &SpectralField, config: &SolverConfig) -> Result<f64> {
    let plain = GaugeSpec::plain().with_output_modes(config.modes);
    let w0 = crate::gauge::gauge(u0, &plain);
    let (u_t, ru) = evolve(u0, &SolverConfig { equation: Equation::Dnls, ..*config })?;
    let (w_t, rw) = evolve(&w0, &SolverConfig { equation: Equation::GdnlsPlus, ..*config })?;
    if ru.diverged || rw.diverged {
        return Err(Error::Diverged { time: ru.time.min(rw.time) });
    }
    Ok(crate::gauge::gauge(&u_t, &plain).sup_distance(&w_t))
}

/// `‖w(·,T) − v(· + 2T m(w0), T)‖_∞` for `w` solving the `+` gauged
/// equation and `v` the untranslated one, both from `w0`.
pub fn galilean_link_check(w0: &SpectralField, config: &SolverConfig) -> Result<f64> {
    let (w_t, rw) = evolve(w0, &SolverConfig { equation: Equation::GdnlsPlus, ..*config })?;
    let (v_t, rv) = evolve(w0, &SolverConfig { equation: Equation::GdnlsV, ..*config })?;
    if rw.diverged || rv.diverged {
        return Err(Error::Diverged { time: rw.time.min(rv.time) });
    }
    let shift = 2.0 * config.horizon * crate::functionals::mass(w0);
    Ok(w_t.sup_distance(&v_t.translated(shift)))
}

/// Measure and flow paired in an invariance experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    NuDnls,
    MuGdnlsPlus,
    MuGdnlsV,
}

impl Pairing {
    pub fn measure(self) -> MeasureKind {
        match self {
            Pairing::NuDnls => MeasureKind::Nu,
            _ => MeasureKind::Mu,
        }
    }

    pub fn equation(self) -> Equation {
        match self {
            Pairing::NuDnls => Equation::Dnls,
            Pairing::MuGdnlsPlus => Equation::GdnlsPlus,
            Pairing::MuGdnlsV => Equation::GdnlsV,
        }
    }
}

impl std::str::FromStr for Pairing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nu_dnls" | "nu-dnls" => Ok(Pairing::NuDnls),
            "mu_gdnls_plus" | "mu-gdnls-plus" => Ok(Pairing::MuGdnlsPlus),
            "mu_gdnls_v" | "mu-gdnls-v" => Ok(Pairing::MuGdnlsV),
            other => Err(Error::Config(format!("unknown pairing {other:?}"))),
        }
    }
}

/// Where the initial ensemble comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleSource {
    /// Independent `ρ_N` draws carrying the measure's density as weights.
    Importance,
    /// Thinned Metropolis chain targeting the measure; standard errors
    /// account for the chain's autocorrelation.
    Mcmc(McmcOptions),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceConfig {
    pub pairing: Pairing,
    pub source: EnsembleSource,
    pub modes: usize,
    pub count: usize,
    pub mass_cutoff: f64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Largest accepted gap in combined standard errors.
    pub sigma_threshold: f64,
    /// Largest accepted drift of the exactly conserved quantities.
    pub drift_tolerance: f64,
}

impl InvarianceConfig {
    pub fn new(pairing: Pairing, modes: usize, count: usize, mass_cutoff: f64, seed: u64) -> Self {
        Self {
            pairing,
            source: EnsembleSource::Importance,
            modes,
            count,
            mass_cutoff,
            dt: 1e-4,
            horizon: 1.0,
            seed,
            sigma_threshold: 3.0,
            drift_tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableDrift {
    pub name: String,
    pub initial: McEstimate,
    pub fin: McEstimate,
    /// `|mean(T) − mean(0)| / sqrt(se₀² + se_T²)`.
    pub sigma_gap: f64,
    /// Gap in units of the paired standard error.
    pub paired_sigma_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub config: InvarianceConfig,
    /// Metropolis acceptance rate for chain ensembles.
    pub acceptance_rate: Option<f64>,
    /// Importance ESS, or the smallest chain ESS over the panel at `t = 0`.
    pub ess: f64,
    pub evolved: usize,
    pub diverged: usize,
    pub under_resolved: usize,
    pub divergence_rate: f64,
    pub max_mass_drift: f64,
    pub max_hamiltonian_drift: f64,
    pub max_energy_drift: f64,
    pub observables: Vec<ObservableDrift>,
}

impl InvarianceReport {
    /// Largest drift among the quantities the truncated flow conserves exactly:
    /// `m` for every equation, plus `H` for DNLS.
    pub fn conserved_drift(&self) -> f64 {
        match self.config.pairing {
            Pairing::NuDnls => self.max_mass_drift.max(self.max_hamiltonian_drift),
            _ => self.max_mass_drift,
        }
    }

    pub fn max_sigma_gap(&self) -> f64 {
        self.observables.iter().map(|o| o.sigma_gap).fold(0.0, f64::max)
    }

    pub fn invalid(&self) -> bool {
        self.divergence_rate > 0.01
    }

    pub fn passes(&self) -> bool {
        !self.invalid()
            && self.max_sigma_gap() <= self.config.sigma_threshold
            && self.conserved_drift() <= self.config.drift_tolerance
    }
}

const PANEL: [&str; 5] = ["mass", "quartic", "hamiltonian", "re_zero_mode", "cos_re_origin"];

fn panel_values(u: &SpectralField, equation: Equation) -> [f64; 5] {
    let i = Integrals::of(u);
    let h = match equation {
        Equation::Dnls => i.hamiltonian(),
        _ => i.gauged_hamiltonian(),
    };
    let origin: Complex64 = u.coeffs().iter().sum();
    [i.mass, i.quartic, h, u.coeff(0).re, origin.re.cos()]
}

/// Weighted panel means at `t = 0` and `t = T` for an importance-weighted
/// ensemble evolved under the paired flow.
pub fn invariance_experiment(config: &InvarianceConfig) -> Result<InvarianceReport> {
    let measure = MeasureConfig::new(config.modes, config.mass_cutoff, config.pairing.measure())?;
    let (ens, acceptance_rate) = match config.source {
        EnsembleSource::Importance => (sample_weighted(&measure, config.seed, config.count)?, None),
        EnsembleSource::Mcmc(options) => {
            let (e, d) = mcmc_sample(&measure, config.seed, config.count, &options)?;
            (e, Some(d.acceptance_rate))
        }
    };
    let solver = SolverConfig::new(config.modes, config.dt, config.horizon, config.pairing.equation());
    solver.validate()?;
    let live: Vec<usize> = (0..ens.len()).filter(|&i| ens.log_weights[i].is_finite()).collect();
    if live.len() < 2 {
        return Err(Error::Degenerate(format!(
            "{} of {} samples inside the cutoff",
            live.len(),
            ens.len()
        )));
    }
    let runs: Vec<([f64; 5], [f64; 5], TrajectoryReport)> = live
        .par_iter()
        .map(|&i| {
            let u0 = &ens.samples[i];
            let (u_t, rep) = evolve(u0, &solver).expect("validated configuration");
            (panel_values(u0, solver.equation), panel_values(&u_t, solver.equation), rep)
        })
        .collect();
    let diverged = runs.iter().filter(|r| r.2.diverged).count();
    let under_resolved = runs.iter().filter(|r| !r.2.diverged && r.2.under_resolved).count();
    let kept: Vec<usize> = (0..runs.len())
        .filter(|&k| !runs[k].2.diverged && !runs[k].2.under_resolved)
        .collect();
    if kept.len() < 2 {
        return Err(Error::Degenerate("no usable trajectories".into()));
    }
    let lw: Vec<f64> = kept.iter().map(|&k| ens.log_weights[live[k]]).collect();
    let observables = PANEL
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let v0: Vec<f64> = kept.iter().map(|&k| runs[k].0[j]).collect();
            let v1: Vec<f64> = kept.iter().map(|&k| runs[k].1[j]).collect();
            let (initial, fin, diff, se) = match config.source {
                EnsembleSource::Importance => {
                    let (diff, se) = paired_difference(&v1, &lw, &v0, &lw)?;
                    (self_normalized(&v0, &lw)?, self_normalized(&v1, &lw)?, diff, se)
                }
                EnsembleSource::Mcmc(_) => {
                    let d: Vec<f64> = v1.iter().zip(&v0).map(|(a, b)| a - b).collect();
                    let pd = chain_estimate(&d);
                    (chain_estimate(&v0), chain_estimate(&v1), pd.value, pd.stderr)
                }
            };
            Ok(ObservableDrift {
                name: name.to_string(),
                sigma_gap: initial.sigma_gap(&fin),
                paired_sigma_gap: crate::measures::sigma_gap(diff, se),
                initial,
                fin,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let finite = runs.iter().filter(|r| !r.2.diverged);
    let max_of = |f: fn(&TrajectoryReport) -> f64| finite.clone().map(|r| f(&r.2)).fold(0.0, f64::max);
    let ess = match config.source {
        EnsembleSource::Importance => crate::measures::effective_sample_size(&lw),
        EnsembleSource::Mcmc(_) => observables.iter().map(|o| o.initial.ess).fold(f64::INFINITY, f64::min),
    };
    Ok(InvarianceReport {
        config: *config,
        acceptance_rate,
        ess,
        evolved: runs.len(),
        diverged,
        under_resolved,
        divergence_rate: diverged as f64 / runs.len() as f64,
        max_mass_drift: max_of(|r| r.mass_drift),
        max_hamiltonian_drift: max_of(|r| r.hamiltonian_drift),
        max_energy_drift: max_of(|r| r.energy_drift),
        observables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constants_are_stationary() {
        let k = SpectralField::constant(8, c(0.6, -0.3));
        for eq in [Equation::Dnls, Equation::GdnlsPlus, Equation::GdnlsV] {
            let r = rhs(&k, eq);
            assert!(r.coeffs().iter().all(|v| v.norm() < 1e-14), "{eq:?}");
        }
        let cfg = SolverConfig::new(8, 1e-3, 0.5, Equation::GdnlsPlus);
        let (out, rep) = evolve(&k, &cfg).unwrap();
        assert!(out.max_coeff_diff(&k) < 1e-12);
        assert!(!rep.diverged);
    }

    #[test]
    fn plane_wave_rhs_matches_frequency() {
        let a = c(0.5, 0.2);
        for n in [-2i64, 1, 3] {
            let u = SpectralField::plane_wave(6, n, a);
            let omega = (n * n) as f64 - n as f64 * a.norm_sqr();
            for eq in [Equation::Dnls, Equation::GdnlsPlus] {
                let r = rhs(&u, eq);
                let expect = u.scaled(c(0.0, -omega));
                assert!(r.max_coeff_diff(&expect) < 1e-13, "{eq:?} n={n}");
            }
        }
    }

    #[test]
    fn plane_wave_is_reproduced() {
        let a = c(0.5, 0.0);
        let cfg = SolverConfig::new(32, 5e-4, 1.0, Equation::Dnls);
        let (out, _) = evolve(&SpectralField::plane_wave(32, 1, a), &cfg).unwrap();
        assert!(out.sup_distance(&plane_wave_solution(32, 1, a, 1.0)) < 1e-10);
    }

    #[test]
    fn zero_horizon_is_identity() {
        let u = SpectralField::from_fn(8, |n| c(0.1 / (1.0 + (n * n) as f64), 0.05));
        let cfg = SolverConfig::new(8, 1e-3, 0.0, Equation::Dnls);
        assert_eq!(cfg.steps(), 0);
        assert_eq!(gauge_equivariance_check(&u, &cfg).unwrap(), 0.0);
        assert_eq!(galilean_link_check(&u, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn stability_guard_rejects_large_steps() {
        assert!(SolverConfig::new(32, 1e-2, 1.0, Equation::Dnls).validate().is_err());
        assert!(SolverConfig::new(32, 1e-4, -1.0, Equation::Dnls).validate().is_err());
        assert!("nope".parse::<Equation>().is_err());
    }

    #[test]
    fn mass_is_conserved_to_scheme_accuracy() {
        let u = SpectralField::from_fn(16, |n| c(0.3 / (1.0 + (n * n) as f64), 0.1 * n as f64 / (1.0 + (n * n * n * n) as f64)));
        for eq in [Equation::Dnls, Equation::GdnlsPlus] {
            let (_, rep) = evolve(&u, &SolverConfig::new(16, 1e-3, 0.5, eq)).unwrap();
            assert!(rep.mass_drift < 1e-10, "{eq:?} {rep:?}");
        }
    }
}
