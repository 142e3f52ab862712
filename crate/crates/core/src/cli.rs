//! Command-line front end: configuration, orchestration and output files.
//!
//! Configuration is resolved in three layers, later ones winning: the
//! subcommand's built-in defaults, the JSON document passed with `--config`,
//! then explicit flags. The resolved [`RunConfig`] is written into every
//! output file.
//!
//! Exit codes: 0 pass, 1 statistical or identity failure, 2 configuration or
//! I/O error, 3 degenerate statistics, 4 divergence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bridge::{conformal_gaussianity_check, ConformalOptions};
use crate::change_of_measure::{
    cutoff_for_gauged_fraction, refinement_study, transport_panel, DensitySign, TransportConfig,
};
use crate::dynamics::{evolve, invariance_experiment, EnsembleSource, Equation, InvarianceConfig, Pairing, SolverConfig};
use crate::error::{Error, Result};
use crate::exactness::{cameron_martin_exactness, rho_bridge_exactness};
use crate::gauge::GaugeSpec;
use crate::identities::{gauge_sweep, identity_sweep, SweepOptions};
use crate::io::{self, RecordKind, Sidecar, CODE_VERSION, FORMAT_VERSION};
use crate::measures::{mcmc_sample, pushforward_consistency, sample_weighted, McmcOptions, MeasureConfig, MeasureKind};
use crate::rng::derive_seed;

pub const IDENTITY_TOLERANCE: f64 = 1e-8;
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-10;
pub const MODULUS_TOLERANCE: f64 = 1e-11;
pub const PHASE_TOLERANCE: f64 = 1e-9;
pub const CAMERON_MARTIN_TOLERANCE: f64 = 1e-10;
pub const RHO_BRIDGE_TOLERANCE: f64 = 1e-9;
pub const SIGMA_THRESHOLD: f64 = 3.0;
pub const CONFORMAL_SIGMA: f64 = 4.0;
pub const KS_FLOOR: f64 = 0.01;

#[derive(Parser, Debug)]
#[command(name = "dnls-gauge", version, about = "Gauge transforms, weighted Wiener measures and invariance checks for periodic DNLS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Functional identities and gauge exactness over random fields.
    Identities,
    /// Exponential moment and transport of the gauged bridge, with refinement.
    Girsanov,
    /// Discrete Cameron-Martin formula against tridiagonal Gaussian densities.
    CmVerify,
    /// Discrete rho/bridge relation and the log/phase Gaussianity check.
    BridgeVerify,
    /// Draws an ensemble to a raw file with a JSON sidecar.
    Sample,
    /// Evolves one field of an ensemble file.
    Evolve,
    /// Stationarity of panel means under a measure/flow pairing.
    Invariance,
    /// Compares `E_ν[F∘G]` with `E_μ[F]` at two cutoffs.
    Transport,
    /// Merges the summaries of every report in a directory.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Identities => "identities",
            Command::Girsanov => "girsanov",
            Command::CmVerify => "cm-verify",
            Command::BridgeVerify => "bridge-verify",
            Command::Sample => "sample",
            Command::Evolve => "evolve",
            Command::Invariance => "invariance",
            Command::Transport => "transport",
            Command::Report => "report",
        }
    }
}

#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Mode cutoff N.
    #[arg(long, global = true)]
    pub modes: Option<usize>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Path steps n, or the base step count of a walk.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// L² cutoff B.
    #[arg(long, global = true)]
    pub mass_cutoff: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON configuration document.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Ensemble stem for `evolve`, report directory for `report`.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Record of the input ensemble to evolve.
    #[arg(long, global = true)]
    pub index: Option<usize>,
    /// rho, nu or mu.
    #[arg(long, global = true)]
    pub measure: Option<String>,
    /// dnls, gdnls-plus or gdnls-v.
    #[arg(long, global = true)]
    pub equation: Option<String>,
    /// nu-dnls, mu-gdnls-plus or mu-gdnls-v.
    #[arg(long, global = true)]
    pub pairing: Option<String>,
    /// importance or mcmc.
    #[arg(long, global = true)]
    pub sampler: Option<String>,
    /// Target fraction of gauged bridges when no cutoff is given.
    #[arg(long, global = true)]
    pub gauged_fraction: Option<f64>,
    /// Runs the transport check with the opposite density sign.
    #[arg(long, global = true)]
    pub sign_flip: bool,
    /// Corrupts one identity on purpose; for testing the failure path.
    #[arg(long, global = true, hide = true)]
    pub inject_sign_flip: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    Importance,
    Mcmc,
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub modes: usize,
    pub samples: usize,
    pub steps: usize,
    pub dt: f64,
    pub horizon: f64,
    pub mass_cutoff: Option<f64>,
    pub gauged_fraction: f64,
    /// Resolutions in the refinement study, each half the previous.
    pub levels: usize,
    pub measure: MeasureKind,
    pub equation: Equation,
    pub pairing: Pairing,
    pub sampler: Sampler,
    pub mcmc: McmcOptions,
    pub index: usize,
    pub sign_flip: bool,
    pub inject_sign_flip: bool,
    pub out: PathBuf,
    pub input: Option<PathBuf>,
    /// Not part of the numeric result.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let mut c = Self {
            command,
            seed: 1,
            modes: 32,
            samples: 1000,
            steps: 256,
            dt: 1e-4,
            horizon: 1.0,
            mass_cutoff: None,
            gauged_fraction: 0.15,
            levels: 3,
            measure: MeasureKind::Mu,
            equation: Equation::GdnlsPlus,
            pairing: Pairing::NuDnls,
            sampler: Sampler::Mcmc,
            mcmc: McmcOptions {
                step_scale: 0.3,
                burn_in: 1000,
                thin: 100,
            },
            index: 0,
            sign_flip: false,
            inject_sign_flip: false,
            out: PathBuf::from("out"),
            input: None,
            threads: None,
        };
        match command {
            Command::Identities => c.modes = 64,
            Command::Girsanov => {
                c.samples = 20_000;
                c.steps = 1024;
                c.seed = 2024;
            }
            Command::CmVerify => c.samples = 20,
            Command::BridgeVerify => c.samples = 10_000,
            Command::Sample => c.mass_cutoff = Some(2.5),
            Command::Evolve => {}
            Command::Invariance => {
                c.samples = 2000;
                c.mass_cutoff = Some(2.5);
                c.seed = 7;
            }
            Command::Transport => {
                c.samples = 20_000;
                c.mass_cutoff = Some(2.0);
                c.seed = 11;
            }
            Command::Report => {}
        }
        c
    }

    /// Defaults, then the optional JSON document, then flags.
    pub fn resolve(command: Command, flags: &Flags) -> Result<Self> {
        let mut value = serde_json::to_value(Self::defaults(command))?;
        if let Some(path) = &flags.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let doc: Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{} is not valid JSON: {e}", path.display())))?;
            let Value::Object(doc) = doc else {
                return Err(Error::Config(format!("{} must hold a JSON object", path.display())));
            };
            let target = value.as_object_mut().expect("struct serializes to an object");
            for (k, v) in doc {
                if k == "command" || !target.contains_key(&k) {
                    return Err(Error::Config(format!("unknown configuration key {k:?}")));
                }
                target.insert(k, v);
            }
        }
        let mut c: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = flags.$f.clone() { c.$f = v; })* };
        }
        take!(seed, modes, samples, steps, dt, horizon, out, index, gauged_fraction);
        if let Some(b) = flags.mass_cutoff {
            c.mass_cutoff = Some(b);
        }
        if flags.input.is_some() {
            c.input = flags.input.clone();
        }
        c.threads = flags.threads;
        if let Some(m) = &flags.measure {
            c.measure = parse_enum(m)?;
        }
        if let Some(e) = &flags.equation {
            c.equation = e.parse()?;
        }
        if let Some(p) = &flags.pairing {
            c.pairing = p.parse()?;
        }
        if let Some(s) = &flags.sampler {
            c.sampler = parse_enum(s)?;
        }
        c.sign_flip |= flags.sign_flip;
        c.inject_sign_flip |= flags.inject_sign_flip;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.modes == 0 {
            return bad("modes must be positive".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad(format!("dt = {} must be positive and horizon = {} non-negative", self.dt, self.horizon));
        }
        if let Some(b) = self.mass_cutoff {
            if !(b > 0.0) {
                return bad(format!("mass cutoff must be positive, got {b}"));
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }

    fn cutoff(&self) -> Result<f64> {
        self.mass_cutoff
            .ok_or_else(|| Error::Config(format!("{} needs --mass-cutoff", self.command.name())))
    }
}

fn parse_enum<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T> {
    serde_json::from_value(Value::String(s.replace('-', "_"))).map_err(|_| Error::Config(format!("unrecognised value {s:?}")))
}

/// How rows of the same quantity combine across runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    /// Count-weighted mean with combined standard error.
    Mean,
    /// Largest value, for residuals and gaps.
    Max,
}

/// One line of the machine-readable summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub quantity: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub count: usize,
    pub combine: Combine,
}

impl SummaryRow {
    fn max(experiment: &str, quantity: &str, value: f64, count: usize) -> Self {
        Self {
            experiment: experiment.into(),
            quantity: quantity.into(),
            value,
            stderr: None,
            count,
            combine: Combine::Max,
        }
    }

    fn mean(experiment: &str, quantity: &str, value: f64, stderr: f64, count: usize) -> Self {
        Self {
            experiment: experiment.into(),
            quantity: quantity.into(),
            value,
            stderr: Some(stderr),
            count,
            combine: Combine::Mean,
        }
    }
}

/// Every JSON report has this shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub kind: String,
    pub format_version: u32,
    pub code_version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub pass: bool,
    pub summary: Vec<SummaryRow>,
    pub report: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Diverged,
}

impl Verdict {
    fn of(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Diverged => 4,
        }
    }
}

pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Degenerate(_) => 3,
        Error::Diverged { .. } => 4,
        _ => 2,
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(v) => v.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<Verdict> {
    let config = RunConfig::resolve(cli.command, &cli.flags)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&config))
}

fn dispatch(c: &RunConfig) -> Result<Verdict> {
    std::fs::create_dir_all(&c.out)?;
    match c.command {
        Command::Identities => identities(c),
        Command::Girsanov => girsanov(c),
        Command::CmVerify => cm_verify(c),
        Command::BridgeVerify => bridge_verify(c),
        Command::Sample => sample(c),
        Command::Evolve => evolve_one(c),
        Command::Invariance => invariance(c),
        Command::Transport => transport(c),
        Command::Report => report(c),
    }
}

fn stem(c: &RunConfig, kind: &str) -> PathBuf {
    c.out.join(format!("{kind}-{}", c.seed))
}

/// Writes `<kind>-<seed>.json` and `.csv`, and prints the summary.
fn emit(c: &RunConfig, pass: bool, summary: Vec<SummaryRow>, report: Value) -> Result<()> {
    let kind = c.command.name();
    let env = Envelope {
        kind: kind.into(),
        format_version: FORMAT_VERSION,
        code_version: CODE_VERSION.into(),
        seed: c.seed,
        config: c.clone(),
        pass,
        summary,
        report,
    };
    let base = stem(c, kind);
    io::write_json(&base.with_extension("json"), &env)?;
    write_summary_csv(&base.with_extension("csv"), &env.summary)?;
    print_summary(kind, &env.summary, pass);
    Ok(())
}

fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.experiment.clone(),
                r.quantity.clone(),
                format!("{:e}", r.value),
                r.stderr.map(|s| format!("{s:e}")).unwrap_or_default(),
                r.count.to_string(),
            ]
        })
        .collect();
    io::write_csv(path, &["experiment", "quantity", "value", "stderr", "count"], &table)
}

fn print_summary(kind: &str, rows: &[SummaryRow], pass: bool) {
    println!("{kind}: {}", if pass { "PASS" } else { "FAIL" });
    for r in rows {
        match r.stderr {
            Some(se) => println!("  {:24} {:28} {:+.6e} ± {:.2e}  (n={})", r.experiment, r.quantity, r.value, se, r.count),
            None => println!("  {:24} {:28} {:.3e}  (n={})", r.experiment, r.quantity, r.value, r.count),
        }
    }
}

fn identities(c: &RunConfig) -> Result<Verdict> {
    let options = SweepOptions {
        inject_sign_flip: c.inject_sign_flip,
        ..SweepOptions::new(c.modes, c.samples, c.seed)
    };
    let r = identity_sweep(&options)?;
    let gauge_count = c.samples.min(100);
    let g = gauge_sweep(c.modes, gauge_count, derive_seed(c.seed, 2))?;
    let mut rows: Vec<SummaryRow> = r
        .named()
        .iter()
        .map(|(name, v)| SummaryRow::max("identities", name, *v, c.samples))
        .collect();
    rows.push(SummaryRow::max("gauge", "round_trip", g.round_trip, gauge_count));
    rows.push(SummaryRow::max("gauge", "modulus", g.modulus, gauge_count));
    rows.push(SummaryRow::max("gauge", "phase_vs_quadrature", g.phase_oracle, gauge_count));
    let pass = r.max() <= IDENTITY_TOLERANCE
        && g.round_trip <= ROUND_TRIP_TOLERANCE
        && g.modulus <= MODULUS_TOLERANCE
        && g.phase_oracle <= PHASE_TOLERANCE;
    emit(c, pass, rows, serde_json::json!({ "identities": r, "gauge": g }))?;
    Ok(Verdict::of(pass))
}

fn girsanov(c: &RunConfig) -> Result<Verdict> {
    let probe = TransportConfig::new(c.samples, c.steps, GaugeSpec::plain(), c.seed);
    probe.validate()?;
    let b = match c.mass_cutoff {
        Some(b) => b,
        None => cutoff_for_gauged_fraction(c.gauged_fraction, c.steps, Complex64::new(0.0, 0.0), 4000, derive_seed(c.seed, 0xb))?,
    };
    let mut cfg = TransportConfig::new(c.samples, c.steps, GaugeSpec::cutoff(b)?, c.seed);
    if c.sign_flip {
        cfg.sign = DensitySign::Flipped;
    }
    let study = refinement_study(&cfg, &transport_panel(), c.levels.max(1))?;
    let mut rows = Vec::new();
    for level in &study.levels {
        let tag = format!("girsanov/n={}", level.params.n_steps);
        rows.push(SummaryRow::mean(&tag, "novikov", level.novikov.value, level.novikov.stderr, c.samples));
        rows.push(SummaryRow::max(&tag, "novikov_sigma", level.novikov_sigma(), c.samples));
        rows.push(SummaryRow::mean(&tag, "gauged_fraction", level.gauged_fraction, 0.0, c.samples));
        rows.push(SummaryRow::max(&tag, "log_density_sd", level.gauged_log_density_sd, c.samples));
        for o in &level.observables {
            rows.push(SummaryRow::max(&tag, &format!("sigma_gap/{}", o.name), o.sigma_gap, c.samples));
        }
        rows.push(SummaryRow::max(&tag, "total_gap", level.total_gap(), c.samples));
    }
    let finest = &study.levels[0];
    let pass = finest.passes(SIGMA_THRESHOLD) && study.gaps_shrink();
    emit(c, pass, rows, serde_json::json!({ "mass_cutoff": b, "study": study }))?;
    Ok(Verdict::of(pass))
}

fn cm_verify(c: &RunConfig) -> Result<Verdict> {
    let r = cameron_martin_exactness(c.steps, c.samples, c.seed)?;
    let pass = r.max_residual <= CAMERON_MARTIN_TOLERANCE;
    let rows = vec![SummaryRow::max("cm-verify", "max_residual", r.max_residual, r.cases)];
    emit(c, pass, rows, serde_json::to_value(r)?)?;
    Ok(Verdict::of(pass))
}

fn bridge_verify(c: &RunConfig) -> Result<Verdict> {
    let exact = rho_bridge_exactness(c.steps, 20, Complex64::new(0.4, -0.2), c.seed)?;
    let conf = conformal_gaussianity_check(c.samples, c.steps, derive_seed(c.seed, 6), &ConformalOptions::default())?;
    let pass = exact.max_residual <= RHO_BRIDGE_TOLERANCE
        && conf.max_z() <= CONFORMAL_SIGMA
        && conf.ks_p_w1 >= KS_FLOOR
        && conf.ks_p_w2 >= KS_FLOOR;
    let n = conf.increments;
    let rows = vec![
        SummaryRow::max("rho-bridge", "max_residual", exact.max_residual, exact.cases),
        SummaryRow::mean("conformal", "var_ratio_w1", conf.var_ratio_w1.0, conf.var_ratio_w1.1, n),
        SummaryRow::mean("conformal", "var_ratio_w2", conf.var_ratio_w2.0, conf.var_ratio_w2.1, n),
        SummaryRow::mean("conformal", "correlation", conf.correlation.0, conf.correlation.1, n),
        SummaryRow::max("conformal", "max_z", conf.max_z(), n),
        SummaryRow::max("conformal", "ks_p_w1", conf.ks_p_w1, n),
        SummaryRow::max("conformal", "ks_p_w2", conf.ks_p_w2, n),
    ];
    emit(c, pass, rows, serde_json::json!({ "rho_bridge": exact, "conformal": conf }))?;
    Ok(Verdict::of(pass))
}

fn sample(c: &RunConfig) -> Result<Verdict> {
    let measure = MeasureConfig::new(c.modes, c.mass_cutoff.unwrap_or(f64::INFINITY), c.measure)?;
    let (ens, acceptance) = match c.sampler {
        Sampler::Importance => (sample_weighted(&measure, c.seed, c.samples)?, None),
        Sampler::Mcmc => {
            let (e, d) = mcmc_sample(&measure, c.seed, c.samples, &c.mcmc)?;
            (e, Some(d.acceptance_rate))
        }
    };
    let side = Sidecar::new(RecordKind::Field, c.modes, ens.len(), c.seed, serde_json::to_value(c)?)
        .with_log_weights(&ens.log_weights);
    let base = stem(c, "ensemble");
    io::write_fields(&base, &side, &ens.samples)?;
    let mut rows = vec![
        SummaryRow::mean("sample", "inside_cutoff", ens.acceptance_fraction(), 0.0, ens.len()),
        SummaryRow::mean("sample", "ess", ens.ess(), 0.0, ens.len()),
    ];
    if let Some(a) = acceptance {
        rows.push(SummaryRow::mean("sample", "mcmc_acceptance", a, 0.0, ens.len()));
    }
    emit(
        c,
        true,
        rows,
        serde_json::json!({ "data": base.with_extension("f64"), "sidecar": base.with_extension("json") }),
    )?;
    Ok(Verdict::Pass)
}

fn evolve_one(c: &RunConfig) -> Result<Verdict> {
    let input = c
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("evolve needs --input <ensemble stem>".into()))?;
    let input = input.with_extension("");
    let (side, fields) = io::read_fields(&input)?;
    let u0 = fields
        .get(c.index)
        .ok_or_else(|| Error::Config(format!("index {} outside an ensemble of {}", c.index, fields.len())))?;
    let solver = SolverConfig::new(u0.modes(), c.dt, c.horizon, c.equation);
    let (u_t, rep) = evolve(u0, &solver)?;
    let mut out_side = Sidecar::new(
        RecordKind::Field,
        u0.modes(),
        2,
        side.seed,
        serde_json::json!({ "source": side, "run": c, "records": ["initial", "final"] }),
    );
    if let Some(w) = side.weights() {
        out_side = out_side.with_log_weights(&[w[c.index], w[c.index]]);
    }
    io::write_fields(&stem(c, "evolved"), &out_side, &[u0.clone(), u_t])?;
    let rows = vec![
        SummaryRow::max("evolve", "mass_drift", rep.mass_drift, 1),
        SummaryRow::max("evolve", "hamiltonian_drift", rep.hamiltonian_drift, 1),
        SummaryRow::max("evolve", "energy_drift", rep.energy_drift, 1),
        SummaryRow::max("evolve", "max_top_band", rep.max_top_band, 1),
    ];
    let verdict = if rep.diverged { Verdict::Diverged } else { Verdict::Pass };
    emit(c, !rep.diverged, rows, serde_json::to_value(rep)?)?;
    Ok(verdict)
}

fn invariance(c: &RunConfig) -> Result<Verdict> {
    let mut cfg = InvarianceConfig::new(c.pairing, c.modes, c.samples, c.cutoff()?, c.seed);
    cfg.dt = c.dt;
    cfg.horizon = c.horizon;
    cfg.sigma_threshold = SIGMA_THRESHOLD;
    cfg.source = match c.sampler {
        Sampler::Importance => EnsembleSource::Importance,
        Sampler::Mcmc => EnsembleSource::Mcmc(c.mcmc),
    };
    let r = invariance_experiment(&cfg)?;
    let n = r.evolved;
    let mut rows = vec![
        SummaryRow::max("invariance", "conserved_drift", r.conserved_drift(), n),
        SummaryRow::max("invariance", "divergence_rate", r.divergence_rate, n),
        SummaryRow::max("invariance", "energy_drift", r.max_energy_drift, n),
    ];
    for o in &r.observables {
        rows.push(SummaryRow::mean("invariance/t=0", &o.name, o.initial.value, o.initial.stderr, n));
        rows.push(SummaryRow::mean("invariance/t=T", &o.name, o.fin.value, o.fin.stderr, n));
        rows.push(SummaryRow::max("invariance", &format!("sigma_gap/{}", o.name), o.sigma_gap, n));
    }
    let verdict = if r.invalid() { Verdict::Diverged } else { Verdict::of(r.passes()) };
    emit(c, verdict == Verdict::Pass, rows, serde_json::to_value(&r)?)?;
    Ok(verdict)
}

fn transport(c: &RunConfig) -> Result<Verdict> {
    let b = c.cutoff()?;
    let coarse = pushforward_consistency(c.modes, b, c.seed, c.samples, 4 * c.modes)?;
    let fine = pushforward_consistency(2 * c.modes, b, c.seed, c.samples, 8 * c.modes)?;
    let mut rows = Vec::new();
    for r in [&coarse, &fine] {
        let tag = format!("transport/N={}", r.modes);
        rows.push(SummaryRow::mean(&tag, "ess_nu", r.ess_nu, 0.0, r.count));
        for o in &r.observables {
            rows.push(SummaryRow::max(&tag, &format!("sigma_gap/{}", o.name), o.sigma_gap, r.count));
        }
        rows.push(SummaryRow::max(&tag, "total_gap", r.total_gap(), r.count));
    }
    let pass = coarse.max_sigma_gap() <= SIGMA_THRESHOLD
        && fine.max_sigma_gap() <= SIGMA_THRESHOLD
        && fine.total_gap() <= coarse.total_gap();
    emit(c, pass, rows, serde_json::json!({ "levels": [coarse, fine] }))?;
    Ok(Verdict::of(pass))
}

/// Combines rows sharing `(experiment, quantity)` across runs.
pub fn merge_rows(runs: &[Vec<SummaryRow>]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String), Vec<&SummaryRow>> = BTreeMap::new();
    for r in runs.iter().flatten() {
        groups.entry((r.experiment.clone(), r.quantity.clone())).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let total: usize = g.iter().map(|r| r.count).sum();
            let first = g[0];
            match first.combine {
                Combine::Max => SummaryRow {
                    value: g.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max),
                    count: total,
                    ..first.clone()
                },
                Combine::Mean => {
                    let w = |r: &SummaryRow| r.count as f64 / total.max(1) as f64;
                    let value = g.iter().map(|r| w(r) * r.value).sum();
                    let stderr = g
                        .iter()
                        .map(|r| r.stderr.map(|s| (w(r) * s).powi(2)))
                        .sum::<Option<f64>>()
                        .map(f64::sqrt);
                    SummaryRow {
                        value,
                        stderr,
                        count: total,
                        ..first.clone()
                    }
                }
            }
        })
        .collect()
}

fn report(c: &RunConfig) -> Result<Verdict> {
    let dir = c
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("report needs --input <directory>".into()))?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let envelopes: Vec<(PathBuf, Envelope)> = paths
        .into_iter()
        .filter_map(|p| io::read_json::<Envelope>(&p).ok().map(|e| (p, e)))
        .filter(|(_, e)| e.kind != "report")
        .collect();
    if envelopes.is_empty() {
        return Err(Error::Config(format!("no reports found in {}", dir.display())));
    }
    let rows = merge_rows(&envelopes.iter().map(|(_, e)| e.summary.clone()).collect::<Vec<_>>());
    let pass = envelopes.iter().all(|(_, e)| e.pass);
    let sources: Vec<Value> = envelopes
        .iter()
        .map(|(p, e)| serde_json::json!({ "file": p, "kind": e.kind, "seed": e.seed, "pass": e.pass }))
        .collect();
    emit(c, pass, rows, serde_json::json!({ "sources": sources }))?;
    Ok(Verdict::of(pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags() -> Flags {
        Flags::default()
    }

    #[test]
    fn flags_override_config_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 5, "modes": 8, "dt": 0.001}"#).unwrap();
        let f = Flags {
            config: Some(path),
            modes: Some(4),
            ..flags()
        };
        let c = RunConfig::resolve(Command::Identities, &f).unwrap();
        assert_eq!((c.seed, c.modes, c.dt, c.samples), (5, 4, 0.001, 1000));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"sead": 5}"#).unwrap();
        let f = Flags {
            config: Some(path.clone()),
            ..flags()
        };
        assert!(matches!(RunConfig::resolve(Command::Sample, &f), Err(Error::Config(_))));
        std::fs::write(&path, "{not json").unwrap();
        assert!(matches!(RunConfig::resolve(Command::Sample, &f), Err(Error::Config(_))));
        let f = Flags {
            dt: Some(-1.0),
            ..flags()
        };
        assert!(matches!(RunConfig::resolve(Command::Sample, &f), Err(Error::Config(_))));
        let f = Flags {
            measure: Some("lebesgue".into()),
            ..flags()
        };
        assert!(RunConfig::resolve(Command::Sample, &f).is_err());
    }

    #[test]
    fn enum_flags_accept_dashes() {
        let f = Flags {
            pairing: Some("mu-gdnls-plus".into()),
            sampler: Some("importance".into()),
            equation: Some("gdnls-v".into()),
            ..flags()
        };
        let c = RunConfig::resolve(Command::Invariance, &f).unwrap();
        assert_eq!(c.pairing, Pairing::MuGdnlsPlus);
        assert_eq!(c.sampler, Sampler::Importance);
        assert_eq!(c.equation, Equation::GdnlsV);
    }

    #[test]
    fn means_merge_with_count_weights() {
        let a = vec![SummaryRow::mean("x", "q", 1.0, 0.2, 100)];
        let b = vec![SummaryRow::mean("x", "q", 2.0, 0.1, 300)];
        let m = merge_rows(&[a, b]);
        assert_eq!(m.len(), 1);
        assert!((m[0].value - 1.75).abs() < 1e-15);
        let se = ((0.25f64 * 0.2).powi(2) + (0.75f64 * 0.1).powi(2)).sqrt();
        assert!((m[0].stderr.unwrap() - se).abs() < 1e-15);
        assert_eq!(m[0].count, 400);
        let r = merge_rows(&[vec![SummaryRow::max("x", "r", 1e-9, 1)], vec![SummaryRow::max("x", "r", 3e-9, 1)]]);
        assert_eq!(r[0].value, 3e-9);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(error_exit_code(&Error::Degenerate(String::new())), 3);
        assert_eq!(error_exit_code(&Error::Diverged { time: 0.5 }), 4);
        assert_eq!(error_exit_code(&Error::Config(String::new())), 2);
        assert_eq!(Verdict::Fail.exit_code(), 1);
    }
}
