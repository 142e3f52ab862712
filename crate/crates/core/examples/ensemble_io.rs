//! Draws a `μ` ensemble with the Metropolis sampler, stores it as raw `f64`
//! with a JSON sidecar, reads it back and evolves one member.
//!
//! cargo run --release --example ensemble_io -- [dir] [count] [B]

use dnls_gauge::dynamics::{evolve, Equation, SolverConfig};
use dnls_gauge::io::{read_fields, write_fields, RecordKind, Sidecar};
use dnls_gauge::measures::{mcmc_sample, McmcOptions, MeasureConfig, MeasureKind};

fn main() -> dnls_gauge::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("dnls-gauge-ensemble"));
    let count: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);
    let b: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2.5);
    std::fs::create_dir_all(&dir)?;

    let measure = MeasureConfig::new(16, b, MeasureKind::Mu)?;
    let options = McmcOptions { step_scale: 0.3, burn_in: 500, thin: 20 };
    let (ens, diag) = mcmc_sample(&measure, 3, count, &options)?;
    println!("acceptance {:.3}, {} states", diag.acceptance_rate, ens.len());

    let stem = dir.join("mu-ensemble");
    let side = Sidecar::new(RecordKind::Field, 16, ens.len(), 3, serde_json::to_value(measure)?)
        .with_log_weights(&ens.log_weights);
    write_fields(&stem, &side, &ens.samples)?;
    let (back_side, fields) = read_fields(&stem)?;
    assert_eq!(back_side, side);

    let (_, rep) = evolve(&fields[0], &SolverConfig::new(16, 1e-3, 1.0, Equation::GdnlsPlus))?;
    println!(
        "member 0 under GDNLS+: mass drift {:.2e}, gauged Hamiltonian drift {:.2e}, top band {:.2e}",
        rep.mass_drift, rep.hamiltonian_drift, rep.max_top_band
    );
    Ok(())
}
