//! Weighted ensembles evolved under the matching flow: the observable panel
//! should not move between `t = 0` and `t = T`.
//!
//! cargo run --release --example invariance -- [pairing] [count] [B] [dt] [seed] [mcmc step scale] [thin]

use dnls_gauge::dynamics::{invariance_experiment, EnsembleSource, InvarianceConfig, Pairing};
use dnls_gauge::measures::McmcOptions;

fn main() -> dnls_gauge::Result<()> {
    let mut args = std::env::args().skip(1);
    let pairing: Pairing = args.next().unwrap_or_else(|| "nu-dnls".into()).parse()?;
    let count: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(2000);
    let b: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2.0);
    let dt: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1e-4);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(7);
    let mut cfg = InvarianceConfig::new(pairing, 32, count, b, seed);
    cfg.dt = dt;
    if let Some(step_scale) = args.next().and_then(|a| a.parse().ok()) {
        let thin = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
        cfg.source = EnsembleSource::Mcmc(McmcOptions {
            step_scale,
            burn_in: 1000,
            thin,
        });
    }
    let start = std::time::Instant::now();
    let r = invariance_experiment(&cfg)?;
    println!(
        "{pairing:?} B={b} dt={dt}: evolved {} ess {:.0} diverged {} under-resolved {} ({:.1}s)",
        r.evolved,
        r.ess,
        r.diverged,
        r.under_resolved,
        start.elapsed().as_secs_f64()
    );
    if let Some(rate) = r.acceptance_rate {
        println!("chain acceptance {rate:.3}");
    }
    println!(
        "drifts: mass {:.2e} hamiltonian {:.2e} energy {:.2e}",
        r.max_mass_drift, r.max_hamiltonian_drift, r.max_energy_drift
    );
    for o in &r.observables {
        println!(
            "  {:14} t=0 {:+.5}±{:.5}  t=T {:+.5}±{:.5}  gap {:.2} paired {:.2}",
            o.name, o.initial.value, o.initial.stderr, o.fin.value, o.fin.stderr, o.sigma_gap, o.paired_sigma_gap
        );
    }
    println!("pass: {}", r.passes());
    Ok(())
}
