//! Exponential moment and transport check for the gauged bridge, with a
//! refinement study and the flipped-sign control.
//!
//! cargo run --release --example girsanov -- [count] [seed] [gauged fraction]

use dnls_gauge::change_of_measure::{
    cutoff_for_gauged_fraction, refinement_study, transport_panel, DensitySign, TransportConfig,
};
use dnls_gauge::GaugeSpec;
use num_complex::Complex64;

fn main() -> dnls_gauge::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2024);
    let fraction: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.5);
    let n_steps = 1024;
    let b = cutoff_for_gauged_fraction(fraction, n_steps, Complex64::new(0.0, 0.0), 4000, seed ^ 0xb)?;
    println!("cutoff B = {b:.4} (mass threshold {:.4})", b * b / (2.0 * std::f64::consts::PI));
    let spec = GaugeSpec::cutoff(b)?;
    let panel = transport_panel();
    for sign in [DensitySign::Standard, DensitySign::Flipped] {
        let mut cfg = TransportConfig::new(count, n_steps, spec, seed);
        cfg.sign = sign;
        let study = refinement_study(&cfg, &panel, 3)?;
        println!("\n{sign:?}");
        for r in &study.levels {
            println!(
                "n={:5} gauged={:.3} novikov={:.4}±{:.4} max_log={:.2} sd_log={:.2} total_gap={:.4}",
                r.params.n_steps,
                r.gauged_fraction,
                r.novikov.value,
                r.novikov.stderr,
                r.max_log_density,
                r.gauged_log_density_sd,
                r.total_gap()
            );
            for o in &r.observables {
                println!(
                    "    {:18} lhs={:+.5}±{:.5} rhs={:+.5}±{:.5} gap={:.2} paired={:.2}",
                    o.name, o.lhs.value, o.lhs.stderr, o.rhs.value, o.rhs.stderr, o.sigma_gap, o.paired_sigma_gap
                );
            }
        }
        println!("gaps shrink: {}", study.gaps_shrink());
    }
    Ok(())
}
