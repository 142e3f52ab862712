//! Sweeps the functional identities and the gauge checks over random fields.
//!
//! cargo run --release --example identities -- [modes] [count] [seed]

use dnls_gauge::identities::{gauge_sweep, identity_sweep, SweepOptions};

fn main() -> dnls_gauge::Result<()> {
    let mut args = std::env::args().skip(1);
    let modes: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(64);
    let count: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(1000);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);

    let start = std::time::Instant::now();
    let r = identity_sweep(&SweepOptions::new(modes, count, seed))?;
    println!("identities over {count} fields at N={modes} ({:.1}s)", start.elapsed().as_secs_f64());
    for (name, v) in r.named() {
        println!("  {name:20} {v:.2e}");
    }

    let start = std::time::Instant::now();
    let g = gauge_sweep(modes, count.min(100), seed)?;
    println!("gauge over {} fields ({:.1}s)", count.min(100), start.elapsed().as_secs_f64());
    println!("  round trip {:.2e}  modulus {:.2e}  J vs quadrature {:.2e}", g.round_trip, g.modulus, g.phase_oracle);
    Ok(())
}
