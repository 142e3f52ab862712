//! Log/phase Gaussianity of complex Brownian motion under the `∫dx/|B|²` clock,
//! plus the exact discrete bridge identities.
//!
//! cargo run --release --example conformal -- [count] [steps] [seed]

use dnls_gauge::bridge::{conformal_gaussianity_check, ConformalOptions};
use dnls_gauge::exactness::{cameron_martin_exactness, rho_bridge_exactness};
use num_complex::Complex64;

fn main() -> dnls_gauge::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(10_000);
    let steps: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(4096);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(5);

    let cm = cameron_martin_exactness(256, 20, seed)?;
    let rb = rho_bridge_exactness(256, 20, Complex64::new(0.4, -0.2), seed)?;
    println!("Cameron-Martin residual {:.2e}, rho/bridge residual {:.2e}", cm.max_residual, rb.max_residual);

    let start = std::time::Instant::now();
    let r = conformal_gaussianity_check(count, steps, seed, &ConformalOptions::default())?;
    println!("{r:#?}");
    println!("max z {:.2} ({:.1}s)", r.max_z(), start.elapsed().as_secs_f64());
    Ok(())
}
