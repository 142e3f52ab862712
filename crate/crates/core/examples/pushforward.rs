//! Finite-N check that the gauge carries `ν` to `μ`: compares `E_ν[F∘G]`
//! with `E_μ[F]` on the standard panel at several cutoffs.
//!
//! cargo run --release --example pushforward -- [count] [B] [seed]

use dnls_gauge::measures::pushforward_consistency;

fn main() -> dnls_gauge::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let b: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2.0);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(11);
    for modes in [32, 64] {
        let start = std::time::Instant::now();
        let r = pushforward_consistency(modes, b, seed, count, 4 * modes)?;
        println!(
            "N={modes} B={b}: ess nu {:.0} mu {:.0}, total gap {:.4} ({:.1}s)",
            r.ess_nu,
            r.ess_mu,
            r.total_gap(),
            start.elapsed().as_secs_f64()
        );
        for o in &r.observables {
            println!(
                "  {:14} nu∘G {:+.5}±{:.5}  mu {:+.5}±{:.5}  gap {:.2}",
                o.name, o.nu_of_gauged.value, o.nu_of_gauged.stderr, o.mu.value, o.mu.stderr, o.sigma_gap
            );
        }
    }
    Ok(())
}
