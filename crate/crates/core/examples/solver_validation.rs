//! Plane-wave accuracy, time-step convergence order, gauge equivariance and
//! the Galilean link between the two gauged equations.
//!
//! cargo run --release --example solver_validation

use dnls_gauge::dynamics::{evolve, galilean_link_check, gauge_equivariance_check, plane_wave_solution, Equation, SolverConfig};
use dnls_gauge::SpectralField;
use num_complex::Complex64;

fn fmt(v: &[f64]) -> String {
    v.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" ")
}

fn order(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn relaxed(dt: f64, eq: Equation) -> SolverConfig {
    let mut cfg = SolverConfig::new(32, dt, 0.5, eq);
    cfg.stability_constant = 10.0;
    cfg
}

fn main() -> dnls_gauge::Result<()> {
    let a = Complex64::new(0.5, 0.0);
    for eq in [Equation::Dnls, Equation::GdnlsPlus] {
        let cfg = SolverConfig::new(32, 1e-4, 1.0, eq);
        let (u, _) = evolve(&SpectralField::plane_wave(32, 1, a), &cfg)?;
        println!("{eq:?} plane wave sup error at dt=1e-4: {:.3e}", u.sup_distance(&plane_wave_solution(32, 1, a, 1.0)));
    }

    let big = Complex64::new(1.5, 0.0);
    let dts = [0.04, 0.02, 0.01, 0.005];
    for eq in [Equation::Dnls, Equation::GdnlsPlus] {
        let errs: Vec<f64> = dts
            .iter()
            .map(|&dt| {
                let mut cfg = SolverConfig::new(4, dt, 1.0, eq);
                cfg.stability_constant = 1.0;
                let (u, _) = evolve(&SpectralField::plane_wave(4, 3, big), &cfg).unwrap();
                u.sup_distance(&plane_wave_solution(4, 3, big, 1.0))
            })
            .collect();
        println!("{eq:?} plane-wave errors {} orders {:.2?}", fmt(&errs), order(&errs));
    }

    let u0 = SpectralField::from_fn(32, |n| match n {
        0 => Complex64::new(0.8, 0.0),
        1 => Complex64::new(0.4, 0.0),
        -2 => Complex64::new(0.0, 0.3),
        _ => Complex64::new(0.0, 0.0),
    });
    let dts = [8e-3, 4e-3, 2e-3, 1e-3];
    let eqv: Vec<f64> = dts
        .iter()
        .map(|&dt| gauge_equivariance_check(&u0, &relaxed(dt, Equation::Dnls)).unwrap())
        .collect();
    println!("equivariance {} orders {:.2?}", fmt(&eqv), order(&eqv));
    let gal: Vec<f64> = dts
        .iter()
        .map(|&dt| galilean_link_check(&u0, &relaxed(dt, Equation::GdnlsPlus)).unwrap())
        .collect();
    println!("galilean {} orders {:.2?}", fmt(&gal), order(&gal));
    Ok(())
}
