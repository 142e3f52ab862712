use std::f64::consts::PI;

use dnls_gauge::bridge::cameron_martin_log_density;
use dnls_gauge::functionals::{mass, Integrals};
use dnls_gauge::gauge::{self, GaugeSpec};
use dnls_gauge::io::{read_fields, write_fields, RecordKind, Sidecar};
use dnls_gauge::SpectralField;
use num_complex::Complex64;
use proptest::prelude::*;

fn field(modes: usize) -> impl Strategy<Value = SpectralField> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * modes + 1).prop_map(move |v| {
        SpectralField::from_fn(modes, |n| {
            let (re, im) = v[(n + modes as i64) as usize];
            Complex64::new(re, im) / (1.0 + (n * n) as f64)
        })
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval(f in field(8)) {
        let g = f.to_grid(64).unwrap();
        let mean: f64 = g.values.iter().map(|z| z.norm_sqr()).sum::<f64>() / 64.0;
        prop_assert!((mean - mass(&f)).abs() < 1e-12);
    }

    #[test]
    fn gauge_round_trip_and_modulus(f in field(8)) {
        let g = gauge::gauge(&f, &GaugeSpec::plain().with_output_modes(64));
        let back = gauge::gauge_inverse(&g, &GaugeSpec::plain().with_output_modes(8));
        prop_assert!(back.max_coeff_diff(&f) < 1e-10);
        let (a, b) = (f.to_grid(256).unwrap(), g.to_grid(256).unwrap());
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x.norm() - y.norm()).abs() < 1e-11);
        }
    }

    #[test]
    fn gauge_commutes_with_symmetries(f in field(6), shift in 0.0f64..(2.0 * PI), theta in -PI..PI) {
        let spec = GaugeSpec::plain().with_output_modes(48);
        let g = gauge::gauge(&f, &spec);
        let moved = gauge::gauge(&f.translated(shift), &spec);
        prop_assert!(moved.max_coeff_diff(&g.translated(shift)) < 1e-11);
        let turned = gauge::gauge(&f.rotated(theta), &spec);
        prop_assert!(turned.max_coeff_diff(&g.rotated(theta)) < 1e-11);
    }

    #[test]
    fn functionals_are_symmetric(f in field(6), shift in 0.0f64..(2.0 * PI), theta in -PI..PI) {
        let a = Integrals::of(&f);
        for b in [Integrals::of(&f.translated(shift)), Integrals::of(&f.rotated(theta))] {
            prop_assert!(rel(a.mass, b.mass) < 1e-12);
            prop_assert!(rel(a.energy(), b.energy()) < 1e-11);
            prop_assert!(rel(a.hamiltonian(), b.hamiltonian()) < 1e-11);
            prop_assert!(rel(a.gauged_energy(), b.gauged_energy()) < 1e-11);
        }
    }

    #[test]
    fn energies_agree_through_the_gauge(f in field(6)) {
        let w = gauge::gauge(&f, &GaugeSpec::plain().with_output_modes(48));
        let (iu, iw) = (Integrals::of(&f), Integrals::of(&w));
        prop_assert!(rel(iu.energy(), iw.gauged_energy()) < 1e-9);
        prop_assert!(rel(iu.hamiltonian(), iw.gauged_hamiltonian()) < 1e-9);
    }

    #[test]
    fn cameron_martin_is_a_cocycle(
        x in prop::collection::vec(-2.0f64..2.0, 17),
        k1 in prop::collection::vec(-1.0f64..1.0, 17),
        k2 in prop::collection::vec(-1.0f64..1.0, 17),
    ) {
        let t: Vec<f64> = (0..17).map(|i| 2.0 * PI * i as f64 / 16.0).collect();
        let sum: Vec<f64> = k1.iter().zip(&k2).map(|(a, b)| a + b).collect();
        let moved: Vec<f64> = x.iter().zip(&k1).map(|(a, b)| a - b).collect();
        let whole = cameron_martin_log_density(&t, &x, &sum).unwrap();
        let parts = cameron_martin_log_density(&t, &x, &k1).unwrap() + cameron_martin_log_density(&t, &moved, &k2).unwrap();
        prop_assert!((whole - parts).abs() < 1e-10 * (1.0 + whole.abs()));
    }

    #[test]
    fn bulk_files_round_trip(fields in prop::collection::vec(field(3), 1..5), seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("f");
        let side = Sidecar::new(RecordKind::Field, 3, fields.len(), seed, serde_json::json!({"seed": seed}));
        write_fields(&stem, &side, &fields).unwrap();
        let (back_side, back) = read_fields(&stem).unwrap();
        prop_assert_eq!(back, fields);
        prop_assert_eq!(back_side, side);
    }
}
