use std::path::Path;
use std::process::Command;

use dnls_gauge::cli::Envelope;
use dnls_gauge::io::{self, read_fields, RecordKind, Sidecar};
use dnls_gauge::SpectralField;
use num_complex::Complex64;

fn run(dir: &Path, args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_dnls-gauge"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs");
    out.status.code().expect("exit code")
}

fn envelope(path: &Path) -> Envelope {
    io::read_json(path).unwrap()
}

#[test]
fn identities_pass_and_injected_flip_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["identities", "--modes", "8", "--samples", "20"]), 0);
    let env = envelope(&dir.path().join("identities-1.json"));
    assert!(env.pass);
    assert_eq!(env.config.modes, 8);
    assert_eq!(env.format_version, io::FORMAT_VERSION);
    let csv = std::fs::read_to_string(dir.path().join("identities-1.csv")).unwrap();
    assert!(csv.starts_with("experiment,quantity,value,stderr,count"));
    assert_eq!(run(dir.path(), &["identities", "--modes", "8", "--samples", "5", "--inject-sign-flip"]), 1);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"modes\": \"many\"}").unwrap();
    assert_eq!(run(dir.path(), &["identities", "--config", bad.to_str().unwrap()]), 2);
    assert_eq!(run(dir.path(), &["sample", "--measure", "lebesgue"]), 2);
    assert_eq!(run(dir.path(), &["evolve"]), 2);
    assert_eq!(run(dir.path(), &["no-such-command"]), 2);
    let empty = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["report", "--input", empty.path().to_str().unwrap()]), 2);
}

#[test]
fn too_few_paths_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["girsanov", "--samples", "10"]), 3);
}

#[test]
fn exactness_commands_pass() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["cm-verify"]), 0);
    assert_eq!(run(dir.path(), &["bridge-verify", "--samples", "2000"]), 0);
}

#[test]
fn sample_then_evolve_keeps_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(dir.path(), &["sample", "--modes", "8", "--samples", "30", "--seed", "4", "--sampler", "importance"]);
    assert_eq!(code, 0);
    let stem = dir.path().join("ensemble-4");
    let (side, fields) = read_fields(&stem).unwrap();
    assert_eq!((side.size, side.count, side.seed), (8, 30, 4));
    let code = run(
        dir.path(),
        &["evolve", "--input", stem.to_str().unwrap(), "--index", "2", "--dt", "1e-3", "--horizon", "0.05", "--seed", "4"],
    );
    assert_eq!(code, 0);
    let (out_side, out) = read_fields(&dir.path().join("evolved-4")).unwrap();
    assert_eq!(out_side.seed, side.seed);
    assert_eq!(out_side.config["source"], serde_json::to_value(&side).unwrap());
    assert_eq!(out[0], fields[2]);
    let w = side.weights().unwrap()[2];
    assert_eq!(out_side.weights().unwrap()[0].to_bits(), w.to_bits());
}

#[test]
fn zero_horizon_invariance_is_neutral() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "invariance", "--modes", "8", "--samples", "200", "--horizon", "0", "--sampler", "importance", "--mass-cutoff", "3",
    ];
    assert_eq!(run(dir.path(), &args), 0);
    let env = envelope(&dir.path().join("invariance-7.json"));
    for row in env.summary.iter().filter(|r| r.quantity.starts_with("sigma_gap/")) {
        assert_eq!(row.value, 0.0, "{}", row.quantity);
    }
}

#[test]
fn blow_up_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("big");
    let f = SpectralField::from_fn(8, |n| Complex64::new(40.0 / (1.0 + n.abs() as f64), 25.0 * (n as f64).sin()));
    let side = Sidecar::new(RecordKind::Field, 8, 1, 0, serde_json::Value::Null);
    io::write_fields(&stem, &side, &[f]).unwrap();
    let code = run(
        dir.path(),
        &["evolve", "--input", stem.to_str().unwrap(), "--equation", "dnls", "--dt", "0.015", "--horizon", "5"],
    );
    assert_eq!(code, 4);
}

#[test]
fn report_merges_two_seeds() {
    let dir = tempfile::tempdir().unwrap();
    for seed in ["1", "2"] {
        assert_eq!(run(dir.path(), &["bridge-verify", "--samples", "1000", "--seed", seed]), 0);
    }
    let a = envelope(&dir.path().join("bridge-verify-1.json"));
    let b = envelope(&dir.path().join("bridge-verify-2.json"));
    let out = tempfile::tempdir().unwrap();
    let code = run(out.path(), &["report", "--input", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let merged = envelope(&out.path().join("report-1.json"));
    let pick = |e: &Envelope| e.summary.iter().find(|r| r.quantity == "var_ratio_w1").unwrap().clone();
    let (ra, rb, rm) = (pick(&a), pick(&b), pick(&merged));
    let (na, nb) = (ra.count as f64, rb.count as f64);
    let value = (na * ra.value + nb * rb.value) / (na + nb);
    let se = ((na * ra.stderr.unwrap()).powi(2) + (nb * rb.stderr.unwrap()).powi(2)).sqrt() / (na + nb);
    assert!((rm.value - value).abs() < 1e-12);
    assert!((rm.stderr.unwrap() - se).abs() < 1e-12);
    assert_eq!(rm.count, ra.count + rb.count);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let one = tempfile::tempdir().unwrap();
    let two = tempfile::tempdir().unwrap();
    let args = ["sample", "--modes", "8", "--samples", "64", "--sampler", "importance"];
    for (dir, threads) in [(&one, "1"), (&two, "3")] {
        let mut a = args.to_vec();
        a.extend(["--threads", threads]);
        assert_eq!(run(dir.path(), &a), 0);
    }
    for file in ["ensemble-1.f64", "ensemble-1.json", "sample-1.json"] {
        let x = std::fs::read(one.path().join(file)).unwrap();
        let y = std::fs::read(two.path().join(file)).unwrap();
        // the output directory is part of the recorded configuration
        let strip = |v: Vec<u8>, d: &Path| String::from_utf8_lossy(&v).replace(d.to_str().unwrap(), "OUT");
        assert_eq!(strip(x, one.path()), strip(y, two.path()), "{file}");
    }
}
