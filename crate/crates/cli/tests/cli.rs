use std::path::Path;
use std::process::{Command, Output};

use delayloop::export;

fn delayloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delayloop"))
        .args(args)
        .env_remove("DELAYLOOP_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn every_subcommand_succeeds_on_small_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("vv.csv");
    let curve = curve.to_str().unwrap();
    let runs: [&[&str]; 7] = [
        &["simulate", "--trips", "4"],
        &["correlate", "--kind", "vv", "--start", "-30", "--stop", "30", "--step", "0.05", "--convolve", "--out", curve],
        &["oracle", "--kind", "vh", "--m-max", "3"],
        &["metrics", "--trips", "6"],
        &["wigner", "--trips", "4", "--resolution", "21"],
        &["fit", "--input", curve],
        &["sweep", "--trips", "4", "--m-steps", "3", "--workers", "2"],
    ];
    for args in runs {
        let o = delayloop(args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn csv_headers_name_columns_and_units() {
    let cases: [(&[&str], &str); 5] = [
        (&["simulate", "--trips", "3"], "roundtrip,nbar_photons,g2_zero"),
        (&["correlate", "--start", "0", "--stop", "1", "--step", "0.5"], "tau_ns,g2_HH"),
        (&["oracle"], "m_roundtrips,g2_HH_oracle,g2_HH_closed_form"),
        (&["metrics", "--trips", "3"], "n,P_artificial,P_coherent,P_thermal,rate_hz"),
        (&["sweep", "--trips", "3", "--m-steps", "2"], "overlap_M,g2_raw,g2_corrected,g2_convolved,nbar_photons,dropped_weight,converged"),
    ];
    for (args, header) in cases {
        let o = delayloop(args);
        assert_eq!(code(&o), 0);
        assert_eq!(stdout(&o).lines().next(), Some(header), "{args:?}");
    }
}

#[test]
fn json_output_carries_schema_version() {
    let o = delayloop(&["simulate", "--trips", "5", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["kind"], "simulation");
    let pn: f64 = v["data"]["report"]["pn"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    let dropped = v["data"]["report"]["dropped_weight"].as_f64().unwrap();
    assert!((pn - (1.0 - dropped)).abs() < 1e-9);
}

#[test]
fn domain_errors_exit_one() {
    for args in [
        &["simulate", "--eta-l", "1.5"][..],
        &["sweep", "--m-steps", "0"],
        &["oracle", "--kind", "vv"],
        &["oracle", "--r-max", "1"],
        &["wigner", "--reference", "coherent", "--nbar=-1"],
    ] {
        let o = delayloop(args);
        assert_eq!(code(&o), 1, "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn flat_curve_fit_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.csv");
    let rows: String = (0..=400).map(|i| format!("{},1\n", -20.0 + i as f64 * 0.1)).collect();
    std::fs::write(&path, format!("tau_ns,g2_VV\n{rows}")).unwrap();
    let o = delayloop(&["fit", "--input", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn io_and_parse_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[loop]\neta_l = \"high\"\n").unwrap();
    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "[loop]\nbogus = 1\n").unwrap();
    let missing = dir.path().join("nope.toml");
    for args in [
        vec!["simulate", "--config", missing.to_str().unwrap()],
        vec!["simulate", "--config", bad.to_str().unwrap()],
        vec!["simulate", "--config", unknown.to_str().unwrap()],
        vec!["fit", "--histogram", missing.to_str().unwrap()],
        vec!["simulate", "--out", "/nonexistent/dir/out.csv"],
    ] {
        assert_eq!(code(&delayloop(&args)), 2, "{args:?}");
    }
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[loop]\noverlap = 0.5\neta_l = 0.8\n\n[engine]\nn_roundtrips = 6\n").unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = stdout(&delayloop(&["simulate", "--config", c]));
    let by_flags = stdout(&delayloop(&["simulate", "--overlap", "0.5", "--eta-l", "0.8", "--trips", "6"]));
    assert_eq!(from_file, by_flags);
    let overridden = stdout(&delayloop(&["simulate", "--config", c, "--overlap", "0"]));
    let plain = stdout(&delayloop(&["simulate", "--overlap", "0", "--eta-l", "0.8", "--trips", "6"]));
    assert_eq!(overridden, plain);
    assert_ne!(overridden, from_file);
}

#[test]
fn sweep_output_is_independent_of_worker_count() {
    let base = ["sweep", "--trips", "8", "--m-steps", "6", "--format", "json"];
    let one = delayloop(&[&base[..], &["--workers", "1"]].concat());
    let four = delayloop(&[&base[..], &["--workers", "4"]].concat());
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn worker_count_comes_from_the_environment() {
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_delayloop"))
            .args(["sweep", "--trips", "3", "--m-steps", "2"])
            .env("DELAYLOOP_WORKERS", v)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("2")), 0);
    assert_eq!(code(&run("zero")), 1);
}

#[test]
fn correlate_then_fit_recovers_the_source() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("vv.csv");
    let c = curve.to_str().unwrap();
    let args = ["correlate", "--kind", "vv", "--start", "-40", "--stop", "40", "--step", "0.05", "--convolve", "--out", c];
    assert_eq!(code(&delayloop(&args)), 0);
    let o = delayloop(&["fit", "--input", c, "--format", "json", "--a", "0.35", "--tau-b", "3.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let p = &v["data"]["params"];
    assert!((p["a"].as_f64().unwrap() - 0.24).abs() < 0.01, "{p}");
    assert!((p["tau_b"].as_f64().unwrap() - 5.2).abs() < 0.1, "{p}");
}

#[test]
fn histogram_is_normalized_by_its_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.csv");
    std::fs::write(&h, "tau_ns,counts\n-1,9700\n0,4850\n1,9700\n").unwrap();
    let o = delayloop(&["correlate", "--histogram", h.to_str().unwrap(), "--baseline", "9700"]);
    assert_eq!(code(&o), 0);
    let curve = export::parse_curve_csv(&stdout(&o), Path::new("stdout")).unwrap();
    assert_eq!(curve.values, vec![1.0, 0.5, 1.0]);
}

#[test]
fn wigner_matrix_text_parses() {
    let o = delayloop(&["wigner", "--reference", "thermal", "--nbar", "0.3", "--resolution", "81", "--extent", "5"]);
    assert_eq!(code(&o), 0);
    let g = export::parse_wigner(&stdout(&o), Path::new("stdout")).unwrap();
    assert_eq!((g.q.len(), g.p.len()), (81, 81));
    assert!((g.integral() - 1.0).abs() < 0.01);
    assert!(g.minimum() >= 0.0);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let a = delayloop(&["metrics", "--trips", "8", "--overlap", "0.7", "--format", "json"]);
    let b = delayloop(&["metrics", "--trips", "8", "--overlap", "0.7", "--format", "json"]);
    assert_eq!(a.stdout, b.stdout);
}
