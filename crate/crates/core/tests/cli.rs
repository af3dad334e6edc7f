use std::path::{Path, PathBuf};
use std::process::Command;

fn spincat(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_spincat"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

const LINDBLAD: &str = r#"{
    "params": {"n_spins": 6, "eta": 0.2},
    "detuning": {"kind": "gaussian", "sigma": 0.01},
    "state": {"kind": "cat", "theta": 0.5, "phi": -0.7853981633974483, "parity": "odd"},
    "grid": {"t_start": 0, "t_end": 20, "n_points": 11},
    "seeds": {"master_seed": 5, "realization_count": 4}
}"#;

#[test]
fn negative_spin_count_is_a_config_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"params": {"n_spins": -8, "eta": 0.2}}"#);
    let (code, err) = spincat(&["lindblad", "--config", cfg.to_str().unwrap(), "--out", "out.csv"], dir.path());
    assert_eq!(code, 2);
    assert!(err.contains("params.n_spins"), "{err}");
    assert!(!dir.path().join("out.csv").exists());
}

#[test]
fn unknown_fields_and_bad_overrides_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", LINDBLAD);
    let c = cfg.to_str().unwrap();
    assert_eq!(spincat(&["lindblad", "--config", c, "params.spins=3"], dir.path()).0, 2);
    assert_eq!(spincat(&["lindblad", "--config", c, "nonsense"], dir.path()).0, 2);
    assert_eq!(spincat(&["lindblad", "--config", c, "--workers", "0"], dir.path()).0, 2);
    assert_eq!(spincat(&["hp-sweep", "--config", c], dir.path()).0, 2);
    assert_eq!(spincat(&["lindblad", "--config", "missing.json"], dir.path()).0, 2);
}

#[test]
fn output_is_identical_across_worker_counts_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", LINDBLAD);
    let c = cfg.to_str().unwrap();
    let mut outputs = Vec::new();
    for (i, workers) in ["1", "4", "4"].iter().enumerate() {
        let out = format!("run{i}.csv");
        let (code, err) = spincat(&["lindblad", "--config", c, "--workers", workers, "--out", &out], dir.path());
        assert_eq!(code, 0, "{err}");
        outputs.push(read(&dir.path().join(out)));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
    assert!(outputs[0].starts_with("# spincat lindblad\n# seed: 5\n# config: {"));
    assert!(outputs[0].contains("\nt,fidelity,trace,parity,re_a,im_a\n"));
}

#[test]
fn echoed_config_reproduces_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", LINDBLAD);
    let c = cfg.to_str().unwrap();
    assert_eq!(spincat(&["lindblad", "--config", c, "--seed", "11", "params.eta=0.3", "--out", "a.csv"], dir.path()).0, 0);
    assert_eq!(spincat(&["lindblad", "--config", "a.csv", "--out", "b.csv"], dir.path()).0, 0);
    let (a, b) = (read(&dir.path().join("a.csv")), read(&dir.path().join("b.csv")));
    assert_eq!(a, b);
    assert!(a.contains("# seed: 11") && a.contains("\"eta\":0.3"));
    // the echo carries the subcommand, so it cannot be replayed as another one
    assert_eq!(spincat(&["analytic", "--config", "a.csv"], dir.path()).0, 2);
}

#[test]
fn seed_changes_disorder_realizations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"params": {"n_spins": 50}, "detuning": {"kind": "gaussian", "sigma": 1.0},
            "state": {"kind": "css", "theta": 0.1, "phi": 0},
            "grid": {"t_start": 0, "t_end": 3, "n_points": 4}, "seeds": {"realization_count": 3}}"#,
    );
    let c = cfg.to_str().unwrap();
    assert_eq!(spincat(&["free-dephasing", "--config", c, "--seed", "1", "--out", "a.csv"], dir.path()).0, 0);
    assert_eq!(spincat(&["free-dephasing", "--config", c, "--seed", "2", "--out", "b.csv"], dir.path()).0, 0);
    let data = |name: &str| read(&dir.path().join(name)).lines().filter(|l| !l.starts_with('#')).skip(2).collect::<Vec<_>>().join("\n");
    assert_ne!(data("a.csv"), data("b.csv"));
    let header = read(&dir.path().join("a.csv"));
    assert!(header.contains("t,realization_0,realization_1,realization_2,mean,stderr,analytic_mean"));
}

#[test]
fn unconverged_points_exit_with_code_four_and_keep_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "hp.json",
        r#"{"params": {"n_spins": 20}, "hp_sweep": {"eta": [0.5, 1.0], "steady": {"t_max": 2, "window": 1}}}"#,
    );
    let (code, _) = spincat(&["hp-sweep", "--config", cfg.to_str().unwrap(), "--out", "hp.csv"], dir.path());
    assert_eq!(code, 4);
    let text = read(&dir.path().join("hp.csv"));
    assert!(text.contains("eta,amplitude,sqrt_2eta,t_final,converged"));
    assert_eq!(text.lines().filter(|l| l.ends_with(",0e0")).count(), 2);
}

#[test]
fn ellipse_fit_reads_a_phase_diagram() {
    let dir = tempfile::tempdir().unwrap();
    let n = 1000.0f64;
    let (a, b) = (0.03, 2.0);
    let mut csv = String::from("# spincat sync-sweep\neta_tilde,delta_tilde,zeta_ss,status\n");
    for i in 1..=8 {
        let x = 2.0 * a * i as f64 / 9.0;
        let y = b * (x * (2.0 * a - x)).sqrt();
        csv.push_str(&format!("{:e},{:e},1e-2,Synchronized\n", x * n, y * n * n));
        csv.push_str(&format!("{:e},{:e},NaN,Unsynchronized\n", x * n, 1.1 * y * n * n));
    }
    std::fs::write(dir.path().join("phase.csv"), csv).unwrap();
    let cfg = write_config(dir.path(), "fit_config.json", r#"{"params": {"n_spins": 1000}, "fit": {"input": "phase.csv"}}"#);
    let (code, err) = spincat(&["ellipse-fit", "--config", cfg.to_str().unwrap(), "--out", "fit.json"], dir.path());
    assert_eq!(code, 0, "{err}");
    let fit: serde_json::Value = serde_json::from_str(&read(&dir.path().join("fit.json"))).unwrap();
    assert!((fit["a"].as_f64().unwrap() - a).abs() < 1e-9);
    assert!((fit["b"].as_f64().unwrap() - b).abs() < 1e-9);
    assert_eq!(fit["n"].as_u64(), Some(1000));
    for key in ["residual", "eta_c", "delta_c"] {
        assert!(fit[key].is_number());
    }
}

#[test]
fn degenerate_boundary_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("phase.csv"), "eta_tilde,delta_tilde,zeta_ss,status\n1e0,0e0,0e0,Synchronized\n").unwrap();
    let cfg = write_config(dir.path(), "fit_config.json", r#"{"params": {"n_spins": 1000}, "fit": {"input": "phase.csv"}}"#);
    let (code, _) = spincat(&["ellipse-fit", "--config", cfg.to_str().unwrap(), "--out", "fit.json"], dir.path());
    assert_eq!(code, 3);
    assert!(!dir.path().join("fit.json").exists());
}

#[test]
fn every_subcommand_writes_its_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "analytic",
            r#"{"params": {"n_spins": 200}, "detuning": {"kind": "gaussian", "sigma": 1},
                "state": {"kind": "css", "theta": 0.0707, "phi": 0}, "grid": {"t_start": 0, "t_end": 3, "n_points": 4}}"#,
            "t,css_mean,css_variance,css_variance_exact,even_cat_mean,odd_cat_mean",
        ),
        (
            "wigner",
            r#"{"params": {"n_spins": 20, "eta": 0.5}, "wigner": {"steady": {"t_max": 40}, "points": 11}}"#,
            "re_beta,im_beta,W",
        ),
        (
            "mf-trajectory",
            r#"{"params": {"n_spins": 100, "eta": 2}, "detuning": {"kind": "two_group", "delta": 1e-3},
                "mean_field": {"model": "full"}, "grid": {"t_start": 0, "t_end": 5, "n_points": 6}}"#,
            "t,amplitude,phase,inversion,bloch_excess",
        ),
        (
            "sync-sweep",
            r#"{"params": {"n_spins": 100}, "sync": {"eta_tilde": [2, 7], "delta_tilde": [0, 2000], "refine": false,
                "options": {"budget": 500}}}"#,
            "eta_tilde,delta_tilde,zeta_ss,status",
        ),
    ];
    for (sub, json, columns) in cases {
        let cfg = write_config(dir.path(), &format!("{sub}.json"), json);
        let out = format!("{sub}.csv");
        let (code, err) = spincat(&[sub, "--config", cfg.to_str().unwrap(), "--out", &out], dir.path());
        assert!(code == 0 || code == 4, "{sub}: {code} {err}");
        let text = read(&dir.path().join(&out));
        assert!(text.starts_with(&format!("# spincat {sub}\n")), "{sub}");
        assert!(text.lines().any(|l| l == columns), "{sub}: {text}");
    }
    let sync = read(&dir.path().join("sync-sweep.csv"));
    assert!(sync.contains(",NaN,Unsynchronized"));
}
