mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{config, p1, p2, static_sa, write_config, write_text};
use sabap_cli::config::{SteeringConfig, VariantConfig};
use sabap_cli::Trace;

fn sabap(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sabap"))
        .args(args.iter().map(|a| a.as_ref()))
        .env_remove("SABAP_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p1_static(dir: &Path) -> std::path::PathBuf {
    write_config(
        dir,
        "p1_static",
        &config(
            p1(),
            static_sa(&[&[1], &[2], &[1, 2]], &[0.3, 0.3, 0.4]),
            1000,
            100,
        ),
    )
}

#[test]
fn run_writes_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p1_static(dir.path());
    let out = dir.path().join("trace.csv");
    let o = sabap(&[&"run", &cfg, &"--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    // Header plus k = 0, 100, ..., 1000.
    assert_eq!(text.lines().count(), 1000 / 100 + 2);
    assert!(text.starts_with("k,lambda,step_norm,oracle_dist,x1,x2\n"));
    assert!(dir.path().join("trace.json").exists());
}

#[test]
fn run_uses_output_dir_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p1_static(dir.path());
    let target = dir.path().join("traces");
    let o = Command::new(env!("CARGO_BIN_EXE_sabap"))
        .args([
            "run".as_ref(),
            cfg.as_os_str(),
            "--max-iter".as_ref(),
            "10".as_ref(),
        ])
        .env("SABAP_OUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = Trace::read(&target.join("p1_static.csv")).unwrap();
    assert_eq!(trace.rows.last().unwrap().k, 10);
}

#[test]
fn run_rejects_non_fit_family() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "nonfit",
        &config(p2(), static_sa(&[&[1], &[3]], &[0.5, 0.5]), 10, 1),
    );
    let o = sabap(&[&"run", &cfg, &"--out", &dir.path().join("t")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing indices [2]"), "{}", stderr(&o));
}

#[test]
fn run_rejects_constant_steering() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(p1(), static_sa(&[&[1, 2]], &[1.0]), 10, 1);
    c.steering = SteeringConfig::Constant { value: 0.5 };
    let cfg = write_config(dir.path(), "constant", &c);
    let o = sabap(&[&"run", &cfg, &"--out", &dir.path().join("t")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("not a steering sequence"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_text(
        dir.path(),
        "bad.toml",
        "[problem]\nanchor = [1.0]\n[[problem.operators]]\nkind = \"halfspace\"\na = [1.0]\n\n[variant]\nalgorithm = \"halpern-wittman\"\n",
    );
    let o = sabap(&[&"check", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing field `b`"), "{}", stderr(&o));

    let cfg = write_text(
        dir.path(),
        "bad_point.toml",
        "[problem]\nanchor = [1.0, 2.0]\n[[problem.operators]]\nkind = \"halfspace\"\na = []\nb = 0.0\n\n[variant]\nalgorithm = \"halpern-wittman\"\n",
    );
    let o = sabap(&[&"run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("problem.operators[0].a"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn halpern_wittman_requires_start_at_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let mut problem = p2();
    problem.x0 = Some(vec![0.0, 0.0]);
    let cfg = write_config(
        dir.path(),
        "hw",
        &config(problem, VariantConfig::HalpernWittman, 10, 1),
    );
    let o = sabap(&[&"run", &cfg, &"--out", &dir.path().join("t")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("x0 must equal u"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p1_static(dir.path());
    let blocker = write_text(dir.path(), "file", "");
    let o = sabap(&[&"run", &cfg, &"--out", &blocker.join("sub/trace.csv")]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn check_passes_for_fit_family_in_m_star() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(p2(), static_sa(&[&[1], &[2, 3]], &[0.5, 0.5]), 10, 1);
    c.check = Some(sabap_cli::config::CheckConfig {
        delta: 0.1,
        q_bar: 3,
        prefix: 10_000,
        samples: 50,
    });
    let cfg = write_config(dir.path(), "ok", &c);
    let o = sabap(&[&"check", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("PASS variant: in M*"));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn check_reports_weight_sum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "w",
        &config(p1(), static_sa(&[&[1], &[2]], &[0.5, 0.4]), 10, 1),
    );
    let o = sabap(&[&"check", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("weights sum to 0.9"), "{}", stdout(&o));
}

#[test]
fn check_cites_string_longer_than_q_bar() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(p2(), static_sa(&[&[1, 2, 3, 1]], &[1.0]), 10, 1);
    c.check = Some(sabap_cli::config::CheckConfig {
        delta: 0.1,
        q_bar: 3,
        prefix: 100,
        samples: 0,
    });
    let cfg = write_config(dir.path(), "long", &c);
    let o = sabap(&[&"check", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stdout(&o).contains("string (1,2,3,1) has length 4 above q̄"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn check_reports_unverified_user_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(p1(), static_sa(&[&[1, 2]], &[1.0]), 10, 1);
    c.steering = SteeringConfig::UserTable {
        values: vec![0.5, 1.5],
        c: 1.0,
        p: 1.0,
    };
    let cfg = write_config(dir.path(), "table", &c);
    let o = sabap(&[&"check", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o)
        .contains("FAIL steering prefix K = 10000: λ_k in [0, 1], first violation at k = 1"));
}

#[test]
fn oracle_prints_projection() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p1_static(dir.path());
    let o = sabap(&[&"oracle", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["projection"], serde_json::json!([0.0, 0.0]));
    assert_eq!(v["method"], "kkt-active-set");
}

#[test]
fn compare_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p1_static(dir.path());
    let a = dir.path().join("a.csv");
    assert_eq!(sabap(&[&"run", &cfg, &"--out", &a]).status.code(), Some(0));

    let o = sabap(&[&"compare", &a, &a, &"--tol", &"0"]);
    assert_eq!(o.status.code(), Some(0));

    // Perturb one coordinate of the row at k = 300.
    let text = fs::read_to_string(&a).unwrap();
    let perturbed: Vec<String> = text
        .lines()
        .map(|l| {
            if l.starts_with("300,") {
                let mut cols: Vec<String> = l.split(',').map(String::from).collect();
                let x: f64 = cols[4].parse().unwrap();
                cols[4] = format!("{:?}", x + 1e-9);
                cols.join(",")
            } else {
                l.to_string()
            }
        })
        .collect();
    let b = write_text(dir.path(), "b.csv", &(perturbed.join("\n") + "\n"));
    let o = sabap(&[&"compare", &a, &b, &"--tol", &"1e-12"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("at k = 300"), "{}", stdout(&o));

    let c = dir.path().join("c.csv");
    let o = sabap(&[&"run", &cfg, &"--out", &c, &"--record-every", &"50"]);
    assert_eq!(o.status.code(), Some(0));
    let o = sabap(&[&"compare", &a, &c]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("k-grids differ"));
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p1_static(dir.path());
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    sabap(&[&"run", &cfg, &"--out", &a]);
    sabap(&[&"run", &cfg, &"--out", &b]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn shipped_configs_check_and_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    let mut seen = 0;
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        seen += 1;
        let o = sabap(&[&"check", &path]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}: {}",
            path.display(),
            stdout(&o)
        );
        let out = dir.path().join(path.file_stem().unwrap());
        let o = sabap(&[
            &"run",
            &path,
            &"--out",
            &out,
            &"--max-iter",
            &"200",
            &"--record-every",
            &"50",
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}: {}",
            path.display(),
            stderr(&o)
        );
    }
    assert_eq!(seen, 9);
}
