use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn hyperdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperdiff"))
        .args(args)
        .env_clear()
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const ISOTROPIC: &[&str] = &[
    "run",
    "--case",
    "A",
    "--nx",
    "10",
    "--ratio",
    "1",
    "--theta",
    "0",
    "--alpha-s",
    "1",
    "--dt",
    "0.01",
    "--tol",
    "1e-10",
];

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    hyperdiff(&all)
}

#[test]
fn isotropic_run_writes_every_file() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), ISOTROPIC);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["field.csv", "profile.csv", "speed.csv", "report.json"] {
        assert!(tmp.path().join(name).exists(), "{name} missing");
    }
    let field = fs::read_to_string(tmp.path().join("field.csv")).unwrap();
    let mut lines = field.lines();
    assert_eq!(lines.next(), Some("x,y,phi,u,v"));
    assert_eq!(lines.count(), 121);
    let profile = fs::read_to_string(tmp.path().join("profile.csv")).unwrap();
    assert_eq!(profile.lines().next(), Some("x,phi"));
    assert_eq!(profile.lines().count(), 12);

    let r = report(tmp.path());
    assert_eq!(r["case"], "A");
    assert_eq!(r["scheme"], "hyperbolic");
    assert_eq!(r["grid"]["nx"], 10);
    assert_eq!(r["converged"], true);
    assert_eq!(r["satisfied"], true);
    assert_eq!(r["alpha_s"], 1.0);
    assert!(r["isotropic_linear_error"].as_f64().unwrap() < 1e-6);
    for key in [
        "min_phi",
        "max_phi",
        "undershoot",
        "overshoot",
        "under_fraction",
        "over_fraction",
        "steps",
        "final_residual",
    ] {
        assert!(r.get(key).is_some(), "report lacks {key}");
    }
}

#[test]
fn outputs_are_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(code(&run_in(a.path(), ISOTROPIC)), 0);
    assert_eq!(code(&run_in(b.path(), ISOTROPIC)), 0);
    for name in ["field.csv", "profile.csv", "speed.csv", "report.json"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn non_convergence_exits_2() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        &["run", "--nx", "8", "--max-steps", "5", "--emit", "report"],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let r = report(tmp.path());
    assert_eq!(r["converged"], false);
    assert_eq!(r["steps"], 5);
    assert!(!tmp.path().join("field.csv").exists());
}

#[test]
fn anisotropic_case_a_violates_at_small_alpha() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "run",
            "--nx",
            "20",
            "--alpha-s",
            "0.5",
            "--dt",
            "1e-3",
            "--emit",
            "report",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(tmp.path());
    assert_eq!(r["satisfied"], false);
    assert!(r["min_phi"].as_f64().unwrap() < -1e-3);
    assert!(r.get("isotropic_linear_error").is_none());
}

#[test]
fn central_scheme_uses_its_stability_limit() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "run", "--nx", "10", "--scheme", "central", "--emit", "report",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(tmp.path());
    assert_eq!(r["scheme"], "central");
    assert!(r["alpha_s"].is_null());
    // kx = ky = 0.50005 at h = 0.1
    let limit = 1.0 / (4.0 * 0.50005 * 100.0);
    assert!((r["dt"].as_f64().unwrap() - limit).abs() < 1e-15);
    assert_eq!(r["satisfied"], false);
}

#[test]
fn invalid_input_exits_1() {
    let tmp = TempDir::new().unwrap();
    for args in [
        &["run", "--bogus"][..],
        &["run", "--case", "Q"],
        &["run", "--nx", "10", "--dt", "0.5"],
        &["run", "--nx", "1"],
        &["run", "--nx", "10", "--alpha-s", "-1"],
        &["run", "--emit", "pictures"],
        &["sweep", "--nx", "10"],
        &["stencil", "--ratio", "0.5"],
    ] {
        let out = run_in(tmp.path(), args);
        assert_eq!(code(&out), 1, "{args:?}: {}", stderr(&out));
        assert!(!stderr(&out).is_empty());
    }
    assert_eq!(code(&hyperdiff(&["--help"])), 0);
}

#[test]
fn config_file_layers_under_flags_and_env() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.cfg");
    let out_dir = tmp.path().join("out");
    fs::write(
        &cfg,
        format!(
            "# small Case B\ncase = B\nnx = 30\nalpha-s = 3\ndt = 1e-3\nemit = report\nout = {}\n",
            out_dir.display()
        ),
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hyperdiff"))
        .args(["run", "--config", cfg.to_str().unwrap(), "--nx", "10"])
        .env_clear()
        .env("HYPERDIFF_ALPHA_S", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&out_dir);
    assert_eq!(r["case"], "B");
    assert_eq!(r["grid"]["nx"], 10);
    assert_eq!(r["alpha_s"], 2.0);
    assert_eq!(r["dt"], 1e-3);

    fs::write(&cfg, "case = B\nalpha = 3\n").unwrap();
    let out = hyperdiff(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(
        stderr(&out).contains("unknown key 'alpha'"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn sweep_rows_are_sorted_with_errors_kept() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        &["sweep", "--nx", "12", "--dt", "1e-3", "--alphas", "4,0,0.5"],
    );
    // the α_s = 0 member cannot run
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let entries: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(entries, vec!["sweep.csv"]);
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "alpha_s,min_phi,max_phi,undershoot,overshoot,satisfied,steps,final_residual,converged,error");
    assert_eq!(lines.len(), 4);
    assert!(
        lines[1].starts_with("0,,") && lines[1].contains("alpha_s must be positive"),
        "{}",
        lines[1]
    );
    assert!(lines[2].starts_with("0.5,"));
    assert!(lines[3].starts_with("4,"));
    assert!(lines[2].split(',').nth(5) == Some("false"));
}

#[test]
fn sweep_emits_member_directories_on_request() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "sweep", "--nx", "8", "--dt", "1e-3", "--alphas", "2", "--emit", "profile",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(tmp.path().join("alpha_2/profile.csv").exists());
    assert!(!tmp.path().join("alpha_2/field.csv").exists());
}

#[test]
fn analyze_reproduces_the_threshold_table() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("table.csv");
    let out = hyperdiff(&["analyze", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# alpha_minus="));
    assert!(lines[0].contains("dt_bound=1.0000999"));
    let expected = [0.8768, 0.9376, 0.9749, 0.9874, 0.9936, 0.9974];
    for (line, want) in lines[2..].iter().zip(expected) {
        let got: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((got - want).abs() <= 0.002, "{line}");
    }
    let zero = hyperdiff(&["analyze", "--cs", "0"]);
    let text = String::from_utf8(zero.stdout).unwrap();
    assert!(text
        .lines()
        .nth(2)
        .unwrap()
        .starts_with("0,inf,1.0000000000"));
}

#[test]
fn stencil_verdicts() {
    let out = hyperdiff(&["stencil", "--alpha-s", "0"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("monotone = true"));
    assert!(text.contains("sum = 1.000000000000000"));

    let out = hyperdiff(&[
        "stencil",
        "--alpha-s",
        "1",
        "--c",
        "0.01",
        "--form",
        "display",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("cross magnitude = 1.24975"), "{text}");
    assert!(text.contains("monotone = false"));

    let out = hyperdiff(&["stencil", "--ratio", "1", "--alpha-s", "-2", "--dt", "0.5"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("singular"), "{}", stderr(&out));
}
