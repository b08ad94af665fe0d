use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn catoni(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catoni")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn value(o: &Output, key: &str) -> String {
    let prefix = format!("{key}: ");
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
        .unwrap_or_else(|| panic!("no '{key}' in\n{}", stdout(o)))
}

fn num(o: &Output, key: &str) -> f64 {
    value(o, key).parse().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_symmetric_pair_is_zero() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "x.csv", "x\n-2\n2\n");
    let o = catoni(&["estimate", "--input", s(&f), "--column", "x", "--alpha", "1", "--phi", "wide", "--sigma", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(num(&o, "theta_hat").abs() <= 1e-10);
    assert!(num(&o, "ci_lo") < 0.0 && num(&o, "ci_hi") > 0.0);
    assert_eq!(value(&o, "variant"), "known-scale");
}

#[test]
fn estimate_report_is_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "x.csv", "id,x\n1,-1\n2,0\n3,1\n4,10\n");
    let args = ["estimate", "--input", s(&f), "--column", "x", "--self-normalized", "--phi", "narrow", "--level", "0.9"];
    let a = catoni(&args);
    let b = catoni(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(value(&a, "variant"), "self-normalized");
    // 17 significant digits.
    assert_eq!(value(&a, "level"), "9.0000000000000002e-1");
}

#[test]
fn estimate_frozen_root() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "x.csv", "x\n-1\n0\n1\n10\n");
    let o = catoni(&["estimate", "--input", s(&f), "--column", "x", "--alpha", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((num(&o, "theta_hat") - 2.4124001561442124).abs() < 1e-10);
    assert!(value(&o, "ci").starts_with("unavailable"));
}

#[test]
fn estimate_constant_column_self_normalized_is_degenerate() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "x.csv", "x\n3\n3\n3\n");
    let o = catoni(&["estimate", "--input", s(&f), "--column", "x", "--self-normalized"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("sigma_hat = 0"), "{}", stderr(&o));
}

#[test]
fn estimate_flag_and_input_errors() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "x.csv", "x\n1\n2\n");
    let code = |args: &[&str]| catoni(args).status.code();
    assert_eq!(code(&["estimate", "--input", s(&f), "--column", "x", "--alpha", "1", "--self-normalized"]), Some(4));
    assert_eq!(code(&["estimate", "--input", s(&f), "--column", "x"]), Some(4));
    assert_eq!(code(&["estimate", "--input", s(&f), "--column", "x", "--alpha", "-1"]), Some(4));
    assert_eq!(code(&["estimate", "--input", s(&f), "--column", "x", "--alpha", "1", "--phi", "cubic"]), Some(4));
    assert_eq!(code(&["estimate", "--input", s(&f), "--column", "x", "--bogus"]), Some(4));
    assert_eq!(code(&["estimate", "--input", s(&f), "--column", "y", "--alpha", "1"]), Some(2));
    let bad = write(d.path(), "bad.csv", "x\n1\nabc\n");
    assert_eq!(code(&["estimate", "--input", s(&bad), "--column", "x", "--alpha", "1"]), Some(2));
    assert_eq!(code(&["estimate", "--input", "/nonexistent/x.csv", "--column", "x", "--alpha", "1"]), Some(2));
    let id = write(d.path(), "id.csv", "x,phi\n-10,-10\n10,10\n");
    let custom = format!("custom:{}", s(&id));
    assert_eq!(code(&["estimate", "--input", s(&f), "--column", "x", "--alpha", "1", "--phi", &custom]), Some(6));
}

fn linear_fixture(dir: &Path, noise: bool) -> PathBuf {
    let mut body = String::from("y,a,b,c\n");
    for i in 0..40 {
        let a = (i as f64 * 0.37).sin();
        let b = (i as f64 * 1.3).cos();
        let c = 1.0;
        let e = if noise { 0.3 * ((i * 7 % 11) as f64 - 5.0) / 5.0 } else { 0.0 };
        body.push_str(&format!("{},{a},{b},{c}\n", 2.0 * a - b + 0.5 * c + e));
    }
    write(dir, if noise { "noisy.csv" } else { "exact.csv" }, &body)
}

#[test]
fn regress_recovers_noiseless_coefficients() {
    let d = tempfile::tempdir().unwrap();
    let f = linear_fixture(d.path(), false);
    let o = catoni(&["regress", "--input", s(&f), "--response", "y", "--alpha", "0.5", "--phi", "wide", "--tol", "1e-10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for (k, want) in [("a", 2.0), ("b", -1.0), ("c", 0.5)] {
        assert!((num(&o, &format!("beta_hat[{k}]")) - want).abs() <= 1e-8);
    }
    assert!(num(&o, "h_norm") <= 1e-10);
    assert_eq!(value(&o, "alpha_source"), "explicit");
}

#[test]
fn regress_auto_alpha_reports_sigma_source() {
    let d = tempfile::tempdir().unwrap();
    let f = linear_fixture(d.path(), true);
    let o = catoni(&["regress", "--input", s(&f), "--response", "y", "--features", "a,b,c", "--epsilon", "0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(value(&o, "sigma_bar_sq_source"), "residual-estimated");
    assert!(value(&o, "alpha_source").starts_with("auto"));
    for k in ["delta_sq", "lambda_min", "lambda_max", "l_n", "beta_0", "feasible"] {
        value(&o, k);
    }
    assert_eq!(catoni(&["regress", "--input", s(&f), "--response", "y", "--alpha", "1", "--epsilon", "0.1"]).status.code(), Some(4));
}

#[test]
fn regress_rank_deficient_design() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "rd.csv", "y,a,b\n1,1,2\n2,2,4\n3,3,6\n5,4,8\n");
    let o = catoni(&["regress", "--input", s(&f), "--response", "y", "--alpha", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(num(&o, "lambda_min").abs() < 1e-10);
    assert!(stderr(&o).contains("lambda_min"));
}

const SMOKE: &str = "kind = \"be_mean\"\nmodel = \"gamma:k=2,theta=1,centered\"\nn_list = [20, 40]\nreps = 100\nseed = 3\n";

#[test]
fn simulate_writes_identical_files() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.toml", SMOKE);
    let (o1, o2) = (d.path().join("a"), d.path().join("b"));
    let r1 = catoni(&["simulate", "--config", s(&c), "--out", s(&o1), "--threads", "1"]);
    let r2 = catoni(&["simulate", "--config", s(&c), "--out", s(&o2), "--threads", "2"]);
    assert_eq!(r1.status.code(), Some(0), "{}", stderr(&r1));
    assert_eq!(r2.status.code(), Some(0));
    for f in ["report.csv", "provenance.jsonl"] {
        let a = std::fs::read(o1.join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, std::fs::read(o2.join(f)).unwrap());
    }
    assert_eq!(value(&r1, "rows"), "2");
}

#[test]
fn simulate_flags_out_of_range_z() {
    let d = tempfile::tempdir().unwrap();
    let c = write(
        d.path(),
        "md.toml",
        "kind = \"md_mean\"\nmodel = \"gauss:sigma=1\"\nn_list = [64]\nreps = 1000\nseed = 1\nz_grid = [0.5, 2.5]\n",
    );
    let out = d.path().join("o");
    let r = catoni(&["simulate", "--config", s(&c), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.contains(",out-of-range,"), "{csv}");
    assert_eq!(value(&r, "flagged_rows"), "1");
}

#[test]
fn simulate_schema_and_abort_codes() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "bad.toml", &format!("{SMOKE}colour = 3\n"));
    let r = catoni(&["simulate", "--config", s(&c), "--out", s(&d.path().join("x"))]);
    assert_eq!(r.status.code(), Some(2));
    assert!(stderr(&r).contains("colour"), "{}", stderr(&r));
    let c = write(
        d.path(),
        "inf.toml",
        "kind = \"regression_bound\"\nmodel = \"gauss:sigma=1\"\nn_list = [20]\nreps = 100\nseed = 1\n\
         epsilon = 0.001\ndesign_rows = \"sphere\"\ndesign_p = 3\n",
    );
    let r = catoni(&["simulate", "--config", s(&c), "--out", s(&d.path().join("y"))]);
    assert_eq!(r.status.code(), Some(5), "{}", stderr(&r));
}

#[test]
fn validate_phi_builtins_and_identity() {
    for name in ["wide", "narrow"] {
        let o = catoni(&["validate-phi", "--phi", name]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(value(&o, "passed"), "true");
    }
    let d = tempfile::tempdir().unwrap();
    let id = write(d.path(), "id.csv", "x,phi\n-50,-50\n50,50\n");
    let o = catoni(&["validate-phi", "--phi", &format!("custom:{}", s(&id))]);
    assert_eq!(o.status.code(), Some(6));
    assert!((num(&o, "first_violation_x") - 1e-3).abs() < 1e-12);
    let o = catoni(&["validate-phi", "--phi", "custom:/nonexistent/table.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = catoni(&["validate-phi", "--phi", "wide", "--lo", "-2", "--hi", "2", "--step", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn help_lists_every_flag() {
    for (cmd, flags) in [
        ("estimate", &["--input", "--column", "--alpha", "--a-n", "--self-normalized", "--sigma", "--phi", "--level", "--bias-corrected", "--tol"][..]),
        ("regress", &["--input", "--response", "--features", "--alpha", "--epsilon", "--phi", "--tol"][..]),
        ("simulate", &["--config", "--out", "--threads"][..]),
        ("validate-phi", &["--phi", "--lo", "--hi", "--step"][..]),
    ] {
        let o = catoni(&[cmd, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        for f in flags {
            assert!(text.contains(f), "{cmd} --help lacks {f}");
        }
    }
}
