mod common;

use std::path::Path;
use std::process::Command;

const PUBLISHED: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/published_intermediates.csv");
const ARMS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic_arms.csv");
const EXAMPLE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/example.toml");

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["netbenefit"];
    full.extend_from_slice(args);
    let code = netbenefit::cli::run(full, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn field(csv: &str, row: &str, col: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == col).unwrap();
    let line = lines.find(|l| l.split(',').next() == Some(row)).unwrap();
    line.split(',').nth(i).unwrap().to_string()
}

#[test]
fn validate_reports_single_component() {
    let r = run(&["validate", "--arms", ARMS]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("1 connected component"));
    assert!(r.stdout.contains("study S3: placebo 121/260, df 86/255, ga 98/262"));
}

#[test]
fn validate_lists_disconnected_components() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "a.csv", "#control=placebo\nstudy,treatment,events,total\nS1,placebo,3,10\nS1,a,2,10\nS2,b,4,10\nS2,c,5,10\n");
    let r = run(&["validate", "--arms", &p]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("{a, placebo} {b, c}"), "{}", r.stderr);
}

#[test]
fn validate_names_row_with_events_above_total() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "a.csv", "#control=placebo\nstudy,treatment,events,total\nS1,placebo,3,10\nS1,a,12,10\n");
    let r = run(&["validate", "--arms", &p]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("line 4"), "{}", r.stderr);
}

#[test]
fn missing_file_is_io_error() {
    let r = run(&["validate", "--arms", "/nonexistent/arms.csv"]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.starts_with("error[io]"));
}

#[test]
fn nb_reproduces_published_table() {
    let r = run(&["nb", "--intermediates", PUBLISHED, "-t", "ga=0.10,df=0.10,n=0.20"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for (row, want) in [("treat_none", 0.0), ("treat_all_ga", 0.07), ("treat_all_df", 0.12), ("treat_all_n", 0.05), ("model", 0.17)] {
        let got: f64 = field(&r.stdout, row, "nb").parse().unwrap();
        assert!((got - want).abs() <= 0.005, "{row}: {got}");
    }
    assert_eq!(field(&r.stdout, "model", "congruent_n"), "652");
}

#[test]
fn nb_single_strategy() {
    let r = run(&["nb", "--arms", ARMS, "--control", "placebo", "-t", "ga=0.1,df=0.1,n=0.2", "-s", "treat_none"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout.lines().count(), 2);
    assert_eq!(field(&r.stdout, "treat_none", "nb"), "0");
}

#[test]
fn nb_marks_single_arm_congruent_data_not_estimable() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("patients.csv");
    std::fs::write(&p, common::single_arm_congruent_fixture().to_csv_string()).unwrap();
    let r = run(&["nb", "--patients", p.to_str().unwrap(), "-t", "a=0.1,b=0.1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(field(&r.stdout, "model", "nb"), "NOT_ESTIMABLE");
    assert!(r.stderr.contains("warning: model"));
}

#[test]
fn nb_requires_every_threshold() {
    let r = run(&["nb", "--intermediates", PUBLISHED, "-t", "ga=0.10,df=0.10"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("no threshold for n"));
}

#[test]
fn recommend_single_profile() {
    let r = run(&["recommend", "--control", "placebo", "--risks", "placebo=0.75,ga=0.60,df=0.52,n=0.44", "-t", "ga=0.19,df=0.19,n=0.28"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.ends_with("recommended,df,,,\n"));
    assert_eq!(field(&r.stdout, "ga", "margin"), "-0.04");
}

fn simulated(dir: &Path, per_arm: &str) -> String {
    let out = dir.join("sim");
    let r = run(&["--seed", "3", "--out", out.to_str().unwrap(), "simulate", "--patients-per-arm", per_arm]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for f in ["patients.csv", "arms.csv", "counterfactuals.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    out.join("patients.csv").to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_counterfactuals() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path(), "20");
    let cf = std::fs::read_to_string(dir.path().join("sim/counterfactuals.csv")).unwrap();
    assert!(cf.starts_with("patient_id,true_risk_placebo,true_risk_n,true_risk_df,true_risk_ga\n"));
    assert_eq!(cf.lines().count(), 1 + 7 * 20);
}

#[test]
fn one_cell_heatmap_matches_nb() {
    let dir = tempfile::tempdir().unwrap();
    let p = simulated(dir.path(), "200");
    let nb = run(&["nb", "--patients", &p, "-t", "ga=0.1,df=0.1,n=0.2"]);
    let hm = run(&["heatmap", "--patients", &p, "--axis", "n=0.2", "--shared", "df,ga=0.1"]);
    assert_eq!(nb.code, 0, "{}", nb.stderr);
    assert_eq!(hm.code, 0, "{}", hm.stderr);
    let rows: Vec<&str> = hm.stdout.lines().collect();
    assert_eq!(rows.len(), 2);
    let header: Vec<&str> = rows[0].split(',').collect();
    let cells: Vec<&str> = rows[1].split(',').collect();
    for (h, v) in header.iter().zip(&cells).skip(4) {
        assert_eq!(*v, field(&nb.stdout, h, "nb"), "{h}");
    }
}

#[test]
fn full_grid_has_22_by_22_cells() {
    let dir = tempfile::tempdir().unwrap();
    let p = simulated(dir.path(), "200");
    let out = dir.path().join("hm");
    let r = run(&["--svg", "--out", out.to_str().unwrap(), "heatmap", "--patients", &p, "--axis", "n=0.19:0.40", "--shared", "df,ga=0.04:0.25"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = std::fs::read_to_string(out.join("heatmap.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 22 * 22);
    assert!(csv.starts_with("t_n,t_shared,best,margin,treat_none,treat_all_n,treat_all_df,treat_all_ga,model\n"));
    assert!(std::fs::read_to_string(out.join("heatmap.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn curve_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let r = run(&["--config", EXAMPLE, "--svg", "--out", out.to_str().unwrap(), "curve"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = std::fs::read_to_string(out.join("curve.csv")).unwrap();
    // 22 points, four strategies without patient data.
    assert_eq!(csv.lines().count(), 1 + 22 * 4);
    assert!(out.join("curve.svg").exists());
}

#[test]
fn config_flags_override_file() {
    let r = run(&["--config", EXAMPLE, "nb", "-t", "ga=0.2,df=0.2,n=0.2", "-s", "treat_all_ga"]);
    let cfg = run(&["--config", EXAMPLE, "nb", "-s", "treat_all_ga"]);
    let a: f64 = field(&r.stdout, "treat_all_ga", "nb").parse().unwrap();
    let b: f64 = field(&cfg.stdout, "treat_all_ga", "nb").parse().unwrap();
    assert!((b - a - 0.1).abs() < 1e-5);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "c.toml", "contrl = \"placebo\"\n");
    let r = run(&["--config", &p, "validate", "--arms", ARMS]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("error[config]"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_netbenefit");
    let ok = Command::new(bin).args(["validate", "--arms", ARMS]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let io = Command::new(bin).args(["validate", "--arms", "/nonexistent.csv"]).output().unwrap();
    assert_eq!(io.status.code(), Some(3));
}
