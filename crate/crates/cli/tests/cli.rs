use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scengen_core::oracle::{
    generate_synthetic_panel, SyntheticKind, SyntheticSigma, SyntheticSpec,
};
use scengen_core::FactorLayout;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    /// Well-specified synthetic setup: identity sigma, no time change.
    fn new(n_obs: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let layout =
            FactorLayout::new(vec!["EUR".into(), "USD".into()], vec![0.5, 1.0, 2.0]).unwrap();
        fs::write(dir.path().join("layout.toml"), layout.to_config_string()).unwrap();
        let panel = generate_synthetic_panel(&SyntheticSpec {
            layout,
            kind: SyntheticKind::ConstantDirection {
                directions: vec![
                    vec![0.008, 0.007, 0.006, 0.0, 0.0, 0.0, 0.02],
                    vec![0.0, 0.0, 0.0, 0.007, 0.006, 0.006, 0.0],
                    vec![0.001, 0.0, -0.001, 0.0, 0.001, 0.0, 0.09],
                ],
                sigma: SyntheticSigma::Identity,
            },
            n_obs,
            delta: 1.0 / 250.0,
            seed: 99,
            initial: vec![0.03, 0.031, 0.033, 0.04, 0.041, 0.042, 0.1],
            substeps: 1,
        })
        .unwrap();
        let mut csv = Vec::new();
        panel.write_csv(&mut csv).unwrap();
        fs::write(dir.path().join("panel.csv"), csv).unwrap();
        let ws = Workspace { dir };
        ws.config("", "");
        ws
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    /// Writes `config.toml`; `risk` lines go into the `[risk]` table and
    /// `extra` is appended at the end.
    fn config(&self, risk: &str, extra: &str) {
        let text = format!(
            r#"
[paths]
panel = "panel.csv"
layout = "layout.toml"
out = "out"

[model]
sigma = "identity"

[engine]
time_change = [[1.0, 1.0]]
n_scenarios = 2000
seed = 3

[risk]
{risk}

[[risk.portfolio]]
kind = "zero_coupon_bond"
currency = "EUR"
maturity = 2.0
notional = 100.0

[[risk.portfolio]]
kind = "fx_spot"
currency = "USD"
notional = 20.0

[report]
factors = ["EUR_f_1", "USD_logfx"]
bins = 20
{extra}
"#
        );
        fs::write(self.path("config.toml"), text).unwrap();
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_scengen"))
            .arg("--config")
            .arg(self.path("config.toml"))
            .args(args)
            .output()
            .unwrap()
    }
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .count()
        - 1
}

#[test]
fn calibrate_writes_model_and_summary() {
    let ws = Workspace::new(300);
    let out = ws.run(&["calibrate"]);
    ok(&out);
    assert!(ws.path("out/model.json").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("drivers: "));
    assert!(stdout.contains("extreme events: "));
    assert!(stdout.contains("USD_logfx"));
    let model = fs::read_to_string(ws.path("out/model.json")).unwrap();
    assert!(model.contains("\"format_version\": 1"));
    assert!(model.contains("\"config\""));
}

#[test]
fn missing_panel_is_an_input_error() {
    let ws = Workspace::new(50);
    fs::remove_file(ws.path("panel.csv")).unwrap();
    let out = ws.run(&["calibrate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("panel.csv"), "{}", stderr(&out));
}

#[test]
fn bad_config_is_an_input_error() {
    let ws = Workspace::new(50);
    ws.config("", "[bogus]\nx = 1\n");
    assert_eq!(ws.run(&["calibrate"]).status.code(), Some(2));
}

#[test]
fn everything_extreme_is_a_filter_error() {
    let ws = Workspace::new(100);
    let out = ws.run(&["calibrate", "--eta", "1e-9", "--violations", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("extreme"), "{}", stderr(&out));
}

#[test]
fn simulate_is_deterministic_and_sized() {
    let ws = Workspace::new(300);
    ok(&ws.run(&["calibrate"]));
    ok(&ws.run(&["simulate", "--scenarios", "5000", "--threads", "1"]));
    let scen = ws.path("out/scenarios.csv");
    let first = fs::read(&scen).unwrap();
    assert_eq!(data_rows(&scen), 5000);
    ok(&ws.run(&["simulate", "--scenarios", "5000", "--threads", "4"]));
    assert_eq!(fs::read(&scen).unwrap(), first);
    ok(&ws.run(&["simulate", "--scenarios", "5000"]));
    assert_eq!(fs::read(&scen).unwrap(), first);
    ok(&ws.run(&["simulate", "--scenarios", "5000", "--seed", "4"]));
    assert_ne!(fs::read(&scen).unwrap(), first);
}

#[test]
fn corrupted_model_file() {
    let ws = Workspace::new(100);
    ok(&ws.run(&["calibrate"]));
    let path = ws.path("out/model.json");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() / 2]).unwrap();
    let out = ws.run(&["simulate"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("format version"), "{}", stderr(&out));

    fs::write(
        &path,
        text.replace("\"format_version\": 1", "\"format_version\": 7"),
    )
    .unwrap();
    let out = ws.run(&["simulate"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(
        stderr(&out).contains("format version 7"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn outputs_echo_the_config() {
    let ws = Workspace::new(300);
    ok(&ws.run(&["calibrate"]));
    ok(&ws.run(&["simulate", "--seed", "11"]));
    let text = fs::read_to_string(ws.path("out/scenarios.csv")).unwrap();
    assert!(text.starts_with("# "));
    assert!(text.contains("# seed = 11"));
    assert!(text.contains("# eta = 4.0"));
}

#[test]
fn backtest_writes_one_row_per_day() {
    let ws = Workspace::new(400);
    ws.config("history = 300\nwindow_days = 60", "");
    let out = ws.run(&["backtest", "--scenarios", "500"]);
    ok(&out);
    assert_eq!(data_rows(&ws.path("out/backtest.csv")), 60);
    assert!(String::from_utf8_lossy(&out.stdout).contains("VaR violations: "));
}

#[test]
fn backtest_needs_enough_history() {
    let ws = Workspace::new(100);
    let out = ws.run(&["backtest"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("observations"), "{}", stderr(&out));
}

#[test]
fn validate_passes_then_catches_a_scale_fault() {
    let ws = Workspace::new(800);
    let out = ws.run(&["validate"]);
    ok(&out);
    let table = fs::read_to_string(ws.path("out/validation.csv")).unwrap();
    for check in [
        "covariance_identity",
        "time_change_mean",
        "jump_frequency",
        "coverage_backtest",
    ] {
        assert!(table.contains(&format!("{check},pass")), "{table}");
    }
    let out = ws.run(&["validate", "--scale-fault", "1.5"]);
    assert_eq!(out.status.code(), Some(5));
    let table = fs::read_to_string(ws.path("out/validation.csv")).unwrap();
    assert!(table.contains("covariance_identity,fail"), "{table}");
}

#[test]
fn report_emits_one_file_per_factor() {
    let ws = Workspace::new(300);
    ok(&ws.run(&["report"]));
    let mut files: Vec<String> = fs::read_dir(ws.path("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("histogram_"))
        .collect();
    files.sort();
    assert_eq!(
        files,
        vec!["histogram_EUR_f_1.csv", "histogram_USD_logfx.csv"]
    );
    let text = fs::read_to_string(ws.path("out/histogram_USD_logfx.csv")).unwrap();
    assert!(text.contains("bin_lo,bin_hi,historical,simulated"));
    assert_eq!(data_rows(&ws.path("out/histogram_USD_logfx.csv")), 20);
}

#[test]
fn unknown_report_factor_is_an_input_error() {
    let ws = Workspace::new(100);
    let cfg = fs::read_to_string(ws.path("config.toml"))
        .unwrap()
        .replace("\"USD_logfx\"", "\"XXX_logfx\"");
    fs::write(ws.path("config.toml"), cfg).unwrap();
    assert_eq!(ws.run(&["report"]).status.code(), Some(2));
}
