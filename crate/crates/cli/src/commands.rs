use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use scengen_core::data::FactorKind;
use scengen_core::engine::install;
use scengen_core::model::{model_from_json, model_to_json};
use scengen_core::risk::{common_edges, histogram_with_edges, write_histograms};
use scengen_core::{
    backtest, calibrate, load_panel_file, run_validation, simulate_scenarios, BacktestConfig,
    CalibratedModel, Calibration, CheckStatus, FactorLayout, HistoricalPanel, Instrument, JumpSpec,
    Portfolio,
};

use crate::config::RunConfig;
use crate::error::CliError;

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| {
        CliError::Input(format!(
            "no {key} path given (set paths.{key} in the config)"
        ))
    })
}

fn load_inputs(cfg: &RunConfig) -> Result<HistoricalPanel, CliError> {
    let layout_path = required(&cfg.paths.layout, "layout")?;
    let panel_path = required(&cfg.paths.panel, "panel")?;
    if !layout_path.exists() {
        return Err(CliError::Input(format!(
            "layout file not found: {}",
            layout_path.display()
        )));
    }
    if !panel_path.exists() {
        return Err(CliError::Input(format!(
            "panel file not found: {}",
            panel_path.display()
        )));
    }
    let layout = FactorLayout::from_config_file(layout_path)
        .map_err(|e| CliError::Input(format!("{}: {e}", layout_path.display())))?;
    load_panel_file(panel_path, &layout, cfg.delta)
        .map_err(|e| CliError::Input(format!("{}: {e}", panel_path.display())))
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    fs::create_dir_all(&cfg.paths.out).map_err(|e| CliError::io(&cfg.paths.out, e))?;
    Ok(&cfg.paths.out)
}

fn config_value(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn print_summary(cal: &Calibration) {
    let model = &cal.model;
    println!("drivers: {}", model.n_drivers());
    println!("extreme events: {}", cal.filter.extremes.len());
    println!("jump rate: {}", model.jumps().rate());
    println!("today vol (daily, per factor):");
    for (name, var) in model
        .layout()
        .factor_names()
        .iter()
        .zip(&cal.filter.today_var)
    {
        println!("  {name}: {:.6e}", var.sqrt());
    }
}

pub fn cmd_calibrate(cfg: &RunConfig) -> Result<(), CliError> {
    let panel = load_inputs(cfg)?;
    let cal = calibrate(&panel, &cfg.calibration())?;
    let path = cfg.model_path();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(&path, model_to_json(&cal.model, &config_value(cfg)))
        .map_err(|e| CliError::io(&path, e))?;
    print_summary(&cal);
    println!("model written to {}", path.display());
    Ok(())
}

fn read_model(cfg: &RunConfig) -> Result<CalibratedModel, CliError> {
    let path = cfg.model_path();
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Input(format!("cannot read model file {}: {e}", path.display())))?;
    let (model, _) = model_from_json(&text)
        .map_err(|e| CliError::ModelFile(format!("{}: {e}", path.display())))?;
    Ok(model)
}

/// Applies the run's jump rate and time change to a stored model.
fn with_engine_settings(
    model: CalibratedModel,
    cfg: &RunConfig,
) -> Result<CalibratedModel, CliError> {
    let j = model.jumps();
    let rate = if j.sizes().is_empty() {
        0.0
    } else {
        cfg.engine.jump_rate
    };
    let jumps = JumpSpec::new(rate, j.sizes().to_vec(), j.sources().to_vec())?;
    Ok(model
        .with_jumps(jumps)?
        .with_time_change(cfg.engine.time_change.clone())?)
}

pub fn cmd_simulate(cfg: &RunConfig, threads: Option<usize>) -> Result<(), CliError> {
    let model = with_engine_settings(read_model(cfg)?, cfg)?;
    let set = simulate_scenarios(&model, &cfg.simulation(threads))?;
    let path = out_dir(cfg)?.join("scenarios.csv");
    let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    set.write_csv(BufWriter::new(file), Some(&cfg.echo()))?;
    let tau_mean = set.audit.iter().map(|a| a.tau_days).sum::<f64>() / set.len() as f64;
    println!("scenarios: {}", set.len());
    println!("jumps: {}", set.total_jumps());
    println!("mean trading-time length (days): {tau_mean:.4}");
    println!("scenarios written to {}", path.display());
    Ok(())
}

fn portfolio(cfg: &RunConfig, layout: &FactorLayout) -> Result<Portfolio, CliError> {
    let instruments = if cfg.risk.portfolio.is_empty() {
        default_instruments(layout)
    } else {
        cfg.risk.portfolio.clone()
    };
    let p = Portfolio::new(instruments, cfg.risk.roll_over)?;
    p.validate(layout)?;
    Ok(p)
}

/// One bond per currency at the middle of the tenor grid plus every FX spot.
fn default_instruments(layout: &FactorLayout) -> Vec<Instrument> {
    let tenors = layout.tenors();
    let maturity = 0.5 * (tenors[0] + tenors[tenors.len() - 1]);
    let mut out: Vec<Instrument> = layout
        .currencies()
        .iter()
        .map(|c| Instrument::ZeroCouponBond {
            currency: c.clone(),
            maturity,
            notional: 100.0,
        })
        .collect();
    out.extend(
        layout
            .currencies()
            .iter()
            .skip(1)
            .map(|c| Instrument::FxSpot {
                currency: c.clone(),
                notional: 100.0,
            }),
    );
    out
}

pub fn cmd_backtest(cfg: &RunConfig, threads: Option<usize>) -> Result<(), CliError> {
    let panel = load_inputs(cfg)?;
    let portfolio = portfolio(cfg, panel.layout())?;
    let bt = BacktestConfig {
        history: cfg.risk.history,
        confidence: cfg.risk.confidence,
        calibration: cfg.calibration(),
        simulation: cfg.simulation(threads),
    };
    let report = backtest(&panel, &portfolio, cfg.risk.window_days, &bt)?;
    let path = out_dir(cfg)?.join("backtest.csv");
    let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    report.write_csv(BufWriter::new(file), Some(&cfg.echo()))?;
    println!("days: {}", report.days.len());
    println!("VaR violations: {}", report.violations());
    println!("ES breaches: {}", report.es_breaches());
    println!("backtest written to {}", path.display());
    Ok(())
}

pub fn cmd_validate(
    cfg: &RunConfig,
    scale_fault: Option<f64>,
    threads: Option<usize>,
) -> Result<(), CliError> {
    let panel = load_inputs(cfg)?;
    let portfolio = portfolio(cfg, panel.layout())?;
    let mut vcfg = cfg.validate.clone();
    if let Some(f) = scale_fault {
        vcfg.scale_fault = f;
    }
    let report = install(threads, || {
        run_validation(&panel, &portfolio, &cfg.calibration(), &vcfg)
    })??;
    let path = out_dir(cfg)?.join("validation.csv");
    let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    report.write_csv(BufWriter::new(file), Some(&cfg.echo()))?;
    for c in &report.checks {
        let status = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
        };
        println!(
            "{status} {}: {} in [{}, {}] ({})",
            c.name, c.statistic, c.lower, c.upper, c.detail
        );
    }
    println!("validation written to {}", path.display());
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::ValidationFailed(format!(
            "validation failed: {}",
            failed.join(", ")
        )))
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Histograms of the filtered historical returns against one-day simulated
/// increments, one file per requested factor.
pub fn cmd_report(cfg: &RunConfig, threads: Option<usize>) -> Result<(), CliError> {
    let panel = load_inputs(cfg)?;
    let layout = panel.layout();
    let factors: Vec<usize> = if cfg.report.factors.is_empty() {
        (0..layout.n_factors()).collect()
    } else {
        cfg.report
            .factors
            .iter()
            .map(|name| {
                layout.column_index(name).ok_or_else(|| {
                    CliError::Input(format!("unknown factor `{name}` in report.factors"))
                })
            })
            .collect::<Result<_, _>>()?
    };
    if cfg.report.bins == 0 {
        return Err(CliError::Input("report.bins must be >= 1".into()));
    }
    let cal = calibrate(&panel, &cfg.calibration())?;
    let set = simulate_scenarios(&cal.model, &cfg.simulation(threads))?;
    let simulated = set.increments(cal.model.anchor());
    let historical = &cal.filter.filtered.rows;
    let dir = out_dir(cfg)?;
    let echo = cfg.echo();
    for &f in &factors {
        let name = layout.factor_name(f);
        let hist: Vec<f64> = historical.iter().map(|r| r[f]).collect();
        let sim: Vec<f64> = simulated.iter().map(|r| r[f]).collect();
        let edges = common_edges(&[&hist, &sim], cfg.report.bins)?;
        let h = histogram_with_edges(&hist, &edges);
        let s = histogram_with_edges(&sim, &edges);
        let path = dir.join(format!("histogram_{}.csv", file_stem(&name)));
        write_histograms(
            &path,
            &edges,
            &[("historical", &h.counts), ("simulated", &s.counts)],
            Some(&echo),
        )?;
        let kind = match layout.kind(f) {
            FactorKind::ForwardRate { .. } => "rate",
            FactorKind::LogFx { .. } => "log-fx",
        };
        println!("{name} ({kind}): {}", path.display());
    }
    Ok(())
}
