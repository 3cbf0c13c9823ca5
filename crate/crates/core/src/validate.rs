//! Property checks that pit the engine against the oracle on a given panel.
//!
//! Backs the `validate` command. Every check reports its statistic, the
//! acceptance interval and a pass flag so the table can be consumed by
//! scripts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{
    sample_time_change, scenario_rng, simulate_scenarios, JumpSpec, SimulationConfig,
    TimeChangeDistribution,
};
use crate::model::{calibrate, CalibrationConfig, DriftSpec, SigmaChoice};
use crate::oracle::{self, SyntheticSigma};
use crate::risk::{backtest, BacktestConfig, Portfolio, RiskError};
use crate::HistoricalPanel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub seed: u64,
    pub covariance_scenarios: usize,
    pub covariance_tolerance: f64,
    pub time_change_draws: usize,
    pub jump_scenarios: usize,
    pub backtest_scenarios: usize,
    pub backtest_history: usize,
    pub backtest_window: usize,
    pub confidence: f64,
    /// Multiplies the calibrated driver scale before simulating. `1.0` is the
    /// honest model; anything else is a deliberate fault.
    pub scale_fault: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            seed: 0,
            covariance_scenarios: 50_000,
            covariance_tolerance: 0.05,
            time_change_draws: 1_000_000,
            jump_scenarios: 5000,
            backtest_scenarios: 2000,
            backtest_history: crate::risk::DEFAULT_HISTORY,
            backtest_window: crate::risk::DEFAULT_WINDOW_DAYS,
            confidence: crate::risk::DEFAULT_CONFIDENCE,
            scale_fault: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub statistic: f64,
    pub lower: f64,
    pub upper: f64,
    pub status: CheckStatus,
    pub detail: String,
}

impl CheckResult {
    fn bounded(name: &str, statistic: f64, lower: f64, upper: f64, detail: String) -> Self {
        let ok = statistic >= lower && statistic <= upper;
        CheckResult {
            name: name.to_string(),
            statistic,
            lower,
            upper,
            status: if ok {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn write_csv<W: Write>(&self, mut w: W, echo: Option<&str>) -> Result<(), RiskError> {
        if let Some(echo) = echo {
            for line in echo.lines() {
                writeln!(w, "# {line}")?;
            }
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["check", "status", "statistic", "lower", "upper", "detail"])?;
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "fail",
                CheckStatus::Skipped => "skipped",
            };
            csv.write_record([
                c.name.as_str(),
                status,
                &c.statistic.to_string(),
                &c.lower.to_string(),
                &c.upper.to_string(),
                c.detail.as_str(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

fn oracle_sigma(cfg: &CalibrationConfig) -> SyntheticSigma {
    match cfg.model.sigma {
        SigmaChoice::Sqrt => SyntheticSigma::SqrtLevel {
            floor: cfg.model.eps_r,
        },
        SigmaChoice::Identity => SyntheticSigma::Identity,
    }
}

/// Runs the covariance-identity, time-change, jump-frequency and coverage
/// checks. The coverage check is skipped when the panel is too short.
pub fn run_validation(
    panel: &HistoricalPanel,
    portfolio: &Portfolio,
    calibration: &CalibrationConfig,
    cfg: &ValidationConfig,
) -> Result<ValidationReport, RiskError> {
    let mut checks = Vec::new();
    let cal = calibrate(panel, calibration)?;
    let layout = panel.layout();

    // Covariance identity: simulated one-step covariance against the
    // brute-force outer-product sum of sigma-transported filtered returns.
    {
        let anchor = cal.model.anchor().to_vec();
        let sigma = oracle_sigma(calibration);
        let m_today = oracle::sigma_multipliers(layout, sigma, &anchor);
        let transported: Vec<Vec<f64>> = cal
            .filter
            .partition
            .diffusive
            .iter()
            .map(|(t, r)| {
                let m_t = oracle::sigma_multipliers(layout, sigma, panel.state(t));
                r.iter()
                    .zip(&m_today)
                    .zip(&m_t)
                    .map(|((x, a), b)| x * a / b)
                    .collect()
            })
            .collect();
        let n_d = transported.len() as f64;
        let target: Vec<Vec<f64>> = oracle::outer_product_sum(&transported)
            .into_iter()
            .map(|row| row.into_iter().map(|v| v / n_d).collect())
            .collect();

        let model = cal
            .model
            .with_scale_factor(cfg.scale_fault)
            .with_drift(DriftSpec::off())?
            .with_jumps(JumpSpec::none())?
            .with_time_change(TimeChangeDistribution::trivial())?;
        let sim = SimulationConfig {
            n_scenarios: cfg.covariance_scenarios,
            seed: cfg.seed,
            ..SimulationConfig::default()
        };
        let set = simulate_scenarios(&model, &sim)?;
        let inc = set.increments(&anchor);
        let err = oracle::relative_frobenius_error(&oracle::sample_covariance(&inc), &target);
        checks.push(CheckResult::bounded(
            "covariance_identity",
            err,
            0.0,
            cfg.covariance_tolerance,
            format!(
                "relative Frobenius error, {} drivers, {} scenarios",
                transported.len(),
                cfg.covariance_scenarios
            ),
        ));
    }

    // Time-change mean.
    {
        let tc = &cal.model.time_change().clone();
        let mut rng = scenario_rng(cfg.seed ^ 0x7c, 0);
        let n = cfg.time_change_draws;
        let mean = (0..n)
            .map(|_| sample_time_change(tc, &mut rng))
            .sum::<f64>()
            / n as f64;
        let se = (tc.variance() / n as f64).sqrt();
        let half = 3.0 * se.max(f64::EPSILON);
        checks.push(CheckResult::bounded(
            "time_change_mean",
            mean,
            1.0 - half,
            1.0 + half,
            format!("{n} draws, standard error {se:.3e}"),
        ));
    }

    // Jump frequency of the configured rate.
    {
        let rate = calibration.jump_rate;
        let j = layout.n_factors();
        let jumps = if cal.model.jumps().sizes().is_empty() {
            JumpSpec::new(rate, vec![vec![0.0; j]], vec![0])?
        } else {
            JumpSpec::new(
                rate,
                cal.model.jumps().sizes().to_vec(),
                cal.model.jumps().sources().to_vec(),
            )?
        };
        let model = cal.model.with_jumps(jumps)?;
        let sim = SimulationConfig {
            n_scenarios: cfg.jump_scenarios,
            seed: cfg.seed ^ 0x51,
            ..SimulationConfig::default()
        };
        let count = simulate_scenarios(&model, &sim)?.total_jumps();
        let (lo, hi) = oracle::binomial_band(cfg.jump_scenarios as u64, rate, 0.99);
        checks.push(CheckResult::bounded(
            "jump_frequency",
            count as f64,
            lo as f64,
            hi as f64,
            format!(
                "rate {rate}, {} scenarios, exact binomial 99% band",
                cfg.jump_scenarios
            ),
        ));
    }

    // Coverage backtest.
    {
        let needed = cfg.backtest_history + cfg.backtest_window;
        if panel.len() < needed {
            checks.push(CheckResult {
                name: "coverage_backtest".into(),
                statistic: f64::NAN,
                lower: f64::NAN,
                upper: f64::NAN,
                status: CheckStatus::Skipped,
                detail: format!("panel has {} observations, needs {needed}", panel.len()),
            });
        } else {
            let bt = BacktestConfig {
                history: cfg.backtest_history,
                confidence: cfg.confidence,
                calibration: calibration.clone(),
                simulation: SimulationConfig {
                    n_scenarios: cfg.backtest_scenarios,
                    seed: cfg.seed ^ 0xb7,
                    ..SimulationConfig::default()
                },
            };
            let report = backtest(panel, portfolio, cfg.backtest_window, &bt)?;
            let (lo, hi) =
                oracle::binomial_band(cfg.backtest_window as u64, 1.0 - cfg.confidence, 0.99);
            let es_ok = report.days.iter().all(|d| d.es >= d.var);
            let mut check = CheckResult::bounded(
                "coverage_backtest",
                report.violations() as f64,
                lo as f64,
                hi as f64,
                format!(
                    "{} days at {}; ES >= VaR on every day: {es_ok}",
                    cfg.backtest_window, cfg.confidence
                ),
            );
            if !es_ok {
                check.status = CheckStatus::Fail;
            }
            checks.push(check);
        }
    }

    Ok(ValidationReport { checks })
}
