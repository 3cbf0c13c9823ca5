//! Linear IR/FX portfolio valuation, VaR / expected shortfall, rolling backtests.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve;
use crate::data::{slice_state, DataError, FactorLayout, HistoricalPanel};
use crate::engine::{simulate_scenarios, EngineError, ScenarioSet, SimulationConfig};
use crate::model::{calibrate, CalibrationConfig, ModelError};

pub const DEFAULT_CONFIDENCE: f64 = 0.99;
pub const DEFAULT_WINDOW_DAYS: usize = 250;
pub const DEFAULT_HISTORY: usize = 500;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("time to maturity {x} outside [0, {max}]")]
    MaturityOutOfRange { x: f64, max: f64 },
    #[error("currency `{0}` is not part of the layout")]
    UnknownCurrency(String),
    #[error("FX position in the domestic currency `{0}`")]
    DomesticFxPosition(String),
    #[error("non-finite notional")]
    InvalidNotional,
    #[error("portfolio has no instruments")]
    EmptyPortfolio,
    #[error("confidence must lie in (0, 1), got {0}")]
    InvalidConfidence(f64),
    #[error("no loss samples")]
    EmptySample,
    #[error("need {needed} observations for the backtest, panel has {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("histogram needs at least one bin")]
    ZeroBins,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Instrument {
    /// Zero-coupon bond paying `notional` units of `currency` at time-to-maturity `maturity`.
    ZeroCouponBond {
        currency: String,
        maturity: f64,
        notional: f64,
    },
    /// `notional` units of foreign `currency` held spot.
    FxSpot { currency: String, notional: f64 },
}

impl Instrument {
    fn scaled(&self, factor: f64) -> Instrument {
        match self.clone() {
            Instrument::ZeroCouponBond {
                currency,
                maturity,
                notional,
            } => Instrument::ZeroCouponBond {
                currency,
                maturity,
                notional: notional * factor,
            },
            Instrument::FxSpot { currency, notional } => Instrument::FxSpot {
                currency,
                notional: notional * factor,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    instruments: Vec<Instrument>,
    roll_over: bool,
}

impl Portfolio {
    pub fn new(instruments: Vec<Instrument>, roll_over: bool) -> Result<Self, RiskError> {
        if instruments.is_empty() {
            return Err(RiskError::EmptyPortfolio);
        }
        Ok(Portfolio {
            instruments,
            roll_over,
        })
    }

    pub fn instruments(&self) -> &[Instrument] {
        &self.instruments
    }

    /// Times to maturity stay fixed from one day to the next.
    pub fn roll_over(&self) -> bool {
        self.roll_over
    }

    pub fn scaled(&self, factor: f64) -> Portfolio {
        Portfolio {
            instruments: self.instruments.iter().map(|i| i.scaled(factor)).collect(),
            roll_over: self.roll_over,
        }
    }

    pub fn combined(&self, other: &Portfolio) -> Portfolio {
        let mut instruments = self.instruments.clone();
        instruments.extend(other.instruments.iter().cloned());
        Portfolio {
            instruments,
            roll_over: self.roll_over,
        }
    }

    /// Checks every instrument against the layout.
    pub fn validate(&self, layout: &FactorLayout) -> Result<(), RiskError> {
        let max = layout.tenors()[layout.n_tenors() - 1];
        for inst in &self.instruments {
            match inst {
                Instrument::ZeroCouponBond {
                    currency,
                    maturity,
                    notional,
                } => {
                    layout
                        .currency_index(currency)
                        .ok_or_else(|| RiskError::UnknownCurrency(currency.clone()))?;
                    if !(0.0..=max).contains(maturity) {
                        return Err(RiskError::MaturityOutOfRange { x: *maturity, max });
                    }
                    if !notional.is_finite() {
                        return Err(RiskError::InvalidNotional);
                    }
                }
                Instrument::FxSpot { currency, notional } => {
                    let alpha = layout
                        .currency_index(currency)
                        .ok_or_else(|| RiskError::UnknownCurrency(currency.clone()))?;
                    if alpha == 0 {
                        return Err(RiskError::DomesticFxPosition(currency.clone()));
                    }
                    if !notional.is_finite() {
                        return Err(RiskError::InvalidNotional);
                    }
                }
            }
        }
        Ok(())
    }
}

/// `exp(-int_0^x f(u) du)` for the interpolated forward curve `f`.
pub fn zcb_price(tenors: &[f64], curve: &[f64], x: f64) -> Result<f64, RiskError> {
    let max = tenors[tenors.len() - 1];
    if !(0.0..=max).contains(&x) {
        return Err(RiskError::MaturityOutOfRange { x, max });
    }
    Ok((-curve::integral_to(tenors, curve, x)).exp())
}

/// Domestic-currency value of the portfolio in `state`, with every
/// time-to-maturity shortened by `aging` (year fractions, clamped at 0).
pub fn portfolio_value_aged(
    portfolio: &Portfolio,
    state: &[f64],
    layout: &FactorLayout,
    aging: f64,
) -> Result<f64, RiskError> {
    let view = slice_state(state, layout)?;
    let tenors = layout.tenors();
    let mut total = 0.0;
    for inst in &portfolio.instruments {
        total += match inst {
            Instrument::ZeroCouponBond {
                currency,
                maturity,
                notional,
            } => {
                let alpha = layout
                    .currency_index(currency)
                    .ok_or_else(|| RiskError::UnknownCurrency(currency.clone()))?;
                let x = (maturity - aging).max(0.0);
                let fx = if alpha == 0 {
                    1.0
                } else {
                    view.fx(alpha).exp()
                };
                notional * fx * zcb_price(tenors, view.curve(alpha), x)?
            }
            Instrument::FxSpot { currency, notional } => {
                let alpha = layout
                    .currency_index(currency)
                    .ok_or_else(|| RiskError::UnknownCurrency(currency.clone()))?;
                if alpha == 0 {
                    return Err(RiskError::DomesticFxPosition(currency.clone()));
                }
                notional * view.fx(alpha).exp()
            }
        };
    }
    Ok(total)
}

pub fn portfolio_value(
    portfolio: &Portfolio,
    state: &[f64],
    layout: &FactorLayout,
) -> Result<f64, RiskError> {
    portfolio_value_aged(portfolio, state, layout, 0.0)
}

/// Loss (positive = money lost) of every scenario relative to `base`.
pub fn scenario_pnl(
    portfolio: &Portfolio,
    base: &[f64],
    scenarios: &ScenarioSet,
    layout: &FactorLayout,
) -> Result<Vec<f64>, RiskError> {
    scenario_losses(portfolio, base, &scenarios.states, layout, 0.0)
}

fn scenario_losses(
    portfolio: &Portfolio,
    base: &[f64],
    states: &[Vec<f64>],
    layout: &FactorLayout,
    aging: f64,
) -> Result<Vec<f64>, RiskError> {
    let v0 = portfolio_value(portfolio, base, layout)?;
    states
        .iter()
        .map(|s| portfolio_value_aged(portfolio, s, layout, aging).map(|v| v0 - v))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarEsResult {
    pub confidence: f64,
    pub var: f64,
    pub es: f64,
    pub n_samples: usize,
    /// Fewer than `1 / (1 - confidence)` samples: the tail is barely resolved.
    pub too_few_samples: bool,
}

/// Empirical VaR (order statistic at rank `ceil(confidence * n)`) and the mean
/// of the losses ranked at or beyond it.
pub fn var_es(losses: &[f64], confidence: f64) -> Result<VarEsResult, RiskError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(RiskError::InvalidConfidence(confidence));
    }
    if losses.is_empty() {
        return Err(RiskError::EmptySample);
    }
    let n = losses.len();
    let mut sorted = losses.to_vec();
    sorted.sort_by(f64::total_cmp);
    // guard against 0.99 * 100 landing a hair above 99
    let rank = ((confidence * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    let var = sorted[rank - 1];
    let tail = &sorted[rank - 1..];
    let es = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok(VarEsResult {
        confidence,
        var,
        es: es.max(var),
        n_samples: n,
        too_few_samples: (n as f64) < 1.0 / (1.0 - confidence),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    /// Calibration window `K` (observations).
    pub history: usize,
    pub confidence: f64,
    pub calibration: CalibrationConfig,
    pub simulation: SimulationConfig,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            history: DEFAULT_HISTORY,
            confidence: DEFAULT_CONFIDENCE,
            calibration: CalibrationConfig::with_defaults(),
            simulation: SimulationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestDay {
    pub date: NaiveDate,
    /// Next-day P&L of the portfolio (positive = gain).
    pub realized_pnl: f64,
    pub var: f64,
    pub es: f64,
    pub var_violation: bool,
    pub es_breach: bool,
    pub n_drivers: usize,
    pub n_extremes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub confidence: f64,
    pub days: Vec<BacktestDay>,
}

impl BacktestReport {
    pub fn violations(&self) -> usize {
        self.days.iter().filter(|d| d.var_violation).count()
    }

    pub fn es_breaches(&self) -> usize {
        self.days.iter().filter(|d| d.es_breach).count()
    }

    pub fn write_csv<W: Write>(&self, mut writer: W, echo: Option<&str>) -> Result<(), RiskError> {
        if let Some(echo) = echo {
            for line in echo.lines() {
                writeln!(writer, "# {line}")?;
            }
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "date",
            "realized_pnl",
            "var",
            "es",
            "var_violation",
            "es_breach",
            "n_drivers",
            "n_extremes",
        ])?;
        for d in &self.days {
            w.write_record([
                d.date.format("%Y-%m-%d").to_string(),
                d.realized_pnl.to_string(),
                d.var.to_string(),
                d.es.to_string(),
                u8::from(d.var_violation).to_string(),
                u8::from(d.es_breach).to_string(),
                d.n_drivers.to_string(),
                d.n_extremes.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn day_seed(seed: u64, day: usize) -> u64 {
    seed ^ (day as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Rolling one-day VaR/ES backtest over the last `window_days` days of `panel`.
///
/// Each day is calibrated on the `config.history` observations ending that
/// day and compared against the realized move to the next observation.
pub fn backtest(
    panel: &HistoricalPanel,
    portfolio: &Portfolio,
    window_days: usize,
    config: &BacktestConfig,
) -> Result<BacktestReport, RiskError> {
    let mut report = BacktestReport {
        confidence: config.confidence,
        days: Vec::new(),
    };
    if window_days == 0 {
        return Ok(report);
    }
    let needed = config.history + window_days;
    if panel.len() < needed || config.history < 2 {
        return Err(RiskError::InsufficientHistory {
            needed,
            available: panel.len(),
        });
    }
    if !(config.confidence > 0.0 && config.confidence < 1.0) {
        return Err(RiskError::InvalidConfidence(config.confidence));
    }
    let layout = panel.layout();
    portfolio.validate(layout)?;
    let aging = if portfolio.roll_over {
        0.0
    } else {
        panel.delta() * config.simulation.horizon_days as f64
    };
    let first = panel.len() - 1 - window_days;

    let run_days = || {
        (0..window_days)
            .into_par_iter()
            .map(|d| -> Result<BacktestDay, RiskError> {
                let t = first + d;
                let history = panel
                    .window(t, config.history)
                    .expect("length checked above");
                let cal = calibrate(&history, &config.calibration)?;
                let sim = SimulationConfig {
                    seed: day_seed(config.simulation.seed, d),
                    threads: None,
                    ..config.simulation.clone()
                };
                let scenarios = simulate_scenarios(&cal.model, &sim)?;
                let base = panel.state(t);
                let losses = scenario_losses(portfolio, base, &scenarios.states, layout, aging)?;
                let risk = var_es(&losses, config.confidence)?;

                let today = portfolio_value(portfolio, base, layout)?;
                let tomorrow = portfolio_value_aged(portfolio, panel.state(t + 1), layout, aging)?;
                let realized_pnl = tomorrow - today;
                let realized_loss = -realized_pnl;
                Ok(BacktestDay {
                    date: panel.dates()[t],
                    realized_pnl,
                    var: risk.var,
                    es: risk.es,
                    var_violation: realized_loss > risk.var,
                    es_breach: realized_loss > risk.es,
                    n_drivers: cal.model.n_drivers(),
                    n_extremes: cal.filter.extremes.len(),
                })
            })
            .collect::<Result<Vec<_>, _>>()
    };
    report.days = crate::engine::install(config.simulation.threads, run_days)??;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Equal-width bin edges spanning `[min, max]` of all given samples.
pub fn common_edges(samples: &[&[f64]], n_bins: usize) -> Result<Vec<f64>, RiskError> {
    if n_bins == 0 {
        return Err(RiskError::ZeroBins);
    }
    let finite = samples
        .iter()
        .flat_map(|s| s.iter())
        .filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    });
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    } else if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|k| lo + (hi - lo) * k as f64 / n_bins as f64)
        .collect();
    // rounding can leave the last edge just below the maximum
    edges[n_bins] = hi;
    Ok(edges)
}

/// Counts per bin `[e_k, e_{k+1})`; the last bin also takes its upper edge.
/// Values outside the edges are dropped.
pub fn histogram_with_edges(values: &[f64], edges: &[f64]) -> Histogram {
    let n_bins = edges.len() - 1;
    let mut counts = vec![0; n_bins];
    let (lo, hi) = (edges[0], edges[n_bins]);
    for &v in values {
        if !(lo..=hi).contains(&v) {
            continue;
        }
        let k = edges.partition_point(|e| *e <= v).clamp(1, n_bins) - 1;
        counts[k] += 1;
    }
    Histogram {
        edges: edges.to_vec(),
        counts,
    }
}

pub fn histogram(values: &[f64], n_bins: usize) -> Result<Histogram, RiskError> {
    let edges = common_edges(&[values], n_bins)?;
    Ok(histogram_with_edges(values, &edges))
}

/// Writes `bin_lo,bin_hi,count` rows for `values`.
pub fn histogram_export(
    values: &[f64],
    n_bins: usize,
    path: &Path,
) -> Result<Histogram, RiskError> {
    let h = histogram(values, n_bins)?;
    write_histograms(path, &h.edges, &[("count", &h.counts)], None)?;
    Ok(h)
}

/// Writes several histograms sharing `edges` side by side.
pub fn write_histograms(
    path: &Path,
    edges: &[f64],
    columns: &[(&str, &[usize])],
    echo: Option<&str>,
) -> Result<(), RiskError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(echo) = echo {
        for line in echo.lines() {
            writeln!(file, "# {line}")?;
        }
    }
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["bin_lo".to_string(), "bin_hi".to_string()];
    header.extend(columns.iter().map(|(name, _)| name.to_string()));
    w.write_record(&header)?;
    for k in 0..edges.len() - 1 {
        let mut rec = vec![edges[k].to_string(), edges[k + 1].to_string()];
        rec.extend(columns.iter().map(|(_, c)| c[k].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_ccy() -> FactorLayout {
        FactorLayout::new(vec!["EUR".into(), "USD".into()], vec![0.0, 1.0, 2.0, 5.0]).unwrap()
    }

    fn zcb(ccy: &str, x: f64, n: f64) -> Instrument {
        Instrument::ZeroCouponBond {
            currency: ccy.into(),
            maturity: x,
            notional: n,
        }
    }

    fn fx(ccy: &str, n: f64) -> Instrument {
        Instrument::FxSpot {
            currency: ccy.into(),
            notional: n,
        }
    }

    #[test]
    fn zcb_prices() {
        let t = [0.0, 1.0, 2.0, 5.0];
        assert_eq!(zcb_price(&t, &[0.0; 4], 3.3).unwrap(), 1.0);
        let p = zcb_price(&t, &[0.05; 4], 2.0).unwrap();
        assert!((p - 0.904837418035960).abs() < 1e-12);
        assert_eq!(zcb_price(&t, &[0.05; 4], 0.0).unwrap(), 1.0);
        assert!(matches!(
            zcb_price(&t, &[0.05; 4], 6.0),
            Err(RiskError::MaturityOutOfRange { .. })
        ));
    }

    #[test]
    fn portfolio_values() {
        let l = two_ccy();
        let mut state = vec![0.0; l.n_factors()];
        let p = Portfolio::new(vec![zcb("EUR", 2.0, 100.0)], true).unwrap();
        assert_eq!(portfolio_value(&p, &state, &l).unwrap(), 100.0);

        let p = Portfolio::new(vec![fx("USD", 1.0)], true).unwrap();
        assert_eq!(portfolio_value(&p, &state, &l).unwrap(), 1.0);

        state[4..8].copy_from_slice(&[0.05; 4]);
        state[8] = 2f64.ln();
        let p = Portfolio::new(vec![zcb("USD", 2.0, 1.0)], true).unwrap();
        let v = portfolio_value(&p, &state, &l).unwrap();
        assert!((v - 1.80967483607192).abs() < 1e-12);

        assert!(matches!(
            Portfolio::new(vec![], true),
            Err(RiskError::EmptyPortfolio)
        ));
        let bad = Portfolio::new(vec![fx("EUR", 1.0)], true).unwrap();
        assert!(matches!(
            bad.validate(&l),
            Err(RiskError::DomesticFxPosition(_))
        ));
        let bad = Portfolio::new(vec![zcb("JPY", 1.0, 1.0)], true).unwrap();
        assert!(matches!(
            bad.validate(&l),
            Err(RiskError::UnknownCurrency(_))
        ));
    }

    #[test]
    fn scenario_losses_by_hand() {
        let l = two_ccy();
        let base = vec![0.01, 0.01, 0.01, 0.01, 0.02, 0.02, 0.02, 0.02, 0.3];
        let p = Portfolio::new(vec![fx("USD", 1.0), zcb("EUR", 1.0, 5.0)], true).unwrap();
        let same = ScenarioSet {
            factor_names: l.factor_names(),
            states: vec![base.clone(); 3],
            audit: vec![],
        };
        assert!(scenario_pnl(&p, &base, &same, &l)
            .unwrap()
            .iter()
            .all(|x| *x == 0.0));

        let long_fx = Portfolio::new(vec![fx("USD", 1.0)], true).unwrap();
        let mut up = base.clone();
        up[8] += 1.01f64.ln();
        let moved = ScenarioSet {
            factor_names: l.factor_names(),
            states: vec![up],
            audit: vec![],
        };
        let loss = scenario_pnl(&long_fx, &base, &moved, &l).unwrap()[0];
        assert!((loss - (-0.01 * 0.3f64.exp())).abs() < 1e-14);
    }

    #[test]
    fn var_es_examples() {
        let losses: Vec<f64> = (1..=100).map(f64::from).collect();
        let r = var_es(&losses, 0.99).unwrap();
        assert_eq!((r.var, r.es), (99.0, 99.5));
        let r = var_es(&losses, 0.95).unwrap();
        assert_eq!((r.var, r.es), (95.0, 97.5));
        let r = var_es(&[2.5; 10], 0.99).unwrap();
        assert_eq!((r.var, r.es), (2.5, 2.5));
        assert!(r.too_few_samples);
        assert!(var_es(&losses, 1.0).is_err());
        assert!(var_es(&[], 0.9).is_err());
    }

    #[test]
    fn histogram_cases() {
        let v: Vec<f64> = (0..10).map(|k| k as f64 / 10.0).collect();
        let h = histogram(&v, 1).unwrap();
        assert_eq!(h.counts, vec![10]);

        let sym = [-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0];
        let h = histogram(&sym, 4).unwrap();
        let mut rev = h.counts.clone();
        rev.reverse();
        assert_eq!(h.counts, rev);
        assert!(histogram(&sym, 0).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        histogram_export(&sym, 3, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("bin_lo,bin_hi,count\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn empty_backtest_window() {
        let l = two_ccy();
        let dates = crate::data::business_dates(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), 3);
        let panel = HistoricalPanel::new(l.clone(), dates, vec![vec![0.01; 9]; 3], 0.004).unwrap();
        let p = Portfolio::new(vec![fx("USD", 1.0)], true).unwrap();
        let r = backtest(&panel, &p, 0, &BacktestConfig::default()).unwrap();
        assert!(r.days.is_empty());
        assert!(matches!(
            backtest(&panel, &p, 5, &BacktestConfig::default()),
            Err(RiskError::InsufficientHistory { .. })
        ));
    }

    proptest! {
        #[test]
        fn es_dominates_var(
            losses in prop::collection::vec(-100.0f64..100.0, 1..300),
            c in 0.5f64..0.999,
        ) {
            let r = var_es(&losses, c).unwrap();
            prop_assert!(r.es >= r.var);
        }

        #[test]
        fn var_es_affine_equivariant(
            losses in prop::collection::vec(-100.0f64..100.0, 1..300),
            a in 0.1f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let r = var_es(&losses, 0.99).unwrap();
            let moved: Vec<f64> = losses.iter().map(|x| a * x + b).collect();
            let s = var_es(&moved, 0.99).unwrap();
            prop_assert!((s.var - (a * r.var + b)).abs() <= 1e-9 * (1.0 + s.var.abs()));
            prop_assert!((s.es - (a * r.es + b)).abs() <= 1e-9 * (1.0 + s.es.abs()));
        }

        #[test]
        fn value_is_linear_in_notionals(
            state in prop::collection::vec(-0.02f64..0.08, 9),
            k in -3.0f64..3.0,
        ) {
            let l = two_ccy();
            let a = Portfolio::new(vec![zcb("EUR", 1.5, 10.0), fx("USD", 3.0)], true).unwrap();
            let b = Portfolio::new(vec![zcb("USD", 4.0, -2.0)], true).unwrap();
            let va = portfolio_value(&a, &state, &l).unwrap();
            let vb = portfolio_value(&b, &state, &l).unwrap();
            let vab = portfolio_value(&a.combined(&b), &state, &l).unwrap();
            let vka = portfolio_value(&a.scaled(k), &state, &l).unwrap();
            prop_assert!((vab - va - vb).abs() <= 1e-12 * (1.0 + vab.abs()));
            prop_assert!((vka - k * va).abs() <= 1e-12 * (1.0 + vka.abs()));
        }

        #[test]
        fn histogram_counts_sum_to_n(
            values in prop::collection::vec(-5.0f64..5.0, 1..200),
            bins in 1usize..40,
        ) {
            prop_assert_eq!(histogram(&values, bins).unwrap().total(), values.len());
        }
    }
}
