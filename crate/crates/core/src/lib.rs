//! Scenario generation for interest-rate and FX risk factors.
//!
//! Historical returns are volatility-filtered and split into diffusive and
//! extreme moves. The diffusive moves become constant directions of an SDE,
//! the extreme ones a jump measure. Scenarios are simulated with an Euler
//! scheme under a random time change and fed into VaR/ES backtests.

pub mod curve;
pub mod data;
pub mod engine;
pub mod filter;
pub mod model;
pub mod oracle;
pub mod risk;
pub mod validate;

pub use data::{
    compute_returns, load_panel, load_panel_file, DataError, FactorKind, FactorLayout,
    HistoricalPanel, StateView, DEFAULT_DELTA,
};
pub use engine::{
    euler_step, simulate_scenarios, EngineError, JumpSpec, ScenarioSet, SimulationConfig,
    TimeChangeDistribution,
};
pub use filter::{filter_history, FilterConfig, FilterError, FilterOutcome, ReturnPartition};
pub use model::{
    calibrate, load_model, save_model, CalibratedModel, Calibration, CalibrationConfig,
    GeometricSigma, ModelConfig, ModelError, SigmaChoice, SigmaRule,
};
pub use risk::{
    backtest, var_es, BacktestConfig, BacktestReport, Instrument, Portfolio, RiskError, VarEsResult,
};
pub use validate::{run_validation, CheckStatus, ValidationConfig, ValidationReport};
