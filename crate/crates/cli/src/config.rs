//! Run configuration: one TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scengen_core::engine::DEFAULT_SCENARIOS;
use scengen_core::risk::{DEFAULT_CONFIDENCE, DEFAULT_HISTORY, DEFAULT_WINDOW_DAYS};
use scengen_core::{
    CalibrationConfig, FilterConfig, Instrument, ModelConfig, SimulationConfig,
    TimeChangeDistribution, ValidationConfig, DEFAULT_DELTA,
};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub panel: Option<PathBuf>,
    pub layout: Option<PathBuf>,
    pub out: PathBuf,
    /// Model file; defaults to `<out>/model.json`.
    pub model: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            panel: None,
            layout: None,
            out: PathBuf::from("out"),
            model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub jump_rate: f64,
    pub time_change: TimeChangeDistribution,
    pub n_scenarios: usize,
    pub seed: u64,
    pub steps_per_day: usize,
    pub horizon_days: usize,
}

impl Default for EngineSection {
    fn default() -> Self {
        EngineSection {
            jump_rate: scengen_core::engine::DEFAULT_JUMP_RATE,
            time_change: TimeChangeDistribution::default(),
            n_scenarios: DEFAULT_SCENARIOS,
            seed: 0,
            steps_per_day: 1,
            horizon_days: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskSection {
    pub confidence: f64,
    pub window_days: usize,
    pub history: usize,
    pub roll_over: bool,
    pub portfolio: Vec<Instrument>,
}

impl Default for RiskSection {
    fn default() -> Self {
        RiskSection {
            confidence: DEFAULT_CONFIDENCE,
            window_days: DEFAULT_WINDOW_DAYS,
            history: DEFAULT_HISTORY,
            roll_over: true,
            portfolio: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Factor column names; empty means every factor.
    pub factors: Vec<String>,
    pub bins: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            factors: Vec::new(),
            bins: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Observation spacing in years.
    pub delta: f64,
    pub paths: Paths,
    pub filter: FilterConfig,
    pub model: ModelConfig,
    pub engine: EngineSection,
    pub risk: RiskSection,
    pub report: ReportSection,
    pub validate: ValidationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            delta: DEFAULT_DELTA,
            paths: Paths::default(),
            filter: FilterConfig::default(),
            model: ModelConfig::default(),
            engine: EngineSection::default(),
            risk: RiskSection::default(),
            report: ReportSection::default(),
            validate: ValidationConfig::default(),
        }
    }
}

/// Flags that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub scenarios: Option<usize>,
    pub eta: Option<f64>,
    pub violations: Option<usize>,
    pub jump_rate: Option<f64>,
    pub confidence: Option<f64>,
    pub model: Option<PathBuf>,
}

impl RunConfig {
    /// Reads `path` (if any), resolves its relative paths against the file's
    /// directory and applies `overrides`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Input(format!("cannot read config {}: {e}", p.display()))
                })?;
                let mut cfg: RunConfig = toml::from_str(&text)
                    .map_err(|e| CliError::Input(format!("invalid config {}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                cfg.paths.resolve(base);
                cfg
            }
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.engine.seed = v;
            self.validate.seed = v;
        }
        if let Some(v) = &o.out {
            self.paths.out = v.clone();
        }
        if let Some(v) = o.scenarios {
            self.engine.n_scenarios = v;
        }
        if let Some(v) = o.eta {
            self.filter.eta = v;
        }
        if let Some(v) = o.violations {
            self.filter.violations = v;
        }
        if let Some(v) = o.jump_rate {
            self.engine.jump_rate = v;
        }
        if let Some(v) = o.confidence {
            self.risk.confidence = v;
            self.validate.confidence = v;
        }
        if let Some(v) = &o.model {
            self.paths.model = Some(v.clone());
        }
    }

    pub fn calibration(&self) -> CalibrationConfig {
        CalibrationConfig {
            filter: self.filter.clone(),
            model: self.model.clone(),
            jump_rate: self.engine.jump_rate,
            time_change: self.engine.time_change.clone(),
        }
    }

    pub fn simulation(&self, threads: Option<usize>) -> SimulationConfig {
        SimulationConfig {
            n_scenarios: self.engine.n_scenarios,
            horizon_days: self.engine.horizon_days,
            seed: self.engine.seed,
            steps_per_day: self.engine.steps_per_day,
            threads,
        }
    }

    pub fn model_path(&self) -> PathBuf {
        self.paths
            .model
            .clone()
            .unwrap_or_else(|| self.paths.out.join("model.json"))
    }

    /// The resolved configuration as TOML, for echoing into outputs.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.panel.as_mut().map(fix);
        self.layout.as_mut().map(fix);
        self.model.as_mut().map(fix);
        fix(&mut self.out);
    }
}
