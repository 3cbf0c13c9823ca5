//! Constant-direction volatility model calibrated straight from filtered returns.
//!
//! The diffusion of the calibrated system is
//!
//! ```text
//! scale * sum_i sigma(X) . d_i dW^i,   d_i = sigma(Y_t)^-1 r_t,   scale = 1 / sqrt(delta * N_d)
//! ```
//!
//! where `r_t` runs over the `N_d` retained (non-extreme) filtered returns.
//! Forward curves additionally move under the shift semigroup and carry the
//! HJM no-arbitrage drift built from the same directions; log-FX rates carry
//! the interest differential minus half their variance.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve;
use crate::data::{compute_returns, FactorKind, FactorLayout, HistoricalPanel};
use crate::engine::{JumpSpec, TimeChangeDistribution};
use crate::filter::{filter_history, FilterConfig, FilterError, FilterOutcome, ReturnPartition};

pub const DEFAULT_EPS_R: f64 = 1e-4;
pub const MODEL_FORMAT: &str = "scengen-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("vector has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("shift time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("{found} FX loadings for {expected} drivers")]
    LoadingCountMismatch { expected: usize, found: usize },
    #[error("panel has no observations")]
    EmptyPanel,
    #[error("every filtered return is extreme; nothing left to calibrate the diffusion")]
    AllReturnsExtreme,
    #[error("inconsistent model: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Filter(FilterError),
    #[error("model file is not a {MODEL_FORMAT} document with a supported format version: {0}")]
    UnsupportedFormat(String),
    #[error(
        "model file format version {found} is not supported (expected {MODEL_FORMAT_VERSION})"
    )]
    UnsupportedVersion { found: u64 },
    #[error("corrupted model file (format version {MODEL_FORMAT_VERSION}): {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<FilterError> for ModelError {
    fn from(e: FilterError) -> Self {
        match e {
            FilterError::AllReturnsExtreme => ModelError::AllReturnsExtreme,
            other => ModelError::Filter(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SigmaRule {
    Identity,
    /// Multiplier `sqrt(max(level, floor))`.
    SqrtLevel {
        floor: f64,
    },
}

impl SigmaRule {
    #[inline]
    pub fn multiplier(&self, level: f64) -> f64 {
        match *self {
            SigmaRule::Identity => 1.0,
            SigmaRule::SqrtLevel { floor } => level.max(floor).sqrt(),
        }
    }
}

/// Which geometric factor rate factors get. Log-FX factors are always free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaChoice {
    #[default]
    Sqrt,
    Identity,
}

/// State-dependent diagonal volatility factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricSigma {
    rules: Vec<SigmaRule>,
}

impl GeometricSigma {
    pub fn for_layout(layout: &FactorLayout, choice: SigmaChoice, eps_r: f64) -> Self {
        let rules = layout
            .kinds()
            .iter()
            .map(|k| match (k, choice) {
                (FactorKind::ForwardRate { .. }, SigmaChoice::Sqrt) => {
                    SigmaRule::SqrtLevel { floor: eps_r }
                }
                _ => SigmaRule::Identity,
            })
            .collect();
        GeometricSigma { rules }
    }

    pub fn identity(n_factors: usize) -> Self {
        GeometricSigma {
            rules: vec![SigmaRule::Identity; n_factors],
        }
    }

    pub fn from_rules(rules: Vec<SigmaRule>) -> Self {
        GeometricSigma { rules }
    }

    pub fn rules(&self) -> &[SigmaRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn multipliers(&self, state: &[f64]) -> Vec<f64> {
        self.rules
            .iter()
            .zip(state)
            .map(|(rule, level)| rule.multiplier(*level))
            .collect()
    }

    fn check(&self, state: &[f64], v: &[f64]) -> Result<(), ModelError> {
        for len in [state.len(), v.len()] {
            if len != self.rules.len() {
                return Err(ModelError::LengthMismatch {
                    expected: self.rules.len(),
                    found: len,
                });
            }
        }
        Ok(())
    }

    pub fn apply(&self, state: &[f64], v: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check(state, v)?;
        Ok(self
            .rules
            .iter()
            .zip(state.iter().zip(v))
            .map(|(rule, (s, x))| rule.multiplier(*s) * x)
            .collect())
    }

    pub fn inverse_apply(&self, state: &[f64], v: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check(state, v)?;
        Ok(self
            .rules
            .iter()
            .zip(state.iter().zip(v))
            .map(|(rule, (s, x))| x / rule.multiplier(*s))
            .collect())
    }
}

/// Shift semigroup on a tenor grid: the value at `x` becomes the value at `x + t`.
pub fn apply_shift(tenors: &[f64], curve: &[f64], t: f64) -> Result<Vec<f64>, ModelError> {
    if t.is_nan() || t < 0.0 {
        return Err(ModelError::NegativeTime(t));
    }
    if curve.len() != tenors.len() {
        return Err(ModelError::LengthMismatch {
            expected: tenors.len(),
            found: curve.len(),
        });
    }
    if t == 0.0 {
        return Ok(curve.to_vec());
    }
    Ok(tenors
        .iter()
        .map(|x| curve::interpolate(tenors, curve, x + t))
        .collect())
}

/// HJM drift `scale^2 * sum_i v_i(x) * int_0^x v_i` with `v_i = m * d_i` on the grid.
///
/// `multipliers` are the sigma multipliers of the curve and `directions`
/// the curve components of each driver.
pub fn hjm_domestic_drift(
    tenors: &[f64],
    multipliers: &[f64],
    directions: &[&[f64]],
    scale: f64,
) -> Vec<f64> {
    let n = tenors.len();
    let mut drift = vec![0.0; n];
    let s2 = scale * scale;
    for dir in directions {
        // running trapezoid integral of v = m * d, flat below the first tenor
        let mut prev = multipliers[0] * dir[0];
        let mut integral = prev * tenors[0];
        drift[0] += s2 * prev * integral;
        for k in 1..n {
            let v = multipliers[k] * dir[k];
            integral += 0.5 * (tenors[k] - tenors[k - 1]) * (v + prev);
            drift[k] += s2 * v * integral;
            prev = v;
        }
    }
    drift
}

/// HJM drift of a foreign curve under the domestic measure: the plain HJM
/// term minus the quanto correction `sum_i scale * v_i(x) * delta_i`.
///
/// `fx_loadings` are the (already scaled) log-FX loadings of each driver.
pub fn hjm_foreign_drift(
    tenors: &[f64],
    multipliers: &[f64],
    directions: &[&[f64]],
    fx_loadings: &[f64],
    scale: f64,
) -> Result<Vec<f64>, ModelError> {
    if fx_loadings.len() != directions.len() {
        return Err(ModelError::LoadingCountMismatch {
            expected: directions.len(),
            found: fx_loadings.len(),
        });
    }
    let mut drift = hjm_domestic_drift(tenors, multipliers, directions, scale);
    for (dir, delta) in directions.iter().zip(fx_loadings) {
        for k in 0..tenors.len() {
            drift[k] -= scale * multipliers[k] * dir[k] * delta;
        }
    }
    Ok(drift)
}

/// Drift of a log-FX rate: interest differential minus half the variance.
pub fn fx_drift(domestic_short: f64, foreign_short: f64, fx_loadings: &[f64]) -> f64 {
    let half_var: f64 = fx_loadings.iter().map(|d| d * d).sum::<f64>() / 2.0;
    domestic_short - foreign_short - half_var
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub include_hjm: bool,
    pub include_fx_drift: bool,
    /// Extra constant drift per unit time (measure change); zero when absent.
    pub mu2: Option<Vec<f64>>,
}

impl Default for DriftSpec {
    fn default() -> Self {
        DriftSpec {
            include_hjm: true,
            include_fx_drift: true,
            mu2: None,
        }
    }
}

impl DriftSpec {
    pub fn off() -> Self {
        DriftSpec {
            include_hjm: false,
            include_fx_drift: false,
            mu2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub sigma: SigmaChoice,
    pub eps_r: f64,
    pub include_hjm: bool,
    pub include_fx_drift: bool,
    pub mu2: Option<Vec<f64>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            sigma: SigmaChoice::Sqrt,
            eps_r: DEFAULT_EPS_R,
            include_hjm: true,
            include_fx_drift: true,
            mu2: None,
        }
    }
}

/// Everything needed to turn a panel into a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub filter: FilterConfig,
    pub model: ModelConfig,
    pub jump_rate: f64,
    pub time_change: TimeChangeDistribution,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            filter: FilterConfig::default(),
            model: ModelConfig::default(),
            jump_rate: crate::engine::DEFAULT_JUMP_RATE,
            time_change: TimeChangeDistribution::default(),
        }
    }
}

impl CalibrationConfig {
    pub fn with_defaults() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedModel {
    layout: FactorLayout,
    sigma: GeometricSigma,
    delta: f64,
    scale: f64,
    directions: Vec<Vec<f64>>,
    direction_sources: Vec<usize>,
    drift: DriftSpec,
    /// `fx_loadings[alpha - 1][i]`: scaled log-FX component of driver `i`.
    fx_loadings: Vec<Vec<f64>>,
    jumps: JumpSpec,
    time_change: TimeChangeDistribution,
    anchor: Vec<f64>,
}

/// Inputs for assembling a model by hand.
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub layout: FactorLayout,
    pub sigma: GeometricSigma,
    pub delta: f64,
    pub scale: f64,
    pub directions: Vec<Vec<f64>>,
    pub drift: DriftSpec,
    pub jumps: JumpSpec,
    pub time_change: TimeChangeDistribution,
    pub anchor: Vec<f64>,
}

impl CalibratedModel {
    pub fn from_parts(parts: ModelParts) -> Result<Self, ModelError> {
        let n_drivers = parts.directions.len();
        let fx_loadings = (1..parts.layout.n_currencies())
            .map(|alpha| {
                let j = parts.layout.fx_index(alpha);
                parts
                    .directions
                    .iter()
                    .map(|d| parts.scale * d.get(j).copied().unwrap_or(f64::NAN))
                    .collect()
            })
            .collect();
        let model = CalibratedModel {
            direction_sources: (0..n_drivers).collect(),
            layout: parts.layout,
            sigma: parts.sigma,
            delta: parts.delta,
            scale: parts.scale,
            directions: parts.directions,
            drift: parts.drift,
            fx_loadings,
            jumps: parts.jumps,
            time_change: parts.time_change,
            anchor: parts.anchor,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let j = self.layout.n_factors();
        let bad = |msg: String| Err(ModelError::Inconsistent(msg));
        if self.sigma.len() != j {
            return bad(format!(
                "sigma has {} rules for {j} factors",
                self.sigma.len()
            ));
        }
        if self.anchor.len() != j {
            return bad(format!("anchor has length {}", self.anchor.len()));
        }
        if let Some(d) = self.directions.iter().find(|d| d.len() != j) {
            return bad(format!("direction of length {}", d.len()));
        }
        if self.direction_sources.len() != self.directions.len() {
            return bad("direction source count differs from driver count".into());
        }
        if self.fx_loadings.len() != self.layout.n_foreign()
            || self
                .fx_loadings
                .iter()
                .any(|l| l.len() != self.directions.len())
        {
            return bad("fx loadings do not match drivers".into());
        }
        if let Some(mu2) = &self.drift.mu2 {
            if mu2.len() != j {
                return bad(format!("mu2 has length {}", mu2.len()));
            }
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) || !self.scale.is_finite() {
            return bad("time tick and scale must be finite, tick positive".into());
        }
        let finite = |v: &Vec<f64>| v.iter().all(|x| x.is_finite());
        if !finite(&self.anchor) || !self.directions.iter().all(finite) {
            return bad("non-finite anchor or direction entries".into());
        }
        if let Some(s) = self.jumps.sizes().iter().find(|s| s.len() != j) {
            return bad(format!("jump size of length {}", s.len()));
        }
        self.jumps
            .validate()
            .map_err(|e| ModelError::Inconsistent(e.to_string()))?;
        self.time_change
            .validate()
            .map_err(|e| ModelError::Inconsistent(e.to_string()))?;
        Ok(())
    }

    pub fn layout(&self) -> &FactorLayout {
        &self.layout
    }

    pub fn sigma(&self) -> &GeometricSigma {
        &self.sigma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Overall driver scale `1 / sqrt(delta * N_d)`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// Return index each direction was built from.
    pub fn direction_sources(&self) -> &[usize] {
        &self.direction_sources
    }

    pub fn n_drivers(&self) -> usize {
        self.directions.len()
    }

    pub fn n_factors(&self) -> usize {
        self.layout.n_factors()
    }

    pub fn drift_spec(&self) -> &DriftSpec {
        &self.drift
    }

    pub fn fx_loadings(&self, alpha: usize) -> &[f64] {
        &self.fx_loadings[alpha - 1]
    }

    pub fn jumps(&self) -> &JumpSpec {
        &self.jumps
    }

    pub fn time_change(&self) -> &TimeChangeDistribution {
        &self.time_change
    }

    /// Today's state, the starting point of every scenario.
    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn with_drift(&self, drift: DriftSpec) -> Result<Self, ModelError> {
        let m = CalibratedModel {
            drift,
            ..self.clone()
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_jumps(&self, jumps: JumpSpec) -> Result<Self, ModelError> {
        let m = CalibratedModel {
            jumps,
            ..self.clone()
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_time_change(
        &self,
        time_change: TimeChangeDistribution,
    ) -> Result<Self, ModelError> {
        let m = CalibratedModel {
            time_change,
            ..self.clone()
        };
        m.validate()?;
        Ok(m)
    }

    /// Same model with the driver scale multiplied by `factor` (fault injection).
    pub fn with_scale_factor(&self, factor: f64) -> Self {
        let mut m = self.clone();
        m.scale *= factor;
        for loadings in &mut m.fx_loadings {
            loadings.iter_mut().for_each(|l| *l *= factor);
        }
        m
    }

    /// Diffusion covariance per unit time at `state`:
    /// `scale^2 * sum_i (sigma(state) . d_i)(sigma(state) . d_i)^T`.
    pub fn diffusion_covariance(&self, state: &[f64]) -> Vec<Vec<f64>> {
        let j = self.n_factors();
        let m = self.sigma.multipliers(state);
        let s2 = self.scale * self.scale;
        let mut cov = vec![vec![0.0; j]; j];
        for d in &self.directions {
            let v: Vec<f64> = d.iter().zip(&m).map(|(x, y)| x * y).collect();
            for a in 0..j {
                for b in 0..j {
                    cov[a][b] += s2 * v[a] * v[b];
                }
            }
        }
        cov
    }

    /// Drift per unit time at `state` (excluding the shift semigroup).
    pub fn drift(&self, state: &[f64]) -> Vec<f64> {
        let layout = &self.layout;
        let mut out = vec![0.0; layout.n_factors()];
        let tenors = layout.tenors();

        if self.drift.include_hjm && !self.directions.is_empty() {
            let m = self.sigma.multipliers(state);
            for alpha in 0..layout.n_currencies() {
                let range = layout.curve_range(alpha);
                let dirs: Vec<&[f64]> = self.directions.iter().map(|d| &d[range.clone()]).collect();
                let curve_drift = if alpha == 0 {
                    hjm_domestic_drift(tenors, &m[range.clone()], &dirs, self.scale)
                } else {
                    hjm_foreign_drift(
                        tenors,
                        &m[range.clone()],
                        &dirs,
                        &self.fx_loadings[alpha - 1],
                        self.scale,
                    )
                    .expect("loadings sized at construction")
                };
                out[range].copy_from_slice(&curve_drift);
            }
        }

        if self.drift.include_fx_drift {
            let domestic_short = state[layout.curve_range(0).start];
            for alpha in 1..layout.n_currencies() {
                let foreign_short = state[layout.curve_range(alpha).start];
                out[layout.fx_index(alpha)] +=
                    fx_drift(domestic_short, foreign_short, &self.fx_loadings[alpha - 1]);
            }
        }

        if let Some(mu2) = &self.drift.mu2 {
            out.iter_mut().zip(mu2).for_each(|(o, m)| *o += m);
        }
        out
    }

    /// Applies the shift semigroup for time `t` to every curve; log-FX is untouched.
    pub fn shift_state(&self, state: &[f64], t: f64) -> Result<Vec<f64>, ModelError> {
        let mut out = state.to_vec();
        for alpha in 0..self.layout.n_currencies() {
            let range = self.layout.curve_range(alpha);
            let shifted = apply_shift(self.layout.tenors(), &state[range.clone()], t)?;
            out[range].copy_from_slice(&shifted);
        }
        Ok(out)
    }
}

/// Assembles the model from the partitioned filtered returns of `panel`.
pub fn build_calibrated_model(
    panel: &HistoricalPanel,
    partition: &ReturnPartition,
    cfg: &CalibrationConfig,
) -> Result<CalibratedModel, ModelError> {
    if panel.is_empty() {
        return Err(ModelError::EmptyPanel);
    }
    if partition.diffusive.is_empty() {
        return Err(ModelError::AllReturnsExtreme);
    }
    let layout = panel.layout().clone();
    let sigma = GeometricSigma::for_layout(&layout, cfg.model.sigma, cfg.model.eps_r);

    let pull_back = |t: usize, r: &[f64]| -> Result<Vec<f64>, ModelError> {
        let state = panel.values().get(t).ok_or_else(|| {
            ModelError::Inconsistent(format!("return index {t} outside the panel"))
        })?;
        sigma.inverse_apply(state, r)
    };

    let directions = partition
        .diffusive
        .iter()
        .map(|(t, r)| pull_back(t, r))
        .collect::<Result<Vec<_>, _>>()?;
    let jump_sizes = partition
        .extreme
        .iter()
        .map(|(t, r)| pull_back(t, r))
        .collect::<Result<Vec<_>, _>>()?;

    let n_d = directions.len() as f64;
    let scale = 1.0 / (panel.delta() * n_d).sqrt();
    // no extreme events means nothing to mix in
    let rate = if jump_sizes.is_empty() {
        0.0
    } else {
        cfg.jump_rate
    };
    let jumps = JumpSpec::new(rate, jump_sizes, partition.extreme.indices.clone())
        .map_err(|e| ModelError::Inconsistent(e.to_string()))?;

    let mut model = CalibratedModel::from_parts(ModelParts {
        layout,
        sigma,
        delta: panel.delta(),
        scale,
        directions,
        drift: DriftSpec {
            include_hjm: cfg.model.include_hjm,
            include_fx_drift: cfg.model.include_fx_drift,
            mu2: cfg.model.mu2.clone(),
        },
        jumps,
        time_change: cfg.time_change.clone(),
        anchor: panel.state(panel.len() - 1).to_vec(),
    })?;
    model.direction_sources = partition.diffusive.indices.clone();
    Ok(model)
}

/// A calibrated model together with the filtering diagnostics behind it.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub model: CalibratedModel,
    pub filter: FilterOutcome,
}

/// Full pipeline: returns, two-window filter, extreme events, model.
pub fn calibrate(
    panel: &HistoricalPanel,
    cfg: &CalibrationConfig,
) -> Result<Calibration, ModelError> {
    if panel.is_empty() {
        return Err(ModelError::EmptyPanel);
    }
    let returns = compute_returns(panel);
    let filter = filter_history(&returns, &cfg.filter)?;
    let model = build_calibrated_model(panel, &filter.partition, cfg)?;
    Ok(Calibration { model, filter })
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format: &'a str,
    format_version: u32,
    model: &'a CalibratedModel,
    config: &'a serde_json::Value,
}

#[derive(Deserialize)]
struct ModelFileOwned {
    model: CalibratedModel,
    #[serde(default)]
    config: serde_json::Value,
}

/// Serializes the model as a versioned JSON document with a config echo.
pub fn model_to_json(model: &CalibratedModel, config: &serde_json::Value) -> String {
    let doc = ModelFileRef {
        format: MODEL_FORMAT,
        format_version: MODEL_FORMAT_VERSION,
        model,
        config,
    };
    serde_json::to_string_pretty(&doc).expect("model serializes")
}

/// Parses a model document, returning the model and its config echo.
pub fn model_from_json(text: &str) -> Result<(CalibratedModel, serde_json::Value), ModelError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ModelError::UnsupportedFormat(e.to_string()))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(MODEL_FORMAT) {
        return Err(ModelError::UnsupportedFormat("missing format tag".into()));
    }
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == MODEL_FORMAT_VERSION as u64 => {}
        Some(v) => return Err(ModelError::UnsupportedVersion { found: v }),
        None => {
            return Err(ModelError::UnsupportedFormat(
                "missing format_version".into(),
            ))
        }
    }
    let doc: ModelFileOwned =
        serde_json::from_value(value).map_err(|e| ModelError::Corrupt(e.to_string()))?;
    doc.model
        .validate()
        .map_err(|e| ModelError::Corrupt(e.to_string()))?;
    Ok((doc.model, doc.config))
}

pub fn save_model(
    path: &Path,
    model: &CalibratedModel,
    config: &serde_json::Value,
) -> Result<(), ModelError> {
    std::fs::write(path, model_to_json(model, config))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(CalibratedModel, serde_json::Value), ModelError> {
    let text = std::fs::read_to_string(path)?;
    model_from_json(&text)
}
