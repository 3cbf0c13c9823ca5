//! Scenario simulation: explicit-implicit Euler steps with extreme-event jumps
//! and a discrete random time change.
//!
//! Every scenario owns a ChaCha8 stream keyed by `(seed, scenario index)`, so
//! results do not depend on how scenarios are spread over threads.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::CalibratedModel;

pub const DEFAULT_JUMP_RATE: f64 = 0.02;
pub const DEFAULT_SCENARIOS: usize = 5000;

const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid time-change distribution: {0}")]
    InvalidTimeChange(String),
    #[error("invalid jump specification: {0}")]
    InvalidJumpSpec(String),
    #[error("jump rate is positive but there are no extreme returns to draw from")]
    EmptyJumpMeasure,
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("time step must be non-negative, got {0}")]
    InvalidStep(f64),
    #[error("state of length {found} for a model with {expected} factors")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite state in scenario {scenario} at step {step}, factor {factor}")]
    NonFiniteState {
        scenario: usize,
        step: usize,
        factor: usize,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Discrete distribution of the trading-time length of one calendar day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct TimeChangeDistribution {
    /// `(duration in days, probability)`
    atoms: Vec<(f64, f64)>,
}

impl Default for TimeChangeDistribution {
    fn default() -> Self {
        TimeChangeDistribution {
            atoms: vec![(0.9, 0.9), (1.9, 0.1)],
        }
    }
}

impl TryFrom<Vec<(f64, f64)>> for TimeChangeDistribution {
    type Error = EngineError;

    fn try_from(atoms: Vec<(f64, f64)>) -> Result<Self, EngineError> {
        TimeChangeDistribution::new(atoms)
    }
}

impl From<TimeChangeDistribution> for Vec<(f64, f64)> {
    fn from(d: TimeChangeDistribution) -> Self {
        d.atoms
    }
}

impl TimeChangeDistribution {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, EngineError> {
        let d = TimeChangeDistribution { atoms };
        d.validate()?;
        Ok(d)
    }

    /// Always exactly one day.
    pub fn trivial() -> Self {
        TimeChangeDistribution {
            atoms: vec![(1.0, 1.0)],
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidTimeChange(m.to_string()));
        if self.atoms.is_empty() {
            return bad("no atoms");
        }
        if self.atoms.iter().any(|(d, _)| !(d.is_finite() && *d > 0.0)) {
            return bad("durations must be positive");
        }
        if self.atoms.iter().any(|(_, p)| !(p.is_finite() && *p > 0.0)) {
            return bad("probabilities must be positive");
        }
        let total: f64 = self.atoms.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return bad("probabilities must sum to 1");
        }
        Ok(())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(d, p)| d * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms.iter().map(|(d, p)| p * (d - m) * (d - m)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_time_change(self, rng)
    }
}

pub fn sample_time_change<R: Rng + ?Sized>(dist: &TimeChangeDistribution, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (duration, p) in &dist.atoms {
        cumulative += p;
        if u < cumulative {
            return *duration;
        }
    }
    // u landed in the rounding gap above the last cumulative sum
    dist.atoms[dist.atoms.len() - 1].0
}

/// Poisson-thinned jumps drawn uniformly from the extreme filtered returns.
///
/// Sizes are stored pulled back through `sigma(Y_t)^-1` and pushed forward
/// through `sigma` of the state they are applied to.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JumpSpec {
    rate: f64,
    sizes: Vec<Vec<f64>>,
    sources: Vec<usize>,
}

impl JumpSpec {
    pub fn new(rate: f64, sizes: Vec<Vec<f64>>, sources: Vec<usize>) -> Result<Self, EngineError> {
        let spec = JumpSpec {
            rate,
            sizes,
            sources,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn none() -> Self {
        JumpSpec::default()
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(0.0..1.0).contains(&self.rate) {
            return Err(EngineError::InvalidJumpSpec(format!(
                "rate {} outside [0, 1)",
                self.rate
            )));
        }
        if self.rate > 0.0 && self.sizes.is_empty() {
            return Err(EngineError::EmptyJumpMeasure);
        }
        if self.sources.len() != self.sizes.len() {
            return Err(EngineError::InvalidJumpSpec(
                "one source index per jump size required".into(),
            ));
        }
        Ok(())
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sizes(&self) -> &[Vec<f64>] {
        &self.sizes
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }
}

/// Draws whether a jump happens and, if so, which one and its size at `state`.
pub fn maybe_jump<R: Rng + ?Sized>(
    spec: &JumpSpec,
    sigma_multipliers: &[f64],
    rng: &mut R,
) -> Result<Option<(usize, Vec<f64>)>, EngineError> {
    let u: f64 = rng.random();
    if u >= spec.rate {
        return Ok(None);
    }
    if spec.sizes.is_empty() {
        return Err(EngineError::EmptyJumpMeasure);
    }
    let pick = rng.random_range(0..spec.sizes.len());
    let size = spec.sizes[pick]
        .iter()
        .zip(sigma_multipliers)
        .map(|(x, m)| x * m)
        .collect();
    Ok(Some((pick, size)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    /// Position in the jump measure of the jump taken, if any.
    pub jump: Option<usize>,
}

/// One explicit-implicit Euler step of length `dt` (year fractions).
///
/// The jump (if `jump_trial` and triggered) is added to the state first; the
/// shift semigroup, drift and diffusion are then all evaluated at that state.
pub fn euler_step<R: Rng + ?Sized>(
    model: &CalibratedModel,
    state: &[f64],
    dt: f64,
    jump_trial: bool,
    rng: &mut R,
) -> Result<StepOutcome, EngineError> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(EngineError::InvalidStep(dt));
    }
    if state.len() != model.n_factors() {
        return Err(EngineError::LengthMismatch {
            expected: model.n_factors(),
            found: state.len(),
        });
    }
    let sigma = model.sigma();

    let mut y0 = state.to_vec();
    let mut jump = None;
    if jump_trial {
        let m = sigma.multipliers(state);
        if let Some((pick, size)) = maybe_jump(model.jumps(), &m, rng)? {
            y0.iter_mut().zip(&size).for_each(|(y, s)| *y += s);
            jump = Some(pick);
        }
    }

    let mut next = model
        .shift_state(&y0, dt)
        .map_err(|_| EngineError::InvalidStep(dt))?;
    let drift = model.drift(&y0);
    next.iter_mut().zip(&drift).for_each(|(n, d)| *n += d * dt);

    let sqrt_dt = dt.sqrt();
    let mut noise = vec![0.0; next.len()];
    for dir in model.directions() {
        let z: f64 = rng.sample(StandardNormal);
        let b = z * sqrt_dt;
        noise.iter_mut().zip(dir).for_each(|(acc, d)| *acc += d * b);
    }
    let m = sigma.multipliers(&y0);
    let scale = model.scale();
    for ((n, e), mj) in next.iter_mut().zip(&noise).zip(&m) {
        *n += scale * mj * e;
    }

    Ok(StepOutcome { state: next, jump })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_scenarios: usize,
    /// Horizon in day-steps of length `delta`.
    pub horizon_days: usize,
    pub seed: u64,
    pub steps_per_day: usize,
    /// Worker threads; `None` uses the global pool. Never affects results.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_scenarios: DEFAULT_SCENARIOS,
            horizon_days: 1,
            seed: 0,
            steps_per_day: 1,
            threads: None,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.n_scenarios == 0 {
            return Err(EngineError::InvalidConfig(
                "n_scenarios must be >= 1".into(),
            ));
        }
        if self.steps_per_day == 0 {
            return Err(EngineError::InvalidConfig(
                "steps_per_day must be >= 1".into(),
            ));
        }
        if self.threads == Some(0) {
            return Err(EngineError::InvalidConfig("threads must be >= 1".into()));
        }
        Ok(())
    }
}

/// RNG stream of one scenario.
pub fn scenario_rng(seed: u64, scenario: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(scenario as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioAudit {
    pub tau_days: f64,
    /// Return indices (in the calibration history) of the jumps applied.
    pub jump_sources: Vec<usize>,
}

impl ScenarioAudit {
    pub fn n_jumps(&self) -> usize {
        self.jump_sources.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub factor_names: Vec<String>,
    pub states: Vec<Vec<f64>>,
    pub audit: Vec<ScenarioAudit>,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn total_jumps(&self) -> usize {
        self.audit.iter().map(ScenarioAudit::n_jumps).sum()
    }

    /// Horizon state minus `base`, per scenario.
    pub fn increments(&self, base: &[f64]) -> Vec<Vec<f64>> {
        self.states
            .iter()
            .map(|s| s.iter().zip(base).map(|(a, b)| a - b).collect())
            .collect()
    }

    /// One row per scenario; `#`-prefixed header lines carry `echo` when given.
    pub fn write_csv<W: Write>(
        &self,
        mut writer: W,
        echo: Option<&str>,
    ) -> Result<(), EngineError> {
        if let Some(echo) = echo {
            for line in echo.lines() {
                writeln!(writer, "# {line}")?;
            }
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["scenario".to_string()];
        header.extend(self.factor_names.iter().cloned());
        header.push("tau_days".into());
        header.push("n_jumps".into());
        w.write_record(&header)?;
        for (k, (state, audit)) in self.states.iter().zip(&self.audit).enumerate() {
            let mut rec = Vec::with_capacity(state.len() + 3);
            rec.push(k.to_string());
            rec.extend(state.iter().map(|v| v.to_string()));
            rec.push(audit.tau_days.to_string());
            rec.push(audit.n_jumps().to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn simulate_one(
    model: &CalibratedModel,
    config: &SimulationConfig,
    scenario: usize,
) -> Result<(Vec<f64>, ScenarioAudit), EngineError> {
    let mut rng = scenario_rng(config.seed, scenario);
    let tau = model.time_change().sample(&mut rng);
    let n_steps = config.horizon_days * config.steps_per_day;
    let mut state = model.anchor().to_vec();
    let mut audit = ScenarioAudit {
        tau_days: tau,
        jump_sources: Vec::new(),
    };
    if n_steps == 0 {
        return Ok((state, audit));
    }
    let dt = tau * config.horizon_days as f64 * model.delta() / n_steps as f64;
    for step in 0..n_steps {
        let jump_trial = step % config.steps_per_day == 0;
        let out = euler_step(model, &state, dt, jump_trial, &mut rng)?;
        if let Some(pick) = out.jump {
            audit.jump_sources.push(model.jumps().sources()[pick]);
        }
        if let Some(factor) = out.state.iter().position(|v| !v.is_finite()) {
            return Err(EngineError::NonFiniteState {
                scenario,
                step,
                factor,
            });
        }
        state = out.state;
    }
    Ok((state, audit))
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn install<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, EngineError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(EngineError::InvalidConfig("threads must be >= 1".into())),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| EngineError::ThreadPool(e.to_string()))?
            .install(f)),
    }
}

/// Simulates `config.n_scenarios` independent scenarios from the model anchor.
pub fn simulate_scenarios(
    model: &CalibratedModel,
    config: &SimulationConfig,
) -> Result<ScenarioSet, EngineError> {
    config.validate()?;
    let run = || {
        (0..config.n_scenarios)
            .into_par_iter()
            .map(|s| simulate_one(model, config, s))
            .collect::<Result<Vec<_>, _>>()
    };
    let results = install(config.threads, run)??;
    let (states, audit) = results.into_iter().unzip();
    Ok(ScenarioSet {
        factor_names: model.layout().factor_names(),
        states,
        audit,
    })
}
