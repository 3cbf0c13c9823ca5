//! Realized-volatility filtering of historical returns and extreme-event detection.
//!
//! Return index `t` (0-based) is the move from observation `t` to `t + 1`.
//! A sliding window of length `L` is first complete at `t = L - 1`, so all
//! windowed series below start there and end at the last return `K - 2`
//! ("today").

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_L_RESCALE: usize = 20;
pub const DEFAULT_L_EXTREME: usize = 40;
pub const DEFAULT_ETA: f64 = 4.0;
pub const DEFAULT_VIOLATIONS: usize = 4;
pub const DEFAULT_EPS_VAR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("window length must be at least 1")]
    ZeroWindow,
    #[error("window of {window} returns is longer than the {available} available")]
    WindowTooLong { window: usize, available: usize },
    #[error("return and ratio index ranges do not align")]
    IndexMismatch,
    #[error("extreme-event level must be positive and the violation count at least 1")]
    InvalidThreshold,
    #[error("every filtered return is extreme; nothing left to calibrate the diffusion")]
    AllReturnsExtreme,
}

/// Mean-zero realized variance over trailing windows, per factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingVariance {
    window: usize,
    first: usize,
    values: Vec<Vec<f64>>,
}

impl SlidingVariance {
    pub fn window(&self) -> usize {
        self.window
    }

    /// Return index of the first complete window.
    pub fn first_index(&self) -> usize {
        self.first
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Variance at return index `t`, if a full window ends there.
    pub fn at(&self, t: usize) -> Option<&[f64]> {
        t.checked_sub(self.first)
            .and_then(|r| self.values.get(r))
            .map(Vec::as_slice)
    }

    /// Today's local variance (window ending at the last return).
    pub fn today(&self) -> &[f64] {
        self.values.last().expect("non-empty by construction")
    }
}

pub fn sliding_variance(
    returns: &[Vec<f64>],
    window: usize,
) -> Result<SlidingVariance, FilterError> {
    if window == 0 {
        return Err(FilterError::ZeroWindow);
    }
    if window > returns.len() {
        return Err(FilterError::WindowTooLong {
            window,
            available: returns.len(),
        });
    }
    let n_factors = returns[0].len();
    let scale = 1.0 / window as f64;
    let values = (window - 1..returns.len())
        .map(|t| {
            let mut acc = vec![0.0; n_factors];
            for row in &returns[t + 1 - window..=t] {
                for (a, r) in acc.iter_mut().zip(row) {
                    *a += r * r;
                }
            }
            acc.iter_mut().for_each(|a| *a *= scale);
            acc
        })
        .collect();
    Ok(SlidingVariance {
        window,
        first: window - 1,
        values,
    })
}

/// Ratios of local volatility to today's volatility.
#[derive(Debug, Clone, PartialEq)]
pub struct VolRatioSeries {
    first: usize,
    ratios: Vec<Vec<f64>>,
    today_var: Vec<f64>,
    eps_var: f64,
}

impl VolRatioSeries {
    /// Identity ratios (no rescaling) covering return indices `first..first + len`.
    pub fn unit(first: usize, len: usize, today_var: Vec<f64>) -> Self {
        let n = today_var.len();
        VolRatioSeries {
            first,
            ratios: vec![vec![1.0; n]; len],
            today_var,
            eps_var: 0.0,
        }
    }

    pub fn first_index(&self) -> usize {
        self.first
    }

    pub fn ratios(&self) -> &[Vec<f64>] {
        &self.ratios
    }

    /// Today's variance after flooring, per factor.
    pub fn today_var(&self) -> &[f64] {
        &self.today_var
    }

    pub fn eps_var(&self) -> f64 {
        self.eps_var
    }
}

pub fn vol_ratio(sv: &SlidingVariance, eps_var: f64) -> VolRatioSeries {
    let floor = eps_var.max(0.0);
    let today_var: Vec<f64> = sv.today().iter().map(|v| v.max(floor)).collect();
    let ratios = sv
        .values
        .iter()
        .map(|row| {
            row.iter()
                .zip(&today_var)
                .map(|(v, today)| (v.max(floor) / today).sqrt())
                .collect()
        })
        .collect();
    VolRatioSeries {
        first: sv.first,
        ratios,
        today_var,
        eps_var: floor,
    }
}

/// Returns divided by their vol ratio, tagged with their return indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FilteredReturns {
    pub indices: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

impl FilteredReturns {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn position(&self, index: usize) -> Option<usize> {
        self.indices.binary_search(&index).ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.indices
            .iter()
            .copied()
            .zip(self.rows.iter().map(Vec::as_slice))
    }
}

pub fn rescale_returns(
    returns: &[Vec<f64>],
    ratios: &VolRatioSeries,
) -> Result<FilteredReturns, FilterError> {
    if ratios.first + ratios.ratios.len() != returns.len() {
        return Err(FilterError::IndexMismatch);
    }
    let mut out = FilteredReturns::default();
    for (r, ratio) in ratios.ratios.iter().enumerate() {
        let t = ratios.first + r;
        if returns[t].len() != ratio.len() {
            return Err(FilterError::IndexMismatch);
        }
        out.indices.push(t);
        out.rows
            .push(returns[t].iter().zip(ratio).map(|(x, q)| x / q).collect());
    }
    Ok(out)
}

/// Days whose filtered return breaches `eta` of today's standard deviations in
/// at least `violations` factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeEventSet {
    pub eta: f64,
    pub violations: usize,
    pub indices: Vec<usize>,
    /// Violating factors for each entry of `indices`.
    pub violators: Vec<Vec<usize>>,
}

impl ExtremeEventSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }
}

pub fn detect_extreme_events(
    filtered: &FilteredReturns,
    today_var: &[f64],
    eta: f64,
    violations: usize,
) -> Result<ExtremeEventSet, FilterError> {
    if eta.is_nan() || eta <= 0.0 || violations == 0 {
        return Err(FilterError::InvalidThreshold);
    }
    let thresholds: Vec<f64> = today_var.iter().map(|v| eta * v.sqrt()).collect();
    let mut set = ExtremeEventSet {
        eta,
        violations,
        indices: Vec::new(),
        violators: Vec::new(),
    };
    for (t, row) in filtered.iter() {
        let hits: Vec<usize> = row
            .iter()
            .zip(&thresholds)
            .enumerate()
            .filter(|(_, (x, thr))| x.abs() >= **thr)
            .map(|(j, _)| j)
            .collect();
        if hits.len() >= violations {
            set.indices.push(t);
            set.violators.push(hits);
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPartition {
    pub diffusive: FilteredReturns,
    pub extreme: FilteredReturns,
}

pub fn partition_returns(
    filtered: &FilteredReturns,
    extremes: &ExtremeEventSet,
) -> Result<ReturnPartition, FilterError> {
    if extremes
        .indices
        .iter()
        .any(|t| filtered.position(*t).is_none())
    {
        return Err(FilterError::IndexMismatch);
    }
    let mut diffusive = FilteredReturns::default();
    let mut extreme = FilteredReturns::default();
    for (t, row) in filtered.iter() {
        let target = if extremes.contains(t) {
            &mut extreme
        } else {
            &mut diffusive
        };
        target.indices.push(t);
        target.rows.push(row.to_vec());
    }
    if diffusive.is_empty() {
        return Err(FilterError::AllReturnsExtreme);
    }
    Ok(ReturnPartition { diffusive, extreme })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub l_rescale: usize,
    pub l_extreme: usize,
    pub eta: f64,
    pub violations: usize,
    pub eps_var: f64,
    /// When false, directions are built from raw returns over the whole history.
    pub rescale: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            l_rescale: DEFAULT_L_RESCALE,
            l_extreme: DEFAULT_L_EXTREME,
            eta: DEFAULT_ETA,
            violations: DEFAULT_VIOLATIONS,
            eps_var: DEFAULT_EPS_VAR,
            rescale: true,
        }
    }
}

/// Everything the filtering stage produces for one history.
#[derive(Debug, Clone)]
pub struct FilterOutcome {
    /// Returns used for the diffusion directions and jump sizes.
    pub filtered: FilteredReturns,
    pub extremes: ExtremeEventSet,
    pub partition: ReturnPartition,
    /// Floored local variance at the last return, `l_rescale` window.
    pub today_var: Vec<f64>,
    /// Floored local variance at the last return, `l_extreme` window.
    pub today_var_extreme: Vec<f64>,
}

/// Runs the two-window filter: `l_rescale` ratios for the returns that build
/// the model, `l_extreme` ratios for extreme-event detection.
///
/// The partition covers the returns from index `max(l_rescale, l_extreme) - 1`
/// on, the ones both windows are defined for.
pub fn filter_history(
    returns: &[Vec<f64>],
    cfg: &FilterConfig,
) -> Result<FilterOutcome, FilterError> {
    let rescale_sv = sliding_variance(returns, cfg.l_rescale)?;
    let rescale_ratios = vol_ratio(&rescale_sv, cfg.eps_var);
    let filtered = if cfg.rescale {
        rescale_returns(returns, &rescale_ratios)?
    } else {
        let unit = VolRatioSeries::unit(0, returns.len(), rescale_ratios.today_var().to_vec());
        rescale_returns(returns, &unit)?
    };

    let extreme_sv = sliding_variance(returns, cfg.l_extreme)?;
    let extreme_ratios = vol_ratio(&extreme_sv, cfg.eps_var);
    let for_detection = rescale_returns(returns, &extreme_ratios)?;
    let extremes = detect_extreme_events(
        &for_detection,
        extreme_ratios.today_var(),
        cfg.eta,
        cfg.violations,
    )?;
    // only returns that went through the extreme test can be called diffusive
    let first_screened = extreme_ratios.first_index();
    let screened = FilteredReturns {
        indices: filtered
            .indices
            .iter()
            .copied()
            .filter(|t| *t >= first_screened)
            .collect(),
        rows: filtered
            .iter()
            .filter(|(t, _)| *t >= first_screened)
            .map(|(_, r)| r.to_vec())
            .collect(),
    };
    let partition = partition_returns(&screened, &extremes)?;

    Ok(FilterOutcome {
        filtered,
        extremes,
        partition,
        today_var: rescale_ratios.today_var().to_vec(),
        today_var_extreme: extreme_ratios.today_var().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|x| vec![*x]).collect()
    }

    #[test]
    fn partition_starts_where_both_windows_exist() {
        let returns: Vec<Vec<f64>> = (0..30)
            .map(|t| vec![((t * 7 % 5) as f64 - 2.0) * 1e-3])
            .collect();
        let cfg = FilterConfig {
            l_rescale: 4,
            l_extreme: 10,
            eta: 1e6,
            violations: 1,
            ..Default::default()
        };
        let out = filter_history(&returns, &cfg).unwrap();
        assert_eq!(out.filtered.indices[0], 3);
        assert_eq!(out.partition.diffusive.indices, (9..30).collect::<Vec<_>>());

        let all = FilterConfig { eta: 1e-12, ..cfg };
        let returns: Vec<Vec<f64>> = (0..30)
            .map(|t| vec![if t % 2 == 0 { 1e-3 } else { -2e-3 }])
            .collect();
        assert_eq!(
            filter_history(&returns, &all).unwrap_err(),
            FilterError::AllReturnsExtreme
        );
    }

    #[test]
    fn sliding_variance_by_hand() {
        let sv = sliding_variance(&col(&[2.0, 2.0]), 2).unwrap();
        assert_eq!(sv.values(), &[vec![4.0]]);

        let sv = sliding_variance(&col(&[3.0, 0.0, 0.0]), 2).unwrap();
        assert_eq!(sv.first_index(), 1);
        assert_eq!(sv.at(1).unwrap(), &[4.5]);
        assert_eq!(sv.today(), &[0.0]);

        let zeros = sliding_variance(&col(&[0.0; 5]), 3).unwrap();
        assert!(zeros.values().iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn sliding_variance_window_errors() {
        assert_eq!(
            sliding_variance(&col(&[1.0, 2.0]), 3),
            Err(FilterError::WindowTooLong {
                window: 3,
                available: 2
            })
        );
        assert_eq!(
            sliding_variance(&col(&[1.0]), 0),
            Err(FilterError::ZeroWindow)
        );
    }

    #[test]
    fn vol_ratio_cases() {
        let flat = sliding_variance(&col(&[1.0, -1.0, 1.0, -1.0]), 2).unwrap();
        assert!(vol_ratio(&flat, 1e-12)
            .ratios()
            .iter()
            .flatten()
            .all(|r| *r == 1.0));

        // sigma^(i) = 4, today = 1
        let sv = sliding_variance(&col(&[2.0, 2.0, 1.0, 1.0]), 2).unwrap();
        let vr = vol_ratio(&sv, 1e-12);
        assert_eq!(vr.ratios()[0], vec![2.0]);
        assert_eq!(vr.ratios().last().unwrap(), &vec![1.0]);

        let dead = sliding_variance(&col(&[0.0; 6]), 3).unwrap();
        assert!(vol_ratio(&dead, 1e-12)
            .ratios()
            .iter()
            .flatten()
            .all(|r| *r == 1.0));
    }

    #[test]
    fn rescaling_divides_by_ratio() {
        let returns = col(&[0.02, 0.0, 0.5]);
        let vr = VolRatioSeries {
            first: 1,
            ratios: vec![vec![2.0], vec![1.0]],
            today_var: vec![1.0],
            eps_var: 0.0,
        };
        let f = rescale_returns(&returns, &vr).unwrap();
        assert_eq!(f.indices, vec![1, 2]);
        assert_eq!(f.rows, vec![vec![0.0], vec![0.5]]);

        let vr = VolRatioSeries {
            first: 0,
            ratios: vec![vec![2.0]],
            today_var: vec![1.0],
            eps_var: 0.0,
        };
        assert_eq!(
            rescale_returns(&col(&[0.02]), &vr).unwrap().rows,
            vec![vec![0.01]]
        );
        assert_eq!(
            rescale_returns(&returns, &vr),
            Err(FilterError::IndexMismatch)
        );
    }

    #[test]
    fn extreme_detection_by_hand() {
        let filtered = FilteredReturns {
            indices: vec![5, 6],
            rows: vec![vec![5.0, 0.1], vec![0.5, -0.2]],
        };
        let today = [1.0, 1.0];
        let e = detect_extreme_events(&filtered, &today, 4.0, 1).unwrap();
        assert_eq!(e.indices, vec![5]);
        assert_eq!(e.violators, vec![vec![0]]);
        let e = detect_extreme_events(&filtered, &today, 4.0, 2).unwrap();
        assert!(e.is_empty());
        assert_eq!(
            detect_extreme_events(&filtered, &today, 0.0, 1),
            Err(FilterError::InvalidThreshold)
        );
    }

    #[test]
    fn partition_cases() {
        let filtered = FilteredReturns {
            indices: (10..20).collect(),
            rows: (0..10).map(|k| vec![k as f64]).collect(),
        };
        let mut ex = ExtremeEventSet {
            eta: 4.0,
            violations: 1,
            indices: vec![12, 17],
            violators: vec![vec![0], vec![0]],
        };
        let p = partition_returns(&filtered, &ex).unwrap();
        assert_eq!(p.diffusive.len(), 8);
        assert_eq!(p.extreme.indices, vec![12, 17]);

        ex.indices.clear();
        assert_eq!(
            partition_returns(&filtered, &ex).unwrap().diffusive.len(),
            10
        );

        ex.indices = (10..20).collect();
        assert_eq!(
            partition_returns(&filtered, &ex),
            Err(FilterError::AllReturnsExtreme)
        );

        ex.indices = vec![3];
        assert_eq!(
            partition_returns(&filtered, &ex),
            Err(FilterError::IndexMismatch)
        );
    }

    #[test]
    fn last_filtered_return_is_raw() {
        let returns: Vec<Vec<f64>> = (0..30)
            .map(|k| vec![((k * 7) % 5) as f64 - 2.0, (k as f64).sin()])
            .collect();
        let out = filter_history(
            &returns,
            &FilterConfig {
                l_rescale: 5,
                l_extreme: 8,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.filtered.len(), 30 - 5 + 1);
        assert_eq!(out.filtered.rows.last().unwrap(), returns.last().unwrap());
    }

    fn random_returns() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 30..60)
    }

    proptest! {
        #[test]
        fn extreme_sets_are_monotone(returns in random_returns()) {
            let sv = sliding_variance(&returns, 10).unwrap();
            let vr = vol_ratio(&sv, 1e-12);
            let f = rescale_returns(&returns, &vr).unwrap();
            let count = |eta, m| detect_extreme_events(&f, vr.today_var(), eta, m).unwrap();
            for m in 1..=3 {
                let strict = count(2.0, m);
                let loose = count(1.0, m);
                prop_assert!(strict.indices.iter().all(|t| loose.contains(*t)));
            }
            let one = count(1.5, 1);
            let two = count(1.5, 2);
            prop_assert!(two.indices.iter().all(|t| one.contains(*t)));
        }

        #[test]
        fn extremes_invariant_under_factor_scaling(
            returns in random_returns(),
            scale in prop::collection::vec(0.01f64..100.0, 3),
        ) {
            let scaled: Vec<Vec<f64>> = returns
                .iter()
                .map(|r| r.iter().zip(&scale).map(|(x, c)| x * c).collect())
                .collect();
            let cfg = FilterConfig { l_rescale: 5, l_extreme: 10, eta: 1.5, violations: 1, eps_var: 0.0, rescale: true };
            let a = filter_history(&returns, &cfg);
            let b = filter_history(&scaled, &cfg);
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.extremes.indices, b.extremes.indices),
                (Err(a), Err(b)) => prop_assert_eq!(a, b),
                _ => prop_assert!(false, "outcomes diverged"),
            }
        }
    }
}
