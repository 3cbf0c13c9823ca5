//! Independent validators: synthetic data with known dynamics, brute-force
//! estimators and distribution tests.
//!
//! Nothing here calls into the engine's numerical kernels. The geometric
//! factor, covariance sums and increments are recomputed from scratch so a
//! bug in the engine cannot hide behind an identical bug in its checker.

#![allow(clippy::needless_range_loop)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::data::{business_dates, DataError, FactorKind, FactorLayout, HistoricalPanel};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("correlation matrix is not a valid positive semidefinite correlation: {0}")]
    InvalidCorrelation(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Geometric factor used by the synthetic generator, applied to rate factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SyntheticSigma {
    Identity,
    SqrtLevel { floor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Independent log-normal levels; the panel stores log-levels.
    GeometricBrownian {
        vols: Vec<f64>,
        correlation: Vec<Vec<f64>>,
    },
    /// `dY = sum_i sigma(Y) . lambda_i dB^i` with known directions, no drift.
    ConstantDirection {
        directions: Vec<Vec<f64>>,
        sigma: SyntheticSigma,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub layout: FactorLayout,
    pub kind: SyntheticKind,
    /// Number of observations `K`.
    pub n_obs: usize,
    pub delta: f64,
    pub seed: u64,
    pub initial: Vec<f64>,
    /// Euler substeps per observation for the constant-direction generator.
    pub substeps: usize,
}

fn factor_matrix(correlation: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>, OracleError> {
    let bad = |m: &str| Err(OracleError::InvalidCorrelation(m.to_string()));
    if correlation.len() != n || correlation.iter().any(|r| r.len() != n) {
        return bad("wrong shape");
    }
    let c = DMatrix::from_fn(n, n, |i, j| correlation[i][j]);
    for i in 0..n {
        if (c[(i, i)] - 1.0).abs() > 1e-12 {
            return bad("diagonal must be 1");
        }
        for j in 0..n {
            if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 || c[(i, j)].abs() > 1.0 + 1e-12 {
                return bad("must be symmetric with entries in [-1, 1]");
            }
        }
    }
    let eig = SymmetricEigen::new(c);
    if eig.eigenvalues.iter().any(|l| *l < -1e-10) {
        return bad("negative eigenvalue");
    }
    let roots = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * roots)
}

/// Independent evaluation of the per-factor geometric multipliers.
pub fn sigma_multipliers(layout: &FactorLayout, sigma: SyntheticSigma, state: &[f64]) -> Vec<f64> {
    layout
        .kinds()
        .iter()
        .zip(state)
        .map(|(kind, level)| match (kind, sigma) {
            (FactorKind::ForwardRate { .. }, SyntheticSigma::SqrtLevel { floor }) => {
                if *level > floor {
                    level.sqrt()
                } else {
                    floor.sqrt()
                }
            }
            _ => 1.0,
        })
        .collect()
}

/// One exact draw of `n` increments of the constant-direction model over `dt`
/// starting from `state` (sigma frozen at `state`).
pub fn true_increments(
    layout: &FactorLayout,
    directions: &[Vec<f64>],
    sigma: SyntheticSigma,
    state: &[f64],
    dt: f64,
    n: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let m = sigma_multipliers(layout, sigma, state);
    (0..n)
        .map(|_| {
            let mut inc = vec![0.0; state.len()];
            for dir in directions {
                let b = rng.sample::<f64, _>(StandardNormal) * dt.sqrt();
                for j in 0..inc.len() {
                    inc[j] += m[j] * dir[j] * b;
                }
            }
            inc
        })
        .collect()
}

pub fn generate_synthetic_panel(spec: &SyntheticSpec) -> Result<HistoricalPanel, OracleError> {
    let j = spec.layout.n_factors();
    if spec.initial.len() != j {
        return Err(OracleError::InvalidSpec(format!(
            "initial state has length {}, layout has {j} factors",
            spec.initial.len()
        )));
    }
    if spec.n_obs == 0 || spec.delta.is_nan() || spec.delta <= 0.0 {
        return Err(OracleError::InvalidSpec(
            "need n_obs >= 1 and delta > 0".into(),
        ));
    }
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let mut values = Vec::with_capacity(spec.n_obs);
    values.push(spec.initial.clone());

    match &spec.kind {
        SyntheticKind::GeometricBrownian { vols, correlation } => {
            if vols.len() != j {
                return Err(OracleError::InvalidSpec("one vol per factor".into()));
            }
            let a = factor_matrix(correlation, j)?;
            let sd = spec.delta.sqrt();
            for _ in 1..spec.n_obs {
                let eps: Vec<f64> = (0..j).map(|_| rng.sample(StandardNormal)).collect();
                let prev = values.last().unwrap();
                let next = (0..j)
                    .map(|r| {
                        let z: f64 = (0..j).map(|c| a[(r, c)] * eps[c]).sum();
                        prev[r] - 0.5 * vols[r] * vols[r] * spec.delta + vols[r] * sd * z
                    })
                    .collect();
                values.push(next);
            }
        }
        SyntheticKind::ConstantDirection { directions, sigma } => {
            if directions.iter().any(|d| d.len() != j) {
                return Err(OracleError::InvalidSpec(
                    "direction length differs from J".into(),
                ));
            }
            let substeps = spec.substeps.max(1);
            let dt = spec.delta / substeps as f64;
            let sd = dt.sqrt();
            for _ in 1..spec.n_obs {
                let mut y = values.last().unwrap().clone();
                for _ in 0..substeps {
                    let m = sigma_multipliers(&spec.layout, *sigma, &y);
                    let mut inc = vec![0.0; j];
                    for dir in directions {
                        let b = rng.sample::<f64, _>(StandardNormal) * sd;
                        for k in 0..j {
                            inc[k] += m[k] * dir[k] * b;
                        }
                    }
                    y.iter_mut().zip(&inc).for_each(|(a, b)| *a += b);
                }
                values.push(y);
            }
        }
    }

    let dates = business_dates(
        chrono::NaiveDate::from_ymd_opt(2000, 1, 3).unwrap(),
        spec.n_obs,
    );
    Ok(HistoricalPanel::new(
        spec.layout.clone(),
        dates,
        values,
        spec.delta,
    )?)
}

/// `(1 / (delta * n)) * sum_t u_t u_t^T` with `u_t = transform(t, r_t)`.
pub fn covariance_estimator<F>(returns: &[Vec<f64>], transform: F, delta: f64) -> Vec<Vec<f64>>
where
    F: Fn(usize, &[f64]) -> Vec<f64>,
{
    let j = returns.first().map_or(0, Vec::len);
    let mut cov = vec![vec![0.0; j]; j];
    if returns.is_empty() {
        return cov;
    }
    for (t, r) in returns.iter().enumerate() {
        let u = transform(t, r);
        for a in 0..j {
            for b in 0..j {
                cov[a][b] += u[a] * u[b];
            }
        }
    }
    let norm = 1.0 / (delta * returns.len() as f64);
    cov.iter_mut().flatten().for_each(|c| *c *= norm);
    cov
}

/// `sum_i lambda_i lambda_i^T`.
pub fn outer_product_sum(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let j = vectors.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; j]; j];
    for v in vectors {
        for a in 0..j {
            for b in 0..j {
                out[a][b] += v[a] * v[b];
            }
        }
    }
    out
}

/// Unbiased sample covariance of the rows.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let j = rows.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; j];
    for r in rows {
        mean.iter_mut().zip(r).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![vec![0.0; j]; j];
    for r in rows {
        for a in 0..j {
            let da = r[a] - mean[a];
            for b in a..j {
                cov[a][b] += da * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..j {
        for b in a..j {
            cov[a][b] /= (n - 1) as f64;
            cov[b][a] = cov[a][b];
        }
    }
    cov
}

pub fn frobenius(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// `||estimate - truth||_F / ||truth||_F`.
pub fn relative_frobenius_error(estimate: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    let diff: Vec<Vec<f64>> = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    frobenius(&diff) / frobenius(truth)
}

pub fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mat = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    SymmetricEigen::new(mat).eigenvalues.min()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    /// Plain (non-excess) kurtosis; 3 for a Gaussian.
    pub kurtosis: f64,
}

pub fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    Moments {
        n: xs.len(),
        mean,
        variance: m2 * n / (n - 1.0),
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
    }
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 99% critical value `1.63 * sqrt((n + m) / (n m))`.
pub fn ks_critical_99(n: usize, m: usize) -> f64 {
    1.63 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorDistance {
    pub ks: f64,
    pub ks_critical_99: f64,
    pub mean_gap: f64,
    pub mean_gap_se: f64,
    pub variance_gap: f64,
    pub variance_gap_se: f64,
    pub skewness_gap: f64,
    pub skewness_gap_se: f64,
    pub kurtosis_gap: f64,
    pub kurtosis_gap_se: f64,
}

impl FactorDistance {
    pub fn ks_passes(&self) -> bool {
        self.ks <= self.ks_critical_99
    }
}

/// Per-factor KS statistics and moment gaps (`b - a`) with normal-theory
/// standard errors.
pub fn distribution_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<FactorDistance> {
    let j = a.first().map_or(0, Vec::len);
    let (na, nb) = (a.len(), b.len());
    (0..j)
        .map(|f| {
            let xa: Vec<f64> = a.iter().map(|r| r[f]).collect();
            let xb: Vec<f64> = b.iter().map(|r| r[f]).collect();
            let (ma, mb) = (moments(&xa), moments(&xb));
            let inv = 1.0 / na as f64 + 1.0 / nb as f64;
            FactorDistance {
                ks: ks_statistic(&xa, &xb),
                ks_critical_99: ks_critical_99(na, nb),
                mean_gap: mb.mean - ma.mean,
                mean_gap_se: (ma.variance / na as f64 + mb.variance / nb as f64).sqrt(),
                variance_gap: mb.variance - ma.variance,
                variance_gap_se: (2.0
                    * (ma.variance.powi(2) / na as f64 + mb.variance.powi(2) / nb as f64))
                    .sqrt(),
                skewness_gap: mb.skewness - ma.skewness,
                skewness_gap_se: (6.0 * inv).sqrt(),
                kurtosis_gap: mb.kurtosis - ma.kurtosis,
                kurtosis_gap_se: (24.0 * inv).sqrt(),
            }
        })
        .collect()
}

fn binomial_log_pmf(n: u64, p: f64, k: u64) -> f64 {
    let ln_choose: f64 = (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum();
    ln_choose + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()
}

/// Exact two-sided acceptance band `{lo, ..., hi}` for a Binomial(n, p) count
/// at the given level: each tail outside the band has mass at most `(1 - level) / 2`.
pub fn binomial_band(n: u64, p: f64, level: f64) -> (u64, u64) {
    let alpha = (1.0 - level) / 2.0;
    let pmf: Vec<f64> = (0..=n).map(|k| binomial_log_pmf(n, p, k).exp()).collect();
    let mut lo = 0;
    let mut below = 0.0;
    while lo < n && below + pmf[lo as usize] <= alpha {
        below += pmf[lo as usize];
        lo += 1;
    }
    let mut hi = n;
    let mut above = 0.0;
    while hi > 0 && above + pmf[hi as usize] <= alpha {
        above += pmf[hi as usize];
        hi -= 1;
    }
    (lo, hi)
}

/// Mardia's multivariate skewness statistic `n b_1 / 6` with its chi-square
/// degrees of freedom `J (J+1) (J+2) / 6` and 99% critical value.
pub fn mardia_skewness(rows: &[Vec<f64>]) -> (f64, f64, f64) {
    let n = rows.len();
    let j = rows[0].len();
    let cov = sample_covariance(rows);
    // ML covariance for the standardisation
    let s = DMatrix::from_fn(j, j, |a, b| cov[a][b] * (n - 1) as f64 / n as f64);
    let eig = SymmetricEigen::new(s);
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let mut mean = vec![0.0; j];
    for r in rows {
        mean.iter_mut().zip(r).for_each(|(m, x)| *m += x / n as f64);
    }
    let mut third = vec![0.0; j * j * j];
    for r in rows {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(x, m)| x - m).collect();
        let y: Vec<f64> = (0..j)
            .map(|a| (0..j).map(|b| inv_sqrt[(a, b)] * c[b]).sum())
            .collect();
        for a in 0..j {
            for b in 0..j {
                let ab = y[a] * y[b];
                for k in 0..j {
                    third[(a * j + b) * j + k] += ab * y[k];
                }
            }
        }
    }
    let b1 = third.iter().map(|t| t * t).sum::<f64>() / (n as f64 * n as f64);
    let stat = n as f64 * b1 / 6.0;
    let df = (j * (j + 1) * (j + 2)) as f64 / 6.0;
    let critical = ChiSquared::new(df).expect("df > 0").inverse_cdf(0.99);
    (stat, df, critical)
}

/// Pearson correlation of two equally long samples.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fx_layout(n_fx: usize) -> FactorLayout {
        let mut c = vec!["DOM".to_string()];
        c.extend((0..n_fx).map(|k| format!("F{k}")));
        FactorLayout::new(c, vec![0.0]).unwrap()
    }

    fn gbm_spec(
        vols: Vec<f64>,
        corr: Vec<Vec<f64>>,
        layout: FactorLayout,
        n: usize,
    ) -> SyntheticSpec {
        let j = layout.n_factors();
        SyntheticSpec {
            initial: vec![0.0; j],
            layout,
            kind: SyntheticKind::GeometricBrownian {
                vols,
                correlation: corr,
            },
            n_obs: n,
            delta: 1.0 / 250.0,
            seed: 17,
            substeps: 1,
        }
    }

    fn identity(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    #[test]
    fn zero_vol_gbm_is_constant() {
        let l = fx_layout(0);
        let p = generate_synthetic_panel(&gbm_spec(vec![0.0], identity(1), l, 20)).unwrap();
        assert!(p.values().iter().all(|r| r[0] == 0.0));
    }

    #[test]
    fn gbm_log_return_std() {
        let l = fx_layout(0);
        let n = 10_001;
        let p = generate_synthetic_panel(&gbm_spec(vec![0.2], identity(1), l, n)).unwrap();
        let r: Vec<f64> = p.values().windows(2).map(|w| w[1][0] - w[0][0]).collect();
        let sd = moments(&r).variance.sqrt();
        let target = 0.2 * (1.0f64 / 250.0).sqrt();
        // std of a sample std is about sd / sqrt(2n)
        let se = target / (2.0 * r.len() as f64).sqrt();
        assert!((sd - target).abs() <= 3.0 * se, "{sd} vs {target}");
    }

    #[test]
    fn unit_correlation_gives_identical_moves() {
        let l = fx_layout(1); // DOM_f_0, F0_f_0, F0_logfx
        let corr = vec![vec![1.0; 3]; 3];
        let p = generate_synthetic_panel(&gbm_spec(vec![0.1; 3], corr, l, 500)).unwrap();
        let r: Vec<Vec<f64>> = p
            .values()
            .windows(2)
            .map(|w| vec![w[1][0] - w[0][0], w[1][1] - w[0][1]])
            .collect();
        let a: Vec<f64> = r.iter().map(|x| x[0]).collect();
        let b: Vec<f64> = r.iter().map(|x| x[1]).collect();
        assert!(correlation(&a, &b) > 1.0 - 1e-10);
    }

    #[test]
    fn invalid_correlation_rejected() {
        let l = fx_layout(0);
        let j = l.n_factors();
        assert_eq!(j, 1);
        let spec = gbm_spec(vec![0.1], vec![vec![2.0]], l, 5);
        assert!(matches!(
            generate_synthetic_panel(&spec),
            Err(OracleError::InvalidCorrelation(_))
        ));
        let l = fx_layout(1);
        let bad = vec![
            vec![1.0, 0.9, -0.9],
            vec![0.9, 1.0, 0.9],
            vec![-0.9, 0.9, 1.0],
        ];
        assert!(matches!(
            generate_synthetic_panel(&gbm_spec(vec![0.1; 3], bad, l, 5)),
            Err(OracleError::InvalidCorrelation(_))
        ));
    }

    #[test]
    fn estimator_by_hand() {
        let v = vec![0.1, -0.2];
        let returns = vec![v.clone(); 7];
        let c = covariance_estimator(&returns, |_, r| r.to_vec(), 0.5);
        assert!((c[0][1] - (-0.02 / 0.5)).abs() < 1e-15);
        assert!((c[1][1] - 0.04 / 0.5).abs() < 1e-15);
        let z = covariance_estimator(&vec![vec![0.0, 0.0]; 4], |_, r| r.to_vec(), 0.5);
        assert!(z.iter().flatten().all(|x| *x == 0.0));
    }

    #[test]
    fn estimator_is_psd() {
        let mut rng = StdRng::seed_from_u64(4);
        let returns: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..6).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let c = covariance_estimator(&returns, |_, r| r.to_vec(), 1.0 / 250.0);
        let scale = frobenius(&c);
        assert!(min_eigenvalue(&c) >= -1e-10 * scale);
        for a in 0..6 {
            for b in 0..6 {
                assert_eq!(c[a][b], c[b][a]);
            }
        }
    }

    #[test]
    fn ks_cases() {
        let mut rng = StdRng::seed_from_u64(1);
        let a: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![rng.sample(StandardNormal)])
            .collect();
        let b: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![rng.sample(StandardNormal)])
            .collect();
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        let d = distribution_distance(&a, &b)[0];
        assert!(d.ks_passes(), "{d:?}");
        assert!((d.ks_critical_99 - 1.63 * (2.0f64 / 10_000.0).sqrt()).abs() < 1e-15);

        let shifted: Vec<Vec<f64>> = b.iter().map(|r| vec![r[0] + 1.0]).collect();
        let d = distribution_distance(&a, &shifted)[0];
        assert!((d.mean_gap - 1.0).abs() < 5.0 * d.mean_gap_se);
        assert!(!d.ks_passes());
    }

    #[test]
    fn binomial_bands() {
        assert_eq!(binomial_band(250, 0.01, 0.99), (0, 7));
        assert_eq!(binomial_band(5000, 0.02, 0.99), (75, 126));
    }

    #[test]
    fn mardia_accepts_gaussian_rejects_skewed() {
        let mut rng = StdRng::seed_from_u64(2);
        let g: Vec<Vec<f64>> = (0..5000)
            .map(|_| (0..3).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let (stat, df, crit) = mardia_skewness(&g);
        assert_eq!(df, 10.0);
        assert!(stat < crit, "{stat} vs {crit}");
        let skewed: Vec<Vec<f64>> = g
            .iter()
            .map(|r| r.iter().map(|x: &f64| x.exp()).collect())
            .collect();
        let (stat, _, crit) = mardia_skewness(&skewed);
        assert!(stat > crit);
    }
}
