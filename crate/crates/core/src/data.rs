//! Historical risk-factor panels.
//!
//! A panel holds `K` dated observations of `J` risk factors laid out as one
//! flat state vector per date. The factor ordering is fixed: every forward
//! curve (domestic first, then the foreign currencies in order, each by
//! ascending tenor) followed by the log-FX rates of the foreign currencies.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default time tick: one business day out of 250.
pub const DEFAULT_DELTA: f64 = 1.0 / 250.0;

const TENOR_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("layout needs at least one currency")]
    NoCurrencies,
    #[error("currency {0} listed twice")]
    DuplicateCurrency(String),
    #[error("tenor grid must be non-empty, finite, strictly increasing and start at >= 0")]
    InvalidTenorGrid,
    #[error("state has length {found}, layout expects {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("panel has no observations")]
    EmptyPanel,
    #[error("first CSV column must be `date`, found `{0}`")]
    MissingDateColumn(String),
    #[error("column `{0}` does not match any factor of the layout")]
    UnknownColumn(String),
    #[error("column `{0}` appears more than once")]
    DuplicateColumn(String),
    #[error("layout factor `{0}` has no column in the CSV")]
    MissingColumn(String),
    #[error("missing cell at data row {row}, column `{column}`")]
    MissingCell { row: usize, column: String },
    #[error("cannot parse `{value}` at data row {row}, column `{column}`")]
    InvalidNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("non-finite value at data row {row}, column `{column}`")]
    NonFiniteValue { row: usize, column: String },
    #[error("cannot parse date `{value}` at data row {row}")]
    InvalidDate { row: usize, value: String },
    #[error("dates not strictly increasing at data row {row}")]
    NonMonotoneDates { row: usize },
    #[error("time tick must be positive and finite, got {0}")]
    InvalidDelta(f64),
    #[error("invalid layout config: {0}")]
    LayoutConfig(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What a single coordinate of the state vector represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorKind {
    /// Instantaneous forward rate of `currency` at grid tenor index `tenor`.
    ForwardRate { currency: usize, tenor: usize },
    /// Natural log of the spot price of one unit of `currency` in domestic units.
    LogFx { currency: usize },
}

impl FactorKind {
    pub fn is_rate(&self) -> bool {
        matches!(self, FactorKind::ForwardRate { .. })
    }
}

/// On-disk form of a layout: the currency list and the tenor grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSpec {
    pub currencies: Vec<String>,
    pub tenors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutSpec", into = "LayoutSpec")]
pub struct FactorLayout {
    currencies: Vec<String>,
    tenors: Vec<f64>,
    kinds: Vec<FactorKind>,
}

impl TryFrom<LayoutSpec> for FactorLayout {
    type Error = DataError;

    fn try_from(spec: LayoutSpec) -> Result<Self, DataError> {
        FactorLayout::new(spec.currencies, spec.tenors)
    }
}

impl From<FactorLayout> for LayoutSpec {
    fn from(layout: FactorLayout) -> Self {
        LayoutSpec {
            currencies: layout.currencies,
            tenors: layout.tenors,
        }
    }
}

impl FactorLayout {
    /// `currencies[0]` is the domestic currency.
    pub fn new(currencies: Vec<String>, tenors: Vec<f64>) -> Result<Self, DataError> {
        if currencies.is_empty() {
            return Err(DataError::NoCurrencies);
        }
        for (i, c) in currencies.iter().enumerate() {
            if currencies[..i].contains(c) {
                return Err(DataError::DuplicateCurrency(c.clone()));
            }
        }
        let grid_ok = !tenors.is_empty()
            && tenors.iter().all(|t| t.is_finite())
            && tenors[0] >= 0.0
            && tenors.windows(2).all(|w| w[1] > w[0]);
        if !grid_ok {
            return Err(DataError::InvalidTenorGrid);
        }

        let mut kinds = Vec::with_capacity(currencies.len() * (tenors.len() + 1));
        for currency in 0..currencies.len() {
            kinds
                .extend((0..tenors.len()).map(|tenor| FactorKind::ForwardRate { currency, tenor }));
        }
        kinds.extend((1..currencies.len()).map(|currency| FactorKind::LogFx { currency }));

        Ok(FactorLayout {
            currencies,
            tenors,
            kinds,
        })
    }

    /// Parses a layout config file (TOML `key = value` lines).
    ///
    /// ```text
    /// currencies = ["EUR", "USD"]
    /// tenors = [0.0, 0.5, 1.0, 2.0]
    /// ```
    pub fn from_config_str(text: &str) -> Result<Self, DataError> {
        let spec: LayoutSpec =
            toml::from_str(text).map_err(|e| DataError::LayoutConfig(e.to_string()))?;
        spec.try_into()
    }

    pub fn from_config_file(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text)
    }

    pub fn to_config_string(&self) -> String {
        let spec = LayoutSpec::from(self.clone());
        toml::to_string(&spec).expect("layout spec always serializes")
    }

    pub fn currencies(&self) -> &[String] {
        &self.currencies
    }

    pub fn tenors(&self) -> &[f64] {
        &self.tenors
    }

    pub fn kinds(&self) -> &[FactorKind] {
        &self.kinds
    }

    pub fn kind(&self, j: usize) -> FactorKind {
        self.kinds[j]
    }

    /// Total factor count `J = (p+1)·n + p`.
    pub fn n_factors(&self) -> usize {
        self.kinds.len()
    }

    pub fn n_tenors(&self) -> usize {
        self.tenors.len()
    }

    pub fn n_currencies(&self) -> usize {
        self.currencies.len()
    }

    /// Number of foreign currencies `p`.
    pub fn n_foreign(&self) -> usize {
        self.currencies.len() - 1
    }

    /// Index range of the forward curve of currency `alpha` inside a state vector.
    pub fn curve_range(&self, alpha: usize) -> Range<usize> {
        let n = self.tenors.len();
        alpha * n..(alpha + 1) * n
    }

    /// Index of the log-FX factor of foreign currency `alpha >= 1`.
    pub fn fx_index(&self, alpha: usize) -> usize {
        debug_assert!(alpha >= 1 && alpha < self.currencies.len());
        self.currencies.len() * self.tenors.len() + alpha - 1
    }

    pub fn currency_index(&self, code: &str) -> Option<usize> {
        self.currencies.iter().position(|c| c == code)
    }

    pub fn factor_name(&self, j: usize) -> String {
        match self.kinds[j] {
            FactorKind::ForwardRate { currency, tenor } => format!(
                "{}_f_{}",
                self.currencies[currency],
                format_tenor(self.tenors[tenor])
            ),
            FactorKind::LogFx { currency } => format!("{}_logfx", self.currencies[currency]),
        }
    }

    pub fn factor_names(&self) -> Vec<String> {
        (0..self.n_factors()).map(|j| self.factor_name(j)).collect()
    }

    /// Resolves a CSV column name to a factor index.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        if let Some(code) = name.strip_suffix("_logfx") {
            let alpha = self.currency_index(code)?;
            return (alpha >= 1).then(|| self.fx_index(alpha));
        }
        let (code, tenor) = name.split_once("_f_")?;
        let alpha = self.currency_index(code)?;
        let tenor: f64 = tenor.parse().ok()?;
        let k = self
            .tenors
            .iter()
            .position(|t| (t - tenor).abs() <= TENOR_MATCH_TOL)?;
        Some(self.curve_range(alpha).start + k)
    }
}

fn format_tenor(t: f64) -> String {
    format!("{t}")
}

/// Borrowed views of one state vector, split by layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StateView<'a> {
    pub curves: Vec<&'a [f64]>,
    pub log_fx: &'a [f64],
}

impl<'a> StateView<'a> {
    pub fn curve(&self, alpha: usize) -> &'a [f64] {
        self.curves[alpha]
    }

    /// Log-FX rate of foreign currency `alpha >= 1`.
    pub fn fx(&self, alpha: usize) -> f64 {
        self.log_fx[alpha - 1]
    }
}

pub fn slice_state<'a>(
    state: &'a [f64],
    layout: &FactorLayout,
) -> Result<StateView<'a>, DataError> {
    if state.len() != layout.n_factors() {
        return Err(DataError::LengthMismatch {
            expected: layout.n_factors(),
            found: state.len(),
        });
    }
    let curves = (0..layout.n_currencies())
        .map(|alpha| &state[layout.curve_range(alpha)])
        .collect();
    let fx_start = layout.n_currencies() * layout.n_tenors();
    Ok(StateView {
        curves,
        log_fx: &state[fx_start..],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoricalPanel {
    layout: FactorLayout,
    dates: Vec<NaiveDate>,
    values: Vec<Vec<f64>>,
    delta: f64,
}

impl HistoricalPanel {
    pub fn new(
        layout: FactorLayout,
        dates: Vec<NaiveDate>,
        values: Vec<Vec<f64>>,
        delta: f64,
    ) -> Result<Self, DataError> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(DataError::InvalidDelta(delta));
        }
        if values.is_empty() {
            return Err(DataError::EmptyPanel);
        }
        if dates.len() != values.len() {
            return Err(DataError::LengthMismatch {
                expected: values.len(),
                found: dates.len(),
            });
        }
        for (row, w) in dates.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(DataError::NonMonotoneDates { row: row + 2 });
            }
        }
        for (row, state) in values.iter().enumerate() {
            if state.len() != layout.n_factors() {
                return Err(DataError::LengthMismatch {
                    expected: layout.n_factors(),
                    found: state.len(),
                });
            }
            if let Some(j) = state.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFiniteValue {
                    row: row + 1,
                    column: layout.factor_name(j),
                });
            }
        }
        Ok(HistoricalPanel {
            layout,
            dates,
            values,
            delta,
        })
    }

    pub fn layout(&self) -> &FactorLayout {
        &self.layout
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of observations `K`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_factors(&self) -> usize {
        self.layout.n_factors()
    }

    /// The trailing sub-panel of `len` observations ending at row `end` (inclusive).
    pub fn window(&self, end: usize, len: usize) -> Option<HistoricalPanel> {
        if len == 0 || end >= self.len() || end + 1 < len {
            return None;
        }
        let start = end + 1 - len;
        Some(HistoricalPanel {
            layout: self.layout.clone(),
            dates: self.dates[start..=end].to_vec(),
            values: self.values[start..=end].to_vec(),
            delta: self.delta,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.layout.factor_names());
        w.write_record(&header)?;
        for (date, state) in self.dates.iter().zip(&self.values) {
            let mut record = Vec::with_capacity(state.len() + 1);
            record.push(date.format("%Y-%m-%d").to_string());
            record.extend(state.iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for HistoricalPanel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "panel K={} J={} ({} .. {})",
            self.len(),
            self.n_factors(),
            self.dates[0],
            self.dates[self.len() - 1]
        )
    }
}

/// Reads a panel from CSV. The first column is `date` (ISO-8601); the rest
/// are factor columns in any order, named `<CCY>_f_<tenor>` or `<CCY>_logfx`.
pub fn load_panel<R: Read>(
    source: R,
    layout: &FactorLayout,
    delta: f64,
) -> Result<HistoricalPanel, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = reader.headers()?.clone();
    let first = header.get(0).unwrap_or("");
    if first != "date" {
        return Err(DataError::MissingDateColumn(first.to_string()));
    }

    let mut column_to_factor = Vec::with_capacity(header.len() - 1);
    let mut seen: HashMap<usize, &str> = HashMap::new();
    for name in header.iter().skip(1) {
        let j = layout
            .column_index(name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))?;
        if seen.insert(j, name).is_some() {
            return Err(DataError::DuplicateColumn(name.to_string()));
        }
        column_to_factor.push(j);
    }
    if let Some(j) = (0..layout.n_factors()).find(|j| !seen.contains_key(j)) {
        return Err(DataError::MissingColumn(layout.factor_name(j)));
    }

    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 1;
        let raw_date = record.get(0).unwrap_or("");
        if raw_date.is_empty() {
            return Err(DataError::MissingCell {
                row,
                column: "date".to_string(),
            });
        }
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
            DataError::InvalidDate {
                row,
                value: raw_date.to_string(),
            }
        })?;
        if dates.last().is_some_and(|prev| *prev >= date) {
            return Err(DataError::NonMonotoneDates { row });
        }

        let mut state = vec![f64::NAN; layout.n_factors()];
        for (c, &j) in column_to_factor.iter().enumerate() {
            let column = || header.get(c + 1).unwrap_or_default().to_string();
            let cell = record.get(c + 1).unwrap_or("");
            if cell.is_empty() {
                return Err(DataError::MissingCell {
                    row,
                    column: column(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| DataError::InvalidNumber {
                row,
                column: column(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFiniteValue {
                    row,
                    column: column(),
                });
            }
            state[j] = v;
        }
        dates.push(date);
        values.push(state);
    }

    HistoricalPanel::new(layout.clone(), dates, values, delta)
}

pub fn load_panel_file(
    path: &Path,
    layout: &FactorLayout,
    delta: f64,
) -> Result<HistoricalPanel, DataError> {
    let file = std::fs::File::open(path)?;
    load_panel(std::io::BufReader::new(file), layout, delta)
}

/// Observed returns `Y_{i+1} - Y_i`, one row per consecutive pair of observations.
pub fn compute_returns(panel: &HistoricalPanel) -> Vec<Vec<f64>> {
    differences(panel.values())
}

pub(crate) fn differences(values: &[Vec<f64>]) -> Vec<Vec<f64>> {
    values
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect())
        .collect()
}

/// `n` consecutive weekdays starting at (or after) `start`.
pub fn business_dates(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_ccy() -> FactorLayout {
        FactorLayout::new(vec!["EUR".into(), "USD".into()], vec![0.0, 1.0]).unwrap()
    }

    fn one_ccy(n: usize) -> FactorLayout {
        FactorLayout::new(vec!["EUR".into()], (0..n).map(|k| k as f64).collect()).unwrap()
    }

    #[test]
    fn layout_counts_and_names() {
        let l = two_ccy();
        assert_eq!(l.n_factors(), 5);
        assert_eq!(
            l.factor_names(),
            vec!["EUR_f_0", "EUR_f_1", "USD_f_0", "USD_f_1", "USD_logfx"]
        );
        assert_eq!(l.column_index("USD_f_1.0"), Some(3));
        assert_eq!(l.column_index("EUR_logfx"), None);
        assert_eq!(l.fx_index(1), 4);
    }

    #[test]
    fn layout_rejects_bad_grids() {
        assert!(matches!(
            FactorLayout::new(vec!["EUR".into()], vec![1.0, 1.0]),
            Err(DataError::InvalidTenorGrid)
        ));
        assert!(matches!(
            FactorLayout::new(vec!["EUR".into()], vec![-0.5, 1.0]),
            Err(DataError::InvalidTenorGrid)
        ));
        assert!(matches!(
            FactorLayout::new(vec!["EUR".into(), "EUR".into()], vec![1.0]),
            Err(DataError::DuplicateCurrency(_))
        ));
        assert!(matches!(
            FactorLayout::new(vec![], vec![1.0]),
            Err(DataError::NoCurrencies)
        ));
    }

    #[test]
    fn layout_config_round_trip() {
        let l = two_ccy();
        let text = l.to_config_string();
        assert_eq!(FactorLayout::from_config_str(&text).unwrap(), l);
        assert!(
            FactorLayout::from_config_str("currencies = [\"EUR\"]\ntenors = [2.0, 1.0]").is_err()
        );
    }

    #[test]
    fn loads_small_panel() {
        let csv = "date,EUR_f_0,EUR_f_1\n2024-01-02,0.01,0.02\n2024-01-03,0.011,0.021\n2024-01-04,0.012,0.022\n";
        let p = load_panel(csv.as_bytes(), &one_ccy(2), DEFAULT_DELTA).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.n_factors(), 2);
        assert_eq!(p.state(2), &[0.012, 0.022]);
    }

    #[test]
    fn columns_may_come_in_any_order() {
        let csv = "date,EUR_f_1,EUR_f_0\n2024-01-02,0.02,0.01\n";
        let p = load_panel(csv.as_bytes(), &one_ccy(2), DEFAULT_DELTA).unwrap();
        assert_eq!(p.state(0), &[0.01, 0.02]);
    }

    #[test]
    fn rejects_out_of_order_dates() {
        let csv = "date,EUR_f_0,EUR_f_1\n2024-01-03,0.01,0.02\n2024-01-02,0.01,0.02\n";
        let err = load_panel(csv.as_bytes(), &one_ccy(2), DEFAULT_DELTA).unwrap_err();
        assert!(
            matches!(err, DataError::NonMonotoneDates { row: 2 }),
            "{err}"
        );
    }

    #[test]
    fn rejects_empty_cell() {
        let csv = "date,EUR_f_0,EUR_f_1\n2024-01-02,0.01,\n";
        match load_panel(csv.as_bytes(), &one_ccy(2), DEFAULT_DELTA).unwrap_err() {
            DataError::MissingCell { row, column } => {
                assert_eq!(row, 1);
                assert_eq!(column, "EUR_f_1");
            }
            e => panic!("unexpected {e}"),
        }
        let short = "date,EUR_f_0,EUR_f_1\n2024-01-02,0.01\n";
        assert!(matches!(
            load_panel(short.as_bytes(), &one_ccy(2), DEFAULT_DELTA),
            Err(DataError::MissingCell { .. })
        ));
    }

    #[test]
    fn rejects_unknown_and_missing_columns() {
        let csv = "date,EUR_f_0,EUR_f_7\n2024-01-02,0.01,0.02\n";
        assert!(matches!(
            load_panel(csv.as_bytes(), &one_ccy(2), DEFAULT_DELTA),
            Err(DataError::UnknownColumn(c)) if c == "EUR_f_7"
        ));
        let csv = "date,EUR_f_0\n2024-01-02,0.01\n";
        assert!(matches!(
            load_panel(csv.as_bytes(), &one_ccy(2), DEFAULT_DELTA),
            Err(DataError::MissingColumn(_))
        ));
    }

    #[test]
    fn rejects_non_finite() {
        let csv = "date,EUR_f_0,EUR_f_1\n2024-01-02,0.01,inf\n";
        assert!(matches!(
            load_panel(csv.as_bytes(), &one_ccy(2), DEFAULT_DELTA),
            Err(DataError::NonFiniteValue { row: 1, .. })
        ));
    }

    fn panel_from(values: Vec<Vec<f64>>, layout: FactorLayout) -> HistoricalPanel {
        let dates = business_dates(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), values.len());
        HistoricalPanel::new(layout, dates, values, DEFAULT_DELTA).unwrap()
    }

    #[test]
    fn returns_are_first_differences() {
        let p = panel_from(vec![vec![1.0, 2.0], vec![3.0, 5.0]], one_ccy(2));
        assert_eq!(compute_returns(&p), vec![vec![2.0, 3.0]]);

        let flat = panel_from(vec![vec![0.5, 0.5]; 4], one_ccy(2));
        let r = compute_returns(&flat);
        assert_eq!(r.len(), 3);
        assert!(r.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn slices_state_by_layout() {
        let state = [1.0, 2.0, 3.0, 4.0, 5.0];
        let v = slice_state(&state, &two_ccy()).unwrap();
        assert_eq!(v.curve(0), &[1.0, 2.0]);
        assert_eq!(v.curve(1), &[3.0, 4.0]);
        assert_eq!(v.log_fx, &[5.0]);
        assert_eq!(v.fx(1), 5.0);

        let single = [1.0, 2.0, 3.0];
        let v = slice_state(&single, &one_ccy(3)).unwrap();
        assert_eq!(v.curves.len(), 1);
        assert!(v.log_fx.is_empty());

        assert!(matches!(
            slice_state(&single, &two_ccy()),
            Err(DataError::LengthMismatch {
                expected: 5,
                found: 3
            })
        ));
    }

    #[test]
    fn business_dates_skip_weekends() {
        // 2024-01-05 is a Friday.
        let d = business_dates(NaiveDate::from_ymd_opt(2024, 1, 5).unwrap(), 2);
        assert_eq!(d[1], NaiveDate::from_ymd_opt(2024, 1, 8).unwrap());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 5), 1..20)
        ) {
            let p = panel_from(rows, two_ccy());
            let mut buf = Vec::new();
            p.write_csv(&mut buf).unwrap();
            let back = load_panel(buf.as_slice(), p.layout(), p.delta()).unwrap();
            prop_assert_eq!(back, p);
        }

        #[test]
        fn returns_telescope(
            rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 2..30)
        ) {
            let p = panel_from(rows.clone(), one_ccy(3));
            let r = compute_returns(&p);
            for j in 0..3 {
                let sum: f64 = r.iter().map(|row| row[j]).sum();
                let total = rows[rows.len() - 1][j] - rows[0][j];
                prop_assert!((sum - total).abs() <= 1e-12);
            }
        }

        #[test]
        fn views_concatenate_to_state(state in prop::collection::vec(-1.0f64..1.0, 5)) {
            let v = slice_state(&state, &two_ccy()).unwrap();
            let mut joined: Vec<f64> = v.curves.concat();
            joined.extend_from_slice(v.log_fx);
            prop_assert_eq!(joined, state);
        }
    }
}
