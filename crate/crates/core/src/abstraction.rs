//! Perception abstractions built from confusion-matrix counts.
//!
//! A confusion matrix row `k` counts how often inputs whose true state is
//! label `k` were classified as each label. Normalizing a row gives the
//! distribution over estimated states used in place of the camera and the
//! network. All probabilities are kept as exact integer ratios.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ratio::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbstractionError {
    #[error("state space needs at least one label")]
    EmptySpace,
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("line {line}: entry `{text}` is not an integer")]
    NonIntegerEntry { line: usize, text: String },
    #[error("line {line}: entry `{value}` is negative")]
    NegativeEntry { line: usize, value: i64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("row `{0}` has no observations; the abstraction for that state is undefined")]
    EmptyRow(String),
    #[error("guard counts out of order: {passed} passed of {total} total")]
    CountOverflowOrOrder { total: u64, passed: u64 },
}

/// Ordered set of distinct labels together with the `label -> index` map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl StateSpace {
    pub fn new<S: AsRef<str>>(labels: &[S]) -> Result<Self, AbstractionError> {
        if labels.is_empty() {
            return Err(AbstractionError::EmptySpace);
        }
        let mut index = HashMap::with_capacity(labels.len());
        let mut owned = Vec::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            let label = label.as_ref().trim().to_string();
            if index.insert(label.clone(), i).is_some() {
                return Err(AbstractionError::DuplicateLabel(label));
            }
            owned.push(label);
        }
        Ok(StateSpace { labels: owned, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> &str {
        &self.labels[k]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Integer encoding of label `k` inside a model: the label itself when
    /// every label is an integer, otherwise its position.
    pub fn value_of(&self, k: usize) -> i64 {
        if self.labels.iter().all(|l| l.parse::<i64>().is_ok()) {
            self.labels[k].parse().unwrap()
        } else {
            k as i64
        }
    }

    pub fn index_of_value(&self, value: i64) -> Option<usize> {
        (0..self.len()).find(|&k| self.value_of(k) == value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    space: StateSpace,
    counts: Vec<Vec<u64>>,
    total: u64,
}

impl ConfusionMatrix {
    pub fn new(space: StateSpace, counts: Vec<Vec<u64>>) -> Result<Self, AbstractionError> {
        let k = space.len();
        if counts.len() != k || counts.iter().any(|row| row.len() != k) {
            return Err(AbstractionError::DimensionMismatch(format!(
                "expected {k}x{k} counts"
            )));
        }
        let total = counts.iter().flatten().sum();
        Ok(ConfusionMatrix { space, counts, total })
    }

    /// Parses the CSV/TSV form whose first line carries the labels.
    pub fn from_csv(source: &str) -> Result<Self, AbstractionError> {
        let mut lines = source.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| AbstractionError::DimensionMismatch("empty input".into()))?;
        let labels: Vec<&str> = split_fields(header).collect();
        let space = StateSpace::new(&labels)?;
        load_confusion_matrix(source, &space)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row][col]
    }

    pub fn row_total(&self, row: usize) -> u64 {
        self.counts[row].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Writes the matrix back in the CSV form accepted by [`ConfusionMatrix::from_csv`].
    pub fn to_csv(&self) -> String {
        let mut out = self.space.labels().join(",");
        out.push('\n');
        for row in &self.counts {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn split_fields(line: &str) -> impl Iterator<Item = &str> {
    let delim = if line.contains('\t') { '\t' } else { ',' };
    line.split(delim).map(str::trim)
}

/// Reads a confusion matrix whose header must list the labels of `space` in order.
pub fn load_confusion_matrix(
    source: &str,
    space: &StateSpace,
) -> Result<ConfusionMatrix, AbstractionError> {
    let delimiter = if source.lines().next().is_some_and(|l| l.contains('\t')) {
        b'\t'
    } else {
        b','
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| AbstractionError::DimensionMismatch(e.to_string()))?
        .clone();
    let header: Vec<&str> = header.iter().collect();
    if header.len() != space.len() {
        return Err(AbstractionError::DimensionMismatch(format!(
            "header has {} labels, state space has {}",
            header.len(),
            space.len()
        )));
    }
    for (got, want) in header.iter().zip(space.labels()) {
        if got != want {
            return Err(AbstractionError::DimensionMismatch(format!(
                "header label `{got}` where `{want}` was expected"
            )));
        }
    }
    let mut counts = Vec::with_capacity(space.len());
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| AbstractionError::DimensionMismatch(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != space.len() {
            return Err(AbstractionError::DimensionMismatch(format!(
                "line {line} has {} columns, expected {}",
                record.len(),
                space.len()
            )));
        }
        let mut row = Vec::with_capacity(space.len());
        for field in record.iter() {
            let value: i64 = field.parse().map_err(|_| AbstractionError::NonIntegerEntry {
                line,
                text: field.to_string(),
            })?;
            if value < 0 {
                return Err(AbstractionError::NegativeEntry { line, value });
            }
            row.push(value as u64);
        }
        counts.push(row);
    }
    if counts.len() != space.len() {
        return Err(AbstractionError::DimensionMismatch(format!(
            "{} rows, expected {}",
            counts.len(),
            space.len()
        )));
    }
    ConfusionMatrix::new(space.clone(), counts)
}

/// Whether an abstraction was estimated on all inputs or only on those that
/// passed the run-time check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Unguarded,
    Guarded,
}

/// Row-stochastic map from true states to distributions over estimated states.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionAbstraction {
    space: StateSpace,
    counts: Vec<Vec<u64>>,
    row_obs: Vec<u64>,
    provenance: Provenance,
}

impl PerceptionAbstraction {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn row_obs(&self) -> &[u64] {
        &self.row_obs
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row][col]
    }

    pub fn prob(&self, row: usize, col: usize) -> Rational {
        ratio::frac(self.counts[row][col], self.row_obs[row])
    }

    pub fn prob_f64(&self, row: usize, col: usize) -> f64 {
        self.counts[row][col] as f64 / self.row_obs[row] as f64
    }

    pub fn row(&self, row: usize) -> Vec<Rational> {
        (0..self.space.len()).map(|c| self.prob(row, c)).collect()
    }

    /// Probability of estimating `to` when the true state is `from`, by label.
    pub fn prob_by_label(&self, from: &str, to: &str) -> Option<Rational> {
        Some(self.prob(self.space.index_of(from)?, self.space.index_of(to)?))
    }

    /// The paper-table rendering of a row: each entry rounded half-to-even.
    pub fn row_rounded(&self, row: usize, digits: usize) -> Vec<String> {
        self.row(row)
            .iter()
            .map(|p| ratio::round_half_even(p, digits))
            .collect()
    }

    pub fn to_json(&self) -> AbstractionJson {
        let k = self.space.len();
        AbstractionJson {
            labels: self.space.labels().to_vec(),
            provenance: self.provenance,
            row_obs: self.row_obs.clone(),
            rows: (0..k)
                .map(|r| {
                    (0..k)
                        .map(|c| {
                            let p = self.prob(r, c);
                            ProbJson {
                                num: p.numer().to_string(),
                                den: p.denom().to_string(),
                                value: ratio::to_f64(&p),
                                rounded: ratio::round_half_even(&p, 3),
                            }
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AbstractionJson {
    pub labels: Vec<String>,
    pub provenance: Provenance,
    pub row_obs: Vec<u64>,
    pub rows: Vec<Vec<ProbJson>>,
}

#[derive(Debug, Serialize)]
pub struct ProbJson {
    pub num: String,
    pub den: String,
    pub value: f64,
    pub rounded: String,
}

fn normalize(
    c: &ConfusionMatrix,
    provenance: Provenance,
) -> Result<PerceptionAbstraction, AbstractionError> {
    let row_obs: Vec<u64> = (0..c.space.len()).map(|k| c.row_total(k)).collect();
    if let Some(k) = row_obs.iter().position(|&n| n == 0) {
        return Err(AbstractionError::EmptyRow(c.space.label(k).to_string()));
    }
    Ok(PerceptionAbstraction {
        space: c.space.clone(),
        counts: c.counts.clone(),
        row_obs,
        provenance,
    })
}

/// Empirical abstraction: each row of counts divided by its total.
pub fn build_abstraction(c: &ConfusionMatrix) -> Result<PerceptionAbstraction, AbstractionError> {
    normalize(c, Provenance::Unguarded)
}

/// Same arithmetic as [`build_abstraction`], applied to the matrix computed
/// only over inputs that passed the run-time check.
pub fn build_guarded_abstraction(
    c_true: &ConfusionMatrix,
) -> Result<PerceptionAbstraction, AbstractionError> {
    normalize(c_true, Provenance::Guarded)
}

/// Pass rate of the run-time check over a labeled dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GuardStatistics {
    total: u64,
    passed: u64,
}

impl GuardStatistics {
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn passed(&self) -> u64 {
        self.passed
    }

    pub fn beta(&self) -> Rational {
        ratio::frac(self.passed, self.total)
    }

    pub fn beta_f64(&self) -> f64 {
        self.passed as f64 / self.total as f64
    }
}

impl fmt::Display for GuardStatistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.passed, self.total)
    }
}

pub fn estimate_beta(total: u64, passed: u64) -> Result<GuardStatistics, AbstractionError> {
    if total == 0 || passed > total {
        return Err(AbstractionError::CountOverflowOrOrder { total, passed });
    }
    Ok(GuardStatistics { total, passed })
}

/// Per-state tuple of observation counts for each outgoing estimate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationFunction {
    space: StateSpace,
    rows: Vec<Vec<u64>>,
}

impl ObservationFunction {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn row(&self, k: usize) -> &[u64] {
        &self.rows[k]
    }

    pub fn get(&self, label: &str) -> Option<&[u64]> {
        self.space.index_of(label).map(|k| self.rows[k].as_slice())
    }
}

pub fn observations_of(c: &ConfusionMatrix) -> ObservationFunction {
    ObservationFunction {
        space: c.space.clone(),
        rows: c.counts.clone(),
    }
}
