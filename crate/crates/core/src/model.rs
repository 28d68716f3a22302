//! Shared domain types: datasets, score matrices and their normalized and
//! logit-transformed views.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{invalid, Error, Result};

/// Default clamp margin for [`normalize_columns`].
pub const DEFAULT_EPSILON: f64 = 0.005;

/// A feature matrix with optional binary anomaly labels (1 = anomaly).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    name: String,
    feature_names: Vec<String>,
    features: Array2<f64>,
    labels: Option<Vec<u8>>,
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let names = (1..=features.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_feature_names(name, names, features, labels)
    }

    pub fn with_feature_names(
        name: impl Into<String>,
        feature_names: Vec<String>,
        features: Array2<f64>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n < 2 {
            return invalid(format!("dataset needs at least 2 observations, got {n}"));
        }
        if d < 1 {
            return invalid("dataset needs at least 1 feature");
        }
        if feature_names.len() != d {
            return invalid(format!(
                "{} feature names for {d} feature columns",
                feature_names.len()
            ));
        }
        check_finite(features.view(), &feature_names)?;
        if let Some(labels) = &labels {
            if labels.len() != n {
                return invalid(format!("{} labels for {n} observations", labels.len()));
            }
            if let Some(bad) = labels.iter().find(|&&l| l > 1) {
                return invalid(format!("labels must be 0 or 1, found {bad}"));
            }
            if !labels.contains(&0) {
                return invalid("labels must contain at least one 0");
            }
        }
        Ok(Self {
            name: name.into(),
            feature_names,
            features,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn n_obs(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }
}

/// Raw anomaly scores: one row per observation, one column per detector.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    scores: Array2<f64>,
    detector_names: Vec<String>,
}

impl ScoreMatrix {
    pub fn new(scores: Array2<f64>, detector_names: Vec<String>) -> Result<Self> {
        if scores.ncols() != detector_names.len() {
            return invalid(format!(
                "{} detector names for {} score columns",
                detector_names.len(),
                scores.ncols()
            ));
        }
        if scores.nrows() == 0 {
            return invalid("score matrix has no rows");
        }
        check_finite(scores.view(), &detector_names)?;
        Ok(Self {
            scores,
            detector_names,
        })
    }

    /// Builds a matrix from per-detector score vectors of equal length.
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.1.len());
        if let Some((name, col)) = columns.iter().find(|c| c.1.len() != n) {
            return invalid(format!(
                "column `{name}` has {} rows, expected {n}",
                col.len()
            ));
        }
        let mut scores = Array2::zeros((n, columns.len()));
        let mut names = Vec::with_capacity(columns.len());
        for (j, (name, col)) in columns.into_iter().enumerate() {
            scores.column_mut(j).assign(&ArrayView1::from(&col));
            names.push(name);
        }
        Self::new(scores, names)
    }

    pub fn scores(&self) -> ArrayView2<'_, f64> {
        self.scores.view()
    }

    pub fn detector_names(&self) -> &[String] {
        &self.detector_names
    }

    pub fn n_obs(&self) -> usize {
        self.scores.nrows()
    }

    pub fn n_detectors(&self) -> usize {
        self.scores.ncols()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.scores.column(j)
    }
}

/// Scores min-max scaled per column into `[epsilon, 1 - epsilon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedScores {
    values: Array2<f64>,
    epsilon: f64,
}

impl NormalizedScores {
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

/// Log-odds of normalized scores, `z = ln(x / (1 - x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitScores {
    values: Array2<f64>,
}

impl LogitScores {
    /// Wraps an arbitrary finite matrix of logit responses.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let names: Vec<String> = (0..values.ncols()).map(|j| format!("z{j}")).collect();
        check_finite(values.view(), &names)?;
        Ok(Self { values })
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.values.ncols()
    }

    /// Inverse transform back to the unit interval.
    pub fn to_unit(&self) -> Array2<f64> {
        self.values.mapv(sigmoid)
    }
}

/// One combined score per observation, tagged with the method that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub method: String,
    pub scores: Vec<f64>,
    pub params: BTreeMap<String, String>,
}

impl EnsembleResult {
    pub fn new(method: impl Into<String>, scores: Vec<f64>) -> Self {
        Self {
            method: method.into(),
            scores,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.params.insert(key.into(), value.to_string());
        self
    }
}

fn check_finite(m: ArrayView2<'_, f64>, names: &[String]) -> Result<()> {
    for (j, col) in m.axis_iter(Axis(1)).enumerate() {
        if let Some(row) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                column: names[j].clone(),
                row,
            });
        }
    }
    Ok(())
}

/// Min-max scales one column onto `[epsilon, 1 - epsilon]`.
///
/// A constant column maps to 0.5 everywhere.
pub fn normalize_column(col: ArrayView1<'_, f64>, epsilon: f64) -> Vec<f64> {
    let (lo, hi) = col
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.5; col.len()];
    }
    let span = 1.0 - 2.0 * epsilon;
    col.iter()
        .map(|&v| epsilon + span * ((v - lo) / range))
        .collect()
}

pub fn normalize_columns(m: &ScoreMatrix, epsilon: f64) -> Result<NormalizedScores> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return invalid(format!("epsilon must lie in (0, 0.5), got {epsilon}"));
    }
    check_finite(m.scores(), m.detector_names())?;
    let mut values = Array2::zeros(m.scores.dim());
    for (j, col) in m.scores.axis_iter(Axis(1)).enumerate() {
        let scaled = normalize_column(col, epsilon);
        values.column_mut(j).assign(&ArrayView1::from(&scaled));
    }
    Ok(NormalizedScores { values, epsilon })
}

pub fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn to_logit(x: &NormalizedScores) -> LogitScores {
    LogitScores {
        values: x.values.mapv(logit),
    }
}
