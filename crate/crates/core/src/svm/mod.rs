//! From-scratch binary soft-margin SVM.
//!
//! Training solves the dual problem with pairwise multiplier updates (see
//! [`smo`]); prediction evaluates the kernel expansion over the retained
//! support vectors. Feature standardization is part of the model: a trained
//! model carries the per-feature mean/std fitted on its training split and
//! applies it to every row handed to [`SvmModel::predict`], because the raw
//! features span many orders of magnitude and margin geometry degenerates
//! without it.
//!
//! Models built through [`train`] consume rows as-is (identity
//! standardizer); [`train_with_features`] selects a feature subset from
//! wider rows, fits the standardizer, and packages everything so prediction
//! works on raw full-width rows.

mod smo;

use serde::{Deserialize, Serialize};

/// Model file format version accepted by [`SvmModel::load`].
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SvmError {
    #[error("training needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("rows and labels disagree: {rows} rows vs {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("labels must be -1 or +1, got {0}")]
    InvalidLabel(f64),
    #[error("degenerate labels: both classes must be present")]
    DegenerateLabels,
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedRows {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-finite value in row {0}")]
    NonFiniteInput(usize),
    #[error("zero-variance feature at column {0}")]
    ZeroVarianceFeature(usize),
    #[error("row has {row_len} features but the model needs feature index {index}")]
    MissingFeatures { index: usize, row_len: usize },
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("model parse error: {0}")]
    Parse(String),
    #[error("unsupported model version {found}, expected {expected}")]
    UnsupportedVersion { found: u32, expected: u32 },
}

/// Kernel function used for training and prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<(), SvmError> {
        match self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } if *gamma > 0.0 => Ok(()),
            KernelSpec::Rbf { gamma } => Err(SvmError::InvalidKernel(format!(
                "rbf gamma must be > 0, got {gamma}"
            ))),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelSpec::Rbf { gamma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * sq).exp()
            }
        }
    }
}

/// Solver hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Box constraint on the dual multipliers.
    pub c: f64,
    /// KKT tolerance; optimization stops once no example violates the
    /// conditions by more than this.
    pub tol: f64,
    /// Cap on optimization sweeps over the data.
    pub max_passes: usize,
    /// Seed for the randomized second-choice heuristic.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            max_passes: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.c > 0.0) {
            return Err(SvmError::InvalidConfig(format!(
                "C must be > 0, got {}",
                self.c
            )));
        }
        if !(self.tol > 0.0) {
            return Err(SvmError::InvalidConfig(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.max_passes == 0 {
            return Err(SvmError::InvalidConfig("max_passes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-feature mean and population std fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Pass-through standardizer (mean 0, std 1) for rows that are already
    /// in model space.
    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Fit per-feature mean/std (population convention) over the rows.
/// A constant column is an error naming the offending index.
pub fn fit_standardizer(rows: &[Vec<f64>]) -> Result<Standardizer, SvmError> {
    if rows.len() < 2 {
        return Err(SvmError::TooFewRows(rows.len()));
    }
    let dim = rows[0].len();
    validate_rows(rows, dim)?;
    let n = rows.len() as f64;
    let mut means = vec![0.0; dim];
    for row in rows {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut stds = vec![0.0; dim];
    for row in rows {
        for ((s, v), m) in stds.iter_mut().zip(row).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    for (j, s) in stds.iter_mut().enumerate() {
        *s = (*s / n).sqrt();
        if !(*s > 0.0) {
            return Err(SvmError::ZeroVarianceFeature(j));
        }
    }
    Ok(Standardizer { means, stds })
}

fn validate_rows(rows: &[Vec<f64>], dim: usize) -> Result<(), SvmError> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(SvmError::RaggedRows {
                row: i,
                got: row.len(),
                expected: dim,
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFiniteInput(i));
        }
    }
    Ok(())
}

/// Predicted side and raw decision score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// +1 or -1; a score of exactly 0 maps to +1, the positive class being
    /// the unsafe side by convention.
    pub label: i8,
    pub score: f64,
}

/// Trained binary classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub format_version: u32,
    pub kernel: KernelSpec,
    pub standardizer: Standardizer,
    /// 1-based indices into the rows handed to [`SvmModel::predict`].
    pub feature_indices: Vec<usize>,
    /// Support vectors in standardized model space.
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    /// Positions of the support vectors in the training set, for KKT audits.
    pub support_indices: Vec<usize>,
    /// Box constraint used at training.
    pub trained_c: f64,
    /// Whether the solver met the KKT conditions within its tolerance.
    pub converged: bool,
}

impl SvmModel {
    /// Select the model's features from a raw row.
    fn select(&self, row: &[f64]) -> Result<Vec<f64>, SvmError> {
        let mut out = Vec::with_capacity(self.feature_indices.len());
        for &index in &self.feature_indices {
            if index == 0 || index > row.len() {
                return Err(SvmError::MissingFeatures {
                    index,
                    row_len: row.len(),
                });
            }
            out.push(row[index - 1]);
        }
        Ok(out)
    }

    /// Kernel expansion over a point already in standardized model space.
    fn decision_in_model_space(&self, z: &[f64]) -> f64 {
        let mut score = self.bias;
        for (sv, coef) in self.support_vectors.iter().zip(&self.dual_coefs) {
            score += coef * self.kernel.eval(sv, z);
        }
        score
    }

    /// Decision score for a raw feature row.
    pub fn decision(&self, row: &[f64]) -> Result<f64, SvmError> {
        let z = self.standardizer.apply(&self.select(row)?);
        Ok(self.decision_in_model_space(&z))
    }

    /// Classify a raw feature row; score 0 resolves to the positive class.
    pub fn predict(&self, row: &[f64]) -> Result<Prediction, SvmError> {
        let score = self.decision(row)?;
        let label = if score >= 0.0 { 1 } else { -1 };
        Ok(Prediction { label, score })
    }

    /// Serialize as a versioned self-describing JSON document.
    pub fn save(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("model serialization cannot fail")
    }

    pub fn load(bytes: &[u8]) -> Result<Self, SvmError> {
        let model: SvmModel =
            serde_json::from_slice(bytes).map_err(|e| SvmError::Parse(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(SvmError::UnsupportedVersion {
                found: model.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        Ok(model)
    }
}

/// Train on rows that are already in model space (standardized by the
/// caller or naturally scaled). The returned model carries an identity
/// standardizer and consumes rows of the same width.
pub fn train(
    samples: &[Vec<f64>],
    labels: &[f64],
    kernel: &KernelSpec,
    cfg: &TrainConfig,
) -> Result<SvmModel, SvmError> {
    if samples.len() < 2 {
        return Err(SvmError::TooFewRows(samples.len()));
    }
    let dim = samples[0].len();
    package(
        samples.to_vec(),
        labels,
        kernel,
        cfg,
        Standardizer::identity(dim),
        (1..=dim).collect(),
    )
}

/// Select `feature_indices` (1-based) from raw rows, fit the standardizer
/// on the selection, and train. Prediction then accepts raw full-width rows.
pub fn train_with_features(
    rows: &[Vec<f64>],
    labels: &[f64],
    feature_indices: &[usize],
    kernel: &KernelSpec,
    cfg: &TrainConfig,
) -> Result<SvmModel, SvmError> {
    if rows.len() < 2 {
        return Err(SvmError::TooFewRows(rows.len()));
    }
    if feature_indices.is_empty() {
        return Err(SvmError::InvalidConfig(
            "feature_indices must be non-empty".into(),
        ));
    }
    let mut selected = Vec::with_capacity(rows.len());
    for row in rows {
        let mut out = Vec::with_capacity(feature_indices.len());
        for &index in feature_indices {
            if index == 0 || index > row.len() {
                return Err(SvmError::MissingFeatures {
                    index,
                    row_len: row.len(),
                });
            }
            out.push(row[index - 1]);
        }
        selected.push(out);
    }
    let standardizer = fit_standardizer(&selected)?;
    let standardized: Vec<Vec<f64>> = selected.iter().map(|r| standardizer.apply(r)).collect();
    package(
        standardized,
        labels,
        kernel,
        cfg,
        standardizer,
        feature_indices.to_vec(),
    )
}

fn package(
    standardized: Vec<Vec<f64>>,
    labels: &[f64],
    kernel: &KernelSpec,
    cfg: &TrainConfig,
    standardizer: Standardizer,
    feature_indices: Vec<usize>,
) -> Result<SvmModel, SvmError> {
    kernel.validate()?;
    cfg.validate()?;
    if standardized.len() != labels.len() {
        return Err(SvmError::LengthMismatch {
            rows: standardized.len(),
            labels: labels.len(),
        });
    }
    let dim = standardized[0].len();
    validate_rows(&standardized, dim)?;
    for &y in labels {
        if y != 1.0 && y != -1.0 {
            return Err(SvmError::InvalidLabel(y));
        }
    }
    if labels.iter().all(|&y| y > 0.0) || labels.iter().all(|&y| y < 0.0) {
        return Err(SvmError::DegenerateLabels);
    }

    let solution = smo::solve(&standardized, labels, kernel, cfg)?;

    let keep = 1e-12 * cfg.c;
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    let mut support_indices = Vec::new();
    for (i, &alpha) in solution.alphas.iter().enumerate() {
        if alpha > keep {
            support_vectors.push(standardized[i].clone());
            dual_coefs.push(alpha * labels[i]);
            support_indices.push(i);
        }
    }

    let model = SvmModel {
        format_version: MODEL_FORMAT_VERSION,
        kernel: *kernel,
        standardizer,
        feature_indices,
        support_vectors,
        dual_coefs,
        bias: solution.bias,
        support_indices,
        trained_c: cfg.c,
        converged: false,
    };
    // The convergence flag reports measured KKT satisfaction, not solver
    // loop exit status.
    let report = kkt_report(&model, &standardized, labels, cfg.tol, |m, z| {
        Ok(m.decision_in_model_space(z))
    })?;
    Ok(SvmModel {
        converged: report.satisfied,
        ..model
    })
}

/// Result of auditing a model against its training set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// Largest margin defect over all training points.
    pub max_violation: f64,
    /// True when no defect exceeds the tolerance.
    pub satisfied: bool,
}

/// Check the soft-margin KKT conditions of `model` against the rows it was
/// trained on (same row space as `predict` expects): points with zero
/// multiplier must sit on or outside the margin, bounded ones on or inside,
/// free ones on it.
pub fn verify_kkt(
    model: &SvmModel,
    rows: &[Vec<f64>],
    labels: &[f64],
    tol: f64,
) -> Result<KktReport, SvmError> {
    kkt_report(model, rows, labels, tol, |m, row| m.decision(row))
}

fn kkt_report(
    model: &SvmModel,
    rows: &[Vec<f64>],
    labels: &[f64],
    tol: f64,
    decision: impl Fn(&SvmModel, &[f64]) -> Result<f64, SvmError>,
) -> Result<KktReport, SvmError> {
    if rows.len() != labels.len() {
        return Err(SvmError::LengthMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let c = model.trained_c;
    let bound_eps = 1e-8 * c;
    let mut alphas = vec![0.0; rows.len()];
    for (pos, &i) in model.support_indices.iter().enumerate() {
        if i >= rows.len() {
            return Err(SvmError::InvalidConfig(format!(
                "support index {i} outside training set of {} rows",
                rows.len()
            )));
        }
        alphas[i] = model.dual_coefs[pos].abs();
    }
    let mut max_violation = 0.0_f64;
    for ((row, &y), &alpha) in rows.iter().zip(labels).zip(&alphas) {
        let yf = y * decision(model, row)?;
        let defect = if alpha <= bound_eps {
            1.0 - yf
        } else if alpha >= c - bound_eps {
            yf - 1.0
        } else {
            (yf - 1.0).abs()
        };
        max_violation = max_violation.max(defect);
    }
    Ok(KktReport {
        max_violation,
        satisfied: max_violation <= tol,
    })
}
