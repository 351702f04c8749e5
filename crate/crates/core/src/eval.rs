//! Success-rate evaluation, feature-subset sweeps, and histogram export.
//!
//! Rates are per true class: the fraction of that class's test samples the
//! classifier got right. Binary steps additionally report the mean of their
//! two class rates. A class absent from the test population yields an
//! absent rate, never a fabricated zero.

use crate::cir::PropagationClass;
use crate::pipeline::{
    split_by_pair, KernelConfig, LabeledSample, PipelineError, TwoStepClassifier,
};
use crate::svm::{train_with_features, SvmError, SvmModel, TrainConfig};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("bin count must be >= 1")]
    InvalidBinCount,
    #[error("histogram input is empty")]
    EmptyHistogramInput,
    #[error("histogram input contains a non-finite value")]
    NonFiniteValue,
    #[error("histogram range invalid: ({0}, {1})")]
    InvalidHistogramRange(f64, f64),
    #[error("mode {mode} needs {needs}")]
    InvalidMode { mode: EvalMode, needs: &'static str },
    #[error("unknown evaluation mode {0:?}")]
    UnknownMode(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Svm(#[from] SvmError),
}

/// What population and decision function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// LOS vs NLOS on the whole test set (step-1 model only).
    Step1,
    /// DP vs NDP on the true-NLOS test samples (step-2 model only).
    Step2TrueNlos,
    /// DP vs NDP on the samples step 1 sends to step 2.
    Step2PredictedNlos,
    /// Full three-class workflow with confusion matrix.
    Full3Class,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EvalMode::Step1 => "step1",
            EvalMode::Step2TrueNlos => "step2_true_nlos",
            EvalMode::Step2PredictedNlos => "step2_predicted_nlos",
            EvalMode::Full3Class => "full_3class",
        };
        f.write_str(s)
    }
}

impl FromStr for EvalMode {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s {
            "step1" => Ok(EvalMode::Step1),
            "step2_true_nlos" => Ok(EvalMode::Step2TrueNlos),
            "step2_predicted_nlos" => Ok(EvalMode::Step2PredictedNlos),
            "full_3class" => Ok(EvalMode::Full3Class),
            other => Err(EvalError::UnknownMode(other.to_string())),
        }
    }
}

/// Correct/total tally for one true class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCount {
    pub correct: usize,
    pub total: usize,
}

impl ClassCount {
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

/// Evaluation result; which rate fields are present depends on the mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRates {
    pub mode: EvalMode,
    /// `(class name, tally)` per true class of the evaluated population.
    pub per_class: Vec<(String, ClassCount)>,
    pub p_los: Option<f64>,
    pub p_nlos: Option<f64>,
    pub p_dp: Option<f64>,
    pub p_ndp: Option<f64>,
    /// Mean of the two class rates of a binary step.
    pub p_avg: Option<f64>,
    /// Rows = true LOS/DP/NDP, columns = predicted; full_3class only.
    pub confusion: Option<[[usize; 3]; 3]>,
    /// Macro-averaged per-class rate over the three classes. This is an
    /// extension beyond the pairwise step rates and is labeled as such in
    /// reports.
    pub macro_avg: Option<f64>,
}

impl SuccessRates {
    fn binary(mode: EvalMode, names: [&str; 2], counts: [ClassCount; 2]) -> Self {
        let rates = [counts[0].rate(), counts[1].rate()];
        let p_avg = match (rates[0], rates[1]) {
            (Some(a), Some(b)) => Some((a + b) / 2.0),
            _ => None,
        };
        let (p_los, p_nlos, p_dp, p_ndp) = match mode {
            EvalMode::Step1 => (rates[0], rates[1], None, None),
            _ => (None, None, rates[0], rates[1]),
        };
        Self {
            mode,
            per_class: names
                .iter()
                .zip(counts)
                .map(|(n, c)| (n.to_string(), c))
                .collect(),
            p_los,
            p_nlos,
            p_dp,
            p_ndp,
            p_avg,
            confusion: None,
            macro_avg: None,
        }
    }
}

/// What to evaluate: the composed workflow or a lone binary model.
#[derive(Debug, Clone, Copy)]
pub enum EvalTarget<'a> {
    TwoStep(&'a TwoStepClassifier),
    Single(&'a SvmModel),
}

/// Compute success rates for `target` over labeled samples.
pub fn evaluate(
    target: EvalTarget<'_>,
    samples: &[LabeledSample],
    mode: EvalMode,
) -> Result<SuccessRates, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    match mode {
        EvalMode::Step1 => {
            let model = match target {
                EvalTarget::TwoStep(c) => &c.step1,
                EvalTarget::Single(m) => m,
            };
            let mut los = ClassCount::default();
            let mut nlos = ClassCount::default();
            for s in samples {
                let predicted_nlos = model.predict(&s.features.as_array())?.label > 0;
                let tally = if s.class == PropagationClass::Los {
                    &mut los
                } else {
                    &mut nlos
                };
                tally.total += 1;
                if predicted_nlos == (s.class != PropagationClass::Los) {
                    tally.correct += 1;
                }
            }
            Ok(SuccessRates::binary(mode, ["LOS", "NLOS"], [los, nlos]))
        }
        EvalMode::Step2TrueNlos => {
            let model = match target {
                EvalTarget::TwoStep(c) => &c.step2,
                EvalTarget::Single(m) => m,
            };
            let mut dp = ClassCount::default();
            let mut ndp = ClassCount::default();
            for s in samples {
                let tally = match s.class {
                    PropagationClass::Los => continue,
                    PropagationClass::DpNlos => &mut dp,
                    PropagationClass::NdpNlos => &mut ndp,
                };
                let predicted_ndp = model.predict(&s.features.as_array())?.label > 0;
                tally.total += 1;
                if predicted_ndp == (s.class == PropagationClass::NdpNlos) {
                    tally.correct += 1;
                }
            }
            Ok(SuccessRates::binary(
                mode,
                ["DP_NLOS", "NDP_NLOS"],
                [dp, ndp],
            ))
        }
        EvalMode::Step2PredictedNlos => {
            let classifier = match target {
                EvalTarget::TwoStep(c) => c,
                EvalTarget::Single(_) => {
                    return Err(EvalError::InvalidMode {
                        mode,
                        needs: "a two-step classifier (step 1 builds the population)",
                    })
                }
            };
            let mut dp = ClassCount::default();
            let mut ndp = ClassCount::default();
            for s in samples {
                let row = s.features.as_array();
                if classifier.step1.predict(&row)?.label < 0 {
                    continue; // predicted LOS: never reaches step 2
                }
                let tally = match s.class {
                    PropagationClass::Los => continue, // no step-2 ground truth
                    PropagationClass::DpNlos => &mut dp,
                    PropagationClass::NdpNlos => &mut ndp,
                };
                let predicted_ndp = classifier.step2.predict(&row)?.label > 0;
                tally.total += 1;
                if predicted_ndp == (s.class == PropagationClass::NdpNlos) {
                    tally.correct += 1;
                }
            }
            Ok(SuccessRates::binary(
                mode,
                ["DP_NLOS", "NDP_NLOS"],
                [dp, ndp],
            ))
        }
        EvalMode::Full3Class => {
            let classifier = match target {
                EvalTarget::TwoStep(c) => c,
                EvalTarget::Single(_) => {
                    return Err(EvalError::InvalidMode {
                        mode,
                        needs: "a two-step classifier",
                    })
                }
            };
            let mut confusion = [[0usize; 3]; 3];
            for s in samples {
                let predicted = classifier.classify(&s.features)?;
                confusion[s.class.severity()][predicted.severity()] += 1;
            }
            let per_class: Vec<(String, ClassCount)> = PropagationClass::ALL
                .iter()
                .map(|class| {
                    let i = class.severity();
                    (
                        class.label().to_string(),
                        ClassCount {
                            correct: confusion[i][i],
                            total: confusion[i].iter().sum(),
                        },
                    )
                })
                .collect();
            let rates: Vec<f64> = per_class.iter().filter_map(|(_, c)| c.rate()).collect();
            let macro_avg =
                (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64);
            Ok(SuccessRates {
                mode,
                per_class,
                p_los: None,
                p_nlos: None,
                p_dp: None,
                p_ndp: None,
                p_avg: None,
                confusion: Some(confusion),
                macro_avg,
            })
        }
    }
}

fn fmt_rate(r: Option<f64>) -> String {
    match r {
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    }
}

/// Human-readable report, rates to four decimal places.
pub fn render_rates(rates: &SuccessRates) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mode: {}", rates.mode);
    for (name, count) in &rates.per_class {
        let _ = writeln!(
            out,
            "P_{:<9} = {:>6}  ({}/{})",
            name,
            fmt_rate(count.rate()),
            count.correct,
            count.total
        );
    }
    if let Some(p) = rates.p_avg {
        let _ = writeln!(out, "P_avg      = {p:.4}");
    }
    if let Some(confusion) = &rates.confusion {
        let _ = writeln!(out, "confusion matrix (rows = true, cols = predicted):");
        let _ = writeln!(
            out,
            "{:>10} {:>8} {:>8} {:>8}",
            "", "LOS", "DP_NLOS", "NDP_NLOS"
        );
        for class in PropagationClass::ALL {
            let row = confusion[class.severity()];
            let _ = writeln!(
                out,
                "{:>10} {:>8} {:>8} {:>8}",
                class.label(),
                row[0],
                row[1],
                row[2]
            );
        }
        if let Some(m) = rates.macro_avg {
            let _ = writeln!(out, "macro-averaged 3-class rate (extension) = {m:.4}");
        }
    }
    out
}

fn default_filter_subset() -> Vec<usize> {
    crate::pipeline::DEFAULT_STEP1_FEATURES.to_vec()
}

fn default_c() -> f64 {
    TrainConfig::default().c
}

fn default_tol() -> f64 {
    TrainConfig::default().tol
}

fn default_max_passes() -> usize {
    TrainConfig::default().max_passes
}

/// Which population step-2 sweep rows are scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step2SweepMode {
    TrueNlos,
    #[default]
    PredictedNlos,
}

/// Declarative sweep description, read from a JSON file by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub step1_subsets: Vec<Vec<usize>>,
    #[serde(default)]
    pub step2_subsets: Vec<Vec<usize>>,
    /// Step-1 model used to build the predicted-NLOS population for step-2
    /// rows.
    #[serde(default = "default_filter_subset")]
    pub step1_filter_subset: Vec<usize>,
    #[serde(default)]
    pub step2_mode: Step2SweepMode,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_passes")]
    pub max_passes: usize,
    /// Whole pairs assigned to the training side.
    pub train_pair_count: usize,
    #[serde(default)]
    pub seed: u64,
}

/// One evaluated subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub step: u8,
    pub subset: Vec<usize>,
    pub rates: Option<SuccessRates>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

/// Seed for one sweep row: FNV-1a over the step and subset contents mixed
/// with the global seed, so a row's numbers never depend on its position in
/// the spec file and adding rows never perturbs existing ones.
fn row_seed(step: u8, subset: &[usize], global: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: u64| {
        for byte in v.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    eat(step as u64);
    for &i in subset {
        eat(i as u64);
    }
    h ^ global
}

fn train_step_model(
    samples: &[LabeledSample],
    step: u8,
    subset: &[usize],
    spec: &SweepSpec,
) -> Result<SvmModel, SvmError> {
    let population: Vec<&LabeledSample> = match step {
        1 => samples.iter().collect(),
        _ => samples
            .iter()
            .filter(|s| s.class != PropagationClass::Los)
            .collect(),
    };
    let rows: Vec<Vec<f64>> = population
        .iter()
        .map(|s| s.features.as_array().to_vec())
        .collect();
    let negative = if step == 1 {
        PropagationClass::Los
    } else {
        PropagationClass::DpNlos
    };
    let labels: Vec<f64> = population
        .iter()
        .map(|s| if s.class == negative { -1.0 } else { 1.0 })
        .collect();
    let cfg = TrainConfig {
        c: spec.c,
        tol: spec.tol,
        max_passes: spec.max_passes,
        seed: row_seed(step, subset, spec.seed),
    };
    train_with_features(
        &rows,
        &labels,
        subset,
        &spec.kernel.resolve(subset.len()),
        &cfg,
    )
}

/// Train and evaluate one row per subset. A failing row is recorded with
/// its error instead of aborting the sweep.
pub fn sweep(spec: &SweepSpec, samples: &[LabeledSample]) -> Result<SweepReport, EvalError> {
    let (train, test) = split_by_pair(samples, spec.train_pair_count, spec.seed)?;
    let mut rows = Vec::new();

    for subset in &spec.step1_subsets {
        let row = train_step_model(&train, 1, subset, spec)
            .map_err(EvalError::from)
            .and_then(|model| evaluate(EvalTarget::Single(&model), &test, EvalMode::Step1));
        rows.push(match row {
            Ok(rates) => SweepRow {
                step: 1,
                subset: subset.clone(),
                rates: Some(rates),
                error: None,
            },
            Err(e) => SweepRow {
                step: 1,
                subset: subset.clone(),
                rates: None,
                error: Some(e.to_string()),
            },
        });
    }

    // The predicted-NLOS population needs a step-1 filter model; its seed
    // derives from its own subset so it matches the equivalent step-1 row.
    let filter_model =
        if spec.step2_subsets.is_empty() || spec.step2_mode == Step2SweepMode::TrueNlos {
            None
        } else {
            Some(
                train_step_model(&train, 1, &spec.step1_filter_subset, spec)
                    .map_err(EvalError::from)?,
            )
        };

    for subset in &spec.step2_subsets {
        let row = train_step_model(&train, 2, subset, spec)
            .map_err(EvalError::from)
            .and_then(|model| match (&filter_model, spec.step2_mode) {
                (Some(filter), Step2SweepMode::PredictedNlos) => {
                    let classifier = TwoStepClassifier {
                        step1: filter.clone(),
                        step2: model,
                    };
                    evaluate(
                        EvalTarget::TwoStep(&classifier),
                        &test,
                        EvalMode::Step2PredictedNlos,
                    )
                }
                _ => evaluate(EvalTarget::Single(&model), &test, EvalMode::Step2TrueNlos),
            });
        rows.push(match row {
            Ok(rates) => SweepRow {
                step: 2,
                subset: subset.clone(),
                rates: Some(rates),
                error: None,
            },
            Err(e) => SweepRow {
                step: 2,
                subset: subset.clone(),
                rates: None,
                error: Some(e.to_string()),
            },
        });
    }

    Ok(SweepReport { rows })
}

fn subset_text(subset: &[usize]) -> String {
    subset
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Aligned-text rendering of a sweep report.
pub fn render_sweep(report: &SweepReport) -> String {
    let mut out = String::new();
    for (step, head_a, head_b) in [(1u8, "P_LOS", "P_NLOS"), (2, "P_DP", "P_NDP")] {
        let rows: Vec<&SweepRow> = report.rows.iter().filter(|r| r.step == step).collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(out, "step {step}");
        let _ = writeln!(
            out,
            "{:<24} {:>8} {:>8} {:>8}",
            "features", head_a, head_b, "P_avg"
        );
        for row in rows {
            match (&row.rates, &row.error) {
                (Some(r), _) => {
                    let (a, b) = match step {
                        1 => (r.p_los, r.p_nlos),
                        _ => (r.p_dp, r.p_ndp),
                    };
                    let _ = writeln!(
                        out,
                        "{:<24} {:>8} {:>8} {:>8}",
                        subset_text(&row.subset),
                        fmt_rate(a),
                        fmt_rate(b),
                        fmt_rate(r.p_avg)
                    );
                }
                (None, Some(e)) => {
                    let _ = writeln!(out, "{:<24} FAILED: {e}", subset_text(&row.subset));
                }
                (None, None) => unreachable!("row has neither rates nor error"),
            }
        }
        let _ = writeln!(out);
    }
    out
}

/// Histogram with half-open bins; the last bin also includes its upper
/// edge. A value exactly on an interior edge belongs to the bin on its
/// right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bin_count + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Values outside the requested range, not counted in any bin.
    pub out_of_range: usize,
}

/// Bin `values` into `bin_count` equal-width bins over `range` (data
/// min..max when absent).
pub fn export_histogram(
    values: &[f64],
    bin_count: usize,
    range: Option<(f64, f64)>,
) -> Result<Histogram, EvalError> {
    if bin_count == 0 {
        return Err(EvalError::InvalidBinCount);
    }
    if values.is_empty() {
        return Err(EvalError::EmptyHistogramInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFiniteValue);
    }
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(EvalError::InvalidHistogramRange(lo, hi));
            }
            (lo, hi)
        }
        None => {
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        }
    };
    let width = (hi - lo) / bin_count as f64;
    let edges: Vec<f64> = (0..=bin_count)
        .map(|i| {
            if i == bin_count {
                hi
            } else {
                lo + i as f64 * width
            }
        })
        .collect();
    let mut counts = vec![0usize; bin_count];
    let mut out_of_range = 0usize;
    for &v in values {
        if v < lo || v > hi {
            out_of_range += 1;
            continue;
        }
        // number of interior edges <= v; puts edge values in the right bin
        let idx = edges[1..bin_count].iter().take_while(|&&e| e <= v).count();
        counts[idx] += 1;
    }
    Ok(Histogram {
        edges,
        counts,
        out_of_range,
    })
}

/// Columnar text: one `bin_lo bin_hi count` line per bin.
pub fn render_histogram(h: &Histogram) -> String {
    let mut out = String::new();
    for (i, &count) in h.counts.iter().enumerate() {
        let _ = writeln!(out, "{:e}\t{:e}\t{count}", h.edges[i], h.edges[i + 1]);
    }
    out
}
