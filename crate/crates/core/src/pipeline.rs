//! Labeling from ranging bias, pair-wise train/test splitting, and the
//! two-step classification workflow.
//!
//! Step 1 separates LOS from NLOS; waveforms falling on the NLOS side are
//! passed to step 2, which decides whether the direct path component was
//! present (DP) or absent (NDP). Each step is an independent binary SVM
//! with its own feature subset, trained on ground-truth populations: step 2
//! trains on true-NLOS samples so its quality is not coupled to step-1
//! errors, while evaluation composes the steps.
//!
//! Ties at either decision boundary fall toward the "unsafe" side (NLOS,
//! then NDP), since those are the measurements a positioning system would
//! rather exclude.

use crate::cir::{PropagationClass, RangingRecord};
use crate::features::{extract_features, FeatureConfig, FeatureError, FeatureVector};
use crate::svm::{train_with_features, KernelSpec, SvmError, SvmModel, TrainConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Classifier bundle file format version.
pub const BUNDLE_FORMAT_VERSION: u32 = 1;

/// Default step-1 feature subset (received-to-first-path ratio, mean excess
/// delay, delay spread).
pub const DEFAULT_STEP1_FEATURES: [usize; 3] = [2, 4, 5];
/// Default step-2 feature subset (energy, mean excess delay, pre-first-path
/// variance).
pub const DEFAULT_STEP2_FEATURES: [usize; 3] = [3, 4, 10];

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("implausible bias {0} m: more negative than the LOS threshold allows")]
    ImplausibleBias(f64),
    #[error("bias must be finite, got {0}")]
    NonFiniteBias(f64),
    #[error("invalid thresholds: need 0 < los_max < dp_max, got los_max {los_max_bias_m}, dp_max {dp_max_bias_m}")]
    InvalidThresholds {
        los_max_bias_m: f64,
        dp_max_bias_m: f64,
    },
    #[error("record from pair {0} has neither a label nor a bias to derive one from")]
    MissingLabel(String),
    #[error(
        "train_pair_count must satisfy 1 <= count < distinct pairs ({pairs}), got {requested}"
    )]
    InvalidTrainPairCount { requested: usize, pairs: usize },
    #[error("{side} split lacks class {class}; try another seed or train_pair_count")]
    SplitLacksClass {
        side: &'static str,
        class: PropagationClass,
    },
    #[error("feature indices must be non-empty and within 1..=10, got {0:?}")]
    InvalidFeatureIndices(Vec<usize>),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Bias thresholds separating the three classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelingThresholds {
    pub los_max_bias_m: f64,
    pub dp_max_bias_m: f64,
}

impl Default for LabelingThresholds {
    fn default() -> Self {
        Self {
            los_max_bias_m: 0.05,
            dp_max_bias_m: 0.70,
        }
    }
}

impl LabelingThresholds {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0 < self.los_max_bias_m && self.los_max_bias_m < self.dp_max_bias_m) {
            return Err(PipelineError::InvalidThresholds {
                los_max_bias_m: self.los_max_bias_m,
                dp_max_bias_m: self.dp_max_bias_m,
            });
        }
        Ok(())
    }
}

/// Map a measured ranging bias to a propagation class.
///
/// Strictly below the LOS threshold is LOS, up to and including the DP
/// threshold is DP-NLOS, above it NDP-NLOS. Small negative biases (within
/// the LOS threshold) are measurement noise around zero and count as LOS;
/// anything more negative is rejected as implausible.
pub fn label_from_bias(
    bias_m: f64,
    th: &LabelingThresholds,
) -> Result<PropagationClass, PipelineError> {
    th.validate()?;
    if !bias_m.is_finite() {
        return Err(PipelineError::NonFiniteBias(bias_m));
    }
    if bias_m < -th.los_max_bias_m {
        return Err(PipelineError::ImplausibleBias(bias_m));
    }
    if bias_m < th.los_max_bias_m {
        Ok(PropagationClass::Los)
    } else if bias_m <= th.dp_max_bias_m {
        Ok(PropagationClass::DpNlos)
    } else {
        Ok(PropagationClass::NdpNlos)
    }
}

/// Feature vector with its ground-truth class and origin pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub class: PropagationClass,
    pub pair_id: String,
}

/// Extract features and resolve ground truth for each record. An explicit
/// label wins; otherwise the class is derived from the bias.
pub fn build_samples(
    records: &[RangingRecord],
    cfg: &FeatureConfig,
    th: &LabelingThresholds,
) -> Result<Vec<LabeledSample>, PipelineError> {
    records
        .iter()
        .map(|rec| {
            let class = match (rec.label, rec.bias_m) {
                (Some(label), _) => label,
                (None, Some(bias)) => label_from_bias(bias, th)?,
                (None, None) => return Err(PipelineError::MissingLabel(rec.pair_id.clone())),
            };
            Ok(LabeledSample {
                features: extract_features(rec, cfg)?,
                class,
                pair_id: rec.pair_id.clone(),
            })
        })
        .collect()
}

/// Assign whole pairs to either side so no pair leaks across the split;
/// both sides must end up with all three classes.
pub fn split_by_pair(
    samples: &[LabeledSample],
    train_pair_count: usize,
    seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>), PipelineError> {
    let mut pair_ids: Vec<&str> = samples.iter().map(|s| s.pair_id.as_str()).collect();
    pair_ids.sort_unstable();
    pair_ids.dedup();
    if train_pair_count == 0 || train_pair_count >= pair_ids.len() {
        return Err(PipelineError::InvalidTrainPairCount {
            requested: train_pair_count,
            pairs: pair_ids.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pair_ids.shuffle(&mut rng);
    let train_pairs: std::collections::BTreeSet<&str> =
        pair_ids[..train_pair_count].iter().copied().collect();

    let mut train = Vec::new();
    let mut test = Vec::new();
    for s in samples {
        if train_pairs.contains(s.pair_id.as_str()) {
            train.push(s.clone());
        } else {
            test.push(s.clone());
        }
    }
    for (side, name) in [(&train, "train"), (&test, "test")] {
        for class in PropagationClass::ALL {
            if !side.iter().any(|s| s.class == class) {
                return Err(PipelineError::SplitLacksClass { side: name, class });
            }
        }
    }
    Ok((train, test))
}

/// Kernel choice where the RBF width may be left to the default
/// `1 / feature_count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelConfig {
    Linear,
    Rbf { gamma: Option<f64> },
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig::Rbf { gamma: None }
    }
}

impl KernelConfig {
    pub fn resolve(&self, feature_count: usize) -> KernelSpec {
        match self {
            KernelConfig::Linear => KernelSpec::Linear,
            KernelConfig::Rbf { gamma: Some(g) } => KernelSpec::Rbf { gamma: *g },
            KernelConfig::Rbf { gamma: None } => KernelSpec::Rbf {
                gamma: 1.0 / feature_count.max(1) as f64,
            },
        }
    }
}

/// The composed LOS/NLOS then DP/NDP classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepClassifier {
    pub step1: SvmModel,
    pub step2: SvmModel,
}

impl TwoStepClassifier {
    pub fn step1_features(&self) -> &[usize] {
        &self.step1.feature_indices
    }

    pub fn step2_features(&self) -> &[usize] {
        &self.step2.feature_indices
    }

    /// Run the workflow: LOS-side step-1 decisions short-circuit; otherwise
    /// step 2 picks DP vs NDP. Boundary scores fall to NLOS and then NDP.
    pub fn classify(&self, fv: &FeatureVector) -> Result<PropagationClass, PipelineError> {
        let row = fv.as_array();
        if self.step1.predict(&row)?.label < 0 {
            return Ok(PropagationClass::Los);
        }
        if self.step2.predict(&row)?.label < 0 {
            Ok(PropagationClass::DpNlos)
        } else {
            Ok(PropagationClass::NdpNlos)
        }
    }
}

fn validate_features(indices: &[usize]) -> Result<(), PipelineError> {
    if indices.is_empty() || indices.iter().any(|&i| i == 0 || i > 10) {
        return Err(PipelineError::InvalidFeatureIndices(indices.to_vec()));
    }
    Ok(())
}

fn step_rows(samples: &[LabeledSample]) -> Vec<Vec<f64>> {
    samples
        .iter()
        .map(|s| s.features.as_array().to_vec())
        .collect()
}

/// Train both steps. Step 1 sees every training sample with LOS mapped to
/// -1 and both NLOS classes to +1; step 2 sees only true-NLOS samples with
/// DP as -1 and NDP as +1.
pub fn train_two_step(
    train: &[LabeledSample],
    step1_features: &[usize],
    step2_features: &[usize],
    kernel: &KernelConfig,
    cfg: &TrainConfig,
) -> Result<TwoStepClassifier, PipelineError> {
    validate_features(step1_features)?;
    validate_features(step2_features)?;

    let rows1 = step_rows(train);
    let labels1: Vec<f64> = train
        .iter()
        .map(|s| {
            if s.class == PropagationClass::Los {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    let step1 = train_with_features(
        &rows1,
        &labels1,
        step1_features,
        &kernel.resolve(step1_features.len()),
        cfg,
    )?;

    let nlos: Vec<&LabeledSample> = train
        .iter()
        .filter(|s| s.class != PropagationClass::Los)
        .collect();
    let rows2: Vec<Vec<f64>> = nlos
        .iter()
        .map(|s| s.features.as_array().to_vec())
        .collect();
    let labels2: Vec<f64> = nlos
        .iter()
        .map(|s| {
            if s.class == PropagationClass::DpNlos {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    let step2 = train_with_features(
        &rows2,
        &labels2,
        step2_features,
        &kernel.resolve(step2_features.len()),
        cfg,
    )?;

    Ok(TwoStepClassifier { step1, step2 })
}

/// Everything needed to apply a trained classifier to new records: the two
/// models, the feature subsets they consume (inside the models), the
/// labeling thresholds, and the feature extraction settings used at
/// training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierBundle {
    pub format_version: u32,
    pub thresholds: LabelingThresholds,
    pub feature_config: FeatureConfig,
    pub step1_features: Vec<usize>,
    pub step2_features: Vec<usize>,
    pub classifier: TwoStepClassifier,
}

impl ClassifierBundle {
    pub fn new(
        classifier: TwoStepClassifier,
        thresholds: LabelingThresholds,
        feature_config: FeatureConfig,
    ) -> Self {
        Self {
            format_version: BUNDLE_FORMAT_VERSION,
            thresholds,
            feature_config,
            step1_features: classifier.step1_features().to_vec(),
            step2_features: classifier.step2_features().to_vec(),
            classifier,
        }
    }

    pub fn save(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("bundle serialization cannot fail")
    }

    pub fn load(bytes: &[u8]) -> Result<Self, SvmError> {
        let bundle: ClassifierBundle =
            serde_json::from_slice(bytes).map_err(|e| SvmError::Parse(e.to_string()))?;
        if bundle.format_version != BUNDLE_FORMAT_VERSION {
            return Err(SvmError::UnsupportedVersion {
                found: bundle.format_version,
                expected: BUNDLE_FORMAT_VERSION,
            });
        }
        Ok(bundle)
    }
}
