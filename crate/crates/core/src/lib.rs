//! UWB propagation-condition classification toolkit.
//!
//! Classifies channel impulse responses into LOS, DP-NLOS (direct path
//! present through an obstacle) and NDP-NLOS (direct path absent) using ten
//! signal features and a two-step SVM workflow, and generates synthetic
//! multipath channels for end-to-end verification without hardware.
//!
//! Module map:
//! - [`cir`] — waveform, diagnostics and record data model
//! - [`synth`] — multipath channel generator and scenario presets
//! - [`features`] — the ten-feature extractor
//! - [`svm`] — binary soft-margin SVM (dual solver, prediction, model files)
//! - [`pipeline`] — bias labeling, pair-wise splits, two-step classifier
//! - [`eval`] — success rates, feature-subset sweeps, histogram export
//! - [`dataset`] — canonical JSON-lines dataset files

// Validations use `!(x > 0.0)` so NaN fails them together with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cir;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod pipeline;
pub mod svm;
pub mod synth;

pub use cir::{ChannelDiagnostics, PropagationClass, RangingRecord, Waveform};
pub use features::{extract_features, FeatureConfig, FeatureVector, IntegrationRule};
pub use pipeline::{
    build_samples, label_from_bias, split_by_pair, train_two_step, ClassifierBundle, KernelConfig,
    LabeledSample, LabelingThresholds, TwoStepClassifier,
};
pub use svm::{KernelSpec, SvmModel, TrainConfig};
pub use synth::{detect_first_path, render_cir, sample_records, sample_scenario, ScenarioPreset};
