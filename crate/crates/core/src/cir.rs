//! Data model for recorded and synthetic channel impulse responses.
//!
//! A [`Waveform`] is a uniformly sampled CIR magnitude sequence together with
//! its sample period and the index of the detected first-path arrival. The
//! radio-register quantities needed for the power-level features live in
//! [`ChannelDiagnostics`]. A [`RangingRecord`] bundles both with the
//! anchor/tag pair identifier and, for labeled data, the measured ranging
//! bias. All types are immutable after construction.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Errors raised while constructing or windowing CIR data.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CirError {
    #[error("waveform needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("first_path_index {index} out of range for {len} samples")]
    FirstPathOutOfRange { index: usize, len: usize },
    #[error("sample_period must be > 0, got {0}")]
    NonPositiveSamplePeriod(f64),
    #[error("sample {index} is negative ({value}); waveforms store magnitudes")]
    NegativeSample { index: usize, value: f64 },
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("empty window")]
    EmptyWindow,
    #[error("window start {start_s} s must be below end {end_s} s")]
    InvalidWindow { start_s: f64, end_s: f64 },
    #[error("preamble count N must be > 0, got {0}")]
    NonPositivePreambleCount(f64),
    #[error("CIR power C must be >= 0, got {0}")]
    NegativeCirPower(f64),
    #[error("first path amplitude F{index} must be >= 0, got {value}")]
    NegativeFirstPathAmp { index: usize, value: f64 },
    #[error("pair_id must be non-empty")]
    EmptyPairId,
    #[error("bias_m must be finite, got {0}")]
    NonFiniteBias(f64),
    #[error("unknown propagation class label {0:?}")]
    UnknownLabel(String),
}

/// Propagation condition of a recorded channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PropagationClass {
    /// Line of sight: direct path unobstructed.
    Los,
    /// Direct path penetrates the obstacle and is detected.
    DpNlos,
    /// Direct path blocked or too weak to detect; the receiver locks onto a
    /// reflection.
    NdpNlos,
}

impl PropagationClass {
    pub const ALL: [PropagationClass; 3] = [
        PropagationClass::Los,
        PropagationClass::DpNlos,
        PropagationClass::NdpNlos,
    ];

    /// Canonical label used in dataset files.
    pub fn label(&self) -> &'static str {
        match self {
            PropagationClass::Los => "LOS",
            PropagationClass::DpNlos => "DP_NLOS",
            PropagationClass::NdpNlos => "NDP_NLOS",
        }
    }

    /// Position in the LOS < DP_NLOS < NDP_NLOS severity order.
    pub fn severity(&self) -> usize {
        match self {
            PropagationClass::Los => 0,
            PropagationClass::DpNlos => 1,
            PropagationClass::NdpNlos => 2,
        }
    }
}

impl fmt::Display for PropagationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PropagationClass {
    type Err = CirError;

    /// Labels are matched exactly; lower-case or otherwise mangled strings
    /// are rejected so dataset files stay unambiguous.
    fn from_str(s: &str) -> Result<Self, CirError> {
        match s {
            "LOS" => Ok(PropagationClass::Los),
            "DP_NLOS" => Ok(PropagationClass::DpNlos),
            "NDP_NLOS" => Ok(PropagationClass::NdpNlos),
            other => Err(CirError::UnknownLabel(other.to_string())),
        }
    }
}

/// Uniformly sampled CIR magnitude sequence.
///
/// Sample `k` sits at time `k * sample_period_s` from the start of the
/// recorded window; the first-path arrival time is carried explicitly as an
/// index so that signal *before* the first path remains addressable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_period_s: f64,
    first_path_index: usize,
}

impl Waveform {
    pub fn new(
        samples: Vec<f64>,
        sample_period_s: f64,
        first_path_index: usize,
    ) -> Result<Self, CirError> {
        if samples.len() < 2 {
            return Err(CirError::TooFewSamples(samples.len()));
        }
        if !(sample_period_s > 0.0) {
            return Err(CirError::NonPositiveSamplePeriod(sample_period_s));
        }
        if first_path_index >= samples.len() {
            return Err(CirError::FirstPathOutOfRange {
                index: first_path_index,
                len: samples.len(),
            });
        }
        for (index, &value) in samples.iter().enumerate() {
            if !value.is_finite() {
                return Err(CirError::NonFiniteSample { index });
            }
            if value < 0.0 {
                return Err(CirError::NegativeSample { index, value });
            }
        }
        Ok(Self {
            samples,
            sample_period_s,
            first_path_index,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_period_s(&self) -> f64 {
        self.sample_period_s
    }

    pub fn first_path_index(&self) -> usize {
        self.first_path_index
    }

    /// First-path arrival time T_FP in seconds from the record start.
    pub fn first_path_time_s(&self) -> f64 {
        self.first_path_index as f64 * self.sample_period_s
    }

    /// Record extent: one sample period per sample.
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 * self.sample_period_s
    }

    /// Sample indices whose time `t = k * sample_period` satisfies
    /// `start_s <= t < end_s`, clipped to the waveform extent.
    ///
    /// Boundary times that land on the sample grid are snapped to the exact
    /// index so that e.g. a `[3 ns, 5 ns)` window at 1 ns period selects
    /// indices 3 and 4 regardless of floating-point representation.
    pub fn window_indices(&self, start_s: f64, end_s: f64) -> Result<(usize, usize), CirError> {
        if !(start_s < end_s) {
            return Err(CirError::InvalidWindow { start_s, end_s });
        }
        let start = grid_ceil(start_s / self.sample_period_s).max(0) as usize;
        let end_excl = grid_ceil(end_s / self.sample_period_s).max(0) as usize;
        let start = start.min(self.samples.len());
        let end_excl = end_excl.min(self.samples.len());
        if start >= end_excl {
            return Err(CirError::EmptyWindow);
        }
        Ok((start, end_excl))
    }

    /// Magnitudes of the samples selected by [`Waveform::window_indices`].
    pub fn magnitude_window(&self, start_s: f64, end_s: f64) -> Result<&[f64], CirError> {
        let (start, end) = self.window_indices(start_s, end_s)?;
        Ok(&self.samples[start..end])
    }

    /// Copy with all samples multiplied by `scale` (>= 0); first path and
    /// period are unchanged.
    pub fn scaled(&self, scale: f64) -> Result<Self, CirError> {
        Self::new(
            self.samples.iter().map(|s| s * scale).collect(),
            self.sample_period_s,
            self.first_path_index,
        )
    }

    /// Copy delayed by `shift` samples: zeros are prepended and the
    /// first-path index moves with the signal.
    pub fn shifted(&self, shift: usize) -> Result<Self, CirError> {
        let mut samples = vec![0.0; shift];
        samples.extend_from_slice(&self.samples);
        Self::new(samples, self.sample_period_s, self.first_path_index + shift)
    }
}

/// Smallest integer `k >= q`, with values within one part in 1e9 of an
/// integer snapped to it. Tolerates the rounding of `t / period` for times
/// that were produced as `index * period`.
fn grid_ceil(q: f64) -> i64 {
    let nearest = q.round();
    if (q - nearest).abs() < 1e-9 {
        nearest as i64
    } else {
        q.ceil() as i64
    }
}

/// Register-level quantities reported alongside each CIR.
///
/// `cir_power` (C) and `preamble_count` (N) feed the received-signal power
/// level; `first_path_amps` (F1..F3) feed the first-path power level;
/// `prf_constant_db` (A) is the pulse-repetition-frequency dependent offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelDiagnostics {
    pub cir_power: f64,
    pub preamble_count: f64,
    pub first_path_amps: [f64; 3],
    pub prf_constant_db: f64,
}

impl ChannelDiagnostics {
    pub fn new(
        cir_power: f64,
        preamble_count: f64,
        first_path_amps: [f64; 3],
        prf_constant_db: f64,
    ) -> Result<Self, CirError> {
        if !(preamble_count > 0.0) {
            return Err(CirError::NonPositivePreambleCount(preamble_count));
        }
        if !(cir_power >= 0.0) {
            return Err(CirError::NegativeCirPower(cir_power));
        }
        for (i, &f) in first_path_amps.iter().enumerate() {
            if !(f >= 0.0) {
                return Err(CirError::NegativeFirstPathAmp {
                    index: i + 1,
                    value: f,
                });
            }
        }
        Ok(Self {
            cir_power,
            preamble_count,
            first_path_amps,
            prf_constant_db,
        })
    }

    /// F1^2 + F2^2 + F3^2.
    pub fn first_path_power(&self) -> f64 {
        self.first_path_amps.iter().map(|f| f * f).sum()
    }
}

/// One ranging exchange: the recorded waveform, its diagnostics, the
/// geometric configuration it came from, and (for labeled data) the
/// estimated ranging bias and/or an explicit class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangingRecord {
    pub waveform: Waveform,
    pub diagnostics: ChannelDiagnostics,
    pub pair_id: String,
    pub bias_m: Option<f64>,
    pub label: Option<PropagationClass>,
}

impl RangingRecord {
    pub fn new(
        waveform: Waveform,
        diagnostics: ChannelDiagnostics,
        pair_id: String,
        bias_m: Option<f64>,
        label: Option<PropagationClass>,
    ) -> Result<Self, CirError> {
        if pair_id.is_empty() {
            return Err(CirError::EmptyPairId);
        }
        if let Some(b) = bias_m {
            if !b.is_finite() {
                return Err(CirError::NonFiniteBias(b));
            }
        }
        Ok(Self {
            waveform,
            diagnostics,
            pair_id,
            bias_m,
            label,
        })
    }
}
