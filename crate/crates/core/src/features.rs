//! The ten-element signal feature vector computed per ranging record.
//!
//! Features 1 and 2 (received signal level and its ratio to the first-path
//! level) come from the radio diagnostics; features 3 through 9 are
//! integral statistics of the CIR magnitude over a window anchored at the
//! detected first path; feature 10 is the variance of the signal in the
//! span directly *before* the first path, which rises when an undetected
//! direct path leaks energy ahead of the component the receiver locked
//! onto.
//!
//! Continuous integrals are approximated on the sample grid with an
//! explicit integration rule so results are reproducible; the sequence
//! kernels (`sampled_*`) are exposed separately from the waveform-level
//! operations so they can be applied to arbitrary sample sequences.

use crate::cir::{ChannelDiagnostics, CirError, RangingRecord, Waveform};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FeatureError {
    #[error("invalid diagnostics: {0}")]
    InvalidDiagnostics(&'static str),
    #[error("no first path amplitude: F1..F3 all zero")]
    NoFirstPathAmplitude,
    #[error("empty window")]
    EmptyWindow,
    #[error("degenerate signal ({0})")]
    DegenerateSignal(&'static str),
    #[error("insufficient pre-FP samples: need at least 2 before the first path")]
    InsufficientPreFpSamples,
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
    #[error("feature {index} ({name}): {source}")]
    Feature {
        index: usize,
        name: &'static str,
        source: Box<FeatureError>,
    },
}

impl From<CirError> for FeatureError {
    fn from(e: CirError) -> Self {
        match e {
            CirError::EmptyWindow => FeatureError::EmptyWindow,
            other => FeatureError::InvalidConfig(other.to_string()),
        }
    }
}

/// Discrete approximation rule for the continuous-time integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationRule {
    LeftRiemann,
    #[default]
    Trapezoid,
}

impl IntegrationRule {
    /// Integrated span of `len` samples at period `dt`.
    pub fn span(&self, len: usize, dt: f64) -> f64 {
        match self {
            IntegrationRule::LeftRiemann => len as f64 * dt,
            IntegrationRule::Trapezoid => len.saturating_sub(1) as f64 * dt,
        }
    }

    fn min_samples(&self) -> usize {
        match self {
            IntegrationRule::LeftRiemann => 1,
            IntegrationRule::Trapezoid => 2,
        }
    }
}

/// Windowing and integration settings for the integral features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Span of the pre-first-path analysis window.
    pub tau_s: f64,
    /// Analysis window start, relative to the first-path time.
    pub window_start_offset_s: f64,
    /// Analysis window end, relative to the first-path time.
    pub window_end_offset_s: f64,
    pub rule: IntegrationRule,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            tau_s: 20e-9,
            window_start_offset_s: -20e-9,
            window_end_offset_s: 100e-9,
            rule: IntegrationRule::Trapezoid,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(self.tau_s > 0.0) {
            return Err(FeatureError::InvalidConfig(format!(
                "tau_s must be > 0, got {}",
                self.tau_s
            )));
        }
        if !(self.window_end_offset_s > self.window_start_offset_s) {
            return Err(FeatureError::InvalidConfig(format!(
                "window end {} must be above start {}",
                self.window_end_offset_s, self.window_start_offset_s
            )));
        }
        Ok(())
    }
}

/// The ten features in the fixed 1..10 order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// 1: received signal power level, dBm.
    pub rsl_dbm: f64,
    /// 2: received-to-first-path power ratio, dB.
    pub rfpr_db: f64,
    /// 3: signal energy over the analysis window.
    pub energy: f64,
    /// 4: mean excess delay, seconds.
    pub mean_excess_delay_s: f64,
    /// 5: delay-spread second central moment, seconds^2 (literal form; see
    /// [`FeatureVector::rms_delay_spread_sqrt`]).
    pub rms_delay_spread: f64,
    /// 6: mean magnitude.
    pub mean_magnitude: f64,
    /// 7: magnitude variance.
    pub variance_magnitude: f64,
    /// 8: kurtosis (non-excess; Gaussian gives 3).
    pub kurtosis: f64,
    /// 9: peak magnitude.
    pub amplitude: f64,
    /// 10: variance of the signal before the first path.
    pub pre_fp_variance: f64,
}

impl FeatureVector {
    pub const NAMES: [&'static str; 10] = [
        "rsl_dbm",
        "rfpr_db",
        "energy",
        "mean_excess_delay_s",
        "rms_delay_spread",
        "mean_magnitude",
        "variance_magnitude",
        "kurtosis",
        "amplitude",
        "pre_fp_variance",
    ];

    /// Values in feature order 1..10.
    pub fn as_array(&self) -> [f64; 10] {
        [
            self.rsl_dbm,
            self.rfpr_db,
            self.energy,
            self.mean_excess_delay_s,
            self.rms_delay_spread,
            self.mean_magnitude,
            self.variance_magnitude,
            self.kurtosis,
            self.amplitude,
            self.pre_fp_variance,
        ]
    }

    /// Value by 1-based feature number.
    pub fn get(&self, index: usize) -> Option<f64> {
        if (1..=10).contains(&index) {
            Some(self.as_array()[index - 1])
        } else {
            None
        }
    }

    /// Square root of feature 5, for the conventional delay-spread reading.
    pub fn rms_delay_spread_sqrt(&self) -> f64 {
        self.rms_delay_spread.sqrt()
    }
}

const CIR_POWER_SCALE: f64 = 131072.0; // 2^17

/// Received signal power level: `10 log10(C 2^17 / N^2) - A` dBm.
pub fn compute_rsl(d: &ChannelDiagnostics) -> Result<f64, FeatureError> {
    if !(d.cir_power > 0.0) {
        return Err(FeatureError::InvalidDiagnostics("C must be > 0"));
    }
    if !(d.preamble_count > 0.0) {
        return Err(FeatureError::InvalidDiagnostics("N must be > 0"));
    }
    let ratio = d.cir_power * CIR_POWER_SCALE / (d.preamble_count * d.preamble_count);
    Ok(10.0 * ratio.log10() - d.prf_constant_db)
}

/// First-path signal power level: `10 log10((F1^2+F2^2+F3^2) / N^2) - A` dBm.
pub fn compute_fsl(d: &ChannelDiagnostics) -> Result<f64, FeatureError> {
    if !(d.preamble_count > 0.0) {
        return Err(FeatureError::InvalidDiagnostics("N must be > 0"));
    }
    let fp_power = d.first_path_power();
    if !(fp_power > 0.0) {
        return Err(FeatureError::NoFirstPathAmplitude);
    }
    let ratio = fp_power / (d.preamble_count * d.preamble_count);
    Ok(10.0 * ratio.log10() - d.prf_constant_db)
}

/// Received-to-first-path power ratio: RSL - FSL. The PRF constant cancels.
pub fn compute_rfpr(d: &ChannelDiagnostics) -> Result<f64, FeatureError> {
    Ok(compute_rsl(d)? - compute_fsl(d)?)
}

/// `∫ v(t)^2 dt` over the samples.
pub fn sampled_energy(values: &[f64], dt: f64, rule: IntegrationRule) -> Result<f64, FeatureError> {
    integrate(values, dt, rule, |v| v * v)
}

/// `(1/T) ∫ v(t) dt`.
///
/// Accumulates shifted by the first sample, so a constant signal yields its
/// value exactly and downstream central moments of constants are exactly
/// zero.
pub fn sampled_mean(values: &[f64], dt: f64, rule: IntegrationRule) -> Result<f64, FeatureError> {
    if values.len() < rule.min_samples() {
        return Err(FeatureError::EmptyWindow);
    }
    let base = values[0];
    let t = rule.span(values.len(), dt);
    Ok(base + integrate(values, dt, rule, |v| v - base)? / t)
}

/// `(1/T) ∫ (v(t) - mean)^2 dt`.
pub fn sampled_variance(
    values: &[f64],
    dt: f64,
    rule: IntegrationRule,
) -> Result<f64, FeatureError> {
    let mean = sampled_mean(values, dt, rule)?;
    let t = rule.span(values.len(), dt);
    Ok(integrate(values, dt, rule, |v| (v - mean) * (v - mean))? / t)
}

/// `(1/(sigma^4 T)) ∫ (v(t) - mean)^4 dt`; errors on zero variance.
pub fn sampled_kurtosis(
    values: &[f64],
    dt: f64,
    rule: IntegrationRule,
) -> Result<f64, FeatureError> {
    let mean = sampled_mean(values, dt, rule)?;
    let variance = sampled_variance(values, dt, rule)?;
    if !(variance > 0.0) {
        return Err(FeatureError::DegenerateSignal("zero variance"));
    }
    let t = rule.span(values.len(), dt);
    let fourth = integrate(values, dt, rule, |v| {
        let d = v - mean;
        d * d * d * d
    })?;
    Ok(fourth / (variance * variance * t))
}

/// `∫ t v(t)^2 dt / energy`, with sample `k` at time `t_start + k dt`.
pub fn sampled_mean_excess_delay(
    values: &[f64],
    t_start: f64,
    dt: f64,
    rule: IntegrationRule,
) -> Result<f64, FeatureError> {
    let energy = sampled_energy(values, dt, rule)?;
    if !(energy > 0.0) {
        return Err(FeatureError::DegenerateSignal("zero energy in window"));
    }
    let mut k = 0usize;
    let weighted = integrate(values, dt, rule, |v| {
        let t = t_start + k as f64 * dt;
        k += 1;
        t * v * v
    })?;
    Ok(weighted / energy)
}

/// `∫ (t - tau_med)^2 v(t)^2 dt / energy` (no square root; units s^2).
pub fn sampled_rms_delay_spread(
    values: &[f64],
    t_start: f64,
    dt: f64,
    rule: IntegrationRule,
) -> Result<f64, FeatureError> {
    let energy = sampled_energy(values, dt, rule)?;
    if !(energy > 0.0) {
        return Err(FeatureError::DegenerateSignal("zero energy in window"));
    }
    let tau_med = sampled_mean_excess_delay(values, t_start, dt, rule)?;
    let mut k = 0usize;
    let weighted = integrate(values, dt, rule, |v| {
        let t = t_start + k as f64 * dt;
        k += 1;
        (t - tau_med) * (t - tau_med) * v * v
    })?;
    Ok(weighted / energy)
}

/// Integrate `f(v)` over the sample sequence with the given rule.
///
/// The integrand closure is called once per sample in index order, so
/// stateful closures (time-weighted integrands) see samples sequentially.
fn integrate<F: FnMut(f64) -> f64>(
    values: &[f64],
    dt: f64,
    rule: IntegrationRule,
    mut f: F,
) -> Result<f64, FeatureError> {
    if values.len() < rule.min_samples() {
        return Err(FeatureError::EmptyWindow);
    }
    match rule {
        IntegrationRule::LeftRiemann => {
            let mut acc = 0.0;
            for &v in values {
                acc += f(v) * dt;
            }
            Ok(acc)
        }
        IntegrationRule::Trapezoid => {
            let mut acc = 0.0;
            let mut prev = f(values[0]);
            for &v in &values[1..] {
                let cur = f(v);
                acc += (prev + cur) * 0.5 * dt;
                prev = cur;
            }
            Ok(acc)
        }
    }
}

/// Analysis-window slice and the time of its first sample.
fn analysis_window<'a>(
    w: &'a Waveform,
    cfg: &FeatureConfig,
) -> Result<(&'a [f64], f64), FeatureError> {
    cfg.validate()?;
    let t_fp = w.first_path_time_s();
    let (start, end) = w.window_indices(
        t_fp + cfg.window_start_offset_s,
        t_fp + cfg.window_end_offset_s,
    )?;
    if end - start < cfg.rule.min_samples() {
        return Err(FeatureError::EmptyWindow);
    }
    Ok((&w.samples()[start..end], start as f64 * w.sample_period_s()))
}

/// Feature 3: signal energy over the analysis window.
pub fn compute_energy(w: &Waveform, cfg: &FeatureConfig) -> Result<f64, FeatureError> {
    let (win, _) = analysis_window(w, cfg)?;
    sampled_energy(win, w.sample_period_s(), cfg.rule)
}

/// Feature 4: mean excess delay, measured from the waveform time origin.
pub fn compute_mean_excess_delay(w: &Waveform, cfg: &FeatureConfig) -> Result<f64, FeatureError> {
    let (win, t_start) = analysis_window(w, cfg)?;
    sampled_mean_excess_delay(win, t_start, w.sample_period_s(), cfg.rule)
}

/// Feature 5: delay-spread second central moment, seconds^2.
pub fn compute_rms_delay_spread(w: &Waveform, cfg: &FeatureConfig) -> Result<f64, FeatureError> {
    let (win, t_start) = analysis_window(w, cfg)?;
    sampled_rms_delay_spread(win, t_start, w.sample_period_s(), cfg.rule)
}

/// Feature 6: mean magnitude over the analysis window.
pub fn compute_mean_magnitude(w: &Waveform, cfg: &FeatureConfig) -> Result<f64, FeatureError> {
    let (win, _) = analysis_window(w, cfg)?;
    sampled_mean(win, w.sample_period_s(), cfg.rule)
}

/// Feature 7: magnitude variance over the analysis window.
pub fn compute_variance_magnitude(w: &Waveform, cfg: &FeatureConfig) -> Result<f64, FeatureError> {
    let (win, _) = analysis_window(w, cfg)?;
    sampled_variance(win, w.sample_period_s(), cfg.rule)
}

/// Feature 8: kurtosis of the magnitude over the analysis window.
pub fn compute_kurtosis(w: &Waveform, cfg: &FeatureConfig) -> Result<f64, FeatureError> {
    let (win, _) = analysis_window(w, cfg)?;
    sampled_kurtosis(win, w.sample_period_s(), cfg.rule)
}

/// Feature 9: peak magnitude in the analysis window.
pub fn compute_amplitude(w: &Waveform, cfg: &FeatureConfig) -> Result<f64, FeatureError> {
    let (win, _) = analysis_window(w, cfg)?;
    Ok(win.iter().cloned().fold(0.0_f64, f64::max))
}

/// Feature 10: variance over `[T_FP - tau_s, T_FP)`, clipped at the record
/// start and normalized by the actual covered span.
pub fn compute_pre_fp_variance(w: &Waveform, cfg: &FeatureConfig) -> Result<f64, FeatureError> {
    cfg.validate()?;
    let fp = w.first_path_index();
    if fp < 2 {
        return Err(FeatureError::InsufficientPreFpSamples);
    }
    let t_fp = w.first_path_time_s();
    let (start, end) = w
        .window_indices(t_fp - cfg.tau_s, t_fp)
        .map_err(|_| FeatureError::InsufficientPreFpSamples)?;
    debug_assert!(end <= fp);
    if end - start < 2 {
        return Err(FeatureError::InsufficientPreFpSamples);
    }
    sampled_variance(&w.samples()[start..end], w.sample_period_s(), cfg.rule)
}

fn tagged<T>(
    index: usize,
    name: &'static str,
    r: Result<T, FeatureError>,
) -> Result<T, FeatureError> {
    r.map_err(|source| FeatureError::Feature {
        index,
        name,
        source: Box::new(source),
    })
}

/// Assemble all ten features for one record. Sub-feature failures carry the
/// feature number they came from.
pub fn extract_features(
    rec: &RangingRecord,
    cfg: &FeatureConfig,
) -> Result<FeatureVector, FeatureError> {
    let w = &rec.waveform;
    let d = &rec.diagnostics;
    let fv = FeatureVector {
        rsl_dbm: tagged(1, "rsl_dbm", compute_rsl(d))?,
        rfpr_db: tagged(2, "rfpr_db", compute_rfpr(d))?,
        energy: tagged(3, "energy", compute_energy(w, cfg))?,
        mean_excess_delay_s: tagged(4, "mean_excess_delay_s", compute_mean_excess_delay(w, cfg))?,
        rms_delay_spread: tagged(5, "rms_delay_spread", compute_rms_delay_spread(w, cfg))?,
        mean_magnitude: tagged(6, "mean_magnitude", compute_mean_magnitude(w, cfg))?,
        variance_magnitude: tagged(7, "variance_magnitude", compute_variance_magnitude(w, cfg))?,
        kurtosis: tagged(8, "kurtosis", compute_kurtosis(w, cfg))?,
        amplitude: tagged(9, "amplitude", compute_amplitude(w, cfg))?,
        pre_fp_variance: tagged(10, "pre_fp_variance", compute_pre_fp_variance(w, cfg))?,
    };
    for (i, v) in fv.as_array().into_iter().enumerate() {
        if !v.is_finite() {
            return Err(FeatureError::Feature {
                index: i + 1,
                name: FeatureVector::NAMES[i],
                source: Box::new(FeatureError::DegenerateSignal("non-finite value")),
            });
        }
    }
    Ok(fv)
}
