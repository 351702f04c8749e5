//! Synthetic CIR generation from a multipath signal model.
//!
//! A rendered waveform is the sampled magnitude of a sum of delayed, scaled
//! pulse copies plus additive white Gaussian noise. Scenario presets produce
//! labeled waveforms mimicking the three propagation regimes: a dominant
//! detected direct path (LOS), an attenuated but still detectable direct
//! path (DP-NLOS), and a direct path buried below the detection threshold so
//! the receiver locks onto a later reflection (NDP-NLOS). In the NDP case
//! the blocked direct path and obstacle scatter leak energy into the window
//! right before the detected first path, which is what the pre-first-path
//! variance feature keys on.
//!
//! All generation is deterministic given the seed; parallel generation
//! across seeds is safe since every call owns its own random stream.

use crate::cir::{ChannelDiagnostics, CirError, PropagationClass, RangingRecord, Waveform};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Default leading-sample count used to estimate the noise floor.
pub const DEFAULT_NOISE_FLOOR_WINDOW: usize = 16;
/// Default threshold multiplier for leading-edge detection.
pub const DEFAULT_K_THRESHOLD: f64 = 6.0;
/// Absolute floor substituted for a zero noise-floor std so an all-zero
/// leading window cannot produce a zero threshold.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("multipath spec invalid: {0}")]
    InvalidSpec(String),
    #[error("duration and sample period yield fewer than 2 samples")]
    TooFewSamples,
    #[error("no path detected")]
    NoPathDetected,
    #[error("noise floor window must satisfy 2 <= window < sequence length, got {window} for length {len}")]
    InvalidNoiseWindow { window: usize, len: usize },
    #[error("preset range invalid: {0}")]
    InvalidRange(String),
    #[error(transparent)]
    Cir(#[from] CirError),
}

/// Transmitted pulse waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    /// First derivative of a Gaussian, normalized to unit peak magnitude at
    /// `t = ±width`.
    GaussianMonocycle,
    /// Half-cosine envelope `0.5 (1 + cos(pi t / width))` on `|t| <= width`,
    /// unit peak at `t = 0`.
    RaisedCosineEnvelope,
}

/// Pulse shape and characteristic width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub shape: PulseShape,
    pub width_s: f64,
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            shape: PulseShape::GaussianMonocycle,
            width_s: 1e-9,
        }
    }
}

impl PulseSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.width_s > 0.0) {
            return Err(SynthError::InvalidSpec(format!(
                "pulse width must be > 0, got {}",
                self.width_s
            )));
        }
        Ok(())
    }

    /// Pulse value at time `t` relative to the pulse center.
    pub fn eval(&self, t: f64) -> f64 {
        let w = self.width_s;
        match self.shape {
            PulseShape::GaussianMonocycle => {
                let x = t / w;
                x * (0.5 - 0.5 * x * x).exp()
            }
            PulseShape::RaisedCosineEnvelope => {
                if t.abs() >= w {
                    0.0
                } else {
                    0.5 * (1.0 + (PI * t / w).cos())
                }
            }
        }
    }

    /// Continuous-time energy of the unit-peak pulse.
    pub fn energy(&self) -> f64 {
        match self.shape {
            PulseShape::GaussianMonocycle => std::f64::consts::E * self.width_s * PI.sqrt() / 2.0,
            PulseShape::RaisedCosineEnvelope => 0.75 * self.width_s,
        }
    }
}

/// One multipath echo: amplitude and absolute delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultipathComponent {
    pub amplitude: f64,
    pub delay_s: f64,
}

/// Full description of a synthetic channel realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipathSpec {
    pub components: Vec<MultipathComponent>,
    pub pulse: PulseSpec,
    pub noise_sigma: f64,
    pub duration_s: f64,
    pub sample_period_s: f64,
    pub seed: u64,
}

impl MultipathSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        self.pulse.validate()?;
        if self.components.is_empty() {
            return Err(SynthError::InvalidSpec(
                "components must be non-empty".into(),
            ));
        }
        for c in &self.components {
            if !(0.0..self.duration_s).contains(&c.delay_s) {
                return Err(SynthError::InvalidSpec(format!(
                    "component delay {} s outside [0, {}) s",
                    c.delay_s, self.duration_s
                )));
            }
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(SynthError::InvalidSpec(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if !(self.sample_period_s > 0.0) {
            return Err(SynthError::InvalidSpec(format!(
                "sample period must be > 0, got {}",
                self.sample_period_s
            )));
        }
        Ok(())
    }

    fn sample_count(&self) -> usize {
        (self.duration_s / self.sample_period_s + 1e-9).floor() as usize
    }
}

/// Render the magnitude waveform of the multipath sum on the sample grid.
///
/// `samples[k] = | sum_i a_i p(k dt - tau_i) + n_k |` with `n_k` drawn from
/// a seeded Gaussian stream, so re-rendering the same spec is bit-identical.
/// The first-path index comes from [`detect_first_path`] with the default
/// detector settings; if nothing crosses the threshold (e.g. a pulse inside
/// the noise-estimation window) the earliest sample at half the global peak
/// is used instead.
pub fn render_cir(spec: &MultipathSpec) -> Result<Waveform, SynthError> {
    spec.validate()?;
    let n = spec.sample_count();
    if n < 2 {
        return Err(SynthError::TooFewSamples);
    }
    let dt = spec.sample_period_s;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).expect("validated sigma"))
    } else {
        None
    };

    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt;
        let mut value = 0.0;
        for c in &spec.components {
            value += c.amplitude * spec.pulse.eval(t - c.delay_s);
        }
        if let Some(dist) = &noise {
            value += dist.sample(&mut rng);
        }
        samples.push(value.abs());
    }

    let first_path =
        match detect_first_path(&samples, DEFAULT_NOISE_FLOOR_WINDOW, DEFAULT_K_THRESHOLD) {
            Ok(idx) => idx,
            Err(SynthError::NoPathDetected) => fallback_first_path(&samples),
            Err(e) => return Err(e),
        };
    Ok(Waveform::new(samples, dt, first_path)?)
}

/// Earliest sample reaching half the global peak; 0 for an all-zero record.
fn fallback_first_path(samples: &[f64]) -> usize {
    let peak = samples.iter().cloned().fold(0.0_f64, f64::max);
    if peak <= 0.0 {
        return 0;
    }
    samples.iter().position(|&s| s >= 0.5 * peak).unwrap_or(0)
}

/// Leading-edge first-path detector.
///
/// Estimates the noise floor as mean and population std of the first
/// `noise_floor_window` samples and returns the first index whose magnitude
/// exceeds `mean + k_threshold * std`. A zero std is replaced by
/// [`STD_FLOOR`]. Like the hardware it mirrors, this detector misses a
/// heavily attenuated direct path and locks onto the first component strong
/// enough to cross the threshold.
pub fn detect_first_path(
    samples: &[f64],
    noise_floor_window: usize,
    k_threshold: f64,
) -> Result<usize, SynthError> {
    if noise_floor_window < 2 || noise_floor_window >= samples.len() {
        return Err(SynthError::InvalidNoiseWindow {
            window: noise_floor_window,
            len: samples.len(),
        });
    }
    let head = &samples[..noise_floor_window];
    let mean = head.iter().sum::<f64>() / head.len() as f64;
    let var = head.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / head.len() as f64;
    let std = var.sqrt().max(STD_FLOOR);
    let threshold = mean + k_threshold * std;
    samples
        .iter()
        .position(|&s| s > threshold)
        .ok_or(SynthError::NoPathDetected)
}

/// Inclusive parameter range drawn uniformly.
pub type Range = (f64, f64);

/// Waveform-population description for one propagation class.
///
/// Amplitude levels are in dB relative to the unobstructed direct-path
/// amplitude; delays are absolute or relative as named. For `NdpNlos` the
/// direct path is rendered as the first element of a sub-threshold scatter
/// ramp bridging the gap to the earliest detectable reflection, mimicking
/// energy leaking through the obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPreset {
    pub class: PropagationClass,
    pub pulse: PulseSpec,
    pub sample_period_s: f64,
    pub duration_s: f64,
    /// Arrival time of the (possibly blocked) direct path from record start.
    pub direct_arrival_s: Range,
    /// Unobstructed direct-path amplitude, linear units.
    pub direct_amplitude: Range,
    /// Obstacle loss applied to the direct path, dB (0 for LOS).
    pub direct_attenuation_db: Range,
    /// Extra direct-path delay introduced by the obstacle.
    pub direct_excess_delay_s: Range,
    /// Number of reflected components.
    pub reflection_count: (usize, usize),
    /// Per-reflection amplitude relative to the unobstructed direct, dB.
    pub reflection_level_db: Range,
    /// Delay of the earliest reflection after the direct arrival.
    pub reflection_gap_s: Range,
    /// Remaining reflections spread over this span after the earliest one.
    pub reflection_tail_s: Range,
    /// Sub-threshold scattered components between the blocked direct path
    /// and the earliest reflection (NDP only; 0 otherwise).
    pub scatter_count: (usize, usize),
    /// Scatter amplitude ramp endpoints, as multiples of the noise sigma.
    pub scatter_level_vs_noise: Range,
    /// Additive noise standard deviation, linear units.
    pub noise_sigma: Range,
    /// Measured ranging bias for records of this class, meters.
    pub bias_m: Range,
}

impl ScenarioPreset {
    pub fn los() -> Self {
        Self {
            class: PropagationClass::Los,
            pulse: PulseSpec {
                shape: PulseShape::RaisedCosineEnvelope,
                width_s: 1e-9,
            },
            sample_period_s: 1e-9,
            duration_s: 160e-9,
            direct_arrival_s: (22e-9, 34e-9),
            direct_amplitude: (0.7, 1.0),
            direct_attenuation_db: (0.0, 0.0),
            direct_excess_delay_s: (0.0, 0.0),
            reflection_count: (3, 7),
            reflection_level_db: (-20.0, -7.0),
            reflection_gap_s: (2e-9, 8e-9),
            reflection_tail_s: (20e-9, 60e-9),
            scatter_count: (0, 0),
            scatter_level_vs_noise: (0.0, 0.0),
            noise_sigma: (0.008, 0.012),
            bias_m: (-0.03, 0.04),
        }
    }

    pub fn dp_nlos() -> Self {
        Self {
            class: PropagationClass::DpNlos,
            direct_attenuation_db: (4.0, 10.0),
            direct_excess_delay_s: (0.3e-9, 2.0e-9),
            reflection_level_db: (-16.0, -7.0),
            bias_m: (0.08, 0.65),
            ..Self::los()
        }
    }

    pub fn ndp_nlos() -> Self {
        Self {
            class: PropagationClass::NdpNlos,
            reflection_level_db: (-16.0, -7.0),
            reflection_gap_s: (11e-9, 16e-9),
            reflection_tail_s: (25e-9, 60e-9),
            scatter_count: (7, 10),
            scatter_level_vs_noise: (1.7, 3.6),
            bias_m: (0.85, 4.5),
            ..Self::los()
        }
    }

    /// Preset for a class name as used by the CLI.
    pub fn for_class(class: PropagationClass) -> Self {
        match class {
            PropagationClass::Los => Self::los(),
            PropagationClass::DpNlos => Self::dp_nlos(),
            PropagationClass::NdpNlos => Self::ndp_nlos(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.pulse.validate()?;
        let ranges: [(&str, Range); 10] = [
            ("direct_arrival_s", self.direct_arrival_s),
            ("direct_amplitude", self.direct_amplitude),
            ("direct_attenuation_db", self.direct_attenuation_db),
            ("direct_excess_delay_s", self.direct_excess_delay_s),
            ("reflection_level_db", self.reflection_level_db),
            ("reflection_gap_s", self.reflection_gap_s),
            ("reflection_tail_s", self.reflection_tail_s),
            ("scatter_level_vs_noise", self.scatter_level_vs_noise),
            ("noise_sigma", self.noise_sigma),
            ("bias_m", self.bias_m),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(SynthError::InvalidRange(format!("{name}: ({lo}, {hi})")));
            }
        }
        if self.reflection_count.0 > self.reflection_count.1 || self.reflection_count.1 == 0 {
            return Err(SynthError::InvalidRange(format!(
                "reflection_count: {:?}",
                self.reflection_count
            )));
        }
        if self.scatter_count.0 > self.scatter_count.1 {
            return Err(SynthError::InvalidRange(format!(
                "scatter_count: {:?}",
                self.scatter_count
            )));
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): Range) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn draw_usize(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Per-pair center fractions so records of one pair share geometry.
struct PairContext {
    arrival: f64,
    amplitude: f64,
    gap: f64,
    noise: f64,
}

impl PairContext {
    const JITTER: f64 = 0.15;

    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let mut frac = || rng.gen_range(Self::JITTER..(1.0 - Self::JITTER));
        Self {
            arrival: frac(),
            amplitude: frac(),
            gap: frac(),
            noise: frac(),
        }
    }
}

/// Draw from `range`; with a pair center fraction, jitter around it instead
/// of spanning the whole range.
fn pick(rng: &mut ChaCha8Rng, range: Range, center: Option<f64>) -> f64 {
    let (lo, hi) = range;
    match center {
        None => draw(rng, range),
        Some(_) if lo == hi => lo,
        Some(c) => {
            let f = c + rng.gen_range(-PairContext::JITTER..PairContext::JITTER);
            lo + (hi - lo) * f.clamp(0.0, 1.0)
        }
    }
}

/// One drawn channel realization plus the quantities needed for records.
struct Realization {
    spec: MultipathSpec,
    bias_m: f64,
}

fn draw_realization(
    preset: &ScenarioPreset,
    rng: &mut ChaCha8Rng,
    pair: Option<&PairContext>,
) -> Realization {
    let arrival = pick(rng, preset.direct_arrival_s, pair.map(|p| p.arrival));
    let amplitude = pick(rng, preset.direct_amplitude, pair.map(|p| p.amplitude));
    let gap = pick(rng, preset.reflection_gap_s, pair.map(|p| p.gap));
    let noise_sigma = pick(rng, preset.noise_sigma, pair.map(|p| p.noise));

    let mut components = Vec::new();

    // Direct path. For NDP it becomes the first element of the scatter ramp.
    let scatter_count = draw_usize(rng, preset.scatter_count);
    if scatter_count == 0 {
        let attenuation_db = draw(rng, preset.direct_attenuation_db);
        let excess = draw(rng, preset.direct_excess_delay_s);
        components.push(MultipathComponent {
            amplitude: amplitude * 10f64.powf(-attenuation_db / 20.0),
            delay_s: arrival + excess,
        });
    } else {
        let (lvl_lo, lvl_hi) = preset.scatter_level_vs_noise;
        let span = (gap - 2e-9).max(1e-9);
        for j in 0..scatter_count {
            let frac = j as f64 / (scatter_count - 1).max(1) as f64;
            let level = lvl_lo + (lvl_hi - lvl_lo) * frac;
            let jitter = if j == 0 {
                0.0
            } else {
                rng.gen_range(-0.3e-9..0.3e-9)
            };
            components.push(MultipathComponent {
                amplitude: noise_sigma * level * rng.gen_range(0.85..1.15),
                delay_s: arrival + span * frac + jitter,
            });
        }
    }

    // Reflections: earliest one at the gap, the rest spread over the tail.
    let reflection_count = draw_usize(rng, preset.reflection_count);
    let tail = draw(rng, preset.reflection_tail_s);
    for r in 0..reflection_count {
        let level_db = draw(rng, preset.reflection_level_db);
        let delay = if r == 0 {
            arrival + gap
        } else {
            arrival + gap + rng.gen_range(0.0..tail)
        };
        components.push(MultipathComponent {
            amplitude: amplitude * 10f64.powf(level_db / 20.0),
            delay_s: delay.min(preset.duration_s - preset.pulse.width_s),
        });
    }

    let bias_m = draw(rng, preset.bias_m);
    Realization {
        spec: MultipathSpec {
            components,
            pulse: preset.pulse,
            noise_sigma,
            duration_s: preset.duration_s,
            sample_period_s: preset.sample_period_s,
            seed: rng.gen(),
        },
        bias_m,
    }
}

/// One drawn waveform together with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDraw {
    pub waveform: Waveform,
    pub class: PropagationClass,
    /// Arrival time of the true (possibly undetected) direct path.
    pub true_direct_delay_s: f64,
}

/// Draw `n` labeled waveforms from the preset; deterministic given `seed`.
pub fn sample_scenario(
    preset: &ScenarioPreset,
    n: usize,
    seed: u64,
) -> Result<Vec<(Waveform, PropagationClass)>, SynthError> {
    Ok(sample_scenario_detailed(preset, n, seed)?
        .into_iter()
        .map(|d| (d.waveform, d.class))
        .collect())
}

/// Like [`sample_scenario`] but keeps the true direct-path delay of each
/// draw, for detector audits.
pub fn sample_scenario_detailed(
    preset: &ScenarioPreset,
    n: usize,
    seed: u64,
) -> Result<Vec<ScenarioDraw>, SynthError> {
    if n == 0 {
        return Err(SynthError::InvalidRange("sample count must be >= 1".into()));
    }
    preset.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let real = draw_realization(preset, &mut rng, None);
        out.push(ScenarioDraw {
            waveform: render_cir(&real.spec)?,
            class: preset.class,
            true_direct_delay_s: real.spec.components[0].delay_s,
        });
    }
    Ok(out)
}

/// PRF constant matching the 64 MHz pulse-repetition-frequency setting.
pub const DEFAULT_PRF_CONSTANT_DB: f64 = 113.77;
/// Preamble accumulation count used for synthetic diagnostics.
pub const DEFAULT_PREAMBLE_COUNT: f64 = 128.0;

/// Scale applied to waveform magnitudes when deriving the first-path
/// amplitude registers, chosen so first-path power and CIR power sit on the
/// same dB scale (`2^(17/2)`).
const FIRST_PATH_AMP_SCALE: f64 = 362.03867196751236; // 2^8.5

/// Derive register-style diagnostics from a rendered waveform: CIR power is
/// the total sample energy and F1..F3 are the three magnitudes from the
/// detected first path onward.
pub fn synthesize_diagnostics(waveform: &Waveform) -> ChannelDiagnostics {
    let samples = waveform.samples();
    let cir_power: f64 = samples.iter().map(|s| s * s).sum();
    let fp = waveform.first_path_index();
    let mut amps = [0.0; 3];
    for (i, amp) in amps.iter_mut().enumerate() {
        let idx = (fp + i).min(samples.len() - 1);
        *amp = FIRST_PATH_AMP_SCALE * samples[idx];
    }
    ChannelDiagnostics {
        cir_power,
        preamble_count: DEFAULT_PREAMBLE_COUNT,
        first_path_amps: amps,
        prf_constant_db: DEFAULT_PRF_CONSTANT_DB,
    }
}

/// Draw `n` labeled ranging records grouped into `pair_count` synthetic
/// anchor/tag pairs. Records of one pair share a geometry draw, so a
/// pair-wise split keeps train and test populations distinct.
pub fn sample_records(
    preset: &ScenarioPreset,
    n: usize,
    pair_count: usize,
    seed: u64,
) -> Result<Vec<RangingRecord>, SynthError> {
    if n == 0 || pair_count == 0 || pair_count > n {
        return Err(SynthError::InvalidRange(format!(
            "need 1 <= pair_count <= count, got pair_count {pair_count}, count {n}"
        )));
    }
    preset.validate()?;
    let slug = match preset.class {
        PropagationClass::Los => "los",
        PropagationClass::DpNlos => "dp",
        PropagationClass::NdpNlos => "ndp",
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let base = n / pair_count;
    let extra = n % pair_count;
    for p in 0..pair_count {
        let pair = PairContext::draw(&mut rng);
        let count = base + usize::from(p < extra);
        for _ in 0..count {
            let real = draw_realization(preset, &mut rng, Some(&pair));
            let waveform = render_cir(&real.spec)?;
            let diagnostics = synthesize_diagnostics(&waveform);
            out.push(RangingRecord::new(
                waveform,
                diagnostics,
                format!("{slug}-{p:02}"),
                Some(real.bias_m),
                Some(preset.class),
            )?);
        }
    }
    Ok(out)
}
