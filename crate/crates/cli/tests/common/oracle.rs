//! Naive-summation oracles, kept deliberately independent of the library's
//! integration machinery: plain index loops over plainly selected windows.

use nlosid_core::features::{FeatureConfig, IntegrationRule};
use nlosid_core::svm::{KernelSpec, SvmModel};
use nlosid_core::{ChannelDiagnostics, Waveform};

pub struct NaiveFeatures {
    pub energy: f64,
    pub mean_excess_delay_s: f64,
    pub rms_delay_spread: f64,
    pub mean_magnitude: f64,
    pub variance_magnitude: f64,
    pub kurtosis: f64,
    pub pre_fp_variance: f64,
}

/// Left-Riemann naive evaluation of features 3-8 and 10. Panics if the
/// config is not left-Riemann, since that is the rule the oracle encodes.
pub fn features_naive(w: &Waveform, cfg: &FeatureConfig) -> NaiveFeatures {
    assert_eq!(cfg.rule, IntegrationRule::LeftRiemann);
    let dt = w.sample_period_s();
    let t_fp = w.first_path_index() as f64 * dt;

    // window selection by plain ceil index arithmetic
    let lo = ((t_fp + cfg.window_start_offset_s) / dt).ceil().max(0.0) as usize;
    let hi = (((t_fp + cfg.window_end_offset_s) / dt).ceil() as usize).min(w.len());
    let win = &w.samples()[lo..hi];
    let t0 = lo as f64 * dt;
    let span = win.len() as f64 * dt;

    let mut energy = 0.0;
    for &v in win {
        energy += v * v * dt;
    }
    let mut med = 0.0;
    for (k, &v) in win.iter().enumerate() {
        med += (t0 + k as f64 * dt) * v * v * dt;
    }
    let med = med / energy;
    let mut rms = 0.0;
    for (k, &v) in win.iter().enumerate() {
        let t = t0 + k as f64 * dt;
        rms += (t - med) * (t - med) * v * v * dt;
    }
    let rms = rms / energy;

    let mut mean = 0.0;
    for &v in win {
        mean += v * dt;
    }
    let mean = mean / span;
    let mut var = 0.0;
    for &v in win {
        var += (v - mean) * (v - mean) * dt;
    }
    let var = var / span;
    let mut m4 = 0.0;
    for &v in win {
        let d = v - mean;
        m4 += d * d * d * d * dt;
    }
    let kurtosis = m4 / (var * var * span);

    NaiveFeatures {
        energy,
        mean_excess_delay_s: med,
        rms_delay_spread: rms,
        mean_magnitude: mean,
        variance_magnitude: var,
        kurtosis,
        pre_fp_variance: pre_fp_variance_naive(w, cfg.tau_s),
    }
}

/// Variance over the clipped `[T_FP - tau_s, T_FP)` window, left-Riemann,
/// normalized by the covered span.
pub fn pre_fp_variance_naive(w: &Waveform, tau_s: f64) -> f64 {
    let dt = w.sample_period_s();
    let fp = w.first_path_index();
    let t_fp = fp as f64 * dt;
    let lo = ((t_fp - tau_s) / dt).ceil().max(0.0) as usize;
    let win = &w.samples()[lo..fp];
    let mut mean = 0.0;
    for &v in win {
        mean += v;
    }
    let mean = mean / win.len() as f64;
    let mut var = 0.0;
    for &v in win {
        var += (v - mean) * (v - mean);
    }
    var / win.len() as f64
}

/// Received power level evaluated through log identities
/// (`log(C 2^17 / N^2) = ln C + 17 ln 2 - 2 ln N`), an algebraically
/// different route than the direct ratio.
pub fn rsl_log_identity(d: &ChannelDiagnostics) -> f64 {
    let ln10 = std::f64::consts::LN_10;
    let ln2 = std::f64::consts::LN_2;
    10.0 * (d.cir_power.ln() + 17.0 * ln2 - 2.0 * d.preamble_count.ln()) / ln10 - d.prf_constant_db
}

pub fn fsl_log_identity(d: &ChannelDiagnostics) -> f64 {
    let ln10 = std::f64::consts::LN_10;
    let fp: f64 = d.first_path_amps.iter().map(|f| f * f).sum();
    10.0 * (fp.ln() - 2.0 * d.preamble_count.ln()) / ln10 - d.prf_constant_db
}

/// Dual objective `sum a_i - 1/2 sum a_i a_j y_i y_j K_ij` reconstructed
/// from a trained model (non-support multipliers are zero).
pub fn dual_objective_of_model(model: &SvmModel, kernel: &KernelSpec) -> f64 {
    let alphas: Vec<f64> = model.dual_coefs.iter().map(|c| c.abs()).collect();
    let mut obj: f64 = alphas.iter().sum();
    for (i, svi) in model.support_vectors.iter().enumerate() {
        for (j, svj) in model.support_vectors.iter().enumerate() {
            obj -= 0.5 * model.dual_coefs[i] * model.dual_coefs[j] * kernel.eval(svi, svj);
        }
    }
    obj
}
