//! Criterion 7: feature covariance properties and the decision tie rules,
//! checked over 1000 generated cases each.

use nlosid_core::features::{
    compute_amplitude, compute_energy, compute_kurtosis, compute_mean_excess_delay,
    compute_mean_magnitude, compute_pre_fp_variance, compute_rfpr, compute_rms_delay_spread,
    compute_variance_magnitude, FeatureConfig, FeatureVector,
};
use nlosid_core::pipeline::{label_from_bias, LabelingThresholds, TwoStepClassifier};
use nlosid_core::svm::{KernelSpec, Standardizer, SvmModel, MODEL_FORMAT_VERSION};
use nlosid_core::{ChannelDiagnostics, PropagationClass, Waveform};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

const CASES: u32 = 1000;

fn runner() -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases: CASES,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn assert_rel(got: f64, want: f64, tol: f64, what: &str) -> Result<(), TestCaseError> {
    let scale = want.abs().max(1e-300);
    prop_assert!(
        ((got - want) / scale).abs() <= tol,
        "{what}: got {got:e}, want {want:e}"
    );
    Ok(())
}

/// Waveform with enough leading samples for the pre-FP window and enough
/// tail for the default analysis window (1 ns period).
fn waveform_strategy() -> impl Strategy<Value = Waveform> {
    (
        25usize..=30,
        proptest::collection::vec(0.01f64..1.0, 140..260),
    )
        .prop_map(|(fp, samples)| Waveform::new(samples, 1e-9, fp).unwrap())
}

#[test]
fn criterion_7_invariance_suite() {
    let cfg = FeatureConfig::default();

    // scale covariance: energy s^2, mean s, variance s^2, amplitude s,
    // pre-FP variance s^2; kurtosis and both delay statistics unchanged
    runner()
        .run(&(waveform_strategy(), -3.0f64..3.0), |(w, exponent)| {
            let s = 10f64.powf(exponent);
            let scaled = w.scaled(s).unwrap();
            assert_rel(
                compute_energy(&scaled, &cfg).unwrap(),
                s * s * compute_energy(&w, &cfg).unwrap(),
                1e-9,
                "energy",
            )?;
            assert_rel(
                compute_mean_magnitude(&scaled, &cfg).unwrap(),
                s * compute_mean_magnitude(&w, &cfg).unwrap(),
                1e-9,
                "mean",
            )?;
            assert_rel(
                compute_variance_magnitude(&scaled, &cfg).unwrap(),
                s * s * compute_variance_magnitude(&w, &cfg).unwrap(),
                1e-9,
                "variance",
            )?;
            assert_rel(
                compute_amplitude(&scaled, &cfg).unwrap(),
                s * compute_amplitude(&w, &cfg).unwrap(),
                1e-9,
                "amplitude",
            )?;
            assert_rel(
                compute_pre_fp_variance(&scaled, &cfg).unwrap(),
                s * s * compute_pre_fp_variance(&w, &cfg).unwrap(),
                1e-9,
                "pre-FP variance",
            )?;
            assert_rel(
                compute_kurtosis(&scaled, &cfg).unwrap(),
                compute_kurtosis(&w, &cfg).unwrap(),
                1e-9,
                "kurtosis",
            )?;
            assert_rel(
                compute_mean_excess_delay(&scaled, &cfg).unwrap(),
                compute_mean_excess_delay(&w, &cfg).unwrap(),
                1e-9,
                "mean excess delay",
            )?;
            assert_rel(
                compute_rms_delay_spread(&scaled, &cfg).unwrap(),
                compute_rms_delay_spread(&w, &cfg).unwrap(),
                1e-9,
                "delay spread",
            )?;
            Ok(())
        })
        .unwrap();

    // time-shift covariance: delaying by k samples moves the mean excess
    // delay by k*dt and leaves window-anchored features unchanged
    runner()
        .run(&(waveform_strategy(), 0usize..50), |(w, k)| {
            let shifted = w.shifted(k).unwrap();
            let dt = w.sample_period_s();
            assert_rel(
                compute_mean_excess_delay(&shifted, &cfg).unwrap(),
                compute_mean_excess_delay(&w, &cfg).unwrap() + k as f64 * dt,
                1e-9,
                "shifted mean excess delay",
            )?;
            for (name, a, b) in [
                (
                    "energy",
                    compute_energy(&shifted, &cfg).unwrap(),
                    compute_energy(&w, &cfg).unwrap(),
                ),
                (
                    "delay spread",
                    compute_rms_delay_spread(&shifted, &cfg).unwrap(),
                    compute_rms_delay_spread(&w, &cfg).unwrap(),
                ),
                (
                    "mean",
                    compute_mean_magnitude(&shifted, &cfg).unwrap(),
                    compute_mean_magnitude(&w, &cfg).unwrap(),
                ),
                (
                    "variance",
                    compute_variance_magnitude(&shifted, &cfg).unwrap(),
                    compute_variance_magnitude(&w, &cfg).unwrap(),
                ),
                (
                    "kurtosis",
                    compute_kurtosis(&shifted, &cfg).unwrap(),
                    compute_kurtosis(&w, &cfg).unwrap(),
                ),
                (
                    "amplitude",
                    compute_amplitude(&shifted, &cfg).unwrap(),
                    compute_amplitude(&w, &cfg).unwrap(),
                ),
                (
                    "pre-FP variance",
                    compute_pre_fp_variance(&shifted, &cfg).unwrap(),
                    compute_pre_fp_variance(&w, &cfg).unwrap(),
                ),
            ] {
                assert_rel(a, b, 1e-9, name)?;
            }
            Ok(())
        })
        .unwrap();

    // prediction sign rule: negative score -> -1, otherwise +1 (ties to +1)
    runner()
        .run(
            &(
                proptest::collection::vec(
                    (proptest::collection::vec(-2.0f64..2.0, 2), -1.0f64..1.0),
                    1..4,
                ),
                -2.0f64..2.0,
                proptest::collection::vec(-3.0f64..3.0, 2),
                proptest::bool::ANY,
            ),
            |(svs, bias, row, linear)| {
                let model = SvmModel {
                    format_version: MODEL_FORMAT_VERSION,
                    kernel: if linear {
                        KernelSpec::Linear
                    } else {
                        KernelSpec::Rbf { gamma: 0.7 }
                    },
                    standardizer: Standardizer::identity(2),
                    feature_indices: vec![1, 2],
                    support_vectors: svs.iter().map(|(sv, _)| sv.clone()).collect(),
                    dual_coefs: svs.iter().map(|(_, c)| *c).collect(),
                    bias,
                    support_indices: (0..svs.len()).collect(),
                    trained_c: 1.0,
                    converged: true,
                };
                let p = model.predict(&row).unwrap();
                prop_assert_eq!(p.label, if p.score >= 0.0 { 1 } else { -1 });

                // exact boundary: zero coefficients and zero bias
                let mut boundary = model;
                boundary.dual_coefs.iter_mut().for_each(|c| *c = 0.0);
                boundary.bias = 0.0;
                let p0 = boundary.predict(&row).unwrap();
                prop_assert_eq!(p0.score, 0.0);
                prop_assert_eq!(p0.label, 1, "score 0 must fall to the positive class");
                Ok(())
            },
        )
        .unwrap();

    // labeling: partition of [-los_max, inf) into the three classes,
    // monotone in bias; more-negative biases rejected
    let th = LabelingThresholds::default();
    runner()
        .run(&(-0.05f64..5.0, -0.05f64..5.0), |(b1, b2)| {
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            for b in [lo, hi] {
                let class = label_from_bias(b, &th).unwrap();
                let expected = if b < th.los_max_bias_m {
                    PropagationClass::Los
                } else if b <= th.dp_max_bias_m {
                    PropagationClass::DpNlos
                } else {
                    PropagationClass::NdpNlos
                };
                prop_assert_eq!(class, expected, "bias {}", b);
            }
            let c_lo = label_from_bias(lo, &th).unwrap();
            let c_hi = label_from_bias(hi, &th).unwrap();
            prop_assert!(c_lo.severity() <= c_hi.severity());
            Ok(())
        })
        .unwrap();
    runner()
        .run(&(-100.0f64..-0.0501), |b| {
            prop_assert!(
                label_from_bias(b, &th).is_err(),
                "bias {} must be rejected",
                b
            );
            Ok(())
        })
        .unwrap();

    // two-step workflow: classify equals the manual composition of the two
    // decisions, with ties falling to NLOS and then NDP
    runner()
        .run(
            &(
                -1.0f64..1.0,
                -1.0f64..1.0,
                proptest::collection::vec(-1e3f64..1e3, 10),
            ),
            |(bias1, bias2, raw)| {
                let constant = |bias: f64| SvmModel {
                    format_version: MODEL_FORMAT_VERSION,
                    kernel: KernelSpec::Linear,
                    standardizer: Standardizer::identity(1),
                    feature_indices: vec![1],
                    support_vectors: vec![vec![0.0]],
                    dual_coefs: vec![0.0],
                    bias,
                    support_indices: vec![0],
                    trained_c: 1.0,
                    converged: true,
                };
                let classifier = TwoStepClassifier {
                    step1: constant(bias1),
                    step2: constant(bias2),
                };
                let fv = FeatureVector {
                    rsl_dbm: raw[0],
                    rfpr_db: raw[1],
                    energy: raw[2],
                    mean_excess_delay_s: raw[3],
                    rms_delay_spread: raw[4],
                    mean_magnitude: raw[5],
                    variance_magnitude: raw[6],
                    kurtosis: raw[7],
                    amplitude: raw[8],
                    pre_fp_variance: raw[9],
                };
                let got = classifier.classify(&fv).unwrap();
                let expected = if bias1 < 0.0 {
                    PropagationClass::Los
                } else if bias2 < 0.0 {
                    PropagationClass::DpNlos
                } else {
                    PropagationClass::NdpNlos
                };
                prop_assert_eq!(got, expected);
                Ok(())
            },
        )
        .unwrap();

    // the received-to-first-path ratio is independent of the PRF constant
    runner()
        .run(
            &(
                1e-3f64..1e6,
                1.0f64..4096.0,
                1e-3f64..1e4,
                0.0f64..1e4,
                0.0f64..1e4,
            ),
            |(c, n, f1, f2, f3)| {
                let with = |a: f64| ChannelDiagnostics {
                    cir_power: c,
                    preamble_count: n,
                    first_path_amps: [f1, f2, f3],
                    prf_constant_db: a,
                };
                let r0 = compute_rfpr(&with(0.0)).unwrap();
                let r1 = compute_rfpr(&with(113.77)).unwrap();
                prop_assert!(
                    (r0 - r1).abs() <= 1e-12 * r0.abs().max(1.0),
                    "rfpr {} vs {}",
                    r0,
                    r1
                );
                Ok(())
            },
        )
        .unwrap();

    println!(
        "[PASS] criterion 7: scale/shift covariance, decision tie rules, labeling partition \
         and PRF-constant invariance hold over {CASES} cases each"
    );
}
