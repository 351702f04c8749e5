//! Property coverage for the serialization round trip and the windowing
//! identity.

use nlosid_core::dataset::{read_dataset, write_dataset, ReadMode};
use nlosid_core::{ChannelDiagnostics, PropagationClass, RangingRecord, Waveform};
use proptest::prelude::*;

fn record_strategy() -> impl Strategy<Value = RangingRecord> {
    (
        proptest::collection::vec(0.0f64..10.0, 2..64),
        1e-10f64..1e-8,
        (
            0.1f64..1e7,
            1.0f64..4096.0,
            [0.0f64..1e4, 0.0f64..1e4, 0.0f64..1e4],
            -200.0f64..200.0,
        ),
        "[a-z]{1,8}-[0-9]{1,3}",
        proptest::option::of(-0.04f64..6.0),
        proptest::option::of(0usize..3),
    )
        .prop_map(|(samples, period, (c, n, f, a), pair_id, bias, label)| {
            let fp = samples.len() / 2;
            RangingRecord::new(
                Waveform::new(samples, period, fp).unwrap(),
                ChannelDiagnostics::new(c, n, f, a).unwrap(),
                pair_id,
                bias,
                label.map(|i| PropagationClass::ALL[i]),
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dataset_round_trip_is_bit_exact(records in proptest::collection::vec(record_strategy(), 1..8)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.jsonl");
        write_dataset(&records, &path).unwrap();
        let got = read_dataset(&path, ReadMode::Strict).unwrap();
        prop_assert!(got.skipped.is_empty());
        prop_assert_eq!(got.records, records);
    }

    #[test]
    fn full_extent_window_is_identity(
        samples in proptest::collection::vec(0.0f64..5.0, 2..128),
        period in 1e-10f64..1e-8,
    ) {
        let w = Waveform::new(samples.clone(), period, 0).unwrap();
        let win = w.magnitude_window(0.0, w.duration_s()).unwrap();
        prop_assert_eq!(win, &samples[..]);
    }
}
