//! Criterion 6: every CLI command rerun with identical flags and seed
//! produces byte-identical output files.

use std::fs;
use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_nlosid"))
        .args(args)
        .output()
        .expect("spawn nlosid");
    assert!(
        out.status.success(),
        "nlosid {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn assert_identical(a: &Path, b: &Path, what: &str) {
    let ba = fs::read(a).unwrap();
    let bb = fs::read(b).unwrap();
    assert!(
        ba == bb,
        "{what}: {} and {} differ",
        a.display(),
        b.display()
    );
}

#[test]
fn criterion_6_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let s = |path: &std::path::PathBuf| path.to_str().unwrap().to_string();

    // synth: identical files across reruns, per preset
    for preset in ["los", "dp-nlos", "ndp-nlos"] {
        for tag in ["a", "b"] {
            run(&[
                "synth",
                "--preset",
                preset,
                "--count",
                "150",
                "--pairs",
                "3",
                "--seed",
                "17",
                "--out",
                &s(&p(&format!("{preset}-{tag}.jsonl"))),
            ]);
        }
        assert_identical(
            &p(&format!("{preset}-a.jsonl")),
            &p(&format!("{preset}-b.jsonl")),
            "synth",
        );
    }

    let mut merged = Vec::new();
    for preset in ["los", "dp-nlos", "ndp-nlos"] {
        merged.extend(fs::read(p(&format!("{preset}-a.jsonl"))).unwrap());
    }
    fs::write(p("all.jsonl"), &merged).unwrap();
    let all = s(&p("all.jsonl"));

    // featurize
    for tag in ["a", "b"] {
        run(&[
            "featurize",
            "--in",
            &all,
            "--out",
            &s(&p(&format!("features-{tag}.csv"))),
            "--include-meta",
        ]);
    }
    assert_identical(&p("features-a.csv"), &p("features-b.csv"), "featurize");

    // train with an internal pair split and held-out records
    for tag in ["a", "b"] {
        run(&[
            "train",
            "--in",
            &all,
            "--model-out",
            &s(&p(&format!("bundle-{tag}.json"))),
            "--train-pairs",
            "4",
            "--seed",
            "3",
            "--test-out",
            &s(&p(&format!("test-{tag}.jsonl"))),
        ]);
    }
    assert_identical(&p("bundle-a.json"), &p("bundle-b.json"), "train model");
    assert_identical(&p("test-a.jsonl"), &p("test-b.jsonl"), "train test split");

    // classify
    let bundle = s(&p("bundle-a.json"));
    let test = s(&p("test-a.jsonl"));
    for tag in ["a", "b"] {
        run(&[
            "classify",
            "--model",
            &bundle,
            "--in",
            &test,
            "--out",
            &s(&p(&format!("pred-{tag}.jsonl"))),
        ]);
    }
    assert_identical(&p("pred-a.jsonl"), &p("pred-b.jsonl"), "classify");

    // evaluate prints to stdout; compare captured bytes
    let eval_a = run(&[
        "evaluate",
        "--model",
        &bundle,
        "--in",
        &test,
        "--mode",
        "full_3class",
    ]);
    let eval_b = run(&[
        "evaluate",
        "--model",
        &bundle,
        "--in",
        &test,
        "--mode",
        "full_3class",
    ]);
    assert!(eval_a == eval_b, "evaluate stdout differs between reruns");

    // sweep
    fs::write(
        p("sweep.json"),
        br#"{"step1_subsets": [[1,2],[2,4,5]], "step2_subsets": [[10],[3,4]], "train_pair_count": 4, "seed": 3}"#,
    )
    .unwrap();
    let spec = s(&p("sweep.json"));
    for tag in ["a", "b"] {
        run(&[
            "sweep",
            "--spec",
            &spec,
            "--in",
            &all,
            "--report-out",
            &s(&p(&format!("report-{tag}"))),
        ]);
    }
    assert_identical(&p("report-a.txt"), &p("report-b.txt"), "sweep text");
    assert_identical(&p("report-a.json"), &p("report-b.json"), "sweep json");

    // histogram
    for tag in ["a", "b"] {
        run(&[
            "histogram",
            "--in",
            &all,
            "--feature",
            "10",
            "--bins",
            "24",
            "--out",
            &s(&p(&format!("hist-{tag}.txt"))),
        ]);
    }
    assert_identical(&p("hist-a.txt"), &p("hist-b.txt"), "histogram");

    println!(
        "[PASS] criterion 6: synth/featurize/train/classify/evaluate/sweep/histogram \
         byte-identical across reruns"
    );
}
