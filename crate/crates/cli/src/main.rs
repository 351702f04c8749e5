//! `nlosid` — synthetic UWB channel generation, feature extraction,
//! two-step propagation classification, evaluation, sweeps, and histograms
//! over canonical JSON-lines datasets.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nlosid_core::dataset::{atomic_write, read_dataset, write_dataset, ReadMode};
use nlosid_core::eval::{
    evaluate, export_histogram, render_histogram, render_rates, render_sweep, sweep, EvalMode,
    EvalTarget, SweepSpec,
};
use nlosid_core::pipeline::{
    build_samples, label_from_bias, split_by_pair, train_two_step, ClassifierBundle, KernelConfig,
    LabelingThresholds,
};
use nlosid_core::synth::{sample_records, ScenarioPreset};
use nlosid_core::{
    extract_features, FeatureConfig, FeatureVector, IntegrationRule, PropagationClass,
    RangingRecord, SvmModel, TrainConfig,
};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "nlosid",
    version,
    about = "UWB propagation-condition classification toolkit",
    after_help = "All randomness is controlled by explicit --seed flags; rerunning a command \
                  with identical flags produces byte-identical output files."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset from a scenario preset.
    Synth(SynthArgs),
    /// Extract the ten-feature vectors from a dataset into CSV.
    Featurize(FeaturizeArgs),
    /// Train the two-step classifier and write a model bundle.
    Train(TrainArgs),
    /// Classify records with a trained bundle; writes records with the
    /// predicted label filled in.
    Classify(ClassifyArgs),
    /// Report success rates of a model on a labeled dataset.
    Evaluate(EvaluateArgs),
    /// Train and evaluate one row per feature subset from a sweep spec.
    Sweep(SweepArgs),
    /// Export per-class histograms of one feature.
    Histogram(HistogramArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Los,
    DpNlos,
    NdpNlos,
}

impl PresetArg {
    fn preset(self) -> ScenarioPreset {
        match self {
            PresetArg::Los => ScenarioPreset::los(),
            PresetArg::DpNlos => ScenarioPreset::dp_nlos(),
            PresetArg::NdpNlos => ScenarioPreset::ndp_nlos(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    #[value(name = "left-riemann", alias = "left_riemann")]
    LeftRiemann,
    Trapezoid,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "step1")]
    Step1,
    #[value(name = "step2_true_nlos")]
    Step2TrueNlos,
    #[value(name = "step2_predicted_nlos")]
    Step2PredictedNlos,
    #[value(name = "full_3class")]
    Full3Class,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Step1 => EvalMode::Step1,
            ModeArg::Step2TrueNlos => EvalMode::Step2TrueNlos,
            ModeArg::Step2PredictedNlos => EvalMode::Step2PredictedNlos,
            ModeArg::Full3Class => EvalMode::Full3Class,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Rbf,
    Linear,
}

/// Feature extraction settings (times in nanoseconds).
#[derive(Args)]
struct FeatureArgs {
    /// Pre-first-path analysis span, ns.
    #[arg(long, default_value_t = 20.0)]
    tau_ns: f64,
    /// Analysis window start relative to the first path, ns.
    #[arg(long, default_value_t = -20.0, allow_hyphen_values = true)]
    window_start_ns: f64,
    /// Analysis window end relative to the first path, ns.
    #[arg(long, default_value_t = 100.0, allow_hyphen_values = true)]
    window_end_ns: f64,
    /// Integration rule for the windowed features.
    #[arg(long, value_enum, default_value = "trapezoid")]
    rule: RuleArg,
}

impl FeatureArgs {
    fn config(&self) -> FeatureConfig {
        FeatureConfig {
            tau_s: self.tau_ns * 1e-9,
            window_start_offset_s: self.window_start_ns * 1e-9,
            window_end_offset_s: self.window_end_ns * 1e-9,
            rule: match self.rule {
                RuleArg::LeftRiemann => IntegrationRule::LeftRiemann,
                RuleArg::Trapezoid => IntegrationRule::Trapezoid,
            },
        }
    }
}

/// Bias thresholds used when class labels must be derived from bias.
#[derive(Args)]
struct ThresholdArgs {
    /// Biases strictly below this are LOS, meters.
    #[arg(long, default_value_t = 0.05)]
    los_max_bias: f64,
    /// Biases up to and including this are DP-NLOS, meters.
    #[arg(long, default_value_t = 0.70)]
    dp_max_bias: f64,
}

impl ThresholdArgs {
    fn thresholds(&self) -> LabelingThresholds {
        LabelingThresholds {
            los_max_bias_m: self.los_max_bias,
            dp_max_bias_m: self.dp_max_bias,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario preset to draw from.
    #[arg(long, value_enum)]
    preset: PresetArg,
    /// Number of records to generate.
    #[arg(long)]
    count: usize,
    /// Number of synthetic anchor/tag pairs to group records into.
    #[arg(long, default_value_t = 10)]
    pairs: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset file (JSON lines).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturizeArgs {
    /// Input dataset file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    features: FeatureArgs,
    /// Skip malformed lines instead of aborting.
    #[arg(long)]
    lenient: bool,
    /// Append pair_id and label columns after the ten features.
    #[arg(long)]
    include_meta: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Input dataset file (labeled, or with biases to derive labels).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output model bundle file.
    #[arg(long)]
    model_out: PathBuf,
    /// Step-1 (LOS/NLOS) feature numbers, comma separated.
    #[arg(long, default_value = "2,4,5")]
    step1_features: String,
    /// Step-2 (DP/NDP) feature numbers, comma separated.
    #[arg(long, default_value = "3,4,10")]
    step2_features: String,
    /// Kernel kind.
    #[arg(long, value_enum, default_value = "rbf")]
    kernel: KernelArg,
    /// RBF width; "auto" means 1 / feature_count.
    #[arg(long, default_value = "auto")]
    gamma: String,
    /// Soft-margin box constraint.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// KKT tolerance.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Cap on optimization passes over the training data.
    #[arg(long, default_value_t = 100)]
    max_passes: usize,
    /// Random seed for the optimizer and the optional split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train on this many whole pairs instead of the full file.
    #[arg(long)]
    train_pairs: Option<usize>,
    /// With --train-pairs: write the held-out records here.
    #[arg(long)]
    test_out: Option<PathBuf>,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Trained model bundle.
    #[arg(long)]
    model: PathBuf,
    /// Input dataset file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output dataset file with predicted labels.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Trained model bundle, or a single binary model file for the step1 /
    /// step2_true_nlos modes.
    #[arg(long)]
    model: PathBuf,
    /// Labeled dataset to evaluate on.
    #[arg(long = "in")]
    input: PathBuf,
    /// Evaluation population and decision function.
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Print the machine-readable report instead of text.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec file (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Labeled dataset.
    #[arg(long = "in")]
    input: PathBuf,
    /// Report base path; writes <base>.txt and <base>.json.
    #[arg(long)]
    report_out: PathBuf,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct HistogramArgs {
    /// Input dataset file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Feature number (1..10) to histogram.
    #[arg(long)]
    feature: usize,
    /// Number of equal-width bins.
    #[arg(long, default_value_t = 40)]
    bins: usize,
    /// Fixed range as "lo,hi"; data min..max when omitted.
    #[arg(long)]
    range: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    #[arg(long)]
    lenient: bool,
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => cmd_synth(args),
        Command::Featurize(args) => cmd_featurize(args),
        Command::Train(args) => cmd_train(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Histogram(args) => cmd_histogram(args),
    }
}

fn read_records(path: &Path, lenient: bool) -> Result<Vec<RangingRecord>> {
    let mode = if lenient {
        ReadMode::Lenient
    } else {
        ReadMode::Strict
    };
    let outcome =
        read_dataset(path, mode).with_context(|| format!("reading {}", path.display()))?;
    if !outcome.skipped.is_empty() {
        eprintln!(
            "skipped {} malformed line(s), first: line {}: {}",
            outcome.skipped.len(),
            outcome.skipped[0].0,
            outcome.skipped[0].1
        );
    }
    if outcome.records.is_empty() {
        bail!("{} contains no records", path.display());
    }
    Ok(outcome.records)
}

fn parse_feature_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| anyhow!("invalid feature number {tok:?} in {s:?}"))
        })
        .collect()
}

fn parse_gamma(s: &str) -> Result<Option<f64>> {
    if s == "auto" {
        return Ok(None);
    }
    let g: f64 = s
        .parse()
        .map_err(|_| anyhow!("gamma must be \"auto\" or a positive number, got {s:?}"))?;
    Ok(Some(g))
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let records = sample_records(&args.preset.preset(), args.count, args.pairs, args.seed)
        .context("generating records")?;
    write_dataset(&records, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} records in {} pairs to {}",
        records.len(),
        args.pairs,
        args.out.display()
    );
    Ok(())
}

fn cmd_featurize(args: FeaturizeArgs) -> Result<()> {
    let records = read_records(&args.input, args.lenient)?;
    let cfg = args.features.config();
    let mut out = String::new();
    out.push_str(&FeatureVector::NAMES.join(","));
    if args.include_meta {
        out.push_str(",pair_id,label");
    }
    out.push('\n');
    for (i, rec) in records.iter().enumerate() {
        let fv = extract_features(rec, &cfg)
            .with_context(|| format!("extracting features for record {}", i + 1))?;
        let row = fv
            .as_array()
            .iter()
            .map(|v| format!("{v:e}"))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&row);
        if args.include_meta {
            let label = rec.label.map(|l| l.label()).unwrap_or("");
            let _ = write!(out, ",{},{}", rec.pair_id, label);
        }
        out.push('\n');
    }
    atomic_write(&args.out, out.as_bytes())
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} feature rows to {}",
        records.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let records = read_records(&args.input, args.lenient)?;
    let feature_cfg = args.features.config();
    let thresholds = args.thresholds.thresholds();
    let samples =
        build_samples(&records, &feature_cfg, &thresholds).context("preparing training samples")?;

    let (train_samples, test_pairs) = match args.train_pairs {
        None => (samples, None),
        Some(n) => {
            let (train, test) = split_by_pair(&samples, n, args.seed).context("splitting")?;
            let test_pairs: BTreeSet<String> = test.iter().map(|s| s.pair_id.clone()).collect();
            (train, Some(test_pairs))
        }
    };

    if let (Some(test_pairs), Some(test_out)) = (&test_pairs, &args.test_out) {
        let held_out: Vec<RangingRecord> = records
            .iter()
            .filter(|r| test_pairs.contains(&r.pair_id))
            .cloned()
            .collect();
        write_dataset(&held_out, test_out)
            .with_context(|| format!("writing {}", test_out.display()))?;
        println!(
            "wrote {} held-out records to {}",
            held_out.len(),
            test_out.display()
        );
    }

    let step1 = parse_feature_list(&args.step1_features)?;
    let step2 = parse_feature_list(&args.step2_features)?;
    let kernel = match args.kernel {
        KernelArg::Linear => KernelConfig::Linear,
        KernelArg::Rbf => KernelConfig::Rbf {
            gamma: parse_gamma(&args.gamma)?,
        },
    };
    let train_cfg = TrainConfig {
        c: args.c,
        tol: args.tol,
        max_passes: args.max_passes,
        seed: args.seed,
    };
    let classifier =
        train_two_step(&train_samples, &step1, &step2, &kernel, &train_cfg).context("training")?;
    if !classifier.step1.converged || !classifier.step2.converged {
        eprintln!(
            "warning: optimizer did not meet the KKT tolerance (step1: {}, step2: {})",
            classifier.step1.converged, classifier.step2.converged
        );
    }
    println!(
        "trained on {} samples: step1 {} support vectors, step2 {}",
        train_samples.len(),
        classifier.step1.support_vectors.len(),
        classifier.step2.support_vectors.len()
    );
    let bundle = ClassifierBundle::new(classifier, thresholds, feature_cfg);
    atomic_write(&args.model_out, &bundle.save())
        .with_context(|| format!("writing {}", args.model_out.display()))?;
    println!("wrote model bundle to {}", args.model_out.display());
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    let bytes =
        std::fs::read(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let bundle = ClassifierBundle::load(&bytes)
        .with_context(|| format!("loading bundle {}", args.model.display()))?;
    let records = read_records(&args.input, args.lenient)?;
    let mut out = Vec::with_capacity(records.len());
    for (i, rec) in records.into_iter().enumerate() {
        let fv = extract_features(&rec, &bundle.feature_config)
            .with_context(|| format!("extracting features for record {}", i + 1))?;
        let predicted = bundle.classifier.classify(&fv)?;
        out.push(RangingRecord {
            label: Some(predicted),
            ..rec
        });
    }
    write_dataset(&out, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "classified {} records into {}",
        out.len(),
        args.out.display()
    );
    Ok(())
}

/// A model file is either a two-step bundle or a single binary model.
enum LoadedModel {
    Bundle(Box<ClassifierBundle>),
    Single(Box<SvmModel>),
}

fn load_model(path: &Path) -> Result<LoadedModel> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match ClassifierBundle::load(&bytes) {
        Ok(bundle) => Ok(LoadedModel::Bundle(Box::new(bundle))),
        Err(bundle_err) => match SvmModel::load(&bytes) {
            Ok(model) => Ok(LoadedModel::Single(Box::new(model))),
            Err(_) => Err(anyhow!(
                "{} is neither a bundle nor a model: {bundle_err}",
                path.display()
            )),
        },
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let loaded = load_model(&args.model)?;
    let records = read_records(&args.input, args.lenient)?;
    let (feature_cfg, thresholds) = match &loaded {
        LoadedModel::Bundle(b) => (b.feature_config, b.thresholds),
        LoadedModel::Single(_) => (args.features.config(), args.thresholds.thresholds()),
    };
    let samples =
        build_samples(&records, &feature_cfg, &thresholds).context("preparing labeled samples")?;
    let target = match &loaded {
        LoadedModel::Bundle(b) => EvalTarget::TwoStep(&b.classifier),
        LoadedModel::Single(m) => EvalTarget::Single(m),
    };
    let rates = evaluate(target, &samples, args.mode.into()).context("evaluating")?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rates)?);
    } else {
        print!("{}", render_rates(&rates));
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let spec_bytes =
        std::fs::read(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let spec: SweepSpec = serde_json::from_slice(&spec_bytes).context("parsing sweep spec")?;
    let records = read_records(&args.input, args.lenient)?;
    let samples = build_samples(
        &records,
        &args.features.config(),
        &args.thresholds.thresholds(),
    )
    .context("preparing labeled samples")?;
    let report = sweep(&spec, &samples).context("running sweep")?;
    let text = render_sweep(&report);
    let txt_path = args.report_out.with_extension("txt");
    let json_path = args.report_out.with_extension("json");
    atomic_write(&txt_path, text.as_bytes())
        .with_context(|| format!("writing {}", txt_path.display()))?;
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    atomic_write(&json_path, &json).with_context(|| format!("writing {}", json_path.display()))?;
    print!("{text}");
    println!("wrote {} and {}", txt_path.display(), json_path.display());
    Ok(())
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| anyhow!("range must be \"lo,hi\", got {s:?}"))?;
    Ok((
        lo.trim()
            .parse()
            .map_err(|_| anyhow!("bad range low {lo:?}"))?,
        hi.trim()
            .parse()
            .map_err(|_| anyhow!("bad range high {hi:?}"))?,
    ))
}

fn cmd_histogram(args: HistogramArgs) -> Result<()> {
    if !(1..=10).contains(&args.feature) {
        bail!("feature number must be in 1..=10, got {}", args.feature);
    }
    let records = read_records(&args.input, args.lenient)?;
    let cfg = args.features.config();
    let thresholds = args.thresholds.thresholds();

    // (resolved class, feature value) per record; class resolution mirrors
    // training: explicit label first, bias second.
    let mut values: Vec<(Option<PropagationClass>, f64)> = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let fv = extract_features(rec, &cfg)
            .with_context(|| format!("extracting features for record {}", i + 1))?;
        let class = match (rec.label, rec.bias_m) {
            (Some(label), _) => Some(label),
            (None, Some(bias)) => Some(label_from_bias(bias, &thresholds)?),
            (None, None) => None,
        };
        values.push((class, fv.get(args.feature).expect("validated index")));
    }

    let range = match &args.range {
        Some(s) => parse_range(s)?,
        None => {
            let lo = values.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
            let hi = values
                .iter()
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        }
    };

    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for class in PropagationClass::ALL {
        let vals: Vec<f64> = values
            .iter()
            .filter(|(c, _)| *c == Some(class))
            .map(|(_, v)| *v)
            .collect();
        if !vals.is_empty() {
            groups.push((class.label().to_string(), vals));
        }
    }
    let unlabeled: Vec<f64> = values
        .iter()
        .filter(|(c, _)| c.is_none())
        .map(|(_, v)| *v)
        .collect();
    if !unlabeled.is_empty() {
        groups.push(("UNLABELED".to_string(), unlabeled));
    }

    let feature_name = FeatureVector::NAMES[args.feature - 1];
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# feature {} ({feature_name}), {} bins over [{:e}, {:e}]",
        args.feature, args.bins, range.0, range.1
    );
    for (name, mut vals) in groups {
        let h = export_histogram(&vals, args.bins, Some(range))
            .with_context(|| format!("histogram for {name}"))?;
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = vals[vals.len() / 2];
        let _ = writeln!(
            out,
            "# class={name} count={} mean={mean:e} median={median:e} out_of_range={}",
            vals.len(),
            h.out_of_range
        );
        out.push_str(&render_histogram(&h));
        out.push('\n');
    }
    match &args.out {
        Some(path) => {
            atomic_write(path, out.as_bytes())
                .with_context(|| format!("writing {}", path.display()))?;
            println!("wrote histogram to {}", path.display());
        }
        None => print!("{out}"),
    }
    Ok(())
}
