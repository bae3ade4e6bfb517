use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use symptom_forecast::baselines::{pv_predict, NaivePrior};
use symptom_forecast::domain::{
    build_transitions, content_hash, date_split, default_split_date, ingest_csv, load_transitions, save_transitions,
    variant_dataset, write_profiles, write_surveys, ModelVariant, Symptom, SymptomLevel,
};
use symptom_forecast::explain::importance_summary;
use symptom_forecast::gbdt::{GbdtModel, GbdtParams};
use symptom_forecast::harness::{
    cv_depth_sweep, evaluate_model, train_variant, write_table, HarnessConfig, Strategy, StrategyReport,
};
use symptom_forecast::metrics::evaluate;
use symptom_forecast::sampling::SmoteConfig;
use symptom_forecast::synthgen::{audit, generate, CohortConfig};
use symptom_forecast::{Error, NUM_CLASSES};

#[derive(Parser)]
#[command(name = "symforecast", version, about = "Symptom level forecasting on irregular patient surveys")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log more detail (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort: profiles.csv, surveys.csv and audit.json.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the config's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's n_patients.
        #[arg(long)]
        patients: Option<usize>,
    },
    /// Build transition examples from profile and survey CSVs.
    Ingest {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        surveys: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split transitions by the date of the predicted survey.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = default_split_date())]
        date: NaiveDate,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
    },
    /// Cross-validate max_depth with oversampling inside each fold.
    Cv {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        variant: ModelVariant,
        /// A range such as 1..25, a single depth, or a comma-separated list.
        #[arg(long, default_value = "1..25", value_parser = parse_depths)]
        depths: Depths,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Train on the raw fold data instead of oversampling it.
        #[arg(long)]
        no_smote: bool,
        #[command(flatten)]
        boost: BoostArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model variant.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        variant: ModelVariant,
        #[arg(long)]
        depth: usize,
        /// Oversample the training set before fitting.
        #[arg(long)]
        smote: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Omit node cover counts (the model can then not be explained).
        #[arg(long)]
        no_covers: bool,
        #[command(flatten)]
        boost: BoostArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score models and baselines on a test set.
    Evaluate {
        /// Model file; repeat for the second variant.
        #[arg(long, required = true)]
        model: Vec<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "np,pv")]
        baselines: Vec<String>,
        /// Training transitions for the naive prior (defaults to the counts stored in the model).
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Per-feature, per-class mean |SHAP| and split gain.
    Explain {
        #[arg(long)]
        model: PathBuf,
        /// Transitions to explain, typically the test set.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct BoostArgs {
    #[arg(long, default_value_t = GbdtParams::default().num_rounds)]
    rounds: usize,
    #[arg(long, default_value_t = GbdtParams::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = GbdtParams::default().max_leaves)]
    max_leaves: usize,
    #[arg(long, default_value_t = GbdtParams::default().min_samples_per_leaf)]
    min_samples_leaf: usize,
    #[arg(long, default_value_t = GbdtParams::default().l2_lambda)]
    lambda: f64,
}

impl BoostArgs {
    fn params(&self, max_depth: usize, seed: u64) -> GbdtParams {
        GbdtParams {
            max_depth,
            num_rounds: self.rounds,
            learning_rate: self.learning_rate,
            max_leaves: self.max_leaves,
            min_samples_per_leaf: self.min_samples_leaf,
            l2_lambda: self.lambda,
            rng_seed: seed,
            ..GbdtParams::default()
        }
    }
}

#[derive(Clone, Debug)]
struct Depths(Vec<usize>);

fn parse_depths(s: &str) -> Result<Depths, String> {
    let bad = || format!("invalid depth list {s:?}; expected e.g. 1..25, 6, or 2,4,8");
    let s = s.trim();
    let depths: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if depths.is_empty() || depths.contains(&0) {
        return Err(bad());
    }
    Ok(Depths(depths))
}

/// Failures mapped to exit codes: 2 usage, 3 data, 4 internal.
enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => Failure::Usage(m),
            e if e.is_internal() => Failure::Internal(e.to_string()),
            e => Failure::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn synth(config: Option<PathBuf>, out_dir: PathBuf, seed: Option<u64>, patients: Option<usize>) -> CmdResult {
    let mut cfg: CohortConfig = match config {
        Some(p) => serde_json::from_reader(File::open(&p)?)?,
        None => CohortConfig::default(),
    };
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    if let Some(n) = patients {
        cfg.n_patients = n;
    }
    let (profiles, surveys) = generate(&cfg)?;
    std::fs::create_dir_all(&out_dir)?;
    let mut w = create(&out_dir.join("profiles.csv"))?;
    write_profiles(&mut w, &profiles)?;
    w.flush()?;
    let mut w = create(&out_dir.join("surveys.csv"))?;
    write_surveys(&mut w, &surveys)?;
    w.flush()?;
    let report = audit(&profiles, &surveys, cfg.split_date)?;
    write_json(&out_dir.join("audit.json"), &report)?;
    log::info!(
        "{} patients, {} surveys, {} transitions",
        report.n_patients,
        report.n_surveys,
        report.n_transitions
    );
    Ok(())
}

fn ingest(profiles: PathBuf, surveys: PathBuf, out: PathBuf) -> CmdResult {
    let (profiles, surveys) = ingest_csv(&profiles, &surveys)?;
    let transitions = build_transitions(&profiles, &surveys)?;
    save_transitions(&out, &transitions)?;
    log::info!("{} transitions from {} patients", transitions.len(), profiles.len());
    Ok(())
}

fn split(input: PathBuf, date: NaiveDate, out_train: PathBuf, out_test: PathBuf) -> CmdResult {
    let transitions = load_transitions(&input)?;
    let split = date_split(&transitions, date);
    save_transitions(&out_train, &split.train)?;
    save_transitions(&out_test, &split.test)?;
    log::info!("{} train / {} test examples", split.train.len(), split.test.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cv(
    train: PathBuf,
    variant: ModelVariant,
    depths: Depths,
    folds: usize,
    seed: u64,
    no_smote: bool,
    boost: BoostArgs,
    out: PathBuf,
) -> CmdResult {
    let examples = load_transitions(&train)?;
    let config = HarnessConfig {
        n_folds: folds,
        depths: depths.0,
        params: boost.params(1, seed),
        smote: !no_smote,
        seed,
        ..HarnessConfig::default()
    };
    let result = cv_depth_sweep(&examples, variant, &config)?;
    log::info!("selected depth {}", result.selected_depth);
    write_json(&out, &result)
}

#[allow(clippy::too_many_arguments)]
fn train(
    train: PathBuf,
    variant: ModelVariant,
    depth: usize,
    smote: bool,
    seed: u64,
    no_covers: bool,
    boost: BoostArgs,
    out: PathBuf,
) -> CmdResult {
    let examples = load_transitions(&train)?;
    let params = boost.params(depth, seed);
    let smote_cfg = SmoteConfig {
        rng_seed: seed,
        ..SmoteConfig::default()
    };
    let mut model = train_variant(&examples, variant, &params, smote.then_some(&smote_cfg))?;
    if no_covers {
        model.strip_covers();
    }
    model.save(&out)?;
    Ok(())
}

#[derive(Serialize)]
struct EvaluationOutput {
    symptom: Symptom,
    n_test: usize,
    test_hash: String,
    strategies: Vec<StrategyReport>,
}

fn naive_prior_from_counts(counts: &[usize]) -> Result<NaivePrior, Failure> {
    let mut best = 0;
    for c in 1..counts.len().min(NUM_CLASSES) {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Failure::Data("model records no training labels".into()));
    }
    Ok(NaivePrior {
        dominant_class: SymptomLevel::new(best as i64)?,
    })
}

fn evaluate_cmd(
    model_paths: Vec<PathBuf>,
    test: PathBuf,
    baselines: Vec<String>,
    train: Option<PathBuf>,
    out: PathBuf,
    table: Option<PathBuf>,
) -> CmdResult {
    let models: Vec<GbdtModel> = model_paths.iter().map(GbdtModel::load).collect::<Result<_, _>>()?;
    let mut variants = Vec::new();
    for (m, p) in models.iter().zip(&model_paths) {
        let v = m
            .variant
            .ok_or_else(|| Failure::Data(format!("{} has no variant tag", p.display())))?;
        variants.push(v);
    }
    let symptom = variants[0].target();
    if variants.iter().any(|v| v.target() != symptom) {
        return Err(Failure::Usage("all models must predict the same symptom".into()));
    }
    let examples = load_transitions(&test)?;
    if examples.is_empty() {
        return Err(Failure::Data("test set is empty".into()));
    }
    let truths: Vec<u8> = examples.iter().map(|e| e.target(symptom).get()).collect();

    let mut strategies = Vec::new();
    for name in &baselines {
        let strategy: Strategy = name.parse()?;
        let preds: Vec<u8> = match strategy {
            Strategy::NaivePrior => {
                let np = match &train {
                    Some(p) => {
                        let labels: Vec<u8> = load_transitions(p)?.iter().map(|e| e.target(symptom).get()).collect();
                        symptom_forecast::baselines::np_fit(&labels)?
                    }
                    None => {
                        let counts = models[0].label_counts.as_ref().ok_or_else(|| {
                            Failure::Usage("model stores no training label counts; pass --train for the naive prior".into())
                        })?;
                        naive_prior_from_counts(counts)?
                    }
                };
                examples.iter().map(|e| np.predict(e).get()).collect()
            }
            Strategy::PreviousValue => examples.iter().map(|e| pv_predict(e, symptom).get()).collect(),
            Strategy::Gbdt(_) => return Err(Failure::Usage(format!("{name} is not a baseline"))),
        };
        strategies.push(StrategyReport {
            strategy,
            label: strategy.label().into(),
            report: evaluate(&truths, &preds)?,
        });
    }
    for (m, v) in models.iter().zip(&variants) {
        strategies.push(StrategyReport {
            strategy: Strategy::Gbdt(*v),
            label: v.label().into(),
            report: evaluate_model(m, &examples, *v)?,
        });
    }

    if let Some(t) = table {
        let cols: Vec<(&str, &_)> = strategies.iter().map(|s| (s.label.as_str(), &s.report)).collect();
        let mut w = create(&t)?;
        write_table(&mut w, &cols)?;
        w.flush()?;
    }
    write_json(
        &out,
        &EvaluationOutput {
            symptom,
            n_test: examples.len(),
            test_hash: content_hash(&examples),
            strategies,
        },
    )
}

fn explain(model: PathBuf, data: PathBuf, out: PathBuf) -> CmdResult {
    let model = GbdtModel::load(&model)?;
    let variant = model
        .variant
        .ok_or_else(|| Failure::Data("model has no variant tag".into()))?;
    let examples = load_transitions(&data)?;
    let rows = variant_dataset(&examples, variant).rows;
    let summary = importance_summary(&model, &rows)?;
    let mut w = create(&out)?;
    summary.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Synth {
            config,
            out_dir,
            seed,
            patients,
        } => synth(config, out_dir, seed, patients),
        Command::Ingest { profiles, surveys, out } => ingest(profiles, surveys, out),
        Command::Split {
            input,
            date,
            out_train,
            out_test,
        } => split(input, date, out_train, out_test),
        Command::Cv {
            train,
            variant,
            depths,
            folds,
            seed,
            no_smote,
            boost,
            out,
        } => cv(train, variant, depths, folds, seed, no_smote, boost, out),
        Command::Train {
            train: path,
            variant,
            depth,
            smote,
            seed,
            no_covers,
            boost,
            out,
        } => train(path, variant, depth, smote, seed, no_covers, boost, out),
        Command::Evaluate {
            model,
            test,
            baselines,
            train,
            out,
            table,
        } => evaluate_cmd(model, test, baselines, train, out, table),
        Command::Explain { model, data, out } => explain(model, data, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(4);
        }
    }
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Usage(m))) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Ok(Err(Failure::Data(m))) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Ok(Err(Failure::Internal(m))) => {
            eprintln!("internal error: {m}");
            ExitCode::from(4)
        }
        Err(_) => ExitCode::from(4),
    }
}
