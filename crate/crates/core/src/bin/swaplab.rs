//! Command-line surface over the laboratory.
//!
//! Subcommands cover the full workflow: `synth-data` writes offline IDX
//! digit files, `train`/`attack` run seeded experiments and persist run
//! ledgers, `eval` re-scores a saved checkpoint, `detect` compares two
//! circuit files, `overhead` measures structural and wall-time attack
//! cost, and `report` aggregates ledgers into CSV/SVG.
//!
//! Exit codes: 0 success (and `detect` verdict clean), 1 usage error,
//! 2 runtime failure, 3 detector verdict tampered, 4 detector verdict
//! suspicious.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use swaplab::attack::{run_attack, AttackConfig};
use swaplab::circuit;
use swaplab::detector::{compare_with_threshold, fingerprint, DEFAULT_DEPTH_THRESHOLD};
use swaplab::harness::{
    load_ledger, measure_overhead, report, run_experiment, write_synthetic_mnist, ExperimentConfig,
    RunLedger,
};
use swaplab::hqnn::{load_model, LossReport};

#[derive(Parser)]
#[command(
    name = "swaplab",
    version,
    about = "SWAP-gate attack laboratory for hybrid quantum-classical classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a clean model from a config file and write its run ledger.
    ///
    /// Any [attack] table in the config is ignored: this subcommand always
    /// produces the clean baseline for its seed.
    Train(RunArgs),
    /// Run a full attacked experiment; the config must declare an [attack] table.
    Attack(RunArgs),
    /// Re-evaluate a saved model checkpoint on the configured test split.
    Eval(EvalArgs),
    /// Compare an observed circuit file against a baseline and print the
    /// anomaly report.
    Detect(DetectArgs),
    /// Measure structural and wall-time overhead of attacked deployments.
    Overhead(OverheadArgs),
    /// Aggregate run ledgers into CSV and SVG reports.
    Report(ReportArgs),
    /// Write synthetic IDX digit files for fully offline runs.
    SynthData(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Experiment config file (TOML); supplies the dataset and, when an
    /// [attack] table is present, the attacked evaluation.
    #[arg(long)]
    config: PathBuf,
    /// Model checkpoint to score; defaults to the checkpoint the config's
    /// own run would have written.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Trusted baseline circuit file.
    baseline: PathBuf,
    /// Observed circuit file to vet.
    observed: PathBuf,
    /// Depth drift beyond this many layers is flagged suspicious.
    #[arg(long, default_value_t = DEFAULT_DEPTH_THRESHOLD)]
    depth_threshold: i64,
}

#[derive(Args)]
struct OverheadArgs {
    /// Experiment config file (TOML). Its [attack] table, when present,
    /// replaces the default attack pair (untargeted k=3 and targeted
    /// class 0).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Timed repetitions per circuit set.
    #[arg(long, default_value_t = 20)]
    repetitions: usize,
    /// Write the table to this CSV file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory scanned (non-recursively) for *.ledger.json files.
    #[arg(long, default_value = "runs")]
    runs: PathBuf,
    /// Output directory for metrics.csv, metrics.svg and timing.svg;
    /// defaults to the runs directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory receiving the four IDX files.
    #[arg(long)]
    out: PathBuf,
    /// Training images per digit class.
    #[arg(long, default_value_t = 50)]
    train_per_class: usize,
    /// Test images per digit class.
    #[arg(long, default_value_t = 20)]
    test_per_class: usize,
    /// Digit classes to emit (comma-separated).
    #[arg(long, value_delimiter = ',', default_values_t = (0..10u8).collect::<Vec<_>>())]
    classes: Vec<u8>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// A failed subcommand, split by whose fault it was.
enum Failure {
    /// The invocation itself is wrong (bad flags, malformed or invalid
    /// config): exit code 1.
    Usage(String),
    /// The work itself failed: exit code 2.
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and succeed; real
            // parse errors print to stderr and exit 1 (not clap's default 2,
            // which this tool reserves for runtime failures).
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Attack(args) => cmd_attack(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Overhead(args) => cmd_overhead(args),
        Command::Report(args) => cmd_report(args),
        Command::SynthData(args) => cmd_synth_data(args),
    }
}

/// Loads, overrides and validates a config; all failures here are the
/// caller's, not the experiment's.
fn load_config(
    path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_toml_str(&text)
        .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    cfg.validate()
        .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))?;
    Ok(cfg)
}

fn print_ledger_summary(ledger: &RunLedger) {
    println!("run {} finished", ledger.run_id);
    println!(
        "  clean test: accuracy {:.4}, nll {:.4}",
        ledger.clean_eval.accuracy, ledger.clean_eval.nll
    );
    if let Some(attacked) = &ledger.attacked_eval {
        println!(
            "  attacked test: accuracy {:.4}, nll {:.4}",
            attacked.accuracy, attacked.nll
        );
    }
    if let Some(report) = &ledger.attack_report {
        println!(
            "  injected gates: {}, attack success: {}",
            report.injected_gates, report.success
        );
    }
    println!("  artifacts under {}", ledger.config.out_dir.display());
}

fn cmd_train(args: RunArgs) -> Result<u8, Failure> {
    let mut cfg = load_config(&args.config, args.seed, args.out)?;
    cfg.attack = None;
    let ledger = run_experiment(&cfg)?;
    print_ledger_summary(&ledger);
    Ok(0)
}

fn cmd_attack(args: RunArgs) -> Result<u8, Failure> {
    let cfg = load_config(&args.config, args.seed, args.out)?;
    if cfg.attack.is_none() {
        return Err(Failure::Usage(format!(
            "config {} declares no [attack] table; use `swaplab train` for clean runs",
            args.config.display()
        )));
    }
    let ledger = run_experiment(&cfg)?;
    print_ledger_summary(&ledger);
    Ok(0)
}

fn cmd_eval(args: EvalArgs) -> Result<u8, Failure> {
    let cfg = load_config(&args.config, args.seed, args.out)?;
    let model_path = args
        .model
        .unwrap_or_else(|| cfg.out_dir.join(format!("{}.model.json", cfg.run_id())));
    let model = load_model(&model_path)?;
    let (_, test_set) = cfg.load_datasets()?;

    let clean = model.loss_report(&test_set)?;
    let attacked: Option<LossReport> = match &cfg.attack {
        Some(attack) => Some(run_attack(&model, &test_set, attack)?.evaluation),
        None => None,
    };
    let output = serde_json::json!({
        "model": model_path.display().to_string(),
        "dataset": test_set.name,
        "split": test_set.split,
        "clean": clean,
        "attacked": attacked,
    });
    println!("{}", serde_json::to_string_pretty(&output)?);
    Ok(0)
}

fn read_circuit(path: &Path) -> Result<circuit::Circuit, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read circuit {}: {e}", path.display())))?;
    Ok(circuit::parse(&text)?)
}

fn cmd_detect(args: DetectArgs) -> Result<u8, Failure> {
    let baseline = fingerprint(&read_circuit(&args.baseline)?)?;
    let observed = fingerprint(&read_circuit(&args.observed)?)?;
    let anomaly = compare_with_threshold(&baseline, &observed, args.depth_threshold)?;
    println!("{}", serde_json::to_string_pretty(&anomaly)?);
    Ok(anomaly.verdict.exit_code())
}

fn cmd_overhead(args: OverheadArgs) -> Result<u8, Failure> {
    let cfg = load_config(&args.config, args.seed, None)?;
    let (train_set, _) = cfg.load_datasets()?;
    // Overhead is a property of circuit structure, not of trained weights,
    // so the model is built fresh from the config seed.
    let model = swaplab::hqnn::HybridModel::new(&cfg.model_spec(&train_set), cfg.seed);
    let attacks: Vec<AttackConfig> = match &cfg.attack {
        Some(attack) => vec![attack.clone()],
        None => vec![
            AttackConfig::untargeted(3, cfg.seed),
            AttackConfig::targeted(0, cfg.seed),
        ],
    };
    let table = measure_overhead(&model, &train_set, &attacks, args.repetitions)?;

    let mut summary = String::new();
    for row in &table.rows {
        writeln!(
            summary,
            "  {}: {} gates lowered (+{:.2}%), mean epoch {:.4}s (+{:.2}%)",
            row.label,
            row.total_gates,
            row.gate_overhead_pct,
            row.mean_seconds,
            row.time_overhead_pct
        )
        .expect("write to string");
    }
    let csv = table.to_csv_string();
    match &args.out {
        Some(path) => {
            fs::write(path, &csv).map_err(|e| {
                Failure::Runtime(anyhow::anyhow!("cannot write {}: {e}", path.display()))
            })?;
            println!(
                "overhead over {} repetitions written to {}",
                table.repetitions,
                path.display()
            );
            print!("{summary}");
        }
        None => {
            eprint!("{summary}");
            print!("{csv}");
        }
    }
    Ok(0)
}

fn cmd_report(args: ReportArgs) -> Result<u8, Failure> {
    let runs_dir = &args.runs;
    let entries = fs::read_dir(runs_dir)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", runs_dir.display())))?;
    let mut ledger_paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".ledger.json"))
        })
        .collect();
    ledger_paths.sort();
    let ledgers: Vec<RunLedger> = ledger_paths
        .iter()
        .map(load_ledger)
        .collect::<Result<_, _>>()?;
    if ledgers.is_empty() {
        return Err(Failure::Usage(format!(
            "no *.ledger.json files under {}",
            runs_dir.display()
        )));
    }
    let out_dir = args.out.unwrap_or_else(|| runs_dir.clone());
    let paths = report(&ledgers, &out_dir)?;
    println!(
        "report over {} runs: {}, {}, {}",
        ledgers.len(),
        paths.csv.display(),
        paths.metrics_svg.display(),
        paths.timing_svg.display()
    );
    Ok(0)
}

fn cmd_synth_data(args: SynthArgs) -> Result<u8, Failure> {
    if args.classes.is_empty() || args.classes.iter().any(|&c| c > 9) {
        return Err(Failure::Usage(
            "--classes must name at least one digit in 0..=9".to_string(),
        ));
    }
    let paths = write_synthetic_mnist(
        &args.out,
        args.train_per_class,
        args.test_per_class,
        &args.classes,
        args.seed,
    )?;
    println!(
        "synthetic digit set ({} classes, {} train + {} test per class) written:",
        args.classes.len(),
        args.train_per_class,
        args.test_per_class
    );
    for p in [
        &paths.train_images,
        &paths.train_labels,
        &paths.test_images,
        &paths.test_labels,
    ] {
        println!("  {}", p.display());
    }
    Ok(0)
}
