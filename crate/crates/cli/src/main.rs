//! Command-line pipeline: synthetic corpus generation, training, path
//! ranking, leave-out ablation, sampling-theory checks, and hop-scaling
//! benchmarks.
//!
//! Exit codes: 0 on success, 1 on runtime failure (including a training
//! abort on non-finite loss), 2 on usage or configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hinsample::backbone::{load_checkpoint, save_checkpoint};
use hinsample::config::{synthetic_spec_from_file, TrainFileConfig};
use hinsample::theory;
use hinsample::{
    generate_synthetic, load_corpus, restore_result, write_corpus, Error, ImportanceVector,
    RunConfig, TrainResult,
};

#[derive(Parser)]
#[command(name = "hinsample", version, about = "Meta-path importance learning pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted relational signal.
    Synth(SynthArgs),
    /// Train on a corpus and write reports plus a model checkpoint.
    Train(TrainArgs),
    /// Print the top-K ranked paths from a finished run.
    Rank(RankArgs),
    /// Leave-out ablation: drop top-ranked paths and re-evaluate.
    Ablate(AblateArgs),
    /// Monte Carlo checks of the sampling guarantees.
    Theory(TheoryArgs),
    /// Hop-scaling benchmark over a list of hop bounds.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Synthetic spec file (key = value lines).
    #[arg(long)]
    spec: PathBuf,
    /// Output corpus path (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth paths file; defaults to <out>.truth.txt.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Override the spec seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Run configuration file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Corpus path; overrides the `corpus` key of the config file.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling strategy: random, mds, o-eps, d-eps, m-eps, me-eps.
    #[arg(long)]
    strategy: Option<String>,
    /// Importance normalization: l1, l2, softmax.
    #[arg(long)]
    norm: Option<String>,
    /// Importance discount factor.
    #[arg(long)]
    gamma: Option<f64>,
    /// Paths sampled per inner epoch.
    #[arg(long)]
    k: Option<usize>,
    /// Paths selected for final evaluation.
    #[arg(long = "top-k")]
    top_k: Option<usize>,
    /// Meta-path hop bound.
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long = "out-dir", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RankArgs {
    /// Model checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Importance trajectory CSV written by `train`.
    #[arg(long = "mu-file")]
    mu_file: PathBuf,
    /// Number of paths to print.
    #[arg(short, long, default_value_t = 10)]
    k: usize,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long = "mu-file")]
    mu_file: PathBuf,
    /// mild (2 paths), medium (4), strong (6), or a number.
    #[arg(long)]
    level: String,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long = "out-dir", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TheoryArgs {
    /// Which check: t1 (weighted vs uniform expectation) or t2 (proportion
    /// convergence).
    which: String,
    /// Trials for t1, or convergence trials for t2.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Number of paths for t1.
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// Draws for t2.
    #[arg(long, default_value_t = 100_000)]
    t: u64,
    /// Weights for t2, comma-separated.
    #[arg(long, default_value = "0.7,0.3")]
    mu: String,
    #[arg(long, default_value_t = 0.5)]
    epsilon0: f64,
    #[arg(long, default_value_t = 0.99)]
    beta: f64,
    #[arg(long, default_value_t = 666)]
    seed: u64,
    #[arg(long = "out-dir", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated hop bounds, e.g. 4,5,6,7.
    #[arg(long, default_value = "4,5,6,7")]
    hops: String,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "out-dir", default_value = "out")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Rank(args) => cmd_rank(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Theory(args) => cmd_theory(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Schema(_)
        | Error::Parse { .. }
        | Error::InvalidArgument(_)
        | Error::UnsatisfiableSpec(_) => 2,
        Error::Io { .. }
        | Error::Dimension(_)
        | Error::NonFiniteLoss(_)
        | Error::Checkpoint(_) => 1,
    }
}

/// Input files that must exist get a config error (exit 2), not an io error.
fn require_file(path: &Path, what: &str) -> Result<(), Error> {
    if !path.is_file() {
        return Err(Error::Config(format!(
            "{what} not found: {}",
            path.display()
        )));
    }
    Ok(())
}

fn write_text(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn make_out_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    require_file(&args.spec, "spec file")?;
    let mut spec = synthetic_spec_from_file(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let (records, truth) = generate_synthetic(&spec)?;
    write_corpus(&args.out, &records)?;
    let truth_path = args.truth.unwrap_or_else(|| {
        let mut p = args.out.as_os_str().to_owned();
        p.push(".truth.txt");
        PathBuf::from(p)
    });
    let mut truth_text = String::new();
    for path in &truth {
        truth_text.push_str(&path.canonical_name());
        truth_text.push('\n');
    }
    write_text(&truth_path, &truth_text)?;
    println!(
        "wrote {} records ({} classes) to {}",
        records.len(),
        spec.num_classes,
        args.out.display()
    );
    println!("ground-truth paths in {}", truth_path.display());
    Ok(())
}

/// Load the config file and apply command-line overrides.
fn load_train_config(
    config_path: &Path,
    corpus_flag: &Option<PathBuf>,
    overrides: &[(&str, Option<String>)],
) -> Result<(RunConfig, PathBuf), Error> {
    require_file(config_path, "config file")?;
    let mut file_config = TrainFileConfig::from_file(config_path)?;
    for (key, value) in overrides {
        if let Some(value) = value {
            file_config.apply(key, value)?;
        }
    }
    file_config.finish();
    let corpus = corpus_flag
        .clone()
        .or(file_config.corpus.clone())
        .ok_or_else(|| Error::Config("no corpus path (flag --corpus or key `corpus`)".into()))?;
    require_file(&corpus, "corpus")?;
    Ok((file_config.run, corpus))
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let overrides = [
        ("seed", args.seed.map(|v| v.to_string())),
        ("strategy", args.strategy.clone()),
        ("norm", args.norm.clone()),
        ("gamma", args.gamma.map(|v| v.to_string())),
        ("k", args.k.map(|v| v.to_string())),
        ("top_k", args.top_k.map(|v| v.to_string())),
        ("max_hops", args.hops.map(|v| v.to_string())),
    ];
    let (config, corpus_path) = load_train_config(&args.config, &args.corpus, &overrides)?;
    let records = load_corpus(&corpus_path)?;
    let mut result = hinsample::run(&config, &records)?;

    make_out_dir(&args.out_dir)?;
    write_text(&args.out_dir.join("metrics.csv"), &result.metrics_csv())?;
    write_text(
        &args.out_dir.join("mu_trajectory.csv"),
        &result.trajectory_csv(),
    )?;
    write_text(&args.out_dir.join("ranked_paths.tsv"), &result.ranked_tsv())?;
    write_text(&args.out_dir.join("catalog.txt"), &result.catalog.export())?;
    save_checkpoint(&mut result.model, &args.out_dir.join("checkpoint.bin"))?;

    print_summary(&result, &config);
    Ok(())
}

fn print_summary(result: &TrainResult, config: &RunConfig) {
    println!(
        "trained {} outer iterations over {} paths (strategy {}, norm {})",
        result.outer_iterations,
        result.catalog.len(),
        config.strategy,
        config.norm_mode
    );
    println!(
        "phase seconds: construct {:.2}, backbone {:.2}, importance {:.2}",
        result.timings.construct_secs,
        result.timings.backbone_secs,
        result.timings.importance_secs
    );
    println!("top paths:");
    for (rank, (name, weight)) in result.ranked.iter().enumerate() {
        println!("  {:>2}. {name}\t{weight:.6}", rank + 1);
    }
    println!(
        "test Micro-F1 {:.4} | test Macro-F1 {:.4}",
        result.test_micro, result.test_macro
    );
}

/// Final importance snapshot from a trajectory CSV: names in catalog order
/// and weights of the highest iteration.
fn read_final_mu(path: &Path) -> Result<(Vec<String>, Vec<f64>, u64), Error> {
    require_file(path, "mu file")?;
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut last_iteration = 0u64;
    let mut names = Vec::new();
    let mut weights = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("expected 3 CSV fields, got {}", fields.len()),
            });
        }
        let iteration: u64 = fields[0].parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            msg: "bad iteration".into(),
        })?;
        let weight: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            msg: "bad weight".into(),
        })?;
        if iteration > last_iteration {
            last_iteration = iteration;
            names.clear();
            weights.clear();
        }
        if iteration == last_iteration {
            names.push(fields[1].to_string());
            weights.push(weight);
        }
    }
    if names.is_empty() {
        return Err(Error::Config(format!(
            "no importance rows in {}",
            path.display()
        )));
    }
    Ok((names, weights, last_iteration))
}

fn cmd_rank(args: RankArgs) -> Result<(), Error> {
    require_file(&args.checkpoint, "checkpoint")?;
    // Validates the checkpoint even though ranking needs only the weights.
    let _model = load_checkpoint(&args.checkpoint)?;
    let (names, weights, iteration) = read_final_mu(&args.mu_file)?;
    let importance = ImportanceVector::from_parts(
        weights,
        0.5,
        hinsample::NormMode::L1,
        iteration,
    )?;
    let order = importance.top_k(args.k.min(importance.len()))?;
    println!("rank\tpath\tweight");
    for (rank, &index) in order.iter().enumerate() {
        println!("{}\t{}\t{:.6}", rank + 1, names[index], importance.get(index));
    }
    Ok(())
}

fn parse_level(level: &str) -> Result<usize, Error> {
    match level {
        "none" => Ok(0),
        "mild" => Ok(2),
        "medium" => Ok(4),
        "strong" => Ok(6),
        other => other.parse().map_err(|_| {
            Error::Config(format!(
                "level must be none, mild, medium, strong, or a number; got {other:?}"
            ))
        }),
    }
}

fn cmd_ablate(args: AblateArgs) -> Result<(), Error> {
    let level = parse_level(&args.level)?;
    let (config, corpus_path) = load_train_config(&args.config, &args.corpus, &[])?;
    require_file(&args.checkpoint, "checkpoint")?;
    let records = load_corpus(&corpus_path)?;
    let model = load_checkpoint(&args.checkpoint)?;
    let (_, weights, iteration) = read_final_mu(&args.mu_file)?;
    let importance =
        ImportanceVector::from_parts(weights, config.gamma, config.norm_mode, iteration)?;
    let result = restore_result(&config, &records, model, importance)?;
    let (micro, macro_) = hinsample::ablate(&result, level)?;
    println!("level {level}: removed top-{level} paths from the top-{} mask", result.ranked.len());
    println!("validation Micro-F1 {micro:.4} | Macro-F1 {macro_:.4}");

    // Full ablation table over the standard levels that fit under top-K.
    let mut table = String::from("level,removed,val_micro_f1,val_macro_f1\n");
    for (name, removed) in [("none", 0usize), ("mild", 2), ("medium", 4), ("strong", 6)] {
        if removed >= result.ranked.len() && removed > 0 {
            continue;
        }
        let (micro, macro_) = hinsample::ablate(&result, removed)?;
        table.push_str(&format!("{name},{removed},{micro:.6},{macro_:.6}\n"));
    }
    make_out_dir(&args.out_dir)?;
    write_text(&args.out_dir.join("ablation.csv"), &table)?;
    Ok(())
}

fn cmd_theory(args: TheoryArgs) -> Result<(), Error> {
    make_out_dir(&args.out_dir)?;
    match args.which.as_str() {
        "t1" => {
            let report = theory::verify_theorem1(args.trials, args.m, args.seed)?;
            let anti = theory::theorem1_anti_comonotone_margin(args.m, args.seed);
            println!(
                "comonotone trials: {} | violations: {} | min margin: {:.6}",
                report.trials, report.violations, report.min_margin
            );
            println!("anti-comonotone counterexample margin: {anti:.6}");
            let csv = format!(
                "trials,violations,min_margin,anti_margin\n{},{},{:.6},{:.6}\n",
                report.trials, report.violations, report.min_margin, anti
            );
            write_text(&args.out_dir.join("theory_t1.csv"), &csv)?;
            if !report.pass() {
                return Err(Error::InvalidArgument(
                    "weighted expectation fell below uniform on a comonotone pair".into(),
                ));
            }
        }
        "t2" => {
            let weights: Vec<f64> = args
                .mu
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| {
                        Error::Config(format!("bad weight {s:?} in --mu"))
                    })
                })
                .collect::<Result<_, _>>()?;
            let report = theory::verify_theorem2(&weights, args.epsilon0, args.beta, args.t, args.seed)?;
            println!(
                "draws: {} | max deviation: {:.6} (tolerance {:.2}) | pass: {}",
                report.draws, report.max_deviation, report.tolerance, report.pass
            );
            for (arm, freq) in report.frequencies.iter().enumerate() {
                println!("  arm {arm}: frequency {freq:.6} (weight {:.6})", weights[arm]);
            }
            write_text(&args.out_dir.join("theory_t2.csv"), &report.to_csv())?;
        }
        other => {
            return Err(Error::Config(format!(
                "unknown theory check {other:?} (expected t1 or t2)"
            )))
        }
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Error> {
    let overrides = [("seed", args.seed.map(|v| v.to_string()))];
    let (config, corpus_path) = load_train_config(&args.config, &args.corpus, &overrides)?;
    let hops: Vec<usize> = args
        .hops
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad hop count {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    let records = load_corpus(&corpus_path)?;
    let rows = hinsample::hop_scaling_bench(&records, &hops, &config)?;
    println!("hops\tpaths\titer/s\tmicro-F1\tmacro-F1");
    for row in &rows {
        println!(
            "{}\t{}\t{:.3}\t{:.4}\t{:.4}",
            row.hops, row.num_paths, row.iterations_per_sec, row.micro_f1, row.macro_f1
        );
    }
    make_out_dir(&args.out_dir)?;
    write_text(
        &args.out_dir.join("hop_bench.csv"),
        &hinsample::trainer::hop_bench_csv(&rows),
    )?;
    Ok(())
}
