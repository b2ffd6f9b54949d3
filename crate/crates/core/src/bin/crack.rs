use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crack::bench::{
    accuracy_at, decision_rate, load_benchmark_pairs, parse_range, run_benchmark, run_sweep,
    weighted_accuracy, write_curve_csv, write_json, write_results_csv, write_sweep_csv,
    BenchmarkSummary, SweepAxis, SweepGrid, UndecidedPolicy, REPORTING_THRESHOLD,
};
use crack::causal::{verdict, Analysis};
use crack::codelength::nml_regret;
use crack::data::{load_csv, parse_selector, parse_type_list, Delimiter, LoadOptions};
use crack::forest::export_dag;
use crack::synth::{generate_batch, write_pair, SyntheticSpec, TypeMode};
use crack::{CrackError, Direction, Indicator, InferenceOptions, MarginalMode, SearchOptions};

#[derive(Parser)]
#[command(
    name = "crack",
    version,
    about = "Causal direction inference with MDL coding forests"
)]
struct Cli {
    /// Worker threads for search and batch evaluation.
    #[arg(long, global = true, env = "CRACK_THREADS")]
    threads: Option<usize>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Infer the causal direction between two column groups of a table.
    Infer(InferArgs),
    /// Write synthetic cause-effect pairs with ground truth sidecars.
    Generate(GenerateArgs),
    /// Accuracy of synthetic pairs across dependency strength or dimension.
    Sweep(SweepArgs),
    /// Evaluate a benchmark directory of cause-effect pairs.
    Bench(BenchArgs),
    /// Print multinomial NML regrets in bits.
    NmlTable(NmlArgs),
}

#[derive(Args, Clone)]
struct ScoreArgs {
    #[arg(long, default_value = "nci")]
    indicator: Indicator,
    /// Minimum score gap required for a decision.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value = "tree")]
    marginal: MarginalMode,
    /// Precision of encoded regression parameters.
    #[arg(long, default_value_t = 0.001)]
    precision: f64,
    /// Disable linear and quadratic regression nodes.
    #[arg(long)]
    no_regression: bool,
}

impl ScoreArgs {
    fn options(&self, threads: Option<usize>) -> InferenceOptions {
        InferenceOptions {
            indicator: self.indicator,
            epsilon: self.epsilon,
            marginal: self.marginal,
            search: SearchOptions {
                precision: self.precision,
                regression: !self.no_regression,
                threads,
                ..SearchOptions::default()
            },
        }
    }
}

#[derive(Args)]
struct InferArgs {
    /// Input table.
    path: PathBuf,
    /// X columns, zero based, e.g. `0,2-4`.
    #[arg(long)]
    x: String,
    /// Y columns.
    #[arg(long)]
    y: String,
    /// Column types as a list of b, c and n; inferred when absent.
    #[arg(long)]
    types: Option<String>,
    /// Field delimiter: a single character or `ws` for whitespace.
    #[arg(long, default_value = ",")]
    delimiter: String,
    /// The first row holds data rather than column names.
    #[arg(long)]
    no_header: bool,
    /// Also write the inferred dependency graph in DOT format.
    #[arg(long)]
    dag: Option<PathBuf>,
    /// Accepted for symmetry with the other subcommands; inference is
    /// deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    score: ScoreArgs,
}

#[derive(Args, Clone)]
struct SpecArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    l: usize,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long = "type", default_value = "mixed")]
    type_mode: TypeMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    pairs: usize,
    /// Noise standard deviation relative to that of the dependency.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Decimal places of recorded numeric values; `full` keeps every digit.
    #[arg(long, default_value = "1", value_parser = parse_decimals)]
    decimals: Decimals,
}

#[derive(Clone, Copy, Debug)]
struct Decimals(Option<u32>);

fn parse_decimals(s: &str) -> std::result::Result<Decimals, String> {
    match s {
        "full" => Ok(Decimals(None)),
        _ => s
            .parse()
            .map(|d| Decimals(Some(d)))
            .map_err(|_| format!("expected `full` or a number of decimal places, got `{s}`")),
    }
}

impl SpecArgs {
    fn spec(&self, phi: f64) -> SyntheticSpec {
        SyntheticSpec {
            k: self.k,
            l: self.l,
            n: self.n,
            phi,
            type_mode: self.type_mode,
            seed: self.seed,
            noise_fraction: self.noise,
            decimals: self.decimals.0,
            ..SyntheticSpec::default()
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1.0)]
    phi: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    spec: SpecArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Dependency probabilities as `start:stop:step` or a list.
    #[arg(long, conflicts_with = "l_values")]
    phi: Option<String>,
    /// Sweep the number of Y attributes instead, e.g. `3,5,7`.
    #[arg(long = "l-values")]
    l_values: Option<String>,
    /// Dependency probability for an `--l-values` sweep.
    #[arg(long, default_value_t = 1.0)]
    fixed_phi: f64,
    /// Score with one indicator only; both by default.
    #[arg(long)]
    indicator: Option<Indicator>,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value = "tree")]
    marginal: MarginalMode,
    #[arg(long, default_value_t = 0.001)]
    precision: f64,
    /// Confidence above which a decision counts as reported.
    #[arg(long, default_value_t = REPORTING_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    spec: SpecArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory holding the metadata file and pair tables.
    dir: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Drop undecided pairs from the curve instead of scoring them 0.5.
    #[arg(long)]
    exclude_undecided: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    score: ScoreArgs,
}

#[derive(Args)]
struct NmlArgs {
    /// Largest sample size.
    #[arg(long, default_value_t = 12)]
    n: usize,
    /// Largest category count.
    #[arg(long, default_value_t = 5)]
    k: usize,
}

fn parse_delimiter(s: &str) -> Result<Delimiter, CrackError> {
    match s {
        "ws" | "whitespace" => Ok(Delimiter::Whitespace),
        "\\t" | "tab" => Ok(Delimiter::Byte(b'\t')),
        _ if s.len() == 1 => Ok(Delimiter::Byte(s.as_bytes()[0])),
        _ => Err(CrackError::Config(format!("invalid delimiter `{s}`"))),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CrackError> {
    fs::create_dir_all(dir).map_err(|e| CrackError::io(dir, e))
}

fn print_json(value: &serde_json::Value) -> Result<(), CrackError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_infer(args: InferArgs, threads: Option<usize>) -> Result<(), CrackError> {
    let opts = args.score.options(threads);
    opts.validate()?;
    let load = LoadOptions {
        types: args.types.as_deref().map(parse_type_list).transpose()?,
        delimiter: parse_delimiter(&args.delimiter)?,
        has_header: !args.no_header,
        ..LoadOptions::new(parse_selector(&args.x)?, parse_selector(&args.y)?)
    };
    let data = load_csv(&args.path, &load)?;
    let start = std::time::Instant::now();
    let analysis = Analysis::run(&data, &opts)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let v = verdict(&analysis, &data, &opts, ms);
    if let Some(path) = &args.dag {
        let forest = if v.direction == Direction::YtoX {
            &analysis.x_given_y.forest
        } else {
            &analysis.y_given_x.forest
        };
        fs::write(path, export_dag(forest, &data)).map_err(|e| CrackError::io(path, e))?;
    }
    print_json(&serde_json::to_value(&v)?)
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CrackError> {
    let spec = args.spec.spec(args.phi);
    spec.validate()?;
    ensure_dir(&args.out)?;
    let pairs = generate_batch(&spec, args.spec.pairs)?;
    let mut manifest = Vec::with_capacity(pairs.len());
    for pair in &pairs {
        let csv = write_pair(&args.out, &spec, pair)?;
        manifest.push(json!({
            "index": pair.index,
            "csv": csv,
            "sidecar": csv.with_extension("json"),
            "x": pair.dataset.x_indices(),
            "y": pair.dataset.y_indices(),
            "truth": pair.truth.direction,
        }));
    }
    print_json(&json!({ "spec": spec, "pairs": manifest }))
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CrackError> {
    let (axis, phi) = match (&args.phi, &args.l_values) {
        (Some(r), None) => (SweepAxis::Phi(parse_range(r)?), 0.0),
        (None, Some(r)) => {
            let ls = parse_range(r)?
                .into_iter()
                .map(|v| {
                    if v >= 1.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(CrackError::Config(format!("invalid l value {v}")))
                    }
                })
                .collect::<Result<_, _>>()?;
            (SweepAxis::L(ls), args.fixed_phi)
        }
        _ => {
            return Err(CrackError::Config(
                "give exactly one of --phi or --l-values".into(),
            ))
        }
    };
    let score = ScoreArgs {
        indicator: args.indicator.unwrap_or(Indicator::Nci),
        epsilon: args.epsilon,
        marginal: args.marginal,
        precision: args.precision,
        no_regression: false,
    };
    let grid = SweepGrid {
        base: args.spec.spec(phi),
        axis,
        pairs: args.spec.pairs,
        indicators: match args.indicator {
            Some(i) => vec![i],
            None => vec![Indicator::Delta, Indicator::Nci],
        },
        inference: score.options(None),
        reporting_threshold: args.threshold,
    };
    grid.validate()?;
    ensure_dir(&args.out)?;
    let report = run_sweep(&grid)?;
    let results: Vec<_> = report.results.iter().map(|(_, r)| r.clone()).collect();
    write_results_csv(&args.out.join("results.csv"), &results)?;
    write_sweep_csv(&args.out.join("curves.csv"), &report.cells)?;
    let summary = json!({ "grid": grid, "cells": report.cells });
    write_json(&args.out.join("summary.json"), &summary)?;
    print_json(&summary)
}

fn cmd_bench(args: BenchArgs, threads: Option<usize>) -> Result<(), CrackError> {
    let opts = args.score.options(threads);
    opts.validate()?;
    let load = load_benchmark_pairs(&args.dir)?;
    if load.pairs.is_empty() {
        return Err(CrackError::Config(format!(
            "no usable pairs in {}",
            args.dir.display()
        )));
    }
    ensure_dir(&args.out)?;
    let results = run_benchmark(&load.pairs, &opts)?;
    let policy = if args.exclude_undecided {
        UndecidedPolicy::Exclude
    } else {
        UndecidedPolicy::Half
    };
    let curve = decision_rate(&results, policy)?;
    let curve_path = args.out.join("curves.csv");
    write_results_csv(&args.out.join("results.csv"), &results)?;
    write_curve_csv(&curve_path, &curve)?;
    let decided = results.iter().filter(|r| r.decided()).count();
    let summary = BenchmarkSummary {
        pairs: results.len(),
        skipped: load.skipped,
        indicator: opts.indicator,
        weighted_accuracy: weighted_accuracy(&results, policy)?,
        decided_fraction: decided as f64 / results.len() as f64,
        undecided_policy: policy,
        curve_path,
    };
    let mut value = serde_json::to_value(&summary)?;
    value["accuracy_top_40"] = json!(accuracy_at(&curve, 0.4));
    write_json(&args.out.join("summary.json"), &value)?;
    print_json(&value)
}

fn cmd_nml(args: NmlArgs) -> Result<(), CrackError> {
    if args.n == 0 || args.k == 0 {
        return Err(CrackError::Config("n and k must be positive".into()));
    }
    let rows: Vec<_> = (1..=args.n)
        .flat_map(|n| {
            (1..=args.k).map(move |k| json!({ "n": n, "k": k, "regret": nml_regret(n, k) }))
        })
        .collect();
    print_json(&json!(rows))
}

fn run(cli: Cli) -> Result<(), CrackError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CrackError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CrackError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Infer(a) => cmd_infer(a, cli.threads),
        Command::Generate(a) => cmd_generate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bench(a) => cmd_bench(a, cli.threads),
        Command::NmlTable(a) => cmd_nml(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
