use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sspca::sampler::Family;
use sspca::{Error, Result};
use sspca_cli::harness::ExperimentReport;
use sspca_cli::pipeline::tune_k;
use sspca_cli::spec::{InputSpec, Scenario};
use sspca_cli::{exit_code, run_experiment, ExperimentSpec, KChoice, Method};

#[derive(Parser)]
#[command(name = "sspca", version, about = "Spatial-sign sparse PCA experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replicated simulation (leading eigenvector, top-m components or tuning histogram).
    Simulate(RunArgs),
    /// Fit methods on a CSV file: sparse components, supports, leverage flags.
    Fit(RunArgs),
    /// Choose the sparsity level by sample splitting, on a CSV file or in simulation.
    Tune(RunArgs),
    /// Time the scatter estimators over a grid of sample sizes.
    Bench(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment spec; the scenario preset is used when omitted.
    spec: Option<PathBuf>,
    /// Scenario preset for `simulate`: leading_eigvec, top_m or tune_histogram.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    d: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    s: Vec<usize>,
    /// Sparsity levels: numbers, `oracle` or `tuned`.
    #[arg(long, value_delimiter = ',')]
    k: Vec<KChoice>,
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    /// Data distribution: gaussian, t3 or mixture.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Input CSV for `fit` and `tune`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// The input CSV starts with a header row.
    #[arg(long)]
    header: bool,
    /// Standardize input columns before fitting.
    #[arg(long)]
    standardize: bool,
    #[arg(long, value_delimiter = ',')]
    candidates: Vec<usize>,
    #[arg(long)]
    components: Option<usize>,
    /// Leverage flag threshold.
    #[arg(long)]
    threshold: Option<f64>,
}

fn parse_scenario(s: &str) -> Result<Scenario> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::InvalidSpec(format!("unknown scenario {s:?}")))
}

fn parse_family(s: &str) -> Result<Family> {
    match s.to_ascii_lowercase().as_str() {
        "gaussian" | "normal" => Ok(Family::Gaussian),
        "t3" => Ok(Family::T3),
        "mixture" => Ok(Family::MIXTURE),
        _ => Err(Error::InvalidSpec(format!("unknown family {s:?} (gaussian, t3 or mixture)"))),
    }
}

fn load(args: &RunArgs, default: Scenario) -> Result<ExperimentSpec> {
    let mut spec = match &args.spec {
        Some(path) => ExperimentSpec::from_path(path)?,
        None => ExperimentSpec::preset(match &args.scenario {
            Some(s) => parse_scenario(s)?,
            None => default,
        }),
    };
    if !args.n.is_empty() {
        spec.grid.n = args.n.clone();
    }
    if !args.d.is_empty() {
        spec.grid.d = args.d.clone();
    }
    if !args.s.is_empty() {
        spec.grid.s = args.s.clone();
    }
    if !args.k.is_empty() {
        spec.grid.k = args.k.clone();
    }
    if !args.method.is_empty() {
        spec.methods = args.method.clone();
    }
    if let Some(f) = &args.family {
        spec.model.family = parse_family(f)?;
    }
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
    }
    if let Some(reps) = args.reps {
        spec.replications = reps;
    }
    if let Some(out) = &args.out {
        spec.output.dir = out.clone();
    }
    if let Some(path) = &args.input {
        spec.input = Some(InputSpec { path: path.clone(), header: args.header, standardize: args.standardize });
    } else if let Some(input) = spec.input.as_mut() {
        input.header |= args.header;
        input.standardize |= args.standardize;
    }
    if !args.candidates.is_empty() {
        spec.tuning.candidates = args.candidates.clone();
    }
    if let Some(c) = args.components {
        spec.fit.components = c;
    }
    if let Some(t) = args.threshold {
        spec.fit.leverage_threshold = t;
    }
    Ok(spec)
}

fn require(spec: &ExperimentSpec, allowed: &[Scenario], command: &str) -> Result<()> {
    if allowed.contains(&spec.scenario) {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("`{command}` cannot run scenario {}", spec.scenario.name())))
    }
}

fn finish(report: &ExperimentReport) -> Result<()> {
    let files = report.write_to(&report.spec.output.dir)?;
    for row in &report.summary {
        println!(
            "n={:<6} d={:<5} s={:<4} k={:<7} {:<9} {:<18} mean={:.4} se={:.4} (count {})",
            row.n, row.d, row.s, row.k.to_string(), row.method.label(), row.metric, row.mean, row.std_error, row.count
        );
    }
    for row in &report.bench {
        println!("{:<9} n={:<6} d={:<5} median {:.6}s", row.method.label(), row.n, row.d, row.median_seconds);
    }
    for fit in &report.fits {
        let flagged = fit.leverage.as_ref().map_or(0, |l| l.flagged.len());
        println!("{}: k={} components={} flagged rows={}", fit.method.label(), fit.k, fit.components.len(), flagged);
    }
    if !report.failures.is_empty() {
        eprintln!("{} method/replication cells failed; see the summary JSON", report.failures.len());
    }
    println!("wrote {}", files.records.display());
    println!("wrote {}", files.summary.display());
    println!("wrote {}", files.timings.display());
    Ok(())
}

fn tune_on_data(spec: &ExperimentSpec) -> Result<()> {
    let input = spec.input.as_ref().expect("checked by caller");
    let mut x = sspca::DataMatrix::read_csv_path(&input.path, input.header)?;
    if input.standardize {
        x = x.standardized_columns();
    }
    std::fs::create_dir_all(&spec.output.dir)?;
    for &method in &spec.methods {
        let result = tune_k(&x, method, &spec.tuning, &spec.power, spec.base_seed)?;
        let stem = format!("{}_{}", spec.prefix(), method.label());
        let json = spec.output.dir.join(format!("{stem}_tune.json"));
        let csv = spec.output.dir.join(format!("{stem}_scores.csv"));
        std::fs::write(&json, result.to_json()? + "\n")?;
        result.write_score_csv(std::fs::File::create(&csv)?)?;
        println!("{}: chosen k = {}", method.label(), result.chosen_k);
        println!("wrote {}", json.display());
        println!("wrote {}", csv.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let spec = load(&args, Scenario::LeadingEigvec)?;
            require(&spec, &[Scenario::LeadingEigvec, Scenario::TopM, Scenario::TuneHistogram], "simulate")?;
            finish(&run_experiment(&spec)?)
        }
        Command::Fit(args) => {
            let spec = load(&args, Scenario::FitCsv)?;
            require(&spec, &[Scenario::FitCsv], "fit")?;
            finish(&run_experiment(&spec)?)
        }
        Command::Tune(args) => {
            let mut spec = load(&args, Scenario::TuneHistogram)?;
            if spec.input.is_some() {
                if args.spec.is_none() {
                    spec.output.prefix.get_or_insert_with(|| "tune".to_string());
                }
                spec.validate_tuning()?;
                tune_on_data(&spec)
            } else {
                require(&spec, &[Scenario::TuneHistogram], "tune")?;
                finish(&run_experiment(&spec)?)
            }
        }
        Command::Bench(args) => {
            let spec = load(&args, Scenario::RuntimeBench)?;
            require(&spec, &[Scenario::RuntimeBench], "bench")?;
            finish(&run_experiment(&spec)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
