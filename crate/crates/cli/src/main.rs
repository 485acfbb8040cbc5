use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use memetune::bench::{self, BenchmarkSpec, DataFormat, DataSource, ReportFormat, BANANA_NOISE};
use memetune::cv::{make_folds, test_error, CvObjective};
use memetune::data::{self, normalize_apply, normalize_fit, Dataset};
use memetune::memetic::{run, TracePoint};
use memetune::space::decode;
use memetune::svm::SmoConfig;
use memetune::{Algorithm, RunConfig, SearchSpace};
use serde::Serialize;

mod config;

use config::{FileConfig, Seeds};

/// Tune RBF-SVM hyperparameters with particle swarm and memetic search.
#[derive(Parser, Debug)]
#[command(name = "memetune", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tune (C, gamma) on one dataset.
    Tune(TuneArgs),
    /// Run several algorithms over several seeds and report test error.
    Benchmark(BenchArgs),
    /// Exhaustive grid search over (log2 C, log2 gamma).
    Grid(GridArgs),
    /// Write a synthetic banana dataset.
    GenData(GenArgs),
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Training data file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Held-out test data file.
    #[arg(long)]
    test_data: Option<PathBuf>,
    /// Input format: libsvm or csv (default: from the file extension).
    #[arg(long)]
    format: Option<String>,
    /// Zero-based label column for csv input.
    #[arg(long)]
    label_column: Option<usize>,
    /// Synthetic data instead of a file, e.g. `banana:n=400,n_test=2000,noise=0.3,seed=7`.
    #[arg(long, conflicts_with = "data")]
    synthetic: Option<String>,
}

#[derive(Args, Debug, Default)]
struct SearchArgs {
    /// TOML file with defaults for any of these options.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Lower bounds in log2 space, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<String>,
    /// Upper bounds in log2 space, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<String>,
    /// Fitness evaluation budget.
    #[arg(long)]
    max_evals: Option<u64>,
    /// Stop memetic runs after this many evaluations without improvement.
    #[arg(long)]
    stall_evals: Option<u64>,
    /// Use raw features instead of z-scoring them on the training set.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// PSO, MA1, MA2, MA3, MA4 or GS.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the result as JSON.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Lattice spacing in log2 units.
    #[arg(long)]
    step: Option<f64>,
    /// Seed for the fold assignment.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Comma-separated algorithm names.
    #[arg(long)]
    algorithms: Option<String>,
    /// Seeds as `a..b` (half-open) or a comma-separated list.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Report file.
    #[arg(long)]
    output: Option<PathBuf>,
    /// json-lines, csv or table (default: from the output extension).
    #[arg(long)]
    report_format: Option<String>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = BANANA_NOISE)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// libsvm or csv (default: from the output extension).
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    output: PathBuf,
}

/// Exit status 2: bad usage, configuration or input. Exit status 3: output
/// could not be written.
enum Failure {
    Usage(String),
    Output(String),
}

impl From<memetune::Error> for Failure {
    fn from(e: memetune::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Tune(a) => cmd_tune(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Grid(a) => cmd_grid(a),
        Command::GenData(a) => cmd_gen_data(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Output(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load_config(search: &SearchArgs) -> CliResult<FileConfig> {
    match &search.config {
        Some(p) => FileConfig::load(p).map_err(Failure::Usage),
        None => Ok(FileConfig::default()),
    }
}

fn parse_list(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("bad {what} value {t:?}")))
        })
        .collect()
}

fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| Failure::Usage(format!("bad seed range {s:?}")))?;
        let b: u64 = b.trim().parse().map_err(|_| Failure::Usage(format!("bad seed range {s:?}")))?;
        if a >= b {
            return usage(format!("empty seed range {s:?}"));
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| Failure::Usage(format!("bad seed {t:?}"))))
        .collect()
}

fn parse_algorithm(s: &str) -> CliResult<Algorithm> {
    Ok(s.parse::<Algorithm>()?)
}

fn data_format(name: Option<&str>, path: &Path, label_column: usize) -> CliResult<DataFormat> {
    let name = match name {
        Some(n) => n.to_ascii_lowercase(),
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => "csv".into(),
            _ => "libsvm".into(),
        },
    };
    match name.as_str() {
        "libsvm" | "svmlight" => Ok(DataFormat::Libsvm),
        "csv" => Ok(DataFormat::Csv { label_column }),
        other => usage(format!("unknown data format {other:?} (expected libsvm or csv)")),
    }
}

/// Parses `banana[:key=value,...]` with keys `n` (or `n_train`), `n_test`,
/// `noise` and `seed`.
fn parse_synthetic(s: &str) -> CliResult<DataSource> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    if kind.trim() != "banana" {
        return usage(format!("unknown synthetic generator {kind:?} (only banana is available)"));
    }
    let (mut n_train, mut n_test, mut noise, mut seed) = (400usize, 2000usize, BANANA_NOISE, 0u64);
    for kv in rest.split(',').filter(|t| !t.trim().is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("expected key=value in {kv:?}")))?;
        let bad = || Failure::Usage(format!("bad value for {k}: {v:?}"));
        match k.trim() {
            "n" | "n_train" => n_train = v.trim().parse().map_err(|_| bad())?,
            "n_test" => n_test = v.trim().parse().map_err(|_| bad())?,
            "noise" => noise = v.trim().parse().map_err(|_| bad())?,
            "seed" => seed = v.trim().parse().map_err(|_| bad())?,
            other => return usage(format!("unknown synthetic option {other:?}")),
        }
    }
    Ok(DataSource::Banana {
        n_train,
        n_test,
        noise,
        seed,
    })
}

fn data_source(args: &DataArgs, file: &FileConfig) -> CliResult<DataSource> {
    // flags first; the config file may name only one kind of source
    if let Some(path) = &args.data {
        return file_source(path.clone(), args, file);
    }
    if let Some(syn) = &args.synthetic {
        return parse_synthetic(syn);
    }
    match (&file.data, &file.synthetic) {
        (Some(_), Some(_)) => usage("config file sets both data and synthetic"),
        (Some(path), None) => file_source(path.clone(), args, file),
        (None, Some(syn)) => parse_synthetic(syn),
        (None, None) => usage("no data: pass --data FILE or --synthetic banana"),
    }
}

fn file_source(path: PathBuf, args: &DataArgs, file: &FileConfig) -> CliResult<DataSource> {
    let fmt_name = args.format.clone().or_else(|| file.format.clone());
    let label_column = args.label_column.or(file.label_column).unwrap_or(0);
    let format = data_format(fmt_name.as_deref(), &path, label_column)?;
    Ok(DataSource::Files {
        train: path,
        test: args.test_data.clone().or_else(|| file.test_data.clone()),
        format,
    })
}

/// Loads `(train, optional test)`, z-scored on the training set unless
/// disabled.
fn load_data(source: &DataSource, normalize: bool) -> CliResult<(Dataset, Option<Dataset>)> {
    let (train, test) = match source {
        DataSource::Banana { .. } => {
            let (tr, te) = source.load()?;
            (tr, Some(te))
        }
        DataSource::Files { train, test, format } => {
            let tr = format.load(train)?;
            let te = test.as_ref().map(|t| format.load(t)).transpose()?;
            (tr, te)
        }
    };
    if !normalize {
        return Ok((train, test));
    }
    let stats = normalize_fit(&train);
    let test = test.map(|t| normalize_apply(&stats, &t)).transpose()?;
    Ok((normalize_apply(&stats, &train)?, test))
}

/// Run settings from defaults, then the config file, then flags.
fn run_config(algorithm: Algorithm, seed: u64, search: &SearchArgs, file: &FileConfig) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::new(algorithm, seed);
    let lower = match &search.lower {
        Some(s) => Some(parse_list(s, "lower bound")?),
        None => file.lower.clone(),
    };
    let upper = match &search.upper {
        Some(s) => Some(parse_list(s, "upper bound")?),
        None => file.upper.clone(),
    };
    if lower.is_some() || upper.is_some() {
        let lower = lower.unwrap_or_else(|| cfg.space.lower().to_vec());
        let upper = upper.unwrap_or_else(|| cfg.space.upper().to_vec());
        cfg.space = SearchSpace::new(lower, upper)?;
    }
    if let Some(f) = file.velocity_cap_fraction {
        cfg.space = cfg.space.with_velocity_cap_fraction(f)?;
    }
    if cfg.space.dims() != 2 {
        return usage(format!(
            "the search space must have 2 dimensions (log2 C, log2 gamma), got {}",
            cfg.space.dims()
        ));
    }
    if let Some(p) = &file.pso {
        cfg.pso = p.clone();
    }
    if let Some(p) = &file.pattern {
        let step = p.initial_step.unwrap_or(cfg.pattern.initial_step);
        let mut pattern = memetune::pattern::PatternConfig::with_initial_step(step);
        if let Some(m) = p.min_step {
            pattern.min_step = m;
        }
        if let Some(m) = p.max_polls {
            pattern.max_polls = m;
        }
        cfg.pattern = pattern;
    }
    if let Some(m) = search.max_evals.or(file.max_evals) {
        cfg.max_evaluations = m;
    }
    if let Some(s) = search.stall_evals.or(file.stall_evals) {
        cfg.stall_evaluations = s;
    }
    if let Some(g) = file.grid_step {
        cfg.grid_step = g;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn smo_config(file: &FileConfig) -> CliResult<SmoConfig> {
    let smo = file.smo.clone().unwrap_or_default();
    smo.validate()?;
    Ok(smo)
}

#[derive(Serialize)]
struct TuneOutput {
    algorithm: Algorithm,
    seed: u64,
    best_c: f64,
    best_gamma: f64,
    log2_c: f64,
    log2_gamma: f64,
    cv_fitness: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    test_error: Option<f64>,
    evaluations: u64,
    iterations: usize,
    trace: Vec<TracePoint>,
}

fn tune_with(
    data: &DataArgs,
    search: &SearchArgs,
    file: &FileConfig,
    cfg: RunConfig,
    output: Option<&Path>,
) -> CliResult<()> {
    let source = data_source(data, file)?;
    let normalize = !search.no_normalize && file.normalize.unwrap_or(true);
    let (train, test) = load_data(&source, normalize)?;
    let smo = smo_config(file)?;
    let folds = search.folds.or(file.folds).unwrap_or(5);
    let train = Arc::new(train);
    let plan = make_folds(&train, folds, cfg.seed)?;
    let mut objective = CvObjective::new(train.clone(), plan, smo.clone())?;
    let result = run(&cfg, &mut objective)?;
    let params = decode(&result.best_position);
    let test_error = test
        .as_ref()
        .map(|t| test_error(&train, t, &result.best_position, &smo))
        .transpose()?;

    let pos = result.best_position.coords();
    println!("algorithm    {}", cfg.algorithm);
    println!("seed         {}", cfg.seed);
    println!("C            {:.6} (log2 {:.4})", params.c, pos[0]);
    println!("gamma        {:.6} (log2 {:.4})", params.gamma, pos[1]);
    println!("cv error     {:.4}", result.best_fitness);
    if let Some(e) = test_error {
        println!("test error   {e:.4}");
    }
    println!("evaluations  {}", result.evaluations);
    println!("wall time    {:.2}s", result.wall_time.as_secs_f64());

    if let Some(path) = output {
        let out = TuneOutput {
            algorithm: cfg.algorithm,
            seed: cfg.seed,
            best_c: params.c,
            best_gamma: params.gamma,
            log2_c: pos[0],
            log2_gamma: pos[1],
            cv_fitness: result.best_fitness,
            test_error,
            evaluations: result.evaluations,
            iterations: result.iterations,
            trace: result.trace,
        };
        write_file(path, |w| {
            serde_json::to_writer_pretty(&mut *w, &out).map_err(std::io::Error::from)?;
            w.write_all(b"\n")
        })?;
    }
    Ok(())
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
    let fail = |e: std::io::Error| Failure::Output(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(fail)?);
    body(&mut w).map_err(fail)?;
    w.flush().map_err(fail)
}

fn cmd_tune(args: TuneArgs) -> CliResult<()> {
    let file = load_config(&args.search)?;
    let name = args.algorithm.clone().or_else(|| file.algorithm.clone());
    let algorithm = match name {
        Some(n) => parse_algorithm(&n)?,
        None => Algorithm::Ma4,
    };
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let cfg = run_config(algorithm, seed, &args.search, &file)?;
    tune_with(&args.data, &args.search, &file, cfg, args.output.as_deref())
}

fn cmd_grid(args: GridArgs) -> CliResult<()> {
    let file = load_config(&args.search)?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let mut cfg = run_config(Algorithm::GridSearch, seed, &args.search, &file)?;
    if let Some(step) = args.step {
        cfg.grid_step = step;
        cfg.validate()?;
    }
    tune_with(&args.data, &args.search, &file, cfg, args.output.as_deref())
}

fn cmd_benchmark(args: BenchArgs) -> CliResult<()> {
    let file = load_config(&args.search)?;
    let algorithms = match (&args.algorithms, &file.algorithms) {
        (Some(s), _) => s.split(',').map(parse_algorithm).collect::<CliResult<Vec<_>>>()?,
        (None, Some(list)) => list.iter().map(|s| parse_algorithm(s)).collect::<CliResult<Vec<_>>>()?,
        (None, None) => Algorithm::ALL.to_vec(),
    };
    let seeds = match (&args.seeds, &file.seeds) {
        (Some(s), _) => parse_seeds(s)?,
        (None, Some(Seeds::List(v))) => v.clone(),
        (None, Some(Seeds::Text(s))) => parse_seeds(s)?,
        (None, None) => bench::default_seeds(),
    };
    let source = data_source(&args.data, &file)?;
    let mut spec = BenchmarkSpec::new(source, algorithms, seeds);
    spec.template = run_config(Algorithm::Ma4, 0, &args.search, &file)?;
    spec.folds = args.search.folds.or(file.folds).unwrap_or(5);
    spec.normalize = !args.search.no_normalize && file.normalize.unwrap_or(true);
    spec.smo = smo_config(&file)?;
    spec.threads = args.threads.or(file.threads);

    let format = match (&args.report_format, &args.output) {
        (Some(f), _) => f.parse::<ReportFormat>()?,
        (None, Some(p)) => match p.extension().and_then(|e| e.to_str()) {
            Some("csv") => ReportFormat::Csv,
            Some("txt") => ReportFormat::Table,
            _ => ReportFormat::JsonLines,
        },
        (None, None) => ReportFormat::Table,
    };
    // fail on an unwritable path before spending time on the runs
    let out = match &args.output {
        Some(p) => Some(
            File::create(p).map_err(|e| Failure::Output(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };

    let report = bench::run_benchmark(&spec)?;
    print!("{}", bench::render_table(&report));
    if let (Some(f), Some(p)) = (out, &args.output) {
        bench::write_report(&report, format, BufWriter::new(f))
            .map_err(|e| Failure::Output(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn cmd_gen_data(args: GenArgs) -> CliResult<()> {
    let d = data::gen_banana(args.n, args.noise, args.seed)?;
    let csv = match args.format.as_deref() {
        Some("csv") => true,
        Some("libsvm") => false,
        Some(other) => return usage(format!("unknown data format {other:?} (expected libsvm or csv)")),
        None => args.output.extension().and_then(|e| e.to_str()) == Some("csv"),
    };
    write_file(&args.output, |w| {
        if csv {
            writeln!(w, "label,x1,x2")?;
            for i in 0..d.len() {
                let r = d.row(i);
                writeln!(w, "{},{},{}", d.label(i), r[0], r[1])?;
            }
            Ok(())
        } else {
            data::write_libsvm(&d, w)
        }
    })?;
    println!("wrote {} examples to {}", d.len(), args.output.display());
    Ok(())
}
