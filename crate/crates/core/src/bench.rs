//! Seeded multi-algorithm benchmark harness and report writers.
//!
//! Every (algorithm, seed) cell tunes on the training set with a
//! cross-validation objective whose folds are seeded by the row seed, then
//! scores the tuned parameters on the held-out set. All algorithms see the
//! same folds for a given seed.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{make_folds, test_error, CvObjective};
use crate::data::{self, gen_banana, normalize_apply, normalize_fit, Dataset};
use crate::error::{Error, Result};
use crate::memetic::{run, Algorithm, RunConfig};
use crate::space::decode;
use crate::svm::SmoConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    Libsvm,
    Csv { label_column: usize },
}

impl DataFormat {
    pub fn load(&self, path: &std::path::Path) -> Result<Dataset> {
        match self {
            DataFormat::Libsvm => data::load_libsvm_file(path),
            DataFormat::Csv { label_column } => data::load_csv_file(path, *label_column),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    /// Independent banana draws for training and testing.
    Banana {
        n_train: usize,
        n_test: usize,
        noise: f64,
        seed: u64,
    },
    /// A training file and an optional test file. Without a test file a
    /// stratified quarter of the training data is held out.
    Files {
        train: PathBuf,
        test: Option<PathBuf>,
        format: DataFormat,
    },
}

/// Noise level at which plain PSO lands near 10-12% test error on banana
/// data with 400 training points.
pub const BANANA_NOISE: f64 = 0.3;

impl DataSource {
    /// Returns `(train, test)`.
    pub fn load(&self) -> Result<(Dataset, Dataset)> {
        match self {
            DataSource::Banana {
                n_train,
                n_test,
                noise,
                seed,
            } => {
                let train = gen_banana(*n_train, *noise, *seed)?.with_name("banana-train");
                // a distinct stream for the test draw
                let test = gen_banana(*n_test, *noise, seed ^ 0x5eed_7e57_0000_0001)?.with_name("banana-test");
                Ok((train, test))
            }
            DataSource::Files { train, test, format } => {
                let train_set = format.load(train)?;
                match test {
                    Some(t) => Ok((train_set, format.load(t)?)),
                    None => holdout_split(&train_set, 4, 0),
                }
            }
        }
    }
}

/// Holds out one of `parts` stratified folds as the test set.
pub fn holdout_split(data: &Dataset, parts: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let plan = make_folds(data, parts, seed)?;
    let (train, test) = plan.split(0);
    Ok((data.subset(&train)?, data.subset(&test)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSpec {
    pub source: DataSource,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub folds: usize,
    /// z-score features with statistics fitted on the training set.
    pub normalize: bool,
    /// Search settings shared by every cell; algorithm and seed are
    /// overwritten per cell.
    pub template: RunConfig,
    pub smo: SmoConfig,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl BenchmarkSpec {
    pub fn new(source: DataSource, algorithms: Vec<Algorithm>, seeds: Vec<u64>) -> Self {
        Self {
            source,
            algorithms,
            seeds,
            folds: 5,
            normalize: true,
            template: RunConfig::new(Algorithm::Ma4, 0),
            smo: SmoConfig::default(),
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::domain("benchmark needs at least one algorithm"));
        }
        if self.seeds.is_empty() {
            return Err(Error::domain("benchmark needs at least one seed"));
        }
        if self.folds < 2 {
            return Err(Error::domain(format!("need at least 2 folds, got {}", self.folds)));
        }
        self.smo.validate()?;
        for &a in &self.algorithms {
            cell_config(&self.template, a, 0).validate()?;
        }
        Ok(())
    }
}

/// Default seed list: `0..30`.
pub fn default_seeds() -> Vec<u64> {
    (0..30).collect()
}

fn cell_config(template: &RunConfig, algorithm: Algorithm, seed: u64) -> RunConfig {
    RunConfig {
        algorithm,
        strategy: algorithm.default_strategy(),
        seed,
        ..template.clone()
    }
}

/// One successful (algorithm, seed) cell. Error rates are fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub best_c: f64,
    pub best_gamma: f64,
    pub cv_fitness: f64,
    pub test_error: f64,
    pub evaluations: u64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub error: String,
}

/// Per-algorithm summary over its successful rows. Standard deviations are
/// sample deviations (zero for a single row).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub mean_test_error: f64,
    pub std_test_error: f64,
    pub mean_evaluations: f64,
    pub std_evaluations: f64,
    pub mean_wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub failures: Vec<CellFailure>,
    pub aggregates: Vec<Aggregate>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl BenchmarkReport {
    /// Sorts rows and failures by (algorithm, seed) and recomputes the
    /// aggregates.
    pub fn from_rows(mut rows: Vec<BenchmarkRow>, mut failures: Vec<CellFailure>) -> Self {
        rows.sort_by_key(|r| (r.algorithm, r.seed));
        failures.sort_by_key(|f| (f.algorithm, f.seed));
        let mut algorithms: Vec<Algorithm> = rows.iter().map(|r| r.algorithm).collect();
        algorithms.dedup();
        let aggregates = algorithms
            .into_iter()
            .map(|a| {
                let mine: Vec<&BenchmarkRow> = rows.iter().filter(|r| r.algorithm == a).collect();
                let errors: Vec<f64> = mine.iter().map(|r| r.test_error).collect();
                let evals: Vec<f64> = mine.iter().map(|r| r.evaluations as f64).collect();
                let walls: Vec<f64> = mine.iter().map(|r| r.wall_ms).collect();
                let (mean_test_error, std_test_error) = mean_std(&errors);
                let (mean_evaluations, std_evaluations) = mean_std(&evals);
                Aggregate {
                    algorithm: a,
                    runs: mine.len(),
                    mean_test_error,
                    std_test_error,
                    mean_evaluations,
                    std_evaluations,
                    mean_wall_ms: mean_std(&walls).0,
                }
            })
            .collect();
        Self {
            rows,
            failures,
            aggregates,
        }
    }

    pub fn aggregate(&self, algorithm: Algorithm) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.algorithm == algorithm)
    }
}

/// Tunes and scores a single cell.
pub fn run_cell(
    train: &Arc<Dataset>,
    test: &Dataset,
    spec: &BenchmarkSpec,
    algorithm: Algorithm,
    seed: u64,
) -> Result<BenchmarkRow> {
    let config = cell_config(&spec.template, algorithm, seed);
    let folds = make_folds(train, spec.folds, seed)?;
    let mut objective = CvObjective::new(train.clone(), folds, spec.smo.clone())?;
    let result = run(&config, &mut objective)?;
    let params = decode(&result.best_position);
    let test_error = test_error(train, test, &result.best_position, &spec.smo)?;
    Ok(BenchmarkRow {
        algorithm,
        seed,
        best_c: params.c,
        best_gamma: params.gamma,
        cv_fitness: result.best_fitness,
        test_error,
        evaluations: result.evaluations,
        wall_ms: result.wall_time.as_secs_f64() * 1e3,
    })
}

/// Runs every (algorithm, seed) cell. Data loading errors abort; a failing
/// cell is recorded in `failures` and the rest still run.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkReport> {
    spec.validate()?;
    let (train, test) = spec.source.load()?;
    let (train, test) = if spec.normalize {
        let stats = normalize_fit(&train);
        (normalize_apply(&stats, &train)?, normalize_apply(&stats, &test)?)
    } else {
        (train, test)
    };
    let train = Arc::new(train);
    let cells: Vec<(Algorithm, u64)> = spec
        .algorithms
        .iter()
        .flat_map(|&a| spec.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let work = || {
        cells
            .par_iter()
            .map(|&(a, s)| (a, s, run_cell(&train, &test, spec, a, s)))
            .collect::<Vec<_>>()
    };
    let outcomes = match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::domain(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (algorithm, seed, outcome) in outcomes {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(CellFailure {
                algorithm,
                seed,
                error: e.to_string(),
            }),
        }
    }
    Ok(BenchmarkReport::from_rows(rows, failures))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    JsonLines,
    Csv,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json-lines" | "jsonl" | "json" => Ok(ReportFormat::JsonLines),
            "csv" => Ok(ReportFormat::Csv),
            "table" | "txt" => Ok(ReportFormat::Table),
            _ => Err(Error::domain(format!(
                "unknown report format {s:?} (expected json-lines, csv or table)"
            ))),
        }
    }
}

fn io_err(e: impl Into<std::io::Error>) -> Error {
    Error::Io {
        path: PathBuf::from("<report>"),
        source: e.into(),
    }
}

/// Writes the report. json-lines and csv carry one row per successful cell
/// (failed cells appear in json-lines as `{algorithm, seed, error}`); the
/// table shows per-algorithm `mean±std` with error rates in percent.
pub fn write_report<W: Write>(report: &BenchmarkReport, format: ReportFormat, mut out: W) -> Result<()> {
    match format {
        ReportFormat::JsonLines => {
            for row in &report.rows {
                serde_json::to_writer(&mut out, row).map_err(io_err)?;
                out.write_all(b"\n").map_err(io_err)?;
            }
            for f in &report.failures {
                serde_json::to_writer(&mut out, f).map_err(io_err)?;
                out.write_all(b"\n").map_err(io_err)?;
            }
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            if report.rows.is_empty() {
                w.write_record([
                    "algorithm",
                    "seed",
                    "best_c",
                    "best_gamma",
                    "cv_fitness",
                    "test_error",
                    "evaluations",
                    "wall_ms",
                ])
                .map_err(io_err)?;
            }
            for row in &report.rows {
                w.serialize(row).map_err(io_err)?;
            }
            w.flush().map_err(io_err)?;
        }
        ReportFormat::Table => out.write_all(render_table(report).as_bytes()).map_err(io_err)?,
    }
    out.flush().map_err(io_err)
}

/// `mean±std` of a fraction rendered in percent with two decimals.
pub fn percent(mean: f64, std: f64) -> String {
    format!("{:.2}±{:.2}", mean * 100.0, std * 100.0)
}

pub fn render_table(report: &BenchmarkReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>5} {:>14} {:>18} {:>12}",
        "algorithm", "runs", "error (%)", "#eva", "time (s)"
    );
    for a in &report.aggregates {
        let _ = writeln!(
            s,
            "{:<10} {:>5} {:>14} {:>18} {:>12.2}",
            a.algorithm.name(),
            a.runs,
            percent(a.mean_test_error, a.std_test_error),
            format!("{:.1}±{:.1}", a.mean_evaluations, a.std_evaluations),
            a.mean_wall_ms / 1e3
        );
    }
    for f in &report.failures {
        let _ = writeln!(s, "failed: {} seed {}: {}", f.algorithm, f.seed, f.error);
    }
    s
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Line {
    Row(BenchmarkRow),
    Failure(CellFailure),
}

/// Reads json-lines output back into a report with recomputed aggregates.
pub fn read_json_lines<R: BufRead>(reader: R) -> Result<BenchmarkReport> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Line>(&line) {
            Ok(Line::Row(r)) => rows.push(r),
            Ok(Line::Failure(f)) => failures.push(f),
            Err(e) => {
                return Err(Error::Parse {
                    source_name: "json-lines".into(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(BenchmarkReport::from_rows(rows, failures))
}
