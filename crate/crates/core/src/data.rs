//! Labelled binary datasets: loading, normalization and synthetic data.
//!
//! Labels are stored as `+1.0` / `-1.0`. When reading files any positive
//! label maps to `+1` and everything else to `-1`.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    /// Row-major `n x d`.
    features: Vec<f64>,
    labels: Vec<f64>,
    n_features: usize,
}

fn map_label(raw: f64) -> f64 {
    if raw > 0.0 {
        1.0
    } else {
        -1.0
    }
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Vec<f64>, n_features: usize, labels: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::domain("a dataset needs at least one example"));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n_features,
                found: features.len(),
            });
        }
        if let Some(y) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::domain(format!("label {y} is not +1 or -1")));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("features must be finite"));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            n_features,
        })
    }

    pub fn from_rows(name: impl Into<String>, rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: rows.len(),
            });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: r.len(),
            });
        }
        Self::new(name, rows.concat(), d, labels)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// `(#positive, #negative)`
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y > 0.0).count();
        (pos, self.len() - pos)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self::new(
            self.name.clone(),
            features,
            self.n_features,
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

fn parse_error(source_name: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: message.into(),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `<label> <index>:<value> ...` lines with 1-based ascending indices.
/// Blank lines and `#` comments are skipped; absent features are zero.
pub fn load_libsvm<R: BufRead>(reader: R, source_name: &str) -> Result<Dataset> {
    let mut sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut dims = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| parse_error(source_name, lineno, e.to_string()))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_error(source_name, lineno, format!("bad label {label_tok:?}")))?;
        if !label.is_finite() {
            return Err(parse_error(source_name, lineno, format!("bad label {label_tok:?}")));
        }

        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_error(source_name, lineno, format!("expected index:value, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_error(source_name, lineno, format!("bad feature index {idx:?}")))?;
            if idx == 0 {
                return Err(parse_error(source_name, lineno, "feature indices are 1-based"));
            }
            if idx <= last {
                return Err(parse_error(
                    source_name,
                    lineno,
                    format!("feature index {idx} does not follow {last}"),
                ));
            }
            let val: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_error(source_name, lineno, format!("bad feature value {val:?}")))?;
            last = idx;
            row.push((idx, val));
        }
        dims = dims.max(last);
        sparse.push(row);
        labels.push(map_label(label));
    }

    if labels.is_empty() {
        return Err(Error::domain(format!("{source_name}: no examples")));
    }
    let mut features = vec![0.0; labels.len() * dims];
    for (i, row) in sparse.iter().enumerate() {
        for &(idx, val) in row {
            features[i * dims + idx - 1] = val;
        }
    }
    Dataset::new(source_name, features, dims, labels)
}

pub fn load_libsvm_file(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    load_libsvm(BufReader::new(open(path)?), &path.display().to_string())
}

/// Writes `data` in libsvm format, omitting zero features.
pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> std::io::Result<()> {
    for i in 0..data.len() {
        write!(out, "{}", if data.label(i) > 0.0 { "+1" } else { "-1" })?;
        for (d, &v) in data.row(i).iter().enumerate() {
            if v != 0.0 {
                write!(out, " {}:{}", d + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a comma-separated numeric table. A first line with any
/// non-numeric cell is taken as a header.
pub fn load_csv<R: Read>(reader: R, label_column: usize, source_name: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut width: Option<usize> = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_error(source_name, k + 1, e.to_string()))?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<Option<f64>> = record
            .iter()
            .map(|cell| cell.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        if k == 0 && parsed.iter().any(Option::is_none) {
            continue;
        }
        let w = *width.get_or_insert(parsed.len());
        if parsed.len() != w {
            return Err(parse_error(
                source_name,
                line,
                format!("expected {w} columns, found {}", parsed.len()),
            ));
        }
        if label_column >= w {
            return Err(Error::domain(format!(
                "label column {label_column} out of range for {w} columns"
            )));
        }
        for (col, value) in parsed.iter().enumerate() {
            let v = value.ok_or_else(|| {
                parse_error(
                    source_name,
                    line,
                    format!("column {}: non-numeric cell {:?}", col + 1, &record[col]),
                )
            })?;
            if col == label_column {
                labels.push(map_label(v));
            } else {
                features.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::domain(format!("{source_name}: no examples")));
    }
    let d = width.unwrap_or(1) - 1;
    Dataset::new(source_name, features, d, labels)
}

pub fn load_csv_file(path: impl AsRef<Path>, label_column: usize) -> Result<Dataset> {
    let path = path.as_ref();
    load_csv(open(path)?, label_column, &path.display().to_string())
}

/// Per-feature mean and population standard deviation (zero std stored
/// as 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn normalize_fit(train: &Dataset) -> NormalizationStats {
    let n = train.len() as f64;
    let d = train.n_features();
    let mut mean = vec![0.0; d];
    for i in 0..train.len() {
        for (m, x) in mean.iter_mut().zip(train.row(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for i in 0..train.len() {
        for ((v, x), m) in var.iter_mut().zip(train.row(i)).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var
        .into_iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    NormalizationStats { mean, std }
}

pub fn normalize_apply(stats: &NormalizationStats, data: &Dataset) -> Result<Dataset> {
    if stats.mean.len() != data.n_features() {
        return Err(Error::DimensionMismatch {
            expected: stats.mean.len(),
            found: data.n_features(),
        });
    }
    let d = data.n_features();
    let features = data
        .features
        .iter()
        .enumerate()
        .map(|(k, x)| (x - stats.mean[k % d]) / stats.std[k % d])
        .collect();
    Dataset::new(data.name.clone(), features, d, data.labels.clone())
}

/// Two interleaved crescents in 2-D with isotropic Gaussian noise.
///
/// Labels alternate `+1, -1, ...`, so the classes differ in size by at most
/// one. The positive class follows `(cos t, sin t)` and the negative class
/// `(1 - cos t, 0.5 - sin t)` for `t` uniform in `[0, pi]`.
pub fn gen_banana(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::domain("banana data needs n >= 2"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::domain(format!("noise {noise} must be non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, noise).expect("noise checked above");
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = rng.random_range(0.0..=std::f64::consts::PI);
        let (x, y, label) = if i % 2 == 0 {
            (t.cos(), t.sin(), 1.0)
        } else {
            (1.0 - t.cos(), 0.5 - t.sin(), -1.0)
        };
        features.push(x + gauss.sample(&mut rng));
        features.push(y + gauss.sample(&mut rng));
        labels.push(label);
    }
    Dataset::new("banana", features, 2, labels)
}
