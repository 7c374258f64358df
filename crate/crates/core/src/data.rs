//! Labelled datasets: synthetic Gaussian blobs and two moons, generic CSV
//! ingestion, seeded train/test splits and per-column standardization.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Columns with variance at or below this are standardized to zero.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub x: DenseMatrix,
    pub y: Vec<usize>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Split {
        Split {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn class_counts(&self, classes: usize) -> Vec<usize> {
        let mut counts = vec![0; classes];
        for &l in &self.y {
            counts[l] += 1;
        }
        counts
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Split,
    pub test: Split,
    pub num_classes: usize,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.train.dim()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Csv,
    Blobs,
    TwoMoons,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Blobs => "blobs",
            Self::TwoMoons => "two_moons",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "blobs" => Ok(Self::Blobs),
            "two_moons" => Ok(Self::TwoMoons),
            _ => Err(format!("unknown dataset kind `{s}` (expected csv, blobs or two_moons)")),
        }
    }
}

/// Everything needed to produce a [`Dataset`]. Fields irrelevant to `kind`
/// are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetDescriptor {
    pub kind: DatasetKind,
    // csv
    pub path: Option<PathBuf>,
    pub label_column: String,
    /// Feature columns by header name; `None` means every other column.
    pub feature_columns: Option<Vec<String>>,
    // synthetic
    pub n: usize,
    /// Number of classes; for CSV `None` infers `max label + 1`.
    pub classes: Option<usize>,
    pub dim: usize,
    /// Minimum distance between class means, in within-class standard
    /// deviations (blobs).
    pub separation: f64,
    /// Gaussian noise level (two moons).
    pub noise: f64,
    pub seed: u64,
    // split
    pub train_fraction: f64,
    pub split_seed: u64,
}

impl Default for DatasetDescriptor {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Blobs,
            path: None,
            label_column: "label".into(),
            feature_columns: None,
            n: 3000,
            classes: Some(3),
            dim: 2,
            separation: 4.0,
            noise: 0.1,
            seed: 0,
            train_fraction: 0.8,
            split_seed: 0,
        }
    }
}

impl DatasetDescriptor {
    pub fn blobs(n: usize, classes: usize, dim: usize, separation: f64, seed: u64) -> Self {
        Self {
            kind: DatasetKind::Blobs,
            n,
            classes: Some(classes),
            dim,
            separation,
            seed,
            split_seed: seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        match self.kind {
            DatasetKind::Csv => {
                if self.path.is_none() {
                    return Err(Error::InvalidConfig("csv dataset needs a path".into()));
                }
            }
            DatasetKind::Blobs | DatasetKind::TwoMoons => {
                let classes = self.classes.unwrap_or(0);
                if classes < 1 || self.n < classes || self.dim == 0 {
                    return Err(Error::InvalidConfig(format!(
                        "synthetic data needs N >= classes >= 1 and dim >= 1 (N={}, classes={classes}, dim={})",
                        self.n, self.dim
                    )));
                }
                if self.kind == DatasetKind::TwoMoons && (classes != 2 || self.dim < 2) {
                    return Err(Error::InvalidConfig("two_moons needs 2 classes and dim >= 2".into()));
                }
                if !(self.separation >= 0.0) || !(self.noise >= 0.0) {
                    return Err(Error::InvalidConfig("separation and noise must be non-negative".into()));
                }
            }
        }
        Ok(())
    }
}

/// Class means with pairwise distance at least `separation`: vertices of a
/// regular simplex when `dim >= classes`, otherwise evenly spaced along the
/// first axis.
fn blob_centers(classes: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|k| {
            let mut c = vec![0.0; dim];
            if dim >= classes {
                c[k] = separation / std::f64::consts::SQRT_2;
            } else {
                c[0] = separation * (k as f64 - (classes - 1) as f64 / 2.0);
            }
            c
        })
        .collect()
}

/// Balanced labels `i mod classes`, shuffled.
fn balanced_labels(n: usize, classes: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut y: Vec<usize> = (0..n).map(|i| i % classes).collect();
    y.shuffle(rng);
    y
}

/// Isotropic unit-variance Gaussian clusters, one per class.
pub fn synth_blobs(desc: &DatasetDescriptor) -> Result<Split> {
    desc.validate()?;
    let classes = desc.classes.unwrap_or(1);
    let mut rng = ChaCha8Rng::seed_from_u64(desc.seed);
    let centers = blob_centers(classes, desc.dim, desc.separation);
    let y = balanced_labels(desc.n, classes, &mut rng);
    let mut data = Vec::with_capacity(desc.n * desc.dim);
    for &label in &y {
        for &c in &centers[label] {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(c + z);
        }
    }
    Ok(Split {
        x: DenseMatrix::new(desc.n, desc.dim, data)?,
        y,
    })
}

/// Two interleaving half circles with Gaussian noise; extra dimensions carry
/// noise only.
pub fn synth_two_moons(desc: &DatasetDescriptor) -> Result<Split> {
    desc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(desc.seed);
    let y = balanced_labels(desc.n, 2, &mut rng);
    let mut data = Vec::with_capacity(desc.n * desc.dim);
    for &label in &y {
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let (px, py) = if label == 0 {
            (theta.cos(), theta.sin())
        } else {
            (1.0 - theta.cos(), 0.5 - theta.sin())
        };
        for d in 0..desc.dim {
            let base = match d {
                0 => px,
                1 => py,
                _ => 0.0,
            };
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(base + desc.noise * z);
        }
    }
    Ok(Split {
        x: DenseMatrix::new(desc.n, desc.dim, data)?,
        y,
    })
}

/// Seeded shuffle, then the first `round(train_fraction * N)` rows (at least
/// one, leaving at least one) go to train.
pub fn train_test_split(data: &Split, train_fraction: f64, seed: u64) -> Result<(Split, Split)> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidConfig("need at least two rows to split".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    Ok((data.subset(&idx[..n_train]), data.subset(&idx[n_train..])))
}

/// Per-column `(mean, std)` from `fit`, applied to every split in `apply`.
/// Columns whose variance is at most [`VARIANCE_FLOOR`] become zero.
pub fn standardize(fit: &Split, apply: &mut [&mut Split]) {
    let (n, d) = (fit.len() as f64, fit.dim());
    let mut stats = Vec::with_capacity(d);
    for j in 0..d {
        let mean = (0..fit.len()).map(|i| fit.x.get(i, j)).sum::<f64>() / n;
        let var = (0..fit.len()).map(|i| (fit.x.get(i, j) - mean).powi(2)).sum::<f64>() / n;
        stats.push((mean, var));
    }
    for split in apply.iter_mut() {
        for i in 0..split.len() {
            for (j, &(mean, var)) in stats.iter().enumerate() {
                let v = if var <= VARIANCE_FLOOR {
                    0.0
                } else {
                    (split.x.get(i, j) - mean) / var.sqrt()
                };
                split.x.set(i, j, v);
            }
        }
    }
}

/// Reads a headered CSV of numeric features and integer labels.
/// Returns the rows and the number of classes.
pub fn read_labeled_csv(
    path: &Path,
    label_column: &str,
    feature_columns: Option<&[String]>,
    classes: Option<usize>,
) -> Result<(Split, usize)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidConfig(format!("column `{name}` not in header of {}", path.display())))
    };
    let label_idx = find(label_column)?;
    let feature_idx: Vec<usize> = match feature_columns {
        Some(cols) => cols.iter().map(|c| find(c)).collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&i| i != label_idx).collect(),
    };
    if feature_idx.is_empty() {
        return Err(Error::InvalidConfig("no feature columns".into()));
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::MalformedRow {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        for &j in &feature_idx {
            let raw = &record[j];
            let v: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::NonNumericFeature {
                    line,
                    column: headers[j].to_string(),
                    value: raw.to_string(),
                })?;
            data.push(v);
        }
        let raw = &record[label_idx];
        let label = raw
            .parse::<usize>()
            .ok()
            .filter(|&l| classes.is_none_or(|c| l < c))
            .ok_or_else(|| Error::LabelOutOfRange {
                line,
                value: raw.to_string(),
            })?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::InvalidConfig(format!("{} has no data rows", path.display())));
    }
    let num_classes = classes.unwrap_or_else(|| labels.iter().max().unwrap() + 1);
    let x = DenseMatrix::new(labels.len(), feature_idx.len(), data)?;
    Ok((Split { x, y: labels }, num_classes))
}

/// Loads a CSV dataset, splits it and standardizes features using the train
/// split's statistics.
pub fn ingest_csv(desc: &DatasetDescriptor) -> Result<Dataset> {
    desc.validate()?;
    let path = desc.path.as_deref().expect("validated");
    let (all, num_classes) = read_labeled_csv(path, &desc.label_column, desc.feature_columns.as_deref(), desc.classes)?;
    let (mut train, mut test) = train_test_split(&all, desc.train_fraction, desc.split_seed)?;
    let fit = train.clone();
    standardize(&fit, &mut [&mut train, &mut test]);
    Ok(Dataset {
        train,
        test,
        num_classes,
    })
}

/// Unsplit rows for a synthetic descriptor.
pub fn synthesize(desc: &DatasetDescriptor) -> Result<Split> {
    match desc.kind {
        DatasetKind::Blobs => synth_blobs(desc),
        DatasetKind::TwoMoons => synth_two_moons(desc),
        DatasetKind::Csv => Err(Error::InvalidConfig("csv is not a synthetic dataset".into())),
    }
}

pub fn load_dataset(desc: &DatasetDescriptor) -> Result<Dataset> {
    match desc.kind {
        DatasetKind::Csv => ingest_csv(desc),
        _ => {
            let all = synthesize(desc)?;
            let (train, test) = train_test_split(&all, desc.train_fraction, desc.split_seed)?;
            Ok(Dataset {
                train,
                test,
                num_classes: desc.classes.unwrap_or(1),
            })
        }
    }
}

/// Writes rows as `x0,...,x{d-1},label` with a header.
pub fn write_labeled_csv(split: &Split, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..split.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..split.len() {
        let mut row: Vec<String> = split.x.row(i).iter().map(|v| v.to_string()).collect();
        row.push(split.y[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
