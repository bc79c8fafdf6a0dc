//! Regression datasets: ingestion, column normalization and synthetic instances.
//!
//! A [`Dataset`] always stores its design matrix with every column divided by
//! a recorded scale factor. For datasets built from raw values the scale is
//! the column's ℓ2 norm, so each column has unit norm. Held-out sets reuse the
//! scale factors of their training set and are therefore only approximately
//! unit-norm. Targets are never rescaled.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    column_norms: Vec<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from raw feature values, dividing each column by its
    /// ℓ2 norm. All-zero columns are rejected.
    pub fn from_raw(
        raw_x: DMatrix<f64>,
        y: DVector<f64>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        check_shape(&raw_x, &y, feature_names.as_deref())?;
        let names = feature_names.clone();
        let norms: Vec<f64> = raw_x.column_iter().map(|c| c.norm()).collect();
        for (j, &norm) in norms.iter().enumerate() {
            if norm == 0.0 {
                return Err(Error::ZeroColumn {
                    column: column_label(names.as_deref(), j),
                });
            }
        }
        Self::with_scaling(raw_x, y, norms, feature_names)
    }

    /// Builds a dataset by dividing each raw column by a caller-supplied
    /// scale, typically the norms of a training set.
    pub fn with_scaling(
        raw_x: DMatrix<f64>,
        y: DVector<f64>,
        column_norms: Vec<f64>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        check_shape(&raw_x, &y, feature_names.as_deref())?;
        if column_norms.len() != raw_x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: raw_x.ncols(),
                got: column_norms.len(),
            });
        }
        if let Some(j) = column_norms
            .iter()
            .position(|s| !(s.is_finite() && *s > 0.0))
        {
            return Err(Error::ZeroColumn {
                column: column_label(feature_names.as_deref(), j),
            });
        }
        let mut x = raw_x;
        for (j, &norm) in column_norms.iter().enumerate() {
            x.column_mut(j).unscale_mut(norm);
        }
        Ok(Dataset {
            x,
            y,
            column_norms,
            feature_names,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Scale factors the raw columns were divided by.
    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn feature_name(&self, j: usize) -> String {
        column_label(self.feature_names(), j)
    }

    /// Σ y_t², the objective of the empty selection.
    pub fn y_sq_sum(&self) -> f64 {
        self.y.norm_squared()
    }

    /// Reconstructs the unscaled feature matrix.
    pub fn raw_x(&self) -> DMatrix<f64> {
        let mut raw = self.x.clone();
        for (j, &norm) in self.column_norms.iter().enumerate() {
            raw.column_mut(j).scale_mut(norm);
        }
        raw
    }

    /// Re-normalizes the stored matrix so every column has unit norm. On an
    /// already-normalized dataset this is a no-op up to rounding.
    pub fn normalize(&self) -> Result<Self> {
        let renormed = Self::from_raw(self.x.clone(), self.y.clone(), self.feature_names.clone())?;
        let column_norms = self
            .column_norms
            .iter()
            .zip(&renormed.column_norms)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Dataset {
            column_norms,
            ..renormed
        })
    }

    /// Rows selected by `rows`, in the given order, still in normalized
    /// coordinates.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let x = self.x.select_rows(rows);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r]));
        Dataset {
            x,
            y,
            column_norms: self.column_norms.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Writes the dataset as CSV: a header of feature names plus `target`,
    /// then one row per sample. Values are the stored (normalized) features
    /// at 17 significant digits.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        let header: Vec<String> = (0..self.d()).map(|j| self.feature_name(j)).collect();
        out.push_str(&header.join(","));
        out.push_str(",target\n");
        for t in 0..self.n() {
            for j in 0..self.d() {
                out.push_str(&format_real(self.x[(t, j)]));
                out.push(',');
            }
            out.push_str(&format_real(self.y[t]));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn check_shape(x: &DMatrix<f64>, y: &DVector<f64>, names: Option<&[String]>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::NoRows);
    }
    if x.ncols() == 0 {
        return Err(Error::NoFeatures);
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if let Some(names) = names {
        if names.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                got: names.len(),
            });
        }
    }
    for t in 0..x.nrows() {
        for j in 0..x.ncols() {
            if !x[(t, j)].is_finite() {
                return Err(Error::NonFinite {
                    row: t + 1,
                    column: column_label(names, j),
                });
            }
        }
        if !y[t].is_finite() {
            return Err(Error::NonFinite {
                row: t + 1,
                column: "target".into(),
            });
        }
    }
    Ok(())
}

fn column_label(names: Option<&[String]>, j: usize) -> String {
    match names {
        Some(names) => names[j].clone(),
        None => format!("x{j}"),
    }
}

/// Formats a real with 17 significant digits, enough for exact round-trip.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Which CSV column holds the target.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ColumnSelector {
    Name(String),
    Index(usize),
    #[default]
    Last,
}

impl FromStr for ColumnSelector {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "last" => ColumnSelector::Last,
            _ => match s.parse::<usize>() {
                Ok(i) => ColumnSelector::Index(i),
                Err(_) => ColumnSelector::Name(s.to_string()),
            },
        })
    }
}

impl fmt::Display for ColumnSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnSelector::Name(n) => write!(f, "{n:?}"),
            ColumnSelector::Index(i) => write!(f, "#{i}"),
            ColumnSelector::Last => write!(f, "last"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub target: ColumnSelector,
    /// Subtract column means from features and target before normalizing.
    pub center: bool,
}

/// Reads a headed CSV file. Every non-target column is a feature.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, opts)
}

pub fn parse_csv(text: &str, opts: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::CsvParse {
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let target = match &opts.target {
        ColumnSelector::Name(name) => header.iter().position(|h| h == name),
        ColumnSelector::Index(i) => (*i < header.len()).then_some(*i),
        ColumnSelector::Last => header.len().checked_sub(1),
    }
    .ok_or_else(|| Error::MissingTarget(opts.target.to_string()))?;
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != target).collect();
    if feature_cols.is_empty() {
        return Err(Error::NoFeatures);
    }

    let mut values: Vec<f64> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::CsvParse {
            row,
            message: e.to_string(),
        })?;
        let cell = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| Error::NonNumeric {
                row,
                column: header[c].clone(),
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: header[c].clone(),
                });
            }
            Ok(v)
        };
        for &c in &feature_cols {
            values.push(cell(c)?);
        }
        targets.push(cell(target)?);
    }
    let n = targets.len();
    if n == 0 {
        return Err(Error::NoRows);
    }
    let d = feature_cols.len();
    let mut x = DMatrix::from_row_slice(n, d, &values);
    let mut y = DVector::from_vec(targets);
    if opts.center {
        for mut col in x.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        let mean = y.mean();
        y.add_scalar_mut(-mean);
    }
    let names = feature_cols.iter().map(|&c| header[c].clone()).collect();
    Dataset::from_raw(x, y, Some(names))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XDistribution {
    /// Uniform on (−1, 1).
    #[default]
    Uniform,
    StandardNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub k_true: usize,
    pub seed: u64,
    pub x_distribution: XDistribution,
    /// Bounds on the magnitude of nonzero true weights.
    pub w_range: (f64, f64),
}

impl SyntheticSpec {
    pub fn new(n: usize, d: usize, k_true: usize, seed: u64) -> Self {
        SyntheticSpec {
            n,
            d,
            k_true,
            seed,
            x_distribution: XDistribution::Uniform,
            w_range: (0.5, 2.0),
        }
    }

    /// Experiment default: true support of size ⌊d/2⌋.
    pub fn half_support(n: usize, d: usize, seed: u64) -> Self {
        Self::new(n, d, (d / 2).max(1), seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidSpec("n and d must be positive".into()));
        }
        if self.k_true == 0 || self.k_true > self.d {
            return Err(Error::InvalidSpec(format!(
                "k_true = {} must lie in 1..={}",
                self.k_true, self.d
            )));
        }
        let (lo, hi) = self.w_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "w_range ({lo}, {hi}) must be positive and ordered"
            )));
        }
        Ok(())
    }

    fn draw_x(&self, rows: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let mut values = Vec::with_capacity(rows * self.d);
        match self.x_distribution {
            XDistribution::Uniform => {
                let dist = Uniform::new(-1.0, 1.0).expect("valid bounds");
                values.extend((0..rows * self.d).map(|_| dist.sample(rng)));
            }
            XDistribution::StandardNormal => {
                values.extend((0..rows * self.d).map(|_| -> f64 { StandardNormal.sample(rng) }));
            }
        }
        DMatrix::from_row_slice(rows, self.d, &values)
    }
}

/// Draws a noise-free instance y = X·w with a k_true-sparse w. The targets are
/// computed after column normalization so `true_w` is exact in the stored
/// coordinates.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Vec<f64>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let raw = spec.draw_x(spec.n, &mut rng);

    let mut support = index::sample(&mut rng, spec.d, spec.k_true).into_vec();
    support.sort_unstable();
    let (lo, hi) = spec.w_range;
    let magnitude = Uniform::new_inclusive(lo, hi).expect("validated range");
    let mut true_w = vec![0.0; spec.d];
    for &j in &support {
        let m = magnitude.sample(&mut rng);
        true_w[j] = if rng.random::<bool>() { m } else { -m };
    }

    let placeholder = DVector::zeros(spec.n);
    let ds = Dataset::from_raw(raw, placeholder, None)?;
    let y = ds.x() * DVector::from_column_slice(&true_w);
    Ok((Dataset { y, ..ds }, true_w))
}

/// Draws a held-out set from the same distribution and weights, scaled with
/// the training set's column norms.
pub fn generate_held_out(
    spec: &SyntheticSpec,
    true_w: &[f64],
    train: &Dataset,
    n_test: usize,
    seed: u64,
) -> Result<Dataset> {
    spec.validate()?;
    if true_w.len() != spec.d || train.d() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            got: true_w.len().min(train.d()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = spec.draw_x(n_test, &mut rng);
    let placeholder = DVector::zeros(n_test);
    let ds = Dataset::with_scaling(raw, placeholder, train.column_norms().to_vec(), None)?;
    let y = ds.x() * DVector::from_column_slice(true_w);
    Ok(Dataset { y, ..ds })
}

/// Random disjoint train/test partition. The training part is re-normalized
/// from raw values; the test part is scaled with the training norms.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = ds.n();
    let n_test = if test_fraction > 0.0 && test_fraction < 1.0 {
        (n as f64 * test_fraction).round() as usize
    } else {
        0
    };
    let n_train = n.saturating_sub(n_test);
    if n_test == 0 || n_train == 0 {
        return Err(Error::DegenerateSplit { n_train, n_test });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perm = index::sample(&mut rng, n, n);
    let mut test_rows: Vec<usize> = perm.iter().take(n_test).collect();
    let mut train_rows: Vec<usize> = perm.iter().skip(n_test).collect();
    test_rows.sort_unstable();
    train_rows.sort_unstable();

    let raw = ds.raw_x();
    let names = ds.feature_names.clone();
    let train_y = DVector::from_iterator(n_train, train_rows.iter().map(|&r| ds.y[r]));
    let test_y = DVector::from_iterator(n_test, test_rows.iter().map(|&r| ds.y[r]));
    let train = Dataset::from_raw(raw.select_rows(&train_rows), train_y, names.clone())?;
    let test = Dataset::with_scaling(
        raw.select_rows(&test_rows),
        test_y,
        train.column_norms.clone(),
        names,
    )?;
    Ok((train, test))
}

/// JSON sidecar written next to a generated CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSidecar {
    pub spec: SyntheticSpec,
    pub true_w: Vec<f64>,
    pub column_norms: Vec<f64>,
}

pub fn write_sidecar(path: impl AsRef<Path>, sidecar: &SyntheticSidecar) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, sidecar)?;
    writeln!(f).map_err(|e| Error::io(path, e))
}
