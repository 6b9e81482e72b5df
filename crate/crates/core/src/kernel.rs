//! Kernel evaluations, Gram matrices and target mean maps.
//!
//! The Gram matrix `K` is built over the *source* rows (the candidate
//! prototypes) and the mean map `mu` holds, for every source row `y_j`, the
//! average kernel value `(1/n1) * sum_i k(x_i, y_j)` against the *target*
//! rows. Together they define the concave objective maximized in
//! [`crate::nnqp`].

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::map_indices;

/// Default diagonal jitter; keeps `K` positive definite when the source
/// contains duplicated rows.
pub const DEFAULT_JITTER: f64 = 1e-10;

/// Dense row-major matrix of instances (rows) by features (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Dataset {
    pub fn new(values: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "dataset must have at least one row and one column, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "entry ({}, {}) is {}",
                pos / cols,
                pos % cols,
                values[pos]
            )));
        }
        Ok(Self { values, rows, cols })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(values, rows.len(), cols)
    }

    /// Number of instances.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of features.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stacks the rows of several datasets with a shared feature count.
    pub fn concat(parts: &[&Dataset]) -> Result<Self> {
        let cols = parts
            .first()
            .map(|d| d.cols)
            .ok_or_else(|| Error::InvalidInput("nothing to concatenate".into()))?;
        let mut values = Vec::new();
        let mut rows = 0;
        for part in parts {
            if part.cols != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: part.cols,
                });
            }
            values.extend_from_slice(&part.values);
            rows += part.rows;
        }
        Self::new(values, rows, cols)
    }
}

/// Per-feature z-score transform fitted on one or more datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    /// Fits pooled column means and standard deviations. Constant columns
    /// keep a unit scale so they are only centered.
    pub fn fit(datasets: &[&Dataset]) -> Result<Self> {
        let pooled = Dataset::concat(datasets)?;
        let n = pooled.rows as f64;
        let mut mean = vec![0.0; pooled.cols];
        for row in pooled.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; pooled.cols];
        for row in pooled.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        if data.cols != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: data.cols,
            });
        }
        let values = data
            .iter_rows()
            .flat_map(|row| {
                row.iter()
                    .zip(&self.mean)
                    .zip(&self.scale)
                    .map(|((v, m), s)| (v - m) / s)
            })
            .collect();
        Dataset::new(values, data.rows, data.cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelFamily {
    /// `exp(-|x - y|^2 / (2 sigma^2))`
    Gaussian { bandwidth: f64 },
    /// `<x, y>`
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub family: KernelFamily,
    pub jitter: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        let spec = Self {
            family: KernelFamily::Gaussian { bandwidth },
            jitter: DEFAULT_JITTER,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear() -> Self {
        Self {
            family: KernelFamily::Linear,
            jitter: DEFAULT_JITTER,
        }
    }

    pub fn with_jitter(mut self, jitter: f64) -> Result<Self> {
        self.jitter = jitter;
        self.validate()?;
        Ok(self)
    }

    pub fn bandwidth(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Gaussian { bandwidth } => Some(bandwidth),
            KernelFamily::Linear => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let KernelFamily::Gaussian { bandwidth } = self.family {
            if !(bandwidth > 0.0 && bandwidth.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "gaussian bandwidth must be positive and finite, got {bandwidth}"
                )));
            }
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "jitter must be non-negative, got {}",
                self.jitter
            )));
        }
        Ok(())
    }

    // Callers have already checked dimensions.
    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian { bandwidth } => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelFamily::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }
}

/// Evaluates `k(x, y)` for a single pair of feature vectors.
pub fn kernel_eval(x: &[f64], y: &[f64], spec: &KernelSpec) -> Result<f64> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let v = spec.eval_unchecked(x, y);
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("kernel value {v}")));
    }
    Ok(v)
}

/// Symmetric Gram matrix over the source rows, jitter on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    entries: Vec<f64>,
    size: usize,
    spec: Option<KernelSpec>,
}

impl KernelMatrix {
    /// Wraps an explicit symmetric matrix, e.g. a hand-built test instance.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::InvalidInput("empty kernel matrix".into()));
        }
        let mut entries = Vec::with_capacity(size * size);
        for row in rows {
            let row = row.as_ref();
            if row.len() != size {
                return Err(Error::DimensionMismatch {
                    expected: size,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel matrix entry".into()));
        }
        for i in 0..size {
            for j in 0..i {
                if entries[i * size + j] != entries[j * size + i] {
                    return Err(Error::InvalidInput(format!(
                        "kernel matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            entries,
            size,
            spec: None,
        })
    }

    pub fn identity(size: usize) -> Self {
        let mut entries = vec![0.0; size * size];
        for i in 0..size {
            entries[i * size + i] = 1.0;
        }
        Self {
            entries,
            size,
            spec: None,
        }
    }

    /// Number of source rows `n2`.
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    /// Row `i`, which equals column `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    pub fn spec(&self) -> Option<&KernelSpec> {
        self.spec.as_ref()
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.size)
            .map(|i| self.get(i, i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Principal submatrix over `indices`, in the given order.
    pub fn submatrix(&self, indices: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(indices.len(), indices.len(), |a, b| {
            self.get(indices[a], indices[b])
        })
    }

    /// Ascending eigenvalues of a principal submatrix.
    pub fn eigenvalues(&self, indices: &[usize]) -> Vec<f64> {
        let mut vals: Vec<f64> = SymmetricEigen::new(self.submatrix(indices))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        vals.sort_by(f64::total_cmp);
        vals
    }
}

/// Builds `K_ij = k(y_i, y_j)` over the source rows. Each upper-triangle
/// entry is computed once and mirrored.
pub fn kernel_matrix(source: &Dataset, spec: &KernelSpec) -> Result<KernelMatrix> {
    spec.validate()?;
    let n = source.rows();
    let upper = map_indices(n, |i| {
        let yi = source.row(i);
        (i..n)
            .map(|j| spec.eval_unchecked(yi, source.row(j)))
            .collect::<Vec<_>>()
    });
    let mut entries = vec![0.0; n * n];
    for (i, tail) in upper.into_iter().enumerate() {
        for (offset, v) in tail.into_iter().enumerate() {
            let j = i + offset;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("kernel entry ({i}, {j}) is {v}")));
            }
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    for i in 0..n {
        entries[i * n + i] += spec.jitter;
    }
    Ok(KernelMatrix {
        entries,
        size: n,
        spec: Some(*spec),
    })
}

/// Point-wise empirical target mean embedding evaluated at every source row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMap {
    entries: Vec<f64>,
    n1: usize,
}

impl MeanMap {
    pub fn new(entries: Vec<f64>, n1: usize) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mean map entry".into()));
        }
        Ok(Self { entries, n1 })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of target rows averaged over.
    pub fn n1(&self) -> usize {
        self.n1
    }

    #[inline]
    pub fn get(&self, j: usize) -> f64 {
        self.entries[j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }
}

pub fn mean_map(target: &Dataset, source: &Dataset, spec: &KernelSpec) -> Result<MeanMap> {
    spec.validate()?;
    if target.cols() != source.cols() {
        return Err(Error::DimensionMismatch {
            expected: source.cols(),
            found: target.cols(),
        });
    }
    let n1 = target.rows();
    let entries = map_indices(source.rows(), |j| {
        let yj = source.row(j);
        let total: f64 = target.iter_rows().map(|x| spec.eval_unchecked(x, yj)).sum();
        total / n1 as f64
    });
    MeanMap::new(entries, n1)
}

/// Median of the Euclidean distances over all unordered row pairs.
pub fn median_bandwidth(data: &Dataset) -> Result<f64> {
    let n = data.rows();
    if n < 2 {
        return Err(Error::InvalidInput(
            "median bandwidth needs at least two rows".into(),
        ));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let xi = data.row(i);
        for j in (i + 1)..n {
            let sq: f64 = xi
                .iter()
                .zip(data.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(sq.sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    if median > 0.0 {
        Ok(median)
    } else if dists.last().copied().unwrap_or(0.0) > 0.0 {
        Err(Error::Degenerate(
            "median pairwise distance is zero (mostly duplicated rows)".into(),
        ))
    } else {
        Err(Error::Degenerate("all rows are identical".into()))
    }
}
