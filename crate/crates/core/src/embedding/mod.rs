//! Producing the low-dimensional cloud that feeds the grid layout: pairwise
//! distances, classical (Torgerson) MDS, Procrustes alignment and file import.

pub mod eigen;
pub mod io;
mod procrustes;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{CloudError, Point, PointCloud, MAX_DIMS};
use eigen::{top_eigenpairs, SymMatrix};

pub use io::{
    export_embedding_csv, import_embedding, import_embedding_csv, import_embedding_json,
    read_distance_matrix_csv, write_distance_matrix_csv,
};
pub use procrustes::procrustes_align;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("vector {id:?} has length {got}, expected {expected}")]
    DimensionMismatch { id: String, expected: usize, got: usize },
    #[error("vector {0:?} is zero; cosine distance is undefined")]
    ZeroVector(String),
    #[error("vector {id:?} has a non-finite entry")]
    NonFinite { id: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("invalid distance matrix: {0}")]
    InvalidDistances(String),
    #[error("target dims must be between 1 and {MAX_DIMS}, got {0}")]
    TargetDims(usize),
    #[error("ids differ between the two clouds: {0}")]
    IdMismatch(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EmbeddingError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Cosine,
}

impl std::str::FromStr for Metric {
    type Err = EmbeddingError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(EmbeddingError::Format(format!("unknown metric {other:?}"))),
        }
    }
}

/// Labelled vectors of one common length, e.g. topic keyword vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVectors")]
pub struct HighDimVectors {
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawVectors {
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl TryFrom<RawVectors> for HighDimVectors {
    type Error = EmbeddingError;

    fn try_from(raw: RawVectors) -> Result<Self> {
        HighDimVectors::new(raw.ids, raw.vectors)
    }
}

impl HighDimVectors {
    pub fn new(ids: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != vectors.len() {
            return Err(EmbeddingError::Format(format!(
                "{} ids for {} vectors",
                ids.len(),
                vectors.len()
            )));
        }
        let expected = vectors.first().map_or(0, Vec::len);
        let mut seen = HashSet::new();
        for (id, v) in ids.iter().zip(&vectors) {
            if v.len() != expected {
                return Err(EmbeddingError::DimensionMismatch {
                    id: id.clone(),
                    expected,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EmbeddingError::NonFinite { id: id.clone() });
            }
            if !seen.insert(id.as_str()) {
                return Err(EmbeddingError::DuplicateId(id.clone()));
            }
        }
        Ok(HighDimVectors { ids, vectors })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Symmetric, zero-diagonal, nonnegative distances between labelled items.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// `data` is row-major `n × n`. Asymmetry up to `1e-9` relative is
    /// averaged away; anything larger is rejected.
    pub fn new(ids: Vec<String>, mut data: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if data.len() != n * n {
            return Err(EmbeddingError::InvalidDistances(format!(
                "{} entries for {n} ids",
                data.len()
            )));
        }
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(EmbeddingError::DuplicateId(id.clone()));
            }
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(EmbeddingError::InvalidDistances(format!(
                    "nonzero diagonal at {:?}",
                    ids[i]
                )));
            }
            for j in i + 1..n {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if !a.is_finite() || !b.is_finite() || a < 0.0 || b < 0.0 {
                    return Err(EmbeddingError::InvalidDistances(format!(
                        "entry ({:?}, {:?}) is negative or non-finite",
                        ids[i], ids[j]
                    )));
                }
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                    return Err(EmbeddingError::InvalidDistances(format!(
                        "asymmetric entry ({:?}, {:?}): {a} vs {b}",
                        ids[i], ids[j]
                    )));
                }
                let avg = 0.5 * (a + b);
                data[i * n + j] = avg;
                data[j * n + i] = avg;
            }
        }
        Ok(DistanceMatrix { ids, data })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n() + j]
    }

    pub fn max_abs_diff(&self, other: &DistanceMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

pub fn pairwise_distances(v: &HighDimVectors, metric: Metric) -> Result<DistanceMatrix> {
    let n = v.len();
    if n < 2 {
        return Err(EmbeddingError::TooFewPoints { needed: 2, got: n });
    }
    let norms: Vec<f64> = v.vectors.iter().map(|x| x.iter().map(|a| a * a).sum::<f64>().sqrt()).collect();
    if metric == Metric::Cosine {
        if let Some(i) = norms.iter().position(|&l| l == 0.0) {
            return Err(EmbeddingError::ZeroVector(v.ids[i].clone()));
        }
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&v.vectors[i], &v.vectors[j]);
            let d = match metric {
                Metric::Euclidean => {
                    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
                }
                Metric::Cosine => {
                    let cos = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (norms[i] * norms[j]);
                    (1.0 - cos).max(0.0)
                }
            };
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix::new(v.ids.clone(), data)
}

/// Euclidean distances between the points of a cloud.
pub fn cloud_distances(cloud: &PointCloud) -> DistanceMatrix {
    let ids: Vec<String> = cloud.ids().map(str::to_string).collect();
    let pts = cloud.points();
    let n = pts.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(&pts[i].coords, &pts[j].coords);
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix { ids, data }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MdsWarning {
    /// All distances are zero; every coordinate is 0.
    Degenerate,
    /// A retained eigenvalue was negative (non-Euclidean input) and was clamped.
    NegativeEigenvalue { axis: usize, value: f64 },
    NotConverged { iterations: usize, relative_residual: f64 },
}

#[derive(Debug, Clone)]
pub struct MdsOutput {
    pub cloud: PointCloud,
    /// Retained eigenvalues after clamping, descending.
    pub eigenvalues: Vec<f64>,
    pub warnings: Vec<MdsWarning>,
}

/// Classical (Torgerson) MDS.
///
/// Double-centres the squared distances, `B = -½ J D² J`, takes the top
/// `target_dims` eigenpairs and scales each eigenvector by `√λ`. Axes are
/// oriented so that, among the points of largest magnitude on that axis, the
/// one with the smallest id is nonnegative.
pub fn classical_mds(d: &DistanceMatrix, target_dims: usize) -> Result<MdsOutput> {
    if !(1..=MAX_DIMS).contains(&target_dims) {
        return Err(EmbeddingError::TargetDims(target_dims));
    }
    let n = d.n();
    if n <= target_dims {
        return Err(EmbeddingError::TooFewPoints { needed: target_dims + 1, got: n });
    }

    let sq: Vec<f64> = d.data.iter().map(|v| v * v).collect();
    let row_means: Vec<f64> = (0..n).map(|i| sq[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] = -0.5 * (sq[i * n + j] - row_means[i] - row_means[j] + grand);
        }
    }
    let b = SymMatrix::new(n, b);
    let norm = b.inf_norm();

    let mut warnings = Vec::new();
    let mut coords = vec![vec![0.0; target_dims]; n];
    let mut eigenvalues = vec![0.0; target_dims];
    if norm == 0.0 {
        log::warn!("all distances are zero; MDS output is degenerate");
        warnings.push(MdsWarning::Degenerate);
    } else {
        let pairs = top_eigenpairs(&b, target_dims);
        if !pairs.converged {
            log::warn!("eigensolver stopped after {} iterations", pairs.iterations);
            warnings.push(MdsWarning::NotConverged {
                iterations: pairs.iterations,
                relative_residual: pairs.max_relative_residual,
            });
        }
        for (axis, (&value, vector)) in pairs.values.iter().zip(&pairs.vectors).enumerate() {
            if value < -eigen::RESIDUAL_TOLERANCE * norm {
                log::warn!("clamping negative eigenvalue {value} on axis {axis}");
                warnings.push(MdsWarning::NegativeEigenvalue { axis, value });
            }
            let value = value.max(0.0);
            eigenvalues[axis] = value;
            let scale = value.sqrt();
            for (row, v) in coords.iter_mut().zip(vector) {
                row[axis] = v * scale;
            }
        }
        center_columns(&mut coords);
        orient_axes(&mut coords, d.ids());
    }

    let points = d.ids.iter().cloned().zip(coords).map(|(id, c)| Point::new(id, c)).collect();
    Ok(MdsOutput { cloud: PointCloud::new(target_dims, points)?, eigenvalues, warnings })
}

fn center_columns(coords: &mut [Vec<f64>]) {
    let n = coords.len() as f64;
    let dims = coords.first().map_or(0, Vec::len);
    for axis in 0..dims {
        let mean = coords.iter().map(|r| r[axis]).sum::<f64>() / n;
        coords.iter_mut().for_each(|r| r[axis] -= mean);
    }
}

fn orient_axes(coords: &mut [Vec<f64>], ids: &[String]) {
    let dims = coords.first().map_or(0, Vec::len);
    for axis in 0..dims {
        let peak = coords.iter().map(|r| r[axis].abs()).fold(0.0, f64::max);
        if peak == 0.0 {
            continue;
        }
        let anchor = coords
            .iter()
            .zip(ids)
            .filter(|(r, _)| r[axis].abs() >= peak * (1.0 - 1e-9))
            .min_by(|a, b| a.1.cmp(b.1))
            .map(|(r, _)| r[axis])
            .unwrap_or(0.0);
        if anchor < 0.0 {
            coords.iter_mut().for_each(|r| r[axis] = -r[axis]);
        }
    }
}
