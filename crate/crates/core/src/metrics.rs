//! Layout quality measures: point overlap, density heterogeneity, per-axis
//! order agreement and distance correlation between a cloud and its grid.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{Point, PointCloud};
use crate::embedding::euclidean;
use crate::sd::GridAssignment;

const PAIR_SAMPLE_SEED: u64 = 0x9a1_25ee;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("radius must be a nonnegative number, got {0}")]
    NegativeRadius(f64),
    #[error("bins per axis must be at least 1")]
    NoBins,
    #[error("expected {expected} bin counts, got {got}")]
    BinsDims { expected: usize, got: usize },
    #[error("cloud is empty")]
    Empty,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("ids differ between cloud and assignment: {0}")]
    IdMismatch(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Point id → lattice cell.
pub type Placement = BTreeMap<String, Vec<usize>>;

/// Overlap and density figures for one cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudScore {
    pub overlap_pairs: usize,
    pub heterogeneity: f64,
}

/// Quality of a grid placement relative to the cloud it was computed from.
/// `overlap_pairs` and `heterogeneity` describe the grid itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutScore {
    pub overlap_pairs: usize,
    pub heterogeneity: f64,
    pub topology_agreement: f64,
    /// `None` when either distance list has zero variance.
    pub geometry_correlation: Option<f64>,
}

/// Number of unordered pairs at Euclidean distance `<= radius`.
pub fn overlap_count(cloud: &PointCloud, radius: f64) -> Result<usize> {
    if radius.is_nan() || radius < 0.0 {
        return Err(MetricsError::NegativeRadius(radius));
    }
    let pts = cloud.points();
    if radius == 0.0 {
        let mut groups: HashMap<Vec<u64>, usize> = HashMap::new();
        for p in pts {
            // +0.0 and -0.0 coincide.
            let key = p.coords.iter().map(|c| (c + 0.0).to_bits()).collect();
            *groups.entry(key).or_default() += 1;
        }
        return Ok(groups.values().map(|&k| k * (k - 1) / 2).sum());
    }

    let dims = cloud.dims();
    let bucket_of = |c: &[f64]| -> Vec<i64> { c.iter().map(|v| (v / radius).floor() as i64).collect() };
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, p) in pts.iter().enumerate() {
        buckets.entry(bucket_of(&p.coords)).or_default().push(i);
    }
    let offsets = neighbour_offsets(dims);
    let r2 = radius * radius;
    let mut count = 0;
    for (i, p) in pts.iter().enumerate() {
        let home = bucket_of(&p.coords);
        for off in &offsets {
            let key: Vec<i64> = home.iter().zip(off).map(|(h, o)| h.saturating_add(*o)).collect();
            if let Some(members) = buckets.get(&key) {
                count += members
                    .iter()
                    .filter(|&&j| j > i)
                    .filter(|&&j| {
                        let d2: f64 = p.coords.iter().zip(&pts[j].coords).map(|(a, b)| (a - b) * (a - b)).sum();
                        d2 <= r2
                    })
                    .count();
            }
        }
    }
    Ok(count)
}

fn neighbour_offsets(dims: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..dims {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-1..=1).map(move |d| {
                    let mut v = prefix.clone();
                    v.push(d);
                    v
                })
            })
            .collect();
    }
    out
}

/// Coefficient of variation of per-bin counts over `bins_per_axis` equal
/// bins along every axis of the bounding box.
pub fn density_heterogeneity(cloud: &PointCloud, bins_per_axis: usize) -> Result<f64> {
    density_heterogeneity_bins(cloud, &vec![bins_per_axis; cloud.dims()])
}

/// As [`density_heterogeneity`] with a separate bin count per axis.
pub fn density_heterogeneity_bins(cloud: &PointCloud, bins: &[usize]) -> Result<f64> {
    if bins.len() != cloud.dims() {
        return Err(MetricsError::BinsDims { expected: cloud.dims(), got: bins.len() });
    }
    if bins.contains(&0) {
        return Err(MetricsError::NoBins);
    }
    if cloud.is_empty() {
        return Err(MetricsError::Empty);
    }
    let dims = cloud.dims();
    let mut lo = vec![f64::INFINITY; dims];
    let mut hi = vec![f64::NEG_INFINITY; dims];
    for p in cloud.points() {
        for k in 0..dims {
            lo[k] = lo[k].min(p.coords[k]);
            hi[k] = hi[k].max(p.coords[k]);
        }
    }
    let extent: Vec<f64> = (0..dims)
        .map(|k| {
            let e = hi[k] - lo[k];
            if e > 0.0 {
                e
            } else {
                // Flat axis: pad so every point lands in the first bin.
                lo[k].abs().max(1.0) * f64::EPSILON
            }
        })
        .collect();

    let total_bins: usize = bins.iter().product();
    let mut counts = vec![0usize; total_bins];
    for p in cloud.points() {
        let mut flat = 0;
        for k in 0..dims {
            let t = (p.coords[k] - lo[k]) / extent[k];
            let b = ((t * bins[k] as f64).floor() as usize).min(bins[k] - 1);
            flat = flat * bins[k] + b;
        }
        counts[flat] += 1;
    }
    let mean = cloud.len() as f64 / total_bins as f64;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / total_bins as f64;
    Ok(var.sqrt() / mean)
}

/// Points in id order with their cells, so pair sums do not depend on input order.
fn matched_cells<'a, 'b>(
    original: &'b PointCloud,
    placement: &'a Placement,
) -> Result<(Vec<&'b Point>, Vec<&'a [usize]>)> {
    if original.len() != placement.len() {
        return Err(MetricsError::IdMismatch(format!(
            "{} points vs {} cells",
            original.len(),
            placement.len()
        )));
    }
    let mut pts: Vec<&Point> = original.points().iter().collect();
    pts.sort_by(|a, b| a.id.cmp(&b.id));
    let cells = pts
        .iter()
        .map(|p| match placement.get(&p.id) {
            Some(c) if c.len() == original.dims() => Ok(c.as_slice()),
            Some(c) => Err(MetricsError::IdMismatch(format!(
                "{:?} has a {}D cell in a {}D cloud",
                p.id,
                c.len(),
                original.dims()
            ))),
            None => Err(MetricsError::IdMismatch(format!("{:?} has no cell", p.id))),
        })
        .collect::<Result<_>>()?;
    Ok((pts, cells))
}

/// Which unordered pairs `(i, j)`, `i < j`, a pair metric visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairSet {
    #[default]
    All,
    /// At most this many pairs, drawn uniformly with a fixed seed when the
    /// full set is larger.
    AtMost(usize),
}

impl PairSet {
    fn pairs(self, n: usize) -> Box<dyn Iterator<Item = (usize, usize)>> {
        let total = n * n.saturating_sub(1) / 2;
        match self {
            PairSet::AtMost(cap) if cap < total => {
                let mut rng = ChaCha8Rng::seed_from_u64(PAIR_SAMPLE_SEED);
                Box::new((0..cap).map(move |_| {
                    let i = rng.random_range(0..n);
                    let mut j = rng.random_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    (i.min(j), i.max(j))
                }))
            }
            _ => Box::new((0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))),
        }
    }
}

/// Fraction of strictly ordered (pair, axis) comparisons in the original
/// cloud whose order survives in the grid. Pairs tied on an axis in the
/// original are left out; a grid tie counts as disagreement.
pub fn topology_agreement(original: &PointCloud, assignment: &GridAssignment) -> Result<f64> {
    topology_agreement_with(original, assignment.cells(), PairSet::All)
}

/// [`topology_agreement`] over any id → cell map, e.g. a random baseline.
pub fn topology_agreement_with(original: &PointCloud, placement: &Placement, pairs: PairSet) -> Result<f64> {
    let (pts, cells) = matched_cells(original, placement)?;
    Ok(agreement_over(&pts, &cells, pairs))
}

fn agreement_over(pts: &[&Point], cells: &[&[usize]], pairs: PairSet) -> f64 {
    let (mut agree, mut total) = (0usize, 0usize);
    for (i, j) in pairs.pairs(pts.len()) {
        for a in 0..cells.first().map_or(0, |c| c.len()) {
            let before = pts[i].coords[a].partial_cmp(&pts[j].coords[a]);
            let Some(before) = before.filter(|o| o.is_ne()) else {
                continue;
            };
            total += 1;
            if cells[i][a].cmp(&cells[j][a]) == before {
                agree += 1;
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        agree as f64 / total as f64
    }
}

/// Pearson correlation between original and grid pairwise distances.
pub fn geometry_correlation(original: &PointCloud, assignment: &GridAssignment) -> Result<Option<f64>> {
    geometry_correlation_with(original, assignment.cells(), PairSet::All)
}

pub fn geometry_correlation_with(original: &PointCloud, placement: &Placement, pairs: PairSet) -> Result<Option<f64>> {
    if original.len() < 3 {
        return Err(MetricsError::TooFewPoints { needed: 3, got: original.len() });
    }
    let (pts, cells) = matched_cells(original, placement)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs
        .pairs(pts.len())
        .map(|(i, j)| {
            let grid = cells[i]
                .iter()
                .zip(cells[j])
                .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            (euclidean(&pts[i].coords, &pts[j].coords), grid)
        })
        .unzip();
    Ok(pearson(&xs, &ys))
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn score_cloud(cloud: &PointCloud, radius: f64, bins_per_axis: usize) -> Result<CloudScore> {
    Ok(CloudScore {
        overlap_pairs: overlap_count(cloud, radius)?,
        heterogeneity: density_heterogeneity(cloud, bins_per_axis)?,
    })
}

/// Scores a placement. The grid is binned one bin per lattice cell.
pub fn score_layout(
    original: &PointCloud,
    assignment: &GridAssignment,
    radius: f64,
    pairs: PairSet,
) -> Result<LayoutScore> {
    let grid = assignment.to_cloud();
    Ok(LayoutScore {
        overlap_pairs: overlap_count(&grid, radius)?,
        heterogeneity: density_heterogeneity_bins(&grid, assignment.shape().sides())?,
        topology_agreement: topology_agreement_with(original, assignment.cells(), pairs)?,
        geometry_correlation: geometry_correlation_with(original, assignment.cells(), pairs)?,
    })
}
