//! Split-diffuse placement of a point cloud onto an integer lattice.
//!
//! Each recursion node owns an axis-aligned box of lattice cells and exactly
//! as many points as the box has cells. The node splits its box along one axis
//! (cycling with depth, skipping axes that are already one cell thick), hands
//! the lower `floor(span / 2)` slabs to the left child, and fills the left
//! child's capacity with the points that sort lowest along that axis. A point
//! records `L` or `R` at every level; at a single-cell box the point is placed.
//!
//! For a `2^h × 2^h` square and distinct coordinates this is exactly the
//! classic alternate-axis median split.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{CloudError, GridShape, Point, PointCloud, MAX_DIMS};

/// Nodes with at least this many points split their two children across threads.
const PARALLEL_THRESHOLD: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum SdError {
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error("size mismatch: {points} points cannot fill a lattice of {cells} cells")]
    SizeMismatch { points: usize, cells: usize },
    #[error("dims mismatch: cloud has {cloud} dims but shape has {shape}")]
    DimsMismatch { cloud: usize, shape: usize },
    #[error("non-finite value for id {0:?}")]
    NonFinite(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("invalid split path step {0:?}, expected 'L' or 'R'")]
    InvalidStep(char),
    #[error("split path {path:?} ends before reaching a single cell of {shape}")]
    PathTooShort { path: String, shape: String },
    #[error("split path {path:?} splits a single-cell box at depth {depth}")]
    DegenerateSplit { path: String, depth: usize },
    #[error("assignment is not a bijection onto {shape}: {reason}")]
    NotBijective { shape: String, reason: String },
    #[error("cell of {id:?} does not match its split path")]
    PathCellMismatch { id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    L,
    R,
}

/// Root-to-leaf route of one point, one `L`/`R` per level.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SplitPath(String);

impl SplitPath {
    pub fn new() -> Self {
        SplitPath(String::new())
    }

    pub fn push(&mut self, side: Side) {
        self.0.push(match side {
            Side::L => 'L',
            Side::R => 'R',
        });
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn sides(&self) -> impl Iterator<Item = Side> + '_ {
        self.0.bytes().map(|b| if b == b'L' { Side::L } else { Side::R })
    }
}

impl TryFrom<String> for SplitPath {
    type Error = SdError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if let Some(bad) = s.chars().find(|c| *c != 'L' && *c != 'R') {
            return Err(SdError::InvalidStep(bad));
        }
        Ok(SplitPath(s))
    }
}

impl std::str::FromStr for SplitPath {
    type Err = SdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SplitPath::try_from(s.to_string())
    }
}

impl From<SplitPath> for String {
    fn from(p: SplitPath) -> Self {
        p.0
    }
}

impl fmt::Display for SplitPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The lattice placement produced by [`split_diffuse`].
///
/// JSON form: `{"shape":[8,8], "cells":{"id":[x,y]}, "paths":{"id":"LRLR..."}}`.
/// Deserialized assignments are checked for bijectivity and path/cell consistency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAssignment")]
pub struct GridAssignment {
    shape: GridShape,
    cells: BTreeMap<String, Vec<usize>>,
    paths: BTreeMap<String, SplitPath>,
}

#[derive(Deserialize)]
struct RawAssignment {
    shape: GridShape,
    cells: BTreeMap<String, Vec<usize>>,
    paths: BTreeMap<String, SplitPath>,
}

impl TryFrom<RawAssignment> for GridAssignment {
    type Error = SdError;

    fn try_from(raw: RawAssignment) -> Result<Self, Self::Error> {
        let a = GridAssignment { shape: raw.shape, cells: raw.cells, paths: raw.paths };
        a.validate()?;
        Ok(a)
    }
}

impl GridAssignment {
    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn cells(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.cells
    }

    pub fn paths(&self) -> &BTreeMap<String, SplitPath> {
        &self.paths
    }

    pub fn cell(&self, id: &str) -> Option<&[usize]> {
        self.cells.get(id).map(Vec::as_slice)
    }

    pub fn path(&self, id: &str) -> Option<&SplitPath> {
        self.paths.get(id)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Inverse map: lattice cell → id.
    pub fn occupant_map(&self) -> BTreeMap<Vec<usize>, &str> {
        self.cells.iter().map(|(id, c)| (c.clone(), id.as_str())).collect()
    }

    /// The lattice coordinates as a point cloud (one point per id).
    pub fn to_cloud(&self) -> PointCloud {
        let points = self
            .cells
            .iter()
            .map(|(id, c)| Point::new(id.clone(), c.iter().map(|&v| v as f64).collect()))
            .collect();
        PointCloud::new(self.shape.dims(), points).expect("assignment ids are unique")
    }

    /// Checks the bijection onto the lattice and that every path resolves to its cell.
    pub fn validate(&self) -> Result<(), SdError> {
        let not_bijective = |reason: String| SdError::NotBijective {
            shape: self.shape.to_string(),
            reason,
        };
        if self.cells.len() != self.shape.volume() {
            return Err(not_bijective(format!(
                "{} cells assigned, lattice has {}",
                self.cells.len(),
                self.shape.volume()
            )));
        }
        let mut seen = HashSet::with_capacity(self.cells.len());
        for (id, cell) in &self.cells {
            let inside = cell.len() == self.shape.dims()
                && cell.iter().zip(self.shape.sides()).all(|(c, s)| c < s);
            if !inside {
                return Err(not_bijective(format!("{id:?} is outside the lattice: {cell:?}")));
            }
            if !seen.insert(cell.as_slice()) {
                return Err(not_bijective(format!("cell {cell:?} is assigned twice")));
            }
        }
        if self.paths.len() != self.cells.len() {
            return Err(not_bijective("paths and cells cover different ids".into()));
        }
        for (id, path) in &self.paths {
            let cell = self.cells.get(id).ok_or_else(|| {
                not_bijective(format!("{id:?} has a path but no cell"))
            })?;
            if resolve_cell(path, &self.shape)? != *cell {
                return Err(SdError::PathCellMismatch { id: id.clone() });
            }
        }
        Ok(())
    }

    /// Replays the recursion from the recorded paths and reports every node
    /// whose left child is not strictly below its right child along the split
    /// axis, or whose children hold the wrong number of points.
    pub fn sidedness_violations(&self) -> Vec<SidednessViolation> {
        let mut entries: Vec<(&str, &[usize])> = self
            .paths
            .iter()
            .filter_map(|(id, p)| self.cells.get(id).map(|c| (p.as_str(), c.as_slice())))
            .collect();
        entries.sort_unstable();
        let mut out = Vec::new();
        check_node(&entries, CellBox::whole(&self.shape), 0, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SidednessViolation {
    pub prefix: String,
    pub axis: usize,
    pub detail: String,
}

fn check_node(
    entries: &[(&str, &[usize])],
    bx: CellBox,
    depth: usize,
    out: &mut Vec<SidednessViolation>,
) {
    let Some(axis) = bx.split_axis(depth) else {
        return;
    };
    let prefix = entries.first().map(|(p, _)| &p[..depth.min(p.len())]).unwrap_or("");
    // Entries are sorted by path, so the 'L' children precede the 'R' children.
    let cut = entries.partition_point(|(p, _)| p.as_bytes().get(depth) == Some(&b'L'));
    let (left, right) = entries.split_at(cut);
    let (lbox, rbox) = bx.split(axis);
    if left.len() != lbox.volume() || right.len() != rbox.volume() {
        out.push(SidednessViolation {
            prefix: prefix.to_string(),
            axis,
            detail: format!(
                "children hold {}/{} points for boxes of {}/{} cells",
                left.len(),
                right.len(),
                lbox.volume(),
                rbox.volume()
            ),
        });
    }
    let left_max = left.iter().map(|(_, c)| c[axis]).max();
    let right_min = right.iter().map(|(_, c)| c[axis]).min();
    if let (Some(lmax), Some(rmin)) = (left_max, right_min) {
        if lmax >= rmin {
            out.push(SidednessViolation {
                prefix: prefix.to_string(),
                axis,
                detail: format!("left max {lmax} >= right min {rmin}"),
            });
        }
    }
    check_node(left, lbox, depth + 1, out);
    check_node(right, rbox, depth + 1, out);
}

/// An axis-aligned box of lattice cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CellBox {
    dims: usize,
    lo: [usize; MAX_DIMS],
    span: [usize; MAX_DIMS],
}

impl CellBox {
    fn whole(shape: &GridShape) -> Self {
        let mut span = [1; MAX_DIMS];
        span[..shape.dims()].copy_from_slice(shape.sides());
        CellBox { dims: shape.dims(), lo: [0; MAX_DIMS], span }
    }

    fn volume(&self) -> usize {
        self.span[..self.dims].iter().product()
    }

    /// The depth-cycled axis, skipping forward past axes one cell thick.
    /// `None` once the box is a single cell.
    fn split_axis(&self, depth: usize) -> Option<usize> {
        (0..self.dims)
            .map(|k| (depth + k) % self.dims)
            .find(|&axis| self.span[axis] > 1)
    }

    fn split(&self, axis: usize) -> (CellBox, CellBox) {
        let left_span = self.span[axis] / 2;
        let mut left = *self;
        let mut right = *self;
        left.span[axis] = left_span;
        right.lo[axis] += left_span;
        right.span[axis] -= left_span;
        (left, right)
    }
}

/// Orders two points for a split along `axis`: the split coordinate, then the
/// remaining coordinates in ascending axis order, then the id.
pub fn split_order(a: &Point, b: &Point, axis: usize) -> Ordering {
    let by = |k: usize| a.coords[k].partial_cmp(&b.coords[k]).unwrap_or(Ordering::Equal);
    by(axis)
        .then_with(|| {
            (0..a.coords.len())
                .filter(|&k| k != axis)
                .map(by)
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| a.id.cmp(&b.id))
}

struct Slot<'a> {
    point: &'a Point,
    path: SplitPath,
    cell: [usize; MAX_DIMS],
}

/// Places every point of `cloud` on its own cell of `shape`.
pub fn split_diffuse(cloud: &PointCloud, shape: &GridShape) -> Result<GridAssignment, SdError> {
    if cloud.dims() != shape.dims() {
        return Err(SdError::DimsMismatch { cloud: cloud.dims(), shape: shape.dims() });
    }
    if cloud.len() != shape.volume() {
        return Err(SdError::SizeMismatch { points: cloud.len(), cells: shape.volume() });
    }
    let mut slots: Vec<Slot<'_>> = cloud
        .points()
        .iter()
        .map(|point| Slot { point, path: SplitPath::new(), cell: [0; MAX_DIMS] })
        .collect();
    place(&mut slots, CellBox::whole(shape), 0);

    let dims = shape.dims();
    let mut cells = BTreeMap::new();
    let mut paths = BTreeMap::new();
    for slot in slots {
        cells.insert(slot.point.id.clone(), slot.cell[..dims].to_vec());
        paths.insert(slot.point.id.clone(), slot.path);
    }
    Ok(GridAssignment { shape: shape.clone(), cells, paths })
}

fn place(slots: &mut [Slot<'_>], bx: CellBox, depth: usize) {
    debug_assert_eq!(slots.len(), bx.volume());
    let Some(axis) = bx.split_axis(depth) else {
        slots[0].cell = bx.lo;
        return;
    };
    let (lbox, rbox) = bx.split(axis);
    let capacity = lbox.volume();
    // Total order (ids are unique), so the selected left set is deterministic.
    slots.select_nth_unstable_by(capacity, |a, b| split_order(a.point, b.point, axis));
    let (left, right) = slots.split_at_mut(capacity);
    left.iter_mut().for_each(|s| s.path.push(Side::L));
    right.iter_mut().for_each(|s| s.path.push(Side::R));
    if left.len() + right.len() >= PARALLEL_THRESHOLD {
        rayon::join(|| place(left, lbox, depth + 1), || place(right, rbox, depth + 1));
    } else {
        place(left, lbox, depth + 1);
        place(right, rbox, depth + 1);
    }
}

/// Replays the box recursion along `path` and returns the cell it reaches.
///
/// For a `2^h × 2^h` square this is bit de-interleaving: the characters at even
/// depths spell the x index and those at odd depths the y index, most
/// significant first, with `L = 0` and `R = 1`.
pub fn resolve_cell(path: &SplitPath, shape: &GridShape) -> Result<Vec<usize>, SdError> {
    let mut bx = CellBox::whole(shape);
    for (depth, side) in path.sides().enumerate() {
        let axis = bx.split_axis(depth).ok_or_else(|| SdError::DegenerateSplit {
            path: path.to_string(),
            depth,
        })?;
        let (l, r) = bx.split(axis);
        bx = match side {
            Side::L => l,
            Side::R => r,
        };
    }
    if bx.volume() != 1 {
        return Err(SdError::PathTooShort { path: path.to_string(), shape: shape.to_string() });
    }
    Ok(bx.lo[..shape.dims()].to_vec())
}

/// One-dimensional split-diffuse: the rank of each value under
/// (value, id) ordering.
pub fn sd_1d<S: AsRef<str>>(values: &[(S, f64)]) -> Result<BTreeMap<String, usize>, SdError> {
    let mut seen = HashSet::with_capacity(values.len());
    for (id, v) in values {
        if !v.is_finite() {
            return Err(SdError::NonFinite(id.as_ref().to_string()));
        }
        if !seen.insert(id.as_ref()) {
            return Err(SdError::DuplicateId(id.as_ref().to_string()));
        }
    }
    if values.is_empty() {
        return Err(SdError::Cloud(CloudError::Empty));
    }
    let mut order: Vec<&(S, f64)> = values.iter().collect();
    order.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.as_ref().cmp(b.0.as_ref()))
    });
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(rank, (id, _))| (id.as_ref().to_string(), rank))
        .collect())
}
