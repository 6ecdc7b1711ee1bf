//! Point clouds in the low-dimensional layout space and the lattice shapes
//! they are placed onto.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_DIMS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum CloudError {
    #[error("point cloud is empty")]
    Empty,
    #[error("dims must be 1, 2 or 3, got {0}")]
    UnsupportedDims(usize),
    #[error("point {id:?} has {got} coordinates, expected {expected}")]
    DimsMismatch { id: String, expected: usize, got: usize },
    #[error("duplicate point id {0:?}")]
    DuplicateId(String),
    #[error("point {id:?} has a non-finite coordinate on axis {axis}")]
    NonFinite { id: String, axis: usize },
    #[error("invalid grid shape {0:?}")]
    InvalidShape(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub id: String,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(id: impl Into<String>, coords: Vec<f64>) -> Self {
        Point { id: id.into(), coords }
    }
}

/// A validated set of labelled points sharing one dimensionality.
///
/// Serializes as `{"dims": 2, "points": [{"id": ..., "coords": [...]}]}`;
/// deserialization runs the same validation as [`PointCloud::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCloud")]
pub struct PointCloud {
    dims: usize,
    points: Vec<Point>,
}

#[derive(Deserialize)]
struct RawCloud {
    dims: usize,
    points: Vec<Point>,
}

impl TryFrom<RawCloud> for PointCloud {
    type Error = CloudError;

    fn try_from(raw: RawCloud) -> Result<Self, Self::Error> {
        PointCloud::new(raw.dims, raw.points)
    }
}

impl PointCloud {
    pub fn new(dims: usize, points: Vec<Point>) -> Result<Self, CloudError> {
        if !(1..=MAX_DIMS).contains(&dims) {
            return Err(CloudError::UnsupportedDims(dims));
        }
        if points.is_empty() {
            return Err(CloudError::Empty);
        }
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if p.coords.len() != dims {
                return Err(CloudError::DimsMismatch {
                    id: p.id.clone(),
                    expected: dims,
                    got: p.coords.len(),
                });
            }
            if let Some(axis) = p.coords.iter().position(|c| !c.is_finite()) {
                return Err(CloudError::NonFinite { id: p.id.clone(), axis });
            }
            if !seen.insert(p.id.as_str()) {
                return Err(CloudError::DuplicateId(p.id.clone()));
            }
        }
        Ok(PointCloud { dims, points })
    }

    /// Builds a cloud from `(id, coords)` pairs, inferring `dims` from the first point.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self, CloudError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let points: Vec<Point> = pairs.into_iter().map(|(id, c)| Point::new(id, c)).collect();
        let dims = points.first().map(|p| p.coords.len()).ok_or(CloudError::Empty)?;
        PointCloud::new(dims, points)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.points.iter().map(|p| p.id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&Point> {
        self.points.iter().find(|p| p.id == id)
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }
}

/// Per-axis side lengths of an integer lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct GridShape {
    sides: Vec<usize>,
}

impl GridShape {
    pub fn new(sides: Vec<usize>) -> Result<Self, CloudError> {
        if !(1..=MAX_DIMS).contains(&sides.len()) {
            return Err(CloudError::UnsupportedDims(sides.len()));
        }
        if sides.contains(&0) {
            return Err(CloudError::InvalidShape(format!("{sides:?}")));
        }
        Ok(GridShape { sides })
    }

    /// The `2^h × 2^h` square.
    pub fn square_pow2(h: u32) -> Self {
        let side = 1usize << h;
        GridShape { sides: vec![side, side] }
    }

    /// Factors `n` into `dims` sides that are as close to equal as possible,
    /// largest side first. Sides of 1 appear when `n` has too few factors.
    pub fn balanced(n: usize, dims: usize) -> Result<Self, CloudError> {
        if !(1..=MAX_DIMS).contains(&dims) {
            return Err(CloudError::UnsupportedDims(dims));
        }
        if n == 0 {
            return Err(CloudError::Empty);
        }
        let mut best: Option<Vec<usize>> = None;
        let mut consider = |mut sides: Vec<usize>| {
            sides.sort_unstable_by(|a, b| b.cmp(a));
            let spread = sides[0] - sides[sides.len() - 1];
            let better = match &best {
                None => true,
                Some(b) => spread < b[0] - b[b.len() - 1],
            };
            if better {
                best = Some(sides);
            }
        };
        match dims {
            1 => consider(vec![n]),
            2 => {
                for a in divisors(n) {
                    consider(vec![a, n / a]);
                }
            }
            _ => {
                for a in divisors(n) {
                    for b in divisors(n / a) {
                        consider(vec![a, b, n / a / b]);
                    }
                }
            }
        }
        Ok(GridShape { sides: best.expect("n >= 1 has a divisor") })
    }

    pub fn dims(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn volume(&self) -> usize {
        self.sides.iter().product()
    }

    /// Every lattice cell in row-major order (last axis fastest).
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(self.volume());
        let mut cur = vec![0usize; self.dims()];
        for _ in 0..self.volume() {
            out.push(cur.clone());
            for axis in (0..self.dims()).rev() {
                cur[axis] += 1;
                if cur[axis] < self.sides[axis] {
                    break;
                }
                cur[axis] = 0;
            }
        }
        out
    }

    /// `log2` of the side when the shape is a `2^h × 2^h` square.
    pub fn pow2_square_exponent(&self) -> Option<u32> {
        match self.sides.as_slice() {
            [a, b] if a == b && a.is_power_of_two() => Some(a.trailing_zeros()),
            _ => None,
        }
    }
}

fn divisors(n: usize) -> impl Iterator<Item = usize> {
    (1..=n).filter(move |d| n % d == 0)
}

impl TryFrom<Vec<usize>> for GridShape {
    type Error = CloudError;

    fn try_from(sides: Vec<usize>) -> Result<Self, Self::Error> {
        GridShape::new(sides)
    }
}

impl From<GridShape> for Vec<usize> {
    fn from(shape: GridShape) -> Self {
        shape.sides
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.sides.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

/// Parses `"8x8"`, `"4x4x4"` or `"64"`.
impl FromStr for GridShape {
    type Err = CloudError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let sides = s
            .split(['x', 'X'])
            .map(|part| part.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| CloudError::InvalidShape(s.to_string()))?;
        GridShape::new(sides)
    }
}
