#![allow(dead_code)]

use std::collections::BTreeMap;

use gridscope_core::{GridShape, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Computes every point's cell by sorting and cutting index ranges directly.
/// Shares nothing with the library beyond the input types.
pub fn nested_rank_cells(cloud: &PointCloud, sides: &[usize]) -> BTreeMap<String, Vec<usize>> {
    let pts = cloud.points();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    let mut out = BTreeMap::new();
    descend(cloud, &mut order, vec![0; sides.len()], sides.to_vec(), 0, &mut out);
    out
}

fn descend(
    cloud: &PointCloud,
    order: &mut [usize],
    origin: Vec<usize>,
    extent: Vec<usize>,
    level: usize,
    out: &mut BTreeMap<String, Vec<usize>>,
) {
    let d = extent.len();
    if order.len() == 1 {
        out.insert(cloud.points()[order[0]].id.clone(), origin);
        return;
    }
    let mut axis = level % d;
    while extent[axis] == 1 {
        axis = (axis + 1) % d;
    }
    let key = |i: usize| {
        let c = &cloud.points()[i].coords;
        let mut k = vec![c[axis]];
        for (a, v) in c.iter().enumerate() {
            if a != axis {
                k.push(*v);
            }
        }
        k
    };
    order.sort_by(|&i, &j| {
        let (ki, kj) = (key(i), key(j));
        for (a, b) in ki.iter().zip(&kj) {
            match a.partial_cmp(b).unwrap() {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        cloud.points()[i].id.cmp(&cloud.points()[j].id)
    });
    let low_width = extent[axis] / 2;
    let mut low_extent = extent.clone();
    low_extent[axis] = low_width;
    let mut high_extent = extent.clone();
    high_extent[axis] = extent[axis] - low_width;
    let mut high_origin = origin.clone();
    high_origin[axis] += low_width;
    let cut: usize = low_extent.iter().product();
    let (low, high) = order.split_at_mut(cut);
    descend(cloud, low, origin, low_extent, level + 1, out);
    descend(cloud, high, high_origin, high_extent, level + 1, out);
}

/// `n` points uniform in the unit cube of `dims` dimensions, ids `p0000..`.
pub fn random_cloud(n: usize, dims: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::from_pairs(
        (0..n).map(|i| (format!("p{i:05}"), (0..dims).map(|_| rng.random::<f64>()).collect::<Vec<_>>())),
    )
    .unwrap()
}

/// Like [`random_cloud`] but coordinates are drawn from a handful of values,
/// so ties are common.
pub fn tied_cloud(n: usize, dims: usize, levels: u32, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::from_pairs((0..n).map(|i| {
        (
            format!("p{i:05}"),
            (0..dims).map(|_| rng.random_range(0..levels) as f64).collect::<Vec<_>>(),
        )
    }))
    .unwrap()
}

pub fn shape_for(n: usize, dims: usize) -> GridShape {
    GridShape::balanced(n, dims).unwrap()
}

/// A uniformly random placement of the cloud's ids onto the cells of `shape`.
pub fn random_bijection(cloud: &PointCloud, shape: &GridShape, seed: u64) -> BTreeMap<String, Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut cells = shape.cells();
    cells.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    cloud.ids().map(String::from).zip(cells).collect()
}
