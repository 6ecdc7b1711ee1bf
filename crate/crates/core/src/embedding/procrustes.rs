use nalgebra::DMatrix;

use super::{EmbeddingError, Result};
use crate::cloud::{Point, PointCloud};

/// Rotates/reflects and translates `b` onto `a` (orthogonal Procrustes, no
/// scaling). Returns the moved copy of `b`, in `a`'s point order, and the
/// root-mean-square residual per point.
pub fn procrustes_align(a: &PointCloud, b: &PointCloud) -> Result<(PointCloud, f64)> {
    if a.dims() != b.dims() {
        return Err(EmbeddingError::IdMismatch(format!(
            "dims differ: {} vs {}",
            a.dims(),
            b.dims()
        )));
    }
    if a.len() != b.len() {
        return Err(EmbeddingError::IdMismatch(format!("{} vs {} points", a.len(), b.len())));
    }
    let dims = a.dims();
    let n = a.len();
    let mut target = DMatrix::zeros(n, dims);
    let mut source = DMatrix::zeros(n, dims);
    for (row, p) in a.points().iter().enumerate() {
        let q = b
            .get(&p.id)
            .ok_or_else(|| EmbeddingError::IdMismatch(format!("{:?} missing from second cloud", p.id)))?;
        for k in 0..dims {
            target[(row, k)] = p.coords[k];
            source[(row, k)] = q.coords[k];
        }
    }
    let target_mean = target.row_mean();
    let source_mean = source.row_mean();
    for mut row in target.row_iter_mut() {
        row -= &target_mean;
    }
    for mut row in source.row_iter_mut() {
        row -= &source_mean;
    }

    let m = source.transpose() * &target;
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let rotation = u * v_t;
    let mut aligned = source * rotation;
    for mut row in aligned.row_iter_mut() {
        row += &target_mean;
    }

    let mut sq = 0.0;
    let points = a
        .points()
        .iter()
        .enumerate()
        .map(|(row, p)| {
            let coords: Vec<f64> = (0..dims).map(|k| aligned[(row, k)]).collect();
            sq += coords.iter().zip(&p.coords).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
            Point::new(p.id.clone(), coords)
        })
        .collect();
    let rmse = (sq / n as f64).sqrt();
    Ok((PointCloud::new(dims, points)?, rmse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square() -> PointCloud {
        PointCloud::from_pairs([
            ("a", vec![0.0, 0.0]),
            ("b", vec![1.0, 0.0]),
            ("c", vec![1.0, 1.0]),
            ("d", vec![0.0, 1.0]),
        ])
        .unwrap()
    }

    #[test]
    fn identical_clouds() {
        let (_, rmse) = procrustes_align(&square(), &square()).unwrap();
        assert_abs_diff_eq!(rmse, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn quarter_turn_is_undone() {
        let rotated = PointCloud::from_pairs(
            square().points().iter().map(|p| (p.id.clone(), vec![-p.coords[1] + 5.0, p.coords[0] - 2.0])),
        )
        .unwrap();
        let (aligned, rmse) = procrustes_align(&square(), &rotated).unwrap();
        assert!(rmse <= 1e-9, "rmse {rmse}");
        assert_abs_diff_eq!(aligned.get("c").unwrap().coords[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn id_mismatch() {
        let other = PointCloud::from_pairs([
            ("a", vec![0.0, 0.0]),
            ("b", vec![1.0, 0.0]),
            ("c", vec![1.0, 1.0]),
            ("z", vec![0.0, 1.0]),
        ])
        .unwrap();
        assert!(matches!(procrustes_align(&square(), &other), Err(EmbeddingError::IdMismatch(_))));
    }
}
