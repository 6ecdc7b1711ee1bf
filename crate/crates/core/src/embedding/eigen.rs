//! Leading eigenpairs of a dense symmetric matrix.
//!
//! Shifted block power iteration with Rayleigh-Ritz extraction: the matrix is
//! shifted by a Gershgorin bound so the algebraically largest eigenvalues are
//! also the dominant ones, a block of orthonormal vectors is repeatedly
//! multiplied and re-orthonormalized, and the small projected problem is solved
//! with cyclic Jacobi. The start block comes from a fixed seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const START_SEED: u64 = 0x5d_1f_f05e;
pub const MAX_ITERATIONS: usize = 10_000;
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Extra block vectors beyond the requested count; speeds up convergence when
/// the wanted eigenvalues are close to the next ones.
const OVERSAMPLE: usize = 4;

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Descending.
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector for `values[i]`.
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest residual `‖A v − λ v‖` over the returned pairs, relative to `‖A‖∞`.
    pub max_relative_residual: f64,
}

/// Row-major dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SymMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        SymMatrix { n, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Max absolute row sum; bounds the spectral radius.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn gershgorin_lower(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let off: f64 = self
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, v)| v.abs())
                    .sum();
                self.at(i, i) - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn mul_shifted(&self, shift: f64, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x) + shift * x[i];
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Modified Gram-Schmidt, two passes. Columns that collapse are replaced by
/// fresh random directions.
fn orthonormalize(block: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    let n = block.first().map_or(0, Vec::len);
    for i in 0..block.len() {
        let mut attempts = 0;
        loop {
            let original = norm(&block[i]);
            for _ in 0..2 {
                for j in 0..i {
                    let (done, rest) = block.split_at_mut(i);
                    let proj = dot(&done[j], &rest[0]);
                    rest[0].iter_mut().zip(&done[j]).for_each(|(v, q)| *v -= proj * q);
                }
            }
            let len = norm(&block[i]);
            if len > 1e-10 * original.max(f64::MIN_POSITIVE) && len > 0.0 {
                block[i].iter_mut().for_each(|v| *v /= len);
                break;
            }
            attempts += 1;
            assert!(attempts < 100, "cannot extend orthonormal block in dimension {n}");
            block[i] = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        }
    }
}

/// Cyclic Jacobi on a small dense symmetric matrix. Returns eigenvalues
/// (descending) and the matching eigenvectors as columns of `vecs[row][col]`.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off.sqrt() <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for r in 0..p {
            for s in r + 1..p {
                if a[r][s] == 0.0 {
                    continue;
                }
                let tau = (a[s][s] - a[r][r]) / (2.0 * a[r][s]);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                for k in 0..p {
                    let akr = a[k][r];
                    let aks = a[k][s];
                    a[k][r] = c * akr - sn * aks;
                    a[k][s] = sn * akr + c * aks;
                }
                for k in 0..p {
                    let ark = a[r][k];
                    let ask = a[s][k];
                    a[r][k] = c * ark - sn * ask;
                    a[s][k] = sn * ark + c * ask;
                }
                for row in v.iter_mut() {
                    let vr = row[r];
                    let vs = row[s];
                    row[r] = c * vr - sn * vs;
                    row[s] = sn * vr + c * vs;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]).then(x.cmp(&y)));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..p).map(|row| order.iter().map(|&i| v[row][i]).collect()).collect();
    (values, vecs)
}

/// The `k` algebraically largest eigenpairs of `m`.
pub fn top_eigenpairs(m: &SymMatrix, k: usize) -> EigenPairs {
    let n = m.n;
    assert!(k >= 1 && k <= n, "requested {k} eigenpairs of a {n}x{n} matrix");
    let p = (k + OVERSAMPLE).min(n);
    let norm_inf = m.inf_norm();
    if norm_inf == 0.0 {
        let vectors = (0..k)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        return EigenPairs {
            values: vec![0.0; k],
            vectors,
            iterations: 0,
            converged: true,
            max_relative_residual: 0.0,
        };
    }
    let shift = (-m.gershgorin_lower()).max(0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut block: Vec<Vec<f64>> =
        (0..p).map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
    orthonormalize(&mut block, &mut rng);
    let mut product = vec![vec![0.0; n]; p];

    let mut values = vec![0.0; p];
    let mut worst = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for (q, z) in block.iter().zip(product.iter_mut()) {
            m.mul_shifted(shift, q, z);
        }
        std::mem::swap(&mut block, &mut product);
        orthonormalize(&mut block, &mut rng);

        // Rayleigh-Ritz on span(block).
        for (q, z) in block.iter().zip(product.iter_mut()) {
            m.mul_shifted(shift, q, z);
        }
        let projected: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| 0.5 * (dot(&block[i], &product[j]) + dot(&block[j], &product[i]))).collect())
            .collect();
        let (theta, w) = jacobi_eigen(&projected);
        let rotate = |src: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..p)
                .map(|c| {
                    let mut out = vec![0.0; n];
                    for (r, s) in src.iter().enumerate() {
                        let coef = w[r][c];
                        out.iter_mut().zip(s).for_each(|(o, x)| *o += coef * x);
                    }
                    out
                })
                .collect()
        };
        block = rotate(&block);
        product = rotate(&product);
        values = theta;

        worst = (0..k)
            .map(|i| {
                let r: f64 = product[i]
                    .iter()
                    .zip(&block[i])
                    .map(|(az, q)| (az - values[i] * q).powi(2))
                    .sum::<f64>()
                    .sqrt();
                r / norm_inf
            })
            .fold(0.0, f64::max);
        if worst <= RESIDUAL_TOLERANCE {
            break;
        }
    }

    EigenPairs {
        values: values[..k].iter().map(|v| v - shift).collect(),
        vectors: block.into_iter().take(k).collect(),
        iterations,
        converged: worst <= RESIDUAL_TOLERANCE,
        max_relative_residual: worst,
    }
}
