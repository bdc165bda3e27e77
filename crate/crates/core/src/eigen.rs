//! Real symmetric tridiagonal eigensolver.
//!
//! Implicit QL with Wilkinson shifts. The eigenvalue-only variant is O(d^2);
//! accumulating the rotations into the eigenvector matrix makes the full
//! decomposition O(d^3).

use crate::error::{Error, Result};

const MAX_QL_ITERATIONS: usize = 60;

/// Eigen-decomposition `T = V diag(values) V^T` of a symmetric tridiagonal matrix.
#[derive(Clone, Debug)]
pub struct TridiagonalEigen {
    dim: usize,
    /// Ascending.
    pub values: Vec<f64>,
    /// Eigenvector `k` occupies `vectors[k * dim..(k + 1) * dim]`.
    vectors: Vec<f64>,
}

impl TridiagonalEigen {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.dim.max(1))
    }
}

/// Infinity-style norm bound `max_i (|d_i| + |e_{i-1}| + |e_i|)`.
pub fn tridiagonal_norm(diag: &[f64], off: &[f64]) -> f64 {
    (0..diag.len())
        .map(|i| {
            let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
            let right = if i < off.len() { off[i].abs() } else { 0.0 };
            diag[i].abs() + left + right
        })
        .fold(0.0, f64::max)
}

fn check_shape(diag: &[f64], off: &[f64]) -> Result<()> {
    let expected = diag.len().saturating_sub(1);
    if off.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: off.len(),
        });
    }
    Ok(())
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    check_shape(diag, off)?;
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    implicit_ql(&mut d, &mut e)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Full eigen-decomposition by implicit QL with accumulated rotations.
///
/// O(d^3) with a small constant; vectors are orthonormal to rounding.
pub fn decompose(diag: &[f64], off: &[f64]) -> Result<TridiagonalEigen> {
    check_shape(diag, off)?;
    let dim = diag.len();
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = vec![0.0; dim * dim];
    for k in 0..dim {
        z[k * dim + k] = 1.0;
    }
    implicit_ql_with_vectors(&mut d, &mut e, &mut z, dim)?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Vec::with_capacity(dim * dim);
    for &k in &order {
        let v = &z[k * dim..(k + 1) * dim];
        // Sign convention: largest component positive.
        let lead = v
            .iter()
            .fold(0.0f64, |acc, &x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        vectors.extend(v.iter().map(|x| sign * x));
    }
    Ok(TridiagonalEigen { dim, values, vectors })
}

/// Implicit QL on `(d, e)` where `e[i]` couples `i` and `i + 1` and
/// `e[n - 1] = 0`. On return `d` holds the (unsorted) eigenvalues.
fn implicit_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > MAX_QL_ITERATIONS {
                return Err(Error::EigenConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// [`implicit_ql`] that also applies every rotation to `z`, where row `k`
/// of `z` (contiguous) is the running estimate of eigenvector `k`.
fn implicit_ql_with_vectors(d: &mut [f64], e: &mut [f64], z: &mut [f64], dim: usize) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > MAX_QL_ITERATIONS {
                return Err(Error::EigenConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let (head, tail) = z.split_at_mut((i + 1) * dim);
                let zi = &mut head[i * dim..];
                let zi1 = &mut tail[..dim];
                for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                    let f = *b;
                    *b = s * *a + c * f;
                    *a = c * *a - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;

    fn dense(diag: &[f64], off: &[f64]) -> DMatrix<f64> {
        let n = diag.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i + 1 == j {
                off[i]
            } else if j + 1 == i {
                off[j]
            } else {
                0.0
            }
        })
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn residual(diag: &[f64], off: &[f64], value: f64, v: &[f64]) -> f64 {
        let m = diag.len();
        (0..m)
            .map(|i| {
                let mut r = (diag[i] - value) * v[i];
                if i > 0 {
                    r += off[i - 1] * v[i - 1];
                }
                if i + 1 < m {
                    r += off[i] * v[i + 1];
                }
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }

    fn check_decomposition(diag: &[f64], off: &[f64]) {
        let eig = decompose(diag, off).unwrap();
        let n = diag.len();
        let tnorm = tridiagonal_norm(diag, off).max(1.0);
        let reference = {
            let mut v: Vec<f64> = SymmetricEigen::new(dense(diag, off))
                .eigenvalues
                .iter()
                .copied()
                .collect();
            v.sort_by(f64::total_cmp);
            v
        };
        for (a, b) in eig.values.iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-12 * tnorm, "{a} vs {b}");
        }
        for k in 0..n {
            let v = eig.vector(k);
            assert!(residual(diag, off, eig.values[k], v) <= 1e-12 * tnorm);
            for j in 0..n {
                let overlap = dot(v, eig.vector(j));
                let expected = if j == k { 1.0 } else { 0.0 };
                assert!(
                    (overlap - expected).abs() < 1e-13 * (n as f64).max(10.0),
                    "overlap {k},{j} = {overlap}"
                );
            }
        }
    }

    #[test]
    fn two_by_two() {
        let values = eigenvalues(&[0.0, -2.0], &[2.0 * 2f64.sqrt()]).unwrap();
        assert!((values[0] + 4.0).abs() < 1e-12);
        assert!((values[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional() {
        let eig = decompose(&[3.5], &[]).unwrap();
        assert_eq!(eig.values, vec![3.5]);
        assert_eq!(eig.vector(0), &[1.0]);
    }

    #[test]
    fn zero_matrix_splits_into_unit_vectors() {
        check_decomposition(&[0.0; 5], &[0.0; 4]);
    }

    #[test]
    fn split_blocks_with_degenerate_values() {
        check_decomposition(&[1.0, 1.0, 2.0, 1.0, 1.0], &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn wilkinson_matrix_close_pairs() {
        // W21+ has pairs of eigenvalues agreeing to ~1e-14 relative.
        let diag: Vec<f64> = (0..21).map(|i| (10i32 - i).abs() as f64).collect();
        check_decomposition(&diag, &[1.0; 20]);
    }

    #[test]
    fn mismatched_bands_rejected() {
        assert!(matches!(
            decompose(&[1.0, 2.0], &[]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn random_matrices_match_dense_solver(
            entries in proptest::collection::vec((-10.0f64..10.0, -5.0f64..5.0), 1..40)
        ) {
            let diag: Vec<f64> = entries.iter().map(|e| e.0).collect();
            let off: Vec<f64> = entries[1..].iter().map(|e| e.1).collect();
            check_decomposition(&diag, &off);
        }
    }
}
