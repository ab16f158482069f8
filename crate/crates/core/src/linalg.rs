//! Dense symmetric eigendecomposition by cyclic Jacobi rotations.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("matrix is not square: {rows} rows, row {row} has {len} entries")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("Jacobi iteration did not converge in {sweeps} sweeps (off-diagonal {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },
}

/// Relative convergence threshold on every off-diagonal magnitude.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenpairs sorted by descending eigenvalue.
///
/// `vectors[j]` is the unit eigenvector belonging to `values[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

pub fn frobenius_norm(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// Diagonalizes a real symmetric matrix.
///
/// Sweeps visit the strict upper triangle in row-major order and rotate away
/// each entry. Iteration stops once every off-diagonal magnitude falls below
/// `JACOBI_TOLERANCE * ‖A‖_F`.
pub fn symmetric_eigen(matrix: &[Vec<f64>]) -> Result<SymmetricEigen, EigenError> {
    let n = matrix.len();
    for (row, r) in matrix.iter().enumerate() {
        if r.len() != n {
            return Err(EigenError::NotSquare { rows: n, row, len: r.len() });
        }
    }
    if matrix.iter().flatten().any(|x| !x.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (matrix[i][j], matrix[j][i]);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(EigenError::NotSymmetric { i, j });
            }
        }
    }

    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    // symmetrize exactly so rotations see a single value per pair
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = m;
            a[j][i] = m;
        }
    }
    let mut v = identity(n);
    let threshold = JACOBI_TOLERANCE * frobenius_norm(&a);

    let mut sweeps = 0;
    loop {
        let off = max_off_diagonal(&a);
        if off <= threshold || off == 0.0 {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(EigenError::NoConvergence { sweeps, off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() > 0.0 {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&j| (0..n).map(|i| v[i][j]).collect()).collect();
    Ok(SymmetricEigen { values, vectors, sweeps })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn max_off_diagonal(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            m = m.max(a[i][j].abs());
        }
    }
    m
}

// One Jacobi rotation zeroing a[p][q]; accumulates the rotation into v's columns.
fn rotate(a: &mut [Vec<f64>], v: &mut [Vec<f64>], p: usize, q: usize) {
    let n = a.len();
    let apq = a[p][q];
    let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let app = a[p][p];
    let aqq = a[q][q];
    a[p][p] = app - t * apq;
    a[q][q] = aqq + t * apq;
    a[p][q] = 0.0;
    a[q][p] = 0.0;
    for r in 0..n {
        if r != p && r != q {
            let arp = a[r][p];
            let arq = a[r][q];
            let new_rp = c * arp - s * arq;
            let new_rq = s * arp + c * arq;
            a[r][p] = new_rp;
            a[p][r] = new_rp;
            a[r][q] = new_rq;
            a[q][r] = new_rq;
        }
    }
    for row in v.iter_mut() {
        let vp = row[p];
        let vq = row[q];
        row[p] = c * vp - s * vq;
        row[q] = s * vp + c * vq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(e: &SymmetricEigen) -> Vec<Vec<f64>> {
        let n = e.values.len();
        let mut out = vec![vec![0.0; n]; n];
        for (k, &lam) in e.values.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    out[i][j] += lam * e.vectors[k][i] * e.vectors[k][j];
                }
            }
        }
        out
    }

    #[test]
    fn two_by_two_closed_form() {
        let e = symmetric_eigen(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.vectors[0][0].abs() - s).abs() < 1e-14);
        assert!((e.vectors[0][1].abs() - s).abs() < 1e-14);
    }

    #[test]
    fn diagonal_needs_no_sweeps() {
        let e = symmetric_eigen(&[vec![1.0, 0.0], vec![0.0, 5.0]]).unwrap();
        assert_eq!(e.sweeps, 0);
        assert_eq!(e.values, vec![5.0, 1.0]);
    }

    #[test]
    fn reconstructs_and_is_orthonormal() {
        let a = vec![
            vec![4.0, 1.0, -2.0, 2.0],
            vec![1.0, 2.0, 0.0, 1.0],
            vec![-2.0, 0.0, 3.0, -2.0],
            vec![2.0, 1.0, -2.0, -1.0],
        ];
        let e = symmetric_eigen(&a).unwrap();
        let back = reconstruct(&e);
        for i in 0..4 {
            for j in 0..4 {
                assert!((back[i][j] - a[i][j]).abs() < 1e-12);
                let dot: f64 = (0..4).map(|r| e.vectors[i][r] * e.vectors[j][r]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(symmetric_eigen(&[vec![1.0, 2.0], vec![0.0, 1.0]]), Err(EigenError::NotSymmetric { .. })));
        assert!(matches!(symmetric_eigen(&[vec![1.0, 2.0]]), Err(EigenError::NotSquare { .. })));
        assert_eq!(symmetric_eigen(&[vec![f64::NAN]]), Err(EigenError::NonFinite));
    }

    #[test]
    fn empty_and_zero_matrices() {
        assert!(symmetric_eigen(&[]).unwrap().values.is_empty());
        let e = symmetric_eigen(&[vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]]).unwrap();
        assert_eq!(e.values, vec![0.0; 3]);
    }
}
