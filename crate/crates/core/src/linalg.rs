//! Small dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold for rank decisions.
pub const RANK_RTOL: f64 = 1e-8;

/// Singular values in descending order (empty matrix gives an empty list).
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Absolute threshold below which a singular value counts as zero.
///
/// Relative to the largest singular value, with a floor of one so that a
/// vanishing differential is recognised as rank zero.
pub fn rank_threshold(sigma_max: f64) -> f64 {
    RANK_RTOL * sigma_max.max(1.0)
}

/// Numerical rank and the ratio `sigma / threshold` of the singular value
/// closest to the threshold (the decision margin; large is confident).
pub fn rank_with_margin(m: &DMatrix<f64>) -> (usize, f64, f64) {
    let s = singular_values(m);
    let thr = rank_threshold(s.first().copied().unwrap_or(0.0));
    let rank = s.iter().filter(|&&v| v > thr).count();
    let margin = s
        .iter()
        .map(|&v| {
            let r = v / thr;
            if r >= 1.0 {
                r
            } else if v == 0.0 {
                f64::INFINITY
            } else {
                1.0 / r
            }
        })
        .fold(f64::INFINITY, f64::min);
    (rank, margin, thr)
}

/// Orthonormal basis (as columns) of the right null space, using the
/// `dim` smallest right singular vectors.
pub fn null_space(m: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let n = m.ncols();
    if dim == 0 {
        return DMatrix::zeros(n, 0);
    }
    // pad to a square matrix so the SVD returns a full set of right vectors
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let mut basis = DMatrix::zeros(n, dim);
    for (c, &k) in order.iter().take(dim).enumerate() {
        for r in 0..n {
            basis[(r, c)] = v_t[(k, r)];
        }
    }
    basis
}

/// Orthonormal basis of the left null space (cokernel representatives).
pub fn left_null_space(m: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    null_space(&m.transpose(), dim)
}

/// Determinant after scaling each row to unit max-norm. `None` for a zero row.
pub fn equilibrated_det(m: &DMatrix<f64>) -> Option<f64> {
    let mut scaled = m.clone();
    for mut row in scaled.row_iter_mut() {
        let s = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if s == 0.0 {
            return None;
        }
        row /= s;
    }
    Some(scaled.determinant())
}

/// Solves `a x = b` with LU and partial pivoting.
pub fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let s = singular_values(a);
    let eps = 1e-14 * s.first().copied().unwrap_or(0.0);
    a.clone().svd(true, true).solve(b, eps).ok()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_simple_matrices() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(rank_with_margin(&m).0, 1);
        assert_eq!(rank_with_margin(&DMatrix::zeros(2, 3)).0, 0);
        assert_eq!(rank_with_margin(&DMatrix::identity(3, 3)).0, 3);
    }

    #[test]
    fn null_spaces() {
        let m = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let k = null_space(&m, 1);
        assert!((k[(0, 0)].abs() - 1.0).abs() < 1e-12);
        let c = left_null_space(&m, 2);
        assert_eq!(c.ncols(), 2);
        assert!((&m.transpose() * &c).norm() < 1e-12);
    }

    #[test]
    fn equilibration_ignores_row_scale() {
        let m = DMatrix::from_row_slice(2, 2, &[1e-20, 0.0, 0.0, 1.0]);
        assert!((equilibrated_det(&m).unwrap() - 1.0).abs() < 1e-15);
        assert!(equilibrated_det(&DMatrix::zeros(2, 2)).is_none());
    }
}
