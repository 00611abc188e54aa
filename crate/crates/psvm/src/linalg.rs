//! Small dense linear algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric eigendecomposition with eigenvalues sorted in nonincreasing
/// order. The input is symmetrized as (m + m')/2 before factoring so callers
/// can pass matrices assembled from sums of outer products without worrying
/// about last-bit asymmetry.
pub fn sym_eig_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues are finite")
    });
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Flips each column so its entry of largest magnitude is positive. Ties go
/// to the earliest such entry. Keeps eigenvector output deterministic.
pub fn fix_column_signs(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        let col = m.column(j);
        let mut best = 0;
        let mut best_abs = f64::NEG_INFINITY;
        for i in 0..col.len() {
            let a = col[i].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if col[best] < 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

/// Orthonormal basis for the column space of `m` via QR with column pivoting.
/// Errors if the numerical rank falls short of the column count; the rank
/// test compares pivoted diagonal entries of R against `tol` times the
/// largest one.
pub fn orthonormal_columns(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let cols = m.ncols();
    if cols == 0 || m.nrows() < cols {
        return Err(Error::DimensionMismatch(format!(
            "cannot orthonormalize a {}x{} matrix",
            m.nrows(),
            cols
        )));
    }
    let qr = m.clone().col_piv_qr();
    let q = qr.q();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    let mut rank = 0;
    for i in 0..cols.min(r.nrows()) {
        if r[(i, i)].abs() > tol * lead.max(f64::MIN_POSITIVE) {
            rank += 1;
        }
    }
    if rank < cols {
        return Err(Error::RankDeficientBasis { rank, need: cols });
    }
    Ok(q.columns(0, cols).into_owned())
}

/// Projection matrix Q Q' onto the column space of an orthonormal basis.
pub fn projection_from_orthonormal(q: &DMatrix<f64>) -> DMatrix<f64> {
    q * q.transpose()
}

/// Frobenius norm of a matrix difference without allocating the difference.
pub fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigendecomposition_sorted_and_orthonormal() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0]);
        let (vals, vecs) = sym_eig_desc(&m);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        let vtv = vecs.transpose() * &vecs;
        assert_relative_eq!(vtv, DMatrix::identity(3, 3), epsilon = 1e-10);
        let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert_relative_eq!(rebuilt, m, epsilon = 1e-10);
    }

    #[test]
    fn sign_fix_makes_dominant_entry_positive() {
        let mut m = DMatrix::from_column_slice(3, 1, &[0.1, -0.9, 0.2]);
        fix_column_signs(&mut m);
        assert!(m[(1, 0)] > 0.0);
    }

    #[test]
    fn orthonormalization_detects_rank_deficiency() {
        let m = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        match orthonormal_columns(&m, 1e-10) {
            Err(Error::RankDeficientBasis { rank: 1, need: 2 }) => {}
            other => panic!("expected rank failure, got {other:?}"),
        }
    }

    #[test]
    fn orthonormalization_spans_input() {
        let m = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0, 1.0]);
        let q = orthonormal_columns(&m, 1e-12).unwrap();
        let p = projection_from_orthonormal(&q);
        // projection fixes the original columns
        assert_relative_eq!(&p * &m, m, epsilon = 1e-10);
        assert_relative_eq!(&p * &p, p, epsilon = 1e-10);
    }
}
