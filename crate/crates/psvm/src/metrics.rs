//! Distances between estimated subspaces and rank-correlation scores for
//! nonlinear predictors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_distance, orthonormal_columns, projection_from_orthonormal};

/// Frobenius norm of the difference between the orthogonal projections onto
/// the column spaces of `b1` (p x d1) and `b2` (p x d2). Basis-invariant;
/// ranges over [0, sqrt(d1 + d2)]. Either matrix may have any full column
/// rank; rank deficiency is an error.
pub fn subspace_distance(b1: &DMatrix<f64>, b2: &DMatrix<f64>) -> Result<f64> {
    if b1.nrows() != b2.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "bases live in different ambient dimensions ({} vs {})",
            b1.nrows(),
            b2.nrows()
        )));
    }
    let q1 = orthonormal_columns(b1, 1e-10)?;
    let q2 = orthonormal_columns(b2, 1e-10)?;
    let p1 = projection_from_orthonormal(&q1);
    let p2 = projection_from_orthonormal(&q2);
    Ok(frobenius_distance(&p1, &p2))
}

/// Midranks: positions 1..m with ties replaced by the mean position of the
/// tied run.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("finite values"));
    let mut ranks = vec![0.0; m];
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j + 1 < m && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Absolute Spearman rank correlation with midrank tie handling. Needs at
/// least three observations; a constant input has no defined correlation.
pub fn spearman_abs(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} observations",
            u.len(),
            v.len()
        )));
    }
    if u.len() < 3 {
        return Err(Error::DimensionMismatch(
            "rank correlation needs at least 3 observations".into(),
        ));
    }
    let ru = average_ranks(u);
    let rv = average_ranks(v);
    let m = u.len() as f64;
    let mean = (m + 1.0) / 2.0;
    let mut suu = 0.0;
    let mut svv = 0.0;
    let mut suv = 0.0;
    for i in 0..u.len() {
        let du = ru[i] - mean;
        let dv = rv[i] - mean;
        suu += du * du;
        svv += dv * dv;
        suv += du * dv;
    }
    if suu == 0.0 || svv == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((suv / (suu * svv).sqrt()).abs())
}

/// Outcome of the quadratic recovery regression.
#[derive(Debug, Clone, Copy)]
pub struct RecoveryScore {
    pub score: f64,
    /// True when the design matrix was rank deficient and a pseudo-inverse
    /// fit was used.
    pub singular_design: bool,
}

/// How well a pair of scalar predictors recovers a target through a
/// quadratic surface: regress `t` on (1, u1, u2, u1^2, u2^2) by least
/// squares and return the absolute Spearman correlation between `t` and the
/// fitted values.
pub fn quadratic_recovery_score(u1: &[f64], u2: &[f64], t: &[f64]) -> Result<RecoveryScore> {
    let m = t.len();
    if u1.len() != m || u2.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "predictors have {} and {} rows, target has {}",
            u1.len(),
            u2.len(),
            m
        )));
    }
    if m < 5 {
        return Err(Error::DimensionMismatch(
            "quadratic recovery needs at least 5 observations".into(),
        ));
    }
    let design = DMatrix::from_fn(m, 5, |i, j| match j {
        0 => 1.0,
        1 => u1[i],
        2 => u2[i],
        3 => u1[i] * u1[i],
        _ => u2[i] * u2[i],
    });
    let target = DVector::from_column_slice(t);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * 1e-10;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let coef = svd
        .solve(&target, cutoff)
        .map_err(|e| Error::BadSpec(e.to_string()))?;
    let fitted = design * coef;
    let score = spearman_abs(t, fitted.as_slice())?;
    Ok(RecoveryScore {
        score,
        singular_design: rank < 5,
    })
}
