//! Moment-based sufficient dimension reduction baselines, all computed on
//! the whitened scale and back-transformed through cov^{-1/2}.
//!
//! Candidate matrices use the standard constructions: slice means for
//! sliced inverse regression, slice covariance deviations from the identity
//! for sliced average variance estimation, and pooled second-moment
//! differences for directional regression. Slice covariances use the same
//! denominator-n convention as the whitening step.

use nalgebra::{DMatrix, DVector};

use crate::dataset::{quantile_type7, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{fix_column_signs, orthonormal_columns, sym_eig_desc};
use crate::linear::{FitMethod, SdrFit, SliceScheme};

/// Per-slice first and second moments of the whitened predictors.
#[derive(Debug, Clone)]
pub struct SliceStats {
    pub counts: Vec<usize>,
    /// Slice proportions; sum to one.
    pub proportions: Vec<f64>,
    /// Whitened slice means.
    pub means: Vec<DVector<f64>>,
    /// Whitened within-slice covariances (denominator: slice size).
    pub covariances: Vec<DMatrix<f64>>,
}

/// Splits rows into h equal-count quantile slices of the response (interval
/// (q_{r-1}, q_r], minimum in slice 1) and accumulates whitened moments.
/// `need_cov` additionally requires every slice to hold at least two rows.
pub fn slice_statistics(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    h: usize,
    need_cov: bool,
) -> Result<SliceStats> {
    let n = z.nrows();
    if h < 2 || h > n {
        return Err(Error::BadSpec(format!("need 2 <= h <= {n}, got {h}")));
    }
    let mut sorted: Vec<f64> = y.iter().copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite responses"));
    if sorted[0] == sorted[n - 1] {
        return Err(Error::ZeroSpread);
    }
    let qs: Vec<f64> = (0..=h)
        .map(|r| quantile_type7(&sorted, r as f64 / h as f64))
        .collect();
    let mut membership = vec![0usize; n];
    for (i, &yi) in y.iter().enumerate() {
        let mut slice = h - 1;
        for r in 1..=h {
            if yi <= qs[r] {
                slice = r - 1;
                break;
            }
        }
        membership[i] = slice;
    }
    let p = z.ncols();
    let mut counts = vec![0usize; h];
    for &m in &membership {
        counts[m] += 1;
    }
    for (r, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(Error::EmptySlice(r + 1));
        }
        if need_cov && c < 2 {
            return Err(Error::EmptySlice(r + 1));
        }
    }
    let mut means = vec![DVector::zeros(p); h];
    for (i, &m) in membership.iter().enumerate() {
        means[m] += z.row(i).transpose();
    }
    for (r, mean) in means.iter_mut().enumerate() {
        *mean /= counts[r] as f64;
    }
    let mut covariances = vec![DMatrix::zeros(p, p); h];
    if need_cov {
        for (i, &m) in membership.iter().enumerate() {
            let dev = z.row(i).transpose() - &means[m];
            covariances[m].syger(1.0, &dev, &dev, 1.0);
        }
        for (r, cov) in covariances.iter_mut().enumerate() {
            *cov /= counts[r] as f64;
            for a in 0..p {
                for b in (a + 1)..p {
                    cov[(a, b)] = cov[(b, a)];
                }
            }
        }
    }
    let proportions = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(SliceStats {
        counts,
        proportions,
        means,
        covariances,
    })
}

fn finish_fit(
    d: &Dataset,
    candidate_whitened: &DMatrix<f64>,
    inv_sqrt: &DMatrix<f64>,
    h: usize,
    dim: usize,
    method: FitMethod,
) -> Result<SdrFit> {
    let p = d.p();
    if dim < 1 || dim > p {
        return Err(Error::BadSpec(format!(
            "dim must be between 1 and {p}, got {dim}"
        )));
    }
    let (eigvals, mut eigvecs) = sym_eig_desc(candidate_whitened);
    fix_column_signs(&mut eigvecs);
    // back to the original scale; re-orthonormalize so projections stay
    // well defined (the span is unchanged)
    let raw = inv_sqrt * eigvecs.columns(0, dim);
    let mut directions = orthonormal_columns(&raw.into_owned(), 1e-10)?;
    fix_column_signs(&mut directions);
    Ok(SdrFit {
        candidate: candidate_whitened.clone(),
        eigvals,
        directions,
        normals: Vec::new(),
        scheme: SliceScheme::LeftRight,
        h,
        cost: None,
        method,
        converged: true,
    })
}

/// Sliced inverse regression: candidate sum_h p_h m_h m_h'.
pub fn fit_sir(d: &Dataset, h: usize, dim: usize) -> Result<SdrFit> {
    let moments = d.moments()?;
    let z = d.whiten(&moments);
    let stats = slice_statistics(&z, &d.y, h, false)?;
    let p = d.p();
    let mut cand = DMatrix::zeros(p, p);
    for r in 0..h {
        cand.syger(stats.proportions[r], &stats.means[r], &stats.means[r], 1.0);
    }
    for a in 0..p {
        for b in (a + 1)..p {
            cand[(a, b)] = cand[(b, a)];
        }
    }
    finish_fit(d, &cand, &moments.inv_sqrt, h, dim, FitMethod::SlicedInverseRegression)
}

/// Sliced average variance estimation: candidate sum_h p_h (I - V_h)^2.
pub fn fit_save(d: &Dataset, h: usize, dim: usize) -> Result<SdrFit> {
    let moments = d.moments()?;
    let z = d.whiten(&moments);
    let stats = slice_statistics(&z, &d.y, h, true)?;
    let p = d.p();
    let eye = DMatrix::identity(p, p);
    let mut cand = DMatrix::zeros(p, p);
    for r in 0..h {
        let gap = &eye - &stats.covariances[r];
        cand += (&gap * &gap) * stats.proportions[r];
    }
    finish_fit(d, &cand, &moments.inv_sqrt, h, dim, FitMethod::SlicedAverageVariance)
}

/// Directional regression: candidate
/// 2 sum_h p_h (V_h + m_h m_h' - I)^2 + 2 S^2 + 2 tr(S) S with
/// S = sum_h p_h m_h m_h'.
pub fn fit_dr(d: &Dataset, h: usize, dim: usize) -> Result<SdrFit> {
    let moments = d.moments()?;
    let z = d.whiten(&moments);
    let stats = slice_statistics(&z, &d.y, h, true)?;
    let p = d.p();
    let eye = DMatrix::identity(p, p);
    let mut first = DMatrix::zeros(p, p);
    let mut s = DMatrix::zeros(p, p);
    for r in 0..h {
        let m = &stats.means[r];
        let a = &stats.covariances[r] + m * m.transpose() - &eye;
        first += (&a * &a) * stats.proportions[r];
        s.syger(stats.proportions[r], m, m, 1.0);
    }
    for a in 0..p {
        for b in (a + 1)..p {
            s[(a, b)] = s[(b, a)];
        }
    }
    let cand = first * 2.0 + (&s * &s) * 2.0 + &s * (2.0 * s.trace());
    finish_fit(d, &cand, &moments.inv_sqrt, h, dim, FitMethod::DirectionalRegression)
}
