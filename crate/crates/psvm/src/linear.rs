//! Linear sufficient dimension reduction by support vector machines over
//! slice pairs.
//!
//! Each binary pair is solved on the whitened scale: with Z the centered,
//! decorrelated predictors, the dual uses G = Z Z' over the rows with
//! nonzero label and box bound cost/n, n being the full sample size. The
//! whitened normal is w = (1/2) sum a_i y_i z_i and the original-scale
//! normal is cov^{-1/2} w. Normals from all pairs aggregate into a candidate
//! matrix whose leading eigenvectors estimate the subspace.

use nalgebra::{DMatrix, DVector};

use crate::dataset::{lvr_slices, ova_slices, Dataset, MomentSummary, PairScheme, SlicePair};
use crate::error::{Error, Result};
use crate::linalg::{fix_column_signs, sym_eig_desc};
use crate::qp::{recover_intercept, solve_dual_with, DualProblem, SolverOptions};

/// Which slicing scheme generates the binary pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceScheme {
    /// h - 1 cumulative left/right comparisons.
    LeftRight,
    /// All h(h-1)/2 slice-versus-slice comparisons.
    OneVsAnother,
}

impl SliceScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            SliceScheme::LeftRight => "lvr",
            SliceScheme::OneVsAnother => "ova",
        }
    }

    pub fn parse(s: &str) -> Result<SliceScheme> {
        Ok(match s {
            "lvr" => SliceScheme::LeftRight,
            "ova" => SliceScheme::OneVsAnother,
            other => return Err(Error::BadSpec(format!("unknown scheme {other:?}"))),
        })
    }

    pub fn pairs(&self, d: &Dataset, h: usize) -> Result<Vec<SlicePair>> {
        match self {
            SliceScheme::LeftRight => lvr_slices(d, h),
            SliceScheme::OneVsAnother => ova_slices(d, h),
        }
    }
}

/// Settings for a linear fit.
#[derive(Debug, Clone, Copy)]
pub struct LinearConfig {
    pub scheme: SliceScheme,
    /// Number of slices; LeftRight uses the h - 1 interior quantiles as
    /// dividing points.
    pub h: usize,
    /// Hinge weight in the population objective; the per-sample box bound
    /// is cost / n.
    pub cost: f64,
    /// Number of leading directions to keep.
    pub dim: usize,
    pub solver: SolverOptions,
}

impl LinearConfig {
    pub fn new(scheme: SliceScheme, h: usize, cost: f64, dim: usize) -> LinearConfig {
        LinearConfig {
            scheme,
            h,
            cost,
            dim,
            solver: SolverOptions::default(),
        }
    }

    /// The default comparison setting: left/right slicing with 20 dividing
    /// points and unit cost.
    pub fn left_right_default(dim: usize) -> LinearConfig {
        LinearConfig::new(SliceScheme::LeftRight, 21, 1.0, dim)
    }
}

/// One fitted binary separator.
#[derive(Debug, Clone)]
pub struct Hyperplane {
    /// Normal on the original predictor scale.
    pub normal: DVector<f64>,
    /// Normal on the whitened scale.
    pub whitened_normal: DVector<f64>,
    pub intercept: f64,
    pub pair: PairScheme,
    pub converged: bool,
}

/// Aggregated fit: candidate matrix, spectrum and leading directions.
#[derive(Debug, Clone)]
pub struct SdrFit {
    /// Sum of outer products of the per-pair normals (p x p).
    pub candidate: DMatrix<f64>,
    /// Its eigenvalues, nonincreasing.
    pub eigvals: DVector<f64>,
    /// Leading eigenvectors (p x dim), orthonormal, sign-fixed.
    pub directions: DMatrix<f64>,
    /// Per-pair normals on the original scale; empty for moment-based
    /// baseline fits.
    pub normals: Vec<DVector<f64>>,
    pub scheme: SliceScheme,
    pub h: usize,
    /// Hinge weight; `None` for baseline fits that have no cost parameter.
    pub cost: Option<f64>,
    pub method: FitMethod,
    /// False if any pair solve stopped at the iteration cap; moment-based
    /// fits are always true.
    pub converged: bool,
}

/// Which estimator produced an [`SdrFit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    SvmLinear,
    SlicedInverseRegression,
    SlicedAverageVariance,
    DirectionalRegression,
}

impl FitMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitMethod::SvmLinear => "psvm",
            FitMethod::SlicedInverseRegression => "sir",
            FitMethod::SlicedAverageVariance => "save",
            FitMethod::DirectionalRegression => "dr",
        }
    }

    pub fn parse(s: &str) -> Result<FitMethod> {
        Ok(match s {
            "psvm" => FitMethod::SvmLinear,
            "sir" => FitMethod::SlicedInverseRegression,
            "save" => FitMethod::SlicedAverageVariance,
            "dr" => FitMethod::DirectionalRegression,
            other => return Err(Error::BadSpec(format!("unknown method {other:?}"))),
        })
    }
}

/// Fits one binary pair. Whitens internally; use [`fit`] to amortize the
/// moment computation across pairs.
pub fn fit_pair(
    d: &Dataset,
    pair: &SlicePair,
    cost: f64,
    opts: &SolverOptions,
) -> Result<Hyperplane> {
    let m = d.moments()?;
    let z = d.whiten(&m);
    fit_pair_whitened(&z, &m, pair, cost, opts)
}

/// Pair fit on precomputed whitened rows.
pub fn fit_pair_whitened(
    z: &DMatrix<f64>,
    moments: &MomentSummary,
    pair: &SlicePair,
    cost: f64,
    opts: &SolverOptions,
) -> Result<Hyperplane> {
    let n = z.nrows();
    if pair.labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} rows",
            pair.labels.len(),
            n
        )));
    }
    if !(cost > 0.0) {
        return Err(Error::BadSpec("cost must be positive".into()));
    }
    let active = pair.active_rows();
    let m = active.len();
    let mut zsub = DMatrix::zeros(m, z.ncols());
    let mut labels = Vec::with_capacity(m);
    for (r, &i) in active.iter().enumerate() {
        zsub.set_row(r, &z.row(i));
        labels.push(pair.labels[i] as f64);
    }
    // rows with zero label drop out of the dual, but the box bound keeps the
    // full sample size
    let gram = &zsub * zsub.transpose();
    let box_c = cost / n as f64;
    let problem = DualProblem::new(gram, labels, box_c)?;
    let sol = solve_dual_with(&problem, opts)?;
    let mut w = DVector::zeros(z.ncols());
    for r in 0..m {
        let a = sol.alpha[r] * problem.labels()[r];
        w.axpy(0.5 * a, &zsub.row(r).transpose(), 1.0);
    }
    let margins = &zsub * &w;
    let intercept = recover_intercept(&sol.alpha, &margins, problem.labels(), box_c)?;
    Ok(Hyperplane {
        normal: &moments.inv_sqrt * &w,
        whitened_normal: w,
        intercept,
        pair: pair.scheme,
        converged: sol.converged,
    })
}

/// Full fit: slice, solve every pair, aggregate the normals and extract the
/// leading eigenvectors.
pub fn fit(d: &Dataset, cfg: &LinearConfig) -> Result<SdrFit> {
    let p = d.p();
    if cfg.dim < 1 || cfg.dim > p {
        return Err(Error::BadSpec(format!(
            "dim must be between 1 and {p}, got {}",
            cfg.dim
        )));
    }
    let moments = d.moments()?;
    let z = d.whiten(&moments);
    let pairs = cfg.scheme.pairs(d, cfg.h)?;
    let mut candidate = DMatrix::zeros(p, p);
    let mut normals = Vec::with_capacity(pairs.len());
    let mut converged = true;
    for pair in &pairs {
        let hp = fit_pair_whitened(&z, &moments, pair, cfg.cost, &cfg.solver)?;
        candidate.syger(1.0, &hp.normal, &hp.normal, 1.0);
        converged &= hp.converged;
        normals.push(hp.normal);
    }
    for r in 0..p {
        for c in (r + 1)..p {
            candidate[(r, c)] = candidate[(c, r)];
        }
    }
    let (eigvals, mut eigvecs) = sym_eig_desc(&candidate);
    fix_column_signs(&mut eigvecs);
    let directions = eigvecs.columns(0, cfg.dim).into_owned();
    Ok(SdrFit {
        candidate,
        eigvals,
        directions,
        normals,
        scheme: cfg.scheme,
        h: cfg.h,
        cost: Some(cfg.cost),
        method: FitMethod::SvmLinear,
        converged,
    })
}

/// Sufficient predictors for new rows: x_new * directions.
pub fn project(fit: &SdrFit, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x_new.ncols() != fit.directions.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "new data has {} columns, fit expects {}",
            x_new.ncols(),
            fit.directions.nrows()
        )));
    }
    Ok(x_new * &fit.directions)
}

/// Primal objective w'w + c * sum hinge(1 - y (z'w - t)) for tests and
/// oracle comparisons; `c` is the per-observation hinge weight.
pub fn primal_objective(
    z: &DMatrix<f64>,
    labels: &[f64],
    c: f64,
    w: &DVector<f64>,
    t: f64,
) -> f64 {
    let mut hinge = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let margin = z.row(i).transpose().dot(w) - t;
        hinge += (1.0 - y * margin).max(0.0);
    }
    w.dot(w) + c * hinge
}
