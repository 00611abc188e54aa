//! Kernelized fits: a finite eigenbasis of the centered Gram matrix turns
//! the nonlinear problem into the same box-constrained dual as the linear
//! case, with the basis projector in place of the data Gram.
//!
//! With K the kernel matrix of the training rows and Q = I - J/n the
//! centering projector, the basis uses the top eigenpairs (w_i, l_i) of
//! Q K Q. The functions psi_i(x) = l_i^{-1} sum_j w_ij (kappa(x, X_j) -
//! mean_a kappa(X_a, X_j)) evaluate, at the training rows themselves, to
//! exactly w_i scaled by 1: column-mean centering makes the discrete and
//! functional eigenproblems agree row for row.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, PairScheme, SlicePair};
use crate::error::{Error, Result};
use crate::linalg::{fix_column_signs, sym_eig_desc};
use crate::linear::SliceScheme;
use crate::qp::{recover_intercept, solve_dual_with, DualProblem, SolverOptions};

/// Relative floor under which centered-Gram eigenvalues are discarded.
const EIGVAL_FLOOR: f64 = 1e-10;

/// Seed for the population bandwidth Monte Carlo; fixed so the estimate is
/// a pure function of (p, draws).
const GAMMA_MC_SEED: u64 = 0x5ca1_ab1e;

/// Kernel functions available to the fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// kappa(a, b) = exp(-gamma ||a - b||^2)
    Gaussian { gamma: f64 },
    /// kappa(a, b) = (a'b + c)^degree
    Polynomial { c: f64, degree: u32 },
}

impl KernelSpec {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            KernelSpec::Gaussian { gamma } => {
                let mut d2 = 0.0;
                for (x, y) in a.iter().zip(b.iter()) {
                    let d = x - y;
                    d2 += d * d;
                }
                (-gamma * d2).exp()
            }
            KernelSpec::Polynomial { c, degree } => {
                let mut dot = 0.0;
                for (x, y) in a.iter().zip(b.iter()) {
                    dot += x * y;
                }
                (dot + c).powi(*degree as i32)
            }
        }
    }
}

/// Kernel matrix between the rows of `a` (m1 x p) and `b` (m2 x p).
pub fn gram(spec: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "rows have {} and {} coordinates",
            a.ncols(),
            b.ncols()
        )));
    }
    let (m1, m2) = (a.nrows(), b.nrows());
    let mut k = DMatrix::zeros(m1, m2);
    let ar: Vec<Vec<f64>> = (0..m1).map(|i| a.row(i).iter().copied().collect()).collect();
    let br: Vec<Vec<f64>> = (0..m2).map(|i| b.row(i).iter().copied().collect()).collect();
    for i in 0..m1 {
        for j in 0..m2 {
            k[(i, j)] = spec.eval(&ar[i], &br[j]);
        }
    }
    Ok(k)
}

/// How pairwise distances are pooled into a bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairwiseAggregate {
    Mean,
    Median,
}

/// Data-driven Gaussian bandwidth: gamma = 1/tau^2 with tau the mean (or
/// median) Euclidean distance over all observation pairs.
pub fn gamma_sample(d: &Dataset, agg: PairwiseAggregate) -> Result<f64> {
    gamma_from_rows(&d.x, agg)
}

/// Same heuristic applied directly to a matrix of observation rows.
pub fn gamma_from_rows(x: &DMatrix<f64>, agg: PairwiseAggregate) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::DimensionMismatch(
            "bandwidth needs at least two rows".into(),
        ));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut d2 = 0.0;
            for c in 0..x.ncols() {
                let t = x[(i, c)] - x[(j, c)];
                d2 += t * t;
            }
            dists.push(d2.sqrt());
        }
    }
    let tau = match agg {
        PairwiseAggregate::Mean => dists.iter().sum::<f64>() / dists.len() as f64,
        PairwiseAggregate::Median => {
            dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
            let m = dists.len();
            if m % 2 == 1 {
                dists[m / 2]
            } else {
                0.5 * (dists[m / 2 - 1] + dists[m / 2])
            }
        }
    };
    if tau <= 0.0 {
        return Err(Error::ZeroSpread);
    }
    Ok(1.0 / (tau * tau))
}

/// Population counterpart of [`gamma_sample`] for standard normal
/// predictors: gamma = 1/(E ||X - X'||)^2 with X, X' independent N(0, I_p),
/// estimated by Monte Carlo with a fixed internal seed.
pub fn gamma_population(p: usize, mc_draws: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::BadSpec("need p >= 1".into()));
    }
    if mc_draws < 10_000 {
        return Err(Error::BadSpec("need at least 1e4 draws".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(GAMMA_MC_SEED);
    let mut acc = 0.0;
    for _ in 0..mc_draws {
        let mut d2 = 0.0;
        for _ in 0..p {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            d2 += (a - b) * (a - b);
        }
        acc += d2.sqrt();
    }
    let mean = acc / mc_draws as f64;
    Ok(1.0 / (mean * mean))
}

/// Truncated eigenbasis of the centered Gram matrix.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    pub spec: KernelSpec,
    /// Training rows the Gram was built from.
    pub anchors: DMatrix<f64>,
    /// n x k orthonormal eigenvectors of Q K Q, sign-fixed.
    pub w: DMatrix<f64>,
    /// Matching eigenvalues, positive and nonincreasing.
    pub eigvals: DVector<f64>,
    /// Column means of the raw Gram; the centering offset at evaluation.
    pub gram_col_means: DVector<f64>,
    /// Projector W W' onto the basis coordinates (n x n).
    pub projector: DMatrix<f64>,
    /// Basis size originally asked for; fewer columns mean the centered
    /// Gram ran out of usable spectrum.
    pub requested: usize,
}

impl KernelBasis {
    pub fn k(&self) -> usize {
        self.w.ncols()
    }

    pub fn truncated(&self) -> bool {
        self.k() < self.requested
    }
}

/// Builds the basis from raw rows. `k` defaults to floor(n/2); eigenvalues
/// below the largest one times 1e-10 are unusable and shrink the basis.
pub fn build_basis(x: &DMatrix<f64>, spec: &KernelSpec, k: Option<usize>) -> Result<KernelBasis> {
    let n = x.nrows();
    if n < 3 {
        return Err(Error::DimensionMismatch(
            "kernel basis needs at least three rows".into(),
        ));
    }
    let k_req = k.unwrap_or(n / 2);
    if k_req < 1 || k_req >= n {
        return Err(Error::BadSpec(format!(
            "basis size must lie in [1, {}), got {k_req}",
            n
        )));
    }
    let kmat = gram(spec, x, x)?;
    let col_means = kmat.row_sum().transpose() / n as f64;
    let grand = col_means.sum() / n as f64;
    // double centering: Q K Q
    let mut kc = kmat;
    for i in 0..n {
        for j in 0..n {
            kc[(i, j)] += grand - col_means[i] - col_means[j];
        }
    }
    let (vals, mut vecs) = sym_eig_desc(&kc);
    let floor = vals[0] * EIGVAL_FLOOR;
    let usable = vals.iter().take(k_req).filter(|&&v| v > floor).count();
    if usable == 0 {
        return Err(Error::RankDeficientBasis {
            rank: 0,
            need: k_req,
        });
    }
    fix_column_signs(&mut vecs);
    let w = vecs.columns(0, usable).into_owned();
    let eigvals = DVector::from_iterator(usable, vals.iter().take(usable).copied());
    let projector = &w * w.transpose();
    Ok(KernelBasis {
        spec: *spec,
        anchors: x.clone(),
        w,
        eigvals,
        gram_col_means: col_means,
        projector,
        requested: k_req,
    })
}

/// One fitted binary separator in basis coordinates.
#[derive(Debug, Clone)]
pub struct KernelHyperplane {
    /// Coefficients on the basis functions (length k).
    pub coefficients: DVector<f64>,
    pub intercept: f64,
    pub pair: PairScheme,
    pub converged: bool,
}

/// Fits one pair against the basis: the dual runs on the projector
/// restricted to nonzero-label rows with box bound equal to the cost, and
/// the coefficients are c = (1/2)(Psi'Psi)^{-1} Psi'(y.a) with zeros kept
/// for excluded rows.
pub fn fit_pair_kernel(
    basis: &KernelBasis,
    pair: &SlicePair,
    cost: f64,
    opts: &SolverOptions,
) -> Result<KernelHyperplane> {
    let n = basis.anchors.nrows();
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
    let mut g = DMatrix::zeros(m, m);
    for (r, &i) in active.iter().enumerate() {
        for (s, &j) in active.iter().enumerate() {
            g[(r, s)] = basis.projector[(i, j)];
        }
    }
    let labels: Vec<f64> = active.iter().map(|&i| pair.labels[i] as f64).collect();
    let problem = DualProblem::new(g, labels, cost)?;
    let sol = solve_dual_with(&problem, opts)?;
    // scatter y.a back to full length, zero on excluded rows
    let mut ya = DVector::zeros(n);
    for (r, &i) in active.iter().enumerate() {
        ya[i] = sol.alpha[r] * problem.labels()[r];
    }
    let wt_ya = basis.w.transpose() * &ya;
    let wtw = basis.w.transpose() * &basis.w;
    let coefficients = 0.5
        * wtw
            .cholesky()
            .ok_or(Error::RankDeficientBasis {
                rank: 0,
                need: basis.k(),
            })?
            .solve(&wt_ya);
    let scores = &basis.w * &coefficients;
    let margins = DVector::from_iterator(m, active.iter().map(|&i| scores[i]));
    let intercept = recover_intercept(&sol.alpha, &margins, problem.labels(), cost)?;
    Ok(KernelHyperplane {
        coefficients,
        intercept,
        pair: pair.scheme,
        converged: sol.converged,
    })
}

/// Settings for a kernel fit.
#[derive(Debug, Clone, Copy)]
pub struct KernelConfig {
    pub kernel: KernelSpec,
    /// Basis size; `None` means floor(n/2).
    pub basis_size: Option<usize>,
    pub scheme: SliceScheme,
    pub h: usize,
    pub cost: f64,
    pub dim: usize,
    pub solver: SolverOptions,
}

impl KernelConfig {
    pub fn new(kernel: KernelSpec, scheme: SliceScheme, h: usize, cost: f64, dim: usize) -> Self {
        KernelConfig {
            kernel,
            basis_size: None,
            scheme,
            h,
            cost,
            dim,
            solver: SolverOptions::default(),
        }
    }
}

/// Aggregated kernel fit.
#[derive(Debug, Clone)]
pub struct KernelFit {
    pub basis: KernelBasis,
    /// Per-pair coefficient vectors in basis coordinates.
    pub pair_coefficients: Vec<DVector<f64>>,
    /// Sum of their outer products (k x k).
    pub candidate: DMatrix<f64>,
    pub eigvals: DVector<f64>,
    /// Leading eigenvectors (k x dim), orthonormal, sign-fixed.
    pub v: DMatrix<f64>,
    pub scheme: SliceScheme,
    pub h: usize,
    pub cost: f64,
    /// Column transform to apply to new raw rows when the training data was
    /// standardized: (means, sds).
    pub standardizer: Option<(DVector<f64>, DVector<f64>)>,
    /// False if any pair solve stopped at the iteration cap.
    pub converged: bool,
}

/// Full kernel fit over all slice pairs of the dataset.
pub fn fit_kernel(d: &Dataset, cfg: &KernelConfig) -> Result<KernelFit> {
    let basis = build_basis(&d.x, &cfg.kernel, cfg.basis_size)?;
    let k = basis.k();
    if cfg.dim < 1 || cfg.dim > k {
        return Err(Error::BadSpec(format!(
            "dim must be between 1 and {k}, got {}",
            cfg.dim
        )));
    }
    let pairs = cfg.scheme.pairs(d, cfg.h)?;
    let mut candidate = DMatrix::zeros(k, k);
    let mut coefficients = Vec::with_capacity(pairs.len());
    let mut converged = true;
    for pair in &pairs {
        let hp = fit_pair_kernel(&basis, pair, cfg.cost, &cfg.solver)?;
        candidate.syger(1.0, &hp.coefficients, &hp.coefficients, 1.0);
        converged &= hp.converged;
        coefficients.push(hp.coefficients);
    }
    for r in 0..k {
        for c in (r + 1)..k {
            candidate[(r, c)] = candidate[(c, r)];
        }
    }
    let (eigvals, mut eigvecs) = sym_eig_desc(&candidate);
    fix_column_signs(&mut eigvecs);
    let v = eigvecs.columns(0, cfg.dim).into_owned();
    let standardizer = match (&d.col_means, &d.col_sds) {
        (Some(m), Some(s)) if d.standardized => Some((m.clone(), s.clone())),
        _ => None,
    };
    Ok(KernelFit {
        basis,
        pair_coefficients: coefficients,
        candidate,
        eigvals,
        v,
        scheme: cfg.scheme,
        h: cfg.h,
        cost: cfg.cost,
        standardizer,
        converged,
    })
}

/// Evaluates the fitted sufficient predictors at new rows given on the
/// original scale (the fit's stored column transform, if any, is applied
/// here). At the training rows this reproduces W v exactly.
pub fn evaluate_predictor(fit: &KernelFit, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = fit.basis.anchors.ncols();
    if x_new.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "new data has {} columns, fit expects {p}",
            x_new.ncols()
        )));
    }
    let transformed;
    let rows = match &fit.standardizer {
        Some((means, sds)) => {
            let mut t = x_new.clone();
            for i in 0..t.nrows() {
                for j in 0..p {
                    t[(i, j)] = (t[(i, j)] - means[j]) / sds[j];
                }
            }
            transformed = t;
            &transformed
        }
        None => x_new,
    };
    let mut kx = gram(&fit.basis.spec, rows, &fit.basis.anchors)?;
    for i in 0..kx.nrows() {
        for j in 0..kx.ncols() {
            kx[(i, j)] -= fit.basis.gram_col_means[j];
        }
    }
    let mut psi = kx * &fit.basis.w;
    for r in 0..fit.basis.k() {
        let inv = 1.0 / fit.basis.eigvals[r];
        for i in 0..psi.nrows() {
            psi[(i, r)] *= inv;
        }
    }
    Ok(psi * &fit.v)
}
