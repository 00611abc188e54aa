//! Versioned JSON fit artifacts. A saved fit carries everything needed to
//! evaluate the reduction on new rows plus provenance metadata (moments,
//! standardization, solver settings). Matrices are stored as row-major
//! nested arrays so the schema stays self-describing.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{KernelBasis, KernelFit, KernelSpec};
use crate::linear::{FitMethod, SdrFit, SliceScheme};
use crate::qp::SolverOptions;

pub const SPEC_VERSION: u32 = 1;

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn matrix_of(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::SchemaMismatch(format!("{what}: no rows")));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::SchemaMismatch(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Column transform recorded when the fit ran on standardized data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardization {
    pub col_means: Vec<f64>,
    pub col_sds: Vec<f64>,
}

/// How the dual solver was configured for this fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverMeta {
    pub algorithm: String,
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub converged: bool,
}

impl SolverMeta {
    pub fn new(opts: &SolverOptions, converged: bool) -> SolverMeta {
        SolverMeta {
            algorithm: "smo".into(),
            tol: opts.tol,
            max_iter: opts.max_iter,
            converged,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentsMeta {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub ridge: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearArtifact {
    pub method: String,
    pub scheme: String,
    pub h: usize,
    pub lambda: Option<f64>,
    /// Per-pair normals on the original scale; empty for baseline fits.
    pub psi_list: Vec<Vec<f64>>,
    pub eigvals: Vec<f64>,
    /// p rows by d columns.
    pub directions: Vec<Vec<f64>>,
    /// Aggregated candidate matrix, p by p.
    pub candidate: Vec<Vec<f64>>,
    pub moments: MomentsMeta,
    pub standardization: Option<Standardization>,
    pub solver: Option<SolverMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelArtifact {
    pub kernel: KernelSpec,
    pub scheme: String,
    pub h: usize,
    pub lambda: f64,
    /// Usable basis size (columns of w).
    pub k: usize,
    pub requested_k: usize,
    /// Centered-Gram eigenvalues, length k.
    pub basis_eigvals: Vec<f64>,
    /// n rows by k columns.
    pub w: Vec<Vec<f64>>,
    pub gram_col_means: Vec<f64>,
    /// Training rows the kernel is anchored at (standardized scale when
    /// `standardization` is present), n by p.
    pub anchors: Vec<Vec<f64>>,
    /// Per-pair coefficient vectors in basis coordinates.
    pub coefficients: Vec<Vec<f64>>,
    pub candidate_eigvals: Vec<f64>,
    /// k rows by d columns.
    pub v: Vec<Vec<f64>>,
    pub standardization: Option<Standardization>,
    pub solver: Option<SolverMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ArtifactBody {
    Linear(LinearArtifact),
    Kernel(KernelArtifact),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactFile {
    pub spec_version: u32,
    #[serde(flatten)]
    pub body: ArtifactBody,
}

fn standardization_of(d: &Dataset) -> Option<Standardization> {
    match (&d.col_means, &d.col_sds) {
        (Some(m), Some(s)) if d.standardized => Some(Standardization {
            col_means: m.iter().copied().collect(),
            col_sds: s.iter().copied().collect(),
        }),
        _ => None,
    }
}

impl LinearArtifact {
    /// Captures a fit together with the moments of the data it was fit on.
    pub fn from_fit(fit: &SdrFit, d: &Dataset, solver: Option<&SolverOptions>) -> Result<Self> {
        let m = d.moments()?;
        Ok(LinearArtifact {
            method: fit.method.as_str().into(),
            scheme: fit.scheme.as_str().into(),
            h: fit.h,
            lambda: fit.cost,
            psi_list: fit.normals.iter().map(|v| v.iter().copied().collect()).collect(),
            eigvals: fit.eigvals.iter().copied().collect(),
            directions: rows_of(&fit.directions),
            candidate: rows_of(&fit.candidate),
            moments: MomentsMeta {
                mean: m.mean.iter().copied().collect(),
                cov: rows_of(&m.cov),
                ridge: m.ridge,
            },
            standardization: standardization_of(d),
            solver: solver.map(|o| SolverMeta::new(o, fit.converged)),
        })
    }

    pub fn to_fit(&self) -> Result<SdrFit> {
        let directions = matrix_of(&self.directions, "directions")?;
        let candidate = matrix_of(&self.candidate, "candidate")?;
        if candidate.nrows() != candidate.ncols() || candidate.nrows() != directions.nrows() {
            return Err(Error::SchemaMismatch("candidate/direction shapes".into()));
        }
        Ok(SdrFit {
            candidate,
            eigvals: DVector::from_vec(self.eigvals.clone()),
            directions,
            normals: self
                .psi_list
                .iter()
                .map(|v| DVector::from_vec(v.clone()))
                .collect(),
            scheme: SliceScheme::parse(&self.scheme)?,
            h: self.h,
            cost: self.lambda,
            method: FitMethod::parse(&self.method)?,
            converged: self.solver.as_ref().map_or(true, |s| s.converged),
        })
    }

    /// Applies the stored column transform (if any) and projects onto the
    /// fitted directions.
    pub fn project_rows(&self, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let fit = self.to_fit()?;
        let transformed = apply_standardization(&self.standardization, x_new)?;
        crate::linear::project(&fit, &transformed)
    }
}

fn apply_standardization(
    s: &Option<Standardization>,
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    match s {
        None => Ok(x.clone()),
        Some(st) => {
            if st.col_means.len() != x.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "standardization has {} columns, data has {}",
                    st.col_means.len(),
                    x.ncols()
                )));
            }
            Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
                (x[(i, j)] - st.col_means[j]) / st.col_sds[j]
            }))
        }
    }
}

impl KernelArtifact {
    pub fn from_fit(fit: &KernelFit, solver: Option<&SolverOptions>) -> Self {
        let b = &fit.basis;
        KernelArtifact {
            kernel: b.spec.clone(),
            scheme: fit.scheme.as_str().into(),
            h: fit.h,
            lambda: fit.cost,
            k: b.k(),
            requested_k: b.requested,
            basis_eigvals: b.eigvals.iter().copied().collect(),
            w: rows_of(&b.w),
            gram_col_means: b.gram_col_means.iter().copied().collect(),
            anchors: rows_of(&b.anchors),
            coefficients: fit
                .pair_coefficients
                .iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
            candidate_eigvals: fit.eigvals.iter().copied().collect(),
            v: rows_of(&fit.v),
            standardization: fit.standardizer.as_ref().map(|(m, s)| Standardization {
                col_means: m.iter().copied().collect(),
                col_sds: s.iter().copied().collect(),
            }),
            solver: solver.map(|o| SolverMeta::new(o, fit.converged)),
        }
    }

    pub fn to_fit(&self) -> Result<KernelFit> {
        let w = matrix_of(&self.w, "w")?;
        if w.ncols() != self.k || self.basis_eigvals.len() != self.k {
            return Err(Error::SchemaMismatch("basis size disagreement".into()));
        }
        let anchors = matrix_of(&self.anchors, "anchors")?;
        if anchors.nrows() != w.nrows() || self.gram_col_means.len() != w.nrows() {
            return Err(Error::SchemaMismatch("anchor count disagreement".into()));
        }
        let v = matrix_of(&self.v, "v")?;
        if v.nrows() != self.k {
            return Err(Error::SchemaMismatch("v row count".into()));
        }
        let coefficients: Vec<DVector<f64>> = self
            .coefficients
            .iter()
            .map(|c| DVector::from_vec(c.clone()))
            .collect();
        if coefficients.iter().any(|c| c.len() != self.k) {
            return Err(Error::SchemaMismatch("coefficient length".into()));
        }
        let mut candidate = DMatrix::zeros(self.k, self.k);
        for c in &coefficients {
            candidate.syger(1.0, c, c, 1.0);
        }
        for r in 0..self.k {
            for c in (r + 1)..self.k {
                candidate[(r, c)] = candidate[(c, r)];
            }
        }
        let projector = &w * w.transpose();
        let standardizer = self.standardization.as_ref().map(|s| {
            (
                DVector::from_vec(s.col_means.clone()),
                DVector::from_vec(s.col_sds.clone()),
            )
        });
        Ok(KernelFit {
            basis: KernelBasis {
                spec: self.kernel.clone(),
                anchors,
                w,
                eigvals: DVector::from_vec(self.basis_eigvals.clone()),
                gram_col_means: DVector::from_vec(self.gram_col_means.clone()),
                projector,
                requested: self.requested_k,
            },
            pair_coefficients: coefficients,
            candidate,
            eigvals: DVector::from_vec(self.candidate_eigvals.clone()),
            v,
            scheme: SliceScheme::parse(&self.scheme)?,
            h: self.h,
            cost: self.lambda,
            standardizer,
            converged: self.solver.as_ref().map_or(true, |s| s.converged),
        })
    }
}

pub fn save_artifact(path: &Path, body: ArtifactBody) -> Result<()> {
    let file = ArtifactFile {
        spec_version: SPEC_VERSION,
        body,
    };
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_artifact(path: &Path) -> Result<ArtifactFile> {
    let text = std::fs::read_to_string(path)?;
    let file: ArtifactFile = serde_json::from_str(&text)?;
    if file.spec_version != SPEC_VERSION {
        return Err(Error::SchemaMismatch(format!(
            "artifact version {} (supported: {SPEC_VERSION})",
            file.spec_version
        )));
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{
        evaluate_predictor, fit_kernel, gamma_sample, KernelConfig, PairwiseAggregate,
    };
    use crate::linear::{fit, project, LinearConfig};
    use crate::simgen::{generate, ModelId, ModelSpec};
    use approx::assert_relative_eq;

    fn roundtrip(body: ArtifactBody) -> ArtifactFile {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fit.json");
        save_artifact(&path, body).unwrap();
        load_artifact(&path).unwrap()
    }

    #[test]
    fn linear_round_trip_preserves_projection() {
        let (d, _) = generate(&ModelSpec::new(ModelId::I, 60, 4), 1).unwrap();
        let f = fit(&d, &LinearConfig::left_right_default(2)).unwrap();
        let art = LinearArtifact::from_fit(&f, &d, Some(&Default::default())).unwrap();
        let loaded = roundtrip(ArtifactBody::Linear(art));
        let ArtifactBody::Linear(l) = loaded.body else {
            panic!("wrong kind")
        };
        let back = l.to_fit().unwrap();
        assert_relative_eq!(back.directions, f.directions, epsilon = 1e-14);
        assert_relative_eq!(back.candidate, f.candidate, epsilon = 1e-14);
        assert_eq!(back.normals.len(), f.normals.len());
        let px = project(&f, &d.x).unwrap();
        let py = l.project_rows(&d.x).unwrap();
        assert_relative_eq!(px, py, epsilon = 1e-12);
        assert_eq!(l.solver.as_ref().unwrap().algorithm, "smo");
    }

    #[test]
    fn standardized_fit_records_and_applies_the_transform() {
        let (raw, _) = generate(&ModelSpec::new(ModelId::II, 50, 3), 2).unwrap();
        let d = raw.standardize().unwrap();
        let f = fit(&d, &LinearConfig::left_right_default(1)).unwrap();
        let art = LinearArtifact::from_fit(&f, &d, None).unwrap();
        assert!(art.standardization.is_some());
        // projecting the raw rows through the artifact equals projecting
        // the standardized rows directly
        let via_art = art.project_rows(&raw.x).unwrap();
        let direct = project(&f, &d.x).unwrap();
        assert_relative_eq!(via_art, direct, epsilon = 1e-10);
    }

    #[test]
    fn kernel_round_trip_preserves_predictions() {
        let (d, _) = generate(&ModelSpec::new(ModelId::III, 40, 3), 3).unwrap();
        let gamma = gamma_sample(&d, PairwiseAggregate::Mean).unwrap();
        let cfg = KernelConfig::new(
            KernelSpec::Gaussian { gamma },
            crate::linear::SliceScheme::LeftRight,
            5,
            1.0,
            1,
        );
        let f = fit_kernel(&d, &cfg).unwrap();
        let art = KernelArtifact::from_fit(&f, Some(&Default::default()));
        let loaded = roundtrip(ArtifactBody::Kernel(art));
        let ArtifactBody::Kernel(k) = loaded.body else {
            panic!("wrong kind")
        };
        let back = k.to_fit().unwrap();
        let a = evaluate_predictor(&f, &d.x).unwrap();
        let b = evaluate_predictor(&back, &d.x).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12);
        assert_relative_eq!(back.candidate, f.candidate, epsilon = 1e-12);
    }

    #[test]
    fn version_gate_rejects_future_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fit.json");
        let (d, _) = generate(&ModelSpec::new(ModelId::I, 30, 3), 4).unwrap();
        let f = fit(&d, &LinearConfig::left_right_default(1)).unwrap();
        let art = LinearArtifact::from_fit(&f, &d, None).unwrap();
        save_artifact(&path, ArtifactBody::Linear(art)).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text = text.replace("\"spec_version\": 1", "\"spec_version\": 2");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            load_artifact(&path),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn kind_tag_is_lowercase_in_the_json() {
        let (d, _) = generate(&ModelSpec::new(ModelId::I, 30, 3), 5).unwrap();
        let f = fit(&d, &LinearConfig::left_right_default(1)).unwrap();
        let art = LinearArtifact::from_fit(&f, &d, None).unwrap();
        let text = serde_json::to_string(&ArtifactFile {
            spec_version: SPEC_VERSION,
            body: ArtifactBody::Linear(art),
        })
        .unwrap();
        assert!(text.contains("\"kind\":\"linear\""));
        assert!(text.contains("\"spec_version\":1"));
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        assert!(matrix_of(&[vec![1.0, 2.0], vec![3.0]], "m").is_err());
    }
}
