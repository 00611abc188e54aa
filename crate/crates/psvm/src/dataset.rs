//! Data container, column standardization, whitening moments and the two
//! response-slicing schemes used to build binary classification pairs.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sym_eig_desc;

/// Regression data with rows as observations.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// n x p predictor matrix.
    pub x: DMatrix<f64>,
    /// Response vector, length n.
    pub y: DVector<f64>,
    /// True when columns of `x` have been centered and scaled to unit sd.
    pub standardized: bool,
    /// Column means applied during standardization.
    pub col_means: Option<DVector<f64>>,
    /// Column sds (n-1 convention) applied during standardization.
    pub col_sds: Option<DVector<f64>>,
    /// Treat the response as categorical; slicing then uses level sets.
    pub categorical: bool,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} predictor rows but {} responses",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::DimensionMismatch(
                "dataset needs at least one row and one column".into(),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::FileFormat("non-finite value in data".into()));
        }
        Ok(Dataset {
            x,
            y,
            standardized: false,
            col_means: None,
            col_sds: None,
            categorical: false,
        })
    }

    pub fn new_categorical(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let mut d = Dataset::new(x, y)?;
        d.categorical = true;
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Subset of rows, preserving flags. Standardization metadata is dropped
    /// because it no longer describes the retained rows.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Dataset> {
        let p = self.p();
        let mut x = DMatrix::zeros(idx.len(), p);
        let mut y = DVector::zeros(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            x.set_row(r, &self.x.row(i));
            y[r] = self.y[i];
        }
        let mut d = Dataset::new(x, y)?;
        d.categorical = self.categorical;
        Ok(d)
    }

    /// Center each column and scale to unit sd (n-1 convention). Applying it
    /// twice is a no-op. A zero-spread column is an error.
    pub fn standardize(&self) -> Result<Dataset> {
        if self.standardized {
            return Ok(self.clone());
        }
        let n = self.n();
        if n < 2 {
            return Err(Error::DimensionMismatch(
                "standardization needs at least two rows".into(),
            ));
        }
        let p = self.p();
        let mut means = DVector::zeros(p);
        let mut sds = DVector::zeros(p);
        let mut x = self.x.clone();
        for j in 0..p {
            let col = self.x.column(j);
            let mean = col.sum() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
            let sd = (ss / (n as f64 - 1.0)).sqrt();
            if sd <= 0.0 {
                return Err(Error::DegenerateColumn(j));
            }
            for i in 0..n {
                x[(i, j)] = (self.x[(i, j)] - mean) / sd;
            }
            means[j] = mean;
            sds[j] = sd;
        }
        Ok(Dataset {
            x,
            y: self.y.clone(),
            standardized: true,
            col_means: Some(means),
            col_sds: Some(sds),
            categorical: self.categorical,
        })
    }

    /// First and second moments plus symmetric square roots of the predictor
    /// covariance, using the default ridge rule: eigenvalues are floored at
    /// 1e-8 * trace/p only when the smallest one falls below that level.
    pub fn moments(&self) -> Result<MomentSummary> {
        self.moments_with_ridge(None)
    }

    /// Same as [`Dataset::moments`] but with an explicit eigenvalue floor.
    pub fn moments_with_ridge(&self, ridge: Option<f64>) -> Result<MomentSummary> {
        let n = self.n() as f64;
        let p = self.p();
        let mean = self.x.row_sum().transpose() / n;
        // covariance with denominator n
        let mut cov = DMatrix::zeros(p, p);
        for i in 0..self.n() {
            let dev = self.x.row(i).transpose() - &mean;
            cov.syger(1.0 / n, &dev, &dev, 1.0);
        }
        // syger fills the lower triangle; mirror it
        for r in 0..p {
            for c in (r + 1)..p {
                cov[(r, c)] = cov[(c, r)];
            }
        }
        let (vals, vecs) = sym_eig_desc(&cov);
        let min_eig = vals[p - 1];
        if min_eig < -1e-8 {
            return Err(Error::NotPsd(min_eig));
        }
        let eps = match ridge {
            Some(e) => {
                if e < 0.0 {
                    return Err(Error::BadSpec("ridge must be nonnegative".into()));
                }
                e
            }
            None => {
                let auto = 1e-8 * cov.trace() / p as f64;
                if min_eig < auto {
                    auto
                } else {
                    0.0
                }
            }
        };
        let mut sqrt = DMatrix::zeros(p, p);
        let mut inv_sqrt = DMatrix::zeros(p, p);
        for j in 0..p {
            let lam = vals[j].max(eps);
            let root = lam.sqrt();
            let v = vecs.column(j);
            sqrt.syger(root, &v, &v, 1.0);
            inv_sqrt.syger(1.0 / root, &v, &v, 1.0);
        }
        for r in 0..p {
            for c in (r + 1)..p {
                sqrt[(r, c)] = sqrt[(c, r)];
                inv_sqrt[(r, c)] = inv_sqrt[(c, r)];
            }
        }
        Ok(MomentSummary {
            mean,
            cov,
            sqrt,
            inv_sqrt,
            ridge: eps,
        })
    }

    /// Rows centered by the mean and rotated to the whitened scale:
    /// Z = (X - mean) * cov^{-1/2}.
    pub fn whiten(&self, m: &MomentSummary) -> DMatrix<f64> {
        let n = self.n();
        let mut centered = self.x.clone();
        for i in 0..n {
            for j in 0..self.p() {
                centered[(i, j)] -= m.mean[j];
            }
        }
        centered * &m.inv_sqrt
    }

    /// Reads a CSV with one response column (chosen by name or index) and all
    /// remaining columns as numeric predictors.
    pub fn from_csv(
        path: &Path,
        response: &ColumnSpec,
        has_header: bool,
        categorical: bool,
    ) -> Result<Dataset> {
        let (x, y) = read_csv_matrix(path, Some(response), has_header)?;
        if x.nrows() == 0 {
            return Err(Error::FileFormat("csv has no data rows".into()));
        }
        let y = y.ok_or_else(|| Error::FileFormat("response column missing".into()))?;
        if categorical {
            Dataset::new_categorical(x, y)
        } else {
            Dataset::new(x, y)
        }
    }
}

/// Selects a CSV column by header name or zero-based position.
#[derive(Debug, Clone)]
pub enum ColumnSpec {
    Name(String),
    Index(usize),
}

impl ColumnSpec {
    /// Parses "name" or a decimal index.
    pub fn parse(s: &str) -> ColumnSpec {
        match s.parse::<usize>() {
            Ok(i) => ColumnSpec::Index(i),
            Err(_) => ColumnSpec::Name(s.to_string()),
        }
    }
}

/// Reads a numeric CSV, optionally extracting one column. Zero data rows is
/// allowed; callers that need rows check themselves.
pub fn read_csv_matrix(
    path: &Path,
    take: Option<&ColumnSpec>,
    has_header: bool,
) -> Result<(DMatrix<f64>, Option<DVector<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let col_idx = match take {
        None => None,
        Some(ColumnSpec::Index(i)) => Some(*i),
        Some(ColumnSpec::Name(name)) => {
            if !has_header {
                return Err(Error::FileFormat(
                    "column selected by name but the file has no header".into(),
                ));
            }
            let headers = rdr.headers()?.clone();
            match headers.iter().position(|h| h == name) {
                Some(i) => Some(i),
                None => return Err(Error::FileFormat(format!("no column named {name:?}"))),
            }
        }
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut taken: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::FileFormat(format!(
                    "row {line} has {} fields, expected {w}",
                    rec.len()
                )));
            }
            _ => {}
        }
        if let Some(ci) = col_idx {
            if ci >= rec.len() {
                return Err(Error::FileFormat(format!(
                    "column index {ci} out of range for {} fields",
                    rec.len()
                )));
            }
        }
        let mut row = Vec::with_capacity(rec.len().saturating_sub(1));
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::FileFormat(format!("row {line}, field {j}: not a number: {field:?}"))
            })?;
            if Some(j) == col_idx {
                taken.push(v);
            } else {
                row.push(v);
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut x = DMatrix::zeros(rows.len(), ncols);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }
    let y = col_idx.map(|_| DVector::from_vec(taken));
    Ok((x, y))
}

/// Whitening byproducts of a dataset: mean, covariance (denominator n) and
/// its symmetric square roots with the eigenvalue floor actually applied.
#[derive(Debug, Clone)]
pub struct MomentSummary {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub sqrt: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
    pub ridge: f64,
}

/// Which two slices a binary pair compares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairScheme {
    /// Everything left of dividing point r against everything right of it.
    LeftRight { r: usize, q: f64 },
    /// Slice r (label -1) against slice s (label +1); other slices get 0.
    OneVsAnother { r: usize, s: usize },
}

/// Signed membership labels for one binary comparison: -1, 0 or +1 per row.
#[derive(Debug, Clone)]
pub struct SlicePair {
    pub labels: Vec<i8>,
    pub scheme: PairScheme,
}

impl SlicePair {
    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l > 0).count()
    }

    pub fn n_negative(&self) -> usize {
        self.labels.iter().filter(|&&l| l < 0).count()
    }

    /// Indices of rows with nonzero label, in row order.
    pub fn active_rows(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != 0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Type-7 sample quantile of sorted values (linear interpolation between
/// order statistics, the convention used throughout this crate).
pub fn quantile_type7(sorted: &[f64], f: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&f));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (n - 1) as f64 * f;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

fn sorted_response(d: &Dataset) -> Result<Vec<f64>> {
    let mut ys: Vec<f64> = d.y.iter().copied().collect();
    ys.sort_by(|a, b| a.partial_cmp(b).expect("responses are finite"));
    if ys[0] == ys[ys.len() - 1] {
        return Err(Error::ZeroSpread);
    }
    Ok(ys)
}

/// Left-versus-right comparisons: h-1 dividing points at equally spaced
/// sample quantiles r/h. Rows at or below a dividing point get -1, rows
/// above get +1; ties at the point go left.
pub fn lvr_slices(d: &Dataset, h: usize) -> Result<Vec<SlicePair>> {
    if h < 2 {
        return Err(Error::BadSpec("left-right slicing needs h >= 2".into()));
    }
    let ys = sorted_response(d)?;
    let mut pairs = Vec::with_capacity(h - 1);
    for r in 1..h {
        let q = quantile_type7(&ys, r as f64 / h as f64);
        let labels: Vec<i8> = d.y.iter().map(|&y| if y > q { 1 } else { -1 }).collect();
        let pair = SlicePair {
            labels,
            scheme: PairScheme::LeftRight { r, q },
        };
        if pair.n_positive() == 0 || pair.n_negative() == 0 {
            return Err(Error::EmptySide(r));
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

/// One-versus-another comparisons over h quantile slices (or, for a
/// categorical response, over its level sets): every unordered slice pair
/// (r, s) with r < s yields labels -1 on slice r, +1 on slice s, 0 elsewhere.
pub fn ova_slices(d: &Dataset, h: usize) -> Result<Vec<SlicePair>> {
    let membership = if d.categorical {
        categorical_membership(d)?
    } else {
        quantile_membership(d, h)?
    };
    let nslices = *membership.iter().max().expect("nonempty") + 1;
    let mut counts = vec![0usize; nslices];
    for &m in &membership {
        counts[m] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptySlice(empty + 1));
    }
    let mut pairs = Vec::with_capacity(nslices * (nslices - 1) / 2);
    for r in 0..nslices {
        for s in (r + 1)..nslices {
            let labels: Vec<i8> = membership
                .iter()
                .map(|&m| {
                    if m == r {
                        -1
                    } else if m == s {
                        1
                    } else {
                        0
                    }
                })
                .collect();
            pairs.push(SlicePair {
                labels,
                scheme: PairScheme::OneVsAnother { r: r + 1, s: s + 1 },
            });
        }
    }
    Ok(pairs)
}

/// Slice index per row from h quantile intervals (q_{r-1}, q_r], with the
/// sample minimum assigned to slice 1.
fn quantile_membership(d: &Dataset, h: usize) -> Result<Vec<usize>> {
    if h < 2 {
        return Err(Error::BadSpec("slicing needs h >= 2".into()));
    }
    let ys = sorted_response(d)?;
    let qs: Vec<f64> = (0..=h)
        .map(|r| quantile_type7(&ys, r as f64 / h as f64))
        .collect();
    let mut membership = Vec::with_capacity(d.n());
    for &y in d.y.iter() {
        let mut slice = h - 1; // fall through to the last slice
        for r in 1..=h {
            if y <= qs[r] {
                slice = r - 1;
                break;
            }
        }
        membership.push(slice);
    }
    Ok(membership)
}

fn categorical_membership(d: &Dataset) -> Result<Vec<usize>> {
    let mut levels: Vec<f64> = d.y.iter().copied().collect();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("responses are finite"));
    levels.dedup();
    if levels.len() < 2 {
        return Err(Error::ZeroSpread);
    }
    Ok(d.y
        .iter()
        .map(|y| levels.iter().position(|l| l == y).expect("own level"))
        .collect())
}
