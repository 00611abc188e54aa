//! Synthetic regression models used by the comparison tables, plus the
//! loader for the vowel recognition data.
//!
//! All models draw X ~ N(0, I_p) and an independent noise term. Replication
//! streams are derived from one master seed with `replication_seed`, so runs
//! are reproducible regardless of how replications are scheduled.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Name of the generator recorded in output metadata.
pub const RNG_ALGORITHM: &str = "chacha8";

/// The regression models of the comparison study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelId {
    /// y = x1 / (0.5 + (x2 + 1)^2) + noise, two directions.
    I,
    /// y = x1 (x1 + x2 + 1) + noise, two directions.
    II,
    /// y = r log r with r = sqrt(x1^2 + x2^2), plus noise; one nonlinear
    /// sufficient predictor (the radius), two linear directions.
    III,
    /// y = x1 / (0.5 + (x1 + 1)^2) + noise, one direction.
    IV,
    /// y = x1 (2 x1 + 1) + noise, one direction.
    V,
    /// Binary y with predictor scale depending on the class: X | y has the
    /// first two coordinates scaled by sigma(y), classes exactly balanced.
    Variance,
}

impl ModelId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelId::I => "model1",
            ModelId::II => "model2",
            ModelId::III => "model3",
            ModelId::IV => "model4",
            ModelId::V => "model5",
            ModelId::Variance => "variance",
        }
    }

    pub fn parse(s: &str) -> Result<ModelId> {
        Ok(match s {
            "model1" | "1" | "i" | "I" => ModelId::I,
            "model2" | "2" | "ii" | "II" => ModelId::II,
            "model3" | "3" | "iii" | "III" => ModelId::III,
            "model4" | "4" | "iv" | "IV" => ModelId::IV,
            "model5" | "5" | "v" | "V" => ModelId::V,
            "variance" => ModelId::Variance,
            other => return Err(Error::BadSpec(format!("unknown model {other:?}"))),
        })
    }

    /// Dimension of the true linear subspace.
    pub fn true_dim(&self) -> usize {
        match self {
            ModelId::I | ModelId::II | ModelId::III | ModelId::Variance => 2,
            ModelId::IV | ModelId::V => 1,
        }
    }
}

/// Generator settings for one synthetic draw.
#[derive(Debug, Clone, Copy)]
pub struct ModelSpec {
    pub id: ModelId,
    pub n: usize,
    pub p: usize,
    /// Noise standard deviation for the regression models.
    pub noise_sd: f64,
    /// Class variance multipliers for the variance model: sigma^2 for class
    /// 0 and class 1.
    pub class_variances: (f64, f64),
}

impl ModelSpec {
    pub fn new(id: ModelId, n: usize, p: usize) -> ModelSpec {
        ModelSpec {
            id,
            n,
            p,
            noise_sd: 0.2,
            class_variances: (1.0, 10.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let min_p = match self.id {
            ModelId::IV | ModelId::V => 1,
            ModelId::I | ModelId::II | ModelId::III => 2,
            ModelId::Variance => 3,
        };
        if self.p < min_p {
            return Err(Error::BadSpec(format!(
                "{} needs p >= {min_p}",
                self.id.as_str()
            )));
        }
        if self.n < 2 {
            return Err(Error::BadSpec("need n >= 2".into()));
        }
        if self.id == ModelId::Variance && self.n % 2 != 0 {
            return Err(Error::BadSpec(
                "the variance model balances classes exactly; n must be even".into(),
            ));
        }
        if self.noise_sd < 0.0 {
            return Err(Error::BadSpec("noise sd must be nonnegative".into()));
        }
        Ok(())
    }
}

/// What the generator knows about its own structure, for scoring estimates.
#[derive(Debug, Clone)]
pub struct ModelTruth {
    /// Basis of the true linear subspace (p x d).
    pub directions: Option<DMatrix<f64>>,
    /// Noise-free sufficient predictor per row; for the radial model this is
    /// the radius itself rather than the regression mean.
    pub nonlinear: Option<DVector<f64>>,
    pub dim: usize,
}

/// Noise-free response surface of a regression model at one predictor row.
pub fn noiseless_response(id: ModelId, x: &[f64]) -> f64 {
    match id {
        ModelId::I => {
            let d = x[1] + 1.0;
            x[0] / (0.5 + d * d)
        }
        ModelId::II => x[0] * (x[0] + x[1] + 1.0),
        ModelId::III => {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r == 0.0 {
                0.0 // continuous extension of r log r
            } else {
                r * r.ln()
            }
        }
        ModelId::IV => {
            let d = x[0] + 1.0;
            x[0] / (0.5 + d * d)
        }
        ModelId::V => x[0] * (2.0 * x[0] + 1.0),
        ModelId::Variance => panic!("the variance model has no regression surface"),
    }
}

/// Draws a dataset from one model. Same spec and seed always produce the
/// same bytes. Draw order is fixed: X row by row, then the noise vector.
pub fn generate(spec: &ModelSpec, seed: u64) -> Result<(Dataset, ModelTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, p) = (spec.n, spec.p);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let (y, nonlinear) = match spec.id {
        ModelId::Variance => {
            // class 1 rows come first, then class 0; only the first two
            // coordinates are rescaled
            let half = n / 2;
            let (v0, v1) = spec.class_variances;
            let (s0, s1) = (v0.sqrt(), v1.sqrt());
            let mut y = DVector::zeros(n);
            for i in 0..n {
                let s = if i < half { s1 } else { s0 };
                y[i] = if i < half { 1.0 } else { 0.0 };
                x[(i, 0)] *= s;
                x[(i, 1)] *= s;
            }
            (y, None)
        }
        id => {
            let mut mean = DVector::zeros(n);
            let mut shown = DVector::zeros(n);
            for i in 0..n {
                let row: Vec<f64> = (0..p).map(|j| x[(i, j)]).collect();
                mean[i] = noiseless_response(id, &row);
                shown[i] = match id {
                    ModelId::III => (row[0] * row[0] + row[1] * row[1]).sqrt(),
                    _ => mean[i],
                };
            }
            let mut y = mean;
            for i in 0..n {
                y[i] += spec.noise_sd * rng.sample::<f64, _>(StandardNormal);
            }
            (y, Some(shown))
        }
    };
    let d = spec.id.true_dim();
    let mut directions = DMatrix::zeros(p, d);
    for j in 0..d {
        directions[(j, j)] = 1.0;
    }
    let dataset = if spec.id == ModelId::Variance {
        Dataset::new_categorical(x, y)?
    } else {
        Dataset::new(x, y)?
    };
    Ok((
        dataset,
        ModelTruth {
            directions: Some(directions),
            nonlinear,
            dim: d,
        },
    ))
}

/// Deterministic per-replication seed from a master seed. Uses the
/// splitmix64 finalizer so neighbouring replications are uncorrelated and
/// the mapping is independent of scheduling order.
pub fn replication_seed(master: u64, rep: u64) -> u64 {
    let mut z = master.wrapping_add((rep.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Loads the vowel recognition file and splits it into train and test sets
/// restricted to the requested class labels.
///
/// Expected layout (14 columns): train/test indicator, speaker, sex, ten
/// spectral features, class. `split_col` names the indicator column
/// (0 in the published file); indicator 0 means train. Speaker and sex are
/// dropped. The returned datasets carry the categorical response flag.
pub fn load_vowel_csv(
    path: &Path,
    labels: &[f64],
    split_col: usize,
    has_header: bool,
) -> Result<(Dataset, Dataset)> {
    const COLS: usize = 14;
    const META: [usize; 2] = [1, 2]; // speaker, sex
    if labels.is_empty() {
        return Err(Error::BadSpec("need at least one class label".into()));
    }
    if split_col >= COLS {
        return Err(Error::BadSpec(format!(
            "split column {split_col} out of range for {COLS} columns"
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut train_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut test_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut seen: Vec<f64> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != COLS {
            return Err(Error::FileFormat(format!(
                "row {line} has {} fields, expected {COLS}",
                rec.len()
            )));
        }
        let parse = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| {
                Error::FileFormat(format!("row {line}, field {j}: not a number: {:?}", &rec[j]))
            })
        };
        let class = parse(COLS - 1)?;
        if !seen.contains(&class) {
            seen.push(class);
        }
        if !labels.contains(&class) {
            continue;
        }
        let flag = parse(split_col)?;
        let mut features = Vec::with_capacity(COLS - 4);
        for j in 0..COLS - 1 {
            if j == split_col || META.contains(&j) {
                continue;
            }
            features.push(parse(j)?);
        }
        if flag == 0.0 {
            train_rows.push((features, class));
        } else {
            test_rows.push((features, class));
        }
    }
    for l in labels {
        if !seen.contains(l) {
            return Err(Error::UnknownLabel(*l));
        }
    }
    let build = |rows: &[(Vec<f64>, f64)], what: &str| -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::FileFormat(format!(
                "no {what} rows for the requested labels"
            )));
        }
        let p = rows[0].0.len();
        let mut x = DMatrix::zeros(rows.len(), p);
        let mut y = DVector::zeros(rows.len());
        for (i, (feat, class)) in rows.iter().enumerate() {
            for (j, v) in feat.iter().enumerate() {
                x[(i, j)] = *v;
            }
            y[i] = *class;
        }
        Dataset::new_categorical(x, y)
    };
    Ok((build(&train_rows, "train")?, build(&test_rows, "test")?))
}
