//! Command line front end: fit on CSV data, project new rows through a
//! saved fit, and run the seeded benchmark campaigns.
//!
//! Exit codes: 0 success, 2 usage, 3 data problem, 4 numeric failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use psvm::artifact::{load_artifact, save_artifact, ArtifactBody, KernelArtifact, LinearArtifact};
use psvm::dataset::{read_csv_matrix, ColumnSpec, Dataset};
use psvm::error::{Error, ErrorCategory};
use psvm::kernel::{
    self, evaluate_predictor, gamma_population, gamma_sample, KernelConfig, KernelSpec,
    PairwiseAggregate,
};
use psvm::linear::{self, LinearConfig, SliceScheme};
use psvm::{run_campaign, write_campaign, CampaignOptions, TableId};

#[derive(Parser)]
#[command(
    name = "psvm",
    version,
    about = "Principal support vector machines for sufficient dimension reduction"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit the linear estimator on a CSV and save the fit as JSON.
    FitLinear(FitLinearArgs),
    /// Fit the kernel estimator on a CSV and save the fit as JSON.
    FitKernel(FitKernelArgs),
    /// Project the rows of a CSV through a saved fit.
    Predict(PredictArgs),
    /// Run a seeded simulation campaign and write its result files.
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    /// Threshold the response at each dividing point.
    Lvr,
    /// Pair every two response slices.
    Ova,
}

impl SchemeArg {
    fn to_scheme(self) -> SliceScheme {
        match self {
            SchemeArg::Lvr => SliceScheme::LeftRight,
            SchemeArg::Ova => SliceScheme::OneVsAnother,
        }
    }
}

#[derive(Args)]
struct SliceArgs {
    /// Slicing scheme for the response.
    #[arg(long, value_enum, default_value = "lvr")]
    scheme: SchemeArg,
    /// Number of response slices.
    #[arg(long, conflicts_with = "dividing_points")]
    slices: Option<usize>,
    /// Number of dividing points (lvr only); slices = points + 1.
    #[arg(long)]
    dividing_points: Option<usize>,
}

impl SliceArgs {
    fn resolve_h(&self) -> Result<usize, Error> {
        match (self.slices, self.dividing_points, self.scheme) {
            (Some(h), _, _) => Ok(h),
            (None, Some(m), SchemeArg::Lvr) => Ok(m + 1),
            (None, Some(_), SchemeArg::Ova) => Err(Error::BadSpec(
                "dividing points only apply to the lvr scheme; use --slices".into(),
            )),
            (None, None, SchemeArg::Lvr) => Ok(21),
            (None, None, SchemeArg::Ova) => Ok(8),
        }
    }
}

#[derive(Args)]
struct FitLinearArgs {
    /// Training CSV with a header row.
    data: PathBuf,
    /// Response column, by header name or zero-based index.
    #[arg(long)]
    response: String,
    #[command(flatten)]
    slicing: SliceArgs,
    /// Hinge weight in the objective.
    #[arg(long, default_value_t = 1.0)]
    cost: f64,
    /// Number of directions to keep.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Accepted for interface stability; the fit itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the JSON fit.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Gaussian,
    Poly,
}

#[derive(Args)]
struct FitKernelArgs {
    /// Training CSV with a header row.
    data: PathBuf,
    /// Response column, by header name or zero-based index.
    #[arg(long)]
    response: String,
    #[command(flatten)]
    slicing: SliceArgs,
    /// Hinge weight in the objective.
    #[arg(long, default_value_t = 1.0)]
    cost: f64,
    /// Number of sufficient predictors to keep.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Kernel family.
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: KernelArg,
    /// Gaussian bandwidth: auto-sample, auto-pop, or a number.
    #[arg(long, default_value = "auto-sample")]
    gamma: String,
    /// Polynomial degree (poly kernel).
    #[arg(long, default_value_t = 2)]
    degree: u32,
    /// Polynomial additive constant (poly kernel).
    #[arg(long, default_value_t = 1.0)]
    offset: f64,
    /// Basis size; defaults to half the sample size.
    #[arg(long)]
    basis_k: Option<usize>,
    /// Center and scale each predictor column before fitting.
    #[arg(long)]
    standardize: bool,
    /// Accepted for interface stability; the fit itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the JSON fit.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// CSV of rows to project, same predictor layout as the training data.
    data: PathBuf,
    /// Saved JSON fit.
    #[arg(long)]
    fit: PathBuf,
    /// Response column to drop, if the file still carries one.
    #[arg(long)]
    response: Option<String>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Which table to reproduce: table1, table2 or table3.
    table: String,
    /// Replications per grid cell.
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Master seed; every replication derives its own substream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Directory for raw.csv, summary.csv, timings.csv and meta.json.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::FitLinear(a) => cmd_fit_linear(a),
        Cmd::FitKernel(a) => cmd_fit_kernel(a),
        Cmd::Predict(a) => cmd_predict(a),
        Cmd::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.category() {
                ErrorCategory::Usage => ExitCode::from(2),
                ErrorCategory::Data => ExitCode::from(3),
                ErrorCategory::Numeric => ExitCode::from(4),
            }
        }
    }
}

fn load_training(path: &PathBuf, response: &str) -> Result<Dataset, Error> {
    Dataset::from_csv(path, &ColumnSpec::parse(response), true, false)
}

fn print_spectrum(label: &str, eigvals: &[f64]) {
    let shown: Vec<String> = eigvals.iter().take(6).map(|v| format!("{v:.4}")).collect();
    let tail = if eigvals.len() > 6 { ", ..." } else { "" };
    println!("{label}: {}{tail}", shown.join(", "));
}

fn cmd_fit_linear(a: FitLinearArgs) -> Result<(), Error> {
    let d = load_training(&a.data, &a.response)?;
    let h = a.slicing.resolve_h()?;
    let cfg = LinearConfig::new(a.slicing.scheme.to_scheme(), h, a.cost, a.dim);
    let fit = linear::fit(&d, &cfg)?;
    println!(
        "linear fit: n = {}, p = {}, scheme = {}, slices = {h}, cost = {}, dim = {}",
        d.n(),
        d.p(),
        fit.scheme.as_str(),
        a.cost,
        a.dim
    );
    print_spectrum("candidate eigenvalues", fit.eigvals.as_slice());
    if !fit.converged {
        eprintln!("warning: a subproblem hit the iteration cap; treat directions with care");
    }
    let art = LinearArtifact::from_fit(&fit, &d, Some(&cfg.solver))?;
    save_artifact(&a.out, ArtifactBody::Linear(art))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn resolve_gamma(raw: &str, d: &Dataset) -> Result<f64, Error> {
    match raw {
        "auto-sample" => {
            let g = gamma_sample(d, PairwiseAggregate::Mean)?;
            eprintln!("gamma = {g:.6} (mean pairwise distance)");
            Ok(g)
        }
        "auto-pop" => {
            let g = gamma_population(d.p(), psvm::campaign::GAMMA_MC_DRAWS)?;
            eprintln!("gamma = {g:.6} (population heuristic, p = {})", d.p());
            Ok(g)
        }
        other => other
            .parse::<f64>()
            .map_err(|_| Error::BadSpec(format!("--gamma expects auto-sample, auto-pop or a number, got {other:?}"))),
    }
}

fn cmd_fit_kernel(a: FitKernelArgs) -> Result<(), Error> {
    let raw = load_training(&a.data, &a.response)?;
    let d = if a.standardize { raw.standardize()? } else { raw };
    let h = a.slicing.resolve_h()?;
    let spec = match a.kernel {
        KernelArg::Gaussian => KernelSpec::Gaussian {
            gamma: resolve_gamma(&a.gamma, &d)?,
        },
        KernelArg::Poly => KernelSpec::Polynomial {
            c: a.offset,
            degree: a.degree,
        },
    };
    let mut cfg = KernelConfig::new(spec, a.slicing.scheme.to_scheme(), h, a.cost, a.dim);
    cfg.basis_size = a.basis_k;
    let fit = kernel::fit_kernel(&d, &cfg)?;
    println!(
        "kernel fit: n = {}, p = {}, basis = {}, scheme = {}, slices = {h}, cost = {}, dim = {}",
        d.n(),
        d.p(),
        fit.basis.k(),
        fit.scheme.as_str(),
        a.cost,
        a.dim
    );
    print_spectrum("candidate eigenvalues", fit.eigvals.as_slice());
    if !fit.converged {
        eprintln!("warning: a subproblem hit the iteration cap; treat predictors with care");
    }
    let art = KernelArtifact::from_fit(&fit, Some(&cfg.solver));
    save_artifact(&a.out, ArtifactBody::Kernel(art))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<(), Error> {
    let art = load_artifact(&a.fit)?;
    let response = a.response.as_deref().map(ColumnSpec::parse);
    let (x, _) = read_csv_matrix(&a.data, response.as_ref(), true)?;
    let dim_out = match &art.body {
        ArtifactBody::Linear(l) => l.directions.first().map_or(0, |r| r.len()),
        ArtifactBody::Kernel(k) => k.v.first().map_or(0, |r| r.len()),
    };
    let mut text = String::new();
    let header: Vec<String> = (1..=dim_out).map(|j| format!("pred{j}")).collect();
    text.push_str(&header.join(","));
    text.push('\n');
    if x.nrows() > 0 {
        let pred = match &art.body {
            ArtifactBody::Linear(l) => l.project_rows(&x)?,
            ArtifactBody::Kernel(k) => evaluate_predictor(&k.to_fit()?, &x)?,
        };
        for i in 0..pred.nrows() {
            let row: Vec<String> =
                (0..pred.ncols()).map(|j| format!("{:.12}", pred[(i, j)])).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
    }
    match &a.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_benchmark(a: BenchmarkArgs) -> Result<(), Error> {
    let table = TableId::parse(&a.table)?;
    if a.reps == 0 {
        return Err(Error::BadSpec("--reps must be at least 1".into()));
    }
    let opts = CampaignOptions {
        reps: a.reps,
        seed: a.seed,
        jobs: a.jobs,
    };
    let campaign = run_campaign(table, &opts)?;
    write_campaign(&campaign, &a.out)?;
    println!("{} cells x {} reps, seed {}", campaign.summary.len(), a.reps, a.seed);
    println!("model,p,n,method,mean,sd");
    for s in &campaign.summary {
        let sd = s.sd.map_or("NA".to_string(), |v| format!("{v:.3}"));
        println!(
            "{},{},{},{},{:.3},{sd}",
            s.model.as_str(),
            s.p,
            s.n,
            s.method,
            s.mean
        );
    }
    println!("mean seconds per fit:");
    for (method, secs) in psvm::campaign::mean_seconds(&campaign) {
        println!("  {method}: {secs:.4}");
    }
    if !campaign.failures.is_empty() {
        eprintln!("{} replication(s) failed and were excluded:", campaign.failures.len());
        for f in &campaign.failures {
            eprintln!("  {f}");
        }
    }
    println!("wrote {}", a.out.display());
    Ok(())
}
