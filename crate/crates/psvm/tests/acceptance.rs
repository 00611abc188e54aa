//! Release gate. Ten end-to-end checks over the benchmark campaigns, the
//! solver oracles and the kernel identities; each test prints exactly one
//! "criterion NN ...: PASS|FAIL" line. Tolerances are pinned here, not in
//! the library.

#[allow(dead_code)]
mod common;

use common::{enumerate_dual, random_labels, random_psd};
use nalgebra::{DMatrix, DVector};
use psvm::campaign::{run_campaign, write_campaign, Campaign, CampaignOptions, TableId};
use psvm::kernel::{
    evaluate_predictor, fit_kernel, gamma_population, KernelConfig, KernelSpec,
};
use psvm::linear::{fit, LinearConfig};
use psvm::metrics::subspace_distance;
use psvm::qp::{dual_gradient, dual_objective, solve_dual_with, DualProblem, SolverOptions};
use psvm::simgen::{generate, ModelId, ModelSpec};
use psvm::{Dataset, SliceScheme};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

const MASTER_SEED: u64 = 0;

static TABLE1: OnceLock<(Campaign, Duration)> = OnceLock::new();
static TABLE2: OnceLock<Campaign> = OnceLock::new();
static TABLE3: OnceLock<Campaign> = OnceLock::new();

fn table1() -> &'static (Campaign, Duration) {
    TABLE1.get_or_init(|| {
        let opts = CampaignOptions {
            reps: 100,
            seed: MASTER_SEED,
            jobs: 1,
        };
        let start = Instant::now();
        let c = run_campaign(TableId::Table1, &opts).expect("table1 campaign");
        (c, start.elapsed())
    })
}

fn table2() -> &'static Campaign {
    TABLE2.get_or_init(|| {
        let opts = CampaignOptions {
            reps: 100,
            seed: MASTER_SEED,
            jobs: 1,
        };
        run_campaign(TableId::Table2, &opts).expect("table2 campaign")
    })
}

fn table3() -> &'static Campaign {
    TABLE3.get_or_init(|| {
        let opts = CampaignOptions {
            reps: 50,
            seed: MASTER_SEED,
            jobs: 1,
        };
        run_campaign(TableId::Table3, &opts).expect("table3 campaign")
    })
}

fn mean_of(c: &Campaign, model: &str, p: usize, n: usize, method: &str) -> f64 {
    c.summary
        .iter()
        .find(|r| r.model.as_str() == model && r.p == p && r.n == n && r.method == method)
        .unwrap_or_else(|| panic!("no summary row for {model} p={p} n={n} {method}"))
        .mean
}

fn report(no: u32, what: &str, ok: bool) {
    println!(
        "criterion {no:02} ({what}): {}",
        if ok { "PASS" } else { "FAIL" }
    );
}

#[test]
fn criterion_01_linear_benchmark_recovers_model1() {
    let (c, elapsed) = table1();
    assert!(c.failures.is_empty(), "failed reps: {:?}", c.failures);
    let psvm = mean_of(c, "model1", 10, 100, "psvm");
    let sir = mean_of(c, "model1", 10, 100, "sir");
    let dr = mean_of(c, "model1", 10, 100, "dr");
    let ok = (psvm - 0.65).abs() <= 0.10
        && (sir - 0.84).abs() <= 0.10
        && psvm < sir
        && sir < dr
        && *elapsed <= Duration::from_secs(15 * 60);
    report(1, "benchmark table1, model1 p=10 means and ordering", ok);
    assert!(
        ok,
        "psvm {psvm:.3} sir {sir:.3} dr {dr:.3} elapsed {elapsed:?}"
    );
}

#[test]
fn criterion_02_linear_benchmark_fails_on_symmetric_model3() {
    let (c, _) = table1();
    let psvm = mean_of(c, "model3", 10, 100, "psvm");
    let sir = mean_of(c, "model3", 10, 100, "sir");
    let ok = psvm > 1.4 && sir > 1.6;
    report(2, "benchmark table1, model3 p=10 failure floor", ok);
    assert!(ok, "psvm {psvm:.3} sir {sir:.3}");
}

#[test]
fn criterion_03_kernel_benchmark_beats_moment_methods() {
    let c = table2();
    assert!(c.failures.is_empty(), "failed reps: {:?}", c.failures);
    let k2_10 = mean_of(c, "model2", 10, 100, "kpsvm");
    let k3_10 = mean_of(c, "model3", 10, 100, "kpsvm");
    let k2_30 = mean_of(c, "model2", 30, 100, "kpsvm");
    let k3_30 = mean_of(c, "model3", 30, 100, "kpsvm");
    let save2 = mean_of(c, "model2", 30, 100, "save");
    let save3 = mean_of(c, "model3", 30, 100, "save");
    let dr2 = mean_of(c, "model2", 30, 100, "dr");
    let dr3 = mean_of(c, "model3", 30, 100, "dr");
    let ok = k2_10 >= 0.87
        && k3_10 >= 0.85
        && k2_30 >= 0.70
        && k3_30 >= 0.70
        && save2 <= 0.60
        && save3 <= 0.60
        && dr2 <= 0.60
        && dr3 <= 0.60;
    report(3, "benchmark table2, kernel fits vs second-moment fits", ok);
    assert!(
        ok,
        "kpsvm p10 {k2_10:.3}/{k3_10:.3} p30 {k2_30:.3}/{k3_30:.3} \
         save p30 {save2:.3}/{save3:.3} dr p30 {dr2:.3}/{dr3:.3}"
    );
}

#[test]
fn criterion_04_order_selection_rate_grows_with_n() {
    let c = table3();
    assert!(c.failures.is_empty(), "failed reps: {:?}", c.failures);
    let r200 = mean_of(c, "model4", 10, 200, "cvbic_psvm");
    let r500 = mean_of(c, "model4", 10, 500, "cvbic_psvm");
    let ok = (0.70..=0.95).contains(&r200) && r500 >= r200 - 0.05;
    report(4, "benchmark table3, dimension selection rates", ok);
    assert!(ok, "rate n=200 {r200:.3}, n=500 {r500:.3}");
}

#[test]
fn criterion_05_solver_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED.wrapping_add(5));
    let mut opts = SolverOptions::default();
    opts.tol = 1e-8;
    let mut worst_coeff = 0.0f64;
    let mut worst_obj = 0.0f64;
    for case in 0..50 {
        let m = 3 + case % 6;
        let g = random_psd(&mut rng, m, 0.05);
        let y = random_labels(&mut rng, m);
        let c = match case % 3 {
            0 => 0.25,
            1 => 1.0,
            _ => 2.0 / m as f64,
        };
        let problem = DualProblem::new(g.clone(), y.clone(), c).unwrap();
        let sol = solve_dual_with(&problem, &opts).unwrap();
        let (alpha_ref, obj_ref) = enumerate_dual(&g, &y, c);
        let coeff_gap = (&sol.alpha - &alpha_ref).amax();
        let obj_gap = (dual_objective(&problem, &sol.alpha) - obj_ref).abs();
        worst_coeff = worst_coeff.max(coeff_gap);
        worst_obj = worst_obj.max(obj_gap);
    }
    let ok = worst_coeff <= 1e-3 && worst_obj <= 1e-4;
    report(5, "dual solver vs active-set enumeration, 50 instances", ok);
    assert!(ok, "worst coefficient gap {worst_coeff:.2e}, objective gap {worst_obj:.2e}");
}

#[test]
fn criterion_06_kernel_evaluation_identities() {
    let mut worst_eval = 0.0f64;
    let mut worst_sym = 0.0f64;
    let mut worst_idem = 0.0f64;
    for (case, &n) in [20usize, 40, 60, 36].iter().enumerate() {
        let spec = ModelSpec::new(ModelId::III, n, 4);
        let (d, _) = generate(&spec, 600 + case as u64).unwrap();
        let kernels = [
            KernelSpec::Gaussian { gamma: 0.3 },
            KernelSpec::Polynomial { c: 1.0, degree: 2 },
        ];
        for kern in kernels {
            let mut cfg = KernelConfig::new(kern, SliceScheme::LeftRight, 5, 1.0, 1);
            cfg.basis_size = Some(n / 3);
            let f = fit_kernel(&d, &cfg).unwrap();
            let in_sample = &f.basis.w * &f.v;
            let evaluated = evaluate_predictor(&f, &d.x).unwrap();
            worst_eval = worst_eval.max((&evaluated - &in_sample).amax());

            let p = &f.basis.projector;
            worst_sym = worst_sym.max((p - p.transpose()).amax());
            worst_idem = worst_idem.max((p * p - p).amax());
        }
    }
    let ok = worst_eval <= 1e-8 && worst_sym <= 1e-8 && worst_idem <= 1e-8;
    report(6, "kernel predictor at training rows and basis projector", ok);
    assert!(
        ok,
        "eval {worst_eval:.2e} sym {worst_sym:.2e} idem {worst_idem:.2e}"
    );
}

#[test]
fn criterion_07_fitted_spans_are_affine_equivariant() {
    // pair count equals the kept dimension so the extracted span is the
    // candidate's full range and transports exactly through A^{-T}
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED.wrapping_add(7));
    let spec = ModelSpec::new(ModelId::I, 100, 10);
    let (d, _) = generate(&spec, 7).unwrap();
    let mut cfg = LinearConfig::new(SliceScheme::LeftRight, 3, 1.0, 2);
    cfg.solver.tol = 1e-8;
    let base = fit(&d, &cfg).unwrap();
    let p = d.p();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = loop {
            let cand = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0f64..1.0));
            if cand.determinant().abs() > 0.1 {
                break cand;
            }
        };
        let b = DVector::from_fn(p, |_, _| rng.gen_range(-1.0f64..1.0));
        let mut xt = &d.x * a.transpose();
        for i in 0..xt.nrows() {
            for j in 0..p {
                xt[(i, j)] += b[j];
            }
        }
        let dt = Dataset::new(xt, d.y.clone()).unwrap();
        let mapped = fit(&dt, &cfg).unwrap();
        let back = a.transpose() * &mapped.directions;
        worst = worst.max(subspace_distance(&base.directions, &back).unwrap());
    }
    let ok = worst < 1e-3;
    report(7, "span transport under 20 random affine maps", ok);
    assert!(ok, "worst back-mapped span distance {worst:.2e}");
}

#[test]
fn criterion_08_population_bandwidth_constants() {
    let targets = [(10usize, 0.0526f64), (20, 0.0257), (30, 0.0169)];
    let mut worst_rel = 0.0f64;
    for &(p, want) in &targets {
        let got = gamma_population(p, psvm::campaign::GAMMA_MC_DRAWS).unwrap();
        worst_rel = worst_rel.max((got - want).abs() / want);
    }
    let ok = worst_rel <= 0.02;
    report(8, "gaussian bandwidth constants for p = 10/20/30", ok);
    assert!(ok, "worst relative error {worst_rel:.4}");
}

#[test]
fn criterion_09_dual_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED.wrapping_add(9));
    let mut worst = 0.0f64;
    for case in 0..20 {
        let m = 3 + case % 5;
        let g = random_psd(&mut rng, m, 0.1);
        let y = random_labels(&mut rng, m);
        let c = 1.0;
        let problem = DualProblem::new(g, y, c).unwrap();
        let alpha = DVector::from_fn(m, |_, _| rng.gen_range(0.05..c - 0.05));
        let grad = dual_gradient(&problem, &alpha);
        let h = 1e-6;
        for i in 0..m {
            let mut hi = alpha.clone();
            let mut lo = alpha.clone();
            hi[i] += h;
            lo[i] -= h;
            let fd = (dual_objective(&problem, &hi) - dual_objective(&problem, &lo)) / (2.0 * h);
            worst = worst.max((grad[i] - fd).abs() / (1.0 + fd.abs()));
        }
    }
    let ok = worst <= 1e-6;
    report(9, "dual gradient vs central differences, 20 points", ok);
    assert!(ok, "worst relative error {worst:.2e}");
}

#[test]
fn criterion_10_summaries_are_identical_across_job_counts() {
    let run = |jobs: usize| {
        let opts = CampaignOptions {
            reps: 4,
            seed: MASTER_SEED,
            jobs,
        };
        let c = run_campaign(TableId::Table1, &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_campaign(&c, dir.path()).unwrap();
        std::fs::read(dir.path().join("summary.csv")).unwrap()
    };
    let ok = run(1) == run(4);
    report(10, "benchmark summary bytes for jobs 1 vs 4", ok);
    assert!(ok, "summary.csv differs between jobs=1 and jobs=4");
}
