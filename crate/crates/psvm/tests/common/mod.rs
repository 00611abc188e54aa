//! Reference implementations the integration tests check the solvers
//! against. Everything here is deliberately brute force and shares no code
//! with the library paths under test.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Random symmetric positive definite matrix A A' + eps I.
pub fn random_psd(rng: &mut ChaCha8Rng, m: usize, eps: f64) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    &a * a.transpose() + DMatrix::identity(m, m) * eps
}

/// Random labels with both signs present.
pub fn random_labels(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    loop {
        let y: Vec<f64> = (0..m)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        if y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0) {
            return y;
        }
    }
}

/// Dual objective 1'a - (1/4)(a.y)' G (a.y), written out directly.
pub fn dual_value(g: &DMatrix<f64>, y: &[f64], alpha: &DVector<f64>) -> f64 {
    let ay = DVector::from_fn(y.len(), |i, _| alpha[i] * y[i]);
    alpha.sum() - 0.25 * (ay.transpose() * g * &ay)[(0, 0)]
}

/// Best feasible point of the dual by enumerating every active-set pattern:
/// each coordinate is pinned at 0, pinned at C, or left free, and the free
/// block is solved from the stationarity system with the equality
/// multiplier. Exponential in m; callers keep m small.
pub fn enumerate_dual(g: &DMatrix<f64>, y: &[f64], c: f64) -> (DVector<f64>, f64) {
    let m = y.len();
    assert!(m <= 10, "enumeration oracle is exponential in m");
    let mut best: Option<(DVector<f64>, f64)> = None;
    let slack = 1e-9 * c.max(1.0);
    let patterns = 3usize.pow(m as u32);
    for code in 0..patterns {
        let mut state = Vec::with_capacity(m);
        let mut rem = code;
        for _ in 0..m {
            state.push(rem % 3); // 0 = at zero, 1 = at C, 2 = free
            rem /= 3;
        }
        let free: Vec<usize> = (0..m).filter(|&i| state[i] == 2).collect();
        let mut alpha = DVector::zeros(m);
        for i in 0..m {
            if state[i] == 1 {
                alpha[i] = c;
            }
        }
        if free.is_empty() {
            let balance: f64 = (0..m).map(|i| y[i] * alpha[i]).sum();
            if balance.abs() > slack {
                continue;
            }
        } else {
            // unknowns: alpha_free then the equality multiplier mu;
            // stationarity: (1/2) y_i sum_j G_ij y_j a_j + mu y_i = 1
            let nf = free.len();
            let mut a = DMatrix::zeros(nf + 1, nf + 1);
            let mut b = DVector::zeros(nf + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = 0.5 * y[i] * g[(i, j)] * y[j];
                }
                a[(r, nf)] = y[i];
                let fixed: f64 = (0..m)
                    .filter(|&j| state[j] == 1)
                    .map(|j| g[(i, j)] * y[j] * c)
                    .sum();
                b[r] = 1.0 - 0.5 * y[i] * fixed;
            }
            for (s, &j) in free.iter().enumerate() {
                a[(nf, s)] = y[j];
            }
            let fixed_balance: f64 = (0..m)
                .filter(|&j| state[j] == 1)
                .map(|j| y[j] * c)
                .sum();
            b[nf] = -fixed_balance;
            let svd = a.svd(true, true);
            let sol = match svd.solve(&b, 1e-12) {
                Ok(s) => s,
                Err(_) => continue,
            };
            // reject patterns whose stationarity system is inconsistent
            let resid = {
                let mut full = DMatrix::zeros(nf + 1, nf + 1);
                for (r, &i) in free.iter().enumerate() {
                    for (s, &j) in free.iter().enumerate() {
                        full[(r, s)] = 0.5 * y[i] * g[(i, j)] * y[j];
                    }
                    full[(r, nf)] = y[i];
                }
                for (s, &j) in free.iter().enumerate() {
                    full[(nf, s)] = y[j];
                }
                (&full * &sol - &b).norm()
            };
            if resid > 1e-6 * (1.0 + b.norm()) {
                continue;
            }
            let mut ok = true;
            for (r, &i) in free.iter().enumerate() {
                let v = sol[r];
                if !(-slack..=c + slack).contains(&v) {
                    ok = false;
                    break;
                }
                alpha[i] = v.clamp(0.0, c);
            }
            if !ok {
                continue;
            }
        }
        let value = dual_value(g, y, &alpha);
        let better = match &best {
            None => true,
            Some((_, bv)) => value > *bv,
        };
        if better {
            best = Some((alpha, value));
        }
    }
    best.expect("alpha = 0 is always feasible")
}

/// Primal soft-margin objective z'z-penalized: |zeta|^2 + w * sum hinge,
/// with w the per-observation hinge weight.
pub fn primal_value(
    z: &DMatrix<f64>,
    y: &[f64],
    zeta: &DVector<f64>,
    t: f64,
    w: f64,
) -> f64 {
    let mut hinge = 0.0;
    for i in 0..y.len() {
        let margin = z.row(i).transpose().dot(zeta) - t;
        hinge += (1.0 - y[i] * margin).max(0.0);
    }
    zeta.norm_squared() + w * hinge
}

/// Projected subgradient descent on the primal, decaying step; returns
/// (zeta, t, objective). Slow but independent of the dual machinery.
pub fn primal_subgradient(
    z: &DMatrix<f64>,
    y: &[f64],
    w: f64,
    steps: usize,
    step0: f64,
) -> (DVector<f64>, f64, f64) {
    let (n, p) = (z.nrows(), z.ncols());
    let mut zeta = DVector::zeros(p);
    let mut t = 0.0;
    let mut best = (zeta.clone(), t, primal_value(z, y, &zeta, t, w));
    for it in 1..=steps {
        let mut gz = 2.0 * &zeta;
        let mut gt = 0.0;
        for i in 0..n {
            let margin = z.row(i).transpose().dot(&zeta) - t;
            if 1.0 - y[i] * margin > 0.0 {
                gz -= w * y[i] * z.row(i).transpose();
                gt += w * y[i];
            }
        }
        let eta = step0 / (it as f64).sqrt();
        zeta -= eta * gz;
        t -= eta * gt;
        let v = primal_value(z, y, &zeta, t, w);
        if v < best.2 {
            best = (zeta.clone(), t, v);
        }
    }
    best
}

/// Hinge-optimal intercept for a fixed normal by scanning all breakpoints
/// of the piecewise-linear objective in t.
pub fn best_intercept(margins: &DVector<f64>, y: &[f64]) -> (f64, f64) {
    let cost = |t: f64| -> f64 {
        margins
            .iter()
            .zip(y)
            .map(|(&s, &yi)| (1.0 - yi * (s - t)).max(0.0))
            .sum()
    };
    let mut cands: Vec<f64> = Vec::with_capacity(2 * y.len());
    for (&s, &yi) in margins.iter().zip(y) {
        cands.push(s - yi); // margin exactly 1: kink of this term
        cands.push(s);
    }
    let mut best_t = cands[0];
    let mut best_v = cost(best_t);
    for &t in &cands[1..] {
        let v = cost(t);
        if v < best_v {
            best_v = v;
            best_t = t;
        }
    }
    (best_t, best_v)
}
