//! Box-constrained dual solver shared by the linear and kernel fits.
//!
//! The problem solved here is
//!
//!   maximize  1'a - (1/4) (a.y)' G (a.y)
//!   s.t.      0 <= a_i <= C,   y'a = 0
//!
//! with G positive semidefinite and y in {-1,+1}. The 1/4 coefficient comes
//! from a primal whose quadratic term carries coefficient 1 rather than 1/2;
//! it must not be rescaled, otherwise the recovered normal w = (1/2) sum
//! a_i y_i z_i would be off by a factor of two.
//!
//! The solver is sequential minimal optimization over maximal violating
//! pairs: pick the worst KKT-violating coordinate pair, solve the
//! two-variable subproblem in closed form, repeat until the violation drops
//! below tolerance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Floor for the curvature of the two-variable subproblem.
const CURVATURE_FLOOR: f64 = 1e-12;

/// Relative slack used to classify a coordinate as sitting on a box bound.
const BOUND_SLACK: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct DualProblem {
    g: DMatrix<f64>,
    y: Vec<f64>,
    c: f64,
}

impl DualProblem {
    /// Validated constructor: G square and symmetric (1e-8), labels exactly
    /// +-1 with both signs present, box bound positive.
    pub fn new(g: DMatrix<f64>, y: Vec<f64>, c: f64) -> Result<Self> {
        let p = Self::new_unchecked(g, y, c)?;
        let m = p.m();
        for i in 0..m {
            for j in (i + 1)..m {
                if (p.g[(i, j)] - p.g[(j, i)]).abs() > 1e-8 {
                    return Err(Error::BadSpec(format!(
                        "gram matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let pos = p.y.iter().any(|&v| v > 0.0);
        let neg = p.y.iter().any(|&v| v < 0.0);
        if !(pos && neg) {
            return Err(Error::InfeasibleLabels);
        }
        Ok(p)
    }

    /// Shape-checked constructor that skips the label-sign test. Useful for
    /// evaluating the objective at arbitrary label patterns; `solve_dual`
    /// still refuses single-sign problems.
    pub fn new_unchecked(g: DMatrix<f64>, y: Vec<f64>, c: f64) -> Result<Self> {
        if g.nrows() != g.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "gram matrix is {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        if g.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} gram rows but {} labels",
                g.nrows(),
                y.len()
            )));
        }
        if y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::BadSpec("labels must be exactly +1 or -1".into()));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::BadSpec("box bound must be positive".into()));
        }
        Ok(DualProblem { g, y, c })
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    pub fn box_bound(&self) -> f64 {
        self.c
    }
}

/// Stopping parameters for the solver.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Maximum KKT violation accepted at exit.
    pub tol: f64,
    /// Iteration cap; defaults to 100 * m^2 when `None`.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: DVector<f64>,
    pub objective: f64,
    /// Final maximal KKT violation m(a) - M(a).
    pub kkt_violation: f64,
    pub iterations: usize,
    /// Indices with a_i > 0, in row order.
    pub support: Vec<usize>,
    /// False when the iteration cap was hit; the best iterate is returned.
    pub converged: bool,
}

/// Dual objective 1'a - (1/4)(a.y)'G(a.y). Feasibility of `alpha` is not
/// required.
pub fn dual_objective(p: &DualProblem, alpha: &DVector<f64>) -> f64 {
    let m = p.m();
    assert_eq!(alpha.len(), m, "alpha length mismatch");
    let mut ay = DVector::zeros(m);
    for i in 0..m {
        ay[i] = alpha[i] * p.y[i];
    }
    let quad = (&p.g * &ay).dot(&ay);
    alpha.sum() - 0.25 * quad
}

/// Gradient of the dual objective: 1 - (1/2) y . (G (a.y)).
pub fn dual_gradient(p: &DualProblem, alpha: &DVector<f64>) -> DVector<f64> {
    let m = p.m();
    assert_eq!(alpha.len(), m, "alpha length mismatch");
    let mut ay = DVector::zeros(m);
    for i in 0..m {
        ay[i] = alpha[i] * p.y[i];
    }
    let gay = &p.g * &ay;
    DVector::from_fn(m, |i, _| 1.0 - 0.5 * p.y[i] * gay[i])
}

pub fn solve_dual(p: &DualProblem) -> Result<DualSolution> {
    solve_dual_with(p, &SolverOptions::default())
}

pub fn solve_dual_with(p: &DualProblem, opts: &SolverOptions) -> Result<DualSolution> {
    solve_dual_traced(p, opts, None)
}

/// Full solver entry point. When `trace` is given, the dual objective is
/// appended after every pair update (tests use this to check monotone
/// ascent).
pub fn solve_dual_traced(
    p: &DualProblem,
    opts: &SolverOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<DualSolution> {
    let m = p.m();
    let pos = p.y.iter().any(|&v| v > 0.0);
    let neg = p.y.iter().any(|&v| v < 0.0);
    if !(pos && neg) {
        return Err(Error::InfeasibleLabels);
    }
    if !(opts.tol > 0.0) {
        return Err(Error::BadSpec("solver tolerance must be positive".into()));
    }
    let max_iter = opts.max_iter.unwrap_or(100usize.saturating_mul(m * m));
    let c = p.c;
    let y = &p.y;

    // h = (1/2)(y y') . G, flattened column-major; h is symmetric so columns
    // double as rows. Minimizing f = (1/2) a'Ha - 1'a is the problem above.
    let mut h = vec![0.0f64; m * m];
    for j in 0..m {
        let base = j * m;
        for i in 0..m {
            h[base + i] = 0.5 * y[i] * y[j] * p.g[(i, j)];
        }
    }

    let mut alpha = vec![0.0f64; m];
    let mut grad = vec![-1.0f64; m]; // gradient of f at a = 0
    if let Some(t) = trace.as_deref_mut() {
        t.push(0.0);
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut violation;
    loop {
        // maximal violating pair: i maximizes -y g over I_up, j minimizes
        // it over I_low
        let mut up_val = f64::NEG_INFINITY;
        let mut up_idx = usize::MAX;
        let mut low_val = f64::INFINITY;
        let mut low_idx = usize::MAX;
        for t in 0..m {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if in_up && v > up_val {
                up_val = v;
                up_idx = t;
            }
            if in_low && v < low_val {
                low_val = v;
                low_idx = t;
            }
        }
        if up_idx == usize::MAX || low_idx == usize::MAX {
            violation = 0.0;
            converged = true;
            break;
        }
        violation = up_val - low_val;
        if violation <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let (i, j) = (up_idx, low_idx);
        let hi = &h[i * m..(i + 1) * m];
        let hj = &h[j * m..(j + 1) * m];
        let (mut ai, mut aj) = (alpha[i], alpha[j]);
        let (old_ai, old_aj) = (ai, aj);
        if y[i] != y[j] {
            let quad = (hi[i] + hj[j] + 2.0 * hi[j]).max(CURVATURE_FLOOR);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (hi[i] + hj[j] - 2.0 * hi[j]).max(CURVATURE_FLOOR);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let dai = ai - old_ai;
        let daj = aj - old_aj;
        for t in 0..m {
            grad[t] += hi[t] * dai + hj[t] * daj;
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(objective_from_grad(&alpha, &grad));
        }
    }

    let objective = objective_from_grad(&alpha, &grad);
    let support: Vec<usize> = (0..m).filter(|&i| alpha[i] > 0.0).collect();
    Ok(DualSolution {
        alpha: DVector::from_vec(alpha),
        objective,
        kkt_violation: violation,
        iterations,
        support,
        converged,
    })
}

/// D(a) = (1/2) 1'a - (1/2) a'grad_f, valid while grad_f = Ha - 1 is
/// maintained. Avoids an O(m^2) pass.
fn objective_from_grad(alpha: &[f64], grad: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut ag = 0.0;
    for (a, g) in alpha.iter().zip(grad.iter()) {
        s += a;
        ag += a * g;
    }
    0.5 * s - 0.5 * ag
}

/// Intercept of the separating rule from margins s_i = z_i'w: free support
/// vectors satisfy y_i (s_i - t) = 1 exactly, so t averages s_i - y_i over
/// them. Without free support vectors, t is the midpoint of the interval
/// admitted by the bound constraints.
pub fn recover_intercept(
    alpha: &DVector<f64>,
    margins: &DVector<f64>,
    y: &[f64],
    c: f64,
) -> Result<f64> {
    let m = y.len();
    assert_eq!(alpha.len(), m, "alpha length mismatch");
    assert_eq!(margins.len(), m, "margin length mismatch");
    let slack = BOUND_SLACK * c;
    if alpha.iter().all(|&a| a <= slack) {
        return Err(Error::NoSupportVectors);
    }
    let mut acc = 0.0;
    let mut free = 0usize;
    for i in 0..m {
        if alpha[i] > slack && alpha[i] < c - slack {
            acc += margins[i] - y[i];
            free += 1;
        }
    }
    if free > 0 {
        return Ok(acc / free as f64);
    }
    // all support vectors at the box: bracket t from the KKT inequalities
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..m {
        let at_zero = alpha[i] <= slack;
        if y[i] > 0.0 {
            if at_zero {
                hi = hi.min(margins[i] - 1.0);
            } else {
                lo = lo.max(margins[i] - 1.0);
            }
        } else if at_zero {
            lo = lo.max(margins[i] + 1.0);
        } else {
            hi = hi.min(margins[i] + 1.0);
        }
    }
    Ok(match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_point() -> DualProblem {
        DualProblem::new(DMatrix::identity(2, 2), vec![1.0, -1.0], 10.0).unwrap()
    }

    #[test]
    fn two_point_identity_has_closed_form() {
        // equality constraint forces a1 = a2 = a; maximizing 2a - a^2/2
        // gives a = 2 with objective 2
        let p = two_point();
        let sol = solve_dual(&p).unwrap();
        assert!(sol.converged);
        assert_relative_eq!(sol.alpha[0], 2.0, epsilon = 1e-8);
        assert_relative_eq!(sol.alpha[1], 2.0, epsilon = 1e-8);
        assert_relative_eq!(sol.objective, 2.0, epsilon = 1e-8);
        assert_eq!(sol.support, vec![0, 1]);
    }

    #[test]
    fn zero_gram_saturates_balanced_box() {
        let m = 6;
        let y: Vec<f64> = (0..m).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let p = DualProblem::new(DMatrix::zeros(m, m), y, 0.75).unwrap();
        let sol = solve_dual(&p).unwrap();
        for i in 0..m {
            assert_relative_eq!(sol.alpha[i], 0.75, epsilon = 1e-12);
        }
        assert_relative_eq!(sol.objective, 0.75 * m as f64, epsilon = 1e-9);
    }

    #[test]
    fn solution_is_feasible() {
        let g = DMatrix::from_row_slice(
            4,
            4,
            &[
                2.0, 0.5, 0.1, 0.0, 0.5, 1.5, 0.2, 0.1, 0.1, 0.2, 1.0, 0.3, 0.0, 0.1, 0.3, 2.5,
            ],
        );
        let y = vec![1.0, 1.0, -1.0, -1.0];
        let p = DualProblem::new(g, y.clone(), 1.3).unwrap();
        let sol = solve_dual(&p).unwrap();
        let mut balance = 0.0;
        for i in 0..4 {
            assert!(sol.alpha[i] >= -1e-12 && sol.alpha[i] <= 1.3 + 1e-12);
            balance += sol.alpha[i] * y[i];
        }
        assert!(balance.abs() < 1e-10);
        assert!(sol.kkt_violation <= 1e-6);
    }

    #[test]
    fn objective_allows_infeasible_evaluation_points() {
        // all-positive labels are fine for evaluation only
        let m = 5;
        let p = DualProblem::new_unchecked(DMatrix::identity(m, m), vec![1.0; m], 1.0).unwrap();
        let alpha = DVector::from_element(m, 1.0);
        let expect = m as f64 - m as f64 / 4.0;
        assert_relative_eq!(dual_objective(&p, &alpha), expect, epsilon = 1e-12);
        assert!(matches!(solve_dual(&p), Err(Error::InfeasibleLabels)));
    }

    #[test]
    fn validated_constructor_rejects_single_sign() {
        let r = DualProblem::new(DMatrix::identity(3, 3), vec![1.0, 1.0, 1.0], 1.0);
        assert!(matches!(r, Err(Error::InfeasibleLabels)));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let g = DMatrix::from_row_slice(3, 3, &[3.0, 1.0, 0.5, 1.0, 2.0, 0.2, 0.5, 0.2, 1.5]);
        let p = DualProblem::new(g, vec![1.0, -1.0, 1.0], 2.0).unwrap();
        let alpha = DVector::from_vec(vec![0.3, 0.9, 0.4]);
        let grad = dual_gradient(&p, &alpha);
        let h = 1e-5;
        for i in 0..3 {
            let mut up = alpha.clone();
            let mut dn = alpha.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (dual_objective(&p, &up) - dual_objective(&p, &dn)) / (2.0 * h);
            assert_relative_eq!(grad[i], fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn ascent_trace_is_monotone() {
        let g = DMatrix::from_row_slice(
            4,
            4,
            &[
                4.0, 1.0, 0.2, 0.3, 1.0, 3.0, 0.1, 0.2, 0.2, 0.1, 2.0, 0.5, 0.3, 0.2, 0.5, 1.0,
            ],
        );
        let p = DualProblem::new(g, vec![1.0, -1.0, 1.0, -1.0], 5.0).unwrap();
        let mut trace = Vec::new();
        let sol = solve_dual_traced(&p, &SolverOptions::default(), Some(&mut trace)).unwrap();
        assert!(sol.converged);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "objective decreased: {} -> {}", w[0], w[1]);
        }
        assert_relative_eq!(*trace.last().unwrap(), sol.objective, epsilon = 1e-12);
    }

    #[test]
    fn growing_box_never_hurts_the_optimum() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.4, 0.1, 0.4, 3.0]);
        let y = vec![1.0, -1.0, -1.0];
        let tight = solve_dual(&DualProblem::new(g.clone(), y.clone(), 0.4).unwrap()).unwrap();
        let loose = solve_dual(&DualProblem::new(g, y, 0.8).unwrap()).unwrap();
        assert!(loose.objective >= tight.objective - 1e-9);
    }

    #[test]
    fn iteration_cap_returns_best_iterate_with_flag() {
        let g = DMatrix::from_row_slice(
            4,
            4,
            &[
                4.0, 1.0, 0.2, 0.3, 1.0, 3.0, 0.1, 0.2, 0.2, 0.1, 2.0, 0.5, 0.3, 0.2, 0.5, 1.0,
            ],
        );
        let p = DualProblem::new(g, vec![1.0, -1.0, 1.0, -1.0], 5.0).unwrap();
        let opts = SolverOptions {
            tol: 1e-12,
            max_iter: Some(1),
        };
        let sol = solve_dual_with(&p, &opts).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 1);
        assert!(sol.objective >= 0.0); // one step from zero cannot go below D(0) = 0
    }

    #[test]
    fn intercept_of_symmetric_pair_is_zero() {
        let p = two_point();
        let sol = solve_dual(&p).unwrap();
        // w = (1/2)(a1 z1 - a2 z2) with z = e1, e2; margins s_i = z_i'w
        let margins = DVector::from_vec(vec![1.0, -1.0]);
        let t = recover_intercept(&sol.alpha, &margins, p.labels(), p.box_bound()).unwrap();
        assert_relative_eq!(t, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn intercept_tracks_margin_shift() {
        let p = two_point();
        let sol = solve_dual(&p).unwrap();
        let shift = 0.37;
        let margins = DVector::from_vec(vec![1.0 + shift, -1.0 + shift]);
        let t = recover_intercept(&sol.alpha, &margins, p.labels(), p.box_bound()).unwrap();
        assert_relative_eq!(t, shift, epsilon = 1e-8);
    }

    #[test]
    fn intercept_needs_support_vectors() {
        let alpha = DVector::zeros(2);
        let margins = DVector::from_vec(vec![1.0, -1.0]);
        let r = recover_intercept(&alpha, &margins, &[1.0, -1.0], 1.0);
        assert!(matches!(r, Err(Error::NoSupportVectors)));
    }
}
