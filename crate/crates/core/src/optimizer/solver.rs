//! Null-space augmented-Lagrangian solver for [`CycleProblem`].
//!
//! Linear equalities are eliminated exactly: `z = z_p + N w` with `A N = 0`.
//! Inequalities are handled by a Powell-Hestenes-Rockafellar outer loop whose
//! subproblems are minimized by a damped Gauss-Newton iteration in `w`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use super::problem::{CycleProblem, InequalityKind};
use super::OptimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    /// Accepted inequality violation in native units (m, m/s^2).
    pub feasibility_tolerance: f64,
    /// Accepted complementarity gap in scaled units.
    pub complementarity_tolerance: f64,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_outer_iterations: 200,
            max_inner_iterations: 60,
            feasibility_tolerance: 1e-7,
            complementarity_tolerance: 1e-6,
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            max_penalty: 1e8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub objective: f64,
    pub max_equality_residual: f64,
    pub max_inequality_violation: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    /// Seconds; excluded from any determinism comparison.
    pub wall_time: f64,
}

/// Exact parametrization of `{z : A z = b}`.
#[derive(Debug, Clone)]
pub struct NullSpace {
    pub particular: DVector<f64>,
    pub basis: DMatrix<f64>,
}

impl NullSpace {
    pub fn compute(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<NullSpace, OptimError> {
        let (m, nv) = a.shape();
        if m == 0 {
            return Ok(NullSpace { particular: DVector::zeros(nv), basis: DMatrix::identity(nv, nv) });
        }
        // row-normalize for conditioning; the solution set is unchanged
        let mut a = a.clone();
        let mut b = b.clone();
        for i in 0..m {
            let s = a.row(i).norm();
            if s == 0.0 {
                return Err(OptimError::InfeasibleSpec(format!("equality row {i} is empty")));
            }
            a.row_mut(i).scale_mut(1.0 / s);
            b[i] /= s;
        }
        let qr = a.transpose().qr();
        let r = qr.r();
        let diag_max = (0..m).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if (0..m).any(|i| r[(i, i)].abs() < 1e-10 * diag_max) {
            return Err(OptimError::InfeasibleSpec("equality constraints are rank deficient".into()));
        }
        let mut qt = DMatrix::identity(nv, nv);
        qr.q_tr_mul(&mut qt);
        let y = r
            .transpose()
            .solve_lower_triangular(&b)
            .ok_or_else(|| OptimError::InfeasibleSpec("singular equality system".into()))?;
        let q1 = qt.rows(0, m).transpose();
        let particular = q1 * y;
        let basis = qt.rows(m, nv - m).transpose();
        Ok(NullSpace { particular, basis })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn lift(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.particular + &self.basis * w
    }
}

// Inequality restricted to the null space: u(w) = base + jac * w.
struct ReducedInequality {
    base: nalgebra::Vector3<f64>,
    jac: DMatrix<f64>,
    kind: InequalityKind,
    scale: f64,
}

impl ReducedInequality {
    fn u(&self, w: &DVector<f64>) -> nalgebra::Vector3<f64> {
        let v = &self.jac * w;
        self.base + nalgebra::Vector3::new(v[0], v[1], v[2])
    }
}

struct Reduced {
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
    ineqs: Vec<ReducedInequality>,
}

impl Reduced {
    fn new(problem: &CycleProblem, space: &NullSpace) -> Self {
        let n = &space.basis;
        let zp = &space.particular;
        let hn = &problem.hessian * n;
        let hessian = n.transpose() * &hn;
        let hzp = &problem.hessian * zp;
        let linear = n.transpose() * (&hzp + &problem.linear);
        let constant = 0.5 * zp.dot(&hzp) + problem.linear.dot(zp) + problem.constant;
        let ineqs = problem
            .inequalities
            .iter()
            .map(|c| {
                let base = c.map.eval(zp.as_slice());
                let mut jac = DMatrix::zeros(3, n.ncols());
                for (k, coef) in c.map.row.iter().enumerate() {
                    if *coef != 0.0 {
                        for a in 0..3 {
                            let src = n.row(3 * k + a) * *coef;
                            let mut row = jac.row_mut(a);
                            row += src;
                        }
                    }
                }
                ReducedInequality { base, jac, kind: c.kind, scale: c.kind.scale() }
            })
            .collect();
        Self { hessian, linear, constant, ineqs }
    }

    fn objective(&self, w: &DVector<f64>) -> f64 {
        0.5 * w.dot(&(&self.hessian * w)) + self.linear.dot(w) + self.constant
    }

    fn merit(&self, w: &DVector<f64>, lambda: &[f64], rho: f64) -> f64 {
        let mut phi = self.objective(w);
        for (c, l) in self.ineqs.iter().zip(lambda) {
            let g = c.kind.value(&c.u(w)) / c.scale;
            let m = (l + rho * g).max(0.0);
            phi += (m * m - l * l) / (2.0 * rho);
        }
        phi
    }

    // Gradient and Gauss-Newton Hessian of the merit function.
    fn derivatives(&self, w: &DVector<f64>, lambda: &[f64], rho: f64) -> (DVector<f64>, DMatrix<f64>) {
        let mut grad = &self.hessian * w + &self.linear;
        let mut hess = self.hessian.clone();
        for (c, l) in self.ineqs.iter().zip(lambda) {
            let u = c.u(w);
            let g = c.kind.value(&u) / c.scale;
            let mu = l + rho * g;
            if mu <= 0.0 {
                continue;
            }
            let gu = c.kind.gradient(&u) / c.scale;
            let gw = c.jac.transpose() * DVector::from_column_slice(gu.as_slice());
            grad.axpy(mu, &gw, 1.0);
            hess.ger(rho, &gw, &gw, 1.0);
            let curv: Matrix3<f64> = c.kind.convex_curvature(&u) * (mu / c.scale);
            if curv.iter().any(|v| *v != 0.0) {
                let cj = DMatrix::from_column_slice(3, 3, curv.as_slice()) * &c.jac;
                hess += c.jac.transpose() * cj;
            }
        }
        (grad, hess)
    }

    fn violation(&self, w: &DVector<f64>) -> f64 {
        self.ineqs.iter().map(|c| c.kind.value(&c.u(w)).max(0.0)).fold(0.0, f64::max)
    }
}

/// Minimizes the cycle problem. Returns the flat jerk vector and a report.
///
/// `warm_start` is a previous jerk vector; it is projected onto the equality
/// manifold before use. Running out of iterations is reported through
/// `converged = false`, not as an error.
pub fn solve(
    problem: &CycleProblem,
    warm_start: Option<&[f64]>,
    options: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport), OptimError> {
    let started = Instant::now();
    let space = NullSpace::compute(&problem.eq_matrix, &problem.eq_rhs)?;
    let reduced = Reduced::new(problem, &space);
    let dim = space.dim();

    let mut w = match warm_start {
        Some(z) if z.len() == problem.n_vars() => {
            space.basis.transpose() * (DVector::from_column_slice(z) - &space.particular)
        }
        _ => DVector::zeros(dim),
    };
    let mut lambda = vec![0.0; reduced.ineqs.len()];
    let mut rho = options.initial_penalty;
    let mut prev_violation = f64::INFINITY;
    let mut inner_total = 0;
    let mut outer = 0;
    let mut converged = false;

    loop {
        outer += 1;
        let inner_ok = minimize_merit(&reduced, &mut w, &lambda, rho, options.max_inner_iterations, &mut inner_total);

        let mut scaled_violation: f64 = 0.0;
        let mut complementarity: f64 = 0.0;
        for (c, l) in reduced.ineqs.iter().zip(lambda.iter_mut()) {
            let g = c.kind.value(&c.u(&w)) / c.scale;
            *l = (*l + rho * g).max(0.0);
            scaled_violation = scaled_violation.max(g.max(0.0));
            complementarity = complementarity.max((-g).min(*l));
        }
        let violation = reduced.violation(&w);
        if inner_ok
            && violation <= options.feasibility_tolerance
            && complementarity <= options.complementarity_tolerance
        {
            converged = true;
            break;
        }
        if outer >= options.max_outer_iterations {
            break;
        }
        if scaled_violation > 0.25 * prev_violation {
            rho = (rho * options.penalty_growth).min(options.max_penalty);
        }
        prev_violation = scaled_violation;
    }

    let z = space.lift(&w);
    let z_vec = z.as_slice().to_vec();
    let max_equality_residual = problem.equality_residual(&z_vec).amax();
    let report = SolveReport {
        objective: reduced.objective(&w),
        max_equality_residual,
        max_inequality_violation: reduced.violation(&w),
        outer_iterations: outer,
        inner_iterations: inner_total,
        converged,
        wall_time: started.elapsed().as_secs_f64(),
    };
    Ok((z_vec, report))
}

// Damped Gauss-Newton on the merit function. Returns whether it reached stationarity.
fn minimize_merit(
    reduced: &Reduced,
    w: &mut DVector<f64>,
    lambda: &[f64],
    rho: f64,
    max_iter: usize,
    counter: &mut usize,
) -> bool {
    let scale = 1.0 + reduced.linear.amax();
    for _ in 0..max_iter {
        *counter += 1;
        let (grad, mut hess) = reduced.derivatives(w, lambda, rho);
        if grad.amax() <= 1e-10 * scale {
            return true;
        }
        let step = loop {
            match hess.clone().cholesky() {
                Some(ch) => break -ch.solve(&grad),
                None => {
                    let shift = 1e-12 * hess.diagonal().amax().max(1e-300);
                    for i in 0..hess.nrows() {
                        hess[(i, i)] += shift.max(hess[(i, i)].abs() * 1e-8);
                    }
                }
            }
        };
        let slope = grad.dot(&step);
        if slope >= 0.0 {
            return false;
        }
        let phi0 = reduced.merit(w, lambda, rho);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &*w + &step * t;
            if reduced.merit(&trial, lambda, rho) <= phi0 + 1e-4 * t * slope {
                *w = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no further decrease is representable
            return step.amax() <= 1e-9 * (1.0 + w.amax());
        }
        if (&step * t).amax() <= 1e-13 * (1.0 + w.amax()) {
            return true;
        }
    }
    false
}
