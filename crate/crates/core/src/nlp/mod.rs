//! Small dense nonlinear programming engine.
//!
//! Solves
//!
//! ```text
//! minimize f(x)  subject to  lower <= x <= upper,  h(x) = 0,  g(x) <= 0
//! ```
//!
//! to local optimality with a Powell-Hestenes-Rockafellar augmented Lagrangian
//! over the general constraints and a projected quasi-Newton method for the
//! bound-constrained inner problems. Everything is deterministic: the same
//! problem, start and options always produce bit-identical output.
//!
//! The objective is internally scaled by `1 / max(1, |grad f(x0)|_inf)`, and
//! the stationarity part of [`NlpResult::kkt_residual`] is measured on that
//! scaled problem. Constraint violation is always unscaled.

mod projected_qn;

use alloc::vec;
use alloc::vec::Vec;

use projected_qn::{minimize_box, project, projected_gradient_norm, HessianModel, InnerStatus};

/// A smooth NLP with dense evaluators.
pub trait NlpProblem {
    fn dim(&self) -> usize;

    /// Writes the variable bounds; infinite values are allowed.
    fn bounds(&self, lower: &mut [f64], upper: &mut [f64]);

    fn n_eq(&self) -> usize {
        0
    }

    fn n_ineq(&self) -> usize {
        0
    }

    /// Returns `f(x)` and writes its gradient.
    fn objective(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Writes the `n_eq` equality values followed by the `n_ineq` inequality values.
    fn constraints(&self, _x: &[f64], _c: &mut [f64]) {}

    /// Adds `J(x)^T w` to `out`, where `J` is the Jacobian of [`constraints`](Self::constraints).
    fn constraints_jac_t(&self, _x: &[f64], _w: &[f64], _out: &mut [f64]) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlpStatus {
    Converged,
    MaxIter,
    UnboundedBelow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlpResult {
    pub x: Vec<f64>,
    pub f: f64,
    /// Max of scaled stationarity, constraint violation and complementarity.
    pub kkt_residual: f64,
    pub constraint_violation: f64,
    pub status: NlpStatus,
    /// Multipliers of the equalities, in the unscaled objective's units.
    pub eq_multipliers: Vec<f64>,
    /// Multipliers (>= 0) of the inequalities, in the unscaled objective's units.
    pub ineq_multipliers: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub hessian: HessianKind,
}

/// Curvature model of the inner bound-constrained solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianKind {
    /// Damped BFGS; steps stay local, which keeps a start inside its basin.
    Bfgs,
    /// Forward differences of the gradient with a shifted Cholesky,
    /// used up to a few hundred variables. Faster on ill-conditioned problems.
    FiniteDifference,
}

impl SolveOptions {
    /// Defaults used for component subproblems.
    pub fn subproblem(tol: f64) -> Self {
        Self {
            tol,
            max_outer: 200,
            max_inner: 500,
            hessian: HessianKind::Bfgs,
        }
    }

    /// Defaults used for centralized solves.
    pub fn centralized(tol: f64) -> Self {
        Self {
            tol,
            max_outer: 200,
            max_inner: 5000,
            hessian: HessianKind::FiniteDifference,
        }
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self::subproblem(1e-8)
    }
}

const INITIAL_PENALTY: f64 = 10.0;
const PENALTY_GROWTH: f64 = 10.0;
const MAX_PENALTY: f64 = 1e12;
const UNBOUNDED_BELOW: f64 = -1e12;

/// Solves `problem` from `x0` (clipped into the bounds first).
pub fn solve<P: NlpProblem + ?Sized>(problem: &P, x0: &[f64], opts: &SolveOptions) -> NlpResult {
    let n = problem.dim();
    assert_eq!(x0.len(), n, "start vector has the wrong dimension");
    let n_eq = problem.n_eq();
    let n_in = problem.n_ineq();
    let m = n_eq + n_in;

    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    problem.bounds(&mut lower, &mut upper);
    let mut x = x0.to_vec();
    project(&mut x, &lower, &upper);

    let mut grad = vec![0.0; n];
    let f0 = problem.objective(&x, &mut grad);
    let g_max = grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = if g_max.is_finite() {
        1.0 / g_max.max(1.0)
    } else {
        1.0
    };

    let mut mult = vec![0.0; m];
    let mut mu = INITIAL_PENALTY;
    let mut c = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mut model = match opts.hessian {
        HessianKind::Bfgs => HessianModel::identity(n),
        HessianKind::FiniteDifference => HessianModel::for_dim(n),
    };
    let mut omega = (1e-2 * libm::sqrt(opts.tol)).max(opts.tol);
    let mut inner_total = 0;
    let mut prev_violation = f64::INFINITY;
    let mut last = Evaluation::default();
    let mut status = NlpStatus::MaxIter;
    let mut outer = 0;

    if m == 0 && !f0.is_finite() {
        return finish(
            problem,
            x,
            f64::NAN,
            f64::INFINITY,
            0.0,
            NlpStatus::MaxIter,
            mult,
            scale,
            n_eq,
            0,
            0,
        );
    }

    while outer < opts.max_outer {
        outer += 1;
        let merit = |xv: &[f64], gv: &mut [f64]| -> f64 {
            let mut cv = vec![0.0; m];
            let mut wv = vec![0.0; m];
            let fv = problem.objective(xv, gv);
            for gi in gv.iter_mut() {
                *gi *= scale;
            }
            let mut val = scale * fv;
            if m > 0 {
                problem.constraints(xv, &mut cv);
                val += al_terms(&cv, &mult, mu, n_eq, &mut wv);
                problem.constraints_jac_t(xv, &wv, gv);
            }
            val
        };
        let out = minimize_box(
            merit,
            &mut x,
            &lower,
            &upper,
            omega,
            opts.max_inner,
            UNBOUNDED_BELOW * scale,
            &mut model,
        );
        inner_total += out.iterations;
        if out.status == InnerStatus::Unbounded {
            status = NlpStatus::UnboundedBelow;
            break;
        }

        // Stationarity of the Lagrangian at the updated multipliers equals the
        // projected gradient of the merit function at the inner solution.
        let stationarity = out.pg_norm;
        let violation;
        let mut complementarity = 0.0f64;
        if m > 0 {
            problem.constraints(&x, &mut c);
            violation = constraint_violation(&c, n_eq);
            al_terms(&c, &mult, mu, n_eq, &mut w);
            mult.copy_from_slice(&w);
            for j in n_eq..m {
                complementarity = complementarity.max((-c[j]).min(mult[j]).abs());
            }
        } else {
            violation = 0.0;
        }
        last = Evaluation {
            stationarity,
            violation,
            complementarity,
        };
        if stationarity <= opts.tol && violation <= opts.tol && complementarity <= opts.tol {
            status = NlpStatus::Converged;
            break;
        }
        if m == 0 && out.status != InnerStatus::Converged {
            // Without general constraints the outer loop cannot help any further.
            break;
        }
        let infeasibility = violation.max(complementarity);
        if infeasibility > opts.tol && infeasibility > 0.25 * prev_violation {
            if mu < MAX_PENALTY {
                mu *= PENALTY_GROWTH;
                model.reset();
            }
        }
        prev_violation = infeasibility;
        omega = (omega * 0.1).max(opts.tol);
    }

    let kkt = last
        .stationarity
        .max(last.violation)
        .max(last.complementarity);
    let mut g_unused = vec![0.0; n];
    let f = problem.objective(&x, &mut g_unused);
    finish(
        problem,
        x,
        f,
        kkt,
        last.violation,
        status,
        mult,
        scale,
        n_eq,
        outer,
        inner_total,
    )
}

#[derive(Debug, Default, Clone, Copy)]
struct Evaluation {
    stationarity: f64,
    violation: f64,
    complementarity: f64,
}

/// Augmented Lagrangian penalty terms; writes the first-order multiplier
/// estimates (the weights of `J^T` in the merit gradient) into `w`.
fn al_terms(c: &[f64], mult: &[f64], mu: f64, n_eq: usize, w: &mut [f64]) -> f64 {
    let mut val = 0.0;
    for j in 0..c.len() {
        if j < n_eq {
            val += mult[j] * c[j] + 0.5 * mu * c[j] * c[j];
            w[j] = mult[j] + mu * c[j];
        } else {
            let shifted = (mult[j] + mu * c[j]).max(0.0);
            val += (shifted * shifted - mult[j] * mult[j]) / (2.0 * mu);
            w[j] = shifted;
        }
    }
    val
}

fn constraint_violation(c: &[f64], n_eq: usize) -> f64 {
    let mut v = 0.0f64;
    for (j, &cj) in c.iter().enumerate() {
        v = v.max(if j < n_eq { cj.abs() } else { cj.max(0.0) });
    }
    v
}

#[allow(clippy::too_many_arguments)]
fn finish<P: NlpProblem + ?Sized>(
    problem: &P,
    x: Vec<f64>,
    f: f64,
    kkt: f64,
    violation: f64,
    mut status: NlpStatus,
    mult: Vec<f64>,
    scale: f64,
    n_eq: usize,
    outer: usize,
    inner: usize,
) -> NlpResult {
    let _ = problem;
    if status != NlpStatus::UnboundedBelow && f < UNBOUNDED_BELOW {
        status = NlpStatus::UnboundedBelow;
    }
    let eq_multipliers = mult[..n_eq].iter().map(|v| v / scale).collect();
    let ineq_multipliers = mult[n_eq..].iter().map(|v| v / scale).collect();
    NlpResult {
        x,
        f,
        kkt_residual: kkt,
        constraint_violation: violation,
        status,
        eq_multipliers,
        ineq_multipliers,
        outer_iterations: outer,
        inner_iterations: inner,
    }
}

/// Projected-gradient stationarity of `problem` (unscaled) at `x` for the given
/// multipliers. Useful for checking a solution independently of the solver.
pub fn lagrangian_stationarity<P: NlpProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    eq_multipliers: &[f64],
    ineq_multipliers: &[f64],
) -> f64 {
    let n = problem.dim();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    problem.bounds(&mut lower, &mut upper);
    let mut g = vec![0.0; n];
    problem.objective(x, &mut g);
    let w: Vec<f64> = eq_multipliers
        .iter()
        .chain(ineq_multipliers)
        .copied()
        .collect();
    if !w.is_empty() {
        problem.constraints_jac_t(x, &w, &mut g);
    }
    projected_gradient_norm(x, &g, &lower, &upper)
}
