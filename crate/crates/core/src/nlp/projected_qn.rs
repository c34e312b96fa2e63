//! Box-constrained projected quasi-Newton minimiser.
//!
//! Bertsekas-style two-metric projection: variables in the epsilon-active set
//! take a diagonally scaled projected-gradient step, the free variables take a
//! Newton-type step from a dense Hessian model restricted to the free block.
//! Small problems rebuild the model every iteration from finite differences
//! of the gradient; larger ones use damped BFGS. Steps follow the projection
//! arc with an Armijo backtrack.

use alloc::vec;
use alloc::vec::Vec;

/// Dense symmetric Hessian model, row-major.
#[derive(Debug, Clone)]
pub(crate) struct HessianModel {
    n: usize,
    b: Vec<f64>,
    fresh: bool,
    finite_difference: bool,
}

/// Largest dimension for which the model is rebuilt by finite differences.
pub(crate) const FD_MAX_DIM: usize = 400;

impl HessianModel {
    pub(crate) fn identity(n: usize) -> Self {
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            b[i * n + i] = 1.0;
        }
        Self {
            n,
            b,
            fresh: true,
            finite_difference: false,
        }
    }

    /// Picks finite differences up to [`FD_MAX_DIM`] and BFGS beyond.
    pub(crate) fn for_dim(n: usize) -> Self {
        let mut model = Self::identity(n);
        model.finite_difference = n <= FD_MAX_DIM;
        model
    }

    pub(crate) fn reset(&mut self) {
        let fd = self.finite_difference;
        *self = Self::identity(self.n);
        self.finite_difference = fd;
    }

    /// Forward differences of the gradient, symmetrised.
    fn rebuild<F>(
        &mut self,
        fun: &mut F,
        x: &[f64],
        g: &[f64],
        probe: &mut [f64],
        g_probe: &mut [f64],
    ) where
        F: FnMut(&[f64], &mut [f64]) -> f64,
    {
        let n = self.n;
        probe.copy_from_slice(x);
        for j in 0..n {
            let h = FD_STEP * x[j].abs().max(1.0);
            probe[j] = x[j] + h;
            let h = probe[j] - x[j];
            fun(probe, g_probe);
            probe[j] = x[j];
            for i in 0..n {
                self.b[i * n + j] = (g_probe[i] - g[i]) / h;
            }
        }
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (self.b[i * n + j] + self.b[j * n + i]);
                self.b[i * n + j] = avg;
                self.b[j * n + i] = avg;
            }
        }
        self.fresh = false;
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.b[i * self.n + j]
    }

    /// Damped BFGS update (Powell), keeps the model positive definite.
    fn update(&mut self, s: &[f64], y: &[f64]) {
        let n = self.n;
        let ss: f64 = s.iter().map(|v| v * v).sum();
        if !(ss > 0.0) {
            return;
        }
        let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
        if self.fresh {
            // Shanno-Phua scaling of the initial model.
            let yy: f64 = y.iter().map(|v| v * v).sum();
            if sy > 0.0 && yy > 0.0 {
                let gamma = yy / sy;
                for v in self.b.iter_mut() {
                    *v *= gamma;
                }
            }
            self.fresh = false;
        }
        let mut bs = vec![0.0; n];
        for i in 0..n {
            let row = &self.b[i * n..(i + 1) * n];
            bs[i] = row.iter().zip(s).map(|(a, b)| a * b).sum();
        }
        let sbs: f64 = s.iter().zip(&bs).map(|(a, b)| a * b).sum();
        if !(sbs > 0.0) {
            return;
        }
        let theta = if sy >= 0.2 * sbs {
            1.0
        } else {
            0.8 * sbs / (sbs - sy)
        };
        let r: Vec<f64> = y
            .iter()
            .zip(&bs)
            .map(|(yi, bsi)| theta * yi + (1.0 - theta) * bsi)
            .collect();
        let sr: f64 = s.iter().zip(&r).map(|(a, b)| a * b).sum();
        if !(sr > 0.0) {
            return;
        }
        for i in 0..n {
            for j in 0..n {
                self.b[i * n + j] += r[i] * r[j] / sr - bs[i] * bs[j] / sbs;
            }
        }
    }
}

const FD_STEP: f64 = 1.5e-8;

/// Solves `(A + shift I) d = rhs` for the submatrix of the model indexed by
/// `free`. Returns `false` when the factorisation breaks down.
fn cholesky_solve(model: &HessianModel, free: &[usize], shift: f64, rhs: &mut [f64]) -> bool {
    let m = free.len();
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut sum = model.at(free[i], free[j]);
            if i == j {
                sum += shift;
            }
            for k in 0..j {
                sum -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return false;
                }
                l[i * m + i] = libm::sqrt(sum);
            } else {
                l[i * m + j] = sum / l[j * m + j];
            }
        }
    }
    for i in 0..m {
        let mut sum = rhs[i];
        for k in 0..i {
            sum -= l[i * m + k] * rhs[k];
        }
        rhs[i] = sum / l[i * m + i];
    }
    for i in (0..m).rev() {
        let mut sum = rhs[i];
        for k in i + 1..m {
            sum -= l[k * m + i] * rhs[k];
        }
        rhs[i] = sum / l[i * m + i];
    }
    rhs.iter().all(|v| v.is_finite())
}

/// Like [`cholesky_solve`], but adds a growing multiple of the identity
/// until the free block is positive definite.
fn solve_free_block(model: &HessianModel, free: &[usize], rhs: &mut [f64]) -> bool {
    let original: Vec<f64> = rhs.to_vec();
    if cholesky_solve(model, free, 0.0, rhs) {
        return true;
    }
    let scale = free
        .iter()
        .map(|&i| model.at(i, i).abs())
        .fold(0.0f64, f64::max)
        .max(1e-8);
    let mut shift = 1e-10 * scale;
    for _ in 0..40 {
        rhs.copy_from_slice(&original);
        if cholesky_solve(model, free, shift, rhs) {
            return true;
        }
        shift *= 10.0;
    }
    rhs.copy_from_slice(&original);
    false
}

pub(crate) fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.max(lo).min(hi);
    }
}

/// Infinity norm of `x - P(x - g)`.
pub(crate) fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let step = (x[i] - g[i]).max(lower[i]).min(upper[i]);
        worst = worst.max((x[i] - step).abs());
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum InnerStatus {
    Converged,
    MaxIter,
    /// Line search could not make progress even along the steepest descent arc.
    Stalled,
    /// Objective fell below the unboundedness threshold.
    Unbounded,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct InnerOutcome {
    pub status: InnerStatus,
    pub iterations: usize,
    pub pg_norm: f64,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

/// Minimises `fun` over the box starting from `x` (assumed feasible).
/// `fun` returns the value and writes the gradient.
pub(crate) fn minimize_box<F>(
    mut fun: F,
    x: &mut [f64],
    lower: &[f64],
    upper: &[f64],
    omega: f64,
    max_iter: usize,
    unbounded_below: f64,
    model: &mut HessianModel,
) -> InnerOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut f = fun(x, &mut g);
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut free = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    let mut s = vec![0.0; n];
    let mut y = vec![0.0; n];

    let mut iterations = 0;
    loop {
        let pg = projected_gradient_norm(x, &g, lower, upper);
        if pg <= omega {
            return InnerOutcome {
                status: InnerStatus::Converged,
                iterations,
                pg_norm: pg,
            };
        }
        if f < unbounded_below {
            return InnerOutcome {
                status: InnerStatus::Unbounded,
                iterations,
                pg_norm: pg,
            };
        }
        if iterations >= max_iter {
            return InnerOutcome {
                status: InnerStatus::MaxIter,
                iterations,
                pg_norm: pg,
            };
        }
        iterations += 1;
        if model.finite_difference {
            model.rebuild(&mut fun, x, &g, &mut trial, &mut g_trial);
        }

        let eps = pg.min(1e-3);
        let mut accepted = false;
        for attempt in 0..2 {
            if attempt == 1 {
                model.reset();
            }
            free.clear();
            for i in 0..n {
                let at_lower = x[i] <= lower[i] + eps && g[i] > 0.0;
                let at_upper = x[i] >= upper[i] - eps && g[i] < 0.0;
                if at_lower || at_upper {
                    let diag = model.at(i, i);
                    let diag = if diag > 1e-12 { diag } else { 1.0 };
                    d[i] = -g[i] / diag;
                } else {
                    free.push(i);
                }
            }
            rhs.clear();
            rhs.extend(free.iter().map(|&i| -g[i]));
            if !solve_free_block(model, &free, &mut rhs) {
                model.reset();
                rhs.clear();
                rhs.extend(free.iter().map(|&i| -g[i]));
            }
            for (k, &i) in free.iter().enumerate() {
                d[i] = rhs[k];
            }

            let mut alpha = 1.0;
            for _ in 0..MAX_BACKTRACKS {
                for i in 0..n {
                    trial[i] = x[i] + alpha * d[i];
                }
                project(&mut trial, lower, upper);
                let slope: f64 = (0..n).map(|i| g[i] * (trial[i] - x[i])).sum();
                if !(slope < 0.0) {
                    break;
                }
                let f_trial = fun(&trial, &mut g_trial);
                // The slack absorbs rounding once the decrease falls below machine precision.
                let slack = 8.0 * f64::EPSILON * f.abs();
                let sufficient = f_trial <= f + ARMIJO * slope + slack;
                // Below the rounding level of f, judge the step by the gradient instead.
                // The caller scales f to unit gradient, so its terms are O(1).
                let lost_in_rounding = !sufficient
                    && -slope <= 1e3 * f64::EPSILON * f.abs().max(1.0)
                    && projected_gradient_norm(&trial, &g_trial, lower, upper) < 0.5 * pg;
                if f_trial.is_finite() && (sufficient || lost_in_rounding) {
                    for i in 0..n {
                        s[i] = trial[i] - x[i];
                        y[i] = g_trial[i] - g[i];
                    }
                    if !model.finite_difference {
                        model.update(&s, &y);
                    }
                    x.copy_from_slice(&trial);
                    g.copy_from_slice(&g_trial);
                    f = f_trial;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            let pg = projected_gradient_norm(x, &g, lower, upper);
            return InnerOutcome {
                status: InnerStatus::Stalled,
                iterations,
                pg_norm: pg,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamped_quadratic() {
        let mut x = [0.5];
        let mut model = HessianModel::identity(1);
        let out = minimize_box(
            |x, g| {
                g[0] = 2.0 * (x[0] - 3.0);
                (x[0] - 3.0) * (x[0] - 3.0)
            },
            &mut x,
            &[0.0],
            &[1.0],
            1e-10,
            100,
            -1e12,
            &mut model,
        );
        assert_eq!(out.status, InnerStatus::Converged);
        assert_eq!(x[0], 1.0);
    }

    #[test]
    fn rosenbrock_unconstrained_and_boxed() {
        let rosen = |x: &[f64], g: &mut [f64]| {
            let a = 1.0 - x[0];
            let b = x[1] - x[0] * x[0];
            g[0] = -2.0 * a - 400.0 * x[0] * b;
            g[1] = 200.0 * b;
            a * a + 100.0 * b * b
        };
        let inf = f64::INFINITY;
        let mut x = [-1.2, 1.0];
        let mut model = HessianModel::identity(2);
        let out = minimize_box(
            rosen,
            &mut x,
            &[-inf, -inf],
            &[inf, inf],
            1e-9,
            500,
            -1e12,
            &mut model,
        );
        assert_eq!(out.status, InnerStatus::Converged);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6);

        // With x0 <= 0.5 the constrained optimum sits on the bound.
        let mut x = [-1.2, 1.0];
        let mut model = HessianModel::identity(2);
        let out = minimize_box(
            rosen,
            &mut x,
            &[-inf, -inf],
            &[0.5, inf],
            1e-9,
            500,
            -1e12,
            &mut model,
        );
        assert_eq!(out.status, InnerStatus::Converged);
        assert_eq!(x[0], 0.5);
        assert!((x[1] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn detects_unbounded() {
        let mut x = [0.0];
        let mut model = HessianModel::identity(1);
        let out = minimize_box(
            |x, g| {
                g[0] = -1.0;
                -x[0]
            },
            &mut x,
            &[0.0],
            &[f64::INFINITY],
            1e-9,
            10_000,
            -1e12,
            &mut model,
        );
        assert_eq!(out.status, InnerStatus::Unbounded);
    }
}
