use alloc::vec::Vec;

use super::dual::{dual_exact, DualMode};
use super::local::{local_update, Block};
use super::{golden_min, grid_local_minima, ToyProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMode {
    /// Each block update is solved to global optimality by brute force.
    Global,
    /// Each block update runs the local NLP engine from `start` every time.
    Local { start: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubgradientMode {
    Optimal,
    Suboptimal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodOptions {
    /// Both residuals below this value stop the method.
    pub tol: f64,
    pub max_iter: usize,
    /// Iterations without a new best residual before giving up.
    pub stall_window: usize,
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 10_000,
            stall_window: 2_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyStatus {
    Converged,
    MaxIter,
    Oscillating,
    /// The Lagrangian has no minimiser; the dual is `-inf`.
    Unbounded,
}

impl ToyStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ToyStatus::Converged => "converged",
            ToyStatus::MaxIter => "max_iter",
            ToyStatus::Oscillating => "oscillating",
            ToyStatus::Unbounded => "unbounded",
        }
    }
}

/// State after iteration `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyStep {
    pub k: usize,
    pub x: [f64; 2],
    pub lambda: f64,
    /// `|x1 - x2|`
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `f(x)`
    pub objective: f64,
    /// `D(lambda)` at the multiplier the step was computed from (subgradient only).
    pub dual_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyRun {
    pub status: ToyStatus,
    pub iterations: usize,
    pub steps: Vec<ToyStep>,
}

impl ToyRun {
    pub fn last(&self) -> Option<&ToyStep> {
        self.steps.last()
    }

    /// `f(x)` at the final iterate.
    pub fn value(&self) -> f64 {
        self.last().map_or(f64::NAN, |s| s.objective)
    }
}

/// Tracks the best residual seen and flags long stretches without progress.
struct StallGuard {
    best: f64,
    since: usize,
    window: usize,
}

impl StallGuard {
    fn new(window: usize) -> Self {
        Self {
            best: f64::INFINITY,
            since: 0,
            window,
        }
    }

    fn stalled(&mut self, residual: f64) -> bool {
        if residual < self.best {
            self.best = residual;
            self.since = 0;
        } else {
            self.since += 1;
        }
        self.since >= self.window
    }
}

/// `argmin_{x1 in [-3, 3]} f1(x1) + lin x1 + (w / 2) (x1 - anchor)^2`.
fn x1_global(p: ToyProblem, lin: f64, w: f64, anchor: f64) -> f64 {
    let obj = |x: f64| p.f1(x) + lin * x + 0.5 * w * (x - anchor) * (x - anchor);
    let mut best = (f64::NAN, f64::INFINITY);
    for &(a, b) in p.x1_pieces() {
        let found = golden_min(obj, a, b);
        if found.1 < best.1 {
            best = found;
        }
    }
    best.0
}

/// `argmin_{x2 in X2 ∩ [-3, 3]} f2(x2) + lin x2 + (w / 2) (x2 - anchor)^2`.
fn x2_global(p: ToyProblem, lin: f64, w: f64, anchor: f64) -> f64 {
    let obj = |x: f64| p.f2(x) + lin * x + 0.5 * w * (x - anchor) * (x - anchor);
    let (lo, hi) = p.x2_domain();
    let mut best = (f64::NAN, f64::INFINITY);
    for found in grid_local_minima(obj, lo, hi) {
        if found.1 < best.1 {
            best = found;
        }
    }
    best.0
}

fn update(p: ToyProblem, mode: SolveMode, block: Block, lin: f64, w: f64, anchor: f64) -> f64 {
    match (mode, block) {
        (SolveMode::Global, Block::X1) => x1_global(p, lin, w, anchor),
        (SolveMode::Global, Block::X2) => x2_global(p, lin, w, anchor),
        (SolveMode::Local { start }, Block::X1) => local_update(p, block, lin, w, anchor, start[0]),
        (SolveMode::Local { start }, Block::X2) => local_update(p, block, lin, w, anchor, start[1]),
    }
}

fn finish(steps: Vec<ToyStep>, status: ToyStatus) -> ToyRun {
    ToyRun {
        status,
        iterations: steps.len(),
        steps,
    }
}

/// ADMM on `L_rho`: `x1`, then `x2`, then `lambda += rho (x1 - x2)`, from
/// `x2 = x2_start` and `lambda = 0`. The dual residual is `|x2 - x2_prev|`.
pub fn toy_admm(
    p: ToyProblem,
    rho: f64,
    x2_start: f64,
    mode: SolveMode,
    opts: &MethodOptions,
) -> ToyRun {
    let mut x2 = x2_start;
    let mut lam = 0.0;
    let mut steps = Vec::new();
    let mut guard = StallGuard::new(opts.stall_window);
    for k in 1..=opts.max_iter {
        let x1 = update(p, mode, Block::X1, lam, rho, x2);
        let x2_next = update(p, mode, Block::X2, -lam, rho, x1);
        lam += rho * (x1 - x2_next);
        let r = (x1 - x2_next).abs();
        let s = (x2_next - x2).abs();
        x2 = x2_next;
        steps.push(ToyStep {
            k,
            x: [x1, x2],
            lambda: lam,
            primal_residual: r,
            dual_residual: s,
            objective: p.objective(x1, x2),
            dual_value: None,
        });
        if r < opts.tol && s < opts.tol {
            return finish(steps, ToyStatus::Converged);
        }
        if guard.stalled(r.max(s)) {
            return finish(steps, ToyStatus::Oscillating);
        }
    }
    finish(steps, ToyStatus::MaxIter)
}

/// Jacobi proximal method: both blocks are updated from `x^k` with a
/// `(nu / 2) |x - x^k|^2` term, then `lambda += nu (x1 - x2)`. The dual
/// residual is `|x^{k+1} - x^k|`.
pub fn toy_proximal(p: ToyProblem, nu: f64, x_start: [f64; 2], opts: &MethodOptions) -> ToyRun {
    let mut x = x_start;
    let mut lam = 0.0;
    let mut steps = Vec::new();
    let mut guard = StallGuard::new(opts.stall_window);
    for k in 1..=opts.max_iter {
        let x1 = x1_global(p, lam, nu, x[0]);
        let x2 = x2_global(p, -lam, nu, x[1]);
        lam += nu * (x1 - x2);
        let r = (x1 - x2).abs();
        let s = libm::hypot(x1 - x[0], x2 - x[1]);
        x = [x1, x2];
        steps.push(ToyStep {
            k,
            x,
            lambda: lam,
            primal_residual: r,
            dual_residual: s,
            objective: p.objective(x1, x2),
            dual_value: None,
        });
        if r < opts.tol && s < opts.tol {
            return finish(steps, ToyStatus::Converged);
        }
        if guard.stalled(r.max(s)) {
            return finish(steps, ToyStatus::Oscillating);
        }
    }
    finish(steps, ToyStatus::MaxIter)
}

/// Fixed-step subgradient ascent on the classical dual, `lambda += step (x1 - x2)`
/// at a minimiser returned by [`dual_exact`]. The dual residual is `|lambda^{k+1} - lambda^k|`.
/// Stops once the primal residual is below `opts.tol`.
pub fn toy_subgradient(
    p: ToyProblem,
    step: f64,
    lambda_start: f64,
    mode: SubgradientMode,
    opts: &MethodOptions,
) -> ToyRun {
    let dual_mode = match mode {
        SubgradientMode::Optimal => DualMode::Classical,
        SubgradientMode::Suboptimal => DualMode::Suboptimal { rho: 0.0 },
    };
    let mut lam = lambda_start;
    let mut steps = Vec::new();
    for k in 1..=opts.max_iter {
        let d = dual_exact(p, lam, dual_mode);
        let Some(&[x1, x2]) = d.argmins.first() else {
            return finish(steps, ToyStatus::Unbounded);
        };
        let g = x1 - x2;
        let before = lam;
        lam += step * g;
        steps.push(ToyStep {
            k,
            x: [x1, x2],
            lambda: lam,
            primal_residual: g.abs(),
            dual_residual: (lam - before).abs(),
            objective: p.objective(x1, x2),
            dual_value: Some(d.value),
        });
        if g.abs() < opts.tol {
            return finish(steps, ToyStatus::Converged);
        }
    }
    finish(steps, ToyStatus::MaxIter)
}
