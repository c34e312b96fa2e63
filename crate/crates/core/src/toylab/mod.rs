//! Two-variable nonconvex examples with a single coupling `x1 = x2`.
//!
//! Both problems are small enough to evaluate their dual functions by brute
//! force, which makes them a solver-independent reference for the behaviour
//! of the decomposition methods: nonzero duality gaps, nonsmooth duals,
//! zero modified gaps and basin-dependent convergence of ADMM.

mod dual;
mod local;
mod methods;

pub use dual::{dual_curve, dual_exact, maximize_dual, DualMode, DualValue};
pub use methods::{
    toy_admm, toy_proximal, toy_subgradient, MethodOptions, SolveMode, SubgradientMode, ToyRun,
    ToyStatus, ToyStep,
};

/// Half-width of the square `[-3, 3]^2` searched by the brute-force oracles.
pub const BOX: f64 = 3.0;

/// Spacing of the `x2` grid used by the brute-force oracles.
pub const GRID_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyProblem {
    /// `2 x1^6 + x2^5 - 2 x2^2 + 2.5` with `1 - 2 exp(-2 x2^2) <= 0`.
    AppendixA,
    /// `-3 |x1| + (x2 - 1)^2`, no constraint on `x2`.
    AppendixB,
}

impl ToyProblem {
    pub fn f1(self, x1: f64) -> f64 {
        match self {
            ToyProblem::AppendixA => 2.0 * libm::pow(x1, 6.0),
            ToyProblem::AppendixB => -3.0 * x1.abs(),
        }
    }

    pub fn f2(self, x2: f64) -> f64 {
        match self {
            ToyProblem::AppendixA => libm::pow(x2, 5.0) - 2.0 * x2 * x2 + 2.5,
            ToyProblem::AppendixB => (x2 - 1.0) * (x2 - 1.0),
        }
    }

    pub fn df1(self, x1: f64) -> f64 {
        match self {
            ToyProblem::AppendixA => 12.0 * libm::pow(x1, 5.0),
            ToyProblem::AppendixB => {
                if x1 >= 0.0 {
                    -3.0
                } else {
                    3.0
                }
            }
        }
    }

    pub fn df2(self, x2: f64) -> f64 {
        match self {
            ToyProblem::AppendixA => 5.0 * libm::pow(x2, 4.0) - 4.0 * x2,
            ToyProblem::AppendixB => 2.0 * (x2 - 1.0),
        }
    }

    pub fn objective(self, x1: f64, x2: f64) -> f64 {
        self.f1(x1) + self.f2(x2)
    }

    /// Value of the `x2` constraint function (`<= 0` when feasible).
    pub fn x2_constraint(self, x2: f64) -> Option<f64> {
        match self {
            ToyProblem::AppendixA => Some(1.0 - 2.0 * libm::exp(-2.0 * x2 * x2)),
            ToyProblem::AppendixB => None,
        }
    }

    pub fn x2_feasible(self, x2: f64) -> bool {
        self.x2_constraint(x2).map_or(true, |c| c <= 0.0)
    }

    /// `X2` intersected with the search box. The end points are the largest
    /// floats that pass [`ToyProblem::x2_feasible`].
    pub fn x2_domain(self) -> (f64, f64) {
        match self {
            ToyProblem::AppendixA => {
                let mut edge = libm::sqrt(core::f64::consts::LN_2 / 2.0);
                while !self.x2_feasible(edge) {
                    edge = f64::from_bits(edge.to_bits() - 1);
                }
                (-edge, edge)
            }
            ToyProblem::AppendixB => (-BOX, BOX),
        }
    }

    /// Intervals on which `f1` is convex; their union is `[-3, 3]`.
    pub(crate) fn x1_pieces(self) -> &'static [(f64, f64)] {
        match self {
            ToyProblem::AppendixA => &[(-BOX, BOX)],
            ToyProblem::AppendixB => &[(-BOX, 0.0), (0.0, BOX)],
        }
    }

    /// Global minimiser of the primal problem.
    pub fn x_star(self) -> [f64; 2] {
        match self {
            ToyProblem::AppendixA => {
                let lo = self.x2_domain().0;
                [lo, lo]
            }
            ToyProblem::AppendixB => [2.5, 2.5],
        }
    }

    /// The other local minimiser of the primal problem.
    pub fn x_dagger(self) -> [f64; 2] {
        match self {
            ToyProblem::AppendixA => {
                let hi = self.x2_domain().1;
                [hi, hi]
            }
            ToyProblem::AppendixB => [-0.5, -0.5],
        }
    }

    pub fn p_star(self) -> f64 {
        let [a, b] = self.x_star();
        self.objective(a, b)
    }

    pub fn p_dagger(self) -> f64 {
        let [a, b] = self.x_dagger();
        self.objective(a, b)
    }

    pub fn name(self) -> &'static str {
        match self {
            ToyProblem::AppendixA => "appendixA",
            ToyProblem::AppendixB => "appendixB",
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimum of a unimodal `f` on `[a, b]`, end points included.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (a, b);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [a, b] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Local minima of `f` over `[lo, hi]`: grid at [`GRID_STEP`], then a golden
/// polish between the neighbours of every discrete local minimum.
pub(crate) fn grid_local_minima(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
) -> alloc::vec::Vec<(f64, f64)> {
    use alloc::vec::Vec;
    let n = libm::ceil((hi - lo) / GRID_STEP) as usize;
    let xs: Vec<f64> = (0..=n)
        .map(|k| {
            if k == n {
                hi
            } else {
                lo + k as f64 * GRID_STEP
            }
        })
        .collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut minima: Vec<(f64, f64)> = Vec::new();
    for k in 0..xs.len() {
        let left = if k > 0 { fs[k - 1] } else { f64::INFINITY };
        let right = if k + 1 < xs.len() {
            fs[k + 1]
        } else {
            f64::INFINITY
        };
        if fs[k] <= left && fs[k] <= right {
            let a = xs[k.saturating_sub(1)];
            let b = xs[(k + 1).min(xs.len() - 1)];
            let polished = golden_min(&f, a, b);
            let found = if polished.1 <= fs[k] {
                polished
            } else {
                (xs[k], fs[k])
            };
            // Flat stretches report the same minimum from neighbouring nodes.
            if !minima
                .iter()
                .any(|m| (m.0 - found.0).abs() < 10.0 * GRID_STEP)
            {
                minima.push(found);
            }
        }
    }
    minima
}
