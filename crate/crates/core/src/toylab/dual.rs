use alloc::vec::Vec;

use super::{golden_min, grid_local_minima, ToyProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualMode {
    /// `inf_x f(x) + lam (x1 - x2)`.
    Classical,
    /// Adds `(rho / 2) (x1 - x2)^2` to the Lagrangian.
    Augmented { rho: f64 },
    /// Picks the local minimiser with the second-lowest value instead of the
    /// global one (`rho = 0` for the classical Lagrangian).
    Suboptimal { rho: f64 },
}

impl DualMode {
    fn rho(self) -> f64 {
        match self {
            DualMode::Classical => 0.0,
            DualMode::Augmented { rho } | DualMode::Suboptimal { rho } => rho,
        }
    }
}

/// A dual value and the minimisers attaining it. An unbounded Lagrangian is
/// reported as `-inf` with no minimisers.
#[derive(Debug, Clone, PartialEq)]
pub struct DualValue {
    pub value: f64,
    pub argmins: Vec<[f64; 2]>,
}

impl DualValue {
    pub fn is_unbounded(&self) -> bool {
        self.value == f64::NEG_INFINITY
    }

    /// `x1 - x2` at the first minimiser, a subgradient of the dual.
    pub fn subgradient(&self) -> Option<f64> {
        self.argmins.first().map(|x| x[0] - x[1])
    }
}

const TIE: f64 = 1e-6;

/// Brute-force (augmented) dual value at `lam`.
///
/// For each convex piece of `f1` the `x1` minimisation is done by golden
/// section, leaving a function of `x2` that is gridded over `X2 ∩ [-3, 3]`
/// and polished around every discrete local minimum.
pub fn dual_exact(p: ToyProblem, lam: f64, mode: DualMode) -> DualValue {
    let rho = mode.rho();
    if rho == 0.0 && p == ToyProblem::AppendixB {
        // -3|x1| + lam x1 is unbounded below for every lam.
        return DualValue {
            value: f64::NEG_INFINITY,
            argmins: Vec::new(),
        };
    }
    let (lo, hi) = p.x2_domain();
    let pieces = p.x1_pieces();
    let mut candidates: Vec<([f64; 2], f64)> = Vec::new();
    for &(a, b) in pieces {
        let inner = |x2: f64| {
            golden_min(
                |x1| p.f1(x1) + lam * x1 + 0.5 * rho * (x1 - x2) * (x1 - x2),
                a,
                b,
            )
        };
        let fixed = (rho == 0.0).then(|| inner(0.0));
        let x1_of = |x2: f64| fixed.unwrap_or_else(|| inner(x2));
        let phi = |x2: f64| x1_of(x2).1 + p.f2(x2) - lam * x2;
        for (x2, value) in grid_local_minima(phi, lo, hi) {
            let x1 = x1_of(x2).0;
            let interior_edge = |e: f64| e > -super::BOX && e < super::BOX && x1 == e;
            if pieces.len() > 1 && (interior_edge(a) || interior_edge(b)) {
                // f1 has a concave kink there, so this is not a local minimum.
                continue;
            }
            candidates.push(([x1, x2], value));
        }
    }
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
    let Some(&(_, best)) = candidates.first() else {
        return DualValue {
            value: f64::NEG_INFINITY,
            argmins: Vec::new(),
        };
    };
    let target = match mode {
        DualMode::Suboptimal { .. } => candidates
            .iter()
            .map(|c| c.1)
            .find(|&v| v > best + TIE)
            .unwrap_or(best),
        _ => best,
    };
    let argmins = candidates
        .iter()
        .filter(|c| (c.1 - target).abs() <= TIE)
        .map(|c| c.0)
        .collect();
    DualValue {
        value: target,
        argmins,
    }
}

/// `(lam, D(lam))` on the given multipliers.
pub fn dual_curve(p: ToyProblem, mode: DualMode, lambdas: &[f64]) -> Vec<(f64, f64)> {
    lambdas
        .iter()
        .map(|&l| (l, dual_exact(p, l, mode).value))
        .collect()
}

/// Maximises the dual over `[lo, hi]`: a 200-interval grid, then golden
/// section inside the best bracket.
pub fn maximize_dual(p: ToyProblem, mode: DualMode, lo: f64, hi: f64) -> (f64, DualValue) {
    const N: usize = 200;
    let h = (hi - lo) / N as f64;
    let mut best_k = 0;
    let mut best_v = f64::NEG_INFINITY;
    for k in 0..=N {
        let v = dual_exact(p, lo + k as f64 * h, mode).value;
        if v > best_v {
            best_v = v;
            best_k = k;
        }
    }
    let a = lo + best_k.saturating_sub(1) as f64 * h;
    let b = (lo + (best_k + 1) as f64 * h).min(hi);
    let (lam, _) = golden_min(|l| -dual_exact(p, l, mode).value, a, b);
    (lam, dual_exact(p, lam, mode))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classical_dual_of_sextic_has_a_kink_with_two_minimisers() {
        let p = ToyProblem::AppendixA;
        let (lam, d) = maximize_dual(p, DualMode::Classical, -0.5, 0.5);
        let kink = libm::pow(core::f64::consts::LN_2 / 2.0, 2.0);
        assert!((lam - kink).abs() < 1e-6, "lam {lam}");
        assert!((d.value - 1.766997).abs() < 1e-6, "d {}", d.value);
        assert_eq!(d.argmins.len(), 2);
        assert!(d.value < p.p_star());
    }

    #[test]
    fn absolute_value_toy_has_no_classical_dual() {
        for lam in [-10.0, 0.0, 3.0] {
            assert!(dual_exact(ToyProblem::AppendixB, lam, DualMode::Classical).is_unbounded());
        }
        assert!(
            !dual_exact(ToyProblem::AppendixB, 0.0, DualMode::Augmented { rho: 2.0 })
                .is_unbounded()
        );
    }

    #[test]
    fn suboptimal_dual_picks_the_other_end_point() {
        let p = ToyProblem::AppendixA;
        let opt = dual_exact(p, 0.0, DualMode::Classical);
        let sub = dual_exact(p, 0.0, DualMode::Suboptimal { rho: 0.0 });
        assert!(sub.value > opt.value);
        assert_eq!(opt.argmins[0][1], p.x2_domain().0);
        assert_eq!(sub.argmins[0][1], p.x2_domain().1);
    }
}
