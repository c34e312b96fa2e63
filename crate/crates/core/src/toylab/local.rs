//! Single-variable updates solved by the local NLP engine from a fixed start.

use crate::nlp::{self, NlpProblem, SolveOptions};

use super::ToyProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Block {
    X1,
    X2,
}

/// `f_block(x) + lin x + (w / 2) (x - anchor)^2`, subject to the `x2`
/// constraint for the second block.
struct Update {
    p: ToyProblem,
    block: Block,
    lin: f64,
    w: f64,
    anchor: f64,
}

impl NlpProblem for Update {
    fn dim(&self) -> usize {
        1
    }

    fn bounds(&self, lower: &mut [f64], upper: &mut [f64]) {
        lower[0] = f64::NEG_INFINITY;
        upper[0] = f64::INFINITY;
    }

    fn n_ineq(&self) -> usize {
        match self.block {
            Block::X2 if self.p.x2_constraint(0.0).is_some() => 1,
            _ => 0,
        }
    }

    fn objective(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let x = x[0];
        let (f, df) = match self.block {
            Block::X1 => (self.p.f1(x), self.p.df1(x)),
            Block::X2 => (self.p.f2(x), self.p.df2(x)),
        };
        grad[0] = df + self.lin + self.w * (x - self.anchor);
        f + self.lin * x + 0.5 * self.w * (x - self.anchor) * (x - self.anchor)
    }

    fn constraints(&self, x: &[f64], c: &mut [f64]) {
        if let Some(v) = self.p.x2_constraint(x[0]) {
            c[0] = v;
        }
    }

    fn constraints_jac_t(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        // d/dx (1 - 2 exp(-2 x^2)) = 8 x exp(-2 x^2)
        out[0] += w[0] * 8.0 * x[0] * libm::exp(-2.0 * x[0] * x[0]);
    }
}

pub(crate) fn local_update(
    p: ToyProblem,
    block: Block,
    lin: f64,
    w: f64,
    anchor: f64,
    start: f64,
) -> f64 {
    let problem = Update {
        p,
        block,
        lin,
        w,
        anchor,
    };
    nlp::solve(&problem, &[start], &SolveOptions::subproblem(1e-10)).x[0]
}
