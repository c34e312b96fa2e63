use crate::decomposition::AlgoParams;
use crate::network::Generator;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSolution {
    /// `(p, q)`.
    pub x: [f64; 2],
    pub value: f64,
}

/// Generator objective: cost, multiplier terms, `nu/2` proximal term and (with
/// targets) the `rho_pq` target penalty.
pub fn gen_value(
    g: &Generator,
    lam: [f64; 2],
    prev: [f64; 2],
    targets: Option<[f64; 2]>,
    params: &AlgoParams,
    x: [f64; 2],
) -> f64 {
    let [p, q] = x;
    let mut val = g.cost(p) + lam[0] * p + lam[1] * q;
    val += 0.5 * params.nu * (sq(p - prev[0]) + sq(q - prev[1]));
    if let Some([pc, qc]) = targets {
        val += params.effective_rho_pq() * (sq(p - pc) + sq(q - qc));
    }
    val
}

/// Minimises [`gen_value`] over the dispatch box.
///
/// Targets are used only by [`Variant::A3`](crate::decomposition::Variant::A3).
pub fn gen_subproblem(
    g: &Generator,
    lam: [f64; 2],
    prev: [f64; 2],
    targets: Option<[f64; 2]>,
    params: &AlgoParams,
) -> Result<GenSolution> {
    let rho = if targets.is_some() {
        params.effective_rho_pq()
    } else {
        0.0
    };
    let [pc, qc] = targets.unwrap_or([0.0; 2]);
    let curv_p = 2.0 * g.c2 + params.nu + 2.0 * rho;
    let curv_q = params.nu + 2.0 * rho;
    for curvature in [curv_p, curv_q] {
        if !(curvature > 0.0) {
            return Err(Error::NonconvexQuadratic {
                gen: g.id,
                curvature,
            });
        }
    }
    let p = (params.nu * prev[0] + 2.0 * rho * pc - g.c1 - lam[0]) / curv_p;
    let q = (params.nu * prev[1] + 2.0 * rho * qc - lam[1]) / curv_q;
    let x = [p.max(g.p_min).min(g.p_max), q.max(g.q_min).min(g.q_max)];
    Ok(GenSolution {
        x,
        value: gen_value(g, lam, prev, targets, params, x),
    })
}

fn sq(x: f64) -> f64 {
    x * x
}
