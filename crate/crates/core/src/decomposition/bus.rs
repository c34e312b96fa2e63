use crate::decomposition::{AlgoParams, Variant};
use crate::network::Bus;
use crate::{Error, Result};

/// Quadratic weights of the bus problem: `rho` on consensus with the branch
/// duplicates, `nu` on the proximal term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusWeights {
    pub rho: f64,
    pub nu: f64,
}

impl BusWeights {
    /// A1 uses the proximal term only; A2 and A3 the consensus penalty only.
    pub fn for_params(params: &AlgoParams) -> Self {
        match params.variant {
            Variant::A1 => Self {
                rho: 0.0,
                nu: params.nu,
            },
            Variant::A2 | Variant::A3 => Self {
                rho: params.rho_vth,
                nu: 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusSolution {
    /// `(v, theta)`.
    pub x: [f64; 2],
    pub value: f64,
}

/// Bus objective. `lam_ends[k]` and `dups[k]` are the consensus multipliers
/// `(lam_v, lam_th)` and branch duplicates `(v, theta)` of the k-th incident end.
pub fn bus_value(
    bus: &Bus,
    lam: [f64; 2],
    lam_ends: &[[f64; 2]],
    dups: &[[f64; 2]],
    prev: [f64; 2],
    w: BusWeights,
    x: [f64; 2],
) -> f64 {
    let [v, th] = x;
    let mut val =
        v * v * (-lam[0] * bus.g_sh + lam[1] * bus.b_sh) - lam[0] * bus.p_d - lam[1] * bus.q_d;
    for (l, d) in lam_ends.iter().zip(dups) {
        val += l[0] * v + l[1] * th;
        val += 0.5 * w.rho * (sq(v - d[0]) + sq(th - d[1]));
    }
    val + 0.5 * w.nu * (sq(v - prev[0]) + sq(th - prev[1]))
}

/// Closed-form minimiser of [`bus_value`] (the bus problem has no bounds).
pub fn bus_subproblem(
    bus: &Bus,
    lam: [f64; 2],
    lam_ends: &[[f64; 2]],
    dups: &[[f64; 2]],
    prev: [f64; 2],
    w: BusWeights,
) -> Result<BusSolution> {
    let n = lam_ends.len() as f64;
    let base = w.rho * n + w.nu;
    let a = 2.0 * (-lam[0] * bus.g_sh + lam[1] * bus.b_sh) + base;
    for curvature in [a, base] {
        if !(curvature > 0.0) {
            return Err(Error::NonCoerciveBus {
                bus: bus.id,
                curvature,
            });
        }
    }
    let (mut sv, mut sth, mut lv, mut lth) = (0.0, 0.0, 0.0, 0.0);
    for (l, d) in lam_ends.iter().zip(dups) {
        sv += d[0];
        sth += d[1];
        lv += l[0];
        lth += l[1];
    }
    let v = (w.rho * sv - lv + w.nu * prev[0]) / a;
    let th = (w.rho * sth - lth + w.nu * prev[1]) / base;
    let x = [v, th];
    Ok(BusSolution {
        x,
        value: bus_value(bus, lam, lam_ends, dups, prev, w, x),
    })
}

fn sq(x: f64) -> f64 {
    x * x
}
