//! Component subproblems of the modified dual.
//!
//! Every generator, bus and branch owns a copy of the variables it touches.
//! Branches carry duplicates of their end-bus voltages and angles, tied to
//! the bus copies by consensus constraints; power balance couples generators,
//! branch ends and bus shunts. Relaxing both families with multipliers splits
//! the OPF into independent problems:
//!
//! - [`gen_subproblem`]: a box-constrained convex quadratic, solved in closed form.
//! - [`bus_subproblem`]: an unconstrained quadratic in `(v, theta)`, closed form.
//! - [`line_subproblem`]: a small nonconvex NLP in the four duplicated
//!   voltages/angles, solved locally by [`crate::nlp`].

mod bus;
mod generator;
mod line;

use alloc::vec;
use alloc::vec::Vec;

use crate::network::{End, Network};
use crate::{Error, Result};

pub use bus::{bus_subproblem, bus_value, BusSolution, BusWeights};
pub use generator::{gen_subproblem, gen_value, GenSolution};
pub use line::{line_subproblem, line_value, LineProblem, LineSolution};

/// Coordination variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Proximal terms on every component, one parallel round per iteration.
    A1,
    /// Consensus penalty between bus and branch copies; two rounds per iteration.
    A2,
    /// A2 plus penalties pulling powers towards the balance targets.
    A3,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::A1 => "A1",
            Variant::A2 => "A2",
            Variant::A3 => "A3",
        }
    }
}

impl core::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a1" | "A1" => Ok(Variant::A1),
            "a2" | "A2" => Ok(Variant::A2),
            "a3" | "A3" => Ok(Variant::A3),
            _ => Err(Error::InvalidData {
                what: "variant".into(),
                reason: alloc::format!("{s:?} is not one of a1, a2, a3"),
            }),
        }
    }
}

/// Algorithm weights and step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgoParams {
    pub variant: Variant,
    /// Proximal weight.
    pub nu: f64,
    /// Power-target penalty (A3 only).
    pub rho_pq: f64,
    /// Voltage/angle consensus penalty (A2, A3).
    pub rho_vth: f64,
    /// Step size of the power-balance multipliers.
    pub alpha_i: f64,
    /// Step size of the consensus multipliers.
    pub alpha_ij: f64,
    /// Stopping tolerance on the stacked residual norm.
    pub epsilon: f64,
}

impl AlgoParams {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("nu", self.nu),
            ("rho_pq", self.rho_pq),
            ("rho_vth", self.rho_vth),
            ("alpha_i", self.alpha_i),
            ("alpha_ij", self.alpha_ij),
        ];
        for (what, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidData {
                    what: what.into(),
                    reason: alloc::format!("must be finite and >= 0, got {w}"),
                });
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidData {
                what: "epsilon".into(),
                reason: alloc::format!("must be > 0, got {}", self.epsilon),
            });
        }
        Ok(())
    }

    /// The `rho_pq` actually applied: zero outside A3.
    pub(crate) fn effective_rho_pq(&self) -> f64 {
        if self.variant == Variant::A3 {
            self.rho_pq
        } else {
            0.0
        }
    }

    /// The `rho_vth` actually applied: zero for A1.
    pub(crate) fn effective_rho_vth(&self) -> f64 {
        if self.variant == Variant::A1 {
            0.0
        } else {
            self.rho_vth
        }
    }
}

/// Lagrange multipliers.
///
/// `lam_p`, `lam_q` are indexed by bus; `lam_v`, `lam_th` by branch end
/// ([`crate::network::Incidence::end_index`]: `2 * branch` for the from end,
/// `2 * branch + 1` for the to end).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSet {
    pub lam_p: Vec<f64>,
    pub lam_q: Vec<f64>,
    pub lam_v: Vec<f64>,
    pub lam_th: Vec<f64>,
}

impl MultiplierSet {
    pub fn zeros(net: &Network) -> Self {
        let (nb, ne) = (net.n_buses(), 2 * net.n_branches());
        Self {
            lam_p: vec![0.0; nb],
            lam_q: vec![0.0; nb],
            lam_v: vec![0.0; ne],
            lam_th: vec![0.0; ne],
        }
    }

    /// Total number of scalars (`2 |B| + 4 |L|`).
    pub fn len(&self) -> usize {
        self.lam_p.len() + self.lam_q.len() + self.lam_v.len() + self.lam_th.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stacked view `[lam_p, lam_q, lam_v, lam_th]`.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.lam_p
            .iter()
            .chain(&self.lam_q)
            .chain(&self.lam_v)
            .chain(&self.lam_th)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.lam_p
            .iter_mut()
            .chain(self.lam_q.iter_mut())
            .chain(self.lam_v.iter_mut())
            .chain(self.lam_th.iter_mut())
    }

    /// Euclidean norm of the stacked vector.
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.iter().map(|x| x * x).sum())
    }

    pub(crate) fn same_shape(&self, other: &Self) -> bool {
        self.lam_p.len() == other.lam_p.len()
            && self.lam_q.len() == other.lam_q.len()
            && self.lam_v.len() == other.lam_v.len()
            && self.lam_th.len() == other.lam_th.len()
    }
}

/// Branch-local variables: both directed flows and the end-bus duplicates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LineState {
    pub p_ij: f64,
    pub q_ij: f64,
    pub p_ji: f64,
    pub q_ji: f64,
    pub v_i: f64,
    pub th_i: f64,
    pub v_j: f64,
    pub th_j: f64,
}

impl LineState {
    /// `[0, 0, 0, 0, 1, 0, 1, 0]`.
    pub const FLAT: LineState = LineState {
        p_ij: 0.0,
        q_ij: 0.0,
        p_ji: 0.0,
        q_ji: 0.0,
        v_i: 1.0,
        th_i: 0.0,
        v_j: 1.0,
        th_j: 0.0,
    };

    pub fn flows(&self) -> [f64; 4] {
        [self.p_ij, self.q_ij, self.p_ji, self.q_ji]
    }

    /// `[v_i, th_i, v_j, th_j]`.
    pub fn voltages(&self) -> [f64; 4] {
        [self.v_i, self.th_i, self.v_j, self.th_j]
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.p_ij, self.q_ij, self.p_ji, self.q_ji, self.v_i, self.th_i, self.v_j, self.th_j,
        ]
    }

    /// Voltage and angle duplicate held at the given end.
    pub fn end_voltage(&self, end: End) -> (f64, f64) {
        match end {
            End::From => (self.v_i, self.th_i),
            End::To => (self.v_j, self.th_j),
        }
    }

    /// Directed flow leaving the given end.
    pub fn end_flow(&self, end: End) -> (f64, f64) {
        match end {
            End::From => (self.p_ij, self.q_ij),
            End::To => (self.p_ji, self.q_ji),
        }
    }
}

/// All duplicated primal variables, partitioned by component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentState {
    /// `(p, q)` per generator.
    pub gen: Vec<[f64; 2]>,
    pub line: Vec<LineState>,
    /// `(v, theta)` per bus.
    pub bus: Vec<[f64; 2]>,
}

impl ComponentState {
    /// Buses at `(1, 0)`, generators at `(box midpoint, 0)`, branches flat.
    pub fn flat(net: &Network) -> Self {
        Self {
            gen: net
                .generators()
                .iter()
                .map(|g| [0.5 * (g.p_min + g.p_max), 0.0])
                .collect(),
            line: vec![LineState::FLAT; net.n_branches()],
            bus: vec![[1.0, 0.0]; net.n_buses()],
        }
    }

    pub(crate) fn check(&self, net: &Network) -> Result<()> {
        if self.gen.len() != net.n_generators()
            || self.line.len() != net.n_branches()
            || self.bus.len() != net.n_buses()
        {
            return Err(Error::DimensionMismatch(alloc::format!(
                "component state has {} generators, {} branches, {} buses; network has {}, {}, {}",
                self.gen.len(),
                self.line.len(),
                self.bus.len(),
                net.n_generators(),
                net.n_branches(),
                net.n_buses()
            )));
        }
        Ok(())
    }
}

/// Power targets of the A3 penalties.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTargets {
    /// `(pc, qc)` per generator.
    pub gen: Vec<[f64; 2]>,
    /// `(pc_ij, qc_ij, pc_ji, qc_ji)` per branch.
    pub line: Vec<[f64; 4]>,
}

/// Balance targets: for each generator and branch end, the injection that
/// would close its bus balance given every other component's current value.
pub fn coupling_targets(net: &Network, state: &ComponentState) -> CouplingTargets {
    let mut gen = vec![[0.0; 2]; net.n_generators()];
    let mut line = vec![[0.0; 4]; net.n_branches()];
    for (i, bus) in net.buses().iter().enumerate() {
        let v2 = state.bus[i][0] * state.bus[i][0];
        let (mut gp, mut gq) = (0.0, 0.0);
        for &g in net.bus_gens(i) {
            gp += state.gen[g][0];
            gq += state.gen[g][1];
        }
        let (mut fp, mut fq) = (0.0, 0.0);
        for e in net.bus_ends(i) {
            let (p, q) = state.line[e.branch].end_flow(e.end);
            fp += p;
            fq += q;
        }
        for &g in net.bus_gens(i) {
            let others_p = gp - state.gen[g][0];
            let others_q = gq - state.gen[g][1];
            gen[g] = [
                -others_p + fp + bus.g_sh * v2 + bus.p_d,
                -others_q + fq - bus.b_sh * v2 + bus.q_d,
            ];
        }
        for e in net.bus_ends(i) {
            let (p, q) = state.line[e.branch].end_flow(e.end);
            let pc = -(fp - p) + gp - bus.p_d - bus.g_sh * v2;
            let qc = -(fq - q) + gq - bus.q_d + bus.b_sh * v2;
            let slot = 2 * e.end.slot();
            line[e.branch][slot] = pc;
            line[e.branch][slot + 1] = qc;
        }
    }
    CouplingTargets { gen, line }
}

/// Multipliers seen by generator `g`.
pub(crate) fn gen_multipliers(net: &Network, lam: &MultiplierSet, g: usize) -> [f64; 2] {
    let i = net.gen_bus(g);
    [lam.lam_p[i], lam.lam_q[i]]
}

/// Per-end multipliers and the branch-side duplicates at bus `i`.
pub(crate) fn bus_inputs(
    net: &Network,
    lam: &MultiplierSet,
    lines: &[LineState],
    i: usize,
) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let ends = net.bus_ends(i);
    let lam_ends = ends
        .iter()
        .map(|e| [lam.lam_v[e.end_index()], lam.lam_th[e.end_index()]])
        .collect();
    let dups = ends
        .iter()
        .map(|e| {
            let (v, th) = lines[e.branch].end_voltage(e.end);
            [v, th]
        })
        .collect();
    (lam_ends, dups)
}

/// Evaluates the modified Lagrangian at `next`, with proximal anchors and bus
/// values from `prev`, and (for A3) the given targets. When `next` holds the
/// subproblem minimisers for `(lam, prev)` this is the modified dual value.
pub fn modified_dual_value(
    net: &Network,
    lam: &MultiplierSet,
    prev: &ComponentState,
    next: &ComponentState,
    targets: Option<&CouplingTargets>,
    params: &AlgoParams,
) -> Result<f64> {
    prev.check(net)?;
    next.check(net)?;
    let targets = if params.variant == Variant::A3 {
        targets
    } else {
        None
    };
    let mut total = 0.0;
    for (g, gen) in net.generators().iter().enumerate() {
        let t = targets.map(|t| t.gen[g]);
        total += gen_value(
            gen,
            gen_multipliers(net, lam, g),
            prev.gen[g],
            t,
            params,
            next.gen[g],
        );
    }
    let weights = BusWeights::for_params(params);
    for (i, bus) in net.buses().iter().enumerate() {
        let (lam_ends, dups) = bus_inputs(net, lam, &next.line, i);
        total += bus_value(
            bus,
            [lam.lam_p[i], lam.lam_q[i]],
            &lam_ends,
            &dups,
            prev.bus[i],
            weights,
            next.bus[i],
        );
    }
    for l in 0..net.n_branches() {
        let input = LineProblem::from_network(net, l, lam, prev, targets.map(|t| t.line[l]));
        total += line_value(&input, params, &next.line[l]);
    }
    Ok(total)
}
