use crate::decomposition::{AlgoParams, ComponentState, LineState, MultiplierSet, Variant};
use crate::formulation::{branch_flows, flows_and_jacobian};
use crate::network::{BranchCoeffs, Network};
use crate::nlp::{self, NlpProblem, NlpStatus, SolveOptions};

/// Data of one branch subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineProblem {
    pub coeffs: BranchCoeffs,
    /// `(v_min, v_max)` of the from and to bus.
    pub v_bounds: [(f64, f64); 2],
    /// Angle difference bounds `(min, max)` on `th_i - th_j`.
    pub angle_bounds: (f64, f64),
    pub s_max: Option<f64>,
    /// `(lam_p, lam_q)` of the from and to bus.
    pub lam_bus: [[f64; 2]; 2],
    /// `(lam_v, lam_th)` of the from and to end.
    pub lam_ends: [[f64; 2]; 2],
    /// Bus values `(v, theta)` of the from and to bus at the previous iterate.
    pub anchors: [[f64; 2]; 2],
    /// `(pc_ij, qc_ij, pc_ji, qc_ji)` for A3.
    pub targets: Option<[f64; 4]>,
    pub prev: LineState,
}

impl LineProblem {
    pub fn from_network(
        net: &Network,
        l: usize,
        lam: &MultiplierSet,
        prev: &ComponentState,
        targets: Option<[f64; 4]>,
    ) -> Self {
        let br = &net.branches()[l];
        let (f, t) = net.branch_buses(l);
        let (bf, bt) = (&net.buses()[f], &net.buses()[t]);
        Self {
            coeffs: *net.coeffs(l),
            v_bounds: [(bf.v_min, bf.v_max), (bt.v_min, bt.v_max)],
            angle_bounds: (br.angle_min, br.angle_max),
            s_max: br.s_max,
            lam_bus: [[lam.lam_p[f], lam.lam_q[f]], [lam.lam_p[t], lam.lam_q[t]]],
            lam_ends: [
                [lam.lam_v[2 * l], lam.lam_th[2 * l]],
                [lam.lam_v[2 * l + 1], lam.lam_th[2 * l + 1]],
            ],
            anchors: [prev.bus[f], prev.bus[t]],
            targets,
            prev: prev.line[l],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSolution {
    pub state: LineState,
    pub value: f64,
    /// Anything other than `Converged` is a soft failure; the iterate is still usable.
    pub status: NlpStatus,
}

struct Weights {
    /// Proximal weight on the flows.
    nu_flow: f64,
    /// Proximal weight on the voltage/angle duplicates.
    nu_volt: f64,
    rho_vth: f64,
    rho_pq: f64,
}

impl Weights {
    fn new(input: &LineProblem, params: &AlgoParams) -> Self {
        let nu_volt = if params.variant == Variant::A1 {
            params.nu
        } else {
            0.0
        };
        let rho_pq = if input.targets.is_some() {
            params.effective_rho_pq()
        } else {
            0.0
        };
        Self {
            nu_flow: params.nu,
            nu_volt,
            rho_vth: params.effective_rho_vth(),
            rho_pq,
        }
    }
}

/// Objective as a function of the flows `f` and duplicates `y`; writes the
/// partials with respect to both.
fn objective_parts(
    input: &LineProblem,
    w: &Weights,
    f: &[f64; 4],
    y: &[f64; 4],
    df: &mut [f64; 4],
    dy: &mut [f64; 4],
) -> f64 {
    let lam_flow = [
        input.lam_bus[0][0],
        input.lam_bus[0][1],
        input.lam_bus[1][0],
        input.lam_bus[1][1],
    ];
    let lam_y = [
        input.lam_ends[0][0],
        input.lam_ends[0][1],
        input.lam_ends[1][0],
        input.lam_ends[1][1],
    ];
    let prev_f = input.prev.flows();
    let prev_y = input.prev.voltages();
    let anchors = [
        input.anchors[0][0],
        input.anchors[0][1],
        input.anchors[1][0],
        input.anchors[1][1],
    ];
    let targets = input.targets.unwrap_or([0.0; 4]);
    let mut val = 0.0;
    for k in 0..4 {
        let dp = f[k] - prev_f[k];
        let dt = f[k] - targets[k];
        val += -lam_flow[k] * f[k] + w.nu_flow * dp * dp + 0.5 * w.rho_pq * dt * dt;
        df[k] = -lam_flow[k] + 2.0 * w.nu_flow * dp + w.rho_pq * dt;

        let dv = y[k] - prev_y[k];
        let da = y[k] - anchors[k];
        val += -lam_y[k] * y[k] + w.nu_volt * dv * dv + 0.5 * w.rho_vth * da * da;
        dy[k] = -lam_y[k] + 2.0 * w.nu_volt * dv + w.rho_vth * da;
    }
    val
}

/// Branch objective at a full line state (flows taken as given).
pub fn line_value(input: &LineProblem, params: &AlgoParams, x: &LineState) -> f64 {
    let w = Weights::new(input, params);
    objective_parts(
        input,
        &w,
        &x.flows(),
        &x.voltages(),
        &mut [0.0; 4],
        &mut [0.0; 4],
    )
}

struct Reduced<'a> {
    input: &'a LineProblem,
    w: Weights,
}

impl NlpProblem for Reduced<'_> {
    fn dim(&self) -> usize {
        4
    }

    fn bounds(&self, lower: &mut [f64], upper: &mut [f64]) {
        let [(lf, uf), (lt, ut)] = self.input.v_bounds;
        lower.copy_from_slice(&[lf, f64::NEG_INFINITY, lt, f64::NEG_INFINITY]);
        upper.copy_from_slice(&[uf, f64::INFINITY, ut, f64::INFINITY]);
    }

    fn n_ineq(&self) -> usize {
        2 + if self.input.s_max.is_some() { 2 } else { 0 }
    }

    fn objective(&self, y: &[f64], grad: &mut [f64]) -> f64 {
        let (f, jac) = flows_and_jacobian(&self.input.coeffs, y[0], y[1], y[2], y[3]);
        let y4 = [y[0], y[1], y[2], y[3]];
        let (mut df, mut dy) = ([0.0; 4], [0.0; 4]);
        let val = objective_parts(self.input, &self.w, &f, &y4, &mut df, &mut dy);
        for c in 0..4 {
            grad[c] = dy[c] + (0..4).map(|r| df[r] * jac[r][c]).sum::<f64>();
        }
        val
    }

    fn constraints(&self, y: &[f64], c: &mut [f64]) {
        let d = y[1] - y[3];
        let (amin, amax) = self.input.angle_bounds;
        c[0] = d - amax;
        c[1] = amin - d;
        if let Some(s) = self.input.s_max {
            let [pf, qf, pt, qt] = branch_flows(&self.input.coeffs, y[0], y[1], y[2], y[3]);
            c[2] = pf * pf + qf * qf - s * s;
            c[3] = pt * pt + qt * qt - s * s;
        }
    }

    fn constraints_jac_t(&self, y: &[f64], w: &[f64], out: &mut [f64]) {
        out[1] += w[0] - w[1];
        out[3] -= w[0] - w[1];
        if self.input.s_max.is_some() {
            let (f, jac) = flows_and_jacobian(&self.input.coeffs, y[0], y[1], y[2], y[3]);
            let wf = [
                2.0 * w[2] * f[0],
                2.0 * w[2] * f[1],
                2.0 * w[3] * f[2],
                2.0 * w[3] * f[3],
            ];
            for c in 0..4 {
                out[c] += (0..4).map(|r| wf[r] * jac[r][c]).sum::<f64>();
            }
        }
    }
}

/// Solves the branch subproblem locally from `start = [v_i, th_i, v_j, th_j]`.
///
/// Flows are substituted out, leaving the four duplicated voltages/angles as
/// variables; the returned state carries the flows evaluated at the solution.
pub fn line_subproblem(
    input: &LineProblem,
    params: &AlgoParams,
    start: [f64; 4],
    tol: f64,
) -> LineSolution {
    let problem = Reduced {
        input,
        w: Weights::new(input, params),
    };
    let opts = SolveOptions {
        hessian: nlp::HessianKind::FiniteDifference,
        ..SolveOptions::subproblem(tol)
    };
    let res = nlp::solve(&problem, &start, &opts);
    let y = &res.x;
    let [p_ij, q_ij, p_ji, q_ji] = branch_flows(&input.coeffs, y[0], y[1], y[2], y[3]);
    let state = LineState {
        p_ij,
        q_ij,
        p_ji,
        q_ji,
        v_i: y[0],
        th_i: y[1],
        v_j: y[2],
        th_j: y[3],
    };
    LineSolution {
        state,
        value: res.f,
        status: res.status,
    }
}
