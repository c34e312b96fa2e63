//! Polar AC power flow equations and the centralized OPF.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::network::{BranchCoeffs, Network};
use crate::nlp::{self, NlpProblem, NlpStatus, SolveOptions};
use crate::{Error, Result};

/// Full primal point of the OPF: bus voltages, dispatch and directed branch flows.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub p_g: Vec<f64>,
    pub q_g: Vec<f64>,
    pub p_f: Vec<f64>,
    pub q_f: Vec<f64>,
    pub p_t: Vec<f64>,
    pub q_t: Vec<f64>,
}

impl FlowState {
    /// Flat start: `v = 1`, `theta = 0`, active dispatch at the box midpoint,
    /// reactive dispatch at zero (clamped into its box), flows consistent.
    pub fn flat(net: &Network) -> Self {
        let p_g = net
            .generators()
            .iter()
            .map(|g| 0.5 * (g.p_min + g.p_max))
            .collect();
        let q_g = net
            .generators()
            .iter()
            .map(|g| 0.0f64.max(g.q_min).min(g.q_max))
            .collect();
        Self::from_voltages(
            net,
            vec![1.0; net.n_buses()],
            vec![0.0; net.n_buses()],
            p_g,
            q_g,
        )
    }

    /// Builds a state whose branch flows are evaluated from the voltages.
    pub fn from_voltages(
        net: &Network,
        v: Vec<f64>,
        theta: Vec<f64>,
        p_g: Vec<f64>,
        q_g: Vec<f64>,
    ) -> Self {
        let nl = net.n_branches();
        let mut s = Self {
            v,
            theta,
            p_g,
            q_g,
            p_f: vec![0.0; nl],
            q_f: vec![0.0; nl],
            p_t: vec![0.0; nl],
            q_t: vec![0.0; nl],
        };
        s.refresh_flows(net);
        s
    }

    /// Recomputes every branch flow from the current voltages.
    pub fn refresh_flows(&mut self, net: &Network) {
        for l in 0..net.n_branches() {
            let (f, t) = net.branch_buses(l);
            let [pf, qf, pt, qt] = branch_flows(
                net.coeffs(l),
                self.v[f],
                self.theta[f],
                self.v[t],
                self.theta[t],
            );
            self.p_f[l] = pf;
            self.q_f[l] = qf;
            self.p_t[l] = pt;
            self.q_t[l] = qt;
        }
    }

    fn check(&self, net: &Network) -> Result<()> {
        let (nb, ng, nl) = (net.n_buses(), net.n_generators(), net.n_branches());
        let ok = self.v.len() == nb
            && self.theta.len() == nb
            && self.p_g.len() == ng
            && self.q_g.len() == ng
            && [&self.p_f, &self.q_f, &self.p_t, &self.q_t]
                .iter()
                .all(|f| f.len() == nl);
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "flow state does not match a network with {nb} buses, {ng} generators, {nl} branches"
            )))
        }
    }
}

/// Flow into one branch end `a` towards `b` with `d = th_a - th_b`; returns
/// `(p, q)` and their partials with respect to `(v_a, d, v_b)`.
#[inline]
fn end_flow(
    gc: f64,
    bc: f64,
    g: f64,
    b: f64,
    va: f64,
    vb: f64,
    d: f64,
) -> ([f64; 2], [[f64; 3]; 2]) {
    let (sin, cos) = (libm::sin(d), libm::cos(d));
    let vv = va * vb;
    let p = gc * va * va - g * vv * cos + b * vv * sin;
    let q = bc * va * va - b * vv * cos - g * vv * sin;
    let dp = [
        2.0 * gc * va - g * vb * cos + b * vb * sin,
        g * vv * sin + b * vv * cos,
        -g * va * cos + b * va * sin,
    ];
    let dq = [
        2.0 * bc * va - b * vb * cos - g * vb * sin,
        b * vv * sin - g * vv * cos,
        -b * va * cos - g * va * sin,
    ];
    ([p, q], [dp, dq])
}

/// Directed flows `[p_f, q_f, p_t, q_t]` of a branch.
pub fn branch_flows(c: &BranchCoeffs, v_f: f64, th_f: f64, v_t: f64, th_t: f64) -> [f64; 4] {
    let ([pf, qf], _) = end_flow(c.g_c_ff, c.b_c_ff, c.g_ff, c.b_ff, v_f, v_t, th_f - th_t);
    let ([pt, qt], _) = end_flow(c.g_c_tt, c.b_c_tt, c.g_tt, c.b_tt, v_t, v_f, th_t - th_f);
    [pf, qf, pt, qt]
}

/// Jacobian of [`branch_flows`]: row `r` is flow `r` of `[p_f, q_f, p_t, q_t]`,
/// column `c` is the derivative with respect to `[v_f, th_f, v_t, th_t][c]`.
pub fn flow_jacobian(c: &BranchCoeffs, v_f: f64, th_f: f64, v_t: f64, th_t: f64) -> [[f64; 4]; 4] {
    flows_and_jacobian(c, v_f, th_f, v_t, th_t).1
}

pub(crate) fn flows_and_jacobian(
    c: &BranchCoeffs,
    v_f: f64,
    th_f: f64,
    v_t: f64,
    th_t: f64,
) -> ([f64; 4], [[f64; 4]; 4]) {
    let ([pf, qf], [dpf, dqf]) =
        end_flow(c.g_c_ff, c.b_c_ff, c.g_ff, c.b_ff, v_f, v_t, th_f - th_t);
    let ([pt, qt], [dpt, dqt]) =
        end_flow(c.g_c_tt, c.b_c_tt, c.g_tt, c.b_tt, v_t, v_f, th_t - th_f);
    let from = |d: [f64; 3]| [d[0], d[1], d[2], -d[1]];
    let to = |d: [f64; 3]| [d[2], -d[1], d[0], d[1]];
    ([pf, qf, pt, qt], [from(dpf), from(dqf), to(dpt), to(dqt)])
}

/// Per-bus power balance residuals `(r_p, r_q)`; zero at a feasible point.
pub fn balance_residuals(net: &Network, s: &FlowState) -> Vec<(f64, f64)> {
    (0..net.n_buses())
        .map(|i| {
            let bus = &net.buses()[i];
            let v2 = s.v[i] * s.v[i];
            let mut rp = -bus.p_d - bus.g_sh * v2;
            let mut rq = -bus.q_d + bus.b_sh * v2;
            for &g in net.bus_gens(i) {
                rp += s.p_g[g];
                rq += s.q_g[g];
            }
            for e in net.bus_ends(i) {
                let (p, q) = match e.end {
                    crate::network::End::From => (s.p_f[e.branch], s.q_f[e.branch]),
                    crate::network::End::To => (s.p_t[e.branch], s.q_t[e.branch]),
                };
                rp -= p;
                rq -= q;
            }
            (rp, rq)
        })
        .collect()
}

/// Total generation cost in $/hr.
pub fn objective(net: &Network, p_g: &[f64]) -> f64 {
    net.generators()
        .iter()
        .zip(p_g)
        .map(|(g, &p)| g.cost(p))
        .sum()
}

/// Result of a centralized solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralSolution {
    pub state: FlowState,
    /// Generation cost in $/hr.
    pub cost: f64,
    pub kkt_residual: f64,
    /// Largest power balance or limit violation (p.u.).
    pub max_violation: f64,
    pub status: NlpStatus,
    /// Multipliers of the active/reactive balance rows, per bus, in $/hr per p.u.
    pub lambda_p: Vec<f64>,
    pub lambda_q: Vec<f64>,
}

/// Solves the full OPF from `start` (the flat start when `None`).
///
/// Flows are substituted out, so the variables are `[v, theta, p_g, q_g]`;
/// the reference bus angle is fixed at zero.
pub fn solve_centralized(
    net: &Network,
    start: Option<&FlowState>,
    tol: f64,
) -> Result<CentralSolution> {
    let flat;
    let start = match start {
        Some(s) => {
            s.check(net)?;
            s
        }
        None => {
            flat = FlowState::flat(net);
            &flat
        }
    };
    if start
        .v
        .iter()
        .chain(&start.theta)
        .chain(&start.p_g)
        .chain(&start.q_g)
        .any(|x| !x.is_finite())
    {
        return Err(Error::InfeasibleStart(
            "start point has non-finite entries".into(),
        ));
    }
    let problem = CentralProblem::new(net);
    let mut x0 = Vec::with_capacity(problem.n);
    x0.extend_from_slice(&start.v);
    x0.extend_from_slice(&start.theta);
    x0.extend_from_slice(&start.p_g);
    x0.extend_from_slice(&start.q_g);
    let theta_ref = start.theta[net.reference_bus()];
    for th in &mut x0[problem.nb..2 * problem.nb] {
        *th -= theta_ref;
    }

    let res = nlp::solve(&problem, &x0, &SolveOptions::centralized(tol));
    if res.status == NlpStatus::UnboundedBelow {
        return Err(Error::SolverDiverged(
            "centralized objective unbounded below".into(),
        ));
    }
    let (nb, ng) = (problem.nb, problem.ng);
    let state = FlowState::from_voltages(
        net,
        res.x[..nb].to_vec(),
        res.x[nb..2 * nb].to_vec(),
        res.x[2 * nb..2 * nb + ng].to_vec(),
        res.x[2 * nb + ng..].to_vec(),
    );
    if res.status == NlpStatus::MaxIter && !(res.constraint_violation < 1e-6) {
        return Err(Error::SolverDiverged(format!(
            "centralized solve hit its iteration limit with constraint violation {:e}",
            res.constraint_violation
        )));
    }
    let cost = objective(net, &state.p_g);
    Ok(CentralSolution {
        cost,
        kkt_residual: res.kkt_residual,
        max_violation: res.constraint_violation,
        status: res.status,
        lambda_p: res.eq_multipliers[..nb].to_vec(),
        lambda_q: res.eq_multipliers[nb..].to_vec(),
        state,
    })
}

struct CentralProblem<'a> {
    net: &'a Network,
    nb: usize,
    ng: usize,
    n: usize,
    /// Branches with a finite angle-difference bound get two rows each.
    angle_rows: Vec<usize>,
    thermal_rows: Vec<usize>,
}

impl<'a> CentralProblem<'a> {
    fn new(net: &'a Network) -> Self {
        let nb = net.n_buses();
        let ng = net.n_generators();
        let angle_rows = (0..net.n_branches())
            .filter(|&l| {
                let b = &net.branches()[l];
                b.angle_min.is_finite() && b.angle_max.is_finite()
            })
            .collect();
        let thermal_rows = (0..net.n_branches())
            .filter(|&l| net.branches()[l].s_max.is_some())
            .collect();
        Self {
            net,
            nb,
            ng,
            n: 2 * nb + 2 * ng,
            angle_rows,
            thermal_rows,
        }
    }

    fn flow_state(&self, x: &[f64]) -> FlowState {
        let (nb, ng) = (self.nb, self.ng);
        FlowState::from_voltages(
            self.net,
            x[..nb].to_vec(),
            x[nb..2 * nb].to_vec(),
            x[2 * nb..2 * nb + ng].to_vec(),
            x[2 * nb + ng..].to_vec(),
        )
    }
}

impl NlpProblem for CentralProblem<'_> {
    fn dim(&self) -> usize {
        self.n
    }

    fn bounds(&self, lower: &mut [f64], upper: &mut [f64]) {
        let (nb, ng) = (self.nb, self.ng);
        for (i, bus) in self.net.buses().iter().enumerate() {
            lower[i] = bus.v_min;
            upper[i] = bus.v_max;
            lower[nb + i] = f64::NEG_INFINITY;
            upper[nb + i] = f64::INFINITY;
        }
        let r = nb + self.net.reference_bus();
        lower[r] = 0.0;
        upper[r] = 0.0;
        for (g, gen) in self.net.generators().iter().enumerate() {
            lower[2 * nb + g] = gen.p_min;
            upper[2 * nb + g] = gen.p_max;
            lower[2 * nb + ng + g] = gen.q_min;
            upper[2 * nb + ng + g] = gen.q_max;
        }
    }

    fn n_eq(&self) -> usize {
        2 * self.nb
    }

    fn n_ineq(&self) -> usize {
        2 * self.angle_rows.len() + 2 * self.thermal_rows.len()
    }

    fn objective(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let off = 2 * self.nb;
        let mut f = 0.0;
        for (g, gen) in self.net.generators().iter().enumerate() {
            let p = x[off + g];
            f += gen.cost(p);
            grad[off + g] = 2.0 * gen.c2 * p + gen.c1;
        }
        f
    }

    fn constraints(&self, x: &[f64], c: &mut [f64]) {
        let nb = self.nb;
        let s = self.flow_state(x);
        for (i, (rp, rq)) in balance_residuals(self.net, &s).into_iter().enumerate() {
            c[i] = rp;
            c[nb + i] = rq;
        }
        let mut row = 2 * nb;
        for &l in &self.angle_rows {
            let br = &self.net.branches()[l];
            let (f, t) = self.net.branch_buses(l);
            let d = s.theta[f] - s.theta[t];
            c[row] = d - br.angle_max;
            c[row + 1] = br.angle_min - d;
            row += 2;
        }
        for &l in &self.thermal_rows {
            let s_max = self.net.branches()[l].s_max.unwrap_or(f64::INFINITY);
            let s2 = s_max * s_max;
            c[row] = s.p_f[l] * s.p_f[l] + s.q_f[l] * s.q_f[l] - s2;
            c[row + 1] = s.p_t[l] * s.p_t[l] + s.q_t[l] * s.q_t[l] - s2;
            row += 2;
        }
    }

    fn constraints_jac_t(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        let (nb, ng) = (self.nb, self.ng);
        let (v, th) = (&x[..nb], &x[nb..2 * nb]);
        for (i, bus) in self.net.buses().iter().enumerate() {
            out[i] += 2.0 * v[i] * (-bus.g_sh * w[i] + bus.b_sh * w[nb + i]);
        }
        for g in 0..ng {
            let i = self.net.gen_bus(g);
            out[2 * nb + g] += w[i];
            out[2 * nb + ng + g] += w[nb + i];
        }
        let mut thermal_w = vec![(0.0, 0.0); self.net.n_branches()];
        let thermal_base = 2 * nb + 2 * self.angle_rows.len();
        for (k, &l) in self.thermal_rows.iter().enumerate() {
            thermal_w[l] = (w[thermal_base + 2 * k], w[thermal_base + 2 * k + 1]);
        }
        for l in 0..self.net.n_branches() {
            let (f, t) = self.net.branch_buses(l);
            let (flows, jac) = flows_and_jacobian(self.net.coeffs(l), v[f], th[f], v[t], th[t]);
            let (wf, wt) = thermal_w[l];
            // Weight of each flow in the constraint rows: balance rows subtract flows.
            let weight = [
                -w[f] + 2.0 * wf * flows[0],
                -w[nb + f] + 2.0 * wf * flows[1],
                -w[t] + 2.0 * wt * flows[2],
                -w[nb + t] + 2.0 * wt * flows[3],
            ];
            let cols = [f, nb + f, t, nb + t];
            for (r, wr) in weight.iter().enumerate() {
                for (col, &idx) in cols.iter().enumerate() {
                    out[idx] += wr * jac[r][col];
                }
            }
        }
        let mut row = 2 * nb;
        for &l in &self.angle_rows {
            let (f, t) = self.net.branch_buses(l);
            let net_w = w[row] - w[row + 1];
            out[nb + f] += net_w;
            out[nb + t] -= net_w;
            row += 2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Branch, Bus, Generator};

    fn bus(id: usize) -> Bus {
        Bus {
            id,
            v_min: 0.9,
            v_max: 1.1,
            g_sh: 0.0,
            b_sh: 0.0,
            p_d: 0.0,
            q_d: 0.0,
        }
    }

    #[test]
    fn zero_angle_plain_line_carries_no_flow() {
        let c = crate::network::branch_coeffs(&Branch::line(1, 2, 0.01, 0.1, 0.0)).unwrap();
        let f = branch_flows(&c, 1.0, 0.2, 1.0, 0.2);
        for x in f {
            assert!(x.abs() < 1e-12);
        }
    }

    #[test]
    fn lossless_line_conserves_active_power() {
        let c = crate::network::branch_coeffs(&Branch::line(1, 2, 0.0, 0.2, 0.0)).unwrap();
        for &(vf, thf, vt, tht) in &[
            (1.0, 0.1, 0.95, -0.2),
            (1.07, -0.3, 1.02, 0.25),
            (0.9, 0.0, 1.1, 0.0),
        ] {
            let [pf, _, pt, _] = branch_flows(&c, vf, thf, vt, tht);
            assert!((pf + pt).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_at_zero_angle() {
        let c = crate::network::branch_coeffs(&Branch::line(1, 2, 0.03, 0.2, 0.1)).unwrap();
        let j = flow_jacobian(&c, 1.05, 0.1, 0.97, 0.1);
        assert!((j[0][1] - c.b_ff * 1.05 * 0.97).abs() < 1e-14);
        assert_eq!(j[0][1], -j[0][3]);
    }

    #[test]
    fn shunt_only_residual() {
        let mut b = bus(1);
        b.g_sh = 0.1;
        let mut other = bus(2);
        other.v_min = 0.5;
        let net = Network::new(
            100.0,
            vec![b, other],
            vec![Generator {
                id: 1,
                bus: 2,
                p_min: 0.0,
                p_max: 1.0,
                q_min: -1.0,
                q_max: 1.0,
                c2: 0.0,
                c1: 1.0,
                c0: 0.0,
            }],
            vec![Branch::line(1, 2, 0.01, 0.1, 0.0)],
            None,
        )
        .unwrap();
        let s =
            FlowState::from_voltages(&net, vec![1.1, 1.1], vec![0.0, 0.0], vec![0.0], vec![0.0]);
        let r = balance_residuals(&net, &s);
        assert!((r[0].0 + 0.121).abs() < 1e-15);
        assert_eq!(r[0].1, 0.0);
    }

    #[test]
    fn objective_of_zero_dispatch_is_fixed_cost() {
        let net = Network::new(
            100.0,
            vec![bus(1), bus(2)],
            vec![
                Generator {
                    id: 1,
                    bus: 1,
                    p_min: 0.0,
                    p_max: 1.0,
                    q_min: -1.0,
                    q_max: 1.0,
                    c2: 3.0,
                    c1: 2.0,
                    c0: 7.0,
                },
                Generator {
                    id: 2,
                    bus: 2,
                    p_min: 0.0,
                    p_max: 1.0,
                    q_min: -1.0,
                    q_max: 1.0,
                    c2: 1.0,
                    c1: 5.0,
                    c0: 11.0,
                },
            ],
            vec![Branch::line(1, 2, 0.01, 0.1, 0.0)],
            None,
        )
        .unwrap();
        assert_eq!(objective(&net, &[0.0, 0.0]), 18.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = Network::new(
            100.0,
            vec![bus(1), bus(2)],
            vec![],
            vec![Branch::line(1, 2, 0.01, 0.1, 0.0)],
            None,
        )
        .unwrap();
        let mut s = FlowState::flat(&net);
        s.v.pop();
        assert!(matches!(
            solve_centralized(&net, Some(&s), 1e-8),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
