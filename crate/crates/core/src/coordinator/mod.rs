//! The distributed loop: subproblem rounds, multiplier updates, stopping and gaps.

mod settings;

use alloc::vec::Vec;

use crate::decomposition::{
    bus_inputs, bus_subproblem, coupling_targets, gen_multipliers, gen_subproblem, line_subproblem,
    AlgoParams, BusWeights, ComponentState, CouplingTargets, LineProblem, LineSolution, LineState,
    MultiplierSet, Variant,
};
use crate::formulation::{objective, solve_centralized};
use crate::network::Network;
use crate::nlp::NlpStatus;
use crate::{Error, Result};

pub use settings::{lookup_setting, Setting, SETTINGS};

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationTrace {
    pub k: usize,
    /// Euclidean norm of the stacked subgradient at `x^{k+1}`.
    pub residual_norm: f64,
    /// Modified dual value at `lam^k`.
    pub dual_value: f64,
    /// Generation cost at `x^{k+1}` ($/hr).
    pub gen_cost: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIterExceeded,
    Diverged,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIterExceeded => "max_iter_exceeded",
            RunStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub status: RunStatus,
    pub converged: bool,
    pub iterations: usize,
    /// Centralized objective ($/hr).
    pub p_ipm: f64,
    /// Generation cost at the final iterate ($/hr).
    pub p_amd: f64,
    /// Modified dual value at the final multipliers ($/hr).
    pub d_amd: f64,
    /// Percent gap between `p_ipm` and `d_amd`.
    pub amd_gap: f64,
    /// Percent gap between `p_ipm` and `p_amd`.
    pub ro_gap: f64,
    pub final_residual: f64,
    /// Branch subproblem solves that ended short of convergence.
    pub line_soft_failures: usize,
    pub params: AlgoParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub max_iter: usize,
    /// Keep every `thin`-th trace row (the last row is always kept).
    pub thin: usize,
    /// Worker threads for subproblem rounds; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Stationarity/feasibility tolerance of the branch NLPs.
    pub line_tol: f64,
    /// Warm-start branch NLPs from their previous iterate instead of the flat point.
    pub warm_start_previous: bool,
    /// Centralized objective for the gaps; computed from the flat start when `None`.
    pub p_ipm: Option<f64>,
    /// Starting point; the flat start when `None`.
    pub initial_state: Option<ComponentState>,
    /// Record elapsed wall-clock time in the trace (zero otherwise).
    pub wall_clock: bool,
    /// Abort once the residual exceeds this multiple of the first residual.
    pub divergence_factor: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_iter: 200_000,
            thin: 1,
            workers: None,
            line_tol: 1e-8,
            warm_start_previous: false,
            p_ipm: None,
            initial_state: None,
            wall_clock: true,
            divergence_factor: 1e6,
        }
    }
}

/// Output of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: RunReport,
    pub trace: Vec<IterationTrace>,
    pub state: ComponentState,
    pub multipliers: MultiplierSet,
}

/// Stacked residual of the relaxed constraints at `state`: power balance per
/// bus, then `v_i - v_i(ij)` and `th_i - th_i(ij)` per branch end.
pub fn subgradient(net: &Network, state: &ComponentState) -> MultiplierSet {
    let mut g = MultiplierSet::zeros(net);
    for (i, bus) in net.buses().iter().enumerate() {
        let [v, th] = state.bus[i];
        let mut rp = -bus.p_d - bus.g_sh * v * v;
        let mut rq = -bus.q_d + bus.b_sh * v * v;
        for &k in net.bus_gens(i) {
            rp += state.gen[k][0];
            rq += state.gen[k][1];
        }
        for e in net.bus_ends(i) {
            let line = &state.line[e.branch];
            let (p, q) = line.end_flow(e.end);
            rp -= p;
            rq -= q;
            let (vd, thd) = line.end_voltage(e.end);
            g.lam_v[e.end_index()] = v - vd;
            g.lam_th[e.end_index()] = th - thd;
        }
        g.lam_p[i] = rp;
        g.lam_q[i] = rq;
    }
    g
}

/// `lam + alpha * g` with `alpha_i` on balance rows and `alpha_ij` on consensus rows.
pub fn update_multipliers(
    lam: &MultiplierSet,
    g: &MultiplierSet,
    params: &AlgoParams,
) -> Result<MultiplierSet> {
    if !lam.same_shape(g) {
        return Err(Error::DimensionMismatch(
            "multiplier and subgradient shapes differ".into(),
        ));
    }
    let step = |l: &[f64], d: &[f64], a: f64| l.iter().zip(d).map(|(x, y)| x + a * y).collect();
    Ok(MultiplierSet {
        lam_p: step(&lam.lam_p, &g.lam_p, params.alpha_i),
        lam_q: step(&lam.lam_q, &g.lam_q, params.alpha_i),
        lam_v: step(&lam.lam_v, &g.lam_v, params.alpha_ij),
        lam_th: step(&lam.lam_th, &g.lam_th, params.alpha_ij),
    })
}

/// `(amd_gap, ro_gap)` in percent.
pub fn gaps(p_ipm: f64, p_amd: f64, d_amd: f64) -> Result<(f64, f64)> {
    if p_ipm == 0.0 {
        return Err(Error::DivisionByZero);
    }
    Ok((
        (p_ipm - d_amd) / p_ipm * 100.0,
        (p_ipm - p_amd) / p_ipm * 100.0,
    ))
}

/// Maps `f` over `0..n`, in parallel when the `std` feature is enabled.
fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "std")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "std"))]
    {
        (0..n).map(f).collect()
    }
}

struct Round {
    gen: Vec<[f64; 2]>,
    line: Vec<LineState>,
    value: f64,
    soft_failures: usize,
}

fn solve_generators_and_lines(
    net: &Network,
    lam: &MultiplierSet,
    state: &ComponentState,
    targets: Option<&CouplingTargets>,
    params: &AlgoParams,
    opts: &RunOptions,
) -> Result<Round> {
    let gens = map_indices(net.n_generators(), |g| {
        let t = targets.map(|t| t.gen[g]);
        gen_subproblem(
            &net.generators()[g],
            gen_multipliers(net, lam, g),
            state.gen[g],
            t,
            params,
        )
    });
    let lines: Vec<LineSolution> = map_indices(net.n_branches(), |l| {
        let input = LineProblem::from_network(net, l, lam, state, targets.map(|t| t.line[l]));
        let start = if opts.warm_start_previous {
            state.line[l].voltages()
        } else {
            LineState::FLAT.voltages()
        };
        line_subproblem(&input, params, start, opts.line_tol)
    });
    let mut value = 0.0;
    let mut gen = Vec::with_capacity(gens.len());
    for s in gens {
        let s = s?;
        value += s.value;
        gen.push(s.x);
    }
    let mut soft_failures = 0;
    let mut line = Vec::with_capacity(lines.len());
    for s in lines {
        if s.status != NlpStatus::Converged {
            soft_failures += 1;
        }
        value += s.value;
        line.push(s.state);
    }
    Ok(Round {
        gen,
        line,
        value,
        soft_failures,
    })
}

fn solve_buses(
    net: &Network,
    lam: &MultiplierSet,
    prev: &ComponentState,
    lines: &[LineState],
    params: &AlgoParams,
) -> Result<(Vec<[f64; 2]>, f64)> {
    let weights = BusWeights::for_params(params);
    let sols = map_indices(net.n_buses(), |i| {
        let (lam_ends, dups) = bus_inputs(net, lam, lines, i);
        bus_subproblem(
            &net.buses()[i],
            [lam.lam_p[i], lam.lam_q[i]],
            &lam_ends,
            &dups,
            prev.bus[i],
            weights,
        )
    });
    let mut value = 0.0;
    let mut bus = Vec::with_capacity(sols.len());
    for s in sols {
        let s = s?;
        value += s.value;
        bus.push(s.x);
    }
    Ok((bus, value))
}

/// One iteration: returns `x^{k+1}`, `D(lam^k)` and the number of soft failures.
pub fn iterate(
    net: &Network,
    lam: &MultiplierSet,
    state: &ComponentState,
    params: &AlgoParams,
    opts: &RunOptions,
) -> Result<(ComponentState, f64, usize)> {
    let targets = (params.variant == Variant::A3).then(|| coupling_targets(net, state));
    let round = solve_generators_and_lines(net, lam, state, targets.as_ref(), params, opts)?;
    // A1 solves buses alongside the other components; their problem does not
    // read the branch duplicates there, so passing either set is equivalent.
    let (bus, bus_value) = solve_buses(net, lam, state, &round.line, params)?;
    let next = ComponentState {
        gen: round.gen,
        line: round.line,
        bus,
    };
    Ok((next, round.value + bus_value, round.soft_failures))
}

#[cfg(feature = "std")]
struct Clock(Option<std::time::Instant>);

#[cfg(feature = "std")]
impl Clock {
    fn start(enabled: bool) -> Self {
        Self(enabled.then(std::time::Instant::now))
    }

    fn elapsed_ms(&self) -> f64 {
        self.0.map_or(0.0, |t| t.elapsed().as_secs_f64() * 1e3)
    }
}

#[cfg(not(feature = "std"))]
struct Clock;

#[cfg(not(feature = "std"))]
impl Clock {
    fn start(_enabled: bool) -> Self {
        Clock
    }

    fn elapsed_ms(&self) -> f64 {
        0.0
    }
}

/// Runs the distributed algorithm selected by `params.variant`.
pub fn run(net: &Network, params: &AlgoParams, opts: &RunOptions) -> Result<RunOutcome> {
    params.validate()?;
    #[cfg(feature = "std")]
    if let Some(n) = opts.workers {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidData {
                what: "workers".into(),
                reason: alloc::format!("{e}"),
            })?;
        return pool.install(|| run_loop(net, params, opts));
    }
    run_loop(net, params, opts)
}

fn run_loop(net: &Network, params: &AlgoParams, opts: &RunOptions) -> Result<RunOutcome> {
    let p_ipm = match opts.p_ipm {
        Some(p) => p,
        None => solve_centralized(net, None, 1e-8)?.cost,
    };
    let mut state = match &opts.initial_state {
        Some(s) => {
            s.check(net)?;
            s.clone()
        }
        None => ComponentState::flat(net),
    };
    let mut lam = MultiplierSet::zeros(net);
    let thin = opts.thin.max(1);
    let clock = Clock::start(opts.wall_clock);
    let mut trace = Vec::new();
    let mut first_norm = None;
    let mut soft_failures = 0;
    let mut last = None;
    let mut status = RunStatus::MaxIterExceeded;

    for k in 1..=opts.max_iter {
        let (next, dual_value, soft) = iterate(net, &lam, &state, params, opts)?;
        soft_failures += soft;
        let g = subgradient(net, &next);
        let norm = g.norm();
        let gen_cost = objective(net, &next.gen.iter().map(|x| x[0]).collect::<Vec<_>>());
        let row = IterationTrace {
            k,
            residual_norm: norm,
            dual_value,
            gen_cost,
            wall_ms: clock.elapsed_ms(),
        };
        state = next;
        last = Some(row);

        let base = *first_norm.get_or_insert(norm);
        if norm < params.epsilon {
            status = RunStatus::Converged;
        } else if !norm.is_finite() || norm > opts.divergence_factor * base.max(params.epsilon) {
            status = RunStatus::Diverged;
        }
        if k % thin == 0 || status != RunStatus::MaxIterExceeded || k == opts.max_iter {
            trace.push(row);
        }
        if status != RunStatus::MaxIterExceeded {
            break;
        }
        lam = update_multipliers(&lam, &g, params)?;
    }

    let last = last.ok_or_else(|| Error::InvalidData {
        what: "max_iter".into(),
        reason: "must be at least 1".into(),
    })?;
    let (amd_gap, ro_gap) = gaps(p_ipm, last.gen_cost, last.dual_value)?;
    let report = RunReport {
        status,
        converged: status == RunStatus::Converged,
        iterations: last.k,
        p_ipm,
        p_amd: last.gen_cost,
        d_amd: last.dual_value,
        amd_gap,
        ro_gap,
        final_residual: last.residual_norm,
        line_soft_failures: soft_failures,
        params: *params,
    };
    Ok(RunOutcome {
        report,
        trace,
        state,
        multipliers: lam,
    })
}
