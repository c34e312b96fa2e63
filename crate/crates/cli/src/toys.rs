//! One scenario per appendix figure: CSV data plus a pass/fail check against
//! the reference values.

use std::io::Write;

use opf_decomp_core::toylab::{
    dual_curve, maximize_dual, toy_admm, toy_proximal, toy_subgradient, DualMode, MethodOptions,
    SolveMode, SubgradientMode, ToyProblem, ToyRun, ToyStatus,
};

use crate::{IoError, IoResult};

pub const APPENDIX_A_SCENARIOS: [&str; 11] = [
    "fig6a", "fig6b", "fig7a", "fig7b", "fig8a", "fig8b", "fig9", "fig9b", "fig10", "fig11a",
    "fig11b",
];
pub const APPENDIX_B_SCENARIOS: [&str; 2] = ["fig12a", "fig12b"];

const VALUE_TOL: f64 = 1e-3;

pub fn scenario_ids(p: ToyProblem) -> &'static [&'static str] {
    match p {
        ToyProblem::AppendixA => &APPENDIX_A_SCENARIOS,
        ToyProblem::AppendixB => &APPENDIX_B_SCENARIOS,
    }
}

/// Parses `a` / `b` (case-insensitive).
pub fn parse_problem(s: &str) -> IoResult<ToyProblem> {
    match s.to_ascii_lowercase().as_str() {
        "a" => Ok(ToyProblem::AppendixA),
        "b" => Ok(ToyProblem::AppendixB),
        _ => Err(IoError::UnknownScenario(format!(
            "toy problem {s:?} (expected a or b)"
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub problem: ToyProblem,
    pub id: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub passed: bool,
    pub detail: String,
}

impl ScenarioReport {
    pub fn file_name(&self) -> String {
        format!("{}_{}.csv", self.problem.name(), self.id)
    }

    pub fn status_line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!(
            "{verdict} {} {}: {}",
            self.problem.name(),
            self.id,
            self.detail
        )
    }

    pub fn write_csv<W: Write>(&self, out: W) -> IoResult<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// A gnuplot script for the CSV written by [`ScenarioReport::write_csv`].
    pub fn gnuplot_hint(&self) -> String {
        let file = self.file_name();
        let mut script = String::from("set datafile separator ','\nset key autotitle columnhead\n");
        if self.header[0] == "lambda" {
            let series: Vec<String> = (2..=self.header.len())
                .map(|c| format!("'{file}' using 1:{c} with lines"))
                .collect();
            script.push_str(&format!(
                "set xlabel 'lambda'\nplot {}\n",
                series.join(", ")
            ));
        } else {
            let col = |name: &str| self.header.iter().position(|h| *h == name).map(|i| i + 1);
            let (p, d) = (
                col("primal_residual").unwrap_or(2),
                col("dual_residual").unwrap_or(3),
            );
            script.push_str(&format!(
                "set logscale y\nset xlabel 'iteration'\nplot '{file}' using 1:{p} with lines, '{file}' using 1:{d} with lines\n"
            ));
        }
        script
    }
}

fn lambda_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| lo + (hi - lo) * k as f64 / n as f64)
        .collect()
}

const TRAJECTORY_HEADER: [&str; 7] = [
    "k",
    "x1",
    "x2",
    "lambda",
    "primal_residual",
    "dual_residual",
    "objective",
];

fn trajectory_rows(run: &ToyRun) -> Vec<Vec<f64>> {
    run.steps
        .iter()
        .map(|s| {
            vec![
                s.k as f64,
                s.x[0],
                s.x[1],
                s.lambda,
                s.primal_residual,
                s.dual_residual,
                s.objective,
            ]
        })
        .collect()
}

fn converged_to(run: &ToyRun, target: f64) -> bool {
    run.status == ToyStatus::Converged && (run.value() - target).abs() <= VALUE_TOL
}

fn report(
    p: ToyProblem,
    id: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
    passed: bool,
    detail: String,
) -> ScenarioReport {
    ScenarioReport {
        problem: p,
        id,
        header,
        rows,
        passed,
        detail,
    }
}

fn admm_scenario(
    p: ToyProblem,
    id: &'static str,
    rho: f64,
    x2_start: f64,
    target: f64,
) -> ScenarioReport {
    let run = toy_admm(
        p,
        rho,
        x2_start,
        SolveMode::Global,
        &MethodOptions::default(),
    );
    let detail = format!(
        "ADMM rho={rho} x2_start={x2_start}: {} after {} iterations, value {:.5} (expected {target:.4} +/- {VALUE_TOL})",
        run.status.as_str(),
        run.iterations,
        run.value()
    );
    report(
        p,
        id,
        TRAJECTORY_HEADER.to_vec(),
        trajectory_rows(&run),
        converged_to(&run, target),
        detail,
    )
}

fn proximal_scenario(
    p: ToyProblem,
    id: &'static str,
    nu: f64,
    start: f64,
    target: f64,
) -> ScenarioReport {
    let opts = MethodOptions::default();
    let run = toy_proximal(p, nu, [start, start], &opts);
    let admm = toy_admm(p, nu, start, SolveMode::Global, &opts);
    let passed = converged_to(&run, target) && run.iterations > admm.iterations;
    let detail = format!(
        "proximal nu={nu} x_start=[{start},{start}]: {} after {} iterations (ADMM rho={nu}: {}), value {:.5} (expected {target:.4} +/- {VALUE_TOL})",
        run.status.as_str(),
        run.iterations,
        admm.iterations,
        run.value()
    );
    report(
        p,
        id,
        TRAJECTORY_HEADER.to_vec(),
        trajectory_rows(&run),
        passed,
        detail,
    )
}

/// Runs one scenario; unknown ids give [`IoError::UnknownScenario`].
pub fn run_scenario(p: ToyProblem, id: &str) -> IoResult<ScenarioReport> {
    let Some(&id) = scenario_ids(p)
        .iter()
        .find(|s| **s == id.to_ascii_lowercase())
    else {
        return Err(IoError::UnknownScenario(format!("{} {id}", p.name())));
    };
    let a = ToyProblem::AppendixA;
    let p_star = p.p_star();
    let p_dagger = p.p_dagger();
    Ok(match id {
        "fig6a" | "fig6b" => {
            let mode = if id == "fig6a" {
                DualMode::Classical
            } else {
                DualMode::Suboptimal { rho: 0.0 }
            };
            let rows = dual_curve(a, mode, &lambda_grid(-1.5, 1.5, 600))
                .into_iter()
                .map(|(l, d)| vec![l, d])
                .collect();
            let (lam, best) = maximize_dual(a, mode, -1.5, 1.5);
            let (passed, detail) = if id == "fig6a" {
                let ok = (best.value - 1.7670).abs() <= VALUE_TOL
                    && (lam - 0.1203).abs() <= VALUE_TOL
                    && best.argmins.len() >= 2;
                (
                    ok,
                    format!(
                        "classical dual max {:.5} at lambda {lam:.5} with {} minimisers (expected 1.7670 at 0.1203, at least 2)",
                        best.value,
                        best.argmins.len()
                    ),
                )
            } else {
                (
                    (best.value - p_dagger).abs() <= VALUE_TOL,
                    format!(
                        "suboptimal dual max {:.5} at lambda {lam:.5} (expected {p_dagger:.4})",
                        best.value
                    ),
                )
            };
            report(a, id, vec!["lambda", "dual_value"], rows, passed, detail)
        }
        "fig7a" | "fig7b" => {
            let (step, mode, max_iter) = if id == "fig7a" {
                (0.001, SubgradientMode::Optimal, 2000)
            } else {
                (0.1, SubgradientMode::Suboptimal, 10_000)
            };
            let run = toy_subgradient(
                a,
                step,
                0.0,
                mode,
                &MethodOptions {
                    max_iter,
                    ..MethodOptions::default()
                },
            );
            let rows = run
                .steps
                .iter()
                .map(|s| {
                    vec![
                        s.k as f64,
                        s.lambda,
                        s.dual_value.unwrap_or(f64::NAN),
                        s.primal_residual,
                        s.dual_residual,
                    ]
                })
                .collect();
            let (passed, detail) = if id == "fig7a" {
                let sup = run
                    .steps
                    .iter()
                    .filter_map(|s| s.dual_value)
                    .fold(f64::NEG_INFINITY, f64::max);
                (
                    (sup - 1.7670).abs() <= VALUE_TOL,
                    format!("subgradient step {step}, {} iterations: sup D = {sup:.5} (expected 1.7670)", run.iterations),
                )
            } else {
                let last = run.last().and_then(|s| s.dual_value).unwrap_or(f64::NAN);
                (
                    run.status == ToyStatus::Converged && (last - p_dagger).abs() <= VALUE_TOL,
                    format!(
                        "subgradient step {step} on the suboptimal dual: {} after {} iterations, D = {last:.5} (expected {p_dagger:.4})",
                        run.status.as_str(),
                        run.iterations
                    ),
                )
            };
            report(
                a,
                id,
                vec![
                    "k",
                    "lambda",
                    "dual_value",
                    "primal_residual",
                    "dual_residual",
                ],
                rows,
                passed,
                detail,
            )
        }
        "fig8a" => admm_scenario(a, id, 50.0, -1.0, p_star),
        "fig8b" => admm_scenario(a, id, 50.0, 1.0, p_dagger),
        "fig9" | "fig9b" => {
            let rho = 10.0;
            let mode = if id == "fig9" {
                DualMode::Augmented { rho }
            } else {
                DualMode::Suboptimal { rho }
            };
            let rows = dual_curve(a, mode, &lambda_grid(-2.0, 2.0, 400))
                .into_iter()
                .map(|(l, d)| vec![l, d])
                .collect();
            let (lam, best) = maximize_dual(a, mode, -2.0, 2.0);
            let (target, tol) = if id == "fig9" {
                (p_star, 2e-3)
            } else {
                (p_dagger, VALUE_TOL)
            };
            let detail =
                format!("augmented dual (rho={rho}) max {:.5} at lambda {lam:.5} (expected {target:.4} +/- {tol})", best.value);
            report(
                a,
                id,
                vec!["lambda", "dual_value"],
                rows,
                (best.value - target).abs() <= tol,
                detail,
            )
        }
        "fig10" => {
            let run = toy_admm(
                a,
                10.0,
                -1.0,
                SolveMode::Local { start: [1.0, 1.0] },
                &MethodOptions::default(),
            );
            let detail = format!(
                "ADMM rho=10 x2_start=-1 with local solves from [1,1]: {} after {} iterations (expected no convergence)",
                run.status.as_str(),
                run.iterations
            );
            let passed = run.status == ToyStatus::Oscillating;
            report(
                a,
                id,
                TRAJECTORY_HEADER.to_vec(),
                trajectory_rows(&run),
                passed,
                detail,
            )
        }
        "fig11a" => proximal_scenario(a, id, 50.0, -1.0, p_star),
        "fig11b" => proximal_scenario(a, id, 50.0, 1.0, p_dagger),
        "fig12a" => admm_scenario(p, id, 2.0, 1.0, p_star),
        "fig12b" => admm_scenario(p, id, 2.0, -1.0, p_star),
        _ => unreachable!("scenario ids are listed above"),
    })
}
