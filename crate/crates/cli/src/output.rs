//! Trace CSV and JSON report writers.

use std::io::Write;

use serde::Serialize;

use opf_decomp_core::coordinator::{IterationTrace, RunReport};
use opf_decomp_core::formulation::CentralSolution;

use crate::IoResult;

pub const TRACE_HEADER: [&str; 5] = ["k", "residual_norm", "dual_value", "gen_cost", "wall_ms"];

/// JSON schema that `report.json` validates against.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

/// Writes the trace with floats in shortest round-trip form.
pub fn write_trace<W: Write>(out: W, trace: &[IterationTrace]) -> IoResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for row in trace {
        w.write_record([
            row.k.to_string(),
            row.residual_norm.to_string(),
            row.dual_value.to_string(),
            row.gen_cost.to_string(),
            row.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamsEcho {
    pub variant: String,
    pub setting: Option<String>,
    pub nu: f64,
    pub rho_pq: f64,
    pub rho_vtheta: f64,
    pub alpha_i: f64,
    pub alpha_ij: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportFile {
    pub version: String,
    pub case: String,
    pub status: String,
    pub converged: bool,
    pub iterations: usize,
    pub p_ipm: f64,
    pub p_amd: f64,
    pub d_amd: f64,
    pub amd_gap: f64,
    pub ro_gap: f64,
    pub final_residual: f64,
    pub line_soft_failures: usize,
    pub params: ParamsEcho,
    pub notes: Vec<String>,
}

pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

impl ReportFile {
    pub fn new(case: &str, report: &RunReport, setting: Option<char>, notes: Vec<String>) -> Self {
        let p = &report.params;
        Self {
            version: version_string(),
            case: case.to_string(),
            status: report.status.as_str().to_string(),
            converged: report.converged,
            iterations: report.iterations,
            p_ipm: report.p_ipm,
            p_amd: report.p_amd,
            d_amd: report.d_amd,
            amd_gap: report.amd_gap,
            ro_gap: report.ro_gap,
            final_residual: report.final_residual,
            line_soft_failures: report.line_soft_failures,
            params: ParamsEcho {
                variant: p.variant.name().to_string(),
                setting: setting.map(|c| c.to_string()),
                nu: p.nu,
                rho_pq: p.rho_pq,
                rho_vtheta: p.rho_vth,
                alpha_i: p.alpha_i,
                alpha_ij: p.alpha_ij,
                eps: p.epsilon,
            },
            notes,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CentralFile {
    pub version: String,
    pub case: String,
    pub status: String,
    pub cost: f64,
    pub kkt_residual: f64,
    pub max_violation: f64,
    pub v: Vec<f64>,
    pub theta_deg: Vec<f64>,
    pub p_g_mw: Vec<f64>,
    pub q_g_mvar: Vec<f64>,
    pub notes: Vec<String>,
}

impl CentralFile {
    pub fn new(case: &str, sol: &CentralSolution, base_mva: f64, notes: Vec<String>) -> Self {
        Self {
            version: version_string(),
            case: case.to_string(),
            status: format!("{:?}", sol.status).to_lowercase(),
            cost: sol.cost,
            kkt_residual: sol.kkt_residual,
            max_violation: sol.max_violation,
            v: sol.state.v.clone(),
            theta_deg: sol.state.theta.iter().map(|t| t.to_degrees()).collect(),
            p_g_mw: sol.state.p_g.iter().map(|p| p * base_mva).collect(),
            q_g_mvar: sol.state.q_g.iter().map(|q| q * base_mva).collect(),
            notes,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report records always serialise")
}
