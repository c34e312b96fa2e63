//! JSON case format (MW, MVAr, degrees, $/MWh-style costs). A round trip through
//! [`Network`] is exact up to rounding in the unit conversions.

use serde::{Deserialize, Serialize};

use opf_decomp_core::network::{Branch, Bus, Generator, Network};

use crate::units;
use crate::{IoError, IoResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub base_mva: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_bus: Option<usize>,
    pub buses: Vec<BusRecord>,
    pub generators: Vec<GeneratorRecord>,
    pub branches: Vec<BranchRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub g_sh: f64,
    pub b_sh: f64,
    pub p_d: f64,
    pub q_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorRecord {
    pub id: usize,
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchRecord {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub b_ch: f64,
    pub tap: f64,
    pub shift_deg: f64,
    /// MVA rating; `null` or `0` means unlimited.
    pub s_max: Option<f64>,
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::SchemaViolation {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses a JSON case into a per-unit [`Network`].
pub fn parse_json(text: &str) -> IoResult<Network> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: CaseFile = serde_path_to_error::deserialize(de)
        .map_err(|e| schema(e.path().to_string(), e.inner().to_string()))?;
    network_from_file(&file)
}

pub fn network_from_file(file: &CaseFile) -> IoResult<Network> {
    let base = file.base_mva;
    if !(base > 0.0) {
        return Err(schema("base_mva", format!("must be positive, got {base}")));
    }
    if file.buses.is_empty() {
        return Err(schema("buses", "at least one bus is required"));
    }
    let mut seen = std::collections::HashSet::new();
    for (k, b) in file.buses.iter().enumerate() {
        if !seen.insert(b.id) {
            return Err(schema(
                format!("buses[{k}].id"),
                format!("duplicate bus id {}", b.id),
            ));
        }
    }
    let buses = file
        .buses
        .iter()
        .map(|b| Bus {
            id: b.id,
            v_min: b.v_min,
            v_max: b.v_max,
            g_sh: units::to_pu(b.g_sh, base),
            b_sh: units::to_pu(b.b_sh, base),
            p_d: units::to_pu(b.p_d, base),
            q_d: units::to_pu(b.q_d, base),
        })
        .collect();
    let generators = file
        .generators
        .iter()
        .map(|g| Generator {
            id: g.id,
            bus: g.bus,
            p_min: units::to_pu(g.p_min, base),
            p_max: units::to_pu(g.p_max, base),
            q_min: units::to_pu(g.q_min, base),
            q_max: units::to_pu(g.q_max, base),
            c2: units::cost2_to_pu(g.c2, base),
            c1: units::cost1_to_pu(g.c1, base),
            c0: g.c0,
        })
        .collect();
    let branches = file
        .branches
        .iter()
        .map(|b| Branch {
            from_bus: b.from,
            to_bus: b.to,
            r: b.r,
            x: b.x,
            b_ch: b.b_ch,
            tap: b.tap,
            shift: units::deg_to_rad(b.shift_deg),
            s_max: b.s_max.filter(|&s| s > 0.0).map(|s| units::to_pu(s, base)),
            angle_min: units::deg_to_rad(b.angle_min_deg),
            angle_max: units::deg_to_rad(b.angle_max_deg),
        })
        .collect();
    Ok(Network::new(
        base,
        buses,
        generators,
        branches,
        file.reference_bus,
    )?)
}

pub fn file_from_network(net: &Network) -> CaseFile {
    let base = net.base_mva();
    CaseFile {
        base_mva: base,
        reference_bus: Some(net.buses()[net.reference_bus()].id),
        buses: net
            .buses()
            .iter()
            .map(|b| BusRecord {
                id: b.id,
                v_min: b.v_min,
                v_max: b.v_max,
                g_sh: units::from_pu(b.g_sh, base),
                b_sh: units::from_pu(b.b_sh, base),
                p_d: units::from_pu(b.p_d, base),
                q_d: units::from_pu(b.q_d, base),
            })
            .collect(),
        generators: net
            .generators()
            .iter()
            .map(|g| GeneratorRecord {
                id: g.id,
                bus: g.bus,
                p_min: units::from_pu(g.p_min, base),
                p_max: units::from_pu(g.p_max, base),
                q_min: units::from_pu(g.q_min, base),
                q_max: units::from_pu(g.q_max, base),
                c2: units::cost2_from_pu(g.c2, base),
                c1: units::cost1_from_pu(g.c1, base),
                c0: g.c0,
            })
            .collect(),
        branches: net
            .branches()
            .iter()
            .map(|b| BranchRecord {
                from: b.from_bus,
                to: b.to_bus,
                r: b.r,
                x: b.x,
                b_ch: b.b_ch,
                tap: b.tap,
                shift_deg: units::rad_to_deg(b.shift),
                s_max: b.s_max.map(|s| units::from_pu(s, base)),
                angle_min_deg: units::rad_to_deg(b.angle_min),
                angle_max_deg: units::rad_to_deg(b.angle_max),
            })
            .collect(),
    }
}

/// Serialises a network in the JSON case format.
pub fn emit_json(net: &Network) -> String {
    serde_json::to_string_pretty(&file_from_network(net)).expect("case records always serialise")
}
