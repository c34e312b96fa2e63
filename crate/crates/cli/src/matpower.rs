//! Reader for the MATPOWER m-file subset (`baseMVA`, `bus`, `gen`, `branch`, `gencost`).

use std::collections::HashMap;

use opf_decomp_core::network::{Branch, Bus, Generator, Network};

use crate::units;
use crate::{IoError, IoResult};

/// Case data plus notes about defaults that were applied while reading.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCase {
    pub network: Network,
    pub notes: Vec<String>,
}

/// Parses MATPOWER case text into a per-unit [`Network`].
pub fn parse_matpower(text: &str) -> IoResult<Network> {
    parse_matpower_with_notes(text).map(|c| c.network)
}

pub fn parse_matpower_with_notes(text: &str) -> IoResult<ParsedCase> {
    let blocks = scan(text)?;
    let base_mva = match blocks.get("baseMVA") {
        Some(Block::Scalar(v)) => *v,
        Some(Block::Matrix(_)) => return Err(malformed("mpc.baseMVA must be a scalar")),
        None => return Err(malformed("missing mpc.baseMVA")),
    };
    if !(base_mva > 0.0) {
        return Err(malformed(format!(
            "mpc.baseMVA must be positive, got {base_mva}"
        )));
    }
    let bus_rows = matrix(&blocks, "bus", 13)?;
    let gen_rows = matrix(&blocks, "gen", 10)?;
    let branch_rows = matrix(&blocks, "branch", 11)?;
    let cost_rows = matrix(&blocks, "gencost", 4)?;
    if cost_rows.len() < gen_rows.len() {
        return Err(malformed(format!(
            "mpc.gencost has {} rows for {} generators",
            cost_rows.len(),
            gen_rows.len()
        )));
    }
    let mut notes = Vec::new();

    let mut reference = None;
    let mut buses = Vec::with_capacity(bus_rows.len());
    for row in bus_rows {
        let id = index(row[0], "bus id")?;
        if row[1] == 3.0 && reference.is_none() {
            reference = Some(id);
        }
        buses.push(Bus {
            id,
            v_min: row[12],
            v_max: row[11],
            g_sh: units::to_pu(row[4], base_mva),
            b_sh: units::to_pu(row[5], base_mva),
            p_d: units::to_pu(row[2], base_mva),
            q_d: units::to_pu(row[3], base_mva),
        });
    }

    let mut generators = Vec::new();
    for (k, (row, cost)) in gen_rows.iter().zip(cost_rows).enumerate() {
        if row[7] <= 0.0 {
            continue;
        }
        let [c2, c1, c0] = polynomial_cost(cost, k + 1)?;
        generators.push(Generator {
            id: k + 1,
            bus: index(row[0], "generator bus")?,
            p_min: units::to_pu(row[9], base_mva),
            p_max: units::to_pu(row[8], base_mva),
            q_min: units::to_pu(row[4], base_mva),
            q_max: units::to_pu(row[3], base_mva),
            c2: units::cost2_to_pu(c2, base_mva),
            c1: units::cost1_to_pu(c1, base_mva),
            c0,
        });
    }

    let mut branches = Vec::new();
    let mut defaulted_angles = 0;
    for row in branch_rows {
        if row[10] <= 0.0 {
            continue;
        }
        let (angle_min, angle_max) = if row.len() >= 13 {
            (units::deg_to_rad(row[11]), units::deg_to_rad(row[12]))
        } else {
            defaulted_angles += 1;
            (-units::DEFAULT_ANGLE_LIMIT, units::DEFAULT_ANGLE_LIMIT)
        };
        branches.push(Branch {
            from_bus: index(row[0], "branch from bus")?,
            to_bus: index(row[1], "branch to bus")?,
            r: row[2],
            x: row[3],
            b_ch: row[4],
            tap: if row[8] == 0.0 { 1.0 } else { row[8] },
            shift: units::deg_to_rad(row[9]),
            s_max: (row[5] > 0.0).then(|| units::to_pu(row[5], base_mva)),
            angle_min,
            angle_max,
        });
    }
    if defaulted_angles > 0 {
        notes.push(format!(
            "{defaulted_angles} branches have no angle limits; defaulted to +/-60 degrees"
        ));
    }

    let network = Network::new(base_mva, buses, generators, branches, reference)?;
    Ok(ParsedCase { network, notes })
}

fn polynomial_cost(row: &[f64], gen: usize) -> IoResult<[f64; 3]> {
    let model = row[0];
    if model != 2.0 {
        return Err(IoError::UnsupportedCostModel {
            gen,
            reason: format!("cost model {model} (only polynomial model 2 is supported)"),
        });
    }
    let n = row[3];
    if !(0.0..=3.0).contains(&n) || n.fract() != 0.0 {
        return Err(IoError::UnsupportedCostModel {
            gen,
            reason: format!("{n} polynomial coefficients (at most 3 are supported)"),
        });
    }
    let n = n as usize;
    if row.len() < 4 + n {
        return Err(malformed(format!(
            "gencost row {gen} lists {n} coefficients but has only {} columns",
            row.len()
        )));
    }
    let mut c = [0.0; 3];
    for (k, &v) in row[4..4 + n].iter().enumerate() {
        c[3 - n + k] = v;
    }
    Ok(c)
}

enum Block {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

fn malformed(msg: impl Into<String>) -> IoError {
    IoError::MalformedCase(msg.into())
}

fn index(v: f64, what: &str) -> IoResult<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(malformed(format!(
            "{what} {v} is not a non-negative integer"
        )))
    }
}

fn matrix<'a>(
    blocks: &'a HashMap<String, Block>,
    name: &str,
    min_cols: usize,
) -> IoResult<&'a [Vec<f64>]> {
    match blocks.get(name) {
        Some(Block::Matrix(rows)) => {
            if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() < min_cols) {
                return Err(malformed(format!(
                    "mpc.{name} row {} has {} columns, expected at least {min_cols}",
                    i + 1,
                    r.len()
                )));
            }
            Ok(rows)
        }
        Some(Block::Scalar(_)) => Err(malformed(format!("mpc.{name} must be a matrix"))),
        None => Err(malformed(format!("missing mpc.{name}"))),
    }
}

fn strip_comment(line: &str) -> &str {
    line.split('%').next().unwrap_or("")
}

fn number(tok: &str) -> IoResult<f64> {
    match tok {
        "Inf" | "inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok
            .parse()
            .map_err(|_| malformed(format!("cannot parse {tok:?} as a number"))),
    }
}

/// Collects every `mpc.<name> = <scalar>;` and numeric `mpc.<name> = [ ... ];` block.
fn scan(text: &str) -> IoResult<HashMap<String, Block>> {
    let mut blocks = HashMap::new();
    let mut lines = text.lines();
    while let Some(raw) = lines.next() {
        let line = strip_comment(raw).trim();
        let Some(rest) = line.strip_prefix("mpc.") else {
            continue;
        };
        let Some((name, value)) = rest.split_once('=') else {
            continue;
        };
        let name = name.trim().to_string();
        let value = value.trim();
        if let Some(body) = value.strip_prefix('[') {
            let mut rows = Vec::new();
            let mut current: Vec<f64> = Vec::new();
            let mut pending = body.to_string();
            loop {
                let (chunk, closed) = match pending.split_once(']') {
                    Some((c, _)) => (c.to_string(), true),
                    None => (pending.clone(), false),
                };
                for part in chunk.split_inclusive(';') {
                    let ends_row = part.ends_with(';');
                    for tok in part
                        .trim_end_matches(';')
                        .split(|c: char| c.is_whitespace() || c == ',')
                    {
                        if !tok.is_empty() {
                            current.push(number(tok)?);
                        }
                    }
                    if ends_row && !current.is_empty() {
                        rows.push(std::mem::take(&mut current));
                    }
                }
                // A newline also terminates a row.
                if !current.is_empty() {
                    rows.push(std::mem::take(&mut current));
                }
                if closed {
                    break;
                }
                match lines.next() {
                    Some(next) => pending = strip_comment(next).to_string(),
                    None => return Err(malformed(format!("unterminated matrix mpc.{name}"))),
                }
            }
            if let Some(first) = rows.first() {
                let width = first.len();
                if let Some(i) = rows.iter().position(|r| r.len() != width) {
                    return Err(malformed(format!(
                        "mpc.{name} is ragged: row {} has {} columns, row 1 has {width}",
                        i + 1,
                        rows[i].len()
                    )));
                }
            }
            blocks.insert(name, Block::Matrix(rows));
        } else if !value.starts_with('{') && !value.starts_with('\'') {
            let v = value.trim_end_matches(';').trim();
            if let Ok(x) = number(v) {
                blocks.insert(name, Block::Scalar(x));
            }
        }
    }
    Ok(blocks)
}
