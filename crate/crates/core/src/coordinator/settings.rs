use crate::decomposition::{AlgoParams, Variant};
use crate::{Error, Result};

/// One named row of the parameter registry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setting {
    pub name: char,
    pub nu: f64,
    pub rho_pq: f64,
    pub rho_vth: f64,
    pub alpha_i: f64,
    pub alpha_ij: f64,
}

impl Setting {
    pub fn params(&self, variant: Variant, epsilon: f64) -> AlgoParams {
        AlgoParams {
            variant,
            nu: self.nu,
            rho_pq: self.rho_pq,
            rho_vth: self.rho_vth,
            alpha_i: self.alpha_i,
            alpha_ij: self.alpha_ij,
            epsilon,
        }
    }
}

const fn row(
    name: char,
    nu: f64,
    rho_pq: f64,
    rho_vth: f64,
    alpha_i: f64,
    alpha_ij: f64,
) -> Setting {
    Setting {
        name,
        nu,
        rho_pq,
        rho_vth,
        alpha_i,
        alpha_ij,
    }
}

/// Settings `A` to `T` as `(nu, rho_pq, rho_vth, alpha_i, alpha_ij)`.
pub const SETTINGS: [Setting; 20] = [
    row('A', 3000.0, 30.0, 300000.0, 300.0, 300000.0),
    row('B', 1000.0, 100.0, 10000.0, 100.0, 10000.0),
    row('C', 1000.0, 1000.0, 100000.0, 100.0, 100000.0),
    row('D', 100.0, 1.0, 10000.0, 10.0, 10000.0),
    row('E', 5000.0, 500.0, 50000.0, 500.0, 50000.0),
    row('F', 3000.0, 300.0, 300000.0, 300.0, 300000.0),
    row('G', 100.0, 10.0, 1000.0, 10.0, 1000.0),
    row('H', 5000.0, 500.0, 500000.0, 500.0, 500000.0),
    row('I', 100.0, 10.0, 10000.0, 10.0, 10000.0),
    row('J', 10000.0, 100.0, 100000.0, 1000.0, 100000.0),
    row('K', 10000.0, 1000.0, 10000.0, 1000.0, 10000.0),
    row('L', 1000.0, 100.0, 100000.0, 100.0, 100000.0),
    row('M', 8000.0, 800.0, 800000.0, 800.0, 800000.0),
    row('N', 5000.0, 500.0, 100000.0, 500.0, 100000.0),
    row('O', 80000.0, 8000.0, 100000.0, 8000.0, 100000.0),
    row('P', 10000.0, 1000.0, 100000.0, 1000.0, 100000.0),
    row('Q', 10000.0, 1000.0, 100000.0, 1000.0, 100000.0),
    row('R', 1000.0, 10.0, 10000.0, 100.0, 10000.0),
    row('S', 50000.0, 5000.0, 500000.0, 5000.0, 500000.0),
    row('T', 8000.0, 800.0, 100000.0, 800.0, 100000.0),
];

/// Looks up a setting by letter (case-insensitive).
pub fn lookup_setting(name: &str) -> Result<Setting> {
    let mut chars = name.trim().chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => SETTINGS
            .iter()
            .find(|s| s.name == c.to_ascii_uppercase())
            .copied()
            .ok_or_else(|| Error::UnknownSetting(name.into())),
        _ => Err(Error::UnknownSetting(name.into())),
    }
}
