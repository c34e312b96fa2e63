//! Per-unit network model.
//!
//! All quantities held here are per-unit on the system base; unit conversion
//! from MW/MVAr/degrees happens once, in whatever reader produced the
//! [`Network`]. Generator costs are stored so that `c2 * p^2 + c1 * p + c0`
//! with `p` in per-unit yields $/hr directly.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub g_sh: f64,
    pub b_sh: f64,
    pub p_d: f64,
    pub q_d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub id: usize,
    /// Id (not index) of the bus the generator is attached to.
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl Generator {
    pub fn cost(&self, p: f64) -> f64 {
        (self.c2 * p + self.c1) * p + self.c0
    }
}

/// A pi-model branch. Lines have `tap == 1` and `shift == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series resistance (p.u.).
    pub r: f64,
    /// Series reactance (p.u.).
    pub x: f64,
    /// Total line charging susceptance (p.u.).
    pub b_ch: f64,
    pub tap: f64,
    /// Phase shift (rad).
    pub shift: f64,
    /// Apparent power rating (p.u.); `None` means no thermal limit.
    pub s_max: Option<f64>,
    /// Angle difference bounds (rad).
    pub angle_min: f64,
    pub angle_max: f64,
}

impl Branch {
    /// A plain transmission line with no thermal or angle limits.
    pub fn line(from_bus: usize, to_bus: usize, r: f64, x: f64, b_ch: f64) -> Self {
        Self {
            from_bus,
            to_bus,
            r,
            x,
            b_ch,
            tap: 1.0,
            shift: 0.0,
            s_max: None,
            angle_min: -core::f64::consts::PI,
            angle_max: core::f64::consts::PI,
        }
    }

    /// Series admittance `1 / (r + jx)`.
    pub fn series_admittance(&self) -> Complex64 {
        Complex64::new(1.0, 0.0) / Complex64::new(self.r, self.x)
    }

    /// Complex tap ratio `tap * e^{j shift}`.
    pub fn complex_tap(&self) -> Complex64 {
        Complex64::new(
            self.tap * libm::cos(self.shift),
            self.tap * libm::sin(self.shift),
        )
    }
}

/// Real coefficients of the polar branch flow equations.
///
/// From side (`ff`): `p_f = g_c_ff v_f^2 - g_ff v_f v_t cos(d) + b_ff v_f v_t sin(d)` with
/// `d = th_f - th_t`, and the to side (`tt`) analogously with the roles swapped.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BranchCoeffs {
    pub g_c_ff: f64,
    pub b_c_ff: f64,
    pub g_ff: f64,
    pub b_ff: f64,
    pub g_c_tt: f64,
    pub b_c_tt: f64,
    pub g_tt: f64,
    pub b_tt: f64,
}

/// Computes the eight flow coefficients of a branch.
///
/// With `Y*` the conjugate series admittance and `T` the complex tap:
/// `g_c_ff + j b_c_ff = (Y* - j b_ch/2) / |T|^2`, `g_ff + j b_ff = Y* / T`,
/// `g_c_tt + j b_c_tt = Y* - j b_ch/2`, `g_tt + j b_tt = Y* / conj(T)`.
pub fn branch_coeffs(b: &Branch) -> Result<BranchCoeffs> {
    if !(b.tap > 0.0) {
        return Err(Error::ZeroTap {
            from: b.from_bus,
            to: b.to_bus,
        });
    }
    let y_conj = b.series_admittance().conj();
    let t = b.complex_tap();
    let half_ch = Complex64::new(0.0, b.b_ch / 2.0);
    let shunt_f = (y_conj - half_ch) / t.norm_sqr();
    let series_f = y_conj / t;
    let shunt_t = y_conj - half_ch;
    let series_t = y_conj / t.conj();
    Ok(BranchCoeffs {
        g_c_ff: shunt_f.re,
        b_c_ff: shunt_f.im,
        g_ff: series_f.re,
        b_ff: series_f.im,
        g_c_tt: shunt_t.re,
        b_c_tt: shunt_t.im,
        g_tt: series_t.re,
        b_tt: series_t.im,
    })
}

/// Which side of a branch touches a given bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    From,
    To,
}

impl End {
    /// Slot of this end in per-branch-end arrays (`2 * branch + slot`).
    pub fn slot(self) -> usize {
        match self {
            End::From => 0,
            End::To => 1,
        }
    }
}

/// A branch end incident to a bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub branch: usize,
    pub end: End,
}

impl Incidence {
    /// Index into per-branch-end arrays.
    pub fn end_index(&self) -> usize {
        2 * self.branch + self.end.slot()
    }
}

/// Immutable per-unit network with precomputed topology and branch coefficients.
#[derive(Debug, Clone)]
pub struct Network {
    base_mva: f64,
    buses: Vec<Bus>,
    generators: Vec<Generator>,
    branches: Vec<Branch>,
    reference_bus: usize,
    coeffs: Vec<BranchCoeffs>,
    branch_buses: Vec<(usize, usize)>,
    gen_bus: Vec<usize>,
    bus_ends: Vec<Vec<Incidence>>,
    bus_gens: Vec<Vec<usize>>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        // Everything else is derived from these fields.
        self.base_mva == other.base_mva
            && self.buses == other.buses
            && self.generators == other.generators
            && self.branches == other.branches
            && self.reference_bus == other.reference_bus
    }
}

impl Network {
    /// Validates and indexes a network.
    ///
    /// `reference_bus` is a bus id; when `None` the bus of the first generator
    /// (or the first bus) is used. It only matters for the centralized solve,
    /// which pins that bus angle to zero.
    pub fn new(
        base_mva: f64,
        buses: Vec<Bus>,
        generators: Vec<Generator>,
        branches: Vec<Branch>,
        reference_bus: Option<usize>,
    ) -> Result<Self> {
        if buses.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        if !(base_mva > 0.0) {
            return Err(invalid(
                "baseMVA",
                format!("must be positive, got {base_mva}"),
            ));
        }

        let mut index_of: Vec<(usize, usize)> =
            buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        index_of.sort_unstable();
        for w in index_of.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateBus(w[0].0));
            }
        }
        let lookup = |id: usize| -> Option<usize> {
            index_of
                .binary_search_by_key(&id, |&(bid, _)| bid)
                .ok()
                .map(|k| index_of[k].1)
        };

        for b in &buses {
            if !(b.v_min > 0.0 && b.v_min <= b.v_max) {
                return Err(invalid(
                    &format!("bus {}", b.id),
                    format!(
                        "voltage bounds must satisfy 0 < v_min <= v_max, got [{}, {}]",
                        b.v_min, b.v_max
                    ),
                ));
            }
        }

        let mut gen_bus = Vec::with_capacity(generators.len());
        for g in &generators {
            let Some(i) = lookup(g.bus) else {
                return Err(Error::DanglingReference {
                    what: format!("generator {}", g.id),
                    bus: g.bus,
                });
            };
            if !(g.p_min <= g.p_max) || !(g.q_min <= g.q_max) {
                return Err(invalid(
                    &format!("generator {}", g.id),
                    "dispatch bounds are inverted".to_string(),
                ));
            }
            if !(g.c2 >= 0.0) {
                return Err(invalid(
                    &format!("generator {}", g.id),
                    format!("quadratic cost {} is negative", g.c2),
                ));
            }
            gen_bus.push(i);
        }

        let mut branch_buses = Vec::with_capacity(branches.len());
        let mut coeffs = Vec::with_capacity(branches.len());
        for br in &branches {
            let what = || format!("branch {}-{}", br.from_bus, br.to_bus);
            let f = lookup(br.from_bus).ok_or_else(|| Error::DanglingReference {
                what: what(),
                bus: br.from_bus,
            })?;
            let t = lookup(br.to_bus).ok_or_else(|| Error::DanglingReference {
                what: what(),
                bus: br.to_bus,
            })?;
            if f == t {
                return Err(invalid(&what(), "is a self loop".to_string()));
            }
            if !(br.angle_min < br.angle_max) {
                return Err(invalid(
                    &what(),
                    "angle bounds must satisfy angle_min < angle_max".to_string(),
                ));
            }
            if let Some(s) = br.s_max {
                if !(s > 0.0) {
                    return Err(invalid(
                        &what(),
                        format!("thermal rating {s} must be positive"),
                    ));
                }
            }
            if br.r == 0.0 && br.x == 0.0 {
                return Err(invalid(&what(), "has zero series impedance".to_string()));
            }
            coeffs.push(branch_coeffs(br)?);
            branch_buses.push((f, t));
        }

        let mut bus_ends = vec![Vec::new(); buses.len()];
        for (l, &(f, t)) in branch_buses.iter().enumerate() {
            bus_ends[f].push(Incidence {
                branch: l,
                end: End::From,
            });
            bus_ends[t].push(Incidence {
                branch: l,
                end: End::To,
            });
        }
        let mut bus_gens = vec![Vec::new(); buses.len()];
        for (g, &i) in gen_bus.iter().enumerate() {
            bus_gens[i].push(g);
        }

        // connectivity via iterative DFS
        let mut seen = vec![false; buses.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for inc in &bus_ends[i] {
                let (f, t) = branch_buses[inc.branch];
                let j = if f == i { t } else { f };
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Disconnected);
        }

        let reference_bus = match reference_bus {
            Some(id) => lookup(id).ok_or_else(|| Error::DanglingReference {
                what: "reference bus".to_string(),
                bus: id,
            })?,
            None => gen_bus.first().copied().unwrap_or(0),
        };

        Ok(Self {
            base_mva,
            buses,
            generators,
            branches,
            reference_bus,
            coeffs,
            branch_buses,
            gen_bus,
            bus_ends,
            bus_gens,
        })
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    /// Index of the angle reference bus.
    pub fn reference_bus(&self) -> usize {
        self.reference_bus
    }

    /// Flow coefficients of branch `l`.
    pub fn coeffs(&self, l: usize) -> &BranchCoeffs {
        &self.coeffs[l]
    }

    /// Bus indices `(from, to)` of branch `l`.
    pub fn branch_buses(&self, l: usize) -> (usize, usize) {
        self.branch_buses[l]
    }

    /// Bus index of generator `g`.
    pub fn gen_bus(&self, g: usize) -> usize {
        self.gen_bus[g]
    }

    /// Branch ends incident to bus `i`, in branch order.
    pub fn bus_ends(&self, i: usize) -> &[Incidence] {
        &self.bus_ends[i]
    }

    /// Generators attached to bus `i`, in generator order.
    pub fn bus_gens(&self, i: usize) -> &[usize] {
        &self.bus_gens[i]
    }

    /// Index of the bus with the given id.
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }
}

fn invalid(what: &str, reason: alloc::string::String) -> Error {
    Error::InvalidData {
        what: what.to_string(),
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

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

    fn gen(id: usize, bus: usize) -> Generator {
        Generator {
            id,
            bus,
            p_min: 0.0,
            p_max: 1.0,
            q_min: -1.0,
            q_max: 1.0,
            c2: 1.0,
            c1: 1.0,
            c0: 0.0,
        }
    }

    /// Independent evaluation of the closed forms via the pi-model admittances.
    fn oracle(b: &Branch) -> BranchCoeffs {
        let y = Complex64::new(1.0, 0.0) / Complex64::new(b.r, b.x);
        let t = Complex64::from_polar(b.tap, b.shift);
        let jb = Complex64::new(0.0, b.b_ch / 2.0);
        // I_f = y_ff V_f + y_ft V_t, S_f = V_f conj(I_f); the coefficients are the
        // conjugates of the admittance entries (with y_ft, y_tf negated).
        let y_ff = (y + jb) / (t * t.conj());
        let y_ft = -y / t.conj();
        let y_tt = y + jb;
        let y_tf = -y / t;
        BranchCoeffs {
            g_c_ff: y_ff.conj().re,
            b_c_ff: y_ff.conj().im,
            g_ff: (-y_ft).conj().re,
            b_ff: (-y_ft).conj().im,
            g_c_tt: y_tt.conj().re,
            b_c_tt: y_tt.conj().im,
            g_tt: (-y_tf).conj().re,
            b_tt: (-y_tf).conj().im,
        }
    }

    fn assert_close(a: &BranchCoeffs, b: &BranchCoeffs, tol: f64) {
        let fa = [
            a.g_c_ff, a.b_c_ff, a.g_ff, a.b_ff, a.g_c_tt, a.b_c_tt, a.g_tt, a.b_tt,
        ];
        let fb = [
            b.g_c_ff, b.b_c_ff, b.g_ff, b.b_ff, b.g_c_tt, b.b_c_tt, b.g_tt, b.b_tt,
        ];
        for (x, y) in fa.iter().zip(fb.iter()) {
            assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{fa:?} vs {fb:?}");
        }
    }

    #[test]
    fn plain_line_coefficients() {
        let br = Branch::line(1, 2, 0.01, 0.1, 0.0);
        let c = branch_coeffs(&br).unwrap();
        // Y = 1/(0.01+0.1j) = (0.990099..., -9.90099...) so Y* = (0.990099, 9.90099)
        assert!((c.g_ff - 0.990_099_009_900_990_1).abs() < 1e-12);
        assert!((c.b_ff - 9.900_990_099_009_901).abs() < 1e-12);
        assert_eq!(c.g_c_ff, c.g_ff);
        assert_eq!(c.b_c_ff, c.b_ff);
        assert_eq!(c.g_c_tt, c.g_c_ff);
        assert_eq!(c.b_tt, c.b_ff);
        assert_close(&c, &oracle(&br), 1e-14);
    }

    #[test]
    fn tap_two_scales_from_side() {
        let mut br = Branch::line(1, 2, 0.02, 0.3, 0.0);
        br.tap = 2.0;
        let c = branch_coeffs(&br).unwrap();
        assert!((c.g_c_ff - c.g_c_tt / 4.0).abs() < 1e-14);
        assert!((c.b_c_ff - c.b_c_tt / 4.0).abs() < 1e-14);
        // Both series terms carry one factor of the (real) tap.
        let y_conj = br.series_admittance().conj();
        assert!((c.g_ff - y_conj.re / 2.0).abs() < 1e-14);
        assert!((c.b_ff - y_conj.im / 2.0).abs() < 1e-14);
        assert_eq!((c.g_ff, c.b_ff), (c.g_tt, c.b_tt));
        assert_close(&c, &oracle(&br), 1e-14);
    }

    #[test]
    fn quarter_turn_shift() {
        let mut br = Branch::line(1, 2, 0.01, 0.1, 0.05);
        br.shift = core::f64::consts::FRAC_PI_2;
        let c = branch_coeffs(&br).unwrap();
        let y_conj = br.series_admittance().conj();
        // Y*/j = -j Y*  =>  real part is Im(Y*)
        assert!((c.g_ff - y_conj.im).abs() < 1e-12);
        assert_close(&c, &oracle(&br), 1e-12);
    }

    #[test]
    fn coefficients_match_admittance_oracle() {
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..500 {
            let mut br = Branch::line(
                1,
                2,
                0.001 + 0.1 * next(),
                0.01 + 0.5 * next(),
                0.5 * next(),
            );
            br.tap = 0.8 + 0.4 * next();
            br.shift = -0.5 + next();
            let c = branch_coeffs(&br).unwrap();
            assert_close(&c, &oracle(&br), 1e-12);
            assert_eq!(c, branch_coeffs(&br).unwrap());
        }
    }

    #[test]
    fn zero_tap_rejected() {
        let mut br = Branch::line(1, 2, 0.01, 0.1, 0.0);
        br.tap = 0.0;
        assert!(matches!(branch_coeffs(&br), Err(Error::ZeroTap { .. })));
    }

    #[test]
    fn three_bus_topology() {
        let net = Network::new(
            100.0,
            vec![bus(1), bus(2), bus(3)],
            vec![gen(1, 1), gen(2, 2)],
            vec![
                Branch::line(1, 2, 0.01, 0.1, 0.0),
                Branch::line(2, 3, 0.01, 0.1, 0.0),
                Branch::line(1, 3, 0.01, 0.1, 0.0),
            ],
            None,
        )
        .unwrap();
        assert_eq!(net.n_buses(), 3);
        assert_eq!(net.n_branches(), 3);
        assert_eq!(net.n_generators(), 2);
        assert_eq!(net.bus_ends(0).len(), 2);
        assert_eq!(net.bus_gens(1), &[1]);
        assert_eq!(net.reference_bus(), 0);
        assert_eq!(net.bus_index(3), Some(2));
    }

    #[test]
    fn validation_errors() {
        let dup = Network::new(100.0, vec![bus(1), bus(1)], vec![], vec![], None);
        assert_eq!(dup.unwrap_err(), Error::DuplicateBus(1));

        let dangling = Network::new(
            100.0,
            vec![bus(1), bus(2)],
            vec![],
            vec![Branch::line(1, 7, 0.01, 0.1, 0.0)],
            None,
        );
        assert!(matches!(
            dangling,
            Err(Error::DanglingReference { bus: 7, .. })
        ));

        let split = Network::new(100.0, vec![bus(1), bus(2)], vec![], vec![], None);
        assert_eq!(split.unwrap_err(), Error::Disconnected);

        assert_eq!(
            Network::new(100.0, vec![], vec![], vec![], None).unwrap_err(),
            Error::EmptyNetwork
        );

        let mut bad = bus(1);
        bad.v_min = 1.2;
        assert!(matches!(
            Network::new(100.0, vec![bad], vec![], vec![], None),
            Err(Error::InvalidData { .. })
        ));
    }
}
