//! MW/degree to per-unit/radian conversions and their exact inverses.
//!
//! The inverse functions return a value that converts back to the given
//! per-unit value bit for bit whenever such a value exists nearby, so that
//! writing a parsed network and reading it again is lossless.

pub const DEFAULT_ANGLE_LIMIT: f64 = std::f64::consts::FRAC_PI_3;

const DEG: f64 = std::f64::consts::PI / 180.0;

pub fn to_pu(mw: f64, base: f64) -> f64 {
    mw / base
}

pub fn cost2_to_pu(c2: f64, base: f64) -> f64 {
    c2 * (base * base)
}

pub fn cost1_to_pu(c1: f64, base: f64) -> f64 {
    c1 * base
}

pub fn deg_to_rad(deg: f64) -> f64 {
    deg * DEG
}

pub fn from_pu(pu: f64, base: f64) -> f64 {
    invert(pu, pu * base, |x| to_pu(x, base))
}

pub fn cost2_from_pu(c2: f64, base: f64) -> f64 {
    invert(c2, c2 / (base * base), |x| cost2_to_pu(x, base))
}

pub fn cost1_from_pu(c1: f64, base: f64) -> f64 {
    invert(c1, c1 / base, |x| cost1_to_pu(x, base))
}

pub fn rad_to_deg(rad: f64) -> f64 {
    invert(rad, rad / DEG, deg_to_rad)
}

fn step(x: f64, up: bool) -> f64 {
    if x == 0.0 {
        let tiny = f64::from_bits(1);
        return if up { tiny } else { -tiny };
    }
    let bits = x.to_bits();
    let away = (x > 0.0) == up;
    f64::from_bits(if away { bits + 1 } else { bits - 1 })
}

/// Searches a few ulps around `guess` for `x` with `forward(x) == target`,
/// preferring the candidate with the shortest decimal form.
fn invert(target: f64, guess: f64, forward: impl Fn(f64) -> f64) -> f64 {
    if !guess.is_finite() {
        return guess;
    }
    let mut best: Option<(usize, f64)> = None;
    let consider = |best: &mut Option<(usize, f64)>, x: f64| {
        if forward(x) == target {
            let len = format!("{x}").len();
            if best.map_or(true, |(l, _)| len < l) {
                *best = Some((len, x));
            }
        }
    };
    consider(&mut best, guess);
    let (mut lo, mut hi) = (guess, guess);
    for radius in 1..=64 {
        lo = step(lo, false);
        hi = step(hi, true);
        consider(&mut best, lo);
        consider(&mut best, hi);
        if radius >= 8 && best.is_some() {
            break;
        }
    }
    best.map_or(guess, |(_, x)| x)
}
