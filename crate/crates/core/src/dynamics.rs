//! Non-rigorous dynamics: orbits, rotation numbers on invariant circles by
//! weighted Birkhoff averages, angle-increment profiles and minimal
//! denominators in rational intervals.

use std::f64::consts::PI;

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::DynamicsError;
use crate::model::CoralModel;

/// Post-transient iterates of the coral map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSample {
    pub points: Vec<Vec<f64>>,
    pub lambda: f64,
    pub transient_skipped: usize,
}

impl OrbitSample {
    /// Projection onto `(x_1, x_2)`.
    pub fn plane(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|x| [x[0], x[1]]).collect()
    }
}

/// Iterates `x ↦ f(λ, x)`, discards `skip` iterates and keeps the next `n`.
pub fn iterate(model: &CoralModel, lambda: f64, x0: &[f64], n: usize, skip: usize) -> Result<OrbitSample, DynamicsError> {
    let mut points = Vec::with_capacity(n);
    run(model, lambda, x0, n, skip, |x| points.push(x.to_vec()))?;
    Ok(OrbitSample { points, lambda, transient_skipped: skip })
}

/// Like [`iterate`] but keeps only `(x_1, x_2)`, for long runs.
pub fn iterate_plane(model: &CoralModel, lambda: f64, x0: &[f64], n: usize, skip: usize) -> Result<Vec<[f64; 2]>, DynamicsError> {
    let mut points = Vec::with_capacity(n);
    run(model, lambda, x0, n, skip, |x| points.push([x[0], x[1]]))?;
    Ok(points)
}

fn run<F: FnMut(&[f64])>(model: &CoralModel, lambda: f64, x0: &[f64], n: usize, skip: usize, mut keep: F) -> Result<(), DynamicsError> {
    let coral = model.view::<f64>();
    let mut x = x0.to_vec();
    for i in 0..skip + n {
        x = coral.step(lambda, &x);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::OrbitDiverged(i + 1));
        }
        if i >= skip {
            keep(&x);
        }
    }
    Ok(())
}

/// Rotation number about a center, rescaled to `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationResult {
    pub rho: f64,
    pub center: [f64; 2],
    pub iterates_used: usize,
    /// `|ρ_N − ρ_{0.8N}|`.
    pub convergence_gap: f64,
}

/// Exponential bump `exp(−1/(s(1−s)))` on `(0, 1)`, zero elsewhere.
pub fn bump(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (s * (1.0 - s))).exp()
    }
}

/// Angle increments about `center`, wrapped to `(−π, π]`.
pub fn angle_increments(points: &[[f64; 2]], center: [f64; 2]) -> Result<Vec<f64>, DynamicsError> {
    let mut angles = Vec::with_capacity(points.len());
    for p in points {
        let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
        if dx == 0.0 && dy == 0.0 {
            return Err(DynamicsError::RotationUndefined("orbit hits the center".into()));
        }
        angles.push(dy.atan2(dx));
    }
    Ok(angles.windows(2).map(|w| wrap(w[1] - w[0])).collect())
}

fn wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

fn weighted_mean(inc: &[f64]) -> f64 {
    let n = inc.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, &d) in inc.iter().enumerate() {
        let w = bump(t as f64 / n);
        num += w * d;
        den += w;
    }
    num / den
}

fn check_monotone(inc: &[f64]) -> Result<(), DynamicsError> {
    let pos = inc.iter().filter(|&&d| d > 0.0).count();
    let neg = inc.iter().filter(|&&d| d < 0.0).count();
    let minority = pos.min(neg) as f64 / inc.len().max(1) as f64;
    if minority > 0.01 {
        return Err(DynamicsError::RotationUndefined(format!(
            "angle increments change sign persistently ({pos} positive, {neg} negative)"
        )));
    }
    Ok(())
}

/// Weighted Birkhoff rotation number `Σ ŵ(t/N)Δθ_t / (2π Σ ŵ(t/N))` of a
/// planar orbit about `center`.
pub fn rotation_number_plane(points: &[[f64; 2]], center: [f64; 2]) -> Result<RotationResult, DynamicsError> {
    if points.len() < 3 {
        return Err(DynamicsError::RotationUndefined("orbit too short".into()));
    }
    let inc = angle_increments(points, center)?;
    check_monotone(&inc)?;
    let full = weighted_mean(&inc) / (2.0 * PI);
    let part = weighted_mean(&inc[..(inc.len() * 4) / 5]) / (2.0 * PI);
    Ok(RotationResult {
        rho: full.rem_euclid(1.0),
        center,
        iterates_used: points.len(),
        convergence_gap: (full - part).abs(),
    })
}

/// [`rotation_number_plane`] on the `(x_1, x_2)` projection.
pub fn rotation_number(orbit: &OrbitSample, center: [f64; 2]) -> Result<RotationResult, DynamicsError> {
    rotation_number_plane(&orbit.plane(), center)
}

/// Plain (unweighted) Birkhoff average, for comparison.
pub fn plain_rotation_number(points: &[[f64; 2]], center: [f64; 2]) -> Result<f64, DynamicsError> {
    let inc = angle_increments(points, center)?;
    check_monotone(&inc)?;
    Ok((inc.iter().sum::<f64>() / inc.len() as f64 / (2.0 * PI)).rem_euclid(1.0))
}

/// One bin of an angle profile; angles and increments are in revolutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileBin {
    pub angle: f64,
    pub mean_increment: f64,
    pub count: usize,
    /// No samples fell in the bin; the value is interpolated.
    pub interpolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleProfile {
    pub bins: Vec<ProfileBin>,
    /// Rescaled angle in `[0, 1)` where the mean increment is smallest.
    pub min_angle: f64,
    pub min_increment: f64,
}

/// Mean angle increment as a function of the rescaled angle
/// `atan2(x_2 − c_2, x_1 − c_1)/(2π) mod 1`.
pub fn angle_profile(points: &[[f64; 2]], center: [f64; 2], bins: usize) -> Result<AngleProfile, DynamicsError> {
    if bins == 0 {
        return Err(DynamicsError::InvalidBounds("bins must be positive".into()));
    }
    let inc = angle_increments(points, center)?;
    let mut sum = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for (p, d) in points.iter().zip(&inc) {
        let a = ((p[1] - center[1]).atan2(p[0] - center[0]) / (2.0 * PI)).rem_euclid(1.0);
        let k = ((a * bins as f64) as usize).min(bins - 1);
        sum[k] += d / (2.0 * PI);
        count[k] += 1;
    }
    if count.iter().all(|&c| c == 0) {
        return Err(DynamicsError::RotationUndefined("no angle samples".into()));
    }
    let mut out: Vec<ProfileBin> = (0..bins)
        .map(|k| ProfileBin {
            angle: (k as f64 + 0.5) / bins as f64,
            mean_increment: if count[k] > 0 { sum[k] / count[k] as f64 } else { f64::NAN },
            count: count[k],
            interpolated: count[k] == 0,
        })
        .collect();
    // circular linear interpolation over empty bins
    for k in 0..bins {
        if !out[k].interpolated {
            continue;
        }
        let (mut l, mut dl) = (k, 0);
        while out[l].interpolated {
            l = (l + bins - 1) % bins;
            dl += 1;
        }
        let (mut r, mut dr) = (k, 0);
        while out[r].interpolated {
            r = (r + 1) % bins;
            dr += 1;
        }
        let w = dl as f64 / (dl + dr) as f64;
        out[k].mean_increment = (1.0 - w) * out[l].mean_increment + w * out[r].mean_increment;
    }
    let (kmin, bmin) = out
        .iter()
        .enumerate()
        .filter(|(_, b)| !b.interpolated)
        .min_by(|a, b| a.1.mean_increment.total_cmp(&b.1.mean_increment))
        .expect("some bin is populated");
    // parabola through the minimum bin and its neighbours
    let (ym, y0, yp) = (
        out[(kmin + bins - 1) % bins].mean_increment,
        bmin.mean_increment,
        out[(kmin + 1) % bins].mean_increment,
    );
    let den = ym - 2.0 * y0 + yp;
    let shift = if bins >= 3 && den > 0.0 { (0.5 * (ym - yp) / den).clamp(-0.5, 0.5) } else { 0.0 };
    let min_angle = ((kmin as f64 + 0.5 + shift) / bins as f64).rem_euclid(1.0);
    Ok(AngleProfile { min_increment: bmin.mean_increment, bins: out, min_angle })
}

/// Exact rational used by the Farey search.
pub type Rational = Ratio<i128>;

/// Largest number of fractional digits kept exactly; longer decimals are
/// rounded outward.
const MAX_DIGITS: usize = 30;

/// Which side of the true value a rounded decimal must land on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    Down,
    Up,
}

/// Parses a decimal such as `0.126` exactly; digits beyond the thirtieth
/// are rounded in the given direction.
pub fn parse_rational(s: &str, dir: Rounding) -> Result<Rational, DynamicsError> {
    let bad = || DynamicsError::InvalidBounds(format!("`{s}` is not a decimal number"));
    let t = s.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| bad())?;
        let d: i128 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let keep = &frac[..frac.len().min(MAX_DIGITS)];
    let dropped = frac[keep.len()..].bytes().any(|b| b != b'0');
    let digits = format!("{int}{keep}");
    let mut num: i128 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
    let den = 10i128.checked_pow(keep.len() as u32).ok_or_else(bad)?;
    // the magnitude was truncated; move outward in the requested direction
    if dropped && ((dir == Rounding::Up) != neg) {
        num += 1;
    }
    if neg {
        num = -num;
    }
    Ok(Rational::new(num, den))
}

/// Fraction with the smallest denominator in `[lo, hi]`, ties to the
/// smaller numerator, by Stern–Brocot descent (run lengths taken in one
/// step, as in a continued-fraction expansion).
pub fn farey_min_denominator(lo: Rational, hi: Rational) -> Result<(i128, i128), DynamicsError> {
    if !(lo > Rational::zero() && lo < hi && hi < Rational::one()) {
        return Err(DynamicsError::InvalidBounds(format!("need 0 < lo < hi < 1, got [{lo}, {hi}]")));
    }
    let r = simplest_in(lo, hi);
    Ok((*r.numer(), *r.denom()))
}

fn simplest_in(lo: Rational, hi: Rational) -> Rational {
    let fl = lo.floor();
    if fl == lo {
        return lo;
    }
    if fl + Rational::one() <= hi {
        return fl + Rational::one();
    }
    // both ends lie in (fl, fl + 1): descend into the reciprocal interval
    let inner = simplest_in((hi - fl).recip(), (lo - fl).recip());
    fl + inner.recip()
}

/// Minimal denominator by scanning `q = 1..=q_max`; the test oracle.
pub fn farey_scan(lo: Rational, hi: Rational, q_max: i128) -> Option<(i128, i128)> {
    (1..=q_max).find_map(|q| {
        let p = (lo * q).ceil().to_integer();
        (Rational::new(p, q) <= hi).then_some((p, q))
    })
    .map(|(p, q)| {
        let r = Rational::new(p, q);
        (*r.numer(), *r.denom())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coral_rotation_interval() {
        let lo = parse_rational("0.126", Rounding::Down).unwrap();
        let hi = parse_rational("0.129", Rounding::Up).unwrap();
        assert_eq!(farey_min_denominator(lo, hi).unwrap(), (5, 39));
        assert_eq!(farey_scan(lo, hi, 20000), Some((5, 39)));
    }

    #[test]
    fn outward_rounding() {
        let s = "0.1234567890123456789012345678901";
        assert!(parse_rational(s, Rounding::Down).unwrap() < parse_rational(s, Rounding::Up).unwrap());
        assert_eq!(parse_rational("0.25", Rounding::Up).unwrap(), Rational::new(1, 4));
    }

    #[test]
    fn rigid_rotation() {
        let w = (5f64.sqrt() - 1.0) / 2.0;
        let pts: Vec<[f64; 2]> = (0..10_001).map(|t| {
            let a = 2.0 * PI * w * t as f64;
            [a.cos(), a.sin()]
        }).collect();
        let r = rotation_number_plane(&pts, [0.0, 0.0]).unwrap();
        assert!((r.rho - w).abs() < 1e-12, "{}", r.rho);
    }
}
