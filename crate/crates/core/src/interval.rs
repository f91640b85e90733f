//! Inf-sup interval arithmetic with outward rounding.
//!
//! Basic operations are rounded with error-free transformations: the exact
//! rounding error of `a + b`, `a * b`, `a / b` and `sqrt(a)` is recovered with
//! `two_sum` or a fused multiply-add, and the endpoint is moved one ulp only
//! when that error points outward. Results that are already exact stay exact.
//! Transcendentals rely on the platform libm and get a two-ulp guard.
//!
//! No global rounding mode is touched, so everything here is thread safe.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};

use nalgebra::{DMatrix, DVector};
use num_traits::{Num, One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::IntervalError;

/// Below this magnitude fma-based error terms may be inexact (subnormals).
const TINY: f64 = 1e-290;

#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

pub type IVector = DVector<Interval>;
pub type IMatrix = DMatrix<Interval>;

#[inline]
fn down(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        x
    } else {
        x.next_down()
    }
}

#[inline]
fn up(x: f64) -> f64 {
    if x == f64::INFINITY {
        x
    } else {
        x.next_up()
    }
}

/// Turns a rounded value `r` and the sign of the neglected error into a tight
/// enclosure of the exact result.
#[inline]
fn bracket(r: f64, err: f64) -> (f64, f64) {
    bracket_with(r, err, false)
}

/// `exact_err` says the error term is exact even for tiny results (true
/// for `two_sum`, false for fma-based products near the subnormal range).
#[inline]
fn bracket_with(r: f64, err: f64, exact_err: bool) -> (f64, f64) {
    if !r.is_finite() {
        // overflow saturates to the extended reals
        if r.is_nan() {
            return (f64::NAN, f64::NAN);
        }
        return if r > 0.0 { (f64::MAX, r) } else { (r, f64::MIN) };
    }
    if !exact_err && r.abs() < TINY {
        return (down(r), up(r));
    }
    match err.partial_cmp(&0.0) {
        Some(Ordering::Greater) => (r, up(r)),
        Some(Ordering::Less) => (down(r), r),
        Some(Ordering::Equal) => (r, r),
        None => (down(r), up(r)),
    }
}

#[inline]
fn add_rd_ru(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    if !s.is_finite() {
        return bracket(s, 0.0);
    }
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    bracket_with(s, err, true)
}

#[inline]
fn mul_rd_ru(a: f64, b: f64) -> (f64, f64) {
    if a == 0.0 || b == 0.0 {
        // also avoids 0 * inf producing NaN for saturated endpoints
        return (0.0, 0.0);
    }
    let p = a * b;
    if !p.is_finite() {
        return bracket(p, 0.0);
    }
    let err = a.mul_add(b, -p);
    bracket(p, err)
}

#[inline]
fn div_rd_ru(a: f64, b: f64) -> (f64, f64) {
    if a == 0.0 {
        return (0.0, 0.0);
    }
    if b.is_infinite() {
        return if a.is_infinite() { (f64::NEG_INFINITY, f64::INFINITY) } else { (down(0.0), up(0.0)) };
    }
    let q = a / b;
    if !q.is_finite() {
        return bracket(q, 0.0);
    }
    // a - q*b is exact; the true quotient is q + r/b
    let r = (-q).mul_add(b, a);
    bracket(q, r * b.signum())
}

#[inline]
fn sqrt_rd_ru(a: f64) -> (f64, f64) {
    let s = a.sqrt();
    if s == 0.0 || !s.is_finite() {
        return (s, s);
    }
    let r = (-s).mul_add(s, a);
    let (lo, hi) = bracket(s, r);
    (lo.max(0.0), hi)
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };
    pub const ENTIRE: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    /// Builds `[lo, hi]`. Panics when `lo > hi` or either bound is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "invalid interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn try_new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo <= hi {
            Ok(Interval { lo, hi })
        } else {
            Err(IntervalError::InvalidBounds { lo, hi })
        }
    }

    pub const fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Enclosure of the real number written as the decimal `x` in source.
    ///
    /// Integers below 2^53 are exact; anything else is widened by one ulp on
    /// each side, which covers the round-to-nearest conversion error.
    pub fn from_decimal(x: f64) -> Self {
        if x.fract() == 0.0 && x.abs() < 9.007_199_254_740_992e15 {
            Interval::point(x)
        } else {
            Interval { lo: down(x), hi: up(x) }
        }
    }

    /// Parses a decimal string into an enclosure of its exact value.
    pub fn parse_decimal(s: &str) -> Result<Self, IntervalError> {
        let x: f64 = s.trim().parse().map_err(|_| IntervalError::Parse(s.to_string()))?;
        Ok(Interval::from_decimal(x))
    }

    /// Interval of radius `r` around `m`, rounded outward.
    pub fn centered(m: f64, r: f64) -> Self {
        Interval::point(m) + Interval::new(-r, r)
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_nan(&self) -> bool {
        self.lo.is_nan() || self.hi.is_nan()
    }

    pub fn mid(&self) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        if self.lo.is_infinite() || self.hi.is_infinite() {
            if self.lo.is_infinite() && self.hi.is_infinite() {
                return 0.0;
            }
            return if self.lo.is_infinite() { self.hi } else { self.lo };
        }
        0.5 * self.lo + 0.5 * self.hi
    }

    /// Upper bound on the width.
    pub fn width(&self) -> f64 {
        add_rd_ru(self.hi, -self.lo).1
    }

    /// Upper bound on the radius around `mid()`.
    pub fn rad(&self) -> f64 {
        let m = self.mid();
        add_rd_ru(self.hi, -m).1.max(add_rd_ru(m, -self.lo).1)
    }

    /// Largest absolute value.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value.
    pub fn mig(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn abs(self) -> Self {
        Interval { lo: self.mig(), hi: self.mag() }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_subset(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Interior inclusion, used for strict inequalities.
    pub fn is_interior(&self, other: &Interval) -> bool {
        other.lo < self.lo && self.hi < other.hi
    }

    pub fn hull(&self, other: &Interval) -> Self {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Widens by `r` on both sides.
    pub fn inflate(&self, r: f64) -> Self {
        *self + Interval::new(-r, r)
    }

    /// True when every element is strictly below every element of `other`.
    pub fn certainly_lt(&self, other: &Interval) -> bool {
        self.hi < other.lo
    }

    pub fn certainly_positive(&self) -> bool {
        self.lo > 0.0
    }

    pub fn certainly_negative(&self) -> bool {
        self.hi < 0.0
    }

    pub fn max(self, other: Interval) -> Self {
        Interval { lo: self.lo.max(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn min(self, other: Interval) -> Self {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.min(other.hi) }
    }

    pub fn sqr(self) -> Self {
        let a = self.abs();
        Interval { lo: mul_rd_ru(a.lo, a.lo).0, hi: mul_rd_ru(a.hi, a.hi).1 }
    }

    pub fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Interval::ONE;
        }
        if n < 0 {
            return Interval::ONE / self.powi(-n);
        }
        let mut result = Interval::ONE;
        let mut base = self;
        let mut e = n as u32;
        // repeated squaring of an interval overestimates for mixed signs;
        // handle sign explicitly and work on the magnitude
        if self.contains_zero() && self.lo < 0.0 {
            let m = Interval::new(0.0, self.mag()).powi(n);
            return if n % 2 == 0 {
                m
            } else {
                let neg = Interval::new(0.0, -self.lo).powi(n);
                let pos = Interval::new(0.0, self.hi.max(0.0)).powi(n);
                Interval { lo: -neg.hi, hi: pos.hi }
            };
        }
        let negative = self.hi < 0.0;
        if negative {
            base = -base;
        }
        while e > 0 {
            if e & 1 == 1 {
                result = result * base;
            }
            base = base.sqr();
            e >>= 1;
        }
        if negative && n % 2 == 1 {
            -result
        } else {
            result
        }
    }

    /// Division that reports a zero divisor instead of saturating.
    pub fn try_div(self, rhs: Interval) -> Result<Self, IntervalError> {
        if rhs.contains_zero() {
            return Err(IntervalError::DivisionByZero);
        }
        Ok(self / rhs)
    }

    pub fn exp(self) -> Self {
        if self.is_nan() {
            return self;
        }
        let lo = if self.lo == 0.0 { 1.0 } else { down(down(self.lo.exp())).max(0.0) };
        let hi = if self.hi == 0.0 { 1.0 } else { up(up(self.hi.exp())) };
        Interval { lo, hi }
    }

    /// Natural logarithm; NaN interval when the argument has a negative part.
    pub fn ln(self) -> Self {
        self.try_ln().unwrap_or(Interval { lo: f64::NAN, hi: f64::NAN })
    }

    pub fn try_ln(self) -> Result<Self, IntervalError> {
        if !(self.lo >= 0.0) {
            return Err(IntervalError::Domain("ln of an interval with a negative part"));
        }
        let lo = if self.lo == 1.0 { 0.0 } else { down(down(self.lo.ln())) };
        let hi = if self.hi == 1.0 { 0.0 } else { up(up(self.hi.ln())) };
        Ok(Interval { lo, hi })
    }

    /// Real power `self^r` for a nonnegative base.
    pub fn try_powf(self, r: Interval) -> Result<Self, IntervalError> {
        if r.lo == r.hi && r.lo.fract() == 0.0 && r.lo.abs() < 1e9 {
            return Ok(self.powi(r.lo as i32));
        }
        if !(self.lo >= 0.0) {
            return Err(IntervalError::Domain("fractional power of an interval with a negative part"));
        }
        if self.lo == 0.0 && r.lo <= 0.0 {
            return Err(IntervalError::Domain("nonpositive power of an interval containing zero"));
        }
        // x^r is monotone in each argument on x > 0, so the extremes sit at corners
        let corner = |x: f64, e: f64| -> (f64, f64) {
            if x == 0.0 {
                return (0.0, 0.0);
            }
            if x == 1.0 || e == 0.0 {
                return (1.0, 1.0);
            }
            if e == 1.0 {
                return (x, x);
            }
            let v = x.powf(e);
            (down(down(v)).max(0.0), up(up(v)))
        };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in [self.lo, self.hi] {
            for e in [r.lo, r.hi] {
                let (a, b) = corner(x, e);
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        Ok(Interval { lo, hi })
    }

    pub fn powf(self, r: Interval) -> Self {
        self.try_powf(r).unwrap_or(Interval { lo: f64::NAN, hi: f64::NAN })
    }

    pub fn sqrt(self) -> Self {
        if !(self.lo >= 0.0) {
            return Interval { lo: f64::NAN, hi: f64::NAN };
        }
        Interval { lo: sqrt_rd_ru(self.lo).0, hi: sqrt_rd_ru(self.hi).1 }
    }

    pub fn atan(self) -> Self {
        let lo = if self.lo == 0.0 { 0.0 } else { down(down(self.lo.atan())) };
        let hi = if self.hi == 0.0 { 0.0 } else { up(up(self.hi.atan())) };
        Interval { lo, hi }
    }

    /// Enclosure of π.
    pub fn pi() -> Self {
        Interval { lo: std::f64::consts::PI, hi: up(std::f64::consts::PI) }
    }
}

impl Default for Interval {
    fn default() -> Self {
        Interval::ZERO
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval { lo: add_rd_ru(self.lo, rhs.lo).0, hi: add_rd_ru(self.hi, rhs.hi).1 }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        self + (-rhs)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in [self.lo, self.hi] {
            for b in [rhs.lo, rhs.hi] {
                let (l, h) = mul_rd_ru(a, b);
                lo = lo.min(l);
                hi = hi.max(h);
            }
        }
        Interval { lo, hi }
    }
}

/// Division by an interval containing zero saturates to the whole line.
/// Use [`Interval::try_div`] to get an error instead.
impl Div for Interval {
    type Output = Interval;
    fn div(self, rhs: Interval) -> Interval {
        if self.is_nan() || rhs.is_nan() {
            return Interval { lo: f64::NAN, hi: f64::NAN };
        }
        if rhs.contains_zero() {
            return Interval::ENTIRE;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in [self.lo, self.hi] {
            for b in [rhs.lo, rhs.hi] {
                let (l, h) = div_rd_ru(a, b);
                lo = lo.min(l);
                hi = hi.max(h);
            }
        }
        Interval { lo, hi }
    }
}

/// Only present so that `Interval` satisfies `num_traits::Num`.
impl Rem for Interval {
    type Output = Interval;
    fn rem(self, rhs: Interval) -> Interval {
        // |a % b| < |b| and the sign follows a
        let m = rhs.mag();
        Interval { lo: if self.lo < 0.0 { -m } else { 0.0 }, hi: if self.hi > 0.0 { m } else { 0.0 } }
    }
}

macro_rules! assign_ops {
    ($($tr:ident $m:ident $op:tt),*) => {$(
        impl $tr for Interval {
            fn $m(&mut self, rhs: Interval) {
                *self = *self $op rhs;
            }
        }
    )*};
}
assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /, RemAssign rem_assign %);

macro_rules! scalar_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<f64> for Interval {
            type Output = Interval;
            fn $m(self, rhs: f64) -> Interval {
                $tr::$m(self, Interval::point(rhs))
            }
        }
        impl $tr<Interval> for f64 {
            type Output = Interval;
            fn $m(self, rhs: Interval) -> Interval {
                $tr::$m(Interval::point(self), rhs)
            }
        }
    )*};
}
scalar_ops!(Add add, Sub sub, Mul mul, Div div);

impl Zero for Interval {
    fn zero() -> Self {
        Interval::ZERO
    }
    fn is_zero(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0
    }
}

impl One for Interval {
    fn one() -> Self {
        Interval::ONE
    }
}

impl Num for Interval {
    type FromStrRadixErr = IntervalError;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, IntervalError> {
        if radix != 10 {
            return Err(IntervalError::Parse(s.to_string()));
        }
        Interval::parse_decimal(s)
    }
}

impl std::iter::Sum for Interval {
    fn sum<I: Iterator<Item = Interval>>(iter: I) -> Interval {
        iter.fold(Interval::ZERO, |a, b| a + b)
    }
}

/// Shortest round-trip decimal representation of an `f64`.
pub fn f64_to_decimal(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:e}")
}

pub fn decimal_to_f64(s: &str) -> Result<f64, IntervalError> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| IntervalError::Parse(s.to_string())),
    }
}

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    lo: String,
    hi: String,
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        IntervalRepr { lo: f64_to_decimal(self.lo), hi: f64_to_decimal(self.hi) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = IntervalRepr::deserialize(d)?;
        let lo = decimal_to_f64(&r.lo).map_err(serde::de::Error::custom)?;
        let hi = decimal_to_f64(&r.hi).map_err(serde::de::Error::custom)?;
        Interval::try_new(lo, hi).map_err(serde::de::Error::custom)
    }
}

/// Enclosure of `‖v‖_∞` over all point vectors in `v`.
pub fn norm_inf(v: &[Interval]) -> Interval {
    let lo = v.iter().map(Interval::mig).fold(0.0, f64::max);
    let hi = v.iter().map(Interval::mag).fold(0.0, f64::max);
    Interval { lo, hi }
}

/// Enclosure of the induced row-sum norm `‖A‖_∞`.
pub fn matrix_norm_inf(a: &IMatrix) -> Interval {
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for i in 0..a.nrows() {
        let row: Interval = a.row(i).iter().map(|x| x.abs()).sum();
        lo = lo.max(row.lo);
        hi = hi.max(row.hi);
    }
    Interval { lo, hi }
}

/// Norm of the pair `(α, x)` in the product space: `max(|α|, ‖x‖_∞)`.
pub fn product_norm(alpha: Interval, v: &[Interval]) -> Interval {
    alpha.abs().max(norm_inf(v))
}

/// Rigorous upper bound on `‖v‖_∞` for a float vector.
pub fn norm_inf_f64(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Rigorous upper bound on the row-sum norm of a float matrix.
pub fn matrix_norm_inf_f64(a: &DMatrix<f64>) -> f64 {
    matrix_norm_inf(&a.map(Interval::point)).hi
}

pub fn to_interval_matrix(a: &DMatrix<f64>) -> IMatrix {
    a.map(Interval::point)
}

pub fn to_interval_vector(v: &[f64]) -> IVector {
    DVector::from_iterator(v.len(), v.iter().map(|&x| Interval::point(x)))
}

pub fn mid_matrix(a: &IMatrix) -> DMatrix<f64> {
    a.map(|x| x.mid())
}

pub fn mid_vector(v: &[Interval]) -> Vec<f64> {
    v.iter().map(|x| x.mid()).collect()
}

/// Product of an interval matrix and an interval vector.
pub fn mat_vec(a: &IMatrix, v: &[Interval]) -> IVector {
    assert_eq!(a.ncols(), v.len());
    DVector::from_iterator(
        a.nrows(),
        (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * v[j]).sum()),
    )
}

/// Product of two interval matrices.
pub fn mat_mul(a: &IMatrix, b: &IMatrix) -> IMatrix {
    assert_eq!(a.ncols(), b.nrows());
    let mut c = IMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let aik = a[(i, k)];
            if aik.is_zero() {
                continue;
            }
            for j in 0..b.ncols() {
                c[(i, j)] += aik * b[(k, j)];
            }
        }
    }
    c
}
