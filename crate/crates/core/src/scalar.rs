//! The scalar abstraction shared by floats, intervals, double-double numbers
//! and forward-mode dual numbers.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};

use num_traits::{Num, NumAssignOps, One, Zero};
use qd::Quad;

use crate::interval::Interval;

pub trait Scalar:
    Copy + Debug + PartialEq + Num + NumAssignOps + Neg<Output = Self> + Send + Sync + 'static
{
    /// The exact binary value `v`.
    fn from_f64(v: f64) -> Self;

    /// The real number that the decimal literal `v` was written as. Interval
    /// types widen to enclose the conversion error.
    fn from_decimal(v: f64) -> Self {
        Self::from_f64(v)
    }

    /// A constant known as an enclosure; point types take the midpoint.
    fn from_interval(v: Interval) -> Self;

    /// A derived constant given both as an enclosure and as a
    /// double-double reference value. Only [`Quad`] uses the reference.
    fn from_constant(enclosure: Interval, _reference: Quad) -> Self {
        Self::from_interval(enclosure)
    }

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powf(self, e: Self) -> Self;
    fn sqrt(self) -> Self;

    /// Primal value as a float (midpoint for intervals).
    fn approx(self) -> f64;

    fn from_usize(n: usize) -> Self {
        Self::from_f64(n as f64)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn from_interval(v: Interval) -> Self {
        v.mid()
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powf(self, e: Self) -> Self {
        f64::powf(self, e)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn approx(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn from_interval(v: Interval) -> Self {
        v.mid() as f32
    }
    fn exp(self) -> Self {
        f32::exp(self)
    }
    fn ln(self) -> Self {
        f32::ln(self)
    }
    fn powf(self, e: Self) -> Self {
        f32::powf(self, e)
    }
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    fn approx(self) -> f64 {
        self as f64
    }
}

impl Scalar for Interval {
    fn from_f64(v: f64) -> Self {
        Interval::point(v)
    }
    fn from_decimal(v: f64) -> Self {
        Interval::from_decimal(v)
    }
    fn from_interval(v: Interval) -> Self {
        v
    }
    fn exp(self) -> Self {
        Interval::exp(self)
    }
    fn ln(self) -> Self {
        Interval::ln(self)
    }
    fn powf(self, e: Self) -> Self {
        Interval::powf(self, e)
    }
    fn sqrt(self) -> Self {
        Interval::sqrt(self)
    }
    fn approx(self) -> f64 {
        self.mid()
    }
}

/// Double-double numbers (about 31 significant digits), used as the
/// high-precision reference in refinement checks.
impl Scalar for Quad {
    fn from_f64(v: f64) -> Self {
        Quad::from(v)
    }
    fn from_decimal(v: f64) -> Self {
        // recover the short decimal the float came from, then divide exactly
        let s = format!("{v:e}");
        parse_quad(&s).unwrap_or(Quad::from(v))
    }
    fn from_interval(v: Interval) -> Self {
        Quad::from(v.mid())
    }
    fn from_constant(_enclosure: Interval, reference: Quad) -> Self {
        reference
    }
    fn exp(self) -> Self {
        Quad::exp(self)
    }
    fn ln(self) -> Self {
        Quad::ln(self)
    }
    fn powf(self, e: Self) -> Self {
        if e.1 == 0.0 && e.0.fract() == 0.0 && e.0.abs() < 64.0 {
            let mut r = Quad::ONE;
            for _ in 0..(e.0.abs() as i32) {
                r *= self;
            }
            return if e.0 < 0.0 { Quad::ONE / r } else { r };
        }
        (e * self.ln()).exp()
    }
    fn sqrt(self) -> Self {
        Quad::sqrt(self)
    }
    fn approx(self) -> f64 {
        self.0 + self.1
    }
}

/// Parses a decimal in scientific notation into a double-double value.
pub fn parse_quad(s: &str) -> Option<Quad> {
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let neg = mant.starts_with('-');
    let mant = mant.trim_start_matches(['-', '+']);
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    let digits = format!("{int}{frac}");
    if digits.is_empty() || digits.len() > 30 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut value = Quad::ZERO;
    let ten = Quad::from(10.0);
    for b in digits.bytes() {
        value = value * ten + Quad::from((b - b'0') as f64);
    }
    let e = exp - frac.len() as i32;
    let mut scale = Quad::ONE;
    for _ in 0..e.unsigned_abs() {
        scale *= ten;
    }
    value = if e >= 0 { value * scale } else { value / scale };
    Some(if neg { -value } else { value })
}

/// First-order forward-mode dual number `re + du·ε`, `ε² = 0`.
///
/// Nesting `Dual<Dual<T>>` gives mixed second derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub du: T,
}

impl<T: Scalar> Dual<T> {
    pub fn constant(re: T) -> Self {
        Dual { re, du: T::zero() }
    }

    pub fn variable(re: T) -> Self {
        Dual { re, du: T::one() }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual { re: self.re + rhs.re, du: self.du + rhs.du }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual { re: self.re - rhs.re, du: self.du - rhs.du }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Dual { re: self.re * rhs.re, du: self.du * rhs.re + self.re * rhs.du }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.re / rhs.re;
        Dual { re: q, du: (self.du - q * rhs.du) / rhs.re }
    }
}

impl<T: Scalar> Rem for Dual<T> {
    type Output = Self;
    fn rem(self, rhs: Self) -> Self {
        Dual { re: self.re % rhs.re, du: self.du }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { re: -self.re, du: -self.du }
    }
}

macro_rules! dual_assign {
    ($($tr:ident $m:ident $op:tt),*) => {$(
        impl<T: Scalar> $tr for Dual<T> {
            fn $m(&mut self, rhs: Self) {
                *self = *self $op rhs;
            }
        }
    )*};
}
dual_assign!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /, RemAssign rem_assign %);

impl<T: Scalar> Zero for Dual<T> {
    fn zero() -> Self {
        Dual::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.du.is_zero()
    }
}

impl<T: Scalar> One for Dual<T> {
    fn one() -> Self {
        Dual::constant(T::one())
    }
}

impl<T: Scalar> Num for Dual<T> {
    type FromStrRadixErr = T::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        T::from_str_radix(s, radix).map(Dual::constant)
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(v: f64) -> Self {
        Dual::constant(T::from_f64(v))
    }
    fn from_decimal(v: f64) -> Self {
        Dual::constant(T::from_decimal(v))
    }
    fn from_interval(v: Interval) -> Self {
        Dual::constant(T::from_interval(v))
    }
    fn from_constant(enclosure: Interval, reference: Quad) -> Self {
        Dual::constant(T::from_constant(enclosure, reference))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual { re: e, du: self.du * e }
    }
    fn ln(self) -> Self {
        Dual { re: self.re.ln(), du: self.du / self.re }
    }
    fn powf(self, e: Self) -> Self {
        let r = self.re.powf(e.re);
        if e.du.is_zero() {
            let d = if self.du.is_zero() {
                T::zero()
            } else {
                e.re * self.re.powf(e.re - T::one()) * self.du
            };
            return Dual { re: r, du: d };
        }
        Dual { re: r, du: r * (e.du * self.re.ln() + e.re * self.du / self.re) }
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual { re: s, du: self.du / (T::from_f64(2.0) * s) }
    }
    fn approx(self) -> f64 {
        self.re.approx()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_derivative_of_composite() {
        // d/dx [x^2 e^{-x} / (1 + x)] at x = 0.7
        let f = |x: Dual<f64>| x * x * (-x).exp() / (Dual::from_f64(1.0) + x);
        let x = 0.7;
        let d = f(Dual::variable(x)).du;
        let h = 1e-6;
        let fd = (f(Dual::constant(x + h)).re - f(Dual::constant(x - h)).re) / (2.0 * h);
        assert!((d - fd).abs() < 1e-8);
    }

    #[test]
    fn nested_dual_gives_second_derivative() {
        let x: Dual<Dual<f64>> = Dual { re: Dual::variable(1.3), du: Dual::from_f64(1.0) };
        let y = x.powf(Dual::from_f64(2.324));
        let exact = 2.324 * 1.324 * 1.3f64.powf(0.324);
        assert!((y.du.du - exact).abs() < 1e-12);
    }

    #[test]
    fn quad_decimal_parse() {
        let q = parse_quad("1.239e0").unwrap();
        let r = q - Quad::from(1.239);
        assert!((r.0 + 1.0125233984581428e-16).abs() < 1e-30);
        let back = Quad::from(1239.0) / Quad::from(1000.0);
        assert!((q - back).0.abs() < 1e-31);
    }
}
