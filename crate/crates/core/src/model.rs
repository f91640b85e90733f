//! The age-structured red coral map `x ↦ L(λ, x) x`.
//!
//! Only the first (recruitment) component is nonlinear; components `2..d`
//! are `S_k x_k`. Everything is generic over [`Scalar`] so one code path
//! serves float simulation, interval validation and automatic
//! differentiation.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_traits::Zero;
use qd::Quad;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::interval::Interval;
use crate::scalar::Scalar;

/// Survival rates `S_1..S_{d-1}` of the observational data set.
pub const DEFAULT_SURVIVAL: [f64; 12] = [0.89, 0.63, 0.70, 0.52, 0.44, 0.29, 0.57, 0.33, 0.75, 1.0, 0.33, 1.0];
/// Fertility `F_1..F_d`.
pub const DEFAULT_FERTILITY: [f64; 13] = [0.0, 0.0, 0.36, 0.64, 0.82, 0.97, 0.98, 0.99, 1.0, 1.0, 1.0, 1.0, 1.0];

/// Population parameters. Loadable from a TOML file:
///
/// ```toml
/// # all keys optional; missing keys take the built-in defaults
/// survival = [0.89, 0.63, 0.70, 0.52, 0.44, 0.29, 0.57, 0.33, 0.75, 1.0, 0.33, 1.0]  # d-1 entries
/// fertility = [0, 0, 0.36, 0.64, 0.82, 0.97, 0.98, 0.99, 1, 1, 1, 1, 1]               # d entries
/// c1 = 1.8e5
/// c2 = 1.3e7
/// alpha = 5e-4
/// beta = 3.4e-3
/// omega = 36.0                 # colony area in dm²
/// polyp_coefficient = 1.239    # p_k = polyp_coefficient * k^size_exponent
/// size_exponent = 2.324        # b_k = F_k * k^size_exponent
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoralParams {
    pub survival: Vec<f64>,
    pub fertility: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub polyp_coefficient: f64,
    pub size_exponent: f64,
}

impl Default for CoralParams {
    fn default() -> Self {
        CoralParams {
            survival: DEFAULT_SURVIVAL.to_vec(),
            fertility: DEFAULT_FERTILITY.to_vec(),
            c1: 1.8e5,
            c2: 1.3e7,
            alpha: 5e-4,
            beta: 3.4e-3,
            omega: 36.0,
            polyp_coefficient: 1.239,
            size_exponent: 2.324,
        }
    }
}

impl CoralParams {
    pub fn dim(&self) -> usize {
        self.fertility.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let d = self.dim();
        let bad = |m: String| Err(ModelError::InvalidParams(m));
        if d < 3 {
            return bad(format!("need at least 3 age classes, got {d}"));
        }
        if self.survival.len() != d - 1 {
            return bad(format!("survival has {} entries, expected {}", self.survival.len(), d - 1));
        }
        if let Some(s) = self.survival.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return bad(format!("survival rate {s} outside [0, 1]"));
        }
        if self.fertility.iter().any(|f| !(*f >= 0.0)) {
            return bad("fertility must be nonnegative".into());
        }
        if self.fertility[0] != 0.0 || self.fertility[1] != 0.0 {
            return bad("colonies younger than two years cannot reproduce (F_1 = F_2 = 0)".into());
        }
        for (name, v) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("omega", self.omega),
            ("polyp_coefficient", self.polyp_coefficient),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite"));
            }
        }
        if self.beta <= self.alpha {
            return bad("beta must exceed alpha".into());
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ModelError> {
        let p: CoralParams = toml::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_file(path: &Path) -> Result<Self, ModelError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// Survival products, birth rates and polyp counts of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedCoefficients<T> {
    /// `a_1 = 1`, `a_{k+1} = S_k a_k`.
    pub a: Vec<T>,
    /// `b_k = F_k k^e`.
    pub b: Vec<T>,
    /// `p_k = c_p k^e`.
    pub p: Vec<T>,
    /// `b·a`, the reproduction number per unit `λ`.
    pub ba: T,
}

impl DerivedCoefficients<Quad> {
    /// Double-double reference values computed from the decimal data.
    pub fn compute(params: &CoralParams) -> Self {
        let d = params.dim();
        let e = Quad::from_decimal(params.size_exponent);
        let cp = Quad::from_decimal(params.polyp_coefficient);
        let mut a = Vec::with_capacity(d);
        a.push(Quad::ONE);
        for k in 1..d {
            a.push(a[k - 1] * Quad::from_decimal(params.survival[k - 1]));
        }
        let pow: Vec<Quad> = (1..=d).map(|k| Scalar::powf(Quad::from(k as f64), e)).collect();
        let b: Vec<Quad> = params.fertility.iter().zip(&pow).map(|(&f, &w)| Quad::from_decimal(f) * w).collect();
        let p: Vec<Quad> = pow.iter().map(|&w| cp * w).collect();
        let ba = b.iter().zip(&a).fold(Quad::ZERO, |s, (&x, &y)| s + x * y);
        DerivedCoefficients { a, b, p, ba }
    }
}

impl DerivedCoefficients<Interval> {
    pub fn compute(params: &CoralParams) -> Self {
        let d = params.dim();
        let e = Interval::from_decimal(params.size_exponent);
        let cp = Interval::from_decimal(params.polyp_coefficient);
        let mut a = Vec::with_capacity(d);
        a.push(Interval::ONE);
        for k in 1..d {
            a.push(a[k - 1] * Interval::from_decimal(params.survival[k - 1]));
        }
        let pow: Vec<Interval> = (1..=d).map(|k| Interval::point(k as f64).powf(e)).collect();
        let b: Vec<Interval> =
            params.fertility.iter().zip(&pow).map(|(&f, &w)| Interval::from_decimal(f) * w).collect();
        let p: Vec<Interval> = pow.iter().map(|&w| cp * w).collect();
        let ba = b.iter().zip(&a).map(|(&x, &y)| x * y).sum();
        DerivedCoefficients { a, b, p, ba }
    }
}

/// Parameters plus cached interval coefficients. Cheap to clone.
#[derive(Debug, Clone)]
pub struct CoralModel {
    params: CoralParams,
    coeffs: DerivedCoefficients<Interval>,
    reference: DerivedCoefficients<Quad>,
    pi: Vec<Interval>,
    pi_reference: Vec<Quad>,
}

impl Default for CoralModel {
    fn default() -> Self {
        CoralModel::new(CoralParams::default()).expect("default parameters are valid")
    }
}

impl CoralModel {
    pub fn new(params: CoralParams) -> Result<Self, ModelError> {
        params.validate()?;
        let coeffs = DerivedCoefficients::<Interval>::compute(&params);
        let reference = DerivedCoefficients::<Quad>::compute(&params);
        let omega = Interval::from_decimal(params.omega);
        let mut pi: Vec<Interval> = coeffs.p.iter().map(|&x| x / omega).collect();
        pi[0] = Interval::ZERO;
        let omega_q = Quad::from_decimal(params.omega);
        let mut pi_reference: Vec<Quad> = reference.p.iter().map(|&x| x / omega_q).collect();
        pi_reference[0] = Quad::ZERO;
        Ok(CoralModel { params, coeffs, reference, pi, pi_reference })
    }

    pub fn params(&self) -> &CoralParams {
        &self.params
    }

    pub fn coefficients(&self) -> &DerivedCoefficients<Interval> {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// Evaluation view with every constant lifted into `T`.
    pub fn view<T: Scalar>(&self) -> Coral<T> {
        let p = &self.params;
        let lift = |v: &[Interval], r: &[Quad]| v.iter().zip(r).map(|(&x, &q)| T::from_constant(x, q)).collect::<Vec<T>>();
        let (c, r) = (&self.coeffs, &self.reference);
        Coral {
            a: lift(&c.a, &r.a),
            b: lift(&c.b, &r.b),
            p: lift(&c.p, &r.p),
            pi: lift(&self.pi, &self.pi_reference),
            s: p.survival.iter().map(|&x| T::from_decimal(x)).collect(),
            ba: T::from_constant(c.ba, r.ba),
            c1: T::from_decimal(p.c1),
            c2: T::from_decimal(p.c2),
            alpha: T::from_decimal(p.alpha),
            beta: T::from_decimal(p.beta),
            omega: T::from_decimal(p.omega),
        }
    }

    /// `b·a` as a float.
    pub fn ba(&self) -> f64 {
        self.coeffs.ba.mid()
    }

    pub fn lambda_to_r(&self, lambda: f64) -> f64 {
        lambda * self.ba()
    }

    pub fn r_to_lambda(&self, r: f64) -> f64 {
        r / self.ba()
    }

    /// `Σ_{k≥2} p_k a_k / Ω`, the density of the fixed point `a` (per unit `x_1`).
    pub fn density_per_recruit(&self) -> Interval {
        let v = self.view::<Interval>();
        v.density(&v.a)
    }

    /// Residual of the one-dimensional fixed-point equation
    /// `x_1 = λ (b·a) x_1 φ(x_1 Σ p_k a_k / Ω)`.
    pub fn reduced_fixed_point_residual<T: Scalar>(&self, lambda: T, x1: T) -> T {
        let v = self.view::<T>();
        let sigma = v.density(&v.a);
        x1 - lambda * v.ba * x1 * v.phi(x1 * sigma)
    }

    /// All nonnegative roots `x_1` of the reduced equation, ascending; `0` is
    /// always first. Brackets on a grid of 10⁴ points over `[0, 10⁵]` and
    /// bisects each sign change.
    pub fn solve_branch_1d(&self, lambda: f64) -> Vec<f64> {
        self.solve_branch_1d_on(lambda, 1e5, 10_000)
    }

    pub fn solve_branch_1d_on(&self, lambda: f64, x1_max: f64, n: usize) -> Vec<f64> {
        let v = self.view::<f64>();
        let sigma = v.density(&v.a);
        // nontrivial roots are zeros of g(x1) = λ (b·a) φ(σ x1) − 1
        let g = |x1: f64| lambda * v.ba * v.phi(sigma * x1) - 1.0;
        let mut roots = vec![0.0];
        let mut x_prev = 0.0;
        let mut g_prev = g(0.0);
        for i in 1..=n {
            let x = x1_max * i as f64 / n as f64;
            let gx = g(x);
            if gx == 0.0 {
                roots.push(x);
            } else if g_prev != 0.0 && (gx > 0.0) != (g_prev > 0.0) {
                let (mut lo, mut hi) = (x_prev, x);
                let lo_pos = g_prev > 0.0;
                for _ in 0..200 {
                    let m = 0.5 * (lo + hi);
                    if m <= lo || m >= hi {
                        break;
                    }
                    if (g(m) > 0.0) == lo_pos {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            x_prev = x;
            g_prev = gx;
        }
        roots
    }

    /// The full fixed point `x_1 · a`.
    pub fn fixed_point_from_x1(&self, x1: f64) -> Vec<f64> {
        self.coeffs.a.iter().map(|a| x1 * a.mid()).collect()
    }

    /// Positive state with the survival-product age profile and density `p`.
    pub fn state_with_density(&self, p: f64) -> Vec<f64> {
        let x1 = p / self.density_per_recruit().mid();
        self.fixed_point_from_x1(x1)
    }
}

/// The model with constants in scalar type `T`.
#[derive(Debug, Clone)]
pub struct Coral<T> {
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub p: Vec<T>,
    /// `p_k / Ω` for `k ≥ 2`, zero for `k = 1`.
    pub pi: Vec<T>,
    pub s: Vec<T>,
    pub ba: T,
    pub c1: T,
    pub c2: T,
    pub alpha: T,
    pub beta: T,
    pub omega: T,
}

fn dot<T: Scalar>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `Σ w_k y_k` for a vector `y` of any element type scalable by `T`.
fn wdot<T, E>(w: &[T], y: &[E]) -> E
where
    T: Scalar,
    E: Copy + Zero + std::ops::Mul<T, Output = E>,
{
    w.iter().zip(y).fold(E::zero(), |acc, (&wk, &yk)| acc + yk * wk)
}

impl<T: Scalar> Coral<T> {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Recruits-to-larvae ratio `φ(y) = c1 e^{-αy} / (y² + c2 e^{-βy})`.
    pub fn phi(&self, y: T) -> T {
        self.c1 * (-self.alpha * y).exp() / (y * y + self.c2 * (-self.beta * y).exp())
    }

    /// `[φ, φ', φ'', φ''']` at `y`, from `φ = c1 / h` with
    /// `h(y) = y² e^{αy} + c2 e^{-γy}`, `γ = β − α`.
    pub fn phi_derivatives(&self, y: T) -> [T; 4] {
        let (al, c1, c2) = (self.alpha, self.c1, self.c2);
        let g = self.beta - al;
        let two = T::from_f64(2.0);
        let six = T::from_f64(6.0);
        let ea = (al * y).exp();
        let eg = (-g * y).exp() * c2;
        let y2 = y * y;
        let h = y2 * ea + eg;
        let h1 = (two * y + al * y2) * ea - g * eg;
        let h2 = (two + T::from_f64(4.0) * al * y + al * al * y2) * ea + g * g * eg;
        let h3 = (six * al + six * al * al * y + al * al * al * y2) * ea - g * g * g * eg;
        let f0 = c1 / h;
        let f1 = -f0 * h1 / h;
        let f2 = f0 * (two * h1 * h1 - h * h2) / (h * h);
        let f3 = f0 * (-six * h1 * h1 * h1 + six * h * h1 * h2 - h * h * h3) / (h * h * h);
        [f0, f1, f2, f3]
    }

    /// Polyp density `P = Σ_{k≥2} p_k x_k / Ω`.
    pub fn density(&self, x: &[T]) -> T {
        dot(&self.pi, x)
    }

    /// Larvae production `b·x`.
    pub fn births(&self, x: &[T]) -> T {
        dot(&self.b, x)
    }

    pub fn step(&self, lambda: T, x: &[T]) -> Vec<T> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d);
        out.push(lambda * self.phi(self.density(x)) * self.births(x));
        for k in 0..d - 1 {
            out.push(self.s[k] * x[k]);
        }
        out
    }

    /// `F(λ, x) = f(λ, x) − x`.
    pub fn map_f(&self, lambda: T, x: &[T]) -> Vec<T> {
        let mut f = self.step(lambda, x);
        for (fi, &xi) in f.iter_mut().zip(x) {
            *fi -= xi;
        }
        f
    }

    /// Row 1 of `D_x f`: `λ(φ'(P) π_j (b·x) + φ(P) b_j)`.
    pub fn first_row_gradient(&self, lambda: T, x: &[T]) -> Vec<T> {
        let [f0, f1, ..] = self.phi_derivatives(self.density(x));
        let s = self.births(x);
        self.pi.iter().zip(&self.b).map(|(&pj, &bj)| lambda * (f1 * pj * s + f0 * bj)).collect()
    }

    pub fn jacobian_x(&self, lambda: T, x: &[T]) -> DMatrix<T> {
        let d = self.dim();
        let mut j = DMatrix::from_element(d, d, T::zero());
        for (c, v) in self.first_row_gradient(lambda, x).into_iter().enumerate() {
            j[(0, c)] = v;
        }
        for k in 0..d - 1 {
            j[(k + 1, k)] = self.s[k];
        }
        j
    }

    /// `D_λ f = (φ(P)(b·x), 0, …, 0)`.
    pub fn jacobian_lambda(&self, _lambda: T, x: &[T]) -> DVector<T> {
        let mut v = DVector::from_element(self.dim(), T::zero());
        v[0] = self.phi(self.density(x)) * self.births(x);
        v
    }

    /// `D_{xλ} f`: row 1 of `D_x f` divided by `λ`, other rows zero.
    pub fn jacobian_x_lambda(&self, x: &[T]) -> DMatrix<T> {
        let d = self.dim();
        let mut j = DMatrix::from_element(d, d, T::zero());
        for (c, v) in self.first_row_gradient(T::one(), x).into_iter().enumerate() {
            j[(0, c)] = v;
        }
        j
    }

    /// First component of `D²_x f(λ, x)[y, z]`; the other components vanish.
    pub fn bilinear_first<E>(&self, lambda: T, x: &[T], y: &[E], z: &[E]) -> E
    where
        E: Copy + Zero + std::ops::Mul<T, Output = E> + std::ops::Mul<Output = E>,
    {
        let [_, f1, f2, _] = self.phi_derivatives(self.density(x));
        let s = self.births(x);
        let (py, pz) = (wdot(&self.pi, y), wdot(&self.pi, z));
        let (by, bz) = (wdot(&self.b, y), wdot(&self.b, z));
        (py * pz * (f2 * s) + (py * bz + pz * by) * f1) * lambda
    }

    /// First component of `D³_x f(λ, x)[y, z, w]`.
    pub fn trilinear_first<E>(&self, lambda: T, x: &[T], y: &[E], z: &[E], w: &[E]) -> E
    where
        E: Copy + Zero + std::ops::Mul<T, Output = E> + std::ops::Mul<Output = E>,
    {
        let [_, _, f2, f3] = self.phi_derivatives(self.density(x));
        let s = self.births(x);
        let (py, pz, pw) = (wdot(&self.pi, y), wdot(&self.pi, z), wdot(&self.pi, w));
        let (by, bz, bw) = (wdot(&self.b, y), wdot(&self.b, z), wdot(&self.b, w));
        (py * pz * pw * (f3 * s) + (py * pz * bw + py * pw * bz + pz * pw * by) * f2) * lambda
    }

    /// `B(y, z) = D²_x f(λ, x)[y, z]` as a full vector.
    pub fn bilinear_b(&self, lambda: T, x: &[T], y: &[T], z: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        out[0] = self.bilinear_first(lambda, x, y, z);
        out
    }

    /// `C(y, z, w) = D³_x f(λ, x)[y, z, w]` as a full vector.
    pub fn trilinear_c(&self, lambda: T, x: &[T], y: &[T], z: &[T], w: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        out[0] = self.trilinear_first(lambda, x, y, z, w);
        out
    }
}

/// Coordinate scaling `(R, u) = (r_scale·R̃, s ⊙ ũ)` of the map
/// `f̃_k(R̃, ũ) = f_k(r_scale·R̃, s ⊙ ũ) / s_k`, with `λ = R / (b·a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioner {
    pub scale: Vec<f64>,
    pub r_scale: f64,
}

impl Preconditioner {
    pub fn new(scale: Vec<f64>, r_scale: f64) -> Result<Self, ModelError> {
        for (index, &value) in scale.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::NonPositiveScale { index, value });
            }
        }
        if !(r_scale > 0.0 && r_scale.is_finite()) {
            return Err(ModelError::InvalidParams(format!("r_scale {r_scale} must be positive")));
        }
        Ok(Preconditioner { scale, r_scale })
    }

    pub fn identity(d: usize) -> Self {
        Preconditioner { scale: vec![1.0; d], r_scale: 1.0 }
    }

    /// Scale constants from a fixed point: magnitudes rounded to one
    /// significant digit, with a floor for vanishing components.
    pub fn from_fixed_point(x: &[f64], r_scale: f64) -> Result<Self, ModelError> {
        let floor = x.iter().fold(0.0f64, |m, v| m.max(v.abs())) * 1e-12;
        let scale = x.iter().map(|v| round_to_one_digit(v.abs().max(floor).max(f64::MIN_POSITIVE))).collect();
        Self::new(scale, r_scale)
    }

    /// `f̃(R̃, ũ)` in scalar type `T`.
    pub fn map<T: Scalar>(&self, coral: &Coral<T>, r_tilde: T, u_tilde: &[T]) -> Vec<T> {
        let lambda = r_tilde * T::from_f64(self.r_scale) / coral.ba;
        let x: Vec<T> = u_tilde.iter().zip(&self.scale).map(|(&u, &s)| u * T::from_f64(s)).collect();
        coral.step(lambda, &x).into_iter().zip(&self.scale).map(|(f, &s)| f / T::from_f64(s)).collect()
    }

    pub fn to_original(&self, r_tilde: f64, u_tilde: &[f64]) -> (f64, Vec<f64>) {
        (r_tilde * self.r_scale, u_tilde.iter().zip(&self.scale).map(|(u, s)| u * s).collect())
    }

    pub fn from_original(&self, r: f64, x: &[f64]) -> (f64, Vec<f64>) {
        (r / self.r_scale, x.iter().zip(&self.scale).map(|(u, s)| u / s).collect())
    }
}

fn round_to_one_digit(v: f64) -> f64 {
    let e = v.log10().floor();
    let m = (v / 10f64.powf(e)).round();
    // parse back from text so the constant is the nearest float to m·10^e
    format!("{m}e{e}").parse().unwrap_or(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_at_zero() {
        let m = CoralModel::default();
        let v = m.view::<f64>();
        assert!((v.phi(0.0) - 1.8e5 / 1.3e7).abs() < 1e-15);
        let [f0, f1, ..] = v.phi_derivatives(0.0);
        assert!((f0 - v.phi(0.0)).abs() < 1e-15);
        assert!((f1 - 1.8e5 * (3.4e-3 - 5e-4) / 1.3e7).abs() < 1e-15);
    }

    #[test]
    fn survival_products() {
        let m = CoralModel::default();
        let c = m.coefficients();
        assert_eq!(c.a[0], Interval::ONE);
        assert!(c.a[1].contains(0.89));
        assert!(c.b[0].is_zero() && c.b[1].is_zero());
    }

    #[test]
    fn rounding_scales() {
        assert_eq!(round_to_one_digit(2172.6), 2000.0);
        assert_eq!(round_to_one_digit(0.0347), 0.03);
        assert_eq!(round_to_one_digit(96.0), 100.0);
    }

    #[test]
    fn bad_config_rejected() {
        assert!(CoralParams::from_toml_str("beta = 1e-5").is_err());
        assert!(CoralParams::from_toml_str("survival = [0.5]").is_err());
        assert!(CoralParams::from_toml_str("gamma = 1").is_err());
        assert_eq!(CoralParams::from_toml_str("").unwrap(), CoralParams::default());
    }
}
