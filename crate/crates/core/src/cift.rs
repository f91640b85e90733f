//! Constructive implicit function theorem: residual, inverse and Lipschitz
//! bounds, the δ-inequalities, and validation of isolated zeros.
//!
//! For `G(α, x)` with `‖G(0, x₀)‖ ≤ ρ`, `‖D_xG(0, x₀)⁻¹‖ ≤ K`, and
//! Lipschitz-type constants `L1..L4`, any `(δ_α, δ_x)` with
//!
//! ```text
//! 2K L1 δ_x + 2K L2 δ_α ≤ 1,    2Kρ + 2K L3 δ_α + 2K L4 δ_α² ≤ δ_x
//! ```
//!
//! gives, for every `|α| ≤ δ_α`, a unique zero within `δ_x` of `x₀`; at
//! `α = 0` it lies within `2Kρ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CiftError;
use crate::interval::{mat_mul, mat_vec, matrix_norm_inf, norm_inf, IMatrix, Interval};
use crate::system::{hessians, jacobian, precondition_hessians, SquareSystem};

/// Hypothesis constants; every field is a rigorous upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CiftBounds {
    #[serde(with = "decimal")]
    pub rho: f64,
    #[serde(with = "decimal")]
    pub k: f64,
    #[serde(with = "decimal")]
    pub l1: f64,
    #[serde(with = "decimal")]
    pub l2: f64,
    #[serde(with = "decimal")]
    pub l3: f64,
    #[serde(with = "decimal")]
    pub l4: f64,
    #[serde(with = "decimal")]
    pub ell_x: f64,
    #[serde(with = "decimal")]
    pub ell_alpha: f64,
}

/// Certified radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaPair {
    pub delta_alpha: f64,
    pub delta_x: f64,
    /// Accuracy radius `2Kρ` at `α = 0`.
    pub delta_min: f64,
}

/// Extra constraint `δ_α·t + δ_x ≤ d` from a slanted continuation box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlantConstraint {
    pub tangent_norm: f64,
    pub radius: f64,
}

/// Result of the inverse-bounds lemma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseBound {
    /// `‖A⁻¹‖ ≤ K = ρ2 / (1 − ρ1)`.
    pub k: f64,
    /// `‖B − A⁻¹‖ ≤ err = ρ1 ρ2 / (1 − ρ1)`.
    pub err: f64,
    pub rho1: f64,
    pub rho2: f64,
}

#[inline]
fn iv(x: f64) -> Interval {
    Interval::point(x)
}

/// Upper bound on `‖H(z₀)‖_∞` from an interval evaluation.
pub fn residual_bound(values: &[Interval]) -> f64 {
    norm_inf(values).hi()
}

/// If `‖I − BA‖ ≤ ρ1 < 1` and `‖B‖ ≤ ρ2`, every matrix in `A` is invertible
/// with `‖A⁻¹‖ ≤ ρ2/(1−ρ1)`.
pub fn inverse_bound(a: &IMatrix, b: &DMatrix<f64>) -> Result<InverseBound, CiftError> {
    let n = a.nrows();
    let bi = b.map(iv);
    let mut e = mat_mul(&bi, a).map(|x| -x);
    for i in 0..n {
        e[(i, i)] += Interval::ONE;
    }
    let rho1 = matrix_norm_inf(&e).hi();
    if !(rho1 < 1.0) {
        return Err(CiftError::NotInvertibleEvidence { rho1 });
    }
    let rho2 = matrix_norm_inf(&bi).hi();
    let denom = Interval::ONE - iv(rho1);
    let k = (iv(rho2) / denom).hi();
    let err = (iv(rho1) * iv(rho2) / denom).hi();
    Ok(InverseBound { k, err, rho1, rho2 })
}

/// Mean-value Lipschitz constant for `DH` in the max norm:
/// `L1 = max_i Σ_j m · max_k sup |∂²H_i/∂z_k∂z_j|`.
pub fn lipschitz_l1(hess: &[Option<IMatrix>]) -> f64 {
    let mut l1 = Interval::ZERO;
    for h in hess.iter().flatten() {
        let m = h.nrows();
        let mut row = Interval::ZERO;
        for j in 0..h.ncols() {
            let mx = (0..m).map(|k| h[(k, j)].mag()).fold(0.0, f64::max);
            row += iv(m as f64) * iv(mx);
        }
        l1 = l1.max(row);
    }
    l1.hi()
}

/// Tighter variant `max_i Σ_j Σ_k sup |∂²H_i/∂z_k∂z_j|`.
pub fn lipschitz_l1_rowsum(hess: &[Option<IMatrix>]) -> f64 {
    let mut l1 = Interval::ZERO;
    for h in hess.iter().flatten() {
        let s: Interval = h.iter().map(|x| iv(x.mag())).sum();
        l1 = l1.max(s);
    }
    l1.hi()
}

/// Checks `4K²ρL1 < 1` and `2Kρ < ℓ_x` rigorously.
pub fn check_preconditions(b: &CiftBounds) -> Result<(), CiftError> {
    let (k, rho) = (iv(b.k), iv(b.rho));
    let q = iv(4.0) * k * k * rho * iv(b.l1);
    if !(q.hi() < 1.0) {
        return Err(CiftError::ValidationFailed(format!("4K²ρL1 < 1 fails: 4K²ρL1 ≤ {:e}", q.hi())));
    }
    let acc = iv(2.0) * k * rho;
    if !(acc.hi() < b.ell_x) {
        return Err(CiftError::ValidationFailed(format!(
            "2Kρ < ℓ_x fails: 2Kρ ≤ {:e}, ℓ_x = {:e}",
            acc.hi(),
            b.ell_x
        )));
    }
    Ok(())
}

/// Rigorous check of both δ-inequalities plus the slant constraint.
pub fn deltas_feasible(b: &CiftBounds, da: f64, dx: f64, slant: Option<SlantConstraint>) -> bool {
    if !(da >= 0.0 && dx > 0.0 && da <= b.ell_alpha && dx <= b.ell_x) {
        return false;
    }
    let two_k = iv(2.0) * iv(b.k);
    let (da_i, dx_i) = (iv(da), iv(dx));
    let first = two_k * iv(b.l1) * dx_i + two_k * iv(b.l2) * da_i;
    let second = two_k * iv(b.rho) + two_k * iv(b.l3) * da_i + two_k * iv(b.l4) * da_i * da_i;
    if !(first.hi() <= 1.0 && second.hi() <= dx) {
        return false;
    }
    match slant {
        Some(s) => (da_i * iv(s.tangent_norm) + dx_i).hi() <= s.radius,
        None => true,
    }
}

/// Float upper envelope for `δ_x` at a given `δ_α` (largest admissible
/// value before rigorous rounding checks).
fn dx_upper(b: &CiftBounds, da: f64, slant: Option<SlantConstraint>) -> f64 {
    let mut u = b.ell_x;
    if b.l1 > 0.0 {
        u = u.min((1.0 - 2.0 * b.k * b.l2 * da) / (2.0 * b.k * b.l1));
    }
    if let Some(s) = slant {
        u = u.min(s.radius - da * s.tangent_norm);
    }
    u
}

fn dx_lower(b: &CiftBounds, da: f64) -> f64 {
    2.0 * b.k * (b.rho + b.l3 * da + b.l4 * da * da)
}

/// Largest `δ_x ≤ upper` passing the rigorous check, if any.
fn shrink_to_feasible(b: &CiftBounds, da: f64, upper: f64, slant: Option<SlantConstraint>) -> Option<f64> {
    let mut dx = upper;
    for _ in 0..64 {
        if !(dx > 0.0) || dx < dx_lower(b, da) * (1.0 - 1e-12) {
            return None;
        }
        if deltas_feasible(b, da, dx, slant) {
            return Some(dx);
        }
        dx = (dx * (1.0 - 1e-13)).next_down();
    }
    None
}

/// Solves the δ-inequalities, maximizing `δ_α`, then taking the largest
/// compatible `δ_x`.
pub fn solve_deltas(b: &CiftBounds, slant: Option<SlantConstraint>) -> Result<DeltaPair, CiftError> {
    check_preconditions(b)?;
    let delta_min = (iv(2.0) * iv(b.k) * iv(b.rho)).hi();
    if let Some(s) = slant {
        if !(delta_min < s.radius) {
            return Err(CiftError::ValidationFailed(format!(
                "2Kρ = {delta_min:e} does not fit the box radius {:e}",
                s.radius
            )));
        }
    }
    let ok = |da: f64| {
        let u = dx_upper(b, da, slant);
        u > 0.0 && dx_lower(b, da) <= u
    };
    let mut da = 0.0;
    if b.ell_alpha > 0.0 {
        if ok(b.ell_alpha) {
            da = b.ell_alpha;
        } else {
            let (mut lo, mut hi) = (0.0, b.ell_alpha);
            for _ in 0..200 {
                let m = 0.5 * (lo + hi);
                if m <= lo || m >= hi {
                    break;
                }
                if ok(m) {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            da = lo;
        }
    }
    // back off until the rigorous check passes
    for _ in 0..200 {
        if let Some(dx) = shrink_to_feasible(b, da, dx_upper(b, da, slant), slant) {
            return Ok(DeltaPair { delta_alpha: da, delta_x: dx, delta_min });
        }
        if da == 0.0 {
            break;
        }
        da *= 0.999;
        if da < 1e-300 {
            da = 0.0;
        }
    }
    Err(CiftError::ValidationFailed("2K L1 δ_x + 2K L2 δ_α ≤ 1 and 2Kρ + 2K L3 δ_α + 2K L4 δ_α² ≤ δ_x have no common solution".into()))
}

/// Options for [`validate_zero`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    /// Radius `ℓ` of the box on which second derivatives are bounded.
    pub ell: f64,
    /// Multiply `H` by a float inverse of its Jacobian at the anchor.
    pub precondition: bool,
    /// Use the row-sum instead of the mean-value `m·max` Lipschitz bound.
    pub rowsum_lipschitz: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { ell: 1e-6, precondition: true, rowsum_lipschitz: false }
    }
}

/// Outcome of validating an isolated zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCertificate {
    pub system: String,
    #[serde(with = "decimal_vec")]
    pub anchor: Vec<f64>,
    #[serde(with = "decimal")]
    pub rho: f64,
    #[serde(rename = "K", with = "decimal")]
    pub k: f64,
    #[serde(rename = "L1", with = "decimal")]
    pub l1: f64,
    #[serde(rename = "L2", with = "decimal")]
    pub l2: f64,
    #[serde(rename = "L3", with = "decimal")]
    pub l3: f64,
    #[serde(rename = "L4", with = "decimal")]
    pub l4: f64,
    #[serde(with = "decimal")]
    pub ell: f64,
    #[serde(with = "decimal")]
    pub delta_accuracy: f64,
    #[serde(with = "decimal")]
    pub delta_uniqueness: f64,
    pub preconditioner_hash: String,
}

impl ZeroCertificate {
    /// Interval box of radius `delta_accuracy` around the anchor.
    pub fn enclosure(&self) -> Vec<Interval> {
        self.anchor.iter().map(|&z| Interval::centered(z, self.delta_accuracy)).collect()
    }
}

/// SHA-256 of the matrix entries (column-major, little-endian bytes).
pub fn matrix_hash(m: &DMatrix<f64>) -> String {
    let mut h = Sha256::new();
    for x in m.iter() {
        h.update(x.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Float inverse of the Jacobian at `z0`.
pub fn float_preconditioner<S: SquareSystem + ?Sized>(sys: &S, z0: &[f64]) -> Result<DMatrix<f64>, CiftError> {
    jacobian(sys, z0).try_inverse().ok_or(CiftError::SingularApproximation)
}

/// Validates a unique zero of `sys` near `z0`.
pub fn validate_zero<S: SquareSystem + ?Sized>(
    sys: &S,
    z0: &[f64],
    opts: &ValidationOptions,
) -> Result<ZeroCertificate, CiftError> {
    let n = sys.dim();
    assert_eq!(z0.len(), n);
    let m = if opts.precondition {
        match float_preconditioner(sys, z0) {
            Ok(m) => m,
            Err(_) => return Err(CiftError::ValidationFailed("derivative is not invertible at the anchor".into())),
        }
    } else {
        DMatrix::identity(n, n)
    };
    let mi = m.map(iv);
    let zi: Vec<Interval> = z0.iter().map(|&x| iv(x)).collect();

    let h0 = sys.eval(&zi);
    let rho = residual_bound(mat_vec(&mi, &h0).as_slice());

    let a = mat_mul(&mi, &jacobian(sys, &zi));
    let inv = if opts.precondition {
        inverse_bound(&a, &DMatrix::identity(n, n))
    } else {
        let b = a.map(|x| x.mid()).try_inverse().ok_or(CiftError::SingularApproximation);
        match b {
            Ok(b) => inverse_bound(&a, &b),
            Err(_) => Err(CiftError::NotInvertibleEvidence { rho1: f64::INFINITY }),
        }
    }
    .map_err(|e| CiftError::ValidationFailed(format!("derivative is not invertible: {e}")))?;

    let zbox: Vec<Interval> = z0.iter().map(|&x| Interval::centered(x, opts.ell)).collect();
    let hess = precondition_hessians(&m, &hessians(sys, &zbox));
    let l1 = if opts.rowsum_lipschitz { lipschitz_l1_rowsum(&hess) } else { lipschitz_l1(&hess) };

    let bounds = CiftBounds { rho, k: inv.k, l1, l2: 0.0, l3: 0.0, l4: 0.0, ell_x: opts.ell, ell_alpha: 0.0 };
    let deltas = solve_deltas(&bounds, None)?;
    Ok(ZeroCertificate {
        system: sys.name(),
        anchor: z0.to_vec(),
        rho,
        k: inv.k,
        l1,
        l2: 0.0,
        l3: 0.0,
        l4: 0.0,
        ell: opts.ell,
        delta_accuracy: deltas.delta_min,
        delta_uniqueness: deltas.delta_x,
        preconditioner_hash: matrix_hash(&m),
    })
}

/// Enclosure of the solution set of `A x = b` over all `A ∈ a`, `b ∈ rhs`.
pub fn verified_solve(a: &IMatrix, rhs: &[Interval]) -> Result<Vec<Interval>, CiftError> {
    let b = a.map(|x| x.mid()).try_inverse().ok_or(CiftError::SingularApproximation)?;
    let inv = inverse_bound(a, &b)?;
    let mid_rhs = DVector::from_iterator(rhs.len(), rhs.iter().map(|x| x.mid()));
    let xt = &b * mid_rhs;
    let xti: Vec<Interval> = xt.iter().map(|&x| iv(x)).collect();
    let ax = mat_vec(a, &xti);
    let r: Vec<Interval> = rhs.iter().zip(ax.iter()).map(|(&bb, &y)| bb - y).collect();
    let err = (iv(inv.k) * iv(norm_inf(&r).hi())).hi();
    Ok(xt.iter().map(|&x| Interval::centered(x, err)).collect())
}

/// Serde helpers writing floats as shortest round-trip decimal strings.
pub mod decimal {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::interval::{decimal_to_f64, f64_to_decimal};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&f64_to_decimal(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        decimal_to_f64(&s).map_err(serde::de::Error::custom)
    }
}

pub mod decimal_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::interval::{decimal_to_f64, f64_to_decimal};

    pub fn serialize<S: Serializer>(x: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(x.iter().map(|v| f64_to_decimal(*v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| decimal_to_f64(s).map_err(serde::de::Error::custom)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;

    struct Sqrt2;
    impl SquareSystem for Sqrt2 {
        fn dim(&self) -> usize {
            1
        }
        fn eval<T: Scalar>(&self, z: &[T]) -> Vec<T> {
            vec![z[0] * z[0] - T::from_f64(2.0)]
        }
    }

    struct Square;
    impl SquareSystem for Square {
        fn dim(&self) -> usize {
            1
        }
        fn eval<T: Scalar>(&self, z: &[T]) -> Vec<T> {
            vec![z[0] * z[0]]
        }
    }

    #[test]
    fn certifies_sqrt2() {
        let c = validate_zero(&Sqrt2, &[1.41421356], &ValidationOptions::default()).unwrap();
        assert!(c.delta_accuracy <= 1e-7);
        assert!((1.41421356f64 - 2f64.sqrt()).abs() <= c.delta_accuracy);
    }

    #[test]
    fn singular_derivative_fails() {
        assert!(matches!(
            validate_zero(&Square, &[0.0], &ValidationOptions::default()),
            Err(CiftError::ValidationFailed(_))
        ));
    }

    #[test]
    fn inverse_bound_identity_and_diag() {
        let i2 = IMatrix::identity(2, 2);
        let r = inverse_bound(&i2, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!((r.rho1, r.k), (0.0, 1.0));
        let a = IMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![iv(2.0), iv(4.0)]));
        let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 0.25]));
        assert_eq!(inverse_bound(&a, &b).unwrap().k, 0.5);
    }

    #[test]
    fn parameter_free_deltas() {
        let b = CiftBounds { rho: 1e-12, k: 1.0, l1: 1.245e6, ell_x: 1e-6, ..Default::default() };
        let d = solve_deltas(&b, None).unwrap();
        assert_eq!(d.delta_alpha, 0.0);
        assert!((d.delta_x - 1.0 / (2.0 * 1.245e6)).abs() < 1e-18);
        assert!(d.delta_min >= 2e-12);
        let b = CiftBounds { rho: 1e-3, k: 1.0, l1: 1e3, ell_x: 1.0, ..Default::default() };
        assert!(solve_deltas(&b, None).is_err());
    }
}
