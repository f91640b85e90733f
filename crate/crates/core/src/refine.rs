//! High-precision reference solves used to audit certificates.
//!
//! Newton's method runs in double-double arithmetic ([`Quad`], about 31
//! digits) from the certificate anchor; the converged point must lie in
//! the certified accuracy ball.

use qd::Quad;
use serde::{Deserialize, Serialize};

use crate::cift::ZeroCertificate;
use crate::linalg::newton;
use crate::system::SquareSystem;

/// Outcome of one refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    /// `‖z_ref − z₀‖_∞`.
    pub distance: f64,
    /// Certified radius it is compared with.
    pub radius: f64,
    pub inside: bool,
    /// `‖H(z_ref)‖_∞` in double-double.
    pub residual: f64,
}

/// Double-double Newton from `z0`.
pub fn refine<S: SquareSystem + ?Sized>(sys: &S, z0: &[f64]) -> Option<Vec<Quad>> {
    let start: Vec<Quad> = z0.iter().map(|&x| Quad::from(x)).collect();
    newton::<S, Quad>(sys, &start, 1e-29, 40).ok()
}

/// Max-norm distance between a double-double point and a float point.
pub fn distance(z: &[Quad], z0: &[f64]) -> f64 {
    z.iter().zip(z0).map(|(&a, &b)| { let d = a - Quad::from(b); (d.0 + d.1).abs() }).fold(0.0, f64::max)
}

/// Refines from `anchor` and compares with `radius`.
pub fn check_zero<S: SquareSystem + ?Sized>(sys: &S, anchor: &[f64], radius: f64) -> Option<Refinement> {
    let z = refine(sys, anchor)?;
    let h = sys.eval(&z);
    let residual = h.iter().map(|q| (q.0 + q.1).abs()).fold(0.0, f64::max);
    let distance = distance(&z, anchor);
    Some(Refinement { distance, radius, inside: distance <= radius, residual })
}

/// Refinement check of a [`ZeroCertificate`] against its accuracy radius.
pub fn check_certificate<S: SquareSystem + ?Sized>(sys: &S, cert: &ZeroCertificate) -> Option<Refinement> {
    check_zero(sys, &cert.anchor, cert.delta_accuracy)
}
