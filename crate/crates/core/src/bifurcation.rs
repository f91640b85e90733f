//! Certification of Neimark–Sacker, saddle-node and transcritical points of
//! the coral map.
//!
//! Neimark–Sacker and saddle-node points are isolated zeros of extended
//! systems (fixed point plus eigen-data plus normalization). The zero is
//! validated with [`cift::validate_zero`], after which the transversality
//! and nondegeneracy conditions are evaluated in interval arithmetic on the
//! certified enclosure.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::cift::{self, decimal, verified_solve, ValidationOptions, ZeroCertificate};
use crate::error::BifurcationError;
use crate::interval::{mat_vec, norm_inf, IMatrix, Interval};
use crate::linalg::{cabs, cmat_mul, creal, newton, to_complex, verified_solve_complex, CIMatrix, CInterval};
use crate::model::CoralModel;
use crate::scalar::Scalar;
use crate::system::SquareSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BifurcationKind {
    SaddleNode,
    NeimarkSacker,
    Transcritical,
}

/// Rigorous summary of a bifurcation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifCertificate {
    pub kind: BifurcationKind,
    /// Enclosures of `R`, `λ`, `x_1` and the polyp density `P`.
    pub r: Interval,
    pub lambda: Interval,
    pub x1: Interval,
    pub density: Interval,
    /// Interval box around the full extended-system zero.
    pub enclosure: Vec<Interval>,
    #[serde(with = "decimal")]
    pub delta_accuracy: f64,
    #[serde(with = "decimal")]
    pub delta_uniqueness: f64,
    pub conditions: BTreeMap<String, Interval>,
    /// Number of eigenvalues of `D_x f` verified strictly inside the unit disk.
    pub spectrum_note: Option<usize>,
    pub validation: Option<ZeroCertificate>,
}

fn stage(stage: &'static str) -> impl Fn(String) -> BifurcationError {
    move |reason| BifurcationError::CertificationFailed { stage, reason }
}

/// `D_x f(λ, x) y` using the sparse structure of the Jacobian.
fn jac_vec<T: Scalar>(grad: &[T], s: &[T], y: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(y.len());
    out.push(grad.iter().zip(y).fold(T::zero(), |a, (&g, &v)| a + g * v));
    for k in 0..y.len() - 1 {
        out.push(s[k] * y[k]);
    }
    out
}

/// Neimark–Sacker extended system in `R^{3d+3}`, unknowns ordered
/// `(x, λ, w, u, a, b)`:
///
/// ```text
/// f(λ,x) − x,  D_xf w − a w + b u,  D_xf u − b w − a u,
/// a² + b² − 1,  ‖w‖² − 1,  ‖u‖² − 1
/// ```
///
/// At a zero, `q = u − i w` satisfies `D_xf q = (a + i b) q`.
#[derive(Debug, Clone)]
pub struct NsSystem {
    pub model: CoralModel,
}

impl SquareSystem for NsSystem {
    fn dim(&self) -> usize {
        3 * self.model.dim() + 3
    }

    fn name(&self) -> String {
        "neimark_sacker".into()
    }

    fn eval<T: Scalar>(&self, z: &[T]) -> Vec<T> {
        let d = self.model.dim();
        let c = self.model.view::<T>();
        let (x, lambda) = (&z[..d], z[d]);
        let w = &z[d + 1..2 * d + 1];
        let u = &z[2 * d + 1..3 * d + 1];
        let (a, b) = (z[3 * d + 1], z[3 * d + 2]);
        let grad = c.first_row_gradient(lambda, x);
        let jw = jac_vec(&grad, &c.s, w);
        let ju = jac_vec(&grad, &c.s, u);
        let mut out = c.map_f(lambda, x);
        out.extend((0..d).map(|k| jw[k] - a * w[k] + b * u[k]));
        out.extend((0..d).map(|k| ju[k] - b * w[k] - a * u[k]));
        let one = T::one();
        out.push(a * a + b * b - one);
        out.push(w.iter().fold(T::zero(), |s, &v| s + v * v) - one);
        out.push(u.iter().fold(T::zero(), |s, &v| s + v * v) - one);
        out
    }
}

/// Saddle-node extended system in `R^{2d+1}`, unknowns `(x, v, λ)`:
/// `f(λ,x) − x`, `D_xf v − v`, `‖v‖² − 1`.
#[derive(Debug, Clone)]
pub struct SnSystem {
    pub model: CoralModel,
}

impl SquareSystem for SnSystem {
    fn dim(&self) -> usize {
        2 * self.model.dim() + 1
    }

    fn name(&self) -> String {
        "saddle_node".into()
    }

    fn eval<T: Scalar>(&self, z: &[T]) -> Vec<T> {
        let d = self.model.dim();
        let c = self.model.view::<T>();
        let (x, v, lambda) = (&z[..d], &z[d..2 * d], z[2 * d]);
        let grad = c.first_row_gradient(lambda, x);
        let jv = jac_vec(&grad, &c.s, v);
        let mut out = c.map_f(lambda, x);
        out.extend((0..d).map(|k| jv[k] - v[k]));
        out.push(v.iter().fold(T::zero(), |s, &y| s + y * y) - T::one());
        out
    }
}

/// Approximate Neimark–Sacker point.
#[derive(Debug, Clone, PartialEq)]
pub struct NsPoint {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl NsPoint {
    pub fn to_vector(&self) -> Vec<f64> {
        let mut z = self.x.clone();
        z.push(self.lambda);
        z.extend(&self.w);
        z.extend(&self.u);
        z.push(self.a);
        z.push(self.b);
        z
    }

    pub fn from_vector(z: &[f64], d: usize) -> Self {
        NsPoint {
            x: z[..d].to_vec(),
            lambda: z[d],
            w: z[d + 1..2 * d + 1].to_vec(),
            u: z[2 * d + 1..3 * d + 1].to_vec(),
            a: z[3 * d + 1],
            b: z[3 * d + 2],
        }
    }

    /// Angle `θ₀ = atan2(b, a)` in radians.
    pub fn theta(&self) -> f64 {
        self.b.atan2(self.a)
    }
}

/// Approximate saddle-node point.
#[derive(Debug, Clone, PartialEq)]
pub struct SnPoint {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda: f64,
}

impl SnPoint {
    pub fn to_vector(&self) -> Vec<f64> {
        let mut z = self.x.clone();
        z.extend(&self.v);
        z.push(self.lambda);
        z
    }

    pub fn from_vector(z: &[f64], d: usize) -> Self {
        SnPoint { x: z[..d].to_vec(), v: z[d..2 * d].to_vec(), lambda: z[2 * d] }
    }
}

fn spectral_radius(model: &CoralModel, lambda: f64, x: &[f64]) -> f64 {
    let j = model.view::<f64>().jacobian_x(lambda, x);
    j.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Upper-branch fixed point (largest root of the reduced equation).
fn upper_branch(model: &CoralModel, lambda: f64) -> Option<Vec<f64>> {
    let roots = model.solve_branch_1d(lambda);
    (roots.len() > 1).then(|| model.fixed_point_from_x1(*roots.last().unwrap()))
}

/// Right eigenvector of `a` for the eigenvalue closest to `mu` by inverse
/// iteration.
pub fn eigenvector(a: &DMatrix<f64>, mu: Complex<f64>) -> Option<DVector<Complex<f64>>> {
    let n = a.nrows();
    let shift = mu + Complex::new(1e-10 * mu.norm().max(1.0), 1e-11);
    let m = a.map(|x| Complex::new(x, 0.0)) - DMatrix::identity(n, n) * shift;
    let lu = m.lu();
    let mut y = DVector::from_fn(n, |i, _| Complex::new(1.0 + 0.1 * i as f64, 0.05 * i as f64));
    for _ in 0..4 {
        y = lu.solve(&y)?;
        let nrm = y.norm();
        if !nrm.is_finite() || nrm == 0.0 {
            return None;
        }
        y /= Complex::new(nrm, 0.0);
    }
    Some(y)
}

/// Real and imaginary parts `(u, w)` of `q = u − i w`, rotated so that
/// `‖u‖₂ = ‖w‖₂` and scaled to unit length.
fn balanced_parts(q: &DVector<Complex<f64>>) -> (Vec<f64>, Vec<f64>) {
    let s: Complex<f64> = q.iter().map(|z| z * z).sum();
    let t = (std::f64::consts::FRAC_PI_2 - s.arg()) / 2.0;
    let rot = Complex::from_polar(1.0, t);
    let qr: Vec<Complex<f64>> = q.iter().map(|z| z * rot).collect();
    let nu = qr.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
    let nw = qr.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    let u = qr.iter().map(|z| z.re / nu).collect();
    let w = qr.iter().map(|z| -z.im / nw).collect();
    (u, w)
}

/// Locates the Neimark–Sacker point on the upper branch by scanning
/// `R ∈ [r_lo, r_hi]` for the spectral radius crossing 1, then refines it by
/// Newton's method on [`NsSystem`].
pub fn approximate_ns(model: &CoralModel, r_lo: f64, r_hi: f64) -> Result<NsPoint, BifurcationError> {
    let nf = |m: &str| BifurcationError::NotFound(m.to_string());
    let excess = |lambda: f64| -> Option<f64> {
        let x = upper_branch(model, lambda)?;
        Some(spectral_radius(model, lambda, &x) - 1.0)
    };
    let n = 200;
    let lam = |i: usize| model.r_to_lambda(r_lo + (r_hi - r_lo) * i as f64 / n as f64);
    let mut prev = excess(lam(0)).ok_or_else(|| nf("no nontrivial branch at the lower end"))?;
    let mut bracket = None;
    for i in 1..=n {
        let Some(e) = excess(lam(i)) else { continue };
        if prev < 0.0 && e >= 0.0 {
            bracket = Some((lam(i - 1), lam(i)));
            break;
        }
        prev = e;
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| nf("spectral radius never crosses 1"))?;
    for _ in 0..80 {
        let m = 0.5 * (lo + hi);
        if excess(m).unwrap_or(1.0) < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let x = upper_branch(model, lambda).ok_or_else(|| nf("branch lost"))?;
    let j = model.view::<f64>().jacobian_x(lambda, &x);
    let mu = j
        .complex_eigenvalues()
        .iter()
        .copied()
        .filter(|z| z.im > 0.0)
        .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .ok_or_else(|| nf("critical eigenvalue is real"))?;
    let q = eigenvector(&j, mu).ok_or_else(|| nf("eigenvector computation failed"))?;
    let (u, w) = balanced_parts(&q);
    let guess = NsPoint { x, lambda, w, u, a: mu.re / mu.norm(), b: mu.im / mu.norm() };
    let sys = NsSystem { model: model.clone() };
    let z = newton(&sys, &guess.to_vector(), 1e-15, 50).map_err(|r| nf(&format!("Newton stalled at step size {r:e}")))?;
    Ok(NsPoint::from_vector(&z, model.dim()))
}

/// Locates the fold of the nontrivial branch, where `φ'(P) = 0`, and
/// refines it by Newton's method on [`SnSystem`]. The kernel vector is
/// oriented with a positive first component.
pub fn approximate_sn(model: &CoralModel) -> Result<SnPoint, BifurcationError> {
    let c = model.view::<f64>();
    // φ' changes sign from + to − at the maximum of φ
    let (mut lo, mut hi) = (1e-6, 1e6);
    if !(c.phi_derivatives(lo)[1] > 0.0 && c.phi_derivatives(hi)[1] < 0.0) {
        return Err(BifurcationError::NotFound("φ has no interior maximum".into()));
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if c.phi_derivatives(m)[1] > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let p_star = 0.5 * (lo + hi);
    let sigma = c.density(&c.a);
    let x1 = p_star / sigma;
    let lambda = 1.0 / (c.ba * c.phi(p_star));
    let x = model.fixed_point_from_x1(x1);
    let norm = c.a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let v: Vec<f64> = c.a.iter().map(|v| v / norm).collect();
    let sys = SnSystem { model: model.clone() };
    let guess = SnPoint { x, v, lambda };
    let z = newton(&sys, &guess.to_vector(), 1e-15, 50)
        .map_err(|r| BifurcationError::NotFound(format!("Newton stalled at step size {r:e}")))?;
    let mut p = SnPoint::from_vector(&z, model.dim());
    if p.v[0] < 0.0 {
        p.v.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(p)
}

/// Interval `θ` in radians for `b > 0`: `θ = π/2 − atan(a/b)`.
pub fn angle_enclosure(a: Interval, b: Interval) -> Result<Interval, BifurcationError> {
    if !b.certainly_positive() {
        return Err(BifurcationError::ConditionInconclusive("sin θ > 0".into()));
    }
    Ok(Interval::pi() / Interval::point(2.0) - (a / b).atan())
}

fn ipow(z: CInterval, k: u32) -> CInterval {
    (0..k).fold(creal(Interval::ONE), |acc, _| acc * z)
}

/// Counts eigenvalues of the interval matrix `a` that provably lie in the
/// open unit disk.
///
/// `a` is diagonalized numerically, `V⁻¹AV` is enclosed with the
/// inverse-bounds lemma applied to `W V` (`W` a float inverse of `V`), and
/// Gershgorin disks of the result are grouped into connected components. A
/// component strictly inside the disk contributes its number of disks.
pub fn verified_spectrum_inside_disk(a: &IMatrix) -> Result<usize, BifurcationError> {
    let n = a.nrows();
    let inconclusive = |m: &str| BifurcationError::SpectrumInconclusive(m.to_string());
    let am = a.map(|x| x.mid());
    let eig = am.clone().complex_eigenvalues();
    let mut v = DMatrix::<Complex<f64>>::zeros(n, n);
    for (j, &mu) in eig.iter().enumerate() {
        let y = eigenvector(&am, mu).ok_or_else(|| inconclusive("eigenvector computation failed"))?;
        v.set_column(j, &y);
    }
    let w = v.clone().try_inverse().ok_or_else(|| inconclusive("eigenvector matrix is singular"))?;
    let vi: CIMatrix = v.map(|z| Complex::new(Interval::point(z.re), Interval::point(z.im)));
    let wi: CIMatrix = w.map(|z| Complex::new(Interval::point(z.re), Interval::point(z.im)));
    let wav = cmat_mul(&cmat_mul(&wi, &to_complex(a)), &vi);
    let mut e = cmat_mul(&wi, &vi);
    // ‖I − WV‖ in the complex max-row-sum norm
    for i in 0..n {
        e[(i, i)] = e[(i, i)] - creal(Interval::ONE);
    }
    let row_norm = |m: &CIMatrix| {
        (0..n).map(|i| (0..n).map(|j| cabs(m[(i, j)])).sum::<Interval>().hi()).fold(0.0, f64::max)
    };
    let rho1 = row_norm(&e);
    if !(rho1 < 1.0) {
        return Err(inconclusive(&format!("similarity too ill-conditioned (‖I − WV‖ ≤ {rho1:e})")));
    }
    // V⁻¹AV = (WV)⁻¹ WAV = WAV + E with ‖E‖ ≤ ρ1/(1−ρ1)·‖WAV‖
    let eta = (Interval::point(rho1) / (Interval::ONE - Interval::point(rho1)) * Interval::point(row_norm(&wav))).hi();
    let centers: Vec<CInterval> = (0..n).map(|i| wav[(i, i)]).collect();
    let radii: Vec<f64> = (0..n)
        .map(|i| {
            let off: Interval = (0..n).filter(|&j| j != i).map(|j| cabs(wav[(i, j)])).sum();
            let c = centers[i];
            // fold the center's own width into the radius
            let cw = Interval::point(c.re.rad()) + Interval::point(c.im.rad());
            (off + Interval::point(eta) + cw).hi()
        })
        .collect();
    let cmid: Vec<Complex<f64>> = centers.iter().map(|c| Complex::new(c.re.mid(), c.im.mid())).collect();
    let inside: Vec<bool> = (0..n)
        .map(|i| (cabs(Complex::new(Interval::point(cmid[i].re), Interval::point(cmid[i].im))) + Interval::point(radii[i])).hi() < 1.0)
        .collect();
    // union-find over possibly overlapping disks
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        if p[i] != i {
            let r = find(p, p[i]);
            p[i] = r;
        }
        p[i]
    }
    for i in 0..n {
        for j in i + 1..n {
            let dist = cabs(Complex::new(
                Interval::point(cmid[i].re) - Interval::point(cmid[j].re),
                Interval::point(cmid[i].im) - Interval::point(cmid[j].im),
            ));
            if dist.lo() <= (Interval::point(radii[i]) + Interval::point(radii[j])).hi() {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut count = 0;
    for root in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| find(&mut parent, i) == root).collect();
        if !members.is_empty() && members.iter().all(|&i| inside[i]) {
            count += members.len();
        }
    }
    Ok(count)
}

/// Validation and condition evaluation for a Neimark–Sacker point.
///
/// Conditions reported (each must exclude 0):
/// - `c`: `Re(e^{-iθ}⟨p, ∂_λ D_xf · q⟩)` with the parameter derivative at a
///   fixed state;
/// - `c_total`: the same with `dA/dλ` taken along the fixed-point branch,
///   `∂_λ D_xf + D²_xf[dx/dλ, ·]`, `dx/dλ = −(D_xf − I)⁻¹ D_λ f`;
/// - `theta_deg`: `θ₀` in degrees, which must avoid 90 and 120;
/// - `root_of_unity_k{1..4}`: `|e^{ikθ₀} − 1|`;
/// - `e`: `Re(e^{-iθ}(⟨p,C(q,q,q̄)⟩ + 2⟨p,B(q,(I−A)⁻¹B(q,q̄))⟩ + ⟨p,B(q̄,(e^{2iθ}I−A)⁻¹B(q,q))⟩))`.
///
/// `q = u − i w` is the right eigenvector for `e^{iθ}` and `p` solves
/// `Aᵀp = e^{-iθ}p`, `⟨p, q⟩ = p̄ᵀq = 1`.
pub fn certify_ns(
    model: &CoralModel,
    approx: &NsPoint,
    opts: &ValidationOptions,
) -> Result<BifCertificate, BifurcationError> {
    let d = model.dim();
    let sys = NsSystem { model: model.clone() };
    let z0 = approx.to_vector();
    let cert = cift::validate_zero(&sys, &z0, opts).map_err(|e| stage("validate")(e.to_string()))?;
    let enc = cert.enclosure();
    let x = &enc[..d];
    let lam = enc[d];
    let w = &enc[d + 1..2 * d + 1];
    let u = &enc[2 * d + 1..3 * d + 1];
    let (ea, eb) = (enc[3 * d + 1], enc[3 * d + 2]);

    let c = model.view::<Interval>();
    let jac = c.jacobian_x(lam, x);
    let inside = verified_spectrum_inside_disk(&jac).map_err(|e| stage("spectrum")(e.to_string()))?;
    if inside != d - 2 {
        return Err(stage("spectrum")(format!("only {inside} of {} remaining eigenvalues verified inside the unit disk", d - 2)));
    }

    let mut conditions = BTreeMap::new();
    let theta = angle_enclosure(ea, eb).map_err(|e| stage("angle")(e.to_string()))?;
    let deg = theta * Interval::point(180.0) / Interval::pi();
    conditions.insert("theta_deg".to_string(), deg);
    if deg.contains(90.0) || deg.contains(120.0) || !(deg.lo() > 0.0 && deg.hi() < 180.0) {
        return Err(stage("condition d")(format!("θ₀ enclosure {deg} touches a forbidden angle")));
    }
    let mu = Complex::new(ea, eb);
    for k in 1..=4u32 {
        let g = cabs(ipow(mu, k) - creal(Interval::ONE));
        conditions.insert(format!("root_of_unity_k{k}"), g);
        if g.contains_zero() {
            return Err(stage("condition d")(format!("e^{{i{k}θ₀}} may equal 1")));
        }
    }

    let q: Vec<CInterval> = u.iter().zip(w).map(|(&re, &im)| Complex::new(re, -im)).collect();
    let qbar: Vec<CInterval> = q.iter().map(|z| z.conj()).collect();

    // adjoint eigenvector from the bordered system
    // [[Aᵀ − μ̄I, q], [q̄ᵀ, 0]] (p, s) = (0, 1)
    let mut bord = CIMatrix::from_element(d + 1, d + 1, CInterval::zero());
    for i in 0..d {
        for j in 0..d {
            bord[(i, j)] = creal(jac[(j, i)]);
        }
        bord[(i, i)] = bord[(i, i)] - mu.conj();
        bord[(i, d)] = q[i];
        bord[(d, i)] = qbar[i];
    }
    let mut rhs = vec![CInterval::zero(); d + 1];
    rhs[d] = creal(Interval::ONE);
    let ps = verified_solve_complex(&bord, &rhs).map_err(|e| stage("adjoint eigenvector")(e.to_string()))?;
    let p = &ps[..d];

    // (c) with the partial parameter derivative of D_xf
    let g1 = c.first_row_gradient(Interval::ONE, x);
    let gq = g1.iter().zip(&q).fold(CInterval::zero(), |acc, (&g, &qk)| acc + qk * g);
    let cond_c = (mu.conj() * p[0].conj() * gq).re;
    conditions.insert("c".to_string(), cond_c);

    // (c) along the branch
    let mut a_minus_i = jac.clone();
    for i in 0..d {
        a_minus_i[(i, i)] -= Interval::ONE;
    }
    let dlam_f = c.jacobian_lambda(lam, x);
    let neg: Vec<Interval> = dlam_f.iter().map(|v| -*v).collect();
    let dx = verified_solve(&a_minus_i, &neg).map_err(|e| stage("branch derivative")(e.to_string()))?;
    let dxc: Vec<CInterval> = dx.iter().map(|&v| creal(v)).collect();
    let bq = c.bilinear_first(lam, x, &dxc, &q);
    let cond_c_total = (mu.conj() * p[0].conj() * (gq + bq)).re;
    conditions.insert("c_total".to_string(), cond_c_total);

    // (e)
    let c3 = c.trilinear_first(lam, x, &q, &q, &qbar);
    let b_qqbar = c.bilinear_first(lam, x, &q, &qbar).re;
    let mut rhs1 = vec![Interval::ZERO; d];
    rhs1[0] = b_qqbar;
    let mut i_minus_a = jac.map(|v| -v);
    for i in 0..d {
        i_minus_a[(i, i)] += Interval::ONE;
    }
    let y1 = verified_solve(&i_minus_a, &rhs1).map_err(|e| stage("condition e")(e.to_string()))?;
    let y1c: Vec<CInterval> = y1.iter().map(|&v| creal(v)).collect();
    let b_q_y1 = c.bilinear_first(lam, x, &q, &y1c);
    let b_qq = c.bilinear_first(lam, x, &q, &q);
    let mu2 = mu * mu;
    let mut m2 = to_complex(&jac).map(|v| -v);
    for i in 0..d {
        m2[(i, i)] = m2[(i, i)] + mu2;
    }
    let mut rhs2 = vec![CInterval::zero(); d];
    rhs2[0] = b_qq;
    let y2 = verified_solve_complex(&m2, &rhs2).map_err(|e| stage("condition e")(e.to_string()))?;
    let b_qbar_y2 = c.bilinear_first(lam, x, &qbar, &y2);
    let two = creal(Interval::point(2.0));
    let inner = p[0].conj() * (c3 + two * b_q_y1 + b_qbar_y2);
    let cond_e = (mu.conj() * inner).re;
    conditions.insert("e".to_string(), cond_e);

    for key in ["c", "c_total", "e"] {
        if conditions[key].contains_zero() {
            return Err(BifurcationError::ConditionInconclusive(key.to_string()));
        }
    }

    let x1 = x[0];
    Ok(BifCertificate {
        kind: BifurcationKind::NeimarkSacker,
        r: lam * c.ba,
        lambda: lam,
        x1,
        density: c.density(x),
        enclosure: enc.clone(),
        delta_accuracy: cert.delta_accuracy,
        delta_uniqueness: cert.delta_uniqueness,
        conditions,
        spectrum_note: Some(inside),
        validation: Some(cert),
    })
}

/// Validation and condition evaluation for a saddle-node point.
///
/// Conditions: `c = pᵀD_λf`, `d = pᵀB(q,q)` with `q = v` and `p` the left
/// eigenvector, `pᵀq = 1`. Also reported: `pq_minus_one`, enclosing `pᵀq − 1`.
pub fn certify_sn(
    model: &CoralModel,
    approx: &SnPoint,
    opts: &ValidationOptions,
) -> Result<BifCertificate, BifurcationError> {
    let d = model.dim();
    let sys = SnSystem { model: model.clone() };
    let z0 = approx.to_vector();
    let cert = cift::validate_zero(&sys, &z0, opts).map_err(|e| stage("validate")(e.to_string()))?;
    let enc = cert.enclosure();
    let (x, q, lam) = (&enc[..d], &enc[d..2 * d], enc[2 * d]);
    let c = model.view::<Interval>();
    let jac = c.jacobian_x(lam, x);

    // [[Aᵀ − I, q], [qᵀ, 0]] (p, s) = (0, 1)
    let mut bord = IMatrix::zeros(d + 1, d + 1);
    for i in 0..d {
        for j in 0..d {
            bord[(i, j)] = jac[(j, i)];
        }
        bord[(i, i)] -= Interval::ONE;
        bord[(i, d)] = q[i];
        bord[(d, i)] = q[i];
    }
    let mut rhs = vec![Interval::ZERO; d + 1];
    rhs[d] = Interval::ONE;
    let ps = verified_solve(&bord, &rhs).map_err(|e| stage("left eigenvector")(e.to_string()))?;
    let p = &ps[..d];

    let mut conditions = BTreeMap::new();
    let dl = c.jacobian_lambda(lam, x);
    let cond_c: Interval = p.iter().zip(dl.iter()).map(|(&a, &b)| a * b).sum();
    let cond_d = p[0] * c.bilinear_first(lam, x, q, q);
    let pq: Interval = p.iter().zip(q).map(|(&a, &b)| a * b).sum();
    conditions.insert("c".to_string(), cond_c);
    conditions.insert("d".to_string(), cond_d);
    conditions.insert("pq_minus_one".to_string(), pq - Interval::ONE);
    let residual = mat_vec(&jac.transpose(), p);
    let left_res: Vec<Interval> = residual.iter().zip(p).map(|(&r, &pk)| r - pk).collect();
    conditions.insert("left_residual_norm".to_string(), norm_inf(&left_res));

    for key in ["c", "d"] {
        if conditions[key].contains_zero() {
            return Err(BifurcationError::ConditionInconclusive(key.to_string()));
        }
    }
    let inside = verified_spectrum_inside_disk(&jac).ok();
    Ok(BifCertificate {
        kind: BifurcationKind::SaddleNode,
        r: lam * c.ba,
        lambda: lam,
        x1: x[0],
        density: c.density(x),
        enclosure: enc.clone(),
        delta_accuracy: cert.delta_accuracy,
        delta_uniqueness: cert.delta_uniqueness,
        conditions,
        spectrum_note: inside,
        validation: Some(cert),
    })
}

/// Closed-form analysis of the transcritical point on the trivial branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriticalResult {
    pub lambda_star: Interval,
    pub r_star: Interval,
    /// Right eigenvector `a`.
    pub v: Vec<Interval>,
    /// Left eigenvector: `w_d = b_d`, `w_k = b_k + S_k w_{k+1}`.
    pub w: Vec<Interval>,
    /// `wᵀ D_{xλ}f v = (c1/c2)(b·a)²`.
    pub nd1: Interval,
    /// `wᵀ D²_xf[v, v] = w_1 · 2(β−α) Σ_{k≥2} p_k a_k / Ω`.
    pub nd2: Interval,
    /// Enclosure of `‖(D_xf(λ*, 0) − I) v‖_∞ / ‖v‖_∞`.
    pub eigen_residual: Interval,
    /// Factor `κ` in `det(D_xf(λ, 0) − I) = κ (λ − λ*)`.
    pub det_slope: Interval,
}

pub fn transcritical_analysis(model: &CoralModel) -> TranscriticalResult {
    let c = model.view::<Interval>();
    let d = model.dim();
    let (c1, c2) = (c.c1, c.c2);
    let r_star = c2 / c1;
    let lambda_star = c2 / (c1 * c.ba);
    let zero = vec![Interval::ZERO; d];
    let mut w = vec![Interval::ZERO; d];
    w[d - 1] = c.b[d - 1];
    for k in (0..d - 1).rev() {
        w[k] = c.b[k] + c.s[k] * w[k + 1];
    }
    let jac = c.jacobian_x(lambda_star, &zero);
    let av = mat_vec(&jac, &c.a);
    let res: Vec<Interval> = av.iter().zip(&c.a).map(|(&y, &a)| y - a).collect();
    let eigen_residual = norm_inf(&res) / norm_inf(&c.a);
    let dxl = c.jacobian_x_lambda(&zero);
    let nd1: Interval = mat_vec(&dxl, &c.a).iter().zip(&w).map(|(&y, &wk)| y * wk).sum();
    let nd2 = w[0] * c.bilinear_first(lambda_star, &zero, &c.a, &c.a);
    let sign = if d % 2 == 1 { Interval::ONE } else { -Interval::ONE };
    TranscriticalResult {
        lambda_star,
        r_star,
        v: c.a.clone(),
        w,
        nd1,
        nd2,
        eigen_residual,
        det_slope: sign * c1 * c.ba / c2,
    }
}

impl TranscriticalResult {
    pub fn certificate(&self, model: &CoralModel) -> BifCertificate {
        let mut conditions = BTreeMap::new();
        conditions.insert("nd1".to_string(), self.nd1);
        conditions.insert("nd2".to_string(), self.nd2);
        conditions.insert("eigen_residual".to_string(), self.eigen_residual);
        let mut enclosure = vec![self.lambda_star];
        enclosure.extend(std::iter::repeat(Interval::ZERO).take(model.dim()));
        BifCertificate {
            kind: BifurcationKind::Transcritical,
            r: self.r_star,
            lambda: self.lambda_star,
            x1: Interval::ZERO,
            density: Interval::ZERO,
            enclosure,
            delta_accuracy: 0.0,
            delta_uniqueness: 0.0,
            conditions,
            spectrum_note: None,
            validation: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_spectrum() {
        let a = IMatrix::from_diagonal(&DVector::from_vec(vec![Interval::point(0.5), Interval::point(0.9)]));
        assert_eq!(verified_spectrum_inside_disk(&a).unwrap(), 2);
    }

    #[test]
    fn rotation_on_circle_counts_zero() {
        let t = 46.85f64.to_radians();
        let a = IMatrix::from_row_slice(
            2,
            2,
            &[Interval::point(t.cos()), Interval::point(-t.sin()), Interval::point(t.sin()), Interval::point(t.cos())],
        );
        assert_eq!(verified_spectrum_inside_disk(&a).unwrap(), 0);
    }

    #[test]
    fn transcritical_closed_forms() {
        let m = CoralModel::default();
        let t = transcritical_analysis(&m);
        assert!(t.r_star.contains(1.3e7 / 1.8e5));
        assert!(t.eigen_residual.hi() <= 1e-10);
        assert!(t.nd1.certainly_positive() && t.nd2.certainly_positive());
        assert!(t.w[0].intersect(&m.coefficients().ba).is_some());
    }
}
