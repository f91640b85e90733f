//! Validated pseudo-arclength continuation of a zero set `F(λ, u) = 0`.
//!
//! Points are stored as `z = (λ, u) ∈ R^{1+d}` and directions as
//! `t = (μ, v)`. For an anchor `z₀` and direction `t₀` the extended system
//!
//! ```text
//! G(α, (σ, x)) = ( μ₀σ + v₀ᵗx,  F(λ₀ + αμ₀ + σ, u₀ + αv₀ + x) )
//! ```
//!
//! is validated with the constructive implicit function theorem, giving a
//! box that contains a unique piece of the branch. Consecutive boxes are
//! linked so that they provably enclose the same branch.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cift::{inverse_bound, solve_deltas, CiftBounds, SlantConstraint};
use crate::error::{ContinuationError, ModelError};
use crate::interval::{norm_inf, IMatrix, Interval};
use crate::linalg::solve_dense;
use crate::model::{CoralModel, Preconditioner};
use crate::scalar::{Dual, Scalar};
use crate::system::{hessians_of, jacobian, SquareSystem};

/// A one-parameter family `F(λ, ·): R^d → R^d`.
pub trait BranchProblem: Sync {
    fn dim(&self) -> usize;
    fn residual<T: Scalar>(&self, param: T, u: &[T]) -> Vec<T>;
}

/// Fixed-point equation `f̃(R̃, ũ) − ũ = 0` of the (optionally rescaled)
/// coral map. The continuation parameter is `R̃ = R / r_scale`.
#[derive(Debug, Clone)]
pub struct CoralBranch {
    model: CoralModel,
    precond: Preconditioner,
}

impl CoralBranch {
    pub fn new(model: CoralModel, precond: Preconditioner) -> Self {
        CoralBranch { model, precond }
    }

    /// Raw coordinates `(R, x)`.
    pub fn unpreconditioned(model: CoralModel) -> Self {
        let d = model.dim();
        Self::new(model, Preconditioner::identity(d))
    }

    /// Scales from the nontrivial fixed point at `r`, rounded to one digit,
    /// and `r_scale = 100`.
    pub fn preconditioned(model: CoralModel, r: f64) -> Result<Self, ModelError> {
        let x = largest_fixed_point(&model, r)
            .ok_or_else(|| ModelError::InvalidParams(format!("no nontrivial fixed point at R = {r}")))?;
        let precond = Preconditioner::from_fixed_point(&x, 100.0)?;
        Ok(Self::new(model, precond))
    }

    pub fn model(&self) -> &CoralModel {
        &self.model
    }

    pub fn preconditioner(&self) -> &Preconditioner {
        &self.precond
    }

    /// Approximate branch point `z = (R̃, ũ)` on the upper nontrivial branch.
    pub fn start_point(&self, r: f64) -> Option<Vec<f64>> {
        let x = largest_fixed_point(&self.model, r)?;
        let (p, u) = self.precond.from_original(r, &x);
        let mut z = vec![p];
        z.extend(u);
        Some(z)
    }

    /// `(R, x)` from `z = (R̃, ũ)`.
    pub fn to_original(&self, z: &[f64]) -> (f64, Vec<f64>) {
        self.precond.to_original(z[0], &z[1..])
    }

    pub fn param_of_r(&self, r: f64) -> f64 {
        r / self.precond.r_scale
    }

    pub fn lambda(&self, z: &[f64]) -> f64 {
        self.model.r_to_lambda(z[0] * self.precond.r_scale)
    }
}

fn largest_fixed_point(model: &CoralModel, r: f64) -> Option<Vec<f64>> {
    let roots = model.solve_branch_1d(model.r_to_lambda(r));
    let x1 = roots.into_iter().filter(|&x| x > 0.0).fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))))?;
    Some(model.fixed_point_from_x1(x1))
}

impl BranchProblem for CoralBranch {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn residual<T: Scalar>(&self, param: T, u: &[T]) -> Vec<T> {
        let coral = self.model.view::<T>();
        self.precond.map(&coral, param, u).into_iter().zip(u).map(|(f, &ui)| f - ui).collect()
    }
}

/// `G(α, (σ, x))` for a fixed anchor and direction.
pub struct ExtendedG<'a, P: ?Sized> {
    pub problem: &'a P,
    pub anchor: &'a [f64],
    pub direction: &'a [f64],
}

impl<P: ?Sized> Clone for ExtendedG<'_, P> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<P: ?Sized> Copy for ExtendedG<'_, P> {}

impl<'a, P: BranchProblem + ?Sized> ExtendedG<'a, P> {
    pub fn new(problem: &'a P, anchor: &'a [f64], direction: &'a [f64]) -> Self {
        assert_eq!(anchor.len(), problem.dim() + 1);
        assert_eq!(direction.len(), problem.dim() + 1);
        ExtendedG { problem, anchor, direction }
    }

    /// `(σ, x)` is passed as one vector `w` of length `1 + d`.
    pub fn eval<T: Scalar>(&self, alpha: T, w: &[T]) -> Vec<T> {
        let z: Vec<T> = (0..w.len())
            .map(|i| T::from_f64(self.anchor[i]) + alpha * T::from_f64(self.direction[i]) + w[i])
            .collect();
        let mut out = Vec::with_capacity(w.len());
        out.push(dot_t(self.direction, w));
        out.extend(self.problem.residual(z[0], &z[1..]));
        out
    }

    /// `G(α, ·)` as a square system in `(σ, x)`.
    pub fn at(&self, alpha: f64) -> FixedAlpha<'a, P> {
        FixedAlpha { g: *self, alpha }
    }
}

/// `G(α, ·)` for a fixed `α`.
pub struct FixedAlpha<'a, P: ?Sized> {
    g: ExtendedG<'a, P>,
    alpha: f64,
}

impl<P: BranchProblem + ?Sized> SquareSystem for FixedAlpha<'_, P> {
    fn dim(&self) -> usize {
        self.g.anchor.len()
    }

    fn eval<T: Scalar>(&self, w: &[T]) -> Vec<T> {
        self.g.eval(T::from_f64(self.alpha), w)
    }

    fn name(&self) -> String {
        "extended-G".into()
    }
}

fn dot_t<T: Scalar>(t: &[f64], w: &[T]) -> T {
    t.iter().zip(w).fold(T::zero(), |s, (&a, &b)| s + T::from_f64(a) * b)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Evaluates `G(α, ·)` at `(σ, x)` without going through a square system.
pub fn extended_g<P: BranchProblem + ?Sized, T: Scalar>(
    problem: &P,
    anchor: &[f64],
    direction: &[f64],
    alpha: T,
    w: &[T],
) -> Vec<T> {
    ExtendedG::new(problem, anchor, direction).eval(alpha, w)
}

/// `[D_λF | D_uF]` at `z`, a `d × (1+d)` matrix.
pub fn full_jacobian<P: BranchProblem + ?Sized, T: Scalar>(problem: &P, z: &[T]) -> DMatrix<T> {
    let d = problem.dim();
    let mut j = DMatrix::from_element(d, d + 1, T::zero());
    let mut zd: Vec<Dual<T>> = z.iter().map(|&x| Dual::constant(x)).collect();
    for c in 0..=d {
        zd[c].du = T::one();
        let f = problem.residual(zd[0], &zd[1..]);
        zd[c].du = T::zero();
        for (r, v) in f.iter().enumerate() {
            j[(r, c)] = v.du;
        }
    }
    j
}

/// Null vector of `[D_λF | D_uF]` from a column-pivoted QR of its padded
/// transpose, scaled to unit max norm and oriented along `previous`
/// (or with a nonnegative first component when there is none).
pub fn tangent_estimate<P: BranchProblem + ?Sized>(
    problem: &P,
    z: &[f64],
    previous: Option<&[f64]>,
) -> Result<Vec<f64>, ContinuationError> {
    let d = problem.dim();
    let j = full_jacobian::<_, f64>(problem, z);
    let mut m = DMatrix::zeros(d + 1, d + 1);
    m.view_mut((0, 0), (d + 1, d)).copy_from(&j.transpose());
    let qr = m.col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..d).map(|i| r[(i, i)].abs()).collect();
    let top = diag.iter().fold(0.0f64, |a, &b| a.max(b));
    let low = diag.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if !(top > 0.0 && low > 1e-13 * top) {
        return Err(ContinuationError::TangentUndefined);
    }
    let q = qr.q();
    // the last column of Q is orthogonal to the row space of the Jacobian
    let mut t: Vec<f64> = (0..=d).map(|i| q[(i, d)]).collect();
    let n = max_abs(&t);
    if !(n > 0.0 && n.is_finite()) {
        return Err(ContinuationError::TangentUndefined);
    }
    for x in &mut t {
        *x /= n;
    }
    let flip = match previous {
        Some(p) => p.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>() < 0.0,
        None => t[0] < 0.0,
    };
    if flip {
        for x in &mut t {
            *x = -*x;
        }
    }
    Ok(t)
}

/// Output of [`newton_correct`].
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    /// `(σ*, x*)`.
    pub delta: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Newton's method for `G(α, ·) = 0` started at `(σ, x) = 0`. Converged
/// when `‖G‖_∞ ≤ tol·max(1, ‖z₀‖_∞)`.
pub fn newton_correct<P: BranchProblem + ?Sized>(
    problem: &P,
    anchor: &[f64],
    direction: &[f64],
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Correction, ContinuationError> {
    let g = ExtendedG::new(problem, anchor, direction);
    let sys = g.at(alpha);
    let scale = max_abs(anchor).max(1.0);
    let mut w = vec![0.0; anchor.len()];
    let mut residual = f64::INFINITY;
    for it in 0..=max_iter {
        let h = sys.eval(&w);
        residual = max_abs(&h);
        if !residual.is_finite() {
            break;
        }
        if residual <= tol * scale {
            return Ok(Correction { delta: polish(&sys, w, residual), iterations: it, residual });
        }
        if it == max_iter {
            break;
        }
        let Some(next) = newton_step(&sys, &w, &h) else { break };
        w = next;
    }
    Err(ContinuationError::CorrectorFailed { residual })
}

fn newton_step<S: SquareSystem>(sys: &S, w: &[f64], h: &[f64]) -> Option<Vec<f64>> {
    let j = jacobian(sys, w);
    let dw = solve_dense(&j, h)?;
    Some(w.iter().zip(&dw).map(|(a, b)| a - b).collect())
}

/// Extra Newton steps while the residual keeps dropping, so the anchor
/// sits at the rounding floor.
fn polish<S: SquareSystem>(sys: &S, mut w: Vec<f64>, mut residual: f64) -> Vec<f64> {
    for _ in 0..3 {
        let h = sys.eval(&w);
        let Some(next) = newton_step(sys, &w, &h) else { break };
        let r = max_abs(&sys.eval(&next));
        if !(r < residual) {
            break;
        }
        w = next;
        residual = r;
    }
    w
}

/// Hypotheses of the branch-segment theorem at one anchor.
///
/// With `‖·‖` the max norm (operator row-sum norm for matrices), on the box
/// `|λ − λ₀| ≤ d_λ`, `‖u − u₀‖ ≤ d_u`:
///
/// ```text
/// ‖F(λ₀,u₀)‖ ≤ ρ,   ‖D_λF μ₀ + D_uF v₀‖ ≤ ξ,   ‖D_{(σ,x)}G(0,0)⁻¹‖ ≤ K,
/// ‖D_uF(λ,u) − D_uF(λ₀,u₀)‖ ≤ M1‖u − u₀‖ + M2|λ − λ₀|,
/// ‖D_λF(λ,u) − D_λF(λ₀,u₀)‖ ≤ M3‖u − u₀‖ + M4|λ − λ₀|.
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentHypotheses {
    #[serde(with = "crate::cift::decimal")]
    pub rho: f64,
    #[serde(with = "crate::cift::decimal")]
    pub xi: f64,
    #[serde(with = "crate::cift::decimal")]
    pub k: f64,
    #[serde(with = "crate::cift::decimal")]
    pub m1: f64,
    #[serde(with = "crate::cift::decimal")]
    pub m2: f64,
    #[serde(with = "crate::cift::decimal")]
    pub m3: f64,
    #[serde(with = "crate::cift::decimal")]
    pub m4: f64,
    #[serde(with = "crate::cift::decimal")]
    pub d_u: f64,
    #[serde(with = "crate::cift::decimal")]
    pub d_lambda: f64,
}

/// Verifies the hypotheses with interval arithmetic. `M1..M4` come from
/// second-derivative enclosures of `F` over the whole box (mean-value form,
/// summing absolute second derivatives blockwise).
pub fn segment_hypotheses<P: BranchProblem + ?Sized>(
    problem: &P,
    anchor: &[f64],
    direction: &[f64],
    d_u: f64,
    d_lambda: f64,
) -> Result<SegmentHypotheses, ContinuationError> {
    let d = problem.dim();
    let zi: Vec<Interval> = anchor.iter().map(|&x| Interval::point(x)).collect();
    let rho = norm_inf(&problem.residual(zi[0], &zi[1..])).hi();

    let jac = full_jacobian::<_, Interval>(problem, &zi);
    let ti: Vec<Interval> = direction.iter().map(|&x| Interval::point(x)).collect();
    let jt: Vec<Interval> = (0..d).map(|r| (0..=d).map(|c| jac[(r, c)] * ti[c]).sum()).collect();
    let xi = norm_inf(&jt).hi();

    let mut dg = IMatrix::zeros(d + 1, d + 1);
    for c in 0..=d {
        dg[(0, c)] = ti[c];
        for r in 0..d {
            dg[(r + 1, c)] = jac[(r, c)];
        }
    }
    let b = dg.map(|x| x.mid()).try_inverse().ok_or(crate::error::CiftError::SingularApproximation)?;
    let k = inverse_bound(&dg, &b)?.k;

    let mut boxz = Vec::with_capacity(d + 1);
    boxz.push(Interval::centered(anchor[0], d_lambda));
    boxz.extend(anchor[1..].iter().map(|&u| Interval::centered(u, d_u)));
    let hess = hessians_of(&boxz, |zd| problem.residual(zd[0], &zd[1..]));
    let (mut m1, mut m2, mut m4) = (Interval::ZERO, Interval::ZERO, Interval::ZERO);
    for h in hess.iter().flatten() {
        let mut uu = Interval::ZERO;
        let mut ul = Interval::ZERO;
        for j in 1..=d {
            ul += Interval::point(h[(j, 0)].mag());
            for l in 1..=d {
                uu += Interval::point(h[(j, l)].mag());
            }
        }
        m1 = m1.max(uu);
        m2 = m2.max(ul);
        m4 = m4.max(Interval::point(h[(0, 0)].mag()));
    }
    Ok(SegmentHypotheses {
        rho,
        xi,
        k,
        m1: m1.hi(),
        m2: m2.hi(),
        // mixed partials commute, so the λ-row bound equals the u-column one
        m3: m2.hi(),
        m4: m4.hi(),
        d_u,
        d_lambda,
    })
}

/// Theorem constants `L1..L4` for `G` from the hypotheses, in interval
/// arithmetic.
pub fn derive_extended_constants(h: &SegmentHypotheses, direction: &[f64]) -> CiftBounds {
    let iv = Interval::point;
    let nv = iv(max_abs(&direction[1..]));
    let nm = iv(direction[0].abs());
    let (m1, m2, m3, m4) = (iv(h.m1), iv(h.m2), iv(h.m3), iv(h.m4));
    let l1 = (m1 + m3).max(m2 + m4);
    let l2 = (m1 + m3) * nv + (m2 + m4) * nm;
    let l4 = (m1 * nv + m2 * nm) * nv + (m3 * nv + m4 * nm) * nm;
    let radius = h.d_u.min(h.d_lambda);
    let tn = max_abs(direction);
    CiftBounds {
        rho: h.rho,
        k: h.k,
        l1: l1.hi(),
        l2: l2.hi(),
        l3: h.xi,
        l4: l4.hi(),
        ell_x: radius,
        ell_alpha: (iv(radius) / iv(tn)).lo(),
    }
}

/// One certified piece of the branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchBox {
    /// Anchor `(λ₀, u₀)`.
    #[serde(with = "crate::cift::decimal_vec")]
    pub base: Vec<f64>,
    /// Tangent estimate `(μ₀, v₀)` with unit max norm.
    #[serde(with = "crate::cift::decimal_vec")]
    pub direction: Vec<f64>,
    /// `α` used to predict the next anchor (zero for the last box).
    #[serde(with = "crate::cift::decimal")]
    pub alpha_step: f64,
    #[serde(with = "crate::cift::decimal")]
    pub delta_alpha: f64,
    #[serde(with = "crate::cift::decimal")]
    pub delta_u: f64,
    #[serde(with = "crate::cift::decimal")]
    pub delta_min: f64,
    pub bounds: CiftBounds,
    pub hypotheses: SegmentHypotheses,
    pub linked_to_previous: bool,
}

impl BranchBox {
    /// Slack of the box constraint `δ_α‖t‖ + δ_u ≤ min(d_u, d_λ)`.
    pub fn box_usage(&self) -> f64 {
        let r = self.hypotheses.d_u.min(self.hypotheses.d_lambda);
        (self.delta_alpha * max_abs(&self.direction) + self.delta_u) / r
    }
}

/// Certifies the branch segment through `anchor` along `direction` inside
/// the box of radii `d_u`, `d_λ`. Requires `4K²ρL1 < 1` and `2Kρ < d_u`.
pub fn validate_segment<P: BranchProblem + ?Sized>(
    problem: &P,
    anchor: &[f64],
    direction: &[f64],
    d_u: f64,
    d_lambda: f64,
) -> Result<BranchBox, ContinuationError> {
    let h = segment_hypotheses(problem, anchor, direction, d_u, d_lambda)?;
    let bounds = derive_extended_constants(&h, direction);
    let slant = SlantConstraint { tangent_norm: max_abs(direction), radius: d_u.min(d_lambda) };
    let deltas = solve_deltas(&bounds, Some(slant))?;
    Ok(BranchBox {
        base: anchor.to_vec(),
        direction: direction.to_vec(),
        alpha_step: 0.0,
        delta_alpha: deltas.delta_alpha,
        delta_u: deltas.delta_x,
        delta_min: deltas.delta_min,
        bounds,
        hypotheses: h,
        linked_to_previous: false,
    })
}

/// Linking test between box `k` and the accuracy ball of box `k+1`.
///
/// `alpha_k` and `correction` describe the next anchor in the coordinates
/// of box `k`: `z_{k+1} = z_k + α_k t_k + correction` with the correction
/// orthogonal to `t_k`. The zero near `z_{k+1}` lies within `δ = δ_{k+1,min}`
/// in the max norm; its orthogonal decomposition moves `α` by at most
/// `√n·δ/‖t‖₂` and the correction by at most `(1 + √n)·δ`, where
/// `n = 1 + d`. Both strict inequalities are checked in interval arithmetic.
pub fn check_link(prev: &BranchBox, alpha_k: Interval, correction: &[Interval], next_delta_min: f64) -> bool {
    let iv = Interval::point;
    let n = iv(prev.direction.len() as f64).sqrt();
    let t2: Interval = prev.direction.iter().map(|&x| iv(x).sqr()).sum::<Interval>().sqrt();
    let dm = iv(next_delta_min);
    let first = alpha_k.abs() + n * dm / t2;
    let second = norm_inf(correction) + (Interval::ONE + n) * dm;
    first.hi() < prev.delta_alpha && second.hi() < prev.delta_u
}

/// Decomposes `next.base − prev.base` as `α t + w` with `w ⊥ t`.
pub fn link_coordinates(prev: &BranchBox, next_base: &[f64]) -> (Interval, Vec<Interval>) {
    let iv = Interval::point;
    let diff: Vec<Interval> = next_base.iter().zip(&prev.base).map(|(&a, &b)| iv(a) - iv(b)).collect();
    let t: Vec<Interval> = prev.direction.iter().map(|&x| iv(x)).collect();
    let tt: Interval = t.iter().map(|x| x.sqr()).sum();
    let dt: Interval = diff.iter().zip(&t).map(|(&a, &b)| a * b).sum();
    let alpha = dt / tt;
    let w = diff.iter().zip(&t).map(|(&a, &b)| a - alpha * b).collect();
    (alpha, w)
}

/// Links `next` to `prev` using the actual anchors.
pub fn boxes_link(prev: &BranchBox, next: &BranchBox) -> bool {
    let (alpha, w) = link_coordinates(prev, &next.base);
    check_link(prev, alpha, &w, next.delta_min)
}

/// Driver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationConfig {
    /// Maximum number of boxes.
    pub max_steps: usize,
    /// `α_k = alpha_frac · δ_{k,α}`.
    pub alpha_frac: f64,
    /// Starting box radius `d_u = d_λ`.
    pub initial_radius: f64,
    pub min_radius: f64,
    pub max_radius: f64,
    /// Stop once the parameter crosses this value...
    pub target_param: Option<f64>,
    /// ...after at least this many folds.
    pub folds_before_target: usize,
    /// Sign of the parameter component of the first tangent.
    pub initial_direction: f64,
    pub corrector_tol: f64,
    pub corrector_max_iter: usize,
    /// Halvings of `α_k` tried when linking or correction fails.
    pub max_retries: usize,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            max_steps: 5000,
            alpha_frac: 0.8,
            initial_radius: 1e-4,
            min_radius: 1e-12,
            max_radius: 1e-1,
            target_param: None,
            folds_before_target: 0,
            initial_direction: 1.0,
            corrector_tol: 1e-14,
            corrector_max_iter: 25,
            max_retries: 8,
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    MaxSteps,
    TargetReached,
    Failed { step: usize, reason: String },
}

/// Chain of linked boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRun {
    pub boxes: Vec<BranchBox>,
    pub termination: Termination,
    pub folds: usize,
    /// Newton iterations used by each accepted corrector step.
    pub corrector_iterations: Vec<usize>,
}

/// Validates with radius `r`, halving it on failure down to `min`.
fn validate_adaptive<P: BranchProblem + ?Sized>(
    problem: &P,
    anchor: &[f64],
    direction: &[f64],
    mut r: f64,
    min: f64,
) -> Result<(BranchBox, f64), ContinuationError> {
    loop {
        match validate_segment(problem, anchor, direction, r, r) {
            Ok(b) => return Ok((b, r)),
            Err(e) => {
                r *= 0.5;
                if r < min {
                    return Err(e);
                }
            }
        }
    }
}

/// Validated continuation from an approximate branch point `start`.
///
/// The start is first corrected at fixed parameter. Each step predicts with
/// `α_k = alpha_frac·δ_α`, corrects with Newton on `G(α_k, ·)`, validates the
/// new box and links it to the previous one; `α_k` is halved on failure.
/// Errors only when the first box cannot be validated; later failures end
/// the run with [`Termination::Failed`].
pub fn continue_branch<P: BranchProblem + ?Sized>(
    problem: &P,
    start: &[f64],
    config: &ContinuationConfig,
) -> Result<BranchRun, ContinuationError> {
    let n = problem.dim() + 1;
    let mut e0 = vec![0.0; n];
    e0[0] = 1.0;
    let c = newton_correct(problem, start, &e0, 0.0, config.corrector_tol, config.corrector_max_iter)?;
    let anchor: Vec<f64> = start.iter().zip(&c.delta).map(|(a, b)| a + b).collect();
    let mut dir = tangent_estimate(problem, &anchor, None)?;
    if dir[0] * config.initial_direction < 0.0 {
        dir.iter_mut().for_each(|x| *x = -*x);
    }
    let (first, mut radius) = validate_adaptive(problem, &anchor, &dir, config.initial_radius, config.min_radius)?;
    if first.box_usage() > 0.99 {
        radius = (2.0 * radius).min(config.max_radius);
    }
    let mut boxes = vec![first];
    let mut iterations = Vec::new();
    let mut folds = 0;
    let mut termination = Termination::MaxSteps;

    'steps: while boxes.len() < config.max_steps {
        let step = boxes.len();
        let prev = boxes.last().expect("nonempty").clone();
        let mut alpha = config.alpha_frac * prev.delta_alpha;
        let mut last_err = String::new();
        for _ in 0..=config.max_retries {
            let attempt = (|| -> Result<(BranchBox, f64, usize), ContinuationError> {
                let c = newton_correct(problem, &prev.base, &prev.direction, alpha, config.corrector_tol, config.corrector_max_iter)?;
                let next: Vec<f64> = (0..n).map(|i| prev.base[i] + alpha * prev.direction[i] + c.delta[i]).collect();
                let t = tangent_estimate(problem, &next, Some(&prev.direction))?;
                let (mut b, r) = validate_adaptive(problem, &next, &t, radius, config.min_radius)?;
                if !boxes_link(&prev, &b) {
                    return Err(ContinuationError::LinkFailed { step: step - 1, next: step });
                }
                b.linked_to_previous = true;
                Ok((b, r, c.iterations))
            })();
            match attempt {
                Ok((b, r, its)) => {
                    radius = if b.box_usage() > 0.99 { (2.0 * r).min(config.max_radius) } else { r };
                    if b.direction[0] * prev.direction[0] < 0.0 {
                        folds += 1;
                    }
                    boxes.last_mut().expect("nonempty").alpha_step = alpha;
                    let crossed = config.target_param.is_some_and(|tp| (prev.base[0] - tp) * (b.base[0] - tp) <= 0.0);
                    boxes.push(b);
                    iterations.push(its);
                    if crossed && folds >= config.folds_before_target {
                        termination = Termination::TargetReached;
                        break 'steps;
                    }
                    continue 'steps;
                }
                Err(e) => {
                    last_err = e.to_string();
                    alpha *= 0.5;
                }
            }
        }
        termination = Termination::Failed { step, reason: last_err };
        break;
    }
    Ok(BranchRun { boxes, termination, folds, corrector_iterations: iterations })
}

/// Non-rigorous stability class of a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    /// Number of eigenvalues outside the unit circle.
    Unstable(usize),
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stability::Stable => write!(f, "stable"),
            Stability::Unstable(k) => write!(f, "unstable({k})"),
        }
    }
}

/// Counts floating-point eigenvalues of `D_xf(λ, x)` with modulus above 1.
pub fn classify_stability(model: &CoralModel, lambda: f64, x: &[f64]) -> Stability {
    let j = model.view::<f64>().jacobian_x(lambda, x);
    // the default QR iteration may not terminate on nilpotent-like matrices
    let index = match nalgebra::linalg::Schur::try_new(j.clone(), f64::EPSILON, 10_000) {
        Some(s) => s.complex_eigenvalues().iter().filter(|z| z.norm() > 1.0).count(),
        None => power_count(&j),
    };
    if index == 0 {
        Stability::Stable
    } else {
        Stability::Unstable(index)
    }
}

/// Fallback when Schur fails: 0 or 1 from a power-iteration spectral radius.
fn power_count(j: &DMatrix<f64>) -> usize {
    let mut p = j.clone();
    let mut log_scale = 0.0;
    for _ in 0..10 {
        p = &p * &p;
        let n = p.amax();
        if n == 0.0 {
            return 0;
        }
        log_scale = 2.0 * log_scale + n.ln();
        p /= n;
    }
    usize::from(log_scale / 1024.0 > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Line;
    impl BranchProblem for Line {
        fn dim(&self) -> usize {
            1
        }
        fn residual<T: Scalar>(&self, p: T, u: &[T]) -> Vec<T> {
            vec![u[0] - p]
        }
    }

    #[test]
    fn tangent_of_line() {
        let t = tangent_estimate(&Line, &[0.3, 0.3], None).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-15 && (t[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn link_strictness() {
        let b = validate_segment(&Line, &[0.0, 0.0], &[1.0, 1.0], 1e-2, 1e-2).unwrap();
        let w = [Interval::ZERO, Interval::ZERO];
        assert!(check_link(&b, Interval::point(0.5 * b.delta_alpha), &w, 0.0));
        assert!(!check_link(&b, Interval::point(b.delta_alpha), &w, 0.0));
    }
}
