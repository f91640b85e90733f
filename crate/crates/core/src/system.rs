//! Square systems `H: Rⁿ → Rⁿ` and their derivatives by forward-mode AD.

use nalgebra::DMatrix;

use crate::interval::{IMatrix, Interval};
use crate::scalar::{Dual, Scalar};

/// A map from `Rⁿ` to itself that can be evaluated in any [`Scalar`].
pub trait SquareSystem: Sync {
    fn dim(&self) -> usize;
    fn eval<T: Scalar>(&self, z: &[T]) -> Vec<T>;

    fn name(&self) -> String {
        "system".to_string()
    }
}

/// Jacobian `DH(z)` in scalar type `T`, one dual evaluation per column.
pub fn jacobian<S: SquareSystem + ?Sized, T: Scalar>(sys: &S, z: &[T]) -> DMatrix<T> {
    let n = sys.dim();
    let mut j = DMatrix::from_element(n, n, T::zero());
    let mut zd: Vec<Dual<T>> = z.iter().map(|&x| Dual::constant(x)).collect();
    for c in 0..n {
        zd[c].du = T::one();
        let h = sys.eval(&zd);
        zd[c].du = T::zero();
        for (r, v) in h.iter().enumerate() {
            j[(r, c)] = v.du;
        }
    }
    j
}

/// Interval enclosures of all second derivatives of `sys` over the box `z`.
///
/// Entry `i` is the symmetric matrix `∂²H_i/∂z_j∂z_k`; rows whose Hessian is
/// identically zero on the box are returned as `None`.
pub fn hessians<S: SquareSystem + ?Sized>(sys: &S, z: &[Interval]) -> Vec<Option<IMatrix>> {
    hessians_of(z, |zd| sys.eval(zd))
}

/// Second-derivative enclosures of an arbitrary map `Rⁿ → Rᵐ` given as a
/// closure over second-order dual numbers.
pub fn hessians_of<F>(z: &[Interval], f: F) -> Vec<Option<IMatrix>>
where
    F: Fn(&[Dual<Dual<Interval>>]) -> Vec<Dual<Dual<Interval>>>,
{
    let n = z.len();
    let mut out: Vec<IMatrix> = Vec::new();
    let mut zd: Vec<Dual<Dual<Interval>>> =
        z.iter().map(|&x| Dual::constant(Dual::constant(x))).collect();
    for j in 0..n {
        zd[j].re.du = Interval::ONE;
        for k in j..n {
            zd[k].du.re = Interval::ONE;
            let h = f(&zd);
            zd[k].du.re = Interval::ZERO;
            if out.is_empty() {
                out = vec![IMatrix::zeros(n, n); h.len()];
            }
            for (i, v) in h.iter().enumerate() {
                let d2 = v.du.du;
                out[i][(j, k)] = d2;
                out[i][(k, j)] = d2;
            }
        }
        zd[j].re.du = Interval::ZERO;
    }
    out.into_iter()
        .map(|m| if m.iter().all(|x| x.lo() == 0.0 && x.hi() == 0.0) { None } else { Some(m) })
        .collect()
}

/// Elementwise absolute-value bound of `Σ_l M_il ∂²H_l` for a point matrix `M`.
pub fn precondition_hessians(m: &DMatrix<f64>, hess: &[Option<IMatrix>]) -> Vec<Option<IMatrix>> {
    let n = hess.len();
    (0..m.nrows())
        .map(|i| {
            let mut acc: Option<IMatrix> = None;
            for l in 0..n {
                let (Some(h), coeff) = (&hess[l], m[(i, l)]) else { continue };
                if coeff == 0.0 {
                    continue;
                }
                let c = Interval::point(coeff);
                let term = h.map(|x| c * x);
                acc = Some(match acc {
                    None => term,
                    Some(a) => a.zip_map(&term, |x, y| x + y),
                });
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;
    impl SquareSystem for Quadratic {
        fn dim(&self) -> usize {
            2
        }
        fn eval<T: Scalar>(&self, z: &[T]) -> Vec<T> {
            vec![z[0] * z[0] * z[1], z[0] - z[1]]
        }
    }

    #[test]
    fn jacobian_and_hessian() {
        let j = jacobian(&Quadratic, &[2.0, 3.0]);
        assert_eq!(j[(0, 0)], 12.0);
        assert_eq!(j[(0, 1)], 4.0);
        assert_eq!(j[(1, 1)], -1.0);
        let h = hessians(&Quadratic, &[Interval::point(2.0), Interval::point(3.0)]);
        let h0 = h[0].as_ref().unwrap();
        assert_eq!(h0[(0, 0)], Interval::point(6.0));
        assert_eq!(h0[(0, 1)], Interval::point(4.0));
        assert_eq!(h0[(1, 1)], Interval::ZERO);
        assert!(h[1].is_none());
    }
}
