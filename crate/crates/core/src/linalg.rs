//! Small dense helpers: generic Gaussian elimination, Newton's method, and
//! complex interval matrices.

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::Zero;

use crate::cift::verified_solve;
use crate::error::CiftError;
use crate::interval::{IMatrix, Interval};
use crate::scalar::Scalar;
use crate::system::{jacobian, SquareSystem};

pub type CInterval = Complex<Interval>;
pub type CIMatrix = DMatrix<CInterval>;

/// Solves `A x = b` by Gaussian elimination with partial pivoting on the
/// float approximation of the entries.
pub fn solve_dense<T: Scalar>(a: &DMatrix<T>, b: &[T]) -> Option<Vec<T>> {
    let n = a.nrows();
    let mut m: Vec<Vec<T>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i][col].approx().abs().partial_cmp(&m[j][col].approx().abs()).unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[piv][col].approx() == 0.0 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let p = m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / p;
            if f.approx() == 0.0 {
                continue;
            }
            for c in col..n {
                let v = m[col][c];
                m[r][c] -= f * v;
            }
            let v = rhs[col];
            rhs[r] -= f * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for c in r + 1..n {
            s -= m[r][c] * x[c];
        }
        x[r] = s / m[r][r];
    }
    Some(x)
}

/// Newton's method in scalar type `T`; stops when the update is below
/// `tol` relative to `max(1, ‖z‖_∞)`.
pub fn newton<S: SquareSystem + ?Sized, T: Scalar>(
    sys: &S,
    z0: &[T],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<T>, f64> {
    let mut z = z0.to_vec();
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let h = sys.eval(&z);
        let j = jacobian(sys, &z);
        let Some(dz) = solve_dense(&j, &h) else { return Err(last) };
        let scale = z.iter().fold(1.0f64, |m, v| m.max(v.approx().abs()));
        let step = dz.iter().fold(0.0f64, |m, v| m.max(v.approx().abs()));
        for (zi, d) in z.iter_mut().zip(&dz) {
            *zi -= *d;
        }
        if !step.is_finite() {
            return Err(f64::INFINITY);
        }
        last = step;
        if step <= tol * scale {
            return Ok(z);
        }
    }
    Err(last)
}

pub fn cabs(z: CInterval) -> Interval {
    (z.re.sqr() + z.im.sqr()).sqrt()
}

pub fn cpoint(z: Complex<f64>) -> CInterval {
    Complex::new(Interval::point(z.re), Interval::point(z.im))
}

pub fn creal(x: Interval) -> CInterval {
    Complex::new(x, Interval::ZERO)
}

pub fn cmat_mul(a: &CIMatrix, b: &CIMatrix) -> CIMatrix {
    assert_eq!(a.ncols(), b.nrows());
    let mut c = CIMatrix::from_element(a.nrows(), b.ncols(), CInterval::zero());
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let aik = a[(i, k)];
            if aik.re.is_zero() && aik.im.is_zero() {
                continue;
            }
            for j in 0..b.ncols() {
                c[(i, j)] = c[(i, j)] + aik * b[(k, j)];
            }
        }
    }
    c
}

pub fn to_complex(a: &IMatrix) -> CIMatrix {
    a.map(creal)
}

/// Encloses the solutions of a complex interval system by solving its real
/// form `[[Re, −Im], [Im, Re]]`.
pub fn verified_solve_complex(a: &CIMatrix, b: &[CInterval]) -> Result<Vec<CInterval>, CiftError> {
    let n = a.nrows();
    let mut r = IMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            r[(i, j)] = z.re;
            r[(i, j + n)] = -z.im;
            r[(i + n, j)] = z.im;
            r[(i + n, j + n)] = z.re;
        }
    }
    let mut rhs: Vec<Interval> = b.iter().map(|z| z.re).collect();
    rhs.extend(b.iter().map(|z| z.im));
    let x = verified_solve(&r, &rhs)?;
    Ok((0..n).map(|i| Complex::new(x[i], x[i + n])).collect())
}
