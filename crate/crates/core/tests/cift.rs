use certibif::cift::{
    deltas_feasible, inverse_bound, lipschitz_l1, lipschitz_l1_rowsum, solve_deltas, validate_zero, verified_solve,
    CiftBounds, SlantConstraint, ValidationOptions,
};
use certibif::interval::IMatrix;
use certibif::refine::{check_certificate, refine};
use certibif::scalar::Scalar;
use certibif::system::{hessians, SquareSystem};
use certibif::{Interval, Quad};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gauss–Jordan inverse in double-double with partial pivoting.
fn quad_inverse(a: &DMatrix<f64>) -> Vec<Vec<Quad>> {
    let n = a.nrows();
    let mut m: Vec<Vec<Quad>> = (0..n)
        .map(|i| (0..2 * n).map(|j| if j < n { Quad::from(a[(i, j)]) } else if j - n == i { Quad::ONE } else { Quad::ZERO }).collect())
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| PartialOrd::partial_cmp(&m[i][c].abs(), &m[j][c].abs()).unwrap()).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        for j in 0..2 * n {
            m[c][j] = m[c][j] / piv;
        }
        for i in 0..n {
            if i != c {
                let f = m[i][c];
                for j in 0..2 * n {
                    let v = m[c][j];
                    m[i][j] -= f * v;
                }
            }
        }
    }
    m.into_iter().map(|row| row[n..].to_vec()).collect()
}

fn quad_norm_inf(m: &[Vec<Quad>]) -> f64 {
    m.iter().map(|r| r.iter().fold(Quad::ZERO, |s, &x| s + x.abs())).map(|q| q.0 + q.1).fold(0.0, f64::max)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| rng.gen_range(-1.0..1.0) + if i == j { 3.0 } else { 0.0 })
}

#[test]
fn inverse_bound_42_by_42_against_quad_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..3 {
        let a = random_matrix(&mut rng, 42);
        let b = a.clone().try_inverse().unwrap();
        let ib = inverse_bound(&a.map(Interval::point), &b).unwrap();
        let exact = quad_norm_inf(&quad_inverse(&a));
        assert!(ib.k >= exact, "K {} below ‖A⁻¹‖ {}", ib.k, exact);
        assert!(ib.k <= exact * 1.01 + ib.err * 2.0, "K {} far above {}", ib.k, exact);
        assert!(ib.rho1 < 1e-12);
        let bq: f64 = (0..42).map(|i| (0..42).map(|j| b[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max);
        assert!((ib.rho2 - bq).abs() <= 1e-12 * bq);
    }
}

#[test]
fn inverse_bound_covers_interval_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = random_matrix(&mut rng, 12);
    let ai = a.map(|x| Interval::centered(x, 1e-3));
    let ib = inverse_bound(&ai, &a.clone().try_inverse().unwrap()).unwrap();
    for _ in 0..20 {
        let pert = a.map(|x| x + rng.gen_range(-1e-3..1e-3));
        assert!(quad_norm_inf(&quad_inverse(&pert)) <= ib.k);
    }
    let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
    assert!(inverse_bound(&singular.map(Interval::point), &DMatrix::identity(2, 2)).is_err());
}

#[test]
fn verified_solve_encloses_quad_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for n in [2, 5, 20] {
        let a = random_matrix(&mut rng, n);
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let x = verified_solve(&a.map(Interval::point), &rhs.iter().map(|&v| Interval::point(v)).collect::<Vec<_>>()).unwrap();
        let inv = quad_inverse(&a);
        for i in 0..n {
            let xi = (0..n).fold(Quad::ZERO, |s, j| s + inv[i][j] * Quad::from(rhs[j]));
            assert!(Quad::from(x[i].lo()) <= xi && xi <= Quad::from(x[i].hi()));
        }
    }
}

/// `(x² + y² − 4, x − y e^{y−√2} )`; zero at `(√2, √2)`.
struct Circle {
    row_scale: f64,
}

impl SquareSystem for Circle {
    fn dim(&self) -> usize {
        2
    }
    fn eval<T: Scalar>(&self, z: &[T]) -> Vec<T> {
        let (x, y) = (z[0], z[1]);
        let s2 = T::from_f64(2.0).sqrt();
        vec![
            (x * x + y * y - T::from_f64(4.0)) * T::from_f64(self.row_scale),
            x - y * (y - s2).exp(),
        ]
    }
}

#[test]
fn validate_zero_is_sound_and_unique() {
    let s = 2f64.sqrt();
    for (scale, pre) in [(1.0, true), (1.0, false), (1e6, true), (1e6, false)] {
        let sys = Circle { row_scale: scale };
        for offset in [0.0, 1e-10, 1e-8] {
            let anchor = [s + offset, s - offset];
            let opts = ValidationOptions { ell: 1e-4, precondition: pre, ..ValidationOptions::default() };
            let cert = validate_zero(&sys, &anchor, &opts).unwrap();
            assert!(cert.delta_accuracy <= cert.delta_uniqueness);
            let r = check_certificate(&sys, &cert).unwrap();
            assert!(r.inside, "scale {scale} pre {pre}: {r:?}");
            assert!(cert.delta_accuracy >= r.distance);
            // uniqueness: Quad Newton from any start in the uniqueness ball returns the same zero
            let z = refine(&sys, &[s + 0.9 * cert.delta_uniqueness, s - 0.9 * cert.delta_uniqueness]).unwrap();
            let dev = (z[0] - Quad::from(s)).abs();
            assert!(dev.0 < 1e-15);
        }
    }
}

#[test]
fn validate_zero_rejects_singular_points() {
    struct Fold;
    impl SquareSystem for Fold {
        fn dim(&self) -> usize {
            1
        }
        fn eval<T: Scalar>(&self, z: &[T]) -> Vec<T> {
            vec![z[0] * z[0]]
        }
    }
    assert!(validate_zero(&Fold, &[0.0], &ValidationOptions::default()).is_err());
    assert!(validate_zero(&Fold, &[1e-3], &ValidationOptions::default()).is_err());
}

#[test]
fn lipschitz_bounds_dominate_sampled_second_derivatives() {
    let sys = Circle { row_scale: 3.0 };
    let zb = [Interval::new(1.0, 1.5), Interval::new(1.2, 1.6)];
    let h = hessians(&sys, &zb);
    let (l1, l1r) = (lipschitz_l1(&h), lipschitz_l1_rowsum(&h));
    assert!(l1r <= l1);
    // row 1: Hessian 2·3·I; row 2: −(2 + y − √2)e^{y−√2} in the (y, y) slot
    assert!(l1r >= 6.0 + 6.0);
    let worst = (2.0 + 1.6 - 2f64.sqrt()) * (1.6 - 2f64.sqrt()).exp();
    assert!(l1r >= worst);
    assert!(h.iter().all(|m| m.as_ref().map_or(true, |m: &IMatrix| m.nrows() == 2)));
}

fn bounds_strategy() -> impl Strategy<Value = CiftBounds> {
    (1e-16f64..1e-6, 0.5f64..100.0, 0.0f64..1e4, 0.0f64..10.0, 0.0f64..10.0, 0.0f64..100.0, 1e-6f64..1e-1, 0.0f64..1e-1)
        .prop_map(|(rho, k, l1, l2, l3, l4, ell_x, ell_alpha)| CiftBounds { rho, k, l1, l2, l3, l4, ell_x, ell_alpha })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn solved_deltas_are_feasible(b in bounds_strategy(), slanted in any::<bool>(), tn in 0.5f64..2.0) {
        let slant = slanted.then_some(SlantConstraint { tangent_norm: tn, radius: b.ell_x });
        if let Ok(d) = solve_deltas(&b, slant) {
            prop_assert!(deltas_feasible(&b, d.delta_alpha, d.delta_x, slant));
            prop_assert!(d.delta_min <= d.delta_x);
            prop_assert!(d.delta_min >= 2.0 * b.k * b.rho * (1.0 - 1e-15));
            // δ_α is near-maximal: 1% more breaks a float version of the inequalities
            let da = d.delta_alpha * 1.01;
            if d.delta_alpha > 0.0 && da <= b.ell_alpha {
                let ok = (0..=2000).any(|i| deltas_feasible(&b, da, b.ell_x * i as f64 / 2000.0, slant));
                prop_assert!(!ok || d.delta_alpha >= 0.95 * b.ell_alpha);
            }
        } else {
            // failure only when the fixed-α problem is infeasible
            let q = 4.0 * b.k * b.k * b.rho * b.l1;
            let fits = 2.0 * b.k * b.rho < b.ell_x;
            prop_assert!(q >= 1.0 * (1.0 - 1e-12) || !fits || (0..=2000).all(|i| !deltas_feasible(&b, 0.0, b.ell_x * i as f64 / 2000.0, slant)));
        }
    }
}
