use certibif::dynamics::{
    angle_profile, farey_min_denominator, farey_scan, iterate, iterate_plane, parse_rational, plain_rotation_number,
    rotation_number_plane, Rational, Rounding,
};
use certibif::CoralModel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn y_scaled(m: &CoralModel, s: f64) -> Vec<f64> {
    m.state_with_density(1500.0).iter().map(|v| v * s).collect()
}

/// Density after `n` years from `s·y`.
fn final_density(m: &CoralModel, r: f64, s: f64, n: usize) -> f64 {
    let orbit = iterate(m, m.r_to_lambda(r), &y_scaled(m, s), 1, n).unwrap();
    m.view::<f64>().density(&orbit.points[0])
}

/// Largest nontrivial fixed-point density at `r`.
fn upper_density(m: &CoralModel, r: f64) -> f64 {
    let x1 = *m.solve_branch_1d(m.r_to_lambda(r)).last().unwrap();
    m.view::<f64>().density(&m.fixed_point_from_x1(x1))
}

#[test]
fn extinction_below_the_fold() {
    let m = CoralModel::default();
    for s in [0.1, 0.5, 1.0, 2.0, 5.0] {
        assert!(final_density(&m, 8.744, s, 2000) < 1e-6, "s = {s}");
    }
}

#[test]
fn bistability_at_low_reproduction_number() {
    let m = CoralModel::default();
    let p = upper_density(&m, 29.15);
    assert!(final_density(&m, 29.15, 0.1, 3000) < 1e-6);
    for s in [0.25, 0.5, 1.0, 1.5, 2.0] {
        assert!((final_density(&m, 29.15, s, 3000) - p).abs() < 1e-6 * p, "s = {s}");
    }
    // with the fixed age profile the basin boundary sits at the middle fixed point
    let lambda = m.r_to_lambda(29.15);
    let mid = m.view::<f64>().density(&m.fixed_point_from_x1(m.solve_branch_1d(lambda)[1]));
    assert!((mid / 1500.0 - 0.2139).abs() < 1e-3);
}

#[test]
fn slow_convergence_at_intermediate_reproduction_number() {
    let m = CoralModel::default();
    let p = upper_density(&m, 87.44);
    for s in [0.1, 1.0, 2.0] {
        assert!((final_density(&m, 87.44, s, 3000) - p).abs() < 1e-6 * p);
    }
    // still visibly away from it after 100 years
    assert!((final_density(&m, 87.44, 0.1, 100) - p).abs() > 1.0);
}

#[test]
fn oscillation_beyond_neimark_sacker() {
    let m = CoralModel::default();
    let orbit = iterate(&m, m.r_to_lambda(160.31), &y_scaled(&m, 1.5), 2000, 3000).unwrap();
    let c = m.view::<f64>();
    let ds: Vec<f64> = orbit.points.iter().map(|x| c.density(x)).collect();
    let (lo, hi) = ds.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &d| (a.min(d), b.max(d)));
    assert!(hi < 1e4 && lo > 100.0, "[{lo}, {hi}]");
    assert!(hi - lo > 500.0);
    assert_eq!(orbit.transient_skipped, 3000);
}

fn rigid(angle: f64, n: usize, center: [f64; 2], radius: f64) -> Vec<[f64; 2]> {
    (0..n)
        .map(|t| {
            let a = 0.3 + 2.0 * PI * angle * t as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect()
}

#[test]
fn rigid_rotation_oracle() {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let r = rotation_number_plane(&rigid(golden, 10_000, [0.0, 0.0], 1.0), [0.0, 0.0]).unwrap();
    assert!((r.rho - golden).abs() <= 1e-12, "{}", r.rho);
    assert_eq!(r.iterates_used, 10_000);
    assert!(r.convergence_gap < 1e-12);
}

/// Rotation seen from an off-centre point has a non-constant angle increment;
/// the bump weight removes the boundary error of the plain average.
#[test]
fn weighting_beats_plain_average() {
    let omega = (2f64.sqrt() - 1.0) / 4.0;
    let pts = rigid(omega, 10_000, [0.0, 0.0], 1.0);
    let view = [0.4, -0.2];
    let w = rotation_number_plane(&pts, view).unwrap().rho;
    let p = plain_rotation_number(&pts, view).unwrap();
    let (ew, ep) = ((w - omega).abs(), (p - omega).abs());
    assert!(ew <= 1e-12 && ep >= 1e3 * ew.max(1e-16), "weighted {ew:e}, plain {ep:e}");
}

#[test]
fn rotation_errors() {
    assert!(rotation_number_plane(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]).is_err());
    // back-and-forth motion is not a circle map
    let zig: Vec<[f64; 2]> = (0..100).map(|t| if t % 2 == 0 { [1.0, 0.0] } else { [0.0, 1.0] }).collect();
    assert!(rotation_number_plane(&zig, [0.0, 0.0]).is_err());
    assert!(angle_profile(&rigid(0.1, 100, [0.0, 0.0], 1.0), [0.0, 0.0], 0).is_err());
}

#[test]
fn coral_invariant_circle() {
    let m = CoralModel::default();
    let center = [2500.0, 2500.0];
    let pts = iterate_plane(&m, m.r_to_lambda(225.0), &y_scaled(&m, 1.5), 50_000, 10_000).unwrap();
    let r50 = rotation_number_plane(&pts, center).unwrap();
    let r40 = rotation_number_plane(&pts[..40_000], center).unwrap();
    assert!((r50.rho - r40.rho).abs() <= 1e-12);
    assert!(r50.rho > 0.126 && r50.rho < 0.129, "{}", r50.rho);
    let prof = angle_profile(&pts, center, 200).unwrap();
    assert!((prof.min_angle - 0.625).abs() <= 0.05, "{}", prof.min_angle);
    assert!(prof.bins.iter().all(|b| b.mean_increment > 0.0));
}

#[test]
fn farey_example() {
    let lo = parse_rational("0.126", Rounding::Down).unwrap();
    let hi = parse_rational("0.129", Rounding::Up).unwrap();
    assert_eq!(lo, Rational::new(63, 500));
    assert_eq!(farey_min_denominator(lo, hi).unwrap(), (5, 39));
    assert_eq!(farey_scan(lo, hi, 1000), Some((5, 39)));
}

#[test]
fn farey_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(39);
    for _ in 0..100 {
        let a = rng.gen_range(1..100_000i128);
        let b = rng.gen_range(1..100_000i128);
        let d = 100_000;
        let (lo, hi) = (Rational::new(a.min(b), d), Rational::new(a.max(b), d));
        if lo >= hi {
            continue;
        }
        assert_eq!(Some(farey_min_denominator(lo, hi).unwrap()), farey_scan(lo, hi, d), "[{lo}, {hi}]");
    }
}

#[test]
fn rational_parsing_rounds_outward() {
    assert_eq!(parse_rational("5/39", Rounding::Down).unwrap(), Rational::new(5, 39));
    assert_eq!(parse_rational("0.01", Rounding::Up).unwrap(), Rational::new(1, 100));
    let long = "0.1234567890123456789012345678901234567";
    let (d, u) = (parse_rational(long, Rounding::Down).unwrap(), parse_rational(long, Rounding::Up).unwrap());
    assert!(d < u);
    assert!(parse_rational("abc", Rounding::Down).is_err());
    assert!(farey_min_denominator(Rational::new(1, 2), Rational::new(1, 3)).is_err());
    assert!(farey_min_denominator(Rational::new(0, 1), Rational::new(1, 3)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn farey_result_is_inside_and_minimal(a in 1i128..5000, w in 1i128..500) {
        let d = 5001 + 500;
        let (lo, hi) = (Rational::new(a, d), Rational::new(a + w, d));
        let (p, q) = farey_min_denominator(lo, hi).unwrap();
        let f = Rational::new(p, q);
        prop_assert!(lo <= f && f <= hi);
        prop_assert_eq!(Some((p, q)), farey_scan(lo, hi, q));
    }

    #[test]
    fn orbits_stay_nonnegative(s in 0.05f64..3.0, r in 5.0f64..300.0) {
        let m = CoralModel::default();
        let orbit = iterate(&m, m.r_to_lambda(r), &y_scaled(&m, s), 50, 0).unwrap();
        prop_assert!(orbit.points.iter().flatten().all(|v| *v >= 0.0 && v.is_finite()));
    }
}
