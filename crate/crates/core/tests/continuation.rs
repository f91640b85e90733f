use certibif::continuation::{
    boxes_link, continue_branch, derive_extended_constants, full_jacobian, newton_correct, segment_hypotheses, tangent_estimate,
    BranchProblem, BranchRun, ContinuationConfig, CoralBranch, ExtendedG, SegmentHypotheses, Termination,
};
use certibif::refine::refine;
use certibif::scalar::Scalar;
use certibif::system::hessians_of;
use certibif::{CoralModel, Interval, Quad};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `F(λ, u) = u − λ`.
struct Line;

impl BranchProblem for Line {
    fn dim(&self) -> usize {
        1
    }
    fn residual<T: Scalar>(&self, p: T, u: &[T]) -> Vec<T> {
        vec![u[0] - p]
    }
}

/// `F(λ, u) = u² − λ`, a fold at the origin.
struct Parabola;

impl BranchProblem for Parabola {
    fn dim(&self) -> usize {
        1
    }
    fn residual<T: Scalar>(&self, p: T, u: &[T]) -> Vec<T> {
        vec![u[0] * u[0] - p]
    }
}

/// Two uncoupled components with a fold in the first: `(u² + v·0.1 − λ, v − λ)`.
struct Coupled;

impl BranchProblem for Coupled {
    fn dim(&self) -> usize {
        2
    }
    fn residual<T: Scalar>(&self, p: T, u: &[T]) -> Vec<T> {
        vec![u[0] * u[0] + u[1] * T::from_f64(0.1) - p, u[1] - p]
    }
}

fn all_linked(run: &BranchRun) -> bool {
    run.boxes.iter().skip(1).all(|b| b.linked_to_previous) && run.boxes.windows(2).all(|w| boxes_link(&w[0], &w[1]))
}

#[test]
fn line_branch() {
    let cfg = ContinuationConfig { max_steps: 50, ..ContinuationConfig::default() };
    let run = continue_branch(&Line, &[0.0, 1e-9], &cfg).unwrap();
    assert_eq!(run.boxes.len(), 50);
    assert_eq!(run.termination, Termination::MaxSteps);
    assert!(all_linked(&run));
    for b in &run.boxes {
        assert!((b.base[0] - b.base[1]).abs() <= 1e-15 * (1.0 + b.base[0].abs()));
        assert!((b.direction[0] - 1.0).abs() < 1e-12 && (b.direction[1] - 1.0).abs() < 1e-12);
        assert_eq!(b.bounds.l1, 0.0);
        assert!(b.delta_min <= 1e-14);
    }
    // linear problems let the radius grow until the cap
    assert!(run.boxes.last().unwrap().hypotheses.d_u >= 0.05);
}

#[test]
fn parabola_fold_is_passed() {
    let cfg = ContinuationConfig {
        max_steps: 5000,
        target_param: Some(0.25),
        folds_before_target: 1,
        initial_direction: -1.0,
        max_radius: 1e-2,
        ..ContinuationConfig::default()
    };
    let run = continue_branch(&Parabola, &[1.0, 1.0], &cfg).unwrap();
    assert_eq!(run.termination, Termination::TargetReached);
    assert_eq!(run.folds, 1);
    assert!(all_linked(&run));
    let last = run.boxes.last().unwrap();
    assert!((last.base[1] + 0.5).abs() < 0.05, "{:?}", last.base);
    let min_lambda = run.boxes.iter().map(|b| b.base[0]).fold(f64::INFINITY, f64::min);
    assert!(min_lambda.abs() < 1e-3);
    // consecutive tangents keep their orientation through the fold
    for w in run.boxes.windows(2) {
        let ip: f64 = w[0].direction.iter().zip(&w[1].direction).map(|(a, b)| a * b).sum();
        assert!(ip > 0.0);
    }
}

#[test]
fn derived_constants_formula() {
    let h = SegmentHypotheses { rho: 1e-15, xi: 1e-9, k: 3.0, m1: 1.0, m2: 2.0, m3: 3.0, m4: 4.0, d_u: 0.2, d_lambda: 0.1 };
    let b = derive_extended_constants(&h, &[0.5, 1.0, -0.25]);
    // ‖v‖ = 1, |μ| = 0.5
    assert_eq!(b.l1, 6.0);
    assert_eq!(b.l2, 4.0 * 1.0 + 6.0 * 0.5);
    assert_eq!(b.l4, (1.0 + 2.0 * 0.5) + (3.0 + 4.0 * 0.5) * 0.5);
    assert_eq!(b.l3, 1e-9);
    assert_eq!((b.rho, b.k), (1e-15, 3.0));
    assert_eq!(b.ell_x, 0.1);
    assert!(b.ell_alpha <= 0.1 && b.ell_alpha > 0.1 * (1.0 - 1e-15));
    let b2 = derive_extended_constants(&h, &[-1.0, 0.5, 0.0]);
    assert_eq!(b2.l2, 4.0 * 0.5 + 6.0);
}

#[test]
fn corrector_is_orthogonal_to_tangent() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let lam: f64 = rng.gen_range(0.5..4.0);
        let z = [lam, lam.sqrt(), lam];
        let t = tangent_estimate(&Coupled, &z, None).unwrap();
        let alpha = rng.gen_range(-0.05..0.05);
        let c = newton_correct(&Coupled, &z, &t, alpha, 1e-14, 25).unwrap();
        let ip: f64 = t.iter().zip(&c.delta).map(|(a, b)| a * b).sum();
        assert!(ip.abs() < 1e-14, "tᵀw = {ip}");
        let zn: Vec<f64> = (0..3).map(|i| z[i] + alpha * t[i] + c.delta[i]).collect();
        let f = Coupled.residual(zn[0], &zn[1..]);
        assert!(f.iter().all(|v| v.abs() < 1e-13));
        // the tangent spans the null space of the Jacobian
        let j = full_jacobian::<_, f64>(&Coupled, &z);
        let jt = &j * nalgebra::DVector::from_vec(t.clone());
        assert!(jt.amax() < 1e-13);
        assert_eq!(t.iter().fold(0.0f64, |m, x| m.max(x.abs())), 1.0);
    }
}

fn coral_run(steps: usize) -> (CoralBranch, BranchRun) {
    let br = CoralBranch::preconditioned(CoralModel::default(), 300.0).unwrap();
    let start = br.start_point(300.0).unwrap();
    let cfg = ContinuationConfig { max_steps: steps, initial_direction: -1.0, ..ContinuationConfig::default() };
    let run = continue_branch(&br, &start, &cfg).unwrap();
    (br, run)
}

#[test]
fn coral_boxes_are_sound_under_quad_newton() {
    let (br, run) = coral_run(120);
    assert_eq!(run.boxes.len(), 120);
    assert!(all_linked(&run));
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for b in run.boxes.iter().step_by(7) {
        assert!(b.delta_min <= 1e-10);
        for _ in 0..3 {
            let alpha = rng.gen_range(-1.0..1.0) * b.delta_alpha;
            let c = newton_correct(&br, &b.base, &b.direction, alpha, 1e-14, 25).unwrap();
            let g = ExtendedG::new(&br, &b.base, &b.direction);
            let w = refine(&g.at(alpha), &c.delta).unwrap();
            let norm = w.iter().map(|q| (q.0 + q.1).abs()).fold(0.0, f64::max);
            assert!(norm <= b.delta_u, "‖w‖ = {norm} exceeds δ_u = {}", b.delta_u);
        }
        let w0 = refine(&ExtendedG::new(&br, &b.base, &b.direction).at(0.0), &vec![0.0; b.base.len()]).unwrap();
        let n0 = w0.iter().map(|q| (q.0 + q.1).abs()).fold(0.0, f64::max);
        assert!(n0 <= b.delta_min, "anchor offset {n0} vs δ_min {}", b.delta_min);
    }
}

#[test]
fn derived_lipschitz_constant_matches_brute_force() {
    let (br, run) = coral_run(30);
    for b in &run.boxes {
        let h = &b.hypotheses;
        let zb: Vec<Interval> = b
            .base
            .iter()
            .enumerate()
            .map(|(i, &z)| Interval::centered(z, if i == 0 { h.d_lambda } else { h.d_u }))
            .collect();
        let hess = hessians_of(&zb, |zd| br.residual(zd[0], &zd[1..]));
        let brute = hess.iter().flatten().map(|m| m.iter().map(|x| x.mag()).sum::<f64>()).fold(0.0, f64::max);
        assert!(b.bounds.l1 >= 0.5 * brute && b.bounds.l1 <= brute * (1.0 + 1e-12), "L1 {} vs {brute}", b.bounds.l1);
        // K bounds the true inverse of DG(0,0)
        let j = full_jacobian::<_, f64>(&br, &b.base);
        let n = b.base.len();
        let mut dg = nalgebra::DMatrix::zeros(n, n);
        for c in 0..n {
            dg[(0, c)] = b.direction[c];
            for r in 0..n - 1 {
                dg[(r + 1, c)] = j[(r, c)];
            }
        }
        let inv = dg.try_inverse().unwrap();
        let norm = (0..n).map(|r| inv.row(r).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
        assert!(b.bounds.k >= norm * (1.0 - 1e-9) && b.bounds.k <= 2.0 * norm);
    }
}

#[test]
fn hypotheses_bound_residual_and_tangent_defect() {
    let (br, run) = coral_run(20);
    for b in &run.boxes {
        let h = segment_hypotheses(&br, &b.base, &b.direction, b.hypotheses.d_u, b.hypotheses.d_lambda).unwrap();
        assert_eq!(&h, &b.hypotheses);
        let zq: Vec<Quad> = b.base.iter().map(|&x| Quad::from(x)).collect();
        let f = br.residual(zq[0], &zq[1..]);
        let rho = f.iter().map(|q| (q.0 + q.1).abs()).fold(0.0, f64::max);
        assert!(rho <= h.rho);
        assert!(h.m3 == h.m2);
    }
}

#[test]
fn preconditioning_enlarges_boxes() {
    let model = CoralModel::default();
    let cfg = ContinuationConfig { max_steps: 21, initial_direction: -1.0, ..ContinuationConfig::default() };
    let pre = CoralBranch::preconditioned(model.clone(), 300.0).unwrap();
    let raw = CoralBranch::unpreconditioned(model);
    let rp = continue_branch(&pre, &pre.start_point(300.0).unwrap(), &cfg).unwrap();
    let rr = continue_branch(&raw, &raw.start_point(300.0).unwrap(), &cfg).unwrap();
    let extent = |br: &CoralBranch, b: &certibif::continuation::BranchBox| {
        b.delta_alpha * b.direction[0].abs() * br.preconditioner().r_scale
    };
    for k in 0..20 {
        let (p, r) = (extent(&pre, &rp.boxes[k]), extent(&raw, &rr.boxes[k]));
        assert!(p >= 10.0 * r, "step {k}: {p} vs {r}");
    }
}

#[test]
fn branch_run_round_trips_through_json() {
    let (_, run) = coral_run(5);
    let text = serde_json::to_string(&run).unwrap();
    let back: BranchRun = serde_json::from_str(&text).unwrap();
    assert_eq!(back, run);
}
