use dwellcert::linalg::{eigenvalues, min_eig, Matrix, SymMatrix};
use dwellcert::lmi::{AffineSymExpr, Assignment, Constraint, LmiProblem, SymVar};
use dwellcert::sdp::{solve_feasibility, verify_assignment, FeasibilityStatus, SolverOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn common_lyapunov(modes: &[Matrix]) -> (LmiProblem, SymVar) {
    let n = modes[0].rows();
    let mut p = LmiProblem::new();
    let x = p.declare(n, "P");
    p.normalize_trace(n as f64);
    p.add(Constraint::new("P", AffineSymExpr::zero(n).plus_var(&x, 1.0).unwrap()))
        .unwrap();
    for (i, a) in modes.iter().enumerate() {
        p.add(Constraint::new(
            format!("decrease {i}"),
            AffineSymExpr::zero(n).plus_lyapunov(&x, a, -1.0).unwrap(),
        ))
        .unwrap();
    }
    (p, x)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let data = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::from_row_major(n, n, data).unwrap()
}

fn spectral_abscissa(a: &Matrix) -> f64 {
    eigenvalues(a)
        .unwrap()
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn hurwitz(rng: &mut ChaCha8Rng, n: usize, abscissa: f64) -> Matrix {
    let b = random_matrix(rng, n);
    let shift = abscissa - spectral_abscissa(&b);
    &b + &Matrix::identity(n).scale(shift)
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize, size: f64) -> SymMatrix {
    let data = (0..n * (n + 1) / 2).map(|_| rng.gen_range(-size..size)).collect();
    SymMatrix::from_packed(n, data).unwrap()
}

/// Spectral norm of a symmetric matrix from its extreme eigenvalues.
fn sym_norm(s: &SymMatrix) -> f64 {
    let neg = s.scale(-1.0);
    (-min_eig(s)).max(-min_eig(&neg))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn feasible_results_pass_the_gate(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=3);
        let count = rng.gen_range(1..=3);
        let modes: Vec<Matrix> = (0..count)
            .map(|_| {
                let abscissa = -rng.gen_range(0.05..0.8);
                hurwitz(&mut rng, n, abscissa)
            })
            .collect();
        let (p, _) = common_lyapunov(&modes);
        let r = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        if r.status == FeasibilityStatus::Feasible {
            let m = verify_assignment(&p, r.assignment.as_ref().unwrap()).unwrap();
            prop_assert!(m >= 0.0, "feasible but margin {m}");
        } else {
            prop_assert!(r.assignment.is_none());
        }
    }

    /// Weyl: perturbing `P` by `E` moves `λmin(P)` by at most `‖E‖` and
    /// `λmin(−AᵀP − PA)` by at most `2‖A‖‖E‖`.
    #[test]
    fn margin_is_lipschitz_in_the_assignment(seed in any::<u64>(), size in 1e-6f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = hurwitz(&mut rng, 3, -0.3);
        let (p, x) = common_lyapunov(std::slice::from_ref(&a));
        let base = random_sym(&mut rng, 3, 2.0);
        let e = random_sym(&mut rng, 3, size);
        let at = |s: &SymMatrix| {
            let mut asg = Assignment::new();
            asg.insert(x.id(), s.clone());
            verify_assignment(&p, &asg).unwrap()
        };
        let a_norm = a.norm_fro();
        let bound = sym_norm(&e) * (1.0 + 2.0 * a_norm) + 1e-12;
        let shift = (at(&base.add(&e)) - at(&base)).abs();
        prop_assert!(shift <= bound, "shift {shift} above bound {bound}");
    }

    #[test]
    fn homogeneous_problems_are_scale_equivariant(seed in any::<u64>(), s in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = vec![hurwitz(&mut rng, 2, -0.2), hurwitz(&mut rng, 2, -0.4)];
        let (p, x) = common_lyapunov(&modes);
        let opts = SolverOptions::default();
        let r1 = solve_feasibility(&p, &opts).unwrap();
        let r2 = solve_feasibility(&p.rescaled(s), &opts).unwrap();
        prop_assert_eq!(r1.status, r2.status);
        if let (Some(a1), Some(a2)) = (&r1.assignment, &r2.assignment) {
            let p1 = a1.get(x.id()).unwrap().scale(s);
            let p2 = a2.get(x.id()).unwrap();
            prop_assert!(p1.sub(p2).norm_fro() <= 1e-6 * p2.norm_fro());
        }
    }
}

#[test]
fn solver_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let modes: Vec<Matrix> = (0..3).map(|_| hurwitz(&mut rng, 3, -0.1)).collect();
    let (p, x) = common_lyapunov(&modes);
    let opts = SolverOptions::default();
    let r1 = solve_feasibility(&p, &opts).unwrap();
    let r2 = solve_feasibility(&p, &opts).unwrap();
    assert_eq!(r1.status, r2.status);
    assert_eq!(r1.iterations, r2.iterations);
    assert_eq!(r1.worst_margin.to_bits(), r2.worst_margin.to_bits());
    if let (Some(a1), Some(a2)) = (r1.assignment, r2.assignment) {
        assert_eq!(a1.get(x.id()).unwrap(), a2.get(x.id()).unwrap());
    }
}

#[test]
fn non_hurwitz_modes_never_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for k in 0..12 {
        let mut modes = vec![hurwitz(&mut rng, 2 + k % 2, 0.02 + 0.05 * k as f64)];
        modes.push(hurwitz(&mut rng, 2 + k % 2, -1.0));
        let (p, _) = common_lyapunov(&modes);
        let r = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        assert_ne!(r.status, FeasibilityStatus::Feasible, "case {k}");
        assert!(r.worst_margin < 0.0);
    }
}

#[test]
fn contradictory_bounds_are_rejected() {
    // 2I ⪯ P ⪯ I has no solution.
    let mut p = LmiProblem::new();
    let x = p.declare(2, "P");
    p.normalize_trace(3.0);
    let id = SymMatrix::identity(2);
    p.add(Constraint::new(
        "P >= 2I",
        AffineSymExpr::constant(id.scale(-2.0)).plus_var(&x, 1.0).unwrap(),
    ))
    .unwrap();
    p.add(Constraint::new(
        "P <= I",
        AffineSymExpr::constant(id).plus_var(&x, -1.0).unwrap(),
    ))
    .unwrap();
    let r = solve_feasibility(&p, &SolverOptions::default()).unwrap();
    assert_ne!(r.status, FeasibilityStatus::Feasible);
}

#[test]
fn congruence_constraints_are_respected() {
    // Find P with P ≻ 0 and FᵀPF ⪯ 0.9 P for a contraction F.
    let f = Matrix::from_rows(&[[0.5, 0.4], [-0.3, 0.6]]);
    let mut p = LmiProblem::new();
    let x = p.declare(2, "P");
    p.normalize_trace(2.0);
    p.add(Constraint::new("P", AffineSymExpr::zero(2).plus_var(&x, 1.0).unwrap()))
        .unwrap();
    p.add(Constraint::new(
        "contract",
        AffineSymExpr::zero(2)
            .plus_var(&x, 0.9)
            .unwrap()
            .plus_congruence(&x, &f, -1.0)
            .unwrap(),
    ))
    .unwrap();
    let r = solve_feasibility(&p, &SolverOptions::default()).unwrap();
    assert_eq!(r.status, FeasibilityStatus::Feasible);
    let pm = r.assignment.unwrap().get(x.id()).unwrap().clone();
    assert!((pm.trace() - 2.0).abs() < 1e-9);
    assert!(min_eig(&pm.scale(0.9).sub(&pm.congruence(&f))) > 0.0);
}
