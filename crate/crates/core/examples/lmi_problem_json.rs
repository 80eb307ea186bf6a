//! Builds a small LMI feasibility problem by hand, prints it as JSON and
//! solves it: a common quadratic Lyapunov function for two stable matrices.
//!
//!     cargo run --release --example lmi_problem_json

use dwellcert::linalg::{min_eig, Matrix};
use dwellcert::lmi::{AffineSymExpr, Constraint, LmiProblem};
use dwellcert::sdp::{solve_feasibility, verify_assignment, SolverOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a1 = Matrix::from_rows(&[[-1.0, 2.0], [0.0, -1.0]]);
    let a2 = Matrix::from_rows(&[[-1.0, 0.0], [1.0, -0.5]]);

    let mut p = LmiProblem::new();
    let x = p.declare(2, "P");
    p.normalize_trace(2.0);
    p.add(Constraint::new("P > 0", AffineSymExpr::zero(2).plus_var(&x, 1.0)?))?;
    for (name, a) in [("A1", &a1), ("A2", &a2)] {
        p.add(Constraint::new(
            format!("{name}'P + P{name} < 0"),
            AffineSymExpr::zero(2).plus_lyapunov(&x, a, -1.0)?,
        ))?;
    }
    println!("{}", p.to_json());

    let r = solve_feasibility(&p, &SolverOptions::default())?;
    println!("status {:?} after {} iterations", r.status, r.iterations);
    if let Some(asg) = &r.assignment {
        let pm = asg.get(x.id())?;
        println!("P = {pm:?}");
        println!("min eig P = {:.4}", min_eig(pm));
        println!("worst constraint eigenvalue = {:.4e}", verify_assignment(&p, asg)?);
    }
    Ok(())
}
