//! Feasibility engine for small [`LmiProblem`]s.
//!
//! The problem is lifted to pairs `(x, S)` where `x` stacks the variables in
//! scaled half-vectorized form and `S_c` is a slack for each constraint. The
//! engine runs Douglas–Rachford splitting between the affine set
//! `{S_c = L_c x + C_c − margin·I, trace(first var) = t}` and the cone
//! `{S_c ⪰ β·I}`. When the two sets do not meet, the step converges to the
//! nonzero gap vector, which is the infeasibility evidence.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{min_eig, sym_eigen, Cholesky, LinalgError, Matrix, SymMatrix};
use crate::lmi::{Assignment, LmiError, LmiProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("problem has no trace normalization; the zero assignment would be admissible")]
    Unnormalized,
    #[error("problem declares no variables")]
    NoVariables,
    #[error("invalid solver option: {0}")]
    InvalidOption(String),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Iterations over which the step norm must stay flat to count as a stall.
    pub stall_window: usize,
    /// Relative spread of the step norm over the window that counts as flat.
    pub stall_rel_tol: f64,
    /// A stalled step below `stall_floor · margin` is not taken as evidence.
    pub stall_floor: f64,
    /// The cone projection targets `λ ≥ push · margin` above the margin.
    pub push: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            stall_window: 500,
            stall_rel_tol: 1e-5,
            stall_floor: 100.0,
            push: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityStatus {
    Feasible,
    /// The iteration stalled at a positive distance between the two sets.
    /// This is a heuristic, not a dual certificate.
    InfeasibleEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityResult {
    pub status: FeasibilityStatus,
    /// Present only when `status` is `Feasible`.
    pub assignment: Option<Assignment>,
    /// `min_c λmin(expr_c) − margin` at the returned (or last) iterate.
    pub worst_margin: f64,
    pub iterations: usize,
    /// Norm of the last Douglas–Rachford step.
    pub final_step: f64,
}

/// Smallest eigenvalue over all constraint expressions at `asg`.
///
/// Evaluates the expressions directly, independently of the linear maps the
/// solver builds. Returns `+∞` for a problem without constraints.
pub fn verify_assignment(prob: &LmiProblem, asg: &Assignment) -> Result<f64, SdpError> {
    let eigs = prob.constraint_min_eigs(asg)?;
    Ok(eigs.into_iter().fold(f64::INFINITY, f64::min))
}

fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn svec(s: &SymMatrix, out: &mut [f64]) {
    let n = s.dim();
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let v = s.get(i, j);
            out[k] = if i == j { v } else { v * std::f64::consts::SQRT_2 };
            k += 1;
        }
    }
}

fn unsvec(n: usize, v: &[f64]) -> SymMatrix {
    let mut s = SymMatrix::zeros(n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            s.set(
                i,
                j,
                if i == j {
                    v[k]
                } else {
                    v[k] * std::f64::consts::FRAC_1_SQRT_2
                },
            );
            k += 1;
        }
    }
    s
}

struct Block {
    dim: usize,
    /// `svec_len(dim) × nx`.
    map: Matrix,
    /// `svec(C − margin·I)`.
    offset: Vec<f64>,
}

impl Block {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let m = self.map.mul_vec(x);
        for ((o, v), c) in out.iter_mut().zip(m).zip(&self.offset) {
            *o = v + c;
        }
    }
}

struct Compiled {
    nx: usize,
    var_dims: Vec<usize>,
    var_offsets: Vec<usize>,
    blocks: Vec<Block>,
    slack_offsets: Vec<usize>,
    ns: usize,
    chol: Cholesky,
    trace_row: Vec<f64>,
    trace_value: f64,
    h_inv_a: Vec<f64>,
    a_h_inv_a: f64,
}

impl Compiled {
    fn new(prob: &LmiProblem, trace_value: f64) -> Result<Self, SdpError> {
        let var_dims: Vec<usize> = prob.vars().iter().map(|v| v.dim()).collect();
        let mut var_offsets = Vec::with_capacity(var_dims.len());
        let mut nx = 0;
        for &d in &var_dims {
            var_offsets.push(nx);
            nx += svec_len(d);
        }
        let margin = prob.margin();

        let mut blocks = Vec::with_capacity(prob.constraints().len());
        let mut slack_offsets = Vec::with_capacity(prob.constraints().len());
        let mut ns = 0;
        for c in prob.constraints() {
            let m = c.expr.dim();
            let p = svec_len(m);
            let mut map = Matrix::zeros(p, nx);
            let mut col = vec![0.0; p];
            for t in c.expr.terms() {
                let v = t.var.index();
                let d = var_dims[v];
                let mut q = 0;
                for i in 0..d {
                    for j in i..d {
                        let mut e = SymMatrix::zeros(d);
                        e.set(i, j, if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 });
                        svec(&t.apply(&e), &mut col);
                        let xc = var_offsets[v] + q;
                        for (r, val) in col.iter().enumerate() {
                            map[(r, xc)] += val;
                        }
                        q += 1;
                    }
                }
            }
            let mut shifted = c.expr.constant_part().clone();
            shifted.axpy(-margin, &SymMatrix::identity(m));
            let mut offset = vec![0.0; p];
            svec(&shifted, &mut offset);
            slack_offsets.push(ns);
            ns += p;
            blocks.push(Block { dim: m, map, offset });
        }

        let mut h = Matrix::identity(nx);
        for b in &blocks {
            let p = b.map.rows();
            for i in 0..nx {
                for j in i..nx {
                    let s: f64 = (0..p).map(|r| b.map[(r, i)] * b.map[(r, j)]).sum();
                    h[(i, j)] += s;
                    if i != j {
                        h[(j, i)] += s;
                    }
                }
            }
        }
        let chol = Cholesky::new(&h)?;

        let mut trace_row = vec![0.0; nx];
        let d0 = var_dims[0];
        let mut q = 0;
        for i in 0..d0 {
            for j in i..d0 {
                if i == j {
                    trace_row[q] = 1.0;
                }
                q += 1;
            }
        }
        let h_inv_a = chol.solve_vec(&trace_row);
        let a_h_inv_a = dot(&trace_row, &h_inv_a);

        Ok(Self {
            nx,
            var_dims,
            var_offsets,
            blocks,
            slack_offsets,
            ns,
            chol,
            trace_row,
            trace_value,
            h_inv_a,
            a_h_inv_a,
        })
    }

    fn slack<'a>(&self, s: &'a [f64], c: usize) -> &'a [f64] {
        let o = self.slack_offsets[c];
        &s[o..o + svec_len(self.blocks[c].dim)]
    }

    /// Nearest point of the affine set to `(x0, s0)`.
    fn project_affine(&self, x0: &[f64], s0: &[f64], x: &mut [f64], s: &mut [f64]) {
        let mut rhs = x0.to_vec();
        for (c, b) in self.blocks.iter().enumerate() {
            let diff: Vec<f64> = self
                .slack(s0, c)
                .iter()
                .zip(&b.offset)
                .map(|(v, o)| v - o)
                .collect();
            for (r, d) in diff.iter().enumerate() {
                if *d != 0.0 {
                    for (k, h) in rhs.iter_mut().enumerate() {
                        *h += b.map[(r, k)] * d;
                    }
                }
            }
        }
        let y = self.chol.solve_vec(&rhs);
        let lambda = (dot(&self.trace_row, &y) - self.trace_value) / self.a_h_inv_a;
        for ((xi, yi), zi) in x.iter_mut().zip(&y).zip(&self.h_inv_a) {
            *xi = yi - lambda * zi;
        }
        for (c, b) in self.blocks.iter().enumerate() {
            let o = self.slack_offsets[c];
            b.apply(x, &mut s[o..o + b.map.rows()]);
        }
    }

    fn project_cone(&self, s0: &[f64], floor: f64, s: &mut [f64]) {
        for (c, b) in self.blocks.iter().enumerate() {
            let o = self.slack_offsets[c];
            let p = b.map.rows();
            let e = sym_eigen(&unsvec(b.dim, &s0[o..o + p]));
            if e.values[0] >= floor {
                s[o..o + p].copy_from_slice(&s0[o..o + p]);
            } else {
                svec(&e.reconstruct_with(|l| l.max(floor)), &mut s[o..o + p]);
            }
        }
    }

    /// Smallest slack eigenvalue, i.e. `min_c λmin(expr_c) − margin`.
    fn slack_min_eig(&self, s: &[f64]) -> f64 {
        self.blocks
            .iter()
            .enumerate()
            .map(|(c, b)| min_eig(&unsvec(b.dim, self.slack(s, c))))
            .fold(f64::INFINITY, f64::min)
    }

    fn assignment(&self, prob: &LmiProblem, x: &[f64]) -> Assignment {
        let mut asg = Assignment::new();
        for (v, (&d, &o)) in prob
            .vars()
            .iter()
            .zip(self.var_dims.iter().zip(&self.var_offsets))
        {
            asg.insert(v.id(), unsvec(d, &x[o..o + svec_len(d)]));
        }
        asg
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Searches for an assignment with every constraint `⪰ margin·I`.
///
/// A `Feasible` status is only returned after the candidate passes
/// [`verify_assignment`], so it never rests on the solver's own bookkeeping.
/// The solve is deterministic.
pub fn solve_feasibility(
    prob: &LmiProblem,
    opts: &SolverOptions,
) -> Result<FeasibilityResult, SdpError> {
    let trace_value = prob.normalization().ok_or(SdpError::Unnormalized)?;
    if prob.vars().is_empty() {
        return Err(SdpError::NoVariables);
    }
    if opts.max_iter == 0 || opts.stall_window == 0 || !(opts.push >= 0.0) {
        return Err(SdpError::InvalidOption(format!("{opts:?}")));
    }
    let cp = Compiled::new(prob, trace_value)?;
    let margin = prob.margin();
    let floor = opts.push * margin;

    // Start from scaled identities, which satisfy the normalization.
    let d0 = cp.var_dims[0] as f64;
    let mut zx = vec![0.0; cp.nx];
    for (&d, &o) in cp.var_dims.iter().zip(&cp.var_offsets) {
        svec(
            &SymMatrix::identity(d).scale(trace_value / d0),
            &mut zx[o..o + svec_len(d)],
        );
    }
    let mut zs = vec![0.0; cp.ns];
    for (c, b) in cp.blocks.iter().enumerate() {
        let o = cp.slack_offsets[c];
        b.apply(&zx, &mut zs[o..o + b.map.rows()]);
    }

    let mut ks = vec![0.0; cp.ns];
    let mut rx = vec![0.0; cp.nx];
    let mut rs = vec![0.0; cp.ns];
    let mut ax = vec![0.0; cp.nx];
    let mut a_s = vec![0.0; cp.ns];
    let mut history: Vec<f64> = Vec::with_capacity(opts.max_iter);
    let mut last_step = f64::NAN;

    for it in 1..=opts.max_iter {
        cp.project_cone(&zs, floor, &mut ks);
        // x is unconstrained in the cone set, so kx = zx and rx = zx.
        rx.copy_from_slice(&zx);
        for ((r, k), z) in rs.iter_mut().zip(&ks).zip(&zs) {
            *r = 2.0 * k - z;
        }
        cp.project_affine(&rx, &rs, &mut ax, &mut a_s);

        let mut step2 = 0.0;
        for (z, a) in zx.iter_mut().zip(&ax) {
            let d = a - *z;
            step2 += d * d;
            *z += d;
        }
        for ((z, a), k) in zs.iter_mut().zip(&a_s).zip(&ks) {
            let d = a - k;
            step2 += d * d;
            *z += d;
        }
        last_step = step2.sqrt();
        history.push(last_step);

        if cp.slack_min_eig(&a_s) >= 0.0 {
            let asg = cp.assignment(prob, &ax);
            let worst = verify_assignment(prob, &asg)? - margin;
            if worst >= 0.0 {
                return Ok(FeasibilityResult {
                    status: FeasibilityStatus::Feasible,
                    assignment: Some(asg),
                    worst_margin: worst,
                    iterations: it,
                    final_step: last_step,
                });
            }
        }

        if history.len() > opts.stall_window {
            let w = &history[history.len() - opts.stall_window - 1..];
            let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
            if lo > opts.stall_floor * margin && hi - lo <= opts.stall_rel_tol * hi {
                return unfinished(
                    prob,
                    &cp,
                    &ax,
                    margin,
                    FeasibilityStatus::InfeasibleEvidence,
                    it,
                    last_step,
                );
            }
        }
    }
    unfinished(
        prob,
        &cp,
        &ax,
        margin,
        FeasibilityStatus::Inconclusive,
        opts.max_iter,
        last_step,
    )
}

fn unfinished(
    prob: &LmiProblem,
    cp: &Compiled,
    x: &[f64],
    margin: f64,
    status: FeasibilityStatus,
    iterations: usize,
    final_step: f64,
) -> Result<FeasibilityResult, SdpError> {
    let worst = verify_assignment(prob, &cp.assignment(prob, x))? - margin;
    Ok(FeasibilityResult {
        status,
        assignment: None,
        worst_margin: worst,
        iterations,
        final_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::{AffineSymExpr, Constraint};

    fn lyapunov_problem(a: &Matrix) -> LmiProblem {
        let n = a.rows();
        let mut p = LmiProblem::new();
        let x = p.declare(n, "P");
        p.normalize_trace(n as f64);
        p.add(Constraint::new(
            "P > 0",
            AffineSymExpr::zero(n).plus_var(&x, 1.0).unwrap(),
        ))
        .unwrap();
        p.add(Constraint::new(
            "decrease",
            AffineSymExpr::zero(n).plus_lyapunov(&x, a, -1.0).unwrap(),
        ))
        .unwrap();
        p
    }

    #[test]
    fn svec_roundtrip_preserves_inner_product() {
        let s = SymMatrix::from_packed(3, vec![1.0, 2.0, -1.0, 4.0, 0.5, 3.0]).unwrap();
        let mut v = vec![0.0; 6];
        svec(&s, &mut v);
        assert!(unsvec(3, &v).sub(&s).norm_fro() < 1e-15);
        let fro2: f64 = v.iter().map(|x| x * x).sum();
        assert!((fro2.sqrt() - s.norm_fro()).abs() < 1e-14);
    }

    #[test]
    fn common_lyapunov_toy() {
        let p = lyapunov_problem(&Matrix::from_diag(&[-1.0, -2.0]));
        let r = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Feasible);
        let asg = r.assignment.unwrap();
        assert!(verify_assignment(&p, &asg).unwrap() >= p.margin());
    }

    #[test]
    fn unstable_scalar_not_feasible() {
        let p = lyapunov_problem(&Matrix::from_diag(&[1.0]));
        let r = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, FeasibilityStatus::InfeasibleEvidence);
        assert!(r.assignment.is_none());
        assert!(r.worst_margin < 0.0);
    }

    #[test]
    fn unnormalized_rejected() {
        let mut p = LmiProblem::new();
        p.declare(1, "x");
        assert_eq!(
            solve_feasibility(&p, &SolverOptions::default()).unwrap_err(),
            SdpError::Unnormalized
        );
    }

    #[test]
    fn zero_assignment_margin() {
        let mut p = LmiProblem::new();
        let x = p.declare(2, "P");
        p.add(Constraint::new(
            "P >= I",
            AffineSymExpr::constant(SymMatrix::identity(2).scale(-1.0))
                .plus_var(&x, 1.0)
                .unwrap(),
        ))
        .unwrap();
        let mut asg = Assignment::new();
        asg.insert(x.id(), SymMatrix::zeros(2));
        assert!(verify_assignment(&p, &asg).unwrap() <= -1.0);
    }
}
