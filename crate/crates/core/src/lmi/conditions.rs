use serde::Serialize;

use super::{AffineSymExpr, Constraint, LmiError, LmiProblem, SymVar};
use crate::linalg::{mat_exp, Matrix};
use crate::system::SwitchedLinearSystem;

/// The pair `P_i^+`, `P_i^-` for every mode, indexed by 0-based mode.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateVars {
    pub plus: Vec<SymVar>,
    pub minus: Vec<SymVar>,
}

impl CertificateVars {
    /// Declares `P_1^-, P_1^+, …, P_M^-, P_M^+` and fixes `trace(P_1^-) = n`.
    pub fn declare(problem: &mut LmiProblem, sys: &SwitchedLinearSystem) -> Self {
        let n = sys.dim();
        let mut plus = Vec::with_capacity(sys.mode_count());
        let mut minus = Vec::with_capacity(sys.mode_count());
        for i in 1..=sys.mode_count() {
            minus.push(problem.declare(n, format!("P_{i}^-")));
            plus.push(problem.declare(n, format!("P_{i}^+")));
        }
        problem.normalize_trace(n as f64);
        Self { plus, minus }
    }
}

fn check_vars(sys: &SwitchedLinearSystem, vars: &CertificateVars) -> Result<(), LmiError> {
    let m = sys.mode_count();
    if vars.plus.len() != m || vars.minus.len() != m {
        return Err(LmiError::Dimension(format!(
            "{} modes but {} / {} certificate variables",
            m,
            vars.plus.len(),
            vars.minus.len()
        )));
    }
    Ok(())
}

/// `P ≻ 0` for every certificate variable.
pub fn positivity_conditions(vars: &CertificateVars) -> Result<Vec<Constraint>, LmiError> {
    vars.minus
        .iter()
        .chain(&vars.plus)
        .map(|v| {
            Ok(Constraint::new(
                format!("{} > 0", v.label()),
                AffineSymExpr::zero(v.dim()).plus_var(v, 1.0)?,
            ))
        })
        .collect()
}

/// `e^{−2ρτ1} P_i^+ − e^{A_iᵀτ1} P_j^- e^{A_iτ1} ⪰ 0` for each ordered pair `i ≠ j`.
pub fn build_switch_conditions(
    sys: &SwitchedLinearSystem,
    vars: &CertificateVars,
    rho: f64,
    tau1: f64,
) -> Result<Vec<Constraint>, LmiError> {
    check_vars(sys, vars)?;
    if !(tau1.is_finite() && tau1 >= 0.0) || !rho.is_finite() {
        return Err(LmiError::InvalidParameter(format!(
            "need finite rho and tau1 >= 0, got rho={rho}, tau1={tau1}"
        )));
    }
    let n = sys.dim();
    let decay = (-2.0 * rho * tau1).exp();
    let mut out = Vec::new();
    for (i, a) in sys.modes().iter().enumerate() {
        let e = mat_exp(a, tau1)?;
        for j in 0..sys.mode_count() {
            if i == j {
                continue;
            }
            let expr = AffineSymExpr::zero(n)
                .plus_var(&vars.plus[i], decay)?
                .plus_congruence(&vars.minus[j], &e, -1.0)?;
            out.push(Constraint::new(format!("switch {}->{}", i + 1, j + 1), expr));
        }
    }
    Ok(out)
}

/// Per mode: `μ² P_i^- − P_i^+ ⪰ 0` and `2ν P_i^+ − A_iᵀP_i^+ − P_i^+A_i ⪰ 0`.
pub fn build_interval_conditions_lmi(
    sys: &SwitchedLinearSystem,
    vars: &CertificateVars,
    mu: f64,
    nu: f64,
) -> Result<Vec<Constraint>, LmiError> {
    check_vars(sys, vars)?;
    if !(mu > 0.0 && mu < 1.0) {
        return Err(LmiError::InvalidParameter(format!(
            "mu must lie in (0, 1), got {mu}"
        )));
    }
    if !nu.is_finite() {
        return Err(LmiError::InvalidParameter(format!("nu must be finite, got {nu}")));
    }
    let n = sys.dim();
    let mut out = Vec::with_capacity(2 * sys.mode_count());
    for (i, a) in sys.modes().iter().enumerate() {
        let jump = AffineSymExpr::zero(n)
            .plus_var(&vars.minus[i], mu * mu)?
            .plus_var(&vars.plus[i], -1.0)?;
        out.push(Constraint::new(format!("jump {}", i + 1), jump));
        let flow = AffineSymExpr::zero(n)
            .plus_var(&vars.plus[i], 2.0 * nu)?
            .plus_lyapunov(&vars.plus[i], a, -1.0)?;
        out.push(Constraint::new(format!("growth {}", i + 1), flow));
    }
    Ok(out)
}

/// Longest window `τ2 − τ1` allowed by `ln μ + w(ν+ρ) ≤ 0`; `+∞` when `ν + ρ ≤ 0`.
pub fn max_window(mu: f64, nu: f64, rho: f64) -> f64 {
    let rate = nu + rho;
    if rate <= 0.0 {
        f64::INFINITY
    } else {
        -mu.ln() / rate
    }
}

/// `ln μ + window·(ν+ρ) ≤ 0`, trivially true when `ν + ρ ≤ 0`.
pub fn check_window_inequality(mu: f64, nu: f64, rho: f64, window: f64) -> bool {
    if nu + rho <= 0.0 {
        return true;
    }
    mu.ln() + window * (nu + rho) <= 0.0
}

/// One chain `Q_0 = P_i^+, Q_1, …, Q_{K−1}, Q_K = P_j^-` (0-based modes).
#[derive(Debug, Clone, Serialize)]
pub struct KChain {
    pub from: usize,
    pub to: usize,
    /// The free interior links `Q_1 … Q_{K−1}`.
    pub links: Vec<SymVar>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KRelaxation {
    pub chains: Vec<KChain>,
    pub constraints: Vec<Constraint>,
}

/// Piecewise-linear replacement of the switch conditions.
///
/// For every ordered pair `i ≠ j` the chain variables satisfy, for
/// `k = 1..K` and `D_k = K(Q_k − Q_{k−1})/τ1`,
///
/// ```text
/// rate·Q_k     − A_iᵀQ_k     − Q_kA_i     − D_k ≻ 0
/// rate·Q_{k−1} − A_iᵀQ_{k−1} − Q_{k−1}A_i − D_k ≻ 0
/// ```
///
/// which implies `e^{A_iᵀτ1} P_j^- e^{A_iτ1} ≺ e^{rate·τ1} P_i^+`. The switch
/// conditions correspond to `rate = −2ρ`. Interior links are declared in
/// `problem`; the endpoints alias the certificate variables.
pub fn build_k_relaxation(
    problem: &mut LmiProblem,
    sys: &SwitchedLinearSystem,
    vars: &CertificateVars,
    rate: f64,
    tau1: f64,
    k: usize,
) -> Result<KRelaxation, LmiError> {
    check_vars(sys, vars)?;
    if k == 0 {
        return Err(LmiError::InvalidParameter("K must be at least 1".into()));
    }
    if !(tau1.is_finite() && tau1 > 0.0) || !rate.is_finite() {
        return Err(LmiError::InvalidParameter(format!(
            "need finite rate and tau1 > 0, got rate={rate}, tau1={tau1}"
        )));
    }
    let n = sys.dim();
    let slope = k as f64 / tau1;
    let mut chains = Vec::new();
    let mut constraints = Vec::new();
    for (i, a) in sys.modes().iter().enumerate() {
        for j in 0..sys.mode_count() {
            if i == j {
                continue;
            }
            let links: Vec<SymVar> = (1..k)
                .map(|l| problem.declare(n, format!("Q_{{{}{},{l}}}", i + 1, j + 1)))
                .collect();
            let node = |l: usize| -> &SymVar {
                if l == 0 {
                    &vars.plus[i]
                } else if l == k {
                    &vars.minus[j]
                } else {
                    &links[l - 1]
                }
            };
            for l in 1..=k {
                let (prev, cur) = (node(l - 1), node(l));
                for (end, at) in [("right", cur), ("left", prev)] {
                    let expr = AffineSymExpr::zero(n)
                        .plus_var(at, rate)?
                        .plus_lyapunov(at, a, -1.0)?
                        .plus_var(cur, -slope)?
                        .plus_var(prev, slope)?;
                    constraints.push(Constraint::new(
                        format!("chain {}->{} link {l} {end}", i + 1, j + 1),
                        expr,
                    ));
                }
            }
            chains.push(KChain {
                from: i,
                to: j,
                links,
            });
        }
    }
    Ok(KRelaxation {
        chains,
        constraints,
    })
}

/// `e^{−2ρt} P_i^- − e^{A_iᵀt} P_i^+ e^{A_it} ⪰ 0` at `grid_points` equispaced
/// `t ∈ [0, τ2 − τ1]`. A sampled relaxation: it does not certify anything
/// between the grid points.
pub fn build_quadratic_grid_conditions(
    sys: &SwitchedLinearSystem,
    vars: &CertificateVars,
    rho: f64,
    tau1: f64,
    tau2: f64,
    grid_points: usize,
) -> Result<Vec<Constraint>, LmiError> {
    check_vars(sys, vars)?;
    if grid_points < 2 {
        return Err(LmiError::InvalidParameter(format!(
            "grid_points must be at least 2, got {grid_points}"
        )));
    }
    let window = tau2 - tau1;
    if !(window.is_finite() && window >= 0.0) || !rho.is_finite() {
        return Err(LmiError::InvalidParameter(format!(
            "need finite rho and tau2 >= tau1, got rho={rho}, tau1={tau1}, tau2={tau2}"
        )));
    }
    let times: Vec<f64> = if window == 0.0 {
        vec![0.0]
    } else {
        (0..grid_points)
            .map(|g| window * g as f64 / (grid_points - 1) as f64)
            .collect()
    };
    let n = sys.dim();
    let mut out = Vec::with_capacity(times.len() * sys.mode_count());
    for (i, a) in sys.modes().iter().enumerate() {
        for &t in &times {
            let e: Matrix = mat_exp(a, t)?;
            let expr = AffineSymExpr::zero(n)
                .plus_var(&vars.minus[i], (-2.0 * rho * t).exp())?
                .plus_congruence(&vars.plus[i], &e, -1.0)?;
            out.push(Constraint::new(format!("flow {} at t={t}", i + 1), expr));
        }
    }
    Ok(out)
}
