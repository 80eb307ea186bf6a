//! Certificate synthesis: problem assembly, the line search over `μ`, and the
//! admissible-delay computation. Every certificate returned from here has
//! already passed [`verify_certificate`].

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use crate::certificate::{overshoot_bound, CertificateChain, Metadata, QuadraticCertificate, Route};
use crate::linalg::log_norm;
use crate::lmi::{
    build_interval_conditions_lmi, build_k_relaxation, build_switch_conditions,
    check_window_inequality, max_window, positivity_conditions, CertificateVars, KRelaxation,
    LmiError, LmiProblem,
};
use crate::sdp::{solve_feasibility, FeasibilityResult, FeasibilityStatus, SdpError, SolverOptions};
use crate::system::SwitchedLinearSystem;
use crate::verify::{verify_certificate, VerificationReport, VerifyError, DEFAULT_GRID_POINTS};

/// Default stopping width of the bisection on `μ`.
pub const DEFAULT_MU_TOLERANCE: f64 = 5e-3;
/// Coarse `ν` candidates, extended per system by the largest logarithmic norm.
pub const NU_GRID: [f64; 5] = [0.25, 0.5, 1.0, 1.5, 2.0];

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no quadratic certificate at these parameters: {reason}")]
    NoCertificate {
        reason: String,
        status: Option<FeasibilityStatus>,
        worst_margin: f64,
    },
    #[error("feasibility is not monotone in mu: feasible at {feasible_mu}, not at {infeasible_mu}")]
    NonMonotone { feasible_mu: f64, infeasible_mu: f64 },
    #[error("mu = {mu} only allows tau2 - tau1 <= {max_window}, requested {window}")]
    WindowTooLong { mu: f64, window: f64, max_window: f64 },
    #[error("synthesized certificate failed verification:\n{0}")]
    VerificationFailed(Box<VerificationReport>),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyParams {
    pub rho: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub nu: f64,
    pub route: Route,
    pub mu_tolerance: f64,
    pub grid_points: usize,
    pub solver: SolverOptions,
}

impl CertifyParams {
    pub fn new(rho: f64, tau1: f64, tau2: f64, nu: f64) -> Self {
        Self {
            rho,
            tau1,
            tau2,
            nu,
            route: Route::ExpSwitch,
            mu_tolerance: DEFAULT_MU_TOLERANCE,
            grid_points: DEFAULT_GRID_POINTS,
            solver: SolverOptions::default(),
        }
    }

    pub fn with_route(mut self, route: Route) -> Self {
        self.route = route;
        self
    }

    fn validate(&self) -> Result<(), CertifyError> {
        let bad = |m: String| Err(CertifyError::InvalidParameter(m));
        if !self.rho.is_finite() || !self.nu.is_finite() {
            return bad(format!("rho and nu must be finite (rho={}, nu={})", self.rho, self.nu));
        }
        if !(self.tau1.is_finite() && self.tau2.is_finite() && self.tau2 >= self.tau1 && self.tau1 >= 0.0) {
            return bad(format!("need tau2 >= tau1 >= 0 (tau1={}, tau2={})", self.tau1, self.tau2));
        }
        if let Route::KRelax { k } = self.route {
            if k == 0 || self.tau1 <= 0.0 {
                return bad(format!("k_relax needs K >= 1 and tau1 > 0 (K={k}, tau1={})", self.tau1));
            }
        }
        if !(self.mu_tolerance > 0.0 && self.mu_tolerance < 0.5) {
            return bad(format!("mu tolerance must lie in (0, 0.5), got {}", self.mu_tolerance));
        }
        Ok(())
    }
}

/// The assembled feasibility problem for one `(μ, ν)` pair.
#[derive(Debug, Clone)]
pub struct CertificateProblem {
    pub problem: LmiProblem,
    pub vars: CertificateVars,
    pub relaxation: Option<KRelaxation>,
}

/// Positivity, jump and growth conditions plus the switch conditions of
/// `route`. The K-relaxation uses the signed rate `−2ρ`.
pub fn build_certificate_problem(
    sys: &SwitchedLinearSystem,
    rho: f64,
    tau1: f64,
    mu: f64,
    nu: f64,
    route: Route,
) -> Result<CertificateProblem, CertifyError> {
    let mut problem = LmiProblem::new();
    let vars = CertificateVars::declare(&mut problem, sys);
    problem.extend(positivity_conditions(&vars)?)?;
    problem.extend(build_interval_conditions_lmi(sys, &vars, mu, nu)?)?;
    let relaxation = match route {
        Route::ExpSwitch => {
            problem.extend(build_switch_conditions(sys, &vars, rho, tau1)?)?;
            None
        }
        Route::KRelax { k } => {
            let kr = build_k_relaxation(&mut problem, sys, &vars, -2.0 * rho, tau1, k)?;
            problem.extend(kr.constraints.iter().cloned())?;
            Some(kr)
        }
    };
    Ok(CertificateProblem {
        problem,
        vars,
        relaxation,
    })
}

struct Attempt {
    cp: CertificateProblem,
    result: FeasibilityResult,
}

fn attempt(sys: &SwitchedLinearSystem, p: &CertifyParams, mu: f64) -> Result<Attempt, CertifyError> {
    let cp = build_certificate_problem(sys, p.rho, p.tau1, mu, p.nu, p.route)?;
    let result = solve_feasibility(&cp.problem, &p.solver)?;
    Ok(Attempt { cp, result })
}

fn package(
    sys: &SwitchedLinearSystem,
    p: &CertifyParams,
    mu: f64,
    at: &Attempt,
) -> Result<(QuadraticCertificate, VerificationReport), CertifyError> {
    let asg = at
        .result
        .assignment
        .as_ref()
        .expect("packaging a feasible result");
    let get = |v: &crate::lmi::SymVar| asg.get(v.id()).cloned();
    let p_plus = at.cp.vars.plus.iter().map(get).collect::<Result<Vec<_>, _>>()?;
    let p_minus = at.cp.vars.minus.iter().map(get).collect::<Result<Vec<_>, _>>()?;
    let chains = match &at.cp.relaxation {
        None => None,
        Some(kr) => Some(
            kr.chains
                .iter()
                .map(|c| {
                    Ok(CertificateChain {
                        from: c.from,
                        to: c.to,
                        links: c.links.iter().map(get).collect::<Result<_, LmiError>>()?,
                    })
                })
                .collect::<Result<Vec<_>, LmiError>>()?,
        ),
    };
    let overshoot_m = overshoot_bound(&p_plus, &p_minus, p.nu, p.rho, p.tau1);
    let cert = QuadraticCertificate {
        fingerprint: sys.fingerprint(),
        rho: p.rho,
        tau1: p.tau1,
        tau2: p.tau2,
        mu,
        nu: p.nu,
        route: p.route,
        p_plus,
        p_minus,
        chains,
        overshoot_m,
        metadata: Metadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            parameters: serde_json::json!({
                "rho": p.rho,
                "tau1": p.tau1,
                "tau2": p.tau2,
                "mu": mu,
                "nu": p.nu,
                "grid_points": p.grid_points,
                "solver_iterations": at.result.iterations,
                "solver_margin": at.result.worst_margin,
            }),
            route: p.route.to_string(),
        },
    };
    let report = verify_certificate(&cert, sys, p.grid_points)?;
    if !report.verdict.is_verified() {
        return Err(CertifyError::VerificationFailed(Box::new(report)));
    }
    Ok((cert, report))
}

/// A verified certificate with its verification report.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub certificate: QuadraticCertificate,
    pub report: VerificationReport,
    /// The bisection trace when `μ` was searched for.
    pub search: Option<MuSearch>,
}

/// Outcome of the bisection on `μ`.
#[derive(Debug, Clone, Serialize)]
pub struct MuSearch {
    pub mu_hat: f64,
    pub tolerance: f64,
    /// Every `(μ, status)` evaluated, in order.
    pub evaluations: Vec<(f64, FeasibilityStatus)>,
}

fn check_monotone(evals: &[(f64, FeasibilityStatus)]) -> Result<(), CertifyError> {
    for &(a, sa) in evals {
        for &(b, sb) in evals {
            if sa == FeasibilityStatus::Feasible && sb != FeasibilityStatus::Feasible && b > a {
                return Err(CertifyError::NonMonotone {
                    feasible_mu: a,
                    infeasible_mu: b,
                });
            }
        }
    }
    Ok(())
}

fn search(
    sys: &SwitchedLinearSystem,
    p: &CertifyParams,
) -> Result<(MuSearch, Attempt), CertifyError> {
    p.validate()?;
    let tol = p.mu_tolerance;
    let mut evals = Vec::new();

    let hi_mu = 1.0 - tol;
    let top = attempt(sys, p, hi_mu)?;
    evals.push((hi_mu, top.result.status));
    if top.result.status != FeasibilityStatus::Feasible {
        return Err(CertifyError::NoCertificate {
            reason: format!("not feasible even at mu = {hi_mu}"),
            status: Some(top.result.status),
            worst_margin: top.result.worst_margin,
        });
    }
    let lo_mu = tol;
    let bottom = attempt(sys, p, lo_mu)?;
    evals.push((lo_mu, bottom.result.status));
    if bottom.result.status == FeasibilityStatus::Feasible {
        let s = MuSearch {
            mu_hat: lo_mu,
            tolerance: tol,
            evaluations: evals,
        };
        return Ok((s, bottom));
    }

    let (mut lo, mut hi, mut best) = (lo_mu, hi_mu, top);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let at = attempt(sys, p, mid)?;
        evals.push((mid, at.result.status));
        if at.result.status == FeasibilityStatus::Feasible {
            hi = mid;
            best = at;
        } else {
            lo = mid;
        }
    }
    check_monotone(&evals)?;
    Ok((
        MuSearch {
            mu_hat: hi,
            tolerance: tol,
            evaluations: evals,
        },
        best,
    ))
}

/// Smallest feasible `μ` up to `params.mu_tolerance`, by bisection on
/// `(0, 1)`. Feasibility is assumed monotone in `μ`; a contradiction among
/// the evaluated points is an error.
pub fn line_search_mu(sys: &SwitchedLinearSystem, params: &CertifyParams) -> Result<MuSearch, CertifyError> {
    Ok(search(sys, params)?.0)
}

/// Builds, solves, packages and verifies a certificate on `[τ1, τ2]`.
///
/// With `mu = None` the line search picks `μ`; either way the window
/// inequality must admit `τ2 − τ1`.
pub fn synthesize(
    sys: &SwitchedLinearSystem,
    params: &CertifyParams,
    mu: Option<f64>,
) -> Result<Synthesis, CertifyError> {
    params.validate()?;
    let (mu, at, search_trace) = match mu {
        Some(mu) => {
            if !(mu > 0.0 && mu < 1.0) {
                return Err(CertifyError::InvalidParameter(format!("mu must lie in (0, 1), got {mu}")));
            }
            (mu, None, None)
        }
        None => {
            let (s, at) = search(sys, params)?;
            (s.mu_hat, Some(at), Some(s))
        }
    };
    let window = params.tau2 - params.tau1;
    if !check_window_inequality(mu, params.nu, params.rho, window) {
        return Err(CertifyError::WindowTooLong {
            mu,
            window,
            max_window: max_window(mu, params.nu, params.rho),
        });
    }
    let at = match at {
        Some(at) => at,
        None => attempt(sys, params, mu)?,
    };
    if at.result.status != FeasibilityStatus::Feasible {
        return Err(CertifyError::NoCertificate {
            reason: format!("solver status {:?} at mu = {mu}", at.result.status),
            status: Some(at.result.status),
            worst_margin: at.result.worst_margin,
        });
    }
    let (certificate, report) = package(sys, params, mu, &at)?;
    Ok(Synthesis {
        certificate,
        report,
        search: search_trace,
    })
}

#[derive(Debug, Clone)]
pub struct AdmissibleDelay {
    pub mu_hat: f64,
    /// Longest admissible `τ2 − τ1`.
    pub delta: f64,
    /// Certificate for `[τ1, τ1 + δ]` (capped when `δ` is unbounded).
    pub synthesis: Synthesis,
}

/// Cap on the certified window when `ν + ρ ≤ 0` makes it unbounded.
pub const UNBOUNDED_WINDOW_CAP: f64 = 1e3;

/// Line search on `μ`, then `δ = −ln(μ̂)/(ν+ρ)` and a certificate on
/// `[τ1, τ1 + δ]`. `params.tau2` is ignored.
pub fn max_admissible_delay(
    sys: &SwitchedLinearSystem,
    params: &CertifyParams,
) -> Result<AdmissibleDelay, CertifyError> {
    let probe = CertifyParams {
        tau2: params.tau1,
        ..params.clone()
    };
    let (s, at) = search(sys, &probe)?;
    let delta = max_window(s.mu_hat, params.nu, params.rho);
    let p = CertifyParams {
        tau2: params.tau1 + delta.min(UNBOUNDED_WINDOW_CAP),
        ..params.clone()
    };
    let (certificate, report) = package(sys, &p, s.mu_hat, &at)?;
    Ok(AdmissibleDelay {
        mu_hat: s.mu_hat,
        delta,
        synthesis: Synthesis {
            certificate,
            report,
            search: Some(s),
        },
    })
}

/// [`NU_GRID`] plus `max_i λmax((A_i + A_iᵀ)/2)`, sorted and deduplicated.
pub fn nu_grid(sys: &SwitchedLinearSystem) -> Result<Vec<f64>, CertifyError> {
    let mut out = NU_GRID.to_vec();
    let ln = sys
        .modes()
        .iter()
        .map(log_norm)
        .collect::<Result<Vec<_>, _>>()
        .map_err(LmiError::from)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(ln);
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// [`max_admissible_delay`] for each `ν` in parallel; results in input order.
pub fn search_nu(
    sys: &SwitchedLinearSystem,
    params: &CertifyParams,
    nus: &[f64],
) -> Vec<(f64, Result<AdmissibleDelay, CertifyError>)> {
    nus.par_iter()
        .map(|&nu| {
            let p = CertifyParams { nu, ..params.clone() };
            (nu, max_admissible_delay(sys, &p))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn single_mode_needs_no_switch_constraints() {
        let sys = SwitchedLinearSystem::new(vec![Matrix::identity(2).scale(-1.0)]).unwrap();
        let p = CertifyParams::new(0.01, 1.0, 1.0, 0.0);
        let s = line_search_mu(&sys, &p).unwrap();
        assert_eq!(s.mu_hat, p.mu_tolerance);
        assert_eq!(s.evaluations.len(), 2);
    }

    #[test]
    fn monotonicity_guard() {
        use FeasibilityStatus::*;
        assert!(check_monotone(&[(0.9, Feasible), (0.5, InfeasibleEvidence), (0.7, Feasible)]).is_ok());
        assert!(matches!(
            check_monotone(&[(0.5, Feasible), (0.7, Inconclusive)]),
            Err(CertifyError::NonMonotone { .. })
        ));
    }

    #[test]
    fn parameter_validation() {
        let sys = crate::system::builtin::unstable_subsystems();
        let p = CertifyParams::new(0.001, 1.0, 0.5, 0.25);
        assert!(matches!(synthesize(&sys, &p, Some(0.5)), Err(CertifyError::InvalidParameter(_))));
        let p = CertifyParams::new(0.001, 0.0, 0.5, 0.25).with_route(Route::KRelax { k: 4 });
        assert!(matches!(synthesize(&sys, &p, Some(0.5)), Err(CertifyError::InvalidParameter(_))));
        let p = CertifyParams::new(0.001, 0.6, 2.3, 0.25);
        assert!(matches!(synthesize(&sys, &p, Some(1.0)), Err(CertifyError::InvalidParameter(_))));
        assert!(matches!(synthesize(&sys, &p, Some(0.9)), Err(CertifyError::WindowTooLong { .. })));
    }

    #[test]
    fn nu_grid_includes_log_norm() {
        let sys = crate::system::builtin::delay_in_switching(0.1);
        let g = nu_grid(&sys).unwrap();
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let ln = log_norm(sys.mode(0)).unwrap().max(log_norm(sys.mode(1)).unwrap());
        assert!(g.contains(&ln));
    }
}
