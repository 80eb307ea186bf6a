//! Independent checks of certificates and empirical stability estimates.
//!
//! Nothing here touches the synthesis engine: the certificate conditions are
//! re-evaluated from the system matrices with `linalg` only.

mod empirical;

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use empirical::{
    empirical_growth, fixed_time_product_check, lemma1_equivalence_probe, period_map,
    period_map_radius, trajectory_decrease_check, CycleRadius, GrowthEstimate, Lemma1Probe,
    ProductScan, TrajectoryReport, TRAJECTORY_SAMPLE_DT,
};

use crate::certificate::{overshoot_bound, QuadraticCertificate, Route};
use crate::linalg::{mat_exp, min_eig, LinalgError, Matrix, SymMatrix};
use crate::system::{SignalError, SwitchedLinearSystem, SystemError};

pub const DEFAULT_GRID_POINTS: usize = 400;
/// Margins down to `−VERIFY_TOL_REL · scale` are accepted.
pub const VERIFY_TOL_REL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("certificate does not fit the system: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Fingerprint,
    Positivity,
    Switch,
    Flow,
    Growth,
    Window,
    Overshoot,
    Trajectory,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Fingerprint => "system fingerprint",
            Condition::Positivity => "positive definiteness",
            Condition::Switch => "switch decrease",
            Condition::Flow => "flow decrease",
            Condition::Growth => "growth bound",
            Condition::Window => "window inequality",
            Condition::Overshoot => "overshoot constant",
            Condition::Trajectory => "sampled trajectories",
        };
        f.write_str(s)
    }
}

/// Where a condition fails. Modes are 0-based; displayed 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub condition: Condition,
    pub mode: Option<usize>,
    pub next_mode: Option<usize>,
    pub t: Option<f64>,
    /// Offending value: a minimum eigenvalue, slack or ratio.
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Verified,
    Refuted { witness: Witness },
    NumericalWarning { reason: String },
}

impl Verdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, Verdict::Verified)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamsEcho {
    pub rho: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub mu: f64,
    pub nu: f64,
    pub route: Route,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub fingerprint_match: bool,
    /// Smallest eigenvalue over all `P_i^±`.
    pub pd_margin: f64,
    /// Worst `λmin(e^{−2ρt}P_i^- − e^{A_iᵀt}P_i^+e^{A_it})` over the grid.
    pub grid_margin: f64,
    /// Grid margin lowered by a curvature estimate of the dip between samples.
    pub grid_margin_between: f64,
    /// Worst `λmin(e^{−2ρτ1}P_i^+ − e^{A_iᵀτ1}P_j^-e^{A_iτ1})` over `i ≠ j`.
    pub switch_margin: f64,
    /// Worst `λmin(2νP_i^+ − A_iᵀP_i^+ − P_i^+A_i)`.
    pub growth_margin: f64,
    /// `−(ln μ + (τ2−τ1)(ν+ρ))`, or `+∞` when `ν + ρ ≤ 0`.
    pub window_slack: f64,
    pub required_overshoot: f64,
    pub tolerance: f64,
    pub grid_points: usize,
    pub trajectory: Option<TrajectoryReport>,
    pub params: ParamsEcho,
}

impl VerificationReport {
    /// Folds a sampled-trajectory check into the verdict: any violation refutes.
    pub fn with_trajectory(mut self, tr: TrajectoryReport) -> Self {
        let violations = tr.envelope_violations + tr.chain_violations;
        if violations > 0 && !matches!(self.verdict, Verdict::Refuted { .. }) {
            self.verdict = Verdict::Refuted {
                witness: Witness {
                    condition: Condition::Trajectory,
                    mode: None,
                    next_mode: None,
                    t: None,
                    value: tr.worst_envelope_ratio.max(tr.worst_chain_ratio),
                    detail: format!(
                        "{} envelope and {} switching-chain violations",
                        tr.envelope_violations, tr.chain_violations
                    ),
                },
            };
        }
        self.trajectory = Some(tr);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `x` with six significant digits.
pub fn g6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        let decimals = (5 - e).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.5e}");
        let (m, exp) = s.split_once('e').expect("exponent form");
        let m = m.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exp}")
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        writeln!(
            f,
            "certificate: route {}, rho {}, tau1 {}, tau2 {}, mu {}, nu {}",
            p.route,
            g6(p.rho),
            g6(p.tau1),
            g6(p.tau2),
            g6(p.mu),
            g6(p.nu)
        )?;
        writeln!(f, "  fingerprint match   {}", self.fingerprint_match)?;
        writeln!(f, "  min eig of P        {}", g6(self.pd_margin))?;
        writeln!(
            f,
            "  flow margin         {} ({} grid points, between samples ~{})",
            g6(self.grid_margin),
            self.grid_points,
            g6(self.grid_margin_between)
        )?;
        writeln!(f, "  switch margin       {}", g6(self.switch_margin))?;
        writeln!(f, "  growth margin       {}", g6(self.growth_margin))?;
        writeln!(f, "  window slack        {}", g6(self.window_slack))?;
        writeln!(f, "  required overshoot  {}", g6(self.required_overshoot))?;
        writeln!(f, "  tolerance           {}", g6(self.tolerance))?;
        if let Some(tr) = &self.trajectory {
            writeln!(
                f,
                "  trajectories        {} signals x {} states, {} envelope / {} chain violations (worst ratios {} / {})",
                tr.n_signals,
                tr.n_states,
                tr.envelope_violations,
                tr.chain_violations,
                g6(tr.worst_envelope_ratio),
                g6(tr.worst_chain_ratio)
            )?;
        }
        match &self.verdict {
            Verdict::Verified => write!(f, "verdict: VERIFIED"),
            Verdict::NumericalWarning { reason } => write!(f, "verdict: NUMERICAL WARNING: {reason}"),
            Verdict::Refuted { witness } => {
                write!(f, "verdict: REFUTED by {}", witness.condition)?;
                if let Some(m) = witness.mode {
                    write!(f, ", mode {}", m + 1)?;
                }
                if let Some(m) = witness.next_mode {
                    write!(f, " -> mode {}", m + 1)?;
                }
                if let Some(t) = witness.t {
                    write!(f, ", t = {}", g6(t))?;
                }
                write!(f, ", value {}", g6(witness.value))?;
                if !witness.detail.is_empty() {
                    write!(f, " ({})", witness.detail)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone)]
struct Worst {
    value: f64,
    mode: Option<usize>,
    next_mode: Option<usize>,
    t: Option<f64>,
}

impl Worst {
    fn none() -> Self {
        Self {
            value: f64::INFINITY,
            mode: None,
            next_mode: None,
            t: None,
        }
    }

    fn keep_min(self, other: Self) -> Self {
        if other.value < self.value {
            other
        } else {
            self
        }
    }

    fn witness(&self, condition: Condition, detail: String) -> Witness {
        Witness {
            condition,
            mode: self.mode,
            next_mode: self.next_mode,
            t: self.t,
            value: self.value,
            detail,
        }
    }
}

fn check_shape(cert: &QuadraticCertificate, sys: &SwitchedLinearSystem) -> Result<(), VerifyError> {
    if cert.p_plus.len() != sys.mode_count() || cert.p_minus.len() != sys.mode_count() {
        return Err(VerifyError::Shape(format!(
            "{} modes in the system, {} / {} matrices in the certificate",
            sys.mode_count(),
            cert.p_plus.len(),
            cert.p_minus.len()
        )));
    }
    if cert.p_plus.iter().chain(&cert.p_minus).any(|p| p.dim() != sys.dim()) {
        return Err(VerifyError::Shape(format!(
            "certificate matrices are not {}x{}",
            sys.dim(),
            sys.dim()
        )));
    }
    let params_ok = cert.rho.is_finite()
        && cert.tau1.is_finite()
        && cert.tau1 >= 0.0
        && cert.tau2.is_finite()
        && cert.tau2 >= cert.tau1
        && cert.mu.is_finite()
        && cert.nu.is_finite();
    if !params_ok {
        return Err(VerifyError::InvalidParameter(format!(
            "rho={}, tau1={}, tau2={}, mu={}, nu={}",
            cert.rho, cert.tau1, cert.tau2, cert.mu, cert.nu
        )));
    }
    Ok(())
}

/// Subintervals per refinement step of a flagged grid interval.
const REFINE_SPLIT: usize = 8;
/// Refinement levels before a remaining dip becomes a warning.
const REFINE_DEPTH: usize = 4;

fn flow_value(cert: &QuadraticCertificate, a: &Matrix, i: usize, t: f64) -> Result<f64, VerifyError> {
    let e = mat_exp(a, t)?;
    let m = cert.p_minus[i]
        .scale((-2.0 * cert.rho * t).exp())
        .sub(&cert.p_plus[i].congruence(&e));
    Ok(min_eig(&m))
}

/// Per-mode samples of `λmin(e^{−2ρt}P_i^- − e^{A_iᵀt}P_i^+e^{A_it})`.
fn flow_samples(
    cert: &QuadraticCertificate,
    sys: &SwitchedLinearSystem,
    times: &[f64],
) -> Result<Vec<Vec<f64>>, VerifyError> {
    (0..sys.mode_count())
        .map(|i| {
            times
                .par_iter()
                .map(|&t| flow_value(cert, sys.mode(i), i, t))
                .collect::<Result<Vec<f64>, VerifyError>>()
        })
        .collect()
}

/// Lower estimate of the margin on each interval `[t_k, t_{k+1}]`: the
/// smaller endpoint minus an eighth of the adjacent second differences.
fn dip_estimates(ms: &[f64]) -> Vec<f64> {
    let d: Vec<f64> = ms
        .windows(3)
        .map(|w| (w[0] - 2.0 * w[1] + w[2]).abs())
        .collect();
    (0..ms.len().saturating_sub(1))
        .map(|k| {
            let left = k.checked_sub(1).and_then(|j| d.get(j)).copied().unwrap_or(0.0);
            let right = d.get(k).copied().unwrap_or(0.0);
            ms[k].min(ms[k + 1]) - left.max(right) / 8.0
        })
        .collect()
}

struct FlowScan {
    tol: f64,
    worst: Worst,
    between: f64,
}

/// Resamples intervals whose dip estimate falls below `-tol`, recursively.
fn refine_flow(
    cert: &QuadraticCertificate,
    a: &Matrix,
    i: usize,
    ts: &[f64],
    ms: &[f64],
    depth: usize,
    scan: &mut FlowScan,
) -> Result<(), VerifyError> {
    let tol = scan.tol;
    for (k, dip) in dip_estimates(ms).into_iter().enumerate() {
        // A negative sample already refutes; resampling cannot change that.
        if scan.worst.value < -tol {
            return Ok(());
        }
        if dip >= -tol || depth == REFINE_DEPTH {
            scan.between = scan.between.min(dip);
            continue;
        }
        let (t0, t1) = (ts[k], ts[k + 1]);
        let sub_t: Vec<f64> = (0..=REFINE_SPLIT)
            .map(|j| t0 + (t1 - t0) * j as f64 / REFINE_SPLIT as f64)
            .collect();
        let mut sub_m = Vec::with_capacity(sub_t.len());
        sub_m.push(ms[k]);
        for &t in &sub_t[1..REFINE_SPLIT] {
            let v = flow_value(cert, a, i, t)?;
            scan.worst = scan.worst.clone().keep_min(Worst {
                value: v,
                mode: Some(i),
                next_mode: None,
                t: Some(t),
            });
            sub_m.push(v);
        }
        sub_m.push(ms[k + 1]);
        refine_flow(cert, a, i, &sub_t, &sub_m, depth + 1, scan)?;
    }
    Ok(())
}

/// Checks the certificate conditions directly from the system matrices.
///
/// The flow condition is sampled at `grid_points` equispaced times on
/// `[0, τ2 − τ1]`; the switch condition is exact per ordered pair. Grid
/// intervals where a curvature estimate suggests the flow margin dips below
/// tolerance are resampled; a dip that survives the refinement turns an
/// otherwise passing check into a numerical warning.
pub fn verify_certificate(
    cert: &QuadraticCertificate,
    sys: &SwitchedLinearSystem,
    grid_points: usize,
) -> Result<VerificationReport, VerifyError> {
    check_shape(cert, sys)?;
    if grid_points < 2 {
        return Err(VerifyError::InvalidParameter(format!(
            "grid_points must be at least 2, got {grid_points}"
        )));
    }
    let scale = cert.scale();
    let tol = VERIFY_TOL_REL * scale;
    let fingerprint_match = cert.fingerprint == sys.fingerprint();

    let mut pd = Worst::none();
    let mut pd_label = String::new();
    for (i, (pp, pm)) in cert.p_plus.iter().zip(&cert.p_minus).enumerate() {
        for (p, sign) in [(pp, '+'), (pm, '-')] {
            let v = min_eig(p);
            if v < pd.value {
                pd = Worst {
                    value: v,
                    mode: Some(i),
                    next_mode: None,
                    t: None,
                };
                pd_label = format!("P_{}^{sign}", i + 1);
            }
        }
    }

    let window = cert.tau2 - cert.tau1;
    let times: Vec<f64> = if window == 0.0 {
        vec![0.0]
    } else {
        (0..grid_points)
            .map(|g| window * g as f64 / (grid_points - 1) as f64)
            .collect()
    };
    let samples = flow_samples(cert, sys, &times)?;
    let mut grid = Worst::none();
    for (i, ms) in samples.iter().enumerate() {
        for (k, &v) in ms.iter().enumerate() {
            grid = grid.keep_min(Worst {
                value: v,
                mode: Some(i),
                next_mode: None,
                t: Some(times[k]),
            });
        }
    }
    // Refined samples can refute but do not enter the reported grid margin.
    let mut scan = FlowScan {
        tol,
        worst: grid.clone(),
        between: grid.value,
    };
    for (i, ms) in samples.iter().enumerate() {
        refine_flow(cert, sys.mode(i), i, &times, ms, 0, &mut scan)?;
    }
    let flow = scan.worst;
    let between = scan.between;

    let mut switch = Worst::none();
    let decay = (-2.0 * cert.rho * cert.tau1).exp();
    for i in 0..sys.mode_count() {
        let e = mat_exp(sys.mode(i), cert.tau1)?;
        for j in 0..sys.mode_count() {
            if i == j {
                continue;
            }
            let m = cert.p_plus[i]
                .scale(decay)
                .sub(&cert.p_minus[j].congruence(&e));
            switch = switch.keep_min(Worst {
                value: min_eig(&m),
                mode: Some(i),
                next_mode: Some(j),
                t: None,
            });
        }
    }

    let mut growth = Worst::none();
    for (i, a) in sys.modes().iter().enumerate() {
        let p = cert.p_plus[i].to_matrix();
        let lyap = &(&a.transpose() * &p) + &(&p * a);
        let m = cert.p_plus[i]
            .scale(2.0 * cert.nu)
            .sub(&SymMatrix::from_matrix_sym_part(&lyap)?);
        growth = growth.keep_min(Worst {
            value: min_eig(&m),
            mode: Some(i),
            next_mode: None,
            t: None,
        });
    }

    let window_slack = if cert.nu + cert.rho <= 0.0 {
        f64::INFINITY
    } else {
        -(cert.mu.ln() + window * (cert.nu + cert.rho))
    };
    let required_overshoot =
        overshoot_bound(&cert.p_plus, &cert.p_minus, cert.nu, cert.rho, cert.tau1);

    let verdict = if !fingerprint_match {
        Verdict::Refuted {
            witness: Witness {
                condition: Condition::Fingerprint,
                mode: None,
                next_mode: None,
                t: None,
                value: f64::NAN,
                detail: format!(
                    "certificate was made for {}, system is {}",
                    cert.fingerprint,
                    sys.fingerprint()
                ),
            },
        }
    } else if !(pd.value > 0.0) {
        Verdict::Refuted {
            witness: pd.witness(Condition::Positivity, format!("{pd_label} is not positive definite")),
        }
    } else if !(switch.value >= -tol) {
        Verdict::Refuted {
            witness: switch.witness(Condition::Switch, String::new()),
        }
    } else if !(flow.value >= -tol) {
        Verdict::Refuted {
            witness: flow.witness(Condition::Flow, String::new()),
        }
    } else if !(growth.value >= -tol) {
        Verdict::Refuted {
            witness: growth.witness(Condition::Growth, String::new()),
        }
    } else if !(window_slack >= -1e-12) {
        Verdict::Refuted {
            witness: Witness {
                condition: Condition::Window,
                mode: None,
                next_mode: None,
                t: None,
                value: window_slack,
                detail: "ln(mu) + (tau2 - tau1)(nu + rho) > 0".into(),
            },
        }
    } else if !(cert.overshoot_m >= required_overshoot * (1.0 - 1e-12)) {
        Verdict::Refuted {
            witness: Witness {
                condition: Condition::Overshoot,
                mode: None,
                next_mode: None,
                t: None,
                value: cert.overshoot_m,
                detail: format!("needs at least {}", g6(required_overshoot)),
            },
        }
    } else if between < -tol {
        Verdict::NumericalWarning {
            reason: format!(
                "flow margin may dip to ~{} between grid points; refine the grid",
                g6(between)
            ),
        }
    } else {
        Verdict::Verified
    };

    Ok(VerificationReport {
        verdict,
        fingerprint_match,
        pd_margin: pd.value,
        grid_margin: grid.value,
        grid_margin_between: between,
        switch_margin: switch.value,
        growth_margin: growth.value,
        window_slack,
        required_overshoot,
        tolerance: tol,
        grid_points,
        trajectory: None,
        params: ParamsEcho {
            rho: cert.rho,
            tau1: cert.tau1,
            tau2: cert.tau2,
            mu: cert.mu,
            nu: cert.nu,
            route: cert.route,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(g6(0.730402691), "0.730403");
        assert_eq!(g6(2.0), "2");
        assert_eq!(g6(123456.7), "123457");
        assert_eq!(g6(1234567.0), "1.23457e6");
        assert_eq!(g6(-1.5e-7), "-1.5e-7");
        assert_eq!(g6(1e-8), "1e-8");
        assert_eq!(g6(0.0), "0");
    }
}
