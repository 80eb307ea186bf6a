//! End-to-end runs of the two built-in examples with their expected values.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::Serialize;

use crate::certify::{max_admissible_delay, synthesize, CertifyError, CertifyParams};
use crate::certificate::QuadraticCertificate;
use crate::lmi::max_window;
use crate::system::{
    builtin, periodic_signal, simulate, zero_crossing_time, SwitchedLinearSystem, SystemError,
    Trajectory,
};
use crate::verify::{fixed_time_product_check, g6, period_map_radius, VerificationReport, VerifyError};

#[derive(Debug, thiserror::Error)]
pub enum ReproduceError {
    #[error(transparent)]
    Certify(#[from] CertifyError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Signal(#[from] crate::system::SignalError),
}

/// One compared quantity.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: String,
    pub pass: bool,
}

impl Check {
    fn near(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            expected: format!("{} ± {}", g6(target), g6(tol)),
            pass: (value - target).abs() <= tol,
        }
    }

    fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            expected: format!("in [{}, {}]", g6(lo), g6(hi)),
            pass: value >= lo && value <= hi,
        }
    }

    fn at_least(name: &str, value: f64, lo: f64) -> Self {
        Self {
            name: name.into(),
            value,
            expected: format!(">= {}", g6(lo)),
            pass: value >= lo,
        }
    }

    fn flag(name: &str, ok: bool, expected: &str) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            expected: expected.into(),
            pass: ok,
        }
    }
}

/// Rows of checks rendered as a table.
pub struct CheckTable<'a>(pub &'a [Check]);

impl fmt::Display for CheckTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.0.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in self.0 {
            writeln!(
                f,
                "{} {:w$}  {:>12}  expected {}",
                if c.pass { "ok  " } else { "FAIL" },
                c.name,
                g6(c.value),
                c.expected
            )?;
        }
        Ok(())
    }
}

pub struct Example1 {
    pub eps: f64,
    pub system: SwitchedLinearSystem,
    pub tau_bar: f64,
    pub mu_hat: f64,
    pub delta: f64,
    pub product_radius: f64,
    pub period_radius: f64,
    /// `|x(3π/2)| / |x(0)|` along the dominant direction of the period map.
    pub period_growth: f64,
    pub certificate: QuadraticCertificate,
    pub report: VerificationReport,
    /// Four periods of the diverging periodic signal from `x0 = (0.5, 0)`.
    pub diverging: Trajectory,
    pub checks: Vec<Check>,
}

/// Delay-in-switching system: crossing time, `μ` search at `ν = 1.5`,
/// admissible delay, fixed-time product and the diverging periodic signal.
pub fn example1(eps: f64) -> Result<Example1, ReproduceError> {
    let system = builtin::delay_in_switching(eps);
    let tau_bar = zero_crossing_time(system.mode(0), 1, 0, 0.0, 4.0)?;
    let params = CertifyParams::new(0.001, tau_bar, tau_bar, 1.5);
    let adm = max_admissible_delay(&system, &params)?;
    let product_radius = fixed_time_product_check(&system, FRAC_PI_2, 2)?.max_radius;
    let pattern = [(0.75 * PI, 0), (0.75 * PI, 1)];
    let period_radius = period_map_radius(&system, &pattern)?;

    let one = periodic_signal(&pattern, 1.5 * PI)?;
    let x1 = simulate(&system, &one, &[1.0, 0.0], 0.01)?;
    let period_growth = x1.final_state().iter().map(|v| v * v).sum::<f64>().sqrt();
    let four = periodic_signal(&pattern, 6.0 * PI)?;
    let diverging = simulate(&system, &four, &[0.5, 0.0], 0.01)?;

    let closed_period = 4.0 * (-1.5 * eps * PI).exp();
    let checks = vec![
        Check::near("crossing time tau_bar", tau_bar, FRAC_PI_2, 1e-8),
        Check::within("mu_hat", adm.mu_hat, 0.84, 0.88),
        Check::at_least("delta", adm.delta, 0.09),
        Check::near("fixed-time product radius", product_radius, (-eps * PI).exp(), 1e-6),
        Check::near("periodic-signal period radius", period_radius, closed_period, 1e-6),
        Check::near("simulated one-period growth", period_growth, closed_period, 1e-6 * closed_period),
        Check::flag(
            "certificate verified",
            adm.synthesis.report.verdict.is_verified(),
            "verified",
        ),
    ];
    Ok(Example1 {
        eps,
        system,
        tau_bar,
        mu_hat: adm.mu_hat,
        delta: adm.delta,
        product_radius,
        period_radius,
        period_growth,
        certificate: adm.synthesis.certificate,
        report: adm.synthesis.report,
        diverging,
        checks,
    })
}

pub struct Example2 {
    pub system: SwitchedLinearSystem,
    pub tau2_bound: f64,
    pub certificate: QuadraticCertificate,
    pub report: VerificationReport,
    pub checks: Vec<Check>,
}

/// Unstable-subsystems system at `μ = 0.65, ν = 0.25, ρ = 0.001, τ1 = 0.6`,
/// certified on `[0.6, 2.3]`.
pub fn example2() -> Result<Example2, ReproduceError> {
    let system = builtin::unstable_subsystems();
    let (mu, nu, rho, tau1) = (0.65, 0.25, 0.001, 0.6);
    let tau2_bound = tau1 + max_window(mu, nu, rho);
    let syn = synthesize(&system, &CertifyParams::new(rho, tau1, 2.3, nu), Some(mu))?;
    let checks = vec![
        Check::near("tau2 bound", tau2_bound, 2.3163, 1e-3),
        Check::flag("feasible at mu = 0.65", true, "feasible"),
        Check::at_least("flow margin on 400 points", syn.report.grid_margin, -1e-8),
        Check::flag("certificate verified", syn.report.verdict.is_verified(), "verified"),
    ];
    Ok(Example2 {
        system,
        tau2_bound,
        certificate: syn.certificate,
        report: syn.report,
        checks,
    })
}
