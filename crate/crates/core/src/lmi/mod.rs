//! Affine matrix inequalities over symmetric matrix variables, and the
//! builders that turn a switched system plus dwell-time parameters into the
//! inequalities a multiple-Lyapunov certificate must satisfy.

mod conditions;
mod expr;

use serde::Serialize;
use thiserror::Error;

pub use conditions::{
    build_interval_conditions_lmi, build_k_relaxation, build_quadratic_grid_conditions,
    build_switch_conditions, check_window_inequality, max_window, positivity_conditions,
    CertificateVars, KChain, KRelaxation,
};
pub use expr::{AffineSymExpr, Assignment, SymVar, Term, VarId};

/// Default relative margin turning `≻ 0` into `⪰ margin·I`.
pub const DEFAULT_MARGIN_REL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmiError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("constraint '{label}' references undeclared variable {var:?}")]
    UndeclaredVariable { label: String, var: VarId },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("assignment is missing variable {0:?}")]
    MissingVariable(VarId),
}

/// `expr ⪰ margin·I`.
#[derive(Debug, Clone, Serialize)]
pub struct Constraint {
    pub label: String,
    pub expr: AffineSymExpr,
}

impl Constraint {
    pub fn new(label: impl Into<String>, expr: AffineSymExpr) -> Self {
        Self {
            label: label.into(),
            expr,
        }
    }
}

/// A feasibility problem: find symmetric matrices with every constraint
/// `⪰ margin·I` and `trace(first variable) = normalization`.
#[derive(Debug, Clone, Serialize)]
pub struct LmiProblem {
    vars: Vec<SymVar>,
    constraints: Vec<Constraint>,
    normalization: Option<f64>,
    margin_rel: f64,
}

impl Default for LmiProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl LmiProblem {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            constraints: Vec::new(),
            normalization: None,
            margin_rel: DEFAULT_MARGIN_REL,
        }
    }

    pub fn declare(&mut self, dim: usize, label: impl Into<String>) -> SymVar {
        let v = SymVar::new(VarId(self.vars.len()), dim, label.into());
        self.vars.push(v.clone());
        v
    }

    pub fn add(&mut self, c: Constraint) -> Result<(), LmiError> {
        for t in c.expr.terms() {
            let declared = self.vars.get(t.var.0);
            if declared.map(SymVar::dim) != Some(t.var_dim()) {
                return Err(LmiError::UndeclaredVariable {
                    label: c.label.clone(),
                    var: t.var,
                });
            }
        }
        self.constraints.push(c);
        Ok(())
    }

    pub fn extend(&mut self, cs: impl IntoIterator<Item = Constraint>) -> Result<(), LmiError> {
        cs.into_iter().try_for_each(|c| self.add(c))
    }

    /// Fixes the trace of the first declared variable.
    pub fn normalize_trace(&mut self, value: f64) {
        self.normalization = Some(value);
    }

    pub fn set_margin_rel(&mut self, margin_rel: f64) {
        self.margin_rel = margin_rel;
    }

    pub fn vars(&self) -> &[SymVar] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn normalization(&self) -> Option<f64> {
        self.normalization
    }

    /// Absolute margin: the relative margin times the per-dimension trace
    /// normalization (`trace / dim` of the normalized variable).
    pub fn margin(&self) -> f64 {
        match (self.normalization, self.vars.first()) {
            (Some(tr), Some(v)) => self.margin_rel * tr / v.dim() as f64,
            _ => self.margin_rel,
        }
    }

    /// Multiplies every constraint constant and the normalization by `s`.
    pub fn rescaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.constraints {
            c.expr = c.expr.with_constant(c.expr.constant_part().scale(s));
        }
        out.normalization = self.normalization.map(|n| n * s);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }

    /// Smallest eigenvalue of each constraint at `asg`, in order.
    pub fn constraint_min_eigs(&self, asg: &Assignment) -> Result<Vec<f64>, LmiError> {
        self.constraints
            .iter()
            .map(|c| Ok(crate::linalg::min_eig(&c.expr.evaluate(asg)?)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Matrix, SymMatrix};

    #[test]
    fn undeclared_variable_rejected() {
        let mut p = LmiProblem::new();
        let mut other = LmiProblem::new();
        let x = other.declare(2, "X");
        let _ = other.declare(2, "Y");
        let y = other.vars()[1].clone();
        p.declare(2, "only");
        let c = Constraint::new("bad", AffineSymExpr::zero(2).plus_var(&y, 1.0).unwrap());
        assert!(matches!(p.add(c), Err(LmiError::UndeclaredVariable { .. })));
        let ok = Constraint::new("ok", AffineSymExpr::zero(2).plus_var(&x, 1.0).unwrap());
        assert!(p.add(ok).is_ok());
    }

    #[test]
    fn margin_scales_with_normalization() {
        let mut p = LmiProblem::new();
        p.declare(4, "P");
        p.normalize_trace(8.0);
        assert!((p.margin() - 2e-6).abs() < 1e-18);
        assert!((p.rescaled(3.0).margin() - 6e-6).abs() < 1e-18);
    }

    #[test]
    fn json_lists_variables_and_terms() {
        let mut p = LmiProblem::new();
        let x = p.declare(2, "P_1^-");
        p.normalize_trace(2.0);
        let a = Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]);
        p.add(Constraint::new(
            "c",
            AffineSymExpr::constant(SymMatrix::identity(2))
                .plus_lyapunov(&x, &a, -1.0)
                .unwrap(),
        ))
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(v["vars"][0]["label"], "P_1^-");
        assert_eq!(v["normalization"], 2.0);
        assert_eq!(v["constraints"][0]["expr"]["terms"].as_array().unwrap().len(), 1);
        assert!(v["margin_rel"].as_f64().unwrap() > 0.0);
    }
}
