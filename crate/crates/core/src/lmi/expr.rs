use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LmiError;
use crate::linalg::{Matrix, SymMatrix};

/// Index of a variable inside its problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A symmetric `dim × dim` decision variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymVar {
    id: VarId,
    dim: usize,
    label: String,
}

impl SymVar {
    pub(crate) fn new(id: VarId, dim: usize, label: String) -> Self {
        Self { id, dim, label }
    }

    pub fn id(&self) -> VarId {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// `scale · (Lᵀ X R + Rᵀ X L) / 2`; with `L = R` a plain congruence.
#[derive(Debug, Clone, Serialize)]
pub struct Term {
    pub var: VarId,
    var_dim: usize,
    pub left: Matrix,
    pub right: Matrix,
    pub scale: f64,
}

impl Term {
    pub fn var_dim(&self) -> usize {
        self.var_dim
    }

    /// Value of the term for a given variable value.
    pub fn apply(&self, x: &SymMatrix) -> SymMatrix {
        if self.left == self.right {
            return x.congruence(&self.left).scale(self.scale);
        }
        let y = &(&self.left.transpose() * &x.to_matrix()) * &self.right;
        SymMatrix::from_matrix_sym_part(&y)
            .expect("square by construction")
            .scale(self.scale)
    }
}

/// `constant + Σ terms`, always symmetric.
#[derive(Debug, Clone, Serialize)]
pub struct AffineSymExpr {
    dim: usize,
    constant: SymMatrix,
    terms: Vec<Term>,
}

impl AffineSymExpr {
    pub fn zero(dim: usize) -> Self {
        Self::constant(SymMatrix::zeros(dim))
    }

    pub fn constant(c: SymMatrix) -> Self {
        Self {
            dim: c.dim(),
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn constant_part(&self) -> &SymMatrix {
        &self.constant
    }

    pub(crate) fn with_constant(&self, c: SymMatrix) -> Self {
        Self {
            constant: c,
            ..self.clone()
        }
    }

    /// Adds `scale · sym(Lᵀ X R)`.
    pub fn plus_term(
        mut self,
        var: &SymVar,
        left: &Matrix,
        right: &Matrix,
        scale: f64,
    ) -> Result<Self, LmiError> {
        let shape_ok = left.rows() == var.dim()
            && right.rows() == var.dim()
            && left.cols() == self.dim
            && right.cols() == self.dim;
        if !shape_ok {
            return Err(LmiError::Dimension(format!(
                "term on {} ({}x{}) with factors {}x{}, {}x{} in a {}x{} expression",
                var.label(),
                var.dim(),
                var.dim(),
                left.rows(),
                left.cols(),
                right.rows(),
                right.cols(),
                self.dim,
                self.dim
            )));
        }
        self.terms.push(Term {
            var: var.id(),
            var_dim: var.dim(),
            left: left.clone(),
            right: right.clone(),
            scale,
        });
        Ok(self)
    }

    /// Adds `scale · X`.
    pub fn plus_var(self, var: &SymVar, scale: f64) -> Result<Self, LmiError> {
        let id = Matrix::identity(var.dim());
        self.plus_term(var, &id, &id, scale)
    }

    /// Adds `scale · Fᵀ X F`.
    pub fn plus_congruence(self, var: &SymVar, f: &Matrix, scale: f64) -> Result<Self, LmiError> {
        self.plus_term(var, f, f, scale)
    }

    /// Adds `scale · (Aᵀ X + X A)`.
    pub fn plus_lyapunov(self, var: &SymVar, a: &Matrix, scale: f64) -> Result<Self, LmiError> {
        let id = Matrix::identity(var.dim());
        self.plus_term(var, a, &id, 2.0 * scale)
    }

    pub fn evaluate(&self, asg: &Assignment) -> Result<SymMatrix, LmiError> {
        let mut out = self.constant.clone();
        for t in &self.terms {
            out.axpy(1.0, &t.apply(asg.get(t.var)?));
        }
        Ok(out)
    }
}

/// Values for the variables of a problem.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Assignment {
    values: BTreeMap<VarId, SymMatrix>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, var: VarId, value: SymMatrix) {
        self.values.insert(var, value);
    }

    pub fn get(&self, var: VarId) -> Result<&SymMatrix, LmiError> {
        self.values.get(&var).ok_or(LmiError::MissingVariable(var))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, &SymMatrix)> {
        self.values.iter().map(|(k, v)| (*k, v))
    }
}
