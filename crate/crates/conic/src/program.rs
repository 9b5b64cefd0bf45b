//! Conic program builder: scalar variables, an affine objective, and a list
//! of labelled cone constraints.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::expr::{LinExpr, VarId};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// One cone constraint over affine expressions.
#[derive(Clone, Debug)]
pub enum ConstraintKind {
    /// Every expression equals zero.
    Zero(Vec<LinExpr>),
    /// Every expression is nonnegative.
    Nonneg(Vec<LinExpr>),
    /// `‖args‖₂ ≤ bound`.
    Soc { args: Vec<LinExpr>, bound: LinExpr },
    /// `Σ argsᵢ² ≤ rho · den` with `rho, den ≥ 0` implied (rotated cone).
    QuadOverLin {
        args: Vec<LinExpr>,
        rho: LinExpr,
        den: LinExpr,
    },
    /// Symmetric matrix (upper triangle, column-major, length dim·(dim+1)/2)
    /// is positive semidefinite.
    Psd { dim: usize, upper: Vec<LinExpr> },
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub label: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ProgramError {
    #[error("constraint `{0}` has a non-finite coefficient")]
    NonFinite(String),
    #[error("constraint `{label}` references unregistered variable {var}")]
    UnknownVar { label: String, var: usize },
    #[error("constraint `{0}` needs a nonempty source label")]
    EmptyLabel(String),
    #[error("PSD block in `{label}` expects {expect} upper-triangle entries, got {got}")]
    PsdShape {
        label: String,
        expect: usize,
        got: usize,
    },
}

/// Solver-agnostic conic program over real scalar variables.
#[derive(Debug, Default)]
pub struct ConicProgram {
    var_names: Vec<String>,
    constraints: Vec<Constraint>,
    objective: LinExpr,
    sense: Option<Sense>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> VarId {
        self.var_names.push(name.into());
        VarId(self.var_names.len() - 1)
    }

    pub fn add_vars(&mut self, prefix: &str, n: usize) -> Vec<VarId> {
        (0..n).map(|i| self.add_var(format!("{prefix}[{i}]"))).collect()
    }

    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.var_names[v.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn minimize(&mut self, obj: LinExpr) {
        self.objective = obj;
        self.sense = Some(Sense::Minimize);
    }

    pub fn maximize(&mut self, obj: LinExpr) {
        self.objective = obj;
        self.sense = Some(Sense::Maximize);
    }

    pub fn objective(&self) -> (&LinExpr, Sense) {
        (&self.objective, self.sense.unwrap_or(Sense::Minimize))
    }

    fn push(&mut self, kind: ConstraintKind, label: impl Into<String>) {
        self.constraints.push(Constraint {
            kind,
            label: label.into(),
        });
    }

    /// `expr == 0`.
    pub fn eq_zero(&mut self, expr: LinExpr, label: impl Into<String>) {
        self.push(ConstraintKind::Zero(vec![expr]), label);
    }

    /// `expr ≥ 0`.
    pub fn ge_zero(&mut self, expr: LinExpr, label: impl Into<String>) {
        self.push(ConstraintKind::Nonneg(vec![expr]), label);
    }

    /// Batch of nonnegativity rows under one label.
    pub fn ge_zero_all(&mut self, exprs: Vec<LinExpr>, label: impl Into<String>) {
        self.push(ConstraintKind::Nonneg(exprs), label);
    }

    /// `lhs ≤ rhs`.
    pub fn le(&mut self, lhs: LinExpr, rhs: LinExpr, label: impl Into<String>) {
        self.ge_zero(rhs - lhs, label);
    }

    /// `‖args‖₂ ≤ bound`.
    pub fn soc(&mut self, args: Vec<LinExpr>, bound: LinExpr, label: impl Into<String>) {
        self.push(ConstraintKind::Soc { args, bound }, label);
    }

    /// `Σ argsᵢ² ≤ bound`.
    pub fn sum_sq_le(&mut self, args: Vec<LinExpr>, bound: LinExpr, label: impl Into<String>) {
        // ‖[a; (b−1)/2]‖ ≤ (b+1)/2
        let mut v = args;
        v.push((bound.clone() - LinExpr::constant(1.0)) * 0.5);
        let rhs = (bound + LinExpr::constant(1.0)) * 0.5;
        self.soc(v, rhs, label);
    }

    /// `x² ≤ rho · den` (rotated second-order cone; `rho, den ≥ 0` implied).
    pub fn quad_over_lin(
        &mut self,
        x: LinExpr,
        rho: LinExpr,
        den: LinExpr,
        label: impl Into<String>,
    ) {
        self.push(
            ConstraintKind::QuadOverLin {
                args: vec![x],
                rho,
                den,
            },
            label,
        );
    }

    /// `Σ argsᵢ² ≤ rho · den`.
    pub fn sum_sq_le_product(
        &mut self,
        args: Vec<LinExpr>,
        rho: LinExpr,
        den: LinExpr,
        label: impl Into<String>,
    ) {
        self.push(ConstraintKind::QuadOverLin { args, rho, den }, label);
    }

    /// Symmetric-matrix PSD constraint. `upper` holds the upper triangle in
    /// column-major order, i.e. (0,0), (0,1), (1,1), (0,2), (1,2), (2,2), …
    pub fn psd(&mut self, dim: usize, upper: Vec<LinExpr>, label: impl Into<String>) {
        self.push(ConstraintKind::Psd { dim, upper }, label);
    }

    /// Structural validation: labels nonempty, variables registered, finite
    /// coefficients, PSD blocks square.
    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.n_vars();
        let check = |label: &str, exprs: &[&LinExpr]| -> Result<(), ProgramError> {
            for e in exprs {
                if !e.is_finite() {
                    return Err(ProgramError::NonFinite(label.to_string()));
                }
                for (v, _) in &e.terms {
                    if v.0 >= n {
                        return Err(ProgramError::UnknownVar {
                            label: label.to_string(),
                            var: v.0,
                        });
                    }
                }
            }
            Ok(())
        };
        for c in &self.constraints {
            if c.label.trim().is_empty() {
                return Err(ProgramError::EmptyLabel(format!("{:?}", c.kind)));
            }
            match &c.kind {
                ConstraintKind::Zero(es) | ConstraintKind::Nonneg(es) => {
                    check(&c.label, &es.iter().collect::<Vec<_>>())?
                }
                ConstraintKind::Soc { args, bound } => {
                    let mut v: Vec<&LinExpr> = args.iter().collect();
                    v.push(bound);
                    check(&c.label, &v)?
                }
                ConstraintKind::QuadOverLin { args, rho, den } => {
                    let mut v: Vec<&LinExpr> = args.iter().collect();
                    v.push(rho);
                    v.push(den);
                    check(&c.label, &v)?
                }
                ConstraintKind::Psd { dim, upper } => {
                    let expect = dim * (dim + 1) / 2;
                    if upper.len() != expect {
                        return Err(ProgramError::PsdShape {
                            label: c.label.clone(),
                            expect,
                            got: upper.len(),
                        });
                    }
                    check(&c.label, &upper.iter().collect::<Vec<_>>())?
                }
            }
        }
        check("objective", &[&self.objective])
    }

    /// Worst violation per constraint at the given primal point (positive =
    /// violated). SOC rows report `‖args‖ − bound`, rotated cones
    /// `Σa² − ρ·d`, PSD blocks `−λ_min`.
    pub fn constraint_violations(&self, x: &[f64]) -> Vec<(String, f64)> {
        self.constraints
            .iter()
            .map(|c| {
                let v = match &c.kind {
                    ConstraintKind::Zero(es) => es
                        .iter()
                        .map(|e| e.eval(x).abs())
                        .fold(0.0f64, f64::max),
                    ConstraintKind::Nonneg(es) => es
                        .iter()
                        .map(|e| -e.eval(x))
                        .fold(f64::NEG_INFINITY, f64::max),
                    ConstraintKind::Soc { args, bound } => {
                        let n: f64 = args.iter().map(|a| a.eval(x).powi(2)).sum::<f64>().sqrt();
                        n - bound.eval(x)
                    }
                    ConstraintKind::QuadOverLin { args, rho, den } => {
                        let q: f64 = args.iter().map(|a| a.eval(x).powi(2)).sum();
                        let (r, d) = (rho.eval(x), den.eval(x));
                        (q - r * d).max(-r).max(-d)
                    }
                    ConstraintKind::Psd { dim, upper } => {
                        let mut m = nalgebra::DMatrix::<f64>::zeros(*dim, *dim);
                        let mut idx = 0;
                        for col in 0..*dim {
                            for row in 0..=col {
                                let v = upper[idx].eval(x);
                                idx += 1;
                                m[(row, col)] = v;
                                m[(col, row)] = v;
                            }
                        }
                        -m.symmetric_eigen()
                            .eigenvalues
                            .iter()
                            .cloned()
                            .fold(f64::INFINITY, f64::min)
                    }
                };
                (c.label.clone(), v)
            })
            .collect()
    }

    /// Plain-text dump, one constraint per line with its source label.
    pub fn dump(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::new();
        let fmt_expr = |e: &LinExpr| -> String {
            let mut s = String::new();
            for (v, c) in &e.terms {
                let _ = write!(s, "{c:+.6}*{} ", self.var_names[v.0]);
            }
            let _ = write!(s, "{:+.6}", e.constant);
            s
        };
        let (obj, sense) = self.objective();
        let _ = writeln!(out, "{sense:?} {}", fmt_expr(obj));
        for c in &self.constraints {
            match &c.kind {
                ConstraintKind::Zero(es) => {
                    for e in es {
                        let _ = writeln!(out, "[{}] {} == 0", c.label, fmt_expr(e));
                    }
                }
                ConstraintKind::Nonneg(es) => {
                    for e in es {
                        let _ = writeln!(out, "[{}] {} >= 0", c.label, fmt_expr(e));
                    }
                }
                ConstraintKind::Soc { args, bound } => {
                    let parts: Vec<String> = args.iter().map(fmt_expr).collect();
                    let _ = writeln!(
                        out,
                        "[{}] norm({}) <= {}",
                        c.label,
                        parts.join("; "),
                        fmt_expr(bound)
                    );
                }
                ConstraintKind::QuadOverLin { args, rho, den } => {
                    let parts: Vec<String> = args.iter().map(fmt_expr).collect();
                    let _ = writeln!(
                        out,
                        "[{}] sumsq({}) <= ({})*({})",
                        c.label,
                        parts.join("; "),
                        fmt_expr(rho),
                        fmt_expr(den)
                    );
                }
                ConstraintKind::Psd { dim, .. } => {
                    let _ = writeln!(out, "[{}] psd block dim {}", c.label, dim);
                }
            }
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_empty_label() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.ge_zero(LinExpr::var(x), "");
        assert!(matches!(p.validate(), Err(ProgramError::EmptyLabel(_))));
    }

    #[test]
    fn validate_rejects_bad_psd_shape() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.psd(2, vec![LinExpr::var(x)], "bad-psd");
        assert!(matches!(p.validate(), Err(ProgramError::PsdShape { .. })));
    }

    #[test]
    fn validate_rejects_non_finite() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.ge_zero(LinExpr::term(x, f64::NAN), "nan-coef");
        assert!(matches!(p.validate(), Err(ProgramError::NonFinite(_))));
    }
}
