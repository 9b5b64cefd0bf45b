//! Lowering of the conic IR to Clarabel's `min qᵀx s.t. Ax + s = b, s ∈ K`
//! standard form.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::expr::LinExpr;
use crate::program::{ConicProgram, ConstraintKind, Sense};
use crate::backend::SolverBackend;
use crate::solution::{ConicSolution, SolveError, SolveStatus};

#[derive(Default)]
pub struct ClarabelBackend;

struct RowBuilder {
    triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
}

impl RowBuilder {
    fn new() -> Self {
        Self {
            triplets: Vec::new(),
            b: Vec::new(),
        }
    }

    /// Append a row encoding `s_row = expr`, i.e. A_row = −coeffs, b_row = const.
    fn push(&mut self, expr: &LinExpr) {
        let row = self.b.len();
        for (v, c) in &expr.terms {
            self.triplets.push((row, v.index(), -c));
        }
        self.b.push(expr.constant);
    }

    fn into_csc(self, n_cols: usize) -> (CscMatrix<f64>, Vec<f64>) {
        let mut t = self.triplets;
        t.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut counts = vec![0usize; n_cols];
        let mut rowval: Vec<usize> = Vec::with_capacity(t.len());
        let mut nzval: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((c, r)) {
                *nzval.last_mut().unwrap() += v;
            } else {
                rowval.push(r);
                nzval.push(v);
                counts[c] += 1;
                last = Some((c, r));
            }
        }
        let mut colptr = vec![0usize; n_cols + 1];
        for c in 0..n_cols {
            colptr[c + 1] = colptr[c] + counts[c];
        }
        let m = self.b.len();
        (CscMatrix::new(m, n_cols, colptr, rowval, nzval), self.b)
    }
}

impl SolverBackend for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve(&self, program: &ConicProgram, tol: f64) -> Result<ConicSolution, SolveError> {
        let n = program.n_vars();
        let mut rows = RowBuilder::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

        // Zero and nonnegative rows are grouped into one cone each.
        let mut n_zero = 0usize;
        for c in program.constraints() {
            if let ConstraintKind::Zero(es) = &c.kind {
                for e in es {
                    rows.push(e);
                    n_zero += 1;
                }
            }
        }
        if n_zero > 0 {
            cones.push(SupportedConeT::ZeroConeT(n_zero));
        }
        let mut n_nonneg = 0usize;
        for c in program.constraints() {
            if let ConstraintKind::Nonneg(es) = &c.kind {
                for e in es {
                    rows.push(e);
                    n_nonneg += 1;
                }
            }
        }
        if n_nonneg > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(n_nonneg));
        }

        let sqrt2 = std::f64::consts::SQRT_2;
        for c in program.constraints() {
            match &c.kind {
                ConstraintKind::Zero(_) | ConstraintKind::Nonneg(_) => {}
                ConstraintKind::Soc { args, bound } => {
                    rows.push(bound);
                    for a in args {
                        rows.push(a);
                    }
                    cones.push(SupportedConeT::SecondOrderConeT(args.len() + 1));
                }
                ConstraintKind::QuadOverLin { args, rho, den } => {
                    // Σa² ≤ ρ·d  ⟺  ‖[2a; ρ−d]‖ ≤ ρ+d
                    rows.push(&(rho.clone() + den.clone()));
                    for a in args {
                        rows.push(&(a.clone() * 2.0));
                    }
                    rows.push(&(rho.clone() - den.clone()));
                    cones.push(SupportedConeT::SecondOrderConeT(args.len() + 2));
                }
                ConstraintKind::Psd { dim, upper } => {
                    // svec: upper triangle column-major, off-diagonals × √2
                    let mut idx = 0usize;
                    for col in 0..*dim {
                        for row in 0..=col {
                            let e = &upper[idx];
                            idx += 1;
                            if row == col {
                                rows.push(e);
                            } else {
                                rows.push(&(e.clone() * sqrt2));
                            }
                        }
                    }
                    cones.push(SupportedConeT::PSDTriangleConeT(*dim));
                }
            }
        }

        let (a, b) = rows.into_csc(n);
        let p = CscMatrix::<f64>::zeros((n, n));
        let (obj, sense) = program.objective();
        let mut q = vec![0.0; n];
        let sign = match sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        for (v, c) in &obj.terms {
            q[v.index()] += sign * c;
        }

        let settings = DefaultSettings {
            verbose: false,
            tol_feas: tol,
            tol_gap_abs: tol,
            tol_gap_rel: tol,
            ..Default::default()
        };
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| SolveError::Backend(format!("{e:?}")))?;
        solver.solve();

        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::MaxIterations,
            _ => SolveStatus::NumericalFailure,
        };
        let values = sol.x.clone();
        let objective = obj.eval(&values);
        Ok(ConicSolution {
            status,
            values,
            objective,
            iterations: sol.iterations,
            residual_primal: sol.r_prim,
            residual_dual: sol.r_dual,
        })
    }
}
