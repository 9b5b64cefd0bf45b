//! Complex-to-real embedding used by every subproblem: complex vector
//! variables as stacked (Re; Im) real blocks, Hermitian matrix variables as
//! the real symmetric embedding [Re, −Im; Im, Re].

use nalgebra::{Complex, DMatrix, DVector};

use crate::expr::{LinExpr, VarId};
use crate::program::ConicProgram;
use crate::solution::ConicSolution;

pub type C64 = Complex<f64>;

/// Complex n-vector variable: `re[i] + i·im[i]`.
#[derive(Clone, Debug)]
pub struct ComplexVec {
    pub re: Vec<VarId>,
    pub im: Vec<VarId>,
}

impl ComplexVec {
    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    /// Real/imag parts of `Σ_i h_i · x_i` for a known coefficient row `h`
    /// (no conjugation applied to either factor).
    pub fn dot(&self, h: &[C64]) -> (LinExpr, LinExpr) {
        let mut re = LinExpr::zero();
        let mut im = LinExpr::zero();
        for (i, c) in h.iter().enumerate() {
            re.add_term(self.re[i], c.re);
            re.add_term(self.im[i], -c.im);
            im.add_term(self.re[i], c.im);
            im.add_term(self.im[i], c.re);
        }
        (re, im)
    }

    /// Like [`dot`](Self::dot) but with the known vector conjugated:
    /// `Σ_i conj(h_i) · x_i`.
    pub fn dot_conj(&self, h: &DVector<C64>) -> (LinExpr, LinExpr) {
        let conj: Vec<C64> = h.iter().map(|c| c.conj()).collect();
        self.dot(&conj)
    }

    /// Stacked (Re; Im) expressions for norm constraints.
    pub fn stacked(&self) -> Vec<LinExpr> {
        self.re
            .iter()
            .chain(self.im.iter())
            .map(|&v| LinExpr::var(v))
            .collect()
    }

    pub fn value(&self, sol: &ConicSolution) -> DVector<C64> {
        DVector::from_iterator(
            self.len(),
            (0..self.len()).map(|i| C64::new(sol.value(self.re[i]), sol.value(self.im[i]))),
        )
    }

    /// Sum of |x_i|² as stacked squares (for power-style SOC constraints).
    pub fn norm_args(&self) -> Vec<LinExpr> {
        self.stacked()
    }
}

/// Complex affine map `u = B·p + u0` of a [`ComplexVec`]; yields real affine
/// expressions for the components of `u`.
pub fn affine_map(b: &DMatrix<C64>, p: &ComplexVec) -> Vec<(LinExpr, LinExpr)> {
    (0..b.nrows())
        .map(|r| {
            let row: Vec<C64> = b.row(r).iter().cloned().collect();
            p.dot(&row)
        })
        .collect()
}

impl ConicProgram {
    pub fn add_complex_vec(&mut self, name: &str, n: usize) -> ComplexVec {
        ComplexVec {
            re: self.add_vars(&format!("{name}.re"), n),
            im: self.add_vars(&format!("{name}.im"), n),
        }
    }

    pub fn add_hermitian(&mut self, name: &str, n: usize) -> HermitianVar {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for col in 0..n {
            for row in 0..=col {
                x.push(self.add_var(format!("{name}.x[{row},{col}]")));
                if row < col {
                    y.push(self.add_var(format!("{name}.y[{row},{col}]")));
                } else {
                    y.push(VarId(usize::MAX)); // diagonal imag part is zero
                }
            }
        }
        HermitianVar { n, x, y }
    }
}

/// Hermitian n×n matrix variable `V = X + iY` with X symmetric and Y
/// antisymmetric, stored by upper triangle (column-major). PSD-ness is
/// imposed through [`HermitianVar::psd_embedding`].
#[derive(Clone, Debug)]
pub struct HermitianVar {
    n: usize,
    x: Vec<VarId>,
    y: Vec<VarId>,
}

impl HermitianVar {
    pub fn dim(&self) -> usize {
        self.n
    }

    fn tri_index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row <= col);
        col * (col + 1) / 2 + row
    }

    /// X_{rc} for r ≤ c.
    fn x_var(&self, row: usize, col: usize) -> VarId {
        self.x[self.tri_index(row, col)]
    }

    /// Y_{rc} for r < c.
    fn y_var(&self, row: usize, col: usize) -> VarId {
        self.y[self.tri_index(row, col)]
    }

    pub fn diag_entry(&self, m: usize) -> LinExpr {
        LinExpr::var(self.x_var(m, m))
    }

    pub fn trace(&self) -> LinExpr {
        let mut e = LinExpr::zero();
        for m in 0..self.n {
            e.add_term(self.x_var(m, m), 1.0);
        }
        e
    }

    /// `Tr(V·C)` for a known Hermitian `C` (real-valued by Hermitian symmetry).
    pub fn trace_product(&self, c: &DMatrix<C64>) -> LinExpr {
        let mut e = LinExpr::zero();
        for m in 0..self.n {
            e.add_term(self.x_var(m, m), c[(m, m)].re);
        }
        for col in 1..self.n {
            for row in 0..col {
                e.add_term(self.x_var(row, col), 2.0 * c[(row, col)].re);
                e.add_term(self.y_var(row, col), -2.0 * c[(row, col)].im);
            }
        }
        e
    }

    /// `Re(eᴴ V e)` for a known complex vector `e` (equals `eᴴVe`, real).
    pub fn quad_form(&self, e: &DVector<C64>) -> LinExpr {
        let mut out = LinExpr::zero();
        for m in 0..self.n {
            out.add_term(self.x_var(m, m), e[m].norm_sqr());
        }
        for col in 1..self.n {
            for row in 0..col {
                let c = e[row].conj() * e[col];
                out.add_term(self.x_var(row, col), 2.0 * c.re);
                out.add_term(self.y_var(row, col), -2.0 * c.im);
            }
        }
        out
    }

    /// Upper triangle (column-major) of the 2n×2n real embedding
    /// W = [X, −Y; Y, X]; `W ⪰ 0 ⟺ V ⪰ 0`.
    pub fn psd_embedding(&self) -> (usize, Vec<LinExpr>) {
        let n = self.n;
        let dim = 2 * n;
        let entry = |row: usize, col: usize| -> LinExpr {
            // W quadrants: (0,0)=X, (0,1)=−Y, (1,0)=Y, (1,1)=X
            let (qr, r) = (row / n, row % n);
            let (qc, c) = (col / n, col % n);
            match (qr, qc) {
                (0, 0) | (1, 1) => {
                    let (a, b) = if r <= c { (r, c) } else { (c, r) };
                    LinExpr::var(self.x_var(a, b))
                }
                (0, 1) => {
                    // −Y_{r,c}
                    if r < c {
                        LinExpr::term(self.y_var(r, c), -1.0)
                    } else if r > c {
                        LinExpr::var(self.y_var(c, r)) // −Y_{r,c} = Y_{c,r}
                    } else {
                        LinExpr::zero()
                    }
                }
                (1, 0) => {
                    // Y_{r,c}
                    if r < c {
                        LinExpr::var(self.y_var(r, c))
                    } else if r > c {
                        LinExpr::term(self.y_var(c, r), -1.0)
                    } else {
                        LinExpr::zero()
                    }
                }
                _ => unreachable!(),
            }
        };
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for col in 0..dim {
            for row in 0..=col {
                upper.push(entry(row, col));
            }
        }
        (dim, upper)
    }

    pub fn value(&self, sol: &ConicSolution) -> DMatrix<C64> {
        let mut v = DMatrix::<C64>::zeros(self.n, self.n);
        for col in 0..self.n {
            for row in 0..=col {
                let x = sol.value(self.x_var(row, col));
                let y = if row < col {
                    sol.value(self.y_var(row, col))
                } else {
                    0.0
                };
                v[(row, col)] = C64::new(x, y);
                v[(col, row)] = C64::new(x, -y);
            }
        }
        v
    }
}

/// Complex n-vector to stacked real 2n-vector (Re; Im).
pub fn embed_vector(v: &DVector<C64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Inverse of [`embed_vector`].
pub fn unembed_vector(v: &DVector<f64>) -> DVector<C64> {
    let n = v.len() / 2;
    DVector::from_fn(n, |i, _| C64::new(v[i], v[i + n]))
}

/// Hermitian n×n to real symmetric 2n×2n `[Re, −Im; Im, Re]`.
pub fn embed_hermitian(v: &DMatrix<C64>) -> DMatrix<f64> {
    let n = v.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let (qr, rr) = (r / n, r % n);
        let (qc, cc) = (c / n, c % n);
        match (qr, qc) {
            (0, 0) | (1, 1) => v[(rr, cc)].re,
            (0, 1) => -v[(rr, cc)].im,
            (1, 0) => v[(rr, cc)].im,
            _ => unreachable!(),
        }
    })
}

/// Inverse of [`embed_hermitian`] (reads the (0,0) and (1,0) quadrants).
pub fn unembed_hermitian(w: &DMatrix<f64>) -> DMatrix<C64> {
    let n = w.nrows() / 2;
    DMatrix::from_fn(n, n, |r, c| C64::new(w[(r, c)], w[(n + r, c)]))
}
