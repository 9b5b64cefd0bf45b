//! Convexification toolkit: tangent/bilinear surrogate operators, robust
//! norm-ball bounds, the PSD-split linearization of indefinite quadratic
//! lower bounds, and a trust-region majorant for `2^x`. Every convexified
//! constraint in the two optimization steps is assembled from these.
//!
//! Conventions: a "lower" operator never exceeds its target and touches it at
//! the expansion point; an "upper" operator never falls below it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum SurrogateError {
    #[error("expansion denominator must be positive, got {0}")]
    NonPositiveExpansion(f64),
}

/// Concave lower bound on the product `x·y`, tangent at `(x0, y0)`:
/// `½(x0+y0)(x+y) − ¼(x0+y0)² − ¼(x−y)²`.
pub fn theta_lower(x: f64, y: f64, x0: f64, y0: f64) -> f64 {
    let s0 = x0 + y0;
    0.5 * s0 * (x + y) - 0.25 * s0 * s0 - 0.25 * (x - y) * (x - y)
}

/// Convex upper bound on the product `x·y`, tangent at `(x0, y0)`:
/// `¼(x+y)² + ¼(x0−y0)² − ½(x0−y0)(x−y)`.
pub fn theta_upper(x: f64, y: f64, x0: f64, y0: f64) -> f64 {
    let d0 = x0 - y0;
    0.25 * (x + y) * (x + y) + 0.25 * d0 * d0 - 0.5 * d0 * (x - y)
}

/// Affine lower bound on `2^x`, tangent at `x0`: `2^{x0}·(1 + ln2·(x − x0))`.
pub fn gamma_lower(x: f64, x0: f64) -> f64 {
    x0.exp2() * (1.0 + std::f64::consts::LN_2 * (x - x0))
}

/// Affine lower bound on `|hᴴu|²/x` over `x > 0`, tangent at `(u0, x0)`:
/// `2·Re{u0ᴴ h hᴴ u}/x0 − |hᴴu0|²·x/x0²`.
pub fn psi_lower(
    u: &DVector<Complex64>,
    x: f64,
    u0: &DVector<Complex64>,
    x0: f64,
    h: &DVector<Complex64>,
) -> Result<f64, SurrogateError> {
    if x0 <= 0.0 {
        return Err(SurrogateError::NonPositiveExpansion(x0));
    }
    let hu0 = h.dotc(u0); // hᴴ u0
    let hu = h.dotc(u);
    let cross = (hu0.conj() * hu).re; // Re{u0ᴴ h hᴴ u}
    Ok(2.0 * cross / x0 - hu0.norm_sqr() * x / (x0 * x0))
}

/// Exact maximum of `|(ĝ+Δg)ᴴu|` over `‖Δg‖₂ ≤ σ`: `|ĝᴴu| + σ‖u‖₂`.
pub fn robust_abs_max(g_hat: &DVector<Complex64>, u: &DVector<Complex64>, sigma: f64) -> f64 {
    g_hat.dotc(u).norm() + sigma * u.norm()
}

fn mu_of(g_hat: &DVector<Complex64>, sigma: f64) -> f64 {
    sigma * sigma + 2.0 * sigma * g_hat.norm()
}

/// Conservative lower bound on `min_{‖Δg‖≤σ} |(ĝ+Δg)ᴴu|²`:
/// `|ĝᴴu|² − (σ² + 2σ‖ĝ‖)·‖u‖²` (may be negative).
pub fn robust_sq_min(g_hat: &DVector<Complex64>, u: &DVector<Complex64>, sigma: f64) -> f64 {
    g_hat.dotc(u).norm_sqr() - mu_of(g_hat, sigma) * u.norm_squared()
}

/// Upper bound on `max_{‖Δg‖≤σ} |(ĝ+Δg)ᴴu|²`:
/// `|ĝᴴu|² + (σ² + 2σ‖ĝ‖)·‖u‖²`.
pub fn robust_sq_max(g_hat: &DVector<Complex64>, u: &DVector<Complex64>, sigma: f64) -> f64 {
    g_hat.dotc(u).norm_sqr() + mu_of(g_hat, sigma) * u.norm_squared()
}

/// Eigenvalues below this magnitude are treated as zero when splitting a
/// Hermitian matrix into PSD parts.
pub const PSD_SPLIT_EPS: f64 = 1e-10;

/// Concave lower bound on the indefinite quadratic form `uᴴAu`, tangent at
/// `u0`: split `A = A⁺ − A⁻` (both PSD by eigenvalue clipping) and use
/// `2Re{u0ᴴA⁺u} − u0ᴴA⁺u0 − uᴴA⁻u`.
///
/// The bound is returned in evaluation form: `2Re{wᴴu} + offset − ‖Lᴴu‖²`
/// with `w = A⁺u0`, `offset = −u0ᴴA⁺u0`, `L = (A⁻)^{1/2}`.
#[derive(Clone, Debug)]
pub struct QuadLowerBound {
    pub lin: DVector<Complex64>,
    pub offset: f64,
    pub sqrt_neg: DMatrix<Complex64>,
}

pub fn psd_split_quad_lower(u0: &DVector<Complex64>, a: &DMatrix<Complex64>) -> QuadLowerBound {
    PsdSplit::new(a).at(u0)
}

/// Expansion-independent part of the PSD split of a Hermitian matrix:
/// `A = A⁺ − A⁻` with both parts PSD. `(A⁻)^{1/2}` is kept in factored form
/// for second-order-cone encodings of the convex part.
#[derive(Clone, Debug)]
pub struct PsdSplit {
    pub a_plus: DMatrix<Complex64>,
    pub sqrt_neg: DMatrix<Complex64>,
}

impl PsdSplit {
    pub fn new(a: &DMatrix<Complex64>) -> Self {
        let n = a.nrows();
        let eig = a.clone().symmetric_eigen();
        let mut a_plus = DMatrix::<Complex64>::zeros(n, n);
        let mut sqrt_neg = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            let lam = eig.eigenvalues[i];
            let v = eig.eigenvectors.column(i);
            if lam > PSD_SPLIT_EPS {
                let outer = &v * v.adjoint();
                a_plus += outer * Complex64::new(lam, 0.0);
            } else if lam < -PSD_SPLIT_EPS {
                let outer = &v * v.adjoint();
                sqrt_neg += outer * Complex64::new((-lam).sqrt(), 0.0);
            }
        }
        Self { a_plus, sqrt_neg }
    }

    /// Tangent lower bound at the expansion point `u0`.
    pub fn at(&self, u0: &DVector<Complex64>) -> QuadLowerBound {
        let lin = &self.a_plus * u0;
        let offset = -(u0.dotc(&lin).re);
        QuadLowerBound {
            lin,
            offset,
            sqrt_neg: self.sqrt_neg.clone(),
        }
    }
}

impl QuadLowerBound {
    pub fn eval(&self, u: &DVector<Complex64>) -> f64 {
        let cross = 2.0 * self.lin.dotc(u).re; // 2Re{wᴴu}... w = A⁺u0
        let neg = (&self.sqrt_neg * u).norm_squared();
        cross + self.offset - neg
    }
}

/// Trust-region quadratic majorant of `2^x`, tangent at `x0`:
/// `2^{x0}·(1 + ln2·(x−x0) + c·(x−x0)²)` with `c = ln2²·2^T/2`, valid for
/// `|x − x0| ≤ T`. Used where a convex exponential constraint must be
/// expressed with second-order cones only.
#[derive(Clone, Copy, Debug)]
pub struct Exp2Majorant {
    pub x0: f64,
    pub base: f64,
    pub lin_coef: f64,
    pub quad_coef: f64,
    pub trust: f64,
}

/// Default trust half-width in bits for [`exp2_upper`].
pub const EXP2_TRUST: f64 = 2.0;

pub fn exp2_upper(x0: f64, trust: f64) -> Exp2Majorant {
    let ln2 = std::f64::consts::LN_2;
    let base = x0.exp2();
    Exp2Majorant {
        x0,
        base,
        lin_coef: base * ln2,
        quad_coef: base * 0.5 * ln2 * ln2 * trust.exp2(),
        trust,
    }
}

impl Exp2Majorant {
    pub fn eval(&self, x: f64) -> f64 {
        let d = x - self.x0;
        self.base + self.lin_coef * d + self.quad_coef * d * d
    }

    pub fn in_trust(&self, x: f64) -> bool {
        (x - self.x0).abs() <= self.trust + 1e-12
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn rand_cvec(rng: &mut ChaCha8Rng, n: usize) -> DVector<Complex64> {
        DVector::from_fn(n, |_, _| {
            Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
        })
    }

    #[test]
    fn theta_lower_tangency_and_symmetry_case() {
        assert!((theta_lower(0.5, 2.0, 0.5, 2.0) - 1.0).abs() < 1e-12);
        // expansion at the origin: −¼(x−y)² which equals xy for x = −y
        let v = theta_lower(0.7, -0.7, 0.0, 0.0);
        assert!((v - (0.7 * -0.7)).abs() < 1e-12);
    }

    #[test]
    fn theta_upper_tangency_and_am_gm() {
        assert!((theta_upper(0.5, 2.0, 0.5, 2.0) - 1.0).abs() < 1e-12);
        // equal expansion values reduce to ¼(x+y)² ≥ xy
        let v = theta_upper(3.0, 0.2, 1.0, 1.0);
        assert!((v - 0.25 * (3.2f64) * 3.2).abs() < 1e-12);
        assert!(v >= 3.0 * 0.2);
    }

    #[test]
    fn theta_bounds_hold_over_samples() {
        let mut r = rng(101);
        for _ in 0..10_000 {
            let (x, y) = (r.random::<f64>() * 8.0 - 4.0, r.random::<f64>() * 8.0 - 4.0);
            let (x0, y0) = (r.random::<f64>() * 8.0 - 4.0, r.random::<f64>() * 8.0 - 4.0);
            let lo = theta_lower(x, y, x0, y0);
            let hi = theta_upper(x, y, x0, y0);
            assert!(lo <= x * y + 1e-9, "lower bound violated");
            assert!(hi >= x * y - 1e-9, "upper bound violated");
        }
    }

    #[test]
    fn gamma_lower_values() {
        assert!((gamma_lower(1.0, 1.0) - 2.0).abs() < 1e-12);
        assert!((gamma_lower(0.0, 0.0) - 1.0).abs() < 1e-12);
        let v = gamma_lower(2.0, 1.0);
        assert!((v - 2.0 * (1.0 + std::f64::consts::LN_2)).abs() < 1e-12);
        assert!(v <= 4.0);
    }

    #[test]
    fn psi_lower_tangency_and_orthogonal_case() {
        let mut r = rng(7);
        let h = rand_cvec(&mut r, 3);
        let u0 = rand_cvec(&mut r, 3);
        let x0 = 1.7;
        let at_exp = psi_lower(&u0, x0, &u0, x0, &h).unwrap();
        let exact = h.dotc(&u0).norm_sqr() / x0;
        assert!((at_exp - exact).abs() < 1e-12);

        // u0 ⟂ h: surrogate collapses to 0 ≤ |hᴴu|²/x
        let h2 = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let u0_perp = DVector::from_vec(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        let u = rand_cvec(&mut r, 2);
        let v = psi_lower(&u, 2.0, &u0_perp, 1.0, &h2).unwrap();
        assert!(v.abs() < 1e-12);
        assert!(v <= h2.dotc(&u).norm_sqr() / 2.0 + 1e-12);
    }

    #[test]
    fn psi_lower_is_global_under_estimate() {
        let mut r = rng(23);
        for _ in 0..10_000 {
            let h = rand_cvec(&mut r, 2);
            let u = rand_cvec(&mut r, 2);
            let u0 = rand_cvec(&mut r, 2);
            let x = 0.1 + 9.9 * r.random::<f64>();
            let x0 = 0.1 + 9.9 * r.random::<f64>();
            let v = psi_lower(&u, x, &u0, x0, &h).unwrap();
            assert!(v <= h.dotc(&u).norm_sqr() / x + 1e-9);
        }
    }

    #[test]
    fn psi_lower_rejects_nonpositive_expansion() {
        let h = DVector::from_element(2, Complex64::new(1.0, 0.0));
        assert!(psi_lower(&h, 1.0, &h, 0.0, &h).is_err());
    }

    #[test]
    fn robust_abs_max_degenerate_cases() {
        let e1 = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        assert!((robust_abs_max(&e1, &e1, 0.0) - 1.0).abs() < 1e-15);
        assert!((robust_abs_max(&e1, &e1, 0.1) - 1.1).abs() < 1e-15);
        let zero = DVector::zeros(2);
        assert_eq!(robust_abs_max(&e1, &zero, 0.5), 0.0);
    }

    #[test]
    fn robust_abs_max_is_attained_by_ball_sampling() {
        use crate::scenario::draw_uncertainty;
        let mut r = rng(31);
        let g = rand_cvec(&mut r, 3);
        let u = rand_cvec(&mut r, 3);
        let sigma = 0.3;
        let bound = robust_abs_max(&g, &u, sigma);
        let mut best: f64 = 0.0;
        for _ in 0..100_000 {
            let d = draw_uncertainty(3, sigma, &mut r);
            let v = (&g + &d).dotc(&u).norm();
            assert!(v <= bound + 1e-9);
            best = best.max(v);
        }
        assert!(best >= 0.99 * bound, "sampled max {best} vs bound {bound}");
    }

    #[test]
    fn robust_sq_bounds_bracket_samples() {
        use crate::scenario::draw_uncertainty;
        let mut r = rng(53);
        let g = rand_cvec(&mut r, 3);
        let u = rand_cvec(&mut r, 3);
        let sigma = 0.2;
        let lo = robust_sq_min(&g, &u, sigma);
        let hi = robust_sq_max(&g, &u, sigma);
        for _ in 0..10_000 {
            let d = draw_uncertainty(3, sigma, &mut r);
            let v = (&g + &d).dotc(&u).norm_sqr();
            assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }

    #[test]
    fn robust_sq_min_collinear_case() {
        // ĝ = u = e1, σ = 0.1: bound 1 − 0.21 = 0.79 below the true min 0.81
        let e1 = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let v = robust_sq_min(&e1, &e1, 0.1);
        assert!((v - 0.79).abs() < 1e-12);
        assert!(v <= 0.9f64.powi(2));
        assert!((robust_sq_min(&e1, &e1, 0.0) - 1.0).abs() < 1e-15);
        assert!((robust_sq_max(&e1, &e1, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psd_split_tangency_psd_and_negdef_cases() {
        let mut r = rng(77);
        // PSD A: surrogate at u = u0 equals u0ᴴAu0
        let b = rand_cvec(&mut r, 3);
        let a_psd = &b * b.adjoint();
        let u0 = rand_cvec(&mut r, 3);
        let s = psd_split_quad_lower(&u0, &a_psd);
        let exact = u0.dotc(&(&a_psd * &u0)).re;
        assert!((s.eval(&u0) - exact).abs() < 1e-10);

        // A = −I: surrogate is exactly −‖u‖²
        let a_neg = -DMatrix::<Complex64>::identity(3, 3);
        let s2 = psd_split_quad_lower(&u0, &a_neg);
        let u = rand_cvec(&mut r, 3);
        assert!((s2.eval(&u) + u.norm_squared()).abs() < 1e-10);
    }

    #[test]
    fn psd_split_is_global_lower_bound_for_indefinite_forms() {
        let mut r = rng(99);
        for _ in 0..200 {
            let g = rand_cvec(&mut r, 3);
            let mu = r.random::<f64>() * 2.0;
            let a = &g * g.adjoint() - DMatrix::<Complex64>::identity(3, 3) * Complex64::new(mu, 0.0);
            let u0 = rand_cvec(&mut r, 3);
            let s = psd_split_quad_lower(&u0, &a);
            for _ in 0..50 {
                let u = rand_cvec(&mut r, 3);
                let exact = u.dotc(&(&a * &u)).re;
                assert!(s.eval(&u) <= exact + 1e-9);
            }
            let exact0 = u0.dotc(&(&a * &u0)).re;
            assert!((s.eval(&u0) - exact0).abs() < 1e-9);
        }
    }

    #[test]
    fn exp2_majorant_dominates_on_trust_interval() {
        let mut r = rng(5);
        for _ in 0..10_000 {
            let x0 = r.random::<f64>() * 8.0 - 2.0;
            let m = exp2_upper(x0, EXP2_TRUST);
            let x = x0 + (r.random::<f64>() * 2.0 - 1.0) * EXP2_TRUST;
            assert!(m.eval(x) >= x.exp2() - 1e-9, "majorant below 2^x at {x}");
        }
        let m = exp2_upper(1.5, EXP2_TRUST);
        assert!((m.eval(1.5) - 1.5f64.exp2()).abs() < 1e-12);
    }
}
