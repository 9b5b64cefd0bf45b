//! Solve-interface tests: trivial programs with known optima, an analytic SDP
//! oracle, infeasibility detection, and determinism.

use conic::{BackendRegistry, ConicProgram, LinExpr, SolveStatus};
use nalgebra::{Complex, DMatrix, DVector};

type C64 = Complex<f64>;

const TOL: f64 = 1e-8;

#[test]
fn scalar_lower_bound_binds() {
    // minimize x s.t. x >= 1  ->  x = 1
    let mut p = ConicProgram::new();
    let x = p.add_var("x");
    p.ge_zero(LinExpr::var(x) - LinExpr::constant(1.0), "floor");
    p.minimize(LinExpr::var(x));
    let sol = p.solve(TOL).unwrap();
    assert!(sol.status.is_optimal());
    assert!((sol.value(x) - 1.0).abs() < 1e-6);
    assert!((sol.objective - 1.0).abs() < 1e-6);
}

#[test]
fn fixed_diag_psd_trace() {
    // maximize Tr(V) s.t. V PSD 2x2, diag(V) = (0.5, 0.5) -> 1.0
    let mut p = ConicProgram::new();
    let v00 = p.add_var("v00");
    let v01 = p.add_var("v01");
    let v11 = p.add_var("v11");
    p.eq_zero(LinExpr::var(v00) - LinExpr::constant(0.5), "diag0");
    p.eq_zero(LinExpr::var(v11) - LinExpr::constant(0.5), "diag1");
    p.psd(
        2,
        vec![LinExpr::var(v00), LinExpr::var(v01), LinExpr::var(v11)],
        "v-psd",
    );
    p.maximize(LinExpr::var(v00) + LinExpr::var(v11));
    let sol = p.solve(TOL).unwrap();
    assert!(sol.status.is_optimal());
    assert!((sol.objective - 1.0).abs() < 1e-6);
}

/// Analytic SDP oracle: max ⟨C, V⟩ over V ⪰ 0, Tr(V) = 1 equals λ_max(C).
#[test]
fn trace_ball_sdp_matches_eigenvalue_oracle() {
    let c = DMatrix::<f64>::from_row_slice(
        3,
        3,
        &[2.0, 0.7, -0.3, 0.7, 1.0, 0.2, -0.3, 0.2, -1.5],
    );
    let lam_max = c
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);

    let mut p = ConicProgram::new();
    // upper triangle vars of V, column-major
    let mut upper = Vec::new();
    for col in 0..3usize {
        for row in 0..=col {
            upper.push((row, col, p.add_var(format!("v[{row},{col}]"))));
        }
    }
    let mut obj = LinExpr::zero();
    let mut trace = LinExpr::zero();
    for &(row, col, v) in &upper {
        if row == col {
            obj.add_term(v, c[(row, col)]);
            trace.add_term(v, 1.0);
        } else {
            obj.add_term(v, 2.0 * c[(row, col)]);
        }
    }
    p.eq_zero(trace - LinExpr::constant(1.0), "unit-trace");
    p.psd(
        3,
        upper.iter().map(|&(_, _, v)| LinExpr::var(v)).collect(),
        "v-psd",
    );
    p.maximize(obj);
    let sol = p.solve(TOL).unwrap();
    assert!(sol.status.is_optimal());
    assert!(
        (sol.objective - lam_max).abs() < 1e-6,
        "sdp {} vs eig {}",
        sol.objective,
        lam_max
    );
}

#[test]
fn quad_over_lin_binds() {
    // minimize rho s.t. x² ≤ rho·d, x = 1, d = 1  ->  rho = 1
    let mut p = ConicProgram::new();
    let x = p.add_var("x");
    let rho = p.add_var("rho");
    let d = p.add_var("d");
    p.eq_zero(LinExpr::var(x) - LinExpr::constant(1.0), "x-pin");
    p.eq_zero(LinExpr::var(d) - LinExpr::constant(1.0), "d-pin");
    p.quad_over_lin(LinExpr::var(x), LinExpr::var(rho), LinExpr::var(d), "qol");
    p.minimize(LinExpr::var(rho));
    let sol = p.solve(TOL).unwrap();
    assert!(sol.status.is_optimal());
    assert!((sol.value(rho) - 1.0).abs() < 1e-6);
}

#[test]
fn quad_over_lin_random_triples_respect_inequality() {
    // random feasible (x, rho, d) minimizing rho at fixed x,d always
    // satisfies x² ≤ rho·d up to tolerance
    let cases = [(0.0, 2.0), (1.5, 0.5), (3.0, 4.0), (0.2, 9.0)];
    for (xv, dv) in cases {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let rho = p.add_var("rho");
        let d = p.add_var("d");
        p.eq_zero(LinExpr::var(x) - LinExpr::constant(xv), "x-pin");
        p.eq_zero(LinExpr::var(d) - LinExpr::constant(dv), "d-pin");
        p.quad_over_lin(LinExpr::var(x), LinExpr::var(rho), LinExpr::var(d), "qol");
        p.minimize(LinExpr::var(rho));
        let sol = p.solve(TOL).unwrap();
        assert!(sol.status.is_optimal());
        let lhs = xv * xv;
        let rhs = sol.value(rho) * dv;
        assert!(lhs <= rhs + 1e-6, "x²={lhs} > rho·d={rhs}");
        assert!((rhs - lhs).abs() < 1e-5, "rho should bind: {rhs} vs {lhs}");
    }
}

#[test]
fn infeasible_box_is_reported_infeasible() {
    // x >= 1 and x <= 0
    let mut p = ConicProgram::new();
    let x = p.add_var("x");
    p.ge_zero(LinExpr::var(x) - LinExpr::constant(1.0), "floor");
    p.le(LinExpr::var(x), LinExpr::constant(0.0), "ceiling");
    p.minimize(LinExpr::var(x));
    let sol = p.solve(TOL).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn identical_programs_solve_identically() {
    let build = || {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.soc(
            vec![LinExpr::var(x), LinExpr::var(y)],
            LinExpr::constant(2.0),
            "ball",
        );
        p.ge_zero(LinExpr::var(y) - LinExpr::constant(0.3), "y-floor");
        p.maximize(LinExpr::var(x) + LinExpr::var(y) * 0.25);
        p
    };
    let a = build().solve(TOL).unwrap();
    let b = build().solve(TOL).unwrap();
    assert_eq!(a.status, b.status);
    assert!((a.objective - b.objective).abs() < 1e-8);
    for (va, vb) in a.values.iter().zip(b.values.iter()) {
        assert!((va - vb).abs() < 1e-8);
    }
}

#[test]
fn registry_reports_unknown_backend() {
    let mut p = ConicProgram::new();
    let x = p.add_var("x");
    p.ge_zero(LinExpr::var(x), "x-sign");
    p.minimize(LinExpr::var(x));
    let reg = BackendRegistry::with_defaults();
    assert!(reg.names().contains(&"clarabel".to_string()));
    let err = p.solve_with(&reg, "simplex", 1e-8).unwrap_err();
    assert!(err.to_string().contains("simplex"));
}

#[test]
fn hermitian_variable_psd_and_trace_product() {
    // max Tr(V C) s.t. Tr(V) = 1, V ⪰ 0 (complex Hermitian)  ->  λ_max(C)
    let c = DMatrix::<C64>::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0, 0.0),
            C64::new(0.3, -0.8),
            C64::new(0.3, 0.8),
            C64::new(-0.5, 0.0),
        ],
    );
    let lam_max = c
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);

    let mut p = ConicProgram::new();
    let v = p.add_hermitian("v", 2);
    p.eq_zero(v.trace() - LinExpr::constant(1.0), "unit-trace");
    let (dim, upper) = v.psd_embedding();
    p.psd(dim, upper, "v-psd");
    p.maximize(v.trace_product(&c));
    let sol = p.solve(TOL).unwrap();
    assert!(sol.status.is_optimal());
    assert!(
        (sol.objective - lam_max).abs() < 1e-6,
        "complex sdp {} vs λ_max {}",
        sol.objective,
        lam_max
    );
    // the recovered matrix is Hermitian PSD with unit trace
    let vm = v.value(&sol);
    let tr: f64 = (0..2).map(|i| vm[(i, i)].re).sum();
    assert!((tr - 1.0).abs() < 1e-6);
    let eigs = vm.symmetric_eigen().eigenvalues;
    assert!(eigs.iter().all(|&e| e > -1e-7));
}

#[test]
fn complex_dot_matches_direct_arithmetic() {
    // pin a complex 2-vector by equality constraints, check dot expressions
    let h = vec![C64::new(0.5, -1.0), C64::new(2.0, 0.25)];
    let target = DVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.75)]);
    let mut p = ConicProgram::new();
    let z = p.add_complex_vec("z", 2);
    for i in 0..2 {
        p.eq_zero(
            LinExpr::var(z.re[i]) - LinExpr::constant(target[i].re),
            "pin-re",
        );
        p.eq_zero(
            LinExpr::var(z.im[i]) - LinExpr::constant(target[i].im),
            "pin-im",
        );
    }
    let (re, im) = z.dot(&h);
    p.minimize(LinExpr::zero());
    let sol = p.solve(TOL).unwrap();
    let got = C64::new(sol.expr_value(&re), sol.expr_value(&im));
    let want = h[0] * target[0] + h[1] * target[1];
    assert!((got - want).norm() < 1e-7, "{got} vs {want}");
}
