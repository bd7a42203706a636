//! Invariance and inequality properties across modules.

use std::sync::OnceLock;

use hsl_core::graph_solver::{solve_dirichlet, GraphSolution, GridDomain, InitialGuess, SolverOptions};
use hsl_core::rotational::{build_sphere, DEFAULT_STEP};
use hsl_core::sphere_field::{tangent_frame, CurvatureField, DerivativeMode, Formula, ZonalFunction};
use hsl_core::stability::checks::desir_slack;
use hsl_core::stability::{assemble_stability_operator, principal_eigenvalue, DiscreteSurface};
use hsl_core::{Mat2, Mat3, Vec3};
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(z, phi)| {
        let r = (1.0 - z * z).sqrt();
        Vec3::new(r * phi.cos(), r * phi.sin(), z)
    })
}

fn rotation() -> impl Strategy<Value = Mat3> {
    (unit(), -3.0f64..3.0).prop_map(|(axis, angle)| {
        *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).matrix()
    })
}

fn quadratic_field() -> impl Strategy<Value = Formula> {
    (prop::array::uniform9(-1.0f64..1.0), prop::array::uniform3(-1.0f64..1.0), 1.0f64..3.0).prop_map(|(a, b, c)| {
        Formula::Quadratic { a: [[a[0], a[1], a[2]], [a[3], a[4], a[5]], [a[6], a[7], a[8]]], b, c }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_calculus_is_rotation_equivariant(f in quadratic_field(), r in rotation(), x in unit()) {
        let f = CurvatureField::analytic(f).unwrap();
        let g = f.composed(&r).unwrap();
        let rx = r * x;
        prop_assert!((g.eval(&x).unwrap() - f.eval(&rx).unwrap()).abs() < 1e-12);
        let dg = g.grad_s(&x).unwrap();
        let df = r.transpose() * f.grad_s(&rx).unwrap();
        prop_assert!((dg - df).norm() < 1e-10);
        prop_assert!((g.laplace_s(&x).unwrap() - f.laplace_s(&rx).unwrap()).abs() < 1e-10);
        prop_assert!((g.estrella_value(&x).unwrap() - f.estrella_value(&rx).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn hessian_invariants_do_not_depend_on_the_frame(f in quadratic_field(), x in unit(), a in 0.0f64..6.3) {
        let f = CurvatureField::analytic(f).unwrap();
        let (t1, t2) = tangent_frame(&x);
        let (s, c) = a.sin_cos();
        let (u, w) = (t1 * c + t2 * s, t2 * c - t1 * s);
        let h = |p: &Vec3, q: &Vec3| f.hess_s_bilinear(&x, p, q).unwrap();
        let m = Mat2::new(h(&u, &u), h(&u, &w), h(&w, &u), h(&w, &w));
        let reference = f.hess_s(&x).unwrap();
        prop_assert!((m.trace() - reference.trace()).abs() < 1e-10);
        prop_assert!((m.determinant() - reference.determinant()).abs() < 1e-9);
        prop_assert!((m[(0, 1)] - m[(1, 0)]).abs() < 1e-12);
    }

    #[test]
    fn finite_differences_track_closed_forms(f in quadratic_field(), x in unit()) {
        let exact = CurvatureField::analytic(f).unwrap();
        let fd = exact.clone().with_mode(DerivativeMode::FiniteDifference { step: 1e-4 }).unwrap();
        prop_assert!((exact.grad_s(&x).unwrap() - fd.grad_s(&x).unwrap()).norm() < 1e-6);
        prop_assert!((exact.hess_s(&x).unwrap() - fd.hess_s(&x).unwrap()).abs().max() < 1e-4);
    }

    #[test]
    fn desir_inequality_holds(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, angle in 0.0f64..6.3) {
        let m = Mat2::new(a, b, b, c);
        prop_assert!(desir_slack(&m, angle) >= -1e-12 * (1.0 + a * a + b * b + c * c));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn curvature_trace_identities_on_rotational_spheres(c0 in 0.5f64..2.0, c2 in 0.0f64..1.0) {
        let s = build_sphere(&ZonalFunction::new(vec![c0, 0.0, c2]), 16, 16, DEFAULT_STEP).unwrap().surface;
        for v in 0..s.len() {
            let [k1, k2] = s.kappa[v];
            let (h, k) = (s.mean_curvature[v], s.gauss_curvature[v]);
            let scale = 1.0 + k1 * k1 + k2 * k2;
            prop_assert!((2.0 * h - (k1 + k2)).abs() < 1e-10 * scale);
            prop_assert!((k - k1 * k2).abs() < 1e-10 * scale);
            prop_assert!((s.sigma_norm2[v] - (4.0 * h * h - 2.0 * k)).abs() < 1e-9 * scale);
            let [e1, e2] = s.principal[v];
            prop_assert!(e1.dot(&e2).abs() < 1e-10);
            prop_assert!(e1.dot(&s.normal[v]).abs() < 1e-10 && e2.dot(&s.normal[v]).abs() < 1e-10);
        }
    }
}

const H: f64 = 1.0 / 16.0;

fn solve(field: &CurvatureField, center: [f64; 2], g: impl Fn(f64, f64) -> f64) -> GraphSolution {
    let dom = GridDomain::disk(center, 0.4, H).unwrap().with_boundary(g).unwrap();
    solve_dirichlet(field, &dom, &InitialGuess::Cold, &SolverOptions::default()).unwrap()
}

/// Interior values keyed by grid position relative to `center`, in row-major order.
fn relative_values(sol: &GraphSolution, center: [f64; 2]) -> Vec<((i64, i64), f64)> {
    let mut out: Vec<((i64, i64), f64)> = sol
        .domain
        .interior
        .iter()
        .map(|&k| {
            let (x, y) = sol.domain.position(k);
            (((( x - center[0]) / H).round() as i64, ((y - center[1]) / H).round() as i64), sol.u[k])
        })
        .collect();
    out.sort_by_key(|(ij, _)| (ij.1, ij.0));
    out
}

fn field_strategy() -> impl Strategy<Value = CurvatureField> {
    (0.5f64..1.5, -0.3f64..0.3, unit()).prop_map(|(b, a, axis)| CurvatureField::linear(a, b, axis).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn graphs_are_translation_invariant(
        field in field_strategy(),
        (ci, cj) in (-5i32..5, -5i32..5),
        (a, b, d) in (-0.3f64..0.3, -0.3f64..0.3, -1.0f64..1.0),
        lift in -2.0f64..2.0,
    ) {
        let c = [ci as f64 * H, cj as f64 * H];
        let base = solve(&field, [0.0, 0.0], |x, y| a * x + b * y + d);
        let moved = solve(&field, c, |x, y| a * (x - c[0]) + b * (y - c[1]) + d + lift);
        let (p, q) = (relative_values(&base, [0.0, 0.0]), relative_values(&moved, c));
        prop_assert_eq!(p.len(), q.len());
        for ((ij, u), (kl, w)) in p.iter().zip(&q) {
            prop_assert_eq!(ij, kl);
            prop_assert!((u + lift - w).abs() < 1e-8, "{} vs {}", u + lift, w);
        }
    }

    #[test]
    fn graphs_are_equivariant_under_quarter_turns(field in field_strategy(), (a, b) in (-0.3f64..0.3, -0.3f64..0.3)) {
        // R(x, y, z) = (−y, x, z); v(p) = u(Rp) solves the problem for 𝓗 ∘ R with data g ∘ R
        let r = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let u = solve(&field, [0.0, 0.0], |x, y| a * x + b * y * y);
        let v = solve(&field.composed(&r).unwrap(), [0.0, 0.0], |x, y| a * (-y) + b * x * x);
        let lookup: std::collections::HashMap<(i64, i64), f64> = relative_values(&u, [0.0, 0.0]).into_iter().collect();
        for ((i, j), w) in relative_values(&v, [0.0, 0.0]) {
            let expected = lookup[&(-j, i)];
            prop_assert!((w - expected).abs() < 1e-8, "{} vs {}", w, expected);
        }
    }

    #[test]
    fn ordered_boundary_data_give_ordered_graphs(
        field in field_strategy(),
        (a, b, d) in (-0.3f64..0.3, -0.3f64..0.3, -0.5f64..0.5),
        (e, s) in (0.0f64..0.2, 0.0f64..0.2),
    ) {
        let lower = solve(&field, [0.0, 0.0], |x, y| a * x + b * y + d);
        let upper = solve(&field, [0.0, 0.0], |x, y| a * x + b * y + d + e + s * (x * x + y * y));
        for &k in &lower.domain.interior {
            prop_assert!(lower.u[k] <= upper.u[k] + 1e-10);
        }
    }
}

fn cap() -> &'static GraphSolution {
    static CAP: OnceLock<GraphSolution> = OnceLock::new();
    CAP.get_or_init(|| {
        let dom = GridDomain::disk([0.0, 0.0], 0.6, 1.0 / 32.0).unwrap().with_boundary(|_, _| 0.0).unwrap();
        solve_dirichlet(&CurvatureField::constant(1.0), &dom, &InitialGuess::Cold, &SolverOptions::default()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn principal_eigenvalue_decreases_as_the_region_grows(r1 in 0.2f64..0.5, dr in 0.05f64..0.1) {
        let sol = cap();
        let field = CurvatureField::constant(1.0);
        let lambda = |r: f64| {
            let s = DiscreteSurface::from_graph_window(sol, |x, y| x * x + y * y <= r * r).unwrap();
            let op = assemble_stability_operator(&s, &field).unwrap();
            principal_eigenvalue(&op).unwrap().lambda0
        };
        let (small, large) = (lambda(r1), lambda(r1 + dr));
        prop_assert!(large <= small + 1e-9, "λ₀({}) = {} > λ₀({}) = {}", r1 + dr, large, r1, small);
        prop_assert!(large > 0.0);
    }
}
