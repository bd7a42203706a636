//! Pointwise and integral checks: the Schrödinger transform Q, the estrella
//! margin, the radius bound and flux integrals.

use rayon::prelude::*;
use serde::Serialize;

use super::operator::StabilityOperator;
use super::surface::DiscreteSurface;
use crate::error::{Error, Result};
use crate::sphere_field::{fibonacci_sphere, radius_bound, CurvatureField};
use crate::{Mat2, Vec3};

/// Q = q − ½ div X − |X|²/4 at every vertex where X can be differentiated (NaN elsewhere).
pub fn schrodinger_transform(surface: &DiscreteSurface, q: &[f64], x: &[Vec3]) -> Vec<f64> {
    let ev = surface.evaluable();
    (0..surface.len())
        .into_par_iter()
        .map(|v| {
            if !ev[v] {
                return f64::NAN;
            }
            let Some(st) = surface.stencils(v) else { return f64::NAN };
            let xa = DiscreteSurface::apply_vec(&st[0], x);
            let xb = DiscreteSurface::apply_vec(&st[1], x);
            let [pa, pb, ..] = surface.dp[v];
            let gi = surface.metric_inv[v];
            let div = gi[(0, 0)] * xa.dot(&pa) + gi[(0, 1)] * (xa.dot(&pb) + xb.dot(&pa)) + gi[(1, 1)] * xb.dot(&pb);
            q[v] - 0.5 * div - 0.25 * x[v].norm_squared()
        })
        .collect()
}

/// Q_𝓗 from the discrete operator data: q = |σ|², X = 2∇𝓗(η).
pub fn q_transform(surface: &DiscreteSurface, op: &StabilityOperator) -> Vec<f64> {
    schrodinger_transform(surface, &op.potential, &op.x_field)
}

/// Q_𝓗 from its pointwise expansion 4H² − 2K − |∇𝓗(η)|² + κ₁α₁ + κ₂α₂,
/// αᵢ the spherical Hessian of 𝓗 at η along the principal directions.
pub fn q_expansion(surface: &DiscreteSurface, field: &CurvatureField) -> Result<Vec<f64>> {
    (0..surface.len())
        .into_par_iter()
        .map(|v| {
            if !surface.has_geometry[v] {
                return Ok(f64::NAN);
            }
            let eta = surface.normal[v];
            let [k1, k2] = surface.kappa[v];
            let [e1, e2] = surface.principal[v];
            let a1 = field.hess_s_bilinear(&eta, &e1, &e1)?;
            let a2 = field.hess_s_bilinear(&eta, &e2, &e2)?;
            let g = field.grad_s(&eta)?;
            let h = surface.mean_curvature[v];
            Ok(4.0 * h * h - 2.0 * surface.gauss_curvature[v] - g.norm_squared() + k1 * a1 + k2 * a2)
        })
        .collect()
}

/// Slack of ((α₁−α₂)/2)² ≤ ¼(tr M)² − det M for the diagonal entries of a
/// symmetric matrix M in the frame rotated by `angle`. Never negative up to rounding.
pub fn desir_slack(m: &Mat2, angle: f64) -> f64 {
    let (s, c) = angle.sin_cos();
    let e1 = nalgebra::Vector2::new(c, s);
    let e2 = nalgebra::Vector2::new(-s, c);
    let a1 = (e1.transpose() * m * e1)[0];
    let a2 = (e2.transpose() * m * e2)[0];
    0.25 * m.trace().powi(2) - m.determinant() - 0.25 * (a1 - a2).powi(2)
}

#[derive(Clone, Debug, Serialize)]
pub struct DesiQReport {
    pub c: f64,
    pub min_margin: f64,
    pub argmin: Option<usize>,
    /// Vertices with Q_𝓗 + K − c below −tolerance.
    pub failing: Vec<usize>,
    pub tolerance: f64,
    /// max |Q(xah) − Q(expansion)| over the checked vertices.
    pub transform_discrepancy: f64,
    pub checked: usize,
}

/// Pointwise Q_𝓗 + K − c with Q_𝓗 taken from the operator transform.
pub fn desiq_check(surface: &DiscreteSurface, field: &CurvatureField, op: &StabilityOperator, c: f64, tolerance: f64) -> Result<DesiQReport> {
    if !(c > 0.0) {
        return Err(Error::invalid(format!("the estrella check needs c > 0 (got {c})")));
    }
    let q = q_transform(surface, op);
    let q2 = q_expansion(surface, field)?;
    let mut rep = DesiQReport {
        c,
        min_margin: f64::INFINITY,
        argmin: None,
        failing: Vec::new(),
        tolerance,
        transform_discrepancy: 0.0,
        checked: 0,
    };
    for v in 0..surface.len() {
        if !q[v].is_finite() {
            continue;
        }
        rep.checked += 1;
        let m = q[v] + surface.gauss_curvature[v] - c;
        if m < rep.min_margin {
            rep.min_margin = m;
            rep.argmin = Some(v);
        }
        if m < -tolerance {
            rep.failing.push(v);
        }
        rep.transform_discrepancy = rep.transform_discrepancy.max((q[v] - q2[v]).abs());
    }
    if rep.checked == 0 {
        return Err(Error::Mesh("no vertex admits the transform".into()));
    }
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct RadiusCheck {
    pub intrinsic_radius: f64,
    pub bound: f64,
    pub mesh_size: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Compares the largest distance to the boundary with 2π/√(3c), allowing two mesh sizes.
pub fn radius_check(surface: &DiscreteSurface, c: f64) -> Result<RadiusCheck> {
    if surface.closed {
        return Err(Error::NoBoundary);
    }
    let bound = radius_bound(c).ok_or_else(|| Error::invalid(format!("the radius bound needs c > 0 (got {c})")))?;
    let r = surface.intrinsic_radius()?;
    let h = surface.mesh_size();
    Ok(RadiusCheck { intrinsic_radius: r, bound, mesh_size: h, margin: bound - r, pass: r <= bound + 2.0 * h })
}

/// ∫⟨η, v⟩ f(η) over a closed surface.
pub fn flux_integral_of(surface: &DiscreteSurface, f: impl Fn(&Vec3) -> Result<f64>, v: &Vec3) -> Result<f64> {
    if !surface.closed {
        return Err(Error::NotClosed);
    }
    let mut sum = 0.0;
    for k in 0..surface.len() {
        let eta = surface.normal[k];
        sum += surface.area[k] * eta.dot(v) * f(&eta)?;
    }
    Ok(sum)
}

/// ∫⟨η, v⟩𝓗(η), which vanishes on every closed 𝓗-surface.
pub fn flux_integral(surface: &DiscreteSurface, field: &CurvatureField, v: &Vec3) -> Result<f64> {
    flux_integral_of(surface, |x| field.eval(x), v)
}

#[derive(Clone, Debug, Serialize)]
pub struct CornexReport {
    /// min over sampled x of h₀(x)⟨x, v⟩.
    pub min_product: f64,
    /// h₀⟨·, v⟩ ≥ 0 everywhere and positive somewhere: no closed surface exists.
    pub obstructed: bool,
}

/// Sign test of h₀(x)⟨x, v⟩ on a Fibonacci lattice of `samples` points.
pub fn cornex_test(h0: &CurvatureField, v: &Vec3, samples: usize) -> Result<CornexReport> {
    let mut min_product = f64::INFINITY;
    let mut max_product = f64::NEG_INFINITY;
    for x in fibonacci_sphere(samples) {
        let p = h0.eval(&x)? * x.dot(v);
        min_product = min_product.min(p);
        max_product = max_product.max(p);
    }
    Ok(CornexReport { min_product, obstructed: min_product >= -1e-12 && max_product > 1e-12 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::operator::assemble_stability_operator;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn sphere_transform_and_margin() {
        let s = DiscreteSurface::round_sphere(1.0, 32, 64).unwrap();
        let f = CurvatureField::constant(1.0);
        let op = assemble_stability_operator(&s, &f).unwrap();
        let q = q_transform(&s, &op);
        assert!(q.iter().all(|x| (x - 2.0).abs() < 1e-10));
        let r = desiq_check(&s, &f, &op, 3.0, 5e-3).unwrap();
        assert_abs_diff_eq!(r.min_margin, 0.0, epsilon = 1e-10);
        assert!(r.failing.is_empty());
    }

    #[test]
    fn desiq_refuses_nonpositive_c() {
        let s = DiscreteSurface::round_sphere(1.0, 8, 8).unwrap();
        let f = CurvatureField::linear(1.0, 0.0, Vec3::z()).unwrap();
        let op = assemble_stability_operator(&s, &f).unwrap();
        assert!(desiq_check(&s, &f, &op, -1.0, 1e-3).is_err());
    }

    #[test]
    fn transforms_agree_on_zonal_fields() {
        let f = CurvatureField::zonal(vec![1.0, 0.3, 0.5], Vec3::z()).unwrap();
        let errs: Vec<f64> = [24, 48]
            .iter()
            .map(|&n| {
                let s = DiscreteSurface::round_sphere(1.0, n, 2 * n).unwrap();
                let op = assemble_stability_operator(&s, &f).unwrap();
                let a = q_transform(&s, &op);
                let b = q_expansion(&s, &f).unwrap();
                a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
            })
            .collect();
        assert!(errs[1] < errs[0] / 3.5, "{errs:?}");
        assert!(errs[1] < 1e-3, "{errs:?}");
    }

    #[test]
    fn hemisphere_radius_bound() {
        let s = DiscreteSurface::round_hemisphere(1.0, 64, 128).unwrap();
        let r = radius_check(&s, 3.0).unwrap();
        assert!(r.pass);
        assert!((r.intrinsic_radius - PI / 2.0).abs() < 0.02, "{}", r.intrinsic_radius);
        assert_abs_diff_eq!(r.bound, 2.0 * PI / 3.0, epsilon = 1e-12);
        let closed = DiscreteSurface::round_sphere(1.0, 8, 8).unwrap();
        assert!(matches!(radius_check(&closed, 3.0), Err(Error::NoBoundary)));
    }

    #[test]
    fn flux_oracles() {
        let s = DiscreteSurface::round_sphere(1.0, 64, 128).unwrap();
        let one = CurvatureField::constant(1.0);
        assert!(flux_integral(&s, &one, &Vec3::x()).unwrap().abs() < 1e-10);
        let lin = CurvatureField::linear(1.0, 0.0, Vec3::x()).unwrap();
        let flux = flux_integral(&s, &lin, &Vec3::x()).unwrap();
        assert!((flux - 4.0 * PI / 3.0).abs() < 1e-2 * 4.0 * PI / 3.0, "{flux}");
        let open = DiscreteSurface::round_hemisphere(1.0, 8, 8).unwrap();
        assert!(matches!(flux_integral(&open, &one, &Vec3::x()), Err(Error::NotClosed)));
        let c = cornex_test(&lin, &Vec3::x(), 500).unwrap();
        assert!(c.obstructed);
        assert!(!cornex_test(&one, &Vec3::x(), 500).unwrap().obstructed);
    }

    #[test]
    fn desir_is_algebraic() {
        let m = Mat2::new(2.0, 0.7, 0.7, -1.0);
        for k in 0..32 {
            assert!(desir_slack(&m, k as f64 * 0.2) >= -1e-12);
        }
    }
}
