//! Stability of 𝓗-surfaces: the Jacobi operator, principal eigenvalues,
//! stability certificates and the estrella/radius/flux checks.

pub mod checks;
pub mod eigen;
pub mod geodesic;
pub mod operator;
pub mod surface;

use serde::Serialize;

pub use checks::{
    cornex_test, desiq_check, flux_integral, flux_integral_of, q_expansion, q_transform, radius_check,
    schrodinger_transform, CornexReport, DesiQReport, RadiusCheck,
};
pub use eigen::{principal_eigenvalue, principal_eigenvalue_with, EigenOptions, EigenResult};
pub use operator::{assemble_stability_operator, jacobi_residual, jacobi_residuals, normal_component, StabilityOperator};
pub use surface::{DiscreteSurface, ProfilePoint};

use crate::error::Result;
use crate::sphere_field::{fibonacci_sphere, CurvatureField};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateStatus {
    Stable,
    Unstable,
    Indeterminate,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// u = ⟨η, a⟩ is positive with L u ≤ tol.
    Axis { axis: [f64; 3], min_value: f64, max_lu: f64 },
    /// Sign of the principal eigenvalue with a sign-definite eigenfunction.
    Eigen { lambda0: f64 },
    None,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub status: CertificateStatus,
    pub witness: Witness,
}

/// Tolerance on L u for axis witnesses.
pub const CERTIFICATE_TOL: f64 = 1e-3;

fn candidate_axes() -> Vec<Vec3> {
    let mut axes = vec![Vec3::z(), -Vec3::z(), Vec3::x(), -Vec3::x(), Vec3::y(), -Vec3::y()];
    axes.extend(fibonacci_sphere(64));
    axes
}

/// Looks for a positive Jacobi field ⟨η, a⟩; falls back to the sign of λ₀.
pub fn stability_certificate(surface: &DiscreteSurface, op: &StabilityOperator, eigen: Option<&EigenResult>) -> Result<Certificate> {
    let ev = surface.evaluable();
    for a in candidate_axes() {
        let nu = normal_component(surface, &a);
        let min_value = (0..surface.len()).filter(|&v| surface.interior[v]).map(|v| nu[v]).fold(f64::INFINITY, f64::min);
        if !(min_value > 0.0) {
            continue;
        }
        let lu = op.apply(&nu);
        let max_lu = (0..surface.len()).filter(|&v| ev[v]).map(|v| lu[v]).fold(f64::NEG_INFINITY, f64::max);
        if max_lu <= CERTIFICATE_TOL {
            return Ok(Certificate {
                status: CertificateStatus::Stable,
                witness: Witness::Axis { axis: [a.x, a.y, a.z], min_value, max_lu },
            });
        }
    }
    let owned;
    let e = match eigen {
        Some(e) => e,
        None => {
            owned = principal_eigenvalue(op)?;
            &owned
        }
    };
    let status = if !e.converged || !e.sign_definite {
        CertificateStatus::Indeterminate
    } else if e.lambda0 > e.tolerance {
        CertificateStatus::Stable
    } else if e.lambda0 < -e.tolerance {
        CertificateStatus::Unstable
    } else {
        CertificateStatus::Indeterminate
    };
    let witness = if status == CertificateStatus::Indeterminate { Witness::None } else { Witness::Eigen { lambda0: e.lambda0 } };
    Ok(Certificate { status, witness })
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub vertices: usize,
    pub interior_vertices: usize,
    pub closed: bool,
    pub area: f64,
    pub mesh_size: f64,
    pub lambda0: f64,
    pub eigen: EigenResult,
    pub eigenfunction_sign_definite: bool,
    pub jacobi_residuals: [f64; 3],
    pub estrella_c: f64,
    pub radius_bound: Option<f64>,
    pub intrinsic_radius: Option<f64>,
    pub radius_pass: Option<bool>,
    #[serde(rename = "desiQ_margin")]
    pub desiq_margin: Option<f64>,
    pub q_transform_discrepancy: Option<f64>,
    pub certificate: Certificate,
}

#[derive(Clone, Copy, Debug)]
pub struct ReportOptions {
    pub estrella_resolution: usize,
    pub desiq_tolerance: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { estrella_resolution: 20_000, desiq_tolerance: 5e-3 }
    }
}

pub fn stability_report(surface: &DiscreteSurface, field: &CurvatureField, opts: &ReportOptions) -> Result<StabilityReport> {
    let op = assemble_stability_operator(surface, field)?;
    let eigen = principal_eigenvalue(&op)?;
    let jacobi = jacobi_residuals(&op, surface);
    let est = field.estrella_constant(opts.estrella_resolution)?;
    let c = est.min_value;
    let radius_bound = est.radius_bound();
    let radius = if surface.closed || radius_bound.is_none() { None } else { Some(radius_check(surface, c)?) };
    let desiq = if c > 0.0 { Some(desiq_check(surface, field, &op, c, opts.desiq_tolerance)?) } else { None };
    let certificate = stability_certificate(surface, &op, Some(&eigen))?;
    Ok(StabilityReport {
        vertices: surface.len(),
        interior_vertices: surface.interior.iter().filter(|b| **b).count(),
        closed: surface.closed,
        area: surface.total_area(),
        mesh_size: surface.mesh_size(),
        lambda0: eigen.lambda0,
        eigenfunction_sign_definite: eigen.sign_definite,
        jacobi_residuals: jacobi,
        estrella_c: c,
        radius_bound,
        intrinsic_radius: radius.as_ref().map(|r| r.intrinsic_radius),
        radius_pass: radius.as_ref().map(|r| r.pass),
        desiq_margin: desiq.as_ref().map(|d| d.min_margin),
        q_transform_discrepancy: desiq.as_ref().map(|d| d.transform_discrepancy),
        certificate,
        eigen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_is_unstable() {
        let s = DiscreteSurface::round_sphere(1.0, 24, 48).unwrap();
        let f = CurvatureField::constant(1.0);
        let r = stability_report(&s, &f, &ReportOptions { estrella_resolution: 500, ..Default::default() }).unwrap();
        assert!((r.lambda0 + 2.0).abs() < 0.05, "{}", r.lambda0);
        assert_eq!(r.certificate.status, CertificateStatus::Unstable);
        assert!(r.eigenfunction_sign_definite);
        assert!(r.intrinsic_radius.is_none());
        assert!((r.estrella_c - 3.0).abs() < 1e-12);
    }

    #[test]
    fn small_disk_is_stable() {
        let d = DiscreteSurface::flat_disk(0.1, 16, 32).unwrap();
        let f = CurvatureField::linear(1.0, 0.5, Vec3::x()).unwrap();
        let op = assemble_stability_operator(&d, &f).unwrap();
        let c = stability_certificate(&d, &op, None).unwrap();
        assert_eq!(c.status, CertificateStatus::Stable);
    }
}
