//! Principal Dirichlet eigenvalue of −L by shift-invert power iteration.

use serde::Serialize;

use super::operator::StabilityOperator;
use crate::error::{Error, Result};
use crate::linalg::{norm2, Factorization};

#[derive(Clone, Debug, Serialize)]
pub struct EigenResult {
    pub lambda0: f64,
    #[serde(skip)]
    pub eigenfunction: Vec<f64>,
    pub sign_definite: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { rel_tol: 1e-8, max_iter: 400 }
    }
}

/// Smallest eigenvalue of −L with zero Dirichlet data outside the interior.
pub fn principal_eigenvalue(op: &StabilityOperator) -> Result<EigenResult> {
    principal_eigenvalue_with(op, &EigenOptions::default())
}

pub fn principal_eigenvalue_with(op: &StabilityOperator, opts: &EigenOptions) -> Result<EigenResult> {
    let region = op.interior_indices();
    let m = region.len();
    if m == 0 {
        return Err(Error::Mesh("no interior vertices".into()));
    }
    let a = op.matrix.submatrix(&region).scaled(-1.0);
    let norm_a = (0..m).map(|r| a.row(r).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let tol_of = |psi: f64| opts.rel_tol * psi + 100.0 * f64::EPSILON * norm_a * psi;

    let ones = vec![1.0; m];
    let rows = a.matvec(&ones);
    let lo = rows.iter().copied().fold(f64::INFINITY, f64::min);
    let mut mu = lo - (1.0 + 0.05 * lo.abs());
    let mut fact = Factorization::new(&a.shifted(-mu))?;
    let mut shift_updates = 0;

    let mut psi: Vec<f64> = ones.iter().map(|x| x / (m as f64).sqrt()).collect();
    let (mut lambda, mut residual) = (f64::NAN, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=opts.max_iter {
        iterations = it;
        let mut next = fact.solve(&psi)?;
        let sum: f64 = next.iter().sum();
        let nrm = norm2(&next) * if sum < 0.0 { -1.0 } else { 1.0 };
        if !(nrm.abs() > 0.0) {
            return Err(Error::LinearSolver("inverse iteration collapsed".into()));
        }
        next.iter_mut().for_each(|x| *x /= nrm);
        psi = next;
        let apsi = a.matvec(&psi);
        lambda = psi.iter().zip(&apsi).map(|(x, y)| x * y).sum();
        residual = norm2(&apsi.iter().zip(&psi).map(|(y, x)| y - lambda * x).collect::<Vec<_>>());
        if residual <= tol_of(1.0) {
            converged = true;
            break;
        }
        // move the shift up to the Collatz–Wielandt lower bound once ψ is positive
        if shift_updates < 3 && it % 5 == 0 && psi.iter().all(|x| *x > 0.0) {
            let cw = psi.iter().zip(&apsi).map(|(x, y)| y / x).fold(f64::INFINITY, f64::min);
            let target = cw - 1e-3 * (1.0 + lambda.abs());
            if target > mu + 0.1 * (lambda - mu) && target < lambda {
                mu = target;
                fact = Factorization::new(&a.shifted(-mu))?;
                shift_updates += 1;
            }
        }
    }
    let peak = psi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let sign_definite = psi.iter().all(|x| *x > -1e-10 * peak) && psi.iter().any(|x| *x > 0.0);
    let mut eigenfunction = vec![0.0; op.interior.len()];
    for (k, &v) in region.iter().enumerate() {
        eigenfunction[v] = psi[k];
    }
    Ok(EigenResult { lambda0: lambda, eigenfunction, sign_definite, residual, tolerance: tol_of(1.0), iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere_field::CurvatureField;
    use crate::stability::operator::assemble_stability_operator;
    use crate::stability::surface::DiscreteSurface;

    #[test]
    fn flat_disk_matches_bessel_zero() {
        let j01 = 2.404_825_557_695_773_f64;
        let d = DiscreteSurface::flat_disk(1.0, 48, 96).unwrap();
        let op = assemble_stability_operator(&d, &CurvatureField::constant(0.0)).unwrap();
        let e = principal_eigenvalue(&op).unwrap();
        assert!(e.converged && e.sign_definite, "{e:?}");
        assert!((e.lambda0 - j01 * j01).abs() < 1e-3 * j01 * j01, "{}", e.lambda0);
    }

    #[test]
    fn hemisphere_is_neutral() {
        // the coordinate function along the axis is a positive Jacobi field vanishing on the equator
        let s = DiscreteSurface::round_hemisphere(1.0, 32, 64).unwrap();
        let op = assemble_stability_operator(&s, &CurvatureField::constant(1.0)).unwrap();
        let e = principal_eigenvalue(&op).unwrap();
        assert!(e.converged, "{e:?}");
        assert!(e.lambda0.abs() < 1e-3, "{}", e.lambda0);
    }
}
