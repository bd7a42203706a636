//! The stability (Jacobi) operator L = Δ + ⟨X, ∇·⟩ + |σ|², X = 2∇𝓗(η).

use super::surface::DiscreteSurface;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::sphere_field::CurvatureField;
use crate::Vec3;

#[derive(Clone, Debug)]
pub struct StabilityOperator {
    /// Full operator; rows outside the interior are identity rows.
    pub matrix: SparseMatrix,
    /// Laplace–Beltrami part, zero rows outside the interior.
    pub laplace: SparseMatrix,
    /// First-order part f ↦ ⟨X, ∇f⟩.
    pub advection: SparseMatrix,
    /// |σ|² at every vertex.
    pub potential: Vec<f64>,
    pub interior: Vec<bool>,
    /// X = 2∇𝓗(η) as an ambient vector, zero where no geometry is available.
    pub x_field: Vec<Vec3>,
}

/// Assembles L on the interior vertices of `surface`.
pub fn assemble_stability_operator(surface: &DiscreteSurface, field: &CurvatureField) -> Result<StabilityOperator> {
    let n = surface.len();
    let mut x_field = vec![Vec3::zeros(); n];
    for v in 0..n {
        if surface.has_geometry[v] {
            x_field[v] = field.grad_s(&surface.normal[v])? * 2.0;
        }
    }
    let mut lap = Vec::new();
    let mut adv = Vec::new();
    let mut full = Vec::new();
    for v in 0..n {
        if !surface.interior[v] {
            full.push((v, v, 1.0));
            continue;
        }
        if surface.area[v] < 1e-14 {
            return Err(Error::Mesh(format!("degenerate cell at vertex {v}")));
        }
        let st = surface
            .stencils(v)
            .ok_or_else(|| Error::Mesh(format!("interior vertex {v} lacks a full stencil")))?;
        let gi = surface.metric_inv[v];
        let dp = &surface.dp[v];
        // T_d = g^{ab}⟨p_ab, p_d⟩, then the Christoffel contraction −g^{cd}T_d
        let trace_dd = |d: &Vec3| gi[(0, 0)] * dp[2].dot(d) + 2.0 * gi[(0, 1)] * dp[3].dot(d) + gi[(1, 1)] * dp[4].dot(d);
        let t = nalgebra::Vector2::new(trace_dd(&dp[0]), trace_dd(&dp[1]));
        let b = -(gi * t);
        let xv = nalgebra::Vector2::new(x_field[v].dot(&dp[0]), x_field[v].dot(&dp[1]));
        let xc = gi * xv;
        let coeffs = [b.x, b.y, gi[(0, 0)], 2.0 * gi[(0, 1)], gi[(1, 1)]];
        for (m, c) in coeffs.iter().enumerate() {
            for &(w, wt) in &st[m] {
                lap.push((v, w, c * wt));
            }
        }
        for (m, c) in [xc.x, xc.y].iter().enumerate() {
            for &(w, wt) in &st[m] {
                adv.push((v, w, c * wt));
            }
        }
        full.push((v, v, surface.sigma_norm2[v]));
    }
    let laplace = SparseMatrix::from_triplets(n, n, &lap);
    let advection = SparseMatrix::from_triplets(n, n, &adv);
    full.extend(lap.iter().copied());
    full.extend(adv.iter().copied());
    let matrix = SparseMatrix::from_triplets(n, n, &full);
    let potential = surface.sigma_norm2.iter().map(|s| if s.is_finite() { *s } else { 0.0 }).collect();
    Ok(StabilityOperator { matrix, laplace, advection, potential, interior: surface.interior.clone(), x_field })
}

impl StabilityOperator {
    /// L f on interior rows, 0 elsewhere.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = self.laplace.matvec(f);
        let a = self.advection.matvec(f);
        for v in 0..out.len() {
            out[v] = if self.interior[v] { out[v] + a[v] + self.potential[v] * f[v] } else { 0.0 };
        }
        out
    }

    /// Largest absolute row sum over the interior rows.
    pub fn norm_inf(&self) -> f64 {
        (0..self.interior.len())
            .filter(|&v| self.interior[v])
            .map(|v| self.matrix.row(v).map(|(_, x)| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.interior.len()).filter(|&v| self.interior[v]).collect()
    }
}

/// The Jacobi field ⟨η, a⟩ on vertices with geometry, 0 elsewhere.
pub fn normal_component(surface: &DiscreteSurface, a: &Vec3) -> Vec<f64> {
    (0..surface.len())
        .map(|v| if surface.has_geometry[v] { surface.normal[v].dot(a) } else { 0.0 })
        .collect()
}

/// max |L⟨η, a⟩| over the vertices where it can be evaluated.
pub fn jacobi_residual(op: &StabilityOperator, surface: &DiscreteSurface, a: &Vec3) -> f64 {
    let nu = normal_component(surface, a);
    let l = op.apply(&nu);
    surface.evaluable().iter().zip(&l).filter(|(e, _)| **e).fold(0.0, |m, (_, r)| m.max(r.abs()))
}

/// Largest Jacobi residual over the three coordinate translations.
pub fn jacobi_residuals(op: &StabilityOperator, surface: &DiscreteSurface) -> [f64; 3] {
    [Vec3::x(), Vec3::y(), Vec3::z()].map(|a| jacobi_residual(op, surface, &a))
}
