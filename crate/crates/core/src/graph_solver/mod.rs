//! Dirichlet problems for 𝓗-graphs on masked grids and the experiments built on them.

pub mod domain;
pub mod experiments;
pub mod newton;

use serde::Serialize;

pub use domain::{DomainSpec, GridDomain, NodeKind};
pub use experiments::{height_experiment, HeightRow, HeightTable};
pub use newton::{solve_dirichlet, InitialGuess, SolverOptions};

use crate::error::Result;
use crate::sphere_field::CurvatureField;
use crate::{Mat2, Vec3};

/// Newton failure, carrying the last iterate so callers can inspect it.
#[derive(Clone, Debug)]
pub struct NonConvergence {
    /// Continuation level λ at which the solver stalled.
    pub lambda: f64,
    pub iterations: usize,
    pub residual_norm: f64,
    /// Full nodal field at the time of failure.
    pub last_iterate: Vec<f64>,
}

/// A solved 𝓗-graph with its derived geometry.
///
/// Nodal arrays cover the whole grid. `u` holds boundary data on boundary
/// nodes; derived fields are NaN off the interior.
#[derive(Clone, Debug)]
pub struct GraphSolution {
    pub field: CurvatureField,
    pub domain: GridDomain,
    pub u: Vec<f64>,
    pub residual_norm: f64,
    pub newton_iterations: usize,
    pub continuation_stages: usize,
    /// Pointwise residual `div − 2𝓗(Z)`.
    pub residual: Vec<f64>,
    /// Upward unit normal Z_u.
    pub normal: Vec<Vec3>,
    /// Mean curvature from the solver's own divergence, so that
    /// `H_Σ − 𝓗(Z)` is half the residual.
    pub mean_curvature: Vec<f64>,
    /// Mean curvature from centered second differences.
    pub mean_curvature_fd: Vec<f64>,
    pub sigma_norm: Vec<f64>,
    pub gauss_curvature: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GraphSummary {
    pub residual_norm: f64,
    pub newton_iterations: usize,
    pub continuation_stages: usize,
    pub max_height: f64,
    pub interior_nodes: usize,
    pub spacing: f64,
}

/// Shape operator of a graph from first and second derivatives of u, w.r.t. the upward normal.
pub fn graph_shape_operator(ux: f64, uy: f64, uxx: f64, uxy: f64, uyy: f64) -> Mat2 {
    let w = (1.0 + ux * ux + uy * uy).sqrt();
    let g = Mat2::new(1.0 + ux * ux, ux * uy, ux * uy, 1.0 + uy * uy);
    let ii = Mat2::new(uxx, uxy, uxy, uyy) / w;
    g.try_inverse().expect("graph metric is positive definite") * ii
}

impl GraphSolution {
    pub(crate) fn from_solved(
        field: CurvatureField,
        domain: GridDomain,
        u: Vec<f64>,
        residual_norm: f64,
        newton_iterations: usize,
        continuation_stages: usize,
    ) -> Result<Self> {
        let n = u.len();
        let h = domain.h;
        let div = newton::discrete_divergence(&domain, &u);
        let mut sol = GraphSolution {
            residual: vec![f64::NAN; n],
            normal: vec![Vec3::repeat(f64::NAN); n],
            mean_curvature: vec![f64::NAN; n],
            mean_curvature_fd: vec![f64::NAN; n],
            sigma_norm: vec![f64::NAN; n],
            gauss_curvature: vec![f64::NAN; n],
            field,
            domain,
            u,
            residual_norm,
            newton_iterations,
            continuation_stages,
        };
        let nx = sol.domain.nx;
        for &k in &sol.domain.interior {
            let u = &sol.u;
            let (z, ux, uy) = newton::centered_normal(
                &[u[k], u[k + 1], u[k - 1], u[k + nx], u[k - nx], 0.0, 0.0, 0.0, 0.0],
                h,
            );
            let uxx = (u[k + 1] - 2.0 * u[k] + u[k - 1]) / (h * h);
            let uyy = (u[k + nx] - 2.0 * u[k] + u[k - nx]) / (h * h);
            let uxy = (u[k + nx + 1] - u[k + nx - 1] - u[k - nx + 1] + u[k - nx - 1]) / (4.0 * h * h);
            let s = graph_shape_operator(ux, uy, uxx, uxy, uyy);
            let hz = sol.field.eval(&z)?;
            sol.normal[k] = z;
            sol.residual[k] = div[k] - 2.0 * hz;
            sol.mean_curvature[k] = 0.5 * div[k];
            sol.mean_curvature_fd[k] = 0.5 * s.trace();
            sol.gauss_curvature[k] = s.determinant();
            sol.sigma_norm[k] = (s * s).trace().max(0.0).sqrt();
        }
        Ok(sol)
    }

    pub fn interior_values<'a>(&'a self, f: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        self.domain.interior.iter().map(move |&k| f[k])
    }

    /// max |u| over interior and boundary nodes.
    pub fn max_height(&self) -> f64 {
        self.u.iter().filter(|v| v.is_finite()).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn summary(&self) -> GraphSummary {
        GraphSummary {
            residual_norm: self.residual_norm,
            newton_iterations: self.newton_iterations,
            continuation_stages: self.continuation_stages,
            max_height: self.max_height(),
            interior_nodes: self.domain.n_unknowns(),
            spacing: self.domain.h,
        }
    }

    /// Signed `H_φ − 2b` at interior nodes for the density φ = 2⟨x, e₃⟩, where
    /// `H_φ = 2H_Σ − ⟨η, Dφ⟩`.
    pub fn soliton_residual(&self, b: f64) -> Vec<f64> {
        self.soliton_residual_with(b, Vec3::new(0.0, 0.0, 2.0))
    }

    /// As [`Self::soliton_residual`] for a density with constant gradient `dphi`.
    pub fn soliton_residual_with(&self, b: f64, dphi: Vec3) -> Vec<f64> {
        let mut out = vec![f64::NAN; self.u.len()];
        for &k in &self.domain.interior {
            out[k] = 2.0 * self.mean_curvature[k] - self.normal[k].dot(&dphi) - 2.0 * b;
        }
        out
    }

    /// Connected components (4-neighborhood) of `{|u| ≥ t}` with their diameters.
    pub fn level_set_components(&self, t: f64) -> Vec<LevelComponent> {
        let d = &self.domain;
        let mark: Vec<bool> = self.u.iter().map(|v| v.is_finite() && v.abs() >= t).collect();
        let mut seen = vec![false; mark.len()];
        let mut out = Vec::new();
        for start in 0..mark.len() {
            if !mark[start] || seen[start] {
                continue;
            }
            let mut stack = vec![start];
            seen[start] = true;
            let mut nodes = Vec::new();
            while let Some(k) = stack.pop() {
                nodes.push(k);
                for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    if let Some(n) = d.offset(k, di, dj) {
                        if mark[n] && !seen[n] {
                            seen[n] = true;
                            stack.push(n);
                        }
                    }
                }
            }
            let pts: Vec<(f64, f64)> = nodes.iter().map(|&k| d.position(k)).collect();
            out.push(LevelComponent { diameter: diameter(&pts), nodes });
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelComponent {
    pub nodes: Vec<usize>,
    pub diameter: f64,
}

/// Euclidean diameter of a planar point set via its convex hull.
pub fn diameter(points: &[(f64, f64)]) -> f64 {
    let hull = convex_hull(points);
    let mut best = 0.0f64;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            best = best.max((a.0 - b.0).hypot(a.1 - b.1));
        }
    }
    best
}

fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p.dedup();
    if p.len() <= 2 {
        return p;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_diameter() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)];
        assert!((diameter(&pts) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(diameter(&[(0.0, 0.0)]), 0.0);
        assert_eq!(diameter(&[(0.0, 0.0), (3.0, 4.0)]), 5.0);
    }

    #[test]
    fn shape_operator_of_sphere_graph() {
        // lower unit hemisphere u = −√(1−r²) at (0.3, 0.2): both principal curvatures 1
        let (x, y) = (0.3f64, 0.2f64);
        let w = (1.0 - x * x - y * y).sqrt();
        let (ux, uy) = (x / w, y / w);
        let uxx = (1.0 - y * y) / w.powi(3);
        let uyy = (1.0 - x * x) / w.powi(3);
        let uxy = x * y / w.powi(3);
        let s = graph_shape_operator(ux, uy, uxx, uxy, uyy);
        assert!((s - Mat2::identity()).abs().max() < 1e-12);
    }
}
