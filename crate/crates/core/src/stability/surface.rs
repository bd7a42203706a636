//! Parametric grid surfaces with per-vertex differential geometry.
//!
//! Two layouts are supported. Graph surfaces reuse the solver grid, with
//! second-order 3×3 stencils in (x, y). Revolved surfaces use rings at
//! s_i = (i + ½)Δ along the profile and equally spaced meridians; the grid is
//! continued across a pole by reflection (ring −1 is ring 0 rotated by π), and
//! stencils are fourth order in both directions, dropping to second order next
//! to a boundary ring. Lower order near the pole would not do: the φ-derivative
//! term carries a 1/x² weight there.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::graph_solver::{GraphSolution, NodeKind};
use crate::{Mat2, Vec3};

/// One point of a meridian profile: distance to the axis, height, tangent angle and its derivative.
#[derive(Clone, Copy, Debug)]
pub struct ProfilePoint {
    pub x: f64,
    pub z: f64,
    pub theta: f64,
    pub dtheta: f64,
}

#[derive(Clone, Debug)]
pub enum Layout {
    Graph { nx: usize, ny: usize, h: f64, vertex_of_node: Vec<usize> },
    Revolved { n_s: usize, n_phi: usize, ds: f64, dphi: f64, closed: bool },
}

/// Stencil weights for the five parametric derivatives (a, b, aa, ab, bb).
pub type Stencils = [Vec<(usize, f64)>; 5];

#[derive(Clone, Debug)]
pub struct DiscreteSurface {
    pub layout: Layout,
    pub position: Vec<Vec3>,
    /// Parametric derivatives p_a, p_b, p_aa, p_ab, p_bb.
    pub dp: Vec<[Vec3; 5]>,
    pub normal: Vec<Vec3>,
    pub metric: Vec<Mat2>,
    pub metric_inv: Vec<Mat2>,
    pub second_form: Vec<Mat2>,
    pub shape: Vec<Mat2>,
    pub kappa: Vec<[f64; 2]>,
    pub principal: Vec<[Vec3; 2]>,
    pub mean_curvature: Vec<f64>,
    pub gauss_curvature: Vec<f64>,
    pub sigma_norm2: Vec<f64>,
    /// Quadrature weight √det g · (parametric cell area).
    pub area: Vec<f64>,
    pub has_geometry: Vec<bool>,
    /// Vertices carrying an operator row (the Dirichlet region).
    pub interior: Vec<bool>,
    /// Vertices on ∂Σ, the sources for boundary distance.
    pub boundary: Vec<bool>,
    pub closed: bool,
    /// Grid node (graph) or ring·n_phi + meridian (revolved) of each vertex.
    pub source_node: Vec<usize>,
}

const S4_D1: [(isize, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
const S4_D2: [(isize, f64); 5] =
    [(-2, -1.0 / 12.0), (-1, 16.0 / 12.0), (0, -30.0 / 12.0), (1, 16.0 / 12.0), (2, -1.0 / 12.0)];
const S2_D1: [(isize, f64); 2] = [(-1, -0.5), (1, 0.5)];
const S2_D2: [(isize, f64); 3] = [(-1, 1.0), (0, -2.0), (1, 1.0)];

impl DiscreteSurface {
    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    /// Vertex at parametric offset (di, dj), crossing poles and wrapping φ as needed.
    pub fn neighbor(&self, v: usize, di: isize, dj: isize) -> Option<usize> {
        match &self.layout {
            Layout::Graph { nx, ny, vertex_of_node, .. } => {
                let node = self.source_node[v];
                let (i, j) = ((node % nx) as isize + di, (node / nx) as isize + dj);
                if i < 0 || j < 0 || i >= *nx as isize || j >= *ny as isize {
                    return None;
                }
                let w = vertex_of_node[j as usize * nx + i as usize];
                (w != usize::MAX).then_some(w)
            }
            Layout::Revolved { n_s, n_phi, closed, .. } => {
                let (n_s, n_phi) = (*n_s as isize, *n_phi as isize);
                let (mut i, mut j) = ((v as isize) / n_phi + di, (v as isize) % n_phi + dj);
                if i < 0 {
                    i = -1 - i;
                    j += n_phi / 2;
                }
                if i >= n_s {
                    if !closed {
                        return None;
                    }
                    i = 2 * n_s - 1 - i;
                    j += n_phi / 2;
                }
                if i < 0 || i >= n_s {
                    return None;
                }
                Some((i * n_phi + j.rem_euclid(n_phi)) as usize)
            }
        }
    }

    /// Derivative stencils at v, or None where the neighborhood is incomplete.
    pub fn stencils(&self, v: usize) -> Option<Stencils> {
        match &self.layout {
            Layout::Graph { h, .. } => {
                let h = *h;
                let mut n = [[0usize; 3]; 3];
                for (a, row) in n.iter_mut().enumerate() {
                    for (b, slot) in row.iter_mut().enumerate() {
                        *slot = self.neighbor(v, a as isize - 1, b as isize - 1)?;
                    }
                }
                let at = |di: isize, dj: isize| n[(di + 1) as usize][(dj + 1) as usize];
                let (c1, c2, cx) = (0.5 / h, 1.0 / (h * h), 0.25 / (h * h));
                Some([
                    vec![(at(1, 0), c1), (at(-1, 0), -c1)],
                    vec![(at(0, 1), c1), (at(0, -1), -c1)],
                    vec![(at(1, 0), c2), (at(0, 0), -2.0 * c2), (at(-1, 0), c2)],
                    vec![(at(1, 1), cx), (at(-1, -1), cx), (at(1, -1), -cx), (at(-1, 1), -cx)],
                    vec![(at(0, 1), c2), (at(0, 0), -2.0 * c2), (at(0, -1), c2)],
                ])
            }
            Layout::Revolved { n_s, ds, dphi, closed, .. } => {
                let i = v / self.n_phi();
                if !closed && i + 1 >= *n_s {
                    return None;
                }
                let fourth = *closed || i + 2 < *n_s;
                let (d1s, d2s): (&[(isize, f64)], &[(isize, f64)]) =
                    if fourth { (&S4_D1, &S4_D2) } else { (&S2_D1, &S2_D2) };
                let mut st: Stencils = Default::default();
                for &(di, w) in d1s {
                    st[0].push((self.neighbor(v, di, 0)?, w / ds));
                }
                for &(dj, w) in &S4_D1 {
                    st[1].push((self.neighbor(v, 0, dj)?, w / dphi));
                }
                for &(di, w) in d2s {
                    st[2].push((self.neighbor(v, di, 0)?, w / (ds * ds)));
                }
                for &(di, wi) in d1s {
                    for &(dj, wj) in &S4_D1 {
                        st[3].push((self.neighbor(v, di, dj)?, wi * wj / (ds * dphi)));
                    }
                }
                for &(dj, w) in &S4_D2 {
                    st[4].push((self.neighbor(v, 0, dj)?, w / (dphi * dphi)));
                }
                Some(st)
            }
        }
    }

    fn n_phi(&self) -> usize {
        match self.layout {
            Layout::Revolved { n_phi, .. } => n_phi,
            Layout::Graph { .. } => 1,
        }
    }

    /// Applies a stencil to a scalar vertex field.
    pub fn apply(stencil: &[(usize, f64)], f: &[f64]) -> f64 {
        stencil.iter().map(|&(w, c)| c * f[w]).sum()
    }

    pub fn apply_vec(stencil: &[(usize, f64)], f: &[Vec3]) -> Vec3 {
        stencil.iter().fold(Vec3::zeros(), |acc, &(w, c)| acc + f[w] * c)
    }

    fn empty(layout: Layout, position: Vec<Vec3>, source_node: Vec<usize>, closed: bool) -> Self {
        let n = position.len();
        let nan = Vec3::repeat(f64::NAN);
        let nan2 = Mat2::repeat(f64::NAN);
        DiscreteSurface {
            layout,
            position,
            dp: vec![[nan; 5]; n],
            normal: vec![nan; n],
            metric: vec![nan2; n],
            metric_inv: vec![nan2; n],
            second_form: vec![nan2; n],
            shape: vec![nan2; n],
            kappa: vec![[f64::NAN; 2]; n],
            principal: vec![[nan; 2]; n],
            mean_curvature: vec![f64::NAN; n],
            gauss_curvature: vec![f64::NAN; n],
            sigma_norm2: vec![f64::NAN; n],
            area: vec![0.0; n],
            has_geometry: vec![false; n],
            interior: vec![false; n],
            boundary: vec![false; n],
            closed,
            source_node,
        }
    }

    /// Fills metric, normal and curvature data from the parametric derivatives at v.
    fn set_geometry(&mut self, v: usize, dp: [Vec3; 5], cell: f64) -> Result<()> {
        let [pa, pb, paa, pab, pbb] = dp;
        let cross = pa.cross(&pb);
        let jac = cross.norm();
        if !(jac * cell > 1e-14) {
            return Err(Error::Mesh(format!("degenerate metric at vertex {v} (area {:.2e})", jac * cell)));
        }
        let eta = cross / jac;
        let g = Mat2::new(pa.dot(&pa), pa.dot(&pb), pa.dot(&pb), pb.dot(&pb));
        let ginv = g.try_inverse().ok_or_else(|| Error::Mesh(format!("singular metric at vertex {v}")))?;
        let ii = Mat2::new(paa.dot(&eta), pab.dot(&eta), pab.dot(&eta), pbb.dot(&eta));
        let s = ginv * ii;
        let h = 0.5 * s.trace();
        let k = s.determinant();
        let disc = (h * h - k).max(0.0).sqrt();
        let (k1, k2) = (h + disc, h - disc);
        // columns of S − κ₂I lie in the κ₁ eigenspace
        let m = s - Mat2::identity() * k2;
        let gnorm = |c: nalgebra::Vector2<f64>| (c.transpose() * g * c)[0].max(0.0).sqrt();
        let (c0, c1) = (m.column(0).into_owned(), m.column(1).into_owned());
        let c = if gnorm(c0) >= gnorm(c1) { c0 } else { c1 };
        let e1 = if gnorm(c) > 1e-8 * (1.0 + k1.abs()) {
            (pa * c.x + pb * c.y).normalize()
        } else {
            pa.normalize()
        };
        let e2 = eta.cross(&e1);
        self.dp[v] = dp;
        self.normal[v] = eta;
        self.metric[v] = g;
        self.metric_inv[v] = ginv;
        self.second_form[v] = ii;
        self.shape[v] = s;
        self.kappa[v] = [k1, k2];
        self.principal[v] = [e1, e2];
        self.mean_curvature[v] = h;
        self.gauss_curvature[v] = k;
        self.sigma_norm2[v] = k1 * k1 + k2 * k2;
        self.area[v] = jac * cell;
        self.has_geometry[v] = true;
        Ok(())
    }

    /// Surface of the whole solved graph, with the solver boundary as ∂Σ.
    pub fn from_graph(sol: &GraphSolution) -> Result<Self> {
        let d = &sol.domain;
        Self::graph_surface(sol, |k| d.is_active(k), |k| d.kind[k] == NodeKind::Boundary)
    }

    /// Sub-patch of a solved graph over the active nodes where `keep(x, y)` holds.
    /// Its boundary is the set of kept vertices without a full 3×3 neighborhood.
    pub fn from_graph_window(sol: &GraphSolution, keep: impl Fn(f64, f64) -> bool) -> Result<Self> {
        let d = &sol.domain;
        let sel = |k: usize| {
            let (x, y) = d.position(k);
            d.is_active(k) && keep(x, y)
        };
        let full = |k: usize| {
            crate::graph_solver::domain::NEIGHBORS8
                .iter()
                .all(|&(di, dj)| d.offset(k, di, dj).is_some_and(&sel))
        };
        Self::graph_surface(sol, sel, |k| !full(k))
    }

    fn graph_surface(sol: &GraphSolution, keep: impl Fn(usize) -> bool, is_boundary: impl Fn(usize) -> bool) -> Result<Self> {
        let d = &sol.domain;
        let mut vertex_of_node = vec![usize::MAX; d.kind.len()];
        let mut position = Vec::new();
        let mut source = Vec::new();
        for k in 0..d.kind.len() {
            if keep(k) && sol.u[k].is_finite() {
                vertex_of_node[k] = position.len();
                let (x, y) = d.position(k);
                position.push(Vec3::new(x, y, sol.u[k]));
                source.push(k);
            }
        }
        if position.is_empty() {
            return Err(Error::Mesh("empty graph patch".into()));
        }
        let layout = Layout::Graph { nx: d.nx, ny: d.ny, h: d.h, vertex_of_node };
        let mut s = Self::empty(layout, position, source.clone(), false);
        let cell = d.h * d.h;
        for v in 0..s.len() {
            s.boundary[v] = is_boundary(source[v]);
            if s.boundary[v] {
                continue;
            }
            if let Some(st) = s.stencils(v) {
                let dp = std::array::from_fn(|m| Self::apply_vec(&st[m], &s.position));
                s.set_geometry(v, dp, cell)?;
            }
        }
        for v in 0..s.len() {
            s.interior[v] = s.has_geometry[v];
        }
        if !s.interior.iter().any(|b| *b) {
            return Err(Error::Mesh("graph patch has no interior vertices".into()));
        }
        Ok(s)
    }

    /// Surface of revolution of a profile of length `length` about the z-axis.
    ///
    /// `n_s` rings sit at s_i = (i + ½)Δ. A closed surface has Δ = L/n_s and
    /// both poles crossed by reflection; an open one starts at a pole and has
    /// its last ring, the boundary, at s = L, so Δ = L/(n_s − ½).
    pub fn revolved(profile: &dyn Fn(f64) -> ProfilePoint, length: f64, n_s: usize, n_phi: usize, closed: bool) -> Result<Self> {
        if n_s < 4 || n_phi < 8 || n_phi % 2 != 0 {
            return Err(Error::invalid("revolved grids need n_s ≥ 4 and even n_phi ≥ 8"));
        }
        if !(length > 0.0) {
            return Err(Error::invalid("profile length must be positive"));
        }
        let ds = if closed { length / n_s as f64 } else { length / (n_s as f64 - 0.5) };
        let dphi = 2.0 * PI / n_phi as f64;
        let mut position = Vec::with_capacity(n_s * n_phi);
        let mut dps = Vec::with_capacity(n_s * n_phi);
        for i in 0..n_s {
            let p = profile((i as f64 + 0.5) * ds);
            let (st, ct) = p.theta.sin_cos();
            for j in 0..n_phi {
                let (sp, cp) = (j as f64 * dphi).sin_cos();
                position.push(Vec3::new(p.x * cp, p.x * sp, p.z));
                dps.push([
                    Vec3::new(ct * cp, ct * sp, st),
                    Vec3::new(-p.x * sp, p.x * cp, 0.0),
                    Vec3::new(-st * cp, -st * sp, ct) * p.dtheta,
                    Vec3::new(-ct * sp, ct * cp, 0.0),
                    Vec3::new(-p.x * cp, -p.x * sp, 0.0),
                ]);
            }
        }
        let layout = Layout::Revolved { n_s, n_phi, ds, dphi, closed };
        let n = position.len();
        let mut s = Self::empty(layout, position, (0..n).collect(), closed);
        for (v, dp) in dps.into_iter().enumerate() {
            s.set_geometry(v, dp, ds * dphi)?;
            let ring = v / n_phi;
            s.boundary[v] = !closed && ring == n_s - 1;
            s.interior[v] = !s.boundary[v];
        }
        Ok(s)
    }

    /// Round sphere of radius r (closed), from its exact profile.
    pub fn round_sphere(r: f64, n_s: usize, n_phi: usize) -> Result<Self> {
        let prof = move |s: f64| ProfilePoint {
            x: r * (s / r).sin(),
            z: r - r * (s / r).cos(),
            theta: s / r,
            dtheta: 1.0 / r,
        };
        Self::revolved(&prof, PI * r, n_s, n_phi, true)
    }

    /// Lower half of a round sphere of radius r, bounded by its equator (inner normal).
    pub fn round_hemisphere(r: f64, n_s: usize, n_phi: usize) -> Result<Self> {
        let prof = move |s: f64| ProfilePoint {
            x: r * (s / r).sin(),
            z: r - r * (s / r).cos(),
            theta: s / r,
            dtheta: 1.0 / r,
        };
        Self::revolved(&prof, 0.5 * PI * r, n_s, n_phi, false)
    }

    /// Flat disk of radius r in polar coordinates, normal +e₃.
    pub fn flat_disk(r: f64, n_s: usize, n_phi: usize) -> Result<Self> {
        let prof = |s: f64| ProfilePoint { x: s, z: 0.0, theta: 0.0, dtheta: 0.0 };
        Self::revolved(&prof, r, n_s, n_phi, false)
    }

    /// Vertices where every stencil neighbor carries geometry, so that fields
    /// built from the normal can be differentiated.
    pub fn evaluable(&self) -> Vec<bool> {
        (0..self.len())
            .map(|v| {
                self.interior[v]
                    && self
                        .stencils(v)
                        .is_some_and(|st| st.iter().all(|s| s.iter().all(|&(w, _)| self.has_geometry[w])))
            })
            .collect()
    }

    /// Longest grid edge, the mesh size used in tolerances.
    pub fn mesh_size(&self) -> f64 {
        let mut m = 0.0f64;
        for v in 0..self.len() {
            for (di, dj) in [(1, 0), (0, 1)] {
                if let Some(w) = self.neighbor(v, di, dj) {
                    m = m.max((self.position[v] - self.position[w]).norm());
                }
            }
        }
        m
    }

    pub fn total_area(&self) -> f64 {
        self.area.iter().sum()
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        match &self.layout {
            Layout::Graph { nx, ny, .. } => (*nx, *ny),
            Layout::Revolved { n_s, n_phi, .. } => (*n_s, *n_phi),
        }
    }

    /// Quads of the parametric grid as vertex index quadruples, for mesh export.
    pub fn quads(&self) -> Vec<[usize; 4]> {
        let mut out = Vec::new();
        for v in 0..self.len() {
            if let Layout::Revolved { n_s, n_phi, .. } = self.layout {
                if v / n_phi + 1 >= n_s {
                    continue;
                }
            }
            let (Some(a), Some(b), Some(c)) = (self.neighbor(v, 1, 0), self.neighbor(v, 1, 1), self.neighbor(v, 0, 1)) else {
                continue;
            };
            out.push([v, a, b, c]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn trace_identities_on_sphere() {
        let s = DiscreteSurface::round_sphere(2.0, 16, 16).unwrap();
        for v in 0..s.len() {
            assert_abs_diff_eq!(s.mean_curvature[v], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(s.gauss_curvature[v], 0.25, epsilon = 1e-12);
            assert_abs_diff_eq!(s.sigma_norm2[v], 4.0 * 0.25 - 2.0 * 0.25, epsilon = 1e-12);
            assert_abs_diff_eq!(s.normal[v].norm(), 1.0, epsilon = 1e-14);
            // inner normal
            assert!(s.normal[v].dot(&(s.position[v] - Vec3::new(0.0, 0.0, 2.0))) < 0.0);
        }
        assert_abs_diff_eq!(s.total_area(), 16.0 * PI, epsilon = 0.1);
    }

    #[test]
    fn pole_reflection() {
        let s = DiscreteSurface::round_sphere(1.0, 8, 8).unwrap();
        // ring −1 at meridian j is ring 0 at j + 4
        assert_eq!(s.neighbor(1, -1, 0), Some(5));
        assert_eq!(s.neighbor(1, -2, 0), Some(8 + 5));
        assert_eq!(s.neighbor(7 * 8 + 2, 1, 0), Some(7 * 8 + 6));
        let d = DiscreteSurface::flat_disk(1.0, 8, 8).unwrap();
        assert_eq!(d.neighbor(7 * 8, 1, 0), None);
        assert!(d.boundary[7 * 8] && !d.interior[7 * 8]);
        // the last ring sits on the rim
        assert_abs_diff_eq!(d.position[7 * 8].norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn stencils_are_fourth_order_across_the_pole() {
        // radial derivative of a smooth function, away from the rim where the order drops
        let errs: Vec<f64> = [16, 32]
            .iter()
            .map(|&n| {
                let d = DiscreteSurface::flat_disk(1.0, n, 2 * n).unwrap();
                let f: Vec<f64> = d.position.iter().map(|p| (p.x + 0.3).sin() * (2.0 * p.y).cos()).collect();
                let mut worst = 0.0f64;
                for v in 0..d.len() {
                    if v / (2 * n) + 3 >= n {
                        continue;
                    }
                    let Some(st) = d.stencils(v) else { continue };
                    let p = d.position[v];
                    let r = p.x.hypot(p.y);
                    let (c, s) = (p.x / r, p.y / r);
                    let fx = (p.x + 0.3).cos() * (2.0 * p.y).cos();
                    let fy = -2.0 * (p.x + 0.3).sin() * (2.0 * p.y).sin();
                    let exact_fs = fx * c + fy * s;
                    worst = worst.max((DiscreteSurface::apply(&st[0], &f) - exact_fs).abs());
                }
                worst
            })
            .collect();
        assert!(errs[0] / errs[1] > 10.0, "{errs:?}");
    }
}
