use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Outside,
    Interior,
    Boundary,
}

/// A masked uniform grid with nodal Dirichlet data.
///
/// Node `(i, j)` sits at `(x0 + i h, y0 + j h)` and has flat index `j * nx + i`.
/// Boundary nodes are the non-interior nodes in the 8-neighborhood of some
/// interior node, so every interior node has its full 3×3 stencil available.
#[derive(Clone, Debug)]
pub struct GridDomain {
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub kind: Vec<NodeKind>,
    /// Dirichlet values on boundary nodes, zero elsewhere.
    pub g: Vec<f64>,
    /// Unknown index of each interior node, `usize::MAX` otherwise.
    pub unknown: Vec<usize>,
    /// Flat indices of interior nodes in unknown order.
    pub interior: Vec<usize>,
}

/// JSON domain description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Disk { center: [f64; 2], radius: f64, spacing: f64 },
    Rectangle { min: [f64; 2], max: [f64; 2], spacing: f64 },
    TwoDisks { centers: [[f64; 2]; 2], radii: [f64; 2], spacing: f64 },
}

impl DomainSpec {
    pub fn build(&self) -> Result<GridDomain> {
        match self {
            DomainSpec::Disk { center, radius, spacing } => GridDomain::disk(*center, *radius, *spacing),
            DomainSpec::Rectangle { min, max, spacing } => GridDomain::rectangle(*min, *max, *spacing),
            DomainSpec::TwoDisks { centers, radii, spacing } => {
                GridDomain::two_disks(centers[0], radii[0], centers[1], radii[1], *spacing)
            }
        }
    }

    pub fn spacing(&self) -> f64 {
        match self {
            DomainSpec::Disk { spacing, .. }
            | DomainSpec::Rectangle { spacing, .. }
            | DomainSpec::TwoDisks { spacing, .. } => *spacing,
        }
    }
}

/// The eight neighbor offsets, edges first.
pub const NEIGHBORS8: [(isize, isize); 8] =
    [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)];

impl GridDomain {
    /// Builds a domain whose interior is `{inside(x, y)}` on the grid
    /// spanning the box `[lo, hi]` padded by two nodes.
    pub fn from_predicate(lo: [f64; 2], hi: [f64; 2], h: f64, inside: impl Fn(f64, f64) -> bool) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        if !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(Error::invalid("empty bounding box"));
        }
        let i_lo = (lo[0] / h).floor() as i64 - 2;
        let j_lo = (lo[1] / h).floor() as i64 - 2;
        let i_hi = (hi[0] / h).ceil() as i64 + 2;
        let j_hi = (hi[1] / h).ceil() as i64 + 2;
        let nx = (i_hi - i_lo + 1) as usize;
        let ny = (j_hi - j_lo + 1) as usize;
        if nx * ny > 50_000_000 {
            return Err(Error::invalid("grid too large"));
        }
        let (x0, y0) = (i_lo as f64 * h, j_lo as f64 * h);
        let mut kind = vec![NodeKind::Outside; nx * ny];
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                if inside(x0 + i as f64 * h, y0 + j as f64 * h) {
                    kind[j * nx + i] = NodeKind::Interior;
                }
            }
        }
        Self::finish(h, nx, ny, x0, y0, kind)
    }

    fn finish(h: f64, nx: usize, ny: usize, x0: f64, y0: f64, mut kind: Vec<NodeKind>) -> Result<Self> {
        for j in 0..ny {
            for i in 0..nx {
                if kind[j * nx + i] != NodeKind::Interior {
                    continue;
                }
                for (di, dj) in NEIGHBORS8 {
                    let (a, b) = (i as isize + di, j as isize + dj);
                    if a < 0 || b < 0 || a >= nx as isize || b >= ny as isize {
                        return Err(Error::invalid("interior node touches the grid edge"));
                    }
                    let k = b as usize * nx + a as usize;
                    if kind[k] == NodeKind::Outside {
                        kind[k] = NodeKind::Boundary;
                    }
                }
            }
        }
        let mut unknown = vec![usize::MAX; nx * ny];
        let mut interior = Vec::new();
        for (k, kd) in kind.iter().enumerate() {
            if *kd == NodeKind::Interior {
                unknown[k] = interior.len();
                interior.push(k);
            }
        }
        if interior.is_empty() {
            return Err(Error::invalid("domain has no interior nodes"));
        }
        Ok(GridDomain { h, nx, ny, x0, y0, kind, g: vec![0.0; nx * ny], unknown, interior })
    }

    /// Open disk of radius `r`; nodes with |p − c| < r are interior.
    pub fn disk(center: [f64; 2], r: f64, h: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::invalid("disk radius must be positive"));
        }
        let lo = [center[0] - r, center[1] - r];
        let hi = [center[0] + r, center[1] + r];
        Self::from_predicate(lo, hi, h, |x, y| (x - center[0]).hypot(y - center[1]) < r - 1e-12 * r)
    }

    /// Closed rectangle `[min, max]` whose edges are snapped to grid lines and
    /// carry the boundary nodes.
    pub fn rectangle(min: [f64; 2], max: [f64; 2], h: f64) -> Result<Self> {
        let snap = |v: f64| (v / h).round() * h;
        let (lo, hi) = ([snap(min[0]), snap(min[1])], [snap(max[0]), snap(max[1])]);
        if hi[0] - lo[0] < 2.0 * h || hi[1] - lo[1] < 2.0 * h {
            return Err(Error::invalid("rectangle must be at least two cells wide"));
        }
        let eps = 1e-9 * h;
        Self::from_predicate(lo, hi, h, |x, y| {
            x > lo[0] + eps && x < hi[0] - eps && y > lo[1] + eps && y < hi[1] - eps
        })
    }

    pub fn two_disks(c1: [f64; 2], r1: f64, c2: [f64; 2], r2: f64, h: f64) -> Result<Self> {
        let lo = [(c1[0] - r1).min(c2[0] - r2), (c1[1] - r1).min(c2[1] - r2)];
        let hi = [(c1[0] + r1).max(c2[0] + r2), (c1[1] + r1).max(c2[1] + r2)];
        Self::from_predicate(lo, hi, h, |x, y| {
            (x - c1[0]).hypot(y - c1[1]) < r1 || (x - c2[0]).hypot(y - c2[1]) < r2
        })
    }

    /// Sets Dirichlet data from a function of position.
    pub fn with_boundary(mut self, g: impl Fn(f64, f64) -> f64) -> Result<Self> {
        for k in 0..self.kind.len() {
            if self.kind[k] == NodeKind::Boundary {
                let (x, y) = self.position(k);
                let v = g(x, y);
                if !v.is_finite() {
                    return Err(Error::invalid(format!("boundary value at ({x}, {y}) is not finite")));
                }
                self.g[k] = v;
            }
        }
        Ok(self)
    }

    pub fn position(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k % self.nx, k / self.nx);
        (self.x0 + i as f64 * self.h, self.y0 + j as f64 * self.h)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Flat index of the node offset by `(di, dj)` from `k`, if on the grid.
    pub fn offset(&self, k: usize, di: isize, dj: isize) -> Option<usize> {
        let (i, j) = ((k % self.nx) as isize + di, (k / self.nx) as isize + dj);
        (i >= 0 && j >= 0 && i < self.nx as isize && j < self.ny as isize).then(|| j as usize * self.nx + i as usize)
    }

    pub fn n_unknowns(&self) -> usize {
        self.interior.len()
    }

    pub fn is_interior(&self, k: usize) -> bool {
        self.kind[k] == NodeKind::Interior
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.kind[k] != NodeKind::Outside
    }

    /// Full nodal field from interior unknowns and boundary data (NaN outside).
    pub fn assemble_field(&self, unknowns: &[f64]) -> Vec<f64> {
        (0..self.kind.len())
            .map(|k| match self.kind[k] {
                NodeKind::Interior => unknowns[self.unknown[k]],
                NodeKind::Boundary => self.g[k],
                NodeKind::Outside => f64::NAN,
            })
            .collect()
    }

    pub fn extract_unknowns(&self, field: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&k| field[k]).collect()
    }

    /// Diagonal of the bounding box of the interior nodes.
    pub fn extent(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for &k in &self.interior {
            let (x, y) = self.position(k);
            lo = [lo[0].min(x), lo[1].min(y)];
            hi = [hi[0].max(x), hi[1].max(y)];
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_interior_node_has_full_stencil() {
        for d in [
            GridDomain::disk([0.0, 0.0], 0.5, 1.0 / 16.0).unwrap(),
            GridDomain::rectangle([-1.0, -0.3], [1.0, 0.3], 0.1).unwrap(),
            GridDomain::two_disks([-1.0, 0.0], 0.4, [1.0, 0.0], 0.4, 0.05).unwrap(),
        ] {
            for &k in &d.interior {
                for (di, dj) in NEIGHBORS8 {
                    let n = d.offset(k, di, dj).unwrap();
                    assert!(d.is_active(n));
                }
            }
        }
    }

    #[test]
    fn rectangle_boundary_sits_on_edges() {
        let d = GridDomain::rectangle([0.0, 0.0], [1.0, 0.5], 0.25).unwrap();
        assert_eq!(d.n_unknowns(), 3);
        let nb = d.kind.iter().filter(|k| **k == NodeKind::Boundary).count();
        assert_eq!(nb, 5 * 3 - 3);
        for (k, kd) in d.kind.iter().enumerate() {
            if *kd == NodeKind::Boundary {
                let (x, y) = d.position(k);
                let on_edge = x.abs() < 1e-12 || (x - 1.0).abs() < 1e-12 || y.abs() < 1e-12 || (y - 0.5).abs() < 1e-12;
                assert!(on_edge, "({x}, {y})");
            }
        }
    }

    #[test]
    fn disk_nodes_and_boundary_data() {
        let d = GridDomain::disk([0.0, 0.0], 0.5, 0.125).unwrap().with_boundary(|x, y| x + y).unwrap();
        for &k in &d.interior {
            let (x, y) = d.position(k);
            assert!(x.hypot(y) < 0.5);
        }
        let u = d.assemble_field(&vec![7.0; d.n_unknowns()]);
        for k in 0..u.len() {
            match d.kind[k] {
                NodeKind::Boundary => {
                    let (x, y) = d.position(k);
                    assert_eq!(u[k], x + y);
                }
                NodeKind::Interior => assert_eq!(u[k], 7.0),
                NodeKind::Outside => assert!(u[k].is_nan()),
            }
        }
        assert!(GridDomain::disk([0.0, 0.0], -1.0, 0.1).is_err());
        assert!(d.clone().with_boundary(|_, _| f64::NAN).is_err());
    }

    #[test]
    fn spec_json() {
        let s: DomainSpec = serde_json::from_str(r#"{"shape":"disk","center":[0,0],"radius":0.5,"spacing":0.0625}"#).unwrap();
        assert_eq!(s.build().unwrap().h, 0.0625);
        assert!(serde_json::from_str::<DomainSpec>(r#"{"shape":"disk","center":[0,0],"radius":0.5,"spacing":0.1,"foo":1}"#).is_err());
    }
}
