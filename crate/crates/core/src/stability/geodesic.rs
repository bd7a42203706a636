//! Intrinsic distances on grid surfaces.
//!
//! A Dijkstra pass over the 8-connected grid (chord lengths) gives an upper
//! bound, which is then relaxed by Gauss–Seidel sweeps of a first-order
//! Eikonal update on the fan of triangles around each vertex. The sweeps only
//! ever lower values, and stop once no value moves by more than 1e-12.
//! Vertices within a few cells of a source are seeded with the chord length,
//! which removes the first-order error a point source otherwise spreads.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::surface::DiscreteSurface;
use crate::error::{Error, Result};
use crate::Vec3;

const FAN: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
const MAX_SWEEPS: usize = 200;
const SEED_CELLS: f64 = 4.0;

#[derive(PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0)
    }
}

/// Graph distance along grid edges and diagonals.
pub fn dijkstra(surface: &DiscreteSurface, sources: &[usize]) -> Vec<f64> {
    let mut seed = vec![f64::INFINITY; surface.len()];
    for &s in sources {
        seed[s] = 0.0;
    }
    dijkstra_seeded(surface, &seed)
}

fn dijkstra_seeded(surface: &DiscreteSurface, seed: &[f64]) -> Vec<f64> {
    let mut dist = seed.to_vec();
    let mut heap = BinaryHeap::new();
    for (v, &d) in seed.iter().enumerate() {
        if d.is_finite() {
            heap.push(Item(d, v));
        }
    }
    while let Some(Item(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for (di, dj) in FAN {
            if let Some(w) = surface.neighbor(v, di, dj) {
                let nd = d + (surface.position[v] - surface.position[w]).norm();
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(Item(nd, w));
                }
            }
        }
    }
    dist
}

/// Smallest value at `v` reachable through the segment [a, b] whose endpoints carry values da, db.
fn triangle_update(v: Vec3, a: Vec3, b: Vec3, da: f64, db: f64) -> f64 {
    let e = b - a;
    let len = e.norm();
    let mut best = (da + (v - a).norm()).min(db + (v - b).norm());
    if len == 0.0 || !da.is_finite() || !db.is_finite() {
        return best;
    }
    let delta = db - da;
    let k = delta / len;
    if k.abs() >= 1.0 {
        return best;
    }
    let ehat = e / len;
    let w = v - a;
    let wpar = w.dot(&ehat);
    let rho = (w - ehat * wpar).norm();
    let tau = -k * rho / (1.0 - k * k).sqrt();
    let t = ((wpar + tau) / len).clamp(0.0, 1.0);
    let q = a + e * t;
    best = best.min(da + t * delta + (v - q).norm());
    best
}

/// Intrinsic distance to the vertex set `sources`.
pub fn distance_from(surface: &DiscreteSurface, sources: &[usize]) -> Vec<f64> {
    let n = surface.len();
    let radius = SEED_CELLS * surface.mesh_size();
    let mut seed = vec![f64::INFINITY; n];
    let mut is_source = vec![false; n];
    for &s in sources {
        let origin = surface.position[s];
        let mut stack = vec![s];
        let mut seen = std::collections::HashSet::from([s]);
        while let Some(v) = stack.pop() {
            let d = (surface.position[v] - origin).norm();
            seed[v] = seed[v].min(d);
            is_source[v] = true;
            for (di, dj) in FAN {
                if let Some(w) = surface.neighbor(v, di, dj) {
                    if (surface.position[w] - origin).norm() < radius && seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
        }
    }
    let mut dist = dijkstra_seeded(surface, &seed);
    for sweep in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        let order: Box<dyn Iterator<Item = usize>> =
            if sweep % 2 == 0 { Box::new(0..n) } else { Box::new((0..n).rev()) };
        for v in order {
            if is_source[v] {
                continue;
            }
            let ring: Vec<Option<usize>> = FAN.iter().map(|&(di, dj)| surface.neighbor(v, di, dj)).collect();
            let p = surface.position[v];
            let mut best = dist[v];
            for k in 0..8 {
                if let (Some(a), Some(b)) = (ring[k], ring[(k + 1) % 8]) {
                    best = best.min(triangle_update(p, surface.position[a], surface.position[b], dist[a], dist[b]));
                }
            }
            if best < dist[v] {
                change = change.max(dist[v] - best);
                dist[v] = best;
            }
        }
        if change < 1e-12 {
            break;
        }
    }
    dist
}

impl DiscreteSurface {
    /// Intrinsic distance to the boundary; `NoBoundary` on closed surfaces.
    pub fn boundary_distance(&self) -> Result<Vec<f64>> {
        let sources: Vec<usize> = (0..self.len()).filter(|&v| self.boundary[v]).collect();
        if self.closed || sources.is_empty() {
            return Err(Error::NoBoundary);
        }
        Ok(distance_from(self, &sources))
    }

    /// Largest distance to the boundary over the surface.
    pub fn intrinsic_radius(&self) -> Result<f64> {
        Ok(self.boundary_distance()?.into_iter().filter(|d| d.is_finite()).fold(0.0, f64::max))
    }
}
