//! Damped Newton solver for the 𝓗-graph equation
//! `div(Du/√(1+|Du|²)) = 2𝓗(Z_u)`, `Z_u = (−Du, 1)/√(1+|Du|²)`.
//!
//! The divergence is discretized conservatively: each interior node balances
//! the fluxes through the four faces of its cell, with the normal derivative
//! on a face taken across it and the tangential derivative averaged from the
//! four surrounding nodes. Z_u uses centered differences at the node.

use rayon::prelude::*;
use serde::Serialize;

use super::domain::GridDomain;
use super::{GraphSolution, NonConvergence};
use crate::error::{Error, Result};
use crate::linalg::{norm2, norm_inf, Factorization, SparseMatrix};
use crate::sphere_field::CurvatureField;
use crate::Vec3;

#[derive(Clone, Debug, Serialize)]
pub struct SolverOptions {
    /// Max-norm residual tolerance.
    pub tol: f64,
    pub max_newton: usize,
    pub armijo_c: f64,
    pub min_step: f64,
    /// Continuation schedules tried in turn on a cold start.
    pub stages: Vec<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, max_newton: 60, armijo_c: 1e-4, min_step: 1.0 / 4096.0, stages: vec![4, 10] }
    }
}

/// Initial guess for [`solve_dirichlet`].
#[derive(Clone, Debug)]
pub enum InitialGuess {
    /// Discrete harmonic extension of the boundary data (zero for zero data).
    /// Starting from zero instead leaves a one-cell cliff at the boundary that
    /// Newton cannot recover from when the data are far from zero.
    Cold,
    /// Full nodal field; interior values are used.
    Field(Vec<f64>),
}

struct Face {
    /// d flux / d normal derivative, d flux / d tangential derivative
    dp: f64,
    dq: f64,
    flux: f64,
}

fn face(p: f64, q: f64) -> Face {
    let w2 = 1.0 + p * p + q * q;
    let w = w2.sqrt();
    let w3 = w2 * w;
    Face { flux: p / w, dp: (1.0 + q * q) / w3, dq: -p * q / w3 }
}

/// Neighbor values around node k: [P, E, W, N, S, NE, NW, SE, SW].
fn stencil(d: &GridDomain, u: &[f64], k: usize) -> [f64; 9] {
    let nx = d.nx;
    [u[k], u[k + 1], u[k - 1], u[k + nx], u[k - nx], u[k + nx + 1], u[k + nx - 1], u[k - nx + 1], u[k - nx - 1]]
}

fn stencil_index(d: &GridDomain, k: usize) -> [usize; 9] {
    let nx = d.nx;
    [k, k + 1, k - 1, k + nx, k - nx, k + nx + 1, k + nx - 1, k - nx + 1, k - nx - 1]
}

const P: usize = 0;
const E: usize = 1;
const W: usize = 2;
const N: usize = 3;
const S: usize = 4;
const NE: usize = 5;
const NW: usize = 6;
const SE: usize = 7;
const SW: usize = 8;

/// Discrete divergence at an interior node and its gradient w.r.t. the 9 stencil values.
fn divergence(v: &[f64; 9], h: f64) -> (f64, [f64; 9]) {
    let q4 = 0.25 / h;
    let mut g = [0.0; 9];
    // east
    let fe = face((v[E] - v[P]) / h, (v[N] + v[NE] - v[S] - v[SE]) * q4);
    g[E] += fe.dp / h;
    g[P] -= fe.dp / h;
    for (idx, s) in [(N, 1.0), (NE, 1.0), (S, -1.0), (SE, -1.0)] {
        g[idx] += fe.dq * s * q4;
    }
    // west, entering with a minus sign
    let fw = face((v[P] - v[W]) / h, (v[N] + v[NW] - v[S] - v[SW]) * q4);
    g[P] -= fw.dp / h;
    g[W] += fw.dp / h;
    for (idx, s) in [(N, 1.0), (NW, 1.0), (S, -1.0), (SW, -1.0)] {
        g[idx] -= fw.dq * s * q4;
    }
    // north
    let fnn = face((v[N] - v[P]) / h, (v[E] + v[NE] - v[W] - v[NW]) * q4);
    g[N] += fnn.dp / h;
    g[P] -= fnn.dp / h;
    for (idx, s) in [(E, 1.0), (NE, 1.0), (W, -1.0), (NW, -1.0)] {
        g[idx] += fnn.dq * s * q4;
    }
    // south
    let fs = face((v[P] - v[S]) / h, (v[E] + v[SE] - v[W] - v[SW]) * q4);
    g[P] -= fs.dp / h;
    g[S] += fs.dp / h;
    for (idx, s) in [(E, 1.0), (SE, 1.0), (W, -1.0), (SW, -1.0)] {
        g[idx] -= fs.dq * s * q4;
    }
    for x in g.iter_mut() {
        *x /= h;
    }
    ((fe.flux - fw.flux + fnn.flux - fs.flux) / h, g)
}

/// Upward unit normal from centered differences.
pub(crate) fn centered_normal(v: &[f64; 9], h: f64) -> (Vec3, f64, f64) {
    let ux = (v[E] - v[W]) / (2.0 * h);
    let uy = (v[N] - v[S]) / (2.0 * h);
    let w = (1.0 + ux * ux + uy * uy).sqrt();
    (Vec3::new(-ux, -uy, 1.0) / w, ux, uy)
}

/// Discrete divergence at every interior node (NaN elsewhere).
pub fn discrete_divergence(d: &GridDomain, u: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; u.len()];
    for &k in &d.interior {
        out[k] = divergence(&stencil(d, u, k), d.h).0;
    }
    out
}

/// Residual `div − 2λ𝓗(Z)` at interior nodes, in unknown order.
pub fn residual(field: &CurvatureField, d: &GridDomain, u: &[f64], lambda: f64) -> Result<Vec<f64>> {
    d.interior
        .par_iter()
        .map(|&k| {
            let v = stencil(d, u, k);
            let (div, _) = divergence(&v, d.h);
            let (z, _, _) = centered_normal(&v, d.h);
            let hz = if lambda == 0.0 { 0.0 } else { field.eval(&z)? };
            Ok(div - 2.0 * lambda * hz)
        })
        .collect()
}

/// Residual and analytic Jacobian w.r.t. the interior unknowns.
pub fn residual_and_jacobian(
    field: &CurvatureField,
    d: &GridDomain,
    u: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, SparseMatrix)> {
    let rows: Vec<(f64, Vec<(usize, usize, f64)>)> = d
        .interior
        .par_iter()
        .map(|&k| {
            let row = d.unknown[k];
            let v = stencil(d, u, k);
            let idx = stencil_index(d, k);
            let (div, mut g) = divergence(&v, d.h);
            let (z, ux, uy) = centered_normal(&v, d.h);
            let mut res = div;
            if lambda != 0.0 {
                let (hz, grad, _) = field.jet(&z)?;
                res -= 2.0 * lambda * hz;
                let w2 = 1.0 + ux * ux + uy * uy;
                let w = w2.sqrt();
                let dz_dux = Vec3::new(-1.0 / w, 0.0, 0.0) - z * (ux / w2);
                let dz_duy = Vec3::new(0.0, -1.0 / w, 0.0) - z * (uy / w2);
                let (a, b) = (grad.dot(&dz_dux), grad.dot(&dz_duy));
                let c = -2.0 * lambda / (2.0 * d.h);
                g[E] += c * a;
                g[W] -= c * a;
                g[N] += c * b;
                g[S] -= c * b;
            }
            let entries = idx
                .iter()
                .zip(g.iter())
                .filter(|(n, gv)| d.is_interior(**n) && **gv != 0.0)
                .map(|(n, gv)| (row, d.unknown[*n], *gv))
                .collect();
            Ok((res, entries))
        })
        .collect::<Result<_>>()?;
    let n = d.n_unknowns();
    let mut r = Vec::with_capacity(n);
    let mut trip = Vec::with_capacity(n * 9);
    for (res, e) in rows {
        r.push(res);
        trip.extend(e);
    }
    Ok((r, SparseMatrix::from_triplets(n, n, &trip)))
}

struct StageOutcome {
    iterations: usize,
    residual_norm: f64,
}

fn newton_stage(
    field: &CurvatureField,
    d: &GridDomain,
    u: &mut Vec<f64>,
    lambda: f64,
    opts: &SolverOptions,
) -> std::result::Result<StageOutcome, NonConvergence> {
    let fail = |u: &[f64], it: usize, rn: f64| NonConvergence {
        lambda,
        iterations: it,
        residual_norm: rn,
        last_iterate: u.to_vec(),
    };
    let mut r = match residual(field, d, u, lambda) {
        Ok(r) => r,
        Err(_) => return Err(fail(u, 0, f64::INFINITY)),
    };
    for it in 0..opts.max_newton {
        let rn = norm_inf(&r);
        if rn <= opts.tol {
            return Ok(StageOutcome { iterations: it, residual_norm: rn });
        }
        let (_, jac) = match residual_and_jacobian(field, d, u, lambda) {
            Ok(x) => x,
            Err(_) => return Err(fail(u, it, rn)),
        };
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = match Factorization::new(&jac).and_then(|f| f.solve(&neg)) {
            Ok(s) => s,
            Err(_) => return Err(fail(u, it, rn)),
        };
        let merit = 0.5 * norm2(&r).powi(2);
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= opts.min_step {
            let mut trial = u.clone();
            for (m, &k) in d.interior.iter().enumerate() {
                trial[k] += alpha * step[m];
            }
            if let Ok(rt) = residual(field, d, &trial, lambda) {
                let mt = 0.5 * norm2(&rt).powi(2);
                if mt.is_finite() && mt <= (1.0 - 2.0 * opts.armijo_c * alpha) * merit {
                    *u = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(fail(u, it, rn));
        }
    }
    let rn = norm_inf(&r);
    if rn <= opts.tol {
        Ok(StageOutcome { iterations: opts.max_newton, residual_norm: rn })
    } else {
        Err(fail(u, opts.max_newton, rn))
    }
}

/// Nodal field solving the 5-point Laplace equation with the domain's boundary data.
pub fn harmonic_extension(d: &GridDomain) -> Result<Vec<f64>> {
    let n = d.n_unknowns();
    if d.g.iter().all(|v| *v == 0.0) {
        return Ok(d.assemble_field(&vec![0.0; n]));
    }
    let mut trip = Vec::with_capacity(5 * n);
    let mut rhs = vec![0.0; n];
    for (row, &k) in d.interior.iter().enumerate() {
        trip.push((row, row, -4.0));
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let nb = d.offset(k, di, dj).expect("interior nodes have full stencils");
            if d.is_interior(nb) {
                trip.push((row, d.unknown[nb], 1.0));
            } else {
                rhs[row] -= d.g[nb];
            }
        }
    }
    let x = crate::linalg::solve(&SparseMatrix::from_triplets(n, n, &trip), &rhs)?;
    Ok(d.assemble_field(&x))
}

/// Solves the Dirichlet problem on `domain` for the field 𝓗 with upward normal.
///
/// A cold start ramps λ𝓗 from λ = 1/m to 1 for each schedule length m in
/// `opts.stages`; a warm start first tries λ = 1 directly.
pub fn solve_dirichlet(
    field: &CurvatureField,
    domain: &GridDomain,
    init: &InitialGuess,
    opts: &SolverOptions,
) -> Result<GraphSolution> {
    let start = match init {
        InitialGuess::Cold => harmonic_extension(domain)?,
        InitialGuess::Field(f) => {
            if f.len() != domain.kind.len() {
                return Err(Error::invalid("initial field has the wrong length"));
            }
            domain.assemble_field(&domain.extract_unknowns(f))
        }
    };
    let mut schedules: Vec<usize> = Vec::new();
    if matches!(init, InitialGuess::Field(_)) {
        schedules.push(1);
    }
    schedules.extend(opts.stages.iter().copied().filter(|m| *m >= 1));
    if schedules.is_empty() {
        schedules.push(1);
    }

    let mut last_failure = None;
    'schedules: for &m in &schedules {
        let mut u = start.clone();
        let mut total = 0;
        let mut outcome = None;
        for stage in 1..=m {
            let lambda = stage as f64 / m as f64;
            match newton_stage(field, domain, &mut u, lambda, opts) {
                Ok(o) => {
                    total += o.iterations;
                    outcome = Some(o);
                }
                Err(mut nc) => {
                    nc.iterations += total;
                    last_failure = Some(nc);
                    continue 'schedules;
                }
            }
        }
        let o = outcome.expect("at least one stage");
        return GraphSolution::from_solved(field.clone(), domain.clone(), u, o.residual_norm, total, m);
    }
    Err(Error::NonConvergence(Box::new(last_failure.expect("a schedule ran"))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_solver::domain::GridDomain;

    fn fd_jacobian_check(field: &CurvatureField, lambda: f64) {
        let d = GridDomain::disk([0.0, 0.0], 0.4, 0.1).unwrap().with_boundary(|x, y| 0.3 * x - 0.1 * y * y).unwrap();
        let mut u = d.assemble_field(&vec![0.0; d.n_unknowns()]);
        for &k in &d.interior {
            let (x, y) = d.position(k);
            u[k] = 0.5 * x * y + 0.2 * x * x - 0.1 * y;
        }
        let (r0, jac) = residual_and_jacobian(field, &d, &u, lambda).unwrap();
        let eps = 1e-6;
        let mut worst = 0.0f64;
        for (col, &k) in d.interior.iter().enumerate() {
            let mut up = u.clone();
            up[k] += eps;
            let mut um = u.clone();
            um[k] -= eps;
            let rp = residual(field, &d, &up, lambda).unwrap();
            let rm = residual(field, &d, &um, lambda).unwrap();
            for row in 0..r0.len() {
                let fd = (rp[row] - rm[row]) / (2.0 * eps);
                worst = worst.max((fd - jac.get(row, col)).abs() / (1.0 + fd.abs()));
            }
        }
        assert!(worst < 1e-6, "jacobian mismatch {worst}");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        fd_jacobian_check(&CurvatureField::constant(1.0), 0.7);
        fd_jacobian_check(&CurvatureField::linear(1.0, 0.2, Vec3::new(0.3, -0.2, 1.0)).unwrap(), 1.0);
        let q = CurvatureField::analytic(crate::sphere_field::Formula::Quadratic {
            a: [[0.3, 0.1, 0.0], [0.0, -0.2, 0.4], [0.0, 0.0, 0.5]],
            b: [0.1, 0.2, 0.3],
            c: 1.0,
        })
        .unwrap();
        fd_jacobian_check(&q, 1.0);
    }

    #[test]
    fn harmonic_extension_reproduces_affine_data() {
        let g = |x: f64, y: f64| 0.7 * x - 0.2 * y - 0.4;
        let d = GridDomain::disk([0.1, 0.0], 0.5, 1.0 / 16.0).unwrap().with_boundary(g).unwrap();
        let u = harmonic_extension(&d).unwrap();
        for &k in &d.interior {
            let (x, y) = d.position(k);
            assert!((u[k] - g(x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_of_plane_is_zero() {
        let d = GridDomain::rectangle([0.0, 0.0], [1.0, 1.0], 0.1).unwrap().with_boundary(|x, y| 2.0 * x - y + 1.0).unwrap();
        let mut u = d.assemble_field(&vec![0.0; d.n_unknowns()]);
        for &k in &d.interior {
            let (x, y) = d.position(k);
            u[k] = 2.0 * x - y + 1.0;
        }
        let div = discrete_divergence(&d, &u);
        for &k in &d.interior {
            assert!(div[k].abs() < 1e-12);
        }
    }
}
