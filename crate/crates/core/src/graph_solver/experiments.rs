//! Growing-domain height experiments and the curvature-estimate diagnostic.

use rayon::prelude::*;
use serde::Serialize;

use super::newton::{solve_dirichlet, InitialGuess, SolverOptions};
use super::{GraphSolution, GridDomain};
use crate::error::{Error, Result};
use crate::sphere_field::{fibonacci_sphere, CurvatureField, PositivityReport};
use crate::stability::surface::DiscreteSurface;
use crate::Vec3;

#[derive(Clone, Debug, Serialize)]
pub struct HeightRow {
    pub size: f64,
    pub max_height: Option<f64>,
    pub residual_norm: Option<f64>,
    /// Solver message when no graph was found.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HeightTable {
    pub rows: Vec<HeightRow>,
    /// Largest height among converged domains.
    pub supremum: f64,
    /// Heights of converged domains never decrease with size.
    pub monotone: bool,
    /// Increment between the last two converged heights.
    pub final_increment: Option<f64>,
    /// `final_increment` below the saturation threshold.
    pub saturated: bool,
    /// First size beyond a converged one at which no graph was found.
    pub nonexistence_from: Option<f64>,
    pub positive_on_upper_hemisphere: bool,
    pub item5: PositivityReport,
}

/// Solves the zero-boundary Dirichlet problem on each `(size, domain)` and
/// tabulates max |u|. Nonconvergence is recorded per row, not propagated.
pub fn height_experiment(
    field: &CurvatureField,
    family: &[(f64, GridDomain)],
    opts: &SolverOptions,
    saturation_threshold: f64,
) -> Result<HeightTable> {
    if family.is_empty() {
        return Err(Error::invalid("empty domain family"));
    }
    let item5 = field.positivity_range(2000, &Vec3::x(), &Vec3::y())?;
    let mut positive = true;
    for p in fibonacci_sphere(2000).into_iter().filter(|p| p.z >= 0.0) {
        positive &= field.eval(&p)? > 0.0;
    }

    let rows: Vec<HeightRow> = family
        .par_iter()
        .map(|(size, dom)| {
            let dom = dom.clone().with_boundary(|_, _| 0.0)?;
            Ok(match solve_dirichlet(field, &dom, &InitialGuess::Cold, opts) {
                Ok(sol) => HeightRow {
                    size: *size,
                    max_height: Some(sol.max_height()),
                    residual_norm: Some(sol.residual_norm),
                    failure: None,
                },
                Err(e @ Error::NonConvergence(_)) => {
                    HeightRow { size: *size, max_height: None, residual_norm: None, failure: Some(e.to_string()) }
                }
                Err(e) => return Err(e),
            })
        })
        .collect::<Result<_>>()?;

    let heights: Vec<f64> = rows.iter().filter_map(|r| r.max_height).collect();
    let supremum = heights.iter().fold(0.0f64, |m, v| m.max(*v));
    let monotone = heights.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let final_increment = (heights.len() >= 2).then(|| (heights[heights.len() - 1] - heights[heights.len() - 2]).abs());
    let first_ok = rows.iter().position(|r| r.max_height.is_some());
    let nonexistence_from =
        first_ok.and_then(|i| rows[i..].iter().find(|r| r.max_height.is_none()).map(|r| r.size));
    Ok(HeightTable {
        saturated: final_increment.is_some_and(|d| d < saturation_threshold),
        rows,
        supremum,
        monotone,
        final_increment,
        nonexistence_from,
        positive_on_upper_hemisphere: positive,
        item5,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurvatureDiagnostic {
    /// sup over interior nodes of |σ(p)|·d(p, ∂Σ).
    pub value: f64,
    pub location: (f64, f64),
}

/// The curvature-estimate quantity |σ|·d_Σ(·, ∂Σ) with intrinsic distances on the graph.
pub fn curvature_diagnostic(sol: &GraphSolution) -> Result<CurvatureDiagnostic> {
    let surf = DiscreteSurface::from_graph(sol)?;
    let dist = surf.boundary_distance()?;
    let mut best = CurvatureDiagnostic { value: 0.0, location: (f64::NAN, f64::NAN) };
    for (v, &node) in surf.source_node.iter().enumerate() {
        if !surf.interior[v] {
            continue;
        }
        let val = surf.sigma_norm2[v].max(0.0).sqrt() * dist[v];
        if val > best.value || best.location.0.is_nan() {
            best = CurvatureDiagnostic { value: val, location: sol.domain.position(node) };
        }
    }
    Ok(best)
}
