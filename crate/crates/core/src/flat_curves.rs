//! Flat 𝓗-cylinders α × R.
//!
//! For a plane Π = span(e₁, e₂) the cylinder over a planar curve α with unit
//! normal n(θ) = −sinθ e₁ + cosθ e₂ has mean curvature κ_α/2, so it is an
//! 𝓗-surface exactly when the turning angle solves
//!
//! ```text
//! θ'(s) = 2 𝓗̂(θ(s)),   𝓗̂(θ) = 𝓗(−sinθ e₁ + cosθ e₂)
//! ```
//!
//! Integrating α' = (cosθ, sinθ) over one turn gives α(T) − α(0) = J·I/2 where
//! I = ∫ ξ/𝓗(ξ) dξ is the closure integral over the great circle and J a
//! quarter turn. The geometric gap is therefore |I|/2, which fixes how the two
//! closure tolerances are coupled.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sphere_field::{check_plane_basis, CurvatureField};
use crate::{Vec2, Vec3};

/// Below this |𝓗̂| the turning angle is frozen.
pub const FREEZE_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClosureTolerances {
    /// Bound on |∫ ξ/𝓗(ξ) dξ|.
    pub integral: f64,
    /// Bound on |α(s₀+T) − α(s₀)|.
    pub geometric: f64,
}

impl Default for ClosureTolerances {
    fn default() -> Self {
        ClosureTolerances { integral: 1e-6, geometric: 0.5e-6 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PlanarCurveSolution {
    pub s_samples: Vec<f64>,
    pub theta: Vec<f64>,
    pub points: Vec<Vec2>,
    pub plane_basis: (Vec3, Vec3),
    pub step: f64,
    /// Geometric closure after one full turn of θ.
    pub closed: bool,
    /// |α(s₀+T) − α(s₀)|, known only when θ completed a full turn within s_max.
    pub closure_gap: Option<f64>,
    /// Arclength T of one full turn of θ, when θ never stalls on the circle.
    pub period_estimate: Option<f64>,
}

/// 𝓗̂(θ) for the plane (e1, e2).
pub fn restricted(field: &CurvatureField, e1: &Vec3, e2: &Vec3, theta: f64) -> Result<f64> {
    field.eval(&(e1 * -theta.sin() + e2 * theta.cos()))
}

struct Rhs<'a> {
    field: &'a CurvatureField,
    e1: Vec3,
    e2: Vec3,
}

impl Rhs<'_> {
    fn dtheta(&self, theta: f64) -> Result<f64> {
        let h = restricted(self.field, &self.e1, &self.e2, theta)?;
        Ok(if h.abs() < FREEZE_THRESHOLD { 0.0 } else { 2.0 * h })
    }

    fn eval(&self, y: [f64; 3]) -> Result<[f64; 3]> {
        Ok([self.dtheta(y[0])?, y[0].cos(), y[0].sin()])
    }
}

fn max_abs_on_circle(field: &CurvatureField, e1: &Vec3, e2: &Vec3) -> Result<f64> {
    let mut m = 0.0f64;
    for k in 0..720 {
        m = m.max(restricted(field, e1, e2, 2.0 * PI * k as f64 / 720.0)?.abs());
    }
    Ok(m)
}

/// Integrates the flat-cylinder ODE from θ(0) = θ₀, α(0) = 0 up to s_max with
/// the default step 1e−3/max|𝓗̂|.
pub fn integrate_flat_curve(
    field: &CurvatureField,
    e1: &Vec3,
    e2: &Vec3,
    theta0: f64,
    s_max: f64,
) -> Result<PlanarCurveSolution> {
    let m = max_abs_on_circle(field, e1, e2)?;
    let step = if m > 0.0 { 1e-3 / m.max(1.0) } else { 1e-3 };
    integrate_flat_curve_with_step(field, e1, e2, theta0, s_max, step)
}

/// As [`integrate_flat_curve`] with an explicit maximal RK4 step.
pub fn integrate_flat_curve_with_step(
    field: &CurvatureField,
    e1: &Vec3,
    e2: &Vec3,
    theta0: f64,
    s_max: f64,
    max_step: f64,
) -> Result<PlanarCurveSolution> {
    check_plane_basis(e1, e2)?;
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(Error::invalid("s_max must be positive and finite"));
    }
    if !(max_step > 0.0) {
        return Err(Error::invalid("step must be positive"));
    }
    let rhs = Rhs { field, e1: *e1, e2: *e2 };
    let n = (s_max / max_step).ceil() as usize;
    let h = s_max / n as f64;

    let mut s_samples = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut derivs = Vec::with_capacity(n + 1);
    let mut y = [theta0, 0.0, 0.0];
    let mut k1 = rhs.eval(y)?;
    s_samples.push(0.0);
    states.push(y);
    derivs.push(k1);
    for i in 0..n {
        let add = |y: [f64; 3], k: [f64; 3], c: f64| [y[0] + c * k[0], y[1] + c * k[1], y[2] + c * k[2]];
        let k2 = rhs.eval(add(y, k1, 0.5 * h))?;
        let k3 = rhs.eval(add(y, k2, 0.5 * h))?;
        let k4 = rhs.eval(add(y, k3, h))?;
        for j in 0..3 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        k1 = rhs.eval(y)?;
        s_samples.push((i + 1) as f64 * h);
        states.push(y);
        derivs.push(k1);
    }

    let mut sol = PlanarCurveSolution {
        theta: states.iter().map(|y| y[0]).collect(),
        points: states.iter().map(|y| Vec2::new(y[1], y[2])).collect(),
        s_samples,
        plane_basis: (*e1, *e2),
        step: h,
        closed: false,
        closure_gap: None,
        period_estimate: None,
    };

    // one full turn: locate θ(s*) = θ₀ ± 2π on the Hermite interpolant
    let target = |th: f64| th - theta0;
    let turn = sol.theta.last().map(|t| target(*t)).unwrap_or(0.0);
    if turn.abs() >= 2.0 * PI {
        let goal = 2.0 * PI * turn.signum();
        let i = sol.theta.iter().position(|t| (target(*t) - goal) * goal.signum() >= 0.0).unwrap();
        let (a, b) = (i - 1, i);
        let tau = hermite_root(
            sol.theta[a] - theta0 - goal,
            derivs[a][0] * h,
            sol.theta[b] - theta0 - goal,
            derivs[b][0] * h,
        );
        let interp = |j: usize| {
            hermite(states[a][j], derivs[a][j] * h, states[b][j], derivs[b][j] * h, tau)
        };
        let end = Vec2::new(interp(1), interp(2));
        let gap = end.norm();
        sol.period_estimate = Some(sol.s_samples[a] + tau * h);
        sol.closure_gap = Some(gap);
        sol.closed = gap <= ClosureTolerances::default().geometric;
    }
    Ok(sol)
}

fn hermite(p0: f64, m0: f64, p1: f64, m1: f64, t: f64) -> f64 {
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
}

fn hermite_root(p0: f64, m0: f64, p1: f64, m1: f64) -> f64 {
    // the interpolant is monotone on a step of a monotone θ; bisection then Newton polish
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if hermite(p0, m0, p1, m1, mid).signum() == p0.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Arclength of one full turn, T = ∫₀^{2π} dθ / (2|𝓗̂(θ)|), by composite Simpson.
/// `None` when 𝓗̂ vanishes somewhere on the circle.
pub fn period_quadrature(field: &CurvatureField, e1: &Vec3, e2: &Vec3, nodes: usize) -> Result<Option<f64>> {
    let n = nodes.max(8) & !1;
    let dt = 2.0 * PI / n as f64;
    let mut acc = 0.0;
    let mut sign = 0.0;
    for k in 0..n {
        let h = restricted(field, e1, e2, k as f64 * dt)?;
        if h.abs() < FREEZE_THRESHOLD || (sign != 0.0 && h.signum() != sign) {
            return Ok(None);
        }
        sign = h.signum();
        let w = if k % 2 == 0 { 2.0 } else { 4.0 };
        acc += w / (2.0 * h.abs());
    }
    Ok(Some(acc * dt / 3.0))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClosureVerdict {
    pub closed: bool,
    pub gap: Option<f64>,
    /// |∫ ξ/𝓗(ξ) dξ|, absent when 𝓗 vanishes on the circle.
    pub integral_norm: Option<f64>,
}

/// Classifies a solution as closed or open using both the geometric gap and
/// the closure integral, with the default coupled tolerances.
pub fn detect_closure(sol: &PlanarCurveSolution, field: &CurvatureField) -> Result<ClosureVerdict> {
    detect_closure_with(sol, field, ClosureTolerances::default())
}

pub fn detect_closure_with(
    sol: &PlanarCurveSolution,
    field: &CurvatureField,
    tol: ClosureTolerances,
) -> Result<ClosureVerdict> {
    let (e1, e2) = sol.plane_basis;
    let integral = match field.closure_integral(&e1, &e2) {
        Ok(v) => v.norm(),
        Err(Error::VanishingDenominator { .. }) => {
            return Ok(ClosureVerdict { closed: false, gap: sol.closure_gap, integral_norm: None })
        }
        Err(e) => return Err(e),
    };
    let gap = sol.closure_gap.ok_or_else(|| {
        Error::invalid("curve was not integrated over a full turn; increase s_max beyond the period")
    })?;
    let by_integral = integral < tol.integral;
    let by_gap = gap <= tol.geometric;
    if by_integral != by_gap {
        return Err(Error::Discretization(format!(
            "closure criteria disagree: |integral| = {integral:.3e}, gap = {gap:.3e}; refine the step"
        )));
    }
    Ok(ClosureVerdict { closed: by_gap, gap: Some(gap), integral_norm: Some(integral) })
}

impl PlanarCurveSolution {
    /// Max |θ' − 2𝓗̂(θ)| with θ' from fourth-order central differences.
    pub fn ode_residual(&self, field: &CurvatureField) -> Result<f64> {
        let (e1, e2) = self.plane_basis;
        let h = self.step;
        let th = &self.theta;
        let mut worst = 0.0f64;
        for i in 2..th.len().saturating_sub(2) {
            let d = (-th[i + 2] + 8.0 * th[i + 1] - 8.0 * th[i - 1] + th[i - 2]) / (12.0 * h);
            let hh = restricted(field, &e1, &e2, th[i])?;
            let expect = if hh.abs() < FREEZE_THRESHOLD { 0.0 } else { 2.0 * hh };
            worst = worst.max((d - expect).abs());
        }
        Ok(worst)
    }

    /// Max ||α'| − 1| from central differences of the samples.
    pub fn arclength_defect(&self) -> f64 {
        let p = &self.points;
        (1..p.len().saturating_sub(1))
            .map(|i| ((p[i + 1] - p[i - 1]).norm() / (2.0 * self.step) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Signed curvature of the sampled polyline at interior samples.
    pub fn discrete_curvature(&self) -> Vec<f64> {
        let p = &self.points;
        let h = self.step;
        (1..p.len().saturating_sub(1))
            .map(|i| {
                let d1 = (p[i + 1] - p[i - 1]) / (2.0 * h);
                let d2 = (p[i + 1] - p[i] * 2.0 + p[i - 1]) / (h * h);
                d1.x * d2.y - d1.y * d2.x
            })
            .collect()
    }

    /// Mean distance to the centroid over one period, for circular solutions.
    pub fn mean_radius(&self) -> Option<f64> {
        let t = self.period_estimate?;
        let n = ((t / self.step).floor() as usize).min(self.points.len());
        let pts = &self.points[..n];
        let c = pts.iter().fold(Vec2::zeros(), |a, p| a + p) / n as f64;
        Some(pts.iter().map(|p| (p - c).norm()).sum::<f64>() / n as f64)
    }

    /// Points of α in R³ through the plane basis.
    pub fn embedded_points(&self) -> Vec<Vec3> {
        let (e1, e2) = self.plane_basis;
        self.points.iter().map(|p| e1 * p.x + e2 * p.y).collect()
    }

    pub fn summary(&self) -> CurveSummary {
        CurveSummary {
            closed: self.closed,
            gap: self.closure_gap,
            period: self.period_estimate,
            step: self.step,
            samples: self.s_samples.len(),
            mean_radius: self.mean_radius(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurveSummary {
    pub closed: bool,
    pub gap: Option<f64>,
    pub period: Option<f64>,
    pub step: f64,
    pub samples: usize,
    pub mean_radius: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_field_gives_circle_of_radius_half() {
        let f = CurvatureField::constant(1.0);
        let sol = integrate_flat_curve(&f, &Vec3::x(), &Vec3::y(), 0.0, 2.0 * PI).unwrap();
        assert_abs_diff_eq!(sol.step, 1e-3, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.period_estimate.unwrap(), PI, epsilon = 1e-10);
        assert!(sol.closure_gap.unwrap() < 1e-8);
        assert!(sol.closed);
        assert_abs_diff_eq!(sol.mean_radius().unwrap(), 0.5, epsilon = 1e-6);
        for k in sol.discrete_curvature() {
            assert_abs_diff_eq!(k, 2.0, epsilon = 1e-5);
        }
        let v = detect_closure(&sol, &f).unwrap();
        assert!(v.closed);
    }

    #[test]
    fn vanishing_field_gives_straight_line() {
        let f = CurvatureField::linear(1.0, 0.0, Vec3::z()).unwrap();
        // on the (e1, e2) plane 𝓗̂ ≡ 0
        let th0 = 0.7;
        let sol = integrate_flat_curve(&f, &Vec3::x(), &Vec3::y(), th0, 3.0).unwrap();
        for (s, p) in sol.s_samples.iter().zip(&sol.points) {
            assert_abs_diff_eq!((p - Vec2::new(th0.cos(), th0.sin()) * *s).norm(), 0.0, epsilon = 1e-12);
        }
        assert!(sol.theta.iter().all(|t| *t == th0));
        let v = detect_closure(&sol, &f).unwrap();
        assert!(!v.closed && v.integral_norm.is_none());
    }

    #[test]
    fn grim_reaper_closed_form() {
        let f = CurvatureField::linear(1.0, 0.0, Vec3::z()).unwrap();
        let sol = integrate_flat_curve(&f, &Vec3::x(), &Vec3::z(), 0.0, 6.0).unwrap();
        for (i, s) in sol.s_samples.iter().enumerate() {
            let th = (2.0 * s).sinh().atan();
            assert_abs_diff_eq!(sol.theta[i], th, epsilon = 1e-10);
            assert_abs_diff_eq!(sol.points[i].x, th / 2.0, epsilon = 1e-10);
            assert_abs_diff_eq!(sol.points[i].y, 0.5 * (2.0 * s).cosh().ln(), epsilon = 1e-9);
        }
        assert!((sol.theta.last().unwrap() - PI / 2.0).abs() < 1e-4);
        assert!(sol.closure_gap.is_none() && !sol.closed);
    }

    #[test]
    fn rk4_order_of_ode_residual() {
        let f = CurvatureField::zonal(vec![1.0, 0.4, 0.3], Vec3::new(0.3, 0.2, 1.0)).unwrap();
        let (e1, e2) = (Vec3::x(), Vec3::y());
        let r: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&h| integrate_flat_curve_with_step(&f, &e1, &e2, 0.1, 4.0, h).unwrap().ode_residual(&f).unwrap())
            .collect();
        assert!(r[0] / r[1] >= 8.0 && r[1] / r[2] >= 8.0, "{r:?}");
    }

    #[test]
    fn even_zonal_in_equatorial_plane_closes() {
        let f = CurvatureField::zonal(vec![1.0, 0.0, 0.6], Vec3::new(0.1, 0.3, 1.0).normalize()).unwrap();
        let (e1, e2) = (Vec3::x(), Vec3::y());
        let t = period_quadrature(&f, &e1, &e2, 720).unwrap().unwrap();
        let sol = integrate_flat_curve(&f, &e1, &e2, 0.3, 1.2 * t).unwrap();
        assert_abs_diff_eq!(sol.period_estimate.unwrap(), t, epsilon = 1e-8);
        assert!(detect_closure(&sol, &f).unwrap().closed);
    }

    #[test]
    fn nonzero_integral_means_open_curve() {
        let f = CurvatureField::linear(0.5, 1.0, Vec3::x()).unwrap();
        let (e1, e2) = (Vec3::x(), Vec3::y());
        let i = f.closure_integral(&e1, &e2).unwrap().norm();
        let t = period_quadrature(&f, &e1, &e2, 720).unwrap().unwrap();
        let sol = integrate_flat_curve(&f, &e1, &e2, 0.0, 1.1 * t).unwrap();
        let v = detect_closure(&sol, &f).unwrap();
        assert!(!v.closed);
        assert_abs_diff_eq!(v.gap.unwrap(), i / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn missing_period_is_reported() {
        let f = CurvatureField::constant(1.0);
        let sol = integrate_flat_curve(&f, &Vec3::x(), &Vec3::y(), 0.0, 1.0).unwrap();
        assert!(detect_closure(&sol, &f).is_err());
        assert!(integrate_flat_curve(&f, &Vec3::x(), &Vec3::y(), 0.0, -1.0).is_err());
    }
}
