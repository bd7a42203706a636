//! Rotationally symmetric 𝓗-surfaces for zonal fields 𝓗(x) = 𝔥(⟨x, e₃⟩).
//!
//! A profile (x(s), z(s)) with tangent angle θ, revolved about the z-axis and
//! given the normal η = (−sinθ cosφ, −sinθ sinφ, cosθ), has principal
//! curvatures θ' (meridian) and sinθ/x (parallel). Since ⟨η, e₃⟩ = cosθ the
//! prescribed-curvature condition becomes
//!
//! ```text
//! x' = cosθ,  z' = sinθ,  θ' = 2𝔥(cosθ) − sinθ/x.
//! ```
//!
//! Starting at the bottom pole the orientation is inward on convex profiles.
//! Near the pole the quotient sinθ/x is 0/0, so the first stretch uses the
//! series solution with a = 𝔥(1), k = 𝔥'(1):
//!
//! ```text
//! θ = a s − k a² s³/4,   x = s − a² s³/6,   z = a s²/2 + (−k a²/4 − a³/6) s⁴/4.
//! ```

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sphere_field::ZonalFunction;
use crate::stability::surface::{DiscreteSurface, ProfilePoint};
use crate::{Mat3, Vec3};

/// Default RK4 step.
pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Serialize)]
pub enum ProfileStart {
    /// Bottom pole at the origin, heading in the +x direction.
    Pole,
    /// Arbitrary start away from the axis.
    Point { x0: f64, z0: f64, theta0: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProfileEnd {
    /// Reached s_max.
    ArcLength,
    /// Reached the axis at a regular pole.
    Pole,
    /// Stopped where θ = π/2.
    Horizontal,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileCurve {
    pub zonal: ZonalFunction,
    pub start: ProfileStart,
    pub step: f64,
    /// Arclength below which the pole series is used (pole starts only).
    pub series_length: f64,
    pub s: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub theta: Vec<f64>,
    pub dtheta: Vec<f64>,
    pub end: ProfileEnd,
    /// Arclength of the endpoint: the far pole, the horizontal point, or s_max.
    pub length: f64,
    /// Height of the far pole when one was reached.
    pub far_pole_z: Option<f64>,
    /// Tangent angle extrapolated to the axis crossing.
    pub axis_crossing_angle: Option<f64>,
    /// Smallest meridian and parallel curvatures seen along the profile.
    pub min_meridian_curvature: f64,
    pub min_parallel_curvature: f64,
}

#[derive(Clone, Copy)]
struct State {
    x: f64,
    z: f64,
    theta: f64,
}

fn rhs(zonal: &ZonalFunction, y: &State) -> Result<[f64; 3]> {
    let (s, c) = y.theta.sin_cos();
    let h = zonal.eval(c);
    if !h.is_finite() {
        return Err(Error::Evaluation(format!("profile function non-finite at t = {c}")));
    }
    Ok([c, s, 2.0 * h - s / y.x])
}

fn series(zonal: &ZonalFunction, s: f64) -> (State, f64) {
    let a = zonal.eval(1.0);
    let k = zonal.d1(1.0);
    let b = -k * a * a / 4.0;
    let st = State {
        theta: a * s + b * s.powi(3),
        x: s - a * a * s.powi(3) / 6.0,
        z: a * s * s / 2.0 + (b - a.powi(3) / 6.0) * s.powi(4) / 4.0,
    };
    (st, a + 3.0 * b * s * s)
}

/// Options for stopping a profile early.
#[derive(Clone, Copy, Debug, Default)]
pub struct ProfileStop {
    /// Stop where θ first reaches π/2.
    pub at_horizontal: bool,
}

/// Integrates the profile ODE from `start` up to arclength `s_max`.
pub fn integrate_profile(zonal: &ZonalFunction, start: ProfileStart, s_max: f64, step: f64) -> Result<ProfileCurve> {
    integrate_profile_with(zonal, start, s_max, step, ProfileStop::default())
}

pub fn integrate_profile_with(
    zonal: &ZonalFunction,
    start: ProfileStart,
    s_max: f64,
    step: f64,
    stop: ProfileStop,
) -> Result<ProfileCurve> {
    if !(s_max > 0.0 && step > 0.0 && step < s_max) {
        return Err(Error::invalid("need 0 < step < s_max"));
    }
    let mut s_vals = Vec::new();
    let mut states = Vec::new();
    let mut derivs: Vec<[f64; 3]> = Vec::new();
    let series_length;
    let mut s;
    let mut y;
    match start {
        ProfileStart::Pole => {
            series_length = 10.0 * step;
            // dense series samples up to the hand-off point
            for m in 0..=10 {
                let sm = m as f64 * step;
                let (st, dth) = series(zonal, sm);
                s_vals.push(sm);
                states.push(st);
                derivs.push([st.theta.cos(), st.theta.sin(), dth]);
            }
            s = series_length;
            y = *states.last().unwrap();
        }
        ProfileStart::Point { x0, z0, theta0 } => {
            if !(x0 > 0.0) {
                return Err(Error::invalid("a non-pole start needs x0 > 0"));
            }
            series_length = 0.0;
            s = 0.0;
            y = State { x: x0, z: z0, theta: theta0 };
            s_vals.push(0.0);
            states.push(y);
            derivs.push(rhs(zonal, &y)?);
        }
    }

    let mut end = ProfileEnd::ArcLength;
    let mut length = s_max;
    let mut far_pole_z = None;
    let mut axis_crossing_angle = None;
    while s < s_max - 1e-12 {
        let h = step.min(s_max - s);
        let k1 = *derivs.last().unwrap();
        let add = |y: &State, k: &[f64; 3], c: f64| State { x: y.x + c * k[0], z: y.z + c * k[1], theta: y.theta + c * k[2] };
        let y2 = add(&y, &k1, 0.5 * h);
        let k2 = rhs(zonal, &y2)?;
        let y3 = add(&y, &k2, 0.5 * h);
        let k3 = rhs(zonal, &y3)?;
        let y4 = add(&y, &k3, h);
        let k4 = rhs(zonal, &y4)?;
        let ny = State {
            x: y.x + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            z: y.z + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            theta: y.theta + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        };
        if !(ny.x > 0.0) || !ny.x.is_finite() {
            return Err(Error::AxisCollision { s: s + h, theta: ny.theta });
        }
        let nk = rhs(zonal, &ny)?;
        s += h;
        y = ny;
        s_vals.push(s);
        states.push(y);
        derivs.push(nk);

        if stop.at_horizontal && y.theta >= FRAC_PI_2 {
            let n = states.len();
            let (a, b) = (n - 2, n - 1);
            let hh = s_vals[b] - s_vals[a];
            let tau = bisect(|t| interp(&states, &derivs, a, b, hh, t).theta - FRAC_PI_2);
            let st = interp(&states, &derivs, a, b, hh, tau);
            let st = State { theta: FRAC_PI_2, ..st };
            let sh = s_vals[a] + tau * hh;
            states[b] = st;
            derivs[b] = rhs(zonal, &st)?;
            s_vals[b] = sh;
            end = ProfileEnd::Horizontal;
            length = sh;
            break;
        }

        // approaching the axis: decide between a regular pole and a collision
        if y.x < 10.0 * step && nk[0] < 0.0 {
            let to_axis = y.x / (-nk[0]);
            let crossing = y.theta + nk[2] * to_axis;
            let regular = crossing.sin().abs() < 0.05 && crossing.cos() < 0.0;
            if !regular {
                return Err(Error::AxisCollision { s, theta: crossing });
            }
            // finish along the osculating circle
            let kappa = nk[2];
            let turn = PI * (crossing / PI).round() - y.theta;
            length = s + turn / kappa;
            far_pole_z = Some(y.z + (y.theta.cos() - (y.theta + turn).cos()) / kappa);
            axis_crossing_angle = Some(crossing);
            end = ProfileEnd::Pole;
            break;
        }
    }

    let mut min_k1 = f64::INFINITY;
    let mut min_k2 = f64::INFINITY;
    for (st, d) in states.iter().zip(&derivs) {
        min_k1 = min_k1.min(d[2]);
        if st.x > 0.0 {
            min_k2 = min_k2.min(st.theta.sin() / st.x);
        }
    }
    Ok(ProfileCurve {
        zonal: zonal.clone(),
        start,
        step,
        series_length,
        s: s_vals,
        x: states.iter().map(|s| s.x).collect(),
        z: states.iter().map(|s| s.z).collect(),
        theta: states.iter().map(|s| s.theta).collect(),
        dtheta: derivs.iter().map(|d| d[2]).collect(),
        end,
        length,
        far_pole_z,
        axis_crossing_angle,
        min_meridian_curvature: min_k1,
        min_parallel_curvature: min_k2,
    })
}

fn hermite(p0: f64, m0: f64, p1: f64, m1: f64, t: f64) -> f64 {
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
}

fn interp(states: &[State], derivs: &[[f64; 3]], a: usize, b: usize, h: f64, t: f64) -> State {
    State {
        x: hermite(states[a].x, derivs[a][0] * h, states[b].x, derivs[b][0] * h, t),
        z: hermite(states[a].z, derivs[a][1] * h, states[b].z, derivs[b][1] * h, t),
        theta: hermite(states[a].theta, derivs[a][2] * h, states[b].theta, derivs[b][2] * h, t),
    }
}

fn bisect(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    let flo = f(lo);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl ProfileCurve {
    /// Dense output (x, z, θ, θ') at arclength s within the integrated range.
    pub fn eval(&self, s: f64) -> ProfilePoint {
        if matches!(self.start, ProfileStart::Pole) && s <= self.series_length {
            let (st, dth) = series(&self.zonal, s.max(0.0));
            return ProfilePoint { x: st.x, z: st.z, theta: st.theta, dtheta: dth };
        }
        let n = self.s.len();
        let k = match self.s.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(k) => k.min(n - 2),
            Err(k) => k.clamp(1, n - 1) - 1,
        };
        let (a, b) = (k, k + 1);
        let h = self.s[b] - self.s[a];
        let t = (s - self.s[a]) / h;
        let cos_a = self.theta[a].cos();
        let cos_b = self.theta[b].cos();
        let x = hermite(self.x[a], cos_a * h, self.x[b], cos_b * h, t);
        let z = hermite(self.z[a], self.theta[a].sin() * h, self.z[b], self.theta[b].sin() * h, t);
        let theta = hermite(self.theta[a], self.dtheta[a] * h, self.theta[b], self.dtheta[b] * h, t);
        let dtheta = 2.0 * self.zonal.eval(theta.cos()) - theta.sin() / x;
        ProfilePoint { x, z, theta, dtheta }
    }

    /// Max |(x')² + (z')² − 1| from central differences of the samples.
    pub fn unit_speed_defect(&self) -> f64 {
        (1..self.s.len().saturating_sub(1))
            .map(|i| {
                let ds = self.s[i + 1] - self.s[i - 1];
                let dx = (self.x[i + 1] - self.x[i - 1]) / ds;
                let dz = (self.z[i + 1] - self.z[i - 1]) / ds;
                (dx * dx + dz * dz - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// θ is nondecreasing along the samples.
    pub fn theta_monotone(&self) -> bool {
        self.theta.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn pole_to_pole(&self) -> bool {
        self.end == ProfileEnd::Pole
    }

    pub fn diagnostics(&self) -> ProfileDiagnostics {
        ProfileDiagnostics {
            pole_to_pole: self.pole_to_pole(),
            length: self.length,
            far_pole_z: self.far_pole_z,
            axis_crossing_angle: self.axis_crossing_angle,
            unit_speed_defect: self.unit_speed_defect(),
            convex: self.min_meridian_curvature > 0.0 && self.min_parallel_curvature > 0.0,
            min_meridian_curvature: self.min_meridian_curvature,
            min_parallel_curvature: self.min_parallel_curvature,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProfileDiagnostics {
    pub pole_to_pole: bool,
    pub length: f64,
    pub far_pole_z: Option<f64>,
    pub axis_crossing_angle: Option<f64>,
    pub unit_speed_defect: f64,
    pub convex: bool,
    pub min_meridian_curvature: f64,
    pub min_parallel_curvature: f64,
}

/// A closed or open revolved surface together with the profile that generated it.
#[derive(Clone, Debug)]
pub struct RotationalSurface {
    pub profile: ProfileCurve,
    pub surface: DiscreteSurface,
    /// Max deviation between the computed upper half and the mirror of the lower half.
    pub mirror_defect: Option<f64>,
    /// Radius of the boundary circle for hemispheres.
    pub boundary_radius: Option<f64>,
    /// Half-length of the profile to the equator (spheres) or full length (hemispheres).
    pub equator_arclength: f64,
    pub equatorial_radius: f64,
    pub polar_height: f64,
}

fn check_positive(zonal: &ZonalFunction, lo: f64, hi: f64) -> Option<f64> {
    (0..=2000)
        .map(|k| lo + (hi - lo) * k as f64 / 2000.0)
        .find(|&t| !(zonal.eval(t) > 0.0))
}

/// Revolves the pole-to-pole profile of an even positive 𝔥 into a closed surface
/// with `n_s` rings of `n_phi` vertices.
pub fn build_sphere(zonal: &ZonalFunction, n_s: usize, n_phi: usize, step: f64) -> Result<RotationalSurface> {
    let field = zonal.to_field(Vec3::z())?;
    let refl = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
    let asym = field.symmetry_residual(&refl)?;
    if asym > 1e-12 {
        return Err(Error::Construction(format!("profile function is not even (residual {asym:.2e})")));
    }
    if let Some(t) = check_positive(zonal, -1.0, 1.0) {
        return Err(Error::Construction(format!("profile function is not positive at t = {t}")));
    }
    // generous arclength: the sphere lies inside a ball of radius 1/min 𝔥
    let hmin = (0..=200).map(|k| zonal.eval(-1.0 + k as f64 / 100.0)).fold(f64::INFINITY, f64::min);
    let s_max = 4.0 * PI / hmin;
    let full = integrate_profile(zonal, ProfileStart::Pole, s_max, step)?;
    if !full.pole_to_pole() {
        return Err(Error::Construction("profile does not close pole to pole".into()));
    }
    let half = integrate_profile_with(zonal, ProfileStart::Pole, s_max, step, ProfileStop { at_horizontal: true })?;
    if half.end != ProfileEnd::Horizontal {
        return Err(Error::Construction("profile never becomes vertical".into()));
    }
    let s_eq = half.length;
    let eq = half.eval(s_eq);
    let length = 2.0 * s_eq;

    // mirror check of the independently integrated upper half
    let mut mirror = 0.0f64;
    let m = 200;
    for k in 1..m {
        let sig = s_eq * k as f64 / m as f64 * 0.95;
        let lower = half.eval(s_eq - sig);
        let upper = full.eval(s_eq + sig);
        mirror = mirror
            .max((upper.x - lower.x).abs())
            .max((upper.z - (2.0 * eq.z - lower.z)).abs())
            .max((upper.theta - (PI - lower.theta)).abs());
    }

    let profile_fn = |s: f64| -> ProfilePoint {
        if s <= s_eq {
            half.eval(s)
        } else {
            let p = half.eval(length - s);
            ProfilePoint { x: p.x, z: 2.0 * eq.z - p.z, theta: PI - p.theta, dtheta: p.dtheta }
        }
    };
    let surface = DiscreteSurface::revolved(&profile_fn, length, n_s, n_phi, true)?;
    Ok(RotationalSurface {
        profile: half,
        surface,
        mirror_defect: Some(mirror),
        boundary_radius: None,
        equator_arclength: s_eq,
        equatorial_radius: eq.x,
        polar_height: 2.0 * eq.z,
    })
}

/// Truncates the pole profile where the normal becomes horizontal and revolves it.
pub fn build_hemisphere(zonal: &ZonalFunction, n_s: usize, n_phi: usize, step: f64) -> Result<RotationalSurface> {
    if let Some(t) = check_positive(zonal, 0.0, 1.0) {
        return Err(Error::NotAHemisphere(format!("𝔥 is not positive on [0, 1] (fails at t = {t})")));
    }
    let hmin = (0..=100).map(|k| zonal.eval(k as f64 / 100.0)).fold(f64::INFINITY, f64::min);
    let s_max = 2.0 * PI / hmin;
    let prof = match integrate_profile_with(zonal, ProfileStart::Pole, s_max, step, ProfileStop { at_horizontal: true }) {
        Ok(p) => p,
        Err(Error::AxisCollision { s, theta }) => {
            return Err(Error::NotAHemisphere(format!("profile hits the axis at s = {s:.4} (θ = {theta:.4})")))
        }
        Err(e) => return Err(e),
    };
    if prof.end != ProfileEnd::Horizontal {
        return Err(Error::NotAHemisphere("θ does not reach π/2 within the arclength budget".into()));
    }
    if !(prof.min_meridian_curvature > 0.0 && prof.min_parallel_curvature > 0.0) {
        return Err(Error::NotAHemisphere("profile is not strictly convex".into()));
    }
    let l = prof.length;
    let end = prof.eval(l);
    let surface = DiscreteSurface::revolved(&|s| prof.eval(s), l, n_s, n_phi, false)?;
    Ok(RotationalSurface {
        mirror_defect: None,
        boundary_radius: Some(end.x),
        equator_arclength: l,
        equatorial_radius: end.x,
        polar_height: end.z,
        profile: prof,
        surface,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_circle_profile() {
        let p = integrate_profile(&ZonalFunction::constant(1.0), ProfileStart::Pole, 5.0, 1e-3).unwrap();
        assert!(p.pole_to_pole());
        assert_abs_diff_eq!(p.length, PI, epsilon = 1e-6);
        assert_abs_diff_eq!(p.far_pole_z.unwrap(), 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(p.axis_crossing_angle.unwrap(), PI, epsilon = 1e-3);
        for (i, s) in p.s.iter().enumerate() {
            assert_abs_diff_eq!(p.x[i], s.sin(), epsilon = 1e-9);
            assert_abs_diff_eq!(p.z[i], 1.0 - s.cos(), epsilon = 1e-9);
            assert_abs_diff_eq!(p.theta[i], *s, epsilon = 1e-9);
        }
        assert!(p.unit_speed_defect() < 1e-5);
    }

    #[test]
    fn scaled_circle() {
        let p = integrate_profile(&ZonalFunction::constant(2.0), ProfileStart::Pole, 3.0, 5e-4).unwrap();
        assert!(p.pole_to_pole());
        assert_abs_diff_eq!(p.length, PI / 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(p.far_pole_z.unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn even_zonal_profile_is_convex_and_closes() {
        let z = ZonalFunction::new(vec![1.0, 0.0, 0.5]);
        let p = integrate_profile(&z, ProfileStart::Pole, 10.0, 1e-3).unwrap();
        assert!(p.pole_to_pole());
        assert!(p.theta_monotone());
        let d = p.diagnostics();
        assert!(d.convex);
        // ODE residual away from the axis
        for i in 1..p.s.len() - 1 {
            if p.x[i] > 0.05 {
                let d = (p.theta[i + 1] - p.theta[i - 1]) / (p.s[i + 1] - p.s[i - 1]);
                let r = d - (2.0 * z.eval(p.theta[i].cos()) - p.theta[i].sin() / p.x[i]);
                assert!(r.abs() < 1e-5);
            }
        }
    }

    #[test]
    fn point_start_and_collision() {
        // a profile aimed at the axis with the wrong angle cannot close regularly
        let z = ZonalFunction::constant(1.0);
        let r = integrate_profile(&z, ProfileStart::Point { x0: 0.3, z0: 0.0, theta0: 0.9 * PI }, 3.0, 1e-3);
        assert!(matches!(r, Err(Error::AxisCollision { .. })));
        assert!(integrate_profile(&z, ProfileStart::Point { x0: 0.0, z0: 0.0, theta0: 0.0 }, 1.0, 1e-3).is_err());
    }

    #[test]
    fn hemisphere_examples() {
        let hs = build_hemisphere(&ZonalFunction::constant(1.0), 32, 32, 1e-3).unwrap();
        assert_abs_diff_eq!(hs.boundary_radius.unwrap(), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(hs.profile.length, FRAC_PI_2, epsilon = 1e-8);
        let tilted = build_hemisphere(&ZonalFunction::new(vec![1.0, 0.5]), 32, 32, 1e-3).unwrap();
        // the boundary circle is wider than the comparison circle of curvature 2𝔥(0)
        assert!(tilted.boundary_radius.unwrap() > 0.5);
        let bad = build_hemisphere(&ZonalFunction::new(vec![1.0, -2.0]), 16, 16, 1e-3);
        assert!(matches!(bad, Err(Error::NotAHemisphere(_))));
    }

    #[test]
    fn sphere_rejects_odd_data() {
        assert!(matches!(
            build_sphere(&ZonalFunction::new(vec![1.0, 0.3]), 16, 16, 1e-3),
            Err(Error::Construction(_))
        ));
        assert!(matches!(
            build_sphere(&ZonalFunction::new(vec![-1.0, 0.0, 0.5]), 16, 16, 1e-3),
            Err(Error::Construction(_))
        ));
    }

    #[test]
    fn round_and_scaled_spheres() {
        let s = build_sphere(&ZonalFunction::constant(1.0), 32, 32, 1e-3).unwrap();
        assert_abs_diff_eq!(s.equatorial_radius, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.polar_height, 2.0, epsilon = 1e-9);
        assert!(s.mirror_defect.unwrap() < 1e-8);
        let s2 = build_sphere(&ZonalFunction::constant(2.0), 32, 32, 1e-3).unwrap();
        assert_abs_diff_eq!(s2.equatorial_radius, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn non_round_sphere_matches_fine_shooting() {
        let z = ZonalFunction::new(vec![1.0, 0.0, 1.0]);
        let s = build_sphere(&z, 32, 32, 1e-3).unwrap();
        let fine = integrate_profile_with(&z, ProfileStart::Pole, 10.0, 1e-4, ProfileStop { at_horizontal: true }).unwrap();
        let e = fine.eval(fine.length);
        assert_abs_diff_eq!(s.equatorial_radius, e.x, epsilon = 1e-9);
        assert_abs_diff_eq!(s.polar_height, 2.0 * e.z, epsilon = 1e-9);
        assert!((s.equatorial_radius - 0.5 * s.polar_height).abs() > 1e-3);
        assert!(s.mirror_defect.unwrap() < 1e-7);
    }
}
