//! Prescribed curvature functions 𝓗 on the unit sphere and their spherical calculus.
//!
//! Derivatives are computed from a Euclidean extension F of 𝓗 to a neighborhood of
//! S². With DF and D²F at a unit vector x and an orthonormal tangent frame
//! {t₁, t₂} at x,
//!
//! ```text
//! ∇_S 𝓗 = (I − x xᵀ) DF
//! (∇²_S 𝓗)_ij = t_iᵀ D²F t_j − (x · DF) δ_ij
//! ```
//!
//! The second term is the correction from the sphere's second fundamental form
//! (the Euclidean acceleration of a great circle is −x). Analytic formulas supply
//! DF and D²F in closed form; every other field uses the degree-zero homogeneous
//! extension F(y) = 𝓗(y/|y|), for which x · DF = 0, and central differences
//! along the tangent frame.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Mat2, Mat3, Vec2, Vec3};

/// Default spherical step for finite-difference derivatives.
pub const DEFAULT_FD_STEP: f64 = 1e-4;
/// Default number of Simpson nodes on a great circle.
pub const CIRCLE_NODES: usize = 720;

/// Closed-form fields. `axis` vectors are normalized on construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum Formula {
    /// 𝓗 ≡ h0.
    Constant { h0: f64 },
    /// 𝓗(x) = a⟨x,axis⟩ + b.
    Linear { a: f64, b: f64, axis: [f64; 3] },
    /// 𝓗(x) = Σ coeffs[k] tᵏ with t = ⟨x,axis⟩.
    ZonalPoly { coeffs: Vec<f64>, axis: [f64; 3] },
    /// 𝓗(x) = xᵀAx + ⟨b,x⟩ + c, A symmetrized on construction.
    Quadratic { a: [[f64; 3]; 3], b: [f64; 3], c: f64 },
}

impl Formula {
    fn normalized(self) -> Result<Self> {
        let unit = |v: [f64; 3]| -> Result<[f64; 3]> {
            let n = Vec3::from(v).norm();
            if !(n.is_finite() && n > 0.0) {
                return Err(Error::invalid("field axis must be a nonzero finite vector"));
            }
            Ok([v[0] / n, v[1] / n, v[2] / n])
        };
        Ok(match self {
            Formula::Linear { a, b, axis } => Formula::Linear { a, b, axis: unit(axis)? },
            Formula::ZonalPoly { coeffs, axis } => {
                if coeffs.is_empty() {
                    return Err(Error::invalid("zonal polynomial needs at least one coefficient"));
                }
                Formula::ZonalPoly { coeffs, axis: unit(axis)? }
            }
            Formula::Quadratic { a, b, c } => {
                let mut s = a;
                for i in 0..3 {
                    for j in 0..3 {
                        s[i][j] = 0.5 * (a[i][j] + a[j][i]);
                    }
                }
                Formula::Quadratic { a: s, b, c }
            }
            f => f,
        })
    }

    /// Value, Euclidean gradient and Hessian of the polynomial extension at y.
    fn jet(&self, y: &Vec3) -> (f64, Vec3, Mat3) {
        match self {
            Formula::Constant { h0 } => (*h0, Vec3::zeros(), Mat3::zeros()),
            Formula::Linear { a, b, axis } => {
                let v = Vec3::from(*axis);
                (a * y.dot(&v) + b, v * *a, Mat3::zeros())
            }
            Formula::ZonalPoly { coeffs, axis } => {
                let v = Vec3::from(*axis);
                let p = ZonalFunction::new(coeffs.clone());
                let t = y.dot(&v);
                (p.eval(t), v * p.d1(t), v * v.transpose() * p.d2(t))
            }
            Formula::Quadratic { a, b, c } => {
                let am = Mat3::from_fn(|i, j| a[i][j]);
                let bv = Vec3::from(*b);
                (y.dot(&(am * y)) + bv.dot(y) + c, am * y * 2.0 + bv, am * 2.0)
            }
        }
    }
}

/// A polynomial 𝔥(t) on [−1, 1], the profile of a zonal field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZonalFunction {
    pub coeffs: Vec<f64>,
}

impl ZonalFunction {
    pub fn new(coeffs: Vec<f64>) -> Self {
        ZonalFunction { coeffs }
    }

    pub fn constant(h0: f64) -> Self {
        ZonalFunction { coeffs: vec![h0] }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn d1(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * t + k as f64 * c)
    }

    pub fn d2(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * t + (k * (k - 1)) as f64 * c)
    }

    /// True when only even powers appear.
    pub fn is_even(&self) -> bool {
        self.coeffs.iter().skip(1).step_by(2).all(|c| *c == 0.0)
    }

    /// The field x ↦ 𝔥(⟨x, axis⟩).
    pub fn to_field(&self, axis: Vec3) -> Result<CurvatureField> {
        CurvatureField::analytic(Formula::ZonalPoly {
            coeffs: self.coeffs.clone(),
            axis: axis.into(),
        })
    }
}

/// Values on a cell-centered latitude-longitude grid, interpolated bicubically.
///
/// Row `i` sits at colatitude `(i + ½)π/n_lat`, column `j` at longitude
/// `(j + ½)2π/n_lon`. Values are stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatLongGrid {
    pub n_lat: usize,
    pub n_lon: usize,
    pub values: Vec<f64>,
}

impl LatLongGrid {
    pub fn sample(n_lat: usize, n_lon: usize, f: impl Fn(&Vec3) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_lat * n_lon);
        for i in 0..n_lat {
            let colat = (i as f64 + 0.5) * PI / n_lat as f64;
            for j in 0..n_lon {
                let lon = (j as f64 + 0.5) * 2.0 * PI / n_lon as f64;
                values.push(f(&Vec3::new(
                    colat.sin() * lon.cos(),
                    colat.sin() * lon.sin(),
                    colat.cos(),
                )));
            }
        }
        LatLongGrid { n_lat, n_lon, values }
    }

    fn validate(&self) -> Result<()> {
        if self.n_lat < 4 || self.n_lon < 4 || self.n_lon % 2 != 0 {
            return Err(Error::invalid("sampled grid needs n_lat ≥ 4 and even n_lon ≥ 4"));
        }
        if self.values.len() != self.n_lat * self.n_lon {
            return Err(Error::invalid(format!(
                "sampled grid expects {} values, got {}",
                self.n_lat * self.n_lon,
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sampled grid contains non-finite values"));
        }
        Ok(())
    }

    /// Value at row `i` (possibly reflected across a pole) and column `j`.
    fn at(&self, i: isize, j: isize) -> f64 {
        let (n_lat, n_lon) = (self.n_lat as isize, self.n_lon as isize);
        let (mut i, mut j) = (i, j);
        if i < 0 {
            i = -1 - i;
            j += n_lon / 2;
        } else if i >= n_lat {
            i = 2 * n_lat - 1 - i;
            j += n_lon / 2;
        }
        let j = j.rem_euclid(n_lon);
        self.values[(i * n_lon + j) as usize]
    }

    pub fn interpolate(&self, x: &Vec3) -> f64 {
        let colat = x.z.clamp(-1.0, 1.0).acos();
        let lon = x.y.atan2(x.x).rem_euclid(2.0 * PI);
        let u = colat * self.n_lat as f64 / PI - 0.5;
        let v = lon * self.n_lon as f64 / (2.0 * PI) - 0.5;
        let (i0, j0) = (u.floor(), v.floor());
        let (wu, wv) = (catmull_rom(u - i0), catmull_rom(v - j0));
        let (i0, j0) = (i0 as isize, j0 as isize);
        let mut acc = 0.0;
        for (a, wa) in wu.iter().enumerate() {
            let mut row = 0.0;
            for (b, wb) in wv.iter().enumerate() {
                row += wb * self.at(i0 - 1 + a as isize, j0 - 1 + b as isize);
            }
            acc += wa * row;
        }
        acc
    }
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let (t2, t3) = (t * t, t * t * t);
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DerivativeMode {
    #[default]
    Analytic,
    /// Central differences with the given step along the tangent frame.
    FiniteDifference { step: f64 },
}

/// Declared invariances of a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymmetryTag {
    /// Invariance under reflection across the plane with this normal.
    Reflection { normal: [f64; 3] },
    /// Invariance under every rotation about this axis.
    Rotation { axis: [f64; 3] },
    /// 𝓗(−x) = 𝓗(x).
    Antipodal,
}

impl SymmetryTag {
    /// A finite set of isometries whose invariance certifies the tag.
    pub fn isometries(&self) -> Vec<Mat3> {
        match self {
            SymmetryTag::Reflection { normal } => {
                let n = Vec3::from(*normal).normalize();
                vec![Mat3::identity() - n * n.transpose() * 2.0]
            }
            SymmetryTag::Rotation { axis } => {
                let a = nalgebra::Unit::new_normalize(Vec3::from(*axis));
                [0.7, 1.9, PI, 4.1]
                    .iter()
                    .map(|&ang| *nalgebra::Rotation3::from_axis_angle(&a, ang).matrix())
                    .collect()
            }
            SymmetryTag::Antipodal => vec![-Mat3::identity()],
        }
    }
}

#[derive(Clone)]
enum Source {
    Formula(Formula),
    Sampled(Arc<LatLongGrid>),
    Custom(Arc<dyn Fn(&Vec3) -> f64 + Send + Sync>),
}

/// The prescribed function 𝓗 on S².
///
/// Immutable once built; cloning is cheap. Inputs to the evaluators are
/// normalized before use, so callers may pass vectors that are unit only up
/// to roundoff.
#[derive(Clone)]
pub struct CurvatureField {
    source: Source,
    mode: DerivativeMode,
    /// The field evaluates 𝓗(M x); identity unless composed with an isometry.
    transform: Mat3,
    symmetry_tags: Vec<SymmetryTag>,
}

impl fmt::Debug for CurvatureField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let src = match &self.source {
            Source::Formula(form) => format!("{form:?}"),
            Source::Sampled(g) => format!("Sampled({}x{})", g.n_lat, g.n_lon),
            Source::Custom(_) => "Custom".to_string(),
        };
        f.debug_struct("CurvatureField")
            .field("source", &src)
            .field("mode", &self.mode)
            .field("symmetry_tags", &self.symmetry_tags)
            .finish()
    }
}

/// JSON description of a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Analytic {
        formula: Formula,
        #[serde(default)]
        derivatives: DerivativeMode,
        #[serde(default)]
        symmetry_tags: Vec<SymmetryTag>,
    },
    Sampled {
        grid: LatLongGrid,
        #[serde(default)]
        fd_step: Option<f64>,
        #[serde(default)]
        symmetry_tags: Vec<SymmetryTag>,
    },
}

impl FieldSpec {
    pub fn build(&self) -> Result<CurvatureField> {
        match self {
            FieldSpec::Analytic { formula, derivatives, symmetry_tags } => {
                let mut f = CurvatureField::analytic(formula.clone())?;
                f = f.with_mode(*derivatives)?;
                f.symmetry_tags = symmetry_tags.clone();
                Ok(f)
            }
            FieldSpec::Sampled { grid, fd_step, symmetry_tags } => {
                let mut f = CurvatureField::sampled(grid.clone())?;
                if let Some(h) = fd_step {
                    f = f.with_mode(DerivativeMode::FiniteDifference { step: *h })?;
                }
                f.symmetry_tags = symmetry_tags.clone();
                Ok(f)
            }
        }
    }
}

impl CurvatureField {
    pub fn analytic(formula: Formula) -> Result<Self> {
        Ok(CurvatureField {
            source: Source::Formula(formula.normalized()?),
            mode: DerivativeMode::Analytic,
            transform: Mat3::identity(),
            symmetry_tags: Vec::new(),
        })
    }

    pub fn constant(h0: f64) -> Self {
        Self::analytic(Formula::Constant { h0 }).expect("constant field")
    }

    /// 𝓗(x) = a⟨x,axis⟩ + b.
    pub fn linear(a: f64, b: f64, axis: Vec3) -> Result<Self> {
        Self::analytic(Formula::Linear { a, b, axis: axis.into() })
    }

    pub fn zonal(coeffs: Vec<f64>, axis: Vec3) -> Result<Self> {
        Self::analytic(Formula::ZonalPoly { coeffs, axis: axis.into() })
    }

    pub fn sampled(grid: LatLongGrid) -> Result<Self> {
        grid.validate()?;
        Ok(CurvatureField {
            source: Source::Sampled(Arc::new(grid)),
            mode: DerivativeMode::FiniteDifference { step: DEFAULT_FD_STEP },
            transform: Mat3::identity(),
            symmetry_tags: Vec::new(),
        })
    }

    /// A field given by an arbitrary function of the unit vector. Derivatives
    /// are always finite differences.
    pub fn from_fn(f: impl Fn(&Vec3) -> f64 + Send + Sync + 'static) -> Self {
        CurvatureField {
            source: Source::Custom(Arc::new(f)),
            mode: DerivativeMode::FiniteDifference { step: DEFAULT_FD_STEP },
            transform: Mat3::identity(),
            symmetry_tags: Vec::new(),
        }
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Result<Self> {
        match mode {
            DerivativeMode::Analytic if !self.has_analytic_derivatives() => {
                return Err(Error::invalid("this field has no closed-form derivatives"))
            }
            DerivativeMode::FiniteDifference { step } if !(step > 0.0 && step < 0.1) => {
                return Err(Error::invalid("finite-difference step must lie in (0, 0.1)"))
            }
            _ => {}
        }
        self.mode = mode;
        Ok(self)
    }

    pub fn with_symmetry_tags(mut self, tags: Vec<SymmetryTag>) -> Self {
        self.symmetry_tags = tags;
        self
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn symmetry_tags(&self) -> &[SymmetryTag] {
        &self.symmetry_tags
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        matches!(self.source, Source::Formula(_))
    }

    pub fn formula(&self) -> Option<&Formula> {
        match &self.source {
            Source::Formula(f) if self.transform == Mat3::identity() => Some(f),
            _ => None,
        }
    }

    /// The profile 𝔥 and axis when the field is zonal in closed form.
    pub fn zonal_profile(&self) -> Option<(ZonalFunction, Vec3)> {
        let Source::Formula(f) = &self.source else { return None };
        let back = |axis: &[f64; 3]| self.transform.transpose() * Vec3::from(*axis);
        match f {
            Formula::Constant { h0 } => Some((ZonalFunction::constant(*h0), Vec3::z())),
            Formula::Linear { a, b, axis } => Some((ZonalFunction::new(vec![*b, *a]), back(axis))),
            Formula::ZonalPoly { coeffs, axis } => {
                Some((ZonalFunction::new(coeffs.clone()), back(axis)))
            }
            Formula::Quadratic { .. } => None,
        }
    }

    /// The field x ↦ 𝓗(M x) for an orthogonal M.
    pub fn composed(&self, m: &Mat3) -> Result<Self> {
        check_orthogonal(m)?;
        let mut out = self.clone();
        out.transform = self.transform * m;
        out.symmetry_tags.clear();
        Ok(out)
    }

    /// The field x ↦ 𝓗(−x), used when a surface's orientation is flipped.
    pub fn antipodal(&self) -> Self {
        self.composed(&-Mat3::identity()).expect("−I is orthogonal")
    }

    fn unit(x: &Vec3) -> Result<Vec3> {
        let n = x.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Evaluation(format!("cannot evaluate at non-unit vector {x:?}")));
        }
        let u = x / n;
        debug_assert!((u.norm() - 1.0).abs() <= 1e-12);
        Ok(u)
    }

    fn raw(&self, y: &Vec3) -> f64 {
        let y = self.transform * y;
        match &self.source {
            Source::Formula(f) => f.jet(&y).0,
            Source::Sampled(g) => g.interpolate(&y),
            Source::Custom(f) => f(&y),
        }
    }

    /// 𝓗(x).
    pub fn eval(&self, x: &Vec3) -> Result<f64> {
        let u = Self::unit(x)?;
        let v = self.raw(&u);
        if !v.is_finite() {
            return Err(Error::Evaluation(format!("field is non-finite at {u:?}")));
        }
        Ok(v)
    }

    /// Degree-zero homogeneous extension.
    fn homogeneous(&self, y: &Vec3) -> f64 {
        self.raw(&(y / y.norm()))
    }

    /// Value, spherical gradient and spherical Hessian in the frame at x.
    pub fn jet(&self, x: &Vec3) -> Result<(f64, Vec3, Mat2)> {
        let x = Self::unit(x)?;
        let (t1, t2) = tangent_frame(&x);
        let out = match (&self.source, self.mode) {
            (Source::Formula(f), DerivativeMode::Analytic) => {
                let m = self.transform;
                let (v, df, d2f) = f.jet(&(m * x));
                let df = m.transpose() * df;
                let d2f = m.transpose() * d2f * m;
                let grad = df - x * x.dot(&df);
                let normal = x.dot(&df);
                let h11 = t1.dot(&(d2f * t1)) - normal;
                let h22 = t2.dot(&(d2f * t2)) - normal;
                let h12 = t1.dot(&(d2f * t2));
                (v, grad, Mat2::new(h11, h12, h12, h22))
            }
            (_, mode) => {
                let h = match mode {
                    DerivativeMode::FiniteDifference { step } => step,
                    DerivativeMode::Analytic => DEFAULT_FD_STEP,
                };
                let f = |a: f64, b: f64| self.homogeneous(&(x + t1 * a + t2 * b));
                let f0 = f(0.0, 0.0);
                let (fp1, fm1, fp2, fm2) = (f(h, 0.0), f(-h, 0.0), f(0.0, h), f(0.0, -h));
                let g1 = (fp1 - fm1) / (2.0 * h);
                let g2 = (fp2 - fm2) / (2.0 * h);
                let h11 = (fp1 - 2.0 * f0 + fm1) / (h * h);
                let h22 = (fp2 - 2.0 * f0 + fm2) / (h * h);
                let h12 = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
                (f0, t1 * g1 + t2 * g2, Mat2::new(h11, h12, h12, h22))
            }
        };
        if !(out.0.is_finite() && out.1.iter().all(|v| v.is_finite()) && out.2.iter().all(|v| v.is_finite())) {
            return Err(Error::Evaluation(format!("non-finite derivatives at {x:?}")));
        }
        Ok(out)
    }

    /// Intrinsic spherical gradient ∇_S 𝓗 at x, a vector tangent to S² at x.
    pub fn grad_s(&self, x: &Vec3) -> Result<Vec3> {
        Ok(self.jet(x)?.1)
    }

    /// Spherical Hessian in the deterministic tangent frame at x.
    pub fn hess_s(&self, x: &Vec3) -> Result<Mat2> {
        Ok(self.jet(x)?.2)
    }

    /// The Hessian as a bilinear form on tangent vectors u, w at x.
    pub fn hess_s_bilinear(&self, x: &Vec3, u: &Vec3, w: &Vec3) -> Result<f64> {
        let hm = self.hess_s(x)?;
        let (t1, t2) = tangent_frame(&(x / x.norm()));
        let a = Vec2::new(u.dot(&t1), u.dot(&t2));
        let b = Vec2::new(w.dot(&t1), w.dot(&t2));
        Ok(a.dot(&(hm * b)))
    }

    pub fn laplace_s(&self, x: &Vec3) -> Result<f64> {
        Ok(self.hess_s(x)?.trace())
    }

    /// 3𝓗² + det ∇²𝓗 + 𝓗 Δ𝓗 − |∇𝓗|² − ¼(Δ𝓗)².
    pub fn estrella_value(&self, x: &Vec3) -> Result<f64> {
        let (h, g, hm) = self.jet(x)?;
        Ok(estrella_from_parts(h, &g, &hm))
    }

    pub fn estrella_constant(&self, resolution: usize) -> Result<EstrellaReport> {
        if resolution < 8 {
            return Err(Error::invalid("estrella resolution must be at least 8"));
        }
        let pts = fibonacci_sphere(resolution);
        use rayon::prelude::*;
        let samples: Vec<f64> =
            pts.par_iter().map(|p| self.estrella_value(p)).collect::<Result<_>>()?;
        let (k, &min_value) = samples
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty sample");
        Ok(EstrellaReport { min_value, argmin: pts[k], grid_resolution: resolution, samples })
    }

    /// ∫ ξ/𝓗(ξ) dξ over the great circle spanned by (e1, e2), in that basis.
    pub fn closure_integral(&self, e1: &Vec3, e2: &Vec3) -> Result<Vec2> {
        self.closure_integral_with(e1, e2, CIRCLE_NODES)
    }

    pub fn closure_integral_with(&self, e1: &Vec3, e2: &Vec3, nodes: usize) -> Result<Vec2> {
        check_plane_basis(e1, e2)?;
        let n = nodes.max(8) & !1;
        let dt = 2.0 * PI / n as f64;
        let vals: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                self.eval(&(e1 * t.cos() + e2 * t.sin()))
            })
            .collect::<Result<_>>()?;
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let (a, b) = (vals[k], vals[(k + 1) % n]);
            if a.abs() <= 1e-10 * scale.max(1.0) || a.signum() != b.signum() {
                return Err(Error::VanishingDenominator { angle: k as f64 * dt, value: a });
            }
        }
        // composite Simpson on the periodic grid: weights 4,2,4,2,... times dt/3
        let mut acc = Vec2::zeros();
        for (k, v) in vals.iter().enumerate() {
            let t = k as f64 * dt;
            let w = if k % 2 == 0 { 2.0 } else { 4.0 };
            acc += Vec2::new(t.cos(), t.sin()) * (w / v);
        }
        Ok(acc * (dt / 3.0))
    }

    /// max |𝓗(Φx) − 𝓗(x)| over a quasi-uniform sample.
    pub fn symmetry_residual(&self, phi: &Mat3) -> Result<f64> {
        self.symmetry_residual_with(phi, 2000)
    }

    pub fn symmetry_residual_with(&self, phi: &Mat3, resolution: usize) -> Result<f64> {
        check_orthogonal(phi)?;
        let mut worst = 0.0f64;
        for x in fibonacci_sphere(resolution) {
            worst = worst.max((self.eval(&(phi * x))? - self.eval(&x)?).abs());
        }
        Ok(worst)
    }

    /// Largest residual over the isometries of all declared symmetry tags.
    pub fn validate_symmetry_tags(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for tag in &self.symmetry_tags {
            for m in tag.isometries() {
                worst = worst.max(self.symmetry_residual(&m)?);
            }
        }
        Ok(worst)
    }

    /// Extremes of 𝓗 on the sphere and on the great circle spanned by (e1, e2).
    pub fn positivity_range(&self, resolution: usize, e1: &Vec3, e2: &Vec3) -> Result<PositivityReport> {
        check_plane_basis(e1, e2)?;
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in fibonacci_sphere(resolution.max(8)) {
            let v = self.eval(&x)?;
            min = min.min(v);
            max = max.max(v);
        }
        let mut circle_min = f64::INFINITY;
        for k in 0..CIRCLE_NODES {
            let t = 2.0 * PI * k as f64 / CIRCLE_NODES as f64;
            let v = self.eval(&(e1 * t.cos() + e2 * t.sin()))?;
            circle_min = circle_min.min(v);
            min = min.min(v);
            max = max.max(v);
        }
        let item5_margin = 2.0 * circle_min - max;
        Ok(PositivityReport {
            min,
            max,
            circle_min,
            positive: min > 0.0,
            item5_holds: item5_margin > 0.0,
            item5_margin,
        })
    }
}

/// Combines value, gradient and Hessian into the estrella functional.
pub fn estrella_from_parts(h: f64, grad: &Vec3, hess: &Mat2) -> f64 {
    let lap = hess.trace();
    3.0 * h * h + hess.determinant() + h * lap - grad.norm_squared() - 0.25 * lap * lap
}

#[derive(Clone, Debug, Serialize)]
pub struct EstrellaReport {
    pub min_value: f64,
    pub argmin: Vec3,
    pub grid_resolution: usize,
    pub samples: Vec<f64>,
}

impl EstrellaReport {
    /// True when the field satisfies the estrella inequality with constant c at grid scale.
    pub fn certifies(&self, c: f64) -> bool {
        c > 0.0 && self.min_value >= c
    }

    /// 2π/√(3c) for the sampled constant, when it is positive.
    pub fn radius_bound(&self) -> Option<f64> {
        radius_bound(self.min_value)
    }
}

/// 2π/√(3c), defined for c > 0.
pub fn radius_bound(c: f64) -> Option<f64> {
    (c > 0.0).then(|| 2.0 * PI / (3.0 * c).sqrt())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PositivityReport {
    pub min: f64,
    pub max: f64,
    pub circle_min: f64,
    pub positive: bool,
    /// max 𝓗 < 2 min 𝓗 on the circle.
    pub item5_holds: bool,
    /// 2 min 𝓗|circle − max 𝓗.
    pub item5_margin: f64,
}

/// Deterministic orthonormal tangent frame at a unit vector x, with t₁ × t₂ = x.
pub fn tangent_frame(x: &Vec3) -> (Vec3, Vec3) {
    let t1 = if x.z.abs() < 0.9 { Vec3::z().cross(x) } else { Vec3::x().cross(x) }.normalize();
    let t2 = x.cross(&t1);
    (t1, t2)
}

/// Fibonacci lattice with n points.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2 * k + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = k as f64 * golden;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

pub(crate) fn check_orthogonal(m: &Mat3) -> Result<()> {
    let err = (m.transpose() * m - Mat3::identity()).abs().max();
    if err > 1e-10 {
        return Err(Error::invalid(format!("matrix is not orthogonal (deviation {err:.2e})")));
    }
    Ok(())
}

pub(crate) fn check_plane_basis(e1: &Vec3, e2: &Vec3) -> Result<()> {
    if (e1.norm() - 1.0).abs() > 1e-10 || (e2.norm() - 1.0).abs() > 1e-10 || e1.dot(e2).abs() > 1e-10 {
        return Err(Error::invalid("plane basis must be orthonormal"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e3_field() -> CurvatureField {
        CurvatureField::linear(1.0, 0.0, Vec3::z()).unwrap()
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
        loop {
            let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if v.norm() > 0.1 && v.norm() < 1.0 {
                return v.normalize();
            }
        }
    }

    #[test]
    fn gradient_of_height_function() {
        let f = e3_field();
        assert_abs_diff_eq!((f.grad_s(&Vec3::x()).unwrap() - Vec3::z()).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.grad_s(&Vec3::z()).unwrap().norm(), 0.0, epsilon = 1e-14);
        assert_eq!(CurvatureField::constant(1.0).grad_s(&Vec3::y()).unwrap(), Vec3::zeros());
        let fd = f.clone().with_mode(DerivativeMode::FiniteDifference { step: 1e-4 }).unwrap();
        assert_abs_diff_eq!((fd.grad_s(&Vec3::x()).unwrap() - Vec3::z()).norm(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn hessian_of_height_function_is_minus_t_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = e3_field();
        let fd = f.clone().with_mode(DerivativeMode::FiniteDifference { step: 1e-4 }).unwrap();
        for _ in 0..20 {
            let x = random_unit(&mut rng);
            let expect = Mat2::identity() * -x.z;
            assert_abs_diff_eq!((f.hess_s(&x).unwrap() - expect).abs().max(), 0.0, epsilon = 1e-13);
            assert_abs_diff_eq!((fd.hess_s(&x).unwrap() - expect).abs().max(), 0.0, epsilon = 1e-6);
            assert_abs_diff_eq!(f.laplace_s(&x).unwrap(), -2.0 * x.z, epsilon = 1e-13);
        }
    }

    #[test]
    fn degree_two_harmonic() {
        let f = CurvatureField::zonal(vec![-1.0 / 3.0, 0.0, 1.0], Vec3::z()).unwrap();
        let fd = f.clone().with_mode(DerivativeMode::FiniteDifference { step: 1e-4 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x = random_unit(&mut rng);
            let h = f.eval(&x).unwrap();
            assert_abs_diff_eq!(f.laplace_s(&x).unwrap(), -6.0 * h, epsilon = 1e-12);
            assert_abs_diff_eq!(fd.laplace_s(&x).unwrap(), -6.0 * h, epsilon = 1e-6);
        }
        assert_eq!(CurvatureField::constant(5.0).laplace_s(&Vec3::x()).unwrap(), 0.0);
    }

    #[test]
    fn estrella_oracles() {
        let f = e3_field();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = random_unit(&mut rng);
            assert_abs_diff_eq!(f.estrella_value(&x).unwrap(), 2.0 * x.z * x.z - 1.0, epsilon = 1e-12);
        }
        assert_eq!(CurvatureField::constant(1.0).estrella_value(&Vec3::x()).unwrap(), 3.0);
        assert_abs_diff_eq!(CurvatureField::constant(0.7).estrella_value(&Vec3::y()).unwrap(), 1.47, epsilon = 1e-14);
        let rep = f.estrella_constant(4000).unwrap();
        assert_abs_diff_eq!(rep.min_value, -1.0, epsilon = 1e-4);
        assert!(rep.argmin.z.abs() < 1e-2);
        assert!(rep.samples.iter().all(|&v| v >= rep.min_value));
        assert!(rep.radius_bound().is_none());
        let c = CurvatureField::constant(1.0).estrella_constant(100).unwrap();
        assert_eq!(c.min_value, 3.0);
        assert!(c.certifies(3.0));
        assert_abs_diff_eq!(c.radius_bound().unwrap(), 2.0 * PI / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn estrella_perturbation_of_constant() {
        // zonal closed form: E = 3h² + h(h''(1−t²) − 2th') − h'²(1−t²) − (h''(1−t²))²/4
        for eps in [0.1, 0.01] {
            let f = CurvatureField::linear(eps, 2.0, Vec3::z()).unwrap();
            let rep = f.estrella_constant(2000).unwrap();
            assert!((rep.min_value - 12.0).abs() < 10.0 * eps, "{}", rep.min_value);
            // h = 2 + εt: E = 3(2+εt)² − 2tε(2+εt) − ε²(1−t²), minimized at t = −1
            let exact = 12.0 - 8.0 * eps + eps * eps;
            assert_abs_diff_eq!(rep.min_value, exact, epsilon = 5e-3 * eps);
        }
    }

    #[test]
    fn closure_integral_oracles() {
        let (e1, e2) = (Vec3::x(), Vec3::y());
        let c = CurvatureField::constant(2.0).closure_integral(&e1, &e2).unwrap();
        assert!(c.norm() < 1e-14);
        let f = CurvatureField::from_fn(|x| 1.0 / (1.0 + 0.5 * x.x));
        let v = f.closure_integral(&e1, &e2).unwrap();
        assert_abs_diff_eq!(v.x, PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.y, 0.0, epsilon = 1e-12);
        let even = CurvatureField::zonal(vec![1.0, 0.0, 0.5], Vec3::new(1.0, 1.0, 0.3)).unwrap();
        assert!(even.closure_integral(&e1, &e2).unwrap().norm() < 1e-12);
        let err = e3_field().closure_integral(&Vec3::x(), &Vec3::z());
        assert!(matches!(err, Err(Error::VanishingDenominator { .. })));
    }

    #[test]
    fn symmetry_residual_examples() {
        let refl = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert_eq!(CurvatureField::constant(1.0).symmetry_residual(&refl).unwrap(), 0.0);
        let sq = CurvatureField::zonal(vec![0.0, 0.0, 1.0], Vec3::z()).unwrap();
        assert!(sq.symmetry_residual(&refl).unwrap() < 1e-15);
        let r = e3_field().symmetry_residual(&refl).unwrap();
        assert!((r - 2.0).abs() < 1e-2, "{r}");
        assert!(e3_field().symmetry_residual(&Mat3::new(1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)).is_err());
        let tagged = sq.with_symmetry_tags(vec![
            SymmetryTag::Antipodal,
            SymmetryTag::Rotation { axis: [0.0, 0.0, 1.0] },
            SymmetryTag::Reflection { normal: [0.0, 0.0, 1.0] },
        ]);
        assert!(tagged.validate_symmetry_tags().unwrap() < 1e-14);
    }

    #[test]
    fn positivity_examples() {
        let (e1, e2) = (Vec3::x(), Vec3::y());
        let p = CurvatureField::constant(1.0).positivity_range(500, &e1, &e2).unwrap();
        assert_eq!((p.min, p.max, p.circle_min), (1.0, 1.0, 1.0));
        assert!(p.item5_holds);
        let p = CurvatureField::linear(1.0, 2.0, Vec3::z()).unwrap().positivity_range(5000, &e1, &e2).unwrap();
        assert!((p.min - 1.0).abs() < 1e-3 && (p.max - 3.0).abs() < 1e-3);
        assert_abs_diff_eq!(p.circle_min, 2.0, epsilon = 1e-14);
        assert!(p.item5_holds && p.positive);
        let p = e3_field().positivity_range(500, &e1, &e2).unwrap();
        assert!(!p.positive && p.min < 0.0);
    }

    #[test]
    fn sampled_field_interpolates_smooth_data() {
        let grid = LatLongGrid::sample(64, 128, |x| 1.0 + 0.3 * x.z + 0.2 * x.x * x.y);
        let f = CurvatureField::sampled(grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = random_unit(&mut rng);
            let exact = 1.0 + 0.3 * x.z + 0.2 * x.x * x.y;
            assert!((f.eval(&x).unwrap() - exact).abs() < 5e-4);
        }
        assert!(f.eval(&Vec3::z()).is_ok());
        assert!(f.clone().with_mode(DerivativeMode::Analytic).is_err());
        let bad = LatLongGrid { n_lat: 4, n_lon: 5, values: vec![0.0; 20] };
        assert!(CurvatureField::sampled(bad).is_err());
    }

    #[test]
    fn spec_json_round_trip_rejects_unknown_keys() {
        let spec: FieldSpec = serde_json::from_str(
            r#"{"kind":"analytic","formula":{"id":"linear","a":1.0,"b":0.5,"axis":[0,0,2]},
                "symmetry_tags":[{"type":"rotation","axis":[0,0,1]}]}"#,
        )
        .unwrap();
        let f = spec.build().unwrap();
        assert_abs_diff_eq!(f.eval(&Vec3::z()).unwrap(), 1.5, epsilon = 1e-15);
        assert!(f.validate_symmetry_tags().unwrap() < 1e-14);
        let back = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<FieldSpec>(&back).unwrap(), spec);
        assert!(serde_json::from_str::<FieldSpec>(r#"{"kind":"analytic","formula":{"id":"constant","h0":1},"extra":1}"#).is_err());
        assert!(serde_json::from_str::<FieldSpec>(r#"{"kind":"analytic","formula":{"id":"constant","h0":1,"x":2}}"#).is_err());
        let fd: FieldSpec = serde_json::from_str(
            r#"{"kind":"analytic","formula":{"id":"constant","h0":1},"derivatives":{"finite_difference":{"step":1e-4}}}"#,
        )
        .unwrap();
        assert!(matches!(fd.build().unwrap().mode(), DerivativeMode::FiniteDifference { .. }));
    }

    #[test]
    fn zonal_function_derivatives() {
        let p = ZonalFunction::new(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.eval(2.0), 1.0 + 4.0 + 12.0 + 32.0);
        assert_eq!(p.d1(2.0), 2.0 + 12.0 + 48.0);
        assert_eq!(p.d2(2.0), 6.0 + 48.0);
        assert!(ZonalFunction::new(vec![1.0, 0.0, 2.0]).is_even());
        assert!(!p.is_even());
    }

    #[test]
    fn antipodal_field() {
        let f = e3_field().antipodal();
        assert_abs_diff_eq!(f.eval(&Vec3::z()).unwrap(), -1.0, epsilon = 1e-15);
        let g = f.grad_s(&Vec3::x()).unwrap();
        assert_abs_diff_eq!((g + Vec3::z()).norm(), 0.0, epsilon = 1e-14);
        let (prof, axis) = f.zonal_profile().unwrap();
        assert_abs_diff_eq!(prof.eval(axis.z), -1.0, epsilon = 1e-15);
    }
}
