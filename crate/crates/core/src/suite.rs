//! The reproducible acceptance run: thirteen criteria, each a list of
//! measured quantities compared against pinned tolerances.
//!
//! Full mode runs at the resolutions the tolerances were set for. Quick mode
//! uses coarser grids for smoke runs; resolution-dependent tolerances are then
//! scaled by the square of the coarsening factor, and the report says so.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flat_curves::{detect_closure, integrate_flat_curve, period_quadrature};
use crate::graph_solver::{height_experiment, solve_dirichlet, GraphSolution, GridDomain, InitialGuess, SolverOptions};
use crate::rotational::{build_hemisphere, build_sphere, DEFAULT_STEP};
use crate::sphere_field::{CurvatureField, DerivativeMode, Formula, ZonalFunction};
use crate::stability::{
    assemble_stability_operator, cornex_test, desiq_check, flux_integral, jacobi_residual, principal_eigenvalue,
    radius_check, stability_certificate, CertificateStatus, DiscreteSurface,
};
use crate::Vec3;

/// Titles of the criteria, indexed from 1.
pub const CRITERIA: [&str; 13] = [
    "flat cylinder exactness",
    "closure criterion equivalence",
    "graph solver order",
    "comparison principle",
    "level-set diameter",
    "Jacobi field oracle",
    "principal eigenvalue oracles",
    "estrella constants",
    "radius property",
    "pointwise estrella margin",
    "flux integrals",
    "soliton equivalence",
    "height saturation",
];

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SuiteOptions {
    pub quick: bool,
    pub seed: u64,
}

impl SuiteOptions {
    pub fn full() -> Self {
        SuiteOptions { quick: false, seed: 7 }
    }

    pub fn quick() -> Self {
        SuiteOptions { quick: true, seed: 7 }
    }

    fn pick<T>(&self, full: T, quick: T) -> T {
        if self.quick {
            quick
        } else {
            full
        }
    }
}

/// One measured quantity against its tolerance.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// "<=", ">=", "==" or "flag".
    pub relation: &'static str,
    pub tolerance: f64,
    pub passed: bool,
    /// Why a failure is expected, for checks no grid method can meet at this scale.
    pub limitation: Option<String>,
}

impl Check {
    fn le(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, relation: "<=", tolerance, passed: value <= tolerance, limitation: None }
    }

    fn ge(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, relation: ">=", tolerance, passed: value >= tolerance, limitation: None }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check { name: name.into(), value: ok as u8 as f64, relation: "flag", tolerance: 1.0, passed: ok, limitation: None }
    }

    fn limited(mut self, why: &str) -> Self {
        self.limitation = Some(why.to_string());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub runtime_s: f64,
    pub error: Option<String>,
}

impl CriterionResult {
    /// Failed checks that carry no documented limitation.
    pub fn unexpected_failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed && c.limitation.is_none()).collect()
    }

    /// True when every failure is a documented limitation and nothing errored.
    pub fn acceptable(&self) -> bool {
        self.error.is_none() && self.unexpected_failures().is_empty()
    }

    /// One-line summary: `criterion  3 PASS graph solver order (…)`.
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut detail: Vec<String> = Vec::new();
        if let Some(e) = &self.error {
            detail.push(format!("error: {e}"));
        }
        for c in self.checks.iter().filter(|c| !c.passed) {
            let mut s = format!("{} = {:.4e} (want {} {:.1e})", c.name, c.value, c.relation, c.tolerance);
            if let Some(l) = &c.limitation {
                s.push_str(&format!(" [known: {l}]"));
            }
            detail.push(s);
        }
        if detail.is_empty() {
            detail.push(format!("{} checks", self.checks.len()));
        }
        format!("criterion {:>2} {} {} ({:.1} s): {}", self.id, status, self.title, self.runtime_s, detail.join("; "))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub options: SuiteOptions,
    pub criteria: Vec<CriterionResult>,
    pub passed: usize,
    pub total: usize,
}

impl SuiteReport {
    pub fn acceptable(&self) -> bool {
        self.criteria.iter().all(CriterionResult::acceptable)
    }
}

/// Runs one criterion (1–13). Errors inside the criterion are reported as a failure.
pub fn run_criterion(id: usize, opts: &SuiteOptions) -> CriterionResult {
    let title = CRITERIA.get(id.wrapping_sub(1)).copied().unwrap_or("unknown");
    let start = Instant::now();
    let mut notes = Vec::new();
    let out = match id {
        1 => flat_cylinder(opts, &mut notes),
        2 => closure_equivalence(opts, &mut notes),
        3 => solver_order(opts, &mut notes),
        4 => comparison(opts, &mut notes),
        5 => level_sets(opts, &mut notes),
        6 => jacobi_oracle(opts, &mut notes),
        7 => eigen_oracles(opts, &mut notes),
        8 => estrella_constants(opts, &mut notes),
        9 => radius_property(opts, &mut notes),
        10 => desiq_margin(opts, &mut notes),
        11 => flux_integrals(opts, &mut notes),
        12 => soliton(opts, &mut notes),
        13 => height_saturation(opts, &mut notes),
        _ => Err(Error::invalid(format!("no criterion {id}"))),
    };
    let runtime_s = start.elapsed().as_secs_f64();
    let (mut checks, error) = match out {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    // wall-clock limits are pinned in the criteria themselves
    if let Some(limit) = runtime_limit(id) {
        checks.push(Check::le("runtime_s", runtime_s, limit));
    }
    if opts.quick {
        notes.push("quick mode: coarse grids, resolution-dependent tolerances scaled".into());
    }
    let passed = error.is_none() && checks.iter().all(|c| c.passed);
    CriterionResult { id, title, passed, checks, notes, runtime_s, error }
}

fn runtime_limit(id: usize) -> Option<f64> {
    match id {
        1 => Some(1.0),
        3 => Some(60.0),
        _ => None,
    }
}

/// Runs all criteria in order.
pub fn reproduce_suite(opts: &SuiteOptions) -> SuiteReport {
    let criteria: Vec<CriterionResult> = (1..=CRITERIA.len()).map(|id| run_criterion(id, opts)).collect();
    let passed = criteria.iter().filter(|c| c.passed).count();
    SuiteReport { options: *opts, total: criteria.len(), passed, criteria }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn solve_zero(field: &CurvatureField, dom: GridDomain) -> Result<GraphSolution> {
    let dom = dom.with_boundary(|_, _| 0.0)?;
    solve_dirichlet(field, &dom, &InitialGuess::Cold, &SolverOptions::default())
}

/// Exact spherical cap over the disk of radius `r0` (𝓗 ≡ 1, upward normal).
fn cap(r0: f64) -> impl Fn(f64, f64) -> f64 + Copy {
    move |x: f64, y: f64| -((1.0 - x * x - y * y).max(0.0).sqrt() - (1.0 - r0 * r0).sqrt())
}

fn graph_surface(sol: &GraphSolution) -> Result<DiscreteSurface> {
    DiscreteSurface::from_graph(sol)
}

fn flat_cylinder(_: &SuiteOptions, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let f = CurvatureField::constant(1.0);
    let sol = integrate_flat_curve(&f, &Vec3::x(), &Vec3::y(), 0.0, 4.0)?;
    let verdict = detect_closure(&sol, &f)?;
    let radius = sol.mean_radius().unwrap_or(f64::NAN);
    notes.push(format!("step {:.1e}, period {:?}", sol.step, sol.period_estimate));
    Ok(vec![
        Check::flag("closed", verdict.closed),
        Check::le("|radius - 0.5|", (radius - 0.5).abs(), 1e-6),
        Check::le("closure_gap", sol.closure_gap.unwrap_or(f64::INFINITY), 1e-8),
    ])
}

fn random_plane(rng: &mut ChaCha8Rng) -> (Vec3, Vec3) {
    let a = random_unit(rng);
    let mut b = random_unit(rng);
    b -= a * a.dot(&b);
    (a, b.normalize())
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn closure_equivalence(opts: &SuiteOptions, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut cases: Vec<(CurvatureField, Vec3, Vec3)> = Vec::new();
    for k in 0..24 {
        let axis = random_unit(&mut rng);
        let field = match k % 4 {
            // even zonal: closed in every plane
            0 => {
                let c2 = rng.gen_range(-0.5..0.5);
                let c4 = rng.gen_range(-0.3..0.3);
                CurvatureField::zonal(vec![1.0 + rng.gen_range(0.0..1.0), 0.0, c2, 0.0, c4], axis)?
            }
            // generic zonal with odd terms
            1 => {
                let c1 = rng.gen_range(0.1..0.6);
                let c3 = rng.gen_range(-0.2..0.2);
                CurvatureField::zonal(vec![1.5, c1, rng.gen_range(-0.3..0.3), c3], axis)?
            }
            // even, non-symmetric quadratic
            2 => {
                let m: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-0.3..0.3)));
                CurvatureField::analytic(Formula::Quadratic { a: m, b: [0.0; 3], c: 2.0 })?
            }
            // non-symmetric with a linear part
            _ => {
                let m: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-0.3..0.3)));
                let b = random_unit(&mut rng) * rng.gen_range(0.2..0.6);
                CurvatureField::analytic(Formula::Quadratic { a: m, b: [b.x, b.y, b.z], c: 2.0 })?
            }
        };
        let (e1, e2) = random_plane(&mut rng);
        cases.push((field, e1, e2));
    }
    let outcomes: Vec<Result<Option<bool>>> = cases
        .par_iter()
        .map(|(f, e1, e2)| {
            let period = period_quadrature(f, e1, e2, 720)?.ok_or_else(|| Error::invalid("field vanishes on the circle"))?;
            let sol = integrate_flat_curve(f, e1, e2, 0.0, 1.1 * period + 0.1)?;
            match detect_closure(&sol, f) {
                Ok(v) => Ok(Some(v.closed)),
                Err(Error::Discretization(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut disagreements = 0;
    let mut closed = 0;
    for o in outcomes {
        match o? {
            None => disagreements += 1,
            Some(true) => closed += 1,
            Some(false) => {}
        }
    }
    notes.push(format!("{} fields, {closed} closed", cases.len()));
    Ok(vec![
        Check::ge("fields", cases.len() as f64, 20.0),
        Check::le("disagreements", disagreements as f64, 0.0),
        Check::flag("both outcomes present", closed > 0 && closed < cases.len()),
    ])
}

fn solver_order(_: &SuiteOptions, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let f = CurvatureField::constant(1.0);
    let r0 = 0.5;
    let exact = cap(r0);
    let mut errors = Vec::new();
    for n in [32.0, 64.0, 128.0] {
        let d = GridDomain::disk([0.0, 0.0], r0, 1.0 / n)?.with_boundary(exact)?;
        let sol = solve_dirichlet(&f, &d, &InitialGuess::Cold, &SolverOptions::default())?;
        let err = d
            .interior
            .iter()
            .map(|&k| {
                let (x, y) = d.position(k);
                (sol.u[k] - exact(x, y)).abs()
            })
            .fold(0.0, f64::max);
        errors.push(err);
    }
    notes.push(format!("max errors {}", sci(&errors)));
    Ok(vec![
        Check::ge("ratio 1/32 -> 1/64", errors[0] / errors[1], 3.5),
        Check::ge("ratio 1/64 -> 1/128", errors[1] / errors[2], 3.5),
        Check::le("error at h = 1/128", errors[2], 5e-4),
    ])
}

fn comparison(opts: &SuiteOptions, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(4));
    let f = CurvatureField::constant(1.0);
    let pairs: Vec<[f64; 10]> = (0..50).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
    let dom = GridDomain::disk([0.0, 0.0], 0.5, 1.0 / 32.0)?;
    let worst: Vec<f64> = pairs
        .par_iter()
        .map(|p| {
            let g1 = move |x: f64, y: f64| 0.1 * p[0] + 0.1 * p[1] * x + 0.1 * p[2] * y + 0.05 * (p[3] * 6.0 * x + p[4] * 6.0 * y + p[5]).sin();
            let lift = move |x: f64, y: f64| 0.03 * (1.0 + p[6]) + 0.02 * (1.0 + (p[7] * 8.0 * x + p[8] * 8.0 * y + p[9]).sin());
            let d1 = dom.clone().with_boundary(g1)?;
            let d2 = dom.clone().with_boundary(move |x, y| g1(x, y) + lift(x, y))?;
            let o = SolverOptions::default();
            let u1 = solve_dirichlet(&f, &d1, &InitialGuess::Cold, &o)?.u;
            let u2 = solve_dirichlet(&f, &d2, &InitialGuess::Cold, &o)?.u;
            Ok(u1.iter().zip(&u2).filter(|(a, b)| a.is_finite() && b.is_finite()).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<_>>()?;
    let max = worst.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    notes.push(format!("{} pairs, max(u1 - u2) = {max:.3e}", worst.len()));
    Ok(vec![Check::ge("pairs", worst.len() as f64, 50.0), Check::le("max(u1 - u2)", max, 1e-10)])
}

fn level_sets(_: &SuiteOptions, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let f = CurvatureField::constant(1.0);
    let h = 1.0 / 64.0;
    let mut worst = f64::NEG_INFINITY;
    let mut tested = 0;
    for r0 in [0.5, 0.75, 0.9, 0.95] {
        let sol = solve_zero(&f, GridDomain::disk([0.0, 0.0], r0, h)?)?;
        let top = sol.max_height();
        for k in 1..10 {
            let t = top * k as f64 / 10.0;
            for c in sol.level_set_components(t) {
                worst = worst.max(c.diameter - (2.0 + 2.0 * h));
                tested += 1;
            }
        }
        if top > 0.6 {
            for c in sol.level_set_components(0.6) {
                worst = worst.max(c.diameter - (2.0 + 2.0 * h));
                tested += 1;
            }
        }
    }
    notes.push(format!("{tested} components"));
    Ok(vec![Check::le("max(diameter - 2/H0 - 2h)", worst, 0.0), Check::ge("components", tested as f64, 10.0)])
}

/// Jacobi residuals at a sequence of resolutions for the three axes.
///
/// A residual at the floating-point floor of the assembled operator,
/// 10·ε·‖L‖∞, carries no convergence rate and is only checked against the tolerance.
fn residual_study(
    label: &str,
    levels: &[usize],
    build: impl Fn(usize) -> Result<(DiscreteSurface, CurvatureField)>,
    tol_fine: f64,
    checks: &mut Vec<Check>,
    notes: &mut Vec<String>,
) -> Result<()> {
    let mut table: Vec<[f64; 3]> = Vec::new();
    let mut floors = Vec::new();
    for &n in levels {
        let (s, f) = build(n)?;
        let op = assemble_stability_operator(&s, &f)?;
        floors.push(10.0 * f64::EPSILON * op.norm_inf());
        table.push([Vec3::x(), Vec3::y(), Vec3::z()].map(|a| jacobi_residual(&op, &s, &a)));
    }
    for (ax, name) in ["e1", "e2", "e3"].iter().enumerate() {
        for w in 0..levels.len() - 1 {
            let (a, b) = (table[w][ax], table[w + 1][ax]);
            if b > floors[w + 1] {
                checks.push(Check::ge(format!("{label} {name} ratio {}->{}", levels[w], levels[w + 1]), a / b, 3.0));
            }
        }
        checks.push(Check::le(format!("{label} {name} residual at {}", levels[levels.len() - 1]), table[levels.len() - 1][ax], tol_fine));
    }
    notes.push(format!(
        "{label}: {} (rounding floors {})",
        table.iter().map(|r| sci(r)).collect::<Vec<_>>().join(" | "),
        sci(&floors)
    ));
    Ok(())
}

fn jacobi_oracle(opts: &SuiteOptions, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let levels = opts.pick(vec![64, 128, 256], vec![64, 128]);
    let tol = 1e-3;
    let mut checks = Vec::new();
    residual_study(
        "sphere",
        &levels,
        |n| Ok((DiscreteSurface::round_sphere(1.0, n, n)?, CurvatureField::constant(1.0))),
        tol,
        &mut checks,
        notes,
    )?;
    let translator = CurvatureField::linear(1.0, 0.0, Vec3::z())?;
    residual_study(
        "translator",
        &levels,
        |n| {
            let sol = solve_zero(&translator, GridDomain::disk([0.0, 0.0], 1.0, 2.0 / n as f64)?)?;
            Ok((DiscreteSurface::from_graph_window(&sol, |x, y| x * x + y * y <= 0.25)?, translator.clone()))
        },
        tol,
        &mut checks,
        notes,
    )?;
    let zonal = ZonalFunction::new(vec![1.0, 0.0, 1.0]);
    let zfield = zonal.to_field(Vec3::z())?;
    residual_study(
        "rotational",
        &levels,
        |n| Ok((build_sphere(&zonal, n, n, DEFAULT_STEP)?.surface, zfield.clone())),
        tol,
        &mut checks,
        notes,
    )?;
    Ok(checks)
}

/// The graph patches whose principal eigenvalue must be positive.
fn graph_patches(opts: &SuiteOptions) -> Result<Vec<(String, GraphSolution)>> {
    let h = opts.pick(1.0 / 64.0, 1.0 / 32.0);
    let one = CurvatureField::constant(1.0);
    let zonal = CurvatureField::zonal(vec![1.0, 0.0, 0.3], Vec3::z())?;
    let translator = CurvatureField::linear(1.0, 0.0, Vec3::z())?;
    let jobs: Vec<(String, CurvatureField, GridDomain)> = vec![
        ("cap R=0.25".into(), one.clone(), GridDomain::disk([0.0, 0.0], 0.25, h / 2.0)?),
        ("cap R=0.5".into(), one.clone(), GridDomain::disk([0.0, 0.0], 0.5, h)?),
        ("cap R=0.75".into(), one.clone(), GridDomain::disk([0.0, 0.0], 0.75, h)?),
        ("zonal disk R=0.6".into(), zonal.clone(), GridDomain::disk([0.0, 0.0], 0.6, h)?),
        ("zonal strip 0.6x2".into(), zonal, GridDomain::rectangle([-1.0, -0.3], [1.0, 0.3], h)?),
        ("translator disk R=1".into(), translator, GridDomain::disk([0.0, 0.0], 1.0, 2.0 * h)?),
        ("two disks".into(), one.clone(), GridDomain::two_disks([-0.3, 0.0], 0.35, [0.3, 0.0], 0.35, h)?),
    ];
    jobs.into_par_iter().map(|(name, f, d)| Ok((name, solve_zero(&f, d)?))).collect()
}

fn eigen_oracles(opts: &SuiteOptions, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let n = opts.pick(128, 48);
    let sphere = DiscreteSurface::round_sphere(1.0, n, n)?;
    let e = principal_eigenvalue(&assemble_stability_operator(&sphere, &CurvatureField::constant(1.0))?)?;
    checks.push(Check::flag("sphere converged, sign-definite", e.converged && e.sign_definite));
    checks.push(Check::le("|lambda0(sphere) + 2|", (e.lambda0 + 2.0).abs(), 0.05));
    notes.push(format!("sphere lambda0 = {:.6}", e.lambda0));

    let j01: f64 = 2.404_825_557_695_773;
    let disk = DiscreteSurface::flat_disk(1.0, n, 2 * n)?;
    let e = principal_eigenvalue(&assemble_stability_operator(&disk, &CurvatureField::constant(0.0))?)?;
    checks.push(Check::flag("disk converged, sign-definite", e.converged && e.sign_definite));
    checks.push(Check::le("|lambda0(disk)/j01^2 - 1|", (e.lambda0 / (j01 * j01) - 1.0).abs(), 0.01));
    notes.push(format!("disk lambda0 = {:.6}", e.lambda0));

    for (name, sol) in graph_patches(opts)? {
        let s = graph_surface(&sol)?;
        let e = principal_eigenvalue(&assemble_stability_operator(&s, &sol.field)?)?;
        checks.push(Check::flag(format!("{name} converged"), e.converged && e.sign_definite));
        checks.push(Check::ge(format!("lambda0({name})"), e.lambda0, f64::MIN_POSITIVE));
        notes.push(format!("{name} lambda0 = {:.6}", e.lambda0));
    }
    Ok(checks)
}

fn estrella_constants(_: &SuiteOptions, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let res = 20_000;
    let one = CurvatureField::constant(1.0);
    let c_an = one.estrella_constant(res)?.min_value;
    let fd = CurvatureField::constant(1.0).with_mode(DerivativeMode::FiniteDifference { step: 1e-4 })?;
    let c_fd = fd.estrella_constant(res)?.min_value;
    let lin = CurvatureField::linear(1.0, 0.0, Vec3::z())?;
    let rep_lin = lin.estrella_constant(res)?;
    let rep_one = one.estrella_constant(res)?;
    notes.push(format!("c(1) = {c_an}, c_fd(1) = {c_fd}, c(<x,e3>) = {}", rep_lin.min_value));
    let bound = rep_one.radius_bound().unwrap_or(f64::NAN);
    Ok(vec![
        Check::le("|c - 3| analytic", (c_an - 3.0).abs(), 0.0),
        Check::le("|c - 3| finite differences", (c_fd - 3.0).abs(), 1e-6),
        Check::le("|c + 1| translator field", (rep_lin.min_value + 1.0).abs(), 1e-4),
        Check::le("|bound - 2pi/3|", (bound - 2.0 * PI / 3.0).abs(), 1e-12),
        Check::flag("no bound for c <= 0", rep_lin.radius_bound().is_none()),
    ])
}

/// A stable suite surface with an estrella field. Graph surfaces also carry a
/// centered window at 3/4 scale for pointwise checks: second differences next
/// to the stair-step Dirichlet boundary are not consistent, in a layer about
/// ten cells wide.
struct EstrellaSurface {
    name: String,
    full: DiscreteSurface,
    window: DiscreteSurface,
    field: CurvatureField,
}

fn estrella_surfaces(opts: &SuiteOptions) -> Result<Vec<EstrellaSurface>> {
    let h = opts.pick(1.0 / 128.0, 1.0 / 32.0);
    let n = opts.pick(256, 64);
    let one = CurvatureField::constant(1.0);
    let zonal = CurvatureField::zonal(vec![1.0, 0.0, 0.3], Vec3::z())?;
    // (name, field, domain, half extents of the domain)
    let graphs: Vec<(String, CurvatureField, GridDomain, [f64; 2], bool)> = vec![
        ("cap R=0.3".into(), one.clone(), GridDomain::disk([0.0, 0.0], 0.3, h)?, [0.3; 2], true),
        ("cap R=0.5".into(), one.clone(), GridDomain::disk([0.0, 0.0], 0.5, h)?, [0.5; 2], true),
        ("cap R=0.7".into(), one.clone(), GridDomain::disk([0.0, 0.0], 0.7, h)?, [0.7; 2], true),
        ("cap R=0.9".into(), one.clone(), GridDomain::disk([0.0, 0.0], 0.9, h)?, [0.9; 2], true),
        ("zonal disk R=0.4".into(), zonal.clone(), GridDomain::disk([0.0, 0.0], 0.4, h)?, [0.4; 2], true),
        ("zonal disk R=0.6".into(), zonal.clone(), GridDomain::disk([0.0, 0.0], 0.6, h)?, [0.6; 2], true),
        ("zonal strip 0.6x2".into(), zonal, GridDomain::rectangle([-1.0, -0.3], [1.0, 0.3], h)?, [1.0, 0.3], false),
    ];
    let mut out: Vec<EstrellaSurface> = graphs
        .into_par_iter()
        .map(|(name, field, d, [a, b], round)| {
            let sol = solve_zero(&field, d)?;
            let (a, b) = (0.75 * a, 0.75 * b);
            let window = DiscreteSurface::from_graph_window(&sol, |x, y| {
                if round {
                    (x / a).powi(2) + (y / b).powi(2) <= 1.0
                } else {
                    x.abs() <= a && y.abs() <= b
                }
            })?;
            Ok(EstrellaSurface { name, full: graph_surface(&sol)?, window, field })
        })
        .collect::<Result<_>>()?;
    for coeffs in [vec![1.0], vec![1.0, 0.0, 0.5], vec![2.0, 0.0, 1.0], vec![1.0, 0.3]] {
        let z = ZonalFunction::new(coeffs.clone());
        let hs = build_hemisphere(&z, n, n, DEFAULT_STEP)?;
        out.push(EstrellaSurface {
            name: format!("hemisphere {coeffs:?}"),
            window: hs.surface.clone(),
            full: hs.surface,
            field: z.to_field(Vec3::z())?,
        });
    }
    Ok(out)
}

fn radius_property(opts: &SuiteOptions, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let surfaces = estrella_surfaces(opts)?;
    let mut count = 0;
    for EstrellaSurface { name, full: s, field: f, .. } in &surfaces {
        let c = f.estrella_constant(20_000)?.min_value;
        if !(c > 0.0) {
            notes.push(format!("{name}: c = {c:.4} not positive, skipped"));
            continue;
        }
        let op = assemble_stability_operator(s, f)?;
        let cert = stability_certificate(s, &op, None)?;
        checks.push(Check::flag(format!("{name} stable"), cert.status == CertificateStatus::Stable));
        let r = radius_check(s, c)?;
        checks.push(Check::le(format!("{name} radius - bound - 2h"), r.intrinsic_radius - r.bound - 2.0 * r.mesh_size, 0.0));
        notes.push(format!("{name}: c = {c:.4}, radius {:.4} <= bound {:.4}", r.intrinsic_radius, r.bound));
        count += 1;
    }
    checks.push(Check::ge("surfaces", count as f64, 10.0));
    let n = opts.pick(256, 64);
    let hemi = DiscreteSurface::round_hemisphere(1.0, n, n)?;
    let r = radius_check(&hemi, 3.0)?;
    notes.push(format!("unit hemisphere: radius {:.5} vs pi/2, bound 2pi/3, margin {:.5}", r.intrinsic_radius, r.margin));
    checks.push(Check::le("|hemisphere radius - pi/2|", (r.intrinsic_radius - PI / 2.0).abs(), 2.0 * r.mesh_size));
    checks.push(Check::flag("hemisphere within bound", r.pass));
    Ok(checks)
}

fn desiq_margin(opts: &SuiteOptions, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let scale = opts.pick(1.0, 16.0);
    let mut checks = Vec::new();
    for EstrellaSurface { name, window: s, field: f, .. } in estrella_surfaces(opts)? {
        let c = f.estrella_constant(20_000)?.min_value;
        if !(c > 0.0) {
            continue;
        }
        let op = assemble_stability_operator(&s, &f)?;
        let r = desiq_check(&s, &f, &op, c, 5e-3 * scale)?;
        checks.push(Check::ge(format!("{name} min margin"), r.min_margin, -5e-3 * scale));
        checks.push(Check::le(format!("{name} |Q_xah - Q_calQ|"), r.transform_discrepancy, 1e-3 * scale));
        notes.push(format!("{name}: margin {:.3e}, transform gap {:.3e}", r.min_margin, r.transform_discrepancy));
    }
    Ok(checks)
}

fn flux_integrals(opts: &SuiteOptions, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let n = opts.pick(256, 64);
    let mut checks = Vec::new();
    for coeffs in [vec![1.0], vec![1.0, 0.0, 1.0], vec![2.0, 0.0, 0.5], vec![1.0, 0.0, 0.0, 0.0, 0.5]] {
        let z = ZonalFunction::new(coeffs.clone());
        let s = build_sphere(&z, n, n, DEFAULT_STEP)?;
        let f = z.to_field(Vec3::z())?;
        let area = s.surface.total_area();
        for (k, v) in [Vec3::x(), Vec3::y(), Vec3::z()].iter().enumerate() {
            let flux = flux_integral(&s.surface, &f, v)?;
            checks.push(Check::le(format!("{coeffs:?} |flux e{}|/area", k + 1), flux.abs() / area, 1e-4));
        }
    }
    let sphere = DiscreteSurface::round_sphere(1.0, n, n)?;
    let v = Vec3::new(1.0, 2.0, 2.0) / 3.0;
    let lin = CurvatureField::linear(1.0, 0.0, v)?;
    let flux = flux_integral(&sphere, &lin, &v)?;
    notes.push(format!("round sphere, H = <x,v>: flux {flux:.6} vs 4pi/3"));
    checks.push(Check::le("|flux/(4pi/3) - 1|", (flux / (4.0 * PI / 3.0) - 1.0).abs(), 0.01));
    let cornex = cornex_test(&lin, &v, 2000)?;
    checks.push(Check::flag("obstruction sign", cornex.obstructed && flux > 0.0));
    Ok(checks)
}

fn soliton(opts: &SuiteOptions, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let h = opts.pick(1.0 / 64.0, 1.0 / 32.0);
    let f = CurvatureField::linear(1.0, 0.0, Vec3::z())?;
    let o = SolverOptions::default();
    let sol = solve_zero(&f, GridDomain::disk([0.0, 0.0], 1.0, h)?)?;
    let worst = sol.soliton_residual(0.0).into_iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    notes.push(format!("max |H_phi| = {worst:.3e}, solver residual {:.3e}", sol.residual_norm));
    Ok(vec![Check::le("max |H_phi|", worst, 10.0 * o.tol)])
}

const R1_LIMIT: &str = "the cap height 1 - sqrt(1 - R^2) has infinite slope in R at R = 1, so a boundary \
placement error d costs about sqrt(2d) in height; 5e-3 needs d ~ 1e-5, beyond any grid at this scale";

fn height_saturation(opts: &SuiteOptions, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let one = CurvatureField::constant(1.0);
    let (h, h_far) = opts.pick((1.0 / 128.0, 1.0 / 32.0), (1.0 / 64.0, 1.0 / 16.0));
    let radii = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0];
    let family: Vec<(f64, GridDomain)> = radii
        .iter()
        .map(|&r| Ok((r, GridDomain::disk([0.0, 0.0], r, if r > 1.0 { h_far } else { h })?)))
        .collect::<Result<_>>()?;
    let table = height_experiment(&one, &family, &SolverOptions::default(), 1e-3)?;
    for row in &table.rows {
        let exact = 1.0 - (1.0 - row.size.min(1.0).powi(2)).sqrt();
        match row.max_height {
            Some(m) => {
                let mut c = Check::le(format!("R={} |height - exact|", row.size), (m - exact).abs(), 5e-3);
                if row.size == 1.0 {
                    c = c.limited(R1_LIMIT);
                }
                checks.push(c);
            }
            None => checks.push(Check::flag(format!("R={} no graph (expected for R > 1)", row.size), row.size > 1.0)),
        }
        notes.push(format!("R = {}: height {:?}, exact {exact:.5}", row.size, row.max_height));
    }
    checks.push(Check::le("supremum <= 1", table.supremum, 1.0 + 5e-3));
    checks.push(Check::ge("supremum reaches 1", table.supremum, 1.0 - 5e-3).limited(R1_LIMIT));

    let zonal = CurvatureField::zonal(vec![1.0, 0.0, 0.3], Vec3::z())?;
    let hz = opts.pick(1.0 / 64.0, 1.0 / 32.0);
    let strips: Vec<(f64, GridDomain)> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&l| Ok((l, GridDomain::rectangle([-0.5 * l, -0.3], [0.5 * l, 0.3], hz)?)))
        .collect::<Result<_>>()?;
    let zt = height_experiment(&zonal, &strips, &SolverOptions::default(), 1e-3)?;
    notes.push(format!(
        "zonal strips: heights {:?}",
        zt.rows.iter().map(|r| r.max_height).collect::<Vec<_>>()
    ));
    checks.push(Check::flag("zonal field satisfies the item-5 condition", zt.item5.item5_holds));
    checks.push(Check::flag("zonal heights monotone", zt.monotone && zt.rows.iter().all(|r| r.max_height.is_some())));
    checks.push(Check::le("zonal final increment", zt.final_increment.unwrap_or(f64::INFINITY), 1e-3));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_helpers() {
        assert!(Check::le("a", 1.0, 1.0).passed);
        assert!(!Check::ge("a", 0.5, 1.0).passed);
        let r = CriterionResult {
            id: 1,
            title: CRITERIA[0],
            passed: false,
            checks: vec![Check::le("x", 2.0, 1.0).limited("known")],
            notes: vec![],
            runtime_s: 0.0,
            error: None,
        };
        assert!(r.acceptable());
        assert!(r.line().contains("FAIL") && r.line().contains("known"));
    }

    #[test]
    fn unknown_criterion_is_an_error() {
        let r = run_criterion(99, &SuiteOptions::quick());
        assert!(!r.passed && r.error.is_some());
    }

    #[test]
    fn quick_flat_cylinder() {
        let r = run_criterion(1, &SuiteOptions::quick());
        assert!(r.passed, "{}", r.line());
    }
}
