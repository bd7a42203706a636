//! Experiment configuration files.

use std::path::{Path, PathBuf};

use hsl_core::graph_solver::DomainSpec;
use hsl_core::sphere_field::FieldSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Subcommand identifiers as they appear on the command line and in `command`.
pub const COMMANDS: [&str; 9] = [
    "flat-curve",
    "solve-graph",
    "rotational",
    "stability-report",
    "estrella",
    "height-sweep",
    "radius-sweep",
    "flux",
    "reproduce",
];

/// Dirichlet data on the boundary of a graph domain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    #[default]
    Zero,
    Constant { value: f64 },
    /// g(x, y) = a x + b y + c.
    Affine { a: f64, b: f64, c: f64 },
}

impl BoundarySpec {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            BoundarySpec::Zero => 0.0,
            BoundarySpec::Constant { value } => *value,
            BoundarySpec::Affine { a, b, c } => a * x + b * y + c,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    #[default]
    Sphere,
    Hemisphere,
}

/// Surfaces for `stability-report` and `flux`. Rotational kinds take their
/// profile from the field, which must be zonal about e₃.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    RoundSphere { radius: f64 },
    RoundHemisphere { radius: f64 },
    FlatDisk { radius: f64 },
    RotationalSphere,
    RotationalHemisphere,
    Graph {
        domain: DomainSpec,
        #[serde(default)]
        boundary: BoundarySpec,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Newton residual tolerance.
    pub solver: Option<f64>,
    pub max_newton: Option<usize>,
    pub closure_integral: Option<f64>,
    pub closure_geometric: Option<f64>,
    pub desiq: Option<f64>,
    /// Height increment below which a sweep counts as saturated.
    pub saturation: Option<f64>,
}

/// Everything a run needs besides the command-line flags. Every key is
/// optional; keys that the selected command does not read are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<String>,
    pub field: Option<FieldSpec>,
    pub domain: Option<DomainSpec>,
    pub boundary: Option<BoundarySpec>,
    /// Orthonormal plane basis for flat curves.
    pub plane: Option<[[f64; 3]; 2]>,
    pub theta0: Option<f64>,
    pub s_max: Option<f64>,
    pub step: Option<f64>,
    pub shape: Option<Shape>,
    pub surface: Option<SurfaceSpec>,
    /// Disk radii for height sweeps.
    pub sizes: Option<Vec<f64>>,
    /// Disk radii for radius sweeps.
    pub radii: Option<Vec<f64>>,
    pub vectors: Option<Vec<[f64; 3]>>,
    /// Criterion ids for `reproduce`.
    pub criteria: Option<Vec<usize>>,
    pub resolution: Option<usize>,
    pub tolerances: Option<Tolerances>,
    pub export_matrix: Option<bool>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    fn present(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        let mut add = |name: &'static str, set: bool| {
            if set {
                keys.push(name);
            }
        };
        add("field", self.field.is_some());
        add("domain", self.domain.is_some());
        add("boundary", self.boundary.is_some());
        add("plane", self.plane.is_some());
        add("theta0", self.theta0.is_some());
        add("s_max", self.s_max.is_some());
        add("step", self.step.is_some());
        add("shape", self.shape.is_some());
        add("surface", self.surface.is_some());
        add("sizes", self.sizes.is_some());
        add("radii", self.radii.is_some());
        add("vectors", self.vectors.is_some());
        add("criteria", self.criteria.is_some());
        add("export_matrix", self.export_matrix.is_some());
        keys
    }

    fn tolerance_keys(&self) -> Vec<&'static str> {
        let Some(t) = &self.tolerances else { return Vec::new() };
        let mut keys = Vec::new();
        for (name, set) in [
            ("solver", t.solver.is_some()),
            ("max_newton", t.max_newton.is_some()),
            ("closure_integral", t.closure_integral.is_some()),
            ("closure_geometric", t.closure_geometric.is_some()),
            ("desiq", t.desiq.is_some()),
            ("saturation", t.saturation.is_some()),
        ] {
            if set {
                keys.push(name);
            }
        }
        keys
    }

    /// Checks that the config belongs to `command` and only sets keys it reads.
    pub fn validate(&self, command: &str) -> Result<(), CliError> {
        if let Some(c) = &self.command {
            if !COMMANDS.contains(&c.as_str()) {
                return Err(CliError::Usage(format!("unknown command {c:?} in config")));
            }
            if c != command {
                return Err(CliError::Usage(format!("config is for {c:?}, not {command:?}")));
            }
        }
        let (keys, tols): (&[&str], &[&str]) = match command {
            "flat-curve" => (&["field", "plane", "theta0", "s_max", "step"], &["closure_integral", "closure_geometric"]),
            "solve-graph" => (&["field", "domain", "boundary"], &["solver", "max_newton"]),
            "rotational" => (&["field", "shape", "step"], &[]),
            "stability-report" => (&["field", "surface", "export_matrix"], &["desiq", "solver", "max_newton"]),
            "estrella" => (&["field"], &[]),
            "height-sweep" => (&["field", "sizes"], &["solver", "max_newton", "saturation"]),
            "radius-sweep" => (&["field", "radii"], &["solver", "max_newton"]),
            "flux" => (&["field", "surface", "vectors"], &["solver", "max_newton"]),
            "reproduce" => (&["criteria"], &[]),
            other => return Err(CliError::Usage(format!("unknown command {other:?}"))),
        };
        if let Some(k) = self.present().into_iter().find(|k| !keys.contains(k)) {
            return Err(CliError::Usage(format!("key {k:?} is not used by {command}")));
        }
        if let Some(k) = self.tolerance_keys().into_iter().find(|k| !tols.contains(k)) {
            return Err(CliError::Usage(format!("tolerance {k:?} is not used by {command}")));
        }
        self.check_ranges()
    }

    fn check_ranges(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Usage(msg.to_string()));
        let positive = |v: Option<f64>| v.is_none_or(|x| x > 0.0 && x.is_finite());
        if !positive(self.s_max) || !positive(self.step) {
            return bad("s_max and step must be positive");
        }
        if let Some(t) = &self.tolerances {
            if ![t.solver, t.closure_integral, t.closure_geometric, t.desiq, t.saturation].into_iter().all(positive) {
                return bad("tolerances must be positive");
            }
            if t.max_newton == Some(0) {
                return bad("max_newton must be at least 1");
            }
        }
        for list in [&self.sizes, &self.radii].into_iter().flatten() {
            if list.is_empty() || !list.iter().all(|x| *x > 0.0 && x.is_finite()) {
                return bad("sizes and radii must be nonempty lists of positive numbers");
            }
        }
        if let Some(v) = &self.vectors {
            if v.is_empty() {
                return bad("vectors must be nonempty");
            }
        }
        if let Some(c) = &self.criteria {
            if c.is_empty() || c.iter().any(|id| !(1..=hsl_core::suite::CRITERIA.len()).contains(id)) {
                return bad("criteria must list ids between 1 and 13");
            }
        }
        if self.resolution == Some(0) {
            return bad("resolution must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse(r#"{"feild": {}}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"tolerances": {"solvr": 1e-9}}"#).is_err());
        let c = ExperimentConfig::parse(r#"{"field": {"kind": "analytic", "formula": {"id": "constant", "h0": 1.0}}}"#)
            .unwrap();
        assert!(c.validate("flat-curve").is_ok());
        assert!(c.validate("reproduce").is_err());
    }

    #[test]
    fn command_must_match() {
        let c = ExperimentConfig::parse(r#"{"command": "estrella"}"#).unwrap();
        assert!(c.validate("estrella").is_ok());
        assert!(c.validate("flux").is_err());
        let c = ExperimentConfig::parse(r#"{"command": "nope"}"#).unwrap();
        assert!(c.validate("flux").is_err());
    }

    #[test]
    fn ranges() {
        let c = ExperimentConfig::parse(r#"{"sizes": [0.5, -1.0]}"#).unwrap();
        assert!(c.validate("height-sweep").is_err());
        let c = ExperimentConfig::parse(r#"{"criteria": [14]}"#).unwrap();
        assert!(c.validate("reproduce").is_err());
        let c = ExperimentConfig::parse(r#"{"tolerances": {"solver": 0.0}}"#).unwrap();
        assert!(c.validate("solve-graph").is_err());
    }

    #[test]
    fn surface_specs_parse() {
        let c = ExperimentConfig::parse(
            r#"{"surface": {"kind": "graph", "domain": {"shape": "disk", "center": [0, 0], "radius": 0.5, "spacing": 0.05}}}"#,
        )
        .unwrap();
        assert!(matches!(c.surface, Some(SurfaceSpec::Graph { boundary: BoundarySpec::Zero, .. })));
        let c = ExperimentConfig::parse(r#"{"surface": {"kind": "rotational_sphere"}}"#).unwrap();
        assert_eq!(c.surface, Some(SurfaceSpec::RotationalSphere));
        assert!(ExperimentConfig::parse(r#"{"surface": {"kind": "round_sphere", "radius": 1, "r": 2}}"#).is_err());
    }
}
