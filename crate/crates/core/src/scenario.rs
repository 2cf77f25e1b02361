//! Scenario files: what to analyze and with which parameters.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{second_primitive, Catalog, CurveError, CurveSet, PeriodicCurve};
use crate::field::{Kernel, Sign};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ScenarioError {
    fn at(path: &str, message: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Analyze2d,
    Knots3d,
    Degree,
    Critical,
    Orbits,
    Nbody,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Analyze2d => "analyze2d",
            Task::Knots3d => "knots3d",
            Task::Degree => "degree",
            Task::Critical => "critical",
            Task::Orbits => "orbits",
            Task::Nbody => "nbody",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_sign")]
    pub sign: Sign,
}

fn default_q() -> f64 {
    2.0
}
fn default_sign() -> Sign {
    Sign::Attractive
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self { q: 2.0, sign: Sign::Attractive }
    }
}

/// How given coefficients are read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CurveRole {
    /// The coefficients are the curve `H` itself.
    #[default]
    SecondPrimitive,
    /// The coefficients are the forcing `h`; `H` solves `H'' = -h`.
    Forcing,
}

/// Exactly one of `catalog`, `coefficients` or `components`.
///
/// Coefficients are listed per mode `k = 0..K`, each mode a list of `[re, im]` per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    #[serde(default)]
    pub role: CurveRole,
}

impl CurveSpec {
    pub fn catalog(name: &str) -> Self {
        Self {
            catalog: Some(name.to_string()),
            ..Default::default()
        }
    }

    pub fn catalog_entry(&self) -> Option<Catalog> {
        self.catalog.as_deref().and_then(|c| Catalog::parse(c).ok())
    }

    pub fn build(&self) -> Result<CurveSet, ScenarioError> {
        let given = [self.catalog.is_some(), self.coefficients.is_some(), self.components.is_some()];
        if given.iter().filter(|g| **g).count() != 1 {
            return Err(ScenarioError::at(
                "curve",
                "give exactly one of `catalog`, `coefficients`, `components`",
            ));
        }
        if let Some(name) = &self.catalog {
            let cat = Catalog::parse(name).map_err(|e| ScenarioError::at("curve.catalog", e.to_string()))?;
            if self.role == CurveRole::Forcing {
                return Err(ScenarioError::at("curve.role", "catalog entries are curves, not forcings"));
            }
            return cat.build().map_err(|e| ScenarioError::at("curve.catalog", e.to_string()));
        }
        let lists: Vec<(String, &Vec<Vec<[f64; 2]>>)> = match (&self.coefficients, &self.components) {
            (Some(c), _) => vec![("curve.coefficients".to_string(), c)],
            (_, Some(cs)) => cs
                .iter()
                .enumerate()
                .map(|(i, c)| (format!("curve.components[{i}]"), c))
                .collect(),
            _ => unreachable!(),
        };
        let mut curves = Vec::new();
        for (path, modes) in lists {
            let dim = modes.first().map_or(0, |m| m.len());
            if dim < 2 {
                return Err(ScenarioError::at(&path, "need at least one mode with two or more coordinates"));
            }
            if let Some(k) = modes.iter().position(|m| m.len() != dim) {
                return Err(ScenarioError::at(
                    &format!("{path}[{k}]"),
                    format!("expected {dim} coordinates"),
                ));
            }
            let coefficients: Vec<Vec<Complex64>> = modes
                .iter()
                .map(|m| m.iter().map(|c| Complex64::new(c[0], c[1])).collect())
                .collect();
            let c = PeriodicCurve::new(dim, coefficients);
            let c = match self.role {
                CurveRole::SecondPrimitive => c,
                CurveRole::Forcing => second_primitive(&c).map_err(|e| ScenarioError::at(&path, e.to_string()))?,
            };
            curves.push(c);
        }
        CurveSet::new(curves).map_err(|e: CurveError| ScenarioError::at("curve", e.to_string()))
    }
}

/// Numerical parameters; every field has a default that is written back into the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub resolution: usize,
    pub stability_resolutions: Vec<usize>,
    /// Erosion distance for the component regions.
    pub erosion: f64,
    /// Further erosion distances the component degrees must agree at.
    pub erosion_checks: Vec<f64>,
    pub quadrature_nodes: usize,
    pub exclusion: f64,
    /// Far-field boundary radius as a multiple of the curve radius.
    pub far_field_factor: f64,
    pub n_starts: usize,
    pub seed: u64,
    pub modes: usize,
    pub max_modes: usize,
    pub epsilons: Vec<f64>,
    pub distinct_tol: f64,
    pub loop_radii: Vec<f64>,
    pub random_constants: usize,
    pub max_continuation_steps: usize,
    pub collision_fraction: f64,
    /// Random points for the finite-difference checks of the field.
    pub fd_points: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            resolution: 1024,
            stability_resolutions: vec![512, 1024, 2048],
            erosion: 0.05,
            erosion_checks: vec![0.01, 0.1],
            quadrature_nodes: 256,
            exclusion: 1e-3,
            far_field_factor: 10.0,
            n_starts: 256,
            seed: 0,
            modes: 64,
            max_modes: 4096,
            epsilons: vec![1e-3],
            distinct_tol: 1e-3,
            loop_radii: vec![0.1, 0.3, 1.0],
            random_constants: 8,
            max_continuation_steps: 200,
            collision_fraction: 1e-2,
            fd_points: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dimension: usize,
    #[serde(default)]
    pub kernel: KernelSpec,
    pub curve: CurveSpec,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::Invalid {
                path: if path == "." { "(root)".into() } else { path },
                message: e.into_inner().to_string(),
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn kernel(&self) -> Kernel {
        Kernel {
            q: self.kernel.q,
            sign: self.kernel.sign,
        }
    }

    /// Tasks in execution order, duplicates removed.
    pub fn ordered_tasks(&self) -> Vec<Task> {
        let mut t = self.tasks.clone();
        t.sort();
        t.dedup();
        t
    }

    pub fn has(&self, task: Task) -> bool {
        self.tasks.contains(&task)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.trim().is_empty() {
            return Err(ScenarioError::at("name", "must not be empty"));
        }
        if !(2..=3).contains(&self.dimension) {
            return Err(ScenarioError::at("dimension", "must be 2 or 3"));
        }
        Kernel::new(self.kernel.q, self.kernel.sign).map_err(|e| ScenarioError::at("kernel.q", e.to_string()))?;
        if self.tasks.is_empty() {
            return Err(ScenarioError::at("tasks", "at least one task is required"));
        }
        let set = self.curve.build()?;
        if set.dimension() != self.dimension {
            return Err(ScenarioError::at(
                "curve",
                format!("curve dimension {} differs from dimension {}", set.dimension(), self.dimension),
            ));
        }
        for (i, t) in self.tasks.iter().enumerate() {
            let path = format!("tasks[{i}]");
            match t {
                Task::Analyze2d if self.dimension != 2 || set.component_count() != 1 => {
                    return Err(ScenarioError::at(&path, "analyze2d requires a single curve in dimension 2"));
                }
                Task::Knots3d if self.dimension != 3 => {
                    return Err(ScenarioError::at(&path, "knots3d requires dimension 3"));
                }
                Task::Nbody if self.dimension != 3 => {
                    return Err(ScenarioError::at(&path, "nbody requires dimension 3"));
                }
                _ => {}
            }
        }
        let s = &self.solver;
        let positive = [
            ("solver.erosion", s.erosion),
            ("solver.exclusion", s.exclusion),
            ("solver.far_field_factor", s.far_field_factor),
            ("solver.distinct_tol", s.distinct_tol),
            ("solver.collision_fraction", s.collision_fraction),
        ];
        for (path, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScenarioError::at(path, "must be positive"));
            }
        }
        if s.resolution < 64 {
            return Err(ScenarioError::at("solver.resolution", "must be at least 64"));
        }
        if let Some(i) = s.stability_resolutions.iter().position(|r| *r < 64) {
            return Err(ScenarioError::at(&format!("solver.stability_resolutions[{i}]"), "must be at least 64"));
        }
        if s.quadrature_nodes < 64 {
            return Err(ScenarioError::at("solver.quadrature_nodes", "must be at least 64"));
        }
        if s.modes < 4 || s.max_modes < s.modes {
            return Err(ScenarioError::at("solver.modes", "need 4 <= modes <= max_modes"));
        }
        if let Some(i) = s.epsilons.iter().position(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(ScenarioError::at(&format!("solver.epsilons[{i}]"), "must be positive"));
        }
        if s.n_starts == 0 {
            return Err(ScenarioError::at("solver.n_starts", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::from_json(
            r#"{"name": "e", "dimension": 2, "curve": {"catalog": "epicycloid"}, "tasks": ["analyze2d"]}"#,
        )
        .unwrap();
        assert_eq!(s.kernel.q, 2.0);
        assert_eq!(s.solver.modes, 64);
        assert_eq!(s.curve.build().unwrap().component_count(), 1);
    }

    #[test]
    fn unknown_task_reports_its_path() {
        let err = Scenario::from_json(
            r#"{"name": "e", "dimension": 2, "curve": {"catalog": "epicycloid"}, "tasks": ["analyze2d", "fly"]}"#,
        )
        .unwrap_err();
        let text = err.to_string();
        assert!(text.starts_with("tasks[1]"), "{text}");
    }

    #[test]
    fn prerequisites() {
        let err = Scenario::from_json(
            r#"{"name": "u", "dimension": 3, "curve": {"catalog": "unknot"}, "tasks": ["analyze2d"]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("tasks[0]"), "{err}");
        let err = Scenario::from_json(
            r#"{"name": "u", "dimension": 2, "curve": {"catalog": "unknot"}, "tasks": ["critical"]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("curve"), "{err}");
    }

    #[test]
    fn forcing_coefficients() {
        // h = (2 pi)^2 (cos, sin) has H = the unit circle
        let w = std::f64::consts::TAU.powi(2) / 2.0;
        let s = Scenario::from_json(&format!(
            r#"{{"name": "c", "dimension": 2, "tasks": ["critical"],
                "curve": {{"role": "forcing", "coefficients": [[[0,0],[0,0]], [[{w},0],[0,{}]]]}}}}"#,
            -w
        ))
        .unwrap();
        let set = s.curve.build().unwrap();
        let p = set.curves()[0].point(0.0);
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);
    }
}
