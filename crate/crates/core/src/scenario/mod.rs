//! Scenario files: a sectioned TOML description of one run (material law,
//! grid, data preset, solver and diagnostics), the built-in preset registry,
//! and the batch runner that writes CSVs, field dumps and a manifest.

mod build;
mod presets;
mod run;

pub use build::{build_scenario, perturbation_direction, pulse_value, ScenarioSetup};
pub use presets::{list_scenarios, preset, PresetInfo};
pub use run::{exit_code_for_error, run, run_with_progress, RunManifest, RunOptions, RunResult};

use serde::{Deserialize, Serialize};

use crate::diagnostics::ConeDirection;
use crate::error::{QmxError, Result};
use crate::grid::{BoundaryMode, GridSpec, DEFAULT_CELL_CAP};
use crate::linear::StepperConfig;
use crate::material::{StateDomain, Vartheta};
use crate::picard::PicardConfig;

fn one() -> f64 {
    1.0
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Where `run` writes its artifacts; `runs/<name>` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    /// Seed of the randomized perturbation direction.
    #[serde(default)]
    pub seed: u64,
    pub material: MaterialSection,
    pub grid: GridSection,
    pub data: DataSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    Kerr,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub law: LawKind,
    /// Kerr coefficient, a scalar or nine numbers (row-major 3x3).
    #[serde(default = "zero_vartheta")]
    pub vartheta: Vartheta,
    #[serde(default)]
    pub conductivity_scale: f64,
    /// Kerr only: anti-damping `sigma_1 = (conductivity_scale - gain) I`.
    #[serde(default, skip_serializing_if = "is_default")]
    pub gain: f64,
    /// Linear only.
    #[serde(default = "one")]
    pub epsilon: f64,
    /// Linear only.
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "all_states")]
    pub state_domain: StateDomain,
    /// Lower bound used in place of the law's own `eta`; may only shrink it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

fn zero_vartheta() -> Vartheta {
    Vartheta::Scalar(0.0)
}

fn all_states() -> StateDomain {
    StateDomain::All
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub cells: [usize; 3],
    pub length: [f64; 3],
    #[serde(default)]
    pub origin: [f64; 3],
    pub modes: [BoundaryMode; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_cap: Option<usize>,
}

impl GridSection {
    pub fn spec(&self) -> Result<GridSpec> {
        let spacing = std::array::from_fn(|a| self.length[a] / self.cells[a].max(1) as f64);
        GridSpec::with_cap(self.cells, spacing, self.origin, self.modes, self.cell_cap.unwrap_or(DEFAULT_CELL_CAP))
            .map_err(|e| config_err("grid", e.to_string()))
    }

    /// Same physical box with `n` cells per axis.
    pub fn with_resolution(&self, n: usize) -> Self {
        Self {
            cells: [n; 3],
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataPreset {
    Zero,
    /// Divergence-free compactly supported pulse of radius `width` at `center`.
    Pulse,
    /// `E = A (0, sin k x1, 0)`, `H = A (0, 0, sin k x1)`.
    PlaneWave,
    /// Spatially constant `e_field`, `h_field`.
    Uniform,
    /// Exact solution with matching interior source and boundary data.
    Manufactured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub preset: DataPreset,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default)]
    pub center: [f64; 3],
    /// Periods per box length along axis 1 (plane wave, manufactured).
    #[serde(default = "one")]
    pub wavenumber: f64,
    /// Angular frequency over `2 pi` (manufactured).
    #[serde(default = "one")]
    pub frequency: f64,
    #[serde(default)]
    pub e_field: [f64; 3],
    #[serde(default)]
    pub h_field: [f64; 3],
}

fn default_width() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Regularity order of the solution class.
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "one")]
    pub penalty: f64,
    #[serde(default = "default_dissipation")]
    pub dissipation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dt: Option<f64>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_fp_tolerance")]
    pub fp_tolerance: f64,
    #[serde(default = "default_contraction_warn")]
    pub contraction_warn: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_guard: Option<f64>,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_lipschitz_threshold")]
    pub lipschitz_threshold: f64,
    #[serde(default = "default_max_halvings")]
    pub max_halvings: usize,
    /// Compatibility tolerance at `t0`; `h^2` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compat_tolerance: Option<f64>,
}

fn default_m() -> usize {
    2
}
fn default_tau() -> f64 {
    PicardConfig::default().slab_width
}
fn default_horizon() -> f64 {
    0.1
}
fn default_cfl() -> f64 {
    StepperConfig::default().cfl
}
fn default_dissipation() -> f64 {
    StepperConfig::default().dissipation
}
fn default_max_iterations() -> usize {
    PicardConfig::default().max_iterations
}
fn default_fp_tolerance() -> f64 {
    PicardConfig::default().fp_tolerance
}
fn default_contraction_warn() -> f64 {
    PicardConfig::default().contraction_warn
}
fn default_lipschitz_threshold() -> f64 {
    PicardConfig::default().lipschitz_threshold
}
fn default_max_halvings() -> usize {
    PicardConfig::default().max_halvings
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            m: default_m(),
            tau: default_tau(),
            horizon: default_horizon(),
            cfl: default_cfl(),
            penalty: 1.0,
            dissipation: default_dissipation(),
            max_dt: None,
            max_iterations: default_max_iterations(),
            fp_tolerance: default_fp_tolerance(),
            contraction_warn: default_contraction_warn(),
            radius_r: None,
            kappa_guard: None,
            gamma: 0.0,
            lipschitz_threshold: default_lipschitz_threshold(),
            max_halvings: default_max_halvings(),
            compat_tolerance: None,
        }
    }
}

impl SolverSection {
    pub fn stepper(&self) -> StepperConfig {
        StepperConfig {
            cfl: self.cfl,
            penalty_strength: self.penalty,
            dissipation: self.dissipation,
            max_dt: self.max_dt,
        }
    }

    pub fn picard(&self) -> PicardConfig {
        PicardConfig {
            slab_width: self.tau,
            max_iterations: self.max_iterations,
            fp_tolerance: self.fp_tolerance,
            contraction_warn: self.contraction_warn,
            radius_r: self.radius_r,
            kappa_guard: self.kappa_guard,
            gamma: self.gamma,
            lipschitz_threshold: self.lipschitz_threshold,
            max_halvings: self.max_halvings,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default = "yes")]
    pub energy: bool,
    #[serde(default)]
    pub divergence: bool,
    #[serde(default)]
    pub cone: bool,
    #[serde(default = "default_cone_radius")]
    pub cone_radius: f64,
    /// `3 / eta` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone_speed: Option<f64>,
    /// The data center when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone_center: Option<[f64; 3]>,
    #[serde(default = "default_cone_direction")]
    pub cone_direction: ConeDirection,
    #[serde(default = "default_cone_tolerance")]
    pub cone_tolerance: f64,
    #[serde(default)]
    pub continuity: bool,
    #[serde(default = "default_deltas")]
    pub continuity_deltas: Vec<f64>,
    /// Write a field dump every this many stored levels; 0 disables dumps.
    #[serde(default)]
    pub dump_every: usize,
}

fn yes() -> bool {
    true
}
fn default_cone_radius() -> f64 {
    0.25
}
fn default_cone_direction() -> ConeDirection {
    ConeDirection::Forward
}
fn default_cone_tolerance() -> f64 {
    1e-6
}
fn default_deltas() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            energy: true,
            divergence: false,
            cone: false,
            cone_radius: default_cone_radius(),
            cone_speed: None,
            cone_center: None,
            cone_direction: default_cone_direction(),
            cone_tolerance: default_cone_tolerance(),
            continuity: false,
            continuity_deltas: default_deltas(),
            dump_every: 0,
        }
    }
}

fn config_err(path: &str, message: impl Into<String>) -> QmxError {
    QmxError::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(path, format!("must be positive and finite, got {v}")))
    }
}

impl ScenarioConfig {
    /// Checks every constraint, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(config_err("name", "must not be empty"));
        }
        let mat = &self.material;
        match mat.law {
            LawKind::Kerr => {
                let v = mat
                    .vartheta
                    .as_scalar()
                    .map_err(|e| config_err("material.vartheta", e.to_string()))?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(config_err("material.vartheta", format!("must be >= 0, got {v}")));
                }
                if mat.epsilon != 1.0 || mat.mu != 1.0 {
                    return Err(config_err("material.epsilon", "only applies to law = \"linear\""));
                }
            }
            LawKind::Linear => {
                if mat.vartheta != Vartheta::Scalar(0.0) {
                    return Err(config_err("material.vartheta", "only applies to law = \"kerr\""));
                }
                if mat.gain != 0.0 {
                    return Err(config_err("material.gain", "only applies to law = \"kerr\""));
                }
                positive("material.epsilon", mat.epsilon)?;
                positive("material.mu", mat.mu)?;
            }
        }
        if !(mat.conductivity_scale >= 0.0 && mat.conductivity_scale.is_finite()) {
            return Err(config_err(
                "material.conductivity_scale",
                format!("must be >= 0, got {}", mat.conductivity_scale),
            ));
        }
        if !(mat.gain >= 0.0 && mat.gain.is_finite()) {
            return Err(config_err("material.gain", format!("must be >= 0, got {}", mat.gain)));
        }
        mat.state_domain
            .validate()
            .map_err(|e| config_err("material.state_domain", e.to_string()))?;
        if let Some(eta) = mat.eta {
            positive("material.eta", eta)?;
        }

        let g = &self.grid;
        for a in 0..3 {
            if g.cells[a] == 0 {
                return Err(config_err("grid.cells", "every axis needs at least one cell"));
            }
            positive("grid.length", g.length[a])?;
        }
        g.spec()?;

        let d = &self.data;
        positive("data.width", d.width)?;
        positive("data.wavenumber", d.wavenumber)?;
        positive("data.frequency", d.frequency)?;
        if !d.amplitude.is_finite() {
            return Err(config_err("data.amplitude", "must be finite"));
        }
        if d.preset == DataPreset::Manufactured && !(mat.law == LawKind::Linear || mat.vartheta.as_scalar()? == 0.0) {
            return Err(config_err("data.preset", "manufactured data need a state-independent law"));
        }

        let s = &self.solver;
        if !(s.horizon >= 0.0 && s.horizon.is_finite()) {
            return Err(config_err("solver.horizon", format!("must be >= 0, got {}", s.horizon)));
        }
        if let Some(t) = s.compat_tolerance {
            positive("solver.compat_tolerance", t)?;
        }
        if let Some(r) = s.radius_r {
            positive("solver.radius_r", r)?;
        }
        s.stepper().validate()?;
        s.picard().validate()?;

        let diag = &self.diagnostics;
        positive("diagnostics.cone_radius", diag.cone_radius)?;
        if let Some(c) = diag.cone_speed {
            positive("diagnostics.cone_speed", c)?;
        }
        if !(diag.cone_tolerance >= 0.0) {
            return Err(config_err("diagnostics.cone_tolerance", "must be >= 0"));
        }
        if diag.continuity && diag.continuity_deltas.is_empty() {
            return Err(config_err("diagnostics.continuity_deltas", "must not be empty"));
        }
        if diag.continuity_deltas.iter().any(|x| !x.is_finite()) {
            return Err(config_err("diagnostics.continuity_deltas", "must be finite"));
        }
        Ok(())
    }

    /// Output directory, defaulting to `runs/<name>`.
    pub fn output_path(&self) -> std::path::PathBuf {
        match &self.output_dir {
            Some(d) => d.into(),
            None => std::path::Path::new("runs").join(&self.name),
        }
    }
}

/// Parses and validates a scenario file. Errors name the key path; syntax
/// errors carry the line and column.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = toml::Deserializer::new(text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().message().to_string();
        let location = e
            .inner()
            .span()
            .map(|s| {
                let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                format!(" (line {line})")
            })
            .unwrap_or_default();
        config_err(if path == "." { "<root>" } else { &path }, format!("{message}{location}"))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Serializes a config; `parse_config(&emit_config(c)) == c`.
pub fn emit_config(cfg: &ScenarioConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| QmxError::Io(format!("cannot serialize config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "tiny"

[material]
law = "kerr"

[grid]
cells = [8, 8, 8]
length = [1.0, 1.0, 1.0]
modes = ["periodic", "periodic", "periodic"]

[data]
preset = "plane_wave"
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.solver, SolverSection::default());
        assert_eq!(c.diagnostics, DiagnosticsSection::default());
        assert_eq!(c.material.vartheta, Vartheta::Scalar(0.0));
        assert_eq!(c.data.amplitude, 1.0);
        assert_eq!(c.output_path(), std::path::Path::new("runs/tiny"));
    }

    #[test]
    fn cfl_above_one_names_the_key() {
        let text = format!("{MINIMAL}\n[solver]\ncfl = 1.5\n");
        match parse_config(&text) {
            Err(QmxError::Config { path, message }) => {
                assert_eq!(path, "solver.cfl");
                assert!(message.contains("(0, 1]"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected_with_its_path() {
        let text = MINIMAL.replace("law = \"kerr\"", "law = \"kerr\"\ncolour = 3");
        match parse_config(&text) {
            Err(QmxError::Config { path, message }) => {
                assert_eq!(path, "material.colour");
                assert!(message.contains("unknown field"), "{message}");
                assert!(message.contains("line"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_mismatch_names_the_key() {
        let text = MINIMAL.replace("cells = [8, 8, 8]", "cells = [8, \"x\", 8]");
        match parse_config(&text) {
            Err(QmxError::Config { path, .. }) => assert!(path.starts_with("grid.cells"), "{path}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn anisotropic_vartheta_is_rejected() {
        let text = MINIMAL.replace(
            "law = \"kerr\"",
            "law = \"kerr\"\nvartheta = [1.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0]",
        );
        assert!(matches!(parse_config(&text), Err(QmxError::Config { path, .. }) if path == "material.vartheta"));
        let iso = MINIMAL.replace(
            "law = \"kerr\"",
            "law = \"kerr\"\nvartheta = [2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0]",
        );
        assert!(parse_config(&iso).is_ok());
    }

    #[test]
    fn negative_conductivity_is_rejected() {
        let text = MINIMAL.replace("law = \"kerr\"", "law = \"kerr\"\nconductivity_scale = -1.0");
        assert!(matches!(parse_config(&text), Err(QmxError::Config { path, .. }) if path == "material.conductivity_scale"));
    }
}
