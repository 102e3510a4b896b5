//! JSON run configurations. Every record rejects unknown keys; missing keys
//! take the documented defaults.

use std::path::Path;

use anyhow::{bail, Context, Result};
use geogate::benchmarking::RBConfig;
use geogate::evolution::{ErrorKind, RotationSpec};
use geogate::filter::{standard_gates, FfSettings, NoiseSpectrum};
use geogate::pulses::GateFamily;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Version of the configuration and output schemas.
pub const SCHEMA_VERSION: u32 = 1;

/// A rotation given by name (`X/2`, `Y/4`, ...) or explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GateSpec {
    Named(String),
    Explicit(RotationSpec),
}

impl GateSpec {
    pub fn resolve(&self) -> Result<RotationSpec> {
        match self {
            GateSpec::Explicit(r) => {
                let n = r.axis.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !(n > 0.0 && n.is_finite() && r.chi.is_finite()) {
                    bail!("rotation needs a nonzero finite axis and finite angle");
                }
                Ok(*r)
            }
            GateSpec::Named(name) => standard_gates()
                .iter()
                .find(|(n, _)| n.eq_ignore_ascii_case(name))
                .map(|(_, r)| *r)
                .with_context(|| format!("unknown gate '{name}' (expected X/2, X/4, Y/2, Y/4, Z/2 or Z/4)")),
        }
    }

    pub fn label(&self) -> String {
        match self {
            GateSpec::Named(n) => n.to_uppercase(),
            GateSpec::Explicit(r) => format!("axis({:.3},{:.3},{:.3})_chi{:.4}", r.axis[0], r.axis[1], r.axis[2], r.chi),
        }
    }

    /// Label safe for file names.
    pub fn file_tag(&self) -> String {
        self.label()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
            .collect()
    }
}

impl Default for GateSpec {
    fn default() -> Self {
        GateSpec::Named("X/2".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub schema_version: u32,
    pub gate: GateSpec,
    pub error_kind: ErrorKind,
    /// Explicit error values; when absent, `points` values from `min` to `max`.
    pub grid: Option<Vec<f64>>,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            schema_version: SCHEMA_VERSION,
            gate: GateSpec::default(),
            error_kind: ErrorKind::OffResonance,
            grid: None,
            min: -0.2,
            max: 0.2,
            points: 81,
        }
    }
}

impl ScanConfig {
    pub fn grid(&self) -> Vec<f64> {
        match &self.grid {
            Some(g) => g.clone(),
            None if self.points == 1 => vec![self.min],
            None => (0..self.points)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (self.points - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RbCmdConfig {
    pub schema_version: u32,
    #[serde(flatten)]
    pub rb: RBConfigFields,
    /// Gate to interleave, by name or explicitly.
    pub interleave: Option<GateSpec>,
    /// Run interleaved RB for all six benchmark rotations and the three
    /// compared families.
    pub table: bool,
}

/// Mirror of [`RBConfig`] without the interleaved target, which is given as
/// a [`GateSpec`] instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RBConfigFields {
    pub lengths: Vec<usize>,
    pub sequences_per_length: usize,
    pub sigma_delta: f64,
    pub family: GateFamily,
    pub perfect_pi: bool,
    pub rng_seed: u64,
    pub draw_per: geogate::benchmarking::NoiseDraw,
}

impl Default for RBConfigFields {
    fn default() -> Self {
        let d = RBConfig::default();
        RBConfigFields {
            lengths: d.lengths,
            sequences_per_length: d.sequences_per_length,
            sigma_delta: d.sigma_delta,
            family: d.family,
            perfect_pi: d.perfect_pi,
            rng_seed: d.rng_seed,
            draw_per: d.draw_per,
        }
    }
}

impl RBConfigFields {
    pub fn to_rb(&self, target: Option<RotationSpec>) -> RBConfig {
        RBConfig {
            lengths: self.lengths.clone(),
            sequences_per_length: self.sequences_per_length,
            sigma_delta: self.sigma_delta,
            family: self.family,
            perfect_pi: self.perfect_pi,
            rng_seed: self.rng_seed,
            interleaved_target: target,
            draw_per: self.draw_per,
        }
    }
}

impl Default for RbCmdConfig {
    fn default() -> Self {
        RbCmdConfig {
            schema_version: SCHEMA_VERSION,
            rb: RBConfigFields::default(),
            interleave: None,
            table: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FfCmdConfig {
    pub schema_version: u32,
    pub spectrum: NoiseSpectrum,
    pub settings: FfSettings,
    /// Filter-curve grid in units of `f/f_Rabi`.
    pub curve_min: f64,
    pub curve_max: f64,
    pub curve_points_per_decade: usize,
    /// Time-sampling step (rotation angle, rad) for the curves.
    pub curve_phase_step: f64,
    /// Also recompute every table entry on doubled grids and report the change.
    pub convergence_report: bool,
    /// Candidate infrared cutoffs for `ff-sweep`, Hz.
    pub f_lo_candidates: Vec<f64>,
}

impl Default for FfCmdConfig {
    fn default() -> Self {
        FfCmdConfig {
            schema_version: SCHEMA_VERSION,
            spectrum: NoiseSpectrum::default(),
            settings: FfSettings::default(),
            curve_min: 1e-3,
            curve_max: 1e1,
            curve_points_per_decade: 20,
            curve_phase_step: 2e-3,
            convergence_report: false,
            f_lo_candidates: geogate::filter::F_LO_CANDIDATES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LindbladCmdConfig {
    pub schema_version: u32,
    pub gate: GateSpec,
    pub family: GateFamily,
    pub perfect_pi: bool,
    pub delta: f64,
    pub epsilon: f64,
    pub gamma1_values: Vec<f64>,
    pub gamma_phi: f64,
    /// Integration step in units of `1/Ω`.
    pub dt: f64,
}

impl Default for LindbladCmdConfig {
    fn default() -> Self {
        LindbladCmdConfig {
            schema_version: SCHEMA_VERSION,
            gate: GateSpec::default(),
            family: GateFamily::OptimizedGeometric,
            perfect_pi: false,
            delta: 0.1,
            epsilon: 0.0,
            gamma1_values: vec![0.0, 1e-4, 1e-2],
            gamma_phi: 0.0,
            dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathCmdConfig {
    pub schema_version: u32,
    pub gate: GateSpec,
    pub families: Vec<GateFamily>,
    pub perfect_pi: bool,
    pub deltas: Vec<f64>,
    pub samples_per_segment: usize,
}

impl Default for PathCmdConfig {
    fn default() -> Self {
        PathCmdConfig {
            schema_version: SCHEMA_VERSION,
            gate: GateSpec::default(),
            families: vec![GateFamily::ConventionalGeometric, GateFamily::OptimizedGeometric],
            perfect_pi: false,
            deltas: vec![0.0, 0.2],
            samples_per_segment: geogate::evolution::DEFAULT_SAMPLES_PER_SEGMENT,
        }
    }
}

/// Reads a configuration file, or the defaults when no path is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    if let Some(v) = value.get("schema_version") {
        if v.as_u64() != Some(SCHEMA_VERSION as u64) {
            bail!("unsupported schema_version {v} (expected {SCHEMA_VERSION})");
        }
    }
    serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<ScanConfig>(r#"{"points": 3, "typo": 1}"#).is_err());
        assert!(serde_json::from_str::<LindbladCmdConfig>(r#"{"gama1_values": []}"#).is_err());
        assert!(serde_json::from_str::<FfCmdConfig>(r#"{"spectrum": {"s0": 1, "beta": 2}}"#).is_err());
        assert!(serde_json::from_str::<RbCmdConfig>(r#"{"sequences": 3}"#).is_err());
    }

    #[test]
    fn gate_spec_forms() {
        let g: GateSpec = serde_json::from_str(r#""z/4""#).unwrap();
        assert_eq!(g.resolve().unwrap().axis, [0.0, 0.0, 1.0]);
        let g: GateSpec = serde_json::from_str(r#"{"axis": [0, 1, 0], "chi": 0.3}"#).unwrap();
        assert_eq!(g.resolve().unwrap().chi, 0.3);
        assert!(GateSpec::Named("H".into()).resolve().is_err());
        assert_eq!(GateSpec::Named("x/2".into()).file_tag(), "X_2");
    }

    #[test]
    fn rb_fields_flatten() {
        let c: RbCmdConfig =
            serde_json::from_str(r#"{"family": "naive", "sequences_per_length": 5, "interleave": "X/2"}"#).unwrap();
        assert_eq!(c.rb.family, GateFamily::NaiveDynamical);
        assert_eq!(c.rb.sequences_per_length, 5);
        assert_eq!(c.rb.lengths, RBConfig::default().lengths);
    }

    /// The documented examples spell out the defaults.
    #[test]
    fn documented_configs_are_defaults() {
        let scan: ScanConfig = serde_json::from_str(
            r#"{"gate": "X/2", "error_kind": "off_resonance", "min": -0.2, "max": 0.2, "points": 81, "grid": null}"#,
        )
        .unwrap();
        assert_eq!(scan, ScanConfig::default());
        let rb: RbCmdConfig = serde_json::from_str(
            r#"{"lengths": [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000], "sequences_per_length": 200,
                "sigma_delta": 0.02, "family": "opt", "perfect_pi": false, "rng_seed": 7,
                "draw_per": "sequence", "interleave": null, "table": false}"#,
        )
        .unwrap();
        assert_eq!(rb, RbCmdConfig::default());
        let ff: FfCmdConfig = serde_json::from_str(
            r#"{"spectrum": {"s0": 2.67e6, "alpha": 1.01, "f_lo": 10.0, "f_uv": 320000.0},
                "settings": {"f_rabi": 4e6, "convention": "hertz", "points_per_decade": 24,
                             "phase_step": 0.002, "rel_tol": 1e-4},
                "curve_min": 1e-3, "curve_max": 10.0, "curve_points_per_decade": 20,
                "curve_phase_step": 0.002, "convergence_report": false,
                "f_lo_candidates": [10.0, 100.0, 1000.0]}"#,
        )
        .unwrap();
        assert_eq!(ff, FfCmdConfig::default());
        let lb: LindbladCmdConfig = serde_json::from_str(
            r#"{"gate": "X/2", "family": "opt", "perfect_pi": false, "delta": 0.1, "epsilon": 0.0,
                "gamma1_values": [0.0, 1e-4, 1e-2], "gamma_phi": 0.0, "dt": 0.01}"#,
        )
        .unwrap();
        assert_eq!(lb, LindbladCmdConfig::default());
        let path: PathCmdConfig = serde_json::from_str(
            r#"{"gate": "X/2", "families": ["geo", "opt"], "perfect_pi": false,
                "deltas": [0.0, 0.2], "samples_per_segment": 64}"#,
        )
        .unwrap();
        assert_eq!(path, PathCmdConfig::default());
    }

    #[test]
    fn scan_grid_from_range() {
        let c = ScanConfig { points: 5, min: -1.0, max: 1.0, ..ScanConfig::default() };
        assert_eq!(c.grid(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let c = ScanConfig { points: 0, ..ScanConfig::default() };
        assert!(c.grid().is_empty());
    }
}
