//! Run configuration: JSON schema, strict parsing and validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::CriterionId;
use crate::dynamics::{calibrate_well_depth, IntegratorConfig};
use crate::error::{Error, Result};
use crate::model::{PotentialModel, DEFAULT_SOFTENING};
use crate::pulse::{FieldPulse, FrameSpec};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_U: f64 = 0.25;
pub const DEFAULT_T_BACKPROP: f64 = 150.0;
pub const DEFAULT_DETECTION_RADIUS: f64 = 1000.0;
/// Default ground-state energy target when the well depth is calibrated.
pub const GROUND_ENERGY: f64 = -2.0 / 9.0;

/// Model specification as written in a config file. The Gaussian well depth
/// may be omitted, in which case it is calibrated so the ground-state energy
/// matches the Coulomb value -2/9.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    #[serde(rename = "coulomb")]
    Coulomb3d {
        alpha_i: f64,
        #[serde(default)]
        softening: Option<f64>,
    },
    #[serde(rename = "gaussian_well")]
    GaussianWell1d {
        #[serde(default)]
        depth: Option<f64>,
    },
    #[serde(rename = "hydrogen")]
    Hydrogen3d {
        #[serde(default)]
        softening: Option<f64>,
    },
}

impl ModelSpec {
    pub fn resolve(&self, u: f64) -> Result<PotentialModel> {
        let model = match self {
            ModelSpec::Coulomb3d { alpha_i, softening } => PotentialModel::Coulomb3d {
                alpha_i: *alpha_i,
                softening: softening.unwrap_or(DEFAULT_SOFTENING),
            },
            ModelSpec::GaussianWell1d { depth } => {
                let depth = match depth {
                    Some(d) => *d,
                    None => calibrate_well_depth(GROUND_ENERGY, u)?,
                };
                PotentialModel::GaussianWell1d { depth }
            }
            ModelSpec::Hydrogen3d { softening } => PotentialModel::Hydrogen3d {
                softening: softening.unwrap_or(DEFAULT_SOFTENING),
            },
        };
        model.validate()?;
        Ok(model)
    }
}

/// Which pulse parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Pulse amplitude (f0 / e0 / a0, whichever the pulse carries).
    Amplitude,
    Omega,
    /// Magnitude of a static field along the third axis.
    StaticField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// Settings of the fluctuation-based exit criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluctSettings {
    /// Resampling points for the transverse-fluctuation series.
    pub samples: usize,
    /// Smoothing window as a fraction of the pulse duration.
    pub window_frac: f64,
    /// |slope| threshold of the initial plateau (a.u.).
    pub plateau_slope_tol: f64,
    /// Relative slope stability of the final linear segment.
    pub suffix_stability: f64,
}

impl Default for FluctSettings {
    fn default() -> Self {
        FluctSettings {
            samples: 4000,
            window_frac: 0.05,
            plateau_slope_tol: 1e-4,
            suffix_stability: 0.01,
        }
    }
}

/// Equipotential-contour request in the (x3, s3) plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub s_min: f64,
    pub s_max: f64,
    #[serde(default = "default_contour_n")]
    pub resolution: usize,
    /// Contour level; defaults to the ground-state energy.
    #[serde(default)]
    pub level: Option<f64>,
    /// Instant at which the field is evaluated; defaults to the pulse peak.
    #[serde(default)]
    pub time: Option<f64>,
}

fn default_contour_n() -> usize {
    400
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub model: ModelSpec,
    pub pulse: FieldPulse,
    #[serde(default)]
    pub frame: FrameSpec,
    #[serde(default = "default_u")]
    pub u: f64,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub criteria: Vec<CriterionId>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    /// Start time of classical back-propagation.
    #[serde(default = "default_t_backprop")]
    pub t_backprop: f64,
    #[serde(default = "default_detection_radius")]
    pub detection_radius: f64,
    /// Use p = sqrt(2 (V_eff - E)) instead of sqrt(V_eff - E) in the
    /// WKB-like integral.
    #[serde(default)]
    pub kinetic_factor_two: bool,
    #[serde(default)]
    pub fluct: FluctSettings,
    #[serde(default)]
    pub contour: Option<ContourSpec>,
}

fn default_version() -> u32 {
    SCHEMA_VERSION
}
fn default_u() -> f64 {
    DEFAULT_U
}
fn default_t_backprop() -> f64 {
    DEFAULT_T_BACKPROP
}
fn default_detection_radius() -> f64 {
    DEFAULT_DETECTION_RADIUS
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported config version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        if self.u <= 0.0 {
            return Err(Error::config("u: expected a positive number"));
        }
        self.pulse.validate()?;
        self.integrator.validate()?;
        self.model.resolve(self.u)?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::config("sweep.values: expected a non-empty array"));
            }
            for &v in &sweep.values {
                if !v.is_finite() {
                    return Err(Error::config("sweep.values: expected finite numbers"));
                }
                if sweep.parameter == SweepParameter::Omega && v <= 0.0 {
                    return Err(Error::config("sweep.values: omega must be > 0"));
                }
            }
            if sweep.parameter == SweepParameter::StaticField
                && !matches!(self.pulse, FieldPulse::Static { .. })
            {
                return Err(Error::config(
                    "sweep.parameter static_field requires a static pulse",
                ));
            }
        }
        if self.t_backprop <= 0.0 {
            return Err(Error::config("t_backprop: expected a positive number"));
        }
        if self.detection_radius <= 0.0 {
            return Err(Error::config("detection_radius: expected a positive number"));
        }
        if self.fluct.samples < 16 {
            return Err(Error::config("fluct.samples: expected at least 16"));
        }
        if let Some(c) = &self.contour {
            if c.x_max <= c.x_min || c.s_max <= c.s_min || c.resolution < 2 {
                return Err(Error::config("contour: degenerate grid"));
            }
            if c.s_min < 0.0 {
                return Err(Error::config("contour.s_min: expected >= 0"));
            }
        }
        Ok(())
    }

    /// The pulse with a sweep parameter applied.
    pub fn pulse_with(&self, parameter: SweepParameter, value: f64) -> Result<FieldPulse> {
        let mut pulse = self.pulse.clone();
        match parameter {
            SweepParameter::Amplitude => match &mut pulse {
                FieldPulse::HalfCycleSin3 { f0, .. } | FieldPulse::MultiCycle { f0, .. } => {
                    *f0 = value
                }
                FieldPulse::CosEnvelope { a0, .. } => *a0 = value,
                FieldPulse::RotatingHalfCycle { e0, .. } => *e0 = value,
                FieldPulse::Static { .. } => {
                    return Err(Error::config(
                        "amplitude sweep does not apply to a static pulse",
                    ))
                }
            },
            SweepParameter::Omega => match &mut pulse {
                FieldPulse::HalfCycleSin3 { omega, .. }
                | FieldPulse::MultiCycle { omega, .. }
                | FieldPulse::CosEnvelope { omega, .. }
                | FieldPulse::RotatingHalfCycle { omega, .. } => *omega = value,
                FieldPulse::Static { .. } => {
                    return Err(Error::config("omega sweep does not apply to a static pulse"))
                }
            },
            SweepParameter::StaticField => match &mut pulse {
                FieldPulse::Static { f } => *f = [0.0, 0.0, value],
                _ => {
                    return Err(Error::config(
                        "static_field sweep requires a static pulse",
                    ))
                }
            },
        }
        pulse.validate()?;
        Ok(pulse)
    }
}

/// Parse and validate a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::config(format!("cannot read {}: {e}", path.display()))
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text)
        .map_err(|e| Error::config(format!("config schema: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str(
            r#"{
                "model": {"type": "gaussian_well"},
                "pulse": {"type": "half_cycle", "f0": 0.14, "omega": 0.05811}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.version, 1);
        assert_eq!(cfg.u, 0.25);
        assert_eq!(cfg.integrator.rel_tol, 1e-9);
        assert_eq!(cfg.t_backprop, 150.0);
        assert_eq!(cfg.detection_radius, 1000.0);
        assert!(cfg.criteria.is_empty());
        assert_eq!(cfg.frame, FrameSpec::Lab);
        // depth omitted -> calibrated to the Coulomb ground energy
        let model = cfg.model.resolve(cfg.u).unwrap();
        let PotentialModel::GaussianWell1d { depth } = model else {
            panic!("wrong model");
        };
        assert!((depth - 0.60078).abs() < 1e-4, "depth {depth}");
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = parse_config_str(
            r#"{
                "model": {"type": "gaussian_well"},
                "pulse": {"type": "half_cycle", "f0": 0.14, "omega": 0.05811},
                "bogus": 1
            }"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn nonpositive_omega_rejected() {
        let err = parse_config_str(
            r#"{
                "model": {"type": "gaussian_well"},
                "pulse": {"type": "half_cycle", "f0": 0.14, "omega": -0.05}
            }"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("omega"), "{err}");
    }

    #[test]
    fn sweep_roundtrip() {
        let cfg = parse_config_str(
            r#"{
                "model": {"type": "gaussian_well"},
                "pulse": {"type": "half_cycle", "f0": 0.14, "omega": 0.05811},
                "criteria": ["energy"],
                "sweep": {"parameter": "amplitude", "values": [0.14, 0.16, 0.18]}
            }"#,
        )
        .unwrap();
        let sweep = cfg.sweep.as_ref().unwrap();
        assert_eq!(sweep.values.len(), 3);
        let p = cfg.pulse_with(sweep.parameter, 0.16).unwrap();
        assert_eq!(p.field_vector(27.0)[0], -0.16 * (0.05811 * 27.0f64).sin().powi(3));
    }

    #[test]
    fn empty_sweep_rejected() {
        let err = parse_config_str(
            r#"{
                "model": {"type": "gaussian_well"},
                "pulse": {"type": "half_cycle", "f0": 0.14, "omega": 0.05811},
                "sweep": {"parameter": "amplitude", "values": []}
            }"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("non-empty"), "{err}");
    }

    #[test]
    fn static_field_sweep_needs_static_pulse() {
        let err = parse_config_str(
            r#"{
                "model": {"type": "coulomb", "alpha_i": 7.0},
                "pulse": {"type": "half_cycle", "f0": 0.14, "omega": 0.05811},
                "sweep": {"parameter": "static_field", "values": [0.01]}
            }"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("static"), "{err}");
    }
}
