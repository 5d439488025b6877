//! Experiment configuration: JSON schema, load-time validation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    PowerCurve,
    PhaseDiagram,
    Scaling,
    BiasFrontier,
    ImpossibilityDemo,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::PowerCurve => "power-curve",
            Scenario::PhaseDiagram => "phase-diagram",
            Scenario::Scaling => "scaling",
            Scenario::BiasFrontier => "bias-frontier",
            Scenario::ImpossibilityDemo => "impossibility-demo",
        }
    }

    /// Stable id used as the leading element of RNG stream paths.
    pub fn stream_id(&self) -> u64 {
        match self {
            Scenario::PowerCurve => 0,
            Scenario::PhaseDiagram => 1,
            Scenario::Scaling => 2,
            Scenario::BiasFrontier => 3,
            Scenario::ImpossibilityDemo => 4,
        }
    }
}

/// Which truncation construction the experiment runs against.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryKind {
    /// No truncation regardless of ε.
    None,
    /// Upper-tail halfspace removal along e0.
    Halfspace,
    /// Hollow the interval just above the mean on coordinate 0.
    CenterHollowing,
    /// The two-atom indistinguishability construction.
    Impossibility { p: f64 },
    /// The three-segment median-sharpness construction.
    Sharpness { xi: f64, big_r: f64 },
}

impl AdversaryKind {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryKind::None => "none",
            AdversaryKind::Halfspace => "halfspace",
            AdversaryKind::CenterHollowing => "center_hollowing",
            AdversaryKind::Impossibility { .. } => "impossibility",
            AdversaryKind::Sharpness { .. } => "sharpness",
        }
    }
}

/// Cartesian sweep lists. An empty `n` list means derive the sample size from
/// the feasibility calculus with the calibrated constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub alpha: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub d: Vec<usize>,
    #[serde(default)]
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub scenario: Scenario,
    /// Family template; dimension and mean are re-instantiated per grid cell.
    pub distribution: DistributionSpec,
    pub adversary: AdversaryKind,
    pub grid: GridSpec,
    pub trials: usize,
    pub delta: f64,
    pub master_seed: u64,
    /// Frozen universal constant; absent means calibrate at the reference
    /// cell before the sweep.
    #[serde(default)]
    pub calibration_c: Option<f64>,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.distribution.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.trials < 100 {
            return Err(Error::Config(format!(
                "trials must be >= 100 for any reported rate, got {}",
                self.trials
            )));
        }
        if self.grid.alpha.is_empty() || self.grid.epsilon.is_empty() || self.grid.d.is_empty() {
            return Err(Error::Config("grid lists must be nonempty".into()));
        }
        if self.grid.alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Config("alpha grid values must be positive".into()));
        }
        if self.grid.epsilon.iter().any(|e| !(*e >= 0.0 && *e < 1.0)) {
            return Err(Error::Config("epsilon grid values must lie in [0, 1)".into()));
        }
        if self.grid.d.iter().any(|d| *d == 0) {
            return Err(Error::Config("dimension grid values must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0 / 3.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1/3), got {}",
                self.delta
            )));
        }
        if let Some(c) = self.calibration_c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config("calibration_c must be positive".into()));
            }
        }
        match &self.adversary {
            AdversaryKind::Impossibility { p } if !(*p >= 2.0) => {
                return Err(Error::Config(format!("impossibility adversary needs p >= 2, got {p}")))
            }
            AdversaryKind::Sharpness { xi, big_r } if !(*xi > 0.0 && *xi < 0.5 && *big_r > 1.0) => {
                return Err(Error::Config(
                    "sharpness adversary needs 0 < xi < 1/2 and R > 1".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, recorded in the run manifest.
    pub fn sha256(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_json() -> serde_json::Value {
        serde_json::json!({
            "scenario": "power-curve",
            "distribution": {"family": "isotropic_gaussian", "dimension": 1, "mean": [0.0], "scale": 1.0},
            "adversary": {"kind": "halfspace"},
            "grid": {"alpha": [0.5], "epsilon": [0.0, 0.05], "d": [2]},
            "trials": 200,
            "delta": 0.1,
            "master_seed": 7
        })
    }

    #[test]
    fn loads_and_hashes() {
        let cfg = ExperimentConfig::from_json(&base_json().to_string()).unwrap();
        assert_eq!(cfg.scenario, Scenario::PowerCurve);
        assert_eq!(cfg.sha256().len(), 64);
        assert_eq!(cfg.sha256(), cfg.sha256());
    }

    #[test]
    fn rejects_undersized_trials() {
        let mut v = base_json();
        v["trials"] = serde_json::json!(0);
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
        v["trials"] = serde_json::json!(99);
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn rejects_bad_grid_and_delta() {
        let mut v = base_json();
        v["grid"]["alpha"] = serde_json::json!([]);
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());

        let mut v = base_json();
        v["delta"] = serde_json::json!(0.5);
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());

        let mut v = base_json();
        v["grid"]["epsilon"] = serde_json::json!([1.5]);
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }
}
