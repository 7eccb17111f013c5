//! JSON plan files for `simulate --plan`.
//!
//! ```json
//! {
//!   "energy_fractions": [0.5, 0.5],
//!   "beta_schedule": [0.3, 0.1],
//!   "detector": { "kind": "on_off", "efficiency": 1.0, "dark_mean": 0.0 }
//! }
//! ```
//!
//! `energy_fractions` may be omitted for an even split. `detector.n_max`
//! optionally fixes the count truncation of a `pnr` detector.

use std::path::Path;

use coherent_rx::{ChannelPlan, DetectorKind, DetectorModel};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKindSpec {
    #[value(name = "onoff", alias = "on-off")]
    OnOff,
    Pnr,
}

impl From<DetectorKindSpec> for DetectorKind {
    fn from(k: DetectorKindSpec) -> Self {
        match k {
            DetectorKindSpec::OnOff => DetectorKind::OnOff,
            DetectorKindSpec::Pnr => DetectorKind::PhotonNumberResolving,
        }
    }
}

impl From<DetectorKind> for DetectorKindSpec {
    fn from(k: DetectorKind) -> Self {
        match k {
            DetectorKind::OnOff => DetectorKindSpec::OnOff,
            DetectorKind::PhotonNumberResolving => DetectorKindSpec::Pnr,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub kind: DetectorKindSpec,
    #[serde(default = "one")]
    pub efficiency: f64,
    #[serde(default)]
    pub dark_mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u64>,
}

impl DetectorSpec {
    pub fn to_model(&self) -> Result<DetectorModel, CliError> {
        let mut det = DetectorModel::ideal(self.kind.into())
            .with_efficiency(self.efficiency)
            .and_then(|d| d.with_dark_mean(self.dark_mean))
            .map_err(CliError::usage)?;
        if let Some(n) = self.n_max {
            det = det.with_n_max(n);
        }
        Ok(det)
    }

    pub fn from_model(det: &DetectorModel) -> Self {
        Self {
            kind: det.kind().into(),
            efficiency: det.efficiency(),
            dark_mean: det.dark_mean(),
            n_max: det.n_max_override(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_fractions: Option<Vec<f64>>,
    pub beta_schedule: Vec<f64>,
    pub detector: DetectorSpec,
}

impl PlanFile {
    pub fn to_plan(&self) -> Result<ChannelPlan, CliError> {
        let det = self.detector.to_model()?;
        let plan = match &self.energy_fractions {
            Some(f) => ChannelPlan::new(f.clone(), self.beta_schedule.clone(), det),
            None => ChannelPlan::homogeneous(self.beta_schedule.clone(), det),
        };
        plan.map_err(|e| CliError::Usage(format!("invalid plan: {e}")))
    }

    pub fn from_plan(plan: &ChannelPlan) -> Self {
        Self {
            energy_fractions: Some(plan.energy_fractions().to_vec()),
            beta_schedule: plan.beta_schedule().to_vec(),
            detector: DetectorSpec::from_model(plan.detector()),
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read plan {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("malformed plan {}: {e}", path.display())))
    }
}
