//! Run configuration. Every field is optional in the JSON file; missing
//! fields take the typical-chip defaults.

use std::path::Path;

use photomesh_core::calibration::CalibrationOptions;
use photomesh_core::compiler::{ohqe_circuits_with, CircuitId, CircuitSpec};
use photomesh_core::emu::{ActuatorModel, DetectorModel, EmuConfig, OffsetModel, SweepSettings};
use photomesh_core::lattice::QubitId;
use photomesh_core::mesh::{MeshTopology, NoiseSpec};
use serde::{Deserialize, Serialize};

use crate::files::read_text;
use crate::CliError;

/// Replaces the default matching of one circuit. Pairs are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitOverride {
    pub id: String,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_modes: usize,
    pub noise: NoiseSpec,
    pub actuator: ActuatorModel,
    pub detector: DetectorModel,
    pub offsets: OffsetModel,
    pub calibration: CalibrationOptions,
    pub sweep: SweepSettings,
    pub circuits: Vec<CircuitOverride>,
    /// Stamped into calibration records; fixed so reruns are byte-identical.
    pub timestamp_unix: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_modes: 8,
            noise: NoiseSpec::typical(),
            actuator: ActuatorModel::default(),
            detector: DetectorModel::default(),
            offsets: OffsetModel::Uniform,
            calibration: CalibrationOptions::default(),
            sweep: SweepSettings::default(),
            circuits: Vec::new(),
            timestamp_unix: 0,
        }
    }
}

impl RunConfig {
    /// No fabrication variation, zero offsets, noiseless detectors.
    pub fn ideal() -> Self {
        Self {
            noise: NoiseSpec::none(),
            detector: DetectorModel::noiseless(),
            offsets: OffsetModel::Zero,
            ..Self::default()
        }
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = read_text(path)?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        cfg.validate()
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_modes < 2 || !self.n_modes.is_multiple_of(2) {
            return Err(format!(
                "n_modes must be even and ≥ 2, got {}",
                self.n_modes
            ));
        }
        self.noise.validate().map_err(|e| e.to_string())?;
        self.actuator.validate().map_err(|e| e.to_string())?;
        self.detector.validate().map_err(|e| e.to_string())?;
        for o in &self.circuits {
            o.id.parse::<CircuitId>().map_err(|e| e.to_string())?;
            if o.pairs.iter().any(|&(a, b)| a == 0 || b == 0) {
                return Err(format!("circuit {}: pairs are 1-based", o.id));
            }
        }
        Ok(())
    }

    pub fn emu(&self, seed: u64) -> EmuConfig {
        EmuConfig {
            actuator: self.actuator,
            detector: self.detector,
            offsets: self.offsets,
            seed,
        }
    }

    pub fn topology(&self) -> MeshTopology {
        MeshTopology::reversed(self.n_modes)
    }

    /// All nine circuits with overrides applied.
    pub fn circuits(
        &self,
        topology: &MeshTopology,
    ) -> Result<Vec<(CircuitId, CircuitSpec)>, CliError> {
        let overrides: Vec<(CircuitId, Vec<(usize, usize)>)> = self
            .circuits
            .iter()
            .map(|o| {
                Ok((
                    o.id.parse::<CircuitId>()?,
                    o.pairs.iter().map(|&(a, b)| (a - 1, b - 1)).collect(),
                ))
            })
            .collect::<photomesh_core::Result<_>>()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        ohqe_circuits_with(topology, &overrides).map_err(CliError::Domain)
    }

    pub fn circuit(&self, topology: &MeshTopology, id: CircuitId) -> Result<CircuitSpec, CliError> {
        Ok(self
            .circuits(topology)?
            .into_iter()
            .find(|(c, _)| *c == id)
            .expect("all ids present")
            .1)
    }
}

/// Cube cells on a grid, optional extra links and a Z-measurement selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    pub dims: [usize; 3],
    pub include_optional: bool,
    /// Join neighbouring cells face to face.
    pub grid_links: bool,
    pub links: Vec<(QubitId, QubitId)>,
    pub measure: Vec<QubitId>,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            dims: [1, 1, 1],
            include_optional: false,
            grid_links: true,
            links: Vec::new(),
            measure: Vec::new(),
        }
    }
}

impl LatticeConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = read_text(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}
