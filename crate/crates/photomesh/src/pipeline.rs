//! End-to-end runs on one chip and seeded ensembles of chips.

use photomesh_core::calibration::{calibrate_circuit, calibrate_full_mesh, CalibrationRecord};
use photomesh_core::compiler::{CircuitId, CircuitSpec};
use photomesh_core::emu::EmulatedChip;
use photomesh_core::mesh::perturb;
use photomesh_core::metrology::{measure_circuit, CircuitReport};
use photomesh_core::{power_to_db, MeshState, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::files::MeshFile;

/// Samples a fabricated chip. Deterministic in `seed`.
pub fn sample_chip(cfg: &RunConfig, seed: u64) -> Result<MeshFile> {
    let base = MeshState::ideal(cfg.topology());
    let mesh = perturb(&base, &cfg.noise, seed)?;
    Ok(MeshFile {
        seed,
        noise: cfg.noise,
        mesh,
    })
}

/// Transmission of each input through the all-bar mesh, in dB. Collection
/// gains are excluded: this is on-chip loss only.
pub fn path_losses_db(mesh: &MeshState) -> Vec<f64> {
    let mut st = mesh.clone();
    st.set_all_bar();
    let u = st.transfer();
    (0..u.cols())
        .map(|j| power_to_db((0..u.rows()).map(|k| u[(k, j)].norm_sqr()).sum()))
        .collect()
}

/// Full-mesh calibration followed by every circuit in `circuits`. Circuit
/// errors are returned per circuit; the record keeps whatever succeeded.
pub fn calibrate_all(
    chip: &mut EmulatedChip,
    cfg: &RunConfig,
    circuits: &[(CircuitId, CircuitSpec)],
    chip_id: u64,
) -> (CalibrationRecord, Vec<(CircuitId, photomesh_core::Error)>) {
    let mut record = calibrate_full_mesh(chip, &cfg.calibration);
    record.metadata.chip_id = chip_id;
    record.metadata.timestamp_unix = cfg.timestamp_unix;
    let mut errors = Vec::new();
    for (id, spec) in circuits {
        if let Err(e) = calibrate_circuit(chip, spec, &mut record, &cfg.calibration) {
            log::warn!("circuit {id}: {e}");
            errors.push((*id, e));
        }
    }
    (record, errors)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkFidelity {
    pub circuit: CircuitId,
    pub pair: (usize, usize),
    pub f_plus: f64,
    pub f_minus: f64,
}

/// Outcome of calibrating and measuring one sampled chip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChipSummary {
    pub seed: u64,
    pub path_loss_db: Vec<f64>,
    pub calibration_failures: usize,
    pub links: Vec<LinkFidelity>,
    pub unitary_fidelities: Vec<(CircuitId, f64)>,
    /// Circuits that could not be calibrated or measured.
    pub errors: Vec<(CircuitId, String)>,
}

impl ChipSummary {
    pub fn fidelities(&self) -> impl Iterator<Item = f64> + '_ {
        self.links.iter().flat_map(|l| [l.f_plus, l.f_minus])
    }

    pub fn min_fidelity(&self) -> Option<f64> {
        self.fidelities().min_by(f64::total_cmp)
    }

    pub fn is_complete(&self) -> bool {
        self.errors.is_empty() && self.calibration_failures == 0
    }
}

/// Samples, calibrates and measures `ids` on the chip of `seed`.
pub fn run_chip(cfg: &RunConfig, seed: u64, ids: &[CircuitId]) -> Result<ChipSummary> {
    let topology = cfg.topology();
    let circuits = cfg
        .circuits(&topology)
        .map_err(|e| photomesh_core::Error::InvalidParameter(e.to_string()))?;
    let circuits: Vec<_> = circuits
        .into_iter()
        .filter(|(id, _)| ids.contains(id))
        .collect();
    let file = sample_chip(cfg, seed)?;
    let path_loss_db = path_losses_db(&file.mesh);
    let mut chip = EmulatedChip::new(file.mesh, &cfg.emu(seed))?;
    let (record, cal_errors) = calibrate_all(&mut chip, cfg, &circuits, seed);
    let mut summary = ChipSummary {
        seed,
        path_loss_db,
        calibration_failures: record.failures.len(),
        links: Vec::new(),
        unitary_fidelities: Vec::new(),
        errors: cal_errors
            .iter()
            .map(|(id, e)| (*id, e.to_string()))
            .collect(),
    };
    for (id, spec) in &circuits {
        if cal_errors.iter().any(|(c, _)| c == id) {
            continue;
        }
        match measure_circuit(&mut chip, &record, spec, &cfg.sweep) {
            Ok(report) => summary.absorb(*id, &report),
            Err(e) => summary.errors.push((*id, e.to_string())),
        }
    }
    Ok(summary)
}

impl ChipSummary {
    fn absorb(&mut self, id: CircuitId, report: &CircuitReport) {
        for l in &report.links {
            self.links.push(LinkFidelity {
                circuit: id,
                pair: l.pair,
                f_plus: l.f_plus,
                f_minus: l.f_minus,
            });
        }
        if let Some(f) = report.unitary.fidelity {
            self.unitary_fidelities.push((id, f));
        }
    }
}

/// [`run_chip`] for seeds `first..first + trials`, in parallel, ordered by seed.
pub fn montecarlo(
    cfg: &RunConfig,
    first: u64,
    trials: u64,
    ids: &[CircuitId],
) -> Result<Vec<ChipSummary>> {
    (first..first + trials)
        .into_par_iter()
        .map(|seed| run_chip(cfg, seed, ids))
        .collect()
}

/// Ensemble statistics over link fidelities and unitary fidelities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub chips: usize,
    pub complete_chips: usize,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    /// Lowest per-chip minimum link fidelity.
    pub worst_chip_min: f64,
    pub unitary_fidelity_p05: f64,
    pub unitary_fidelity_p50: f64,
    pub unitary_fidelity_p95: f64,
    pub unitary_fidelity_min: f64,
    pub unitary_fidelity_max: f64,
    pub path_loss_p25_db: f64,
    pub path_loss_p75_db: f64,
}

/// Nearest-rank percentile of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl EnsembleStats {
    pub fn from_summaries(chips: &[ChipSummary]) -> Self {
        let f: Vec<f64> = chips.iter().flat_map(|c| c.fidelities()).collect();
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        let var = f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / f.len() as f64;
        let mut fu: Vec<f64> = chips
            .iter()
            .flat_map(|c| c.unitary_fidelities.iter().map(|u| u.1))
            .collect();
        fu.sort_by(f64::total_cmp);
        let mut loss: Vec<f64> = chips
            .iter()
            .flat_map(|c| c.path_loss_db.iter().copied())
            .collect();
        loss.sort_by(f64::total_cmp);
        Self {
            chips: chips.len(),
            complete_chips: chips.iter().filter(|c| c.is_complete()).count(),
            mean_fidelity: mean,
            std_fidelity: var.sqrt(),
            worst_chip_min: chips
                .iter()
                .filter_map(ChipSummary::min_fidelity)
                .fold(f64::INFINITY, f64::min),
            unitary_fidelity_p05: percentile(&fu, 5.0),
            unitary_fidelity_p50: percentile(&fu, 50.0),
            unitary_fidelity_p95: percentile(&fu, 95.0),
            unitary_fidelity_min: fu.first().copied().unwrap_or(f64::NAN),
            unitary_fidelity_max: fu.last().copied().unwrap_or(f64::NAN),
            path_loss_p25_db: percentile(&loss, 25.0),
            path_loss_p75_db: percentile(&loss, 75.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_nearest_rank() {
        let d = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&d, 25.0), 1.0);
        assert_eq!(percentile(&d, 50.0), 2.0);
        assert_eq!(percentile(&d, 100.0), 4.0);
        assert_eq!(percentile(&d, 0.0), 1.0);
    }

    #[test]
    fn ideal_chip_is_perfect() {
        let s = run_chip(&RunConfig::ideal(), 0, &CircuitId::MAIN).unwrap();
        assert!(s.is_complete(), "{s:?}");
        assert_eq!(s.links.len(), 16);
        let bad: Vec<_> = s
            .links
            .iter()
            .filter(|l| (l.f_plus.min(l.f_minus) - 1.0).abs() > 1e-9)
            .collect();
        assert!(bad.is_empty(), "{bad:?}");
        assert!(s
            .unitary_fidelities
            .iter()
            .all(|u| (u.1 - 1.0).abs() < 1e-9));
    }

    #[test]
    fn ensemble_is_seed_ordered_and_reproducible() {
        let cfg = RunConfig::default();
        let a = montecarlo(&cfg, 3, 3, &[CircuitId::C1]).unwrap();
        assert_eq!(a.iter().map(|c| c.seed).collect::<Vec<_>>(), [3, 4, 5]);
        assert_eq!(a, montecarlo(&cfg, 3, 3, &[CircuitId::C1]).unwrap());
    }
}
