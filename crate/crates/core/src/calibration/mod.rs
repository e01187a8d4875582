//! Calibration of an emulated chip through optical readings only.
//!
//! Everything here talks to [`EmulatedChip`] through voltages and detector
//! readings; the hidden phase offsets are never consulted.

mod isolation;
mod record;

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use isolation::{
    isolation_sequence, isolation_sequence_within, IsolationPath, PathKind, PathState, PathStep,
};
pub use record::{
    CalibrationFailure, CalibrationMetadata, CalibrationRecord, GroupCalibration,
    HadamardCalibration, NodeCalibration,
};

use crate::compiler::{CircuitSpec, CorrectedGroup};
use crate::emu::{channel_of, ChannelKind, EmulatedChip};
use crate::mesh::{basis_input, NodeAddr};
use crate::optimize::{golden_section_min, grid_then_golden_min, nelder_mead, NelderMeadOptions};
use crate::{power_to_db, Error, Result, V_MAX};
#[allow(unused_imports)]
use num_traits::Float;

/// Double-MZI leakage (130 dB) below which the simplex stops early.
pub const CROSS_TARGET_LEAKAGE: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub coarse_points: usize,
    /// Minimum max/min monitor ratio over a sweep before isolation is considered broken.
    pub min_contrast_db: f64,
    /// Golden-section bracket width at termination, volts.
    pub golden_tol_v: f64,
    pub nelder_mead: NelderMeadOptions,
    /// Grid points for locating sign changes of the Hadamard ratio difference.
    pub hadamard_scan_points: usize,
    pub bisection_tol_v: f64,
    /// Readings averaged per Hadamard ratio.
    pub hadamard_averages: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            coarse_points: 201,
            min_contrast_db: 3.0,
            golden_tol_v: 1e-5,
            nelder_mead: NelderMeadOptions {
                diameter_tol: 1e-5,
                value_target: Some(CROSS_TARGET_LEAKAGE),
                ..NelderMeadOptions::default()
            },
            hadamard_scan_points: 101,
            bisection_tol_v: 1e-4,
            hadamard_averages: 8,
        }
    }
}

/// Result of calibrating one MZI.
#[derive(Clone, Debug, PartialEq)]
pub struct MziCalibration {
    pub bar_v: f64,
    pub cross_v: f64,
    pub bar_extinction_db: f64,
    pub cross_extinction_db: f64,
    pub monitor_ratio: f64,
    pub evaluations: usize,
}

fn program_path(
    chip: &mut EmulatedChip,
    path: &IsolationPath,
    record: &CalibrationRecord,
) -> Result<()> {
    for s in &path.steps {
        let cal = record
            .node(s.node)
            .ok_or(Error::PathNotCalibrated(s.node))?;
        let v = match s.state {
            PathState::Bar => cal.bar_v,
            PathState::Cross => cal.cross_v,
        };
        let ch = channel_of(chip.topology(), s.node, ChannelKind::Internal)?;
        chip.set_channel(ch, v)?;
    }
    Ok(())
}

/// A path to `node` from `input` through calibrated nodes only.
fn calibrated_path(
    chip: &EmulatedChip,
    node: NodeAddr,
    input: usize,
    record: &CalibrationRecord,
) -> Result<IsolationPath> {
    let topo = chip.topology();
    let within = |kind| {
        isolation_sequence_within(input, node, topo, kind, &|n| {
            n == node || record.is_calibrated(n)
        })
    };
    within(PathKind::Diagonal)
        .or_else(|_| within(PathKind::AllBar))
        .map_err(
            |e| match isolation_sequence(input, node, topo, PathKind::Diagonal) {
                Ok(p) => p
                    .steps
                    .iter()
                    .find(|s| !record.is_calibrated(s.node))
                    .map_or(e, |s| Error::PathNotCalibrated(s.node)),
                Err(e) => e,
            },
        )
}

/// Finds bar and cross voltages of `node` with light from `input_port`,
/// routing through nodes already in `record`.
pub fn calibrate_mzi(
    chip: &mut EmulatedChip,
    node: NodeAddr,
    input_port: usize,
    record: &CalibrationRecord,
    opts: &CalibrationOptions,
) -> Result<MziCalibration> {
    let path = calibrated_path(chip, node, input_port, record)?;
    program_path(chip, &path, record)?;
    let topo = chip.topology().clone();
    let k = topo.index_of(node).ok_or(Error::UnknownNode(node))?;
    let arm = path.target_arm(&topo);
    let ch = channel_of(&topo, node, ChannelKind::Internal)?;
    let inputs = basis_input(topo.n_modes(), input_port);
    let mut evals = 0usize;
    let mut read = |chip: &mut EmulatedChip, v: f64| -> Result<[f64; 2]> {
        chip.set_channel(ch, v.clamp(-V_MAX, V_MAX))?;
        evals += 1;
        Ok(chip.read_detectors(&inputs)?.monitors[k])
    };

    let n = opts.coarse_points.max(2);
    let step = 2.0 * V_MAX / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| -V_MAX + step * i as f64).collect();
    let mut samples = Vec::with_capacity(n);
    for &v in &grid {
        samples.push(read(chip, v)?);
    }
    let contrast = |idx: usize| {
        let hi = samples
            .iter()
            .map(|s| s[idx])
            .fold(f64::NEG_INFINITY, f64::max);
        let lo = samples.iter().map(|s| s[idx]).fold(f64::INFINITY, f64::min);
        if hi <= 0.0 {
            0.0
        } else if lo <= 0.0 {
            f64::INFINITY
        } else {
            power_to_db(hi / lo)
        }
    };
    let contrast_db = contrast(0).min(contrast(1));
    if !(contrast_db >= opts.min_contrast_db) {
        return Err(Error::InsufficientContrast { node, contrast_db });
    }
    // The dark/bright ratio has a sharp null that multiplicative detector
    // noise cannot move, and monitor gains only rescale it.
    let dark_ratio = |m: [f64; 2], bright: usize| m[1 - bright] / m[bright].max(f64::MIN_POSITIVE);
    let argmin = |bright: usize| {
        (0..n)
            .min_by(|&a, &b| {
                dark_ratio(samples[a], bright).total_cmp(&dark_ratio(samples[b], bright))
            })
            .expect("non-empty grid")
    };
    let (bar_i, cross_i) = (argmin(arm), argmin(1 - arm));

    let mut refine = |chip: &mut EmulatedChip, center: f64, bright: usize| -> Result<f64> {
        let lo = (center - step).max(-V_MAX);
        let hi = (center + step).min(V_MAX);
        let mut failure = None;
        let (v, _, _) = golden_section_min(
            |v| match read(chip, v) {
                Ok(m) => dark_ratio(m, bright),
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            },
            lo,
            hi,
            opts.golden_tol_v,
        );
        failure.map_or(Ok(v), Err)
    };
    let bar_v = refine(chip, grid[bar_i], arm)?;
    let cross_v = refine(chip, grid[cross_i], 1 - arm)?;

    let at_bar = read(chip, bar_v)?;
    let at_cross = read(chip, cross_v)?;
    let (g_bar, g_cross) = (at_bar[arm], at_cross[1 - arm]);
    let ext = |reference: f64, leak: f64| {
        if leak <= 0.0 {
            f64::INFINITY
        } else {
            power_to_db(reference / leak)
        }
    };
    let bar_extinction_db = ext(g_cross, at_bar[1 - arm]);
    let cross_extinction_db = ext(g_bar, at_cross[arm]);
    let monitor_ratio = if arm == 0 {
        g_bar / g_cross
    } else {
        g_cross / g_bar
    };
    chip.set_channel(ch, bar_v)?;
    Ok(MziCalibration {
        bar_v,
        cross_v,
        bar_extinction_db,
        cross_extinction_db,
        monitor_ratio,
        evaluations: evals,
    })
}

/// Calibrates every node, cycling through inputs in ascending order and
/// nodes in light order, repeating until no further node can be reached.
/// Per-node failures are recorded, not fatal.
pub fn calibrate_full_mesh(
    chip: &mut EmulatedChip,
    opts: &CalibrationOptions,
) -> CalibrationRecord {
    let topo = chip.topology().clone();
    let mut record = CalibrationRecord::new(topo.n_modes());
    let order: Vec<NodeAddr> = topo
        .light_order()
        .into_iter()
        .flat_map(|col| {
            (0..topo.rows_in_column(col)).map(move |row| NodeAddr::new(col as u8, row as u8))
        })
        .collect();
    let mut failed: Vec<NodeAddr> = Vec::new();
    loop {
        let mut progress = false;
        for input in 0..topo.n_modes() {
            for &node in &order {
                if record.is_calibrated(node) || failed.contains(&node) {
                    continue;
                }
                match calibrate_mzi(chip, node, input, &record, opts) {
                    Ok(c) => {
                        record.upsert_node(NodeCalibration {
                            node,
                            input_port: input,
                            bar_v: c.bar_v,
                            cross_v: c.cross_v,
                            bar_extinction_db: c.bar_extinction_db,
                            cross_extinction_db: c.cross_extinction_db,
                            monitor_ratio: c.monitor_ratio,
                        });
                        progress = true;
                    }
                    Err(Error::UnreachableTarget { .. } | Error::PathNotCalibrated(_)) => {}
                    Err(e) => {
                        log::warn!("calibration of {node} failed: {e}");
                        record.failures.push(CalibrationFailure {
                            node,
                            reason: e.to_string(),
                        });
                        failed.push(node);
                        progress = true;
                    }
                }
            }
        }
        if !progress {
            break;
        }
    }
    for &node in &order {
        if !record.is_calibrated(node) && !failed.contains(&node) {
            record.failures.push(CalibrationFailure {
                node,
                reason: "unreachable through calibrated nodes".to_string(),
            });
        }
    }
    record.sort(&topo);
    record
}

/// Tunes a double-MZI crossing: nominal splits, then a sweep of the
/// recombiner's external phase, then a simplex over all three voltages.
pub fn calibrate_corrected_cross(
    chip: &mut EmulatedChip,
    group: &CorrectedGroup,
    record: &CalibrationRecord,
    opts: &CalibrationOptions,
) -> Result<GroupCalibration> {
    let topo = chip.topology().clone();
    let need = |n: NodeAddr| record.node(n).cloned().ok_or(Error::PathNotCalibrated(n));
    let (left, right) = (need(group.left)?, need(group.right)?);
    for &m in &group.intermediates {
        let cal = need(m)?;
        chip.set_channel(channel_of(&topo, m, ChannelKind::Internal)?, cal.bar_v)?;
    }
    // Bar states are exact for matched couplers while crosses leak, so the
    // path with the fewest crosses keeps stray light out of the objective.
    let path = (0..topo.n_modes())
        .flat_map(|input| {
            [PathKind::AllBar, PathKind::Diagonal].map(|kind| {
                isolation_sequence_within(input, group.left, &topo, kind, &|n| {
                    n == group.left || record.is_calibrated(n)
                })
            })
        })
        .filter_map(Result::ok)
        .min_by_key(|p| {
            p.steps
                .iter()
                .filter(|s| s.state == PathState::Cross)
                .count()
        })
        .ok_or(Error::UnreachableTarget {
            input: 0,
            target: group.left,
        })?;
    program_path(chip, &path, record)?;
    let arm = path.target_arm(&topo);
    let inputs = basis_input(topo.n_modes(), path.input);
    let kr = topo
        .index_of(group.right)
        .ok_or(Error::UnknownNode(group.right))?;
    let ch_l = channel_of(&topo, group.left, ChannelKind::Internal)?;
    let ch_r = channel_of(&topo, group.right, ChannelKind::Internal)?;
    let ch_phi = channel_of(&topo, group.right, ChannelKind::External)?;
    let ratio = right.monitor_ratio;

    let mut failure: Option<Error> = None;
    // Fraction of light left on the entry port after the group, gain-corrected.
    let mut leakage = |chip: &mut EmulatedChip, v: [f64; 3]| -> f64 {
        let outside: f64 = v.iter().map(|x| (x.abs() - V_MAX).max(0.0)).sum();
        let c = v.map(|x| x.clamp(-V_MAX, V_MAX));
        let res = chip
            .set_channel(ch_l, c[0])
            .and_then(|_| chip.set_channel(ch_r, c[1]))
            .and_then(|_| chip.set_channel(ch_phi, c[2]))
            .and_then(|_| chip.read_detectors(&inputs));
        match res {
            Ok(r) => {
                let m = r.monitors[kr];
                let x = [m[0] / ratio, m[1]];
                let total = x[0] + x[1];
                let f = if total > 0.0 { x[arm] / total } else { 1.0 };
                f + outside
            }
            Err(e) => {
                failure = Some(e);
                1.0
            }
        }
    };

    let (vl, vr) = (left.nominal_split_v(), right.nominal_split_v());
    let (phi2, f2, _) = grid_then_golden_min(
        |p| leakage(chip, [vl, vr, p]),
        -V_MAX,
        V_MAX,
        opts.coarse_points.max(2),
        opts.golden_tol_v,
    );
    let nm = nelder_mead(
        |x| leakage(chip, [x[0], x[1], x[2]]),
        &[vl, vr, phi2],
        &opts.nelder_mead,
    );
    let improved = nm.value < f2;
    if !improved {
        log::info!(
            "simplex did not improve double-MZI {}→{}",
            group.left,
            group.right
        );
    }
    let best = if improved {
        [nm.x[0], nm.x[1], nm.x[2]]
    } else {
        [vl, vr, phi2]
    };
    let best = best.map(|x| x.clamp(-V_MAX, V_MAX));
    let final_leak = leakage(chip, best);
    if let Some(e) = failure {
        return Err(e);
    }
    let db = |f: f64| {
        if f > 0.0 {
            -power_to_db(f)
        } else {
            f64::INFINITY
        }
    };
    Ok(GroupCalibration {
        circuit: String::new(),
        left: group.left,
        intermediates: group.intermediates.clone(),
        right: group.right,
        entry_arm: arm,
        theta_l_v: best[0],
        theta_r_v: best[1],
        phi_r_v: best[2],
        extinction_db: db(final_leak),
        stage2_extinction_db: db(f2),
        evaluations: nm.evaluations,
        optimizer_improved: improved,
    })
}

/// Balances the Hadamard of routed pair `(i, j)` so both inputs split equally.
///
/// With one input lit at a time the ratio `I_n/I_m` reads `G·|a|²/|b|²` for
/// input `i` and `G·|b|²/|a|²` for input `j`, where `G` is the unknown
/// collection-gain ratio. Equal ratios therefore mean `|a| = |b|` whatever `G`
/// is. The root nearest the nominal split is refined by bisection.
pub fn calibrate_hadamard(
    chip: &mut EmulatedChip,
    spec: &CircuitSpec,
    pair: (usize, usize),
    record: &mut CalibrationRecord,
    opts: &CalibrationOptions,
) -> Result<f64> {
    let topo = chip.topology().clone();
    let routed = spec
        .pair_for_inputs(pair.0, pair.1)
        .ok_or(Error::InvalidPair(pair.0, pair.1))?
        .clone();
    let (i, j) = routed.inputs;
    let (n_out, m_out) = routed.outputs;
    let h = routed.hadamard;
    let frame = record.frame_for_circuit(spec, &topo)?;
    chip.apply_frame(&frame)?;
    let ch = channel_of(&topo, h, ChannelKind::Internal)?;
    let nominal = record
        .node(h)
        .ok_or(Error::PathNotCalibrated(h))?
        .nominal_split_v();
    let (in_i, in_j) = (
        basis_input(topo.n_modes(), i),
        basis_input(topo.n_modes(), j),
    );
    let avg = opts.hadamard_averages.max(1);

    let d = |chip: &mut EmulatedChip, v: f64| -> Result<f64> {
        chip.set_channel(ch, v)?;
        let mut ratio = |inputs: &[crate::C64]| -> Result<f64> {
            let (mut a, mut b) = (0.0, 0.0);
            for _ in 0..avg {
                let r = chip.read_detectors(inputs)?;
                a += r.outputs[n_out];
                b += r.outputs[m_out];
            }
            Ok(a.max(1e-300) / b.max(1e-300))
        };
        let ri = ratio(&in_i)?;
        let rj = ratio(&in_j)?;
        Ok(ri.ln() - rj.ln())
    };

    let pts = opts.hadamard_scan_points.max(3);
    let step = 2.0 * V_MAX / (pts - 1) as f64;
    let mut prev = (-V_MAX, d(chip, -V_MAX)?);
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for k in 1..pts {
        let v = -V_MAX + step * k as f64;
        let dv = d(chip, v)?;
        if prev.1.signum() != dv.signum() || dv == 0.0 {
            let mid = 0.5 * (prev.0 + v);
            if best.is_none_or(|b| (mid - nominal).abs() < (0.5 * (b.0 + b.2) - nominal).abs()) {
                best = Some((prev.0, prev.1, v, dv));
            }
        }
        prev = (v, dv);
    }
    let (mut lo, mut dlo, mut hi, _) = best.ok_or(Error::NoSignChange(h))?;
    while hi - lo > opts.bisection_tol_v {
        let mid = 0.5 * (lo + hi);
        let dm = d(chip, mid)?;
        if dm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if dm.signum() == dlo.signum() {
            lo = mid;
            dlo = dm;
        } else {
            hi = mid;
        }
    }
    let split = 0.5 * (lo + hi);
    chip.set_channel(ch, split)?;
    record.upsert_hadamard(HadamardCalibration {
        circuit: spec.name.clone(),
        node: h,
        inputs: (i, j),
        split_v: split,
    });
    Ok(split)
}

/// Calibrated settings of one circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitCalibration {
    pub groups: Vec<GroupCalibration>,
    pub splits: Vec<(NodeAddr, f64)>,
}

/// Calibrates a circuit's double-MZI groups, then the Hadamard of each pair.
pub fn calibrate_circuit(
    chip: &mut EmulatedChip,
    spec: &CircuitSpec,
    record: &mut CalibrationRecord,
    opts: &CalibrationOptions,
) -> Result<CircuitCalibration> {
    let mut groups = vec![];
    for group in &spec.groups {
        let gc = calibrate_corrected_cross(chip, group, record, opts)?;
        record.upsert_group(&spec.name, gc.clone());
        groups.push(gc);
    }
    let mut splits = vec![];
    for pair in &spec.pairs {
        let v = calibrate_hadamard(chip, spec, pair.inputs, record, opts)?;
        splits.push((pair.hadamard, v));
    }
    record.sort(chip.topology());
    Ok(CircuitCalibration { groups, splits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{build_circuit, group_bar_leakage, xor_matching, GateRole};
    use crate::emu::{DetectorModel, EmuConfig, OffsetModel};
    use crate::mesh::{MeshState, MeshTopology};

    fn chip(cfg: EmuConfig, mesh: MeshState) -> EmulatedChip {
        EmulatedChip::new(mesh, &cfg).unwrap()
    }

    #[test]
    fn zero_offsets_give_convention_voltages() {
        let mut c = chip(
            EmuConfig::ideal(0),
            MeshState::ideal(MeshTopology::reversed(8)),
        );
        let rec = calibrate_full_mesh(&mut c, &CalibrationOptions::default());
        assert!(rec.failures.is_empty(), "{:?}", rec.failures);
        assert_eq!(rec.nodes.len(), 28);
        for n in &rec.nodes {
            assert!(n.cross_v.abs() < 0.05, "{n:?}");
            assert!((n.bar_v.abs() - 25.0).abs() < 0.05, "{n:?}");
        }
    }

    #[test]
    fn dead_monitor_is_isolated() {
        let mut mesh = MeshState::ideal(MeshTopology::reversed(8));
        let k = mesh.topology.index_of(NodeAddr::new(3, 1)).unwrap();
        mesh.monitor_gains[k] = [0.0, 0.0];
        let cfg = EmuConfig {
            offsets: OffsetModel::Uniform,
            ..EmuConfig::ideal(3)
        };
        let mut c = chip(cfg, mesh);
        let rec = calibrate_full_mesh(&mut c, &CalibrationOptions::default());
        assert_eq!(rec.failures.len(), 1, "{:?}", rec.failures);
        assert_eq!(rec.failures[0].node, NodeAddr::new(3, 1));
        assert_eq!(rec.nodes.len(), 27);
    }

    #[test]
    fn uncalibrated_circuit_lists_nodes() {
        let rec = CalibrationRecord::new(8);
        let t = MeshTopology::reversed(8);
        let spec = build_circuit("1", &[(0, 1)], &t).unwrap();
        assert!(
            matches!(rec.frame_for_circuit(&spec, &t), Err(Error::Uncalibrated(v)) if v.len() == 28)
        );
        assert!(spec.gates.iter().any(|g| g.role == GateRole::Hadamard));
    }

    fn matched_eta_mesh(eta: impl Fn(usize) -> f64) -> MeshState {
        let mut mesh = MeshState::ideal(MeshTopology::reversed(8));
        for (k, p) in mesh.params.iter_mut().enumerate() {
            p.c_in.eta = eta(k);
            p.c_out.eta = eta(k);
        }
        mesh
    }

    fn offsets(seed: u64) -> EmuConfig {
        EmuConfig {
            offsets: OffsetModel::Uniform,
            ..EmuConfig::ideal(seed)
        }
    }

    #[test]
    fn cross_extinction_sits_at_coupler_floor() {
        let mut c = chip(offsets(11), matched_eta_mesh(|_| 0.55));
        let rec = calibrate_full_mesh(&mut c, &CalibrationOptions::default());
        assert!(rec.failures.is_empty());
        let floor = -power_to_db(0.1f64.powi(2));
        let mut ext: Vec<f64> = rec.nodes.iter().map(|n| n.cross_extinction_db).collect();
        ext.sort_by(f64::total_cmp);
        assert!((ext[ext.len() / 2] - floor).abs() < 0.5, "{ext:?}");
        // Bar states are exact for matched couplers; what remains is stray
        // light leaking from upstream crosses.
        let mut bar: Vec<f64> = rec.nodes.iter().map(|n| n.bar_extinction_db).collect();
        bar.sort_by(f64::total_cmp);
        assert!(bar[bar.len() / 2] > 30.0, "{bar:?}");
    }

    #[test]
    fn noisy_detectors_recover_noiseless_voltages() {
        let mesh = matched_eta_mesh(|k| 0.47 + 0.002 * k as f64);
        let mut c = chip(offsets(5), mesh);
        let opts = CalibrationOptions::default();
        let clean = calibrate_full_mesh(&mut c, &opts);
        c.set_detector(DetectorModel {
            relative_noise_sigma: 0.01,
            ..DetectorModel::default()
        })
        .unwrap();
        for seed in 0..50 {
            c.reseed_detectors(seed);
            let noisy = calibrate_full_mesh(&mut c, &opts);
            assert_eq!(noisy.nodes.len(), 28);
            for (a, b) in clean.nodes.iter().zip(&noisy.nodes) {
                assert!(
                    (a.bar_v - b.bar_v).abs() < 0.2 && (a.cross_v - b.cross_v).abs() < 0.2,
                    "{a:?} {b:?}"
                );
            }
        }
    }

    #[test]
    fn recalibration_with_new_offsets_is_optically_equivalent() {
        let mesh = matched_eta_mesh(|k| 0.48 + 0.0015 * k as f64);
        let opts = CalibrationOptions::default();
        let spec = build_circuit("1", &xor_matching(8, 1), &mesh.topology).unwrap();
        let mut powers = vec![];
        for seed in [1, 2] {
            let mut c = chip(offsets(seed), mesh.clone());
            let rec = calibrate_full_mesh(&mut c, &opts);
            assert!(rec.failures.is_empty());
            c.apply_frame(&rec.frame_for_circuit(&spec, c.topology()).unwrap())
                .unwrap();
            // Per Hadamard pair totals: external phases are uncalibrated, so
            // only interference-free quantities are comparable.
            let mut p = vec![];
            for i in 0..8 {
                let out = c.read_detectors(&basis_input(8, i)).unwrap().outputs;
                p.extend(
                    spec.pairs
                        .iter()
                        .map(|q| out[q.outputs.0] + out[q.outputs.1]),
                );
            }
            powers.push((rec, p));
        }
        let (ra, pa) = &powers[0];
        let (rb, pb) = &powers[1];
        assert_ne!(ra.nodes[0].bar_v, rb.nodes[0].bar_v);
        for (x, y) in pa.iter().zip(pb) {
            assert!((x - y).abs() < 5e-3, "{x} {y}");
        }
    }

    #[test]
    fn double_mzi_beats_single_floor() {
        let mut c = chip(offsets(7), matched_eta_mesh(|_| 0.55));
        let opts = CalibrationOptions::default();
        let mut rec = calibrate_full_mesh(&mut c, &opts);
        let spec = build_circuit("2", &xor_matching(8, 3), c.topology()).unwrap();
        assert!(!spec.groups.is_empty());
        for group in &spec.groups {
            let g = calibrate_corrected_cross(&mut c, group, &rec, &opts).unwrap();
            assert!(
                g.extinction_db > 60.0 && g.extinction_db >= g.stage2_extinction_db,
                "{g:?}"
            );
            let truth = group_bar_leakage(c.effective_state(), group, g.entry_arm).unwrap();
            assert!(truth < 1e-10, "{truth}");
            rec.upsert_group(&spec.name, g);
        }
        assert!(rec.frame_for_circuit(&spec, c.topology()).is_ok());
    }

    #[test]
    fn perfect_components_converge_quickly() {
        let mut c = chip(
            EmuConfig::ideal(0),
            MeshState::ideal(MeshTopology::reversed(8)),
        );
        let opts = CalibrationOptions::default();
        let rec = calibrate_full_mesh(&mut c, &opts);
        let spec = build_circuit("2", &xor_matching(8, 3), c.topology()).unwrap();
        for group in &spec.groups {
            let g = calibrate_corrected_cross(&mut c, group, &rec, &opts).unwrap();
            assert!(g.evaluations <= 50, "{g:?}");
        }
    }

    fn hadamard_split(
        c: &EmulatedChip,
        spec: &CircuitSpec,
        pair: &crate::compiler::RoutedPair,
    ) -> f64 {
        // True fraction of input i landing on output n, among (n, m).
        let u = c.effective_state().transfer();
        let (i, _) = pair.inputs;
        let (n, m) = pair.outputs;
        let (a, b) = (u[(n, i)].norm_sqr(), u[(m, i)].norm_sqr());
        let _ = spec;
        a / (a + b)
    }

    #[test]
    fn hadamard_balances_despite_collection_gains() {
        let mut mesh = matched_eta_mesh(|k| 0.48 + 0.001 * k as f64);
        let spec = build_circuit("1", &xor_matching(8, 1), &mesh.topology).unwrap();
        let pair = spec.pairs[0].clone();
        mesh.collection_gains[pair.outputs.0] = 1.0;
        mesh.collection_gains[pair.outputs.1] = 0.5;
        let mut c = chip(offsets(3), mesh);
        let opts = CalibrationOptions::default();
        let mut rec = calibrate_full_mesh(&mut c, &opts);
        calibrate_hadamard(&mut c, &spec, pair.inputs, &mut rec, &opts).unwrap();
        assert!(rec.hadamard(&spec.name, pair.hadamard).is_some());
        assert!((hadamard_split(&c, &spec, &pair) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn hadamard_splits_are_kept_per_circuit() {
        use crate::mesh::{perturb, NoiseSpec};
        let mesh = perturb(
            &MeshState::ideal(MeshTopology::reversed(8)),
            &NoiseSpec::typical(),
            93,
        )
        .unwrap();
        let mut c = chip(offsets(93), mesh);
        let opts = CalibrationOptions::default();
        let mut rec = calibrate_full_mesh(&mut c, &opts);
        let a = build_circuit("2", &xor_matching(8, 3), c.topology()).unwrap();
        let b = build_circuit("3", &xor_matching(8, 4), c.topology()).unwrap();
        calibrate_circuit(&mut c, &a, &mut rec, &opts).unwrap();
        let before = rec.frame_for_circuit(&a, c.topology()).unwrap();
        calibrate_circuit(&mut c, &b, &mut rec, &opts).unwrap();
        assert_eq!(rec.frame_for_circuit(&a, c.topology()).unwrap(), before);
        assert_eq!(rec.hadamards.len(), 8);
    }

    #[test]
    fn noisy_hadamard_within_one_percent() {
        let mut mesh = MeshState::ideal(MeshTopology::reversed(8));
        let spec = build_circuit("1", &xor_matching(8, 1), &mesh.topology).unwrap();
        let pair = spec.pairs[1].clone();
        mesh.collection_gains[pair.outputs.1] = 0.7;
        let mut c = chip(offsets(9), mesh);
        let opts = CalibrationOptions::default();
        let rec = calibrate_full_mesh(&mut c, &opts);
        c.set_detector(DetectorModel {
            relative_noise_sigma: 0.01,
            ..DetectorModel::default()
        })
        .unwrap();
        for seed in 0..50 {
            c.reseed_detectors(seed);
            let mut r = rec.clone();
            calibrate_hadamard(&mut c, &spec, pair.inputs, &mut r, &opts).unwrap();
            let split = hadamard_split(&c, &spec, &pair);
            assert!((split - 0.5).abs() < 0.005, "seed {seed}: {split}");
        }
    }

    #[test]
    fn hadamard_without_root_is_flagged() {
        let mut mesh = MeshState::ideal(MeshTopology::reversed(8));
        let spec = build_circuit("1", &xor_matching(8, 1), &mesh.topology).unwrap();
        let pair = spec.pairs[0].clone();
        // Couplers this far off cannot reach a balanced split.
        let h = mesh.params_mut(pair.hadamard).unwrap();
        h.c_in.eta = 0.9;
        h.c_out.eta = 0.9;
        let mut c = chip(EmuConfig::ideal(0), mesh);
        let opts = CalibrationOptions {
            min_contrast_db: 1.0,
            ..CalibrationOptions::default()
        };
        let mut rec = calibrate_full_mesh(&mut c, &opts);
        assert!(rec.failures.is_empty());
        assert_eq!(
            calibrate_hadamard(&mut c, &spec, pair.inputs, &mut rec, &opts),
            Err(Error::NoSignChange(pair.hadamard))
        );
    }
}
