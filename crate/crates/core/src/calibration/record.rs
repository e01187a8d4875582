//! Persisted calibration results and circuit programming from them.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::compiler::{CircuitSpec, CorrectedGroup, GateRole};
use crate::emu::{channel_of, ChannelKind, VoltageFrame};
use crate::mesh::{MeshTopology, NodeAddr};
use crate::{Error, Result, V_MAX};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeCalibration {
    pub node: NodeAddr,
    /// Input port used to reach the node.
    pub input_port: usize,
    pub bar_v: f64,
    pub cross_v: f64,
    pub bar_extinction_db: f64,
    pub cross_extinction_db: f64,
    /// Estimated top/bottom monitor gain ratio.
    pub monitor_ratio: f64,
}

impl NodeCalibration {
    /// Halfway between bar and cross: a 50:50 split for a linear actuator.
    pub fn nominal_split_v(&self) -> f64 {
        (self.bar_v + self.cross_v) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupCalibration {
    /// Circuit the setting belongs to; empty for a standalone calibration.
    pub circuit: String,
    pub left: NodeAddr,
    pub intermediates: Vec<NodeAddr>,
    pub right: NodeAddr,
    /// Arm of `left` the calibration light entered: 0 top, 1 bottom.
    pub entry_arm: usize,
    pub theta_l_v: f64,
    pub theta_r_v: f64,
    pub phi_r_v: f64,
    /// Monitor-measured extinction of the returned setting.
    pub extinction_db: f64,
    /// Extinction after the one-dimensional external phase sweep alone.
    pub stage2_extinction_db: f64,
    /// Objective evaluations spent by the simplex stage.
    pub evaluations: usize,
    /// False when the simplex stage failed to beat the sweep result.
    pub optimizer_improved: bool,
}

impl GroupCalibration {
    pub fn matches(&self, group: &CorrectedGroup) -> bool {
        self.left == group.left
            && self.right == group.right
            && self.intermediates == group.intermediates
    }
}

/// Balanced split of a Hadamard node. The balance point depends on the loss
/// of both routed paths, so it belongs to one circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HadamardCalibration {
    pub circuit: String,
    pub node: NodeAddr,
    pub inputs: (usize, usize),
    pub split_v: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFailure {
    pub node: NodeAddr,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMetadata {
    /// Seed of the emulated chip, when known.
    pub chip_id: u64,
    /// Seconds since the Unix epoch. Callers supply it so records stay reproducible.
    pub timestamp_unix: u64,
    pub n_modes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub metadata: CalibrationMetadata,
    pub nodes: Vec<NodeCalibration>,
    pub groups: Vec<GroupCalibration>,
    pub hadamards: Vec<HadamardCalibration>,
    pub failures: Vec<CalibrationFailure>,
}

impl CalibrationRecord {
    pub fn new(n_modes: usize) -> Self {
        Self {
            metadata: CalibrationMetadata {
                chip_id: 0,
                timestamp_unix: 0,
                n_modes,
            },
            nodes: Vec::new(),
            groups: Vec::new(),
            hadamards: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn node(&self, node: NodeAddr) -> Option<&NodeCalibration> {
        self.nodes.iter().find(|n| n.node == node)
    }

    pub fn node_mut(&mut self, node: NodeAddr) -> Option<&mut NodeCalibration> {
        self.nodes.iter_mut().find(|n| n.node == node)
    }

    pub fn is_calibrated(&self, node: NodeAddr) -> bool {
        self.node(node).is_some()
    }

    pub fn upsert_node(&mut self, cal: NodeCalibration) {
        match self.node_mut(cal.node) {
            Some(existing) => *existing = cal,
            None => self.nodes.push(cal),
        }
    }

    pub fn group(&self, circuit: &str, group: &CorrectedGroup) -> Option<&GroupCalibration> {
        self.groups
            .iter()
            .find(|g| g.circuit == circuit && g.matches(group))
    }

    /// Stores `cal` under `circuit`, replacing that circuit's previous entry.
    pub fn upsert_group(&mut self, circuit: &str, mut cal: GroupCalibration) {
        cal.circuit = circuit.into();
        match self
            .groups
            .iter_mut()
            .find(|g| g.circuit == circuit && g.left == cal.left && g.right == cal.right)
        {
            Some(existing) => *existing = cal,
            None => self.groups.push(cal),
        }
    }

    pub fn hadamard(&self, circuit: &str, node: NodeAddr) -> Option<&HadamardCalibration> {
        self.hadamards
            .iter()
            .find(|h| h.circuit == circuit && h.node == node)
    }

    pub fn upsert_hadamard(&mut self, cal: HadamardCalibration) {
        match self
            .hadamards
            .iter_mut()
            .find(|h| h.circuit == cal.circuit && h.node == cal.node)
        {
            Some(existing) => *existing = cal,
            None => self.hadamards.push(cal),
        }
    }

    /// Puts nodes in topology order so serialized records are canonical.
    pub fn sort(&mut self, topology: &MeshTopology) {
        self.nodes.sort_by_key(|n| topology.index_of(n.node));
        self.groups.sort_by(|a, b| {
            a.circuit.cmp(&b.circuit).then_with(|| {
                (topology.index_of(a.left), topology.index_of(a.right))
                    .cmp(&(topology.index_of(b.left), topology.index_of(b.right)))
            })
        });
        self.hadamards.sort_by(|a, b| {
            a.circuit
                .cmp(&b.circuit)
                .then(topology.index_of(a.node).cmp(&topology.index_of(b.node)))
        });
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.node) {
                return Err(Error::invalid(alloc::format!(
                    "node {} calibrated twice",
                    n.node
                )));
            }
            for v in [n.bar_v, n.cross_v] {
                if !(v.abs() <= V_MAX) {
                    return Err(Error::invalid(alloc::format!(
                        "node {}: {v} V outside ±25 V",
                        n.node
                    )));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for h in &self.hadamards {
            if !seen.insert((h.circuit.as_str(), h.node)) {
                return Err(Error::invalid(alloc::format!(
                    "circuit {}: Hadamard {} calibrated twice",
                    h.circuit,
                    h.node
                )));
            }
            if !(h.split_v.abs() <= V_MAX) {
                return Err(Error::invalid(alloc::format!(
                    "Hadamard {}: {} V outside ±25 V",
                    h.node,
                    h.split_v
                )));
            }
        }
        for g in &self.groups {
            for v in [g.theta_l_v, g.theta_r_v, g.phi_r_v] {
                if !(v.abs() <= V_MAX) {
                    return Err(Error::invalid(alloc::format!(
                        "group {}: {v} V outside ±25 V",
                        g.left
                    )));
                }
            }
        }
        Ok(())
    }

    /// Voltages programming `spec`. Every node must be calibrated, and every
    /// double-MZI group must have a group entry.
    pub fn frame_for_circuit(
        &self,
        spec: &CircuitSpec,
        topology: &MeshTopology,
    ) -> Result<VoltageFrame> {
        let missing: Vec<NodeAddr> = topology
            .nodes()
            .iter()
            .copied()
            .filter(|&n| !self.is_calibrated(n))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Uncalibrated(missing));
        }
        let mut frame = VoltageFrame::zeros(2 * topology.node_count());
        for g in &spec.gates {
            let cal = self.node(g.node).expect("checked above");
            let v = match g.role {
                GateRole::Bar | GateRole::Unused | GateRole::CorrectedIntermediate => cal.bar_v,
                GateRole::CrossSingle => cal.cross_v,
                GateRole::Hadamard => self
                    .hadamard(&spec.name, g.node)
                    .map_or_else(|| cal.nominal_split_v(), |h| h.split_v),
                // Set from the group entry below.
                GateRole::CorrectedLeft | GateRole::CorrectedRight => cal.nominal_split_v(),
            };
            frame.volts[channel_of(topology, g.node, ChannelKind::Internal)?] = v;
        }
        let mut uncal = Vec::new();
        for group in &spec.groups {
            match self.group(&spec.name, group) {
                Some(gc) => {
                    frame.volts[channel_of(topology, group.left, ChannelKind::Internal)?] =
                        gc.theta_l_v;
                    frame.volts[channel_of(topology, group.right, ChannelKind::Internal)?] =
                        gc.theta_r_v;
                    frame.volts[channel_of(topology, group.right, ChannelKind::External)?] =
                        gc.phi_r_v;
                }
                None => uncal.push(group.left),
            }
        }
        if !uncal.is_empty() {
            return Err(Error::Uncalibrated(uncal));
        }
        Ok(frame)
    }
}
