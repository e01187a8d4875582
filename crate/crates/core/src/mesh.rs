//! Physical model of Mach-Zehnder interferometers and the rectangular mesh.
//!
//! Conventions used throughout the crate:
//!
//! - A directional coupler with bar-path power fraction `η` acts as
//!   `C(η) = [[√η, i√(1−η)], [i√(1−η), √η]]`, scaled by its amplitude loss.
//! - An MZI applies the external phases `(φ1, φ2)` first, then `C(c_in)`, the
//!   internal phases `(θ1, θ2)` with per-arm loss, `C(c_out)` and finally the
//!   pick-off tap. With ideal couplers the device is in the bar state at
//!   `θ1 − θ2 = π` and in the cross state at `θ1 − θ2 = 0`.
//! - Modes are 0-based internally. Column `c` couples ports `(p, p+1)` with
//!   `p = 2·row + (c mod 2)`. In the reversed layout light enters at column
//!   `N−1` and leaves after column 0, whose MZIs serve as output Hadamards.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::linalg::{mat2_apply, mat2_diag, mat2_mul, Mat2, TransferMatrix, C64, I, ZERO};
use crate::{db_to_amplitude, db_to_power, CMatrix, Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Pick-off sampling loss per depth, in dB.
pub const DEFAULT_TAP_DB: f64 = -0.5;

/// Address `U_{col}_{row}` of an MZI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeAddr {
    pub col: u8,
    pub row: u8,
}

impl NodeAddr {
    pub const fn new(col: u8, row: u8) -> Self {
        Self { col, row }
    }
}

impl fmt::Display for NodeAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "U_{}_{}", self.col, self.row)
    }
}

/// Direction of light through the column grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Light enters at column `N−1` and exits after column 0.
    Reversed,
    /// Light enters at column 0 and exits after column `N−1`.
    Standard,
}

/// Column/row layout of a rectangular (Clements) mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshTopology {
    n_modes: usize,
    orientation: Orientation,
    nodes: Vec<NodeAddr>,
}

impl MeshTopology {
    /// The reversed Clements layout of the 8×8 chip (for `n_modes = 8`).
    pub fn reversed(n_modes: usize) -> Self {
        Self::build(n_modes, Orientation::Reversed)
    }

    pub fn standard(n_modes: usize) -> Self {
        Self::build(n_modes, Orientation::Standard)
    }

    pub fn with_orientation(n_modes: usize, orientation: Orientation) -> Self {
        Self::build(n_modes, orientation)
    }

    fn build(n_modes: usize, orientation: Orientation) -> Self {
        assert!(n_modes >= 2, "a mesh needs at least two modes");
        let mut nodes = Vec::new();
        for col in 0..n_modes {
            for row in 0..Self::rows_in(n_modes, col) {
                nodes.push(NodeAddr::new(col as u8, row as u8));
            }
        }
        Self {
            n_modes,
            orientation,
            nodes,
        }
    }

    fn rows_in(n_modes: usize, col: usize) -> usize {
        let offset = col % 2;
        if n_modes < offset + 2 {
            0
        } else {
            (n_modes - offset) / 2
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_columns(&self) -> usize {
        self.n_modes
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Nodes ordered by column, then row.
    pub fn nodes(&self) -> &[NodeAddr] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn rows_in_column(&self, col: usize) -> usize {
        Self::rows_in(self.n_modes, col)
    }

    pub fn contains(&self, node: NodeAddr) -> bool {
        (node.col as usize) < self.n_modes
            && (node.row as usize) < self.rows_in_column(node.col as usize)
    }

    pub fn index_of(&self, node: NodeAddr) -> Option<usize> {
        if !self.contains(node) {
            return None;
        }
        let before: usize = (0..node.col as usize).map(|c| self.rows_in_column(c)).sum();
        Some(before + node.row as usize)
    }

    /// The adjacent port pair `(p, p+1)` coupled by `node`.
    pub fn ports(&self, node: NodeAddr) -> (usize, usize) {
        let p = 2 * node.row as usize + node.col as usize % 2;
        (p, p + 1)
    }

    /// The node in column `col` that touches `port`, if any.
    pub fn node_at(&self, col: usize, port: usize) -> Option<NodeAddr> {
        let offset = col % 2;
        if port < offset || port >= self.n_modes {
            return None;
        }
        let row = (port - offset) / 2;
        (row < self.rows_in_column(col)).then(|| NodeAddr::new(col as u8, row as u8))
    }

    /// Columns in the order light traverses them.
    pub fn light_order(&self) -> Vec<usize> {
        match self.orientation {
            Orientation::Reversed => (0..self.n_modes).rev().collect(),
            Orientation::Standard => (0..self.n_modes).collect(),
        }
    }

    /// Column reached after `step` columns of propagation.
    pub fn column_at_step(&self, step: usize) -> usize {
        match self.orientation {
            Orientation::Reversed => self.n_modes - 1 - step,
            Orientation::Standard => step,
        }
    }

    pub fn step_of_column(&self, col: usize) -> usize {
        match self.orientation {
            Orientation::Reversed => self.n_modes - 1 - col,
            Orientation::Standard => col,
        }
    }

    /// Ports that pass column `col` without entering an MZI.
    pub fn passthrough_ports(&self, col: usize) -> Vec<usize> {
        (0..self.n_modes)
            .filter(|&p| self.node_at(col, p).is_none())
            .collect()
    }

    /// The column-`0`-side output nodes in the reversed layout (the Hadamard column).
    pub fn output_column(&self) -> usize {
        self.column_at_step(self.n_modes - 1)
    }
}

/// Directional coupler imperfections.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplerParams {
    /// Bar-path power fraction; 0.5 is ideal.
    pub eta: f64,
    /// Amplitude transmission per pass.
    pub amp_loss: f64,
}

impl Default for CouplerParams {
    fn default() -> Self {
        Self {
            eta: 0.5,
            amp_loss: 1.0,
        }
    }
}

impl CouplerParams {
    pub fn matrix(&self) -> Mat2 {
        let s = self.eta.sqrt() * self.amp_loss;
        let c = (1.0 - self.eta).sqrt() * self.amp_loss;
        [
            [C64::new(s, 0.0), C64::new(0.0, c)],
            [C64::new(0.0, c), C64::new(s, 0.0)],
        ]
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::invalid("coupler eta outside [0, 1]"));
        }
        check_amplitude(self.amp_loss, "coupler amp_loss")
    }
}

fn check_amplitude(a: f64, what: &str) -> Result<()> {
    if a > 0.0 && a <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(alloc::format!(
            "{what} = {a} outside (0, 1]"
        )))
    }
}

/// Per-MZI physical parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MziParams {
    pub theta1: f64,
    pub theta2: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub c_in: CouplerParams,
    pub c_out: CouplerParams,
    pub arm_loss_top: f64,
    pub arm_loss_bot: f64,
    /// Amplitude factor of the pick-off tap on both outputs.
    pub tap_loss: f64,
}

impl Default for MziParams {
    /// Ideal couplers, no arm loss, the default −0.5 dB pick-off tap.
    fn default() -> Self {
        Self {
            theta1: 0.0,
            theta2: 0.0,
            phi1: 0.0,
            phi2: 0.0,
            c_in: CouplerParams::default(),
            c_out: CouplerParams::default(),
            arm_loss_top: 1.0,
            arm_loss_bot: 1.0,
            tap_loss: db_to_amplitude(DEFAULT_TAP_DB),
        }
    }
}

impl MziParams {
    /// Ideal and lossless: no tap either, so the block is unitary.
    pub fn lossless() -> Self {
        Self {
            tap_loss: 1.0,
            ..Self::default()
        }
    }

    pub fn theta_diff(&self) -> f64 {
        self.theta1 - self.theta2
    }

    pub fn phi_diff(&self) -> f64 {
        self.phi1 - self.phi2
    }

    /// Sets both phase pairs symmetrically from their differences.
    pub fn set_differential(&mut self, theta_diff: f64, phi_diff: f64) {
        self.theta1 = theta_diff / 2.0;
        self.theta2 = -theta_diff / 2.0;
        self.phi1 = phi_diff / 2.0;
        self.phi2 = -phi_diff / 2.0;
    }

    pub fn with_differential(mut self, theta_diff: f64, phi_diff: f64) -> Self {
        self.set_differential(theta_diff, phi_diff);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.theta1, "theta1"),
            (self.theta2, "theta2"),
            (self.phi1, "phi1"),
            (self.phi2, "phi2"),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(alloc::format!("{name} is not finite")));
            }
        }
        self.c_in.validate()?;
        self.c_out.validate()?;
        check_amplitude(self.arm_loss_top, "arm_loss_top")?;
        check_amplitude(self.arm_loss_bot, "arm_loss_bot")?;
        check_amplitude(self.tap_loss, "tap_loss")
    }

    /// Internal phase and arm-loss stage.
    fn arms(&self) -> Mat2 {
        mat2_diag(
            C64::from_polar(self.arm_loss_top, self.theta1),
            C64::from_polar(self.arm_loss_bot, self.theta2),
        )
    }

    fn externals(&self) -> Mat2 {
        mat2_diag(
            C64::from_polar(1.0, self.phi1),
            C64::from_polar(1.0, self.phi2),
        )
    }
}

/// 2×2 field transfer of one MZI, including couplers, arm losses and tap.
pub fn mzi_transfer(p: &MziParams) -> Mat2 {
    let inner = mat2_mul(&p.c_out.matrix(), &mat2_mul(&p.arms(), &p.c_in.matrix()));
    let t = mat2_mul(&inner, &p.externals());
    let tap = C64::new(p.tap_loss, 0.0);
    [
        [t[0][0] * tap, t[0][1] * tap],
        [t[1][0] * tap, t[1][1] * tap],
    ]
}

/// Loss factor of an uncoupled port in one column (a dummy waveguide block).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassThrough {
    pub col: u8,
    pub port: u8,
    pub amplitude: f64,
}

/// Topology plus every device parameter: the simulated chip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshState {
    pub topology: MeshTopology,
    /// Indexed like `topology.nodes()`.
    pub params: Vec<MziParams>,
    /// Grating efficiency of the `[top, bottom]` pick-off monitors per node.
    pub monitor_gains: Vec<[f64; 2]>,
    pub passthrough: Vec<PassThrough>,
    /// Output collection efficiency per port (grating plus fiber).
    pub collection_gains: Vec<f64>,
}

impl MeshState {
    /// Ideal couplers, default pick-off taps, dummy waveguides matching the tap loss.
    pub fn ideal(topology: MeshTopology) -> Self {
        Self::uniform(topology, MziParams::default())
    }

    /// Ideal and lossless; the transfer matrix is exactly unitary.
    pub fn lossless(topology: MeshTopology) -> Self {
        Self::uniform(topology, MziParams::lossless())
    }

    fn uniform(topology: MeshTopology, p: MziParams) -> Self {
        let n = topology.node_count();
        let mut passthrough = Vec::new();
        for col in 0..topology.n_columns() {
            for port in topology.passthrough_ports(col) {
                passthrough.push(PassThrough {
                    col: col as u8,
                    port: port as u8,
                    amplitude: p.tap_loss,
                });
            }
        }
        let n_modes = topology.n_modes();
        Self {
            topology,
            params: vec![p; n],
            monitor_gains: vec![[1.0, 1.0]; n],
            passthrough,
            collection_gains: vec![1.0; n_modes],
        }
    }

    pub fn n_modes(&self) -> usize {
        self.topology.n_modes()
    }

    pub fn params(&self, node: NodeAddr) -> Result<&MziParams> {
        let k = self
            .topology
            .index_of(node)
            .ok_or(Error::UnknownNode(node))?;
        Ok(&self.params[k])
    }

    pub fn params_mut(&mut self, node: NodeAddr) -> Result<&mut MziParams> {
        let k = self
            .topology
            .index_of(node)
            .ok_or(Error::UnknownNode(node))?;
        Ok(&mut self.params[k])
    }

    /// Sets every MZI to the bar state (`θ1 − θ2 = π`) with zero external phase.
    pub fn set_all_bar(&mut self) {
        for p in &mut self.params {
            p.set_differential(core::f64::consts::PI, 0.0);
        }
    }

    /// Sets every dummy waveguide block to one amplitude factor.
    pub fn set_passthrough_amplitude(&mut self, amplitude: f64) {
        for pt in &mut self.passthrough {
            pt.amplitude = amplitude;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.topology.node_count();
        if self.params.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.params.len(),
            });
        }
        if self.monitor_gains.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.monitor_gains.len(),
            });
        }
        if self.collection_gains.len() != self.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_modes(),
                found: self.collection_gains.len(),
            });
        }
        for p in &self.params {
            p.validate()?;
        }
        // A zero gain models a dead monitor; only negative gains are invalid.
        if self
            .monitor_gains
            .iter()
            .flatten()
            .any(|&g| !(g >= 0.0) || !g.is_finite())
        {
            return Err(Error::invalid("monitor gains must be non-negative"));
        }
        if self
            .collection_gains
            .iter()
            .any(|&g| !(g > 0.0) || !g.is_finite())
        {
            return Err(Error::invalid("collection gains must be positive"));
        }
        let expected: usize = (0..self.topology.n_columns())
            .map(|c| self.topology.passthrough_ports(c).len())
            .sum();
        if self.passthrough.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.passthrough.len(),
            });
        }
        for pt in &self.passthrough {
            if self
                .topology
                .node_at(pt.col as usize, pt.port as usize)
                .is_some()
            {
                return Err(Error::invalid("passthrough entry on a coupled port"));
            }
            check_amplitude(pt.amplitude, "passthrough amplitude")?;
        }
        Ok(())
    }

    /// Exact N×N transfer matrix.
    pub fn transfer(&self) -> TransferMatrix {
        CompiledMesh::new(self).transfer()
    }

    /// `|U·a|²` per output port.
    pub fn output_powers(&self, inputs: &[C64]) -> Result<Vec<f64>> {
        let out = CompiledMesh::new(self).propagate(inputs, None)?;
        Ok(out.iter().map(|z| z.norm_sqr()).collect())
    }

    /// Tapped power at each node's `[top, bottom]` outputs, times monitor gain.
    pub fn monitor_readings(&self, inputs: &[C64]) -> Result<Vec<[f64; 2]>> {
        let mut taps = vec![[0.0; 2]; self.topology.node_count()];
        CompiledMesh::new(self).propagate(inputs, Some(&mut taps))?;
        Ok(taps)
    }

    /// Field arriving at the input side of column `col`.
    pub fn field_before_column(&self, inputs: &[C64], col: usize) -> Result<Vec<C64>> {
        CompiledMesh::new(self).propagate_until(inputs, col)
    }

    /// Power bookkeeping of one propagation, element by element.
    pub fn power_budget(&self, inputs: &[C64]) -> Result<PowerBudget> {
        check_len(inputs, self.n_modes())?;
        let topo = &self.topology;
        let mut x = inputs.to_vec();
        let mut tapped = 0.0;
        let mut dissipated = 0.0;
        let pt_amp = self.passthrough_lookup();
        for col in topo.light_order() {
            for row in 0..topo.rows_in_column(col) {
                let node = NodeAddr::new(col as u8, row as u8);
                let (a, b) = topo.ports(node);
                let p = &self.params[topo.index_of(node).expect("node in topology")];
                let v0 = mat2_apply(&p.externals(), [x[a], x[b]]);
                let v1 = mat2_apply(&p.c_in.matrix(), v0);
                dissipated += (1.0 - p.c_in.amp_loss.powi(2)) * pow2(v0);
                let v2 = mat2_apply(&p.arms(), v1);
                dissipated += (1.0 - p.arm_loss_top.powi(2)) * v1[0].norm_sqr()
                    + (1.0 - p.arm_loss_bot.powi(2)) * v1[1].norm_sqr();
                let v3 = mat2_apply(&p.c_out.matrix(), v2);
                dissipated += (1.0 - p.c_out.amp_loss.powi(2)) * pow2(v2);
                tapped += (1.0 - p.tap_loss.powi(2)) * pow2(v3);
                x[a] = v3[0] * p.tap_loss;
                x[b] = v3[1] * p.tap_loss;
            }
            for port in topo.passthrough_ports(col) {
                let g = pt_amp[col][port];
                dissipated += (1.0 - g * g) * x[port].norm_sqr();
                x[port] *= g;
            }
        }
        Ok(PowerBudget {
            input: inputs.iter().map(|z| z.norm_sqr()).sum(),
            outputs: x.iter().map(|z| z.norm_sqr()).collect(),
            tapped,
            dissipated,
        })
    }

    pub(crate) fn passthrough_lookup(&self) -> Vec<Vec<f64>> {
        let n = self.n_modes();
        let mut lut = vec![vec![1.0; n]; self.topology.n_columns()];
        for pt in &self.passthrough {
            lut[pt.col as usize][pt.port as usize] = pt.amplitude;
        }
        lut
    }
}

fn pow2(v: [C64; 2]) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr()
}

fn check_len(inputs: &[C64], n: usize) -> Result<()> {
    if inputs.len() == n {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: n,
            found: inputs.len(),
        })
    }
}

/// Free-function form of [`MeshState::transfer`].
pub fn mesh_transfer(state: &MeshState) -> TransferMatrix {
    state.transfer()
}

/// Where the launched power went.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerBudget {
    pub input: f64,
    pub outputs: Vec<f64>,
    pub tapped: f64,
    pub dissipated: f64,
}

impl PowerBudget {
    /// `|input − Σ outputs − tapped − dissipated| / input`.
    pub fn relative_residual(&self) -> f64 {
        let out: f64 = self.outputs.iter().sum();
        (self.input - out - self.tapped - self.dissipated).abs() / self.input
    }
}

/// Precomputed MZI blocks for repeated propagation through a fixed state.
#[derive(Clone, Debug)]
pub(crate) struct CompiledMesh {
    n_modes: usize,
    monitor_gains: Vec<[f64; 2]>,
    /// Light-ordered columns: `(col, [(port, node index, block, tap)], [(port, amp)])`.
    columns: Vec<CompiledColumn>,
}

#[derive(Clone, Debug)]
struct CompiledColumn {
    col: usize,
    blocks: Vec<(usize, usize, Mat2, f64)>,
    passthrough: Vec<(usize, f64)>,
}

impl CompiledMesh {
    pub(crate) fn new(state: &MeshState) -> Self {
        let topo = &state.topology;
        let lut = state.passthrough_lookup();
        let columns = topo
            .light_order()
            .into_iter()
            .map(|col| {
                let blocks = (0..topo.rows_in_column(col))
                    .map(|row| {
                        let node = NodeAddr::new(col as u8, row as u8);
                        let k = topo.index_of(node).expect("node in topology");
                        let p = &state.params[k];
                        (topo.ports(node).0, k, mzi_transfer(p), p.tap_loss)
                    })
                    .collect();
                let passthrough = topo
                    .passthrough_ports(col)
                    .into_iter()
                    .map(|p| (p, lut[col][p]))
                    .collect();
                CompiledColumn {
                    col,
                    blocks,
                    passthrough,
                }
            })
            .collect();
        Self {
            n_modes: topo.n_modes(),
            monitor_gains: state.monitor_gains.clone(),
            columns,
        }
    }

    /// Replaces the block of node index `k` after its parameters changed.
    pub(crate) fn update_node(&mut self, k: usize, p: &MziParams) {
        for column in &mut self.columns {
            for blk in &mut column.blocks {
                if blk.1 == k {
                    blk.2 = mzi_transfer(p);
                    blk.3 = p.tap_loss;
                    return;
                }
            }
        }
    }

    pub(crate) fn transfer(&self) -> TransferMatrix {
        let mut u = CMatrix::identity(self.n_modes);
        for column in &self.columns {
            for &(p, _, ref blk, _) in &column.blocks {
                u.apply_rows(p, blk);
            }
            for &(port, g) in &column.passthrough {
                for c in 0..self.n_modes {
                    u[(port, c)] *= g;
                }
            }
        }
        u
    }

    pub(crate) fn propagate(
        &self,
        inputs: &[C64],
        mut taps: Option<&mut [[f64; 2]]>,
    ) -> Result<Vec<C64>> {
        check_len(inputs, self.n_modes)?;
        let mut x = inputs.to_vec();
        for column in &self.columns {
            for &(p, k, ref blk, tap) in &column.blocks {
                let y = mat2_apply(blk, [x[p], x[p + 1]]);
                if let Some(t) = taps.as_deref_mut() {
                    // Output amplitudes already include the tap factor.
                    let frac = if tap >= 1.0 {
                        0.0
                    } else {
                        1.0 / (tap * tap) - 1.0
                    };
                    let g = self.monitor_gains[k];
                    t[k] = [y[0].norm_sqr() * frac * g[0], y[1].norm_sqr() * frac * g[1]];
                }
                x[p] = y[0];
                x[p + 1] = y[1];
            }
            for &(port, g) in &column.passthrough {
                x[port] *= g;
            }
        }
        Ok(x)
    }

    fn propagate_until(&self, inputs: &[C64], stop_col: usize) -> Result<Vec<C64>> {
        check_len(inputs, self.n_modes)?;
        let mut x = inputs.to_vec();
        for column in &self.columns {
            if column.col == stop_col {
                break;
            }
            for &(p, _, ref blk, _) in &column.blocks {
                let y = mat2_apply(blk, [x[p], x[p + 1]]);
                x[p] = y[0];
                x[p + 1] = y[1];
            }
            for &(port, g) in &column.passthrough {
                x[port] *= g;
            }
        }
        Ok(x)
    }
}

/// An `N(mean, sigma)` distribution parameter pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub sigma: f64,
}

impl Gaussian {
    pub const ZERO: Self = Self {
        mean: 0.0,
        sigma: 0.0,
    };

    fn normal(&self, what: &str) -> Result<Normal<f64>> {
        if !self.mean.is_finite() || !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid(alloc::format!(
                "{what}: invalid distribution {self:?}"
            )));
        }
        Normal::new(self.mean, self.sigma).map_err(|_| Error::invalid(what))
    }
}

/// Fabrication-variation model used by [`perturb`].
///
/// Losses are drawn per depth (one column) and per arm, on top of the
/// pick-off tap already present in the state. A per-depth loss of
/// −2.33 dB ± 1.87 dB read off monitor images also contains grating-efficiency
/// scatter, so only part of that spread is device loss; see
/// [`NoiseSpec::apparent_depth_loss_sigma_db`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of each coupler's `η` around its current value.
    pub eta_sigma: f64,
    /// Extra loss per arm and per dummy waveguide block, in dB.
    pub excess_loss_db: Gaussian,
    /// Log-normal scatter of pick-off monitor gains, in dB.
    pub monitor_gain_sigma_db: f64,
    /// Log-normal scatter of output collection efficiencies, in dB.
    pub collection_gain_sigma_db: f64,
}

impl NoiseSpec {
    /// No variation at all.
    pub const fn none() -> Self {
        Self {
            eta_sigma: 0.0,
            excess_loss_db: Gaussian::ZERO,
            monitor_gain_sigma_db: 0.0,
            collection_gain_sigma_db: 0.0,
        }
    }

    /// Default fabrication model for a typical 8×8 chip.
    pub const fn typical() -> Self {
        Self {
            eta_sigma: 0.09,
            excess_loss_db: Gaussian {
                mean: -2.33 - DEFAULT_TAP_DB,
                sigma: 0.60,
            },
            monitor_gain_sigma_db: 1.2524,
            collection_gain_sigma_db: 1.0,
        }
    }

    /// Mean loss per depth including the pick-off tap, in dB.
    pub fn depth_loss_mean_db(&self) -> f64 {
        self.excess_loss_db.mean + DEFAULT_TAP_DB
    }

    /// Spread of a camera-style per-depth loss estimate, which divides two
    /// monitor readings and so picks up two independent gain errors.
    pub fn apparent_depth_loss_sigma_db(&self) -> f64 {
        (self.excess_loss_db.sigma.powi(2) + 2.0 * self.monitor_gain_sigma_db.powi(2)).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.eta_sigma, "eta_sigma"),
            (self.monitor_gain_sigma_db, "monitor_gain_sigma_db"),
            (self.collection_gain_sigma_db, "collection_gain_sigma_db"),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(alloc::format!(
                    "{name} must be a finite non-negative number"
                )));
            }
        }
        self.excess_loss_db.normal("excess_loss_db").map(|_| ())
    }
}

const MIN_AMPLITUDE: f64 = 1e-6;

fn clamp_logged(v: f64, lo: f64, hi: f64, what: &str) -> f64 {
    if v < lo || v > hi {
        log::debug!("clamping {what} = {v} into [{lo}, {hi}]");
    }
    v.clamp(lo, hi)
}

/// Samples a fabricated chip around `state`. Deterministic in `seed`.
pub fn perturb(state: &MeshState, noise: &NoiseSpec, seed: u64) -> Result<MeshState> {
    noise.validate()?;
    state.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta = Normal::new(0.0, noise.eta_sigma).map_err(|_| Error::invalid("eta_sigma"))?;
    let loss = noise.excess_loss_db.normal("excess_loss_db")?;
    let mon =
        Normal::new(0.0, noise.monitor_gain_sigma_db).map_err(|_| Error::invalid("monitor"))?;
    let col = Normal::new(0.0, noise.collection_gain_sigma_db)
        .map_err(|_| Error::invalid("collection"))?;

    let mut out = state.clone();
    let amp = |rng: &mut ChaCha8Rng, a: f64, what: &str| {
        let g = db_to_amplitude(loss.sample(rng));
        clamp_logged(a * g, MIN_AMPLITUDE, 1.0, what)
    };
    for p in &mut out.params {
        p.c_in.eta = clamp_logged(p.c_in.eta + eta.sample(&mut rng), 0.0, 1.0, "eta");
        p.c_out.eta = clamp_logged(p.c_out.eta + eta.sample(&mut rng), 0.0, 1.0, "eta");
        p.arm_loss_top = amp(&mut rng, p.arm_loss_top, "arm_loss_top");
        p.arm_loss_bot = amp(&mut rng, p.arm_loss_bot, "arm_loss_bot");
    }
    for pt in &mut out.passthrough {
        pt.amplitude = amp(&mut rng, pt.amplitude, "passthrough");
    }
    for g in out.monitor_gains.iter_mut().flatten() {
        *g *= db_to_power(mon.sample(&mut rng));
    }
    for g in &mut out.collection_gains {
        *g *= db_to_power(col.sample(&mut rng));
    }
    Ok(out)
}

/// Random phases on every shifter; used by property tests and demos.
pub fn randomize_phases<R: Rng + ?Sized>(state: &mut MeshState, rng: &mut R) {
    use core::f64::consts::TAU;
    for p in &mut state.params {
        p.theta1 = rng.random::<f64>() * TAU;
        p.theta2 = rng.random::<f64>() * TAU;
        p.phi1 = rng.random::<f64>() * TAU;
        p.phi2 = rng.random::<f64>() * TAU;
    }
}

/// A basis input vector with unit amplitude on `port`.
pub fn basis_input(n: usize, port: usize) -> Vec<C64> {
    let mut v = vec![ZERO; n];
    v[port] = C64::new(1.0, 0.0);
    v
}

/// `i` as a `C64`, re-exported for callers building input vectors.
pub const IMAG: C64 = I;

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use std::vec::Vec;

    fn lossless_mzi(theta_diff: f64) -> MziParams {
        MziParams::lossless().with_differential(theta_diff, 0.0)
    }

    /// Independent oracle: plain 2×2 products written out term by term.
    fn oracle_mzi(eta_in: f64, eta_out: f64, t1: f64, t2: f64) -> [[C64; 2]; 2] {
        let c = |eta: f64| {
            let (s, x) = (eta.sqrt(), (1.0 - eta).sqrt());
            [
                [C64::new(s, 0.0), C64::new(0.0, x)],
                [C64::new(0.0, x), C64::new(s, 0.0)],
            ]
        };
        let (a, b) = (c(eta_in), c(eta_out));
        let e1 = C64::from_polar(1.0, t1);
        let e2 = C64::from_polar(1.0, t2);
        let mut m = [[ZERO; 2]; 2];
        for r in 0..2 {
            for k in 0..2 {
                m[r][k] = b[r][0] * e1 * a[0][k] + b[r][1] * e2 * a[1][k];
            }
        }
        m
    }

    #[test]
    fn bar_and_cross_conventions() {
        let bar = mzi_transfer(&lossless_mzi(PI));
        assert!((bar[0][0].norm() - 1.0).abs() < 1e-15);
        assert!(bar[0][1].norm() < 1e-15 && bar[1][0].norm() < 1e-15);
        let cross = mzi_transfer(&lossless_mzi(0.0));
        assert!(cross[0][0].norm() < 1e-15 && cross[1][1].norm() < 1e-15);
        assert!((cross[0][1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn imperfect_coupler_cross_leakage() {
        let mut p = lossless_mzi(0.0);
        p.c_in.eta = 0.55;
        p.c_out.eta = 0.55;
        let t = mzi_transfer(&p);
        let o = oracle_mzi(0.55, 0.55, p.theta1, p.theta2);
        for r in 0..2 {
            for c in 0..2 {
                assert!((t[r][c] - o[r][c]).norm() < 1e-15);
            }
        }
        assert!((t[0][0].norm_sqr() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn response_depends_only_on_differential_theta() {
        let base = mzi_transfer(&lossless_mzi(0.7));
        for common in [-2.0, 0.3, 1.9] {
            let mut p = lossless_mzi(0.7);
            p.theta1 += common;
            p.theta2 += common;
            let t = mzi_transfer(&p);
            for r in 0..2 {
                for c in 0..2 {
                    assert!((t[r][c].norm_sqr() - base[r][c].norm_sqr()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn eight_mode_topology_layout() {
        let t = MeshTopology::reversed(8);
        assert_eq!(t.node_count(), 28);
        for col in 0..8 {
            assert_eq!(t.rows_in_column(col), if col % 2 == 0 { 4 } else { 3 });
        }
        // 1-based ports (2r+1, 2r+2) on even columns, (2r+2, 2r+3) on odd.
        assert_eq!(t.ports(NodeAddr::new(0, 3)), (6, 7));
        assert_eq!(t.ports(NodeAddr::new(5, 0)), (1, 2));
        assert_eq!(t.node_at(7, 0), None);
        assert_eq!(t.node_at(6, 7), Some(NodeAddr::new(6, 3)));
        for (k, &n) in t.nodes().iter().enumerate() {
            assert_eq!(t.index_of(n), Some(k));
        }
        assert_eq!(t.light_order()[0], 7);
    }

    #[test]
    fn all_bar_is_identity_magnitude() {
        let mut s = MeshState::lossless(MeshTopology::reversed(8));
        s.set_all_bar();
        let m = s.transfer().magnitudes();
        for r in 0..8 {
            for c in 0..8 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((m[(r, c)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lone_splitter_in_output_column() {
        let mut s = MeshState::lossless(MeshTopology::reversed(8));
        s.set_all_bar();
        // Node U_0_0 couples 1-based ports (1, 2).
        s.params_mut(NodeAddr::new(0, 0))
            .unwrap()
            .set_differential(PI / 2.0, 0.0);
        let u = s.transfer();
        assert!((u[(0, 0)].norm_sqr() - 0.5).abs() < 1e-12);
        assert!((u[(1, 0)].norm_sqr() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lone_splitter_fringe() {
        let mut s = MeshState::lossless(MeshTopology::reversed(8));
        s.set_all_bar();
        s.params_mut(NodeAddr::new(0, 0))
            .unwrap()
            .set_differential(PI / 2.0, 0.0);
        let u = s.transfer();
        for k in 0..16 {
            let alpha = k as f64 * 0.4;
            let mut a = vec![ZERO; 8];
            a[0] = C64::new(0.5f64.sqrt(), 0.0);
            a[1] = C64::from_polar(0.5f64.sqrt(), alpha);
            let p = s.output_powers(&a).unwrap();
            // Closed form with |u| = 1/√2 and amplitudes 1/√2.
            let rel = (u[(0, 0)].arg() - u[(0, 1)].arg()) - alpha;
            let want = 0.5 * (0.5 + 0.5 + 2.0 * 0.5 * rel.cos());
            assert!((p[0] - want).abs() < 1e-12, "{} vs {}", p[0], want);
        }
    }

    #[test]
    fn per_depth_loss_accumulates() {
        let mut s = MeshState::lossless(MeshTopology::reversed(8));
        s.set_all_bar();
        let g = db_to_amplitude(-2.33);
        for p in &mut s.params {
            p.arm_loss_top = g;
            p.arm_loss_bot = g;
        }
        s.set_passthrough_amplitude(g);
        for port in 0..8 {
            let p: f64 = s.output_powers(&basis_input(8, port)).unwrap().iter().sum();
            assert!((crate::power_to_db(p) + 18.64).abs() < 1e-9);
        }
    }

    #[test]
    fn monitors_follow_bar_and_cross() {
        let mut s = MeshState::ideal(MeshTopology::reversed(8));
        s.set_all_bar();
        let node = NodeAddr::new(6, 0);
        let k = s.topology.index_of(node).unwrap();
        // Port 0 first crosses a dummy block at column 7 carrying the tap loss.
        let frac = (1.0 - db_to_power(DEFAULT_TAP_DB)) * db_to_power(DEFAULT_TAP_DB);
        let m = s.monitor_readings(&basis_input(8, 0)).unwrap();
        assert!((m[k][0] - frac).abs() < 1e-12);
        assert!(m[k][1] < 1e-20);

        s.params_mut(node).unwrap().set_differential(0.0, 0.0);
        let m = s.monitor_readings(&basis_input(8, 0)).unwrap();
        assert!((m[k][1] - frac).abs() < 1e-12 && m[k][0] < 1e-20);

        s.monitor_gains[k] = [2.0, 2.0];
        let m2 = s.monitor_readings(&basis_input(8, 0)).unwrap();
        assert!((m2[k][1] - 2.0 * m[k][1]).abs() < 1e-15);
    }

    #[test]
    fn perturb_is_deterministic_and_identity_for_zero_noise() {
        let s = MeshState::ideal(MeshTopology::reversed(8));
        assert_eq!(perturb(&s, &NoiseSpec::none(), 3).unwrap(), s);
        let a = perturb(&s, &NoiseSpec::typical(), 11).unwrap();
        let b = perturb(&s, &NoiseSpec::typical(), 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, perturb(&s, &NoiseSpec::typical(), 12).unwrap());
        a.validate().unwrap();
    }

    #[test]
    fn perturb_rejects_bad_distributions() {
        let s = MeshState::ideal(MeshTopology::reversed(8));
        let mut bad = NoiseSpec::typical();
        bad.excess_loss_db.sigma = -1.0;
        assert!(perturb(&s, &bad, 0).is_err());
        bad = NoiseSpec::typical();
        bad.eta_sigma = f64::NAN;
        assert!(perturb(&s, &bad, 0).is_err());
    }

    #[test]
    fn typical_noise_apparent_spread() {
        let n = NoiseSpec::typical();
        assert!((n.depth_loss_mean_db() + 2.33).abs() < 1e-12);
        assert!((n.apparent_depth_loss_sigma_db() - 1.87).abs() < 0.01);
    }

    #[test]
    fn output_powers_rejects_wrong_length() {
        let s = MeshState::ideal(MeshTopology::reversed(8));
        assert!(matches!(
            s.output_powers(&basis_input(4, 0)),
            Err(Error::DimensionMismatch {
                expected: 8,
                found: 4
            })
        ));
    }

    #[test]
    fn budget_balances_on_random_lossy_chip() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = MeshState::ideal(MeshTopology::reversed(8));
        let mut s = perturb(&base, &NoiseSpec::typical(), 9).unwrap();
        randomize_phases(&mut s, &mut rng);
        for p in &mut s.params {
            p.c_in.amp_loss = 0.97;
        }
        let inputs: Vec<C64> = (0..8).map(|k| C64::from_polar(1.0, k as f64)).collect();
        let b = s.power_budget(&inputs).unwrap();
        assert!(b.relative_residual() < 1e-10);
        let direct = s.output_powers(&inputs).unwrap();
        for (x, y) in direct.iter().zip(&b.outputs) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
