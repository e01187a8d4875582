//! Voltage-level emulator of the chip's electro-optic interface.
//!
//! Each MZI has two differential channels: channel `2k` drives `θ1 − θ2` and
//! channel `2k+1` drives `φ1 − φ2` of node `k` (topology order). A frame holds
//! absolute voltages; applying it sets every differential phase to the chip's
//! hidden static offset plus the actuator response.
//!
//! The static offsets model unknown fabrication phases. They are private and
//! only observable through optical readings, except that the `oracle` cargo
//! feature exposes the ground truth to test harnesses.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::C64;
use crate::mesh::{CompiledMesh, MeshState, MeshTopology, NodeAddr};
use crate::{Error, Result, V_MAX};
#[allow(unused_imports)]
use num_traits::Float;

/// Piezo actuator response.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActuatorModel {
    pub v_pi: f64,
    /// Quadratic term `k` in `f(v) = π·v/v_pi + k·v·|v|`, rad/V².
    pub nonlinearity: f64,
    pub resonance_hz: f64,
    pub damping_q: f64,
}

impl Default for ActuatorModel {
    fn default() -> Self {
        Self {
            v_pi: 25.0,
            nonlinearity: 0.0,
            resonance_hz: 1e7,
            damping_q: 5.0,
        }
    }
}

impl ActuatorModel {
    /// Differential phase produced by `v` volts.
    pub fn phase(&self, v: f64) -> f64 {
        PI * v / self.v_pi + self.nonlinearity * v * v.abs()
    }

    /// `|nonlinearity|` must stay below this for `f` to be monotone on `±V_MAX`.
    pub fn monotone_bound(&self) -> f64 {
        PI / (2.0 * self.v_pi * V_MAX)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_pi > 0.0 && self.v_pi.is_finite()) {
            return Err(Error::invalid("v_pi must be positive"));
        }
        if !(self.resonance_hz > 0.0 && self.resonance_hz.is_finite()) {
            return Err(Error::invalid("resonance_hz must be positive"));
        }
        if !(self.damping_q > 0.0 && self.damping_q.is_finite()) {
            return Err(Error::invalid("damping_q must be positive"));
        }
        if !(self.nonlinearity.abs() < self.monotone_bound()) {
            return Err(Error::invalid("nonlinearity breaks monotonicity on ±25 V"));
        }
        Ok(())
    }
}

/// Photodiode and monitor readout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub relative_noise_sigma: f64,
    pub additive_floor: f64,
    pub sample_rate_hz: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            relative_noise_sigma: 0.005,
            additive_floor: 1e-6,
            sample_rate_hz: 480.0,
        }
    }
}

impl DetectorModel {
    pub const fn noiseless() -> Self {
        Self {
            relative_noise_sigma: 0.0,
            additive_floor: 0.0,
            sample_rate_hz: 480.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.relative_noise_sigma, "relative_noise_sigma"),
            (self.additive_floor, "additive_floor"),
            (self.sample_rate_hz, "sample_rate_hz"),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(alloc::format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }

    fn read<R: Rng + ?Sized>(&self, truth: f64, rng: &mut R) -> f64 {
        if self.relative_noise_sigma == 0.0 {
            return truth + self.additive_floor;
        }
        let xi: f64 = rng.sample(StandardNormal);
        (truth * (1.0 + self.relative_noise_sigma * xi) + self.additive_floor).max(0.0)
    }
}

/// How the hidden static phase offsets are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetModel {
    Zero,
    /// Independent uniform phases on `[−π, π)`.
    Uniform,
}

/// Everything besides the mesh needed to instantiate an emulated chip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmuConfig {
    pub actuator: ActuatorModel,
    pub detector: DetectorModel,
    pub offsets: OffsetModel,
    pub seed: u64,
}

impl Default for EmuConfig {
    fn default() -> Self {
        Self {
            actuator: ActuatorModel::default(),
            detector: DetectorModel::default(),
            offsets: OffsetModel::Uniform,
            seed: 0,
        }
    }
}

impl EmuConfig {
    /// Zero offsets, linear actuator, noiseless detectors.
    pub fn ideal(seed: u64) -> Self {
        Self {
            actuator: ActuatorModel::default(),
            detector: DetectorModel::noiseless(),
            offsets: OffsetModel::Zero,
            seed,
        }
    }
}

/// Which shifter pair a channel drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// `θ1 − θ2`.
    Internal,
    /// `φ1 − φ2`.
    External,
}

pub fn channel_of(topology: &MeshTopology, node: NodeAddr, kind: ChannelKind) -> Result<usize> {
    let k = topology.index_of(node).ok_or(Error::UnknownNode(node))?;
    Ok(2 * k + matches!(kind, ChannelKind::External) as usize)
}

pub fn channel_info(topology: &MeshTopology, channel: usize) -> Result<(NodeAddr, ChannelKind)> {
    let node = *topology
        .nodes()
        .get(channel / 2)
        .ok_or(Error::InvalidChannel(channel))?;
    let kind = if channel.is_multiple_of(2) {
        ChannelKind::Internal
    } else {
        ChannelKind::External
    };
    Ok((node, kind))
}

/// Absolute drive voltages for every channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoltageFrame {
    pub volts: Vec<f64>,
}

impl VoltageFrame {
    pub fn zeros(channels: usize) -> Self {
        Self {
            volts: vec![0.0; channels],
        }
    }

    pub fn len(&self) -> usize {
        self.volts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volts.is_empty()
    }

    pub fn negated(&self) -> Self {
        Self {
            volts: self.volts.iter().map(|v| -v).collect(),
        }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.volts.len() != channels {
            return Err(Error::DimensionMismatch {
                expected: channels,
                found: self.volts.len(),
            });
        }
        for (channel, &volts) in self.volts.iter().enumerate() {
            if !(volts.abs() <= V_MAX) {
                return Err(Error::VoltageOutOfRange { channel, volts });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
struct StaticOffsets {
    theta: Vec<f64>,
    phi: Vec<f64>,
}

/// Detector values of one acquisition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    /// Output photodiodes, including collection efficiency.
    pub outputs: Vec<f64>,
    /// Pick-off monitors `[top, bottom]` per node, topology order.
    pub monitors: Vec<[f64; 2]>,
}

/// Raw samples of a sawtooth sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecording {
    /// Sweep voltage of each sample within a period.
    pub voltages: Vec<f64>,
    /// `samples[period][k][port]`.
    pub samples: Vec<Vec<Vec<f64>>>,
    pub freq_hz: f64,
    /// Channel and polarity of each swept shifter.
    pub channels: Vec<(usize, f64)>,
}

impl SweepRecording {
    pub fn periods(&self) -> usize {
        self.samples.len()
    }

    pub fn points(&self) -> usize {
        self.voltages.len()
    }

    /// Period-averaged trace of one output.
    pub fn averaged(&self, port: usize) -> Vec<f64> {
        let periods = self.samples.len() as f64;
        (0..self.points())
            .map(|k| self.samples.iter().map(|p| p[k][port]).sum::<f64>() / periods)
            .collect()
    }

    /// Sample time of point `k` in period `p`.
    pub fn time(&self, period: usize, k: usize) -> f64 {
        (period as f64 + k as f64 / self.points() as f64) / self.freq_hz
    }
}

/// Sawtooth sweep parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub vpp: f64,
    pub freq_hz: f64,
    pub n_points: usize,
    pub periods: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            vpp: 50.0,
            freq_hz: 35.0,
            n_points: 125,
            periods: 5,
        }
    }
}

impl SweepSettings {
    /// Sweep voltages `−vpp/2 … +vpp/2`, endpoints included.
    pub fn voltages(&self) -> Vec<f64> {
        let n = self.n_points;
        if n == 1 {
            return vec![0.0];
        }
        (0..n)
            .map(|k| -self.vpp / 2.0 + self.vpp * k as f64 / (n - 1) as f64)
            .collect()
    }
}

/// An emulated chip: fabricated mesh, hidden offsets, electrical and readout models.
#[derive(Clone, Debug)]
pub struct EmulatedChip {
    base: MeshState,
    state: MeshState,
    compiled: CompiledMesh,
    offsets: StaticOffsets,
    actuator: ActuatorModel,
    detector: DetectorModel,
    frame: VoltageFrame,
    rng: ChaCha8Rng,
}

impl EmulatedChip {
    /// Samples the hidden offsets from `config.seed` and applies a zero frame.
    pub fn new(mesh: MeshState, config: &EmuConfig) -> Result<Self> {
        mesh.validate()?;
        config.actuator.validate()?;
        config.detector.validate()?;
        let n = mesh.topology.node_count();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let offsets = match config.offsets {
            OffsetModel::Zero => StaticOffsets {
                theta: vec![0.0; n],
                phi: vec![0.0; n],
            },
            OffsetModel::Uniform => {
                let mut draw = || {
                    (0..n)
                        .map(|_| rng.random_range(-PI..PI))
                        .collect::<Vec<_>>()
                };
                let theta = draw();
                let phi = draw();
                StaticOffsets { theta, phi }
            }
        };
        let mut det_rng = ChaCha8Rng::seed_from_u64(config.seed);
        det_rng.set_stream(1);
        let compiled = CompiledMesh::new(&mesh);
        let mut chip = Self {
            state: mesh.clone(),
            base: mesh,
            compiled,
            offsets,
            actuator: config.actuator,
            detector: config.detector,
            frame: VoltageFrame::zeros(2 * n),
            rng: det_rng,
        };
        chip.rebuild();
        Ok(chip)
    }

    pub fn topology(&self) -> &MeshTopology {
        &self.base.topology
    }

    pub fn n_channels(&self) -> usize {
        2 * self.base.topology.node_count()
    }

    pub fn n_modes(&self) -> usize {
        self.base.n_modes()
    }

    pub fn actuator(&self) -> &ActuatorModel {
        &self.actuator
    }

    pub fn detector(&self) -> &DetectorModel {
        &self.detector
    }

    pub fn set_detector(&mut self, detector: DetectorModel) -> Result<()> {
        detector.validate()?;
        self.detector = detector;
        Ok(())
    }

    /// Restarts the detector noise stream.
    pub fn reseed_detectors(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.rng.set_stream(1);
    }

    pub fn frame(&self) -> &VoltageFrame {
        &self.frame
    }

    fn node_phases(&self, k: usize) -> (f64, f64) {
        let t = self.offsets.theta[k] + self.actuator.phase(self.frame.volts[2 * k]);
        let f = self.offsets.phi[k] + self.actuator.phase(self.frame.volts[2 * k + 1]);
        (t, f)
    }

    fn update(&mut self, k: usize) {
        let (t, f) = self.node_phases(k);
        let base = &self.base.params[k];
        let p = &mut self.state.params[k];
        p.theta1 = base.theta1 + t / 2.0;
        p.theta2 = base.theta2 - t / 2.0;
        p.phi1 = base.phi1 + f / 2.0;
        p.phi2 = base.phi2 - f / 2.0;
        self.compiled.update_node(k, p);
    }

    fn rebuild(&mut self) {
        for k in 0..self.base.topology.node_count() {
            self.update(k);
        }
    }

    /// Drives every channel to the frame's voltages. Out-of-range frames are
    /// rejected and leave the chip unchanged.
    pub fn apply_frame(&mut self, frame: &VoltageFrame) -> Result<()> {
        frame.validate(self.n_channels())?;
        let changed: Vec<usize> = (0..self.base.topology.node_count())
            .filter(|&k| {
                self.frame.volts[2 * k] != frame.volts[2 * k]
                    || self.frame.volts[2 * k + 1] != frame.volts[2 * k + 1]
            })
            .collect();
        self.frame.volts.clone_from(&frame.volts);
        for k in changed {
            self.update(k);
        }
        Ok(())
    }

    /// Changes one channel, keeping the rest of the frame.
    pub fn set_channel(&mut self, channel: usize, volts: f64) -> Result<()> {
        if channel >= self.n_channels() {
            return Err(Error::InvalidChannel(channel));
        }
        if !(volts.abs() <= V_MAX) {
            return Err(Error::VoltageOutOfRange { channel, volts });
        }
        if self.frame.volts[channel] != volts {
            self.frame.volts[channel] = volts;
            self.update(channel / 2);
        }
        Ok(())
    }

    /// One noisy acquisition of every photodiode and monitor.
    pub fn read_detectors(&mut self, inputs: &[C64]) -> Result<Readout> {
        let mut monitors = vec![[0.0; 2]; self.base.topology.node_count()];
        let out = self.compiled.propagate(inputs, Some(&mut monitors))?;
        let det = self.detector;
        let outputs = out
            .iter()
            .zip(&self.base.collection_gains)
            .map(|(z, g)| det.read(g * z.norm_sqr(), &mut self.rng))
            .collect();
        for m in monitors.iter_mut().flatten() {
            *m = det.read(*m, &mut self.rng);
        }
        Ok(Readout { outputs, monitors })
    }

    /// Sweeps the given channels together with a sawtooth of the given
    /// polarities around their current voltages, reading the outputs at every
    /// sample. The sweep is quasi-static; the frame is restored afterwards.
    pub fn sawtooth_sweep(
        &mut self,
        inputs: &[C64],
        channels: &[(usize, f64)],
        settings: &SweepSettings,
    ) -> Result<SweepRecording> {
        if settings.n_points == 0 || settings.periods == 0 {
            return Err(Error::invalid(
                "sweep needs at least one point and one period",
            ));
        }
        if !(settings.freq_hz > 0.0) {
            return Err(Error::invalid("sweep frequency must be positive"));
        }
        let voltages = settings.voltages();
        let saved = self.frame.clone();
        for &(ch, pol) in channels {
            if ch >= self.n_channels() {
                return Err(Error::InvalidChannel(ch));
            }
            for &v in &voltages {
                let volts = saved.volts[ch] + pol * v;
                if !(volts.abs() <= V_MAX + 1e-12) {
                    return Err(Error::VoltageOutOfRange { channel: ch, volts });
                }
            }
        }
        let mut samples = Vec::with_capacity(settings.periods);
        let mut frame = saved.clone();
        for _ in 0..settings.periods {
            let mut period = Vec::with_capacity(voltages.len());
            for &v in &voltages {
                for &(ch, pol) in channels {
                    frame.volts[ch] = (saved.volts[ch] + pol * v).clamp(-V_MAX, V_MAX);
                }
                self.apply_frame(&frame)?;
                period.push(self.read_detectors(inputs)?.outputs);
            }
            samples.push(period);
        }
        self.apply_frame(&saved)?;
        Ok(SweepRecording {
            voltages,
            samples,
            freq_hz: settings.freq_hz,
            channels: channels.to_vec(),
        })
    }

    /// The fabricated mesh without any drive or offsets (couplers, losses, gains).
    pub fn fabricated(&self) -> &MeshState {
        &self.base
    }

    /// Chip with the current drive and hidden offsets folded in.
    #[cfg(any(test, feature = "oracle"))]
    pub fn effective_state(&self) -> &MeshState {
        &self.state
    }

    /// Hidden `(θ, φ)` offsets per node.
    #[cfg(feature = "oracle")]
    pub fn hidden_offsets(&self) -> Vec<(f64, f64)> {
        self.offsets
            .theta
            .iter()
            .copied()
            .zip(self.offsets.phi.iter().copied())
            .collect()
    }
}

/// Sweep channels and polarities setting the relative phase between inputs
/// `i` and `j`: the external shifter of each input's first MZI, driven in
/// opposite polarity. If both inputs share a first MZI one channel suffices.
pub fn sweep_channels_for_pair(
    topology: &MeshTopology,
    i: usize,
    j: usize,
) -> Result<Vec<(usize, f64)>> {
    let first = |port: usize| -> Result<(NodeAddr, bool)> {
        let n = topology.n_modes();
        if port >= n {
            return Err(Error::PortOutOfRange(port, n));
        }
        for col in topology.light_order() {
            if let Some(node) = topology.node_at(col, port) {
                return Ok((node, topology.ports(node).0 == port));
            }
        }
        Err(Error::PortOutOfRange(port, n))
    };
    if i == j {
        return Err(Error::InvalidPair(i, j));
    }
    let (ni, top_i) = first(i)?;
    let (nj, top_j) = first(j)?;
    let ci = channel_of(topology, ni, ChannelKind::External)?;
    if ni == nj {
        return Ok(vec![(ci, if top_i { 1.0 } else { -1.0 })]);
    }
    let cj = channel_of(topology, nj, ChannelKind::External)?;
    Ok(vec![
        (ci, if top_i { 1.0 } else { -1.0 }),
        (cj, if top_j { -1.0 } else { 1.0 }),
    ])
}

/// Time-domain phase response to a voltage step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub dt: f64,
    pub phase: Vec<f64>,
    /// Time after which the response stays within 5% of the final value.
    pub settling_time: f64,
}

/// Integrates `x'' + (ω/Q)·x' + ω²·x = ω²·A` (RK4) for a step of `A` radians.
pub fn step_response(
    model: &ActuatorModel,
    step_rad: f64,
    dt: f64,
    duration: f64,
) -> Result<StepTrace> {
    model.validate()?;
    if !(model.damping_q > 0.5) {
        return Err(Error::invalid("damping_q ≤ 0.5 is not underdamped"));
    }
    if !(dt > 0.0) || !(duration > 0.0) || dt * model.resonance_hz > 0.05 {
        return Err(Error::invalid(
            "need 0 < dt ≤ 0.05 / resonance_hz and positive duration",
        ));
    }
    let w = 2.0 * PI * model.resonance_hz;
    let g = w / model.damping_q;
    let accel = |x: f64, v: f64| w * w * (step_rad - x) - g * v;
    let steps = (duration / dt).ceil() as usize;
    let mut phase = Vec::with_capacity(steps + 1);
    let (mut x, mut v) = (0.0f64, 0.0f64);
    phase.push(x);
    for _ in 0..steps {
        let (k1x, k1v) = (v, accel(x, v));
        let (k2x, k2v) = (
            v + 0.5 * dt * k1v,
            accel(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v),
        );
        let (k3x, k3v) = (
            v + 0.5 * dt * k2v,
            accel(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v),
        );
        let (k4x, k4v) = (v + dt * k3v, accel(x + dt * k3x, v + dt * k3v));
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        phase.push(x);
    }
    let band = 0.05 * step_rad.abs();
    let last_out = phase.iter().rposition(|&p| (p - step_rad).abs() > band);
    let settling_time = match last_out {
        Some(k) => (k + 1) as f64 * dt,
        None => 0.0,
    };
    Ok(StepTrace {
        dt,
        phase,
        settling_time,
    })
}
