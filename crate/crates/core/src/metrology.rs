//! Phase sweeps, interference contrasts, link fidelities and unitary
//! magnitude reconstruction.
//!
//! For a pair `(i, j)` routed to a Hadamard with outputs `(n, m)`, sweeping
//! `α`, the phase of input `j` relative to `i`, gives
//! `I_n ∝ |u_ni|² + |u_nj|² + 2|u_ni||u_nj|cos(ψ_n − α)`, and likewise for `m`.
//! Contrasts are min/max of the period-averaged traces.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationRecord;
use crate::compiler::{program_ideal, CircuitSpec};
use crate::emu::{channel_of, ChannelKind, EmulatedChip, SweepSettings};
use crate::linalg::{wrap_angle, CMatrix, RMatrix, C64};
use crate::mesh::{basis_input, MeshState, MeshTopology, NodeAddr};
use crate::{Error, Result};

/// Traces whose peak-to-peak swing is below this many noise standard
/// deviations are flagged unreliable.
pub const RELIABLE_SWING_SIGMAS: f64 = 3.0;

/// Fitted `a + b·cos α + c·sin α`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineFit {
    pub offset: f64,
    pub cos: f64,
    pub sin: f64,
}

impl CosineFit {
    /// Least squares over samples `(α_k, y_k)`.
    pub fn fit(alpha: &[f64], y: &[f64]) -> Result<Self> {
        if alpha.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: alpha.len(),
                found: y.len(),
            });
        }
        let mut ata = [[0.0; 3]; 3];
        let mut aty = [0.0; 3];
        for (&a, &v) in alpha.iter().zip(y) {
            let row = [1.0, a.cos(), a.sin()];
            for r in 0..3 {
                aty[r] += row[r] * v;
                for c in 0..3 {
                    ata[r][c] += row[r] * row[c];
                }
            }
        }
        let x =
            solve3(ata, aty).ok_or_else(|| Error::invalid("degenerate sweep for cosine fit"))?;
        Ok(Self {
            offset: x[0],
            cos: x[1],
            sin: x[2],
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.cos.hypot(self.sin)
    }

    /// `ψ` in `offset + amplitude·cos(α − ψ)`.
    pub fn phase(&self) -> f64 {
        self.sin.atan2(self.cos)
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        self.offset + self.cos * alpha.cos() + self.sin * alpha.sin()
    }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[r].iter_mut().zip(pivot_row).skip(col) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSweepTrace {
    pub pair: (usize, usize),
    pub outputs: (usize, usize),
    pub voltages: Vec<f64>,
    /// Nominal `α` of each sample, from the actuator model.
    pub alpha: Vec<f64>,
    /// `samples_n[period][k]`.
    pub samples_n: Vec<Vec<f64>>,
    pub samples_m: Vec<Vec<f64>>,
    pub mean_n: Vec<f64>,
    pub mean_m: Vec<f64>,
    pub c_plus: f64,
    pub c_minus: f64,
    /// Relative fringe phase of output `m`, with the other phases absorbed.
    pub phi_mj: f64,
    pub max_in: f64,
    pub max_im: f64,
    pub reliable: bool,
}

fn mean_over_periods(samples: &[Vec<f64>]) -> Vec<f64> {
    let p = samples.len() as f64;
    (0..samples[0].len())
        .map(|k| samples.iter().map(|s| s[k]).sum::<f64>() / p)
        .collect()
}

/// Mean per-sample standard deviation across periods.
fn period_noise(samples: &[Vec<f64>], mean: &[f64]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let p = samples.len() as f64;
    let var: f64 = mean
        .iter()
        .enumerate()
        .map(|(k, m)| samples.iter().map(|s| (s[k] - m).powi(2)).sum::<f64>() / (p - 1.0))
        .map(f64::sqrt)
        .sum();
    var / mean.len() as f64
}

fn contrast(trace: &[f64]) -> (f64, f64) {
    let max = trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = trace.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    (if max > 0.0 { min / max } else { 1.0 }, max)
}

impl PhaseSweepTrace {
    /// Builds a trace from raw per-period samples.
    pub fn from_samples(
        pair: (usize, usize),
        outputs: (usize, usize),
        voltages: Vec<f64>,
        alpha: Vec<f64>,
        samples_n: Vec<Vec<f64>>,
        samples_m: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if samples_n.is_empty() || samples_n.len() != samples_m.len() {
            return Err(Error::invalid("sweep needs matching, non-empty periods"));
        }
        for s in samples_n.iter().chain(&samples_m) {
            if s.len() != alpha.len() {
                return Err(Error::DimensionMismatch {
                    expected: alpha.len(),
                    found: s.len(),
                });
            }
        }
        let mean_n = mean_over_periods(&samples_n);
        let mean_m = mean_over_periods(&samples_m);
        let (c_plus, max_in) = contrast(&mean_n);
        let (c_minus, max_im) = contrast(&mean_m);
        let fit_n = CosineFit::fit(&alpha, &mean_n)?;
        let fit_m = CosineFit::fit(&alpha, &mean_m)?;
        // Absorbing ψ_n into the basis leaves ψ_m − ψ_n = −φ_mj.
        let phi_mj = wrap_angle(fit_n.phase() - fit_m.phase());
        let swing = |t: &[f64]| {
            t.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - t.iter().copied().fold(f64::INFINITY, f64::min)
        };
        let ok = |t: &[f64], s: &[Vec<f64>]| {
            let w = swing(t);
            w > 0.0 && w > RELIABLE_SWING_SIGMAS * period_noise(s, t)
        };
        let reliable = ok(&mean_n, &samples_n) && ok(&mean_m, &samples_m);
        Ok(Self {
            pair,
            outputs,
            voltages,
            alpha,
            samples_n,
            samples_m,
            mean_n,
            mean_m,
            c_plus: c_plus.clamp(0.0, 1.0),
            c_minus: c_minus.clamp(0.0, 1.0),
            phi_mj,
            max_in,
            max_im,
            reliable,
        })
    }

    /// `γ_nm = max(I_n)/max(I_m)`.
    pub fn gamma(&self) -> f64 {
        self.max_in / self.max_im
    }
}

/// Swept external shifters for a pair and the relative phase they induce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    /// `(channel, polarity)`.
    pub channels: Vec<(usize, f64)>,
    /// `α = alpha_per_phase · f(v)` for actuator phase `f` at sweep voltage `v`.
    pub alpha_per_phase: f64,
}

/// Chooses external shifters in the first two columns of light so that `α`
/// moves by exactly one unit of actuator phase per unit of `f(v)`.
///
/// Each input's light may only pick up a phase that is uniform over every
/// port it can structurally reach by then: this holds on any chip, leaky
/// bars or not. Where one input's first MZI splits light into the other
/// input's first MZI, both halves must be swept together or the split
/// would change instead of the relative phase.
pub fn sweep_plan(topology: &MeshTopology, i: usize, j: usize) -> Result<SweepPlan> {
    let n = topology.n_modes();
    if i == j || i >= n || j >= n {
        return Err(Error::InvalidPair(i, j));
    }
    let cols: Vec<usize> = topology.light_order().into_iter().take(2).collect();
    let candidates: Vec<NodeAddr> = cols
        .iter()
        .flat_map(|&c| {
            topology
                .nodes()
                .iter()
                .copied()
                .filter(move |nd| nd.col as usize == c)
        })
        .collect();
    // Ports carrying input `x` on entry to each of `cols`.
    let cones = |x: usize| {
        let mut cone = vec![false; n];
        cone[x] = true;
        let mut out = Vec::new();
        for &c in &cols {
            out.push(cone.clone());
            let mut next = cone.clone();
            for nd in topology.nodes().iter().filter(|nd| nd.col as usize == c) {
                let (a, b) = topology.ports(*nd);
                if cone[a] || cone[b] {
                    next[a] = true;
                    next[b] = true;
                }
            }
            cone = next;
        }
        out
    };
    let cone = [cones(i), cones(j)];
    // Phase per unit f picked up by each input; None if non-uniform.
    let phase = |pols: &[f64], x: usize| -> Option<f64> {
        let mut total = 0.0;
        for (k, &c) in cols.iter().enumerate() {
            let mut port_phase = vec![0.0; n];
            for (nd, &pol) in candidates
                .iter()
                .zip(pols)
                .filter(|(nd, _)| nd.col as usize == c)
            {
                let (a, b) = topology.ports(*nd);
                port_phase[a] = 0.5 * pol;
                port_phase[b] = -0.5 * pol;
            }
            let mut seen = (0..n).filter(|&p| cone[x][k][p]).map(|p| port_phase[p]);
            let first = seen.next()?;
            if seen.any(|v| v != first) {
                return None;
            }
            total += first;
        }
        Some(total)
    };
    let mut best: Option<(Vec<f64>, usize)> = None;
    let mut pols = vec![0.0; candidates.len()];
    for code in 0..3usize.pow(candidates.len() as u32) {
        let mut c = code;
        for p in pols.iter_mut() {
            *p = [0.0, 1.0, -1.0][c % 3];
            c /= 3;
        }
        let used = pols.iter().filter(|p| **p != 0.0).count();
        if used == 0 || best.as_ref().is_some_and(|b| b.1 <= used) {
            continue;
        }
        if let (Some(pi), Some(pj)) = (phase(&pols, 0), phase(&pols, 1)) {
            if (pj - pi).abs() == 1.0 {
                best = Some((pols.clone(), used));
            }
        }
    }
    let (mut pols, _) = best.ok_or(Error::InvalidPair(i, j))?;
    // Global sign is free; the first swept shifter runs with positive polarity.
    if pols.iter().find(|p| **p != 0.0) == Some(&-1.0) {
        pols.iter_mut().for_each(|p| *p = -*p);
    }
    let mut channels = Vec::new();
    for (nd, &pol) in candidates.iter().zip(&pols).filter(|(_, p)| **p != 0.0) {
        channels.push((channel_of(topology, *nd, ChannelKind::External)?, pol));
    }
    let alpha_per_phase = phase(&pols, 1).unwrap() - phase(&pols, 0).unwrap();
    Ok(SweepPlan {
        channels,
        alpha_per_phase,
    })
}

/// Sweeps the relative phase of routed pair `(i, j)` with equal unit input
/// powers. The chip must already be programmed for `circuit`.
pub fn run_phase_sweep(
    chip: &mut EmulatedChip,
    circuit: &CircuitSpec,
    pair: (usize, usize),
    settings: &SweepSettings,
) -> Result<PhaseSweepTrace> {
    let routed = circuit
        .pair_for_inputs(pair.0, pair.1)
        .ok_or(Error::InvalidPair(pair.0, pair.1))?;
    let (i, j) = routed.inputs;
    let (n, m) = routed.outputs;
    let plan = sweep_plan(chip.topology(), i, j)?;
    let mut inputs = vec![C64::new(0.0, 0.0); chip.n_modes()];
    inputs[i] = C64::new(1.0, 0.0);
    inputs[j] = C64::new(1.0, 0.0);
    let rec = chip.sawtooth_sweep(&inputs, &plan.channels, settings)?;
    let act = *chip.actuator();
    let alpha: Vec<f64> = rec
        .voltages
        .iter()
        .map(|&v| plan.alpha_per_phase * act.phase(v))
        .collect();
    let take = |port: usize| {
        rec.samples
            .iter()
            .map(|p| p.iter().map(|s| s[port]).collect())
            .collect()
    };
    PhaseSweepTrace::from_samples(
        (i, j),
        (n, m),
        rec.voltages.clone(),
        alpha,
        take(n),
        take(m),
    )
}

fn check_contrast(c: f64) -> Result<()> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(Error::ContrastOutOfRange(c))
    }
}

/// Heralded Bell-state fidelity from a fringe contrast, `(1/(1+C))^½`.
pub fn link_fidelity(c: f64) -> Result<f64> {
    check_contrast(c)?;
    Ok((1.0 / (1.0 + c)).sqrt())
}

/// `−` fidelity against the fixed singlet-like target, without removing the
/// measured fringe phase `φ_mj`.
pub fn link_fidelity_uncorrected(c: f64, phi_mj: f64) -> Result<f64> {
    check_contrast(c)?;
    Ok(FRAC_1_SQRT_2 * (1.0 - phi_mj.cos() * (1.0 - c) / (1.0 + c)).max(0.0).sqrt())
}

/// Contrast of the fringe produced by two paths of the given magnitudes.
pub fn contrast_from_magnitudes(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s == 0.0 {
        1.0
    } else {
        ((a - b) / s).powi(2)
    }
}

/// Overlap fidelity with the phase-corrected target, from the two
/// amplitudes reaching one detector.
pub fn overlap_fidelity(a: f64, b: f64) -> f64 {
    (a + b) / (2.0 * (a * a + b * b)).sqrt()
}

/// Overlap fidelity with `(|↑↓⟩ ± |↓↑⟩)/√2` for complex amplitudes, no correction.
pub fn overlap_fidelity_signed(a: C64, b: C64, sign: f64) -> f64 {
    (a + b * sign).norm() / (2.0 * (a.norm_sqr() + b.norm_sqr())).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub pair: (usize, usize),
    pub outputs: (usize, usize),
    pub c_plus: f64,
    pub c_minus: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    /// `−` fidelity before fringe-phase correction.
    pub f_minus_uncorrected: f64,
    pub phi_mj: f64,
    pub gamma_nm: f64,
    pub reliable: bool,
}

impl LinkReport {
    pub fn from_trace(t: &PhaseSweepTrace) -> Result<Self> {
        Ok(Self {
            pair: t.pair,
            outputs: t.outputs,
            c_plus: t.c_plus,
            c_minus: t.c_minus,
            f_plus: link_fidelity(t.c_plus)?,
            f_minus: link_fidelity(t.c_minus)?,
            f_minus_uncorrected: link_fidelity_uncorrected(t.c_minus, t.phi_mj)?,
            phi_mj: t.phi_mj,
            gamma_nm: t.gamma(),
            reliable: t.reliable,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryEstimate {
    /// Estimated `|u_kj|`, columns normalized.
    pub magnitudes: RMatrix,
    /// Total γ-corrected detected power per input.
    pub i_tot: Vec<f64>,
    /// `(n, m, γ_nm)` applied to output `m`.
    pub gammas: Vec<(usize, usize, f64)>,
    pub fidelity: Option<f64>,
}

/// Sends light into one input at a time, scales output `m` of every Hadamard
/// pair by its `γ_nm`, and normalizes each column by its total power.
/// `traces` must cover every pair of `circuit`.
pub fn reconstruct_unitary(
    chip: &mut EmulatedChip,
    circuit: &CircuitSpec,
    traces: &[PhaseSweepTrace],
) -> Result<UnitaryEstimate> {
    let n = chip.n_modes();
    let mut gammas = Vec::new();
    for p in &circuit.pairs {
        let t = traces
            .iter()
            .find(|t| t.outputs == p.outputs)
            .ok_or(Error::MissingSweep(p.outputs.0, p.outputs.1))?;
        gammas.push((p.outputs.0, p.outputs.1, t.gamma()));
    }
    let mut magnitudes = RMatrix::zeros(n, n);
    let mut i_tot = Vec::with_capacity(n);
    for j in 0..n {
        let mut out = chip.read_detectors(&basis_input(n, j))?.outputs;
        for &(_, m, g) in &gammas {
            out[m] *= g;
        }
        let tot: f64 = out.iter().sum();
        for (k, &p) in out.iter().enumerate() {
            magnitudes[(k, j)] = if tot > 0.0 { (p / tot).sqrt() } else { 0.0 };
        }
        i_tot.push(tot);
    }
    let ideal = ideal_unitary(circuit, chip.fabricated())?.magnitudes();
    let fidelity = Some(unitary_fidelity(&ideal, &magnitudes)?);
    Ok(UnitaryEstimate {
        magnitudes,
        i_tot,
        gammas,
        fidelity,
    })
}

/// Target transformation of a circuit: its routing on a lossless ideal mesh.
pub fn ideal_unitary(circuit: &CircuitSpec, like: &MeshState) -> Result<CMatrix> {
    let mut st = MeshState::lossless(like.topology.clone());
    program_ideal(circuit, &mut st)?;
    Ok(st.transfer())
}

/// `(1/N)·Tr(|U_ideal|ᵀ·|U_exp|)`.
pub fn unitary_fidelity(ideal: &RMatrix, exp: &RMatrix) -> Result<f64> {
    if ideal.rows() != exp.rows() || ideal.cols() != exp.cols() {
        return Err(Error::DimensionMismatch {
            expected: ideal.rows() * ideal.cols(),
            found: exp.rows() * exp.cols(),
        });
    }
    let mut s = 0.0;
    for r in 0..ideal.rows() {
        for c in 0..ideal.cols() {
            s += ideal[(r, c)] * exp[(r, c)];
        }
    }
    Ok(s / ideal.cols() as f64)
}

/// All metrology of one programmed circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitReport {
    pub circuit: alloc::string::String,
    pub links: Vec<LinkReport>,
    pub unitary: UnitaryEstimate,
    pub traces: Vec<PhaseSweepTrace>,
}

impl CircuitReport {
    /// Both fidelities of every link, `F⁺` then `F⁻` per pair.
    pub fn fidelities(&self) -> Vec<f64> {
        self.links
            .iter()
            .flat_map(|l| [l.f_plus, l.f_minus])
            .collect()
    }
}

/// Programs `circuit` from `record`, sweeps every pair and reconstructs |U|.
pub fn measure_circuit(
    chip: &mut EmulatedChip,
    record: &CalibrationRecord,
    circuit: &CircuitSpec,
    settings: &SweepSettings,
) -> Result<CircuitReport> {
    let frame = record.frame_for_circuit(circuit, chip.topology())?;
    chip.apply_frame(&frame)?;
    let mut traces = Vec::with_capacity(circuit.pairs.len());
    for p in &circuit.pairs {
        traces.push(run_phase_sweep(chip, circuit, p.inputs, settings)?);
    }
    let links = traces
        .iter()
        .map(LinkReport::from_trace)
        .collect::<Result<Vec<_>>>()?;
    let unitary = reconstruct_unitary(chip, circuit, &traces)?;
    Ok(CircuitReport {
        circuit: circuit.name.clone(),
        links,
        unitary,
        traces,
    })
}

/// Closed-form fringe `|A|² + |B|² + 2|A||B|cos(ψ − α)`, `ψ = arg A − arg B`,
/// for the field `A + B·e^{iα}`.
pub fn fringe(a: C64, b: C64, alpha: f64) -> f64 {
    let psi = a.arg() - b.arg();
    a.norm_sqr() + b.norm_sqr() + 2.0 * a.norm() * b.norm() * (psi - alpha).cos()
}

/// Magnitude fidelity of two uniform columns: used as a sanity reference.
pub fn uniform_fidelity_reference(n: usize) -> f64 {
    // Two entries 1/√2 against n entries 1/√n, per column.
    2.0 * FRAC_1_SQRT_2 / (n as f64).sqrt()
}
