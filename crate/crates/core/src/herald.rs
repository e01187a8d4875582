//! Two remote spins sharing one emitted photon, propagated through a mesh
//! transfer matrix and heralded on a single detector.
//!
//! Only the single-photon subspace is kept: spin `i` emits into input `i` in
//! the `|↑_i↓_j⟩` branch, spin `j` into input `j` in the `|↓_i↑_j⟩` branch.
//! Double emission and vacuum terms are dropped. This is a state-vector model
//! kept independent of [`crate::metrology`] so the two can check each other.

use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, C64};
use crate::{Error, Result};

const NORM_TOL: f64 = 1e-12;

/// Photon amplitudes per output mode, one vector per spin branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSpinPhotonState {
    /// Photon in mode `k` with spins `|↑_i↓_j⟩`.
    pub a: Vec<C64>,
    /// Photon in mode `k` with spins `|↓_i↑_j⟩`.
    pub b: Vec<C64>,
    /// True when the amplitudes carry unit total norm.
    pub normalized: bool,
}

impl TwoSpinPhotonState {
    pub fn n_modes(&self) -> usize {
        self.a.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a.iter().chain(&self.b).map(|z| z.norm_sqr()).sum()
    }

    /// Probability of a click on detector `k`, from the unnormalized state.
    pub fn detection_probability(&self, k: usize) -> f64 {
        self.a[k].norm_sqr() + self.b[k].norm_sqr()
    }
}

/// Spin superposition `up_down·|↑↓⟩ + down_up·|↓↑⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    pub up_down: C64,
    pub down_up: C64,
}

impl SpinState {
    pub fn norm_sqr(&self) -> f64 {
        self.up_down.norm_sqr() + self.down_up.norm_sqr()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellSign {
    Plus,
    Minus,
}

impl BellSign {
    pub fn value(self) -> f64 {
        match self {
            BellSign::Plus => 1.0,
            BellSign::Minus => -1.0,
        }
    }
}

/// `(|↑↓⟩ ± e^{iφ}|↓↑⟩)/√2`, with `φ = 0` when uncorrected.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellTarget {
    pub sign: BellSign,
    pub correction: Option<f64>,
}

impl BellTarget {
    pub const PLUS: BellTarget = BellTarget {
        sign: BellSign::Plus,
        correction: None,
    };
    pub const MINUS: BellTarget = BellTarget {
        sign: BellSign::Minus,
        correction: None,
    };

    /// Target for the second detector of a Hadamard pair given the measured
    /// fringe phase `φ_mj`: relative phase `e^{iφ_mj}`, which is `|Ψ⁻⟩` at
    /// the ideal `φ_mj = π`.
    pub fn from_fringe_phase(phi_mj: f64) -> Self {
        BellTarget {
            sign: BellSign::Minus,
            correction: Some(phi_mj - core::f64::consts::PI),
        }
    }

    /// The `|↓↑⟩` coefficient relative to `|↑↓⟩`.
    pub fn relative_phase(&self) -> C64 {
        C64::from_polar(1.0, self.correction.unwrap_or(0.0)) * self.sign.value()
    }
}

/// Both spins emit with equal amplitude; the photon then evolves under `u`.
/// `a_k = u_ki/√2`, `b_k = u_kj/√2`.
pub fn emit_and_propagate(pair: (usize, usize), u: &CMatrix) -> Result<TwoSpinPhotonState> {
    let (i, j) = pair;
    let n = u.cols();
    if i == j {
        return Err(Error::InvalidPair(i, j));
    }
    for p in [i, j] {
        if p >= n {
            return Err(Error::PortOutOfRange(p, n));
        }
    }
    let a: Vec<C64> = (0..u.rows()).map(|k| u[(k, i)] * FRAC_1_SQRT_2).collect();
    let b: Vec<C64> = (0..u.rows()).map(|k| u[(k, j)] * FRAC_1_SQRT_2).collect();
    let mut state = TwoSpinPhotonState {
        a,
        b,
        normalized: false,
    };
    state.normalized = (state.norm_sqr() - 1.0).abs() < NORM_TOL;
    Ok(state)
}

/// Projects onto a click at `k`. Returns the renormalized spin state and the
/// unconditional click probability; under loss these sum over detectors to
/// the total transmission.
pub fn herald(state: &TwoSpinPhotonState, k: usize) -> Result<(SpinState, f64)> {
    if k >= state.n_modes() {
        return Err(Error::PortOutOfRange(k, state.n_modes()));
    }
    let prob = state.detection_probability(k);
    if prob == 0.0 {
        return Err(Error::ZeroHeraldProbability(k));
    }
    let s = prob.sqrt();
    let post = SpinState {
        up_down: state.a[k] / s,
        down_up: state.b[k] / s,
    };
    Ok((post, prob))
}

/// `|⟨target|post⟩|` for a normalized post-herald state.
pub fn bell_fidelity(post: &SpinState, target: &BellTarget) -> f64 {
    (post.up_down + target.relative_phase().conj() * post.down_up).norm() * FRAC_1_SQRT_2
}
