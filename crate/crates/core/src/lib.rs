//! Simulation, compilation, calibration and fidelity analysis for programmable
//! N×N Mach-Zehnder interferometer meshes.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command line
//! front end and the Monte Carlo harness live in the `photomesh` crate.
//!
//! Module map:
//!
//! - [`mesh`]: MZI physics and exact transfer matrices of the reversed Clements mesh.
//! - [`compiler`]: Clements decompositions, OHQE circuit routing and crossing upgrades.
//! - [`emu`]: voltage-level chip emulator with hidden fabrication offsets.
//! - [`calibration`]: bar/cross, double-MZI and Hadamard calibration against the emulator.
//! - [`metrology`]: phase sweeps, contrasts, link fidelities and unitary reconstruction.
//! - [`herald`]: single-photon heralding state vectors, an independent fidelity oracle.
//! - [`lattice`]: cluster-graph assembly, Z-measurement and link scheduling.
#![no_std]
#![forbid(unsafe_code)]
// `!(x <= hi)` rejects NaN together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod calibration;
pub mod compiler;
pub mod emu;
mod error;
pub mod herald;
pub mod lattice;
pub mod linalg;
pub mod mesh;
pub mod metrology;
pub mod optimize;

pub use error::{Error, Result};
pub use linalg::{CMatrix, RMatrix, C64};
pub use mesh::{MeshState, MeshTopology, MziParams, NodeAddr};

/// Maximum magnitude of a drive voltage on any channel, in volts.
pub const V_MAX: f64 = 25.0;

/// Converts a power ratio in dB to a linear power factor.
pub fn db_to_power(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// Converts a power ratio in dB to a linear amplitude factor.
pub fn db_to_amplitude(db: f64) -> f64 {
    libm::pow(10.0, db / 20.0)
}

/// Converts a linear power factor to dB.
pub fn power_to_db(p: f64) -> f64 {
    10.0 * libm::log10(p)
}
