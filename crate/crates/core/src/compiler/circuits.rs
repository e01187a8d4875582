//! The entanglement circuits: four cube-cell matchings plus five alternatives
//! completing all-to-all connectivity.
//!
//! With inputs labelled by 3-bit indices `0..8`, each circuit pairs every input
//! with the one that differs by a fixed bit mask. The masks 1, 2 and 4 are the
//! three edge directions of a cube; mask 3 gives the optional pairs
//! `(1,4), (2,3), (5,8), (6,7)` (1-based). The seven nonzero masks partition
//! all 28 pairs.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::routing::{route_matching, upgrade_to_corrected, CircuitSpec};
use crate::mesh::MeshTopology;
use crate::{Error, Result};

/// Named circuit configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CircuitId {
    C1,
    C2,
    C3,
    C4,
    Alt3,
    Alt4,
    Alt5,
    Alt6,
    Alt7,
}

impl CircuitId {
    pub const MAIN: [CircuitId; 4] = [Self::C1, Self::C2, Self::C3, Self::C4];
    pub const ALTERNATIVES: [CircuitId; 5] =
        [Self::Alt3, Self::Alt4, Self::Alt5, Self::Alt6, Self::Alt7];
    pub const ALL: [CircuitId; 9] = [
        Self::C1,
        Self::C2,
        Self::C3,
        Self::C4,
        Self::Alt3,
        Self::Alt4,
        Self::Alt5,
        Self::Alt6,
        Self::Alt7,
    ];

    /// Bit mask defining the default matching `i ↔ i XOR mask`.
    pub fn mask(self) -> usize {
        match self {
            Self::C1 => 1,
            Self::C2 => 3,
            Self::C3 | Self::Alt3 => 4,
            Self::C4 | Self::Alt4 => 2,
            Self::Alt5 => 5,
            Self::Alt6 => 6,
            Self::Alt7 => 7,
        }
    }

    /// Default matching for an 8-port mesh, 0-based and sorted.
    pub fn default_matching(self) -> Vec<(usize, usize)> {
        xor_matching(8, self.mask())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::C1 => "1",
            Self::C2 => "2",
            Self::C3 => "3",
            Self::C4 => "4",
            Self::Alt3 => "alt3",
            Self::Alt4 => "alt4",
            Self::Alt5 => "alt5",
            Self::Alt6 => "alt6",
            Self::Alt7 => "alt7",
        }
    }
}

impl fmt::Display for CircuitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CircuitId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid(alloc::format!("unknown circuit id '{s}'")))
    }
}

/// `{(i, i ^ mask) : i < i ^ mask}`.
pub fn xor_matching(n: usize, mask: usize) -> Vec<(usize, usize)> {
    (0..n)
        .filter(|&i| i < i ^ mask && (i ^ mask) < n)
        .map(|i| (i, i ^ mask))
        .collect()
}

/// Routes `matching` and upgrades every crossing that has a free span.
pub fn build_circuit(
    name: &str,
    matching: &[(usize, usize)],
    topology: &MeshTopology,
) -> Result<CircuitSpec> {
    let routed = route_matching(matching, topology)?;
    let (mut spec, rejected) = upgrade_to_corrected(&routed, topology, None)?;
    for e in rejected {
        log::debug!("circuit {name}: {e}");
    }
    spec.name = name.to_string();
    Ok(spec)
}

/// The configured circuits. `overrides` replaces default matchings by id.
pub fn ohqe_circuits_with(
    topology: &MeshTopology,
    overrides: &[(CircuitId, Vec<(usize, usize)>)],
) -> Result<Vec<(CircuitId, CircuitSpec)>> {
    CircuitId::ALL
        .iter()
        .map(|&id| {
            let matching = overrides
                .iter()
                .find(|(o, _)| *o == id)
                .map(|(_, m)| m.clone())
                .unwrap_or_else(|| id.default_matching());
            Ok((id, build_circuit(id.as_str(), &matching, topology)?))
        })
        .collect()
}

/// Circuits (1)–(4) and the five alternatives on the 8×8 reversed mesh.
pub fn ohqe_circuits() -> Vec<(CircuitId, CircuitSpec)> {
    ohqe_circuits_with(&MeshTopology::reversed(8), &[]).expect("default circuits route")
}

/// Human-readable 1-based pair list, e.g. `(1,2) (3,4)`.
pub fn format_pairs(pairs: &[(usize, usize)]) -> String {
    let parts: Vec<String> = pairs
        .iter()
        .map(|(a, b)| alloc::format!("({},{})", a + 1, b + 1))
        .collect();
    parts.join(" ")
}
