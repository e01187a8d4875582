//! From target unitaries and link requests to mesh settings.

mod circuits;
mod decompose;
mod routing;

pub use circuits::{
    build_circuit, format_pairs, ohqe_circuits, ohqe_circuits_with, xor_matching, CircuitId,
};
pub use decompose::{clements_decompose, DecompositionPlan, NodeSetting, UNITARY_TOL};
pub use routing::{
    crossing_cost, exact_split_theta, group_bar_leakage, nominal_setting, program_ideal,
    route_matching, solve_corrected_group, upgrade_to_corrected, CircuitSpec, CorrectedGroup,
    GateRole, LinkCost, NodeGate, RoutedPair,
};
