//! Clements decomposition in the standard and reversed (upper-right nulling) forms.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::linalg::{mat2_adjoint, mat2_diag, mat2_mul, Mat2, C64};
use crate::mesh::{mzi_transfer, MeshState, MeshTopology, MziParams, NodeAddr, Orientation};
use crate::{CMatrix, Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Input unitaries must satisfy `‖U†U − I‖_max` below this.
pub const UNITARY_TOL: f64 = 1e-10;

/// Target entries below this are treated as already nulled.
const DEGENERATE: f64 = 1e-300;

/// One programmed MZI: differential internal and external phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSetting {
    pub node: NodeAddr,
    pub theta_diff: f64,
    pub phi: f64,
}

/// Mesh settings reproducing a target unitary up to an output phase screen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionPlan {
    pub n_modes: usize,
    pub orientation: Orientation,
    /// Settings in light order.
    pub settings: Vec<NodeSetting>,
    /// Output phases `δ_k`: `U = diag(e^{iδ}) · mesh`.
    pub phase_screen: Vec<f64>,
    /// Modulus of each nulled entry right after its nulling step.
    pub null_residuals: Vec<f64>,
}

impl DecompositionPlan {
    pub fn topology(&self) -> MeshTopology {
        MeshTopology::with_orientation(self.n_modes, self.orientation)
    }

    /// Writes the settings into `state` (which must share the plan's topology).
    pub fn apply(&self, state: &mut MeshState) -> Result<()> {
        if state.topology.n_modes() != self.n_modes
            || state.topology.orientation() != self.orientation
        {
            return Err(Error::invalid("plan and state topologies differ"));
        }
        for s in &self.settings {
            state
                .params_mut(s.node)?
                .set_differential(s.theta_diff, s.phi);
        }
        Ok(())
    }

    /// A lossless ideal mesh programmed with this plan.
    pub fn lossless_state(&self) -> MeshState {
        let mut st = MeshState::lossless(self.topology());
        self.apply(&mut st).expect("plan matches its own topology");
        st
    }

    pub fn phase_screen_matrix(&self) -> CMatrix {
        let d: Vec<C64> = self
            .phase_screen
            .iter()
            .map(|&a| C64::from_polar(1.0, a))
            .collect();
        CMatrix::diagonal(&d)
    }

    /// `diag(e^{iδ}) · mesh_transfer(lossless plan)`.
    pub fn reconstruct(&self) -> CMatrix {
        &self.phase_screen_matrix() * &self.lossless_state().transfer()
    }

    /// CSV rows `col,row,theta_diff_rad,phi_rad` in light order.
    pub fn to_csv(&self) -> alloc::string::String {
        use core::fmt::Write;
        let mut s = alloc::string::String::from("col,row,theta_diff_rad,phi_rad\n");
        for x in &self.settings {
            let _ = writeln!(
                s,
                "{},{},{:.17e},{:.17e}",
                x.node.col, x.node.row, x.theta_diff, x.phi
            );
        }
        s
    }
}

/// Ideal lossless MZI block for a differential setting.
pub(crate) fn ideal_block(theta_diff: f64, phi: f64) -> Mat2 {
    mzi_transfer(&MziParams::lossless().with_differential(theta_diff, phi))
}

#[derive(Clone, Copy)]
enum Side {
    /// `T` applied to rows `(k, k+1)` from the left.
    Left,
    /// `T⁻¹` applied to columns `(k, k+1)` from the right.
    Right,
}

#[derive(Clone, Copy)]
struct Op {
    side: Side,
    k: usize,
    theta: f64,
    phi: f64,
}

/// Setting of a left `T` on `(x, y)` (a column slice) nulling the top (`null_first`)
/// or bottom output.
fn left_null(x: C64, y: C64, null_first: bool) -> (f64, f64) {
    if x.norm() < DEGENERATE && y.norm() < DEGENERATE {
        return (PI, 0.0);
    }
    if null_first {
        (2.0 * y.norm().atan2(x.norm()), y.arg() - x.arg() + PI)
    } else {
        (2.0 * x.norm().atan2(y.norm()), y.arg() - x.arg())
    }
}

/// Setting of a right `T⁻¹` on `(x, y)` (a row slice) nulling the first or second entry.
fn right_null(x: C64, y: C64, null_first: bool) -> (f64, f64) {
    if x.norm() < DEGENERATE && y.norm() < DEGENERATE {
        return (PI, 0.0);
    }
    if null_first {
        (2.0 * y.norm().atan2(x.norm()), x.arg() - y.arg() + PI)
    } else {
        (2.0 * x.norm().atan2(y.norm()), x.arg() - y.arg())
    }
}

/// Decomposes `u` for the given orientation.
///
/// `Orientation::Standard` uses the usual alternating nulling of the lower-left
/// triangle. `Orientation::Reversed` nulls the upper-right triangle so the
/// output-side column ends up at the light exit, matching the fabricated layout.
pub fn clements_decompose(u: &CMatrix, orientation: Orientation) -> Result<DecompositionPlan> {
    let n = u.rows();
    if !u.is_square() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u.cols(),
        });
    }
    if n < 2 {
        return Err(Error::invalid("decomposition needs at least two modes"));
    }
    let err = u.unitarity_error();
    if !(err < UNITARY_TOL) {
        return Err(Error::NotUnitary(err));
    }

    let mut w = u.clone();
    let mut ops: Vec<Op> = Vec::new();
    let mut residuals = Vec::new();
    let mut apply = |w: &mut CMatrix, op: Op, target: (usize, usize), residuals: &mut Vec<f64>| {
        let t = ideal_block(op.theta, op.phi);
        match op.side {
            Side::Left => w.apply_rows(op.k, &t),
            Side::Right => w.apply_cols(op.k, &mat2_adjoint(&t)),
        }
        residuals.push(w[target].norm());
        ops.push(op);
    };

    for i in 0..n - 1 {
        match (orientation, i % 2 == 0) {
            (Orientation::Standard, true) => {
                for j in 0..=i {
                    let (r, k) = (n - 1 - j, i - j);
                    let (t, p) = right_null(w[(r, k)], w[(r, k + 1)], true);
                    apply(
                        &mut w,
                        Op {
                            side: Side::Right,
                            k,
                            theta: t,
                            phi: p,
                        },
                        (r, k),
                        &mut residuals,
                    );
                }
            }
            (Orientation::Standard, false) => {
                for j in 1..=i + 1 {
                    let (k, c) = (n + j - i - 3, j - 1);
                    let (t, p) = left_null(w[(k, c)], w[(k + 1, c)], false);
                    apply(
                        &mut w,
                        Op {
                            side: Side::Left,
                            k,
                            theta: t,
                            phi: p,
                        },
                        (k + 1, c),
                        &mut residuals,
                    );
                }
            }
            (Orientation::Reversed, true) => {
                for j in 0..=i {
                    let (k, c) = (i - j, n - 1 - j);
                    let (t, p) = left_null(w[(k, c)], w[(k + 1, c)], true);
                    apply(
                        &mut w,
                        Op {
                            side: Side::Left,
                            k,
                            theta: t,
                            phi: p,
                        },
                        (k, c),
                        &mut residuals,
                    );
                }
            }
            (Orientation::Reversed, false) => {
                for j in 1..=i + 1 {
                    let (r, k) = (j - 1, n + j - i - 3);
                    let (t, p) = right_null(w[(r, k)], w[(r, k + 1)], false);
                    apply(
                        &mut w,
                        Op {
                            side: Side::Right,
                            k,
                            theta: t,
                            phi: p,
                        },
                        (r, k + 1),
                        &mut residuals,
                    );
                }
            }
        }
    }

    // `w = L_m⋯L_1 · u · R_1⁻¹⋯R_p⁻¹` is now diagonal, so
    // `u = L_1⁻¹⋯L_m⁻¹ · D · R_p⋯R_1`. Push each `L⁻¹` through `D`, last first.
    let mut d: Vec<C64> = (0..n).map(|k| w[(k, k)]).collect();
    let mut pushed: Vec<(usize, f64, f64)> = Vec::new();
    for op in ops.iter().rev().filter(|o| matches!(o.side, Side::Left)) {
        let m = mat2_mul(
            &mat2_adjoint(&ideal_block(op.theta, op.phi)),
            &mat2_diag(d[op.k], d[op.k + 1]),
        );
        let (theta, phi, d0, d1) = factor_diag_times_block(&m);
        d[op.k] = d0;
        d[op.k + 1] = d1;
        pushed.push((op.k, theta, phi));
    }
    // Light order: R_1 … R_p, then the pushed blocks from the innermost outwards.
    let mut sequence: Vec<(usize, f64, f64)> = ops
        .iter()
        .filter(|o| matches!(o.side, Side::Right))
        .map(|o| (o.k, o.theta, o.phi))
        .collect();
    sequence.extend(pushed);

    let topology = MeshTopology::with_orientation(n, orientation);
    let settings = schedule(&topology, &sequence)?;
    Ok(DecompositionPlan {
        n_modes: n,
        orientation,
        settings,
        phase_screen: d.iter().map(|z| z.arg()).collect(),
        null_residuals: residuals,
    })
}

/// Factors a 2×2 unitary `m` as `diag(d0, d1) · T(θ, φ)`.
fn factor_diag_times_block(m: &Mat2) -> (f64, f64, C64, C64) {
    let theta = 2.0 * m[0][0].norm().atan2(m[0][1].norm());
    let phi = if m[0][0].norm() > 1e-14 && m[0][1].norm() > 1e-14 {
        m[0][0].arg() - m[0][1].arg()
    } else {
        0.0
    };
    let t = ideal_block(theta, phi);
    let pick = |a: C64, ta: C64, b: C64, tb: C64| {
        let z = if ta.norm() >= tb.norm() {
            a / ta
        } else {
            b / tb
        };
        z / z.norm()
    };
    let d0 = pick(m[0][0], t[0][0], m[0][1], t[0][1]);
    let d1 = pick(m[1][0], t[1][0], m[1][1], t[1][1]);
    (theta, phi, d0, d1)
}

/// Places light-ordered operations on mesh nodes, each at the earliest column
/// of the right parity after the previous operation on either of its modes.
fn schedule(topology: &MeshTopology, sequence: &[(usize, f64, f64)]) -> Result<Vec<NodeSetting>> {
    let n = topology.n_modes();
    let mut next_step = vec![0usize; n];
    let mut placed = Vec::with_capacity(sequence.len());
    let mut used = vec![false; topology.node_count()];
    for &(k, theta, phi) in sequence {
        let mut step = next_step[k].max(next_step[k + 1]);
        while step < topology.n_columns() && topology.column_at_step(step) % 2 != k % 2 {
            step += 1;
        }
        let node = (step < topology.n_columns())
            .then(|| topology.node_at(topology.column_at_step(step), k))
            .flatten()
            .ok_or_else(|| Error::invalid("decomposition does not fit the mesh"))?;
        let idx = topology.index_of(node).expect("node from topology");
        if used[idx] {
            return Err(Error::invalid(
                "decomposition placed two operations on one node",
            ));
        }
        used[idx] = true;
        next_step[k] = step + 1;
        next_step[k + 1] = step + 1;
        placed.push((
            step,
            NodeSetting {
                node,
                theta_diff: theta,
                phi,
            },
        ));
    }
    placed.sort_by_key(|(step, s)| (*step, s.node.row));
    Ok(placed.into_iter().map(|(_, s)| s).collect::<Vec<_>>())
}
