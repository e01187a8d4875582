//! Bar/cross routing of input pairs onto output Hadamards and double-MZI upgrades.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::linalg::{mat2_apply, C64, ZERO};
use crate::mesh::{mzi_transfer, MeshState, MeshTopology, NodeAddr, Orientation};
use crate::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// What a node does inside a routed circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateRole {
    Bar,
    CrossSingle,
    /// Splitting member of a double-MZI crossing (first in light order).
    CorrectedLeft,
    /// Bar-state node carrying one arm of a double-MZI crossing.
    CorrectedIntermediate,
    /// Recombining member of a double-MZI crossing; its external phase closes the loop.
    CorrectedRight,
    Hadamard,
    Unused,
}

impl GateRole {
    pub fn is_corrected_member(self) -> bool {
        matches!(
            self,
            Self::CorrectedLeft | Self::CorrectedIntermediate | Self::CorrectedRight
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeGate {
    pub node: NodeAddr,
    pub role: GateRole,
}

/// Three-column double-MZI crossing replacing one single-MZI cross.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectedGroup {
    pub left: NodeAddr,
    pub intermediates: Vec<NodeAddr>,
    pub right: NodeAddr,
}

impl CorrectedGroup {
    pub fn members(&self) -> impl Iterator<Item = NodeAddr> + '_ {
        core::iter::once(self.left)
            .chain(self.intermediates.iter().copied())
            .chain(core::iter::once(self.right))
    }
}

/// Route of one requested pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutedPair {
    /// Input ports (0-based).
    pub inputs: (usize, usize),
    /// Output ports `(n, m)`: top and bottom of the Hadamard.
    pub outputs: (usize, usize),
    pub hadamard: NodeAddr,
    /// Uncorrected single-MZI crossings traversed by either input.
    pub uncorrected_crossings: usize,
}

/// Node programming for a set of disjoint input pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub name: String,
    pub n_modes: usize,
    /// Requested pairs as given, 0-based.
    pub matching: Vec<(usize, usize)>,
    /// Every node in topology order.
    pub gates: Vec<NodeGate>,
    pub pairs: Vec<RoutedPair>,
    pub groups: Vec<CorrectedGroup>,
    /// Which input each routing crossing swapped, for crossing costs:
    /// `(node, input on its top port, input on its bottom port)`.
    pub crossings: Vec<(NodeAddr, usize, usize)>,
}

/// Per-pair count of uncorrected crossings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkCost {
    pub pair: (usize, usize),
    pub uncorrected_crossings: usize,
}

impl CircuitSpec {
    pub fn role(&self, node: NodeAddr) -> Option<GateRole> {
        self.gates.iter().find(|g| g.node == node).map(|g| g.role)
    }

    fn set_role(&mut self, node: NodeAddr, role: GateRole) {
        if let Some(g) = self.gates.iter_mut().find(|g| g.node == node) {
            g.role = role;
        }
    }

    pub fn crossing_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| g.role == GateRole::CrossSingle)
            .count()
    }

    pub fn link_costs(&self) -> Vec<LinkCost> {
        self.pairs
            .iter()
            .map(|p| LinkCost {
                pair: p.inputs,
                uncorrected_crossings: p.uncorrected_crossings,
            })
            .collect()
    }

    pub fn pair_for_inputs(&self, i: usize, j: usize) -> Option<&RoutedPair> {
        self.pairs
            .iter()
            .find(|p| p.inputs == (i, j) || p.inputs == (j, i))
    }

    fn recount(&mut self) {
        for pair in &mut self.pairs {
            let (i, j) = pair.inputs;
            pair.uncorrected_crossings = self
                .crossings
                .iter()
                .filter(|(node, a, b)| {
                    let single = self
                        .gates
                        .iter()
                        .any(|g| g.node == *node && g.role == GateRole::CrossSingle);
                    single && [i, j].iter().any(|t| t == a || t == b)
                })
                .count();
        }
    }
}

fn check_matching(matching: &[(usize, usize)], n: usize) -> Result<()> {
    let mut seen = BTreeSet::new();
    for &(i, j) in matching {
        if i >= n {
            return Err(Error::PortOutOfRange(i, n));
        }
        if j >= n {
            return Err(Error::PortOutOfRange(j, n));
        }
        if i == j || !seen.insert(i) || !seen.insert(j) {
            return Err(Error::InvalidPair(i, j));
        }
    }
    if matching.len() > n / 2 {
        return Err(Error::Unroutable(format!(
            "{} pairs exceed {} Hadamards",
            matching.len(),
            n / 2
        )));
    }
    Ok(())
}

/// Result of sorting tokens through the routing columns.
struct Sorted {
    cross: Vec<bool>,
    crossings: Vec<(NodeAddr, usize, usize)>,
    ok: bool,
}

/// Odd-even transposition through every column except the output column:
/// a node crosses exactly when its two tokens are out of destination order.
fn transposition_route(topo: &MeshTopology, dest: &[usize]) -> Sorted {
    let n = topo.n_modes();
    // token[p] = the input currently on port p.
    let mut token: Vec<usize> = (0..n).collect();
    let mut cross = vec![false; topo.node_count()];
    let mut crossings = Vec::new();
    let out_col = topo.output_column();
    for col in topo.light_order() {
        if col == out_col {
            break;
        }
        for row in 0..topo.rows_in_column(col) {
            let node = NodeAddr::new(col as u8, row as u8);
            let (p, q) = topo.ports(node);
            if dest[token[p]] > dest[token[q]] {
                cross[topo.index_of(node).expect("node")] = true;
                crossings.push((node, token[p], token[q]));
                token.swap(p, q);
            }
        }
    }
    let ok = (0..n).all(|p| dest[token[p]] == p);
    Sorted {
        cross,
        crossings,
        ok,
    }
}

/// Lexicographic enumeration of injective slot assignments.
fn for_each_assignment(pairs: usize, slots: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(
        k: usize,
        pairs: usize,
        slots: usize,
        cur: &mut Vec<usize>,
        used: &mut [bool],
        f: &mut dyn FnMut(&[usize]),
    ) {
        if k == pairs {
            f(cur);
            return;
        }
        for s in 0..slots {
            if !used[s] {
                used[s] = true;
                cur.push(s);
                rec(k + 1, pairs, slots, cur, used, f);
                cur.pop();
                used[s] = false;
            }
        }
    }
    rec(0, pairs, slots, &mut Vec::new(), &mut vec![false; slots], f);
}

/// Routes disjoint input pairs (0-based) to output Hadamards.
///
/// Every slot assignment and pair orientation is tried with odd-even
/// transposition routing; the one with the fewest crossings on the requested
/// routes wins, then fewest crossings overall, then enumeration order (lower
/// Hadamard rows first).
pub fn route_matching(matching: &[(usize, usize)], topology: &MeshTopology) -> Result<CircuitSpec> {
    if topology.orientation() != Orientation::Reversed {
        return Err(Error::invalid(
            "routing targets the reversed layout with output Hadamards",
        ));
    }
    let n = topology.n_modes();
    check_matching(matching, n)?;
    let slots = n / 2;
    let k = matching.len();

    let mut best: Option<((usize, usize), Vec<usize>, Sorted)> = None;
    for_each_assignment(k, slots, &mut |assign| {
        for flips in 0u32..(1 << k) {
            let mut dest = vec![usize::MAX; n];
            for (idx, (&(i, j), &slot)) in matching.iter().zip(assign).enumerate() {
                let (a, b) = if flips >> idx & 1 == 0 {
                    (i, j)
                } else {
                    (j, i)
                };
                dest[a] = 2 * slot;
                dest[b] = 2 * slot + 1;
            }
            // Unmatched inputs fill the remaining outputs in port order.
            let taken: BTreeSet<usize> =
                dest.iter().copied().filter(|&d| d != usize::MAX).collect();
            let mut free = (0..n).filter(|p| !taken.contains(p));
            for d in dest.iter_mut().filter(|d| **d == usize::MAX) {
                *d = free
                    .next()
                    .expect("as many free outputs as unmatched inputs");
            }
            let sorted = transposition_route(topology, &dest);
            if !sorted.ok {
                continue;
            }
            let on_route = sorted
                .crossings
                .iter()
                .filter(|(_, a, b)| {
                    matching
                        .iter()
                        .any(|&(i, j)| [i, j].iter().any(|t| t == a || t == b))
                })
                .count();
            let score = (on_route, sorted.crossings.len());
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, dest, sorted));
            }
        }
    });
    let (_, dest, sorted) = best.ok_or_else(|| Error::Unroutable(format!("{matching:?}")))?;

    let out_col = topology.output_column();
    let mut gates = Vec::with_capacity(topology.node_count());
    let mut pairs = Vec::new();
    let hadamard_rows: BTreeSet<usize> = matching.iter().map(|&(i, _)| dest[i] / 2).collect();
    for (idx, &node) in topology.nodes().iter().enumerate() {
        let role = if node.col as usize == out_col {
            if hadamard_rows.contains(&(node.row as usize)) {
                GateRole::Hadamard
            } else {
                GateRole::Unused
            }
        } else if sorted.cross[idx] {
            GateRole::CrossSingle
        } else {
            GateRole::Bar
        };
        gates.push(NodeGate { node, role });
    }
    for &(i, j) in matching {
        let slot = dest[i] / 2;
        pairs.push(RoutedPair {
            inputs: (i, j),
            outputs: (2 * slot, 2 * slot + 1),
            hadamard: NodeAddr::new(out_col as u8, slot as u8),
            uncorrected_crossings: 0,
        });
    }
    let mut spec = CircuitSpec {
        name: String::new(),
        n_modes: n,
        matching: matching.to_vec(),
        gates,
        pairs,
        groups: Vec::new(),
        crossings: sorted.crossings,
    };
    spec.recount();
    Ok(spec)
}

/// Uncorrected crossings on the route of a lone pair.
pub fn crossing_cost(pair: (usize, usize), topology: &MeshTopology) -> Result<LinkCost> {
    let spec = route_matching(&[pair], topology)?;
    Ok(spec.link_costs().remove(0))
}

/// Nodes a double-MZI crossing at `node` would occupy, splitter first.
fn spans(topo: &MeshTopology, node: NodeAddr) -> Vec<CorrectedGroup> {
    let (p, q) = topo.ports(node);
    let col = node.col as usize;
    let out_col = topo.output_column();
    let mut options = Vec::new();
    // The crossing as the splitter: the span continues two columns downstream.
    // The crossing as the recombiner: the span starts two columns upstream.
    let candidates: [(Option<usize>, Option<usize>); 2] = match topo.orientation() {
        Orientation::Reversed => [(Some(col), col.checked_sub(2)), (Some(col + 2), Some(col))],
        Orientation::Standard => [(Some(col), Some(col + 2)), (col.checked_sub(2), Some(col))],
    };
    for (l, r) in candidates {
        let (Some(l), Some(r)) = (l, r) else { continue };
        if l >= topo.n_columns() || r >= topo.n_columns() || l == out_col || r == out_col {
            continue;
        }
        let mid = (l + r) / 2;
        let mut intermediates: Vec<NodeAddr> = [p, q]
            .iter()
            .filter_map(|&port| topo.node_at(mid, port))
            .collect();
        intermediates.dedup();
        let (Some(left), Some(right)) = (topo.node_at(l, p), topo.node_at(r, p)) else {
            continue;
        };
        options.push(CorrectedGroup {
            left,
            intermediates,
            right,
        });
    }
    options
}

/// Replaces selected single crossings with double-MZI groups.
///
/// `which` lists crossing nodes to upgrade; `None` tries every crossing in
/// light order. Returns the new spec and the crossings that could not be
/// upgraded with the reason.
pub fn upgrade_to_corrected(
    spec: &CircuitSpec,
    topology: &MeshTopology,
    which: Option<&[NodeAddr]>,
) -> Result<(CircuitSpec, Vec<Error>)> {
    let targets: Vec<NodeAddr> = match which {
        Some(list) => {
            for &node in list {
                if spec.role(node) != Some(GateRole::CrossSingle) {
                    return Err(Error::NotACrossing(node));
                }
            }
            list.to_vec()
        }
        None => {
            let order = topology.light_order();
            let mut v: Vec<NodeAddr> = spec
                .gates
                .iter()
                .filter(|g| g.role == GateRole::CrossSingle)
                .map(|g| g.node)
                .collect();
            v.sort_by_key(|n| (order.iter().position(|&c| c == n.col as usize), n.row));
            v
        }
    };
    let mut out = spec.clone();
    let mut rejected = Vec::new();
    for node in targets {
        let chosen = spans(topology, node).into_iter().find(|g| {
            let other = if g.left == node { g.right } else { g.left };
            out.role(other) == Some(GateRole::Bar)
                && g.intermediates
                    .iter()
                    .all(|&m| out.role(m) == Some(GateRole::Bar))
        });
        match chosen {
            Some(group) => {
                out.set_role(group.left, GateRole::CorrectedLeft);
                out.set_role(group.right, GateRole::CorrectedRight);
                for &m in &group.intermediates {
                    out.set_role(m, GateRole::CorrectedIntermediate);
                }
                // The recorded crossing moves to the group's splitter node.
                for c in &mut out.crossings {
                    if c.0 == node {
                        c.0 = group.left;
                    }
                }
                out.groups.push(group);
            }
            None => rejected.push(Error::SpanUnavailable(node)),
        }
    }
    out.recount();
    Ok((out, rejected))
}

/// Differential settings `(θ, φ)` of a node's nominal role.
pub fn nominal_setting(role: GateRole) -> (f64, f64) {
    match role {
        GateRole::CrossSingle => (0.0, 0.0),
        GateRole::Hadamard | GateRole::CorrectedLeft | GateRole::CorrectedRight => (PI / 2.0, 0.0),
        GateRole::Bar | GateRole::CorrectedIntermediate | GateRole::Unused => (PI, 0.0),
    }
}

/// Internal differential phase giving an exact 50:50 split with couplers
/// `η_in`, `η_out` (nearest achievable split if none exists).
pub fn exact_split_theta(eta_in: f64, eta_out: f64) -> f64 {
    let a = eta_out * eta_in + (1.0 - eta_out) * (1.0 - eta_in);
    let b = eta_out * eta_in * (1.0 - eta_out) * (1.0 - eta_in);
    if b <= 0.0 {
        return PI / 2.0;
    }
    ((a - 0.5) / (2.0 * b.sqrt())).clamp(-1.0, 1.0).acos()
}

/// Exact settings `(θ_L, θ_R, φ_R)` closing a double-MZI crossing in `state`,
/// using the true coupler values. Assumes the intermediates are programmed.
pub fn solve_corrected_group(state: &MeshState, group: &CorrectedGroup) -> Result<(f64, f64, f64)> {
    let topo = &state.topology;
    let (p, q) = topo.ports(group.left);
    let left = *state.params(group.left)?;
    let right = *state.params(group.right)?;
    let theta_l = exact_split_theta(left.c_in.eta, left.c_out.eta);
    let theta_r = exact_split_theta(right.c_in.eta, right.c_out.eta);

    let mid_col = (group.left.col as usize + group.right.col as usize) / 2;
    let lut = state.passthrough_lookup();
    let arm = |port: usize| -> Result<C64> {
        match topo.node_at(mid_col, port) {
            Some(node) => {
                let t = mzi_transfer(state.params(node)?);
                let (a, _) = topo.ports(node);
                Ok(if port == a { t[0][0] } else { t[1][1] })
            }
            None => Ok(C64::new(lut[mid_col][port], 0.0)),
        }
    };
    let (dp, dq) = (arm(p)?, arm(q)?);

    let l = mzi_transfer(&left.with_differential(theta_l, left.phi_diff()));
    let r0 = mzi_transfer(&right.with_differential(theta_r, 0.0));
    // Right's external phase multiplies its inputs by e^{±iφ/2}; the top-to-top
    // amplitude of the group is e^{-iφ/2}(a·e^{iφ} + b).
    let a = r0[0][0] * dp * l[0][0];
    let b = r0[0][1] * dq * l[1][0];
    if a.norm() == 0.0 {
        return Ok((theta_l, theta_r, 0.0));
    }
    Ok((theta_l, theta_r, (-b / a).arg()))
}

/// Programs a routed circuit with nominal settings, closing double-MZI groups
/// with their exact solution for the couplers in `state`.
pub fn program_ideal(spec: &CircuitSpec, state: &mut MeshState) -> Result<()> {
    for g in &spec.gates {
        let (t, f) = nominal_setting(g.role);
        state.params_mut(g.node)?.set_differential(t, f);
    }
    for group in &spec.groups {
        let (tl, tr, fr) = solve_corrected_group(state, group)?;
        let left = state.params_mut(group.left)?;
        let phi = left.phi_diff();
        left.set_differential(tl, phi);
        state.params_mut(group.right)?.set_differential(tr, fr);
    }
    Ok(())
}

/// Bar-port leakage of a two-port path through a group: power left on the
/// entry port after the span, relative to both ports, for unit input on
/// `group.left`'s top (`arm = 0`) or bottom (`arm = 1`) port.
pub fn group_bar_leakage(state: &MeshState, group: &CorrectedGroup, arm: usize) -> Result<f64> {
    let topo = &state.topology;
    let (p, q) = topo.ports(group.left);
    let entry = if arm == 0 { p } else { q };
    let mut x = vec![ZERO; topo.n_modes()];
    x[entry] = C64::new(1.0, 0.0);
    let cols = [
        group.left.col as usize,
        (group.left.col as usize + group.right.col as usize) / 2,
        group.right.col as usize,
    ];
    let lut = state.passthrough_lookup();
    for col in cols {
        let mut y = x.clone();
        for row in 0..topo.rows_in_column(col) {
            let node = NodeAddr::new(col as u8, row as u8);
            let (a, b) = topo.ports(node);
            let t = mzi_transfer(state.params(node)?);
            let v = mat2_apply(&t, [x[a], x[b]]);
            y[a] = v[0];
            y[b] = v[1];
        }
        for port in topo.passthrough_ports(col) {
            y[port] = x[port] * lut[col][port];
        }
        x = y;
    }
    let total = x[p].norm_sqr() + x[q].norm_sqr();
    Ok(x[entry].norm_sqr() / total)
}
