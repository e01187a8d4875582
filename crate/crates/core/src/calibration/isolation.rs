//! Single-channel light paths from an input port to a target MZI.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::mesh::{MeshTopology, NodeAddr};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    /// Prefers crossing at every node, giving a diagonal through the mesh.
    Diagonal,
    /// Prefers bar at every node.
    AllBar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathState {
    Bar,
    Cross,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub node: NodeAddr,
    pub state: PathState,
}

/// Upstream settings that deliver all light from `input` into one arm of `target`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsolationPath {
    pub input: usize,
    pub target: NodeAddr,
    pub kind: PathKind,
    /// Nodes before the target, in light order.
    pub steps: Vec<PathStep>,
    /// Port on which light enters the target.
    pub target_port: usize,
}

impl IsolationPath {
    /// Node sequence including the target, in light order.
    pub fn sequence(&self) -> Vec<NodeAddr> {
        self.steps
            .iter()
            .map(|s| s.node)
            .chain(core::iter::once(self.target))
            .collect()
    }

    /// 0 if light enters the target's top arm, 1 for the bottom arm.
    pub fn target_arm(&self, topology: &MeshTopology) -> usize {
        usize::from(topology.ports(self.target).0 != self.target_port)
    }
}

/// DFS over bar/cross choices with every node allowed.
pub fn isolation_sequence(
    input: usize,
    target: NodeAddr,
    topology: &MeshTopology,
    kind: PathKind,
) -> Result<IsolationPath> {
    isolation_sequence_within(input, target, topology, kind, &|_| true)
}

/// DFS over bar/cross choices using only nodes accepted by `allowed`.
pub fn isolation_sequence_within(
    input: usize,
    target: NodeAddr,
    topology: &MeshTopology,
    kind: PathKind,
    allowed: &dyn Fn(NodeAddr) -> bool,
) -> Result<IsolationPath> {
    let n = topology.n_modes();
    if input >= n {
        return Err(Error::PortOutOfRange(input, n));
    }
    if !topology.contains(target) {
        return Err(Error::UnknownNode(target));
    }
    let target_step = topology.step_of_column(target.col as usize);
    let preference = match kind {
        PathKind::Diagonal => [PathState::Cross, PathState::Bar],
        PathKind::AllBar => [PathState::Bar, PathState::Cross],
    };

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        topo: &MeshTopology,
        step: usize,
        port: usize,
        target: NodeAddr,
        target_step: usize,
        preference: &[PathState; 2],
        allowed: &dyn Fn(NodeAddr) -> bool,
        path: &mut Vec<PathStep>,
    ) -> Option<usize> {
        let col = topo.column_at_step(step);
        let node = topo.node_at(col, port);
        if step == target_step {
            return (node == Some(target)).then_some(port);
        }
        // Light can move at most one port per column.
        let (tp, tq) = topo.ports(target);
        let remaining = target_step - step;
        if port + remaining < tp || port > tq + remaining {
            return None;
        }
        match node {
            None => dfs(
                topo,
                step + 1,
                port,
                target,
                target_step,
                preference,
                allowed,
                path,
            ),
            Some(node) => {
                if !allowed(node) {
                    return None;
                }
                let (a, b) = topo.ports(node);
                for &state in preference {
                    let next = match state {
                        PathState::Bar => port,
                        PathState::Cross => a + b - port,
                    };
                    path.push(PathStep { node, state });
                    if let Some(p) = dfs(
                        topo,
                        step + 1,
                        next,
                        target,
                        target_step,
                        preference,
                        allowed,
                        path,
                    ) {
                        return Some(p);
                    }
                    path.pop();
                }
                None
            }
        }
    }

    let mut steps = Vec::new();
    dfs(
        topology,
        0,
        input,
        target,
        target_step,
        &preference,
        allowed,
        &mut steps,
    )
    .map(|target_port| IsolationPath {
        input,
        target,
        kind,
        steps,
        target_port,
    })
    .ok_or(Error::UnreachableTarget { input, target })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::mesh::{basis_input, MeshState};

    fn n(c: u8, r: u8) -> NodeAddr {
        NodeAddr::new(c, r)
    }

    #[test]
    fn input_one_diagonal_matches_documented_sequence() {
        let t = MeshTopology::reversed(8);
        let p = isolation_sequence(0, n(0, 3), &t, PathKind::Diagonal).unwrap();
        assert_eq!(
            p.sequence(),
            [
                n(6, 0),
                n(5, 0),
                n(4, 1),
                n(3, 1),
                n(2, 2),
                n(1, 2),
                n(0, 3)
            ]
        );
        assert!(p.steps.iter().all(|s| s.state == PathState::Cross));
    }

    #[test]
    fn input_one_all_bar() {
        let t = MeshTopology::reversed(8);
        let p = isolation_sequence(0, n(0, 0), &t, PathKind::AllBar).unwrap();
        assert_eq!(p.sequence(), [n(6, 0), n(4, 0), n(2, 0), n(0, 0)]);
    }

    #[test]
    fn first_node_has_empty_prefix() {
        let t = MeshTopology::reversed(8);
        let p = isolation_sequence(0, n(6, 0), &t, PathKind::Diagonal).unwrap();
        assert!(p.steps.is_empty());
        assert_eq!(p.target_port, 0);
    }

    #[test]
    fn unreachable_targets() {
        let t = MeshTopology::reversed(8);
        // Input 1 cannot reach the bottom of column 6 in one step.
        assert!(matches!(
            isolation_sequence(0, n(6, 3), &t, PathKind::Diagonal),
            Err(Error::UnreachableTarget { input: 0, .. })
        ));
        assert!(isolation_sequence(0, n(5, 0), &t, PathKind::Diagonal).is_ok());
        assert!(
            isolation_sequence_within(0, n(0, 3), &t, PathKind::Diagonal, &|x| x != n(6, 0))
                .is_err()
        );
    }

    #[test]
    fn paths_deliver_all_light_in_ideal_mesh() {
        let t = MeshTopology::reversed(8);
        for input in 0..8 {
            for &target in t.nodes() {
                for kind in [PathKind::Diagonal, PathKind::AllBar] {
                    let Ok(p) = isolation_sequence(input, target, &t, kind) else {
                        continue;
                    };
                    let mut st = MeshState::lossless(t.clone());
                    // Fill everything else with a scrambling state to prove isolation.
                    for q in &mut st.params {
                        q.set_differential(1.1, 0.4);
                    }
                    for s in &p.steps {
                        let theta = if s.state == PathState::Bar {
                            core::f64::consts::PI
                        } else {
                            0.0
                        };
                        st.params_mut(s.node).unwrap().set_differential(theta, 0.0);
                    }
                    let field: Vec<C64> = st
                        .field_before_column(&basis_input(8, input), target.col as usize)
                        .unwrap();
                    assert!(field[p.target_port].norm_sqr() >= 0.999);
                }
            }
        }
    }
}
