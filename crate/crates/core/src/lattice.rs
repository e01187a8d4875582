//! Cluster graphs built from per-module cube cells, inter-module links and
//! Z-basis measurements, plus scheduling of wanted links onto circuits.
//!
//! Qubit `q` of a module sits at the cube corner whose coordinates are the
//! bits of `q` (bit 0 is x). Cube edges therefore join `q` and `q ^ 1`,
//! `q ^ 2`, `q ^ 4`, which are exactly the circuit matchings with those masks.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::compiler::{xor_matching, CircuitId};
use crate::{Error, Result};

/// Qubits per module.
pub const CELL_QUBITS: usize = 8;

/// Masks of the twelve cube edges.
pub const CUBE_MASKS: [usize; 3] = [1, 2, 4];
/// Mask of the four optional face diagonals.
pub const OPTIONAL_MASK: usize = 3;

/// A qubit: module id and 0-based index within the module.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QubitId {
    pub module: u32,
    pub qubit: u8,
}

impl QubitId {
    pub const fn new(module: u32, qubit: u8) -> Self {
        Self { module, qubit }
    }
}

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.module, self.qubit + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Intra,
    Inter,
}

/// Undirected edge with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub a: QubitId,
    pub b: QubitId,
    pub kind: EdgeKind,
}

/// Serialized form: node list and edge list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphData {
    pub nodes: Vec<QubitId>,
    pub edges: Vec<Edge>,
}

/// Qubits as nodes, entanglement bonds as edges.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphData", into = "GraphData")]
pub struct ClusterGraph {
    adjacency: BTreeMap<QubitId, BTreeSet<QubitId>>,
    edges: BTreeMap<(QubitId, QubitId), EdgeKind>,
}

fn ordered(a: QubitId, b: QubitId) -> (QubitId, QubitId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl ClusterGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_count_of(&self, kind: EdgeKind) -> usize {
        self.edges.values().filter(|&&k| k == kind).count()
    }

    pub fn contains(&self, q: QubitId) -> bool {
        self.adjacency.contains_key(&q)
    }

    pub fn has_edge(&self, a: QubitId, b: QubitId) -> bool {
        self.edges.contains_key(&ordered(a, b))
    }

    pub fn degree(&self, q: QubitId) -> Option<usize> {
        self.adjacency.get(&q).map(BTreeSet::len)
    }

    pub fn neighbors(&self, q: QubitId) -> impl Iterator<Item = QubitId> + '_ {
        self.adjacency.get(&q).into_iter().flatten().copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = QubitId> + '_ {
        self.adjacency.keys().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges
            .iter()
            .map(|(&(a, b), &kind)| Edge { a, b, kind })
    }

    pub fn modules(&self) -> BTreeSet<u32> {
        self.adjacency.keys().map(|q| q.module).collect()
    }

    pub fn add_node(&mut self, q: QubitId) -> Result<()> {
        if self.adjacency.insert(q, BTreeSet::new()).is_some() {
            return Err(Error::Graph(format!("duplicate node {q}")));
        }
        Ok(())
    }

    /// Adds an edge; the tag must agree with whether the endpoints share a module.
    pub fn add_edge(&mut self, a: QubitId, b: QubitId, kind: EdgeKind) -> Result<()> {
        if a == b {
            return Err(Error::Graph(format!("self-loop on {a}")));
        }
        for q in [a, b] {
            if !self.contains(q) {
                return Err(Error::Graph(format!("dangling endpoint {q}")));
            }
        }
        let same = a.module == b.module;
        match (kind, same) {
            (EdgeKind::Inter, true) => {
                return Err(Error::Graph(format!("link {a}-{b} is within one module")))
            }
            (EdgeKind::Intra, false) => {
                return Err(Error::Graph(format!("edge {a}-{b} crosses modules")))
            }
            _ => {}
        }
        if self.edges.insert(ordered(a, b), kind).is_some() {
            return Err(Error::Graph(format!("duplicate edge {a}-{b}")));
        }
        self.adjacency.get_mut(&a).expect("checked").insert(b);
        self.adjacency.get_mut(&b).expect("checked").insert(a);
        Ok(())
    }

    /// Nodes and edges of one module.
    pub fn restrict_to_module(&self, module: u32) -> ClusterGraph {
        let mut g = ClusterGraph::new();
        for q in self.nodes().filter(|q| q.module == module) {
            g.add_node(q).expect("unique");
        }
        for e in self
            .edges()
            .filter(|e| e.a.module == module && e.b.module == module)
        {
            g.add_edge(e.a, e.b, e.kind).expect("valid");
        }
        g
    }

    /// Intra-module edges of `module` as 0-based qubit pairs.
    pub fn module_pairs(&self, module: u32) -> Vec<(usize, usize)> {
        self.edges()
            .filter(|e| e.kind == EdgeKind::Intra && e.a.module == module)
            .map(|e| (e.a.qubit as usize, e.b.qubit as usize))
            .collect()
    }
}

impl TryFrom<GraphData> for ClusterGraph {
    type Error = Error;
    fn try_from(d: GraphData) -> Result<Self> {
        let mut g = ClusterGraph::new();
        for q in d.nodes {
            g.add_node(q)?;
        }
        for e in d.edges {
            g.add_edge(e.a, e.b, e.kind)?;
        }
        Ok(g)
    }
}

impl From<ClusterGraph> for GraphData {
    fn from(g: ClusterGraph) -> Self {
        GraphData {
            nodes: g.nodes().collect(),
            edges: g.edges().collect(),
        }
    }
}

/// One module's cube: 8 qubits and 12 edges, or 16 with the optional diagonals.
pub fn unit_cell(module: u32, include_optional: bool) -> ClusterGraph {
    let mut g = ClusterGraph::new();
    for q in 0..CELL_QUBITS {
        g.add_node(QubitId::new(module, q as u8)).expect("fresh");
    }
    let optional = include_optional.then_some(OPTIONAL_MASK);
    for mask in CUBE_MASKS.into_iter().chain(optional) {
        for (a, b) in xor_matching(CELL_QUBITS, mask) {
            g.add_edge(
                QubitId::new(module, a as u8),
                QubitId::new(module, b as u8),
                EdgeKind::Intra,
            )
            .expect("fresh");
        }
    }
    g
}

/// Disjoint union of `cells` plus inter-module `links`.
pub fn interconnect(cells: &[ClusterGraph], links: &[(QubitId, QubitId)]) -> Result<ClusterGraph> {
    let mut g = ClusterGraph::new();
    for cell in cells {
        for q in cell.nodes() {
            g.add_node(q)?;
        }
        for e in cell.edges() {
            g.add_edge(e.a, e.b, e.kind)?;
        }
    }
    for &(a, b) in links {
        g.add_edge(a, b, EdgeKind::Inter)?;
    }
    Ok(g)
}

/// Module id at grid position `(x, y, z)`.
pub fn grid_module(dims: [usize; 3], pos: [usize; 3]) -> u32 {
    (pos[0] + dims[0] * (pos[1] + dims[1] * pos[2])) as u32
}

/// Face links joining neighbouring cubes of a `dims` grid into one simple
/// cubic lattice: four links per shared face.
pub fn grid_links(dims: [usize; 3]) -> Vec<(QubitId, QubitId)> {
    let mut links = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let pos = [x, y, z];
                for axis in 0..3 {
                    if pos[axis] + 1 >= dims[axis] {
                        continue;
                    }
                    let mut next = pos;
                    next[axis] += 1;
                    let (m, n) = (grid_module(dims, pos), grid_module(dims, next));
                    let bit = 1 << axis;
                    for q in (0..CELL_QUBITS).filter(|q| q & bit != 0) {
                        links.push((QubitId::new(m, q as u8), QubitId::new(n, (q ^ bit) as u8)));
                    }
                }
            }
        }
    }
    links
}

/// Cubes on a `dims` grid joined by [`grid_links`].
pub fn assemble_grid(dims: [usize; 3], include_optional: bool) -> ClusterGraph {
    let cells: Vec<ClusterGraph> = (0..dims.iter().product::<usize>())
        .map(|m| unit_cell(m as u32, include_optional))
        .collect();
    interconnect(&cells, &grid_links(dims)).expect("grid links are valid")
}

/// Lattice coordinates of a qubit in a [`assemble_grid`] graph.
pub fn grid_coordinates(dims: [usize; 3], q: QubitId) -> [usize; 3] {
    let mut m = q.module as usize;
    let mut c = [0; 3];
    for axis in 0..3 {
        let p = m % dims[axis];
        m /= dims[axis];
        c[axis] = 2 * p + ((q.qubit as usize >> axis) & 1);
    }
    c
}

/// Z-basis measurement: each measured qubit and its bonds are removed.
pub fn z_measure(graph: &ClusterGraph, nodes: &[QubitId]) -> Result<ClusterGraph> {
    let measured: BTreeSet<QubitId> = nodes.iter().copied().collect();
    if let Some(q) = measured.iter().find(|q| !graph.contains(**q)) {
        return Err(Error::Graph(format!("cannot measure unknown node {q}")));
    }
    let mut g = ClusterGraph::new();
    for q in graph.nodes().filter(|q| !measured.contains(q)) {
        g.add_node(q)?;
    }
    for e in graph
        .edges()
        .filter(|e| !measured.contains(&e.a) && !measured.contains(&e.b))
    {
        g.add_edge(e.a, e.b, e.kind)?;
    }
    Ok(g)
}

/// One circuit configuration and the wanted pairs it serves, in run order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledCircuit {
    pub circuit: CircuitId,
    pub pairs: Vec<(usize, usize)>,
}

/// Fewest circuits from `available` whose matchings cover `wanted`. Ties go to
/// the earliest circuits in `available`; each pair is assigned to the first
/// chosen circuit that routes it.
pub fn link_schedule_with(
    wanted: &[(usize, usize)],
    available: &[(CircuitId, Vec<(usize, usize)>)],
    n_modes: usize,
) -> Result<Vec<ScheduledCircuit>> {
    let mut pairs = BTreeSet::new();
    for &(a, b) in wanted {
        if a == b {
            return Err(Error::InvalidPair(a, b));
        }
        if let Some(&p) = [a, b].iter().find(|&&p| p >= n_modes) {
            return Err(Error::PortOutOfRange(p, n_modes));
        }
        pairs.insert((a.min(b), a.max(b)));
    }
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let covers: Vec<BTreeSet<(usize, usize)>> = available
        .iter()
        .map(|(_, m)| {
            m.iter()
                .map(|&(a, b)| (a.min(b), a.max(b)))
                .filter(|p| pairs.contains(p))
                .collect()
        })
        .collect();
    if available.len() > 20 {
        return Err(Error::invalid("too many circuits for exhaustive cover"));
    }
    let members = |s: u32| (0..available.len()).filter(move |c| s >> c & 1 == 1);
    let covers_all = |s: u32| {
        members(s)
            .flat_map(|c| &covers[c])
            .collect::<BTreeSet<_>>()
            .len()
            == pairs.len()
    };
    let chosen = (1..=available.len() as u32)
        .find_map(|size| {
            (1u32..(1 << available.len()))
                .filter(|s| s.count_ones() == size && covers_all(*s))
                .min_by_key(|&s| members(s).collect::<Vec<_>>())
        })
        .ok_or_else(|| Error::Unroutable(format!("no circuit set covers {pairs:?}")))?;
    let mut left = pairs;
    let mut schedule = Vec::new();
    for c in members(chosen) {
        let served: Vec<(usize, usize)> = covers[c]
            .iter()
            .copied()
            .filter(|p| left.contains(p))
            .collect();
        for p in &served {
            left.remove(p);
        }
        schedule.push(ScheduledCircuit {
            circuit: available[c].0,
            pairs: served,
        });
    }
    Ok(schedule)
}

/// [`link_schedule_with`] over the default matchings of all nine circuits.
pub fn link_schedule(wanted: &[(usize, usize)]) -> Result<Vec<ScheduledCircuit>> {
    let available: Vec<_> = CircuitId::ALL
        .iter()
        .map(|&id| (id, id.default_matching()))
        .collect();
    link_schedule_with(wanted, &available, CELL_QUBITS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cell_counts() {
        let g = unit_cell(0, false);
        assert_eq!((g.node_count(), g.edge_count()), (8, 12));
        assert!(g.nodes().all(|q| g.degree(q) == Some(3)));
        assert_eq!(unit_cell(0, true).edge_count(), 16);
        assert_eq!(unit_cell(5, true), unit_cell(5, true));
        // 1-based (1,4) is optional, (1,2) is a cube edge.
        let q = |i: u8| QubitId::new(0, i - 1);
        assert!(!g.has_edge(q(1), q(4)) && unit_cell(0, true).has_edge(q(1), q(4)));
        assert!(g.has_edge(q(1), q(2)));
    }

    #[test]
    fn interconnect_validation() {
        let cells = [unit_cell(0, false), unit_cell(1, false)];
        let a = QubitId::new(0, 1);
        let b = QubitId::new(1, 0);
        let g = interconnect(&cells, &[]).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (16, 24));
        assert!(interconnect(&cells, &[(a, b), (b, a)]).is_err());
        assert!(interconnect(&cells, &[(a, QubitId::new(2, 0))]).is_err());
        assert!(interconnect(&cells, &[(a, QubitId::new(0, 6))]).is_err());
        assert!(interconnect(&[unit_cell(0, false), unit_cell(0, false)], &[]).is_err());
        let g = interconnect(&cells, &[(a, b)]).unwrap();
        assert_eq!(g.edge_count_of(EdgeKind::Inter), 1);
        for m in [0, 1] {
            assert_eq!(g.restrict_to_module(m), cells[m as usize]);
        }
    }

    /// Nearest-neighbour graph on an `L×M×K` box, counted directly.
    fn cubic_recount(size: [usize; 3], keep: impl Fn([usize; 3]) -> bool) -> (usize, usize) {
        let mut nodes = 0;
        let mut edges = 0;
        for x in 0..size[0] {
            for y in 0..size[1] {
                for z in 0..size[2] {
                    let p = [x, y, z];
                    if !keep(p) {
                        continue;
                    }
                    nodes += 1;
                    for axis in 0..3 {
                        let mut n = p;
                        n[axis] += 1;
                        if n[axis] < size[axis] && keep(n) {
                            edges += 1;
                        }
                    }
                }
            }
        }
        (nodes, edges)
    }

    #[test]
    fn two_by_two_by_two_assembly() {
        let dims = [2, 2, 2];
        let g = assemble_grid(dims, false);
        let links = grid_links(dims).len();
        assert_eq!(links, 48);
        assert_eq!((g.node_count(), g.edge_count()), (64, 8 * 12 + links));
        assert_eq!(
            cubic_recount([4, 4, 4], |_| true),
            (g.node_count(), g.edge_count())
        );
        // Every edge joins lattice neighbours.
        for e in g.edges() {
            let (p, q) = (grid_coordinates(dims, e.a), grid_coordinates(dims, e.b));
            let d: usize = (0..3).map(|i| p[i].abs_diff(q[i])).sum();
            assert_eq!(d, 1);
        }
    }

    #[test]
    fn measurement_removes_incident_edges() {
        let g = assemble_grid([2, 2, 2], false);
        for q in g.nodes() {
            let h = z_measure(&g, &[q]).unwrap();
            assert_eq!(h.edge_count(), g.edge_count() - g.degree(q).unwrap());
            assert_eq!(h.node_count(), g.node_count() - 1);
        }
        let all: Vec<_> = g.nodes().collect();
        assert_eq!(z_measure(&g, &all).unwrap(), ClusterGraph::new());
        assert!(z_measure(&g, &[QubitId::new(9, 0)]).is_err());
    }

    #[test]
    fn measurement_commutes() {
        let g = assemble_grid([2, 2, 2], true);
        let a: Vec<_> = g.nodes().step_by(5).collect();
        let b: Vec<_> = g
            .nodes()
            .skip(2)
            .step_by(7)
            .filter(|q| !a.contains(q))
            .collect();
        let ab: Vec<_> = a.iter().chain(&b).copied().collect();
        assert_eq!(
            z_measure(&z_measure(&g, &a).unwrap(), &b).unwrap(),
            z_measure(&g, &ab).unwrap()
        );
    }

    #[test]
    fn removing_corners_and_centres_leaves_bipartite_lattice() {
        let dims = [2, 2, 2];
        let g = assemble_grid(dims, false);
        let odd = |c: [usize; 3]| c.iter().filter(|&&x| x % 2 == 1).count();
        let measured: Vec<_> = g
            .nodes()
            .filter(|&q| matches!(odd(grid_coordinates(dims, q)), 0 | 3))
            .collect();
        let h = z_measure(&g, &measured).unwrap();
        let expect = cubic_recount([4, 4, 4], |c| matches!(odd(c), 1 | 2));
        assert_eq!((h.node_count(), h.edge_count()), expect);
        for e in h.edges() {
            assert_ne!(
                odd(grid_coordinates(dims, e.a)),
                odd(grid_coordinates(dims, e.b))
            );
        }
    }

    #[test]
    fn schedules() {
        assert!(link_schedule(&[]).unwrap().is_empty());
        let cube = unit_cell(0, false).module_pairs(0);
        let s = link_schedule(&cube).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(
            s.iter().map(|c| c.circuit).collect::<Vec<_>>(),
            [CircuitId::C1, CircuitId::C3, CircuitId::C4]
        );
        let all: Vec<_> = (0..8)
            .flat_map(|a| (a + 1..8).map(move |b| (a, b)))
            .collect();
        let s = link_schedule(&all).unwrap();
        assert_eq!(s.len(), 7);
        let mut served: Vec<_> = s.iter().flat_map(|c| c.pairs.iter().copied()).collect();
        served.sort();
        assert_eq!(served, all);
        assert!(s.iter().all(|c| !c.pairs.is_empty()));
        assert_eq!(link_schedule(&[(2, 2)]), Err(Error::InvalidPair(2, 2)));
        assert_eq!(link_schedule(&[(0, 8)]), Err(Error::PortOutOfRange(8, 8)));
    }

    #[test]
    fn graph_serde_round_trip_rejects_bad_edges() {
        let g = interconnect(
            &[unit_cell(0, true), unit_cell(1, false)],
            &[(QubitId::new(0, 1), QubitId::new(1, 0))],
        )
        .unwrap();
        let data: GraphData = g.clone().into();
        assert_eq!(ClusterGraph::try_from(data.clone()).unwrap(), g);
        let mut bad = data;
        bad.edges.push(Edge {
            a: QubitId::new(0, 0),
            b: QubitId::new(0, 7),
            kind: EdgeKind::Inter,
        });
        assert!(ClusterGraph::try_from(bad).is_err());
    }
}
