//! Process topologies and failure patterns.
//!
//! A system of `n` processes is connected by directed channels. A failure
//! pattern removes crashed processes and faulty channels; what remains is the
//! residual graph. The connected core is the unique strongly connected
//! component of the residual graph containing more than `n/2` processes, when
//! one exists.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Process identifier, dense in `1..=n`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

impl ProcessId {
    /// Zero-based index for array storage.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_index(idx: usize) -> Self {
        ProcessId(idx as u32 + 1)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Directed channel endpoint pair. Self-channels `(p, p)` exist implicitly,
/// are always reliable, and are never part of a failure pattern.
pub type ChannelId = (ProcessId, ProcessId);

/// Directed graph over a subset of the process universe `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyGraph {
    /// Size of the process universe. Vertex ids stay within `1..=n` even when
    /// `vertices` is a strict subset (residual graphs keep the original `n`).
    pub n: usize,
    pub vertices: BTreeSet<ProcessId>,
    pub edges: BTreeSet<ChannelId>,
}

impl TopologyGraph {
    /// Complete directed graph on `1..=n` (no explicit self-edges).
    pub fn complete(n: usize) -> Self {
        let vertices: BTreeSet<_> = (1..=n as u32).map(ProcessId).collect();
        let mut edges = BTreeSet::new();
        for &u in &vertices {
            for &v in &vertices {
                if u != v {
                    edges.insert((u, v));
                }
            }
        }
        TopologyGraph { n, vertices, edges }
    }

    /// Graph with an explicit edge list over the full universe `1..=n`.
    pub fn from_edges(n: usize, list: &[(u32, u32)]) -> Result<Self> {
        let vertices: BTreeSet<_> = (1..=n as u32).map(ProcessId).collect();
        let mut edges = BTreeSet::new();
        for &(u, v) in list {
            if u == 0 || v == 0 || u > n as u32 || v > n as u32 {
                return Err(Error::Topology(format!(
                    "edge ({u},{v}) outside process range 1..={n}"
                )));
            }
            if u == v {
                return Err(Error::Topology(format!(
                    "self-channel ({u},{v}) must not be listed explicitly"
                )));
            }
            edges.insert((ProcessId(u), ProcessId(v)));
        }
        Ok(TopologyGraph { n, vertices, edges })
    }

    pub fn has_edge(&self, from: ProcessId, to: ProcessId) -> bool {
        self.edges.contains(&(from, to))
    }

    fn adjacency(&self) -> BTreeMap<ProcessId, Vec<ProcessId>> {
        let mut adj: BTreeMap<ProcessId, Vec<ProcessId>> =
            self.vertices.iter().map(|&v| (v, Vec::new())).collect();
        for &(u, v) in &self.edges {
            if self.vertices.contains(&u) && self.vertices.contains(&v) {
                adj.get_mut(&u).unwrap().push(v);
            }
        }
        adj
    }
}

/// A failure pattern: the set of crashed processes and the set of faulty
/// channels. A channel may only be faulty if neither endpoint crashes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailurePattern {
    pub crashed: BTreeSet<ProcessId>,
    pub faulty_channels: BTreeSet<ChannelId>,
}

impl FailurePattern {
    pub fn new(crashed: &[u32], faulty: &[(u32, u32)]) -> Self {
        FailurePattern {
            crashed: crashed.iter().map(|&p| ProcessId(p)).collect(),
            faulty_channels: faulty
                .iter()
                .map(|&(u, v)| (ProcessId(u), ProcessId(v)))
                .collect(),
        }
    }

    /// Check well-formedness against a universe of `n` processes.
    pub fn validate(&self, n: usize) -> Result<()> {
        for &p in &self.crashed {
            if p.0 == 0 || p.0 > n as u32 {
                return Err(Error::Topology(format!(
                    "crashed process {p} outside range 1..={n}"
                )));
            }
        }
        for &(u, v) in &self.faulty_channels {
            if u.0 == 0 || v.0 == 0 || u.0 > n as u32 || v.0 > n as u32 {
                return Err(Error::Topology(format!(
                    "faulty channel ({u},{v}) outside process range 1..={n}"
                )));
            }
            if u == v {
                return Err(Error::Topology(format!(
                    "self-channel ({u},{v}) cannot be faulty"
                )));
            }
            if self.crashed.contains(&u) || self.crashed.contains(&v) {
                return Err(Error::Topology(format!(
                    "channel ({u},{v}) is faulty but an endpoint is crashed; \
                     crashed endpoints already remove the channel"
                )));
            }
        }
        Ok(())
    }
}

/// Set of failure patterns the system is expected to tolerate, either as an
/// explicit list or as a generator over a known family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailProneSystem {
    Extensional(Vec<FailurePattern>),
    /// Every crash subset of size at most `⌊(n-1)/2⌋`, no channel faults.
    MinorityCrash { n: usize },
}

impl FailProneSystem {
    /// Expand to an explicit pattern list. Enumeration is exponential in `n`,
    /// so generators are limited to small universes.
    pub fn normalize(&self) -> Result<Vec<FailurePattern>> {
        match self {
            FailProneSystem::Extensional(list) => Ok(list.clone()),
            FailProneSystem::MinorityCrash { n } => {
                if *n > 16 {
                    return Err(Error::Topology(format!(
                        "minority-crash enumeration limited to n <= 16, got {n}"
                    )));
                }
                let k = (*n - 1) / 2;
                let mut out = Vec::new();
                for mask in 0u32..(1 << *n) {
                    if mask.count_ones() as usize > k {
                        continue;
                    }
                    let crashed: BTreeSet<_> = (0..*n)
                        .filter(|i| mask & (1 << i) != 0)
                        .map(|i| ProcessId(i as u32 + 1))
                        .collect();
                    out.push(FailurePattern {
                        crashed,
                        faulty_channels: BTreeSet::new(),
                    });
                }
                Ok(out)
            }
        }
    }
}

/// Remove crashed processes (with all their channels) and faulty channels.
/// The universe size `n` is preserved.
pub fn residual_graph(g: &TopologyGraph, f: &FailurePattern) -> Result<TopologyGraph> {
    f.validate(g.n)?;
    let vertices: BTreeSet<_> = g
        .vertices
        .iter()
        .copied()
        .filter(|v| !f.crashed.contains(v))
        .collect();
    let edges: BTreeSet<_> = g
        .edges
        .iter()
        .copied()
        .filter(|&(u, v)| {
            vertices.contains(&u)
                && vertices.contains(&v)
                && !f.faulty_channels.contains(&(u, v))
        })
        .collect();
    Ok(TopologyGraph {
        n: g.n,
        vertices,
        edges,
    })
}

/// Strongly connected components in canonical form: each component sorted
/// ascending, components ordered by their smallest member.
pub fn strongly_connected_components(g: &TopologyGraph) -> Vec<Vec<ProcessId>> {
    let verts: Vec<ProcessId> = g.vertices.iter().copied().collect();
    let pos: BTreeMap<ProcessId, usize> =
        verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let adj = g.adjacency();

    // Iterative Tarjan. `low[v]` is the smallest index reachable from v's
    // DFS subtree through at most one back edge.
    let m = verts.len();
    let mut index = vec![usize::MAX; m];
    let mut low = vec![0usize; m];
    let mut on_stack = vec![false; m];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut comps: Vec<Vec<ProcessId>> = Vec::new();

    for start in 0..m {
        if index[start] != usize::MAX {
            continue;
        }
        // Each frame is (vertex, next neighbor offset).
        let mut frames: Vec<(usize, usize)> = vec![(start, 0)];
        while let Some(&mut (v, ref mut off)) = frames.last_mut() {
            if *off == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let neighbors = &adj[&verts[v]];
            if *off < neighbors.len() {
                let w = pos[&neighbors[*off]];
                *off += 1;
                if index[w] == usize::MAX {
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(verts[w]);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort();
                    comps.push(comp);
                }
                frames.pop();
                if let Some(&mut (parent, _)) = frames.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }

    comps.sort_by_key(|c| c[0]);
    comps
}

/// The unique strongly connected component of the residual graph with more
/// than `n/2` members, if any. `n` is the full universe size, including
/// crashed processes.
pub fn connected_core(g: &TopologyGraph, f: &FailurePattern) -> Result<Option<Vec<ProcessId>>> {
    let residual = residual_graph(g, f)?;
    let comps = strongly_connected_components(&residual);
    Ok(comps.into_iter().find(|c| 2 * c.len() > g.n))
}

/// Maximum over ordered pairs in `s` of the shortest-path hop count, using
/// only edges of `g` between members of `s`. `s` must be strongly connected
/// under that restriction.
pub fn diameter(g: &TopologyGraph, s: &[ProcessId]) -> Result<u64> {
    let members: BTreeSet<ProcessId> = s.iter().copied().collect();
    for &v in &members {
        if !g.vertices.contains(&v) {
            return Err(Error::Topology(format!("{v} is not a vertex of the graph")));
        }
    }
    let mut max_dist = 0u64;
    for &src in &members {
        let mut dist: BTreeMap<ProcessId, u64> = BTreeMap::new();
        dist.insert(src, 0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            for &w in &members {
                if w != u && g.has_edge(u, w) && !dist.contains_key(&w) {
                    dist.insert(w, du + 1);
                    queue.push_back(w);
                }
            }
        }
        for &v in &members {
            match dist.get(&v) {
                Some(&d) => max_dist = max_dist.max(d),
                None => {
                    return Err(Error::Topology(format!(
                        "{src} cannot reach {v} within the given set; \
                         diameter requires a strongly connected set"
                    )))
                }
            }
        }
    }
    Ok(max_dist)
}

/// A system is k-fail-prone if every process subset of size at most `k`
/// appears as the crash set of some pattern, and no pattern crashes more
/// than `k` processes.
pub fn is_k_fail_prone(system: &FailProneSystem, k: usize, n: usize) -> Result<bool> {
    if n > 16 {
        return Err(Error::Topology(format!(
            "k-fail-prone enumeration limited to n <= 16, got {n}"
        )));
    }
    let patterns = system.normalize()?;
    for p in &patterns {
        p.validate(n)?;
        if p.crashed.len() > k {
            return Ok(false);
        }
    }
    let crash_sets: BTreeSet<&BTreeSet<ProcessId>> =
        patterns.iter().map(|p| &p.crashed).collect();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize > k {
            continue;
        }
        let subset: BTreeSet<_> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| ProcessId(i as u32 + 1))
            .collect();
        if !crash_sets.contains(&subset) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pids(ids: &[u32]) -> Vec<ProcessId> {
        ids.iter().map(|&i| ProcessId(i)).collect()
    }

    /// Brute-force SCC oracle: components are classes of mutual reachability,
    /// computed from the transitive closure.
    fn scc_oracle(g: &TopologyGraph) -> Vec<Vec<ProcessId>> {
        let verts: Vec<ProcessId> = g.vertices.iter().copied().collect();
        let m = verts.len();
        let idx: BTreeMap<ProcessId, usize> =
            verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut reach = vec![vec![false; m]; m];
        for i in 0..m {
            reach[i][i] = true;
        }
        for &(u, v) in &g.edges {
            if let (Some(&i), Some(&j)) = (idx.get(&u), idx.get(&v)) {
                reach[i][j] = true;
            }
        }
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    if reach[i][k] && reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        let mut assigned = vec![false; m];
        let mut comps = Vec::new();
        for i in 0..m {
            if assigned[i] {
                continue;
            }
            let mut comp = Vec::new();
            for j in 0..m {
                if reach[i][j] && reach[j][i] {
                    comp.push(verts[j]);
                    assigned[j] = true;
                }
            }
            comp.sort();
            comps.push(comp);
        }
        comps.sort_by_key(|c| c[0].0);
        comps
    }

    // Fixtures mirroring the three bundled example topologies: three
    // processes, complete channel graph, with
    //   (a) channels 1<->2 disconnected,
    //   (b) channels out of 2 disconnected,
    //   (c) all channels touching 2 faulty.
    fn fig_a() -> (TopologyGraph, FailurePattern) {
        (TopologyGraph::complete(3), FailurePattern::new(&[], &[(1, 2), (2, 1)]))
    }
    fn fig_b() -> (TopologyGraph, FailurePattern) {
        (TopologyGraph::complete(3), FailurePattern::new(&[], &[(2, 1), (2, 3)]))
    }
    fn fig_c() -> (TopologyGraph, FailurePattern) {
        (
            TopologyGraph::complete(3),
            FailurePattern::new(&[], &[(1, 2), (2, 1), (2, 3), (3, 2)]),
        )
    }

    #[test]
    fn residual_removes_faulty_channels() {
        let (g, f) = fig_b();
        let r = residual_graph(&g, &f).unwrap();
        assert_eq!(r.vertices, g.vertices);
        assert!(r.has_edge(ProcessId(1), ProcessId(3)));
        assert!(r.has_edge(ProcessId(3), ProcessId(1)));
        assert!(r.has_edge(ProcessId(1), ProcessId(2)));
        assert!(!r.has_edge(ProcessId(2), ProcessId(1)));
        assert!(!r.has_edge(ProcessId(2), ProcessId(3)));
    }

    #[test]
    fn residual_removes_crashed_processes() {
        let g = TopologyGraph::complete(3);
        let f = FailurePattern::new(&[2], &[]);
        let r = residual_graph(&g, &f).unwrap();
        assert_eq!(r.n, 3);
        assert_eq!(r.vertices, pids(&[1, 3]).into_iter().collect());
        assert_eq!(r.edges.len(), 2);
    }

    #[test]
    fn residual_rejects_faulty_channel_at_crashed_endpoint() {
        let g = TopologyGraph::complete(3);
        let f = FailurePattern::new(&[1], &[(1, 2)]);
        assert!(residual_graph(&g, &f).is_err());
    }

    #[test]
    fn scc_examples() {
        let g = TopologyGraph::complete(3);
        assert_eq!(strongly_connected_components(&g), vec![pids(&[1, 2, 3])]);

        let (g, f) = fig_b();
        let r = residual_graph(&g, &f).unwrap();
        assert_eq!(
            strongly_connected_components(&r),
            vec![pids(&[1, 3]), pids(&[2])]
        );

        // Directed 4-cycle: a single component even though no edge is mutual.
        let ring = TopologyGraph::from_edges(4, &[(1, 2), (2, 3), (3, 4), (4, 1)]).unwrap();
        assert_eq!(strongly_connected_components(&ring), vec![pids(&[1, 2, 3, 4])]);

        // Chain: every vertex its own component, canonical order by member.
        let chain = TopologyGraph::from_edges(3, &[(3, 1), (1, 2)]).unwrap();
        assert_eq!(
            strongly_connected_components(&chain),
            vec![pids(&[1]), pids(&[2]), pids(&[3])]
        );
    }

    #[test]
    fn connected_core_of_example_topologies() {
        let (g, f) = fig_a();
        assert_eq!(connected_core(&g, &f).unwrap(), Some(pids(&[1, 2, 3])));
        let (g, f) = fig_b();
        assert_eq!(connected_core(&g, &f).unwrap(), Some(pids(&[1, 3])));
        let (g, f) = fig_c();
        assert_eq!(connected_core(&g, &f).unwrap(), Some(pids(&[1, 3])));
    }

    #[test]
    fn connected_core_absent_when_no_majority_component() {
        // Two disjoint 2-cliques on n = 4: both components have exactly n/2.
        let g = TopologyGraph::from_edges(4, &[(1, 2), (2, 1), (3, 4), (4, 3)]).unwrap();
        let f = FailurePattern::default();
        assert_eq!(connected_core(&g, &f).unwrap(), None);

        // Majority crashed: the surviving clique is not a majority of n.
        let g = TopologyGraph::complete(5);
        let f = FailurePattern::new(&[1, 2, 3], &[]);
        assert_eq!(connected_core(&g, &f).unwrap(), None);
    }

    #[test]
    fn majority_components_always_intersect() {
        // Pigeonhole behind core uniqueness: any two majority subsets of
        // 1..=n share a member. Exhaustive for n <= 7.
        for n in 1..=7u32 {
            for a in 0u32..(1 << n) {
                if 2 * a.count_ones() <= n {
                    continue;
                }
                for b in 0u32..(1 << n) {
                    if 2 * b.count_ones() <= n {
                        continue;
                    }
                    assert!(a & b != 0, "disjoint majorities for n={n}: {a:b} {b:b}");
                }
            }
        }
    }

    #[test]
    fn diameter_examples() {
        let g = TopologyGraph::complete(3);
        assert_eq!(diameter(&g, &pids(&[1, 2, 3])).unwrap(), 1);
        assert_eq!(diameter(&g, &pids(&[1])).unwrap(), 0);

        // In the (a) residual, 1 and 2 only reach each other through 3.
        let (g, f) = fig_a();
        let r = residual_graph(&g, &f).unwrap();
        assert_eq!(diameter(&r, &pids(&[1, 2, 3])).unwrap(), 2);

        // Paths may not leave the set: restricted to {1, 2} there is no route.
        assert!(diameter(&r, &pids(&[1, 2])).is_err());
    }

    #[test]
    fn k_fail_prone_examples() {
        let sys = FailProneSystem::MinorityCrash { n: 3 };
        assert!(is_k_fail_prone(&sys, 1, 3).unwrap());
        assert!(!is_k_fail_prone(&sys, 2, 3).unwrap());

        // A pattern crashing two processes breaks the upper bound for k = 1.
        let mut list = sys.normalize().unwrap();
        list.push(FailurePattern::new(&[1, 2], &[]));
        let sys2 = FailProneSystem::Extensional(list);
        assert!(!is_k_fail_prone(&sys2, 1, 3).unwrap());

        // Missing singleton subset breaks the coverage direction.
        let list: Vec<_> = FailProneSystem::MinorityCrash { n: 3 }
            .normalize()
            .unwrap()
            .into_iter()
            .filter(|p| !p.crashed.contains(&ProcessId(2)))
            .collect();
        let sys3 = FailProneSystem::Extensional(list);
        assert!(!is_k_fail_prone(&sys3, 1, 3).unwrap());
    }

    #[test]
    fn minority_crash_is_maximally_fail_prone() {
        for n in 1..=7 {
            let sys = FailProneSystem::MinorityCrash { n };
            let k = (n - 1) / 2;
            assert!(is_k_fail_prone(&sys, k, n).unwrap(), "n={n} k={k}");
            if k > 0 {
                assert!(!is_k_fail_prone(&sys, k - 1, n).unwrap());
            }
        }
    }

    proptest! {
        #[test]
        fn tarjan_matches_reachability_oracle(
            n in 1usize..=7,
            edge_bits in proptest::collection::vec(any::<bool>(), 49),
        ) {
            let mut edges = Vec::new();
            for u in 0..n {
                for v in 0..n {
                    if u != v && edge_bits[u * 7 + v] {
                        edges.push((u as u32 + 1, v as u32 + 1));
                    }
                }
            }
            let g = TopologyGraph::from_edges(n, &edges).unwrap();
            prop_assert_eq!(strongly_connected_components(&g), scc_oracle(&g));
        }

        #[test]
        fn diameter_bounded_by_set_size(
            n in 2usize..=7,
            extra in proptest::collection::vec(any::<bool>(), 49),
        ) {
            // A directed ring plus random chords is always strongly connected.
            let mut edges: Vec<(u32, u32)> = (0..n)
                .map(|i| (i as u32 + 1, ((i + 1) % n) as u32 + 1))
                .collect();
            for u in 0..n {
                for v in 0..n {
                    if u != v && extra[u * 7 + v] {
                        edges.push((u as u32 + 1, v as u32 + 1));
                    }
                }
            }
            let g = TopologyGraph::from_edges(n, &edges).unwrap();
            let all: Vec<ProcessId> = (1..=n as u32).map(ProcessId).collect();
            let d = diameter(&g, &all).unwrap();
            prop_assert!(d <= (n - 1) as u64);
            prop_assert!(d >= 1);
        }
    }
}
