//! Unit-capacity split-node flow networks for node-disjoint paths.
//!
//! Every eligible diagram node `v` becomes `v_in -> v_out` with capacity 1.
//! Eligible nodes are the allowed source decisions plus every unobserved
//! deterministic or value node; probabilistic nodes (capacity zero) and
//! observed nodes are left out entirely.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::ControlError;
use crate::model::{InfluenceDiagram, NodeKind};

pub type Path = Vec<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vertex {
    Source,
    Sink,
    In(usize),
    Out(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Edge {
    to: usize,
    cap: u32,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    vertices: Vec<Vertex>,
    // edges[2k] is a forward edge, edges[2k + 1] its residual twin
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
    split: BTreeMap<usize, (usize, usize)>,
    sources: BTreeSet<usize>,
    sinks: BTreeSet<usize>,
    excluded: BTreeSet<usize>,
}

const SOURCE: usize = 0;
const SINK: usize = 1;

impl FlowNetwork {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Whether diagram node `v` has a split pair in the network.
    pub fn contains_node(&self, v: usize) -> bool {
        self.split.contains_key(&v)
    }

    pub fn sources(&self) -> &BTreeSet<usize> {
        &self.sources
    }

    pub fn sinks(&self) -> &BTreeSet<usize> {
        &self.sinks
    }

    pub fn excluded(&self) -> &BTreeSet<usize> {
        &self.excluded
    }

    /// (tail, head, capacity) of every forward edge.
    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex, u32)> + '_ {
        (0..self.edges.len()).step_by(2).map(move |e| {
            let tail = self.edges[e + 1].to;
            (self.vertices[tail], self.vertices[self.edges[e].to], self.edges[e].cap)
        })
    }

    fn add_vertex(&mut self, v: Vertex) -> usize {
        self.vertices.push(v);
        self.adjacency.push(Vec::new());
        self.vertices.len() - 1
    }

    fn add_edge(&mut self, from: usize, to: usize) {
        self.adjacency[from].push(self.edges.len());
        self.edges.push(Edge { to, cap: 1 });
        self.adjacency[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0 });
    }
}

pub fn build_flow_network(
    d: &InfluenceDiagram,
    sources: &BTreeSet<usize>,
    sinks: &BTreeSet<usize>,
) -> FlowNetwork {
    build_flow_network_excluding(d, sources, sinks, &BTreeSet::new())
}

/// As [`build_flow_network`], with the `excluded` nodes forced to capacity 0.
pub fn build_flow_network_excluding(
    d: &InfluenceDiagram,
    sources: &BTreeSet<usize>,
    sinks: &BTreeSet<usize>,
    excluded: &BTreeSet<usize>,
) -> FlowNetwork {
    let mut net = FlowNetwork {
        vertices: Vec::new(),
        edges: Vec::new(),
        adjacency: Vec::new(),
        split: BTreeMap::new(),
        sources: sources.clone(),
        sinks: sinks.clone(),
        excluded: excluded.clone(),
    };
    net.add_vertex(Vertex::Source);
    net.add_vertex(Vertex::Sink);

    let eligible = |v: usize| {
        if excluded.contains(&v) {
            return false;
        }
        match d.kind(v) {
            NodeKind::Decision => sources.contains(&v),
            NodeKind::Deterministic | NodeKind::Value => !d.node(v).observed,
            NodeKind::Probabilistic => false,
        }
    };
    for v in (0..d.len()).filter(|&v| eligible(v)) {
        let vin = net.add_vertex(Vertex::In(v));
        let vout = net.add_vertex(Vertex::Out(v));
        net.split.insert(v, (vin, vout));
    }
    let split = net.split.clone();

    for (&v, &(vin, vout)) in &split {
        if d.kind(v) == NodeKind::Decision {
            net.add_edge(SOURCE, vin);
        }
        net.add_edge(vin, vout);
    }
    for &(u, v) in d.arc_indices() {
        // arcs into decisions are informational only
        if d.kind(v) == NodeKind::Decision {
            continue;
        }
        if let (Some(&(_, uout)), Some(&(vin, _))) = (split.get(&u), split.get(&v)) {
            net.add_edge(uout, vin);
        }
    }
    for t in sinks {
        if let Some(&(_, tout)) = split.get(t) {
            net.add_edge(tout, SINK);
        }
    }
    net
}

/// Integral maximum flow by shortest augmenting paths, decomposed into
/// node-disjoint source-to-sink paths of diagram nodes.
pub fn max_node_disjoint_paths(net: &FlowNetwork) -> Vec<Path> {
    let mut residual: Vec<u32> = net.edges.iter().map(|e| e.cap).collect();
    while let Some(path) = augmenting_path(net, &residual) {
        for e in path {
            residual[e] -= 1;
            residual[e ^ 1] += 1;
        }
    }

    // flow on a forward edge = residual capacity of its twin
    let mut flow: Vec<u32> = (0..net.edges.len())
        .map(|e| if e % 2 == 0 { residual[e + 1] } else { 0 })
        .collect();
    let mut paths = Vec::new();
    loop {
        let mut cur = SOURCE;
        let mut nodes = Vec::new();
        while cur != SINK {
            let next = net.adjacency[cur]
                .iter()
                .copied()
                .find(|&e| e % 2 == 0 && flow[e] > 0);
            let Some(e) = next else { break };
            flow[e] -= 1;
            cur = net.edges[e].to;
            if let Vertex::In(v) = net.vertices[cur] {
                nodes.push(v);
            }
        }
        if cur != SINK {
            break;
        }
        paths.push(nodes);
    }
    paths.sort();
    paths
}

fn augmenting_path(net: &FlowNetwork, residual: &[u32]) -> Option<Vec<usize>> {
    let mut via = vec![usize::MAX; net.vertices.len()];
    let mut seen = vec![false; net.vertices.len()];
    seen[SOURCE] = true;
    let mut queue = VecDeque::from([SOURCE]);
    while let Some(u) = queue.pop_front() {
        for &e in &net.adjacency[u] {
            let v = net.edges[e].to;
            if residual[e] > 0 && !seen[v] {
                seen[v] = true;
                via[v] = e;
                if v == SINK {
                    let mut path = Vec::new();
                    let mut cur = SINK;
                    while cur != SOURCE {
                        let e = via[cur];
                        path.push(e);
                        cur = net.edges[e ^ 1].to;
                    }
                    return Some(path);
                }
                queue.push_back(v);
            }
        }
    }
    None
}

/// Breadth-first search over exclusion sets for alternative maximum path
/// sets. Each yielded set routes one path to every sink; a rejected set
/// spawns re-solves with single extra nodes forced to capacity zero,
/// implicated nodes first, then the set's interior nodes, then its sources.
#[derive(Debug, Clone)]
pub struct PathSetSearch<'a> {
    d: &'a InfluenceDiagram,
    sources: BTreeSet<usize>,
    sinks: BTreeSet<usize>,
    limit: usize,
    queue: VecDeque<BTreeSet<usize>>,
    seen_exclusions: BTreeSet<BTreeSet<usize>>,
    seen_paths: BTreeSet<Vec<Path>>,
    last: Option<(BTreeSet<usize>, Vec<Path>)>,
    yielded: usize,
}

impl<'a> PathSetSearch<'a> {
    pub fn new(
        d: &'a InfluenceDiagram,
        sources: BTreeSet<usize>,
        sinks: BTreeSet<usize>,
        limit: usize,
    ) -> Result<Self, ControlError> {
        if limit == 0 {
            return Err(ControlError::ZeroRetryLimit);
        }
        let start = BTreeSet::new();
        Ok(PathSetSearch {
            d,
            sources,
            sinks,
            limit,
            queue: VecDeque::from([start.clone()]),
            seen_exclusions: BTreeSet::from([start]),
            seen_paths: BTreeSet::new(),
            last: None,
            yielded: 0,
        })
    }

    pub fn attempts(&self) -> usize {
        self.yielded
    }

    /// True when the limit stopped the search with candidates still queued.
    pub fn exhausted_budget(&self) -> bool {
        self.yielded >= self.limit && !self.queue.is_empty()
    }

    pub fn next_path_set(&mut self) -> Option<Vec<Path>> {
        while self.yielded < self.limit {
            let excluded = self.queue.pop_front()?;
            let net = build_flow_network_excluding(self.d, &self.sources, &self.sinks, &excluded);
            let paths = max_node_disjoint_paths(&net);
            if paths.len() < self.sinks.len() || !self.seen_paths.insert(paths.clone()) {
                continue;
            }
            self.yielded += 1;
            self.last = Some((excluded, paths.clone()));
            return Some(paths);
        }
        None
    }

    /// Marks the most recent path set as unusable.
    pub fn reject(&mut self, implicated: &[usize]) {
        let Some((excluded, paths)) = self.last.take() else {
            return;
        };
        let interior = paths
            .iter()
            .flat_map(|p| p.iter().skip(1).take(p.len().saturating_sub(2)).copied());
        let sources = paths.iter().filter_map(|p| p.first().copied());
        let candidates: Vec<usize> = implicated
            .iter()
            .copied()
            .chain(interior)
            .chain(sources)
            .filter(|v| !self.sinks.contains(v))
            .collect();
        for v in candidates {
            let mut next = excluded.clone();
            next.insert(v);
            if self.seen_exclusions.insert(next.clone()) {
                self.queue.push_back(next);
            }
        }
    }
}

/// Distinct maximum path sets reachable from `net` by excluding, one node at
/// a time, first the `previous_failures` and then the nodes of each yielded
/// set. Stops after `limit` sets.
pub fn enumerate_alternative_path_sets(
    d: &InfluenceDiagram,
    net: &FlowNetwork,
    previous_failures: &[usize],
    limit: usize,
) -> Result<Vec<Vec<Path>>, ControlError> {
    let mut search = PathSetSearch::new(d, net.sources.clone(), net.sinks.clone(), limit)?;
    if !net.excluded.is_empty() {
        search.queue = VecDeque::from([net.excluded.clone()]);
        search.seen_exclusions = BTreeSet::from([net.excluded.clone()]);
    }
    let mut out = Vec::new();
    while let Some(paths) = search.next_path_set() {
        out.push(paths);
        search.reject(previous_failures);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arc, Node};

    fn diagram(nodes: &[(&str, NodeKind)], arcs: &[(&str, &str)]) -> InfluenceDiagram {
        InfluenceDiagram::new(
            nodes.iter().map(|&(id, k)| Node::new(id, k)),
            arcs.iter().map(|&(a, b)| Arc::new(a, b)),
        )
        .unwrap()
    }

    fn set(d: &InfluenceDiagram, ids: &[&str]) -> BTreeSet<usize> {
        d.resolve(ids).unwrap().into_iter().collect()
    }

    use NodeKind::{Decision as Dc, Deterministic as Det, Probabilistic as Prob};

    #[test]
    fn vertex_count_and_probabilistic_absence() {
        let d = diagram(
            &[("d", Dc), ("a", Det), ("n", Prob), ("t", Det)],
            &[("d", "a"), ("a", "t"), ("n", "t")],
        );
        let net = build_flow_network(&d, &set(&d, &["d"]), &set(&d, &["t"]));
        assert_eq!(net.vertex_count(), 2 * 3 + 2);
        assert!(!net.contains_node(d.index_of("n").unwrap()));
        assert_eq!(net.edges().count(), 1 + 3 + 2 + 1);
        assert_eq!(max_node_disjoint_paths(&net).len(), 1);
    }

    #[test]
    fn no_decisions_no_flow() {
        let d = diagram(&[("a", Det), ("t", Det)], &[("a", "t")]);
        let net = build_flow_network(&d, &BTreeSet::new(), &set(&d, &["t"]));
        assert!(max_node_disjoint_paths(&net).is_empty());
    }

    #[test]
    fn direct_arc_is_length_one_path() {
        let d = diagram(&[("d", Dc), ("t", Det)], &[("d", "t")]);
        let net = build_flow_network(&d, &set(&d, &["d"]), &set(&d, &["t"]));
        assert_eq!(max_node_disjoint_paths(&net), vec![set(&d, &["d", "t"]).into_iter().collect::<Vec<_>>()]);
    }

    #[test]
    fn sink_capacity_bounds_flow() {
        let d = diagram(&[("d1", Dc), ("d2", Dc), ("t", Det)], &[("d1", "t"), ("d2", "t")]);
        let net = build_flow_network(&d, &set(&d, &["d1", "d2"]), &set(&d, &["t"]));
        assert_eq!(max_node_disjoint_paths(&net).len(), 1);
    }

    #[test]
    fn disconnected_is_empty() {
        let d = diagram(&[("d", Dc), ("t", Det)], &[]);
        let net = build_flow_network(&d, &set(&d, &["d"]), &set(&d, &["t"]));
        assert!(max_node_disjoint_paths(&net).is_empty());
    }

    #[test]
    fn shared_bottleneck_node() {
        // d1, d2 -> m -> t1, t2: only one path fits through m
        let d = diagram(
            &[("d1", Dc), ("d2", Dc), ("m", Det), ("t1", Det), ("t2", Det)],
            &[("d1", "m"), ("d2", "m"), ("m", "t1"), ("m", "t2")],
        );
        let net = build_flow_network(&d, &set(&d, &["d1", "d2"]), &set(&d, &["t1", "t2"]));
        assert_eq!(max_node_disjoint_paths(&net).len(), 1);
    }

    #[test]
    fn flow_requires_augmenting_reroute() {
        // greedy d1->a->t2 would block; max flow reroutes through b
        let d = diagram(
            &[("d1", Dc), ("d2", Dc), ("a", Det), ("b", Det), ("t1", Det), ("t2", Det)],
            &[("d1", "a"), ("d1", "b"), ("d2", "a"), ("a", "t1"), ("a", "t2"), ("b", "t2")],
        );
        let net = build_flow_network(&d, &set(&d, &["d1", "d2"]), &set(&d, &["t1", "t2"]));
        let paths = max_node_disjoint_paths(&net);
        assert_eq!(paths.len(), 2);
        let all: Vec<usize> = paths.iter().flatten().copied().collect();
        let unique: BTreeSet<usize> = all.iter().copied().collect();
        assert_eq!(all.len(), unique.len());
    }

    #[test]
    fn unique_path_enumerates_once() {
        let d = diagram(&[("d", Dc), ("a", Det), ("t", Det)], &[("d", "a"), ("a", "t")]);
        let net = build_flow_network(&d, &set(&d, &["d"]), &set(&d, &["t"]));
        assert_eq!(enumerate_alternative_path_sets(&d, &net, &[], 10).unwrap().len(), 1);
        assert_eq!(
            enumerate_alternative_path_sets(&d, &net, &[], 0),
            Err(ControlError::ZeroRetryLimit)
        );
    }

    #[test]
    fn diamond_yields_both_routes() {
        let d = diagram(
            &[("d", Dc), ("a", Det), ("b", Det), ("t", Det)],
            &[("d", "a"), ("d", "b"), ("a", "t"), ("b", "t")],
        );
        let net = build_flow_network(&d, &set(&d, &["d"]), &set(&d, &["t"]));
        let a = d.index_of("a").unwrap();
        let sets = enumerate_alternative_path_sets(&d, &net, &[a], 10).unwrap();
        let names: Vec<Vec<String>> = sets.iter().map(|s| d.ids(&s[0])).collect();
        assert_eq!(names, vec![vec!["d", "a", "t"], vec!["d", "b", "t"]]);
        assert_eq!(enumerate_alternative_path_sets(&d, &net, &[a], 1).unwrap().len(), 1);
    }
}
