//! Influence-diagram data model.
//!
//! Nodes are stored sorted by id, so a node's index doubles as its rank in
//! lexicographic id order. Every engine in this crate works on indices and
//! relies on that ordering for reproducible tie-breaking.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Probabilistic,
    Deterministic,
    Decision,
    Value,
}

impl NodeKind {
    pub const ALL: [NodeKind; 4] = [
        NodeKind::Probabilistic,
        NodeKind::Deterministic,
        NodeKind::Decision,
        NodeKind::Value,
    ];

    /// Deterministic and value nodes are pure functions of their parents.
    pub fn is_functional(self) -> bool {
        matches!(self, NodeKind::Deterministic | NodeKind::Value)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Probabilistic => "probabilistic",
            NodeKind::Deterministic => "deterministic",
            NodeKind::Decision => "decision",
            NodeKind::Value => "value",
        }
    }

    pub fn parse(s: &str) -> Option<NodeKind> {
        NodeKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub observed: bool,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: NodeKind) -> Self {
        Node {
            id: id.into(),
            kind,
            observed: false,
        }
    }

    pub fn observed(mut self) -> Self {
        self.observed = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Arc {
    pub from: String,
    pub to: String,
}

impl Arc {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Arc {
            from: from.into(),
            to: to.into(),
        }
    }
}

/// An influence diagram with derived parent/child indexes.
///
/// Construction checks only the structural well-formedness needed to build
/// the indexes (unique ids, known endpoints, no self-loops, no duplicate
/// arcs). Acyclicity and the kind rules are reported by [`crate::validate`].
#[derive(Debug, Clone)]
pub struct InfluenceDiagram {
    nodes: Vec<Node>,
    arcs: Vec<(usize, usize)>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    dynamic: bool,
}

impl PartialEq for InfluenceDiagram {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.arcs == other.arcs && self.dynamic == other.dynamic
    }
}

impl Eq for InfluenceDiagram {}

impl InfluenceDiagram {
    pub fn new(
        nodes: impl IntoIterator<Item = Node>,
        arcs: impl IntoIterator<Item = Arc>,
    ) -> Result<Self, ModelError> {
        let mut nodes: Vec<Node> = nodes.into_iter().collect();
        for (pos, node) in nodes.iter().enumerate() {
            if node.id.is_empty() {
                return Err(ModelError::EmptyId {
                    location: format!("nodes[{pos}]"),
                });
            }
        }
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = nodes.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(ModelError::DuplicateNode { id: w[0].id.clone() });
        }
        let index: HashMap<String, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();

        let mut seen = BTreeSet::new();
        for (pos, arc) in arcs.into_iter().enumerate() {
            let lookup = |id: &str| {
                index.get(id).copied().ok_or_else(|| ModelError::UnknownNode {
                    id: id.to_owned(),
                    location: format!("arcs[{pos}]"),
                })
            };
            let from = lookup(&arc.from)?;
            let to = lookup(&arc.to)?;
            if from == to {
                return Err(ModelError::SelfLoop { id: arc.from });
            }
            if !seen.insert((from, to)) {
                return Err(ModelError::DuplicateArc {
                    from: arc.from,
                    to: arc.to,
                });
            }
        }

        let arcs: Vec<(usize, usize)> = seen.into_iter().collect();
        let mut parents = vec![Vec::new(); nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        for &(u, v) in &arcs {
            parents[v].push(u);
            children[u].push(v);
        }
        // arcs are sorted by (from, to), so children lists are already sorted
        for p in &mut parents {
            p.sort_unstable();
        }

        Ok(InfluenceDiagram {
            nodes,
            arcs,
            index,
            parents,
            children,
            dynamic: false,
        })
    }

    pub fn empty() -> Self {
        InfluenceDiagram::new(Vec::new(), Vec::new()).expect("empty diagram is well-formed")
    }

    /// Marks the diagram as the unrolling of a stationary dynamic system.
    pub fn with_dynamic(mut self, dynamic: bool) -> Self {
        self.dynamic = dynamic;
        self
    }

    pub fn is_dynamic(&self) -> bool {
        self.dynamic
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn id(&self, i: usize) -> &str {
        &self.nodes[i].id
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        self.nodes[i].kind
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node_by_id(&self, id: &str) -> Option<&Node> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    /// Arcs as index pairs, sorted by (from, to).
    pub fn arc_indices(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn arcs(&self) -> impl Iterator<Item = Arc> + '_ {
        self.arcs
            .iter()
            .map(|&(u, v)| Arc::new(self.id(u), self.id(v)))
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn has_arc(&self, from: usize, to: usize) -> bool {
        self.children[from].binary_search(&to).is_ok()
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn ids<'a>(&'a self, set: impl IntoIterator<Item = &'a usize>) -> Vec<String> {
        set.into_iter().map(|&i| self.id(i).to_owned()).collect()
    }

    pub fn observed(&self) -> BTreeSet<usize> {
        (0..self.len()).filter(|&i| self.nodes[i].observed).collect()
    }

    pub fn decisions(&self) -> BTreeSet<usize> {
        self.of_kind(NodeKind::Decision)
    }

    pub fn of_kind(&self, kind: NodeKind) -> BTreeSet<usize> {
        (0..self.len()).filter(|&i| self.kind(i) == kind).collect()
    }

    /// Resolves ids to indices, failing on the first unknown id.
    pub fn resolve<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>, ModelError> {
        ids.iter()
            .map(|id| {
                let id = id.as_ref();
                self.index_of(id).ok_or_else(|| ModelError::UnknownNode {
                    id: id.to_owned(),
                    location: "query".to_owned(),
                })
            })
            .collect()
    }

    /// Returns a copy with the given nodes additionally marked observed.
    pub fn with_observed<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self, ModelError> {
        let mut out = self.clone();
        for i in self.resolve(ids)? {
            out.nodes[i].observed = true;
        }
        Ok(out)
    }

    /// Kahn topological order with ties broken by smallest index, or a
    /// witness cycle when the graph is cyclic.
    pub fn topological_order(&self) -> Result<Vec<usize>, Vec<usize>> {
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..self.len()).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(u) = ready.pop_first() {
            order.push(u);
            for &v in &self.children[u] {
                indegree[v] -= 1;
                if indegree[v] == 0 {
                    ready.insert(v);
                }
            }
        }
        if order.len() == self.len() {
            Ok(order)
        } else {
            Err(self.find_cycle(&indegree))
        }
    }

    // Walks backwards through nodes left with positive indegree; every such
    // node has a parent that is also left over, so the walk must revisit.
    fn find_cycle(&self, indegree: &[usize]) -> Vec<usize> {
        let start = (0..self.len())
            .find(|&i| indegree[i] > 0)
            .expect("cyclic graph leaves a node with positive indegree");
        let mut pos = vec![usize::MAX; self.len()];
        let mut walk = Vec::new();
        let mut cur = start;
        while pos[cur] == usize::MAX {
            pos[cur] = walk.len();
            walk.push(cur);
            cur = *self.parents[cur]
                .iter()
                .find(|&&p| indegree[p] > 0)
                .expect("leftover node has a leftover parent");
        }
        let mut cycle = walk.split_off(pos[cur]);
        cycle.reverse();
        // rotate so the smallest index leads, for stable messages
        let min = cycle
            .iter()
            .enumerate()
            .min_by_key(|&(_, &v)| v)
            .map(|(k, _)| k)
            .unwrap_or(0);
        cycle.rotate_left(min);
        cycle
    }

    /// All strict ancestors of the given nodes.
    pub fn ancestors(&self, of: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = of.into_iter().collect();
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if seen.insert(p) {
                    stack.push(p);
                }
            }
        }
        seen
    }
}
