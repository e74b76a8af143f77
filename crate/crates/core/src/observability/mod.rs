//! Structural observability closure.
//!
//! Starting from the observed nodes, two rules are applied until neither
//! adds anything:
//!
//! * an unknown functional (deterministic or value) node whose parents are
//!   all known becomes known;
//! * within a family class of known functional nodes, a set `U` of unknown
//!   parents becomes known when some subset `S` of the class has exactly `U`
//!   as its unknown parents, `|U| = |S|`, and `U` can be perfectly matched
//!   into `S`.
//!
//! The single-parent special cases ("all but one parent known", chains of
//! functional nodes) fall out of re-running the loop on newly known nodes.
//! Probabilistic nodes are never deduced from their parents, only from
//! known functional children.

pub mod bipartite;

use std::collections::{BTreeMap, BTreeSet};

use petgraph::graph::DiGraph;
use petgraph::unionfind::UnionFind;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ModelError;
use crate::model::{InfluenceDiagram, NodeKind};

use bipartite::{coarse_decomposition, maximum_matching};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    AllParentsKnown,
    KByKMatching,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleFiring {
    pub rule: Rule,
    /// Known functional children the firing was read off.
    pub children: Vec<String>,
    pub newly_known: Vec<String>,
    /// Every known node the deduction used: the children plus their
    /// already-known parents (for `AllParentsKnown`, the parents).
    pub premises: Vec<String>,
    /// (parent, child) pairs of the perfect matching.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matching: Option<Vec<(String, String)>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedundancyWarning {
    pub children: Vec<String>,
    pub parents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub known_initial: Vec<String>,
    pub observable: Vec<String>,
    pub unknown: Vec<String>,
    pub trace: Vec<RuleFiring>,
    pub redundancy_warnings: Vec<RedundancyWarning>,
}

impl ObservabilityReport {
    pub fn is_known(&self, id: &str) -> bool {
        self.known_initial.binary_search_by(|k| k.as_str().cmp(id)).is_ok()
            || self.observable.binary_search_by(|k| k.as_str().cmp(id)).is_ok()
    }

    pub fn is_observable(&self, id: &str) -> bool {
        self.observable.binary_search_by(|k| k.as_str().cmp(id)).is_ok()
    }

    /// Index of the firing that made `id` known, if it was deduced.
    pub fn firing_for(&self, id: &str) -> Option<usize> {
        self.trace
            .iter()
            .position(|f| f.newly_known.iter().any(|n| n == id))
    }

    pub fn known_set(&self) -> BTreeSet<String> {
        self.known_initial
            .iter()
            .chain(&self.observable)
            .cloned()
            .collect()
    }
}

/// Mutable bookkeeping for one closure run.
#[derive(Debug, Clone)]
pub struct KnowledgeState {
    known: Vec<bool>,
    blocked: BTreeSet<(usize, usize)>,
    trace: Vec<RuleFiring>,
}

impl KnowledgeState {
    pub fn new(d: &InfluenceDiagram, known: impl IntoIterator<Item = usize>) -> Self {
        let mut flags = vec![false; d.len()];
        for i in known {
            flags[i] = true;
        }
        KnowledgeState {
            known: flags,
            blocked: BTreeSet::new(),
            trace: Vec::new(),
        }
    }

    pub fn is_known(&self, i: usize) -> bool {
        self.known[i]
    }

    pub fn known(&self) -> BTreeSet<usize> {
        (0..self.known.len()).filter(|&i| self.known[i]).collect()
    }

    pub fn blocked_arcs(&self) -> &BTreeSet<(usize, usize)> {
        &self.blocked
    }

    pub fn trace(&self) -> &[RuleFiring] {
        &self.trace
    }

    /// Unknown parents of `v` over arcs that are not blocked.
    pub fn unknown_parents(&self, d: &InfluenceDiagram, v: usize) -> Vec<usize> {
        d.parents(v)
            .iter()
            .copied()
            .filter(|&p| !self.known[p] && !self.blocked.contains(&(p, v)))
            .collect()
    }

    fn mark(&mut self, i: usize) {
        self.known[i] = true;
    }
}

/// Fires every unknown functional node whose parents are all known.
/// Candidates are judged against the state as it was on entry.
pub fn rule_all_parents_known(d: &InfluenceDiagram, state: &mut KnowledgeState) -> Vec<usize> {
    let fired: Vec<usize> = (0..d.len())
        .filter(|&v| {
            !state.known[v]
                && d.kind(v).is_functional()
                && d.parents(v).iter().all(|&p| state.known[p])
        })
        .collect();
    for &v in &fired {
        let parents = d.parents(v);
        state.trace.push(RuleFiring {
            rule: Rule::AllParentsKnown,
            children: vec![d.id(v).to_owned()],
            newly_known: vec![d.id(v).to_owned()],
            premises: d.ids(parents),
            matching: None,
        });
        for &p in parents {
            state.blocked.insert((p, v));
        }
        state.mark(v);
    }
    fired
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FamilyClassPartition {
    pub classes: Vec<Vec<usize>>,
}

/// Groups known functional nodes that share an unknown parent, closed
/// transitively. Classes and their members are sorted.
pub fn partition_family_classes(
    d: &InfluenceDiagram,
    state: &KnowledgeState,
    known_det: &[usize],
) -> FamilyClassPartition {
    let mut uf = UnionFind::<usize>::new(known_det.len());
    let mut first_child_of: BTreeMap<usize, usize> = BTreeMap::new();
    for (k, &v) in known_det.iter().enumerate() {
        for p in state.unknown_parents(d, v) {
            match first_child_of.get(&p) {
                Some(&j) => {
                    uf.union(j, k);
                }
                None => {
                    first_child_of.insert(p, k);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, &v) in known_det.iter().enumerate() {
        groups.entry(uf.find(k)).or_default().push(v);
    }
    let mut classes: Vec<Vec<usize>> = groups
        .into_values()
        .map(|mut c| {
            c.sort_unstable();
            c
        })
        .collect();
    classes.sort();
    FamilyClassPartition { classes }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchingOutcome {
    pub newly_known: Vec<usize>,
    pub warnings: Vec<RedundancyWarning>,
}

/// Deduces every parent set that is perfectly matched to a subset of `class`
/// whose unknown parents are exactly that set.
///
/// A maximum matching is computed between the class members and their
/// unknown parents. A parent is solvable exactly when no alternating path
/// from an unmatched parent reaches it; the solvable parents are then fired
/// block by block (strongly connected pieces of the "row needs column"
/// relation, dependencies first) so every firing is a minimal square system.
pub fn rule_matching(
    d: &InfluenceDiagram,
    state: &mut KnowledgeState,
    class: &[usize],
) -> MatchingOutcome {
    let rows: Vec<usize> = class
        .iter()
        .copied()
        .filter(|&v| state.known[v] && d.kind(v).is_functional())
        .filter(|&v| !state.unknown_parents(d, v).is_empty())
        .collect();
    let mut col_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: Vec<usize> = Vec::new();
    let adj: Vec<Vec<usize>> = rows
        .iter()
        .map(|&v| {
            state
                .unknown_parents(d, v)
                .into_iter()
                .map(|p| {
                    *col_of.entry(p).or_insert_with(|| {
                        cols.push(p);
                        cols.len() - 1
                    })
                })
                .collect()
        })
        .collect();

    let m = maximum_matching(&adj, cols.len());
    let dm = coarse_decomposition(&adj, cols.len(), &m);

    let mut outcome = MatchingOutcome {
        warnings: overdetermined_warnings(d, &rows, &cols, &adj, &dm.overdetermined_rows),
        ..Default::default()
    };

    // c -> c' when the row matched to c also involves c'
    let mut deps = DiGraph::<usize, ()>::new();
    let mut vertex = BTreeMap::new();
    for c in (0..cols.len()).filter(|&c| dm.determined_cols[c]) {
        vertex.insert(c, deps.add_node(c));
    }
    for (&c, &vc) in &vertex {
        let row = m.col_to_row[c].expect("determined columns are matched");
        for &other in &adj[row] {
            if other != c {
                deps.add_edge(vc, vertex[&other], ());
            }
        }
    }

    // tarjan_scc lists components dependencies-first
    for scc in petgraph::algo::tarjan_scc(&deps) {
        let mut block: Vec<usize> = scc.iter().map(|&n| deps[n]).collect();
        block.sort_unstable_by_key(|&c| cols[c]);
        let parents: Vec<usize> = block.iter().map(|&c| cols[c]).collect();
        let mut children: Vec<usize> = block
            .iter()
            .map(|&c| rows[m.col_to_row[c].unwrap()])
            .collect();
        children.sort_unstable();

        let mut premises: BTreeSet<usize> = children.iter().copied().collect();
        for &child in &children {
            premises.extend(d.parents(child).iter().filter(|&&p| state.known[p]));
        }
        let matching = block
            .iter()
            .map(|&c| {
                let child = rows[m.col_to_row[c].unwrap()];
                (d.id(cols[c]).to_owned(), d.id(child).to_owned())
            })
            .collect();
        state.trace.push(RuleFiring {
            rule: Rule::KByKMatching,
            children: d.ids(&children),
            newly_known: d.ids(&parents),
            premises: d.ids(&premises),
            matching: Some(matching),
        });
        for &child in &children {
            for p in state.unknown_parents(d, child) {
                state.blocked.insert((p, child));
            }
        }
        for &p in &parents {
            state.mark(p);
        }
        outcome.newly_known.extend(parents);
    }
    outcome.newly_known.sort_unstable();
    outcome
}

fn overdetermined_warnings(
    d: &InfluenceDiagram,
    rows: &[usize],
    cols: &[usize],
    adj: &[Vec<usize>],
    over: &[bool],
) -> Vec<RedundancyWarning> {
    let over_rows: Vec<usize> = (0..rows.len()).filter(|&r| over[r]).collect();
    if over_rows.is_empty() {
        return Vec::new();
    }
    // split into connected pieces via shared columns
    let mut uf = UnionFind::<usize>::new(rows.len());
    let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
    for &r in &over_rows {
        for &c in &adj[r] {
            match owner.get(&c) {
                Some(&o) => {
                    uf.union(o, r);
                }
                None => {
                    owner.insert(c, r);
                }
            }
        }
    }
    let mut pieces: BTreeMap<usize, (BTreeSet<usize>, BTreeSet<usize>)> = BTreeMap::new();
    for &r in &over_rows {
        let entry = pieces.entry(uf.find(r)).or_default();
        entry.0.insert(rows[r]);
        entry.1.extend(adj[r].iter().map(|&c| cols[c]));
    }
    let mut warnings: Vec<RedundancyWarning> = pieces
        .into_values()
        .map(|(children, parents)| RedundancyWarning {
            children: d.ids(&children),
            parents: d.ids(&parents),
        })
        .collect();
    warnings.sort_by(|a, b| a.children.cmp(&b.children));
    warnings
}

/// Rule-scheduling order for a closure run. The closure result does not
/// depend on it; shuffled schedules exist to test exactly that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Canonical,
    Shuffled(u64),
}

#[derive(Debug, Clone, Default)]
pub struct ClosureOptions {
    /// Nodes treated as observed on top of the diagram's own flags.
    pub observed: Vec<String>,
    /// Treat every decision node as known (post-decision analysis).
    pub decisions_known: bool,
    pub schedule: Schedule,
    /// Forget blocked arcs at the start of each outer pass instead of
    /// keeping them for the whole run.
    pub unblock_each_pass: bool,
}

pub fn observability_closure(d: &InfluenceDiagram) -> ObservabilityReport {
    closure_with(d, &ClosureOptions::default()).expect("no extra observed ids to resolve")
}

pub fn closure_with(
    d: &InfluenceDiagram,
    opts: &ClosureOptions,
) -> Result<ObservabilityReport, ModelError> {
    let mut initial = d.observed();
    initial.extend(d.resolve(&opts.observed)?);
    if opts.decisions_known {
        initial.extend(d.decisions());
    }
    Ok(run_closure(d, &initial, opts))
}

/// Closure from an explicit initial known set.
pub fn closure_from(
    d: &InfluenceDiagram,
    initial: &BTreeSet<usize>,
    opts: &ClosureOptions,
) -> ObservabilityReport {
    run_closure(d, initial, opts)
}

fn run_closure(
    d: &InfluenceDiagram,
    initial: &BTreeSet<usize>,
    opts: &ClosureOptions,
) -> ObservabilityReport {
    let mut state = KnowledgeState::new(d, initial.iter().copied());
    let mut rng = match opts.schedule {
        Schedule::Canonical => None,
        Schedule::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut warnings: Vec<RedundancyWarning> = Vec::new();

    loop {
        if opts.unblock_each_pass {
            state.blocked.clear();
        }
        let before = state.known().len();
        let matching_first = rng.as_mut().is_some_and(|r| r.gen_bool(0.5));
        if !matching_first {
            rule_all_parents_known(d, &mut state);
        }

        let known_det: Vec<usize> = (0..d.len())
            .filter(|&v| state.known[v] && d.kind(v).is_functional())
            .filter(|&v| !state.unknown_parents(d, v).is_empty())
            .collect();
        let mut classes = partition_family_classes(d, &state, &known_det).classes;
        if let Some(r) = rng.as_mut() {
            classes.shuffle(r);
            for class in &mut classes {
                class.shuffle(r);
            }
        }
        for class in &classes {
            let outcome = rule_matching(d, &mut state, class);
            for w in outcome.warnings {
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
        }

        if matching_first {
            rule_all_parents_known(d, &mut state);
        }
        if state.known().len() == before {
            break;
        }
    }

    warnings.sort_by(|a, b| (&a.children, &a.parents).cmp(&(&b.children, &b.parents)));
    let known = state.known();
    ObservabilityReport {
        known_initial: d.ids(initial),
        observable: d.ids(known.difference(initial)),
        unknown: d.ids((0..d.len()).filter(|i| !known.contains(i)).collect::<Vec<_>>().iter()),
        trace: state.trace,
        redundancy_warnings: warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("firing {index}: unknown node \"{id}\"")]
    UnknownNode { index: usize, id: String },
    #[error("firing {index}: {reason}")]
    Invalid { index: usize, reason: String },
}

/// Re-checks a trace from scratch against the diagram and returns the final
/// known set. Uses only the rule conditions, not the closure machinery.
pub fn replay_trace(
    d: &InfluenceDiagram,
    known_initial: &[String],
    trace: &[RuleFiring],
) -> Result<BTreeSet<String>, TraceError> {
    let mut known: BTreeSet<usize> = BTreeSet::new();
    for id in known_initial {
        known.insert(d.index_of(id).ok_or_else(|| TraceError::UnknownNode {
            index: 0,
            id: id.clone(),
        })?);
    }
    for (index, firing) in trace.iter().enumerate() {
        let resolve = |ids: &[String]| -> Result<Vec<usize>, TraceError> {
            ids.iter()
                .map(|id| {
                    d.index_of(id).ok_or_else(|| TraceError::UnknownNode {
                        index,
                        id: id.clone(),
                    })
                })
                .collect()
        };
        let bad = |reason: String| TraceError::Invalid { index, reason };
        let children = resolve(&firing.children)?;
        let newly = resolve(&firing.newly_known)?;
        let newly_set: BTreeSet<usize> = newly.iter().copied().collect();
        if newly_set.len() != newly.len() || newly.iter().any(|n| known.contains(n)) {
            return Err(bad("newly known nodes must be distinct and unknown".into()));
        }
        match firing.rule {
            Rule::AllParentsKnown => {
                if children.len() != 1 || newly != children {
                    return Err(bad("must name exactly its own child".into()));
                }
                let v = children[0];
                if !d.kind(v).is_functional() {
                    return Err(bad(format!("\"{}\" is not functional", d.id(v))));
                }
                if let Some(&p) = d.parents(v).iter().find(|p| !known.contains(p)) {
                    return Err(bad(format!("parent \"{}\" not yet known", d.id(p))));
                }
            }
            Rule::KByKMatching => {
                if children.len() != newly.len() || children.is_empty() {
                    return Err(bad("children and newly known differ in size".into()));
                }
                for &c in &children {
                    if !known.contains(&c) || !d.kind(c).is_functional() {
                        return Err(bad(format!("\"{}\" is not a known functional node", d.id(c))));
                    }
                }
                let unknown_parents: BTreeSet<usize> = children
                    .iter()
                    .flat_map(|&c| d.parents(c).iter().copied())
                    .filter(|p| !known.contains(p))
                    .collect();
                if unknown_parents != newly_set {
                    return Err(bad("unknown parents of the children differ from the deduced set".into()));
                }
                let pairs = firing
                    .matching
                    .as_ref()
                    .ok_or_else(|| bad("missing matching".into()))?;
                if pairs.len() != newly.len() {
                    return Err(bad("matching is not complete".into()));
                }
                let mut used_p = BTreeSet::new();
                let mut used_c = BTreeSet::new();
                let child_set: BTreeSet<usize> = children.iter().copied().collect();
                for (p, c) in pairs {
                    let p = resolve(std::slice::from_ref(p))?[0];
                    let c = resolve(std::slice::from_ref(c))?[0];
                    if !newly_set.contains(&p) || !child_set.contains(&c) || !d.has_arc(p, c) {
                        return Err(bad(format!("pair ({}, {}) is not a valid arc", d.id(p), d.id(c))));
                    }
                    if !used_p.insert(p) || !used_c.insert(c) {
                        return Err(bad("matching is not a bijection".into()));
                    }
                }
            }
        }
        known.extend(newly);
    }
    Ok(known.iter().map(|&i| d.id(i).to_owned()).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("chain is empty")]
    Empty,
    #[error("\"{0}\" is not a deterministic node")]
    NotDeterministic(String),
    #[error("no arc \"{0}\" -> \"{1}\"")]
    Broken(String, String),
    #[error("\"{node}\" has unknown parent \"{parent}\" besides its chain predecessor")]
    ExtraUnknownParent { node: String, parent: String },
}

/// Whether a chain of functional nodes, linked so that each node's only
/// unknown parent is its predecessor, has a known member (which makes every
/// member observable).
pub fn is_chain_observable<S: AsRef<str>>(
    d: &InfluenceDiagram,
    chain: &[S],
) -> Result<bool, ChainError> {
    let nodes = d.resolve(chain)?;
    if nodes.is_empty() {
        return Err(ChainError::Empty);
    }
    let observed = d.observed();
    for &v in &nodes {
        if d.kind(v) == NodeKind::Probabilistic || d.kind(v) == NodeKind::Decision {
            return Err(ChainError::NotDeterministic(d.id(v).to_owned()));
        }
    }
    for w in nodes.windows(2) {
        let (prev, next) = (w[0], w[1]);
        if !d.has_arc(prev, next) {
            return Err(ChainError::Broken(d.id(prev).into(), d.id(next).into()));
        }
        if let Some(&p) = d
            .parents(next)
            .iter()
            .find(|&&p| p != prev && !observed.contains(&p))
        {
            return Err(ChainError::ExtraUnknownParent {
                node: d.id(next).into(),
                parent: d.id(p).into(),
            });
        }
    }
    Ok(nodes.iter().any(|v| observed.contains(v)))
}
