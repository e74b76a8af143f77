//! Seeded random diagrams for property suites and oracle cross-checks.

use rand::Rng;

use crate::model::{Arc, InfluenceDiagram, Node, NodeKind};

#[derive(Debug, Clone)]
pub struct DiagramConfig {
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Probability of an arc between any forward pair.
    pub arc_probability: f64,
    /// Relative weights for probabilistic, deterministic, decision, value.
    pub kind_weights: [u32; 4],
    /// Probability that a non-decision node is observed.
    pub observed_probability: f64,
}

impl Default for DiagramConfig {
    fn default() -> Self {
        DiagramConfig {
            min_nodes: 2,
            max_nodes: 12,
            arc_probability: 0.3,
            kind_weights: [3, 5, 2, 1],
            observed_probability: 0.3,
        }
    }
}

/// Draws a valid diagram: arcs only run from lower to higher position,
/// value nodes get no children and decisions are never observed.
pub fn random_diagram<R: Rng>(rng: &mut R, cfg: &DiagramConfig) -> InfluenceDiagram {
    let n = rng.gen_range(cfg.min_nodes..=cfg.max_nodes);
    let total: u32 = cfg.kind_weights.iter().sum();
    let kinds: Vec<NodeKind> = (0..n)
        .map(|_| {
            let mut pick = rng.gen_range(0..total);
            for (k, &w) in NodeKind::ALL.iter().zip(&cfg.kind_weights) {
                if pick < w {
                    return *k;
                }
                pick -= w;
            }
            NodeKind::Deterministic
        })
        .collect();
    let nodes: Vec<Node> = kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| Node {
            id: format!("n{i:02}"),
            kind,
            observed: kind != NodeKind::Decision && rng.gen_bool(cfg.observed_probability),
        })
        .collect();
    let mut arcs = Vec::new();
    for u in 0..n {
        if kinds[u] == NodeKind::Value {
            continue;
        }
        for (v, &kind) in kinds.iter().enumerate().skip(u + 1) {
            if kind != NodeKind::Decision && rng.gen_bool(cfg.arc_probability) {
                arcs.push(Arc::new(format!("n{u:02}"), format!("n{v:02}")));
            }
        }
    }
    InfluenceDiagram::new(nodes, arcs).expect("generated diagram is well-formed")
}
