use serde::Serialize;

use crate::model::{InfluenceDiagram, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    Cycle,
    ValueNodeWithChildren,
    ObservedDecision,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
    pub nodes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

pub fn validate(d: &InfluenceDiagram) -> ValidationReport {
    let mut violations = Vec::new();

    if let Err(cycle) = d.topological_order() {
        let nodes = d.ids(&cycle);
        violations.push(Violation {
            code: ViolationCode::Cycle,
            message: format!("cycle {}", nodes.join(" -> ")),
            nodes,
        });
    }

    for (i, node) in d.nodes().iter().enumerate() {
        match node.kind {
            NodeKind::Value if !d.children(i).is_empty() => violations.push(Violation {
                code: ViolationCode::ValueNodeWithChildren,
                message: format!("value node \"{}\" has outgoing arcs", node.id),
                nodes: std::iter::once(node.id.clone())
                    .chain(d.ids(d.children(i)))
                    .collect(),
            }),
            NodeKind::Decision if node.observed => violations.push(Violation {
                code: ViolationCode::ObservedDecision,
                message: format!("decision node \"{}\" is marked observed", node.id),
                nodes: vec![node.id.clone()],
            }),
            _ => {}
        }
    }

    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}
