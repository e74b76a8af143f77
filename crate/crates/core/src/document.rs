//! JSON diagram documents and Graphviz export.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::controllability::PathCertificate;
use crate::error::ModelError;
use crate::model::{Arc, InfluenceDiagram, Node, NodeKind};
use crate::observability::ObservabilityReport;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    nodes: Vec<RawNode>,
    arcs: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    dynamic: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: String,
    kind: String,
    #[serde(default)]
    observed: bool,
}

pub fn parse_diagram(text: &str) -> Result<InfluenceDiagram, ModelError> {
    let raw: RawDocument = serde_json::from_str(text).map_err(|e| ModelError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut nodes = Vec::with_capacity(raw.nodes.len());
    for (pos, n) in raw.nodes.into_iter().enumerate() {
        let kind = NodeKind::parse(&n.kind).ok_or_else(|| ModelError::UnknownKind {
            kind: n.kind.clone(),
            location: format!("nodes[{pos}]"),
        })?;
        nodes.push(Node {
            id: n.id,
            kind,
            observed: n.observed,
        });
    }
    let arcs = raw.arcs.into_iter().map(|(from, to)| Arc { from, to });
    Ok(InfluenceDiagram::new(nodes, arcs)?.with_dynamic(raw.dynamic))
}

/// Canonical document: nodes and arcs sorted by id, two-space indentation.
pub fn serialize_diagram(d: &InfluenceDiagram) -> String {
    let raw = RawDocument {
        nodes: d
            .nodes()
            .iter()
            .map(|n| RawNode {
                id: n.id.clone(),
                kind: n.kind.as_str().to_owned(),
                observed: n.observed,
            })
            .collect(),
        arcs: d.arcs().map(|a| (a.from, a.to)).collect(),
        dynamic: d.is_dynamic(),
    };
    let mut out = serde_json::to_string_pretty(&raw).expect("document serializes");
    out.push('\n');
    out
}

/// Highlights to overlay on a DOT rendering.
#[derive(Debug, Clone, Default)]
pub struct DotAnnotations {
    pub observable: BTreeSet<String>,
    pub controllable: BTreeSet<String>,
    pub path_arcs: BTreeSet<(String, String)>,
}

impl DotAnnotations {
    pub fn from_observability(report: &ObservabilityReport) -> Self {
        DotAnnotations {
            observable: report.observable.iter().cloned().collect(),
            ..Default::default()
        }
    }

    pub fn from_certificate(cert: &PathCertificate) -> Self {
        let mut out = DotAnnotations::default();
        for path in &cert.paths {
            if let Some(last) = path.last() {
                out.controllable.insert(last.clone());
            }
            for w in path.windows(2) {
                out.path_arcs.insert((w[0].clone(), w[1].clone()));
            }
        }
        out
    }
}

fn quote(id: &str) -> String {
    format!("\"{}\"", id.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn export_dot(d: &InfluenceDiagram, annotations: Option<&DotAnnotations>) -> String {
    let empty = DotAnnotations::default();
    let ann = annotations.unwrap_or(&empty);
    let mut out = String::from("digraph influence_diagram {\n  rankdir=LR;\n");
    for node in d.nodes() {
        let shape = match node.kind {
            NodeKind::Probabilistic => "circle",
            NodeKind::Deterministic => "doublecircle",
            NodeKind::Decision => "box",
            NodeKind::Value => "diamond",
        };
        let mut attrs = vec![format!("shape={shape}")];
        if node.observed {
            attrs.push("style=filled".into());
            attrs.push("fillcolor=gray80".into());
        }
        if ann.observable.contains(&node.id) {
            attrs.push("color=blue".into());
            attrs.push("penwidth=2".into());
        }
        if ann.controllable.contains(&node.id) {
            attrs.push("color=red".into());
            attrs.push("penwidth=2".into());
        }
        let _ = writeln!(out, "  {} [{}];", quote(&node.id), attrs.join(", "));
    }
    for arc in d.arcs() {
        let highlighted = ann.path_arcs.contains(&(arc.from.clone(), arc.to.clone()));
        let _ = writeln!(
            out,
            "  {} -> {}{};",
            quote(&arc.from),
            quote(&arc.to),
            if highlighted { " [color=red, penwidth=2]" } else { "" }
        );
    }
    out.push_str("}\n");
    out
}
