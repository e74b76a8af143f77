//! Unrolling `x(t+1) = A x(t) + B u(t)`, `y(t) = C x(t)` structure patterns
//! into a stage-by-stage influence diagram.

use std::collections::BTreeSet;

use serde::Deserialize;

use crate::error::UnrollError;
use crate::model::{Arc, InfluenceDiagram, Node, NodeKind};

/// Zero/nonzero pattern of a matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternMatrix {
    rows: usize,
    cols: usize,
    nonzeros: BTreeSet<(usize, usize)>,
}

impl PatternMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        nonzeros: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, UnrollError> {
        let nonzeros: BTreeSet<(usize, usize)> = nonzeros.into_iter().collect();
        if let Some(&(row, col)) = nonzeros.iter().find(|&&(r, c)| r >= rows || c >= cols) {
            return Err(UnrollError::OutOfBounds {
                row,
                col,
                rows,
                cols,
            });
        }
        Ok(PatternMatrix {
            rows,
            cols,
            nonzeros,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.nonzeros.len()
    }

    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nonzeros.iter().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnrollSpec {
    pub a: PatternMatrix,
    pub b: PatternMatrix,
    pub c: Option<PatternMatrix>,
    pub horizon: usize,
    pub initial_observed: bool,
}

impl UnrollSpec {
    fn check(&self) -> Result<(), UnrollError> {
        let n = self.a.rows;
        if self.a.cols != n {
            return Err(UnrollError::Dimension(format!("A is {}x{}, not square", n, self.a.cols)));
        }
        if self.b.rows != n {
            return Err(UnrollError::Dimension(format!("B has {} rows, A has {n}", self.b.rows)));
        }
        if let Some(c) = &self.c {
            if c.cols != n {
                return Err(UnrollError::Dimension(format!("C has {} columns, A has {n}", c.cols)));
            }
        }
        if self.horizon == 0 {
            return Err(UnrollError::ZeroHorizon);
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    n: usize,
    m: usize,
    #[serde(default)]
    p: Option<usize>,
    #[serde(rename = "A")]
    a: Vec<(usize, usize)>,
    #[serde(rename = "B")]
    b: Vec<(usize, usize)>,
    #[serde(rename = "C", default)]
    c: Option<Vec<(usize, usize)>>,
    #[serde(rename = "T")]
    horizon: usize,
    #[serde(default)]
    initial_observed: bool,
}

/// Parses the JSON unroll spec. `p` (output count) is optional and defaults
/// to one past the largest output row named in `C`.
pub fn parse_unroll_spec(text: &str) -> Result<UnrollSpec, UnrollError> {
    let raw: RawSpec = serde_json::from_str(text).map_err(|e| UnrollError::Parse(e.to_string()))?;
    let c = match raw.c {
        None => None,
        Some(entries) => {
            let p = raw
                .p
                .unwrap_or_else(|| entries.iter().map(|&(r, _)| r + 1).max().unwrap_or(0));
            Some(PatternMatrix::new(p, raw.n, entries)?)
        }
    };
    let spec = UnrollSpec {
        a: PatternMatrix::new(raw.n, raw.n, raw.a)?,
        b: PatternMatrix::new(raw.n, raw.m, raw.b)?,
        c,
        horizon: raw.horizon,
        initial_observed: raw.initial_observed,
    };
    spec.check()?;
    Ok(spec)
}

pub fn state_id(i: usize, t: usize) -> String {
    format!("X{i}_{t}")
}

pub fn input_id(j: usize, t: usize) -> String {
    format!("U{j}_{t}")
}

pub fn output_id(k: usize, t: usize) -> String {
    format!("Y{k}_{t}")
}

/// Builds the dynamic graph. Stage-0 states are chance nodes (observed when
/// `initial_observed`), later states are deterministic, inputs are
/// decisions, and outputs are observed deterministic measurements.
pub fn unroll(spec: &UnrollSpec) -> Result<InfluenceDiagram, UnrollError> {
    spec.check()?;
    let n = spec.a.rows;
    let m = spec.b.cols;
    let horizon = spec.horizon;

    let mut nodes = Vec::new();
    for t in 0..=horizon {
        for i in 0..n {
            nodes.push(if t == 0 {
                Node {
                    id: state_id(i, 0),
                    kind: NodeKind::Probabilistic,
                    observed: spec.initial_observed,
                }
            } else {
                Node::new(state_id(i, t), NodeKind::Deterministic)
            });
        }
    }
    for t in 0..horizon {
        for j in 0..m {
            nodes.push(Node::new(input_id(j, t), NodeKind::Decision));
        }
    }
    if let Some(c) = &spec.c {
        for t in 1..=horizon {
            for k in 0..c.rows {
                nodes.push(Node::new(output_id(k, t), NodeKind::Deterministic).observed());
            }
        }
    }

    let mut arcs = Vec::new();
    for t in 0..horizon {
        for (to, from) in spec.a.nonzeros() {
            arcs.push(Arc::new(state_id(from, t), state_id(to, t + 1)));
        }
        for (to, from) in spec.b.nonzeros() {
            arcs.push(Arc::new(input_id(from, t), state_id(to, t + 1)));
        }
        if let Some(c) = &spec.c {
            for (k, i) in c.nonzeros() {
                arcs.push(Arc::new(state_id(i, t + 1), output_id(k, t + 1)));
            }
        }
    }

    let d = InfluenceDiagram::new(nodes, arcs).expect("unrolled ids are unique and arcs valid");
    Ok(d.with_dynamic(true))
}
