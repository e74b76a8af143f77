//! Structural verdicts against the numeric oracle, over several seeds.
//!
//! Soundness violations are structural claims the numbers refute. Numeric
//! successes the structural engines miss only lower the completeness rate.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::controllability::{
    check_controllability, off_path_parents, ControlQuery, Verdict,
};
use crate::error::OracleError;
use crate::model::{InfluenceDiagram, NodeKind};
use crate::observability::observability_closure;
use crate::oracle::{instantiate_linear, numeric_controllable, numeric_observable, with_resample};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Discrepancy {
    pub seed: u64,
    /// Queried node for observability, target set for controllability.
    pub nodes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Tally {
    pub queries: usize,
    pub structural: usize,
    pub numeric: usize,
    /// Numerically true and structurally established.
    pub agreed: usize,
    pub indeterminate: usize,
    pub violations: Vec<Discrepancy>,
}

impl Tally {
    /// Share of numerically true answers the structural engine found.
    pub fn completeness(&self) -> f64 {
        if self.numeric == 0 {
            1.0
        } else {
            self.agreed as f64 / self.numeric as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheckReport {
    pub seeds: Vec<u64>,
    pub observability: Tally,
    pub controllability: Tally,
}

impl CrossCheckReport {
    pub fn is_sound(&self) -> bool {
        self.observability.violations.is_empty() && self.controllability.violations.is_empty()
    }
}

/// Controllability queries used by the cross-check: every unobserved
/// functional node alone, plus all such nodes without functional children
/// together when there are several.
pub fn control_queries(d: &InfluenceDiagram) -> Vec<Vec<usize>> {
    let candidates: Vec<usize> = (0..d.len())
        .filter(|&v| d.kind(v).is_functional() && !d.node(v).observed)
        .collect();
    let mut out: Vec<Vec<usize>> = candidates.iter().map(|&v| vec![v]).collect();
    let sinks: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&v| !d.children(v).iter().any(|&c| d.kind(c).is_functional()))
        .collect();
    if sinks.len() > 1 {
        out.push(sinks);
    }
    out
}

/// Variables held fixed when a certificate's decisions are varied: the
/// off-path parents of the top-level paths, plus every observed node.
pub fn certificate_fixed_nodes(d: &InfluenceDiagram, paths: &[Vec<usize>]) -> BTreeSet<usize> {
    let mut fixed = off_path_parents(d, paths);
    fixed.extend(d.observed());
    fixed
}

pub fn cross_check(d: &InfluenceDiagram, seeds: &[u64]) -> Result<CrossCheckReport, OracleError> {
    if d.topological_order().is_err() {
        return Err(OracleError::Cyclic);
    }
    let mut report = CrossCheckReport {
        seeds: seeds.to_vec(),
        observability: Tally::default(),
        controllability: Tally::default(),
    };

    let closure = observability_closure(d);
    let observed = d.observed();
    let queries: Vec<usize> = (0..d.len()).filter(|v| !observed.contains(v)).collect();

    let controls: Vec<(Vec<usize>, Verdict)> = control_queries(d)
        .into_iter()
        .map(|targets| {
            let q = ControlQuery::new(&d.ids(&targets));
            let verdict = check_controllability(d, &q)
                .expect("query built from diagram nodes")
                .verdict;
            (targets, verdict)
        })
        .collect();

    for &seed in seeds {
        let tally = &mut report.observability;
        for &v in &queries {
            let structural = closure.is_observable(d.id(v));
            tally.queries += 1;
            tally.structural += structural as usize;
            let numeric = with_resample(seed, |s| {
                numeric_observable(d, &instantiate_linear(d, s), &observed, v)
            });
            record(tally, seed, d.ids(&[v]), structural, numeric);
        }

        let tally = &mut report.controllability;
        for (targets, verdict) in &controls {
            tally.queries += 1;
            let numeric = match verdict.certificate() {
                Some(cert) => {
                    tally.structural += 1;
                    let paths: Vec<Vec<usize>> = cert
                        .paths
                        .iter()
                        .map(|p| d.resolve(p).expect("certificate names diagram nodes"))
                        .filter(|p| p.len() > 1)
                        .collect();
                    let sources: BTreeSet<usize> = paths.iter().map(|p| p[0]).collect();
                    let fixed = certificate_fixed_nodes(d, &paths);
                    let ends: BTreeSet<usize> = targets
                        .iter()
                        .copied()
                        .filter(|&t| d.kind(t) != NodeKind::Decision)
                        .collect();
                    with_resample(seed, |s| {
                        numeric_controllable(d, &instantiate_linear(d, s), &sources, &ends, &fixed)
                    })
                }
                None => {
                    // completeness probe: every usable decision, nothing held
                    // beyond the evidence
                    let decisions = d.decisions();
                    let ends: BTreeSet<usize> = targets.iter().copied().collect();
                    with_resample(seed, |s| {
                        numeric_controllable(d, &instantiate_linear(d, s), &decisions, &ends, &observed)
                    })
                }
            };
            record(tally, seed, d.ids(targets), verdict.is_controllable(), numeric);
        }
    }
    Ok(report)
}

fn record(
    tally: &mut Tally,
    seed: u64,
    nodes: Vec<String>,
    structural: bool,
    numeric: Result<bool, OracleError>,
) {
    match numeric {
        Ok(true) => {
            tally.numeric += 1;
            tally.agreed += structural as usize;
        }
        Ok(false) if structural => tally.violations.push(Discrepancy { seed, nodes }),
        Ok(false) => {}
        Err(_) => tally.indeterminate += 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arc, Node};

    #[test]
    fn coin_flip_agrees() {
        let d = InfluenceDiagram::new(
            [
                Node::new("x", NodeKind::Probabilistic),
                Node::new("y", NodeKind::Deterministic).observed(),
            ],
            [Arc::new("x", "y")],
        )
        .unwrap();
        let r = cross_check(&d, &[1, 2, 3]).unwrap();
        assert_eq!(r.observability.queries, 3);
        assert_eq!(r.observability.agreed, 3);
        assert!(r.is_sound());
        assert_eq!(r.controllability.queries, 0);
    }

    #[test]
    fn cyclic_rejected() {
        let d = InfluenceDiagram::new(
            [
                Node::new("a", NodeKind::Deterministic),
                Node::new("b", NodeKind::Deterministic),
            ],
            [Arc::new("a", "b"), Arc::new("b", "a")],
        )
        .unwrap();
        assert_eq!(cross_check(&d, &[1]), Err(OracleError::Cyclic));
    }
}
