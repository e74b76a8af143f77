//! Structural controllability of target sets.
//!
//! A target set is certified controllable by a family of node-disjoint
//! paths, one per target, each starting at a distinct usable decision and
//! running through unobserved deterministic nodes only. Every parent of a
//! path node that is not itself on a path must then be either structurally
//! observable or controllable, recursively, by decisions the certificate
//! has not already spent.
//!
//! The path condition is checked exactly with a split-node max flow. The
//! off-path condition is checked per candidate path set, with a bounded
//! search over alternative path sets when it fails. Because the criterion
//! is sufficient but not necessary, a failed search reports `Inconclusive`;
//! only the flow bound (too few disjoint paths) reports `NotControllable`.

pub mod flow;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ControlError;
use crate::model::{InfluenceDiagram, NodeKind};
use crate::observability::{closure_with, ClosureOptions, ObservabilityReport};

use flow::{build_flow_network, max_node_disjoint_paths, Path, PathSetSearch};

pub const DEFAULT_RETRY_LIMIT: usize = 100;
pub const DEFAULT_MAX_DEPTH: usize = 3;

pub const DYNAMIC_NOTE: &str = "diagram unrolls a stationary dynamic system; \
partial controllability may additionally need a global nimbleness check across \
replicated stages, which is not performed";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ControlQuery {
    pub targets: Vec<String>,
    /// `None` allows every decision node.
    pub allowed_decisions: Option<Vec<String>>,
}

impl ControlQuery {
    pub fn new<S: AsRef<str>>(targets: &[S]) -> Self {
        ControlQuery {
            targets: targets.iter().map(|s| s.as_ref().to_owned()).collect(),
            allowed_decisions: None,
        }
    }

    pub fn with_decisions<S: AsRef<str>>(mut self, decisions: &[S]) -> Self {
        self.allowed_decisions = Some(decisions.iter().map(|s| s.as_ref().to_owned()).collect());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlOptions {
    pub retry_limit: usize,
    pub max_depth: usize,
    /// Treat decision values as known when judging off-path parents. The
    /// controller chooses them, so this is the default; turning it off makes
    /// every decision-dependent off-path parent need its own control.
    pub decisions_known: bool,
}

impl Default for ControlOptions {
    fn default() -> Self {
        ControlOptions {
            retry_limit: DEFAULT_RETRY_LIMIT,
            max_depth: DEFAULT_MAX_DEPTH,
            decisions_known: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathCertificate {
    pub paths: Vec<Vec<String>>,
    #[serde(default)]
    pub side_conditions: Vec<SideCondition>,
}

impl PathCertificate {
    pub fn sources(&self) -> Vec<&str> {
        self.paths
            .iter()
            .filter_map(|p| p.first().map(String::as_str))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideCondition {
    pub node: String,
    #[serde(flatten)]
    pub justification: Justification,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "snake_case")]
pub enum Justification {
    /// Known in the side-condition closure; `firing` indexes that closure's
    /// trace and is absent for initially known nodes.
    Observable {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        firing: Option<usize>,
    },
    Controllable { certificate: PathCertificate },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Refusal {
    ProbabilisticTarget { nodes: Vec<String> },
    InsufficientDecisions { available: usize, required: usize },
    InsufficientDisjointPaths { max_flow: usize, required: usize },
    SideConditionFailed { node: String, budget_exhausted: bool },
    RecursionDepthExhausted { node: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Controllable(PathCertificate),
    NotControllable(Refusal),
    Inconclusive(Refusal),
}

impl Verdict {
    pub fn is_controllable(&self) -> bool {
        matches!(self, Verdict::Controllable(_))
    }

    pub fn certificate(&self) -> Option<&PathCertificate> {
        match self {
            Verdict::Controllable(c) => Some(c),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Controllable(_) => "controllable",
            Verdict::NotControllable(_) => "not_controllable",
            Verdict::Inconclusive(_) => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllabilityReport {
    pub verdict: Verdict,
    /// Candidate path sets examined by the top-level search.
    pub attempts: usize,
    pub notes: Vec<String>,
}

#[derive(Serialize)]
struct ReportRepr<'a> {
    verdict: &'static str,
    #[serde(flatten)]
    detail: DetailRepr<'a>,
    attempts: usize,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    notes: &'a [String],
}

#[derive(Serialize)]
#[serde(untagged)]
enum DetailRepr<'a> {
    Certificate(&'a PathCertificate),
    Refusal(&'a Refusal),
}

impl Serialize for ControllabilityReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let detail = match &self.verdict {
            Verdict::Controllable(c) => DetailRepr::Certificate(c),
            Verdict::NotControllable(r) | Verdict::Inconclusive(r) => DetailRepr::Refusal(r),
        };
        ReportRepr {
            verdict: self.verdict.label(),
            detail,
            attempts: self.attempts,
            notes: &self.notes,
        }
        .serialize(serializer)
    }
}

/// Shared, read-only facts for one top-level query and its recursive
/// side-condition queries.
struct Context<'a> {
    d: &'a InfluenceDiagram,
    opts: ControlOptions,
    /// Decisions that are ancestors of an observed node: already fixed.
    predetermined: BTreeSet<usize>,
    /// Observability closure used for off-path parents.
    knowledge: ObservabilityReport,
}

impl<'a> Context<'a> {
    fn new(d: &'a InfluenceDiagram, opts: ControlOptions) -> Self {
        let observed = d.observed();
        let predetermined = d
            .ancestors(observed.iter().copied())
            .into_iter()
            .filter(|&v| d.kind(v) == NodeKind::Decision)
            .collect();
        let knowledge = closure_with(
            d,
            &ClosureOptions {
                decisions_known: opts.decisions_known,
                ..Default::default()
            },
        )
        .expect("no extra observed ids to resolve");
        Context {
            d,
            opts,
            predetermined,
            knowledge,
        }
    }
}

/// Resolves a query into (targets, allowed decisions).
fn resolve_query(
    d: &InfluenceDiagram,
    q: &ControlQuery,
) -> Result<(Vec<usize>, BTreeSet<usize>), ControlError> {
    if q.targets.is_empty() {
        return Err(ControlError::NoTargets);
    }
    let targets = d.resolve(&q.targets)?;
    let mut seen = BTreeSet::new();
    for &t in &targets {
        if !seen.insert(t) {
            return Err(ControlError::DuplicateTarget(d.id(t).to_owned()));
        }
    }
    let allowed = match &q.allowed_decisions {
        None => d.decisions(),
        Some(ids) => {
            let mut out = BTreeSet::new();
            for i in d.resolve(ids)? {
                if d.kind(i) != NodeKind::Decision {
                    return Err(ControlError::NotADecision(d.id(i).to_owned()));
                }
                out.insert(i);
            }
            out
        }
    };
    Ok((targets, allowed))
}

pub fn check_controllability(
    d: &InfluenceDiagram,
    q: &ControlQuery,
) -> Result<ControllabilityReport, ControlError> {
    check_controllability_with(d, q, ControlOptions::default())
}

pub fn check_controllability_with(
    d: &InfluenceDiagram,
    q: &ControlQuery,
    opts: ControlOptions,
) -> Result<ControllabilityReport, ControlError> {
    if opts.retry_limit == 0 {
        return Err(ControlError::ZeroRetryLimit);
    }
    let (targets, allowed) = resolve_query(d, q)?;
    let ctx = Context::new(d, opts);
    let (verdict, attempts) = solve(&ctx, &targets, &allowed, opts.max_depth);
    let mut notes = Vec::new();
    if d.is_dynamic() {
        notes.push(DYNAMIC_NOTE.to_owned());
    }
    Ok(ControllabilityReport {
        verdict,
        attempts,
        notes,
    })
}

fn solve(
    ctx: &Context,
    targets: &[usize],
    allowed: &BTreeSet<usize>,
    depth: usize,
) -> (Verdict, usize) {
    let d = ctx.d;

    let probabilistic: Vec<usize> = targets
        .iter()
        .copied()
        .filter(|&t| d.kind(t) == NodeKind::Probabilistic)
        .collect();
    if !probabilistic.is_empty() {
        let nodes = d.ids(&probabilistic);
        return (Verdict::NotControllable(Refusal::ProbabilisticTarget { nodes }), 0);
    }

    // a decision target is controllable by itself and is spent doing so
    let decision_targets: BTreeSet<usize> = targets
        .iter()
        .copied()
        .filter(|&t| d.kind(t) == NodeKind::Decision)
        .collect();
    let trivial: Vec<Path> = decision_targets.iter().map(|&t| vec![t]).collect();
    let rest: BTreeSet<usize> = targets
        .iter()
        .copied()
        .filter(|t| !decision_targets.contains(t))
        .collect();
    if rest.is_empty() {
        let cert = PathCertificate {
            paths: trivial.iter().map(|p| d.ids(p)).collect(),
            side_conditions: Vec::new(),
        };
        return (Verdict::Controllable(cert), 0);
    }

    let available: BTreeSet<usize> = allowed.difference(&decision_targets).copied().collect();
    if available.len() < rest.len() {
        let refusal = Refusal::InsufficientDecisions {
            available: available.len(),
            required: rest.len(),
        };
        return (Verdict::NotControllable(refusal), 0);
    }

    let sources: BTreeSet<usize> = available.difference(&ctx.predetermined).copied().collect();
    let max_flow = max_node_disjoint_paths(&build_flow_network(d, &sources, &rest)).len();
    if max_flow < rest.len() {
        let refusal = Refusal::InsufficientDisjointPaths {
            max_flow,
            required: rest.len(),
        };
        return (Verdict::NotControllable(refusal), 0);
    }

    let mut search = PathSetSearch::new(d, sources, rest, ctx.opts.retry_limit)
        .expect("retry limit checked at entry");
    let mut first_failure: Option<SideFailure> = None;
    while let Some(paths) = search.next_path_set() {
        let mut used: BTreeSet<usize> = decision_targets.clone();
        used.extend(paths.iter().map(|p| p[0]));
        match check_side_conditions(ctx, &paths, &used, allowed, depth) {
            Ok(side_conditions) => {
                let mut all = trivial.clone();
                all.extend(paths);
                all.sort_by_key(|p| *p.last().unwrap());
                let cert = PathCertificate {
                    paths: all.iter().map(|p| d.ids(p)).collect(),
                    side_conditions,
                };
                return (Verdict::Controllable(cert), search.attempts());
            }
            Err(failure) => {
                search.reject(&failure.implicated);
                first_failure.get_or_insert(failure);
            }
        }
    }

    let failure = first_failure.expect("max flow admits at least one path set");
    let node = d.id(failure.node).to_owned();
    let refusal = if failure.depth_exhausted {
        Refusal::RecursionDepthExhausted { node }
    } else {
        Refusal::SideConditionFailed {
            node,
            budget_exhausted: search.exhausted_budget(),
        }
    };
    (Verdict::Inconclusive(refusal), search.attempts())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideFailure {
    pub node: usize,
    /// Non-terminal path nodes that have `node` as a parent.
    pub implicated: Vec<usize>,
    pub depth_exhausted: bool,
}

/// Off-path parents of path nodes: parents of every path node except the
/// source decisions, minus the path nodes themselves.
pub fn off_path_parents(d: &InfluenceDiagram, paths: &[Path]) -> BTreeSet<usize> {
    let on_path: BTreeSet<usize> = paths.iter().flatten().copied().collect();
    on_path
        .iter()
        .filter(|&&v| d.kind(v) != NodeKind::Decision)
        .flat_map(|&v| d.parents(v).iter().copied())
        .filter(|p| !on_path.contains(p))
        .collect()
}

/// Justifies every off-path parent of `paths`, spending decisions from
/// `allowed` that are not in `used` on recursive sub-certificates.
pub fn check_side_conditions_for(
    d: &InfluenceDiagram,
    paths: &[Path],
    used: &BTreeSet<usize>,
    allowed: &BTreeSet<usize>,
    opts: ControlOptions,
) -> Result<Vec<SideCondition>, SideFailure> {
    let ctx = Context::new(d, opts);
    check_side_conditions(&ctx, paths, used, allowed, opts.max_depth)
}

fn check_side_conditions(
    ctx: &Context,
    paths: &[Path],
    used: &BTreeSet<usize>,
    allowed: &BTreeSet<usize>,
    depth: usize,
) -> Result<Vec<SideCondition>, SideFailure> {
    let d = ctx.d;
    let mut used = used.clone();
    let mut out = Vec::new();
    for p in off_path_parents(d, paths) {
        let id = d.id(p);
        if ctx.knowledge.is_known(id) {
            out.push(SideCondition {
                node: id.to_owned(),
                justification: Justification::Observable {
                    firing: ctx.knowledge.firing_for(id),
                },
            });
            continue;
        }
        let failure = |depth_exhausted| SideFailure {
            node: p,
            implicated: paths
                .iter()
                .flat_map(|path| path[..path.len() - 1].iter().copied())
                .filter(|&v| d.has_arc(p, v))
                .collect(),
            depth_exhausted,
        };
        if !d.kind(p).is_functional() {
            return Err(failure(false));
        }
        if depth == 0 {
            return Err(failure(true));
        }
        let pool: BTreeSet<usize> = allowed.difference(&used).copied().collect();
        match solve(ctx, &[p], &pool, depth - 1) {
            (Verdict::Controllable(certificate), _) => {
                for s in certificate.sources() {
                    used.insert(d.index_of(s).expect("certificate names diagram nodes"));
                }
                out.push(SideCondition {
                    node: id.to_owned(),
                    justification: Justification::Controllable { certificate },
                });
            }
            (Verdict::Inconclusive(Refusal::RecursionDepthExhausted { .. }), _) => {
                return Err(failure(true))
            }
            _ => return Err(failure(false)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct CertificateError(pub String);

pub fn verify_certificate(d: &InfluenceDiagram, q: &ControlQuery, cert: &PathCertificate) -> bool {
    check_certificate(d, q, cert).is_ok()
}

/// Re-checks every certificate condition from scratch, with a reason on
/// failure.
pub fn check_certificate(
    d: &InfluenceDiagram,
    q: &ControlQuery,
    cert: &PathCertificate,
) -> Result<(), CertificateError> {
    check_certificate_with(d, q, cert, ControlOptions::default())
}

/// As [`check_certificate`], judging observability with `opts.decisions_known`.
pub fn check_certificate_with(
    d: &InfluenceDiagram,
    q: &ControlQuery,
    cert: &PathCertificate,
    opts: ControlOptions,
) -> Result<(), CertificateError> {
    let (targets, allowed) =
        resolve_query(d, q).map_err(|e| CertificateError(format!("bad query: {e}")))?;
    let ctx = Context::new(d, opts);
    verify_level(&ctx, &targets, &allowed, cert).map(|_| ())
}

fn verify_level(
    ctx: &Context,
    targets: &[usize],
    allowed: &BTreeSet<usize>,
    cert: &PathCertificate,
) -> Result<BTreeSet<usize>, CertificateError> {
    let d = ctx.d;
    let fail = |msg: String| Err(CertificateError(msg));

    let mut paths: Vec<Path> = Vec::with_capacity(cert.paths.len());
    for path in &cert.paths {
        let resolved = d
            .resolve(path)
            .map_err(|e| CertificateError(format!("path {path:?}: {e}")))?;
        if resolved.is_empty() {
            return fail("empty path".into());
        }
        paths.push(resolved);
    }
    if paths.len() != targets.len() {
        return fail(format!("{} paths for {} targets", paths.len(), targets.len()));
    }

    let target_set: BTreeSet<usize> = targets.iter().copied().collect();
    let ends: BTreeSet<usize> = paths.iter().map(|p| *p.last().unwrap()).collect();
    if ends != target_set {
        return fail("path endpoints do not match the targets".into());
    }

    let mut seen = BTreeSet::new();
    for p in &paths {
        for &v in p {
            if !seen.insert(v) {
                return fail(format!("paths share node \"{}\"", d.id(v)));
            }
        }
    }

    let mut sources = BTreeSet::new();
    for p in &paths {
        let s = p[0];
        if d.kind(s) != NodeKind::Decision {
            return fail(format!("path starts at non-decision \"{}\"", d.id(s)));
        }
        if p.len() == 1 {
            // only a decision target may control itself
            if !target_set.contains(&s) {
                return fail(format!("single-node path at non-target \"{}\"", d.id(s)));
            }
        } else {
            if !allowed.contains(&s) {
                return fail(format!("decision \"{}\" is not allowed", d.id(s)));
            }
            if ctx.predetermined.contains(&s) {
                return fail(format!(
                    "decision \"{}\" precedes an observed node and cannot act as a control",
                    d.id(s)
                ));
            }
        }
        sources.insert(s);
        for w in p.windows(2) {
            if !d.has_arc(w[0], w[1]) {
                return fail(format!("no arc \"{}\" -> \"{}\"", d.id(w[0]), d.id(w[1])));
            }
        }
        for &v in &p[1..] {
            if !d.kind(v).is_functional() {
                return fail(format!("path node \"{}\" is {}", d.id(v), d.kind(v)));
            }
            if d.node(v).observed {
                return fail(format!("path node \"{}\" is observed", d.id(v)));
            }
        }
    }

    let required = off_path_parents(d, &paths);
    let mut covered = BTreeSet::new();
    let mut spent = sources.clone();
    for sc in &cert.side_conditions {
        let p = d
            .index_of(&sc.node)
            .ok_or_else(|| CertificateError(format!("unknown side-condition node \"{}\"", sc.node)))?;
        if !required.contains(&p) {
            return fail(format!("\"{}\" is not an off-path parent", sc.node));
        }
        if !covered.insert(p) {
            return fail(format!("\"{}\" justified twice", sc.node));
        }
        match &sc.justification {
            Justification::Observable { firing } => {
                if !ctx.knowledge.is_known(&sc.node) {
                    return fail(format!("\"{}\" is not observable", sc.node));
                }
                if let Some(k) = firing {
                    let ok = ctx
                        .knowledge
                        .trace
                        .get(*k)
                        .is_some_and(|f| f.newly_known.contains(&sc.node));
                    if !ok {
                        return fail(format!("firing {k} does not deduce \"{}\"", sc.node));
                    }
                }
            }
            Justification::Controllable { certificate } => {
                if !d.kind(p).is_functional() {
                    return fail(format!("\"{}\" cannot be controlled", sc.node));
                }
                let pool: BTreeSet<usize> = allowed.difference(&spent).copied().collect();
                let sub = verify_level(ctx, &[p], &pool, certificate)?;
                spent.extend(sub);
            }
        }
    }
    if covered != required {
        let missing: Vec<String> = d.ids(required.difference(&covered));
        return fail(format!("unjustified off-path parents {missing:?}"));
    }
    Ok(spent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arc, Node};

    use NodeKind::{Decision as Dc, Deterministic as Det, Probabilistic as Prob};

    fn diagram(nodes: &[(&str, NodeKind, bool)], arcs: &[(&str, &str)]) -> InfluenceDiagram {
        InfluenceDiagram::new(
            nodes.iter().map(|&(id, kind, observed)| Node {
                id: id.into(),
                kind,
                observed,
            }),
            arcs.iter().map(|&(a, b)| Arc::new(a, b)),
        )
        .unwrap()
    }

    #[test]
    fn decision_target_is_trivially_controllable() {
        let d = diagram(&[("d", Dc, false)], &[]);
        let r = check_controllability(&d, &ControlQuery::new(&["d"])).unwrap();
        let cert = r.verdict.certificate().unwrap();
        assert_eq!(cert.paths, vec![vec!["d".to_owned()]]);
        assert!(verify_certificate(&d, &ControlQuery::new(&["d"]), cert));
    }

    #[test]
    fn probabilistic_target_refused() {
        let d = diagram(&[("d", Dc, false), ("x", Prob, false)], &[("d", "x")]);
        let r = check_controllability(&d, &ControlQuery::new(&["x"])).unwrap();
        assert_eq!(
            r.verdict,
            Verdict::NotControllable(Refusal::ProbabilisticTarget { nodes: vec!["x".into()] })
        );
    }

    #[test]
    fn query_errors() {
        let d = diagram(&[("d", Dc, false), ("t", Det, false)], &[("d", "t")]);
        assert!(matches!(
            check_controllability(&d, &ControlQuery::new(&["zz"])),
            Err(ControlError::Model(_))
        ));
        assert_eq!(
            check_controllability(&d, &ControlQuery::new(&["t", "t"])),
            Err(ControlError::DuplicateTarget("t".into()))
        );
        assert_eq!(
            check_controllability(&d, &ControlQuery::new(&["d"]).with_decisions(&["t"])),
            Err(ControlError::NotADecision("t".into()))
        );
        assert_eq!(
            check_controllability(&d, &ControlQuery::new::<&str>(&[])),
            Err(ControlError::NoTargets)
        );
    }

    #[test]
    fn too_few_decisions() {
        let d = diagram(
            &[("d", Dc, false), ("a", Det, false), ("b", Det, false)],
            &[("d", "a"), ("d", "b")],
        );
        let r = check_controllability(&d, &ControlQuery::new(&["a", "b"])).unwrap();
        assert_eq!(
            r.verdict,
            Verdict::NotControllable(Refusal::InsufficientDecisions { available: 1, required: 2 })
        );
    }

    #[test]
    fn bottleneck_reports_flow_bound() {
        let d = diagram(
            &[
                ("d1", Dc, false),
                ("d2", Dc, false),
                ("m", Det, false),
                ("t1", Det, false),
                ("t2", Det, false),
            ],
            &[("d1", "m"), ("d2", "m"), ("m", "t1"), ("m", "t2")],
        );
        let r = check_controllability(&d, &ControlQuery::new(&["t1", "t2"])).unwrap();
        assert_eq!(
            r.verdict,
            Verdict::NotControllable(Refusal::InsufficientDisjointPaths { max_flow: 1, required: 2 })
        );
    }

    #[test]
    fn predetermined_decision_not_used() {
        // d feeds an observed node, so it is already fixed
        let d = diagram(
            &[("d", Dc, false), ("o", Det, true), ("t", Det, false)],
            &[("d", "o"), ("d", "t")],
        );
        let r = check_controllability(&d, &ControlQuery::new(&["t"])).unwrap();
        assert!(matches!(
            r.verdict,
            Verdict::NotControllable(Refusal::InsufficientDisjointPaths { max_flow: 0, .. })
        ));
    }

    #[test]
    fn observed_interior_node_not_used() {
        let d = diagram(
            &[("d", Dc, false), ("m", Det, true), ("t", Det, false)],
            &[("d", "m"), ("m", "t")],
        );
        let r = check_controllability(&d, &ControlQuery::new(&["t"])).unwrap();
        assert!(!r.verdict.is_controllable());
    }

    /// d -> a -> t and e -> b -> t, with a also feeding b.
    fn crossed() -> InfluenceDiagram {
        diagram(
            &[
                ("d", Dc, false),
                ("e", Dc, false),
                ("a", Det, false),
                ("b", Det, false),
                ("t", Det, false),
            ],
            &[("d", "a"), ("a", "b"), ("a", "t"), ("e", "b"), ("b", "t")],
        )
    }

    fn decisions_unknown() -> ControlOptions {
        ControlOptions {
            decisions_known: false,
            ..Default::default()
        }
    }

    #[test]
    fn retry_finds_clean_route() {
        // with decisions unknown, routing through a leaves b needing control
        // and no decision to spare; routing through b lets d drive a
        let d = crossed();
        let q = ControlQuery::new(&["t"]);
        let r = check_controllability_with(&d, &q, decisions_unknown()).unwrap();
        let cert = r.verdict.certificate().expect("controllable");
        assert_eq!(cert.paths, vec![vec!["e", "b", "t"]]);
        assert_eq!(r.attempts, 2);
        assert_eq!(cert.side_conditions.len(), 1);
        assert_eq!(cert.side_conditions[0].node, "a");
        assert!(matches!(
            &cert.side_conditions[0].justification,
            Justification::Controllable { certificate } if certificate.paths == vec![vec!["d", "a"]]
        ));
        assert_eq!(check_certificate_with(&d, &q, cert, decisions_unknown()), Ok(()));

        let r = check_controllability_with(
            &d,
            &q,
            ControlOptions {
                retry_limit: 1,
                ..decisions_unknown()
            },
        )
        .unwrap();
        assert_eq!(
            r.verdict,
            Verdict::Inconclusive(Refusal::SideConditionFailed {
                node: "b".into(),
                budget_exhausted: true
            })
        );

        // with decisions known, a is a function of d and the first route works
        let r = check_controllability(&d, &q).unwrap();
        assert_eq!(r.attempts, 1);
        assert_eq!(r.verdict.certificate().unwrap().paths, vec![vec!["d", "a", "t"]]);
    }

    #[test]
    fn side_condition_controlled_by_spare_decision() {
        // t = f(a, q); q is driven by a second decision e
        let d = diagram(
            &[
                ("d", Dc, false),
                ("e", Dc, false),
                ("a", Det, false),
                ("q", Det, false),
                ("t", Det, false),
            ],
            &[("d", "a"), ("a", "t"), ("e", "q"), ("q", "t")],
        );
        let q = ControlQuery::new(&["t"]);
        let r = check_controllability(&d, &q).unwrap();
        let cert = r.verdict.certificate().expect("controllable");
        assert!(verify_certificate(&d, &q, cert));
    }

    #[test]
    fn recursion_depth_zero_is_inconclusive() {
        // q is deterministic with an unobserved chance parent, so it is not
        // observable and needs its own control
        let d = diagram(
            &[
                ("d", Dc, false),
                ("e", Dc, false),
                ("a", Det, false),
                ("n", Prob, false),
                ("q", Det, false),
                ("t", Det, false),
            ],
            &[("d", "a"), ("a", "t"), ("e", "q"), ("n", "q"), ("q", "t")],
        );
        let q = ControlQuery::new(&["t"]).with_decisions(&["d", "e"]);
        let r = check_controllability_with(
            &d,
            &q,
            ControlOptions {
                max_depth: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(
            r.verdict,
            Verdict::Inconclusive(Refusal::RecursionDepthExhausted { .. })
        ));
    }

    #[test]
    fn verify_rejects_broken_certificates() {
        let d = crossed();
        let q = ControlQuery::new(&["t"]);
        let observable = |node: &str| SideCondition {
            node: node.into(),
            justification: Justification::Observable { firing: None },
        };
        let path = |ids: &[&str]| ids.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let good = PathCertificate {
            paths: vec![path(&["d", "a", "t"])],
            side_conditions: vec![SideCondition {
                node: "b".into(),
                justification: Justification::Controllable {
                    certificate: PathCertificate {
                        paths: vec![path(&["e", "b"])],
                        side_conditions: vec![observable("a")],
                    },
                },
            }],
        };
        assert_eq!(check_certificate(&d, &q, &good), Ok(()));
        // a is not known when decisions are not
        assert!(check_certificate_with(&d, &q, &good, decisions_unknown()).is_err());

        let mut missing = good.clone();
        missing.side_conditions.clear();
        assert!(!verify_certificate(&d, &q, &missing));

        let claimed = PathCertificate {
            paths: good.paths.clone(),
            side_conditions: vec![observable("b")],
        };
        assert_eq!(check_certificate(&d, &q, &claimed), Ok(()));
        assert!(check_certificate_with(&d, &q, &claimed, decisions_unknown()).is_err());

        let reused = PathCertificate {
            paths: good.paths.clone(),
            side_conditions: vec![SideCondition {
                node: "b".into(),
                justification: Justification::Controllable {
                    certificate: PathCertificate {
                        paths: vec![path(&["d", "a", "b"])],
                        side_conditions: vec![],
                    },
                },
            }],
        };
        assert!(!verify_certificate(&d, &q, &reused));

        let skipping = PathCertificate {
            paths: vec![path(&["d", "t"])],
            side_conditions: vec![],
        };
        assert!(!verify_certificate(&d, &q, &skipping));
    }

    #[test]
    fn report_json_shapes() {
        let d = crossed();
        let r = check_controllability(&d, &ControlQuery::new(&["t"])).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(
            json,
            r#"{"verdict":"controllable","paths":[["d","a","t"]],"side_conditions":[{"node":"b","by":"observable","firing":1}],"attempts":1}"#
        );
        let refused = ControllabilityReport {
            verdict: Verdict::NotControllable(Refusal::InsufficientDisjointPaths {
                max_flow: 2,
                required: 3,
            }),
            attempts: 0,
            notes: vec![],
        };
        assert_eq!(
            serde_json::to_string(&refused).unwrap(),
            r#"{"verdict":"not_controllable","reason":"insufficient_disjoint_paths","max_flow":2,"required":3,"attempts":0}"#
        );
    }
}
