//! Structural observability and controllability for influence diagrams.
//!
//! Verdicts are decided from node kinds and arcs alone and come with
//! certificates that can be re-checked independently: rule-firing traces for
//! observability, node-disjoint path families for controllability. The
//! [`oracle`] module cross-checks both against random linear instantiations.

pub mod controllability;
pub mod crosscheck;
pub mod document;
pub mod error;
pub mod model;
pub mod observability;
pub mod oracle;
pub mod random;
pub mod unroll;
pub mod validate;

pub use controllability::{
    check_certificate, check_controllability, check_controllability_with, verify_certificate,
    ControlOptions, ControlQuery, ControllabilityReport, Justification, PathCertificate, Refusal,
    SideCondition, Verdict,
};
pub use document::{export_dot, parse_diagram, serialize_diagram, DotAnnotations};
pub use crosscheck::{cross_check, CrossCheckReport};
pub use error::{ControlError, ModelError, OracleError, UnrollError};
pub use model::{Arc, InfluenceDiagram, Node, NodeKind};
pub use observability::{
    closure_with, is_chain_observable, observability_closure, ClosureOptions, ObservabilityReport,
    RuleFiring,
};
pub use validate::{validate, ValidationReport};
