//! Numeric generic-rank oracle.
//!
//! A diagram is instantiated as a random linear model: each functional node
//! is a weighted sum of its parents, each probabilistic node additionally
//! carries its own exogenous noise variable, and decisions are free inputs.
//! Coefficients are bounded away from zero, so a rank decided at a small
//! relative tolerance matches the generic rank of the structure except on a
//! measure-zero set of draws.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::OracleError;
use crate::model::{InfluenceDiagram, NodeKind};

pub const RANK_TOLERANCE: f64 = 1e-8;
pub const COEFFICIENT_MIN: f64 = 0.1;
pub const COEFFICIENT_MAX: f64 = 2.0;

// Singular values between these bounds and the tolerance are too close to call.
const CLEAN_ZERO: f64 = 1e-11;
const CLEAN_NONZERO: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankOutcome {
    pub rank: usize,
    /// Some pivot landed near the tolerance; the rank is not trustworthy.
    pub ambiguous: bool,
}

/// Numeric rank: singular values above `tol` times the largest one.
pub fn rank(matrix: &[Vec<f64>], tol: f64) -> usize {
    rank_checked(matrix, tol).rank
}

/// As [`rank`], with rows first scaled to unit max-norm and an ambiguity
/// flag for singular values close to the tolerance.
pub fn rank_checked(matrix: &[Vec<f64>], tol: f64) -> RankOutcome {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    let mut out = RankOutcome {
        rank: 0,
        ambiguous: false,
    };
    if rows == 0 || cols == 0 {
        return out;
    }
    let m = DMatrix::from_fn(rows, cols, |i, j| {
        let norm = matrix[i].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if norm > 0.0 {
            matrix[i][j] / norm
        } else {
            0.0
        }
    });
    let sv = m.singular_values();
    let largest = sv.max();
    if largest == 0.0 {
        return out;
    }
    for &s in sv.iter() {
        let rel = s / largest;
        if rel > tol {
            out.rank += 1;
            out.ambiguous |= rel < CLEAN_NONZERO;
        } else {
            out.ambiguous |= rel > CLEAN_ZERO;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearInstantiation {
    seed: u64,
    /// One coefficient per arc, aligned with `InfluenceDiagram::arc_indices`.
    coefficients: Vec<f64>,
    arc_position: HashMap<(usize, usize), usize>,
    /// Probabilistic node -> index of its noise variable.
    noise: BTreeMap<usize, usize>,
}

impl LinearInstantiation {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn coefficient(&self, from: usize, to: usize) -> Option<f64> {
        self.arc_position.get(&(from, to)).map(|&k| self.coefficients[k])
    }

    pub fn coefficient_count(&self) -> usize {
        self.coefficients.len()
    }

    pub fn noise_count(&self) -> usize {
        self.noise.len()
    }

    pub fn noise_variable(&self, node: usize) -> Option<usize> {
        self.noise.get(&node).copied()
    }
}

pub fn instantiate_linear(d: &InfluenceDiagram, seed: u64) -> LinearInstantiation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coefficients = d
        .arc_indices()
        .iter()
        .map(|_| {
            let magnitude = rng.gen_range(COEFFICIENT_MIN..=COEFFICIENT_MAX);
            if rng.gen_bool(0.5) {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();
    let arc_position = d
        .arc_indices()
        .iter()
        .enumerate()
        .map(|(k, &arc)| (arc, k))
        .collect();
    let noise = d
        .of_kind(NodeKind::Probabilistic)
        .into_iter()
        .enumerate()
        .map(|(k, v)| (v, k))
        .collect();
    LinearInstantiation {
        seed,
        coefficients,
        arc_position,
        noise,
    }
}

/// Whether fixing the `observed` variables pins down `query` uniquely:
/// the query's unit vector must lie in the row space of the constraint
/// system restricted to the unknown variables.
pub fn numeric_observable(
    d: &InfluenceDiagram,
    inst: &LinearInstantiation,
    observed: &BTreeSet<usize>,
    query: usize,
) -> Result<bool, OracleError> {
    if observed.contains(&query) {
        return Ok(true);
    }
    // unknown columns: unobserved node variables, then every noise variable
    let mut column = HashMap::new();
    for v in (0..d.len()).filter(|v| !observed.contains(v)) {
        let next = column.len();
        column.insert(Var::Node(v), next);
    }
    for &v in inst.noise.keys() {
        let next = column.len();
        column.insert(Var::Noise(v), next);
    }
    let width = column.len();

    let mut rows = Vec::new();
    for v in 0..d.len() {
        if d.kind(v) == NodeKind::Decision {
            continue;
        }
        let mut row = vec![0.0; width];
        let mut touch = |var: Var, x: f64| {
            if let Some(&c) = column.get(&var) {
                row[c] += x;
            }
        };
        touch(Var::Node(v), 1.0);
        for &p in d.parents(v) {
            touch(Var::Node(p), -inst.coefficient(p, v).expect("every arc has a coefficient"));
        }
        if d.kind(v) == NodeKind::Probabilistic {
            touch(Var::Noise(v), -1.0);
        }
        rows.push(row);
    }

    let base = rank_checked(&rows, RANK_TOLERANCE);
    let mut unit = vec![0.0; width];
    unit[column[&Var::Node(query)]] = 1.0;
    rows.push(unit);
    let extended = rank_checked(&rows, RANK_TOLERANCE);
    if base.ambiguous || extended.ambiguous {
        return Err(OracleError::Indeterminate {
            seeds: vec![inst.seed],
        });
    }
    Ok(extended.rank == base.rank)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Var {
    Node(usize),
    Noise(usize),
}

/// Sensitivity of `targets` to `decisions` by forward substitution in
/// topological order. Noise and every other exogenous variable stay fixed,
/// as do the `fixed` nodes. Controllable when the sensitivity matrix has
/// full row rank.
pub fn numeric_controllable(
    d: &InfluenceDiagram,
    inst: &LinearInstantiation,
    decisions: &BTreeSet<usize>,
    targets: &BTreeSet<usize>,
    fixed: &BTreeSet<usize>,
) -> Result<bool, OracleError> {
    if let Some(&t) = targets.intersection(decisions).next() {
        return Err(OracleError::TargetIsDecision(d.id(t).to_owned()));
    }
    let order = d.topological_order().map_err(|_| OracleError::Cyclic)?;
    let columns: Vec<usize> = decisions.iter().copied().collect();
    let mut sensitivity = vec![vec![0.0; columns.len()]; d.len()];
    for v in order {
        if let Some(k) = columns.iter().position(|&c| c == v) {
            sensitivity[v][k] = 1.0;
            continue;
        }
        if fixed.contains(&v) || d.kind(v) == NodeKind::Decision {
            continue;
        }
        let mut acc = vec![0.0; columns.len()];
        for &p in d.parents(v) {
            let a = inst.coefficient(p, v).expect("every arc has a coefficient");
            for (x, s) in acc.iter_mut().zip(&sensitivity[p]) {
                *x += a * s;
            }
        }
        sensitivity[v] = acc;
    }
    if columns.is_empty() {
        return Ok(targets.is_empty());
    }
    let matrix: Vec<Vec<f64>> = targets.iter().map(|&t| sensitivity[t].clone()).collect();
    let outcome = rank_checked(&matrix, RANK_TOLERANCE);
    if outcome.ambiguous {
        return Err(OracleError::Indeterminate {
            seeds: vec![inst.seed],
        });
    }
    Ok(outcome.rank == targets.len())
}

pub fn derived_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Runs `f` at `seed`; on an indeterminate result retries once at the
/// derived seed, failing with both seeds if that is indeterminate too.
pub fn with_resample<T>(
    seed: u64,
    mut f: impl FnMut(u64) -> Result<T, OracleError>,
) -> Result<T, OracleError> {
    match f(seed) {
        Err(OracleError::Indeterminate { .. }) => match f(derived_seed(seed)) {
            Err(OracleError::Indeterminate { .. }) => Err(OracleError::Indeterminate {
                seeds: vec![seed, derived_seed(seed)],
            }),
            other => other,
        },
        other => other,
    }
}
