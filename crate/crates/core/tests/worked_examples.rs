use std::collections::BTreeSet;
use std::path::PathBuf;

use idgraph::observability::Rule;
use idgraph::oracle::{instantiate_linear, numeric_controllable, numeric_observable, rank};
use idgraph::unroll::{parse_unroll_spec, state_id, unroll, PatternMatrix, UnrollSpec};
use idgraph::{
    check_certificate, check_controllability, cross_check, observability_closure, parse_diagram,
    ControlQuery, InfluenceDiagram, Justification, PathCertificate, Refusal, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture(name: &str) -> InfluenceDiagram {
    let text = std::fs::read_to_string(fixtures().join(name)).unwrap();
    parse_diagram(&text).unwrap()
}

fn set(ids: &[&str]) -> BTreeSet<String> {
    ids.iter().map(|s| s.to_string()).collect()
}

fn owned(v: &[String]) -> BTreeSet<String> {
    v.iter().cloned().collect()
}

#[test]
fn layered_closure_trace() {
    let d = fixture("layered.json");
    let r = observability_closure(&d);
    assert_eq!(owned(&r.known_initial), set(&["D", "F", "G", "H"]));
    assert_eq!(owned(&r.observable), set(&["A", "B", "C", "E", "I"]));
    assert_eq!(owned(&r.unknown), set(&["J"]));

    let row = |learned: &[&str], premises: &[&str]| {
        r.trace
            .iter()
            .find(|f| owned(&f.newly_known) == set(learned))
            .map(|f| (f.rule, owned(&f.premises)))
            .unwrap_or_else(|| panic!("no firing for {learned:?}"))
            .eq(&(
                if learned == ["I"] { Rule::AllParentsKnown } else { Rule::KByKMatching },
                set(premises),
            ))
    };
    assert!(row(&["E"], &["D", "F", "H"]));
    assert!(row(&["A"], &["E"]));
    assert!(row(&["B", "C"], &["F", "G"]));
    assert!(row(&["I"], &["E", "F", "G"]));
    let bc = r.trace.iter().find(|f| f.newly_known.len() == 2).unwrap();
    assert_eq!(owned(&bc.children), set(&["F", "G"]));
}

#[test]
fn layered_numeric() {
    let d = fixture("layered.json");
    let observed = d.observed();
    let j = d.index_of("J").unwrap();
    for seed in 0..20 {
        let inst = instantiate_linear(&d, seed);
        assert_eq!(numeric_observable(&d, &inst, &observed, j), Ok(false));
        for id in ["A", "B", "C", "E", "I"] {
            assert_eq!(numeric_observable(&d, &inst, &observed, d.index_of(id).unwrap()), Ok(true), "{id}");
        }
    }
}

#[test]
fn option_volatility() {
    let d = fixture("option.json");
    let r = observability_closure(&d);
    let first = r.firing_for("implied_vol").expect("implied_vol deduced");
    let second = r.firing_for("vol_gap").expect("vol_gap deduced");
    assert!(first < second);
    assert_eq!(r.trace[first].rule, Rule::KByKMatching);
    assert_eq!(r.trace[second].rule, Rule::AllParentsKnown);
}

#[test]
fn coin_flip_inverts() {
    let d = fixture("coin_flip.json");
    assert!(observability_closure(&d).is_observable("x"));
}

#[test]
fn three_by_three_needs_all_three() {
    let d = fixture("three_by_three.json");
    let r = observability_closure(&d);
    assert_eq!(owned(&r.observable), set(&["x1", "x2", "x3"]));
    assert_eq!(r.trace.len(), 1);
    assert_eq!(r.trace[0].children.len(), 3);

    // generic nonsingularity of the pattern matrix
    let pattern = [[1, 0, 1], [1, 1, 1], [1, 1, 0]];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let full = (0..1000)
        .filter(|_| {
            let m: Vec<Vec<f64>> = pattern
                .iter()
                .map(|row| row.iter().map(|&p| p as f64 * rng.gen_range(-2.0..2.0)).collect())
                .collect();
            rank(&m, 1e-8) == 3
        })
        .count();
    assert!(full >= 990, "{full}");
}

fn factory(horizon: usize) -> InfluenceDiagram {
    unroll(&UnrollSpec {
        a: PatternMatrix::new(3, 3, [(1, 0), (1, 1), (1, 2), (2, 0)]).unwrap(),
        b: PatternMatrix::new(3, 1, [(0, 0)]).unwrap(),
        c: None,
        horizon,
        initial_observed: true,
    })
    .unwrap()
}

fn finals(horizon: usize) -> Vec<String> {
    (0..3).map(|i| state_id(i, horizon)).collect()
}

#[test]
fn factory_fixture_matches_unroll() {
    assert_eq!(fixture("factory_t3.json"), factory(3));
    let text = std::fs::read_to_string(fixtures().join("specs/factory.json")).unwrap();
    assert_eq!(unroll(&parse_unroll_spec(&text).unwrap()).unwrap(), factory(3));
}

#[test]
fn factory_paths() {
    for horizon in [3, 4, 5] {
        let d = factory(horizon);
        let q = ControlQuery::new(&finals(horizon));
        let r = check_controllability(&d, &q).unwrap();
        let cert = r.verdict.certificate().unwrap_or_else(|| panic!("T={horizon}: {:?}", r.verdict));
        assert_eq!(cert.paths.len(), 3);
        let nodes: Vec<&String> = cert.paths.iter().flatten().collect();
        assert_eq!(nodes.len(), nodes.iter().collect::<BTreeSet<_>>().len());
        assert_eq!(check_certificate(&d, &q, cert), Ok(()));
        assert_eq!(r.notes.len(), 1);
    }
}

#[test]
fn factory_reference_certificate() {
    let d = factory(3);
    let q = ControlQuery::new(&finals(3));
    let text = std::fs::read_to_string(fixtures().join("certificates/factory_reference.json")).unwrap();
    let cert: PathCertificate = serde_json::from_str(&text).unwrap();
    assert_eq!(check_certificate(&d, &q, &cert), Ok(()));

    let mut shared = cert.clone();
    shared.paths[2] = ["U0_0", "X0_1", "X0_2", "X1_3"].map(String::from).to_vec();
    assert!(check_certificate(&d, &q, &shared).is_err());
}

#[test]
fn wafer_models() {
    let d = fixture("wafer2.json");
    let q = ControlQuery::new(&["wafer_temp"]);
    let r = check_controllability(&d, &q).unwrap();
    let cert = r.verdict.certificate().expect("controllable");
    assert_eq!(cert.side_conditions.len(), 1);
    assert_eq!(cert.side_conditions[0].node, "heat_loss");
    assert!(matches!(cert.side_conditions[0].justification, Justification::Observable { .. }));
    let inst = instantiate_linear(&d, 3);
    let dial = BTreeSet::from([d.index_of("oven_dial").unwrap()]);
    let temp = BTreeSet::from([d.index_of("wafer_temp").unwrap()]);
    assert_eq!(numeric_controllable(&d, &inst, &dial, &temp, &d.observed()), Ok(true));

    let d = fixture("wafer1.json");
    let r = check_controllability(&d, &q).unwrap();
    assert_eq!(
        r.verdict,
        Verdict::Inconclusive(Refusal::SideConditionFailed {
            node: "heat_loss".into(),
            budget_exhausted: false
        })
    );
}

#[test]
fn unrolled_outputs_agree_with_oracle() {
    let spec = UnrollSpec {
        a: PatternMatrix::new(3, 3, [(1, 0), (1, 1), (1, 2), (2, 0)]).unwrap(),
        b: PatternMatrix::new(3, 1, [(0, 0)]).unwrap(),
        c: Some(PatternMatrix::new(1, 3, [(0, 1)]).unwrap()),
        horizon: 3,
        initial_observed: false,
    };
    let d = unroll(&spec).unwrap();
    let r = observability_closure(&d);
    // measuring Y alone through X1 cannot pin the chance initial state
    assert!(!r.is_observable("X0_0"));
    let x00 = d.index_of("X0_0").unwrap();
    for seed in 1..=5 {
        let inst = instantiate_linear(&d, seed);
        assert_eq!(numeric_observable(&d, &inst, &d.observed(), x00), Ok(false));
    }
    let check = cross_check(&d, &[1, 2, 3, 4, 5]).unwrap();
    assert!(check.is_sound(), "{:?}", check);
    assert!(check.observability.structural > 0);
}
