use std::collections::BTreeSet;

use idgraph::controllability::check_controllability_with;
use idgraph::crosscheck::control_queries;
use idgraph::observability::{closure_from, replay_trace, Schedule};
use idgraph::random::{random_diagram, DiagramConfig};
use idgraph::{
    check_certificate, closure_with, observability_closure, parse_diagram, serialize_diagram,
    ClosureOptions, ControlOptions, ControlQuery, InfluenceDiagram, NodeKind, Verdict,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn diagram(seed: u64) -> InfluenceDiagram {
    random_diagram(&mut ChaCha8Rng::seed_from_u64(seed), &DiagramConfig::default())
}

fn known(d: &InfluenceDiagram, opts: &ClosureOptions) -> BTreeSet<String> {
    closure_with(d, opts).unwrap().known_set()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn closure_is_a_fixed_point(seed in any::<u64>()) {
        let d = diagram(seed);
        let r = observability_closure(&d);
        let replayed = replay_trace(&d, &r.known_initial, &r.trace).unwrap();
        prop_assert_eq!(&replayed, &r.known_set());

        let all: BTreeSet<usize> = d.resolve(&r.known_set().into_iter().collect::<Vec<_>>()).unwrap().into_iter().collect();
        let again = closure_from(&d, &all, &ClosureOptions::default());
        prop_assert!(again.observable.is_empty());
        prop_assert!(again.trace.is_empty());
    }

    #[test]
    fn more_evidence_never_loses_knowledge(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let d = diagram(seed);
        let base = known(&d, &ClosureOptions::default());
        let extra = d.id(pick.index(d.len())).to_owned();
        let more = known(&d, &ClosureOptions { observed: vec![extra.clone()], ..Default::default() });
        prop_assert!(more.is_superset(&base));
        prop_assert!(more.contains(&extra));
    }

    #[test]
    fn schedule_does_not_change_the_closure(seed in any::<u64>()) {
        let d = diagram(seed);
        let canonical = known(&d, &ClosureOptions::default());
        for s in 0..20 {
            let shuffled = known(&d, &ClosureOptions { schedule: Schedule::Shuffled(s), ..Default::default() });
            prop_assert_eq!(&shuffled, &canonical, "schedule seed {}", s);
        }
        let unblocked = known(&d, &ClosureOptions { unblock_each_pass: true, ..Default::default() });
        prop_assert_eq!(&unblocked, &canonical);
    }

    #[test]
    fn documents_round_trip(seed in any::<u64>()) {
        let d = diagram(seed);
        let text = serialize_diagram(&d);
        let back = parse_diagram(&text).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(serialize_diagram(&back), text);
    }

    #[test]
    fn certificates_verify_and_avoid_fixed_decisions(seed in any::<u64>()) {
        let d = diagram(seed);
        let predetermined = d.ancestors(d.observed());
        for targets in control_queries(&d) {
            let q = ControlQuery::new(&d.ids(&targets));
            for decisions_known in [true, false] {
                let opts = ControlOptions { decisions_known, ..Default::default() };
                let r = check_controllability_with(&d, &q, opts).unwrap();
                let again = check_controllability_with(&d, &q, opts).unwrap();
                prop_assert_eq!(&r, &again);
                if let Verdict::Controllable(cert) = &r.verdict {
                    prop_assert_eq!(
                        idgraph::controllability::check_certificate_with(&d, &q, cert, opts),
                        Ok(())
                    );
                    for p in &cert.paths {
                        let source = d.index_of(&p[0]).unwrap();
                        prop_assert_eq!(d.kind(source), NodeKind::Decision);
                        prop_assert!(!predetermined.contains(&source));
                    }
                }
            }
        }
    }

    #[test]
    fn more_decisions_never_lose_control(seed in any::<u64>(), mask in any::<u32>()) {
        let d = diagram(seed);
        let all: Vec<String> = d.ids(&d.decisions());
        let subset: Vec<String> = all
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> (i % 32) & 1 == 1)
            .map(|(_, id)| id.clone())
            .collect();
        for targets in control_queries(&d) {
            let ids = d.ids(&targets);
            let small = check_controllability_with(&d, &ControlQuery::new(&ids).with_decisions(&subset), ControlOptions::default()).unwrap();
            if small.verdict.is_controllable() {
                let big = check_controllability_with(&d, &ControlQuery::new(&ids).with_decisions(&all), ControlOptions::default()).unwrap();
                prop_assert!(big.verdict.is_controllable(), "{:?} with {:?} vs all", ids, subset);
            }
        }
    }
}

#[test]
fn verdicts_are_reproducible_across_a_corpus() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let d = diagram(rng.gen());
        let a = serde_json::to_string(&observability_closure(&d)).unwrap();
        let b = serde_json::to_string(&observability_closure(&d)).unwrap();
        assert_eq!(a, b);
        for targets in control_queries(&d) {
            let q = ControlQuery::new(&d.ids(&targets));
            let r = idgraph::check_controllability(&d, &q).unwrap();
            if let Some(cert) = r.verdict.certificate() {
                assert_eq!(check_certificate(&d, &q, cert), Ok(()));
            }
        }
    }
}
