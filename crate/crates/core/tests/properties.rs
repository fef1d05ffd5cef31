//! Property tests over the public API.

mod common;

use proptest::prelude::*;

use common::{onestep, scenario};
use tsem::doc::{LoadedModel, ModelDocument, Report, TraceDoc, Verdict};
use tsem::engine::{periodic_computation, run, Intervention};
use tsem::equivalence::{test_model_equivalence, ObservableSet, SamplerConfig};
use tsem::logic::{check_cpltl, parse_cpltl};
use tsem::model::Value;

fn arb_rocks_intervention() -> impl Strategy<Value = Intervention> {
    prop::collection::btree_map((0..3usize, 0..10usize), 0..2i64, 0..4).prop_map(|m| {
        Intervention::new(
            m.into_iter()
                .map(|((v, t), x)| (["ST", "BT", "BS"][v], t, Value::Int(x))),
        )
        .unwrap()
    })
}

fn arb_treatment_formula() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0..2i64).prop_map(|v| format!("T={v}")),
        prop_oneof![Just("0"), Just("half"), Just("1")].prop_map(|v| format!("R={v}")),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| format!("!({a})")),
            inner.clone().prop_map(|a| format!("X ({a})")),
            inner.clone().prop_map(|a| format!("Y ({a})")),
            inner.clone().prop_map(|a| format!("F ({a})")),
            inner.clone().prop_map(|a| format!("H ({a})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) U ({b})")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("({a}) S ({b})")),
        ]
    })
}

proptest! {
    #[test]
    fn pins_hold_and_periodic_matches_run(int in arb_rocks_intervention()) {
        let sc = scenario("rocks", "rocks");
        let seq = periodic_computation(&sc, &int).unwrap().seq;
        let n = seq.prefix_len() + 3 * seq.loop_len();
        let tr = run(&sc, &int, n.max(12)).unwrap();
        for e in int.entries() {
            prop_assert_eq!(tr.get(e.time).unwrap().get(&e.var), Some(&e.value));
        }
        for (i, a) in tr.states().iter().enumerate() {
            prop_assert_eq!(seq.index(i), a);
        }
        prop_assert!(seq.loop_len() >= 1);
    }

    #[test]
    fn context_and_intervention_interchange(f in arb_treatment_formula(), t in 0..12usize) {
        let sc1 = scenario("treatment", "treatment_u1");
        let sc2 = scenario("treatment", "treatment_u2");
        let sig = sc1.model().signature().clone();
        let plain = parse_cpltl(&f, &sig).unwrap();
        let pinned = parse_cpltl(&format!("[T@2:=1, T@4:=1, T@5:=1] ({f})"), &sig).unwrap();
        prop_assert_eq!(check_cpltl(&sc1, t, &plain).unwrap(), check_cpltl(&sc2, t, &pinned).unwrap());
    }

    #[test]
    fn formulas_reparse_to_the_same_verdict(f in arb_treatment_formula(), t in 0..10usize) {
        let sc = scenario("treatment", "treatment_u1");
        let sig = sc.model().signature().clone();
        let a = parse_cpltl(&f, &sig).unwrap();
        let b = parse_cpltl(&a.to_string(), &sig).unwrap();
        prop_assert_eq!(check_cpltl(&sc, t, &a).unwrap(), check_cpltl(&sc, t, &b).unwrap());
    }

    #[test]
    fn periodic_reports_round_trip(int in arb_rocks_intervention()) {
        let sc = scenario("rocks", "rocks");
        let seq = periodic_computation(&sc, &int).unwrap().seq;
        let mut r = Report::new("periodic", Verdict::Bool(true));
        r.trace = Some(TraceDoc::periodic(&seq));
        r.stats.prefix_len = Some(seq.prefix_len());
        r.stats.loop_len = Some(seq.loop_len());
        let text = r.to_json();
        let back: Report = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn models_are_equivalent_to_themselves(seed in 0..1000u64) {
        let m = onestep("treatment");
        let o = ObservableSet::new(&m, &m, &["T", "R"]).unwrap();
        let cfg = SamplerConfig { samples: 10, seed, ..Default::default() };
        prop_assert!(!test_model_equivalence(&m, &m, &o, &cfg).unwrap().is_counterexample());
    }
}

#[test]
fn fixture_documents_round_trip() {
    for name in [
        "rocks",
        "treatment",
        "relay_chain",
        "relay_counter",
        "deadline_coarse",
        "deadline_fine",
    ] {
        let m = onestep(name);
        let doc = ModelDocument::from_model(&m);
        let LoadedModel::OneStep(again) = doc.load().unwrap() else {
            panic!("{name} reloads as one-step")
        };
        assert_eq!(*again, *m, "{name}");
    }
}
