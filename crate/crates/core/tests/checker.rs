mod common;

use ctxsvc::checker::{brute_force_oracle_all, check_query, CheckError, Checker, NetworkState, Outcome, TraceStep};
use ctxsvc::model::Value;
use ctxsvc::pipeline::Transformed;
use ctxsvc::tagen::{Query, QueryCategory, QueryForm, TaExpr};

use common::{load, Fixture};

const BOUND: usize = 100_000;
const ORACLE_CAP: usize = 200_000;

fn checker(t: &Transformed) -> Checker {
    Checker::new(&t.network).unwrap()
}

fn init(f: &Fixture, t: &Transformed, c: &Checker) -> NetworkState {
    c.init_state(&f.opts.requester, &f.opts.compose.bindings, &t.network).unwrap()
}

fn query<'a>(t: &'a Transformed, text: &str) -> &'a Query {
    t.queries.iter().find(|q| q.text == text).unwrap_or_else(|| panic!("no query {text}"))
}

fn fire_labels(step: &TraceStep) -> Option<(String, Option<String>)> {
    match step {
        TraceStep::Fire { sender, receiver } => {
            Some((sender.label.clone(), receiver.as_ref().map(|r| r.label.clone())))
        }
        TraceStep::Delay(_) => None,
    }
}

/// Checks every query of `t` against the oracle and replays every trace.
fn differential(name: &str, f: &Fixture, t: &Transformed) {
    let c = checker(t);
    let s0 = init(f, t, &c);
    let plain = checker(t).with_clock_reduction(false);
    let oracle =
        brute_force_oracle_all(&t.network, &t.queries, &f.opts.requester, &f.opts.compose.bindings, ORACLE_CAP)
            .unwrap();
    for (q, o) in t.queries.iter().zip(oracle) {
        let v = c.check(q, &s0, BOUND).unwrap();
        assert_eq!(v.outcome, o.outcome, "{name}: {}", q.text);
        assert!(v.states <= o.states, "{name}: {} explored more than the full space", q.text);
        assert_eq!(plain.check(q, &s0, BOUND).unwrap().outcome, v.outcome, "{name}: {}", q.text);

        let expects_trace = matches!(
            (&q.form, v.outcome),
            (QueryForm::Exists(_), Outcome::Pass) | (QueryForm::Always { .. }, Outcome::Fail)
        );
        assert_eq!(v.trace.is_some(), expects_trace, "{name}: {}", q.text);
        if let Some(tr) = &v.trace {
            let end = c.replay(&s0, tr).unwrap();
            assert_eq!(end, tr.end, "{name}: {}", q.text);
            // the goal holds where the trace ends, so checking from there
            // succeeds (or fails) immediately
            let again = c.check(q, &end, BOUND).unwrap();
            assert_eq!(again.outcome, v.outcome);
            assert!(again.trace.unwrap().steps.is_empty());
        }
    }
}

#[test]
fn initial_state_reflects_bindings_and_requester() {
    let f = load("roadside");
    let t = f.transform();
    let c = checker(&t);
    let s = init(&f, &t, &c);
    assert!(s.clocks.iter().all(|&x| x == 0));
    for (p, &l) in s.locations.iter().enumerate() {
        let name = c.location_name(p, l);
        assert!(name == "i" || name == "idle", "{}: {name}", c.instances()[p]);
    }
    // membership caa is the first tag, age is stored as given
    let mut fields = s.fields.clone();
    fields.sort();
    assert_eq!(fields, vec![1, 25]);
}

#[test]
fn missing_required_binding_is_reported() {
    let mut f = load("roadside");
    let t = f.transform();
    f.opts.compose.bindings.shift_remove("carType");
    let c = checker(&t);
    let err = c.init_state(&f.opts.requester, &f.opts.compose.bindings, &t.network).unwrap_err();
    assert_eq!(err, CheckError::MissingBinding("carType".into()));
    let q = query(&t, "E<> M.Final_1");
    assert!(check_query(&t.network, q, &f.opts.requester, &f.opts.compose.bindings, BOUND).is_err());
}

#[test]
fn ill_typed_binding_is_reported() {
    let mut f = load("roadside");
    let t = f.transform();
    f.opts.compose.bindings.insert("carType".into(), Value::Sym("tesla".into()));
    let err = checker(&t)
        .init_state(&f.opts.requester, &f.opts.compose.bindings, &t.network)
        .unwrap_err();
    assert!(matches!(err, CheckError::TypeMismatch { ref name, .. } if name == "carType"), "{err:?}");
}

#[test]
fn first_request_synchronises_with_the_repair_shop() {
    let f = load("roadside");
    let t = f.transform();
    let c = checker(&t);
    let s = init(&f, &t, &c);
    let fires: Vec<_> = c.successors(&s).unwrap().iter().filter_map(|(st, _)| fire_labels(st)).collect();
    assert_eq!(fires.len(), 1, "{fires:?}");
    let (send, recv) = &fires[0];
    assert!(send.contains("ScheduleApt!"), "{send}");
    assert!(recv.as_deref().unwrap().contains("ScheduleApt?"));
}

#[test]
fn wrong_membership_blocks_the_first_request() {
    let mut f = load("roadside");
    f.opts.requester.entries.insert("membership".into(), Value::Sym("aaa".into()));
    let t = f.transform();
    let c = checker(&t);
    let s = init(&f, &t, &c);
    assert!(c.successors(&s).unwrap().iter().all(|(st, _)| fire_labels(st).is_none()));
}

#[test]
fn time_cannot_pass_the_repair_shop_invariant() {
    let f = load("roadside");
    let t = f.transform();
    let c = checker(&t);
    let s0 = init(&f, &t, &c);
    let (_, mut s) = c
        .successors(&s0)
        .unwrap()
        .into_iter()
        .find(|(st, _)| fire_labels(st).is_some())
        .unwrap();
    let delay = |s: &NetworkState| {
        c.successors(s)
            .unwrap()
            .into_iter()
            .find(|(st, _)| matches!(st, TraceStep::Delay(_)))
            .map(|(_, n)| n)
    };
    for _ in 0..6 {
        s = delay(&s).expect("delay allowed below the bound");
    }
    assert!(s.clocks.contains(&6));
    assert!(delay(&s).is_none());
    // the response is still possible at the boundary
    assert!(c.successors(&s).unwrap().iter().any(|(st, _)| fire_labels(st).is_some()));
}

#[test]
fn roadside_queries_all_pass() {
    let f = load("roadside");
    let t = f.transform();
    let c = checker(&t);
    let s = init(&f, &t, &c);
    for q in &t.queries {
        assert_eq!(c.check(q, &s, BOUND).unwrap().outcome, Outcome::Pass, "{}", q.text);
    }
}

#[test]
fn other_membership_fails_reachability_and_context() {
    let mut f = load("roadside");
    f.opts.requester.entries.insert("membership".into(), Value::Sym("aaa".into()));
    let t = f.transform();
    let c = checker(&t);
    let s = init(&f, &t, &c);
    let fails: Vec<&str> = t
        .queries
        .iter()
        .filter(|q| c.check(q, &s, BOUND).unwrap().outcome == Outcome::Fail)
        .map(|q| q.text.as_str())
        .collect();
    assert_eq!(fails, ["E<> M.Final_1", "A[] M.i imply RequesterContext.membership==1"]);
}

#[test]
fn unmet_precondition_yields_replayable_counterexample() {
    let mut f = load("roadside");
    f.opts.compose.bindings.insert("NeedCar".into(), Value::Bool(false));
    let t = f.transform();
    let c = checker(&t);
    let s = init(&f, &t, &c);
    let pre = query(&t, "A[] M.i imply NeedCar==true");
    let v = c.check(pre, &s, BOUND).unwrap();
    assert_eq!(v.outcome, Outcome::Fail);
    let tr = v.trace.unwrap();
    assert_eq!(c.replay(&s, &tr).unwrap(), tr.end);
    // CarRental can never accept, so the final location is unreachable too
    assert_eq!(c.check(query(&t, "E<> M.Final_1"), &s, BOUND).unwrap().outcome, Outcome::Fail);
    let flipped: Vec<&str> = t
        .queries
        .iter()
        .filter(|q| matches!(&q.form, QueryForm::Always { ante, .. } if *ante == TaExpr::loc("M", "i")))
        .filter(|q| c.check(q, &s, BOUND).unwrap().outcome == Outcome::Fail)
        .map(|q| q.text.as_str())
        .collect();
    assert_eq!(flipped, ["A[] M.i imply NeedCar==true"]);
}

#[test]
fn exists_and_always_not_are_dual() {
    for stem in ["roadside", "abstract"] {
        let f = load(stem);
        let t = f.transform();
        let c = checker(&t);
        let s = init(&f, &t, &c);
        for q in t.queries.iter().filter(|q| matches!(q.form, QueryForm::Exists(_))) {
            let QueryForm::Exists(p) = &q.form else { unreachable!() };
            let dual = Query::new(
                QueryCategory::Reachability,
                QueryForm::Always {
                    ante: TaExpr::Bool(true),
                    cons: TaExpr::not(p.clone()),
                },
            );
            let e = c.check(q, &s, BOUND).unwrap();
            let a = c.check(&dual, &s, BOUND).unwrap();
            assert_eq!(e.holds(), !a.holds(), "{stem}: {}", q.text);
            assert_eq!(e.trace.map(|t| t.steps), a.trace.map(|t| t.steps));
        }
    }
}

#[test]
fn vacuous_implication_holds() {
    let f = load("roadside");
    let t = f.transform();
    let q = Query::new(
        QueryCategory::Input,
        QueryForm::Always {
            ante: TaExpr::loc("M", "i"),
            cons: TaExpr::Bool(true),
        },
    );
    let v = check_query(&t.network, &q, &f.opts.requester, &f.opts.compose.bindings, BOUND).unwrap();
    assert_eq!(v.outcome, Outcome::Pass);
    assert!(v.trace.is_none());
}

#[test]
fn larger_bounds_never_change_a_conclusive_verdict() {
    let f = load("abstract");
    let t = f.transform();
    let c = checker(&t);
    let s = init(&f, &t, &c);
    for q in &t.queries {
        let full = c.check(q, &s, BOUND).unwrap();
        assert!(!full.bound_hit);
        let mut last = 0;
        for bound in [1, 2, 3, 5, 8, 13, 21, 1000] {
            let v = c.check(q, &s, bound).unwrap();
            assert!(v.states <= bound.max(1));
            assert!(v.states >= last || !v.bound_hit);
            last = v.states;
            match v.outcome {
                Outcome::Inconclusive => assert!(v.bound_hit),
                o => assert_eq!(o, full.outcome, "{} at bound {bound}", q.text),
            }
        }
    }
}

#[test]
fn fixtures_agree_with_the_oracle() {
    for stem in ["roadside", "abstract"] {
        let f = load(stem);
        differential(stem, &f, &f.transform());
    }
    let mut f = load("roadside");
    f.opts.requester.entries.insert("membership".into(), Value::Sym("aaa".into()));
    differential("roadside/aaa", &f, &f.transform());
    let mut f = load("abstract");
    f.opts.compose.bindings.insert("c1".into(), Value::Bool(false));
    f.opts.compose.bindings.insert("c2".into(), Value::Bool(false));
    differential("abstract/ff", &f, &f.transform());
}

#[test]
fn random_networks_agree_with_the_oracle() {
    for (case, f, t) in common::random::cases(100) {
        differential(&format!("seed {}", case.seed), &f, &t);
    }
}
