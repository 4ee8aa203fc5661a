//! Randomized property suites shared by the composition tests and the
//! acceptance target. Each suite uses a fixed-seed runner.

use std::collections::BTreeSet;

use ctxsvc::composition::{
    aggregate_trust, combine_price, seq_compose, CompOp, CompositionExpr, PackagedTrust, PricingMode,
    SeqOptions, TrustAggregator, TrustLogic,
};
use ctxsvc::flatten::flatten;
use ctxsvc::model::{
    eval, parse_catalog, Catalog, ConfiguredService, Environment, Expr, Price, ProviderTrust,
    Recommendations, ServiceFunction, TrustGrade, Value,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

/// Runs `test` on `cases` values of `strategy` with a deterministic RNG.
pub fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

// Flow counting oracle: every leaf is a distinct service, so the number of
// flows follows from the shape of the expression alone.

pub fn leaf_catalog(n: usize) -> Catalog {
    (0..n)
        .map(|i| ConfiguredService::new(format!("S{i}"), ServiceFunction::new(format!("f{i}"), "r")))
        .collect()
}

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Returns (flows including empty ones, empty flows).
pub fn count(e: &CompositionExpr, k: u32) -> (u128, u128) {
    match e {
        CompositionExpr::Service(_) => (1, 0),
        CompositionExpr::Binary(CompOp::Seq, l, r) => {
            let (a, ae) = count(l, k);
            let (b, be) = count(r, k);
            (a * b, ae * be)
        }
        CompositionExpr::Binary(op, _, _) => {
            let mut units = Vec::new();
            collect_chain(e, *op, &mut units);
            let cs: Vec<(u128, u128)> = units.iter().map(|u| count(u, k)).collect();
            match op {
                CompOp::Par | CompOp::NoOrder => {
                    let f = factorial(cs.len());
                    (
                        f * cs.iter().map(|c| c.0).product::<u128>(),
                        f * cs.iter().map(|c| c.1).product::<u128>(),
                    )
                }
                _ => (cs.iter().map(|c| c.0).sum(), cs.iter().map(|c| c.1).sum()),
            }
        }
        CompositionExpr::Cond { then, els, .. } => {
            let (a, ae) = count(then, k);
            let (b, be) = count(els, k);
            (a + b, ae + be)
        }
        CompositionExpr::Iter { body, .. } => {
            let (b, be) = count(body, k);
            let total: u128 = (0..=k).map(|j| b.pow(j)).sum();
            let empty: u128 = (0..=k).map(|j| be.pow(j)).sum();
            (total, empty)
        }
    }
}

fn collect_chain(e: &CompositionExpr, op: CompOp, out: &mut Vec<CompositionExpr>) {
    match e {
        CompositionExpr::Binary(o, l, r) if *o == op => {
            collect_chain(l, op, out);
            out.push((**r).clone());
        }
        other => out.push(other.clone()),
    }
}

fn relabel(e: &CompositionExpr, next: &mut usize) -> CompositionExpr {
    match e {
        CompositionExpr::Service(_) => {
            *next += 1;
            CompositionExpr::service(format!("S{}", *next - 1))
        }
        CompositionExpr::Binary(op, l, r) => {
            let l = relabel(l, next);
            CompositionExpr::binary(*op, l, relabel(r, next))
        }
        CompositionExpr::Cond { cond, then, els } => {
            let t = relabel(then, next);
            CompositionExpr::cond(cond.clone(), t, relabel(els, next))
        }
        CompositionExpr::Iter { cond, body } => CompositionExpr::iter(cond.clone(), relabel(body, next)),
    }
}

pub fn arb_expr() -> impl Strategy<Value = CompositionExpr> {
    let leaf = Just(CompositionExpr::service("S"));
    leaf.prop_recursive(4, 12, 3, |inner| {
        let op = prop_oneof![
            Just(CompOp::Seq),
            Just(CompOp::Par),
            Just(CompOp::NoOrder),
            Just(CompOp::NonDet),
            Just(CompOp::Priority),
        ];
        let cond = (0u8..3).prop_map(|i| Expr::var(format!("g{i}")));
        prop_oneof![
            (op, inner.clone(), inner.clone()).prop_map(|(o, l, r)| CompositionExpr::binary(o, l, r)),
            (cond.clone(), inner.clone(), inner.clone()).prop_map(|(c, t, e)| CompositionExpr::cond(c, t, e)),
            (cond, inner).prop_map(|(c, b)| CompositionExpr::iter(c, b)),
        ]
    })
    .prop_map(|e| relabel(&e, &mut 0))
}

fn chain(op: CompOp, n: usize) -> CompositionExpr {
    (1..n).fold(CompositionExpr::service("S0"), |acc, i| {
        CompositionExpr::binary(op, acc, CompositionExpr::service(format!("S{i}")))
    })
}

/// Flow counts: n! for n-way parallel, K+1 for iteration, products for
/// sequence, and the general shape formula for random expressions.
pub fn flow_counts(cases: u32) -> Result<(), String> {
    for n in 1..=6 {
        let flows = flatten(&chain(CompOp::Par, n), 1, &leaf_catalog(n)).map_err(|e| e.to_string())?;
        if flows.len() as u128 != factorial(n) {
            return Err(format!("{n}-way parallel gave {} flows", flows.len()));
        }
    }
    for k in 1..=6 {
        let e = CompositionExpr::iter(Expr::var("c"), CompositionExpr::service("S0"));
        let flows = flatten(&e, k, &leaf_catalog(1)).map_err(|e| e.to_string())?;
        // the zero-iteration flow is empty and dropped
        if flows.len() as u32 != k {
            return Err(format!("iteration with K={k} gave {} non-empty flows", flows.len()));
        }
        let e = CompositionExpr::seq(
            CompositionExpr::service("S1"),
            CompositionExpr::iter(Expr::var("c"), CompositionExpr::service("S0")),
        );
        let flows = flatten(&e, k, &leaf_catalog(2)).map_err(|e| e.to_string())?;
        if flows.len() as u32 != k + 1 {
            return Err(format!("S1 >> while with K={k} gave {} flows", flows.len()));
        }
    }
    run(cases, (arb_expr(), 1u32..3), |(e, k)| {
        let (total, empty) = count(&e, k);
        prop_assume!(total <= 20_000);
        let cat = leaf_catalog(e.services().len());
        let flows = flatten(&e, k, &cat).unwrap();
        prop_assert_eq!(flows.len() as u128, total - empty, "{}", e);
        Ok(())
    })
}

fn one_time(amount: i64) -> Price {
    Price {
        amount: Expr::int(amount),
        currency: "dollar".into(),
        unit: "oneTime".into(),
        per: None,
    }
}

/// Price modes: sum, max, and min of the two one-time amounts, including
/// an hourly price lifted by its usage parameter.
pub fn price_modes(cases: u32) -> Result<(), String> {
    run(cases, (0i64..10_000, 0i64..10_000, 0i64..200), |(a, b, h)| {
        let hourly = Price {
            amount: Expr::int(a),
            currency: "dollar".into(),
            unit: "hour".into(),
            per: Some("h".into()),
        };
        let env = Environment::default().with_binding("h", Value::Int(h));
        for (mode, f) in [
            (PricingMode::Normal, (|x, y| x + y) as fn(i64, i64) -> i64),
            (PricingMode::Promotional, |x: i64, y: i64| x.max(y)),
            (PricingMode::SpecialSale, |x: i64, y: i64| x.min(y)),
        ] {
            let p = combine_price(&one_time(a), &one_time(b), mode).unwrap();
            let v = eval(&p.amount, &Environment::default()).unwrap().as_f64().unwrap();
            prop_assert_eq!(v, f(a, b) as f64);
            prop_assert_eq!(p.unit.as_str(), "oneTime");

            let p = combine_price(&hourly, &one_time(b), mode).unwrap();
            let v = eval(&p.amount, &env).unwrap().as_f64().unwrap();
            prop_assert_eq!(v, f(a * h, b) as f64);
        }
        Ok(())
    })
}

fn arb_recs() -> impl Strategy<Value = Recommendations> {
    prop::collection::btree_map(
        prop::sample::select(vec!["ann", "bo", "cy", "di", "ed"]).prop_map(String::from),
        (1u8..=5).prop_map(TrustGrade),
        0..5,
    )
}

fn arb_trust() -> impl Strategy<Value = ProviderTrust> {
    (arb_recs(), any::<bool>(), arb_recs()).prop_map(|(ce, pg, re)| ProviderTrust { ce, pg, re })
}

fn check_merge(
    a: &Recommendations,
    b: &Recommendations,
    out: &Recommendations,
    agg: TrustAggregator,
    logic: TrustLogic,
) -> Result<(), TestCaseError> {
    let dominant = if logic == TrustLogic::ALeadsToB { a } else { b };
    let expected: BTreeSet<&String> = a
        .keys()
        .filter(|k| b.contains_key(*k))
        .chain(dominant.keys())
        .collect();
    prop_assert_eq!(out.keys().collect::<BTreeSet<_>>(), expected);
    for (who, g) in out {
        match (a.get(who), b.get(who)) {
            (Some(x), Some(y)) => {
                let (lo, hi) = (x.0.min(y.0), x.0.max(y.0));
                match agg {
                    TrustAggregator::Glb => prop_assert_eq!(g.0, lo),
                    TrustAggregator::Lub => prop_assert_eq!(g.0, hi),
                    TrustAggregator::Avg => prop_assert_eq!(g.0, (x.0 + y.0).div_ceil(2)),
                    TrustAggregator::Choose => prop_assert!(g.0 == x.0 || g.0 == y.0),
                }
            }
            _ => prop_assert_eq!(Some(g), dominant.get(who)),
        }
    }
    Ok(())
}

/// Trust merges: glb/lub/avg stay within the lattice bounds of shared
/// names, and the business logic decides which unshared names survive.
pub fn trust_lattice(cases: u32) -> Result<(), String> {
    run(cases, (arb_trust(), arb_trust(), 0u64..1000), |(a, b, seed)| {
        for logic in [TrustLogic::BRequiresA, TrustLogic::ALeadsToB] {
            for agg in [TrustAggregator::Glb, TrustAggregator::Lub, TrustAggregator::Avg, TrustAggregator::Choose] {
                let opts = SeqOptions {
                    trust_logic: logic,
                    trust_aggregator: agg,
                    choose_seed: seed,
                    ..SeqOptions::default()
                };
                let t = aggregate_trust(&a, &b, &opts).unwrap();
                prop_assert_eq!(t.pg, a.pg && b.pg);
                check_merge(&a.ce, &b.ce, &t.ce, agg, logic)?;
                check_merge(&a.re, &b.re, &t.re, agg, logic)?;
            }
        }
        let packaged = PackagedTrust {
            ce: b.re.clone(),
            re: a.ce.clone(),
        };
        let opts = SeqOptions {
            trust_logic: TrustLogic::Packaged,
            packaged: Some(packaged.clone()),
            ..SeqOptions::default()
        };
        let t = aggregate_trust(&a, &b, &opts).unwrap();
        prop_assert_eq!(t.ce, packaged.ce);
        prop_assert_eq!(t.re, packaged.re);
        Ok(())
    })
}

pub fn arb_service(tag: usize) -> impl Strategy<Value = ConfiguredService> {
    let names = prop::collection::vec(0usize..6, 0..4);
    (names.clone(), names, 0u64..50, 1u64..1000, 0u64..100).prop_map(move |(ins, outs, time, rel, avail)| {
        let mut src = format!("service X{tag} {{ parameters {{ ");
        let mut decl = BTreeSet::new();
        for i in ins.iter().chain(outs.iter()) {
            decl.insert(*i);
        }
        let outs: BTreeSet<usize> = outs.into_iter().collect();
        for p in &decl {
            let dir = if outs.contains(p) { "output" } else { "input" };
            src += &format!("p{p}: int {dir}; ");
        }
        let fin: Vec<String> = decl.iter().filter(|p| !outs.contains(p)).map(|p| format!("p{p}")).collect();
        let fout: Vec<String> = outs.iter().map(|p| format!("p{p}")).collect();
        src += &format!(
            "}} contract {{ function {{ name = \"f{tag}\"; inputs = [{}]; address = \"a{tag}\"; \
             result_name = \"r{tag}\"; outputs = [{}]; }} nonfunctional {{ safety_time = {time}; \
             reliability = {rel}; availability = {avail}; }} }} }}",
            fin.join(", "),
            fout.join(", ")
        );
        parse_catalog(&src).unwrap().services.swap_remove_index(0).unwrap().1
    })
}

fn set(v: impl IntoIterator<Item = String>) -> BTreeSet<String> {
    v.into_iter().collect()
}

/// Inputs of A >> B are A's inputs plus B's inputs A does not produce;
/// outputs are the union.
pub fn io_algebra(cases: u32) -> Result<(), String> {
    run(cases, (arb_service(0), arb_service(1)), |(a, b)| {
        let c = seq_compose(&a, &b, &SeqOptions::default()).unwrap().service;
        let (fa, fb, fc) = (a.function(), b.function(), c.function());
        let a_out = set(fa.outputs.iter().cloned());
        let b_in = set(fb.inputs.iter().cloned());
        let mut expected = set(fa.inputs.iter().cloned());
        expected.extend(b_in.difference(&a_out).cloned());
        prop_assert_eq!(set(fc.inputs.iter().cloned()), expected);
        let mut outs = a_out.clone();
        outs.extend(fb.outputs.iter().cloned());
        prop_assert_eq!(set(fc.outputs.iter().cloned()), outs);
        let (na, nb, nc) = (a.nonfunctional(), b.nonfunctional(), c.nonfunctional());
        prop_assert_eq!(nc.safety_time, Some(na.safety_time.unwrap() + nb.safety_time.unwrap()));
        prop_assert_eq!(nc.availability, Some(na.availability.unwrap() + nb.availability.unwrap()));
        prop_assert_eq!(nc.reliability, Some(na.reliability.unwrap().min(nb.reliability.unwrap())));
        Ok(())
    })
}

/// (A >> B) >> C and A >> (B >> C) agree on every union field.
pub fn associativity(cases: u32) -> Result<(), String> {
    run(cases, (arb_service(0), arb_service(1), arb_service(2)), |(a, b, c)| {
        let o = SeqOptions::default();
        let left = seq_compose(&seq_compose(&a, &b, &o).unwrap().service, &c, &o).unwrap().service;
        let right = seq_compose(&a, &seq_compose(&b, &c, &o).unwrap().service, &o).unwrap().service;
        let (fl, fr) = (left.function(), right.function());
        prop_assert_eq!(set(fl.inputs.iter().cloned()), set(fr.inputs.iter().cloned()));
        prop_assert_eq!(set(fl.outputs.iter().cloned()), set(fr.outputs.iter().cloned()));
        prop_assert_eq!(&fl.addresses, &fr.addresses);
        prop_assert_eq!(&fl.name, &fr.name);
        let names = |s: &ConfiguredService| s.params.keys().cloned().collect::<BTreeSet<_>>();
        prop_assert_eq!(names(&left), names(&right));
        prop_assert_eq!(left.nonfunctional(), right.nonfunctional());
        prop_assert_eq!(&left.contract.legal, &right.contract.legal);
        Ok(())
    })
}
