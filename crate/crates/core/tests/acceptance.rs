//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ctxsvc::checker::{brute_force_oracle_all, check_query, Checker, Outcome};
use ctxsvc::composition::{parse_composition_expr, seq_compose, SeqOptions};
use ctxsvc::flatten::{flatten, flow_signature};
use ctxsvc::model::{parse_catalog, Value};
use ctxsvc::tagen::{QueryForm, TaExpr};

use common::{fixture, load, Fixture};

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check, Option<Duration>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn eq<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Check {
    ensure!(got == want, "{what}: got {got:?}, want {want:?}");
    Ok(())
}

fn strs<'a>(it: impl IntoIterator<Item = &'a String>) -> Vec<&'a str> {
    it.into_iter().map(String::as_str).collect()
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

fn flattening() -> Check {
    let cat = parse_catalog(&read("abstract.svc")).map_err(|e| e.to_string())?;
    let e = parse_composition_expr(&read("abstract.expr"), &cat).map_err(|e| e.to_string())?;
    let flows = flatten(&e, 1, &cat).map_err(|e| e.to_string())?;
    let sigs: Vec<String> = flows.iter().map(flow_signature).collect();
    eq(
        "signatures",
        sigs.iter().map(String::as_str).collect::<Vec<_>>(),
        vec![
            "[c1]A >> C `>> D",
            "[c1]A >> C `>> D >> [c2]F{1}",
            "[c1]A >> D `>> C",
            "[c1]A >> D `>> C >> [c2]F{1}",
            "[!c1]B >> C `>> D",
            "[!c1]B >> C `>> D >> [c2]F{1}",
            "[!c1]B >> D `>> C",
            "[!c1]B >> D `>> C >> [c2]F{1}",
        ],
    )
}

fn sequential_composition() -> Check {
    let cat = parse_catalog(&read("rs_tt.svc")).map_err(|e| e.to_string())?;
    let c = seq_compose(&cat.services["RepairShop"], &cat.services["TowTruck"], &SeqOptions::default())
        .map_err(|e| e.to_string())?
        .service;
    let f = c.function();
    eq("name", f.name.as_str(), "ReserveRS⌢ReserveTT")?;
    eq(
        "inputs",
        strs(&f.inputs),
        vec!["CarBroken", "deposit", "CarType", "failureType", "RequestTruck"],
    )?;
    eq("outputs", strs(&f.outputs), vec!["HasAppointment", "numberOfHours", "RequestConfi"])?;
    let show = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>();
    eq(
        "pre",
        show(&mut f.pre.iter().map(|e| e.to_string())),
        vec!["CarBroken==true".to_string(), "RequestTruck==true".to_string()],
    )?;
    eq(
        "post",
        show(&mut f.post.iter().map(|e| e.to_string())),
        vec!["HasAppointment==true".to_string(), "RequestConfi==true".to_string()],
    )?;
    eq(
        "legal",
        show(&mut c.contract.legal.iter().map(|r| r.to_string())),
        vec!["deposit := 300".to_string(), "CarType==toyota".to_string()],
    )?;
    eq(
        "context rules",
        show(&mut c.context.rules.iter().map(|r| r.to_string())),
        vec!["ctx.membership==caa".to_string()],
    )?;
    eq(
        "context info",
        c.context.info.entries.get("Location").map(|v| v.to_string()),
        Some("(\"Montreal\", \"Canada\")".to_string()),
    )?;
    let price = c.nonfunctional().price.clone().ok_or("no price")?;
    eq("price", price.amount.to_string().as_str(), "(60*numberOfHours)+100")?;
    eq("currency", price.currency.as_str(), "dollar")?;
    eq("unit", price.unit.as_str(), "oneTime")
}

fn ta_generation() -> Check {
    let t = load("roadside").transform();
    let names: Vec<&str> = t.network.templates.iter().map(|t| t.name.as_str()).collect();
    eq("templates", names, vec!["CarRental", "RepairShop", "TowTruck", "Main"])?;
    let rs = t.network.template("RepairShop").ok_or("no RepairShop")?;
    eq("locations", rs.locations.len(), 2)?;
    eq("edges", rs.edges.len(), 2)?;
    let conj: Vec<String> = rs.edges[0].guard.0.iter().map(|c| c.to_string()).collect();
    eq(
        "guard",
        conj.iter().map(String::as_str).collect::<Vec<_>>(),
        vec!["RequesterContext.membership==1", "CarBroken==true", "carType==toyota", "carTypeB", "failureTypeB"],
    )?;
    let syncs: Vec<String> = rs.edges.iter().map(|e| e.sync.as_ref().unwrap().to_string()).collect();
    eq("syncs", syncs, vec!["ScheduleApt?".to_string(), "AptConfirmed!".to_string()])?;
    eq(
        "updates",
        rs.edges[1].update_text().as_str(),
        "HasAppointment=true,NumOfDaysB=true,Deposit=Deposit+300",
    )?;
    let golden = std::fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/roadside_network.txt"),
    )
    .map_err(|e| e.to_string())?;
    ensure!(golden == format!("{:#?}\n", t.network), "network differs from the golden file");
    Ok(())
}

fn verification() -> Check {
    let f = load("roadside");
    let t = f.transform();
    let (req, bind) = (&f.opts.requester, &f.opts.compose.bindings);
    let mut states = 0;
    for q in &t.queries {
        let v = check_query(&t.network, q, req, bind, 100_000).map_err(|e| e.to_string())?;
        ensure!(v.outcome == Outcome::Pass, "{} is {}", q.text, v.outcome);
        states = states.max(v.states);
    }
    let texts: Vec<&str> = t.queries.iter().map(|q| q.text.as_str()).collect();
    for q in [
        "E<> M.Final_1",
        "A[] M.i imply RequesterContext.age>=21",
        "A[] M.Final_1 imply firstPathPrice <= 600",
        "A[] M.Final_1 imply 400>=Deposit",
    ] {
        ensure!(texts.contains(&q), "missing query {q}");
    }
    ensure!(states < 100_000, "{states} states");

    for other in ["aaa", "none"] {
        let mut f = load("roadside");
        f.opts.requester.entries.insert("membership".into(), Value::Sym(other.into()));
        let t = f.transform();
        let q = t.queries.iter().find(|q| q.text == "E<> M.Final_1").unwrap();
        let v = check_query(&t.network, q, &f.opts.requester, &f.opts.compose.bindings, 100_000)
            .map_err(|e| e.to_string())?;
        ensure!(v.outcome == Outcome::Fail && !v.bound_hit, "membership {other}: {}", v.outcome);
    }
    Ok(())
}

fn mutation() -> Check {
    let mut f = load("roadside");
    f.opts.compose.bindings.insert("NeedCar".into(), Value::Bool(false));
    let t = f.transform();
    let c = Checker::new(&t.network).map_err(|e| e.to_string())?;
    let s = c
        .init_state(&f.opts.requester, &f.opts.compose.bindings, &t.network)
        .map_err(|e| e.to_string())?;
    let mut flipped = Vec::new();
    for q in &t.queries {
        let QueryForm::Always { ante, .. } = &q.form else { continue };
        if *ante != TaExpr::loc("M", "i") {
            continue;
        }
        let v = c.check(q, &s, 100_000).map_err(|e| e.to_string())?;
        if v.outcome == Outcome::Fail {
            let trace = v.trace.ok_or("failure without counterexample")?;
            let end = c.replay(&s, &trace).map_err(|e| e.to_string())?;
            ensure!(end == trace.end, "counterexample does not replay to its end state");
            flipped.push(q.text.as_str());
        }
    }
    eq("flipped", flipped, vec!["A[] M.i imply NeedCar==true"])
}

fn properties() -> Check {
    use common::props;
    props::flow_counts(200).map_err(|e| format!("flow counts: {e}"))?;
    props::price_modes(200).map_err(|e| format!("price modes: {e}"))?;
    props::trust_lattice(200).map_err(|e| format!("trust: {e}"))?;
    props::io_algebra(200).map_err(|e| format!("io sets: {e}"))?;
    props::associativity(200).map_err(|e| format!("associativity: {e}"))
}

fn agree(name: &str, f: &Fixture) -> Check {
    let t = f.transform();
    let (req, bind) = (&f.opts.requester, &f.opts.compose.bindings);
    let oracle = brute_force_oracle_all(&t.network, &t.queries, req, bind, 500_000).map_err(|e| e.to_string())?;
    for (q, o) in t.queries.iter().zip(oracle) {
        let v = check_query(&t.network, q, req, bind, 500_000).map_err(|e| e.to_string())?;
        ensure!(v.outcome == o.outcome, "{name}: {} checker {} oracle {}", q.text, v.outcome, o.outcome);
    }
    Ok(())
}

fn differential() -> Check {
    for stem in ["roadside", "abstract"] {
        agree(stem, &load(stem))?;
    }
    let mut f = load("roadside");
    f.opts.requester.entries.insert("membership".into(), Value::Sym("aaa".into()));
    agree("roadside/aaa", &f)?;
    for (case, f, _) in common::random::cases(100) {
        agree(&format!("random seed {}", case.seed), &f)?;
    }
    Ok(())
}

fn determinism() -> Check {
    let files = ["composite.svc", "flows.txt", "model.xml", "model.q", "report.txt", "report.jsonl"];
    let run = || -> Result<Vec<Vec<u8>>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let status = Command::new(env!("CARGO_BIN_EXE_ctxsvc"))
            .arg("pipeline")
            .arg("--catalog")
            .arg(fixture("roadside.svc"))
            .arg("--expr")
            .arg(format!("@{}", fixture("roadside.expr").display()))
            .arg("--options")
            .arg(fixture("roadside.toml"))
            .arg("--out")
            .arg(dir.path())
            .output()
            .map_err(|e| e.to_string())?
            .status;
        ensure!(status.success(), "pipeline exited with {status}");
        files
            .iter()
            .map(|f| std::fs::read(dir.path().join(f)).map_err(|e| format!("{f}: {e}")))
            .collect()
    };
    let (a, b) = (run()?, run()?);
    for (i, f) in files.iter().enumerate() {
        ensure!(a[i] == b[i], "{f} differs between runs");
    }
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("flattening golden", flattening, Some(Duration::from_secs(1))),
        ("sequential composition golden", sequential_composition, Some(Duration::from_secs(1))),
        ("automata generation golden", ta_generation, Some(Duration::from_secs(1))),
        ("verification fixture", verification, Some(Duration::from_secs(5))),
        ("mutation sensitivity", mutation, Some(Duration::from_secs(5))),
        ("property suites", properties, None),
        ("checker differential", differential, Some(Duration::from_secs(30))),
        ("determinism", determinism, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        let result = match (result, limit) {
            (Ok(()), Some(l)) if took > l => Err(format!("took {took:.2?}, limit {l:?}")),
            (r, _) => r,
        };
        match result {
            Ok(()) => println!("PASS {}. {name} ({took:.2?})", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {}. {name} ({took:.2?}): {e}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
