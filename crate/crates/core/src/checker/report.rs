use std::fmt::Write as _;

use serde::Serialize;

use super::Verdict;
use crate::tagen::Query;

/// A query together with its verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryResult {
    pub query: Query,
    pub verdict: Verdict,
}

/// One block per query: verdict, query text, states explored, then the
/// trace (if any) indented below.
pub fn text_report(results: &[QueryResult]) -> String {
    let mut out = String::new();
    for r in results {
        let v = &r.verdict;
        write!(out, "{:<12} {}  [{} states", v.outcome.label(), r.query.text, v.states).unwrap();
        if v.bound_hit {
            out.push_str(", bound hit");
        }
        out.push_str("]\n");
        if let Some(t) = &v.trace {
            let kind = if matches!(r.query.form, crate::tagen::QueryForm::Exists(_)) {
                "witness"
            } else {
                "counterexample"
            };
            writeln!(out, "    {kind}:").unwrap();
            if t.steps.is_empty() {
                out.push_str("      (initial state)\n");
            }
            for s in &t.steps {
                writeln!(out, "      {s}").unwrap();
            }
        }
    }
    let passed = results.iter().filter(|r| r.verdict.holds()).count();
    writeln!(out, "{passed}/{} queries pass", results.len()).unwrap();
    out
}

#[derive(Serialize)]
struct Record<'a> {
    category: &'a str,
    query: &'a str,
    verdict: &'a str,
    states: usize,
    bound_hit: bool,
}

/// One JSON object per line.
pub fn machine_report(results: &[QueryResult]) -> String {
    let mut out = String::new();
    for r in results {
        let rec = Record {
            category: r.query.category.label(),
            query: &r.query.text,
            verdict: r.verdict.outcome.label(),
            states: r.verdict.states,
            bound_hit: r.verdict.bound_hit,
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    out
}
