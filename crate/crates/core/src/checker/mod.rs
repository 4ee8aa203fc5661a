//! Bounded, discrete-time, explicit-state model checking of generated
//! networks.
//!
//! Clocks advance in unit steps and are capped at the largest constant in
//! the network plus one. For the closed integer constraints the generator
//! emits this is exact for reachability.

mod engine;
pub mod oracle;
mod report;
mod search;

use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::model::{ContextInfo, Value};
use crate::tagen::{Bindings, Network, TaGenError};

pub use engine::{Checker, NetworkState};
pub use oracle::{brute_force_oracle, brute_force_oracle_all};
pub use search::check_query;
pub use report::{machine_report, text_report, QueryResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error("no value supplied for `{0}`")]
    MissingBinding(String),
    #[error("value {value} does not fit the type of `{name}`")]
    TypeMismatch { name: String, value: String },
    #[error(transparent)]
    Encode(#[from] TaGenError),
    #[error("query refers to unknown `{0}`")]
    UnknownReference(String),
    #[error("evaluation failed: {0}")]
    Eval(String),
    #[error("state space exceeds the cap of {0} states")]
    CapExceeded(usize),
    #[error("trace step {0} cannot be replayed")]
    Replay(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Inconclusive => "INCONCLUSIVE",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One transition of a trace, identified both by index and by name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeRef {
    pub process: usize,
    pub edge: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TraceStep {
    /// Time passes by this many units.
    Delay(u64),
    /// An edge fires alone, or a sender and a receiver fire together.
    Fire { sender: EdgeRef, receiver: Option<EdgeRef> },
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceStep::Delay(d) => write!(f, "delay {d}"),
            TraceStep::Fire { sender, receiver: None } => f.write_str(&sender.label),
            TraceStep::Fire { sender, receiver: Some(r) } => write!(f, "{} | {}", sender.label, r.label),
        }
    }
}

/// Path from the initial state to `end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    pub end: NetworkState,
    /// Dead clocks were reset along the way, so replay must do the same.
    pub clocks_reduced: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    /// Witness of a satisfied `E<>` or counterexample of a violated `A[]`.
    pub trace: Option<Trace>,
    pub states: usize,
    /// The state bound stopped the search before it was exhaustive.
    pub bound_hit: bool,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        self.outcome == Outcome::Pass
    }
}

/// Initial values of variables and requester fields by name, after
/// applying `bindings` and `requester` over the declared defaults.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitialValues {
    pub vars: IndexMap<String, i64>,
    pub fields: IndexMap<String, i64>,
}

fn encode(
    enc: &mut crate::tagen::Encoding,
    name: &str,
    v: &Value,
    dtype: &crate::model::DataType,
) -> Result<i64, CheckError> {
    let mismatch = || CheckError::TypeMismatch {
        name: name.to_string(),
        value: v.to_string(),
    };
    let v = dtype.coerce(v.clone()).ok_or_else(mismatch)?;
    enc.encode(name, &v, dtype).map_err(|e| match e {
        TaGenError::Unrepresentable(_) => mismatch(),
        e => e.into(),
    })
}

pub fn initial_values(
    net: &Network,
    requester: &ContextInfo,
    bindings: &Bindings,
) -> Result<InitialValues, CheckError> {
    let d = &net.decls;
    let mut enc = d.encoding.clone();
    let mut vars = IndexMap::new();
    for v in &d.vars {
        let value = match bindings.get(&v.name) {
            Some(b) => encode(&mut enc, &v.name, b, &v.dtype)?,
            None => v.default.ok_or_else(|| CheckError::MissingBinding(v.name.clone()))?,
        };
        let value = if v.is_bool() { (value != 0) as i64 } else { value };
        vars.insert(v.name.clone(), value);
    }
    let mut fields = IndexMap::new();
    for f in &d.requester {
        let value = match requester.entries.get(&f.name) {
            Some(r) => encode(&mut enc, &f.name, r, &f.dtype)?,
            None => f.init.ok_or_else(|| CheckError::MissingBinding(format!("ctx.{}", f.name)))?,
        };
        fields.insert(f.name.clone(), value);
    }
    Ok(InitialValues { vars, fields })
}
