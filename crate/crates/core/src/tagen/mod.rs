//! Timed-automata networks generated from compositions, plus the queries
//! that check them.
//!
//! Everything here is in-memory; [`crate::uppaal`] turns a [`Network`] into
//! files and [`crate::checker`] explores it.

mod expr;
mod lower;
mod network;
mod queries;

use indexmap::IndexMap;
use thiserror::Error;

use crate::model::{DataType, EvalError};

pub use expr::{apply, Conjunction, TaExpr, Valuation};
pub use lower::Encoding;
pub use network::{gen_main_ta, gen_network, gen_service_template, ordinal, path_var, GenOptions};
pub use queries::{gen_queries, Query, QueryCategory, QueryForm};

/// Instance name of the main automaton.
pub const MAIN: &str = "M";
/// Template name of the main automaton.
pub const MAIN_TEMPLATE: &str = "Main";
/// Initial location of the main automaton.
pub const IDLE: &str = "i";
/// Record holding the requester's context.
pub const REQUESTER: &str = "RequesterContext";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClockBound {
    pub clock: String,
    pub bound: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub id: String,
    pub committed: bool,
    /// `clock <= bound`; never set on committed locations.
    pub invariant: Option<ClockBound>,
}

impl Location {
    pub fn new(id: impl Into<String>) -> Self {
        Location {
            id: id.into(),
            committed: false,
            invariant: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyncDir {
    Send,
    Receive,
}

impl SyncDir {
    pub fn mark(self) -> char {
        match self {
            SyncDir::Send => '!',
            SyncDir::Receive => '?',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sync {
    pub channel: String,
    pub dir: SyncDir,
}

impl std::fmt::Display for Sync {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.channel, self.dir.mark())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Update {
    pub target: String,
    pub value: TaExpr,
}

impl std::fmt::Display for Update {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}={}", self.target, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub select: Option<String>,
    pub guard: Conjunction,
    pub sync: Option<Sync>,
    /// Applied in order.
    pub updates: Vec<Update>,
}

impl Edge {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Edge {
            source: source.into(),
            target: target.into(),
            select: None,
            guard: Conjunction::default(),
            sync: None,
            updates: Vec::new(),
        }
    }

    pub fn update_text(&self) -> String {
        self.updates.iter().map(|u| u.to_string()).collect::<Vec<_>>().join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub locations: Vec<Location>,
    pub initial: String,
    /// Clocks local to this template.
    pub clocks: Vec<String>,
    pub edges: Vec<Edge>,
}

impl Template {
    pub fn location(&self, id: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.id == id)
    }
}

/// Why a global variable exists, which also fixes its default value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarRole {
    /// `<param>B`, true before execution.
    InputAvailability,
    /// `<param>B`, false until produced.
    OutputAvailability,
    /// A parameter's own value.
    Parameter,
    /// Per-flow price/availability/reliability/time accumulator.
    Path,
    /// Set when a service's legal check held on entry.
    Legal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub dtype: DataType,
    pub role: VarRole,
    /// Used when no binding is supplied; `None` makes a binding mandatory.
    pub default: Option<i64>,
    /// Value written into exported declarations (binding or default).
    pub init: Option<i64>,
}

impl VarDecl {
    pub fn is_bool(&self) -> bool {
        self.dtype == DataType::Bool
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstDecl {
    pub name: String,
    pub value: i64,
    pub comment: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextField {
    pub name: String,
    pub dtype: DataType,
    pub init: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GlobalDecls {
    /// Request and response channel of every service, in template order.
    pub channels: Vec<String>,
    pub consts: Vec<ConstDecl>,
    pub vars: Vec<VarDecl>,
    pub requester: Vec<ContextField>,
    pub encoding: Encoding,
}

impl GlobalDecls {
    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|v| v.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    pub decls: GlobalDecls,
    /// Service templates sorted by name, then the main template.
    pub templates: Vec<Template>,
    /// `(instance, template)` pairs of the system line.
    pub system: Vec<(String, String)>,
}

impl Network {
    pub fn template(&self, name: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.name == name)
    }

    pub fn main(&self) -> &Template {
        self.template(MAIN_TEMPLATE).expect("network has a main template")
    }

    /// Template instantiated as `instance`.
    pub fn instance(&self, instance: &str) -> Option<&Template> {
        let (_, t) = self.system.iter().find(|(i, _)| i == instance)?;
        self.template(t)
    }

    /// Largest constant any clock is compared with.
    pub fn max_clock_constant(&self) -> i64 {
        self.templates
            .iter()
            .flat_map(|t| t.locations.iter())
            .filter_map(|l| l.invariant.as_ref().map(|i| i.bound))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaGenError {
    #[error("name `{0}` is declared twice in the generated model")]
    NameCollision(String),
    #[error("flow refers to unknown service `{0}`")]
    UnknownService(String),
    #[error("`{0}` has a type the model cannot represent")]
    Unrepresentable(String),
    #[error("unknown name `{0}` in a model expression")]
    UnknownName(String),
    #[error("enum tag `{0}` has different codes in different types")]
    SymbolClash(String),
    #[error("value {value} of `{name}` needs more than four decimal places")]
    Precision { name: String, value: String },
    #[error("cannot multiply two fractional quantities in `{0}`")]
    NonLinear(String),
    #[error("price unit `{0}` cannot be converted to a one-time amount")]
    PriceUnit(String),
    #[error("composite bound `{what}` cannot be evaluated: {source}")]
    Bound {
        what: String,
        #[source]
        source: EvalError,
    },
    #[error("no binding for `{0}` needed to evaluate a bound")]
    MissingBinding(String),
}

/// Values keyed by name, as supplied on the command line or options file.
pub type Bindings = IndexMap<String, crate::model::Value>;
