//! End-to-end runs: options files, catalog loading, and the artifacts of
//! each stage.

use std::collections::BTreeMap;
use std::path::Path;

use ordered_float::OrderedFloat;
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::checker::{self, CheckError, Checker, Outcome, QueryResult};
use crate::composition::{
    compose, parse_composition_expr, ComposeOptions, CompositionError, CompositionExpr, CompositionResult,
    PackagedTrust, PricingMode, SeqOptions, TrustAggregator, TrustLogic,
};
use crate::flatten::{flatten, flow_signature, FlattenError};
use crate::model::{
    parse_catalog, validate_service, write_service, Catalog, ContextInfo, TrustGrade, Value,
};
use crate::syntax::ParseError;
use crate::tagen::{gen_network, gen_queries, Bindings, GenOptions, Network, Query, TaGenError};
use crate::uppaal::{export_model, export_queries, UppaalError};

pub const DEFAULT_STATE_BOUND: usize = 100_000;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: ParseError,
    },
    #[error("options: {0}")]
    Options(String),
    #[error("{} validation problem(s):\n{}", .0.len(), .0.join("\n"))]
    Validation(Vec<String>),
    #[error(transparent)]
    Composition(#[from] CompositionError),
    #[error(transparent)]
    Flatten(#[from] FlattenError),
    #[error(transparent)]
    Generation(#[from] TaGenError),
    #[error(transparent)]
    Export(#[from] UppaalError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

impl PipelineError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Io { .. } | PipelineError::Parse { .. } | PipelineError::Options(_) => 2,
            PipelineError::Check(CheckError::MissingBinding(_) | CheckError::TypeMismatch { .. }) => 2,
            PipelineError::Validation(_) => 3,
            _ => 4,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPackaged {
    #[serde(default)]
    ce: BTreeMap<String, u8>,
    #[serde(default)]
    re: BTreeMap<String, u8>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptions {
    pricing_mode: Option<PricingMode>,
    trust_logic: Option<TrustLogic>,
    trust_aggregator: Option<TrustAggregator>,
    po_a_observable: Option<bool>,
    b_requires_more: Option<bool>,
    unroll_bound: Option<u32>,
    choose_seed: Option<u64>,
    state_bound: Option<usize>,
    #[serde(default)]
    bindings: toml::Table,
    #[serde(default)]
    requester: toml::Table,
    packaged: Option<RawPackaged>,
}

/// Everything a run needs besides the catalog and the expression.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub compose: ComposeOptions,
    pub requester: ContextInfo,
    pub state_bound: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            compose: ComposeOptions::default(),
            requester: ContextInfo::default(),
            state_bound: DEFAULT_STATE_BOUND,
        }
    }
}

fn toml_value(name: &str, v: &toml::Value) -> Result<Value, PipelineError> {
    Ok(match v {
        toml::Value::Boolean(b) => Value::Bool(*b),
        toml::Value::Integer(i) => Value::Int(*i),
        toml::Value::Float(f) => Value::Real(OrderedFloat(*f)),
        toml::Value::String(s) => Value::Str(s.clone()),
        toml::Value::Array(a) => Value::Tuple(a.iter().map(|x| toml_value(name, x)).collect::<Result<_, _>>()?),
        _ => return Err(PipelineError::Options(format!("`{name}` has an unsupported value"))),
    })
}

fn grades(m: &BTreeMap<String, u8>) -> Result<BTreeMap<String, TrustGrade>, PipelineError> {
    m.iter()
        .map(|(k, &g)| {
            TrustGrade::new(g)
                .map(|g| (k.clone(), g))
                .ok_or_else(|| PipelineError::Options(format!("trust grade {g} of `{k}` is outside 1..5")))
        })
        .collect()
}

impl RunOptions {
    /// Parses an options document. Values stay loosely typed until
    /// [`RunOptions::typed_for`] sees the catalog.
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let raw: RawOptions = toml::from_str(text).map_err(|e| PipelineError::Options(e.to_string()))?;
        let d = SeqOptions::default();
        let seq = SeqOptions {
            pricing_mode: raw.pricing_mode.unwrap_or(d.pricing_mode),
            trust_logic: raw.trust_logic.unwrap_or(d.trust_logic),
            trust_aggregator: raw.trust_aggregator.unwrap_or(d.trust_aggregator),
            po_a_observable: raw.po_a_observable.unwrap_or(d.po_a_observable),
            b_requires_more: raw.b_requires_more.unwrap_or(d.b_requires_more),
            choose_seed: raw.choose_seed.unwrap_or(d.choose_seed),
            packaged: match raw.packaged {
                Some(p) => Some(PackagedTrust {
                    ce: grades(&p.ce)?,
                    re: grades(&p.re)?,
                }),
                None => None,
            },
        };
        let mut bindings = Bindings::new();
        for (k, v) in &raw.bindings {
            bindings.insert(k.clone(), toml_value(k, v)?);
        }
        let mut requester = ContextInfo::default();
        for (k, v) in &raw.requester {
            requester.entries.insert(k.clone(), toml_value(k, v)?);
        }
        let state_bound = raw.state_bound.unwrap_or(DEFAULT_STATE_BOUND);
        if state_bound == 0 {
            return Err(PipelineError::Options("state_bound must be at least 1".into()));
        }
        Ok(RunOptions {
            compose: ComposeOptions {
                seq,
                unroll: raw.unroll_bound.unwrap_or(1),
                bindings,
            },
            requester,
            state_bound,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Self::from_toml(&read(path)?)
    }

    /// Converts bindings and requester values to the catalog's declared
    /// types, e.g. enum tags given as strings.
    pub fn typed_for(mut self, catalog: &Catalog) -> Result<Self, PipelineError> {
        let fix = |name: &str, v: &Value, t: Option<&crate::model::DataType>| match t {
            Some(t) => t
                .coerce(v.clone())
                .ok_or_else(|| PipelineError::Options(format!("value {v} of `{name}` is not a {t}"))),
            None => Ok(v.clone()),
        };
        for (k, v) in self.compose.bindings.iter_mut() {
            *v = fix(k, v, catalog.param_type(k))?;
        }
        for (k, v) in self.requester.entries.iter_mut() {
            *v = fix(k, v, catalog.dim_type(k))?;
        }
        Ok(self)
    }
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses and merges catalog files. A service defined twice is an error.
pub fn load_catalog<P: AsRef<Path>>(paths: &[P]) -> Result<Catalog, PipelineError> {
    let mut out = Catalog::default();
    for p in paths {
        let p = p.as_ref();
        let cat = parse_catalog(&read(p)?).map_err(|source| PipelineError::Parse {
            path: p.display().to_string(),
            source,
        })?;
        for s in cat.services.into_values() {
            if out.services.contains_key(&s.name) {
                return Err(PipelineError::Options(format!("service `{}` is defined twice", s.name)));
            }
            out.insert(s);
        }
    }
    Ok(out)
}

/// Reads a composition expression given inline or as `@path`.
pub fn load_expr(arg: &str, catalog: &Catalog) -> Result<CompositionExpr, PipelineError> {
    let (text, origin) = match arg.strip_prefix('@') {
        Some(path) => (read(Path::new(path))?, path.to_string()),
        None => (arg.to_string(), "expression".to_string()),
    };
    parse_composition_expr(text.trim(), catalog).map_err(|source| PipelineError::Parse { path: origin, source })
}

/// One line per validation problem, prefixed with the service name.
pub fn validation_report(catalog: &Catalog) -> Vec<String> {
    catalog
        .services
        .values()
        .flat_map(|s| validate_service(s).into_iter().map(move |v| format!("{}: {v}", s.name)))
        .collect()
}

/// One flow signature per line.
pub fn flows_text(expr: &CompositionExpr, unroll: u32, catalog: &Catalog) -> Result<String, PipelineError> {
    let flows = flatten(expr, unroll, catalog)?;
    Ok(flows.iter().map(|f| flow_signature(f) + "\n").collect())
}

/// A generated network with its queries and file renderings.
#[derive(Debug, Clone)]
pub struct Transformed {
    pub composition: CompositionResult,
    pub network: Network,
    pub queries: Vec<Query>,
    pub model_xml: String,
    pub model_q: String,
}

pub fn transform(
    expr: &CompositionExpr,
    catalog: &Catalog,
    opts: &RunOptions,
) -> Result<Transformed, PipelineError> {
    let composition = compose(expr, catalog, &opts.compose)?;
    let gen = GenOptions {
        bindings: opts.compose.bindings.clone(),
        requester: opts.requester.clone(),
    };
    let network = gen_network(&composition, catalog, &gen)?;
    let queries = gen_queries(&composition, &network, catalog, &opts.compose.bindings)?;
    Ok(Transformed {
        model_xml: export_model(&network)?,
        model_q: export_queries(&queries),
        composition,
        network,
        queries,
    })
}

/// Checks every query from the initial state given by the options.
pub fn verify(t: &Transformed, opts: &RunOptions) -> Result<Vec<QueryResult>, PipelineError> {
    let c = Checker::new(&t.network)?;
    let init = c.init_state(&opts.requester, &opts.compose.bindings, &t.network)?;
    let verdicts: Vec<_> = t
        .queries
        .par_iter()
        .map(|q| c.check(q, &init, opts.state_bound))
        .collect::<Result<_, _>>()?;
    Ok(t.queries
        .iter()
        .cloned()
        .zip(verdicts)
        .map(|(query, verdict)| QueryResult { query, verdict })
        .collect())
}

/// 0 when every query passes, 5 when one fails, otherwise 6.
pub fn verdict_exit_code(results: &[QueryResult]) -> i32 {
    let outcomes = results.iter().map(|r| r.verdict.outcome);
    if outcomes.clone().any(|o| o == Outcome::Fail) {
        5
    } else if outcomes.clone().any(|o| o == Outcome::Inconclusive) {
        6
    } else {
        0
    }
}

/// Every artifact of a full run, keyed by file name.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub files: Vec<(&'static str, String)>,
    pub results: Vec<QueryResult>,
}

pub fn run_pipeline(
    expr: &CompositionExpr,
    catalog: &Catalog,
    opts: &RunOptions,
) -> Result<Artifacts, PipelineError> {
    let problems = validation_report(catalog);
    if !problems.is_empty() {
        return Err(PipelineError::Validation(problems));
    }
    let flows = flows_text(expr, opts.compose.unroll, catalog)?;
    let t = transform(expr, catalog, opts)?;
    let results = verify(&t, opts)?;
    Ok(Artifacts {
        files: vec![
            ("composite.svc", write_service(&t.composition.composite)),
            ("flows.txt", flows),
            ("model.xml", t.model_xml),
            ("model.q", t.model_q),
            ("report.txt", checker::text_report(&results)),
            ("report.jsonl", checker::machine_report(&results)),
        ],
        results,
    })
}

/// Writes `files` into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, files: &[(&str, String)]) -> Result<(), PipelineError> {
    let io = |p: &Path| {
        let path = p.display().to_string();
        move |source| PipelineError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for (name, text) in files {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(io(&p))?;
    }
    Ok(())
}
