use std::collections::BTreeMap;
use std::fmt;

use indexmap::{IndexMap, IndexSet};

use super::expr::{Expr, Ident, Scope, TypeEnv};
use super::types::{DataType, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Input,
    Output,
    /// Produced by one participant and consumed by another flow; only
    /// arises in composites.
    InOut,
}

impl Direction {
    pub fn is_input(self) -> bool {
        matches!(self, Direction::Input | Direction::InOut)
    }

    pub fn is_output(self) -> bool {
        matches!(self, Direction::Output | Direction::InOut)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::InOut => "inout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parameter {
    pub name: String,
    pub dtype: DataType,
    pub direction: Direction,
    /// `true` when the parameter is unconstrained.
    pub constraint: Expr,
}

impl Parameter {
    pub fn new(name: impl Into<String>, dtype: DataType, direction: Direction) -> Self {
        Parameter {
            name: name.into(),
            dtype,
            direction,
            constraint: Expr::tt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub dtype: DataType,
    pub value: Value,
}

/// Contextual information: dimension typing plus tags along dimensions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextInfo {
    pub typing: IndexMap<String, DataType>,
    pub entries: IndexMap<String, Value>,
}

impl ContextInfo {
    pub fn is_empty(&self) -> bool {
        self.typing.is_empty() && self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Context {
    /// Constraints over `ctx.<dimension>` the requester must satisfy.
    pub rules: IndexSet<Expr>,
    pub info: ContextInfo,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceFunction {
    pub name: String,
    pub inputs: IndexSet<String>,
    pub addresses: IndexSet<String>,
    pub result_name: String,
    pub outputs: IndexSet<String>,
    pub pre: IndexSet<Expr>,
    pub post: IndexSet<Expr>,
    pub post_observable: bool,
    /// Request/response channel names used in generated automata.
    pub channels: Option<(String, String)>,
}

impl ServiceFunction {
    pub fn new(name: impl Into<String>, result_name: impl Into<String>) -> Self {
        ServiceFunction {
            name: name.into(),
            inputs: IndexSet::new(),
            addresses: IndexSet::new(),
            result_name: result_name.into(),
            outputs: IndexSet::new(),
            pre: IndexSet::new(),
            post: IndexSet::new(),
            post_observable: true,
            channels: None,
        }
    }

    pub fn request_channel(&self) -> String {
        match &self.channels {
            Some((req, _)) => req.clone(),
            None => format!("{}Req", self.name),
        }
    }

    pub fn response_channel(&self) -> String {
        match &self.channels {
            Some((_, resp)) => resp.clone(),
            None => format!("{}Resp", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Price {
    /// Arithmetic expression; constants are the common case.
    pub amount: Expr,
    pub currency: String,
    pub unit: String,
    /// Parameter counting consumed units, used to lift a per-unit amount
    /// to a one-time amount.
    pub per: Option<String>,
}

pub const ONE_TIME: &str = "oneTime";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrustGrade(pub u8);

impl TrustGrade {
    pub const LOW: TrustGrade = TrustGrade(1);
    pub const HIGH: TrustGrade = TrustGrade(5);

    pub fn new(v: u8) -> Option<Self> {
        (1..=5).contains(&v).then_some(TrustGrade(v))
    }

    pub fn is_valid(self) -> bool {
        (1..=5).contains(&self.0)
    }

    pub fn meet(self, other: Self) -> Self {
        self.min(other)
    }

    pub fn join(self, other: Self) -> Self {
        self.max(other)
    }
}

impl fmt::Display for TrustGrade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type Recommendations = BTreeMap<String, TrustGrade>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProviderTrust {
    pub ce: Recommendations,
    pub pg: bool,
    pub re: Recommendations,
}

/// Nonfunctional guarantees; absent components are not relevant to the service.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Nonfunctional {
    pub safety_time: Option<u64>,
    pub safety_data: Option<IndexSet<Expr>>,
    pub security: Option<IndexSet<String>>,
    pub reliability: Option<u64>,
    pub availability: Option<u64>,
    pub price: Option<Price>,
    pub trust: Option<ProviderTrust>,
}

impl Nonfunctional {
    pub fn is_empty(&self) -> bool {
        *self == Nonfunctional::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LegalRule {
    /// Must hold for the contract to apply, e.g. `CarType == toyota`.
    Check(Expr),
    /// Obligation that changes state, e.g. `deposit := 300`.
    Effect { target: String, value: Expr },
}

impl LegalRule {
    /// Constraint view used for conflict detection. Effects whose value
    /// reads the target are accumulations and impose no constraint.
    pub fn as_constraint(&self) -> Option<Expr> {
        match self {
            LegalRule::Check(e) => Some(e.clone()),
            LegalRule::Effect { target, value } if !value.vars().contains(target) => Some(
                Expr::bin(super::expr::BinOp::Eq, Expr::Var(target.clone()), value.clone()),
            ),
            LegalRule::Effect { .. } => None,
        }
    }

    pub fn vars(&self) -> std::collections::BTreeSet<String> {
        match self {
            LegalRule::Check(e) => e.vars(),
            LegalRule::Effect { target, value } => {
                let mut v = value.vars();
                v.insert(target.clone());
                v
            }
        }
    }
}

impl fmt::Display for LegalRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LegalRule::Check(e) => write!(f, "{e}"),
            LegalRule::Effect { target, value } => write!(f, "{target} := {value}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contract {
    pub function: ServiceFunction,
    pub nonfunctional: Nonfunctional,
    pub legal: IndexSet<LegalRule>,
}

/// The 4-tuple of parameters, attributes, context, and contract, plus the
/// catalog name it is published under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfiguredService {
    pub name: String,
    pub params: IndexMap<String, Parameter>,
    pub attrs: IndexMap<String, Attribute>,
    pub context: Context,
    pub contract: Contract,
}

impl ConfiguredService {
    pub fn new(name: impl Into<String>, function: ServiceFunction) -> Self {
        ConfiguredService {
            name: name.into(),
            params: IndexMap::new(),
            attrs: IndexMap::new(),
            context: Context::default(),
            contract: Contract {
                function,
                nonfunctional: Nonfunctional::default(),
                legal: IndexSet::new(),
            },
        }
    }

    pub fn function(&self) -> &ServiceFunction {
        &self.contract.function
    }

    pub fn nonfunctional(&self) -> &Nonfunctional {
        &self.contract.nonfunctional
    }

    pub fn input_params(&self) -> impl Iterator<Item = &Parameter> {
        self.params.values().filter(|p| p.direction.is_input())
    }

    pub fn output_params(&self) -> impl Iterator<Item = &Parameter> {
        self.params.values().filter(|p| p.direction.is_output())
    }

    /// Every enum type reachable from parameters, attributes, and dimensions.
    pub fn enum_types(&self) -> Vec<&DataType> {
        let mut out: Vec<&DataType> = Vec::new();
        for p in self.params.values() {
            push_enums(&p.dtype, &mut out);
        }
        for a in self.attrs.values() {
            push_enums(&a.dtype, &mut out);
        }
        for t in self.context.info.typing.values() {
            push_enums(t, &mut out);
        }
        out
    }

    pub fn is_symbol(&self, name: &str) -> bool {
        self.enum_types()
            .iter()
            .any(|t| t.enum_values().is_some_and(|v| v.iter().any(|s| s == name)))
    }
}

fn collect_enums<'a>(t: &'a DataType, f: &mut impl FnMut(&'a DataType)) {
    match t {
        DataType::Enum { .. } => f(t),
        DataType::Tuple(ts) => ts.iter().for_each(|t| collect_enums(t, f)),
        _ => {}
    }
}

fn push_enums<'a>(t: &'a DataType, out: &mut Vec<&'a DataType>) {
    collect_enums(t, &mut |e| {
        if !out.contains(&e) {
            out.push(e);
        }
    });
}

impl TypeEnv for ConfiguredService {
    fn var_type(&self, name: &str) -> Option<&DataType> {
        self.params.get(name).map(|p| &p.dtype)
    }

    fn dim_type(&self, dim: &str) -> Option<&DataType> {
        self.context.info.typing.get(dim)
    }
}

impl Scope for ConfiguredService {
    fn ident(&self, name: &str) -> Option<Ident> {
        if self.params.contains_key(name) {
            Some(Ident::Var)
        } else if self.is_symbol(name) {
            Some(Ident::Symbol)
        } else {
            None
        }
    }

    fn dimension(&self, name: &str) -> bool {
        self.context.info.typing.contains_key(name)
    }
}

/// Named collection of services that composition expressions refer to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    pub services: IndexMap<String, ConfiguredService>,
}

impl Catalog {
    pub fn get(&self, name: &str) -> Option<&ConfiguredService> {
        self.services.get(name)
    }

    pub fn insert(&mut self, s: ConfiguredService) -> Option<ConfiguredService> {
        self.services.insert(s.name.clone(), s)
    }

    pub fn param_type(&self, name: &str) -> Option<&DataType> {
        self.services
            .values()
            .find_map(|s| s.params.get(name).map(|p| &p.dtype))
    }

    pub fn dim_type(&self, name: &str) -> Option<&DataType> {
        self.services
            .values()
            .find_map(|s| s.context.info.typing.get(name))
    }
}

impl FromIterator<ConfiguredService> for Catalog {
    fn from_iter<T: IntoIterator<Item = ConfiguredService>>(iter: T) -> Self {
        let mut c = Catalog::default();
        for s in iter {
            c.insert(s);
        }
        c
    }
}

/// Resolves composition conditions: service parameters and enum symbols of
/// the catalog, with unknown identifiers treated as free condition variables.
impl Scope for Catalog {
    fn ident(&self, name: &str) -> Option<Ident> {
        if self.param_type(name).is_some() {
            Some(Ident::Var)
        } else if self.services.values().any(|s| s.is_symbol(name)) {
            Some(Ident::Symbol)
        } else {
            Some(Ident::Var)
        }
    }

    fn dimension(&self, name: &str) -> bool {
        self.dim_type(name).is_some()
    }
}
