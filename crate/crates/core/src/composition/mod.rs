//! Composition expressions and the semantics of composing services.

mod compose;
mod expr;
mod seq;

use thiserror::Error;

pub use compose::{compose, compose_along_flow, ComposeOptions, CompositionResult};
pub use expr::{parse_composition_expr, CompOp, CompositionExpr};
pub use seq::{
    aggregate_trust, combine_nonfunctional, combine_price, merge_context, merge_context_with,
    one_time_amount, seq_compose, Composed, PackagedTrust, PostRulesHook, PricingMode, SeqOptions,
    TrustAggregator, TrustLogic, CONCAT,
};

use crate::flatten::FlattenError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompositionError {
    #[error("currency mismatch: {left} vs {right}")]
    CurrencyMismatch { left: String, right: String },
    #[error("price unit `{unit}` has no usage parameter to lift it to a one-time amount")]
    UnitMismatch { unit: String },
    #[error("legal rules conflict: {0}")]
    LegalConflict(String),
    #[error("packaged trust logic needs externally supplied ce/re sets")]
    MissingPackagedTrust,
    #[error("context dimension `{dimension}` typed {left} and {right}")]
    ContextTypeConflict {
        dimension: String,
        left: String,
        right: String,
    },
    #[error("parameter `{name}` typed {left} and {right}")]
    ParamTypeConflict {
        name: String,
        left: String,
        right: String,
    },
    #[error("unknown service `{0}`")]
    UnknownService(String),
    #[error("empty flow")]
    EmptyFlow,
    #[error("composition denotes no flows")]
    EmptyFlowSet,
    #[error(transparent)]
    Flatten(#[from] FlattenError),
}
