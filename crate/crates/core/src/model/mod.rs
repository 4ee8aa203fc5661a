//! The ConfiguredService data model and its constraint language.

pub mod expr;
pub mod sat;
pub mod service;
pub mod specfile;
pub mod types;
pub mod validate;

pub use expr::{
    eval, eval_bool, parse_expr, parse_expr_in, BinOp, ConstraintExpr, Environment, EvalError,
    Expr, ExprParser, FreeScope, Ident, Scope, TypeEnv, TypeError,
};
pub use sat::{constraints_jointly_satisfiable, Domains, SatError, Witness};
pub use service::*;
pub use specfile::{parse_catalog, parse_service_spec, write_catalog, write_service};
pub use types::{fmt_number, DataType, Value};
pub use validate::{context_rules_hold, validate_service, RuleCheck, Violation, ViolationKind};

/// Evaluates a constraint or arithmetic expression under `env`.
pub fn eval_constraint(e: &Expr, env: &Environment) -> Result<Value, EvalError> {
    eval(e, env)
}
