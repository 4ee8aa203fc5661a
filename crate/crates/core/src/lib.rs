//! Specification, composition, and verification of services with
//! context-dependent contracts.

pub mod syntax;
pub mod model;
pub mod composition;
pub mod flatten;
pub mod tagen;
pub mod uppaal;
pub mod checker;
pub mod pipeline;
