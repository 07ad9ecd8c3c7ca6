//! Explicit-state CTMC model checking for guarded-command models, with generators for
//! transmission-line, single-tower and compact smart-grid sensor network models.

pub mod expr;
pub mod lexer;
pub mod model;
pub mod models;
pub mod numerics;
pub mod parser;
pub mod properties;
pub mod simulator;
pub mod space;

pub use expr::{Env, Expr, Type, Value};
pub use model::{ModelError, ModelIR};
pub use numerics::{SolverOptions, SteadyMethod};
pub use parser::{parse_and_validate, parse_model};
pub use properties::{
    evaluate, parse_property, parse_property_file, Property, PropertyError, PropertyKind, QueryResult,
};
pub use space::{build, BuildError, BuildOptions, StateSpace};
