//! Generators for the grid case-study models and the routing engine behind the line model.

pub mod cheaplink;
pub mod compact;
pub mod line;
pub mod routing;
pub mod rules;
pub mod tower;

use thiserror::Error;

use crate::expr::Env;
use crate::model::ModelIR;
use crate::parser::parse_and_validate;

pub use cheaplink::{estimate_cheap_link_probability, CheapLinkEstimate, CheapLinkMode};
pub use compact::{build_compact, compact_text, GridParams};
pub use line::{build_line, line_text, LineParams};
pub use routing::{compute_routes, HopKind, LineTopology, Route, RouteCost, RouteEntry, RouteTable};
pub use rules::{derive_link_rules, LinkClass, LinkRule, LinkRules, TowerRules};
pub use tower::{build_tower, tower_text, TowerParams};

#[derive(Debug, Error)]
pub enum ModelsError {
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("{count} failure sets exceed the enumeration cap of {cap}")]
    TooManyFailureSets { count: usize, cap: usize },
    #[error("generated model does not parse: {0}")]
    Generated(String),
}

/// A real literal that the model parser reads back to the same value.
pub(crate) fn fmt_real(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E']) {
        s
    } else {
        format!("{s}.0")
    }
}

pub(crate) fn parse_generated(text: &str) -> Result<ModelIR, ModelsError> {
    parse_and_validate(text, &Env::new()).map_err(|e| ModelsError::Generated(e.to_string()))
}
