//! The property language: bounded F/G/U, steady-state probability, cumulative and long-run rewards.

use std::collections::HashMap;
use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::expr::{fold_constants, typecheck, Env, Expr, Type};
use crate::lexer::Tok;
use crate::model::{ModelError, ModelIR};
use crate::numerics::{self, NumericsError, SolverOptions};
use crate::parser::Parser;
use crate::space::StateSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PropertyKind {
    BoundedF,
    BoundedG,
    BoundedU,
    SteadyProb,
    CumulReward,
    SteadyReward,
}

impl PropertyKind {
    pub fn is_probability(self) -> bool {
        matches!(
            self,
            PropertyKind::BoundedF | PropertyKind::BoundedG | PropertyKind::BoundedU | PropertyKind::SteadyProb
        )
    }

    pub fn is_steady(self) -> bool {
        matches!(self, PropertyKind::SteadyProb | PropertyKind::SteadyReward)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub text: String,
    pub kind: PropertyKind,
    pub bound_expr: Option<Expr>,
    /// Folded time bound in hours.
    pub bound: Option<f64>,
    pub reward: Option<String>,
    /// Left operand of `U`.
    pub phi1: Option<Expr>,
    /// Target of F, G, U and S.
    pub phi: Option<Expr>,
    /// Constants visible to the property beyond the model's own.
    pub env: Env,
}

#[derive(Debug, Error)]
pub enum PropertyError {
    #[error("property syntax error at column {col}: {message}")]
    Syntax { col: usize, message: String },
    #[error("unknown reward structure \"{0}\"")]
    UnknownReward(String),
    #[error("predicate `{expr}` is not boolean: {message}")]
    Predicate { expr: String, message: String },
    #[error("time bound `{expr}` references undefined constant `{name}`; supply it with --const {name}=...")]
    UnboundConstant { expr: String, name: String },
    #[error("time bound `{expr}` must be a nonnegative number")]
    BadBound { expr: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub value: f64,
    pub method: String,
    /// Solver iterations (steady state) or right truncation point (uniformization).
    pub iterations: usize,
    pub wall: Duration,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn syntax(e: ModelError) -> PropertyError {
    match e {
        ModelError::Syntax { pos, message } => PropertyError::Syntax { col: pos.col, message },
        other => PropertyError::Model(other),
    }
}

struct Ctx<'a> {
    types: HashMap<String, Type>,
    consts: Env,
    formulas: HashMap<String, Expr>,
    model: &'a ModelIR,
}

impl Ctx<'_> {
    fn predicate(&self, e: Expr) -> Result<Expr, PropertyError> {
        match typecheck(&e, &self.types) {
            Ok(Type::Bool) => Ok(e),
            Ok(t) => Err(PropertyError::Predicate { expr: e.to_string(), message: format!("has type {t}") }),
            Err(err) => Err(PropertyError::Predicate { expr: e.to_string(), message: err.to_string() }),
        }
    }

    fn bound(&self, e: &Expr) -> Result<f64, PropertyError> {
        let folded = fold_constants(e, &self.consts, &self.formulas)
            .map_err(|_| PropertyError::BadBound { expr: e.to_string() })?;
        if let Some(name) = folded.identifiers().first() {
            return Err(PropertyError::UnboundConstant { expr: e.to_string(), name: name.to_string() });
        }
        match folded.literal_value().and_then(|v| v.as_f64()) {
            Some(b) if b >= 0.0 && b.is_finite() => Ok(b),
            _ => Err(PropertyError::BadBound { expr: e.to_string() }),
        }
    }
}

/// Parses one property against `model`; `env` supplies constants the model does not declare.
pub fn parse_property(text: &str, model: &ModelIR, env: &Env) -> Result<Property, PropertyError> {
    let mut consts = model.constant_env()?;
    consts.extend_from(env);
    let mut types = model.identifier_types()?;
    for (k, v) in env.iter() {
        types.entry(k.to_string()).or_insert(v.ty());
    }
    let ctx = Ctx { types, consts, formulas: model.formula_map(), model };

    let mut p = Parser::new(text).map_err(syntax)?;
    let head = match p.peek() {
        Tok::Ident(s) if s == "P" || s == "S" || s == "R" => s.clone(),
        other => return p.error(format!("expected P, S or R, found {other}")).map_err(syntax),
    };
    p.advance();
    let mut reward = None;
    if head == "R" {
        p.expect(Tok::LBrace).map_err(syntax)?;
        let name = match p.advance() {
            Tok::Str(s) | Tok::Ident(s) => s,
            other => return p.error(format!("expected a reward name, found {other}")).map_err(syntax),
        };
        p.expect(Tok::RBrace).map_err(syntax)?;
        if ctx.model.reward(&name).is_none() {
            return Err(PropertyError::UnknownReward(name));
        }
        reward = Some(name);
    }
    p.expect(Tok::Eq).map_err(syntax)?;
    p.expect(Tok::Query).map_err(syntax)?;
    p.expect(Tok::LBracket).map_err(syntax)?;

    let mut prop = Property {
        text: text.trim().to_string(),
        kind: PropertyKind::SteadyProb,
        bound_expr: None,
        bound: None,
        reward,
        phi1: None,
        phi: None,
        env: env.clone(),
    };
    let time_bound = |p: &mut Parser| -> Result<Expr, PropertyError> {
        p.expect(Tok::Le).map_err(syntax)?;
        p.additive().map_err(syntax)
    };

    match head.as_str() {
        "S" => {
            prop.kind = PropertyKind::SteadyProb;
            prop.phi = Some(ctx.predicate(p.expr().map_err(syntax)?)?);
        }
        "R" => {
            if p.is_keyword("C") {
                p.advance();
                prop.kind = PropertyKind::CumulReward;
                prop.bound_expr = Some(time_bound(&mut p)?);
            } else if p.is_keyword("S") {
                p.advance();
                prop.kind = PropertyKind::SteadyReward;
            } else {
                return p.error(format!("expected C<=bound or S, found {}", p.peek())).map_err(syntax);
            }
        }
        _ => {
            if (p.is_keyword("F") || p.is_keyword("G")) && *p.peek_at(1) == Tok::Le {
                prop.kind = if p.is_keyword("F") { PropertyKind::BoundedF } else { PropertyKind::BoundedG };
                p.advance();
                prop.bound_expr = Some(time_bound(&mut p)?);
                prop.phi = Some(ctx.predicate(p.expr().map_err(syntax)?)?);
            } else {
                let lhs = p.expr().map_err(syntax)?;
                if !p.is_keyword("U") {
                    return p.error(format!("expected F<=, G<= or U<=, found {}", p.peek())).map_err(syntax);
                }
                p.advance();
                prop.kind = PropertyKind::BoundedU;
                prop.phi1 = Some(ctx.predicate(lhs)?);
                prop.bound_expr = Some(time_bound(&mut p)?);
                prop.phi = Some(ctx.predicate(p.expr().map_err(syntax)?)?);
            }
        }
    }
    p.expect(Tok::RBracket).map_err(syntax)?;
    if !p.at_eof() {
        return p.error(format!("unexpected {} after property", p.peek())).map_err(syntax);
    }
    if let Some(b) = &prop.bound_expr {
        prop.bound = Some(ctx.bound(b)?);
    }
    Ok(prop)
}

/// Parses a property file: one property per line, `//` comments and blank lines ignored.
pub fn parse_property_file(text: &str, model: &ModelIR, env: &Env) -> Result<Vec<Property>, (usize, PropertyError)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = match line.find("//") {
            Some(k) => &line[..k],
            None => line,
        };
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_property(line, model, env).map_err(|e| (i + 1, e))?);
    }
    Ok(out)
}

/// Computes the value of a property on a state space built from the same model.
pub fn evaluate(space: &StateSpace, prop: &Property, opts: &SolverOptions) -> Result<QueryResult, NumericsError> {
    opts.check()?;
    let start = Instant::now();
    let pred = |e: &Option<Expr>| -> Result<Vec<bool>, NumericsError> {
        let e = e.as_ref().expect("parsed property has its predicate");
        space.predicate(e, &prop.env).map_err(|e| NumericsError::Space(e.into()))
    };
    let t = prop.bound.unwrap_or(0.0);
    let (value, method, iterations) = match prop.kind {
        PropertyKind::BoundedF => {
            let (v, s) = numerics::transient::until_with_stats(space, None, &pred(&prop.phi)?, t, opts)?;
            (v, "uniformization".to_string(), s.right)
        }
        PropertyKind::BoundedG => {
            let not_phi: Vec<bool> = pred(&prop.phi)?.into_iter().map(|b| !b).collect();
            let (v, s) = numerics::transient::until_with_stats(space, None, &not_phi, t, opts)?;
            (1.0 - v, "uniformization".to_string(), s.right)
        }
        PropertyKind::BoundedU => {
            let (v, s) =
                numerics::transient::until_with_stats(space, Some(&pred(&prop.phi1)?), &pred(&prop.phi)?, t, opts)?;
            (v, "uniformization".to_string(), s.right)
        }
        PropertyKind::SteadyProb => {
            let target = pred(&prop.phi)?;
            let ss = numerics::steady_state(space, opts)?;
            let v: f64 = ss.dist.iter().zip(&target).filter(|(_, &b)| b).map(|(p, _)| p).sum();
            (v.clamp(0.0, 1.0), ss.method.to_string(), ss.iterations)
        }
        PropertyKind::CumulReward => {
            let rho = space.reward_rate_vector(prop.reward.as_deref().unwrap_or_default())?;
            let (v, s) = numerics::transient::cumulative_from_rates(space, &rho, t, opts)?;
            (v, "uniformization".to_string(), s.right)
        }
        PropertyKind::SteadyReward => {
            let rho = space.reward_rate_vector(prop.reward.as_deref().unwrap_or_default())?;
            let ss = numerics::steady_state(space, opts)?;
            (ss.dist.iter().zip(&rho).map(|(p, r)| p * r).sum(), ss.method.to_string(), ss.iterations)
        }
    };
    Ok(QueryResult { value, method, iterations, wall: start.elapsed() })
}
