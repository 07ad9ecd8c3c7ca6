//! Typed arithmetic/boolean expressions shared by models, rewards and properties.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl Value {
    pub fn ty(&self) -> Type {
        match self {
            Value::Int(_) => Type::Int,
            Value::Real(_) => Type::Real,
            Value::Bool(_) => Type::Bool,
        }
    }

    /// Numeric view of the value; `None` for booleans.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Int(i) => Some(i as f64),
            Value::Real(r) => Some(r),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn to_expr(self) -> Expr {
        match self {
            Value::Int(i) => Expr::Int(i),
            Value::Real(r) => Expr::Real(r),
            Value::Bool(b) => Expr::Bool(b),
        }
    }

    /// Lexes `NAME=VALUE` right-hand sides: integers, reals, `true`/`false`.
    pub fn parse_literal(text: &str) -> Option<Value> {
        let t = text.trim();
        match t {
            "true" => return Some(Value::Bool(true)),
            "false" => return Some(Value::Bool(false)),
            _ => {}
        }
        if let Ok(i) = t.parse::<i64>() {
            return Some(Value::Int(i));
        }
        t.parse::<f64>().ok().filter(|r| r.is_finite()).map(Value::Real)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r:?}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Type {
    Int,
    Real,
    Bool,
}

impl Type {
    pub fn is_numeric(self) -> bool {
        matches!(self, Type::Int | Type::Real)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Int => "int",
            Type::Real => "double",
            Type::Bool => "bool",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "&",
            BinaryOp::Or => "|",
        }
    }

    /// Binding strength used by the parser and the printer (higher binds tighter).
    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 4,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 5,
            BinaryOp::Add | BinaryOp::Sub => 6,
            BinaryOp::Mul | BinaryOp::Div => 7,
        }
    }
}

const NOT_PRECEDENCE: u8 = 3;
const NEG_PRECEDENCE: u8 = 8;
const ATOM_PRECEDENCE: u8 = 9;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Real(f64),
    Bool(bool),
    Ident(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("unbound identifier `{0}`")]
    Unbound(String),
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("integer overflow in `{0}`")]
    Overflow(String),
    #[error("cyclic formula definitions: {}", .0.join(" -> "))]
    CyclicFormula(Vec<String>),
    #[error("type error at {path}: {message}")]
    Type { path: String, message: String },
}

impl Expr {
    pub fn ident(name: impl Into<String>) -> Expr {
        Expr::Ident(name.into())
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn and(l: Expr, r: Expr) -> Expr {
        Expr::binary(BinaryOp::And, l, r)
    }

    pub fn or(l: Expr, r: Expr) -> Expr {
        Expr::binary(BinaryOp::Or, l, r)
    }

    pub fn not(e: Expr) -> Expr {
        Expr::unary(UnaryOp::Not, e)
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Expr::Int(_) | Expr::Real(_) | Expr::Bool(_))
    }

    pub fn literal_value(&self) -> Option<Value> {
        match *self {
            Expr::Int(i) => Some(Value::Int(i)),
            Expr::Real(r) => Some(Value::Real(r)),
            Expr::Bool(b) => Some(Value::Bool(b)),
            _ => None,
        }
    }

    /// Identifiers referenced anywhere in the expression, in first-occurrence order.
    pub fn identifiers(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        self.collect_identifiers(&mut out, &mut seen);
        out
    }

    fn collect_identifiers<'a>(&'a self, out: &mut Vec<&'a str>, seen: &mut HashSet<&'a str>) {
        match self {
            Expr::Ident(name) => {
                if seen.insert(name.as_str()) {
                    out.push(name.as_str());
                }
            }
            Expr::Unary(_, e) => e.collect_identifiers(out, seen),
            Expr::Binary(_, l, r) => {
                l.collect_identifiers(out, seen);
                r.collect_identifiers(out, seen);
            }
            _ => {}
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Unary(UnaryOp::Not, _) => NOT_PRECEDENCE,
            Expr::Unary(UnaryOp::Neg, _) => NEG_PRECEDENCE,
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Int(i) if *i < 0 => NEG_PRECEDENCE,
            Expr::Real(r) if r.is_sign_negative() => NEG_PRECEDENCE,
            _ => ATOM_PRECEDENCE,
        }
    }

    /// Replaces identifiers bound in `subst` by their expressions (no recursion into the replacement).
    pub fn substitute(&self, subst: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Ident(name) => subst(name).unwrap_or_else(|| self.clone()),
            Expr::Unary(op, e) => Expr::unary(*op, e.substitute(subst)),
            Expr::Binary(op, l, r) => Expr::binary(*op, l.substitute(subst), r.substitute(subst)),
            _ => self.clone(),
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Real(r) => write!(f, "{r:?}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Ident(name) => f.write_str(name),
            Expr::Unary(UnaryOp::Neg, e) => {
                f.write_str("-")?;
                // `--x` would lex as two minus signs anyway, but keep literals readable.
                write_child(f, e, ATOM_PRECEDENCE)
            }
            Expr::Unary(UnaryOp::Not, e) => {
                f.write_str("!")?;
                write_child(f, e, NEG_PRECEDENCE)
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                let comparison = p == 4 || p == 5;
                write_child(f, l, if comparison { p + 1 } else { p })?;
                write!(f, " {} ", op.symbol())?;
                write_child(f, r, p + 1)
            }
        }
    }
}

/// Identifier bindings used during evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Env {
    bindings: HashMap<String, Value>,
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: impl Into<String>, value: Value) -> Option<Value> {
        self.bindings.insert(name.into(), value)
    }

    pub fn with(mut self, name: impl Into<String>, value: Value) -> Self {
        self.bind(name, value);
        self
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.bindings.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.bindings.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Value)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn extend_from(&mut self, other: &Env) {
        for (k, v) in other.iter() {
            self.bind(k, v);
        }
    }
}

impl<S: Into<String>> FromIterator<(S, Value)> for Env {
    fn from_iter<I: IntoIterator<Item = (S, Value)>>(iter: I) -> Self {
        let mut env = Env::new();
        for (k, v) in iter {
            env.bind(k, v);
        }
        env
    }
}

fn numeric(v: Value, ctx: &Expr) -> Result<f64, ExprError> {
    v.as_f64().ok_or_else(|| ExprError::TypeMismatch(format!("expected a number in `{ctx}`")))
}

fn boolean(v: Value, ctx: &Expr) -> Result<bool, ExprError> {
    v.as_bool().ok_or_else(|| ExprError::TypeMismatch(format!("expected a boolean in `{ctx}`")))
}

/// Applies a binary operator to two already-evaluated operands.
pub(crate) fn apply_binary(op: BinaryOp, a: Value, b: Value, ctx: &Expr) -> Result<Value, ExprError> {
    use BinaryOp::*;
    let overflow = || ExprError::Overflow(ctx.to_string());
    Ok(match op {
        Add | Sub | Mul => match (a, b) {
            (Value::Int(x), Value::Int(y)) => Value::Int(
                match op {
                    Add => x.checked_add(y),
                    Sub => x.checked_sub(y),
                    _ => x.checked_mul(y),
                }
                .ok_or_else(overflow)?,
            ),
            _ => {
                let (x, y) = (numeric(a, ctx)?, numeric(b, ctx)?);
                Value::Real(match op {
                    Add => x + y,
                    Sub => x - y,
                    _ => x * y,
                })
            }
        },
        Div => {
            let (x, y) = (numeric(a, ctx)?, numeric(b, ctx)?);
            if y == 0.0 {
                return Err(ExprError::DivisionByZero(ctx.to_string()));
            }
            Value::Real(x / y)
        }
        Eq | Ne => {
            let equal = match (a, b) {
                (Value::Bool(x), Value::Bool(y)) => x == y,
                (Value::Int(x), Value::Int(y)) => x == y,
                _ => numeric(a, ctx)? == numeric(b, ctx)?,
            };
            Value::Bool(if op == Eq { equal } else { !equal })
        }
        Lt | Le | Gt | Ge => {
            let ord = match (a, b) {
                (Value::Int(x), Value::Int(y)) => x.partial_cmp(&y),
                _ => numeric(a, ctx)?.partial_cmp(&numeric(b, ctx)?),
            };
            let ord = ord.ok_or_else(|| ExprError::TypeMismatch(format!("NaN compared in `{ctx}`")))?;
            Value::Bool(match op {
                Lt => ord.is_lt(),
                Le => ord.is_le(),
                Gt => ord.is_gt(),
                _ => ord.is_ge(),
            })
        }
        And => Value::Bool(boolean(a, ctx)? && boolean(b, ctx)?),
        Or => Value::Bool(boolean(a, ctx)? || boolean(b, ctx)?),
    })
}

pub(crate) fn apply_unary(op: UnaryOp, v: Value, ctx: &Expr) -> Result<Value, ExprError> {
    match (op, v) {
        (UnaryOp::Neg, Value::Int(i)) => {
            i.checked_neg().map(Value::Int).ok_or_else(|| ExprError::Overflow(ctx.to_string()))
        }
        (UnaryOp::Neg, Value::Real(r)) => Ok(Value::Real(-r)),
        (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        _ => Err(ExprError::TypeMismatch(format!(
            "operator {} not applicable in `{ctx}`",
            if op == UnaryOp::Neg { "-" } else { "!" }
        ))),
    }
}

/// Evaluates `expr` with every identifier looked up in `env`.
pub fn eval(expr: &Expr, env: &Env) -> Result<Value, ExprError> {
    match expr {
        Expr::Int(i) => Ok(Value::Int(*i)),
        Expr::Real(r) => Ok(Value::Real(*r)),
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Ident(name) => env.get(name).ok_or_else(|| ExprError::Unbound(name.clone())),
        Expr::Unary(op, e) => apply_unary(*op, eval(e, env)?, expr),
        Expr::Binary(op, l, r) => {
            let a = eval(l, env)?;
            // Short-circuit keeps guards like `x>0 & 1/x>1` total.
            match (op, a) {
                (BinaryOp::And, Value::Bool(false)) => return Ok(Value::Bool(false)),
                (BinaryOp::Or, Value::Bool(true)) => return Ok(Value::Bool(true)),
                _ => {}
            }
            apply_binary(*op, a, eval(r, env)?, expr)
        }
    }
}

/// Infers the type of `expr`; free identifiers must appear in `vars`.
pub fn typecheck(expr: &Expr, vars: &HashMap<String, Type>) -> Result<Type, ExprError> {
    typecheck_at(expr, vars, "root")
}

fn typecheck_at(expr: &Expr, vars: &HashMap<String, Type>, path: &str) -> Result<Type, ExprError> {
    let fail = |message: String| ExprError::Type { path: path.to_string(), message };
    match expr {
        Expr::Int(_) => Ok(Type::Int),
        Expr::Real(_) => Ok(Type::Real),
        Expr::Bool(_) => Ok(Type::Bool),
        Expr::Ident(name) => vars.get(name).copied().ok_or_else(|| fail(format!("unknown identifier `{name}`"))),
        Expr::Unary(op, e) => {
            let t = typecheck_at(e, vars, &format!("{path}/operand"))?;
            match op {
                UnaryOp::Neg if t.is_numeric() => Ok(t),
                UnaryOp::Not if t == Type::Bool => Ok(Type::Bool),
                UnaryOp::Neg => Err(fail(format!("`-` applied to {t} in `{expr}`"))),
                UnaryOp::Not => Err(fail(format!("`!` applied to {t} in `{expr}`"))),
            }
        }
        Expr::Binary(op, l, r) => {
            let lt = typecheck_at(l, vars, &format!("{path}/left"))?;
            let rt = typecheck_at(r, vars, &format!("{path}/right"))?;
            use BinaryOp::*;
            match op {
                Add | Sub | Mul if lt.is_numeric() && rt.is_numeric() => {
                    Ok(if lt == Type::Int && rt == Type::Int { Type::Int } else { Type::Real })
                }
                Div if lt.is_numeric() && rt.is_numeric() => Ok(Type::Real),
                Lt | Le | Gt | Ge if lt.is_numeric() && rt.is_numeric() => Ok(Type::Bool),
                Eq | Ne if (lt.is_numeric() && rt.is_numeric()) || (lt == Type::Bool && rt == Type::Bool) => {
                    Ok(Type::Bool)
                }
                And | Or if lt == Type::Bool && rt == Type::Bool => Ok(Type::Bool),
                _ => Err(fail(format!("operator `{}` cannot combine {lt} and {rt} in `{expr}`", op.symbol()))),
            }
        }
    }
}

/// Inlines formulas (transitively) into `expr`, failing on cycles.
pub fn inline_formulas(expr: &Expr, formulas: &HashMap<String, Expr>) -> Result<Expr, ExprError> {
    let mut stack = Vec::new();
    inline_rec(expr, formulas, &mut stack)
}

fn inline_rec(expr: &Expr, formulas: &HashMap<String, Expr>, stack: &mut Vec<String>) -> Result<Expr, ExprError> {
    Ok(match expr {
        Expr::Ident(name) => match formulas.get(name) {
            Some(body) => {
                if let Some(pos) = stack.iter().position(|s| s == name) {
                    let mut cycle = stack[pos..].to_vec();
                    cycle.push(name.clone());
                    return Err(ExprError::CyclicFormula(cycle));
                }
                stack.push(name.clone());
                let out = inline_rec(body, formulas, stack)?;
                stack.pop();
                out
            }
            None => expr.clone(),
        },
        Expr::Unary(op, e) => Expr::unary(*op, inline_rec(e, formulas, stack)?),
        Expr::Binary(op, l, r) => Expr::binary(*op, inline_rec(l, formulas, stack)?, inline_rec(r, formulas, stack)?),
        _ => expr.clone(),
    })
}

/// Inlines formulas, substitutes constants and evaluates every closed subtree.
///
/// The result mentions only identifiers that are neither formulas nor bound in `consts`
/// (for a validated model: exactly the state variables).
pub fn fold_constants(expr: &Expr, consts: &Env, formulas: &HashMap<String, Expr>) -> Result<Expr, ExprError> {
    let inlined = inline_formulas(expr, formulas)?;
    fold_rec(&inlined, consts)
}

fn fold_rec(expr: &Expr, consts: &Env) -> Result<Expr, ExprError> {
    match expr {
        Expr::Ident(name) => Ok(consts.get(name).map(Value::to_expr).unwrap_or_else(|| expr.clone())),
        Expr::Unary(op, e) => {
            let inner = fold_rec(e, consts)?;
            match inner.literal_value() {
                Some(v) => Ok(apply_unary(*op, v, expr)?.to_expr()),
                None => Ok(Expr::unary(*op, inner)),
            }
        }
        Expr::Binary(op, l, r) => {
            let l = fold_rec(l, consts)?;
            let lazy = matches!(op, BinaryOp::And | BinaryOp::Or);
            match (op, l.literal_value()) {
                (BinaryOp::And, Some(Value::Bool(false))) => return Ok(Expr::Bool(false)),
                (BinaryOp::Or, Some(Value::Bool(true))) => return Ok(Expr::Bool(true)),
                _ => {}
            }
            // The right operand of `&`/`|` may never be evaluated, so its errors wait for eval.
            let r = match fold_rec(r, consts) {
                Err(_) if lazy && l.literal_value().is_none() => (**r).clone(),
                other => other?,
            };
            match (l.literal_value(), r.literal_value()) {
                (Some(a), Some(b)) => Ok(apply_binary(*op, a, b, expr)?.to_expr()),
                _ => Ok(Expr::binary(*op, l, r)),
            }
        }
        _ => Ok(expr.clone()),
    }
}

/// Expression with identifiers resolved to slots of a state vector.
///
/// State vectors store integers directly and booleans as 0/1.
#[derive(Debug, Clone, PartialEq)]
pub enum Compiled {
    Const(Value),
    IntVar(usize),
    BoolVar(usize),
    Unary(UnaryOp, Box<Compiled>),
    Binary(BinaryOp, Box<Compiled>, Box<Compiled>),
}

impl Compiled {
    /// Compiles a folded expression; `slots` maps each free identifier to its index and type.
    pub fn new(expr: &Expr, slots: &HashMap<String, (usize, Type)>) -> Result<Compiled, ExprError> {
        Ok(match expr {
            Expr::Int(i) => Compiled::Const(Value::Int(*i)),
            Expr::Real(r) => Compiled::Const(Value::Real(*r)),
            Expr::Bool(b) => Compiled::Const(Value::Bool(*b)),
            Expr::Ident(name) => match slots.get(name) {
                Some((i, Type::Bool)) => Compiled::BoolVar(*i),
                Some((i, _)) => Compiled::IntVar(*i),
                None => return Err(ExprError::Unbound(name.clone())),
            },
            Expr::Unary(op, e) => Compiled::Unary(*op, Box::new(Compiled::new(e, slots)?)),
            Expr::Binary(op, l, r) => {
                Compiled::Binary(*op, Box::new(Compiled::new(l, slots)?), Box::new(Compiled::new(r, slots)?))
            }
        })
    }

    pub fn eval(&self, state: &[i32]) -> Result<Value, ExprError> {
        match self {
            Compiled::Const(v) => Ok(*v),
            Compiled::IntVar(i) => Ok(Value::Int(state[*i] as i64)),
            Compiled::BoolVar(i) => Ok(Value::Bool(state[*i] != 0)),
            Compiled::Unary(op, e) => {
                let v = e.eval(state)?;
                apply_unary(*op, v, &Expr::Bool(false)).map_err(|_| self.error_here())
            }
            Compiled::Binary(op, l, r) => {
                let a = l.eval(state)?;
                match (op, a) {
                    (BinaryOp::And, Value::Bool(false)) => return Ok(Value::Bool(false)),
                    (BinaryOp::Or, Value::Bool(true)) => return Ok(Value::Bool(true)),
                    _ => {}
                }
                let b = r.eval(state)?;
                apply_binary(*op, a, b, &Expr::Bool(false)).map_err(|e| match e {
                    ExprError::DivisionByZero(_) => ExprError::DivisionByZero(format!("{self:?}")),
                    _ => self.error_here(),
                })
            }
        }
    }

    fn error_here(&self) -> ExprError {
        ExprError::TypeMismatch(format!("ill-typed compiled expression {self:?}"))
    }

    pub fn eval_bool(&self, state: &[i32]) -> Result<bool, ExprError> {
        self.eval(state)?.as_bool().ok_or_else(|| ExprError::TypeMismatch("expected boolean".into()))
    }

    pub fn eval_f64(&self, state: &[i32]) -> Result<f64, ExprError> {
        self.eval(state)?.as_f64().ok_or_else(|| ExprError::TypeMismatch("expected number".into()))
    }

    pub fn is_const_true(&self) -> bool {
        matches!(self, Compiled::Const(Value::Bool(true)))
    }
}
