//! Parsed guarded-command models and their structural checks.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::expr::{eval, fold_constants, typecheck, Env, Expr, ExprError, Type, Value};
use crate::lexer::Pos;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub ty: Type,
    pub value: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Range(Expr, Expr),
    Bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub domain: Domain,
    pub init: Expr,
}

impl VarDecl {
    pub fn ty(&self) -> Type {
        match self.domain {
            Domain::Bool => Type::Bool,
            Domain::Range(..) => Type::Int,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub var: String,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub action: Option<String>,
    pub guard: Expr,
    pub rate: Expr,
    /// Empty means the source wrote `true` (no variable changes).
    pub updates: Vec<Update>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub commands: Vec<Command>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateReward {
    pub guard: Expr,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionReward {
    /// `None` is the unlabeled marker `[]`.
    pub action: Option<String>,
    pub guard: Expr,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardStructure {
    pub name: String,
    pub state_items: Vec<StateReward>,
    pub transition_items: Vec<TransitionReward>,
}

/// A `ctmc` model: constants, formulas, variables, modules and reward structures.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelIR {
    pub constants: Vec<ConstDecl>,
    pub formulas: Vec<(String, Expr)>,
    pub globals: Vec<VarDecl>,
    pub modules: Vec<Module>,
    pub rewards: Vec<RewardStructure>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("syntax error at {}:{}: {message}", .pos.line, .pos.col)]
    Syntax { pos: Pos, message: String },
    #[error("override of undeclared constant `{0}`")]
    UndeclaredOverride(String),
    #[error("override for `{name}` has the wrong type: {message}")]
    OverrideType { name: String, message: String },
    #[error("constant `{0}` has no value; supply it with an override")]
    MissingConstant(String),
    #[error("constant `{name}`: {source}")]
    Constant { name: String, source: ExprError },
    #[error("cyclic constant definitions involving `{0}`")]
    CyclicConstant(String),
    #[error("{0}")]
    Expr(#[from] ExprError),
    #[error("model has {} diagnostic(s):\n  {}", .0.len(), .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n  "))]
    Invalid(Vec<Diagnostic>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    Ownership,
    UpdateType,
    UnknownAction,
    RangeBounds,
    UnknownIdentifier,
    ExpressionType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

impl ModelIR {
    pub fn module(&self, name: &str) -> Option<&Module> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn reward(&self, name: &str) -> Option<&RewardStructure> {
        self.rewards.iter().find(|r| r.name == name)
    }

    pub fn constant(&self, name: &str) -> Option<&ConstDecl> {
        self.constants.iter().find(|c| c.name == name)
    }

    pub fn formula_map(&self) -> HashMap<String, Expr> {
        self.formulas.iter().cloned().collect()
    }

    /// All variables in layout order: globals first, then each module's locals.
    pub fn variables(&self) -> impl Iterator<Item = (Option<&Module>, &VarDecl)> {
        self.globals
            .iter()
            .map(|v| (None, v))
            .chain(self.modules.iter().flat_map(|m| m.vars.iter().map(move |v| (Some(m), v))))
    }

    /// Action labels in order of first declaration by a command.
    pub fn actions(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for m in &self.modules {
            for c in &m.commands {
                if let Some(a) = &c.action {
                    if seen.insert(a.as_str()) {
                        out.push(a.as_str());
                    }
                }
            }
        }
        out
    }

    /// Replaces constant values by overrides. Integral reals are accepted for `int` constants.
    pub fn apply_overrides(&mut self, overrides: &Env) -> Result<(), ModelError> {
        let mut names: Vec<(&str, Value)> = overrides.iter().collect();
        names.sort_by(|a, b| a.0.cmp(b.0));
        for (name, value) in names {
            let decl = self
                .constants
                .iter_mut()
                .find(|c| c.name == name)
                .ok_or_else(|| ModelError::UndeclaredOverride(name.to_string()))?;
            decl.value = Some(
                coerce(value, decl.ty)
                    .map_err(|message| ModelError::OverrideType { name: name.to_string(), message })?
                    .to_expr(),
            );
        }
        Ok(())
    }

    /// Evaluates every constant (in dependency order) to a value of its declared type.
    pub fn constant_env(&self) -> Result<Env, ModelError> {
        let decls: HashMap<&str, &ConstDecl> = self.constants.iter().map(|c| (c.name.as_str(), c)).collect();
        let formulas = self.formula_map();
        let mut env = Env::new();
        let mut visiting = HashSet::new();
        for c in &self.constants {
            resolve_constant(&c.name, &decls, &formulas, &mut env, &mut visiting)?;
        }
        Ok(env)
    }

    /// Type of every identifier visible in expressions: constants, formulas and variables.
    pub fn identifier_types(&self) -> Result<HashMap<String, Type>, ModelError> {
        let mut types: HashMap<String, Type> = self.constants.iter().map(|c| (c.name.clone(), c.ty)).collect();
        for (_, v) in self.variables() {
            types.insert(v.name.clone(), v.ty());
        }
        // Formulas may refer to each other; type them after inlining.
        let formulas = self.formula_map();
        for (name, body) in &self.formulas {
            let inlined = crate::expr::inline_formulas(body, &formulas)?;
            types.insert(name.clone(), typecheck(&inlined, &types)?);
        }
        Ok(types)
    }

    /// Structural checks; an empty result means the model can be built.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let mut push = |kind, message: String| diags.push(Diagnostic { kind, message });

        let types = match self.identifier_types() {
            Ok(t) => t,
            Err(e) => {
                push(DiagnosticKind::ExpressionType, e.to_string());
                return diags;
            }
        };
        let consts = self.constant_env();
        let formulas = self.formula_map();

        let check = |e: &Expr, want: Type, what: &str, push: &mut dyn FnMut(DiagnosticKind, String)| {
            for id in e.identifiers() {
                if !types.contains_key(id) {
                    push(DiagnosticKind::UnknownIdentifier, format!("{what}: unknown identifier `{id}`"));
                    return;
                }
            }
            match typecheck(e, &types) {
                Ok(t) if t == want || (want == Type::Real && t == Type::Int) => {}
                Ok(t) => push(DiagnosticKind::ExpressionType, format!("{what}: expected {want}, found {t} in `{e}`")),
                Err(err) => push(DiagnosticKind::ExpressionType, format!("{what}: {err}")),
            }
        };

        let globals: HashSet<&str> = self.globals.iter().map(|v| v.name.as_str()).collect();
        let owner: HashMap<&str, &str> =
            self.modules.iter().flat_map(|m| m.vars.iter().map(move |v| (v.name.as_str(), m.name.as_str()))).collect();
        let var_types: HashMap<&str, Type> = self.variables().map(|(_, v)| (v.name.as_str(), v.ty())).collect();

        for (_, var) in self.variables() {
            let what = format!("variable `{}`", var.name);
            if let Domain::Range(lo, hi) = &var.domain {
                for b in [lo, hi] {
                    check(b, Type::Int, &what, &mut push);
                    if let Ok(env) = &consts {
                        match fold_constants(b, env, &formulas) {
                            Ok(Expr::Int(_)) => {}
                            Ok(other) => push(
                                DiagnosticKind::RangeBounds,
                                format!("{what}: bound `{b}` does not fold to an integer constant (got `{other}`)"),
                            ),
                            Err(e) => push(DiagnosticKind::RangeBounds, format!("{what}: bound `{b}`: {e}")),
                        }
                    }
                }
            }
            check(&var.init, var.ty(), &format!("{what} init"), &mut push);
        }

        for m in &self.modules {
            for (ci, c) in m.commands.iter().enumerate() {
                let what = format!("module `{}` command {}", m.name, ci + 1);
                check(&c.guard, Type::Bool, &format!("{what} guard"), &mut push);
                check(&c.rate, Type::Real, &format!("{what} rate"), &mut push);
                let mut written = HashSet::new();
                for u in &c.updates {
                    if !written.insert(u.var.as_str()) {
                        push(DiagnosticKind::Ownership, format!("{what}: `{}` updated twice", u.var));
                    }
                    let Some(&vt) = var_types.get(u.var.as_str()) else {
                        push(
                            DiagnosticKind::UnknownIdentifier,
                            format!("{what}: update of unknown variable `{}`", u.var),
                        );
                        continue;
                    };
                    if globals.contains(u.var.as_str()) {
                        if let Some(a) = &c.action {
                            push(
                                DiagnosticKind::Ownership,
                                format!("{what}: global `{}` written by labeled command [{a}]", u.var),
                            );
                        }
                    } else if owner.get(u.var.as_str()) != Some(&m.name.as_str()) {
                        push(
                            DiagnosticKind::Ownership,
                            format!(
                                "{what}: writes `{}` owned by module `{}`",
                                u.var,
                                owner.get(u.var.as_str()).copied().unwrap_or("?")
                            ),
                        );
                    }
                    let what_u = format!("{what} update of `{}`", u.var);
                    match typecheck(&u.value, &types) {
                        Ok(t) if t == vt => {}
                        Ok(t) => push(
                            DiagnosticKind::UpdateType,
                            format!("{what_u}: {t} value `{}` for {vt} variable", u.value),
                        ),
                        Err(e) => push(DiagnosticKind::UpdateType, format!("{what_u}: {e}")),
                    }
                }
            }
        }

        let actions: HashSet<&str> = self.actions().into_iter().collect();
        for r in &self.rewards {
            let what = format!("reward \"{}\"", r.name);
            for s in &r.state_items {
                check(&s.guard, Type::Bool, &what, &mut push);
                check(&s.value, Type::Real, &what, &mut push);
            }
            for t in &r.transition_items {
                if let Some(a) = &t.action {
                    if !actions.contains(a.as_str()) {
                        push(
                            DiagnosticKind::UnknownAction,
                            format!("{what}: action [{a}] is not declared by any command"),
                        );
                    }
                }
                check(&t.guard, Type::Bool, &what, &mut push);
                check(&t.value, Type::Real, &what, &mut push);
            }
        }
        diags
    }
}

fn coerce(value: Value, ty: Type) -> Result<Value, String> {
    match (value, ty) {
        (Value::Int(_), Type::Int) | (Value::Bool(_), Type::Bool) | (Value::Real(_), Type::Real) => Ok(value),
        (Value::Int(i), Type::Real) => Ok(Value::Real(i as f64)),
        (Value::Real(r), Type::Int) if r.fract() == 0.0 && r.abs() < 9.0e15 => Ok(Value::Int(r as i64)),
        (v, t) => Err(format!("{} value {v} for {t} constant", v.ty())),
    }
}

fn resolve_constant(
    name: &str,
    decls: &HashMap<&str, &ConstDecl>,
    formulas: &HashMap<String, Expr>,
    env: &mut Env,
    visiting: &mut HashSet<String>,
) -> Result<Value, ModelError> {
    if let Some(v) = env.get(name) {
        return Ok(v);
    }
    let decl = decls[name];
    let body = decl.value.as_ref().ok_or_else(|| ModelError::MissingConstant(name.to_string()))?;
    if !visiting.insert(name.to_string()) {
        return Err(ModelError::CyclicConstant(name.to_string()));
    }
    let inlined = crate::expr::inline_formulas(body, formulas)?;
    let deps: BTreeSet<&str> = inlined.identifiers().into_iter().collect();
    for dep in deps {
        if decls.contains_key(dep) {
            resolve_constant(dep, decls, formulas, env, visiting)?;
        }
    }
    let value = eval(&inlined, env).map_err(|source| ModelError::Constant { name: name.to_string(), source })?;
    let value = coerce(value, decl.ty)
        .map_err(|m| ModelError::Constant { name: name.to_string(), source: ExprError::TypeMismatch(m) })?;
    env.bind(name, value);
    visiting.remove(name);
    Ok(value)
}

fn write_var(f: &mut fmt::Formatter<'_>, v: &VarDecl, indent: &str) -> fmt::Result {
    match &v.domain {
        Domain::Range(lo, hi) => writeln!(f, "{indent}{} : [{lo}..{hi}] init {};", v.name, v.init),
        Domain::Bool => writeln!(f, "{indent}{} : bool init {};", v.name, v.init),
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {} -> {} : ", self.action.as_deref().unwrap_or(""), self.guard, self.rate)?;
        if self.updates.is_empty() {
            f.write_str("true;")
        } else {
            let parts: Vec<String> = self.updates.iter().map(|u| format!("({}'={})", u.var, u.value)).collect();
            write!(f, "{};", parts.join(" & "))
        }
    }
}

/// Prints the model in the same language the parser accepts.
impl fmt::Display for ModelIR {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ctmc\n")?;
        for c in &self.constants {
            match &c.value {
                Some(v) => writeln!(f, "const {} {} = {};", c.ty, c.name, v)?,
                None => writeln!(f, "const {} {};", c.ty, c.name)?,
            }
        }
        if !self.constants.is_empty() {
            writeln!(f)?;
        }
        for (name, body) in &self.formulas {
            writeln!(f, "formula {name} = {body};")?;
        }
        for g in &self.globals {
            f.write_str("global ")?;
            write_var(f, g, "")?;
        }
        for m in &self.modules {
            writeln!(f, "\nmodule {}", m.name)?;
            for v in &m.vars {
                write_var(f, v, "    ")?;
            }
            for c in &m.commands {
                writeln!(f, "    {c}")?;
            }
            writeln!(f, "endmodule")?;
        }
        for r in &self.rewards {
            writeln!(f, "\nrewards \"{}\"", r.name)?;
            for s in &r.state_items {
                writeln!(f, "    {} : {};", s.guard, s.value)?;
            }
            for t in &r.transition_items {
                writeln!(f, "    [{}] {} : {};", t.action.as_deref().unwrap_or(""), t.guard, t.value)?;
            }
            writeln!(f, "endrewards")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_model;

    const SMALL: &str = "ctmc
        const int N = 3;
        const double r;
        global g : [0..N] init 0;
        module a
            x : [0..N] init 0;
            [go] x<N -> r : (x'=x+1);
            [] x>0 -> 1 : (x'=x-1) & (g'=g+1);
        endmodule
        module b
            y : bool init false;
            [go] true -> (y'=!y);
        endmodule
        rewards \"steps\"
            [go] true : 1;
            x>0 : 0.5;
        endrewards";

    #[test]
    fn constants_follow_overrides() {
        let m = parse_model(SMALL, &Env::new().with("r", Value::Int(2))).unwrap();
        let env = m.constant_env().unwrap();
        assert_eq!(env.get("r"), Some(Value::Real(2.0)));
        assert_eq!(env.get("N"), Some(Value::Int(3)));
        assert!(m.validate().is_empty(), "{:?}", m.validate());
    }

    #[test]
    fn missing_and_undeclared_overrides() {
        assert_eq!(parse_model(SMALL, &Env::new()).unwrap_err(), ModelError::MissingConstant("r".into()));
        let bad = Env::new().with("r", Value::Real(1.0)).with("nosuch", Value::Int(1));
        assert_eq!(parse_model(SMALL, &bad).unwrap_err(), ModelError::UndeclaredOverride("nosuch".into()));
    }

    #[test]
    fn foreign_write_is_an_ownership_diagnostic() {
        let text = SMALL.replace("[go] true -> (y'=!y);", "[go] true -> (y'=!y) & (x'=0);");
        let m = parse_model(&text, &Env::new().with("r", Value::Real(1.0))).unwrap();
        let d = m.validate();
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].kind, DiagnosticKind::Ownership);
    }

    #[test]
    fn unknown_reward_action() {
        let text = SMALL.replace("[go] true : 1;", "[go] true : 1;\n[nosuch] true : 1;");
        let m = parse_model(&text, &Env::new().with("r", Value::Real(1.0))).unwrap();
        let d = m.validate();
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].kind, DiagnosticKind::UnknownAction);
    }

    #[test]
    fn global_written_by_labeled_command() {
        let text = SMALL.replace("[go] x<N -> r : (x'=x+1);", "[go] x<N -> r : (x'=x+1) & (g'=0);");
        let m = parse_model(&text, &Env::new().with("r", Value::Real(1.0))).unwrap();
        assert_eq!(m.validate()[0].kind, DiagnosticKind::Ownership);
    }

    #[test]
    fn update_type_mismatch() {
        let text = SMALL.replace("(y'=!y)", "(y'=1)");
        let m = parse_model(&text, &Env::new().with("r", Value::Real(1.0))).unwrap();
        assert_eq!(m.validate()[0].kind, DiagnosticKind::UpdateType);
    }

    #[test]
    fn range_bounds_must_fold() {
        let text = SMALL.replace("x : [0..N]", "x : [0..g]");
        let m = parse_model(&text, &Env::new().with("r", Value::Real(1.0))).unwrap();
        assert!(m.validate().iter().any(|d| d.kind == DiagnosticKind::RangeBounds));
    }

    #[test]
    fn pretty_print_round_trips() {
        let m = parse_model(SMALL, &Env::new().with("r", Value::Real(0.25))).unwrap();
        let again = parse_model(&m.to_string(), &Env::new()).unwrap();
        assert_eq!(m, again);
    }
}
