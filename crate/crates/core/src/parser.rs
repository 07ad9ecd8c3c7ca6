//! Recursive-descent parser for the guarded-command model language.

use std::collections::HashSet;

use crate::expr::{BinaryOp, Env, Expr, Type, UnaryOp};
use crate::lexer::{tokenize, Pos, Tok, Token};
use crate::model::{
    Command, ConstDecl, Domain, ModelError, ModelIR, Module, RewardStructure, StateReward, TransitionReward, Update,
    VarDecl,
};

pub(crate) struct Parser {
    toks: Vec<Token>,
    at: usize,
}

pub(crate) type PResult<T> = Result<T, ModelError>;

const KEYWORDS: &[&str] = &[
    "ctmc",
    "dtmc",
    "mdp",
    "const",
    "int",
    "double",
    "bool",
    "formula",
    "global",
    "module",
    "endmodule",
    "init",
    "rewards",
    "endrewards",
    "true",
    "false",
];

impl Parser {
    pub(crate) fn new(src: &str) -> PResult<Self> {
        let toks = tokenize(src).map_err(|e| ModelError::Syntax { pos: e.pos, message: e.message })?;
        Ok(Parser { toks, at: 0 })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    pub(crate) fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.at + k).min(self.toks.len() - 1)].tok
    }

    pub(crate) fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    pub(crate) fn advance(&mut self) -> Tok {
        let t = self.toks[self.at].tok.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub(crate) fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ModelError::Syntax { pos: self.pos(), message: message.into() })
    }

    pub(crate) fn expect(&mut self, tok: Tok) -> PResult<()> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            self.error(format!("expected {tok}, found {}", self.peek()))
        }
    }

    pub(crate) fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    pub(crate) fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub(crate) fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.advance();
                Ok(s)
            }
            other => self.error(format!("expected an identifier, found {other}")),
        }
    }

    pub(crate) fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.binary_level(1)
    }

    /// Parses `+`/`-` level expressions, stopping before relational operators.
    pub(crate) fn additive(&mut self) -> PResult<Expr> {
        self.binary_level(6)
    }

    /// Precedence climbing; level numbers match `BinaryOp::precedence`, with `!` at level 3.
    fn binary_level(&mut self, level: u8) -> PResult<Expr> {
        match level {
            3 => {
                if self.eat(&Tok::Not) {
                    return Ok(Expr::unary(UnaryOp::Not, self.binary_level(3)?));
                }
                self.binary_level(4)
            }
            8 => self.unary(),
            _ => {
                let mut lhs = self.binary_level(level + 1)?;
                loop {
                    let op = match (level, self.peek()) {
                        (1, Tok::Or) => BinaryOp::Or,
                        (2, Tok::And) => BinaryOp::And,
                        (4, Tok::Eq) => BinaryOp::Eq,
                        (4, Tok::Ne) => BinaryOp::Ne,
                        (5, Tok::Lt) => BinaryOp::Lt,
                        (5, Tok::Le) => BinaryOp::Le,
                        (5, Tok::Gt) => BinaryOp::Gt,
                        (5, Tok::Ge) => BinaryOp::Ge,
                        (6, Tok::Plus) => BinaryOp::Add,
                        (6, Tok::Minus) => BinaryOp::Sub,
                        (7, Tok::Star) => BinaryOp::Mul,
                        (7, Tok::Slash) => BinaryOp::Div,
                        _ => break,
                    };
                    self.advance();
                    let rhs = self.binary_level(level + 1)?;
                    lhs = Expr::binary(op, lhs, rhs);
                    // Comparisons do not chain.
                    if level == 4 || level == 5 {
                        break;
                    }
                }
                Ok(lhs)
            }
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Minus) {
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Int(i) if i >= 0 => Expr::Int(-i),
                Expr::Real(r) if r.is_sign_positive() => Expr::Real(-r),
                other => Expr::unary(UnaryOp::Neg, other),
            });
        }
        if self.eat(&Tok::Not) {
            return Ok(Expr::unary(UnaryOp::Not, self.unary()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                Ok(Expr::Int(i))
            }
            Tok::Real(r) => {
                self.advance();
                Ok(Expr::Real(r))
            }
            Tok::Ident(s) if s == "true" => {
                self.advance();
                Ok(Expr::Bool(true))
            }
            Tok::Ident(s) if s == "false" => {
                self.advance();
                Ok(Expr::Bool(false))
            }
            Tok::Ident(_) => Ok(Expr::Ident(self.ident()?)),
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            other => self.error(format!("expected an expression, found {other}")),
        }
    }

    fn model(&mut self) -> PResult<ModelIR> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "ctmc" => {
                self.advance();
            }
            Tok::Ident(s) if s == "dtmc" || s == "mdp" => {
                return self.error(format!("unsupported model class `{s}`; only `ctmc` is accepted"))
            }
            other => return self.error(format!("expected model class `ctmc`, found {other}")),
        }
        let mut m = ModelIR::default();
        let mut names = HashSet::new();
        let declare = |p: &Parser, name: &str, names: &mut HashSet<String>| -> PResult<()> {
            if names.insert(name.to_string()) {
                Ok(())
            } else {
                p.error(format!("`{name}` is declared more than once"))
            }
        };
        let mut reward_names = HashSet::new();
        while !self.at_eof() {
            let kw = match self.peek() {
                Tok::Ident(s) => s.clone(),
                other => return self.error(format!("expected a declaration, found {other}")),
            };
            match kw.as_str() {
                "ctmc" | "dtmc" | "mdp" => return self.error("model class declared more than once"),
                "const" => {
                    self.advance();
                    let ty = if self.is_keyword("int") {
                        self.advance();
                        Type::Int
                    } else if self.is_keyword("double") {
                        self.advance();
                        Type::Real
                    } else if self.is_keyword("bool") {
                        self.advance();
                        Type::Bool
                    } else {
                        Type::Int
                    };
                    let pos = self.pos();
                    let name = self.ident()?;
                    declare(self, &name, &mut names).map_err(|e| relocate(e, pos))?;
                    let value = if self.eat(&Tok::Eq) { Some(self.expr()?) } else { None };
                    self.expect(Tok::Semi)?;
                    m.constants.push(ConstDecl { name, ty, value });
                }
                "formula" => {
                    self.advance();
                    let pos = self.pos();
                    let name = self.ident()?;
                    declare(self, &name, &mut names).map_err(|e| relocate(e, pos))?;
                    self.expect(Tok::Eq)?;
                    let body = self.expr()?;
                    self.expect(Tok::Semi)?;
                    m.formulas.push((name, body));
                }
                "global" => {
                    self.advance();
                    let pos = self.pos();
                    let v = self.var_decl()?;
                    declare(self, &v.name, &mut names).map_err(|e| relocate(e, pos))?;
                    m.globals.push(v);
                }
                "module" => {
                    self.advance();
                    let pos = self.pos();
                    let name = self.ident()?;
                    declare(self, &name, &mut names).map_err(|e| relocate(e, pos))?;
                    let mut module = Module { name, vars: Vec::new(), commands: Vec::new() };
                    loop {
                        if self.is_keyword("endmodule") {
                            self.advance();
                            break;
                        }
                        match self.peek() {
                            Tok::LBracket => module.commands.push(self.command()?),
                            Tok::Ident(_) if *self.peek_at(1) == Tok::Colon => {
                                let pos = self.pos();
                                let v = self.var_decl()?;
                                declare(self, &v.name, &mut names).map_err(|e| relocate(e, pos))?;
                                module.vars.push(v);
                            }
                            Tok::Eof => return self.error("missing `endmodule`"),
                            other => {
                                return self
                                    .error(format!("expected a variable, command or `endmodule`, found {other}"))
                            }
                        }
                    }
                    m.modules.push(module);
                }
                "rewards" => {
                    self.advance();
                    let pos = self.pos();
                    let name = match self.advance() {
                        Tok::Str(s) => s,
                        other => {
                            return Err(ModelError::Syntax {
                                pos,
                                message: format!("expected a quoted reward name, found {other}"),
                            })
                        }
                    };
                    if !reward_names.insert(name.clone()) {
                        return Err(ModelError::Syntax {
                            pos,
                            message: format!("reward \"{name}\" declared more than once"),
                        });
                    }
                    let mut r = RewardStructure { name, state_items: Vec::new(), transition_items: Vec::new() };
                    loop {
                        if self.is_keyword("endrewards") {
                            self.advance();
                            break;
                        }
                        if self.at_eof() {
                            return self.error("missing `endrewards`");
                        }
                        if self.eat(&Tok::LBracket) {
                            let action = if self.eat(&Tok::RBracket) {
                                None
                            } else {
                                let a = self.ident()?;
                                self.expect(Tok::RBracket)?;
                                Some(a)
                            };
                            let guard = self.expr()?;
                            self.expect(Tok::Colon)?;
                            let value = self.expr()?;
                            self.expect(Tok::Semi)?;
                            r.transition_items.push(TransitionReward { action, guard, value });
                        } else {
                            let guard = self.expr()?;
                            self.expect(Tok::Colon)?;
                            let value = self.expr()?;
                            self.expect(Tok::Semi)?;
                            r.state_items.push(StateReward { guard, value });
                        }
                    }
                    m.rewards.push(r);
                }
                other => return self.error(format!("unexpected `{other}` at top level")),
            }
        }
        Ok(m)
    }

    fn var_decl(&mut self) -> PResult<VarDecl> {
        let name = self.ident()?;
        self.expect(Tok::Colon)?;
        let domain = if self.is_keyword("bool") {
            self.advance();
            Domain::Bool
        } else {
            self.expect(Tok::LBracket)?;
            let lo = self.expr()?;
            self.expect(Tok::DotDot)?;
            let hi = self.expr()?;
            self.expect(Tok::RBracket)?;
            Domain::Range(lo, hi)
        };
        let init = if self.is_keyword("init") {
            self.advance();
            self.expr()?
        } else {
            match &domain {
                Domain::Bool => Expr::Bool(false),
                Domain::Range(lo, _) => lo.clone(),
            }
        };
        self.expect(Tok::Semi)?;
        Ok(VarDecl { name, domain, init })
    }

    fn command(&mut self) -> PResult<Command> {
        self.expect(Tok::LBracket)?;
        let action = if self.eat(&Tok::RBracket) {
            None
        } else {
            let a = self.ident()?;
            self.expect(Tok::RBracket)?;
            Some(a)
        };
        let guard = self.expr()?;
        self.expect(Tok::Arrow)?;
        let starts_updates =
            matches!((self.peek(), self.peek_at(1), self.peek_at(2)), (Tok::LParen, Tok::Ident(_), Tok::Prime))
                || (self.is_keyword("true") && *self.peek_at(1) == Tok::Semi);
        let rate = if starts_updates {
            Expr::Int(1)
        } else {
            let r = self.expr()?;
            self.expect(Tok::Colon)?;
            r
        };
        let mut updates = Vec::new();
        if self.is_keyword("true") {
            self.advance();
        } else {
            loop {
                self.expect(Tok::LParen)?;
                let var = self.ident()?;
                self.expect(Tok::Prime)?;
                self.expect(Tok::Eq)?;
                let value = self.expr()?;
                self.expect(Tok::RParen)?;
                updates.push(Update { var, value });
                if !self.eat(&Tok::And) {
                    break;
                }
            }
        }
        self.expect(Tok::Semi)?;
        Ok(Command { action, guard, rate, updates })
    }
}

fn relocate(e: ModelError, pos: Pos) -> ModelError {
    match e {
        ModelError::Syntax { message, .. } => ModelError::Syntax { pos, message },
        other => other,
    }
}

/// Parses a standalone expression.
pub fn parse_expr(text: &str) -> Result<Expr, ModelError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    if !p.at_eof() {
        return p.error(format!("unexpected {} after expression", p.peek()));
    }
    Ok(e)
}

/// Parses model text, applies constant overrides, and checks that every constant has a value.
pub fn parse_model(text: &str, overrides: &Env) -> Result<ModelIR, ModelError> {
    let mut p = Parser::new(text)?;
    let mut model = p.model()?;
    model.apply_overrides(overrides)?;
    if let Some(c) = model.constants.iter().find(|c| c.value.is_none()) {
        return Err(ModelError::MissingConstant(c.name.clone()));
    }
    Ok(model)
}

/// Parses, then fails with the full diagnostic list if validation finds problems.
pub fn parse_and_validate(text: &str, overrides: &Env) -> Result<ModelIR, ModelError> {
    let model = parse_model(text, overrides)?;
    let diags = model.validate();
    if diags.is_empty() {
        Ok(model)
    } else {
        Err(ModelError::Invalid(diags))
    }
}
