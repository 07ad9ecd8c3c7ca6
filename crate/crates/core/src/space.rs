//! Explicit state-space construction with multi-module synchronization.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::io;

use thiserror::Error;

use crate::expr::{fold_constants, Compiled, Env, Expr, ExprError, Type, Value};
use crate::model::{Domain, ModelError, ModelIR};

/// Label id used for unlabeled transitions.
pub const UNLABELED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub state_cap: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { state_cap: 10_000_000 }
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("variable `{var}`: {message}")]
    Domain { var: String, message: String },
    #[error("update out of range in state {state}: {command} sets {var}={value} outside [{lo}..{hi}]")]
    OutOfRange { state: String, command: String, var: String, value: i64, lo: i32, hi: i32 },
    #[error("conflicting synchronized writes to `{var}` on [{action}] in state {state}")]
    Conflict { state: String, action: String, var: String },
    #[error("invalid rate {rate} in state {state}: {command}")]
    BadRate { state: String, command: String, rate: f64 },
    #[error("state space exceeds the cap of {0} states")]
    StateCap(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarInfo {
    pub name: String,
    pub ty: Type,
    pub lo: i32,
    pub hi: i32,
    pub init: i32,
    pub module: Option<String>,
}

#[derive(Debug, Clone)]
struct CompiledReward {
    name: String,
    state_items: Vec<(Compiled, Compiled)>,
    /// `Some(None)` matches unlabeled transitions; `None` matches nothing (unknown label).
    transition_items: Vec<(Option<u32>, Compiled, Compiled)>,
}

/// Explicit CTMC: BFS-ordered state table and a CSR rate matrix with self-loops retained.
#[derive(Debug, Clone)]
pub struct StateSpace {
    vars: Vec<VarInfo>,
    states: Vec<i32>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    rates: Vec<f64>,
    labels: Vec<u32>,
    label_names: Vec<String>,
    exit: Vec<f64>,
    rewards: Vec<CompiledReward>,
    consts: Env,
    formulas: HashMap<String, Expr>,
    slots: HashMap<String, (usize, Type)>,
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Key {
    Packed(u128),
    Wide(Box<[i32]>),
}

struct Packer {
    shifts: Vec<(u32, i32)>,
    fits: bool,
}

impl Packer {
    fn new(vars: &[VarInfo]) -> Self {
        let mut shift = 0u32;
        let mut shifts = Vec::with_capacity(vars.len());
        for v in vars {
            let span = (v.hi as i64 - v.lo as i64) as u64;
            let bits = 64 - span.leading_zeros();
            shifts.push((shift, v.lo));
            shift += bits;
        }
        Packer { shifts, fits: shift <= 128 }
    }

    fn key(&self, s: &[i32]) -> Key {
        if self.fits {
            let mut k = 0u128;
            for (&(shift, lo), &v) in self.shifts.iter().zip(s) {
                k |= ((v - lo) as u128) << shift;
            }
            Key::Packed(k)
        } else {
            Key::Wide(s.into())
        }
    }
}

struct CCommand {
    desc: String,
    guard: Compiled,
    rate: Compiled,
    updates: Vec<(usize, Compiled)>,
}

struct Action {
    id: u32,
    name: String,
    /// One entry per participating module.
    participants: Vec<Vec<CCommand>>,
}

struct Builder<'a> {
    vars: &'a [VarInfo],
    packer: Packer,
    states: Vec<i32>,
    index: HashMap<Key, u32>,
    queue: VecDeque<u32>,
    cap: usize,
}

impl Builder<'_> {
    fn n(&self) -> usize {
        self.vars.len()
    }

    fn describe(&self, s: &[i32]) -> String {
        describe_state(self.vars, s)
    }

    fn intern(&mut self, s: &[i32]) -> Result<u32, BuildError> {
        let key = self.packer.key(s);
        if let Some(&i) = self.index.get(&key) {
            return Ok(i);
        }
        let i = self.index.len();
        if i >= self.cap {
            return Err(BuildError::StateCap(self.cap));
        }
        self.index.insert(key, i as u32);
        self.states.extend_from_slice(s);
        self.queue.push_back(i as u32);
        Ok(i as u32)
    }

    fn rate(&self, c: &CCommand, s: &[i32]) -> Result<f64, BuildError> {
        let r = c.rate.eval_f64(s)?;
        if !(r >= 0.0) || !r.is_finite() {
            return Err(BuildError::BadRate { state: self.describe(s), command: c.desc.clone(), rate: r });
        }
        Ok(r)
    }

    fn apply(&self, c: &CCommand, src: &[i32], dst: &mut [i32]) -> Result<(), BuildError> {
        for (slot, e) in &c.updates {
            let v = match e.eval(src)? {
                Value::Int(i) => i,
                Value::Bool(b) => b as i64,
                Value::Real(_) => unreachable!("validated models assign ints to ranged variables"),
            };
            let info = &self.vars[*slot];
            if v < info.lo as i64 || v > info.hi as i64 {
                return Err(BuildError::OutOfRange {
                    state: self.describe(src),
                    command: c.desc.clone(),
                    var: info.name.clone(),
                    value: v,
                    lo: info.lo,
                    hi: info.hi,
                });
            }
            dst[*slot] = v as i32;
        }
        Ok(())
    }
}

fn describe_state(vars: &[VarInfo], s: &[i32]) -> String {
    let mut out = String::from("(");
    for (i, (v, x)) in vars.iter().zip(s).enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        if v.ty == Type::Bool {
            let _ = write!(out, "{}={}", v.name, *x != 0);
        } else {
            let _ = write!(out, "{}={}", v.name, x);
        }
    }
    out.push(')');
    out
}

fn fold_int(e: &Expr, consts: &Env, formulas: &HashMap<String, Expr>, var: &str) -> Result<i32, BuildError> {
    match fold_constants(e, consts, formulas)? {
        Expr::Int(i) if i32::try_from(i).is_ok() => Ok(i as i32),
        other => Err(BuildError::Domain {
            var: var.to_string(),
            message: format!("`{e}` is not an integer constant (got `{other}`)"),
        }),
    }
}

/// Builds the reachable CTMC of a validated model.
pub fn build(model: &ModelIR, opts: &BuildOptions) -> Result<StateSpace, BuildError> {
    let consts = model.constant_env()?;
    let formulas = model.formula_map();

    let mut vars = Vec::new();
    for (module, v) in model.variables() {
        let (lo, hi, init) = match &v.domain {
            Domain::Bool => {
                let init = match fold_constants(&v.init, &consts, &formulas)? {
                    Expr::Bool(b) => b as i32,
                    other => {
                        return Err(BuildError::Domain {
                            var: v.name.clone(),
                            message: format!("bad initial value `{other}`"),
                        })
                    }
                };
                (0, 1, init)
            }
            Domain::Range(lo, hi) => {
                let lo = fold_int(lo, &consts, &formulas, &v.name)?;
                let hi = fold_int(hi, &consts, &formulas, &v.name)?;
                let init = fold_int(&v.init, &consts, &formulas, &v.name)?;
                if lo > hi || init < lo || init > hi {
                    return Err(BuildError::Domain {
                        var: v.name.clone(),
                        message: format!("initial value {init} or range [{lo}..{hi}] is invalid"),
                    });
                }
                (lo, hi, init)
            }
        };
        vars.push(VarInfo { name: v.name.clone(), ty: v.ty(), lo, hi, init, module: module.map(|m| m.name.clone()) });
    }
    let slots: HashMap<String, (usize, Type)> =
        vars.iter().enumerate().map(|(i, v)| (v.name.clone(), (i, v.ty))).collect();
    let compile = |e: &Expr| -> Result<Compiled, BuildError> {
        Ok(Compiled::new(&fold_constants(e, &consts, &formulas)?, &slots)?)
    };

    let label_names: Vec<String> = model.actions().into_iter().map(String::from).collect();
    let label_ids: HashMap<&str, u32> = label_names.iter().enumerate().map(|(i, n)| (n.as_str(), i as u32)).collect();

    let mut unlabeled = Vec::new();
    let mut actions: Vec<Action> = label_names
        .iter()
        .enumerate()
        .map(|(i, n)| Action { id: i as u32, name: n.clone(), participants: Vec::new() })
        .collect();
    for m in &model.modules {
        let mut per_action: Vec<Vec<CCommand>> = (0..actions.len()).map(|_| Vec::new()).collect();
        let mut declares = vec![false; actions.len()];
        for (ci, c) in m.commands.iter().enumerate() {
            let cc = CCommand {
                desc: format!("module `{}` command {} `{c}`", m.name, ci + 1),
                guard: compile(&c.guard)?,
                rate: compile(&c.rate)?,
                updates: c
                    .updates
                    .iter()
                    .map(|u| {
                        let (slot, _) = *slots.get(&u.var).ok_or_else(|| ExprError::Unbound(u.var.clone()))?;
                        Ok((slot, compile(&u.value)?))
                    })
                    .collect::<Result<_, BuildError>>()?,
            };
            match &c.action {
                None => unlabeled.push(cc),
                Some(a) => {
                    let id = label_ids[a.as_str()] as usize;
                    declares[id] = true;
                    per_action[id].push(cc);
                }
            }
        }
        for (id, cmds) in per_action.into_iter().enumerate() {
            if declares[id] {
                actions[id].participants.push(cmds);
            }
        }
    }

    let rewards = model
        .rewards
        .iter()
        .map(|r| {
            Ok(CompiledReward {
                name: r.name.clone(),
                state_items: r
                    .state_items
                    .iter()
                    .map(|i| Ok((compile(&i.guard)?, compile(&i.value)?)))
                    .collect::<Result<_, BuildError>>()?,
                transition_items: r
                    .transition_items
                    .iter()
                    .map(|i| {
                        let label = match &i.action {
                            None => Some(UNLABELED),
                            Some(a) => label_ids.get(a.as_str()).copied(),
                        };
                        Ok((label, compile(&i.guard)?, compile(&i.value)?))
                    })
                    .collect::<Result<_, BuildError>>()?,
            })
        })
        .collect::<Result<Vec<_>, BuildError>>()?;

    let mut b = Builder {
        vars: &vars,
        packer: Packer::new(&vars),
        states: Vec::new(),
        index: HashMap::new(),
        queue: VecDeque::new(),
        cap: opts.state_cap,
    };
    let init: Vec<i32> = vars.iter().map(|v| v.init).collect();
    b.intern(&init)?;

    let n = b.n();
    let mut row_ptr = vec![0usize];
    let mut cols = Vec::new();
    let mut rates = Vec::new();
    let mut labels = Vec::new();
    let mut src = vec![0i32; n];
    let mut dst = vec![0i32; n];
    let mut row: Vec<(u32, u32, f64)> = Vec::new();
    let mut enabled: Vec<Vec<(usize, f64)>> = Vec::new();

    while let Some(si) = b.queue.pop_front() {
        let si = si as usize;
        src.copy_from_slice(&b.states[si * n..(si + 1) * n]);
        row.clear();

        for c in &unlabeled {
            if !c.guard.eval_bool(&src)? {
                continue;
            }
            let r = b.rate(c, &src)?;
            if r == 0.0 {
                continue;
            }
            dst.copy_from_slice(&src);
            b.apply(c, &src, &mut dst)?;
            let j = b.intern(&dst)?;
            row.push((j, UNLABELED, r));
        }

        for a in &actions {
            enabled.clear();
            let mut blocked = false;
            for cmds in &a.participants {
                let mut e = Vec::new();
                for (k, c) in cmds.iter().enumerate() {
                    if c.guard.eval_bool(&src)? {
                        e.push((k, b.rate(c, &src)?));
                    }
                }
                if e.is_empty() {
                    blocked = true;
                    break;
                }
                enabled.push(e);
            }
            if blocked || a.participants.is_empty() {
                continue;
            }
            // Odometer over one enabled command per participating module.
            let mut pick = vec![0usize; enabled.len()];
            loop {
                let mut rate = 1.0;
                dst.copy_from_slice(&src);
                let mut written: Vec<usize> = Vec::new();
                for (m, &p) in pick.iter().enumerate() {
                    let (k, r) = enabled[m][p];
                    rate *= r;
                    let c = &a.participants[m][k];
                    for (slot, _) in &c.updates {
                        if written.contains(slot) {
                            return Err(BuildError::Conflict {
                                state: b.describe(&src),
                                action: a.name.clone(),
                                var: vars[*slot].name.clone(),
                            });
                        }
                        written.push(*slot);
                    }
                    b.apply(c, &src, &mut dst)?;
                }
                if rate > 0.0 {
                    let j = b.intern(&dst)?;
                    row.push((j, a.id, rate));
                }
                let mut m = 0;
                loop {
                    if m == pick.len() {
                        break;
                    }
                    pick[m] += 1;
                    if pick[m] < enabled[m].len() {
                        break;
                    }
                    pick[m] = 0;
                    m += 1;
                }
                if m == pick.len() {
                    break;
                }
            }
        }

        row.sort_by_key(|x| (x.0, x.1));
        let mut last: Option<(u32, u32)> = None;
        for &(j, l, r) in row.iter() {
            if last == Some((j, l)) {
                *rates.last_mut().unwrap() += r;
            } else {
                cols.push(j);
                labels.push(l);
                rates.push(r);
                last = Some((j, l));
            }
        }
        row_ptr.push(cols.len());
    }

    let states = b.states;
    let exit = (0..row_ptr.len() - 1).map(|i| rates[row_ptr[i]..row_ptr[i + 1]].iter().sum()).collect();
    Ok(StateSpace { vars, states, row_ptr, cols, rates, labels, label_names, exit, rewards, consts, formulas, slots })
}

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("unknown reward structure \"{0}\"")]
    UnknownReward(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl StateSpace {
    pub fn num_states(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Number of stored (merged) transitions, self-loops included.
    pub fn num_transitions(&self) -> usize {
        self.cols.len()
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn vars(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn state(&self, i: usize) -> &[i32] {
        let n = self.vars.len();
        &self.states[i * n..(i + 1) * n]
    }

    pub fn describe(&self, i: usize) -> String {
        describe_state(&self.vars, self.state(i))
    }

    pub fn value_of(&self, i: usize, var: &str) -> Option<i32> {
        self.slots.get(var).map(|&(k, _)| self.state(i)[k])
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn cols(&self) -> &[u32] {
        &self.cols
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn label_name(&self, id: u32) -> Option<&str> {
        self.label_names.get(id as usize).map(String::as_str)
    }

    /// Outgoing transitions of `s` as (destination, rate, label id).
    pub fn row(&self, s: usize) -> impl Iterator<Item = (usize, f64, u32)> + '_ {
        let r = self.row_ptr[s]..self.row_ptr[s + 1];
        r.map(move |k| (self.cols[k] as usize, self.rates[k], self.labels[k]))
    }

    /// E(s): total outgoing rate including self-loops.
    pub fn exit_rates(&self) -> &[f64] {
        &self.exit
    }

    /// Outgoing rate excluding self-loops (the rate at which the state is actually left).
    pub fn leave_rates(&self) -> Vec<f64> {
        (0..self.num_states()).map(|s| self.row(s).filter(|&(j, _, _)| j != s).map(|(_, r, _)| r).sum()).collect()
    }

    pub fn constants(&self) -> &Env {
        &self.consts
    }

    pub fn reward_names(&self) -> Vec<&str> {
        self.rewards.iter().map(|r| r.name.as_str()).collect()
    }

    pub fn has_reward(&self, name: &str) -> bool {
        self.rewards.iter().any(|r| r.name == name)
    }

    /// Compiles a boolean expression over the model's variables, constants and formulas.
    pub fn compile(&self, e: &Expr, extra: &Env) -> Result<Compiled, ExprError> {
        let mut consts = self.consts.clone();
        consts.extend_from(extra);
        Compiled::new(&fold_constants(e, &consts, &self.formulas)?, &self.slots)
    }

    /// Satisfaction vector of a state predicate.
    pub fn predicate(&self, e: &Expr, extra: &Env) -> Result<Vec<bool>, ExprError> {
        let c = self.compile(e, extra)?;
        (0..self.num_states()).map(|s| c.eval_bool(self.state(s))).collect()
    }

    fn reward(&self, name: &str) -> Result<&CompiledReward, SpaceError> {
        self.rewards.iter().find(|r| r.name == name).ok_or_else(|| SpaceError::UnknownReward(name.to_string()))
    }

    /// Reward rate accrued while residing in each state (state items only).
    pub fn state_rewards(&self, name: &str) -> Result<Vec<f64>, SpaceError> {
        let r = self.reward(name)?;
        let mut out = vec![0.0; self.num_states()];
        for (s, o) in out.iter_mut().enumerate() {
            let st = self.state(s);
            for (g, v) in &r.state_items {
                if g.eval_bool(st)? {
                    *o += v.eval_f64(st)?;
                }
            }
        }
        Ok(out)
    }

    /// Impulse earned by each stored transition, aligned with `cols()`/`rates()`.
    pub fn transition_impulses(&self, name: &str) -> Result<Vec<f64>, SpaceError> {
        let r = self.reward(name)?;
        let mut out = vec![0.0; self.num_transitions()];
        if r.transition_items.is_empty() {
            return Ok(out);
        }
        for s in 0..self.num_states() {
            let st = self.state(s);
            for k in self.row_ptr[s]..self.row_ptr[s + 1] {
                for (label, g, v) in &r.transition_items {
                    if *label == Some(self.labels[k]) && g.eval_bool(st)? {
                        out[k] += v.eval_f64(st)?;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Expected reward accrual rate per state: state rewards plus rate-weighted impulses.
    pub fn reward_rate_vector(&self, name: &str) -> Result<Vec<f64>, SpaceError> {
        let mut rho = self.state_rewards(name)?;
        let imp = self.transition_impulses(name)?;
        for (s, x) in rho.iter_mut().enumerate() {
            for k in self.row_ptr[s]..self.row_ptr[s + 1] {
                *x += self.rates[k] * imp[k];
            }
        }
        Ok(rho)
    }

    /// Writes `src dst rate [label]` lines.
    pub fn write_transitions(&self, w: &mut dyn io::Write) -> io::Result<()> {
        for s in 0..self.num_states() {
            for (j, r, l) in self.row(s) {
                match self.label_name(l) {
                    Some(name) => writeln!(w, "{s} {j} {r:?} {name}")?,
                    None => writeln!(w, "{s} {j} {r:?}")?,
                }
            }
        }
        Ok(())
    }

    /// Writes `index var=value ...` lines.
    pub fn write_states(&self, w: &mut dyn io::Write) -> io::Result<()> {
        for s in 0..self.num_states() {
            let st = self.state(s);
            let mut line = s.to_string();
            for (v, x) in self.vars.iter().zip(st) {
                if v.ty == Type::Bool {
                    let _ = write!(line, " {}={}", v.name, *x != 0);
                } else {
                    let _ = write!(line, " {}={}", v.name, x);
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}
