//! The transmission line: towers with a sleep/operate/done duty cycle that forward one packet per
//! cycle along the link chosen by the routing rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::routing::{HopKind, LineTopology};
use super::rules::{derive_link_rules, failure_sets, LinkRules, DEFAULT_FAILURE_SET_CAP};
use super::{fmt_real, parse_generated, ModelsError};
use crate::model::ModelIR;

pub const MIN_TOWERS: usize = 3;
pub const MAX_TOWERS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineParams {
    /// Mean sleep duration (hours).
    pub t_sleep: f64,
    /// Mean length of the operational phase (hours).
    pub t_operation: f64,
    /// Mean lifetime of a tower node (hours).
    pub t_life: f64,
    pub t_recovery: f64,
    /// Transmission time constant; the transmission rate is `tTX*1000*60*60`.
    pub t_tx: f64,
    pub c_tx10: f64,
    pub c_tx20: f64,
    pub c_rx: f64,
    pub c_sleep: f64,
}

impl Default for LineParams {
    fn default() -> Self {
        LineParams {
            t_sleep: 1.0,
            t_operation: 0.01,
            t_life: 10000.0,
            t_recovery: 50.0,
            t_tx: 5.0,
            c_tx10: 120.0,
            c_tx20: 200.0,
            c_rx: 18.0,
            c_sleep: 0.005,
        }
    }
}

impl LineParams {
    pub fn check(&self) -> Result<(), ModelsError> {
        for (name, v) in [
            ("tSLEEP", self.t_sleep),
            ("tOPERATION", self.t_operation),
            ("tLIFE", self.t_life),
            ("tRECOVERY", self.t_recovery),
            ("tTX", self.t_tx),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelsError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("cTX10", self.c_tx10), ("cTX20", self.c_tx20), ("cRX", self.c_rx), ("cSleep", self.c_sleep)]
        {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ModelsError::Invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Action label of a transmission from `from` to `to`.
pub fn tx_action(from: usize, to: usize) -> String {
    format!("TX_{from}_{to}")
}

fn down(t: usize) -> String {
    format!("(state{t}=0 | state{t}=2)")
}

fn up(topo: &LineTopology, t: usize) -> String {
    if topo.is_terminal(t) {
        format!("state{t}=1")
    } else {
        format!("(state{t}=1 | state{t}=3)")
    }
}

/// For one sender, the towers its choice depends on and the link chosen for each pattern of
/// failures among them.
struct SenderTable {
    relevant: BTreeSet<usize>,
    choice: BTreeMap<BTreeSet<usize>, usize>,
}

fn sender_table(rules: &LinkRules, tower: usize, n: usize) -> SenderTable {
    let tr = rules.tower(tower).expect("tower has rules");
    let mut relevant: BTreeSet<usize> = tr.send.iter().flat_map(|l| l.conditions.iter().flatten().copied()).collect();
    relevant.extend(tr.send.iter().map(|l| l.to));
    let project = |relevant: &BTreeSet<usize>| -> Option<BTreeMap<BTreeSet<usize>, Option<usize>>> {
        let mut table = BTreeMap::new();
        for (f, chosen) in &rules.choices {
            let Some(&hop) = chosen.get(&tower) else { continue };
            let key: BTreeSet<usize> = f.intersection(relevant).copied().collect();
            match table.insert(key, hop) {
                Some(prev) if prev != hop => return None,
                _ => {}
            }
        }
        Some(table)
    };
    let table = match project(&relevant) {
        Some(t) => t,
        None => {
            relevant = (1..=n).filter(|&t| t != tower).collect();
            project(&relevant).expect("the full failure set determines the route")
        }
    };
    let choice = table.into_iter().filter_map(|(k, hop)| hop.map(|h| (k, h))).collect();
    SenderTable { relevant, choice }
}

/// Guard under which `tower` sends to `to`, as a disjunction over failure patterns.
fn send_guard(topo: &LineTopology, table: &SenderTable, to: usize) -> String {
    let terms: Vec<String> = table
        .choice
        .iter()
        .filter(|(_, &h)| h == to)
        .map(|(key, _)| {
            let lits: Vec<String> =
                table.relevant.iter().map(|&t| if key.contains(&t) { down(t) } else { up(topo, t) }).collect();
            format!("({})", lits.join(" & "))
        })
        .collect();
    if terms.is_empty() {
        "false".into()
    } else {
        terms.join(" | ")
    }
}

/// Model text for a line of `n` towers, encoding routes for up to `max_failures` simultaneous failures.
pub fn line_text(n: usize, p: &LineParams, max_failures: usize) -> Result<String, ModelsError> {
    if !(MIN_TOWERS..=MAX_TOWERS).contains(&n) {
        return Err(ModelsError::Invalid(format!("tower count must be in {MIN_TOWERS}..={MAX_TOWERS}, got {n}")));
    }
    p.check()?;
    let topo = LineTopology::new(n)?;
    let rules = derive_link_rules(&topo, max_failures, DEFAULT_FAILURE_SET_CAP)?;
    let links: Vec<(usize, usize)> = rules.rules.iter().flat_map(|t| t.send.iter().map(|l| (l.from, l.to))).collect();

    let mut s = String::new();
    let w = &mut s;
    writeln!(w, "// Transmission line of {n} towers; routes encoded for up to {max_failures} failures").unwrap();
    writeln!(w, "ctmc\n").unwrap();
    for (name, v) in [
        ("tSLEEP", p.t_sleep),
        ("tOPERATION", p.t_operation),
        ("tLIFE", p.t_life),
        ("tRECOVERY", p.t_recovery),
        ("tTX", p.t_tx),
        ("cTX10", p.c_tx10),
        ("cTX20", p.c_tx20),
        ("cRX", p.c_rx),
        ("cSleep", p.c_sleep),
    ] {
        writeln!(w, "const double {name}={};", fmt_real(v)).unwrap();
    }
    writeln!(
        w,
        "\nconst double rSLEEP=1/tSLEEP;\nconst double rOPERATION=1/tOPERATION;\nconst double rFAIL=1/tLIFE;\n\
         const double rRECOVERY=1/tRECOVERY;\nconst double rTX=tTX*1000*60*60;\n"
    )
    .unwrap();
    writeln!(w, "global brokendevices : [0..{n}] init 0;\n").unwrap();

    writeln!(w, "module environment\nsleeping : bool init true;\n").unwrap();
    writeln!(w, "[wakeup] sleeping -> rSLEEP: (sleeping'=false);").unwrap();
    let busy: Vec<String> = topo.non_terminals().map(|t| format!("(state{t}!=1)")).collect();
    writeln!(w, "[sleep] !sleeping & {} -> rOPERATION: (sleeping'=true);", busy.join(" & ")).unwrap();
    for &(a, b) in &links {
        writeln!(w, "[{}] true -> rTX: true;", tx_action(a, b)).unwrap();
    }
    writeln!(w, "endmodule").unwrap();

    for t in 1..=n {
        let terminal = topo.is_terminal(t);
        writeln!(w, "\nmodule tower{t}").unwrap();
        writeln!(
            w,
            "state{t} : [0..{}] init 2; // 0 broken, 1 operational, 2 sleeping, 3 done",
            if terminal { 2 } else { 3 }
        )
        .unwrap();
        writeln!(w, "[wakeup] state{t}=2 -> (state{t}'=1);\n[wakeup] state{t}=0 -> true;").unwrap();
        for &(a, _) in links.iter().filter(|&&(_, b)| b == t) {
            writeln!(w, "[{}] {} -> true;", tx_action(a, t), up(&topo, t)).unwrap();
        }
        if terminal {
            writeln!(w, "[sleep] state{t}=1 -> (state{t}'=2);").unwrap();
        } else {
            let table = sender_table(&rules, t, n);
            for &(_, b) in links.iter().filter(|&&(a, _)| a == t) {
                writeln!(w, "[{}] state{t}=1 & ({}) -> (state{t}'=3);", tx_action(t, b), send_guard(&topo, &table, b))
                    .unwrap();
            }
            writeln!(w, "[sleep] state{t}=3 -> (state{t}'=2);").unwrap();
        }
        writeln!(w, "[sleep] state{t}=0 | state{t}=2 -> true;").unwrap();
        writeln!(w, "[] state{t}>0 & brokendevices<{n} -> rFAIL: (state{t}'=0) & (brokendevices'=brokendevices+1);")
            .unwrap();
        writeln!(w, "[] state{t}=0 & brokendevices>0 -> rRECOVERY: (state{t}'=2) & (brokendevices'=brokendevices-1);")
            .unwrap();
        writeln!(w, "endmodule").unwrap();
    }

    for (a, b, kind) in topo.edges() {
        let used: Vec<&(usize, usize)> = links.iter().filter(|&&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)).collect();
        if kind != HopKind::Backup || used.is_empty() {
            continue;
        }
        writeln!(w, "\nrewards \"backup{a}{b}\"").unwrap();
        for &&(x, y) in &used {
            writeln!(w, "[{}] true : 1;", tx_action(x, y)).unwrap();
        }
        writeln!(w, "endrewards").unwrap();
    }
    for t in 1..=n {
        writeln!(w, "\nrewards \"battery{t}\"\nstate{t}=2 : cSleep;").unwrap();
        for &(a, b) in links.iter().filter(|&&(a, _)| a == t) {
            let cost = if topo.link(a, b) == Some(HopKind::Backup) { "cTX20" } else { "cTX10" };
            writeln!(w, "[{}] true : {cost};", tx_action(a, b)).unwrap();
        }
        for &(a, b) in links.iter().filter(|&&(_, b)| b == t) {
            writeln!(w, "[{}] true : cRX;", tx_action(a, b)).unwrap();
        }
        writeln!(w, "endrewards").unwrap();
    }
    for t in 1..=n {
        writeln!(w, "\nrewards \"receivedpacketsT{t}\"").unwrap();
        for &(a, b) in links.iter().filter(|&&(_, b)| b == t) {
            writeln!(w, "[{}] true : 1;", tx_action(a, b)).unwrap();
        }
        writeln!(w, "endrewards").unwrap();
    }
    for t in topo.non_terminals() {
        writeln!(w, "\nrewards \"sentpacketsT{t}\"").unwrap();
        for &(a, b) in links.iter().filter(|&&(a, _)| a == t) {
            writeln!(w, "[{}] true : 1;", tx_action(a, b)).unwrap();
        }
        writeln!(w, "endrewards").unwrap();
    }
    for t in 1..=n {
        writeln!(w, "\nrewards \"fail{t}\"\nstate{t}=0 : 1;\nendrewards").unwrap();
    }
    Ok(s)
}

/// Builds the transmission-line model.
pub fn build_line(n: usize, p: &LineParams, max_failures: usize) -> Result<ModelIR, ModelsError> {
    parse_generated(&line_text(n, p, max_failures)?)
}

/// Every failure set of size ≤ `max_failures` on which the encoded guards of `model` enable
/// something other than exactly the routed link, for a model built by [`build_line`].
pub fn guard_mismatches(
    model: &ModelIR,
    n: usize,
    max_failures: usize,
) -> Result<Vec<(BTreeSet<usize>, usize)>, ModelsError> {
    let topo = LineTopology::new(n)?;
    let rules = derive_link_rules(&topo, max_failures, DEFAULT_FAILURE_SET_CAP)?;
    let mut out = Vec::new();
    for f in failure_sets(n, max_failures) {
        let enabled = enabled_sends(model, n, &f)?;
        for (&t, &hop) in &rules.choices[&f] {
            let got = enabled.get(&t).cloned().unwrap_or_default();
            let want: BTreeSet<usize> = hop.into_iter().collect();
            if got != want {
                out.push((f.clone(), t));
            }
        }
    }
    Ok(out)
}

/// Receivers each operational tower can transmit to when all towers are awake and `failed` are broken.
///
/// Works on any model following the line conventions (`stateN` variables, `sleeping`,
/// `brokendevices`); a transmission counts when every module declaring its label has an
/// enabled command and the update moves the sender to state 3.
pub fn enabled_sends(
    model: &ModelIR,
    n: usize,
    failed: &BTreeSet<usize>,
) -> Result<BTreeMap<usize, BTreeSet<usize>>, ModelsError> {
    use crate::expr::{eval, Value};
    let mut env = model.constant_env().map_err(|e| ModelsError::Invalid(e.to_string()))?;
    for t in 1..=n {
        env.bind(format!("state{t}"), Value::Int(if failed.contains(&t) { 0 } else { 1 }));
    }
    env.bind("sleeping", Value::Bool(false));
    env.bind("brokendevices", Value::Int(failed.len() as i64));
    let formulas = model.formula_map();
    let holds = |g: &crate::expr::Expr| -> Result<bool, ModelsError> {
        let e = crate::expr::inline_formulas(g, &formulas).map_err(|e| ModelsError::Invalid(e.to_string()))?;
        let v = eval(&e, &env).map_err(|e| ModelsError::Invalid(e.to_string()))?;
        Ok(v.as_bool() == Some(true))
    };
    let mut out: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for action in model.actions() {
        let mut sender = None;
        let mut all_enabled = true;
        for m in &model.modules {
            let cmds: Vec<_> = m.commands.iter().filter(|c| c.action.as_deref() == Some(action)).collect();
            if cmds.is_empty() {
                continue;
            }
            let mut any = false;
            for c in cmds {
                if holds(&c.guard)? {
                    any = true;
                    for u in &c.updates {
                        if u.var.starts_with("state") && u.value.literal_value() == Some(Value::Int(3)) {
                            sender = u.var["state".len()..].parse::<usize>().ok();
                        }
                    }
                }
            }
            all_enabled &= any;
        }
        if !all_enabled {
            continue;
        }
        let Some(from) = sender else { continue };
        let to = model
            .modules
            .iter()
            .filter(|m| m.name != format!("tower{from}"))
            .find(|m| m.name.starts_with("tower") && m.commands.iter().any(|c| c.action.as_deref() == Some(action)))
            .and_then(|m| m.name["tower".len()..].parse::<usize>().ok());
        if let Some(to) = to {
            out.entry(from).or_default().insert(to);
        }
    }
    Ok(out)
}
