use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde_json::{json, Value as Json};

use ctmcgrid_core::models::rules::{published_disagreements, DEFAULT_FAILURE_SET_CAP};
use ctmcgrid_core::models::{
    compact_text, compute_routes, derive_link_rules, estimate_cheap_link_probability, line_text, tower_text,
    CheapLinkMode, GridParams, LineParams, LineTopology, LinkRules, TowerParams,
};
use ctmcgrid_core::numerics::bottom_sccs;
use ctmcgrid_core::simulator::{estimate, sample_path_seeded, SimOptions};
use ctmcgrid_core::{build, evaluate, parse_property_file, BuildOptions, Env, ModelIR, Property, StateSpace, Value};

use crate::args::{CheckArgs, Format, GenArgs, InfoArgs, ModelKind, RoutesArgs, SimulateArgs, SweepArgs};
use crate::table::{format_f64, Cell, Table};
use crate::{parse_consts, read, sink, solver_options, CliError, Loaded};

fn build_space(model: &ModelIR) -> Result<StateSpace, CliError> {
    build(model, &BuildOptions::default()).map_err(|e| CliError::Parse(e.to_string()))
}

fn properties(loaded: &Loaded, path: &std::path::Path, model: &ModelIR, env: &Env) -> Result<Vec<Property>, CliError> {
    let text = read(path)?;
    let props = parse_property_file(&text, model, env)
        .map_err(|(line, e)| CliError::Parse(format!("{}:{line}: {e}", path.display())))?;
    if props.is_empty() {
        return Err(CliError::Usage(format!("{} has no properties (model {})", path.display(), loaded.path.display())));
    }
    Ok(props)
}

pub fn check(a: CheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = Loaded::new(&a.model)?;
    let (menv, penv) = loaded.split(&parse_consts(&a.consts.consts)?);
    let opts = solver_options(&a.solver)?;
    let model = loaded.model(&menv)?;
    let space = build_space(&model)?;
    let props = properties(&loaded, &a.properties, &model, &penv)?;
    let mut table = Table::new(["property", "value", "method", "iterations", "wall_ms"]);
    let mut failure = None;
    for p in &props {
        match evaluate(&space, p, &opts) {
            Ok(r) => table.push(vec![
                Cell::Text(p.text.trim().to_string()),
                Cell::Num(r.value),
                Cell::Text(r.method),
                Cell::Count(r.iterations as u64),
                Cell::Num(r.wall.as_secs_f64() * 1e3),
            ]),
            Err(e) => {
                table.push(vec![
                    Cell::Text(p.text.trim().to_string()),
                    Cell::Num(f64::NAN),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                ]);
                failure.get_or_insert(CliError::Solver(format!("{}: {e}", p.text.trim())));
            }
        }
    }
    table.write(a.format, &mut *sink(&a.output, out)?)?;
    failure.map_or(Ok(()), Err)
}

fn identifiers(text: &str) -> HashSet<&str> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).filter(|w| !w.is_empty()).collect()
}

/// Model overrides of a grid point as a cache key.
fn model_key(env: &Env) -> String {
    let mut items: Vec<String> = env.iter().map(|(k, v)| format!("{k}={v}")).collect();
    items.sort();
    items.join(",")
}

pub fn sweep(a: SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let loaded = Loaded::new(&a.model)?;
    let base = parse_consts(&a.consts.consts)?;
    let opts = solver_options(&a.solver)?;
    let prop_text = read(&a.properties)?;
    let used = identifiers(&prop_text);
    for s in &a.sweeps {
        if !loaded.declares(&s.name) && !used.contains(s.name.as_str()) {
            return Err(CliError::Usage(format!(
                "swept constant `{}` is not used by the model or the properties",
                s.name
            )));
        }
    }
    let points = crate::sweep::grid(&a.sweeps, a.max_points).map_err(CliError::Usage)?;
    let envs: Vec<(Env, Env)> = points
        .iter()
        .map(|p| {
            let mut values: Vec<(String, Value)> =
                base.iter().filter(|(n, _)| !p.iter().any(|(m, _)| m == n)).cloned().collect();
            values.extend(p.iter().cloned());
            loaded.split(&values)
        })
        .collect();

    // Syntax and unknown names surface once, before any solving.
    let first = loaded.model(&envs[0].0)?;
    parse_property_file(&prop_text, &first, &envs[0].1)
        .map_err(|(line, e)| CliError::Parse(format!("{}:{line}: {e}", a.properties.display())))?;

    let mut keys: Vec<String> = Vec::new();
    let mut index = BTreeMap::new();
    for (m, _) in &envs {
        let k = model_key(m);
        if !index.contains_key(&k) {
            index.insert(k.clone(), keys.len());
            keys.push(k);
        }
    }
    let first_env: Vec<&Env> = keys.iter().map(|k| &envs.iter().find(|(m, _)| &model_key(m) == k).unwrap().0).collect();
    let spaces: Vec<Result<(ModelIR, StateSpace), String>> = first_env
        .par_iter()
        .map(|m| {
            let model = loaded.model(m).map_err(|e| e.to_string())?;
            let space = build_space(&model).map_err(|e| e.to_string())?;
            Ok((model, space))
        })
        .collect();
    let results: Vec<Vec<(String, Result<f64, String>)>> = envs
        .par_iter()
        .map(|(m, p)| match &spaces[index[&model_key(m)]] {
            Err(e) => vec![(String::new(), Err(e.clone()))],
            Ok((model, space)) => match parse_property_file(&prop_text, model, p) {
                Err((line, e)) => vec![(String::new(), Err(format!("line {line}: {e}")))],
                Ok(props) => props
                    .iter()
                    .map(|q| {
                        (
                            q.text.trim().to_string(),
                            evaluate(space, q, &opts).map(|r| r.value).map_err(|e| e.to_string()),
                        )
                    })
                    .collect(),
            },
        })
        .collect();

    // A point that failed before its properties were known gets one row per property of the first point.
    let prop_names: Vec<String> = prop_text
        .lines()
        .map(|l| l.find("//").map_or(l, |k| &l[..k]).trim().to_string())
        .filter(|l| !l.is_empty())
        .collect();
    let mut headers: Vec<String> = a.sweeps.iter().map(|s| s.name.clone()).collect();
    headers.extend(["property".to_string(), "value".to_string()]);
    let mut table = Table::new(headers);
    let mut failed = 0;
    for (point, rows) in points.iter().zip(results) {
        let prefix: Vec<Cell> = point.iter().map(|(_, v)| Cell::Text(v.to_string())).collect();
        let label = point.iter().map(|(n, v)| format!("{n}={v}")).collect::<Vec<_>>().join(",");
        let rows: Vec<(String, Result<f64, String>)> = match rows.as_slice() {
            [(name, Err(e))] if name.is_empty() => prop_names.iter().map(|n| (n.clone(), Err(e.clone()))).collect(),
            _ => rows,
        };
        for (prop, value) in rows {
            let v = value.unwrap_or_else(|e| {
                failed += 1;
                let _ = writeln!(err, "{label}: {prop}: {e}");
                f64::NAN
            });
            let mut row = prefix.clone();
            row.extend([Cell::Text(prop), Cell::Num(v)]);
            table.push(row);
        }
    }
    table.write(a.format, &mut *sink(&a.output, out)?)?;
    if failed > 0 {
        return Err(CliError::Solver(format!("{failed} of {} evaluations failed", table.rows.len())));
    }
    Ok(())
}

pub fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = Loaded::new(&a.model)?;
    let (menv, penv) = loaded.split(&parse_consts(&a.consts.consts)?);
    let model = loaded.model(&menv)?;
    let space = build_space(&model)?;
    let mut w = sink(&a.output, out)?;
    if let Some(horizon) = a.trace {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(CliError::Usage("--trace needs a positive horizon".into()));
        }
        sample_path_seeded(&space, horizon, a.seed).write_text(&space, &mut *w)?;
        return Ok(());
    }
    let path =
        a.properties.as_ref().ok_or_else(|| CliError::Usage("simulate needs a property file or --trace".into()))?;
    let props = properties(&loaded, path, &model, &penv)?;
    let opts = SimOptions { samples: a.samples, seed: a.seed, steady_horizon: a.horizon, warmup: a.warmup };
    let mut table = Table::new(["property", "estimate", "std_error", "samples", "seed", "hits"]);
    for p in &props {
        let e = estimate(&space, p, &opts).map_err(|e| match e {
            ctmcgrid_core::simulator::SimError::Options(m) => CliError::Usage(m),
            other => CliError::Solver(format!("{}: {other}", p.text.trim())),
        })?;
        table.push(vec![
            Cell::Text(p.text.trim().to_string()),
            Cell::Num(e.mean),
            e.std_error.map_or(Cell::Empty, Cell::Num),
            Cell::Count(e.samples as u64),
            Cell::Count(e.seed),
            Cell::Count(e.hits as u64),
        ]);
    }
    table.write(a.format, &mut *w)?;
    Ok(())
}

fn conditions_text(conds: &[BTreeSet<usize>]) -> String {
    conds
        .iter()
        .map(|c| {
            if c.is_empty() {
                "always".to_string()
            } else {
                format!("({})", c.iter().map(|t| format!("!{t}")).collect::<Vec<_>>().join("&"))
            }
        })
        .collect::<Vec<_>>()
        .join(" | ")
}

fn write_rules(rules: &LinkRules, w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "link rules (failure sets up to size {}):", rules.max_failures)?;
    for t in &rules.rules {
        for (dir, links) in [("send", &t.send), ("receive", &t.receive)] {
            for l in links {
                let class = format!("{:?}", l.class).to_lowercase();
                writeln!(w, "T{} {dir} {}-{} {class}: {}", t.tower, l.from, l.to, conditions_text(&l.conditions))?;
            }
        }
    }
    Ok(())
}

pub fn routes(a: RoutesArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let usage = |e: ctmcgrid_core::models::ModelsError| CliError::Usage(e.to_string());
    let topo = LineTopology::new(a.towers).map_err(usage)?;
    let failed: BTreeSet<usize> = a.failed.iter().copied().collect();
    topo.check_failed(&failed).map_err(usage)?;
    let table = compute_routes(&topo, &failed);
    let rules = a.rules.map(|k| derive_link_rules(&topo, k, DEFAULT_FAILURE_SET_CAP)).transpose().map_err(usage)?;
    let cheap = match a.cheap_link {
        None => None,
        Some(p) => {
            let mode = match a.samples {
                Some(samples) => CheapLinkMode::MonteCarlo { samples, seed: a.seed },
                None => CheapLinkMode::Exact,
            };
            Some(estimate_cheap_link_probability(&topo, &vec![p; a.towers], mode).map_err(usage)?)
        }
    };
    if a.json {
        let (regular, backup, unroutable) = table.summary();
        let mut doc = json!({
            "routes": table,
            "summary": { "regular_hops": regular, "backup_hops": backup, "unroutable": unroutable },
        });
        if let Some(r) = &rules {
            doc["rules"] = serde_json::to_value(r).expect("rules serialize");
        }
        if let Some(c) = &cheap {
            doc["cheap_link"] = serde_json::to_value(c).expect("estimate serializes");
        }
        serde_json::to_writer_pretty(&mut *out, &doc).map_err(std::io::Error::from)?;
        writeln!(out)?;
        return Ok(());
    }
    writeln!(out, "{table}")?;
    if let Some(r) = &rules {
        write_rules(r, out)?;
        if a.towers == 10 {
            let diffs = published_disagreements(r);
            writeln!(out, "differences from the published ten-tower send table: {}", diffs.len())?;
            let hop = |h: Option<usize>| h.map_or("none".to_string(), |t| t.to_string());
            for (f, t, derived, published) in diffs {
                let set = f.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
                writeln!(out, "  failed {{{set}}} T{t}: routed {} published {}", hop(derived), hop(published))?;
            }
        }
    }
    if let Some(c) = cheap {
        match c.std_error {
            Some(se) => {
                writeln!(out, "cheap-link probability: {} (std error {})", format_f64(c.value), format_f64(se))?
            }
            None => writeln!(out, "cheap-link probability: {}", format_f64(c.value))?,
        }
    }
    Ok(())
}

pub fn info(a: InfoArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = Loaded::new(&a.model)?;
    let (menv, _) = loaded.split(&parse_consts(&a.consts.consts)?);
    let model = loaded.model(&menv)?;
    let space = build_space(&model)?;
    let bsccs = bottom_sccs(&space).len();
    let max_exit = space.exit_rates().iter().copied().fold(0.0, f64::max);
    let actions: Vec<&str> = model.actions();
    let rewards: Vec<&str> = space.reward_names();
    if let Some(path) = &a.export_states {
        let mut f = sink(&Some(path.clone()), out)?;
        space.write_states(&mut *f)?;
    }
    if let Some(path) = &a.export_transitions {
        let mut f = sink(&Some(path.clone()), out)?;
        space.write_transitions(&mut *f)?;
    }
    if a.format == Some(Format::Json) {
        let doc = json!({
            "states": space.num_states(),
            "transitions": space.num_transitions(),
            "initial": space.describe(space.initial()),
            "actions": actions,
            "rewards": rewards,
            "bsccs": bsccs,
            "max_exit_rate": max_exit,
        });
        serde_json::to_writer_pretty(&mut *out, &doc).map_err(std::io::Error::from)?;
        writeln!(out)?;
        return Ok(());
    }
    writeln!(out, "states: {}", space.num_states())?;
    writeln!(out, "transitions: {}", space.num_transitions())?;
    writeln!(out, "initial: {}", space.describe(space.initial()))?;
    writeln!(out, "actions: {}", actions.join(", "))?;
    writeln!(out, "rewards: {}", rewards.join(", "))?;
    writeln!(out, "bsccs: {bsccs}")?;
    writeln!(out, "max exit rate: {}", format_f64(max_exit))?;
    Ok(())
}

/// Applies `NAME=VALUE` overrides to the serialized defaults of a parameter set.
fn with_overrides<P: serde::Serialize + serde::de::DeserializeOwned>(
    defaults: P,
    sets: &[String],
) -> Result<P, CliError> {
    let mut doc = serde_json::to_value(defaults).expect("parameters serialize");
    let obj = doc.as_object_mut().expect("parameters are a struct");
    for (name, v) in parse_consts(sets)? {
        if !obj.contains_key(&name) {
            let known: Vec<&str> = obj.keys().map(String::as_str).collect();
            return Err(CliError::Usage(format!("unknown parameter `{name}` (known: {})", known.join(", "))));
        }
        let slot = obj.get_mut(&name).expect("checked above");
        *slot = match v {
            Value::Int(i) if slot.is_f64() => json!(i as f64),
            Value::Int(i) => json!(i),
            Value::Real(r) => json!(r),
            Value::Bool(b) => json!(b),
        };
    }
    serde_json::from_value(doc).map_err(|e| CliError::Usage(format!("bad parameter value: {e}")))
}

fn list_defaults<P: serde::Serialize>(p: P, w: &mut dyn Write) -> std::io::Result<()> {
    if let Json::Object(obj) = serde_json::to_value(p).expect("parameters serialize") {
        for (k, v) in obj {
            writeln!(w, "{k}={v}")?;
        }
    }
    Ok(())
}

pub fn generate(a: GenArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let usage = |e: ctmcgrid_core::models::ModelsError| CliError::Usage(e.to_string());
    if a.list {
        match a.kind {
            ModelKind::Tower => list_defaults(TowerParams::default(), out)?,
            ModelKind::Compact => list_defaults(GridParams::default(), out)?,
            ModelKind::Line => list_defaults(LineParams::default(), out)?,
        }
        return Ok(());
    }
    let text = match a.kind {
        ModelKind::Tower => tower_text(&with_overrides(TowerParams::default(), &a.sets)?).map_err(usage)?,
        ModelKind::Compact => compact_text(&with_overrides(GridParams::default(), &a.sets)?).map_err(usage)?,
        ModelKind::Line => {
            line_text(a.towers, &with_overrides(LineParams::default(), &a.sets)?, a.max_failures).map_err(usage)?
        }
    };
    sink(&a.output, out)?.write_all(text.as_bytes())?;
    Ok(())
}
