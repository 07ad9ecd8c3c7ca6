//! Acceptance gate: one test per criterion, each reporting a PASS or FAIL line.
//!
//! Report lines go straight to the process stderr so they show up even for passing tests.

use std::collections::BTreeSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctmcgrid_core::models::rules::{failure_sets, published_disagreements, DEFAULT_FAILURE_SET_CAP};
use ctmcgrid_core::models::{
    build_compact, build_tower, compute_routes, derive_link_rules, GridParams, HopKind, LineTopology, RouteCost,
    TowerParams,
};
use ctmcgrid_core::numerics::transient_distribution;
use ctmcgrid_core::simulator::{agreement_sigma, estimate, SimOptions};
use ctmcgrid_core::{
    build, evaluate, parse_and_validate, parse_property, BuildOptions, Env, ModelIR, SolverOptions, StateSpace,
    SteadyMethod, Value,
};

include!("../../core/tests/data/grids.rs");

fn report(criterion: &str, failures: &[String], summary: &str) {
    let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "acceptance criterion {criterion}: {verdict} ({summary})");
    for f in failures {
        let _ = writeln!(err, "    {f}");
    }
    assert!(failures.is_empty(), "criterion {criterion}: {} check(s) failed:\n{}", failures.len(), failures.join("\n"));
}

struct Checked {
    model: ModelIR,
    space: StateSpace,
}

impl Checked {
    fn fixture(name: &str, overrides: &[(&str, Value)]) -> Self {
        let text = std::fs::read_to_string(format!("{}/../core/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap();
        let env: Env = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Self::from_model(parse_and_validate(&text, &env).unwrap())
    }

    fn from_model(model: ModelIR) -> Self {
        let space = build(&model, &BuildOptions::default()).unwrap();
        Checked { model, space }
    }

    fn query_with(&self, prop: &str, consts: &[(&str, Value)], opts: &SolverOptions) -> Result<f64, String> {
        let env: Env = consts.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let p = parse_property(prop, &self.model, &env).map_err(|e| e.to_string())?;
        evaluate(&self.space, &p, opts).map(|r| r.value).map_err(|e| e.to_string())
    }

    fn query(&self, prop: &str, consts: &[(&str, Value)]) -> Result<f64, String> {
        self.query_with(prop, consts, &SolverOptions::default())
    }
}

/// Checks `actual` against `expected` at relative tolerance `rel`, recording a failure line.
fn expect(failures: &mut Vec<String>, what: &str, actual: Result<f64, String>, expected: f64, rel: f64) {
    match actual {
        Ok(v) => {
            let err = ((v - expected) / expected).abs();
            if !(err <= rel) {
                failures.push(format!("{what}: got {v:e}, expected {expected:e}, rel err {err:.2e} > {rel:e}"));
            }
        }
        Err(e) => failures.push(format!("{what}: {e}")),
    }
}

fn t(v: f64) -> Vec<(&'static str, Value)> {
    vec![("T", Value::Real(v))]
}

const M1: &str = r#"R{"TotalNumberOfSensorsFailures"}=? [C<=T]"#;
const M2: &str = "P=? [F<=T !s1|!s2|!s3|!s4|!s5|!s6|!s7|!s8|!s9|!s10]";
const M3: &str = "P=? [G<=T s1&s2&s3&s4&s5&s6&s7&s8&s9&s10]";
const M4: &str = "P=? [F<=T !s1]";
const M5: &str = r#"R{"TotalNumberOfRecoveries"}=? [C<=T]"#;
const M6: &str = "S=? [failure=2]";
const M7: &str = "S=? [failure=1]";
const M8: &str = "P=? [F<=T failure=2]";
const M9: &str = "P=? [F<=T failure=1]";
const ENERGY: &str = r#"R{"TotalNumberOfCommunicationsToBN"}=? [C<=T]"#;
const LM1: &str = r#"R{"TotalNumberOfSensorsFailures"}=? [S]"#;

/// Tower queries with their reference answers.
fn tower_suite() -> Vec<(String, &'static str, Vec<(&'static str, Value)>, f64)> {
    let mut v = vec![
        ("M1 T=1".to_string(), M1, t(1.0), 9.999000099990002E-6),
        ("M1 T=1e5".into(), M1, t(1e5), 0.9999001225814035),
        ("M1 T=1e6".into(), M1, t(1e6), 9.999000327135414),
        ("M2".into(), M2, t(1e5), 0.6321205588600892),
        ("M3".into(), M3, t(1e5), 0.3678794411399108),
        ("M4".into(), M4, t(1e4), 0.009950166250892718),
        ("M5".into(), M5, t(1e5), 0.9989001974867715),
        ("M5 energy".into(), ENERGY, t(1e5), 999900.1225814035),
        ("M7".into(), M7, vec![], 9.990005498998502E-4),
        ("LM1".into(), LM1, vec![], 9.999000099990002E-6),
    ];
    for (tt, r) in [(120.0, 4.5079475214300257E-7), (1e3, 8.086355995439531E-6), (1e4, 8.892885869021347E-5)] {
        v.push((format!("M8 T={tt}"), M8, t(tt), r));
    }
    for (tt, r) in [
        (100.0, 9.995001666255187E-4),
        (1e3, 0.009950166250865224),
        (1e4, 0.0951625819675857),
        (1e5, 0.6321205589509482),
        (2e5, 0.864664716914856),
    ] {
        v.push((format!("M9 T={tt}"), M9, t(tt), r));
    }
    v
}

const M6_REFERENCE: f64 = 4.4955024745493276E-7;

const COMPACT_STEADY: [(&str, f64, f64); 3] = [
    ("S=? [failedSN>0 | failedBN>0]", 0.0029999998918698125, 1e-3),
    ("S=? [failedBN>0]", 0.00099, 2e-2),
    ("S=? [failedSN>0]", 0.002, 2e-2),
];

const ENERGY_BN: &str = r#"R{"AvgEnergyBN"}=? [C<=T]"#;
const ENERGY_SN: &str = r#"R{"AvgEnergySN"}=? [C<=T]"#;

#[test]
fn criterion_1_state_counts() {
    let mut failures = Vec::new();
    let mut seen = Vec::new();
    for (name, expected) in [("line.sm", 590_848), ("tower.sm", 1_024), ("compact.sm", 612)] {
        let n = Checked::fixture(name, &[]).space.num_states();
        seen.push(format!("{name} {n}"));
        if n != expected {
            failures.push(format!("{name}: {n} states, expected {expected}"));
        }
    }
    report("1 (state counts)", &failures, &seen.join(", "));
}

#[test]
fn criterion_2_compact_steady_state() {
    let c = Checked::fixture("compact.sm", &[]);
    let mut failures = Vec::new();
    for (prop, expected, rel) in COMPACT_STEADY {
        expect(&mut failures, prop, c.query(prop, &[]), expected, rel);
    }
    report("2 (compact steady state)", &failures, "3 queries");
}

#[test]
fn criterion_3_recovery_time_sweep() {
    let mut failures = Vec::new();
    for (i, row) in RECOVERY_GRID.iter().enumerate() {
        for (j, &expected) in row.iter().enumerate() {
            let (bn, sn) = (12 * (i as i64 + 1), 12 * (j as i64 + 1));
            let c = Checked::fixture(
                "compact.sm",
                &[("RECOVERYTIME_BN", Value::Int(bn)), ("RECOVERYTIME_SN", Value::Int(sn))],
            );
            let got = c.query("S=? [failedSN>0 | failedBN>0]", &[]);
            expect(&mut failures, &format!("RT_BN={bn} RT_SN={sn}"), got, expected, 1e-3);
        }
    }
    report("3 (recovery-time sweep)", &failures, "36 grid points, rel 1e-3");
}

#[test]
fn criterion_4_mtbf_sweep() {
    let mut failures = Vec::new();
    for (i, row) in MTBF_GRID.iter().enumerate() {
        for (j, &expected) in row.iter().enumerate() {
            let (bn, sn) = (250 * (i as i64 + 1), 250 * (j as i64 + 1));
            let c = Checked::fixture(
                "compact.sm",
                &[
                    ("MEANTIMEBETWEENFAILURE_BN", Value::Int(24 * bn)),
                    ("MEANTIMEBETWEENFAILURE_SN", Value::Int(24 * sn)),
                ],
            );
            let got = c.query("S=? [failedSN>0 | failedBN>0]", &[]);
            expect(&mut failures, &format!("MTBF_BN={bn}d MTBF_SN={sn}d"), got, expected, 1e-3);
        }
    }
    report("4 (MTBF sweep, days)", &failures, "36 grid points, rel 1e-3");
}

#[test]
fn criterion_5_energy_rewards() {
    let c = Checked::fixture("compact.sm", &[]);
    let mut failures = Vec::new();
    expect(&mut failures, "AvgEnergyBN C<=168", c.query(ENERGY_BN, &t(168.0)), 4163.2448, 1e-4);
    expect(&mut failures, "AvgEnergySN C<=168", c.query(ENERGY_SN, &t(168.0)), 1343.1608, 1e-4);
    for prop in [ENERGY_BN, ENERGY_SN] {
        match (c.query(prop, &t(168.0)), c.query(prop, &t(336.0))) {
            (Ok(week), two) => expect(&mut failures, &format!("{prop} at 336 vs 2x168"), two, 2.0 * week, 1e-6),
            (Err(e), _) => failures.push(format!("{prop}: {e}")),
        }
    }
    report("5 (energy rewards)", &failures, "2 values at rel 1e-4, linearity at rel 1e-6");
}

#[test]
fn criterion_6_tower_suite() {
    let tw = Checked::fixture("tower.sm", &[]);
    let mut failures = Vec::new();
    let suite = tower_suite();
    for (name, prop, consts, expected) in &suite {
        expect(&mut failures, name, tw.query(prop, consts), *expected, 1e-4);
    }
    let gs = SolverOptions { method: SteadyMethod::GaussSeidel, ..SolverOptions::default() };
    expect(&mut failures, "M6 (Gauss-Seidel)", tw.query_with(M6, &[], &gs), M6_REFERENCE, 1e-3);
    report("6 (tower measures)", &failures, &format!("{} queries at rel 1e-4, M6 at rel 1e-3", suite.len()));
}

fn path_of(topo: &LineTopology, failed: &[usize], tower: usize) -> Option<Vec<usize>> {
    compute_routes(topo, &failed.iter().copied().collect()).route(tower).map(|r| r.path.clone())
}

#[test]
fn criterion_7_routing_equivalence() {
    let topo = LineTopology::new(10).unwrap();
    let mut failures = Vec::new();

    let rules = derive_link_rules(&topo, 2, DEFAULT_FAILURE_SET_CAP).unwrap();
    let sets = failure_sets(10, 2);
    let diffs = published_disagreements(&rules);
    let mut bad_sets = BTreeSet::new();
    for (f, tower, derived, published) in &diffs {
        bad_sets.insert(f.clone());
        failures.push(format!(
            "failure set {f:?}: tower {tower} routes to {derived:?}, published table gives {published:?}"
        ));
    }

    let up = |a: usize, b: usize| -> Vec<usize> { (a..=b).collect() };
    let down = |a: usize, b: usize| -> Vec<usize> { (b..=a).rev().collect() };
    let scenarios: Vec<(&[usize], Vec<(usize, Vec<usize>)>)> = vec![
        (
            &[],
            vec![
                (2, down(2, 1)),
                (3, down(3, 1)),
                (4, down(4, 1)),
                (5, down(5, 1)),
                (6, up(6, 10)),
                (7, up(7, 10)),
                (8, up(8, 10)),
                (9, up(9, 10)),
            ],
        ),
        (&[1], (2..=9).map(|i| (i, up(i, 10))).collect()),
        (
            &[3],
            vec![
                (2, down(2, 1)),
                (4, up(4, 10)),
                (5, up(5, 10)),
                (6, up(6, 10)),
                (7, up(7, 10)),
                (8, up(8, 10)),
                (9, up(9, 10)),
            ],
        ),
        (&[1, 3], [(2, vec![2, 4, 5, 6, 7, 8, 9, 10])].into_iter().chain((4..=9).map(|i| (i, up(i, 10)))).collect()),
        (
            &[1, 4],
            [(2, vec![2, 3, 5, 6, 7, 8, 9, 10]), (3, vec![3, 5, 6, 7, 8, 9, 10])]
                .into_iter()
                .chain((5..=9).map(|i| (i, up(i, 10))))
                .collect(),
        ),
        (
            &[2, 9],
            vec![
                (3, vec![3, 1]),
                (4, vec![4, 3, 1]),
                (5, vec![5, 4, 3, 1]),
                (6, vec![6, 7, 8, 10]),
                (7, vec![7, 8, 10]),
                (8, vec![8, 10]),
            ],
        ),
        (
            &[1, 3, 7],
            vec![
                (2, vec![2, 4, 5, 6, 8, 9, 10]),
                (4, vec![4, 5, 6, 8, 9, 10]),
                (5, vec![5, 6, 8, 9, 10]),
                (6, vec![6, 8, 9, 10]),
                (8, vec![8, 9, 10]),
                (9, vec![9, 10]),
            ],
        ),
    ];
    for (failed, expected) in &scenarios {
        for (tower, path) in expected {
            let got = path_of(&topo, failed, *tower);
            if got.as_ref() != Some(path) {
                failures.push(format!("scenario {failed:?}: tower {tower} takes {got:?}, figure shows {path:?}"));
            }
        }
    }
    report(
        "7 (routing equivalence)",
        &failures,
        &format!(
            "{} of {} failure sets agree with the published link table, {} scenarios checked",
            sets.len() - bad_sets.len(),
            sets.len(),
            scenarios.len()
        ),
    );
}

/// Best `(cost, terminal, next hop)` over every simple path to an operational terminal.
fn brute_force(topo: &LineTopology, failed: &BTreeSet<usize>, from: usize) -> Option<(RouteCost, usize, usize)> {
    fn dfs(
        topo: &LineTopology,
        failed: &BTreeSet<usize>,
        path: &mut Vec<usize>,
        backups: usize,
        best: &mut Option<(RouteCost, usize, usize)>,
    ) {
        let here = *path.last().unwrap();
        for next in 1..=topo.towers() {
            let Some(kind) = topo.link(here, next) else { continue };
            if failed.contains(&next) || path.contains(&next) {
                continue;
            }
            let b = backups + usize::from(kind == HopKind::Backup);
            if topo.is_terminal(next) {
                let cand = (RouteCost { backups: b, hops: path.len() }, next, path.get(1).copied().unwrap_or(next));
                if best.is_none_or(|cur| cand < cur) {
                    *best = Some(cand);
                }
            } else {
                path.push(next);
                dfs(topo, failed, path, b, best);
                path.pop();
            }
        }
    }
    let mut best = None;
    dfs(topo, failed, &mut vec![from], 0, &mut best);
    best
}

fn simulator_agrees(c: &Checked, prop: &str, consts: &[(&str, Value)], reference: f64) -> Result<(f64, f64), String> {
    let env: Env = consts.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let p = parse_property(prop, &c.model, &env).map_err(|e| e.to_string())?;
    let opts = SimOptions { samples: 10_000, ..SimOptions::default() };
    let e = estimate(&c.space, &p, &opts).map_err(|e| e.to_string())?;
    let sigma = agreement_sigma(&c.space, &p, &e, reference).map_err(|e| e.to_string())?;
    Ok((e.mean, sigma))
}

#[test]
fn criterion_8_property_suites() {
    let mut failures = Vec::new();
    let tw = Checked::fixture("tower.sm", &[]);
    let compact = Checked::fixture("compact.sm", &[]);

    // (a) embedded jump chain rows are stochastic.
    for (name, c) in [("tower", &tw), ("compact", &compact)] {
        let s = &c.space;
        let worst = (0..s.num_states())
            .filter(|&i| s.exit_rates()[i] > 0.0)
            .map(|i| (s.row(i).map(|(_, r, _)| r / s.exit_rates()[i]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        if worst > 1e-12 {
            failures.push(format!("(a) {name}: jump row sum off by {worst:e}"));
        }
    }

    // (b) transient mass.
    // The compact model uniformizes at about a thousand jumps per hour, so its horizons stay short.
    for (name, c, horizons) in [("tower", &tw, [0.5, 168.0, 1e4]), ("compact", &compact, [0.5, 24.0, 168.0])] {
        for time in horizons {
            match transient_distribution(&c.space, time, &SolverOptions::default()) {
                Ok(pi) => {
                    let mass: f64 = pi.iter().sum();
                    if (mass - 1.0).abs() > 1e-9 || pi.iter().any(|&x| x < 0.0) {
                        failures.push(format!("(b) {name} t={time}: mass {mass}"));
                    }
                }
                Err(e) => failures.push(format!("(b) {name} t={time}: {e}")),
            }
        }
    }

    // (c) F/G duality.
    for time in [1e3, 1e5] {
        match (tw.query(M2, &t(time)), tw.query(M3, &t(time))) {
            (Ok(f), Ok(g)) if (f + g - 1.0).abs() <= 1e-9 => {}
            (f, g) => failures.push(format!("(c) T={time}: F={f:?} G={g:?}")),
        }
    }
    for time in [24.0, 168.0] {
        let (f, g) =
            (compact.query("P=? [F<=T failedBN>0]", &t(time)), compact.query("P=? [G<=T failedBN=0]", &t(time)));
        match (f, g) {
            (Ok(f), Ok(g)) if (f + g - 1.0).abs() <= 1e-9 => {}
            (f, g) => failures.push(format!("(c) compact T={time}: F={f:?} G={g:?}")),
        }
    }

    // (d) bounded reachability grows with the bound.
    let times = [0.0, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 2e5];
    let values: Vec<f64> = times.iter().map(|&x| tw.query(M8, &t(x)).unwrap_or(f64::NAN)).collect();
    if values.windows(2).any(|w| !(w[1] >= w[0] - 1e-12)) {
        failures.push(format!("(d) M8 over {times:?}: {values:?}"));
    }

    // (e) routes are optimal.
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(3..=12);
        let p = rng.random_range(0.0..0.6);
        let failed: BTreeSet<usize> = (1..=n).filter(|_| rng.random_bool(p)).collect();
        let topo = LineTopology::new(n).unwrap();
        let table = compute_routes(&topo, &failed);
        for tower in topo.non_terminals().filter(|t| !failed.contains(t)) {
            let got = table.route(tower).map(|r| (r.cost(), r.terminal(), r.next_hop()));
            if got != brute_force(&topo, &failed, tower) {
                mismatches += 1;
            }
        }
    }
    if mismatches > 0 {
        failures.push(format!("(e) {mismatches} routes differ from exhaustive search"));
    }

    // (f) simulation agrees with the numerical answers within three standard deviations.
    let mut sim_queries: Vec<(String, &Checked, &str, Vec<(&str, Value)>, f64)> = Vec::new();
    for (prop, _, _) in COMPACT_STEADY {
        let reference = compact.query(prop, &[]).unwrap_or(f64::NAN);
        sim_queries.push((format!("compact {prop}"), &compact, prop, vec![], reference));
    }
    for prop in [ENERGY_BN, ENERGY_SN] {
        for h in [168.0, 336.0] {
            let reference = compact.query(prop, &t(h)).unwrap_or(f64::NAN);
            sim_queries.push((format!("compact {prop} T={h}"), &compact, prop, t(h), reference));
        }
    }
    for (name, prop, consts, _) in tower_suite() {
        let reference = tw.query(prop, &consts).unwrap_or(f64::NAN);
        sim_queries.push((format!("tower {name}"), &tw, prop, consts, reference));
    }
    sim_queries.push(("tower M6".into(), &tw, M6, vec![], tw.query(M6, &[]).unwrap_or(f64::NAN)));
    let total = sim_queries.len();
    for (name, c, prop, consts, reference) in sim_queries {
        match simulator_agrees(c, prop, &consts, reference) {
            Ok((mean, sigma)) if (mean - reference).abs() <= 3.0 * sigma => {}
            Ok((mean, sigma)) => {
                failures.push(format!("(f) {name}: simulated {mean:e}, numeric {reference:e}, sigma {sigma:e}"))
            }
            Err(e) => failures.push(format!("(f) {name}: {e}")),
        }
    }

    // (g) generated models answer exactly as the fixtures do.
    let gen_tower = Checked::from_model(build_tower(&TowerParams::default()).unwrap());
    let gen_compact = Checked::from_model(build_compact(&GridParams::default()).unwrap());
    let same = |a: Result<f64, String>, b: Result<f64, String>| match (a, b) {
        (Ok(a), Ok(b)) => (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE),
        _ => false,
    };
    for (name, prop, consts, _) in tower_suite().into_iter().chain([("M6".to_string(), M6, vec![], 0.0)]) {
        if !same(gen_tower.query(prop, &consts), tw.query(prop, &consts)) {
            failures.push(format!("(g) tower {name} differs between generator and fixture"));
        }
    }
    let compact_props: Vec<(&str, Vec<(&str, Value)>)> = COMPACT_STEADY
        .iter()
        .map(|(p, _, _)| (*p, vec![]))
        .chain([(ENERGY_BN, t(168.0)), (ENERGY_SN, t(168.0))])
        .collect();
    for (prop, consts) in &compact_props {
        if !same(gen_compact.query(prop, consts), compact.query(prop, consts)) {
            failures.push(format!("(g) compact {prop} differs between generator and fixture"));
        }
    }

    report("8 (property suites a-g)", &failures, &format!("1000 routing instances, {total} simulated queries"));
}
