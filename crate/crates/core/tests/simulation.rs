//! Statistical checks of the path sampler and the Monte Carlo estimator.

use ctmcgrid_core::simulator::{agreement_sigma, estimate, sample_path_seeded, SimOptions};
use ctmcgrid_core::{
    build, evaluate, parse_and_validate, parse_property, BuildOptions, Env, ModelIR, SolverOptions, StateSpace, Value,
};

fn model(text: &str) -> (ModelIR, StateSpace) {
    let m = parse_and_validate(text, &Env::new()).unwrap();
    let s = build(&m, &BuildOptions::default()).unwrap();
    (m, s)
}

fn fixture(name: &str) -> (ModelIR, StateSpace) {
    model(&std::fs::read_to_string(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap())
}

const FLIP: &str = "ctmc
module m
x : [0..1] init 0;
[] x=0 -> 1 : (x'=1);
[] x=1 -> 1 : (x'=0);
endmodule";

#[test]
fn absorbing_state_is_one_segment() {
    let (_, s) = model("ctmc\nmodule m\nx : [0..1] init 0;\n[] x=1 -> 1 : (x'=0);\nendmodule");
    let p = sample_path_seeded(&s, 7.5, 1);
    assert_eq!(p.len(), 1);
    assert_eq!(p.sojourn(0), 7.5);
    let mut out = Vec::new();
    p.write_text(&s, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "0 7.5 -\n");
}

#[test]
fn same_seed_same_path() {
    let (_, s) = model(FLIP);
    assert_eq!(sample_path_seeded(&s, 100.0, 42), sample_path_seeded(&s, 100.0, 42));
    assert_ne!(sample_path_seeded(&s, 100.0, 42), sample_path_seeded(&s, 100.0, 43));
}

#[test]
fn mean_sojourn_of_unit_rate_state() {
    let (_, s) = model(FLIP);
    let n = 10_000;
    let total: f64 = (0..n)
        .map(|seed| {
            // P(no jump within 60 h) = e^-60.
            let p = sample_path_seeded(&s, 60.0, seed);
            assert!(p.len() >= 2);
            p.sojourn(0)
        })
        .sum();
    let mean = total / n as f64;
    assert!((mean - 1.0).abs() < 0.03, "{mean}");
}

/// Kolmogorov-Smirnov against Exp(E(s)) for a state with a self-loop, which counts toward E(s).
#[test]
fn sojourns_pass_kolmogorov_smirnov() {
    let (_, s) = model(
        "ctmc\nmodule m\nx : [0..1] init 0;\n[] x=0 -> 2 : (x'=1);\n[a] x=0 -> 0.5 : true;\n[] x=1 -> 4 : (x'=0);\nendmodule",
    );
    let rate = s.exit_rates()[s.initial()];
    assert_eq!(rate, 2.5);
    let mut xs: Vec<f64> = Vec::new();
    let mut seed = 0;
    while xs.len() < 10_000 {
        let p = sample_path_seeded(&s, 50.0, seed);
        seed += 1;
        for k in 0..p.len() - 1 {
            if p.states[k] == s.initial() && xs.len() < 10_000 {
                xs.push(p.sojourn(k));
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-rate * x).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // Asymptotic critical value at alpha = 0.01.
    assert!(d < 1.628 / n.sqrt(), "D = {d}");
}

#[test]
fn one_sample_is_an_indicator() {
    let (m, s) = fixture("tower.sm");
    let p = parse_property("P=? [F<=100000 failure>=1]", &m, &Env::new()).unwrap();
    let e = estimate(&s, &p, &SimOptions { samples: 1, ..SimOptions::default() }).unwrap();
    assert!(e.mean == 0.0 || e.mean == 1.0);
    assert_eq!(e.std_error, None);
}

fn numeric(m: &ModelIR, s: &StateSpace, prop: &str, env: &Env) -> f64 {
    let p = parse_property(prop, m, env).unwrap();
    evaluate(s, &p, &SolverOptions::default()).unwrap().value
}

fn within_three_sigma(m: &ModelIR, s: &StateSpace, prop: &str, env: &Env, opts: &SimOptions) -> bool {
    let reference = numeric(m, s, prop, env);
    let p = parse_property(prop, m, env).unwrap();
    let e = estimate(s, &p, opts).unwrap();
    let sigma = agreement_sigma(s, &p, &e, reference).unwrap();
    (e.mean - reference).abs() <= 3.0 * sigma
}

#[test]
fn tower_failure_probability_agrees() {
    let (m, s) = fixture("tower.sm");
    let p = parse_property("P=? [F<=100000 failure>=1]", &m, &Env::new()).unwrap();
    let e = estimate(&s, &p, &SimOptions::default()).unwrap();
    let se = e.std_error.unwrap();
    assert!((e.mean - 0.6321206).abs() <= 3.0 * se, "{e:?}");
}

#[test]
fn compact_sensor_energy_agrees() {
    let (m, s) = fixture("compact.sm");
    let p = parse_property(r#"R{"AvgEnergySN"}=? [C<=168]"#, &m, &Env::new()).unwrap();
    let e = estimate(&s, &p, &SimOptions::default()).unwrap();
    assert!((e.mean - 1343.160845).abs() <= 3.0 * e.std_error.unwrap(), "{e:?}");
}

/// Agreement is required in at least 99% of seeds, which for thirty seeds means all of them.
#[test]
fn tower_queries_agree_across_seeds() {
    let (m, s) = fixture("tower.sm");
    let env = Env::new().with("T", Value::Real(1e4));
    for prop in ["P=? [F<=T !s1]", "P=? [F<=T failure=1]", r#"R{"TotalNumberOfSensorsFailures"}=? [C<=T]"#] {
        let fails: Vec<u64> = (1..=30)
            .filter(|&seed| !within_three_sigma(&m, &s, prop, &env, &SimOptions { seed, ..SimOptions::default() }))
            .collect();
        assert!(fails.is_empty(), "{prop}: seeds {fails:?} disagree");
    }
}
