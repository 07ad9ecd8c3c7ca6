//! A single tower: one bone node with `n` star-connected sensors that fail, recover and send.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{fmt_real, parse_generated, ModelsError};
use crate::model::ModelIR;

/// Most sensors an explicit model can hold (2^36 states).
pub const MAX_SENSORS: usize = 36;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerParams {
    pub sensors: usize,
    /// Per-sensor failure rate (per hour).
    pub r_fail: f64,
    pub r_recover: f64,
    pub r_send: f64,
    pub c_send: f64,
    /// Upper bound of the failure counter.
    pub max_failure: usize,
}

impl Default for TowerParams {
    fn default() -> Self {
        TowerParams { sensors: 10, r_fail: 1e-6, r_recover: 0.01, r_send: 1.0, c_send: 1.0, max_failure: 10 }
    }
}

impl TowerParams {
    pub fn check(&self) -> Result<(), ModelsError> {
        if self.sensors < 1 || self.sensors > MAX_SENSORS {
            return Err(ModelsError::Invalid(format!(
                "sensor count must be in 1..={MAX_SENSORS}, got {}",
                self.sensors
            )));
        }
        for (name, v) in [("rFail", self.r_fail), ("rRecover", self.r_recover), ("rSend", self.r_send)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelsError::Invalid(format!("{name} must be a positive rate, got {v}")));
            }
        }
        if !(self.c_send >= 0.0 && self.c_send.is_finite()) {
            return Err(ModelsError::Invalid(format!("cSend must be nonnegative, got {}", self.c_send)));
        }
        if self.max_failure < 1 {
            return Err(ModelsError::Invalid("the failure counter needs a bound of at least 1".into()));
        }
        Ok(())
    }
}

/// Model text for a tower with the given parameters.
pub fn tower_text(p: &TowerParams) -> Result<String, ModelsError> {
    p.check()?;
    let n = p.sensors;
    let mut s = String::new();
    let w = &mut s;
    writeln!(w, "// Single tower with {n} sensors; time unit: hour").unwrap();
    writeln!(w, "ctmc\n").unwrap();
    writeln!(w, "const double rFail={};", fmt_real(p.r_fail)).unwrap();
    writeln!(w, "const double rRecover={};", fmt_real(p.r_recover)).unwrap();
    writeln!(w, "const double rSend={};", fmt_real(p.r_send)).unwrap();
    writeln!(w, "const double cSend={};", fmt_real(p.c_send)).unwrap();
    writeln!(w, "const int MAXfailure={};\n", p.max_failure).unwrap();

    writeln!(w, "module failcount\n\nfailure : [0..MAXfailure] init 0;\n").unwrap();
    for i in 1..=n {
        writeln!(w, "[fail{i}] failure<MAXfailure -> (failure'=failure+1);").unwrap();
    }
    writeln!(w).unwrap();
    for i in 1..=n {
        writeln!(w, "[rec{i}] failure>0 -> (failure'=failure-1);").unwrap();
    }
    writeln!(w, "\nendmodule\n\nmodule tower\n").unwrap();
    for i in 1..=n {
        writeln!(w, "s{i} : bool init true;").unwrap();
    }
    writeln!(w).unwrap();
    for i in 1..=n {
        writeln!(w, "[fail{i}] s{i} -> rFail: (s{i}'=false);").unwrap();
    }
    for i in 1..=n {
        writeln!(w, "[rec{i}] !s{i} -> rRecover: (s{i}'=true);").unwrap();
    }
    for i in 1..=n {
        writeln!(w, "[send{i}] s{i} -> rSend: true;").unwrap();
    }
    writeln!(w, "\nendmodule\n").unwrap();

    writeln!(w, "rewards \"Doublefailure\"\nfailure=2 : 1;\nendrewards\n").unwrap();
    writeln!(w, "rewards \"Singlefailure\"\nfailure=1 : 1;\nendrewards\n").unwrap();
    for (name, action) in [
        ("TotalNumberOfCommunicationsToBN", "send"),
        ("TotalNumberOfSensorsFailures", "fail"),
        ("TotalNumberOfRecoveries", "rec"),
    ] {
        writeln!(w, "rewards \"{name}\"").unwrap();
        for i in 1..=n {
            writeln!(w, "[{action}{i}] true : 1;").unwrap();
        }
        writeln!(w, "endrewards\n").unwrap();
    }
    for i in 1..=n {
        writeln!(w, "rewards \"s{i}\"\n[send{i}] true : cSend;\nendrewards").unwrap();
    }
    Ok(s)
}

/// Builds the tower model.
pub fn build_tower(p: &TowerParams) -> Result<ModelIR, ModelsError> {
    parse_generated(&tower_text(p)?)
}
