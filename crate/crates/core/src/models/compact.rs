//! The compact whole-system model: one controller duty cycle, aggregated sensor and bone node
//! failure counters, and a repair service that fixes bone nodes first.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{fmt_real, parse_generated, ModelsError};
use crate::model::ModelIR;

/// Inputs of the compact model. Durations are in hours, costs in energy units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct GridParams {
    pub SIZE_BN: u32,
    pub MAX_BN_FAIL: u32,
    pub SIZE_SN: u32,
    pub MAX_SN_FAIL: u32,
    pub SLEEPTIME: f64,
    pub MEANTIMEBETWEENFAILURE_SN: f64,
    pub MEANTIMEBETWEENFAILURE_BN: f64,
    pub RECOVERYTIME_SN: f64,
    pub RECOVERYTIME_BN: f64,
    pub PROCESSTIME: f64,
    pub pCHEAPLINK: f64,
    pub cCHEAPTX: f64,
    pub cEXPENSIVETX: f64,
    pub cSNTX: f64,
    pub cSLEEP_BN: f64,
    pub cSLEEP_SN: f64,
    pub cPROCESS_BN: f64,
    pub cPROCESS_SN: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            SIZE_BN: 100,
            MAX_BN_FAIL: 5,
            SIZE_SN: 50,
            MAX_SN_FAIL: 50,
            SLEEPTIME: 1.0,
            MEANTIMEBETWEENFAILURE_SN: 24000.0,
            MEANTIMEBETWEENFAILURE_BN: 36000.0,
            RECOVERYTIME_SN: 48.0,
            RECOVERYTIME_BN: 36.0,
            PROCESSTIME: 0.001,
            pCHEAPLINK: 0.95,
            cCHEAPTX: 24.0,
            cEXPENSIVETX: 40.0,
            cSNTX: 8.0,
            cSLEEP_BN: 0.001,
            cSLEEP_SN: 0.001,
            cPROCESS_BN: 5.0,
            cPROCESS_SN: 2.0,
        }
    }
}

impl GridParams {
    fn counts(&self) -> [(&'static str, u32); 4] {
        [
            ("SIZE_BN", self.SIZE_BN),
            ("MAX_BN_FAIL", self.MAX_BN_FAIL),
            ("SIZE_SN", self.SIZE_SN),
            ("MAX_SN_FAIL", self.MAX_SN_FAIL),
        ]
    }

    fn durations(&self) -> [(&'static str, f64); 6] {
        [
            ("SLEEPTIME", self.SLEEPTIME),
            ("MEANTIMEBETWEENFAILURE_SN", self.MEANTIMEBETWEENFAILURE_SN),
            ("MEANTIMEBETWEENFAILURE_BN", self.MEANTIMEBETWEENFAILURE_BN),
            ("RECOVERYTIME_SN", self.RECOVERYTIME_SN),
            ("RECOVERYTIME_BN", self.RECOVERYTIME_BN),
            ("PROCESSTIME", self.PROCESSTIME),
        ]
    }

    fn costs(&self) -> [(&'static str, f64); 7] {
        [
            ("cCHEAPTX", self.cCHEAPTX),
            ("cEXPENSIVETX", self.cEXPENSIVETX),
            ("cSNTX", self.cSNTX),
            ("cSLEEP_BN", self.cSLEEP_BN),
            ("cSLEEP_SN", self.cSLEEP_SN),
            ("cPROCESS_BN", self.cPROCESS_BN),
            ("cPROCESS_SN", self.cPROCESS_SN),
        ]
    }

    pub fn check(&self) -> Result<(), ModelsError> {
        for (name, v) in self.counts() {
            if v < 1 {
                return Err(ModelsError::Invalid(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in self.durations() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelsError::Invalid(format!("{name} must be a positive duration, got {v}")));
            }
        }
        for (name, v) in self.costs() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ModelsError::Invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.pCHEAPLINK) {
            return Err(ModelsError::Invalid(format!("pCHEAPLINK must be a probability, got {}", self.pCHEAPLINK)));
        }
        if u64::from(self.MAX_SN_FAIL) > u64::from(self.SIZE_SN) * u64::from(self.SIZE_BN) {
            return Err(ModelsError::Invalid("MAX_SN_FAIL exceeds SIZE_SN*SIZE_BN".into()));
        }
        if self.MAX_BN_FAIL > self.SIZE_BN {
            return Err(ModelsError::Invalid("MAX_BN_FAIL exceeds SIZE_BN".into()));
        }
        Ok(())
    }
}

const BODY: &str = "
const double rSLEEP=1/SLEEPTIME;
const double rFAIL_SN=1/MEANTIMEBETWEENFAILURE_SN;
const double rFAIL_BN=1/MEANTIMEBETWEENFAILURE_BN;
const double rRECOVERY_SN=1/RECOVERYTIME_SN;
const double rRECOVERY_BN=1/RECOVERYTIME_BN;
const double rPROCESS=1/PROCESSTIME;

formula osnf = 1-(0.01*(failedSN/(SIZE_SN*SIZE_BN))); // operational sensor node factor
formula obnf = 1-(0.01*(failedBN/SIZE_BN)); // operational bone node factor

// Duty cycle: 1 = sleep, 2 = process
module controller
mode : [1..2] init 1;
[awakeup] mode=1 & failedBN<MAX_BN_FAIL & failedSN<MAX_SN_FAIL -> rSLEEP: (mode'=2);
[process] mode=2 & failedBN<MAX_BN_FAIL & failedSN<MAX_SN_FAIL -> rPROCESS: (mode'=1);
endmodule

module sensorNodes
failedSN : [0..MAX_SN_FAIL] init 0;
[failSN] failedSN<MAX_SN_FAIL -> osnf*rFAIL_SN: (failedSN'=failedSN+1);
[repairSN] failedSN>0 -> rRECOVERY_SN: (failedSN'=failedSN-1);
endmodule

module boneNodes
failedBN : [0..MAX_BN_FAIL] init 0;
[failBN] failedBN<MAX_BN_FAIL -> obnf*rFAIL_BN: (failedBN'=failedBN+1);
[repairBN] failedBN>0 -> rRECOVERY_BN: (failedBN'=failedBN-1);
endmodule

// Bone nodes are repaired first
module repairService
[repairBN] failedBN>0 -> true;
[repairSN] failedSN>0 & failedBN=0 -> true;
endmodule

rewards \"AvgEnergyBN\"
[awakeup] true : pCHEAPLINK*cCHEAPTX + (1-pCHEAPLINK)*cEXPENSIVETX;
mode=1 : cSLEEP_BN;
mode=2 : cPROCESS_BN;
endrewards

rewards \"AvgEnergySN\"
[awakeup] true : cSNTX;
mode=1 : cSLEEP_SN;
mode=2 : cPROCESS_SN;
endrewards
";

/// Model text for the compact model with the given inputs.
pub fn compact_text(p: &GridParams) -> Result<String, ModelsError> {
    p.check()?;
    let mut s = String::from("// Compact whole-system model; time unit: hour\nctmc\n\n");
    for (name, v) in p.counts() {
        writeln!(s, "const int {name}={v};").unwrap();
    }
    for (name, v) in p.durations() {
        writeln!(s, "const double {name}={};", fmt_real(v)).unwrap();
    }
    writeln!(s, "const double pCHEAPLINK={};", fmt_real(p.pCHEAPLINK)).unwrap();
    for (name, v) in p.costs() {
        writeln!(s, "const double {name}={};", fmt_real(v)).unwrap();
    }
    s.push_str(BODY);
    Ok(s)
}

/// Builds the compact model.
pub fn build_compact(p: &GridParams) -> Result<ModelIR, ModelsError> {
    parse_generated(&compact_text(p)?)
}
