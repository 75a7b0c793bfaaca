//! Fixtures shared by the benchmarks.

use std::fs;
use std::path::PathBuf;

use inrob_core::fem::parse_fem;
use inrob_core::{
    extend_model, parse_network, parse_rules, parse_test_purposes, DeviationRuleSet, FaultSpec,
    TestPurposeSet, TimedNetwork,
};

pub struct Bundle {
    pub nominal: TimedNetwork,
    pub extended: TimedNetwork,
    pub purposes: TestPurposeSet,
    pub rules: DeviationRuleSet,
    pub faults: Vec<FaultSpec>,
}

pub fn asset_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn read(name: &str) -> String {
    fs::read_to_string(asset_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// The bundled OBDH/SLP assets, parsed and extended.
pub fn bundle() -> Bundle {
    let nominal = parse_network(&read("obdh_slp.tioa")).expect("bundled network parses");
    let rules = parse_rules(&read("obdh_slp.drs"), Some(&nominal)).expect("bundled rules parse");
    let extended = extend_model(&nominal, &rules).expect("bundled rules apply");
    let purposes = parse_test_purposes(&read("slp_purposes.tp")).expect("bundled purposes parse");
    let faults = parse_fem(&read("default.fem")).expect("bundled faults parse").faults;
    Bundle {
        nominal,
        extended,
        purposes,
        rules,
        faults,
    }
}
