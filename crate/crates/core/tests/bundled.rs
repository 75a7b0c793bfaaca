use std::fs;
use std::path::PathBuf;

use inrob_core::fem::parse_fem;
use inrob_core::harness::{execute_suite, MilInterpreter, Outcome, Subject};
use inrob_core::testgen::{generate_suite, print_suite, Step};
use inrob_core::{
    extend_model, parse_network, parse_rules, parse_test_purposes, CaseKind, GenerationConfig,
    Role, TimedNetwork,
};

fn asset(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets").join(name);
    fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

struct Bundle {
    nominal: TimedNetwork,
    extended: TimedNetwork,
    suite: inrob_core::TestSuite,
}

fn bundle() -> Bundle {
    let nominal = parse_network(&asset("obdh_slp.tioa")).unwrap();
    let rules = parse_rules(&asset("obdh_slp.drs"), Some(&nominal)).unwrap();
    let extended = extend_model(&nominal, &rules).unwrap();
    let purposes = parse_test_purposes(&asset("slp_purposes.tp")).unwrap();
    let faults = parse_fem(&asset("default.fem")).unwrap().faults;
    let suite = generate_suite(
        &nominal,
        &extended,
        &purposes,
        &faults,
        &rules,
        &GenerationConfig::default(),
    )
    .unwrap();
    Bundle {
        nominal,
        extended,
        suite,
    }
}

#[test]
fn suite_counts() {
    let b = bundle();
    println!("{}", print_suite(&b.suite));
    assert_eq!(b.suite.count(CaseKind::Nominal), 8);
    assert_eq!(b.suite.count(CaseKind::Robustness), 24);
}

fn mil(net: &TimedNetwork) -> impl Fn(Role) -> Result<Box<dyn Subject>, inrob_core::harness::AdapterError> + Sync + '_ {
    move |role| Ok(Box::new(MilInterpreter::new(net, role)) as Box<dyn Subject>)
}

#[test]
fn extended_slave_passes_everything() {
    let b = bundle();
    let report = execute_suite(&b.suite, &b.extended, &mil(&b.extended), true, 4).unwrap();
    println!("{}", report.to_text());
    assert!(report.verdicts.iter().all(|v| v.outcome == Outcome::Pass));
}

#[test]
fn nominal_slave_fails_the_deviations() {
    let b = bundle();
    let report = execute_suite(&b.suite, &b.nominal, &mil(&b.nominal), true, 4).unwrap();
    println!("{}", report.to_text());
    for v in &report.verdicts {
        let expect = if v.case_id.ends_with("/F1") || v.case_id.ends_with("/F2") {
            Outcome::Fail
        } else {
            Outcome::Pass
        };
        assert_eq!(v.outcome, expect, "{}", v.case_id);
    }
}

#[test]
fn data_requests_wait_out_the_collection_period() {
    let b = bundle();
    for c in &b.suite.cases {
        for (ch, at) in c.stimulus_times() {
            if ch == "req_data" {
                assert!(at >= 301, "{} sends req_data at {at}", c.id);
            }
        }
        assert!(c.steps.iter().all(|s| !matches!(s, Step::Stimulus { channel, .. } if channel == "window")));
    }
}
