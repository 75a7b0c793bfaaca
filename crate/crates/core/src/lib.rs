//! Interoperability and robustness testing for master-slave subsystems
//! modelled as a pair of timed input/output automata.
//!
//! The pipeline: parse a network ([`dsl`]), extend it with deviation rules
//! ([`tioa::extend_model`]), generate nominal and robustness test cases
//! ([`testgen`]), and execute them against interpreted models or external
//! processes through a fault-injecting channel ([`fem`], [`harness`]).

pub mod dsl;
pub mod fem;
pub mod harness;
pub mod testgen;
pub mod tioa;

pub use dsl::{
    parse_network, parse_rules, parse_test_purposes, print_network, print_rules,
    print_test_purposes, Diagnostic,
};
pub use fem::{DelayClass, FaultModel, FaultSpec, FemConfig, FemMode, MessageSelector};
pub use harness::{
    execute_case, execute_suite, MilInterpreter, Outcome, RunReport, Subject, Verdict,
};
pub use testgen::{
    derive_robustness, generate_nominal, generate_suite, CaseKind, GenerationConfig, Step,
    TestCase, TestPurpose, TestPurposeSet, TestSuite,
};
pub use tioa::{
    extend_model, validate, ChannelEvent, DeviationRule, DeviationRuleSet, Direction, Role,
    TimedAutomaton, TimedNetwork,
};
