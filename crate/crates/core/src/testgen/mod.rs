//! Test generation: nominal test cases by on-the-fly exploration of a
//! network steered by a test purpose, and robustness test cases derived by
//! pairing each nominal case with one emulated fault.

mod robust;
mod search;
mod suite;

use std::fmt;

use thiserror::Error;

pub use robust::{derive_robustness, resolve_selector, DeriveError};
pub use search::{generate_nominal, GenError};
pub use suite::{generate_suite, parse_suite, print_suite, SuiteError, SuiteFailure, TestSuite};

use crate::fem::FaultSpec;
use crate::tioa::{Direction, PayloadMatcher, Role, TimedNetwork};

/// One expected observation of a test purpose.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObservationPattern {
    pub channel: String,
    pub direction: Direction,
    pub payload: PayloadMatcher,
    /// Offsets relative to the previous matched observation; `None` means `(0, horizon)`.
    pub window: Option<(u64, u64)>,
}

impl ObservationPattern {
    pub fn new(channel: impl Into<String>, direction: Direction) -> Self {
        Self {
            channel: channel.into(),
            direction,
            payload: PayloadMatcher::Any,
            window: None,
        }
    }

    pub fn matches(&self, channel: &str, direction: Direction, payload: &[u8]) -> bool {
        self.channel == channel && self.direction == direction && self.payload.matches(payload)
    }

    pub fn window_or(&self, horizon: u64) -> (u64, u64) {
        self.window.unwrap_or((0, horizon))
    }
}

impl fmt::Display for ObservationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.channel, self.direction)?;
        if !self.payload.is_any() {
            write!(f, " payload {}", self.payload)?;
        }
        if let Some((lo, hi)) = self.window {
            write!(f, " within {lo}..{hi}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TestPurpose {
    pub name: String,
    pub patterns: Vec<ObservationPattern>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TestPurposeSet {
    pub purposes: Vec<TestPurpose>,
}

impl TestPurposeSet {
    /// Every pattern names a channel of `net`.
    pub fn check(&self, net: &TimedNetwork) -> Result<(), GenError> {
        for p in &self.purposes {
            for pat in &p.patterns {
                if net.channel(&pat.channel).is_none() {
                    return Err(GenError::UnknownChannel {
                        purpose: p.name.clone(),
                        channel: pat.channel.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Step {
    /// A message the testing system sends to the subject, `after` time units past the previous step.
    Stimulus {
        channel: String,
        payload: Vec<u8>,
        after: u64,
    },
    /// A message the subject must emit; its window is relative to the previous step.
    Expectation(ObservationPattern),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseKind {
    Nominal,
    Robustness,
}

impl CaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseKind::Nominal => "nominal",
            CaseKind::Robustness => "robustness",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nominal" => Some(CaseKind::Nominal),
            "robustness" => Some(CaseKind::Robustness),
            _ => None,
        }
    }
}

/// One fired model edge of the trace a case was generated from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceEntry {
    pub time: u64,
    pub role: Role,
    pub edge: usize,
    pub partner: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TestCase {
    pub id: String,
    pub kind: CaseKind,
    pub purpose: String,
    pub sut: Role,
    pub steps: Vec<Step>,
    pub fault: Option<FaultSpec>,
    pub trace: Vec<TraceEntry>,
}

impl TestCase {
    /// Absolute send times of the stimuli, assuming every expectation is observed at the
    /// lower edge of its window.
    pub fn stimulus_times(&self) -> Vec<(String, u64)> {
        let mut t = 0;
        let mut out = Vec::new();
        for step in &self.steps {
            match step {
                Step::Stimulus { channel, after, .. } => {
                    t += after;
                    out.push((channel.clone(), t));
                }
                Step::Expectation(p) => t += p.window.map_or(0, |w| w.0),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DelayPolicy {
    /// Only delays that make some guard, invariant or window bound tight.
    Boundary,
    /// Every integer delay up to the horizon.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GenerationConfig {
    pub horizon: u64,
    pub max_depth: usize,
    pub delays: DelayPolicy,
    pub seed: u64,
    /// Role whose emissions become expectations.
    pub sut: Role,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            horizon: 1000,
            max_depth: 32,
            delays: DelayPolicy::Boundary,
            seed: 0,
            sut: Role::Slave,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("horizon must be at least 1")]
    Horizon,
    #[error("max depth must be at least 1")]
    Depth,
}

impl GenerationConfig {
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.horizon == 0 {
            return Err(ConfigError::Horizon);
        }
        if self.max_depth == 0 {
            return Err(ConfigError::Depth);
        }
        Ok(())
    }
}
