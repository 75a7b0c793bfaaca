//! Test execution: subjects (interpreted models or external processes), the
//! session loop that plays a test case against one subject through the FEM,
//! and verdict reports.

mod external;
mod interpreter;
mod report;
mod session;
mod table;
mod wire;

use thiserror::Error;

pub use external::{serve_mil, ExternalSubject, RealTimeClock};
pub use interpreter::MilInterpreter;
pub use report::{
    aggregate, merge_reports, parse_report, render_aggregate, AggregateRow, Outcome, ReportError,
    RunReport, Tally,
};
pub use session::{
    execute_case, execute_suite, LogEntry, LogKind, SessionError, SubjectFactory, Verdict,
};
pub use table::{
    export_table, parse_table, print_table, Atom, TableError, TableInterpreter, TableRow,
    TransitionTable,
};
pub use wire::{WireError, WireMessage};

/// One message emitted by a subject.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Output {
    pub channel: String,
    pub payload: Vec<u8>,
    pub at: u64,
    /// Remaining time the emitting edge would have stayed enabled; `None` when unbounded.
    pub slack: Option<u64>,
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("subject `{0}` cannot be reset")]
    ResetUnsupported(String),
    #[error("time moved backwards from {from} to {to}")]
    TimeReversal { from: u64, to: u64 },
    #[error("subject exceeded {0} consecutive outputs in one instant")]
    Zeno(usize),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("timed out waiting for `{0}`")]
    Timeout(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A system playing one role of a network.
///
/// Time is driven by the caller: `advance` is invoked once per instant in
/// increasing order, and `deliver` hands over a message at the current instant.
pub trait Subject: Send {
    fn reset(&mut self) -> Result<(), AdapterError>;

    /// Moves the subject to `now` and returns whatever it emits at that instant.
    fn advance(&mut self, now: u64) -> Result<Vec<Output>, AdapterError>;

    /// Hands one message to the subject and returns what it emits in response at `now`.
    fn deliver(&mut self, channel: &str, payload: &[u8], now: u64)
        -> Result<Vec<Output>, AdapterError>;

    fn describe(&self) -> String;
}

/// Upper bound on outputs a subject may produce within a single instant.
pub const MAX_OUTPUTS_PER_INSTANT: usize = 64;
