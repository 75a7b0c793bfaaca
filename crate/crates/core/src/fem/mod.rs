//! Failure emulator: a channel interceptor that delays, corrupts or floods
//! messages exchanged between the two subjects under test.

mod config;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub(crate) use config::parse_fault;
pub use config::{parse_fem, print_fault, print_fem, FemFile};

use crate::tioa::{
    awaited_edges, ChannelEvent, DeviationRuleSet, Provenance, TimedNetwork,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultModel {
    /// Deliver `d` time units after sending.
    Delay { d: u64 },
    /// XOR one bit of one payload byte.
    BitFlip { byte: usize, bit: u8 },
    /// Repeat the message `count` more times, `period` apart.
    Verbose { count: u32, period: u64 },
}

impl FaultModel {
    pub fn name(&self) -> &'static str {
        match self {
            FaultModel::Delay { .. } => "delay",
            FaultModel::BitFlip { .. } => "bitflip",
            FaultModel::Verbose { .. } => "verbose",
        }
    }
}

/// Which message a fault applies to.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MessageSelector {
    /// The `ordinal`-th (1-based) message on `channel` passing the interceptor.
    Channel { channel: String, ordinal: u32 },
    /// The stimulus at this step index of a test case.
    Step(usize),
}

impl fmt::Display for MessageSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MessageSelector::Channel { channel, ordinal } => write!(f, "{channel}#{ordinal}"),
            MessageSelector::Step(k) => write!(f, "@{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DelayClass {
    Minor,
    Major,
}

impl DelayClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DelayClass::Minor => "minor",
            DelayClass::Major => "major",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FaultSpec {
    pub model: FaultModel,
    pub target: MessageSelector,
    /// Derived for delay faults when a deviation rule covers the target channel.
    pub classification: Option<DelayClass>,
}

impl FaultSpec {
    pub fn new(model: FaultModel, target: MessageSelector) -> Self {
        Self {
            model,
            target,
            classification: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FemError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("fault targets unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("bit-flip byte {byte} out of range for `{channel}` ({len} bytes)")]
    ByteOutOfRange {
        channel: String,
        byte: usize,
        len: usize,
    },
    #[error("bit index {0} out of range 0..=7")]
    BitOutOfRange(u8),
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("step selector {0} must be resolved to a channel occurrence first")]
    Unresolved(MessageSelector),
    #[error("pass-through mode cannot carry active faults")]
    PassThroughWithFaults,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FemMode {
    PassThrough,
    Active,
}

impl FemMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FemMode::PassThrough => "passthrough",
            FemMode::Active => "active",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub input: ChannelEvent,
    pub output: Vec<ChannelEvent>,
    /// Index into the active fault list.
    pub fault: Option<usize>,
}

/// Interceptor state for one execution session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FemConfig {
    mode: FemMode,
    faults: Vec<FaultSpec>,
    log: Vec<LogRecord>,
    seen: BTreeMap<String, u32>,
}

impl FemConfig {
    pub fn pass_through() -> Self {
        Self {
            mode: FemMode::PassThrough,
            faults: Vec::new(),
            log: Vec::new(),
            seen: BTreeMap::new(),
        }
    }

    /// Active interceptor. Every fault is checked against the channel schemas of `net`.
    pub fn active(faults: Vec<FaultSpec>, net: &TimedNetwork) -> Result<Self, FemError> {
        for f in &faults {
            check_fault(f, net)?;
        }
        Ok(Self {
            mode: FemMode::Active,
            faults,
            log: Vec::new(),
            seen: BTreeMap::new(),
        })
    }

    pub fn from_file(file: &FemFile, net: &TimedNetwork) -> Result<Self, FemError> {
        match file.mode {
            FemMode::PassThrough if file.faults.is_empty() => Ok(Self::pass_through()),
            FemMode::PassThrough => Err(FemError::PassThroughWithFaults),
            FemMode::Active => Self::active(file.faults.clone(), net),
        }
    }

    pub fn mode(&self) -> FemMode {
        self.mode
    }

    pub fn faults(&self) -> &[FaultSpec] {
        &self.faults
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    /// Passes one event through the interceptor and returns what reaches the receiver.
    pub fn intercept(&mut self, ev: ChannelEvent) -> Vec<ChannelEvent> {
        let ordinal = {
            let n = self.seen.entry(ev.channel.clone()).or_insert(0);
            *n += 1;
            *n
        };
        let hit = match self.mode {
            FemMode::PassThrough => None,
            FemMode::Active => self.faults.iter().position(|f| {
                matches!(&f.target, MessageSelector::Channel { channel, ordinal: o }
                    if *channel == ev.channel && *o == ordinal)
            }),
        };
        let output = match hit {
            None => vec![ev.clone()],
            Some(k) => apply(&self.faults[k].model, &ev),
        };
        self.log.push(LogRecord {
            input: ev,
            output: output.clone(),
            fault: hit,
        });
        output
    }
}

fn check_fault(f: &FaultSpec, net: &TimedNetwork) -> Result<(), FemError> {
    let MessageSelector::Channel { channel, ordinal } = &f.target else {
        return Err(FemError::Unresolved(f.target.clone()));
    };
    let ch = net
        .channel(channel)
        .ok_or_else(|| FemError::UnknownChannel(channel.clone()))?;
    if *ordinal == 0 {
        return Err(FemError::NotPositive("occurrence ordinal"));
    }
    match f.model {
        FaultModel::Delay { d: 0 } => Err(FemError::NotPositive("delay")),
        FaultModel::BitFlip { bit, .. } if bit > 7 => Err(FemError::BitOutOfRange(bit)),
        FaultModel::BitFlip { byte, .. } if byte >= ch.payload_len() => {
            Err(FemError::ByteOutOfRange {
                channel: channel.clone(),
                byte,
                len: ch.payload_len(),
            })
        }
        FaultModel::Verbose { count: 0, .. } => Err(FemError::NotPositive("verbose count")),
        FaultModel::Verbose { period: 0, .. } => Err(FemError::NotPositive("verbose period")),
        _ => Ok(()),
    }
}

fn apply(model: &FaultModel, ev: &ChannelEvent) -> Vec<ChannelEvent> {
    match *model {
        FaultModel::Delay { d } => vec![ChannelEvent {
            deliver_at: ev.sent_at + d,
            provenance: Provenance::FemMutated,
            ..ev.clone()
        }],
        FaultModel::BitFlip { byte, bit } => {
            let mut out = ChannelEvent {
                provenance: Provenance::FemMutated,
                ..ev.clone()
            };
            // Out-of-range targets are rejected when the config is built.
            if let Some(b) = out.payload.get_mut(byte) {
                *b ^= 1 << bit;
            }
            vec![out]
        }
        FaultModel::Verbose { count, period } => {
            let mut out = vec![ev.clone()];
            out.extend((1..=u64::from(count)).map(|k| ChannelEvent {
                deliver_at: ev.deliver_at + k * period,
                provenance: Provenance::FemInjected,
                ..ev.clone()
            }));
            out
        }
    }
}

/// Pending deliveries, kept stably sorted by delivery time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeliveryQueue {
    events: Vec<ChannelEvent>,
}

impl DeliveryQueue {
    pub fn push(&mut self, ev: ChannelEvent) {
        let at = self.events.partition_point(|e| e.deliver_at <= ev.deliver_at);
        self.events.insert(at, ev);
    }

    /// Removes and returns every event due at or before `now`, in delivery order.
    pub fn pop_due(&mut self, now: u64) -> Vec<ChannelEvent> {
        let n = self.events.partition_point(|e| e.deliver_at <= now);
        self.events.drain(..n).collect()
    }

    pub fn next_due(&self) -> Option<u64> {
        self.events.first().map(|e| e.deliver_at)
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("no deviation rule awaits channel `{0}`")]
    Unclassifiable(String),
    #[error("lateness 0 is not a timing deviation")]
    NotADeviation,
}

/// Minor when the lateness past the awaited deadline stays within the rule's tolerance.
pub fn classify_delay(
    net: &TimedNetwork,
    rules: &DeviationRuleSet,
    channel: &str,
    lateness: u64,
) -> Result<DelayClass, ClassifyError> {
    let rule = rules
        .rules
        .iter()
        .find(|r| awaited_edges(net.automaton(r.role), r).any(|(_, e, _)| e.channel == channel))
        .ok_or_else(|| ClassifyError::Unclassifiable(channel.to_string()))?;
    if lateness == 0 {
        return Err(ClassifyError::NotADeviation);
    }
    Ok(if lateness <= rule.tolerance {
        DelayClass::Minor
    } else {
        DelayClass::Major
    })
}
