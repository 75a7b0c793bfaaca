//! Adapter descriptors: which implementation plays a role during `run`.
//!
//! ```text
//! mil              model interpreter of the extended network
//! mil:nominal      model interpreter of the network as written
//! mil:PATH.tioa    model interpreter of another network file
//! table:PATH       transition-table interpreter
//! stdio:COMMAND    external process speaking the wire protocol
//! tcp:HOST:PORT    external endpoint speaking the wire protocol
//! ```

use std::fmt;
use std::fs;
use std::str::FromStr;
use std::time::Duration;

use inrob_core::harness::{parse_table, AdapterError, ExternalSubject, TableInterpreter, TransitionTable};
use inrob_core::{parse_network, MilInterpreter, Role, Subject, TimedNetwork};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Descriptor {
    Mil,
    MilNominal,
    MilFile(String),
    Table(String),
    Stdio(String),
    Tcp(String),
}

impl FromStr for Descriptor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let need = |what: &str| {
            if arg.is_empty() {
                Err(format!("`{kind}:` needs {what}"))
            } else {
                Ok(arg.to_string())
            }
        };
        match kind {
            "mil" if arg.is_empty() => Ok(Descriptor::Mil),
            "mil" if arg == "nominal" => Ok(Descriptor::MilNominal),
            "mil" => Ok(Descriptor::MilFile(arg.into())),
            "table" => need("a table file").map(Descriptor::Table),
            "stdio" => need("a command").map(Descriptor::Stdio),
            "tcp" => need("HOST:PORT").map(Descriptor::Tcp),
            _ => Err(format!("unknown adapter `{s}` (mil, mil:nominal, mil:FILE, table:FILE, stdio:CMD, tcp:ADDR)")),
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Descriptor::Mil => f.write_str("mil"),
            Descriptor::MilNominal => f.write_str("mil:nominal"),
            Descriptor::MilFile(p) => write!(f, "mil:{p}"),
            Descriptor::Table(p) => write!(f, "table:{p}"),
            Descriptor::Stdio(c) => write!(f, "stdio:{c}"),
            Descriptor::Tcp(a) => write!(f, "tcp:{a}"),
        }
    }
}

/// A descriptor with its files already loaded, ready to build subjects on any thread.
pub enum Resolved {
    Model(TimedNetwork),
    Table(TransitionTable),
    Stdio(String),
    Tcp(String),
}

impl Resolved {
    pub fn load(
        d: &Descriptor,
        nominal: &TimedNetwork,
        extended: &TimedNetwork,
    ) -> Result<Self, String> {
        let read = |p: &str| fs::read_to_string(p).map_err(|e| format!("{p}: {e}"));
        Ok(match d {
            Descriptor::Mil => Resolved::Model(extended.clone()),
            Descriptor::MilNominal => Resolved::Model(nominal.clone()),
            Descriptor::MilFile(p) => Resolved::Model(parse_network(&read(p)?).map_err(|ds| {
                let first = ds.first().map(ToString::to_string).unwrap_or_default();
                format!("{p}: {first}")
            })?),
            Descriptor::Table(p) => Resolved::Table(parse_table(&read(p)?).map_err(|e| format!("{p}: {e}"))?),
            Descriptor::Stdio(c) => Resolved::Stdio(c.clone()),
            Descriptor::Tcp(a) => Resolved::Tcp(a.clone()),
        })
    }

    pub fn build(&self, role: Role, unit: Duration) -> Result<Box<dyn Subject>, AdapterError> {
        Ok(match self {
            Resolved::Model(net) => Box::new(MilInterpreter::new(net, role)),
            Resolved::Table(t) => Box::new(TableInterpreter::new(t.clone())),
            Resolved::Stdio(c) => Box::new(ExternalSubject::spawn(c, unit)?),
            Resolved::Tcp(a) => Box::new(ExternalSubject::connect(a, unit)?),
        })
    }
}
