//! `.fem` files:
//!
//! ```text
//! mode active
//! fault delay cmd_start#1 d=70
//! fault bitflip cmd_start#1 byte=0 bit=0
//! fault verbose cmd_start#1 n=2 period=1
//! ```

use std::fmt::Write as _;

use super::{DelayClass, FaultModel, FaultSpec, FemError, FemMode, MessageSelector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FemFile {
    pub mode: FemMode,
    pub faults: Vec<FaultSpec>,
}

pub fn parse_fem(text: &str) -> Result<FemFile, FemError> {
    let mut mode = None;
    let mut faults = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let tokens: Vec<&str> = raw
            .split_whitespace()
            .take_while(|t| !t.starts_with('#'))
            .collect();
        let syntax = |message: String| FemError::Syntax { line, message };
        match tokens.as_slice() {
            [] => {}
            ["mode", m] => {
                mode = Some(match *m {
                    "passthrough" => FemMode::PassThrough,
                    "active" => FemMode::Active,
                    other => return Err(syntax(format!("unknown mode `{other}`"))),
                });
            }
            ["fault", rest @ ..] => faults.push(parse_fault(rest).map_err(syntax)?),
            [other, ..] => return Err(syntax(format!("unexpected `{other}`"))),
        }
    }
    let mode = mode.unwrap_or(if faults.is_empty() {
        FemMode::PassThrough
    } else {
        FemMode::Active
    });
    Ok(FemFile { mode, faults })
}

/// Parses the tokens after the `fault` keyword.
pub(crate) fn parse_fault(tokens: &[&str]) -> Result<FaultSpec, String> {
    let [kind, selector, params @ ..] = tokens else {
        return Err("expected `fault KIND SELECTOR PARAMS`".into());
    };
    let target = parse_selector(selector)?;
    let mut values = Vec::new();
    let mut classification = None;
    let mut iter = params.iter();
    while let Some(p) = iter.next() {
        if *p == "class" {
            classification = Some(match iter.next().copied() {
                Some("minor") => DelayClass::Minor,
                Some("major") => DelayClass::Major,
                other => return Err(format!("bad class `{}`", other.unwrap_or(""))),
            });
            continue;
        }
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| format!("expected KEY=INT, found `{p}`"))?;
        let v: u64 = v.parse().map_err(|_| format!("`{k}` needs an integer, found `{v}`"))?;
        values.push((k, v));
    }
    let keys: Vec<&str> = values.iter().map(|(k, _)| *k).collect();
    let get = |i: usize| values[i].1;
    let model = match (*kind, keys.as_slice()) {
        ("delay", ["d"]) => FaultModel::Delay { d: get(0) },
        ("bitflip", ["byte", "bit"]) => FaultModel::BitFlip {
            byte: get(0) as usize,
            bit: u8::try_from(get(1)).map_err(|_| "bit out of range".to_string())?,
        },
        ("verbose", ["n", "period"]) => FaultModel::Verbose {
            count: u32::try_from(get(0)).map_err(|_| "n out of range".to_string())?,
            period: get(1),
        },
        ("delay", _) => return Err("delay takes `d=INT`".into()),
        ("bitflip", _) => return Err("bitflip takes `byte=INT bit=INT`".into()),
        ("verbose", _) => return Err("verbose takes `n=INT period=INT`".into()),
        (other, _) => return Err(format!("unknown fault model `{other}`")),
    };
    Ok(FaultSpec {
        model,
        target,
        classification,
    })
}

fn parse_selector(text: &str) -> Result<MessageSelector, String> {
    if let Some(step) = text.strip_prefix('@') {
        return step
            .parse()
            .map(MessageSelector::Step)
            .map_err(|_| format!("bad step selector `{text}`"));
    }
    let (channel, ord) = text
        .split_once('#')
        .ok_or_else(|| format!("selector must be CHAN#ORD or @STEP, found `{text}`"))?;
    let ordinal = ord
        .parse()
        .map_err(|_| format!("bad occurrence ordinal in `{text}`"))?;
    if channel.is_empty() {
        return Err(format!("missing channel in `{text}`"));
    }
    Ok(MessageSelector::Channel {
        channel: channel.to_string(),
        ordinal,
    })
}

pub fn print_fault(f: &FaultSpec) -> String {
    let mut out = match f.model {
        FaultModel::Delay { d } => format!("fault delay {} d={d}", f.target),
        FaultModel::BitFlip { byte, bit } => {
            format!("fault bitflip {} byte={byte} bit={bit}", f.target)
        }
        FaultModel::Verbose { count, period } => {
            format!("fault verbose {} n={count} period={period}", f.target)
        }
    };
    if let Some(c) = f.classification {
        let _ = write!(out, " class {}", c.as_str());
    }
    out
}

pub fn print_fem(file: &FemFile) -> String {
    let mut out = format!("mode {}\n", file.mode.as_str());
    for f in &file.faults {
        out.push_str(&print_fault(f));
        out.push('\n');
    }
    out
}
