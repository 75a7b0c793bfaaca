//! Flat transition tables and an interpreter that runs them.
//!
//! ```text
//! table obdh_slp slave
//! clocks c
//! init idle
//! inv acking c<=1
//! row idle acking cmd_start receive c<=60 c a1??????????????
//! row acking collecting ack emit - c 06
//! end
//! ```
//!
//! Row columns: source, target, channel, direction, guard (`-` or atoms joined
//! by `&`), resets (`-` or a comma list), payload. Emit rows carry the exact
//! bytes sent; receive rows carry a filter (`*`, hex with `??` wildcards, an
//! optional `!` prefix to negate, `-` for empty). Internal channels are listed
//! with `internal CHAN`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{AdapterError, Output, Subject, MAX_OUTPUTS_PER_INSTANT};
use crate::tioa::{Direction, Role, TimedNetwork};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub source: String,
    pub target: String,
    pub channel: String,
    pub emit: bool,
    pub guard: Vec<Atom>,
    pub resets: Vec<String>,
    pub payload: String,
}

/// `clock OP bound`, kept as text-level parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub clock: String,
    pub op: String,
    pub bound: u64,
}

impl Atom {
    fn eval(&self, v: u64) -> bool {
        match self.op.as_str() {
            "<" => v < self.bound,
            "<=" => v <= self.bound,
            "==" => v == self.bound,
            ">=" => v >= self.bound,
            ">" => v > self.bound,
            _ => false,
        }
    }

    fn latest(&self) -> Option<i128> {
        let b = i128::from(self.bound);
        match self.op.as_str() {
            "<" => Some(b - 1),
            "<=" | "==" => Some(b),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionTable {
    pub network: String,
    pub role: Role,
    pub clocks: Vec<String>,
    pub initial: String,
    pub internal: Vec<String>,
    pub invariants: BTreeMap<String, Vec<Atom>>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("table line {line}: {message}")]
pub struct TableError {
    pub line: usize,
    pub message: String,
}

pub fn export_table(net: &TimedNetwork, role: Role) -> TransitionTable {
    let ta = net.automaton(role);
    let atoms = |c: &crate::tioa::ClockConstraint| {
        c.conjuncts
            .iter()
            .map(|k| Atom {
                clock: k.clock.clone(),
                op: k.relation.symbol().to_string(),
                bound: k.bound,
            })
            .collect::<Vec<_>>()
    };
    TransitionTable {
        network: net.name.clone(),
        role,
        clocks: ta.clocks.clone(),
        initial: ta.initial.clone(),
        internal: net
            .channels
            .iter()
            .filter(|c| c.is_internal())
            .map(|c| c.id.clone())
            .collect(),
        invariants: ta
            .locations
            .iter()
            .filter(|l| !l.invariant.is_true())
            .map(|l| (l.name.clone(), atoms(&l.invariant)))
            .collect(),
        rows: ta
            .edges
            .iter()
            .map(|e| {
                let emit = e.direction == Direction::Emit;
                let payload = if emit {
                    let bytes = net.emitted_payload(e);
                    if bytes.is_empty() {
                        "-".to_string()
                    } else {
                        hex::encode(bytes)
                    }
                } else {
                    e.payload.to_string()
                };
                TableRow {
                    source: e.source.clone(),
                    target: e.target.clone(),
                    channel: e.channel.clone(),
                    emit,
                    guard: atoms(&e.guard),
                    resets: e.resets.clone(),
                    payload,
                }
            })
            .collect(),
    }
}

fn print_atoms(atoms: &[Atom]) -> String {
    if atoms.is_empty() {
        return "-".into();
    }
    atoms
        .iter()
        .map(|a| format!("{}{}{}", a.clock, a.op, a.bound))
        .collect::<Vec<_>>()
        .join("&")
}

fn list(items: &[String]) -> String {
    if items.is_empty() {
        "-".into()
    } else {
        items.join(",")
    }
}

pub fn print_table(t: &TransitionTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "table {} {}", t.network, t.role);
    let _ = writeln!(out, "clocks {}", list(&t.clocks));
    let _ = writeln!(out, "init {}", t.initial);
    for ch in &t.internal {
        let _ = writeln!(out, "internal {ch}");
    }
    for (loc, atoms) in &t.invariants {
        let _ = writeln!(out, "inv {loc} {}", print_atoms(atoms));
    }
    for r in &t.rows {
        let _ = writeln!(
            out,
            "row {} {} {} {} {} {} {}",
            r.source,
            r.target,
            r.channel,
            if r.emit { "emit" } else { "receive" },
            print_atoms(&r.guard),
            list(&r.resets),
            r.payload
        );
    }
    out.push_str("end\n");
    out
}

fn parse_atoms(text: &str) -> Result<Vec<Atom>, String> {
    if text == "-" {
        return Ok(Vec::new());
    }
    text.split('&')
        .map(|a| {
            let at = a
                .find(|c: char| "<>=".contains(c))
                .ok_or_else(|| format!("bad constraint `{a}`"))?;
            let rest = &a[at..];
            let op_len = rest.chars().take_while(|c| "<>=".contains(*c)).count();
            let op = &rest[..op_len];
            if !["<", "<=", "==", ">=", ">"].contains(&op) {
                return Err(format!("bad operator in `{a}`"));
            }
            let bound = rest[op_len..]
                .parse()
                .map_err(|_| format!("bad bound in `{a}`"))?;
            Ok(Atom {
                clock: a[..at].to_string(),
                op: op.to_string(),
                bound,
            })
        })
        .collect()
}

fn parse_list(text: &str) -> Vec<String> {
    if text == "-" {
        Vec::new()
    } else {
        text.split(',').map(str::to_string).collect()
    }
}

pub fn parse_table(text: &str) -> Result<TransitionTable, TableError> {
    let mut table: Option<TransitionTable> = None;
    let mut ended = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| TableError { line, message };
        let words: Vec<&str> = raw.split_whitespace().collect();
        if words.is_empty() || words[0].starts_with('#') {
            continue;
        }
        if ended {
            return Err(err("content after `end`".into()));
        }
        if let ["table", net, role] = words.as_slice() {
            if table.is_some() {
                return Err(err("duplicate header".into()));
            }
            table = Some(TransitionTable {
                network: net.to_string(),
                role: Role::parse(role).ok_or_else(|| err(format!("bad role `{role}`")))?,
                clocks: Vec::new(),
                initial: String::new(),
                internal: Vec::new(),
                invariants: BTreeMap::new(),
                rows: Vec::new(),
            });
            continue;
        }
        let t = table
            .as_mut()
            .ok_or_else(|| err("expected `table NET ROLE` header".into()))?;
        match words.as_slice() {
            ["clocks", cs] => t.clocks = parse_list(cs),
            ["init", loc] => t.initial = loc.to_string(),
            ["internal", ch] => t.internal.push(ch.to_string()),
            ["inv", loc, atoms] => {
                t.invariants
                    .insert(loc.to_string(), parse_atoms(atoms).map_err(err)?);
            }
            ["row", src, dst, ch, dir, guard, resets, payload] => {
                let emit = match *dir {
                    "emit" => true,
                    "receive" => false,
                    other => return Err(err(format!("bad direction `{other}`"))),
                };
                if emit && *payload != "-" && hex::decode(payload).is_err() {
                    return Err(err(format!("emit payload `{payload}` is not hex")));
                }
                if !emit && Filter::parse(payload).is_none() {
                    return Err(err(format!("bad payload filter `{payload}`")));
                }
                t.rows.push(TableRow {
                    source: src.to_string(),
                    target: dst.to_string(),
                    channel: ch.to_string(),
                    emit,
                    guard: parse_atoms(guard).map_err(err)?,
                    resets: parse_list(resets),
                    payload: payload.to_string(),
                });
            }
            ["end"] => ended = true,
            _ => return Err(err(format!("unrecognised line `{}`", raw.trim()))),
        }
    }
    let t = table.ok_or(TableError {
        line: 1,
        message: "empty table".into(),
    })?;
    if !ended {
        return Err(TableError {
            line: text.lines().count(),
            message: "missing `end`".into(),
        });
    }
    if t.initial.is_empty() {
        return Err(TableError {
            line: 1,
            message: "missing `init`".into(),
        });
    }
    Ok(t)
}

/// Receive-side payload filter.
#[derive(Debug, Clone)]
struct Filter {
    negate: bool,
    bytes: Option<Vec<Option<u8>>>,
}

impl Filter {
    fn parse(text: &str) -> Option<Filter> {
        if text == "*" {
            return Some(Filter {
                negate: false,
                bytes: None,
            });
        }
        let (negate, body) = match text.strip_prefix('!') {
            Some(b) => (true, b),
            None => (false, text),
        };
        if body == "-" {
            return Some(Filter {
                negate,
                bytes: Some(Vec::new()),
            });
        }
        let chars: Vec<char> = body.chars().collect();
        if chars.is_empty() || chars.len() % 2 == 1 {
            return None;
        }
        let bytes = chars
            .chunks(2)
            .map(|pair| {
                let s: String = pair.iter().collect();
                if s == "??" {
                    Some(None)
                } else {
                    u8::from_str_radix(&s, 16).ok().map(Some)
                }
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Filter {
            negate,
            bytes: Some(bytes),
        })
    }

    fn accepts(&self, payload: &[u8]) -> bool {
        let Some(bytes) = &self.bytes else {
            return true;
        };
        let hit = bytes.len() == payload.len()
            && bytes
                .iter()
                .zip(payload)
                .all(|(want, got)| want.is_none_or(|w| w == *got));
        hit != self.negate
    }
}

/// Runs a [`TransitionTable`] with the same observable policy as the direct
/// interpreter: eager outputs, first ready row wins, unmatched inputs dropped.
#[derive(Debug, Clone)]
pub struct TableInterpreter {
    table: TransitionTable,
    filters: Vec<Option<Filter>>,
    state: String,
    values: BTreeMap<String, u64>,
    now: u64,
    stuck: bool,
}

impl TableInterpreter {
    pub fn new(table: TransitionTable) -> Self {
        let filters = table
            .rows
            .iter()
            .map(|r| (!r.emit).then(|| Filter::parse(&r.payload)).flatten())
            .collect();
        let mut me = Self {
            filters,
            state: String::new(),
            values: BTreeMap::new(),
            now: 0,
            stuck: false,
            table,
        };
        me.restart();
        me
    }

    fn restart(&mut self) {
        self.state = self.table.initial.clone();
        self.values = self.table.clocks.iter().map(|c| (c.clone(), 0)).collect();
        self.now = 0;
        self.stuck = false;
    }

    fn sat(atoms: &[Atom], values: &BTreeMap<String, u64>) -> bool {
        atoms
            .iter()
            .all(|a| values.get(&a.clock).is_some_and(|&v| a.eval(v)))
    }

    fn inv_ok(&self, loc: &str, values: &BTreeMap<String, u64>) -> bool {
        self.table
            .invariants
            .get(loc)
            .is_none_or(|atoms| Self::sat(atoms, values))
    }

    fn after_resets(&self, row: &TableRow) -> BTreeMap<String, u64> {
        let mut v = self.values.clone();
        for c in &row.resets {
            if let Some(x) = v.get_mut(c) {
                *x = 0;
            }
        }
        v
    }

    fn ready(&self, idx: usize, channel: Option<(&str, &[u8])>) -> bool {
        let r = &self.table.rows[idx];
        if r.source != self.state || !Self::sat(&r.guard, &self.values) {
            return false;
        }
        match channel {
            None if !r.emit => return false,
            Some(_) if r.emit => return false,
            Some((ch, payload))
                if r.channel != ch || !self.filters[idx].as_ref().is_some_and(|f| f.accepts(payload)) =>
            {
                return false;
            }
            Some(_) => {}
            None => {}
        }
        self.inv_ok(&r.target, &self.after_resets(r))
    }

    fn slack(&self, row: &TableRow) -> Option<u64> {
        let inv = self.table.invariants.get(&row.source).map(Vec::as_slice).unwrap_or(&[]);
        row.guard
            .iter()
            .chain(inv)
            .filter_map(|a| {
                let v = i128::from(*self.values.get(&a.clock)?);
                a.latest().map(|hi| (hi - v).max(0) as u64)
            })
            .min()
    }

    fn fire(&mut self, idx: usize) -> Option<Output> {
        let row = self.table.rows[idx].clone();
        let out = (row.emit && !self.table.internal.contains(&row.channel)).then(|| Output {
            channel: row.channel.clone(),
            payload: if row.payload == "-" {
                Vec::new()
            } else {
                hex::decode(&row.payload).unwrap_or_default()
            },
            at: self.now,
            slack: self.slack(&row),
        });
        self.values = self.after_resets(&row);
        self.state = row.target;
        out
    }

    fn drain(&mut self) -> Result<Vec<Output>, AdapterError> {
        let mut out = Vec::new();
        if self.stuck {
            return Ok(out);
        }
        let mut fired = 0;
        while let Some(idx) = (0..self.table.rows.len()).find(|&i| self.ready(i, None)) {
            fired += 1;
            if fired > MAX_OUTPUTS_PER_INSTANT {
                return Err(AdapterError::Zeno(MAX_OUTPUTS_PER_INSTANT));
            }
            out.extend(self.fire(idx));
        }
        Ok(out)
    }
}

impl Subject for TableInterpreter {
    fn reset(&mut self) -> Result<(), AdapterError> {
        self.restart();
        Ok(())
    }

    fn advance(&mut self, now: u64) -> Result<Vec<Output>, AdapterError> {
        if now < self.now {
            return Err(AdapterError::TimeReversal { from: self.now, to: now });
        }
        if !self.stuck {
            let d = now - self.now;
            self.values.values_mut().for_each(|v| *v += d);
            if !self.inv_ok(&self.state.clone(), &self.values) {
                self.stuck = true;
            }
        }
        self.now = now;
        self.drain()
    }

    fn deliver(
        &mut self,
        channel: &str,
        payload: &[u8],
        now: u64,
    ) -> Result<Vec<Output>, AdapterError> {
        let mut out = self.advance(now)?;
        if self.stuck {
            return Ok(out);
        }
        if let Some(idx) = (0..self.table.rows.len()).find(|&i| self.ready(i, Some((channel, payload)))) {
            self.fire(idx);
            out.extend(self.drain()?);
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        format!("table:{}.{}", self.table.network, self.table.role)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "table n slave
clocks c
init i
inv busy c<=2
row i busy ping receive c>=3 c 01
row busy i pong emit c>=2 - 02
end
";

    #[test]
    fn round_trip() {
        let t = parse_table(TEXT).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(print_table(&t), TEXT);
    }

    #[test]
    fn runs_like_the_model() {
        let mut m = TableInterpreter::new(parse_table(TEXT).unwrap());
        assert!(m.deliver("ping", &[1], 1).unwrap().is_empty());
        assert!(m.deliver("ping", &[1], 3).unwrap().is_empty());
        let out = m.advance(5).unwrap();
        assert_eq!(out[0].payload, vec![2]);
        assert_eq!(out[0].slack, Some(0));
    }

    #[test]
    fn rejects_garbage() {
        assert_eq!(parse_table("row a b c emit - - 00\n").unwrap_err().line, 1);
        assert!(parse_table("table n slave\ninit i\n").is_err());
        assert!(parse_table("table n slave\ninit i\nrow a b c sideways - - 00\nend\n").is_err());
    }
}
