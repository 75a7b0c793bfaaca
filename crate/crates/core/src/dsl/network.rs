use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::lexer::{Cursor, Diagnostic, PResult, Token};
use super::ModelDocument;
use crate::tioa::{
    validate, Channel, ClockConstraint, Conjunct, Direction, Edge, Location, LocationKind, Origin,
    PayloadField, PayloadMatcher, Relation, Role, TimedAutomaton, TimedNetwork,
};

type Spans = BTreeMap<String, (usize, usize)>;

fn at(tok: &Token) -> (usize, usize) {
    (tok.line, tok.col)
}

/// Parses and validates a `.tioa` document.
pub fn parse_network(text: &str) -> Result<TimedNetwork, Vec<Diagnostic>> {
    parse_network_document(text).map(|d| d.value)
}

pub fn parse_network_document(text: &str) -> Result<ModelDocument<TimedNetwork>, Vec<Diagnostic>> {
    let mut spans = Spans::new();
    let (net, header) = parse_syntax(text, &mut spans).map_err(|d| vec![d])?;
    let report = validate(&net);
    if !report.is_valid() {
        return Err(report
            .errors
            .iter()
            .map(|issue| {
                let (line, col) = spans.get(&issue.node).copied().unwrap_or(header);
                Diagnostic::new(line, col, issue.to_string())
            })
            .collect());
    }
    Ok(ModelDocument {
        source: text.to_string(),
        value: net,
        spans,
    })
}

fn parse_syntax(text: &str, spans: &mut Spans) -> PResult<(TimedNetwork, (usize, usize))> {
    let mut cur = Cursor::new(text)?;
    let kw = cur.expect_keyword("network")?;
    let header = at(&kw);
    let (name, _) = cur.ident("network name")?;
    cur.expect_sym("{")?;

    let mut time_unit = None;
    let mut channels = Vec::new();
    let mut master = None;
    let mut slave = None;
    while !cur.at_sym("}") {
        if cur.at_word("timeunit") {
            cur.next();
            time_unit = Some(cur.word("time unit label")?.0);
            cur.expect_sym(";")?;
        } else if cur.at_word("channel") {
            let tok = cur.next();
            let ch = parse_channel(&mut cur)?;
            spans.insert(format!("channel.{}", ch.id), at(&tok));
            channels.push(ch);
        } else if cur.at_word("automaton") {
            let tok = cur.next();
            let (role_word, role_tok) = cur.word("role")?;
            let role = Role::parse(&role_word).ok_or_else(|| {
                Diagnostic::new(
                    role_tok.line,
                    role_tok.col,
                    format!("role must be `master` or `slave`, found `{role_word}`"),
                )
            })?;
            spans.insert(role.as_str().to_string(), at(&tok));
            let ta = parse_automaton(&mut cur, role, &tok, spans)?;
            let slot = match role {
                Role::Master => &mut master,
                Role::Slave => &mut slave,
            };
            if slot.is_some() {
                return Err(Diagnostic::new(
                    tok.line,
                    tok.col,
                    format!("duplicate {role} automaton"),
                ));
            }
            *slot = Some(ta);
        } else {
            return Err(cur.error_here(format!(
                "expected `timeunit`, `channel`, `automaton` or `}}`, found {}",
                cur.peek().tok
            )));
        }
    }
    let close = cur.expect_sym("}")?;
    if !cur.at_eof() {
        return Err(cur.error_here("trailing input after network"));
    }
    let missing = |role: &str| {
        Diagnostic::new(close.line, close.col, format!("network requires a {role} automaton"))
    };
    let master = master.ok_or_else(|| missing("master"))?;
    let slave = slave.ok_or_else(|| missing("slave"))?;
    let net = TimedNetwork::new(
        name,
        time_unit.unwrap_or_else(|| "unit".into()),
        channels,
        master,
        slave,
    );
    Ok((net, header))
}

fn parse_channel(cur: &mut Cursor) -> PResult<Channel> {
    let (id, _) = cur.ident("channel id")?;
    let sender = parse_role(cur)?;
    cur.expect_sym("->")?;
    let receiver = parse_role(cur)?;
    let mut fields = Vec::new();
    let mut deadline_slack = None;
    loop {
        if cur.at_word("payload") {
            cur.next();
            cur.expect_sym("(")?;
            while !cur.at_sym(")") {
                let (name, _) = cur.ident("field name")?;
                cur.expect_sym(":")?;
                let len = cur.integer("field length")? as usize;
                fields.push(PayloadField { name, len });
                if !cur.eat_sym(",") {
                    break;
                }
            }
            cur.expect_sym(")")?;
        } else if cur.at_word("slack") {
            cur.next();
            deadline_slack = Some(cur.integer("slack")?);
        } else {
            break;
        }
    }
    cur.expect_sym(";")?;
    Ok(Channel {
        id,
        sender,
        receiver,
        fields,
        deadline_slack,
    })
}

fn parse_role(cur: &mut Cursor) -> PResult<Role> {
    let (w, tok) = cur.word("role")?;
    Role::parse(&w).ok_or_else(|| {
        Diagnostic::new(
            tok.line,
            tok.col,
            format!("role must be `master` or `slave`, found `{w}`"),
        )
    })
}

fn parse_automaton(
    cur: &mut Cursor,
    role: Role,
    head: &Token,
    spans: &mut Spans,
) -> PResult<TimedAutomaton> {
    let name = if cur.at_sym("{") {
        role.as_str().to_string()
    } else {
        cur.ident("automaton name")?.0
    };
    cur.expect_sym("{")?;
    let mut clocks = Vec::new();
    let mut initial = None;
    let mut locations = Vec::new();
    let mut edges = Vec::new();
    while !cur.at_sym("}") {
        if cur.at_word("clock") {
            cur.next();
            loop {
                clocks.push(cur.ident("clock name")?.0);
                if !cur.eat_sym(",") {
                    break;
                }
            }
            cur.expect_sym(";")?;
        } else if cur.at_word("init") {
            cur.next();
            initial = Some(cur.ident("initial location")?.0);
            cur.expect_sym(";")?;
        } else if cur.at_word("loc") {
            let tok = cur.next();
            let loc = parse_location(cur)?;
            spans.insert(format!("{role}.loc.{}", loc.name), at(&tok));
            locations.push(loc);
        } else if cur.at_word("edge") {
            let tok = cur.next();
            spans.insert(format!("{role}.edge.{}", edges.len()), at(&tok));
            edges.push(parse_edge(cur)?);
        } else {
            return Err(cur.error_here(format!(
                "expected `clock`, `init`, `loc`, `edge` or `}}`, found {}",
                cur.peek().tok
            )));
        }
    }
    cur.expect_sym("}")?;
    let initial = initial
        .ok_or_else(|| Diagnostic::new(head.line, head.col, "automaton requires init"))?;
    Ok(TimedAutomaton {
        name,
        clocks,
        locations,
        edges,
        initial,
    })
}

fn parse_location(cur: &mut Cursor) -> PResult<Location> {
    let (name, _) = cur.ident("location name")?;
    let mut loc = Location::new(name);
    loop {
        if cur.at_word("inv") {
            cur.next();
            loc.invariant = parse_constraint(cur)?;
        } else if cur.at_word("kind") {
            cur.next();
            let (k, tok) = cur.word("location kind")?;
            loc.kind = LocationKind::parse(&k).ok_or_else(|| {
                Diagnostic::new(tok.line, tok.col, format!("unknown location kind `{k}`"))
            })?;
        } else {
            break;
        }
    }
    cur.expect_sym(";")?;
    Ok(loc)
}

fn parse_edge(cur: &mut Cursor) -> PResult<Edge> {
    let (source, _) = cur.ident("source location")?;
    cur.expect_sym("->")?;
    let (target, _) = cur.ident("target location")?;
    cur.expect_keyword("on")?;
    let (channel, _) = cur.ident("channel id")?;
    let (dir, tok) = cur.word("`emit` or `receive`")?;
    let direction = Direction::parse(&dir).ok_or_else(|| {
        Diagnostic::new(
            tok.line,
            tok.col,
            format!("expected `emit` or `receive`, found `{dir}`"),
        )
    })?;
    let mut edge = Edge::new(source, target, channel, direction);
    loop {
        if cur.at_word("guard") {
            cur.next();
            edge.guard = parse_constraint(cur)?;
        } else if cur.at_word("reset") {
            cur.next();
            loop {
                edge.resets.push(cur.ident("clock name")?.0);
                if !cur.eat_sym(",") {
                    break;
                }
            }
        } else if cur.at_word("payload") {
            cur.next();
            let (p, tok) = cur.word("payload pattern")?;
            edge.payload = PayloadMatcher::parse(&p).ok_or_else(|| {
                Diagnostic::new(tok.line, tok.col, format!("malformed payload pattern `{p}`"))
            })?;
        } else if cur.at_word("origin") {
            cur.next();
            let (o, tok) = cur.word("origin")?;
            edge.origin = Origin::parse(&o).ok_or_else(|| {
                Diagnostic::new(tok.line, tok.col, format!("unknown origin `{o}`"))
            })?;
        } else {
            break;
        }
    }
    cur.expect_sym(";")?;
    Ok(edge)
}

pub(crate) fn parse_constraint(cur: &mut Cursor) -> PResult<ClockConstraint> {
    if cur.at_word("true") {
        cur.next();
        return Ok(ClockConstraint::truth());
    }
    let mut conjuncts = Vec::new();
    loop {
        let (clock, _) = cur.ident("clock name")?;
        let tok = cur.next();
        let relation = match &tok.tok {
            super::lexer::Tok::Sym(s) => Relation::parse(s),
            _ => None,
        }
        .ok_or_else(|| {
            Diagnostic::new(tok.line, tok.col, format!("expected a relation, found {}", tok.tok))
        })?;
        let bound = cur.integer("integer bound")?;
        conjuncts.push(Conjunct::new(clock, relation, bound));
        if !cur.eat_sym("&&") {
            break;
        }
    }
    Ok(ClockConstraint::new(conjuncts))
}

/// Canonical text: one declaration per line, channels sorted, master before slave.
pub fn print_network(net: &TimedNetwork) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "network {} {{", net.name);
    let _ = writeln!(out, "  timeunit {};", net.time_unit);
    let mut channels: Vec<&Channel> = net.channels.iter().collect();
    channels.sort_by(|a, b| a.id.cmp(&b.id));
    for ch in channels {
        let _ = write!(out, "  channel {} {}->{}", ch.id, ch.sender, ch.receiver);
        if !ch.fields.is_empty() {
            let fields: Vec<String> = ch
                .fields
                .iter()
                .map(|f| format!("{}:{}", f.name, f.len))
                .collect();
            let _ = write!(out, " payload ({})", fields.join(","));
        }
        if let Some(s) = ch.deadline_slack {
            let _ = write!(out, " slack {s}");
        }
        out.push_str(";\n");
    }
    for role in Role::BOTH {
        print_automaton(&mut out, role, net.automaton(role));
    }
    out.push_str("}\n");
    out
}

fn print_automaton(out: &mut String, role: Role, ta: &TimedAutomaton) {
    let _ = writeln!(out, "  automaton {role} {} {{", ta.name);
    if !ta.clocks.is_empty() {
        let _ = writeln!(out, "    clock {};", ta.clocks.join(", "));
    }
    let _ = writeln!(out, "    init {};", ta.initial);
    for loc in &ta.locations {
        let _ = write!(out, "    loc {}", loc.name);
        if !loc.invariant.is_true() {
            let _ = write!(out, " inv {}", loc.invariant);
        }
        if loc.kind != LocationKind::Normal {
            let _ = write!(out, " kind {}", loc.kind.as_str());
        }
        out.push_str(";\n");
    }
    for e in &ta.edges {
        let _ = write!(
            out,
            "    edge {} -> {} on {} {}",
            e.source, e.target, e.channel, e.direction
        );
        if !e.guard.is_true() {
            let _ = write!(out, " guard {}", e.guard);
        }
        if !e.resets.is_empty() {
            let _ = write!(out, " reset {}", e.resets.join(", "));
        }
        if !e.payload.is_any() {
            let _ = write!(out, " payload {}", e.payload);
        }
        if e.origin != Origin::Nominal {
            let _ = write!(out, " origin {}", e.origin.as_str());
        }
        out.push_str(";\n");
    }
    out.push_str("  }\n");
}
