use std::fmt::Write as _;

use super::lexer::{Cursor, Diagnostic};
use crate::tioa::{DeviationRule, DeviationRuleSet, Role, TimedNetwork};

/// Parses a `.drs` document of lines
/// `rule [ROLE.]LOC deadline INT tolerance INT recover LOC error LOC`.
///
/// Bare location names are resolved against `net` and must be unique across
/// both automata; without a network every location must be role-qualified.
pub fn parse_rules(text: &str, net: Option<&TimedNetwork>) -> Result<DeviationRuleSet, Diagnostic> {
    let mut cur = Cursor::new(text)?;
    let mut rules = Vec::new();
    while !cur.at_eof() {
        cur.expect_keyword("rule")?;
        let (loc, tok) = cur.word("location")?;
        let (role, location) = resolve(&loc, net)
            .map_err(|msg| Diagnostic::new(tok.line, tok.col, msg))?;
        cur.expect_keyword("deadline")?;
        let deadline = cur.integer("deadline")?;
        cur.expect_keyword("tolerance")?;
        let tolerance = cur.integer("tolerance")?;
        cur.expect_keyword("recover")?;
        let recover = cur.ident("recovery location")?.0;
        cur.expect_keyword("error")?;
        let error = cur.ident("error location")?.0;
        cur.eat_sym(";");
        rules.push(DeviationRule {
            role,
            location,
            deadline,
            tolerance,
            recover,
            error,
        });
    }
    Ok(DeviationRuleSet { rules })
}

fn resolve(name: &str, net: Option<&TimedNetwork>) -> Result<(Role, String), String> {
    if let Some((role, loc)) = name.split_once('.') {
        let role = Role::parse(role).ok_or_else(|| format!("unknown role `{role}`"))?;
        return Ok((role, loc.to_string()));
    }
    let Some(net) = net else {
        return Err(format!("qualify `{name}` as master.{name} or slave.{name}"));
    };
    let owners: Vec<Role> = Role::BOTH
        .into_iter()
        .filter(|r| net.automaton(*r).location(name).is_some())
        .collect();
    match owners.as_slice() {
        [role] => Ok((*role, name.to_string())),
        [] => Err(format!("unknown location `{name}`")),
        _ => Err(format!("ambiguous location `{name}`; qualify it with a role")),
    }
}

pub fn print_rules(rules: &DeviationRuleSet) -> String {
    let mut out = String::new();
    for r in &rules.rules {
        let _ = writeln!(
            out,
            "rule {}.{} deadline {} tolerance {} recover {} error {}",
            r.role, r.location, r.deadline, r.tolerance, r.recover, r.error
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qualified_round_trip() {
        let text = "rule master.waitAck deadline 2 tolerance 3 recover resync error safe\n";
        let rules = parse_rules(text, None).unwrap();
        assert_eq!(rules.rules[0].role, Role::Master);
        assert_eq!(rules.rules[0].tolerance, 3);
        assert_eq!(print_rules(&rules), text);
    }

    #[test]
    fn bare_name_needs_network() {
        let err = parse_rules("rule waitAck deadline 2 tolerance 3 recover r error e", None)
            .unwrap_err();
        assert_eq!((err.line, err.col), (1, 6));
    }
}
