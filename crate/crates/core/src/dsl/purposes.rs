use std::fmt::Write as _;

use super::lexer::{Cursor, Diagnostic, PResult};
use crate::testgen::{ObservationPattern, TestPurpose, TestPurposeSet};
use crate::tioa::{Direction, PayloadMatcher};

/// Parses a `.tp` document: a sequence of `purpose NAME { expect ...; }` blocks.
pub fn parse_test_purposes(text: &str) -> Result<TestPurposeSet, Diagnostic> {
    let mut cur = Cursor::new(text)?;
    let mut purposes = Vec::new();
    while !cur.at_eof() {
        let kw = cur.expect_keyword("purpose")?;
        let (name, _) = cur.ident("purpose name")?;
        if purposes.iter().any(|p: &TestPurpose| p.name == name) {
            return Err(Diagnostic::new(
                kw.line,
                kw.col,
                format!("duplicate purpose `{name}`"),
            ));
        }
        cur.expect_sym("{")?;
        let mut patterns = Vec::new();
        while !cur.at_sym("}") {
            cur.expect_keyword("expect")?;
            patterns.push(parse_pattern(&mut cur)?);
        }
        cur.expect_sym("}")?;
        purposes.push(TestPurpose { name, patterns });
    }
    Ok(TestPurposeSet { purposes })
}

fn parse_pattern(cur: &mut Cursor) -> PResult<ObservationPattern> {
    let (channel, _) = cur.ident("channel id")?;
    let (dir, tok) = cur.word("`emit` or `receive`")?;
    let direction = Direction::parse(&dir).ok_or_else(|| {
        Diagnostic::new(
            tok.line,
            tok.col,
            format!("expected `emit` or `receive`, found `{dir}`"),
        )
    })?;
    let mut pattern = ObservationPattern::new(channel, direction);
    loop {
        if cur.at_word("payload") {
            cur.next();
            let (p, tok) = cur.word("payload")?;
            pattern.payload = match PayloadMatcher::parse(&p) {
                Some(m @ (PayloadMatcher::Any | PayloadMatcher::Bytes(_))) => m,
                _ => {
                    return Err(Diagnostic::new(
                        tok.line,
                        tok.col,
                        format!("malformed payload `{p}`"),
                    ))
                }
            };
        } else if cur.at_word("within") {
            cur.next();
            let (w, tok) = cur.word("window LO..HI")?;
            pattern.window = Some(parse_window(&w).ok_or_else(|| {
                Diagnostic::new(tok.line, tok.col, format!("malformed window `{w}`"))
            })?);
        } else {
            break;
        }
    }
    cur.expect_sym(";")?;
    Ok(pattern)
}

pub(crate) fn parse_window(text: &str) -> Option<(u64, u64)> {
    let (lo, hi) = text.split_once("..")?;
    let (lo, hi) = (lo.parse().ok()?, hi.parse().ok()?);
    (lo <= hi).then_some((lo, hi))
}

pub fn print_test_purposes(set: &TestPurposeSet) -> String {
    let mut out = String::new();
    for (i, p) in set.purposes.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "purpose {} {{", p.name);
        for pat in &p.patterns {
            let _ = writeln!(out, "  expect {pat};");
        }
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wildcard_singleton() {
        let set = parse_test_purposes("purpose p { expect ack emit payload *; }").unwrap();
        assert_eq!(set.purposes.len(), 1);
        let pats = &set.purposes[0].patterns;
        assert_eq!(pats.len(), 1);
        assert_eq!(pats[0].payload, PayloadMatcher::Any);
        assert_eq!(pats[0].window, None);
    }

    #[test]
    fn window_and_round_trip() {
        let text = "purpose a {\n  expect ack receive;\n  expect req_data emit payload a2 within 301..600;\n}\n\npurpose b {\n}\n";
        let set = parse_test_purposes(text).unwrap();
        assert_eq!(set.purposes[0].patterns[1].window, Some((301, 600)));
        assert_eq!(print_test_purposes(&set), text);
    }

    #[test]
    fn bad_window_rejected_with_position() {
        let err = parse_test_purposes("purpose a {\n expect x emit within 9..3;\n}").unwrap_err();
        assert_eq!((err.line, err.col), (2, 23));
    }
}
