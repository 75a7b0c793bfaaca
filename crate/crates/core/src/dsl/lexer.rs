use std::fmt;

/// A positioned diagnostic; line and column are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            col,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for Diagnostic {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Word(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const SYMBOLS: [&str; 14] = [
    "->", "&&", "<=", ">=", "==", "<", ">", "{", "}", "(", ")", ";", ",", ":",
];

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '!' | '?' | '*')
}

/// Splits text into words and punctuation; `#` starts a comment running to end of line.
pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            col += 1;
            continue;
        }
        if c == '#' {
            while chars.peek().is_some_and(|&(_, c)| c != '\n') {
                chars.next();
            }
            continue;
        }
        if is_word_char(c) {
            let start_col = col;
            let mut word = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if !is_word_char(c) {
                    break;
                }
                word.push(c);
                chars.next();
                col += 1;
            }
            out.push(Token {
                tok: Tok::Word(word),
                line,
                col: start_col,
            });
            continue;
        }
        let rest = &text[i..];
        if let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            out.push(Token {
                tok: Tok::Sym(sym),
                line,
                col,
            });
            for _ in 0..sym.len() {
                chars.next();
            }
            col += sym.len();
            continue;
        }
        if c == '-' {
            out.push(Token {
                tok: Tok::Word("-".into()),
                line,
                col,
            });
            chars.next();
            col += 1;
            continue;
        }
        return Err(Diagnostic::new(line, col, format!("unexpected character `{c}`")));
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

pub(crate) struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
}

pub(crate) type PResult<T> = Result<T, Diagnostic>;

impl Cursor {
    pub fn new(text: &str) -> PResult<Self> {
        Ok(Self {
            tokens: tokenize(text)?,
            pos: 0,
        })
    }

    pub fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    pub fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    pub fn at_sym(&self, sym: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(s) if *s == sym)
    }

    pub fn at_word(&self, word: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(w) if w == word)
    }

    pub fn eat_sym(&mut self, sym: &str) -> bool {
        let hit = self.at_sym(sym);
        if hit {
            self.next();
        }
        hit
    }

    pub fn error_here(&self, message: impl Into<String>) -> Diagnostic {
        let t = self.peek();
        Diagnostic::new(t.line, t.col, message)
    }

    pub fn expect_sym(&mut self, sym: &str) -> PResult<Token> {
        if self.at_sym(sym) {
            Ok(self.next())
        } else {
            Err(self.error_here(format!("expected `{sym}`, found {}", self.peek().tok)))
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> PResult<Token> {
        if self.at_word(kw) {
            Ok(self.next())
        } else {
            Err(self.error_here(format!("expected `{kw}`, found {}", self.peek().tok)))
        }
    }

    /// Any word, with the token for positioning.
    pub fn word(&mut self, what: &str) -> PResult<(String, Token)> {
        match &self.peek().tok {
            Tok::Word(w) => {
                let w = w.clone();
                Ok((w, self.next()))
            }
            other => Err(self.error_here(format!("expected {what}, found {other}"))),
        }
    }

    pub fn ident(&mut self, what: &str) -> PResult<(String, Token)> {
        let (w, tok) = self.word(what)?;
        let mut chars = w.chars();
        let ok = chars
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if ok {
            Ok((w, tok))
        } else {
            Err(Diagnostic::new(
                tok.line,
                tok.col,
                format!("expected {what}, found `{w}`"),
            ))
        }
    }

    pub fn integer(&mut self, what: &str) -> PResult<u64> {
        let (w, tok) = self.word(what)?;
        w.parse().map_err(|_| {
            Diagnostic::new(tok.line, tok.col, format!("expected {what}, found `{w}`"))
        })
    }
}
