//! The `params.txt` format.
//!
//! ```text
//! # comment
//! solver = "ns2d"
//! nu_2 = 0.001
//! forcing {
//!     enable = false
//!     band = [2.0, 4.0]
//! }
//! ```
//!
//! Floats are written as shortest round-trip decimals and always carry a
//! `.`, an exponent, `inf` or `NaN`, which is how they are told apart from
//! integers when read back. The document body is the root tree, named
//! `params`.

use std::fmt::Write as _;

use super::{ParamTree, ParamValue};
use crate::error::{Error, Result};

pub fn serialize(tree: &ParamTree) -> String {
    let mut out = String::new();
    write_body(tree, 0, &mut out);
    out
}

fn write_body(tree: &ParamTree, depth: usize, out: &mut String) {
    let pad = "    ".repeat(depth);
    for (name, value) in tree.leaves() {
        let _ = writeln!(out, "{pad}{name} = {}", format_value(value));
    }
    for child in tree.children() {
        let _ = writeln!(out, "{pad}{} {{", child.name());
        write_body(child, depth + 1, out);
        let _ = writeln!(out, "{pad}}}");
    }
}

pub(crate) fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn format_value(value: &ParamValue) -> String {
    match value {
        ParamValue::Bool(b) => b.to_string(),
        ParamValue::Int(i) => i.to_string(),
        ParamValue::Float(f) => format_float(*f),
        ParamValue::Str(s) => {
            let mut q = String::with_capacity(s.len() + 2);
            q.push('"');
            for c in s.chars() {
                match c {
                    '"' => q.push_str("\\\""),
                    '\\' => q.push_str("\\\\"),
                    '\n' => q.push_str("\\n"),
                    '\t' => q.push_str("\\t"),
                    '\r' => q.push_str("\\r"),
                    c => q.push(c),
                }
            }
            q.push('"');
            q
        }
        ParamValue::FloatList(items) => {
            let parts: Vec<String> = items.iter().map(|v| format_float(*v)).collect();
            format!("[{}]", parts.join(", "))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Equals,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Eof,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '+' | '-')
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn err(&self, line: usize, column: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    /// Returns the next token and the position it starts at.
    fn next(&mut self) -> Result<(Tok, usize, usize)> {
        loop {
            match self.chars.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        let (line, column) = (self.line, self.column);
        let Some(c) = self.bump() else {
            return Ok((Tok::Eof, line, column));
        };
        let tok = match c {
            '=' => Tok::Equals,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            '"' => {
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(self.err(line, column, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => {
                            let esc = match self.bump() {
                                Some('"') => '"',
                                Some('\\') => '\\',
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some('r') => '\r',
                                other => {
                                    return Err(self.err(
                                        self.line,
                                        self.column,
                                        format!("invalid escape {other:?}"),
                                    ))
                                }
                            };
                            s.push(esc);
                        }
                        Some(c) => s.push(c),
                    }
                }
                Tok::Str(s)
            }
            c if is_word_char(c) => {
                let mut s = String::from(c);
                while let Some(&c) = self.chars.peek() {
                    if !is_word_char(c) {
                        break;
                    }
                    s.push(c);
                    self.bump();
                }
                Tok::Word(s)
            }
            other => return Err(self.err(line, column, format!("unexpected character {other:?}"))),
        };
        Ok((tok, line, column))
    }
}

const MAX_DEPTH: usize = 64;

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<(Tok, usize, usize)>,
}

impl<'a> Parser<'a> {
    fn next(&mut self) -> Result<(Tok, usize, usize)> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next(),
        }
    }

    fn peek(&mut self) -> Result<&Tok> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next()?);
        }
        Ok(&self.peeked.as_ref().expect("filled above").0)
    }

    fn body(&mut self, tree: &mut ParamTree, depth: usize) -> Result<()> {
        let nested = depth > 0;
        loop {
            let (tok, line, column) = self.next()?;
            let name = match tok {
                Tok::Eof if !nested => return Ok(()),
                Tok::RBrace if nested => return Ok(()),
                Tok::Word(w) if super::valid_identifier(&w) => w,
                other => {
                    return Err(perr(line, column, format!("expected a name, found {}", describe(&other))))
                }
            };
            let (tok, l2, c2) = self.next()?;
            match tok {
                Tok::Equals => {
                    let value = self.value()?;
                    if tree.leaves.contains_key(&name) || tree.children.contains_key(&name) {
                        return Err(perr(line, column, format!("duplicate name `{name}`")));
                    }
                    tree.leaves.insert(name, value);
                }
                Tok::LBrace => {
                    if tree.leaves.contains_key(&name) || tree.children.contains_key(&name) {
                        return Err(perr(line, column, format!("duplicate name `{name}`")));
                    }
                    if depth >= MAX_DEPTH {
                        return Err(perr(line, column, "nesting too deep"));
                    }
                    let mut child = ParamTree::new(name.clone());
                    self.body(&mut child, depth + 1)?;
                    tree.children.insert(name, child);
                }
                other => {
                    return Err(perr(l2, c2, format!("expected `=` or `{{`, found {}", describe(&other))))
                }
            }
        }
    }

    fn value(&mut self) -> Result<ParamValue> {
        let (tok, line, column) = self.next()?;
        match tok {
            Tok::Str(s) => Ok(ParamValue::Str(s)),
            Tok::Word(w) => scalar(&w).ok_or_else(|| perr(line, column, format!("invalid value `{w}`"))),
            Tok::LBracket => {
                let mut items = Vec::new();
                if self.peek()? == &Tok::RBracket {
                    self.next()?;
                    return Ok(ParamValue::FloatList(items));
                }
                loop {
                    let (tok, line, column) = self.next()?;
                    let item = match tok {
                        Tok::Word(w) => w.parse::<f64>().ok().filter(|_| numeric_like(&w)).map(canonical_nan),
                        _ => None,
                    };
                    items.push(item.ok_or_else(|| perr(line, column, "expected a number in list"))?);
                    let (tok, line, column) = self.next()?;
                    match tok {
                        Tok::Comma => {
                            if self.peek()? == &Tok::RBracket {
                                self.next()?;
                                break;
                            }
                        }
                        Tok::RBracket => break,
                        other => {
                            return Err(perr(line, column, format!("expected `,` or `]`, found {}", describe(&other))))
                        }
                    }
                }
                Ok(ParamValue::FloatList(items))
            }
            other => Err(perr(line, column, format!("expected a value, found {}", describe(&other)))),
        }
    }
}

fn canonical_nan(x: f64) -> f64 {
    if x.is_nan() {
        f64::NAN
    } else {
        x
    }
}

fn numeric_like(w: &str) -> bool {
    let body = w.trim_start_matches(['+', '-']);
    body.starts_with(|c: char| c.is_ascii_digit() || c == '.') || matches!(body, "inf" | "NaN")
}

fn scalar(w: &str) -> Option<ParamValue> {
    match w {
        "true" => return Some(ParamValue::Bool(true)),
        "false" => return Some(ParamValue::Bool(false)),
        _ => {}
    }
    if !numeric_like(w) {
        return None;
    }
    let is_float = w.contains(['.', 'e', 'E']) || w.ends_with("inf") || w.ends_with("NaN");
    if is_float {
        w.parse::<f64>().ok().map(|x| ParamValue::Float(canonical_nan(x)))
    } else {
        w.parse::<i64>().ok().map(ParamValue::Int)
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Word(w) => format!("`{w}`"),
        Tok::Str(_) => "a string".into(),
        Tok::Equals => "`=`".into(),
        Tok::LBrace => "`{`".into(),
        Tok::RBrace => "`}`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Eof => "end of input".into(),
    }
}

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Parses a `params.txt` document into a frozen tree named `params`.
pub fn deserialize(text: &str) -> Result<ParamTree> {
    let mut parser = Parser {
        lexer: Lexer::new(text),
        peeked: None,
    };
    let mut root = ParamTree::new("params");
    parser.body(&mut root, 0)?;
    root.freeze();
    Ok(root)
}
