//! Tokenizer for the Python subset understood by the frontend.
//!
//! Produces logical-line tokens with explicit `Newline`, `Indent` and
//! `Dedent` markers, following the usual Python rules: newlines inside
//! brackets are ignored, blank and comment-only lines produce nothing, and
//! a backslash joins physical lines.

use crate::span::Span;

#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    Name(String),
    Int(i128),
    Float(f64),
    Imaginary,
    Str { value: String, formatted: bool },
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    EndOfFile,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

/// Longest operators first so that maximal munch works by linear scan.
const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>", "<=", ">=", "==", "!=",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "+", "-", "*", "/", "%", "@", "&", "|",
    "^", "~", "<", ">", "(", ")", "[", "]", "{", "}", ",", ":", ".", ";", "=",
];

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    tokens: Vec<Token>,
    indents: Vec<u32>,
    /// Positions of currently open brackets.
    open: Vec<(u32, u32, char)>,
    at_line_start: bool,
    _src: &'a str,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut lexer = Lexer {
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        tokens: Vec::new(),
        indents: vec![0],
        open: Vec::new(),
        at_line_start: true,
        _src: source,
    };
    lexer.run()?;
    Ok(lexer.tokens)
}

impl Lexer<'_> {
    fn peek(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, LexError> {
        Err(LexError {
            line: self.line,
            column: self.col,
            message: message.into(),
        })
    }

    fn push(&mut self, kind: TokenKind, line: u32, col: u32) {
        let span = Span::new(line, col, self.line, self.col);
        self.tokens.push(Token { kind, span });
    }

    fn last_is_newline(&self) -> bool {
        matches!(
            self.tokens.last().map(|t| &t.kind),
            None | Some(TokenKind::Newline) | Some(TokenKind::Indent) | Some(TokenKind::Dedent)
        )
    }

    fn run(&mut self) -> Result<(), LexError> {
        loop {
            if self.at_line_start && self.open.is_empty() {
                if !self.handle_indentation()? {
                    break;
                }
            }
            let Some(c) = self.peek(0) else { break };
            match c {
                ' ' | '\t' | '\x0c' | '\r' => {
                    self.bump();
                }
                '#' => {
                    while let Some(c) = self.peek(0) {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '\\' if self.peek(1) == Some('\n') => {
                    self.bump();
                    self.bump();
                }
                '\\' if self.peek(1) == Some('\r') && self.peek(2) == Some('\n') => {
                    self.bump();
                    self.bump();
                    self.bump();
                }
                '\n' => {
                    let (line, col) = (self.line, self.col);
                    self.bump();
                    if self.open.is_empty() {
                        if !self.last_is_newline() {
                            self.tokens.push(Token {
                                kind: TokenKind::Newline,
                                span: Span::new(line, col, line, col + 1),
                            });
                        }
                        self.at_line_start = true;
                    }
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) => {
                    self.number()?
                }
                c if c == '"' || c == '\'' => self.string(String::new())?,
                c if c == '_' || c.is_alphabetic() => {
                    let (line, col) = (self.line, self.col);
                    let mut ident = String::new();
                    while let Some(c) = self.peek(0) {
                        if c == '_' || c.is_alphanumeric() {
                            ident.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    if matches!(self.peek(0), Some('"') | Some('\'')) && is_string_prefix(&ident) {
                        self.string_from(ident, line, col)?;
                    } else {
                        self.push(TokenKind::Name(ident), line, col);
                    }
                }
                _ => self.operator()?,
            }
        }
        if let Some(&(line, column, c)) = self.open.last() {
            return Err(LexError {
                line,
                column,
                message: format!("'{c}' was never closed"),
            });
        }
        let (line, col) = (self.line, self.col);
        if !self.last_is_newline() {
            self.tokens.push(Token {
                kind: TokenKind::Newline,
                span: Span::new(line, col, line, col),
            });
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(TokenKind::Dedent, line, col);
        }
        self.push(TokenKind::EndOfFile, line, col);
        Ok(())
    }

    /// Measures the indentation of the next non-blank line and emits
    /// indent/dedent tokens. Returns false at end of input.
    fn handle_indentation(&mut self) -> Result<bool, LexError> {
        loop {
            let mut width = 0u32;
            let mut offset = 0;
            while let Some(c) = self.peek(offset) {
                match c {
                    ' ' => width += 1,
                    '\t' => width = (width / 8 + 1) * 8,
                    '\x0c' => width = 0,
                    _ => break,
                }
                offset += 1;
            }
            match self.peek(offset) {
                None => {
                    for _ in 0..offset {
                        self.bump();
                    }
                    return Ok(false);
                }
                Some('\n') | Some('#') | Some('\r') => {
                    // blank or comment-only line
                    for _ in 0..offset {
                        self.bump();
                    }
                    while let Some(c) = self.peek(0) {
                        self.bump();
                        if c == '\n' {
                            break;
                        }
                    }
                    if self.peek(0).is_none() {
                        return Ok(false);
                    }
                    continue;
                }
                Some('\\') if matches!(self.peek(offset + 1), Some('\n')) => {
                    for _ in 0..offset + 2 {
                        self.bump();
                    }
                    continue;
                }
                Some(_) => {
                    for _ in 0..offset {
                        self.bump();
                    }
                    self.at_line_start = false;
                    let current = *self.indents.last().unwrap_or(&0);
                    let (line, col) = (self.line, self.col);
                    if width > current {
                        self.indents.push(width);
                        self.push(TokenKind::Indent, line, 1);
                    } else if width < current {
                        while *self.indents.last().unwrap_or(&0) > width {
                            self.indents.pop();
                            self.tokens.push(Token {
                                kind: TokenKind::Dedent,
                                span: Span::new(line, col, line, col),
                            });
                        }
                        if *self.indents.last().unwrap_or(&0) != width {
                            return self.error("unindent does not match any outer indentation level");
                        }
                    }
                    return Ok(true);
                }
            }
        }
    }

    fn number(&mut self) -> Result<(), LexError> {
        let (line, col) = (self.line, self.col);
        let mut text = String::new();
        if self.peek(0) == Some('0') && matches!(self.peek(1), Some('x' | 'X' | 'o' | 'O' | 'b' | 'B')) {
            self.bump();
            let radix = match self.bump() {
                Some('x' | 'X') => 16,
                Some('o' | 'O') => 8,
                _ => 2,
            };
            while let Some(c) = self.peek(0) {
                if c == '_' {
                    self.bump();
                } else if c.is_digit(radix) {
                    text.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
            let value = match i128::from_str_radix(&text, radix) {
                Ok(v) => v,
                Err(_) => return self.error("invalid integer literal"),
            };
            self.push(TokenKind::Int(value), line, col);
            return Ok(());
        }
        let mut is_float = false;
        while let Some(c) = self.peek(0) {
            if c.is_ascii_digit() {
                text.push(c);
            } else if c == '_' {
            } else if c == '.' && !is_float && !text.contains(['e', 'E']) {
                is_float = true;
                text.push(c);
            } else if (c == 'e' || c == 'E')
                && !text.contains(['e', 'E'])
                && (self.peek(1).is_some_and(|d| d.is_ascii_digit())
                    || (matches!(self.peek(1), Some('+' | '-'))
                        && self.peek(2).is_some_and(|d| d.is_ascii_digit())))
            {
                is_float = true;
                text.push(c);
                self.bump();
                if let Some(sign @ ('+' | '-')) = self.peek(0) {
                    text.push(sign);
                    self.bump();
                }
                continue;
            } else {
                break;
            }
            self.bump();
        }
        if matches!(self.peek(0), Some('j' | 'J')) {
            self.bump();
            self.push(TokenKind::Imaginary, line, col);
            return Ok(());
        }
        if is_float {
            let value: f64 = match text.parse() {
                Ok(v) => v,
                Err(_) => return self.error("invalid float literal"),
            };
            self.push(TokenKind::Float(value), line, col);
        } else {
            match text.parse::<i128>() {
                Ok(v) => self.push(TokenKind::Int(v), line, col),
                Err(_) => self.push(TokenKind::Float(f64::INFINITY), line, col),
            }
        }
        Ok(())
    }

    fn string(&mut self, prefix: String) -> Result<(), LexError> {
        let (line, col) = (self.line, self.col);
        self.string_from(prefix, line, col)
    }

    fn string_from(&mut self, prefix: String, line: u32, col: u32) -> Result<(), LexError> {
        let lower = prefix.to_ascii_lowercase();
        let raw = lower.contains('r');
        let formatted = lower.contains('f');
        let quote = self.bump().expect("caller checked quote");
        let triple = self.peek(0) == Some(quote) && self.peek(1) == Some(quote);
        if triple {
            self.bump();
            self.bump();
        }
        let mut value = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(LexError {
                    line,
                    column: col,
                    message: "unterminated string literal".into(),
                });
            };
            if c == '\\' {
                let Some(next) = self.bump() else { continue };
                if raw {
                    value.push('\\');
                    value.push(next);
                } else {
                    match next {
                        'n' => value.push('\n'),
                        't' => value.push('\t'),
                        '\n' => {}
                        other => value.push(other),
                    }
                }
                continue;
            }
            if c == quote {
                if !triple {
                    break;
                }
                if self.peek(0) == Some(quote) && self.peek(1) == Some(quote) {
                    self.bump();
                    self.bump();
                    break;
                }
            }
            if c == '\n' && !triple {
                return Err(LexError {
                    line,
                    column: col,
                    message: "unterminated string literal".into(),
                });
            }
            value.push(c);
        }
        self.push(TokenKind::Str { value, formatted }, line, col);
        Ok(())
    }

    fn operator(&mut self) -> Result<(), LexError> {
        let (line, col) = (self.line, self.col);
        for op in OPERATORS {
            let matches = op.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c));
            if matches {
                for _ in 0..op.chars().count() {
                    self.bump();
                }
                match *op {
                    "(" | "[" | "{" => self.open.push((line, col, op.chars().next().unwrap_or('('))),
                    ")" | "]" | "}" => {
                        if self.open.is_empty() {
                            return Err(LexError {
                                line,
                                column: col,
                                message: format!("unmatched '{op}'"),
                            });
                        }
                        self.open.pop();
                    }
                    _ => {}
                }
                self.push(TokenKind::Op(op), line, col);
                return Ok(());
            }
        }
        let c = self.peek(0).unwrap_or(' ');
        self.error(format!("invalid character '{c}'"))
    }
}

fn is_string_prefix(ident: &str) -> bool {
    matches!(
        ident.to_ascii_lowercase().as_str(),
        "r" | "u" | "b" | "f" | "br" | "rb" | "fr" | "rf"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn indentation_produces_indent_and_dedent() {
        let k = kinds("for i in x:\n    a\nb\n");
        assert!(k.contains(&TokenKind::Indent));
        assert!(k.contains(&TokenKind::Dedent));
        assert_eq!(k.last(), Some(&TokenKind::EndOfFile));
    }

    #[test]
    fn brackets_join_lines() {
        let k = kinds("f(1,\n  2)\n");
        let newlines = k.iter().filter(|k| **k == TokenKind::Newline).count();
        assert_eq!(newlines, 1);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let k = kinds("# c\n\n   \na = 1  # trailing\n");
        assert_eq!(
            k,
            vec![
                TokenKind::Name("a".into()),
                TokenKind::Op("="),
                TokenKind::Int(1),
                TokenKind::Newline,
                TokenKind::EndOfFile
            ]
        );
    }

    #[test]
    fn strings_with_prefixes_and_triple_quotes() {
        let k = kinds("x = rb'a\\n'\ny = \"\"\"multi\nline\"\"\"\nz = f'{a}'\n");
        assert!(k.contains(&TokenKind::Str {
            value: "a\\n".into(),
            formatted: false
        }));
        assert!(k.contains(&TokenKind::Str {
            value: "multi\nline".into(),
            formatted: false
        }));
        assert!(k.contains(&TokenKind::Str {
            value: "{a}".into(),
            formatted: true
        }));
    }

    #[test]
    fn numbers() {
        let k = kinds("a = 0x1f + 1_000 + 2.5e-3 + 3j + .5\n");
        assert!(k.contains(&TokenKind::Int(31)));
        assert!(k.contains(&TokenKind::Int(1000)));
        assert!(k.contains(&TokenKind::Float(2.5e-3)));
        assert!(k.contains(&TokenKind::Imaginary));
        assert!(k.contains(&TokenKind::Float(0.5)));
    }

    #[test]
    fn columns_are_one_based() {
        let toks = tokenize("qc.h(0)\n").unwrap();
        assert_eq!(toks[0].span, Span::new(1, 1, 1, 3));
        assert_eq!(toks[2].span.column, 4);
    }

    #[test]
    fn errors() {
        assert!(tokenize("a = 'oops\n").is_err());
        assert!(tokenize("f(1\n").is_err());
        assert!(tokenize("a = 1)\n").is_err());
        assert!(tokenize("if x:\n    a\n  b\n").is_err());
        assert!(tokenize("a = $\n").is_err());
    }
}
