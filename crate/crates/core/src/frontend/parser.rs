//! Recursive-descent parser over the token stream from [`super::lexer`].
//!
//! The grammar follows Python 3 closely enough to accept ordinary quantum
//! programs. Statements outside the modeled subset are parsed fully and
//! wrapped in `Opaque` nodes; only text that is not valid Python at all is
//! rejected with a [`SyntaxError`].

use std::sync::Arc;

use thiserror::Error;

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use crate::span::Span;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{file}:{line}:{column}: syntax error: {message}")]
pub struct SyntaxError {
    pub file: String,
    pub line: u32,
    pub column: u32,
    pub message: String,
}

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

/// Parses `source` into a [`ModuleAst`] with statement ids assigned.
pub fn parse_file(source: &str, file: &str) -> Result<ModuleAst, SyntaxError> {
    let tokens = tokenize(source).map_err(|e| SyntaxError {
        file: file.to_string(),
        line: e.line,
        column: e.column,
        message: e.message,
    })?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        file: file.to_string(),
    };
    let body = parser.file_input()?;
    let mut module = ModuleAst {
        file: Arc::from(file),
        body,
    };
    module.renumber();
    Ok(module)
}

type PResult<T> = Result<T, SyntaxError>;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    file: String,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, offset: usize) -> &Token {
        &self.tokens[(self.pos + offset).min(self.tokens.len() - 1)]
    }

    fn advance(&mut self) -> Token {
        let tok = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let tok = self.peek();
        Err(SyntaxError {
            file: self.file.clone(),
            line: tok.span.line,
            column: tok.span.column,
            message: message.into(),
        })
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Op(o) if *o == op)
    }

    fn is_op_at(&self, offset: usize, op: &str) -> bool {
        matches!(&self.peek_at(offset).kind, TokenKind::Op(o) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Name(n) if n == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<Span> {
        if self.is_op(op) {
            Ok(self.advance().span)
        } else {
            self.error(format!("expected '{op}'"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.is_kw(kw) {
            Ok(self.advance().span)
        } else {
            self.error(format!("expected '{kw}'"))
        }
    }

    fn expect_name(&mut self) -> PResult<(String, Span)> {
        match &self.peek().kind {
            TokenKind::Name(n) if !KEYWORDS.contains(&n.as_str()) => {
                let n = n.clone();
                let span = self.advance().span;
                Ok((n, span))
            }
            _ => self.error("expected identifier"),
        }
    }

    fn expect_newline(&mut self) -> PResult<()> {
        match self.peek().kind {
            TokenKind::Newline => {
                self.advance();
                Ok(())
            }
            TokenKind::EndOfFile => Ok(()),
            _ => self.error("expected end of statement"),
        }
    }

    fn at_newline(&self) -> bool {
        matches!(
            self.peek().kind,
            TokenKind::Newline | TokenKind::EndOfFile
        )
    }

    // ---- statements -------------------------------------------------

    fn file_input(&mut self) -> PResult<Vec<Stmt>> {
        let mut body = Vec::new();
        loop {
            match self.peek().kind {
                TokenKind::EndOfFile => break,
                TokenKind::Newline => {
                    self.advance();
                }
                TokenKind::Indent => return self.error("unexpected indent"),
                _ => body.extend(self.statement()?),
            }
        }
        Ok(body)
    }

    fn statement(&mut self) -> PResult<Vec<Stmt>> {
        if let TokenKind::Name(n) = &self.peek().kind {
            match n.as_str() {
                "if" => return Ok(vec![self.if_stmt()?]),
                "for" => return Ok(vec![self.for_stmt()?]),
                "while" => return Ok(vec![self.while_stmt()?]),
                "def" => return Ok(vec![self.funcdef(Vec::new())?]),
                "class" => return Ok(vec![self.classdef(Vec::new())?]),
                "with" => return Ok(vec![self.with_stmt()?]),
                "try" => return Ok(vec![self.try_stmt()?]),
                "async" => return Ok(vec![self.async_stmt()?]),
                _ => {}
            }
        }
        if self.is_op("@") {
            return Ok(vec![self.decorated()?]);
        }
        self.simple_stmt()
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_op(":")?;
        if matches!(self.peek().kind, TokenKind::Newline) {
            self.advance();
            if !matches!(self.peek().kind, TokenKind::Indent) {
                return self.error("expected an indented block");
            }
            self.advance();
            let mut body = Vec::new();
            loop {
                match self.peek().kind {
                    TokenKind::Dedent => {
                        self.advance();
                        break;
                    }
                    TokenKind::EndOfFile => break,
                    TokenKind::Newline => {
                        self.advance();
                    }
                    _ => body.extend(self.statement()?),
                }
            }
            if body.is_empty() {
                return self.error("expected an indented block");
            }
            Ok(body)
        } else {
            self.simple_stmt()
        }
    }

    fn body_end(body: &[Stmt], fallback: Span) -> Span {
        body.last().map(|s| s.span).unwrap_or(fallback)
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let start = self.advance().span; // `if` or `elif`
        let test = self.namedexpr_test()?;
        let body = self.block()?;
        let mut end = Self::body_end(&body, test.span);
        let orelse = if self.is_kw("elif") {
            let nested = self.if_stmt()?;
            end = nested.span;
            vec![nested]
        } else if self.is_kw("else") {
            self.advance();
            let orelse = self.block()?;
            end = Self::body_end(&orelse, end);
            orelse
        } else {
            Vec::new()
        };
        Ok(Stmt::new(StmtKind::If { test, body, orelse }, start.to(end)))
    }

    fn for_stmt(&mut self) -> PResult<Stmt> {
        let start = self.expect_kw("for")?;
        let target = self.exprlist()?;
        self.expect_kw("in")?;
        let iter = self.testlist()?;
        let body = self.block()?;
        let mut end = Self::body_end(&body, iter.span);
        let orelse = self.else_block(&mut end)?;
        Ok(Stmt::new(
            StmtKind::For {
                target,
                iter,
                body,
                orelse,
                unroll: LoopUnroll::Pending,
            },
            start.to(end),
        ))
    }

    fn else_block(&mut self, end: &mut Span) -> PResult<Vec<Stmt>> {
        if self.eat_kw("else") {
            let orelse = self.block()?;
            *end = Self::body_end(&orelse, *end);
            Ok(orelse)
        } else {
            Ok(Vec::new())
        }
    }

    fn while_stmt(&mut self) -> PResult<Stmt> {
        let start = self.expect_kw("while")?;
        let test = self.namedexpr_test()?;
        let body = self.block()?;
        let mut end = Self::body_end(&body, test.span);
        let orelse = self.else_block(&mut end)?;
        Ok(Stmt::new(StmtKind::While { test, body, orelse }, start.to(end)))
    }

    fn with_items(&mut self) -> PResult<Vec<(Expr, Option<Expr>)>> {
        let parenthesized = self.is_op("(") && self.paren_with_items();
        if parenthesized {
            self.advance();
        }
        let mut items = Vec::new();
        loop {
            let ctx = self.test()?;
            let var = if self.eat_kw("as") {
                Some(self.star_or_expr()?)
            } else {
                None
            };
            items.push((ctx, var));
            if !self.eat_op(",") {
                break;
            }
            if parenthesized && self.is_op(")") {
                break;
            }
        }
        if parenthesized {
            self.expect_op(")")?;
        }
        Ok(items)
    }

    /// Distinguishes `with (a as b, c):` from `with (a, b) as c:` and
    /// `with (expr).attr:` by scanning for a top-level `as` inside the
    /// parentheses followed by `)` `:`.
    fn paren_with_items(&self) -> bool {
        let mut depth = 0usize;
        let mut saw_as = false;
        let mut i = 0;
        loop {
            let tok = self.peek_at(i);
            match &tok.kind {
                TokenKind::Op("(") | TokenKind::Op("[") | TokenKind::Op("{") => depth += 1,
                TokenKind::Op(")") | TokenKind::Op("]") | TokenKind::Op("}") => {
                    depth -= 1;
                    if depth == 0 {
                        return saw_as && self.is_op_at(i + 1, ":");
                    }
                }
                TokenKind::Name(n) if n == "as" && depth == 1 => saw_as = true,
                TokenKind::Newline | TokenKind::EndOfFile => return false,
                _ => {}
            }
            i += 1;
        }
    }

    fn with_stmt(&mut self) -> PResult<Stmt> {
        let start = self.expect_kw("with")?;
        let items = self.with_items()?;
        let body = self.block()?;
        let end = Self::body_end(&body, start);
        Ok(Stmt::new(StmtKind::With { items, body }, start.to(end)))
    }

    fn decorated(&mut self) -> PResult<Stmt> {
        let mut decorators = Vec::new();
        while self.eat_op("@") {
            decorators.push(self.namedexpr_test()?);
            self.expect_newline()?;
        }
        if self.is_kw("def") {
            self.funcdef(decorators)
        } else if self.is_kw("class") {
            self.classdef(decorators)
        } else if self.is_kw("async") && matches!(&self.peek_at(1).kind, TokenKind::Name(n) if n == "def")
        {
            self.advance();
            self.funcdef(decorators)
        } else {
            self.error("expected function or class definition after decorator")
        }
    }

    fn async_stmt(&mut self) -> PResult<Stmt> {
        let start = self.expect_kw("async")?;
        if self.is_kw("def") {
            let mut stmt = self.funcdef(Vec::new())?;
            stmt.span = start.to(stmt.span);
            return Ok(stmt);
        }
        let inner = if self.is_kw("for") {
            self.for_stmt()?
        } else if self.is_kw("with") {
            self.with_stmt()?
        } else {
            return self.error("expected 'def', 'for' or 'with' after 'async'");
        };
        let span = start.to(inner.span);
        Ok(Stmt::new(
            StmtKind::Opaque {
                label: "async",
                exprs: Vec::new(),
                bodies: vec![vec![inner]],
                binds: Vec::new(),
            },
            span,
        ))
    }

    fn funcdef(&mut self, decorators: Vec<Expr>) -> PResult<Stmt> {
        let start = self.expect_kw("def")?;
        let (name, _) = self.expect_name()?;
        self.expect_op("(")?;
        let mut params = Vec::new();
        let mut defaults = Vec::new();
        while !self.is_op(")") {
            if self.eat_op("/") {
            } else if self.eat_op("*") || self.eat_op("**") {
                if !self.is_op(",") && !self.is_op(")") {
                    let (n, _) = self.expect_name()?;
                    if self.eat_op(":") {
                        self.test()?;
                    }
                    params.push(n);
                }
            } else {
                let (n, _) = self.expect_name()?;
                if self.eat_op(":") {
                    self.test()?;
                }
                if self.eat_op("=") {
                    defaults.push(self.test()?);
                }
                params.push(n);
            }
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        if self.eat_op("->") {
            self.test()?;
        }
        let body = self.block()?;
        let end = Self::body_end(&body, start);
        Ok(Stmt::new(
            StmtKind::FunctionDef {
                name,
                params,
                defaults,
                decorators,
                body,
            },
            start.to(end),
        ))
    }

    fn classdef(&mut self, mut decorators: Vec<Expr>) -> PResult<Stmt> {
        let start = self.expect_kw("class")?;
        let (name, _) = self.expect_name()?;
        if self.eat_op("(") {
            if !self.is_op(")") {
                let (args, keywords) = self.arglist()?;
                decorators.extend(args);
                decorators.extend(keywords.into_iter().map(|k| k.value));
            }
            self.expect_op(")")?;
        }
        let body = self.block()?;
        let end = Self::body_end(&body, start);
        Ok(Stmt::new(
            StmtKind::Opaque {
                label: "class",
                exprs: decorators,
                bodies: vec![body],
                binds: vec![name],
            },
            start.to(end),
        ))
    }

    fn try_stmt(&mut self) -> PResult<Stmt> {
        let start = self.expect_kw("try")?;
        let mut bodies = vec![self.block()?];
        let mut exprs = Vec::new();
        let mut binds = Vec::new();
        let mut handlers = 0;
        while self.is_kw("except") {
            self.advance();
            self.eat_op("*");
            if !self.is_op(":") {
                exprs.push(self.test()?);
                if self.eat_kw("as") {
                    binds.push(self.expect_name()?.0);
                } else if self.eat_op(",") {
                    exprs.push(self.test()?);
                }
            }
            bodies.push(self.block()?);
            handlers += 1;
        }
        if self.eat_kw("else") {
            if handlers == 0 {
                return self.error("'else' without 'except'");
            }
            bodies.push(self.block()?);
        }
        let has_finally = if self.eat_kw("finally") {
            bodies.push(self.block()?);
            true
        } else {
            false
        };
        if handlers == 0 && !has_finally {
            return self.error("expected 'except' or 'finally' block");
        }
        let end = bodies
            .last()
            .and_then(|b| b.last())
            .map(|s| s.span)
            .unwrap_or(start);
        Ok(Stmt::new(
            StmtKind::Opaque {
                label: "try",
                exprs,
                bodies,
                binds,
            },
            start.to(end),
        ))
    }

    fn simple_stmt(&mut self) -> PResult<Vec<Stmt>> {
        let mut stmts = vec![self.small_stmt()?];
        while self.eat_op(";") {
            if self.at_newline() {
                break;
            }
            stmts.push(self.small_stmt()?);
        }
        self.expect_newline()?;
        Ok(stmts)
    }

    fn small_stmt(&mut self) -> PResult<Stmt> {
        let start = self.peek().span;
        if let TokenKind::Name(n) = &self.peek().kind {
            match n.as_str() {
                "pass" => {
                    self.advance();
                    return Ok(Stmt::new(StmtKind::Pass, start));
                }
                "break" => {
                    self.advance();
                    return Ok(Stmt::new(StmtKind::Break, start));
                }
                "continue" => {
                    self.advance();
                    return Ok(Stmt::new(StmtKind::Continue, start));
                }
                "return" => {
                    self.advance();
                    if self.at_newline() || self.is_op(";") {
                        return Ok(Stmt::new(StmtKind::Return(None), start));
                    }
                    let value = self.testlist_star_expr()?;
                    let span = start.to(value.span);
                    return Ok(Stmt::new(StmtKind::Return(Some(value)), span));
                }
                "global" | "nonlocal" => {
                    self.advance();
                    let mut names = vec![self.expect_name()?.0];
                    while self.eat_op(",") {
                        names.push(self.expect_name()?.0);
                    }
                    return Ok(Stmt::new(StmtKind::Global(names), start.to(self.prev_span())));
                }
                "import" => return self.import_stmt(),
                "from" => return self.from_import(),
                "raise" => {
                    self.advance();
                    let mut exprs = Vec::new();
                    if !self.at_newline() && !self.is_op(";") {
                        exprs.push(self.test()?);
                        if self.eat_kw("from") {
                            exprs.push(self.test()?);
                        }
                    }
                    return Ok(self.opaque("raise", exprs, Vec::new(), start));
                }
                "assert" => {
                    self.advance();
                    let mut exprs = vec![self.test()?];
                    if self.eat_op(",") {
                        exprs.push(self.test()?);
                    }
                    return Ok(self.opaque("assert", exprs, Vec::new(), start));
                }
                "del" => {
                    self.advance();
                    let target = self.exprlist()?;
                    let mut binds = Vec::new();
                    target_names(&target, &mut binds);
                    return Ok(self.opaque("del", vec![target], binds, start));
                }
                _ => {}
            }
        }
        self.expr_stmt()
    }

    fn opaque(&self, label: &'static str, exprs: Vec<Expr>, binds: Vec<String>, start: Span) -> Stmt {
        Stmt::new(
            StmtKind::Opaque {
                label,
                exprs,
                bodies: Vec::new(),
                binds,
            },
            start.to(self.prev_span()),
        )
    }

    fn dotted_name(&mut self) -> PResult<String> {
        let mut name = self.expect_name()?.0;
        while self.eat_op(".") {
            name.push('.');
            name.push_str(&self.expect_name()?.0);
        }
        Ok(name)
    }

    fn import_stmt(&mut self) -> PResult<Stmt> {
        let start = self.expect_kw("import")?;
        let mut binds = Vec::new();
        loop {
            let name = self.dotted_name()?;
            if self.eat_kw("as") {
                binds.push(self.expect_name()?.0);
            } else {
                binds.push(name.split('.').next().unwrap_or_default().to_string());
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok(self.opaque("import", Vec::new(), binds, start))
    }

    fn from_import(&mut self) -> PResult<Stmt> {
        let start = self.expect_kw("from")?;
        while self.eat_op(".") || self.eat_op("...") {}
        if !self.is_kw("import") {
            self.dotted_name()?;
        }
        self.expect_kw("import")?;
        let mut binds = Vec::new();
        if self.eat_op("*") {
            return Ok(self.opaque("import", Vec::new(), binds, start));
        }
        let paren = self.eat_op("(");
        loop {
            if paren && self.is_op(")") {
                break;
            }
            let (name, _) = self.expect_name()?;
            if self.eat_kw("as") {
                binds.push(self.expect_name()?.0);
            } else {
                binds.push(name);
            }
            if !self.eat_op(",") {
                break;
            }
        }
        if paren {
            self.expect_op(")")?;
        }
        Ok(self.opaque("import", Vec::new(), binds, start))
    }

    fn expr_stmt(&mut self) -> PResult<Stmt> {
        let first = self.testlist_star_expr()?;
        let start = first.span;
        if self.eat_op(":") {
            // annotated assignment
            let _annotation = self.test()?;
            if self.eat_op("=") {
                let value = self.assign_value()?;
                let span = start.to(value.span);
                return Ok(Stmt::new(
                    StmtKind::Assign {
                        targets: vec![first],
                        value,
                    },
                    span,
                ));
            }
            return Ok(Stmt::new(StmtKind::Pass, start.to(self.prev_span())));
        }
        if let TokenKind::Op(op) = self.peek().kind {
            let aug = match op {
                "+=" => Some(BinOp::Add),
                "-=" => Some(BinOp::Sub),
                "*=" => Some(BinOp::Mult),
                "//=" => Some(BinOp::FloorDiv),
                "/=" => Some(BinOp::Div),
                "%=" => Some(BinOp::Mod),
                "**=" => Some(BinOp::Pow),
                "@=" => Some(BinOp::MatMult),
                "<<=" => Some(BinOp::LShift),
                ">>=" => Some(BinOp::RShift),
                "&=" => Some(BinOp::BitAnd),
                "|=" => Some(BinOp::BitOr),
                "^=" => Some(BinOp::BitXor),
                _ => None,
            };
            if let Some(op) = aug {
                self.advance();
                let value = self.assign_value()?;
                let span = start.to(value.span);
                return Ok(Stmt::new(
                    StmtKind::AugAssign {
                        target: first,
                        op,
                        value,
                    },
                    span,
                ));
            }
        }
        if self.is_op("=") {
            let mut exprs = vec![first];
            while self.eat_op("=") {
                exprs.push(self.assign_value()?);
            }
            let value = exprs.pop().expect("at least two expressions");
            let span = start.to(value.span);
            return Ok(Stmt::new(
                StmtKind::Assign {
                    targets: exprs,
                    value,
                },
                span,
            ));
        }
        let span = first.span;
        Ok(Stmt::new(StmtKind::Expr(first), span))
    }

    fn assign_value(&mut self) -> PResult<Expr> {
        if self.is_kw("yield") {
            self.yield_expr()
        } else {
            self.testlist_star_expr()
        }
    }

    // ---- expressions ------------------------------------------------

    fn yield_expr(&mut self) -> PResult<Expr> {
        let start = self.expect_kw("yield")?;
        let mut children = Vec::new();
        if self.eat_kw("from") {
            children.push(self.test()?);
        } else if !self.at_newline() && !self.is_op(")") && !self.is_op("=") {
            children.push(self.testlist_star_expr()?);
        }
        Ok(Expr::new(
            ExprKind::Opaque {
                label: "yield",
                children,
                binds: Vec::new(),
            },
            start.to(self.prev_span()),
        ))
    }

    /// Comma-separated expressions; a trailing comma or several items make a tuple.
    fn tuple_of(&mut self, item: fn(&mut Self) -> PResult<Expr>) -> PResult<Expr> {
        let first = item(self)?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.expr_cannot_start() {
                break;
            }
            items.push(item(self)?);
        }
        let span = items[0].span.to(self.prev_span());
        Ok(Expr::new(ExprKind::Tuple(items), span))
    }

    fn expr_cannot_start(&self) -> bool {
        match &self.peek().kind {
            TokenKind::Newline | TokenKind::EndOfFile | TokenKind::Indent | TokenKind::Dedent => true,
            TokenKind::Op(op) => matches!(
                *op,
                ")" | "]" | "}" | "=" | ":" | ";" | "+=" | "-=" | "*=" | "/=" | "//=" | "%=" | "**="
                    | "@=" | "&=" | "|=" | "^=" | ">>=" | "<<="
            ),
            TokenKind::Name(n) => n == "in",
            _ => false,
        }
    }

    fn testlist_star_expr(&mut self) -> PResult<Expr> {
        self.tuple_of(Self::test_or_star)
    }

    fn testlist(&mut self) -> PResult<Expr> {
        self.tuple_of(Self::test)
    }

    fn exprlist(&mut self) -> PResult<Expr> {
        self.tuple_of(Self::star_or_expr)
    }

    fn test_or_star(&mut self) -> PResult<Expr> {
        if self.is_op("*") {
            self.star_expr()
        } else {
            self.test()
        }
    }

    fn star_or_expr(&mut self) -> PResult<Expr> {
        if self.is_op("*") {
            self.star_expr()
        } else {
            self.expr()
        }
    }

    fn star_expr(&mut self) -> PResult<Expr> {
        let start = self.expect_op("*")?;
        let inner = self.expr()?;
        let span = start.to(inner.span);
        Ok(Expr::new(ExprKind::Starred(Box::new(inner)), span))
    }

    fn namedexpr_test(&mut self) -> PResult<Expr> {
        let expr = self.test()?;
        if self.is_op(":=") {
            self.advance();
            let value = self.test()?;
            let span = expr.span.to(value.span);
            let binds = expr.as_name().map(|n| vec![n.to_string()]).unwrap_or_default();
            return Ok(Expr::new(
                ExprKind::Opaque {
                    label: "walrus",
                    children: vec![value],
                    binds,
                },
                span,
            ));
        }
        Ok(expr)
    }

    fn test(&mut self) -> PResult<Expr> {
        if self.is_kw("lambda") {
            return self.lambda();
        }
        let body = self.or_test()?;
        if self.is_kw("if") {
            self.advance();
            let test = self.or_test()?;
            self.expect_kw("else")?;
            let orelse = self.test()?;
            let span = body.span.to(orelse.span);
            return Ok(Expr::new(
                ExprKind::IfExp {
                    test: Box::new(test),
                    body: Box::new(body),
                    orelse: Box::new(orelse),
                },
                span,
            ));
        }
        Ok(body)
    }

    fn test_nocond(&mut self) -> PResult<Expr> {
        if self.is_kw("lambda") {
            self.lambda()
        } else {
            self.or_test()
        }
    }

    fn lambda(&mut self) -> PResult<Expr> {
        let start = self.expect_kw("lambda")?;
        let mut children = Vec::new();
        while !self.is_op(":") {
            if self.eat_op("*") || self.eat_op("**") || self.eat_op("/") {
                if self.is_op(",") || self.is_op(":") {
                    self.eat_op(",");
                    continue;
                }
            }
            self.expect_name()?;
            if self.eat_op("=") {
                children.push(self.test()?);
            }
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(":")?;
        children.push(self.test()?);
        Ok(Expr::new(
            ExprKind::Opaque {
                label: "lambda",
                children,
                binds: Vec::new(),
            },
            start.to(self.prev_span()),
        ))
    }

    fn or_test(&mut self) -> PResult<Expr> {
        self.bool_chain("or", BoolOp::Or, Self::and_test)
    }

    fn and_test(&mut self) -> PResult<Expr> {
        self.bool_chain("and", BoolOp::And, Self::not_test)
    }

    fn bool_chain(
        &mut self,
        kw: &str,
        op: BoolOp,
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        let first = next(self)?;
        if !self.is_kw(kw) {
            return Ok(first);
        }
        let mut values = vec![first];
        while self.eat_kw(kw) {
            values.push(next(self)?);
        }
        let span = values[0].span.to(values[values.len() - 1].span);
        Ok(Expr::new(ExprKind::BoolOp { op, values }, span))
    }

    fn not_test(&mut self) -> PResult<Expr> {
        if self.is_kw("not") {
            let start = self.advance().span;
            let operand = self.not_test()?;
            let span = start.to(operand.span);
            return Ok(Expr::new(
                ExprKind::Unary {
                    op: UnaryOp::Not,
                    operand: Box::new(operand),
                },
                span,
            ));
        }
        self.comparison()
    }

    fn comp_op(&mut self) -> Option<CmpOp> {
        let op = match &self.peek().kind {
            TokenKind::Op("<") => CmpOp::Lt,
            TokenKind::Op(">") => CmpOp::Gt,
            TokenKind::Op("==") => CmpOp::Eq,
            TokenKind::Op(">=") => CmpOp::GtE,
            TokenKind::Op("<=") => CmpOp::LtE,
            TokenKind::Op("!=") => CmpOp::NotEq,
            TokenKind::Name(n) if n == "in" => CmpOp::In,
            TokenKind::Name(n) if n == "is" => {
                self.advance();
                if self.eat_kw("not") {
                    return Some(CmpOp::IsNot);
                }
                return Some(CmpOp::Is);
            }
            TokenKind::Name(n)
                if n == "not" && matches!(&self.peek_at(1).kind, TokenKind::Name(m) if m == "in") =>
            {
                self.advance();
                self.advance();
                return Some(CmpOp::NotIn);
            }
            _ => return None,
        };
        self.advance();
        Some(op)
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let left = self.expr()?;
        let mut ops = Vec::new();
        let mut comparators = Vec::new();
        while let Some(op) = self.comp_op() {
            ops.push(op);
            comparators.push(self.expr()?);
        }
        if ops.is_empty() {
            return Ok(left);
        }
        let span = left.span.to(comparators[comparators.len() - 1].span);
        Ok(Expr::new(
            ExprKind::Compare {
                left: Box::new(left),
                ops,
                comparators,
            },
            span,
        ))
    }

    fn binary_level(
        &mut self,
        ops: &[(&str, BinOp)],
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        let mut left = next(self)?;
        'outer: loop {
            for (tok, op) in ops {
                if self.is_op(tok) {
                    self.advance();
                    let right = next(self)?;
                    let span = left.span.to(right.span);
                    left = Expr::new(
                        ExprKind::BinOp {
                            op: *op,
                            left: Box::new(left),
                            right: Box::new(right),
                        },
                        span,
                    );
                    continue 'outer;
                }
            }
            return Ok(left);
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary_level(&[("|", BinOp::BitOr)], Self::xor_expr)
    }

    fn xor_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&[("^", BinOp::BitXor)], Self::and_expr)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&[("&", BinOp::BitAnd)], Self::shift_expr)
    }

    fn shift_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&[("<<", BinOp::LShift), (">>", BinOp::RShift)], Self::arith_expr)
    }

    fn arith_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&[("+", BinOp::Add), ("-", BinOp::Sub)], Self::term)
    }

    fn term(&mut self) -> PResult<Expr> {
        self.binary_level(
            &[
                ("*", BinOp::Mult),
                ("//", BinOp::FloorDiv),
                ("/", BinOp::Div),
                ("%", BinOp::Mod),
                ("@", BinOp::MatMult),
            ],
            Self::factor,
        )
    }

    fn factor(&mut self) -> PResult<Expr> {
        let op = match self.peek().kind {
            TokenKind::Op("-") => Some(UnaryOp::Neg),
            TokenKind::Op("+") => Some(UnaryOp::Pos),
            TokenKind::Op("~") => Some(UnaryOp::Invert),
            _ => None,
        };
        if let Some(op) = op {
            let start = self.advance().span;
            let operand = self.factor()?;
            let span = start.to(operand.span);
            return Ok(Expr::new(
                ExprKind::Unary {
                    op,
                    operand: Box::new(operand),
                },
                span,
            ));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = if self.is_kw("await") {
            let start = self.advance().span;
            let inner = self.atom_expr()?;
            let span = start.to(inner.span);
            Expr::new(
                ExprKind::Opaque {
                    label: "await",
                    children: vec![inner],
                    binds: Vec::new(),
                },
                span,
            )
        } else {
            self.atom_expr()?
        };
        if self.eat_op("**") {
            let exp = self.factor()?;
            let span = base.span.to(exp.span);
            return Ok(Expr::new(
                ExprKind::BinOp {
                    op: BinOp::Pow,
                    left: Box::new(base),
                    right: Box::new(exp),
                },
                span,
            ));
        }
        Ok(base)
    }

    fn atom_expr(&mut self) -> PResult<Expr> {
        let mut expr = self.atom()?;
        loop {
            if self.is_op("(") {
                self.advance();
                let (args, keywords) = if self.is_op(")") {
                    (Vec::new(), Vec::new())
                } else {
                    self.arglist()?
                };
                let end = self.expect_op(")")?;
                let span = expr.span.to(end);
                expr = Expr::new(
                    ExprKind::Call {
                        func: Box::new(expr),
                        args,
                        keywords,
                    },
                    span,
                );
            } else if self.is_op("[") {
                self.advance();
                let index = self.subscript_list()?;
                let end = self.expect_op("]")?;
                let span = expr.span.to(end);
                expr = Expr::new(
                    ExprKind::Subscript {
                        value: Box::new(expr),
                        index: Box::new(index),
                    },
                    span,
                );
            } else if self.is_op(".") {
                self.advance();
                let (attr, end) = match &self.peek().kind {
                    // keywords are not valid attribute names, but soft ones are
                    TokenKind::Name(n) => {
                        let n = n.clone();
                        (n, self.advance().span)
                    }
                    _ => return self.error("expected attribute name"),
                };
                let span = expr.span.to(end);
                expr = Expr::new(
                    ExprKind::Attribute {
                        value: Box::new(expr),
                        attr,
                    },
                    span,
                );
            } else {
                return Ok(expr);
            }
        }
    }

    fn subscript_list(&mut self) -> PResult<Expr> {
        let first = self.subscript()?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.is_op("]") {
                break;
            }
            items.push(self.subscript()?);
        }
        let span = items[0].span.to(self.prev_span());
        Ok(Expr::new(ExprKind::Tuple(items), span))
    }

    fn subscript(&mut self) -> PResult<Expr> {
        let start = self.peek().span;
        let lower = if self.is_op(":") {
            None
        } else {
            let e = self.test_or_star()?;
            if !self.is_op(":") {
                return Ok(e);
            }
            Some(Box::new(e))
        };
        self.expect_op(":")?;
        let upper = if self.is_op(":") || self.is_op("]") || self.is_op(",") {
            None
        } else {
            Some(Box::new(self.test()?))
        };
        let step = if self.eat_op(":") {
            if self.is_op("]") || self.is_op(",") {
                None
            } else {
                Some(Box::new(self.test()?))
            }
        } else {
            None
        };
        Ok(Expr::new(
            ExprKind::Slice { lower, upper, step },
            start.to(self.prev_span()),
        ))
    }

    fn arglist(&mut self) -> PResult<(Vec<Expr>, Vec<Keyword>)> {
        let mut args = Vec::new();
        let mut keywords = Vec::new();
        loop {
            if self.is_op(")") {
                break;
            }
            if self.eat_op("**") {
                let value = self.test()?;
                keywords.push(Keyword { name: None, value });
            } else if self.is_op("*") {
                let start = self.advance().span;
                let inner = self.test()?;
                let span = start.to(inner.span);
                args.push(Expr::new(ExprKind::Starred(Box::new(inner)), span));
            } else if matches!(self.peek().kind, TokenKind::Name(_)) && self.is_op_at(1, "=") {
                let (name, _) = match &self.peek().kind {
                    TokenKind::Name(n) => (n.clone(), ()),
                    _ => unreachable!(),
                };
                self.advance();
                self.advance();
                let value = self.test()?;
                keywords.push(Keyword {
                    name: Some(name),
                    value,
                });
            } else {
                let value = self.namedexpr_test()?;
                if self.is_kw("for") || self.is_kw("async") {
                    let comp = self.comprehension(value, "generator")?;
                    args.push(comp);
                } else {
                    args.push(value);
                }
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok((args, keywords))
    }

    /// Parses the `for ... in ... if ...` tail of a comprehension.
    fn comprehension(&mut self, element: Expr, label: &'static str) -> PResult<Expr> {
        let start = element.span;
        let mut children = vec![element];
        while self.is_kw("for") || self.is_kw("async") {
            self.eat_kw("async");
            self.expect_kw("for")?;
            children.push(self.exprlist()?);
            self.expect_kw("in")?;
            children.push(self.or_test()?);
            while self.eat_kw("if") {
                children.push(self.test_nocond()?);
            }
        }
        Ok(Expr::new(
            ExprKind::Opaque {
                label,
                children,
                binds: Vec::new(),
            },
            start.to(self.prev_span()),
        ))
    }

    fn atom(&mut self) -> PResult<Expr> {
        let tok = self.peek().clone();
        let span = tok.span;
        match tok.kind {
            TokenKind::Int(v) => {
                self.advance();
                match i64::try_from(v) {
                    Ok(v) => Ok(Expr::new(ExprKind::Int(v), span)),
                    Err(_) => Ok(Expr::new(
                        ExprKind::Opaque {
                            label: "bigint",
                            children: Vec::new(),
                            binds: Vec::new(),
                        },
                        span,
                    )),
                }
            }
            TokenKind::Float(v) => {
                self.advance();
                Ok(Expr::new(ExprKind::Float(v), span))
            }
            TokenKind::Imaginary => {
                self.advance();
                Ok(Expr::new(
                    ExprKind::Opaque {
                        label: "complex",
                        children: Vec::new(),
                        binds: Vec::new(),
                    },
                    span,
                ))
            }
            TokenKind::Str { .. } => {
                let mut value = String::new();
                let mut formatted = false;
                let mut end = span;
                while let TokenKind::Str {
                    value: v,
                    formatted: f,
                } = &self.peek().kind
                {
                    value.push_str(v);
                    formatted |= *f;
                    end = self.advance().span;
                }
                if formatted {
                    Ok(Expr::new(
                        ExprKind::Opaque {
                            label: "fstring",
                            children: Vec::new(),
                            binds: Vec::new(),
                        },
                        span.to(end),
                    ))
                } else {
                    Ok(Expr::new(ExprKind::Str(value), span.to(end)))
                }
            }
            TokenKind::Name(ref n) => match n.as_str() {
                "True" => {
                    self.advance();
                    Ok(Expr::new(ExprKind::Bool(true), span))
                }
                "False" => {
                    self.advance();
                    Ok(Expr::new(ExprKind::Bool(false), span))
                }
                "None" => {
                    self.advance();
                    Ok(Expr::new(ExprKind::NoneLit, span))
                }
                n if KEYWORDS.contains(&n) => self.error(format!("unexpected keyword '{n}'")),
                _ => {
                    let name = n.clone();
                    self.advance();
                    Ok(Expr::new(ExprKind::Name(name), span))
                }
            },
            TokenKind::Op("(") => {
                self.advance();
                if let Some(end) = self.try_close(")") {
                    return Ok(Expr::new(ExprKind::Tuple(Vec::new()), span.to(end)));
                }
                if self.is_kw("yield") {
                    let inner = self.yield_expr()?;
                    let end = self.expect_op(")")?;
                    return Ok(Expr::new(inner.kind, span.to(end)));
                }
                let first = self.namedexpr_or_star()?;
                if self.is_kw("for") || self.is_kw("async") {
                    let comp = self.comprehension(first, "generator")?;
                    let end = self.expect_op(")")?;
                    return Ok(Expr::new(comp.kind, span.to(end)));
                }
                if self.is_op(")") {
                    let end = self.advance().span;
                    // parentheses only group; keep the inner node but widen its span
                    return Ok(Expr::new(first.kind, span.to(end)));
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.is_op(")") {
                        break;
                    }
                    items.push(self.namedexpr_or_star()?);
                }
                let end = self.expect_op(")")?;
                Ok(Expr::new(ExprKind::Tuple(items), span.to(end)))
            }
            TokenKind::Op("[") => {
                self.advance();
                if let Some(end) = self.try_close("]") {
                    return Ok(Expr::new(ExprKind::List(Vec::new()), span.to(end)));
                }
                let first = self.namedexpr_or_star()?;
                if self.is_kw("for") || self.is_kw("async") {
                    let comp = self.comprehension(first, "listcomp")?;
                    let end = self.expect_op("]")?;
                    return Ok(Expr::new(comp.kind, span.to(end)));
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.is_op("]") {
                        break;
                    }
                    items.push(self.namedexpr_or_star()?);
                }
                let end = self.expect_op("]")?;
                Ok(Expr::new(ExprKind::List(items), span.to(end)))
            }
            TokenKind::Op("{") => {
                self.advance();
                let mut children = Vec::new();
                let mut label = "dict";
                if let Some(end) = self.try_close("}") {
                    return Ok(Expr::new(
                        ExprKind::Opaque {
                            label,
                            children,
                            binds: Vec::new(),
                        },
                        span.to(end),
                    ));
                }
                let mut first = true;
                loop {
                    if self.is_op("}") {
                        break;
                    }
                    if self.eat_op("**") {
                        children.push(self.expr()?);
                    } else {
                        let key = self.test_or_star()?;
                        if self.eat_op(":") {
                            let value = self.test()?;
                            children.push(key);
                            if first && (self.is_kw("for") || self.is_kw("async")) {
                                let comp = self.comprehension(value, "dictcomp")?;
                                children.push(comp);
                                break;
                            }
                            children.push(value);
                        } else {
                            label = "set";
                            if first && (self.is_kw("for") || self.is_kw("async")) {
                                let comp = self.comprehension(key, "setcomp")?;
                                children.push(comp);
                                break;
                            }
                            children.push(key);
                        }
                    }
                    first = false;
                    if !self.eat_op(",") {
                        break;
                    }
                }
                let end = self.expect_op("}")?;
                Ok(Expr::new(
                    ExprKind::Opaque {
                        label,
                        children,
                        binds: Vec::new(),
                    },
                    span.to(end),
                ))
            }
            TokenKind::Op("...") => {
                self.advance();
                Ok(Expr::new(
                    ExprKind::Opaque {
                        label: "ellipsis",
                        children: Vec::new(),
                        binds: Vec::new(),
                    },
                    span,
                ))
            }
            _ => self.error("invalid syntax"),
        }
    }

    fn namedexpr_or_star(&mut self) -> PResult<Expr> {
        if self.is_op("*") {
            self.star_expr()
        } else {
            self.namedexpr_test()
        }
    }

    fn try_close(&mut self, op: &str) -> Option<Span> {
        if self.is_op(op) {
            Some(self.advance().span)
        } else {
            None
        }
    }
}
