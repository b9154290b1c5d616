//! Syntax tree for the restricted Python subset.
//!
//! Constructs that the analyses do not model (classes, `try`, imports,
//! comprehensions, lambdas, ...) are kept as `Opaque` nodes with their
//! children so that nothing is dropped and circuit references inside them
//! can still be found.

use std::sync::Arc;

use crate::span::{SourceSpan, Span};

/// Identifies a statement within one [`ModuleAst`]. Ids are assigned in
/// pre-order and are unique across all scopes of the file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StmtId(pub u32);

#[derive(Clone, Debug, PartialEq)]
pub struct ModuleAst {
    pub file: Arc<str>,
    pub body: Vec<Stmt>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub id: StmtId,
    pub span: Span,
    pub kind: StmtKind,
    /// True for bindings introduced by loop unrolling.
    pub synthetic: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LoopUnroll {
    /// Not yet examined by the unroller.
    Pending,
    /// Kept as a loop; the reason is for diagnostics only.
    NotUnrollable(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Assign {
        targets: Vec<Expr>,
        value: Expr,
    },
    AugAssign {
        target: Expr,
        op: BinOp,
        value: Expr,
    },
    Expr(Expr),
    If {
        test: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    For {
        target: Expr,
        iter: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
        unroll: LoopUnroll,
    },
    While {
        test: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    With {
        items: Vec<(Expr, Option<Expr>)>,
        body: Vec<Stmt>,
    },
    FunctionDef {
        name: String,
        params: Vec<String>,
        defaults: Vec<Expr>,
        decorators: Vec<Expr>,
        body: Vec<Stmt>,
    },
    Return(Option<Expr>),
    Global(Vec<String>),
    Pass,
    Break,
    Continue,
    /// A construct outside the supported subset.
    Opaque {
        label: &'static str,
        exprs: Vec<Expr>,
        bodies: Vec<Vec<Stmt>>,
        /// Names the construct binds (imports, `except ... as e`, `del`).
        binds: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mult,
    FloorDiv,
    Div,
    Mod,
    Pow,
    MatMult,
    LShift,
    RShift,
    BitAnd,
    BitOr,
    BitXor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Pos,
    Not,
    Invert,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtE,
    Gt,
    GtE,
    In,
    NotIn,
    Is,
    IsNot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoolOp {
    And,
    Or,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Keyword {
    /// `None` for `**kwargs` splats.
    pub name: Option<String>,
    pub value: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub span: Span,
    pub kind: ExprKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Name(String),
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    NoneLit,
    List(Vec<Expr>),
    Tuple(Vec<Expr>),
    Call {
        func: Box<Expr>,
        args: Vec<Expr>,
        keywords: Vec<Keyword>,
    },
    Attribute {
        value: Box<Expr>,
        attr: String,
    },
    Subscript {
        value: Box<Expr>,
        index: Box<Expr>,
    },
    Slice {
        lower: Option<Box<Expr>>,
        upper: Option<Box<Expr>>,
        step: Option<Box<Expr>>,
    },
    BinOp {
        op: BinOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Compare {
        left: Box<Expr>,
        ops: Vec<CmpOp>,
        comparators: Vec<Expr>,
    },
    BoolOp {
        op: BoolOp,
        values: Vec<Expr>,
    },
    IfExp {
        test: Box<Expr>,
        body: Box<Expr>,
        orelse: Box<Expr>,
    },
    /// Starred expression or argument splat (`*args`).
    Starred(Box<Expr>),
    /// Lambdas, comprehensions, dicts, sets, f-strings, `yield`, walrus, ...
    Opaque {
        label: &'static str,
        children: Vec<Expr>,
        /// Names bound by the construct that leak to the enclosing scope
        /// (walrus targets).
        binds: Vec<String>,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { span, kind }
    }

    pub fn as_name(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Name(n) => Some(n),
            _ => None,
        }
    }

    /// Dotted path for `a`, `a.b`, `a.b.c`; `None` for anything else.
    pub fn dotted_path(&self) -> Option<String> {
        match &self.kind {
            ExprKind::Name(n) => Some(n.clone()),
            ExprKind::Attribute { value, attr } => {
                value.dotted_path().map(|base| format!("{base}.{attr}"))
            }
            _ => None,
        }
    }

    /// Direct children in evaluation order.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Name(_)
            | ExprKind::Int(_)
            | ExprKind::Float(_)
            | ExprKind::Str(_)
            | ExprKind::Bool(_)
            | ExprKind::NoneLit => vec![],
            ExprKind::List(items) | ExprKind::Tuple(items) => items.iter().collect(),
            ExprKind::Call {
                func,
                args,
                keywords,
            } => std::iter::once(func.as_ref())
                .chain(args.iter())
                .chain(keywords.iter().map(|k| &k.value))
                .collect(),
            ExprKind::Attribute { value, .. } => vec![value],
            ExprKind::Subscript { value, index } => vec![value, index],
            ExprKind::Slice { lower, upper, step } => [lower, upper, step]
                .into_iter()
                .flatten()
                .map(|b| b.as_ref())
                .collect(),
            ExprKind::BinOp { left, right, .. } => vec![left, right],
            ExprKind::Unary { operand, .. } => vec![operand],
            ExprKind::Compare {
                left, comparators, ..
            } => std::iter::once(left.as_ref())
                .chain(comparators.iter())
                .collect(),
            ExprKind::BoolOp { values, .. } => values.iter().collect(),
            ExprKind::IfExp { test, body, orelse } => vec![test, body, orelse],
            ExprKind::Starred(inner) => vec![inner],
            ExprKind::Opaque { children, .. } => children.iter().collect(),
        }
    }

    /// Pre-order walk over this expression and all sub-expressions.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        for child in self.children() {
            child.walk(f);
        }
    }

    /// Every plain name read anywhere inside the expression.
    pub fn names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let ExprKind::Name(n) = &e.kind {
                out.push(n.as_str());
            }
        });
        out
    }

    /// True when the expression contains an opaque sub-expression.
    pub fn contains_opaque(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if matches!(e.kind, ExprKind::Opaque { .. }) {
                found = true;
            }
        });
        found
    }
}

impl Stmt {
    pub fn new(kind: StmtKind, span: Span) -> Self {
        Stmt {
            id: StmtId::default(),
            span,
            kind,
            synthetic: false,
        }
    }

    /// Nested statement lists that belong to the same scope (if/loop/with
    /// bodies). Function bodies and opaque bodies are excluded.
    pub fn child_blocks(&self) -> Vec<&[Stmt]> {
        match &self.kind {
            StmtKind::If { body, orelse, .. }
            | StmtKind::For { body, orelse, .. }
            | StmtKind::While { body, orelse, .. } => vec![body, orelse],
            StmtKind::With { body, .. } => vec![body],
            _ => vec![],
        }
    }

    /// Expressions evaluated by the statement itself (not by nested bodies).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Assign { targets, value } => {
                std::iter::once(value).chain(targets.iter()).collect()
            }
            StmtKind::AugAssign { target, value, .. } => vec![target, value],
            StmtKind::Expr(e) => vec![e],
            StmtKind::If { test, .. } | StmtKind::While { test, .. } => vec![test],
            StmtKind::For { target, iter, .. } => vec![iter, target],
            StmtKind::With { items, .. } => items
                .iter()
                .flat_map(|(ctx, var)| std::iter::once(ctx).chain(var.iter()))
                .collect(),
            StmtKind::FunctionDef {
                defaults,
                decorators,
                ..
            } => decorators.iter().chain(defaults.iter()).collect(),
            StmtKind::Return(value) => value.iter().collect(),
            StmtKind::Opaque { exprs, .. } => exprs.iter().collect(),
            StmtKind::Global(_) | StmtKind::Pass | StmtKind::Break | StmtKind::Continue => {
                vec![]
            }
        }
    }
}

/// Collects every name that may be bound by `stmts`, recursing into nested
/// same-scope blocks and opaque bodies, but not into function bodies.
pub fn assigned_names(stmts: &[Stmt]) -> Vec<String> {
    let mut out = Vec::new();
    for stmt in stmts {
        collect_assigned(stmt, &mut out);
    }
    out.sort();
    out.dedup();
    out
}

fn collect_assigned(stmt: &Stmt, out: &mut Vec<String>) {
    match &stmt.kind {
        StmtKind::Assign { targets, .. } => {
            for t in targets {
                target_names(t, out);
            }
        }
        StmtKind::AugAssign { target, .. } => target_names(target, out),
        StmtKind::For { target, .. } => target_names(target, out),
        StmtKind::With { items, .. } => {
            for (_, var) in items {
                if let Some(v) = var {
                    target_names(v, out);
                }
            }
        }
        StmtKind::FunctionDef { name, .. } => out.push(name.clone()),
        StmtKind::Opaque { binds, bodies, .. } => {
            out.extend(binds.iter().cloned());
            for body in bodies {
                for s in body {
                    collect_assigned(s, out);
                }
            }
        }
        _ => {}
    }
    for expr in stmt.own_exprs() {
        expr.walk(&mut |e| {
            if let ExprKind::Opaque { binds, .. } = &e.kind {
                out.extend(binds.iter().cloned());
            }
        });
    }
    for block in stmt.child_blocks() {
        for s in block {
            collect_assigned(s, out);
        }
    }
}

/// Names bound by an assignment target.
pub fn target_names(target: &Expr, out: &mut Vec<String>) {
    match &target.kind {
        ExprKind::Name(n) => out.push(n.clone()),
        ExprKind::Tuple(items) | ExprKind::List(items) => {
            for item in items {
                target_names(item, out);
            }
        }
        ExprKind::Starred(inner) => target_names(inner, out),
        _ => {}
    }
}

impl ModuleAst {
    pub fn source_span(&self, span: Span) -> SourceSpan {
        SourceSpan::new(self.file.clone(), span)
    }

    /// Reassigns statement ids in pre-order, including nested function and
    /// opaque bodies.
    pub fn renumber(&mut self) {
        let mut next = 0u32;
        renumber_block(&mut self.body, &mut next);
    }

    /// Total number of statements, nested ones included.
    pub fn statement_count(&self) -> usize {
        let mut n = 0;
        visit_all(&self.body, &mut |_| n += 1);
        n
    }
}

fn renumber_block(stmts: &mut [Stmt], next: &mut u32) {
    for stmt in stmts {
        stmt.id = StmtId(*next);
        *next += 1;
        match &mut stmt.kind {
            StmtKind::If { body, orelse, .. }
            | StmtKind::For { body, orelse, .. }
            | StmtKind::While { body, orelse, .. } => {
                renumber_block(body, next);
                renumber_block(orelse, next);
            }
            StmtKind::With { body, .. } | StmtKind::FunctionDef { body, .. } => {
                renumber_block(body, next)
            }
            StmtKind::Opaque { bodies, .. } => {
                for body in bodies {
                    renumber_block(body, next);
                }
            }
            _ => {}
        }
    }
}

/// Visits every statement in pre-order, descending into all nested bodies.
pub fn visit_all<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for stmt in stmts {
        f(stmt);
        match &stmt.kind {
            StmtKind::If { body, orelse, .. }
            | StmtKind::For { body, orelse, .. }
            | StmtKind::While { body, orelse, .. } => {
                visit_all(body, f);
                visit_all(orelse, f);
            }
            StmtKind::With { body, .. } | StmtKind::FunctionDef { body, .. } => visit_all(body, f),
            StmtKind::Opaque { bodies, .. } => {
                for body in bodies {
                    visit_all(body, f);
                }
            }
            _ => {}
        }
    }
}
