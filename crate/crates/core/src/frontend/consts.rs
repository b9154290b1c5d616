//! Flow-sensitive integer constant propagation.
//!
//! Every statement gets a snapshot of the integer bindings that hold right
//! before it executes. Only literals and `+ - * //` over known operands are
//! folded; anything else is [`ConstValue::Unknown`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use super::ast::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum ConstValue {
    Known(i64),
    #[default]
    Unknown,
}

impl ConstValue {
    pub fn known(self) -> Option<i64> {
        match self {
            ConstValue::Known(v) => Some(v),
            ConstValue::Unknown => None,
        }
    }

    pub fn is_known(self) -> bool {
        matches!(self, ConstValue::Known(_))
    }

    /// Python floor division; division by zero is Unknown.
    pub fn floor_div(self, rhs: ConstValue) -> ConstValue {
        match (self, rhs) {
            (ConstValue::Known(_), ConstValue::Known(0)) => ConstValue::Unknown,
            (ConstValue::Known(a), ConstValue::Known(b)) => match a.checked_div(b) {
                Some(q) if a % b != 0 && ((a < 0) != (b < 0)) => ConstValue::Known(q - 1),
                Some(q) => ConstValue::Known(q),
                None => ConstValue::Unknown,
            },
            _ => ConstValue::Unknown,
        }
    }

    fn lift(self, rhs: ConstValue, f: fn(i64, i64) -> Option<i64>) -> ConstValue {
        match (self, rhs) {
            (ConstValue::Known(a), ConstValue::Known(b)) => {
                f(a, b).map(ConstValue::Known).unwrap_or(ConstValue::Unknown)
            }
            _ => ConstValue::Unknown,
        }
    }

    /// Lattice join: equal values survive, everything else is Unknown.
    pub fn join(self, other: ConstValue) -> ConstValue {
        if self == other {
            self
        } else {
            ConstValue::Unknown
        }
    }
}

impl Add for ConstValue {
    type Output = ConstValue;
    fn add(self, rhs: ConstValue) -> ConstValue {
        self.lift(rhs, i64::checked_add)
    }
}

impl Sub for ConstValue {
    type Output = ConstValue;
    fn sub(self, rhs: ConstValue) -> ConstValue {
        self.lift(rhs, i64::checked_sub)
    }
}

impl Mul for ConstValue {
    type Output = ConstValue;
    fn mul(self, rhs: ConstValue) -> ConstValue {
        self.lift(rhs, i64::checked_mul)
    }
}

impl std::fmt::Display for ConstValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstValue::Known(v) => write!(f, "{v}"),
            ConstValue::Unknown => f.write_str("?"),
        }
    }
}

/// Integer bindings in effect at one program point. Absent names are Unknown.
pub type Bindings = BTreeMap<String, ConstValue>;

/// Identifies an analysis scope: 0 is the module, functions follow in
/// pre-order of their definitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ScopeId(pub u32);

#[derive(Clone, Debug, Default)]
pub struct ConstEnv {
    before: HashMap<StmtId, (ScopeId, Arc<Bindings>)>,
}

impl ConstEnv {
    /// Value of `name` right before statement `at`.
    pub fn value_at(&self, at: StmtId, name: &str) -> ConstValue {
        self.before
            .get(&at)
            .and_then(|(_, b)| b.get(name).copied())
            .unwrap_or(ConstValue::Unknown)
    }

    pub fn scope_of(&self, at: StmtId) -> Option<ScopeId> {
        self.before.get(&at).map(|(s, _)| *s)
    }

    pub fn bindings_at(&self, at: StmtId) -> Option<&Bindings> {
        self.before.get(&at).map(|(_, b)| b.as_ref())
    }

    /// Evaluates an integer expression in the environment before `at`.
    pub fn eval(&self, at: StmtId, expr: &Expr) -> ConstValue {
        match self.before.get(&at) {
            Some((_, b)) => eval_int(expr, b),
            None => ConstValue::Unknown,
        }
    }

    /// Evaluates a `range(...)` call to its element list when all arguments
    /// are known.
    pub fn eval_range(&self, at: StmtId, expr: &Expr) -> Option<Vec<i64>> {
        let (_, b) = self.before.get(&at)?;
        eval_range(expr, b)
    }
}

pub fn eval_int(expr: &Expr, env: &Bindings) -> ConstValue {
    match &expr.kind {
        ExprKind::Int(v) => ConstValue::Known(*v),
        ExprKind::Name(n) => env.get(n).copied().unwrap_or(ConstValue::Unknown),
        ExprKind::BinOp { op, left, right } => {
            let (l, r) = (eval_int(left, env), eval_int(right, env));
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mult => l * r,
                BinOp::FloorDiv => l.floor_div(r),
                _ => ConstValue::Unknown,
            }
        }
        // a negated literal is still a literal
        ExprKind::Unary {
            op: UnaryOp::Neg,
            operand,
        } => match operand.kind {
            ExprKind::Int(v) => v.checked_neg().map(ConstValue::Known).unwrap_or_default(),
            _ => ConstValue::Unknown,
        },
        _ => ConstValue::Unknown,
    }
}

/// Trip values of `range(stop)`, `range(start, stop)` or
/// `range(start, stop, step)` with known arguments.
pub fn eval_range(expr: &Expr, env: &Bindings) -> Option<Vec<i64>> {
    let ExprKind::Call {
        func,
        args,
        keywords,
    } = &expr.kind
    else {
        return None;
    };
    if func.as_name() != Some("range") || !keywords.is_empty() || args.is_empty() || args.len() > 3
    {
        return None;
    }
    let vals: Option<Vec<i64>> = args.iter().map(|a| eval_int(a, env).known()).collect();
    let vals = vals?;
    let (start, stop, step) = match vals.as_slice() {
        [stop] => (0, *stop, 1),
        [start, stop] => (*start, *stop, 1),
        [start, stop, step] => (*start, *stop, *step),
        _ => return None,
    };
    range_values(start, stop, step)
}

/// Elements of Python's `range(start, stop, step)`; `None` when `step` is
/// zero or the range is implausibly long.
pub fn range_values(start: i64, stop: i64, step: i64) -> Option<Vec<i64>> {
    if step == 0 {
        return None;
    }
    let count = if step > 0 {
        if stop <= start {
            0
        } else {
            ((stop as i128 - start as i128 + step as i128 - 1) / step as i128) as u128
        }
    } else if stop >= start {
        0
    } else {
        ((start as i128 - stop as i128 + (-step) as i128 - 1) / (-step) as i128) as u128
    };
    if count > 1 << 20 {
        return None;
    }
    Some((0..count as i64).map(|k| start + k * step).collect())
}

pub fn propagate_constants(ast: &ModuleAst) -> ConstEnv {
    let mut globals = BTreeSet::new();
    visit_all(&ast.body, &mut |s| {
        if let StmtKind::Global(names) = &s.kind {
            globals.extend(names.iter().cloned());
        }
    });
    let mut prop = Propagator {
        env: ConstEnv::default(),
        next_scope: 1,
        globals,
    };
    prop.block(&ast.body, Bindings::new(), ScopeId(0));
    prop.env
}

struct Propagator {
    env: ConstEnv,
    next_scope: u32,
    /// Names some function declares `global`; never trusted at module level.
    globals: BTreeSet<String>,
}

impl Propagator {
    fn block(&mut self, stmts: &[Stmt], mut env: Bindings, scope: ScopeId) -> Bindings {
        for stmt in stmts {
            env = self.stmt(stmt, env, scope);
        }
        env
    }

    fn record(&mut self, stmt: &Stmt, env: &Bindings, scope: ScopeId) {
        self.env.before.insert(stmt.id, (scope, Arc::new(env.clone())));
    }

    fn stmt(&mut self, stmt: &Stmt, mut env: Bindings, scope: ScopeId) -> Bindings {
        self.record(stmt, &env, scope);
        let walrus = walrus_binds(stmt);
        match &stmt.kind {
            StmtKind::Assign { targets, value } => {
                for target in targets {
                    self.bind(target, Some(value), &mut env, scope);
                }
            }
            StmtKind::AugAssign { target, op, value } => {
                if let Some(name) = target.as_name() {
                    let current = env.get(name).copied().unwrap_or_default();
                    let rhs = eval_int(value, &env);
                    let result = match op {
                        BinOp::Add => current + rhs,
                        BinOp::Sub => current - rhs,
                        BinOp::Mult => current * rhs,
                        BinOp::FloorDiv => current.floor_div(rhs),
                        _ => ConstValue::Unknown,
                    };
                    self.set(name, result, &mut env, scope);
                }
            }
            StmtKind::If { body, orelse, .. } => {
                let then_env = self.block(body, env.clone(), scope);
                let else_env = self.block(orelse, env.clone(), scope);
                env = join(&then_env, &else_env);
            }
            StmtKind::For {
                target,
                body,
                orelse,
                ..
            } => {
                let mut loop_env = env.clone();
                let mut assigned = assigned_names(body);
                target_names(target, &mut assigned);
                for name in &assigned {
                    loop_env.insert(name.clone(), ConstValue::Unknown);
                }
                let after_body = self.block(body, loop_env.clone(), scope);
                let head = join(&loop_env, &after_body);
                let after = self.block(orelse, head, scope);
                env = join(&after, &loop_env);
            }
            StmtKind::While { body, orelse, .. } => {
                let mut loop_env = env.clone();
                for name in assigned_names(body) {
                    loop_env.insert(name, ConstValue::Unknown);
                }
                let after_body = self.block(body, loop_env.clone(), scope);
                let head = join(&loop_env, &after_body);
                env = self.block(orelse, head, scope);
            }
            StmtKind::With { items, body } => {
                for (_, var) in items {
                    if let Some(var) = var {
                        self.bind(var, None, &mut env, scope);
                    }
                }
                env = self.block(body, env, scope);
            }
            StmtKind::FunctionDef { name, body, .. } => {
                let inner = ScopeId(self.next_scope);
                self.next_scope += 1;
                self.block(body, Bindings::new(), inner);
                env.insert(name.clone(), ConstValue::Unknown);
            }
            StmtKind::Opaque { bodies, binds, .. } => {
                for b in binds {
                    env.insert(b.clone(), ConstValue::Unknown);
                }
                // nested bodies run in unknown order; they only contribute
                // scopes and invalidations
                for body in bodies {
                    self.block(body, env.clone(), scope);
                    for name in assigned_names(body) {
                        env.insert(name, ConstValue::Unknown);
                    }
                }
            }
            StmtKind::Global(names) => {
                for n in names {
                    env.insert(n.clone(), ConstValue::Unknown);
                }
            }
            StmtKind::Expr(_)
            | StmtKind::Return(_)
            | StmtKind::Pass
            | StmtKind::Break
            | StmtKind::Continue => {}
        }
        for name in walrus {
            env.insert(name, ConstValue::Unknown);
        }
        env
    }

    fn set(&self, name: &str, value: ConstValue, env: &mut Bindings, scope: ScopeId) {
        let value = if scope == ScopeId(0) && self.globals.contains(name) {
            ConstValue::Unknown
        } else {
            value
        };
        env.insert(name.to_string(), value);
    }

    fn bind(&self, target: &Expr, value: Option<&Expr>, env: &mut Bindings, scope: ScopeId) {
        match (&target.kind, value.map(|v| &v.kind)) {
            (ExprKind::Name(n), _) => {
                let v = value.map(|v| eval_int(v, env)).unwrap_or_default();
                self.set(n, v, env, scope);
            }
            (ExprKind::Tuple(ts) | ExprKind::List(ts), Some(ExprKind::Tuple(vs) | ExprKind::List(vs)))
                if ts.len() == vs.len()
                    && !ts.iter().any(|t| matches!(t.kind, ExprKind::Starred(_))) =>
            {
                // evaluate all right-hand sides before binding, like Python
                let snapshot = env.clone();
                let values: Vec<ConstValue> = vs.iter().map(|v| eval_int(v, &snapshot)).collect();
                for (t, v) in ts.iter().zip(values) {
                    match &t.kind {
                        ExprKind::Name(n) => self.set(n, v, env, scope),
                        _ => {
                            let mut names = Vec::new();
                            target_names(t, &mut names);
                            for n in names {
                                self.set(&n, ConstValue::Unknown, env, scope);
                            }
                        }
                    }
                }
            }
            _ => {
                let mut names = Vec::new();
                target_names(target, &mut names);
                for n in names {
                    self.set(&n, ConstValue::Unknown, env, scope);
                }
            }
        }
    }
}

fn walrus_binds(stmt: &Stmt) -> Vec<String> {
    let mut out = Vec::new();
    for e in stmt.own_exprs() {
        e.walk(&mut |e| {
            if let ExprKind::Opaque { binds, .. } = &e.kind {
                out.extend(binds.iter().cloned());
            }
        });
    }
    out
}

/// Pointwise join; a name bound on only one side is Unknown afterwards.
fn join(a: &Bindings, b: &Bindings) -> Bindings {
    let mut out = Bindings::new();
    for (k, v) in a {
        let joined = match b.get(k) {
            Some(w) => v.join(*w),
            None => ConstValue::Unknown,
        };
        out.insert(k.clone(), joined);
    }
    for k in b.keys() {
        out.entry(k.clone()).or_insert(ConstValue::Unknown);
    }
    out
}
