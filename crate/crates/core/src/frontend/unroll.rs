//! Bounded unrolling of `for ... in range(...)` loops.
//!
//! A loop is unrolled when its trip count is statically known and does not
//! exceed the bound. The loop variable is substituted by its literal value
//! in each copy of the body; when the body rebinds the variable a binding
//! statement is emitted instead. A trailing synthetic binding keeps the
//! variable's post-loop value visible to later statements.

use super::ast::*;
use super::consts::{propagate_constants, ConstEnv};

pub const DEFAULT_MAX_ITERATIONS: usize = 10;

pub fn unroll_loops(ast: &ModuleAst, max_iterations: usize) -> ModuleAst {
    let max_iterations = max_iterations.max(1);
    let mut current = ast.clone();
    current.renumber();
    // One loop per round: copies of inner loops must see the outer loop
    // variable as a constant, which needs fresh propagation.
    loop {
        let env = propagate_constants(&current);
        let mut changed = false;
        let body = std::mem::take(&mut current.body);
        current.body = rewrite_block(body, &env, max_iterations, &mut changed);
        if !changed {
            break;
        }
        current.renumber();
    }
    current
}

/// Rewrites the first pending loop found in pre-order. Sets `changed` once a
/// loop has been handled.
fn rewrite_block(stmts: Vec<Stmt>, env: &ConstEnv, max: usize, changed: &mut bool) -> Vec<Stmt> {
    let mut out = Vec::with_capacity(stmts.len());
    for mut stmt in stmts {
        if *changed {
            out.push(stmt);
            continue;
        }
        let span = stmt.span;
        let id = stmt.id;
        match stmt.kind {
            StmtKind::For {
                target,
                iter,
                body,
                orelse,
                unroll: LoopUnroll::Pending,
            } => {
                *changed = true;
                match plan(&target, &iter, &body, env, id, max) {
                    Ok(values) => {
                        out.extend(expand(&target, &values, body, span));
                        out.extend(orelse);
                    }
                    Err(reason) => out.push(Stmt {
                        kind: StmtKind::For {
                            target,
                            iter,
                            body,
                            orelse,
                            unroll: LoopUnroll::NotUnrollable(reason),
                        },
                        ..stmt
                    }),
                }
            }
            kind => {
                stmt.kind = kind;
                rewrite_children(&mut stmt, env, max, changed);
                out.push(stmt);
            }
        }
    }
    out
}

fn rewrite_children(stmt: &mut Stmt, env: &ConstEnv, max: usize, changed: &mut bool) {
    let apply = |block: &mut Vec<Stmt>, changed: &mut bool| {
        if !*changed {
            let taken = std::mem::take(block);
            *block = rewrite_block(taken, env, max, changed);
        }
    };
    match &mut stmt.kind {
        StmtKind::If { body, orelse, .. }
        | StmtKind::For { body, orelse, .. }
        | StmtKind::While { body, orelse, .. } => {
            apply(body, changed);
            apply(orelse, changed);
        }
        StmtKind::With { body, .. } | StmtKind::FunctionDef { body, .. } => apply(body, changed),
        StmtKind::Opaque { bodies, .. } => {
            for body in bodies {
                apply(body, changed);
            }
        }
        _ => {}
    }
}

fn plan(
    target: &Expr,
    iter: &Expr,
    body: &[Stmt],
    env: &ConstEnv,
    at: StmtId,
    max: usize,
) -> Result<Vec<i64>, String> {
    if target.as_name().is_none() {
        return Err("loop target is not a simple name".into());
    }
    if has_loop_exit(body) {
        return Err("loop body contains break or continue".into());
    }
    let values = env
        .eval_range(at, iter)
        .ok_or_else(|| "trip count is not statically known".to_string())?;
    if values.len() > max {
        return Err(format!(
            "trip count {} exceeds the unrolling bound {max}",
            values.len()
        ));
    }
    Ok(values)
}

/// `break`/`continue` belonging to this loop (not to nested loops).
fn has_loop_exit(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match &s.kind {
        StmtKind::Break | StmtKind::Continue => true,
        StmtKind::If { body, orelse, .. } => has_loop_exit(body) || has_loop_exit(orelse),
        StmtKind::With { body, .. } => has_loop_exit(body),
        StmtKind::For { orelse, .. } | StmtKind::While { orelse, .. } => has_loop_exit(orelse),
        StmtKind::Opaque { bodies, .. } => bodies.iter().any(|b| has_loop_exit(b)),
        _ => false,
    })
}

fn expand(target: &Expr, values: &[i64], body: Vec<Stmt>, loop_span: crate::span::Span) -> Vec<Stmt> {
    let var = target.as_name().expect("checked by plan").to_string();
    let rebinds = assigned_names(&body).contains(&var);
    let binding = |v: i64| Stmt {
        id: StmtId::default(),
        span: loop_span,
        kind: StmtKind::Assign {
            targets: vec![target.clone()],
            value: Expr::new(ExprKind::Int(v), target.span),
        },
        synthetic: true,
    };
    let mut out = Vec::new();
    for &v in values {
        if rebinds {
            out.push(binding(v));
            out.extend(body.iter().cloned());
        } else {
            out.extend(body.iter().cloned().map(|mut s| {
                substitute_stmt(&mut s, &var, v);
                s
            }));
        }
    }
    if let Some(&last) = values.last() {
        if !rebinds {
            out.push(binding(last));
        }
    }
    out
}

fn substitute_stmt(stmt: &mut Stmt, var: &str, value: i64) {
    match &mut stmt.kind {
        StmtKind::Assign { targets, value: v } => {
            substitute_expr(v, var, value);
            for t in targets {
                substitute_target(t, var, value);
            }
        }
        StmtKind::AugAssign { target, value: v, .. } => {
            substitute_target(target, var, value);
            substitute_expr(v, var, value);
        }
        StmtKind::Expr(e) => substitute_expr(e, var, value),
        StmtKind::If { test, body, orelse } | StmtKind::While { test, body, orelse } => {
            substitute_expr(test, var, value);
            body.iter_mut().for_each(|s| substitute_stmt(s, var, value));
            orelse.iter_mut().for_each(|s| substitute_stmt(s, var, value));
        }
        StmtKind::For {
            iter, body, orelse, ..
        } => {
            substitute_expr(iter, var, value);
            body.iter_mut().for_each(|s| substitute_stmt(s, var, value));
            orelse.iter_mut().for_each(|s| substitute_stmt(s, var, value));
        }
        StmtKind::With { items, body } => {
            for (ctx, _) in items {
                substitute_expr(ctx, var, value);
            }
            body.iter_mut().for_each(|s| substitute_stmt(s, var, value));
        }
        StmtKind::Return(Some(e)) => substitute_expr(e, var, value),
        StmtKind::Opaque { exprs, bodies, .. } => {
            exprs.iter_mut().for_each(|e| substitute_expr(e, var, value));
            for body in bodies {
                body.iter_mut().for_each(|s| substitute_stmt(s, var, value));
            }
        }
        // function bodies capture the variable by reference; leave them alone
        StmtKind::FunctionDef { decorators, defaults, .. } => {
            decorators.iter_mut().for_each(|e| substitute_expr(e, var, value));
            defaults.iter_mut().for_each(|e| substitute_expr(e, var, value));
        }
        StmtKind::Return(None)
        | StmtKind::Global(_)
        | StmtKind::Pass
        | StmtKind::Break
        | StmtKind::Continue => {}
    }
}

/// Substitutes inside subscripts/attributes of an assignment target, but
/// never the bound names themselves.
fn substitute_target(target: &mut Expr, var: &str, value: i64) {
    match &mut target.kind {
        ExprKind::Name(_) => {}
        ExprKind::Tuple(items) | ExprKind::List(items) => {
            items.iter_mut().for_each(|t| substitute_target(t, var, value))
        }
        _ => substitute_expr(target, var, value),
    }
}

fn substitute_expr(expr: &mut Expr, var: &str, value: i64) {
    if let ExprKind::Name(n) = &expr.kind {
        if n == var {
            expr.kind = ExprKind::Int(value);
        }
        return;
    }
    match &mut expr.kind {
        ExprKind::List(items) | ExprKind::Tuple(items) => {
            items.iter_mut().for_each(|e| substitute_expr(e, var, value))
        }
        ExprKind::Call {
            func,
            args,
            keywords,
        } => {
            substitute_expr(func, var, value);
            args.iter_mut().for_each(|e| substitute_expr(e, var, value));
            keywords
                .iter_mut()
                .for_each(|k| substitute_expr(&mut k.value, var, value));
        }
        ExprKind::Attribute { value: v, .. } => substitute_expr(v, var, value),
        ExprKind::Subscript { value: v, index } => {
            substitute_expr(v, var, value);
            substitute_expr(index, var, value);
        }
        ExprKind::Slice { lower, upper, step } => {
            for part in [lower, upper, step].into_iter().flatten() {
                substitute_expr(part, var, value);
            }
        }
        ExprKind::BinOp { left, right, .. } => {
            substitute_expr(left, var, value);
            substitute_expr(right, var, value);
        }
        ExprKind::Unary { operand, .. } => substitute_expr(operand, var, value),
        ExprKind::Compare {
            left, comparators, ..
        } => {
            substitute_expr(left, var, value);
            comparators
                .iter_mut()
                .for_each(|e| substitute_expr(e, var, value));
        }
        ExprKind::BoolOp { values, .. } => {
            values.iter_mut().for_each(|e| substitute_expr(e, var, value))
        }
        ExprKind::IfExp { test, body, orelse } => {
            substitute_expr(test, var, value);
            substitute_expr(body, var, value);
            substitute_expr(orelse, var, value);
        }
        ExprKind::Starred(inner) => substitute_expr(inner, var, value),
        // comprehensions and lambdas may shadow the variable
        ExprKind::Opaque { .. } => {}
        ExprKind::Name(_)
        | ExprKind::Int(_)
        | ExprKind::Float(_)
        | ExprKind::Str(_)
        | ExprKind::Bool(_)
        | ExprKind::NoneLit => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parser::parse_file;

    fn unrolled(src: &str, max: usize) -> ModuleAst {
        unroll_loops(&parse_file(src, "t.py").unwrap(), max)
    }

    fn call_arg(stmt: &Stmt) -> &ExprKind {
        let StmtKind::Expr(e) = &stmt.kind else { panic!("{stmt:?}") };
        let ExprKind::Call { args, .. } = &e.kind else { panic!() };
        &args[0].kind
    }

    #[test]
    fn known_range_is_unrolled_with_literals() {
        let m = unrolled("for i in range(3):\n    circ.h(i)\n", 10);
        let real: Vec<_> = m.body.iter().filter(|s| !s.synthetic).collect();
        assert_eq!(real.len(), 3);
        for (k, s) in real.iter().enumerate() {
            assert_eq!(call_arg(s), &ExprKind::Int(k as i64));
            assert_eq!(s.span.line, 2);
        }
        assert!(m.body.last().unwrap().synthetic);
    }

    #[test]
    fn bound_exceeded_keeps_loop() {
        let m = unrolled("for i in range(20):\n    circ.h(i)\n", 10);
        assert_eq!(m.body.len(), 1);
        let StmtKind::For { unroll, .. } = &m.body[0].kind else { panic!() };
        assert!(matches!(unroll, LoopUnroll::NotUnrollable(r) if r.contains("20")));
    }

    #[test]
    fn unknown_bound_keeps_loop() {
        let m = unrolled("for i in range(n):\n    circ.h(i)\n", 10);
        let StmtKind::For { unroll, .. } = &m.body[0].kind else { panic!() };
        assert!(matches!(unroll, LoopUnroll::NotUnrollable(_)));
    }

    #[test]
    fn nested_loops_use_outer_value() {
        let m = unrolled("for i in range(2):\n    for j in range(i, 2):\n        qc.cx(i, j)\n", 10);
        let calls: Vec<_> = m
            .body
            .iter()
            .filter(|s| !s.synthetic && matches!(s.kind, StmtKind::Expr(_)))
            .collect();
        // (0,0) (0,1) (1,1)
        assert_eq!(calls.len(), 3);
    }

    #[test]
    fn break_prevents_unrolling() {
        let m = unrolled("for i in range(3):\n    if i:\n        break\n", 10);
        assert!(matches!(m.body[0].kind, StmtKind::For { .. }));
    }

    #[test]
    fn rebinding_body_uses_binding_statements() {
        let m = unrolled("for i in range(2):\n    i = i * 2\n    qc.h(i)\n", 10);
        assert_eq!(m.body.len(), 6);
        assert!(m.body[0].synthetic && m.body[3].synthetic);
    }

    #[test]
    fn zero_trip_loop_runs_else_only() {
        let m = unrolled("for i in range(0):\n    qc.h(i)\nelse:\n    qc.x(0)\n", 10);
        assert_eq!(m.body.len(), 1);
        assert_eq!(call_arg(&m.body[0]), &ExprKind::Int(0));
    }

    #[test]
    fn loops_inside_functions_and_branches_unroll() {
        let m = unrolled("def f():\n    if c:\n        for i in range(2):\n            qc.h(i)\n", 10);
        let StmtKind::FunctionDef { body, .. } = &m.body[0].kind else { panic!() };
        let StmtKind::If { body, .. } = &body[0].kind else { panic!() };
        assert_eq!(body.len(), 3);
    }

    #[test]
    fn max_iterations_bound_is_inclusive() {
        let m = unrolled("for i in range(10):\n    qc.h(0)\n", 10);
        assert_eq!(m.body.iter().filter(|s| !s.synthetic).count(), 10);
        let m = unrolled("for i in range(11):\n    qc.h(0)\n", 10);
        assert_eq!(m.body.len(), 1);
    }
}
