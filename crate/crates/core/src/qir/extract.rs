//! Lifts a normalized AST into the quantum IR.
//!
//! Statements are visited in pre-order, which is program order after
//! unrolling, so entity ids and event sequence numbers follow the source.
//! Each function body gets its own symbol table; names it does not bind
//! itself are not resolved to module-level circuits.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::gatespec::{GateCategory, GateSpec, GateTable};
use super::*;
use crate::frontend::ast::*;
use crate::frontend::{Cfg, ConstEnv};
use crate::span::Span;

/// Methods whose use on an otherwise unknown object marks it as a circuit.
const CIRCUIT_ONLY_METHODS: &[&str] = &["to_gate", "to_instruction", "assign_parameters"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Value {
    Register(RegisterId),
    Circuit(CircuitId),
    /// Result of `to_gate()` / `to_instruction()` on a circuit.
    GateOf(CircuitId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ctx {
    /// The expression is a whole expression statement; its value is dropped.
    Discarded,
    Value,
}

type Symbols = HashMap<String, Value>;

#[derive(Default)]
struct FunctionInfo {
    returns_circuit: bool,
    free_names: BTreeSet<String>,
}

pub fn extract(ast: &ModuleAst, env: &ConstEnv, cfg: &Cfg, gates: &GateTable) -> QuantumIR {
    let mut ex = Extractor {
        ast,
        env,
        cfg,
        gates,
        ir: QuantumIR {
            file: ast.file.clone(),
            registers: Vec::new(),
            circuits: Vec::new(),
            edges: Vec::new(),
            events: Vec::new(),
            compose_calls: Vec::new(),
            method_calls: Vec::new(),
            diagnostics: Vec::new(),
        },
        functions: collect_functions(&ast.body),
        symbols: vec![Symbols::new()],
        current_function: Vec::new(),
        at: StmtId(0),
        unknown_sizes: HashSet::new(),
    };
    ex.block(&ast.body);
    ex.finish()
}

struct Extractor<'a> {
    ast: &'a ModuleAst,
    env: &'a ConstEnv,
    cfg: &'a Cfg,
    gates: &'a GateTable,
    ir: QuantumIR,
    functions: HashMap<String, FunctionInfo>,
    symbols: Vec<Symbols>,
    current_function: Vec<String>,
    at: StmtId,
    /// Circuits whose register layout could not be determined.
    unknown_sizes: HashSet<CircuitId>,
}

impl<'a> Extractor<'a> {
    fn finish(mut self) -> QuantumIR {
        for i in 0..self.ir.registers.len() {
            if self.ir.registers[i].name.is_empty() {
                self.ir.registers[i].name = format!("reg{i}");
            }
        }
        for i in 0..self.ir.circuits.len() {
            if self.ir.circuits[i].name.is_empty() {
                self.ir.circuits[i].name = format!("circuit{i}");
            }
        }
        let mut seen = HashSet::new();
        self.ir
            .edges
            .retain(|e| seen.insert((e.parent, e.child, e.mechanism)));
        self.ir
    }

    // ---- symbols -------------------------------------------------------

    fn scope_symbols(&mut self) -> &mut Symbols {
        self.symbols.last_mut().expect("symbol stack is never empty")
    }

    fn lookup(&self, expr: &Expr) -> Option<Value> {
        let path = expr.dotted_path()?;
        self.symbols.last()?.get(&path).copied()
    }

    fn lookup_circuit(&self, expr: &Expr) -> Option<CircuitId> {
        match self.lookup(expr) {
            Some(Value::Circuit(c)) => Some(c),
            _ => None,
        }
    }

    fn bind(&mut self, target: &Expr, value: Option<Value>) {
        match (&target.kind, target.dotted_path()) {
            (_, Some(path)) => {
                match value {
                    Some(v) => {
                        self.name_entity(v, &path);
                        self.scope_symbols().insert(path.clone(), v);
                    }
                    None => {
                        self.scope_symbols().remove(&path);
                    }
                }
                // attributes of a rebound object are stale
                let prefix = format!("{path}.");
                self.scope_symbols().retain(|k, _| !k.starts_with(&prefix));
            }
            _ => {
                let mut names = Vec::new();
                target_names(target, &mut names);
                for n in names {
                    self.scope_symbols().remove(&n);
                }
            }
        }
    }

    fn unbind_names(&mut self, names: impl IntoIterator<Item = String>) {
        for n in names {
            self.scope_symbols().remove(&n);
        }
    }

    fn name_entity(&mut self, value: Value, name: &str) {
        match value {
            Value::Register(r) => {
                let reg = &mut self.ir.registers[r.0 as usize];
                if reg.name.is_empty() {
                    reg.name = name.to_string();
                }
            }
            Value::Circuit(c) => {
                let circ = &mut self.ir.circuits[c.0 as usize];
                if circ.name.is_empty() {
                    circ.name = name.to_string();
                }
            }
            Value::GateOf(_) => {}
        }
    }

    // ---- statements ----------------------------------------------------

    fn block(&mut self, stmts: &[Stmt]) {
        for stmt in stmts {
            self.stmt(stmt);
        }
    }

    fn stmt(&mut self, stmt: &Stmt) {
        self.at = stmt.id;
        match &stmt.kind {
            StmtKind::Assign { targets, value } => {
                let pairwise = match (&value.kind, targets.as_slice()) {
                    (ExprKind::Tuple(vals) | ExprKind::List(vals), [target]) => match &target.kind {
                        ExprKind::Tuple(ts) | ExprKind::List(ts) if ts.len() == vals.len() => {
                            Some((ts, vals))
                        }
                        _ => None,
                    },
                    _ => None,
                };
                if let Some((ts, vals)) = pairwise {
                    let values: Vec<Option<Value>> =
                        vals.iter().map(|v| self.expr(v, Ctx::Value)).collect();
                    for (t, v) in ts.iter().zip(values) {
                        self.bind(t, v);
                    }
                } else {
                    let v = self.expr(value, Ctx::Value);
                    for t in targets {
                        self.bind(t, v);
                    }
                }
            }
            StmtKind::AugAssign { target, value, .. } => {
                self.expr(value, Ctx::Value);
                match self.lookup(target) {
                    Some(Value::Circuit(c)) => {
                        self.unknown_event(c, UnknownCause::UnknownCalleeWithCircuitArg, stmt.span)
                    }
                    _ => self.bind(target, None),
                }
            }
            StmtKind::Expr(e) => {
                self.expr(e, Ctx::Discarded);
            }
            StmtKind::If { test, body, orelse } => {
                self.expr(test, Ctx::Value);
                self.block(body);
                self.block(orelse);
            }
            StmtKind::For {
                target,
                iter,
                body,
                orelse,
                ..
            } => {
                self.expr(iter, Ctx::Value);
                self.bind(target, None);
                self.block(body);
                self.block(orelse);
            }
            StmtKind::While { test, body, orelse } => {
                self.expr(test, Ctx::Value);
                self.block(body);
                self.block(orelse);
            }
            StmtKind::With { items, body } => {
                for (ctx, var) in items {
                    let v = self.expr(ctx, Ctx::Value);
                    if let Some(var) = var {
                        self.bind(var, v);
                    }
                }
                self.block(body);
            }
            StmtKind::FunctionDef {
                name,
                body,
                defaults,
                decorators,
                ..
            } => {
                for e in decorators.iter().chain(defaults) {
                    self.expr(e, Ctx::Value);
                }
                self.function_body(name, body);
                self.unbind_names([name.clone()]);
            }
            StmtKind::Return(value) => {
                let v = value.as_ref().and_then(|v| self.expr(v, Ctx::Value));
                if let (Some(Value::Circuit(c)), Some(f)) = (v, self.current_function.last()) {
                    if let Some(info) = self.functions.get_mut(f) {
                        info.returns_circuit = true;
                    }
                    self.edge(None, c, CompositionMechanism::ReturnedFromFunction, stmt.span);
                }
            }
            StmtKind::Opaque {
                exprs,
                bodies,
                binds,
                ..
            } => {
                let mut mentioned = BTreeSet::new();
                for e in exprs {
                    self.mentioned_circuits(e, &mut mentioned);
                }
                for body in bodies {
                    visit_all(body, &mut |s| {
                        for e in s.own_exprs() {
                            self.mentioned_circuits(e, &mut mentioned);
                        }
                    });
                }
                for c in mentioned {
                    self.unknown_event(c, UnknownCause::UnknownCalleeWithCircuitArg, stmt.span);
                }
                for body in bodies {
                    self.nested_functions(body);
                }
                self.unbind_names(binds.iter().cloned());
                for body in bodies {
                    self.unbind_names(assigned_names(body));
                }
            }
            StmtKind::Global(_) | StmtKind::Pass | StmtKind::Break | StmtKind::Continue => {}
        }
    }

    fn function_body(&mut self, name: &str, body: &[Stmt]) {
        self.symbols.push(Symbols::new());
        self.current_function.push(name.to_string());
        self.block(body);
        self.current_function.pop();
        self.symbols.pop();
    }

    /// Functions defined inside opaque constructs, such as class methods.
    fn nested_functions(&mut self, stmts: &[Stmt]) {
        for stmt in stmts {
            match &stmt.kind {
                StmtKind::FunctionDef { name, body, .. } => {
                    self.at = stmt.id;
                    self.function_body(name, body);
                }
                StmtKind::Opaque { bodies, .. } => {
                    for b in bodies {
                        self.nested_functions(b);
                    }
                }
                _ => {
                    for b in stmt.child_blocks() {
                        self.nested_functions(b);
                    }
                }
            }
        }
    }

    fn mentioned_circuits(&self, expr: &Expr, out: &mut BTreeSet<CircuitId>) {
        expr.walk(&mut |e| {
            if let Some(Value::Circuit(c) | Value::GateOf(c)) = self.lookup(e) {
                out.insert(c);
            }
        });
    }

    // ---- expressions ---------------------------------------------------

    fn expr(&mut self, e: &Expr, ctx: Ctx) -> Option<Value> {
        match &e.kind {
            ExprKind::Name(_) => self.lookup(e),
            ExprKind::Attribute { value, .. } => match self.lookup(e) {
                Some(v) => Some(v),
                None => {
                    if e.dotted_path().is_none() {
                        self.expr(value, Ctx::Value);
                    }
                    None
                }
            },
            ExprKind::Call { .. } => self.call(e, ctx, false),
            ExprKind::Opaque { .. } => {
                let mut mentioned = BTreeSet::new();
                self.mentioned_circuits(e, &mut mentioned);
                for c in mentioned {
                    self.unknown_event(c, UnknownCause::UnknownCalleeWithCircuitArg, e.span);
                }
                None
            }
            _ => {
                for child in e.children() {
                    self.expr(child, Ctx::Value);
                }
                None
            }
        }
    }

    fn call(&mut self, call: &Expr, ctx: Ctx, conditional: bool) -> Option<Value> {
        let ExprKind::Call {
            func,
            args,
            keywords,
        } = &call.kind
        else {
            return self.expr(call, ctx);
        };

        // gate(...).c_if(register, value)
        if let ExprKind::Attribute { value: inner, attr } = &func.kind {
            if attr == "c_if" && matches!(inner.kind, ExprKind::Call { .. }) {
                self.call(inner, Ctx::Value, true);
                self.eval_args(args, keywords);
                return None;
            }
        }

        match &func.kind {
            ExprKind::Attribute { value: recv, attr } => {
                let mut receiver = self.expr(recv, Ctx::Value);
                let vals = self.eval_args(args, keywords);
                if receiver.is_none() && CIRCUIT_ONLY_METHODS.contains(&attr.as_str()) {
                    if recv.dotted_path().is_some() {
                        let c = self.new_circuit(CircuitKind::UnknownWithCircuitMethods, recv.span, None);
                        self.bind(recv, Some(Value::Circuit(c)));
                        receiver = Some(Value::Circuit(c));
                    }
                }
                match receiver {
                    Some(Value::Circuit(c)) => {
                        self.circuit_method(c, attr, call, args, keywords, &vals, ctx, conditional)
                    }
                    Some(_) => None,
                    None => {
                        self.foreign_call(attr, args, &vals, call.span);
                        None
                    }
                }
            }
            ExprKind::Name(name) => {
                let vals = self.eval_args(args, keywords);
                self.named_call(name, call, args, keywords, &vals)
            }
            _ => {
                self.expr(func, Ctx::Value);
                let vals = self.eval_args(args, keywords);
                self.foreign_call("", args, &vals, call.span);
                None
            }
        }
    }

    /// Evaluates positional then keyword arguments in source order.
    fn eval_args(&mut self, args: &[Expr], keywords: &[Keyword]) -> ArgValues {
        let positional = args.iter().map(|a| self.expr(a, Ctx::Value)).collect();
        let keyword = keywords
            .iter()
            .map(|k| (k.name.clone(), self.expr(&k.value, Ctx::Value)))
            .collect();
        ArgValues {
            positional,
            keyword,
        }
    }

    /// Circuits passed as arguments, directly or inside a list literal.
    fn circuit_args(&self, args: &[Expr], vals: &ArgValues) -> Vec<CircuitId> {
        let mut out = Vec::new();
        let mut push = |v: Option<Value>| {
            if let Some(Value::Circuit(c) | Value::GateOf(c)) = v {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        };
        for v in vals.positional.iter().chain(vals.keyword.iter().map(|(_, v)| v)) {
            push(*v);
        }
        for a in args {
            let inner = match &a.kind {
                ExprKind::List(items) | ExprKind::Tuple(items) => items.as_slice(),
                ExprKind::Starred(inner) => std::slice::from_ref(inner.as_ref()),
                _ => &[],
            };
            for item in inner {
                push(self.lookup(item));
            }
        }
        out
    }

    /// A call the extractor does not model. Circuits flowing into it get an
    /// unknown operator unless the callee only reads circuits.
    fn foreign_call(&mut self, name: &str, args: &[Expr], vals: &ArgValues, span: Span) {
        if self.gates.category(name) == Some(GateCategory::CircuitConsumer) {
            return;
        }
        for c in self.circuit_args(args, vals) {
            self.unknown_event(c, UnknownCause::UnknownCalleeWithCircuitArg, span);
        }
    }

    fn named_call(
        &mut self,
        name: &str,
        call: &Expr,
        args: &[Expr],
        keywords: &[Keyword],
        vals: &ArgValues,
    ) -> Option<Value> {
        match name {
            "QuantumRegister" | "AncillaRegister" => {
                Some(self.register_call(RegisterKind::Quantum, args, keywords, call.span))
            }
            "ClassicalRegister" => {
                Some(self.register_call(RegisterKind::Classical, args, keywords, call.span))
            }
            "QuantumCircuit" => Some(self.constructor(call.span, args, vals)),
            "transpile" => {
                let source = match vals.get(0, "circuits") {
                    Some(Value::Circuit(c)) => Some(c),
                    _ => None,
                };
                let c = self.new_circuit(CircuitKind::Transpiled, call.span, source);
                let level = keyword(keywords, "optimization_level")
                    .map(|e| self.env.eval(self.at, e))
                    .unwrap_or(ConstValue::Unknown);
                self.ir.circuits[c.0 as usize].transpile_opt_level = level;
                Some(Value::Circuit(c))
            }
            _ if self.functions.contains_key(name) => {
                for c in self.circuit_args(args, vals) {
                    self.unknown_event(c, UnknownCause::UnknownCalleeWithCircuitArg, call.span);
                }
                if self.symbols.len() == 1 {
                    for c in self.globals_touched_by(name) {
                        self.unknown_event(c, UnknownCause::GlobalCircuitMutation, call.span);
                    }
                }
                if self.functions[name].returns_circuit {
                    let c = self.new_circuit(CircuitKind::UserFunctionReturn, call.span, None);
                    Some(Value::Circuit(c))
                } else {
                    None
                }
            }
            _ => match self.gates.category(name) {
                Some(GateCategory::BuiltinCircuit) => {
                    let c = self.new_circuit(CircuitKind::BuiltinParametrized, call.span, None);
                    Some(Value::Circuit(c))
                }
                _ => {
                    self.foreign_call(name, args, vals, call.span);
                    None
                }
            },
        }
    }

    /// Module-level circuits a user function may reach through free names,
    /// following calls to other user functions.
    fn globals_touched_by(&self, name: &str) -> Vec<CircuitId> {
        let mut visited = BTreeSet::new();
        let mut stack = vec![name.to_string()];
        let mut free = BTreeSet::new();
        while let Some(f) = stack.pop() {
            if !visited.insert(f.clone()) {
                continue;
            }
            if let Some(info) = self.functions.get(&f) {
                for n in &info.free_names {
                    free.insert(n.clone());
                    if self.functions.contains_key(n) {
                        stack.push(n.clone());
                    }
                }
            }
        }
        let symbols = &self.symbols[0];
        let mut out: Vec<CircuitId> = free
            .iter()
            .filter_map(|n| match symbols.get(n) {
                Some(Value::Circuit(c)) => Some(*c),
                _ => None,
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    // ---- entity creation -----------------------------------------------

    fn source_span(&self, span: Span) -> SourceSpan {
        self.ast.source_span(span)
    }

    fn scope(&self) -> ScopeId {
        self.env.scope_of(self.at).unwrap_or_default()
    }

    fn new_register(&mut self, kind: RegisterKind, size: ConstValue, span: Span, implicit: bool) -> RegisterId {
        let id = RegisterId(self.ir.registers.len() as u32);
        let name = match (implicit, kind) {
            (true, RegisterKind::Quantum) => "q",
            (true, RegisterKind::Classical) => "c",
            _ => "",
        };
        self.ir.registers.push(RegisterDecl {
            id,
            kind,
            name: name.to_string(),
            size,
            span: self.source_span(span),
            owner_circuits: BTreeSet::new(),
            implicit,
        });
        id
    }

    fn register_call(&mut self, kind: RegisterKind, args: &[Expr], keywords: &[Keyword], span: Span) -> Value {
        let size_expr = args.first().or_else(|| keyword(keywords, "size"));
        let size = match size_expr {
            Some(e) => match self.env.eval(self.at, e) {
                ConstValue::Known(n) if n < 0 => ConstValue::Unknown,
                v => v,
            },
            None => ConstValue::Unknown,
        };
        Value::Register(self.new_register(kind, size, span, false))
    }

    /// Creates a circuit. Copies and transpiled circuits share the registers
    /// of their source; other non-constructor circuits get implicit
    /// registers of unknown size.
    fn new_circuit(&mut self, kind: CircuitKind, span: Span, source: Option<CircuitId>) -> CircuitId {
        let id = CircuitId(self.ir.circuits.len() as u32);
        self.ir.circuits.push(CircuitDecl {
            id,
            kind,
            name: String::new(),
            num_qubits: ConstValue::Known(0),
            num_clbits: ConstValue::Known(0),
            registers: Vec::new(),
            transpile_opt_level: ConstValue::Unknown,
            span: self.source_span(span),
            scope: self.scope(),
            source,
        });
        match (kind, source) {
            (CircuitKind::Constructor, _) => {}
            (_, Some(src)) => {
                for r in self.ir.circuit(src).registers.clone() {
                    self.associate(id, r);
                }
                if self.unknown_sizes.contains(&src) {
                    self.unknown_sizes.insert(id);
                }
            }
            _ => {
                let q = self.new_register(RegisterKind::Quantum, ConstValue::Unknown, span, true);
                let c = self.new_register(RegisterKind::Classical, ConstValue::Unknown, span, true);
                self.associate(id, q);
                self.associate(id, c);
            }
        }
        self.recompute_sizes(id);
        id
    }

    fn associate(&mut self, circuit: CircuitId, register: RegisterId) {
        let circ = &mut self.ir.circuits[circuit.0 as usize];
        if !circ.registers.contains(&register) {
            circ.registers.push(register);
        }
        self.ir.registers[register.0 as usize]
            .owner_circuits
            .insert(circuit);
        self.recompute_sizes(circuit);
    }

    fn recompute_sizes(&mut self, circuit: CircuitId) {
        let unknown = self.unknown_sizes.contains(&circuit);
        let mut q = ConstValue::Known(0);
        let mut c = ConstValue::Known(0);
        for r in &self.ir.circuits[circuit.0 as usize].registers {
            let reg = &self.ir.registers[r.0 as usize];
            match reg.kind {
                RegisterKind::Quantum => q = q + reg.size,
                RegisterKind::Classical => c = c + reg.size,
            }
        }
        let circ = &mut self.ir.circuits[circuit.0 as usize];
        if unknown {
            circ.num_qubits = ConstValue::Unknown;
            circ.num_clbits = ConstValue::Unknown;
        } else {
            circ.num_qubits = q;
            circ.num_clbits = c;
        }
    }

    fn constructor(&mut self, span: Span, args: &[Expr], vals: &ArgValues) -> Value {
        let c = self.new_circuit(CircuitKind::Constructor, span, None);
        let mut numeric = 0;
        for (arg, val) in args.iter().zip(&vals.positional) {
            match (val, &arg.kind) {
                (Some(Value::Register(r)), _) => self.associate(c, *r),
                (_, ExprKind::Starred(_) | ExprKind::List(_) | ExprKind::Tuple(_)) => {
                    let mut any = false;
                    if let ExprKind::List(items) | ExprKind::Tuple(items) = &arg.kind {
                        for item in items {
                            if let Some(Value::Register(r)) = self.lookup(item) {
                                self.associate(c, r);
                                any = true;
                            }
                        }
                    }
                    if !any {
                        self.unknown_sizes.insert(c);
                        self.recompute_sizes(c);
                    }
                }
                _ => {
                    let kind = match numeric {
                        0 => RegisterKind::Quantum,
                        1 => RegisterKind::Classical,
                        _ => continue,
                    };
                    numeric += 1;
                    let size = match self.env.eval(self.at, arg) {
                        ConstValue::Known(n) if n < 0 => ConstValue::Unknown,
                        v => v,
                    };
                    let r = self.new_register(kind, size, arg.span, true);
                    self.associate(c, r);
                }
            }
        }
        Value::Circuit(c)
    }

    fn edge(&mut self, parent: Option<CircuitId>, child: CircuitId, mechanism: CompositionMechanism, span: Span) {
        if parent == Some(child) {
            return;
        }
        let span = self.source_span(span);
        self.ir.edges.push(CompositionEdge {
            parent,
            child,
            mechanism,
            span,
        });
    }

    fn push_event(&mut self, circuit: CircuitId, kind: OperatorKind, qubits: Vec<QubitRef>, clbits: Vec<ClbitRef>, span: Span) {
        let seq = self.ir.events.len() as u32;
        let block = self.cfg.block_of(self.at).unwrap_or(crate::frontend::BlockId(0));
        let span = self.source_span(span);
        self.ir.events.push(OperatorEvent {
            id: EventId(seq),
            circuit,
            kind,
            qubit_operands: qubits,
            clbit_operands: clbits,
            seq,
            block,
            stmt: self.at,
            span,
        });
    }

    fn unknown_event(&mut self, circuit: CircuitId, cause: UnknownCause, span: Span) {
        self.push_event(circuit, OperatorKind::Unknown { cause }, Vec::new(), Vec::new(), span);
    }

    /// Pushes `kind` unless an operand is unresolved or a gate has no qubit
    /// at all, in which case the event becomes an unknown operator.
    fn checked_event(&mut self, circuit: CircuitId, kind: OperatorKind, qubits: Vec<QubitRef>, clbits: Vec<ClbitRef>, span: Span) {
        let unresolved = qubits.iter().chain(&clbits).any(|b| !b.is_resolved());
        let needs_qubit = matches!(
            kind,
            OperatorKind::Gate { .. } | OperatorKind::Measurement | OperatorKind::Reset
        );
        let kind = if unresolved || (needs_qubit && qubits.is_empty()) {
            OperatorKind::Unknown {
                cause: UnknownCause::UnresolvedQubit,
            }
        } else {
            kind
        };
        self.push_event(circuit, kind, qubits, clbits, span);
    }

    // ---- circuit methods -----------------------------------------------

    #[allow(clippy::too_many_arguments)]
    fn circuit_method(
        &mut self,
        c: CircuitId,
        method: &str,
        call: &Expr,
        args: &[Expr],
        keywords: &[Keyword],
        vals: &ArgValues,
        ctx: Ctx,
        conditional: bool,
    ) -> Option<Value> {
        let span = call.span;
        self.ir.method_calls.push(MethodCall {
            circuit: c,
            method: method.to_string(),
            span: self.source_span(span),
        });
        match method {
            "append" => {
                self.append(c, args, keywords, vals, span, conditional);
                None
            }
            "compose" => self.compose(c, args, keywords, vals, span, ctx, conditional),
            "add_register" => {
                for val in &vals.positional {
                    match val {
                        Some(Value::Register(r)) => self.associate(c, *r),
                        _ => {
                            self.unknown_sizes.insert(c);
                            self.recompute_sizes(c);
                        }
                    }
                }
                None
            }
            "copy" => Some(Value::Circuit(self.new_circuit(CircuitKind::Copy, span, Some(c)))),
            "to_gate" | "to_instruction" => {
                self.edge(None, c, CompositionMechanism::ToGateOrInstruction, span);
                Some(Value::GateOf(c))
            }
            _ => match self.gates.get(method).cloned() {
                Some(spec) => match spec.category {
                    GateCategory::ReversibleGate
                    | GateCategory::Measurement
                    | GateCategory::Reset
                    | GateCategory::Initialize
                    | GateCategory::Barrier => {
                        self.gate_call(c, &spec, args, keywords, span, conditional);
                        None
                    }
                    GateCategory::MeasureAll => {
                        let kind = classify_measure_all(call);
                        self.push_event(c, kind, Vec::new(), Vec::new(), span);
                        None
                    }
                    GateCategory::DerivedCircuit => {
                        Some(Value::Circuit(self.new_circuit(CircuitKind::Copy, span, Some(c))))
                    }
                    GateCategory::CircuitConsumer
                    | GateCategory::ConditionalMarker
                    | GateCategory::BuiltinCircuit => None,
                },
                None => {
                    self.unknown_event(c, UnknownCause::UnknownCalleeWithCircuitArg, span);
                    None
                }
            },
        }
    }

    fn gate_call(&mut self, c: CircuitId, spec: &GateSpec, args: &[Expr], keywords: &[Keyword], span: Span, conditional: bool) {
        let starred = args.iter().any(|a| matches!(a.kind, ExprKind::Starred(_)))
            || keywords.iter().any(|k| k.name.is_none());
        if starred {
            self.checked_event(c, OperatorKind::Unknown { cause: UnknownCause::UnresolvedQubit }, vec![BitRef::Unknown], Vec::new(), span);
            return;
        }
        let mut qubit_exprs = Vec::new();
        let mut clbit_exprs = Vec::new();
        for (pos, a) in args.iter().enumerate() {
            if spec.qubit_args.contains(pos) {
                qubit_exprs.push(a);
            } else if spec.clbit_args.contains(pos) {
                clbit_exprs.push(a);
            }
        }
        for k in keywords {
            let Some(name) = &k.name else { continue };
            if is_qubit_keyword(name) {
                qubit_exprs.push(&k.value);
            } else if is_clbit_keyword(name) {
                clbit_exprs.push(&k.value);
            }
        }
        let qubits: Vec<QubitRef> = qubit_exprs
            .iter()
            .flat_map(|e| self.resolve_bits(e, c, RegisterKind::Quantum))
            .collect();
        let clbits: Vec<ClbitRef> = clbit_exprs
            .iter()
            .flat_map(|e| self.resolve_bits(e, c, RegisterKind::Classical))
            .collect();
        match spec.category {
            GateCategory::Measurement => {
                if qubits.len() > 1 && qubits.len() == clbits.len() {
                    for (q, b) in qubits.into_iter().zip(clbits) {
                        self.checked_event(c, OperatorKind::Measurement, vec![q], vec![b], span);
                    }
                } else {
                    self.checked_event(c, OperatorKind::Measurement, qubits, clbits, span);
                }
            }
            GateCategory::Initialize | GateCategory::Barrier => {
                let qubits = if qubit_exprs.is_empty() {
                    self.all_bits(c, RegisterKind::Quantum).unwrap_or_default()
                } else {
                    qubits
                };
                let kind = if spec.category == GateCategory::Barrier {
                    OperatorKind::Barrier
                } else {
                    OperatorKind::Initialize
                };
                self.checked_event(c, kind, qubits, clbits, span);
            }
            GateCategory::Reset => self.checked_event(c, OperatorKind::Reset, qubits, clbits, span),
            _ => {
                let kind = OperatorKind::Gate {
                    name: spec.method_name.clone(),
                    is_conditional: conditional,
                };
                self.checked_event(c, kind, qubits, clbits, span);
            }
        }
    }

    fn append(&mut self, c: CircuitId, args: &[Expr], keywords: &[Keyword], vals: &ArgValues, span: Span, conditional: bool) {
        let child = match vals.get(0, "instruction") {
            Some(Value::Circuit(x) | Value::GateOf(x)) => Some(x),
            _ => None,
        };
        if let Some(x) = child {
            self.edge(Some(c), x, CompositionMechanism::Append, span);
        }
        let qargs = arg(args, keywords, 1, "qargs");
        let cargs = arg(args, keywords, 2, "cargs");
        let qubits = match qargs {
            Some(e) => self.resolve_bits(e, c, RegisterKind::Quantum),
            None => vec![BitRef::Unknown],
        };
        let clbits = match cargs {
            Some(e) => self.resolve_bits(e, c, RegisterKind::Classical),
            None => Vec::new(),
        };
        let kind = OperatorKind::Gate {
            name: "append".into(),
            is_conditional: conditional,
        };
        self.checked_event(c, kind, qubits, clbits, span);
    }

    #[allow(clippy::too_many_arguments)]
    fn compose(
        &mut self,
        c: CircuitId,
        args: &[Expr],
        keywords: &[Keyword],
        vals: &ArgValues,
        span: Span,
        ctx: Ctx,
        conditional: bool,
    ) -> Option<Value> {
        let child = match vals.get(0, "other") {
            Some(Value::Circuit(x) | Value::GateOf(x)) => Some(x),
            _ => None,
        };
        let inplace = matches!(
            arg(args, keywords, 4, "inplace").map(|e| &e.kind),
            Some(ExprKind::Bool(true))
        );
        let discarded = ctx == Ctx::Discarded;
        let source_span = self.source_span(span);
        self.ir.compose_calls.push(ComposeCall {
            parent: c,
            child,
            discarded,
            inplace,
            span: source_span,
        });
        if let Some(x) = child {
            self.edge(Some(c), x, CompositionMechanism::Compose, span);
        }
        let target = if inplace {
            c
        } else if discarded {
            return None;
        } else {
            let copy = self.new_circuit(CircuitKind::Copy, span, Some(c));
            if let Some(x) = child {
                self.edge(Some(copy), x, CompositionMechanism::Compose, span);
            }
            copy
        };
        let child_width = |ex: &Self, kind| match child {
            Some(x) => {
                let circ = ex.ir.circuit(x);
                match kind {
                    RegisterKind::Quantum => circ.num_qubits,
                    RegisterKind::Classical => circ.num_clbits,
                }
            }
            None => ConstValue::Unknown,
        };
        let qubits = match arg(args, keywords, 1, "qubits") {
            Some(e) => self.resolve_bits(e, target, RegisterKind::Quantum),
            None => match child_width(self, RegisterKind::Quantum) {
                ConstValue::Known(n) => (0..n)
                    .map(|i| self.absolute_bit(target, i, RegisterKind::Quantum, span))
                    .collect(),
                ConstValue::Unknown => vec![BitRef::Unknown],
            },
        };
        let clbits = match arg(args, keywords, 2, "clbits") {
            Some(e) => self.resolve_bits(e, target, RegisterKind::Classical),
            None => match child_width(self, RegisterKind::Classical) {
                ConstValue::Known(n) => (0..n)
                    .map(|i| self.absolute_bit(target, i, RegisterKind::Classical, span))
                    .collect(),
                ConstValue::Unknown => Vec::new(),
            },
        };
        let kind = OperatorKind::Gate {
            name: "compose".into(),
            is_conditional: conditional,
        };
        self.checked_event(target, kind, qubits, clbits, span);
        (target != c).then_some(Value::Circuit(target))
    }

    // ---- operand resolution --------------------------------------------

    /// Every bit of one kind in the circuit, when the layout is known.
    fn all_bits(&self, c: CircuitId, kind: RegisterKind) -> Option<Vec<BitRef>> {
        if self.unknown_sizes.contains(&c) {
            return None;
        }
        let mut out = Vec::new();
        for r in &self.ir.circuit(c).registers {
            let reg = self.ir.register(*r);
            if reg.kind != kind {
                continue;
            }
            let n = reg.size.known()?;
            out.extend((0..n).map(|index| BitRef::Resolved {
                register: reg.id,
                index,
            }));
        }
        Some(out)
    }

    /// Maps a circuit-wide index to (register, local index).
    fn absolute_bit(&mut self, c: CircuitId, index: i64, kind: RegisterKind, span: Span) -> BitRef {
        if self.unknown_sizes.contains(&c) {
            return BitRef::Unknown;
        }
        let regs: Vec<RegisterId> = self
            .ir
            .circuit(c)
            .registers
            .iter()
            .copied()
            .filter(|r| self.ir.register(*r).kind == kind)
            .collect();
        if let [only] = regs.as_slice() {
            return self.local_bit(c, *only, index, span);
        }
        let total = match kind {
            RegisterKind::Quantum => self.ir.circuit(c).num_qubits,
            RegisterKind::Classical => self.ir.circuit(c).num_clbits,
        };
        let mut index = index;
        if index < 0 {
            match total {
                ConstValue::Known(n) => index += n,
                ConstValue::Unknown => return BitRef::Unknown,
            }
        }
        let mut offset = 0;
        for r in regs {
            let Some(size) = self.ir.register(r).size.known() else {
                return BitRef::Unknown;
            };
            if index >= offset && index < offset + size {
                return BitRef::Resolved {
                    register: r,
                    index: index - offset,
                };
            }
            offset += size;
        }
        let what = match kind {
            RegisterKind::Quantum => "qubit",
            RegisterKind::Classical => "clbit",
        };
        let message = format!(
            "{what} index {index} is out of range for circuit `{}` with {offset} {what}s",
            self.circuit_label(c)
        );
        self.diagnostic(span, message);
        BitRef::Unknown
    }

    /// Checks a register-local index against the register and circuit.
    fn local_bit(&mut self, c: CircuitId, register: RegisterId, index: i64, span: Span) -> BitRef {
        let reg = self.ir.register(register);
        let size = reg.size;
        let name = reg.name.clone();
        if !self.ir.circuit(c).registers.contains(&register) {
            let message = format!(
                "register `{name}` is not part of circuit `{}`",
                self.circuit_label(c)
            );
            self.diagnostic(span, message);
            return BitRef::Unknown;
        }
        let index = match (index < 0, size) {
            (false, _) => index,
            (true, ConstValue::Known(n)) => index + n,
            (true, ConstValue::Unknown) => return BitRef::Unknown,
        };
        if let ConstValue::Known(n) = size {
            if index < 0 || index >= n {
                let message = format!("index {index} is out of range for register `{name}` of size {n}");
                self.diagnostic(span, message);
                return BitRef::Unknown;
            }
        }
        BitRef::Resolved { register, index }
    }

    fn circuit_label(&self, c: CircuitId) -> String {
        let circ = self.ir.circuit(c);
        if circ.name.is_empty() {
            format!("circuit{}", c.0)
        } else {
            circ.name.clone()
        }
    }

    fn diagnostic(&mut self, span: Span, message: String) {
        let span = self.source_span(span);
        self.ir.diagnostics.push(Diagnostic { span, message });
    }

    /// Resolves one qubit (or clbit) argument to operands; lists, ranges,
    /// slices and whole registers expand to several.
    fn resolve_bits(&mut self, e: &Expr, c: CircuitId, kind: RegisterKind) -> Vec<BitRef> {
        let bits_attr = match kind {
            RegisterKind::Quantum => "qubits",
            RegisterKind::Classical => "clbits",
        };
        match &e.kind {
            ExprKind::List(items) | ExprKind::Tuple(items) => items
                .iter()
                .flat_map(|i| self.resolve_bits(i, c, kind))
                .collect(),
            ExprKind::Call { .. } => match self.env.eval_range(self.at, e) {
                Some(values) => values
                    .into_iter()
                    .map(|i| self.absolute_bit(c, i, kind, e.span))
                    .collect(),
                None => vec![BitRef::Unknown],
            },
            ExprKind::Subscript { value, index } => {
                if let Some(owner) = self.bits_of(value, bits_attr) {
                    let n = match kind {
                        RegisterKind::Quantum => self.ir.circuit(owner).num_qubits,
                        RegisterKind::Classical => self.ir.circuit(owner).num_clbits,
                    };
                    return self
                        .indices(index, n)
                        .into_iter()
                        .map(|i| match i {
                            Some(i) => {
                                let b = self.absolute_bit(owner, i, kind, e.span);
                                self.check_owner(b, c, e.span)
                            }
                            None => BitRef::Unknown,
                        })
                        .collect();
                }
                match self.lookup(value) {
                    Some(Value::Register(r)) if self.ir.register(r).kind == kind => {
                        let size = self.ir.register(r).size;
                        self.indices(index, size)
                            .into_iter()
                            .map(|i| match i {
                                Some(i) => self.local_bit(c, r, i, e.span),
                                None => BitRef::Unknown,
                            })
                            .collect()
                    }
                    _ => match (&value.kind, self.env.eval(self.at, index).known()) {
                        (ExprKind::List(items) | ExprKind::Tuple(items), Some(i))
                            if i >= 0 && (i as usize) < items.len() =>
                        {
                            let item = items[i as usize].clone();
                            self.resolve_bits(&item, c, kind)
                        }
                        _ => vec![BitRef::Unknown],
                    },
                }
            }
            ExprKind::Name(_) | ExprKind::Attribute { .. } => {
                if let Some(owner) = self.bits_of(e, bits_attr) {
                    return match self.all_bits(owner, kind) {
                        Some(bits) => bits
                            .into_iter()
                            .map(|b| self.check_owner(b, c, e.span))
                            .collect(),
                        None => vec![BitRef::Unknown],
                    };
                }
                match self.lookup(e) {
                    Some(Value::Register(r)) if self.ir.register(r).kind == kind => {
                        match self.ir.register(r).size.known() {
                            Some(n) => (0..n).map(|i| self.local_bit(c, r, i, e.span)).collect(),
                            None => {
                                let b = self.local_bit(c, r, 0, e.span);
                                vec![if b.is_resolved() { BitRef::Unknown } else { b }]
                            }
                        }
                    }
                    Some(_) => vec![BitRef::Unknown],
                    None => self.int_bit(e, c, kind),
                }
            }
            ExprKind::Starred(inner) => self.resolve_bits(inner, c, kind),
            _ => self.int_bit(e, c, kind),
        }
    }

    fn int_bit(&mut self, e: &Expr, c: CircuitId, kind: RegisterKind) -> Vec<BitRef> {
        match self.env.eval(self.at, e) {
            ConstValue::Known(i) => vec![self.absolute_bit(c, i, kind, e.span)],
            ConstValue::Unknown => vec![BitRef::Unknown],
        }
    }

    /// The circuit `x` when `e` is `x.qubits` (or `x.clbits`).
    fn bits_of(&self, e: &Expr, attr: &str) -> Option<CircuitId> {
        match &e.kind {
            ExprKind::Attribute { value, attr: a } if a == attr => self.lookup_circuit(value),
            _ => None,
        }
    }

    /// A bit taken from another circuit's bit list must belong to `c`.
    fn check_owner(&mut self, bit: BitRef, c: CircuitId, span: Span) -> BitRef {
        match bit {
            BitRef::Resolved { register, index } => self.local_bit(c, register, index, span),
            BitRef::Unknown => BitRef::Unknown,
        }
    }

    /// Indices selected by a subscript: a single index or a slice over a
    /// sequence of length `len`. `None` entries are unresolved.
    fn indices(&self, index: &Expr, len: ConstValue) -> Vec<Option<i64>> {
        match &index.kind {
            ExprKind::Slice { lower, upper, step } => {
                let Some(n) = len.known() else {
                    return vec![None];
                };
                let get = |e: &Option<Box<Expr>>| -> Option<Option<i64>> {
                    match e {
                        None => Some(None),
                        Some(e) => self.env.eval(self.at, e).known().map(Some),
                    }
                };
                let (Some(lo), Some(hi), Some(st)) = (get(lower), get(upper), get(step)) else {
                    return vec![None];
                };
                slice_indices(n, lo, hi, st.unwrap_or(1))
                    .map(|v| v.into_iter().map(Some).collect())
                    .unwrap_or_else(|| vec![None])
            }
            _ => vec![self.env.eval(self.at, index).known()],
        }
    }
}

struct ArgValues {
    positional: Vec<Option<Value>>,
    keyword: Vec<(Option<String>, Option<Value>)>,
}

impl ArgValues {
    fn get(&self, pos: usize, name: &str) -> Option<Value> {
        self.positional.get(pos).copied().flatten().or_else(|| {
            self.keyword
                .iter()
                .find(|(k, _)| k.as_deref() == Some(name))
                .and_then(|(_, v)| *v)
        })
    }
}

fn keyword<'e>(keywords: &'e [Keyword], name: &str) -> Option<&'e Expr> {
    keywords
        .iter()
        .find(|k| k.name.as_deref() == Some(name))
        .map(|k| &k.value)
}

fn arg<'e>(args: &'e [Expr], keywords: &'e [Keyword], pos: usize, name: &str) -> Option<&'e Expr> {
    args.get(pos).or_else(|| keyword(keywords, name))
}

fn is_qubit_keyword(name: &str) -> bool {
    name.contains("qubit") || name.starts_with("qarg")
}

fn is_clbit_keyword(name: &str) -> bool {
    name.contains("cbit") || name.contains("clbit") || name.starts_with("carg")
}

/// Python slice semantics over a sequence of length `n`.
fn slice_indices(n: i64, lower: Option<i64>, upper: Option<i64>, step: i64) -> Option<Vec<i64>> {
    if step == 0 {
        return None;
    }
    let clamp = |v: i64, lo: i64, hi: i64| v.max(lo).min(hi);
    let norm = |v: i64| if v < 0 { v + n } else { v };
    let (start, stop) = if step > 0 {
        (
            lower.map_or(0, |v| clamp(norm(v), 0, n)),
            upper.map_or(n, |v| clamp(norm(v), 0, n)),
        )
    } else {
        (
            lower.map_or(n - 1, |v| clamp(norm(v), -1, n - 1)),
            upper.map_or(-1, |v| clamp(norm(v), -1, n - 1)),
        )
    };
    crate::frontend::consts::range_values(start, stop, step)
}

/// `measure_all` adds a classical register unless `add_bits` is the literal
/// `False`.
pub fn classify_measure_all(call: &Expr) -> OperatorKind {
    let add_bits = match &call.kind {
        ExprKind::Call { args, keywords, .. } => arg(args, keywords, 1, "add_bits"),
        _ => None,
    };
    OperatorKind::MeasurementAll {
        creates_new_register: !matches!(add_bits.map(|e| &e.kind), Some(ExprKind::Bool(false))),
    }
}

/// Free names of every function defined in the file, keyed by name.
fn collect_functions(body: &[Stmt]) -> HashMap<String, FunctionInfo> {
    let mut out = HashMap::new();
    visit_all(body, &mut |s| {
        if let StmtKind::FunctionDef {
            name, params, body, ..
        } = &s.kind
        {
            let mut globals = BTreeSet::new();
            let mut read = BTreeSet::new();
            visit_all(body, &mut |inner| {
                if let StmtKind::Global(names) = &inner.kind {
                    globals.extend(names.iter().cloned());
                }
                for e in inner.own_exprs() {
                    for n in e.names() {
                        read.insert(n.to_string());
                    }
                }
            });
            let mut locals: BTreeSet<String> = params.iter().cloned().collect();
            locals.extend(assigned_names(body));
            let free = read
                .into_iter()
                .filter(|n| globals.contains(n) || !locals.contains(n))
                .collect();
            out.insert(
                name.clone(),
                FunctionInfo {
                    returns_circuit: false,
                    free_names: free,
                },
            );
        }
    });
    out
}
