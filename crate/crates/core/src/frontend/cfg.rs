//! Intra-procedural control-flow graph over statements.
//!
//! The module body and every function body form separate scopes with their
//! own entry and exit blocks. Compound statements (`if`, loops, `with`) are
//! placed in the block that evaluates their header; their bodies get fresh
//! blocks. Opaque statements are atomic.

use std::collections::{BTreeSet, HashMap, VecDeque};

use super::ast::*;
use super::consts::ScopeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub u32);

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: u32,
    pub scope: ScopeId,
    pub stmts: Vec<StmtId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScopeCfg {
    pub scope: ScopeId,
    pub entry: BlockId,
    pub exit: BlockId,
}

#[derive(Clone, Debug, Default)]
pub struct Cfg {
    pub blocks: Vec<BasicBlock>,
    pub edges: BTreeSet<(BlockId, BlockId)>,
    /// Edges that return to a loop header.
    pub back_edges: BTreeSet<(BlockId, BlockId)>,
    pub scopes: Vec<ScopeCfg>,
    block_of: HashMap<StmtId, BlockId>,
    succs: Vec<Vec<BlockId>>,
}

impl Cfg {
    pub fn block_of(&self, stmt: StmtId) -> Option<BlockId> {
        self.block_of.get(&stmt).copied()
    }

    pub fn successors(&self, block: BlockId) -> &[BlockId] {
        &self.succs[block.0 as usize]
    }

    pub fn block(&self, id: BlockId) -> &BasicBlock {
        &self.blocks[id.0 as usize]
    }

    /// Blocks reachable from `from` through at least one edge.
    pub fn reachable_from(&self, from: BlockId) -> BTreeSet<BlockId> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<BlockId> = self.successors(from).iter().copied().collect();
        while let Some(b) = queue.pop_front() {
            if seen.insert(b) {
                queue.extend(self.successors(b).iter().copied());
            }
        }
        seen
    }

    /// Edges that leave a block with several successors.
    pub fn branch_edge_count(&self) -> usize {
        self.succs.iter().filter(|s| s.len() > 1).map(|s| s.len()).sum()
    }

    /// Blocks of one scope, entry and exit included.
    pub fn scope_blocks(&self, scope: ScopeId) -> impl Iterator<Item = &BasicBlock> {
        self.blocks.iter().filter(move |b| b.scope == scope)
    }
}

pub fn build_cfg(ast: &ModuleAst) -> Cfg {
    let mut builder = Builder {
        cfg: Cfg::default(),
        next_scope: 1,
        loops: Vec::new(),
        exit: BlockId(0),
        scope: ScopeId(0),
    };
    builder.scope(&ast.body, ScopeId(0));
    let n = builder.cfg.blocks.len();
    let mut succs = vec![Vec::new(); n];
    for (a, b) in &builder.cfg.edges {
        succs[a.0 as usize].push(*b);
    }
    builder.cfg.succs = succs;
    builder.cfg
}

struct Builder {
    cfg: Cfg,
    next_scope: u32,
    /// (header, after) of enclosing loops, innermost last.
    loops: Vec<(BlockId, BlockId)>,
    exit: BlockId,
    scope: ScopeId,
}

impl Builder {
    fn new_block(&mut self) -> BlockId {
        let id = self.cfg.blocks.len() as u32;
        self.cfg.blocks.push(BasicBlock {
            id,
            scope: self.scope,
            stmts: Vec::new(),
        });
        BlockId(id)
    }

    fn edge(&mut self, from: BlockId, to: BlockId) {
        self.cfg.edges.insert((from, to));
    }

    fn place(&mut self, block: BlockId, stmt: &Stmt) {
        self.cfg.blocks[block.0 as usize].stmts.push(stmt.id);
        self.cfg.block_of.insert(stmt.id, block);
    }

    fn scope(&mut self, body: &[Stmt], scope: ScopeId) {
        let saved = (std::mem::take(&mut self.loops), self.exit, self.scope);
        self.scope = scope;
        let entry = self.new_block();
        let exit = self.new_block();
        self.exit = exit;
        let end = self.seq(body, entry);
        if let Some(end) = end {
            self.edge(end, exit);
        }
        self.cfg.scopes.push(ScopeCfg { scope, entry, exit });
        (self.loops, self.exit, self.scope) = saved;
    }

    /// Lays out `stmts` starting in `current`; returns the block where
    /// control continues, or `None` when every path has left.
    fn seq(&mut self, stmts: &[Stmt], mut current: BlockId) -> Option<BlockId> {
        let mut live = true;
        for stmt in stmts {
            if !live {
                // unreachable code still needs a block
                current = self.new_block();
                live = true;
            }
            match self.stmt(stmt, current) {
                Some(next) => current = next,
                None => live = false,
            }
        }
        live.then_some(current)
    }

    fn stmt(&mut self, stmt: &Stmt, current: BlockId) -> Option<BlockId> {
        match &stmt.kind {
            StmtKind::If { body, orelse, .. } => {
                self.place(current, stmt);
                let then_block = self.new_block();
                self.edge(current, then_block);
                let then_end = self.seq(body, then_block);
                let else_end = if orelse.is_empty() {
                    Some(current)
                } else {
                    let else_block = self.new_block();
                    self.edge(current, else_block);
                    self.seq(orelse, else_block)
                };
                let join = self.new_block();
                for end in [then_end, else_end].into_iter().flatten() {
                    self.edge(end, join);
                }
                if then_end.is_none() && else_end.is_none() {
                    None
                } else {
                    Some(join)
                }
            }
            StmtKind::For { body, orelse, .. } | StmtKind::While { body, orelse, .. } => {
                let header = self.new_block();
                self.edge(current, header);
                self.place(header, stmt);
                let after = self.new_block();
                let body_block = self.new_block();
                self.edge(header, body_block);
                self.loops.push((header, after));
                let body_end = self.seq(body, body_block);
                self.loops.pop();
                if let Some(end) = body_end {
                    self.edge(end, header);
                    self.cfg.back_edges.insert((end, header));
                }
                if orelse.is_empty() {
                    self.edge(header, after);
                } else {
                    let else_block = self.new_block();
                    self.edge(header, else_block);
                    if let Some(end) = self.seq(orelse, else_block) {
                        self.edge(end, after);
                    }
                }
                Some(after)
            }
            StmtKind::With { body, .. } => {
                self.place(current, stmt);
                self.seq(body, current)
            }
            StmtKind::FunctionDef { body, .. } => {
                self.place(current, stmt);
                let scope = ScopeId(self.next_scope);
                self.next_scope += 1;
                self.scope(body, scope);
                Some(current)
            }
            StmtKind::Opaque { bodies, .. } => {
                self.place(current, stmt);
                for body in bodies {
                    self.nested_functions(body);
                }
                Some(current)
            }
            StmtKind::Return(_) => {
                self.place(current, stmt);
                let exit = self.exit;
                self.edge(current, exit);
                None
            }
            StmtKind::Break => {
                self.place(current, stmt);
                if let Some(&(_, after)) = self.loops.last() {
                    self.edge(current, after);
                }
                None
            }
            StmtKind::Continue => {
                self.place(current, stmt);
                if let Some(&(header, _)) = self.loops.last() {
                    self.edge(current, header);
                    self.cfg.back_edges.insert((current, header));
                }
                None
            }
            StmtKind::Assign { .. }
            | StmtKind::AugAssign { .. }
            | StmtKind::Expr(_)
            | StmtKind::Global(_)
            | StmtKind::Pass => {
                self.place(current, stmt);
                Some(current)
            }
        }
    }

    /// Function definitions nested in opaque constructs (class bodies,
    /// `try` blocks) still get their own scopes.
    fn nested_functions(&mut self, stmts: &[Stmt]) {
        for stmt in stmts {
            match &stmt.kind {
                StmtKind::FunctionDef { body, .. } => {
                    let scope = ScopeId(self.next_scope);
                    self.next_scope += 1;
                    self.scope(body, scope);
                }
                StmtKind::Opaque { bodies, .. } => {
                    for body in bodies {
                        self.nested_functions(body);
                    }
                }
                _ => {
                    for block in stmt.child_blocks() {
                        self.nested_functions(block);
                    }
                }
            }
        }
    }
}
