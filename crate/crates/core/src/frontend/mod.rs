//! Parsing and normalization of Python sources.

pub mod ast;
pub mod cfg;
pub mod consts;
pub mod lexer;
pub mod parser;
pub mod unroll;

pub use ast::{ModuleAst, Stmt, StmtId, StmtKind};
pub use cfg::{build_cfg, BlockId, Cfg};
pub use consts::{propagate_constants, ConstEnv, ConstValue, ScopeId};
pub use parser::{parse_file, SyntaxError};
pub use unroll::{unroll_loops, DEFAULT_MAX_ITERATIONS};
