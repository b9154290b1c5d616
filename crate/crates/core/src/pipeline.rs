//! The per-file analysis pipeline: parse, fold constants, unroll, build the
//! CFG, lift to the IR and derive the data flow.

use std::collections::BTreeSet;

use crate::analyses::{run_all, RuleId, Warning};
use crate::frontend::{
    build_cfg, parse_file, propagate_constants, unroll_loops, Cfg, ConstEnv, ModuleAst, SyntaxError,
};
use crate::qflow::{build_flow, FlowRelation};
use crate::qir::{extract, GateTable, QuantumIR};

/// Every intermediate product for one file.
#[derive(Debug)]
pub struct Analysis {
    pub ast: ModuleAst,
    pub env: ConstEnv,
    pub cfg: Cfg,
    pub ir: QuantumIR,
    pub flow: FlowRelation,
}

pub fn analyze(
    source: &str,
    file: &str,
    max_unroll: usize,
    gates: &GateTable,
) -> Result<Analysis, SyntaxError> {
    let parsed = parse_file(source, file)?;
    let ast = unroll_loops(&parsed, max_unroll);
    let env = propagate_constants(&ast);
    let cfg = build_cfg(&ast);
    let ir = extract(&ast, &env, &cfg, gates);
    let flow = build_flow(&ir, &cfg);
    Ok(Analysis {
        ast,
        env,
        cfg,
        ir,
        flow,
    })
}

impl Analysis {
    pub fn warnings(&self, enabled: &BTreeSet<RuleId>) -> Vec<Warning> {
        run_all(&self.ir, &self.flow, enabled)
    }
}

/// Warnings for one source text, before suppression comments.
pub fn check_source(
    source: &str,
    file: &str,
    enabled: &BTreeSet<RuleId>,
) -> Result<Vec<Warning>, SyntaxError> {
    let a = analyze(source, file, crate::frontend::DEFAULT_MAX_ITERATIONS, GateTable::bundled_ref())?;
    Ok(a.warnings(enabled))
}
