//! Rule catalog and the driver that runs enabled rules over one file.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::qflow::FlowRelation;
use crate::qir::QuantumIR;
use crate::span::SourceSpan;

pub mod rules;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleId {
    #[serde(rename = "double-meas")]
    DoubleMeas,
    #[serde(rename = "op-after-meas")]
    OpAfterMeas,
    #[serde(rename = "meas-all-abuse")]
    MeasAllAbuse,
    #[serde(rename = "cond-wo-meas")]
    CondWoMeas,
    #[serde(rename = "const-clas-bit")]
    ConstClasBit,
    #[serde(rename = "insuff-clas-reg")]
    InsuffClasReg,
    #[serde(rename = "oversized-circuit")]
    OversizedCircuit,
    #[serde(rename = "ghost-compose")]
    GhostCompose,
    #[serde(rename = "op-after-transp")]
    OpAfterTransp,
    #[serde(rename = "old-iden-gate")]
    OldIdenGate,
}

impl RuleId {
    pub const ALL: [RuleId; 10] = [
        RuleId::DoubleMeas,
        RuleId::OpAfterMeas,
        RuleId::MeasAllAbuse,
        RuleId::CondWoMeas,
        RuleId::ConstClasBit,
        RuleId::InsuffClasReg,
        RuleId::OversizedCircuit,
        RuleId::GhostCompose,
        RuleId::OpAfterTransp,
        RuleId::OldIdenGate,
    ];

    /// Rules enabled without flags: the ones precise enough to leave on.
    pub const DEFAULT: [RuleId; 6] = [
        RuleId::DoubleMeas,
        RuleId::OpAfterMeas,
        RuleId::MeasAllAbuse,
        RuleId::CondWoMeas,
        RuleId::GhostCompose,
        RuleId::OpAfterTransp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::DoubleMeas => "double-meas",
            RuleId::OpAfterMeas => "op-after-meas",
            RuleId::MeasAllAbuse => "meas-all-abuse",
            RuleId::CondWoMeas => "cond-wo-meas",
            RuleId::ConstClasBit => "const-clas-bit",
            RuleId::InsuffClasReg => "insuff-clas-reg",
            RuleId::OversizedCircuit => "oversized-circuit",
            RuleId::GhostCompose => "ghost-compose",
            RuleId::OpAfterTransp => "op-after-transp",
            RuleId::OldIdenGate => "old-iden-gate",
        }
    }

    pub fn is_default(self) -> bool {
        Self::DEFAULT.contains(&self)
    }

    pub fn description(self) -> &'static str {
        match self {
            RuleId::DoubleMeas => "Two measurements of the same qubit with nothing in between",
            RuleId::OpAfterMeas => "A gate applied to a qubit that was just measured",
            RuleId::MeasAllAbuse => "measure_all() adds a new register to a circuit that already has classical bits",
            RuleId::CondWoMeas => "A conditional gate with no measurement before it",
            RuleId::ConstClasBit => "Measurement of a qubit that is still in its initial state",
            RuleId::InsuffClasReg => "Fewer classical bits than qubits to hold the results",
            RuleId::OversizedCircuit => "Qubits that no operation ever uses",
            RuleId::GhostCompose => "compose() result is dropped, so the composition has no effect",
            RuleId::OpAfterTransp => "Operation added after transpiling with optimization level 3",
            RuleId::OldIdenGate => "Use of the removed iden gate",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("unknown rule id `{0}`")]
pub struct UnknownRule(pub String);

impl FromStr for RuleId {
    type Err = UnknownRule;
    fn from_str(s: &str) -> Result<Self, UnknownRule> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| UnknownRule(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Warning {
    pub rule: RuleId,
    pub span: SourceSpan,
    pub message: String,
    /// Name of the circuit the warning is about.
    pub circuit: Option<String>,
    pub severity: Severity,
}

impl Warning {
    pub fn new(rule: RuleId, span: SourceSpan, message: String, circuit: Option<String>) -> Self {
        Warning {
            rule,
            span,
            message,
            circuit,
            severity: Severity::Warning,
        }
    }

    pub fn sort_key(&self) -> (&str, u32, u32, &'static str) {
        (&self.span.file, self.span.line, self.span.column, self.rule.as_str())
    }

    /// Total order extending [`Warning::sort_key`], so sorting never depends
    /// on input order.
    pub fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key()
            .cmp(&other.sort_key())
            .then_with(|| (self.span.end_line, self.span.end_column).cmp(&(other.span.end_line, other.span.end_column)))
            .then_with(|| self.message.cmp(&other.message))
            .then_with(|| self.circuit.cmp(&other.circuit))
    }
}

/// Runs the enabled rules; the result is deduplicated by (rule, span) and
/// sorted by position, then rule id.
pub fn run_all(ir: &QuantumIR, flow: &FlowRelation, enabled: &BTreeSet<RuleId>) -> Vec<Warning> {
    let mut out = Vec::new();
    for rule in RuleId::ALL {
        if !enabled.contains(&rule) {
            continue;
        }
        out.extend(match rule {
            RuleId::DoubleMeas => rules::double_meas(ir, flow),
            RuleId::OpAfterMeas => rules::op_after_meas(ir, flow),
            RuleId::MeasAllAbuse => rules::meas_all_abuse(ir),
            RuleId::CondWoMeas => rules::cond_wo_meas(ir),
            RuleId::ConstClasBit => rules::const_clas_bit(ir, flow),
            RuleId::InsuffClasReg => rules::insuff_clas_reg(ir),
            RuleId::OversizedCircuit => rules::oversized_circuit(ir),
            RuleId::GhostCompose => rules::ghost_compose(ir),
            RuleId::OpAfterTransp => rules::op_after_transp(ir),
            RuleId::OldIdenGate => rules::old_iden_gate(ir),
        });
    }
    let mut seen = HashSet::new();
    out.retain(|w| seen.insert((w.rule, w.span.clone())));
    out.sort_by(Warning::canonical_cmp);
    out
}
