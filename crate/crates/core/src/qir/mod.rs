//! Quantum intermediate representation: registers, circuits, composition
//! edges and operator events lifted from one file.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::frontend::{BlockId, ConstValue, ScopeId, StmtId};
use crate::span::SourceSpan;

mod extract;
pub mod gatespec;

pub use extract::extract;
pub use gatespec::{GateCategory, GateSpec, GateTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegisterId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CircuitId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegisterKind {
    Quantum,
    Classical,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterDecl {
    pub id: RegisterId,
    pub kind: RegisterKind,
    /// Variable the register was bound to, or `q`/`c` for the registers a
    /// circuit creates implicitly.
    pub name: String,
    pub size: ConstValue,
    pub span: SourceSpan,
    pub owner_circuits: BTreeSet<CircuitId>,
    pub implicit: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CircuitKind {
    Constructor,
    UserFunctionReturn,
    BuiltinParametrized,
    UnknownWithCircuitMethods,
    Copy,
    Transpiled,
}

impl CircuitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CircuitKind::Constructor => "constructor",
            CircuitKind::UserFunctionReturn => "user_function_return",
            CircuitKind::BuiltinParametrized => "builtin_parametrized",
            CircuitKind::UnknownWithCircuitMethods => "unknown_with_circuit_methods",
            CircuitKind::Copy => "copy",
            CircuitKind::Transpiled => "transpiled",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CircuitDecl {
    pub id: CircuitId,
    pub kind: CircuitKind,
    pub name: String,
    pub num_qubits: ConstValue,
    pub num_clbits: ConstValue,
    /// Associated registers in association order, both kinds.
    pub registers: Vec<RegisterId>,
    /// Only meaningful for transpiled circuits.
    pub transpile_opt_level: ConstValue,
    pub span: SourceSpan,
    pub scope: ScopeId,
    /// Circuit this one was copied or transpiled from.
    pub source: Option<CircuitId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CompositionMechanism {
    Append,
    Compose,
    ReturnedFromFunction,
    ToGateOrInstruction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompositionEdge {
    /// `None` for the likely-subcircuit flags, which have no known parent.
    pub parent: Option<CircuitId>,
    pub child: CircuitId,
    pub mechanism: CompositionMechanism,
    pub span: SourceSpan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnknownCause {
    UnresolvedQubit,
    UnknownCalleeWithCircuitArg,
    GlobalCircuitMutation,
}

impl UnknownCause {
    pub fn as_str(self) -> &'static str {
        match self {
            UnknownCause::UnresolvedQubit => "unresolved_qubit",
            UnknownCause::UnknownCalleeWithCircuitArg => "unknown_callee_with_circuit_arg",
            UnknownCause::GlobalCircuitMutation => "global_circuit_mutation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Gate { name: String, is_conditional: bool },
    Measurement,
    MeasurementAll { creates_new_register: bool },
    Reset,
    Initialize,
    Barrier,
    Unknown { cause: UnknownCause },
}

impl OperatorKind {
    pub fn is_unknown(&self) -> bool {
        matches!(self, OperatorKind::Unknown { .. })
    }

    pub fn label(&self) -> &str {
        match self {
            OperatorKind::Gate { name, .. } => name,
            OperatorKind::Measurement => "measure",
            OperatorKind::MeasurementAll { .. } => "measure_all",
            OperatorKind::Reset => "reset",
            OperatorKind::Initialize => "initialize",
            OperatorKind::Barrier => "barrier",
            OperatorKind::Unknown { .. } => "unknown",
        }
    }
}

/// A qubit or classical bit operand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BitRef {
    Resolved { register: RegisterId, index: i64 },
    Unknown,
}

pub type QubitRef = BitRef;
pub type ClbitRef = BitRef;

impl BitRef {
    pub fn is_resolved(&self) -> bool {
        matches!(self, BitRef::Resolved { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorEvent {
    pub id: EventId,
    pub circuit: CircuitId,
    pub kind: OperatorKind,
    pub qubit_operands: Vec<QubitRef>,
    pub clbit_operands: Vec<ClbitRef>,
    /// Program-order index; equals the position in [`QuantumIR::events`].
    pub seq: u32,
    pub block: BlockId,
    pub stmt: StmtId,
    pub span: SourceSpan,
}

/// One `compose` call, kept for the discarded-result check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComposeCall {
    pub parent: CircuitId,
    pub child: Option<CircuitId>,
    /// The call is a whole expression statement.
    pub discarded: bool,
    pub inplace: bool,
    pub span: SourceSpan,
}

/// A method call on a known circuit, whatever its name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodCall {
    pub circuit: CircuitId,
    pub method: String,
    pub span: SourceSpan,
}

/// Problems found while lifting, such as indices past a register's end.
/// These are not rule warnings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: SourceSpan,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantumIR {
    pub file: Arc<str>,
    pub registers: Vec<RegisterDecl>,
    pub circuits: Vec<CircuitDecl>,
    pub edges: Vec<CompositionEdge>,
    pub events: Vec<OperatorEvent>,
    pub compose_calls: Vec<ComposeCall>,
    pub method_calls: Vec<MethodCall>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("register {register:?} is not associated with circuit {circuit:?}")]
pub struct NotAssociated {
    pub register: RegisterId,
    pub circuit: CircuitId,
}

impl QuantumIR {
    pub fn register(&self, id: RegisterId) -> &RegisterDecl {
        &self.registers[id.0 as usize]
    }

    pub fn circuit(&self, id: CircuitId) -> &CircuitDecl {
        &self.circuits[id.0 as usize]
    }

    pub fn event(&self, id: EventId) -> &OperatorEvent {
        &self.events[id.0 as usize]
    }

    pub fn events_of(&self, circuit: CircuitId) -> impl Iterator<Item = &OperatorEvent> {
        self.events.iter().filter(move |e| e.circuit == circuit)
    }

    pub fn quantum_registers(&self, circuit: CircuitId) -> impl Iterator<Item = &RegisterDecl> {
        self.circuit(circuit)
            .registers
            .iter()
            .map(|r| self.register(*r))
            .filter(|r| r.kind == RegisterKind::Quantum)
    }

    pub fn has_unknown_operator(&self, circuit: CircuitId) -> bool {
        self.events_of(circuit).any(|e| e.kind.is_unknown())
    }

    /// The circuit is embedded in another one, or likely to be.
    pub fn is_subcircuit(&self, circuit: CircuitId) -> bool {
        self.edges.iter().any(|e| e.child == circuit)
    }

    /// Another circuit is embedded into this one.
    pub fn has_subcircuits(&self, circuit: CircuitId) -> bool {
        self.edges.iter().any(|e| e.parent == Some(circuit))
    }

    pub fn in_composition(&self, circuit: CircuitId) -> bool {
        self.is_subcircuit(circuit) || self.has_subcircuits(circuit)
    }

    /// Human-readable operand such as `qreg[0]`.
    pub fn bit_name(&self, bit: BitRef) -> String {
        match bit {
            BitRef::Resolved { register, index } => {
                format!("{}[{index}]", self.register(register).name)
            }
            BitRef::Unknown => "?".to_string(),
        }
    }

    /// Position of a qubit in the whole circuit: its index shifted by the
    /// sizes of the quantum registers associated before its register.
    pub fn absolute_index(
        &self,
        bit: QubitRef,
        circuit: CircuitId,
    ) -> Result<ConstValue, NotAssociated> {
        let BitRef::Resolved { register, index } = bit else {
            return Ok(ConstValue::Unknown);
        };
        let mut offset = ConstValue::Known(0);
        for reg in self.quantum_registers(circuit) {
            if reg.id == register {
                return Ok(offset + ConstValue::Known(index));
            }
            offset = offset + reg.size;
        }
        Err(NotAssociated { register, circuit })
    }
}

impl fmt::Display for QuantumIR {
    /// Compact listing used by debug dumps and golden tests.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.registers {
            let kind = match r.kind {
                RegisterKind::Quantum => "qreg",
                RegisterKind::Classical => "creg",
            };
            writeln!(f, "{kind} {} size={} line={}", r.name, r.size, r.span.line)?;
        }
        for c in &self.circuits {
            let regs: Vec<&str> = c.registers.iter().map(|r| self.register(*r).name.as_str()).collect();
            writeln!(
                f,
                "circuit {} kind={} qubits={} clbits={} regs=[{}] line={}",
                c.name,
                c.kind.as_str(),
                c.num_qubits,
                c.num_clbits,
                regs.join(","),
                c.span.line
            )?;
        }
        for e in &self.events {
            let qs: Vec<String> = e.qubit_operands.iter().map(|q| self.bit_name(*q)).collect();
            let cs: Vec<String> = e.clbit_operands.iter().map(|q| self.bit_name(*q)).collect();
            let label = match &e.kind {
                OperatorKind::Unknown { cause } => format!("unknown:{}", cause.as_str()),
                OperatorKind::Gate { name, is_conditional: true } => format!("{name}.c_if"),
                k => k.label().to_string(),
            };
            writeln!(
                f,
                "event {} {} {label} q=[{}] c=[{}] line={}",
                e.seq,
                self.circuit(e.circuit).name,
                qs.join(","),
                cs.join(","),
                e.span.line
            )?;
        }
        Ok(())
    }
}
