//! The ten rules. Each is a pure function of the IR and, where ordering
//! matters, the flow relation.

use std::collections::BTreeSet;

use super::{RuleId, Warning};
use crate::frontend::ConstValue;
use crate::qflow::{FlowRelation, QubitKey};
use crate::qir::{BitRef, CircuitId, CircuitKind, OperatorEvent, OperatorKind, QuantumIR};

fn qubit_name(ir: &QuantumIR, key: QubitKey) -> String {
    ir.bit_name(BitRef::Resolved {
        register: key.register,
        index: key.index,
    })
}

fn circuit_name(ir: &QuantumIR, c: CircuitId) -> Option<String> {
    Some(ir.circuit(c).name.clone())
}

fn event_warning(ir: &QuantumIR, rule: RuleId, e: &OperatorEvent, message: String) -> Warning {
    Warning::new(rule, e.span.clone(), message, circuit_name(ir, e.circuit))
}

pub fn double_meas(ir: &QuantumIR, flow: &FlowRelation) -> Vec<Warning> {
    flow.may_follow_directly
        .iter()
        .filter(|(a, b, _)| {
            ir.event(*a).kind == OperatorKind::Measurement
                && ir.event(*b).kind == OperatorKind::Measurement
        })
        .map(|&(_, b, q)| {
            let msg = format!("Redundant measurement on the same qubit {}", qubit_name(ir, q));
            event_warning(ir, RuleId::DoubleMeas, ir.event(b), msg)
        })
        .collect()
}

pub fn op_after_meas(ir: &QuantumIR, flow: &FlowRelation) -> Vec<Warning> {
    flow.may_follow_directly
        .iter()
        .filter(|(a, b, _)| {
            ir.event(*a).kind == OperatorKind::Measurement
                && matches!(
                    ir.event(*b).kind,
                    OperatorKind::Gate {
                        is_conditional: false,
                        ..
                    }
                )
        })
        .map(|&(_, b, q)| {
            let msg = format!("Gate after measurement on qubit {}", qubit_name(ir, q));
            event_warning(ir, RuleId::OpAfterMeas, ir.event(b), msg)
        })
        .collect()
}

pub fn meas_all_abuse(ir: &QuantumIR) -> Vec<Warning> {
    ir.events
        .iter()
        .filter(|e| {
            e.kind
                == OperatorKind::MeasurementAll {
                    creates_new_register: true,
                }
                && matches!(ir.circuit(e.circuit).num_clbits, ConstValue::Known(n) if n > 0)
        })
        .map(|e| {
            event_warning(ir, RuleId::MeasAllAbuse, e, "measure_all() with classical register".into())
        })
        .collect()
}

pub fn cond_wo_meas(ir: &QuantumIR) -> Vec<Warning> {
    ir.events
        .iter()
        .filter(|g| {
            matches!(
                g.kind,
                OperatorKind::Gate {
                    is_conditional: true,
                    ..
                }
            )
        })
        .filter(|g| !ir.in_composition(g.circuit))
        .filter(|g| {
            !ir.events_of(g.circuit).any(|m| {
                m.seq < g.seq
                    && matches!(
                        m.kind,
                        OperatorKind::Measurement | OperatorKind::MeasurementAll { .. }
                    )
            })
        })
        .map(|g| {
            event_warning(
                ir,
                RuleId::CondWoMeas,
                g,
                "Conditional gate without a preceding measurement".into(),
            )
        })
        .collect()
}

/// Only circuits built from scratch start in a known state.
fn starts_fresh(ir: &QuantumIR, c: CircuitId) -> bool {
    ir.circuit(c).kind == CircuitKind::Constructor
}

pub fn const_clas_bit(ir: &QuantumIR, flow: &FlowRelation) -> Vec<Warning> {
    let mut out = Vec::new();
    for m in &ir.events {
        if m.kind != OperatorKind::Measurement
            || !starts_fresh(ir, m.circuit)
            || ir.has_subcircuits(m.circuit)
            || flow.unknown_taint.contains(&m.circuit)
        {
            continue;
        }
        for t in flow.timelines.iter().filter(|t| t.events.contains(&m.id)) {
            let transformed = t.events.iter().any(|&e| {
                matches!(
                    ir.event(e).kind,
                    OperatorKind::Gate { .. } | OperatorKind::Reset | OperatorKind::Initialize
                ) && flow.may_follow(e, m.id).contains(&t.key)
            });
            if !transformed {
                let msg = format!(
                    "Measurement of qubit {} that no gate has transformed",
                    qubit_name(ir, t.key)
                );
                out.push(event_warning(ir, RuleId::ConstClasBit, m, msg));
            }
        }
    }
    out
}

/// Circuit `c` together with the copies and transpiled versions made from
/// it; they share its registers.
fn family(ir: &QuantumIR, c: CircuitId) -> Vec<CircuitId> {
    let mut out = vec![c];
    let mut i = 0;
    while i < out.len() {
        let cur = out[i];
        out.extend(
            ir.circuits
                .iter()
                .filter(|d| d.source == Some(cur) && !out.contains(&d.id))
                .map(|d| d.id)
                .collect::<Vec<_>>(),
        );
        i += 1;
    }
    out
}

/// Absolute qubit indices that operations of `c` (or its copies) act on,
/// or `None` when usage cannot be fully known.
fn used_qubits(ir: &QuantumIR, c: CircuitId) -> Option<BTreeSet<i64>> {
    let circ = ir.circuit(c);
    circ.num_qubits.known()?;
    if ir.quantum_registers(c).any(|r| !r.size.is_known())
        || ir.has_subcircuits(c)
        || ir.has_unknown_operator(c)
    {
        return None;
    }
    let mut used = BTreeSet::new();
    for member in family(ir, c) {
        for e in ir.events_of(member) {
            match e.kind {
                OperatorKind::Initialize => return None,
                // these act on every qubit by construction
                OperatorKind::Barrier | OperatorKind::MeasurementAll { .. } => continue,
                _ => {}
            }
            for q in &e.qubit_operands {
                if let Ok(ConstValue::Known(i)) = ir.absolute_index(*q, member) {
                    used.insert(i);
                }
            }
        }
    }
    Some(used)
}

pub fn insuff_clas_reg(ir: &QuantumIR) -> Vec<Warning> {
    let mut out = Vec::new();
    for c in &ir.circuits {
        if c.kind != CircuitKind::Constructor || ir.is_subcircuit(c.id) {
            continue;
        }
        let (ConstValue::Known(qubits), ConstValue::Known(clbits)) = (c.num_qubits, c.num_clbits)
        else {
            continue;
        };
        // measure_all() brings its own register
        let allocates = family(ir, c.id).into_iter().any(|m| {
            ir.events_of(m).any(|e| {
                e.kind
                    == OperatorKind::MeasurementAll {
                        creates_new_register: true,
                    }
            })
        });
        if allocates {
            continue;
        }
        // qubits no operation touches are reported as oversized instead
        let needed = match used_qubits(ir, c.id) {
            Some(used) if !used.is_empty() => used.len() as i64,
            _ => qubits,
        };
        if needed > clbits {
            out.push(Warning::new(
                RuleId::InsuffClasReg,
                c.span.clone(),
                format!("Circuit has more qubits ({qubits}) than classical bits ({clbits})"),
                Some(c.name.clone()),
            ));
        }
    }
    out
}

pub fn oversized_circuit(ir: &QuantumIR) -> Vec<Warning> {
    let mut out = Vec::new();
    for c in &ir.circuits {
        if c.kind != CircuitKind::Constructor {
            continue;
        }
        let ConstValue::Known(n) = c.num_qubits else {
            continue;
        };
        if n <= 0 {
            continue;
        }
        let Some(used) = used_qubits(ir, c.id) else {
            continue;
        };
        if (0..n).any(|i| !used.contains(&i)) {
            out.push(Warning::new(
                RuleId::OversizedCircuit,
                c.span.clone(),
                "Circuit has unused qubits".into(),
                Some(c.name.clone()),
            ));
        }
    }
    out
}

pub fn ghost_compose(ir: &QuantumIR) -> Vec<Warning> {
    ir.compose_calls
        .iter()
        .filter(|c| c.discarded && !c.inplace)
        .map(|c| {
            Warning::new(
                RuleId::GhostCompose,
                c.span.clone(),
                "Result of compose is discarded; the composition has no effect".into(),
                circuit_name(ir, c.parent),
            )
        })
        .collect()
}

pub fn op_after_transp(ir: &QuantumIR) -> Vec<Warning> {
    ir.events
        .iter()
        .filter(|e| {
            let c = ir.circuit(e.circuit);
            c.kind == CircuitKind::Transpiled
                && c.transpile_opt_level == ConstValue::Known(3)
                && matches!(
                    e.kind,
                    OperatorKind::Gate { .. }
                        | OperatorKind::Measurement
                        | OperatorKind::MeasurementAll { .. }
                )
        })
        .map(|e| {
            event_warning(
                ir,
                RuleId::OpAfterTransp,
                e,
                "Operation added after transpilation with optimization_level=3".into(),
            )
        })
        .collect()
}

pub fn old_iden_gate(ir: &QuantumIR) -> Vec<Warning> {
    ir.method_calls
        .iter()
        .filter(|m| m.method == "iden")
        .map(|m| {
            Warning::new(
                RuleId::OldIdenGate,
                m.span.clone(),
                "Deprecated identity gate iden; use id or i instead".into(),
                circuit_name(ir, m.circuit),
            )
        })
        .collect()
}
