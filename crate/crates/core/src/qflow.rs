//! Quantum data flow: a per-qubit "may" order over operator events.
//!
//! Two events are ordered only when they touch the same qubit of the same
//! circuit and some control-flow path executes one before the other.
//! Barriers move no quantum data and are left out of the timelines.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use crate::frontend::{BlockId, Cfg};
use crate::qir::{BitRef, CircuitId, EventId, OperatorKind, QuantumIR, RegisterId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitKey {
    pub circuit: CircuitId,
    pub register: RegisterId,
    pub index: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QubitTimeline {
    pub key: QubitKey,
    /// Events touching the qubit, ordered by sequence number.
    pub events: Vec<EventId>,
}

#[derive(Clone, Debug, Default)]
pub struct FlowRelation {
    pub timelines: Vec<QubitTimeline>,
    pub may_follow: BTreeSet<(EventId, EventId, QubitKey)>,
    /// Pairs without an intervening event on the same qubit. Pairs with an
    /// unknown operator at either end are left out.
    pub may_follow_directly: BTreeSet<(EventId, EventId, QubitKey)>,
    pub unknown_taint: BTreeSet<CircuitId>,
    unknown_events: HashSet<EventId>,
    follow_index: HashMap<(EventId, EventId), Vec<QubitKey>>,
    direct_index: HashMap<(EventId, EventId), QubitKey>,
}

impl FlowRelation {
    /// Qubits on which `b` may execute after `a`.
    pub fn may_follow(&self, a: EventId, b: EventId) -> &[QubitKey] {
        self.follow_index.get(&(a, b)).map_or(&[], Vec::as_slice)
    }

    pub fn may_follow_directly(&self, a: EventId, b: EventId) -> Option<QubitKey> {
        self.direct_index.get(&(a, b)).copied()
    }

    /// True when `a`, `b`, `c` may execute in this order, each step on a
    /// shared qubit. Unknown operators never take part.
    pub fn sorted_in_order(&self, a: EventId, b: EventId, c: EventId) -> bool {
        if [a, b, c].iter().any(|e| self.unknown_events.contains(e)) {
            return false;
        }
        !self.may_follow(a, b).is_empty() && !self.may_follow(b, c).is_empty()
    }

    pub fn is_unknown(&self, e: EventId) -> bool {
        self.unknown_events.contains(&e)
    }

    /// One line per qubit: the ordered event names with their lines.
    pub fn dump(&self, ir: &QuantumIR) -> String {
        let mut out = String::new();
        for t in &self.timelines {
            let circuit = &ir.circuit(t.key.circuit).name;
            let bit = ir.bit_name(BitRef::Resolved {
                register: t.key.register,
                index: t.key.index,
            });
            let _ = write!(out, "{}:{circuit} {bit}:", ir.file);
            for e in &t.events {
                let ev = ir.event(*e);
                let _ = write!(out, " {}@{}:{}", ev.kind.label(), ev.span.line, ev.span.column);
            }
            out.push('\n');
        }
        out
    }
}

/// Qubits an event occupies on the timelines.
fn touched_qubits(ir: &QuantumIR, e: &crate::qir::OperatorEvent) -> Vec<(RegisterId, i64)> {
    match e.kind {
        OperatorKind::Barrier => Vec::new(),
        OperatorKind::MeasurementAll { .. } => {
            let mut out = Vec::new();
            for reg in ir.quantum_registers(e.circuit) {
                match reg.size.known() {
                    Some(n) => out.extend((0..n).map(|i| (reg.id, i))),
                    None => return Vec::new(),
                }
            }
            out
        }
        _ => e
            .qubit_operands
            .iter()
            .filter_map(|q| match q {
                BitRef::Resolved { register, index } => Some((*register, *index)),
                BitRef::Unknown => None,
            })
            .collect(),
    }
}

pub fn build_flow(ir: &QuantumIR, cfg: &Cfg) -> FlowRelation {
    let mut flow = FlowRelation::default();
    for e in &ir.events {
        if e.kind.is_unknown() {
            flow.unknown_events.insert(e.id);
            flow.unknown_taint.insert(e.circuit);
        }
    }

    let mut lines: BTreeMap<QubitKey, Vec<EventId>> = BTreeMap::new();
    for e in &ir.events {
        let mut qubits = touched_qubits(ir, e);
        qubits.sort();
        qubits.dedup();
        for (register, index) in qubits {
            let key = QubitKey {
                circuit: e.circuit,
                register,
                index,
            };
            lines.entry(key).or_default().push(e.id);
        }
    }

    // unknown operators whose qubits are not all known may sit on any qubit
    // of their circuit; they break directness without joining timelines
    let mut wild: BTreeMap<CircuitId, Vec<EventId>> = BTreeMap::new();
    for e in &ir.events {
        let open = e.qubit_operands.is_empty() || e.qubit_operands.iter().any(|q| !q.is_resolved());
        if e.kind.is_unknown() && open {
            wild.entry(e.circuit).or_default().push(e.id);
        }
    }

    let mut reach = Reachability::new(cfg);
    for (key, events) in lines {
        // events are pushed in seq order already
        for &a in &events {
            let ea = ir.event(a);
            for &b in &events {
                let eb = ir.event(b);
                if reach.before(ea.block, ea.seq, eb.block, eb.seq) {
                    flow.may_follow.insert((a, b, key));
                }
            }
        }
        let mut blocking = events.clone();
        if let Some(w) = wild.get(&key.circuit) {
            blocking.extend(w.iter().copied());
            blocking.sort();
            blocking.dedup();
        }
        for (a, b) in direct_pairs(ir, cfg, &blocking) {
            if !flow.unknown_events.contains(&a) && !flow.unknown_events.contains(&b) {
                flow.may_follow_directly.insert((a, b, key));
            }
        }
        flow.timelines.push(QubitTimeline { key, events });
    }

    for &(a, b, q) in &flow.may_follow {
        flow.follow_index.entry((a, b)).or_default().push(q);
    }
    for &(a, b, q) in &flow.may_follow_directly {
        flow.direct_index.entry((a, b)).or_insert(q);
    }
    flow
}

/// Block reachability with memoized forward closures.
struct Reachability<'c> {
    cfg: &'c Cfg,
    cache: HashMap<BlockId, BTreeSet<BlockId>>,
}

impl<'c> Reachability<'c> {
    fn new(cfg: &'c Cfg) -> Self {
        Reachability {
            cfg,
            cache: HashMap::new(),
        }
    }

    fn reachable(&mut self, from: BlockId) -> &BTreeSet<BlockId> {
        let cfg = self.cfg;
        self.cache
            .entry(from)
            .or_insert_with(|| cfg.reachable_from(from))
    }

    /// Some path executes the event at (`a`, `seq_a`) before the one at
    /// (`b`, `seq_b`).
    fn before(&mut self, a: BlockId, seq_a: u32, b: BlockId, seq_b: u32) -> bool {
        (a == b && seq_a < seq_b) || self.reachable(a).contains(&b)
    }
}

/// Pairs (a, b) of timeline events where some path reaches b from a
/// without passing another event of the timeline.
fn direct_pairs(ir: &QuantumIR, cfg: &Cfg, events: &[EventId]) -> Vec<(EventId, EventId)> {
    let mut by_block: HashMap<BlockId, Vec<EventId>> = HashMap::new();
    for &e in events {
        by_block.entry(ir.event(e).block).or_default().push(e);
    }
    let mut out = Vec::new();
    for &a in events {
        let block = ir.event(a).block;
        let local = &by_block[&block];
        let pos = local.iter().position(|&x| x == a).expect("event is in its block");
        if let Some(&next) = local.get(pos + 1) {
            out.push((a, next));
            continue;
        }
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<BlockId> = cfg.successors(block).iter().copied().collect();
        while let Some(bl) = queue.pop_front() {
            if !seen.insert(bl) {
                continue;
            }
            match by_block.get(&bl) {
                Some(evs) => out.push((a, evs[0])),
                None => queue.extend(cfg.successors(bl).iter().copied()),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{build_cfg, parse_file, propagate_constants, unroll_loops};
    use crate::qir::{extract, GateTable};

    fn flow_of(src: &str) -> (QuantumIR, FlowRelation) {
        let ast = unroll_loops(&parse_file(src, "t.py").unwrap(), 10);
        let env = propagate_constants(&ast);
        let cfg = build_cfg(&ast);
        let ir = extract(&ast, &env, &cfg, &GateTable::bundled());
        let flow = build_flow(&ir, &cfg);
        (ir, flow)
    }

    fn ev(i: u32) -> EventId {
        EventId(i)
    }

    #[test]
    fn measure_then_ry() {
        let src = "qreg = QuantumRegister(4)\ncreg = ClassicalRegister(3)\ncirc = QuantumCircuit(qreg, creg)\nfor i in range(3):\n    circ.h(i)\ncirc.measure(qreg[0], creg[0])\ncirc.ry(0.9, qreg[0])\n";
        let (_, flow) = flow_of(src);
        let key = flow.may_follow_directly(ev(3), ev(4)).unwrap();
        assert_eq!((key.register, key.index), (RegisterId(0), 0));
        assert!(flow.may_follow_directly(ev(0), ev(4)).is_none());
        assert!(!flow.may_follow(ev(0), ev(4)).is_empty());
    }

    #[test]
    fn different_registers_are_unrelated() {
        let (_, flow) = flow_of(
            "a = QuantumRegister(1)\nb = QuantumRegister(1)\nc = ClassicalRegister(2)\nqc = QuantumCircuit(a, b, c)\nqc.measure(a[0], c[0])\nqc.measure(b[0], c[1])\n",
        );
        assert!(flow.may_follow.is_empty());
    }

    #[test]
    fn single_operator_has_no_relations() {
        let (_, flow) = flow_of("qc = QuantumCircuit(1)\nqc.h(0)\n");
        assert!(flow.may_follow.is_empty() && flow.may_follow_directly.is_empty());
        assert_eq!(flow.timelines.len(), 1);
    }

    #[test]
    fn intervening_gate_breaks_directness() {
        let (_, flow) = flow_of("qc = QuantumCircuit(1, 2)\nqc.measure(0, 0)\nqc.h(0)\nqc.measure(0, 1)\n");
        assert!(flow.may_follow_directly(ev(0), ev(2)).is_none());
        assert!(!flow.may_follow(ev(0), ev(2)).is_empty());
    }

    #[test]
    fn barriers_do_not_intervene() {
        let (_, flow) = flow_of("qc = QuantumCircuit(1, 2)\nqc.measure(0, 0)\nqc.barrier()\nqc.measure(0, 1)\n");
        assert!(flow.may_follow_directly(ev(0), ev(2)).is_some());
    }

    #[test]
    fn sorted_in_order_on_a_line() {
        let (_, flow) = flow_of("qc = QuantumCircuit(1, 1)\nqc.h(0)\nqc.measure(0, 0)\nqc.z(0)\n");
        assert!(flow.sorted_in_order(ev(0), ev(1), ev(2)));
        for (a, b, c) in [(1, 0, 2), (0, 2, 1), (2, 1, 0), (1, 2, 0), (2, 0, 1)] {
            assert!(!flow.sorted_in_order(ev(a), ev(b), ev(c)));
        }
    }

    #[test]
    fn unknown_operands_are_excluded() {
        let (_, flow) = flow_of("qc = QuantumCircuit(2, 1)\nqc.h(0)\nqc.cx(0, k)\nqc.measure(0, 0)\n");
        assert!(flow.is_unknown(ev(1)));
        assert!(!flow.sorted_in_order(ev(0), ev(1), ev(2)));
        assert!(flow.may_follow_directly(ev(0), ev(1)).is_none());
        // the unknown operator still sits between h and measure
        assert!(flow.may_follow_directly(ev(0), ev(2)).is_none());
        assert!(flow.unknown_taint.contains(&CircuitId(0)));
    }

    #[test]
    fn opaque_calls_break_directness() {
        let (ir, flow) = flow_of("qc = QuantumCircuit(1, 1)\nqc.measure(0, 0)\nhelper(qc)\nqc.measure(0, 0)\n");
        assert!(ir.event(ev(1)).kind.is_unknown());
        assert!(flow.may_follow_directly(ev(0), ev(2)).is_none());
        assert!(!flow.may_follow(ev(0), ev(2)).is_empty());
        // not on the timeline itself
        assert_eq!(flow.timelines[0].events, [ev(0), ev(2)]);
    }

    #[test]
    fn branches_are_unordered() {
        let (_, flow) = flow_of(
            "qc = QuantumCircuit(1, 1)\nqc.h(0)\nif flag:\n    qc.x(0)\nelse:\n    qc.z(0)\nqc.measure(0, 0)\n",
        );
        assert!(flow.may_follow(ev(1), ev(2)).is_empty());
        assert!(flow.may_follow(ev(2), ev(1)).is_empty());
        assert!(flow.may_follow_directly(ev(0), ev(1)).is_some());
        assert!(flow.may_follow_directly(ev(0), ev(2)).is_some());
        assert!(flow.may_follow_directly(ev(1), ev(3)).is_some());
        assert!(flow.may_follow_directly(ev(2), ev(3)).is_some());
        // h may reach measure directly when the if has no else
        let (_, flow) = flow_of("qc = QuantumCircuit(1, 1)\nqc.h(0)\nif flag:\n    qc.x(0)\nqc.measure(0, 0)\n");
        assert!(flow.may_follow_directly(ev(0), ev(2)).is_some());
    }

    #[test]
    fn loop_bodies_relate_both_ways() {
        let (_, flow) = flow_of("qc = QuantumCircuit(1, 1)\nfor k in range(n):\n    qc.h(0)\n    qc.measure(0, 0)\n");
        assert!(!flow.may_follow(ev(0), ev(1)).is_empty());
        assert!(!flow.may_follow(ev(1), ev(0)).is_empty());
        assert!(flow.may_follow_directly(ev(1), ev(0)).is_some());
    }

    #[test]
    fn measure_all_spans_every_qubit() {
        let (ir, flow) = flow_of("qc = QuantumCircuit(2, 2)\nqc.h(1)\nqc.measure_all()\n");
        assert!(flow.may_follow_directly(ev(0), ev(1)).is_some());
        assert_eq!(flow.timelines.len(), 2);
        assert!(flow.dump(&ir).contains("qc q[1]: h@2:1 measure_all@3:1"));
    }
}
