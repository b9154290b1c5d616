//! Random program generator and a reference interpreter that replays the
//! generated operations on concrete qubits.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use qlint::qir::{GateCategory, GateTable};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod criteria;

pub const HEADER: &str = "from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister\n";

#[derive(Clone, Debug)]
pub struct QReg {
    pub name: String,
    pub size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operand {
    /// Index into the whole circuit, written as a bare integer.
    Abs(usize),
    /// `reg[idx]`
    Reg(usize, usize),
    /// `k + offset` where `k` is the loop variable.
    LoopVar(usize),
}

#[derive(Clone, Debug)]
pub enum Op {
    Gate {
        name: String,
        /// Positional arguments in call order; `None` is a parameter slot.
        args: Vec<Option<Operand>>,
    },
    Measure { qubit: Operand, clbit: usize },
    MeasureAll,
    Reset(Operand),
    Barrier,
    /// A call the analyzer cannot resolve: `qc.h(idx)` or `helper(qc)`.
    Unresolved(bool),
}

#[derive(Clone, Debug)]
pub struct Program {
    pub qregs: Vec<QReg>,
    pub clbits: usize,
    pub ops: Vec<Op>,
    /// `(start, len, k)`: ops[start..start+len] sit inside `for k in range(k)`.
    pub looped: Option<(usize, usize, usize)>,
}

/// A rendered line: which op it came from, `None` for declarations.
pub type LineMap = Vec<Option<usize>>;

impl Program {
    pub fn num_qubits(&self) -> usize {
        self.qregs.iter().map(|r| r.size).sum()
    }

    /// Absolute index to (register name, local index).
    pub fn locate(&self, abs: usize) -> (String, usize) {
        let mut base = 0;
        for r in &self.qregs {
            if abs < base + r.size {
                return (r.name.clone(), abs - base);
            }
            base += r.size;
        }
        panic!("qubit {abs} out of range");
    }

    fn abs_of(&self, op: Operand, k: usize) -> usize {
        match op {
            Operand::Abs(i) => i,
            Operand::Reg(r, i) => self.qregs[..r].iter().map(|q| q.size).sum::<usize>() + i,
            Operand::LoopVar(off) => k + off,
        }
    }

    fn operand_text(&self, op: Operand, k: Option<usize>) -> String {
        match op {
            Operand::Abs(i) => i.to_string(),
            Operand::Reg(r, i) => format!("{}[{i}]", self.qregs[r].name),
            Operand::LoopVar(off) => match (k, off) {
                (Some(k), _) => (k + off).to_string(),
                (None, 0) => "k".into(),
                (None, off) => format!("k + {off}"),
            },
        }
    }

    fn op_text(&self, op: &Op, k: Option<usize>) -> String {
        match op {
            Op::Gate { name, args } => {
                let parts: Vec<String> = args
                    .iter()
                    .enumerate()
                    .map(|(i, a)| match a {
                        Some(q) => self.operand_text(*q, k),
                        None => format!("0.{}", i + 1),
                    })
                    .collect();
                format!("qc.{name}({})", parts.join(", "))
            }
            Op::Measure { qubit, clbit } => {
                format!("qc.measure({}, c[{clbit}])", self.operand_text(*qubit, k))
            }
            Op::MeasureAll => "qc.measure_all(add_bits=False)".into(),
            Op::Reset(q) => format!("qc.reset({})", self.operand_text(*q, k)),
            Op::Barrier => "qc.barrier()".into(),
            Op::Unresolved(true) => "qc.h(idx)".into(),
            Op::Unresolved(false) => "helper(qc)".into(),
        }
    }

    fn header(&self) -> (Vec<String>, LineMap) {
        let mut lines = vec![HEADER.trim_end().to_string()];
        for r in &self.qregs {
            lines.push(format!("{} = QuantumRegister({}, \"{}\")", r.name, r.size, r.name));
        }
        lines.push(format!("c = ClassicalRegister({}, \"c\")", self.clbits));
        let regs: Vec<&str> = self.qregs.iter().map(|r| r.name.as_str()).collect();
        lines.push(format!("qc = QuantumCircuit({}, c)", regs.join(", ")));
        let map = vec![None; lines.len()];
        (lines, map)
    }

    /// Source text with the loop (if any) written as a `for` statement.
    pub fn render(&self) -> (String, LineMap) {
        let (mut lines, mut map) = self.header();
        let mut i = 0;
        while i < self.ops.len() {
            match self.looped {
                Some((start, len, k)) if start == i => {
                    lines.push(format!("for k in range({k}):"));
                    map.push(None);
                    for j in start..start + len {
                        lines.push(format!("    {}", self.op_text(&self.ops[j], None)));
                        map.push(Some(j));
                    }
                    i = start + len;
                }
                _ => {
                    lines.push(self.op_text(&self.ops[i], None));
                    map.push(Some(i));
                    i += 1;
                }
            }
        }
        (lines.join("\n") + "\n", map)
    }

    /// Source text with the loop written out iteration by iteration.
    pub fn render_expanded(&self) -> (String, LineMap) {
        let (mut lines, mut map) = self.header();
        for (i, op) in self.ops.iter().enumerate() {
            match self.looped {
                Some((start, len, _)) if i > start && i < start + len => {}
                Some((start, len, k)) if i == start => {
                    for it in 0..k {
                        for j in start..start + len {
                            lines.push(self.op_text(&self.ops[j], Some(it)));
                            map.push(Some(j));
                        }
                    }
                }
                _ => {
                    lines.push(self.op_text(op, None));
                    map.push(Some(i));
                }
            }
        }
        (lines.join("\n") + "\n", map)
    }

    /// The concrete execution order: `(op index, qubits touched)` per step.
    pub fn execute(&self) -> Vec<(usize, Vec<usize>)> {
        let mut steps = Vec::new();
        let mut push = |i: usize, k: usize| {
            let qs = match &self.ops[i] {
                Op::Gate { args, .. } => args.iter().flatten().map(|q| self.abs_of(*q, k)).collect(),
                Op::Measure { qubit, .. } | Op::Reset(qubit) => vec![self.abs_of(*qubit, k)],
                Op::MeasureAll => (0..self.num_qubits()).collect(),
                Op::Barrier | Op::Unresolved(_) => Vec::new(),
            };
            steps.push((i, qs));
        };
        let mut i = 0;
        while i < self.ops.len() {
            match self.looped {
                Some((start, len, k)) if start == i => {
                    for it in 0..k {
                        for j in start..start + len {
                            push(j, it);
                        }
                    }
                    i = start + len;
                }
                _ => {
                    push(i, 0);
                    i += 1;
                }
            }
        }
        steps
    }
}

/// Relations over `(op a, op b, register, index)` as seen by a reference
/// run: per-qubit traces of concrete steps.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Relations {
    pub may_follow: BTreeSet<(usize, usize, String, usize)>,
    pub directly: BTreeSet<(usize, usize, String, usize)>,
}

pub fn reference_relations(p: &Program) -> Relations {
    let mut traces: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (op, qs) in p.execute() {
        let mut qs = qs;
        qs.sort();
        qs.dedup();
        for q in qs {
            traces.entry(q).or_default().push(op);
        }
    }
    let mut rel = Relations::default();
    for (q, trace) in traces {
        let (reg, idx) = p.locate(q);
        for (i, &a) in trace.iter().enumerate() {
            for &b in &trace[i + 1..] {
                rel.may_follow.insert((a, b, reg.clone(), idx));
            }
            if let Some(&b) = trace.get(i + 1) {
                rel.directly.insert((a, b, reg.clone(), idx));
            }
        }
    }
    rel
}

/// Gates from the table with fixed qubit and parameter positions only.
pub fn plain_gates(table: &GateTable) -> Vec<(String, Vec<bool>)> {
    table
        .entries()
        .iter()
        .filter(|g| {
            g.category == GateCategory::ReversibleGate
                && g.qubit_args.rest_from.is_none()
                && g.param_args.rest_from.is_none()
                && g.clbit_args.is_empty()
                && g.method_name != "iden"
        })
        .map(|g| {
            let arity = g.qubit_args.fixed.iter().chain(&g.param_args.fixed).max().map_or(0, |m| m + 1);
            let slots = (0..arity).map(|i| g.qubit_args.fixed.contains(&i)).collect();
            (g.method_name.clone(), slots)
        })
        .collect()
}

pub struct GenOptions {
    pub max_ops: usize,
    pub with_loop: bool,
    pub with_measure_all: bool,
    pub with_unresolved: bool,
}

pub fn random_program(seed: u64, table: &GateTable, opts: &GenOptions) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gates = plain_gates(table);
    let nregs = rng.gen_range(1..=3);
    let qregs: Vec<QReg> = (0..nregs)
        .map(|i| QReg {
            name: format!("r{i}"),
            size: rng.gen_range(1..=4),
        })
        .collect();
    let total: usize = qregs.iter().map(|r| r.size).sum();
    let clbits = total;
    let nops = rng.gen_range(1..=opts.max_ops);
    let looped = if opts.with_loop && nops >= 1 {
        let start = rng.gen_range(0..nops);
        let len = rng.gen_range(1..=(nops - start).min(3));
        Some((start, len, rng.gen_range(1..=10)))
    } else {
        None
    };
    let loop_span = |i: usize| looped.is_some_and(|(s, l, _)| i >= s && i < s + l);
    let reg_of = |abs: usize| -> (usize, usize) {
        let mut base = 0;
        for (r, q) in qregs.iter().enumerate() {
            if abs < base + q.size {
                return (r, abs - base);
            }
            base += q.size;
        }
        unreachable!()
    };
    let mut ops = Vec::with_capacity(nops);
    for i in 0..nops {
        let in_loop = loop_span(i);
        let k = looped.map_or(0, |l| l.2);
        let operand = |rng: &mut ChaCha8Rng, taken: &[usize], single: bool| -> Option<(Operand, usize)> {
            let free: Vec<usize> = (0..total).filter(|q| !taken.contains(q)).collect();
            let q = *free.choose(rng)?;
            // a loop variable operand must stay in range for every iteration
            if in_loop && single && q + k <= total && rng.gen_bool(0.4) {
                return Some((Operand::LoopVar(q), usize::MAX));
            }
            let (r, idx) = reg_of(q);
            Some(if rng.gen_bool(0.5) {
                (Operand::Abs(q), q)
            } else {
                (Operand::Reg(r, idx), q)
            })
        };
        let roll = rng.gen_range(0..100);
        let op = if opts.with_unresolved && rng.gen_bool(0.1) {
            Op::Unresolved(rng.gen_bool(0.5))
        } else if roll < 55 {
            let fitting: Vec<_> = gates
                .iter()
                .filter(|(_, slots)| slots.iter().filter(|s| **s).count() <= total)
                .collect();
            let (name, slots) = fitting.choose(&mut rng).expect("some gate fits");
            let mut taken = Vec::new();
            let mut args = Vec::new();
            let single = slots.iter().filter(|s| **s).count() == 1;
            for &is_qubit in slots.iter() {
                if is_qubit {
                    let (o, q) = operand(&mut rng, &taken, single).expect("enough qubits");
                    // loop-variable operands only occur on single-qubit gates
                    if q != usize::MAX {
                        taken.push(q);
                    }
                    args.push(Some(o));
                } else {
                    args.push(None);
                }
            }
            Op::Gate {
                name: name.clone(),
                args,
            }
        } else if roll < 85 {
            let (o, _) = operand(&mut rng, &[], true).unwrap();
            Op::Measure {
                qubit: o,
                clbit: rng.gen_range(0..clbits),
            }
        } else if roll < 92 {
            Op::Reset(operand(&mut rng, &[], true).unwrap().0)
        } else if roll < 96 || !opts.with_measure_all {
            Op::Barrier
        } else {
            Op::MeasureAll
        };
        ops.push(op);
    }
    Program {
        qregs,
        clbits,
        ops,
        looped,
    }
}

/// Writes `n` generated programs (with loops) into `dir`.
pub fn write_corpus(dir: &Path, n: usize, table: &GateTable) -> Vec<PathBuf> {
    let opts = GenOptions {
        max_ops: 10,
        with_loop: true,
        with_measure_all: true,
        with_unresolved: true,
    };
    (0..n)
        .map(|i| {
            let p = random_program(1000 + i as u64, table, &opts);
            let path = dir.join(format!("prog_{i:03}.py"));
            std::fs::write(&path, p.render().0).unwrap();
            path
        })
        .collect()
}
