//! The method table that maps Qiskit API names to operator categories and
//! argument layouts.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use thiserror::Error;

/// The table shipped with the binary.
pub const BUNDLED: &str = include_str!("../../data/gates.tsv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateCategory {
    ReversibleGate,
    Measurement,
    MeasureAll,
    Reset,
    Initialize,
    Barrier,
    ConditionalMarker,
    /// Library circuit constructors such as `QFT(3)`.
    BuiltinCircuit,
    /// Calls that read a circuit without changing it.
    CircuitConsumer,
    /// Methods that return a new circuit derived from the receiver.
    DerivedCircuit,
}

impl FromStr for GateCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "reversible_gate" => GateCategory::ReversibleGate,
            "measurement" => GateCategory::Measurement,
            "measure_all" => GateCategory::MeasureAll,
            "reset" => GateCategory::Reset,
            "initialize" => GateCategory::Initialize,
            "barrier" => GateCategory::Barrier,
            "conditional_marker" => GateCategory::ConditionalMarker,
            "builtin_circuit" => GateCategory::BuiltinCircuit,
            "circuit_consumer" => GateCategory::CircuitConsumer,
            "derived_circuit" => GateCategory::DerivedCircuit,
            other => return Err(format!("unknown category `{other}`")),
        })
    }
}

/// Argument positions of one kind. `rest_from` covers variadic tails.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Positions {
    pub fixed: Vec<usize>,
    pub rest_from: Option<usize>,
}

impl Positions {
    pub fn contains(&self, pos: usize) -> bool {
        self.fixed.contains(&pos) || self.rest_from.is_some_and(|r| pos >= r)
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty() && self.rest_from.is_none()
    }

    fn parse(field: &str) -> Result<Self, String> {
        let mut out = Positions::default();
        if field == "-" {
            return Ok(out);
        }
        for part in field.split(',') {
            let part = part.trim();
            if let Some(start) = part.strip_suffix('*') {
                let n = start.parse().map_err(|_| format!("bad position `{part}`"))?;
                out.rest_from = Some(n);
            } else {
                let n = part.parse().map_err(|_| format!("bad position `{part}`"))?;
                if out.fixed.contains(&n) {
                    return Err(format!("duplicate position {n}"));
                }
                out.fixed.push(n);
            }
        }
        Ok(out)
    }

    fn overlaps(&self, other: &Positions) -> bool {
        let max = self
            .fixed
            .iter()
            .chain(&other.fixed)
            .chain(self.rest_from.iter())
            .chain(other.rest_from.iter())
            .max()
            .copied()
            .unwrap_or(0);
        (0..=max + 1).any(|p| self.contains(p) && other.contains(p))
    }
}

impl fmt::Display for Positions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.fixed.iter().map(|p| p.to_string()).collect();
        if let Some(r) = self.rest_from {
            parts.push(format!("{r}*"));
        }
        if parts.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateSpec {
    pub method_name: String,
    pub category: GateCategory,
    pub qubit_args: Positions,
    pub clbit_args: Positions,
    pub param_args: Positions,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("gate table line {line}: {message}")]
pub struct GateSpecError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct GateTable {
    entries: Vec<GateSpec>,
    by_name: HashMap<String, usize>,
}

impl GateTable {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled gate table is valid")
    }

    /// Shared instance of the bundled table.
    pub fn bundled_ref() -> &'static GateTable {
        static TABLE: OnceLock<GateTable> = OnceLock::new();
        TABLE.get_or_init(GateTable::bundled)
    }

    /// Parses the tab-separated table format. Blank lines and `#` comments
    /// are skipped; a later entry for the same name replaces an earlier one.
    pub fn parse(text: &str) -> Result<Self, GateSpecError> {
        let mut entries: Vec<GateSpec> = Vec::new();
        let mut by_name = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| GateSpecError {
                line: i + 1,
                message,
            };
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 5 {
                return Err(err(format!("expected 5 columns, found {}", cols.len())));
            }
            let spec = GateSpec {
                method_name: cols[0].to_string(),
                category: cols[1].parse().map_err(err)?,
                qubit_args: Positions::parse(cols[2]).map_err(err)?,
                clbit_args: Positions::parse(cols[3]).map_err(err)?,
                param_args: Positions::parse(cols[4]).map_err(err)?,
            };
            if spec.qubit_args.overlaps(&spec.clbit_args)
                || spec.qubit_args.overlaps(&spec.param_args)
                || spec.clbit_args.overlaps(&spec.param_args)
            {
                return Err(err(format!("overlapping positions for `{}`", spec.method_name)));
            }
            match by_name.get(&spec.method_name) {
                Some(&idx) => entries[idx] = spec,
                None => {
                    by_name.insert(spec.method_name.clone(), entries.len());
                    entries.push(spec);
                }
            }
        }
        Ok(GateTable { entries, by_name })
    }

    pub fn get(&self, name: &str) -> Option<&GateSpec> {
        self.by_name.get(name).map(|&i| &self.entries[i])
    }

    pub fn category(&self, name: &str) -> Option<GateCategory> {
        self.get(name).map(|g| g.category)
    }

    pub fn entries(&self) -> &[GateSpec] {
        &self.entries
    }
}

impl Default for GateTable {
    fn default() -> Self {
        Self::bundled()
    }
}
