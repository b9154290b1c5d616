//! Static analysis of quantum programs written against Qiskit.

pub mod analyses;
pub mod cli;
pub mod frontend;
pub mod pipeline;
pub mod qflow;
pub mod qir;
pub mod report;
pub mod span;
