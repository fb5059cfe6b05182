//! Boolean circuits for length-ODE programs: the gate-level representation,
//! its text format, and compilers from classified definitions.

pub mod builder;
pub mod compile;
pub mod format;
pub mod ir;
pub mod word;

pub use compile::{compile, compile_acc2, compile_fac0, compile_nc1, compile_tc0, compile_with, Backend, CompileError, CompileOptions, Compiled};
pub use format::{deserialize, serialize, FormatError};
pub use ir::{validate, Arg, Circuit, CircuitError, DepthRow, FaninMode, Gate, GateSet, Op};
