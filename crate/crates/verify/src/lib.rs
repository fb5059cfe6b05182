//! Reference oracles and the equivalence checks built on them: evaluator
//! coherence, oracle agreement, circuit/evaluator agreement, expected
//! classes and depth growth.

pub mod checks;
pub mod oracle;
pub mod report;
pub mod sample;

pub use checks::{
    check_circuit, check_class, check_closed_vs_fast, check_depth, check_fast_vs_naive, check_oracle, default_functions,
    depth_growth, evaluator_checks, oracle_cases, verify_entry, verify_program, DepthTable, VerifyConfig, NC1_STEP,
};
pub use oracle::{oracle, reference, OracleError};
pub use report::{CheckReport, Failure};
pub use sample::Sampler;
