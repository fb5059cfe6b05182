//! Length-derivative ODE programs over the integers: the arithmetic basis,
//! expressions, the schema classifier, evaluators and the example corpus.

pub mod basis;
pub mod expr;
pub mod interp;
pub mod schema;
pub mod stdlib;
pub mod syntax;
mod val;

pub use basis::Int;
pub use expr::Expr;
pub use interp::{EvalError, Interp, Mode};
pub use schema::{classify, Class, ClassReport, Defn, Family, Program};
