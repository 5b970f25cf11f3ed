//! Contract verification for instruction-set semantics.
//!
//! ISA semantics are written in a small first-order statement language
//! ([`ast`]), run concretely by [`machine`] and executed symbolically
//! against separation-logic contracts by [`symexec`].

pub mod ast;
pub mod block;
pub mod femto;
pub mod fuzz;
pub mod machine;
pub mod minimalcaps;
pub mod mutation;
pub mod riscv;
pub mod seplogic;
pub mod sexpr;
pub mod soundness;
pub mod solver;
pub mod sym;
pub mod symexec;
pub mod term;
pub mod value;
