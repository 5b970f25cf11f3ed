//! MinimalCaps: a capability machine with four registers and word-addressed
//! memory.

pub mod instr;
pub mod program;
pub mod types;

pub use instr::{decode_mc, encode_mc, McInstr, McReg};
pub use types::{subperm, Capability, Permission, Word};
