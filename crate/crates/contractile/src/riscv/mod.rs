//! RV32I base integer subset with machine/user privilege and two PMP entries.

pub mod instr;
pub mod pmp;
pub mod program;

pub use instr::{decode_rv32, encode_rv32, RvInstr};
pub use pmp::{AccessType, PmpEntries, PmpEntry, Privilege};
