use crate::sym::sym;
use crate::value::Value;

use super::types::Permission;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum McReg {
    R0,
    R1,
    R2,
    R3,
}

impl McReg {
    pub const ALL: [McReg; 4] = [McReg::R0, McReg::R1, McReg::R2, McReg::R3];

    pub fn name(self) -> &'static str {
        match self {
            McReg::R0 => "R0",
            McReg::R1 => "R1",
            McReg::R2 => "R2",
            McReg::R3 => "R3",
        }
    }

    pub fn to_value(self) -> Value {
        Value::enm(self.name())
    }

    fn from_bits(b: i64) -> McReg {
        McReg::ALL[(b & 3) as usize]
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum McInstr {
    Store(McReg, McReg, i64),
    Load(McReg, McReg, i64),
    Jalr(McReg, McReg),
    Move(McReg, McReg),
    Lea(McReg, i64),
    Restrict(McReg, Permission),
    Subseg(McReg, McReg, McReg),
    Add(McReg, McReg, McReg),
    AddI(McReg, McReg, i64),
    Bnez(McReg, i64),
    Fail,
    Halt,
}

pub const IMM_BITS: u32 = 16;
pub const IMM_MIN: i64 = -(1 << (IMM_BITS - 1));
pub const IMM_MAX: i64 = (1 << (IMM_BITS - 1)) - 1;
const WORD_BITS: u32 = 10 + IMM_BITS;

// Layout: opcode in bits 0..4, register fields at 4, 6 and 8, a signed
// immediate from bit 10. Fail is opcode 0 so the all-zero word is Fail.
fn pack(op: i64, a: McReg, b: McReg, c: McReg, imm: i64) -> i64 {
    assert!((IMM_MIN..=IMM_MAX).contains(&imm), "immediate {imm} out of range");
    let imm = imm & ((1 << IMM_BITS) - 1);
    op | (a as i64) << 4 | (b as i64) << 6 | (c as i64) << 8 | imm << 10
}

pub fn encode_mc(i: &McInstr) -> i64 {
    use McInstr::*;
    use McReg::R0;
    match *i {
        Fail => 0,
        Store(rs, rb, imm) => pack(1, rs, rb, R0, imm),
        Load(rd, rb, imm) => pack(2, rd, rb, R0, imm),
        Jalr(rd, rs) => pack(3, rd, rs, R0, 0),
        Move(rd, rs) => pack(4, rd, rs, R0, 0),
        Lea(rd, imm) => pack(5, rd, R0, R0, imm),
        Restrict(rd, p) => pack(6, rd, R0, R0, p.code()),
        Subseg(rd, r1, r2) => pack(7, rd, r1, r2, 0),
        Add(rd, r1, r2) => pack(8, rd, r1, r2, 0),
        AddI(rd, rs, imm) => pack(9, rd, rs, R0, imm),
        Bnez(rs, imm) => pack(10, rs, R0, R0, imm),
        Halt => pack(11, R0, R0, R0, 0),
    }
}

pub fn decode_mc(w: i64) -> McInstr {
    use McInstr::*;
    if !(0..(1i64 << WORD_BITS)).contains(&w) {
        return Fail;
    }
    let a = McReg::from_bits(w >> 4);
    let b = McReg::from_bits(w >> 6);
    let c = McReg::from_bits(w >> 8);
    let raw = (w >> 10) & ((1 << IMM_BITS) - 1);
    let imm = if raw >> (IMM_BITS - 1) == 1 { raw - (1 << IMM_BITS) } else { raw };
    match w & 15 {
        1 => Store(a, b, imm),
        2 => Load(a, b, imm),
        3 => Jalr(a, b),
        4 => Move(a, b),
        5 => Lea(a, imm),
        6 if (0..4).contains(&imm) => Restrict(a, Permission::from_code(imm)),
        7 => Subseg(a, b, c),
        8 => Add(a, b, c),
        9 => AddI(a, b, imm),
        10 => Bnez(a, imm),
        11 => Halt,
        _ => Fail,
    }
}

pub fn instr_to_value(i: &McInstr) -> Value {
    use McInstr::*;
    let c = |tag: &str, fs: Vec<Value>| Value::Ctor(sym(tag), fs);
    let r = |r: McReg| r.to_value();
    let z = Value::Int;
    match *i {
        Store(rs, rb, imm) => c("Store", vec![r(rs), r(rb), z(imm)]),
        Load(rd, rb, imm) => c("Load", vec![r(rd), r(rb), z(imm)]),
        Jalr(rd, rs) => c("Jalr", vec![r(rd), r(rs)]),
        Move(rd, rs) => c("Move", vec![r(rd), r(rs)]),
        Lea(rd, imm) => c("Lea", vec![r(rd), z(imm)]),
        Restrict(rd, p) => c("Restrict", vec![r(rd), z(p.code())]),
        Subseg(rd, r1, r2) => c("Subseg", vec![r(rd), r(r1), r(r2)]),
        Add(rd, r1, r2) => c("Add", vec![r(rd), r(r1), r(r2)]),
        AddI(rd, rs, imm) => c("AddI", vec![r(rd), r(rs), z(imm)]),
        Bnez(rs, imm) => c("Bnez", vec![r(rs), z(imm)]),
        Fail => c("Fail", vec![]),
        Halt => c("Halt", vec![]),
    }
}

/// Every instruction with immediates in `[-bound, bound]`.
pub fn all_instructions(bound: i64) -> Vec<McInstr> {
    use McInstr::*;
    let regs = McReg::ALL;
    let mut out = vec![Fail, Halt];
    for a in regs {
        for p in Permission::ALL {
            out.push(Restrict(a, p));
        }
        for imm in -bound..=bound {
            out.push(Lea(a, imm));
            out.push(Bnez(a, imm));
        }
        for b in regs {
            out.push(Jalr(a, b));
            out.push(Move(a, b));
            for imm in -bound..=bound {
                out.push(Store(a, b, imm));
                out.push(Load(a, b, imm));
                out.push(AddI(a, b, imm));
            }
            for c in regs {
                out.push(Subseg(a, b, c));
                out.push(Add(a, b, c));
            }
        }
    }
    out
}
