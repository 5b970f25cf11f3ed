//! RV32I subset: instruction type, decoder and encoder.

use rand::Rng;

use crate::sym::sym;
use crate::value::Value;

pub type Reg = u8;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum BranchOp {
    Beq,
    Bne,
    Blt,
    Bge,
    Bltu,
    Bgeu,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum ImmOp {
    Addi,
    Slti,
    Sltiu,
    Xori,
    Ori,
    Andi,
    Slli,
    Srli,
    Srai,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum RegOp {
    Add,
    Sub,
    Sll,
    Slt,
    Sltu,
    Xor,
    Srl,
    Sra,
    Or,
    And,
}

/// Immediates are stored sign-extended; shift amounts are 0..32.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum RvInstr {
    Lui { rd: Reg, imm: u32 },
    Auipc { rd: Reg, imm: u32 },
    Jal { rd: Reg, imm: i32 },
    Jalr { rd: Reg, rs1: Reg, imm: i32 },
    Branch { op: BranchOp, rs1: Reg, rs2: Reg, imm: i32 },
    Lw { rd: Reg, rs1: Reg, imm: i32 },
    Sw { rs1: Reg, rs2: Reg, imm: i32 },
    OpImm { op: ImmOp, rd: Reg, rs1: Reg, imm: i32 },
    Op { op: RegOp, rd: Reg, rs1: Reg, rs2: Reg },
    Csrrw { rd: Reg, rs1: Reg, csr: u16 },
    Ecall,
    Mret,
    Illegal(u32),
}

pub const CSR_MSTATUS: u16 = 0x300;
pub const CSR_MTVEC: u16 = 0x305;
pub const CSR_MEPC: u16 = 0x341;
pub const CSR_MCAUSE: u16 = 0x342;
pub const CSR_PMPCFG0: u16 = 0x3A0;
pub const CSR_PMPADDR0: u16 = 0x3B0;
pub const CSR_PMPADDR1: u16 = 0x3B1;

pub const CSRS: [(&str, u16); 7] = [
    ("mstatus", CSR_MSTATUS),
    ("mtvec", CSR_MTVEC),
    ("mepc", CSR_MEPC),
    ("mcause", CSR_MCAUSE),
    ("pmpcfg0", CSR_PMPCFG0),
    ("pmpaddr0", CSR_PMPADDR0),
    ("pmpaddr1", CSR_PMPADDR1),
];

pub fn csr_number(name: &str) -> Option<u16> {
    CSRS.iter().find(|(n, _)| *n == name).map(|(_, c)| *c)
}

fn sext(v: u32, bits: u32) -> i32 {
    let shift = 32 - bits;
    ((v << shift) as i32) >> shift
}

pub fn decode_rv32(w: u32) -> RvInstr {
    let opcode = w & 0x7f;
    let rd = ((w >> 7) & 31) as Reg;
    let f3 = (w >> 12) & 7;
    let rs1 = ((w >> 15) & 31) as Reg;
    let rs2 = ((w >> 20) & 31) as Reg;
    let f7 = w >> 25;
    let i_imm = sext(w >> 20, 12);
    let ill = RvInstr::Illegal(w);
    match opcode {
        0x37 => RvInstr::Lui { rd, imm: w & 0xffff_f000 },
        0x17 => RvInstr::Auipc { rd, imm: w & 0xffff_f000 },
        0x6f => {
            let imm = ((w >> 31) & 1) << 20
                | ((w >> 21) & 0x3ff) << 1
                | ((w >> 20) & 1) << 11
                | ((w >> 12) & 0xff) << 12;
            RvInstr::Jal { rd, imm: sext(imm, 21) }
        }
        0x67 if f3 == 0 => RvInstr::Jalr { rd, rs1, imm: i_imm },
        0x63 => {
            let op = match f3 {
                0 => BranchOp::Beq,
                1 => BranchOp::Bne,
                4 => BranchOp::Blt,
                5 => BranchOp::Bge,
                6 => BranchOp::Bltu,
                7 => BranchOp::Bgeu,
                _ => return ill,
            };
            let imm = ((w >> 31) & 1) << 12
                | ((w >> 7) & 1) << 11
                | ((w >> 25) & 0x3f) << 5
                | ((w >> 8) & 0xf) << 1;
            RvInstr::Branch { op, rs1, rs2, imm: sext(imm, 13) }
        }
        0x03 if f3 == 2 => RvInstr::Lw { rd, rs1, imm: i_imm },
        0x23 if f3 == 2 => {
            let imm = (f7 << 5) | ((w >> 7) & 31);
            RvInstr::Sw { rs1, rs2, imm: sext(imm, 12) }
        }
        0x13 => {
            let shamt = ((w >> 20) & 31) as i32;
            let (op, imm) = match (f3, f7) {
                (0, _) => (ImmOp::Addi, i_imm),
                (2, _) => (ImmOp::Slti, i_imm),
                (3, _) => (ImmOp::Sltiu, i_imm),
                (4, _) => (ImmOp::Xori, i_imm),
                (6, _) => (ImmOp::Ori, i_imm),
                (7, _) => (ImmOp::Andi, i_imm),
                (1, 0) => (ImmOp::Slli, shamt),
                (5, 0) => (ImmOp::Srli, shamt),
                (5, 0x20) => (ImmOp::Srai, shamt),
                _ => return ill,
            };
            RvInstr::OpImm { op, rd, rs1, imm }
        }
        0x33 => {
            let op = match (f7, f3) {
                (0, 0) => RegOp::Add,
                (0x20, 0) => RegOp::Sub,
                (0, 1) => RegOp::Sll,
                (0, 2) => RegOp::Slt,
                (0, 3) => RegOp::Sltu,
                (0, 4) => RegOp::Xor,
                (0, 5) => RegOp::Srl,
                (0x20, 5) => RegOp::Sra,
                (0, 6) => RegOp::Or,
                (0, 7) => RegOp::And,
                _ => return ill,
            };
            RvInstr::Op { op, rd, rs1, rs2 }
        }
        0x73 => match (w, f3) {
            (0x0000_0073, _) => RvInstr::Ecall,
            (0x3020_0073, _) => RvInstr::Mret,
            (_, 1) => RvInstr::Csrrw { rd, rs1, csr: (w >> 20) as u16 },
            _ => ill,
        },
        _ => ill,
    }
}

fn r_type(f7: u32, rs2: Reg, rs1: Reg, f3: u32, rd: Reg, opc: u32) -> u32 {
    f7 << 25 | (rs2 as u32) << 20 | (rs1 as u32) << 15 | f3 << 12 | (rd as u32) << 7 | opc
}

fn i_type(imm: i32, rs1: Reg, f3: u32, rd: Reg, opc: u32) -> u32 {
    ((imm as u32) & 0xfff) << 20 | (rs1 as u32) << 15 | f3 << 12 | (rd as u32) << 7 | opc
}

pub fn encode_rv32(i: &RvInstr) -> u32 {
    match *i {
        RvInstr::Lui { rd, imm } => (imm & 0xffff_f000) | (rd as u32) << 7 | 0x37,
        RvInstr::Auipc { rd, imm } => (imm & 0xffff_f000) | (rd as u32) << 7 | 0x17,
        RvInstr::Jal { rd, imm } => {
            let u = imm as u32;
            ((u >> 20) & 1) << 31
                | ((u >> 1) & 0x3ff) << 21
                | ((u >> 11) & 1) << 20
                | ((u >> 12) & 0xff) << 12
                | (rd as u32) << 7
                | 0x6f
        }
        RvInstr::Jalr { rd, rs1, imm } => i_type(imm, rs1, 0, rd, 0x67),
        RvInstr::Branch { op, rs1, rs2, imm } => {
            let f3 = match op {
                BranchOp::Beq => 0,
                BranchOp::Bne => 1,
                BranchOp::Blt => 4,
                BranchOp::Bge => 5,
                BranchOp::Bltu => 6,
                BranchOp::Bgeu => 7,
            };
            let u = imm as u32;
            ((u >> 12) & 1) << 31
                | ((u >> 5) & 0x3f) << 25
                | (rs2 as u32) << 20
                | (rs1 as u32) << 15
                | f3 << 12
                | ((u >> 1) & 0xf) << 8
                | ((u >> 11) & 1) << 7
                | 0x63
        }
        RvInstr::Lw { rd, rs1, imm } => i_type(imm, rs1, 2, rd, 0x03),
        RvInstr::Sw { rs1, rs2, imm } => {
            let u = imm as u32;
            ((u >> 5) & 0x7f) << 25
                | (rs2 as u32) << 20
                | (rs1 as u32) << 15
                | 2 << 12
                | (u & 31) << 7
                | 0x23
        }
        RvInstr::OpImm { op, rd, rs1, imm } => match op {
            ImmOp::Addi => i_type(imm, rs1, 0, rd, 0x13),
            ImmOp::Slti => i_type(imm, rs1, 2, rd, 0x13),
            ImmOp::Sltiu => i_type(imm, rs1, 3, rd, 0x13),
            ImmOp::Xori => i_type(imm, rs1, 4, rd, 0x13),
            ImmOp::Ori => i_type(imm, rs1, 6, rd, 0x13),
            ImmOp::Andi => i_type(imm, rs1, 7, rd, 0x13),
            ImmOp::Slli => i_type(imm & 31, rs1, 1, rd, 0x13),
            ImmOp::Srli => i_type(imm & 31, rs1, 5, rd, 0x13),
            ImmOp::Srai => i_type((imm & 31) | 0x400, rs1, 5, rd, 0x13),
        },
        RvInstr::Op { op, rd, rs1, rs2 } => {
            let (f7, f3) = match op {
                RegOp::Add => (0, 0),
                RegOp::Sub => (0x20, 0),
                RegOp::Sll => (0, 1),
                RegOp::Slt => (0, 2),
                RegOp::Sltu => (0, 3),
                RegOp::Xor => (0, 4),
                RegOp::Srl => (0, 5),
                RegOp::Sra => (0x20, 5),
                RegOp::Or => (0, 6),
                RegOp::And => (0, 7),
            };
            r_type(f7, rs2, rs1, f3, rd, 0x33)
        }
        RvInstr::Csrrw { rd, rs1, csr } => {
            (csr as u32) << 20 | (rs1 as u32) << 15 | 1 << 12 | (rd as u32) << 7 | 0x73
        }
        RvInstr::Ecall => 0x0000_0073,
        RvInstr::Mret => 0x3020_0073,
        RvInstr::Illegal(w) => w,
    }
}

impl BranchOp {
    pub const ALL: [BranchOp; 6] = [
        BranchOp::Beq,
        BranchOp::Bne,
        BranchOp::Blt,
        BranchOp::Bge,
        BranchOp::Bltu,
        BranchOp::Bgeu,
    ];
    pub fn tag(self) -> &'static str {
        match self {
            BranchOp::Beq => "BEQ",
            BranchOp::Bne => "BNE",
            BranchOp::Blt => "BLT",
            BranchOp::Bge => "BGE",
            BranchOp::Bltu => "BLTU",
            BranchOp::Bgeu => "BGEU",
        }
    }
}

impl ImmOp {
    pub const ALL: [ImmOp; 9] = [
        ImmOp::Addi,
        ImmOp::Slti,
        ImmOp::Sltiu,
        ImmOp::Xori,
        ImmOp::Ori,
        ImmOp::Andi,
        ImmOp::Slli,
        ImmOp::Srli,
        ImmOp::Srai,
    ];
    pub fn tag(self) -> &'static str {
        match self {
            ImmOp::Addi => "ADDI",
            ImmOp::Slti => "SLTI",
            ImmOp::Sltiu => "SLTIU",
            ImmOp::Xori => "XORI",
            ImmOp::Ori => "ORI",
            ImmOp::Andi => "ANDI",
            ImmOp::Slli => "SLLI",
            ImmOp::Srli => "SRLI",
            ImmOp::Srai => "SRAI",
        }
    }
}

impl RegOp {
    pub const ALL: [RegOp; 10] = [
        RegOp::Add,
        RegOp::Sub,
        RegOp::Sll,
        RegOp::Slt,
        RegOp::Sltu,
        RegOp::Xor,
        RegOp::Srl,
        RegOp::Sra,
        RegOp::Or,
        RegOp::And,
    ];
    pub fn tag(self) -> &'static str {
        match self {
            RegOp::Add => "ADD",
            RegOp::Sub => "SUB",
            RegOp::Sll => "SLL",
            RegOp::Slt => "SLT",
            RegOp::Sltu => "SLTU",
            RegOp::Xor => "XOR",
            RegOp::Srl => "SRL",
            RegOp::Sra => "SRA",
            RegOp::Or => "OR",
            RegOp::And => "AND",
        }
    }
}

/// Register operands are enum values `x0`..`x31`.
pub fn reg(r: Reg) -> Value {
    Value::Enum(reg_sym(r))
}

pub fn reg_sym(r: Reg) -> crate::sym::Sym {
    sym(REG_NAMES[r as usize & 31])
}

pub const REG_NAMES: [&str; 32] = [
    "x0", "x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9", "x10", "x11", "x12", "x13", "x14", "x15",
    "x16", "x17", "x18", "x19", "x20", "x21", "x22", "x23", "x24", "x25", "x26", "x27", "x28", "x29",
    "x30", "x31",
];

/// Index of a register operand value.
pub fn reg_index(v: &Value) -> Option<usize> {
    let s = v.as_enum()?;
    REG_NAMES.iter().position(|n| *n == s.as_str())
}

fn imm(i: i32) -> Value {
    Value::Bits(i as u32)
}

/// The constructor value the core-language program matches on.
pub fn instr_to_value(i: &RvInstr) -> Value {
    let c = |tag: &str, fs: Vec<Value>| Value::Ctor(sym(tag), fs);
    match *i {
        RvInstr::Lui { rd, imm: u } => c("LUI", vec![reg(rd), Value::Bits(u)]),
        RvInstr::Auipc { rd, imm: u } => c("AUIPC", vec![reg(rd), Value::Bits(u)]),
        RvInstr::Jal { rd, imm: o } => c("JAL", vec![reg(rd), imm(o)]),
        RvInstr::Jalr { rd, rs1, imm: o } => c("JALR", vec![reg(rd), reg(rs1), imm(o)]),
        RvInstr::Branch { op, rs1, rs2, imm: o } => c(op.tag(), vec![reg(rs1), reg(rs2), imm(o)]),
        RvInstr::Lw { rd, rs1, imm: o } => c("LW", vec![reg(rd), reg(rs1), imm(o)]),
        RvInstr::Sw { rs1, rs2, imm: o } => c("SW", vec![reg(rs1), reg(rs2), imm(o)]),
        RvInstr::OpImm { op, rd, rs1, imm: o } => c(op.tag(), vec![reg(rd), reg(rs1), imm(o)]),
        RvInstr::Op { op, rd, rs1, rs2 } => c(op.tag(), vec![reg(rd), reg(rs1), reg(rs2)]),
        RvInstr::Csrrw { rd, rs1, csr } => {
            c("CSRRW", vec![reg(rd), reg(rs1), Value::Int(csr as i64)])
        }
        RvInstr::Ecall => c("ECALL", vec![]),
        RvInstr::Mret => c("MRET", vec![]),
        RvInstr::Illegal(w) => c("ILLEGAL", vec![Value::Bits(w)]),
    }
}

/// A random instruction with every field in its encodable range.
pub fn random_instr<R: Rng>(rng: &mut R) -> RvInstr {
    let r = |rng: &mut R| rng.gen_range(0..32u8);
    let i12 = |rng: &mut R| rng.gen_range(-2048..2048i32);
    match rng.gen_range(0..11) {
        0 => RvInstr::Lui { rd: r(rng), imm: rng.gen::<u32>() & 0xffff_f000 },
        1 => RvInstr::Auipc { rd: r(rng), imm: rng.gen::<u32>() & 0xffff_f000 },
        2 => RvInstr::Jal { rd: r(rng), imm: rng.gen_range(-(1 << 19)..(1 << 19)) * 2 },
        3 => RvInstr::Jalr { rd: r(rng), rs1: r(rng), imm: i12(rng) },
        4 => RvInstr::Branch {
            op: BranchOp::ALL[rng.gen_range(0..6)],
            rs1: r(rng),
            rs2: r(rng),
            imm: rng.gen_range(-2048..2048) * 2,
        },
        5 => RvInstr::Lw { rd: r(rng), rs1: r(rng), imm: i12(rng) },
        6 => RvInstr::Sw { rs1: r(rng), rs2: r(rng), imm: i12(rng) },
        7 => {
            let op = ImmOp::ALL[rng.gen_range(0..9)];
            let imm = match op {
                ImmOp::Slli | ImmOp::Srli | ImmOp::Srai => rng.gen_range(0..32),
                _ => i12(rng),
            };
            RvInstr::OpImm { op, rd: r(rng), rs1: r(rng), imm }
        }
        8 => RvInstr::Op { op: RegOp::ALL[rng.gen_range(0..10)], rd: r(rng), rs1: r(rng), rs2: r(rng) },
        9 => RvInstr::Csrrw { rd: r(rng), rs1: r(rng), csr: rng.gen_range(0..4096) },
        _ => {
            if rng.gen() {
                RvInstr::Ecall
            } else {
                RvInstr::Mret
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    // Reference words taken from a standard RV32I assembler listing.
    const VECTORS: &[(u32, RvInstr)] = &[
        (0x0000_0013, RvInstr::OpImm { op: ImmOp::Addi, rd: 0, rs1: 0, imm: 0 }),
        (0x0050_0093, RvInstr::OpImm { op: ImmOp::Addi, rd: 1, rs1: 0, imm: 5 }),
        (0x3020_0073, RvInstr::Mret),
        (0x0000_0073, RvInstr::Ecall),
        (0x0000_0097, RvInstr::Auipc { rd: 1, imm: 0 }),
        (0x00c0_a083, RvInstr::Lw { rd: 1, rs1: 1, imm: 12 }),
        (0x3b00_9073, RvInstr::Csrrw { rd: 0, rs1: 1, csr: 0x3b0 }),
        (0x3000_1073, RvInstr::Csrrw { rd: 0, rs1: 0, csr: 0x300 }),
        (0x0011_2223, RvInstr::Sw { rs1: 2, rs2: 1, imm: 4 }),
        (0xfe00_0ee3, RvInstr::Branch { op: BranchOp::Beq, rs1: 0, rs2: 0, imm: -4 }),
        (0x0080_00ef, RvInstr::Jal { rd: 1, imm: 8 }),
        (0x4020_81b3, RvInstr::Op { op: RegOp::Sub, rd: 3, rs1: 1, rs2: 2 }),
        (0x4030_d093, RvInstr::OpImm { op: ImmOp::Srai, rd: 1, rs1: 1, imm: 3 }),
        (0x0000_10b7, RvInstr::Lui { rd: 1, imm: 0x1000 }),
    ];

    #[test]
    fn reference_vectors() {
        for (w, i) in VECTORS {
            assert_eq!(decode_rv32(*w), *i, "decode {w:#010x}");
            assert_eq!(encode_rv32(i), *w, "encode {i:?}");
        }
    }

    #[test]
    fn illegal_fallbacks() {
        assert_eq!(decode_rv32(0xFFFF_FFFF), RvInstr::Illegal(0xFFFF_FFFF));
        assert_eq!(decode_rv32(0), RvInstr::Illegal(0));
        // csrrs x0, mstatus, x0 and lb x1, 0(x0)
        assert!(matches!(decode_rv32(0x3000_2073), RvInstr::Illegal(_)));
        assert!(matches!(decode_rv32(0x0000_0083), RvInstr::Illegal(_)));
        // sb x1, 0(x0)
        assert!(matches!(decode_rv32(0x0010_0023), RvInstr::Illegal(_)));
    }

    #[test]
    fn random_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let i = random_instr(&mut rng);
            assert_eq!(decode_rv32(encode_rv32(&i)), i);
        }
    }
}
