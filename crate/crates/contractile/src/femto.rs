//! The femtokernel: a boot block that confines user code below the PMP
//! and a trap handler that hands the user one private word.
//!
//! Layout: boot code at [0,72), NOP-padded to 18 words; handler at
//! [72,84); the private word 42 at 84; user code from 88 on.

use crate::block::AsmBlock;
use crate::machine::{mem_size, Isa};
use crate::mutation::Mutations;
use crate::riscv::instr::{ImmOp, Reg, CSR_MEPC, CSR_MSTATUS, CSR_MTVEC, CSR_PMPADDR0, CSR_PMPADDR1, CSR_PMPCFG0};
use crate::riscv::program::gprs_sort;
use crate::riscv::{encode_rv32, RvInstr};
use crate::seplogic::Contract;
use crate::sexpr;

pub const INIT_BASE: u32 = 0;
pub const INIT_WORDS: usize = 18;
pub const HANDLER_BASE: u32 = 72;
pub const DATA_ADDR: u32 = 84;
pub const DATA: u32 = 42;
pub const ADV: u32 = 88;

/// pmpcfg0 value: entry 1 is TOR with RWX, entry 0 is off.
pub const CFG: u32 = 0x0f00;
/// The faulty configuration that also opens entry 0 as TOR with RWX.
pub const CFG_ENTRY0_RWX: u32 = 0x0f0f;

const RA: Reg = 1;

pub struct FemtoAssets {
    pub image: String,
    pub init: AsmBlock,
    pub handler: AsmBlock,
    pub init_contract: Contract,
    pub handler_contract: Contract,
}

fn addi(rd: Reg, rs1: Reg, imm: i32) -> RvInstr {
    RvInstr::OpImm { op: ImmOp::Addi, rd, rs1, imm }
}

fn csrw(csr: u16, rs1: Reg) -> RvInstr {
    RvInstr::Csrrw { rd: 0, rs1, csr }
}

/// `li rd, v` as lui, addi or both.
fn li(rd: Reg, v: u32) -> Vec<RvInstr> {
    let hi = v.wrapping_add(0x800) & 0xffff_f000;
    let lo = v.wrapping_sub(hi) as i32;
    match (hi, lo) {
        (0, lo) => vec![addi(rd, 0, lo)],
        (hi, 0) => vec![RvInstr::Lui { rd, imm: hi }],
        (hi, lo) => vec![RvInstr::Lui { rd, imm: hi }, addi(rd, rd, lo)],
    }
}

/// `la rd, target` placed at `at`.
fn la(rd: Reg, at: u32, target: u32) -> Vec<RvInstr> {
    vec![RvInstr::Auipc { rd, imm: 0 }, addi(rd, rd, target as i32 - at as i32)]
}

pub fn init_code(m: &Mutations, mem: u32) -> Vec<RvInstr> {
    let cfg = if m.femto_entry0_rwx { CFG_ENTRY0_RWX } else { CFG };
    let mut code: Vec<RvInstr> = Vec::new();
    let here = |c: &Vec<RvInstr>| INIT_BASE + 4 * c.len() as u32;
    code.extend(la(RA, here(&code), ADV));
    code.push(csrw(CSR_PMPADDR0, RA));
    code.extend(li(RA, mem));
    code.push(csrw(CSR_PMPADDR1, RA));
    code.extend(li(RA, cfg));
    code.push(csrw(CSR_PMPCFG0, RA));
    code.extend(la(RA, here(&code), HANDLER_BASE));
    code.push(csrw(CSR_MTVEC, RA));
    code.extend(la(RA, here(&code), ADV));
    code.push(csrw(CSR_MEPC, RA));
    // mstatus := 0 leaves MPP = User.
    code.push(csrw(CSR_MSTATUS, 0));
    code.push(RvInstr::Mret);
    assert!(code.len() <= INIT_WORDS, "boot code does not fit before the handler");
    code.resize(INIT_WORDS, addi(0, 0, 0));
    code
}

pub fn handler_code() -> Vec<RvInstr> {
    vec![
        RvInstr::Auipc { rd: RA, imm: 0 },
        RvInstr::Lw { rd: RA, rs1: RA, imm: (DATA_ADDR - HANDLER_BASE) as i32 },
        RvInstr::Mret,
    ]
}

fn words(code: &[RvInstr]) -> Vec<u32> {
    code.iter().map(encode_rv32).collect()
}

/// The kernel words at [0, 88) as `(address, word)` pairs.
pub fn kernel_words(m: &Mutations, mem: u32) -> Vec<(u32, u32)> {
    let mut out: Vec<(u32, u32)> = words(&init_code(m, mem))
        .into_iter()
        .enumerate()
        .map(|(i, w)| (INIT_BASE + 4 * i as u32, w))
        .collect();
    out.extend(words(&handler_code()).into_iter().enumerate().map(|(i, w)| (HANDLER_BASE + 4 * i as u32, w)));
    out.push((DATA_ADDR, DATA));
    out
}

pub fn image_text(m: &Mutations, mem: u32) -> String {
    let mut s = String::from("# femtokernel\n");
    for (a, w) in kernel_words(m, mem) {
        match a {
            INIT_BASE => s.push_str("# init\n"),
            HANDLER_BASE => s.push_str("# handler\n"),
            DATA_ADDR => s.push_str("# data\n"),
            _ => {}
        }
        s.push_str(&format!("{a:#010x} {w:#010x}\n"));
    }
    s
}

fn entries(c0: u32, a0: u32, c1: u32, a1: u32) -> String {
    format!("(tuple (tuple {c0:#x} {a0:#x}) (tuple {c1:#x} {a1:#x}))")
}

/// Entries after boot for memory size `mem`.
pub fn femto_entries(mem: u32) -> String {
    entries(0, ADV, 0x0f, mem)
}

pub fn init_contract_text(mem: u32) -> String {
    let g = gprs_sort();
    format!(
        "; boot: from reset to user mode at adv, with the PMP set up\n\
         (contract\n  (vars (h bits) (cause bits) (epc bits) (mpp (enum Privilege)) (ws {g}))\n  \
         (pre (star (reg 'pc 0x0) (reg 'cur_privilege 'Machine) (reg 'mtvec h) (reg 'mcause cause)\n    \
         (reg 'mepc epc) (reg 'mstatus (record (mpp mpp))) (pred PMP_entries {zero}) (pred GPRs ws)))\n  \
         (post (exists vs {g}\n    \
         (star (reg 'pc {ADV:#x}) (reg 'cur_privilege 'User) (reg 'mtvec {HANDLER_BASE:#x}) (reg 'mcause cause)\n      \
         (reg 'mepc {ADV:#x}) (reg 'mstatus (record (mpp 'User))) (pred PMP_entries {es}) (pred GPRs vs)))))\n",
        zero = entries(0, 0, 0, 0),
        es = femto_entries(mem),
    )
}

pub fn handler_contract_text(mem: u32) -> String {
    let g = gprs_sort();
    format!(
        "; handler: load the private word into ra and return to the trapping pc\n\
         (contract\n  (vars (h bits) (cause bits) (epc bits) (ws {g}))\n  \
         (pre (star (reg 'pc {HANDLER_BASE:#x}) (reg 'cur_privilege 'Machine) (reg 'mtvec h) (reg 'mcause cause)\n    \
         (reg 'mepc epc) (reg 'mstatus (record (mpp 'User))) (pred PMP_entries {es}) (pred GPRs ws)\n    \
         (mem {DATA_ADDR:#x} {DATA:#x})))\n  \
         (post (exists vs {g}\n    \
         (star (reg 'pc epc) (reg 'cur_privilege 'User) (reg 'mtvec h) (reg 'mcause cause)\n      \
         (reg 'mepc epc) (reg 'mstatus (record (mpp 'User))) (pred PMP_entries {es}) (pred GPRs vs)\n      \
         (pure (op = (op gpr-read vs 'x1) {DATA:#x})) (mem {DATA_ADDR:#x} {DATA:#x})))))\n",
        es = femto_entries(mem),
    )
}

pub fn block_text(b: &AsmBlock, title: &str) -> String {
    format!("# {title}\n{b}")
}

/// The shipped fixture files, as `(file name, contents)`.
pub fn fixture_files(mem: u32) -> Vec<(&'static str, String)> {
    let none = Mutations::none();
    let rwx = Mutations { femto_entry0_rwx: true, ..Mutations::none() };
    let init = |m: &Mutations| AsmBlock::new(INIT_BASE, words(&init_code(m, mem)));
    vec![
        ("image.txt", image_text(&none, mem)),
        ("init.block", block_text(&init(&none), "init: set up the PMP and drop to user mode")),
        ("init.contract", init_contract_text(mem)),
        ("handler.block", block_text(&AsmBlock::new(HANDLER_BASE, words(&handler_code())), "handler")),
        ("handler.contract", handler_contract_text(mem)),
        ("init_entry0_rwx.block", block_text(&init(&rwx), "init with entry 0 left open")),
    ]
}

pub fn femto_assets(m: &Mutations) -> FemtoAssets {
    let mem = mem_size(Isa::RiscV) as u32;
    let contract = |s: String| sexpr::contract(&s).expect("femtokernel contracts parse");
    FemtoAssets {
        image: image_text(m, mem),
        init: AsmBlock::new(INIT_BASE, words(&init_code(m, mem))),
        handler: AsmBlock::new(HANDLER_BASE, words(&handler_code())),
        init_contract: contract(init_contract_text(mem)),
        handler_contract: contract(handler_contract_text(mem)),
    }
}
