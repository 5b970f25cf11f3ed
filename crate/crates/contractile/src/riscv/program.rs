//! The RV32I + PMP semantics as a core program, with the contracts and
//! ghost lemmas for the memory-isolation proof.
//!
//! General-purpose registers are owned through `GPRs(ws)`, a 31-tuple, and
//! PMP configuration through `PMP_entries(es)`. Memory not covered by a
//! points-to chunk is owned through `PMP_addr_access(es, p)`, which hands
//! out single words to accesses that pass the PMP check.

use crate::ast::build as s;
use crate::ast::{Pattern, Program, Stm};
use crate::machine::{mem_size, Isa, MachineState};
use crate::mutation::Mutations;
use crate::seplogic::build as a;
use crate::seplogic::{Assertion, Contract, LemmaDecl};
use crate::sym::sym;
use crate::term::{self as t, Term};
use crate::value::{Op, Sort, Value, GPR_COUNT};

use super::instr::{
    decode_rv32, instr_to_value, BranchOp, ImmOp, RegOp, CSR_MCAUSE, CSR_MEPC, CSR_MSTATUS, CSR_MTVEC,
    CSR_PMPADDR0, CSR_PMPADDR1, CSR_PMPCFG0, REG_NAMES,
};

/// How memory reached through the PMP is owned.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MemMode {
    /// Through `PMP_addr_access`; used to verify `fdeStep` for any state.
    Universal,
    /// Through points-to chunks in the precondition; used for blocks.
    Owned,
}

pub const CAUSE_FETCH: u32 = 1;
pub const CAUSE_ILLEGAL: u32 = 2;
pub const CAUSE_LOAD: u32 = 5;
pub const CAUSE_STORE: u32 = 7;
pub const CAUSE_ECALL_U: u32 = 8;
pub const CAUSE_ECALL_M: u32 = 11;

pub fn priv_sort() -> Sort {
    Sort::Enum(sym("Privilege"))
}

pub fn acc_sort() -> Sort {
    Sort::Enum(sym("AccessType"))
}

pub fn reg_sort() -> Sort {
    Sort::Enum(sym("Reg"))
}

pub fn mstatus_sort() -> Sort {
    Sort::Record(vec![(sym("mpp"), priv_sort())])
}

pub fn entries_sort() -> Sort {
    let e = Sort::Tuple(vec![Sort::Bits, Sort::Bits]);
    Sort::Tuple(vec![e.clone(), e])
}

pub fn gprs_sort() -> Sort {
    Sort::Tuple(vec![Sort::Bits; GPR_COUNT])
}

fn instr_sort() -> Sort {
    Sort::Union(sym("instr"))
}

fn mem_result() -> Sort {
    Sort::Union(sym("mem_result"))
}

/// Instruction constructors with field names; tags match `instr_to_value`.
fn instr_ctors() -> Vec<(&'static str, Vec<(&'static str, Sort)>)> {
    let r = reg_sort;
    let b = || Sort::Bits;
    let mut out = vec![
        ("LUI", vec![("rd", r()), ("imm", b())]),
        ("AUIPC", vec![("rd", r()), ("imm", b())]),
        ("JAL", vec![("rd", r()), ("imm", b())]),
        ("JALR", vec![("rd", r()), ("rs1", r()), ("imm", b())]),
    ];
    for op in BranchOp::ALL {
        out.push((op.tag(), vec![("rs1", r()), ("rs2", r()), ("imm", b())]));
    }
    out.push(("LW", vec![("rd", r()), ("rs1", r()), ("imm", b())]));
    out.push(("SW", vec![("rs1", r()), ("rs2", r()), ("imm", b())]));
    for op in ImmOp::ALL {
        out.push((op.tag(), vec![("rd", r()), ("rs1", r()), ("imm", b())]));
    }
    for op in RegOp::ALL {
        out.push((op.tag(), vec![("rd", r()), ("rs1", r()), ("rs2", r())]));
    }
    out.push(("CSRRW", vec![("rd", r()), ("rs1", r()), ("csr", Sort::Int)]));
    out.push(("ECALL", vec![]));
    out.push(("MRET", vec![]));
    out.push(("ILLEGAL", vec![("w", b())]));
    out
}

// ---- statement helpers ----

fn prim(op: Op, xs: Vec<Stm>) -> Stm {
    s::prim(op, xs)
}

fn and_s(x: Stm, y: Stm) -> Stm {
    prim(Op::And, vec![x, y])
}

fn or_s(x: Stm, y: Stm) -> Stm {
    prim(Op::Or, vec![x, y])
}

fn read_gpr(r: &str) -> Stm {
    s::call("read_gpr", vec![s::var(r)])
}

fn write_gpr(r: &str, v: Stm) -> Stm {
    s::call("write_gpr", vec![s::var(r), v])
}

fn is_machine(p: Stm) -> Stm {
    s::eq(p, s::enm("Machine"))
}

fn next_pc() -> Stm {
    s::write_reg("pc", prim(Op::BvAdd, vec![s::var("pc"), s::bits(4)]))
}

fn trap(cause: u32) -> Stm {
    s::call("handle_trap", vec![s::bits(cause), s::var("pc")])
}

/// `if c then 1 else 0` as a bit vector.
fn bool_bits(c: Stm) -> Stm {
    s::if_(c, s::bits(1), s::bits(0))
}

fn gpr_dispatch(body: impl Fn(&str) -> Stm, zero: Stm) -> Stm {
    let mut arms = vec![(s::plit(Value::enm("x0")), zero)];
    for r in &REG_NAMES[1..] {
        arms.push((s::plit(Value::enm(r)), body(r)));
    }
    s::match_(s::var("r"), arms)
}

fn read_gpr_body() -> Stm {
    s::seqs(vec![
        s::lemma("open_GPRs", vec![]),
        s::let_(
            "v",
            gpr_dispatch(s::read_reg, s::bits(0)),
            s::seq(s::lemma("close_GPRs", vec![]), s::var("v")),
        ),
    ])
}

fn write_gpr_body() -> Stm {
    s::seqs(vec![
        s::lemma("open_GPRs", vec![]),
        gpr_dispatch(|r| s::write_reg(r, s::var("v")), s::unit()),
        s::lemma("close_GPRs", vec![]),
    ])
}

/// PMP decision for one matching entry.
fn decide(cfg: &str) -> Stm {
    or_s(
        and_s(is_machine(s::var("priv")), s::not(prim(Op::CfgLocked, vec![s::var(cfg)]))),
        prim(Op::CfgGrants, vec![s::var(cfg), s::var("acc")]),
    )
}

fn hit(cfg: &str, lo: Stm, hi: &str) -> Stm {
    and_s(
        prim(Op::CfgTor, vec![s::var(cfg)]),
        prim(Op::PmpMatch, vec![s::var("addr"), s::int(4), lo, s::var(hi)]),
    )
}

fn pmp_check_body(m: &Mutations) -> Stm {
    let no_match = is_machine(s::var("priv"));
    let e0 = |rest: Stm| s::if_(hit("c0", s::bits(0), "a0"), decide("c0"), rest);
    let e1 = |rest: Stm| s::if_(hit("c1", s::var("a0"), "a1"), decide("c1"), rest);
    let decision = if m.pmp_always_allow {
        s::tt()
    } else if m.reverse_pmp_priority {
        e1(e0(no_match))
    } else {
        e0(e1(no_match))
    };
    s::seqs(vec![
        s::lemma("open_PMP_entries", vec![]),
        s::let_(
            "c0",
            s::read_reg("pmp0cfg"),
            s::let_(
                "a0",
                s::read_reg("pmpaddr0"),
                s::let_(
                    "c1",
                    s::read_reg("pmp1cfg"),
                    s::let_(
                        "a1",
                        s::read_reg("pmpaddr1"),
                        s::seq(s::lemma("close_PMP_entries", vec![]), decision),
                    ),
                ),
            ),
        ),
    ])
}

fn locked(r: &str) -> Stm {
    prim(Op::CfgLocked, vec![s::read_reg(r)])
}

/// `if guard then () else write`; the guard is dropped by the lock-check
/// mutation.
fn unless_locked(m: &Mutations, guard: Stm, write: Stm) -> Stm {
    if m.skip_lock_check {
        write
    } else {
        s::if_(guard, s::unit(), write)
    }
}

fn pmpcfg_write_body(m: &Mutations) -> Stm {
    let byte = |i: i64| prim(Op::CfgNormalize, vec![prim(Op::CfgByte, vec![s::var("v"), s::int(i)])]);
    s::seq(
        unless_locked(m, locked("pmp0cfg"), s::write_reg("pmp0cfg", byte(0))),
        unless_locked(m, locked("pmp1cfg"), s::write_reg("pmp1cfg", byte(1))),
    )
}

fn pmpaddr0_write_body(m: &Mutations) -> Stm {
    // A TOR entry also locks the address below it.
    let guard = or_s(
        locked("pmp0cfg"),
        and_s(locked("pmp1cfg"), prim(Op::CfgTor, vec![s::read_reg("pmp1cfg")])),
    );
    unless_locked(m, guard, s::write_reg("pmpaddr0", s::var("v")))
}

fn pmpaddr1_write_body(m: &Mutations) -> Stm {
    unless_locked(m, locked("pmp1cfg"), s::write_reg("pmpaddr1", s::var("v")))
}

/// Alignment, physical range, then the PMP check.
fn mem_guard(body: Stm, max_addr: u32) -> Stm {
    let aligned = s::eq(prim(Op::BvAnd, vec![s::var("addr"), s::bits(3)]), s::bits(0));
    let in_range = prim(Op::BvUle, vec![s::var("addr"), s::bits(max_addr)]);
    s::if_(
        and_s(aligned, in_range),
        s::let_(
            "ok",
            s::call("pmp_check", vec![s::var("addr"), s::var("acc"), s::read_reg("cur_privilege")]),
            s::if_(s::var("ok"), body, s::ctor("MemException", vec![s::var("cause")])),
        ),
        s::ctor("MemException", vec![s::var("cause")]),
    )
}

fn with_ptsto(mode: MemMode, access: Stm) -> Stm {
    match mode {
        MemMode::Owned => access,
        MemMode::Universal => s::seqs(vec![
            s::lemma("extract_PMP_ptsto", vec![s::var("addr"), s::var("acc")]),
            s::let_(
                "res",
                access,
                s::seq(s::lemma("return_PMP_ptsto", vec![s::var("addr")]), s::var("res")),
            ),
        ]),
    }
}

fn mem_read_body(mode: MemMode, max_addr: u32) -> Stm {
    let access = s::ctor("MemValue", vec![s::foreign("read_ram", vec![s::var("addr")])]);
    mem_guard(with_ptsto(mode, access), max_addr)
}

fn mem_write_body(mode: MemMode, max_addr: u32) -> Stm {
    let access = s::seq(
        s::foreign("write_ram", vec![s::var("addr"), s::var("v")]),
        s::ctor("MemValue", vec![s::bits(0)]),
    );
    s::let_("acc", s::enm("Write"), mem_guard(with_ptsto(mode, access), max_addr))
}

fn handle_trap_body() -> Stm {
    s::let_(
        "l",
        s::read_reg("cur_privilege"),
        s::seqs(vec![
            s::write_reg("mcause", s::var("cause")),
            s::write_reg("mepc", s::var("epc")),
            s::write_reg("mstatus", s::set(s::read_reg("mstatus"), "mpp", s::var("l"))),
            s::write_reg("cur_privilege", s::enm("Machine")),
            s::write_reg("pc", s::read_reg("mtvec")),
        ]),
    )
}

fn on_mem(res: Stm, bind: &str, ok: Stm) -> Stm {
    s::match_(
        res,
        vec![
            (s::pctor("MemValue", &[bind]), ok),
            (s::pctor("MemException", &["c"]), s::call("handle_trap", vec![s::var("c"), s::var("pc")])),
        ],
    )
}

fn addr_of(base: &str) -> Stm {
    prim(Op::BvAdd, vec![read_gpr(base), s::var("imm")])
}

fn branch(op: BranchOp) -> Stm {
    let (x, y) = (s::var("x"), s::var("y"));
    let cond = match op {
        BranchOp::Beq => s::eq(x, y),
        BranchOp::Bne => s::not(s::eq(x, y)),
        BranchOp::Blt => prim(Op::BvSlt, vec![x, y]),
        BranchOp::Bge => s::not(prim(Op::BvSlt, vec![x, y])),
        BranchOp::Bltu => prim(Op::BvUlt, vec![x, y]),
        BranchOp::Bgeu => s::not(prim(Op::BvUlt, vec![x, y])),
    };
    s::let_(
        "x",
        read_gpr("rs1"),
        s::let_(
            "y",
            read_gpr("rs2"),
            s::if_(
                cond,
                s::write_reg("pc", prim(Op::BvAdd, vec![s::var("pc"), s::var("imm")])),
                next_pc(),
            ),
        ),
    )
}

fn alu(op: Op, x: Stm, y: Stm) -> Stm {
    prim(op, vec![x, y])
}

fn imm_op(op: ImmOp) -> Stm {
    let (x, y) = (s::var("x"), s::var("imm"));
    let v = match op {
        ImmOp::Addi => alu(Op::BvAdd, x, y),
        ImmOp::Slti => bool_bits(alu(Op::BvSlt, x, y)),
        ImmOp::Sltiu => bool_bits(alu(Op::BvUlt, x, y)),
        ImmOp::Xori => alu(Op::BvXor, x, y),
        ImmOp::Ori => alu(Op::BvOr, x, y),
        ImmOp::Andi => alu(Op::BvAnd, x, y),
        ImmOp::Slli => alu(Op::BvShl, x, y),
        ImmOp::Srli => alu(Op::BvShr, x, y),
        ImmOp::Srai => alu(Op::BvSra, x, y),
    };
    s::let_("x", read_gpr("rs1"), s::seq(write_gpr("rd", v), next_pc()))
}

fn reg_op(op: RegOp) -> Stm {
    let (x, y) = (s::var("x"), s::var("y"));
    let v = match op {
        RegOp::Add => alu(Op::BvAdd, x, y),
        RegOp::Sub => alu(Op::BvSub, x, y),
        RegOp::Sll => alu(Op::BvShl, x, y),
        RegOp::Slt => bool_bits(alu(Op::BvSlt, x, y)),
        RegOp::Sltu => bool_bits(alu(Op::BvUlt, x, y)),
        RegOp::Xor => alu(Op::BvXor, x, y),
        RegOp::Srl => alu(Op::BvShr, x, y),
        RegOp::Sra => alu(Op::BvSra, x, y),
        RegOp::Or => alu(Op::BvOr, x, y),
        RegOp::And => alu(Op::BvAnd, x, y),
    };
    s::let_(
        "x",
        read_gpr("rs1"),
        s::let_("y", read_gpr("rs2"), s::seq(write_gpr("rd", v), next_pc())),
    )
}

/// `rd := csr; csr := x` where `read` and `write` access the CSR.
fn csr_swap(read: Stm, write: Stm) -> Stm {
    s::let_(
        "old",
        read,
        s::seqs(vec![write, write_gpr("rd", s::var("old")), next_pc()]),
    )
}

fn csr_pmp(read: Stm, write: &str) -> Stm {
    s::seqs(vec![
        s::lemma("open_PMP_entries", vec![]),
        s::let_(
            "old",
            read,
            s::seqs(vec![
                s::call(write, vec![s::var("x")]),
                s::lemma("close_PMP_entries", vec![]),
                write_gpr("rd", s::var("old")),
                next_pc(),
            ]),
        ),
    ])
}

fn csrrw() -> Stm {
    let csr = |n: u16| s::plit(Value::Int(n as i64));
    let plain = |r: &str| csr_swap(s::read_reg(r), s::write_reg(r, s::var("x")));
    let arms = vec![
        (
            csr(CSR_MSTATUS),
            csr_swap(
                prim(Op::BitsOfMpp, vec![s::get(s::read_reg("mstatus"), "mpp")]),
                s::write_reg(
                    "mstatus",
                    s::set(s::read_reg("mstatus"), "mpp", prim(Op::MppOfBits, vec![s::var("x")])),
                ),
            ),
        ),
        (csr(CSR_MTVEC), plain("mtvec")),
        (csr(CSR_MEPC), plain("mepc")),
        (csr(CSR_MCAUSE), plain("mcause")),
        (
            csr(CSR_PMPCFG0),
            csr_pmp(prim(Op::PackCfg, vec![s::read_reg("pmp0cfg"), s::read_reg("pmp1cfg")]), "pmpcfg_write"),
        ),
        (csr(CSR_PMPADDR0), csr_pmp(s::read_reg("pmpaddr0"), "pmpaddr0_write")),
        (csr(CSR_PMPADDR1), csr_pmp(s::read_reg("pmpaddr1"), "pmpaddr1_write")),
        (Pattern::Wild, trap(CAUSE_ILLEGAL)),
    ];
    s::if_(
        is_machine(s::read_reg("cur_privilege")),
        s::let_("x", read_gpr("rs1"), s::match_(s::var("csr"), arms)),
        trap(CAUSE_ILLEGAL),
    )
}

fn mret() -> Stm {
    s::if_(
        is_machine(s::read_reg("cur_privilege")),
        s::let_(
            "ms",
            s::read_reg("mstatus"),
            s::seqs(vec![
                s::write_reg("cur_privilege", s::get(s::var("ms"), "mpp")),
                s::write_reg("mstatus", s::set(s::var("ms"), "mpp", s::enm("User"))),
                s::write_reg("pc", s::read_reg("mepc")),
            ]),
        ),
        trap(CAUSE_ILLEGAL),
    )
}

fn exec_clause(tag: &str) -> Stm {
    let pc_plus = |x: Stm| prim(Op::BvAdd, vec![s::var("pc"), x]);
    if let Some(op) = BranchOp::ALL.into_iter().find(|o| o.tag() == tag) {
        return branch(op);
    }
    if let Some(op) = ImmOp::ALL.into_iter().find(|o| o.tag() == tag) {
        return imm_op(op);
    }
    if let Some(op) = RegOp::ALL.into_iter().find(|o| o.tag() == tag) {
        return reg_op(op);
    }
    match tag {
        "LUI" => s::seq(write_gpr("rd", s::var("imm")), next_pc()),
        "AUIPC" => s::seq(write_gpr("rd", pc_plus(s::var("imm"))), next_pc()),
        "JAL" => s::seq(
            write_gpr("rd", pc_plus(s::bits(4))),
            s::write_reg("pc", pc_plus(s::var("imm"))),
        ),
        "JALR" => s::let_(
            "t",
            prim(Op::BvAnd, vec![addr_of("rs1"), s::bits(!1)]),
            s::seq(write_gpr("rd", pc_plus(s::bits(4))), s::write_reg("pc", s::var("t"))),
        ),
        "LW" => on_mem(
            s::call("mem_read", vec![s::enm("Read"), addr_of("rs1"), s::bits(CAUSE_LOAD)]),
            "w",
            s::seq(write_gpr("rd", s::var("w")), next_pc()),
        ),
        "SW" => s::let_(
            "addr",
            addr_of("rs1"),
            on_mem(
                s::call("mem_write", vec![s::var("addr"), read_gpr("rs2"), s::bits(CAUSE_STORE)]),
                "_done",
                next_pc(),
            ),
        ),
        "CSRRW" => csrrw(),
        "ECALL" => s::if_(
            is_machine(s::read_reg("cur_privilege")),
            trap(CAUSE_ECALL_M),
            trap(CAUSE_ECALL_U),
        ),
        "MRET" => mret(),
        "ILLEGAL" => trap(CAUSE_ILLEGAL),
        _ => unreachable!("unknown instruction {tag}"),
    }
}

fn execute_body() -> Stm {
    let arms = instr_ctors()
        .into_iter()
        .map(|(c, fs)| {
            let names: Vec<&str> = fs.iter().map(|(n, _)| *n).collect();
            (s::pctor(c, &names), exec_clause(c))
        })
        .collect();
    s::match_(s::var("i"), arms)
}

fn fde_step() -> Stm {
    s::let_(
        "pc",
        s::read_reg("pc"),
        s::seq(
            on_mem(
                s::call("mem_read", vec![s::enm("Execute"), s::var("pc"), s::bits(CAUSE_FETCH)]),
                "w",
                s::call("execute", vec![s::foreign("decode", vec![s::var("w")]), s::var("pc")]),
            ),
            s::tt(),
        ),
    )
}

// ---- foreign functions ----

fn addr_arg(args: &[Value]) -> Result<u64, String> {
    args[0].as_bits().map(u64::from).ok_or_else(|| format!("bad address {:?}", args[0]))
}

fn rt_read_ram(st: &mut MachineState, args: &[Value]) -> Result<Value, String> {
    let a = addr_arg(args)?;
    st.read_word_le(a).map(Value::Bits)
}

fn rt_write_ram(st: &mut MachineState, args: &[Value]) -> Result<Value, String> {
    let a = addr_arg(args)?;
    let w = args[1].as_bits().ok_or("write_ram: value is not a word")?;
    st.write_word_le(a, w).map(|_| Value::Unit)
}

fn rt_decode(_: &mut MachineState, args: &[Value]) -> Result<Value, String> {
    let w = args[0].as_bits().ok_or("decode: expected a word")?;
    Ok(instr_to_value(&decode_rv32(w)))
}

// ---- assertions ----

fn lv(xs: &[(&str, Sort)]) -> Vec<(crate::sym::Sym, Sort)> {
    xs.iter().map(|(n, s)| (sym(n), s.clone())).collect()
}

fn mstatus_t(mpp: Term) -> Term {
    Term::Record(vec![(sym("mpp"), mpp)])
}

fn pmp_access(addr: Term, es: Term, p: Term, acc: Term) -> Term {
    t::op(Op::PmpAccess, vec![addr, es, p, acc])
}

fn ex_reg(r: &str, srt: Sort) -> Assertion {
    let x = format!("{r}$any");
    a::exists(&x, srt, a::reg(r, t::var(&x)))
}

fn gprs_any() -> Assertion {
    a::exists("ws", gprs_sort(), a::pred("GPRs", vec![t::var("ws")]))
}

fn pmp_regs(c0: Term, a0: Term, c1: Term, a1: Term) -> Assertion {
    a::star(vec![
        a::reg("pmp0cfg", c0),
        a::reg("pmpaddr0", a0),
        a::reg("pmp1cfg", c1),
        a::reg("pmpaddr1", a1),
    ])
}

fn entries_t(c0: Term, a0: Term, c1: Term, a1: Term) -> Term {
    Term::Tuple(vec![Term::Tuple(vec![c0, a0]), Term::Tuple(vec![c1, a1])])
}

fn normal(pc: Assertion, epc: Term) -> Assertion {
    a::star(vec![
        pc,
        a::reg("cur_privilege", t::var("l")),
        a::reg("mtvec", t::var("h")),
        ex_reg("mcause", Sort::Bits),
        a::reg("mstatus", mstatus_t(t::var("mpp"))),
        a::reg("mepc", epc),
        a::pred("PMP_entries", vec![t::var("es")]),
        gprs_any(),
        a::pred("PMP_addr_access", vec![t::var("es"), t::var("l")]),
    ])
}

fn step_pre() -> Assertion {
    normal(ex_reg("pc", Sort::Bits), t::var("epc"))
}

/// The four outcomes of one step: a normal step, a CSR update in machine
/// mode, a trap, and a return from the trap handler.
fn step_post() -> Assertion {
    let machine = || a::pure(t::eq(t::var("l"), t::enm("Machine")));
    let csr_modified = a::star(vec![
        machine(),
        ex_reg("pc", Sort::Bits),
        a::reg("cur_privilege", t::var("l")),
        ex_reg("mtvec", Sort::Bits),
        ex_reg("mcause", Sort::Bits),
        ex_reg("mstatus", mstatus_sort()),
        ex_reg("mepc", Sort::Bits),
        a::exists("es2", entries_sort(), a::pred("PMP_entries", vec![t::var("es2")])),
        gprs_any(),
        a::pred("PMP_addr_access", vec![t::var("es"), t::var("l")]),
    ]);
    let trap = a::star(vec![
        a::reg("pc", t::var("h")),
        a::reg("cur_privilege", t::enm("Machine")),
        a::reg("mtvec", t::var("h")),
        ex_reg("mcause", Sort::Bits),
        a::reg("mstatus", mstatus_t(t::var("l"))),
        ex_reg("mepc", Sort::Bits),
        a::pred("PMP_entries", vec![t::var("es")]),
        gprs_any(),
        a::pred("PMP_addr_access", vec![t::var("es"), t::var("l")]),
    ]);
    let recover = a::star(vec![
        machine(),
        a::reg("pc", t::var("epc")),
        a::reg("cur_privilege", t::var("mpp")),
        a::reg("mtvec", t::var("h")),
        ex_reg("mcause", Sort::Bits),
        a::reg("mstatus", mstatus_t(t::enm("User"))),
        a::reg("mepc", t::var("epc")),
        a::pred("PMP_entries", vec![t::var("es")]),
        gprs_any(),
        a::pred("PMP_addr_access", vec![t::var("es"), t::var("l")]),
    ]);
    a::ors(vec![normal(ex_reg("pc", Sort::Bits), t::var("epc")), csr_modified, trap, recover])
}

fn step_vars() -> Vec<(crate::sym::Sym, Sort)> {
    lv(&[
        ("l", priv_sort()),
        ("h", Sort::Bits),
        ("mpp", priv_sort()),
        ("epc", Sort::Bits),
        ("es", entries_sort()),
    ])
}

fn contracts() -> Vec<(&'static str, Contract)> {
    let gprs = |w: Term| a::pred("GPRs", vec![w]);
    let locked = |c: &str| t::op(Op::CfgLocked, vec![t::var(c)]);
    let tor = |c: &str| t::op(Op::CfgTor, vec![t::var(c)]);
    let cfg_byte = |i: i64| t::op(Op::CfgNormalize, vec![t::op(Op::CfgByte, vec![t::var("v"), t::int(i)])]);
    let entries = || a::pred("PMP_entries", vec![t::var("es")]);
    let ram_frame = || {
        a::star(vec![
            a::reg("cur_privilege", t::var("p")),
            entries(),
        ])
    };
    vec![
        (
            "read_gpr",
            Contract {
                logic_vars: lv(&[("r", reg_sort()), ("ws", gprs_sort())]),
                args: vec![t::var("r")],
                pre: gprs(t::var("ws")),
                result: sym("result"),
                post: a::star(vec![
                    a::pure(t::eq(t::var("result"), t::op(Op::RegRead, vec![t::var("ws"), t::var("r")]))),
                    gprs(t::var("ws")),
                ]),
            },
        ),
        (
            "write_gpr",
            Contract {
                logic_vars: lv(&[("r", reg_sort()), ("v", Sort::Bits), ("ws", gprs_sort())]),
                args: vec![t::var("r"), t::var("v")],
                pre: gprs(t::var("ws")),
                result: sym("result"),
                post: gprs(t::op(Op::RegWrite, vec![t::var("ws"), t::var("r"), t::var("v")])),
            },
        ),
        (
            "pmp_check",
            Contract {
                logic_vars: lv(&[
                    ("addr", Sort::Bits),
                    ("acc", acc_sort()),
                    ("priv", priv_sort()),
                    ("es", entries_sort()),
                ]),
                args: vec![t::var("addr"), t::var("acc"), t::var("priv")],
                pre: entries(),
                result: sym("result"),
                post: a::star(vec![
                    a::pure(t::eq(
                        t::var("result"),
                        pmp_access(t::var("addr"), t::var("es"), t::var("priv"), t::var("acc")),
                    )),
                    entries(),
                ]),
            },
        ),
        (
            "pmpcfg_write",
            Contract {
                logic_vars: lv(&[("v", Sort::Bits), ("c0", Sort::Bits), ("c1", Sort::Bits)]),
                args: vec![t::var("v")],
                pre: a::star(vec![a::reg("pmp0cfg", t::var("c0")), a::reg("pmp1cfg", t::var("c1"))]),
                result: sym("result"),
                post: a::star(vec![
                    a::reg("pmp0cfg", t::ite(locked("c0"), t::var("c0"), cfg_byte(0))),
                    a::reg("pmp1cfg", t::ite(locked("c1"), t::var("c1"), cfg_byte(1))),
                ]),
            },
        ),
        (
            "pmpaddr0_write",
            Contract {
                logic_vars: lv(&[("v", Sort::Bits), ("c0", Sort::Bits), ("c1", Sort::Bits), ("a0", Sort::Bits)]),
                args: vec![t::var("v")],
                pre: a::star(vec![
                    a::reg("pmp0cfg", t::var("c0")),
                    a::reg("pmp1cfg", t::var("c1")),
                    a::reg("pmpaddr0", t::var("a0")),
                ]),
                result: sym("result"),
                post: a::star(vec![
                    a::reg("pmp0cfg", t::var("c0")),
                    a::reg("pmp1cfg", t::var("c1")),
                    a::reg(
                        "pmpaddr0",
                        t::ite(
                            t::or(locked("c0"), t::and(locked("c1"), tor("c1"))),
                            t::var("a0"),
                            t::var("v"),
                        ),
                    ),
                ]),
            },
        ),
        (
            "pmpaddr1_write",
            Contract {
                logic_vars: lv(&[("v", Sort::Bits), ("c1", Sort::Bits), ("a1", Sort::Bits)]),
                args: vec![t::var("v")],
                pre: a::star(vec![a::reg("pmp1cfg", t::var("c1")), a::reg("pmpaddr1", t::var("a1"))]),
                result: sym("result"),
                post: a::star(vec![
                    a::reg("pmp1cfg", t::var("c1")),
                    a::reg("pmpaddr1", t::ite(locked("c1"), t::var("a1"), t::var("v"))),
                ]),
            },
        ),
        (
            "read_ram",
            Contract {
                logic_vars: lv(&[
                    ("addr", Sort::Bits),
                    ("w", Sort::Bits),
                    ("t", acc_sort()),
                    ("p", priv_sort()),
                    ("es", entries_sort()),
                ]),
                args: vec![t::var("addr")],
                pre: a::star(vec![
                    ram_frame(),
                    a::mem(t::var("addr"), t::var("w")),
                    a::pure(pmp_access(t::var("addr"), t::var("es"), t::var("p"), t::var("t"))),
                    a::pure(t::ne(t::var("t"), t::enm("Write"))),
                ]),
                result: sym("result"),
                post: a::star(vec![
                    ram_frame(),
                    a::mem(t::var("addr"), t::var("w")),
                    a::pure(t::eq(t::var("result"), t::var("w"))),
                ]),
            },
        ),
        (
            "write_ram",
            Contract {
                logic_vars: lv(&[
                    ("addr", Sort::Bits),
                    ("v", Sort::Bits),
                    ("t", acc_sort()),
                    ("p", priv_sort()),
                    ("es", entries_sort()),
                ]),
                args: vec![t::var("addr"), t::var("v")],
                pre: a::star(vec![
                    ram_frame(),
                    a::exists("w", Sort::Bits, a::mem(t::var("addr"), t::var("w"))),
                    a::pure(pmp_access(t::var("addr"), t::var("es"), t::var("p"), t::var("t"))),
                    a::pure(t::op(Op::AccLe, vec![t::enm("Write"), t::var("t")])),
                ]),
                result: sym("result"),
                post: a::star(vec![ram_frame(), a::mem(t::var("addr"), t::var("v"))]),
            },
        ),
        (
            "decode",
            Contract {
                logic_vars: lv(&[("w", Sort::Bits)]),
                args: vec![t::var("w")],
                pre: Assertion::Emp,
                result: sym("result"),
                post: Assertion::Emp,
            },
        ),
        (
            "fdeStep",
            Contract {
                logic_vars: step_vars(),
                args: vec![],
                pre: step_pre(),
                result: sym("result"),
                post: step_post(),
            },
        ),
    ]
}

fn lemmas(max_addr: u32) -> Vec<LemmaDecl> {
    let es = || t::var("es");
    let pmp_vars = ["cfg0", "addr0", "cfg1", "addr1"];
    let pmp_exists = |body: Assertion| {
        pmp_vars
            .iter()
            .rev()
            .fold(body, |acc, x| a::exists(x, Sort::Bits, acc))
    };
    let pv = || pmp_vars.map(t::var);
    let [c0, a0, c1, a1] = pv();
    let gpr_names: Vec<String> = (1..=GPR_COUNT).map(|i| format!("w{i}")).collect();
    let gpr_regs = a::star(
        gpr_names
            .iter()
            .enumerate()
            .map(|(i, w)| a::reg(REG_NAMES[i + 1], t::var(w)))
            .collect(),
    );
    let gprs_closed = gpr_names
        .iter()
        .rev()
        .fold(gpr_regs, |acc, w| a::exists(w, Sort::Bits, acc));
    let addr = || t::var("addr");
    vec![
        LemmaDecl {
            name: sym("open_GPRs"),
            logic_vars: lv(&[("ws", gprs_sort())]),
            params: vec![],
            pre: a::pred("GPRs", vec![t::var("ws")]),
            post: a::star(
                (0..GPR_COUNT)
                    .map(|i| a::reg(REG_NAMES[i + 1], Term::Proj(Box::new(t::var("ws")), i)))
                    .collect(),
            ),
        },
        LemmaDecl {
            name: sym("close_GPRs"),
            logic_vars: vec![],
            params: vec![],
            pre: gprs_closed,
            post: a::pred(
                "GPRs",
                vec![Term::Tuple(gpr_names.iter().map(|w| t::var(w)).collect())],
            ),
        },
        LemmaDecl {
            name: sym("open_PMP_entries"),
            logic_vars: lv(&[("es", entries_sort())]),
            params: vec![],
            pre: a::pred("PMP_entries", vec![es()]),
            post: pmp_exists(a::star(vec![
                pmp_regs(c0.clone(), a0.clone(), c1.clone(), a1.clone()),
                a::pure(t::eq(es(), entries_t(c0.clone(), a0.clone(), c1.clone(), a1.clone()))),
            ])),
        },
        LemmaDecl {
            name: sym("close_PMP_entries"),
            logic_vars: vec![],
            params: vec![],
            pre: pmp_exists(pmp_regs(c0.clone(), a0.clone(), c1.clone(), a1.clone())),
            post: a::pred("PMP_entries", vec![entries_t(c0, a0, c1, a1)]),
        },
        LemmaDecl {
            name: sym("extract_PMP_ptsto"),
            logic_vars: lv(&[
                ("addr", Sort::Bits),
                ("acc", acc_sort()),
                ("es", entries_sort()),
                ("p", priv_sort()),
            ]),
            params: vec![addr(), t::var("acc")],
            pre: a::star(vec![
                a::pred("PMP_addr_access", vec![es(), t::var("p")]),
                a::pure(t::eq(t::op(Op::BvAnd, vec![addr(), t::bits(3)]), t::bits(0))),
                a::pure(t::op(Op::BvUle, vec![addr(), t::bits(max_addr)])),
                a::pure(pmp_access(addr(), es(), t::var("p"), t::var("acc"))),
            ]),
            post: a::star(vec![
                a::exists("w", Sort::Bits, a::mem(addr(), t::var("w"))),
                a::wand_mem(addr(), "PMP_addr_access", vec![es(), t::var("p")]),
            ]),
        },
        LemmaDecl {
            name: sym("return_PMP_ptsto"),
            logic_vars: lv(&[("addr", Sort::Bits), ("es", entries_sort()), ("p", priv_sort())]),
            params: vec![addr()],
            pre: a::star(vec![
                a::exists("w", Sort::Bits, a::mem(addr(), t::var("w"))),
                a::wand_mem(addr(), "PMP_addr_access", vec![es(), t::var("p")]),
            ]),
            post: a::pred("PMP_addr_access", vec![es(), t::var("p")]),
        },
    ]
}

/// The RISC-V program with memory owned through the PMP.
pub fn program(m: &Mutations) -> Program {
    program_with(m, MemMode::Universal)
}

pub fn program_with(m: &Mutations, mode: MemMode) -> Program {
    let max_addr = (mem_size(Isa::RiscV) - 4) as u32;
    let mut p = Program::new("riscv-pmp");
    p.safe_failure = false;
    let enm = |xs: &[&str]| xs.iter().map(|x| sym(x)).collect::<Vec<_>>();
    p.types.enums.insert(sym("Privilege"), enm(&["User", "Machine"]));
    p.types.enums.insert(sym("AccessType"), enm(&["Read", "Write", "Execute", "ReadWrite"]));
    p.types.enums.insert(sym("Reg"), enm(&REG_NAMES));
    p.types.unions.insert(
        sym("instr"),
        instr_ctors()
            .into_iter()
            .map(|(c, fs)| (sym(c), fs.into_iter().map(|(_, s)| s).collect()))
            .collect(),
    );
    p.types.unions.insert(
        sym("mem_result"),
        vec![(sym("MemValue"), vec![Sort::Bits]), (sym("MemException"), vec![Sort::Bits])],
    );
    for r in ["pc", "mtvec", "mcause", "mepc", "pmp0cfg", "pmp1cfg", "pmpaddr0", "pmpaddr1"] {
        p.registers.push((sym(r), Sort::Bits));
    }
    p.registers.push((sym("cur_privilege"), priv_sort()));
    p.registers.push((sym("mstatus"), mstatus_sort()));
    for r in &REG_NAMES[1..] {
        p.registers.push((sym(r), Sort::Bits));
    }

    let r = reg_sort;
    let b = || Sort::Bits;
    p.add_internal("read_gpr", &[("r", r())], b(), read_gpr_body());
    p.add_internal("write_gpr", &[("r", r()), ("v", b())], Sort::Unit, write_gpr_body());
    p.add_internal(
        "pmp_check",
        &[("addr", b()), ("acc", acc_sort()), ("priv", priv_sort())],
        Sort::Bool,
        pmp_check_body(m),
    );
    p.add_internal("pmpcfg_write", &[("v", b())], Sort::Unit, pmpcfg_write_body(m));
    p.add_internal("pmpaddr0_write", &[("v", b())], Sort::Unit, pmpaddr0_write_body(m));
    p.add_internal("pmpaddr1_write", &[("v", b())], Sort::Unit, pmpaddr1_write_body(m));
    p.add_internal(
        "mem_read",
        &[("acc", acc_sort()), ("addr", b()), ("cause", b())],
        mem_result(),
        mem_read_body(mode, max_addr),
    );
    p.add_internal(
        "mem_write",
        &[("addr", b()), ("v", b()), ("cause", b())],
        mem_result(),
        mem_write_body(mode, max_addr),
    );
    p.add_internal("handle_trap", &[("cause", b()), ("epc", b())], Sort::Unit, handle_trap_body());
    p.add_internal("execute", &[("i", instr_sort()), ("pc", b())], Sort::Unit, execute_body());
    p.add_internal("fdeStep", &[], Sort::Bool, fde_step());
    p.add_internal(
        "fdeCycle",
        &[],
        Sort::Unit,
        s::seq(s::call("fdeStep", vec![]), s::call("fdeCycle", vec![])),
    );

    p.add_foreign("read_ram", &[("addr", b())], b(), false, rt_read_ram);
    p.add_foreign("write_ram", &[("addr", b()), ("v", b())], Sort::Unit, false, rt_write_ram);
    p.add_foreign("decode", &[("w", b())], instr_sort(), true, rt_decode);

    for (f, c) in contracts() {
        p.contracts.insert(sym(f), c);
    }
    for l in lemmas(max_addr) {
        p.lemmas.insert(l.name, l);
    }
    if mode == MemMode::Owned {
        // Blocks are verified by running the step itself.
        p.inline.insert(sym("fdeStep"));
    }
    p.number_nodes();
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::check_wellformed;
    use crate::machine::{mstatus_value, run_fde_step, Outcome};
    use crate::riscv::instr::{encode_rv32, Reg};
    use crate::riscv::{Privilege, RvInstr};

    fn machine(code: &[RvInstr]) -> MachineState {
        let mut st = MachineState::new(Isa::RiscV, 256);
        for (i, ins) in code.iter().enumerate() {
            st.write_word_le(4 * i as u64, encode_rv32(ins)).unwrap();
        }
        st
    }

    fn x(r: Reg) -> String {
        format!("x{r}")
    }

    fn step(st: &MachineState) -> MachineState {
        let (st, out) = run_fde_step(&program(&Mutations::none()), st);
        assert_eq!(out, Outcome::Value(Value::Bool(true)));
        st
    }

    #[test]
    fn wellformed() {
        assert_eq!(check_wellformed(&program(&Mutations::none())), vec![]);
        assert_eq!(check_wellformed(&program_with(&Mutations::none(), MemMode::Owned)), vec![]);
    }

    #[test]
    fn addi_writes_and_advances() {
        let st = step(&machine(&[RvInstr::OpImm { op: ImmOp::Addi, rd: 1, rs1: 0, imm: 5 }]));
        assert_eq!(st.reg_str(&x(1)), Some(&Value::Bits(5)));
        assert_eq!(st.reg_str("pc"), Some(&Value::Bits(4)));
    }

    #[test]
    fn writes_to_x0_are_dropped() {
        let st = step(&machine(&[RvInstr::OpImm { op: ImmOp::Addi, rd: 0, rs1: 0, imm: 5 }]));
        assert_eq!(st.reg_str("pc"), Some(&Value::Bits(4)));
        assert!((1..32).all(|i| st.reg_str(&format!("x{i}")) == Some(&Value::Bits(0))));
    }

    #[test]
    fn user_load_without_pmp_entry_traps() {
        let mut st = machine(&[RvInstr::Lw { rd: 1, rs1: 0, imm: 8 }]);
        st.set_reg_str("cur_privilege", Privilege::User.to_value());
        st.set_reg_str("mtvec", Value::Bits(0x40));
        let st = step(&st);
        // Instruction fetch already fails in user mode.
        assert_eq!(st.reg_str("pc"), Some(&Value::Bits(0x40)));
        assert_eq!(st.reg_str("mcause"), Some(&Value::Bits(CAUSE_FETCH)));
        assert_eq!(st.reg_str("mepc"), Some(&Value::Bits(0)));
        assert_eq!(st.reg_str("cur_privilege"), Some(&Privilege::Machine.to_value()));
        assert_eq!(st.reg_str("mstatus"), Some(&mstatus_value(Privilege::User)));
    }

    #[test]
    fn pmp_entry_lets_user_code_run_but_not_touch_kernel_data() {
        let mut st = machine(&[]);
        st.write_word_le(128, encode_rv32(&RvInstr::Lw { rd: 2, rs1: 0, imm: 16 })).unwrap();
        st.write_word_le(16, 99).unwrap();
        st.set_reg_str("cur_privilege", Privilege::User.to_value());
        st.set_reg_str("pc", Value::Bits(128));
        st.set_reg_str("mtvec", Value::Bits(0x40));
        st.set_reg_str("pmpaddr0", Value::Bits(128));
        st.set_reg_str("pmpaddr1", Value::Bits(256));
        st.set_reg_str("pmp1cfg", Value::Bits(0x0f));
        let after = step(&st);
        assert_eq!(after.reg_str("mcause"), Some(&Value::Bits(CAUSE_LOAD)));
        assert_eq!(after.reg_str("mepc"), Some(&Value::Bits(128)));
        assert_eq!(after.reg_str("x2"), Some(&Value::Bits(0)));
        // Machine mode reads it.
        st.set_reg_str("cur_privilege", Privilege::Machine.to_value());
        let after = step(&st);
        assert_eq!(after.reg_str("x2"), Some(&Value::Bits(99)));
        assert_eq!(after.reg_str("pc"), Some(&Value::Bits(132)));
    }

    #[test]
    fn mret_returns_to_user_mode() {
        let mut st = machine(&[RvInstr::Mret]);
        st.set_reg_str("mepc", Value::Bits(88));
        let st = step(&st);
        assert_eq!(st.reg_str("pc"), Some(&Value::Bits(88)));
        assert_eq!(st.reg_str("cur_privilege"), Some(&Privilege::User.to_value()));
    }

    #[test]
    fn csr_writes_respect_locks() {
        let mut st = machine(&[
            RvInstr::Csrrw { rd: 3, rs1: 1, csr: CSR_PMPCFG0 },
            RvInstr::Csrrw { rd: 0, rs1: 1, csr: CSR_PMPADDR0 },
        ]);
        st.set_reg_str("pmp0cfg", Value::Bits(0x88));
        st.set_reg_str("x1", Value::Bits(0x0f0f));
        let st = step(&st);
        assert_eq!(st.reg_str("pmp0cfg"), Some(&Value::Bits(0x88)));
        assert_eq!(st.reg_str("pmp1cfg"), Some(&Value::Bits(0x0f)));
        assert_eq!(st.reg_str("x3"), Some(&Value::Bits(0x88)));
        let st = step(&st);
        assert_eq!(st.reg_str("pmpaddr0"), Some(&Value::Bits(0)));

        let m = Mutations { skip_lock_check: true, ..Mutations::none() };
        let mut st = machine(&[RvInstr::Csrrw { rd: 0, rs1: 1, csr: CSR_PMPCFG0 }]);
        st.set_reg_str("pmp0cfg", Value::Bits(0x88));
        st.set_reg_str("x1", Value::Bits(0x0f0f));
        let (st, _) = run_fde_step(&program(&m), &st);
        assert_eq!(st.reg_str("pmp0cfg"), Some(&Value::Bits(0x0f)));
    }

    #[test]
    fn user_csr_access_is_illegal() {
        let mut st = machine(&[]);
        st.write_word_le(128, encode_rv32(&RvInstr::Csrrw { rd: 0, rs1: 1, csr: CSR_MTVEC })).unwrap();
        st.set_reg_str("cur_privilege", Privilege::User.to_value());
        st.set_reg_str("pc", Value::Bits(128));
        st.set_reg_str("pmpaddr1", Value::Bits(256));
        st.set_reg_str("pmp1cfg", Value::Bits(0x0f));
        st.set_reg_str("x1", Value::Bits(0x1234));
        let st = step(&st);
        assert_eq!(st.reg_str("mcause"), Some(&Value::Bits(CAUSE_ILLEGAL)));
        assert_eq!(st.reg_str("mtvec"), Some(&Value::Bits(0)));
    }

    #[test]
    fn misaligned_store_traps() {
        let mut st = machine(&[RvInstr::Sw { rs1: 0, rs2: 1, imm: 6 }]);
        st.set_reg_str("mtvec", Value::Bits(0x40));
        let st = step(&st);
        assert_eq!(st.reg_str("mcause"), Some(&Value::Bits(CAUSE_STORE)));
        assert_eq!(st.reg_str("pc"), Some(&Value::Bits(0x40)));
    }

    #[test]
    fn jal_links_and_jumps() {
        let st = step(&machine(&[RvInstr::Jal { rd: 1, imm: 64 }]));
        assert_eq!(st.reg_str("x1"), Some(&Value::Bits(4)));
        assert_eq!(st.reg_str("pc"), Some(&Value::Bits(64)));
    }
}

#[cfg(test)]
mod verify {
    use super::*;
    use crate::symexec::{verify_all, verify_contract, Status};

    #[test]
    fn every_contract_verifies() {
        let p = program(&Mutations::none());
        let bad: Vec<String> = verify_all(&p)
            .into_iter()
            .filter(|r| !matches!(r.status, Status::Verified))
            .map(|r| format!("{}: {:?}", r.function, r.status))
            .collect();
        assert!(bad.is_empty(), "{}", bad.join("\n"));
    }

    #[test]
    fn pmp_mutations_break_pmp_check() {
        for m in [
            Mutations { reverse_pmp_priority: true, ..Mutations::none() },
            Mutations { pmp_always_allow: true, ..Mutations::none() },
        ] {
            let r = verify_contract(&program(&m), "pmp_check");
            assert!(!matches!(r.status, Status::Verified), "{m:?}");
        }
    }

    #[test]
    fn skipping_lock_checks_breaks_csr_writes() {
        let m = Mutations { skip_lock_check: true, ..Mutations::none() };
        for f in ["pmpcfg_write", "pmpaddr0_write", "pmpaddr1_write"] {
            let r = verify_contract(&program(&m), f);
            assert!(!matches!(r.status, Status::Verified), "{f}");
        }
    }
}

#[cfg(test)]
mod controls {
    use super::*;
    use crate::symexec::{verify_contract, Status};

    #[test]
    fn step_fails_when_the_pmp_check_is_trusted_blindly() {
        let m = Mutations { pmp_always_allow: true, ..Mutations::none() };
        let mut p = program(&m);
        p.inline.insert(sym("pmp_check"));
        let r = verify_contract(&p, "fdeStep");
        assert!(!matches!(r.status, Status::Verified), "{:?}", r.status);
    }

    #[test]
    fn step_needs_the_ghost_memory_steps() {
        let p = program_with(&Mutations::none(), MemMode::Owned);
        let mut p2 = p.clone();
        p2.inline.remove(&sym("fdeStep"));
        let r = verify_contract(&p2, "fdeStep");
        assert!(matches!(r.status, Status::Failed(_)), "{:?}", r.status);
    }

    #[test]
    fn step_explores_every_instruction_class() {
        // One path per instruction at least, plus fetch and access faults.
        let r = verify_contract(&program(&Mutations::none()), "fdeStep");
        assert!(r.paths > 40, "{}", r.paths);
    }
}
