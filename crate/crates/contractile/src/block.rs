//! Verification of straight-line RISC-V code blocks.
//!
//! A block is a run of instruction words at a base address. Its contract is
//! an ordinary pre/post pair over registers, predicates and memory; the code
//! words themselves are added to both sides as points-to chunks. The
//! verifier runs the step function of the owned-memory program from the
//! precondition, one instruction at a time, for as long as the pc is a
//! known address inside the block, then consumes the postcondition.

use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use crate::ast::Program;
use crate::machine::MachineState;
use crate::riscv::program::{entries_sort, gprs_sort, priv_sort};
use crate::seplogic::build as a;
use crate::seplogic::{Assertion, Chunk, Contract, Subst, SymState};
use crate::sexpr::ParseError;
use crate::sym::{sym, Sym};
use crate::symexec::{close_paths, status_of, Exec, Flow, Status, VerifyResult};
use crate::term::{self as t, Term};
use crate::value::{Sort, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AsmBlock {
    pub base: u32,
    pub words: Vec<u32>,
}

impl AsmBlock {
    pub fn new(base: u32, words: Vec<u32>) -> AsmBlock {
        AsmBlock { base, words }
    }

    /// Reads `base <hex>` followed by one hex word per line. Blank lines
    /// and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<AsmBlock, ParseError> {
        let mut base = None;
        let mut words = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| ParseError(format!("line {}: {what}: {line}", n + 1));
            if let Some(rest) = line.strip_prefix("base") {
                if base.is_some() {
                    return Err(bad("duplicate base"));
                }
                base = Some(hex(rest.trim()).ok_or_else(|| bad("bad base address"))?);
                continue;
            }
            if base.is_none() {
                return Err(bad("expected `base <hex>` first"));
            }
            words.push(hex(line).ok_or_else(|| bad("bad instruction word"))?);
        }
        let base = base.ok_or_else(|| ParseError("missing `base` line".into()))?;
        if base % 4 != 0 {
            return Err(ParseError(format!("base {base:#x} is not word aligned")));
        }
        Ok(AsmBlock { base, words })
    }

    pub fn end(&self) -> u64 {
        self.base as u64 + 4 * self.words.len() as u64
    }

    pub fn contains(&self, addr: u32) -> bool {
        addr >= self.base && (addr as u64) < self.end() && addr.is_multiple_of(4)
    }

    pub fn code_chunks(&self) -> Vec<Assertion> {
        self.words
            .iter()
            .enumerate()
            .map(|(i, w)| a::mem(t::bits(self.base + 4 * i as u32), t::bits(*w)))
            .collect()
    }

    pub fn load_into(&self, st: &mut MachineState) -> Result<(), String> {
        for (i, w) in self.words.iter().enumerate() {
            st.write_word_le(self.base as u64 + 4 * i as u64, *w)?;
        }
        Ok(())
    }
}

fn hex(s: &str) -> Option<u32> {
    u32::from_str_radix(s.strip_prefix("0x").unwrap_or(s), 16).ok()
}

impl fmt::Display for AsmBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "base {:#x}", self.base)?;
        for w in &self.words {
            writeln!(f, "{w:#010x}")?;
        }
        Ok(())
    }
}

fn pc_of(st: &SymState) -> Option<u32> {
    let key = Term::Lit(Value::enm("pc"));
    st.heap.iter().find_map(|c| match c {
        Chunk::Reg(k, v) if *k == key => match st.resolve(v) {
            Term::Lit(Value::Bits(b)) => Some(b),
            _ => None,
        },
        _ => None,
    })
}

/// Runs one step on every state; finished paths go to `done`.
fn step_all(exec: &mut Exec, states: Vec<SymState>, next: &mut Vec<SymState>, done: &mut Vec<Flow>) {
    for st in states {
        for fl in exec.call(st, sym("fdeStep"), vec![]) {
            match fl {
                Flow::Val(s, _) if s.feasible() => next.push(s),
                Flow::Val(..) => {}
                other => done.push(other),
            }
        }
    }
}

/// Verifies `c` for `b` against an owned-memory RISC-V program. A path
/// that is still inside the block after `b.words.len()` steps is an error,
/// since blocks are straight-line code.
pub fn verify_block(prog: &Program, b: &AsmBlock, c: &Contract) -> VerifyResult {
    let start = Instant::now();
    let res = |status: Status, paths, matched| VerifyResult {
        function: format!("block@{:#x}", b.base),
        status,
        paths,
        chunks_matched: matched,
        millis: start.elapsed().as_millis(),
    };
    if b.words.is_empty() {
        return res(Status::Failed("empty block".into()), 0, 0);
    }
    let mut st = SymState::new();
    let mut sigma: Subst = Vec::new();
    for (x, s) in &c.logic_vars {
        let v = st.fresh(x.as_str(), s, &prog.types);
        sigma.push((*x, v));
    }
    let code = b.code_chunks();
    let mut pre = vec![c.pre.clone()];
    pre.extend(code.iter().cloned());
    let mut post = vec![c.post.clone()];
    post.extend(code);

    let mut exec = Exec::new(prog);
    let mut live = st.produce(&a::star(pre), &sigma, &prog.types);
    let mut done = Vec::new();
    for s in &live {
        if !pc_of(s).is_some_and(|pc| b.contains(pc)) {
            return res(Status::Failed("the precondition does not put pc inside the block".into()), 0, 0);
        }
    }
    for _ in 0..b.words.len() {
        let mut next = Vec::new();
        step_all(&mut exec, live, &mut next, &mut done);
        live = Vec::new();
        for s in next {
            if pc_of(&s).is_some_and(|pc| b.contains(pc)) {
                live.push(s);
            } else {
                done.push(Flow::Val(s, Term::Lit(Value::Unit)));
            }
        }
    }
    for s in live {
        done.push(Flow::Err(s, "pc is still inside the block after one pass".into()));
    }
    let sum = close_paths(prog, done, c.result, &a::star(post), &sigma);
    res(status_of(&sum), sum.paths, sum.matched)
}

/// Logic variables of the generic one-step precondition.
fn step_vars() -> Vec<(Sym, Sort)> {
    [
        ("l", priv_sort()),
        ("h", Sort::Bits),
        ("cause", Sort::Bits),
        ("mpp", priv_sort()),
        ("epc", Sort::Bits),
        ("es", entries_sort()),
        ("ws", gprs_sort()),
    ]
    .into_iter()
    .map(|(x, s)| (sym(x), s))
    .collect()
}

/// Maps the fresh variables inside `image` back to projections of `target`.
fn invert(image: &Term, target: Term, out: &mut Subst) {
    match image {
        Term::Var(v) => out.push((*v, target)),
        Term::Tuple(ts) => {
            for (i, x) in ts.iter().enumerate() {
                invert(x, Term::Proj(Box::new(target.clone()), i), out);
            }
        }
        Term::Record(fs) => {
            for (f, x) in fs {
                invert(x, Term::Field(Box::new(target.clone()), *f), out);
            }
        }
        _ => {}
    }
}

fn chunk_assertion(c: &Chunk) -> Assertion {
    match c {
        Chunk::Reg(k, v) => a::reg_t(k.clone(), v.clone()),
        Chunk::Mem(x, v) => a::mem(x.clone(), v.clone()),
        Chunk::Pred(n, xs) => Assertion::Pred(*n, xs.clone()),
        Chunk::Wand { addr, pred, args } => a::wand_mem(addr.clone(), pred.as_str(), args.clone()),
    }
}

/// Describes one final state over the logic variables: its chunks, plus
/// the path facts that mention only chunk values and logic variables.
fn describe(st: &SymState, back: &Subst, logic: &BTreeSet<Sym>) -> Assertion {
    let back_term = |x: &Term| st.resolve(x).subst_all(back);
    let chunks: Vec<Assertion> = st.heap.iter().map(chunk_assertion).collect();
    let chunks: Vec<Assertion> = chunks
        .into_iter()
        .map(|c| match c {
            Assertion::Reg(k, v) => Assertion::Reg(back_term(&k), back_term(&v)),
            Assertion::Mem(x, v) => Assertion::Mem(back_term(&x), back_term(&v)),
            Assertion::Pred(n, xs) => Assertion::Pred(n, xs.iter().map(back_term).collect()),
            other => other,
        })
        .collect();
    let mut known: BTreeSet<Sym> = logic.clone();
    let mut exs = BTreeSet::new();
    for c in &chunks {
        let ts: Vec<&Term> = match c {
            Assertion::Reg(k, v) | Assertion::Mem(k, v) => vec![k, v],
            Assertion::Pred(_, xs) => xs.iter().collect(),
            _ => vec![],
        };
        for x in ts.into_iter().flat_map(Term::vars) {
            if !logic.contains(&x) {
                exs.insert(x);
            }
            known.insert(x);
        }
    }
    let mut facts: Vec<Term> = st.solver.solved.iter().map(|(x, v)| t::eq(Term::Var(*x), v.clone())).collect();
    facts.extend(st.solver.facts.iter().cloned());
    let mut parts: Vec<Assertion> = facts
        .iter()
        .map(|f| f.subst_all(back))
        .filter(|f| !f.is_true() && f.vars().iter().all(|x| known.contains(x)))
        .map(a::pure)
        .collect();
    parts.extend(chunks);
    let mut out = a::star(parts);
    for x in exs.into_iter().rev() {
        let s = st.sorts.get(&x).cloned().unwrap_or(Sort::Any);
        out = Assertion::Exists(x, s, Box::new(out));
    }
    out
}

/// The contract of one step from `addr` when the word there is `word`.
/// The precondition leaves every register but the pc symbolic; the
/// postcondition has one disjunct per path of the step. Fails if a path
/// needs memory that the precondition does not own.
pub fn specialize_step(prog: &Program, word: u32, addr: u32) -> Result<Contract, String> {
    let vars = step_vars();
    let v = t::var;
    let pre = a::star(vec![
        a::reg("pc", t::bits(addr)),
        a::mem(t::bits(addr), t::bits(word)),
        a::reg("cur_privilege", v("l")),
        a::reg("mtvec", v("h")),
        a::reg("mcause", v("cause")),
        a::reg("mstatus", Term::Record(vec![(sym("mpp"), v("mpp"))])),
        a::reg("mepc", v("epc")),
        a::pred("PMP_entries", vec![v("es")]),
        a::pred("GPRs", vec![v("ws")]),
    ]);
    let mut st = SymState::new();
    let mut sigma: Subst = Vec::new();
    let mut back: Subst = Vec::new();
    for (x, s) in &vars {
        let img = st.fresh(x.as_str(), s, &prog.types);
        invert(&img, Term::Var(*x), &mut back);
        sigma.push((*x, img));
    }
    let logic: BTreeSet<Sym> = vars.iter().map(|(x, _)| *x).collect();
    let mut exec = Exec::new(prog);
    let mut posts = Vec::new();
    for s in st.produce(&pre, &sigma, &prog.types) {
        for fl in exec.call(s, sym("fdeStep"), vec![]) {
            match fl {
                Flow::Val(s, _) if s.feasible() => posts.push(describe(&s, &back, &logic)),
                Flow::Val(..) => {}
                Flow::Halt(_) => return Err("step halted".into()),
                Flow::Err(_, m) => return Err(m),
            }
        }
    }
    if posts.is_empty() {
        return Err("no feasible path".into());
    }
    Ok(Contract {
        logic_vars: vars,
        args: vec![],
        pre,
        result: sym("result"),
        post: a::ors(posts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{mstatus_value, run_fde_step, Isa, Outcome};
    use crate::mutation::Mutations;
    use crate::riscv::instr::CSR_PMPADDR0;
    use crate::riscv::program::{program_with, MemMode};
    use crate::riscv::{encode_rv32, Privilege, RvInstr};
    use crate::seplogic::{gpr_tuple, holds, pmp_entries};
    use crate::sexpr;

    fn owned() -> Program {
        program_with(&Mutations::none(), MemMode::Owned)
    }

    #[test]
    fn block_file_round_trip() {
        let b = AsmBlock::parse("# init\nbase 0x48\n0x00000097\n  0x00c0a083 # lw\n\n30200073\n").unwrap();
        assert_eq!(b.base, 72);
        assert_eq!(b.words, vec![0x97, 0x00c0_a083, 0x3020_0073]);
        assert_eq!(AsmBlock::parse(&b.to_string()).unwrap(), b);
        assert!(AsmBlock::parse("0x13\n").is_err());
        assert!(AsmBlock::parse("base 0x2\n").is_err());
        assert!(AsmBlock::parse("base 0x0\nzz\n").is_err());
    }

    /// Logic-variable values read off a concrete state.
    fn sigma_of(st: &MachineState) -> Vec<(Sym, Value)> {
        let r = |n: &str| st.reg_str(n).cloned().unwrap();
        vec![
            (sym("l"), r("cur_privilege")),
            (sym("h"), r("mtvec")),
            (sym("cause"), r("mcause")),
            (sym("mpp"), r("mstatus").field(sym("mpp")).cloned().unwrap()),
            (sym("epc"), r("mepc")),
            (sym("es"), pmp_entries(st).unwrap()),
            (sym("ws"), gpr_tuple(st)),
        ]
    }

    /// The specialized contract holds on a concrete step from `st`.
    fn check_concretely(prog: &Program, c: &Contract, st: &MachineState) -> MachineState {
        let mut sigma = sigma_of(st);
        assert!(holds(&c.pre, st, &mut sigma), "pre fails");
        let (after, out) = run_fde_step(prog, st);
        assert!(matches!(out, Outcome::Value(_)), "{out}");
        assert!(holds(&c.post, &after, &mut sigma), "post fails for\n{}", c.post);
        after
    }

    fn machine_at(pc: u32, word: u32) -> MachineState {
        let mut st = MachineState::new(Isa::RiscV, 256);
        st.set_reg_str("pc", Value::Bits(pc));
        st.write_word_le(pc as u64, word).unwrap();
        st
    }

    #[test]
    fn specialized_addi() {
        let p = owned();
        let w = encode_rv32(&RvInstr::OpImm { op: crate::riscv::instr::ImmOp::Addi, rd: 1, rs1: 0, imm: 5 });
        let c = specialize_step(&p, w, 0).unwrap();
        let after = check_concretely(&p, &c, &machine_at(0, w));
        assert_eq!(after.reg_str("x1"), Some(&Value::Bits(5)));
        assert_eq!(after.reg_str("pc"), Some(&Value::Bits(4)));
        // The printed contract reads back unchanged.
        assert_eq!(sexpr::contract(&sexpr::print_contract(&c)).unwrap(), c);
    }

    #[test]
    fn specialized_mret() {
        let p = owned();
        let w = encode_rv32(&RvInstr::Mret);
        let c = specialize_step(&p, w, 68).unwrap();
        let mut st = machine_at(68, w);
        st.set_reg_str("cur_privilege", Value::enm("Machine"));
        st.set_reg_str("mepc", Value::Bits(88));
        st.set_reg_str("mstatus", mstatus_value(Privilege::User));
        let after = check_concretely(&p, &c, &st);
        assert_eq!(after.reg_str("pc"), Some(&Value::Bits(88)));
        assert_eq!(after.reg_str("cur_privilege"), Some(&Value::enm("User")));
    }

    #[test]
    fn specialized_csr_write() {
        let p = owned();
        let w = encode_rv32(&RvInstr::Csrrw { rd: 0, rs1: 1, csr: CSR_PMPADDR0 });
        let c = specialize_step(&p, w, 8).unwrap();
        let mut st = machine_at(8, w);
        st.set_reg_str("cur_privilege", Value::enm("Machine"));
        st.set_reg_str("x1", Value::Bits(88));
        let after = check_concretely(&p, &c, &st);
        assert_eq!(after.reg_str("pmpaddr0"), Some(&Value::Bits(88)));
    }

    #[test]
    fn straight_line_block() {
        use crate::riscv::instr::ImmOp::Addi;
        let p = owned();
        let words: Vec<u32> = [(1, 0, 7), (2, 1, 3)]
            .iter()
            .map(|&(rd, rs1, imm)| encode_rv32(&RvInstr::OpImm { op: Addi, rd, rs1, imm }))
            .collect();
        let b = AsmBlock::new(0, words);
        let c = sexpr::contract(
            "(contract (vars (ws (tuple bits bits bits bits bits bits bits bits bits bits bits bits bits bits \
             bits bits bits bits bits bits bits bits bits bits bits bits bits bits bits bits bits)) \
             (h bits) (cause bits) (epc bits) (mpp (enum Privilege))) \
             (pre (star (reg 'pc 0x0) (reg 'cur_privilege 'Machine) (reg 'mtvec h) (reg 'mcause cause) \
                        (reg 'mepc epc) (reg 'mstatus (record (mpp mpp))) (pred PMP_entries (tuple (tuple 0x0 0x0) (tuple 0x0 0x0))) (pred GPRs ws))) \
             (post (exists vs (tuple bits bits bits bits bits bits bits bits bits bits bits bits bits bits \
             bits bits bits bits bits bits bits bits bits bits bits bits bits bits bits bits bits) \
                   (star (reg 'pc 0x8) (reg 'cur_privilege 'Machine) (reg 'mtvec h) (reg 'mcause cause) \
                        (reg 'mepc epc) (reg 'mstatus (record (mpp mpp))) (pred PMP_entries (tuple (tuple 0x0 0x0) (tuple 0x0 0x0))) (pred GPRs vs) \
                        (pure (op = (op gpr-read vs 'x2) 0xa))))))",
        )
        .unwrap_or_else(|e| panic!("{e}"));
        let r = verify_block(&p, &b, &c);
        assert_eq!(r.status, Status::Verified, "{:?}", r.status);

        let mut wrong = c.clone();
        wrong.post = sexpr::assertion(&c.post.to_string().replace("0xa)", "0xb)")).unwrap();
        assert!(matches!(verify_block(&p, &b, &wrong).status, Status::Residual(_)));
    }

    #[test]
    fn pc_outside_block_is_rejected() {
        let p = owned();
        let b = AsmBlock::new(16, vec![0x13]);
        let c = Contract {
            logic_vars: vec![],
            args: vec![],
            pre: a::reg("pc", t::bits(0)),
            result: sym("result"),
            post: Assertion::Emp,
        };
        assert!(matches!(verify_block(&p, &b, &c).status, Status::Failed(_)));
    }
}
