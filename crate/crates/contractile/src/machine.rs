//! Concrete machine state and the small-step interpreter for core programs.

use std::fmt;

use thiserror::Error;

use crate::ast::{Body, Pattern, Program, Stm, StmKind};
use crate::minimalcaps::{Capability, Permission, Word};
use crate::riscv::pmp::Privilege;
use crate::sym::{sym, Sym};
use crate::value::Value;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Isa {
    MinimalCaps,
    RiscV,
}

impl Isa {
    pub fn name(self) -> &'static str {
        match self {
            Isa::MinimalCaps => "minimalcaps",
            Isa::RiscV => "riscv-pmp",
        }
    }

    pub fn parse(s: &str) -> Option<Isa> {
        match s {
            "minimalcaps" => Some(Isa::MinimalCaps),
            "riscv-pmp" => Some(Isa::RiscV),
            _ => None,
        }
    }
}

pub const DEFAULT_RISCV_MEMSIZE: u64 = 4096;
pub const DEFAULT_MC_MEMSIZE: u64 = 1024;
pub const MEMSIZE_ENV: &str = "CONTRACTILE_MEMSIZE";

/// Memory size in bytes (RISC-V) or words (MinimalCaps), honouring the
/// `CONTRACTILE_MEMSIZE` override.
pub fn mem_size(isa: Isa) -> u64 {
    let default = match isa {
        Isa::MinimalCaps => DEFAULT_MC_MEMSIZE,
        Isa::RiscV => DEFAULT_RISCV_MEMSIZE,
    };
    std::env::var(MEMSIZE_ENV)
        .ok()
        .and_then(|s| parse_num(s.trim()))
        .filter(|&n| (4..=1 << 24).contains(&n) && (isa == Isa::MinimalCaps || n % 4 == 0))
        .unwrap_or(default)
}

fn parse_num(s: &str) -> Option<u64> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16).ok(),
        None => s.parse().ok(),
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Memory {
    /// MinimalCaps: one word value per address.
    Words(Vec<Value>),
    /// RISC-V: byte-addressed, words little-endian.
    Bytes(Vec<u8>),
}

impl Memory {
    pub fn len(&self) -> u64 {
        match self {
            Memory::Words(ws) => ws.len() as u64,
            Memory::Bytes(bs) => bs.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Access {
    pub addr: u64,
    pub width: u64,
    pub write: bool,
}

#[derive(Clone, PartialEq, Debug)]
pub struct MachineState {
    pub isa: Isa,
    pub regs: Vec<(Sym, Value)>,
    pub mem: Memory,
    /// Every memory access made by the runtime, when enabled.
    pub log: Option<Vec<Access>>,
}

#[derive(Clone, PartialEq, Debug)]
pub enum Outcome {
    Value(Value),
    Failure(String),
    OutOfFuel,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Value(v) => write!(f, "value {v}"),
            Outcome::Failure(m) => write!(f, "failure: {m}"),
            Outcome::OutOfFuel => write!(f, "out of fuel"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot read image: {0}")]
    Io(String),
}

impl MachineState {
    /// Reset state: RISC-V starts in machine mode at pc 0 with cleared CSRs;
    /// MinimalCaps starts with an RW pc capability over all memory.
    pub fn new(isa: Isa, mem_size: u64) -> MachineState {
        let regs = match isa {
            Isa::RiscV => {
                let mut regs = vec![
                    (sym("pc"), Value::Bits(0)),
                    (sym("cur_privilege"), Privilege::Machine.to_value()),
                    (sym("mtvec"), Value::Bits(0)),
                    (sym("mcause"), Value::Bits(0)),
                    (sym("mepc"), Value::Bits(0)),
                    (sym("mstatus"), mstatus_value(Privilege::User)),
                    (sym("pmp0cfg"), Value::Bits(0)),
                    (sym("pmp1cfg"), Value::Bits(0)),
                    (sym("pmpaddr0"), Value::Bits(0)),
                    (sym("pmpaddr1"), Value::Bits(0)),
                ];
                for i in 1..32 {
                    regs.push((sym(&format!("x{i}")), Value::Bits(0)));
                }
                regs
            }
            Isa::MinimalCaps => {
                let top = mem_size as i64 - 1;
                let mut regs = vec![(
                    sym("pc"),
                    Word::Cap(Capability::new(Permission::RW, 0, top, 0)).to_value(),
                )];
                for r in ["R0", "R1", "R2", "R3"] {
                    regs.push((sym(r), Word::Int(0).to_value()));
                }
                regs
            }
        };
        let mem = match isa {
            Isa::RiscV => Memory::Bytes(vec![0; mem_size as usize]),
            Isa::MinimalCaps => Memory::Words(vec![Word::Int(0).to_value(); mem_size as usize]),
        };
        MachineState { isa, regs, mem, log: None }
    }

    pub fn reg(&self, r: Sym) -> Option<&Value> {
        self.regs.iter().find(|(n, _)| *n == r).map(|(_, v)| v)
    }

    pub fn reg_str(&self, r: &str) -> Option<&Value> {
        self.reg(sym(r))
    }

    pub fn set_reg(&mut self, r: Sym, v: Value) -> Result<(), String> {
        match self.regs.iter_mut().find(|(n, _)| *n == r) {
            Some(slot) => {
                slot.1 = v;
                Ok(())
            }
            None => Err(format!("unknown register {r}")),
        }
    }

    pub fn set_reg_str(&mut self, r: &str, v: Value) {
        self.set_reg(sym(r), v).expect("register exists");
    }

    fn note(&mut self, addr: u64, width: u64, write: bool) {
        if let Some(log) = &mut self.log {
            log.push(Access { addr, width, write });
        }
    }

    pub fn read_word_le(&mut self, addr: u64) -> Result<u32, String> {
        let Memory::Bytes(bs) = &self.mem else { return Err("not byte-addressed".into()) };
        let a = addr as usize;
        if addr.checked_add(4).is_none_or(|end| end > bs.len() as u64) {
            return Err(format!("read_ram: address {addr:#x} out of range"));
        }
        let w = u32::from_le_bytes([bs[a], bs[a + 1], bs[a + 2], bs[a + 3]]);
        self.note(addr, 4, false);
        Ok(w)
    }

    pub fn write_word_le(&mut self, addr: u64, w: u32) -> Result<(), String> {
        let Memory::Bytes(bs) = &mut self.mem else { return Err("not byte-addressed".into()) };
        let a = addr as usize;
        if addr.checked_add(4).is_none_or(|end| end > bs.len() as u64) {
            return Err(format!("write_ram: address {addr:#x} out of range"));
        }
        bs[a..a + 4].copy_from_slice(&w.to_le_bytes());
        self.note(addr, 4, true);
        Ok(())
    }

    /// Word at a MinimalCaps address.
    pub fn load_word(&mut self, addr: i64) -> Result<Value, String> {
        let Memory::Words(ws) = &self.mem else { return Err("not word-addressed".into()) };
        if addr < 0 || addr as usize >= ws.len() {
            return Err(format!("bounds: address {addr} outside memory"));
        }
        let v = ws[addr as usize].clone();
        self.note(addr as u64, 1, false);
        Ok(v)
    }

    pub fn store_word(&mut self, addr: i64, v: Value) -> Result<(), String> {
        let Memory::Words(ws) = &mut self.mem else { return Err("not word-addressed".into()) };
        if addr < 0 || addr as usize >= ws.len() {
            return Err(format!("bounds: address {addr} outside memory"));
        }
        ws[addr as usize] = v;
        self.note(addr as u64, 1, true);
        Ok(())
    }

    /// Memory word at `addr` without logging (RISC-V: 4 bytes LE).
    pub fn peek(&self, addr: u64) -> Option<Value> {
        match &self.mem {
            Memory::Bytes(bs) => {
                let a = addr as usize;
                let b = bs.get(a..a.checked_add(4)?)?;
                Some(Value::Bits(u32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            }
            Memory::Words(ws) => ws.get(addr as usize).cloned(),
        }
    }
}

pub fn mstatus_value(mpp: Privilege) -> Value {
    Value::Record(vec![(sym("mpp"), mpp.to_value())])
}

/// Parses a memory image and writes it into a zeroed copy of `state`'s
/// memory.
pub fn load_image(state: &MachineState, text: &str) -> Result<MachineState, ImageError> {
    let mut st = state.clone();
    st.mem = match &st.mem {
        Memory::Bytes(bs) => Memory::Bytes(vec![0; bs.len()]),
        Memory::Words(ws) => Memory::Words(vec![Word::Int(0).to_value(); ws.len()]),
    };
    let size = st.mem.len();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |msg: &str| ImageError::Parse { line, msg: msg.to_string() };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let addr = toks
            .first()
            .and_then(|t| t.strip_prefix("0x"))
            .and_then(|h| u64::from_str_radix(h, 16).ok())
            .ok_or_else(|| err("expected hex address"))?;
        match st.isa {
            Isa::RiscV => {
                if toks.len() != 2 {
                    return Err(err("expected `<hex-addr> <hex-word>`"));
                }
                let w = toks[1]
                    .strip_prefix("0x")
                    .and_then(|h| u32::from_str_radix(h, 16).ok())
                    .ok_or_else(|| err("expected 32-bit hex word"))?;
                if addr % 4 != 0 || addr + 4 > size {
                    return Err(err("address unaligned or out of range"));
                }
                st.write_word_le(addr, w).map_err(|m| err(&m))?;
            }
            Isa::MinimalCaps => {
                if addr >= size {
                    return Err(err("address out of range"));
                }
                let int = |t: &str| t.parse::<i64>().map_err(|_| err("expected decimal integer"));
                let word = match toks.get(1) {
                    Some(&"int") if toks.len() == 3 => Word::Int(int(toks[2])?),
                    Some(&"cap") if toks.len() == 6 => {
                        let perm = Permission::parse(toks[2]).ok_or_else(|| err("unknown permission"))?;
                        Word::Cap(Capability::new(perm, int(toks[3])?, int(toks[4])?, int(toks[5])?))
                    }
                    _ => return Err(err("expected `int <z>` or `cap <PERM> <b> <e> <a>`")),
                };
                st.store_word(addr as i64, word.to_value()).map_err(|m| err(&m))?;
            }
        }
    }
    st.log = state.log.as_ref().map(|_| Vec::new());
    Ok(st)
}

pub fn load_image_file(state: &MachineState, path: &std::path::Path) -> Result<MachineState, ImageError> {
    let text = std::fs::read_to_string(path).map_err(|e| ImageError::Io(e.to_string()))?;
    load_image(state, &text)
}

const MAX_DEPTH: usize = 512;

/// Tree-walking interpreter. Failures are plain messages.
pub struct Interp<'p> {
    pub prog: &'p Program,
    depth: usize,
}

type Env = Vec<(Sym, Value)>;

impl<'p> Interp<'p> {
    pub fn new(prog: &'p Program) -> Interp<'p> {
        Interp { prog, depth: 0 }
    }

    pub fn call(&mut self, st: &mut MachineState, f: Sym, args: Vec<Value>) -> Result<Value, String> {
        let decl = self
            .prog
            .functions
            .get(&f)
            .ok_or_else(|| format!("unknown function {f}"))?;
        match &decl.body {
            Body::Internal(body) => {
                if args.len() != decl.params.len() {
                    return Err(format!("{f}: arity mismatch"));
                }
                if self.depth >= MAX_DEPTH {
                    return Err("call depth exceeded".into());
                }
                let mut env: Env = decl.params.iter().map(|(n, _)| *n).zip(args).collect();
                self.depth += 1;
                let r = self.exec(st, &mut env, body);
                self.depth -= 1;
                r
            }
            Body::Foreign { .. } => {
                let run = self
                    .prog
                    .runtime
                    .get(&f)
                    .ok_or_else(|| format!("no runtime for {f}"))?;
                run(st, &args)
            }
        }
    }

    fn eval_all(&mut self, st: &mut MachineState, env: &mut Env, xs: &[Stm]) -> Result<Vec<Value>, String> {
        xs.iter().map(|x| self.exec(st, env, x)).collect()
    }

    pub fn exec(&mut self, st: &mut MachineState, env: &mut Env, s: &Stm) -> Result<Value, String> {
        use StmKind::*;
        match &s.kind {
            Lit(v) => Ok(v.clone()),
            Var(x) => env
                .iter()
                .rev()
                .find(|(n, _)| n == x)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| format!("unbound variable {x}")),
            Let(x, e, body) => {
                let v = self.exec(st, env, e)?;
                env.push((*x, v));
                let r = self.exec(st, env, body);
                env.pop();
                r
            }
            Seq(a, b) => {
                self.exec(st, env, a)?;
                self.exec(st, env, b)
            }
            CallInternal(f, xs) | CallForeign(f, xs) => {
                let args = self.eval_all(st, env, xs)?;
                self.call(st, *f, args)
            }
            LemmaInvoke(..) => Ok(Value::Unit),
            Assert(c, msg) => match self.exec(st, env, c)? {
                Value::Bool(true) => Ok(Value::Unit),
                Value::Bool(false) => Err(msg.clone()),
                v => Err(format!("assert on non-boolean {v}")),
            },
            Match(scrut, arms) => {
                let v = self.exec(st, env, scrut)?;
                for arm in arms {
                    let n = env.len();
                    if bind_pattern(&arm.pat, &v, env) {
                        let r = self.exec(st, env, &arm.body);
                        env.truncate(n);
                        return r;
                    }
                }
                Err(format!("no match arm for {v}"))
            }
            RecordGet(r, f) => {
                let v = self.exec(st, env, r)?;
                v.field(*f).cloned().ok_or_else(|| format!("no field {f} in {v}"))
            }
            RecordSet(r, f, x) => {
                let v = self.exec(st, env, r)?;
                let x = self.exec(st, env, x)?;
                match v {
                    Value::Record(mut fs) => {
                        let slot = fs
                            .iter_mut()
                            .find(|(n, _)| n == f)
                            .ok_or_else(|| format!("no field {f}"))?;
                        slot.1 = x;
                        Ok(Value::Record(fs))
                    }
                    v => Err(format!("record update on {v}")),
                }
            }
            TupleProject(t, i) => match self.exec(st, env, t)? {
                Value::Tuple(mut vs) if *i < vs.len() => Ok(vs.swap_remove(*i)),
                v => Err(format!("projection {i} of {v}")),
            },
            Tuple(xs) => Ok(Value::Tuple(self.eval_all(st, env, xs)?)),
            Ctor(c, xs) => Ok(Value::Ctor(*c, self.eval_all(st, env, xs)?)),
            Prim(op, xs) => {
                let args = self.eval_all(st, env, xs)?;
                op.eval(&args)
            }
            If(c, a, b) => match self.exec(st, env, c)? {
                Value::Bool(true) => self.exec(st, env, a),
                Value::Bool(false) => self.exec(st, env, b),
                v => Err(format!("if on non-boolean {v}")),
            },
            ReadReg(r) => st.reg(*r).cloned().ok_or_else(|| format!("unknown register {r}")),
            WriteReg(r, x) => {
                let v = self.exec(st, env, x)?;
                st.set_reg(*r, v)?;
                Ok(Value::Unit)
            }
            Fail(m) => Err(m.clone()),
        }
    }
}

pub fn bind_pattern(p: &Pattern, v: &Value, env: &mut Env) -> bool {
    match p {
        Pattern::Wild => true,
        Pattern::Bind(x) => {
            env.push((*x, v.clone()));
            true
        }
        Pattern::Lit(l) => l == v,
        Pattern::Ctor(c, xs) => match v {
            Value::Ctor(t, fs) if t == c && fs.len() == xs.len() => {
                env.extend(xs.iter().copied().zip(fs.iter().cloned()));
                true
            }
            _ => false,
        },
        Pattern::Tuple(xs) => match v {
            Value::Tuple(fs) if fs.len() == xs.len() => {
                env.extend(xs.iter().copied().zip(fs.iter().cloned()));
                true
            }
            _ => false,
        },
    }
}

/// Runs one statement against a copy of `state`.
pub fn exec_statement(
    prog: &Program,
    state: &MachineState,
    env: &[(Sym, Value)],
    s: &Stm,
) -> (MachineState, Outcome) {
    let mut st = state.clone();
    let mut env = env.to_vec();
    let out = match Interp::new(prog).exec(&mut st, &mut env, s) {
        Ok(v) => Outcome::Value(v),
        Err(m) => Outcome::Failure(m),
    };
    (st, out)
}

/// One fetch-decode-execute step in place. `Ok(false)` means the machine
/// halted.
pub fn step(prog: &Program, st: &mut MachineState) -> Result<bool, String> {
    match Interp::new(prog).call(st, sym("fdeStep"), vec![])? {
        Value::Bool(b) => Ok(b),
        v => Err(format!("fdeStep returned {v}")),
    }
}

pub fn run_fde_step(prog: &Program, state: &MachineState) -> (MachineState, Outcome) {
    let mut st = state.clone();
    let out = match step(prog, &mut st) {
        Ok(b) => Outcome::Value(Value::Bool(b)),
        Err(m) => Outcome::Failure(m),
    };
    (st, out)
}

/// Runs up to `fuel` steps in place.
pub fn run_in_place(prog: &Program, st: &mut MachineState, fuel: u64) -> Outcome {
    for _ in 0..fuel {
        match step(prog, st) {
            Ok(true) => {}
            Ok(false) => return Outcome::Value(Value::Unit),
            Err(m) => return Outcome::Failure(m),
        }
    }
    Outcome::OutOfFuel
}

pub fn run_fde_cycle(prog: &Program, state: &MachineState, fuel: u64) -> (MachineState, Outcome) {
    let mut st = state.clone();
    let out = run_in_place(prog, &mut st, fuel);
    (st, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riscv_image_little_endian() {
        let st = MachineState::new(Isa::RiscV, 128);
        let st = load_image(&st, "# data\n0x54 0x0000002A\n").unwrap();
        assert_eq!(st.peek(84), Some(Value::Bits(42)));
        let Memory::Bytes(bs) = &st.mem else { unreachable!() };
        assert_eq!(&bs[84..88], &[42, 0, 0, 0]);
    }

    #[test]
    fn empty_image_is_zero() {
        let mut st = MachineState::new(Isa::RiscV, 64);
        st.write_word_le(8, 5).unwrap();
        let st = load_image(&st, "").unwrap();
        assert_eq!(st.mem, Memory::Bytes(vec![0; 64]));
    }

    #[test]
    fn minimalcaps_image() {
        let st = MachineState::new(Isa::MinimalCaps, 64);
        let st = load_image(&st, "0x10 cap RW 0 100 16\n0x3 int -7\n").unwrap();
        let c = Capability::new(Permission::RW, 0, 100, 16);
        assert_eq!(st.peek(16), Some(Word::Cap(c).to_value()));
        assert_eq!(st.peek(3), Some(Word::Int(-7).to_value()));
    }

    #[test]
    fn parse_errors_carry_line() {
        let st = MachineState::new(Isa::RiscV, 64);
        let e = load_image(&st, "0x0 0x1\n\nbogus\n").unwrap_err();
        assert_eq!(e, ImageError::Parse { line: 3, msg: "expected hex address".into() });
        let e = load_image(&st, "0x2 0x1\n").unwrap_err();
        assert!(matches!(e, ImageError::Parse { line: 1, .. }));
        let mc = MachineState::new(Isa::MinimalCaps, 8);
        assert!(matches!(load_image(&mc, "0x1 cap XX 0 1 0"), Err(ImageError::Parse { line: 1, .. })));
    }

    #[test]
    fn ram_range_guard() {
        let mut st = MachineState::new(Isa::RiscV, 64);
        assert!(st.read_word_le(64).is_err());
        assert!(st.read_word_le(62).is_err());
        st.write_word_le(60, 7).unwrap();
        assert_eq!(st.read_word_le(60), Ok(7));
    }
}
