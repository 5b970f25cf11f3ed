//! Sampling checks of the verifier against the interpreter.
//!
//! A sample is a concrete state and a ground assignment of the logic
//! variables on which the precondition holds. States are built by choosing
//! random values and then writing the registers and memory that the
//! precondition mentions; samples on which the pure parts fail are
//! rejected.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ast::{Program, TypeEnv};
use crate::machine::{mem_size, Interp, Isa, MachineState};
use crate::riscv::encode_rv32;
use crate::riscv::instr::random_instr;
use crate::seplogic::{holds, Assertion, Contract};
use crate::sym::{sym, Sym};
use crate::symexec::{verify_all, Status};
use crate::term::Term;
use crate::value::{Sort, Value};

/// Memory size of sampled MinimalCaps states.
pub const MC_SAMPLE_MEM: u64 = 64;
const ATTEMPTS: usize = 400;

pub struct Sampler<'p> {
    pub prog: &'p Program,
    pub isa: Isa,
    pub mem: u64,
    pub rng: ChaCha8Rng,
}

impl<'p> Sampler<'p> {
    pub fn new(prog: &'p Program, isa: Isa, seed: u64) -> Sampler<'p> {
        let mem = match isa {
            Isa::RiscV => mem_size(Isa::RiscV),
            Isa::MinimalCaps => MC_SAMPLE_MEM,
        };
        Sampler { prog, isa, mem, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn int(&mut self) -> i64 {
        let m = self.mem as i64;
        match self.rng.gen_range(0..8) {
            0 => self.rng.gen_range(-1000..1000),
            _ => self.rng.gen_range(-2..m + 2),
        }
    }

    fn bits(&mut self) -> u32 {
        match self.rng.gen_range(0..8) {
            0 => self.rng.gen(),
            1 => *[0u32, 4, 88, 0x0f, 0x8f, 0x0f00].choose(&mut self.rng).expect("nonempty"),
            2 => self.rng.gen_range(0..256),
            _ => 4 * self.rng.gen_range(0..(self.mem as u32 / 4 + 1)),
        }
    }

    pub fn value(&mut self, s: &Sort, types: &TypeEnv) -> Value {
        match s {
            Sort::Unit => Value::Unit,
            Sort::Bool => Value::Bool(self.rng.gen()),
            Sort::Int => Value::Int(self.int()),
            Sort::Bits => Value::Bits(self.bits()),
            Sort::Enum(e) => match types.enums.get(e) {
                Some(vs) if !vs.is_empty() => Value::Enum(*vs.choose(&mut self.rng).expect("nonempty")),
                _ => Value::Unit,
            },
            Sort::Union(u) => match types.unions.get(u) {
                Some(cs) if !cs.is_empty() => {
                    let (c, fs) = cs.choose(&mut self.rng).expect("nonempty").clone();
                    Value::Ctor(c, fs.iter().map(|f| self.value(f, types)).collect())
                }
                _ => Value::Unit,
            },
            Sort::Record(fs) => Value::Record(fs.iter().map(|(n, f)| (*n, self.value(f, types))).collect()),
            Sort::Tuple(ss) => Value::Tuple(ss.iter().map(|f| self.value(f, types)).collect()),
            Sort::Any => match self.isa {
                Isa::RiscV => Value::Bits(self.bits()),
                Isa::MinimalCaps => self.value(&crate::minimalcaps::program::word(), types),
            },
        }
    }

    /// A state with random registers and memory. RISC-V memory holds
    /// random instructions so that fetches decode to something.
    pub fn base_state(&mut self) -> MachineState {
        let mut st = MachineState::new(self.isa, self.mem);
        let types = self.prog.types.clone();
        for (r, s) in self.prog.registers.clone() {
            let v = self.value(&s, &types);
            st.set_reg(r, v).expect("declared register");
        }
        match self.isa {
            Isa::RiscV => {
                for a in (0..self.mem).step_by(4) {
                    let w = if self.rng.gen_bool(0.9) { encode_rv32(&random_instr(&mut self.rng)) } else { self.rng.gen() };
                    st.write_word_le(a, w).expect("in range");
                }
            }
            Isa::MinimalCaps => {
                let word = crate::minimalcaps::program::word();
                for a in 0..self.mem {
                    let v = self.value(&word, &types);
                    st.store_word(a as i64, v).expect("in range");
                }
            }
        }
        st
    }

    /// Writes the spatial content of one disjunct of `a` into `st`.
    /// Existentials get fresh random values.
    fn force(&mut self, a: &Assertion, st: &mut MachineState, sigma: &mut Vec<(Sym, Value)>) {
        let eval = |t: &Term, sigma: &Vec<(Sym, Value)>| {
            t.eval(&|x| sigma.iter().rev().find(|(y, _)| *y == x).map(|(_, v)| v.clone())).ok()
        };
        match a {
            Assertion::Emp | Assertion::Pure(_) | Assertion::Wand(..) => {}
            Assertion::Reg(k, v) => {
                if let (Some(k), Some(v)) = (eval(k, sigma).and_then(|k| k.as_enum()), eval(v, sigma)) {
                    let _ = st.set_reg(k, v);
                }
            }
            Assertion::Mem(x, v) => {
                if let (Some(x), Some(v)) = (eval(x, sigma), eval(v, sigma)) {
                    match (self.isa, x, v) {
                        (Isa::RiscV, Value::Bits(x), Value::Bits(w)) => {
                            let _ = st.write_word_le(x as u64, w);
                        }
                        (Isa::MinimalCaps, Value::Int(x), v) => {
                            let _ = st.store_word(x, v);
                        }
                        _ => {}
                    }
                }
            }
            Assertion::Pred(n, xs) => match (n.as_str(), xs.first().and_then(|x| eval(x, sigma))) {
                ("GPRs", Some(Value::Tuple(ws))) => {
                    for (i, w) in ws.into_iter().enumerate() {
                        let _ = st.set_reg(sym(&format!("x{}", i + 1)), w);
                    }
                }
                ("PMP_entries", Some(Value::Tuple(es))) => {
                    for (i, e) in es.into_iter().enumerate() {
                        if let Value::Tuple(ca) = e {
                            if ca.len() == 2 {
                                let _ = st.set_reg(sym(&format!("pmp{i}cfg")), ca[0].clone());
                                let _ = st.set_reg(sym(&format!("pmpaddr{i}")), ca[1].clone());
                            }
                        }
                    }
                }
                _ => {}
            },
            Assertion::Star(l, r) => {
                self.force(l, st, sigma);
                self.force(r, st, sigma);
            }
            Assertion::Or(l, r) => {
                let pick = if self.rng.gen() { l } else { r };
                self.force(pick, st, sigma);
            }
            Assertion::Exists(x, s, b) => {
                let v = self.value(s, &self.prog.types.clone());
                let mut inner = sigma.clone();
                inner.push((*x, v));
                self.force(b, st, &mut inner);
            }
        }
    }

    /// A state and logic-variable assignment satisfying `pre`, or `None`
    /// if rejection sampling gives up.
    pub fn sample(&mut self, vars: &[(Sym, Sort)], pre: &Assertion) -> Option<(MachineState, Vec<(Sym, Value)>)> {
        let types = self.prog.types.clone();
        for _ in 0..ATTEMPTS {
            let mut sigma: Vec<(Sym, Value)> = vars.iter().map(|(x, s)| (*x, self.value(s, &types))).collect();
            let mut st = self.base_state();
            self.force(pre, &mut st, &mut sigma.clone());
            if holds(pre, &st, &mut sigma) {
                // Existentials of the pre are not logic variables.
                sigma.truncate(vars.len());
                return Some((st, sigma));
            }
        }
        None
    }
}

#[derive(Clone, Debug, Default)]
pub struct SoundnessReport {
    pub checked: usize,
    pub violations: Vec<String>,
    /// Functions or lemmas for which fewer samples than requested were found.
    pub undersampled: Vec<(String, usize)>,
    /// Runs that stopped at a failure the program treats as a safe halt.
    pub safe_halts: usize,
}

impl SoundnessReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty() && self.undersampled.is_empty()
    }
}

fn eval_args(c: &Contract, sigma: &[(Sym, Value)]) -> Option<Vec<Value>> {
    c.args
        .iter()
        .map(|a| a.eval(&|x| sigma.iter().rev().find(|(y, _)| *y == x).map(|(_, v)| v.clone())).ok())
        .collect()
}

/// Runs `f` concretely from `n` sampled pre-states and checks the post.
/// A failure counts as a violation unless the program treats failure as a
/// safe halt.
pub fn check_contract(s: &mut Sampler, f: &str, n: usize, rep: &mut SoundnessReport) {
    let Some(c) = s.prog.contracts.get(&sym(f)).cloned() else { return };
    let mut got = 0;
    for _ in 0..n {
        let Some((st0, sigma)) = s.sample(&c.logic_vars, &c.pre) else { break };
        got += 1;
        let Some(args) = eval_args(&c, &sigma) else {
            rep.violations.push(format!("{f}: arguments not ground"));
            continue;
        };
        let mut st = st0.clone();
        match Interp::new(s.prog).call(&mut st, sym(f), args) {
            Ok(v) => {
                let mut sg = sigma.clone();
                sg.push((c.result, v));
                if !holds(&c.post, &st, &mut sg) {
                    rep.violations.push(format!("{f}: post does not hold"));
                }
            }
            Err(m) if !s.prog.safe_failure => rep.violations.push(format!("{f}: failure: {m}")),
            Err(_) => rep.safe_halts += 1,
        }
        rep.checked += 1;
    }
    if got < n {
        rep.undersampled.push((f.to_string(), got));
    }
}

/// Every contract that verifies, `n` samples each.
pub fn differential(prog: &Program, isa: Isa, seed: u64, n: usize) -> SoundnessReport {
    let mut rep = SoundnessReport::default();
    let mut s = Sampler::new(prog, isa, seed);
    for r in verify_all(prog) {
        if r.status == Status::Verified {
            check_contract(&mut s, &r.function, n, &mut rep);
        }
    }
    rep
}

/// Each lemma's post must hold on states satisfying its pre.
pub fn lemmas(prog: &Program, isa: Isa, seed: u64, n: usize) -> SoundnessReport {
    let mut rep = SoundnessReport::default();
    let mut s = Sampler::new(prog, isa, seed);
    for l in prog.lemmas.values() {
        let mut got = 0;
        for _ in 0..n {
            let Some((st, mut sigma)) = s.sample(&l.logic_vars, &l.pre) else { break };
            got += 1;
            if !holds(&l.post, &st, &mut sigma) {
                rep.violations.push(format!("{}: post does not hold", l.name));
            }
            rep.checked += 1;
        }
        if got < n {
            rep.undersampled.push((l.name.to_string(), got));
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mutation::Mutations;
    use crate::{minimalcaps, riscv};

    #[test]
    fn riscv_contracts_hold_concretely() {
        let p = riscv::program::program(&Mutations::none());
        let r = differential(&p, Isa::RiscV, 1, 20);
        assert!(r.ok(), "{:?} {:?}", r.violations, r.undersampled);
        assert!(r.checked > 0);
    }

    #[test]
    fn minimalcaps_contracts_hold_concretely() {
        let p = minimalcaps::program::program(&Mutations::none());
        let r = differential(&p, Isa::MinimalCaps, 1, 20);
        assert!(r.ok(), "{:?} {:?}", r.violations, r.undersampled);
        assert!(r.safe_halts < r.checked, "{} of {}", r.safe_halts, r.checked);
    }

    #[test]
    fn lemma_posts_hold() {
        for (p, isa) in [
            (riscv::program::program(&Mutations::none()), Isa::RiscV),
            (minimalcaps::program::program(&Mutations::none()), Isa::MinimalCaps),
        ] {
            let r = lemmas(&p, isa, 2, 50);
            assert!(r.ok(), "{:?} {:?}", r.violations, r.undersampled);
        }
    }

    #[test]
    fn a_wrong_contract_is_caught() {
        // Claim that write_gpr leaves the register file unchanged.
        let mut p = riscv::program::program(&Mutations::none());
        let c = p.contracts.get_mut(&sym("write_gpr")).unwrap();
        c.post = crate::seplogic::build::pred("GPRs", vec![crate::term::var("ws")]);
        let mut s = Sampler::new(&p, Isa::RiscV, 5);
        let mut rep = SoundnessReport::default();
        check_contract(&mut s, "write_gpr", 50, &mut rep);
        assert!(!rep.violations.is_empty());
    }
}
