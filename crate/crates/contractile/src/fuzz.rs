//! Randomized end-to-end checks: femtokernel memory integrity on RISC-V and
//! capability confinement on MinimalCaps.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ast::Program;
use crate::femto::{ADV, DATA, DATA_ADDR};
use crate::machine::{load_image, step, Isa, MachineState, Memory};
use crate::minimalcaps::instr::{encode_mc, McInstr, McReg, IMM_MAX, IMM_MIN};
use crate::minimalcaps::types::{Capability, Permission, Word};
use crate::riscv::instr::random_instr;
use crate::riscv::{encode_rv32, RvInstr};
use crate::value::Value;

/// Per-trial seed, so a failing trial can be replayed on its own.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    seed ^ trial.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Adversary words: a quarter raw 32-bit noise, a quarter loads and stores
/// aimed at kernel memory, the rest random well-formed instructions.
pub fn adversary_words(rng: &mut ChaCha8Rng, k: usize) -> Vec<u32> {
    (0..k)
        .map(|_| match rng.gen_range(0..4) {
            0 => rng.gen(),
            1 => {
                let imm = 4 * rng.gen_range(0..(ADV / 4)) as i32;
                let r = rng.gen_range(0..32u8);
                if rng.gen() {
                    encode_rv32(&RvInstr::Sw { rs1: 0, rs2: r, imm })
                } else {
                    encode_rv32(&RvInstr::Lw { rd: r, rs1: 0, imm })
                }
            }
            _ => encode_rv32(&random_instr(rng)),
        })
        .collect()
}

pub fn femto_machine(mem: u32, kernel_image: &str, adv: &[u32]) -> Result<MachineState, String> {
    let st = MachineState::new(Isa::RiscV, mem as u64);
    let mut st = load_image(&st, kernel_image).map_err(|e| e.to_string())?;
    for (i, w) in adv.iter().enumerate() {
        let a = ADV as u64 + 4 * i as u64;
        if a + 4 > mem as u64 {
            break;
        }
        st.write_word_le(a, *w)?;
    }
    st.log = Some(Vec::new());
    Ok(st)
}

/// Runs one trial. `Err` describes the first integrity violation.
pub fn integrity_trial(prog: &Program, mem: u32, kernel: &[(u32, u32)], image: &str, adv: &[u32], fuel: u64) -> Result<(), String> {
    let mut st = femto_machine(mem, image, adv)?;
    for n in 0..fuel {
        match step(prog, &mut st) {
            Ok(true) => {}
            Ok(false) => break,
            Err(m) => return Err(format!("step {n}: machine failure: {m}")),
        }
        let log = st.log.as_mut().expect("logging on");
        if let Some(w) = log.iter().find(|a| a.write && a.addr < ADV as u64) {
            return Err(format!("step {n}: write to kernel memory at {:#x}", w.addr));
        }
        log.clear();
    }
    for &(a, w) in kernel {
        if st.peek(a as u64) != Some(Value::Bits(w)) {
            return Err(format!("kernel word at {a:#x} changed"));
        }
    }
    match st.peek(DATA_ADDR as u64) {
        Some(Value::Bits(DATA)) => Ok(()),
        v => Err(format!("data word is {v:?}")),
    }
}

/// Greedy shrinking: drop words, then clear bits, while the trial still
/// fails.
pub fn minimize(fails: &dyn Fn(&[u32]) -> bool, words: &[u32]) -> Vec<u32> {
    let mut cur = words.to_vec();
    let mut i = 0;
    while i < cur.len() {
        let mut cand = cur.clone();
        cand.remove(i);
        if fails(&cand) {
            cur = cand;
        } else {
            i += 1;
        }
    }
    for i in 0..cur.len() {
        for b in 0..32 {
            if cur[i] & (1 << b) == 0 {
                continue;
            }
            let mut cand = cur.clone();
            cand[i] &= !(1 << b);
            if fails(&cand) {
                cur = cand;
            }
        }
    }
    cur
}

#[derive(Clone, Debug)]
pub struct Counterexample {
    pub trial: u64,
    pub trial_seed: u64,
    pub reason: String,
    pub words: Vec<u32>,
    pub minimized: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct IntegrityReport {
    pub trials: u64,
    pub failures: u64,
    pub first: Option<Counterexample>,
}

pub struct IntegrityConfig {
    pub seed: u64,
    pub trials: u64,
    pub fuel: u64,
    pub adv_words: usize,
    pub mem: u32,
}

/// Runs the kernel image with random user code at adv and checks that
/// kernel memory, including the private word, is never written.
/// Fails if the kernel image does not fit below adv.
pub fn fuzz_integrity(prog: &Program, image: &str, cfg: &IntegrityConfig) -> Result<IntegrityReport, String> {
    let kernel = kernel_words_of(image)?;
    let mut report = IntegrityReport { trials: cfg.trials, failures: 0, first: None };
    for trial in 0..cfg.trials {
        let ts = trial_seed(cfg.seed, trial);
        let adv = adversary_words(&mut ChaCha8Rng::seed_from_u64(ts), cfg.adv_words);
        let Err(reason) = integrity_trial(prog, cfg.mem, &kernel, image, &adv, cfg.fuel) else { continue };
        report.failures += 1;
        if report.first.is_none() {
            let fails = |ws: &[u32]| integrity_trial(prog, cfg.mem, &kernel, image, ws, cfg.fuel).is_err();
            let minimized = minimize(&fails, &adv);
            report.first = Some(Counterexample { trial, trial_seed: ts, reason, words: adv, minimized });
        }
    }
    Ok(report)
}

/// `(address, word)` pairs of an image below adv.
fn kernel_words_of(image: &str) -> Result<Vec<(u32, u32)>, String> {
    let st = MachineState::new(Isa::RiscV, ADV as u64);
    let st = load_image(&st, image).map_err(|e| e.to_string())?;
    Ok((0..ADV / 4)
        .map(|i| match st.peek(4 * i as u64) {
            Some(Value::Bits(w)) => (4 * i, w),
            _ => (4 * i, 0),
        })
        .collect())
}

// ---- MinimalCaps confinement ----

pub const CONF_MEM: usize = 64;
pub const CONF_CODE: usize = 16;

fn random_reg(rng: &mut ChaCha8Rng) -> McReg {
    McReg::ALL[rng.gen_range(0..4)]
}

fn random_mc_instr(rng: &mut ChaCha8Rng) -> McInstr {
    use McInstr::*;
    let imm = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.8) {
            rng.gen_range(-2..3)
        } else {
            rng.gen_range(IMM_MIN..=IMM_MAX)
        }
    };
    // Stores and loads are weighted up; most random programs fault early.
    match rng.gen_range(0..16) {
        0 | 12 | 13 | 14 => Store(random_reg(rng), random_reg(rng), imm(rng)),
        15 => Load(random_reg(rng), random_reg(rng), imm(rng)),
        1 => Load(random_reg(rng), random_reg(rng), imm(rng)),
        2 => Jalr(random_reg(rng), random_reg(rng)),
        3 => Move(random_reg(rng), random_reg(rng)),
        4 => Lea(random_reg(rng), imm(rng)),
        5 => Restrict(random_reg(rng), Permission::ALL[rng.gen_range(0..4)]),
        6 => Subseg(random_reg(rng), random_reg(rng), random_reg(rng)),
        7 => Add(random_reg(rng), random_reg(rng), random_reg(rng)),
        8 => AddI(random_reg(rng), random_reg(rng), imm(rng)),
        9 => Bnez(random_reg(rng), imm(rng)),
        10 => Halt,
        _ => Store(random_reg(rng), random_reg(rng), 0),
    }
}

fn random_cap(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Capability {
    let b = rng.gen_range(lo..hi);
    let e = rng.gen_range(b..hi);
    let perm = match rng.gen_range(0..10) {
        0 => Permission::O,
        1 | 2 => Permission::R,
        3 | 4 => Permission::E,
        _ => Permission::RW,
    };
    let cursor = if rng.gen_bool(0.9) { rng.gen_range(b..=e) } else { rng.gen_range(b - 1..=e + 1) };
    Capability::new(perm, b, e, cursor)
}

fn random_word(rng: &mut ChaCha8Rng) -> Word {
    match rng.gen_range(0..3) {
        0 => Word::Cap(random_cap(rng, CONF_CODE as i64, CONF_MEM as i64)),
        1 => Word::Int(rng.gen_range(-4..CONF_MEM as i64)),
        _ => Word::Int(encode_mc(&random_mc_instr(rng))),
    }
}

/// A random MinimalCaps state: code in [0,16), data above, capabilities in
/// registers and memory.
pub fn confinement_state(rng: &mut ChaCha8Rng) -> MachineState {
    let mut st = MachineState::new(Isa::MinimalCaps, CONF_MEM as u64);
    for a in 0..CONF_CODE {
        st.store_word(a as i64, Word::Int(encode_mc(&random_mc_instr(rng))).to_value())
            .expect("in range");
    }
    for a in CONF_CODE..CONF_MEM {
        let w = if rng.gen_bool(0.5) { Word::Int(0) } else { random_word(rng) };
        st.store_word(a as i64, w.to_value()).expect("in range");
    }
    let pc_perm = if rng.gen() { Permission::R } else { Permission::RW };
    st.set_reg_str("pc", Word::Cap(Capability::new(pc_perm, 0, CONF_CODE as i64 - 1, 0)).to_value());
    for r in McReg::ALL {
        let w = if rng.gen_bool(0.6) {
            Word::Cap(random_cap(rng, CONF_CODE as i64, CONF_MEM as i64))
        } else {
            random_word(rng)
        };
        st.set_reg_str(r.name(), w.to_value());
    }
    st.log = None;
    st
}

/// Addresses reachable from the registers: capability ranges, closed over
/// capabilities stored inside them. `O` capabilities grant nothing.
pub fn reachable(st: &MachineState) -> BTreeSet<i64> {
    let mut seen = BTreeSet::new();
    let mut todo: Vec<Capability> = st
        .regs
        .iter()
        .filter_map(|(_, v)| Capability::from_value(v))
        .collect();
    while let Some(c) = todo.pop() {
        if c.perm == Permission::O {
            continue;
        }
        for a in c.begin.max(0)..=c.end.min(CONF_MEM as i64 - 1) {
            if seen.insert(a) {
                if let Some(cap) = st.peek(a as u64).as_ref().and_then(Capability::from_value) {
                    todo.push(cap);
                }
            }
        }
    }
    seen
}

fn words_of(st: &MachineState) -> Vec<Value> {
    match &st.mem {
        Memory::Words(ws) => ws.clone(),
        Memory::Bytes(_) => Vec::new(),
    }
}

#[derive(Clone, Debug, Default)]
pub struct ConfinementReport {
    pub trials: u64,
    pub violations: Vec<(u64, String)>,
    /// Trials in which some memory word changed.
    pub trials_with_writes: u64,
}

pub fn fuzz_confinement(prog: &Program, seed: u64, trials: u64, fuel: u64) -> ConfinementReport {
    let mut rep = ConfinementReport { trials, ..Default::default() };
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, trial));
        let mut st = confinement_state(&mut rng);
        let allowed = reachable(&st);
        let before = words_of(&st);
        for _ in 0..fuel {
            match step(prog, &mut st) {
                Ok(true) => {}
                _ => break,
            }
        }
        let after = words_of(&st);
        let changed: Vec<usize> = (0..before.len()).filter(|&i| before[i] != after[i]).collect();
        if !changed.is_empty() {
            rep.trials_with_writes += 1;
        }
        if let Some(a) = changed.iter().find(|&&a| !allowed.contains(&(a as i64))) {
            rep.violations.push((trial, format!("address {a} changed outside the reachable set")));
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::femto::{image_text, kernel_words};
    use crate::minimalcaps;
    use crate::mutation::Mutations;
    use crate::riscv::program::program;

    fn cfg(trials: u64) -> IntegrityConfig {
        IntegrityConfig { seed: 3, trials, fuel: 2000, adv_words: 16, mem: 4096 }
    }

    #[test]
    fn kernel_survives_a_few_trials() {
        let prog = program(&Mutations::none());
        let r = fuzz_integrity(&prog, &image_text(&Mutations::none(), 4096), &cfg(20)).unwrap();
        assert_eq!(r.failures, 0, "{:?}", r.first);
    }

    #[test]
    fn open_pmp_is_caught_and_minimized() {
        let m = Mutations { pmp_always_allow: true, ..Mutations::none() };
        let prog = program(&m);
        let r = fuzz_integrity(&prog, &image_text(&Mutations::none(), 4096), &cfg(40)).unwrap();
        assert!(r.failures > 0);
        let cx = r.first.unwrap();
        assert!(cx.minimized.len() <= cx.words.len());
        // The minimized program still fails on its own.
        let kernel = kernel_words(&Mutations::none(), 4096);
        let image = image_text(&Mutations::none(), 4096);
        assert!(integrity_trial(&prog, 4096, &kernel, &image, &cx.minimized, 2000).is_err());
    }

    #[test]
    fn minimize_drops_irrelevant_words() {
        let fails = |ws: &[u32]| ws.iter().any(|w| w & 0x10 != 0);
        assert_eq!(minimize(&fails, &[1, 0x30, 7]), vec![0x10]);
    }

    #[test]
    fn reachable_closes_over_memory() {
        let mut st = MachineState::new(Isa::MinimalCaps, CONF_MEM as u64);
        for r in McReg::ALL {
            st.set_reg_str(r.name(), Word::Int(0).to_value());
        }
        st.set_reg_str("pc", Word::Cap(Capability::new(Permission::R, 0, 1, 0)).to_value());
        st.store_word(1, Word::Cap(Capability::new(Permission::RW, 40, 41, 40)).to_value()).unwrap();
        st.store_word(41, Word::Cap(Capability::new(Permission::O, 50, 60, 50)).to_value()).unwrap();
        assert_eq!(reachable(&st), [0, 1, 40, 41].into_iter().collect());
    }

    #[test]
    fn random_programs_stay_confined() {
        let prog = minimalcaps::program::program(&Mutations::none());
        let r = fuzz_confinement(&prog, 11, 60, 200);
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert!(r.trials_with_writes * 10 >= r.trials, "{}", r.trials_with_writes);
    }
}
