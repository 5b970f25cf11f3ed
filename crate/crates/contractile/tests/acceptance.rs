//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

mod common;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use contractile::block::verify_block;
use contractile::femto::{self, femto_assets};
use contractile::fuzz::{fuzz_confinement, fuzz_integrity, IntegrityConfig};
use contractile::machine::{mem_size, Isa};
use contractile::minimalcaps::{self, decode_mc, encode_mc};
use contractile::mutation::Mutations;
use contractile::riscv::instr::random_instr;
use contractile::riscv::program::{program, program_with, MemMode};
use contractile::riscv::{decode_rv32, encode_rv32};
use contractile::soundness::differential;
use contractile::symexec::{verify_all, verify_contract, Status, VerifyResult};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn within(limit: Duration, t: Instant, detail: String) -> Outcome {
    let took = t.elapsed();
    if took <= limit {
        Ok(format!("{detail}; {:.1}s", took.as_secs_f64()))
    } else {
        Err(format!("{detail}; took {:.1}s, limit {}s", took.as_secs_f64(), limit.as_secs()))
    }
}

fn pmp_oracle_grid() -> Outcome {
    let t = Instant::now();
    let tops: Vec<u32> = (0..=64).collect();
    let (n, bad) = common::pmp_grid(&tops);
    if let Some(m) = bad {
        return Err(format!("mismatch after {n} cases: {m}"));
    }
    within(Duration::from_secs(60), t, format!("{n} cases, 0 mismatches"))
}

fn femto_integrity() -> Outcome {
    let t = Instant::now();
    let mem = mem_size(Isa::RiscV) as u32;
    let run = |m: &Mutations| {
        let cfg = IntegrityConfig { seed: 1, trials: 1000, fuel: 10_000, adv_words: 16, mem };
        fuzz_integrity(&program(m), &femto::image_text(m, mem), &cfg)
    };
    let rep = run(&Mutations::none())?;
    if rep.failures > 0 {
        let cx = rep.first.unwrap();
        return Err(format!("{} of 1000 trials failed; first: trial {} {}", rep.failures, cx.trial, cx.reason));
    }
    let ok = within(Duration::from_secs(120), t, "1000 trials x fuel 10^4 intact".into())?;
    let control = run(&Mutations { pmp_always_allow: true, ..Mutations::none() })?;
    if control.failures * 100 < control.trials {
        return Err(format!("always-allow control failed only {}/{} trials", control.failures, control.trials));
    }
    Ok(format!("{ok}; always-allow control fails {}/{}", control.failures, control.trials))
}

fn unverified(rs: &[VerifyResult]) -> Vec<String> {
    rs.iter().filter(|r| r.status != Status::Verified).map(|r| format!("{} {}", r.function, r.status.label())).collect()
}

fn bundle_verification() -> Outcome {
    let t = Instant::now();
    let rv_prog = program(&Mutations::none());
    let mc = verify_all(&minimalcaps::program::program(&Mutations::none()));
    let rv = verify_all(&rv_prog);
    for (rs, f) in [(&mc, "exec_store"), (&rv, "fdeStep")] {
        if !rs.iter().any(|r| r.function == f) {
            return Err(format!("{f} has no contract"));
        }
    }
    // The memory primitives are foreign: their contracts are assumed at each
    // call inside fdeStep rather than verified on their own.
    for f in ["read_ram", "write_ram"] {
        if !rv_prog.contracts.keys().any(|k| k.as_str() == f) {
            return Err(format!("{f} has no contract"));
        }
    }
    let bad: Vec<String> = unverified(&mc).into_iter().chain(unverified(&rv)).collect();
    if !bad.is_empty() {
        return Err(bad.join(", "));
    }
    within(Duration::from_secs(60), t, format!("{} MinimalCaps + {} RISC-V contracts verified", mc.len(), rv.len()))
}

fn mutation_suite() -> Outcome {
    let none = Mutations::none();
    let mc_store = |m: &Mutations| verify_contract(&minimalcaps::program::program(m), "exec_store").status.label();
    let rv_any = |m: &Mutations| {
        let bad = unverified(&verify_all(&program(m)));
        if bad.is_empty() { "all verified".to_string() } else { bad.join(", ") }
    };
    let mut caught = Vec::new();
    let mut missed = Vec::new();
    let mut record = |name: &str, flipped: bool, how: String| {
        if flipped { caught.push(format!("{name}: {how}")) } else { missed.push(format!("{name}: {how}")) }
    };
    for (name, m) in [
        ("no-write-allowed-assert", Mutations { no_write_allowed_assert: true, ..none }),
        ("no-move-cursor", Mutations { no_move_cursor: true, ..none }),
    ] {
        let s = mc_store(&m);
        record(name, s != "verified", format!("exec_store {s}"));
    }
    for (name, m) in [
        ("reverse-pmp-priority", Mutations { reverse_pmp_priority: true, ..none }),
        ("skip-lock-check", Mutations { skip_lock_check: true, ..none }),
        ("pmp-always-allow", Mutations { pmp_always_allow: true, ..none }),
    ] {
        let s = rv_any(&m);
        record(name, s != "all verified", s);
    }
    let rwx = Mutations { femto_entry0_rwx: true, ..none };
    let good = femto_assets(&none);
    let r = verify_block(&program_with(&none, MemMode::Owned), &femto_assets(&rwx).init, &good.init_contract);
    record("femto-entry0-rwx", r.status != Status::Verified, format!("init block {}", r.status.label()));
    if missed.is_empty() {
        Ok(caught.join("; "))
    } else {
        Err(format!("not caught: {}", missed.join("; ")))
    }
}

fn femto_blocks() -> Outcome {
    let t = Instant::now();
    let a = femto_assets(&Mutations::none());
    let prog = program_with(&Mutations::none(), MemMode::Owned);
    let init = verify_block(&prog, &a.init, &a.init_contract);
    let handler = verify_block(&prog, &a.handler, &a.handler_contract);
    let bad = unverified(&[init, handler]);
    if !bad.is_empty() {
        return Err(bad.join(", "));
    }
    within(Duration::from_secs(10), t, "init and handler verified".into())
}

fn differential_soundness() -> Outcome {
    let mut notes = Vec::new();
    let mut errs = Vec::new();
    for (isa, prog) in [
        (Isa::MinimalCaps, minimalcaps::program::program(&Mutations::none())),
        (Isa::RiscV, program(&Mutations::none())),
    ] {
        let rep = differential(&prog, isa, 7, 100);
        if !rep.violations.is_empty() {
            errs.push(format!("{}: {} violations, first {}", isa.name(), rep.violations.len(), rep.violations[0]));
        }
        if !rep.undersampled.is_empty() {
            errs.push(format!("{}: undersampled {:?}", isa.name(), rep.undersampled));
        }
        notes.push(format!("{} {} runs", isa.name(), rep.checked));
    }
    if errs.is_empty() {
        Ok(format!("{}, 0 violations", notes.join(", ")))
    } else {
        Err(errs.join("; "))
    }
}

fn confinement() -> Outcome {
    let rep = fuzz_confinement(&minimalcaps::program::program(&Mutations::none()), 3, 500, 1000);
    match rep.violations.first() {
        Some((trial, m)) => Err(format!("{} violations, first in trial {trial}: {m}", rep.violations.len())),
        None => Ok(format!("{} programs, {} wrote memory, 0 violations", rep.trials, rep.trials_with_writes)),
    }
}

fn decoder_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100_000 {
        let i = random_instr(&mut rng);
        if decode_rv32(encode_rv32(&i)) != i {
            return Err(format!("RV32I {i:?} -> {:#010x}", encode_rv32(&i)));
        }
        let j = common::random_mc(&mut rng);
        if decode_mc(encode_mc(&j)) != j {
            return Err(format!("MinimalCaps {j:?} -> {}", encode_mc(&j)));
        }
    }
    Ok("10^5 RV32I and 10^5 MinimalCaps instructions".into())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("pmp oracle equivalence", pmp_oracle_grid),
        ("femtokernel integrity", femto_integrity),
        ("bundle verification", bundle_verification),
        ("mutation suite", mutation_suite),
        ("femtokernel blocks", femto_blocks),
        ("differential soundness", differential_soundness),
        ("capability confinement", confinement),
        ("decoder round-trips", decoder_round_trips),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(d) => println!("PASS {} {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {} {name}: {d}", i + 1)
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
