use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use contractile::ast::Program;
use contractile::block::{verify_block, AsmBlock};
use contractile::femto;
use contractile::fuzz::{fuzz_integrity, IntegrityConfig};
use contractile::machine::{load_image_file, mem_size, run_fde_cycle, Isa, MachineState, Outcome};
use contractile::minimalcaps;
use contractile::mutation::{Mutations, NAMES};
use contractile::riscv::decode_rv32;
use contractile::riscv::program::{program_with, MemMode};
use contractile::sexpr;
use contractile::value::Value;
use contractile::symexec::{report, verify_all, verify_contract, ReportRow, Status};

/// Mutations are picked up from the environment so the flag set stays fixed.
const MUTATION_ENV: &str = "CONTRACTILE_MUTATION";

const OK: u8 = 0;
const FAIL: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "contractile", version, about = "Contract verifier and ISA workbench for MinimalCaps and RV32I with PMP")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify the function contracts of an ISA bundle.
    Verify {
        #[arg(long)]
        isa: String,
        #[arg(long)]
        function: Option<String>,
        /// Write the report as JSON to this path.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a memory image through the fetch-decode-execute loop.
    Run {
        #[arg(long)]
        isa: String,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        fuel: u64,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], value_parser = parse_num)]
        dump_range: Option<Vec<u64>>,
    },
    /// Run the femtokernel against random user code and check kernel integrity.
    FuzzIntegrity {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        fuel: u64,
        #[arg(long, default_value_t = 16)]
        adv_words: usize,
    },
    /// Verify an assembly block against a contract.
    VerifyBlock {
        #[arg(long)]
        isa: String,
        #[arg(long)]
        block: PathBuf,
        #[arg(long)]
        contract: PathBuf,
    },
}

fn parse_num(s: &str) -> Result<u64, String> {
    match s.strip_prefix("0x") {
        Some(h) => u64::from_str_radix(h, 16),
        None => s.parse(),
    }
    .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let m = match mutations() {
        Ok(m) => m,
        Err(e) => return ExitCode::from(usage(&e)),
    };
    let code = match cli.cmd {
        Cmd::Verify { isa, function, json } => cmd_verify(&m, &isa, function.as_deref(), json),
        Cmd::Run { isa, image, fuel, dump_range } => cmd_run(&m, &isa, &image, fuel, dump_range),
        Cmd::FuzzIntegrity { seed, trials, fuel, adv_words } => cmd_fuzz(&m, seed, trials, fuel, adv_words),
        Cmd::VerifyBlock { isa, block, contract } => cmd_verify_block(&m, &isa, &block, &contract),
    };
    ExitCode::from(code)
}

fn usage(msg: &str) -> u8 {
    eprintln!("error: {msg}");
    USAGE
}

/// Comma-separated mutation names from the environment.
fn mutations() -> Result<Mutations, String> {
    let Ok(spec) = std::env::var(MUTATION_ENV) else { return Ok(Mutations::none()) };
    let mut m = Mutations::none();
    for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let one = Mutations::named(name)
            .ok_or_else(|| format!("unknown mutation `{name}` in {MUTATION_ENV}; expected one of {}", NAMES.join(", ")))?;
        m = Mutations {
            no_write_allowed_assert: m.no_write_allowed_assert | one.no_write_allowed_assert,
            no_move_cursor: m.no_move_cursor | one.no_move_cursor,
            reverse_pmp_priority: m.reverse_pmp_priority | one.reverse_pmp_priority,
            skip_lock_check: m.skip_lock_check | one.skip_lock_check,
            femto_entry0_rwx: m.femto_entry0_rwx | one.femto_entry0_rwx,
            pmp_always_allow: m.pmp_always_allow | one.pmp_always_allow,
        };
    }
    Ok(m)
}

fn isa_arg(s: &str) -> Result<Isa, u8> {
    Isa::parse(s).ok_or_else(|| usage(&format!("unknown ISA `{s}`; expected minimalcaps or riscv-pmp")))
}

fn bundle(m: &Mutations, isa: Isa) -> Program {
    match isa {
        Isa::MinimalCaps => minimalcaps::program::program(m),
        Isa::RiscV => program_with(m, MemMode::Universal),
    }
}

fn cmd_verify(m: &Mutations, isa: &str, function: Option<&str>, json: Option<PathBuf>) -> u8 {
    let isa = match isa_arg(isa) {
        Ok(i) => i,
        Err(c) => return c,
    };
    let prog = bundle(m, isa);
    let mut results = match function {
        Some(f) => {
            if !prog.contracts.keys().any(|k| k.as_str() == f) {
                return usage(&format!("no contract for `{f}` in {}", isa.name()));
            }
            vec![verify_contract(&prog, f)]
        }
        None => verify_all(&prog),
    };
    results.sort_by(|a, b| a.function.cmp(&b.function));
    let rows = report(&results);
    print_table(&rows);
    if let Some(path) = json {
        let text = serde_json::to_string_pretty(&rows).expect("report rows serialize");
        if let Err(e) = std::fs::write(&path, text + "\n") {
            return usage(&format!("cannot write {}: {e}", path.display()));
        }
    }
    if results.iter().all(|r| r.status == Status::Verified) {
        OK
    } else {
        FAIL
    }
}

fn print_table(rows: &[ReportRow]) {
    let w = rows.iter().map(|r| r.function.len()).max().unwrap_or(8).max(8);
    println!("{:<w$}  {:<8}  {:>5}  {:>6}  {:>6}", "function", "status", "paths", "chunks", "ms");
    for r in rows {
        println!("{:<w$}  {:<8}  {:>5}  {:>6}  {:>6}", r.function, r.status, r.paths, r.chunks_matched, r.millis);
        if let Some(res) = &r.residual {
            println!("  {res}");
        }
    }
}

fn cmd_run(m: &Mutations, isa: &str, image: &std::path::Path, fuel: u64, dump: Option<Vec<u64>>) -> u8 {
    let isa = match isa_arg(isa) {
        Ok(i) => i,
        Err(c) => return c,
    };
    let init = MachineState::new(isa, mem_size(isa));
    let st = match load_image_file(&init, image) {
        Ok(s) => s,
        Err(e) => return usage(&format!("{}: {e}", image.display())),
    };
    let prog = bundle(m, isa);
    let (end, outcome) = run_fde_cycle(&prog, &st, fuel);
    let show = |r: &str| end.reg_str(r).map_or("-".to_string(), |v| v.to_string());
    let pc = show("pc");
    let privilege = match isa {
        Isa::RiscV => show("cur_privilege").trim_start_matches('\'').to_string(),
        Isa::MinimalCaps => "-".to_string(),
    };
    println!("pc={pc} priv={privilege} outcome={outcome}");
    if let Some(range) = dump {
        let (lo, hi) = (range[0], range[1]);
        let stride = if isa == Isa::RiscV { 4 } else { 1 };
        let mut a = lo - lo % stride;
        while a < hi {
            match end.peek(a) {
                Some(Value::Bits(w)) => println!("{a:#010x} {w:#010x}"),
                Some(v) => println!("{a:#010x} {v}"),
                None => break,
            }
            a += stride;
        }
    }
    match outcome {
        Outcome::Failure(_) => FAIL,
        Outcome::Value(_) | Outcome::OutOfFuel => OK,
    }
}

fn cmd_fuzz(m: &Mutations, seed: u64, trials: u64, fuel: u64, adv_words: usize) -> u8 {
    if trials == 0 || fuel == 0 {
        return usage("--trials and --fuel must be at least 1");
    }
    let mem = mem_size(Isa::RiscV) as u32;
    let prog = program_with(m, MemMode::Universal);
    let image = femto::image_text(m, mem);
    let cfg = IntegrityConfig { seed, trials, fuel, adv_words, mem };
    let rep = match fuzz_integrity(&prog, &image, &cfg) {
        Ok(r) => r,
        Err(e) => return usage(&e),
    };
    println!("trials={} failures={}", rep.trials, rep.failures);
    let Some(cx) = rep.first else { return OK };
    println!("violation in trial {}: {}", cx.trial, cx.reason);
    println!("reproduce: --seed {seed} --trials {} --fuel {fuel} --adv-words {adv_words}", cx.trial + 1);
    println!("trial seed: {:#x}", cx.trial_seed);
    println!("minimized user program at {:#x}:", femto::ADV);
    for (i, w) in cx.minimized.iter().enumerate() {
        println!("{:#010x} {w:#010x}  # {:?}", femto::ADV + 4 * i as u32, decode_rv32(*w));
    }
    FAIL
}

fn cmd_verify_block(m: &Mutations, isa: &str, block: &std::path::Path, contract: &std::path::Path) -> u8 {
    match isa_arg(isa) {
        Ok(Isa::RiscV) => {}
        Ok(other) => return usage(&format!("blocks are only supported for riscv-pmp, not {}", other.name())),
        Err(c) => return c,
    }
    let read = |p: &std::path::Path| std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let parsed = read(block)
        .and_then(|t| AsmBlock::parse(&t).map_err(|e| format!("{}: {e}", block.display())))
        .and_then(|b| {
            let c = read(contract)?;
            let c = sexpr::contract(&c).map_err(|e| format!("{}: {e}", contract.display()))?;
            Ok((b, c))
        });
    let (b, c) = match parsed {
        Ok(x) => x,
        Err(e) => return usage(&e),
    };
    let prog = program_with(m, MemMode::Owned);
    let res = verify_block(&prog, &b, &c);
    print_table(&report(std::slice::from_ref(&res)));
    if res.status == Status::Verified {
        OK
    } else {
        FAIL
    }
}
