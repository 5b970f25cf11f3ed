use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/femto").join(name);
    p.to_str().unwrap().to_string()
}

fn run(args: &[&str], mutation: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_contractile"));
    cmd.args(args).env_remove("CONTRACTILE_MEMSIZE").env_remove("CONTRACTILE_MUTATION");
    if let Some(m) = mutation {
        cmd.env("CONTRACTILE_MUTATION", m);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_bundles() {
    let o = run(&["verify", "--isa", "minimalcaps"], None);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("exec_store"));
    let o = run(&["verify", "--isa", "riscv-pmp", "--function", "fdeStep"], None);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&run(&["verify", "--isa", "nope"], None)), 2);
    assert_eq!(code(&run(&["verify", "--isa", "riscv-pmp", "--function", "nope"], None)), 2);
}

#[test]
fn verify_rows_are_alphabetical_and_json_is_written() {
    let dir = std::env::temp_dir().join(format!("contractile-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let o = run(&["verify", "--isa", "riscv-pmp", "--json", path.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let rows: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r["function"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for r in &rows {
        let mut keys: Vec<&String> = r.as_object().unwrap().keys().collect();
        keys.sort();
        assert_eq!(keys, ["chunks_matched", "function", "millis", "paths", "residual", "status"]);
        assert_eq!(r["status"], "verified");
    }
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn mutated_bundle_fails_verification() {
    let o = run(&["verify", "--isa", "minimalcaps"], Some("no-write-allowed-assert"));
    assert_eq!(code(&o), 1);
    assert_eq!(code(&run(&["verify", "--isa", "minimalcaps"], Some("bogus"))), 2);
}

#[test]
fn run_femtokernel_image() {
    let img = fixture("image.txt");
    let o = run(&["run", "--isa", "riscv-pmp", "--image", &img, "--fuel", "20"], None);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("pc=0x58 priv=User"), "{}", stdout(&o));
    let o = run(&["run", "--isa", "riscv-pmp", "--image", &img, "--fuel", "0", "--dump-range", "0x54", "0x58"], None);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("out of fuel"));
    assert!(stdout(&o).contains("0x00000054 0x0000002a"));
    let bad = fixture("init.contract");
    assert_eq!(code(&run(&["run", "--isa", "riscv-pmp", "--image", &bad, "--fuel", "5"], None)), 2);
}

#[test]
fn run_reports_failure() {
    let dir = std::env::temp_dir().join(format!("contractile-run-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    // Word 0 decodes to the fail instruction; word 11 is halt.
    let fail = dir.join("fail.img");
    std::fs::write(&fail, "0x0 int 0\n").unwrap();
    let halt = dir.join("halt.img");
    std::fs::write(&halt, "0x0 int 11\n").unwrap();
    let go = |p: &PathBuf| run(&["run", "--isa", "minimalcaps", "--image", p.to_str().unwrap(), "--fuel", "10"], None);
    let (f, h) = (go(&fail), go(&halt));
    std::fs::remove_dir_all(dir).ok();
    assert_eq!(code(&f), 1);
    assert!(stdout(&f).contains("outcome=failure"), "{}", stdout(&f));
    assert_eq!(code(&h), 0);
    assert!(!stdout(&h).contains("failure"), "{}", stdout(&h));
}

#[test]
fn verify_block_fixtures() {
    let vb = |b: &str, c: &str| {
        code(&run(&["verify-block", "--isa", "riscv-pmp", "--block", &fixture(b), "--contract", &fixture(c)], None))
    };
    assert_eq!(vb("init.block", "init.contract"), 0);
    assert_eq!(vb("handler.block", "handler.contract"), 0);
    assert_eq!(vb("init_entry0_rwx.block", "init.contract"), 1);
    assert_eq!(vb("init.block", "image.txt"), 2);
    assert_eq!(vb("init.contract", "init.contract"), 2);
}

#[test]
fn fuzz_integrity_exit_codes() {
    let args = ["fuzz-integrity", "--seed", "1", "--trials", "20", "--fuel", "2000"];
    assert_eq!(code(&run(&args, None)), 0);
    let o = run(&["fuzz-integrity", "--seed", "1", "--trials", "50", "--fuel", "2000"], Some("pmp-always-allow"));
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("reproduce: --seed 1"));
    assert!(stdout(&o).contains("minimized user program"));
    assert_eq!(code(&run(&["fuzz-integrity", "--seed", "1", "--trials", "0", "--fuel", "10"], None)), 2);
}

#[test]
fn fuzz_is_deterministic() {
    let args = ["fuzz-integrity", "--seed", "9", "--trials", "30", "--fuel", "1000"];
    let a = run(&args, Some("pmp-always-allow"));
    let b = run(&args, Some("pmp-always-allow"));
    assert_eq!(a.stdout, b.stdout);
}
