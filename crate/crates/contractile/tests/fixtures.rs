//! The files under `fixtures/femto` are generated; this keeps them in sync.
//! Run with `CONTRACTILE_BLESS=1` to rewrite them.

use std::path::PathBuf;

use contractile::block::AsmBlock;
use contractile::femto::fixture_files;
use contractile::machine::{load_image, Isa, MachineState};
use contractile::sexpr;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/femto")
}

#[test]
fn fixtures_match_generated_assets() {
    let bless = std::env::var_os("CONTRACTILE_BLESS").is_some();
    for (name, text) in fixture_files(4096) {
        let path = dir().join(name);
        if bless {
            std::fs::create_dir_all(dir()).unwrap();
            std::fs::write(&path, &text).unwrap();
        }
        let on_disk = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(on_disk, text, "{name} is stale");
    }
}

#[test]
fn fixtures_parse() {
    for (name, text) in fixture_files(4096) {
        match name.rsplit('.').next().unwrap() {
            "block" => drop(AsmBlock::parse(&text).unwrap()),
            "contract" => drop(sexpr::contract(&text).unwrap()),
            _ => drop(load_image(&MachineState::new(Isa::RiscV, 4096), &text).unwrap()),
        }
    }
}
