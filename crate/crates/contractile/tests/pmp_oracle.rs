mod common;

use common::{implementation, pmp_oracle, ACCESSES};
use contractile::riscv::AccessType;
use proptest::prelude::*;

#[test]
fn oracle_agrees_with_examples() {
    let femto = ([0x00, 0x0f], [88, 4096]);
    assert!(!pmp_oracle(84, 4, AccessType::Write, false, femto.0, femto.1));
    assert!(pmp_oracle(84, 4, AccessType::Write, true, femto.0, femto.1));
    assert!(pmp_oracle(100, 4, AccessType::Execute, false, femto.0, femto.1));
    assert!(!pmp_oracle(100, 4, AccessType::Read, false, [0, 0], [0, 0]));
    // Straddling 88 matches neither entry.
    assert!(!pmp_oracle(86, 4, AccessType::Read, false, [0x0f, 0x0f], [88, 4096]));
}

#[test]
fn oracle_locked_entry_binds_machine_mode() {
    // 0x88: locked TOR with no permissions. 0x98 has A=NAPOT and reads as OFF.
    assert!(!pmp_oracle(0, 4, AccessType::Read, true, [0x88, 0], [16, 0]));
    assert!(pmp_oracle(0, 4, AccessType::Read, true, [0x08, 0], [16, 0]));
    assert!(pmp_oracle(0, 4, AccessType::Read, true, [0x98, 0], [16, 0]));
    assert!(pmp_oracle(20, 4, AccessType::ReadWrite, false, [0x08, 0x8b], [16, 32]));
    assert!(!pmp_oracle(20, 4, AccessType::ReadWrite, false, [0x08, 0x8e], [16, 32]));
}

#[test]
fn small_grid() {
    let (n, bad) = common::pmp_grid(&[0, 3, 32, 61, 64]);
    assert_eq!(bad, None);
    assert_eq!(n, 25 * 64 * 64 * 2 * 2 * 4);
}

proptest! {
    #[test]
    fn pmp_check_matches_oracle(
        addr in 0u64..5000, width in prop::sample::select(vec![1u64, 4]), machine: bool,
        acc in prop::sample::select(ACCESSES.to_vec()), c0: u8, c1: u8, t0 in 0u32..5000, t1 in 0u32..5000,
    ) {
        prop_assert_eq!(
            implementation(addr, width, acc, machine, [c0, c1], [t0, t1]),
            pmp_oracle(addr, width, acc, machine, [c0, c1], [t0, t1])
        );
    }
}
