//! Test-only oracles and generators shared by the integration tests.
#![allow(dead_code)]

use contractile::minimalcaps::instr::{IMM_MAX, IMM_MIN};
use contractile::minimalcaps::{McInstr, McReg, Permission};
use contractile::riscv::pmp::{pmp_check, PmpDecision};
use contractile::riscv::{AccessType, PmpEntries, PmpEntry, Privilege};
use rand::Rng;

/// Reference PMP decision. Each byte of the access is tested for membership
/// in an entry's range one at a time; the first TOR entry that holds every
/// byte decides.
pub fn pmp_oracle(addr: u64, width: u64, acc: AccessType, machine: bool, cfg: [u8; 2], top: [u32; 2]) -> bool {
    let mut bottom = 0u64;
    for i in 0..2 {
        let c = cfg[i];
        let tor = (c >> 3) & 3 == 1;
        let holds_every_byte = (addr..addr + width).all(|b| bottom <= b && b < top[i] as u64);
        if tor && holds_every_byte {
            let locked = c & 0x80 != 0;
            let bit = match acc {
                AccessType::Read => c & 1 != 0,
                AccessType::Write => c & 2 != 0,
                AccessType::Execute => c & 4 != 0,
                AccessType::ReadWrite => c & 3 == 3,
            };
            return (machine && !locked) || bit;
        }
        bottom = top[i] as u64;
    }
    machine
}

pub const GRID_CFGS: [u8; 8] = [0x00, 0x07, 0x0F, 0x8F, 0x98, 0x18, 0x1F, 0x9F];
pub const ACCESSES: [AccessType; 4] = [AccessType::Read, AccessType::Write, AccessType::Execute, AccessType::ReadWrite];

pub fn implementation(addr: u64, width: u64, acc: AccessType, machine: bool, cfg: [u8; 2], top: [u32; 2]) -> bool {
    let es: PmpEntries = [PmpEntry { cfg: cfg[0], addr: top[0] }, PmpEntry { cfg: cfg[1], addr: top[1] }];
    let p = if machine { Privilege::Machine } else { Privilege::User };
    pmp_check(addr, width, acc, p, &es) == PmpDecision::Allow
}

/// Checks every access in `[0,64)` with widths 1 and 4, both privileges and
/// all access types, for each pair of grid cfgs and each pair of tops from
/// `tops`. Returns (cases, first mismatch).
pub fn pmp_grid(tops: &[u32]) -> (u64, Option<String>) {
    let mut n = 0;
    for &t0 in tops {
        for &t1 in tops {
            for c0 in GRID_CFGS {
                for c1 in GRID_CFGS {
                    for addr in 0..64u64 {
                        for width in [1u64, 4] {
                            for machine in [false, true] {
                                for acc in ACCESSES {
                                    n += 1;
                                    let (cfg, top) = ([c0, c1], [t0, t1]);
                                    let want = pmp_oracle(addr, width, acc, machine, cfg, top);
                                    if implementation(addr, width, acc, machine, cfg, top) != want {
                                        let m = format!(
                                            "addr={addr} width={width} {acc:?} machine={machine} cfg={cfg:02x?} top={top:?}: oracle says {want}"
                                        );
                                        return (n, Some(m));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (n, None)
}

fn reg<R: Rng>(rng: &mut R) -> McReg {
    McReg::ALL[rng.gen_range(0..4)]
}

/// Uniform over variants, then over operands; immediates span the full field.
pub fn random_mc<R: Rng>(rng: &mut R) -> McInstr {
    use McInstr::*;
    let imm = |rng: &mut R| rng.gen_range(IMM_MIN..=IMM_MAX);
    match rng.gen_range(0..12) {
        0 => Store(reg(rng), reg(rng), imm(rng)),
        1 => Load(reg(rng), reg(rng), imm(rng)),
        2 => Jalr(reg(rng), reg(rng)),
        3 => Move(reg(rng), reg(rng)),
        4 => Lea(reg(rng), imm(rng)),
        5 => Restrict(reg(rng), Permission::ALL[rng.gen_range(0..4)]),
        6 => Subseg(reg(rng), reg(rng), reg(rng)),
        7 => Add(reg(rng), reg(rng), reg(rng)),
        8 => AddI(reg(rng), reg(rng), imm(rng)),
        9 => Bnez(reg(rng), imm(rng)),
        10 => Fail,
        _ => Halt,
    }
}
