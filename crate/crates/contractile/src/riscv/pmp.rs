//! Physical memory protection: configuration bytes, the two-entry TOR check
//! and the privilege/access-type vocabulary used by contracts.

use crate::sym::sym;
use crate::value::Value;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum Privilege {
    User,
    Machine,
}

impl Privilege {
    pub fn to_value(self) -> Value {
        Value::enm(self.name())
    }

    pub fn name(self) -> &'static str {
        match self {
            Privilege::User => "User",
            Privilege::Machine => "Machine",
        }
    }

    pub fn from_value(v: &Value) -> Option<Privilege> {
        match v.as_enum()?.as_str() {
            "User" => Some(Privilege::User),
            "Machine" => Some(Privilege::Machine),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum AccessType {
    Read,
    Write,
    Execute,
    ReadWrite,
}

impl AccessType {
    pub const ALL: [AccessType; 4] = [
        AccessType::Read,
        AccessType::Write,
        AccessType::Execute,
        AccessType::ReadWrite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AccessType::Read => "Read",
            AccessType::Write => "Write",
            AccessType::Execute => "Execute",
            AccessType::ReadWrite => "ReadWrite",
        }
    }

    pub fn to_value(self) -> Value {
        Value::enm(self.name())
    }

    pub fn from_value(v: &Value) -> Option<AccessType> {
        AccessType::ALL
            .into_iter()
            .find(|a| v.as_enum() == Some(sym(a.name())))
    }

    /// The order used by the memory contracts: Read and Write are below
    /// ReadWrite, everything is below itself.
    pub fn le(self, other: AccessType) -> bool {
        self == other
            || matches!(
                (self, other),
                (AccessType::Read, AccessType::ReadWrite) | (AccessType::Write, AccessType::ReadWrite)
            )
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum AddrMatch {
    Off,
    Tor,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct PmpCfg {
    pub l: bool,
    pub a: AddrMatch,
    pub x: bool,
    pub w: bool,
    pub r: bool,
}

impl PmpCfg {
    /// Bits 5 and 6 are dropped; A values other than OFF/TOR read as OFF.
    pub fn from_byte(b: u8) -> PmpCfg {
        PmpCfg {
            l: b & 0x80 != 0,
            a: if (b >> 3) & 3 == 1 { AddrMatch::Tor } else { AddrMatch::Off },
            x: b & 4 != 0,
            w: b & 2 != 0,
            r: b & 1 != 0,
        }
    }

    pub fn to_byte(self) -> u8 {
        (self.r as u8)
            | (self.w as u8) << 1
            | (self.x as u8) << 2
            | (if self.a == AddrMatch::Tor { 1 << 3 } else { 0 })
            | (self.l as u8) << 7
    }

    pub fn is_tor(self) -> bool {
        self.a == AddrMatch::Tor
    }

    pub fn grants(self, acc: AccessType) -> bool {
        match acc {
            AccessType::Read => self.r,
            AccessType::Write => self.w,
            AccessType::Execute => self.x,
            AccessType::ReadWrite => self.r && self.w,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct PmpEntry {
    pub cfg: u8,
    pub addr: u32,
}

pub type PmpEntries = [PmpEntry; 2];

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PmpDecision {
    Allow,
    Deny,
}

/// `[addr, addr+width) ⊆ [lo, hi)`, computed without overflow.
pub fn pmp_match_entry(addr: u64, width: u64, lo: u64, hi: u64) -> bool {
    width >= 1 && lo <= addr && addr + width <= hi
}

pub fn pmp_check(
    addr: u64,
    width: u64,
    acc: AccessType,
    privilege: Privilege,
    entries: &PmpEntries,
) -> PmpDecision {
    let mut prev = 0u64;
    for e in entries {
        let cfg = PmpCfg::from_byte(e.cfg);
        let hi = e.addr as u64;
        if cfg.is_tor() && pmp_match_entry(addr, width, prev, hi) {
            let ok = (privilege == Privilege::Machine && !cfg.l) || cfg.grants(acc);
            return if ok { PmpDecision::Allow } else { PmpDecision::Deny };
        }
        prev = hi;
    }
    if privilege == Privilege::Machine {
        PmpDecision::Allow
    } else {
        PmpDecision::Deny
    }
}

pub fn entries_to_value(es: &PmpEntries) -> Value {
    Value::Tuple(
        es.iter()
            .map(|e| Value::Tuple(vec![Value::Bits(e.cfg as u32), Value::Bits(e.addr)]))
            .collect(),
    )
}

pub fn entries_from_value(v: &Value) -> Option<PmpEntries> {
    let Value::Tuple(es) = v else { return None };
    if es.len() != 2 {
        return None;
    }
    let one = |v: &Value| -> Option<PmpEntry> {
        let Value::Tuple(p) = v else { return None };
        if p.len() != 2 {
            return None;
        }
        Some(PmpEntry {
            cfg: p[0].as_bits()? as u8,
            addr: p[1].as_bits()?,
        })
    };
    Some([one(&es[0])?, one(&es[1])?])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn femto(mem: u32) -> PmpEntries {
        [PmpEntry { cfg: 0x00, addr: 88 }, PmpEntry { cfg: 0x0F, addr: mem }]
    }

    #[test]
    fn match_entry_examples() {
        assert!(pmp_match_entry(84, 4, 0, 88));
        assert!(!pmp_match_entry(86, 4, 0, 88));
        assert!(!pmp_match_entry(0, 1, 0, 0));
    }

    #[test]
    fn femtokernel_policy() {
        let es = femto(4096);
        assert_eq!(pmp_check(84, 4, AccessType::Write, Privilege::User, &es), PmpDecision::Deny);
        assert_eq!(pmp_check(84, 4, AccessType::Write, Privilege::Machine, &es), PmpDecision::Allow);
        assert_eq!(pmp_check(100, 4, AccessType::Execute, Privilege::User, &es), PmpDecision::Allow);
    }

    #[test]
    fn no_match_only_machine() {
        let es = [PmpEntry { cfg: 0, addr: 0 }, PmpEntry { cfg: 0, addr: 0 }];
        assert_eq!(pmp_check(8, 4, AccessType::Read, Privilege::User, &es), PmpDecision::Deny);
        assert_eq!(pmp_check(8, 4, AccessType::Read, Privilege::Machine, &es), PmpDecision::Allow);
    }

    #[test]
    fn locked_entry_binds_machine_mode() {
        let es = [PmpEntry { cfg: 0x88, addr: 64 }, PmpEntry { cfg: 0, addr: 0 }];
        assert_eq!(pmp_check(0, 4, AccessType::Read, Privilege::Machine, &es), PmpDecision::Deny);
    }

    #[test]
    fn cfg_byte_normalization() {
        assert_eq!(PmpCfg::from_byte(0xFF).to_byte(), 0x87);
        assert_eq!(PmpCfg::from_byte(0x0F).to_byte(), 0x0F);
        assert!(!PmpCfg::from_byte(0x18).is_tor());
        assert!(PmpCfg::from_byte(0x0F).grants(AccessType::ReadWrite));
        assert!(!PmpCfg::from_byte(0x0D).grants(AccessType::ReadWrite));
    }

    #[test]
    fn access_order() {
        assert!(AccessType::Read.le(AccessType::ReadWrite));
        assert!(!AccessType::Execute.le(AccessType::ReadWrite));
        assert!(!AccessType::ReadWrite.le(AccessType::Read));
    }
}
