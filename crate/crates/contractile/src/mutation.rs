//! Deliberate bugs that the verifier and the fuzzers are expected to catch.

#[derive(Clone, Copy, Default, Debug, PartialEq, Eq)]
pub struct Mutations {
    /// Drop `assert(write_allowed(perm))` from the MinimalCaps store.
    pub no_write_allowed_assert: bool,
    /// Drop the `move_cursor` ghost call from the MinimalCaps store.
    pub no_move_cursor: bool,
    /// Scan PMP entries from the highest index down.
    pub reverse_pmp_priority: bool,
    /// Let CSR writes modify locked PMP entries.
    pub skip_lock_check: bool,
    /// Femtokernel init grants entry 0 RWX instead of nothing.
    pub femto_entry0_rwx: bool,
    /// The PMP check allows every access.
    pub pmp_always_allow: bool,
}

pub const NAMES: [&str; 6] = [
    "no-write-allowed-assert",
    "no-move-cursor",
    "reverse-pmp-priority",
    "skip-lock-check",
    "femto-entry0-rwx",
    "pmp-always-allow",
];

impl Mutations {
    pub fn none() -> Mutations {
        Mutations::default()
    }

    /// Parses one name from [`NAMES`].
    pub fn named(name: &str) -> Option<Mutations> {
        let mut m = Mutations::default();
        match name {
            "no-write-allowed-assert" => m.no_write_allowed_assert = true,
            "no-move-cursor" => m.no_move_cursor = true,
            "reverse-pmp-priority" => m.reverse_pmp_priority = true,
            "skip-lock-check" => m.skip_lock_check = true,
            "femto-entry0-rwx" => m.femto_entry0_rwx = true,
            "pmp-always-allow" => m.pmp_always_allow = true,
            _ => return None,
        }
        Some(m)
    }

    pub fn any(&self) -> bool {
        *self != Mutations::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_parses_to_a_distinct_flag() {
        let ms: Vec<Mutations> = NAMES.iter().map(|n| Mutations::named(n).unwrap()).collect();
        for (i, a) in ms.iter().enumerate() {
            assert!(a.any());
            for b in &ms[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert_eq!(Mutations::named("bogus"), None);
    }
}
