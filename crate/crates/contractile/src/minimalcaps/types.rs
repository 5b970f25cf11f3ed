use crate::sym::{sym, Sym};
use crate::value::Value;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum Permission {
    O,
    R,
    RW,
    E,
}

impl Permission {
    pub const ALL: [Permission; 4] = [Permission::O, Permission::R, Permission::RW, Permission::E];

    pub fn name(self) -> &'static str {
        match self {
            Permission::O => "O",
            Permission::R => "R",
            Permission::RW => "RW",
            Permission::E => "E",
        }
    }

    pub fn to_sym(self) -> Sym {
        sym(self.name())
    }

    pub fn to_value(self) -> Value {
        Value::Enum(self.to_sym())
    }

    pub fn parse(s: &str) -> Option<Permission> {
        Permission::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn from_value(v: &Value) -> Option<Permission> {
        Permission::parse(v.as_enum()?.as_str())
    }

    pub fn code(self) -> i64 {
        match self {
            Permission::O => 0,
            Permission::R => 1,
            Permission::RW => 2,
            Permission::E => 3,
        }
    }

    pub fn from_code(c: i64) -> Permission {
        match c & 3 {
            0 => Permission::O,
            1 => Permission::R,
            2 => Permission::RW,
            _ => Permission::E,
        }
    }
}

/// `p ⊑ q`: O below everything, R below RW, E only above O.
pub fn subperm(p: Permission, q: Permission) -> bool {
    use Permission::*;
    p == q || matches!((p, q), (O, _) | (R, RW))
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Capability {
    pub perm: Permission,
    pub begin: i64,
    pub end: i64,
    pub cursor: i64,
}

impl Capability {
    pub fn new(perm: Permission, begin: i64, end: i64, cursor: i64) -> Capability {
        Capability { perm, begin, end, cursor }
    }

    pub fn within_bounds(&self) -> bool {
        self.begin <= self.cursor && self.cursor <= self.end
    }

    pub fn to_value(&self) -> Value {
        Value::Ctor(
            sym("cap"),
            vec![
                self.perm.to_value(),
                Value::Int(self.begin),
                Value::Int(self.end),
                Value::Int(self.cursor),
            ],
        )
    }

    pub fn from_value(v: &Value) -> Option<Capability> {
        match v {
            Value::Ctor(c, fs) if c.as_str() == "cap" && fs.len() == 4 => Some(Capability {
                perm: Permission::from_value(&fs[0])?,
                begin: fs[1].as_int()?,
                end: fs[2].as_int()?,
                cursor: fs[3].as_int()?,
            }),
            _ => None,
        }
    }
}

/// A MinimalCaps machine word.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Word {
    Int(i64),
    Cap(Capability),
}

impl Word {
    pub fn to_value(&self) -> Value {
        match self {
            Word::Int(z) => Value::Ctor(sym("int"), vec![Value::Int(*z)]),
            Word::Cap(c) => c.to_value(),
        }
    }

    pub fn from_value(v: &Value) -> Option<Word> {
        match v {
            Value::Ctor(c, fs) if c.as_str() == "int" && fs.len() == 1 => Some(Word::Int(fs[0].as_int()?)),
            _ => Capability::from_value(v).map(Word::Cap),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(p: Permission, q: Permission) -> bool {
        // Written out from the Hasse diagram O < R < RW, O < E.
        let table = [
            // O     R      RW     E
            [true, true, true, true],    // O
            [false, true, true, false],  // R
            [false, false, true, false], // RW
            [false, false, false, true], // E
        ];
        table[p as usize][q as usize]
    }

    #[test]
    fn subperm_matches_table() {
        for p in Permission::ALL {
            for q in Permission::ALL {
                assert_eq!(subperm(p, q), oracle(p, q), "{p:?} {q:?}");
            }
        }
        assert!(subperm(Permission::R, Permission::RW));
        assert!(!subperm(Permission::RW, Permission::R));
    }

    #[test]
    fn subperm_is_partial_order() {
        let all = Permission::ALL;
        for a in all {
            assert!(subperm(a, a));
            for b in all {
                if subperm(a, b) && subperm(b, a) {
                    assert_eq!(a, b);
                }
                for c in all {
                    if subperm(a, b) && subperm(b, c) {
                        assert!(subperm(a, c));
                    }
                }
            }
        }
    }

    #[test]
    fn bounds_are_inclusive() {
        assert!(Capability::new(Permission::RW, 0, 10, 10).within_bounds());
        assert!(!Capability::new(Permission::RW, 0, 10, 11).within_bounds());
        assert!(!Capability::new(Permission::RW, 5, 4, 5).within_bounds());
    }

    #[test]
    fn word_value_round_trip() {
        let c = Word::Cap(Capability::new(Permission::E, 1, 2, 3));
        assert_eq!(Word::from_value(&c.to_value()), Some(c));
        assert_eq!(Word::from_value(&Word::Int(-4).to_value()), Some(Word::Int(-4)));
    }
}
