//! Interned identifiers.
//!
//! Names are compared on every variable lookup and register access in the
//! interpreter, so they are interned once and compared as integers.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::{OnceLock, RwLock};

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sym(u32);

struct Table {
    ids: HashMap<&'static str, u32>,
    names: Vec<&'static str>,
}

fn table() -> &'static RwLock<Table> {
    static TABLE: OnceLock<RwLock<Table>> = OnceLock::new();
    TABLE.get_or_init(|| {
        RwLock::new(Table {
            ids: HashMap::new(),
            names: Vec::new(),
        })
    })
}

impl Sym {
    pub fn new(s: &str) -> Sym {
        if let Some(&id) = table().read().unwrap().ids.get(s) {
            return Sym(id);
        }
        let mut t = table().write().unwrap();
        if let Some(&id) = t.ids.get(s) {
            return Sym(id);
        }
        let leaked: &'static str = Box::leak(s.to_string().into_boxed_str());
        let id = t.names.len() as u32;
        t.names.push(leaked);
        t.ids.insert(leaked, id);
        Sym(id)
    }

    pub fn as_str(self) -> &'static str {
        table().read().unwrap().names[self.0 as usize]
    }
}

// Ordering is by spelling so that maps keyed by Sym iterate alphabetically
// regardless of interning order.
impl Ord for Sym {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.0 == other.0 {
            return Ordering::Equal;
        }
        self.as_str().cmp(other.as_str())
    }
}

impl PartialOrd for Sym {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<&str> for Sym {
    fn from(s: &str) -> Sym {
        Sym::new(s)
    }
}

pub fn sym(s: &str) -> Sym {
    Sym::new(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_stable() {
        let a = sym("alpha_test_name");
        let b = sym("alpha_test_name");
        assert_eq!(a, b);
        assert_eq!(a.as_str(), "alpha_test_name");
        assert!(sym("aaa") < sym("bbb"));
    }
}
