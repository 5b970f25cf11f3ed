//! Runtime values, semantic sorts and the primitive operations shared by the
//! interpreter, the term language and the ground evaluator.

use std::fmt;

use crate::minimalcaps::{subperm, Capability, Permission};
use crate::riscv::pmp::{pmp_check, AccessType, PmpCfg, PmpDecision, Privilege};
use crate::sym::{sym, Sym};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Value {
    Unit,
    Bool(bool),
    Int(i64),
    Bits(u32),
    Enum(Sym),
    Tuple(Vec<Value>),
    Ctor(Sym, Vec<Value>),
    Record(Vec<(Sym, Value)>),
}

impl Value {
    pub fn enm(s: &str) -> Value {
        Value::Enum(sym(s))
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bits(&self) -> Option<u32> {
        match self {
            Value::Bits(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_enum(&self) -> Option<Sym> {
        match self {
            Value::Enum(s) => Some(*s),
            _ => None,
        }
    }

    pub fn field(&self, name: Sym) -> Option<&Value> {
        match self {
            Value::Record(fs) => fs.iter().find(|(n, _)| *n == name).map(|(_, v)| v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => write!(f, "()"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Bits(b) => write!(f, "{b:#x}"),
            Value::Enum(s) => write!(f, "'{s}"),
            Value::Tuple(vs) => {
                write!(f, "(tuple")?;
                for v in vs {
                    write!(f, " {v}")?;
                }
                write!(f, ")")
            }
            Value::Ctor(c, vs) => {
                write!(f, "(ctor {c}")?;
                for v in vs {
                    write!(f, " {v}")?;
                }
                write!(f, ")")
            }
            Value::Record(fs) => {
                write!(f, "(record")?;
                for (n, v) in fs {
                    write!(f, " ({n} {v})")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Semantic types. Enum and union sorts name a declaration in the program's
/// type environment.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Sort {
    Unit,
    Bool,
    Int,
    Bits,
    Enum(Sym),
    Union(Sym),
    Record(Vec<(Sym, Sort)>),
    Tuple(Vec<Sort>),
    /// Unchecked; used for foreign results whose shape depends on the ISA.
    Any,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Lt,
    Le,
    Eq,
    Ne,
    Not,
    And,
    Or,
    BvAdd,
    BvSub,
    BvAnd,
    BvOr,
    BvXor,
    BvShl,
    BvShr,
    BvSra,
    BvSlt,
    BvUlt,
    BvUle,
    BvOfInt,
    BvToUint,
    Subperm,
    WithinBounds,
    PermOfCode,
    PmpMatch,
    CfgTor,
    CfgLocked,
    CfgGrants,
    CfgNormalize,
    CfgByte,
    PackCfg,
    AccLe,
    PmpAccess,
    RegRead,
    RegWrite,
    MppOfBits,
    BitsOfMpp,
}

pub const OPS: &[Op] = &[
    Op::Add,
    Op::Sub,
    Op::Mul,
    Op::Lt,
    Op::Le,
    Op::Eq,
    Op::Ne,
    Op::Not,
    Op::And,
    Op::Or,
    Op::BvAdd,
    Op::BvSub,
    Op::BvAnd,
    Op::BvOr,
    Op::BvXor,
    Op::BvShl,
    Op::BvShr,
    Op::BvSra,
    Op::BvSlt,
    Op::BvUlt,
    Op::BvUle,
    Op::BvOfInt,
    Op::BvToUint,
    Op::Subperm,
    Op::WithinBounds,
    Op::PermOfCode,
    Op::PmpMatch,
    Op::CfgTor,
    Op::CfgLocked,
    Op::CfgGrants,
    Op::CfgNormalize,
    Op::CfgByte,
    Op::PackCfg,
    Op::AccLe,
    Op::PmpAccess,
    Op::RegRead,
    Op::RegWrite,
    Op::MppOfBits,
    Op::BitsOfMpp,
];

/// Number of general-purpose registers packed in a GPR tuple (x1..x31).
pub const GPR_COUNT: usize = 31;

impl Op {
    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::Not => "not",
            Op::And => "and",
            Op::Or => "or",
            Op::BvAdd => "bvadd",
            Op::BvSub => "bvsub",
            Op::BvAnd => "bvand",
            Op::BvOr => "bvor",
            Op::BvXor => "bvxor",
            Op::BvShl => "bvshl",
            Op::BvShr => "bvlshr",
            Op::BvSra => "bvashr",
            Op::BvSlt => "bvslt",
            Op::BvUlt => "bvult",
            Op::BvUle => "bvule",
            Op::BvOfInt => "bv-of-int",
            Op::BvToUint => "bv-to-uint",
            Op::Subperm => "subperm",
            Op::WithinBounds => "within_bounds",
            Op::PermOfCode => "perm-of-code",
            Op::PmpMatch => "pmp_match",
            Op::CfgTor => "cfg-tor",
            Op::CfgLocked => "cfg-locked",
            Op::CfgGrants => "cfg-grants",
            Op::CfgNormalize => "cfg-normalize",
            Op::CfgByte => "cfg-byte",
            Op::PackCfg => "pack-cfg",
            Op::AccLe => "acc<=",
            Op::PmpAccess => "PMP_access",
            Op::RegRead => "gpr-read",
            Op::RegWrite => "gpr-write",
            Op::MppOfBits => "mpp-of-bits",
            Op::BitsOfMpp => "bits-of-mpp",
        }
    }

    pub fn from_name(s: &str) -> Option<Op> {
        OPS.iter().copied().find(|op| op.name() == s)
    }

    pub fn arity(self) -> usize {
        match self {
            Op::Not
            | Op::BvOfInt
            | Op::BvToUint
            | Op::WithinBounds
            | Op::PermOfCode
            | Op::CfgTor
            | Op::CfgLocked
            | Op::CfgNormalize
            | Op::MppOfBits
            | Op::BitsOfMpp => 1,
            Op::RegWrite => 3,
            Op::PmpMatch | Op::PmpAccess => 4,
            _ => 2,
        }
    }

    /// Result is a boolean. Used by the solver to decide which terms may be
    /// looked up in the path condition.
    pub fn is_predicate(self) -> bool {
        matches!(
            self,
            Op::Lt
                | Op::Le
                | Op::Eq
                | Op::Ne
                | Op::Not
                | Op::And
                | Op::Or
                | Op::BvSlt
                | Op::BvUlt
                | Op::BvUle
                | Op::Subperm
                | Op::WithinBounds
                | Op::PmpMatch
                | Op::CfgTor
                | Op::CfgLocked
                | Op::CfgGrants
                | Op::AccLe
                | Op::PmpAccess
        )
    }

    pub fn eval(self, args: &[Value]) -> Result<Value, String> {
        if args.len() != self.arity() {
            return Err(format!("{} expects {} arguments", self.name(), self.arity()));
        }
        let bad = || format!("{}: ill-typed arguments {:?}", self.name(), args);
        let int = |i: usize| args[i].as_int().ok_or_else(bad);
        let bits = |i: usize| args[i].as_bits().ok_or_else(bad);
        let boolean = |i: usize| args[i].as_bool().ok_or_else(bad);
        Ok(match self {
            Op::Add => Value::Int(int(0)?.checked_add(int(1)?).ok_or("integer overflow")?),
            Op::Sub => Value::Int(int(0)?.checked_sub(int(1)?).ok_or("integer overflow")?),
            Op::Mul => Value::Int(int(0)?.checked_mul(int(1)?).ok_or("integer overflow")?),
            Op::Lt => Value::Bool(int(0)? < int(1)?),
            Op::Le => Value::Bool(int(0)? <= int(1)?),
            Op::Eq => Value::Bool(args[0] == args[1]),
            Op::Ne => Value::Bool(args[0] != args[1]),
            Op::Not => Value::Bool(!boolean(0)?),
            Op::And => Value::Bool(boolean(0)? && boolean(1)?),
            Op::Or => Value::Bool(boolean(0)? || boolean(1)?),
            Op::BvAdd => Value::Bits(bits(0)?.wrapping_add(bits(1)?)),
            Op::BvSub => Value::Bits(bits(0)?.wrapping_sub(bits(1)?)),
            Op::BvAnd => Value::Bits(bits(0)? & bits(1)?),
            Op::BvOr => Value::Bits(bits(0)? | bits(1)?),
            Op::BvXor => Value::Bits(bits(0)? ^ bits(1)?),
            Op::BvShl => Value::Bits(bits(0)? << (bits(1)? & 31)),
            Op::BvShr => Value::Bits(bits(0)? >> (bits(1)? & 31)),
            Op::BvSra => Value::Bits(((bits(0)? as i32) >> (bits(1)? & 31)) as u32),
            Op::BvSlt => Value::Bool((bits(0)? as i32) < (bits(1)? as i32)),
            Op::BvUlt => Value::Bool(bits(0)? < bits(1)?),
            Op::BvUle => Value::Bool(bits(0)? <= bits(1)?),
            Op::BvOfInt => Value::Bits(int(0)? as u32),
            Op::BvToUint => Value::Int(bits(0)? as i64),
            Op::Subperm => {
                let p = Permission::from_value(&args[0]).ok_or_else(bad)?;
                let q = Permission::from_value(&args[1]).ok_or_else(bad)?;
                Value::Bool(subperm(p, q))
            }
            Op::WithinBounds => {
                let c = Capability::from_value(&args[0]).ok_or_else(bad)?;
                Value::Bool(c.within_bounds())
            }
            Op::PermOfCode => Value::Enum(Permission::from_code(int(0)?).to_sym()),
            Op::PmpMatch => {
                let w = int(1)?;
                Value::Bool(crate::riscv::pmp::pmp_match_entry(
                    bits(0)? as u64,
                    w.max(0) as u64,
                    bits(2)? as u64,
                    bits(3)? as u64,
                ))
            }
            Op::CfgTor => Value::Bool(PmpCfg::from_byte(bits(0)? as u8).is_tor()),
            Op::CfgLocked => Value::Bool(PmpCfg::from_byte(bits(0)? as u8).l),
            Op::CfgGrants => {
                let acc = AccessType::from_value(&args[1]).ok_or_else(bad)?;
                Value::Bool(PmpCfg::from_byte(bits(0)? as u8).grants(acc))
            }
            Op::CfgNormalize => Value::Bits(PmpCfg::from_byte(bits(0)? as u8).to_byte() as u32),
            Op::CfgByte => {
                let idx = int(1)?;
                if !(0..4).contains(&idx) {
                    return Err(bad());
                }
                Value::Bits((bits(0)? >> (8 * idx)) & 0xff)
            }
            Op::PackCfg => Value::Bits((bits(0)? & 0xff) | ((bits(1)? & 0xff) << 8)),
            Op::AccLe => {
                let a = AccessType::from_value(&args[0]).ok_or_else(bad)?;
                let b = AccessType::from_value(&args[1]).ok_or_else(bad)?;
                Value::Bool(a.le(b))
            }
            Op::PmpAccess => {
                let es = crate::riscv::pmp::entries_from_value(&args[1]).ok_or_else(bad)?;
                let p = Privilege::from_value(&args[2]).ok_or_else(bad)?;
                let acc = AccessType::from_value(&args[3]).ok_or_else(bad)?;
                Value::Bool(pmp_check(bits(0)? as u64, 4, acc, p, &es) == PmpDecision::Allow)
            }
            // Register indices are enum values x0..x31; x0 reads as zero and
            // ignores writes.
            Op::RegRead => {
                let i = crate::riscv::instr::reg_index(&args[1]).ok_or_else(bad)?;
                match &args[0] {
                    Value::Tuple(ws) if ws.len() == GPR_COUNT => {
                        if i == 0 {
                            Value::Bits(0)
                        } else {
                            ws[i - 1].clone()
                        }
                    }
                    _ => return Err(bad()),
                }
            }
            Op::RegWrite => {
                let i = crate::riscv::instr::reg_index(&args[1]).ok_or_else(bad)?;
                match &args[0] {
                    Value::Tuple(ws) if ws.len() == GPR_COUNT => {
                        let mut ws = ws.clone();
                        if i != 0 {
                            ws[i - 1] = args[2].clone();
                        }
                        Value::Tuple(ws)
                    }
                    _ => return Err(bad()),
                }
            }
            Op::MppOfBits => {
                let b = bits(0)?;
                let p = if (b >> 11) & 3 == 3 {
                    Privilege::Machine
                } else {
                    Privilege::User
                };
                p.to_value()
            }
            Op::BitsOfMpp => {
                let p = Privilege::from_value(&args[0]).ok_or_else(bad)?;
                Value::Bits(match p {
                    Privilege::Machine => 3 << 11,
                    Privilege::User => 0,
                })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_names_round_trip() {
        for op in OPS {
            assert_eq!(Op::from_name(op.name()), Some(*op));
        }
    }

    #[test]
    fn bitvector_arithmetic_wraps() {
        let r = Op::BvAdd.eval(&[Value::Bits(u32::MAX), Value::Bits(2)]).unwrap();
        assert_eq!(r, Value::Bits(1));
        let r = Op::BvSra.eval(&[Value::Bits(0x8000_0000), Value::Bits(31)]).unwrap();
        assert_eq!(r, Value::Bits(u32::MAX));
    }

    #[test]
    fn gpr_tuple_ops() {
        let ws = Value::Tuple((0..31).map(Value::Bits).collect());
        assert_eq!(Op::RegRead.eval(&[ws.clone(), Value::enm("x0")]).unwrap(), Value::Bits(0));
        assert_eq!(Op::RegRead.eval(&[ws.clone(), Value::enm("x3")]).unwrap(), Value::Bits(2));
        let w2 = Op::RegWrite.eval(&[ws.clone(), Value::enm("x0"), Value::Bits(9)]).unwrap();
        assert_eq!(w2, ws);
    }
}
