//! First-order symbolic terms and their normalizer.
//!
//! Normalization is bottom-up: ground subterms are evaluated, aggregates
//! are projected, equalities between constructor-shaped terms decompose,
//! and boolean subterms are looked up in the supplied facts.

use std::collections::BTreeSet;
use std::fmt;

use crate::riscv::instr::reg_index;
use crate::sym::{sym, Sym};
use crate::value::{Op, Value, GPR_COUNT};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Term {
    Var(Sym),
    Lit(Value),
    Op(Op, Vec<Term>),
    Tuple(Vec<Term>),
    Ctor(Sym, Vec<Term>),
    Record(Vec<(Sym, Term)>),
    Proj(Box<Term>, usize),
    Field(Box<Term>, Sym),
    If(Box<Term>, Box<Term>, Box<Term>),
}

pub fn var(x: &str) -> Term {
    Term::Var(sym(x))
}
pub fn lit(v: Value) -> Term {
    Term::Lit(v)
}
pub fn int(i: i64) -> Term {
    Term::Lit(Value::Int(i))
}
pub fn bits(u: u32) -> Term {
    Term::Lit(Value::Bits(u))
}
pub fn enm(s: &str) -> Term {
    Term::Lit(Value::enm(s))
}
pub fn tt() -> Term {
    Term::Lit(Value::Bool(true))
}
pub fn ff() -> Term {
    Term::Lit(Value::Bool(false))
}
pub fn op(o: Op, args: Vec<Term>) -> Term {
    Term::Op(o, args)
}
pub fn eq(a: Term, b: Term) -> Term {
    Term::Op(Op::Eq, vec![a, b])
}
pub fn ne(a: Term, b: Term) -> Term {
    not(eq(a, b))
}
pub fn not(a: Term) -> Term {
    Term::Op(Op::Not, vec![a])
}
pub fn and(a: Term, b: Term) -> Term {
    Term::Op(Op::And, vec![a, b])
}
pub fn or(a: Term, b: Term) -> Term {
    Term::Op(Op::Or, vec![a, b])
}
pub fn ctor(c: &str, xs: Vec<Term>) -> Term {
    Term::Ctor(sym(c), xs)
}
pub fn ite(c: Term, a: Term, b: Term) -> Term {
    Term::If(Box::new(c), Box::new(a), Box::new(b))
}

impl Term {
    pub fn as_lit(&self) -> Option<&Value> {
        match self {
            Term::Lit(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        self.as_lit().and_then(Value::as_bool)
    }

    pub fn is_true(&self) -> bool {
        self.as_bool() == Some(true)
    }

    pub fn is_false(&self) -> bool {
        self.as_bool() == Some(false)
    }

    pub fn free_vars(&self, out: &mut BTreeSet<Sym>) {
        match self {
            Term::Var(x) => {
                out.insert(*x);
            }
            Term::Lit(_) => {}
            Term::Op(_, xs) | Term::Tuple(xs) | Term::Ctor(_, xs) => xs.iter().for_each(|x| x.free_vars(out)),
            Term::Record(fs) => fs.iter().for_each(|(_, x)| x.free_vars(out)),
            Term::Proj(t, _) | Term::Field(t, _) => t.free_vars(out),
            Term::If(a, b, c) => {
                a.free_vars(out);
                b.free_vars(out);
                c.free_vars(out);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<Sym> {
        let mut s = BTreeSet::new();
        self.free_vars(&mut s);
        s
    }

    pub fn mentions(&self, x: Sym) -> bool {
        match self {
            Term::Var(y) => *y == x,
            Term::Lit(_) => false,
            Term::Op(_, xs) | Term::Tuple(xs) | Term::Ctor(_, xs) => xs.iter().any(|t| t.mentions(x)),
            Term::Record(fs) => fs.iter().any(|(_, t)| t.mentions(x)),
            Term::Proj(t, _) | Term::Field(t, _) => t.mentions(x),
            Term::If(a, b, c) => a.mentions(x) || b.mentions(x) || c.mentions(x),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Lit(_) => true,
            Term::Op(_, xs) | Term::Tuple(xs) | Term::Ctor(_, xs) => xs.iter().all(Term::is_ground),
            Term::Record(fs) => fs.iter().all(|(_, t)| t.is_ground()),
            Term::Proj(t, _) | Term::Field(t, _) => t.is_ground(),
            Term::If(a, b, c) => a.is_ground() && b.is_ground() && c.is_ground(),
        }
    }

    /// Replaces variables using `f`; variables mapped to `None` stay.
    pub fn replace(&self, f: &dyn Fn(Sym) -> Option<Term>) -> Term {
        match self {
            Term::Var(x) => f(*x).unwrap_or_else(|| self.clone()),
            Term::Lit(_) => self.clone(),
            Term::Op(o, xs) => Term::Op(*o, xs.iter().map(|t| t.replace(f)).collect()),
            Term::Tuple(xs) => Term::Tuple(xs.iter().map(|t| t.replace(f)).collect()),
            Term::Ctor(c, xs) => Term::Ctor(*c, xs.iter().map(|t| t.replace(f)).collect()),
            Term::Record(fs) => Term::Record(fs.iter().map(|(n, t)| (*n, t.replace(f))).collect()),
            Term::Proj(t, i) => Term::Proj(Box::new(t.replace(f)), *i),
            Term::Field(t, n) => Term::Field(Box::new(t.replace(f)), *n),
            Term::If(a, b, c) => Term::If(Box::new(a.replace(f)), Box::new(b.replace(f)), Box::new(c.replace(f))),
        }
    }

    pub fn subst(&self, x: Sym, by: &Term) -> Term {
        if !self.mentions(x) {
            return self.clone();
        }
        self.replace(&|y| (y == x).then(|| by.clone()))
    }

    pub fn subst_all(&self, m: &[(Sym, Term)]) -> Term {
        if m.is_empty() {
            return self.clone();
        }
        self.replace(&|y| m.iter().find(|(n, _)| *n == y).map(|(_, t)| t.clone()))
    }

    /// Ground evaluation under a valuation.
    pub fn eval(&self, val: &dyn Fn(Sym) -> Option<Value>) -> Result<Value, String> {
        Ok(match self {
            Term::Var(x) => val(*x).ok_or_else(|| format!("unassigned variable {x}"))?,
            Term::Lit(v) => v.clone(),
            Term::Op(o, xs) => {
                let args = xs.iter().map(|t| t.eval(val)).collect::<Result<Vec<_>, _>>()?;
                o.eval(&args)?
            }
            Term::Tuple(xs) => Value::Tuple(xs.iter().map(|t| t.eval(val)).collect::<Result<_, _>>()?),
            Term::Ctor(c, xs) => Value::Ctor(*c, xs.iter().map(|t| t.eval(val)).collect::<Result<_, _>>()?),
            Term::Record(fs) => Value::Record(
                fs.iter()
                    .map(|(n, t)| Ok((*n, t.eval(val)?)))
                    .collect::<Result<_, String>>()?,
            ),
            Term::Proj(t, i) => match t.eval(val)? {
                Value::Tuple(mut vs) if *i < vs.len() => vs.swap_remove(*i),
                v => return Err(format!("projection {i} of {v}")),
            },
            Term::Field(t, n) => {
                let v = t.eval(val)?;
                v.field(*n).cloned().ok_or_else(|| format!("no field {n} in {v}"))?
            }
            Term::If(c, a, b) => match c.eval(val)? {
                Value::Bool(true) => a.eval(val)?,
                Value::Bool(false) => b.eval(val)?,
                v => return Err(format!("if on {v}")),
            },
        })
    }

    /// Converts a literal aggregate to its term form, one level deep.
    fn open_lit(&self) -> Option<Term> {
        match self {
            Term::Lit(Value::Tuple(vs)) => Some(Term::Tuple(vs.iter().cloned().map(Term::Lit).collect())),
            Term::Lit(Value::Ctor(c, vs)) => Some(Term::Ctor(*c, vs.iter().cloned().map(Term::Lit).collect())),
            Term::Lit(Value::Record(fs)) => {
                Some(Term::Record(fs.iter().map(|(n, v)| (*n, Term::Lit(v.clone()))).collect()))
            }
            _ => None,
        }
    }

    /// Lifts aggregates whose components are all literals into literals.
    pub fn canonical(&self) -> Term {
        simplify_shallow(self.clone())
    }
}

fn lits(xs: &[Term]) -> Option<Vec<Value>> {
    xs.iter().map(|t| t.as_lit().cloned()).collect()
}

/// Lifts literal aggregates without evaluating operators.
fn simplify_shallow(t: Term) -> Term {
    match t {
        Term::Tuple(xs) => {
            let xs: Vec<Term> = xs.into_iter().map(simplify_shallow).collect();
            match lits(&xs) {
                Some(vs) => Term::Lit(Value::Tuple(vs)),
                None => Term::Tuple(xs),
            }
        }
        Term::Ctor(c, xs) => {
            let xs: Vec<Term> = xs.into_iter().map(simplify_shallow).collect();
            match lits(&xs) {
                Some(vs) => Term::Lit(Value::Ctor(c, vs)),
                None => Term::Ctor(c, xs),
            }
        }
        Term::Record(fs) => {
            let fs: Vec<(Sym, Term)> = fs.into_iter().map(|(n, t)| (n, simplify_shallow(t))).collect();
            if fs.iter().all(|(_, t)| t.as_lit().is_some()) {
                Term::Lit(Value::Record(fs.into_iter().map(|(n, t)| (n, t.as_lit().unwrap().clone())).collect()))
            } else {
                Term::Record(fs)
            }
        }
        Term::Op(o, xs) => Term::Op(o, xs.into_iter().map(simplify_shallow).collect()),
        Term::Proj(a, i) => Term::Proj(Box::new(simplify_shallow(*a)), i),
        Term::Field(a, n) => Term::Field(Box::new(simplify_shallow(*a)), n),
        Term::If(a, b, c) => Term::If(
            Box::new(simplify_shallow(*a)),
            Box::new(simplify_shallow(*b)),
            Box::new(simplify_shallow(*c)),
        ),
        t => t,
    }
}

/// Boolean facts consulted during simplification. Facts are normalized
/// terms; `Not(t)` records that `t` is false.
pub trait Facts {
    fn lookup(&self, t: &Term) -> Option<bool>;
}

impl Facts for [Term] {
    fn lookup(&self, t: &Term) -> Option<bool> {
        for f in self {
            if f == t {
                return Some(true);
            }
            if let Term::Op(Op::Not, xs) = f {
                if &xs[0] == t {
                    return Some(false);
                }
            }
            if let Term::Op(Op::Not, xs) = t {
                if &xs[0] == f {
                    return Some(false);
                }
            }
        }
        None
    }
}

impl Facts for Vec<Term> {
    fn lookup(&self, t: &Term) -> Option<bool> {
        self.as_slice().lookup(t)
    }
}

/// Simplification without facts.
pub fn normalize(t: &Term) -> Term {
    simplify(t, &[] as &[Term])
}

pub fn simplify<F: Facts + ?Sized>(t: &Term, facts: &F) -> Term {
    let r = match t {
        Term::Var(_) | Term::Lit(_) => t.clone(),
        Term::Tuple(xs) => {
            let xs: Vec<Term> = xs.iter().map(|x| simplify(x, facts)).collect();
            match lits(&xs) {
                Some(vs) => Term::Lit(Value::Tuple(vs)),
                None => eta_gpr(xs),
            }
        }
        Term::Ctor(c, xs) => {
            let xs: Vec<Term> = xs.iter().map(|x| simplify(x, facts)).collect();
            match lits(&xs) {
                Some(vs) => Term::Lit(Value::Ctor(*c, vs)),
                None => Term::Ctor(*c, xs),
            }
        }
        Term::Record(fs) => simplify_shallow(Term::Record(
            fs.iter().map(|(n, x)| (*n, simplify(x, facts))).collect(),
        )),
        Term::Proj(a, i) => {
            let a = simplify(a, facts);
            let a = a.open_lit().unwrap_or(a);
            match a {
                Term::Tuple(mut xs) if *i < xs.len() => xs.swap_remove(*i),
                a => Term::Proj(Box::new(a), *i),
            }
        }
        Term::Field(a, n) => {
            let a = simplify(a, facts);
            let a = a.open_lit().unwrap_or(a);
            match a {
                Term::Record(fs) => match fs.into_iter().find(|(m, _)| m == n) {
                    Some((_, x)) => x,
                    None => Term::Field(Box::new(Term::Record(vec![])), *n),
                },
                a => Term::Field(Box::new(a), *n),
            }
        }
        Term::If(c, a, b) => {
            let c = simplify(c, facts);
            match c.as_bool() {
                Some(true) => simplify(a, facts),
                Some(false) => simplify(b, facts),
                None => {
                    let a = simplify(a, facts);
                    let b = simplify(b, facts);
                    if a == b {
                        a
                    } else if a.is_true() && b.is_false() {
                        c
                    } else if a.is_false() && b.is_true() {
                        simplify_op(Op::Not, vec![c], facts)
                    } else {
                        Term::If(Box::new(c), Box::new(a), Box::new(b))
                    }
                }
            }
        }
        Term::Op(o, xs) => {
            let xs: Vec<Term> = xs.iter().map(|x| simplify(x, facts)).collect();
            simplify_op(*o, xs, facts)
        }
    };
    if r.as_lit().is_none() && is_boolean(&r) {
        if let Some(b) = facts.lookup(&r) {
            return Term::Lit(Value::Bool(b));
        }
    }
    r
}

fn is_boolean(t: &Term) -> bool {
    // A conditional is only ever found among the facts if it is boolean.
    matches!(t, Term::Op(o, _) if o.is_predicate()) || matches!(t, Term::If(..))
}

/// `(x1 .. x31)` read back from one tuple collapses to that tuple.
fn eta_gpr(xs: Vec<Term>) -> Term {
    if xs.len() == GPR_COUNT {
        if let Term::Op(Op::RegRead, a) = &xs[0] {
            let ws = &a[0];
            let ok = xs.iter().enumerate().all(|(i, x)| match x {
                Term::Op(Op::RegRead, b) => &b[0] == ws && b[1].as_lit().and_then(reg_index) == Some(i + 1),
                _ => false,
            });
            if ok {
                return ws.clone();
            }
        }
    }
    Term::Tuple(xs)
}

fn orient(a: Term, b: Term) -> (Term, Term) {
    match (&a, &b) {
        (Term::Var(x), Term::Var(y)) if y.as_str() < x.as_str() => (b, a),
        (Term::Var(_), _) => (a, b),
        (_, Term::Var(_)) => (b, a),
        (Term::Lit(_), _) => (b, a),
        _ => (a, b),
    }
}

fn shaped(t: &Term) -> Option<Term> {
    match t {
        Term::Tuple(_) | Term::Ctor(..) | Term::Record(_) => Some(t.clone()),
        Term::Lit(_) => t.open_lit(),
        _ => None,
    }
}

fn conj<F: Facts + ?Sized>(parts: Vec<Term>, facts: &F) -> Term {
    let mut acc = Term::Lit(Value::Bool(true));
    for p in parts.into_iter().rev() {
        acc = simplify_op(Op::And, vec![p, acc], facts);
    }
    acc
}

fn simplify_op<F: Facts + ?Sized>(o: Op, xs: Vec<Term>, facts: &F) -> Term {
    if let Some(vs) = lits(&xs) {
        if let Ok(v) = o.eval(&vs) {
            return Term::Lit(v);
        }
    }
    let b = |v: bool| Term::Lit(Value::Bool(v));
    match o {
        Op::Eq => {
            let (x, y) = (&xs[0], &xs[1]);
            if x == y {
                return b(true);
            }
            if let (Some(sx), Some(sy)) = (shaped(x), shaped(y)) {
                return match (sx, sy) {
                    (Term::Tuple(a), Term::Tuple(c)) if a.len() == c.len() => conj(
                        a.into_iter().zip(c).map(|(p, q)| simplify_op(Op::Eq, vec![p, q], facts)).collect(),
                        facts,
                    ),
                    (Term::Ctor(t1, a), Term::Ctor(t2, c)) => {
                        if t1 != t2 || a.len() != c.len() {
                            b(false)
                        } else {
                            conj(
                                a.into_iter().zip(c).map(|(p, q)| simplify_op(Op::Eq, vec![p, q], facts)).collect(),
                                facts,
                            )
                        }
                    }
                    (Term::Record(a), Term::Record(c)) if a.len() == c.len() => conj(
                        a.into_iter()
                            .zip(c)
                            .map(|((_, p), (_, q))| simplify_op(Op::Eq, vec![p, q], facts))
                            .collect(),
                        facts,
                    ),
                    (sx, sy) => Term::Op(Op::Eq, vec![sx, sy]),
                };
            }
            let (x, y) = orient(xs[0].clone(), xs[1].clone());
            Term::Op(Op::Eq, vec![x, y])
        }
        Op::Ne => simplify_op(Op::Not, vec![simplify_op(Op::Eq, xs, facts)], facts),
        Op::Not => match &xs[0] {
            Term::Op(Op::Not, inner) => inner[0].clone(),
            Term::Lit(Value::Bool(v)) => b(!v),
            _ => Term::Op(Op::Not, xs),
        },
        Op::And => {
            let (x, y) = (&xs[0], &xs[1]);
            if x.is_false() || y.is_false() {
                b(false)
            } else if x.is_true() {
                y.clone()
            } else if y.is_true() || x == y {
                x.clone()
            } else {
                Term::Op(Op::And, xs)
            }
        }
        Op::Or => {
            let (x, y) = (&xs[0], &xs[1]);
            if x.is_true() || y.is_true() {
                b(true)
            } else if x.is_false() {
                y.clone()
            } else if y.is_false() || x == y {
                x.clone()
            } else {
                Term::Op(Op::Or, xs)
            }
        }
        Op::Le if xs[0] == xs[1] => b(true),
        Op::Lt if xs[0] == xs[1] => b(false),
        Op::BvUle if xs[0] == xs[1] => b(true),
        Op::Add | Op::BvAdd => {
            let zero = if o == Op::Add { Value::Int(0) } else { Value::Bits(0) };
            let mut xs = xs;
            if xs[0].as_lit().is_some() && xs[1].as_lit().is_none() {
                xs.swap(0, 1);
            }
            if xs[1].as_lit() == Some(&zero) {
                return xs.swap_remove(0);
            }
            // (x + c1) + c2 folds the constants.
            if let (Term::Op(o2, inner), Some(c2)) = (&xs[0], xs[1].as_lit()) {
                if *o2 == o {
                    if let Some(c1) = inner[1].as_lit() {
                        if let Ok(c) = o.eval(&[c1.clone(), c2.clone()]) {
                            return simplify_op(o, vec![inner[0].clone(), Term::Lit(c)], facts);
                        }
                    }
                }
            }
            Term::Op(o, xs)
        }
        Op::RegRead => {
            let idx = xs[1].as_lit().and_then(reg_index);
            if idx == Some(0) {
                return Term::Lit(Value::Bits(0));
            }
            match (&xs[0], idx) {
                (Term::Tuple(ts), Some(i)) if ts.len() == GPR_COUNT => ts[i - 1].clone(),
                (Term::Op(Op::RegWrite, w), Some(i)) => match w[1].as_lit().and_then(reg_index) {
                    Some(j) if j == i => w[2].clone(),
                    Some(_) => simplify_op(Op::RegRead, vec![w[0].clone(), xs[1].clone()], facts),
                    None => Term::Op(o, xs),
                },
                _ => Term::Op(o, xs),
            }
        }
        Op::RegWrite => {
            let idx = xs[1].as_lit().and_then(reg_index);
            match (idx, &xs[0]) {
                (Some(0), _) => xs[0].clone(),
                (Some(i), Term::Tuple(ts)) if ts.len() == GPR_COUNT => {
                    let mut ts = ts.clone();
                    ts[i - 1] = xs[2].clone();
                    simplify(&Term::Tuple(ts), facts)
                }
                (Some(i), Term::Lit(Value::Tuple(vs))) if vs.len() == GPR_COUNT => {
                    let mut ts: Vec<Term> = vs.iter().cloned().map(Term::Lit).collect();
                    ts[i - 1] = xs[2].clone();
                    simplify(&Term::Tuple(ts), facts)
                }
                _ => Term::Op(o, xs),
            }
        }
        Op::PmpAccess => match unfold_pmp_access(&xs) {
            Some(t) => simplify(&t, facts),
            None => Term::Op(o, xs),
        },
        _ => Term::Op(o, xs),
    }
}

/// User solver hook: with the entry list in tuple form, `PMP_access`
/// unfolds into the priority-ordered decision over the two TOR entries.
fn unfold_pmp_access(xs: &[Term]) -> Option<Term> {
    let es = shaped(&xs[1])?;
    let Term::Tuple(es) = es else { return None };
    if es.len() != 2 {
        return None;
    }
    let mut pairs = Vec::new();
    for e in es {
        let Term::Tuple(p) = shaped(&e)? else { return None };
        if p.len() != 2 {
            return None;
        }
        pairs.push((p[0].clone(), p[1].clone()));
    }
    let (a, p, acc) = (xs[0].clone(), xs[2].clone(), xs[3].clone());
    let machine = eq(p.clone(), enm("Machine"));
    let decide = |cfg: &Term| {
        or(
            and(machine.clone(), not(op(Op::CfgLocked, vec![cfg.clone()]))),
            op(Op::CfgGrants, vec![cfg.clone(), acc.clone()]),
        )
    };
    let hit = |cfg: &Term, lo: Term, hi: &Term| {
        and(
            op(Op::CfgTor, vec![cfg.clone()]),
            op(Op::PmpMatch, vec![a.clone(), int(4), lo, hi.clone()]),
        )
    };
    let (c0, a0) = &pairs[0];
    let (c1, a1) = &pairs[1];
    Some(ite(
        hit(c0, bits(0), a0),
        decide(c0),
        ite(hit(c1, a0.clone(), a1), decide(c1), machine.clone()),
    ))
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, head: &str, xs: &[Term]| -> fmt::Result {
            write!(f, "({head}")?;
            for x in xs {
                write!(f, " {x}")?;
            }
            write!(f, ")")
        };
        match self {
            Term::Var(x) => write!(f, "{x}"),
            Term::Lit(v) => write!(f, "{v}"),
            Term::Op(o, xs) => list(f, &format!("op {}", o.name()), xs),
            Term::Tuple(xs) => list(f, "tuple", xs),
            Term::Ctor(c, xs) => list(f, &format!("ctor {c}"), xs),
            Term::Record(fs) => {
                write!(f, "(record")?;
                for (n, t) in fs {
                    write!(f, " ({n} {t})")?;
                }
                write!(f, ")")
            }
            Term::Proj(t, i) => write!(f, "(proj {t} {i})"),
            Term::Field(t, n) => write!(f, "(field {t} {n})"),
            Term::If(a, b, c) => write!(f, "(if {a} {b} {c})"),
        }
    }
}

impl From<Value> for Term {
    fn from(v: Value) -> Term {
        Term::Lit(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riscv::pmp::{entries_to_value, pmp_check, AccessType, PmpDecision, PmpEntry, Privilege};

    #[test]
    fn ground_arithmetic() {
        let t = eq(op(Op::Add, vec![int(3), int(1)]), int(4));
        assert!(normalize(&t).is_true());
    }

    #[test]
    fn constructor_equalities_decompose() {
        let t = eq(ctor("cap", vec![var("p"), int(1)]), ctor("cap", vec![enm("R"), int(1)]));
        assert_eq!(normalize(&t), eq(var("p"), enm("R")));
        let t = eq(ctor("int", vec![var("z")]), ctor("cap", vec![var("p")]));
        assert!(normalize(&t).is_false());
    }

    #[test]
    fn facts_decide_conditions() {
        let c = op(Op::CfgLocked, vec![var("c0")]);
        let t = ite(c.clone(), var("a"), var("b"));
        assert_eq!(simplify(&t, &vec![c.clone()]), var("a"));
        assert_eq!(simplify(&t, &vec![not(c)]), var("b"));
    }

    #[test]
    fn gpr_read_after_write() {
        let ws = var("ws");
        let w = op(Op::RegWrite, vec![ws.clone(), enm("x5"), var("v")]);
        assert_eq!(normalize(&op(Op::RegRead, vec![w.clone(), enm("x5")])), var("v"));
        assert_eq!(
            normalize(&op(Op::RegRead, vec![w, enm("x6")])),
            op(Op::RegRead, vec![ws.clone(), enm("x6")])
        );
        let all: Vec<Term> = (1..32).map(|i| op(Op::RegRead, vec![ws.clone(), enm(&format!("x{i}"))])).collect();
        assert_eq!(normalize(&Term::Tuple(all)), ws);
    }

    #[test]
    fn pmp_unfolding_agrees_with_reference() {
        let cfgs = [0x00u8, 0x0F, 0x8F, 0x98, 0x18];
        for &c0 in &cfgs {
            for &c1 in &cfgs {
                for (a0, a1) in [(8u32, 16u32), (16, 8), (0, 32)] {
                    let es = [PmpEntry { cfg: c0, addr: a0 }, PmpEntry { cfg: c1, addr: a1 }];
                    for addr in (0..40).step_by(4) {
                        for p in [Privilege::User, Privilege::Machine] {
                            for acc in AccessType::ALL {
                                let sym_es = Term::Tuple(vec![
                                    Term::Tuple(vec![var("c0"), var("a0")]),
                                    Term::Tuple(vec![var("c1"), var("a1")]),
                                ]);
                                let t = op(Op::PmpAccess, vec![bits(addr), sym_es, p.to_value().into(), acc.to_value().into()]);
                                let unfolded = normalize(&t);
                                let val = |x: Sym| match x.as_str() {
                                    "c0" => Some(Value::Bits(c0 as u32)),
                                    "c1" => Some(Value::Bits(c1 as u32)),
                                    "a0" => Some(Value::Bits(a0)),
                                    "a1" => Some(Value::Bits(a1)),
                                    _ => None,
                                };
                                let expect = pmp_check(addr as u64, 4, acc, p, &es) == PmpDecision::Allow;
                                assert_eq!(unfolded.eval(&val), Ok(Value::Bool(expect)));
                                let ground = op(
                                    Op::PmpAccess,
                                    vec![bits(addr), lit(entries_to_value(&es)), lit(p.to_value()), lit(acc.to_value())],
                                );
                                assert_eq!(normalize(&ground), Term::Lit(Value::Bool(expect)));
                            }
                        }
                    }
                }
            }
        }
    }
}
