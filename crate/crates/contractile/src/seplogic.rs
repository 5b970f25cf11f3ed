//! Separation-logic assertions, the symbolic heap and the produce/consume
//! operations used by the symbolic executor. Also a concrete checker that
//! evaluates an assertion against a machine state.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::TypeEnv;
use crate::machine::MachineState;
use crate::solver::Solver;
use crate::sym::{sym, Sym};
use crate::term::{eq, Term};
use crate::value::{Sort, Value};

#[derive(Clone, Debug, PartialEq)]
pub enum Assertion {
    Emp,
    Pure(Term),
    /// Register points-to; the key evaluates to the register name as an
    /// enum value.
    Reg(Term, Term),
    Mem(Term, Term),
    Pred(Sym, Vec<Term>),
    Star(Box<Assertion>, Box<Assertion>),
    /// Only `(∃w. a ↦ w) -∗ P(..)` is supported.
    Wand(Box<Assertion>, Box<Assertion>),
    Exists(Sym, Sort, Box<Assertion>),
    Or(Box<Assertion>, Box<Assertion>),
}

pub mod build {
    use super::*;

    pub fn pure(t: Term) -> Assertion {
        Assertion::Pure(t)
    }
    pub fn reg(r: &str, v: Term) -> Assertion {
        Assertion::Reg(Term::Lit(Value::enm(r)), v)
    }
    pub fn reg_t(k: Term, v: Term) -> Assertion {
        Assertion::Reg(k, v)
    }
    pub fn mem(a: Term, v: Term) -> Assertion {
        Assertion::Mem(a, v)
    }
    pub fn pred(n: &str, args: Vec<Term>) -> Assertion {
        Assertion::Pred(sym(n), args)
    }
    pub fn star(xs: Vec<Assertion>) -> Assertion {
        let mut it = xs.into_iter().rev();
        let Some(mut acc) = it.next() else { return Assertion::Emp };
        for x in it {
            acc = Assertion::Star(Box::new(x), Box::new(acc));
        }
        acc
    }
    pub fn exists(x: &str, s: Sort, a: Assertion) -> Assertion {
        Assertion::Exists(sym(x), s, Box::new(a))
    }
    pub fn or(a: Assertion, b: Assertion) -> Assertion {
        Assertion::Or(Box::new(a), Box::new(b))
    }
    pub fn ors(xs: Vec<Assertion>) -> Assertion {
        let mut it = xs.into_iter().rev();
        let mut acc = it.next().expect("at least one disjunct");
        for x in it {
            acc = or(x, acc);
        }
        acc
    }
    /// `(∃w. a ↦ w) -∗ P(args)`
    pub fn wand_mem(a: Term, p: &str, args: Vec<Term>) -> Assertion {
        Assertion::Wand(
            Box::new(exists("wand$w", Sort::Bits, mem(a, crate::term::var("wand$w")))),
            Box::new(pred(p, args)),
        )
    }
}

/// Function contract. `args` are patterns over the logic variables; the
/// result is bound to `result` in the postcondition.
#[derive(Clone, Debug, PartialEq)]
pub struct Contract {
    pub logic_vars: Vec<(Sym, Sort)>,
    pub args: Vec<Term>,
    pub pre: Assertion,
    pub result: Sym,
    pub post: Assertion,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LemmaDecl {
    pub name: Sym,
    pub logic_vars: Vec<(Sym, Sort)>,
    pub params: Vec<Term>,
    pub pre: Assertion,
    pub post: Assertion,
}

/// Logical-relation predicates hold for whole regions and are duplicable.
pub fn is_persistent(p: Sym) -> bool {
    matches!(p.as_str(), "V" | "E" | "IH")
}

/// Predicates with at most one instance per state: consuming one unifies
/// its arguments with the chunk instead of proving them equal.
pub fn is_precise(p: Sym) -> bool {
    matches!(p.as_str(), "GPRs" | "PMP_entries" | "PMP_addr_access" | "IH")
}

#[derive(Clone, Debug, PartialEq)]
pub enum Chunk {
    Reg(Term, Term),
    Mem(Term, Term),
    Pred(Sym, Vec<Term>),
    Wand { addr: Term, pred: Sym, args: Vec<Term> },
}

impl Chunk {
    fn map(&self, f: &dyn Fn(&Term) -> Term) -> Chunk {
        match self {
            Chunk::Reg(k, v) => Chunk::Reg(f(k), f(v)),
            Chunk::Mem(a, v) => Chunk::Mem(f(a), f(v)),
            Chunk::Pred(n, xs) => Chunk::Pred(*n, xs.iter().map(f).collect()),
            Chunk::Wand { addr, pred, args } => Chunk::Wand {
                addr: f(addr),
                pred: *pred,
                args: args.iter().map(f).collect(),
            },
        }
    }

    pub fn is_resource(&self) -> bool {
        matches!(self, Chunk::Reg(..) | Chunk::Mem(..))
    }
}

impl std::fmt::Display for Chunk {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Chunk::Reg(k, v) => write!(f, "{k} ↦ {v}"),
            Chunk::Mem(a, v) => write!(f, "[{a}] ↦ {v}"),
            Chunk::Pred(n, xs) => {
                write!(f, "{n}(")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
            Chunk::Wand { addr, pred, .. } => write!(f, "(∃w. [{addr}] ↦ w) -∗ {pred}(..)"),
        }
    }
}

/// A pure goal the solver could not discharge, with the facts it had.
#[derive(Clone, Debug, PartialEq)]
pub struct Obligation {
    pub facts: Vec<Term>,
    pub goal: Term,
}

pub type Subst = Vec<(Sym, Term)>;

type Pairs = Vec<(Term, Term)>;

/// Symbolic state of one path.
#[derive(Clone, Debug)]
pub struct SymState {
    pub heap: Vec<Chunk>,
    pub solver: Solver,
    pub sorts: BTreeMap<Sym, Sort>,
    /// Variable frames: one per active call, innermost last.
    pub frames: Vec<Vec<(Sym, Term)>>,
    pub residual: Vec<Obligation>,
    pub matched: usize,
    fresh: u32,
    synced: usize,
}

impl Default for SymState {
    fn default() -> Self {
        SymState::new()
    }
}

enum Atom {
    Pure(Term),
    Reg(Term, Term),
    Mem(Term, Term),
    Pred(Sym, Vec<Term>),
    Wand(Term, Sym, Vec<Term>),
}

/// Disjunctive normal form: each alternative lists its existentials and
/// atoms.
fn dnf(a: &Assertion) -> Vec<(Vec<(Sym, Sort)>, Vec<Atom>)> {
    match a {
        Assertion::Emp => vec![(vec![], vec![])],
        Assertion::Pure(t) => vec![(vec![], vec![Atom::Pure(t.clone())])],
        Assertion::Reg(k, v) => vec![(vec![], vec![Atom::Reg(k.clone(), v.clone())])],
        Assertion::Mem(x, v) => vec![(vec![], vec![Atom::Mem(x.clone(), v.clone())])],
        Assertion::Pred(n, xs) => vec![(vec![], vec![Atom::Pred(*n, xs.clone())])],
        Assertion::Wand(l, r) => {
            let (addr, p, args) = wand_parts(l, r);
            vec![(vec![], vec![Atom::Wand(addr, p, args)])]
        }
        Assertion::Star(l, r) => {
            let mut out = Vec::new();
            for (el, al) in dnf(l) {
                for (er, ar) in dnf(r) {
                    let mut e = el.clone();
                    e.extend(er);
                    let mut atoms: Vec<Atom> = al.iter().map(Atom::clone_atom).collect();
                    atoms.extend(ar);
                    out.push((e, atoms));
                }
            }
            out
        }
        Assertion::Exists(x, s, b) => dnf(b)
            .into_iter()
            .map(|(mut e, atoms)| {
                e.insert(0, (*x, s.clone()));
                (e, atoms)
            })
            .collect(),
        Assertion::Or(l, r) => {
            let mut out = dnf(l);
            out.extend(dnf(r));
            out
        }
    }
}

fn wand_parts(l: &Assertion, r: &Assertion) -> (Term, Sym, Vec<Term>) {
    let addr = match l {
        Assertion::Exists(_, _, b) => match &**b {
            Assertion::Mem(a, _) => a.clone(),
            _ => panic!("unsupported wand premise"),
        },
        _ => panic!("unsupported wand premise"),
    };
    match r {
        Assertion::Pred(p, xs) => (addr, *p, xs.clone()),
        _ => panic!("unsupported wand conclusion"),
    }
}

impl Atom {
    fn clone_atom(&self) -> Atom {
        match self {
            Atom::Pure(t) => Atom::Pure(t.clone()),
            Atom::Reg(k, v) => Atom::Reg(k.clone(), v.clone()),
            Atom::Mem(a, v) => Atom::Mem(a.clone(), v.clone()),
            Atom::Pred(n, xs) => Atom::Pred(*n, xs.clone()),
            Atom::Wand(a, p, xs) => Atom::Wand(a.clone(), *p, xs.clone()),
        }
    }
}

fn apply(sigma: &Subst, t: &Term) -> Term {
    t.subst_all(sigma)
}

fn bound(sigma: &Subst, x: Sym) -> bool {
    sigma.iter().any(|(y, _)| *y == x)
}

fn has_unbound(t: &Term, sigma: &Subst, pv: &BTreeSet<Sym>) -> bool {
    t.vars().into_iter().any(|x| pv.contains(&x) && !bound(sigma, x))
}

/// Values of a finite sort, if it is one.
pub fn finite_values(s: &Sort, types: &TypeEnv) -> Option<Vec<Value>> {
    match s {
        Sort::Bool => Some(vec![Value::Bool(true), Value::Bool(false)]),
        Sort::Enum(e) => types.enums.get(e).map(|vs| vs.iter().map(|v| Value::Enum(*v)).collect()),
        Sort::Unit => Some(vec![Value::Unit]),
        _ => None,
    }
}

impl SymState {
    pub fn new() -> SymState {
        SymState {
            heap: Vec::new(),
            solver: Solver::new(),
            sorts: BTreeMap::new(),
            frames: vec![Vec::new()],
            residual: Vec::new(),
            matched: 0,
            fresh: 0,
            synced: 0,
        }
    }

    pub fn feasible(&self) -> bool {
        !self.solver.infeasible
    }

    /// A fresh symbolic value of sort `s`. Records and tuples are built
    /// component-wise so projections normalize.
    pub fn fresh(&mut self, base: &str, s: &Sort, types: &TypeEnv) -> Term {
        match s {
            Sort::Unit => Term::Lit(Value::Unit),
            Sort::Record(fs) => Term::Record(
                fs.iter()
                    .map(|(n, fs)| (*n, self.fresh(&format!("{base}.{n}"), fs, types)))
                    .collect(),
            ),
            Sort::Tuple(ss) => Term::Tuple(
                ss.iter()
                    .enumerate()
                    .map(|(i, s)| self.fresh(&format!("{base}.{i}"), s, types))
                    .collect(),
            ),
            _ => {
                self.fresh += 1;
                let base = base.split('$').next().unwrap_or(base);
                let x = sym(&format!("{base}${}", self.fresh));
                self.sorts.insert(x, s.clone());
                if let Some(vs) = finite_values(s, types) {
                    self.solver.declare_finite(x, vs);
                }
                Term::Var(x)
            }
        }
    }

    pub fn resolve(&self, t: &Term) -> Term {
        self.solver.resolve(t)
    }

    pub fn assume(&mut self, t: &Term) -> bool {
        let ok = self.solver.assume(t);
        self.sync();
        ok
    }

    /// Pushes new substitutions into the heap and the variable frames.
    pub fn sync(&mut self) {
        if self.solver.solved.len() == self.synced || self.solver.infeasible {
            return;
        }
        self.synced = self.solver.solved.len();
        let solver = &self.solver;
        for c in &mut self.heap {
            *c = c.map(&|t| solver.resolve(t));
        }
        for fr in &mut self.frames {
            for (_, t) in fr.iter_mut() {
                *t = solver.resolve(t);
            }
        }
    }

    pub fn lookup(&self, x: Sym) -> Option<Term> {
        self.frames
            .last()
            .and_then(|fr| fr.iter().rev().find(|(n, _)| *n == x).map(|(_, t)| t.clone()))
    }

    pub fn bind(&mut self, x: Sym, t: Term) {
        self.frames.last_mut().expect("frame").push((x, t));
    }

    /// Records `goal` as a residual obligation unless it is provable, then
    /// assumes it.
    pub fn assert_pure(&mut self, goal: &Term) {
        let g = self.resolve(goal);
        if !self.solver.prove(&g) {
            self.residual.push(self.obligation(g.clone()));
        }
        self.assume(&g);
    }

    fn obligation(&self, goal: Term) -> Obligation {
        let mut facts: Vec<Term> = self
            .solver
            .solved
            .iter()
            .map(|(x, t)| eq(Term::Var(*x), t.clone()))
            .collect();
        facts.extend(self.solver.facts.iter().cloned());
        Obligation { facts, goal }
    }

    /// Records unproved goals with the current facts, then assumes them.
    pub fn record_residual(&mut self, goals: Vec<Term>) {
        for g in goals {
            let o = self.obligation(g.clone());
            self.residual.push(o);
            self.assume(&g);
        }
    }

    /// Adds the resources of `a`; one state per disjunct that is feasible.
    pub fn produce(&self, a: &Assertion, sigma: &Subst, types: &TypeEnv) -> Vec<SymState> {
        let mut out = Vec::new();
        for (exs, atoms) in dnf(a) {
            let mut st = self.clone();
            let mut sigma = sigma.clone();
            for (x, s) in exs {
                let v = st.fresh(x.as_str(), &s, types);
                sigma.push((x, v));
            }
            let r = |st: &SymState, t: &Term| st.resolve(&apply(&sigma, t));
            for atom in &atoms {
                let c = match atom {
                    Atom::Pure(t) => {
                        let t = r(&st, t);
                        st.assume(&t);
                        continue;
                    }
                    Atom::Reg(k, v) => Chunk::Reg(r(&st, k), r(&st, v)),
                    Atom::Mem(x, v) => Chunk::Mem(r(&st, x), r(&st, v)),
                    Atom::Pred(n, xs) => Chunk::Pred(*n, xs.iter().map(|t| r(&st, t)).collect()),
                    Atom::Wand(x, p, xs) => Chunk::Wand {
                        addr: r(&st, x),
                        pred: *p,
                        args: xs.iter().map(|t| r(&st, t)).collect(),
                    },
                };
                st.heap.push(c);
            }
            if st.feasible() {
                out.push(st);
            }
        }
        out
    }

    /// Removes the resources of `a`, binding the unbound pattern variables
    /// `pv` in `sigma`. Returns the pure goals that could not be proved.
    /// With several disjuncts the first one whose goals all hold wins, else
    /// the first that matched spatially.
    pub fn consume(
        &mut self,
        a: &Assertion,
        sigma: &mut Subst,
        pv: &BTreeMap<Sym, Sort>,
        types: &TypeEnv,
    ) -> Result<Vec<Term>, String> {
        let alts = dnf(a);
        let mut first_ok: Option<(SymState, Subst, Vec<Term>)> = None;
        let mut last_err = String::from("empty disjunction");
        let single = alts.len() == 1;
        for (exs, atoms) in alts {
            let mut st = self.clone();
            let mut s = sigma.clone();
            let mut pv = pv.clone();
            for (x, srt) in exs {
                s.retain(|(y, _)| *y != x);
                pv.insert(x, srt);
            }
            match st.consume_conj(&atoms, &mut s, &pv, types) {
                Ok(goals) => {
                    if goals.is_empty() || single {
                        *self = st;
                        *sigma = s;
                        return Ok(goals);
                    }
                    if first_ok.is_none() {
                        first_ok = Some((st, s, goals));
                    }
                }
                Err(e) => last_err = e,
            }
        }
        match first_ok {
            Some((st, s, goals)) => {
                *self = st;
                *sigma = s;
                Ok(goals)
            }
            None => Err(last_err),
        }
    }

    fn consume_conj(
        &mut self,
        atoms: &[Atom],
        sigma: &mut Subst,
        pvs: &BTreeMap<Sym, Sort>,
        types: &TypeEnv,
    ) -> Result<Vec<Term>, String> {
        let pv: BTreeSet<Sym> = pvs.keys().copied().collect();
        let mut goals = Vec::new();
        for atom in atoms {
            match atom {
                Atom::Pure(_) => {}
                Atom::Reg(k, v) => {
                    let i = self.find(sigma, &pv, &mut goals, |c| match c {
                        Chunk::Reg(k2, v2) => Some((vec![(k.clone(), k2.clone())], vec![(v.clone(), v2.clone())])),
                        _ => None,
                    });
                    match i {
                        Some(i) => {
                            self.heap.remove(i);
                        }
                        None => return Err(format!("no register chunk for {}", self.resolve(&apply(sigma, k)))),
                    }
                }
                Atom::Mem(x, v) => match self.find(sigma, &pv, &mut goals, |c| match c {
                    Chunk::Mem(x2, v2) => Some((vec![(x.clone(), x2.clone())], vec![(v.clone(), v2.clone())])),
                    _ => None,
                }) {
                    Some(i) => {
                        self.heap.remove(i);
                    }
                    None => return Err(format!("no memory chunk for address {}", self.resolve(&apply(sigma, x)))),
                },
                Atom::Pred(n, xs) => {
                    let precise = is_precise(*n);
                    let i = self.find(sigma, &pv, &mut goals, |c| match c {
                        Chunk::Pred(m, ys) if m == n && ys.len() == xs.len() => {
                            let pairs: Pairs = xs.iter().cloned().zip(ys.iter().cloned()).collect();
                            if precise {
                                Some((vec![], pairs))
                            } else {
                                Some((pairs, vec![]))
                            }
                        }
                        _ => None,
                    });
                    match i {
                        Some(i) => {
                            if !is_persistent(*n) {
                                self.heap.remove(i);
                            }
                        }
                        None => {
                            let args: Vec<String> =
                                xs.iter().map(|t| self.resolve(&apply(sigma, t)).to_string()).collect();
                            return Err(format!("no chunk for {n}({})", args.join(", ")));
                        }
                    }
                }
                Atom::Wand(x, p, xs) => match self.find(sigma, &pv, &mut goals, |c| match c {
                    Chunk::Wand { addr, pred, args } if pred == p && args.len() == xs.len() => {
                        Some((vec![(x.clone(), addr.clone())], xs.iter().cloned().zip(args.iter().cloned()).collect()))
                    }
                    _ => None,
                }) {
                    Some(i) => {
                        self.heap.remove(i);
                    }
                    None => return Err(format!("no wand for {p}")),
                },
            }
        }
        // Pure atoms, solving unbound variables first.
        let mut pending: Vec<Term> = atoms
            .iter()
            .filter_map(|a| match a {
                Atom::Pure(t) => Some(t.clone()),
                _ => None,
            })
            .collect();
        while !pending.is_empty() {
            let idx = pending
                .iter()
                .position(|t| !has_unbound(t, sigma, &pv))
                .or_else(|| pending.iter().position(|t| self.solve_pure(t, sigma, &pv)));
            match idx {
                Some(i) => {
                    let t = pending.remove(i);
                    let g = self.resolve(&apply(sigma, &t));
                    goals.push(g);
                }
                None => {
                    let t = pending.remove(0);
                    if !self.enumerate(&t, sigma, pvs, types) {
                        // Nothing fits; leave the goal unprovable.
                        for x in t.vars() {
                            if pv.contains(&x) && !bound(sigma, x) {
                                let v = self.fresh(x.as_str(), &pvs[&x], types);
                                sigma.push((x, v));
                            }
                        }
                    }
                    goals.push(self.resolve(&apply(sigma, &t)));
                }
            }
        }
        // Existentials that appear nowhere else are left unconstrained.
        let mut unproved = Vec::new();
        for g in goals {
            let g = self.resolve(&g);
            if !self.solver.prove(&g) {
                unproved.push(g);
            }
        }
        Ok(unproved)
    }

    /// Finds the first chunk whose `must` pairs unify with provable
    /// obligations; `loose` pairs unify with deferred obligations.
    fn find(
        &mut self,
        sigma: &mut Subst,
        pv: &BTreeSet<Sym>,
        goals: &mut Vec<Term>,
        sel: impl Fn(&Chunk) -> Option<(Pairs, Pairs)>,
    ) -> Option<usize> {
        for i in 0..self.heap.len() {
            let Some((must, loose)) = sel(&self.heap[i]) else { continue };
            let mut s = sigma.clone();
            let mut obl = Vec::new();
            let ok = must.iter().all(|(p, t)| self.unify(p, t, &mut s, pv, &mut obl))
                && obl.iter().all(|o| self.solver.prove(o));
            if !ok {
                continue;
            }
            let mut defer = Vec::new();
            if !loose.iter().all(|(p, t)| self.unify(p, t, &mut s, pv, &mut defer)) {
                continue;
            }
            *sigma = s;
            goals.extend(defer);
            self.matched += 1;
            return Some(i);
        }
        None
    }

    /// Matches pattern `p` against `t`. Equalities that cannot be decided
    /// syntactically are pushed to `obl`.
    pub(crate) fn unify(&self, p: &Term, t: &Term, sigma: &mut Subst, pv: &BTreeSet<Sym>, obl: &mut Vec<Term>) -> bool {
        let p = apply(sigma, p);
        if !has_unbound(&p, sigma, pv) {
            let (a, b) = (self.resolve(&p), self.resolve(t));
            if a != b {
                let g = self.resolve(&eq(a, b));
                if g.is_false() {
                    return false;
                }
                obl.push(g);
            }
            return true;
        }
        match &p {
            Term::Var(x) => {
                sigma.push((*x, self.resolve(t)));
                true
            }
            Term::Tuple(ps) => {
                let t = self.resolve(t);
                let parts: Vec<Term> = match &t {
                    Term::Tuple(ts) if ts.len() == ps.len() => ts.clone(),
                    Term::Lit(Value::Tuple(vs)) if vs.len() == ps.len() => vs.iter().cloned().map(Term::Lit).collect(),
                    Term::Var(_) | Term::Op(..) | Term::Proj(..) | Term::Field(..) | Term::If(..) => {
                        (0..ps.len()).map(|i| Term::Proj(Box::new(t.clone()), i)).collect()
                    }
                    _ => return false,
                };
                ps.iter().zip(parts.iter()).all(|(a, b)| self.unify(a, b, sigma, pv, obl))
            }
            Term::Ctor(c, ps) => {
                let t = self.resolve(t);
                let parts: Vec<Term> = match &t {
                    Term::Ctor(d, ts) if d == c && ts.len() == ps.len() => ts.clone(),
                    Term::Lit(Value::Ctor(d, vs)) if d == c && vs.len() == ps.len() => {
                        vs.iter().cloned().map(Term::Lit).collect()
                    }
                    _ => return false,
                };
                ps.iter().zip(parts.iter()).all(|(a, b)| self.unify(a, b, sigma, pv, obl))
            }
            Term::Record(ps) => {
                let t = self.resolve(t);
                ps.iter().all(|(f, a)| {
                    let b = self.resolve(&Term::Field(Box::new(t.clone()), *f));
                    self.unify(a, &b, sigma, pv, obl)
                })
            }
            _ => false,
        }
    }

    /// Binds unbound variables of a pure atom from an equation or a fact.
    fn solve_pure(&self, t: &Term, sigma: &mut Subst, pv: &BTreeSet<Sym>) -> bool {
        let t = apply(sigma, t);
        if let Term::Op(crate::value::Op::Eq, xs) = &t {
            for (a, b) in [(&xs[0], &xs[1]), (&xs[1], &xs[0])] {
                if let Term::Var(x) = a {
                    if pv.contains(x) && !bound(sigma, *x) && !has_unbound(b, sigma, pv) {
                        sigma.push((*x, self.resolve(b)));
                        return true;
                    }
                }
            }
        }
        for f in &self.solver.facts {
            let mut s = sigma.clone();
            let mut obl = Vec::new();
            if self.unify(&t, f, &mut s, pv, &mut obl) && obl.is_empty() {
                *sigma = s;
                return true;
            }
        }
        false
    }

    /// Tries values of the finite unbound variables of `t` until `t` is
    /// provable.
    fn enumerate(&self, t: &Term, sigma: &mut Subst, pvs: &BTreeMap<Sym, Sort>, types: &TypeEnv) -> bool {
        let t = apply(sigma, t);
        let free: Vec<Sym> = t
            .vars()
            .into_iter()
            .filter(|x| pvs.contains_key(x) && !bound(sigma, *x))
            .collect();
        let mut doms = Vec::new();
        for x in &free {
            match finite_values(&pvs[x], types) {
                Some(vs) => doms.push(vs),
                None => return false,
            }
        }
        if doms.iter().map(Vec::len).product::<usize>() > 64 {
            return false;
        }
        let mut idx = vec![0usize; free.len()];
        loop {
            let m: Subst = free
                .iter()
                .zip(&idx)
                .enumerate()
                .map(|(k, (x, &i))| (*x, Term::Lit(doms[k][i].clone())))
                .collect();
            if self.solver.prove(&t.subst_all(&m)) {
                sigma.extend(m);
                return true;
            }
            // Odometer increment.
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return false;
                }
                idx[k] += 1;
                if idx[k] < doms[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    /// Register and memory chunks left over.
    pub fn leaks(&self) -> Vec<String> {
        self.heap.iter().filter(|c| c.is_resource()).map(|c| c.to_string()).collect()
    }
}

/// Concrete check of `a` against a machine state. Existentials bind by
/// matching against the state; logical-relation predicates and wands have
/// no concrete content and hold.
pub fn holds(a: &Assertion, st: &MachineState, sigma: &mut Vec<(Sym, Value)>) -> bool {
    for (_, atoms) in dnf(a) {
        let mut s = sigma.clone();
        if holds_conj(&atoms, st, &mut s) {
            *sigma = s;
            return true;
        }
    }
    false
}

fn holds_conj(atoms: &[Atom], st: &MachineState, sigma: &mut Vec<(Sym, Value)>) -> bool {
    for atom in atoms {
        let ok = match atom {
            Atom::Pure(_) => true,
            Atom::Reg(k, v) => match eval_in(k, sigma).and_then(|k| k.as_enum()) {
                Some(r) => match st.reg(r) {
                    Some(val) => match_value(v, val, sigma),
                    None => false,
                },
                None => false,
            },
            Atom::Mem(x, v) => {
                let addr = match eval_in(x, sigma) {
                    Some(Value::Bits(b)) => b as u64,
                    Some(Value::Int(i)) if i >= 0 => i as u64,
                    _ => return false,
                };
                match st.peek(addr) {
                    Some(val) => match_value(v, &val, sigma),
                    None => false,
                }
            }
            Atom::Pred(n, xs) => match n.as_str() {
                "GPRs" => match_value(&xs[0], &gpr_tuple(st), sigma),
                "PMP_entries" => match pmp_entries(st) {
                    Some(es) => match_value(&xs[0], &es, sigma),
                    None => false,
                },
                _ => true,
            },
            Atom::Wand(..) => true,
        };
        if !ok {
            return false;
        }
    }
    let mut pending: Vec<&Term> = atoms
        .iter()
        .filter_map(|a| match a {
            Atom::Pure(t) => Some(t),
            _ => None,
        })
        .collect();
    while !pending.is_empty() {
        let before = pending.len();
        let mut i = 0;
        while i < pending.len() {
            let t = pending[i];
            if let Some(v) = eval_in(t, sigma) {
                if v != Value::Bool(true) {
                    return false;
                }
                pending.remove(i);
                continue;
            }
            // `x = t` with x unbound.
            if let Term::Op(crate::value::Op::Eq, xs) = t {
                let bind = |a: &Term, b: &Term, sigma: &mut Vec<(Sym, Value)>| match (a, eval_in(b, sigma)) {
                    (Term::Var(x), Some(v)) if !sigma.iter().any(|(y, _)| y == x) => {
                        sigma.push((*x, v));
                        true
                    }
                    _ => false,
                };
                if bind(&xs[0], &xs[1], sigma) || bind(&xs[1], &xs[0], sigma) {
                    pending.remove(i);
                    continue;
                }
            }
            i += 1;
        }
        if pending.len() == before {
            return false;
        }
    }
    true
}

fn eval_in(t: &Term, sigma: &[(Sym, Value)]) -> Option<Value> {
    t.eval(&|x| sigma.iter().rev().find(|(y, _)| *y == x).map(|(_, v)| v.clone())).ok()
}

fn match_value(p: &Term, v: &Value, sigma: &mut Vec<(Sym, Value)>) -> bool {
    if let Some(pv) = eval_in(p, sigma) {
        return &pv == v;
    }
    match (p, v) {
        (Term::Var(x), _) => {
            sigma.push((*x, v.clone()));
            true
        }
        (Term::Tuple(ps), Value::Tuple(vs)) if ps.len() == vs.len() => {
            ps.iter().zip(vs).all(|(p, v)| match_value(p, v, sigma))
        }
        (Term::Ctor(c, ps), Value::Ctor(d, vs)) if c == d && ps.len() == vs.len() => {
            ps.iter().zip(vs).all(|(p, v)| match_value(p, v, sigma))
        }
        (Term::Record(ps), Value::Record(_)) => ps.iter().all(|(f, p)| match v.field(*f) {
            Some(fv) => match_value(p, fv, sigma),
            None => false,
        }),
        _ => false,
    }
}

/// The packed register file `x1..x31` of a RISC-V state.
pub fn gpr_tuple(st: &MachineState) -> Value {
    Value::Tuple(
        (1..32)
            .map(|i| st.reg_str(&format!("x{i}")).cloned().unwrap_or(Value::Bits(0)))
            .collect(),
    )
}

pub fn pmp_entries(st: &MachineState) -> Option<Value> {
    let r = |n: &str| st.reg_str(n).cloned();
    Some(Value::Tuple(vec![
        Value::Tuple(vec![r("pmp0cfg")?, r("pmpaddr0")?]),
        Value::Tuple(vec![r("pmp1cfg")?, r("pmpaddr1")?]),
    ]))
}

#[cfg(test)]
mod tests {
    use super::build::*;
    use super::*;
    use crate::machine::Isa;
    use crate::term::{int, var};

    fn cap(p: Term, b: Term, e: Term, a: Term) -> Term {
        Term::Ctor(sym("cap"), vec![p, b, e, a])
    }

    #[test]
    fn consume_binds_existentials() {
        let types = TypeEnv::default();
        let mut st = SymState::new();
        let w = st.fresh("w", &Sort::Any, &types);
        st.heap.push(Chunk::Reg(Term::Lit(Value::enm("R1")), w.clone()));
        st.heap.push(Chunk::Pred(sym("V"), vec![w.clone()]));
        let a = exists("c", Sort::Any, star(vec![reg("R1", var("c")), pred("V", vec![var("c")])]));
        let mut sigma = Vec::new();
        let goals = st.consume(&a, &mut sigma, &BTreeMap::new(), &types).unwrap();
        assert!(goals.is_empty());
        assert!(st.leaks().is_empty());
        // V is persistent and stays.
        assert_eq!(st.heap.len(), 1);
        assert_eq!(st.matched, 2);
    }

    #[test]
    fn missing_chunk_fails() {
        let types = TypeEnv::default();
        let mut st = SymState::new();
        let r = st.consume(&reg("pc", int(0)), &mut Vec::new(), &BTreeMap::new(), &types);
        assert!(r.is_err());
    }

    #[test]
    fn value_mismatch_is_a_goal() {
        let types = TypeEnv::default();
        let mut st = SymState::new();
        let x = st.fresh("x", &Sort::Int, &types);
        st.heap.push(Chunk::Reg(Term::Lit(Value::enm("pc")), x));
        let goals = st.consume(&reg("pc", int(3)), &mut Vec::new(), &BTreeMap::new(), &types).unwrap();
        assert_eq!(goals.len(), 1);
    }

    #[test]
    fn angelic_disjunct_choice() {
        let types = TypeEnv::default();
        let mut st = SymState::new();
        st.heap.push(Chunk::Pred(sym("E"), vec![int(1)]));
        let a = or(pred("V", vec![int(1)]), pred("E", vec![int(1)]));
        assert!(st.consume(&a, &mut Vec::new(), &BTreeMap::new(), &types).is_ok());
    }

    #[test]
    fn concrete_check_of_cap_register() {
        let st = MachineState::new(Isa::MinimalCaps, 16);
        let a = exists(
            "p",
            Sort::Any,
            star(vec![
                reg("pc", cap(var("p"), int(0), var("e"), int(0))),
                pure(crate::term::eq(var("p"), Term::Lit(Value::enm("RW")))),
            ]),
        );
        let mut sigma = vec![(sym("e"), Value::Int(15))];
        assert!(holds(&a, &st, &mut sigma));
        let mut sigma = vec![(sym("e"), Value::Int(3))];
        assert!(!holds(&a, &st, &mut sigma));
    }
}
