//! Symbolic execution of core programs against contracts, verification
//! conditions and the per-function verification report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::ast::{Arm, Body, Pattern, Program, Stm, StmKind};
use crate::machine::{Isa, MachineState};
use crate::seplogic::{Assertion, Chunk, Contract, Obligation, Subst, SymState};
use crate::solver::Solver;
use crate::sym::{sym, Sym};
use crate::term::{eq, not, Term};
use crate::value::{Sort, Value};

const MAX_INLINE_DEPTH: usize = 64;

/// Verification condition left after symbolic execution.
#[derive(Clone, Debug, PartialEq)]
pub enum Vc {
    ForAll(Vec<Sym>, Box<Vc>),
    Assume(Term, Box<Vc>),
    Assert(Term),
    Branch(Vec<Vc>),
    Trivial,
    Unprovable(String),
}

impl Vc {
    fn from_obligation(o: &Obligation) -> Vc {
        let mut vars = BTreeSet::new();
        o.goal.free_vars(&mut vars);
        for f in &o.facts {
            f.free_vars(&mut vars);
        }
        let mut body = Vc::Assert(o.goal.clone());
        for f in o.facts.iter().rev() {
            body = Vc::Assume(f.clone(), Box::new(body));
        }
        if vars.is_empty() {
            body
        } else {
            Vc::ForAll(vars.into_iter().collect(), Box::new(body))
        }
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self, Vc::Trivial)
    }
}

/// Simplifies a VC, discharging the assertions the solver can prove.
pub fn solve(vc: &Vc) -> Vc {
    solve_in(vc, &Solver::new())
}

fn solve_in(vc: &Vc, s: &Solver) -> Vc {
    match vc {
        Vc::Trivial => Vc::Trivial,
        Vc::Unprovable(m) => Vc::Unprovable(m.clone()),
        Vc::ForAll(xs, b) => match solve_in(b, s) {
            Vc::Trivial => Vc::Trivial,
            b => Vc::ForAll(xs.clone(), Box::new(b)),
        },
        Vc::Assume(t, b) => {
            let mut s2 = s.clone();
            if !s2.assume(t) {
                return Vc::Trivial;
            }
            match solve_in(b, &s2) {
                Vc::Trivial => Vc::Trivial,
                b => Vc::Assume(t.clone(), Box::new(b)),
            }
        }
        Vc::Assert(t) => {
            if s.prove(t) {
                Vc::Trivial
            } else {
                Vc::Assert(s.resolve(t))
            }
        }
        Vc::Branch(bs) => {
            let bs: Vec<Vc> = bs.iter().map(|b| solve_in(b, s)).filter(|b| !b.is_trivial()).collect();
            match bs.len() {
                0 => Vc::Trivial,
                1 => bs.into_iter().next().unwrap(),
                _ => Vc::Branch(bs),
            }
        }
    }
}

/// Evaluates a VC under a valuation of its universally quantified
/// variables. `None` if some variable is unassigned.
pub fn eval_vc_ground(vc: &Vc, val: &dyn Fn(Sym) -> Option<Value>) -> Option<bool> {
    Some(match vc {
        Vc::Trivial => true,
        Vc::Unprovable(_) => false,
        Vc::ForAll(_, b) => eval_vc_ground(b, val)?,
        Vc::Assume(t, b) => match t.eval(val).ok()? {
            Value::Bool(false) => true,
            Value::Bool(true) => eval_vc_ground(b, val)?,
            _ => return None,
        },
        Vc::Assert(t) => t.eval(val).ok()?.as_bool()?,
        Vc::Branch(bs) => {
            for b in bs {
                if !eval_vc_ground(b, val)? {
                    return Some(false);
                }
            }
            true
        }
    })
}

impl fmt::Display for Vc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vc::Trivial => write!(f, "true"),
            Vc::Unprovable(m) => write!(f, "(unprovable {m:?})"),
            Vc::Assert(t) => write!(f, "{t}"),
            Vc::Assume(t, b) => write!(f, "(=> {t} {b})"),
            Vc::ForAll(xs, b) => {
                write!(f, "(forall (")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ") {b})")
            }
            Vc::Branch(bs) => {
                write!(f, "(and")?;
                for b in bs {
                    write!(f, " {b}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Verified,
    Residual(Vc),
    Failed(String),
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Verified => "verified",
            Status::Residual(_) => "residual",
            Status::Failed(_) => "failed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyResult {
    pub function: String,
    pub status: Status,
    pub paths: usize,
    pub chunks_matched: usize,
    pub millis: u128,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub function: String,
    pub status: String,
    pub paths: usize,
    pub chunks_matched: usize,
    pub residual: Option<String>,
    pub millis: u128,
}

impl From<&VerifyResult> for ReportRow {
    fn from(r: &VerifyResult) -> ReportRow {
        ReportRow {
            function: r.function.clone(),
            status: r.status.label().to_string(),
            paths: r.paths,
            chunks_matched: r.chunks_matched,
            residual: match &r.status {
                Status::Residual(vc) => Some(vc.to_string()),
                Status::Failed(m) => Some(m.clone()),
                Status::Verified => None,
            },
            millis: r.millis,
        }
    }
}

/// Outcome of one symbolic path.
#[derive(Clone, Debug)]
pub enum Flow {
    Val(SymState, Term),
    /// The path stopped at a failure that the program treats as safe.
    Halt(SymState),
    Err(SymState, String),
}

pub struct Exec<'p> {
    pub prog: &'p Program,
    depth: usize,
    scratch: MachineState,
}

impl<'p> Exec<'p> {
    pub fn new(prog: &'p Program) -> Exec<'p> {
        Exec {
            prog,
            depth: 0,
            scratch: MachineState::new(Isa::MinimalCaps, 0),
        }
    }

    fn fail(&self, st: SymState, msg: String) -> Flow {
        if self.prog.safe_failure {
            Flow::Halt(st)
        } else {
            Flow::Err(st, msg)
        }
    }

    fn then(&mut self, flows: Vec<Flow>, mut k: impl FnMut(&mut Self, SymState, Term) -> Vec<Flow>) -> Vec<Flow> {
        let mut out = Vec::new();
        for fl in flows {
            match fl {
                Flow::Val(st, v) => out.extend(k(self, st, v)),
                other => out.push(other),
            }
        }
        out
    }

    /// Evaluates statements left to right; each element is a path with the
    /// argument terms or a terminated path.
    fn exec_list(&mut self, st: SymState, xs: &[Stm]) -> Vec<Result<(SymState, Vec<Term>), Flow>> {
        let mut acc: Vec<Result<(SymState, Vec<Term>), Flow>> = vec![Ok((st, Vec::new()))];
        for x in xs {
            let mut next = Vec::new();
            for item in acc {
                match item {
                    Ok((st, vs)) => {
                        for fl in self.exec(st, x) {
                            match fl {
                                Flow::Val(st, v) => {
                                    let mut vs = vs.clone();
                                    vs.push(v);
                                    next.push(Ok((st, vs)));
                                }
                                other => next.push(Err(other)),
                            }
                        }
                    }
                    Err(f) => next.push(Err(f)),
                }
            }
            acc = next;
        }
        acc
    }

    fn with_list(
        &mut self,
        st: SymState,
        xs: &[Stm],
        mut k: impl FnMut(&mut Self, SymState, Vec<Term>) -> Vec<Flow>,
    ) -> Vec<Flow> {
        let mut out = Vec::new();
        for item in self.exec_list(st, xs) {
            match item {
                Ok((st, vs)) => out.extend(k(self, st, vs)),
                Err(f) => out.push(f),
            }
        }
        out
    }

    pub fn exec(&mut self, st: SymState, s: &Stm) -> Vec<Flow> {
        use StmKind::*;
        match &s.kind {
            Lit(v) => vec![Flow::Val(st, Term::Lit(v.clone()))],
            Var(x) => match st.lookup(*x) {
                Some(t) => {
                    let t = st.resolve(&t);
                    vec![Flow::Val(st, t)]
                }
                None => vec![Flow::Err(st, format!("unbound variable {x}"))],
            },
            Let(x, e, b) => {
                let flows = self.exec(st, e);
                self.then(flows, |me, mut st, v| {
                    let mark = st.frames.last().map_or(0, Vec::len);
                    st.bind(*x, v);
                    let out = me.exec(st, b);
                    out.into_iter().map(|fl| pop_to(fl, mark)).collect()
                })
            }
            Seq(a, b) => {
                let flows = self.exec(st, a);
                self.then(flows, |me, st, _| me.exec(st, b))
            }
            CallInternal(f, xs) | CallForeign(f, xs) => self.with_list(st, xs, |me, st, vs| me.call(st, *f, vs)),
            LemmaInvoke(l, xs) => self.with_list(st, xs, |me, st, vs| me.lemma(st, *l, vs)),
            Assert(c, msg) => {
                let flows = self.exec(st, c);
                self.then(flows, |me, st, t| {
                    let t = st.resolve(&t);
                    let mut out = Vec::new();
                    let mut bad = st.clone();
                    if bad.assume(&not(t.clone())) {
                        out.push(me.fail(bad, format!("assertion failed: {msg}")));
                    }
                    let mut good = st;
                    if good.assume(&t) {
                        out.push(Flow::Val(good, Term::Lit(Value::Unit)));
                    }
                    out
                })
            }
            Match(x, arms) => {
                let flows = self.exec(st, x);
                self.then(flows, |me, st, t| me.match_term(st, t, arms))
            }
            RecordGet(r, f) => {
                let flows = self.exec(st, r);
                self.then(flows, |_, st, t| {
                    let v = st.resolve(&Term::Field(Box::new(t), *f));
                    vec![Flow::Val(st, v)]
                })
            }
            RecordSet(r, f, v) => self.with_list(st, &[(**r).clone(), (**v).clone()], |_, st, vs| {
                let rec = st.resolve(&vs[0]);
                let fields: Option<Vec<(Sym, Term)>> = match &rec {
                    Term::Record(fs) => Some(fs.clone()),
                    Term::Lit(Value::Record(fs)) => {
                        Some(fs.iter().map(|(n, v)| (*n, Term::Lit(v.clone()))).collect())
                    }
                    _ => None,
                };
                match fields {
                    Some(mut fs) => {
                        match fs.iter_mut().find(|(n, _)| n == f) {
                            Some(slot) => slot.1 = vs[1].clone(),
                            None => return vec![Flow::Err(st, format!("no field {f}"))],
                        }
                        let t = st.resolve(&Term::Record(fs));
                        vec![Flow::Val(st, t)]
                    }
                    None => vec![Flow::Err(st, format!("record update on opaque value {rec}"))],
                }
            }),
            TupleProject(x, i) => {
                let flows = self.exec(st, x);
                self.then(flows, |_, st, t| {
                    let v = st.resolve(&Term::Proj(Box::new(t), *i));
                    vec![Flow::Val(st, v)]
                })
            }
            Tuple(xs) => self.with_list(st, xs, |_, st, vs| {
                let t = st.resolve(&Term::Tuple(vs));
                vec![Flow::Val(st, t)]
            }),
            Ctor(c, xs) => self.with_list(st, xs, |_, st, vs| {
                let t = st.resolve(&Term::Ctor(*c, vs));
                vec![Flow::Val(st, t)]
            }),
            Prim(o, xs) => self.with_list(st, xs, |_, st, vs| {
                let t = st.resolve(&Term::Op(*o, vs));
                vec![Flow::Val(st, t)]
            }),
            If(c, a, b) => {
                let flows = self.exec(st, c);
                self.then(flows, |me, st, t| {
                    let t = st.resolve(&t);
                    let mut out = Vec::new();
                    let mut yes = st.clone();
                    if yes.assume(&t) {
                        out.extend(me.exec(yes, a));
                    }
                    let mut no = st;
                    if no.assume(&not(t)) {
                        out.extend(me.exec(no, b));
                    }
                    out
                })
            }
            ReadReg(r) => {
                let key = Term::Lit(Value::Enum(*r));
                match st.heap.iter().find_map(|c| match c {
                    Chunk::Reg(k, v) if *k == key => Some(v.clone()),
                    _ => None,
                }) {
                    Some(v) => vec![Flow::Val(st, v)],
                    None => vec![Flow::Err(st, format!("no ownership of register {r}"))],
                }
            }
            WriteReg(r, e) => {
                let flows = self.exec(st, e);
                self.then(flows, |_, mut st, v| {
                    let key = Term::Lit(Value::Enum(*r));
                    match st.heap.iter_mut().find(|c| matches!(c, Chunk::Reg(k, _) if *k == key)) {
                        Some(Chunk::Reg(_, slot)) => {
                            *slot = v;
                            vec![Flow::Val(st, Term::Lit(Value::Unit))]
                        }
                        _ => vec![Flow::Err(st, format!("no ownership of register {r}"))],
                    }
                })
            }
            Fail(m) => vec![self.fail(st, format!("fail: {m}"))],
        }
    }

    fn match_term(&mut self, st: SymState, t: Term, arms: &[Arm]) -> Vec<Flow> {
        let t = st.resolve(&t);
        // Split symbolic unions and finite enums into their cases.
        if let Term::Var(x) = &t {
            if let Some(Sort::Union(u)) = st.sorts.get(x).cloned() {
                let ctors = self.prog.types.unions.get(&u).cloned().unwrap_or_default();
                let mut out = Vec::new();
                for (c, fs) in ctors {
                    let mut s2 = st.clone();
                    let fields: Vec<Term> = fs
                        .iter()
                        .enumerate()
                        .map(|(i, srt)| s2.fresh(&format!("{}{i}", c.as_str().to_lowercase()), srt, &self.prog.types))
                        .collect();
                    if s2.assume(&eq(t.clone(), Term::Ctor(c, fields.clone()))) {
                        let v = s2.resolve(&Term::Ctor(c, fields));
                        out.extend(self.match_concrete(s2, v, arms));
                    }
                }
                return out;
            }
            if let Some(vals) = st.solver.domains.get(x).cloned() {
                let mut out = Vec::new();
                for v in vals {
                    let mut s2 = st.clone();
                    if s2.assume(&eq(t.clone(), Term::Lit(v.clone()))) {
                        out.extend(self.match_concrete(s2, Term::Lit(v), arms));
                    }
                }
                return out;
            }
        }
        self.match_concrete(st, t, arms)
    }

    /// Matches arms in order; literal arms against a symbolic scrutinee
    /// branch on equality.
    fn match_concrete(&mut self, st: SymState, t: Term, arms: &[Arm]) -> Vec<Flow> {
        let mut out = Vec::new();
        let mut cur = st;
        for arm in arms {
            let mark = cur.frames.last().map_or(0, Vec::len);
            match &arm.pat {
                Pattern::Wild => {
                    out.extend(self.exec(cur, &arm.body));
                    return out;
                }
                Pattern::Bind(x) => {
                    cur.bind(*x, t.clone());
                    out.extend(self.exec(cur, &arm.body).into_iter().map(|f| pop_to(f, mark)));
                    return out;
                }
                Pattern::Lit(v) => {
                    let c = cur.resolve(&eq(t.clone(), Term::Lit(v.clone())));
                    match c.as_bool() {
                        Some(true) => {
                            out.extend(self.exec(cur, &arm.body));
                            return out;
                        }
                        Some(false) => continue,
                        None => {
                            let mut yes = cur.clone();
                            if yes.assume(&c) {
                                out.extend(self.exec(yes, &arm.body));
                            }
                            if !cur.assume(&not(c)) {
                                return out;
                            }
                        }
                    }
                }
                Pattern::Ctor(c, xs) => {
                    let fields: Option<Vec<Term>> = match &t {
                        Term::Ctor(d, ts) if d == c => Some(ts.clone()),
                        Term::Lit(Value::Ctor(d, vs)) if d == c => Some(vs.iter().cloned().map(Term::Lit).collect()),
                        Term::Ctor(..) | Term::Lit(Value::Ctor(..)) => None,
                        _ => {
                            out.push(Flow::Err(cur, format!("cannot match {t} against constructor {c}")));
                            return out;
                        }
                    };
                    if let Some(fs) = fields {
                        if fs.len() != xs.len() {
                            out.push(Flow::Err(cur, format!("arity mismatch for {c}")));
                            return out;
                        }
                        for (x, f) in xs.iter().zip(fs) {
                            cur.bind(*x, f);
                        }
                        out.extend(self.exec(cur, &arm.body).into_iter().map(|f| pop_to(f, mark)));
                        return out;
                    }
                }
                Pattern::Tuple(xs) => {
                    for (i, x) in xs.iter().enumerate() {
                        let p = cur.resolve(&Term::Proj(Box::new(t.clone()), i));
                        cur.bind(*x, p);
                    }
                    out.extend(self.exec(cur, &arm.body).into_iter().map(|f| pop_to(f, mark)));
                    return out;
                }
            }
        }
        out.push(self.fail(cur, format!("no match arm for {t}")));
        out
    }

    pub fn call(&mut self, st: SymState, f: Sym, args: Vec<Term>) -> Vec<Flow> {
        let prog = self.prog;
        let Some(decl) = prog.functions.get(&f) else {
            return vec![Flow::Err(st, format!("call to unknown function {f}"))];
        };
        // A pure foreign function on literal arguments is simply evaluated.
        if let (Body::Foreign { pure: true }, Some(run)) = (&decl.body, prog.runtime.get(&f)) {
            let vals: Option<Vec<Value>> = args.iter().map(|a| a.as_lit().cloned()).collect();
            if let Some(vs) = vals {
                return match run(&mut self.scratch, &vs) {
                    Ok(v) => vec![Flow::Val(st, Term::Lit(v))],
                    Err(m) => vec![self.fail(st, m)],
                };
            }
        }
        if let Some(c) = prog.contracts.get(&f) {
            if !prog.inline.contains(&f) {
                return self.call_contract(st, c, &decl.ret, args);
            }
        }
        match &decl.body {
            Body::Internal(body) => {
                if self.depth >= MAX_INLINE_DEPTH {
                    return vec![Flow::Err(st, format!("inlining depth exceeded at {f}"))];
                }
                let mut st = st;
                st.frames.push(decl.params.iter().map(|(n, _)| *n).zip(args).collect());
                self.depth += 1;
                let out = self.exec(st, body);
                self.depth -= 1;
                out.into_iter()
                    .map(|fl| match fl {
                        Flow::Val(mut st, v) => {
                            st.frames.pop();
                            Flow::Val(st, v)
                        }
                        Flow::Halt(mut st) => {
                            st.frames.pop();
                            Flow::Halt(st)
                        }
                        Flow::Err(mut st, m) => {
                            st.frames.pop();
                            Flow::Err(st, m)
                        }
                    })
                    .collect()
            }
            Body::Foreign { .. } => {
                vec![Flow::Err(st, format!("foreign function {f} has no contract"))]
            }
        }
    }

    fn call_contract(&mut self, mut st: SymState, c: &Contract, ret: &Sort, args: Vec<Term>) -> Vec<Flow> {
        let types = &self.prog.types;
        let pv: BTreeMap<Sym, Sort> = c.logic_vars.iter().cloned().collect();
        let pvs: BTreeSet<Sym> = pv.keys().copied().collect();
        let mut sigma: Subst = Vec::new();
        let mut goals = Vec::new();
        for (p, a) in c.args.iter().zip(&args) {
            if !st.unify(p, a, &mut sigma, &pvs, &mut goals) {
                return vec![Flow::Err(st, format!("argument {a} does not match {p}"))];
            }
        }
        for g in goals {
            st.assert_pure(&g);
        }
        match st.consume(&c.pre, &mut sigma, &pv, types) {
            Ok(goals) => st.record_residual(goals),
            Err(m) => return vec![Flow::Err(st, format!("precondition: {m}"))],
        }
        for (x, s) in &c.logic_vars {
            if !sigma.iter().any(|(y, _)| y == x) {
                let v = st.fresh(x.as_str(), s, types);
                sigma.push((*x, v));
            }
        }
        let r = st.fresh(c.result.as_str(), ret, types);
        sigma.push((c.result, r.clone()));
        st.produce(&c.post, &sigma, types)
            .into_iter()
            .map(|s| {
                let v = s.resolve(&r);
                Flow::Val(s, v)
            })
            .collect()
    }

    fn lemma(&mut self, mut st: SymState, l: Sym, args: Vec<Term>) -> Vec<Flow> {
        let types = &self.prog.types;
        let Some(decl) = self.prog.lemmas.get(&l) else {
            return vec![Flow::Err(st, format!("unknown lemma {l}"))];
        };
        let pv: BTreeMap<Sym, Sort> = decl.logic_vars.iter().cloned().collect();
        let pvs: BTreeSet<Sym> = pv.keys().copied().collect();
        let mut sigma: Subst = Vec::new();
        let mut goals = Vec::new();
        for (p, a) in decl.params.iter().zip(&args) {
            if !st.unify(p, a, &mut sigma, &pvs, &mut goals) {
                return vec![Flow::Err(st, format!("lemma {l}: argument {a} does not match {p}"))];
            }
        }
        for g in goals {
            st.assert_pure(&g);
        }
        match st.consume(&decl.pre, &mut sigma, &pv, types) {
            Ok(goals) => st.record_residual(goals),
            Err(m) => return vec![Flow::Err(st, format!("lemma {l}: {m}"))],
        }
        for (x, s) in &decl.logic_vars {
            if !sigma.iter().any(|(y, _)| y == x) {
                let v = st.fresh(x.as_str(), s, types);
                sigma.push((*x, v));
            }
        }
        st.produce(&decl.post, &sigma, types)
            .into_iter()
            .map(|s| Flow::Val(s, Term::Lit(Value::Unit)))
            .collect()
    }
}

fn pop_to(fl: Flow, mark: usize) -> Flow {
    let fix = |st: &mut SymState| {
        if let Some(fr) = st.frames.last_mut() {
            fr.truncate(mark);
        }
    };
    match fl {
        Flow::Val(mut st, v) => {
            fix(&mut st);
            Flow::Val(st, v)
        }
        Flow::Halt(mut st) => {
            fix(&mut st);
            Flow::Halt(st)
        }
        Flow::Err(mut st, m) => {
            fix(&mut st);
            Flow::Err(st, m)
        }
    }
}

/// Result of running a body from a produced precondition and consuming the
/// postcondition on every path.
pub struct PathSummary {
    pub paths: usize,
    pub matched: usize,
    pub residual: Vec<Obligation>,
    pub errors: Vec<String>,
}

/// Consumes `post` on every normal path, checking for leaked registers and
/// memory. `sigma` binds the contract's logic variables.
pub fn close_paths(
    prog: &Program,
    flows: Vec<Flow>,
    result: Sym,
    post: &Assertion,
    sigma: &Subst,
) -> PathSummary {
    let mut sum = PathSummary {
        paths: 0,
        matched: 0,
        residual: Vec::new(),
        errors: Vec::new(),
    };
    for fl in flows {
        sum.paths += 1;
        match fl {
            Flow::Val(mut st, v) => {
                let mut s = sigma.clone();
                s.push((result, v));
                match st.consume(post, &mut s, &BTreeMap::new(), &prog.types) {
                    Ok(goals) => st.record_residual(goals),
                    Err(m) => {
                        sum.errors.push(format!("postcondition: {m}"));
                        continue;
                    }
                }
                let leaks = st.leaks();
                if !leaks.is_empty() {
                    sum.errors.push(format!("leaked: {}", leaks.join(", ")));
                }
                sum.matched += st.matched;
                sum.residual.extend(st.residual);
            }
            Flow::Halt(st) => {
                sum.matched += st.matched;
                sum.residual.extend(st.residual);
            }
            Flow::Err(_, m) => sum.errors.push(m),
        }
    }
    sum
}

pub fn status_of(sum: &PathSummary) -> Status {
    if let Some(e) = sum.errors.first() {
        return Status::Failed(e.clone());
    }
    let vc = Vc::Branch(sum.residual.iter().map(Vc::from_obligation).collect());
    match solve(&vc) {
        Vc::Trivial => Status::Verified,
        vc => Status::Residual(vc),
    }
}

/// Symbolically executes `f` against its contract.
pub fn verify_contract(prog: &Program, f: &str) -> VerifyResult {
    let start = Instant::now();
    let name = sym(f);
    let res = |status: Status, paths, matched| VerifyResult {
        function: f.to_string(),
        status,
        paths,
        chunks_matched: matched,
        millis: start.elapsed().as_millis(),
    };
    let (Some(decl), Some(c)) = (prog.functions.get(&name), prog.contracts.get(&name)) else {
        return res(Status::Failed(format!("no contract for {f}")), 0, 0);
    };
    let Body::Internal(body) = &decl.body else {
        return res(Status::Failed(format!("{f} is foreign")), 0, 0);
    };
    let mut st = SymState::new();
    let mut sigma: Subst = Vec::new();
    for (x, s) in &c.logic_vars {
        let v = st.fresh(x.as_str(), s, &prog.types);
        sigma.push((*x, v));
    }
    let args: Vec<Term> = c.args.iter().map(|a| st.resolve(&a.subst_all(&sigma))).collect();
    st.frames = vec![decl.params.iter().map(|(n, _)| *n).zip(args).collect()];
    let mut flows = Vec::new();
    let mut exec = Exec::new(prog);
    for s in st.produce(&c.pre, &sigma, &prog.types) {
        flows.extend(exec.exec(s, body));
    }
    let sum = close_paths(prog, flows, c.result, &c.post, &sigma);
    res(status_of(&sum), sum.paths, sum.matched)
}

/// Every internal function with a contract, in name order.
pub fn verify_all(prog: &Program) -> Vec<VerifyResult> {
    prog.contracts
        .keys()
        .filter(|f| matches!(prog.functions.get(f).map(|d| &d.body), Some(Body::Internal(_))))
        .map(|f| verify_contract(prog, f.as_str()))
        .collect()
}

pub fn report(results: &[VerifyResult]) -> Vec<ReportRow> {
    results.iter().map(ReportRow::from).collect()
}
