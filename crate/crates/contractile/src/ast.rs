//! Deep embedding of the core statement language, function declarations and
//! the program registry shared by the interpreter and the verifier.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::machine::MachineState;
use crate::seplogic::{Contract, LemmaDecl};
use crate::sym::{sym, Sym};
use crate::value::{Op, Sort, Value};

pub type NodeId = u32;

#[derive(Clone, Debug, PartialEq)]
pub struct Stm {
    pub id: NodeId,
    pub kind: StmKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmKind {
    Lit(Value),
    Var(Sym),
    Let(Sym, Box<Stm>, Box<Stm>),
    Seq(Box<Stm>, Box<Stm>),
    CallInternal(Sym, Vec<Stm>),
    CallForeign(Sym, Vec<Stm>),
    /// Ghost statement: no runtime effect, applies a lemma in the verifier.
    LemmaInvoke(Sym, Vec<Stm>),
    Assert(Box<Stm>, String),
    Match(Box<Stm>, Vec<Arm>),
    RecordGet(Box<Stm>, Sym),
    RecordSet(Box<Stm>, Sym, Box<Stm>),
    TupleProject(Box<Stm>, usize),
    Tuple(Vec<Stm>),
    Ctor(Sym, Vec<Stm>),
    Prim(Op, Vec<Stm>),
    If(Box<Stm>, Box<Stm>, Box<Stm>),
    ReadReg(Sym),
    WriteReg(Sym, Box<Stm>),
    Fail(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arm {
    pub pat: Pattern,
    pub body: Stm,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Pattern {
    Wild,
    Bind(Sym),
    Lit(Value),
    Ctor(Sym, Vec<Sym>),
    Tuple(Vec<Sym>),
}

impl Pattern {
    pub fn binders(&self) -> Vec<Sym> {
        match self {
            Pattern::Wild | Pattern::Lit(_) => vec![],
            Pattern::Bind(x) => vec![*x],
            Pattern::Ctor(_, xs) | Pattern::Tuple(xs) => xs.clone(),
        }
    }
}

pub type ForeignFn = fn(&mut MachineState, &[Value]) -> Result<Value, String>;

#[derive(Clone, Debug)]
pub enum Body {
    Internal(Stm),
    /// Implemented by the runtime. Pure foreign functions do not touch the
    /// machine state and may be evaluated by the verifier on ground inputs.
    Foreign { pure: bool },
}

#[derive(Clone, Debug)]
pub struct FunctionDecl {
    pub name: Sym,
    pub params: Vec<(Sym, Sort)>,
    pub ret: Sort,
    pub body: Body,
}

impl FunctionDecl {
    pub fn is_foreign(&self) -> bool {
        matches!(self.body, Body::Foreign { .. })
    }
}

#[derive(Clone, Debug, Default)]
pub struct TypeEnv {
    pub enums: BTreeMap<Sym, Vec<Sym>>,
    pub unions: BTreeMap<Sym, Vec<(Sym, Vec<Sort>)>>,
}

impl TypeEnv {
    pub fn ctor(&self, c: Sym) -> Option<(Sym, &[Sort])> {
        self.unions.iter().find_map(|(u, cs)| {
            cs.iter()
                .find(|(n, _)| *n == c)
                .map(|(_, fs)| (*u, fs.as_slice()))
        })
    }

    pub fn enum_of(&self, tag: Sym) -> Option<Sym> {
        self.enums
            .iter()
            .find(|(_, vs)| vs.contains(&tag))
            .map(|(e, _)| *e)
    }
}

#[derive(Clone)]
pub struct Program {
    pub name: String,
    pub functions: BTreeMap<Sym, FunctionDecl>,
    pub lemmas: BTreeMap<Sym, LemmaDecl>,
    pub contracts: BTreeMap<Sym, Contract>,
    /// Contracted functions whose callers still interpret the body.
    pub inline: BTreeSet<Sym>,
    pub runtime: BTreeMap<Sym, ForeignFn>,
    pub types: TypeEnv,
    pub registers: Vec<(Sym, Sort)>,
    /// Whether reaching `Fail` (or a failed assertion) is a safe halt. True
    /// for the capability machine, whose guards stop execution on purpose.
    pub safe_failure: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LookupError {
    #[error("function not found: {0}")]
    NotFound(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Diagnostic {
    pub location: NodeId,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node {}: {}", self.location, self.message)
    }
}

impl Program {
    pub fn new(name: &str) -> Program {
        Program {
            name: name.to_string(),
            functions: BTreeMap::new(),
            lemmas: BTreeMap::new(),
            contracts: BTreeMap::new(),
            inline: BTreeSet::new(),
            runtime: BTreeMap::new(),
            types: TypeEnv::default(),
            registers: Vec::new(),
            safe_failure: true,
        }
    }

    pub fn add_internal(&mut self, name: &str, params: &[(&str, Sort)], ret: Sort, body: Stm) {
        let name = sym(name);
        self.functions.insert(
            name,
            FunctionDecl {
                name,
                params: params.iter().map(|(n, s)| (sym(n), s.clone())).collect(),
                ret,
                body: Body::Internal(body),
            },
        );
    }

    pub fn add_foreign(&mut self, name: &str, params: &[(&str, Sort)], ret: Sort, pure: bool, f: ForeignFn) {
        let name = sym(name);
        self.functions.insert(
            name,
            FunctionDecl {
                name,
                params: params.iter().map(|(n, s)| (sym(n), s.clone())).collect(),
                ret,
                body: Body::Foreign { pure },
            },
        );
        self.runtime.insert(name, f);
    }

    pub fn register_sort(&self, r: Sym) -> Option<&Sort> {
        self.registers.iter().find(|(n, _)| *n == r).map(|(_, s)| s)
    }

    /// Assigns node ids in a deterministic pre-order walk over functions in
    /// name order.
    pub fn number_nodes(&mut self) {
        let mut next = 1;
        for f in self.functions.values_mut() {
            if let Body::Internal(s) = &mut f.body {
                number(s, &mut next);
            }
        }
    }
}

fn number(s: &mut Stm, next: &mut NodeId) {
    s.id = *next;
    *next += 1;
    s.for_each_child_mut(&mut |c| number(c, next));
}

impl Stm {
    pub fn new(kind: StmKind) -> Stm {
        Stm { id: 0, kind }
    }

    pub fn for_each_child_mut(&mut self, f: &mut dyn FnMut(&mut Stm)) {
        use StmKind::*;
        match &mut self.kind {
            Lit(_) | Var(_) | ReadReg(_) | Fail(_) => {}
            Let(_, a, b) | Seq(a, b) | RecordSet(a, _, b) => {
                f(a);
                f(b);
            }
            CallInternal(_, xs) | CallForeign(_, xs) | LemmaInvoke(_, xs) | Tuple(xs) | Ctor(_, xs) | Prim(_, xs) => {
                xs.iter_mut().for_each(f)
            }
            Assert(a, _) | RecordGet(a, _) | TupleProject(a, _) | WriteReg(_, a) => f(a),
            Match(a, arms) => {
                f(a);
                for arm in arms {
                    f(&mut arm.body);
                }
            }
            If(a, b, c) => {
                f(a);
                f(b);
                f(c);
            }
        }
    }
}

pub fn lookup_function<'p>(p: &'p Program, name: &str) -> Result<&'p FunctionDecl, LookupError> {
    p.functions
        .get(&sym(name))
        .ok_or_else(|| LookupError::NotFound(name.to_string()))
}

/// Smallest `v<n>` not in `used`.
pub fn fresh_name(used: &BTreeSet<String>) -> String {
    (0..)
        .map(|i| format!("v{i}"))
        .find(|n| !used.contains(n))
        .expect("unbounded counter")
}

pub fn check_wellformed(p: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for f in p.functions.values() {
        match &f.body {
            Body::Internal(s) => {
                let mut scope: Vec<Sym> = f.params.iter().map(|(n, _)| *n).collect();
                check_stm(p, s, &mut scope, &mut out);
            }
            Body::Foreign { .. } => {
                if !p.runtime.contains_key(&f.name) {
                    out.push(Diagnostic {
                        location: 0,
                        message: format!("foreign function {} has no runtime implementation", f.name),
                    });
                }
            }
        }
    }
    let step = sym("fdeStep");
    let cycle = sym("fdeCycle");
    if !p.functions.contains_key(&step) {
        out.push(Diagnostic { location: 0, message: "missing entry point fdeStep".into() });
    }
    match p.functions.get(&cycle) {
        None => out.push(Diagnostic { location: 0, message: "missing entry point fdeCycle".into() }),
        Some(f) => {
            let ok = match &f.body {
                Body::Internal(Stm { kind: StmKind::Seq(a, b), .. }) => {
                    matches!(&a.kind, StmKind::CallInternal(n, xs) if *n == step && xs.is_empty())
                        && matches!(&b.kind, StmKind::CallInternal(n, xs) if *n == cycle && xs.is_empty())
                }
                _ => false,
            };
            if !ok {
                let location = match &f.body {
                    Body::Internal(s) => s.id,
                    Body::Foreign { .. } => 0,
                };
                out.push(Diagnostic {
                    location,
                    message: "fdeCycle shape: body must be fdeStep(); fdeCycle()".into(),
                });
            }
        }
    }
    for (name, c) in &p.contracts {
        match p.functions.get(name) {
            None => out.push(Diagnostic {
                location: 0,
                message: format!("contract for unknown function {name}"),
            }),
            Some(f) if f.params.len() != c.args.len() => out.push(Diagnostic {
                location: 0,
                message: format!("contract for {name} has {} arguments, function has {}", c.args.len(), f.params.len()),
            }),
            _ => {}
        }
    }
    out.sort();
    out
}

fn sort_of_value(p: &Program, v: &Value) -> Option<Sort> {
    Some(match v {
        Value::Unit => Sort::Unit,
        Value::Bool(_) => Sort::Bool,
        Value::Int(_) => Sort::Int,
        Value::Bits(_) => Sort::Bits,
        Value::Enum(t) => Sort::Enum(p.types.enum_of(*t)?),
        Value::Ctor(c, _) => Sort::Union(p.types.ctor(*c)?.0),
        _ => return None,
    })
}

fn compatible(a: &Sort, b: &Sort) -> bool {
    matches!(a, Sort::Any) || matches!(b, Sort::Any) || a == b
}

fn check_args(p: &Program, s: &Stm, name: Sym, args: &[Stm], scope: &mut Vec<Sym>, out: &mut Vec<Diagnostic>) {
    let Some(f) = p.functions.get(&name) else { return };
    if f.params.len() != args.len() {
        out.push(Diagnostic {
            location: s.id,
            message: format!("{name} expects {} arguments, got {}", f.params.len(), args.len()),
        });
        return;
    }
    for (a, (pn, ps)) in args.iter().zip(&f.params) {
        if let StmKind::Lit(v) = &a.kind {
            if let Some(vs) = sort_of_value(p, v) {
                if !compatible(&vs, ps) {
                    out.push(Diagnostic {
                        location: a.id,
                        message: format!("argument {pn} of {name}: expected {ps:?}, got {vs:?}"),
                    });
                }
            }
        }
        check_stm(p, a, scope, out);
    }
}

fn check_stm(p: &Program, s: &Stm, scope: &mut Vec<Sym>, out: &mut Vec<Diagnostic>) {
    use StmKind::*;
    let diag = |out: &mut Vec<Diagnostic>, m: String| out.push(Diagnostic { location: s.id, message: m });
    match &s.kind {
        Lit(_) => {}
        Var(x) => {
            if !scope.contains(x) {
                diag(out, format!("unbound variable {x}"));
            }
        }
        Let(x, a, b) => {
            check_stm(p, a, scope, out);
            scope.push(*x);
            check_stm(p, b, scope, out);
            scope.pop();
        }
        Seq(a, b) => {
            check_stm(p, a, scope, out);
            check_stm(p, b, scope, out);
        }
        CallInternal(n, xs) => match p.functions.get(n) {
            None => diag(out, format!("call to unknown function {n}")),
            Some(f) if f.is_foreign() => diag(out, format!("internal call to foreign function {n}")),
            Some(_) => check_args(p, s, *n, xs, scope, out),
        },
        CallForeign(n, xs) => match p.functions.get(n) {
            None => diag(out, format!("call to unknown function {n}")),
            Some(f) if !f.is_foreign() => diag(out, format!("foreign call to internal function {n}")),
            Some(_) => check_args(p, s, *n, xs, scope, out),
        },
        LemmaInvoke(n, xs) => {
            match p.lemmas.get(n) {
                None => diag(out, format!("unknown lemma {n}")),
                Some(l) if l.params.len() != xs.len() => {
                    diag(out, format!("lemma {n} expects {} arguments", l.params.len()))
                }
                _ => {}
            }
            for x in xs {
                check_stm(p, x, scope, out);
            }
        }
        Assert(a, msg) => {
            if msg.is_empty() {
                diag(out, "assertion without message".into());
            }
            check_stm(p, a, scope, out);
        }
        Match(a, arms) => {
            check_stm(p, a, scope, out);
            for arm in arms {
                if let Pattern::Ctor(c, xs) = &arm.pat {
                    match p.types.ctor(*c) {
                        None => diag(out, format!("unknown constructor {c}")),
                        Some((_, fs)) if fs.len() != xs.len() => {
                            diag(out, format!("constructor {c} has {} fields", fs.len()))
                        }
                        _ => {}
                    }
                }
                let bs = arm.pat.binders();
                let n = scope.len();
                scope.extend(bs);
                check_stm(p, &arm.body, scope, out);
                scope.truncate(n);
            }
        }
        RecordGet(a, _) | TupleProject(a, _) => check_stm(p, a, scope, out),
        RecordSet(a, _, b) => {
            check_stm(p, a, scope, out);
            check_stm(p, b, scope, out);
        }
        Tuple(xs) | Prim(_, xs) => {
            if let Prim(op, _) = &s.kind {
                if op.arity() != xs.len() {
                    diag(out, format!("{} expects {} operands", op.name(), op.arity()));
                }
            }
            for x in xs {
                check_stm(p, x, scope, out);
            }
        }
        Ctor(c, xs) => {
            match p.types.ctor(*c) {
                None => diag(out, format!("unknown constructor {c}")),
                Some((_, fs)) if fs.len() != xs.len() => diag(out, format!("constructor {c} has {} fields", fs.len())),
                _ => {}
            }
            for x in xs {
                check_stm(p, x, scope, out);
            }
        }
        If(a, b, c) => {
            check_stm(p, a, scope, out);
            check_stm(p, b, scope, out);
            check_stm(p, c, scope, out);
        }
        ReadReg(r) => {
            if p.register_sort(*r).is_none() {
                diag(out, format!("unknown register {r}"));
            }
        }
        WriteReg(r, a) => {
            if p.register_sort(*r).is_none() {
                diag(out, format!("unknown register {r}"));
            }
            check_stm(p, a, scope, out);
        }
        Fail(m) => {
            if m.is_empty() {
                diag(out, "fail without message".into());
            }
        }
    }
}

/// Small constructors for writing programs in Rust.
pub mod build {
    use super::*;

    fn b(s: Stm) -> Box<Stm> {
        Box::new(s)
    }

    pub fn lit(v: Value) -> Stm {
        Stm::new(StmKind::Lit(v))
    }
    pub fn unit() -> Stm {
        lit(Value::Unit)
    }
    pub fn tt() -> Stm {
        lit(Value::Bool(true))
    }
    pub fn ff() -> Stm {
        lit(Value::Bool(false))
    }
    pub fn int(i: i64) -> Stm {
        lit(Value::Int(i))
    }
    pub fn bits(u: u32) -> Stm {
        lit(Value::Bits(u))
    }
    pub fn enm(s: &str) -> Stm {
        lit(Value::enm(s))
    }
    pub fn var(x: &str) -> Stm {
        Stm::new(StmKind::Var(sym(x)))
    }
    pub fn let_(x: &str, e: Stm, body: Stm) -> Stm {
        Stm::new(StmKind::Let(sym(x), b(e), b(body)))
    }
    pub fn seq(a: Stm, c: Stm) -> Stm {
        Stm::new(StmKind::Seq(b(a), b(c)))
    }
    /// Right-nested sequence; the value is that of the last statement.
    pub fn seqs(mut xs: Vec<Stm>) -> Stm {
        let mut acc = xs.pop().expect("empty sequence");
        while let Some(x) = xs.pop() {
            acc = seq(x, acc);
        }
        acc
    }
    pub fn call(f: &str, xs: Vec<Stm>) -> Stm {
        Stm::new(StmKind::CallInternal(sym(f), xs))
    }
    pub fn foreign(f: &str, xs: Vec<Stm>) -> Stm {
        Stm::new(StmKind::CallForeign(sym(f), xs))
    }
    pub fn lemma(l: &str, xs: Vec<Stm>) -> Stm {
        Stm::new(StmKind::LemmaInvoke(sym(l), xs))
    }
    pub fn assert_(c: Stm, msg: &str) -> Stm {
        Stm::new(StmKind::Assert(b(c), msg.to_string()))
    }
    pub fn match_(s: Stm, arms: Vec<(Pattern, Stm)>) -> Stm {
        Stm::new(StmKind::Match(
            b(s),
            arms.into_iter().map(|(pat, body)| Arm { pat, body }).collect(),
        ))
    }
    pub fn pctor(c: &str, xs: &[&str]) -> Pattern {
        Pattern::Ctor(sym(c), xs.iter().map(|x| sym(x)).collect())
    }
    pub fn plit(v: Value) -> Pattern {
        Pattern::Lit(v)
    }
    pub fn ptuple(xs: &[&str]) -> Pattern {
        Pattern::Tuple(xs.iter().map(|x| sym(x)).collect())
    }
    pub fn get(s: Stm, f: &str) -> Stm {
        Stm::new(StmKind::RecordGet(b(s), sym(f)))
    }
    pub fn set(s: Stm, f: &str, v: Stm) -> Stm {
        Stm::new(StmKind::RecordSet(b(s), sym(f), b(v)))
    }
    pub fn proj(s: Stm, i: usize) -> Stm {
        Stm::new(StmKind::TupleProject(b(s), i))
    }
    pub fn tuple(xs: Vec<Stm>) -> Stm {
        Stm::new(StmKind::Tuple(xs))
    }
    pub fn ctor(c: &str, xs: Vec<Stm>) -> Stm {
        Stm::new(StmKind::Ctor(sym(c), xs))
    }
    pub fn prim(op: Op, xs: Vec<Stm>) -> Stm {
        Stm::new(StmKind::Prim(op, xs))
    }
    pub fn if_(c: Stm, t: Stm, e: Stm) -> Stm {
        Stm::new(StmKind::If(b(c), b(t), b(e)))
    }
    pub fn read_reg(r: &str) -> Stm {
        Stm::new(StmKind::ReadReg(sym(r)))
    }
    pub fn write_reg(r: &str, v: Stm) -> Stm {
        Stm::new(StmKind::WriteReg(sym(r), b(v)))
    }
    pub fn fail(m: &str) -> Stm {
        Stm::new(StmKind::Fail(m.to_string()))
    }
    pub fn eq(a: Stm, c: Stm) -> Stm {
        prim(Op::Eq, vec![a, c])
    }
    pub fn not(a: Stm) -> Stm {
        prim(Op::Not, vec![a])
    }
}

#[cfg(test)]
mod tests {
    use super::build::*;
    use super::*;

    fn tiny() -> Program {
        let mut p = Program::new("tiny");
        p.add_internal("fdeStep", &[], Sort::Bool, tt());
        p.add_internal("fdeCycle", &[], Sort::Unit, seq(call("fdeStep", vec![]), call("fdeCycle", vec![])));
        p.number_nodes();
        p
    }

    #[test]
    fn fresh_names() {
        let mut used = BTreeSet::new();
        assert_eq!(fresh_name(&used), "v0");
        used.insert("v0".to_string());
        assert_eq!(fresh_name(&used), "v1");
        used.insert("v1".to_string());
        assert_eq!(fresh_name(&used), "v2");
    }

    #[test]
    fn unknown_call_is_reported() {
        let mut p = tiny();
        p.add_internal("g", &[], Sort::Unit, call("nope", vec![]));
        p.number_nodes();
        let d = check_wellformed(&p);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("nope"));
    }

    #[test]
    fn cycle_shape_is_checked() {
        let mut p = tiny();
        p.add_internal("fdeCycle", &[], Sort::Unit, int(0));
        p.number_nodes();
        let d = check_wellformed(&p);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("fdeCycle shape"));
    }

    #[test]
    fn unbound_variable() {
        let mut p = tiny();
        p.add_internal("g", &[("x", Sort::Int)], Sort::Int, let_("y", var("x"), var("z")));
        p.number_nodes();
        let d = check_wellformed(&p);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("unbound variable z"));
    }

    #[test]
    fn lookup() {
        let p = tiny();
        assert!(lookup_function(&p, "fdeStep").is_ok());
        assert_eq!(lookup_function(&p, "zzz").unwrap_err(), LookupError::NotFound("zzz".into()));
    }

    #[test]
    fn wellformedness_is_pure() {
        let mut p = tiny();
        p.add_internal("g", &[], Sort::Unit, seq(var("a"), call("nope", vec![])));
        p.number_nodes();
        assert_eq!(check_wellformed(&p), check_wellformed(&p));
    }
}
