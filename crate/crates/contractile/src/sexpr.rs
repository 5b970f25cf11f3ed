//! S-expression syntax for terms, sorts, assertions and contracts.
//!
//! Terms use the same notation as their `Display` output:
//!
//! ```text
//! 5  0x2a  true  ()  'Machine  x
//! (op bvadd x 0x4)  (tuple a b)  (ctor cap 'R 0 9 0)  (record (mpp 'User))
//! (proj t 0)  (field t mpp)  (if c a b)
//! ```
//!
//! Assertions:
//!
//! ```text
//! emp  (pure t)  (reg 'pc t)  (mem a v)  (pred GPRs ws)  (star A B ..)
//! (wand (exists w bits (mem a w)) (pred P ..))  (exists x S A)  (or A B ..)
//! ```
//!
//! A tuple, constructor or record whose parts are all literals reads back as
//! a single literal, which is also how the normalizer represents it.

use std::fmt;

use thiserror::Error;

use crate::seplogic::{Assertion, Contract};
use crate::sym::{sym, Sym};
use crate::term::Term;
use crate::value::{Op, Sort, Value};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{0}")]
pub struct ParseError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError(msg.into()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SExp {
    Atom(String),
    List(Vec<SExp>),
}

impl fmt::Display for SExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExp::Atom(a) => write!(f, "{a}"),
            SExp::List(xs) => {
                write!(f, "(")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Reads a sequence of S-expressions; `;` starts a comment.
pub fn read_all(src: &str) -> Result<Vec<SExp>, ParseError> {
    let mut toks = Vec::new();
    for line in src.lines() {
        let line = line.split(';').next().unwrap_or("");
        let spaced = line.replace('(', " ( ").replace(')', " ) ");
        toks.extend(spaced.split_whitespace().map(str::to_string));
    }
    let mut pos = 0;
    let mut out = Vec::new();
    while pos < toks.len() {
        out.push(read_one(&toks, &mut pos)?);
    }
    Ok(out)
}

pub fn read(src: &str) -> Result<SExp, ParseError> {
    let mut xs = read_all(src)?;
    match xs.len() {
        1 => Ok(xs.remove(0)),
        0 => err("empty input"),
        n => err(format!("expected one expression, found {n}")),
    }
}

fn read_one(toks: &[String], pos: &mut usize) -> Result<SExp, ParseError> {
    let Some(t) = toks.get(*pos) else { return err("unexpected end of input") };
    *pos += 1;
    match t.as_str() {
        "(" => {
            let mut xs = Vec::new();
            loop {
                match toks.get(*pos).map(String::as_str) {
                    None => return err("unclosed parenthesis"),
                    Some(")") => {
                        *pos += 1;
                        return Ok(SExp::List(xs));
                    }
                    Some(_) => xs.push(read_one(toks, pos)?),
                }
            }
        }
        ")" => err("unexpected `)`"),
        a => Ok(SExp::Atom(a.to_string())),
    }
}

fn atom(e: &SExp) -> Result<&str, ParseError> {
    match e {
        SExp::Atom(a) => Ok(a),
        SExp::List(_) => err(format!("expected an atom, found {e}")),
    }
}

fn head(xs: &[SExp]) -> Option<&str> {
    match xs.first() {
        Some(SExp::Atom(a)) => Some(a),
        _ => None,
    }
}

fn arity(xs: &[SExp], n: usize, what: &str) -> Result<(), ParseError> {
    if xs.len() != n + 1 {
        return err(format!("{what} takes {n} arguments, found {}", xs.len() - 1));
    }
    Ok(())
}

fn usize_of(e: &SExp) -> Result<usize, ParseError> {
    atom(e)?.parse().or_else(|_| err(format!("expected an index, found {e}")))
}

// ---- terms ----

fn atom_term(a: &str) -> Result<Term, ParseError> {
    if a == "true" {
        return Ok(Term::Lit(Value::Bool(true)));
    }
    if a == "false" {
        return Ok(Term::Lit(Value::Bool(false)));
    }
    if let Some(h) = a.strip_prefix("0x") {
        return u32::from_str_radix(h, 16)
            .map(|b| Term::Lit(Value::Bits(b)))
            .or_else(|_| err(format!("bad bit-vector literal {a}")));
    }
    if let Some(e) = a.strip_prefix('\'') {
        if e.is_empty() {
            return err("empty enum literal");
        }
        return Ok(Term::Lit(Value::enm(e)));
    }
    let first = a.chars().next().unwrap_or(' ');
    if first.is_ascii_digit() || (first == '-' && a.len() > 1) {
        return a
            .parse::<i64>()
            .map(|i| Term::Lit(Value::Int(i)))
            .or_else(|_| err(format!("bad integer literal {a}")));
    }
    Ok(Term::Var(sym(a)))
}

fn all_lits(xs: &[Term]) -> Option<Vec<Value>> {
    xs.iter().map(|t| t.as_lit().cloned()).collect()
}

pub fn parse_term(e: &SExp) -> Result<Term, ParseError> {
    let xs = match e {
        SExp::Atom(a) => return atom_term(a),
        SExp::List(xs) => xs,
    };
    if xs.is_empty() {
        return Ok(Term::Lit(Value::Unit));
    }
    let terms = |from: usize| xs[from..].iter().map(parse_term).collect::<Result<Vec<_>, _>>();
    match head(xs) {
        Some("op") => {
            let name = atom(xs.get(1).ok_or_else(|| ParseError("op without a name".into()))?)?;
            let op = Op::from_name(name).ok_or_else(|| ParseError(format!("unknown operator {name}")))?;
            let args = terms(2)?;
            if args.len() != op.arity() {
                return err(format!("{name} takes {} arguments, found {}", op.arity(), args.len()));
            }
            Ok(Term::Op(op, args))
        }
        Some("tuple") => {
            let ts = terms(1)?;
            Ok(match all_lits(&ts) {
                Some(vs) => Term::Lit(Value::Tuple(vs)),
                None => Term::Tuple(ts),
            })
        }
        Some("ctor") => {
            let c = sym(atom(xs.get(1).ok_or_else(|| ParseError("ctor without a name".into()))?)?);
            let ts = terms(2)?;
            Ok(match all_lits(&ts) {
                Some(vs) => Term::Lit(Value::Ctor(c, vs)),
                None => Term::Ctor(c, ts),
            })
        }
        Some("record") => {
            let mut fs = Vec::new();
            for f in &xs[1..] {
                match f {
                    SExp::List(p) if p.len() == 2 => fs.push((sym(atom(&p[0])?), parse_term(&p[1])?)),
                    _ => return err(format!("bad record field {f}")),
                }
            }
            let vals: Option<Vec<(Sym, Value)>> =
                fs.iter().map(|(n, t)| t.as_lit().map(|v| (*n, v.clone()))).collect();
            Ok(match vals {
                Some(vs) => Term::Lit(Value::Record(vs)),
                None => Term::Record(fs),
            })
        }
        Some("proj") => {
            arity(xs, 2, "proj")?;
            Ok(Term::Proj(Box::new(parse_term(&xs[1])?), usize_of(&xs[2])?))
        }
        Some("field") => {
            arity(xs, 2, "field")?;
            Ok(Term::Field(Box::new(parse_term(&xs[1])?), sym(atom(&xs[2])?)))
        }
        Some("if") => {
            arity(xs, 3, "if")?;
            Ok(Term::If(
                Box::new(parse_term(&xs[1])?),
                Box::new(parse_term(&xs[2])?),
                Box::new(parse_term(&xs[3])?),
            ))
        }
        _ => err(format!("not a term: {e}")),
    }
}

pub fn term(src: &str) -> Result<Term, ParseError> {
    parse_term(&read(src)?)
}

// ---- sorts ----

pub fn parse_sort(e: &SExp) -> Result<Sort, ParseError> {
    match e {
        SExp::Atom(a) => match a.as_str() {
            "unit" => Ok(Sort::Unit),
            "bool" => Ok(Sort::Bool),
            "int" => Ok(Sort::Int),
            "bits" => Ok(Sort::Bits),
            "any" => Ok(Sort::Any),
            _ => err(format!("unknown sort {a}")),
        },
        SExp::List(xs) => match head(xs) {
            Some("enum") => {
                arity(xs, 1, "enum")?;
                Ok(Sort::Enum(sym(atom(&xs[1])?)))
            }
            Some("union") => {
                arity(xs, 1, "union")?;
                Ok(Sort::Union(sym(atom(&xs[1])?)))
            }
            Some("tuple") => Ok(Sort::Tuple(xs[1..].iter().map(parse_sort).collect::<Result<_, _>>()?)),
            Some("record") => {
                let mut fs = Vec::new();
                for f in &xs[1..] {
                    match f {
                        SExp::List(p) if p.len() == 2 => fs.push((sym(atom(&p[0])?), parse_sort(&p[1])?)),
                        _ => return err(format!("bad record field {f}")),
                    }
                }
                Ok(Sort::Record(fs))
            }
            _ => err(format!("not a sort: {e}")),
        },
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Unit => write!(f, "unit"),
            Sort::Bool => write!(f, "bool"),
            Sort::Int => write!(f, "int"),
            Sort::Bits => write!(f, "bits"),
            Sort::Any => write!(f, "any"),
            Sort::Enum(e) => write!(f, "(enum {e})"),
            Sort::Union(u) => write!(f, "(union {u})"),
            Sort::Tuple(ss) => {
                write!(f, "(tuple")?;
                for s in ss {
                    write!(f, " {s}")?;
                }
                write!(f, ")")
            }
            Sort::Record(fs) => {
                write!(f, "(record")?;
                for (n, s) in fs {
                    write!(f, " ({n} {s})")?;
                }
                write!(f, ")")
            }
        }
    }
}

// ---- assertions ----

/// `(star a b c)` reads as `a ∗ (b ∗ c)`.
fn right_nested(
    xs: &[SExp],
    what: &str,
    join: fn(Box<Assertion>, Box<Assertion>) -> Assertion,
) -> Result<Assertion, ParseError> {
    if xs.len() < 3 {
        return err(format!("{what} needs at least two operands"));
    }
    let parts = xs[1..].iter().map(parse_assertion).collect::<Result<Vec<_>, _>>()?;
    let mut it = parts.into_iter().rev();
    let mut acc = it.next().expect("nonempty");
    for p in it {
        acc = join(Box::new(p), Box::new(acc));
    }
    Ok(acc)
}

pub fn parse_assertion(e: &SExp) -> Result<Assertion, ParseError> {
    let xs = match e {
        SExp::Atom(a) if a == "emp" => return Ok(Assertion::Emp),
        SExp::Atom(_) => return err(format!("not an assertion: {e}")),
        SExp::List(xs) => xs,
    };
    match head(xs) {
        Some("pure") => {
            arity(xs, 1, "pure")?;
            Ok(Assertion::Pure(parse_term(&xs[1])?))
        }
        Some("reg") => {
            arity(xs, 2, "reg")?;
            Ok(Assertion::Reg(parse_term(&xs[1])?, parse_term(&xs[2])?))
        }
        Some("mem") => {
            arity(xs, 2, "mem")?;
            Ok(Assertion::Mem(parse_term(&xs[1])?, parse_term(&xs[2])?))
        }
        Some("pred") => {
            let n = sym(atom(xs.get(1).ok_or_else(|| ParseError("pred without a name".into()))?)?);
            let args = xs[2..].iter().map(parse_term).collect::<Result<_, _>>()?;
            Ok(Assertion::Pred(n, args))
        }
        Some("star") => right_nested(xs, "star", Assertion::Star),
        Some("or") => right_nested(xs, "or", Assertion::Or),
        Some("wand") => {
            arity(xs, 2, "wand")?;
            let l = parse_assertion(&xs[1])?;
            let r = parse_assertion(&xs[2])?;
            let ok_l = matches!(&l, Assertion::Exists(_, _, b) if matches!(**b, Assertion::Mem(..)));
            if !ok_l || !matches!(r, Assertion::Pred(..)) {
                return err("a wand must have the form (wand (exists w S (mem a w)) (pred P ..))");
            }
            Ok(Assertion::Wand(Box::new(l), Box::new(r)))
        }
        Some("exists") => {
            arity(xs, 3, "exists")?;
            Ok(Assertion::Exists(
                sym(atom(&xs[1])?),
                parse_sort(&xs[2])?,
                Box::new(parse_assertion(&xs[3])?),
            ))
        }
        _ => err(format!("not an assertion: {e}")),
    }
}

pub fn assertion(src: &str) -> Result<Assertion, ParseError> {
    parse_assertion(&read(src)?)
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assertion::Emp => write!(f, "emp"),
            Assertion::Pure(t) => write!(f, "(pure {t})"),
            Assertion::Reg(k, v) => write!(f, "(reg {k} {v})"),
            Assertion::Mem(a, v) => write!(f, "(mem {a} {v})"),
            Assertion::Pred(n, xs) => {
                write!(f, "(pred {n}")?;
                for x in xs {
                    write!(f, " {x}")?;
                }
                write!(f, ")")
            }
            Assertion::Star(..) | Assertion::Or(..) => {
                let is_star = matches!(self, Assertion::Star(..));
                write!(f, "({}", if is_star { "star" } else { "or" })?;
                let mut cur = self;
                while let (Assertion::Star(l, r), true) | (Assertion::Or(l, r), false) = (cur, is_star) {
                    write!(f, " {l}")?;
                    cur = r;
                }
                write!(f, " {cur})")
            }
            Assertion::Wand(l, r) => write!(f, "(wand {l} {r})"),
            Assertion::Exists(x, s, a) => write!(f, "(exists {x} {s} {a})"),
        }
    }
}

// ---- contracts ----

fn section<'a>(xs: &'a [SExp], name: &str) -> Option<&'a [SExp]> {
    xs.iter().find_map(|x| match x {
        SExp::List(ys) if head(ys) == Some(name) => Some(&ys[1..]),
        _ => None,
    })
}

/// `(contract (vars (x S) ..) (args t ..) (result r) (pre A) (post A))`.
/// Every section but `pre` and `post` may be left out.
pub fn parse_contract(e: &SExp) -> Result<Contract, ParseError> {
    let SExp::List(xs) = e else { return err("expected (contract ...)") };
    if head(xs) != Some("contract") {
        return err("expected (contract ...)");
    }
    for x in &xs[1..] {
        let ok = matches!(x, SExp::List(ys)
            if matches!(head(ys), Some("vars" | "args" | "result" | "pre" | "post")));
        if !ok {
            return err(format!("unknown contract section {x}"));
        }
    }
    let mut logic_vars = Vec::new();
    for v in section(xs, "vars").unwrap_or(&[]) {
        match v {
            SExp::List(p) if p.len() == 2 => logic_vars.push((sym(atom(&p[0])?), parse_sort(&p[1])?)),
            _ => return err(format!("bad variable declaration {v}")),
        }
    }
    let args = section(xs, "args")
        .unwrap_or(&[])
        .iter()
        .map(parse_term)
        .collect::<Result<_, _>>()?;
    let result = match section(xs, "result") {
        Some([r]) => sym(atom(r)?),
        Some(_) => return err("result takes one name"),
        None => sym("result"),
    };
    let one = |name: &str| -> Result<Assertion, ParseError> {
        match section(xs, name) {
            Some([a]) => parse_assertion(a),
            _ => err(format!("contract needs exactly one ({name} ...)")),
        }
    };
    Ok(Contract { logic_vars, args, pre: one("pre")?, result, post: one("post")? })
}

pub fn contract(src: &str) -> Result<Contract, ParseError> {
    parse_contract(&read(src)?)
}

/// Prints a contract one section per line.
pub fn print_contract(c: &Contract) -> String {
    let mut out = String::from("(contract\n  (vars");
    for (x, s) in &c.logic_vars {
        out.push_str(&format!(" ({x} {s})"));
    }
    out.push_str(")\n  (args");
    for a in &c.args {
        out.push_str(&format!(" {a}"));
    }
    out.push_str(&format!(")\n  (result {})\n  (pre {})\n  (post {}))\n", c.result, c.pre, c.post));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{bits, enm, op, var};

    #[test]
    fn term_examples() {
        assert_eq!(term("0x2a").unwrap(), bits(42));
        assert_eq!(term("-3").unwrap(), Term::Lit(Value::Int(-3)));
        assert_eq!(term("'Machine").unwrap(), enm("Machine"));
        assert_eq!(term("()").unwrap(), Term::Lit(Value::Unit));
        assert_eq!(
            term("(op bvadd pc 0x4)").unwrap(),
            op(Op::BvAdd, vec![var("pc"), bits(4)])
        );
        assert_eq!(
            term("(tuple 0x0 0x58)").unwrap(),
            Term::Lit(Value::Tuple(vec![Value::Bits(0), Value::Bits(88)]))
        );
    }

    #[test]
    fn errors_are_reported() {
        assert!(term("(op frobnicate x)").is_err());
        assert!(term("(op bvadd x)").is_err());
        assert!(term("(tuple").is_err());
        assert!(term("0xZZ").is_err());
        assert!(assertion("(star emp)").is_err());
        assert!(assertion("(wand emp emp)").is_err());
        assert!(contract("(contract (pre emp))").is_err());
    }

    #[test]
    fn star_is_right_nested_and_prints_flat() {
        let a = assertion("(star (pure true) (reg 'pc 0x0) (mem 0x54 0x2a))").unwrap();
        assert!(matches!(&a, Assertion::Star(_, r) if matches!(**r, Assertion::Star(..))));
        assert_eq!(a.to_string(), "(star (pure true) (reg 'pc 0x0) (mem 0x54 0x2a))");
        let left = Assertion::Star(
            Box::new(Assertion::Star(Box::new(Assertion::Emp), Box::new(Assertion::Emp))),
            Box::new(Assertion::Emp),
        );
        assert_eq!(assertion(&left.to_string()).unwrap(), left);
    }

    #[test]
    fn contract_round_trip() {
        let src = "(contract (vars (epc bits) (ws (tuple bits bits))) \
                   (pre (star (reg 'mepc epc) (pred GPRs ws))) \
                   (post (exists c (record (mpp (enum Privilege))) (reg 'mstatus c))))";
        let c = contract(src).unwrap();
        assert_eq!(c.logic_vars.len(), 2);
        assert_eq!(contract(&print_contract(&c)).unwrap(), c);
    }

    #[test]
    fn comments_are_skipped() {
        let xs = read_all("; header\n(pure true) ; trailing\nemp\n").unwrap();
        assert_eq!(xs.len(), 2);
    }
}
