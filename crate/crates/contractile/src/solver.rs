//! Path conditions: substitution of solved equalities, finite-domain
//! narrowing and a small case-splitting prover on top of the normalizer.

use std::collections::BTreeMap;

use crate::sym::Sym;
use crate::term::{eq, not, simplify, Term};
use crate::value::{Op, Value};

const SPLIT_DEPTH: usize = 6;
const SPLIT_BUDGET: usize = 400;

#[derive(Clone, Debug, Default)]
pub struct Solver {
    /// Normalized facts that are neither literals nor solved equalities.
    pub facts: Vec<Term>,
    /// Solved variables in binding order. Later right-hand sides never
    /// mention earlier variables.
    pub solved: Vec<(Sym, Term)>,
    /// Remaining values of finite-domain variables.
    pub domains: BTreeMap<Sym, Vec<Value>>,
    pub infeasible: bool,
}

impl Solver {
    pub fn new() -> Solver {
        Solver::default()
    }

    pub fn declare_finite(&mut self, x: Sym, values: Vec<Value>) {
        self.domains.insert(x, values);
    }

    pub fn is_solved(&self, x: Sym) -> bool {
        self.solved.iter().any(|(y, _)| *y == x)
    }

    /// Applies solved equalities and simplifies under the facts.
    pub fn resolve(&self, t: &Term) -> Term {
        let mut t = t.clone();
        for (x, u) in &self.solved {
            t = t.subst(*x, u);
        }
        simplify(&t, &self.facts)
    }

    /// Adds `t` to the path condition. Returns false once the path is known
    /// to be infeasible.
    pub fn assume(&mut self, t: &Term) -> bool {
        if self.infeasible {
            return false;
        }
        let t = self.resolve(t);
        self.assume_normal(t);
        !self.infeasible
    }

    fn assume_normal(&mut self, t: Term) {
        if self.infeasible {
            return;
        }
        match t {
            Term::Lit(Value::Bool(true)) => {}
            Term::Lit(Value::Bool(false)) => self.infeasible = true,
            Term::Op(Op::And, xs) => {
                for x in xs {
                    let x = self.resolve(&x);
                    self.assume_normal(x);
                }
            }
            Term::Op(Op::Not, xs) if matches!(&xs[0], Term::Op(Op::Or, _)) => {
                let Term::Op(_, ys) = &xs[0] else { unreachable!() };
                for y in ys.clone() {
                    let y = self.resolve(&not(y));
                    self.assume_normal(y);
                }
            }
            Term::Op(Op::Eq, xs) => match (&xs[0], &xs[1]) {
                (Term::Var(x), u) if !u.mentions(*x) => self.bind(*x, u.clone()),
                _ => self.facts.push(Term::Op(Op::Eq, xs)),
            },
            Term::Var(b) => self.bind(b, Term::Lit(Value::Bool(true))),
            Term::Op(Op::Not, xs) => match &xs[0] {
                Term::Var(b) => self.bind(*b, Term::Lit(Value::Bool(false))),
                Term::Op(Op::Eq, ys) => {
                    if let (Term::Var(x), Term::Lit(v)) = (&ys[0], &ys[1]) {
                        if let Some(dom) = self.domains.get_mut(x) {
                            dom.retain(|w| w != v);
                            match dom.len() {
                                0 => {
                                    self.infeasible = true;
                                    return;
                                }
                                1 => {
                                    let only = dom[0].clone();
                                    self.bind(*x, Term::Lit(only));
                                    return;
                                }
                                _ => {}
                            }
                        }
                    }
                    self.facts.push(Term::Op(Op::Not, xs));
                }
                _ => self.facts.push(Term::Op(Op::Not, xs)),
            },
            t => self.facts.push(t),
        }
    }

    fn bind(&mut self, x: Sym, u: Term) {
        if let Some(dom) = self.domains.remove(&x) {
            match &u {
                Term::Lit(v) if !dom.contains(v) => {
                    self.infeasible = true;
                    return;
                }
                Term::Var(y) => {
                    // Intersect the domains of two finite variables.
                    if let Some(dy) = self.domains.get_mut(y) {
                        dy.retain(|v| dom.contains(v));
                        if dy.is_empty() {
                            self.infeasible = true;
                            return;
                        }
                    } else {
                        self.domains.insert(*y, dom);
                    }
                }
                _ => {}
            }
        }
        for (_, rhs) in &mut self.solved {
            *rhs = rhs.subst(x, &u);
        }
        self.solved.push((x, u));
        self.refresh();
    }

    /// Re-assumes every fact, since a new binding or fact may decide or
    /// solve older ones.
    fn refresh(&mut self) {
        let old = std::mem::take(&mut self.facts);
        for f in old {
            let f = self.resolve(&f);
            self.assume_normal(f);
            if self.infeasible {
                return;
            }
        }
    }

    /// Sound but incomplete: true only if `t` holds on every model of the
    /// path condition.
    pub fn prove(&self, t: &Term) -> bool {
        let mut budget = SPLIT_BUDGET;
        self.prove_split(t, SPLIT_DEPTH, &mut budget)
    }

    /// True if `t` is false on every model of the path condition.
    pub fn refute(&self, t: &Term) -> bool {
        self.prove(&not(t.clone()))
    }

    fn prove_split(&self, t: &Term, depth: usize, budget: &mut usize) -> bool {
        if self.infeasible {
            return true;
        }
        let r = self.resolve(t);
        if let Some(b) = r.as_bool() {
            return b;
        }
        if depth == 0 || *budget == 0 {
            return false;
        }
        *budget -= 1;
        if let Some(atom) = split_atom(&r) {
            return [atom.clone(), not(atom)].iter().all(|c| {
                let mut s = self.clone();
                if !s.assume(c) {
                    return true;
                }
                s.refresh();
                s.infeasible || s.prove_split(t, depth - 1, budget)
            });
        }
        let finite = r.vars().into_iter().find(|x| self.domains.contains_key(x));
        if let Some(x) = finite {
            let values = self.domains[&x].clone();
            return values.into_iter().all(|v| {
                let mut s = self.clone();
                !s.assume(&eq(Term::Var(x), Term::Lit(v))) || s.prove_split(t, depth - 1, budget)
            });
        }
        false
    }
}

/// A boolean atom worth splitting on: an `If` condition or an operand of a
/// connective that is not itself a connective.
fn split_atom(t: &Term) -> Option<Term> {
    match t {
        Term::If(c, a, b) => split_atom(c)
            .or_else(|| Some((**c).clone()).filter(is_atom))
            .or_else(|| split_atom(a))
            .or_else(|| split_atom(b)),
        Term::Op(Op::And | Op::Or | Op::Not, xs) => xs.iter().find_map(|x| {
            if is_atom(x) {
                Some(x.clone())
            } else {
                split_atom(x)
            }
        }),
        Term::Op(_, xs) | Term::Tuple(xs) | Term::Ctor(_, xs) => xs.iter().find_map(split_atom),
        Term::Record(fs) => fs.iter().find_map(|(_, x)| split_atom(x)),
        Term::Proj(a, _) | Term::Field(a, _) => split_atom(a),
        _ => None,
    }
}

fn is_atom(t: &Term) -> bool {
    match t {
        Term::Op(Op::And | Op::Or | Op::Not, _) => false,
        Term::Op(o, _) => o.is_predicate() && !t.is_ground(),
        Term::Var(_) => true,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sym::sym;
    use crate::term::{and, enm, int, op, var};

    fn perms(s: &mut Solver, x: &str) {
        s.declare_finite(sym(x), ["O", "R", "RW", "E"].iter().map(|p| Value::enm(p)).collect());
    }

    #[test]
    fn equalities_substitute() {
        let mut s = Solver::new();
        assert!(s.assume(&eq(var("x"), int(3))));
        assert!(s.prove(&eq(op(Op::Add, vec![var("x"), int(1)]), int(4))));
        assert!(!s.assume(&eq(var("x"), int(4))));
    }

    #[test]
    fn subperm_rules_out_enter() {
        let mut s = Solver::new();
        perms(&mut s, "p");
        s.assume(&op(Op::Subperm, vec![enm("RW"), var("p")]));
        assert!(s.prove(&not(eq(var("p"), enm("E")))));
        assert!(!s.prove(&eq(var("p"), enm("R"))));
    }

    #[test]
    fn domain_narrowing() {
        let mut s = Solver::new();
        perms(&mut s, "p");
        for q in ["O", "R", "E"] {
            s.assume(&not(eq(var("p"), enm(q))));
        }
        assert_eq!(s.resolve(&var("p")), enm("RW"));
    }

    #[test]
    fn contradiction_is_infeasible() {
        let mut s = Solver::new();
        let c = op(Op::CfgLocked, vec![var("c")]);
        s.assume(&c);
        assert!(!s.assume(&not(c)));
        assert!(s.prove(&eq(int(0), int(1))));
    }

    #[test]
    fn case_split_on_conditions() {
        let s = Solver::new();
        let c = op(Op::CfgLocked, vec![var("c")]);
        let t = crate::term::or(c.clone(), not(c.clone()));
        assert!(s.prove(&t));
        assert!(!s.prove(&and(c.clone(), c)));
    }
}
