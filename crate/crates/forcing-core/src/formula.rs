//! First-order formulas with an extended atom vocabulary.
//!
//! Beyond the usual relational atoms, equality, and set membership, the
//! language carries:
//!
//! - `E(..)` atoms asserting that a sentence (given literally, by a term
//!   denoting its code, or as a parameter-passed literal template) belongs
//!   to the current sentence fragment;
//! - `InL(..)` atoms asserting membership in the ambient literal language;
//! - `Dfin(t)` atoms asserting that a term denotes a nonempty (finite) set.
//!
//! Quantifiers come in unbounded (`Forall`/`Exists`) and membership-bounded
//! (`ForallMem`/`ExistsMem`) forms.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

use crate::hf::Hf;

pub type Var = u32;

/// What a signature symbol is.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum SymbolKind {
    Relation,
    Function,
    Constant,
}

/// A signature symbol. Two symbols are identical exactly when all three
/// fields agree.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
    pub arity: usize,
}

impl Symbol {
    pub fn relation(name: &str, arity: usize) -> Symbol {
        Symbol { name: name.to_string(), kind: SymbolKind::Relation, arity }
    }
    pub fn function(name: &str, arity: usize) -> Symbol {
        Symbol { name: name.to_string(), kind: SymbolKind::Function, arity }
    }
    pub fn constant(name: &str) -> Symbol {
        Symbol { name: name.to_string(), kind: SymbolKind::Constant, arity: 0 }
    }
}

/// First-order terms. Function application may appear only inside an
/// equality atom, and application arguments are variables or values.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Term {
    Var(Var),
    Val(Hf),
    App(String, Vec<Term>),
}

impl Term {
    pub fn free_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(*v);
            }
            Term::Val(_) => {}
            Term::App(_, args) => {
                for a in args {
                    a.free_vars(out);
                }
            }
        }
    }

    fn subst(&self, v: Var, val: &Hf) -> Term {
        match self {
            Term::Var(w) if *w == v => Term::Val(val.clone()),
            Term::Var(_) | Term::Val(_) => self.clone(),
            Term::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| a.subst(v, val)).collect())
            }
        }
    }

    fn rename(&self, from: Var, to: Var) -> Term {
        match self {
            Term::Var(w) if *w == from => Term::Var(to),
            Term::Var(_) | Term::Val(_) => self.clone(),
            Term::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| a.rename(from, to)).collect())
            }
        }
    }

    fn max_var(&self) -> Option<Var> {
        match self {
            Term::Var(v) => Some(*v),
            Term::Val(_) => None,
            Term::App(_, args) => args.iter().filter_map(|a| a.max_var()).max(),
        }
    }
}

/// Argument of an `E(..)` or `InL(..)` atom.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum EArg {
    /// A sentence given literally.
    Sent(Box<Formula>),
    /// A term denoting the code of a sentence.
    Term(Term),
    /// A term `x`; the atom speaks about the canonical negation of the
    /// sentence `x` denotes.
    NegTerm(Term),
    /// A parameter-passed literal: the named symbol applied to the
    /// denotations of the argument terms, shaped by the symbol's kind
    /// (relation atom, function-graph equation, or constant equation).
    Lit(String, Vec<Term>),
}

/// Formulas.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Formula {
    Rel(String, Vec<Term>),
    Eq(Term, Term),
    Mem(Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Forall(Var, Box<Formula>),
    Exists(Var, Box<Formula>),
    ForallMem(Var, Term, Box<Formula>),
    ExistsMem(Var, Term, Box<Formula>),
    E(EArg),
    InL(EArg),
    Dfin(Term),
}

pub fn not(f: Formula) -> Formula {
    Formula::Not(Box::new(f))
}
pub fn and(a: Formula, b: Formula) -> Formula {
    Formula::And(Box::new(a), Box::new(b))
}
pub fn or(a: Formula, b: Formula) -> Formula {
    Formula::Or(Box::new(a), Box::new(b))
}
pub fn implies(a: Formula, b: Formula) -> Formula {
    Formula::Implies(Box::new(a), Box::new(b))
}
pub fn iff(a: Formula, b: Formula) -> Formula {
    Formula::Iff(Box::new(a), Box::new(b))
}
pub fn forall(v: Var, f: Formula) -> Formula {
    Formula::Forall(v, Box::new(f))
}
pub fn exists(v: Var, f: Formula) -> Formula {
    Formula::Exists(v, Box::new(f))
}

/// Left fold of a nonempty conjunction list.
pub fn and_all(mut fs: Vec<Formula>) -> Formula {
    assert!(!fs.is_empty());
    let first = fs.remove(0);
    fs.into_iter().fold(first, and)
}

/// Left fold of a nonempty disjunction list.
pub fn or_all(mut fs: Vec<Formula>) -> Formula {
    assert!(!fs.is_empty());
    let first = fs.remove(0);
    fs.into_iter().fold(first, or)
}

/// The canonical truth `(eq #0 #0)`.
pub fn truth() -> Formula {
    Formula::Eq(Term::Val(Hf::empty()), Term::Val(Hf::empty()))
}

/// The canonical falsehood `(not (eq #0 #0))`.
pub fn falsity() -> Formula {
    not(truth())
}

/// Canonical negation: strip one outer `not` if present, else prepend one.
/// An involution.
pub fn neg(f: &Formula) -> Formula {
    match f {
        Formula::Not(inner) => (**inner).clone(),
        other => not(other.clone()),
    }
}

/// Smallest superset of `set` closed under canonical negation.
/// Idempotent and monotone. (Computed as a fixpoint: negating a
/// doubly-negated sentence strips a layer, which can expose new members.)
pub fn close_under_negation(set: &BTreeSet<Formula>) -> BTreeSet<Formula> {
    let mut out = set.clone();
    let mut frontier: Vec<Formula> = set.iter().cloned().collect();
    while let Some(f) = frontier.pop() {
        let n = neg(&f);
        if out.insert(n.clone()) {
            frontier.push(n);
        }
    }
    out
}

/// Is `sigma` a nice fragment of `lang`: a subset containing, for each
/// sentence of `lang`, exactly one of the sentence and its canonical
/// negation? (`lang` is assumed closed under canonical negation.)
pub fn is_nice(sigma: &BTreeSet<Formula>, lang: &BTreeSet<Formula>) -> bool {
    if !sigma.is_subset(lang) {
        return false;
    }
    lang.iter().all(|f| sigma.contains(f) != sigma.contains(&neg(f)))
}

impl Formula {
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<Var>) {
        match self {
            Formula::Rel(_, args) => {
                for t in args {
                    t.free_vars(out);
                }
            }
            Formula::Eq(a, b) | Formula::Mem(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Formula::Not(f) => f.collect_free(out),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                a.collect_free(out);
                b.collect_free(out);
            }
            Formula::Forall(v, f) | Formula::Exists(v, f) => {
                let mut inner = BTreeSet::new();
                f.collect_free(&mut inner);
                inner.remove(v);
                out.extend(inner);
            }
            Formula::ForallMem(v, t, f) | Formula::ExistsMem(v, t, f) => {
                t.free_vars(out);
                let mut inner = BTreeSet::new();
                f.collect_free(&mut inner);
                inner.remove(v);
                out.extend(inner);
            }
            Formula::E(arg) | Formula::InL(arg) => match arg {
                EArg::Sent(f) => f.collect_free(out),
                EArg::Term(t) | EArg::NegTerm(t) => t.free_vars(out),
                EArg::Lit(_, args) => {
                    for t in args {
                        t.free_vars(out);
                    }
                }
            },
            Formula::Dfin(t) => t.free_vars(out),
        }
    }

    /// Substitutes the value `val` for every free occurrence of `v`.
    /// Quoted sentences inside `E`/`InL` atoms are treated transparently:
    /// their variables are substitutable parameters.
    pub fn subst(&self, v: Var, val: &Hf) -> Formula {
        match self {
            Formula::Rel(s, args) => {
                Formula::Rel(s.clone(), args.iter().map(|t| t.subst(v, val)).collect())
            }
            Formula::Eq(a, b) => Formula::Eq(a.subst(v, val), b.subst(v, val)),
            Formula::Mem(a, b) => Formula::Mem(a.subst(v, val), b.subst(v, val)),
            Formula::Not(f) => not(f.subst(v, val)),
            Formula::And(a, b) => and(a.subst(v, val), b.subst(v, val)),
            Formula::Or(a, b) => or(a.subst(v, val), b.subst(v, val)),
            Formula::Implies(a, b) => implies(a.subst(v, val), b.subst(v, val)),
            Formula::Iff(a, b) => iff(a.subst(v, val), b.subst(v, val)),
            Formula::Forall(w, f) => {
                if *w == v {
                    self.clone()
                } else {
                    forall(*w, f.subst(v, val))
                }
            }
            Formula::Exists(w, f) => {
                if *w == v {
                    self.clone()
                } else {
                    exists(*w, f.subst(v, val))
                }
            }
            Formula::ForallMem(w, t, f) => {
                let t2 = t.subst(v, val);
                let f2 = if *w == v { (**f).clone() } else { f.subst(v, val) };
                Formula::ForallMem(*w, t2, Box::new(f2))
            }
            Formula::ExistsMem(w, t, f) => {
                let t2 = t.subst(v, val);
                let f2 = if *w == v { (**f).clone() } else { f.subst(v, val) };
                Formula::ExistsMem(*w, t2, Box::new(f2))
            }
            Formula::E(arg) => Formula::E(subst_earg(arg, v, val)),
            Formula::InL(arg) => Formula::InL(subst_earg(arg, v, val)),
            Formula::Dfin(t) => Formula::Dfin(t.subst(v, val)),
        }
    }

    /// Renames every occurrence (free and binding) of a variable. Used for
    /// alpha-variants with globally fresh targets.
    pub fn rename_var(&self, from: Var, to: Var) -> Formula {
        match self {
            Formula::Rel(s, args) => {
                Formula::Rel(s.clone(), args.iter().map(|t| t.rename(from, to)).collect())
            }
            Formula::Eq(a, b) => Formula::Eq(a.rename(from, to), b.rename(from, to)),
            Formula::Mem(a, b) => Formula::Mem(a.rename(from, to), b.rename(from, to)),
            Formula::Not(f) => not(f.rename_var(from, to)),
            Formula::And(a, b) => and(a.rename_var(from, to), b.rename_var(from, to)),
            Formula::Or(a, b) => or(a.rename_var(from, to), b.rename_var(from, to)),
            Formula::Implies(a, b) => implies(a.rename_var(from, to), b.rename_var(from, to)),
            Formula::Iff(a, b) => iff(a.rename_var(from, to), b.rename_var(from, to)),
            Formula::Forall(w, f) => {
                forall(if *w == from { to } else { *w }, f.rename_var(from, to))
            }
            Formula::Exists(w, f) => {
                exists(if *w == from { to } else { *w }, f.rename_var(from, to))
            }
            Formula::ForallMem(w, t, f) => Formula::ForallMem(
                if *w == from { to } else { *w },
                t.rename(from, to),
                Box::new(f.rename_var(from, to)),
            ),
            Formula::ExistsMem(w, t, f) => Formula::ExistsMem(
                if *w == from { to } else { *w },
                t.rename(from, to),
                Box::new(f.rename_var(from, to)),
            ),
            Formula::E(arg) => Formula::E(rename_earg(arg, from, to)),
            Formula::InL(arg) => Formula::InL(rename_earg(arg, from, to)),
            Formula::Dfin(t) => Formula::Dfin(t.rename(from, to)),
        }
    }

    /// Largest variable index occurring anywhere (free or bound).
    pub fn max_var(&self) -> Option<Var> {
        let mut best: Option<Var> = None;
        let mut upd = |v: Option<Var>| {
            best = match (best, v) {
                (None, x) => x,
                (x, None) => x,
                (Some(a), Some(b)) => Some(a.max(b)),
            }
        };
        match self {
            Formula::Rel(_, args) => {
                for t in args {
                    upd(t.max_var());
                }
            }
            Formula::Eq(a, b) | Formula::Mem(a, b) => {
                upd(a.max_var());
                upd(b.max_var());
            }
            Formula::Not(f) => upd(f.max_var()),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                upd(a.max_var());
                upd(b.max_var());
            }
            Formula::Forall(v, f) | Formula::Exists(v, f) => {
                upd(Some(*v));
                upd(f.max_var());
            }
            Formula::ForallMem(v, t, f) | Formula::ExistsMem(v, t, f) => {
                upd(Some(*v));
                upd(t.max_var());
                upd(f.max_var());
            }
            Formula::E(arg) | Formula::InL(arg) => match arg {
                EArg::Sent(f) => upd(f.max_var()),
                EArg::Term(t) | EArg::NegTerm(t) => upd(t.max_var()),
                EArg::Lit(_, args) => {
                    for t in args {
                        upd(t.max_var());
                    }
                }
            },
            Formula::Dfin(t) => upd(t.max_var()),
        }
        best
    }

    /// A variable index strictly above everything used in the formula.
    pub fn fresh_var(&self) -> Var {
        self.max_var().map_or(0, |v| v + 1)
    }

    /// Is this an atomic formula (no logical structure)?
    pub fn is_atomic(&self) -> bool {
        matches!(
            self,
            Formula::Rel(..)
                | Formula::Eq(..)
                | Formula::Mem(..)
                | Formula::E(..)
                | Formula::InL(..)
                | Formula::Dfin(..)
        )
    }

    /// Is this a literal: an atomic formula or a negated atomic formula?
    pub fn is_literal(&self) -> bool {
        match self {
            Formula::Not(f) => f.is_atomic(),
            other => other.is_atomic(),
        }
    }

    /// Does the head of the formula bind a quantifier?
    pub fn is_quantified(&self) -> bool {
        matches!(
            self,
            Formula::Forall(..)
                | Formula::Exists(..)
                | Formula::ForallMem(..)
                | Formula::ExistsMem(..)
        )
    }

    /// All subformula nodes, root first, descending through quoted
    /// sentences inside `E`/`InL` atoms as well.
    pub fn subformulas(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        self.collect_sub(&mut out);
        out
    }

    fn collect_sub<'a>(&'a self, out: &mut Vec<&'a Formula>) {
        out.push(self);
        match self {
            Formula::Rel(..) | Formula::Eq(..) | Formula::Mem(..) | Formula::Dfin(_) => {}
            Formula::Not(f) => f.collect_sub(out),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                a.collect_sub(out);
                b.collect_sub(out);
            }
            Formula::Forall(_, f)
            | Formula::Exists(_, f)
            | Formula::ForallMem(_, _, f)
            | Formula::ExistsMem(_, _, f) => f.collect_sub(out),
            Formula::E(arg) | Formula::InL(arg) => {
                if let EArg::Sent(f) = arg {
                    f.collect_sub(out);
                }
            }
        }
    }

    /// Does the formula contain an `E(..)` atom anywhere?
    pub fn contains_e_atom(&self) -> bool {
        self.subformulas().iter().any(|f| matches!(f, Formula::E(_)))
    }
}

fn subst_earg(arg: &EArg, v: Var, val: &Hf) -> EArg {
    match arg {
        EArg::Sent(f) => EArg::Sent(Box::new(f.subst(v, val))),
        EArg::Term(t) => EArg::Term(t.subst(v, val)),
        EArg::NegTerm(t) => EArg::NegTerm(t.subst(v, val)),
        EArg::Lit(s, args) => {
            EArg::Lit(s.clone(), args.iter().map(|t| t.subst(v, val)).collect())
        }
    }
}

fn rename_earg(arg: &EArg, from: Var, to: Var) -> EArg {
    match arg {
        EArg::Sent(f) => EArg::Sent(Box::new(f.rename_var(from, to))),
        EArg::Term(t) => EArg::Term(t.rename(from, to)),
        EArg::NegTerm(t) => EArg::NegTerm(t.rename(from, to)),
        EArg::Lit(s, args) => {
            EArg::Lit(s.clone(), args.iter().map(|t| t.rename(from, to)).collect())
        }
    }
}

// ---------------------------------------------------------------------------
// Quantifier classification

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ClassifyMode {
    /// Bounded quantifiers count as quantifiers.
    General,
    /// Membership-bounded quantifiers are absorbed into the matrix.
    SetTheoretic,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FormulaClass {
    Delta0,
    Sigma(u32),
    Pi(u32),
    Unclassified,
}

impl fmt::Display for FormulaClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormulaClass::Delta0 => write!(f, "Delta0"),
            FormulaClass::Sigma(n) => write!(f, "Sigma{n}"),
            FormulaClass::Pi(n) => write!(f, "Pi{n}"),
            FormulaClass::Unclassified => write!(f, "unclassified"),
        }
    }
}

/// Classifies a formula in the Levy-style hierarchy under a strict prenex
/// reading: a leading block structure over a matrix. Formulas that are not
/// in prenex shape (and not matrix-only) are `Unclassified`.
pub fn classify(f: &Formula, mode: ClassifyMode) -> FormulaClass {
    // Peel leading quantifier blocks.
    let mut cur = f;
    let mut blocks: Vec<bool> = Vec::new(); // true = universal
    loop {
        let (is_forall, body) = match (mode, cur) {
            (_, Formula::Forall(_, b)) => (true, &**b),
            (_, Formula::Exists(_, b)) => (false, &**b),
            (ClassifyMode::General, Formula::ForallMem(_, _, b)) => (true, &**b),
            (ClassifyMode::General, Formula::ExistsMem(_, _, b)) => (false, &**b),
            _ => break,
        };
        match blocks.last() {
            Some(last) if *last == is_forall => {}
            _ => blocks.push(is_forall),
        }
        cur = body;
    }
    let matrix_ok = match mode {
        ClassifyMode::General => is_quantifier_free(cur),
        ClassifyMode::SetTheoretic => is_delta0_set(cur),
    };
    if !matrix_ok {
        return FormulaClass::Unclassified;
    }
    match blocks.first() {
        None => FormulaClass::Delta0,
        Some(true) => FormulaClass::Pi(blocks.len() as u32),
        Some(false) => FormulaClass::Sigma(blocks.len() as u32),
    }
}

/// No quantifiers of any kind. Quoted sentences inside `E`/`InL` atoms do
/// not count: those atoms are atomic.
pub fn is_quantifier_free(f: &Formula) -> bool {
    match f {
        Formula::Rel(..)
        | Formula::Eq(..)
        | Formula::Mem(..)
        | Formula::E(_)
        | Formula::InL(_)
        | Formula::Dfin(_) => true,
        Formula::Not(g) => is_quantifier_free(g),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            is_quantifier_free(a) && is_quantifier_free(b)
        }
        Formula::Forall(..)
        | Formula::Exists(..)
        | Formula::ForallMem(..)
        | Formula::ExistsMem(..) => false,
    }
}

/// Every quantifier is membership-bounded.
pub fn is_delta0_set(f: &Formula) -> bool {
    match f {
        Formula::Rel(..)
        | Formula::Eq(..)
        | Formula::Mem(..)
        | Formula::E(_)
        | Formula::InL(_)
        | Formula::Dfin(_) => true,
        Formula::Not(g) => is_delta0_set(g),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            is_delta0_set(a) && is_delta0_set(b)
        }
        Formula::ForallMem(_, _, g) | Formula::ExistsMem(_, _, g) => is_delta0_set(g),
        Formula::Forall(..) | Formula::Exists(..) => false,
    }
}

// ---------------------------------------------------------------------------
// Canonical printing

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "v{v}"),
            Term::Val(h) => write!(f, "{h}"),
            Term::App(s, args) => {
                write!(f, "(app {s}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Rel(s, args) => {
                write!(f, "(rel {s}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
            Formula::Eq(a, b) => write!(f, "(eq {a} {b})"),
            Formula::Mem(a, b) => write!(f, "(mem {a} {b})"),
            Formula::Not(g) => write!(f, "(not {g})"),
            Formula::And(a, b) => write!(f, "(and {a} {b})"),
            Formula::Or(a, b) => write!(f, "(or {a} {b})"),
            Formula::Implies(a, b) => write!(f, "(implies {a} {b})"),
            Formula::Iff(a, b) => write!(f, "(iff {a} {b})"),
            Formula::Forall(v, g) => write!(f, "(forall v{v} {g})"),
            Formula::Exists(v, g) => write!(f, "(exists v{v} {g})"),
            Formula::ForallMem(v, t, g) => write!(f, "(forall-mem v{v} {t} {g})"),
            Formula::ExistsMem(v, t, g) => write!(f, "(exists-mem v{v} {t} {g})"),
            Formula::E(arg) => match arg {
                EArg::Sent(g) => write!(f, "(E {g})"),
                EArg::Term(t) => write!(f, "(E {t})"),
                EArg::NegTerm(t) => write!(f, "(E-neg {t})"),
                EArg::Lit(s, args) => {
                    write!(f, "(E-term {s}")?;
                    for a in args {
                        write!(f, " {a}")?;
                    }
                    write!(f, ")")
                }
            },
            Formula::InL(arg) => match arg {
                EArg::Sent(g) => write!(f, "(in-L {g})"),
                EArg::Term(t) => write!(f, "(in-L {t})"),
                EArg::NegTerm(t) => write!(f, "(in-L-neg {t})"),
                EArg::Lit(s, args) => {
                    write!(f, "(in-L-lit {s}")?;
                    for a in args {
                        write!(f, " {a}")?;
                    }
                    write!(f, ")")
                }
            },
            Formula::Dfin(t) => write!(f, "(dfin {t})"),
        }
    }
}

/// Canonical print string (also the canonical sort key for formulas).
pub fn print(f: &Formula) -> String {
    f.to_string()
}

/// Compares formulas by canonical print string.
pub fn canonical_cmp(a: &Formula, b: &Formula) -> std::cmp::Ordering {
    print(a).cmp(&print(b))
}
