//! The star fragment calculus: class tags for the E-extended language,
//! guard peelings, the disjunctive/witness normal forms, positivization,
//! the membership gadget, and the conversion pipeline for existential
//! sentences.
//!
//! Throughout, the guarded universal
//! `∀z ((z ∈ p ∧ "p nonempty finite") ⟹ body)` is the only unbounded
//! quantifier former admitted below the star-Δ0 level; its guard is the
//! atom [`Formula::Dfin`], which at finite scale means exactly "nonempty".

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::formula::{
    and, and_all, canonical_cmp, falsity, is_delta0_set, neg, not, or_all, truth, EArg, Formula,
    Term, Var,
};
use crate::hf::Hf;
use crate::structure::{Structure, Valuation};

// ---------------------------------------------------------------------------
// Star classes

/// Position of a formula in the star hierarchy (lowest applicable tag).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarClass {
    Delta0,
    Sigma1,
    Pi2,
    Other,
}

impl std::fmt::Display for StarClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StarClass::Delta0 => write!(f, "star-Delta0"),
            StarClass::Sigma1 => write!(f, "star-Sigma1"),
            StarClass::Pi2 => write!(f, "star-Pi2"),
            StarClass::Other => write!(f, "other"),
        }
    }
}

/// Does the formula contain an `E`, `InL`, or `Dfin` atom outside quotes?
fn contains_star_atom(f: &Formula) -> bool {
    match f {
        Formula::E(_) | Formula::InL(_) | Formula::Dfin(_) => true,
        Formula::Rel(..) | Formula::Eq(..) | Formula::Mem(..) => false,
        Formula::Not(g) => contains_star_atom(g),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            contains_star_atom(a) || contains_star_atom(b)
        }
        Formula::Forall(_, g)
        | Formula::Exists(_, g)
        | Formula::ForallMem(_, _, g)
        | Formula::ExistsMem(_, _, g) => contains_star_atom(g),
    }
}

/// Splits a guarded universal `∀z ((z ∈ p ∧ Dfin(p)) ⟹ body)` into
/// `(z, p, body)`. The bound `p` must be the same term in both guard atoms.
pub fn split_guard(f: &Formula) -> Option<(Var, &Term, &Formula)> {
    if let Formula::Forall(z, imp) = f {
        if let Formula::Implies(guard, body) = &**imp {
            if let Formula::And(mem, dfin) = &**guard {
                if let (Formula::Mem(Term::Var(zv), p), Formula::Dfin(p2)) = (&**mem, &**dfin) {
                    if zv == z && p == p2 {
                        return Some((*z, p, body));
                    }
                }
            }
        }
    }
    None
}

/// Builds the guarded universal recognized by [`split_guard`].
pub fn guarded(z: Var, p: Term, body: Formula) -> Formula {
    Formula::Forall(
        z,
        Box::new(Formula::Implies(
            Box::new(and(Formula::Mem(Term::Var(z), p.clone()), Formula::Dfin(p))),
            Box::new(body),
        )),
    )
}

/// A base proposition: star-atom-free with all quantifiers
/// membership-bounded. These are treated as atomic below the star-Δ0 level.
fn is_base(f: &Formula) -> bool {
    is_delta0_set(f) && !contains_star_atom(f)
}

/// Star-Δ0: closure of base propositions and `E`/`InL`/`Dfin` atoms under
/// connectives and the guarded universal with a variable or constant bound.
pub fn is_star_delta0(f: &Formula) -> bool {
    if is_base(f) {
        return true;
    }
    match f {
        Formula::E(_) | Formula::InL(_) | Formula::Dfin(_) => true,
        Formula::Not(g) => is_star_delta0(g),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            is_star_delta0(a) && is_star_delta0(b)
        }
        Formula::Forall(..) => match split_guard(f) {
            Some((_, p, body)) => {
                matches!(p, Term::Var(_) | Term::Val(_)) && is_star_delta0(body)
            }
            None => false,
        },
        _ => false,
    }
}

fn bound_vars(f: &Formula, out: &mut BTreeSet<Var>) {
    match f {
        Formula::Forall(v, g) | Formula::Exists(v, g) => {
            out.insert(*v);
            bound_vars(g, out);
        }
        Formula::ForallMem(v, _, g) | Formula::ExistsMem(v, _, g) => {
            out.insert(*v);
            bound_vars(g, out);
        }
        Formula::Not(g) => bound_vars(g, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            bound_vars(a, out);
            bound_vars(b, out);
        }
        _ => {}
    }
}

/// Splits an existential prefix, requiring the stripped variables not to be
/// re-bound in the matrix. Returns `(prefix, matrix)`.
fn strip_exists(f: &Formula) -> Option<(Vec<Var>, &Formula)> {
    let mut vars = Vec::new();
    let mut cur = f;
    while let Formula::Exists(v, g) = cur {
        vars.push(*v);
        cur = g;
    }
    let mut bound = BTreeSet::new();
    bound_vars(cur, &mut bound);
    if vars.iter().any(|v| bound.contains(v)) {
        return None;
    }
    Some((vars, cur))
}

fn strip_foralls(f: &Formula) -> Option<(Vec<Var>, &Formula)> {
    let mut vars = Vec::new();
    let mut cur = f;
    while let Formula::Forall(v, g) = cur {
        // A guarded universal belongs to the matrix, not the prefix.
        if split_guard(cur).is_some() {
            break;
        }
        vars.push(*v);
        cur = g;
    }
    let mut bound = BTreeSet::new();
    bound_vars(cur, &mut bound);
    if vars.iter().any(|v| bound.contains(v)) {
        return None;
    }
    Some((vars, cur))
}

/// Star-Σ1: an existential prefix (possibly empty) over a star-Δ0 matrix.
pub fn is_star_sigma1(f: &Formula) -> bool {
    matches!(strip_exists(f), Some((_, body)) if is_star_delta0(body))
}

/// Star-Π2: a universal prefix (possibly empty) over a star-Σ1 formula.
pub fn is_star_pi2(f: &Formula) -> bool {
    matches!(strip_foralls(f), Some((_, body)) if is_star_sigma1(body))
}

/// Lowest star-class tag that applies.
pub fn classify_star(f: &Formula) -> StarClass {
    if is_star_delta0(f) {
        StarClass::Delta0
    } else if is_star_sigma1(f) {
        StarClass::Sigma1
    } else if is_star_pi2(f) {
        StarClass::Pi2
    } else {
        StarClass::Other
    }
}

/// Is every `E` occurrence outside the scope of all quantifiers?
pub fn is_safe(f: &Formula) -> bool {
    match f {
        Formula::Forall(_, g)
        | Formula::Exists(_, g)
        | Formula::ForallMem(_, _, g)
        | Formula::ExistsMem(_, _, g) => !g.contains_e_atom(),
        Formula::Not(g) => is_safe(g),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            is_safe(a) && is_safe(b)
        }
        _ => true,
    }
}

// ---------------------------------------------------------------------------
// Peelings

/// The quantifier-leading subformulas of a formula, with the maximal
/// (outermost) ones set apart. Quoted sentences do not contribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeelingSet {
    /// All quantifier-leading subformula values.
    pub qa: BTreeSet<Formula>,
    /// The maximal members: outermost quantified occurrences. Pairwise
    /// non-overlapping by construction.
    pub max: BTreeSet<Formula>,
}

pub fn max_peelings(f: &Formula) -> PeelingSet {
    let mut qa = BTreeSet::new();
    let mut max = BTreeSet::new();
    collect_peelings(f, true, &mut qa, &mut max);
    PeelingSet { qa, max }
}

fn collect_peelings(
    f: &Formula,
    outermost: bool,
    qa: &mut BTreeSet<Formula>,
    max: &mut BTreeSet<Formula>,
) {
    match f {
        Formula::Forall(_, g) | Formula::Exists(_, g) => {
            qa.insert(f.clone());
            if outermost {
                max.insert(f.clone());
            }
            collect_peelings(g, false, qa, max);
        }
        Formula::ForallMem(_, _, g) | Formula::ExistsMem(_, _, g) => {
            qa.insert(f.clone());
            if outermost {
                max.insert(f.clone());
            }
            collect_peelings(g, false, qa, max);
        }
        Formula::Not(g) => collect_peelings(g, outermost, qa, max),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            collect_peelings(a, outermost, qa, max);
            collect_peelings(b, outermost, qa, max);
        }
        _ => {}
    }
}

// ---------------------------------------------------------------------------
// DNF₁: propositional disjunctive normal form over peeling-atoms

/// Negation normal form, treating quantified subformulas and all atoms as
/// opaque propositions; implications and biconditionals are expanded.
fn nnf(f: &Formula, positive: bool) -> Formula {
    match f {
        Formula::Not(g) => nnf(g, !positive),
        Formula::And(a, b) => {
            if positive {
                and(nnf(a, true), nnf(b, true))
            } else {
                Formula::Or(Box::new(nnf(a, false)), Box::new(nnf(b, false)))
            }
        }
        Formula::Or(a, b) => {
            if positive {
                Formula::Or(Box::new(nnf(a, true)), Box::new(nnf(b, true)))
            } else {
                and(nnf(a, false), nnf(b, false))
            }
        }
        Formula::Implies(a, b) => {
            if positive {
                Formula::Or(Box::new(nnf(a, false)), Box::new(nnf(b, true)))
            } else {
                and(nnf(a, true), nnf(b, false))
            }
        }
        Formula::Iff(a, b) => {
            if positive {
                Formula::Or(
                    Box::new(and(nnf(a, true), nnf(b, true))),
                    Box::new(and(nnf(a, false), nnf(b, false))),
                )
            } else {
                Formula::Or(
                    Box::new(and(nnf(a, true), nnf(b, false))),
                    Box::new(and(nnf(a, false), nnf(b, true))),
                )
            }
        }
        // Atoms and quantified subformulas are propositional units.
        other => {
            if positive {
                other.clone()
            } else {
                not(other.clone())
            }
        }
    }
}

/// Distributes conjunction over disjunction, flattening an NNF formula to a
/// list of disjuncts, each a list of conjunct literals.
fn dnf_lists(f: &Formula) -> Vec<Vec<Formula>> {
    match f {
        Formula::Or(a, b) => {
            let mut out = dnf_lists(a);
            out.extend(dnf_lists(b));
            out
        }
        Formula::And(a, b) => {
            let left = dnf_lists(a);
            let right = dnf_lists(b);
            let mut out = Vec::with_capacity(left.len() * right.len());
            for l in &left {
                for r in &right {
                    let mut c = l.clone();
                    c.extend(r.iter().cloned());
                    out.push(c);
                }
            }
            out
        }
        lit => vec![vec![lit.clone()]],
    }
}

fn canonicalize_lists(mut disjuncts: Vec<Vec<Formula>>) -> Vec<Vec<Formula>> {
    for conj in &mut disjuncts {
        conj.sort_by(canonical_cmp);
        conj.dedup();
    }
    disjuncts.sort_by(|a, b| and_all(a.clone()).to_string().cmp(&and_all(b.clone()).to_string()));
    disjuncts.dedup();
    disjuncts
}

fn rebuild(disjuncts: Vec<Vec<Formula>>) -> Formula {
    or_all(disjuncts.into_iter().map(and_all).collect())
}

/// Disjunctive normal form at the propositional level: peelings and atoms
/// are units. Fixed algorithm: negation normal form (with implication and
/// biconditional expansion), left-to-right distribution of ∧ over ∨, then
/// sorting of conjuncts and disjuncts in canonical print order with
/// deduplication. Idempotent and logically equivalent to the input.
pub fn dnf1(f: &Formula) -> Formula {
    rebuild(dnf1_lists(f))
}

fn dnf1_lists(f: &Formula) -> Vec<Vec<Formula>> {
    canonicalize_lists(dnf_lists(&nnf(f, true)))
}

/// Membership in the disjunction-of-conjunctions fragment: every conjunct
/// is a possibly negated unit, each unit being either `E`-free or an
/// `E`-atom.
pub fn in_d(f: &Formula) -> bool {
    fn unit_ok(u: &Formula) -> bool {
        matches!(u, Formula::E(_)) || !u.contains_e_atom()
    }
    fn conj_ok(f: &Formula) -> bool {
        match f {
            Formula::And(a, b) => conj_ok(a) && conj_ok(b),
            Formula::Not(g) => unit_ok(g),
            other => unit_ok(other),
        }
    }
    match f {
        Formula::Or(a, b) => in_d(a) && conj_ok(b),
        other => conj_ok(other),
    }
}

// ---------------------------------------------------------------------------
// WNF: recursive normalization into guard bodies

/// Witness normal form: [`dnf1`] applied recursively through the bodies of
/// guarded universals that contain `E`. Idempotent; logically equivalent to
/// the input. Errors on non-star-Δ0 input.
pub fn wnf(f: &Formula) -> Result<Formula> {
    if !is_star_delta0(f) {
        return Err(Error::Precondition(
            "witness normal form requires a star-Delta0 input".into(),
        ));
    }
    p_w(f)
}

fn p_w(f: &Formula) -> Result<Formula> {
    let fp = dnf1(f);
    map_max_peelings(&fp, &mut |peel| {
        if !peel.contains_e_atom() {
            return Ok(peel.clone());
        }
        let (z, p, body) = split_guard(peel).ok_or_else(|| {
            Error::Precondition("E-containing peeling is not a guarded universal".into())
        })?;
        Ok(guarded(z, p.clone(), p_w(body)?))
    })
}

/// Rewrites each outermost quantified subformula by `rw`, leaving the rest
/// of the tree intact.
fn map_max_peelings(
    f: &Formula,
    rw: &mut dyn FnMut(&Formula) -> Result<Formula>,
) -> Result<Formula> {
    match f {
        Formula::Forall(..) | Formula::Exists(..) | Formula::ForallMem(..)
        | Formula::ExistsMem(..) => rw(f),
        Formula::Not(g) => Ok(not(map_max_peelings(g, rw)?)),
        Formula::And(a, b) => Ok(and(map_max_peelings(a, rw)?, map_max_peelings(b, rw)?)),
        Formula::Or(a, b) => Ok(Formula::Or(
            Box::new(map_max_peelings(a, rw)?),
            Box::new(map_max_peelings(b, rw)?),
        )),
        Formula::Implies(a, b) => Ok(Formula::Implies(
            Box::new(map_max_peelings(a, rw)?),
            Box::new(map_max_peelings(b, rw)?),
        )),
        Formula::Iff(a, b) => Ok(Formula::Iff(
            Box::new(map_max_peelings(a, rw)?),
            Box::new(map_max_peelings(b, rw)?),
        )),
        other => Ok(other.clone()),
    }
}

// ---------------------------------------------------------------------------
// DNF: valuation-driven expansion of guard peelings

/// Fully expanded disjunctive normal form: all `E`-containing guarded
/// universals are unfolded over their (finite, structure-checked) bounds.
/// Requires the input to be a fixed point of [`wnf`] and the valuation to
/// cover its free variables; the result is in the fragment tested by
/// [`in_d`] and is safe.
pub fn dnf(f: &Formula, nu: &Valuation, a: &Structure) -> Result<Formula> {
    if wnf(f)? != *f {
        return Err(Error::Precondition(
            "expansion requires a witness-normal-form input".into(),
        ));
    }
    for v in f.free_vars() {
        nu.get(v).map_err(|_| {
            Error::Precondition(format!("valuation does not cover free variable v{v}"))
        })?;
    }
    p_0(f, nu, a)
}

fn p_0(f: &Formula, nu: &Valuation, a: &Structure) -> Result<Formula> {
    let disjuncts = dnf1_lists(f);
    let has_e_peeling = disjuncts.iter().flatten().any(|lit| {
        let core = match lit {
            Formula::Not(g) => g,
            other => other,
        };
        core.is_quantified() && core.contains_e_atom()
    });
    if !has_e_peeling {
        return Ok(rebuild(disjuncts));
    }
    let mut new_disjuncts = Vec::with_capacity(disjuncts.len());
    for conj in disjuncts {
        let mut new_conj = Vec::with_capacity(conj.len());
        for lit in conj {
            let (core, positive) = match &lit {
                Formula::Not(g) => ((**g).clone(), false),
                other => (other.clone(), true),
            };
            if !(core.is_quantified() && core.contains_e_atom()) {
                new_conj.push(lit);
                continue;
            }
            let (z, p, body) = match split_guard(&core) {
                Some(t) => t,
                None => {
                    return Err(Error::Precondition(
                        "E-containing peeling is not a guarded universal".into(),
                    ))
                }
            };
            new_conj.push(expand_peeling(z, p, body, positive, nu, a)?);
        }
        new_disjuncts.push(and_all(new_conj));
    }
    p_0(&or_all(new_disjuncts), nu, a)
}

/// Expands one guard peeling per the case split: positive occurrences become
/// conjunctions over the bound, negated ones disjunctions of negations; a
/// failing guard collapses to a truth value (or the negated guard when the
/// bound is a still-free variable).
fn expand_peeling(
    z: Var,
    p: &Term,
    body: &Formula,
    positive: bool,
    nu: &Valuation,
    a: &Structure,
) -> Result<Formula> {
    let (bound, free_bound_var) = match p {
        Term::Val(c) => (c.clone(), None),
        Term::Var(v) => (nu.get(*v)?, Some(*v)),
        Term::App(..) => {
            return Err(Error::Precondition(
                "guard bound must be a variable or a constant".into(),
            ))
        }
    };
    let guard_holds = !bound.is_empty();
    if guard_holds {
        for e in bound.elements() {
            if !a.base.contains(&e) {
                return Err(Error::Precondition(
                    "guard bound denotes a set not contained in the structure's base".into(),
                ));
            }
        }
    }
    let expanded = |negate: bool| -> Formula {
        let parts: Vec<Formula> = bound
            .elements()
            .into_iter()
            .map(|e| {
                let inst = body.subst(z, &e);
                if negate {
                    not(inst)
                } else {
                    inst
                }
            })
            .collect();
        if negate {
            or_all(parts)
        } else {
            and_all(parts)
        }
    };
    Ok(match (positive, guard_holds, free_bound_var) {
        (true, true, None) => expanded(false),
        (true, true, Some(v)) => and(Formula::Eq(Term::Var(v), Term::Val(bound.clone())), expanded(false)),
        (true, false, None) => truth(),
        (true, false, Some(v)) => not(Formula::Dfin(Term::Var(v))),
        (false, true, None) => expanded(true),
        (false, true, Some(v)) => and(Formula::Eq(Term::Var(v), Term::Val(bound.clone())), expanded(true)),
        (false, false, _) => falsity(),
    })
}

// ---------------------------------------------------------------------------
// pos, check, set_of, conv

/// Positivization: every subformula `¬E(s)` with `s` a quoted closed
/// sentence becomes `E(neg(s))`. Quoted sentences are assumed to be
/// language literals; variable and term arguments are untouched.
pub fn pos(f: &Formula) -> Formula {
    if let Formula::Not(g) = f {
        if let Formula::E(EArg::Sent(s)) = &**g {
            if s.free_vars().is_empty() {
                return Formula::E(EArg::Sent(Box::new(neg(s))));
            }
        }
    }
    map_children(f, &pos)
}

/// The membership gadget: every atomic `¬E(x)` with `x` a variable becomes
/// `(¬E(x) ∧ ("x ∈ L" ⟹ "E(¬x)"))`.
pub fn check(f: &Formula) -> Formula {
    if let Formula::Not(g) = f {
        if let Formula::E(EArg::Term(Term::Var(v))) = &**g {
            let v = *v;
            return and(
                f.clone(),
                Formula::Implies(
                    Box::new(Formula::InL(EArg::Term(Term::Var(v)))),
                    Box::new(Formula::E(EArg::NegTerm(Term::Var(v)))),
                ),
            );
        }
    }
    map_children(f, &check)
}

fn map_children(f: &Formula, rw: &dyn Fn(&Formula) -> Formula) -> Formula {
    match f {
        Formula::Not(g) => not(rw(g)),
        Formula::And(a, b) => and(rw(a), rw(b)),
        Formula::Or(a, b) => Formula::Or(Box::new(rw(a)), Box::new(rw(b))),
        Formula::Implies(a, b) => Formula::Implies(Box::new(rw(a)), Box::new(rw(b))),
        Formula::Iff(a, b) => Formula::Iff(Box::new(rw(a)), Box::new(rw(b))),
        Formula::Forall(v, g) => Formula::Forall(*v, Box::new(rw(g))),
        Formula::Exists(v, g) => Formula::Exists(*v, Box::new(rw(g))),
        Formula::ForallMem(v, t, g) => Formula::ForallMem(*v, t.clone(), Box::new(rw(g))),
        Formula::ExistsMem(v, t, g) => Formula::ExistsMem(*v, t.clone(), Box::new(rw(g))),
        other => other.clone(),
    }
}

/// The mentioned-sentence pair `(p, q)`: `q` collects the sentences under
/// `E`-atoms, `p` those whose negated atom `¬E(..)` never occurs. Term-form
/// arguments resolve through `index` (code → language sentence); unresolvable
/// arguments are skipped.
pub fn set_of_with(
    f: &Formula,
    index: &BTreeMap<Hf, Formula>,
) -> (BTreeSet<Formula>, BTreeSet<Formula>) {
    let mut q = BTreeSet::new();
    let mut negated = BTreeSet::new();
    scan_sets(f, index, &mut q, &mut negated);
    let p = q.difference(&negated).cloned().collect();
    (p, q)
}

/// As [`set_of_with`] with no code index: only quoted sentences contribute.
pub fn set_of(f: &Formula) -> (BTreeSet<Formula>, BTreeSet<Formula>) {
    set_of_with(f, &BTreeMap::new())
}

fn resolve_sentence(arg: &EArg, index: &BTreeMap<Hf, Formula>) -> Option<Formula> {
    match arg {
        EArg::Sent(s) if s.free_vars().is_empty() => Some((**s).clone()),
        EArg::Term(Term::Val(c)) => index.get(c).cloned(),
        EArg::NegTerm(Term::Val(c)) => index.get(c).map(neg),
        _ => None,
    }
}

fn scan_sets(
    f: &Formula,
    index: &BTreeMap<Hf, Formula>,
    q: &mut BTreeSet<Formula>,
    negated: &mut BTreeSet<Formula>,
) {
    if let Formula::Not(g) = f {
        if let Formula::E(arg) = &**g {
            if let Some(s) = resolve_sentence(arg, index) {
                negated.insert(s);
            }
        }
    }
    match f {
        Formula::E(arg) => {
            if let Some(s) = resolve_sentence(arg, index) {
                q.insert(s);
            }
        }
        Formula::Not(g) => scan_sets(g, index, q, negated),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            scan_sets(a, index, q, negated);
            scan_sets(b, index, q, negated);
        }
        Formula::Forall(_, g)
        | Formula::Exists(_, g)
        | Formula::ForallMem(_, _, g)
        | Formula::ExistsMem(_, _, g) => scan_sets(g, index, q, negated),
        _ => {}
    }
}

/// Conversion of an existential sentence: normalizes the matrix through
/// [`wnf`], positivizes, and installs the membership gadget, keeping the
/// existential prefix. Errors on non-star-Σ1 input.
pub fn conv(f: &Formula) -> Result<Formula> {
    let (vars, matrix) = strip_exists(f)
        .filter(|(_, m)| is_star_delta0(m))
        .ok_or_else(|| Error::Precondition("conversion requires a star-Sigma1 input".into()))?;
    let mut out = check(&pos(&wnf(matrix)?));
    for v in vars.into_iter().rev() {
        out = Formula::Exists(v, Box::new(out));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Witness extraction for existential sentences

/// From a fragment `x` star-satisfying the star-Σ1 sentence `f`, extracts a
/// finite pair `(p, q)` with `x ∩ q = p` such that every fragment agreeing
/// with `x` on `q` also satisfies `f`. Returns `None` when `x` does not
/// satisfy `f`.
pub fn extract_witness_pair(
    f: &Formula,
    x: &BTreeSet<Formula>,
    ctx: &crate::sat::SatCtx,
) -> Result<Option<(BTreeSet<Formula>, BTreeSet<Formula>)>> {
    let nu = Valuation::empty(ctx.a);
    if !crate::sat::sat_with(ctx, x, &nu, f)? {
        return Ok(None);
    }
    // Walk the existential prefix, fixing witnesses one variable at a time.
    let (vars, matrix) = strip_exists(f)
        .filter(|(_, m)| is_star_delta0(m))
        .ok_or_else(|| Error::Precondition("extraction requires a star-Sigma1 input".into()))?;
    let mut grounded = matrix.clone();
    let mut remaining: Vec<Var> = vars;
    while let Some(v) = remaining.first().copied() {
        let mut found = None;
        for e in ctx.a.base.iter() {
            let candidate = grounded.subst(v, e);
            let rest = remaining[1..]
                .iter()
                .rev()
                .fold(candidate.clone(), |acc, w| Formula::Exists(*w, Box::new(acc)));
            if crate::sat::sat_with(ctx, x, &nu, &rest)? {
                found = Some(candidate);
                break;
            }
        }
        grounded = found.ok_or_else(|| {
            Error::Eval("satisfied existential has no base witness".into())
        })?;
        remaining.remove(0);
    }
    // Expand to the disjunctive fragment and pick a satisfied disjunct.
    let expanded = dnf(&wnf(&grounded)?, &nu, ctx.a)?;
    let mut disjuncts = vec![];
    flatten_or(&expanded, &mut disjuncts);
    let index = code_index_of(ctx)?;
    for d in disjuncts {
        if crate::sat::sat_with(ctx, x, &nu, &d)? {
            let (_, q) = set_of_with(&d, &index);
            let q: BTreeSet<Formula> = q;
            let p: BTreeSet<Formula> = x.intersection(&q).cloned().collect();
            return Ok(Some((p, q)));
        }
    }
    Err(Error::Eval(
        "satisfied sentence has no satisfied disjunct after expansion".into(),
    ))
}

fn flatten_or(f: &Formula, out: &mut Vec<Formula>) {
    match f {
        Formula::Or(a, b) => {
            flatten_or(a, out);
            flatten_or(b, out);
        }
        other => out.push(other.clone()),
    }
}

fn code_index_of(ctx: &crate::sat::SatCtx) -> Result<BTreeMap<Hf, Formula>> {
    let mut out = BTreeMap::new();
    if let Some(lang) = &ctx.lang {
        for s in lang {
            out.insert(crate::coding::formula_code(s, &ctx.syms)?, s.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::formula_code;
    use crate::formula::{close_under_negation, implies, is_nice, or};
    use crate::hf::hf_universe;
    use crate::sat::{sat_with, SatCtx};

    fn rel(name: &str) -> Formula {
        Formula::Rel(name.to_string(), vec![])
    }

    fn e_of(s: &Formula) -> Formula {
        Formula::E(EArg::Sent(Box::new(s.clone())))
    }

    #[test]
    fn pos_examples() {
        let a = rel("a");
        let b = rel("b");
        assert_eq!(pos(&not(e_of(&a))), e_of(&neg(&a)));
        assert_eq!(pos(&e_of(&a)), e_of(&a));
        assert_eq!(
            pos(&and(e_of(&a), not(e_of(&b)))),
            and(e_of(&a), e_of(&neg(&b)))
        );
        // Variable arguments are never rewritten.
        let varatom = not(Formula::E(EArg::Term(Term::Var(0))));
        assert_eq!(pos(&varatom), varatom);
    }

    #[test]
    fn set_of_examples() {
        let a = rel("a");
        let b = rel("b");
        let (p, q) = set_of(&and(e_of(&a), not(e_of(&b))));
        assert_eq!(p, [a.clone()].into());
        assert_eq!(q, [a.clone(), b.clone()].into());
        let (p, q) = set_of(&e_of(&a));
        assert_eq!((p, q), ([a.clone()].into(), [a].into()));
        let (p, q) = set_of(&not(e_of(&b)));
        assert_eq!((p, q), (BTreeSet::new(), [b].into()));
    }

    #[test]
    fn peeling_examples() {
        let p = Formula::Rel("P".into(), vec![Term::Var(0)]);
        let q = rel("Q");
        let outer = crate::formula::forall(0, p.clone());
        let f = and(outer.clone(), q.clone());
        let ps = max_peelings(&f);
        assert_eq!(ps.max, [outer.clone()].into());
        assert_eq!(ps.qa, [outer].into());

        assert!(max_peelings(&and(q.clone(), rel("R"))).max.is_empty());

        let r = Formula::Rel("R".into(), vec![Term::Var(0), Term::Var(1)]);
        let inner = crate::formula::exists(1, r);
        let whole = crate::formula::forall(0, and(p, inner.clone()));
        let ps = max_peelings(&whole);
        assert_eq!(ps.max, [whole.clone()].into());
        assert!(ps.qa.contains(&inner));
    }

    #[test]
    fn dnf1_distributes_and_sorts() {
        let a = rel("A");
        let b = rel("B");
        let c = rel("C");
        let f = and(or(a.clone(), b.clone()), c.clone());
        let out = dnf1(&f);
        assert_eq!(out, or(and(a.clone(), c.clone()), and(b, c.clone())));
        // Idempotence.
        assert_eq!(dnf1(&out), out);
        // Already-DNF input is returned unchanged.
        let g = or(and(a.clone(), c.clone()), a.clone());
        assert_eq!(dnf1(&dnf1(&g)), dnf1(&g));
    }

    /// Propositional evaluation treating atoms and peelings as variables.
    fn prop_eval(f: &Formula, assign: &BTreeMap<Formula, bool>) -> bool {
        match f {
            Formula::Not(g) => !prop_eval(g, assign),
            Formula::And(a, b) => prop_eval(a, assign) && prop_eval(b, assign),
            Formula::Or(a, b) => prop_eval(a, assign) || prop_eval(b, assign),
            Formula::Implies(a, b) => !prop_eval(a, assign) || prop_eval(b, assign),
            Formula::Iff(a, b) => prop_eval(a, assign) == prop_eval(b, assign),
            atom => *assign.get(atom).expect("unassigned atom"),
        }
    }

    #[test]
    fn dnf1_truth_table_equivalence() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let atoms: Vec<Formula> = (0..4).map(|i| rel(&format!("p{i}"))).collect();
        let mut rng = StdRng::seed_from_u64(7);
        fn gen(rng: &mut StdRng, atoms: &[Formula], d: u32) -> Formula {
            if d == 0 {
                return atoms[rng.gen_range(0..atoms.len())].clone();
            }
            match rng.gen_range(0..5) {
                0 => not(gen(rng, atoms, d - 1)),
                1 => and(gen(rng, atoms, d - 1), gen(rng, atoms, d - 1)),
                2 => or(gen(rng, atoms, d - 1), gen(rng, atoms, d - 1)),
                3 => implies(gen(rng, atoms, d - 1), gen(rng, atoms, d - 1)),
                _ => crate::formula::iff(gen(rng, atoms, d - 1), gen(rng, atoms, d - 1)),
            }
        }
        for _ in 0..60 {
            let f = gen(&mut rng, &atoms, 4);
            let g = dnf1(&f);
            for bits in 0..16u32 {
                let assign: BTreeMap<Formula, bool> = atoms
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (a.clone(), bits >> i & 1 == 1))
                    .collect();
                assert_eq!(prop_eval(&f, &assign), prop_eval(&g, &assign), "on {f}");
            }
        }
    }

    #[test]
    fn wnf_recurses_into_guard_bodies() {
        let a = e_of(&rel("a"));
        let b = e_of(&rel("b"));
        let c = e_of(&rel("c"));
        // Quantifier-free input: same as dnf1.
        let qf = and(or(a.clone(), b.clone()), c.clone());
        assert_eq!(wnf(&qf).unwrap(), dnf1(&qf));
        // Guarded body gets normalized in place.
        let g = guarded(1, Term::Var(0), qf.clone());
        let out = wnf(&g).unwrap();
        assert_eq!(out, guarded(1, Term::Var(0), dnf1(&qf)));
        // Fixed point.
        assert_eq!(wnf(&out).unwrap(), out);
        // Non-star-Δ0 input rejected.
        assert!(wnf(&crate::formula::exists(0, a)).is_err());
    }

    fn star_fixture() -> (Structure, Vec<Formula>, BTreeSet<Formula>) {
        // Language: two complementary pairs of simple relational sentences.
        let pos_sents = vec![rel("s0"), rel("s1")];
        let lang = close_under_negation(&pos_sents.iter().cloned().collect());
        let mut base: BTreeSet<Hf> = hf_universe(3).into_iter().collect();
        let names: Vec<String> = vec!["s0".into(), "s1".into()];
        let syms = crate::coding::SymbolCoder::new(&names);
        for s in &lang {
            let code = formula_code(s, &syms).unwrap();
            for t in code.trcl() {
                base.insert(t);
            }
            base.insert(code);
        }
        let mut a = Structure::new(base);
        a.add_relation("s0", 0, vec![]);
        a.add_relation("s1", 0, vec![]);
        (a, pos_sents, lang)
    }

    #[test]
    fn dnf_expands_constant_bounds() {
        let (a, pos_sents, lang) = star_fixture();
        let x: BTreeSet<Formula> = [pos_sents[0].clone()].into();
        let ctx = SatCtx::for_fragment(&a, &x).unwrap();
        let c0 = formula_code(&pos_sents[0], &ctx.syms).unwrap();
        let c1 = formula_code(&pos_sents[1], &ctx.syms).unwrap();
        let bound = Hf::set(vec![c0.clone(), c1.clone()]);
        let body = Formula::E(EArg::Term(Term::Var(1)));
        let f = wnf(&guarded(1, Term::Val(bound), body)).unwrap();
        let nu = Valuation::empty(&a);
        let out = dnf(&f, &nu, &a).unwrap();
        let expected = dnf1(&and(
            Formula::E(EArg::Term(Term::Val(c0))),
            Formula::E(EArg::Term(Term::Val(c1))),
        ));
        assert_eq!(out, expected);
        assert!(in_d(&out));
        assert!(is_safe(&out));
        let _ = lang;

        // Empty bound, positive occurrence: truth.
        let f = wnf(&guarded(1, Term::Val(Hf::empty()), Formula::E(EArg::Term(Term::Var(1)))))
            .unwrap();
        assert_eq!(dnf(&f, &nu, &a).unwrap(), truth());

        // Negated occurrence over a singleton bound.
        let c0 = formula_code(&pos_sents[0], &ctx.syms).unwrap();
        let peel = guarded(1, Term::Val(Hf::set(vec![c0.clone()])), Formula::E(EArg::Term(Term::Var(1))));
        let f = wnf(&not(peel)).unwrap();
        let out = dnf(&f, &nu, &a).unwrap();
        assert_eq!(out, not(Formula::E(EArg::Term(Term::Val(c0)))));
    }

    #[test]
    fn dnf_rejects_out_of_base_bounds() {
        let (a, _, _) = star_fixture();
        // A bound containing an element outside the base (a deep set).
        let deep = Hf::set(vec![Hf::set(vec![Hf::nat(3)])]);
        let f = wnf(&guarded(1, Term::Val(Hf::set(vec![deep])), Formula::E(EArg::Term(Term::Var(1)))))
            .unwrap();
        let nu = Valuation::empty(&a);
        assert!(dnf(&f, &nu, &a).is_err());
    }

    #[test]
    fn dnf_free_variable_bound() {
        let (a, pos_sents, _) = star_fixture();
        let ctx = SatCtx::for_fragment(&a, &BTreeSet::new()).unwrap();
        let c0 = formula_code(&pos_sents[0], &ctx.syms).unwrap();
        let f = wnf(&guarded(1, Term::Var(0), Formula::E(EArg::Term(Term::Var(1))))).unwrap();
        let nu = Valuation::empty(&a).with(0, Hf::set(vec![c0.clone()]));
        let out = dnf(&f, &nu, &a).unwrap();
        // Guard holds: p = ν(p) conjunct plus the expansion.
        let expected = dnf1(&and(
            Formula::Eq(Term::Var(0), Term::Val(Hf::set(vec![c0.clone()]))),
            Formula::E(EArg::Term(Term::Val(c0))),
        ));
        assert_eq!(out, expected);
        // Guard fails: negated guard literal survives.
        let nu = Valuation::empty(&a).with(0, Hf::empty());
        let out = dnf(&f, &nu, &a).unwrap();
        assert_eq!(out, not(Formula::Dfin(Term::Var(0))));
    }

    #[test]
    fn check_examples() {
        let v0 = Formula::E(EArg::Term(Term::Var(0)));
        let out = check(&not(v0.clone()));
        assert_eq!(
            out,
            and(
                not(v0.clone()),
                implies(
                    Formula::InL(EArg::Term(Term::Var(0))),
                    Formula::E(EArg::NegTerm(Term::Var(0)))
                )
            )
        );
        let a = e_of(&rel("a"));
        assert_eq!(check(&a), a);
    }

    #[test]
    fn conv_examples() {
        let v0 = Formula::E(EArg::Term(Term::Var(0)));
        let f = crate::formula::exists(0, not(v0.clone()));
        let out = conv(&f).unwrap();
        assert_eq!(out, crate::formula::exists(0, check(&not(v0))));
        // n = 0 case.
        let a = e_of(&rel("a"));
        assert_eq!(conv(&a).unwrap(), a);
        // Non-star-Σ1 rejected.
        assert!(conv(&crate::formula::forall(0, Formula::E(EArg::Term(Term::Var(0))))).is_err());
    }

    #[test]
    fn classification_tags() {
        let a = e_of(&rel("a"));
        assert_eq!(classify_star(&a), StarClass::Delta0);
        let s1 = crate::formula::exists(0, Formula::E(EArg::Term(Term::Var(0))));
        assert_eq!(classify_star(&s1), StarClass::Sigma1);
        let p2 = crate::formula::forall(1, s1.clone());
        assert_eq!(classify_star(&p2), StarClass::Pi2);
        let other = crate::formula::exists(0, crate::formula::forall(1, a.clone()));
        assert_eq!(classify_star(&other), StarClass::Other);
        // Guarded universals live inside star-Δ0.
        let g = guarded(1, Term::Var(0), Formula::E(EArg::Term(Term::Var(1))));
        assert_eq!(classify_star(&g), StarClass::Delta0);
        // Bounded membership quantifiers without star atoms are base.
        let b = Formula::ForallMem(
            0,
            Term::Val(Hf::nat(2)),
            Box::new(Formula::Eq(Term::Var(0), Term::Var(0))),
        );
        assert_eq!(classify_star(&b), StarClass::Delta0);
    }

    #[test]
    fn pos_equivalence_on_nice_fragments() {
        // For nice fragments, satisfaction is invariant under pos.
        let (a, pos_sents, lang) = star_fixture();
        let nu = Valuation::empty(&a);
        let candidates: Vec<Formula> = vec![
            not(e_of(&pos_sents[0])),
            and(e_of(&pos_sents[1]), not(e_of(&neg(&pos_sents[0])))),
            or(not(e_of(&pos_sents[0])), not(e_of(&pos_sents[1]))),
            implies(e_of(&pos_sents[0]), not(e_of(&pos_sents[1]))),
        ];
        for bits in 0..4u32 {
            let sigma: BTreeSet<Formula> = pos_sents
                .iter()
                .enumerate()
                .map(|(i, s)| if bits >> i & 1 == 1 { s.clone() } else { neg(s) })
                .collect();
            assert!(is_nice(&sigma, &lang));
            let ctx = SatCtx::new(&a, Some(lang.clone()), crate::coding::SymbolCoder::new(&["s0".into(), "s1".into()])).unwrap();
            for f in &candidates {
                let lhs = sat_with(&ctx, &sigma, &nu, f).unwrap();
                let rhs = sat_with(&ctx, &sigma, &nu, &pos(f)).unwrap();
                assert_eq!(lhs, rhs, "pos changed satisfaction of {f}");
            }
        }
    }

    #[test]
    fn postrue_monotone_on_literal_conjunctions() {
        // Fragments satisfying the converted form keep satisfying it when
        // extended nicely.
        let (a, pos_sents, lang) = star_fixture();
        let nu = Valuation::empty(&a);
        let ctx = SatCtx::new(
            &a,
            Some(lang.clone()),
            crate::coding::SymbolCoder::new(&["s0".into(), "s1".into()]),
        )
        .unwrap();
        let conjunctions = vec![
            and(e_of(&pos_sents[0]), not(e_of(&pos_sents[1]))),
            not(e_of(&pos_sents[0])),
            and(e_of(&neg(&pos_sents[0])), e_of(&pos_sents[1])),
        ];
        let subsets: Vec<BTreeSet<Formula>> = {
            let members: Vec<Formula> = lang.iter().cloned().collect();
            (0..1u32 << members.len())
                .map(|bits| {
                    members
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| bits >> i & 1 == 1)
                        .map(|(_, s)| s.clone())
                        .collect()
                })
                .collect()
        };
        for f in &conjunctions {
            let g = check(&pos(f));
            for sigma in &subsets {
                if !sat_with(&ctx, sigma, &nu, &g).unwrap() {
                    continue;
                }
                for bigger in &subsets {
                    if sigma.is_subset(bigger) && is_nice(bigger, &lang) {
                        assert!(
                            sat_with(&ctx, bigger, &nu, &g).unwrap(),
                            "monotonicity failed: {f}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn conv_transfer_property() {
        // A fragment satisfying the converted sentence forces every nice
        // extension to satisfy the original.
        let (a, pos_sents, _) = star_fixture();
        // Widen to a three-pair language for more room.
        let mut positives = pos_sents.clone();
        positives.push(rel("s2"));
        let lang = close_under_negation(&positives.iter().cloned().collect());
        let mut base = a.base.clone();
        let names: Vec<String> = vec!["s0".into(), "s1".into(), "s2".into()];
        let syms = crate::coding::SymbolCoder::new(&names);
        for s in &lang {
            let code = formula_code(s, &syms).unwrap();
            for t in code.trcl() {
                base.insert(t);
            }
            base.insert(code);
        }
        let mut a = Structure::new(base);
        for n in &names {
            a.add_relation(n, 0, vec![]);
        }
        let ctx = SatCtx::new(&a, Some(lang.clone()), syms).unwrap();
        let nu = Valuation::empty(&a);

        let candidates = vec![
            e_of(&positives[0]),
            and(e_of(&positives[0]), not(e_of(&positives[1]))),
            or(e_of(&neg(&positives[2])), e_of(&positives[1])),
        ];
        let members: Vec<Formula> = lang.iter().cloned().collect();
        for f in &candidates {
            let cf = conv(f).unwrap();
            for bits in 0..1u64 << members.len() {
                let small: BTreeSet<Formula> = members
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| bits >> i & 1 == 1)
                    .map(|(_, s)| s.clone())
                    .collect();
                if !sat_with(&ctx, &small, &nu, &cf).unwrap() {
                    continue;
                }
                for nice_bits in 0..1u32 << positives.len() {
                    let big: BTreeSet<Formula> = positives
                        .iter()
                        .enumerate()
                        .map(|(i, s)| if nice_bits >> i & 1 == 1 { s.clone() } else { neg(s) })
                        .collect();
                    if small.is_subset(&big) {
                        assert!(
                            sat_with(&ctx, &big, &nu, f).unwrap(),
                            "transfer failed for {f}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn extraction_pins_satisfaction() {
        let (a, pos_sents, lang) = star_fixture();
        let ctx = SatCtx::new(
            &a,
            Some(lang.clone()),
            crate::coding::SymbolCoder::new(&["s0".into(), "s1".into()]),
        )
        .unwrap();
        let nu = Valuation::empty(&a);
        let c0 = formula_code(&pos_sents[0], &ctx.syms).unwrap();
        let c1 = formula_code(&pos_sents[1], &ctx.syms).unwrap();
        let bound = Hf::set(vec![c0.clone(), c1.clone()]);
        // ∃y (y ∈ bound-ish talk): a guarded body with an existential prefix.
        let f = crate::formula::exists(
            2,
            and(
                Formula::Mem(Term::Var(2), Term::Val(bound)),
                Formula::E(EArg::Term(Term::Var(2))),
            ),
        );
        let x: BTreeSet<Formula> = [pos_sents[1].clone()].into();
        let got = extract_witness_pair(&f, &x, &ctx).unwrap();
        let (p, q) = got.expect("x satisfies f");
        assert_eq!(x.intersection(&q).cloned().collect::<BTreeSet<_>>(), p);
        // Every fragment agreeing with x on q satisfies f.
        let members: Vec<Formula> = lang.iter().cloned().collect();
        for bits in 0..1u32 << members.len() {
            let xp: BTreeSet<Formula> = members
                .iter()
                .enumerate()
                .filter(|(i, _)| bits >> i & 1 == 1)
                .map(|(_, s)| s.clone())
                .collect();
            if xp.intersection(&q).cloned().collect::<BTreeSet<_>>() == p {
                assert!(sat_with(&ctx, &xp, &nu, &f).unwrap());
            }
        }
    }
}
