//! Theories with constraints in interpretation.
//!
//! A constrained theory fixes a first-order theory over a signature, plus a
//! constraint map sending the universe predicate and every signature symbol
//! to a set bounding its interpretation, each tagged `subset` or `exact`.
//! From such a datum this module synthesizes a literal certification
//! language, a background structure, and a sentence list whose fragment
//! models correspond exactly to the constrained models of the theory.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::formula::{
    and, and_all, exists, forall, implies, neg, not, or_all, Formula, Symbol, SymbolKind,
    Term, Var,
};
use crate::formula::{close_under_negation, EArg};
use crate::hf::Hf;
use crate::sat::sat;
use crate::structure::{Structure, Valuation};

// ---------------------------------------------------------------------------
// Constraint extensions

/// The set component of a constraint: an explicit hereditarily finite set,
/// the naturals, or the set of fixed-width tuples of naturals. The
/// unbounded variants are materialized up to a working cap wherever a
/// finite enumeration is needed; exact membership is decided without a cap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ext {
    Explicit(BTreeSet<Hf>),
    Omega,
    /// Tuples of naturals of the given width (at least 2).
    OmegaTuples(usize),
}

impl Ext {
    pub fn explicit(items: impl IntoIterator<Item = Hf>) -> Ext {
        Ext::Explicit(items.into_iter().collect())
    }

    /// Exact membership, independent of any cap.
    pub fn contains(&self, x: &Hf) -> bool {
        match self {
            Ext::Explicit(s) => s.contains(x),
            Ext::Omega => x.as_nat().is_some(),
            Ext::OmegaTuples(w) => match x.untuple(*w) {
                Some(parts) => parts.iter().all(|p| p.as_nat().is_some()),
                None => false,
            },
        }
    }

    /// Finite materialization. Explicit sets ignore the cap; the unbounded
    /// variants truncate the naturals at `cap`.
    pub fn members_at(&self, cap: u32) -> Vec<Hf> {
        match self {
            Ext::Explicit(s) => s.iter().cloned().collect(),
            Ext::Omega => (0..cap as u64).map(Hf::nat).collect(),
            Ext::OmegaTuples(w) => {
                let base: Vec<Hf> = (0..cap as u64).map(Hf::nat).collect();
                cartesian(&base, *w).into_iter().map(|t| Hf::tuple(&t)).collect()
            }
        }
    }

    /// Does materialization depend on the cap?
    pub fn is_capped(&self) -> bool {
        !matches!(self, Ext::Explicit(_))
    }
}

/// A constraint `(y, mode)`: the extension set and whether the constrained
/// interpretation must exhaust it (`exact`) or merely fit inside it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub ext: Ext,
    pub exact: bool,
}

impl Constraint {
    pub fn subset(ext: Ext) -> Constraint {
        Constraint { ext, exact: false }
    }
    pub fn exact(ext: Ext) -> Constraint {
        Constraint { ext, exact: true }
    }
}

/// An axiom schema standing for an infinite sentence family. Stored
/// symbolically: materialization yields the instances up to `max_inst`,
/// while consistency analysis may reason about the whole family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Schema {
    /// For every `1 < n`, the demand that an `R`-chain of `n` points
    /// exists: `∃x₁…∃xₙ ⋀ R(xₖ, xₖ₊₁)`.
    Chains { rel: String, max_inst: u32 },
}

impl Schema {
    pub fn instances(&self) -> Vec<Formula> {
        match self {
            Schema::Chains { rel, max_inst } => {
                (2..=*max_inst).map(|n| chain_sentence(rel, n)).collect()
            }
        }
    }
}

/// The sentence `∃x₁…∃xₙ ⋀_{k<n} R(xₖ, xₖ₊₁)`.
pub fn chain_sentence(rel: &str, n: u32) -> Formula {
    assert!(n >= 2);
    let conj = and_all(
        (0..n - 1)
            .map(|k| Formula::Rel(rel.to_string(), vec![Term::Var(k), Term::Var(k + 1)]))
            .collect(),
    );
    let mut f = conj;
    for v in (0..n).rev() {
        f = exists(v, f);
    }
    f
}

// ---------------------------------------------------------------------------
// The main datum

/// A theory with constraints in interpretation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tci {
    /// The theory's signature (the universe predicate is not part of it).
    pub sigma: BTreeMap<String, Symbol>,
    /// Name of the distinguished universe predicate.
    pub u_name: String,
    /// Constraints, keyed by the universe predicate's name and every
    /// signature symbol's name.
    pub theta: BTreeMap<String, Constraint>,
    /// Concrete theory sentences.
    pub theory: Vec<Formula>,
    /// Optional infinite sentence family.
    pub schema: Option<Schema>,
}

/// How many coordinates a symbol's constrained tuples carry: a relation's
/// arity, a function's arity plus one (for the value), one for a constant.
pub fn tuple_width(sym: &Symbol) -> usize {
    match sym.kind {
        SymbolKind::Relation => sym.arity,
        SymbolKind::Function => sym.arity + 1,
        SymbolKind::Constant => 1,
    }
}

fn cartesian(base: &[Hf], w: usize) -> Vec<Vec<Hf>> {
    let mut out: Vec<Vec<Hf>> = vec![vec![]];
    for _ in 0..w {
        let mut next = Vec::with_capacity(out.len() * base.len());
        for t in &out {
            for b in base {
                let mut t2 = t.clone();
                t2.push(b.clone());
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

/// Splits an extension member into its coordinates: a plain element for
/// width one, a left-nested tuple otherwise.
fn split_member(x: &Hf, w: usize) -> Option<Vec<Hf>> {
    if w == 1 {
        Some(vec![x.clone()])
    } else {
        x.untuple(w)
    }
}

impl Tci {
    /// Builds and validates a constrained theory. The constraint map must
    /// cover the universe predicate and every signature symbol; every
    /// symbol constraint must consist of width-`w` tuples over the universe
    /// constraint's set; and the universe set must be disjoint from its own
    /// tuple powers, so that literals never collide across symbols.
    pub fn new(
        sigma: impl IntoIterator<Item = Symbol>,
        u_name: &str,
        u_constraint: Constraint,
        constraints: impl IntoIterator<Item = (String, Constraint)>,
        theory: Vec<Formula>,
        schema: Option<Schema>,
    ) -> Result<Tci> {
        let sigma: BTreeMap<String, Symbol> =
            sigma.into_iter().map(|s| (s.name.clone(), s)).collect();
        if sigma.contains_key(u_name) {
            return Err(Error::Invalid(format!(
                "the universe predicate `{u_name}` cannot also be a signature symbol"
            )));
        }
        let mut theta: BTreeMap<String, Constraint> =
            constraints.into_iter().collect();
        theta.insert(u_name.to_string(), u_constraint);
        let tci = Tci { sigma, u_name: u_name.to_string(), theta, theory, schema };
        tci.validate()?;
        Ok(tci)
    }

    fn validate(&self) -> Result<()> {
        let uc = self
            .theta
            .get(&self.u_name)
            .ok_or_else(|| Error::Invalid("missing universe constraint".into()))?;
        let mut max_width = 1;
        for sym in self.sigma.values() {
            if sym.kind == SymbolKind::Relation && sym.arity == 0 {
                return Err(Error::Invalid(format!(
                    "relation `{}` must have positive arity",
                    sym.name
                )));
            }
            let w = tuple_width(sym);
            max_width = max_width.max(w);
            let c = self.theta.get(&sym.name).ok_or_else(|| {
                Error::Invalid(format!("symbol `{}` has no constraint", sym.name))
            })?;
            match &c.ext {
                Ext::Explicit(items) => {
                    for x in items {
                        let parts = split_member(x, w).ok_or_else(|| {
                            Error::Invalid(format!(
                                "constraint member of `{}` is not a width-{w} tuple",
                                sym.name
                            ))
                        })?;
                        for p in &parts {
                            if !uc.ext.contains(p) {
                                return Err(Error::Invalid(format!(
                                    "constraint member of `{}` has a coordinate outside \
                                     the universe set",
                                    sym.name
                                )));
                            }
                        }
                    }
                }
                Ext::Omega => {
                    if w != 1 || !matches!(uc.ext, Ext::Omega) {
                        return Err(Error::Invalid(format!(
                            "an unbounded constraint for `{}` needs width 1 over the \
                             unbounded universe",
                            sym.name
                        )));
                    }
                }
                Ext::OmegaTuples(tw) => {
                    if *tw != w || !matches!(uc.ext, Ext::Omega) {
                        return Err(Error::Invalid(format!(
                            "an unbounded tuple constraint for `{}` needs width {w} over \
                             the unbounded universe",
                            sym.name
                        )));
                    }
                }
            }
        }
        // The universe set must be disjoint from its own tuple powers;
        // otherwise a single set element could double as a literal tuple.
        // Naturals are automatically disjoint from nested pairs of
        // naturals (a von Neumann natural never has a singleton element,
        // while every pair does), so only explicit sets need the scan.
        if let Ext::Explicit(items) = &uc.ext {
            for x in items {
                for w in 2..=max_width.max(2) {
                    if let Some(parts) = x.untuple(w) {
                        if parts.iter().all(|p| uc.ext.contains(p)) {
                            return Err(Error::Invalid(
                                "universe set meets its own tuple power; constrained \
                                 literals would be ambiguous"
                                    .into(),
                            ));
                        }
                    }
                }
            }
        }
        for name in self.theta.keys() {
            if name != &self.u_name && !self.sigma.contains_key(name) {
                return Err(Error::Invalid(format!(
                    "constraint for `{name}` has no matching signature symbol"
                )));
            }
        }
        Ok(())
    }

    pub fn u_constraint(&self) -> &Constraint {
        &self.theta[&self.u_name]
    }

    /// Is the whole datum finite, independent of any cap?
    pub fn is_finite_scope(&self) -> bool {
        self.theta.values().all(|c| !c.ext.is_capped()) && self.schema.is_none()
    }

    /// The concrete theory sentences plus the materialized schema
    /// instances.
    pub fn theory_list(&self) -> Vec<Formula> {
        let mut out = self.theory.clone();
        if let Some(s) = &self.schema {
            out.extend(s.instances());
        }
        out
    }

    /// The same datum with the schema replaced by its materialized
    /// instances; the infinite family is truncated away.
    pub fn materialized(&self) -> Tci {
        Tci {
            sigma: self.sigma.clone(),
            u_name: self.u_name.clone(),
            theta: self.theta.clone(),
            theory: self.theory_list(),
            schema: None,
        }
    }

    /// The universe constraint's members at the cap, sorted.
    pub fn universe_at(&self, cap: u32) -> Vec<Hf> {
        let mut u = self.u_constraint().ext.members_at(cap);
        u.sort();
        u
    }

    // -----------------------------------------------------------------------
    // Literal language and background structure

    /// The positive half of the literal language at the cap: one literal
    /// for each universe element, and one for each constrained tuple whose
    /// coordinates lie in the universe set.
    pub fn pos_lang_at(&self, cap: u32) -> Result<BTreeSet<Formula>> {
        let uni: BTreeSet<Hf> = self.universe_at(cap).into_iter().collect();
        let mut pos = BTreeSet::new();
        for x in &uni {
            pos.insert(Formula::Rel(self.u_name.clone(), vec![Term::Val(x.clone())]));
        }
        for (name, sym) in &self.sigma {
            let w = tuple_width(sym);
            let c = &self.theta[name];
            for m in c.ext.members_at(cap) {
                let parts = split_member(&m, w).ok_or_else(|| {
                    Error::Invalid(format!("malformed constraint member for `{name}`"))
                })?;
                if !parts.iter().all(|p| uni.contains(p)) {
                    continue;
                }
                pos.insert(literal_shape(sym, &parts));
            }
        }
        Ok(pos)
    }

    /// The background structure at the cap: the transitive closure of the
    /// universe set and of every constraint member, with the universe
    /// predicate and the signature declared (but not interpreted).
    pub fn structure_at(&self, cap: u32) -> Result<Structure> {
        let mut base: BTreeSet<Hf> = BTreeSet::new();
        let mut add = |x: &Hf| {
            base.insert(x.clone());
            for t in x.trcl() {
                base.insert(t);
            }
        };
        for x in self.universe_at(cap) {
            add(&x);
        }
        for c in self.theta.values() {
            for m in c.ext.members_at(cap) {
                add(&m);
            }
        }
        let mut a = Structure::new(base);
        a.declare(Symbol::relation(&self.u_name, 1));
        for sym in self.sigma.values() {
            a.declare(sym.clone());
        }
        Ok(a)
    }

    // -----------------------------------------------------------------------
    // Certification sentences

    /// Synthesizes the certification language: background structure,
    /// literal language, and the sentence list whose fragment models are
    /// exactly the constrained models. Sentences are emitted in a fixed
    /// order: constant axioms, coordinate confinement, exact-universe,
    /// exact-relation, function axioms, exact-function, then the translated
    /// theory sentences.
    pub fn synth_cert(&self, cap: u32) -> Result<CertLanguage> {
        let structure = self.structure_at(cap)?;
        let pos_lang = self.pos_lang_at(cap)?;
        let lang = close_under_negation(&pos_lang);
        let universe = self.universe_at(cap);
        let mut gamma = Vec::new();

        let e_lit = |name: &str, vars: &[Var]| {
            Formula::E(EArg::Lit(
                name.to_string(),
                vars.iter().map(|v| Term::Var(*v)).collect(),
            ))
        };
        let e_u = |v: Var| e_lit(&self.u_name, &[v]);

        // Constant axioms: existence inside the universe, uniqueness.
        for (name, sym) in &self.sigma {
            if sym.kind != SymbolKind::Constant {
                continue;
            }
            gamma.push(exists(0, and(e_u(0), e_lit(name, &[0]))));
            gamma.push(forall(
                0,
                forall(
                    1,
                    implies(
                        and(e_lit(name, &[0]), e_lit(name, &[1])),
                        Formula::Eq(Term::Var(0), Term::Var(1)),
                    ),
                ),
            ));
        }

        // Coordinate confinement for every relation, the universe
        // predicate included.
        let mut rel_names: Vec<(&str, usize)> = vec![(self.u_name.as_str(), 1)];
        for (name, sym) in &self.sigma {
            if sym.kind == SymbolKind::Relation {
                rel_names.push((name, sym.arity));
            }
        }
        for (name, arity) in rel_names {
            let vars: Vec<Var> = (0..arity as Var).collect();
            let body = implies(
                e_lit(name, &vars),
                and_all(vars.iter().map(|v| e_u(*v)).collect()),
            );
            gamma.push(close_universally(&vars, body));
        }

        // Exact universe: every member of the set is present.
        let uc = self.u_constraint();
        if uc.exact {
            let uni_set = Hf::set(universe.clone());
            gamma.push(forall(
                0,
                implies(Formula::Mem(Term::Var(0), Term::Val(uni_set)), e_u(0)),
            ));
        }

        // Exact relations: every nameable tuple over present elements is in.
        for (name, sym) in &self.sigma {
            if sym.kind != SymbolKind::Relation || !self.theta[name].exact {
                continue;
            }
            let vars: Vec<Var> = (0..sym.arity as Var).collect();
            let mut guard: Vec<Formula> = vars.iter().map(|v| e_u(*v)).collect();
            guard.push(Formula::InL(EArg::Lit(
                name.clone(),
                vars.iter().map(|v| Term::Var(*v)).collect(),
            )));
            gamma.push(close_universally(&vars, implies(and_all(guard), e_lit(name, &vars))));
        }

        // Function axioms: domain confinement, totality, uniqueness.
        for (name, sym) in &self.sigma {
            if sym.kind != SymbolKind::Function {
                continue;
            }
            let n = sym.arity as Var;
            let allv: Vec<Var> = (0..=n).collect();
            let args: Vec<Var> = (0..n).collect();
            gamma.push(close_universally(
                &allv,
                implies(
                    e_lit(name, &allv),
                    and_all(allv.iter().map(|v| e_u(*v)).collect()),
                ),
            ));
            let tot_body = exists(
                n,
                implies(and_all(args.iter().map(|v| e_u(*v)).collect()), e_lit(name, &allv)),
            );
            gamma.push(close_universally(&args, tot_body));
            let mut first = allv.clone();
            first[n as usize] = n;
            let mut second = allv.clone();
            second[n as usize] = n + 1;
            let uniq_vars: Vec<Var> = (0..=n + 1).collect();
            gamma.push(close_universally(
                &uniq_vars,
                implies(
                    and(e_lit(name, &first), e_lit(name, &second)),
                    Formula::Eq(Term::Var(n), Term::Var(n + 1)),
                ),
            ));
            if self.theta[name].exact {
                let mut guard: Vec<Formula> = allv.iter().map(|v| e_u(*v)).collect();
                guard.push(Formula::InL(EArg::Lit(
                    name.clone(),
                    allv.iter().map(|v| Term::Var(*v)).collect(),
                )));
                gamma.push(close_universally(
                    &allv,
                    implies(and_all(guard), e_lit(name, &allv)),
                ));
            }
        }

        // Theory sentences, translated into the starred language.
        for f in self.theory_list() {
            gamma.push(self.translate_theory_sentence(&f)?);
        }

        let capped = self.theta.values().any(|c| c.ext.is_capped()) || self.schema.is_some();
        Ok(CertLanguage {
            structure,
            pos_lang,
            lang,
            gamma,
            universe,
            capped,
            u_name: self.u_name.clone(),
        })
    }

    // -----------------------------------------------------------------------
    // Theory translation

    /// Translates one closed first-order theory sentence into a starred
    /// sentence over the literal language: equalities between two
    /// symbol-bearing terms are split apart with fresh variables according
    /// to their parities, quantifiers are guarded by presence in the
    /// universe, signature atoms become fragment-membership atoms, and the
    /// result is prenexed. A universal-existential input stays
    /// universal-existential.
    pub fn translate_theory_sentence(&self, f: &Formula) -> Result<Formula> {
        if !f.free_vars().is_empty() {
            return Err(Error::Invalid("theory sentences must be closed".into()));
        }
        let f = expand_iff(f);
        let mut next: Var = f.max_var().map(|v| v + 1).unwrap_or(0);
        let f = rename_apart(&f, &BTreeMap::new(), &mut next);
        let f = flatten(&f, true, &mut next)?;
        let f = self.relativize(&f)?;
        let (prefix, matrix) = prenex(&f);
        let mut out = matrix;
        for (is_forall, v) in prefix.into_iter().rev() {
            out = if is_forall { forall(v, out) } else { exists(v, out) };
        }
        Ok(out)
    }

    fn relativize(&self, f: &Formula) -> Result<Formula> {
        let e_u = |t: &Term| {
            Formula::E(EArg::Lit(self.u_name.clone(), vec![t.clone()]))
        };
        Ok(match f {
            Formula::Forall(v, g) => {
                forall(*v, implies(e_u(&Term::Var(*v)), self.relativize(g)?))
            }
            Formula::Exists(v, g) => {
                exists(*v, and(e_u(&Term::Var(*v)), self.relativize(g)?))
            }
            Formula::Not(g) => not(self.relativize(g)?),
            Formula::And(a, b) => and(self.relativize(a)?, self.relativize(b)?),
            Formula::Or(a, b) => {
                crate::formula::or(self.relativize(a)?, self.relativize(b)?)
            }
            Formula::Implies(a, b) => implies(self.relativize(a)?, self.relativize(b)?),
            Formula::Rel(name, args) => {
                if !self.sigma.contains_key(name) {
                    return Err(Error::Invalid(format!(
                        "theory sentence uses `{name}`, which is not in the signature"
                    )));
                }
                Formula::E(EArg::Lit(name.clone(), args.clone()))
            }
            Formula::Eq(l, r) => match (term_symbol(l), term_symbol(r)) {
                (Some(_), Some(_)) => {
                    return Err(Error::Invalid(
                        "equality between two symbol-bearing terms survived splitting"
                            .into(),
                    ))
                }
                (Some(name), None) => {
                    let Term::App(_, fargs) = l else { unreachable!() };
                    let mut args = fargs.clone();
                    args.push(r.clone());
                    self.check_sigma(&name)?;
                    Formula::E(EArg::Lit(name, args))
                }
                (None, Some(name)) => {
                    let Term::App(_, fargs) = r else { unreachable!() };
                    let mut args = fargs.clone();
                    args.push(l.clone());
                    self.check_sigma(&name)?;
                    Formula::E(EArg::Lit(name, args))
                }
                (None, None) => f.clone(),
            },
            Formula::Iff(..) => unreachable!("biconditionals are expanded first"),
            Formula::Mem(..)
            | Formula::ForallMem(..)
            | Formula::ExistsMem(..)
            | Formula::E(..)
            | Formula::InL(..)
            | Formula::Dfin(..) => {
                return Err(Error::Invalid(
                    "theory sentences must be plain first-order over the signature"
                        .into(),
                ))
            }
        })
    }

    fn check_sigma(&self, name: &str) -> Result<()> {
        if self.sigma.contains_key(name) {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "theory sentence uses `{name}`, which is not in the signature"
            )))
        }
    }

    // -----------------------------------------------------------------------
    // Model checking

    /// Does the structure model the constrained theory? The structure's
    /// base is the universe; it must interpret exactly the signature,
    /// satisfy the theory, and fit every constraint. An unbounded exact
    /// universe is compared against its materialization at `cap`; all other
    /// membership tests are cap-independent.
    pub fn models_tci(&self, m: &Structure, cap: u32) -> Result<bool> {
        // Interpreted symbols must be exactly the signature.
        let mut interpreted: BTreeMap<String, (SymbolKind, usize)> = BTreeMap::new();
        for name in m.rels.keys() {
            let arity = m
                .sig
                .get(name)
                .map(|s| s.arity)
                .or_else(|| m.rels[name].iter().next().map(|t| t.len()))
                .unwrap_or(0);
            interpreted.insert(name.clone(), (SymbolKind::Relation, arity));
        }
        for name in m.funcs.keys() {
            let arity = m
                .sig
                .get(name)
                .map(|s| s.arity)
                .or_else(|| m.funcs[name].keys().next().map(|k| k.len()))
                .unwrap_or(0);
            interpreted.insert(name.clone(), (SymbolKind::Function, arity));
        }
        for name in m.consts.keys() {
            interpreted.insert(name.clone(), (SymbolKind::Constant, 0));
        }
        if interpreted.len() != self.sigma.len() {
            return Ok(false);
        }
        for (name, sym) in &self.sigma {
            match interpreted.get(name) {
                Some((kind, arity)) if *kind == sym.kind && *arity == sym.arity => {}
                _ => return Ok(false),
            }
        }

        // Theory.
        let empty = BTreeSet::new();
        let nu = Valuation::empty(m);
        for f in &self.theory {
            if !sat(m, &empty, &nu, f)? {
                return Ok(false);
            }
        }
        if let Some(Schema::Chains { rel, .. }) = &self.schema {
            // The family demands chains of every length; a finite structure
            // satisfies it exactly when its relation has a cycle (which
            // pumps to arbitrary length).
            let ext = m.rels.get(rel).cloned().unwrap_or_default();
            if !has_cycle(&ext) {
                return Ok(false);
            }
        }

        // Universe constraint.
        let uc = self.u_constraint();
        if uc.exact {
            let target: BTreeSet<Hf> = uc.ext.members_at(cap).into_iter().collect();
            if m.base != target {
                return Ok(false);
            }
        } else if !m.base.iter().all(|x| uc.ext.contains(x)) {
            return Ok(false);
        }

        // Symbol constraints.
        let uni: Vec<Hf> = m.base.iter().cloned().collect();
        for (name, sym) in &self.sigma {
            let c = &self.theta[name];
            let w = tuple_width(sym);
            let target: BTreeSet<Vec<Hf>> = cartesian(&uni, w)
                .into_iter()
                .filter(|t| c.ext.contains(&Hf::tuple(t)))
                .collect();
            let actual: BTreeSet<Vec<Hf>> = match sym.kind {
                SymbolKind::Relation => m.rels[name].iter().cloned().collect(),
                SymbolKind::Constant => [vec![m.consts[name].clone()]].into_iter().collect(),
                SymbolKind::Function => {
                    // Totality over the universe.
                    let graph = &m.funcs[name];
                    if graph.len() != uni.len().pow(sym.arity as u32) {
                        return Ok(false);
                    }
                    let mut tuples = BTreeSet::new();
                    for (args, val) in graph {
                        if args.len() != sym.arity
                            || !args.iter().all(|a| m.base.contains(a))
                            || !m.base.contains(val)
                        {
                            return Ok(false);
                        }
                        let mut t = args.clone();
                        t.push(val.clone());
                        tuples.insert(t);
                    }
                    tuples
                }
            };
            let ok = if c.exact && sym.kind != SymbolKind::Constant {
                actual == target
            } else {
                actual.is_subset(&target)
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    // -----------------------------------------------------------------------
    // Fragments of models, models of fragments

    /// The full literal assignment a model induces: each positive-language
    /// literal, or its negation, according to the model. Errors if the
    /// structure is not a constrained model.
    pub fn sigma_of(&self, m: &Structure, cap: u32) -> Result<BTreeSet<Formula>> {
        if !self.models_tci(m, cap)? {
            return Err(Error::Precondition(
                "the structure is not a model of the constrained theory".into(),
            ));
        }
        let pos = self.pos_lang_at(cap)?;
        let mut sigma = BTreeSet::new();
        for lit in pos {
            let holds = literal_holds(m, &self.u_name, &lit)?;
            sigma.insert(if holds { lit } else { neg(&lit) });
        }
        Ok(sigma)
    }

    /// Rebuilds the structure a full nice literal assignment describes.
    /// The fragment must decide every positive literal exactly once; a
    /// fragment whose positive part breaks functionality, constant
    /// uniqueness or existence, or coordinate confinement is rejected.
    pub fn model_of(&self, sigma: &BTreeSet<Formula>, cap: u32) -> Result<Structure> {
        let pos = self.pos_lang_at(cap)?;
        let mut positive: BTreeSet<Formula> = BTreeSet::new();
        for lit in &pos {
            let has_pos = sigma.contains(lit);
            let has_neg = sigma.contains(&neg(lit));
            match (has_pos, has_neg) {
                (true, false) => {
                    positive.insert(lit.clone());
                }
                (false, true) => {}
                _ => {
                    return Err(Error::Precondition(
                        "the fragment must decide each literal exactly once".into(),
                    ))
                }
            }
        }
        if sigma.len() != pos.len() {
            return Err(Error::Precondition(
                "the fragment carries sentences outside the literal language".into(),
            ));
        }

        let mut base: BTreeSet<Hf> = BTreeSet::new();
        for lit in &positive {
            if let Formula::Rel(name, args) = lit {
                if name == &self.u_name {
                    if let Term::Val(x) = &args[0] {
                        base.insert(x.clone());
                    }
                }
            }
        }
        let mut m = Structure::new(base.clone());
        for sym in self.sigma.values() {
            match sym.kind {
                SymbolKind::Relation => m.add_relation(&sym.name, sym.arity, vec![]),
                SymbolKind::Function => m.add_function(&sym.name, sym.arity, vec![]),
                SymbolKind::Constant => {}
            }
        }
        for lit in &positive {
            match lit {
                Formula::Rel(name, args) if name != &self.u_name => {
                    let vals = term_values(args)?;
                    if !vals.iter().all(|v| base.contains(v)) {
                        return Err(Error::Eval(format!(
                            "a positive `{name}` literal has a coordinate outside the \
                             decided universe"
                        )));
                    }
                    m.rels.get_mut(name).unwrap().insert(vals);
                }
                Formula::Eq(Term::App(name, fargs), Term::Val(v)) => {
                    let sym = &self.sigma[name];
                    match sym.kind {
                        SymbolKind::Constant => {
                            if m.consts.contains_key(name) {
                                return Err(Error::Eval(format!(
                                    "the fragment assigns two values to constant `{name}`"
                                )));
                            }
                            if !base.contains(v) {
                                return Err(Error::Eval(format!(
                                    "constant `{name}` is assigned a value outside the \
                                     decided universe"
                                )));
                            }
                            m.add_constant(name, v.clone());
                        }
                        SymbolKind::Function => {
                            let args = term_values(fargs)?;
                            if !args.iter().all(|a| base.contains(a)) || !base.contains(v) {
                                return Err(Error::Eval(format!(
                                    "a `{name}` graph literal leaves the decided universe"
                                )));
                            }
                            let graph = m.funcs.get_mut(name).unwrap();
                            if graph.insert(args, v.clone()).is_some() {
                                return Err(Error::Eval(format!(
                                    "the fragment assigns two values to function `{name}` \
                                     on the same arguments"
                                )));
                            }
                        }
                        SymbolKind::Relation => unreachable!(),
                    }
                }
                _ => {}
            }
        }
        // Constants must exist; functions must be total over the universe.
        for sym in self.sigma.values() {
            match sym.kind {
                SymbolKind::Constant => {
                    if !m.consts.contains_key(&sym.name) {
                        return Err(Error::Eval(format!(
                            "the fragment assigns no value to constant `{}`",
                            sym.name
                        )));
                    }
                }
                SymbolKind::Function => {
                    let graph = &m.funcs[&sym.name];
                    if graph.len() != base.len().pow(sym.arity as u32) {
                        return Err(Error::Eval(format!(
                            "the fragment leaves function `{}` partial on the decided \
                             universe",
                            sym.name
                        )));
                    }
                }
                SymbolKind::Relation => {}
            }
        }
        Ok(m)
    }

    // -----------------------------------------------------------------------
    // Code friendliness

    /// Is the universe set a set of naturals (so every literal already
    /// lives in the coded fragment)?
    pub fn is_codefriendly(&self) -> bool {
        match &self.u_constraint().ext {
            Ext::Explicit(items) => items.iter().all(|x| x.as_nat().is_some()),
            Ext::Omega | Ext::OmegaTuples(_) => true,
        }
    }

    /// Renames the universe elements to an initial segment of the naturals
    /// and transports every constraint through the renaming. Returns the
    /// transported datum and the element map.
    pub fn make_codefriendly(&self) -> Result<(Tci, BTreeMap<Hf, Hf>)> {
        let uc = self.u_constraint();
        let Ext::Explicit(items) = &uc.ext else {
            return Ok((self.clone(), BTreeMap::new()));
        };
        let map: BTreeMap<Hf, Hf> = items
            .iter()
            .enumerate()
            .map(|(i, x)| (x.clone(), Hf::nat(i as u64)))
            .collect();
        let mut theta = BTreeMap::new();
        theta.insert(
            self.u_name.clone(),
            Constraint { ext: Ext::explicit(map.values().cloned()), exact: uc.exact },
        );
        for (name, sym) in &self.sigma {
            let c = &self.theta[name];
            let w = tuple_width(sym);
            let Ext::Explicit(members) = &c.ext else {
                return Err(Error::Invalid(
                    "cannot transport an unbounded constraint over an explicit universe"
                        .into(),
                ));
            };
            let mut out = BTreeSet::new();
            for m in members {
                let parts = split_member(m, w)
                    .ok_or_else(|| Error::Invalid("malformed constraint member".into()))?;
                let mapped: Vec<Hf> = parts.iter().map(|p| map[p].clone()).collect();
                out.insert(if w == 1 { mapped[0].clone() } else { Hf::tuple(&mapped) });
            }
            theta.insert(name.clone(), Constraint { ext: Ext::Explicit(out), exact: c.exact });
        }
        let out = Tci {
            sigma: self.sigma.clone(),
            u_name: self.u_name.clone(),
            theta,
            theory: self.theory.clone(),
            schema: self.schema.clone(),
        };
        out.validate()?;
        Ok((out, map))
    }

    // -----------------------------------------------------------------------
    // Function-symbol reduction

    /// Replaces every function symbol by a graph relation of one higher
    /// arity, rewriting the theory and adding totality and uniqueness
    /// sentences. Constraints carry over unchanged.
    pub fn reduce_functions(&self) -> Result<Tci> {
        let mut sigma = BTreeMap::new();
        let mut theta = BTreeMap::new();
        theta.insert(self.u_name.clone(), self.u_constraint().clone());
        let mut renames: BTreeMap<String, String> = BTreeMap::new();
        for (name, sym) in &self.sigma {
            if sym.kind == SymbolKind::Function {
                let new = format!("{name}_gr");
                if self.sigma.contains_key(&new) {
                    return Err(Error::Invalid(format!(
                        "graph relation name `{new}` collides with the signature"
                    )));
                }
                renames.insert(name.clone(), new.clone());
                sigma.insert(new.clone(), Symbol::relation(&new, sym.arity + 1));
                theta.insert(new, self.theta[name].clone());
            } else {
                sigma.insert(name.clone(), sym.clone());
                theta.insert(name.clone(), self.theta[name].clone());
            }
        }
        let mut theory = Vec::new();
        for f in &self.theory {
            let f = expand_iff(f);
            let mut next: Var = f.max_var().map(|v| v + 1).unwrap_or(0);
            let f = rename_apart(&f, &BTreeMap::new(), &mut next);
            let f = flatten(&f, true, &mut next)?;
            theory.push(rewrite_function_atoms(&f, &renames)?);
        }
        for (name, sym) in &self.sigma {
            if sym.kind != SymbolKind::Function {
                continue;
            }
            let new = &renames[name];
            let n = sym.arity as Var;
            let allv: Vec<Var> = (0..=n).collect();
            let rel = |vars: &[Var]| {
                Formula::Rel(new.clone(), vars.iter().map(|v| Term::Var(*v)).collect())
            };
            let mut tot = exists(n, rel(&allv));
            for v in (0..n).rev() {
                tot = forall(v, tot);
            }
            theory.push(tot);
            let mut first = allv.clone();
            first[n as usize] = n;
            let mut second = allv.clone();
            second[n as usize] = n + 1;
            let uniq_body = implies(
                and(rel(&first), rel(&second)),
                Formula::Eq(Term::Var(n), Term::Var(n + 1)),
            );
            theory.push(close_universally(&(0..=n + 1).collect::<Vec<_>>(), uniq_body));
        }
        let out = Tci {
            sigma,
            u_name: self.u_name.clone(),
            theta,
            theory,
            schema: self.schema.clone(),
        };
        out.validate()?;
        Ok(out)
    }
}

/// A synthesized certification language.
#[derive(Clone, Debug)]
pub struct CertLanguage {
    /// The background structure the sentences are evaluated in.
    pub structure: Structure,
    /// The positive half of the literal language.
    pub pos_lang: BTreeSet<Formula>,
    /// The full literal language, closed under negation.
    pub lang: BTreeSet<Formula>,
    /// The certification sentences.
    pub gamma: Vec<Formula>,
    /// The universe set's members at the cap, sorted.
    pub universe: Vec<Hf>,
    /// Whether any part of the datum was truncated at the cap.
    pub capped: bool,
    /// Name of the universe predicate.
    pub u_name: String,
}

// ---------------------------------------------------------------------------
// Helpers

fn close_universally(vars: &[Var], body: Formula) -> Formula {
    let mut out = body;
    for v in vars.iter().rev() {
        out = forall(*v, out);
    }
    out
}

/// The literal a symbol and a coordinate tuple determine.
fn literal_shape(sym: &Symbol, parts: &[Hf]) -> Formula {
    let vals = |xs: &[Hf]| xs.iter().map(|h| Term::Val(h.clone())).collect::<Vec<_>>();
    match sym.kind {
        SymbolKind::Relation => Formula::Rel(sym.name.clone(), vals(parts)),
        SymbolKind::Function => {
            let (args, out) = parts.split_at(parts.len() - 1);
            Formula::Eq(
                Term::App(sym.name.clone(), vals(args)),
                Term::Val(out[0].clone()),
            )
        }
        SymbolKind::Constant => Formula::Eq(
            Term::App(sym.name.clone(), vec![]),
            Term::Val(parts[0].clone()),
        ),
    }
}

fn term_values(terms: &[Term]) -> Result<Vec<Hf>> {
    terms
        .iter()
        .map(|t| match t {
            Term::Val(h) => Ok(h.clone()),
            _ => Err(Error::Eval("expected a ground literal".into())),
        })
        .collect()
}

/// Does a positive-language literal hold in the structure? The universe
/// predicate is decided by base membership.
fn literal_holds(m: &Structure, u_name: &str, lit: &Formula) -> Result<bool> {
    match lit {
        Formula::Rel(name, args) if name == u_name => {
            let vals = term_values(args)?;
            Ok(m.base.contains(&vals[0]))
        }
        Formula::Rel(name, args) => {
            let vals = term_values(args)?;
            Ok(m.rels.get(name).map(|r| r.contains(&vals)).unwrap_or(false))
        }
        Formula::Eq(Term::App(name, fargs), Term::Val(v)) => {
            if let Some(graph) = m.funcs.get(name) {
                let args = term_values(fargs)?;
                return Ok(graph.get(&args) == Some(v));
            }
            if let Some(c) = m.consts.get(name) {
                return Ok(c == v);
            }
            Ok(false)
        }
        _ => Err(Error::Eval("not a positive literal".into())),
    }
}

/// Does the digraph given by a set of 2-tuples contain a cycle?
fn has_cycle(edges: &BTreeSet<Vec<Hf>>) -> bool {
    let mut nodes: BTreeSet<&Hf> = BTreeSet::new();
    for e in edges {
        nodes.insert(&e[0]);
        nodes.insert(&e[1]);
    }
    let idx: BTreeMap<&Hf, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let n = idx.len();
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[idx[&e[0]]].push(idx[&e[1]]);
    }
    // Colors: 0 unseen, 1 on stack, 2 done.
    let mut color = vec![0u8; n];
    fn dfs(v: usize, adj: &[Vec<usize>], color: &mut [u8]) -> bool {
        color[v] = 1;
        for &w in &adj[v] {
            if color[w] == 1 || (color[w] == 0 && dfs(w, adj, color)) {
                return true;
            }
        }
        color[v] = 2;
        false
    }
    (0..n).any(|v| color[v] == 0 && dfs(v, &mut adj.clone(), &mut color))
}

// ---------------------------------------------------------------------------
// Sentence surgery: biconditional expansion, renaming apart, atomic
// splitting, prenexing

fn expand_iff(f: &Formula) -> Formula {
    match f {
        Formula::Iff(a, b) => {
            let a = expand_iff(a);
            let b = expand_iff(b);
            and(implies(a.clone(), b.clone()), implies(b, a))
        }
        Formula::Not(g) => not(expand_iff(g)),
        Formula::And(a, b) => and(expand_iff(a), expand_iff(b)),
        Formula::Or(a, b) => crate::formula::or(expand_iff(a), expand_iff(b)),
        Formula::Implies(a, b) => implies(expand_iff(a), expand_iff(b)),
        Formula::Forall(v, g) => forall(*v, expand_iff(g)),
        Formula::Exists(v, g) => exists(*v, expand_iff(g)),
        _ => f.clone(),
    }
}

/// Gives every binder a fresh variable, so later quantifier pulling cannot
/// capture.
fn rename_apart(f: &Formula, map: &BTreeMap<Var, Var>, next: &mut Var) -> Formula {
    let rename_term = |t: &Term, map: &BTreeMap<Var, Var>| -> Term {
        fn go(t: &Term, map: &BTreeMap<Var, Var>) -> Term {
            match t {
                Term::Var(v) => Term::Var(*map.get(v).unwrap_or(v)),
                Term::Val(_) => t.clone(),
                Term::App(f, args) => {
                    Term::App(f.clone(), args.iter().map(|a| go(a, map)).collect())
                }
            }
        }
        go(t, map)
    };
    match f {
        Formula::Forall(v, g) | Formula::Exists(v, g) => {
            let fresh = *next;
            *next += 1;
            let mut m2 = map.clone();
            m2.insert(*v, fresh);
            let body = rename_apart(g, &m2, next);
            if matches!(f, Formula::Forall(..)) {
                forall(fresh, body)
            } else {
                exists(fresh, body)
            }
        }
        Formula::Not(g) => not(rename_apart(g, map, next)),
        Formula::And(a, b) => and(rename_apart(a, map, next), rename_apart(b, map, next)),
        Formula::Or(a, b) => {
            crate::formula::or(rename_apart(a, map, next), rename_apart(b, map, next))
        }
        Formula::Implies(a, b) => {
            implies(rename_apart(a, map, next), rename_apart(b, map, next))
        }
        Formula::Rel(name, args) => {
            Formula::Rel(name.clone(), args.iter().map(|t| rename_term(t, map)).collect())
        }
        Formula::Eq(l, r) => Formula::Eq(rename_term(l, map), rename_term(r, map)),
        Formula::Mem(l, r) => Formula::Mem(rename_term(l, map), rename_term(r, map)),
        _ => f.clone(),
    }
}

fn term_symbol_count(t: &Term) -> usize {
    match t {
        Term::Var(_) | Term::Val(_) => 0,
        Term::App(_, args) => 1 + args.iter().map(term_symbol_count).sum::<usize>(),
    }
}

/// The single symbol of a term carrying exactly one, if any.
fn term_symbol(t: &Term) -> Option<String> {
    match t {
        Term::App(name, args) if args.iter().all(|a| term_symbol_count(a) == 0) => {
            Some(name.clone())
        }
        _ => None,
    }
}

/// Leftmost innermost application whose arguments are all plain. With
/// `skip_outer`, the term itself does not count as a candidate.
fn inner_simple_app(t: &Term, skip_outer: bool) -> Option<Term> {
    match t {
        Term::Var(_) | Term::Val(_) => None,
        Term::App(_, args) => {
            for a in args {
                if let Some(x) = inner_simple_app(a, false) {
                    return Some(x);
                }
            }
            if !skip_outer && args.iter().all(|a| matches!(a, Term::Var(_) | Term::Val(_))) {
                Some(t.clone())
            } else {
                None
            }
        }
    }
}

fn replace_term_in(t: &Term, target: &Term, z: Var) -> Term {
    if t == target {
        return Term::Var(z);
    }
    match t {
        Term::App(f, args) => Term::App(
            f.clone(),
            args.iter().map(|a| replace_term_in(a, target, z)).collect(),
        ),
        _ => t.clone(),
    }
}

/// Splits symbol-heavy atoms apart: while an atom carries more than one
/// signature symbol, an inner application is pulled out through a fresh
/// variable — existentially under positive parity, universally under
/// negative parity — leaving atoms with at most one symbol each.
fn flatten(f: &Formula, positive: bool, next: &mut Var) -> Result<Formula> {
    Ok(match f {
        Formula::Not(g) => not(flatten(g, !positive, next)?),
        Formula::And(a, b) => and(flatten(a, positive, next)?, flatten(b, positive, next)?),
        Formula::Or(a, b) => {
            crate::formula::or(flatten(a, positive, next)?, flatten(b, positive, next)?)
        }
        Formula::Implies(a, b) => {
            implies(flatten(a, !positive, next)?, flatten(b, positive, next)?)
        }
        Formula::Forall(v, g) => forall(*v, flatten(g, positive, next)?),
        Formula::Exists(v, g) => exists(*v, flatten(g, positive, next)?),
        Formula::Rel(..) | Formula::Eq(..) => flatten_atomic(f.clone(), positive, next)?,
        Formula::Iff(..) => unreachable!("biconditionals are expanded first"),
        _ => f.clone(),
    })
}

fn atomic_symbol_count(f: &Formula) -> usize {
    match f {
        Formula::Rel(_, args) => 1 + args.iter().map(term_symbol_count).sum::<usize>(),
        Formula::Eq(l, r) => term_symbol_count(l) + term_symbol_count(r),
        _ => 0,
    }
}

fn flatten_atomic(f: Formula, positive: bool, next: &mut Var) -> Result<Formula> {
    if atomic_symbol_count(&f) <= 1 {
        return Ok(f);
    }
    // Pick an application to pull out.
    let target = match &f {
        Formula::Rel(_, args) => args.iter().find_map(|a| inner_simple_app(a, false)),
        Formula::Eq(l, r) => {
            let (sl, sr) = (term_symbol_count(l), term_symbol_count(r));
            if sl >= 2 {
                inner_simple_app(l, true)
            } else if sl == 1 && sr >= 1 {
                inner_simple_app(r, false)
            } else {
                inner_simple_app(r, true)
            }
        }
        _ => None,
    }
    .ok_or_else(|| Error::Invalid("cannot split a symbol-heavy atom".into()))?;
    let z = *next;
    *next += 1;
    let reduced = match &f {
        Formula::Rel(name, args) => Formula::Rel(
            name.clone(),
            args.iter().map(|a| replace_term_in(a, &target, z)).collect(),
        ),
        Formula::Eq(l, r) => {
            Formula::Eq(replace_term_in(l, &target, z), replace_term_in(r, &target, z))
        }
        _ => unreachable!(),
    };
    let demand = Formula::Eq(target, Term::Var(z));
    let rest = flatten_atomic(reduced, positive, next)?;
    Ok(if positive {
        exists(z, and(demand, rest))
    } else {
        forall(z, implies(demand, rest))
    })
}

/// Pulls all quantifiers to the front. Binders are assumed pairwise
/// distinct (ensured by renaming apart), so pulling cannot capture.
fn prenex(f: &Formula) -> (Vec<(bool, Var)>, Formula) {
    match f {
        Formula::Forall(v, g) => {
            let (mut p, m) = prenex(g);
            p.insert(0, (true, *v));
            (p, m)
        }
        Formula::Exists(v, g) => {
            let (mut p, m) = prenex(g);
            p.insert(0, (false, *v));
            (p, m)
        }
        Formula::Not(g) => {
            let (p, m) = prenex(g);
            (p.into_iter().map(|(q, v)| (!q, v)).collect(), not(m))
        }
        Formula::And(a, b) => {
            let (pa, ma) = prenex(a);
            let (pb, mb) = prenex(b);
            ([pa, pb].concat(), and(ma, mb))
        }
        Formula::Or(a, b) => {
            let (pa, ma) = prenex(a);
            let (pb, mb) = prenex(b);
            ([pa, pb].concat(), crate::formula::or(ma, mb))
        }
        Formula::Implies(a, b) => {
            let (pa, ma) = prenex(a);
            let (pb, mb) = prenex(b);
            let flipped: Vec<(bool, Var)> = pa.into_iter().map(|(q, v)| (!q, v)).collect();
            ([flipped, pb].concat(), implies(ma, mb))
        }
        _ => (vec![], f.clone()),
    }
}

fn rewrite_function_atoms(
    f: &Formula,
    renames: &BTreeMap<String, String>,
) -> Result<Formula> {
    Ok(match f {
        Formula::Not(g) => not(rewrite_function_atoms(g, renames)?),
        Formula::And(a, b) => and(
            rewrite_function_atoms(a, renames)?,
            rewrite_function_atoms(b, renames)?,
        ),
        Formula::Or(a, b) => crate::formula::or(
            rewrite_function_atoms(a, renames)?,
            rewrite_function_atoms(b, renames)?,
        ),
        Formula::Implies(a, b) => implies(
            rewrite_function_atoms(a, renames)?,
            rewrite_function_atoms(b, renames)?,
        ),
        Formula::Forall(v, g) => forall(*v, rewrite_function_atoms(g, renames)?),
        Formula::Exists(v, g) => exists(*v, rewrite_function_atoms(g, renames)?),
        Formula::Eq(Term::App(name, fargs), r) if renames.contains_key(name) => {
            let mut args = fargs.clone();
            args.push(r.clone());
            Formula::Rel(renames[name].clone(), args)
        }
        Formula::Eq(l, Term::App(name, fargs)) if renames.contains_key(name) => {
            let mut args = fargs.clone();
            args.push(l.clone());
            Formula::Rel(renames[name].clone(), args)
        }
        _ => f.clone(),
    })
}

// ---------------------------------------------------------------------------
// Canonical constructions

/// A constrained theory whose models are the at-most-`cap`-large models of
/// `theory` with every symbol interpreted inside the tuple powers of the
/// given universe set.
pub fn tci_from_theory(
    theory: Vec<Formula>,
    sigma: Vec<Symbol>,
    kappa: Ext,
) -> Result<Tci> {
    let mut constraints = Vec::new();
    for sym in &sigma {
        let w = tuple_width(sym);
        let ext = match (&kappa, w) {
            (Ext::Explicit(items), _) => {
                let base: Vec<Hf> = items.iter().cloned().collect();
                Ext::explicit(
                    cartesian(&base, w)
                        .into_iter()
                        .map(|t| if w == 1 { t[0].clone() } else { Hf::tuple(&t) }),
                )
            }
            (Ext::Omega, 1) => Ext::Omega,
            (Ext::Omega, _) => Ext::OmegaTuples(w),
            (Ext::OmegaTuples(_), _) => {
                return Err(Error::Invalid("the universe set cannot be a tuple set".into()))
            }
        };
        constraints.push((sym.name.clone(), Constraint::subset(ext)));
    }
    Tci::new(sigma, "U", Constraint::subset(kappa), constraints, theory, None)
}

/// A constrained theory whose models are exactly the substructures of `a`
/// that satisfy `theory`: the universe may shrink inside `a`'s base, while
/// every symbol is pinned to the induced interpretation.
pub fn tci_sub(a: &Structure, theory: Vec<Formula>) -> Result<Tci> {
    let mut sigma = Vec::new();
    let mut constraints = Vec::new();
    for (name, tuples) in &a.rels {
        let sym = a
            .sig
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Invalid(format!("relation `{name}` undeclared")))?;
        sigma.push(sym);
        constraints.push((
            name.clone(),
            Constraint::exact(Ext::explicit(tuples.iter().map(|t| Hf::tuple(t)))),
        ));
    }
    for (name, graph) in &a.funcs {
        let sym = a
            .sig
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Invalid(format!("function `{name}` undeclared")))?;
        sigma.push(sym);
        constraints.push((
            name.clone(),
            Constraint::exact(Ext::explicit(graph.iter().map(|(args, v)| {
                let mut t = args.clone();
                t.push(v.clone());
                Hf::tuple(&t)
            }))),
        ));
    }
    for (name, v) in &a.consts {
        sigma.push(Symbol::constant(name));
        constraints.push((name.clone(), Constraint::exact(Ext::explicit([v.clone()]))));
    }
    Tci::new(
        sigma,
        "U",
        Constraint::subset(Ext::explicit(a.base.iter().cloned())),
        constraints,
        theory,
        None,
    )
}

/// A constrained theory whose models correspond to the generic filters of
/// a finite order: the universe and the order are pinned, a unary
/// predicate ranges over filters, and the theory demands directedness,
/// upward closure, and meeting every dense subset.
pub fn tci_from_poset(p: &crate::poset::FinPoset) -> Result<Tci> {
    let n = p.n();
    let elems: Vec<Hf> = (0..n as u64).map(Hf::nat).collect();
    let mut sigma = vec![Symbol::relation("leq", 2), Symbol::relation("G", 1)];
    let mut constraints = vec![
        (
            "leq".to_string(),
            Constraint::exact(Ext::explicit((0..n).flat_map(|i| {
                (0..n).filter_map(move |j| {
                    if p.leq(i, j) {
                        Some(Hf::tuple(&[Hf::nat(i as u64), Hf::nat(j as u64)]))
                    } else {
                        None
                    }
                })
            }))),
        ),
        ("G".to_string(), Constraint::subset(Ext::explicit(elems.iter().cloned()))),
    ];
    let dense = p.dense_sets()?;
    for (k, d) in dense.iter().enumerate() {
        let name = format!("D{k}");
        sigma.push(Symbol::relation(&name, 1));
        constraints.push((
            name,
            Constraint::exact(Ext::explicit(
                crate::poset::bits(*d).map(|i| Hf::nat(i as u64)),
            )),
        ));
    }
    let g = |v: Var| Formula::Rel("G".into(), vec![Term::Var(v)]);
    let le = |x: Var, y: Var| Formula::Rel("leq".into(), vec![Term::Var(x), Term::Var(y)]);
    let mut theory = vec![
        // Directedness: two filter members share a lower bound in the filter.
        forall(
            0,
            forall(
                1,
                exists(2, implies(and(g(0), g(1)), and_all(vec![g(2), le(2, 0), le(2, 1)]))),
            ),
        ),
        // Upward closure.
        forall(0, forall(1, implies(and(le(0, 1), g(0)), g(1)))),
    ];
    for k in 0..dense.len() {
        let d = Formula::Rel(format!("D{k}"), vec![Term::Var(0)]);
        theory.push(exists(0, and(g(0), d)));
    }
    Tci::new(
        sigma,
        "U",
        Constraint::exact(Ext::explicit(elems)),
        constraints,
        theory,
        None,
    )
}

/// The window set: all increasing pairs within `[2^n, 2^n + n)` for
/// `2 ≤ n ≤ n_max`.
pub fn window_pairs(n_max: u32) -> BTreeSet<(u64, u64)> {
    let mut s = BTreeSet::new();
    for n in 2..=n_max as u64 {
        let lo = 1u64 << n;
        for k in lo..lo + n {
            for l in k + 1..lo + n {
                s.insert((k, l));
            }
        }
    }
    s
}

/// The finitely-consistent-but-inconsistent fixture: a strict linear order
/// confined to bounded windows, with an unbounded chain-demand family. The
/// windows admit chains of length at most `n_max`, while the family demands
/// chains of every length.
pub fn countercom_fixture(n_max: u32) -> Result<Tci> {
    let r = |x: Var, y: Var| Formula::Rel("R".into(), vec![Term::Var(x), Term::Var(y)]);
    let theory = vec![
        // Irreflexivity.
        forall(0, not(r(0, 0))),
        // Transitivity.
        forall(
            0,
            forall(1, forall(2, implies(and(r(0, 1), r(1, 2)), r(0, 2)))),
        ),
        // Trichotomy.
        forall(
            0,
            forall(
                1,
                or_all(vec![r(0, 1), r(1, 0), Formula::Eq(Term::Var(1), Term::Var(0))]),
            ),
        ),
    ];
    let s = Ext::explicit(
        window_pairs(n_max)
            .into_iter()
            .map(|(k, l)| Hf::tuple(&[Hf::nat(k), Hf::nat(l)])),
    );
    Tci::new(
        vec![Symbol::relation("R", 2)],
        "U",
        Constraint::subset(Ext::Omega),
        vec![("R".to_string(), Constraint::subset(s))],
        theory,
        Some(Schema::Chains { rel: "R".into(), max_inst: n_max }),
    )
}

/// A unary predicate over the naturals holding at most one element; the
/// universe is pinned to the (truncated) naturals.
pub fn singleton_pred() -> Result<Tci> {
    let p = |v: Var| Formula::Rel("P".into(), vec![Term::Var(v)]);
    let theory = vec![forall(
        0,
        forall(
            1,
            implies(and(p(0), p(1)), Formula::Eq(Term::Var(0), Term::Var(1))),
        ),
    )];
    Tci::new(
        vec![Symbol::relation("P", 1)],
        "U",
        Constraint::exact(Ext::Omega),
        vec![("P".to_string(), Constraint::subset(Ext::Omega))],
        theory,
        None,
    )
}

/// A completely free unary predicate over the pinned (truncated) naturals.
pub fn free_pred() -> Result<Tci> {
    Tci::new(
        vec![Symbol::relation("P", 1)],
        "U",
        Constraint::exact(Ext::Omega),
        vec![("P".to_string(), Constraint::subset(Ext::Omega))],
        vec![],
        None,
    )
}

/// All functions from a two-point set to itself: a unary function symbol
/// over the pinned universe `{0, 1}`.
pub fn fn_2_2() -> Result<Tci> {
    let two: Vec<Hf> = vec![Hf::nat(0), Hf::nat(1)];
    let graph = Ext::explicit(
        [(0u64, 0u64), (0, 1), (1, 0), (1, 1)]
            .into_iter()
            .map(|(a, b)| Hf::tuple(&[Hf::nat(a), Hf::nat(b)])),
    );
    Tci::new(
        vec![Symbol::function("F", 1)],
        "U",
        Constraint::exact(Ext::explicit(two)),
        vec![("F".to_string(), Constraint::subset(graph))],
        vec![],
        None,
    )
}

/// The named fixture registry.
pub fn fixture(name: &str) -> Result<Tci> {
    match name {
        "countercom" => countercom_fixture(5),
        "singleton-pred" => singleton_pred(),
        "free-pred" => free_pred(),
        "fn-2-2" => fn_2_2(),
        other => Err(Error::Invalid(format!(
            "unknown fixture `{other}`; available: countercom, singleton-pred, \
             free-pred, fn-2-2"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::models_star;
    use crate::star::{classify_star, StarClass};

    fn nat_pair(a: u64, b: u64) -> Hf {
        Hf::tuple(&[Hf::nat(a), Hf::nat(b)])
    }

    #[test]
    fn window_pairs_have_frozen_small_levels() {
        // Window 2 contributes exactly (4,5); window 3 the three increasing
        // pairs of {8,9,10}; no window contributes a pair below 4.
        let s3 = window_pairs(3);
        assert_eq!(
            s3,
            [(4, 5), (8, 9), (8, 10), (9, 10)].into_iter().collect::<BTreeSet<_>>()
        );
        assert_eq!(window_pairs(5).len(), 1 + 3 + 6 + 10);
        assert!(window_pairs(5).iter().all(|(k, _)| *k >= 4));
    }

    #[test]
    fn validation_rejects_malformed_data() {
        // A binary constraint member that is not a pair of universe elements.
        let bad = Tci::new(
            vec![Symbol::relation("R", 2)],
            "U",
            Constraint::subset(Ext::explicit([Hf::nat(0)])),
            vec![("R".to_string(), Constraint::subset(Ext::explicit([nat_pair(0, 7)])))],
            vec![],
            None,
        );
        assert!(bad.is_err());
        // A universe set meeting its own pairs.
        let clash = Tci::new(
            vec![Symbol::relation("R", 2)],
            "U",
            Constraint::subset(Ext::explicit([Hf::nat(0), Hf::nat(1), nat_pair(0, 1)])),
            vec![("R".to_string(), Constraint::subset(Ext::explicit([])))],
            vec![],
            None,
        );
        assert!(clash.is_err());
        // A symbol without a constraint.
        let missing = Tci::new(
            vec![Symbol::relation("R", 2)],
            "U",
            Constraint::subset(Ext::explicit([Hf::nat(0)])),
            vec![],
            vec![],
            None,
        );
        assert!(missing.is_err());
    }

    #[test]
    fn two_point_function_language_and_sentences() {
        let t = fn_2_2().unwrap();
        let cl = t.synth_cert(10).unwrap();
        // Two universe literals and four graph literals.
        assert_eq!(cl.pos_lang.len(), 6);
        assert_eq!(cl.lang.len(), 12);
        assert!(!cl.capped);
        for g in &cl.gamma {
            assert_ne!(
                classify_star(g),
                StarClass::Other,
                "sentence escapes the starred classes: {g:?}"
            );
        }
    }

    #[test]
    fn two_point_function_has_exactly_four_certifying_fragments() {
        // Enumerate every nice fragment over the literal language and check
        // the certification sentences; exactly the four functions certify,
        // and they are the induced assignments of the four models.
        let t = fn_2_2().unwrap();
        let cl = t.synth_cert(10).unwrap();
        let pos: Vec<Formula> = cl.pos_lang.iter().cloned().collect();
        let mut certified = Vec::new();
        for mask in 0u32..(1 << pos.len()) {
            let mut sigma = BTreeSet::new();
            for (i, lit) in pos.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    sigma.insert(lit.clone());
                } else {
                    sigma.insert(neg(lit));
                }
            }
            if models_star(&sigma, &cl.structure, &cl.gamma).unwrap() {
                certified.push(sigma);
            }
        }
        assert_eq!(certified.len(), 4);
        for sigma in &certified {
            let m = t.model_of(sigma, 10).unwrap();
            assert!(t.models_tci(&m, 10).unwrap());
            assert_eq!(&t.sigma_of(&m, 10).unwrap(), sigma);
        }
    }

    #[test]
    fn models_tci_checks_totality_and_exact_universe() {
        let t = fn_2_2().unwrap();
        let mut good = Structure::new([Hf::nat(0), Hf::nat(1)]);
        good.add_function(
            "F",
            1,
            vec![(vec![Hf::nat(0)], Hf::nat(1)), (vec![Hf::nat(1)], Hf::nat(1))],
        );
        assert!(t.models_tci(&good, 10).unwrap());

        let mut partial = Structure::new([Hf::nat(0), Hf::nat(1)]);
        partial.add_function("F", 1, vec![(vec![Hf::nat(0)], Hf::nat(1))]);
        assert!(!t.models_tci(&partial, 10).unwrap());

        let mut small = Structure::new([Hf::nat(0)]);
        small.add_function("F", 1, vec![(vec![Hf::nat(0)], Hf::nat(0))]);
        assert!(!t.models_tci(&small, 10).unwrap());
    }

    #[test]
    fn singleton_predicate_models_at_cap() {
        let t = singleton_pred().unwrap();
        let base: Vec<Hf> = (0..5).map(Hf::nat).collect();
        for p in [vec![], vec![3u64]] {
            let mut m = Structure::new(base.clone());
            m.add_relation("P", 1, p.iter().map(|n| vec![Hf::nat(*n)]).collect());
            assert!(t.models_tci(&m, 5).unwrap());
            let sigma = t.sigma_of(&m, 5).unwrap();
            assert_eq!(sigma.len(), 10);
            assert_eq!(t.model_of(&sigma, 5).unwrap(), m);
        }
        let mut two = Structure::new(base.clone());
        two.add_relation("P", 1, vec![vec![Hf::nat(1)], vec![Hf::nat(2)]]);
        assert!(!two.rels["P"].is_empty());
        assert!(!t.models_tci(&two, 5).unwrap());
    }

    #[test]
    fn countercom_has_no_finite_models_but_bounded_truncations_do() {
        let t = countercom_fixture(5).unwrap();
        // The window [32, 37) carries a five-element linear order.
        let base: Vec<Hf> = (32..37).map(Hf::nat).collect();
        let mut m = Structure::new(base);
        m.add_relation(
            "R",
            2,
            (32..37)
                .flat_map(|k| (k + 1..37).map(move |l| vec![Hf::nat(k), Hf::nat(l)]))
                .collect(),
        );
        // Against the unbounded family: no finite structure qualifies.
        assert!(!t.models_tci(&m, 40).unwrap());
        // Against the truncation: the same structure is a model.
        let mut bounded = t.clone();
        bounded.theory = bounded.theory_list();
        bounded.schema = None;
        assert!(bounded.models_tci(&m, 40).unwrap());
    }

    #[test]
    fn substructure_fixture_counts_models_of_a_three_chain() {
        // A three-element strict chain; substructure models are its eight
        // subsets, each inheriting the induced order.
        let base: Vec<Hf> = (0..3).map(Hf::nat).collect();
        let mut chain = Structure::new(base);
        chain.add_relation(
            "lt",
            2,
            vec![
                vec![Hf::nat(0), Hf::nat(1)],
                vec![Hf::nat(0), Hf::nat(2)],
                vec![Hf::nat(1), Hf::nat(2)],
            ],
        );
        let lt = |x: Var, y: Var| Formula::Rel("lt".into(), vec![Term::Var(x), Term::Var(y)]);
        let axioms = vec![
            forall(0, not(lt(0, 0))),
            forall(0, forall(1, forall(2, implies(and(lt(0, 1), lt(1, 2)), lt(0, 2))))),
            forall(
                0,
                forall(
                    1,
                    or_all(vec![lt(0, 1), lt(1, 0), Formula::Eq(Term::Var(1), Term::Var(0))]),
                ),
            ),
        ];
        let t = tci_sub(&chain, axioms).unwrap();
        let cl = t.synth_cert(10).unwrap();
        let pos: Vec<Formula> = cl.pos_lang.iter().cloned().collect();
        assert_eq!(pos.len(), 6);
        let mut count = 0;
        for mask in 0u32..(1 << pos.len()) {
            let mut sigma = BTreeSet::new();
            for (i, lit) in pos.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    sigma.insert(lit.clone());
                } else {
                    sigma.insert(neg(lit));
                }
            }
            if models_star(&sigma, &cl.structure, &cl.gamma).unwrap() {
                count += 1;
                let m = t.model_of(&sigma, 10).unwrap();
                assert!(t.models_tci(&m, 10).unwrap());
            }
        }
        assert_eq!(count, 8);
    }

    #[test]
    fn poset_fixture_models_are_generic_filters() {
        use crate::poset::FinPoset;
        // A one-point order has one generic filter; a two-point antichain
        // has two.
        for (p, expected) in [
            (FinPoset::antichain(1), 1usize),
            (FinPoset::antichain(2), 2usize),
        ] {
            let t = tci_from_poset(&p).unwrap();
            let cl = t.synth_cert(10).unwrap();
            let pos: Vec<Formula> = cl.pos_lang.iter().cloned().collect();
            assert!(pos.len() <= 16, "language too large for brute force");
            let mut models = Vec::new();
            for mask in 0u32..(1 << pos.len()) {
                let mut sigma = BTreeSet::new();
                for (i, lit) in pos.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        sigma.insert(lit.clone());
                    } else {
                        sigma.insert(neg(lit));
                    }
                }
                if models_star(&sigma, &cl.structure, &cl.gamma).unwrap() {
                    models.push(sigma);
                }
            }
            assert_eq!(models.len(), expected);
            // Each model's filter predicate is a generic filter of the order.
            let gf = p.generic_filters().unwrap();
            for sigma in &models {
                let m = t.model_of(sigma, 10).unwrap();
                let mut mask = 0u64;
                for tuple in &m.rels["G"] {
                    mask |= 1 << tuple[0].as_nat().unwrap();
                }
                assert!(gf.iter().any(|f| f.0 == mask));
            }
        }
    }

    #[test]
    fn translation_keeps_universal_existential_shape() {
        let t = countercom_fixture(3).unwrap();
        let cl = t.synth_cert(20).unwrap();
        for g in &cl.gamma {
            assert_ne!(classify_star(g), StarClass::Other, "escapes: {g:?}");
        }
        // Directedness-style sentences stay universal-existential.
        let p = tci_from_poset(&crate::poset::FinPoset::antichain(2)).unwrap();
        let cl = p.synth_cert(10).unwrap();
        for g in &cl.gamma {
            assert_ne!(classify_star(g), StarClass::Other, "escapes: {g:?}");
        }
    }

    #[test]
    fn atomic_splitting_pulls_nested_applications_apart() {
        // R(f(x)) under positive and negative parity.
        let t = Tci::new(
            vec![Symbol::relation("R", 1), Symbol::function("f", 1)],
            "U",
            Constraint::subset(Ext::explicit([Hf::nat(0), Hf::nat(1)])),
            vec![
                ("R".to_string(), Constraint::subset(Ext::explicit([Hf::nat(0), Hf::nat(1)]))),
                (
                    "f".to_string(),
                    Constraint::subset(Ext::explicit([nat_pair(0, 0), nat_pair(1, 1)])),
                ),
            ],
            vec![],
            None,
        )
        .unwrap();
        let rfx = |v: Var| {
            Formula::Rel("R".into(), vec![Term::App("f".into(), vec![Term::Var(v)])])
        };
        let positive = exists(0, rfx(0));
        let negative = forall(0, rfx(0));
        let tp = t.translate_theory_sentence(&positive).unwrap();
        let tn = t.translate_theory_sentence(&negative).unwrap();
        assert_eq!(classify_star(&tp), StarClass::Sigma1);
        assert_eq!(classify_star(&tn), StarClass::Pi2);
        // Both evaluate correctly on a certifying fragment: with f the
        // identity on {0,1} and R = {0}, the existential form holds and the
        // universal form fails.
        let cl = t.synth_cert(10).unwrap();
        let mut m = Structure::new([Hf::nat(0), Hf::nat(1)]);
        m.add_relation("R", 1, vec![vec![Hf::nat(0)]]);
        m.add_function(
            "f",
            1,
            vec![(vec![Hf::nat(0)], Hf::nat(0)), (vec![Hf::nat(1)], Hf::nat(1))],
        );
        let sigma = t.sigma_of(&m, 10).unwrap();
        let ctx = crate::sat::SatCtx::for_fragment(&cl.structure, &sigma).unwrap();
        let nu = Valuation::empty(&cl.structure);
        assert!(crate::sat::sat_with(&ctx, &sigma, &nu, &tp).unwrap());
        assert!(!crate::sat::sat_with(&ctx, &sigma, &nu, &tn).unwrap());
    }

    #[test]
    fn code_friendliness_renames_an_explicit_universe() {
        // A three-element set: not a natural (its third element is {{0}},
        // not 2) and not a pair (pairs have at most two elements).
        let a = Hf::set(vec![
            Hf::nat(0),
            Hf::nat(1),
            Hf::set(vec![Hf::nat(1)]),
        ]);
        let t = Tci::new(
            vec![Symbol::relation("P", 1)],
            "U",
            Constraint::subset(Ext::explicit([Hf::empty(), a.clone()])),
            vec![("P".to_string(), Constraint::subset(Ext::explicit([a.clone()])))],
            vec![],
            None,
        )
        .unwrap();
        assert!(!t.is_codefriendly());
        let (cf, map) = t.make_codefriendly().unwrap();
        assert!(cf.is_codefriendly());
        assert_eq!(map[&a], Hf::nat(1));
        let Ext::Explicit(p) = &cf.theta["P"].ext else { panic!() };
        assert_eq!(p.iter().cloned().collect::<Vec<_>>(), vec![Hf::nat(1)]);
    }

    #[test]
    fn function_reduction_preserves_the_model_count() {
        let t = fn_2_2().unwrap().reduce_functions().unwrap();
        assert!(t.sigma.contains_key("F_gr"));
        assert_eq!(t.sigma["F_gr"].kind, SymbolKind::Relation);
        let cl = t.synth_cert(10).unwrap();
        let pos: Vec<Formula> = cl.pos_lang.iter().cloned().collect();
        let mut count = 0;
        for mask in 0u32..(1 << pos.len()) {
            let mut sigma = BTreeSet::new();
            for (i, lit) in pos.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    sigma.insert(lit.clone());
                } else {
                    sigma.insert(neg(lit));
                }
            }
            if models_star(&sigma, &cl.structure, &cl.gamma).unwrap() {
                count += 1;
            }
        }
        assert_eq!(count, 4);
    }

    #[test]
    fn chain_sentences_and_fixture_registry() {
        let c = chain_sentence("R", 3);
        // Ordinary atoms are starred atoms, so a chain demand is already
        // starred existential.
        assert_eq!(classify_star(&c), StarClass::Sigma1);
        assert_eq!(
            crate::formula::classify(&c, crate::formula::ClassifyMode::General),
            crate::formula::FormulaClass::Sigma(1)
        );
        assert!(fixture("free-pred").is_ok());
        assert!(fixture("nope").is_err());
        let t = countercom_fixture(5).unwrap();
        assert_eq!(t.theory_list().len(), 3 + 4);
    }

    #[test]
    fn disjunction_and_conjunction_sentences_translate() {
        // Trichotomy's plain equality survives untranslated inside the
        // matrix.
        let t = countercom_fixture(3).unwrap();
        let trich = &t.theory[2];
        let tr = t.translate_theory_sentence(trich).unwrap();
        let printed = crate::formula::print(&tr);
        assert!(printed.contains("(eq "), "equality kept: {printed}");
        assert!(!printed.contains("(R "), "signature atoms wrapped: {printed}");
        assert!(printed.contains("E-term R"), "signature atoms wrapped: {printed}");
    }
}
