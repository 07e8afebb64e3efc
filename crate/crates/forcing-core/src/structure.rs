//! Finite structures over an expanded language of set theory, and
//! valuations into them.

use std::collections::{BTreeMap, BTreeSet};

use crate::coding::{formula_code, SymbolCoder};
use crate::error::{Error, Result};
use crate::formula::{Formula, Symbol, SymbolKind, Var};
use crate::hf::Hf;

/// A finite structure: a base of hereditarily finite sets, the true
/// membership relation on it, and interpretations for relation, function,
/// and constant symbols. Function symbols are interpreted by their graphs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Structure {
    pub base: BTreeSet<Hf>,
    pub rels: BTreeMap<String, BTreeSet<Vec<Hf>>>,
    pub funcs: BTreeMap<String, BTreeMap<Vec<Hf>, Hf>>,
    pub consts: BTreeMap<String, Hf>,
    /// Declared signature, used to shape parameter-passed literals whose
    /// symbols need not be interpreted in this structure.
    pub sig: BTreeMap<String, Symbol>,
}

impl Structure {
    pub fn new(base: impl IntoIterator<Item = Hf>) -> Structure {
        Structure { base: base.into_iter().collect(), ..Default::default() }
    }

    pub fn declare(&mut self, sym: Symbol) {
        self.sig.insert(sym.name.clone(), sym);
    }

    pub fn add_relation(&mut self, name: &str, arity: usize, tuples: Vec<Vec<Hf>>) {
        self.declare(Symbol::relation(name, arity));
        self.rels.insert(name.to_string(), tuples.into_iter().collect());
    }

    pub fn add_function(&mut self, name: &str, arity: usize, graph: Vec<(Vec<Hf>, Hf)>) {
        self.declare(Symbol::function(name, arity));
        self.funcs.insert(name.to_string(), graph.into_iter().collect());
    }

    pub fn add_constant(&mut self, name: &str, value: Hf) {
        self.declare(Symbol::constant(name));
        self.consts.insert(name.to_string(), value);
    }

    /// Kind of a named symbol, consulting the declared signature first and
    /// the interpretation maps second.
    pub fn symbol_kind(&self, name: &str) -> Option<SymbolKind> {
        if let Some(s) = self.sig.get(name) {
            return Some(s.kind);
        }
        if self.rels.contains_key(name) {
            Some(SymbolKind::Relation)
        } else if self.funcs.contains_key(name) {
            Some(SymbolKind::Function)
        } else if self.consts.contains_key(name) {
            Some(SymbolKind::Constant)
        } else {
            None
        }
    }

    /// The default element for fresh valuations: the least base element.
    pub fn default_element(&self) -> Option<Hf> {
        self.base.iter().next().cloned()
    }
}

/// A valuation: a finite partial map from variables to base elements, with
/// a default element for unmapped variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Valuation {
    pub map: BTreeMap<Var, Hf>,
    pub default: Option<Hf>,
}

impl Valuation {
    pub fn empty(a: &Structure) -> Valuation {
        Valuation { map: BTreeMap::new(), default: a.default_element() }
    }

    pub fn with(&self, v: Var, x: Hf) -> Valuation {
        let mut map = self.map.clone();
        map.insert(v, x);
        Valuation { map, default: self.default.clone() }
    }

    pub fn get(&self, v: Var) -> Result<Hf> {
        if let Some(x) = self.map.get(&v) {
            return Ok(x.clone());
        }
        self.default
            .clone()
            .ok_or_else(|| Error::Eval(format!("variable v{v} unbound and no default element")))
    }
}

/// Per-clause suitability report for a structure relative to a literal
/// language.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuitabilityReport {
    /// Base is a finite set (holds by representation).
    pub finite: bool,
    /// Every element of a base element is itself in the base.
    pub finitely_transitive: bool,
    /// Membership is interpreted as true membership (holds by
    /// representation).
    pub membership_native: bool,
    /// Every sentence of the language has its set code in the base.
    pub language_in_base: bool,
    /// Clauses assumed by construction rather than checked.
    pub assumed: Vec<String>,
}

impl SuitabilityReport {
    pub fn all_checkable_pass(&self) -> bool {
        self.finite && self.finitely_transitive && self.membership_native && self.language_in_base
    }
}

/// Checks the checkable suitability clauses of `a` for the language `lang`.
pub fn check_suitable(a: &Structure, lang: &BTreeSet<Formula>) -> SuitabilityReport {
    let finitely_transitive = a
        .base
        .iter()
        .all(|x| x.elements_desc().iter().all(|e| a.base.contains(e)));

    // Code the language with a coder over the symbols it mentions, in
    // sorted name order.
    let mut names: BTreeSet<String> = BTreeSet::new();
    for f in lang {
        collect_symbol_names(f, &mut names);
    }
    let coder = SymbolCoder::new(&names.into_iter().collect::<Vec<_>>());
    let language_in_base = lang.iter().all(|f| match formula_code(f, &coder) {
        Ok(code) => a.base.contains(&code),
        Err(_) => false,
    });

    SuitabilityReport {
        finite: true,
        finitely_transitive,
        membership_native: true,
        language_in_base,
        assumed: vec![
            "ambient set theory strong enough for the finite fragment".to_string(),
            "coding of sentences as sets is injective".to_string(),
        ],
    }
}

pub fn collect_symbol_names(f: &Formula, out: &mut BTreeSet<String>) {
    use crate::formula::{EArg, Term};
    fn term_names(t: &Term, out: &mut BTreeSet<String>) {
        if let Term::App(name, args) = t {
            out.insert(name.clone());
            for a in args {
                term_names(a, out);
            }
        }
    }
    fn earg_names(arg: &EArg, out: &mut BTreeSet<String>) {
        match arg {
            EArg::Sent(g) => collect_symbol_names(g, out),
            EArg::Term(t) | EArg::NegTerm(t) => term_names(t, out),
            EArg::Lit(name, args) => {
                out.insert(name.clone());
                for t in args {
                    term_names(t, out);
                }
            }
        }
    }
    match f {
        Formula::Rel(name, args) => {
            out.insert(name.clone());
            for t in args {
                term_names(t, out);
            }
        }
        Formula::Eq(a, b) | Formula::Mem(a, b) => {
            term_names(a, out);
            term_names(b, out);
        }
        Formula::Not(g) => collect_symbol_names(g, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            collect_symbol_names(a, out);
            collect_symbol_names(b, out);
        }
        Formula::Forall(_, g) | Formula::Exists(_, g) => collect_symbol_names(g, out),
        Formula::ForallMem(_, t, g) | Formula::ExistsMem(_, t, g) => {
            term_names(t, out);
            collect_symbol_names(g, out);
        }
        Formula::E(arg) | Formula::InL(arg) => earg_names(arg, out),
        Formula::Dfin(t) => term_names(t, out),
    }
}
