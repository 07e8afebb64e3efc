//! Fragment-relative satisfaction: the structure plays Tarski for the
//! first-order part, while `E(..)` atoms consult a sentence fragment.
//!
//! The evaluator is three-valued so that a partially decided fragment (as
//! explored by the certification search) can be evaluated soundly: a
//! definite verdict under a partial fragment is the verdict under every
//! completion. Total fragments never produce "undecided".

use std::collections::{BTreeMap, BTreeSet};

use crate::coding::{formula_code, SymbolCoder};
use crate::error::{Error, Result};
use crate::formula::{close_under_negation, neg, EArg, Formula, SymbolKind, Term};
use crate::hf::Hf;
use crate::structure::{Structure, Valuation};

/// Evaluation context: the structure, the literal language for `InL`
/// atoms and coded-sentence lookups, and the symbol coder.
pub struct SatCtx<'a> {
    pub a: &'a Structure,
    pub lang: Option<BTreeSet<Formula>>,
    pub syms: SymbolCoder,
    code_index: BTreeMap<Hf, Formula>,
}

impl<'a> SatCtx<'a> {
    /// Context with an explicit language and coder. The language is indexed
    /// by sentence code for term-form `E` atoms.
    pub fn new(
        a: &'a Structure,
        lang: Option<BTreeSet<Formula>>,
        syms: SymbolCoder,
    ) -> Result<SatCtx<'a>> {
        let mut code_index = BTreeMap::new();
        if let Some(l) = &lang {
            for f in l {
                code_index.insert(formula_code(f, &syms)?, f.clone());
            }
        }
        Ok(SatCtx { a, lang, syms, code_index })
    }

    /// Context whose language is the negation closure of the fragment and
    /// whose coder covers all symbols seen in the language or the
    /// structure's signature, in sorted name order.
    pub fn for_fragment(a: &'a Structure, fragment: &BTreeSet<Formula>) -> Result<SatCtx<'a>> {
        let lang = close_under_negation(fragment);
        let mut names: BTreeSet<String> = a.sig.keys().cloned().collect();
        for f in &lang {
            crate::structure::collect_symbol_names(f, &mut names);
        }
        let syms = SymbolCoder::new(&names.into_iter().collect::<Vec<_>>());
        SatCtx::new(a, Some(lang), syms)
    }

    fn sentence_with_code(&self, code: &Hf) -> Option<&Formula> {
        self.code_index.get(code)
    }
}

/// How `E(..)` atoms see the fragment.
pub trait FragmentView {
    /// `Some(b)`: the sentence's membership in the fragment is decided.
    /// `None`: undecided (possible only for partial views).
    fn status(&self, sentence: &Formula) -> Option<bool>;
}

/// A fully known fragment.
pub struct TotalView<'a> {
    pub fragment: &'a BTreeSet<Formula>,
}

impl FragmentView for TotalView<'_> {
    fn status(&self, sentence: &Formula) -> Option<bool> {
        Some(self.fragment.contains(sentence))
    }
}

/// A partially decided fragment over a literal language: assignments are
/// keyed by the positive literal; sentences outside the language are
/// definitely out of the fragment.
pub struct PartialView<'a> {
    pub pos_lang: &'a BTreeSet<Formula>,
    pub assign: &'a BTreeMap<Formula, bool>,
}

impl FragmentView for PartialView<'_> {
    fn status(&self, sentence: &Formula) -> Option<bool> {
        let (core, positive) = match sentence {
            Formula::Not(inner) => ((**inner).clone(), false),
            other => (other.clone(), true),
        };
        if !self.pos_lang.contains(&core) {
            return Some(false);
        }
        self.assign.get(&core).map(|b| *b == positive)
    }
}

pub(crate) fn eval_term(ctx: &SatCtx, nu: &Valuation, t: &Term) -> Result<Hf> {
    match t {
        Term::Var(v) => nu.get(*v),
        Term::Val(h) => Ok(h.clone()),
        Term::App(name, args) => {
            let vals: Result<Vec<Hf>> = args.iter().map(|x| eval_term(ctx, nu, x)).collect();
            let vals = vals?;
            match ctx.a.symbol_kind(name) {
                Some(SymbolKind::Constant) => ctx
                    .a
                    .consts
                    .get(name)
                    .cloned()
                    .ok_or_else(|| Error::Eval(format!("constant `{name}` uninterpreted"))),
                Some(SymbolKind::Function) => {
                    let graph = ctx
                        .a
                        .funcs
                        .get(name)
                        .ok_or_else(|| Error::Eval(format!("function `{name}` uninterpreted")))?;
                    graph.get(&vals).cloned().ok_or_else(|| {
                        Error::Eval(format!("function `{name}` undefined on given arguments"))
                    })
                }
                _ => Err(Error::Eval(format!("`{name}` is not a function or constant"))),
            }
        }
    }
}

/// Grounds a quoted sentence template: substitutes the valuation into its
/// free variables.
fn ground(nu: &Valuation, f: &Formula) -> Result<Formula> {
    let mut out = f.clone();
    for v in f.free_vars() {
        out = out.subst(v, &nu.get(v)?);
    }
    Ok(out)
}

/// Builds the literal sentence a parameter-passed atom denotes: the named
/// symbol applied to the denoted arguments, shaped by the symbol's kind.
pub fn literal_of(ctx: &SatCtx, nu: &Valuation, name: &str, args: &[Term]) -> Result<Formula> {
    let vals: Result<Vec<Hf>> = args.iter().map(|t| eval_term(ctx, nu, t)).collect();
    let vals = vals?;
    literal_from_values(ctx.a, name, &vals)
}

/// As [`literal_of`], from already-evaluated arguments.
pub fn literal_from_values(a: &Structure, name: &str, vals: &[Hf]) -> Result<Formula> {
    let kind = a
        .symbol_kind(name)
        .ok_or_else(|| Error::Eval(format!("symbol `{name}` not in signature")))?;
    let val_terms = |xs: &[Hf]| xs.iter().map(|h| Term::Val(h.clone())).collect::<Vec<_>>();
    match kind {
        SymbolKind::Relation => Ok(Formula::Rel(name.to_string(), val_terms(vals))),
        SymbolKind::Function => {
            if vals.is_empty() {
                return Err(Error::Eval(format!(
                    "function literal `{name}` needs arguments plus a value"
                )));
            }
            let (args, out) = vals.split_at(vals.len() - 1);
            Ok(Formula::Eq(
                Term::App(name.to_string(), val_terms(args)),
                Term::Val(out[0].clone()),
            ))
        }
        SymbolKind::Constant => {
            if vals.len() != 1 {
                return Err(Error::Eval(format!(
                    "constant literal `{name}` takes exactly one value"
                )));
            }
            Ok(Formula::Eq(Term::App(name.to_string(), vec![]), Term::Val(vals[0].clone())))
        }
    }
}

/// Resolves an `E`-atom argument to the sentence it speaks about, or to a
/// definite truth value when no sentence is nameable (the vacuous cases).
pub(crate) fn resolve_earg(
    ctx: &SatCtx,
    nu: &Valuation,
    arg: &EArg,
) -> Result<std::result::Result<Formula, bool>> {
    match arg {
        EArg::Sent(f) => Ok(Ok(ground(nu, f)?)),
        EArg::Term(t) => {
            let code = eval_term(ctx, nu, t)?;
            if ctx.lang.is_none() {
                return Err(Error::Eval(
                    "term-form E/InL atom needs a language context".into(),
                ));
            }
            match ctx.sentence_with_code(&code) {
                Some(s) => Ok(Ok(s.clone())),
                // Not the code of any language sentence: definitely outside
                // the fragment.
                None => Ok(Err(false)),
            }
        }
        EArg::NegTerm(t) => {
            let code = eval_term(ctx, nu, t)?;
            if ctx.lang.is_none() {
                return Err(Error::Eval(
                    "negated-term E/InL atom needs a language context".into(),
                ));
            }
            match ctx.sentence_with_code(&code) {
                Some(s) => Ok(Ok(neg(s))),
                // No nameable sentence has this code; the guarded form is
                // vacuously true.
                None => Ok(Err(true)),
            }
        }
        EArg::Lit(name, args) => Ok(Ok(literal_of(ctx, nu, name, args)?)),
    }
}

/// Three-valued satisfaction.
pub fn sat3(
    ctx: &SatCtx,
    view: &dyn FragmentView,
    nu: &Valuation,
    f: &Formula,
) -> Result<Option<bool>> {
    match f {
        Formula::Rel(name, args) => {
            let vals: Result<Vec<Hf>> = args.iter().map(|t| eval_term(ctx, nu, t)).collect();
            let ext = ctx
                .a
                .rels
                .get(name)
                .ok_or_else(|| Error::Eval(format!("relation `{name}` uninterpreted")))?;
            Ok(Some(ext.contains(&vals?)))
        }
        Formula::Eq(a, b) => Ok(Some(eval_term(ctx, nu, a)? == eval_term(ctx, nu, b)?)),
        Formula::Mem(a, b) => {
            let x = eval_term(ctx, nu, a)?;
            let y = eval_term(ctx, nu, b)?;
            Ok(Some(y.contains(&x)))
        }
        Formula::Not(g) => Ok(sat3(ctx, view, nu, g)?.map(|b| !b)),
        Formula::And(a, b) => {
            let x = sat3(ctx, view, nu, a)?;
            if x == Some(false) {
                return Ok(Some(false));
            }
            let y = sat3(ctx, view, nu, b)?;
            Ok(match (x, y) {
                (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            })
        }
        Formula::Or(a, b) => {
            let x = sat3(ctx, view, nu, a)?;
            if x == Some(true) {
                return Ok(Some(true));
            }
            let y = sat3(ctx, view, nu, b)?;
            Ok(match (x, y) {
                (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            })
        }
        Formula::Implies(a, b) => {
            let x = sat3(ctx, view, nu, a)?;
            if x == Some(false) {
                return Ok(Some(true));
            }
            let y = sat3(ctx, view, nu, b)?;
            Ok(match (x, y) {
                (_, Some(true)) => Some(true),
                (Some(true), Some(false)) => Some(false),
                _ => None,
            })
        }
        Formula::Iff(a, b) => {
            let x = sat3(ctx, view, nu, a)?;
            let y = sat3(ctx, view, nu, b)?;
            Ok(match (x, y) {
                (Some(p), Some(q)) => Some(p == q),
                _ => None,
            })
        }
        Formula::Forall(v, g) => {
            let mut undecided = false;
            for x in ctx.a.base.iter() {
                match sat3(ctx, view, &nu.with(*v, x.clone()), g)? {
                    Some(false) => return Ok(Some(false)),
                    Some(true) => {}
                    None => undecided = true,
                }
            }
            Ok(if undecided { None } else { Some(true) })
        }
        Formula::Exists(v, g) => {
            let mut undecided = false;
            for x in ctx.a.base.iter() {
                match sat3(ctx, view, &nu.with(*v, x.clone()), g)? {
                    Some(true) => return Ok(Some(true)),
                    Some(false) => {}
                    None => undecided = true,
                }
            }
            Ok(if undecided { None } else { Some(false) })
        }
        Formula::ForallMem(v, t, g) => {
            let bound = eval_term(ctx, nu, t)?;
            let mut undecided = false;
            for x in bound.elements() {
                match sat3(ctx, view, &nu.with(*v, x), g)? {
                    Some(false) => return Ok(Some(false)),
                    Some(true) => {}
                    None => undecided = true,
                }
            }
            Ok(if undecided { None } else { Some(true) })
        }
        Formula::ExistsMem(v, t, g) => {
            let bound = eval_term(ctx, nu, t)?;
            let mut undecided = false;
            for x in bound.elements() {
                match sat3(ctx, view, &nu.with(*v, x), g)? {
                    Some(true) => return Ok(Some(true)),
                    Some(false) => {}
                    None => undecided = true,
                }
            }
            Ok(if undecided { None } else { Some(false) })
        }
        Formula::E(arg) => match resolve_earg(ctx, nu, arg)? {
            Ok(sentence) => Ok(view.status(&sentence)),
            Err(verdict) => Ok(Some(verdict)),
        },
        Formula::InL(arg) => {
            let lang = ctx
                .lang
                .as_ref()
                .ok_or_else(|| Error::Eval("InL atom needs a language context".into()))?;
            match resolve_earg(ctx, nu, arg)? {
                Ok(sentence) => Ok(Some(lang.contains(&sentence))),
                // Term form with an unknown code: not in the language. The
                // vacuous-true branch applies only to fragment membership.
                Err(_) => Ok(Some(false)),
            }
        }
        Formula::Dfin(t) => Ok(Some(!eval_term(ctx, nu, t)?.is_empty())),
    }
}

/// Two-valued satisfaction against a fully known fragment.
pub fn sat_with(
    ctx: &SatCtx,
    fragment: &BTreeSet<Formula>,
    nu: &Valuation,
    f: &Formula,
) -> Result<bool> {
    let view = TotalView { fragment };
    Ok(sat3(ctx, &view, nu, f)?.expect("total view cannot be undecided"))
}

/// Satisfaction of `f` in `a` with fragment `x`, languaging the fragment by
/// negation closure (exact when `x` is nice).
pub fn sat(a: &Structure, x: &BTreeSet<Formula>, nu: &Valuation, f: &Formula) -> Result<bool> {
    let ctx = SatCtx::for_fragment(a, x)?;
    sat_with(&ctx, x, nu, f)
}

/// Does the fragment star-satisfy every sentence of `gamma` in `a`?
pub fn models_star(
    x: &BTreeSet<Formula>,
    a: &Structure,
    gamma: &[Formula],
) -> Result<bool> {
    let ctx = SatCtx::for_fragment(a, x)?;
    models_star_with(&ctx, x, gamma)
}

/// As [`models_star`] with an explicit context (language and coder).
pub fn models_star_with(
    ctx: &SatCtx,
    x: &BTreeSet<Formula>,
    gamma: &[Formula],
) -> Result<bool> {
    let nu = Valuation::empty(ctx.a);
    for g in gamma {
        if !sat_with(ctx, x, &nu, g)? {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Independent oracle: substitution-based evaluation, sharing only the AST.

/// Naive reference evaluation: expands quantifiers by substitution and
/// decides atoms directly. Independent of [`sat3`]; used to cross-check it.
pub fn naive_eval(
    a: &Structure,
    x: &BTreeSet<Formula>,
    lang: &BTreeSet<Formula>,
    syms: &SymbolCoder,
    nu: &Valuation,
    f: &Formula,
) -> Result<bool> {
    // Ground all free variables first.
    let mut g = f.clone();
    for v in f.free_vars() {
        g = g.subst(v, &nu.get(v)?);
    }
    naive_closed(a, x, lang, syms, &g)
}

fn naive_term(a: &Structure, t: &Term) -> Result<Hf> {
    match t {
        Term::Var(v) => Err(Error::Eval(format!("naive evaluation reached open variable v{v}"))),
        Term::Val(h) => Ok(h.clone()),
        Term::App(name, args) => {
            let vals: Result<Vec<Hf>> = args.iter().map(|x| naive_term(a, x)).collect();
            let vals = vals?;
            match a.symbol_kind(name) {
                Some(SymbolKind::Constant) => a
                    .consts
                    .get(name)
                    .cloned()
                    .ok_or_else(|| Error::Eval(format!("constant `{name}` uninterpreted"))),
                Some(SymbolKind::Function) => a
                    .funcs
                    .get(name)
                    .and_then(|g| g.get(&vals).cloned())
                    .ok_or_else(|| Error::Eval(format!("function `{name}` undefined"))),
                _ => Err(Error::Eval(format!("`{name}` is not a function or constant"))),
            }
        }
    }
}

fn naive_closed(
    a: &Structure,
    x: &BTreeSet<Formula>,
    lang: &BTreeSet<Formula>,
    syms: &SymbolCoder,
    f: &Formula,
) -> Result<bool> {
    let find_by_code = |code: &Hf| -> Result<Option<Formula>> {
        for s in lang {
            if formula_code(s, syms)? == *code {
                return Ok(Some(s.clone()));
            }
        }
        Ok(None)
    };
    match f {
        Formula::Rel(name, args) => {
            let vals: Result<Vec<Hf>> = args.iter().map(|t| naive_term(a, t)).collect();
            let ext = a
                .rels
                .get(name)
                .ok_or_else(|| Error::Eval(format!("relation `{name}` uninterpreted")))?;
            Ok(ext.contains(&vals?))
        }
        Formula::Eq(s, t) => Ok(naive_term(a, s)? == naive_term(a, t)?),
        Formula::Mem(s, t) => Ok(naive_term(a, t)?.contains(&naive_term(a, s)?)),
        Formula::Not(g) => Ok(!naive_closed(a, x, lang, syms, g)?),
        Formula::And(p, q) => {
            Ok(naive_closed(a, x, lang, syms, p)? && naive_closed(a, x, lang, syms, q)?)
        }
        Formula::Or(p, q) => {
            Ok(naive_closed(a, x, lang, syms, p)? || naive_closed(a, x, lang, syms, q)?)
        }
        Formula::Implies(p, q) => {
            Ok(!naive_closed(a, x, lang, syms, p)? || naive_closed(a, x, lang, syms, q)?)
        }
        Formula::Iff(p, q) => {
            Ok(naive_closed(a, x, lang, syms, p)? == naive_closed(a, x, lang, syms, q)?)
        }
        Formula::Forall(v, g) => {
            for e in a.base.iter() {
                if !naive_closed(a, x, lang, syms, &g.subst(*v, e))? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Exists(v, g) => {
            for e in a.base.iter() {
                if naive_closed(a, x, lang, syms, &g.subst(*v, e))? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::ForallMem(v, t, g) => {
            for e in naive_term(a, t)?.elements() {
                if !naive_closed(a, x, lang, syms, &g.subst(*v, &e))? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::ExistsMem(v, t, g) => {
            for e in naive_term(a, t)?.elements() {
                if naive_closed(a, x, lang, syms, &g.subst(*v, &e))? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::E(arg) => match arg {
            EArg::Sent(s) => Ok(x.contains(s)),
            EArg::Term(t) => {
                let code = naive_term(a, t)?;
                match find_by_code(&code)? {
                    Some(s) => Ok(x.contains(&s)),
                    None => Ok(false),
                }
            }
            EArg::NegTerm(t) => {
                let code = naive_term(a, t)?;
                match find_by_code(&code)? {
                    Some(s) => Ok(x.contains(&neg(&s))),
                    None => Ok(true),
                }
            }
            EArg::Lit(name, args) => {
                let vals: Result<Vec<Hf>> = args.iter().map(|t| naive_term(a, t)).collect();
                Ok(x.contains(&literal_from_values(a, name, &vals?)?))
            }
        },
        Formula::InL(arg) => match arg {
            EArg::Sent(s) => Ok(lang.contains(s)),
            EArg::Term(t) => {
                let code = naive_term(a, t)?;
                Ok(find_by_code(&code)?.is_some())
            }
            EArg::NegTerm(t) => {
                let code = naive_term(a, t)?;
                match find_by_code(&code)? {
                    Some(s) => Ok(lang.contains(&neg(&s))),
                    None => Ok(false),
                }
            }
            EArg::Lit(name, args) => {
                let vals: Result<Vec<Hf>> = args.iter().map(|t| naive_term(a, t)).collect();
                Ok(lang.contains(&literal_from_values(a, name, &vals?)?))
            }
        },
        Formula::Dfin(t) => Ok(!naive_term(a, t)?.is_empty()),
    }
}
