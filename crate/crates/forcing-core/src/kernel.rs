//! Derivative chains over the certification order: staged atom exclusion,
//! the fixpoint kernel, finitely and almost finitely determined models,
//! model enumeration, and the countable-or-splitting dichotomy.
//!
//! The certification order of a constrained theory is represented here
//! through its model cones at a working cap: a condition belongs to the
//! order exactly when some enumerated fragment extends it, so staged
//! exclusions can be computed on the fragment list directly. Atom verdicts
//! are guarded against truncation artifacts by re-running the cone test at
//! a strictly larger margin cap and, for element-indexed atom families, by
//! materializing the family over the margin universe before survivors are
//! recomputed.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::certify;
use crate::error::{Error, Result};
use crate::formula::{falsity, neg, not, or_all, EArg, Formula, Term};
use crate::hf::Hf;
use crate::structure::Structure;
use crate::tci::Tci;

/// Extra universe elements enumerated beyond the working cap when vetting
/// atom candidates at unbounded scope.
pub const MARGIN: u32 = 4;

/// Ceiling on minimal-isolator enumeration per survivor.
const ISOLATOR_LIMIT: usize = 4096;

// ---------------------------------------------------------------------------
// Chain data

/// An element-indexed family of single-literal atoms: one condition
/// `{R(u)}` (or `{¬R(u)}`) per universe element `u`. Families are the
/// device that keeps stage traces stable across caps: at unbounded scope
/// the family is materialized over whatever universe prefix a computation
/// enumerates, rather than being frozen at the cap it was detected at.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct FamilyAtom {
    pub symbol: String,
    pub positive: bool,
}

/// One stage of the derivative chain.
#[derive(Clone, Debug)]
pub struct Stage {
    pub alpha: u32,
    /// Survivor-fragment count entering this stage; the stage order is the
    /// set of conditions extendible to one of these fragments.
    pub survivors_before: usize,
    /// No fragment survives into this stage.
    pub poset_empty: bool,
    /// Confirmed atoms, families materialized at the working cap.
    pub atoms: Vec<BTreeSet<Formula>>,
    pub families: Vec<FamilyAtom>,
    /// Confirmed atoms not absorbed into a family.
    pub sporadic: Vec<BTreeSet<Formula>>,
    /// Exclusion sentences appended to the certification set by this stage.
    pub gamma_added: Vec<Formula>,
}

/// The staged derivative of a certification order at a working cap.
#[derive(Clone, Debug)]
pub struct DerivativeChain {
    pub search_cap: u32,
    pub margin_cap: u32,
    pub stage_cap: u32,
    /// Model fragments at the working cap — the stage-0 survivors.
    pub models: Vec<BTreeSet<Formula>>,
    pub stages: Vec<Stage>,
    /// Stage at which the survivor set stabilized, if within the stage cap.
    pub fixpoint: Option<u32>,
    /// Indices into `models` of the fragments surviving every stage: the
    /// model cone of the kernel.
    pub kernel: Vec<usize>,
    /// All exclusion sentences accumulated across stages.
    pub gamma_top: Vec<Formula>,
}

/// The cap-independent shape of a chain: per stage the families, the
/// sporadic atoms, and the emptiness flag, plus the fixpoint stage and
/// kernel emptiness. Two runs of the same datum at different caps agree on
/// their shapes exactly when the staged structure is a genuine feature of
/// the datum rather than of the truncation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainShape {
    pub stages: Vec<(Vec<FamilyAtom>, Vec<BTreeSet<Formula>>, bool)>,
    pub fixpoint: Option<u32>,
    pub kernel_empty: bool,
}

impl DerivativeChain {
    pub fn kernel_is_empty(&self) -> bool {
        self.kernel.is_empty()
    }

    /// The fragments surviving every stage.
    pub fn kernel_fragments(&self) -> Vec<&BTreeSet<Formula>> {
        self.kernel.iter().map(|&i| &self.models[i]).collect()
    }

    /// Least stage whose atom set contains a subset of the fragment,
    /// together with that atom.
    pub fn afd_stage(&self, sigma: &BTreeSet<Formula>) -> Option<(u32, BTreeSet<Formula>)> {
        for st in &self.stages {
            if let Some(p) = st.atoms.iter().find(|p| p.is_subset(sigma)) {
                return Some((st.alpha, p.clone()));
            }
        }
        None
    }

    pub fn shape(&self) -> ChainShape {
        ChainShape {
            stages: self
                .stages
                .iter()
                .map(|s| (s.families.clone(), s.sporadic.clone(), s.poset_empty))
                .collect(),
            fixpoint: self.fixpoint,
            kernel_empty: self.kernel.is_empty(),
        }
    }
}

// ---------------------------------------------------------------------------
// Model enumeration

/// Genuine model fragments at the cap: every certifying fragment whose
/// rebuilt structure passes the whole-datum model check. A datum refuted
/// by the chain oracle has none.
pub fn enumerate_model_fragments(
    tci: &Tci,
    cap: u32,
    budget: u64,
) -> Result<Vec<BTreeSet<Formula>>> {
    if certify::schema_refutation(tci).is_some() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for sigma in certify::enumerate_models(tci, cap, budget)? {
        let m = tci.model_of(&sigma, cap)?;
        if tci.models_tci(&m, cap)? {
            out.push(sigma);
        }
    }
    Ok(out)
}

/// All models at the cap as structures, in deterministic order without
/// duplicates.
pub fn enumerate_models(tci: &Tci, cap: u32, budget: u64) -> Result<Vec<Structure>> {
    enumerate_model_fragments(tci, cap, budget)?
        .iter()
        .map(|sigma| tci.model_of(sigma, cap))
        .collect()
}

/// Indices of the survivors whose fragments extend the condition.
pub fn cone(models: &[BTreeSet<Formula>], survivors: &[usize], p: &BTreeSet<Formula>) -> Vec<usize> {
    survivors.iter().copied().filter(|&i| p.is_subset(&models[i])).collect()
}

// ---------------------------------------------------------------------------
// Atom detection

/// Every inclusion-minimal subset of the target fragment meeting each
/// difference `σ_target \ σ_j` over the other survivors — exactly the
/// minimal conditions whose survivor cone is the target alone.
fn minimal_isolators(
    models: &[BTreeSet<Formula>],
    survivors: &[usize],
    target: usize,
) -> Result<Vec<BTreeSet<Formula>>> {
    let sigma = &models[target];
    let mut diffs: Vec<BTreeSet<Formula>> = Vec::new();
    for &j in survivors {
        if j == target {
            continue;
        }
        let d: BTreeSet<Formula> = sigma.difference(&models[j]).cloned().collect();
        // Distinct fragments over one literal language always differ.
        debug_assert!(!d.is_empty());
        diffs.push(d);
    }
    // A set hitting a difference hits its supersets, so only the
    // inclusion-minimal differences constrain the search.
    diffs.sort_by_key(|d| d.len());
    let mut constraints: Vec<BTreeSet<Formula>> = Vec::new();
    for d in diffs {
        if !constraints.iter().any(|c| c.is_subset(&d)) {
            constraints.push(d);
        }
    }
    let mut found = Vec::new();
    let mut chosen = BTreeSet::new();
    hitting_sets(&constraints, &mut chosen, &mut found)?;
    // Branching can emit non-minimal covers; keep the minimal ones.
    found.sort_by_key(|s: &BTreeSet<Formula>| s.len());
    let mut out: Vec<BTreeSet<Formula>> = Vec::new();
    for s in found {
        if !out.iter().any(|m| m.is_subset(&s)) {
            out.push(s);
        }
    }
    out.sort();
    Ok(out)
}

fn hitting_sets(
    constraints: &[BTreeSet<Formula>],
    chosen: &mut BTreeSet<Formula>,
    found: &mut Vec<BTreeSet<Formula>>,
) -> Result<()> {
    if found.len() > ISOLATOR_LIMIT {
        return Err(Error::CapExceeded(
            "minimal-isolator enumeration exceeded its ceiling".into(),
        ));
    }
    let Some(next) = constraints.iter().find(|d| d.is_disjoint(chosen)) else {
        found.push(chosen.clone());
        return Ok(());
    };
    for lit in next {
        chosen.insert(lit.clone());
        hitting_sets(constraints, chosen, found)?;
        chosen.remove(lit);
    }
    Ok(())
}

/// Recognizes a single-literal condition `{R(u)}` / `{¬R(u)}` over a unary
/// relation applied to a universe element.
fn single_literal_shape(p: &BTreeSet<Formula>) -> Option<(String, bool, Hf)> {
    if p.len() != 1 {
        return None;
    }
    let lit = p.iter().next().unwrap();
    let (core, positive) = match lit {
        Formula::Not(f) => ((**f).clone(), false),
        f => (f.clone(), true),
    };
    match core {
        Formula::Rel(name, args) if args.len() == 1 => match &args[0] {
            Term::Val(u) => Some((name, positive, u.clone())),
            _ => None,
        },
        _ => None,
    }
}

fn family_literal(symbol: &str, positive: bool, u: &Hf) -> Formula {
    let core = Formula::Rel(symbol.to_string(), vec![Term::Val(u.clone())]);
    if positive {
        core
    } else {
        not(core)
    }
}

/// The exclusion sentence of a condition: some member fails to enter the
/// fragment. The empty condition yields falsity — nothing survives it.
pub fn exclusion_sentence(p: &BTreeSet<Formula>) -> Formula {
    if p.is_empty() {
        return falsity();
    }
    or_all(
        p.iter()
            .map(|x| not(Formula::E(EArg::Sent(Box::new(x.clone())))))
            .collect(),
    )
}

// ---------------------------------------------------------------------------
// The derivative

/// Iterates atom detection and exclusion up to `stage_cap`, working over
/// the fragments enumerated at `search_cap` and vetting every atom at a
/// strictly larger margin cap (equal to the working cap at finite scope,
/// where enlargement changes nothing).
///
/// Per stage: a survivor is atomic when one of its minimal isolators still
/// has a one-fragment cone among the margin survivors; confirmed
/// single-literal atoms covering every universe element at both caps form
/// a family and are rematerialized per cap before survivors are
/// recomputed. The fixpoint flag is set at the first stage that removes
/// nothing on either side.
pub fn derive(tci: &Tci, stage_cap: u32, search_cap: u32, budget: u64) -> Result<DerivativeChain> {
    let margin_cap =
        if tci.is_finite_scope() { search_cap } else { search_cap + MARGIN };
    let models = enumerate_model_fragments(tci, search_cap, budget)?;
    let margin_models = if margin_cap == search_cap {
        models.clone()
    } else {
        enumerate_model_fragments(tci, margin_cap, budget)?
    };
    let cap_universe = tci.universe_at(search_cap);
    let margin_universe = tci.universe_at(margin_cap);

    let mut s_cap: Vec<usize> = (0..models.len()).collect();
    let mut s_margin: Vec<usize> = (0..margin_models.len()).collect();
    let mut stages: Vec<Stage> = Vec::new();
    let mut gamma_top: Vec<Formula> = Vec::new();
    let mut fixpoint = None;

    for alpha in 0..=stage_cap {
        // Canonical confirmed atom per survivor: the least minimal isolator
        // whose margin cone is still a single fragment.
        let mut confirmed: Vec<BTreeSet<Formula>> = Vec::new();
        for &i in &s_cap {
            let isolators = minimal_isolators(&models, &s_cap, i)?;
            if let Some(atom) = isolators
                .into_iter()
                .find(|p| cone(&margin_models, &s_margin, p).len() == 1)
            {
                confirmed.push(atom);
            }
        }
        confirmed.sort();
        confirmed.dedup();

        // Element-indexed families among the single-literal atoms.
        let mut groups: BTreeMap<(String, bool), BTreeSet<Hf>> = BTreeMap::new();
        for p in &confirmed {
            if let Some((name, pos, u)) = single_literal_shape(p) {
                groups.entry((name, pos)).or_default().insert(u);
            }
        }
        let mut families: Vec<FamilyAtom> = Vec::new();
        for ((name, pos), elems) in groups {
            let covers_cap = cap_universe.iter().all(|u| elems.contains(u));
            let margin_ok = covers_cap
                && margin_universe.iter().all(|u| {
                    let q: BTreeSet<Formula> =
                        [family_literal(&name, pos, u)].into_iter().collect();
                    cone(&margin_models, &s_margin, &q).len() == 1
                });
            if margin_ok {
                families.push(FamilyAtom { symbol: name, positive: pos });
            }
        }
        let sporadic: Vec<BTreeSet<Formula>> = confirmed
            .iter()
            .filter(|p| match single_literal_shape(p) {
                Some((name, pos, _)) => {
                    !families.iter().any(|f| f.symbol == name && f.positive == pos)
                }
                None => true,
            })
            .cloned()
            .collect();

        // Materialize the removals at each cap.
        let mut removal_cap = sporadic.clone();
        let mut removal_margin = sporadic.clone();
        for f in &families {
            for u in &cap_universe {
                removal_cap
                    .push([family_literal(&f.symbol, f.positive, u)].into_iter().collect());
            }
            for u in &margin_universe {
                removal_margin
                    .push([family_literal(&f.symbol, f.positive, u)].into_iter().collect());
            }
        }
        removal_cap.sort();
        removal_cap.dedup();
        removal_margin.sort();
        removal_margin.dedup();

        let keep = |frag: &BTreeSet<Formula>, removals: &[BTreeSet<Formula>]| {
            !removals.iter().any(|p| p.is_subset(frag))
        };
        let new_s_cap: Vec<usize> =
            s_cap.iter().copied().filter(|&i| keep(&models[i], &removal_cap)).collect();
        let new_s_margin: Vec<usize> = s_margin
            .iter()
            .copied()
            .filter(|&i| keep(&margin_models[i], &removal_margin))
            .collect();

        let gamma_added: Vec<Formula> = removal_cap.iter().map(exclusion_sentence).collect();
        stages.push(Stage {
            alpha,
            survivors_before: s_cap.len(),
            poset_empty: s_cap.is_empty(),
            atoms: removal_cap,
            families,
            sporadic,
            gamma_added: gamma_added.clone(),
        });
        gamma_top.extend(gamma_added);

        if new_s_cap == s_cap && new_s_margin == s_margin {
            fixpoint = Some(alpha);
            break;
        }
        s_cap = new_s_cap;
        s_margin = new_s_margin;
    }

    Ok(DerivativeChain {
        search_cap,
        margin_cap,
        stage_cap,
        models,
        stages,
        fixpoint,
        kernel: s_cap,
        gamma_top,
    })
}

// ---------------------------------------------------------------------------
// Determination verdicts

/// Whether a model extends a stage-0 atom.
#[derive(Clone, Debug)]
pub struct FdVerdict {
    pub determined: bool,
    pub atom: Option<BTreeSet<Formula>>,
    /// Set when the verdict rests on a truncated enumeration.
    pub cap_dependent: Option<u32>,
}

/// Is the model pinned by a single condition — equivalently, does a
/// stage-0 atom sit inside its fragment?
pub fn finitely_determined(
    tci: &Tci,
    m: &Structure,
    search_cap: u32,
    budget: u64,
) -> Result<FdVerdict> {
    if !tci.models_tci(m, search_cap)? {
        return Err(Error::Precondition(
            "finite determination asks about models only".into(),
        ));
    }
    let chain = derive(tci, 0, search_cap, budget)?;
    let sigma = tci.sigma_of(m, search_cap)?;
    let atom = chain
        .stages
        .first()
        .and_then(|st| st.atoms.iter().find(|p| p.is_subset(&sigma)).cloned());
    let cap_dependent = (!tci.is_finite_scope()).then_some(search_cap);
    Ok(FdVerdict { determined: atom.is_some(), atom, cap_dependent })
}

/// Whether a model extends an atom of some derivative stage, and the least
/// such stage.
#[derive(Clone, Debug)]
pub struct AfdVerdict {
    /// Least stage whose atoms reach into the model's fragment; `None`
    /// when no stage up to the cap does.
    pub stage: Option<u32>,
    pub atom: Option<BTreeSet<Formula>>,
    pub cap_dependent: Option<u32>,
}

pub fn almost_fin_det(
    tci: &Tci,
    m: &Structure,
    stage_cap: u32,
    search_cap: u32,
    budget: u64,
) -> Result<AfdVerdict> {
    if !tci.models_tci(m, search_cap)? {
        return Err(Error::Precondition(
            "almost finite determination asks about models only".into(),
        ));
    }
    let chain = derive(tci, stage_cap, search_cap, budget)?;
    let sigma = tci.sigma_of(m, search_cap)?;
    let cap_dependent = (!tci.is_finite_scope()).then_some(search_cap);
    Ok(match chain.afd_stage(&sigma) {
        Some((stage, atom)) => {
            AfdVerdict { stage: Some(stage), atom: Some(atom), cap_dependent }
        }
        None => AfdVerdict { stage: None, atom: None, cap_dependent },
    })
}

// ---------------------------------------------------------------------------
// Dichotomy

/// Either every enumerated model is almost finitely determined, or the
/// kernel carries a perfect splitting tree.
#[derive(Clone, Debug)]
pub enum Dichotomy {
    /// Per-model determination stages, indexed like the chain's models.
    AllAfd { stages: Vec<(usize, u32)> },
    /// `leaves.len() == 2^depth` pairwise-incompatible conditions, each
    /// extendible to a kernel fragment.
    PerfectKernel { depth: u32, leaves: Vec<BTreeSet<Formula>> },
}

pub fn dichotomy(
    tci: &Tci,
    stage_cap: u32,
    search_cap: u32,
    depth: u32,
    budget: u64,
) -> Result<Dichotomy> {
    let chain = derive(tci, stage_cap, search_cap, budget)?;
    dichotomy_from(&chain, depth)
}

/// The dichotomy read off an existing chain. An empty kernel certifies
/// every model almost finitely determined (each fragment was removed by
/// some stage's atom); a nonempty kernel is exhibited as a splitting tree,
/// grown to the requested depth or as deep as the cap allows.
pub fn dichotomy_from(chain: &DerivativeChain, depth: u32) -> Result<Dichotomy> {
    if chain.kernel.is_empty() {
        let mut stages = Vec::new();
        for (i, sigma) in chain.models.iter().enumerate() {
            let Some((alpha, _)) = chain.afd_stage(sigma) else {
                return Err(Error::Eval(
                    "internal: an empty kernel left a model without a determining atom".into(),
                ));
            };
            stages.push((i, alpha));
        }
        return Ok(Dichotomy::AllAfd { stages });
    }
    let cores = literal_cores(chain);
    let mut leaves: Vec<BTreeSet<Formula>> = vec![BTreeSet::new()];
    let mut achieved = 0;
    while achieved < depth {
        let mut next = Vec::with_capacity(leaves.len() * 2);
        let mut all_split = true;
        for p in &leaves {
            match split_literal(chain, &cores, p) {
                Some(lit) => {
                    let mut pos = p.clone();
                    pos.insert(lit.clone());
                    let mut negated = p.clone();
                    negated.insert(neg(&lit));
                    next.push(pos);
                    next.push(negated);
                }
                None => {
                    all_split = false;
                    break;
                }
            }
        }
        if !all_split {
            break;
        }
        leaves = next;
        achieved += 1;
    }
    Ok(Dichotomy::PerfectKernel { depth: achieved, leaves })
}

/// The positive literal cores of the fragment language, in canonical order.
fn literal_cores(chain: &DerivativeChain) -> Vec<Formula> {
    let mut cores: BTreeSet<Formula> = BTreeSet::new();
    if let Some(sigma) = chain.models.first() {
        for lit in sigma {
            match lit {
                Formula::Not(f) => cores.insert((**f).clone()),
                f => cores.insert(f.clone()),
            };
        }
    }
    cores.into_iter().collect()
}

/// The least undecided core splitting the kernel cone of `p` both ways.
fn split_literal(
    chain: &DerivativeChain,
    cores: &[Formula],
    p: &BTreeSet<Formula>,
) -> Option<Formula> {
    let cone: Vec<&BTreeSet<Formula>> =
        chain.kernel.iter().map(|&i| &chain.models[i]).filter(|s| p.is_subset(s)).collect();
    for c in cores {
        if p.contains(c) || p.contains(&neg(c)) {
            continue;
        }
        let with = cone.iter().filter(|s| s.contains(c)).count();
        if with > 0 && with < cone.len() {
            return Some(c.clone());
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Explicit finite orders

/// Every condition of the certification order at finite scope: all subsets
/// of the enumerated fragments, deduplicated, in canonical order. Refuses
/// when the count would exceed `max`.
pub fn explicit_conditions(
    tci: &Tci,
    cap: u32,
    budget: u64,
    max: usize,
) -> Result<Vec<BTreeSet<Formula>>> {
    let models = enumerate_model_fragments(tci, cap, budget)?;
    let mut out: BTreeSet<BTreeSet<Formula>> = BTreeSet::new();
    for sigma in &models {
        let lits: Vec<&Formula> = sigma.iter().collect();
        if lits.len() > 20 {
            return Err(Error::CapExceeded(format!(
                "explicit condition listing over {} literals per fragment",
                lits.len()
            )));
        }
        for mask in 0u64..(1u64 << lits.len()) {
            let p: BTreeSet<Formula> = lits
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << *k) != 0)
                .map(|(_, l)| (*l).clone())
                .collect();
            out.insert(p);
            if out.len() > max {
                return Err(Error::CapExceeded(format!(
                    "explicit condition listing exceeded {max} conditions"
                )));
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// The generic filters of an explicitly listed finite certification order:
/// one per ⊆-maximal condition, each the set of that condition's subsets.
/// In a finite order every filter meeting all dense sets contains a
/// minimal element (the minimal conditions form a dense set) and is its
/// upward closure, so this listing is exhaustive.
pub fn explicit_generic_filters(conds: &[BTreeSet<Formula>]) -> Vec<Vec<usize>> {
    let mut filters = Vec::new();
    for m in conds {
        let maximal = !conds.iter().any(|q| m.is_subset(q) && q.len() > m.len());
        if maximal {
            filters.push(
                conds
                    .iter()
                    .enumerate()
                    .filter(|(_, q)| q.is_subset(m))
                    .map(|(k, _)| k)
                    .collect(),
            );
        }
    }
    filters
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::DEFAULT_BUDGET;
    use crate::formula::{exists, forall, implies, and};
    use crate::sat::models_star;
    use crate::formula::{Symbol, Var};
    use crate::tci::{countercom_fixture, fn_2_2, free_pred, singleton_pred, tci_sub};

    const B: u64 = DEFAULT_BUDGET;

    fn p_of(n: u64) -> BTreeSet<Formula> {
        [Formula::Rel("P".into(), vec![Term::Val(Hf::nat(n))])].into_iter().collect()
    }

    #[test]
    fn singleton_predicate_stage_trace() {
        let t = singleton_pred().unwrap();
        let chain = derive(&t, 8, 5, B).unwrap();
        assert_eq!(chain.models.len(), 6);
        assert_eq!(chain.stages.len(), 3);

        let s0 = &chain.stages[0];
        assert_eq!(s0.survivors_before, 6);
        let expected: Vec<BTreeSet<Formula>> = (0..5).map(p_of).collect();
        assert_eq!(s0.atoms, expected);
        assert_eq!(s0.families, vec![FamilyAtom { symbol: "P".into(), positive: true }]);
        assert!(s0.sporadic.is_empty());

        let s1 = &chain.stages[1];
        assert_eq!(s1.survivors_before, 1);
        assert!(!s1.poset_empty);
        assert_eq!(s1.atoms, vec![BTreeSet::new()]);
        assert_eq!(s1.gamma_added, vec![falsity()]);

        let s2 = &chain.stages[2];
        assert!(s2.poset_empty);
        assert!(s2.atoms.is_empty());
        assert_eq!(chain.fixpoint, Some(2));
        assert!(chain.kernel_is_empty());
    }

    #[test]
    fn singleton_predicate_trace_is_cap_independent() {
        let t = singleton_pred().unwrap();
        let shapes: Vec<ChainShape> =
            [5u32, 10, 20].iter().map(|&c| derive(&t, 8, c, B).unwrap().shape()).collect();
        assert_eq!(shapes[0], shapes[1]);
        assert_eq!(shapes[1], shapes[2]);
        let at10 = derive(&t, 8, 10, B).unwrap();
        let expected: Vec<BTreeSet<Formula>> = (0..10).map(p_of).collect();
        assert_eq!(at10.stages[0].atoms, expected);
    }

    #[test]
    fn free_predicate_kernel_is_the_whole_order() {
        let t = free_pred().unwrap();
        for cap in [4u32, 6] {
            let chain = derive(&t, 8, cap, B).unwrap();
            assert_eq!(chain.models.len(), 1usize << cap);
            assert_eq!(chain.stages.len(), 1);
            assert!(chain.stages[0].atoms.is_empty());
            assert_eq!(chain.fixpoint, Some(0));
            assert_eq!(chain.kernel.len(), chain.models.len());
        }
    }

    #[test]
    fn two_point_function_atoms() {
        let t = fn_2_2().unwrap();
        let chain = derive(&t, 8, 10, B).unwrap();
        assert_eq!(chain.models.len(), 4);
        assert_eq!(chain.stages.len(), 2);
        let s0 = &chain.stages[0];
        assert_eq!(s0.atoms.len(), 4);
        assert!(s0.atoms.iter().all(|p| p.len() == 2));
        assert!(s0.families.is_empty());
        // Each atom pins exactly one model, each model is pinned once.
        let all: Vec<usize> = (0..chain.models.len()).collect();
        let mut pinned = BTreeSet::new();
        for p in &s0.atoms {
            let c = cone(&chain.models, &all, p);
            assert_eq!(c.len(), 1);
            pinned.insert(c[0]);
        }
        assert_eq!(pinned.len(), 4);
        assert!(chain.stages[1].poset_empty);
        assert_eq!(chain.fixpoint, Some(1));
        assert!(chain.kernel_is_empty());
    }

    #[test]
    fn refuted_datum_has_no_models() {
        let t = countercom_fixture(4).unwrap();
        assert!(enumerate_models(&t, 20, B).unwrap().is_empty());
        let chain = derive(&t, 8, 20, B).unwrap();
        assert!(chain.stages[0].poset_empty);
        assert_eq!(chain.fixpoint, Some(0));
        assert!(chain.kernel_is_empty());
    }

    #[test]
    fn determination_verdicts() {
        let sp = singleton_pred().unwrap();
        let frags = enumerate_model_fragments(&sp, 5, B).unwrap();
        let three = frags
            .iter()
            .find(|s| s.contains(p_of(3).iter().next().unwrap()))
            .expect("a model with P = {3}");
        let m3 = sp.model_of(three, 5).unwrap();
        let fd = finitely_determined(&sp, &m3, 5, B).unwrap();
        assert!(fd.determined);
        assert_eq!(fd.atom, Some(p_of(3)));
        assert_eq!(fd.cap_dependent, Some(5));

        let empty = frags
            .iter()
            .find(|s| (0..5).all(|n| !s.contains(p_of(n).iter().next().unwrap())))
            .expect("the empty-predicate model");
        let m0 = sp.model_of(empty, 5).unwrap();
        assert!(!finitely_determined(&sp, &m0, 5, B).unwrap().determined);
        let afd = almost_fin_det(&sp, &m0, 8, 5, B).unwrap();
        assert_eq!(afd.stage, Some(1));
        assert_eq!(afd.atom, Some(BTreeSet::new()));

        let fp = free_pred().unwrap();
        let fr = enumerate_model_fragments(&fp, 4, B).unwrap();
        let m = fp.model_of(&fr[0], 4).unwrap();
        assert!(!finitely_determined(&fp, &m, 4, B).unwrap().determined);
        assert_eq!(almost_fin_det(&fp, &m, 8, 4, B).unwrap().stage, None);

        let f22 = fn_2_2().unwrap();
        let fr = enumerate_model_fragments(&f22, 10, B).unwrap();
        for sigma in &fr {
            let m = f22.model_of(sigma, 10).unwrap();
            let fd = finitely_determined(&f22, &m, 10, B).unwrap();
            assert!(fd.determined);
            assert_eq!(fd.cap_dependent, None);
        }
    }

    fn chain_structure(n: u64) -> Structure {
        let mut a = Structure::new((0..n).map(Hf::nat));
        a.declare(Symbol::relation("R", 2));
        let tuples: Vec<Vec<Hf>> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| vec![Hf::nat(i), Hf::nat(j)]))
            .collect();
        a.add_relation("R", 2, tuples);
        a
    }

    fn r(x: Var, y: Var) -> Formula {
        Formula::Rel("R".into(), vec![Term::Var(x), Term::Var(y)])
    }

    #[test]
    fn substructure_models_of_a_chain() {
        let a = chain_structure(3);
        let linear = vec![
            forall(0, Formula::Not(Box::new(r(0, 0)))),
            forall(0, forall(1, forall(2, implies(and(r(0, 1), r(1, 2)), r(0, 2))))),
        ];
        let t = tci_sub(&a, linear).unwrap();
        assert_eq!(enumerate_models(&t, 10, B).unwrap().len(), 8);
    }

    #[test]
    fn dense_suborders_are_all_determined() {
        let a = chain_structure(4);
        let density =
            forall(0, forall(1, implies(r(0, 1), exists(2, and(r(0, 2), r(2, 1))))));
        let t = tci_sub(&a, vec![density]).unwrap();
        let models = enumerate_models(&t, 10, B).unwrap();
        assert_eq!(models.len(), 5);
        match dichotomy(&t, 8, 10, 6, B).unwrap() {
            Dichotomy::AllAfd { stages } => {
                assert_eq!(stages.len(), 5);
                assert!(stages.iter().all(|&(_, alpha)| alpha == 0));
            }
            Dichotomy::PerfectKernel { .. } => panic!("expected all models determined"),
        }
    }

    #[test]
    fn free_predicate_splitting_tree() {
        let t = free_pred().unwrap();
        match dichotomy(&t, 8, 6, 6, B).unwrap() {
            Dichotomy::PerfectKernel { depth, leaves } => {
                assert_eq!(depth, 6);
                assert_eq!(leaves.len(), 64);
                for (i, p) in leaves.iter().enumerate() {
                    for q in &leaves[i + 1..] {
                        assert!(
                            p.iter().any(|l| q.contains(&neg(l))),
                            "tree leaves must be pairwise contradictory"
                        );
                    }
                }
            }
            Dichotomy::AllAfd { .. } => panic!("expected a splitting tree"),
        }
    }

    #[test]
    fn exclusion_sentences_encode_atoms() {
        let t = fn_2_2().unwrap();
        let chain = derive(&t, 8, 10, B).unwrap();
        let cl = t.synth_cert(10).unwrap();
        for p in &chain.stages[0].atoms {
            let sentence = exclusion_sentence(p);
            for sigma in &chain.models {
                let excluded = models_star(sigma, &cl.structure, &[sentence.clone()]).unwrap();
                assert_eq!(excluded, !p.is_subset(sigma));
            }
        }
    }

    #[test]
    fn explicit_conditions_of_the_two_point_order() {
        let t = fn_2_2().unwrap();
        let conds = explicit_conditions(&t, 10, B, 10_000).unwrap();
        assert_eq!(conds.len(), 196);
        let filters = explicit_generic_filters(&conds);
        assert_eq!(filters.len(), 4);
        let models = enumerate_model_fragments(&t, 10, B).unwrap();
        let mut unions = BTreeSet::new();
        for f in &filters {
            let mut union: BTreeSet<Formula> = BTreeSet::new();
            for &k in f {
                union.extend(conds[k].iter().cloned());
            }
            assert!(models.contains(&union));
            unions.insert(union);
        }
        assert_eq!(unions.len(), 4);
    }

    #[test]
    fn stage_atoms_exclude_earlier_survivors() {
        let t = singleton_pred().unwrap();
        let chain = derive(&t, 8, 5, B).unwrap();
        let all: Vec<usize> = (0..chain.models.len()).collect();
        // The stage-1 atom's surviving fragment extends no stage-0 atom.
        let target = cone(&chain.models, &all, &chain.stages[1].atoms[0]);
        let survivor = chain
            .models
            .iter()
            .enumerate()
            .filter(|(i, _)| target.contains(i))
            .find(|(_, s)| !chain.stages[0].atoms.iter().any(|p| p.is_subset(s)))
            .map(|(_, s)| s)
            .expect("the empty-predicate fragment survives stage 0");
        assert!(chain.stages[0].atoms.iter().all(|p| !p.is_subset(survivor)));
    }
}
