//! Certification search.
//!
//! Decides whether a constrained theory admits a model at a working cap by
//! searching the space of full literal assignments for one satisfying the
//! certification sentences; enumerates all certifying fragments; and tests
//! whether a condition extends to a certifying fragment.
//!
//! The searcher first grounds every certification sentence against the
//! capped universe: quantifiers expand over the universe members, atoms
//! whose arguments are settled by the background structure fold to
//! constants, and literal atoms outside the literal language fold to
//! false. What remains is a propositional tree over the positive literal
//! language, evaluated three-valuedly at every node of a backtracking
//! assignment. Sentences whose literal atoms occur with one polarity are
//! additionally bounded against the constant completion of the current
//! assignment, which prunes unreachable demands (for instance a chain
//! demand longer than any path available below the cap) at the root.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::coding::formula_code;
use crate::error::{Error, Result};
use crate::formula::{neg, EArg, Formula};
use crate::hf::Hf;
use crate::sat::{eval_term, models_star, resolve_earg, SatCtx};
use crate::structure::{Structure, Valuation};
use crate::tci::{CertLanguage, Ext, Schema, Tci};

/// Default node budget for the backtracking search.
pub const DEFAULT_BUDGET: u64 = 1 << 22;

/// Outcome of a consistency check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertVerdict {
    /// A certifying fragment was found. `cap_dependent` carries the
    /// working cap when the verdict is relative to the truncation at that
    /// cap (a pinned capped universe); `None` means the rebuilt structure
    /// is a model outright.
    Certified {
        sigma: BTreeSet<Formula>,
        cap_dependent: Option<u32>,
    },
    /// No model exists at any cap.
    Refuted { reason: String },
    /// The bounded search concluded nothing beyond the cap.
    Unknown { cap: u32, reason: String },
}

impl CertVerdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, CertVerdict::Certified { .. })
    }
    pub fn is_refuted(&self) -> bool {
        matches!(self, CertVerdict::Refuted { .. })
    }
    pub fn is_unknown(&self) -> bool {
        matches!(self, CertVerdict::Unknown { .. })
    }
}

/// Raw outcome of a fragment search.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// Certifying fragments, in canonical search order.
    pub witnesses: Vec<BTreeSet<Formula>>,
    /// Whether the whole space was explored (no budget cutoff and no
    /// early stop after the requested number of witnesses).
    pub exhausted: bool,
    /// Nodes visited.
    pub nodes: u64,
}

// ---------------------------------------------------------------------------
// Grounded sentences

/// A certification sentence with its quantifiers expanded over the capped
/// universe and every settled atom folded away: a propositional tree whose
/// leaves index the positive literal language.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Ground {
    Const(bool),
    Atom(usize),
    Not(Box<Ground>),
    And(Vec<Ground>),
    Or(Vec<Ground>),
}

fn gnot(g: Ground) -> Ground {
    match g {
        Ground::Const(b) => Ground::Const(!b),
        Ground::Not(inner) => *inner,
        other => Ground::Not(Box::new(other)),
    }
}

fn gjoin(children: Vec<Ground>, conj: bool) -> Ground {
    let mut out: Vec<Ground> = Vec::with_capacity(children.len());
    for c in children {
        match c {
            Ground::Const(b) if b == conj => {}
            Ground::Const(b) => return Ground::Const(b),
            Ground::And(inner) if conj => out.extend(inner),
            Ground::Or(inner) if !conj => out.extend(inner),
            other => out.push(other),
        }
    }
    out.sort();
    out.dedup();
    match out.len() {
        0 => Ground::Const(conj),
        1 => out.pop().unwrap(),
        _ if conj => Ground::And(out),
        _ => Ground::Or(out),
    }
}

fn gand(children: Vec<Ground>) -> Ground {
    gjoin(children, true)
}

fn gor(children: Vec<Ground>) -> Ground {
    gjoin(children, false)
}

/// Polarity of the literal atoms inside a grounded sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Polarity {
    /// No atoms: truth is assignment-independent.
    Fixed,
    /// All atoms occur positively: truth grows with the fragment.
    Monotone,
    /// All atoms occur negatively: truth shrinks.
    Antitone,
    Mixed,
}

fn polarity_scan(g: &Ground, positive: bool, acc: &mut (bool, bool)) {
    match g {
        Ground::Const(_) => {}
        Ground::Atom(_) => {
            if positive {
                acc.0 = true;
            } else {
                acc.1 = true;
            }
        }
        Ground::Not(inner) => polarity_scan(inner, !positive, acc),
        Ground::And(cs) | Ground::Or(cs) => {
            for c in cs {
                polarity_scan(c, positive, acc);
            }
        }
    }
}

fn polarity(g: &Ground) -> Polarity {
    let mut acc = (false, false);
    polarity_scan(g, true, &mut acc);
    match acc {
        (false, false) => Polarity::Fixed,
        (true, false) => Polarity::Monotone,
        (false, true) => Polarity::Antitone,
        (true, true) => Polarity::Mixed,
    }
}

/// Three-valued evaluation under a partial assignment.
fn eval3(g: &Ground, state: &[Option<bool>]) -> Option<bool> {
    match g {
        Ground::Const(b) => Some(*b),
        Ground::Atom(i) => state[*i],
        Ground::Not(inner) => eval3(inner, state).map(|b| !b),
        Ground::And(cs) => {
            let mut undecided = false;
            for c in cs {
                match eval3(c, state) {
                    Some(false) => return Some(false),
                    Some(true) => {}
                    None => undecided = true,
                }
            }
            if undecided {
                None
            } else {
                Some(true)
            }
        }
        Ground::Or(cs) => {
            let mut undecided = false;
            for c in cs {
                match eval3(c, state) {
                    Some(true) => return Some(true),
                    Some(false) => {}
                    None => undecided = true,
                }
            }
            if undecided {
                None
            } else {
                Some(false)
            }
        }
    }
}

/// Two-valued evaluation of the completion that sends every unassigned
/// atom to `default`. For a monotone sentence the all-true completion is
/// an upper bound over extensions and the all-false one a lower bound;
/// dually when antitone.
fn eval_completed(g: &Ground, state: &[Option<bool>], default: bool) -> bool {
    match g {
        Ground::Const(b) => *b,
        Ground::Atom(i) => state[*i].unwrap_or(default),
        Ground::Not(inner) => !eval_completed(inner, state, default),
        Ground::And(cs) => cs.iter().all(|c| eval_completed(c, state, default)),
        Ground::Or(cs) => cs.iter().any(|c| eval_completed(c, state, default)),
    }
}

/// Grounds sentences of the certification language against a reduced
/// structure whose base is exactly the capped universe.
struct Grounder<'a> {
    ctx: SatCtx<'a>,
    index: HashMap<Formula, usize>,
}

impl Grounder<'_> {
    /// Resolves a literal sentence to its atom, splitting a negation.
    fn literal(&self, sentence: Formula) -> Ground {
        let (core, positive) = match sentence {
            Formula::Not(inner) => (*inner, false),
            other => (other, true),
        };
        match self.index.get(&core) {
            // Sentences outside the literal language are never members of
            // a fragment over it.
            None => Ground::Const(false),
            Some(&i) if positive => Ground::Atom(i),
            Some(&i) => gnot(Ground::Atom(i)),
        }
    }

    fn earg(&self, nu: &Valuation, arg: &EArg) -> Result<Ground> {
        match resolve_earg(&self.ctx, nu, arg)? {
            Ok(sentence) => Ok(self.literal(sentence)),
            Err(verdict) => Ok(Ground::Const(verdict)),
        }
    }

    fn ground(&self, nu: &Valuation, f: &Formula) -> Result<Ground> {
        Ok(match f {
            Formula::Rel(name, args) => {
                let vals: Result<Vec<Hf>> =
                    args.iter().map(|t| eval_term(&self.ctx, nu, t)).collect();
                let ext = self
                    .ctx
                    .a
                    .rels
                    .get(name)
                    .ok_or_else(|| Error::Eval(format!("relation `{name}` uninterpreted")))?;
                Ground::Const(ext.contains(&vals?))
            }
            Formula::Eq(a, b) => {
                Ground::Const(eval_term(&self.ctx, nu, a)? == eval_term(&self.ctx, nu, b)?)
            }
            Formula::Mem(a, b) => {
                let x = eval_term(&self.ctx, nu, a)?;
                let y = eval_term(&self.ctx, nu, b)?;
                Ground::Const(y.contains(&x))
            }
            Formula::Not(g) => gnot(self.ground(nu, g)?),
            Formula::And(a, b) => {
                let ga = self.ground(nu, a)?;
                if ga == Ground::Const(false) {
                    return Ok(ga);
                }
                gand(vec![ga, self.ground(nu, b)?])
            }
            Formula::Or(a, b) => {
                let ga = self.ground(nu, a)?;
                if ga == Ground::Const(true) {
                    return Ok(ga);
                }
                gor(vec![ga, self.ground(nu, b)?])
            }
            Formula::Implies(a, b) => {
                let ga = self.ground(nu, a)?;
                if ga == Ground::Const(false) {
                    return Ok(Ground::Const(true));
                }
                gor(vec![gnot(ga), self.ground(nu, b)?])
            }
            Formula::Iff(a, b) => {
                let ga = self.ground(nu, a)?;
                let gb = self.ground(nu, b)?;
                gand(vec![
                    gor(vec![gnot(ga.clone()), gb.clone()]),
                    gor(vec![gnot(gb), ga]),
                ])
            }
            Formula::Forall(_, _) | Formula::Exists(_, _) => {
                return self.ground_block(nu, f);
            }
            Formula::ForallMem(v, t, g) => {
                let bound = eval_term(&self.ctx, nu, t)?;
                let mut parts = Vec::new();
                for x in bound.elements() {
                    let gx = self.ground(&nu.with(*v, x), g)?;
                    if gx == Ground::Const(false) {
                        return Ok(gx);
                    }
                    parts.push(gx);
                }
                gand(parts)
            }
            Formula::ExistsMem(v, t, g) => {
                let bound = eval_term(&self.ctx, nu, t)?;
                let mut parts = Vec::new();
                for x in bound.elements() {
                    let gx = self.ground(&nu.with(*v, x), g)?;
                    if gx == Ground::Const(true) {
                        return Ok(gx);
                    }
                    parts.push(gx);
                }
                gor(parts)
            }
            Formula::E(arg) => self.earg(nu, arg)?,
            Formula::InL(arg) => {
                let lang = self
                    .ctx
                    .lang
                    .as_ref()
                    .ok_or_else(|| Error::Eval("InL atom needs a language context".into()))?;
                match resolve_earg(&self.ctx, nu, arg)? {
                    Ok(sentence) => Ground::Const(lang.contains(&sentence)),
                    Err(_) => Ground::Const(false),
                }
            }
            Formula::Dfin(t) => Ground::Const(!eval_term(&self.ctx, nu, t)?.is_empty()),
        })
    }

    /// Grounds a quantifier block by scheduled expansion: the prefix of
    /// same-kind quantifiers is stripped, the matrix is split into
    /// conjuncts (existential block) or disjuncts (universal block), and
    /// each part is evaluated at the outermost level where all its
    /// variables are bound. A part that settles a branch cuts the deeper
    /// value loops, so an existential demand only expands along feasible
    /// partial assignments instead of the full value-tuple space.
    fn ground_block(&self, nu: &Valuation, f: &Formula) -> Result<Ground> {
        let exists = matches!(f, Formula::Exists(_, _));
        let mut vars = Vec::new();
        let mut matrix = f;
        loop {
            match matrix {
                Formula::Forall(v, g) if !exists => {
                    vars.push(*v);
                    matrix = g;
                }
                Formula::Exists(v, g) if exists => {
                    vars.push(*v);
                    matrix = g;
                }
                _ => break,
            }
        }

        let mut parts: Vec<(&Formula, bool)> = Vec::new();
        collect_parts(matrix, exists, false, &mut parts);

        // Level at which a part becomes ground: one past the position of
        // its innermost block variable.
        let pos: HashMap<u32, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i + 1)).collect();
        let mut by_level: Vec<Vec<(&Formula, bool)>> = vec![Vec::new(); vars.len() + 1];
        for (pf, negd) in parts {
            let lvl = pf
                .free_vars()
                .into_iter()
                .filter_map(|v| pos.get(&v))
                .copied()
                .max()
                .unwrap_or(0);
            by_level[lvl].push((pf, negd));
        }

        let mut partial = Vec::new();
        let mut branches = Vec::new();
        if self.expand(nu, exists, &vars, &by_level, 0, &mut partial, &mut branches)? {
            return Ok(Ground::Const(exists));
        }
        Ok(if exists { gor(branches) } else { gand(branches) })
    }

    /// One level of scheduled expansion. Returns `true` when the whole
    /// block is decided outright (an existential branch came out
    /// constantly true, or a universal one constantly false).
    fn expand(
        &self,
        nu: &Valuation,
        exists: bool,
        vars: &[u32],
        by_level: &[Vec<(&Formula, bool)>],
        level: usize,
        partial: &mut Vec<Ground>,
        branches: &mut Vec<Ground>,
    ) -> Result<bool> {
        // A conjunct grounding false kills an existential branch; a
        // disjunct grounding true satisfies a universal one.
        let kill = Ground::Const(!exists);
        let neutral = Ground::Const(exists);
        let mark = partial.len();
        for (pf, negd) in &by_level[level] {
            let mut g = self.ground(nu, pf)?;
            if *negd {
                g = gnot(g);
            }
            if g == kill {
                partial.truncate(mark);
                return Ok(false);
            }
            if g != neutral {
                partial.push(g);
            }
        }
        if level == vars.len() {
            let combined =
                if exists { gand(partial.clone()) } else { gor(partial.clone()) };
            partial.truncate(mark);
            if combined == Ground::Const(exists) {
                return Ok(true);
            }
            if combined != Ground::Const(!exists) {
                branches.push(combined);
            }
            return Ok(false);
        }
        for x in self.ctx.a.base.iter() {
            let nu2 = nu.with(vars[level], x.clone());
            if self.expand(&nu2, exists, vars, by_level, level + 1, partial, branches)? {
                partial.truncate(mark);
                return Ok(true);
            }
        }
        partial.truncate(mark);
        Ok(false)
    }
}

/// Splits a quantifier-block matrix into scheduled parts: conjuncts when
/// `conj`, disjuncts otherwise, tagging each with whether it occurs
/// negated. Guard implications and negated conjunctions open up so that a
/// settled guard can cut a branch as early as possible.
fn collect_parts<'f>(f: &'f Formula, conj: bool, negated: bool, out: &mut Vec<(&'f Formula, bool)>) {
    match f {
        Formula::And(a, b) if conj != negated => {
            collect_parts(a, conj, negated, out);
            collect_parts(b, conj, negated, out);
        }
        Formula::Or(a, b) if conj == negated => {
            collect_parts(a, conj, negated, out);
            collect_parts(b, conj, negated, out);
        }
        Formula::Implies(a, b) if conj == negated => {
            collect_parts(a, conj, !negated, out);
            collect_parts(b, conj, negated, out);
        }
        Formula::Not(g) => collect_parts(g, conj, !negated, out),
        _ => out.push((f, negated)),
    }
}

// ---------------------------------------------------------------------------
// The backtracking search

struct Searcher<'a> {
    atoms: &'a [Formula],
    gamma: Vec<Ground>,
    polarity: Vec<Polarity>,
    state: Vec<Option<bool>>,
    pinned: Vec<bool>,
    budget: u64,
    nodes: u64,
    want: usize,
    witnesses: Vec<BTreeSet<Formula>>,
    out_of_budget: bool,
}

impl Searcher<'_> {
    /// Returns `true` when the search should stop entirely.
    fn search(&mut self, depth: usize, undecided: &[usize]) -> Result<bool> {
        self.nodes += 1;
        if self.nodes > self.budget {
            self.out_of_budget = true;
            return Ok(true);
        }

        // Re-examine the sentences not yet known to hold.
        let mut still: Vec<usize> = Vec::with_capacity(undecided.len());
        for &i in undecided {
            let g = &self.gamma[i];
            match self.polarity[i] {
                Polarity::Monotone => {
                    // False even under the all-true completion: false
                    // under every completion.
                    if !eval_completed(g, &self.state, true) {
                        return Ok(false);
                    }
                    if eval_completed(g, &self.state, false) {
                        continue; // true under every completion
                    }
                    still.push(i);
                }
                Polarity::Antitone => {
                    if !eval_completed(g, &self.state, false) {
                        return Ok(false);
                    }
                    if eval_completed(g, &self.state, true) {
                        continue;
                    }
                    still.push(i);
                }
                Polarity::Fixed | Polarity::Mixed => match eval3(g, &self.state) {
                    Some(false) => return Ok(false),
                    Some(true) => {}
                    None => still.push(i),
                },
            }
        }

        if depth == self.atoms.len() {
            if !still.is_empty() {
                return Err(Error::Eval(
                    "a sentence stayed undecided under a full assignment".into(),
                ));
            }
            let mut sigma = BTreeSet::new();
            for (i, lit) in self.atoms.iter().enumerate() {
                if self.state[i] == Some(true) {
                    sigma.insert(lit.clone());
                } else {
                    sigma.insert(neg(lit));
                }
            }
            self.witnesses.push(sigma);
            return Ok(self.witnesses.len() >= self.want);
        }

        if self.pinned[depth] {
            return self.search(depth + 1, &still);
        }
        for b in [true, false] {
            self.state[depth] = Some(b);
            if self.search(depth + 1, &still)? {
                self.state[depth] = None;
                return Ok(true);
            }
        }
        self.state[depth] = None;
        Ok(false)
    }
}

fn split_literal(s: &Formula) -> (Formula, bool) {
    match s {
        Formula::Not(inner) => ((**inner).clone(), false),
        other => (other.clone(), true),
    }
}

/// The atoms of the positive literal language in branching order: universe
/// literals first (they gate everything through the relativization
/// guards), then the rest; each block in canonical sentence-code order.
fn atom_order(cl: &CertLanguage, ctx: &SatCtx) -> Result<Vec<Formula>> {
    let mut keyed: Vec<(bool, Hf, Formula)> = Vec::with_capacity(cl.pos_lang.len());
    for lit in &cl.pos_lang {
        let code = formula_code(lit, &ctx.syms)?;
        let is_u = matches!(lit, Formula::Rel(name, _) if *name == cl.u_name);
        keyed.push((!is_u, code, lit.clone()));
    }
    keyed.sort();
    Ok(keyed.into_iter().map(|(_, _, l)| l).collect())
}

fn search_fragments(
    cl: &CertLanguage,
    condition: &BTreeSet<Formula>,
    budget: u64,
    want: usize,
) -> Result<SearchOutcome> {
    // The certification sentences guard every quantifier by presence in
    // the universe (or bound it by an explicit set), so restricting the
    // quantifier range to the universe members is sound and far cheaper
    // than the background structure's full transitive closure.
    let mut reduced = Structure::new(cl.universe.iter().cloned());
    for sym in cl.structure.sig.values() {
        reduced.declare(sym.clone());
    }
    let ctx = SatCtx::for_fragment(&reduced, &cl.lang)?;

    let atoms = atom_order(cl, &ctx)?;
    let index: HashMap<Formula, usize> =
        atoms.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();

    // Pre-assign the condition.
    let mut state: Vec<Option<bool>> = vec![None; atoms.len()];
    let mut pinned = vec![false; atoms.len()];
    for s in condition {
        let (core, b) = split_literal(s);
        let Some(&i) = index.get(&core) else {
            return Err(Error::Precondition(format!(
                "condition literal outside the literal language: {}",
                crate::formula::print(s)
            )));
        };
        if state[i] == Some(!b) {
            // The condition is self-contradictory; nothing extends it.
            return Ok(SearchOutcome { witnesses: vec![], exhausted: true, nodes: 0 });
        }
        state[i] = Some(b);
        pinned[i] = true;
    }

    let grounder = Grounder { ctx, index };
    let nu = Valuation::empty(grounder.ctx.a);
    let mut gamma = Vec::with_capacity(cl.gamma.len());
    for f in &cl.gamma {
        gamma.push(grounder.ground(&nu, f)?);
    }
    let pol: Vec<Polarity> = gamma.iter().map(polarity).collect();

    let mut searcher = Searcher {
        atoms: &atoms,
        gamma,
        polarity: pol,
        state,
        pinned,
        budget,
        nodes: 0,
        want,
        witnesses: Vec::new(),
        out_of_budget: false,
    };
    let all: Vec<usize> = (0..searcher.gamma.len()).collect();
    let stopped = searcher.search(0, &all)?;
    Ok(SearchOutcome {
        witnesses: searcher.witnesses,
        exhausted: !stopped,
        nodes: searcher.nodes,
    })
}

/// Finds one certifying fragment extending the condition, if any.
pub fn find_certifying_fragment(
    cl: &CertLanguage,
    condition: &BTreeSet<Formula>,
    budget: u64,
) -> Result<SearchOutcome> {
    search_fragments(cl, condition, budget, 1)
}

/// Enumerates every certifying fragment extending the condition, in
/// canonical search order.
pub fn enumerate_certifying(
    cl: &CertLanguage,
    condition: &BTreeSet<Formula>,
    budget: u64,
) -> Result<SearchOutcome> {
    search_fragments(cl, condition, budget, usize::MAX)
}

/// Does the fragment satisfy every certification sentence? Evaluated
/// against the full background structure.
pub fn certifies(cl: &CertLanguage, sigma: &BTreeSet<Formula>) -> Result<bool> {
    models_star(sigma, &cl.structure, &cl.gamma)
}

// ---------------------------------------------------------------------------
// Whole-datum verdicts

/// If the datum carries an unbounded chain family whose relation is pinned
/// inside an explicit acyclic set, no structure of any size can satisfy
/// every instance; returns the least unsatisfiable instance and a reason.
pub fn schema_refutation(tci: &Tci) -> Option<(u32, String)> {
    let Schema::Chains { rel, .. } = tci.schema.as_ref()?;
    let c = tci.theta.get(rel)?;
    let Ext::Explicit(pairs) = &c.ext else {
        return None;
    };
    let edges: Vec<(Hf, Hf)> = pairs
        .iter()
        .filter_map(|p| p.untuple(2).map(|v| (v[0].clone(), v[1].clone())))
        .collect();
    let l = longest_path(&edges)?;
    Some((
        l + 1,
        format!(
            "the chain family demands an admissible chain of n points for every n, but \
             the relation constraint is acyclic with a longest chain of {l} points; \
             instance n = {} is already unsatisfiable",
            l + 1
        ),
    ))
}

/// Longest path (in vertices) of the digraph, or `None` if it has a cycle.
fn longest_path(edges: &[(Hf, Hf)]) -> Option<u32> {
    let mut nodes: BTreeSet<&Hf> = BTreeSet::new();
    for (a, b) in edges {
        nodes.insert(a);
        nodes.insert(b);
    }
    let idx: BTreeMap<&Hf, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let n = idx.len();
    let mut adj = vec![Vec::new(); n];
    for (a, b) in edges {
        adj[idx[a]].push(idx[b]);
    }
    // 0: unseen, 1: on stack, 2: done.
    let mut color = vec![0u8; n];
    let mut best = vec![0u32; n];
    fn dfs(v: usize, adj: &[Vec<usize>], color: &mut [u8], best: &mut [u32]) -> Option<u32> {
        if color[v] == 1 {
            return None; // cycle
        }
        if color[v] == 2 {
            return Some(best[v]);
        }
        color[v] = 1;
        let mut longest = 0;
        for i in 0..adj[v].len() {
            let w = adj[v][i];
            longest = longest.max(dfs(w, adj, color, best)?);
        }
        color[v] = 2;
        best[v] = longest + 1;
        Some(best[v])
    }
    let mut overall = 0;
    for v in 0..n {
        overall = overall.max(dfs(v, &adj, &mut color, &mut best)?);
    }
    Some(overall)
}

fn verdict_from_witness(tci: &Tci, sigma: BTreeSet<Formula>, cap: u32) -> Result<CertVerdict> {
    let m = tci.model_of(&sigma, cap)?;
    let genuine = tci.models_tci(&m, cap)?;
    let uc = tci.u_constraint();
    let truncated_universe = uc.exact && uc.ext.is_capped();
    if !genuine {
        if tci.is_finite_scope() {
            return Err(Error::Eval(
                "internal: a certified fragment fails the model check at full scope".into(),
            ));
        }
        // The fragment certifies the truncation at this cap only.
        return Ok(CertVerdict::Certified { sigma, cap_dependent: Some(cap) });
    }
    let cap_dependent = if truncated_universe { Some(cap) } else { None };
    Ok(CertVerdict::Certified { sigma, cap_dependent })
}

/// Decides consistency of the constrained theory at the cap.
pub fn consistent(tci: &Tci, cap: u32, budget: u64) -> Result<CertVerdict> {
    if let Some((_, reason)) = schema_refutation(tci) {
        return Ok(CertVerdict::Refuted { reason });
    }
    let cl = tci.synth_cert(cap)?;
    let out = find_certifying_fragment(&cl, &BTreeSet::new(), budget)?;
    if let Some(sigma) = out.witnesses.into_iter().next() {
        return verdict_from_witness(tci, sigma, cap);
    }
    if !out.exhausted {
        return Ok(CertVerdict::Unknown {
            cap,
            reason: format!("search budget of {budget} nodes exhausted"),
        });
    }
    if tci.is_finite_scope() {
        Ok(CertVerdict::Refuted {
            reason: "the full finite search space admits no certifying fragment".into(),
        })
    } else {
        Ok(CertVerdict::Unknown {
            cap,
            reason: "no certifying fragment below the cap".into(),
        })
    }
}

/// Is the condition a member of the certification order — that is, does
/// some certifying fragment extend it? A datum refuted by the chain
/// oracle has an empty order.
pub fn in_p(tci: &Tci, condition: &BTreeSet<Formula>, cap: u32, budget: u64) -> Result<bool> {
    if schema_refutation(tci).is_some() {
        return Ok(false);
    }
    let cl = tci.synth_cert(cap)?;
    let out = find_certifying_fragment(&cl, condition, budget)?;
    if !out.witnesses.is_empty() {
        return Ok(true);
    }
    if out.exhausted {
        Ok(false)
    } else {
        Err(Error::CapExceeded(format!(
            "condition membership undecided within {budget} nodes"
        )))
    }
}

/// Every certifying fragment at the cap, in canonical search order.
pub fn enumerate_models(tci: &Tci, cap: u32, budget: u64) -> Result<Vec<BTreeSet<Formula>>> {
    let cl = tci.synth_cert(cap)?;
    let out = enumerate_certifying(&cl, &BTreeSet::new(), budget)?;
    if !out.exhausted {
        return Err(Error::CapExceeded(format!(
            "model enumeration incomplete within {budget} nodes"
        )));
    }
    Ok(out.witnesses)
}

// ---------------------------------------------------------------------------
// Finite consistency

/// Verdict for one subset of the sentence list.
#[derive(Clone, Debug)]
pub struct SubsetVerdict {
    /// Indices into [`Tci::theory_list`].
    pub indices: Vec<usize>,
    pub verdict: CertVerdict,
}

/// Checks every subset of the materialized sentence list of size at most
/// `k` for consistency, largest subsets first so found witnesses are
/// reused for their sub-subsets.
pub fn finitely_consistent(
    tci: &Tci,
    k: usize,
    cap: u32,
    budget: u64,
) -> Result<Vec<SubsetVerdict>> {
    let sentences = tci.theory_list();
    let n = sentences.len();
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for mask in 0u64..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if idx.len() <= k {
            subsets.push(idx);
        }
    }
    subsets.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));

    // Witness pool: fragments found so far. A pool witness whose rebuilt
    // model satisfies a subset's sentences settles the subset without
    // another search.
    let mut pool: Vec<BTreeSet<Formula>> = Vec::new();
    let mut out = Vec::new();
    for indices in subsets {
        let sub = Tci {
            sigma: tci.sigma.clone(),
            u_name: tci.u_name.clone(),
            theta: tci.theta.clone(),
            theory: indices.iter().map(|&i| sentences[i].clone()).collect(),
            schema: None,
        };
        let mut verdict = None;
        for sigma in &pool {
            let m = sub.model_of(sigma, cap)?;
            if sub.models_tci(&m, cap)? {
                verdict = Some(verdict_from_witness(&sub, sigma.clone(), cap)?);
                break;
            }
        }
        let verdict = match verdict {
            Some(v) => v,
            None => {
                let v = consistent(&sub, cap, budget)?;
                if let CertVerdict::Certified { sigma, .. } = &v {
                    pool.push(sigma.clone());
                }
                v
            }
        };
        out.push(SubsetVerdict { indices, verdict });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tci::{countercom_fixture, fn_2_2, free_pred, singleton_pred};

    const B: u64 = DEFAULT_BUDGET;

    #[test]
    fn chain_oracle_refutes_the_unbounded_fixture() {
        let t = countercom_fixture(5).unwrap();
        let (least, reason) = schema_refutation(&t).unwrap();
        assert_eq!(least, 6, "windows admit chains of at most 5 points");
        assert!(reason.contains("n = 6"));
        for cap in [20, 40] {
            let v = consistent(&t, cap, B).unwrap();
            assert!(v.is_refuted(), "cap {cap}: {v:?}");
        }
        // The empty condition is not in the (empty) certification order.
        assert!(!in_p(&t, &BTreeSet::new(), 20, B).unwrap());
    }

    #[test]
    fn truncated_fixture_needs_the_larger_cap() {
        let t = countercom_fixture(5).unwrap().materialized();
        assert!(t.schema.is_none());
        // At cap 20 the largest window is four points, so the five-point
        // chain demand admits no witness; the verdict stays open because
        // the universe constraint is unbounded.
        let v20 = consistent(&t, 20, B).unwrap();
        assert!(v20.is_unknown(), "{v20:?}");
        // At cap 40 the window [32, 37) carries the unique model.
        let v40 = consistent(&t, 40, B).unwrap();
        let CertVerdict::Certified { sigma, cap_dependent } = v40 else {
            panic!("expected certified");
        };
        assert_eq!(cap_dependent, None, "the witness is a model outright");
        let m = t.model_of(&sigma, 40).unwrap();
        let base: Vec<u64> = m.base.iter().map(|x| x.as_nat().unwrap()).collect();
        assert_eq!(base, vec![32, 33, 34, 35, 36]);
        assert_eq!(m.rels["R"].len(), 10, "a strict linear order on 5 points");
    }

    #[test]
    fn truncated_fixture_has_a_unique_model_at_cap_40() {
        let t = countercom_fixture(5).unwrap().materialized();
        let models = enumerate_models(&t, 40, B).unwrap();
        assert_eq!(models.len(), 1);
    }

    #[test]
    fn impossible_chain_demands_prune_at_the_root() {
        // The single sentence "a chain of five points exists" has no
        // witness at cap 20; grounding folds it to a constant and the
        // search never branches.
        let full = countercom_fixture(5).unwrap();
        let sentences = full.theory_list();
        let t = Tci {
            sigma: full.sigma.clone(),
            u_name: full.u_name.clone(),
            theta: full.theta.clone(),
            theory: vec![sentences[6].clone()],
            schema: None,
        };
        let cl = t.synth_cert(20).unwrap();
        let out = find_certifying_fragment(&cl, &BTreeSet::new(), B).unwrap();
        assert!(out.witnesses.is_empty());
        assert!(out.exhausted);
        assert!(out.nodes <= 4, "expected a root prune, used {} nodes", out.nodes);
    }

    #[test]
    fn singleton_predicate_models_count() {
        let t = singleton_pred().unwrap();
        let v = consistent(&t, 5, B).unwrap();
        let CertVerdict::Certified { cap_dependent, .. } = v else {
            panic!("expected certified");
        };
        assert_eq!(cap_dependent, Some(5), "the pinned universe is truncated");
        let models = enumerate_models(&t, 5, B).unwrap();
        assert_eq!(models.len(), 6, "the empty set and five singletons");
    }

    #[test]
    fn free_predicate_models_count() {
        let t = free_pred().unwrap();
        assert_eq!(enumerate_models(&t, 3, B).unwrap().len(), 8);
        assert_eq!(enumerate_models(&t, 6, B).unwrap().len(), 64);
    }

    #[test]
    fn two_point_function_conditions() {
        let t = fn_2_2().unwrap();
        assert_eq!(enumerate_models(&t, 10, B).unwrap().len(), 4);
        let lit = |a: u64, b: u64| {
            Formula::Eq(
                crate::formula::Term::App("F".into(), vec![crate::formula::Term::Val(Hf::nat(a))]),
                crate::formula::Term::Val(Hf::nat(b)),
            )
        };
        // Half a function extends to a model.
        let p: BTreeSet<Formula> = [lit(0, 0)].into_iter().collect();
        assert!(in_p(&t, &p, 10, B).unwrap());
        // Two values on the same argument cannot.
        let bad: BTreeSet<Formula> = [lit(0, 0), lit(0, 1)].into_iter().collect();
        assert!(!in_p(&t, &bad, 10, B).unwrap());
        // Denying a universe element contradicts the pinned universe.
        let no_zero: BTreeSet<Formula> =
            [neg(&Formula::Rel("U".into(), vec![crate::formula::Term::Val(Hf::nat(0))]))]
                .into_iter()
                .collect();
        assert!(!in_p(&t, &no_zero, 10, B).unwrap());
    }

    #[test]
    fn contradictory_conditions_are_rejected_without_search() {
        let t = fn_2_2().unwrap();
        let cl = t.synth_cert(10).unwrap();
        let u0 = Formula::Rel("U".into(), vec![crate::formula::Term::Val(Hf::nat(0))]);
        let p: BTreeSet<Formula> = [u0.clone(), neg(&u0)].into_iter().collect();
        let out = find_certifying_fragment(&cl, &p, B).unwrap();
        assert!(out.witnesses.is_empty());
        assert!(out.exhausted);
        assert_eq!(out.nodes, 0);
    }

    #[test]
    fn subsets_of_the_truncation_split_by_cap() {
        let t = countercom_fixture(5).unwrap().materialized();
        // 3 order axioms + 4 chain demands; all 120 subsets of size <= 5.
        let at40 = finitely_consistent(&t, 5, 40, B).unwrap();
        assert_eq!(at40.len(), 120);
        assert!(at40.iter().all(|s| s.verdict.is_certified()));
        let at20 = finitely_consistent(&t, 5, 20, B).unwrap();
        for s in &at20 {
            // Index 6 is the five-point chain demand, out of reach below
            // cap 40; everything else has a model within cap 20.
            if s.indices.contains(&6) {
                assert!(s.verdict.is_unknown(), "{:?}", s.indices);
            } else {
                assert!(s.verdict.is_certified(), "{:?}", s.indices);
            }
        }
    }

    #[test]
    fn witnesses_verify_against_the_full_background_structure() {
        let t = fn_2_2().unwrap();
        let cl = t.synth_cert(10).unwrap();
        for sigma in enumerate_models(&t, 10, B).unwrap() {
            assert!(certifies(&cl, &sigma).unwrap());
        }
        // A flipped literal breaks certification.
        let mut broken = enumerate_models(&t, 10, B).unwrap().remove(0);
        let lit = broken.iter().find(|f| !matches!(f, Formula::Not(_))).unwrap().clone();
        broken.remove(&lit);
        broken.insert(neg(&lit));
        assert!(!certifies(&cl, &broken).unwrap());
    }
}
