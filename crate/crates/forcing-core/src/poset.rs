//! Order-theoretic toolkit for explicit finite posets (and preorders):
//! density, the `w` operator, separative quotients, atoms, canonical
//! generic filters, embedding checks, Cohen forcing, and the regular-open
//! Boolean completion.
//!
//! Elements are indexed `0..n` with `n ≤ 64`; subsets are bitmasks.
//! "Compatible" and "antichain" are meant in the forcing sense (common
//! lower bound, pairwise incompatibility).

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// A finite preorder (usually a partial order) on at most 64 elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinPoset {
    pub labels: Vec<String>,
    /// `leq[i]` holds bit `j` iff `i ≤ j`.
    leq: Vec<u64>,
}

/// A filter, as a bitmask of elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Filter(pub u64);

impl FinPoset {
    /// Builds from an explicit relation, validating reflexivity and
    /// transitivity (a preorder). Antisymmetry is not required here.
    pub fn from_leq(labels: Vec<String>, leq: Vec<u64>) -> Result<FinPoset> {
        let n = labels.len();
        if n > 64 {
            return Err(Error::CapExceeded("explicit posets are limited to 64 elements".into()));
        }
        if leq.len() != n {
            return Err(Error::Invalid("relation size does not match element count".into()));
        }
        let p = FinPoset { labels, leq };
        if !p.is_reflexive() || !p.is_transitive() {
            return Err(Error::Invalid("relation is not a preorder".into()));
        }
        Ok(p)
    }

    /// Builds a partial order from generating pairs `(i, j)` meaning
    /// `i ≤ j`: the reflexive-transitive closure is applied, then
    /// antisymmetry is validated.
    pub fn from_pairs(labels: Vec<String>, pairs: &[(usize, usize)]) -> Result<FinPoset> {
        let p = FinPoset::from_pairs_preorder(labels, pairs)?;
        if !p.is_antisymmetric() {
            return Err(Error::Invalid("relation closure violates antisymmetry".into()));
        }
        Ok(p)
    }

    /// As [`FinPoset::from_pairs`] without the antisymmetry requirement.
    pub fn from_pairs_preorder(labels: Vec<String>, pairs: &[(usize, usize)]) -> Result<FinPoset> {
        let n = labels.len();
        if n > 64 {
            return Err(Error::CapExceeded("explicit posets are limited to 64 elements".into()));
        }
        let mut leq = vec![0u64; n];
        for (i, row) in leq.iter_mut().enumerate() {
            *row |= 1 << i;
        }
        for &(i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::Invalid("pair index out of range".into()));
            }
            leq[i] |= 1 << j;
        }
        // Warshall closure.
        for k in 0..n {
            for i in 0..n {
                if leq[i] >> k & 1 == 1 {
                    leq[i] |= leq[k];
                }
            }
        }
        Ok(FinPoset { labels, leq })
    }

    /// An antichain (in the order sense: only reflexive pairs) on `n`
    /// elements labeled `p0, p1, …`.
    pub fn antichain(n: usize) -> FinPoset {
        let labels = (0..n).map(|i| format!("p{i}")).collect();
        FinPoset::from_pairs(labels, &[]).expect("antichain is a poset")
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn leq(&self, i: usize, j: usize) -> bool {
        self.leq[i] >> j & 1 == 1
    }

    fn full_mask(&self) -> u64 {
        if self.n() == 64 {
            u64::MAX
        } else {
            (1u64 << self.n()) - 1
        }
    }

    /// `{j : j ≤ i}` as a mask.
    pub fn below_mask(&self, i: usize) -> u64 {
        let mut m = 0;
        for j in 0..self.n() {
            if self.leq(j, i) {
                m |= 1 << j;
            }
        }
        m
    }

    /// `{j : i ≤ j}` as a mask.
    pub fn above_mask(&self, i: usize) -> u64 {
        self.leq[i]
    }

    pub fn compatible(&self, i: usize, j: usize) -> bool {
        self.below_mask(i) & self.below_mask(j) != 0
    }

    pub fn is_reflexive(&self) -> bool {
        (0..self.n()).all(|i| self.leq(i, i))
    }

    pub fn is_transitive(&self) -> bool {
        for i in 0..self.n() {
            for j in 0..self.n() {
                if !self.leq(i, j) {
                    continue;
                }
                for k in 0..self.n() {
                    if self.leq(j, k) && !self.leq(i, k) {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn is_antisymmetric(&self) -> bool {
        for i in 0..self.n() {
            for j in 0..self.n() {
                if i != j && self.leq(i, j) && self.leq(j, i) {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_partial_order(&self) -> bool {
        self.is_reflexive() && self.is_transitive() && self.is_antisymmetric()
    }

    /// Is `d` dense below `p`: does every `s ≤ p` bound some member of `d`?
    pub fn dense_below(&self, d: u64, p: usize) -> bool {
        let bp = self.below_mask(p);
        for s in bits(bp) {
            if self.below_mask(s) & d == 0 {
                return false;
            }
        }
        true
    }

    /// Is `d` dense: does every element bound some member of `d`?
    pub fn is_dense(&self, d: u64) -> bool {
        (0..self.n()).all(|p| self.below_mask(p) & d != 0)
    }

    /// The `w` operator: `(p, q)` is in the output relation iff the cone
    /// below `q` is dense below `p`. Idempotent; preserves preorders.
    pub fn w_order(&self) -> FinPoset {
        let n = self.n();
        let mut leq = vec![0u64; n];
        for p in 0..n {
            for q in 0..n {
                if self.dense_below(self.below_mask(q), p) {
                    leq[p] |= 1 << q;
                }
            }
        }
        FinPoset { labels: self.labels.clone(), leq }
    }

    pub fn is_separative(&self) -> bool {
        self.w_order() == *self
    }

    /// The separative quotient: `w` followed by collapsing mutual
    /// `w`-relatedness. Returns the quotient and the class index of each
    /// original element.
    pub fn sep_quotient(&self) -> (FinPoset, Vec<usize>) {
        let w = self.w_order();
        let n = self.n();
        let mut class = vec![usize::MAX; n];
        let mut reps: Vec<usize> = Vec::new();
        for i in 0..n {
            if class[i] != usize::MAX {
                continue;
            }
            let c = reps.len();
            class[i] = c;
            reps.push(i);
            for j in i + 1..n {
                if class[j] == usize::MAX && w.leq(i, j) && w.leq(j, i) {
                    class[j] = c;
                }
            }
        }
        let labels: Vec<String> = reps
            .iter()
            .enumerate()
            .map(|(c, _)| {
                let members: Vec<&str> = (0..n)
                    .filter(|&i| class[i] == c)
                    .map(|i| self.labels[i].as_str())
                    .collect();
                if members.len() == 1 {
                    members[0].to_string()
                } else {
                    format!("[{}]", members.join(" "))
                }
            })
            .collect();
        let mut leq = vec![0u64; reps.len()];
        for (c, &r) in reps.iter().enumerate() {
            for (d, &s) in reps.iter().enumerate() {
                if w.leq(r, s) {
                    leq[c] |= 1 << d;
                }
            }
        }
        (FinPoset { labels, leq }, class)
    }

    /// Elements all of whose lower bounds are pairwise compatible.
    pub fn atoms(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&p| {
                let below: Vec<usize> = bits(self.below_mask(p)).collect();
                below
                    .iter()
                    .all(|&q1| below.iter().all(|&q2| self.compatible(q1, q2)))
            })
            .collect()
    }

    /// The canonical filter of an atom: everything compatible with it.
    /// Refuses non-atoms, for which the set can fail to be a filter.
    pub fn g_p(&self, p: usize) -> Result<Filter> {
        if !self.atoms().contains(&p) {
            return Err(Error::Precondition(format!(
                "element `{}` is not an atom",
                self.labels[p]
            )));
        }
        let mut m = 0;
        for q in 0..self.n() {
            if self.compatible(p, q) {
                m |= 1 << q;
            }
        }
        Ok(Filter(m))
    }

    /// Upward closed and downward directed?
    pub fn is_filter(&self, g: u64) -> bool {
        if g == 0 {
            return false;
        }
        for p in bits(g) {
            if self.above_mask(p) & !g & self.full_mask() != 0 {
                return false;
            }
            for q in bits(g) {
                if self.below_mask(p) & self.below_mask(q) & g == 0 {
                    return false;
                }
            }
        }
        true
    }

    /// All dense subsets, by exhaustive enumeration. Exponential in the
    /// element count; guarded.
    pub fn dense_sets(&self) -> Result<Vec<u64>> {
        if self.n() > 16 {
            return Err(Error::CapExceeded(
                "dense-subset enumeration is limited to 16 elements".into(),
            ));
        }
        let full = self.full_mask();
        Ok((0..=full).filter(|&d| self.is_dense(d)).collect())
    }

    /// All filters meeting every dense subset, by exhaustive enumeration.
    pub fn generic_filters(&self) -> Result<Vec<Filter>> {
        let dense = self.dense_sets()?;
        let full = self.full_mask();
        let mut out = Vec::new();
        for g in 1..=full {
            if self.is_filter(g) && dense.iter().all(|&d| g & d != 0) {
                out.push(Filter(g));
            }
        }
        Ok(out)
    }

    /// Minimal elements: nothing strictly below.
    pub fn minimals(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&p| bits(self.below_mask(p)).all(|q| self.leq(p, q)))
            .collect()
    }

    /// Upward closure of a set.
    pub fn upward_closure(&self, x: u64) -> u64 {
        let mut m = 0;
        for p in bits(x) {
            m |= self.above_mask(p);
        }
        m | x
    }

    /// Isomorphism by permutation search; guarded to small sizes.
    pub fn isomorphic(&self, other: &FinPoset) -> Result<bool> {
        if self.n() != other.n() {
            return Ok(false);
        }
        if self.n() > 8 {
            return Err(Error::CapExceeded(
                "isomorphism search is limited to 8 elements".into(),
            ));
        }
        let n = self.n();
        let mut perm: Vec<usize> = (0..n).collect();
        Ok(permute_first(&mut perm, &mut |p| {
            (0..n).all(|i| (0..n).all(|j| self.leq(i, j) == other.leq(p[i], p[j])))
        }))
    }

    /// Canonical invariant of the unlabeled order type: the minimum
    /// relation-matrix encoding over all relabelings.
    pub fn canonical_code(&self) -> Result<Vec<u64>> {
        if self.n() > 8 {
            return Err(Error::CapExceeded(
                "canonicalization is limited to 8 elements".into(),
            ));
        }
        let n = self.n();
        let mut best: Option<Vec<u64>> = None;
        let mut perm: Vec<usize> = (0..n).collect();
        permute_first(&mut perm, &mut |p| {
            let mut code = vec![0u64; n];
            for i in 0..n {
                for j in 0..n {
                    if self.leq(p[i], p[j]) {
                        code[i] |= 1 << j;
                    }
                }
            }
            if best.as_ref().map_or(true, |b| code < *b) {
                best = Some(code);
            }
            false
        });
        Ok(best.expect("at least the identity permutation applies"))
    }
}

/// Iterates the set bits of a mask.
pub fn bits(mut m: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

/// Runs `f` on every permutation, stopping early on `true`.
fn permute_first(perm: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    fn rec(perm: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if k == perm.len() {
            return f(perm);
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            if rec(perm, k + 1, f) {
                perm.swap(k, i);
                return true;
            }
            perm.swap(k, i);
        }
        false
    }
    rec(perm, 0, f)
}

// ---------------------------------------------------------------------------
// Embeddings

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Plain,
    Complete,
    Dense,
    Weak,
    DenseWeak,
}

impl std::str::FromStr for EmbeddingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<EmbeddingKind> {
        Ok(match s {
            "plain" => EmbeddingKind::Plain,
            "complete" => EmbeddingKind::Complete,
            "dense" => EmbeddingKind::Dense,
            "weak" => EmbeddingKind::Weak,
            "dense-weak" => EmbeddingKind::DenseWeak,
            other => return Err(Error::Invalid(format!("unknown embedding kind `{other}`"))),
        })
    }
}

/// Does `map` (element index in `p` → element index in `q`) satisfy the
/// requested embedding notion? Weak variants are checked against the
/// `w`-orders of both sides.
pub fn check_embedding(
    map: &[usize],
    p: &FinPoset,
    q: &FinPoset,
    kind: EmbeddingKind,
) -> Result<bool> {
    if map.len() != p.n() || map.iter().any(|&j| j >= q.n()) {
        return Err(Error::Invalid("map does not go from P into Q".into()));
    }
    match kind {
        EmbeddingKind::Plain => Ok(is_embedding(map, p, q)),
        EmbeddingKind::Dense => Ok(is_embedding(map, p, q) && range_dense(map, q)),
        EmbeddingKind::Complete => Ok(is_embedding(map, p, q) && antichains_transfer(map, p, q)?),
        EmbeddingKind::Weak => check_embedding(map, &p.w_order(), &q.w_order(), EmbeddingKind::Plain),
        EmbeddingKind::DenseWeak => {
            check_embedding(map, &p.w_order(), &q.w_order(), EmbeddingKind::Dense)
        }
    }
}

fn is_embedding(map: &[usize], p: &FinPoset, q: &FinPoset) -> bool {
    // Injectivity.
    let distinct: BTreeSet<usize> = map.iter().copied().collect();
    if distinct.len() != map.len() {
        return false;
    }
    for i in 0..p.n() {
        for j in 0..p.n() {
            if p.leq(i, j) != q.leq(map[i], map[j]) {
                return false;
            }
            if !p.compatible(i, j) && q.compatible(map[i], map[j]) {
                return false;
            }
        }
    }
    true
}

fn range_dense(map: &[usize], q: &FinPoset) -> bool {
    let ran: u64 = map.iter().fold(0, |m, &j| m | 1 << j);
    (0..q.n()).all(|y| q.below_mask(y) & ran != 0)
}

fn antichains_transfer(map: &[usize], p: &FinPoset, q: &FinPoset) -> Result<bool> {
    if p.n() > 16 {
        return Err(Error::CapExceeded(
            "maximal-antichain enumeration is limited to 16 elements".into(),
        ));
    }
    let full = if p.n() == 64 { u64::MAX } else { (1u64 << p.n()) - 1 };
    for a in 1..=full {
        if !is_maximal_antichain(p, a) {
            continue;
        }
        let image: Vec<usize> = bits(a).map(|i| map[i]).collect();
        // Pairwise incompatible in Q…
        for (ix, &x) in image.iter().enumerate() {
            for &y in &image[ix + 1..] {
                if q.compatible(x, y) {
                    return Ok(false);
                }
            }
        }
        // …and maximal: everything in Q is compatible with some image point.
        for y in 0..q.n() {
            if !image.iter().any(|&x| q.compatible(x, y)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn is_maximal_antichain(p: &FinPoset, a: u64) -> bool {
    let members: Vec<usize> = bits(a).collect();
    for (ix, &x) in members.iter().enumerate() {
        for &y in &members[ix + 1..] {
            if p.compatible(x, y) {
                return false;
            }
        }
    }
    (0..p.n()).all(|y| members.iter().any(|&x| p.compatible(x, y)))
}

// ---------------------------------------------------------------------------
// Cohen forcing

/// Finite binary strings of length at most `depth`, ordered by reverse
/// extension (longer strings are stronger). Element count `2^(depth+1) − 1`.
pub fn cohen(depth: u32) -> Result<FinPoset> {
    if depth > 5 {
        return Err(Error::CapExceeded(
            "Cohen truncations are limited to depth 5 (63 conditions)".into(),
        ));
    }
    let mut labels = vec!["e".to_string()];
    let mut strings = vec![String::new()];
    for len in 1..=depth {
        for bitsv in 0..(1u32 << len) {
            let s: String = (0..len)
                .rev()
                .map(|k| if bitsv >> k & 1 == 1 { '1' } else { '0' })
                .collect();
            labels.push(s.clone());
            strings.push(s);
        }
    }
    let n = strings.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if strings[i].starts_with(strings[j].as_str()) {
                pairs.push((i, j));
            }
        }
    }
    FinPoset::from_pairs(labels, &pairs)
}

// ---------------------------------------------------------------------------
// Catalogue of order types

/// All partial orders on `n ≤ 5` elements, one representative per
/// isomorphism type. Counts: 1, 1, 2, 5, 16, 63 for n = 0…5.
pub fn catalogue(n: usize) -> Result<Vec<FinPoset>> {
    if n > 5 {
        return Err(Error::CapExceeded("order-type catalogue is limited to 5 elements".into()));
    }
    if n == 0 {
        return Ok(vec![FinPoset { labels: vec![], leq: vec![] }]);
    }
    let offdiag: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0..(1u64 << offdiag.len()) {
        let mut leq = vec![0u64; n];
        for (i, row) in leq.iter_mut().enumerate() {
            *row |= 1 << i;
        }
        for (b, &(i, j)) in offdiag.iter().enumerate() {
            if mask >> b & 1 == 1 {
                leq[i] |= 1 << j;
            }
        }
        let cand = FinPoset {
            labels: (0..n).map(|i| format!("p{i}")).collect(),
            leq,
        };
        if !cand.is_transitive() || !cand.is_antisymmetric() {
            continue;
        }
        let code = cand.canonical_code()?;
        if seen.insert(code) {
            out.push(cand);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Regular-open Boolean completion

/// The regular-open algebra of a finite separative poset, with the
/// cone embedding. Finite Boolean algebras are powerset algebras, so the
/// element count is a power of two.
#[derive(Debug, Clone)]
pub struct RoAlgebra {
    /// All regular open sets (downward closed `u` with
    /// `u = {p : u is dense below p}`), including the empty set, ordered
    /// by the subset relation. Sorted ascending as masks.
    pub sets: Vec<u64>,
    /// For each poset element `p`, the index in `sets` of the
    /// regularization of its cone.
    pub embed: Vec<usize>,
}

impl RoAlgebra {
    /// The partial order of nonzero algebra elements under inclusion.
    pub fn plus_poset(&self) -> FinPoset {
        let nz: Vec<u64> = self.sets.iter().copied().filter(|&u| u != 0).collect();
        let labels: Vec<String> = nz.iter().map(|u| format!("b{u:x}")).collect();
        let mut leq = vec![0u64; nz.len()];
        for (i, &u) in nz.iter().enumerate() {
            for (j, &v) in nz.iter().enumerate() {
                if u & !v == 0 {
                    leq[i] |= 1 << j;
                }
            }
        }
        FinPoset { labels, leq }
    }

    /// Atoms of the algebra: minimal nonzero elements.
    pub fn atom_count(&self) -> usize {
        let nz: Vec<u64> = self.sets.iter().copied().filter(|&u| u != 0).collect();
        nz.iter().filter(|&&u| nz.iter().all(|&v| v == u || v & !u != 0)).count()
    }

    /// The dense embedding of the source poset into the nonzero part.
    pub fn embedding_into_plus(&self) -> Vec<usize> {
        let nz: Vec<u64> = self.sets.iter().copied().filter(|&u| u != 0).collect();
        self.embed
            .iter()
            .map(|&ix| {
                let target = self.sets[ix];
                nz.iter().position(|&u| u == target).expect("cone regularization is nonzero")
            })
            .collect()
    }
}

/// Regularization: `{p : u is dense below p}` for downward closed `u`.
fn regularize(p: &FinPoset, u: u64) -> u64 {
    let mut m = 0;
    for x in 0..p.n() {
        if p.dense_below(u, x) {
            m |= 1 << x;
        }
    }
    m
}

/// Builds the regular-open algebra of a separative finite poset.
pub fn ro_algebra(p: &FinPoset) -> Result<RoAlgebra> {
    if !p.is_separative() {
        return Err(Error::Precondition(
            "Boolean completion requires a separative input".into(),
        ));
    }
    if p.n() > 16 {
        return Err(Error::CapExceeded(
            "regular-open enumeration is limited to 16 elements".into(),
        ));
    }
    let full = if p.n() == 64 { u64::MAX } else { (1u64 << p.n()) - 1 };
    let mut sets = Vec::new();
    'outer: for u in 0..=full {
        // Downward closed…
        for x in bits(u) {
            if p.below_mask(x) & !u != 0 {
                continue 'outer;
            }
        }
        // …and regular.
        if regularize(p, u) == u {
            sets.push(u);
        }
    }
    let embed = (0..p.n())
        .map(|x| {
            let cone = p.below_mask(x);
            let reg = regularize(p, cone);
            sets.iter().position(|&u| u == reg).expect("regularization is regular open")
        })
        .collect();
    Ok(RoAlgebra { sets, embed })
}

/// Brute-force uniqueness of the completion for tiny posets: every powerset
/// algebra admitting a dense embedding from `p` has exactly as many atoms
/// as the regular-open algebra. (Finite Boolean algebras are powerset
/// algebras, so atom count determines the isomorphism type.)
pub fn completion_unique_for(p: &FinPoset) -> Result<bool> {
    if p.n() > 4 {
        return Err(Error::CapExceeded(
            "completion uniqueness search is limited to 4 elements".into(),
        ));
    }
    let ro = ro_algebra(p)?;
    let expected_atoms = (ro.sets.len() as f64).log2().round() as usize;
    for k in 1..=2 * p.n().max(1) {
        if powerset_plus_has_dense_embedding(p, k)? && k != expected_atoms {
            return Ok(false);
        }
    }
    // The expected algebra itself must admit one.
    if !powerset_plus_has_dense_embedding(p, expected_atoms)? {
        return Ok(false);
    }
    Ok(true)
}

/// Is there a dense embedding from `p` into the nonzero part of the
/// powerset algebra on `k` atoms?
fn powerset_plus_has_dense_embedding(p: &FinPoset, k: usize) -> Result<bool> {
    if k > 6 {
        return Ok(false);
    }
    let nz: Vec<u64> = (1..(1u64 << k)).collect();
    let labels: Vec<String> = nz.iter().map(|u| format!("s{u:x}")).collect();
    let mut leq = vec![0u64; nz.len()];
    for (i, &u) in nz.iter().enumerate() {
        for (j, &v) in nz.iter().enumerate() {
            if u & !v == 0 {
                leq[i] |= 1 << j;
            }
        }
    }
    let q = FinPoset { labels, leq };
    // Depth-first search over injective maps.
    fn rec(map: &mut Vec<usize>, p: &FinPoset, q: &FinPoset) -> Result<bool> {
        if map.len() == p.n() {
            return check_embedding(map, p, q, EmbeddingKind::Dense);
        }
        for y in 0..q.n() {
            if map.contains(&y) {
                continue;
            }
            map.push(y);
            // Prune: order agreement on the prefix.
            let i = map.len() - 1;
            let ok = (0..=i).all(|a| {
                p.leq(a, i) == q.leq(map[a], map[i]) && p.leq(i, a) == q.leq(map[i], map[a])
            });
            if ok && rec(map, p, q)? {
                return Ok(true);
            }
            map.pop();
        }
        Ok(false)
    }
    rec(&mut Vec::new(), p, &q)
}

// ---------------------------------------------------------------------------

impl std::fmt::Display for FinPoset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "ELEMENTS: {}", self.labels.join(" "))?;
        write!(f, "LEQ:")?;
        for i in 0..self.n() {
            for j in 0..self.n() {
                if i != j && self.leq(i, j) {
                    write!(f, " ({},{})", self.labels[i], self.labels[j])?;
                }
            }
        }
        Ok(())
    }
}

/// Renders a filter against its poset's labels.
pub fn filter_labels(p: &FinPoset, g: Filter) -> Vec<String> {
    bits(g.0).map(|i| p.labels[i].clone()).collect()
}

/// Parses the poset file format: an `ELEMENTS:` line of whitespace-separated
/// labels, then a `LEQ:` section of `(a,b)` pairs meaning `a ≤ b`.
/// Reflexive-transitive closure is applied; antisymmetry is validated.
pub fn parse_poset(text: &str) -> Result<FinPoset> {
    let mut labels: Vec<String> = Vec::new();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut in_leq = false;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("ELEMENTS:") {
            for tok in rest.split_whitespace() {
                index.insert(tok.to_string(), labels.len());
                labels.push(tok.to_string());
            }
            in_leq = false;
            continue;
        }
        if let Some(rest) = line.strip_prefix("LEQ:") {
            in_leq = true;
            parse_leq_pairs(rest, &index, &mut pairs)?;
            continue;
        }
        if in_leq {
            parse_leq_pairs(line, &index, &mut pairs)?;
            continue;
        }
        return Err(Error::Invalid(format!("unrecognized poset line `{line}`")));
    }
    FinPoset::from_pairs(labels, &pairs)
}

fn parse_leq_pairs(
    text: &str,
    index: &BTreeMap<String, usize>,
    pairs: &mut Vec<(usize, usize)>,
) -> Result<()> {
    for tok in text.split_whitespace() {
        let inner = tok
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| Error::Invalid(format!("malformed pair `{tok}`")))?;
        let mut parts = inner.split(',');
        let a = parts.next().unwrap_or("");
        let b = parts.next().unwrap_or("");
        if parts.next().is_some() {
            return Err(Error::Invalid(format!("malformed pair `{tok}`")));
        }
        let ia = *index
            .get(a)
            .ok_or_else(|| Error::Invalid(format!("unknown element `{a}`")))?;
        let ib = *index
            .get(b)
            .ok_or_else(|| Error::Invalid(format!("unknown element `{b}`")))?;
        pairs.push((ia, ib));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vee() -> FinPoset {
        // c below both a and b.
        FinPoset::from_pairs(
            vec!["a".into(), "b".into(), "c".into()],
            &[(2, 0), (2, 1)],
        )
        .unwrap()
    }

    #[test]
    fn w_on_antichain_is_identity() {
        let p = FinPoset::antichain(3);
        assert_eq!(p.w_order(), p);
        assert!(p.is_separative());
    }

    #[test]
    fn w_merges_vee_tops() {
        let p = vee();
        let w = p.w_order();
        // a and b become mutually related: each cone is dense below the other
        // through c.
        assert!(w.leq(0, 1) && w.leq(1, 0));
        // Idempotence.
        assert_eq!(w.w_order(), w);
        // c is a minimum, so the whole order is in fact one equivalence
        // class: an order with a least element is forcing-trivial.
        let (q, class) = p.sep_quotient();
        assert_eq!(q.n(), 1);
        assert_eq!(class, vec![0, 0, 0]);
        assert!(q.is_partial_order());
        assert!(q.is_separative());
    }

    #[test]
    fn two_chain_plus_point_has_two_classes() {
        // A two-chain collapses (its component has a least element) while an
        // isolated third point stays separate.
        let p = FinPoset::from_pairs(
            vec!["a".into(), "b".into(), "x".into()],
            &[(0, 1)],
        )
        .unwrap();
        let (q, class) = p.sep_quotient();
        assert_eq!(q.n(), 2);
        assert_eq!(class[0], class[1]);
        assert_ne!(class[0], class[2]);
        assert!(q.is_separative());
    }

    #[test]
    fn upward_vee_is_separative() {
        // Two incompatible elements under a common weaker one.
        let p = FinPoset::from_pairs(
            vec!["a".into(), "b".into(), "top".into()],
            &[(0, 2), (1, 2)],
        )
        .unwrap();
        assert!(p.is_separative());
        let (q, _) = p.sep_quotient();
        assert!(q.isomorphic(&p).unwrap());
    }

    #[test]
    fn chains_collapse_to_a_point() {
        let p = FinPoset::from_pairs(
            vec!["x".into(), "y".into(), "z".into()],
            &[(0, 1), (1, 2)],
        )
        .unwrap();
        assert!(!p.is_separative());
        let (q, _) = p.sep_quotient();
        assert_eq!(q.n(), 1);
    }

    #[test]
    fn w_idempotent_and_preorder_on_catalogue() {
        for n in 0..=4 {
            for p in catalogue(n).unwrap() {
                let w = p.w_order();
                assert!(w.is_reflexive() && w.is_transitive(), "w not a preorder: {p}");
                assert_eq!(w.w_order(), w, "w not idempotent on {p}");
            }
        }
    }

    #[test]
    fn catalogue_counts() {
        let counts: Vec<usize> = (0..=4).map(|n| catalogue(n).unwrap().len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 5, 16]);
    }

    #[test]
    fn atoms_and_g_p() {
        let p = vee();
        assert_eq!(p.atoms(), vec![0, 1, 2]); // all: every pair below each is compatible via c
        let g = p.g_p(2).unwrap();
        assert_eq!(g.0, 0b111);

        let two = FinPoset::antichain(2);
        assert_eq!(two.atoms(), vec![0, 1]);
        assert_eq!(two.g_p(0).unwrap().0, 0b01);

        let one = FinPoset::antichain(1);
        assert_eq!(one.g_p(0).unwrap().0, 0b1);

        // Non-atom refused: the root of a depth-1 Cohen tree.
        let c = cohen(1).unwrap();
        assert!(!c.atoms().contains(&0));
        assert!(c.g_p(0).is_err());
    }

    #[test]
    fn minimal_elements_are_atoms() {
        for n in 1..=4 {
            for p in catalogue(n).unwrap() {
                let atoms = p.atoms();
                for m in p.minimals() {
                    assert!(atoms.contains(&m), "minimal {m} not an atom in {p}");
                }
            }
        }
    }

    #[test]
    fn generic_filters_examples() {
        let one = FinPoset::antichain(1);
        assert_eq!(one.generic_filters().unwrap(), vec![Filter(0b1)]);

        let two = FinPoset::antichain(2);
        assert_eq!(two.generic_filters().unwrap(), vec![Filter(0b01), Filter(0b10)]);
    }

    #[test]
    fn generic_filters_come_from_atoms() {
        for n in 1..=4 {
            for p in catalogue(n).unwrap() {
                let atoms = p.atoms();
                for g in p.generic_filters().unwrap() {
                    let has = bits(g.0).any(|q| atoms.contains(&q));
                    assert!(has, "generic filter without atom in {p}");
                    // And equals g_p for one of its atoms.
                    let eq = bits(g.0)
                        .filter(|q| atoms.contains(q))
                        .any(|q| p.g_p(q).unwrap() == g);
                    assert!(eq, "generic filter is no g_p in {p}");
                }
                // Lemma: every atom's g_p is a generic filter.
                for a in atoms {
                    let g = p.g_p(a).unwrap();
                    assert!(p.is_filter(g.0));
                    for d in p.dense_sets().unwrap() {
                        assert!(g.0 & d != 0);
                    }
                }
            }
        }
    }

    #[test]
    fn embedding_checks() {
        let p = vee();
        let id = vec![0, 1, 2];
        assert!(check_embedding(&id, &p, &p, EmbeddingKind::Plain).unwrap());
        assert!(check_embedding(&id, &p, &p, EmbeddingKind::Complete).unwrap());
        assert!(check_embedding(&id, &p, &p, EmbeddingKind::Dense).unwrap());
        assert!(check_embedding(&id, &p, &p, EmbeddingKind::DenseWeak).unwrap());

        // Order-reversing map on a 2-chain.
        let chain = FinPoset::from_pairs(vec!["x".into(), "y".into()], &[(0, 1)]).unwrap();
        assert!(!check_embedding(&[1, 0], &chain, &chain, EmbeddingKind::Plain).unwrap());

        // Inclusion of a maximal antichain of the vee is dense in w terms:
        // {c} alone is dense in vee.
        let single = FinPoset::antichain(1);
        assert!(check_embedding(&[2], &single, &p, EmbeddingKind::Dense).unwrap());
    }

    #[test]
    fn cohen_counts_and_shape() {
        assert_eq!(cohen(0).unwrap().n(), 1);
        let c1 = cohen(1).unwrap();
        assert_eq!(c1.n(), 3);
        // Root above two leaves.
        assert!(c1.leq(1, 0) && c1.leq(2, 0));
        assert!(!c1.compatible(1, 2));
        for d in 0..=4 {
            assert_eq!(cohen(d).unwrap().n(), (1 << (d + 1)) - 1);
        }
        // Truncation atoms are exactly the leaves.
        let c2 = cohen(2).unwrap();
        let atoms = c2.atoms();
        assert_eq!(atoms.len(), 4);
        for a in atoms {
            assert_eq!(c2.labels[a].len(), 2);
        }
    }

    #[test]
    fn ro_algebra_is_boolean_and_dense() {
        for n in 1..=4 {
            for p in catalogue(n).unwrap() {
                if !p.is_separative() {
                    continue;
                }
                let ro = ro_algebra(&p).unwrap();
                assert!(ro.sets.len().is_power_of_two(), "non-Boolean size on {p}");
                let plus = ro.plus_poset();
                let emb = ro.embedding_into_plus();
                assert!(
                    check_embedding(&emb, &p, &plus, EmbeddingKind::Dense).unwrap(),
                    "cone embedding not dense for {p}"
                );
            }
        }
    }

    #[test]
    fn completions_unique_small() {
        for n in 1..=3 {
            for p in catalogue(n).unwrap() {
                if p.is_separative() {
                    assert!(completion_unique_for(&p).unwrap(), "non-unique completion: {p}");
                }
            }
        }
    }

    #[test]
    fn poset_file_round_trip() {
        let p = vee();
        let text = p.to_string();
        let q = parse_poset(&text).unwrap();
        assert_eq!(p, q);
        // Closure is applied on load.
        let r = parse_poset("ELEMENTS: x y z\nLEQ: (x,y) (y,z)").unwrap();
        assert!(r.leq(0, 2));
        // Antisymmetry violations are rejected.
        assert!(parse_poset("ELEMENTS: x y\nLEQ: (x,y) (y,x)").is_err());
    }
}
