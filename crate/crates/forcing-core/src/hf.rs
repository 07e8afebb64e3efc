//! Hereditarily finite sets with Ackermann coding.
//!
//! A set is stored either as a machine integer (for the von Neumann
//! naturals, whose literal element trees grow exponentially) or as its
//! list of elements in strictly descending canonical order. The canonical
//! order is the Ackermann numbering `N(x) = sum over y in x of 2^N(y)`;
//! comparing descending element lists lexicographically agrees with it, so
//! comparisons never materialize codes.
//!
//! Canonical-form invariant: a `Set` representation is never a von Neumann
//! natural (those collapse to `Nat` on construction), so the two variants
//! never denote the same set.

use serde::de::{Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};

#[derive(Clone)]
enum Repr {
    /// The von Neumann natural `n = {0, ..., n-1}`.
    Nat(u64),
    /// Strictly descending in canonical order, duplicate-free, and not of
    /// von Neumann shape.
    Set(Vec<Hf>),
}

/// A hereditarily finite set.
#[derive(Clone)]
pub struct Hf(Repr);

impl Hf {
    /// The empty set.
    pub fn empty() -> Hf {
        Hf(Repr::Nat(0))
    }

    /// Builds a set from arbitrary elements (sorted, deduplicated, and
    /// collapsed to the integer representation when of natural shape).
    pub fn set(mut elems: Vec<Hf>) -> Hf {
        elems.sort_by(|a, b| b.cmp(a));
        elems.dedup();
        let n = elems.len();
        let is_nat = elems
            .iter()
            .enumerate()
            .all(|(i, e)| matches!(e.0, Repr::Nat(k) if k as usize == n - 1 - i));
        if is_nat {
            Hf(Repr::Nat(n as u64))
        } else {
            Hf(Repr::Set(elems))
        }
    }

    /// Elements in descending canonical order.
    pub fn elements_desc(&self) -> Vec<Hf> {
        match &self.0 {
            Repr::Nat(n) => (0..*n).rev().map(Hf::nat).collect(),
            Repr::Set(v) => v.clone(),
        }
    }

    /// Elements in ascending canonical order.
    pub fn elements(&self) -> Vec<Hf> {
        match &self.0 {
            Repr::Nat(n) => (0..*n).map(Hf::nat).collect(),
            Repr::Set(v) => {
                let mut v = v.clone();
                v.reverse();
                v
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self.0, Repr::Nat(0))
    }

    pub fn len(&self) -> usize {
        match &self.0 {
            Repr::Nat(n) => *n as usize,
            Repr::Set(v) => v.len(),
        }
    }

    pub fn contains(&self, x: &Hf) -> bool {
        match &self.0 {
            Repr::Nat(n) => matches!(x.0, Repr::Nat(m) if m < *n),
            Repr::Set(v) => v.binary_search_by(|e| x.cmp(e)).is_ok(),
        }
    }

    /// Inserts an element, preserving canonical form.
    pub fn insert(&mut self, x: Hf) {
        if self.contains(&x) {
            return;
        }
        let mut v = self.elements_desc();
        match v.binary_search_by(|e| x.cmp(e)) {
            Err(pos) => v.insert(pos, x),
            Ok(_) => {}
        }
        *self = Hf::set(v);
    }

    /// Von Neumann natural: n = {0, 1, ..., n-1}. Constant-time.
    pub fn nat(n: u64) -> Hf {
        Hf(Repr::Nat(n))
    }

    /// If this set is a von Neumann natural, returns its value.
    /// Constant-time thanks to the canonical form.
    pub fn as_nat(&self) -> Option<u64> {
        match self.0 {
            Repr::Nat(n) => Some(n),
            Repr::Set(_) => None,
        }
    }

    /// Kuratowski ordered pair {{a}, {a, b}}.
    pub fn pair(a: Hf, b: Hf) -> Hf {
        let singleton = Hf::set(vec![a.clone()]);
        let doubleton = Hf::set(vec![a, b]);
        Hf::set(vec![singleton, doubleton])
    }

    /// Splits a Kuratowski pair back into its components. No von Neumann
    /// natural is a Kuratowski pair: a pair has at most two elements, at
    /// least one a singleton `{a}`, and the only natural singleton is
    /// `1 = {0}`, which would force the other element to be the empty set
    /// containing `0`.
    pub fn unpair(&self) -> Option<(Hf, Hf)> {
        let v = match &self.0 {
            Repr::Nat(_) => return None,
            Repr::Set(v) => v,
        };
        match v.len() {
            1 => {
                // {{a}} encodes the pair (a, a).
                let inner = &v[0];
                if inner.len() == 1 {
                    let a = inner.elements_desc().pop().unwrap();
                    Some((a.clone(), a))
                } else {
                    None
                }
            }
            2 => {
                let (x, y) = (&v[0], &v[1]);
                // One element must be {a}, the other {a, b}.
                let (single, double) = if x.len() == 1 && y.len() == 2 {
                    (x, y)
                } else if y.len() == 1 && x.len() == 2 {
                    (y, x)
                } else {
                    return None;
                };
                let a = single.elements_desc().pop().unwrap();
                if !double.contains(&a) {
                    return None;
                }
                let b = double.elements_desc().into_iter().find(|e| *e != a)?;
                Some((a, b))
            }
            _ => None,
        }
    }

    /// Left-nested tuple; the 1-tuple of x is x itself.
    pub fn tuple(xs: &[Hf]) -> Hf {
        assert!(!xs.is_empty(), "tuples have positive length");
        let mut acc = xs[0].clone();
        for x in &xs[1..] {
            acc = Hf::pair(acc, x.clone());
        }
        acc
    }

    /// Splits a left-nested tuple of the given positive length.
    pub fn untuple(&self, len: usize) -> Option<Vec<Hf>> {
        assert!(len > 0);
        let mut parts = Vec::with_capacity(len);
        let mut cur = self.clone();
        for _ in 0..len - 1 {
            let (a, b) = cur.unpair()?;
            parts.push(b);
            cur = a;
        }
        parts.push(cur);
        parts.reverse();
        Some(parts)
    }

    /// Set-theoretic rank: 0 for the empty set, else 1 + max element rank.
    pub fn rank(&self) -> u32 {
        match &self.0 {
            Repr::Nat(n) => *n as u32,
            Repr::Set(v) => v.iter().map(|e| e.rank() + 1).max().unwrap_or(0),
        }
    }

    /// Transitive closure (elements, their elements, and so on),
    /// ascending.
    pub fn trcl(&self) -> Vec<Hf> {
        let mut out: std::collections::BTreeSet<Hf> = std::collections::BTreeSet::new();
        let mut stack: Vec<Hf> = self.elements();
        while let Some(x) = stack.pop() {
            if out.insert(x.clone()) {
                stack.extend(x.elements());
            }
        }
        out.into_iter().collect()
    }
}

impl Ord for Hf {
    fn cmp(&self, other: &Hf) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Nat(a), Repr::Nat(b)) => a.cmp(b),
            _ => {
                // Lexicographic comparison of descending element lists,
                // which agrees with the Ackermann numbering. Elements of a
                // `Nat` are synthesized on the fly without allocation.
                let (la, lb) = (self.len(), other.len());
                for i in 0..la.min(lb) {
                    let o = match (&self.0, &other.0) {
                        (Repr::Set(va), Repr::Set(vb)) => va[i].cmp(&vb[i]),
                        (Repr::Nat(n), Repr::Set(vb)) => {
                            Hf::nat(n - 1 - i as u64).cmp(&vb[i])
                        }
                        (Repr::Set(va), Repr::Nat(m)) => {
                            va[i].cmp(&Hf::nat(m - 1 - i as u64))
                        }
                        (Repr::Nat(_), Repr::Nat(_)) => unreachable!(),
                    };
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                la.cmp(&lb)
            }
        }
    }
}

impl PartialOrd for Hf {
    fn partial_cmp(&self, other: &Hf) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Hf {
    fn eq(&self, other: &Hf) -> bool {
        match (&self.0, &other.0) {
            (Repr::Nat(a), Repr::Nat(b)) => a == b,
            (Repr::Set(a), Repr::Set(b)) => a == b,
            // Canonical form: a Set never denotes a natural.
            _ => false,
        }
    }
}

impl Eq for Hf {}

impl Hash for Hf {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Nat(n) => {
                state.write_u8(0);
                state.write_u64(*n);
            }
            Repr::Set(v) => {
                state.write_u8(1);
                for e in v {
                    e.hash(state);
                }
            }
        }
    }
}

impl Serialize for Hf {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let elems = self.elements();
        let mut seq = serializer.serialize_seq(Some(elems.len()))?;
        for e in &elems {
            seq.serialize_element(e)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Hf {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Hf, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Hf;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a sequence of hereditarily finite sets")
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Hf, A::Error> {
                let mut elems = Vec::new();
                while let Some(e) = seq.next_element::<Hf>()? {
                    elems.push(e);
                }
                Ok(Hf::set(elems))
            }
        }
        deserializer.deserialize_seq(V)
    }
}

/// Ackermann code `N(x)` as a machine word.
///
/// Errors when the code does not fit in a `u64` (every set of rank < 5
/// fits: the codes are below 2^16).
pub fn encode_hf(h: &Hf) -> Result<u64> {
    match &h.0 {
        Repr::Nat(n) => {
            // N(k+1) = N(k) + 2^N(k).
            let mut c: u64 = 0;
            for _ in 0..*n {
                if c >= 64 {
                    return Err(Error::HfOverflow);
                }
                c = c.checked_add(1u64 << c).ok_or(Error::HfOverflow)?;
            }
            Ok(c)
        }
        Repr::Set(v) => {
            let mut acc: u64 = 0;
            for e in v {
                let c = encode_hf(e)?;
                if c >= 64 {
                    return Err(Error::HfOverflow);
                }
                let bit = 1u64 << c;
                acc = acc.checked_add(bit).ok_or(Error::HfOverflow)?;
            }
            Ok(acc)
        }
    }
}

/// Inverse of [`encode_hf`]: the set whose Ackermann code is `n`.
pub fn decode_hf(n: u64) -> Hf {
    let mut elems = Vec::new();
    for i in (0..64).rev() {
        if n & (1u64 << i) != 0 {
            elems.push(decode_hf(i));
        }
    }
    Hf::set(elems)
}

/// All sets of rank < `k`, ascending in canonical order.
///
/// rank < 1 gives just the empty set; rank < 3 gives four sets.
pub fn hf_universe(k: u32) -> Vec<Hf> {
    let mut level: Vec<Hf> = vec![Hf::empty()];
    for _ in 1..k {
        // Next level: all subsets of the current level's elements.
        let n = level.len();
        let mut next = Vec::with_capacity(1 << n);
        for mask in 0u64..(1u64 << n) {
            let elems: Vec<Hf> = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| level[i].clone())
                .collect();
            next.push(Hf::set(elems));
        }
        next.sort();
        next.dedup();
        level = next;
    }
    if k == 0 {
        return Vec::new();
    }
    level.sort();
    level
}

impl fmt::Display for Hf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Compact numeric form when the code is small, braces otherwise.
        if let Ok(code) = encode_hf(self) {
            if code <= 0xFFFF {
                return write!(f, "#{code}");
            }
        }
        if let Repr::Nat(n) = self.0 {
            // Large naturals print as plain numbers rather than as the
            // (huge) brace expansion.
            return write!(f, "n{n}");
        }
        write!(f, "{{")?;
        for (i, e) in self.elements().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Hf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_small_codes() {
        assert_eq!(encode_hf(&Hf::empty()).unwrap(), 0);
        assert_eq!(encode_hf(&Hf::set(vec![Hf::empty()])).unwrap(), 1);
        let two = Hf::set(vec![Hf::empty(), Hf::set(vec![Hf::empty()])]);
        assert_eq!(encode_hf(&two).unwrap(), 3);
        assert_eq!(encode_hf(&Hf::nat(3)).unwrap(), 11);
    }

    #[test]
    fn round_trip_rank_4() {
        for h in hf_universe(4) {
            let code = encode_hf(&h).unwrap();
            assert_eq!(decode_hf(code), h);
        }
    }

    #[test]
    fn order_matches_codes() {
        let us = hf_universe(4);
        for a in &us {
            for b in &us {
                let by_code = encode_hf(a).unwrap().cmp(&encode_hf(b).unwrap());
                assert_eq!(a.cmp(b), by_code, "order mismatch on {a} vs {b}");
            }
        }
    }

    #[test]
    fn universe_sizes() {
        assert_eq!(hf_universe(1).len(), 1);
        assert_eq!(hf_universe(2).len(), 2);
        assert_eq!(hf_universe(3).len(), 4);
        assert_eq!(hf_universe(4).len(), 16);
    }

    #[test]
    fn pair_and_tuple_round_trip() {
        let a = Hf::nat(2);
        let b = Hf::nat(5);
        let p = Hf::pair(a.clone(), b.clone());
        assert_eq!(p.unpair(), Some((a.clone(), b.clone())));
        let same = Hf::pair(a.clone(), a.clone());
        assert_eq!(same.unpair(), Some((a.clone(), a.clone())));

        let t = Hf::tuple(&[a.clone(), b.clone(), Hf::nat(1)]);
        assert_eq!(t.untuple(3), Some(vec![a.clone(), b.clone(), Hf::nat(1)]));
        assert_eq!(Hf::tuple(&[b.clone()]), b);
    }

    #[test]
    fn nats_and_rank() {
        assert_eq!(Hf::nat(0), Hf::empty());
        assert_eq!(Hf::nat(4).as_nat(), Some(4));
        assert_eq!(Hf::pair(Hf::nat(1), Hf::nat(0)).as_nat(), None);
        assert_eq!(Hf::nat(3).rank(), 3);
        assert_eq!(Hf::empty().rank(), 0);
    }

    #[test]
    fn large_naturals_are_cheap_and_canonical() {
        // Constant-size construction, canonical collapse of the explicit
        // element list, and cheap pairing at positions the window fixtures
        // use.
        let n = Hf::nat(4000);
        assert_eq!(n.as_nat(), Some(4000));
        assert_eq!(n.len(), 4000);
        let rebuilt = Hf::set((0..40).map(Hf::nat).collect());
        assert_eq!(rebuilt, Hf::nat(40));
        assert_eq!(rebuilt.as_nat(), Some(40));
        let p = Hf::pair(Hf::nat(36), Hf::nat(37));
        assert_eq!(p.unpair(), Some((Hf::nat(36), Hf::nat(37))));
        assert!(Hf::nat(36) < Hf::nat(37));
        assert!(Hf::nat(39).trcl().len() == 39);
        // Mixed comparisons stay consistent with membership order.
        assert!(Hf::nat(35) < p || p < Hf::nat(35));
    }

    #[test]
    fn overflow_is_an_error() {
        // Rank-6 singleton tower exceeds u64.
        let mut t = Hf::empty();
        for _ in 0..7 {
            t = Hf::set(vec![t]);
        }
        assert!(encode_hf(&t).is_err());
        assert!(encode_hf(&Hf::nat(5)).is_err());
        assert_eq!(encode_hf(&Hf::nat(4)).unwrap(), 2059);
    }

    #[test]
    fn trcl_collects_members() {
        let x = Hf::nat(3);
        let t = x.trcl();
        assert!(t.contains(&Hf::nat(0)));
        assert!(t.contains(&Hf::nat(1)));
        assert!(t.contains(&Hf::nat(2)));
        assert_eq!(t.len(), 3);
    }
}
