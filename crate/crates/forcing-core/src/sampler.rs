//! Generic-model sampling: the least-split embedding of binary strings
//! into the atomless part of a certification order, model construction
//! from bit streams under a dense-set schedule, and the inverse decoding
//! of a fragment back into its driving bits.

use std::collections::BTreeSet;

use crate::certify::{self, find_certifying_fragment};
use crate::error::{Error, Result};
use crate::formula::{neg, Formula};
use crate::kernel::{cone, derive, DerivativeChain};
use crate::structure::Structure;
use crate::tci::{CertLanguage, Tci};

// ---------------------------------------------------------------------------
// Bit streams

/// Bits driving a descent: an explicit vector, or a deterministic
/// seed-expanded stream.
#[derive(Clone, Debug)]
pub enum BitSource {
    Explicit(Vec<bool>),
    Seeded { seed: u64, len: usize },
}

impl BitSource {
    /// Materializes the stream. Seeded streams replay identically across
    /// builds and platforms: the generator is a fixed splitmix64 chain,
    /// one bit per output word position.
    pub fn bits(&self) -> Vec<bool> {
        match self {
            BitSource::Explicit(v) => v.clone(),
            BitSource::Seeded { seed, len } => {
                let mut state = *seed;
                let mut out = Vec::with_capacity(*len);
                let mut word = 0u64;
                for i in 0..*len {
                    if i % 64 == 0 {
                        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
                        let mut z = state;
                        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
                        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
                        word = z ^ (z >> 31);
                    }
                    out.push(word & 1 == 1);
                    word >>= 1;
                }
                out
            }
        }
    }
}

/// A bit source plus a finite dense-set schedule. Each schedule entry
/// names a literal core; the set of conditions deciding that core is dense
/// in the order, and the sampler meets every entry during the descent —
/// the verifiable shadow of genericity over a finite list of dense sets.
#[derive(Clone, Debug)]
pub struct BitStream {
    pub source: BitSource,
    pub schedule: Vec<Formula>,
}

impl BitStream {
    pub fn explicit(bits: Vec<bool>) -> BitStream {
        BitStream { source: BitSource::Explicit(bits), schedule: Vec::new() }
    }

    pub fn seeded(seed: u64, len: usize) -> BitStream {
        BitStream { source: BitSource::Seeded { seed, len }, schedule: Vec::new() }
    }
}

/// What a descent returns: a full model at finite scope when the bits pin
/// one down, otherwise the accumulated certified fragment prefix.
#[derive(Clone, Debug)]
pub enum SampleOutcome {
    Model(Structure),
    Fragment(BTreeSet<Formula>),
}

impl SampleOutcome {
    pub fn fragment(&self) -> Option<&BTreeSet<Formula>> {
        match self {
            SampleOutcome::Fragment(p) => Some(p),
            SampleOutcome::Model(_) => None,
        }
    }
}

// ---------------------------------------------------------------------------
// The sampler

/// Descent machinery over the restricted order P*: conditions certifiable
/// at the working cap whose restriction to the kernel language extends to
/// a kernel fragment. With an empty kernel the restriction is dropped and
/// descents run in the plain certification order — at finite scope every
/// descent then ends in an atom, which is exactly what model sampling
/// needs there.
pub struct Sampler<'a> {
    tci: &'a Tci,
    cl: CertLanguage,
    chain: DerivativeChain,
    kernel_cores: BTreeSet<Formula>,
    cores: Vec<Formula>,
    pub search_cap: u32,
    budget: u64,
}

fn core_of(lit: &Formula) -> Formula {
    match lit {
        Formula::Not(f) => (**f).clone(),
        f => f.clone(),
    }
}

impl<'a> Sampler<'a> {
    /// Builds the working context: the certification language at
    /// `search_cap` for membership tests, and kernel evidence computed at
    /// `kernel_cap` (clamped to the working cap).
    pub fn new(
        tci: &'a Tci,
        search_cap: u32,
        kernel_cap: u32,
        stage_cap: u32,
        budget: u64,
    ) -> Result<Sampler<'a>> {
        if certify::schema_refutation(tci).is_some() {
            return Err(Error::Precondition(
                "the datum is refuted outright; its certification order is empty".into(),
            ));
        }
        let cl = tci.synth_cert(search_cap)?;
        let chain = derive(tci, stage_cap, kernel_cap.min(search_cap), budget)?;
        let kernel_cores: BTreeSet<Formula> = chain
            .models
            .first()
            .map(|sigma| sigma.iter().map(core_of).collect())
            .unwrap_or_default();
        let cores: Vec<Formula> = cl.pos_lang.iter().cloned().collect();
        Ok(Sampler { tci, cl, chain, kernel_cores, cores, search_cap, budget })
    }

    pub fn kernel_size(&self) -> usize {
        self.chain.kernel.len()
    }

    pub fn chain(&self) -> &DerivativeChain {
        &self.chain
    }

    fn require_kernel(&self) -> Result<()> {
        if self.chain.kernel.is_empty() {
            return Err(Error::Precondition(
                "the kernel at the evidence cap is empty; there is no atomless part to embed into"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Membership in the restricted order. Certifiability is decided by
    /// fragment search at the working cap; the kernel restriction checks
    /// that the condition's kernel-language part extends to a surviving
    /// fragment.
    pub fn member(&self, q: &BTreeSet<Formula>) -> Result<bool> {
        let out = find_certifying_fragment(&self.cl, q, self.budget)?;
        if out.witnesses.is_empty() {
            if out.exhausted {
                return Ok(false);
            }
            return Err(Error::CapExceeded(format!(
                "membership undecided within {} nodes",
                self.budget
            )));
        }
        if self.chain.kernel.is_empty() {
            return Ok(true);
        }
        let restricted: BTreeSet<Formula> =
            q.iter().filter(|l| self.kernel_cores.contains(&core_of(l))).cloned().collect();
        Ok(self
            .chain
            .kernel
            .iter()
            .any(|&i| restricted.is_subset(&self.chain.models[i])))
    }

    /// The least literal core splitting the condition: both extensions stay
    /// in the restricted order.
    fn split_core(&self, p: &BTreeSet<Formula>) -> Result<Option<Formula>> {
        for c in &self.cores {
            if p.contains(c) || p.contains(&neg(c)) {
                continue;
            }
            let mut pos = p.clone();
            pos.insert(c.clone());
            if !self.member(&pos)? {
                continue;
            }
            let mut negd = p.clone();
            negd.insert(neg(c));
            if self.member(&negd)? {
                return Ok(Some(c.clone()));
            }
        }
        Ok(None)
    }

    /// Does some literal split the condition within the restricted order?
    pub fn splits(&self, p: &BTreeSet<Formula>) -> Result<bool> {
        Ok(self.split_core(p)?.is_some())
    }

    /// The ⊆-least splitting condition extending `z`. The restricted order
    /// is closed under weakening, so a literal splitting any extension of
    /// `z` already splits `z`: the least split above `z` is `z` itself or
    /// nothing below the cap.
    pub fn least_split(&self, z: &BTreeSet<Formula>) -> Result<BTreeSet<Formula>> {
        self.require_kernel()?;
        if !self.member(z)? {
            return Err(Error::Precondition(
                "the condition is outside the restricted order".into(),
            ));
        }
        if self.splits(z)? {
            Ok(z.clone())
        } else {
            Err(Error::CapExceeded(
                "no splitting extension below the working cap".into(),
            ))
        }
    }

    /// The embedding of binary strings into the restricted order: each bit
    /// decides the least splitting literal of the current condition, and
    /// every value along the path is itself a least split. Monotone in the
    /// string, with incompatible siblings.
    pub fn cohen_embed(&self, bits: &[bool]) -> Result<BTreeSet<Formula>> {
        self.require_kernel()?;
        let mut p = BTreeSet::new();
        for &b in bits {
            let Some(c) = self.split_core(&p)? else {
                return Err(Error::CapExceeded(
                    "no splitting extension below the working cap".into(),
                ));
            };
            p.insert(if b { c } else { neg(&c) });
        }
        if self.split_core(&p)?.is_none() {
            return Err(Error::CapExceeded(
                "no splitting extension below the working cap".into(),
            ));
        }
        Ok(p)
    }

    /// Meets the decision set of a scheduled literal core: extends by the
    /// core when that stays in the order, by its negation otherwise, with
    /// an already-decided core counting as met. A core undecidable either
    /// way is reported, never silently skipped.
    fn meet(&self, p: &mut BTreeSet<Formula>, entry: &Formula) -> Result<()> {
        let core = core_of(entry);
        if p.contains(&core) || p.contains(&neg(&core)) {
            return Ok(());
        }
        let mut pos = p.clone();
        pos.insert(core.clone());
        if self.member(&pos)? {
            *p = pos;
            return Ok(());
        }
        let mut negd = p.clone();
        negd.insert(neg(&core));
        if self.member(&negd)? {
            *p = negd;
            return Ok(());
        }
        Err(Error::Precondition(format!(
            "the scheduled decision set for `{core}` is not dense below the current condition"
        )))
    }

    /// Descends split decisions along the stream, meeting one schedule
    /// entry before each decision and the remainder afterwards. At finite
    /// scope a descent that pins a unique fragment returns the rebuilt
    /// model; otherwise the accumulated fragment prefix is returned, every
    /// prefix being a certified condition.
    pub fn sample_model(&self, stream: &BitStream, steps: usize) -> Result<SampleOutcome> {
        if self.chain.models.is_empty() {
            return Err(Error::Precondition(
                "sampling asks for a consistent datum; no fragment certifies this one".into(),
            ));
        }
        let bits = stream.source.bits();
        let mut schedule = stream.schedule.iter();
        let mut p = BTreeSet::new();
        for &b in bits.iter().take(steps) {
            if let Some(entry) = schedule.next() {
                self.meet(&mut p, entry)?;
            }
            let Some(c) = self.split_core(&p)? else {
                return Err(Error::CapExceeded(
                    "the descent reached a condition with no splitting extension".into(),
                ));
            };
            p.insert(if b { c } else { neg(&c) });
        }
        for entry in schedule {
            self.meet(&mut p, entry)?;
        }
        if self.tci.is_finite_scope() {
            let all: Vec<usize> = (0..self.chain.models.len()).collect();
            let c = cone(&self.chain.models, &all, &p);
            if c.len() == 1 {
                let sigma = &self.chain.models[c[0]];
                return Ok(SampleOutcome::Model(self.tci.model_of(sigma, self.chain.search_cap)?));
            }
        }
        Ok(SampleOutcome::Fragment(p))
    }

    /// Recovers the longest bit string whose embedded path sits inside the
    /// fragment prefix: the split literals are replayed and read off by
    /// polarity. Inverts `sample_model` bit for bit on schedule-free
    /// streams; a prefix carrying a literal and its negation is rejected.
    pub fn decode_model(&self, prefix: &BTreeSet<Formula>) -> Result<Vec<bool>> {
        for l in prefix {
            if prefix.contains(&neg(l)) {
                return Err(Error::Precondition(format!(
                    "the prefix contains `{l}` together with its negation"
                )));
            }
        }
        let mut p = BTreeSet::new();
        let mut out = Vec::new();
        loop {
            let Some(c) = self.split_core(&p)? else { break };
            let b = if prefix.contains(&c) {
                true
            } else if prefix.contains(&neg(&c)) {
                false
            } else {
                break;
            };
            p.insert(if b { c } else { neg(&c) });
            out.push(b);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::DEFAULT_BUDGET;
    use crate::formula::Term;
    use crate::hf::Hf;
    use crate::tci::{fn_2_2, free_pred, singleton_pred};

    const B: u64 = DEFAULT_BUDGET;

    fn p_lit(n: u64) -> Formula {
        Formula::Rel("P".into(), vec![Term::Val(Hf::nat(n))])
    }

    fn free_sampler(t: &Tci) -> Sampler<'_> {
        Sampler::new(t, 64, 6, 8, B).unwrap()
    }

    use crate::tci::Tci;

    #[test]
    fn free_predicate_embedding_prefixes() {
        let t = free_pred().unwrap();
        let s = free_sampler(&t);
        assert_eq!(s.cohen_embed(&[]).unwrap(), BTreeSet::new());
        let one: BTreeSet<Formula> = [p_lit(0)].into_iter().collect();
        assert_eq!(s.cohen_embed(&[true]).unwrap(), one);
        let zero: BTreeSet<Formula> = [neg(&p_lit(0))].into_iter().collect();
        assert_eq!(s.cohen_embed(&[false]).unwrap(), zero);
        // Monotone along prefixes.
        let long = s.cohen_embed(&[true, false, true]).unwrap();
        assert!(one.is_subset(&long));
        assert!(s.cohen_embed(&[true, false]).unwrap().is_subset(&long));
    }

    #[test]
    fn free_predicate_embedding_injective_with_incompatible_siblings() {
        let t = free_pred().unwrap();
        let s = free_sampler(&t);
        let mut seen: BTreeSet<BTreeSet<Formula>> = BTreeSet::new();
        let mut count = 0usize;
        for len in 0..=6usize {
            for mask in 0u32..(1 << len) {
                let bits: Vec<bool> = (0..len).map(|i| mask & (1 << i) != 0).collect();
                seen.insert(s.cohen_embed(&bits).unwrap());
                count += 1;
            }
        }
        assert_eq!(count, 127);
        assert_eq!(seen.len(), 127, "the embedding must be injective");
        // Sibling incompatibility at every branch.
        for len in 0..6usize {
            for mask in 0u32..(1 << len) {
                let stem: Vec<bool> = (0..len).map(|i| mask & (1 << i) != 0).collect();
                let mut a = stem.clone();
                a.push(false);
                let mut b = stem;
                b.push(true);
                let pa = s.cohen_embed(&a).unwrap();
                let pb = s.cohen_embed(&b).unwrap();
                assert!(
                    pa.iter().any(|l| pb.contains(&neg(l))),
                    "siblings must be contradictory"
                );
            }
        }
    }

    #[test]
    fn least_split_is_the_condition_itself_or_nothing() {
        let t = free_pred().unwrap();
        let s = free_sampler(&t);
        assert_eq!(s.least_split(&BTreeSet::new()).unwrap(), BTreeSet::new());
        let z: BTreeSet<Formula> = [neg(&p_lit(0)), p_lit(3)].into_iter().collect();
        assert_eq!(s.least_split(&z).unwrap(), z);
        // A self-contradictory condition is outside the order.
        let bad: BTreeSet<Formula> = [p_lit(0), neg(&p_lit(0))].into_iter().collect();
        assert!(matches!(s.least_split(&bad), Err(Error::Precondition(_))));
    }

    #[test]
    fn empty_kernel_refuses_the_embedding_and_strands_positive_descents() {
        let t = singleton_pred().unwrap();
        let s = Sampler::new(&t, 20, 5, 8, B).unwrap();
        assert_eq!(s.kernel_size(), 0);
        assert!(matches!(s.cohen_embed(&[true]), Err(Error::Precondition(_))));
        assert!(matches!(s.least_split(&BTreeSet::new()), Err(Error::Precondition(_))));
        // In the unrestricted order the descent dies after one positive
        // literal: no second core splits jointly with it.
        let stranded = s.sample_model(&BitStream::explicit(vec![true, true]), 2);
        assert!(matches!(stranded, Err(Error::CapExceeded(_))));
        // The all-negative path survives and stays certified.
        match s.sample_model(&BitStream::explicit(vec![false, false]), 2).unwrap() {
            SampleOutcome::Fragment(p) => {
                let expected: BTreeSet<Formula> =
                    [neg(&p_lit(0)), neg(&p_lit(1))].into_iter().collect();
                assert_eq!(p, expected);
            }
            SampleOutcome::Model(_) => panic!("unbounded scope must yield a fragment"),
        }
    }

    #[test]
    fn two_point_function_streams_pick_each_model() {
        let t = fn_2_2().unwrap();
        let s = Sampler::new(&t, 10, 10, 8, B).unwrap();
        let mut sigmas = BTreeSet::new();
        for mask in 0u32..4 {
            let bits = vec![mask & 1 != 0, mask & 2 != 0];
            match s.sample_model(&BitStream::explicit(bits.clone()), 2).unwrap() {
                SampleOutcome::Model(m) => {
                    sigmas.insert(t.sigma_of(&m, 10).unwrap());
                }
                SampleOutcome::Fragment(p) => panic!("2 bits must pin a model, got {p:?}"),
            }
            // Determinism per stream.
            match s.sample_model(&BitStream::explicit(bits), 2).unwrap() {
                SampleOutcome::Model(m) => {
                    assert!(sigmas.contains(&t.sigma_of(&m, 10).unwrap()));
                }
                SampleOutcome::Fragment(_) => unreachable!(),
            }
        }
        assert_eq!(sigmas.len(), 4, "the four streams must pick the four models");
    }

    #[test]
    fn free_predicate_fragment_follows_the_split_order() {
        let t = free_pred().unwrap();
        let s = free_sampler(&t);
        match s.sample_model(&BitStream::explicit(vec![true, false, true]), 3).unwrap() {
            SampleOutcome::Fragment(p) => {
                let expected: BTreeSet<Formula> =
                    [p_lit(0), neg(&p_lit(1)), p_lit(2)].into_iter().collect();
                assert_eq!(p, expected);
            }
            SampleOutcome::Model(_) => panic!("unbounded scope must yield a fragment"),
        }
    }

    #[test]
    fn decode_inverts_sampling_on_seeded_streams() {
        let t = free_pred().unwrap();
        let s = free_sampler(&t);
        for seed in 0..10u64 {
            let stream = BitStream::seeded(seed, 8);
            let bits = stream.source.bits();
            match s.sample_model(&stream, 8).unwrap() {
                SampleOutcome::Fragment(p) => {
                    assert_eq!(s.decode_model(&p).unwrap(), bits, "seed {seed}");
                }
                SampleOutcome::Model(_) => panic!("unbounded scope must yield a fragment"),
            }
        }
        assert_eq!(s.decode_model(&BTreeSet::new()).unwrap(), Vec::<bool>::new());
        let bad: BTreeSet<Formula> = [p_lit(0), neg(&p_lit(0))].into_iter().collect();
        assert!(matches!(s.decode_model(&bad), Err(Error::Precondition(_))));
    }

    #[test]
    fn schedules_are_met_with_positive_preference() {
        let t = free_pred().unwrap();
        let s = free_sampler(&t);
        let stream = BitStream {
            source: BitSource::Explicit(vec![true]),
            schedule: vec![p_lit(5), p_lit(7)],
        };
        match s.sample_model(&stream, 1).unwrap() {
            SampleOutcome::Fragment(p) => {
                assert!(p.contains(&p_lit(5)));
                assert!(p.contains(&p_lit(7)));
                assert!(p.contains(&p_lit(0)));
            }
            SampleOutcome::Model(_) => panic!("unbounded scope must yield a fragment"),
        }
        // An entry outside the working language is reported, not skipped.
        let off = BitStream {
            source: BitSource::Explicit(vec![true]),
            schedule: vec![p_lit(99)],
        };
        assert!(s.sample_model(&off, 1).is_err());
    }

    #[test]
    fn seeded_streams_replay_deterministically() {
        let a = BitSource::Seeded { seed: 42, len: 100 }.bits();
        let b = BitSource::Seeded { seed: 42, len: 100 }.bits();
        assert_eq!(a, b);
        let c = BitSource::Seeded { seed: 43, len: 100 }.bits();
        assert_ne!(a, c);
    }
}
