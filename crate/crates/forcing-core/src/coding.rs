//! Coding layer: formulas as hereditarily finite sets, and a prime-power
//! numbering for sentences of the pure set-theoretic sublanguage.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::formula::{EArg, Formula, Term, Var};
use crate::hf::{encode_hf, Hf};

/// Maps symbol names to small set codes. The distinguished universe symbol
/// gets code 0 and the signature symbols follow in declaration order.
#[derive(Clone, Debug, Default)]
pub struct SymbolCoder {
    map: BTreeMap<String, u64>,
}

impl SymbolCoder {
    pub fn new(ordered_names: &[String]) -> SymbolCoder {
        let map = ordered_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u64))
            .collect();
        SymbolCoder { map }
    }

    pub fn code(&self, name: &str) -> Result<Hf> {
        self.map
            .get(name)
            .map(|n| Hf::nat(*n))
            .ok_or_else(|| Error::Eval(format!("symbol `{name}` has no assigned code")))
    }
}

fn hf_list(items: Vec<Hf>) -> Hf {
    // Right fold of Kuratowski pairs with the empty set as nil. Injective:
    // pairs are nonempty, so nil never collides with a cons cell.
    items
        .into_iter()
        .rev()
        .fold(Hf::empty(), |acc, x| Hf::pair(x, acc))
}

fn tagged(tag: u64, payload: Hf) -> Hf {
    Hf::pair(Hf::nat(tag), payload)
}

fn term_code(t: &Term, syms: &SymbolCoder) -> Result<Hf> {
    Ok(match t {
        Term::Val(h) => tagged(0, h.clone()),
        Term::Var(v) => tagged(1, Hf::nat(*v as u64)),
        Term::App(name, args) => {
            let coded: Result<Vec<Hf>> = args.iter().map(|a| term_code(a, syms)).collect();
            tagged(2, Hf::pair(syms.code(name)?, hf_list(coded?)))
        }
    })
}

fn earg_code(arg: &EArg, syms: &SymbolCoder) -> Result<Hf> {
    Ok(match arg {
        EArg::Sent(f) => tagged(0, formula_code(f, syms)?),
        EArg::Term(t) => tagged(1, term_code(t, syms)?),
        EArg::NegTerm(t) => tagged(2, term_code(t, syms)?),
        EArg::Lit(name, args) => {
            let coded: Result<Vec<Hf>> = args.iter().map(|a| term_code(a, syms)).collect();
            tagged(3, Hf::pair(syms.code(name)?, hf_list(coded?)))
        }
    })
}

/// The set code of a formula: an injective tagged-pair encoding.
///
/// The code of a negation strictly exceeds the code of the negated formula
/// in the canonical set order, so ordering literal codes always lists a
/// positive literal before its negation.
pub fn formula_code(f: &Formula, syms: &SymbolCoder) -> Result<Hf> {
    Ok(match f {
        Formula::Rel(name, args) => {
            let coded: Result<Vec<Hf>> = args.iter().map(|a| term_code(a, syms)).collect();
            tagged(0, Hf::pair(syms.code(name)?, hf_list(coded?)))
        }
        Formula::Eq(a, b) => tagged(1, Hf::pair(term_code(a, syms)?, term_code(b, syms)?)),
        Formula::Mem(a, b) => tagged(2, Hf::pair(term_code(a, syms)?, term_code(b, syms)?)),
        Formula::Not(g) => tagged(3, formula_code(g, syms)?),
        Formula::And(a, b) => {
            tagged(4, Hf::pair(formula_code(a, syms)?, formula_code(b, syms)?))
        }
        Formula::Or(a, b) => {
            tagged(5, Hf::pair(formula_code(a, syms)?, formula_code(b, syms)?))
        }
        Formula::Implies(a, b) => {
            tagged(6, Hf::pair(formula_code(a, syms)?, formula_code(b, syms)?))
        }
        Formula::Iff(a, b) => {
            tagged(7, Hf::pair(formula_code(a, syms)?, formula_code(b, syms)?))
        }
        Formula::Forall(v, g) => {
            tagged(8, Hf::pair(Hf::nat(*v as u64), formula_code(g, syms)?))
        }
        Formula::Exists(v, g) => {
            tagged(9, Hf::pair(Hf::nat(*v as u64), formula_code(g, syms)?))
        }
        Formula::ForallMem(v, t, g) => tagged(
            10,
            Hf::pair(
                Hf::nat(*v as u64),
                Hf::pair(term_code(t, syms)?, formula_code(g, syms)?),
            ),
        ),
        Formula::ExistsMem(v, t, g) => tagged(
            11,
            Hf::pair(
                Hf::nat(*v as u64),
                Hf::pair(term_code(t, syms)?, formula_code(g, syms)?),
            ),
        ),
        Formula::E(arg) => tagged(12, earg_code(arg, syms)?),
        Formula::InL(arg) => tagged(13, earg_code(arg, syms)?),
        Formula::Dfin(t) => tagged(14, term_code(t, syms)?),
    })
}

// ---------------------------------------------------------------------------
// Prime-power sentence numbering for the pure set-theoretic sublanguage.

// Fixed dictionary for the logical alphabet, mapped onto odd naturals:
// negation, conjunction, disjunction, implication, biconditional, the two
// unbounded quantifiers, equality, membership, then the variables.
const TOK_NOT: u64 = 1;
const TOK_AND: u64 = 3;
const TOK_OR: u64 = 5;
const TOK_IMPLIES: u64 = 7;
const TOK_IFF: u64 = 9;
const TOK_FORALL: u64 = 11;
const TOK_EXISTS: u64 = 13;
const TOK_EQ: u64 = 15;
const TOK_MEM: u64 = 17;
const TOK_VAR_BASE: u64 = 19;

fn var_token(v: Var) -> u64 {
    TOK_VAR_BASE + 2 * v as u64
}

/// HF parameters are carried on the even naturals.
fn val_token(h: &Hf) -> Result<u64> {
    Ok(2 * encode_hf(h)?)
}

fn linearize(f: &Formula, out: &mut Vec<u64>) -> Result<()> {
    match f {
        Formula::Not(g) => {
            out.push(TOK_NOT);
            linearize(g, out)
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            out.push(match f {
                Formula::And(..) => TOK_AND,
                Formula::Or(..) => TOK_OR,
                Formula::Implies(..) => TOK_IMPLIES,
                _ => TOK_IFF,
            });
            linearize(a, out)?;
            linearize(b, out)
        }
        Formula::Forall(v, g) => {
            out.push(TOK_FORALL);
            out.push(var_token(*v));
            linearize(g, out)
        }
        Formula::Exists(v, g) => {
            out.push(TOK_EXISTS);
            out.push(var_token(*v));
            linearize(g, out)
        }
        Formula::Eq(a, b) | Formula::Mem(a, b) => {
            out.push(if matches!(f, Formula::Eq(..)) { TOK_EQ } else { TOK_MEM });
            for t in [a, b] {
                match t {
                    Term::Var(v) => out.push(var_token(*v)),
                    Term::Val(h) => {
                        let tok = val_token(h)?;
                        // Token values become prime-power exponents; keep
                        // them materializable.
                        if tok > 1 << 24 {
                            return Err(Error::Precondition(
                                "HF parameter too large for the numbered fragment".into(),
                            ));
                        }
                        out.push(tok);
                    }
                    Term::App(..) => {
                        return Err(Error::Precondition(
                            "function application is outside the numbered fragment".into(),
                        ))
                    }
                }
            }
            Ok(())
        }
        _ => Err(Error::Precondition(format!(
            "formula `{f}` is outside the numbered fragment (pure set-theoretic sublanguage)"
        ))),
    }
}

fn primes(n: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(n);
    let mut cand = 2u64;
    while out.len() < n {
        if out.iter().take_while(|p| *p * *p <= cand).all(|p| cand % p != 0) {
            out.push(cand);
        }
        cand += 1;
    }
    out
}

/// The sequence code of a token string: the product over positions i of
/// p_i^(a_i + 1).
fn sequence_code(tokens: &[u64]) -> BigUint {
    let ps = primes(tokens.len());
    let mut acc = BigUint::one();
    for (i, a) in tokens.iter().enumerate() {
        acc *= BigUint::from(ps[i]).pow((a + 1) as u32);
    }
    acc
}

fn sequence_decode(mut n: BigUint) -> Result<Vec<u64>> {
    if n.is_zero() {
        return Err(Error::Invalid("0 is not a sequence code".into()));
    }
    let mut tokens = Vec::new();
    let mut idx = 0usize;
    while !n.is_one() {
        let p = BigUint::from(primes(idx + 1)[idx]);
        let mut exp = 0u64;
        while (&n % &p).is_zero() {
            n /= &p;
            exp += 1;
        }
        if exp == 0 {
            return Err(Error::Invalid(
                "gap in prime support: not a sequence code".into(),
            ));
        }
        tokens.push(exp - 1);
        idx += 1;
    }
    Ok(tokens)
}

/// Numbers a sentence of the pure set-theoretic sublanguage (unbounded
/// quantifiers, connectives, equality and membership atoms over variables
/// and small HF values).
pub fn godel_number(f: &Formula) -> Result<BigUint> {
    let mut tokens = Vec::new();
    linearize(f, &mut tokens)?;
    Ok(sequence_code(&tokens))
}

struct TokenReader<'a> {
    toks: &'a [u64],
    pos: usize,
}

impl TokenReader<'_> {
    fn next(&mut self) -> Result<u64> {
        let t = self
            .toks
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::Invalid("truncated token string".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn read_term(&mut self) -> Result<Term> {
        let t = self.next()?;
        if t % 2 == 0 {
            Ok(Term::Val(crate::hf::decode_hf(t / 2)))
        } else if t >= TOK_VAR_BASE {
            Ok(Term::Var(((t - TOK_VAR_BASE) / 2) as Var))
        } else {
            Err(Error::Invalid(format!("token {t} is not a term token")))
        }
    }

    fn read_var(&mut self) -> Result<Var> {
        let t = self.next()?;
        if t % 2 == 1 && t >= TOK_VAR_BASE {
            Ok(((t - TOK_VAR_BASE) / 2) as Var)
        } else {
            Err(Error::Invalid(format!("token {t} is not a variable token")))
        }
    }

    fn read_formula(&mut self) -> Result<Formula> {
        use crate::formula::{and, exists, forall, iff, implies, not, or};
        let t = self.next()?;
        Ok(match t {
            TOK_NOT => not(self.read_formula()?),
            TOK_AND => {
                let a = self.read_formula()?;
                and(a, self.read_formula()?)
            }
            TOK_OR => {
                let a = self.read_formula()?;
                or(a, self.read_formula()?)
            }
            TOK_IMPLIES => {
                let a = self.read_formula()?;
                implies(a, self.read_formula()?)
            }
            TOK_IFF => {
                let a = self.read_formula()?;
                iff(a, self.read_formula()?)
            }
            TOK_FORALL => {
                let v = self.read_var()?;
                forall(v, self.read_formula()?)
            }
            TOK_EXISTS => {
                let v = self.read_var()?;
                exists(v, self.read_formula()?)
            }
            TOK_EQ => {
                let a = self.read_term()?;
                Formula::Eq(a, self.read_term()?)
            }
            TOK_MEM => {
                let a = self.read_term()?;
                Formula::Mem(a, self.read_term()?)
            }
            other => return Err(Error::Invalid(format!("token {other} cannot head a formula"))),
        })
    }
}

/// Inverse of [`godel_number`].
pub fn godel_decode(n: &BigUint) -> Result<Formula> {
    let tokens = sequence_decode(n.clone())?;
    let mut r = TokenReader { toks: &tokens, pos: 0 };
    let f = r.read_formula()?;
    if r.pos != tokens.len() {
        return Err(Error::Invalid("trailing tokens after sentence".into()));
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// The membership diagram relation r and reconstruction of f from it.

/// The code witness: the parameter coding f (HF set to even natural) and the
/// decision procedure for the membership diagram r.
#[derive(Clone, Copy, Debug, Default)]
pub struct CodeWitness;

impl CodeWitness {
    /// f: the parameter coding of an HF set on the even naturals.
    pub fn f(&self, x: &Hf) -> Result<u64> {
        val_token(x)
    }

    /// Decision procedure for the membership diagram on parameter codes:
    /// holds exactly when both arguments are parameter codes and the set
    /// coded by `a` is an element of the set coded by `b`.
    pub fn r(&self, a: u64, b: u64) -> bool {
        if a % 2 != 0 || b % 2 != 0 {
            return false;
        }
        let x = crate::hf::decode_hf(a / 2);
        let y = crate::hf::decode_hf(b / 2);
        y.contains(&x)
    }

    /// Reconstructs the set assigned to each even code below the bound by
    /// querying only `r`: a code's set is the set of sets of the smaller
    /// codes related to it. Extensionality forces the result, so agreement
    /// with `f` shows `f` is determined by `r` on the fragment.
    pub fn f_from_r(&self, max_code: u64) -> BTreeMap<u64, Hf> {
        let mut assigned: BTreeMap<u64, Hf> = BTreeMap::new();
        let mut code = 0u64;
        while code <= max_code {
            let elems: Vec<Hf> = assigned
                .iter()
                .filter(|(m, _)| self.r(**m, code))
                .map(|(_, h)| h.clone())
                .collect();
            assigned.insert(code, Hf::set(elems));
            code += 2;
        }
        assigned
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{and, exists, forall, not};
    use crate::hf::hf_universe;

    fn coder() -> SymbolCoder {
        SymbolCoder::new(&["U".to_string(), "P".to_string(), "F".to_string()])
    }

    #[test]
    fn formula_codes_injective_on_samples() {
        let fs = vec![
            Formula::Rel("P".into(), vec![Term::Val(Hf::nat(1))]),
            Formula::Rel("P".into(), vec![Term::Val(Hf::nat(2))]),
            Formula::Rel("U".into(), vec![Term::Val(Hf::nat(1))]),
            not(Formula::Rel("P".into(), vec![Term::Val(Hf::nat(1))])),
            Formula::Eq(Term::Var(0), Term::Val(Hf::empty())),
            Formula::Mem(Term::Var(0), Term::Val(Hf::empty())),
            forall(0, Formula::Rel("P".into(), vec![Term::Var(0)])),
            exists(0, Formula::Rel("P".into(), vec![Term::Var(0)])),
            Formula::E(EArg::Lit("P".into(), vec![Term::Var(0)])),
        ];
        let syms = coder();
        let codes: Vec<Hf> = fs.iter().map(|f| formula_code(f, &syms).unwrap()).collect();
        for i in 0..codes.len() {
            for j in 0..codes.len() {
                assert_eq!(i == j, codes[i] == codes[j], "collision between {i} and {j}");
            }
        }
    }

    #[test]
    fn negation_code_exceeds_core() {
        let syms = coder();
        for f in [
            Formula::Rel("P".into(), vec![Term::Val(Hf::nat(3))]),
            Formula::Eq(Term::Val(Hf::nat(1)), Term::Val(Hf::nat(2))),
        ] {
            let c = formula_code(&f, &syms).unwrap();
            let cn = formula_code(&not(f), &syms).unwrap();
            assert!(c < cn);
        }
    }

    #[test]
    fn godel_round_trip_samples() {
        let fs = vec![
            Formula::Mem(Term::Val(Hf::empty()), Term::Val(Hf::nat(1))),
            forall(0, Formula::Mem(Term::Var(0), Term::Var(0))),
            and(
                Formula::Eq(Term::Var(1), Term::Val(Hf::nat(2))),
                not(Formula::Mem(Term::Var(1), Term::Var(2))),
            ),
            exists(3, forall(0, not(Formula::Mem(Term::Var(0), Term::Var(3))))),
        ];
        for f in fs {
            let n = godel_number(&f).unwrap();
            let back = godel_decode(&n).unwrap();
            assert_eq!(back, f, "round trip failed on {f}");
        }
    }

    #[test]
    fn godel_monotone_in_parameters() {
        // Same shape, larger HF literal: larger code.
        let small = Formula::Mem(Term::Val(Hf::empty()), Term::Val(Hf::nat(1)));
        let large = Formula::Mem(Term::Val(Hf::nat(3)), Term::Val(Hf::nat(4)));
        assert!(godel_number(&small).unwrap() < godel_number(&large).unwrap());
    }

    #[test]
    fn godel_rejects_out_of_fragment() {
        assert!(godel_number(&Formula::Rel("P".into(), vec![])).is_err());
        assert!(godel_number(&Formula::E(EArg::Term(Term::Var(0)))).is_err());
        assert!(godel_number(&Formula::ForallMem(
            0,
            Term::Var(1),
            Box::new(Formula::Eq(Term::Var(0), Term::Var(0)))
        ))
        .is_err());
    }

    #[test]
    fn f_from_r_matches_f() {
        let w = CodeWitness;
        let rebuilt = w.f_from_r(1000);
        for x in hf_universe(4) {
            let code = w.f(&x).unwrap();
            if code <= 1000 {
                assert_eq!(rebuilt.get(&code), Some(&x), "mismatch at code {code}");
            }
        }
    }
}
