//! S-expression surface syntax for formulas.
//!
//! Grammar (whitespace separated):
//!
//! ```text
//! formula := NAME                        -- shorthand for (rel NAME)
//!          | (rel NAME term*)
//!          | (eq term term)              -- terms here may be applications
//!          | (mem term term)
//!          | (not f) | (and f f+) | (or f f+) | (implies f f) | (iff f f)
//!          | (forall vN f) | (exists vN f)
//!          | (forall-mem vN term f) | (exists-mem vN term f)
//!          | (E f) | (E term) | (E-term NAME term*) | (E-neg term)
//!          | (in-L f) | (in-L term) | (in-L-lit NAME term*) | (in-L-neg term)
//!          | (dfin term)
//! term    := vN | #N | nN | { term, ... } -- braces hold ground values only
//!          | (app NAME term*)            -- only directly inside (eq ..)
//! ```
//!
//! `#N` is the set with Ackermann code N; `nN` is the natural N (the form
//! the printer uses when the Ackermann code would be astronomically
//! large). `and`/`or` take two or more
//! arguments and fold to the left. Error offsets point at the end of the
//! offending token; end-of-input errors point at the input length.

use crate::error::{Error, Result};
use crate::formula::{EArg, Formula, Term, Var};
use crate::hf::{decode_hf, Hf};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum TokKind {
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Atom,
}

#[derive(Clone, Copy, Debug)]
struct Tok<'a> {
    kind: TokKind,
    text: &'a str,
    end: usize,
}

fn tokenize(input: &str) -> Vec<Tok<'_>> {
    let bytes = input.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let kind = match c {
            '(' => Some(TokKind::LParen),
            ')' => Some(TokKind::RParen),
            '{' => Some(TokKind::LBrace),
            '}' => Some(TokKind::RBrace),
            ',' => Some(TokKind::Comma),
            _ => None,
        };
        if let Some(kind) = kind {
            toks.push(Tok { kind, text: &input[i..i + 1], end: i + 1 });
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if c.is_whitespace() || "(){},".contains(c) {
                break;
            }
            i += 1;
        }
        toks.push(Tok { kind: TokKind::Atom, text: &input[start..i], end: i });
    }
    toks
}

struct Parser<'a> {
    toks: Vec<Tok<'a>>,
    pos: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok<'a>> {
        self.toks.get(self.pos)
    }

    fn next(&mut self, what: &str) -> Result<Tok<'a>> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(*t)
            }
            None => Err(self.eof(what)),
        }
    }

    fn eof(&self, what: &str) -> Error {
        Error::Parse { offset: self.len, msg: format!("unexpected end of input, expected {what}") }
    }

    fn unexpected(&self, tok: &Tok<'a>, what: &str) -> Error {
        Error::Parse {
            offset: tok.end,
            msg: format!("unexpected token `{}`, expected {what}", tok.text),
        }
    }

    fn expect(&mut self, kind: TokKind, what: &str) -> Result<Tok<'a>> {
        let tok = self.next(what)?;
        if tok.kind == kind {
            Ok(tok)
        } else {
            Err(self.unexpected(&tok, what))
        }
    }

    fn at_term_start(&self) -> bool {
        match self.peek() {
            Some(t) if t.kind == TokKind::LBrace => true,
            Some(t) if t.kind == TokKind::Atom => {
                t.text.starts_with('#')
                    || (t.text.starts_with('v')
                        && t.text.len() > 1
                        && t.text[1..].chars().all(|c| c.is_ascii_digit()))
            }
            _ => false,
        }
    }

    fn parse_var(&mut self) -> Result<Var> {
        let tok = self.next("a variable like v0")?;
        if tok.kind == TokKind::Atom && tok.text.starts_with('v') {
            if let Ok(n) = tok.text[1..].parse::<u32>() {
                return Ok(n);
            }
        }
        Err(self.unexpected(&tok, "a variable like v0"))
    }

    fn parse_name(&mut self) -> Result<String> {
        let tok = self.next("a symbol name")?;
        if tok.kind == TokKind::Atom
            && !tok.text.starts_with('#')
            && !tok.text.starts_with('{')
        {
            Ok(tok.text.to_string())
        } else {
            Err(self.unexpected(&tok, "a symbol name"))
        }
    }

    /// Ground value: `#N` (Ackermann code), `nN` (a plain natural, used
    /// when the code exceeds the compact printing range), or `{v, ...}` of
    /// ground values.
    fn parse_value(&mut self) -> Result<Hf> {
        let tok = self.next("a value")?;
        match tok.kind {
            TokKind::Atom if tok.text.starts_with('#') => {
                match tok.text[1..].parse::<u64>() {
                    Ok(code) => Ok(decode_hf(code)),
                    Err(_) => Err(self.unexpected(&tok, "a numeric code like #3")),
                }
            }
            TokKind::Atom
                if tok.text.starts_with('n')
                    && tok.text.len() > 1
                    && tok.text[1..].chars().all(|c| c.is_ascii_digit()) =>
            {
                match tok.text[1..].parse::<u64>() {
                    Ok(n) => Ok(Hf::nat(n)),
                    Err(_) => Err(self.unexpected(&tok, "a natural like n7")),
                }
            }
            TokKind::LBrace => {
                let mut elems = Vec::new();
                loop {
                    match self.peek() {
                        Some(t) if t.kind == TokKind::RBrace => {
                            self.pos += 1;
                            break;
                        }
                        Some(_) => {
                            if !elems.is_empty() {
                                self.expect(TokKind::Comma, "`,` or `}`")?;
                            }
                            elems.push(self.parse_value()?);
                        }
                        None => return Err(self.eof("`}`")),
                    }
                }
                Ok(Hf::set(elems))
            }
            _ => Err(self.unexpected(&tok, "a value")),
        }
    }

    fn parse_term(&mut self, allow_app: bool) -> Result<Term> {
        match self.peek() {
            Some(t) if t.kind == TokKind::LParen && allow_app => {
                let open = *t;
                self.pos += 1;
                let head = self.next("`app`")?;
                if head.kind != TokKind::Atom || head.text != "app" {
                    return Err(self.unexpected(&head, "`app`"));
                }
                let name = self.parse_name()?;
                let mut args = Vec::new();
                loop {
                    match self.peek() {
                        Some(t) if t.kind == TokKind::RParen => {
                            self.pos += 1;
                            break;
                        }
                        Some(_) => args.push(self.parse_term(false)?),
                        None => return Err(self.eof("`)`")),
                    }
                }
                let _ = open;
                Ok(Term::App(name, args))
            }
            Some(t)
                if t.kind == TokKind::Atom
                    && t.text.starts_with('v')
                    && t.text.len() > 1
                    && t.text[1..].chars().all(|c| c.is_ascii_digit()) =>
            {
                let v = self.parse_var()?;
                Ok(Term::Var(v))
            }
            _ => Ok(Term::Val(self.parse_value()?)),
        }
    }

    /// Remaining terms up to the closing paren (which is consumed).
    fn parse_term_list(&mut self, allow_app: bool) -> Result<Vec<Term>> {
        let mut args = Vec::new();
        loop {
            match self.peek() {
                Some(t) if t.kind == TokKind::RParen => {
                    self.pos += 1;
                    return Ok(args);
                }
                Some(_) => args.push(self.parse_term(allow_app)?),
                None => return Err(self.eof("`)`")),
            }
        }
    }

    fn close(&mut self) -> Result<()> {
        self.expect(TokKind::RParen, "`)`").map(|_| ())
    }

    fn parse_formula(&mut self) -> Result<Formula> {
        let tok = self.next("a formula")?;
        match tok.kind {
            TokKind::Atom => {
                // Bare identifier: zero-ary relation shorthand.
                if tok.text.starts_with('#')
                    || (tok.text.starts_with('v')
                        && tok.text.len() > 1
                        && tok.text[1..].chars().all(|c| c.is_ascii_digit()))
                {
                    return Err(self.unexpected(&tok, "a formula"));
                }
                Ok(Formula::Rel(tok.text.to_string(), vec![]))
            }
            TokKind::LParen => {
                let head = self.next("a formula head")?;
                if head.kind != TokKind::Atom {
                    return Err(self.unexpected(&head, "a formula head"));
                }
                match head.text {
                    "rel" => {
                        let name = self.parse_name()?;
                        let args = self.parse_term_list(false)?;
                        Ok(Formula::Rel(name, args))
                    }
                    "eq" => {
                        let a = self.parse_term(true)?;
                        let b = self.parse_term(true)?;
                        self.close()?;
                        Ok(Formula::Eq(a, b))
                    }
                    "mem" => {
                        let a = self.parse_term(false)?;
                        let b = self.parse_term(false)?;
                        self.close()?;
                        Ok(Formula::Mem(a, b))
                    }
                    "not" => {
                        let f = self.parse_formula()?;
                        self.close()?;
                        Ok(Formula::Not(Box::new(f)))
                    }
                    "and" | "or" => {
                        let connective = head.text;
                        let mut fs = vec![self.parse_formula()?, self.parse_formula()?];
                        loop {
                            match self.peek() {
                                Some(t) if t.kind == TokKind::RParen => {
                                    self.pos += 1;
                                    break;
                                }
                                Some(_) => fs.push(self.parse_formula()?),
                                None => return Err(self.eof("`)`")),
                            }
                        }
                        Ok(if connective == "and" {
                            crate::formula::and_all(fs)
                        } else {
                            crate::formula::or_all(fs)
                        })
                    }
                    "implies" | "iff" => {
                        let a = self.parse_formula()?;
                        let b = self.parse_formula()?;
                        self.close()?;
                        Ok(if head.text == "implies" {
                            crate::formula::implies(a, b)
                        } else {
                            crate::formula::iff(a, b)
                        })
                    }
                    "forall" | "exists" => {
                        let v = self.parse_var()?;
                        let f = self.parse_formula()?;
                        self.close()?;
                        Ok(if head.text == "forall" {
                            crate::formula::forall(v, f)
                        } else {
                            crate::formula::exists(v, f)
                        })
                    }
                    "forall-mem" | "exists-mem" => {
                        let v = self.parse_var()?;
                        let t = self.parse_term(false)?;
                        let f = self.parse_formula()?;
                        self.close()?;
                        Ok(if head.text == "forall-mem" {
                            Formula::ForallMem(v, t, Box::new(f))
                        } else {
                            Formula::ExistsMem(v, t, Box::new(f))
                        })
                    }
                    "E" | "in-L" => {
                        let arg = if self.at_term_start() {
                            EArg::Term(self.parse_term(false)?)
                        } else {
                            EArg::Sent(Box::new(self.parse_formula()?))
                        };
                        self.close()?;
                        Ok(if head.text == "E" { Formula::E(arg) } else { Formula::InL(arg) })
                    }
                    "E-neg" | "in-L-neg" => {
                        let t = self.parse_term(false)?;
                        self.close()?;
                        let arg = EArg::NegTerm(t);
                        Ok(if head.text == "E-neg" {
                            Formula::E(arg)
                        } else {
                            Formula::InL(arg)
                        })
                    }
                    "E-term" | "in-L-lit" => {
                        let name = self.parse_name()?;
                        let args = self.parse_term_list(false)?;
                        let arg = EArg::Lit(name, args);
                        Ok(if head.text == "E-term" {
                            Formula::E(arg)
                        } else {
                            Formula::InL(arg)
                        })
                    }
                    "dfin" => {
                        let t = self.parse_term(false)?;
                        self.close()?;
                        Ok(Formula::Dfin(t))
                    }
                    _ => Err(self.unexpected(&head, "a formula head")),
                }
            }
            _ => Err(self.unexpected(&tok, "a formula")),
        }
    }
}

/// Parses a single formula; trailing input is an error.
pub fn parse(input: &str) -> Result<Formula> {
    let mut p = Parser { toks: tokenize(input), pos: 0, len: input.len() };
    let f = p.parse_formula()?;
    if let Some(t) = p.peek() {
        return Err(Error::Parse {
            offset: t.end,
            msg: format!("trailing input starting with `{}`", t.text),
        });
    }
    Ok(f)
}

/// Parses a single term (applications allowed); trailing input is an error.
pub fn parse_term(input: &str) -> Result<Term> {
    let mut p = Parser { toks: tokenize(input), pos: 0, len: input.len() };
    let t = p.parse_term(true)?;
    if let Some(tok) = p.peek() {
        return Err(Error::Parse {
            offset: tok.end,
            msg: format!("trailing input starting with `{}`", tok.text),
        });
    }
    Ok(t)
}
