//! Line-oriented file formats: constrained-theory documents, structure
//! files, formula lists, condition fragments, and bit strings.
//!
//! All formats skip blank lines and lines starting with `//`. Formula-
//! bearing files cannot use `#` comments because `#N` is a term.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::formula::{print, Formula, Symbol, SymbolKind, Term};
use crate::hf::Hf;
use crate::parse;
use crate::structure::Structure;
use crate::tci::{tuple_width, Constraint, Ext, Schema, Tci};

// ---------------------------------------------------------------------------
// Small lexical helpers

/// Splits a line into whitespace-separated items, keeping bracketed groups
/// (`(...)` tuples, `{...}` set literals) together even when they contain
/// spaces.
fn split_items(line: &str) -> Result<Vec<String>> {
    let mut items = Vec::new();
    let mut cur = String::new();
    let mut depth = 0i32;
    for ch in line.chars() {
        match ch {
            '(' | '{' => {
                depth += 1;
                cur.push(ch);
            }
            ')' | '}' => {
                depth -= 1;
                if depth < 0 {
                    return Err(Error::Invalid(format!("unbalanced bracket in `{line}`")));
                }
                cur.push(ch);
            }
            c if c.is_whitespace() && depth == 0 => {
                if !cur.is_empty() {
                    items.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if depth != 0 {
        return Err(Error::Invalid(format!("unbalanced bracket in `{line}`")));
    }
    if !cur.is_empty() {
        items.push(cur);
    }
    Ok(items)
}

/// A ground value written in the term grammar: `#N`, `nN`, or `{...}`.
fn parse_ground(item: &str) -> Result<Hf> {
    match parse::parse_term(item)? {
        Term::Val(h) => Ok(h),
        other => Err(Error::Invalid(format!("`{other}` is not a ground value"))),
    }
}

/// An extension member: a bare ground value, or a `(v1 v2 ...)` tuple of
/// ground values (encoded as a set-theoretic tuple).
fn parse_member(item: &str) -> Result<Hf> {
    if let Some(inner) = item.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
        let parts = split_items(inner)?
            .iter()
            .map(|p| parse_ground(p))
            .collect::<Result<Vec<_>>>()?;
        if parts.len() < 2 {
            return Err(Error::Invalid(format!(
                "tuple `{item}` needs at least two coordinates"
            )));
        }
        Ok(Hf::tuple(&parts))
    } else {
        parse_ground(item)
    }
}

/// Prints an extension member, unfolding it into `(v1 v2 ...)` form when it
/// is a tuple of the given width.
fn print_member(m: &Hf, width: usize) -> String {
    if width >= 2 {
        if let Some(parts) = m.untuple(width) {
            let inner: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
            return format!("({})", inner.join(" "));
        }
    }
    m.to_string()
}

fn skippable(line: &str) -> bool {
    line.is_empty() || line.starts_with("//")
}

// ---------------------------------------------------------------------------
// Constrained-theory documents

/// A constrained theory as read from a file, plus the optional default
/// working cap declared alongside an unbounded universe (`omega cap=N`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TciDoc {
    pub tci: Tci,
    pub default_cap: Option<u32>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Sigma,
    U,
    Theta,
    Theory,
    Schema,
}

/// Parses the constrained-theory file format. Sections in any order:
///
/// ```text
/// SIGMA:                      // one `name kind arity` per line
/// P relation 1
/// U:                          // extension line, then `mode=subset|exact`
/// omega cap=20
/// mode=exact
/// THETA:                      // one `name mode extension` per line
/// P subset omega
/// THEORY:                     // one formula per line
/// (forall v0 (implies (rel P v0) (rel U v0)))
/// SCHEMA:                     // optional: `chains REL max=N`
/// ```
///
/// Extensions are `omega`, `omega-tuples`, `empty`, or explicit members
/// (bare ground values, or `(v1 v2 ...)` tuples). The universe predicate is
/// named `U` unless the extension line starts with `name=OTHER`.
pub fn parse_tci(text: &str) -> Result<TciDoc> {
    let mut sigma: BTreeMap<String, Symbol> = BTreeMap::new();
    let mut theta: BTreeMap<String, Constraint> = BTreeMap::new();
    let mut theory: Vec<Formula> = Vec::new();
    let mut schema: Option<Schema> = None;
    let mut u_name = "U".to_string();
    let mut u_ext: Option<Ext> = None;
    let mut u_exact: Option<bool> = None;
    let mut default_cap: Option<u32> = None;

    let mut section = Section::None;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |msg: String| Error::Invalid(format!("line {}: {msg}", k + 1));
        if skippable(line) {
            continue;
        }
        match line {
            "SIGMA:" => {
                section = Section::Sigma;
                continue;
            }
            "U:" => {
                section = Section::U;
                continue;
            }
            "THETA:" => {
                section = Section::Theta;
                continue;
            }
            "THEORY:" => {
                section = Section::Theory;
                continue;
            }
            "SCHEMA:" => {
                section = Section::Schema;
                continue;
            }
            _ => {}
        }
        match section {
            Section::None => {
                return Err(err(format!("`{line}` appears before any section header")));
            }
            Section::Sigma => {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(err(format!("expected `name kind arity`, got `{line}`")));
                }
                let kind = match parts[1] {
                    "relation" => SymbolKind::Relation,
                    "function" => SymbolKind::Function,
                    "constant" => SymbolKind::Constant,
                    other => return Err(err(format!("unknown symbol kind `{other}`"))),
                };
                let arity: usize = parts[2]
                    .parse()
                    .map_err(|_| err(format!("bad arity `{}`", parts[2])))?;
                if kind == SymbolKind::Constant && arity != 0 {
                    return Err(err("constants must have arity 0".into()));
                }
                let name = parts[0].to_string();
                sigma.insert(name.clone(), Symbol { name, kind, arity });
            }
            Section::U => {
                if let Some(mode) = line.strip_prefix("mode=") {
                    u_exact = Some(match mode {
                        "subset" => false,
                        "exact" => true,
                        other => return Err(err(format!("unknown mode `{other}`"))),
                    });
                    continue;
                }
                if u_ext.is_some() {
                    return Err(err("the universe extension is declared twice".into()));
                }
                let mut items = split_items(line)?;
                if let Some(first) = items.first() {
                    if let Some(name) = first.strip_prefix("name=") {
                        u_name = name.to_string();
                        items.remove(0);
                    }
                }
                let (ext, cap) = parse_ext_items(&items).map_err(|e| err(e.to_string()))?;
                if matches!(ext, Ext::OmegaTuples(_)) {
                    return Err(err("the universe predicate is unary; `omega-tuples` does not apply".into()));
                }
                u_ext = Some(ext);
                default_cap = cap;
            }
            Section::Theta => {
                let items = split_items(line)?;
                if items.len() < 2 {
                    return Err(err(format!("expected `name mode extension`, got `{line}`")));
                }
                let name = items[0].clone();
                let exact = match items[1].as_str() {
                    "subset" => false,
                    "exact" => true,
                    other => return Err(err(format!("unknown mode `{other}`"))),
                };
                let (ext, _) = parse_ext_items(&items[2..]).map_err(|e| err(e.to_string()))?;
                let ext = match ext {
                    Ext::OmegaTuples(0) => {
                        let sym = sigma.get(&name).ok_or_else(|| {
                            err(format!("`{name}` uses omega-tuples before its SIGMA entry"))
                        })?;
                        Ext::OmegaTuples(tuple_width(sym))
                    }
                    other => other,
                };
                theta.insert(name, Constraint { ext, exact });
            }
            Section::Theory => {
                theory.push(parse::parse(line).map_err(|e| err(e.to_string()))?);
            }
            Section::Schema => {
                let parts: Vec<&str> = line.split_whitespace().collect();
                match parts.as_slice() {
                    ["chains", rel, maxp] => {
                        let max_inst: u32 = maxp
                            .strip_prefix("max=")
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| err(format!("expected `max=N`, got `{maxp}`")))?;
                        schema = Some(Schema::Chains { rel: rel.to_string(), max_inst });
                    }
                    _ => return Err(err(format!("unknown schema `{line}`"))),
                }
            }
        }
    }

    let u_ext = u_ext.ok_or_else(|| Error::Invalid("missing `U:` extension".into()))?;
    let u_exact =
        u_exact.ok_or_else(|| Error::Invalid("missing `mode=` line in the `U:` section".into()))?;
    theta.insert(u_name.clone(), Constraint { ext: u_ext, exact: u_exact });

    for name in sigma.keys() {
        if !theta.contains_key(name) {
            return Err(Error::Invalid(format!("symbol `{name}` has no THETA constraint")));
        }
    }
    for name in theta.keys() {
        if name != &u_name && !sigma.contains_key(name) {
            return Err(Error::Invalid(format!("THETA names `{name}`, which is not in SIGMA")));
        }
    }

    Ok(TciDoc { tci: Tci { sigma, u_name, theta, theory, schema }, default_cap })
}

/// `omega [cap=N]` | `omega-tuples` | `empty` | explicit members. The
/// width of `omega-tuples` is resolved by the caller (0 marks "fill in").
fn parse_ext_items(items: &[String]) -> Result<(Ext, Option<u32>)> {
    match items.first().map(String::as_str) {
        Some("omega") => {
            let mut cap = None;
            for extra in &items[1..] {
                if let Some(n) = extra.strip_prefix("cap=") {
                    cap = Some(
                        n.parse::<u32>()
                            .map_err(|_| Error::Invalid(format!("bad cap `{n}`")))?,
                    );
                } else {
                    return Err(Error::Invalid(format!("unexpected token `{extra}` after omega")));
                }
            }
            Ok((Ext::Omega, cap))
        }
        Some("omega-tuples") => {
            if items.len() > 1 {
                return Err(Error::Invalid(format!("unexpected token `{}`", items[1])));
            }
            Ok((Ext::OmegaTuples(0), None))
        }
        Some("empty") => {
            if items.len() > 1 {
                return Err(Error::Invalid(format!("unexpected token `{}`", items[1])));
            }
            Ok((Ext::Explicit(BTreeSet::new()), None))
        }
        Some(_) => {
            let members = items.iter().map(|i| parse_member(i)).collect::<Result<BTreeSet<_>>>()?;
            Ok((Ext::Explicit(members), None))
        }
        None => Err(Error::Invalid("an extension needs at least one token".into())),
    }
}

fn print_ext(ext: &Ext, width: usize, cap: Option<u32>) -> String {
    match ext {
        Ext::Omega => match cap {
            Some(n) => format!("omega cap={n}"),
            None => "omega".to_string(),
        },
        Ext::OmegaTuples(_) => "omega-tuples".to_string(),
        Ext::Explicit(items) if items.is_empty() => "empty".to_string(),
        Ext::Explicit(items) => {
            let out: Vec<String> = items.iter().map(|m| print_member(m, width)).collect();
            out.join(" ")
        }
    }
}

/// Prints a constrained-theory document in canonical section order.
/// `parse_tci ∘ print_tci` is the identity.
pub fn print_tci(doc: &TciDoc) -> String {
    let t = &doc.tci;
    let mut out = String::new();
    out.push_str("SIGMA:\n");
    for (name, sym) in &t.sigma {
        let kind = match sym.kind {
            SymbolKind::Relation => "relation",
            SymbolKind::Function => "function",
            SymbolKind::Constant => "constant",
        };
        out.push_str(&format!("{name} {kind} {}\n", sym.arity));
    }
    out.push_str("U:\n");
    let u = t.theta.get(&t.u_name).expect("a datum constrains its universe predicate");
    let mut u_line = String::new();
    if t.u_name != "U" {
        u_line.push_str(&format!("name={} ", t.u_name));
    }
    u_line.push_str(&print_ext(&u.ext, 1, doc.default_cap));
    out.push_str(&u_line);
    out.push('\n');
    out.push_str(&format!("mode={}\n", if u.exact { "exact" } else { "subset" }));
    out.push_str("THETA:\n");
    for (name, c) in &t.theta {
        if name == &t.u_name {
            continue;
        }
        let width = t.sigma.get(name).map(tuple_width).unwrap_or(1);
        let mode = if c.exact { "exact" } else { "subset" };
        out.push_str(&format!("{name} {mode} {}\n", print_ext(&c.ext, width, None)));
    }
    out.push_str("THEORY:\n");
    for f in &t.theory {
        out.push_str(&print(f));
        out.push('\n');
    }
    if let Some(Schema::Chains { rel, max_inst }) = &t.schema {
        out.push_str("SCHEMA:\n");
        out.push_str(&format!("chains {rel} max={max_inst}\n"));
    }
    out
}

// ---------------------------------------------------------------------------
// Structure files

/// Parses the structure file format:
///
/// ```text
/// BASE:                       // ground values, any number of lines
/// #0 #1 #3
/// INTERP:                     // `name kind arity : members`
/// P relation 1 : #0 #1
/// F function 1 : (#0 #1) (#1 #0)
/// c constant 0 : #3
/// DECLARE:                    // optional: signature-only symbols
/// Q relation 2
/// ```
///
/// Relation members are tuples of the relation's arity (bare values at
/// arity 1, `()` for the empty tuple at arity 0); function members are
/// graph rows `(args... value)`; a constant takes one value.
pub fn parse_structure(text: &str) -> Result<Structure> {
    let mut a = Structure::default();
    let mut section = "";
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |msg: String| Error::Invalid(format!("line {}: {msg}", k + 1));
        if skippable(line) {
            continue;
        }
        match line {
            "BASE:" => {
                section = "base";
                continue;
            }
            "INTERP:" => {
                section = "interp";
                continue;
            }
            "DECLARE:" => {
                section = "declare";
                continue;
            }
            _ => {}
        }
        match section {
            "base" => {
                for item in split_items(line)? {
                    a.base.insert(parse_ground(&item).map_err(|e| err(e.to_string()))?);
                }
            }
            "interp" => {
                let (head, body) = line
                    .split_once(':')
                    .ok_or_else(|| err(format!("expected `name kind arity : members` in `{line}`")))?;
                let parts: Vec<&str> = head.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(err(format!("expected `name kind arity` before `:` in `{line}`")));
                }
                let name = parts[0];
                let arity: usize = parts[2]
                    .parse()
                    .map_err(|_| err(format!("bad arity `{}`", parts[2])))?;
                let items = split_items(body)?;
                match parts[1] {
                    "relation" => {
                        let tuples = items
                            .iter()
                            .map(|i| parse_tuple_row(i, arity))
                            .collect::<Result<Vec<_>>>()
                            .map_err(|e| err(e.to_string()))?;
                        a.add_relation(name, arity, tuples);
                    }
                    "function" => {
                        let rows = items
                            .iter()
                            .map(|i| parse_tuple_row(i, arity + 1))
                            .collect::<Result<Vec<_>>>()
                            .map_err(|e| err(e.to_string()))?;
                        let graph = rows
                            .into_iter()
                            .map(|mut row| {
                                let v = row.pop().expect("width ≥ 1");
                                (row, v)
                            })
                            .collect();
                        a.add_function(name, arity, graph);
                    }
                    "constant" => {
                        if items.len() != 1 {
                            return Err(err(format!("constant `{name}` takes exactly one value")));
                        }
                        let v = parse_ground(&items[0]).map_err(|e| err(e.to_string()))?;
                        a.add_constant(name, v);
                    }
                    other => return Err(err(format!("unknown symbol kind `{other}`"))),
                }
            }
            "declare" => {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(err(format!("expected `name kind arity`, got `{line}`")));
                }
                let arity: usize = parts[2]
                    .parse()
                    .map_err(|_| err(format!("bad arity `{}`", parts[2])))?;
                let sym = match parts[1] {
                    "relation" => Symbol::relation(parts[0], arity),
                    "function" => Symbol::function(parts[0], arity),
                    "constant" => Symbol::constant(parts[0]),
                    other => return Err(err(format!("unknown symbol kind `{other}`"))),
                };
                a.declare(sym);
            }
            _ => return Err(err(format!("`{line}` appears before any section header"))),
        }
    }
    Ok(a)
}

/// A `(v1 ... vk)` row of exactly `width` ground values; a bare value
/// stands for a width-1 row.
fn parse_tuple_row(item: &str, width: usize) -> Result<Vec<Hf>> {
    let row = if let Some(inner) = item.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
        split_items(inner)?
            .iter()
            .map(|p| parse_ground(p))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![parse_ground(item)?]
    };
    if row.len() != width {
        return Err(Error::Invalid(format!(
            "`{item}` has {} coordinates where {width} were expected",
            row.len()
        )));
    }
    Ok(row)
}

fn print_tuple_row(row: &[Hf]) -> String {
    if row.len() == 1 {
        row[0].to_string()
    } else {
        let inner: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        format!("({})", inner.join(" "))
    }
}

/// Prints a structure file. `parse_structure ∘ print_structure` is the
/// identity.
pub fn print_structure(a: &Structure) -> String {
    let mut out = String::new();
    out.push_str("BASE:\n");
    let base: Vec<String> = a.base.iter().map(|h| h.to_string()).collect();
    out.push_str(&base.join(" "));
    out.push('\n');
    out.push_str("INTERP:\n");
    for (name, tuples) in &a.rels {
        let arity = a.sig.get(name).map(|s| s.arity).unwrap_or_else(|| {
            tuples.iter().next().map(|t| t.len()).unwrap_or(0)
        });
        let rows: Vec<String> = tuples.iter().map(|t| print_tuple_row(t)).collect();
        out.push_str(&format!("{name} relation {arity} : {}\n", rows.join(" ")));
    }
    for (name, graph) in &a.funcs {
        let arity = a.sig.get(name).map(|s| s.arity).unwrap_or_else(|| {
            graph.keys().next().map(|t| t.len()).unwrap_or(0)
        });
        let rows: Vec<String> = graph
            .iter()
            .map(|(args, v)| {
                let mut row = args.clone();
                row.push(v.clone());
                // Function rows always carry parens so the value column is
                // unambiguous even at arity 0.
                let inner: Vec<String> = row.iter().map(|p| p.to_string()).collect();
                format!("({})", inner.join(" "))
            })
            .collect();
        out.push_str(&format!("{name} function {arity} : {}\n", rows.join(" ")));
    }
    for (name, v) in &a.consts {
        out.push_str(&format!("{name} constant 0 : {v}\n"));
    }
    let declared_only: Vec<&Symbol> = a
        .sig
        .values()
        .filter(|s| {
            !a.rels.contains_key(&s.name)
                && !a.funcs.contains_key(&s.name)
                && !a.consts.contains_key(&s.name)
        })
        .collect();
    if !declared_only.is_empty() {
        out.push_str("DECLARE:\n");
        for s in declared_only {
            let kind = match s.kind {
                SymbolKind::Relation => "relation",
                SymbolKind::Function => "function",
                SymbolKind::Constant => "constant",
            };
            out.push_str(&format!("{} {kind} {}\n", s.name, s.arity));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Formula lists, fragments, bits

/// One formula per non-blank, non-`//` line.
pub fn parse_formulas(text: &str) -> Result<Vec<Formula>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if skippable(line) {
            continue;
        }
        out.push(
            parse::parse(line)
                .map_err(|e| Error::Invalid(format!("line {}: {e}", k + 1)))?,
        );
    }
    Ok(out)
}

pub fn print_formulas(fs: &[Formula]) -> String {
    let mut out = String::new();
    for f in fs {
        out.push_str(&print(f));
        out.push('\n');
    }
    out
}

/// A condition or fragment: formulas one per line, as a set.
pub fn parse_fragment(text: &str) -> Result<BTreeSet<Formula>> {
    Ok(parse_formulas(text)?.into_iter().collect())
}

/// One literal per line, in canonical set order.
pub fn print_fragment(x: &BTreeSet<Formula>) -> String {
    let fs: Vec<Formula> = x.iter().cloned().collect();
    print_formulas(&fs)
}

/// A bit string like `0101` (whitespace tolerated between digits).
pub fn parse_bits(text: &str) -> Result<Vec<bool>> {
    let mut out = Vec::new();
    for ch in text.chars() {
        match ch {
            '0' => out.push(false),
            '1' => out.push(true),
            c if c.is_whitespace() => {}
            c => return Err(Error::Invalid(format!("bit strings use 0 and 1, not `{c}`"))),
        }
    }
    Ok(out)
}

pub fn print_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{self, DEFAULT_BUDGET};
    use crate::tci::fixture;

    #[test]
    fn fixture_documents_round_trip() {
        for name in ["countercom", "singleton-pred", "free-pred", "fn-2-2"] {
            let tci = fixture(name).unwrap();
            let doc = TciDoc { tci, default_cap: Some(20) };
            let text = print_tci(&doc);
            let back = parse_tci(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
            assert_eq!(back, doc, "{name} must survive the round trip");
            // Printing is canonical: a second pass is byte-identical.
            assert_eq!(print_tci(&back), text, "{name}");
        }
    }

    #[test]
    fn round_trip_preserves_model_count_at_finite_scope() {
        let tci = fixture("fn-2-2").unwrap();
        let n = certify::enumerate_models(&tci, 10, DEFAULT_BUDGET).unwrap().len();
        let doc = TciDoc { tci, default_cap: None };
        let back = parse_tci(&print_tci(&doc)).unwrap();
        let m = certify::enumerate_models(&back.tci, 10, DEFAULT_BUDGET).unwrap().len();
        assert_eq!(n, m);
        assert_eq!(n, 4);
    }

    #[test]
    fn hand_written_document_parses() {
        let text = "
            // a two-element universe with one free predicate
            SIGMA:
            P relation 1
            U:
            #0 #1
            mode=exact
            THETA:
            P subset #0 #1
            THEORY:
            (implies (rel P #0) (rel P #0))
        ";
        let doc = parse_tci(text).unwrap();
        assert_eq!(doc.tci.sigma.len(), 1);
        assert!(doc.tci.is_finite_scope());
        assert_eq!(doc.tci.theory.len(), 1);
        assert_eq!(doc.default_cap, None);
        let reparsed = parse_tci(&print_tci(&doc)).unwrap();
        assert_eq!(reparsed, doc);
    }

    #[test]
    fn document_errors_are_reported_with_lines() {
        // A symbol without a constraint.
        let text = "SIGMA:\nP relation 1\nU:\nomega\nmode=subset\nTHETA:\nTHEORY:\n";
        let e = parse_tci(text).unwrap_err();
        assert!(e.to_string().contains("no THETA constraint"), "{e}");
        // A constraint naming an undeclared symbol.
        let text = "SIGMA:\nU:\nomega\nmode=subset\nTHETA:\nQ subset omega\nTHEORY:\n";
        let e = parse_tci(text).unwrap_err();
        assert!(e.to_string().contains("not in SIGMA"), "{e}");
        // Tuples never bound the unary universe predicate.
        let text = "SIGMA:\nU:\nomega-tuples\nmode=subset\nTHETA:\nTHEORY:\n";
        assert!(parse_tci(text).is_err());
        // Content before any header.
        let text = "P relation 1\n";
        let e = parse_tci(text).unwrap_err();
        assert!(e.to_string().contains("before any section"), "{e}");
    }

    #[test]
    fn structure_files_round_trip() {
        let mut a = Structure::new([Hf::nat(0), Hf::nat(1), Hf::nat(7)]);
        a.add_relation("P", 1, vec![vec![Hf::nat(0)], vec![Hf::nat(7)]]);
        a.add_relation("R", 2, vec![vec![Hf::nat(0), Hf::nat(1)]]);
        a.add_relation("T", 0, vec![vec![]]);
        a.add_function("F", 1, vec![(vec![Hf::nat(0)], Hf::nat(1))]);
        a.add_constant("c", Hf::nat(7));
        a.declare(Symbol::relation("Q", 3));
        let text = print_structure(&a);
        let back = parse_structure(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(back, a);
        assert_eq!(print_structure(&back), text);
    }

    #[test]
    fn fragments_and_bits_round_trip() {
        let text = "(rel P n7)\n// a comment\n\n(not (rel P #1))\n";
        let x = parse_fragment(text).unwrap();
        assert_eq!(x.len(), 2);
        let printed = print_fragment(&x);
        assert_eq!(parse_fragment(&printed).unwrap(), x);

        assert_eq!(parse_bits("0101").unwrap(), vec![false, true, false, true]);
        assert_eq!(parse_bits("01 1\n0").unwrap(), vec![false, true, true, false]);
        assert!(parse_bits("012").is_err());
        assert_eq!(print_bits(&[true, false, true]), "101");
    }
}
