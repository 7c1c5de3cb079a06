//! The `.rdm` model file format.
//!
//! Line oriented, `#` starts a comment, keywords are case-sensitive:
//!
//! ```text
//! domain side <float>
//! levels <int>                  # finest level index
//! epsilon <float>               # default 0.025
//! transfer_c <float>            # default 20
//! boundary reflecting|periodic  # default reflecting
//! species <Name> D=<float> radius=<float> [count=<int>] [level=<int>]
//! reaction k=<float> : <lhs> -> <rhs>
//! ```
//!
//! `lhs` is `0`, `A` or `A + B`; `rhs` is `0` or `A + B + ...`.

use std::fmt;
use std::fmt::Write as _;

use crate::mesh::Boundary;
use crate::model::{
    is_identifier, Model, ModelLocation, ReactionChannel, Species, DEFAULT_EPSILON, DEFAULT_TRANSFER_C,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A message tied to a 1-based line and column of the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

/// Source text together with its parse result.
#[derive(Debug, Clone)]
pub struct ModelDocument {
    pub source: String,
    /// Present only when no error-severity diagnostic was produced.
    pub model: Option<Model>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn parse_model(text: &str) -> Result<Model, Vec<Diagnostic>> {
    let doc = parse_document(text);
    match doc.model {
        Some(m) => Ok(m),
        None => Err(doc.diagnostics),
    }
}

#[derive(Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    col: usize,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token { text: &line[s..i], col: line[..s].chars().count() + 1 });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    out
}

struct Parser {
    diags: Vec<Diagnostic>,
    line: usize,
}

impl Parser {
    fn error(&mut self, col: usize, message: impl Into<String>) {
        self.diags.push(Diagnostic { line: self.line, column: col, message: message.into(), severity: Severity::Error });
    }

    fn float(&mut self, tok: Token<'_>, text: &str, what: &str) -> Option<f64> {
        match text.parse::<f64>() {
            Ok(v) if !v.is_nan() => Some(v),
            _ => {
                self.error(tok.col, format!("invalid number '{text}' for {what}"));
                None
            }
        }
    }

    fn int<T: std::str::FromStr>(&mut self, tok: Token<'_>, text: &str, what: &str) -> Option<T> {
        match text.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.error(tok.col, format!("invalid integer '{text}' for {what}"));
                None
            }
        }
    }
}

#[derive(Default)]
struct Header {
    side: Option<(f64, usize)>,
    levels: Option<(u8, usize)>,
    epsilon: Option<(f64, usize)>,
    transfer_c: Option<(f64, usize)>,
    boundary: Option<(Boundary, usize)>,
}

pub fn parse_document(text: &str) -> ModelDocument {
    let mut p = Parser { diags: Vec::new(), line: 0 };
    let mut header = Header::default();
    let mut species: Vec<(Species, usize)> = Vec::new();
    let mut channels: Vec<(ReactionChannel, usize)> = Vec::new();
    let mut declared: Vec<String> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        p.line = ln + 1;
        let line = raw.split('#').next().unwrap_or("");
        let toks = tokens(line);
        let Some(&head) = toks.first() else { continue };
        match head.text {
            "domain" => {
                if toks.get(1).map(|t| t.text) != Some("side") || toks.len() != 3 {
                    p.error(head.col, "expected 'domain side <float>'");
                    continue;
                }
                if let Some(v) = p.float(toks[2], toks[2].text, "domain side") {
                    if !(v > 0.0 && v.is_finite()) {
                        p.error(toks[2].col, format!("domain side must be positive, got {v}"));
                    }
                    set_once(&mut p, &mut header.side, v, head, "domain side");
                }
            }
            "levels" | "epsilon" | "transfer_c" | "boundary" => {
                if toks.len() != 2 {
                    p.error(head.col, format!("expected '{} <value>'", head.text));
                    continue;
                }
                let arg = toks[1];
                match head.text {
                    "levels" => {
                        if let Some(v) = p.int::<u8>(arg, arg.text, "levels") {
                            set_once(&mut p, &mut header.levels, v, head, "levels");
                        }
                    }
                    "epsilon" => {
                        if let Some(v) = p.float(arg, arg.text, "epsilon") {
                            if !(v > 0.0) {
                                p.error(arg.col, format!("epsilon must be positive, got {v}"));
                            }
                            set_once(&mut p, &mut header.epsilon, v, head, "epsilon");
                        }
                    }
                    "transfer_c" => {
                        if let Some(v) = p.float(arg, arg.text, "transfer_c") {
                            if !(v > 0.0) {
                                p.error(arg.col, format!("transfer_c must be positive, got {v}"));
                            }
                            set_once(&mut p, &mut header.transfer_c, v, head, "transfer_c");
                        }
                    }
                    _ => {
                        let b = match arg.text {
                            "reflecting" => Boundary::Reflecting,
                            "periodic" => Boundary::Periodic,
                            other => {
                                p.error(arg.col, format!("unknown boundary '{other}' (reflecting|periodic)"));
                                continue;
                            }
                        };
                        set_once(&mut p, &mut header.boundary, b, head, "boundary");
                    }
                }
            }
            "species" => {
                // Names of rejected species still count as declared, so their
                // uses in reactions do not raise follow-on errors.
                if let Some(t) = toks.get(1).filter(|t| is_identifier(t.text)) {
                    declared.push(t.text.to_string());
                }
                if let Some(s) = parse_species(&mut p, &toks) {
                    if let Some((_, first)) = species.iter().find(|(o, _)| o.name == s.name) {
                        let first = *first;
                        p.error(toks[1].col, format!("duplicate species '{}' (first defined on line {first})", s.name));
                    } else {
                        species.push((s, p.line));
                    }
                }
            }
            "reaction" => {
                if let Some(c) = parse_reaction(&mut p, line, &toks) {
                    channels.push((c, p.line));
                }
            }
            other => p.error(head.col, format!("unknown key '{other}'")),
        }
    }

    p.line = text.lines().count().max(1);
    if header.side.is_none() {
        p.error(1, "missing 'domain side' line");
    }
    if header.levels.is_none() {
        p.error(1, "missing 'levels' line");
    }

    // Unknown species in reactions, located at their line.
    for (c, line) in &channels {
        for name in c.reactants.iter().chain(&c.products) {
            if !declared.contains(name) {
                let col = text.lines().nth(line - 1).and_then(|l| find_word(l, name)).unwrap_or(1);
                p.diags.push(Diagnostic {
                    line: *line,
                    column: col,
                    message: format!("unknown species '{name}'"),
                    severity: Severity::Error,
                });
            }
        }
    }

    let has_errors = p.diags.iter().any(|d| d.severity == Severity::Error);
    let model = if has_errors {
        None
    } else {
        let m = Model {
            species: species.iter().map(|(s, _)| s.clone()).collect(),
            channels: channels.iter().map(|(c, _)| c.clone()).collect(),
            side: header.side.map(|v| v.0).expect("checked"),
            lmax: header.levels.map(|v| v.0).expect("checked"),
            epsilon: header.epsilon.map_or(DEFAULT_EPSILON, |v| v.0),
            transfer_c: header.transfer_c.map_or(DEFAULT_TRANSFER_C, |v| v.0),
            boundary: header.boundary.map_or(Boundary::Reflecting, |v| v.0),
        };
        match m.validate() {
            Ok(()) => Some(m),
            Err(ds) => {
                for d in ds {
                    let line = match d.location {
                        ModelLocation::Species(i) => species[i].1,
                        ModelLocation::Channel(i) => channels[i].1,
                        ModelLocation::Domain => header.levels.map_or(1, |v| v.1),
                    };
                    p.diags.push(Diagnostic { line, column: 1, message: d.message, severity: Severity::Error });
                }
                None
            }
        }
    };
    p.diags.sort_by_key(|d| (d.line, d.column));
    ModelDocument { source: text.to_string(), model, diagnostics: p.diags }
}

fn set_once<T>(p: &mut Parser, slot: &mut Option<(T, usize)>, v: T, head: Token<'_>, what: &str) {
    if let Some((_, first)) = slot {
        let first = *first;
        p.error(head.col, format!("'{what}' given twice (first on line {first})"));
    } else {
        *slot = Some((v, p.line));
    }
}

fn find_word(line: &str, word: &str) -> Option<usize> {
    tokens(line).into_iter().find(|t| t.text == word).map(|t| t.col)
}

fn parse_species(p: &mut Parser, toks: &[Token<'_>]) -> Option<Species> {
    let Some(&name) = toks.get(1) else {
        p.error(toks[0].col, "expected 'species <Name> D=<float> radius=<float>'");
        return None;
    };
    let mut ok = true;
    if !is_identifier(name.text) {
        p.error(name.col, format!("invalid species name '{}'", name.text));
        ok = false;
    }
    let mut s = Species::new(name.text, f64::NAN, f64::NAN);
    let (mut seen_d, mut seen_r) = (false, false);
    for &t in &toks[2..] {
        let Some((key, val)) = t.text.split_once('=') else {
            p.error(t.col, format!("expected key=value, got '{}'", t.text));
            ok = false;
            continue;
        };
        match key {
            "D" => match p.float(t, val, "D") {
                Some(v) if v > 0.0 && v.is_finite() => {
                    s.d = v;
                    seen_d = true;
                }
                Some(v) => {
                    p.error(t.col, format!("diffusion constant must be positive, got {v}"));
                    ok = false;
                }
                None => ok = false,
            },
            "radius" => match p.float(t, val, "radius") {
                Some(v) if v >= 0.0 && v.is_finite() => {
                    s.radius = v;
                    seen_r = true;
                }
                Some(v) => {
                    p.error(t.col, format!("reaction radius must be non-negative, got {v}"));
                    ok = false;
                }
                None => ok = false,
            },
            "count" => match p.int::<u64>(t, val, "count") {
                Some(v) => s.initial_count = v,
                None => ok = false,
            },
            "level" => match p.int::<u8>(t, val, "level") {
                Some(v) => s.override_level = Some(v),
                None => ok = false,
            },
            other => {
                p.error(t.col, format!("unknown species attribute '{other}'"));
                ok = false;
            }
        }
    }
    if ok && !seen_d {
        p.error(name.col, format!("species '{}' is missing D=", name.text));
        ok = false;
    }
    if ok && !seen_r {
        p.error(name.col, format!("species '{}' is missing radius=", name.text));
        ok = false;
    }
    ok.then_some(s)
}

fn parse_reaction(p: &mut Parser, line: &str, toks: &[Token<'_>]) -> Option<ReactionChannel> {
    let head = toks[0];
    let Some(&kt) = toks.get(1) else {
        p.error(head.col, "expected 'reaction k=<float> : <lhs> -> <rhs>'");
        return None;
    };
    let k = match kt.text.strip_prefix("k=") {
        Some(v) => match p.float(kt, v, "k")? {
            v if v >= 0.0 && v.is_finite() => v,
            v => {
                p.error(kt.col, format!("rate constant must be non-negative, got {v}"));
                return None;
            }
        },
        None => {
            p.error(kt.col, format!("expected k=<float>, got '{}'", kt.text));
            return None;
        }
    };
    if toks.get(2).map(|t| t.text) != Some(":") {
        let col = toks.get(2).map_or(line.chars().count() + 1, |t| t.col);
        p.error(col, "expected ':' after the rate constant");
        return None;
    }
    let rest = &toks[3..];
    let arrows: Vec<usize> = rest.iter().enumerate().filter(|(_, t)| t.text == "->").map(|(i, _)| i).collect();
    if arrows.len() != 1 {
        let col = match arrows.get(1) {
            Some(&i) => rest[i].col,
            None => rest.first().map_or(toks[2].col, |t| t.col),
        };
        p.error(col, if arrows.is_empty() { "missing '->'" } else { "more than one '->'" });
        return None;
    }
    let lhs = parse_side(p, &rest[..arrows[0]], rest[arrows[0]].col)?;
    let rhs_col = rest.get(arrows[0] + 1).map_or(rest[arrows[0]].col + 2, |t| t.col);
    let rhs = parse_side(p, &rest[arrows[0] + 1..], rhs_col)?;
    if lhs.len() > 2 {
        p.error(rest[0].col, format!("at most two reactants allowed, got {}", lhs.len()));
        return None;
    }
    Some(ReactionChannel { k, reactants: lhs, products: rhs })
}

/// `0` or `Name (+ Name)*`.
fn parse_side(p: &mut Parser, toks: &[Token<'_>], col: usize) -> Option<Vec<String>> {
    match toks {
        [] => {
            p.error(col, "empty reaction side (use 0 for nothing)");
            None
        }
        [t] if t.text == "0" => Some(Vec::new()),
        _ => {
            let mut names = Vec::new();
            for (i, t) in toks.iter().enumerate() {
                let expect_name = i % 2 == 0;
                if expect_name {
                    if !is_identifier(t.text) {
                        p.error(t.col, format!("expected species name, got '{}'", t.text));
                        return None;
                    }
                    names.push(t.text.to_string());
                } else if t.text != "+" {
                    p.error(t.col, format!("expected '+', got '{}'", t.text));
                    return None;
                }
            }
            if toks.len().is_multiple_of(2) {
                p.error(toks[toks.len() - 1].col, "dangling '+'");
                return None;
            }
            Some(names)
        }
    }
}

/// Canonical text form; `parse_model` reads it back to an equal model.
pub fn serialize_model(model: &Model) -> String {
    let mut out = String::new();
    let b = match model.boundary {
        Boundary::Reflecting => "reflecting",
        Boundary::Periodic => "periodic",
    };
    // `{}` on f64 prints the shortest representation that parses back exactly.
    writeln!(out, "domain side {}", model.side).unwrap();
    writeln!(out, "levels {}", model.lmax).unwrap();
    writeln!(out, "epsilon {}", model.epsilon).unwrap();
    writeln!(out, "transfer_c {}", model.transfer_c).unwrap();
    writeln!(out, "boundary {b}").unwrap();
    for s in &model.species {
        write!(out, "species {} D={} radius={}", s.name, s.d, s.radius).unwrap();
        if s.initial_count > 0 {
            write!(out, " count={}", s.initial_count).unwrap();
        }
        if let Some(l) = s.override_level {
            write!(out, " level={l}").unwrap();
        }
        out.push('\n');
    }
    for c in &model.channels {
        writeln!(out, "reaction k={} : {c}", c.k).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CHAIN: &str = "\
domain side 1.0
levels 6
species S1 D=1.0 radius=0.0025 count=100
species S11 D=1.0 radius=0.0025
species S12 D=1.0 radius=0.0025
species S2 D=1.0 radius=0.0025
reaction k=1.0 : S1 -> S11 + S12
reaction k=1.0 : S11 + S12 -> S2
";

    fn errors(text: &str) -> Vec<Diagnostic> {
        parse_model(text).expect_err("should be rejected")
    }

    #[test]
    fn parses_chain() {
        let m = parse_model(CHAIN).unwrap();
        assert_eq!(m.species.len(), 4);
        assert_eq!(m.channels.len(), 2);
        assert_eq!(m.species[0].initial_count, 100);
        assert_eq!(m.epsilon, 0.025);
        assert_eq!(m.transfer_c, 20.0);
        assert_eq!(m.boundary, Boundary::Reflecting);
        assert_eq!(m.channels[1].reactants, vec!["S11", "S12"]);
    }

    #[test]
    fn arity_error_points_at_lhs() {
        let text = format!("{CHAIN}reaction k=1.0 : S1 + S2 + S11 -> S12\n");
        let d = errors(&text);
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].line, d[0].column), (9, 18));
        assert!(d[0].message.contains("at most two"));
    }

    #[test]
    fn negative_diffusion_is_located() {
        let d = errors("domain side 1\nlevels 2\nspecies S1 D=-1 radius=0.1\n");
        assert_eq!(d[0].line, 3);
        assert_eq!(d[0].column, 12);
        assert!(d[0].message.contains("positive"));
    }

    #[test]
    fn collects_all_diagnostics() {
        let d = errors("domain side 1\nlevels 2\nfoo 3\nspecies A D=1 radius=0 colour=red\nreaction k=1 : A => B\n");
        assert_eq!(d.len(), 3, "{d:?}");
        assert_eq!(d.iter().map(|d| d.line).collect::<Vec<_>>(), vec![3, 4, 5]);
    }

    #[test]
    fn zero_sides_and_defaults() {
        let m = parse_model("domain side 2\nlevels 3\nepsilon 0.1\ntransfer_c 1\nboundary periodic\nspecies A D=1 radius=0\nreaction k=5 : 0 -> A\nreaction k=1 : A -> 0\n").unwrap();
        assert_eq!(m.channels[0].order(), 0);
        assert!(m.channels[1].products.is_empty());
        assert_eq!(m.boundary, Boundary::Periodic);
        assert_eq!(m.transfer_c, 1.0);
    }

    #[test]
    fn empty_model_serializes_to_header() {
        let m = Model::new(1.0, 0);
        let text = serialize_model(&m);
        assert_eq!(text.lines().count(), 5);
        assert_eq!(parse_model(&text).unwrap(), m);
    }

    #[test]
    fn serialization_keeps_precision() {
        let m = Model::new(1.0, 6)
            .with_species(Species::new("KKs", 1.0, 0.0024599))
            .with_species(Species::new("KK", 1.0, 0.0024599))
            .with_reaction(ReactionChannel::new(693147.18, &["KKs"], &["KK"]));
        let text = serialize_model(&m);
        assert!(text.contains("k=693147.18 "), "{text}");
        assert_eq!(parse_model(&text).unwrap(), m);
    }

    #[test]
    fn serialize_is_idempotent_after_one_pass() {
        let once = serialize_model(&parse_model(CHAIN).unwrap());
        let twice = serialize_model(&parse_model(&once).unwrap());
        assert_eq!(once, twice);
    }

    fn arb_model() -> impl Strategy<Value = Model> {
        let species = prop::collection::vec((0.01f64..10.0, 0.0f64..0.01, 0u64..500, prop::option::of(0u8..3)), 1..6);
        (species, 0.1f64..10.0, any::<bool>(), 1e-4f64..1.0, 0.5f64..50.0).prop_flat_map(
            |(sp, side, periodic, eps, c)| {
                let n = sp.len();
                let chans = prop::collection::vec(
                    (0.0f64..1e6, prop::collection::vec(0..n, 0..=2), prop::collection::vec(0..n, 0..=3)),
                    0..6,
                );
                (Just((sp, side, periodic, eps, c)), chans)
            },
        )
        .prop_map(|((sp, side, periodic, eps, c), chans)| {
            let mut m = Model::new(side, 3);
            m.epsilon = eps;
            m.transfer_c = c;
            m.boundary = if periodic { Boundary::Periodic } else { Boundary::Reflecting };
            for (i, (d, r, n, l)) in sp.into_iter().enumerate() {
                let mut s = Species::new(format!("S{i}"), d, r).count(n);
                s.override_level = l;
                m.species.push(s);
            }
            for (k, lhs, rhs) in chans {
                m.channels.push(ReactionChannel {
                    // Unimolecular-only chemistry keeps every generated model valid.
                    k,
                    reactants: lhs.into_iter().take(1).map(|i| format!("S{i}")).collect(),
                    products: rhs.into_iter().map(|i| format!("S{i}")).collect(),
                });
            }
            m
        })
    }

    proptest! {
        #[test]
        fn round_trip(m in arb_model()) {
            let text = serialize_model(&m);
            let back = parse_model(&text).map_err(|d| TestCaseError::fail(format!("{d:?}\n{text}")))?;
            prop_assert_eq!(back, m);
        }

        #[test]
        fn rejected_inputs_are_located(lines in prop::collection::vec("[a-z_=0-9 .:+>-]{0,30}", 1..8)) {
            let text = lines.join("\n");
            if let Err(diags) = parse_model(&text) {
                let nlines = text.lines().count().max(1);
                prop_assert!(!diags.is_empty());
                for d in diags {
                    prop_assert!(d.line >= 1 && d.line <= nlines, "{d:?}");
                    prop_assert!(d.column >= 1);
                }
            }
        }
    }
}
