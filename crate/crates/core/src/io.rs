//! JSON surface: presentations, group data, classifying maps, calculi.
//!
//! All file formats share one dialect. A relation is a list of terms, each
//! term a pair `[[generator names...], "scalar-string"]`; wherever a single
//! algebra element is wanted (antipode values, matrix entries, classifying
//! maps) a polynomial string like `"a c - q c a"` is used instead, with
//! juxtaposition as the product. Scalar strings are rational functions in
//! `q` accepted by [`Scalar::parse`], e.g. `"(1-q^2)/(1-q^4)"`.
//!
//! Structural errors come back with the JSON pointer of the offending value
//! (syntax errors keep serde's line/column text); string-level errors carry
//! a column inside the string.

use crate::free::{GeneratorSpec, NCPoly, Presentation, Word};
use crate::scalar::{ParseError, Scalar};
use serde::Deserialize;
use std::collections::BTreeMap;
use thiserror::Error;

/// A structural loading error. `pointer` is a JSON pointer into the source
/// document (empty for document-level syntax errors, whose message already
/// names a line and column).
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{}: {message}", if .pointer.is_empty() { "document" } else { .pointer })]
pub struct IoError {
    pub pointer: String,
    pub message: String,
}

impl IoError {
    pub fn at(pointer: impl Into<String>, message: impl Into<String>) -> IoError {
        IoError {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

fn from_json<'a, T: Deserialize<'a>>(src: &'a str) -> Result<T, IoError> {
    serde_json::from_str(src).map_err(|e| IoError::at("", e.to_string()))
}

/// One term of a relation: a word as a list of generator names, and its
/// coefficient as a scalar string.
pub type RawTerm = (Vec<String>, String);

/// A relation is a sum of terms, equated to zero.
pub type RawRelation = Vec<RawTerm>;

/// `{"generators": [...], "relations": [...]}`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresentationFile {
    pub generators: Vec<GeneratorSpec>,
    #[serde(default)]
    pub relations: Vec<RawRelation>,
    /// Graded sign conventions for the involution; off by default.
    #[serde(default)]
    pub graded: bool,
}

/// A presentation file with an optional Hopf stanza.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupFile {
    pub generators: Vec<GeneratorSpec>,
    #[serde(default)]
    pub relations: Vec<RawRelation>,
    pub hopf: HopfStanza,
}

/// Hopf *-algebra data over the presentation, all values as strings in the
/// polynomial dialect. `coproduct` maps a generator to a list of
/// `[left, right]` pairs standing for a sum of tensors.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfStanza {
    pub u: Vec<Vec<String>>,
    pub coproduct: BTreeMap<String, Vec<(String, String)>>,
    pub counit: BTreeMap<String, String>,
    pub antipode: BTreeMap<String, String>,
    /// Smallest verified conjugate-embedding power, when known.
    #[serde(default)]
    pub m: Option<u32>,
}

/// `{"d": ..., "rho": {...}, "gamma": {...}}`. `rho` maps each base-algebra
/// generator to a d x d matrix of polynomial strings over the base; `gamma`
/// maps invariant ids (as printed by the invariant-basis listing) to base
/// elements.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyingMapFile {
    pub d: usize,
    pub rho: BTreeMap<String, Vec<Vec<String>>>,
    pub gamma: BTreeMap<String, String>,
}

/// First-order calculus data over a named group: an invariant basis with its
/// star table, the adjoint corepresentation matrix, and a truncation of the
/// differential envelope.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalculusFile {
    pub name: String,
    pub group: String,
    /// Degree-1 basis of the invariant forms; `grade` must be 1.
    pub theta: Vec<GeneratorSpec>,
    /// s x s matrix of polynomial strings over the group algebra.
    pub corep: Vec<Vec<String>>,
    pub envelope: EnvelopeStanza,
}

/// Envelope truncation: relations over the combined generator set (group
/// generators in degree 0, thetas in degree 1) and a differential table.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeStanza {
    #[serde(default)]
    pub relations: Vec<RawRelation>,
    pub differential: BTreeMap<String, String>,
}

/// A presented graded-differential algebra (base-space calculus).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffAlgebraFile {
    pub generators: Vec<GeneratorSpec>,
    #[serde(default)]
    pub relations: Vec<RawRelation>,
    pub differential: BTreeMap<String, String>,
}

pub fn presentation_file(src: &str) -> Result<PresentationFile, IoError> {
    from_json(src)
}

pub fn group_file(src: &str) -> Result<GroupFile, IoError> {
    from_json(src)
}

pub fn classifying_map_file(src: &str) -> Result<ClassifyingMapFile, IoError> {
    from_json(src)
}

pub fn calculus_file(src: &str) -> Result<CalculusFile, IoError> {
    from_json(src)
}

pub fn diff_algebra_file(src: &str) -> Result<DiffAlgebraFile, IoError> {
    from_json(src)
}

/// Compile the generator list, reporting under `/generators`.
pub fn build_generators(
    specs: &[GeneratorSpec],
    graded: bool,
) -> Result<Presentation, IoError> {
    Presentation::new(specs.to_vec(), graded)
        .map_err(|e| IoError::at("/generators", e.to_string()))
}

/// Compile one raw relation into a polynomial, reporting under `pointer`.
pub fn compile_relation(
    pres: &Presentation,
    rel: &RawRelation,
    pointer: &str,
) -> Result<NCPoly, IoError> {
    let mut p = NCPoly::zero();
    for (j, (names, coeff)) in rel.iter().enumerate() {
        let mut w = Word::one();
        for (k, name) in names.iter().enumerate() {
            match pres.gen_index(name) {
                Some(g) => w.0.push(g),
                None => {
                    return Err(IoError::at(
                        format!("{pointer}/{j}/0/{k}"),
                        format!("unknown generator `{name}`"),
                    ))
                }
            }
        }
        let c = Scalar::parse(coeff).map_err(|e| {
            IoError::at(format!("{pointer}/{j}/1"), format!("column {}: {}", e.col, e.msg))
        })?;
        p.add_term(w, c);
    }
    Ok(p)
}

/// Compile and push every relation, reporting under `/relations/<i>`.
pub fn push_relations(
    pres: &mut Presentation,
    rels: &[RawRelation],
) -> Result<(), IoError> {
    for (i, rel) in rels.iter().enumerate() {
        let ptr = format!("/relations/{i}");
        let p = compile_relation(pres, rel, &ptr)?;
        pres.push_relation(p)
            .map_err(|e| IoError::at(ptr, e.to_string()))?;
    }
    Ok(())
}

/// Load a full presentation: generators, then relations.
pub fn load_presentation(src: &str) -> Result<Presentation, IoError> {
    let file = presentation_file(src)?;
    let mut pres = build_generators(&file.generators, file.graded)?;
    push_relations(&mut pres, &file.relations)?;
    Ok(pres)
}

/// Parse a polynomial string over a presentation's generators.
///
/// Grammar: a sum of terms separated by `+`/`-`; a term is a juxtaposed
/// sequence of factors, each either a generator name (stars attach directly,
/// as in `c*`) or a scalar chunk (integers, `q`, powers, fractions,
/// parenthesized scalar expressions). Scalar chunks may sit anywhere in the
/// term; `*` and `/` bind only inside scalar chunks.
pub fn parse_poly(pres: &Presentation, src: &str) -> Result<NCPoly, ParseError> {
    let s = src.as_bytes();
    let mut i = 0usize;
    let err = |i: usize, msg: &str| ParseError {
        col: i + 1,
        msg: msg.to_string(),
    };
    let skip_ws = |i: &mut usize| {
        while *i < s.len() && s[*i].is_ascii_whitespace() {
            *i += 1;
        }
    };
    skip_ws(&mut i);
    if i == s.len() {
        return Err(err(i, "empty polynomial"));
    }
    let mut poly = NCPoly::zero();
    while i < s.len() {
        // Sign prefix of the term.
        let mut negate = false;
        loop {
            skip_ws(&mut i);
            match s.get(i) {
                Some(b'-') => {
                    negate = !negate;
                    i += 1;
                }
                Some(b'+') => i += 1,
                _ => break,
            }
        }
        skip_ws(&mut i);
        if i == s.len() {
            return Err(err(i, "expected a term"));
        }
        let mut coeff = Scalar::one();
        let mut word = Word::one();
        let mut factors = 0usize;
        // Factors of the term, by juxtaposition.
        loop {
            skip_ws(&mut i);
            let Some(&b) = s.get(i) else { break };
            if b == b'+' || b == b'-' {
                break;
            }
            if b.is_ascii_alphabetic() || b == b'_' {
                let start = i;
                while i < s.len()
                    && (s[i].is_ascii_alphanumeric() || s[i] == b'_')
                {
                    i += 1;
                }
                while i < s.len() && s[i] == b'*' {
                    i += 1;
                }
                let name = std::str::from_utf8(&s[start..i]).unwrap();
                if name == "q" {
                    if pres.gen_index("q").is_some() {
                        return Err(err(
                            start,
                            "generator name `q` shadows the scalar symbol",
                        ));
                    }
                    let end = scan_scalar_chunk(s, start)?;
                    let chunk = std::str::from_utf8(&s[start..end]).unwrap();
                    let c = Scalar::parse(chunk).map_err(|e| ParseError {
                        col: start + e.col,
                        msg: e.msg,
                    })?;
                    coeff = coeff * c;
                    i = end;
                } else if let Some(g) = pres.gen_index(name) {
                    word.0.push(g);
                } else {
                    return Err(err(start, &format!("unknown generator `{name}`")));
                }
                factors += 1;
            } else if b.is_ascii_digit() || b == b'(' {
                let start = i;
                let end = scan_scalar_chunk(s, start)?;
                let chunk = std::str::from_utf8(&s[start..end]).unwrap();
                let c = Scalar::parse(chunk).map_err(|e| ParseError {
                    col: start + e.col,
                    msg: e.msg,
                })?;
                coeff = coeff * c;
                i = end;
                factors += 1;
            } else if b == b'*' {
                return Err(err(
                    i,
                    "stray `*` (stars attach to names; products are juxtaposed)",
                ));
            } else if b == b'/' {
                return Err(err(
                    i,
                    "stray `/` (write the scalar coefficient in front of the word)",
                ));
            } else {
                return Err(err(i, "unexpected character"));
            }
        }
        if factors == 0 {
            return Err(err(i, "expected a term"));
        }
        if negate {
            coeff = -coeff;
        }
        poly.add_term(word, coeff);
    }
    Ok(poly)
}

/// Find the end of a scalar chunk starting at `start`: an atom (digits, the
/// symbol `q`, or a balanced parenthesis group), an optional `^` exponent,
/// then further `*`/`/` atoms as long as a scalar atom follows.
fn scan_scalar_chunk(s: &[u8], start: usize) -> Result<usize, ParseError> {
    let err = |i: usize, msg: &str| ParseError {
        col: i + 1,
        msg: msg.to_string(),
    };
    let skip_ws = |i: &mut usize| {
        while *i < s.len() && s[*i].is_ascii_whitespace() {
            *i += 1;
        }
    };
    fn scan_group(s: &[u8], mut i: usize) -> Result<usize, ParseError> {
        let open = i;
        let mut depth = 0usize;
        while i < s.len() {
            match s[i] {
                b'(' => depth += 1,
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(i + 1);
                    }
                }
                _ => {}
            }
            i += 1;
        }
        Err(ParseError {
            col: open + 1,
            msg: "unbalanced '('".to_string(),
        })
    }
    // Is a scalar atom next at position i? (digits, '(' or the bare symbol q)
    let atom_start = |i: usize| -> bool {
        match s.get(i) {
            Some(b) if b.is_ascii_digit() || *b == b'(' => true,
            Some(b'q') => {
                let next = s.get(i + 1);
                !matches!(next, Some(c) if c.is_ascii_alphanumeric() || *c == b'_' || *c == b'*')
            }
            _ => false,
        }
    };
    let scan_atom = |i: &mut usize| -> Result<(), ParseError> {
        match s.get(*i) {
            Some(b'(') => {
                *i = scan_group(s, *i)?;
                Ok(())
            }
            Some(b'q') => {
                *i += 1;
                Ok(())
            }
            Some(b) if b.is_ascii_digit() => {
                while *i < s.len() && s[*i].is_ascii_digit() {
                    *i += 1;
                }
                Ok(())
            }
            _ => Err(err(*i, "expected a number, 'q', or '('")),
        }
    };
    let mut i = start;
    scan_atom(&mut i)?;
    loop {
        let save = i;
        skip_ws(&mut i);
        match s.get(i) {
            Some(b'^') => {
                i += 1;
                skip_ws(&mut i);
                if s.get(i) == Some(&b'(') {
                    i = scan_group(s, i)?;
                } else {
                    if s.get(i) == Some(&b'-') {
                        i += 1;
                        skip_ws(&mut i);
                    }
                    let d0 = i;
                    while i < s.len() && s[i].is_ascii_digit() {
                        i += 1;
                    }
                    if i == d0 {
                        return Err(err(i, "expected an integer exponent"));
                    }
                }
            }
            Some(b'*') | Some(b'/') => {
                let op = i;
                i += 1;
                skip_ws(&mut i);
                if !atom_start(i) {
                    // Not scalar syntax after all; the operator is stray.
                    i = save;
                    if s[op] == b'*' {
                        break;
                    }
                    return Err(err(
                        op,
                        "expected a scalar after '/' (write the coefficient in front of the word)",
                    ));
                }
                scan_atom(&mut i)?;
            }
            _ => {
                i = save;
                break;
            }
        }
    }
    Ok(i)
}

/// Parse a matrix of polynomial strings, reporting under `pointer`.
pub fn parse_poly_matrix(
    pres: &Presentation,
    rows: &[Vec<String>],
    pointer: &str,
) -> Result<Vec<Vec<NCPoly>>, IoError> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, src)| {
                    parse_poly(pres, src).map_err(|e| {
                        IoError::at(
                            format!("{pointer}/{i}/{j}"),
                            format!("column {}: {}", e.col, e.msg),
                        )
                    })
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free::star_pair;
    use crate::rewrite::RewriteSystem;

    const SUQ2_JSON: &str = r#"{
        "generators": [
            {"name": "c", "star": "c*"},
            {"name": "c*", "star": "c"},
            {"name": "a", "star": "a*"},
            {"name": "a*", "star": "a"}
        ],
        "relations": [
            [[["a", "c"], "1"], [["c", "a"], "-q"]],
            [[["a", "c*"], "1"], [["c*", "a"], "-q"]],
            [[["c", "c*"], "1"], [["c*", "c"], "-1"]],
            [[["c", "a*"], "1"], [["a*", "c"], "-q"]],
            [[["c*", "a*"], "1"], [["a*", "c*"], "-q"]],
            [[["a*", "a"], "1"], [["c*", "c"], "1"], [[], "-1"]],
            [[["a", "a*"], "1"], [["c", "c*"], "q^2"], [[], "-1"]]
        ]
    }"#;

    #[test]
    fn presentation_round_trip() {
        let pres = load_presentation(SUQ2_JSON).unwrap();
        assert_eq!(pres.n_gens(), 4);
        let rs = RewriteSystem::complete(pres, 3).unwrap();
        assert!(rs.globally_confluent());
        let w = rs.pres().word_from_names(&["a", "c"]).unwrap();
        let nf = rs.normal_form(&NCPoly::from_word(w)).unwrap();
        let expect = rs
            .pres()
            .poly(&[(Scalar::q(), &["c", "a"])])
            .unwrap();
        assert_eq!(nf, expect);
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let e = load_presentation("{\n  \"generators\": [,]\n}").unwrap_err();
        assert!(e.pointer.is_empty());
        assert!(e.message.contains("line 2"), "{}", e.message);
        assert!(e.message.contains("column"), "{}", e.message);
    }

    #[test]
    fn semantic_errors_carry_pointers() {
        let bad_gen = r#"{
            "generators": [{"name": "x"}],
            "relations": [[[["x", "y"], "1"]]]
        }"#;
        let e = load_presentation(bad_gen).unwrap_err();
        assert_eq!(e.pointer, "/relations/0/0/0/1");
        assert!(e.message.contains("unknown generator `y`"));

        let bad_scalar = r#"{
            "generators": [{"name": "x"}],
            "relations": [[[["x"], "1/(q-q)"]]]
        }"#;
        let e = load_presentation(bad_scalar).unwrap_err();
        assert_eq!(e.pointer, "/relations/0/0/1");
        assert!(e.message.contains("column"), "{}", e.message);
    }

    fn suq2_pres() -> Presentation {
        let mut gens = Vec::new();
        gens.extend(star_pair("c", "c*", 0));
        gens.extend(star_pair("a", "a*", 0));
        Presentation::new(gens, false).unwrap()
    }

    #[test]
    fn poly_strings_parse() {
        let pres = suq2_pres();
        let p = parse_poly(&pres, "a c - q c a").unwrap();
        let expect = pres
            .poly(&[
                (Scalar::one(), &["a", "c"]),
                (-Scalar::q(), &["c", "a"]),
            ])
            .unwrap();
        assert_eq!(p, expect);

        let p = parse_poly(&pres, "-q c*").unwrap();
        let expect = pres.poly(&[(-Scalar::q(), &["c*"])]).unwrap();
        assert_eq!(p, expect);

        let p = parse_poly(&pres, "(1-q^2)/(1+q^2)").unwrap();
        assert_eq!(
            p,
            NCPoly::constant(Scalar::parse("(1-q^2)/(1+q^2)").unwrap())
        );

        let p = parse_poly(&pres, "q^(1/2) a 1/2 c*").unwrap();
        let expect = pres
            .poly(&[(
                Scalar::q_half_pow(1) * Scalar::ratio(1, 2),
                &["a", "c*"],
            )])
            .unwrap();
        assert_eq!(p, expect);

        assert_eq!(parse_poly(&pres, "0").unwrap(), NCPoly::zero());
        assert_eq!(
            parse_poly(&pres, "a a* + q^2 c c* - 1").unwrap(),
            pres.poly(&[
                (Scalar::one(), &["a", "a*"]),
                (Scalar::q_pow(2), &["c", "c*"]),
                (-Scalar::one(), &[]),
            ])
            .unwrap()
        );
    }

    #[test]
    fn poly_string_errors() {
        let pres = suq2_pres();
        let e = parse_poly(&pres, "a b").unwrap_err();
        assert_eq!(e.col, 3);
        assert!(e.msg.contains("unknown generator `b`"));

        let e = parse_poly(&pres, "a * c").unwrap_err();
        assert!(e.msg.contains("stray `*`"));

        let e = parse_poly(&pres, "a / 2").unwrap_err();
        assert!(e.msg.contains("/"));

        let e = parse_poly(&pres, "").unwrap_err();
        assert!(e.msg.contains("empty"));

        let e = parse_poly(&pres, "q +").unwrap_err();
        assert!(e.msg.contains("expected a term"));

        let e = parse_poly(&pres, "(1-q a").unwrap_err();
        assert!(e.msg.contains("unbalanced"));
    }

    #[test]
    fn group_file_parses() {
        let src = r#"{
            "generators": [{"name": "z", "star": "z*"}, {"name": "z*", "star": "z"}],
            "relations": [
                [[["z", "z*"], "1"], [[], "-1"]],
                [[["z*", "z"], "1"], [[], "-1"]]
            ],
            "hopf": {
                "u": [["z"]],
                "coproduct": {"z": [["z", "z"]], "z*": [["z*", "z*"]]},
                "counit": {"z": "1", "z*": "1"},
                "antipode": {"z": "z*", "z*": "z"}
            }
        }"#;
        let file = group_file(src).unwrap();
        assert_eq!(file.hopf.u.len(), 1);
        assert_eq!(file.hopf.m, None);
        let mut pres = build_generators(&file.generators, false).unwrap();
        push_relations(&mut pres, &file.relations).unwrap();
        assert_eq!(pres.relations().len(), 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e = presentation_file(r#"{"generators": [], "relatoins": []}"#).unwrap_err();
        assert!(e.message.contains("unknown field"), "{}", e.message);
    }
}
