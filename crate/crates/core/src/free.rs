//! Finitely generated *-algebras given by generators and relations.
//!
//! A [`Presentation`] fixes an ordered list of generators, each with a grade
//! and a star partner, plus a list of relations (noncommutative polynomials
//! understood as equal to zero). Words are sequences of generator ids, and
//! [`NCPoly`] is a finite linear combination of words over [`Scalar`].
//!
//! The `graded` flag switches on the sign conventions of graded *-algebras:
//! reversing a product under the involution picks up the usual Koszul sign.
//! Ungraded algebras use the same data with every sign equal to one.

use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use thiserror::Error;

pub type GenId = u32;

/// Input form of a generator: the star partner is referenced by name so the
/// list can be written down in any order (and read from data files).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub name: String,
    #[serde(default)]
    pub grade: u32,
    /// Name of the generator `x*`; defaults to the generator itself.
    #[serde(default)]
    pub star: Option<String>,
    /// Coefficient in `x* = star_coeff * partner`; defaults to 1.
    #[serde(default)]
    pub star_coeff: Option<Scalar>,
}

/// `x* = x`.
pub fn hermitian(name: &str, grade: u32) -> GeneratorSpec {
    GeneratorSpec {
        name: name.to_string(),
        grade,
        star: None,
        star_coeff: None,
    }
}

/// `x* = -x`.
pub fn anti_hermitian(name: &str, grade: u32) -> GeneratorSpec {
    GeneratorSpec {
        name: name.to_string(),
        grade,
        star: None,
        star_coeff: Some(-Scalar::one()),
    }
}

/// A pair `x`, `y` with `x* = y` (and so `y* = x`).
pub fn star_pair(name: &str, star_name: &str, grade: u32) -> [GeneratorSpec; 2] {
    [
        GeneratorSpec {
            name: name.to_string(),
            grade,
            star: Some(star_name.to_string()),
            star_coeff: None,
        },
        GeneratorSpec {
            name: star_name.to_string(),
            grade,
            star: Some(name.to_string()),
            star_coeff: None,
        },
    ]
}

/// Compiled generator: the star partner is resolved to an index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorSymbol {
    pub name: String,
    pub grade: u32,
    pub star_partner: GenId,
    pub star_coeff: Scalar,
}

/// A word in the generators. The derived ordering is structural and only
/// used as a deterministic container key; the monomial order of the
/// rewriting layer is [`Presentation::cmp_words`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(pub Vec<GenId>);

impl Word {
    pub fn one() -> Word {
        Word(Vec::new())
    }

    pub fn single(g: GenId) -> Word {
        Word(vec![g])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }
}

impl From<Vec<GenId>> for Word {
    fn from(v: Vec<GenId>) -> Word {
        Word(v)
    }
}

/// Noncommutative polynomial: a finite `Scalar`-linear combination of words.
/// Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct NCPoly {
    terms: BTreeMap<Word, Scalar>,
}

impl NCPoly {
    pub fn zero() -> NCPoly {
        NCPoly::default()
    }

    pub fn one() -> NCPoly {
        NCPoly::from_word(Word::one())
    }

    pub fn from_word(w: Word) -> NCPoly {
        NCPoly::term(w, Scalar::one())
    }

    pub fn term(w: Word, c: Scalar) -> NCPoly {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(w, c);
        }
        NCPoly { terms }
    }

    pub fn constant(c: Scalar) -> NCPoly {
        NCPoly::term(Word::one(), c)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, &Scalar)> {
        self.terms.iter()
    }

    pub fn coeff(&self, w: &Word) -> Scalar {
        self.terms.get(w).cloned().unwrap_or_default()
    }

    /// The coefficient of the empty word.
    pub fn constant_part(&self) -> Scalar {
        self.coeff(&Word::one())
    }

    pub fn add_term(&mut self, w: Word, c: Scalar) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(w) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &Scalar) -> NCPoly {
        if c.is_zero() {
            return NCPoly::zero();
        }
        NCPoly {
            terms: self
                .terms
                .iter()
                .map(|(w, a)| (w.clone(), a * c))
                .collect(),
        }
    }

    /// `self * w` on the right.
    pub fn mul_word(&self, w: &Word) -> NCPoly {
        NCPoly {
            terms: self
                .terms
                .iter()
                .map(|(u, c)| (u.concat(w), c.clone()))
                .collect(),
        }
    }

    /// `w * self` on the left.
    pub fn word_mul(&self, w: &Word) -> NCPoly {
        NCPoly {
            terms: self
                .terms
                .iter()
                .map(|(u, c)| (w.concat(u), c.clone()))
                .collect(),
        }
    }

    /// Fold every coefficient through `f`, dropping zeros.
    pub fn map_coeffs(&self, mut f: impl FnMut(&Scalar) -> Scalar) -> NCPoly {
        let mut out = NCPoly::zero();
        for (w, c) in &self.terms {
            out.add_term(w.clone(), f(c));
        }
        out
    }
}

impl Add<&NCPoly> for &NCPoly {
    type Output = NCPoly;
    fn add(self, rhs: &NCPoly) -> NCPoly {
        let mut out = self.clone();
        for (w, c) in &rhs.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }
}

impl Add for NCPoly {
    type Output = NCPoly;
    fn add(mut self, rhs: NCPoly) -> NCPoly {
        for (w, c) in rhs.terms {
            self.add_term(w, c);
        }
        self
    }
}

impl AddAssign for NCPoly {
    fn add_assign(&mut self, rhs: NCPoly) {
        for (w, c) in rhs.terms {
            self.add_term(w, c);
        }
    }
}

impl AddAssign<&NCPoly> for NCPoly {
    fn add_assign(&mut self, rhs: &NCPoly) {
        for (w, c) in &rhs.terms {
            self.add_term(w.clone(), c.clone());
        }
    }
}

impl Sub<&NCPoly> for &NCPoly {
    type Output = NCPoly;
    fn sub(self, rhs: &NCPoly) -> NCPoly {
        let mut out = self.clone();
        for (w, c) in &rhs.terms {
            out.add_term(w.clone(), -c);
        }
        out
    }
}

impl Sub for NCPoly {
    type Output = NCPoly;
    fn sub(mut self, rhs: NCPoly) -> NCPoly {
        for (w, c) in rhs.terms {
            self.add_term(w, -c);
        }
        self
    }
}

impl SubAssign<&NCPoly> for NCPoly {
    fn sub_assign(&mut self, rhs: &NCPoly) {
        for (w, c) in &rhs.terms {
            self.add_term(w.clone(), -c);
        }
    }
}

impl Neg for &NCPoly {
    type Output = NCPoly;
    fn neg(self) -> NCPoly {
        NCPoly {
            terms: self
                .terms
                .iter()
                .map(|(w, c)| (w.clone(), -c))
                .collect(),
        }
    }
}

impl Neg for NCPoly {
    type Output = NCPoly;
    fn neg(self) -> NCPoly {
        -&self
    }
}

impl Mul<&NCPoly> for &NCPoly {
    type Output = NCPoly;
    fn mul(self, rhs: &NCPoly) -> NCPoly {
        let mut out = NCPoly::zero();
        for (u, a) in &self.terms {
            for (v, b) in &rhs.terms {
                out.add_term(u.concat(v), a * b);
            }
        }
        out
    }
}

impl Mul for NCPoly {
    type Output = NCPoly;
    fn mul(self, rhs: NCPoly) -> NCPoly {
        &self * &rhs
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PresentationError {
    #[error("generator name may not be empty or contain whitespace: {0:?}")]
    BadName(String),
    #[error("duplicate generator name {0:?}")]
    DuplicateName(String),
    #[error("unknown generator {0:?}")]
    UnknownGenerator(String),
    #[error("star is not an involution on generator {0:?}")]
    StarNotInvolutive(String),
    #[error("relation {index} is not homogeneous (degrees {degrees:?})")]
    InhomogeneousRelation { index: usize, degrees: Vec<u64> },
    #[error("generator id {0} out of range")]
    GenOutOfRange(GenId),
}

/// A *-algebra presentation: generators with grades and star structure,
/// and relations read as "= 0".
#[derive(Clone, Debug)]
pub struct Presentation {
    gens: Vec<GeneratorSymbol>,
    relations: Vec<NCPoly>,
    graded: bool,
}

impl Presentation {
    pub fn new(specs: Vec<GeneratorSpec>, graded: bool) -> Result<Presentation, PresentationError> {
        let mut index = BTreeMap::new();
        for (i, g) in specs.iter().enumerate() {
            if g.name.is_empty() || g.name.chars().any(char::is_whitespace) {
                return Err(PresentationError::BadName(g.name.clone()));
            }
            if index.insert(g.name.clone(), i as GenId).is_some() {
                return Err(PresentationError::DuplicateName(g.name.clone()));
            }
        }
        let mut gens = Vec::with_capacity(specs.len());
        for g in &specs {
            let partner_name = g.star.as_deref().unwrap_or(&g.name);
            let partner = *index
                .get(partner_name)
                .ok_or_else(|| PresentationError::UnknownGenerator(partner_name.to_string()))?;
            gens.push(GeneratorSymbol {
                name: g.name.clone(),
                grade: g.grade,
                star_partner: partner,
                star_coeff: g.star_coeff.clone().unwrap_or_else(Scalar::one),
            });
        }
        for (i, g) in gens.iter().enumerate() {
            let p = &gens[g.star_partner as usize];
            let back = p.star_partner as usize == i;
            let coeff_ok = (&g.star_coeff * &p.star_coeff.conj()).is_one();
            let grade_ok = p.grade == g.grade;
            if !(back && coeff_ok && grade_ok) {
                return Err(PresentationError::StarNotInvolutive(g.name.clone()));
            }
        }
        Ok(Presentation {
            gens,
            relations: Vec::new(),
            graded,
        })
    }

    pub fn push_relation(&mut self, rel: NCPoly) -> Result<(), PresentationError> {
        if self.graded && !rel.is_zero() {
            let degrees: Vec<u64> = rel.iter().map(|(w, _)| self.word_degree(w)).collect();
            if degrees.windows(2).any(|p| p[0] != p[1]) {
                return Err(PresentationError::InhomogeneousRelation {
                    index: self.relations.len(),
                    degrees,
                });
            }
        }
        self.relations.push(rel);
        Ok(())
    }

    pub fn gens(&self) -> &[GeneratorSymbol] {
        &self.gens
    }

    pub fn n_gens(&self) -> usize {
        self.gens.len()
    }

    pub fn gen(&self, id: GenId) -> &GeneratorSymbol {
        &self.gens[id as usize]
    }

    pub fn gen_index(&self, name: &str) -> Option<GenId> {
        self.gens
            .iter()
            .position(|g| g.name == name)
            .map(|i| i as GenId)
    }

    pub fn relations(&self) -> &[NCPoly] {
        &self.relations
    }

    pub fn is_graded(&self) -> bool {
        self.graded
    }

    pub fn word_from_names(&self, names: &[&str]) -> Result<Word, PresentationError> {
        let mut v = Vec::with_capacity(names.len());
        for n in names {
            v.push(
                self.gen_index(n)
                    .ok_or_else(|| PresentationError::UnknownGenerator(n.to_string()))?,
            );
        }
        Ok(Word(v))
    }

    pub fn poly(&self, terms: &[(Scalar, &[&str])]) -> Result<NCPoly, PresentationError> {
        let mut p = NCPoly::zero();
        for (c, names) in terms {
            p.add_term(self.word_from_names(names)?, c.clone());
        }
        Ok(p)
    }

    /// Degree of a word: the sum of the generator grades.
    pub fn word_degree(&self, w: &Word) -> u64 {
        w.0.iter().map(|&g| self.gens[g as usize].grade as u64).sum()
    }

    /// Largest degree among the words of `p`; `None` for the zero polynomial.
    pub fn poly_degree(&self, p: &NCPoly) -> Option<u64> {
        p.iter().map(|(w, _)| self.word_degree(w)).max()
    }

    /// The bounding filtration: every letter weighs at least one, so words
    /// of bounded weight form a finite set even over grade-zero generators.
    /// For presentations whose grades are all positive this coincides with
    /// [`Self::word_degree`]; for all-grade-zero ones it is the word length.
    pub fn bound_degree(&self, w: &Word) -> u64 {
        w.0.iter()
            .map(|&g| (self.gens[g as usize].grade as u64).max(1))
            .sum()
    }

    /// Largest bounding weight among the words of `p`; `None` for zero.
    pub fn poly_bound_degree(&self, p: &NCPoly) -> Option<u64> {
        p.iter().map(|(w, _)| self.bound_degree(w)).max()
    }

    /// The monomial order: degree first, then word length, then the
    /// left-to-right generator ids. Total, multiplicative, and well founded
    /// as long as only degree-zero-free tails repeat (words of bounded
    /// degree and bounded length form a finite set).
    pub fn cmp_words(&self, a: &Word, b: &Word) -> Ordering {
        self.word_degree(a)
            .cmp(&self.word_degree(b))
            .then(a.0.len().cmp(&b.0.len()))
            .then_with(|| a.0.cmp(&b.0))
    }

    /// Leading term of `p` in the monomial order.
    pub fn leading_term<'a>(&self, p: &'a NCPoly) -> Option<(&'a Word, &'a Scalar)> {
        p.iter().max_by(|(u, _), (v, _)| self.cmp_words(u, v))
    }

    /// Star of a word, with the graded reversal sign. Returns the image word
    /// together with the accumulated coefficient.
    pub fn star_word(&self, w: &Word) -> (Word, Scalar) {
        let mut coeff = Scalar::one();
        let mut out = Vec::with_capacity(w.0.len());
        for &g in w.0.iter().rev() {
            let sym = &self.gens[g as usize];
            coeff *= &sym.star_coeff;
            out.push(sym.star_partner);
        }
        if self.graded {
            // (x_1 ... x_n)* = sign * x_n* ... x_1* with the Koszul sign
            // (-1)^(sum of grade products over unordered pairs).
            let grades: Vec<u64> = w.0.iter().map(|&g| self.gens[g as usize].grade as u64).collect();
            let mut exp = 0u64;
            for i in 0..grades.len() {
                for j in (i + 1)..grades.len() {
                    exp += grades[i] * grades[j];
                }
            }
            if exp % 2 == 1 {
                coeff = -coeff;
            }
        }
        (Word(out), coeff)
    }

    /// Star of a polynomial: conjugate-linear on coefficients, reversing
    /// words with the generator star structure.
    pub fn star_poly(&self, p: &NCPoly) -> NCPoly {
        let mut out = NCPoly::zero();
        for (w, c) in p.iter() {
            let (sw, sc) = self.star_word(w);
            out.add_term(sw, c.conj() * sc);
        }
        out
    }

    /// Algebra map defined on generators, extended multiplicatively (or
    /// reversing each word when `antimultiplicative`).
    pub fn substitute(
        &self,
        p: &NCPoly,
        images: &dyn Fn(GenId) -> NCPoly,
        antimultiplicative: bool,
    ) -> NCPoly {
        let mut out = NCPoly::zero();
        for (w, c) in p.iter() {
            let mut acc = NCPoly::constant(c.clone());
            if antimultiplicative {
                for &g in w.0.iter().rev() {
                    acc = &acc * &images(g);
                }
            } else {
                for &g in w.0.iter() {
                    acc = &acc * &images(g);
                }
            }
            out += acc;
        }
        out
    }

    pub fn show_word(&self, w: &Word) -> String {
        if w.is_empty() {
            return "1".to_string();
        }
        w.0.iter()
            .map(|&g| self.gens[g as usize].name.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Human-readable polynomial, terms in descending monomial order.
    pub fn show_poly(&self, p: &NCPoly) -> String {
        if p.is_zero() {
            return "0".to_string();
        }
        let mut terms: Vec<(&Word, &Scalar)> = p.iter().collect();
        terms.sort_by(|(u, _), (v, _)| self.cmp_words(v, u));
        let mut out = String::new();
        for (i, (w, c)) in terms.iter().enumerate() {
            let c_str = c.to_string();
            let (neg, abs) = match c_str.strip_prefix('-') {
                Some(rest) if !rest.contains(" + ") && !rest.contains(" - ") => {
                    (true, rest.to_string())
                }
                _ => (false, c_str),
            };
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let wrapped = if abs.contains(" + ") || abs.contains(" - ") {
                format!("({abs})")
            } else {
                abs
            };
            if w.is_empty() {
                out.push_str(&wrapped);
            } else if wrapped == "1" {
                out.push_str(&self.show_word(w));
            } else {
                out.push_str(&wrapped);
                out.push(' ');
                out.push_str(&self.show_word(w));
            }
        }
        out
    }

    /// One display string per term, descending monomial order. Used for
    /// residual listings in reports.
    pub fn show_terms(&self, p: &NCPoly) -> Vec<String> {
        let mut terms: Vec<(&Word, &Scalar)> = p.iter().collect();
        terms.sort_by(|(u, _), (v, _)| self.cmp_words(v, u));
        terms
            .iter()
            .map(|(w, c)| {
                if w.is_empty() {
                    format!("{c}")
                } else if c.is_one() {
                    self.show_word(w)
                } else {
                    format!("({c}) {}", self.show_word(w))
                }
            })
            .collect()
    }
}

impl fmt::Debug for NCPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NCPoly[")?;
        for (i, (w, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})·{:?}", w.0)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn suq2_like() -> Presentation {
        let mut gens = Vec::new();
        gens.extend(star_pair("a", "a*", 1));
        gens.extend(star_pair("c", "c*", 1));
        Presentation::new(gens, false).unwrap()
    }

    #[test]
    fn star_pairs_resolve() {
        let p = suq2_like();
        assert_eq!(p.n_gens(), 4);
        let a = p.gen_index("a").unwrap();
        let a_star = p.gen_index("a*").unwrap();
        assert_eq!(p.gen(a).star_partner, a_star);
        assert_eq!(p.gen(a_star).star_partner, a);
    }

    #[test]
    fn star_reverses_words() {
        let p = suq2_like();
        let w = p.word_from_names(&["a", "c"]).unwrap();
        let (sw, c) = p.star_word(&w);
        assert_eq!(sw, p.word_from_names(&["c*", "a*"]).unwrap());
        assert!(c.is_one());
    }

    #[test]
    fn star_is_involutive_on_polys() {
        let p = suq2_like();
        let x = p
            .poly(&[
                (Scalar::q(), &["a", "c", "c*"]),
                (Scalar::ratio(-1, 2), &["a*"]),
                (Scalar::one(), &[]),
            ])
            .unwrap();
        assert_eq!(p.star_poly(&p.star_poly(&x)), x);
    }

    #[test]
    fn graded_star_signs() {
        let gens = vec![anti_hermitian("t1", 1), anti_hermitian("t2", 1)];
        let p = Presentation::new(gens, true).unwrap();
        let w = p.word_from_names(&["t1", "t2"]).unwrap();
        let (sw, c) = p.star_word(&w);
        // (t1 t2)* = -(t2*)(t1*) = -(-t2)(-t1) = -t2 t1
        assert_eq!(sw, p.word_from_names(&["t2", "t1"]).unwrap());
        assert_eq!(c, -Scalar::one());
        let x = NCPoly::from_word(w);
        assert_eq!(p.star_poly(&p.star_poly(&x)), x);
    }

    #[test]
    fn bad_star_rejected() {
        let gens = vec![GeneratorSpec {
            name: "x".into(),
            grade: 0,
            star: None,
            star_coeff: Some(Scalar::int(2)),
        }];
        assert!(matches!(
            Presentation::new(gens, false),
            Err(PresentationError::StarNotInvolutive(_))
        ));
    }

    #[test]
    fn free_multiplication() {
        let p = suq2_like();
        let a = NCPoly::from_word(p.word_from_names(&["a"]).unwrap());
        let c = NCPoly::from_word(p.word_from_names(&["c"]).unwrap());
        let sum = &a + &c;
        let sq = &sum * &sum;
        assert_eq!(sq.len(), 4);
        assert_eq!(sq.coeff(&p.word_from_names(&["a", "c"]).unwrap()), Scalar::one());
        let diff = &sq - &(&a * &a);
        assert_eq!(diff.len(), 3);
    }

    #[test]
    fn monomial_order() {
        let gens = vec![hermitian("z", 0), hermitian("t", 1)];
        let p = Presentation::new(gens, true).unwrap();
        let z = p.word_from_names(&["z"]).unwrap();
        let zzz = p.word_from_names(&["z", "z", "z"]).unwrap();
        let t = p.word_from_names(&["t"]).unwrap();
        let zt = p.word_from_names(&["z", "t"]).unwrap();
        assert_eq!(p.cmp_words(&zzz, &t), Ordering::Less);
        assert_eq!(p.cmp_words(&t, &zt), Ordering::Less);
        assert_eq!(p.cmp_words(&z, &zzz), Ordering::Less);
        assert_eq!(p.cmp_words(&t, &t), Ordering::Equal);
    }

    #[test]
    fn homogeneity_enforced_when_graded() {
        let gens = vec![hermitian("t", 1)];
        let mut p = Presentation::new(gens, true).unwrap();
        let bad = p
            .poly(&[(Scalar::one(), &["t"]), (-Scalar::one(), &[])])
            .unwrap();
        assert!(matches!(
            p.push_relation(bad),
            Err(PresentationError::InhomogeneousRelation { .. })
        ));
        let ok = p.poly(&[(Scalar::one(), &["t", "t"])]).unwrap();
        p.push_relation(ok).unwrap();
        assert_eq!(p.relations().len(), 1);
    }

    #[test]
    fn substitution_maps() {
        let p = suq2_like();
        let a = p.gen_index("a").unwrap();
        let c = p.gen_index("c").unwrap();
        let w = NCPoly::from_word(p.word_from_names(&["a", "c"]).unwrap());
        let swap = |g: GenId| -> NCPoly {
            let id = if g == a {
                c
            } else if g == c {
                a
            } else {
                g
            };
            NCPoly::from_word(Word::single(id))
        };
        let m = p.substitute(&w, &swap, false);
        assert_eq!(m, NCPoly::from_word(p.word_from_names(&["c", "a"]).unwrap()));
        let anti = p.substitute(&w, &swap, true);
        assert_eq!(anti, NCPoly::from_word(p.word_from_names(&["a", "c"]).unwrap()));
    }

    #[test]
    fn poly_display() {
        let p = suq2_like();
        let x = p
            .poly(&[
                (Scalar::q(), &["a", "c"]),
                (-Scalar::one(), &["c", "a"]),
                (Scalar::ratio(1, 2), &[]),
            ])
            .unwrap();
        assert_eq!(p.show_poly(&x), "-c a + q a c + 1/2");
        assert_eq!(p.show_poly(&NCPoly::zero()), "0");
    }
}
