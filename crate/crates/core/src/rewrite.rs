//! Degree-bounded completion of noncommutative rewriting systems.
//!
//! Relations are oriented into rules `lhs -> rhs` along the monomial order of
//! the presentation (degree, then length, then letter ids), with the leading
//! coefficient normalized away. Completion resolves overlap and inclusion
//! ambiguities whose ambiguity word stays within the bound, in the style of
//! the diamond lemma; the outcome is recorded per ambiguity in a certificate.
//! Bounds are measured by [`Presentation::bound_degree`], which counts every
//! letter at least once, so they cap word length even when all grades vanish.
//!
//! When every ambiguity among the final rules lies within the bound and
//! resolves, the system is globally confluent and normal forms are valid in
//! every degree. Otherwise [`RewriteSystem::normal_form`] refuses input
//! beyond the bound instead of returning an unreliable answer.

use crate::free::{GenId, NCPoly, Presentation, Word};
use crate::scalar::Scalar;
use std::collections::VecDeque;
use thiserror::Error;

/// A rewrite rule `lhs -> rhs` with `lhs` strictly larger than every word
/// of `rhs` in the monomial order.
#[derive(Clone, Debug)]
pub struct Rule {
    pub lhs: Word,
    pub rhs: NCPoly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmbiguityKind {
    Overlap,
    Inclusion,
}

/// One critical pair between two rules, and whether it was resolved within
/// the degree bound.
#[derive(Clone, Debug)]
pub struct AmbiguityRecord {
    pub left_rule: usize,
    pub right_rule: usize,
    pub kind: AmbiguityKind,
    pub word: Word,
    pub degree: u64,
    pub resolved: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompletionError {
    /// The ideal contains a nonzero constant, so the algebra collapses.
    #[error("relations generate the unit ideal")]
    UnitIdeal,
    /// A relation's leading word already exceeds the degree bound.
    #[error("relation of degree {degree} exceeds the completion bound {bound}")]
    RelationExceedsBound { degree: u64, bound: u64 },
    /// The relation ideal is not closed under the involution.
    #[error("relation {relation} is not star-closed modulo the other relations")]
    NotStarClosed { relation: usize },
    /// Defensive guard against a runaway completion.
    #[error("completion did not stabilize after {rounds} rounds")]
    Diverged { rounds: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewriteError {
    /// Input beyond the completion bound on a system that is not globally
    /// confluent; the normal form there would not be trustworthy.
    #[error("word of degree {degree} exceeds the completion bound {bound} and the system is not globally confluent")]
    DegreeOverflow { degree: u64, bound: u64 },
}

/// A completed, degree-bounded rewriting system for one presentation.
#[derive(Clone, Debug)]
pub struct RewriteSystem {
    pres: Presentation,
    rules: Vec<Rule>,
    degree_bound: u64,
    certificate: Vec<AmbiguityRecord>,
    globally_confluent: bool,
}

const MAX_ROUNDS: usize = 10_000;

struct Ambiguity {
    left_rule: usize,
    right_rule: usize,
    kind: AmbiguityKind,
    word: Word,
    left_at: usize,
    right_at: usize,
}

fn find_redex(rules: &[Rule], w: &Word) -> Option<(usize, usize)> {
    for pos in 0..w.len() {
        for (ri, r) in rules.iter().enumerate() {
            let l = r.lhs.len();
            if pos + l <= w.len() && w.0[pos..pos + l] == r.lhs.0[..] {
                return Some((pos, ri));
            }
        }
    }
    None
}

fn contains_subword(hay: &Word, needle: &Word) -> bool {
    let l = needle.len();
    l <= hay.len() && (0..=hay.len() - l).any(|p| hay.0[p..p + l] == needle.0[..])
}

/// Full reduction. Each word follows the deterministic leftmost, lowest-rule
/// strategy; the result collects the irreducible terms.
fn reduce_poly(rules: &[Rule], p: &NCPoly) -> NCPoly {
    let mut out = NCPoly::zero();
    let mut stack: Vec<(Word, Scalar)> =
        p.iter().map(|(w, c)| (w.clone(), c.clone())).collect();
    while let Some((w, c)) = stack.pop() {
        match find_redex(rules, &w) {
            None => out.add_term(w, c),
            Some((pos, ri)) => {
                let rule = &rules[ri];
                let pre = &w.0[..pos];
                let post = &w.0[pos + rule.lhs.len()..];
                for (u, a) in rule.rhs.iter() {
                    let mut nw = Vec::with_capacity(pre.len() + u.len() + post.len());
                    nw.extend_from_slice(pre);
                    nw.extend_from_slice(&u.0);
                    nw.extend_from_slice(post);
                    stack.push((Word(nw), &c * a));
                }
            }
        }
    }
    out
}

fn ambiguities(rules: &[Rule]) -> Vec<Ambiguity> {
    let mut out = Vec::new();
    for (i, ri) in rules.iter().enumerate() {
        for (j, rj) in rules.iter().enumerate() {
            let u = &ri.lhs;
            let v = &rj.lhs;
            // Overlap: a proper suffix of u equals a proper prefix of v.
            let kmax = u.len().min(v.len()) - 1;
            for k in 1..=kmax.max(0) {
                if u.0[u.len() - k..] == v.0[..k] {
                    let mut w = u.0.clone();
                    w.extend_from_slice(&v.0[k..]);
                    out.push(Ambiguity {
                        left_rule: i,
                        right_rule: j,
                        kind: AmbiguityKind::Overlap,
                        word: Word(w),
                        left_at: 0,
                        right_at: u.len() - k,
                    });
                }
            }
            // Inclusion: v properly inside u. Interreduction keeps the rule
            // set free of these, but enumerate them anyway.
            if i != j && v.len() < u.len() {
                for pos in 0..=u.len() - v.len() {
                    if u.0[pos..pos + v.len()] == v.0[..] {
                        out.push(Ambiguity {
                            left_rule: i,
                            right_rule: j,
                            kind: AmbiguityKind::Inclusion,
                            word: u.clone(),
                            left_at: 0,
                            right_at: pos,
                        });
                    }
                }
            }
        }
    }
    out
}

fn one_step(rules: &[Rule], w: &Word, rule: usize, at: usize) -> NCPoly {
    let r = &rules[rule];
    let pre = &w.0[..at];
    let post = &w.0[at + r.lhs.len()..];
    let mut out = NCPoly::zero();
    for (u, a) in r.rhs.iter() {
        let mut nw = Vec::with_capacity(pre.len() + u.len() + post.len());
        nw.extend_from_slice(pre);
        nw.extend_from_slice(&u.0);
        nw.extend_from_slice(post);
        out.add_term(Word(nw), a.clone());
    }
    out
}

fn s_poly(rules: &[Rule], amb: &Ambiguity) -> NCPoly {
    let left = one_step(rules, &amb.word, amb.left_rule, amb.left_at);
    let right = one_step(rules, &amb.word, amb.right_rule, amb.right_at);
    left - right
}

impl RewriteSystem {
    /// Orient and complete the relations of `pres` up to `degree_bound`.
    pub fn complete(pres: Presentation, degree_bound: u64) -> Result<RewriteSystem, CompletionError> {
        // Relations must fit inside the bound as written; consequences
        // derived during completion may be oriented freely.
        for r in pres.relations() {
            if let Some((w, _)) = pres.leading_term(r) {
                let degree = pres.bound_degree(w);
                if degree > degree_bound {
                    return Err(CompletionError::RelationExceedsBound {
                        degree,
                        bound: degree_bound,
                    });
                }
            }
        }
        let mut rules: Vec<Rule> = Vec::new();
        let mut pending: VecDeque<NCPoly> = pres.relations().iter().cloned().collect();
        let mut rounds = 0usize;
        loop {
            while let Some(p) = pending.pop_front() {
                let p = reduce_poly(&rules, &p);
                if p.is_zero() {
                    continue;
                }
                let (lw, lc) = {
                    let (w, c) = pres.leading_term(&p).unwrap();
                    (w.clone(), c.clone())
                };
                if lw.is_empty() {
                    return Err(CompletionError::UnitIdeal);
                }
                let mut rest = p;
                rest.add_term(lw.clone(), -&lc);
                let rhs = rest.scale(&(-(Scalar::one() / &lc)));
                // Keep the rule set interreduced: any rule whose left side
                // contains the new one goes back into the queue.
                let mut kept = Vec::new();
                for r in rules.drain(..) {
                    if contains_subword(&r.lhs, &lw) {
                        let mut back = NCPoly::from_word(r.lhs);
                        back -= &r.rhs;
                        pending.push_back(back);
                    } else {
                        kept.push(r);
                    }
                }
                rules = kept;
                rules.push(Rule { lhs: lw, rhs });
                let snapshot = rules.clone();
                for r in rules.iter_mut() {
                    r.rhs = reduce_poly(&snapshot, &r.rhs);
                }
            }
            rounds += 1;
            if rounds > MAX_ROUNDS {
                return Err(CompletionError::Diverged { rounds });
            }
            let mut progressed = false;
            for amb in ambiguities(&rules) {
                if pres.bound_degree(&amb.word) > degree_bound {
                    continue;
                }
                let s = reduce_poly(&rules, &s_poly(&rules, &amb));
                if !s.is_zero() {
                    pending.push_back(s);
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        for (i, r) in pres.relations().iter().enumerate() {
            let sp = pres.star_poly(r);
            if !reduce_poly(&rules, &sp).is_zero() {
                return Err(CompletionError::NotStarClosed { relation: i });
            }
        }
        rules.sort_by(|a, b| pres.cmp_words(&a.lhs, &b.lhs));
        let mut certificate = Vec::new();
        let mut globally_confluent = true;
        for amb in ambiguities(&rules) {
            let degree = pres.bound_degree(&amb.word);
            let resolved = degree <= degree_bound;
            if resolved {
                debug_assert!(
                    reduce_poly(&rules, &s_poly(&rules, &amb)).is_zero(),
                    "unresolved ambiguity after completion fixpoint"
                );
            } else {
                globally_confluent = false;
            }
            certificate.push(AmbiguityRecord {
                left_rule: amb.left_rule,
                right_rule: amb.right_rule,
                kind: amb.kind,
                word: amb.word,
                degree,
                resolved,
            });
        }
        Ok(RewriteSystem {
            pres,
            rules,
            degree_bound,
            certificate,
            globally_confluent,
        })
    }

    pub fn pres(&self) -> &Presentation {
        &self.pres
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn degree_bound(&self) -> u64 {
        self.degree_bound
    }

    pub fn certificate(&self) -> &[AmbiguityRecord] {
        &self.certificate
    }

    /// True when every ambiguity of the final rules was resolved within the
    /// bound; normal forms are then valid in every degree.
    pub fn globally_confluent(&self) -> bool {
        self.globally_confluent
    }

    pub fn normal_form(&self, p: &NCPoly) -> Result<NCPoly, RewriteError> {
        if !self.globally_confluent {
            if let Some(degree) = self.pres.poly_bound_degree(p) {
                if degree > self.degree_bound {
                    return Err(RewriteError::DegreeOverflow {
                        degree,
                        bound: self.degree_bound,
                    });
                }
            }
        }
        Ok(reduce_poly(&self.rules, p))
    }

    pub fn nf_word(&self, w: &Word) -> Result<NCPoly, RewriteError> {
        self.normal_form(&NCPoly::from_word(w.clone()))
    }

    /// Is `p` zero in the presented algebra?
    pub fn is_zero_mod_ideal(&self, p: &NCPoly) -> Result<bool, RewriteError> {
        Ok(self.normal_form(p)?.is_zero())
    }

    fn suffix_reducible(&self, w: &Word) -> bool {
        self.rules.iter().any(|r| {
            let l = r.lhs.len();
            l <= w.len() && w.0[w.len() - l..] == r.lhs.0[..]
        })
    }

    /// All irreducible words of bounding weight at most `max_degree`,
    /// ascending in the monomial order. The weight counts every letter at
    /// least once ([`Presentation::bound_degree`]), so the set is finite
    /// even over grade-zero generators.
    pub fn basis(&self, max_degree: u64) -> Vec<Word> {
        let mut out = vec![Word::one()];
        let mut layer = vec![Word::one()];
        while !layer.is_empty() {
            let mut next = Vec::new();
            for w in &layer {
                for g in 0..self.pres.n_gens() as GenId {
                    let mut v = w.0.clone();
                    v.push(g);
                    let nw = Word(v);
                    if self.pres.bound_degree(&nw) > max_degree {
                        continue;
                    }
                    if self.suffix_reducible(&nw) {
                        continue;
                    }
                    next.push(nw);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out.sort_by(|a, b| self.pres.cmp_words(a, b));
        out
    }

    /// The irreducible words of bounding weight exactly `k`, ascending in
    /// the monomial order: a linear basis of the weight-`k` slice.
    pub fn basis_of_degree(&self, k: u64) -> Vec<Word> {
        let mut words = self.basis(k);
        words.retain(|w| self.pres.bound_degree(w) == k);
        words
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free::{hermitian, star_pair, GeneratorSpec, Presentation};

    // The generator listing fixes the monomial order; putting the c pair
    // first keeps the completed rule set finite.
    fn suq2(bound: u64) -> Result<RewriteSystem, CompletionError> {
        let mut gens = Vec::new();
        let [a, a_star] = star_pair("a", "a*", 1);
        let [c, c_star] = star_pair("c", "c*", 1);
        gens.extend([c, c_star, a, a_star]);
        let mut p = Presentation::new(gens, false).unwrap();
        let q = Scalar::q;
        let one = Scalar::one;
        let rels: Vec<NCPoly> = vec![
            // a c = q c a
            p.poly(&[(one(), &["a", "c"]), (-q(), &["c", "a"])]).unwrap(),
            // a c* = q c* a
            p.poly(&[(one(), &["a", "c*"]), (-q(), &["c*", "a"])]).unwrap(),
            // c c* = c* c
            p.poly(&[(one(), &["c", "c*"]), (-one(), &["c*", "c"])]).unwrap(),
            // c a* = q a* c
            p.poly(&[(one(), &["c", "a*"]), (-q(), &["a*", "c"])]).unwrap(),
            // c* a* = q a* c*
            p.poly(&[(one(), &["c*", "a*"]), (-q(), &["a*", "c*"])]).unwrap(),
            // a* a + c* c = 1
            p.poly(&[
                (one(), &["a*", "a"]),
                (one(), &["c*", "c"]),
                (-one(), &[]),
            ])
            .unwrap(),
            // a a* + q^2 c c* = 1
            p.poly(&[
                (one(), &["a", "a*"]),
                (q() * q(), &["c", "c*"]),
                (-one(), &[]),
            ])
            .unwrap(),
        ];
        for r in rels {
            p.push_relation(r).unwrap();
        }
        RewriteSystem::complete(p, bound)
    }

    #[test]
    fn suq2_completes_and_is_confluent() {
        let rs = suq2(3).unwrap();
        assert!(rs.globally_confluent());
        assert!(!rs.certificate().is_empty());
        assert!(rs.certificate().iter().all(|a| a.resolved));
        for rel in rs.pres().relations() {
            assert!(rs.is_zero_mod_ideal(rel).unwrap());
        }
        // Star closure holds for every rule as well.
        for rule in rs.rules() {
            let mut p = NCPoly::from_word(rule.lhs.clone());
            p -= &rule.rhs;
            let sp = rs.pres().star_poly(&p);
            assert!(rs.is_zero_mod_ideal(&sp).unwrap());
        }
    }

    #[test]
    fn q_commutation_normal_forms() {
        let rs = suq2(3).unwrap();
        let p = rs.pres();
        let acac = NCPoly::from_word(p.word_from_names(&["a", "c", "a", "c"]).unwrap());
        let ccaa = NCPoly::term(
            p.word_from_names(&["c", "c", "a", "a"]).unwrap(),
            Scalar::q_pow(3),
        );
        assert_eq!(rs.normal_form(&acac).unwrap(), ccaa);

        // Global confluence lets normal forms run far beyond the bound.
        let deep = NCPoly::from_word(
            p.word_from_names(&["a", "c", "a", "c", "a", "c", "a", "c", "a", "c"])
                .unwrap(),
        );
        let expect = NCPoly::term(
            p.word_from_names(&["c", "c", "c", "c", "c", "a", "a", "a", "a", "a"])
                .unwrap(),
            Scalar::q_pow(15),
        );
        assert_eq!(rs.normal_form(&deep).unwrap(), expect);
    }

    #[test]
    fn derived_commutator_identity() {
        // a a* - a* a = (1 - q^2) c c* follows from the defining relations.
        let rs = suq2(4).unwrap();
        let p = rs.pres();
        let lhs = p
            .poly(&[
                (Scalar::one(), &["a", "a*"]),
                (-Scalar::one(), &["a*", "a"]),
                (Scalar::q() * Scalar::q() - Scalar::one(), &["c", "c*"]),
            ])
            .unwrap();
        assert!(rs.is_zero_mod_ideal(&lhs).unwrap());
    }

    #[test]
    fn bounded_system_guards_deep_input() {
        let rs = suq2(2).unwrap();
        assert!(!rs.globally_confluent());
        assert!(rs.certificate().iter().any(|a| !a.resolved));
        let p = rs.pres();
        let shallow = NCPoly::from_word(p.word_from_names(&["c", "a"]).unwrap());
        assert!(rs.normal_form(&shallow).is_ok());
        let deep = NCPoly::from_word(p.word_from_names(&["c", "a", "c"]).unwrap());
        assert!(matches!(
            rs.normal_form(&deep),
            Err(RewriteError::DegreeOverflow { degree: 3, bound: 2 })
        ));
    }

    #[test]
    fn basis_counts_grow_like_a_matrix_quantum_group() {
        let rs = suq2(4).unwrap();
        let words = rs.basis(3);
        let count_at = |n: usize| words.iter().filter(|w| w.len() == n).count();
        assert_eq!(count_at(0), 1);
        assert_eq!(count_at(1), 4);
        assert_eq!(count_at(2), 9);
        assert_eq!(count_at(3), 16);
        // Ascending monomial order, starting from the empty word.
        assert_eq!(words[0], Word::one());
        assert!(words.windows(2).all(|p| rs.pres().cmp_words(&p[0], &p[1]).is_lt()));
    }

    #[test]
    fn unit_ideal_detected() {
        let mut p = Presentation::new(vec![hermitian("x", 1)], false).unwrap();
        let xx = p.poly(&[(Scalar::one(), &["x", "x"])]).unwrap();
        p.push_relation(&xx - &NCPoly::one()).unwrap();
        p.push_relation(&xx + &NCPoly::one()).unwrap();
        assert!(matches!(
            RewriteSystem::complete(p, 4),
            Err(CompletionError::UnitIdeal)
        ));
    }

    #[test]
    fn star_closure_enforced() {
        let mut gens = Vec::new();
        gens.extend(star_pair("x", "x*", 1));
        let mut p = Presentation::new(gens, false).unwrap();
        let rel = p
            .poly(&[(Scalar::one(), &["x", "x"]), (-Scalar::one(), &[])])
            .unwrap();
        p.push_relation(rel).unwrap();
        assert!(matches!(
            RewriteSystem::complete(p, 4),
            Err(CompletionError::NotStarClosed { relation: 0 })
        ));
    }

    #[test]
    fn relation_beyond_bound_rejected() {
        let mut p = Presentation::new(vec![hermitian("x", 1)], false).unwrap();
        let rel = p
            .poly(&[(Scalar::one(), &["x", "x", "x"]), (-Scalar::one(), &[])])
            .unwrap();
        p.push_relation(rel).unwrap();
        assert!(matches!(
            RewriteSystem::complete(p, 2),
            Err(CompletionError::RelationExceedsBound { degree: 3, bound: 2 })
        ));
    }

    #[test]
    fn graded_nilpotent_generator() {
        let gens = vec![GeneratorSpec {
            name: "t".into(),
            grade: 1,
            star: None,
            star_coeff: Some(-Scalar::one()),
        }];
        let mut p = Presentation::new(gens, true).unwrap();
        let rel = p.poly(&[(Scalar::one(), &["t", "t"])]).unwrap();
        p.push_relation(rel).unwrap();
        let rs = RewriteSystem::complete(p, 3).unwrap();
        assert!(rs.globally_confluent());
        let words = rs.basis(3);
        assert_eq!(words.len(), 2);
    }

    #[test]
    fn bounded_basis_over_grade_zero() {
        let p = Presentation::new(vec![hermitian("x", 0)], false).unwrap();
        let rs = RewriteSystem::complete(p, 3).unwrap();
        let words = rs.basis(3);
        assert_eq!(words.len(), 4);
        assert_eq!(words.last().unwrap().len(), 3);
    }

    // A grade-zero relation list that is not closed under the involution:
    // completion must stay inside the bound and report the closure failure
    // instead of chasing the missing starred relations.
    #[test]
    fn ungraded_star_gap_terminates() {
        let mut gens = Vec::new();
        gens.extend(star_pair("c", "c*", 0));
        gens.extend(star_pair("a", "a*", 0));
        let mut p = Presentation::new(gens, false).unwrap();
        let q = Scalar::q;
        let one = Scalar::one;
        let rels: Vec<NCPoly> = vec![
            p.poly(&[(one(), &["a", "c"]), (-q(), &["c", "a"])]).unwrap(),
            p.poly(&[(one(), &["a", "c*"]), (-q(), &["c*", "a"])]).unwrap(),
            p.poly(&[(one(), &["c", "c*"]), (-one(), &["c*", "c"])]).unwrap(),
            p.poly(&[(one(), &["a*", "a"]), (one(), &["c*", "c"]), (-one(), &[])])
                .unwrap(),
            p.poly(&[(one(), &["a", "a*"]), (q() * q(), &["c", "c*"]), (-one(), &[])])
                .unwrap(),
        ];
        for r in rels {
            p.push_relation(r).unwrap();
        }
        assert!(matches!(
            RewriteSystem::complete(p, 3),
            Err(CompletionError::NotStarClosed { .. })
        ));
    }

    #[test]
    fn empty_presentation_is_the_scalars() {
        let p = Presentation::new(vec![], false).unwrap();
        let rs = RewriteSystem::complete(p, 5).unwrap();
        assert!(rs.globally_confluent());
        assert_eq!(rs.basis(5), vec![Word::one()]);
    }
}
