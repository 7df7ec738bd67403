//! Tensor products of presented algebras.
//!
//! A [`MultiTensor`] is a linear combination of pure tensors of words, one
//! word per leg. Legs are interpreted against presentations supplied at the
//! call site, so the same container serves coactions (algebra ⊗ group),
//! bundles (base ⊗ total space), and graded calculi.
//!
//! Sign conventions: a leg whose presentation is graded contributes its word
//! degree to the Koszul signs; ungraded legs count as degree zero. Products
//! of pure tensors pick up `(-1)^(sum of |b_i||a_j| over i < j)` for moving
//! the right factors into place, and the involution reverses legs with the
//! matching sign.

use crate::free::{NCPoly, Presentation, Word};
use crate::rewrite::{RewriteError, RewriteSystem};
use crate::scalar::Scalar;
use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

#[derive(Clone, PartialEq, Eq, Default)]
pub struct MultiTensor {
    arity: usize,
    terms: BTreeMap<Vec<Word>, Scalar>,
}

fn sign_degree(pres: &Presentation, w: &Word) -> u64 {
    if pres.is_graded() {
        pres.word_degree(w)
    } else {
        0
    }
}

impl MultiTensor {
    pub fn zero(arity: usize) -> MultiTensor {
        MultiTensor {
            arity,
            terms: BTreeMap::new(),
        }
    }

    /// `1 ⊗ ... ⊗ 1`.
    pub fn unit(arity: usize) -> MultiTensor {
        MultiTensor::pure(vec![Word::one(); arity], Scalar::one())
    }

    pub fn pure(legs: Vec<Word>, c: Scalar) -> MultiTensor {
        let arity = legs.len();
        let mut t = MultiTensor::zero(arity);
        t.add_term(legs, c);
        t
    }

    pub fn arity(&self) -> usize {
        self.arity
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

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<Word>, &Scalar)> {
        self.terms.iter()
    }

    pub fn coeff(&self, legs: &[Word]) -> Scalar {
        self.terms.get(legs).cloned().unwrap_or_default()
    }

    pub fn add_term(&mut self, legs: Vec<Word>, c: Scalar) {
        debug_assert_eq!(legs.len(), self.arity);
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(legs) {
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

    pub fn scale(&self, c: &Scalar) -> MultiTensor {
        if c.is_zero() {
            return MultiTensor::zero(self.arity);
        }
        MultiTensor {
            arity: self.arity,
            terms: self
                .terms
                .iter()
                .map(|(l, a)| (l.clone(), a * c))
                .collect(),
        }
    }

    /// Product with the graded sign rule; `legs` gives the presentation of
    /// each tensor leg.
    pub fn mul(&self, rhs: &MultiTensor, legs: &[&Presentation]) -> MultiTensor {
        assert_eq!(self.arity, rhs.arity);
        assert_eq!(legs.len(), self.arity);
        let mut out = MultiTensor::zero(self.arity);
        for (la, ca) in &self.terms {
            let a_deg: Vec<u64> = la
                .iter()
                .zip(legs)
                .map(|(w, p)| sign_degree(p, w))
                .collect();
            for (lb, cb) in &rhs.terms {
                let mut exp = 0u64;
                for i in 0..self.arity {
                    if a_deg[i] == 0 {
                        continue;
                    }
                    for j in 0..i {
                        exp += sign_degree(legs[j], &lb[j]) * a_deg[i];
                    }
                }
                let mut c = ca * cb;
                if exp % 2 == 1 {
                    c = -c;
                }
                let combined: Vec<Word> = la
                    .iter()
                    .zip(lb.iter())
                    .map(|(u, v)| u.concat(v))
                    .collect();
                out.add_term(combined, c);
            }
        }
        out
    }

    /// The involution: each leg is starred in place and the legs pick up
    /// the pairwise Koszul sign.
    pub fn star(&self, legs: &[&Presentation]) -> MultiTensor {
        assert_eq!(legs.len(), self.arity);
        let mut out = MultiTensor::zero(self.arity);
        for (l, c) in &self.terms {
            let mut coeff = c.conj();
            let degs: Vec<u64> = l
                .iter()
                .zip(legs)
                .map(|(w, p)| sign_degree(p, w))
                .collect();
            let mut exp = 0u64;
            for i in 0..degs.len() {
                for j in (i + 1)..degs.len() {
                    exp += degs[i] * degs[j];
                }
            }
            if exp % 2 == 1 {
                coeff = -coeff;
            }
            let starred: Vec<Word> = l
                .iter()
                .zip(legs)
                .map(|(w, p)| {
                    let (sw, sc) = p.star_word(w);
                    coeff *= sc;
                    sw
                })
                .collect::<Vec<_>>();
            out.add_term(starred, coeff);
        }
        out
    }

    /// Apply a linear map to one leg, word by word.
    pub fn map_leg(&self, leg: usize, f: &mut dyn FnMut(&Word) -> NCPoly) -> MultiTensor {
        let mut out = MultiTensor::zero(self.arity);
        for (l, c) in &self.terms {
            let image = f(&l[leg]);
            for (w, a) in image.iter() {
                let mut nl = l.clone();
                nl[leg] = w.clone();
                out.add_term(nl, c * a);
            }
        }
        out
    }

    /// Replace one leg by a tensor-valued image of the declared arity; the
    /// result has arity `arity - 1 + image_arity`. Used for coproduct splits
    /// (images of arity two) and leg drops (images of arity zero).
    pub fn map_leg_tensor(
        &self,
        leg: usize,
        image_arity: usize,
        f: &mut dyn FnMut(&Word) -> MultiTensor,
    ) -> MultiTensor {
        let new_arity = self.arity - 1 + image_arity;
        let mut out = MultiTensor::zero(new_arity);
        for (l, c) in &self.terms {
            let image = f(&l[leg]);
            assert_eq!(image.arity(), image_arity, "leg image has the wrong arity");
            for (il, ic) in image.iter() {
                let mut nl = Vec::with_capacity(new_arity);
                nl.extend_from_slice(&l[..leg]);
                nl.extend(il.iter().cloned());
                nl.extend_from_slice(&l[leg + 1..]);
                out.add_term(nl, c * ic);
            }
        }
        out
    }

    /// Drop one leg through a scalar functional.
    pub fn contract_leg(&self, leg: usize, f: &mut dyn FnMut(&Word) -> Scalar) -> MultiTensor {
        let mut out = MultiTensor::zero(self.arity - 1);
        for (l, c) in &self.terms {
            let v = f(&l[leg]);
            if v.is_zero() {
                continue;
            }
            let mut nl = Vec::with_capacity(self.arity - 1);
            nl.extend_from_slice(&l[..leg]);
            nl.extend_from_slice(&l[leg + 1..]);
            out.add_term(nl, c * v);
        }
        out
    }

    /// Reduce one leg to normal form.
    pub fn normal_form_leg(&self, leg: usize, rs: &RewriteSystem) -> Result<MultiTensor, RewriteError> {
        let mut err = None;
        let out = self.map_leg(leg, &mut |w| match rs.nf_word(w) {
            Ok(p) => p,
            Err(e) => {
                err = Some(e);
                NCPoly::zero()
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    /// Reduce every leg to normal form.
    pub fn normal_form(&self, systems: &[&RewriteSystem]) -> Result<MultiTensor, RewriteError> {
        assert_eq!(systems.len(), self.arity);
        let mut t = self.clone();
        for (leg, rs) in systems.iter().enumerate() {
            t = t.normal_form_leg(leg, rs)?;
        }
        Ok(t)
    }

    /// One display string per term, for reports: `(coeff) w0 (x) w1 (x) ...`
    /// with the coefficient omitted when it is one.
    pub fn show_terms(&self, legs: &[&Presentation]) -> Vec<String> {
        assert_eq!(legs.len(), self.arity);
        self.terms
            .iter()
            .map(|(l, c)| {
                let words = l
                    .iter()
                    .zip(legs)
                    .map(|(w, p)| p.show_word(w))
                    .collect::<Vec<_>>()
                    .join(" (x) ");
                if c.is_one() {
                    words
                } else {
                    format!("({c}) {words}")
                }
            })
            .collect()
    }
}

impl Add<&MultiTensor> for &MultiTensor {
    type Output = MultiTensor;
    fn add(self, rhs: &MultiTensor) -> MultiTensor {
        assert_eq!(self.arity, rhs.arity);
        let mut out = self.clone();
        for (l, c) in &rhs.terms {
            out.add_term(l.clone(), c.clone());
        }
        out
    }
}

impl Add for MultiTensor {
    type Output = MultiTensor;
    fn add(self, rhs: MultiTensor) -> MultiTensor {
        &self + &rhs
    }
}

impl AddAssign<&MultiTensor> for MultiTensor {
    fn add_assign(&mut self, rhs: &MultiTensor) {
        assert_eq!(self.arity, rhs.arity);
        for (l, c) in &rhs.terms {
            self.add_term(l.clone(), c.clone());
        }
    }
}

impl Sub<&MultiTensor> for &MultiTensor {
    type Output = MultiTensor;
    fn sub(self, rhs: &MultiTensor) -> MultiTensor {
        assert_eq!(self.arity, rhs.arity);
        let mut out = self.clone();
        for (l, c) in &rhs.terms {
            out.add_term(l.clone(), -c);
        }
        out
    }
}

impl Sub for MultiTensor {
    type Output = MultiTensor;
    fn sub(self, rhs: MultiTensor) -> MultiTensor {
        &self - &rhs
    }
}

impl SubAssign<&MultiTensor> for MultiTensor {
    fn sub_assign(&mut self, rhs: &MultiTensor) {
        assert_eq!(self.arity, rhs.arity);
        for (l, c) in &rhs.terms {
            self.add_term(l.clone(), -c);
        }
    }
}

impl Neg for &MultiTensor {
    type Output = MultiTensor;
    fn neg(self) -> MultiTensor {
        MultiTensor {
            arity: self.arity,
            terms: self.terms.iter().map(|(l, c)| (l.clone(), -c)).collect(),
        }
    }
}

impl Neg for MultiTensor {
    type Output = MultiTensor;
    fn neg(self) -> MultiTensor {
        -&self
    }
}

impl std::fmt::Debug for MultiTensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MultiTensor[")?;
        for (i, (l, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})·")?;
            for (j, w) in l.iter().enumerate() {
                if j > 0 {
                    write!(f, "⊗")?;
                }
                write!(f, "{:?}", w.0)?;
            }
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free::{anti_hermitian, hermitian, Presentation};

    fn ungraded_xy() -> Presentation {
        Presentation::new(vec![hermitian("x", 1), hermitian("y", 1)], false).unwrap()
    }

    fn graded_theta() -> Presentation {
        Presentation::new(vec![anti_hermitian("t", 1), hermitian("z", 0)], true).unwrap()
    }

    #[test]
    fn ungraded_product_has_no_signs() {
        let p = ungraded_xy();
        let x = p.word_from_names(&["x"]).unwrap();
        let y = p.word_from_names(&["y"]).unwrap();
        let a = MultiTensor::pure(vec![x.clone(), Word::one()], Scalar::one());
        let b = MultiTensor::pure(vec![Word::one(), y.clone()], Scalar::one());
        let legs = [&p, &p];
        let ab = a.mul(&b, &legs);
        let ba = b.mul(&a, &legs);
        assert_eq!(ab, MultiTensor::pure(vec![x, y], Scalar::one()));
        assert_eq!(ab, ba);
    }

    #[test]
    fn graded_legs_anticommute() {
        let p = graded_theta();
        let t = p.word_from_names(&["t"]).unwrap();
        let a = MultiTensor::pure(vec![t.clone(), Word::one()], Scalar::one());
        let b = MultiTensor::pure(vec![Word::one(), t.clone()], Scalar::one());
        let legs = [&p, &p];
        let ab = a.mul(&b, &legs);
        let ba = b.mul(&a, &legs);
        assert_eq!(ab, MultiTensor::pure(vec![t.clone(), t.clone()], Scalar::one()));
        assert_eq!(ba, -&ab);
        // Grade-zero letters never produce signs.
        let z = p.word_from_names(&["z"]).unwrap();
        let za = MultiTensor::pure(vec![z.clone(), Word::one()], Scalar::one());
        assert_eq!(b.mul(&za, &legs), za.mul(&b, &legs));
    }

    #[test]
    fn star_reverses_with_koszul_sign() {
        let p = graded_theta();
        let t = p.word_from_names(&["t"]).unwrap();
        let tt = MultiTensor::pure(vec![t.clone(), t.clone()], Scalar::one());
        let legs = [&p, &p];
        // (t ⊗ t)* = -(t* ⊗ t*) = -(-t ⊗ -t) = -(t ⊗ t)
        assert_eq!(tt.star(&legs), -&tt);
        // Star is an involution.
        assert_eq!(tt.star(&legs).star(&legs), tt);
    }

    #[test]
    fn leg_maps_and_contraction() {
        let p = ungraded_xy();
        let x = p.word_from_names(&["x"]).unwrap();
        let xx = p.word_from_names(&["x", "x"]).unwrap();
        let t = MultiTensor::pure(vec![xx.clone(), x.clone()], Scalar::q());
        // Group-like split of leg 0: each letter maps to letter ⊗ letter.
        let split = t.map_leg_tensor(0, 2, &mut |w| {
            MultiTensor::pure(vec![w.clone(), w.clone()], Scalar::one())
        });
        assert_eq!(split.arity(), 3);
        assert_eq!(
            split,
            MultiTensor::pure(vec![xx.clone(), xx.clone(), x.clone()], Scalar::q())
        );
        // Counit-style contraction of leg 1 sends every word to 1.
        let dropped = split.contract_leg(1, &mut |_| Scalar::one());
        assert_eq!(dropped, MultiTensor::pure(vec![xx, x], Scalar::q()));
    }

    #[test]
    fn normal_form_acts_per_leg() {
        use crate::free::star_pair;
        use crate::rewrite::RewriteSystem;
        let mut gens = Vec::new();
        let [c, c_star] = star_pair("c", "c*", 1);
        let [a, a_star] = star_pair("a", "a*", 1);
        gens.extend([c, c_star, a, a_star]);
        let mut p = Presentation::new(gens, false).unwrap();
        let rel = p
            .poly(&[(Scalar::one(), &["a", "c"]), (-Scalar::q(), &["c", "a"])])
            .unwrap();
        let rel_star = p.star_poly(&rel);
        p.push_relation(rel).unwrap();
        p.push_relation(rel_star).unwrap();
        let rs = RewriteSystem::complete(p, 3).unwrap();
        let ac = rs.pres().word_from_names(&["a", "c"]).unwrap();
        let ca = rs.pres().word_from_names(&["c", "a"]).unwrap();
        let t = MultiTensor::pure(vec![ac.clone(), ac], Scalar::one());
        let nf = t.normal_form(&[&rs, &rs]).unwrap();
        assert_eq!(nf, MultiTensor::pure(vec![ca.clone(), ca], Scalar::q_pow(2)));
    }
}
