//! Crossproducts of the structure algebra with a base *-algebra.
//!
//! A classifying map packages a *-homomorphism `rho: V -> M_d(V)` together
//! with a unital *-homomorphism `gamma` from the coaction invariants into V,
//! compatible with the transfer maps. From this data a flip operator
//! `Psi: O_d (x) V -> V (x) O_d` is assembled, and a total space is rebuilt
//! as the tensor product of V and O_d relativized over gamma, carrying the
//! twisted product, the star, and the coaction inherited from the fiber.
//!
//! Elements of the relative tensor product are kept as formal sums of pairs
//! (base coefficient, fiber word) and compared after a balanced reduction:
//! fiber words are rewritten so that invariant content migrates into the
//! base leg. Two reduction regimes are used. Over the invariant subalgebra
//! itself (the universal map) gamma is bijective, so the reduction inverts
//! it outright and the canonical form is unique. Over a presented base the
//! reduction eliminates conjugate-block letters through the transported
//! structure identities and then collapses invariant prefixes of plain
//! words; confluence of that pass is checked on samples, never assumed.

use std::cell::RefCell;
use std::collections::BTreeMap;

use thiserror::Error;

use crate::free::{GenId, NCPoly, Presentation, PresentationError, Word};
use crate::hopf::{HopfError, HopfGroupData, IntertwinerC};
use crate::io::{parse_poly, ClassifyingMapFile};
use crate::linalg::{poly_to_vec, Echelon, KeyIndex, SparseVec};
use crate::od::{multi_indices, HatMultiplet, InvariantBasis, OdAlgebra, OdError, SMatrix};
use crate::report::Report;
use crate::rewrite::{CompletionError, RewriteError, RewriteSystem};
use crate::sample::Sampler;
use crate::scalar::Scalar;
use crate::tensor::MultiTensor;

#[derive(Debug, Error)]
pub enum CrossError {
    #[error(transparent)]
    Od(#[from] OdError),
    #[error(transparent)]
    Hopf(#[from] HopfError),
    #[error(transparent)]
    Presentation(#[from] PresentationError),
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error("relation {relation} of the base is not star-closed")]
    BaseNotStarClosed { relation: usize },
    #[error("candidate multiplet is not equivariant at entry ({k},{i})")]
    NotEquivariant { k: usize, i: usize },
    #[error("candidate multiplet is not an isometry at column pair ({i},{j})")]
    NotIsometric { i: usize, j: usize },
    #[error("rho image of generator {gen} at ({k},{l}) does not lie in the base")]
    RhoNotBase { gen: String, k: usize, l: usize },
    #[error("gamma image of invariant {index} does not lie in the base")]
    GammaNotBase { index: usize },
    #[error("element is outside the tabulated invariant span: {element}")]
    GammaOutOfSpan { element: String },
    #[error("balanced reduction left its degree window ({window}): {element}")]
    WindowExceeded { element: String, window: u64 },
    #[error("balanced relations do not close on the invariant span: {witness}")]
    BalanceIncomplete { witness: String },
    #[error("classifying map file is malformed: {message}")]
    MapFile { message: String },
}

fn decode(od: &OdAlgebra, g: GenId) -> (bool, usize, usize) {
    let n = od.n();
    let dn = od.d() * n;
    let g = g as usize;
    if g < dn {
        (false, g / n, g % n)
    } else {
        let h = g - dn;
        (true, h / n, h % n)
    }
}

fn star_count(od: &OdAlgebra, w: &Word) -> usize {
    let dn = od.d() * od.n();
    w.0.iter().filter(|&&g| (g as usize) >= dn).count()
}

/// A presented base *-algebra with a certified completion. The relation
/// ideal must be star-closed so that the star descends.
pub struct QuantumSpaceV {
    rs: RewriteSystem,
}

impl QuantumSpaceV {
    pub fn new(pres: Presentation, bound: u64) -> Result<QuantumSpaceV, CrossError> {
        let relations: Vec<NCPoly> = pres.relations().to_vec();
        let stars: Vec<NCPoly> = relations.iter().map(|r| pres.star_poly(r)).collect();
        let rs = RewriteSystem::complete(pres, bound)?;
        for (idx, s) in stars.iter().enumerate() {
            if !rs.is_zero_mod_ideal(s)? {
                return Err(CrossError::BaseNotStarClosed { relation: idx });
            }
        }
        Ok(QuantumSpaceV { rs })
    }

    pub fn rs(&self) -> &RewriteSystem {
        &self.rs
    }

    pub fn pres(&self) -> &Presentation {
        self.rs.pres()
    }
}

/// Element of the relative tensor product: a formal sum of fiber words with
/// base coefficients, written `sum_w f_w (x) w`. Coefficients are kept in
/// base normal form and zero terms are pruned.
#[derive(Clone, PartialEq)]
pub struct BElem {
    terms: BTreeMap<Word, NCPoly>,
}

impl BElem {
    pub fn zero() -> BElem {
        BElem {
            terms: BTreeMap::new(),
        }
    }

    /// `f (x) 1`.
    pub fn base(f: NCPoly) -> BElem {
        let mut e = BElem::zero();
        e.add_at(Word::one(), f);
        e
    }

    pub fn one() -> BElem {
        BElem::base(NCPoly::one())
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

    pub fn iter(&self) -> impl Iterator<Item = (&Word, &NCPoly)> {
        self.terms.iter()
    }

    pub fn add_at(&mut self, w: Word, f: NCPoly) {
        if f.is_zero() {
            return;
        }
        let slot = self.terms.entry(w.clone()).or_insert_with(NCPoly::zero);
        *slot += f;
        if slot.is_zero() {
            self.terms.remove(&w);
        }
    }

    pub fn add(&self, other: &BElem) -> BElem {
        let mut out = self.clone();
        for (w, f) in other.iter() {
            out.add_at(w.clone(), f.clone());
        }
        out
    }

    pub fn sub(&self, other: &BElem) -> BElem {
        let mut out = self.clone();
        for (w, f) in other.iter() {
            out.add_at(w.clone(), f.scale(&-Scalar::one()));
        }
        out
    }

    pub fn scale(&self, c: &Scalar) -> BElem {
        if c.is_zero() {
            return BElem::zero();
        }
        let mut out = BElem::zero();
        for (w, f) in self.iter() {
            out.add_at(w.clone(), f.scale(c));
        }
        out
    }
}

/// How the base algebra is realized.
enum BaseKind<'a> {
    /// V is the invariant subalgebra of the fiber itself; rho is the family
    /// of transfer maps and gamma is the identity table.
    Universal,
    /// V is an independently presented algebra; rho is tabulated on the
    /// generators of V and extended multiplicatively.
    Presented {
        v: &'a QuantumSpaceV,
        mats: Vec<Vec<Vec<NCPoly>>>,
        word_mats: RefCell<BTreeMap<Word, Vec<Vec<NCPoly>>>>,
    },
}

/// Classifying data for a bundle over the base: the pair (rho, gamma)
/// together with the invariant basis serving as gamma's tabulated domain.
pub struct ClassifyingMap<'a> {
    od: &'a OdAlgebra,
    inv: &'a InvariantBasis,
    d: usize,
    kind: BaseKind<'a>,
    anchors: Vec<NCPoly>,
    gamma: Vec<NCPoly>,
    cols: BTreeMap<Word, usize>,
    coords: Echelon,
}

fn anchor_coords(anchors: &[NCPoly]) -> (BTreeMap<Word, usize>, Echelon) {
    let mut ix: KeyIndex<Word> = KeyIndex::new();
    let mut ech = Echelon::with_tracking();
    for a in anchors {
        let v = poly_to_vec(&mut ix, a);
        let fresh = ech.insert(v);
        debug_assert!(fresh, "anchor list must be linearly independent");
    }
    let mut cols = BTreeMap::new();
    for i in 0..ix.len() {
        cols.insert(ix.key(i).clone(), i);
    }
    (cols, ech)
}

impl<'a> ClassifyingMap<'a> {
    /// The universal map of the fiber over its own invariant subalgebra:
    /// rho is the transfer family and gamma the identity.
    pub fn universal(
        od: &'a OdAlgebra,
        inv: &'a InvariantBasis,
    ) -> Result<ClassifyingMap<'a>, CrossError> {
        // Equivariance of the defining multiplet against its own coaction.
        for k in 0..od.d() {
            for i in 0..od.n() {
                let mut expected = MultiTensor::zero(2);
                for j in 0..od.n() {
                    for (uw, uc) in od.group().u_entry(j, i).iter() {
                        expected.add_term(
                            vec![Word::single(od.plain_gen(k, j)), uw.clone()],
                            uc.clone(),
                        );
                    }
                }
                let got = od.coaction_gen(od.plain_gen(k, i)).clone();
                let mut diff = got;
                for (legs, c) in expected.iter() {
                    diff.add_term(legs.clone(), -c);
                }
                if !diff.is_zero() {
                    return Err(CrossError::NotEquivariant { k, i });
                }
            }
        }
        // Isometry columns.
        for i in 0..od.n() {
            for j in 0..od.n() {
                let mut acc = NCPoly::zero();
                for k in 0..od.d() {
                    let w = Word(vec![od.star_gen(k, i), od.plain_gen(k, j)]);
                    acc += NCPoly::from_word(w);
                }
                if i == j {
                    acc += NCPoly::constant(-Scalar::one());
                }
                if !od.rs().normal_form(&acc)?.is_zero() {
                    return Err(CrossError::NotIsometric { i, j });
                }
            }
        }
        let anchors: Vec<NCPoly> = inv
            .elements_up_to(inv.max_degree())
            .into_iter()
            .cloned()
            .collect();
        let gamma = anchors.clone();
        let (cols, coords) = anchor_coords(&anchors);
        Ok(ClassifyingMap {
            od,
            inv,
            d: od.d(),
            kind: BaseKind::Universal,
            anchors,
            gamma,
            cols,
            coords,
        })
    }

    pub fn od(&self) -> &OdAlgebra {
        self.od
    }

    pub fn inv(&self) -> &InvariantBasis {
        self.inv
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_universal(&self) -> bool {
        matches!(self.kind, BaseKind::Universal)
    }

    pub fn v_pres(&self) -> &Presentation {
        match &self.kind {
            BaseKind::Universal => self.od.pres(),
            BaseKind::Presented { v, .. } => v.pres(),
        }
    }

    pub fn v_nf(&self, p: &NCPoly) -> Result<NCPoly, CrossError> {
        let rs = match &self.kind {
            BaseKind::Universal => self.od.rs(),
            BaseKind::Presented { v, .. } => v.rs(),
        };
        Ok(rs.normal_form(p)?)
    }

    pub fn v_mul(&self, a: &NCPoly, b: &NCPoly) -> Result<NCPoly, CrossError> {
        self.v_nf(&(a * b))
    }

    pub fn v_star(&self, a: &NCPoly) -> Result<NCPoly, CrossError> {
        self.v_nf(&self.v_pres().star_poly(a))
    }

    /// Base elements spanning the degree filtration, used by sweeps.
    pub fn v_basis(&self, degree: u64) -> Vec<NCPoly> {
        match &self.kind {
            BaseKind::Universal => {
                let cap = degree.min(self.inv.max_degree());
                self.inv
                    .elements_up_to(cap)
                    .into_iter()
                    .cloned()
                    .collect()
            }
            BaseKind::Presented { v, .. } => v
                .rs()
                .basis(degree)
                .into_iter()
                .map(NCPoly::from_word)
                .collect(),
        }
    }

    fn word_matrix(&self, w: &Word) -> Result<Vec<Vec<NCPoly>>, CrossError> {
        let (v, mats, cache) = match &self.kind {
            BaseKind::Presented {
                v,
                mats,
                word_mats,
            } => (v, mats, word_mats),
            BaseKind::Universal => unreachable!("word matrices exist only over a presented base"),
        };
        if let Some(m) = cache.borrow().get(w) {
            return Ok(m.clone());
        }
        let d = self.d;
        let mut acc: Vec<Vec<NCPoly>> = (0..d)
            .map(|k| {
                (0..d)
                    .map(|l| {
                        if k == l {
                            NCPoly::one()
                        } else {
                            NCPoly::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        for &g in w.0.iter() {
            let gm = &mats[g as usize];
            let mut next: Vec<Vec<NCPoly>> = vec![vec![NCPoly::zero(); d]; d];
            for k in 0..d {
                for l in 0..d {
                    let mut e = NCPoly::zero();
                    for r in 0..d {
                        if acc[k][r].is_zero() || gm[r][l].is_zero() {
                            continue;
                        }
                        e += &acc[k][r] * &gm[r][l];
                    }
                    next[k][l] = v.rs().normal_form(&e)?;
                }
            }
            acc = next;
        }
        cache.borrow_mut().insert(w.clone(), acc.clone());
        Ok(acc)
    }

    pub fn rho(&self, k: usize, l: usize, f: &NCPoly) -> Result<NCPoly, CrossError> {
        match &self.kind {
            BaseKind::Universal => Ok(self.od.tau(k, l, f)?),
            BaseKind::Presented { v, .. } => {
                let mut out = NCPoly::zero();
                for (w, c) in f.iter() {
                    let m = self.word_matrix(w)?;
                    out += m[k][l].scale(c);
                }
                Ok(v.rs().normal_form(&out)?)
            }
        }
    }

    /// Iterated rho over row and column multi-indices, innermost pair last.
    pub fn rho_iter(
        &self,
        rows: &[usize],
        cols: &[usize],
        f: &NCPoly,
    ) -> Result<NCPoly, CrossError> {
        assert_eq!(rows.len(), cols.len());
        let mut acc = f.clone();
        for t in (0..rows.len()).rev() {
            acc = self.rho(rows[t], cols[t], &acc)?;
            if acc.is_zero() {
                return Ok(acc);
            }
        }
        Ok(acc)
    }

    /// gamma extended linearly from the tabulated invariant basis.
    pub fn gamma(&self, x: &NCPoly) -> Result<NCPoly, CrossError> {
        let xn = self.od.rs().normal_form(x)?;
        let mut vec = SparseVec::new();
        for (w, c) in xn.iter() {
            let col = self
                .cols
                .get(w)
                .copied()
                .ok_or_else(|| CrossError::GammaOutOfSpan {
                    element: self.od.pres().show_poly(&xn),
                })?;
            vec.insert(col, c.clone());
        }
        let combo = self
            .coords
            .express(&vec)
            .ok_or_else(|| CrossError::GammaOutOfSpan {
                element: self.od.pres().show_poly(&xn),
            })?;
        let mut out = NCPoly::zero();
        for (idx, c) in combo.iter() {
            out += self.gamma[*idx].scale(c);
        }
        self.v_nf(&out)
    }

    pub fn anchors(&self) -> &[NCPoly] {
        &self.anchors
    }

    pub fn gamma_entry(&self, idx: usize) -> &NCPoly {
        &self.gamma[idx]
    }

    /// Scale one tabulated gamma value. This deliberately damages the map;
    /// it exists so the verification suites can demonstrate sensitivity.
    pub fn perturb_gamma(&mut self, idx: usize, factor: &Scalar) {
        self.gamma[idx] = self.gamma[idx].scale(factor);
    }

    fn show_b(&self, e: &BElem) -> Vec<String> {
        e.iter()
            .map(|(w, f)| {
                format!(
                    "({}) (x) {}",
                    self.v_pres().show_poly(f),
                    self.od.pres().show_word(w)
                )
            })
            .collect()
    }
}

/// Stable labels for the tabulated invariant basis, used by map files.
pub fn invariant_labels(inv: &InvariantBasis) -> Vec<String> {
    let mut out = Vec::new();
    for k in 0..=inv.max_degree() {
        for j in 0..inv.level(k).len() {
            out.push(format!("inv{k}.{j}"));
        }
    }
    out
}

fn mt_nf(
    t: &MultiTensor,
    v: &QuantumSpaceV,
    g: &HopfGroupData,
) -> Result<MultiTensor, RewriteError> {
    t.normal_form(&[v.rs(), g.rs()])
}

fn mt_sub(a: &MultiTensor, b: &MultiTensor) -> MultiTensor {
    let mut out = a.clone();
    for (legs, c) in b.iter() {
        out.add_term(legs.clone(), -c);
    }
    out
}

/// Base component of a tensor all of whose fiber legs are trivial; None if
/// some term carries a nonempty second leg.
fn base_component(t: &MultiTensor) -> Option<NCPoly> {
    let mut out = NCPoly::zero();
    for (legs, c) in t.iter() {
        if !legs[1].is_empty() {
            return None;
        }
        out.add_term(legs[0].clone(), c.clone());
    }
    Some(out)
}

/// Read a classifying map off a candidate multiplet `b` inside the product
/// of the base with the group algebra. The multiplet must be equivariant
/// (each column transforms by the fundamental matrix) and an isometry;
/// rho and gamma are then tabulated by conjugation and substitution.
pub fn extract_classifying_map<'a>(
    od: &'a OdAlgebra,
    inv: &'a InvariantBasis,
    v: &'a QuantumSpaceV,
    b: &[Vec<MultiTensor>],
) -> Result<ClassifyingMap<'a>, CrossError> {
    let d = b.len();
    let n = od.n();
    assert_eq!(d, od.d(), "multiplet height must match the fiber");
    for row in b {
        assert_eq!(row.len(), n, "multiplet width must match the group");
    }
    let g = od.group();
    let bn: Vec<Vec<MultiTensor>> = b
        .iter()
        .map(|row| row.iter().map(|t| mt_nf(t, v, g)).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()?;
    let bstar: Vec<Vec<MultiTensor>> = bn
        .iter()
        .map(|row| {
            row.iter()
                .map(|t| mt_nf(&t.star(&[v.pres(), g.pres()]), v, g))
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;
    // Equivariance: (id (x) coproduct) b_ki = sum_j b_kj (x) u_ji.
    for k in 0..d {
        for i in 0..n {
            let lhs = bn[k][i].map_leg_tensor(1, 2, &mut |w| {
                g.coproduct_word(w).expect("coproduct within bound")
            });
            let lhs = lhs.normal_form(&[v.rs(), g.rs(), g.rs()])?;
            let mut rhs = MultiTensor::zero(3);
            for j in 0..n {
                for (legs, c) in bn[k][j].iter() {
                    for (uw, uc) in g.u_entry(j, i).iter() {
                        rhs.add_term(vec![legs[0].clone(), legs[1].clone(), uw.clone()], c * uc);
                    }
                }
            }
            let rhs = rhs.normal_form(&[v.rs(), g.rs(), g.rs()])?;
            if !mt_sub(&lhs, &rhs).is_zero() {
                return Err(CrossError::NotEquivariant { k, i });
            }
        }
    }
    // Isometry: sum_k b*_ki b_kj = delta_ij.
    let legs = [v.pres(), g.pres()];
    for i in 0..n {
        for j in 0..n {
            let mut acc = MultiTensor::zero(2);
            for k in 0..d {
                let prod = bstar[k][i].mul(&bn[k][j], &legs);
                for (l, c) in prod.iter() {
                    acc.add_term(l.clone(), c.clone());
                }
            }
            if i == j {
                acc.add_term(vec![Word::one(), Word::one()], -Scalar::one());
            }
            if !mt_nf(&acc, v, g)?.is_zero() {
                return Err(CrossError::NotIsometric { i, j });
            }
        }
    }
    // rho on generators of the base: rho_kl(x) = sum_i b_ki (x (x) 1) b*_li.
    let mut mats: Vec<Vec<Vec<NCPoly>>> = Vec::new();
    for gv in 0..v.pres().n_gens() {
        let gen = MultiTensor::pure(
            vec![Word::single(gv as GenId), Word::one()],
            Scalar::one(),
        );
        let mut mat = vec![vec![NCPoly::zero(); d]; d];
        for k in 0..d {
            for l in 0..d {
                let mut acc = MultiTensor::zero(2);
                for i in 0..n {
                    let prod = bn[k][i].mul(&gen, &legs).mul(&bstar[l][i], &legs);
                    for (lg, c) in prod.iter() {
                        acc.add_term(lg.clone(), c.clone());
                    }
                }
                let acc = mt_nf(&acc, v, g)?;
                mat[k][l] = base_component(&acc).ok_or_else(|| CrossError::RhoNotBase {
                    gen: v.pres().gen(gv as GenId).name.clone(),
                    k,
                    l,
                })?;
            }
        }
        mats.push(mat);
    }
    // gamma on the invariant basis by substituting the multiplet.
    let anchors: Vec<NCPoly> = inv
        .elements_up_to(inv.max_degree())
        .into_iter()
        .cloned()
        .collect();
    let mut gamma = Vec::with_capacity(anchors.len());
    for (idx, x) in anchors.iter().enumerate() {
        let mut acc = MultiTensor::zero(2);
        for (w, c) in x.iter() {
            let mut t = MultiTensor::pure(vec![Word::one(), Word::one()], c.clone());
            for &gid in w.0.iter() {
                let (star, k, i) = decode(od, gid);
                let img = if star { &bstar[k][i] } else { &bn[k][i] };
                t = t.mul(img, &legs);
            }
            for (lg, cc) in t.iter() {
                acc.add_term(lg.clone(), cc.clone());
            }
        }
        let acc = mt_nf(&acc, v, g)?;
        let f = base_component(&acc).ok_or(CrossError::GammaNotBase { index: idx })?;
        gamma.push(v.rs().normal_form(&f)?);
    }
    let (cols, coords) = anchor_coords(&anchors);
    Ok(ClassifyingMap {
        od,
        inv,
        d,
        kind: BaseKind::Presented {
            v,
            mats,
            word_mats: RefCell::new(BTreeMap::new()),
        },
        anchors,
        gamma,
        cols,
        coords,
    })
}

/// Load tabulated (rho, gamma) data over a presented base from a map file.
/// The gamma table is keyed by the labels of [`invariant_labels`].
pub fn load_classifying_map<'a>(
    od: &'a OdAlgebra,
    inv: &'a InvariantBasis,
    v: &'a QuantumSpaceV,
    file: &ClassifyingMapFile,
) -> Result<ClassifyingMap<'a>, CrossError> {
    if file.d != od.d() {
        return Err(CrossError::MapFile {
            message: format!("d is {}, the fiber was built with d = {}", file.d, od.d()),
        });
    }
    let d = file.d;
    let mut mats = Vec::new();
    for gv in 0..v.pres().n_gens() {
        let name = &v.pres().gen(gv as GenId).name;
        let rows = file.rho.get(name).ok_or_else(|| CrossError::MapFile {
            message: format!("rho table is missing generator {name}"),
        })?;
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(CrossError::MapFile {
                message: format!("rho[{name}] is not a {d} x {d} matrix"),
            });
        }
        let mut mat = vec![vec![NCPoly::zero(); d]; d];
        for (k, row) in rows.iter().enumerate() {
            for (l, src) in row.iter().enumerate() {
                let p = parse_poly(v.pres(), src).map_err(|e| CrossError::MapFile {
                    message: format!("rho[{name}][{k}][{l}]: {e}"),
                })?;
                mat[k][l] = v.rs().normal_form(&p)?;
            }
        }
        mats.push(mat);
    }
    for key in file.rho.keys() {
        if v.pres().gen_index(key).is_none() {
            return Err(CrossError::MapFile {
                message: format!("rho table names an unknown generator {key}"),
            });
        }
    }
    let labels = invariant_labels(inv);
    let anchors: Vec<NCPoly> = inv
        .elements_up_to(inv.max_degree())
        .into_iter()
        .cloned()
        .collect();
    let mut gamma = Vec::with_capacity(anchors.len());
    for label in &labels {
        let src = file.gamma.get(label).ok_or_else(|| CrossError::MapFile {
            message: format!("gamma table is missing invariant {label}"),
        })?;
        let p = parse_poly(v.pres(), src).map_err(|e| CrossError::MapFile {
            message: format!("gamma[{label}]: {e}"),
        })?;
        gamma.push(v.rs().normal_form(&p)?);
    }
    for key in file.gamma.keys() {
        if !labels.contains(key) {
            return Err(CrossError::MapFile {
                message: format!("gamma table names an unknown invariant {key}"),
            });
        }
    }
    let (cols, coords) = anchor_coords(&anchors);
    Ok(ClassifyingMap {
        od,
        inv,
        d,
        kind: BaseKind::Presented {
            v,
            mats,
            word_mats: RefCell::new(BTreeMap::new()),
        },
        anchors,
        gamma,
        cols,
        coords,
    })
}

/// Linear canonicalization data for a presented base. The balanced moves
/// `v g(x) (x) y  =  v (x) x y`, with x running over the tabulated
/// invariants and y over fiber words, are generated inside a fixed degree
/// window and kept in reduced row echelon form over (fiber word, base
/// word) pair coordinates. Coordinates are ordered worst-first (high
/// degree, then many conjugate letters, then word order), so reduction
/// eliminates high-degree and conjugate-heavy words and pushes invariant
/// content into the base leg.
struct QuotientData {
    window: u64,
    n_v: usize,
    od_words: Vec<Word>,
    od_rank: BTreeMap<Word, usize>,
    v_words: Vec<Word>,
    v_rank: BTreeMap<Word, usize>,
    ech: Echelon,
}

enum Balancer {
    /// gamma is bijective onto the base: reduction composes the base
    /// coefficient back into the fiber and the canonical form is exact.
    GammaInverse,
    /// Reduction modulo the echelonized balanced relations. Confluent by
    /// construction: the canonical form is the unique representative of a
    /// class with no support on pivot coordinates.
    Quotient(QuotientData),
}

/// The flip operator `Psi`, tabulated on generators and extended through
/// the product recursion. Outputs are kept balanced-reduced.
pub struct FlipOperator<'a> {
    cm: &'a ClassifyingMap<'a>,
    hat: &'a HatMultiplet,
    alphas: Vec<Vec<usize>>,
    omegas: Vec<Vec<usize>>,
    r_star: Vec<Vec<NCPoly>>,
    balancer: Balancer,
}

fn quotient_data(cm: &ClassifyingMap<'_>, window: u64) -> Result<QuotientData, CrossError> {
    let od = cm.od();
    let BaseKind::Presented { v, .. } = &cm.kind else {
        unreachable!("quotient data needs a presented base");
    };
    let mut od_words = od.rs().basis(window);
    od_words.sort_by(|a, b| {
        let (da, db) = (od.pres().bound_degree(a), od.pres().bound_degree(b));
        db.cmp(&da)
            .then_with(|| star_count(od, b).cmp(&star_count(od, a)))
            .then_with(|| od.pres().cmp_words(b, a))
    });
    let od_rank: BTreeMap<Word, usize> = od_words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    let mut v_words = v.rs().basis(window);
    v_words.sort_by(|a, b| {
        let (da, db) = (v.pres().bound_degree(a), v.pres().bound_degree(b));
        db.cmp(&da).then_with(|| v.pres().cmp_words(b, a))
    });
    let v_rank: BTreeMap<Word, usize> = v_words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    let n_v = v_words.len();

    // Balanced moves, in the degree-conserving form: an invariant x sitting
    // after a plain prefix u crosses the prefix by the iterated transfer
    // maps and lands in the base through gamma,
    //   v (x) u x z  =  sum over rows u' of  v rho_iter(gamma x) (x) u' z,
    // where u' keeps the columns of u. The gamma image of an iterated
    // transfer image is the iterated rho image of the gamma image, so the
    // whole family is computable from the tabulated map. The prefix-free
    // case is the plain left-edge absorption.
    let mut ech = Echelon::new();
    let d = cm.d();
    let n = od.n();
    for (idx, x) in cm.anchors().iter().enumerate() {
        let xdeg = od.pres().poly_bound_degree(x).unwrap_or(0);
        if xdeg == 0 {
            // The unit anchor gives the empty relation.
            continue;
        }
        let img = cm.gamma_entry(idx);
        for p in 0..=(window.saturating_sub(xdeg) as usize) {
            for u_rows in multi_indices(d, p) {
                // the moved base factor for each replacement row pattern
                let mut moved: Vec<(Vec<usize>, NCPoly)> = Vec::new();
                for r_rows in multi_indices(d, p) {
                    let t = cm.v_nf(&cm.rho_iter(&u_rows, &r_rows, img)?)?;
                    if !t.is_zero() {
                        moved.push((r_rows, t));
                    }
                }
                if moved.is_empty() {
                    continue;
                }
                // v-leg products of the moved factors, independent of the
                // prefix columns and of the suffix; None marks a product
                // that escapes the base window, which voids the relation
                // for that base word.
                let mut lv_tab: Vec<Vec<Option<NCPoly>>> = Vec::with_capacity(moved.len());
                for (_, t) in &moved {
                    let mut row = Vec::with_capacity(n_v);
                    for vw in &v_words {
                        let lv = cm.v_nf(&t.word_mul(vw))?;
                        if lv.iter().all(|(u2, _)| v_rank.contains_key(u2)) {
                            row.push(Some(lv));
                        } else {
                            row.push(None);
                        }
                    }
                    lv_tab.push(row);
                }
                let z_room = window.saturating_sub(xdeg + p as u64);
                for u_cols in multi_indices(n, p) {
                    let u_word = Word(
                        u_rows
                            .iter()
                            .zip(u_cols.iter())
                            .map(|(&r, &c)| od.plain_gen(r, c))
                            .collect(),
                    );
                    for z in od_words.iter().filter(|z| od.pres().bound_degree(z) <= z_room)
                    {
                        let rhs = od.rs().normal_form(&x.word_mul(&u_word).mul_word(z))?;
                        // lhs od words per replacement row pattern
                        let mut lhs_parts: Vec<NCPoly> = Vec::with_capacity(moved.len());
                        for (r_rows, _) in &moved {
                            let r_word = Word(
                                r_rows
                                    .iter()
                                    .zip(u_cols.iter())
                                    .map(|(&r, &c)| od.plain_gen(r, c))
                                    .collect(),
                            );
                            let uz = od
                                .rs()
                                .normal_form(&NCPoly::from_word(r_word.concat(z)))?;
                            lhs_parts.push(uz);
                        }
                        for (vi, vw) in v_words.iter().enumerate() {
                            if lv_tab.iter().any(|row| row[vi].is_none()) {
                                continue;
                            }
                            let mut vec = SparseVec::new();
                            for (mi, uz) in lhs_parts.iter().enumerate() {
                                let lv = lv_tab[mi][vi].as_ref().unwrap();
                                for (u2, cv) in lv.iter() {
                                    let vr = v_rank[u2];
                                    for (w2, c2) in uz.iter() {
                                        let coord = od_rank[w2] * n_v + vr;
                                        let slot = vec.entry(coord).or_default();
                                        *slot += &(c2 * cv);
                                    }
                                }
                            }
                            for (w2, c2) in rhs.iter() {
                                let coord = od_rank[w2] * n_v + v_rank[vw];
                                let slot = vec.entry(coord).or_default();
                                *slot -= c2;
                            }
                            vec.retain(|_, c| !c.is_zero());
                            if !vec.is_empty() {
                                ech.insert(vec);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(QuotientData {
        window,
        n_v,
        od_words,
        od_rank,
        v_words,
        v_rank,
        ech,
    })
}

impl<'a> FlipOperator<'a> {
    /// Tabulate the flip against `cm`. Over a presented base, `window`
    /// bounds the degrees (on both legs) inside which canonical forms are
    /// taken; every element later passed through the reduction, including
    /// intermediate products, must stay inside it.
    pub fn new(
        cm: &'a ClassifyingMap<'a>,
        hat: &'a HatMultiplet,
        s: &SMatrix,
        window: u64,
    ) -> Result<FlipOperator<'a>, CrossError> {
        assert_eq!(hat.m(), s.m(), "multiplet and its pairing must agree");
        let od = cm.od();
        let alphas = s.alphas().to_vec();
        let omegas = multi_indices(od.n(), hat.m() as usize);
        let mut r_star = Vec::with_capacity(alphas.len());
        for a in 0..alphas.len() {
            let mut row_r = Vec::with_capacity(cm.d());
            for k in 0..cm.d() {
                let st = s.star_entry(od, a, k)?;
                row_r.push(cm.gamma(&st)?);
            }
            r_star.push(row_r);
        }
        let balancer = match cm.kind {
            BaseKind::Universal => Balancer::GammaInverse,
            BaseKind::Presented { .. } => Balancer::Quotient(quotient_data(cm, window)?),
        };
        Ok(FlipOperator {
            cm,
            hat,
            alphas,
            omegas,
            r_star,
            balancer,
        })
    }

    pub fn cm(&self) -> &ClassifyingMap<'a> {
        self.cm
    }

    pub fn r_star(&self, alpha_idx: usize, k: usize) -> &NCPoly {
        &self.r_star[alpha_idx][k]
    }

    fn flip_letter(
        &self,
        star: bool,
        k: usize,
        i: usize,
        f: &NCPoly,
    ) -> Result<Vec<(NCPoly, Word)>, CrossError> {
        let cm = self.cm;
        let od = cm.od();
        let mut out = Vec::new();
        if !star {
            for l in 0..cm.d() {
                let g = cm.rho(k, l, f)?;
                if !g.is_zero() {
                    out.push((g, Word::single(od.plain_gen(l, i))));
                }
            }
            return Ok(out);
        }
        for (ai, alpha) in self.alphas.iter().enumerate() {
            for beta in self.alphas.iter() {
                let rf = cm.rho_iter(alpha, beta, f)?;
                if rf.is_zero() {
                    continue;
                }
                let vpart = cm.v_mul(&self.r_star[ai][k], &rf)?;
                if vpart.is_zero() {
                    continue;
                }
                for omega in &self.omegas {
                    let a = self.hat.coeff(i, omega);
                    if a.is_zero() {
                        continue;
                    }
                    let w = Word(
                        beta.iter()
                            .zip(omega.iter())
                            .map(|(&b, &o)| od.plain_gen(b, o))
                            .collect(),
                    );
                    out.push((vpart.scale(a), w));
                }
            }
        }
        Ok(out)
    }

    fn flip_word(&self, w: &Word, f: &NCPoly) -> Result<BElem, CrossError> {
        if f.is_zero() {
            return Ok(BElem::zero());
        }
        if w.is_empty() {
            return Ok(BElem::base(f.clone()));
        }
        let mut pre = w.0.clone();
        let last = pre.pop().expect("nonempty word");
        let pre = Word(pre);
        let (star, k, i) = decode(self.cm.od(), last);
        let mut out = BElem::zero();
        for (g, phi) in self.flip_letter(star, k, i, f)? {
            let inner = self.flip_word(&pre, &g)?;
            for (w2, f2) in inner.iter() {
                out.add_at(w2.concat(&phi), f2.clone());
            }
        }
        Ok(out)
    }

    /// Flip one formal fiber word against a base element, without reducing
    /// the word first. Used to test that defining relations pass through.
    pub fn apply_word(&self, w: &Word, f: &NCPoly) -> Result<BElem, CrossError> {
        let ff = self.cm.v_nf(f)?;
        self.flip_word(w, &ff)
    }

    /// `Psi(x (x) f)`, balanced-reduced.
    pub fn apply(&self, x: &NCPoly, f: &NCPoly) -> Result<BElem, CrossError> {
        let xn = self.cm.od().rs().normal_form(x)?;
        let ff = self.cm.v_nf(f)?;
        let mut out = BElem::zero();
        for (w, c) in xn.iter() {
            let part = self.flip_word(w, &ff.scale(c))?;
            out = out.add(&part);
        }
        self.canonical(&out)
    }

    /// Balanced canonical form.
    pub fn canonical(&self, e: &BElem) -> Result<BElem, CrossError> {
        let od = self.cm.od();
        match &self.balancer {
            Balancer::GammaInverse => {
                let mut acc = NCPoly::zero();
                for (w, f) in e.iter() {
                    acc += f.mul_word(w);
                }
                let nf = od.rs().normal_form(&acc)?;
                let mut out = BElem::zero();
                for (w, c) in nf.iter() {
                    out.add_at(w.clone(), NCPoly::constant(c.clone()));
                }
                Ok(out)
            }
            Balancer::Quotient(qd) => {
                let mut vec = SparseVec::new();
                for (w, f) in e.iter() {
                    let fnf = self.cm.v_nf(f)?;
                    if fnf.is_zero() {
                        continue;
                    }
                    let wn = od.rs().normal_form(&NCPoly::from_word(w.clone()))?;
                    for (w2, c) in wn.iter() {
                        let Some(&owr) = qd.od_rank.get(w2) else {
                            return Err(CrossError::WindowExceeded {
                                element: od.pres().show_word(w2),
                                window: qd.window,
                            });
                        };
                        for (u, cu) in fnf.iter() {
                            let Some(&vr) = qd.v_rank.get(u) else {
                                return Err(CrossError::WindowExceeded {
                                    element: self.cm.v_pres().show_word(u),
                                    window: qd.window,
                                });
                            };
                            let slot = vec.entry(owr * qd.n_v + vr).or_default();
                            *slot += &(c * cu);
                        }
                    }
                }
                vec.retain(|_, c| !c.is_zero());
                let red = qd.ech.reduce(vec);
                let mut out = BElem::zero();
                for (&coord, c) in red.iter() {
                    let w = qd.od_words[coord / qd.n_v].clone();
                    let u = qd.v_words[coord % qd.n_v].clone();
                    out.add_at(w, NCPoly::term(u, c.clone()));
                }
                Ok(out)
            }
        }
    }

    /// Zero residual iff the two elements agree after balanced reduction.
    pub fn residual(&self, a: &BElem, b: &BElem) -> Result<BElem, CrossError> {
        let ca = self.canonical(a)?;
        let cb = self.canonical(b)?;
        Ok(ca.sub(&cb))
    }
}

fn seeded(report: &mut Report, check: String, residual: Vec<String>, seed: u64) {
    use crate::report::{CheckEntry, Status};
    let status = if residual.is_empty() {
        Status::Pass
    } else {
        Status::Fail
    };
    report.push(CheckEntry {
        check,
        status,
        residual_terms: if residual.is_empty() {
            None
        } else {
            Some(residual)
        },
        seed: Some(seed),
        note: None,
    });
}

fn od_right_mul(e: &BElem, x: &NCPoly, od: &OdAlgebra) -> Result<BElem, CrossError> {
    let mut out = BElem::zero();
    for (w, f) in e.iter() {
        let moved = od.rs().normal_form(&x.word_mul(w))?;
        for (w2, c) in moved.iter() {
            out.add_at(w2.clone(), f.scale(c));
        }
    }
    Ok(out)
}

fn v_scale_left(e: &BElem, g: &NCPoly, cm: &ClassifyingMap<'_>) -> Result<BElem, CrossError> {
    let mut out = BElem::zero();
    for (w, f) in e.iter() {
        out.add_at(w.clone(), cm.v_mul(g, f)?);
    }
    Ok(out)
}

/// Conjugation swap between the two tensor orders: `f (x) w` becomes
/// `w* (x) f*`, returned as (fiber element, base element) pairs.
fn star_swap(e: &BElem, cm: &ClassifyingMap<'_>) -> Result<Vec<(NCPoly, NCPoly)>, CrossError> {
    let mut out = Vec::new();
    for (w, f) in e.iter() {
        let (sw, sc) = cm.od().pres().star_word(w);
        let sf = cm.v_star(f)?;
        out.push((NCPoly::term(sw, sc), sf));
    }
    Ok(out)
}

/// Identity suite for a classifying map: rho is a unital *-homomorphism,
/// gamma is unital, star-compatible and multiplicative on the tabulated
/// basis, and the two transport identities (eq17, eq18) together with the
/// collapse identity (eq23) hold against the pairing matrix.
pub fn validate_classifying_map(
    flip: &FlipOperator<'_>,
    s: &SMatrix,
    degree: u64,
    seed: u64,
) -> Result<Report, CrossError> {
    let cm = flip.cm();
    let od = cm.od();
    let d = cm.d();
    let mut report = Report::new();
    let mut sampler = Sampler::new(seed);

    // The matrix rho(1) is the gamma image of the projection entries, so
    // it must be a self-adjoint idempotent over the base (it is not the
    // identity matrix in general).
    let mut rho_one: Vec<Vec<NCPoly>> = Vec::with_capacity(d);
    for k in 0..d {
        let mut row = Vec::with_capacity(d);
        for l in 0..d {
            row.push(cm.v_nf(&cm.rho(k, l, &NCPoly::one())?)?);
        }
        rho_one.push(row);
    }
    for k in 0..d {
        for l in 0..d {
            let mut sq = NCPoly::zero();
            for r in 0..d {
                sq += cm.v_mul(&rho_one[k][r], &rho_one[r][l])?;
            }
            let mut diff = cm.v_nf(&sq)?;
            diff += rho_one[k][l].scale(&-Scalar::one());
            let diff = cm.v_nf(&diff)?;
            if diff.is_zero() {
                report.pass(format!("rho.projection.k{k}l{l}"));
            } else {
                report.fail(
                    format!("rho.projection.k{k}l{l}"),
                    vec![cm.v_pres().show_poly(&diff)],
                );
            }
            let mut sdiff = cm.v_star(&rho_one[k][l])?;
            sdiff += rho_one[l][k].scale(&-Scalar::one());
            let sdiff = cm.v_nf(&sdiff)?;
            if sdiff.is_zero() {
                report.pass(format!("rho.projection.star.k{k}l{l}"));
            } else {
                report.fail(
                    format!("rho.projection.star.k{k}l{l}"),
                    vec![cm.v_pres().show_poly(&sdiff)],
                );
            }
        }
    }

    if let BaseKind::Presented { v, .. } = &cm.kind {
        for (ri, rel) in v.pres().relations().to_vec().iter().enumerate() {
            let mut worst = Vec::new();
            for k in 0..d {
                for l in 0..d {
                    let img = cm.rho(k, l, rel)?;
                    if !img.is_zero() {
                        worst.push(format!("({k},{l}): {}", cm.v_pres().show_poly(&img)));
                    }
                }
            }
            if worst.is_empty() {
                report.pass(format!("rho.relation.{ri:02}"));
            } else {
                report.fail(format!("rho.relation.{ri:02}"), worst);
            }
        }
    }

    let v_pool = cm.v_basis(degree.min(2));
    for t in 0..8 {
        let f = sampler.combination(&v_pool, 2);
        let g = sampler.combination(&v_pool, 2);
        let mut star_bad = Vec::new();
        let mut mult_bad = Vec::new();
        for k in 0..d {
            for l in 0..d {
                let lhs = cm.rho(k, l, &cm.v_star(&f)?)?;
                let rhs = cm.v_star(&cm.rho(l, k, &f)?)?;
                let mut diff = lhs;
                diff += rhs.scale(&-Scalar::one());
                let diff = cm.v_nf(&diff)?;
                if !diff.is_zero() {
                    star_bad.push(format!("({k},{l}): {}", cm.v_pres().show_poly(&diff)));
                }
                let lhs = cm.rho(k, l, &cm.v_mul(&f, &g)?)?;
                let mut rhs = NCPoly::zero();
                for r in 0..d {
                    rhs += cm.v_mul(&cm.rho(k, r, &f)?, &cm.rho(r, l, &g)?)?;
                }
                let mut diff = lhs;
                diff += rhs.scale(&-Scalar::one());
                let diff = cm.v_nf(&diff)?;
                if !diff.is_zero() {
                    mult_bad.push(format!("({k},{l}): {}", cm.v_pres().show_poly(&diff)));
                }
            }
        }
        seeded(&mut report, format!("rho.star.t{t:02}"), star_bad, seed);
        seeded(&mut report, format!("rho.mult.t{t:02}"), mult_bad, seed);
    }

    {
        let got = cm.gamma(&NCPoly::one())?;
        let mut diff = got;
        diff += NCPoly::one().scale(&-Scalar::one());
        if cm.v_nf(&diff)?.is_zero() {
            report.pass("gamma.unital");
        } else {
            report.fail("gamma.unital", vec![cm.v_pres().show_poly(&diff)]);
        }
    }

    for (idx, x) in cm.anchors().iter().enumerate() {
        let xs = od.rs().normal_form(&od.pres().star_poly(x))?;
        let lhs = cm.gamma(&xs)?;
        let rhs = cm.v_star(cm.gamma_entry(idx))?;
        let mut diff = lhs;
        diff += rhs.scale(&-Scalar::one());
        let diff = cm.v_nf(&diff)?;
        if diff.is_zero() {
            report.pass(format!("gamma.star.{idx:02}"));
        } else {
            report.fail(
                format!("gamma.star.{idx:02}"),
                vec![cm.v_pres().show_poly(&diff)],
            );
        }
    }

    let mut pair_count = 0usize;
    for (ia, xa) in cm.anchors().iter().enumerate() {
        let da = od.pres().poly_bound_degree(xa).unwrap_or(0);
        for (ib, xb) in cm.anchors().iter().enumerate() {
            let db = od.pres().poly_bound_degree(xb).unwrap_or(0);
            if da + db > cm.inv.max_degree() {
                continue;
            }
            let prod = od.rs().normal_form(&(xa * xb))?;
            let lhs = cm.gamma(&prod)?;
            let rhs = cm.v_mul(cm.gamma_entry(ia), cm.gamma_entry(ib))?;
            let mut diff = lhs;
            diff += rhs.scale(&-Scalar::one());
            let diff = cm.v_nf(&diff)?;
            let id = format!("gamma.mult.{pair_count:03}");
            pair_count += 1;
            if diff.is_zero() {
                report.pass(id);
            } else {
                report.fail(
                    id,
                    vec![format!(
                        "pair ({ia},{ib}): {}",
                        cm.v_pres().show_poly(&diff)
                    )],
                );
            }
        }
    }

    // eq17 with the pairing matrix as the generating multi-indexed system:
    // rows are (alpha, k), and rho is iterated over the full row length.
    let mut f_pool: Vec<NCPoly> = cm.v_basis(1);
    for _ in 0..4 {
        f_pool.push(sampler.combination(&v_pool, 2));
    }
    for (ai, alpha) in s.alphas().iter().enumerate() {
        for k in 0..d {
            let mut rows_a: Vec<usize> = alpha.clone();
            rows_a.push(k);
            let g_s = cm.gamma(&od.rs().normal_form(s.entry(ai, k))?)?;
            let mut bad = Vec::new();
            for f in &f_pool {
                let mut lhs = NCPoly::zero();
                for (bi, beta) in s.alphas().iter().enumerate() {
                    for l in 0..d {
                        let mut rows_b: Vec<usize> = beta.clone();
                        rows_b.push(l);
                        let rf = cm.rho_iter(&rows_a, &rows_b, f)?;
                        if rf.is_zero() {
                            continue;
                        }
                        let g_t = cm.gamma(&od.rs().normal_form(s.entry(bi, l))?)?;
                        lhs += cm.v_mul(&rf, &g_t)?;
                    }
                }
                let rhs = cm.v_mul(&g_s, f)?;
                let mut diff = cm.v_nf(&lhs)?;
                diff += rhs.scale(&-Scalar::one());
                let diff = cm.v_nf(&diff)?;
                if !diff.is_zero() {
                    bad.push(cm.v_pres().show_poly(&diff));
                    break;
                }
            }
            let label: String = alpha.iter().map(|x| x.to_string()).collect();
            seeded(&mut report, format!("eq17.row{label}k{k}"), bad, seed);
        }
    }

    // eq18: gamma carries the transfer maps to rho.
    for k in 0..d {
        for l in 0..d {
            let mut bad = Vec::new();
            for x in cm.anchors() {
                let deg = od.pres().poly_bound_degree(x).unwrap_or(0);
                if deg + 2 > cm.inv.max_degree() {
                    continue;
                }
                let lhs = cm.gamma(&od.tau(k, l, x)?)?;
                let rhs = cm.rho(k, l, &cm.gamma(x)?)?;
                let mut diff = lhs;
                diff += rhs.scale(&-Scalar::one());
                let diff = cm.v_nf(&diff)?;
                if !diff.is_zero() {
                    bad.push(format!(
                        "{}: {}",
                        od.pres().show_poly(x),
                        cm.v_pres().show_poly(&diff)
                    ));
                    break;
                }
            }
            seeded(&mut report, format!("eq18.k{k}.l{l}"), bad, seed);
        }
    }

    // eq23: flipping an invariant pairing entry collapses onto its gamma
    // image acting on the base.
    for (ai, alpha) in s.alphas().iter().enumerate() {
        for k in 0..d {
            let entry = od.rs().normal_form(s.entry(ai, k))?;
            let g_s = cm.gamma(&entry)?;
            let mut bad = Vec::new();
            for f in &f_pool {
                let lhs = flip.apply(&entry, f)?;
                let rhs = flip.canonical(&BElem::base(cm.v_mul(&g_s, f)?))?;
                let diff = lhs.sub(&rhs);
                if !diff.is_zero() {
                    bad.extend(cm.show_b(&diff));
                    break;
                }
            }
            let label: String = alpha.iter().map(|x| x.to_string()).collect();
            seeded(&mut report, format!("eq23.row{label}k{k}"), bad, seed);
        }
    }

    Ok(report.sorted())
}

/// Identity suite for the flip operator: factorization independence, the
/// two exchange recursions, passage of the defining relations, bimodule
/// linearity over invariant elements, the projection identity (eq26), and
/// the middle-invariant exchange property (eq24) over the full tabulated
/// invariant basis in degree.
pub fn verify_flip(
    flip: &FlipOperator<'_>,
    degree: u64,
    seed: u64,
) -> Result<Report, CrossError> {
    let cm = flip.cm();
    let od = cm.od();
    let d = cm.d();
    let n = od.n();
    let mut report = Report::new();
    let mut sampler = Sampler::new(seed);

    let od_words: Vec<Word> = od.rs().basis(degree);
    let od_pool: Vec<NCPoly> = od_words.iter().cloned().map(NCPoly::from_word).collect();
    // Pools sized so that every product formed below stays inside the
    // working degree.
    let od_inner: Vec<NCPoly> = od_words
        .iter()
        .filter(|w| od.pres().bound_degree(w) <= degree.saturating_sub(1))
        .cloned()
        .map(NCPoly::from_word)
        .collect();
    let od_letters: Vec<NCPoly> = od_words
        .iter()
        .filter(|w| od.pres().bound_degree(w) <= 1)
        .cloned()
        .map(NCPoly::from_word)
        .collect();
    let v_pool = cm.v_basis(degree.min(2));
    let v_small = cm.v_basis(1);

    // Output does not depend on where a word is split into factors.
    let factor_words: Vec<&Word> = od_words
        .iter()
        .filter(|w| w.len() >= 2 && od.pres().bound_degree(w) <= degree.min(3))
        .collect();
    for (t, w) in factor_words.iter().enumerate() {
        let f = sampler.combination(&v_pool, 2);
        let direct = flip.apply(&NCPoly::from_word((*w).clone()), &f)?;
        let mut bad = Vec::new();
        for cut in 1..w.len() {
            let x = Word(w.0[..cut].to_vec());
            let y = Word(w.0[cut..].to_vec());
            let inner = flip.apply(&NCPoly::from_word(y), &f)?;
            let mut outer = BElem::zero();
            for (chi, f1) in inner.iter() {
                let part = flip.apply(&NCPoly::from_word(x.clone()), f1)?;
                let part = od_right_mul(&part, &NCPoly::from_word(chi.clone()), od)?;
                outer = outer.add(&part);
            }
            let diff = flip.residual(&outer, &direct)?;
            if !diff.is_zero() {
                bad.push(format!(
                    "split at {cut} of {}: {}",
                    od.pres().show_word(w),
                    cm.show_b(&diff).join(" ; ")
                ));
                break;
            }
        }
        seeded(&mut report, format!("flip.factor.t{t:02}"), bad, seed);
        if t >= 19 {
            break;
        }
    }

    // Exchange recursion in the fiber argument.
    for t in 0..20 {
        let x = sampler.combination(&od_letters, 2);
        let y = sampler.combination(&od_inner, 2);
        let f = sampler.combination(&v_pool, 2);
        let lhs = flip.apply(&(&x * &y), &f)?;
        let inner = flip.apply(&y, &f)?;
        let mut rhs = BElem::zero();
        for (chi, f1) in inner.iter() {
            let part = flip.apply(&x, f1)?;
            let part = od_right_mul(&part, &NCPoly::from_word(chi.clone()), od)?;
            rhs = rhs.add(&part);
        }
        let diff = flip.residual(&lhs, &rhs)?;
        seeded(
            &mut report,
            format!("flip.exchange.left.t{t:02}"),
            cm.show_b(&diff),
            seed,
        );
    }

    // Exchange recursion in the base argument.
    for t in 0..20 {
        let x = sampler.combination(&od_pool, 2);
        let f = sampler.combination(&v_small, 2);
        let g = sampler.combination(&v_small, 2);
        let lhs = flip.apply(&x, &cm.v_mul(&f, &g)?)?;
        let step = flip.apply(&x, &f)?;
        let mut rhs = BElem::zero();
        for (chi, f1) in step.iter() {
            let part = flip.apply(&NCPoly::from_word(chi.clone()), &g)?;
            let part = v_scale_left(&part, f1, cm)?;
            rhs = rhs.add(&part);
        }
        let diff = flip.residual(&lhs, &rhs)?;
        seeded(
            &mut report,
            format!("flip.exchange.right.t{t:02}"),
            cm.show_b(&diff),
            seed,
        );
    }

    // The defining relations flip to the identity relation on the base:
    // the formal relation words are flipped without reduction.
    for i in 0..n {
        for j in 0..n {
            let mut bad = Vec::new();
            for f in v_pool.iter().take(4) {
                let mut lhs = BElem::zero();
                for k in 0..d {
                    let w = Word(vec![od.star_gen(k, i), od.plain_gen(k, j)]);
                    lhs = lhs.add(&flip.apply_word(&w, f)?);
                }
                let mut rhs = BElem::zero();
                if i == j {
                    rhs = BElem::base(f.clone());
                }
                let diff = flip.residual(&lhs, &rhs)?;
                if !diff.is_zero() {
                    bad.extend(cm.show_b(&diff));
                    break;
                }
            }
            seeded(&mut report, format!("flip.relations.i{i}.j{j}"), bad, seed);
        }
    }

    // Bimodule linearity over invariant elements, both sides.
    let anchors_in_degree: Vec<(usize, NCPoly)> = cm
        .anchors()
        .iter()
        .enumerate()
        .filter(|(_, x)| od.pres().poly_bound_degree(x).unwrap_or(0) <= degree)
        .map(|(i, x)| (i, x.clone()))
        .collect();
    for t in 0..12 {
        let (idx, psi) = &anchors_in_degree[sampler.index(anchors_in_degree.len())];
        let g_psi = cm.gamma_entry(*idx).clone();
        let psi_deg = od.pres().poly_bound_degree(psi).unwrap_or(0);
        let room = degree.saturating_sub(psi_deg);
        let x_pool: Vec<NCPoly> = od_words
            .iter()
            .filter(|w| od.pres().bound_degree(w) <= room)
            .cloned()
            .map(NCPoly::from_word)
            .collect();
        let x = sampler.combination(&x_pool, 2);
        let f = sampler.combination(&v_pool, 2);
        let lhs = flip.apply(&(psi * &x), &f)?;
        let rhs = v_scale_left(&flip.apply(&x, &f)?, &g_psi, cm)?;
        let diff = flip.residual(&lhs, &rhs)?;
        seeded(
            &mut report,
            format!("flip.bimodule.left.t{t:02}"),
            cm.show_b(&diff),
            seed,
        );
        let lhs = flip.apply(&x, &cm.v_mul(&f, &g_psi)?)?;
        let rhs = od_right_mul(&flip.apply(&x, &f)?, psi, od)?;
        let diff = flip.residual(&lhs, &rhs)?;
        seeded(
            &mut report,
            format!("flip.bimodule.right.t{t:02}"),
            cm.show_b(&diff),
            seed,
        );
    }

    // eq24 across the whole tabulated invariant basis within degree.
    for (pos, (idx, psi)) in anchors_in_degree.iter().enumerate() {
        let g_psi = cm.gamma_entry(*idx).clone();
        let psi_deg = od.pres().poly_bound_degree(psi).unwrap_or(0);
        let room = degree.saturating_sub(psi_deg);
        let x_pool: Vec<NCPoly> = od_words
            .iter()
            .filter(|w| od.pres().bound_degree(w) <= room)
            .cloned()
            .map(NCPoly::from_word)
            .collect();
        let mut bad = Vec::new();
        for _ in 0..3 {
            let x = sampler.combination(&x_pool, 2);
            let f = sampler.combination(&v_pool, 2);
            let lhs = flip.apply(&(&x * psi), &f)?;
            let rhs = flip.apply(&x, &cm.v_mul(&g_psi, &f)?)?;
            let diff = flip.residual(&lhs, &rhs)?;
            if !diff.is_zero() {
                bad.extend(cm.show_b(&diff));
                break;
            }
        }
        seeded(&mut report, format!("eq24.basis{pos:02}"), bad, seed);
    }

    // eq26: flipping the projection entries against transported arguments
    // collapses back onto the base.
    for k in 0..d {
        for l in 0..d {
            let mut bad = Vec::new();
            for f in v_pool.iter().take(4) {
                let mut lhs = BElem::zero();
                for r in 0..d {
                    let p_kr = od.p_entry(k, r)?;
                    let arg = cm.rho(r, l, f)?;
                    lhs = lhs.add(&flip.apply(&p_kr, &arg)?);
                }
                let rhs = BElem::base(cm.rho(k, l, f)?);
                let diff = flip.residual(&lhs, &rhs)?;
                if !diff.is_zero() {
                    bad.extend(cm.show_b(&diff));
                    break;
                }
            }
            seeded(&mut report, format!("eq26.k{k}.l{l}"), bad, seed);
        }
    }

    Ok(report.sorted())
}

/// eq33: conjugation inverts the flip. Applying star-swap, the flip,
/// star-swap and the flip again returns the input, exactly.
pub fn flip_bijectivity_check(
    flip: &FlipOperator<'_>,
    degree: u64,
    n_samples: usize,
    seed: u64,
) -> Result<Report, CrossError> {
    let cm = flip.cm();
    let od = cm.od();
    let mut report = Report::new();
    let mut sampler = Sampler::new(seed);

    let round_trip = |e: &BElem| -> Result<BElem, CrossError> {
        let mut mid = BElem::zero();
        for (x, f) in star_swap(e, cm)? {
            mid = mid.add(&flip.apply(&x, &f)?);
        }
        let mut out = BElem::zero();
        for (x, f) in star_swap(&mid, cm)? {
            out = out.add(&flip.apply(&x, &f)?);
        }
        flip.canonical(&out)
    };

    for k in 0..cm.d() {
        for i in 0..od.n() {
            for (tag, gid) in [("p", od.plain_gen(k, i)), ("s", od.star_gen(k, i))] {
                let e = flip.canonical(&BElem {
                    terms: BTreeMap::from([(Word::single(gid), NCPoly::one())]),
                })?;
                let back = round_trip(&e)?;
                let diff = back.sub(&e);
                let id = format!("eq33.gen.{tag}{k}{i}");
                if diff.is_zero() {
                    report.pass(id);
                } else {
                    report.fail(id, cm.show_b(&diff));
                }
            }
        }
    }

    let od_words: Vec<Word> = od.rs().basis(degree);
    let v_pool = cm.v_basis(degree.min(2));
    for t in 0..n_samples {
        let w = od_words[sampler.index(od_words.len())].clone();
        let f = sampler.combination(&v_pool, 2);
        let mut raw = BElem::zero();
        raw.add_at(w, f);
        let e = flip.canonical(&raw)?;
        let back = round_trip(&e)?;
        let diff = back.sub(&e);
        seeded(
            &mut report,
            format!("eq33.sample{t:02}"),
            cm.show_b(&diff),
            seed,
        );
    }

    Ok(report.sorted())
}

/// The reconstructed total space: the relative tensor product with the
/// twisted product (eq34), the star (eq35), the coaction inherited from
/// the fiber, and the base inclusion.
pub struct CrossBundle<'a> {
    flip: FlipOperator<'a>,
    bound: u64,
}

pub fn build_bundle<'a>(
    cm: &'a ClassifyingMap<'a>,
    hat: &'a HatMultiplet,
    s: &SMatrix,
    bound: u64,
) -> Result<CrossBundle<'a>, CrossError> {
    // Products of two degree-bound elements must still reduce, so the
    // canonical window is twice the working bound.
    let flip = FlipOperator::new(cm, hat, s, 2 * bound)?;
    // The reduction must identify each tabulated invariant, placed on the
    // fiber leg, with its gamma image on the base leg.
    for (idx, x) in cm.anchors().iter().enumerate() {
        let xn = cm.od().rs().normal_form(x)?;
        let mut e = BElem::zero();
        for (w, c) in xn.iter() {
            e.add_at(w.clone(), NCPoly::constant(c.clone()));
        }
        let lhs = flip.canonical(&e)?;
        let rhs = flip.canonical(&BElem::base(cm.gamma_entry(idx).clone()))?;
        let diff = lhs.sub(&rhs);
        if !diff.is_zero() {
            let witness = cm.show_b(&diff).join(" ; ");
            return Err(CrossError::BalanceIncomplete { witness });
        }
    }
    Ok(CrossBundle { flip, bound })
}

impl<'a> CrossBundle<'a> {
    pub fn flip(&self) -> &FlipOperator<'a> {
        &self.flip
    }

    pub fn cm(&self) -> &ClassifyingMap<'a> {
        self.flip.cm()
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    /// Base inclusion `f -> f (x) 1`.
    pub fn include(&self, f: &NCPoly) -> Result<BElem, CrossError> {
        self.flip.canonical(&BElem::base(self.cm().v_nf(f)?))
    }

    /// Fiber inclusion `x -> 1 (x) x`.
    pub fn from_od(&self, x: &NCPoly) -> Result<BElem, CrossError> {
        let xn = self.cm().od().rs().normal_form(x)?;
        let mut e = BElem::zero();
        for (w, c) in xn.iter() {
            e.add_at(w.clone(), NCPoly::constant(c.clone()));
        }
        self.flip.canonical(&e)
    }

    /// eq34: `(g (x) w)(f (x) w') = g Psi(w (x) f) w'`.
    pub fn mul(&self, a: &BElem, b: &BElem) -> Result<BElem, CrossError> {
        let cm = self.cm();
        let od = cm.od();
        let mut out = BElem::zero();
        for (w, g) in a.iter() {
            for (w2, f) in b.iter() {
                let mid = self.flip.flip_word(w, &cm.v_nf(f)?)?;
                let mid = v_scale_left(&mid, g, cm)?;
                let mid = od_right_mul(&mid, &NCPoly::from_word(w2.clone()), od)?;
                out = out.add(&mid);
            }
        }
        self.flip.canonical(&out)
    }

    /// eq35: `(f (x) w)* = Psi(w* (x) f*)`.
    pub fn star(&self, a: &BElem) -> Result<BElem, CrossError> {
        let mut out = BElem::zero();
        for (x, f) in star_swap(a, self.cm())? {
            out = out.add(&self.flip.apply(&x, &f)?);
        }
        self.flip.canonical(&out)
    }

    /// Coaction on the reconstruction, grouped by the group-algebra leg.
    pub fn coaction(&self, a: &BElem) -> Result<BTreeMap<Word, BElem>, CrossError> {
        let od = self.cm().od();
        let mut groups: BTreeMap<Word, BElem> = BTreeMap::new();
        for (w, f) in a.iter() {
            let ct = od.coaction_word(w)?;
            for (legs, c) in ct.iter() {
                groups
                    .entry(legs[1].clone())
                    .or_insert_with(BElem::zero)
                    .add_at(legs[0].clone(), f.scale(c));
            }
        }
        let mut out = BTreeMap::new();
        for (aw, e) in groups {
            let e = self.flip.canonical(&e)?;
            if !e.is_zero() {
                out.insert(aw, e);
            }
        }
        Ok(out)
    }

    /// Vertical integration `(id (x) h)` after the coaction.
    pub fn h_m(
        &self,
        haar: &crate::hopf::HaarTable,
        a: &BElem,
    ) -> Result<BElem, CrossError> {
        let mut out = BElem::zero();
        for (aw, e) in self.coaction(a)? {
            let c = haar.get(&aw).ok_or(HopfError::HaarOutOfRange {
                word: self.cm().od().group().pres().show_word(&aw),
                bound: haar.bound(),
            })?;
            out = out.add(&e.scale(c));
        }
        self.flip.canonical(&out)
    }
}

fn bexts_equal(
    bundle: &CrossBundle<'_>,
    a: &BTreeMap<Word, BElem>,
    b: &BTreeMap<Word, BElem>,
) -> Result<Option<String>, CrossError> {
    let cm = bundle.cm();
    let mut keys: Vec<&Word> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    for aw in keys {
        let ea = a.get(aw).cloned().unwrap_or_else(BElem::zero);
        let eb = b.get(aw).cloned().unwrap_or_else(BElem::zero);
        let diff = bundle.flip.residual(&ea, &eb)?;
        if !diff.is_zero() {
            return Ok(Some(format!(
                "at group leg {}: {}",
                cm.od().group().pres().show_word(aw),
                cm.show_b(&diff).join(" ; ")
            )));
        }
    }
    Ok(None)
}

fn bext_mul(
    bundle: &CrossBundle<'_>,
    a: &BTreeMap<Word, BElem>,
    b: &BTreeMap<Word, BElem>,
) -> Result<BTreeMap<Word, BElem>, CrossError> {
    let g = bundle.cm().od().group();
    let mut out: BTreeMap<Word, BElem> = BTreeMap::new();
    for (aw1, e1) in a {
        for (aw2, e2) in b {
            let prod = bundle.mul(e1, e2)?;
            if prod.is_zero() {
                continue;
            }
            let ap = g
                .rs()
                .normal_form(&NCPoly::from_word(aw1.concat(aw2)))?;
            for (aw, c) in ap.iter() {
                let slot = out.entry(aw.clone()).or_insert_with(BElem::zero);
                *slot = slot.add(&prod.scale(c));
            }
        }
    }
    let mut clean = BTreeMap::new();
    for (aw, e) in out {
        let e = bundle.flip.canonical(&e)?;
        if !e.is_zero() {
            clean.insert(aw, e);
        }
    }
    Ok(clean)
}

/// Expand a reduced element over (base word, fiber word) coordinates.
fn b_vec(ix: &mut KeyIndex<(Word, Word)>, e: &BElem) -> SparseVec {
    let mut v = SparseVec::new();
    for (w, f) in e.iter() {
        for (vw, c) in f.iter() {
            let col = ix.intern(&(vw.clone(), w.clone()));
            let prev = v.get(&col).cloned().unwrap_or_else(Scalar::zero);
            let next = &prev + c;
            if next.is_zero() {
                v.remove(&col);
            } else {
                v.insert(col, next);
            }
        }
    }
    v
}

fn b_vec3(ix: &mut KeyIndex<(Word, Word, Word)>, t: &BTreeMap<Word, BElem>) -> SparseVec {
    let mut v = SparseVec::new();
    for (aw, e) in t {
        for (w, f) in e.iter() {
            for (vw, c) in f.iter() {
                let col = ix.intern(&(vw.clone(), w.clone(), aw.clone()));
                let prev = v.get(&col).cloned().unwrap_or_else(Scalar::zero);
                let next = &prev + c;
                if next.is_zero() {
                    v.remove(&col);
                } else {
                    v.insert(col, next);
                }
            }
        }
    }
    v
}

/// Independent spanning elements of the degree-`k` slice of the bundle, as
/// reduced elements together with their slice rank.
fn bundle_slice(
    bundle: &CrossBundle<'_>,
    degree: u64,
) -> Result<Vec<BElem>, CrossError> {
    let cm = bundle.cm();
    let od = cm.od();
    let mut ix: KeyIndex<(Word, Word)> = KeyIndex::new();
    let mut ech = Echelon::new();
    let mut out = Vec::new();
    let od_words = od.rs().basis(degree);
    for f in cm.v_basis(degree) {
        let fdeg = cm.v_pres().poly_bound_degree(&f).unwrap_or(0);
        for w in &od_words {
            if od.pres().bound_degree(w) + fdeg > degree {
                continue;
            }
            let mut e = BElem::zero();
            e.add_at(w.clone(), f.clone());
            let e = bundle.flip.canonical(&e)?;
            if e.is_zero() {
                continue;
            }
            let v = b_vec(&mut ix, &e);
            if ech.insert(v) {
                out.push(e);
            }
        }
    }
    Ok(out)
}

/// Axiom suite for the reconstruction: associativity and the star laws of
/// the twisted product, the comodule-algebra laws of the coaction, the
/// vertical integration identities, fixed-point slice ranks, and the
/// freeness witnesses of the fundamental matrix.
pub fn verify_bundle_axioms(
    bundle: &CrossBundle<'_>,
    haar: &crate::hopf::HaarTable,
    hat_c: Option<(&HatMultiplet, &IntertwinerC)>,
    degree: u64,
    seed: u64,
) -> Result<Report, CrossError> {
    let cm = bundle.cm();
    let od = cm.od();
    let g = od.group();
    let n = od.n();
    let mut report = Report::new();
    let mut sampler = Sampler::new(seed);

    let od_words = od.rs().basis(degree);
    let v_pool = cm.v_basis(degree.min(2));
    let small_deg = degree.min(2).max(1);
    let draw = |sampler: &mut Sampler, cap: u64| -> BElem {
        let words: Vec<&Word> = od_words
            .iter()
            .filter(|w| od.pres().bound_degree(w) <= cap)
            .collect();
        let mut e = BElem::zero();
        for _ in 0..2 {
            let w = words[sampler.index(words.len())].clone();
            let f = sampler.combination(&v_pool, 1);
            e.add_at(w, f);
        }
        e
    };

    for t in 0..10 {
        let a = draw(&mut sampler, 1);
        let b = draw(&mut sampler, small_deg.min(1));
        let c = draw(&mut sampler, 1);
        let lhs = bundle.mul(&bundle.mul(&a, &b)?, &c)?;
        let rhs = bundle.mul(&a, &bundle.mul(&b, &c)?)?;
        let diff = bundle.flip.residual(&lhs, &rhs)?;
        seeded(
            &mut report,
            format!("bundle.assoc.t{t:02}"),
            cm.show_b(&diff),
            seed,
        );
    }

    for t in 0..10 {
        let a = draw(&mut sampler, small_deg);
        let back = bundle.star(&bundle.star(&a)?)?;
        let diff = bundle.flip.residual(&back, &bundle.flip.canonical(&a)?)?;
        seeded(
            &mut report,
            format!("bundle.star.invol.t{t:02}"),
            cm.show_b(&diff),
            seed,
        );
        let b = draw(&mut sampler, 1);
        let lhs = bundle.star(&bundle.mul(&a, &b)?)?;
        let rhs = bundle.mul(&bundle.star(&b)?, &bundle.star(&a)?)?;
        let diff = bundle.flip.residual(&lhs, &rhs)?;
        seeded(
            &mut report,
            format!("bundle.star.antimult.t{t:02}"),
            cm.show_b(&diff),
            seed,
        );
    }

    {
        let a = draw(&mut sampler, small_deg);
        let one = BElem::one();
        let lhs = bundle.mul(&one, &a)?;
        let rhs = bundle.mul(&a, &one)?;
        let ca = bundle.flip.canonical(&a)?;
        let d1 = bundle.flip.residual(&lhs, &ca)?;
        let d2 = bundle.flip.residual(&rhs, &ca)?;
        let mut resid = cm.show_b(&d1);
        resid.extend(cm.show_b(&d2));
        seeded(&mut report, "bundle.unit".into(), resid, seed);
    }

    // Coaction is counital and coassociative, and multiplicative on pairs.
    {
        let mut gens: Vec<BElem> = Vec::new();
        for f in cm.v_basis(1) {
            gens.push(bundle.include(&f)?);
        }
        for k in 0..cm.d() {
            for i in 0..n {
                gens.push(bundle.from_od(&NCPoly::from_word(Word::single(od.plain_gen(k, i))))?);
                gens.push(bundle.from_od(&NCPoly::from_word(Word::single(od.star_gen(k, i))))?);
            }
        }
        for (gi, e) in gens.iter().enumerate() {
            let ct = bundle.coaction(e)?;
            let mut back = BElem::zero();
            for (aw, part) in &ct {
                back = back.add(&part.scale(&g.counit_word(aw)));
            }
            let diff = bundle.flip.residual(&back, e)?;
            seeded(
                &mut report,
                format!("bundle.coaction.counit.g{gi:02}"),
                cm.show_b(&diff),
                seed,
            );

            let mut lhs: BTreeMap<(Word, Word), BElem> = BTreeMap::new();
            for (aw, part) in &ct {
                for (aw1, part1) in bundle.coaction(part)? {
                    let slot = lhs
                        .entry((aw1, aw.clone()))
                        .or_insert_with(BElem::zero);
                    *slot = slot.add(&part1);
                }
            }
            let mut rhs: BTreeMap<(Word, Word), BElem> = BTreeMap::new();
            for (aw, part) in &ct {
                let cp = g.coproduct_word(aw)?;
                for (legs, c) in cp.iter() {
                    let slot = rhs
                        .entry((legs[0].clone(), legs[1].clone()))
                        .or_insert_with(BElem::zero);
                    *slot = slot.add(&part.scale(c));
                }
            }
            let mut bad = Vec::new();
            let mut keys: Vec<(Word, Word)> = lhs.keys().chain(rhs.keys()).cloned().collect();
            keys.sort();
            keys.dedup();
            for key in keys {
                let ea = lhs.get(&key).cloned().unwrap_or_else(BElem::zero);
                let eb = rhs.get(&key).cloned().unwrap_or_else(BElem::zero);
                let diff = bundle.flip.residual(&ea, &eb)?;
                if !diff.is_zero() {
                    bad.push(cm.show_b(&diff).join(" ; "));
                    break;
                }
            }
            seeded(
                &mut report,
                format!("bundle.coaction.coassoc.g{gi:02}"),
                bad,
                seed,
            );
        }
    }

    for t in 0..6 {
        let a = draw(&mut sampler, 1);
        let b = draw(&mut sampler, 1);
        let lhs = bundle.coaction(&bundle.mul(&a, &b)?)?;
        let fa = bundle.coaction(&a)?;
        let fb = bundle.coaction(&b)?;
        let rhs = bext_mul(bundle, &fa, &fb)?;
        let bad = bexts_equal(bundle, &lhs, &rhs)?;
        seeded(
            &mut report,
            format!("bundle.coaction.hom.t{t:02}"),
            bad.into_iter().collect(),
            seed,
        );
    }

    // Vertical integration: a left inverse of the base inclusion whose
    // range is the base.
    for (idx, f) in cm.v_basis(degree).iter().enumerate() {
        let inc = bundle.include(f)?;
        let back = bundle.h_m(haar, &inc)?;
        let diff = bundle.flip.residual(&back, &inc)?;
        seeded(
            &mut report,
            format!("bundle.hm.identity.{idx:02}"),
            cm.show_b(&diff),
            seed,
        );
    }
    let slice = bundle_slice(bundle, degree)?;
    {
        let mut bad = Vec::new();
        for e in &slice {
            let h = bundle.h_m(haar, e)?;
            let in_base = match &cm.kind {
                BaseKind::Universal => {
                    let mut p = NCPoly::zero();
                    for (w, f) in h.iter() {
                        p += f.mul_word(w);
                    }
                    od.is_invariant(&od.rs().normal_form(&p)?)?
                }
                BaseKind::Presented { .. } => h.iter().all(|(w, _)| w.is_empty()),
            };
            if !in_base {
                bad.push(cm.show_b(&h).join(" ; "));
                break;
            }
        }
        seeded(&mut report, "bundle.hm.range".into(), bad, seed);
    }

    // Fixed points of the coaction in each slice match the base exactly.
    for k in 0..=degree {
        let sl = bundle_slice(bundle, k)?;
        let mut ix3: KeyIndex<(Word, Word, Word)> = KeyIndex::new();
        let mut ech = Echelon::new();
        let mut rank = 0usize;
        for e in &sl {
            let ct = bundle.coaction(e)?;
            let mut resid = ct;
            let slot = resid.entry(Word::one()).or_insert_with(BElem::zero);
            *slot = slot.sub(e);
            resid.retain(|_, v| !v.is_zero());
            let vec = b_vec3(&mut ix3, &resid);
            if ech.insert(vec) {
                rank += 1;
            }
        }
        let fixed = sl.len() - rank;
        let expected = match &cm.kind {
            BaseKind::Universal => cm
                .inv
                .elements_up_to(k.min(cm.inv.max_degree()))
                .len(),
            BaseKind::Presented { v, .. } => v.rs().basis(k).len(),
        };
        let id = format!("bundle.fixed.deg{k}");
        if fixed == expected {
            report.pass(id);
        } else {
            report.fail_note(
                id,
                format!("fixed slice has rank {fixed}, the base slice has rank {expected}"),
            );
        }
    }

    // Freeness witnesses: the conjugated coaction of the defining multiplet
    // exposes every fundamental matrix entry, and the conjugate multiplet
    // exposes the starred entries.
    for i in 0..n {
        for j in 0..n {
            let mut acc: BTreeMap<Word, BElem> = BTreeMap::new();
            for k in 0..cm.d() {
                let b_ki = bundle.from_od(&NCPoly::from_word(Word::single(od.plain_gen(k, i))))?;
                let star_b = bundle.star(&b_ki)?;
                let f_b = bundle.coaction(
                    &bundle.from_od(&NCPoly::from_word(Word::single(od.plain_gen(k, j))))?,
                )?;
                let star_ext = BTreeMap::from([(Word::one(), star_b)]);
                let prod = bext_mul(bundle, &star_ext, &f_b)?;
                for (aw, e) in prod {
                    let slot = acc.entry(aw).or_insert_with(BElem::zero);
                    *slot = slot.add(&e);
                }
            }
            acc.retain(|_, e| !e.is_zero());
            let mut expected: BTreeMap<Word, BElem> = BTreeMap::new();
            for (uw, uc) in g.u_entry(i, j).iter() {
                expected.insert(uw.clone(), BElem::one().scale(uc));
            }
            let bad = bexts_equal(bundle, &acc, &expected)?;
            seeded(
                &mut report,
                format!("bundle.free.u.i{i}.j{j}"),
                bad.into_iter().collect(),
                seed,
            );
        }
    }
    if let Some((hat, c)) = hat_c {
        let alphas = multi_indices(cm.d(), hat.m() as usize);
        for i in 0..n {
            for j in 0..n {
                let mut acc: BTreeMap<Word, BElem> = BTreeMap::new();
                for alpha in &alphas {
                    for l in 0..n {
                        let coeff = c.c_inv()[l][i].clone();
                        if coeff.is_zero() {
                            continue;
                        }
                        let h_l = bundle.from_od(&hat.entry(od, alpha, l))?;
                        let star_h = bundle.star(&h_l)?.scale(&coeff);
                        let f_h = bundle.coaction(&bundle.from_od(&hat.entry(od, alpha, j))?)?;
                        let star_ext = BTreeMap::from([(Word::one(), star_h)]);
                        let prod = bext_mul(bundle, &star_ext, &f_h)?;
                        for (aw, e) in prod {
                            let slot = acc.entry(aw).or_insert_with(BElem::zero);
                            *slot = slot.add(&e);
                        }
                    }
                }
                acc.retain(|_, e| !e.is_zero());
                let mut expected: BTreeMap<Word, BElem> = BTreeMap::new();
                for (uw, uc) in g.u_star(i, j).iter() {
                    expected.insert(uw.clone(), BElem::one().scale(uc));
                }
                let bad = bexts_equal(bundle, &acc, &expected)?;
                seeded(
                    &mut report,
                    format!("bundle.free.ustar.i{i}.j{j}"),
                    bad.into_iter().collect(),
                    seed,
                );
            }
        }
    }

    Ok(report.sorted())
}

/// Model agreement for the universal reconstruction: the slice dimensions
/// and the twisted product match the fiber itself under `f (x) x -> f x`.
pub fn verify_universal_model(
    bundle: &CrossBundle<'_>,
    degree: u64,
    seed: u64,
) -> Result<Report, CrossError> {
    let cm = bundle.cm();
    assert!(cm.is_universal(), "model comparison against the fiber needs the universal map");
    let od = cm.od();
    let mut report = Report::new();
    let mut sampler = Sampler::new(seed);

    for k in 0..=degree {
        let rank = bundle_slice(bundle, k)?.len();
        let expected = od.rs().basis(k).len();
        let id = format!("bundle.dims.deg{k}");
        if rank == expected {
            report.pass(id);
        } else {
            report.fail_note(
                id,
                format!("reconstruction slice has rank {rank}, the fiber slice has rank {expected}"),
            );
        }
    }

    let od_words = od.rs().basis(degree);
    let v_pool = cm.v_basis(degree.min(2));
    for t in 0..20 {
        let w1 = od_words[sampler.index(od_words.len())].clone();
        let w2 = od_words[sampler.index(od_words.len())].clone();
        let f1 = sampler.combination(&v_pool, 1);
        let f2 = sampler.combination(&v_pool, 1);
        let mut a = BElem::zero();
        a.add_at(w1.clone(), f1.clone());
        let mut b = BElem::zero();
        b.add_at(w2.clone(), f2.clone());
        let got = bundle.mul(&a, &b)?;
        let model = od.rs().normal_form(
            &(&(&f1.mul_word(&w1) * &f2) * &NCPoly::from_word(w2.clone())),
        )?;
        let mut want = BElem::zero();
        for (w, c) in model.iter() {
            want.add_at(w.clone(), NCPoly::constant(c.clone()));
        }
        let diff = bundle.flip.residual(&got, &want)?;
        seeded(
            &mut report,
            format!("bundle.model.product.t{t:02}"),
            cm.show_b(&diff),
            seed,
        );

        let got = bundle.star(&a)?;
        let model = od
            .rs()
            .normal_form(&od.pres().star_poly(&f1.mul_word(&w1)))?;
        let mut want = BElem::zero();
        for (w, c) in model.iter() {
            want.add_at(w.clone(), NCPoly::constant(c.clone()));
        }
        let diff = bundle.flip.residual(&got, &want)?;
        seeded(
            &mut report,
            format!("bundle.model.star.t{t:02}"),
            cm.show_b(&diff),
            seed,
        );
    }

    Ok(report.sorted())
}

/// Round trip for a map extracted from a concrete multiplet: transporting
/// the reconstruction back through `f (x) x -> (f (x) 1) subst(x)` must
/// reproduce the multiplication, the star, and the full slice span of the
/// product of the base with the group algebra.
pub fn verify_roundtrip_model(
    bundle: &CrossBundle<'_>,
    b: &[Vec<MultiTensor>],
    degree: u64,
    seed: u64,
) -> Result<Report, CrossError> {
    let cm = bundle.cm();
    let od = cm.od();
    let g = od.group();
    let BaseKind::Presented { v, .. } = &cm.kind else {
        panic!("round trip comparison needs a presented base");
    };
    let mut report = Report::new();
    let mut sampler = Sampler::new(seed);
    let legs = [v.pres(), g.pres()];
    let bn: Vec<Vec<MultiTensor>> = b
        .iter()
        .map(|row| row.iter().map(|t| mt_nf(t, v, g)).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()?;
    let bstar: Vec<Vec<MultiTensor>> = bn
        .iter()
        .map(|row| {
            row.iter()
                .map(|t| mt_nf(&t.star(&[v.pres(), g.pres()]), v, g))
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;

    let transport = |e: &BElem| -> Result<MultiTensor, CrossError> {
        let mut acc = MultiTensor::zero(2);
        for (w, f) in e.iter() {
            let mut t = MultiTensor::zero(2);
            for (vw, c) in f.iter() {
                t.add_term(vec![vw.clone(), Word::one()], c.clone());
            }
            for &gid in w.0.iter() {
                let (star, k, i) = decode(od, gid);
                let img = if star { &bstar[k][i] } else { &bn[k][i] };
                t = t.mul(img, &legs);
            }
            for (lg, c) in t.iter() {
                acc.add_term(lg.clone(), c.clone());
            }
        }
        Ok(mt_nf(&acc, v, g)?)
    };

    let od_words = od.rs().basis(degree);
    let v_pool = cm.v_basis(degree.min(2));
    for t in 0..20 {
        let w1 = od_words[sampler.index(od_words.len())].clone();
        let w2 = od_words[sampler.index(od_words.len())].clone();
        let f1 = sampler.combination(&v_pool, 1);
        let f2 = sampler.combination(&v_pool, 1);
        let mut a = BElem::zero();
        a.add_at(w1, f1);
        let mut b_el = BElem::zero();
        b_el.add_at(w2, f2);
        let got = transport(&bundle.mul(&a, &b_el)?)?;
        let want = transport(&a)?.mul(&transport(&b_el)?, &legs);
        let want = mt_nf(&want, v, g)?;
        let diff = mt_sub(&got, &want);
        let resid = if diff.is_zero() {
            Vec::new()
        } else {
            diff.show_terms(&[v.pres(), g.pres()])
        };
        seeded(&mut report, format!("bundle.roundtrip.product.t{t:02}"), resid, seed);

        let got = transport(&bundle.star(&a)?)?;
        let want = mt_nf(&transport(&a)?.star(&[v.pres(), g.pres()]), v, g)?;
        let diff = mt_sub(&got, &want);
        let resid = if diff.is_zero() {
            Vec::new()
        } else {
            diff.show_terms(&[v.pres(), g.pres()])
        };
        seeded(&mut report, format!("bundle.roundtrip.star.t{t:02}"), resid, seed);
    }

    // The transported slice spans the full product slice.
    for k in 0..=degree {
        let slice = bundle_slice(bundle, k)?;
        let mut ix: KeyIndex<(Word, Word)> = KeyIndex::new();
        let mut ech = Echelon::new();
        let mut rank = 0usize;
        for e in &slice {
            let img = transport(e)?;
            let mut vec = SparseVec::new();
            for (lg, c) in img.iter() {
                let col = ix.intern(&(lg[0].clone(), lg[1].clone()));
                let prev = vec.get(&col).cloned().unwrap_or_else(Scalar::zero);
                let next = &prev + c;
                if next.is_zero() {
                    vec.remove(&col);
                } else {
                    vec.insert(col, next);
                }
            }
            if ech.insert(vec) {
                rank += 1;
            }
        }
        let mut expected = 0usize;
        for a_deg in 0..=k {
            let an = g.rs().basis_of_degree(a_deg).len();
            let v_cum = v.rs().basis(k - a_deg).len();
            expected += v_cum * an;
        }
        let id = format!("bundle.roundtrip.dims.deg{k}");
        if rank == expected {
            report.pass(id);
        } else {
            report.fail_note(
                id,
                format!("transported slice has rank {rank}, the product slice has rank {expected}"),
            );
        }
    }

    Ok(report.sorted())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free::hermitian;
    use crate::hopf::{builtin_group, canonical_intertwiner, haar_state};
    use crate::od::{build_od, find_hat_multiplet, invariants_basis, s_matrix};

    fn suq2_d1() -> (OdAlgebra, InvariantBasis, HatMultiplet, SMatrix) {
        let g = builtin_group("su_q_2").unwrap();
        let od = build_od(g, 1, 4).unwrap();
        let inv = invariants_basis(&od, 4).unwrap();
        let c = canonical_intertwiner(od.group()).unwrap();
        let hat = find_hat_multiplet(&od, &c, 3).unwrap();
        let s = s_matrix(&od, &hat, &c).unwrap();
        (od, inv, hat, s)
    }

    fn suq2_d2() -> (OdAlgebra, InvariantBasis, HatMultiplet, SMatrix) {
        let g = builtin_group("su_q_2").unwrap();
        let od = build_od(g, 2, 3).unwrap();
        let inv = invariants_basis(&od, 2).unwrap();
        let c = canonical_intertwiner(od.group()).unwrap();
        let hat = find_hat_multiplet(&od, &c, 3).unwrap();
        let s = s_matrix(&od, &hat, &c).unwrap();
        (od, inv, hat, s)
    }

    fn free_line() -> QuantumSpaceV {
        let pres = Presentation::new(vec![hermitian("x", 1)], false).unwrap();
        QuantumSpaceV::new(pres, 6).unwrap()
    }

    fn trivial_multiplet(od: &OdAlgebra, v: &QuantumSpaceV) -> Vec<Vec<MultiTensor>> {
        let _ = v;
        let g = od.group();
        (0..od.d())
            .map(|k| {
                (0..od.n())
                    .map(|i| {
                        let mut t = MultiTensor::zero(2);
                        for (w, c) in g.u_entry(k, i).iter() {
                            t.add_term(vec![Word::one(), w.clone()], c.clone());
                        }
                        t
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn universal_map_validates() {
        let (od, inv, hat, s) = suq2_d1();
        let cm = ClassifyingMap::universal(&od, &inv).unwrap();
        let flip = FlipOperator::new(&cm, &hat, &s, 4).unwrap();
        let report = validate_classifying_map(&flip, &s, 4, 42).unwrap();
        for f in report.failures() {
            eprintln!("{f:?}");
        }
        assert!(report.passed());
    }

    #[test]
    fn universal_flip_identities_close() {
        let (od, inv, hat, s) = suq2_d1();
        let cm = ClassifyingMap::universal(&od, &inv).unwrap();
        let flip = FlipOperator::new(&cm, &hat, &s, 3).unwrap();
        let report = verify_flip(&flip, 3, 42).unwrap();
        for f in report.failures() {
            eprintln!("{f:?}");
        }
        assert!(report.passed());
    }

    #[test]
    fn universal_flip_is_bijective() {
        let (od, inv, hat, s) = suq2_d1();
        let cm = ClassifyingMap::universal(&od, &inv).unwrap();
        let flip = FlipOperator::new(&cm, &hat, &s, 3).unwrap();
        let report = flip_bijectivity_check(&flip, 3, 20, 42).unwrap();
        for f in report.failures() {
            eprintln!("{f:?}");
        }
        assert!(report.passed());
    }

    #[test]
    fn universal_bundle_matches_fiber() {
        let (od, inv, hat, s) = suq2_d1();
        let cm = ClassifyingMap::universal(&od, &inv).unwrap();
        let bundle = build_bundle(&cm, &hat, &s, 3).unwrap();
        let report = verify_universal_model(&bundle, 3, 42).unwrap();
        for f in report.failures() {
            eprintln!("{f:?}");
        }
        assert!(report.passed());
    }

    #[test]
    fn universal_bundle_axioms_hold() {
        let (od, inv, hat, s) = suq2_d1();
        let cm = ClassifyingMap::universal(&od, &inv).unwrap();
        let bundle = build_bundle(&cm, &hat, &s, 2).unwrap();
        let haar = haar_state(od.group(), 4).unwrap();
        let c = canonical_intertwiner(od.group()).unwrap();
        let report =
            verify_bundle_axioms(&bundle, &haar, Some((&hat, &c)), 2, 42).unwrap();
        for f in report.failures() {
            eprintln!("{f:?}");
        }
        assert!(report.passed());
    }

    #[test]
    fn trivial_multiplet_extracts() {
        let (od, inv, _hat, _s) = suq2_d2();
        let v = free_line();
        let b = trivial_multiplet(&od, &v);
        let cm = extract_classifying_map(&od, &inv, &v, &b).unwrap();
        // rho is diagonal: rho_kl(x) = delta_kl x.
        let x = NCPoly::from_word(Word::single(0));
        for k in 0..2 {
            for l in 0..2 {
                let got = cm.rho(k, l, &x).unwrap();
                if k == l {
                    assert_eq!(got, x);
                } else {
                    assert!(got.is_zero());
                }
            }
        }
        // gamma lands in the scalars.
        for idx in 0..cm.anchors().len() {
            let img = cm.gamma_entry(idx);
            assert!(
                img.iter().all(|(w, _)| w.is_empty()),
                "gamma image is not scalar: {}",
                cm.v_pres().show_poly(img)
            );
        }
    }

    #[test]
    fn flipped_multiplet_is_rejected() {
        let (od, inv, _hat, _s) = suq2_d2();
        let v = free_line();
        let mut b = trivial_multiplet(&od, &v);
        b[0][1] = b[0][1].scale(&-Scalar::one());
        match extract_classifying_map(&od, &inv, &v, &b) {
            Err(CrossError::NotEquivariant { .. }) | Err(CrossError::NotIsometric { .. }) => {}
            Err(e) => panic!("doctored multiplet rejected for the wrong reason: {e}"),
            Ok(_) => panic!("doctored multiplet must be rejected"),
        }
    }

    #[test]
    fn trivial_map_validates_and_flips() {
        let (od, inv, hat, s) = suq2_d2();
        let v = free_line();
        let b = trivial_multiplet(&od, &v);
        let cm = extract_classifying_map(&od, &inv, &v, &b).unwrap();
        let flip = FlipOperator::new(&cm, &hat, &s, 4).unwrap();
        let report = validate_classifying_map(&flip, &s, 2, 42).unwrap();
        for f in report.failures() {
            eprintln!("{f:?}");
        }
        assert!(report.passed());
        let report = verify_flip(&flip, 2, 42).unwrap();
        for f in report.failures() {
            eprintln!("{f:?}");
        }
        assert!(report.passed());
        let report = flip_bijectivity_check(&flip, 2, 10, 42).unwrap();
        for f in report.failures() {
            eprintln!("{f:?}");
        }
        assert!(report.passed());
    }

    #[test]
    fn trivial_bundle_round_trips() {
        let (od, inv, hat, s) = suq2_d2();
        let v = free_line();
        let b = trivial_multiplet(&od, &v);
        let cm = extract_classifying_map(&od, &inv, &v, &b).unwrap();
        let bundle = build_bundle(&cm, &hat, &s, 2).unwrap();
        let report = verify_roundtrip_model(&bundle, &b, 2, 42).unwrap();
        for f in report.failures() {
            eprintln!("{f:?}");
        }
        assert!(report.passed());
    }

    #[test]
    fn perturbed_gamma_is_detected() {
        let (od, inv, hat, s) = suq2_d1();
        let mut cm = ClassifyingMap::universal(&od, &inv).unwrap();
        // Scale a degree-2 entry of the gamma table (index 1 is the first
        // entry past the unit).
        cm.perturb_gamma(1, &Scalar::q());
        let flip = FlipOperator::new(&cm, &hat, &s, 3).unwrap();
        let report = validate_classifying_map(&flip, &s, 3, 42).unwrap();
        assert!(
            !report.passed(),
            "a perturbed gamma table must fail validation"
        );
    }

    #[test]
    fn map_file_loads_and_validates() {
        let (od, inv, hat, s) = suq2_d2();
        let v = free_line();
        let b = trivial_multiplet(&od, &v);
        let extracted = extract_classifying_map(&od, &inv, &v, &b).unwrap();
        // Serialize the extracted tables through the file shape and back.
        let mut rho = BTreeMap::new();
        let mut rows = Vec::new();
        for k in 0..2 {
            let mut row = Vec::new();
            for l in 0..2 {
                let p = extracted
                    .rho(k, l, &NCPoly::from_word(Word::single(0)))
                    .unwrap();
                row.push(v.pres().show_poly(&p));
            }
            rows.push(row);
        }
        rho.insert("x".to_string(), rows);
        let mut gamma = BTreeMap::new();
        for (label, idx) in invariant_labels(&inv).iter().zip(0usize..) {
            gamma.insert(
                label.clone(),
                v.pres().show_poly(extracted.gamma_entry(idx)),
            );
        }
        let file = ClassifyingMapFile { d: 2, rho, gamma };
        let cm = load_classifying_map(&od, &inv, &v, &file).unwrap();
        let flip = FlipOperator::new(&cm, &hat, &s, 2).unwrap();
        let report = validate_classifying_map(&flip, &s, 2, 42).unwrap();
        for f in report.failures() {
            eprintln!("{f:?}");
        }
        assert!(report.passed());
    }
}
