//! Compact matrix quantum groups as Hopf *-algebra data over a presented
//! algebra: structure tables, axiom verification, the Haar state, and the
//! canonical intertwiner between the fundamental corepresentation and its
//! double contragredient.
//!
//! Group data enters through the JSON dialect of [`crate::io`] (a
//! presentation plus a `hopf` stanza) and is compiled against the completed
//! rewrite system, so every table lives in normal form and each identity
//! below is decided by exact reduction. Two groups ship built in: `su_q_2`
//! and `u1`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::free::{GenId, NCPoly, Presentation, Word};
use crate::io::{self, GroupFile, IoError};
use crate::linalg::{KeyIndex, LinearSystem, SolveOutcome, SparseVec};
use crate::report::Report;
use crate::rewrite::{CompletionError, RewriteError, RewriteSystem};
use crate::scalar::Scalar;
use crate::tensor::MultiTensor;

const SU_Q_2_SRC: &str = include_str!("../data/su_q_2.json");
const U1_SRC: &str = include_str!("../data/u1.json");

/// Completion bound for the built-in groups. Both complete with every
/// ambiguity resolved well inside this bound, so their normal forms are
/// exact in all degrees; the bound only caps certificate bookkeeping.
const BUILTIN_BOUND: u64 = 4;

#[derive(Debug, Error)]
pub enum HopfError {
    #[error("unknown built-in group `{0}`")]
    UnknownGroup(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error("fundamental matrix must be square and nonempty")]
    BadFundamentalMatrix,
    #[error("invariance system at bound {bound} leaves a {dim}-dimensional family of states")]
    NonUniqueHaar { bound: u64, dim: usize },
    #[error("invariance system at bound {bound} is inconsistent; raise the bound")]
    InconsistentHaar { bound: u64 },
    #[error("no nonzero intertwiner between u and its double contragredient")]
    NoIntertwiner,
    #[error("intertwiner space has dimension {dim}; fundamental corepresentation is not irreducible enough to normalize")]
    NonScalarAmbiguity { dim: usize },
    #[error("trace normalization failed: {0}")]
    TraceNormalization(String),
    #[error("word `{word}` lies outside the Haar table computed at bound {bound}")]
    HaarOutOfRange { word: String, bound: u64 },
}

/// A compact matrix quantum group: completed relations plus the Hopf tables,
/// everything stored in normal form.
pub struct HopfGroupData {
    rs: RewriteSystem,
    u: Vec<Vec<NCPoly>>,
    coproduct: Vec<MultiTensor>,
    counit: Vec<Scalar>,
    antipode: Vec<NCPoly>,
    m: Option<u32>,
}

/// Load one of the built-in groups by name (`su_q_2` or `u1`).
pub fn builtin_group(name: &str) -> Result<HopfGroupData, HopfError> {
    let src = match name {
        "su_q_2" => SU_Q_2_SRC,
        "u1" => U1_SRC,
        _ => return Err(HopfError::UnknownGroup(name.to_string())),
    };
    let file = io::group_file(src)?;
    HopfGroupData::from_file(&file, BUILTIN_BOUND)
}

fn table_poly(
    rs: &RewriteSystem,
    src: &str,
    pointer: &str,
) -> Result<NCPoly, HopfError> {
    let p = io::parse_poly(rs.pres(), src)
        .map_err(|e| IoError::at(pointer, format!("column {}: {}", e.col, e.msg)))?;
    Ok(rs.normal_form(&p)?)
}

impl HopfGroupData {
    /// Compile a group file: complete the presentation at `bound`, then
    /// parse and reduce all Hopf tables. Every generator must appear in the
    /// coproduct, counit and antipode tables, and no table may name a
    /// generator the presentation does not have.
    pub fn from_file(file: &GroupFile, bound: u64) -> Result<HopfGroupData, HopfError> {
        let mut pres = io::build_generators(&file.generators, false)?;
        io::push_relations(&mut pres, &file.relations)?;
        let rs = RewriteSystem::complete(pres, bound)?;

        let h = &file.hopf;
        let n = h.u.len();
        if n == 0 || h.u.iter().any(|row| row.len() != n) {
            return Err(HopfError::BadFundamentalMatrix);
        }
        let mut u = Vec::with_capacity(n);
        for (i, row) in h.u.iter().enumerate() {
            let mut out = Vec::with_capacity(n);
            for (j, src) in row.iter().enumerate() {
                out.push(table_poly(&rs, src, &format!("/hopf/u/{i}/{j}"))?);
            }
            u.push(out);
        }

        for key in h.coproduct.keys() {
            if rs.pres().gen_index(key).is_none() {
                return Err(IoError::at(format!("/hopf/coproduct/{key}"), "unknown generator").into());
            }
        }
        for key in h.counit.keys() {
            if rs.pres().gen_index(key).is_none() {
                return Err(IoError::at(format!("/hopf/counit/{key}"), "unknown generator").into());
            }
        }
        for key in h.antipode.keys() {
            if rs.pres().gen_index(key).is_none() {
                return Err(IoError::at(format!("/hopf/antipode/{key}"), "unknown generator").into());
            }
        }

        let n_gens = rs.pres().n_gens();
        let mut coproduct = Vec::with_capacity(n_gens);
        let mut counit = Vec::with_capacity(n_gens);
        let mut antipode = Vec::with_capacity(n_gens);
        for g in 0..n_gens {
            let name = rs.pres().gen(g as GenId).name.clone();
            let pairs = h
                .coproduct
                .get(&name)
                .ok_or_else(|| IoError::at(format!("/hopf/coproduct/{name}"), "missing entry"))?;
            let mut t = MultiTensor::zero(2);
            for (k, (left, right)) in pairs.iter().enumerate() {
                let lp = table_poly(&rs, left, &format!("/hopf/coproduct/{name}/{k}/0"))?;
                let rp = table_poly(&rs, right, &format!("/hopf/coproduct/{name}/{k}/1"))?;
                for (lw, lc) in lp.iter() {
                    for (rw, rc) in rp.iter() {
                        t.add_term(vec![lw.clone(), rw.clone()], lc.clone() * rc.clone());
                    }
                }
            }
            coproduct.push(t);

            let eps_src = h
                .counit
                .get(&name)
                .ok_or_else(|| IoError::at(format!("/hopf/counit/{name}"), "missing entry"))?;
            counit.push(Scalar::parse(eps_src).map_err(|e| {
                IoError::at(
                    format!("/hopf/counit/{name}"),
                    format!("column {}: {}", e.col, e.msg),
                )
            })?);

            let kap_src = h
                .antipode
                .get(&name)
                .ok_or_else(|| IoError::at(format!("/hopf/antipode/{name}"), "missing entry"))?;
            antipode.push(table_poly(&rs, kap_src, &format!("/hopf/antipode/{name}"))?);
        }

        Ok(HopfGroupData {
            rs,
            u,
            coproduct,
            counit,
            antipode,
            m: h.m,
        })
    }

    pub fn rs(&self) -> &RewriteSystem {
        &self.rs
    }

    pub fn pres(&self) -> &Presentation {
        self.rs.pres()
    }

    /// Size of the fundamental corepresentation matrix.
    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn u(&self) -> &[Vec<NCPoly>] {
        &self.u
    }

    pub fn u_entry(&self, i: usize, j: usize) -> &NCPoly {
        &self.u[i][j]
    }

    /// Reduced star of a fundamental matrix entry. Stars preserve the
    /// bounding degree, so reduction cannot overflow where `u` itself
    /// reduced.
    pub fn u_star(&self, i: usize, j: usize) -> NCPoly {
        let starred = self.pres().star_poly(&self.u[i][j]);
        self.rs
            .normal_form(&starred)
            .expect("star preserves the bounding degree")
    }

    /// Declared multiplet order, if the data file records one.
    pub fn m(&self) -> Option<u32> {
        self.m
    }

    pub fn coproduct_gen(&self, g: GenId) -> &MultiTensor {
        &self.coproduct[g as usize]
    }

    /// Coproduct of a word, extended multiplicatively and reduced leg by
    /// leg after each factor.
    pub fn coproduct_word(&self, w: &Word) -> Result<MultiTensor, RewriteError> {
        let pres = self.pres();
        let mut t = MultiTensor::unit(2);
        for &g in &w.0 {
            t = t.mul(self.coproduct_gen(g), &[pres, pres]);
            t = t.normal_form(&[&self.rs, &self.rs])?;
        }
        Ok(t)
    }

    pub fn coproduct(&self, p: &NCPoly) -> Result<MultiTensor, RewriteError> {
        let mut out = MultiTensor::zero(2);
        for (w, c) in p.iter() {
            out += &self.coproduct_word(w)?.scale(c);
        }
        Ok(out)
    }

    pub fn counit_word(&self, w: &Word) -> Scalar {
        let mut out = Scalar::one();
        for &g in &w.0 {
            if out.is_zero() {
                return out;
            }
            out = out * self.counit[g as usize].clone();
        }
        out
    }

    pub fn counit(&self, p: &NCPoly) -> Scalar {
        let mut out = Scalar::zero();
        for (w, c) in p.iter() {
            out = out + c.clone() * self.counit_word(w);
        }
        out
    }

    /// Antipode extended antimultiplicatively from the generator table,
    /// then reduced.
    pub fn antipode(&self, p: &NCPoly) -> Result<NCPoly, RewriteError> {
        let img = self
            .pres()
            .substitute(p, &|g| self.antipode[g as usize].clone(), true);
        self.rs.normal_form(&img)
    }

    fn antipode_word(&self, w: &Word) -> Result<NCPoly, RewriteError> {
        self.antipode(&NCPoly::from_word(w.clone()))
    }
}

/// Apply the coproduct to one leg of a tensor, collecting any reduction
/// error from inside the leg map.
fn split_leg(
    g: &HopfGroupData,
    t: &MultiTensor,
    leg: usize,
) -> Result<MultiTensor, RewriteError> {
    let mut err = None;
    let out = t.map_leg_tensor(leg, 2, &mut |w| match g.coproduct_word(w) {
        Ok(v) => v,
        Err(e) => {
            err = Some(e);
            MultiTensor::zero(2)
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn tensor_of_poly(p: &NCPoly) -> MultiTensor {
    let mut t = MultiTensor::zero(1);
    for (w, c) in p.iter() {
        t.add_term(vec![w.clone()], c.clone());
    }
    t
}

/// Check the Hopf *-algebra axioms on the stored tables: the tables must
/// descend to the quotient, the coproduct must be coassociative and
/// counital, the antipode must invert the identity in convolution, the
/// coproduct must commute with the star, and the fundamental matrix must be
/// unitary. Coassociativity and counitality are additionally swept over the
/// reduced word basis up to `degree` as a self-test of the multiplicative
/// extension.
pub fn verify_hopf_axioms(g: &HopfGroupData, degree: u64) -> Report {
    let mut rep = Report::new();
    let pres = g.pres();
    let two = [pres, pres];
    let three = [pres, pres, pres];

    for (i, r) in pres.relations().iter().enumerate() {
        let id = format!("hopf.relation_coproduct.{i}");
        match g.coproduct(r) {
            Ok(t) => rep.residual(id, t.show_terms(&two)),
            Err(e) => rep.fail_note(id, e.to_string()),
        }
        let eps = g.counit(r);
        let eps_terms = if eps.is_zero() { vec![] } else { vec![eps.to_string()] };
        rep.residual(format!("hopf.relation_counit.{i}"), eps_terms);
        let id = format!("hopf.relation_antipode.{i}");
        match g.antipode(r) {
            Ok(p) => rep.residual(id, pres.show_terms(&p)),
            Err(e) => rep.fail_note(id, e.to_string()),
        }
    }

    for gid in 0..pres.n_gens() {
        let name = pres.gen(gid as GenId).name.clone();
        let phi = g.coproduct_gen(gid as GenId);

        let id = format!("hopf.coassoc.{name}");
        match split_leg(g, phi, 0).and_then(|l| Ok((l, split_leg(g, phi, 1)?))) {
            Ok((lhs, rhs)) => rep.residual(id, (&lhs - &rhs).show_terms(&three)),
            Err(e) => rep.fail_note(id, e.to_string()),
        }

        let gen_tensor = match g.rs().nf_word(&Word::single(gid as GenId)) {
            Ok(p) => tensor_of_poly(&p),
            Err(e) => {
                rep.fail_note(format!("hopf.counit_left.{name}"), e.to_string());
                continue;
            }
        };
        let left = phi.contract_leg(0, &mut |w| g.counit_word(w));
        rep.residual(
            format!("hopf.counit_left.{name}"),
            (&left - &gen_tensor).show_terms(&[pres]),
        );
        let right = phi.contract_leg(1, &mut |w| g.counit_word(w));
        rep.residual(
            format!("hopf.counit_right.{name}"),
            (&right - &gen_tensor).show_terms(&[pres]),
        );

        // convolution inverses: sum k(x) y and sum x k(y) against e(g) 1
        let target = NCPoly::constant(g.counit_word(&Word::single(gid as GenId)));
        let conv = |kappa_left: bool| -> Result<NCPoly, RewriteError> {
            let mut acc = NCPoly::zero();
            for (legs, c) in phi.iter() {
                let (x, y) = (&legs[0], &legs[1]);
                let prod = if kappa_left {
                    g.antipode_word(x)?.mul_word(y)
                } else {
                    g.antipode_word(y)?.word_mul(x)
                };
                acc = acc + prod.scale(c);
            }
            g.rs().normal_form(&(acc - target.clone()))
        };
        match conv(true) {
            Ok(p) => rep.residual(format!("hopf.antipode_left.{name}"), pres.show_terms(&p)),
            Err(e) => rep.fail_note(format!("hopf.antipode_left.{name}"), e.to_string()),
        }
        match conv(false) {
            Ok(p) => rep.residual(format!("hopf.antipode_right.{name}"), pres.show_terms(&p)),
            Err(e) => rep.fail_note(format!("hopf.antipode_right.{name}"), e.to_string()),
        }

        // coproduct of the star against the starred coproduct
        let id = format!("hopf.star.{name}");
        let star_gen = pres.star_poly(&NCPoly::from_word(Word::single(gid as GenId)));
        match g.coproduct(&star_gen) {
            Ok(lhs) => match phi.star(&two).normal_form(&[g.rs(), g.rs()]) {
                Ok(rhs) => rep.residual(id, (&lhs - &rhs).show_terms(&two)),
                Err(e) => rep.fail_note(id, e.to_string()),
            },
            Err(e) => rep.fail_note(id, e.to_string()),
        }
    }

    let n = g.n();
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { NCPoly::one() } else { NCPoly::zero() };
            let mut left = NCPoly::zero();
            let mut right = NCPoly::zero();
            for k in 0..n {
                left = left + &g.u_star(k, i) * &g.u[k][j];
                right = right + &g.u[i][k] * &g.u_star(j, k);
            }
            let id = format!("hopf.unitary_left.{i}.{j}");
            match g.rs().normal_form(&(left - delta.clone())) {
                Ok(p) => rep.residual(id, pres.show_terms(&p)),
                Err(e) => rep.fail_note(id, e.to_string()),
            }
            let id = format!("hopf.unitary_right.{i}.{j}");
            match g.rs().normal_form(&(right - delta)) {
                Ok(p) => rep.residual(id, pres.show_terms(&p)),
                Err(e) => rep.fail_note(id, e.to_string()),
            }
        }
    }

    // basis sweep: multiplicative extension really is coassociative and
    // counital on every reduced word up to the requested degree
    for k in 0..=degree {
        let words = g.rs().basis_of_degree(k);
        let mut coassoc_bad: Vec<String> = Vec::new();
        let mut counit_bad: Vec<String> = Vec::new();
        let mut note = None;
        for w in &words {
            let phi = match g.coproduct_word(w) {
                Ok(t) => t,
                Err(e) => {
                    note = Some(e.to_string());
                    break;
                }
            };
            match split_leg(g, &phi, 0).and_then(|l| Ok((l, split_leg(g, &phi, 1)?))) {
                Ok((lhs, rhs)) => {
                    if !(&lhs - &rhs).is_zero() {
                        coassoc_bad.extend((&lhs - &rhs).show_terms(&three));
                    }
                }
                Err(e) => {
                    note = Some(e.to_string());
                    break;
                }
            }
            let w_tensor = tensor_of_poly(&NCPoly::from_word(w.clone()));
            let left = phi.contract_leg(0, &mut |v| g.counit_word(v));
            let right = phi.contract_leg(1, &mut |v| g.counit_word(v));
            for diff in [&left - &w_tensor, &right - &w_tensor] {
                if !diff.is_zero() {
                    counit_bad.extend(diff.show_terms(&[pres]));
                }
            }
        }
        if let Some(msg) = note {
            rep.fail_note(format!("hopf.coassoc_basis.{k}"), msg);
            continue;
        }
        rep.residual(format!("hopf.coassoc_basis.{k}"), coassoc_bad);
        rep.residual(format!("hopf.counit_basis.{k}"), counit_bad);
    }

    rep
}

/// The Haar state restricted to reduced words of bounding degree at most
/// the computation bound.
pub struct HaarTable {
    bound: u64,
    values: BTreeMap<Word, Scalar>,
}

impl HaarTable {
    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn get(&self, w: &Word) -> Option<&Scalar> {
        self.values.get(w)
    }

    pub fn values(&self) -> impl Iterator<Item = (&Word, &Scalar)> {
        self.values.iter()
    }

    /// Apply the state to a polynomial already in normal form.
    pub fn apply(&self, pres: &Presentation, p: &NCPoly) -> Result<Scalar, HopfError> {
        let mut out = Scalar::zero();
        for (w, c) in p.iter() {
            let v = self.values.get(w).ok_or_else(|| HopfError::HaarOutOfRange {
                word: pres.show_word(w),
                bound: self.bound,
            })?;
            out = out + c.clone() * v.clone();
        }
        Ok(out)
    }
}

fn add_to(row: &mut SparseVec, col: usize, c: &Scalar) {
    let entry = row.entry(col).or_insert_with(Scalar::zero);
    *entry = entry.clone() + c.clone();
    if entry.is_zero() {
        row.remove(&col);
    }
}

/// Solve for the Haar state on the span of reduced words of bounding degree
/// at most `bound`: the unique normalized functional with
/// (id (x) h) phi(x) = h(x) 1 = (h (x) id) phi(x) on that span.
pub fn haar_state(g: &HopfGroupData, bound: u64) -> Result<HaarTable, HopfError> {
    let basis = g.rs().basis(bound);
    let mut ix: KeyIndex<Word> = KeyIndex::new();
    for w in &basis {
        ix.intern(w);
    }

    let mut homogeneous: Vec<SparseVec> = Vec::new();
    for b in &basis {
        let b_col = ix.intern(b);
        let t = g.coproduct_word(b)?;
        // group phi(b) by each leg in turn; the complementary leg carries
        // the unknowns
        let mut by_right: BTreeMap<Word, SparseVec> = BTreeMap::new();
        let mut by_left: BTreeMap<Word, SparseVec> = BTreeMap::new();
        for (legs, c) in t.iter() {
            let (x, y) = (&legs[0], &legs[1]);
            add_to(by_right.entry(y.clone()).or_default(), ix.intern(x), c);
            add_to(by_left.entry(x.clone()).or_default(), ix.intern(y), c);
        }
        for (y, mut row) in by_right {
            if y.is_empty() {
                add_to(&mut row, b_col, &-Scalar::one());
            }
            if !row.is_empty() {
                homogeneous.push(row);
            }
        }
        for (x, mut row) in by_left {
            if x.is_empty() {
                add_to(&mut row, b_col, &-Scalar::one());
            }
            if !row.is_empty() {
                homogeneous.push(row);
            }
        }
    }

    let mut sys = LinearSystem::new(ix.len());
    for row in homogeneous {
        sys.add_homogeneous(row);
    }
    let one_col = ix
        .get(&Word::one())
        .expect("empty word is always in the basis");
    let mut norm = SparseVec::new();
    norm.insert(one_col, Scalar::one());
    sys.add_equation(norm, Scalar::one());

    match sys.solve() {
        SolveOutcome::Unique(v) => {
            let mut values = BTreeMap::new();
            for (i, c) in v.into_iter().enumerate() {
                values.insert(ix.key(i).clone(), c);
            }
            Ok(HaarTable { bound, values })
        }
        SolveOutcome::Underdetermined { nullspace, .. } => Err(HopfError::NonUniqueHaar {
            bound,
            dim: nullspace.len(),
        }),
        SolveOutcome::Inconsistent => Err(HopfError::InconsistentHaar { bound }),
    }
}

/// The canonical intertwiner C with kappa^2(u) = C u C^{-1}, normalized so
/// that trace(C) = trace(C^{-1}) with positive scaling.
pub struct IntertwinerC {
    c: Vec<Vec<Scalar>>,
    c_inv: Vec<Vec<Scalar>>,
}

impl IntertwinerC {
    /// Assemble from explicit matrices. The caller is responsible for the
    /// two being inverse to each other; verification drivers use this to
    /// probe deliberately corrupted data.
    pub fn from_parts(c: Vec<Vec<Scalar>>, c_inv: Vec<Vec<Scalar>>) -> IntertwinerC {
        IntertwinerC { c, c_inv }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn c(&self) -> &[Vec<Scalar>] {
        &self.c
    }

    pub fn c_inv(&self) -> &[Vec<Scalar>] {
        &self.c_inv
    }

    pub fn trace(&self) -> Scalar {
        let mut t = Scalar::zero();
        for i in 0..self.n() {
            t = t + self.c[i][i].clone();
        }
        t
    }

    pub fn trace_inv(&self) -> Scalar {
        let mut t = Scalar::zero();
        for i in 0..self.n() {
            t = t + self.c_inv[i][i].clone();
        }
        t
    }
}

/// Gauss-Jordan inverse over the scalar field.
fn invert_matrix(m: &[Vec<Scalar>]) -> Option<Vec<Vec<Scalar>>> {
    let n = m.len();
    let mut a: Vec<Vec<Scalar>> = m.to_vec();
    let mut inv: Vec<Vec<Scalar>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Scalar::one() } else { Scalar::zero() })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone().inv()?;
        for j in 0..n {
            a[col][j] = a[col][j].clone() * p.clone();
            inv[col][j] = inv[col][j].clone() * p.clone();
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..n {
                a[r][j] = a[r][j].clone() - f.clone() * a[col][j].clone();
                inv[r][j] = inv[r][j].clone() - f.clone() * inv[col][j].clone();
            }
        }
    }
    Some(inv)
}

/// Solve kappa^2(u_ij) C = C u_ij for a scalar matrix C, then normalize the
/// one-dimensional solution line so the traces of C and C^{-1} agree.
pub fn canonical_intertwiner(g: &HopfGroupData) -> Result<IntertwinerC, HopfError> {
    let n = g.n();
    let mut k2 = Vec::with_capacity(n);
    for row in g.u() {
        let mut out = Vec::with_capacity(n);
        for p in row {
            out.push(g.antipode(&g.antipode(p)?)?);
        }
        k2.push(out);
    }

    let col = |k: usize, j: usize| k * n + j;
    let mut sys = LinearSystem::new(n * n);
    for i in 0..n {
        for j in 0..n {
            // sum_k k2[i][k] C_{kj} - sum_k C_{ik} u[k][j] = 0, split by word
            let mut per_word: BTreeMap<Word, SparseVec> = BTreeMap::new();
            for k in 0..n {
                for (w, cf) in k2[i][k].iter() {
                    add_to(per_word.entry(w.clone()).or_default(), col(k, j), cf);
                }
                for (w, cf) in g.u()[k][j].iter() {
                    add_to(per_word.entry(w.clone()).or_default(), col(i, k), &-cf.clone());
                }
            }
            for (_, row) in per_word {
                if !row.is_empty() {
                    sys.add_homogeneous(row);
                }
            }
        }
    }

    let line = match sys.solve() {
        SolveOutcome::Unique(_) => return Err(HopfError::NoIntertwiner),
        SolveOutcome::Underdetermined { nullspace, .. } => {
            if nullspace.len() != 1 {
                return Err(HopfError::NonScalarAmbiguity {
                    dim: nullspace.len(),
                });
            }
            nullspace.into_iter().next().unwrap()
        }
        SolveOutcome::Inconsistent => return Err(HopfError::NoIntertwiner),
    };

    let c0: Vec<Vec<Scalar>> = (0..n)
        .map(|k| (0..n).map(|j| line[col(k, j)].clone()).collect())
        .collect();
    let inv0 = invert_matrix(&c0).ok_or(HopfError::NoIntertwiner)?;

    let mut tr = Scalar::zero();
    let mut tr_inv = Scalar::zero();
    for i in 0..n {
        tr = tr + c0[i][i].clone();
        tr_inv = tr_inv + inv0[i][i].clone();
    }
    if tr.is_zero() {
        return Err(HopfError::TraceNormalization(
            "solution line has trace zero".to_string(),
        ));
    }
    let ratio = tr_inv * tr.inv().expect("nonzero trace");
    let t = ratio.sqrt().ok_or_else(|| {
        HopfError::TraceNormalization(format!("({ratio}) has no square root in the scalar field"))
    })?;
    let t_inv = t.inv().ok_or_else(|| {
        HopfError::TraceNormalization("scaling factor is zero".to_string())
    })?;

    let c = c0
        .iter()
        .map(|row| row.iter().map(|x| x.clone() * t.clone()).collect())
        .collect();
    let c_inv = inv0
        .iter()
        .map(|row| row.iter().map(|x| x.clone() * t_inv.clone()).collect())
        .collect();
    Ok(IntertwinerC { c, c_inv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::Ratio;

    fn sc(src: &str) -> Scalar {
        Scalar::parse(src).unwrap()
    }

    fn nf(g: &HopfGroupData, src: &str) -> NCPoly {
        let p = io::parse_poly(g.pres(), src).unwrap();
        g.rs().normal_form(&p).unwrap()
    }

    #[test]
    fn unknown_builtin_is_rejected() {
        assert!(matches!(
            builtin_group("foo"),
            Err(HopfError::UnknownGroup(name)) if name == "foo"
        ));
    }

    #[test]
    fn builtins_satisfy_hopf_axioms() {
        for name in ["su_q_2", "u1"] {
            let g = builtin_group(name).unwrap();
            let rep = verify_hopf_axioms(&g, 4);
            let bad: Vec<_> = rep.failures().collect();
            assert!(bad.is_empty(), "{name}: {bad:?}");
        }
    }

    #[test]
    fn builtin_metadata() {
        let g = builtin_group("su_q_2").unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.m(), Some(1));
        assert!(g.rs().globally_confluent());
        let g = builtin_group("u1").unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.m(), None);
        assert!(g.rs().globally_confluent());
    }

    #[test]
    fn haar_su_q_2_low_degree_values() {
        let g = builtin_group("su_q_2").unwrap();
        let h = haar_state(&g, 4).unwrap();
        let ha = |src: &str| h.apply(g.pres(), &nf(&g, src)).unwrap();
        assert_eq!(ha("1"), Scalar::one());
        assert!(ha("a").is_zero());
        assert!(ha("c").is_zero());
        assert!(ha("c*").is_zero());
        assert!(ha("a c").is_zero());
        assert_eq!(ha("c c*"), sc("1/(1+q^2)"));
        assert_eq!(ha("c* c"), sc("1/(1+q^2)"));
        assert_eq!(ha("a a*"), sc("1/(1+q^2)"));
        assert_eq!(ha("a* a"), sc("q^2/(1+q^2)"));
        assert_eq!(ha("c c c* c*"), sc("1/(1+q^2+q^4)"));
    }

    #[test]
    fn haar_u1_kills_every_nontrivial_word() {
        let g = builtin_group("u1").unwrap();
        let h = haar_state(&g, 4).unwrap();
        for (w, v) in h.values() {
            if w.is_empty() {
                assert!(v.is_one());
            } else {
                assert!(v.is_zero(), "h({}) = {v}", g.pres().show_word(w));
            }
        }
    }

    #[test]
    fn haar_restriction_is_stable() {
        let g = builtin_group("su_q_2").unwrap();
        let h2 = haar_state(&g, 2).unwrap();
        let h3 = haar_state(&g, 3).unwrap();
        for (w, v) in h2.values() {
            assert_eq!(h3.get(w), Some(v), "word {}", g.pres().show_word(w));
        }
    }

    #[test]
    fn haar_table_rejects_words_beyond_bound() {
        let g = builtin_group("su_q_2").unwrap();
        let h = haar_state(&g, 2).unwrap();
        let p = nf(&g, "c c c c");
        assert!(matches!(
            h.apply(g.pres(), &p),
            Err(HopfError::HaarOutOfRange { .. })
        ));
    }

    fn quad_nonneg(q: &Ratio<BigInt>, a: &Ratio<BigInt>, b: &Ratio<BigInt>) -> bool {
        let zero = Ratio::from_integer(BigInt::from(0));
        match (a >= &zero, b >= &zero) {
            (true, true) => true,
            (false, false) => a == &zero && b == &zero,
            (true, false) => a * a >= b * b * q,
            (false, true) => b * b * q >= a * a,
        }
    }

    #[test]
    fn haar_is_positive_at_q_one_half() {
        let g = builtin_group("su_q_2").unwrap();
        let h = haar_state(&g, 4).unwrap();
        let q0 = Ratio::new(BigInt::from(1), BigInt::from(2));
        for w in g.rs().basis(2) {
            let x = NCPoly::from_word(w.clone());
            let xsx = g.pres().star_poly(&x) * x;
            let v = h
                .apply(g.pres(), &g.rs().normal_form(&xsx).unwrap())
                .unwrap();
            let ev = v.eval(&q0).unwrap();
            assert!(
                quad_nonneg(&ev.q, &ev.a, &ev.b),
                "h(x* x) < 0 for x = {}",
                g.pres().show_word(&w)
            );
        }
    }

    #[test]
    fn intertwiner_su_q_2() {
        let g = builtin_group("su_q_2").unwrap();
        let c = canonical_intertwiner(&g).unwrap();
        assert_eq!(c.c()[0], vec![sc("q^-1"), sc("0")]);
        assert_eq!(c.c()[1], vec![sc("0"), sc("q")]);
        assert_eq!(c.c_inv()[0], vec![sc("q"), sc("0")]);
        assert_eq!(c.c_inv()[1], vec![sc("0"), sc("q^-1")]);
        assert_eq!(c.trace(), c.trace_inv());
        // the defining relation holds entrywise: kappa^2(u) = C u C^{-1}
        for i in 0..2 {
            for j in 0..2 {
                let k2 = g.antipode(&g.antipode(g.u_entry(i, j)).unwrap()).unwrap();
                let mut rhs = NCPoly::zero();
                for k in 0..2 {
                    for l in 0..2 {
                        let coeff = c.c()[i][k].clone() * c.c_inv()[l][j].clone();
                        rhs = rhs + g.u_entry(k, l).scale(&coeff);
                    }
                }
                let diff = g.rs().normal_form(&(k2 - rhs)).unwrap();
                assert!(diff.is_zero(), "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn intertwiner_u1_is_identity() {
        let g = builtin_group("u1").unwrap();
        let c = canonical_intertwiner(&g).unwrap();
        assert_eq!(c.c(), &[vec![Scalar::one()]]);
        assert_eq!(c.c_inv(), &[vec![Scalar::one()]]);
    }

    #[test]
    fn torus_intertwiner_is_ambiguous() {
        // classical 2-torus: diagonal fundamental matrix, kappa^2 = id, so
        // every diagonal matrix intertwines
        let src = r#"{
            "generators": [
                {"name": "z", "star": "w"}, {"name": "w", "star": "z"},
                {"name": "s", "star": "t"}, {"name": "t", "star": "s"}
            ],
            "relations": [
                [[["z", "w"], "1"], [[], "-1"]],
                [[["w", "z"], "1"], [[], "-1"]],
                [[["s", "t"], "1"], [[], "-1"]],
                [[["t", "s"], "1"], [[], "-1"]],
                [[["s", "z"], "1"], [["z", "s"], "-1"]],
                [[["t", "z"], "1"], [["z", "t"], "-1"]],
                [[["s", "w"], "1"], [["w", "s"], "-1"]],
                [[["t", "w"], "1"], [["w", "t"], "-1"]]
            ],
            "hopf": {
                "u": [["z", "0"], ["0", "s"]],
                "coproduct": {
                    "z": [["z", "z"]], "w": [["w", "w"]],
                    "s": [["s", "s"]], "t": [["t", "t"]]
                },
                "counit": {"z": "1", "w": "1", "s": "1", "t": "1"},
                "antipode": {"z": "w", "w": "z", "s": "t", "t": "s"}
            }
        }"#;
        let file = io::group_file(src).unwrap();
        let g = HopfGroupData::from_file(&file, 4).unwrap();
        assert!(verify_hopf_axioms(&g, 2).passed());
        assert!(matches!(
            canonical_intertwiner(&g),
            Err(HopfError::NonScalarAmbiguity { dim: 2 })
        ));
    }

    #[test]
    fn mutated_relation_collapses_quotient() {
        let mut file = io::group_file(SU_Q_2_SRC).unwrap();
        // flip the commutation coefficient in a c = q c a and its star
        // partner, keeping the relation set star-closed
        for idx in [0, 4] {
            for term in file.relations[idx].iter_mut() {
                if term.1 == "-q" {
                    term.1 = "-1".to_string();
                }
            }
        }
        // the flipped ideal is much bigger: completion either rejects it or
        // kills generators outright, so the degree-one basis shrinks
        match HopfGroupData::from_file(&file, BUILTIN_BOUND) {
            Err(_) => {}
            Ok(g) => {
                let pristine = builtin_group("su_q_2").unwrap();
                let before = pristine.rs().basis_of_degree(1).len();
                let after = g.rs().basis_of_degree(1).len();
                assert!(after < before, "mutation went unnoticed: {after} vs {before}");
            }
        }
    }

    #[test]
    fn mutated_antipode_fails_verification() {
        let mut file = io::group_file(SU_Q_2_SRC).unwrap();
        file.hopf.antipode.insert("c".to_string(), "-c".to_string());
        let g = HopfGroupData::from_file(&file, BUILTIN_BOUND).map_err(|e| e.to_string()).unwrap();
        let rep = verify_hopf_axioms(&g, 2);
        assert!(!rep.passed());
        assert!(
            rep.failures().any(|f| f.check.starts_with("hopf.antipode")),
            "expected an antipode convolution failure"
        );
    }

    #[test]
    fn missing_table_entry_is_an_io_error() {
        let mut file = io::group_file(U1_SRC).unwrap();
        file.hopf.counit.remove("z");
        match HopfGroupData::from_file(&file, 2) {
            Err(HopfError::Io(e)) => assert_eq!(e.pointer, "/hopf/counit/z"),
            Err(other) => panic!("expected io error, got {other:?}"),
            Ok(_) => panic!("missing counit entry was accepted"),
        }
    }
}

