//! Exact sparse linear algebra over the scalar field.
//!
//! Everything here is deterministic: rows and columns are visited in index
//! order, echelon forms are fully reduced (pivots 1, pivot columns cleared),
//! and nullspace vectors are scaled so their first nonzero coordinate is 1.

use crate::free::NCPoly;
use crate::scalar::Scalar;
use std::collections::BTreeMap;

/// Sparse vector: coordinate index to nonzero coefficient.
pub type SparseVec = BTreeMap<usize, Scalar>;

pub fn sparse_add_scaled(target: &mut SparseVec, source: &SparseVec, c: &Scalar) {
    if c.is_zero() {
        return;
    }
    for (&i, a) in source {
        let entry = target.entry(i).or_default();
        *entry += a * c;
        if entry.is_zero() {
            target.remove(&i);
        }
    }
}

pub fn sparse_scale(v: &mut SparseVec, c: &Scalar) {
    if c.is_zero() {
        v.clear();
        return;
    }
    for a in v.values_mut() {
        *a *= c;
    }
}

/// Interns arbitrary ordered keys as dense column indices.
#[derive(Clone, Debug, Default)]
pub struct KeyIndex<K: Ord + Clone> {
    map: BTreeMap<K, usize>,
    keys: Vec<K>,
}

impl<K: Ord + Clone> KeyIndex<K> {
    pub fn new() -> Self {
        KeyIndex {
            map: BTreeMap::new(),
            keys: Vec::new(),
        }
    }

    pub fn intern(&mut self, k: &K) -> usize {
        if let Some(&i) = self.map.get(k) {
            return i;
        }
        let i = self.keys.len();
        self.map.insert(k.clone(), i);
        self.keys.push(k.clone());
        i
    }

    pub fn get(&self, k: &K) -> Option<usize> {
        self.map.get(k).copied()
    }

    pub fn key(&self, i: usize) -> &K {
        &self.keys[i]
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// View a polynomial as a sparse vector over interned words.
pub fn poly_to_vec(ix: &mut KeyIndex<crate::free::Word>, p: &NCPoly) -> SparseVec {
    let mut v = SparseVec::new();
    for (w, c) in p.iter() {
        v.insert(ix.intern(w), c.clone());
    }
    v
}

/// Incrementally maintained reduced row echelon span.
///
/// With tracking enabled, every stored row remembers its expression over the
/// originally inserted vectors, so [`Echelon::express`] can return an exact
/// linear combination certificate.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    rows: Vec<SparseVec>,
    combos: Option<Vec<SparseVec>>,
    n_inserted: usize,
}

impl Echelon {
    pub fn new() -> Echelon {
        Echelon::default()
    }

    pub fn with_tracking() -> Echelon {
        Echelon {
            combos: Some(Vec::new()),
            ..Echelon::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[SparseVec] {
        &self.rows
    }

    fn pivot_of(row: &SparseVec) -> usize {
        *row.keys().next().expect("empty echelon row")
    }

    /// Reduce `v` against the span, returning the residual (and, when
    /// tracking, the coefficients over inserted vectors consumed).
    fn reduce_tracked(&self, mut v: SparseVec) -> (SparseVec, SparseVec) {
        let mut used = SparseVec::new();
        for (i, row) in self.rows.iter().enumerate() {
            let p = Self::pivot_of(row);
            if let Some(c) = v.get(&p).cloned() {
                let neg = -&c;
                sparse_add_scaled(&mut v, row, &neg);
                if let Some(combos) = &self.combos {
                    sparse_add_scaled(&mut used, &combos[i], &c);
                }
            }
        }
        (v, used)
    }

    pub fn reduce(&self, v: SparseVec) -> SparseVec {
        self.reduce_tracked(v).0
    }

    pub fn contains(&self, v: &SparseVec) -> bool {
        self.reduce(v.clone()).is_empty()
    }

    /// Coefficients over the inserted vectors summing to `v`, when `v` lies
    /// in the span. Needs tracking. Keys are insertion indices (counting
    /// every `insert` call, including rejected dependents).
    pub fn express(&self, v: &SparseVec) -> Option<SparseVec> {
        assert!(self.combos.is_some(), "express requires tracking");
        let (resid, used) = self.reduce_tracked(v.clone());
        if resid.is_empty() {
            Some(used)
        } else {
            None
        }
    }

    /// Add `v` to the span. Returns false (and changes nothing) when `v`
    /// already lies in it.
    pub fn insert(&mut self, v: SparseVec) -> bool {
        let idx = self.n_inserted;
        self.n_inserted += 1;
        let (mut resid, used) = self.reduce_tracked(v);
        if resid.is_empty() {
            return false;
        }
        let mut combo = if self.combos.is_some() {
            let mut c = SparseVec::new();
            c.insert(idx, Scalar::one());
            let neg_one = -Scalar::one();
            sparse_add_scaled(&mut c, &used, &neg_one);
            c
        } else {
            SparseVec::new()
        };
        // Normalize the new pivot to 1.
        let p = Self::pivot_of(&resid);
        let inv = resid[&p].inv().unwrap();
        sparse_scale(&mut resid, &inv);
        if self.combos.is_some() {
            sparse_scale(&mut combo, &inv);
        }
        // Clear the new pivot column from the existing rows.
        for i in 0..self.rows.len() {
            if let Some(c) = self.rows[i].get(&p).cloned() {
                let neg = -&c;
                sparse_add_scaled(&mut self.rows[i], &resid, &neg);
                if let Some(combos) = &mut self.combos {
                    let combo_i = &mut combos[i];
                    sparse_add_scaled(combo_i, &combo, &neg);
                }
            }
        }
        // Keep rows sorted by pivot column.
        let at = self
            .rows
            .iter()
            .position(|r| Self::pivot_of(r) > p)
            .unwrap_or(self.rows.len());
        self.rows.insert(at, resid);
        if let Some(combos) = &mut self.combos {
            combos.insert(at, combo);
        }
        true
    }
}

/// Outcome of an affine solve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    Unique(Vec<Scalar>),
    Underdetermined {
        particular: Vec<Scalar>,
        nullspace: Vec<Vec<Scalar>>,
    },
    Inconsistent,
}

/// A linear system `A x = b` over dense unknown indices `0..n`.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    n: usize,
    rows: Vec<SparseVec>,
    rhs: Vec<Scalar>,
}

impl LinearSystem {
    pub fn new(n_unknowns: usize) -> LinearSystem {
        LinearSystem {
            n: n_unknowns,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn n_unknowns(&self) -> usize {
        self.n
    }

    pub fn n_equations(&self) -> usize {
        self.rows.len()
    }

    pub fn add_equation(&mut self, coeffs: SparseVec, rhs: Scalar) {
        debug_assert!(coeffs.keys().all(|&i| i < self.n));
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }

    /// Homogeneous convenience: `coeffs = 0`.
    pub fn add_homogeneous(&mut self, coeffs: SparseVec) {
        self.add_equation(coeffs, Scalar::zero());
    }

    pub fn solve(&self) -> SolveOutcome {
        // Augmented RREF; the right-hand side is column `self.n`.
        let mut ech = Echelon::new();
        for (row, b) in self.rows.iter().zip(&self.rhs) {
            let mut v = row.clone();
            if !b.is_zero() {
                v.insert(self.n, b.clone());
            }
            ech.insert(v);
        }
        let mut pivots = Vec::new();
        for row in ech.rows() {
            let p = *row.keys().next().unwrap();
            if p == self.n {
                return SolveOutcome::Inconsistent;
            }
            pivots.push(p);
        }
        let mut particular = vec![Scalar::zero(); self.n];
        for (row, &p) in ech.rows().iter().zip(&pivots) {
            // Each RREF row reads x_p + sum(free terms) = rhs entry; free
            // variables are zero in the particular solution.
            particular[p] = row.get(&self.n).cloned().unwrap_or_default();
        }
        let free: Vec<usize> = (0..self.n).filter(|i| !pivots.contains(i)).collect();
        if free.is_empty() {
            return SolveOutcome::Unique(particular);
        }
        let mut nullspace = Vec::new();
        for &f in &free {
            let mut v = vec![Scalar::zero(); self.n];
            v[f] = Scalar::one();
            for (row, &p) in ech.rows().iter().zip(&pivots) {
                if let Some(c) = row.get(&f) {
                    v[p] = -c;
                }
            }
            // First nonzero coordinate scaled to 1.
            if let Some(first) = v.iter().find(|c| !c.is_zero()) {
                let inv = first.inv().unwrap();
                for c in &mut v {
                    *c *= &inv;
                }
            }
            nullspace.push(v);
        }
        SolveOutcome::Underdetermined {
            particular,
            nullspace,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecify(pairs: &[(usize, Scalar)]) -> SparseVec {
        pairs.iter().cloned().collect()
    }

    #[test]
    fn unique_solution() {
        let mut sys = LinearSystem::new(2);
        sys.add_equation(
            vecify(&[(0, Scalar::one()), (1, Scalar::q())]),
            Scalar::one() + Scalar::q(),
        );
        sys.add_equation(vecify(&[(1, Scalar::one())]), Scalar::one());
        match sys.solve() {
            SolveOutcome::Unique(x) => {
                assert_eq!(x, vec![Scalar::one(), Scalar::one()]);
            }
            other => panic!("expected unique, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_system() {
        let mut sys = LinearSystem::new(1);
        sys.add_equation(vecify(&[(0, Scalar::one())]), Scalar::one());
        sys.add_equation(vecify(&[(0, Scalar::one())]), Scalar::int(2));
        assert_eq!(sys.solve(), SolveOutcome::Inconsistent);
    }

    #[test]
    fn nullspace_line_is_normalized() {
        // x0 = 0, x3 = 0, x2 + q x1 = 0: solutions span (0, 1, -q, 0).
        let mut sys = LinearSystem::new(4);
        sys.add_homogeneous(vecify(&[(0, Scalar::one())]));
        sys.add_homogeneous(vecify(&[(3, Scalar::one())]));
        sys.add_homogeneous(vecify(&[(1, Scalar::q()), (2, Scalar::one())]));
        match sys.solve() {
            SolveOutcome::Underdetermined {
                particular,
                nullspace,
            } => {
                assert!(particular.iter().all(Scalar::is_zero));
                assert_eq!(nullspace.len(), 1);
                let v = &nullspace[0];
                assert_eq!(
                    v.clone(),
                    vec![Scalar::zero(), Scalar::one(), -Scalar::q(), Scalar::zero()]
                );
            }
            other => panic!("expected a solution line, got {other:?}"),
        }
    }

    #[test]
    fn overdetermined_consistent() {
        let mut sys = LinearSystem::new(1);
        sys.add_equation(vecify(&[(0, Scalar::q())]), Scalar::q());
        sys.add_equation(vecify(&[(0, Scalar::one())]), Scalar::one());
        assert_eq!(sys.solve(), SolveOutcome::Unique(vec![Scalar::one()]));
    }

    #[test]
    fn echelon_membership_and_dim() {
        let mut e = Echelon::new();
        assert!(e.insert(vecify(&[(0, Scalar::one()), (2, Scalar::q())])));
        assert!(e.insert(vecify(&[(1, Scalar::one())])));
        assert_eq!(e.dim(), 2);
        // A combination of the two is already in the span.
        let mut combo = SparseVec::new();
        sparse_add_scaled(&mut combo, &vecify(&[(0, Scalar::one()), (2, Scalar::q())]), &Scalar::int(3));
        sparse_add_scaled(&mut combo, &vecify(&[(1, Scalar::one())]), &(-Scalar::q()));
        assert!(e.contains(&combo));
        assert!(!e.insert(combo));
        assert_eq!(e.dim(), 2);
        assert!(!e.contains(&vecify(&[(2, Scalar::one())])));
    }

    #[test]
    fn echelon_expresses_combinations() {
        let v1 = vecify(&[(0, Scalar::one()), (1, Scalar::one())]);
        let v2 = vecify(&[(1, Scalar::one()), (2, Scalar::one())]);
        let mut e = Echelon::with_tracking();
        assert!(e.insert(v1.clone()));
        assert!(e.insert(v2.clone()));
        let mut target = SparseVec::new();
        sparse_add_scaled(&mut target, &v1, &Scalar::int(3));
        sparse_add_scaled(&mut target, &v2, &(-Scalar::q()));
        let combo = e.express(&target).unwrap();
        assert_eq!(combo, vecify(&[(0, Scalar::int(3)), (1, -Scalar::q())]));
        // Reconstruct and compare.
        let mut back = SparseVec::new();
        sparse_add_scaled(&mut back, &v1, &combo[&0]);
        sparse_add_scaled(&mut back, &v2, &combo[&1]);
        assert_eq!(back, target);
        assert_eq!(e.express(&vecify(&[(3, Scalar::one())])), None);
    }

    #[test]
    fn tracked_indices_skip_dependents() {
        let v1 = vecify(&[(0, Scalar::one())]);
        let mut e = Echelon::with_tracking();
        assert!(e.insert(v1.clone()));
        assert!(!e.insert(v1.clone())); // consumes insertion index 1
        let v3 = vecify(&[(1, Scalar::one())]);
        assert!(e.insert(v3.clone()));
        let mut target = SparseVec::new();
        sparse_add_scaled(&mut target, &v1, &Scalar::int(2));
        sparse_add_scaled(&mut target, &v3, &Scalar::int(5));
        let combo = e.express(&target).unwrap();
        assert_eq!(combo, vecify(&[(0, Scalar::int(2)), (2, Scalar::int(5))]));
    }

    #[test]
    fn keyed_columns() {
        let mut ix: KeyIndex<String> = KeyIndex::new();
        let a = ix.intern(&"alpha".to_string());
        let b = ix.intern(&"beta".to_string());
        assert_eq!(ix.intern(&"alpha".to_string()), a);
        assert_ne!(a, b);
        assert_eq!(ix.len(), 2);
        assert_eq!(ix.key(b), "beta");
    }
}
