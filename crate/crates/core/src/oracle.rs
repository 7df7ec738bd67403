//! Brute-force cross-checks, deliberately independent of the rewriting
//! engine: dimensions are computed by enumerating raw free words and
//! echelonizing ideal spans, so they can certify the completion-based
//! counts.

use crate::free::{GenId, NCPoly, Presentation, Word};
use crate::linalg::{poly_to_vec, Echelon, KeyIndex};

/// All free words over the presentation's generators with bounding degree
/// at most `bound`, grouped by that degree.
pub fn free_words_by_degree(pres: &Presentation, bound: u64) -> Vec<Vec<Word>> {
    let mut by_degree: Vec<Vec<Word>> = vec![Vec::new(); bound as usize + 1];
    let mut frontier = vec![Word::one()];
    by_degree[0].push(Word::one());
    while let Some(w) = frontier.pop() {
        for g in 0..pres.n_gens() {
            let mut letters = w.0.clone();
            letters.push(g as GenId);
            let next = Word(letters);
            let deg = pres.bound_degree(&next);
            if deg <= bound {
                by_degree[deg as usize].push(next.clone());
                frontier.push(next);
            }
        }
    }
    for level in &mut by_degree {
        level.sort();
    }
    by_degree
}

/// Cumulative dimensions of the filtration levels of the quotient algebra,
/// computed without completion: `result[k]` is the dimension of the span of
/// classes of words of bounding degree <= k, obtained as the free count
/// minus the rank of the ideal slice spanned by `u * r * v` products that
/// stay within degree k.
pub fn quotient_filtration_dims(pres: &Presentation, bound: u64) -> Vec<usize> {
    let words = free_words_by_degree(pres, bound);
    let mut ix: KeyIndex<Word> = KeyIndex::new();
    let mut ech = Echelon::new();
    let mut free_count = 0usize;
    let mut dims = Vec::with_capacity(bound as usize + 1);
    for k in 0..=bound {
        free_count += words[k as usize].len();
        for r in pres.relations() {
            let r_deg = pres.poly_bound_degree(r).unwrap_or(0);
            // all u, v with deg(u) + deg(r) + deg(v) <= k, where u r v has
            // top words of exactly degree k (lower ones entered earlier)
            for (du, us) in words.iter().enumerate() {
                let du = du as u64;
                if du + r_deg > k {
                    break;
                }
                let dv = k - du - r_deg;
                for u in us {
                    for v in &words[dv as usize] {
                        let mut p = NCPoly::zero();
                        for (w, c) in r.iter() {
                            p.add_term(u.concat(w).concat(v), c.clone());
                        }
                        ech.insert(poly_to_vec(&mut ix, &p));
                    }
                }
            }
        }
        dims.push(free_count - ech.dim());
    }
    dims
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free::{star_pair, GeneratorSpec};
    use crate::scalar::Scalar;

    fn toeplitz() -> Presentation {
        let specs: Vec<GeneratorSpec> = star_pair("s", "s*", 0).to_vec();
        let mut p = Presentation::new(specs, false).unwrap();
        let rel = p
            .poly(&[(Scalar::one(), &["s*", "s"]), (-Scalar::one(), &[])])
            .unwrap();
        p.push_relation(rel).unwrap();
        p
    }

    #[test]
    fn free_word_counts() {
        let p = toeplitz();
        let words = free_words_by_degree(&p, 3);
        assert_eq!(
            words.iter().map(Vec::len).collect::<Vec<_>>(),
            vec![1, 2, 4, 8]
        );
    }

    #[test]
    fn toeplitz_dims_match_normal_words() {
        // words avoiding the factor s* s are s^a s*^b: a + b + 1 words per
        // total length, cumulatively 1, 3, 6, 10
        let dims = quotient_filtration_dims(&toeplitz(), 3);
        assert_eq!(dims, vec![1, 3, 6, 10]);
    }
}
