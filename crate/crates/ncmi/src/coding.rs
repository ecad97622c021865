//! Coefficient vectors and rank-tracked knowledge subspaces.
//!
//! Packets are symbolic: only the coefficient vector of a coded packet
//! matters for innovation and decodability. A device's knowledge is a
//! row-reduced basis over the active field; insertion keeps the basis in
//! reduced row echelon form so that
//!
//! * rank is the number of rows,
//! * a packet index is decodable iff its unit vector is a basis row,
//! * membership and subspace-inclusion tests are single reduction passes.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::Field;

/// Length-M coefficient vector, one entry per packet index of the instance.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CoeffVector<F: Field>(pub Vec<F>);

impl<F: Field> CoeffVector<F> {
    pub fn zero(m: usize) -> Self {
        CoeffVector(vec![F::ZERO; m])
    }

    /// The unit vector for packet index `i` (an uncoded packet).
    pub fn unit(m: usize, i: usize) -> Self {
        let mut v = Self::zero(m);
        v.0[i] = F::ONE;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.is_zero())
    }

    /// Indices with nonzero coefficients.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.0[i].is_zero()).collect()
    }

    fn leading(&self) -> Option<usize> {
        self.0.iter().position(|c| !c.is_zero())
    }

    /// self -= c * other
    fn axpy_sub(&mut self, c: F, other: &CoeffVector<F>) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a = a.sub(c.mul(*b));
        }
    }

    fn scale(&mut self, c: F) {
        for a in self.0.iter_mut() {
            *a = a.mul(c);
        }
    }
}

/// XOR-style combination: coefficient one at each listed index.
pub fn xor_combination<F: Field>(m: usize, indices: &BTreeSet<usize>) -> Result<CoeffVector<F>> {
    if indices.is_empty() {
        return Err(Error::InvalidPlan("empty combination".into()));
    }
    let mut v = CoeffVector::zero(m);
    for &i in indices {
        if i >= m {
            return Err(Error::Shape(format!("packet index {i} out of range {m}")));
        }
        v.0[i] = F::ONE;
    }
    Ok(v)
}

/// Random combination over the listed indices: uniform nonzero coefficients,
/// scaled so the first one is 1. A singleton set yields the unit vector.
pub fn random_combination<F: Field, R: Rng + ?Sized>(
    m: usize,
    indices: &BTreeSet<usize>,
    rng: &mut R,
) -> Result<CoeffVector<F>> {
    if indices.is_empty() {
        return Err(Error::InvalidPlan("empty combination".into()));
    }
    let mut v = CoeffVector::zero(m);
    for &i in indices {
        if i >= m {
            return Err(Error::Shape(format!("packet index {i} out of range {m}")));
        }
        v.0[i] = F::sample_nonzero(rng);
    }
    let first = *indices.iter().next().unwrap();
    let norm = v.0[first].inv();
    v.scale(norm);
    Ok(v)
}

/// Random combination of the given basis rows, at least one coefficient
/// nonzero. Used for a device transmitting its whole knowledge.
pub fn random_combination_of_rows<F: Field, R: Rng + ?Sized>(
    rows: &[CoeffVector<F>],
    rng: &mut R,
) -> Result<CoeffVector<F>> {
    let Some(first) = rows.first() else {
        return Err(Error::InvalidPlan("combination of an empty knowledge space".into()));
    };
    let mut v: CoeffVector<F> = CoeffVector::zero(first.len());
    for row in rows {
        let c = F::sample_nonzero(rng);
        for (a, b) in v.0.iter_mut().zip(row.0.iter()) {
            *a = a.add(c.mul(*b));
        }
    }
    // nonzero because rows are independent and all coefficients are nonzero
    debug_assert!(!v.is_zero());
    Ok(v)
}

/// A subspace of F^M kept in reduced row echelon form.
#[derive(Clone, Debug)]
pub struct Subspace<F: Field> {
    m: usize,
    rows: Vec<CoeffVector<F>>,
    /// Pivot column of each row; strictly increasing.
    pivots: Vec<usize>,
    /// Packet indices whose unit vector is in the span (rows with one nonzero).
    decoded: BTreeSet<usize>,
}

impl<F: Field> Subspace<F> {
    pub fn new(m: usize) -> Self {
        Subspace { m, rows: Vec::new(), pivots: Vec::new(), decoded: BTreeSet::new() }
    }

    /// Span of the unit vectors of `indices`.
    pub fn from_units(m: usize, indices: &BTreeSet<usize>) -> Self {
        let mut s = Self::new(m);
        for &i in indices {
            s.insert_if_innovative(&CoeffVector::unit(m, i)).expect("unit insert");
        }
        s
    }

    pub fn dim_ambient(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == self.m
    }

    pub fn rows(&self) -> &[CoeffVector<F>] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Packet indices currently decodable from this knowledge.
    pub fn decoded(&self) -> &BTreeSet<usize> {
        &self.decoded
    }

    fn reduce(&self, v: &CoeffVector<F>) -> CoeffVector<F> {
        let mut v = v.clone();
        for (row, &p) in self.rows.iter().zip(self.pivots.iter()) {
            let c = v.0[p];
            if !c.is_zero() {
                v.axpy_sub(c, row);
            }
        }
        v
    }

    pub fn contains_vector(&self, v: &CoeffVector<F>) -> bool {
        self.reduce(v).is_zero()
    }

    /// True iff the span of `rows` is inside this subspace.
    pub fn contains_rows(&self, rows: &[CoeffVector<F>]) -> bool {
        if rows.len() > self.rank() {
            return false;
        }
        rows.iter().all(|r| self.contains_vector(r))
    }

    /// True iff `other` is a subspace of `self`, with cheap rank and pivot
    /// pre-checks before any reduction work.
    pub fn contains_space(&self, other: &Subspace<F>) -> bool {
        if other.rank() > self.rank() {
            return false;
        }
        // every member's leading column is a pivot of the containing space
        let mut it = self.pivots.iter().peekable();
        for p in &other.pivots {
            loop {
                match it.peek() {
                    Some(&&q) if q < *p => {
                        it.next();
                    }
                    Some(&&q) if q == *p => break,
                    _ => return false,
                }
            }
        }
        other.rows.iter().all(|r| self.contains_vector(r))
    }

    /// Inserts `v` if it is outside the current span. Returns whether it was
    /// innovative; the rank grows by exactly one in that case.
    pub fn insert_if_innovative(&mut self, v: &CoeffVector<F>) -> Result<bool> {
        if v.len() != self.m {
            return Err(Error::Shape(format!(
                "vector length {} does not match instance size {}",
                v.len(),
                self.m
            )));
        }
        let mut v = self.reduce(v);
        let Some(pivot) = v.leading() else {
            return Ok(false);
        };
        let norm = v.0[pivot].inv();
        v.scale(norm);
        // back-eliminate to keep the basis reduced
        for row in self.rows.iter_mut() {
            let c = row.0[pivot];
            if !c.is_zero() {
                row.axpy_sub(c, &v);
            }
        }
        let at = self.pivots.partition_point(|&p| p < pivot);
        self.pivots.insert(at, pivot);
        self.rows.insert(at, v);
        // refresh decodability; back-elimination can only remove nonzeros
        self.decoded.clear();
        for (row, &p) in self.rows.iter().zip(self.pivots.iter()) {
            if row.0.iter().filter(|c| !c.is_zero()).count() == 1 {
                self.decoded.insert(p);
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Fp61, Gf256};
    use crate::rng::derive_rng;

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn insert_unit_into_empty_is_innovative() {
        let mut s: Subspace<Gf256> = Subspace::new(4);
        let innovative = s.insert_if_innovative(&CoeffVector::unit(4, 0)).unwrap();
        assert!(innovative);
        assert_eq!(s.rank(), 1);
        // duplicate is not
        assert!(!s.insert_if_innovative(&CoeffVector::unit(4, 0)).unwrap());
        assert_eq!(s.rank(), 1);
    }

    #[test]
    fn scaled_sum_of_basis_is_not_innovative() {
        let mut s: Subspace<Gf256> = Subspace::from_units(4, &set(&[0, 1]));
        let mut v: CoeffVector<Gf256> = xor_combination(4, &set(&[0, 1])).unwrap();
        v.scale(Gf256(0x02));
        assert!(!s.insert_if_innovative(&v).unwrap());
        assert_eq!(s.rank(), 2);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let mut s: Subspace<Gf256> = Subspace::new(4);
        let v: CoeffVector<Gf256> = CoeffVector::unit(5, 0);
        assert!(matches!(s.insert_if_innovative(&v), Err(Error::Shape(_))));
    }

    #[test]
    fn empty_index_set_is_rejected() {
        let empty = BTreeSet::new();
        assert!(matches!(
            xor_combination::<Gf256>(4, &empty),
            Err(Error::InvalidPlan(_))
        ));
        let mut rng = derive_rng(1, &[]);
        assert!(matches!(
            random_combination::<Gf256, _>(4, &empty, &mut rng),
            Err(Error::InvalidPlan(_))
        ));
    }

    #[test]
    fn xor_combination_examples() {
        let v: CoeffVector<Gf256> = xor_combination(6, &set(&[2])).unwrap();
        assert_eq!(v, CoeffVector::unit(6, 2));
        let v: CoeffVector<Gf256> = xor_combination(6, &set(&[1, 3])).unwrap();
        assert_eq!(v.support(), vec![1, 3]);
        let v: CoeffVector<Gf256> = xor_combination(6, &set(&[3, 4, 5])).unwrap();
        assert_eq!(v.support(), vec![3, 4, 5]);
        assert!(v.0[3] == Gf256::ONE && v.0[4] == Gf256::ONE && v.0[5] == Gf256::ONE);
    }

    #[test]
    fn random_combination_support_and_singleton() {
        let mut rng = derive_rng(42, &[]);
        let v: CoeffVector<Gf256> = random_combination(8, &set(&[1, 2]), &mut rng).unwrap();
        assert!(!v.is_zero());
        assert!(v.support().iter().all(|i| [1usize, 2].contains(i)));
        let u: CoeffVector<Fp61> = random_combination(8, &set(&[3]), &mut rng).unwrap();
        assert_eq!(u, CoeffVector::unit(8, 3));
    }

    /// Dense Gaussian elimination from scratch; the membership oracle that
    /// the incremental basis is checked against.
    fn rank_of<F: Field>(vectors: &[CoeffVector<F>]) -> usize {
        let mut rows: Vec<CoeffVector<F>> = vectors.to_vec();
        let mut rank = 0;
        let m = match rows.first() {
            Some(r) => r.len(),
            None => return 0,
        };
        for col in 0..m {
            let Some(pos) = (rank..rows.len()).find(|&r| !rows[r].0[col].is_zero()) else {
                continue;
            };
            rows.swap(rank, pos);
            let inv = rows[rank].0[col].inv();
            rows[rank].scale(inv);
            for r in 0..rows.len() {
                if r != rank {
                    let c = rows[r].0[col];
                    if !c.is_zero() {
                        let pivot_row = rows[rank].clone();
                        rows[r].axpy_sub(c, &pivot_row);
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn innovation_matches_full_elimination_oracle() {
        let mut rng = derive_rng(2024, &[7]);
        for trial in 0..1000 {
            let m = rng.gen_range(1..=8usize);
            let n_vecs = rng.gen_range(0..=m + 2);
            let mut base: Vec<CoeffVector<Gf256>> = Vec::new();
            let mut sub: Subspace<Gf256> = Subspace::new(m);
            for _ in 0..n_vecs {
                let idx: BTreeSet<usize> = (0..m).filter(|_| rng.gen_bool(0.5)).collect();
                if idx.is_empty() {
                    continue;
                }
                let v = random_combination(m, &idx, &mut rng).unwrap();
                sub.insert_if_innovative(&v).unwrap();
                base.push(v);
            }
            assert_eq!(sub.rank(), rank_of(&base), "trial {trial}");
            // probe vector
            let idx: BTreeSet<usize> = (0..m).collect();
            let probe = random_combination(m, &idx, &mut rng).unwrap();
            let before = rank_of(&base);
            base.push(probe.clone());
            let after = rank_of(&base);
            let innovative = sub.insert_if_innovative(&probe).unwrap();
            assert_eq!(innovative, after > before, "trial {trial}");
            assert_eq!(sub.rank(), after, "trial {trial}");
        }
    }

    #[test]
    fn decoded_tracks_unit_rows() {
        let mut s: Subspace<Gf256> = Subspace::from_units(3, &set(&[2]));
        assert_eq!(s.decoded(), &set(&[2]));
        let mut rng = derive_rng(5, &[]);
        let v = random_combination(3, &set(&[0, 1]), &mut rng).unwrap();
        s.insert_if_innovative(&v).unwrap();
        assert_eq!(s.decoded(), &set(&[2]), "coded pair decodes nothing yet");
        s.insert_if_innovative(&CoeffVector::unit(3, 0)).unwrap();
        assert!(s.is_full());
        assert_eq!(s.decoded(), &set(&[0, 1, 2]), "full rank decodes everything");
    }

    #[test]
    fn contains_space_fast_paths_agree_with_reduction() {
        let mut rng = derive_rng(99, &[3]);
        for _ in 0..300 {
            let m = rng.gen_range(1..=6usize);
            let mut a: Subspace<Fp61> = Subspace::new(m);
            let mut b: Subspace<Fp61> = Subspace::new(m);
            for _ in 0..rng.gen_range(0..=m) {
                let idx: BTreeSet<usize> = (0..m).filter(|_| rng.gen_bool(0.6)).collect();
                if idx.is_empty() {
                    continue;
                }
                let v = random_combination(m, &idx, &mut rng).unwrap();
                a.insert_if_innovative(&v).unwrap();
                if rng.gen_bool(0.7) {
                    b.insert_if_innovative(&v).unwrap();
                }
            }
            let by_def = a.rows().iter().all(|r| b.contains_vector(r));
            assert_eq!(b.contains_space(&a), by_def);
            assert!(a.contains_space(&a));
        }
    }
}
