//! Dense exact-rational vectors and subspaces kept in reduced row echelon form.
//!
//! Every subspace is stored by its unique RREF basis in a fixed coordinate
//! order, so two subspaces are equal exactly when their row matrices are.

use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use crate::Q;

/// A vector in `Q^n`.
pub type Vector = Vec<Q>;

pub fn zero_vector(n: usize) -> Vector {
    vec![Q::zero(); n]
}

pub fn is_zero_vector(v: &[Q]) -> bool {
    v.iter().all(|c| c.is_zero())
}

/// `target += c * v`
pub fn axpy(target: &mut [Q], c: &Q, v: &[Q]) {
    if c.is_zero() {
        return;
    }
    for (t, x) in target.iter_mut().zip(v) {
        if !x.is_zero() {
            *t += c * x;
        }
    }
}

/// Subspace of `Q^ambient` with an RREF basis.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Subspace {
    ambient: usize,
    rows: Vec<Vector>,
    pivots: Vec<usize>,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Subspace {
            ambient,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn full(ambient: usize) -> Self {
        let mut rows = Vec::with_capacity(ambient);
        for i in 0..ambient {
            let mut v = zero_vector(ambient);
            v[i] = Q::one();
            rows.push(v);
        }
        Subspace {
            ambient,
            rows,
            pivots: (0..ambient).collect(),
        }
    }

    pub fn span<I>(ambient: usize, vectors: I) -> Self
    where
        I: IntoIterator<Item = Vector>,
    {
        let mut s = Subspace::zero(ambient);
        for v in vectors {
            s.insert(v);
        }
        s
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vector] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Columns that carry no pivot; they index a basis of the quotient `Q^n / self`.
    pub fn non_pivots(&self) -> Vec<usize> {
        let mut is_pivot = vec![false; self.ambient];
        for &p in &self.pivots {
            is_pivot[p] = true;
        }
        (0..self.ambient).filter(|&c| !is_pivot[c]).collect()
    }

    /// Canonical residual of `v` modulo the subspace: zero on every pivot column.
    pub fn reduce(&self, v: &[Q]) -> Vector {
        assert_eq!(v.len(), self.ambient, "vector length does not match ambient dimension");
        let mut r = v.to_vec();
        self.reduce_in_place(&mut r);
        r
    }

    fn reduce_in_place(&self, r: &mut [Q]) {
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if !r[p].is_zero() {
                let c = -r[p].clone();
                axpy(r, &c, row);
            }
        }
    }

    pub fn contains(&self, v: &[Q]) -> bool {
        is_zero_vector(&self.reduce(v))
    }

    /// Adds `v` to the span. Returns true when the dimension grew.
    pub fn insert(&mut self, v: Vector) -> bool {
        assert_eq!(v.len(), self.ambient, "vector length does not match ambient dimension");
        let mut r = v;
        self.reduce_in_place(&mut r);
        let p = match r.iter().position(|c| !c.is_zero()) {
            Some(p) => p,
            None => return false,
        };
        let inv = r[p].recip();
        for c in r.iter_mut() {
            if !c.is_zero() {
                *c *= &inv;
            }
        }
        for row in self.rows.iter_mut() {
            if !row[p].is_zero() {
                let c = -row[p].clone();
                axpy(row, &c, &r);
            }
        }
        let pos = self.pivots.partition_point(|&q| q < p);
        self.pivots.insert(pos, p);
        self.rows.insert(pos, r);
        true
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        assert_eq!(self.ambient, other.ambient);
        let (big, small) = if self.dim() >= other.dim() {
            (self, other)
        } else {
            (other, self)
        };
        let mut s = big.clone();
        for r in &small.rows {
            if s.dim() == s.ambient {
                break;
            }
            s.insert(r.clone());
        }
        s
    }

    pub fn is_subspace_of(&self, other: &Subspace) -> bool {
        self.dim() <= other.dim() && self.rows.iter().all(|r| other.contains(r))
    }

    pub fn intersection(&self, other: &Subspace) -> Subspace {
        assert_eq!(self.ambient, other.ambient);
        if self.is_zero() || other.is_zero() {
            return Subspace::zero(self.ambient);
        }
        if other.dim() == other.ambient {
            return self.clone();
        }
        if self.dim() == self.ambient {
            return other.clone();
        }
        // Combinations sum c_i u_i of our basis whose residual modulo `other` vanishes.
        let k = self.rows.len();
        let residuals: Vec<Vector> = self.rows.iter().map(|u| other.reduce(u)).collect();
        let kernel = left_kernel(&residuals, k);
        let mut out = Subspace::zero(self.ambient);
        for c in kernel {
            let mut x = zero_vector(self.ambient);
            for (ci, u) in c.iter().zip(&self.rows) {
                axpy(&mut x, ci, u);
            }
            out.insert(x);
        }
        out
    }

    /// Image under a linear map given as a closure on vectors.
    pub fn map<F>(&self, target_ambient: usize, f: F) -> Subspace
    where
        F: Fn(&[Q]) -> Vector,
    {
        Subspace::span(target_ambient, self.rows.iter().map(|r| f(r)))
    }

    /// Image under a signed coordinate permutation `e_i -> sign_i * e_{perm_i}`.
    pub fn signed_permute(&self, perm: &[(usize, i8)]) -> Subspace {
        self.map(self.ambient, |v| apply_signed_permutation(perm, v))
    }
}

pub fn apply_signed_permutation(perm: &[(usize, i8)], v: &[Q]) -> Vector {
    let mut out = zero_vector(v.len());
    for (i, c) in v.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let (j, s) = perm[i];
        out[j] = if s < 0 { -c.clone() } else { c.clone() };
    }
    out
}

/// Basis of `{c : sum_i c_i rows_i = 0}`.
pub fn left_kernel(rows: &[Vector], k: usize) -> Vec<Vector> {
    let n = rows.first().map(|r| r.len()).unwrap_or(0);
    // Augment each row with an identity block that tracks combinations.
    let mut aug: Vec<Vector> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut v = r.clone();
            v.extend((0..k).map(|j| if j == i { Q::one() } else { Q::zero() }));
            v
        })
        .collect();
    let mut pivot_row = 0;
    for col in 0..n {
        let Some(found) = (pivot_row..aug.len()).find(|&r| !aug[r][col].is_zero()) else {
            continue;
        };
        aug.swap(pivot_row, found);
        let inv = aug[pivot_row][col].recip();
        for c in aug[pivot_row].iter_mut() {
            *c *= &inv;
        }
        let prow = aug[pivot_row].clone();
        for (r, row) in aug.iter_mut().enumerate() {
            if r != pivot_row && !row[col].is_zero() {
                let c = -row[col].clone();
                axpy(row, &c, &prow);
            }
        }
        pivot_row += 1;
    }
    aug[pivot_row..].iter().map(|r| r[n..].to_vec()).collect()
}

/// Rank of a list of vectors.
pub fn rank(vectors: &[Vector]) -> usize {
    match vectors.first() {
        None => 0,
        Some(v) => Subspace::span(v.len(), vectors.iter().cloned()).dim(),
    }
}

/// Largest absolute numerator and denominator, used to report residual sizes.
pub fn max_abs(v: &[Q]) -> Q {
    v.iter().map(|c| c.abs()).fold(Q::zero(), |a, b| if b > a { b } else { a })
}

impl Serialize for Subspace {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|c| c.to_string()).collect())
            .collect();
        rows.serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Q {
        Q::from_integer(n.into())
    }

    fn v(xs: &[i64]) -> Vector {
        xs.iter().map(|&x| q(x)).collect()
    }

    #[test]
    fn rref_is_canonical() {
        let a = Subspace::span(3, vec![v(&[1, 2, 3]), v(&[2, 4, 7])]);
        let b = Subspace::span(3, vec![v(&[0, 0, 1]), v(&[3, 6, 0])]);
        assert_eq!(a, b);
        assert_eq!(a.dim(), 2);
        assert_eq!(a.non_pivots(), vec![1]);
    }

    #[test]
    fn intersection_of_planes_is_a_line() {
        let a = Subspace::span(3, vec![v(&[1, 0, 0]), v(&[0, 1, 0])]);
        let b = Subspace::span(3, vec![v(&[0, 1, 0]), v(&[0, 0, 1])]);
        let c = a.intersection(&b);
        assert_eq!(c, Subspace::span(3, vec![v(&[0, 1, 0])]));
        let d = Subspace::span(3, vec![v(&[1, 1, 0]), v(&[0, 0, 1])]);
        assert_eq!(a.intersection(&d), Subspace::span(3, vec![v(&[1, 1, 0])]));
    }

    #[test]
    fn left_kernel_finds_relations() {
        let rows = vec![v(&[1, 1]), v(&[2, 2]), v(&[0, 1])];
        let k = left_kernel(&rows, 3);
        assert_eq!(k.len(), 1);
        let c = &k[0];
        let mut s = zero_vector(2);
        for (ci, r) in c.iter().zip(&rows) {
            axpy(&mut s, ci, r);
        }
        assert!(is_zero_vector(&s));
    }
}
