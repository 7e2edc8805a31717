//! Sparse exterior algebra over a fixed finite-dimensional model fiber.
//!
//! Elements are degree-homogeneous multivectors or forms stored as a sparse
//! map from strictly increasing multi-indices to `f64` coefficients. Axis
//! labels are 1-based. The duality pairing and the two interior products
//! follow the conventions
//!
//! ```text
//! <Y, X ⌟ mu> = <X ∧ Y, mu>        (left product, vector into form)
//! <X ⌞ mu, nu> = <X, mu ∧ nu>      (right product, form into vector)
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::{Serialize, SerializeSeq, SerializeStruct, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExteriorError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("variance mismatch: both operands must be vectors or both covectors")]
    VarianceMismatch,
    #[error("degree {x} {op} degree {mu} required for this interior product")]
    DegreeOrder { x: usize, mu: usize, op: &'static str },
    #[error("index {0} outside 1..={1}")]
    IndexOutOfRange(u8, usize),
    #[error("multi-index not strictly increasing: {0:?}")]
    NotIncreasing(Vec<u8>),
}

/// Strictly increasing tuple of 1-based axis labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<u8>);

impl MultiIndex {
    /// Empty multi-index, the key degree-0 scalars live on.
    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    /// Builds from an already sorted, strictly increasing slice.
    pub fn new(indices: &[u8]) -> Result<Self, ExteriorError> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ExteriorError::NotIncreasing(indices.to_vec()));
        }
        Ok(MultiIndex(indices.to_vec()))
    }

    /// Sorts an arbitrary sequence, returning the canonical index and the
    /// permutation sign, or `None` when an axis repeats.
    pub fn sort_signed(indices: &[u8]) -> Option<(Self, f64)> {
        let mut v = indices.to_vec();
        let mut sign = 1.0;
        // insertion sort with inversion counting; sequences are short
        for i in 1..v.len() {
            let mut j = i;
            while j > 0 && v[j - 1] > v[j] {
                v.swap(j - 1, j);
                sign = -sign;
                j -= 1;
            }
        }
        if v.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        Some((MultiIndex(v), sign))
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> &[u8] {
        &self.0
    }

    pub fn contains(&self, axis: u8) -> bool {
        self.0.binary_search(&axis).is_ok()
    }

    /// True when every axis of `self` occurs in `other`.
    pub fn subset_of(&self, other: &MultiIndex) -> bool {
        self.0.iter().all(|a| other.contains(*a))
    }

    /// Complement of `self` inside `other` (assumes `self ⊆ other`).
    pub fn complement_in(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(
            other
                .0
                .iter()
                .copied()
                .filter(|a| !self.contains(*a))
                .collect(),
        )
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Order-independent sum of a contribution multiset: positive and negative
/// parts are summed separately in ascending magnitude, then combined by a
/// single subtraction. Invariant under permutations and exactly odd under
/// global negation.
fn signed_canonical_sum(contributions: &[f64]) -> f64 {
    let mut pos: Vec<f64> = contributions.iter().copied().filter(|c| *c > 0.0).collect();
    let mut neg: Vec<f64> = contributions.iter().map(|c| -c).filter(|c| *c > 0.0).collect();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    pos.iter().sum::<f64>() - neg.iter().sum::<f64>()
}

/// Sign of merging two disjoint increasing index tuples into one sorted tuple,
/// i.e. the parity of the concatenation `(a, b)`.
fn merge_sign(a: &[u8], b: &[u8]) -> f64 {
    // count inversions between the blocks; within each block there are none
    let mut inversions = 0usize;
    for &x in a {
        inversions += b.iter().filter(|&&y| y < x).count();
    }
    if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Vector,
    Covector,
}

/// Homogeneous sparse element of the exterior algebra (or its dual) over a
/// `dimension`-dimensional fiber.
///
/// Canonical form: no stored coefficient is exactly `0.0`; pruning uses the
/// literal zero only, so algebraic identities stay exact.
#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorElement {
    dimension: usize,
    degree: usize,
    variance: Variance,
    terms: BTreeMap<MultiIndex, f64>,
}

impl ExteriorElement {
    pub fn zero(dimension: usize, degree: usize, variance: Variance) -> Self {
        ExteriorElement {
            dimension,
            degree,
            variance,
            terms: BTreeMap::new(),
        }
    }

    /// Degree-0 element holding a scalar on the empty multi-index.
    pub fn scalar(dimension: usize, variance: Variance, value: f64) -> Self {
        let mut e = Self::zero(dimension, 0, variance);
        e.add_term(MultiIndex::empty(), value);
        e
    }

    /// Basis element `e_{i1} ∧ ... ∧ e_{id}` for a sorted multi-index.
    pub fn basis(dimension: usize, variance: Variance, indices: &[u8]) -> Result<Self, ExteriorError> {
        let mi = MultiIndex::new(indices)?;
        for &a in indices {
            if a == 0 || a as usize > dimension {
                return Err(ExteriorError::IndexOutOfRange(a, dimension));
            }
        }
        let mut e = Self::zero(dimension, indices.len(), variance);
        e.add_term(mi, 1.0);
        Ok(e)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn variance(&self) -> Variance {
        self.variance
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(k, &v)| (k, v))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, mi: &MultiIndex) -> f64 {
        self.terms.get(mi).copied().unwrap_or(0.0)
    }

    /// Largest coefficient magnitude (0 for the zero element).
    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Accumulates `value` on `mi`, pruning the entry when the sum is exactly zero.
    pub fn add_term(&mut self, mi: MultiIndex, value: f64) {
        use std::collections::btree_map::Entry;
        debug_assert_eq!(mi.degree(), self.degree);
        debug_assert!(mi.indices().iter().all(|&a| a >= 1 && a as usize <= self.dimension));
        match self.terms.entry(mi) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += value;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                if value != 0.0 {
                    v.insert(value);
                }
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = Self::zero(self.dimension, self.degree, self.variance);
        for (mi, c) in &self.terms {
            out.add_term(mi.clone(), c * factor);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self, ExteriorError> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (mi, c) in &other.terms {
            out.add_term(mi.clone(), *c);
        }
        Ok(out)
    }

    fn check_compatible(&self, other: &Self) -> Result<(), ExteriorError> {
        if self.dimension != other.dimension {
            return Err(ExteriorError::DimensionMismatch(self.dimension, other.dimension));
        }
        if self.variance != other.variance {
            return Err(ExteriorError::VarianceMismatch);
        }
        Ok(())
    }

    /// Graded-anticommutative wedge product. A degree overflow past the fiber
    /// dimension yields the zero element of the summed degree.
    ///
    /// Contributions to each output term are split by sign, summed in
    /// magnitude order and combined with a single subtraction, so `a ∧ b`
    /// and `±b ∧ a` agree bitwise: the two operand orders produce the same
    /// multiset of products up to a global sign, and negation swaps the two
    /// groups exactly.
    pub fn wedge(&self, other: &Self) -> Result<Self, ExteriorError> {
        self.check_compatible(other)?;
        let degree = self.degree + other.degree;
        let mut out = Self::zero(self.dimension, degree, self.variance);
        if degree > self.dimension {
            return Ok(out);
        }
        let mut buckets: BTreeMap<MultiIndex, Vec<f64>> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                if a.indices().iter().any(|x| b.contains(*x)) {
                    continue;
                }
                let sign = merge_sign(a.indices(), b.indices());
                let mut merged: Vec<u8> = a.indices().to_vec();
                merged.extend_from_slice(b.indices());
                merged.sort_unstable();
                buckets.entry(MultiIndex(merged)).or_default().push(sign * ca * cb);
            }
        }
        for (key, contributions) in buckets {
            out.add_term(key, signed_canonical_sum(&contributions));
        }
        Ok(out)
    }

    /// Duality pairing of a vector against a covector: the coefficient sum on
    /// shared multi-indices when degrees match, 0 otherwise.
    pub fn pair(&self, mu: &Self) -> Result<f64, ExteriorError> {
        if self.dimension != mu.dimension {
            return Err(ExteriorError::DimensionMismatch(self.dimension, mu.dimension));
        }
        if self.degree != mu.degree {
            return Ok(0.0);
        }
        let (small, big) = if self.terms.len() <= mu.terms.len() {
            (&self.terms, &mu.terms)
        } else {
            (&mu.terms, &self.terms)
        };
        Ok(small
            .iter()
            .filter_map(|(mi, c)| big.get(mi).map(|d| c * d))
            .sum())
    }

    /// Left interior product `X ⌟ mu` of a degree-k vector into a degree-l
    /// form, `k <= l`; satisfies `<Y, X ⌟ mu> = <X ∧ Y, mu>`.
    pub fn interior_left(&self, mu: &Self) -> Result<Self, ExteriorError> {
        if self.dimension != mu.dimension {
            return Err(ExteriorError::DimensionMismatch(self.dimension, mu.dimension));
        }
        if self.degree > mu.degree {
            return Err(ExteriorError::DegreeOrder {
                x: self.degree,
                mu: mu.degree,
                op: "<=",
            });
        }
        let mut out = Self::zero(self.dimension, mu.degree - self.degree, Variance::Covector);
        for (i, ci) in &self.terms {
            for (j, cj) in &mu.terms {
                if !i.subset_of(j) {
                    continue;
                }
                let k = i.complement_in(j);
                let sign = merge_sign(i.indices(), k.indices());
                out.add_term(k, sign * ci * cj);
            }
        }
        Ok(out)
    }

    /// Right interior product `X ⌞ mu` of a degree-k vector by a degree-l
    /// form, `k >= l`; satisfies `<X ⌞ mu, nu> = <X, mu ∧ nu>`.
    pub fn interior_right(&self, mu: &Self) -> Result<Self, ExteriorError> {
        if self.dimension != mu.dimension {
            return Err(ExteriorError::DimensionMismatch(self.dimension, mu.dimension));
        }
        if self.degree < mu.degree {
            return Err(ExteriorError::DegreeOrder {
                x: self.degree,
                mu: mu.degree,
                op: ">=",
            });
        }
        let mut out = Self::zero(self.dimension, self.degree - mu.degree, Variance::Vector);
        for (i, ci) in &self.terms {
            for (j, cj) in &mu.terms {
                if !j.subset_of(i) {
                    continue;
                }
                let k = j.complement_in(i);
                let sign = merge_sign(j.indices(), k.indices());
                out.add_term(k, sign * ci * cj);
            }
        }
        Ok(out)
    }
}

impl Serialize for ExteriorElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        struct Terms<'a>(&'a BTreeMap<MultiIndex, f64>);
        impl Serialize for Terms<'_> {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
                for (mi, c) in self.0 {
                    seq.serialize_element(&(mi.indices(), c))?;
                }
                seq.end()
            }
        }
        let mut s = serializer.serialize_struct("ExteriorElement", 4)?;
        s.serialize_field("dimension", &self.dimension)?;
        s.serialize_field("degree", &self.degree)?;
        s.serialize_field("variance", &self.variance)?;
        s.serialize_field("terms", &Terms(&self.terms))?;
        s.end()
    }
}

/// All strictly increasing degree-`d` multi-indices over `1..=dimension`,
/// in lexicographic order.
pub fn multi_indices(dimension: usize, degree: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut current: Vec<u8> = Vec::with_capacity(degree);
    fn rec(dimension: usize, degree: usize, start: u8, current: &mut Vec<u8>, out: &mut Vec<MultiIndex>) {
        if current.len() == degree {
            out.push(MultiIndex(current.clone()));
            return;
        }
        let remaining = degree - current.len();
        for a in start..=(dimension as u8) {
            if (dimension as u8 - a + 1) as usize >= remaining {
                current.push(a);
                rec(dimension, degree, a + 1, current, out);
                current.pop();
            }
        }
    }
    rec(dimension, degree, 1, &mut current, &mut out);
    out
}

/// Binomial coefficient, the dimension of `Λ^degree` over a fiber.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}
