//! Finite-support coordinate families.
//!
//! Coordinates are positive integers. A [`SparseVector`] never stores an
//! explicit zero, so structural equality is entry-wise equality. A
//! [`CoordFunctional`] acts on vectors through the pairing `f(x) = Σ fᵢxᵢ`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Field;

#[derive(Clone, PartialEq, Default)]
pub struct SparseVector<S> {
    entries: BTreeMap<usize, S>,
}

impl<S: Field> SparseVector<S> {
    pub fn zero() -> Self {
        Self { entries: BTreeMap::new() }
    }

    /// Standard basis vector `e_index`.
    pub fn basis(index: usize) -> Self {
        Self::from_entries([(index, S::one())]).expect("basis index must be positive")
    }

    /// Builds a vector from `(index, value)` pairs, summing repeated indices and dropping zeros.
    pub fn from_entries<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, S)>,
    {
        let mut out = Self::zero();
        for (i, v) in entries {
            if i == 0 {
                return Err(Error::InvalidInput("coordinate indices start at 1".into()));
            }
            out.add_at(i, v);
        }
        Ok(out)
    }

    /// Dense constructor: `values[k]` becomes coordinate `k + 1`.
    pub fn from_dense(values: &[S]) -> Self {
        let mut out = Self::zero();
        for (k, v) in values.iter().enumerate() {
            out.add_at(k + 1, v.clone());
        }
        out
    }

    pub fn to_dense(&self, window: usize) -> Vec<S> {
        (1..=window).map(|i| self.get(i)).collect()
    }

    pub fn get(&self, index: usize) -> S {
        self.entries.get(&index).cloned().unwrap_or_else(S::zero)
    }

    pub fn set(&mut self, index: usize, value: S) {
        assert!(index > 0, "coordinate indices start at 1");
        if value.is_zero() {
            self.entries.remove(&index);
        } else {
            self.entries.insert(index, value);
        }
    }

    fn add_at(&mut self, index: usize, value: S) {
        let next = self.get(index) + value;
        self.set(index, next);
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &S)> {
        self.entries.iter().map(|(i, v)| (*i, v))
    }

    pub fn support(&self) -> BTreeSet<usize> {
        self.entries.keys().copied().collect()
    }

    pub fn max_index(&self) -> usize {
        self.entries.keys().next_back().copied().unwrap_or(0)
    }

    pub fn scale(&self, factor: &S) -> Self {
        if factor.is_zero() {
            return Self::zero();
        }
        let mut out = Self::zero();
        for (i, v) in &self.entries {
            out.set(*i, v.clone() * factor.clone());
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (i, v) in &other.entries {
            out.add_at(*i, v.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (i, v) in &other.entries {
            out.add_at(*i, -v.clone());
        }
        out
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: &S, other: &Self) -> Self {
        let mut out = self.clone();
        if factor.is_zero() {
            return out;
        }
        for (i, v) in &other.entries {
            out.add_at(*i, factor.clone() * v.clone());
        }
        out
    }

    /// Keeps only the coordinates for which `keep` returns true.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> Self {
        Self {
            entries: self.entries.iter().filter(|(i, _)| keep(**i)).map(|(i, v)| (*i, v.clone())).collect(),
        }
    }

    /// Euclidean inner product of coordinate families.
    pub fn dot(&self, other: &Self) -> S {
        let (small, large) = if self.nnz() <= other.nnz() { (self, other) } else { (other, self) };
        let mut acc = S::zero();
        for (i, v) in &small.entries {
            if let Some(w) = large.entries.get(i) {
                acc = acc + v.clone() * w.clone();
            }
        }
        acc
    }

    /// Sup norm over every stored coordinate.
    pub fn max_abs(&self) -> S {
        self.entries.values().fold(S::zero(), |acc, v| acc.max_of(v.magnitude()))
    }

    pub fn l1(&self) -> S {
        self.entries.values().fold(S::zero(), |acc, v| acc + v.magnitude())
    }

    /// Float-mode cleanup: drops entries negligible against the vector's sup norm.
    pub fn pruned(&self) -> Self {
        let scale = self.max_abs();
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(_, v)| !v.negligible_against(&scale))
                .map(|(i, v)| (*i, v.clone()))
                .collect(),
        }
    }
}

impl<S: fmt::Debug> fmt::Debug for SparseVector<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.entries.iter()).finish()
    }
}

impl<S: Field> fmt::Display for SparseVector<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_pairs(self.iter()))
    }
}

/// A coordinate functional `x ↦ Σ fᵢxᵢ` with finite support.
#[derive(Clone, PartialEq, Default)]
pub struct CoordFunctional<S> {
    coeffs: SparseVector<S>,
}

impl<S: Field> CoordFunctional<S> {
    pub fn zero() -> Self {
        Self { coeffs: SparseVector::zero() }
    }

    /// Coordinate functional `δ_index`.
    pub fn delta(index: usize) -> Self {
        Self { coeffs: SparseVector::basis(index) }
    }

    pub fn from_entries<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, S)>,
    {
        Ok(Self { coeffs: SparseVector::from_entries(entries)? })
    }

    pub fn from_coeffs(coeffs: SparseVector<S>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &SparseVector<S> {
        &self.coeffs
    }

    pub fn apply(&self, x: &SparseVector<S>) -> S {
        self.coeffs.dot(x)
    }

    pub fn get(&self, index: usize) -> S {
        self.coeffs.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &S)> {
        self.coeffs.iter()
    }

    pub fn support(&self) -> BTreeSet<usize> {
        self.coeffs.support()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_zero()
    }

    pub fn scale(&self, factor: &S) -> Self {
        Self { coeffs: self.coeffs.scale(factor) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { coeffs: self.coeffs.add(&other.coeffs) }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { coeffs: self.coeffs.sub(&other.coeffs) }
    }

    pub fn axpy(&self, factor: &S, other: &Self) -> Self {
        Self { coeffs: self.coeffs.axpy(factor, &other.coeffs) }
    }
}

impl<S: fmt::Debug> fmt::Debug for CoordFunctional<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "δ{:?}", self.coeffs)
    }
}

fn format_pairs<'a, S: Field>(pairs: impl Iterator<Item = (usize, &'a S)>) -> String {
    let body: Vec<String> = pairs.map(|(i, v)| format!("{i}:{}", v.canonical())).collect();
    format!("[{}]", body.join(", "))
}

/// Encodes a coordinate family as the sorted `"index:value"` pair list.
pub fn encode_pairs<S: Field>(v: &SparseVector<S>) -> Vec<String> {
    v.iter().map(|(i, x)| format!("{i}:{}", x.canonical())).collect()
}

pub fn decode_pairs<S: Field>(pairs: &[String]) -> Result<SparseVector<S>> {
    let mut seen = BTreeSet::new();
    let mut entries = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (i, v) = p
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected index:value, got {p:?}")))?;
        let i: usize = i.trim().parse().map_err(|_| Error::Parse(format!("bad index in {p:?}")))?;
        if !seen.insert(i) {
            return Err(Error::Parse(format!("duplicate index {i}")));
        }
        entries.push((i, S::parse_scalar(v)?));
    }
    SparseVector::from_entries(entries)
}

impl<S: Field> Serialize for SparseVector<S> {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> std::result::Result<Z::Ok, Z::Error> {
        encode_pairs(self).serialize(serializer)
    }
}

impl<'de, S: Field> Deserialize<'de> for SparseVector<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<String>::deserialize(deserializer)?;
        decode_pairs(&pairs).map_err(D::Error::custom)
    }
}

impl<S: Field> Serialize for CoordFunctional<S> {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> std::result::Result<Z::Ok, Z::Error> {
        self.coeffs.serialize(serializer)
    }
}

impl<'de, S: Field> Deserialize<'de> for CoordFunctional<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        SparseVector::deserialize(deserializer).map(Self::from_coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, Rational};

    fn v(pairs: &[(usize, i64, i64)]) -> SparseVector<Rational> {
        SparseVector::from_entries(pairs.iter().map(|&(i, n, d)| (i, q(n, d)))).unwrap()
    }

    #[test]
    fn zeros_are_never_stored() {
        let a = v(&[(1, 1, 2), (3, 2, 1)]);
        let b = v(&[(1, 1, 2)]);
        let d = a.sub(&b);
        assert_eq!(d.nnz(), 1);
        assert_eq!(d, v(&[(3, 2, 1)]));
        assert!(a.sub(&a).is_zero());
        assert_eq!(v(&[(2, 1, 1), (2, -1, 1)]), SparseVector::zero());
    }

    #[test]
    fn index_zero_is_rejected() {
        assert!(SparseVector::<Rational>::from_entries([(0, q(1, 1))]).is_err());
    }

    #[test]
    fn pairing_is_a_finite_sum() {
        let f = CoordFunctional::from_entries([(1, q(3, 1)), (4, q(-1, 2))]).unwrap();
        let x = v(&[(1, 1, 3), (2, 5, 1), (4, 2, 1)]);
        assert_eq!(f.apply(&x), q(0, 1));
    }

    #[test]
    fn serialized_as_sorted_pairs() {
        let x = v(&[(5, -3, 4), (2, 1, 1)]);
        let json = serde_json::to_string(&x).unwrap();
        assert_eq!(json, r#"["2:1/1","5:-3/4"]"#);
        let back: SparseVector<Rational> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<SparseVector<Rational>>(r#"["1:1","1:2"]"#).is_err());
    }
}
