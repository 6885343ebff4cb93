//! Multi-indices, index sets and the orthonormal Legendre basis for the
//! uniform product measure `dπ_m = dy_m / 2` on `[-1, 1]`.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finitely supported multi-index, stored as sorted `(dimension, degree)`
/// pairs with dimensions starting at 1 and every stored degree ≥ 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MultiIndex(Vec<(u32, u32)>);

impl MultiIndex {
    pub fn zero() -> Self {
        MultiIndex(Vec::new())
    }

    /// The unit index ε_m.
    pub fn unit(m: u32) -> Self {
        assert!(m >= 1, "dimensions start at 1");
        MultiIndex(vec![(m, 1)])
    }

    /// Builds an index from `(dimension, degree)` pairs in any order;
    /// zero degrees are dropped, repeated dimensions are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut dense: std::collections::BTreeMap<u32, u32> = Default::default();
        for (m, d) in pairs {
            assert!(m >= 1, "dimensions start at 1");
            *dense.entry(m).or_default() += d;
        }
        MultiIndex(dense.into_iter().filter(|&(_, d)| d > 0).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.0
    }

    pub fn degree(&self, m: u32) -> u32 {
        self.0
            .binary_search_by_key(&m, |&(dim, _)| dim)
            .map_or(0, |i| self.0[i].1)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|&(_, d)| d).sum()
    }

    /// Largest active dimension, 0 for the zero index.
    pub fn max_dimension(&self) -> u32 {
        self.0.last().map_or(0, |&(m, _)| m)
    }

    /// `self + ε_m`.
    pub fn raised(&self, m: u32) -> Self {
        let mut pairs = self.0.clone();
        match pairs.binary_search_by_key(&m, |&(dim, _)| dim) {
            Ok(i) => pairs[i].1 += 1,
            Err(i) => pairs.insert(i, (m, 1)),
        }
        MultiIndex(pairs)
    }

    /// `self - ε_m`, or `None` if the result would have a negative entry.
    pub fn lowered(&self, m: u32) -> Option<Self> {
        let i = self.0.binary_search_by_key(&m, |&(dim, _)| dim).ok()?;
        let mut pairs = self.0.clone();
        if pairs[i].1 == 1 {
            pairs.remove(i);
        } else {
            pairs[i].1 -= 1;
        }
        Some(MultiIndex(pairs))
    }

    /// The dimension in which `self` and `other` differ by exactly one
    /// unit, provided they agree everywhere else.
    pub fn unit_difference(&self, other: &MultiIndex) -> Option<u32> {
        let mut diff = None;
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() || j < b.len() {
            let (m, da, db) = match (a.get(i), b.get(j)) {
                (Some(&(ma, da)), Some(&(mb, db))) if ma == mb => {
                    i += 1;
                    j += 1;
                    (ma, da, db)
                }
                (Some(&(ma, da)), Some(&(mb, _))) if ma < mb => {
                    i += 1;
                    (ma, da, 0)
                }
                (Some(&(ma, da)), None) => {
                    i += 1;
                    (ma, da, 0)
                }
                (_, Some(&(mb, db))) => {
                    j += 1;
                    (mb, 0, db)
                }
                (None, None) => unreachable!(),
            };
            if da != db {
                if da.abs_diff(db) != 1 || diff.is_some() {
                    return None;
                }
                diff = Some(m);
            }
        }
        diff
    }
}

/// Canonical order: total degree first, then lexicographic on the sparse
/// `(dimension, degree)` list.
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        let parts: Vec<String> = self.0.iter().map(|(m, d)| format!("{m}:{d}")).collect();
        f.write_str(&parts.join(" "))
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "-" {
            return Ok(MultiIndex::zero());
        }
        let mut pairs = Vec::new();
        for tok in s.split_whitespace() {
            let parsed = tok
                .split_once(':')
                .and_then(|(m, d)| Some((m.parse::<u32>().ok()?, d.parse::<u32>().ok()?)));
            match parsed {
                Some((m, d)) if m >= 1 && d >= 1 => pairs.push((m, d)),
                _ => return Err(Error::InvalidInput(format!("bad multi-index entry '{tok}'"))),
            }
        }
        if pairs.is_empty() || pairs.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidInput(format!(
                "multi-index '{s}' must list strictly increasing dimensions"
            )));
        }
        Ok(MultiIndex(pairs))
    }
}

/// An ordered set of distinct multi-indices that always starts with 𝟘.
/// New members are appended in canonical order, so positions of existing
/// members never change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    members: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
}

impl Default for IndexSet {
    fn default() -> Self {
        Self::new()
    }
}

impl IndexSet {
    /// The set `{𝟘}`.
    pub fn new() -> Self {
        let zero = MultiIndex::zero();
        IndexSet {
            lookup: HashMap::from([(zero.clone(), 0)]),
            members: vec![zero],
        }
    }

    /// A set without the zero index; used for detail sets.
    fn detached(mut members: Vec<MultiIndex>) -> Self {
        members.sort();
        members.dedup();
        let lookup = members.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        IndexSet { members, lookup }
    }

    /// `{𝟘} ∪ extra`, with `extra` appended in canonical order.
    pub fn from_indices(extra: impl IntoIterator<Item = MultiIndex>) -> Self {
        let mut set = IndexSet::new();
        set.extend(extra);
        set
    }

    /// Adds the new members of `extra` in canonical order; returns how many
    /// were added.
    pub fn extend(&mut self, extra: impl IntoIterator<Item = MultiIndex>) -> usize {
        let fresh: BTreeSet<MultiIndex> = extra.into_iter().filter(|m| !self.contains(m)).collect();
        let added = fresh.len();
        for m in fresh {
            self.lookup.insert(m.clone(), self.members.len());
            self.members.push(m);
        }
        added
    }

    /// Union with another set, keeping this set's positions.
    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut out = self.clone();
        out.extend(other.iter().cloned());
        out
    }

    pub fn contains(&self, m: &MultiIndex) -> bool {
        self.lookup.contains_key(m)
    }

    pub fn position(&self, m: &MultiIndex) -> Option<usize> {
        self.lookup.get(m).copied()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.members.iter()
    }

    pub fn get(&self, i: usize) -> &MultiIndex {
        &self.members[i]
    }

    pub fn as_slice(&self) -> &[MultiIndex] {
        &self.members
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.iter().all(|m| other.contains(m))
    }

    /// The dump format: one index per line.
    pub fn dump(&self) -> String {
        self.iter().map(|m| format!("{m}\n")).collect()
    }

    /// Parses a dump. The first line must be the zero index.
    pub fn parse_dump(text: &str) -> Result<Self> {
        let indices: Vec<MultiIndex> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if indices.first().map_or(true, |m| !m.is_zero()) {
            return Err(Error::InvalidInput("index-set dump must start with '-'".into()));
        }
        let mut set = IndexSet::new();
        for m in indices.into_iter().skip(1) {
            if set.contains(&m) {
                return Err(Error::InvalidInput(format!("duplicate index '{m}'")));
            }
            set.lookup.insert(m.clone(), set.members.len());
            set.members.push(m);
        }
        Ok(set)
    }
}

impl<'a> IntoIterator for &'a IndexSet {
    type Item = &'a MultiIndex;
    type IntoIter = std::slice::Iter<'a, MultiIndex>;

    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}

/// M_P: 0 for `{𝟘}`, otherwise the largest active dimension.
pub fn active_dimension(set: &IndexSet) -> u32 {
    set.iter().map(MultiIndex::max_dimension).max().unwrap_or(0)
}

/// The detail index set Q: all `ν ± ε_m` with `ν ∈ P`, `1 ≤ m ≤ M_P + 1`,
/// non-negative entries, and not already in P. Returned in canonical order.
pub fn detail_index_set(set: &IndexSet) -> IndexSet {
    let top = active_dimension(set) + 1;
    let mut candidates = Vec::new();
    for nu in set {
        for m in 1..=top {
            let up = nu.raised(m);
            if !set.contains(&up) {
                candidates.push(up);
            }
            if let Some(down) = nu.lowered(m) {
                if !set.contains(&down) {
                    candidates.push(down);
                }
            }
        }
    }
    IndexSet::detached(candidates)
}

/// Orthonormal Legendre polynomial `P_n(y)` with respect to `dy/2`.
pub fn legendre(n: u32, y: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        // y P_k = c_{k+1} P_{k+1} + c_k P_{k-1}
        let next = (y * cur - coupling_coefficient_or_zero(k) * prev) / coupling_coefficient(k + 1);
        prev = cur;
        cur = next;
    }
    cur
}

/// `c_n = ∫ y P_n P_{n-1} dπ = n / sqrt(4n² - 1)` for `n ≥ 1`.
pub fn coupling_coefficient(n: u32) -> f64 {
    assert!(n >= 1, "coupling coefficient needs n >= 1");
    let n = f64::from(n);
    n / (4.0 * n * n - 1.0).sqrt()
}

fn coupling_coefficient_or_zero(n: u32) -> f64 {
    if n == 0 {
        0.0
    } else {
        coupling_coefficient(n)
    }
}

/// `∫ y_m P_ν P_μ dπ`, nonzero only when `μ = ν ± ε_m`.
pub fn triple_product(nu: &MultiIndex, mu: &MultiIndex, m: u32) -> f64 {
    match nu.unit_difference(mu) {
        Some(d) if d == m => coupling_coefficient(nu.degree(m).max(mu.degree(m))),
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(pairs: &[(u32, u32)]) -> MultiIndex {
        MultiIndex::from_pairs(pairs.iter().copied())
    }

    fn as_set(set: &IndexSet) -> BTreeSet<MultiIndex> {
        set.iter().cloned().collect()
    }

    #[test]
    fn active_dimension_examples() {
        assert_eq!(active_dimension(&IndexSet::new()), 0);
        assert_eq!(active_dimension(&IndexSet::from_indices([MultiIndex::unit(1)])), 1);
        let p = IndexSet::from_indices([MultiIndex::unit(1), idx(&[(1, 1), (4, 1)])]);
        assert_eq!(active_dimension(&p), 4);
    }

    #[test]
    fn detail_set_of_zero() {
        let q = detail_index_set(&IndexSet::new());
        assert_eq!(q.as_slice(), &[MultiIndex::unit(1)]);
    }

    #[test]
    fn detail_set_examples() {
        let p = IndexSet::from_indices([MultiIndex::unit(1)]);
        let expected: BTreeSet<_> = [idx(&[(2, 1)]), idx(&[(1, 2)]), idx(&[(1, 1), (2, 1)])].into();
        assert_eq!(as_set(&detail_index_set(&p)), expected);

        let p = IndexSet::from_indices([MultiIndex::unit(1), idx(&[(1, 2)])]);
        let expected: BTreeSet<_> = [
            idx(&[(2, 1)]),
            idx(&[(1, 3)]),
            idx(&[(1, 1), (2, 1)]),
            idx(&[(1, 2), (2, 1)]),
        ]
        .into();
        assert_eq!(as_set(&detail_index_set(&p)), expected);
    }

    #[test]
    fn canonical_order() {
        let mut v = vec![idx(&[(1, 2)]), idx(&[(2, 1)]), MultiIndex::zero(), idx(&[(1, 1), (2, 1)])];
        v.sort();
        assert_eq!(v, vec![MultiIndex::zero(), idx(&[(2, 1)]), idx(&[(1, 1), (2, 1)]), idx(&[(1, 2)])]);
    }

    #[test]
    fn extend_keeps_positions() {
        let mut p = IndexSet::new();
        p.extend([idx(&[(2, 1)]), MultiIndex::unit(1)]);
        assert_eq!(p.get(0), &MultiIndex::zero());
        assert_eq!(p.get(1), &MultiIndex::unit(1));
        assert_eq!(p.extend([MultiIndex::unit(1), idx(&[(1, 2)])]), 1);
        assert_eq!(p.position(&idx(&[(1, 2)])), Some(3));
    }

    #[test]
    fn unit_difference() {
        let a = idx(&[(1, 2), (3, 1)]);
        assert_eq!(a.unit_difference(&idx(&[(1, 2)])), Some(3));
        assert_eq!(a.unit_difference(&idx(&[(1, 1), (3, 1)])), Some(1));
        assert_eq!(a.unit_difference(&idx(&[(1, 2), (3, 1), (4, 1)])), Some(4));
        assert_eq!(a.unit_difference(&a), None);
        assert_eq!(a.unit_difference(&idx(&[(1, 1)])), None);
        assert_eq!(a.unit_difference(&idx(&[(3, 1)])), None);
    }

    #[test]
    fn legendre_closed_forms() {
        assert_eq!(legendre(0, 0.3), 1.0);
        assert!((legendre(1, 0.3) - 3f64.sqrt() * 0.3).abs() < 1e-15);
        for n in 0..=10 {
            let expected = (2.0 * f64::from(n) + 1.0).sqrt();
            assert!((legendre(n, 1.0) - expected).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn coupling_values() {
        assert!((coupling_coefficient(1) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((coupling_coefficient(2) - 2.0 / 15f64.sqrt()).abs() < 1e-15);
        let zero = MultiIndex::zero();
        assert_eq!(triple_product(&idx(&[(1, 2)]), &zero, 1), 0.0);
        assert!((triple_product(&MultiIndex::unit(1), &zero, 1) - coupling_coefficient(1)).abs() < 1e-15);
        assert_eq!(triple_product(&MultiIndex::unit(1), &zero, 2), 0.0);
    }

    #[test]
    fn coupling_envelope() {
        let mut prev = f64::INFINITY;
        for n in 1..200 {
            let c = coupling_coefficient(n);
            assert!(c > 0.0 && c < 0.5 + 1.0 / (8.0 * f64::from(n)));
            assert!(c < prev);
            prev = c;
        }
        assert!((coupling_coefficient(100_000) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn dump_round_trip() {
        let p = IndexSet::from_indices([MultiIndex::unit(1), idx(&[(1, 1), (4, 2)])]);
        let text = p.dump();
        assert_eq!(text, "-\n1:1\n1:1 4:2\n");
        assert_eq!(IndexSet::parse_dump(&text).unwrap(), p);
        assert!(IndexSet::parse_dump("1:1\n").is_err());
        assert!("2:1 1:1".parse::<MultiIndex>().is_err());
    }
}
