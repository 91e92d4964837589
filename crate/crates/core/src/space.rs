//! Users, code index vectors and regions of the code index space.
//!
//! Users are 0-based in the API: user `0` is the transmitter paired with the
//! receiver. Display impls print 1-based labels so reports read like the
//! usual "user 1, user 2" numbering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A subset of users stored as a bitmask (at most 32 users).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct UserSet(pub u32);

impl UserSet {
    pub const EMPTY: UserSet = UserSet(0);

    /// `{0, 1, ..., n-1}`.
    pub fn first(n: usize) -> Self {
        assert!(n <= 32, "at most 32 users are supported");
        if n == 32 {
            UserSet(u32::MAX)
        } else {
            UserSet((1u32 << n) - 1)
        }
    }

    pub fn singleton(user: usize) -> Self {
        UserSet(1 << user)
    }

    pub fn from_users<I: IntoIterator<Item = usize>>(users: I) -> Self {
        UserSet(users.into_iter().fold(0, |m, u| m | (1 << u)))
    }

    #[inline]
    pub fn contains(self, user: usize) -> bool {
        self.0 >> user & 1 == 1
    }

    pub fn with(self, user: usize) -> Self {
        UserSet(self.0 | (1 << user))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: Self) -> Self {
        UserSet(self.0 | other.0)
    }

    pub fn intersect(self, other: Self) -> Self {
        UserSet(self.0 & other.0)
    }

    pub fn minus(self, other: Self) -> Self {
        UserSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&u| self.contains(u))
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Every subset of `self`, in increasing bitmask order.
    pub fn subsets(self) -> impl Iterator<Item = UserSet> {
        let full = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full {
                None
            } else {
                Some((cur.wrapping_sub(full)) & full)
            };
            Some(UserSet(cur))
        })
    }
}

impl fmt::Debug for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, u) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", u + 1)?;
        }
        write!(f, "}}")
    }
}

/// One code choice per user: `g = (g_1, ..., g_{K+M})`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CodeIndexVector(pub Vec<usize>);

impl CodeIndexVector {
    pub fn new(indices: Vec<usize>) -> Self {
        CodeIndexVector(indices)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, user: usize) -> usize {
        self.0[user]
    }

    /// True when both vectors carry the same code on every user in `set`.
    pub fn agrees_on(&self, other: &Self, set: UserSet) -> bool {
        set.iter().all(|k| self.0[k] == other.0[k])
    }

    /// True when the vectors differ on every user in `set`.
    pub fn differs_on_all(&self, other: &Self, set: UserSet) -> bool {
        set.iter().all(|k| self.0[k] != other.0[k])
    }
}

impl fmt::Debug for CodeIndexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for CodeIndexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, g) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ";")?;
            }
            write!(f, "{g}")?;
        }
        write!(f, "]")
    }
}

/// Product space `G_1 x ... x G_{K+M}` described by the library sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSpace {
    sizes: Vec<usize>,
}

impl CodeSpace {
    pub fn new(sizes: Vec<usize>) -> Self {
        CodeSpace { sizes }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn cardinality(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn contains(&self, g: &CodeIndexVector) -> bool {
        g.len() == self.sizes.len() && g.0.iter().zip(&self.sizes).all(|(&i, &n)| i < n)
    }

    /// All vectors in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = CodeIndexVector> + '_ {
        let total = self.cardinality();
        (0..total).map(move |mut idx| {
            let mut v = vec![0; self.sizes.len()];
            for (slot, &n) in v.iter_mut().zip(&self.sizes).rev() {
                *slot = idx % n;
                idx /= n;
            }
            CodeIndexVector(v)
        })
    }
}

/// A set of code index vectors (operation region, margin, detection cell).
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Region(BTreeSet<CodeIndexVector>);

impl Region {
    /// Builds a region, rejecting duplicate members.
    pub fn new<I: IntoIterator<Item = CodeIndexVector>>(members: I) -> Result<Self> {
        let mut set = BTreeSet::new();
        for g in members {
            if set.contains(&g) {
                return Err(Error::DuplicateMember(g.0));
            }
            set.insert(g);
        }
        Ok(Region(set))
    }

    pub fn empty() -> Self {
        Region(BTreeSet::new())
    }

    pub fn from_vecs(members: &[&[usize]]) -> Result<Self> {
        Region::new(members.iter().map(|m| CodeIndexVector(m.to_vec())))
    }

    pub fn contains(&self, g: &CodeIndexVector) -> bool {
        self.0.contains(g)
    }

    pub fn insert(&mut self, g: CodeIndexVector) -> bool {
        self.0.insert(g)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CodeIndexVector> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn union(&self, other: &Region) -> Region {
        Region(self.0.union(&other.0).cloned().collect())
    }

    pub fn intersection(&self, other: &Region) -> Region {
        Region(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.0.is_disjoint(&other.0)
    }

    /// Members of `space` not in this region.
    pub fn complement(&self, space: &CodeSpace) -> Region {
        Region(space.iter().filter(|g| !self.contains(g)).collect())
    }
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.iter()).finish()
    }
}

impl FromIterator<CodeIndexVector> for Region {
    fn from_iter<T: IntoIterator<Item = CodeIndexVector>>(iter: T) -> Self {
        Region(iter.into_iter().collect())
    }
}

/// Assignment of the operation region to `(D, R_D)` decoders.
///
/// Every key contains user `0` and the cells are pairwise disjoint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegionPartition {
    cells: BTreeMap<UserSet, Region>,
}

impl RegionPartition {
    pub fn new(cells: BTreeMap<UserSet, Region>) -> Result<Self> {
        let entries: Vec<_> = cells.iter().collect();
        for (d, _) in &entries {
            if !d.contains(0) {
                return Err(Error::UserOneMissing);
            }
        }
        for (i, (da, ra)) in entries.iter().enumerate() {
            for (db, rb) in &entries[i + 1..] {
                if !ra.is_disjoint(rb) {
                    return Err(Error::NotAPartition(format!(
                        "cells for D={da} and D={db} overlap"
                    )));
                }
            }
        }
        Ok(RegionPartition { cells })
    }

    /// Everything assigned to a single decoder `D`.
    pub fn single(d: UserSet, region: Region) -> Result<Self> {
        RegionPartition::new(BTreeMap::from([(d, region)]))
    }

    pub fn cells(&self) -> impl Iterator<Item = (UserSet, &Region)> {
        self.cells.iter().map(|(d, r)| (*d, r))
    }

    pub fn get(&self, d: UserSet) -> Option<&Region> {
        self.cells.get(&d)
    }

    pub fn union(&self) -> Region {
        self.cells
            .values()
            .fold(Region::empty(), |acc, r| acc.union(r))
    }

    pub fn is_empty(&self) -> bool {
        self.cells.values().all(Region::is_empty)
    }

    /// Restrict every cell to `keep`.
    pub fn restricted_to(&self, keep: &Region) -> RegionPartition {
        RegionPartition {
            cells: self
                .cells
                .iter()
                .map(|(d, r)| (*d, r.intersection(keep)))
                .collect(),
        }
    }
}

/// Checks that `cells` are disjoint and cover `space`; returns the cell index
/// of every vector in lexicographic order.
pub fn validate_cover(space: &CodeSpace, cells: &[Region]) -> Result<()> {
    for (i, a) in cells.iter().enumerate() {
        for (j, b) in cells.iter().enumerate().skip(i + 1) {
            if !a.is_disjoint(b) {
                return Err(Error::NotAPartition(format!("cells {i} and {j} overlap")));
            }
        }
        if let Some(g) = a.iter().find(|g| !space.contains(g)) {
            return Err(Error::InvalidCodeIndex(g.0.clone()));
        }
    }
    if let Some(g) = space.iter().find(|g| !cells.iter().any(|c| c.contains(g))) {
        return Err(Error::NotAPartition(format!("{g} is not covered")));
    }
    Ok(())
}
