//! Fixed-width vertex sets.
//!
//! A [`VarSet`] is a 128-bit mask over vertex indices. All the A/B/C sets of a
//! term, the subsets enumerated by the rules and the arguments of separation
//! queries use it.

use std::fmt;
use std::ops::{BitAnd, BitAndAssign, BitOr, BitOrAssign, Not, Sub};

/// Maximum number of vertices (after augmentation) a graph may hold.
pub const MAX_VERTICES: usize = 128;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct VarSet(pub u128);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    #[inline]
    pub fn empty() -> Self {
        VarSet(0)
    }

    #[inline]
    pub fn singleton(i: usize) -> Self {
        debug_assert!(i < MAX_VERTICES);
        VarSet(1u128 << i)
    }

    /// The set {0, .., n-1}.
    pub fn full(n: usize) -> Self {
        if n >= 128 {
            VarSet(u128::MAX)
        } else {
            VarSet((1u128 << n) - 1)
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(it: I) -> Self {
        let mut s = VarSet(0);
        for i in it {
            s.insert(i);
        }
        s
    }

    #[inline]
    pub fn bits(self) -> u128 {
        self.0
    }

    #[inline]
    pub fn contains(self, i: usize) -> bool {
        (self.0 >> i) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        self.0 |= 1u128 << i;
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        self.0 &= !(1u128 << i);
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_subset(self, other: VarSet) -> bool {
        self.0 & !other.0 == 0
    }

    #[inline]
    pub fn intersects(self, other: VarSet) -> bool {
        self.0 & other.0 != 0
    }

    #[inline]
    pub fn is_disjoint(self, other: VarSet) -> bool {
        self.0 & other.0 == 0
    }

    #[inline]
    pub fn minus(self, other: VarSet) -> VarSet {
        VarSet(self.0 & !other.0)
    }

    /// Lowest member, if any.
    #[inline]
    pub fn first(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize)
        }
    }

    /// Members in ascending index order.
    pub fn iter(self) -> Members {
        Members(self.0)
    }

    /// Non-empty subsets in ascending integer order.
    pub fn subsets(self) -> Subsets {
        Subsets {
            mask: self.0,
            cur: 0,
            done: self.0 == 0,
        }
    }

    /// Non-empty proper subsets in ascending integer order.
    pub fn proper_subsets(self) -> impl Iterator<Item = VarSet> {
        let me = self;
        self.subsets().filter(move |s| *s != me)
    }
}

pub struct Members(u128);

impl Iterator for Members {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Members {}

/// Submask enumeration via `s = (s - m) & m`, which visits submasks in
/// increasing numeric order.
pub struct Subsets {
    mask: u128,
    cur: u128,
    done: bool,
}

impl Iterator for Subsets {
    type Item = VarSet;

    #[inline]
    fn next(&mut self) -> Option<VarSet> {
        if self.done {
            return None;
        }
        self.cur = self.cur.wrapping_sub(self.mask) & self.mask;
        if self.cur == 0 {
            self.done = true;
            return None;
        }
        Some(VarSet(self.cur))
    }
}

impl BitOr for VarSet {
    type Output = VarSet;
    #[inline]
    fn bitor(self, rhs: VarSet) -> VarSet {
        VarSet(self.0 | rhs.0)
    }
}

impl BitOrAssign for VarSet {
    #[inline]
    fn bitor_assign(&mut self, rhs: VarSet) {
        self.0 |= rhs.0;
    }
}

impl BitAnd for VarSet {
    type Output = VarSet;
    #[inline]
    fn bitand(self, rhs: VarSet) -> VarSet {
        VarSet(self.0 & rhs.0)
    }
}

impl BitAndAssign for VarSet {
    #[inline]
    fn bitand_assign(&mut self, rhs: VarSet) {
        self.0 &= rhs.0;
    }
}

impl Sub for VarSet {
    type Output = VarSet;
    #[inline]
    fn sub(self, rhs: VarSet) -> VarSet {
        self.minus(rhs)
    }
}

impl Not for VarSet {
    type Output = VarSet;
    #[inline]
    fn not(self) -> VarSet {
        VarSet(!self.0)
    }
}

impl FromIterator<usize> for VarSet {
    fn from_iter<I: IntoIterator<Item = usize>>(it: I) -> Self {
        VarSet::from_indices(it)
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
