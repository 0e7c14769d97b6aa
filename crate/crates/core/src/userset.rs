//! Small user/relay sets backed by a 128-bit mask.
//!
//! Ids are 1-based; id `i` occupies bit `i - 1`. Ordering is the
//! lexicographic order of the sorted member lists, which is the order every
//! enumeration in the crate uses.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const MAX_ID: usize = 128;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct UserSet(u128);

impl UserSet {
    pub const EMPTY: UserSet = UserSet(0);

    pub fn from_ids<I: IntoIterator<Item = usize>>(ids: I) -> Self {
        let mut s = UserSet::EMPTY;
        for id in ids {
            s.insert(id);
        }
        s
    }

    pub fn bits(self) -> u128 {
        self.0
    }

    pub fn from_bits(bits: u128) -> Self {
        UserSet(bits)
    }

    pub fn insert(&mut self, id: usize) {
        assert!((1..=MAX_ID).contains(&id), "id {id} out of range");
        self.0 |= 1u128 << (id - 1);
    }

    pub fn with(self, id: usize) -> Self {
        let mut s = self;
        s.insert(id);
        s
    }

    pub fn without(self, id: usize) -> Self {
        if id == 0 || id > MAX_ID {
            return self;
        }
        UserSet(self.0 & !(1u128 << (id - 1)))
    }

    pub fn contains(self, id: usize) -> bool {
        id >= 1 && id <= MAX_ID && self.0 & (1u128 << (id - 1)) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersect(self, other: UserSet) -> UserSet {
        UserSet(self.0 & other.0)
    }

    pub fn union(self, other: UserSet) -> UserSet {
        UserSet(self.0 | other.0)
    }

    pub fn minus(self, other: UserSet) -> UserSet {
        UserSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: UserSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(tz + 1)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// All `size`-subsets of `self`, in lexicographic order.
    pub fn subsets_of_size(self, size: usize) -> Vec<UserSet> {
        let members = self.to_vec();
        let mut out = Vec::new();
        for_each_combination(members.len(), size, |idx| {
            out.push(UserSet::from_ids(idx.iter().map(|&i| members[i])));
        });
        out
    }
}

/// Calls `f` with every `k`-combination of `0..n` (sorted index slices) in
/// lexicographic order.
pub fn for_each_combination<F: FnMut(&[usize])>(n: usize, k: usize, mut f: F) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == i - 1 + n - k {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

impl Ord for UserSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for UserSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, id) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{id}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for UserSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for UserSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let ids = Vec::<usize>::deserialize(d)?;
        if let Some(&bad) = ids.iter().find(|&&id| id == 0 || id > MAX_ID) {
            return Err(serde::de::Error::custom(format!("id {bad} out of range")));
        }
        Ok(UserSet::from_ids(ids))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lexicographic_subsets() {
        let s = UserSet::from_ids(1..=4);
        let pairs: Vec<Vec<usize>> = s.subsets_of_size(2).into_iter().map(|x| x.to_vec()).collect();
        assert_eq!(
            pairs,
            vec![vec![1, 2], vec![1, 3], vec![1, 4], vec![2, 3], vec![2, 4], vec![3, 4]]
        );
        assert_eq!(s.subsets_of_size(0), vec![UserSet::EMPTY]);
        assert!(s.subsets_of_size(5).is_empty());
    }

    #[test]
    fn ordering_is_lexicographic_on_sorted_members() {
        let a = UserSet::from_ids([1, 5]);
        let b = UserSet::from_ids([2, 3]);
        let c = UserSet::from_ids([1, 2, 9]);
        assert!(a < b);
        assert!(c < a);
        assert!(UserSet::EMPTY < a);
    }

    proptest! {
        #[test]
        fn combinations_are_sorted_and_counted(n in 0usize..9, k in 0usize..9) {
            let mut all = Vec::new();
            for_each_combination(n, k, |c| all.push(c.to_vec()));
            prop_assert_eq!(all.len() as i128, crate::rational::binom(n as i64, k as i64));
            prop_assert!(all.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
