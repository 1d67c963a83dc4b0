use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A set of branch identifiers, stored as a bitmap.
#[derive(Clone, Default)]
pub struct BranchSet {
    words: Vec<u64>,
}

impl BranchSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: u32) -> bool {
        let (w, bit) = ((id / 64) as usize, id % 64);
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        let mask = 1u64 << bit;
        let fresh = self.words[w] & mask == 0;
        self.words[w] |= mask;
        fresh
    }

    pub fn contains(&self, id: u32) -> bool {
        let (w, bit) = ((id / 64) as usize, id % 64);
        self.words.get(w).is_some_and(|x| x & (1 << bit) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_subset(&self, other: &BranchSet) -> bool {
        self.words.iter().enumerate().all(|(i, &w)| w & !other.words.get(i).copied().unwrap_or(0) == 0)
    }

    pub fn union_with(&mut self, other: &BranchSet) {
        if other.words.len() > self.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &BranchSet) -> BranchSet {
        let words =
            self.words.iter().enumerate().map(|(i, &w)| w & !other.words.get(i).copied().unwrap_or(0)).collect();
        BranchSet { words }
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.words
            .iter()
            .enumerate()
            .flat_map(|(i, &w)| (0..64u32).filter(move |b| w & (1u64 << b) != 0).map(move |b| i as u32 * 64 + b))
    }

    /// Number of members in `range`.
    pub fn count_in(&self, range: std::ops::Range<u32>) -> usize {
        self.iter().filter(|id| range.contains(id)).count()
    }
}

impl PartialEq for BranchSet {
    fn eq(&self, other: &Self) -> bool {
        let n = self.words.len().max(other.words.len());
        (0..n).all(|i| self.words.get(i).copied().unwrap_or(0) == other.words.get(i).copied().unwrap_or(0))
    }
}

impl Eq for BranchSet {}

impl FromIterator<u32> for BranchSet {
    fn from_iter<I: IntoIterator<Item = u32>>(iter: I) -> Self {
        let mut s = BranchSet::new();
        for id in iter {
            s.insert(id);
        }
        s
    }
}

impl fmt::Debug for BranchSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for BranchSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for BranchSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Vec::<u32>::deserialize(d)?.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn matches_btreeset(a in proptest::collection::btree_set(0u32..300, 0..40),
                            b in proptest::collection::btree_set(0u32..300, 0..40)) {
            let sa: BranchSet = a.iter().copied().collect();
            let sb: BranchSet = b.iter().copied().collect();
            prop_assert_eq!(sa.len(), a.len());
            prop_assert_eq!(sa.iter().collect::<Vec<_>>(), a.iter().copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.is_subset(&sb), a.is_subset(&b));
            let diff: Vec<u32> = sa.difference(&sb).iter().collect();
            prop_assert_eq!(diff, a.difference(&b).copied().collect::<Vec<_>>());
            let mut u = sa.clone();
            u.union_with(&sb);
            prop_assert_eq!(u.iter().collect::<Vec<_>>(), a.union(&b).copied().collect::<Vec<_>>());
        }
    }

    #[test]
    fn equality_ignores_trailing_zero_words() {
        let mut a = BranchSet::new();
        a.insert(3);
        let mut b: BranchSet = [3, 200].into_iter().collect();
        assert_ne!(a, b);
        b = b.difference(&[200].into_iter().collect());
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&b).unwrap(), "[3]");
    }
}
