//! Fixed-width query bitsets. Bit `i` set means "serves query `i`".

use std::fmt;

pub const WORD_BITS: usize = 64;

/// Number of 64-bit words needed for `queries` bits (at least one).
pub fn words_for(queries: usize) -> usize {
    queries.div_ceil(WORD_BITS).max(1)
}

#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct QuerySet {
    words: Vec<u64>,
}

impl QuerySet {
    pub fn empty(words: usize) -> Self {
        QuerySet {
            words: vec![0; words],
        }
    }

    /// Bits `0..n` set, sized for `words` words.
    pub fn full(words: usize, n: usize) -> Self {
        assert!(n <= words * WORD_BITS, "{n} bits do not fit {words} words");
        let mut s = Self::empty(words);
        for (i, w) in s.words.iter_mut().enumerate() {
            let lo = i * WORD_BITS;
            if n >= lo + WORD_BITS {
                *w = u64::MAX;
            } else if n > lo {
                *w = (1u64 << (n - lo)) - 1;
            }
        }
        s
    }

    pub fn from_words(words: Vec<u64>) -> Self {
        QuerySet { words }
    }

    pub fn from_bits(words: usize, bits: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(words);
        for b in bits {
            s.insert(b);
        }
        s
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn insert(&mut self, q: usize) {
        self.words[q / WORD_BITS] |= 1u64 << (q % WORD_BITS);
    }

    pub fn remove(&mut self, q: usize) {
        self.words[q / WORD_BITS] &= !(1u64 << (q % WORD_BITS));
    }

    pub fn contains(&self, q: usize) -> bool {
        self.words
            .get(q / WORD_BITS)
            .is_some_and(|w| w & (1u64 << (q % WORD_BITS)) != 0)
    }

    pub fn is_empty(&self) -> bool {
        !any(&self.words)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn intersect_with(&mut self, other: &QuerySet) {
        and_into(&mut self.words, &other.words);
    }

    pub fn union_with(&mut self, other: &QuerySet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn difference_with(&mut self, other: &QuerySet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn intersection(&self, other: &QuerySet) -> QuerySet {
        let mut s = self.clone();
        s.intersect_with(other);
        s
    }

    pub fn intersects(&self, other: &QuerySet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset(&self, other: &QuerySet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> Bits<'_> {
        iter_bits(&self.words)
    }

    /// Hex rendering, most significant word first, without leading zero words.
    pub fn to_hex(&self) -> String {
        let mut out = String::from("0x");
        let mut started = false;
        for w in self.words.iter().rev() {
            if started {
                out.push_str(&format!("{w:016x}"));
            } else if *w != 0 {
                out.push_str(&format!("{w:x}"));
                started = true;
            }
        }
        if !started {
            out.push('0');
        }
        out
    }
}

impl fmt::Debug for QuerySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// `dst &= src`; returns whether any bit survived.
#[inline]
pub fn and_into(dst: &mut [u64], src: &[u64]) -> bool {
    let mut acc = 0u64;
    for (a, b) in dst.iter_mut().zip(src) {
        *a &= b;
        acc |= *a;
    }
    acc != 0
}

#[inline]
pub fn any(words: &[u64]) -> bool {
    words.iter().any(|w| *w != 0)
}

pub fn iter_bits(words: &[u64]) -> Bits<'_> {
    Bits {
        words,
        idx: 0,
        cur: words.first().copied().unwrap_or(0),
    }
}

/// Iterator over set bit positions of a word slice.
pub struct Bits<'a> {
    words: &'a [u64],
    idx: usize,
    cur: u64,
}

impl Iterator for Bits<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        loop {
            if self.cur != 0 {
                let tz = self.cur.trailing_zeros() as usize;
                self.cur &= self.cur - 1;
                return Some(self.idx * WORD_BITS + tz);
            }
            self.idx += 1;
            if self.idx >= self.words.len() {
                return None;
            }
            self.cur = self.words[self.idx];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    #[test]
    fn full_sets_exact_prefix() {
        let s = QuerySet::full(2, 70);
        assert_eq!(s.len(), 70);
        assert!(s.contains(69));
        assert!(!s.contains(70));
        assert_eq!(QuerySet::full(1, 64).words(), &[u64::MAX]);
        assert!(QuerySet::full(3, 0).is_empty());
    }

    #[test]
    fn hex_drops_leading_zero_words() {
        let s = QuerySet::from_bits(3, [0, 1, 64]);
        assert_eq!(s.to_hex(), "0x10000000000000003");
        assert_eq!(QuerySet::empty(2).to_hex(), "0x0");
    }

    #[test]
    fn words_for_rounds_up() {
        assert_eq!(words_for(0), 1);
        assert_eq!(words_for(64), 1);
        assert_eq!(words_for(65), 2);
        assert_eq!(words_for(512), 8);
    }

    proptest! {
        #[test]
        fn iter_matches_contains(bits in proptest::collection::btree_set(0usize..256, 0..40)) {
            let s = QuerySet::from_bits(4, bits.iter().copied());
            let got: Vec<usize> = s.iter().collect();
            let want: Vec<usize> = bits.iter().copied().collect();
            prop_assert_eq!(got, want);
            prop_assert_eq!(s.len(), bits.len());
        }

        #[test]
        fn set_algebra(a in proptest::collection::vec(proptest::prelude::any::<u64>(), 2), b in proptest::collection::vec(proptest::prelude::any::<u64>(), 2)) {
            let x = QuerySet::from_words(a);
            let y = QuerySet::from_words(b);
            let i = x.intersection(&y);
            prop_assert!(i.is_subset(&x) && i.is_subset(&y));
            prop_assert_eq!(x.intersects(&y), !i.is_empty());
            let mut u = x.clone();
            u.union_with(&y);
            prop_assert!(x.is_subset(&u) && y.is_subset(&u));
            let mut d = x.clone();
            d.difference_with(&y);
            prop_assert!(!d.intersects(&y));
        }
    }
}
