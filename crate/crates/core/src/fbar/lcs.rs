//! Longest common subsequence: bit-parallel fast path and the quadratic DP.

/// Match masks of a pattern, one multiword bitvector per symbol.
pub struct PatternMasks {
    words: usize,
    len: usize,
    masks: Vec<u64>,
    symbols: usize,
}

impl PatternMasks {
    pub fn new(pattern: &[usize]) -> Self {
        let symbols = pattern.iter().copied().max().map_or(1, |m| m + 1);
        let words = pattern.len().div_ceil(64).max(1);
        let mut masks = vec![0u64; symbols * words];
        for (i, &c) in pattern.iter().enumerate() {
            masks[c * words + i / 64] |= 1u64 << (i % 64);
        }
        PatternMasks { words, len: pattern.len(), masks, symbols }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// LCS length between the pattern and `text` (Hyyrö's recurrence).
    pub fn lcs(&self, text: &[usize]) -> usize {
        if self.len == 0 || text.is_empty() {
            return 0;
        }
        let w = self.words;
        let mut s = vec![!0u64; w];
        for &c in text {
            if c >= self.symbols {
                continue;
            }
            let pm = &self.masks[c * w..(c + 1) * w];
            let mut carry = 0u64;
            for k in 0..w {
                let u = s[k] & pm[k];
                let (x1, c1) = s[k].overflowing_add(u);
                let (x2, c2) = x1.overflowing_add(carry);
                carry = (c1 | c2) as u64;
                s[k] = x2 | (s[k] - u);
            }
        }
        let mut lcs = 0usize;
        for (k, x) in s.iter().enumerate() {
            let valid = if k + 1 == w && !self.len.is_multiple_of(64) { (1u64 << (self.len % 64)) - 1 } else { !0u64 };
            lcs += (!x & valid).count_ones() as usize;
        }
        lcs
    }
}

pub fn lcs_len(a: &[usize], b: &[usize]) -> usize {
    if a.len() <= b.len() {
        PatternMasks::new(a).lcs(b)
    } else {
        PatternMasks::new(b).lcs(a)
    }
}

/// O(|a||b|) dynamic program.
pub fn lcs_len_naive(a: &[usize], b: &[usize]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_cases() {
        assert_eq!(lcs_len(&[0, 1, 0], &[0, 1, 0]), 3);
        assert_eq!(lcs_len(&[0, 1], &[1, 0]), 1);
        assert_eq!(lcs_len(&[0, 0, 0, 0], &[1, 1, 1, 1]), 0);
        assert_eq!(lcs_len(&[], &[1]), 0);
    }

    #[test]
    fn word_boundaries() {
        for n in [63usize, 64, 65, 127, 128, 129, 300] {
            let a: Vec<usize> = (0..n).map(|i| (i * 7 + i / 3) % 3).collect();
            let b: Vec<usize> = (0..n).map(|i| (i * 5 + 1) % 3).collect();
            assert_eq!(lcs_len(&a, &b), lcs_len_naive(&a, &b), "n={n}");
            assert_eq!(lcs_len(&a, &a), n);
        }
    }

    proptest! {
        #[test]
        fn matches_dp(a in prop::collection::vec(0usize..4, 0..150),
                      b in prop::collection::vec(0usize..4, 0..150)) {
            prop_assert_eq!(lcs_len(&a, &b), lcs_len_naive(&a, &b));
        }
    }
}
