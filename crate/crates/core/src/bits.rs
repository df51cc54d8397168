//! Packed storage for sequences of ±1 steps.
//!
//! Bit `i` of word `i / 64` (LSB first) holds step `i`: a set bit is `+1`,
//! a clear bit is `-1`. Bits at or beyond `len` are always zero.

/// Mask selecting the even bit positions of a word.
pub(crate) const EVEN_BITS: u64 = 0x5555_5555_5555_5555;

/// Even positions `j` of `word` whose pair `(j, j + 1)` holds two equal steps.
#[inline]
pub(crate) fn matched_pairs(word: u64) -> u64 {
    !(word ^ (word >> 1)) & EVEN_BITS
}

#[inline]
fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SignVec {
    words: Vec<u64>,
    len: usize,
}

impl SignVec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vector from explicit steps; `None` if any entry is not ±1.
    pub fn from_steps(steps: &[i8]) -> Option<Self> {
        let mut v = Self::new();
        for &s in steps {
            match s {
                1 | -1 => v.push(s),
                _ => return None,
            }
        }
        Some(v)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    /// Step `i` (0-based) as ±1.
    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        if self.bit(i) {
            1
        } else {
            -1
        }
    }

    pub fn push(&mut self, step: i8) {
        let i = self.len;
        if i & 63 == 0 {
            self.words.push(0);
        }
        if step > 0 {
            self.words[i >> 6] |= 1 << (i & 63);
        }
        self.len += 1;
    }

    /// Appends 64 steps at once. Requires a word-aligned length.
    pub(crate) fn push_word(&mut self, word: u64) {
        debug_assert_eq!(self.len & 63, 0);
        self.words.push(word);
        self.len += 64;
    }

    /// Copies steps `self.len()..end` from `src` (same positions), negated when `invert`.
    pub(crate) fn extend_from(&mut self, src: &SignVec, end: usize, invert: bool) {
        debug_assert!(end <= src.len);
        let mut pos = self.len;
        while pos < end {
            let wi = pos >> 6;
            let lo = pos & 63;
            let hi = (end - (wi << 6)).min(64);
            let mask = low_mask(hi) & !low_mask(lo);
            let mut w = src.words[wi];
            if invert {
                w = !w;
            }
            if wi == self.words.len() {
                self.words.push(0);
            }
            self.words[wi] |= w & mask;
            pos = (wi << 6) + hi;
        }
        self.len = self.len.max(end);
    }

    /// Like `extend_from` when the new steps all lie in the word holding `self.len()`;
    /// `src_word` is that word of the source.
    #[inline]
    pub(crate) fn extend_within_word(&mut self, src_word: u64, end: usize, invert: bool) {
        let wi = self.len >> 6;
        debug_assert!(end > self.len && end <= (wi << 6) + 64);
        if wi == self.words.len() {
            self.words.push(0);
        }
        let mask = low_mask(end - (wi << 6)) & !low_mask(self.len & 63);
        let w = if invert { !src_word } else { src_word };
        self.words[wi] |= w & mask;
        self.len = end;
    }

    /// Negates step `i` in place.
    pub(crate) fn flip(&mut self, i: usize) {
        assert!(i < self.len);
        self.words[i >> 6] ^= 1 << (i & 63);
    }

    /// Sum of the steps in word `wi` that lie below `n` bits.
    #[inline]
    pub(crate) fn partial_word_sum(&self, wi: usize, n: usize) -> i64 {
        if n == 0 {
            return 0;
        }
        let ones = (self.words[wi] & low_mask(n)).count_ones() as i64;
        2 * ones - n as i64
    }

    pub fn iter(&self) -> impl Iterator<Item = i8> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn to_vec(&self) -> Vec<i8> {
        self.iter().collect()
    }

    /// Writes steps `start..start + out.len()` as `±scale`.
    pub fn write_scaled(&self, start: usize, scale: f64, out: &mut [f64]) {
        assert!(start + out.len() <= self.len);
        for (o, i) in out.iter_mut().zip(start..) {
            *o = if self.bit(i) { scale } else { -scale };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_and_read_back() {
        let steps = [1i8, -1, -1, 1, 1, 1, -1];
        let v = SignVec::from_steps(&steps).unwrap();
        assert_eq!(v.len(), 7);
        assert_eq!(v.to_vec(), steps);
        assert!(SignVec::from_steps(&[1, 0]).is_none());
    }

    #[test]
    fn matched_pair_mask() {
        // pairs: (+,+) (-,+) (-,-) (+,-)
        let v = SignVec::from_steps(&[1, 1, -1, 1, -1, -1, 1, -1]).unwrap();
        let m = matched_pairs(v.words()[0]) & 0xff;
        assert_eq!(m, 0b0001_0001);
    }

    #[test]
    fn extend_copies_and_inverts_ranges() {
        let mut src = SignVec::new();
        for i in 0..200 {
            src.push(if i % 3 == 0 { 1 } else { -1 });
        }
        let mut dst = SignVec::new();
        dst.extend_from(&src, 10, false);
        dst.extend_from(&src, 130, true);
        dst.extend_from(&src, 200, false);
        for i in 0..200 {
            let expect = if (10..130).contains(&i) {
                -src.get(i)
            } else {
                src.get(i)
            };
            assert_eq!(dst.get(i), expect, "index {i}");
        }
        // bits past len stay clear
        assert_eq!(dst.words()[3] >> 8, 0);
    }

    #[test]
    fn partial_sums_by_popcount() {
        let v = SignVec::from_steps(&[1, 1, -1, 1, -1]).unwrap();
        assert_eq!(v.partial_word_sum(0, 0), 0);
        assert_eq!(v.partial_word_sum(0, 2), 2);
        assert_eq!(v.partial_word_sum(0, 5), 1);
    }
}
