/// A packed bit vector, least-significant bit first within each byte.
///
/// Fixed-width fields are laid out back to back, so field `i` of width `w`
/// occupies bits `[i*w, (i+1)*w)`. At width 32 this is plain little-endian.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitStream {
    bytes: Vec<u8>,
    len: usize,
}

impl BitStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self { bytes: Vec::with_capacity(bits.div_ceil(8)), len: 0 }
    }

    pub fn zeros(len: usize) -> Self {
        Self { bytes: vec![0; len.div_ceil(8)], len }
    }

    /// Wraps raw bytes; bits past `len` in the last byte are cleared.
    pub fn from_bytes(mut bytes: Vec<u8>, len: usize) -> Option<Self> {
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        if !len.is_multiple_of(8) {
            let last = bytes.len() - 1;
            bytes[last] &= (1u8 << (len % 8)) - 1;
        }
        Some(Self { bytes, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.bytes[i / 8] >> (i % 8) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let mask = 1u8 << (i % 8);
        if v {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.bytes[i / 8] ^= 1u8 << (i % 8);
    }

    pub fn invert(&mut self) {
        self.bytes.iter_mut().for_each(|b| *b = !*b);
        if !self.len.is_multiple_of(8) {
            let last = self.bytes.len() - 1;
            self.bytes[last] &= (1u8 << (self.len % 8)) - 1;
        }
    }

    /// Clears bits `[start, end)`.
    pub fn clear_range(&mut self, start: usize, end: usize) {
        let end = end.min(self.len);
        let mut i = start;
        while i < end && !i.is_multiple_of(8) {
            self.set(i, false);
            i += 1;
        }
        while i + 8 <= end {
            self.bytes[i / 8] = 0;
            i += 8;
        }
        while i < end {
            self.set(i, false);
            i += 1;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Appends the low `width` bits of `value` (`width <= 57`).
    pub fn push(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 57);
        if width == 0 {
            return;
        }
        let value = value & low_mask(width);
        let mut offset = self.len % 8;
        let mut rest = value;
        let mut remaining = width as usize;
        if offset != 0 {
            let last = self.bytes.len() - 1;
            self.bytes[last] |= (rest << offset) as u8;
            let took = (8 - offset).min(remaining);
            rest >>= took;
            remaining -= took;
            offset = 0;
        }
        debug_assert_eq!(offset, 0);
        while remaining > 0 {
            self.bytes.push(rest as u8);
            rest >>= 8;
            remaining = remaining.saturating_sub(8);
        }
        self.len += width as usize;
    }

    /// Reads `width` bits starting at bit `pos` (`width <= 57`).
    pub fn read(&self, pos: usize, width: u32) -> u64 {
        debug_assert!(width <= 57);
        assert!(pos + width as usize <= self.len, "read past end of stream");
        if width == 0 {
            return 0;
        }
        let first = pos / 8;
        let last = (pos + width as usize - 1) / 8;
        let mut word = 0u64;
        for (j, &b) in self.bytes[first..=last].iter().enumerate() {
            word |= (b as u64) << (8 * j);
        }
        (word >> (pos % 8)) & low_mask(width)
    }
}

#[inline]
fn low_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_32_is_little_endian() {
        let mut b = BitStream::new();
        b.push(7, 32);
        assert_eq!(b.len(), 32);
        assert_eq!(b.as_bytes(), &[7, 0, 0, 0]);
        b.push(0xDEAD_BEEF, 32);
        assert_eq!(&b.as_bytes()[4..], &0xDEAD_BEEFu32.to_le_bytes());
    }

    #[test]
    fn odd_widths_round_trip() {
        let widths = [1u32, 3, 7, 9, 13, 16, 31, 32, 2, 5];
        let mut b = BitStream::new();
        let vals: Vec<u64> = widths.iter().enumerate().map(|(i, &w)| (0x9E37_79B9u64 * (i as u64 + 1)) & low_mask(w)).collect();
        for (&v, &w) in vals.iter().zip(&widths) {
            b.push(v, w);
        }
        let mut pos = 0;
        for (&v, &w) in vals.iter().zip(&widths) {
            assert_eq!(b.read(pos, w), v);
            pos += w as usize;
        }
        assert_eq!(b.len(), pos);
    }

    #[test]
    fn bit_ops() {
        let mut b = BitStream::zeros(11);
        b.set(10, true);
        b.flip(0);
        assert!(b.get(0) && b.get(10) && !b.get(5));
        b.invert();
        assert_eq!(b.count_ones(), 9);
        b.clear_range(2, 11);
        assert_eq!(b.count_ones(), 1);
        assert!(BitStream::from_bytes(vec![0xFF], 3).unwrap().count_ones() == 3);
        assert!(BitStream::from_bytes(vec![0xFF], 9).is_none());
    }
}
