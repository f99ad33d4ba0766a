//! Packed spin configurations: spins in {-1,+1}, one bit per site (set = +1).

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    n: usize,
    words: Vec<u64>,
}

impl SpinConfig {
    pub fn all_plus(n: usize) -> Self {
        let mut c = Self::all_minus(n);
        for w in 0..c.words.len() {
            c.words[w] = !0u64;
        }
        // clear bits beyond n so Eq/Hash stay canonical
        let extra = c.words.len() * 64 - n;
        if extra > 0 {
            let last = c.words.len() - 1;
            c.words[last] &= !0u64 >> extra;
        }
        c
    }

    pub fn all_minus(n: usize) -> Self {
        SpinConfig {
            n,
            words: vec![0u64; n.div_ceil(64)],
        }
    }

    pub fn from_spins(spins: &[i8]) -> Result<Self> {
        let mut c = Self::all_minus(spins.len());
        for (i, &s) in spins.iter().enumerate() {
            match s {
                1 => c.set(i, 1),
                -1 => {}
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "spin value {s} at site {i}; expected -1 or +1"
                    )))
                }
            }
        }
        Ok(c)
    }

    /// Low bits of `index` give the spins: bit i set means site i is +1.
    pub fn from_index(n: usize, index: usize) -> Self {
        let mut c = Self::all_minus(n);
        for i in 0..n.min(64) {
            if index >> i & 1 == 1 {
                c.words[0] |= 1u64 << i;
            }
        }
        c
    }

    /// Packed-bits index for n <= 20 state enumeration.
    pub fn index(&self) -> usize {
        debug_assert!(self.n <= 64);
        self.words.first().copied().unwrap_or(0) as usize
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn spin(&self, i: usize) -> i8 {
        debug_assert!(i < self.n);
        if self.words[i / 64] >> (i % 64) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, s: i8) {
        debug_assert!(i < self.n);
        let mask = 1u64 << (i % 64);
        if s > 0 {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.n);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut c = self.clone();
        c.flip(i);
        c
    }

    pub fn to_spins(&self) -> Vec<i8> {
        (0..self.n).map(|i| self.spin(i)).collect()
    }

    /// Little-endian packed bytes, bit k of byte k/8 (set = +1); ceil(n/8) bytes.
    pub fn to_packed_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.n.div_ceil(8)];
        for i in 0..self.n {
            if self.spin(i) > 0 {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    pub fn from_packed_bytes(n: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != n.div_ceil(8) {
            return Err(Error::InvalidConfig(format!(
                "packed spin block has {} bytes, expected {}",
                bytes.len(),
                n.div_ceil(8)
            )));
        }
        let mut c = Self::all_minus(n);
        for i in 0..n {
            if bytes[i / 8] >> (i % 8) & 1 == 1 {
                c.set(i, 1);
            }
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let spins = [1i8, -1, -1, 1, 1, -1, 1, -1, -1, 1, 1];
        let c = SpinConfig::from_spins(&spins).unwrap();
        assert_eq!(c.to_spins(), spins);
        assert_eq!(
            SpinConfig::from_packed_bytes(spins.len(), &c.to_packed_bytes()).unwrap(),
            c
        );
    }

    #[test]
    fn flip_is_involution() {
        let mut c = SpinConfig::all_plus(70);
        c.flip(65);
        assert_eq!(c.spin(65), -1);
        c.flip(65);
        assert_eq!(c, SpinConfig::all_plus(70));
    }

    #[test]
    fn index_round_trip() {
        for idx in 0..16 {
            assert_eq!(SpinConfig::from_index(4, idx).index(), idx);
        }
    }

    #[test]
    fn rejects_bad_spin_value() {
        assert!(SpinConfig::from_spins(&[1, 0, -1]).is_err());
    }
}
