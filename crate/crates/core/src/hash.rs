// SPDX-License-Identifier: Apache-2.0

//! Deterministic mixing primitives shared by the whole crate.
//!
//! Two functions are load-bearing for reproducibility and must never change:
//! `splitmix64` drives synthetic page content, `Fnv64` drives every digest
//! (read checksums, state digests, snapshot content ids). Both are frozen by
//! golden-value tests below.

/// Golden-gamma increment used by the splitmix64 finalizer.
pub const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SPLITMIX_MUL1: u64 = 0xBF58_476D_1CE4_E5B9;
const SPLITMIX_MUL2: u64 = 0x94D0_49BB_1331_11EB;

/// FNV-1a 64-bit offset basis.
pub const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
/// FNV-1a 64-bit prime.
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Standard splitmix64 finalizer: add the golden gamma, two
/// xor-shift-multiply rounds, final xor-shift. All arithmetic wraps.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(SPLITMIX_MUL1);
    z = (z ^ (z >> 27)).wrapping_mul(SPLITMIX_MUL2);
    z ^ (z >> 31)
}

/// Incremental FNV-1a 64 hasher.
///
/// Byte order is significant; callers fold fields in their declared order so
/// independent implementations agree on digests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fnv64(u64);

impl Fnv64 {
    #[inline]
    pub fn new() -> Self {
        Fnv64(FNV_OFFSET)
    }

    /// Resume folding from a previously observed state.
    #[inline]
    pub fn resume(state: u64) -> Self {
        Fnv64(state)
    }

    #[inline]
    pub fn write(&mut self, bytes: &[u8]) {
        let mut h = self.0;
        for &b in bytes {
            h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
        }
        self.0 = h;
    }

    /// Fold a u64 as its 8 little-endian bytes.
    #[inline]
    pub fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    /// Fold a length-prefixed byte string (length as LE u64), so adjacent
    /// variable-length fields cannot alias each other.
    pub fn write_str(&mut self, s: &str) {
        self.write_u64(s.len() as u64);
        self.write(s.as_bytes());
    }

    #[inline]
    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv64 {
    fn default() -> Self {
        Self::new()
    }
}

/// One-shot FNV-1a 64 over a byte slice.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = Fnv64::new();
    h.write(bytes);
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent reference implementation used to freeze the golden values.
    fn splitmix64_reference(x: u64) -> u64 {
        const M: u128 = (1 << 64) - 1;
        let mut z = (x as u128 + 0x9E37_79B9_7F4A_7C15) & M;
        z = ((z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9) & M;
        z = ((z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB) & M;
        (z ^ (z >> 31)) as u64
    }

    #[test]
    fn splitmix_matches_reference() {
        for x in [0u64, 1, 2, 0xFFFF_FFFF_FFFF_FFFF, 0xDEAD_BEEF, 1 << 63] {
            assert_eq!(splitmix64(x), splitmix64_reference(x));
        }
    }

    #[test]
    fn splitmix_golden_values() {
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(splitmix64(0) & 0xFF, 0xaf);
    }

    #[test]
    fn fnv_golden_value() {
        assert_eq!(fnv1a64(b"hello"), 0xa430_d846_80aa_bd0b);
        assert_eq!(fnv1a64(b""), FNV_OFFSET);
    }

    #[test]
    fn fnv_incremental_equals_oneshot() {
        let mut h = Fnv64::new();
        h.write(b"he");
        h.write(b"llo");
        assert_eq!(h.finish(), fnv1a64(b"hello"));
    }
}
