//! Bit-level channel coding shared by PBCH, PCFICH, PDCCH and the RAR
//! transport chain.
//!
//! LLR convention, used by every demapper and decoder in the crate:
//! a positive value means bit 0 is more likely.

pub mod conv;
pub mod crc;
pub mod gold;
pub mod qpsk;
pub mod ratematch;
pub mod turbo;

/// Ordered 0/1 values, one per element.
pub type BitString = Vec<u8>;

/// Log-likelihood ratios, positive means 0.
pub type SoftBits = Vec<f32>;

/// Hard decision of an LLR under the crate-wide sign convention.
#[inline]
pub fn hard(llr: f32) -> u8 {
    u8::from(llr < 0.0)
}

/// Perfect-channel LLRs for a bit string, magnitude `amp`.
pub fn bits_to_llr(bits: &[u8], amp: f32) -> SoftBits {
    bits.iter().map(|&b| if b == 0 { amp } else { -amp }).collect()
}

/// Most-significant-bit-first integer from a bit slice.
pub fn bits_to_uint(bits: &[u8]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b & 1))
}

/// `width` bits of `value`, most significant first.
pub fn uint_to_bits(value: u64, width: usize) -> BitString {
    (0..width).rev().map(|i| ((value >> i) & 1) as u8).collect()
}

pub fn bytes_to_bits(bytes: &[u8]) -> BitString {
    bytes.iter().flat_map(|&b| uint_to_bits(u64::from(b), 8)).collect()
}

pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8).map(|c| bits_to_uint(c) as u8).collect()
}

/// Number of positions where two bit strings differ.
pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uint_bits_round_trip() {
        assert_eq!(uint_to_bits(0b1011, 4), vec![1, 0, 1, 1]);
        assert_eq!(bits_to_uint(&[1, 0, 1, 1]), 11);
        assert_eq!(bits_to_bytes(&bytes_to_bits(&[0x2b, 0x07])), vec![0x2b, 0x07]);
    }
}
