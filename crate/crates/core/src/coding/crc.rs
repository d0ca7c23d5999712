//! CRC attachment and RNTI scrambling of the CRC field.

use crate::tables::tables;

fn crc_bits(payload: &[u8], poly: u32, width: u32) -> u32 {
    let top = 1u32 << (width - 1);
    let mask = if width == 32 { u32::MAX } else { (1u32 << width) - 1 };
    let mut reg = 0u32;
    for &b in payload {
        let fb = ((reg & top) != 0) ^ (b & 1 == 1);
        reg = (reg << 1) & mask;
        if fb {
            reg ^= poly;
        }
    }
    reg & mask
}

/// CRC-16 over a bit string, zero initial state.
pub fn crc16(payload: &[u8]) -> u16 {
    crc_bits(payload, tables().crc16_poly, 16) as u16
}

pub fn crc24a(payload: &[u8]) -> u32 {
    crc_bits(payload, tables().crc24a_poly, 24)
}

/// XOR of a CRC with an RNTI (or antenna-port mask).
#[inline]
pub fn crc_scramble(crc: u16, rnti: u16) -> u16 {
    crc ^ rnti
}

/// Payload followed by its 16-bit CRC scrambled with `rnti`.
pub fn attach_crc16(payload: &[u8], rnti: u16) -> Vec<u8> {
    let crc = crc_scramble(crc16(payload), rnti);
    let mut out = payload.to_vec();
    out.extend(super::uint_to_bits(u64::from(crc), 16));
    out
}

/// Splits `payload || crc` and returns the identity the CRC was scrambled with.
pub fn recover_rnti(block: &[u8]) -> Option<(&[u8], u16)> {
    if block.len() < 16 {
        return None;
    }
    let (payload, field) = block.split_at(block.len() - 16);
    let rx = super::bits_to_uint(field) as u16;
    Some((payload, crc_scramble(crc16(payload), rx)))
}
