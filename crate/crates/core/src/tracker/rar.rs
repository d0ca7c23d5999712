//! Random access response: MAC payload layout and its shared-channel
//! transport chain (CRC-24, turbo code, rate matching, scrambling, QPSK).

use crate::coding::crc::crc24a;
use crate::coding::gold::gold_sequence;
use crate::coding::qpsk::qpsk_map;
use crate::coding::ratematch::RateMatcher;
use crate::coding::turbo::{turbo_decode_with, turbo_encode};
use crate::coding::{bits_to_bytes, bytes_to_bits, uint_to_bits, BitString};
use crate::error::{Error, Result};
use crate::grid::chest::ChannelEstimate;
use crate::grid::pdsch::pdsch_res;
use crate::grid::{CellConfig, ResourceGrid};
use crate::pdcch::decode::is_ra_rnti;
use crate::pdcch::{Dci, Direction};

/// Body of one response: reserved bit, timing advance, grant, identity.
pub const RAR_BODY_BYTES: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RarMessage {
    pub raw: Vec<u8>,
    pub timing_advance: u16,
    pub ul_grant: u32,
    pub temp_crnti: u16,
}

impl RarMessage {
    /// Single-response MAC PDU: one subheader byte then the body.
    pub fn new(preamble_id: u8, timing_advance: u16, ul_grant: u32, temp_crnti: u16) -> Self {
        let header = 0x40 | (preamble_id & 0x3F);
        let body = (u64::from(timing_advance & 0x7FF) << 36) | (u64::from(ul_grant & 0xF_FFFF) << 16) | u64::from(temp_crnti);
        let mut raw = vec![header];
        raw.extend_from_slice(&body.to_be_bytes()[2..]);
        RarMessage {
            raw,
            timing_advance: timing_advance & 0x7FF,
            ul_grant: ul_grant & 0xF_FFFF,
            temp_crnti,
        }
    }

    /// Reads the fields from the final six bytes.
    pub fn parse(raw: &[u8]) -> Result<Self> {
        if raw.len() < RAR_BODY_BYTES {
            return Err(Error::Parse(format!("RAR of {} bytes", raw.len())));
        }
        let body = &raw[raw.len() - RAR_BODY_BYTES..];
        let v = body.iter().fold(0u64, |a, &b| (a << 8) | u64::from(b));
        Ok(RarMessage {
            raw: raw.to_vec(),
            timing_advance: ((v >> 36) & 0x7FF) as u16,
            ul_grant: ((v >> 16) & 0xF_FFFF) as u32,
            temp_crnti: (v & 0xFFFF) as u16,
        })
    }
}

fn pdsch_c_init(rnti: u16, subframe: usize, pci: u16) -> u32 {
    (u32::from(rnti) << 14) + ((subframe as u32) << 9) + u32::from(pci)
}

/// Coded, scrambled bits of a transport block for `g` channel bits.
pub fn encode_transport_block(tb: &[u8], rnti: u16, subframe: usize, pci: u16, g: usize) -> Result<BitString> {
    let mut block: BitString = tb.to_vec();
    block.extend(uint_to_bits(u64::from(crc24a(tb)), 24));
    let cw = turbo_encode(&block)?;
    let mut e = RateMatcher::turbo(block.len() + 4, g).apply(&cw);
    for (b, c) in e.iter_mut().zip(gold_sequence(pdsch_c_init(rnti, subframe, pci), g)) {
        *b ^= c;
    }
    Ok(e)
}

/// Places a response on the blocks granted by `dci`.
pub fn map_rar(grid: &mut ResourceGrid, cfg: &CellConfig, cfi: usize, subframe: usize, dci_rnti: u16, rbs: u128, msg: &RarMessage, amplitude: f64) -> Result<()> {
    let res = pdsch_res(cfg, cfi, subframe, rbs);
    let bits = encode_transport_block(&bytes_to_bits(&msg.raw), dci_rnti, subframe, cfg.pci, 2 * res.len())?;
    for ((l, k), s) in res.into_iter().zip(qpsk_map(&bits)?) {
        grid.set(l, k, s * amplitude);
    }
    Ok(())
}

/// Demodulates and decodes the response announced by a random-access DCI.
pub fn decode_rar(grid: &ResourceGrid, est: &ChannelEstimate, cfg: &CellConfig, cfi: usize, subframe: usize, dci: &Dci) -> Result<RarMessage> {
    if dci.direction != Direction::Downlink || !is_ra_rnti(dci.rnti) {
        return Err(Error::Config(format!("DCI to {:#06x} is not a random-access grant", dci.rnti)));
    }
    let tbs = dci.tbs.ok_or_else(|| Error::Parse("RAR grant without transport block size".into()))? as usize;
    let res = pdsch_res(cfg, cfi, subframe, dci.rbs);
    if res.is_empty() {
        return Err(Error::Parse("RAR grant without resource blocks".into()));
    }
    let mut llr = Vec::with_capacity(2 * res.len());
    for &(l, k) in &res {
        est.push_llr(grid, l, k, &mut llr);
    }
    for (x, c) in llr.iter_mut().zip(gold_sequence(pdsch_c_init(dci.rnti, subframe, cfg.pci), 2 * res.len())) {
        if c == 1 {
            *x = -*x;
        }
    }
    let k = tbs + 24;
    let soft = RateMatcher::turbo(k + 4, llr.len()).invert(&llr);
    let out = turbo_decode_with(&soft, k, |b| crc24a(b) == 0)?;
    if !out.check_passed {
        return Err(Error::Crc("RAR transport block".into()));
    }
    RarMessage::parse(&bits_to_bytes(&out.bits[..tbs]))
}
