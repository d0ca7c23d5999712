//! Master information block and its broadcast channel.

use num_complex::Complex64;

use crate::coding::conv::{conv_encode, ViterbiScratch};
use crate::coding::crc::{crc16, crc_scramble};
use crate::coding::gold::gold_sequence;
use crate::coding::qpsk::qpsk_map;
use crate::coding::ratematch::RateMatcher;
use crate::coding::{bits_to_uint, uint_to_bits, BitString};
use crate::error::{Error, Result};
use crate::grid::chest::ChannelEstimate;
use crate::grid::{CellConfig, CrsTable, ResourceGrid, VALID_N_RB};

pub const MIB_BITS: usize = 24;
/// Coded PBCH bits over four frames (normal CP).
pub const PBCH_BITS: usize = 1920;
pub const PBCH_BITS_PER_FRAME: usize = PBCH_BITS / 4;
pub const PBCH_SYMBOLS: std::ops::Range<usize> = 7..11;

/// CRC masks selecting one or two transmit antennas.
const PORT_MASKS: [(usize, u16); 2] = [(1, 0x0000), (2, 0xFFFF)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mib {
    /// SFN / 4 (8 bits).
    pub sfn_msb: u8,
    pub bandwidth_code: u8,
    /// PHICH duration (1 bit) and resource (2 bits).
    pub phich_cfg: u8,
    pub spare: u16,
}

impl Mib {
    pub fn new(n_rb_dl: usize, sfn: u16, phich_cfg: u8) -> Result<Self> {
        let bandwidth_code = VALID_N_RB
            .iter()
            .position(|&n| n == n_rb_dl)
            .ok_or_else(|| Error::Config(format!("no bandwidth code for {n_rb_dl} RBs")))? as u8;
        Ok(Mib {
            sfn_msb: (sfn / 4) as u8,
            bandwidth_code,
            phich_cfg: phich_cfg & 7,
            spare: 0,
        })
    }

    pub fn n_rb_dl(&self) -> Result<usize> {
        VALID_N_RB
            .get(usize::from(self.bandwidth_code))
            .copied()
            .ok_or_else(|| Error::Parse(format!("reserved bandwidth code {}", self.bandwidth_code)))
    }

    /// Ng in sixths: 1/6, 1/2, 1, 2 -> 1, 3, 6, 12.
    pub fn phich_ng_sixths(&self) -> usize {
        [1, 3, 6, 12][usize::from(self.phich_cfg & 3)]
    }

    pub fn phich_extended(&self) -> bool {
        self.phich_cfg & 4 != 0
    }

    pub fn to_bits(&self) -> BitString {
        let mut b = uint_to_bits(u64::from(self.bandwidth_code), 3);
        b.extend(uint_to_bits(u64::from(self.phich_cfg), 3));
        b.extend(uint_to_bits(u64::from(self.sfn_msb), 8));
        b.extend(uint_to_bits(u64::from(self.spare), 10));
        b
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Mib {
            bandwidth_code: bits_to_uint(&bits[0..3]) as u8,
            phich_cfg: bits_to_uint(&bits[3..6]) as u8,
            sfn_msb: bits_to_uint(&bits[6..14]) as u8,
            spare: bits_to_uint(&bits[14..24]) as u16,
        }
    }
}

/// PBCH resource elements of subframe 0, in mapping order, for a grid of
/// `cfg.n_sc()` subcarriers.
pub fn pbch_res(cfg: &CellConfig) -> Vec<(usize, usize)> {
    let first = cfg.n_sc() / 2 - 36;
    let v = usize::from(cfg.pci % 6) % 3;
    let mut out = Vec::with_capacity(PBCH_BITS_PER_FRAME / 2);
    for l in PBCH_SYMBOLS {
        for k in 0..72 {
            // symbols 7 and 8 leave room for four-port reference signals
            if l < 9 && k % 3 == v {
                continue;
            }
            out.push((l, first + k));
        }
    }
    out
}

/// Full coded and scrambled PBCH bit stream for one 40 ms period.
pub fn pbch_encode(mib: &Mib, pci: u16, n_ports: usize) -> Result<BitString> {
    let mask = PORT_MASKS
        .iter()
        .find(|(p, _)| *p == n_ports)
        .ok_or_else(|| Error::Config(format!("{n_ports} ports")))?
        .1;
    let mut block = mib.to_bits();
    let crc = crc_scramble(crc16(&block), mask);
    block.extend(uint_to_bits(u64::from(crc), 16));
    let cw = conv_encode(&block)?;
    let mut e = RateMatcher::conv(40, PBCH_BITS).apply(&cw);
    for (b, c) in e.iter_mut().zip(gold_sequence(u32::from(pci), PBCH_BITS)) {
        *b ^= c;
    }
    Ok(e)
}

/// Writes the PBCH share of frame `sfn` into a subframe-0 grid.
pub fn map_pbch(grid: &mut ResourceGrid, cfg: &CellConfig, mib: &Mib, sfn: u16, amplitude: f64) -> Result<()> {
    let bits = pbch_encode(mib, cfg.pci, cfg.n_ports)?;
    let q = usize::from(sfn % 4);
    let syms = qpsk_map(&bits[q * PBCH_BITS_PER_FRAME..(q + 1) * PBCH_BITS_PER_FRAME])?;
    for ((l, k), s) in pbch_res(cfg).into_iter().zip(syms) {
        grid.set(l, k, s * amplitude);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MibDecode {
    pub mib: Mib,
    /// Position of this frame in the 40 ms PBCH period.
    pub sfn_mod4: u16,
    pub n_ports: usize,
}

impl MibDecode {
    pub fn sfn(&self) -> u16 {
        u16::from(self.mib.sfn_msb) * 4 + self.sfn_mod4
    }
}

/// Blind PBCH decode from one equalised subframe 0, trying the four
/// scrambling phases and both antenna masks.
pub fn mib_decode(grid: &ResourceGrid, cfg: &CellConfig, est: &ChannelEstimate) -> Result<MibDecode> {
    let mut llr = Vec::with_capacity(PBCH_BITS_PER_FRAME);
    for (l, k) in pbch_res(cfg) {
        est.push_llr(grid, l, k, &mut llr);
    }
    let seq = gold_sequence(u32::from(cfg.pci), PBCH_BITS);
    let rm = RateMatcher::conv(40, PBCH_BITS);
    let mut vit = ViterbiScratch::default();
    let mut full = vec![0f32; PBCH_BITS];
    for phase in 0..4 {
        full.iter_mut().for_each(|x| *x = 0.0);
        let seg = phase * PBCH_BITS_PER_FRAME;
        for (i, &l) in llr.iter().enumerate() {
            full[seg + i] = if seq[seg + i] == 1 { -l } else { l };
        }
        let soft = rm.invert(&full);
        let block = vit.decode(&soft, 40);
        let received = bits_to_uint(&block[24..]) as u16;
        let residue = crc_scramble(crc16(&block[..24]), received);
        if let Some(&(n_ports, _)) = PORT_MASKS.iter().find(|(_, m)| *m == residue) {
            return Ok(MibDecode {
                mib: Mib::from_bits(&block[..24]),
                sfn_mod4: phase as u16,
                n_ports,
            });
        }
    }
    Err(Error::MibFailure)
}

/// Central-band view used before the bandwidth is known.
pub fn mib_view(pci: u16, fft_size: usize) -> CellConfig {
    CellConfig::new(6, pci, 1, fft_size).expect("valid central view")
}

/// Demodulates subframe 0 at `start` in the central view and decodes the MIB.
pub fn mib_decode_at(samples: &[Complex64], start: usize, pci: u16, fft_size: usize) -> Result<MibDecode> {
    let view = mib_view(pci, fft_size);
    let mut grid = ResourceGrid::new(&view);
    crate::grid::Ofdm::new(&view).demodulate_into(samples, start, &mut grid)?;
    let table = CrsTable::new(&view);
    let est = ChannelEstimate::estimate(&grid, &view, &table, 0);
    mib_decode(&grid, &view, &est)
}
