//! Blind decoding of the control region.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::coding::conv::{conv_encode, ViterbiScratch};
use crate::coding::crc::{attach_crc16, recover_rnti};
use crate::coding::gold::gold_sequence;
use crate::coding::qpsk::qpsk_map;
use crate::coding::ratematch::RateMatcher;
use crate::coding::{hard, BitString};
use crate::errlog::{ErrLog, EventKind};
use crate::error::{Error, Result};
use crate::grid::chest::ChannelEstimate;
use crate::grid::{CellConfig, CrsTable, ResourceGrid};

use super::dci::{parse_dci, DecodePath, Dci, DciFormat, DciSizes};
use super::layout::{CandidateLocation, Cfi, ControlLayout, Layouts, AGGREGATIONS, BITS_PER_CCE};
use super::pcfich::{cfi_decode, CfiDecision};

/// Energy gate threshold relative to the mean CRS power.
pub const ENERGY_RHO: f64 = 0.5;
/// Re-encode acceptance for unknown identities (strictly below).
pub const REENCODE_MAX_MISMATCH: f64 = 0.02;
/// Highest control code rate worth decoding; above it any Viterbi output
/// re-encodes cleanly and the CRC is the only check left.
pub const MAX_CODE_RATE: f64 = 0.75;
/// Sanity bound applied to list, random-access and reserved matches.
pub const CONFIDENCE_MAX_MISMATCH: f64 = 0.10;

pub const C_RNTI_MIN: u16 = 0x003D;
pub const C_RNTI_MAX: u16 = 0xFFF3;
pub const P_RNTI: u16 = 0xFFFE;
pub const SI_RNTI: u16 = 0xFFFF;

pub fn is_ra_rnti(rnti: u16) -> bool {
    (1..=10).contains(&rnti)
}

pub fn is_c_rnti(rnti: u16) -> bool {
    (C_RNTI_MIN..=C_RNTI_MAX).contains(&rnti)
}

pub fn is_reserved(rnti: u16) -> bool {
    rnti == P_RNTI || rnti == SI_RNTI
}

/// Acceptance policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Active list, random-access and reserved identities, re-encode fallback.
    #[default]
    Owl,
    /// Re-encode check only, no identity list.
    Lteye,
}

impl std::str::FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "owl" => Ok(DecodeMode::Owl),
            "lteye" | "lteye-only" => Ok(DecodeMode::Lteye),
            _ => Err(Error::Parse(format!("unknown mode `{s}`"))),
        }
    }
}

/// Identity membership test supplied by the tracker.
pub trait RntiOracle {
    fn is_listed(&self, rnti: u16) -> bool;
}

impl RntiOracle for std::collections::BTreeSet<u16> {
    fn is_listed(&self, rnti: u16) -> bool {
        self.contains(&rnti)
    }
}

impl RntiOracle for std::collections::HashSet<u16> {
    fn is_listed(&self, rnti: u16) -> bool {
        self.contains(&rnti)
    }
}

impl RntiOracle for [u16] {
    fn is_listed(&self, rnti: u16) -> bool {
        self.contains(&rnti)
    }
}

/// How a CRC identity would be accepted: path, precedence (lower wins) and
/// the re-encode mismatch bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admission {
    pub path: DecodePath,
    pub rank: u8,
    pub max_mismatch: f64,
    /// Bound is strict (`<`) rather than inclusive.
    pub strict: bool,
}

pub fn admission(rnti: u16, oracle: &(impl RntiOracle + ?Sized), mode: DecodeMode) -> Option<Admission> {
    let adm = |path, rank, max_mismatch, strict| Some(Admission { path, rank, max_mismatch, strict });
    match mode {
        DecodeMode::Owl => {
            if is_c_rnti(rnti) && oracle.is_listed(rnti) {
                adm(DecodePath::ListMatch, 0, CONFIDENCE_MAX_MISMATCH, false)
            } else if is_ra_rnti(rnti) {
                adm(DecodePath::RaRnti, 1, CONFIDENCE_MAX_MISMATCH, false)
            } else if is_reserved(rnti) {
                adm(DecodePath::ListMatch, 2, CONFIDENCE_MAX_MISMATCH, false)
            } else if is_c_rnti(rnti) {
                adm(DecodePath::Reencode, 3, REENCODE_MAX_MISMATCH, true)
            } else {
                None
            }
        }
        DecodeMode::Lteye => {
            if is_c_rnti(rnti) || is_ra_rnti(rnti) || is_reserved(rnti) {
                adm(DecodePath::Reencode, 0, REENCODE_MAX_MISMATCH, true)
            } else {
                None
            }
        }
    }
}

/// Fraction of received hard bits that disagree with the re-encoded block.
pub fn reencode_mismatch(llr: &[f32], block: &[u8], rm: &RateMatcher) -> f64 {
    let Ok(cw) = conv_encode(block) else { return 1.0 };
    let tx = rm.apply(&cw);
    let diff = tx.iter().zip(llr).filter(|(&b, &l)| b != hard(l)).count();
    diff as f64 / llr.len().max(1) as f64
}

/// Codeword of one control message at aggregation `l`.
pub fn encode_dci(payload: &[u8], rnti: u16, aggregation: usize) -> Result<BitString> {
    let block = attach_crc16(payload, rnti);
    let cw = conv_encode(&block)?;
    Ok(RateMatcher::conv(block.len(), aggregation * BITS_PER_CCE).apply(&cw))
}

/// Scrambling sequence for a subframe, long enough for any CFI.
pub fn pdcch_scrambling(pci: u16, subframe: usize, len: usize) -> Vec<u8> {
    gold_sequence(subframe as u32 * (1 << 9) + u32::from(pci), len)
}

/// Writes encoded messages into the control region. `messages` pairs a
/// location with its codeword; unused CCEs stay empty.
pub fn map_pdcch(
    grid: &mut ResourceGrid,
    layout: &ControlLayout,
    pci: u16,
    subframe: usize,
    messages: &[(CandidateLocation, BitString)],
    amplitude: f64,
) -> Result<()> {
    let seq = pdcch_scrambling(pci, subframe, layout.total_bits());
    for (loc, bits) in messages {
        let base = usize::from(loc.cce_start) * BITS_PER_CCE;
        if bits.len() != usize::from(loc.aggregation) * BITS_PER_CCE || loc.cces().end > layout.n_cce {
            return Err(Error::OutOfRange(format!("location {loc:?} in {} CCEs", layout.n_cce)));
        }
        let scrambled: Vec<u8> = bits.iter().enumerate().map(|(i, &b)| b ^ seq[base + i]).collect();
        for ((l, k), s) in loc.re_set(layout).into_iter().zip(qpsk_map(&scrambled)?) {
            grid.set(l, k, s * amplitude);
        }
    }
    Ok(())
}

/// Descrambled soft bits and per-CCE power of one subframe's control region.
#[derive(Debug, Clone)]
pub struct ControlRegion {
    pub cfi: Cfi,
    pub n_cce: usize,
    llr: Vec<f32>,
    cce_power: Vec<f64>,
    pub crs_power: f64,
    pub noise_var: f64,
}

impl ControlRegion {
    pub fn extract(grid: &ResourceGrid, est: &ChannelEstimate, layout: &ControlLayout, scrambling: &[u8]) -> Self {
        let n = layout.n_cce * BITS_PER_CCE;
        let mut llr = Vec::with_capacity(n);
        let mut cce_power = Vec::with_capacity(layout.n_cce);
        for c in 0..layout.n_cce {
            let res = layout.cce_res(c);
            let mut p = 0.0;
            for &(l, k) in res {
                est.push_llr(grid, l, k, &mut llr);
                p += grid.get(l, k).norm_sqr();
            }
            cce_power.push(p / res.len() as f64);
        }
        for (x, &c) in llr.iter_mut().zip(scrambling) {
            if c == 1 {
                *x = -*x;
            }
        }
        ControlRegion {
            cfi: layout.cfi,
            n_cce: layout.n_cce,
            llr,
            cce_power,
            crs_power: est.crs_power,
            noise_var: est.noise_var,
        }
    }

    pub fn llr(&self, loc: &CandidateLocation) -> &[f32] {
        let r = loc.cces();
        &self.llr[r.start * BITS_PER_CCE..r.end * BITS_PER_CCE]
    }

    pub fn cce_power(&self, cce: usize) -> f64 {
        self.cce_power[cce]
    }

    pub fn location_power(&self, loc: &CandidateLocation) -> f64 {
        loc.cces().map(|c| self.cce_power[c]).sum::<f64>() / f64::from(loc.aggregation)
    }
}

/// Occupancy test: every CCE of the location must exceed `rho` times the
/// reference power.
pub fn energy_gate(region: &ControlRegion, loc: &CandidateLocation, reference: f64, rho: f64) -> bool {
    loc.cces().all(|c| region.cce_power(c) > rho * reference)
}

/// A CRC-validated candidate before field parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct BlindHit {
    pub payload: BitString,
    pub rnti: u16,
    pub size: usize,
    pub path: DecodePath,
    pub mismatch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlindOutcome {
    pub dci: Dci,
    /// Other identities that also passed at this location.
    pub collisions: Vec<u16>,
}

/// Per-cell decoding context: layouts, payload sizes, rate matchers and
/// scrambling sequences are built once.
pub struct ControlDecoder {
    pub cfg: CellConfig,
    pub sizes: DciSizes,
    pub layouts: Layouts,
    crs: CrsTable,
    matchers: HashMap<(usize, usize), RateMatcher>,
    scrambling: Vec<Vec<u8>>,
    viterbi: ViterbiScratch,
    soft: Vec<f32>,
    /// Viterbi runs so far, for work accounting.
    pub attempts: u64,
}

impl ControlDecoder {
    pub fn new(cfg: &CellConfig, ng_sixths: usize) -> Self {
        let sizes = DciSizes::new(cfg.n_rb_dl);
        let layouts = Layouts::new(cfg, ng_sixths);
        let mut matchers = HashMap::new();
        for size in sizes.size_set() {
            for l in AGGREGATIONS {
                matchers.insert((size, l), RateMatcher::conv(size + 16, l * BITS_PER_CCE));
            }
        }
        let max_bits = layouts.get(Cfi::ALL[2]).total_bits();
        let scrambling = (0..10).map(|sf| pdcch_scrambling(cfg.pci, sf, max_bits)).collect();
        ControlDecoder {
            cfg: *cfg,
            sizes,
            layouts,
            crs: CrsTable::new(cfg),
            matchers,
            scrambling,
            viterbi: ViterbiScratch::default(),
            soft: Vec::new(),
            attempts: 0,
        }
    }

    pub fn estimate(&self, grid: &ResourceGrid, subframe: usize) -> ChannelEstimate {
        ChannelEstimate::estimate(grid, &self.cfg, &self.crs, subframe)
    }

    pub fn region(&self, grid: &ResourceGrid, est: &ChannelEstimate, cfi: Cfi, subframe: usize) -> ControlRegion {
        ControlRegion::extract(grid, est, self.layouts.get(cfi), &self.scrambling[subframe])
    }

    /// Tries every payload size at one location and returns the accepted
    /// hits in precedence order.
    pub fn blind_decode(
        &mut self,
        region: &ControlRegion,
        loc: &CandidateLocation,
        oracle: &(impl RntiOracle + ?Sized),
        mode: DecodeMode,
    ) -> Vec<BlindHit> {
        let llr = region.llr(loc);
        let l = usize::from(loc.aggregation);
        let mut hits: Vec<(u8, BlindHit)> = Vec::new();
        for size in self.sizes.size_set() {
            if (size + 16) as f64 > MAX_CODE_RATE * (l * BITS_PER_CCE) as f64 {
                continue;
            }
            let rm = &self.matchers[&(size, l)];
            let k = size + 16;
            self.soft.resize(3 * k, 0.0);
            rm.invert_into(llr, &mut self.soft);
            let block = self.viterbi.decode(&self.soft, k);
            self.attempts += 1;
            let Some((payload, rnti)) = recover_rnti(&block) else { continue };
            let Some(adm) = admission(rnti, oracle, mode) else { continue };
            let formats = self.sizes.formats_for_size(size);
            if formats == [DciFormat::F1C] && !(is_ra_rnti(rnti) || is_reserved(rnti)) {
                continue;
            }
            let mismatch = reencode_mismatch(llr, &block, rm);
            let ok = if adm.strict { mismatch < adm.max_mismatch } else { mismatch <= adm.max_mismatch };
            if ok {
                hits.push((
                    adm.rank,
                    BlindHit {
                        payload: payload.to_vec(),
                        rnti,
                        size,
                        path: adm.path,
                        mismatch,
                    },
                ));
            }
        }
        // within a rank the cleaner re-encode wins; a wrong-size decode that
        // happens to pass the CRC re-encodes badly
        hits.sort_by(|(ra, a), (rb, b)| ra.cmp(rb).then(a.mismatch.total_cmp(&b.mismatch)).then(a.size.cmp(&b.size)));
        hits.into_iter().map(|(_, h)| h).collect()
    }

    /// Blind decode plus field parsing; the first parseable hit wins.
    pub fn decode_location(
        &mut self,
        region: &ControlRegion,
        loc: &CandidateLocation,
        oracle: &(impl RntiOracle + ?Sized),
        mode: DecodeMode,
    ) -> Option<BlindOutcome> {
        let hits = self.blind_decode(region, loc, oracle, mode);
        let mut chosen: Option<Dci> = None;
        let mut collisions = Vec::new();
        for h in hits {
            if chosen.is_some() {
                collisions.push(h.rnti);
                continue;
            }
            let format = self.sizes.formats_for_size(h.size)[0];
            if let Ok(f) = parse_dci(&h.payload, format, &self.sizes, h.rnti) {
                chosen = Some(Dci {
                    format: f.format,
                    direction: f.format.direction(),
                    rnti: h.rnti,
                    mcs: f.mcs,
                    n_rb: f.n_rb,
                    tbs: f.tbs,
                    rbs: f.rbs,
                    location: *loc,
                    payload: h.payload,
                    decode_path: h.path,
                    distributed: f.distributed,
                    ra_type1: f.ra_type1,
                });
            }
        }
        chosen.map(|dci| BlindOutcome { dci, collisions })
    }

    /// Decodes all messages of an already demodulated subframe.
    pub fn decode_subframe(
        &mut self,
        grid: &ResourceGrid,
        sfn: u16,
        subframe: usize,
        oracle: &(impl RntiOracle + ?Sized),
        mode: DecodeMode,
        log: &mut ErrLog,
    ) -> SubframeReport {
        let abs_sf = crate::grid::abs_sf(u32::from(sfn), subframe as u32);
        let est = self.estimate(grid, subframe);
        let cfi = cfi_decode(grid, &self.cfg, &est, subframe);
        if cfi.uncertain {
            log.push(abs_sf, EventKind::CfiUncertain, format!("metric {:.2}, assuming 3", cfi.metric));
        }
        let region = self.region(grid, &est, cfi.cfi, subframe);
        let locations = self.layouts.get(cfi.cfi).locations();
        let mut dcis: Vec<Dci> = Vec::new();
        let mut gated = Vec::new();
        for loc in locations {
            if dcis.iter().any(|d| d.location.overlaps(&loc)) {
                continue;
            }
            if !energy_gate(&region, &loc, region.crs_power, ENERGY_RHO) {
                continue;
            }
            gated.push(loc);
            if let Some(out) = self.decode_location(&region, &loc, oracle, mode) {
                if !out.collisions.is_empty() {
                    log.push(
                        abs_sf,
                        EventKind::DciCollision,
                        format!("cce {} L{}: kept {:04x}, also {:04x?}", loc.cce_start, loc.aggregation, out.dci.rnti, out.collisions),
                    );
                }
                dcis.push(out.dci);
            }
        }
        let uncertain = gated
            .into_iter()
            .filter(|g| !dcis.iter().any(|d| d.location.overlaps(g)))
            .collect();
        SubframeReport {
            sfn,
            subframe,
            cfi: cfi.cfi,
            cfi_decision: cfi,
            dcis,
            uncertain,
            noise_floor: region.noise_var,
            crs_power: region.crs_power,
        }
    }
}

/// Outcome of decoding one subframe.
#[derive(Debug, Clone, PartialEq)]
pub struct SubframeReport {
    pub sfn: u16,
    pub subframe: usize,
    pub cfi: Cfi,
    pub cfi_decision: CfiDecision,
    pub dcis: Vec<Dci>,
    /// Energy present but nothing decoded.
    pub uncertain: Vec<CandidateLocation>,
    pub noise_floor: f64,
    pub crs_power: f64,
}

impl SubframeReport {
    pub fn abs_sf(&self) -> u32 {
        crate::grid::abs_sf(u32::from(self.sfn), self.subframe as u32)
    }
}

/// Convenience for tests and tools: complex constellation of the control
/// region after equalisation, CCE order.
pub fn equalized_control(grid: &ResourceGrid, est: &ChannelEstimate, layout: &ControlLayout) -> Vec<Complex64> {
    layout.symbol_res().iter().map(|&(l, k)| est.equalize(grid, l, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::qpsk::complex_noise;
    use crate::grid::crs::{crs_offset, CRS_SYMBOLS};
    use crate::pdcch::dci::{Allocation, DciSpec, FieldValues};
    use crate::pdcch::pcfich::map_pcfich;
    use rand::{rngs::StdRng, Rng, SeedableRng};
    use std::collections::BTreeSet;

    struct Tx {
        spec: DciSpec,
        rnti: u16,
        loc: CandidateLocation,
    }

    fn build(cfg: &CellConfig, cfi: Cfi, sf: usize, txs: &[Tx], noise: f64, seed: u64) -> ResourceGrid {
        let mut g = ResourceGrid::new(cfg);
        let t = CrsTable::new(cfg);
        for l in CRS_SYMBOLS {
            let off = crs_offset(cfg, 0, l).unwrap();
            for (m, v) in t.symbol_values(sf, l).iter().enumerate() {
                g.set(l, 6 * m + off, *v);
            }
        }
        map_pcfich(&mut g, cfg, cfi, sf, 1.0).unwrap();
        let sizes = DciSizes::new(cfg.n_rb_dl);
        let layout = ControlLayout::new(cfg, cfi, 6);
        let msgs: Vec<_> = txs
            .iter()
            .map(|t| {
                let bits = sizes.pack(t.spec.format, &t.spec.values(&sizes).unwrap()).unwrap();
                (t.loc, encode_dci(&bits, t.rnti, usize::from(t.loc.aggregation)).unwrap())
            })
            .collect();
        map_pdcch(&mut g, &layout, cfg.pci, sf, &msgs, 1.0).unwrap();
        if noise > 0.0 {
            let mut rng = StdRng::seed_from_u64(seed);
            for l in 0..14 {
                for k in 0..cfg.n_sc() {
                    g.add(l, k, complex_noise(&mut rng, noise));
                }
            }
        }
        g
    }

    fn one_a(mcs: u8, start: usize, len: usize) -> DciSpec {
        DciSpec {
            format: DciFormat::F1A,
            mcs,
            allocation: Allocation::Contiguous { start, len },
            extra: FieldValues::new(),
        }
    }

    fn cfg() -> CellConfig {
        CellConfig::new(25, 42, 1, 512).unwrap()
    }

    #[test]
    fn listed_c_rnti_is_list_match() {
        let cfg = cfg();
        let cfi = Cfi::new(2).unwrap();
        let tx = Tx { spec: one_a(9, 3, 4), rnti: 0x1234, loc: CandidateLocation::new(2, 2) };
        let g = build(&cfg, cfi, 3, &[tx], 0.0, 0);
        let mut dec = ControlDecoder::new(&cfg, 6);
        let list: BTreeSet<u16> = [0x1234].into();
        let mut log = ErrLog::new();
        let r = dec.decode_subframe(&g, 100, 3, &list, DecodeMode::Owl, &mut log);
        assert_eq!(r.cfi, cfi);
        assert_eq!(r.dcis.len(), 1);
        let d = &r.dcis[0];
        assert_eq!((d.rnti, d.format, d.decode_path), (0x1234, DciFormat::F1A, DecodePath::ListMatch));
        assert_eq!((d.mcs, d.n_rb, d.tbs), (9, 4, tbs_of(9, 4)));
        assert_eq!(d.location, CandidateLocation::new(2, 2));
        assert!(r.uncertain.is_empty());
        assert!(log.is_empty());
    }

    fn tbs_of(mcs: u8, n: usize) -> Option<u32> {
        crate::pdcch::dci::tbs_lookup(mcs, n).unwrap()
    }

    #[test]
    fn unknown_identity_takes_reencode_path_and_ra_is_admitted() {
        let cfg = cfg();
        let cfi = Cfi::new(2).unwrap();
        let txs = [
            Tx { spec: one_a(5, 0, 2), rnti: 0x1234, loc: CandidateLocation::new(0, 1) },
            Tx { spec: one_a(0, 10, 3), rnti: 7, loc: CandidateLocation::new(2, 2) },
        ];
        let g = build(&cfg, cfi, 1, &txs, 0.0, 0);
        let mut dec = ControlDecoder::new(&cfg, 6);
        let empty: BTreeSet<u16> = BTreeSet::new();
        let r = dec.decode_subframe(&g, 0, 1, &empty, DecodeMode::Owl, &mut ErrLog::new());
        let paths: Vec<_> = r.dcis.iter().map(|d| (d.rnti, d.decode_path)).collect();
        assert_eq!(paths, vec![(7, DecodePath::RaRnti), (0x1234, DecodePath::Reencode)]);
    }

    #[test]
    fn every_aggregation_and_format_decodes() {
        let cfg = cfg();
        let cfi = Cfi::new(3).unwrap();
        let n_cce = ControlLayout::new(&cfg, cfi, 6).n_cce;
        assert!(n_cce >= 16);
        let mut spec2 = one_a(0, 0, 1);
        spec2.format = DciFormat::F2;
        spec2.allocation = Allocation::Groups(0b1011);
        spec2.mcs = 12;
        let mut spec1c = one_a(3, 4, 6);
        spec1c.format = DciFormat::F1C;
        let mut spec0 = one_a(7, 1, 10);
        spec0.format = DciFormat::F0;
        let txs = [
            Tx { spec: spec2, rnti: 0x5000, loc: CandidateLocation::new(0, 8) },
            Tx { spec: spec1c, rnti: 0xFFFF, loc: CandidateLocation::new(8, 4) },
            Tx { spec: spec0, rnti: 0x6001, loc: CandidateLocation::new(12, 2) },
            Tx { spec: one_a(20, 5, 5), rnti: 0x6002, loc: CandidateLocation::new(15, 1) },
        ];
        let g = build(&cfg, cfi, 7, &txs, 0.01, 5);
        let mut dec = ControlDecoder::new(&cfg, 6);
        let list: BTreeSet<u16> = [0x5000, 0x6001, 0x6002].into();
        let r = dec.decode_subframe(&g, 9, 7, &list, DecodeMode::Owl, &mut ErrLog::new());
        let got: Vec<_> = r.dcis.iter().map(|d| (d.rnti, d.format, d.location)).collect();
        let want: Vec<_> = txs.iter().map(|t| (t.rnti, t.spec.format, t.loc)).collect();
        assert_eq!(got, want);
        assert_eq!(r.dcis[0].rbs, txs[0].spec.rbs(25));
        assert!(r.uncertain.is_empty());
    }

    #[test]
    fn gated_noise_becomes_uncertain() {
        let cfg = cfg();
        let cfi = Cfi::new(2).unwrap();
        let mut g = build(&cfg, cfi, 2, &[], 0.0, 0);
        let layout = ControlLayout::new(&cfg, cfi, 6);
        let mut rng = StdRng::seed_from_u64(1);
        for &(l, k) in layout.cce_res(3) {
            g.set(l, k, complex_noise(&mut rng, 1.0));
        }
        let mut dec = ControlDecoder::new(&cfg, 6);
        let r = dec.decode_subframe(&g, 0, 2, &BTreeSet::new(), DecodeMode::Owl, &mut ErrLog::new());
        assert!(r.dcis.is_empty());
        assert_eq!(r.uncertain, vec![CandidateLocation::new(3, 1)]);
    }

    #[test]
    fn energy_gate_edges() {
        let cfg = cfg();
        let cfi = Cfi::new(1).unwrap();
        let layout = ControlLayout::new(&cfg, cfi, 6);
        let mut dec = ControlDecoder::new(&cfg, 6);
        let mut last = false;
        for step in 0..=20 {
            let amp = step as f64 / 10.0;
            let mut g = build(&cfg, cfi, 0, &[], 0.0, 0);
            for &(l, k) in layout.cce_res(0) {
                g.set(l, k, Complex64::new(amp, 0.0));
            }
            let est = dec.estimate(&g, 0);
            let region = dec.region(&g, &est, cfi, 0);
            let occ = energy_gate(&region, &CandidateLocation::new(0, 1), region.crs_power, ENERGY_RHO);
            assert!(!last || occ, "gate not monotone at {amp}");
            last = occ;
            if step == 10 {
                assert!(occ);
            }
            if step == 0 {
                assert!(!occ);
            }
        }
        let _ = &mut dec;
    }

    #[test]
    fn reencode_reproduces_codeword() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..200 {
            let size = rng.random_range(8..60);
            let l = [1, 2, 4, 8][rng.random_range(0..4)];
            if l * BITS_PER_CCE < 2 * (size + 16) {
                continue;
            }
            let payload: Vec<u8> = (0..size).map(|_| rng.random_range(0..2)).collect();
            let rnti = rng.random();
            let cw = encode_dci(&payload, rnti, l).unwrap();
            let llr = crate::coding::bits_to_llr(&cw, 4.0);
            let rm = RateMatcher::conv(size + 16, l * BITS_PER_CCE);
            let block = ViterbiScratch::default().decode(&rm.invert(&llr), size + 16);
            assert_eq!(recover_rnti(&block).unwrap(), (&payload[..], rnti));
            assert_eq!(reencode_mismatch(&llr, &block, &rm), 0.0);
        }
    }

    #[test]
    fn random_bits_are_rejected_by_reencode() {
        let mut rng = StdRng::seed_from_u64(4);
        let rm = RateMatcher::conv(41, 72);
        let mut total = 0.0;
        for _ in 0..100 {
            let llr: Vec<f32> = (0..72).map(|_| if rng.random() { 1.0 } else { -1.0 }).collect();
            let block = ViterbiScratch::default().decode(&rm.invert(&llr), 41);
            let m = reencode_mismatch(&llr, &block, &rm);
            assert!(m >= REENCODE_MAX_MISMATCH);
            total += m;
        }
        assert!(total / 100.0 > 0.08, "{}", total / 100.0);
    }

    #[test]
    fn admission_rules() {
        let list: BTreeSet<u16> = [0x4000].into();
        let a = |r| admission(r, &list, DecodeMode::Owl).map(|a| a.path);
        assert_eq!(a(0x4000), Some(DecodePath::ListMatch));
        assert_eq!(a(7), Some(DecodePath::RaRnti));
        assert_eq!(a(0xFFFF), Some(DecodePath::ListMatch));
        assert_eq!(a(0x4001), Some(DecodePath::Reencode));
        assert_eq!(a(0xFFF5), None);
        assert_eq!(a(0), None);
        let l = admission(0x4000, &list, DecodeMode::Lteye).unwrap();
        assert_eq!(l.path, DecodePath::Reencode);
        // exactly 2 % is rejected
        assert!(l.strict && l.max_mismatch == 0.02);
    }
}
