//! Schedule verification: decoded downlink allocations against measured
//! shared-channel power, and the resulting detection ratios.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::dcilog::DciLogRecord;
use crate::grid::crs::{crs_offset, CRS_SYMBOLS};
use crate::grid::pdsch::rb_res;
use crate::grid::{CellConfig, ResourceGrid, SUBCARRIERS_PER_RB};
use crate::pdcch::{Dci, Direction};

/// A block is occupied when its data power exceeds this share of the
/// reference-signal power next to it.
pub const OCCUPANCY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbPower {
    pub pdsch: f64,
    pub reference: f64,
    pub occupied: bool,
}

/// Per-block measurement of one subframe's shared channel.
pub fn measure_subframe(grid: &ResourceGrid, cfg: &CellConfig, cfi: usize, subframe: usize) -> Vec<RbPower> {
    (0..cfg.n_rb_dl)
        .map(|rb| {
            let (mut p, mut n) = (0.0, 0usize);
            for (l, k) in rb_res(cfg, cfi, subframe, rb) {
                p += grid.get(l, k).norm_sqr();
                n += 1;
            }
            let (mut r, mut m) = (0.0, 0usize);
            for l in CRS_SYMBOLS {
                let off = crs_offset(cfg, 0, l).expect("CRS symbol");
                for k in (rb * SUBCARRIERS_PER_RB + off..(rb + 1) * SUBCARRIERS_PER_RB).step_by(6) {
                    r += grid.get(l, k).norm_sqr();
                    m += 1;
                }
            }
            let pdsch = p / n.max(1) as f64;
            let reference = r / m.max(1) as f64;
            RbPower {
                pdsch,
                reference,
                occupied: pdsch > OCCUPANCY_THRESHOLD * reference,
            }
        })
        .collect()
}

/// Occupancy of every measured subframe, keyed by unwrapped index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PowerMap {
    pub n_rb: usize,
    pub rows: BTreeMap<u64, Vec<RbPower>>,
}

impl PowerMap {
    pub fn new(n_rb: usize) -> Self {
        PowerMap {
            n_rb,
            rows: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, index: u64, row: Vec<RbPower>) {
        debug_assert_eq!(row.len(), self.n_rb);
        self.rows.insert(index, row);
    }

    pub fn occupied(&self, index: u64) -> u128 {
        self.rows.get(&index).map_or(0, |r| {
            r.iter().enumerate().filter(|(_, p)| p.occupied).fold(0, |m, (i, _)| m | 1 << i)
        })
    }

    /// Share of (subframe, block) cells whose occupancy equals `truth`.
    pub fn agreement(&self, truth: impl Fn(u64) -> Option<u128>) -> f64 {
        let (mut same, mut total) = (0usize, 0usize);
        for &index in self.rows.keys() {
            let Some(t) = truth(index) else { continue };
            let diff = (self.occupied(index) ^ t) & ((1u128 << self.n_rb) - 1);
            same += self.n_rb - diff.count_ones() as usize;
            total += self.n_rb;
        }
        same as f64 / total.max(1) as f64
    }
}

/// Sum of allocated blocks over the downlink messages of a subframe.
pub fn decoded_rb_count(dcis: &[Dci]) -> u32 {
    dcis.iter()
        .filter(|d| d.direction == Direction::Downlink)
        .map(|d| u32::from(d.n_rb))
        .sum()
}

/// Same, from log records.
pub fn logged_rb_count<'a>(records: impl IntoIterator<Item = &'a DciLogRecord>) -> u32 {
    records
        .into_iter()
        .filter(|r| r.direction == Direction::Downlink)
        .map(|r| u32::from(r.n_rb))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStat {
    /// Unwrapped frame number.
    pub frame: u64,
    pub occupied: u32,
    pub decoded: u32,
    /// Decoded beyond the occupied count, summed per subframe.
    pub false_positive: u32,
}

impl FrameStat {
    /// `None` for frames without traffic.
    pub fn ratio(&self) -> Option<f64> {
        (self.occupied > 0).then(|| f64::from(self.decoded) / f64::from(self.occupied))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionStats {
    pub frames: Vec<FrameStat>,
    pub occupied: u64,
    pub decoded: u64,
    pub false_positive: u64,
    /// Ten bins of width 0.1 over [0, 1), the last also holding ratios ≥ 1.
    pub histogram: [usize; 11],
    /// Subframes where more blocks were decoded than measured.
    pub false_positive_subframes: usize,
}

impl DetectionStats {
    pub fn ratio(&self) -> Option<f64> {
        (self.occupied > 0).then(|| self.decoded as f64 / self.occupied as f64)
    }

    /// Frames with traffic whose every occupied block was decoded.
    pub fn complete_frames(&self) -> (usize, usize) {
        let with = self.frames.iter().filter(|f| f.occupied > 0);
        let total = with.clone().count();
        (with.filter(|f| f.decoded >= f.occupied).count(), total)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("scope,frame_or_exp_id,occupied_rbs,decoded_rbs,ratio,false_positive_rbs\n");
        let r = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
        for f in &self.frames {
            let _ = writeln!(s, "frame,{},{},{},{},{}", f.frame, f.occupied, f.decoded, r(f.ratio()), f.false_positive);
        }
        let _ = writeln!(s, "experiment,0,{},{},{},{}", self.occupied, self.decoded, r(self.ratio()), self.false_positive);
        s
    }
}

/// Per-frame ratio of decoded to power-occupied blocks. Decoded blocks are
/// counted only where power was measured, so an interference block adds to
/// the occupied side and never to the decoded side.
pub fn detection_stats(power: &PowerMap, decoded: impl Fn(u64) -> u32) -> DetectionStats {
    let mut frames: BTreeMap<u64, FrameStat> = BTreeMap::new();
    let mut fp_subframes = 0;
    for &index in power.rows.keys() {
        let occ = power.occupied(index).count_ones();
        let dec = decoded(index);
        let f = frames.entry(index / 10).or_insert(FrameStat {
            frame: index / 10,
            occupied: 0,
            decoded: 0,
            false_positive: 0,
        });
        f.occupied += occ;
        f.decoded += dec.min(occ);
        if dec > occ {
            f.false_positive += dec - occ;
            fp_subframes += 1;
        }
    }
    let frames: Vec<FrameStat> = frames.into_values().collect();
    let mut histogram = [0usize; 11];
    for f in &frames {
        if let Some(r) = f.ratio() {
            histogram[((r * 10.0).floor() as usize).min(10)] += 1;
        }
    }
    DetectionStats {
        occupied: frames.iter().map(|f| u64::from(f.occupied)).sum(),
        decoded: frames.iter().map(|f| u64::from(f.decoded)).sum(),
        false_positive: frames.iter().map(|f| u64::from(f.false_positive)).sum(),
        frames,
        histogram,
        false_positive_subframes: fp_subframes,
    }
}

/// Decoded log against a reference log, both time ordered.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruthMatch {
    /// Frames with reference downlink traffic.
    pub frames: usize,
    /// Of those, frames where every reference downlink block was decoded.
    pub complete_frames: usize,
    pub reference_rbs: u64,
    pub decoded_rbs: u64,
    /// Reference messages absent from the decoded log.
    pub missed: Vec<DciLogRecord>,
    /// Decoded messages absent from the reference.
    pub spurious: Vec<DciLogRecord>,
    /// Matches found at a smaller aggregation level than sent. The first
    /// CCEs of a repeated codeword decode on their own, so the level is
    /// ambiguous to any receiver.
    pub aggregation_mismatch: usize,
}

impl TruthMatch {
    pub fn frame_ratio(&self) -> f64 {
        self.complete_frames as f64 / self.frames.max(1) as f64
    }

    pub fn rb_ratio(&self) -> f64 {
        self.decoded_rbs as f64 / self.reference_rbs.max(1) as f64
    }
}

/// Equal up to decode path and aggregation level.
fn same_message(a: &DciLogRecord, b: &DciLogRecord) -> bool {
    let norm = |r: &DciLogRecord| DciLogRecord {
        decode_path: None,
        aggregation: 0,
        ..r.clone()
    };
    norm(a) == norm(b)
}

/// Matches messages ignoring the decode path; only subframes in `range`
/// (unwrapped indices) are considered.
pub fn match_truth(decoded: &[DciLogRecord], reference: &[DciLogRecord], range: std::ops::Range<u64>) -> TruthMatch {
    let by_sf = |log: &[DciLogRecord]| {
        let mut m: BTreeMap<u64, Vec<DciLogRecord>> = BTreeMap::new();
        for r in log.iter().filter(|r| range.contains(&r.index)) {
            m.entry(r.index).or_default().push(r.clone());
        }
        m
    };
    let dec = by_sf(decoded);
    let refs = by_sf(reference);
    let mut out = TruthMatch::default();
    let mut frames: BTreeMap<u64, bool> = BTreeMap::new();
    for (index, rs) in &refs {
        let got = dec.get(index).map_or(&[][..], Vec::as_slice);
        for r in rs {
            let found = got.iter().find(|g| same_message(g, r));
            let hit = found.is_some();
            if found.is_some_and(|g| g.aggregation != r.aggregation) {
                out.aggregation_mismatch += 1;
            }
            if r.direction == Direction::Downlink {
                out.reference_rbs += u64::from(r.n_rb);
                if hit {
                    out.decoded_rbs += u64::from(r.n_rb);
                }
                let f = frames.entry(index / 10).or_insert(true);
                *f &= hit;
            }
            if !hit {
                out.missed.push(r.clone());
            }
        }
    }
    for (index, gs) in &dec {
        let want = refs.get(index).map_or(&[][..], Vec::as_slice);
        out.spurious.extend(gs.iter().filter(|g| !want.iter().any(|r| same_message(g, r))).cloned());
    }
    out.frames = frames.len();
    out.complete_frames = frames.values().filter(|&&c| c).count();
    out
}
