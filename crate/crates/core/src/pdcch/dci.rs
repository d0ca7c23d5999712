//! DCI payload formats: field layouts, sizes, packing and parsing.

use std::collections::BTreeMap;
use std::fmt;

use crate::coding::{bits_to_uint, uint_to_bits, BitString};
use crate::error::{Error, Result};
use crate::tables::tables;

use super::layout::CandidateLocation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DciFormat {
    F0,
    F1,
    F1A,
    F1B,
    F1C,
    F1D,
    F2,
    F2A,
}

impl DciFormat {
    pub const ALL: [DciFormat; 8] = [
        DciFormat::F0,
        DciFormat::F1,
        DciFormat::F1A,
        DciFormat::F1B,
        DciFormat::F1C,
        DciFormat::F1D,
        DciFormat::F2,
        DciFormat::F2A,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DciFormat::F0 => "0",
            DciFormat::F1 => "1",
            DciFormat::F1A => "1A",
            DciFormat::F1B => "1B",
            DciFormat::F1C => "1C",
            DciFormat::F1D => "1D",
            DciFormat::F2 => "2",
            DciFormat::F2A => "2A",
        }
    }

    pub fn direction(self) -> Direction {
        if self == DciFormat::F0 {
            Direction::Uplink
        } else {
            Direction::Downlink
        }
    }
}

impl fmt::Display for DciFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DciFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DciFormat::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown DCI format `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Uplink,
    Downlink,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Uplink => "UL",
            Direction::Downlink => "DL",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "UL" => Ok(Direction::Uplink),
            "DL" => Ok(Direction::Downlink),
            _ => Err(Error::Parse(format!("unknown direction `{s}`"))),
        }
    }
}

/// How a DCI was accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DecodePath {
    /// CRC identity found in the active list (or a reserved identity).
    ListMatch,
    RaRnti,
    /// Identity unknown; accepted because re-encoding matched the received bits.
    Reencode,
    /// Recovered by the timing sweep.
    Finetuner,
}

impl DecodePath {
    pub const ALL: [DecodePath; 4] = [DecodePath::ListMatch, DecodePath::RaRnti, DecodePath::Reencode, DecodePath::Finetuner];

    pub fn as_str(self) -> &'static str {
        match self {
            DecodePath::ListMatch => "list-match",
            DecodePath::RaRnti => "ra-rnti",
            DecodePath::Reencode => "reencode",
            DecodePath::Finetuner => "finetuner",
        }
    }
}

impl fmt::Display for DecodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DecodePath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DecodePath::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown decode path `{s}`")))
    }
}

/// Named payload fields. Values are unsigned, most significant bit first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    /// Format 0 / 1A differentiation flag (0 = format 0).
    Flag,
    Hopping,
    /// Localized (0) or distributed (1) virtual resource blocks.
    LocDist,
    Gap,
    /// Resource allocation type 0 (0) or 1 (1).
    RaHeader,
    Riv,
    Bitmap,
    Mcs,
    Ndi,
    Rv,
    Mcs2,
    Ndi2,
    Rv2,
    Harq,
    Tpc,
    Dmrs,
    Cqi,
    Tpmi,
    PmiConfirm,
    PowerOffset,
    Swap,
    Precoding,
    /// Transport block size index of format 1C.
    Itbs,
    Padding,
}

pub type FieldValues = BTreeMap<Field, u64>;

/// Payload sizes that are avoided by zero padding.
const AMBIGUOUS_SIZES: [usize; 10] = [12, 14, 16, 20, 24, 26, 32, 40, 44, 56];

fn ceil_log2(x: usize) -> usize {
    if x <= 1 {
        0
    } else {
        (usize::BITS - (x - 1).leading_zeros()) as usize
    }
}

/// Resource block group size for type-0 allocations.
pub fn rbg_size(n_rb: usize) -> usize {
    match n_rb {
        0..=10 => 1,
        11..=26 => 2,
        27..=63 => 3,
        _ => 4,
    }
}

fn riv_bits(n: usize) -> usize {
    ceil_log2(n * (n + 1) / 2)
}

/// Step of format-1C allocations.
pub fn step_1c(n_rb: usize) -> usize {
    if n_rb < 50 {
        2
    } else {
        4
    }
}

/// Resource indication value of a contiguous allocation of `len` blocks
/// starting at `start`, over `n` blocks.
pub fn riv_encode(start: usize, len: usize, n: usize) -> Result<u64> {
    if len == 0 || start + len > n {
        return Err(Error::OutOfRange(format!("allocation {start}+{len} over {n}")));
    }
    let riv = if len - 1 <= n / 2 {
        n * (len - 1) + start
    } else {
        n * (n - len + 1) + (n - 1 - start)
    };
    Ok(riv as u64)
}

/// Inverse of [`riv_encode`]; `None` if the value is not a valid allocation.
pub fn riv_decode(riv: u64, n: usize) -> Option<(usize, usize)> {
    let riv = usize::try_from(riv).ok()?;
    let (q, r) = (riv / n, riv % n);
    // one of the two branches of the encoder produced it, if any did
    [(r, q + 1), (n - 1 - r, (n + 1).saturating_sub(q))]
        .into_iter()
        .find(|&(start, len)| len > 0 && start + len <= n && riv_encode(start, len, n).ok() == Some(riv as u64))
}

fn base_layout(format: DciFormat, n_rb: usize) -> Vec<(Field, usize)> {
    use Field::*;
    let p = rbg_size(n_rb);
    let bitmap = n_rb.div_ceil(p);
    let header = usize::from(n_rb > 10);
    let riv = riv_bits(n_rb);
    match format {
        DciFormat::F0 => vec![(Flag, 1), (Hopping, 1), (Riv, riv), (Mcs, 5), (Ndi, 1), (Tpc, 2), (Dmrs, 3), (Cqi, 1)],
        DciFormat::F1A => vec![(Flag, 1), (LocDist, 1), (Riv, riv), (Mcs, 5), (Harq, 3), (Ndi, 1), (Rv, 2), (Tpc, 2)],
        DciFormat::F1 => vec![(RaHeader, header), (Bitmap, bitmap), (Mcs, 5), (Harq, 3), (Ndi, 1), (Rv, 2), (Tpc, 2)],
        DciFormat::F1B => vec![(LocDist, 1), (Riv, riv), (Mcs, 5), (Harq, 3), (Ndi, 1), (Rv, 2), (Tpc, 2), (Tpmi, 2), (PmiConfirm, 1)],
        DciFormat::F1D => vec![(LocDist, 1), (Riv, riv), (Mcs, 5), (Harq, 3), (Ndi, 1), (Rv, 2), (Tpc, 2), (Tpmi, 2), (PowerOffset, 1)],
        DciFormat::F1C => {
            let n = n_rb / step_1c(n_rb);
            vec![(Gap, usize::from(n_rb >= 50)), (Riv, riv_bits(n)), (Itbs, 5)]
        }
        DciFormat::F2 | DciFormat::F2A => {
            let precoding = if format == DciFormat::F2 { 3 } else { 0 };
            vec![
                (RaHeader, header),
                (Bitmap, bitmap),
                (Tpc, 2),
                (Harq, 3),
                (Swap, 1),
                (Mcs, 5),
                (Ndi, 1),
                (Rv, 2),
                (Mcs2, 5),
                (Ndi2, 1),
                (Rv2, 2),
                (Precoding, precoding),
            ]
        }
    }
    .into_iter()
    .filter(|&(_, w)| w > 0)
    .collect()
}

fn layout_width(layout: &[(Field, usize)]) -> usize {
    layout.iter().map(|&(_, w)| w).sum()
}

/// Payload layouts and sizes of every format for one bandwidth. Sizes are
/// made pairwise distinct (0 and 1A share one) so that the payload length
/// identifies the format.
#[derive(Debug, Clone)]
pub struct DciSizes {
    pub n_rb_dl: usize,
    layouts: BTreeMap<DciFormat, Vec<(Field, usize)>>,
    sizes: BTreeMap<DciFormat, usize>,
}

impl DciSizes {
    pub fn new(n_rb_dl: usize) -> Self {
        let mut sizes = BTreeMap::new();
        let mut used: Vec<usize> = Vec::new();
        let base = |f| base_layout(f, n_rb_dl);
        let c = layout_width(&base(DciFormat::F1C));
        sizes.insert(DciFormat::F1C, c);
        used.push(c);
        let mut s01a = layout_width(&base(DciFormat::F0)).max(layout_width(&base(DciFormat::F1A)));
        while AMBIGUOUS_SIZES.contains(&s01a) || used.contains(&s01a) {
            s01a += 1;
        }
        sizes.insert(DciFormat::F0, s01a);
        sizes.insert(DciFormat::F1A, s01a);
        used.push(s01a);
        for f in [DciFormat::F1, DciFormat::F1B, DciFormat::F1D, DciFormat::F2A, DciFormat::F2] {
            let mut s = layout_width(&base(f));
            while AMBIGUOUS_SIZES.contains(&s) || used.contains(&s) {
                s += 1;
            }
            sizes.insert(f, s);
            used.push(s);
        }
        let layouts = DciFormat::ALL
            .into_iter()
            .map(|f| {
                let mut l = base(f);
                let pad = sizes[&f] - layout_width(&l);
                if pad > 0 {
                    l.push((Field::Padding, pad));
                }
                (f, l)
            })
            .collect();
        DciSizes { n_rb_dl, layouts, sizes }
    }

    pub fn size(&self, format: DciFormat) -> usize {
        self.sizes[&format]
    }

    pub fn layout(&self, format: DciFormat) -> &[(Field, usize)] {
        &self.layouts[&format]
    }

    pub fn width(&self, format: DciFormat, field: Field) -> usize {
        self.layout(format).iter().find(|(f, _)| *f == field).map_or(0, |&(_, w)| w)
    }

    /// Distinct payload lengths, ascending.
    pub fn size_set(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.sizes.values().copied().collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Format hypothesis for a payload length; 0 and 1A share one.
    pub fn formats_for_size(&self, size: usize) -> Vec<DciFormat> {
        DciFormat::ALL.into_iter().filter(|f| self.sizes[f] == size).collect()
    }

    pub fn pack(&self, format: DciFormat, values: &FieldValues) -> Result<BitString> {
        let mut out = Vec::with_capacity(self.size(format));
        for &(field, width) in self.layout(format) {
            let mut v = values.get(&field).copied().unwrap_or(0);
            if field == Field::Flag {
                v = u64::from(format == DciFormat::F1A);
            }
            if width < 64 && v >> width != 0 {
                return Err(Error::OutOfRange(format!("{field:?}={v} exceeds {width} bits")));
            }
            out.extend(uint_to_bits(v, width));
        }
        Ok(out)
    }

    pub fn unpack(&self, format: DciFormat, bits: &[u8]) -> Result<FieldValues> {
        if bits.len() != self.size(format) {
            return Err(Error::Dimension {
                expected: self.size(format),
                got: bits.len(),
            });
        }
        let mut pos = 0;
        let mut out = FieldValues::new();
        for &(field, width) in self.layout(format) {
            out.insert(field, bits_to_uint(&bits[pos..pos + width]));
            pos += width;
        }
        Ok(out)
    }
}

/// Downlink transport block size; `None` for the retransmission-only MCS
/// values.
pub fn tbs_lookup(mcs: u8, n_rb: usize) -> Result<Option<u32>> {
    let t = tables();
    let itbs = *t
        .mcs_dl
        .get(usize::from(mcs))
        .ok_or_else(|| Error::OutOfRange(format!("mcs {mcs}")))?;
    itbs.map(|i| tbs_by_index(usize::from(i), n_rb)).transpose()
}

/// Uplink counterpart of [`tbs_lookup`].
pub fn tbs_lookup_ul(mcs: u8, n_rb: usize) -> Result<Option<u32>> {
    let t = tables();
    let itbs = *t
        .mcs_ul
        .get(usize::from(mcs))
        .ok_or_else(|| Error::OutOfRange(format!("mcs {mcs}")))?;
    itbs.map(|i| tbs_by_index(usize::from(i), n_rb)).transpose()
}

pub fn tbs_by_index(itbs: usize, n_rb: usize) -> Result<u32> {
    let t = tables();
    if n_rb == 0 || n_rb > 110 || itbs >= t.tbs.len() {
        return Err(Error::OutOfRange(format!("tbs index {itbs}, {n_rb} RBs")));
    }
    Ok(t.tbs[itbs][n_rb - 1])
}

/// True for identities whose format-1A grants use the common TBS rule
/// (random access, paging, system information).
pub fn is_common_rnti(rnti: u16) -> bool {
    (1..=10).contains(&rnti) || rnti >= 0xFFFE
}

/// Decoded control message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dci {
    pub format: DciFormat,
    pub direction: Direction,
    pub rnti: u16,
    pub mcs: u8,
    pub n_rb: u16,
    /// Transport block size in bits; `None` for retransmissions.
    pub tbs: Option<u32>,
    /// Allocated resource blocks, bit `i` for block `i` (downlink localized
    /// allocations; empty otherwise).
    pub rbs: u128,
    pub location: CandidateLocation,
    pub payload: BitString,
    pub decode_path: DecodePath,
    /// Allocation read as contiguous although signalled distributed.
    pub distributed: bool,
    /// Type-1 allocation; only the block count is meaningful.
    pub ra_type1: bool,
}

fn contiguous(start: usize, len: usize) -> u128 {
    if len == 0 {
        0
    } else {
        (u128::MAX >> (128 - len)) << start
    }
}

/// Parsed allocation and sizes, without the decoding context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DciFields {
    pub format: DciFormat,
    pub mcs: u8,
    pub n_rb: u16,
    pub tbs: Option<u32>,
    pub rbs: u128,
    pub distributed: bool,
    pub ra_type1: bool,
    pub values: FieldValues,
}

fn reject(what: impl fmt::Display) -> Error {
    Error::Parse(format!("DCI rejected: {what}"))
}

/// Parses a payload of length `sizes.size(format)`. For the shared 0/1A
/// length either hypothesis may be passed; the flag bit decides.
pub fn parse_dci(payload: &[u8], format: DciFormat, sizes: &DciSizes, rnti: u16) -> Result<DciFields> {
    let n = sizes.n_rb_dl;
    let mut format = format;
    if matches!(format, DciFormat::F0 | DciFormat::F1A) {
        format = if payload.first() == Some(&1) { DciFormat::F1A } else { DciFormat::F0 };
    }
    let v = sizes.unpack(format, payload)?;
    let get = |f: Field| v.get(&f).copied().unwrap_or(0);
    let mut distributed = false;
    let mut ra_type1 = false;
    let (mcs, n_rb, rbs, tbs);
    match format {
        DciFormat::F0 | DciFormat::F1A | DciFormat::F1B | DciFormat::F1D => {
            let (start, len) = riv_decode(get(Field::Riv), n).ok_or_else(|| reject(format!("RIV {} over {n}", get(Field::Riv))))?;
            mcs = get(Field::Mcs) as u8;
            n_rb = len;
            distributed = get(Field::LocDist) == 1;
            rbs = if format == DciFormat::F0 { 0 } else { contiguous(start, len) };
            tbs = match format {
                DciFormat::F0 => tbs_lookup_ul(mcs, len)?,
                DciFormat::F1A if is_common_rnti(rnti) => {
                    if mcs > 26 {
                        return Err(reject(format!("common TBS index {mcs}")));
                    }
                    let column = if get(Field::Tpc) >> 1 == 1 { 3 } else { 2 };
                    Some(tbs_by_index(usize::from(mcs), column)?)
                }
                _ => tbs_lookup(mcs, len)?,
            };
        }
        DciFormat::F1C => {
            let step = step_1c(n);
            let (start, len) = riv_decode(get(Field::Riv), n / step).ok_or_else(|| reject("format 1C RIV"))?;
            mcs = get(Field::Itbs) as u8;
            n_rb = len * step;
            rbs = contiguous(start * step, n_rb);
            tbs = Some(tables().tbs_1c[usize::from(mcs)]);
        }
        DciFormat::F1 | DciFormat::F2 | DciFormat::F2A => {
            let width = sizes.width(format, Field::Bitmap);
            let bitmap = get(Field::Bitmap);
            let p = rbg_size(n);
            if get(Field::RaHeader) == 1 {
                // subset index and shift precede a shorter block bitmap
                ra_type1 = true;
                let sel = ceil_log2(p) + 1;
                let short = bitmap & ((1u64 << (width - sel)) - 1);
                n_rb = short.count_ones() as usize;
                rbs = 0;
            } else {
                let mut mask = 0u128;
                for g in 0..width {
                    if bitmap >> (width - 1 - g) & 1 == 1 {
                        let lo = g * p;
                        mask |= contiguous(lo, p.min(n - lo));
                    }
                }
                n_rb = mask.count_ones() as usize;
                rbs = mask;
            }
            if n_rb == 0 {
                return Err(reject("empty allocation"));
            }
            mcs = get(Field::Mcs) as u8;
            tbs = if format == DciFormat::F1 {
                tbs_lookup(mcs, n_rb)?
            } else {
                let tb = |m: Field, r: Field| -> Result<Option<Option<u32>>> {
                    let (m, r) = (get(m) as u8, get(r));
                    if m == 0 && r == 1 {
                        Ok(None)
                    } else {
                        Ok(Some(tbs_lookup(m, n_rb)?))
                    }
                };
                match (tb(Field::Mcs, Field::Rv)?, tb(Field::Mcs2, Field::Rv2)?) {
                    (None, None) => return Err(reject("both transport blocks disabled")),
                    (a, b) => {
                        let parts = [a, b];
                        let enabled: Vec<Option<u32>> = parts.into_iter().flatten().collect();
                        if enabled.iter().any(Option::is_none) {
                            None
                        } else {
                            Some(enabled.into_iter().flatten().sum())
                        }
                    }
                }
            };
        }
    }
    if n_rb == 0 || n_rb > n {
        return Err(reject(format!("{n_rb} blocks over {n}")));
    }
    Ok(DciFields {
        format,
        mcs,
        n_rb: n_rb as u16,
        tbs,
        rbs,
        distributed,
        ra_type1,
        values: v,
    })
}

/// What to schedule, in allocation terms; [`DciSpec::values`] turns it into
/// payload fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Allocation {
    /// Contiguous blocks (formats 0, 1A, 1B, 1C, 1D).
    Contiguous { start: usize, len: usize },
    /// Type-0 group bitmap, bit `g` set for group `g` (formats 1, 2, 2A).
    Groups(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DciSpec {
    pub format: DciFormat,
    pub mcs: u8,
    pub allocation: Allocation,
    /// Extra fields (TPC, HARQ, ...); allocation fields are overwritten.
    pub extra: FieldValues,
}

impl DciSpec {
    pub fn values(&self, sizes: &DciSizes) -> Result<FieldValues> {
        let n = sizes.n_rb_dl;
        let mut v = self.extra.clone();
        match (&self.allocation, self.format) {
            (Allocation::Contiguous { start, len }, DciFormat::F1C) => {
                let step = step_1c(n);
                if start % step != 0 || len % step != 0 {
                    return Err(Error::OutOfRange(format!("1C allocation {start}+{len} not on step {step}")));
                }
                v.insert(Field::Riv, riv_encode(start / step, len / step, n / step)?);
                v.insert(Field::Itbs, u64::from(self.mcs));
            }
            (Allocation::Contiguous { start, len }, f) if !matches!(f, DciFormat::F1 | DciFormat::F2 | DciFormat::F2A) => {
                v.insert(Field::Riv, riv_encode(*start, *len, n)?);
                v.insert(Field::Mcs, u64::from(self.mcs));
                v.insert(Field::LocDist, 0);
            }
            (Allocation::Groups(mask), f) if matches!(f, DciFormat::F1 | DciFormat::F2 | DciFormat::F2A) => {
                let width = sizes.width(f, Field::Bitmap);
                if width < 64 && mask >> width != 0 || *mask == 0 {
                    return Err(Error::OutOfRange(format!("group mask {mask:#x}")));
                }
                let msb_first = (0..width).fold(0u64, |acc, g| (acc << 1) | (mask >> g & 1));
                v.insert(Field::Bitmap, msb_first);
                v.insert(Field::RaHeader, 0);
                v.insert(Field::Mcs, u64::from(self.mcs));
            }
            (a, f) => return Err(Error::Config(format!("allocation {a:?} not valid for format {f}"))),
        }
        Ok(v)
    }

    /// Allocated downlink blocks as a bitmask (empty for uplink).
    pub fn rbs(&self, n_rb_dl: usize) -> u128 {
        if self.format == DciFormat::F0 {
            return 0;
        }
        match &self.allocation {
            Allocation::Contiguous { start, len } => contiguous(*start, *len),
            Allocation::Groups(mask) => {
                let p = rbg_size(n_rb_dl);
                (0..n_rb_dl.div_ceil(p))
                    .filter(|g| mask >> g & 1 == 1)
                    .fold(0u128, |m, g| m | contiguous(g * p, p.min(n_rb_dl - g * p)))
            }
        }
    }
}
