//! Tab-separated DCI log, shared by the decoder output and the simulator's
//! ground truth.
//!
//! One line per message:
//! `index  sfn.sf  rnti  dir  format  mcs  n_rb  tbs  cce  L  path  cfi`
//! where `index` is the unwrapped subframe count (`10 * sfn + sf` plus
//! 10240 per SFN wrap) so that time never goes backwards inside a file.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::pdcch::{DecodePath, Dci, DciFormat, Direction};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DciLogRecord {
    pub index: u64,
    pub rnti: u16,
    pub direction: Direction,
    pub format: DciFormat,
    pub mcs: u8,
    pub n_rb: u16,
    pub tbs: Option<u32>,
    pub cce_start: u16,
    pub aggregation: u8,
    /// `None` in ground-truth files.
    pub decode_path: Option<DecodePath>,
    pub cfi: u8,
}

/// SFN and subframe of an unwrapped subframe index.
pub fn sfn_sf(index: u64) -> (u16, u8) {
    let abs = index % 10_240;
    ((abs / 10) as u16, (abs % 10) as u8)
}

impl DciLogRecord {
    pub fn from_dci(index: u64, dci: &Dci, cfi: u8) -> Self {
        DciLogRecord {
            index,
            rnti: dci.rnti,
            direction: dci.direction,
            format: dci.format,
            mcs: dci.mcs,
            n_rb: dci.n_rb,
            tbs: dci.tbs,
            cce_start: dci.location.cce_start,
            aggregation: dci.location.aggregation,
            decode_path: Some(dci.decode_path),
            cfi,
        }
    }

    pub fn render(&self) -> String {
        let (sfn, sf) = sfn_sf(self.index);
        let tbs = self.tbs.map_or("-".to_string(), |t| t.to_string());
        let path = self.decode_path.map_or("-", DecodePath::as_str);
        format!(
            "{}\t{sfn}.{sf}\t{:04x}\t{}\t{}\t{}\t{}\t{tbs}\t{}\t{}\t{path}\t{}",
            self.index, self.rnti, self.direction, self.format, self.mcs, self.n_rb, self.cce_start, self.aggregation, self.cfi
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || Error::Parse(format!("DCI log line `{line}`"));
        if f.len() != 12 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad());
        let index = num(f[0])?;
        let (sfn, sf) = f[1].split_once('.').ok_or_else(bad)?;
        if (num(sfn)?, num(sf)?) != {
            let (a, b) = sfn_sf(index);
            (u64::from(a), u64::from(b))
        } {
            return Err(Error::Parse(format!("time `{}` disagrees with index {index}", f[1])));
        }
        Ok(DciLogRecord {
            index,
            rnti: u16::from_str_radix(f[2], 16).map_err(|_| bad())?,
            direction: f[3].parse()?,
            format: f[4].parse()?,
            mcs: u8::try_from(num(f[5])?).map_err(|_| bad())?,
            n_rb: u16::try_from(num(f[6])?).map_err(|_| bad())?,
            tbs: if f[7] == "-" { None } else { Some(u32::try_from(num(f[7])?).map_err(|_| bad())?) },
            cce_start: u16::try_from(num(f[8])?).map_err(|_| bad())?,
            aggregation: u8::try_from(num(f[9])?).map_err(|_| bad())?,
            decode_path: if f[10] == "-" { None } else { Some(f[10].parse()?) },
            cfi: u8::try_from(num(f[11])?).map_err(|_| bad())?,
        })
    }
}

pub fn render_log(records: &[DciLogRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(s, "{}", r.render());
    }
    s
}

/// Parses a log; lines starting with `#` are comments. Lines of other kinds
/// (first field not numeric) are skipped so ground-truth files parse too.
pub fn parse_log(text: &str) -> Result<Vec<DciLogRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .filter(|l| l.as_bytes()[0].is_ascii_digit())
        .map(DciLogRecord::parse)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record() -> impl Strategy<Value = DciLogRecord> {
        (0u64..100_000, any::<u16>(), 0usize..8, 0u8..32, 0u16..111, proptest::option::of(16u32..100_000), 0u16..88, 0usize..4, proptest::option::of(0usize..4), 1u8..4).prop_map(
            |(index, rnti, f, mcs, n_rb, tbs, cce, l, path, cfi)| {
                let format = DciFormat::ALL[f];
                DciLogRecord {
                    index,
                    rnti,
                    direction: format.direction(),
                    format,
                    mcs,
                    n_rb,
                    tbs,
                    cce_start: cce,
                    aggregation: [1, 2, 4, 8][l],
                    decode_path: path.map(|p| DecodePath::ALL[p]),
                    cfi,
                }
            },
        )
    }

    proptest! {
        #[test]
        fn round_trip(recs in proptest::collection::vec(record(), 0..20)) {
            let text = render_log(&recs);
            prop_assert_eq!(parse_log(&text).unwrap(), recs);
        }
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(DciLogRecord::parse("1\t0.1\tzz").is_err());
        let good = "10241\t0.1\t1234\tDL\t1A\t5\t2\t176\t0\t4\tlist-match\t2";
        assert_eq!(DciLogRecord::parse(good).unwrap().index, 10_241);
        assert!(DciLogRecord::parse(&good.replace("0.1", "0.2")).is_err());
        assert!(parse_log("occupancy\t1\t0.1\t0\n").unwrap().is_empty());
    }
}
