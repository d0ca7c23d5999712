//! Ground truth of a simulated run and its text form.
//!
//! The file holds DCI log lines (decode path `-`) plus three other kinds:
//! `occupancy  index  sfn.sf  cfi  rbs  interference  ctrl_offset`,
//! `rar  index  sfn.sf  ra_rnti  temp_crnti` and `warm  rnti`, where the
//! block masks are hexadecimal with bit `i` for block `i`.

use std::fmt::Write as _;

use crate::dcilog::{sfn_sf, DciLogRecord};
use crate::error::{Error, Result};
use crate::pdcch::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubframeTruth {
    pub index: u64,
    pub cfi: u8,
    /// Downlink allocations plus interference blocks.
    pub occupied: u128,
    pub interference: u128,
    /// Control symbols sent with a timing offset.
    pub ctrl_offset: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RarTruth {
    pub index: u64,
    pub ra_rnti: u16,
    pub temp_crnti: u16,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    /// Sorted by (index, cce_start).
    pub dcis: Vec<DciLogRecord>,
    pub subframes: Vec<SubframeTruth>,
    pub rars: Vec<RarTruth>,
    /// Identities active before the trace starts.
    pub warm_rntis: Vec<u16>,
}

impl GroundTruth {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.warm_rntis {
            let _ = writeln!(s, "warm\t{r:04x}");
        }
        let mut d = self.dcis.iter().peekable();
        let mut r = self.rars.iter().peekable();
        for sf in &self.subframes {
            let (sfn, sub) = sfn_sf(sf.index);
            let _ = writeln!(
                s,
                "occupancy\t{}\t{sfn}.{sub}\t{}\t{:x}\t{:x}\t{}",
                sf.index,
                sf.cfi,
                sf.occupied,
                sf.interference,
                u8::from(sf.ctrl_offset)
            );
            while let Some(rec) = d.next_if(|x| x.index == sf.index) {
                let _ = writeln!(s, "{}", rec.render());
            }
            while let Some(x) = r.next_if(|x| x.index == sf.index) {
                let _ = writeln!(s, "rar\t{}\t{sfn}.{sub}\t{:04x}\t{:04x}", x.index, x.ra_rnti, x.temp_crnti);
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut t = GroundTruth::default();
        for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Parse(format!("ground-truth line `{line}`"));
            let hex16 = |s: &str| u16::from_str_radix(s, 16).map_err(|_| bad());
            match f[0] {
                "warm" if f.len() == 2 => t.warm_rntis.push(hex16(f[1])?),
                "occupancy" if f.len() == 7 => t.subframes.push(SubframeTruth {
                    index: f[1].parse().map_err(|_| bad())?,
                    cfi: f[3].parse().map_err(|_| bad())?,
                    occupied: u128::from_str_radix(f[4], 16).map_err(|_| bad())?,
                    interference: u128::from_str_radix(f[5], 16).map_err(|_| bad())?,
                    ctrl_offset: f[6] == "1",
                }),
                "rar" if f.len() == 5 => t.rars.push(RarTruth {
                    index: f[1].parse().map_err(|_| bad())?,
                    ra_rnti: hex16(f[3])?,
                    temp_crnti: hex16(f[4])?,
                }),
                _ => t.dcis.push(DciLogRecord::parse(line)?),
            }
        }
        Ok(t)
    }

    /// Downlink messages of one subframe.
    pub fn downlink_at(&self, index: u64) -> impl Iterator<Item = &DciLogRecord> {
        let lo = self.dcis.partition_point(|r| r.index < index);
        self.dcis[lo..]
            .iter()
            .take_while(move |r| r.index == index)
            .filter(|r| r.direction == Direction::Downlink)
    }

    pub fn subframe(&self, index: u64) -> Option<&SubframeTruth> {
        let i = self.subframes.partition_point(|s| s.index < index);
        self.subframes.get(i).filter(|s| s.index == index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdcch::DciFormat;

    #[test]
    fn round_trip() {
        let rec = |index, cce_start| DciLogRecord {
            index,
            rnti: 0x1234,
            direction: Direction::Downlink,
            format: DciFormat::F1,
            mcs: 9,
            n_rb: 4,
            tbs: Some(1032),
            cce_start,
            aggregation: 2,
            decode_path: None,
            cfi: 2,
        };
        let t = GroundTruth {
            dcis: vec![rec(3, 0), rec(3, 4), rec(10_245, 0)],
            subframes: (0..4).chain(10_245..10_246).map(|index| SubframeTruth { index, cfi: 2, occupied: 0xF0, interference: 0x30, ctrl_offset: index == 3 }).collect(),
            rars: vec![RarTruth { index: 2, ra_rnti: 3, temp_crnti: 0x4455 }],
            warm_rntis: vec![0x0100],
        };
        let text = t.render();
        assert_eq!(GroundTruth::parse(&text).unwrap(), t);
        assert_eq!(crate::dcilog::parse_log(&text).unwrap().len(), 3);
        assert_eq!(t.downlink_at(3).count(), 2);
        assert!(t.subframe(4).is_none());
    }
}
