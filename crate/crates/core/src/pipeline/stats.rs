//! Traffic analytics over a decoded control log.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::dcilog::DciLogRecord;
use crate::error::{Error, Result};
use crate::pdcch::decode::is_c_rnti;
use crate::pdcch::Direction;

/// One CSV row: aggregate, single user or the remainder of a time bin.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub bin_start_s: f64,
    /// `total`, `user` or `rest`.
    pub scope: &'static str,
    pub rnti: Option<u16>,
    pub dl_bps: f64,
    pub ul_bps: f64,
    pub messages: usize,
    pub mcs_mean: f64,
    pub mcs_std: f64,
}

#[derive(Default)]
struct Acc {
    dl_bits: u64,
    ul_bits: u64,
    mcs: Vec<f64>,
}

impl Acc {
    fn add(&mut self, r: &DciLogRecord) {
        let bits = u64::from(r.tbs.unwrap_or(0));
        match r.direction {
            Direction::Downlink => self.dl_bits += bits,
            Direction::Uplink => self.ul_bits += bits,
        }
        self.mcs.push(f64::from(r.mcs));
    }

    fn merge(&mut self, o: &Acc) {
        self.dl_bits += o.dl_bits;
        self.ul_bits += o.ul_bits;
        self.mcs.extend(&o.mcs);
    }

    fn row(&self, bin_start_s: f64, bin_s: f64, scope: &'static str, rnti: Option<u16>) -> StatsRow {
        let n = self.mcs.len();
        let mean = self.mcs.iter().sum::<f64>() / n.max(1) as f64;
        let var = self.mcs.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n.max(1) as f64;
        StatsRow {
            bin_start_s,
            scope,
            rnti,
            dl_bps: self.dl_bits as f64 / bin_s,
            ul_bps: self.ul_bits as f64 / bin_s,
            messages: n,
            mcs_mean: mean,
            mcs_std: var.sqrt(),
        }
    }
}

/// Per-bin data rates and per-user MCS statistics. Users are ranked by
/// total bits over the whole log; the `top` heaviest get their own rows,
/// the rest are pooled. Times are relative to the first record.
pub fn stats(records: &[DciLogRecord], bin_s: f64, top: usize) -> Result<Vec<StatsRow>> {
    if !(bin_s > 0.0) {
        return Err(Error::Config(format!("bin width {bin_s} s")));
    }
    let Some(first) = records.iter().map(|r| r.index).min() else {
        return Ok(Vec::new());
    };
    let mut volume: HashMap<u16, u64> = HashMap::new();
    for r in records.iter().filter(|r| is_c_rnti(r.rnti)) {
        *volume.entry(r.rnti).or_default() += u64::from(r.tbs.unwrap_or(0));
    }
    let mut ranked: Vec<(u16, u64)> = volume.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let heavy: Vec<u16> = ranked.iter().take(top).map(|&(r, _)| r).collect();

    let mut bins: BTreeMap<u64, (Acc, BTreeMap<u16, Acc>)> = BTreeMap::new();
    for r in records {
        let b = ((r.index - first) as f64 * 1e-3 / bin_s).floor() as u64;
        let (total, users) = bins.entry(b).or_default();
        total.add(r);
        if is_c_rnti(r.rnti) {
            users.entry(r.rnti).or_default().add(r);
        }
    }
    let mut rows = Vec::new();
    for (b, (total, users)) in &bins {
        let t0 = *b as f64 * bin_s;
        rows.push(total.row(t0, bin_s, "total", None));
        let mut rest = Acc::default();
        for (rnti, acc) in users {
            if !heavy.contains(rnti) {
                rest.merge(acc);
            }
        }
        for rnti in &heavy {
            if let Some(acc) = users.get(rnti) {
                rows.push(acc.row(t0, bin_s, "user", Some(*rnti)));
            }
        }
        if !rest.mcs.is_empty() {
            rows.push(rest.row(t0, bin_s, "rest", None));
        }
    }
    Ok(rows)
}

pub fn stats_csv(rows: &[StatsRow]) -> String {
    let mut s = String::from("bin_start_s,scope,rnti,dl_bps,ul_bps,messages,mcs_mean,mcs_std\n");
    for r in rows {
        let rnti = r.rnti.map_or("-".to_string(), |x| format!("{x:04x}"));
        let _ = writeln!(
            s,
            "{:.3},{},{},{:.1},{:.1},{},{:.3},{:.3}",
            r.bin_start_s, r.scope, rnti, r.dl_bps, r.ul_bps, r.messages, r.mcs_mean, r.mcs_std
        );
    }
    s
}
