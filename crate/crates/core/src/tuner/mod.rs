//! Second chance for control locations that carry energy but did not
//! decode: the control symbols are demodulated again under a sweep of
//! timing offsets and only those locations are retried.

use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::error::Result;
use crate::grid::{CellConfig, Ofdm, ResourceGrid, SYMBOLS_PER_SUBFRAME};
use crate::pdcch::pcfich::cfi_decode;
use crate::pdcch::{CandidateLocation, ControlDecoder, DecodeMode, DecodePath, Dci, RntiOracle, SubframeReport};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TunerConfig {
    /// Largest shift tried, in samples; clipped to half a cyclic prefix.
    pub max_offset: usize,
    pub step: usize,
    /// Also try the odd neighbours of the best coarse offset.
    pub refine: bool,
    /// Wall-clock budget per call; `None` = unbounded.
    pub deadline: Option<Duration>,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            max_offset: 32,
            step: 2,
            refine: true,
            deadline: None,
        }
    }
}

impl TunerConfig {
    pub fn with_deadline(deadline: Duration) -> Self {
        TunerConfig {
            deadline: Some(deadline),
            ..Self::default()
        }
    }

    /// Coarse offsets by increasing magnitude, negative first; includes 0.
    pub fn offsets(&self, cfg: &CellConfig) -> Vec<i64> {
        let bound = self.max_offset.min(cfg.cp_len(1) / 2) as i64;
        let step = self.step.max(1) as i64;
        let mut v = vec![0];
        let mut m = step;
        while m <= bound {
            v.extend([-m, m]);
            m += step;
        }
        v
    }
}

/// Everything the tuner needs about one subframe, detached from the
/// decoder's stream position.
#[derive(Debug, Clone)]
pub struct TunerJob {
    /// Unwrapped subframe index.
    pub index: u64,
    /// Frequency-corrected samples around the subframe.
    pub samples: Vec<Complex64>,
    /// Position of the subframe's first sample inside `samples`.
    pub start: usize,
    pub report: SubframeReport,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TuneOutcome {
    pub dcis: Vec<Dci>,
    /// Deadline reached before the sweep finished.
    pub timed_out: bool,
    /// Locations still undecoded when the tuner stopped.
    pub remaining: Vec<CandidateLocation>,
    pub offsets_tried: usize,
    /// Location decode attempts, the unit of tuner work.
    pub location_attempts: usize,
    /// Offset at which each recovered message decoded.
    pub recovered_at: Vec<i64>,
}

struct Sweep<'a, O: ?Sized> {
    job: &'a TunerJob,
    base: ResourceGrid,
    oracle: &'a O,
    mode: DecodeMode,
    stop: Option<Instant>,
    out: TuneOutcome,
    pending: Vec<CandidateLocation>,
}

impl<O: RntiOracle + ?Sized> Sweep<'_, O> {
    fn expired(&self) -> bool {
        self.stop.is_some_and(|s| Instant::now() >= s)
    }

    /// Retries pending locations at one offset; returns the recoveries and
    /// the PCFICH metric there.
    fn try_offset(&mut self, dec: &mut ControlDecoder, ofdm: &mut Ofdm, offset: i64) -> Result<(usize, f64)> {
        let report = &self.job.report;
        let sf = report.subframe;
        let mut grid = self.base.clone();
        ofdm.demodulate_symbols(&self.job.samples, self.job.start, offset as isize, 0..report.cfi.symbols(), &mut grid)?;
        let est = dec.estimate(&grid, sf);
        let metric = cfi_decode(&grid, &dec.cfg, &est, sf).metric;
        let region = dec.region(&grid, &est, report.cfi, sf);
        self.out.offsets_tried += 1;
        let before = self.out.dcis.len();
        let mut i = 0;
        while i < self.pending.len() {
            if self.expired() {
                self.out.timed_out = true;
                return Ok((self.out.dcis.len() - before, metric));
            }
            let loc = self.pending[i];
            self.out.location_attempts += 1;
            let hit = dec.decode_location(&region, &loc, self.oracle, self.mode).map(|o| o.dci).filter(|d| {
                !report.dcis.iter().chain(&self.out.dcis).any(|e| e.location == d.location && e.rnti == d.rnti)
            });
            match hit {
                Some(mut d) => {
                    d.decode_path = DecodePath::Finetuner;
                    self.pending.retain(|p| !p.overlaps(&d.location));
                    self.out.dcis.push(d);
                    self.out.recovered_at.push(offset);
                }
                None => i += 1,
            }
        }
        Ok((self.out.dcis.len() - before, metric))
    }
}

/// Sweeps timing offsets over the report's uncertain locations.
pub fn finetune(
    job: &TunerJob,
    dec: &mut ControlDecoder,
    ofdm: &mut Ofdm,
    oracle: &(impl RntiOracle + ?Sized),
    mode: DecodeMode,
    cfg: &TunerConfig,
) -> Result<TuneOutcome> {
    // the clock is only read under a deadline, so unbounded runs also work
    // where no clock exists
    let stop = cfg.deadline.map(|d| Instant::now() + d);
    if job.report.uncertain.is_empty() {
        return Ok(TuneOutcome::default());
    }
    let mut base = ResourceGrid::new(&dec.cfg);
    ofdm.demodulate_symbols(&job.samples, job.start, 0, 0..SYMBOLS_PER_SUBFRAME, &mut base)?;
    let mut sw = Sweep {
        job,
        base,
        oracle,
        mode,
        stop,
        out: TuneOutcome::default(),
        pending: job.report.uncertain.clone(),
    };
    // refine around the offset that recovered most, the PCFICH metric
    // breaking ties; symbol-0 pilots share the control symbols' timing so
    // the metric alone is nearly flat
    let mut best = ((0usize, f64::MIN), 0i64);
    for off in cfg.offsets(&dec.cfg).into_iter().filter(|&o| o != 0) {
        if sw.pending.is_empty() {
            break;
        }
        if sw.expired() {
            sw.out.timed_out = true;
            break;
        }
        let (hits, metric) = sw.try_offset(dec, ofdm, off)?;
        if hits > best.0 .0 || (hits == best.0 .0 && metric > best.0 .1) {
            best = ((hits, metric), off);
        }
    }
    if cfg.refine && !sw.out.timed_out {
        for off in [best.1 - 1, best.1 + 1] {
            if sw.pending.is_empty() || off == 0 {
                continue;
            }
            if sw.expired() {
                sw.out.timed_out = true;
                break;
            }
            sw.try_offset(dec, ofdm, off)?;
        }
    }
    sw.out.remaining = sw.pending;
    Ok(sw.out)
}
