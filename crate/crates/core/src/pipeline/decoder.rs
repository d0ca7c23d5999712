//! Streaming decoder: acquisition, per-frame timing tracking, the main
//! control-channel pass and RNTI list upkeep. Output depends only on the
//! sample stream, never on how it was chunked.

use num_complex::Complex64;

use crate::errlog::{ErrLog, EventKind};
use crate::error::{Error, Result};
use crate::grid::{CellConfig, Ofdm, ResourceGrid};
use crate::pdcch::decode::is_c_rnti;
use crate::pdcch::{ControlDecoder, DecodeMode, DecodePath, Direction, SubframeReport};
use crate::sync::detect::correct_cfo;
use crate::sync::{acquire, resync_check, PssCorrelator, ResyncOutcome, SyncState};
use crate::tracker::{decode_rar, Origin, RntiTracker, EXT_PERIOD};
use crate::tuner::TunerJob;
use crate::verifier::{measure_subframe, RbPower};

/// Samples kept on each side of a subframe handed to the tuner.
pub const TUNER_MARGIN: usize = 64;
/// Frames buffered before the first cell search.
const ACQUIRE_FRAMES: usize = 3;
/// Failed searches tolerated before giving up on the stream.
const ACQUIRE_ATTEMPTS: usize = 20;

#[derive(Debug, Clone)]
pub struct DecoderOptions {
    pub mode: DecodeMode,
    /// Keep tuner jobs for subframes with uncertain locations.
    pub tuner_jobs: bool,
    /// Measure shared-channel power per block.
    pub measure_power: bool,
    /// Warm-start RNTI list text, admitted once the cell is found.
    pub warmstart: Option<String>,
}

impl Default for DecoderOptions {
    fn default() -> Self {
        DecoderOptions {
            mode: DecodeMode::Owl,
            tuner_jobs: true,
            measure_power: false,
            warmstart: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecodedSubframe {
    /// Unwrapped subframe index.
    pub index: u64,
    pub report: SubframeReport,
    pub power: Option<Vec<RbPower>>,
    pub job: Option<TunerJob>,
    /// RNTI list at decode time, for the tuner.
    pub rntis: Option<std::collections::BTreeSet<u16>>,
}

struct Cell {
    cfg: CellConfig,
    ng_sixths: usize,
    state: SyncState,
    dec: ControlDecoder,
    ofdm: Ofdm,
    corr: PssCorrelator,
    /// The frame right after acquisition needs no timing check.
    fresh: bool,
}

pub struct StreamDecoder {
    opts: DecoderOptions,
    sample_rate: f64,
    buf: Vec<Complex64>,
    /// Absolute index of `buf[0]`.
    base: u64,
    cell: Option<Cell>,
    last_cell: Option<(CellConfig, usize)>,
    failed_searches: usize,
    tracker: RntiTracker,
    /// First-time admissions with unwrapped time.
    admissions: Vec<(u64, u16, Origin)>,
    next_index: Option<u64>,
    pub log: ErrLog,
    pub subframes: u64,
}

impl StreamDecoder {
    pub fn new(sample_rate: f64, opts: DecoderOptions) -> Self {
        StreamDecoder {
            opts,
            sample_rate,
            buf: Vec::new(),
            base: 0,
            cell: None,
            last_cell: None,
            failed_searches: 0,
            tracker: RntiTracker::new(),
            admissions: Vec::new(),
            next_index: None,
            log: ErrLog::new(),
            subframes: 0,
        }
    }

    /// Cell configuration and PHICH size once acquired.
    pub fn cell(&self) -> Option<(CellConfig, usize)> {
        self.last_cell
    }

    pub fn tracker(&self) -> &RntiTracker {
        &self.tracker
    }

    pub fn admissions(&self) -> &[(u64, u16, Origin)] {
        &self.admissions
    }

    pub fn push(&mut self, samples: &[Complex64], out: &mut Vec<DecodedSubframe>) -> Result<()> {
        self.buf.extend_from_slice(samples);
        self.run(false, out)
    }

    /// Flushes whatever complete frames remain.
    pub fn finish(&mut self, out: &mut Vec<DecodedSubframe>) -> Result<()> {
        let pad = 2 * TUNER_MARGIN + self.last_cell.map_or(2048, |(c, _)| c.fft_size);
        self.buf.extend(std::iter::repeat_n(Complex64::default(), pad));
        let r = self.run(true, out);
        self.buf.clear();
        r
    }

    fn run(&mut self, ended: bool, out: &mut Vec<DecodedSubframe>) -> Result<()> {
        loop {
            if self.cell.is_none() {
                if !self.search(ended)? {
                    return Ok(());
                }
                continue;
            }
            if !self.frame(out)? {
                return Ok(());
            }
        }
    }

    /// One cell search attempt; false when more samples are needed.
    fn search(&mut self, ended: bool) -> Result<bool> {
        let spf = crate::sync::detect::fft_size_for(self.sample_rate).map(|n| 150 * n)?;
        if self.buf.len() < ACQUIRE_FRAMES * spf && !ended {
            return Ok(false);
        }
        if ended && self.buf.len() < spf {
            return match self.next_index {
                None => Err(Error::NoCell { quality: 0.0 }),
                Some(_) => Ok(false),
            };
        }
        match acquire(&self.buf, self.sample_rate, self.base) {
            Ok(acq) => {
                let ng = acq.mib.mib.phich_ng_sixths();
                let index = match self.next_index {
                    None => u64::from(acq.state.sfn) * 10,
                    Some(prev) => {
                        let delta = (u64::from(acq.state.sfn) * 10 + 10_240 - prev % 10_240) % 10_240;
                        self.log.push(acq.state.abs_sf(0), EventKind::Reacquired, format!("sfn {}", acq.state.sfn));
                        prev + delta
                    }
                };
                if self.next_index.is_none() {
                    if let Some(text) = self.opts.warmstart.take() {
                        self.tracker.load_warmstart_str(&text, (index % u64::from(EXT_PERIOD)) as u32)?;
                    }
                }
                self.next_index = Some(index);
                self.failed_searches = 0;
                self.last_cell = Some((acq.cfg, ng));
                self.cell = Some(Cell {
                    cfg: acq.cfg,
                    ng_sixths: ng,
                    state: acq.state,
                    dec: ControlDecoder::new(&acq.cfg, ng),
                    ofdm: Ofdm::new(&acq.cfg),
                    corr: PssCorrelator::new(acq.cfg.fft_size),
                    fresh: true,
                });
                Ok(true)
            }
            Err(e) => {
                self.failed_searches += 1;
                if self.next_index.is_none() && (ended || self.failed_searches >= ACQUIRE_ATTEMPTS) {
                    return Err(e);
                }
                if ended {
                    return Ok(false);
                }
                // slide by one frame and retry
                let drop = spf.min(self.buf.len());
                self.buf.drain(..drop);
                self.base += drop as u64;
                Ok(self.buf.len() >= ACQUIRE_FRAMES * spf)
            }
        }
    }

    /// Decodes the current frame; false when more samples are needed.
    fn frame(&mut self, out: &mut Vec<DecodedSubframe>) -> Result<bool> {
        let cell = self.cell.as_mut().expect("acquired");
        let cfg = cell.cfg;
        let n = cfg.fft_size;
        let spf = cfg.samples_per_frame();
        let spsf = cfg.samples_per_subframe();
        let end = self.base + self.buf.len() as u64;
        // look-ahead for the timing window, the frame and the tuner margin
        let need = cell.state.frame_start + (spf + n + 2 * TUNER_MARGIN) as u64;
        if need > end {
            return Ok(false);
        }
        if !cell.fresh {
            let outcome = resync_check(&mut cell.state, &self.buf, self.base, &cfg, &mut cell.corr, &mut self.log);
            if outcome == ResyncOutcome::Lost {
                self.cell = None;
                let keep_from = cell_keep_from(&self.buf, self.base, spf);
                self.trim(keep_from);
                return Ok(true);
            }
        }
        let cell = self.cell.as_mut().expect("acquired");
        cell.fresh = false;
        let fs = cell.state.frame_start;
        if fs + (spf + TUNER_MARGIN) as u64 > end {
            return Ok(false);
        }
        // samples before the stream start (first frame at offset 0) read as zeros
        let want = fs as i64 - TUNER_MARGIN as i64;
        let pad = (self.base as i64 - want).max(0) as usize;
        let lo = (want + pad as i64 - self.base as i64) as usize;
        let mut x = vec![Complex64::default(); pad];
        x.extend_from_slice(&self.buf[lo..lo + spf + 2 * TUNER_MARGIN - pad]);
        correct_cfo(&mut x[pad..], cell.state.cfo_hz, self.sample_rate, self.base + lo as u64);
        let mut grid = ResourceGrid::new(&cfg);
        let mut index = self.next_index.expect("set at acquisition");
        for sf in 0..10 {
            let start = TUNER_MARGIN + sf * spsf;
            cell.ofdm.demodulate_into(&x, start, &mut grid)?;
            let now = (index % u64::from(EXT_PERIOD)) as u32;
            let report = cell.dec.decode_subframe(&grid, cell.state.sfn, sf, &self.tracker, self.opts.mode, &mut self.log);
            let rntis = (self.opts.tuner_jobs && !report.uncertain.is_empty()).then(|| self.tracker.snapshot());
            let mut est = None;
            for d in &report.dcis {
                match d.decode_path {
                    DecodePath::ListMatch => self.tracker.touch(d.rnti, now),
                    DecodePath::RaRnti if d.direction == Direction::Downlink => {
                        let est = est.get_or_insert_with(|| cell.dec.estimate(&grid, sf));
                        match decode_rar(&grid, est, &cfg, report.cfi.symbols(), sf, d) {
                            Ok(msg) if is_c_rnti(msg.temp_crnti) => {
                                if self.tracker.get(msg.temp_crnti).is_none() {
                                    self.admissions.push((index, msg.temp_crnti, Origin::Rar));
                                }
                                self.tracker.admit(msg.temp_crnti, Origin::Rar, now)?;
                            }
                            Ok(msg) => self.log.push(report.abs_sf(), EventKind::RarSkipped, format!("identity {:04x} out of range", msg.temp_crnti)),
                            Err(e) => self.log.push(report.abs_sf(), EventKind::RarCrcError, format!("{:04x}: {e}", d.rnti)),
                        }
                    }
                    DecodePath::Reencode if is_c_rnti(d.rnti) => {
                        if self.tracker.get(d.rnti).is_none() {
                            self.admissions.push((index, d.rnti, Origin::Reencode));
                        }
                        self.tracker.admit(d.rnti, Origin::Reencode, now)?;
                    }
                    _ => {}
                }
            }
            self.tracker.expire(now);
            let power = self.opts.measure_power.then(|| measure_subframe(&grid, &cfg, report.cfi.symbols(), sf));
            let job = rntis.as_ref().map(|_| TunerJob {
                index,
                samples: x[start - TUNER_MARGIN..start + spsf + TUNER_MARGIN].to_vec(),
                start: TUNER_MARGIN,
                report: report.clone(),
            });
            out.push(DecodedSubframe {
                index,
                report,
                power,
                job,
                rntis,
            });
            index += 1;
            self.subframes += 1;
        }
        self.next_index = Some(index);
        cell.state.advance(spf);
        let keep = cell.state.frame_start.saturating_sub((n + 2 * TUNER_MARGIN) as u64);
        self.trim(keep);
        Ok(true)
    }

    fn trim(&mut self, keep_from: u64) {
        if keep_from > self.base {
            let d = ((keep_from - self.base) as usize).min(self.buf.len());
            self.buf.drain(..d);
            self.base += d as u64;
        }
    }

    pub fn ng_sixths(&self) -> Option<usize> {
        self.cell.as_ref().map(|c| c.ng_sixths)
    }
}

/// After a loss, restart the search one frame before the current end.
fn cell_keep_from(buf: &[Complex64], base: u64, spf: usize) -> u64 {
    (base + buf.len() as u64).saturating_sub(spf as u64 * 2)
}
