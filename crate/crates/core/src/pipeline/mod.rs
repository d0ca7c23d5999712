//! Record → decode → fine-tune flow over trace segments, plus the
//! monolithic equivalent, mode comparison and log analytics.

pub mod decoder;
pub mod stats;

use std::sync::mpsc::{sync_channel, TrySendError};
use std::time::{Duration, Instant};

use num_complex::Complex64;

pub use decoder::{DecodedSubframe, DecoderOptions, StreamDecoder};
pub use stats::{stats, stats_csv, StatsRow};

use crate::dcilog::DciLogRecord;
use crate::errlog::{ErrLog, EventKind};
use crate::error::{Error, Result};
use crate::grid::{CellConfig, Ofdm, SampleSource};
use crate::pdcch::{ControlDecoder, DecodeMode};
use crate::tracker::Origin;
use crate::tuner::{finetune, TunerConfig};
use crate::verifier::{detection_stats, DetectionStats, PowerMap};

/// Samples pulled from a source per read.
const READ_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Segment buffers in rotation: reader, decoder and at least one tuner.
    pub k: usize,
    pub segment_s: f64,
    /// Tuner budget per segment; `None` = unbounded. At most
    /// `(k - 2) * segment_s`.
    pub finetune_deadline: Option<Duration>,
    pub finetune: bool,
    pub mode: DecodeMode,
    pub measure_power: bool,
    pub warmstart: Option<String>,
    /// Reader never waits: a full hand-off drops the segment.
    pub live: bool,
    pub tuner: TunerConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 4,
            segment_s: 0.5,
            finetune_deadline: None,
            finetune: true,
            mode: DecodeMode::Owl,
            measure_power: false,
            warmstart: None,
            live: false,
            tuner: TunerConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::Config(format!("k = {} (need reader, decoder and a tuner slot)", self.k)));
        }
        if !(self.segment_s > 0.0) {
            return Err(Error::Config(format!("segment length {} s", self.segment_s)));
        }
        if let Some(d) = self.finetune_deadline {
            let bound = (self.k - 2) as f64 * self.segment_s;
            if d.as_secs_f64() > bound + 1e-9 {
                return Err(Error::Config(format!("tuner deadline {d:?} above (k-2) x segment = {bound} s")));
            }
        }
        Ok(())
    }

    /// The longest deadline the buffer rotation allows.
    pub fn max_deadline(&self) -> Duration {
        Duration::from_secs_f64((self.k.saturating_sub(2)) as f64 * self.segment_s)
    }

    fn decoder_options(&self) -> DecoderOptions {
        DecoderOptions {
            mode: self.mode,
            tuner_jobs: self.finetune,
            measure_power: self.measure_power,
            warmstart: self.warmstart.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub segments: usize,
    pub subframes: u64,
    pub main_dcis: usize,
    pub tuner_dcis: usize,
    /// Uncertain locations left by the main pass.
    pub uncertain_locations: usize,
    /// Uncertain locations abandoned at a tuner deadline.
    pub lost_locations: usize,
    pub tuner_timeouts: usize,
    pub tuner_location_attempts: usize,
    pub tuner_offsets: usize,
    pub overruns: usize,
}

#[derive(Debug, Clone, Default)]
pub struct DecodeOutput {
    /// Time ordered, then by CCE.
    pub records: Vec<DciLogRecord>,
    pub log: ErrLog,
    pub power: Option<PowerMap>,
    /// Union of decoded downlink allocations per subframe, kept with power.
    pub decoded_rbs: std::collections::BTreeMap<u64, u128>,
    pub admissions: Vec<(u64, u16, Origin)>,
    pub cell: Option<CellConfig>,
    pub summary: RunSummary,
}

impl DecodeOutput {
    pub fn detection(&self) -> Option<DetectionStats> {
        let power = self.power.as_ref()?;
        let mut per_sf = std::collections::HashMap::<u64, u32>::new();
        for r in &self.records {
            if r.direction == crate::pdcch::Direction::Downlink {
                *per_sf.entry(r.index).or_default() += u32::from(r.n_rb);
            }
        }
        Some(detection_stats(power, |i| per_sf.get(&i).copied().unwrap_or(0)))
    }

    /// Occupied blocks no decoded allocation accounts for, per subframe.
    pub fn unexplained(&self) -> Option<std::collections::BTreeMap<u64, u128>> {
        let power = self.power.as_ref()?;
        Some(
            power
                .rows
                .keys()
                .map(|&i| (i, power.occupied(i) & !self.decoded_rbs.get(&i).copied().unwrap_or(0)))
                .collect(),
        )
    }
}

/// Tuner stage state: one decoder instance of its own.
struct TunerStage {
    cfg: TunerConfig,
    mode: DecodeMode,
    engine: Option<(ControlDecoder, Ofdm)>,
    log: ErrLog,
}

impl TunerStage {
    fn new(cfg: TunerConfig, mode: DecodeMode) -> Self {
        TunerStage {
            cfg,
            mode,
            engine: None,
            log: ErrLog::new(),
        }
    }

    /// Finalises a batch of decoded subframes, fine-tuning until `stop`.
    fn process(
        &mut self,
        batch: Vec<DecodedSubframe>,
        cell: Option<(CellConfig, usize)>,
        stop: Option<Instant>,
        out: &mut DecodeOutput,
    ) -> Result<()> {
        let mut timed_out = false;
        for sub in batch {
            let mut dcis = sub.report.dcis.clone();
            out.summary.subframes += 1;
            out.summary.main_dcis += dcis.len();
            out.summary.uncertain_locations += sub.report.uncertain.len();
            if let (Some(power), Some(row)) = (out.power.as_mut(), sub.power) {
                power.n_rb = row.len();
                power.insert(sub.index, row);
            }
            if let (Some(job), Some(rntis), Some((cfg, ng))) = (&sub.job, &sub.rntis, cell) {
                let left = stop.map(|s| s.saturating_duration_since(Instant::now()));
                if left.is_some_and(|l| l.is_zero()) {
                    timed_out = true;
                    out.summary.lost_locations += job.report.uncertain.len();
                    self.log.push(sub.report.abs_sf(), EventKind::Lost, format!("{} uncertain locations", job.report.uncertain.len()));
                } else {
                    let (dec, ofdm) = self.engine.get_or_insert_with(|| (ControlDecoder::new(&cfg, ng), Ofdm::new(&cfg)));
                    let tcfg = TunerConfig {
                        deadline: left,
                        ..self.cfg.clone()
                    };
                    let r = finetune(job, dec, ofdm, rntis, self.mode, &tcfg)?;
                    out.summary.tuner_location_attempts += r.location_attempts;
                    out.summary.tuner_offsets += r.offsets_tried;
                    out.summary.tuner_dcis += r.dcis.len();
                    if r.timed_out {
                        timed_out = true;
                        out.summary.lost_locations += r.remaining.len();
                        self.log.push(sub.report.abs_sf(), EventKind::Lost, format!("{} uncertain locations", r.remaining.len()));
                    }
                    dcis.extend(r.dcis);
                }
            }
            dcis.sort_by_key(|d| d.location.cce_start);
            if out.power.is_some() {
                let mask = dcis.iter().filter(|d| d.direction == crate::pdcch::Direction::Downlink).fold(0, |m, d| m | d.rbs);
                out.decoded_rbs.insert(sub.index, mask);
            }
            let cfi = sub.report.cfi.value();
            out.records.extend(dcis.iter().map(|d| DciLogRecord::from_dci(sub.index, d, cfi)));
        }
        if timed_out {
            out.summary.tuner_timeouts += 1;
            self.log.push(0, EventKind::TunerTimeout, format!("segment {}", out.summary.segments));
        }
        out.summary.segments += 1;
        Ok(())
    }
}

fn new_output(pcfg: &PipelineConfig) -> DecodeOutput {
    DecodeOutput {
        power: pcfg.measure_power.then(|| PowerMap::new(0)),
        ..DecodeOutput::default()
    }
}

fn finish_output(out: &mut DecodeOutput, dec: &StreamDecoder, tuner_log: ErrLog) {
    out.cell = dec.cell().map(|(c, _)| c);
    if let (Some(p), Some(c)) = (out.power.as_mut(), out.cell) {
        p.n_rb = c.n_rb_dl;
    }
    out.admissions = dec.admissions().to_vec();
    out.log.extend(dec.log.clone());
    out.log.extend(tuner_log);
}

/// Single pass over the whole source: every subframe decoded, then each
/// fine-tuned without a deadline as soon as it is available.
pub fn decode_monolithic<S: SampleSource + ?Sized>(source: &mut S, pcfg: &PipelineConfig) -> Result<DecodeOutput> {
    let mut dec = StreamDecoder::new(source.sample_rate(), pcfg.decoder_options());
    let mut tuner = TunerStage::new(pcfg.tuner.clone(), pcfg.mode);
    let mut out = new_output(pcfg);
    let mut buf = Vec::with_capacity(READ_CHUNK);
    let mut batch = Vec::new();
    loop {
        buf.clear();
        let n = source.read_chunk(&mut buf, READ_CHUNK)?;
        if n == 0 {
            dec.finish(&mut batch)?;
        } else {
            dec.push(&buf, &mut batch)?;
        }
        let cell = dec.cell();
        tuner.process(std::mem::take(&mut batch), cell, None, &mut out)?;
        if n == 0 {
            break;
        }
    }
    out.summary.segments = 1;
    finish_output(&mut out, &dec, tuner.log);
    Ok(out)
}

struct Segment {
    samples: Vec<Complex64>,
    last: bool,
}

/// Segmented pipeline. The reader fills segment buffers, the decoder
/// consumes them in order and hands each segment's subframes to the tuner,
/// which may overrun into the following segments up to its deadline.
pub fn run_pipeline<S: SampleSource + ?Sized>(source: &mut S, pcfg: &PipelineConfig) -> Result<DecodeOutput> {
    pcfg.validate()?;
    let rate = source.sample_rate();
    let seg_len = ((pcfg.segment_s * rate).round() as usize).max(1);
    // k buffers: one filling, one decoding, the rest queued or tuning
    let (seg_tx, seg_rx) = sync_channel::<Segment>(1);
    let (job_tx, job_rx) = sync_channel::<(Vec<DecodedSubframe>, Option<(CellConfig, usize)>)>(pcfg.k - 2);
    let dopts = pcfg.decoder_options();
    let tcfg = pcfg.tuner.clone();
    let mode = pcfg.mode;
    let deadline = if pcfg.finetune { pcfg.finetune_deadline } else { Some(Duration::ZERO) };
    let mut overruns = 0usize;

    std::thread::scope(|scope| -> Result<DecodeOutput> {
        let decoder = scope.spawn(move || -> Result<StreamDecoder> {
            let mut dec = StreamDecoder::new(rate, dopts);
            for seg in seg_rx {
                let mut batch = Vec::new();
                for chunk in seg.samples.chunks(READ_CHUNK) {
                    dec.push(chunk, &mut batch)?;
                }
                if seg.last {
                    dec.finish(&mut batch)?;
                }
                if job_tx.send((batch, dec.cell())).is_err() {
                    break;
                }
            }
            Ok(dec)
        });
        let mut out = new_output(pcfg);
        let tuner = scope.spawn(move || -> Result<(DecodeOutput, ErrLog)> {
            let mut stage = TunerStage::new(tcfg, mode);
            for (batch, cell) in job_rx {
                let stop = deadline.map(|d| Instant::now() + d);
                stage.process(batch, cell, stop, &mut out)?;
            }
            Ok((out, stage.log))
        });

        let mut reader_err = None;
        loop {
            let mut samples = Vec::with_capacity(seg_len);
            while samples.len() < seg_len {
                let want = (seg_len - samples.len()).min(READ_CHUNK);
                match source.read_chunk(&mut samples, want) {
                    Ok(0) => break,
                    Ok(_) => {}
                    Err(e) => {
                        reader_err = Some(e);
                        break;
                    }
                }
            }
            // a short read ends the stream; the final segment carries the flush
            let last = samples.len() < seg_len;
            let seg = Segment { samples, last };
            let sent = if pcfg.live && !last {
                match seg_tx.try_send(seg) {
                    Ok(()) => true,
                    Err(TrySendError::Full(_)) => {
                        overruns += 1;
                        true
                    }
                    Err(TrySendError::Disconnected(_)) => false,
                }
            } else {
                seg_tx.send(seg).is_ok()
            };
            if last || !sent {
                break;
            }
        }
        drop(seg_tx);
        let dec = decoder.join().map_err(|_| Error::Config("decoder stage panicked".into()))??;
        let (mut out, tlog) = tuner.join().map_err(|_| Error::Config("tuner stage panicked".into()))??;
        if let Some(e) = reader_err {
            return Err(e);
        }
        out.summary.overruns = overruns;
        for _ in 0..overruns {
            out.log.push(0, EventKind::Overrun, "segment dropped");
        }
        finish_output(&mut out, &dec, tlog);
        Ok(out)
    })
}

/// Owl-mode and re-encode-only runs over the same input.
#[derive(Debug, Clone)]
pub struct ModeComparison {
    pub owl: DetectionStats,
    pub lteye: DetectionStats,
}

impl ModeComparison {
    /// Per-frame `(owl ratio, lteye ratio)` for frames with traffic.
    pub fn frame_pairs(&self) -> Vec<(u64, f64, f64)> {
        self.owl
            .frames
            .iter()
            .zip(&self.lteye.frames)
            .filter_map(|(a, b)| Some((a.frame, a.ratio()?, b.ratio()?)))
            .collect()
    }

    /// Frames where owl decoded fewer blocks, and where it decoded more.
    pub fn worse_better(&self) -> (usize, usize) {
        let p = self.frame_pairs();
        (p.iter().filter(|(_, a, b)| a < b).count(), p.iter().filter(|(_, a, b)| a > b).count())
    }

    /// Histogram of per-frame owl/lteye ratios in bins of 0.05 from 1.0.
    pub fn ratio_histogram(&self) -> Vec<(f64, usize)> {
        let mut bins = std::collections::BTreeMap::<i64, usize>::new();
        for (_, a, b) in self.frame_pairs() {
            if b > 0.0 {
                *bins.entry(((a / b - 1.0) / 0.05).floor() as i64).or_default() += 1;
            }
        }
        bins.into_iter().map(|(k, v)| (1.0 + k as f64 * 0.05, v)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame,owl_ratio,lteye_ratio\n");
        for f in self.owl.frames.iter().zip(&self.lteye.frames) {
            let r = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
            s += &format!("{},{},{}\n", f.0.frame, r(f.0.ratio()), r(f.1.ratio()));
        }
        s
    }
}

/// Runs both modes over fresh sources from `open` and compares per-frame
/// detection against the measured power. The re-encode-only baseline runs
/// without fine-tuning.
pub fn compare_modes<S: SampleSource, F: FnMut() -> Result<S>>(mut open: F, pcfg: &PipelineConfig) -> Result<ModeComparison> {
    let run = |mode: DecodeMode, src: &mut S| {
        let cfg = PipelineConfig {
            mode,
            measure_power: true,
            finetune: pcfg.finetune && mode == DecodeMode::Owl,
            ..pcfg.clone()
        };
        decode_monolithic(src, &cfg)
    };
    let owl = run(DecodeMode::Owl, &mut open()?)?;
    let lteye = run(DecodeMode::Lteye, &mut open()?)?;
    let stats = |o: &DecodeOutput| o.detection().ok_or_else(|| Error::Config("no power map".into()));
    Ok(ModeComparison {
        owl: stats(&owl)?,
        lteye: stats(&lteye)?,
    })
}
