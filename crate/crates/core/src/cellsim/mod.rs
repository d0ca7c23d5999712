//! Synthetic cell: scheduled traffic with random access, the downlink
//! waveform carrying it, and the ground truth to score decoders against.

pub mod config;
pub mod impair;
pub mod sched;
pub mod synth;
pub mod truth;

use num_complex::Complex64;

pub use config::{Impairments, ScenarioConfig};
pub use impair::{inject_impairments, Impairer};
pub use sched::{plan, Plan, PlannedDci, SubframePlan};
pub use truth::{GroundTruth, RarTruth, SubframeTruth};

use crate::error::Result;
use crate::grid::{IqTrace, SampleSource, TraceMeta, TraceWriter};
use synth::Synthesizer;

/// Frame-by-frame generator; a 10-second trace never has to sit in memory.
pub struct Simulator {
    plan: Plan,
    synth: Synthesizer,
    impairer: Impairer,
    next_frame: usize,
    buf: Vec<Complex64>,
    pos: usize,
}

impl Simulator {
    pub fn new(s: &ScenarioConfig) -> Result<Self> {
        Ok(Simulator {
            plan: plan(s)?,
            synth: Synthesizer::new(s),
            impairer: Impairer::new(&s.impairments, &s.cfg, s.seed),
            next_frame: 0,
            buf: Vec::new(),
            pos: 0,
        })
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.plan.truth
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn frames(&self) -> usize {
        self.plan.subframes.len() / 10
    }

    /// Clean waveform of frame `f`.
    pub fn clean_frame(&mut self, f: usize, out: &mut Vec<Complex64>) -> Result<()> {
        for p in &self.plan.subframes[10 * f..10 * f + 10] {
            self.synth.modulate(p, out)?;
        }
        Ok(())
    }

    /// Appends the next impaired frame; false when the run is over.
    pub fn next_frame(&mut self, out: &mut Vec<Complex64>) -> Result<bool> {
        if self.next_frame >= self.frames() {
            return Ok(false);
        }
        let mut clean = Vec::with_capacity(self.synth.cfg().samples_per_frame());
        self.clean_frame(self.next_frame, &mut clean)?;
        self.impairer.frame(&clean, out);
        self.next_frame += 1;
        Ok(true)
    }
}

impl SampleSource for Simulator {
    fn read_chunk(&mut self, buf: &mut Vec<Complex64>, max: usize) -> Result<usize> {
        if self.pos == self.buf.len() {
            self.buf.clear();
            self.pos = 0;
            let mut tmp = std::mem::take(&mut self.buf);
            let more = self.next_frame(&mut tmp)?;
            self.buf = tmp;
            if !more {
                return Ok(0);
            }
        }
        let n = max.min(self.buf.len() - self.pos);
        buf.extend_from_slice(&self.buf[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }

    fn sample_rate(&self) -> f64 {
        self.synth.cfg().sample_rate()
    }
}

impl Simulator {
    /// Streams the whole run to a trace file (plus its metadata sidecar)
    /// and returns the ground truth.
    pub fn write_trace(mut self, path: &std::path::Path) -> Result<GroundTruth> {
        let cfg = *self.synth.cfg();
        let meta = TraceMeta {
            sample_rate_hz: cfg.sample_rate(),
            n_rb_dl: Some(cfg.n_rb_dl),
            pci: Some(cfg.pci),
        };
        let mut w = TraceWriter::create(path, &meta)?;
        let mut frame = Vec::with_capacity(cfg.samples_per_frame());
        while self.next_frame(&mut frame)? {
            w.write(&frame)?;
            frame.clear();
        }
        w.finish()?;
        Ok(self.plan.truth)
    }
}

/// Whole trace and ground truth in memory; for short scenarios.
pub fn generate(s: &ScenarioConfig) -> Result<(IqTrace, GroundTruth)> {
    let mut sim = Simulator::new(s)?;
    let mut samples = Vec::with_capacity(s.frames * s.cfg.samples_per_frame());
    while sim.next_frame(&mut samples)? {}
    let truth = sim.plan.truth.clone();
    Ok((IqTrace::new(samples, s.cfg.sample_rate())?, truth))
}
