//! Stream impairments: timing shifts and drift, carrier offset and AWGN.

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::SeedableRng;

use super::config::Impairments;
use super::synth::sub_seed;
use crate::coding::qpsk::complex_noise;
use crate::error::Result;
use crate::grid::{CellConfig, IqTrace};

/// Applies impairments frame by frame, so a stream and a whole trace give
/// identical output.
#[derive(Debug, Clone)]
pub struct Impairer {
    imp: Impairments,
    sample_rate: f64,
    noise_var: Option<f64>,
    seed: u64,
    frame: usize,
    out_index: u64,
    drift_acc: f64,
}

impl Impairer {
    pub fn new(imp: &Impairments, cfg: &CellConfig, seed: u64) -> Self {
        Impairer {
            imp: imp.clone(),
            sample_rate: cfg.sample_rate(),
            noise_var: imp.snr_db.map(|s| 10f64.powf(-s / 10.0)),
            seed,
            frame: 0,
            out_index: 0,
            drift_acc: 0.0,
        }
    }

    /// Samples inserted (positive) or removed (negative) before frame `f`.
    fn shift_before(&mut self, f: usize) -> i64 {
        let mut s: i64 = self.imp.shifts.iter().filter(|(at, _)| *at == f).map(|(_, d)| d).sum();
        if f > 0 {
            self.drift_acc += self.imp.drift_per_frame;
            let step = self.drift_acc.trunc();
            self.drift_acc -= step;
            s += step as i64;
        }
        s
    }

    /// Impairs the next clean frame (or final partial frame).
    pub fn frame(&mut self, clean: &[Complex64], out: &mut Vec<Complex64>) {
        let shift = self.shift_before(self.frame);
        let mut rng = StdRng::seed_from_u64(sub_seed(self.seed, 2, self.frame as u64));
        self.frame += 1;
        let pad = shift.max(0) as usize;
        let skip = ((-shift).max(0) as usize).min(clean.len());
        let w = 2.0 * std::f64::consts::PI * self.imp.cfo_hz / self.sample_rate;
        let zeros = std::iter::repeat_n(Complex64::default(), pad);
        for x in zeros.chain(clean[skip..].iter().copied()) {
            let mut y = x;
            if w != 0.0 {
                y *= Complex64::from_polar(1.0, w * self.out_index as f64);
            }
            if let Some(v) = self.noise_var {
                y += complex_noise(&mut rng, v);
            }
            out.push(y);
            self.out_index += 1;
        }
    }
}

/// Applies `imp` to a whole trace taken to start on a frame boundary.
/// Interference and control-symbol offsets live in the resource grid and
/// are applied during generation instead.
pub fn inject_impairments(trace: &IqTrace, cfg: &CellConfig, imp: &Impairments, seed: u64) -> Result<IqTrace> {
    let mut im = Impairer::new(imp, cfg, seed);
    let mut out = Vec::with_capacity(trace.len());
    for chunk in trace.samples.chunks(cfg.samples_per_frame()) {
        im.frame(chunk, &mut out);
    }
    IqTrace::new(out, trace.sample_rate)
}
