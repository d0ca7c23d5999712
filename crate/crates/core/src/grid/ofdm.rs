//! OFDM modulation with normal cyclic prefix. Both directions use 1/sqrt(N)
//! scaling, so per-sample and per-RE noise variances coincide.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::trace::IqTrace;
use super::{CellConfig, ResourceGrid, SYMBOLS_PER_SLOT, SYMBOLS_PER_SUBFRAME};
use crate::error::{Error, Result};

/// Planned transforms plus scratch for one cell configuration.
pub struct Ofdm {
    cfg: CellConfig,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
    scale: f64,
}

impl Ofdm {
    pub fn new(cfg: &CellConfig) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(cfg.fft_size);
        let inv = planner.plan_fft_inverse(cfg.fft_size);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Ofdm {
            cfg: *cfg,
            fwd,
            inv,
            buf: vec![Complex64::default(); cfg.fft_size],
            scratch: vec![Complex64::default(); scratch_len],
            scale: 1.0 / (cfg.fft_size as f64).sqrt(),
        }
    }

    pub fn cfg(&self) -> &CellConfig {
        &self.cfg
    }

    /// Appends one subframe of samples (CPs included) to `out`.
    pub fn modulate_into(&mut self, grid: &ResourceGrid, out: &mut Vec<Complex64>) -> Result<()> {
        let n_sc = self.cfg.n_sc();
        if grid.n_sc() != n_sc {
            return Err(Error::Dimension {
                expected: n_sc,
                got: grid.n_sc(),
            });
        }
        let n = self.cfg.fft_size;
        for l in 0..SYMBOLS_PER_SUBFRAME {
            self.buf.iter_mut().for_each(|x| *x = Complex64::default());
            for (k, &v) in grid.symbol(l).iter().enumerate() {
                self.buf[self.cfg.fft_bin(k)] = v;
            }
            self.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
            let cp = self.cfg.cp_len(l % SYMBOLS_PER_SLOT);
            out.extend(self.buf[n - cp..].iter().map(|x| x * self.scale));
            out.extend(self.buf.iter().map(|x| x * self.scale));
        }
        Ok(())
    }

    /// Demodulates the useful part of one symbol starting at `samples[body]`
    /// into `row` (one value per subcarrier).
    pub fn demodulate_symbol(&mut self, samples: &[Complex64], body: usize, row: &mut [Complex64]) -> Result<()> {
        let n = self.cfg.fft_size;
        if body + n > samples.len() {
            return Err(Error::OutOfRange(format!(
                "symbol at {body} needs {n} samples, {} available",
                samples.len()
            )));
        }
        self.buf.copy_from_slice(&samples[body..body + n]);
        self.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (k, r) in row.iter_mut().enumerate() {
            *r = self.buf[self.cfg.fft_bin(k)] * self.scale;
        }
        Ok(())
    }

    /// Demodulates symbols `symbols` of the subframe starting at `start`,
    /// with every FFT window moved by `shift` samples.
    pub fn demodulate_symbols(
        &mut self,
        samples: &[Complex64],
        start: usize,
        shift: isize,
        symbols: std::ops::Range<usize>,
        grid: &mut ResourceGrid,
    ) -> Result<()> {
        for l in symbols {
            let body = (start + self.cfg.symbol_body(l)) as isize + shift;
            if body < 0 {
                return Err(Error::OutOfRange(format!("symbol {l} window starts before the trace")));
            }
            let row = grid.symbol_mut(l);
            self.demodulate_symbol(samples, body as usize, row)?;
        }
        Ok(())
    }

    pub fn demodulate_into(&mut self, samples: &[Complex64], start: usize, grid: &mut ResourceGrid) -> Result<()> {
        if start + self.cfg.samples_per_subframe() > samples.len() {
            return Err(Error::OutOfRange(format!(
                "subframe at {start} overruns {} samples",
                samples.len()
            )));
        }
        self.demodulate_symbols(samples, start, 0, 0..SYMBOLS_PER_SUBFRAME, grid)
    }
}

pub fn ofdm_modulate(grid: &ResourceGrid, cfg: &CellConfig) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(cfg.samples_per_subframe());
    Ofdm::new(cfg).modulate_into(grid, &mut out)?;
    Ok(out)
}

pub fn ofdm_demodulate(trace: &IqTrace, cfg: &CellConfig, subframe_start: usize) -> Result<ResourceGrid> {
    if (trace.sample_rate - cfg.sample_rate()).abs() > 1e-6 * cfg.sample_rate() {
        return Err(Error::Config(format!(
            "trace rate {} Hz does not match the cell's {} Hz",
            trace.sample_rate,
            cfg.sample_rate()
        )));
    }
    let mut grid = ResourceGrid::new(cfg);
    Ofdm::new(cfg).demodulate_into(&trace.samples, subframe_start, &mut grid)?;
    Ok(grid)
}
