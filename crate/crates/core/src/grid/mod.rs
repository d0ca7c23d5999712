//! Time-frequency lattice, cell configuration and OFDM (de)modulation.

pub mod chest;
pub mod crs;
pub mod ofdm;
pub mod pdsch;
pub mod trace;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use crs::{crs_positions, CrsTable};
pub use chest::ChannelEstimate;
pub use ofdm::{ofdm_demodulate, ofdm_modulate, Ofdm};
pub use trace::{read_trace, write_trace, FileSource, IqTrace, MemorySource, SampleSource, TraceMeta, TraceWriter};

pub const SUBCARRIERS_PER_RB: usize = 12;
pub const SYMBOLS_PER_SLOT: usize = 7;
pub const SYMBOLS_PER_SUBFRAME: usize = 14;
pub const SUBFRAMES_PER_FRAME: usize = 10;
pub const SFN_PERIOD: u32 = 1024;
/// Absolute subframe counter period: 1024 frames of 10 subframes.
pub const ABS_SF_PERIOD: u32 = 10_240;
pub const SUBCARRIER_SPACING_HZ: f64 = 15_000.0;
pub const VALID_N_RB: [usize; 6] = [6, 15, 25, 50, 75, 100];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellConfig {
    pub n_rb_dl: usize,
    pub pci: u16,
    pub n_ports: usize,
    pub fft_size: usize,
}

impl CellConfig {
    pub fn new(n_rb_dl: usize, pci: u16, n_ports: usize, fft_size: usize) -> Result<Self> {
        let cfg = CellConfig {
            n_rb_dl,
            pci,
            n_ports,
            fft_size,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Standard transform size for a bandwidth (e.g. 512 for 25 RBs).
    pub fn with_default_fft(n_rb_dl: usize, pci: u16, n_ports: usize) -> Result<Self> {
        let fft = match n_rb_dl {
            6 => 128,
            15 => 256,
            25 => 512,
            50 => 1024,
            75 => 1536,
            100 => 2048,
            other => return Err(Error::Config(format!("unsupported bandwidth {other} RBs"))),
        };
        Self::new(n_rb_dl, pci, n_ports, fft)
    }

    /// Derives the transform size from a sample rate; the rate must be an
    /// integral multiple of 15 kHz, which covers the 3/4-rate captures.
    pub fn from_sample_rate(n_rb_dl: usize, pci: u16, n_ports: usize, sample_rate: f64) -> Result<Self> {
        let n = sample_rate / SUBCARRIER_SPACING_HZ;
        if (n - n.round()).abs() > 1e-6 || n < 1.0 {
            return Err(Error::Config(format!(
                "sample rate {sample_rate} Hz is not an integral multiple of 15 kHz"
            )));
        }
        Self::new(n_rb_dl, pci, n_ports, n.round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !VALID_N_RB.contains(&self.n_rb_dl) {
            return Err(Error::Config(format!("n_rb_dl {} not in {VALID_N_RB:?}", self.n_rb_dl)));
        }
        if self.pci > 503 {
            return Err(Error::Config(format!("pci {} > 503", self.pci)));
        }
        if !(1..=2).contains(&self.n_ports) {
            return Err(Error::Config(format!("{} antenna ports (1 or 2 supported)", self.n_ports)));
        }
        if self.fft_size < self.n_sc() + 1 {
            return Err(Error::Config(format!(
                "fft_size {} too small for {} subcarriers",
                self.fft_size,
                self.n_sc()
            )));
        }
        // normal-CP lengths 160/144 at 2048 must scale to whole samples
        if !self.fft_size.is_multiple_of(128) {
            return Err(Error::Config(format!(
                "fft_size {} does not give integral cyclic prefixes",
                self.fft_size
            )));
        }
        Ok(())
    }

    pub fn n_sc(&self) -> usize {
        self.n_rb_dl * SUBCARRIERS_PER_RB
    }

    pub fn n_id_1(&self) -> u16 {
        self.pci / 3
    }

    pub fn n_id_2(&self) -> u16 {
        self.pci % 3
    }

    pub fn sample_rate(&self) -> f64 {
        self.fft_size as f64 * SUBCARRIER_SPACING_HZ
    }

    /// True when the rate is below the standard rate for the bandwidth.
    pub fn is_fractional_rate(&self) -> bool {
        Self::with_default_fft(self.n_rb_dl, self.pci, self.n_ports)
            .map(|d| d.fft_size != self.fft_size)
            .unwrap_or(false)
    }

    pub fn cp_len(&self, symbol_in_slot: usize) -> usize {
        if symbol_in_slot == 0 {
            160 * self.fft_size / 2048
        } else {
            144 * self.fft_size / 2048
        }
    }

    pub fn samples_per_subframe(&self) -> usize {
        15 * self.fft_size
    }

    pub fn samples_per_frame(&self) -> usize {
        10 * self.samples_per_subframe()
    }

    /// Offset of symbol `l` (0..14, including its CP) from the subframe start.
    pub fn symbol_start(&self, l: usize) -> usize {
        let slot = l / SYMBOLS_PER_SLOT;
        let mut off = slot * self.samples_per_subframe() / 2;
        for s in 0..l % SYMBOLS_PER_SLOT {
            off += self.cp_len(s) + self.fft_size;
        }
        off
    }

    /// Offset of the useful part (after the CP) of symbol `l`.
    pub fn symbol_body(&self, l: usize) -> usize {
        self.symbol_start(l) + self.cp_len(l % SYMBOLS_PER_SLOT)
    }

    /// FFT bin carrying subcarrier `k`; DC stays empty.
    pub fn fft_bin(&self, k: usize) -> usize {
        let half = self.n_sc() / 2;
        if k < half {
            self.fft_size - half + k
        } else {
            k - half + 1
        }
    }
}

/// Position of a resource element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridIndex {
    pub sfn: u16,
    pub subframe: u8,
    pub slot: u8,
    pub symbol: u8,
    pub subcarrier: u16,
}

impl GridIndex {
    /// Symbol index within the subframe (0..14).
    pub fn subframe_symbol(&self) -> usize {
        self.slot as usize * SYMBOLS_PER_SLOT + self.symbol as usize
    }
}

/// 10 * sfn + subframe, wrapped to the counter period.
pub fn abs_sf(sfn: u32, subframe: u32) -> u32 {
    (10 * sfn + subframe) % ABS_SF_PERIOD
}

/// One subframe of resource elements, `n_sc` subcarriers by 14 symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    n_sc: usize,
    cells: Vec<Complex64>,
}

impl ResourceGrid {
    pub fn new(cfg: &CellConfig) -> Self {
        Self::with_subcarriers(cfg.n_sc())
    }

    pub fn with_subcarriers(n_sc: usize) -> Self {
        ResourceGrid {
            n_sc,
            cells: vec![Complex64::new(0.0, 0.0); n_sc * SYMBOLS_PER_SUBFRAME],
        }
    }

    pub fn n_sc(&self) -> usize {
        self.n_sc
    }

    #[inline]
    pub fn get(&self, l: usize, k: usize) -> Complex64 {
        self.cells[l * self.n_sc + k]
    }

    #[inline]
    pub fn set(&mut self, l: usize, k: usize, v: Complex64) {
        self.cells[l * self.n_sc + k] = v;
    }

    #[inline]
    pub fn add(&mut self, l: usize, k: usize, v: Complex64) {
        self.cells[l * self.n_sc + k] += v;
    }

    pub fn symbol(&self, l: usize) -> &[Complex64] {
        &self.cells[l * self.n_sc..(l + 1) * self.n_sc]
    }

    pub fn symbol_mut(&mut self, l: usize) -> &mut [Complex64] {
        &mut self.cells[l * self.n_sc..(l + 1) * self.n_sc]
    }

    pub fn cells(&self) -> &[Complex64] {
        &self.cells
    }

    /// Per-RE power, symbol-major.
    pub fn power(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.norm_sqr()).collect()
    }
}
