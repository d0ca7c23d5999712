//! Resource grid and waveform synthesis of planned subframes.

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::config::ScenarioConfig;
use super::sched::SubframePlan;
use crate::coding::qpsk::qpsk_map;
use crate::error::Result;
use crate::grid::crs::{crs_offset, CRS_SYMBOLS};
use crate::grid::pdsch::{pdsch_res, rb_res};
use crate::grid::{CellConfig, CrsTable, Ofdm, ResourceGrid};
use crate::pdcch::decode::{encode_dci, map_pdcch};
use crate::pdcch::pcfich::map_pcfich;
use crate::pdcch::Layouts;
use crate::sync::pbch::map_pbch;
use crate::sync::signals::map_sync;
use crate::sync::Mib;
use crate::tracker::rar::map_rar;

/// Per-subframe random stream, independent of generation order.
pub(crate) fn sub_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut x = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 31;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 29)
}

/// Multiplies symbols `0..n` by the phase ramp of a cyclic time advance of
/// `samples`, as if those symbols reached the receiver early.
pub fn advance_symbols(grid: &mut ResourceGrid, cfg: &CellConfig, symbols: std::ops::Range<usize>, samples: i64) {
    let n = cfg.fft_size as f64;
    for l in symbols {
        for (k, v) in grid.symbol_mut(l).iter_mut().enumerate() {
            let bin = cfg.fft_bin(k) as f64;
            *v *= Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * bin * samples as f64 / n);
        }
    }
}

pub struct Synthesizer {
    cfg: CellConfig,
    phich_code: u8,
    pdsch_amp: f64,
    interference_amp: f64,
    ctrl_offset: i64,
    seed: u64,
    crs: CrsTable,
    layouts: Layouts,
    ofdm: Ofdm,
}

impl Synthesizer {
    pub fn new(s: &ScenarioConfig) -> Self {
        Synthesizer {
            cfg: s.cfg,
            phich_code: s.phich_code,
            pdsch_amp: s.pdsch_power.sqrt(),
            interference_amp: s.impairments.interference_power.sqrt(),
            ctrl_offset: s.impairments.ctrl_offset_samples,
            seed: s.seed,
            crs: CrsTable::new(&s.cfg),
            layouts: Layouts::new(&s.cfg, s.ng_sixths()),
            ofdm: Ofdm::new(&s.cfg),
        }
    }

    pub fn cfg(&self) -> &CellConfig {
        &self.cfg
    }

    fn filler(&self, grid: &mut ResourceGrid, res: impl Iterator<Item = (usize, usize)>, amp: f64, rng: &mut StdRng) {
        for (l, k) in res {
            let b: [u8; 2] = [rng.random_range(0..2), rng.random_range(0..2)];
            grid.set(l, k, qpsk_map(&b).expect("two bits")[0] * amp);
        }
    }

    pub fn grid(&self, p: &SubframePlan) -> Result<ResourceGrid> {
        let cfg = &self.cfg;
        let sf = p.subframe();
        let mut g = ResourceGrid::new(cfg);
        for port in 0..cfg.n_ports {
            for l in CRS_SYMBOLS {
                let Some(off) = crs_offset(cfg, port, l) else { continue };
                for (m, v) in self.crs.symbol_values(sf, l).iter().enumerate() {
                    g.set(l, 6 * m + off, *v);
                }
            }
        }
        if sf == 0 || sf == 5 {
            map_sync(&mut g, cfg.pci, sf, 1.0);
        }
        if sf == 0 {
            let mib = Mib::new(cfg.n_rb_dl, p.sfn(), self.phich_code)?;
            map_pbch(&mut g, cfg, &mib, p.sfn(), 1.0)?;
        }
        map_pcfich(&mut g, cfg, p.cfi, sf, 1.0)?;
        let layout = self.layouts.get(p.cfi);
        let messages = p
            .dcis
            .iter()
            .map(|d| Ok((d.location, encode_dci(&d.payload, d.rnti, usize::from(d.location.aggregation))?)))
            .collect::<Result<Vec<_>>>()?;
        map_pdcch(&mut g, layout, cfg.pci, sf, &messages, 1.0)?;

        let cfi = p.cfi.symbols();
        let mut rng = StdRng::seed_from_u64(sub_seed(self.seed, 1, p.index));
        for d in &p.dcis {
            match &d.rar {
                Some(msg) => map_rar(&mut g, cfg, cfi, sf, d.rnti, d.rbs, msg, self.pdsch_amp)?,
                None if d.rbs != 0 => self.filler(&mut g, pdsch_res(cfg, cfi, sf, d.rbs).into_iter(), self.pdsch_amp, &mut rng),
                None => {}
            }
        }
        for rb in (0..cfg.n_rb_dl).filter(|rb| p.interference >> rb & 1 == 1) {
            self.filler(&mut g, rb_res(cfg, cfi, sf, rb), self.interference_amp, &mut rng);
        }
        if p.ctrl_offset {
            advance_symbols(&mut g, cfg, 0..cfi, self.ctrl_offset);
        }
        Ok(g)
    }

    /// Appends the waveform of one subframe.
    pub fn modulate(&mut self, p: &SubframePlan, out: &mut Vec<Complex64>) -> Result<()> {
        let g = self.grid(p)?;
        self.ofdm.modulate_into(&g, out)
    }
}
