//! Control format indicator channel.

use crate::coding::gold::gold_sequence;
use crate::coding::qpsk::qpsk_map;
use crate::error::Result;
use crate::grid::chest::ChannelEstimate;
use crate::grid::{CellConfig, ResourceGrid};

use super::layout::{pcfich_reg_indices, regs_in_symbol, Cfi};

pub const CFI_BITS: usize = 32;

/// Normalised soft correlation below which the decision is flagged.
pub const CFI_METRIC_MIN: f64 = 0.5;

/// The 32-bit block code of a CFI value.
pub fn cfi_codeword(cfi: Cfi) -> [u8; CFI_BITS] {
    let base: [u8; 3] = match cfi.value() {
        1 => [0, 1, 1],
        2 => [1, 0, 1],
        _ => [1, 1, 0],
    };
    std::array::from_fn(|i| base[i % 3])
}

fn scrambling(pci: u16, subframe: usize) -> Vec<u8> {
    let c_init = (subframe as u32 + 1) * (2 * u32::from(pci) + 1) * (1 << 9) + u32::from(pci);
    gold_sequence(c_init, CFI_BITS)
}

/// PCFICH resource elements in mapping order (16).
pub fn pcfich_res(cfg: &CellConfig) -> Vec<(usize, usize)> {
    let regs = regs_in_symbol(cfg, 0);
    pcfich_reg_indices(cfg)
        .into_iter()
        .flat_map(|i| regs[i].res.map(|k| (0, k)))
        .collect()
}

pub fn map_pcfich(grid: &mut ResourceGrid, cfg: &CellConfig, cfi: Cfi, subframe: usize, amplitude: f64) -> Result<()> {
    let mut bits = cfi_codeword(cfi);
    for (b, c) in bits.iter_mut().zip(scrambling(cfg.pci, subframe)) {
        *b ^= c;
    }
    for ((l, k), s) in pcfich_res(cfg).into_iter().zip(qpsk_map(&bits)?) {
        grid.set(l, k, s * amplitude);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfiDecision {
    /// Decoded value, or 3 when uncertain.
    pub cfi: Cfi,
    /// Normalised correlation of the chosen codeword, in [-1, 1].
    pub metric: f64,
    /// Gap to the runner-up.
    pub margin: f64,
    pub uncertain: bool,
}

/// Soft-correlates the PCFICH against the three codewords.
pub fn cfi_decode(grid: &ResourceGrid, cfg: &CellConfig, est: &ChannelEstimate, subframe: usize) -> CfiDecision {
    let mut llr = Vec::with_capacity(CFI_BITS);
    for (l, k) in pcfich_res(cfg) {
        est.push_llr(grid, l, k, &mut llr);
    }
    for (x, c) in llr.iter_mut().zip(scrambling(cfg.pci, subframe)) {
        if c == 1 {
            *x = -*x;
        }
    }
    let norm: f64 = llr.iter().map(|x| f64::from(x.abs())).sum::<f64>().max(1e-12);
    let mut scores: Vec<(f64, Cfi)> = Cfi::ALL
        .iter()
        .map(|&c| {
            let s: f64 = cfi_codeword(c)
                .iter()
                .zip(&llr)
                .map(|(&b, &x)| if b == 0 { f64::from(x) } else { -f64::from(x) })
                .sum();
            (s / norm, c)
        })
        .collect();
    scores.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (metric, best) = scores[0];
    let margin = metric - scores[1].0;
    let uncertain = metric < CFI_METRIC_MIN;
    CfiDecision {
        cfi: if uncertain { Cfi::ALL[2] } else { best },
        metric,
        margin,
        uncertain,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::qpsk::complex_noise;
    use crate::grid::crs::{crs_offset, CRS_SYMBOLS};
    use crate::grid::CrsTable;
    use rand::{rngs::StdRng, SeedableRng};

    fn subframe(cfg: &CellConfig, cfi: Cfi, sf: usize, noise: f64, rng: &mut StdRng) -> ResourceGrid {
        let mut g = ResourceGrid::new(cfg);
        let t = CrsTable::new(cfg);
        for l in CRS_SYMBOLS {
            let off = crs_offset(cfg, 0, l).unwrap();
            for (m, v) in t.symbol_values(sf, l).iter().enumerate() {
                g.set(l, 6 * m + off, *v);
            }
        }
        map_pcfich(&mut g, cfg, cfi, sf, 1.0).unwrap();
        if noise > 0.0 {
            for l in 0..14 {
                for k in 0..cfg.n_sc() {
                    g.add(l, k, complex_noise(rng, noise));
                }
            }
        }
        g
    }

    #[test]
    fn codewords_are_repeats() {
        assert_eq!(&cfi_codeword(Cfi::new(1).unwrap())[..6], &[0, 1, 1, 0, 1, 1]);
        assert_eq!(cfi_codeword(Cfi::new(3).unwrap())[31], 1);
        let cfg = CellConfig::new(25, 7, 1, 512).unwrap();
        let res = pcfich_res(&cfg);
        assert_eq!(res.len(), 16);
        assert!(res.iter().all(|&(l, k)| l == 0 && !crate::grid::crs::is_crs(&CellConfig { n_ports: 2, ..cfg }, 0, k)));
    }

    #[test]
    fn clean_decode_every_cfi_and_subframe() {
        let mut rng = StdRng::seed_from_u64(1);
        let cfg = CellConfig::new(15, 101, 1, 256).unwrap();
        let t = CrsTable::new(&cfg);
        for cfi in Cfi::ALL {
            for sf in 0..10 {
                let g = subframe(&cfg, cfi, sf, 0.0, &mut rng);
                let est = ChannelEstimate::estimate(&g, &cfg, &t, sf);
                let d = cfi_decode(&g, &cfg, &est, sf);
                assert_eq!(d.cfi, cfi);
                assert!(!d.uncertain);
            }
        }
    }

    #[test]
    fn noise_only_is_uncertain() {
        let cfg = CellConfig::new(25, 3, 1, 512).unwrap();
        let t = CrsTable::new(&cfg);
        let mut rng = StdRng::seed_from_u64(9);
        let mut flagged = 0;
        for _ in 0..50 {
            let mut g = ResourceGrid::new(&cfg);
            for l in 0..14 {
                for k in 0..cfg.n_sc() {
                    g.set(l, k, complex_noise(&mut rng, 1.0));
                }
            }
            let est = ChannelEstimate::estimate(&g, &cfg, &t, 0);
            let d = cfi_decode(&g, &cfg, &est, 0);
            if d.uncertain {
                assert_eq!(d.cfi.value(), 3);
                flagged += 1;
            }
        }
        assert!(flagged >= 42, "{flagged}");
    }
}
