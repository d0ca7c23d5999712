//! Cell-specific reference signals for ports 0 and 1.

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use super::{CellConfig, GridIndex, SYMBOLS_PER_SLOT};
use crate::coding::gold::gold_sequence;

/// Subframe symbols carrying CRS.
pub const CRS_SYMBOLS: [usize; 4] = [0, 4, 7, 11];
const N_RB_MAX: usize = 110;

/// First CRS subcarrier (0..6) of `port` in subframe symbol `l`, if any.
pub fn crs_offset(cfg: &CellConfig, port: usize, l: usize) -> Option<usize> {
    let v = match (l % SYMBOLS_PER_SLOT, port) {
        (0, 0) | (4, 1) => 0,
        (4, 0) | (0, 1) => 3,
        _ => return None,
    };
    Some((v + cfg.pci as usize % 6) % 6)
}

/// True when `(l, k)` belongs to a reference signal of any configured port.
pub fn is_crs(cfg: &CellConfig, l: usize, k: usize) -> bool {
    (0..cfg.n_ports).any(|p| crs_offset(cfg, p, l).is_some_and(|o| k % 6 == o))
}

/// Port-0 reference positions of one subframe. The result does not depend on
/// the frame number, which is left at 0.
pub fn crs_positions(cfg: &CellConfig, subframe: usize) -> Vec<GridIndex> {
    let mut out = Vec::with_capacity(4 * 2 * cfg.n_rb_dl);
    for &l in &CRS_SYMBOLS {
        let off = crs_offset(cfg, 0, l).expect("CRS symbol");
        for m in 0..2 * cfg.n_rb_dl {
            out.push(GridIndex {
                sfn: 0,
                subframe: subframe as u8,
                slot: (l / SYMBOLS_PER_SLOT) as u8,
                symbol: (l % SYMBOLS_PER_SLOT) as u8,
                subcarrier: (6 * m + off) as u16,
            });
        }
    }
    out
}

/// Pilot values for every slot and CRS symbol of a cell.
#[derive(Debug, Clone)]
pub struct CrsTable {
    n_rb: usize,
    /// `[slot][0 or 1 for symbol 0 / 4][m]`
    values: Vec<[Vec<Complex64>; 2]>,
}

impl CrsTable {
    pub fn new(cfg: &CellConfig) -> Self {
        let pci = u32::from(cfg.pci);
        let values = (0..20u32)
            .map(|ns| {
                [0u32, 4].map(|l| {
                    let c_init = (1 << 10) * (7 * (ns + 1) + l + 1) * (2 * pci + 1) + 2 * pci + 1;
                    let c = gold_sequence(c_init, 4 * N_RB_MAX);
                    (0..2 * cfg.n_rb_dl)
                        .map(|m| {
                            let mp = m + N_RB_MAX - cfg.n_rb_dl;
                            let s = |b: u8| FRAC_1_SQRT_2 * (1.0 - 2.0 * f64::from(b));
                            Complex64::new(s(c[2 * mp]), s(c[2 * mp + 1]))
                        })
                        .collect()
                })
            })
            .collect();
        CrsTable {
            n_rb: cfg.n_rb_dl,
            values,
        }
    }

    /// Pilot `m` (0..2·n_rb) in subframe symbol `l` of `subframe`.
    #[inline]
    pub fn value(&self, subframe: usize, l: usize, m: usize) -> Complex64 {
        let ns = 2 * subframe + l / SYMBOLS_PER_SLOT;
        let which = usize::from(!l.is_multiple_of(SYMBOLS_PER_SLOT));
        self.values[ns][which][m]
    }

    pub fn symbol_values(&self, subframe: usize, l: usize) -> &[Complex64] {
        let ns = 2 * subframe + l / SYMBOLS_PER_SLOT;
        let which = usize::from(!l.is_multiple_of(SYMBOLS_PER_SLOT));
        &self.values[ns][which]
    }

    pub fn pilots_per_symbol(&self) -> usize {
        2 * self.n_rb
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn six_rb_pci0_symbol0() {
        let cfg = CellConfig::new(6, 0, 1, 128).unwrap();
        let s0: Vec<u16> = crs_positions(&cfg, 0)
            .into_iter()
            .filter(|g| g.subframe_symbol() == 0)
            .map(|g| g.subcarrier)
            .collect();
        assert_eq!(s0, (0..12).map(|m| 6 * m).collect::<Vec<u16>>());
    }

    #[test]
    fn count_per_subframe() {
        for n_rb in [6, 25, 100] {
            let cfg = CellConfig::with_default_fft(n_rb, 11, 1).unwrap();
            assert_eq!(crs_positions(&cfg, 3).len(), 4 * 2 * n_rb);
        }
    }

    #[test]
    fn ports_never_overlap_and_pilots_are_unit_power() {
        let cfg = CellConfig::new(25, 77, 2, 512).unwrap();
        for l in CRS_SYMBOLS {
            assert_ne!(crs_offset(&cfg, 0, l), crs_offset(&cfg, 1, l));
        }
        let t = CrsTable::new(&cfg);
        for sf in 0..10 {
            for l in CRS_SYMBOLS {
                assert!(t.symbol_values(sf, l).iter().all(|v| (v.norm_sqr() - 1.0).abs() < 1e-12));
            }
        }
    }

    proptest! {
        #[test]
        fn positions_depend_on_pci_mod_6(pci in 0u16..498, sf in 0usize..10) {
            let a = CellConfig::new(25, pci, 1, 512).unwrap();
            let b = CellConfig::new(25, pci + 6, 1, 512).unwrap();
            prop_assert_eq!(crs_positions(&a, sf), crs_positions(&b, sf));
        }
    }
}
