//! Control-region geometry: REGs, PCFICH and PHICH reservations, PDCCH
//! quadruplet interleaving and CCE-to-RE mapping.

use crate::coding::ratematch::subblock;
use crate::error::{Error, Result};
use crate::grid::CellConfig;

/// Number of OFDM symbols of the control region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cfi(u8);

impl Cfi {
    pub const ALL: [Cfi; 3] = [Cfi(1), Cfi(2), Cfi(3)];

    pub fn new(value: u8) -> Result<Self> {
        if (1..=3).contains(&value) {
            Ok(Cfi(value))
        } else {
            Err(Error::OutOfRange(format!("cfi {value}")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn symbols(self) -> usize {
        usize::from(self.0)
    }
}

impl std::fmt::Display for Cfi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const REGS_PER_CCE: usize = 9;
pub const RES_PER_CCE: usize = 36;
pub const BITS_PER_CCE: usize = 72;
pub const AGGREGATIONS: [usize; 4] = [8, 4, 2, 1];

/// Resource element group: four data REs in one symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reg {
    pub l: usize,
    pub k0: usize,
    pub res: [usize; 4],
}

/// REGs of symbol `l` in frequency order. Symbol 0 always leaves room for
/// two-port reference signals.
pub fn regs_in_symbol(cfg: &CellConfig, l: usize) -> Vec<Reg> {
    let n_sc = cfg.n_sc();
    if l == 0 {
        let v = usize::from(cfg.pci % 6) % 3;
        (0..n_sc)
            .step_by(6)
            .map(|k0| {
                let mut res = [0; 4];
                let mut j = 0;
                for o in (0..6).filter(|o| o % 3 != v) {
                    res[j] = k0 + o;
                    j += 1;
                }
                Reg { l, k0, res }
            })
            .collect()
    } else {
        (0..n_sc)
            .step_by(4)
            .map(|k0| Reg {
                l,
                k0,
                res: [k0, k0 + 1, k0 + 2, k0 + 3],
            })
            .collect()
    }
}

/// Symbol-0 REG indices (into [`regs_in_symbol`]) carrying the PCFICH.
pub fn pcfich_reg_indices(cfg: &CellConfig) -> [usize; 4] {
    let n_rb = cfg.n_rb_dl;
    let kbar = 6 * (usize::from(cfg.pci) % (2 * n_rb));
    [0, 1, 2, 3].map(|i| ((kbar + (i * n_rb / 2) * 6) % cfg.n_sc()) / 6)
}

/// PHICH groups for Ng given in sixths (1, 3, 6 or 12).
pub fn phich_groups(n_rb_dl: usize, ng_sixths: usize) -> usize {
    (ng_sixths * n_rb_dl).div_ceil(48)
}

/// Symbol-0 REG indices reserved for PHICH (normal duration).
pub fn phich_reg_indices(cfg: &CellConfig, ng_sixths: usize) -> Vec<usize> {
    let pcfich = pcfich_reg_indices(cfg);
    let free: Vec<usize> = (0..cfg.n_sc() / 6).filter(|i| !pcfich.contains(i)).collect();
    let n0 = free.len();
    let mut out = Vec::new();
    for m in 0..phich_groups(cfg.n_rb_dl, ng_sixths) {
        for i in 0..3 {
            let idx = free[(usize::from(cfg.pci) + m + i * n0 / 3) % n0];
            if !out.contains(&idx) {
                out.push(idx);
            }
        }
    }
    out
}

/// PDCCH geometry for one CFI.
#[derive(Debug, Clone)]
pub struct ControlLayout {
    pub cfi: Cfi,
    pub n_reg: usize,
    pub n_cce: usize,
    pub pcfich: [Reg; 4],
    pub phich: Vec<Reg>,
    /// `(l, k)` of every PDCCH symbol position in CCE order (36 per CCE).
    symbol_res: Vec<(usize, usize)>,
}

impl ControlLayout {
    pub fn new(cfg: &CellConfig, cfi: Cfi, ng_sixths: usize) -> Self {
        let sym0 = regs_in_symbol(cfg, 0);
        let pcfich_idx = pcfich_reg_indices(cfg);
        let phich_idx = phich_reg_indices(cfg, ng_sixths);
        let mut per_symbol: Vec<Vec<Option<Reg>>> = Vec::new();
        let mut s0: Vec<Option<Reg>> = sym0.iter().copied().map(Some).collect();
        for &i in pcfich_idx.iter().chain(&phich_idx) {
            s0[i] = None;
        }
        per_symbol.push(s0);
        for l in 1..cfi.symbols() {
            per_symbol.push(regs_in_symbol(cfg, l).into_iter().map(Some).collect());
        }
        // number time-first at each REG start frequency
        let mut regs = Vec::new();
        for k in 0..cfg.n_sc() {
            for sym in &per_symbol {
                let step = if sym.len() == cfg.n_sc() / 6 { 6 } else { 4 };
                if k % step == 0 {
                    if let Some(r) = sym[k / step] {
                        regs.push(r);
                    }
                }
            }
        }
        let n_reg = regs.len();
        let n_cce = n_reg / REGS_PER_CCE;
        let order: Vec<usize> = subblock(n_reg, false).into_iter().flatten().collect();
        let mut reg_of_quad = vec![0; n_reg];
        for i in 0..n_reg {
            reg_of_quad[order[(i + usize::from(cfg.pci)) % n_reg]] = i;
        }
        let symbol_res = (0..n_cce * REGS_PER_CCE)
            .flat_map(|q| {
                let r = regs[reg_of_quad[q]];
                r.res.map(|k| (r.l, k))
            })
            .collect();
        ControlLayout {
            cfi,
            n_reg,
            n_cce,
            pcfich: pcfich_idx.map(|i| sym0[i]),
            phich: phich_idx.iter().map(|&i| sym0[i]).collect(),
            symbol_res,
        }
    }

    /// Scrambled bit length of the control region (all REGs, NIL included).
    pub fn total_bits(&self) -> usize {
        8 * self.n_reg
    }

    pub fn cce_res(&self, cce: usize) -> &[(usize, usize)] {
        &self.symbol_res[cce * RES_PER_CCE..(cce + 1) * RES_PER_CCE]
    }

    /// Every PDCCH symbol position, CCE order.
    pub fn symbol_res(&self) -> &[(usize, usize)] {
        &self.symbol_res
    }

    pub fn locations(&self) -> Vec<CandidateLocation> {
        enumerate_from(self.n_cce)
    }
}

/// The three layouts of a cell.
#[derive(Debug, Clone)]
pub struct Layouts {
    layouts: [ControlLayout; 3],
}

impl Layouts {
    pub fn new(cfg: &CellConfig, ng_sixths: usize) -> Self {
        Layouts {
            layouts: Cfi::ALL.map(|c| ControlLayout::new(cfg, c, ng_sixths)),
        }
    }

    pub fn get(&self, cfi: Cfi) -> &ControlLayout {
        &self.layouts[usize::from(cfi.0 - 1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CandidateLocation {
    pub cce_start: u16,
    pub aggregation: u8,
}

impl CandidateLocation {
    pub fn new(cce_start: usize, aggregation: usize) -> Self {
        CandidateLocation {
            cce_start: cce_start as u16,
            aggregation: aggregation as u8,
        }
    }

    pub fn cces(&self) -> std::ops::Range<usize> {
        let s = usize::from(self.cce_start);
        s..s + usize::from(self.aggregation)
    }

    pub fn overlaps(&self, other: &CandidateLocation) -> bool {
        let (a, b) = (self.cces(), other.cces());
        a.start < b.end && b.start < a.end
    }

    /// Resource elements covered, in transmission order.
    pub fn re_set(&self, layout: &ControlLayout) -> Vec<(usize, usize)> {
        self.cces().flat_map(|c| layout.cce_res(c).iter().copied()).collect()
    }
}

fn enumerate_from(n_cce: usize) -> Vec<CandidateLocation> {
    AGGREGATIONS
        .iter()
        .flat_map(|&l| (0..n_cce / l).map(move |i| CandidateLocation::new(i * l, l)))
        .collect()
}

/// All aggregation-aligned candidates of the control region: aggregation
/// descending, then CCE ascending.
pub fn enumerate_locations(cfi: Cfi, cfg: &CellConfig, ng_sixths: usize) -> Vec<CandidateLocation> {
    ControlLayout::new(cfg, cfi, ng_sixths).locations()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::crs::is_crs;
    use std::collections::HashSet;

    /// Counts free REs directly from the grid rules and divides down.
    fn brute_force_cces(cfg: &CellConfig, cfi: usize, ng: usize) -> usize {
        let two_port = CellConfig { n_ports: 2, ..*cfg };
        let mut reserved: HashSet<(usize, usize)> = HashSet::new();
        let sym0 = regs_in_symbol(cfg, 0);
        for i in pcfich_reg_indices(cfg).into_iter().chain(phich_reg_indices(cfg, ng)) {
            let r = sym0[i];
            for k in r.k0..r.k0 + 6 {
                reserved.insert((0, k));
            }
        }
        let mut free = 0;
        for l in 0..cfi {
            for k in 0..cfg.n_sc() {
                if !is_crs(&two_port, l, k) && !reserved.contains(&(l, k)) {
                    free += 1;
                }
            }
        }
        free / 4 / 9
    }

    #[test]
    fn six_rb_cfi3() {
        let cfg = CellConfig::new(6, 0, 1, 128).unwrap();
        let n = brute_force_cces(&cfg, 3, 6);
        let lay = ControlLayout::new(&cfg, Cfi::new(3).unwrap(), 6);
        assert_eq!(lay.n_cce, n);
        let expect: usize = AGGREGATIONS.iter().map(|l| n / l).sum();
        assert_eq!(lay.locations().len(), expect);
    }

    #[test]
    fn cce_counts_match_brute_force() {
        for (n_rb, fft) in [(6, 128), (15, 256), (25, 512), (50, 768), (100, 2048)] {
            for pci in [0u16, 1, 2, 301, 503] {
                let cfg = CellConfig::new(n_rb, pci, 1, fft).unwrap();
                for cfi in Cfi::ALL {
                    for ng in [1, 3, 6, 12] {
                        let lay = ControlLayout::new(&cfg, cfi, ng);
                        assert_eq!(lay.n_cce, brute_force_cces(&cfg, cfi.symbols(), ng));
                    }
                }
            }
        }
    }

    #[test]
    fn res_are_disjoint_and_inside_region() {
        let cfg = CellConfig::new(25, 77, 1, 512).unwrap();
        let two_port = CellConfig { n_ports: 2, ..cfg };
        for cfi in Cfi::ALL {
            let lay = ControlLayout::new(&cfg, cfi, 6);
            let mut seen = HashSet::new();
            let mut taken: HashSet<(usize, usize)> = lay.pcfich.iter().chain(&lay.phich).flat_map(|r| r.res.map(|k| (r.l, k))).collect();
            assert_eq!(taken.len(), 4 * (4 + lay.phich.len()));
            for &(l, k) in lay.symbol_res() {
                assert!(l < cfi.symbols());
                assert!(!is_crs(&two_port, l, k));
                assert!(seen.insert((l, k)));
                assert!(taken.insert((l, k)));
            }
        }
    }

    #[test]
    fn monotone_in_cfi_and_ordered() {
        let cfg = CellConfig::new(25, 10, 1, 512).unwrap();
        let c: Vec<usize> = Cfi::ALL.iter().map(|&c| enumerate_locations(c, &cfg, 6).len()).collect();
        assert!(c[0] < c[1] && c[1] < c[2]);
        let locs = enumerate_locations(Cfi::new(3).unwrap(), &cfg, 6);
        for w in locs.windows(2) {
            assert!(w[0].aggregation > w[1].aggregation || (w[0].aggregation == w[1].aggregation && w[0].cce_start < w[1].cce_start));
        }
        assert!(locs.iter().all(|l| l.cce_start % u16::from(l.aggregation) == 0));
    }

    #[test]
    fn phich_groups_by_ng() {
        assert_eq!(phich_groups(25, 1), 1);
        assert_eq!(phich_groups(25, 6), 4);
        assert_eq!(phich_groups(100, 12), 25);
        assert!(Cfi::new(0).is_err() && Cfi::new(4).is_err());
    }
}
