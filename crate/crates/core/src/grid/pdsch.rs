//! Shared-channel resource elements of a subframe.

use super::crs::is_crs;
use super::{CellConfig, SUBCARRIERS_PER_RB, SYMBOLS_PER_SUBFRAME};

/// Central subcarriers reserved for sync and broadcast.
const CENTRAL_SC: usize = 72;

fn reserved(cfg: &CellConfig, subframe: usize, l: usize, k: usize) -> bool {
    let lo = cfg.n_sc() / 2 - CENTRAL_SC / 2;
    let central = (lo..lo + CENTRAL_SC).contains(&k);
    match subframe {
        0 => central && (5..=10).contains(&l),
        5 => central && (5..=6).contains(&l),
        _ => false,
    }
}

/// Data REs of resource block `rb` after a control region of `cfi` symbols,
/// symbol-major then ascending subcarrier.
pub fn rb_res(cfg: &CellConfig, cfi: usize, subframe: usize, rb: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    (cfi..SYMBOLS_PER_SUBFRAME).flat_map(move |l| {
        (rb * SUBCARRIERS_PER_RB..(rb + 1) * SUBCARRIERS_PER_RB)
            .filter(move |&k| !is_crs(cfg, l, k) && !reserved(cfg, subframe, l, k))
            .map(move |k| (l, k))
    })
}

/// Data REs of an allocation (bit `i` of `rbs` = block `i`) in mapping
/// order: frequency first within each symbol.
pub fn pdsch_res(cfg: &CellConfig, cfi: usize, subframe: usize, rbs: u128) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for l in cfi..SYMBOLS_PER_SUBFRAME {
        for rb in (0..cfg.n_rb_dl).filter(|rb| rbs >> rb & 1 == 1) {
            for k in rb * SUBCARRIERS_PER_RB..(rb + 1) * SUBCARRIERS_PER_RB {
                if !is_crs(cfg, l, k) && !reserved(cfg, subframe, l, k) {
                    out.push((l, k));
                }
            }
        }
    }
    out
}

/// True if block `rb` touches the central sync/broadcast band in this subframe.
pub fn overlaps_broadcast(cfg: &CellConfig, subframe: usize, rb: usize) -> bool {
    if subframe != 0 && subframe != 5 {
        return false;
    }
    let lo = cfg.n_sc() / 2 - CENTRAL_SC / 2;
    let (a, b) = (rb * SUBCARRIERS_PER_RB, (rb + 1) * SUBCARRIERS_PER_RB);
    a < lo + CENTRAL_SC && lo < b
}
