//! Primary and secondary synchronisation sequences.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::grid::ResourceGrid;
use crate::tables::tables;

pub const PSS_SYMBOL: usize = 6;
pub const SSS_SYMBOL: usize = 5;
pub const SYNC_LEN: usize = 62;

/// Zadoff-Chu PSS for `n_id_2`, 62 values.
pub fn pss_sequence(n_id_2: u16) -> Vec<Complex64> {
    let u = f64::from(tables().sync.pss_roots[usize::from(n_id_2)]);
    (0..SYNC_LEN)
        .map(|n| {
            let n = n as f64;
            let e = if n < 31.0 { n * (n + 1.0) } else { (n + 1.0) * (n + 2.0) };
            Complex64::from_polar(1.0, -PI * u * e / 63.0)
        })
        .collect()
}

/// SSS (+/-1 values) for a cell and half-frame; `second_half` selects the
/// subframe-5 variant.
pub fn sss_sequence(n_id_1: u16, n_id_2: u16, second_half: bool) -> Vec<f64> {
    let t = &tables().sync;
    let pm = |x: u8| 1.0 - 2.0 * f64::from(x);
    let (m0, m1) = t.m[usize::from(n_id_1)];
    let n2 = usize::from(n_id_2);
    let s = |m: usize, n: usize| pm(t.x_s[(n + m) % 31]);
    let c0 = |n: usize| pm(t.x_c[(n + n2) % 31]);
    let c1 = |n: usize| pm(t.x_c[(n + n2 + 3) % 31]);
    let z = |m: usize, n: usize| pm(t.x_z[(n + m % 8) % 31]);
    let mut d = vec![0.0; SYNC_LEN];
    for n in 0..31 {
        if second_half {
            d[2 * n] = s(m1, n) * c0(n);
            d[2 * n + 1] = s(m0, n) * c1(n) * z(m1, n);
        } else {
            d[2 * n] = s(m0, n) * c0(n);
            d[2 * n + 1] = s(m1, n) * c1(n) * z(m0, n);
        }
    }
    d
}

/// Subcarrier of sync element `n` in a grid of `n_sc` subcarriers.
#[inline]
pub fn sync_subcarrier(n_sc: usize, n: usize) -> usize {
    n_sc / 2 - 31 + n
}

/// Writes PSS and SSS into a subframe-0 or subframe-5 grid.
pub fn map_sync(grid: &mut ResourceGrid, pci: u16, subframe: usize, amplitude: f64) {
    let (n1, n2) = (pci / 3, pci % 3);
    let n_sc = grid.n_sc();
    for (n, v) in pss_sequence(n2).into_iter().enumerate() {
        grid.set(PSS_SYMBOL, sync_subcarrier(n_sc, n), v * amplitude);
    }
    for (n, v) in sss_sequence(n1, n2, subframe == 5).into_iter().enumerate() {
        grid.set(SSS_SYMBOL, sync_subcarrier(n_sc, n), Complex64::new(v * amplitude, 0.0));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pss_is_constant_amplitude_and_roots_differ() {
        let p: Vec<_> = (0..3).map(pss_sequence).collect();
        assert!(p[0].iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        for a in 0..3 {
            for b in 0..3 {
                let c: Complex64 = p[a].iter().zip(&p[b]).map(|(x, y)| x * y.conj()).sum();
                if a == b {
                    assert!((c.norm() - 62.0).abs() < 1e-9);
                } else {
                    assert!(c.norm() < 0.5 * 62.0, "{a} {b} {}", c.norm());
                }
            }
        }
    }

    #[test]
    fn sss_halves_and_cells_are_distinct() {
        let a = sss_sequence(84, 1, false);
        let b = sss_sequence(84, 1, true);
        let c = sss_sequence(85, 1, false);
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        assert_eq!(dot(&a, &a), 62.0);
        assert!(dot(&a, &b).abs() < 40.0);
        assert!(dot(&a, &c).abs() < 40.0);
    }
}
