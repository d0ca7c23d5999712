//! Least-squares channel estimation on port-0 CRS.
//!
//! Pilots are interpolated linearly across frequency within each CRS symbol
//! and linearly in time between CRS symbols (held constant after the last).

use num_complex::Complex64;

use super::crs::{crs_offset, CrsTable, CRS_SYMBOLS};
use super::{CellConfig, ResourceGrid, SYMBOLS_PER_SUBFRAME};

const SQRT_8: f64 = 2.0 * std::f64::consts::SQRT_2;

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    n_sc: usize,
    h: Vec<Complex64>,
    /// Complex noise variance per RE.
    pub noise_var: f64,
    /// Mean received power on port-0 CRS REs.
    pub crs_power: f64,
}

impl ChannelEstimate {
    pub fn estimate(grid: &ResourceGrid, cfg: &CellConfig, table: &CrsTable, subframe: usize) -> Self {
        let n_sc = cfg.n_sc();
        let n_p = 2 * cfg.n_rb_dl;
        let mut ls = [vec![Complex64::default(); n_p], vec![Complex64::default(); n_p], vec![Complex64::default(); n_p], vec![Complex64::default(); n_p]];
        let mut power = 0.0;
        for (i, &l) in CRS_SYMBOLS.iter().enumerate() {
            let off = crs_offset(cfg, 0, l).expect("CRS symbol");
            let pilots = table.symbol_values(subframe, l);
            for m in 0..n_p {
                let y = grid.get(l, 6 * m + off);
                power += y.norm_sqr();
                ls[i][m] = y * pilots[m].conj();
            }
        }
        // symbols 4 and 11 share pilot positions and sit outside the control region
        let noise_var = (ls[1].iter().zip(&ls[3]).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / (2 * n_p) as f64)
            .max(1e-9);

        let mut freq = vec![vec![Complex64::default(); n_sc]; 4];
        for (i, &l) in CRS_SYMBOLS.iter().enumerate() {
            let off = crs_offset(cfg, 0, l).expect("CRS symbol");
            interpolate_frequency(&ls[i], off, &mut freq[i]);
        }
        let mut h = vec![Complex64::default(); n_sc * SYMBOLS_PER_SUBFRAME];
        for l in 0..SYMBOLS_PER_SUBFRAME {
            let row = &mut h[l * n_sc..(l + 1) * n_sc];
            match CRS_SYMBOLS.iter().rposition(|&c| c <= l) {
                Some(3) => row.copy_from_slice(&freq[3]),
                Some(i) => {
                    let (a, b) = (CRS_SYMBOLS[i], CRS_SYMBOLS[i + 1]);
                    let w = (l - a) as f64 / (b - a) as f64;
                    for (k, r) in row.iter_mut().enumerate() {
                        *r = freq[i][k] * (1.0 - w) + freq[i + 1][k] * w;
                    }
                }
                None => unreachable!("symbol 0 carries CRS"),
            }
        }
        ChannelEstimate {
            n_sc,
            h,
            noise_var,
            crs_power: power / (4 * n_p) as f64,
        }
    }

    #[inline]
    pub fn h(&self, l: usize, k: usize) -> Complex64 {
        self.h[l * self.n_sc + k]
    }

    /// Appends the two QPSK LLRs of RE `(l, k)`.
    #[inline]
    pub fn push_llr(&self, grid: &ResourceGrid, l: usize, k: usize, out: &mut Vec<f32>) {
        let z = grid.get(l, k) * self.h(l, k).conj() * (SQRT_8 / self.noise_var);
        out.push(z.re as f32);
        out.push(z.im as f32);
    }

    /// Zero-forcing equalised value, for display.
    pub fn equalize(&self, grid: &ResourceGrid, l: usize, k: usize) -> Complex64 {
        let h = self.h(l, k);
        grid.get(l, k) / if h.norm_sqr() > 1e-12 { h } else { Complex64::new(1.0, 0.0) }
    }

    /// Signal-to-noise ratio at the pilots, in dB.
    pub fn snr_db(&self) -> f64 {
        10.0 * ((self.crs_power - self.noise_var).max(1e-12) / self.noise_var).log10()
    }
}

fn interpolate_frequency(pilots: &[Complex64], off: usize, out: &mut [Complex64]) {
    let last = pilots.len() - 1;
    for (k, o) in out.iter_mut().enumerate() {
        if k <= off {
            *o = pilots[0];
        } else if k >= 6 * last + off {
            *o = pilots[last];
        } else {
            let m = (k - off) / 6;
            let w = ((k - off) % 6) as f64 / 6.0;
            *o = pilots[m] * (1.0 - w) + pilots[m + 1] * w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::qpsk::complex_noise;
    use rand::{rngs::StdRng, SeedableRng};

    fn pilots_only(cfg: &CellConfig, table: &CrsTable, sf: usize, gain: Complex64) -> ResourceGrid {
        let mut g = ResourceGrid::new(cfg);
        for l in CRS_SYMBOLS {
            let off = crs_offset(cfg, 0, l).unwrap();
            for (m, v) in table.symbol_values(sf, l).iter().enumerate() {
                g.set(l, 6 * m + off, v * gain);
            }
        }
        g
    }

    #[test]
    fn flat_channel_is_recovered_everywhere() {
        let cfg = CellConfig::new(25, 150, 1, 512).unwrap();
        let t = CrsTable::new(&cfg);
        let gain = Complex64::from_polar(0.7, 1.1);
        let g = pilots_only(&cfg, &t, 4, gain);
        let est = ChannelEstimate::estimate(&g, &cfg, &t, 4);
        for l in 0..14 {
            for k in 0..cfg.n_sc() {
                assert!((est.h(l, k) - gain).norm() < 1e-12);
            }
        }
        assert!((est.crs_power - 0.49).abs() < 1e-12);
    }

    #[test]
    fn noise_estimate_tracks_injected_noise() {
        let cfg = CellConfig::new(50, 3, 1, 768).unwrap();
        let t = CrsTable::new(&cfg);
        let mut g = pilots_only(&cfg, &t, 0, Complex64::new(1.0, 0.0));
        let mut rng = StdRng::seed_from_u64(5);
        let nv = 0.01;
        for l in 0..14 {
            for k in 0..cfg.n_sc() {
                g.add(l, k, complex_noise(&mut rng, nv));
            }
        }
        let est = ChannelEstimate::estimate(&g, &cfg, &t, 0);
        assert!((est.noise_var / nv - 1.0).abs() < 0.2, "{}", est.noise_var);
        assert!((est.snr_db() - 20.0).abs() < 1.0);
    }
}
