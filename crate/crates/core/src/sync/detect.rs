//! Cell search: PSS correlation, SSS identification and CFO estimation.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::signals::{pss_sequence, sss_sequence, sync_subcarrier, PSS_SYMBOL, SSS_SYMBOL, SYNC_LEN};
use crate::error::{Error, Result};
use crate::grid::{CellConfig, IqTrace, Ofdm, ResourceGrid, SUBCARRIER_SPACING_HZ};

/// Peak-to-mean ratio of the accumulated PSS correlation below which no cell
/// is reported.
pub const PSS_QUALITY_MIN: f64 = 18.0;
/// Minimum relative gap between the best and runner-up SSS hypotheses.
pub const SSS_MARGIN_MIN: f64 = 0.2;

/// Transform size implied by a sample rate.
pub fn fft_size_for(sample_rate: f64) -> Result<usize> {
    let n = sample_rate / SUBCARRIER_SPACING_HZ;
    if n < 128.0 || (n - n.round()).abs() > 1e-6 || !(n.round() as usize).is_multiple_of(128) {
        return Err(Error::Config(format!("unsupported sample rate {sample_rate} Hz")));
    }
    Ok(n.round() as usize)
}

/// Samples per half frame.
pub fn half_frame_len(fft_size: usize) -> usize {
    75 * fft_size
}

/// FFT-based sliding correlation against the three PSS waveforms.
pub struct PssCorrelator {
    n: usize,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    templates: [Vec<Complex64>; 3],
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl PssCorrelator {
    pub fn new(fft_size: usize) -> Self {
        let n = fft_size;
        let m = 8 * n;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let small = planner.plan_fft_inverse(n);
        let view = CellConfig::new(6, 0, 1, n).expect("valid central view");
        let templates = [0u16, 1, 2].map(|n2| {
            let mut t = vec![Complex64::default(); m];
            for (i, v) in pss_sequence(n2).into_iter().enumerate() {
                t[view.fft_bin(sync_subcarrier(72, i))] = v;
            }
            t.truncate(n);
            small.process(&mut t);
            let s = 1.0 / (n as f64).sqrt();
            t.iter_mut().for_each(|x| *x *= s);
            t.resize(m, Complex64::default());
            fwd.process(&mut t);
            t.iter_mut().for_each(|x| *x = x.conj() / m as f64);
            t
        });
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        PssCorrelator {
            n,
            m,
            fwd,
            inv,
            templates,
            buf: vec![Complex64::default(); m],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    /// Writes |correlation|^2 for every lag with a full window:
    /// `out[tau]` for tau in `0..=samples.len() - n`.
    pub fn correlate(&mut self, samples: &[Complex64], n_id_2: usize, out: &mut Vec<f64>) {
        out.clear();
        if samples.len() < self.n {
            return;
        }
        let lags = samples.len() - self.n + 1;
        let step = self.m - self.n + 1;
        let mut s = 0;
        while s < lags {
            let end = (s + self.m).min(samples.len());
            self.buf[..end - s].copy_from_slice(&samples[s..end]);
            self.buf[end - s..].iter_mut().for_each(|x| *x = Complex64::default());
            self.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
            for (b, t) in self.buf.iter_mut().zip(&self.templates[n_id_2]) {
                *b *= t;
            }
            self.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
            let take = step.min(lags - s);
            out.extend(self.buf[..take].iter().map(|c| c.norm_sqr()));
            s += take;
        }
    }
}

/// PSS acquisition result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PssHit {
    pub n_id_2: u16,
    /// Start of the PSS symbol's useful part, first occurrence (< half frame).
    pub pss_offset: usize,
    pub quality: f64,
}

impl PssHit {
    /// Start of the half frame carrying this PSS (may lie before the trace,
    /// in which case the next one is returned).
    pub fn half_frame_start(&self, fft_size: usize) -> usize {
        let body = central_view(fft_size).symbol_body(PSS_SYMBOL);
        let p = half_frame_len(fft_size);
        (self.pss_offset + p - body) % p
    }
}

/// 6-RB configuration covering the synchronisation and broadcast band.
pub fn central_view(fft_size: usize) -> CellConfig {
    CellConfig::new(6, 0, 1, fft_size).expect("fft size already validated")
}

/// Correlates against all three roots, accumulating non-coherently over
/// whole half frames.
pub fn pss_detect(trace: &IqTrace) -> Result<PssHit> {
    let n = fft_size_for(trace.sample_rate)?;
    let mut corr = PssCorrelator::new(n);
    pss_detect_with(&mut corr, &trace.samples)
}

pub fn pss_detect_with(corr: &mut PssCorrelator, samples: &[Complex64]) -> Result<PssHit> {
    let n = corr.n;
    let p = half_frame_len(n);
    if samples.len() < p + n {
        return Err(Error::OutOfRange(format!(
            "{} samples is less than a half frame",
            samples.len()
        )));
    }
    let halves = ((samples.len() - n) / p).min(8);
    let window = &samples[..halves * p + n - 1];
    let mut best: Option<PssHit> = None;
    let mut c = Vec::new();
    for n2 in 0..3 {
        corr.correlate(window, n2, &mut c);
        let mut acc = vec![0.0; p];
        for (tau, v) in c.iter().take(halves * p).enumerate() {
            acc[tau % p] += v;
        }
        let mean = acc.iter().sum::<f64>() / p as f64;
        let (tau, peak) = acc
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        let quality = if mean > 0.0 { peak / mean } else { 0.0 };
        if best.is_none_or(|b| quality > b.quality) {
            best = Some(PssHit {
                n_id_2: n2 as u16,
                pss_offset: tau,
                quality,
            });
        }
    }
    let best = best.expect("three roots tried");
    if best.quality < PSS_QUALITY_MIN {
        return Err(Error::NoCell { quality: best.quality });
    }
    Ok(best)
}

/// SSS identification result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SssResult {
    pub n_id_1: u16,
    /// The half frame starting at [`PssHit::half_frame_start`] is subframe 5.
    pub second_half: bool,
    pub margin: f64,
}

/// Decodes N_ID_1 and half-frame parity from all complete half frames,
/// equalising each SSS with the PSS that follows it.
pub fn sss_decode(samples: &[Complex64], half_frame_start: usize, n_id_2: u16, fft_size: usize) -> Result<SssResult> {
    let view = central_view(fft_size);
    let p = half_frame_len(fft_size);
    let mut ofdm = Ofdm::new(&view);
    let mut grid = ResourceGrid::new(&view);
    let bank: Vec<[Vec<f64>; 2]> = (0..168u16)
        .map(|n1| [sss_sequence(n1, n_id_2, false), sss_sequence(n1, n_id_2, true)])
        .collect();
    let pss = pss_sequence(n_id_2);
    let mut metric = vec![[0.0f64; 2]; 168];
    let mut used = 0;
    let mut start = half_frame_start;
    let mut z = vec![0.0; SYNC_LEN];
    while start + view.symbol_body(PSS_SYMBOL) + fft_size <= samples.len() && used < 8 {
        ofdm.demodulate_symbols(samples, start, 0, SSS_SYMBOL..PSS_SYMBOL + 1, &mut grid)?;
        for (i, zi) in z.iter_mut().enumerate() {
            let k = sync_subcarrier(72, i);
            let h = grid.get(PSS_SYMBOL, k) * pss[i].conj();
            *zi = (grid.get(SSS_SYMBOL, k) * h.conj()).re;
        }
        let flip = used % 2 == 1;
        for (m, seqs) in metric.iter_mut().zip(&bank) {
            for parity in 0..2 {
                let seq = &seqs[usize::from((parity == 1) != flip)];
                m[parity] += z.iter().zip(seq).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        used += 1;
        start += p;
    }
    if used == 0 {
        return Err(Error::OutOfRange("no complete half frame for SSS".into()));
    }
    let mut ranked: Vec<(f64, u16, bool)> = metric
        .iter()
        .enumerate()
        .flat_map(|(n1, m)| [(m[0], n1 as u16, false), (m[1], n1 as u16, true)])
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (top, n_id_1, second_half) = ranked[0];
    let margin = if top > 0.0 { 1.0 - ranked[1].0.max(0.0) / top } else { 0.0 };
    if margin < SSS_MARGIN_MIN {
        return Err(Error::SssAmbiguous { margin });
    }
    Ok(SssResult {
        n_id_1,
        second_half,
        margin,
    })
}

/// Fractional CFO in Hz from cyclic-prefix autocorrelation over `n_symbols`
/// symbols starting at the subframe boundary `start`.
pub fn estimate_cfo(samples: &[Complex64], start: usize, fft_size: usize, n_symbols: usize) -> f64 {
    let view = central_view(fft_size);
    let mut acc = Complex64::default();
    let spsf = view.samples_per_subframe();
    for s in 0..n_symbols {
        let (sf, l) = (s / 14, s % 14);
        let sym = start + sf * spsf + view.symbol_start(l);
        let cp = view.cp_len(l % 7);
        if sym + cp + fft_size > samples.len() {
            break;
        }
        for i in sym..sym + cp {
            acc += samples[i] * samples[i + fft_size].conj();
        }
    }
    -acc.arg() / (2.0 * std::f64::consts::PI * fft_size as f64) * fft_size as f64 * SUBCARRIER_SPACING_HZ
}

/// Removes a frequency offset; `first_index` is the absolute index of
/// `samples[0]` so corrections stay phase-continuous across chunks.
pub fn correct_cfo(samples: &mut [Complex64], cfo_hz: f64, sample_rate: f64, first_index: u64) {
    if cfo_hz == 0.0 {
        return;
    }
    let w = -2.0 * std::f64::consts::PI * cfo_hz / sample_rate;
    // restart the rotation from an exact phase every block to bound drift
    for (b, chunk) in samples.chunks_mut(4096).enumerate() {
        let i0 = first_index + (b * 4096) as u64;
        let mut rot = Complex64::from_polar(1.0, (w * i0 as f64).rem_euclid(2.0 * std::f64::consts::PI));
        let step = Complex64::from_polar(1.0, w);
        for x in chunk {
            *x *= rot;
            rot *= step;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlator_matches_direct_sum() {
        let n = 128;
        let mut corr = PssCorrelator::new(n);
        let samples: Vec<Complex64> = (0..3000)
            .map(|i| Complex64::new(((i * 37) % 11) as f64 - 5.0, ((i * 13) % 7) as f64 - 3.0))
            .collect();
        let mut out = Vec::new();
        corr.correlate(&samples, 1, &mut out);
        assert_eq!(out.len(), 3000 - n + 1);
        // direct time-domain reference for a few lags
        let view = central_view(n);
        let mut g = ResourceGrid::new(&view);
        for (i, v) in pss_sequence(1).into_iter().enumerate() {
            g.set(0, sync_subcarrier(72, i), v);
        }
        let sym = crate::grid::ofdm_modulate(&g, &view).unwrap();
        let t = &sym[view.cp_len(0)..view.cp_len(0) + n];
        for tau in [0usize, 1, 500, 1023, 2872] {
            let d: Complex64 = (0..n).map(|i| samples[tau + i] * t[i].conj()).sum();
            assert!((d.norm_sqr() - out[tau]).abs() < 1e-6 * d.norm_sqr().max(1.0), "lag {tau}");
        }
    }

    #[test]
    fn cfo_estimate_on_pure_rotation() {
        let n = 128;
        let view = central_view(n);
        let mut g = ResourceGrid::new(&view);
        for l in 0..14 {
            for k in 0..72 {
                g.set(l, k, Complex64::new(if (k * l) % 3 == 0 { 1.0 } else { -1.0 }, 0.5));
            }
        }
        let mut s = crate::grid::ofdm_modulate(&g, &view).unwrap();
        let fs = view.sample_rate();
        correct_cfo(&mut s, -300.0, fs, 0);
        let est = estimate_cfo(&s, 0, n, 14);
        assert!((est - 300.0).abs() < 1.0, "{est}");
        correct_cfo(&mut s, est, fs, 0);
        assert!(estimate_cfo(&s, 0, n, 14).abs() < 1.0);
    }

    #[test]
    fn rate_validation() {
        assert_eq!(fft_size_for(7.68e6).unwrap(), 512);
        assert_eq!(fft_size_for(11.52e6).unwrap(), 768);
        assert!(fft_size_for(1e6).is_err());
    }
}
