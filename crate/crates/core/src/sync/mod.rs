//! Cell acquisition and frame tracking.

pub mod detect;
pub mod pbch;
pub mod signals;

use num_complex::Complex64;

pub use detect::{pss_detect, sss_decode, PssCorrelator, PssHit, SssResult};
pub use pbch::{mib_decode, Mib, MibDecode};

use crate::errlog::{ErrLog, EventKind};
use crate::error::{Error, Result};
use crate::grid::{CellConfig, SFN_PERIOD};
use detect::{central_view, correct_cfo, estimate_cfo, fft_size_for, half_frame_len, pss_detect_with};
use signals::PSS_SYMBOL;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncState {
    pub pci: u16,
    /// Absolute sample index of the current frame's first sample.
    pub frame_start: u64,
    pub sfn: u16,
    pub cfo_hz: f64,
    pub quality: f64,
}

impl SyncState {
    pub fn n_id_2(&self) -> u16 {
        self.pci % 3
    }

    /// Moves to the next frame.
    pub fn advance(&mut self, samples_per_frame: usize) {
        self.frame_start += samples_per_frame as u64;
        self.sfn = (self.sfn + 1) % SFN_PERIOD as u16;
    }

    pub fn abs_sf(&self, subframe: usize) -> u32 {
        crate::grid::abs_sf(u32::from(self.sfn), subframe as u32)
    }
}

/// Largest per-frame timing correction applied without a resync event:
/// 16 samples at the 2048-point rate, scaled, never below 4.
pub fn drift_limit(fft_size: usize) -> usize {
    (16 * fft_size / 2048).max(4)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    pub state: SyncState,
    pub cfg: CellConfig,
    pub mib: MibDecode,
}

/// Full cell search on a buffer whose first sample has absolute index
/// `base`: PSS, SSS, CFO, then the MIB of the first decodable frame.
pub fn acquire(samples: &[Complex64], sample_rate: f64, base: u64) -> Result<Acquisition> {
    let n = fft_size_for(sample_rate)?;
    let p = half_frame_len(n);
    let mut corr = PssCorrelator::new(n);
    let search = &samples[..samples.len().min(4 * p + n)];
    let hit = pss_detect_with(&mut corr, search)?;
    let hfs = hit.half_frame_start(n);
    let sss = sss_decode(samples, hfs, hit.n_id_2, n)?;
    let pci = 3 * sss.n_id_1 + hit.n_id_2;
    let mut frame_start = hfs + if sss.second_half { p } else { 0 };
    let cfo_hz = estimate_cfo(samples, hfs, n, 70);
    let spsf = 15 * n;
    let mut skipped = 0u16;
    let mut last_err = Error::MibFailure;
    while frame_start + spsf <= samples.len() {
        let mut sf0 = samples[frame_start..frame_start + spsf].to_vec();
        correct_cfo(&mut sf0, cfo_hz, sample_rate, base + frame_start as u64);
        match pbch::mib_decode_at(&sf0, 0, pci, n) {
            Ok(mib) => {
                let cfg = CellConfig::new(mib.mib.n_rb_dl()?, pci, mib.n_ports, n)?;
                let sfn = mib.sfn();
                return Ok(Acquisition {
                    state: SyncState {
                        pci,
                        frame_start: base + frame_start as u64,
                        sfn,
                        cfo_hz,
                        quality: hit.quality,
                    },
                    cfg,
                    mib,
                });
            }
            Err(e) => last_err = e,
        }
        frame_start += 2 * p;
        skipped += 1;
        if skipped > 8 {
            break;
        }
    }
    Err(last_err)
}

/// Outcome of the per-frame timing check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResyncOutcome {
    /// Timing confirmed or slewed by `delta` samples (|delta| <= drift limit).
    Tracked { delta: i64 },
    /// Jump beyond the slew limit, corrected in place.
    Resynced { delta: i64 },
    /// PSS not found near the expected position; full search required.
    Lost,
}

/// Minimum local peak-to-mean ratio for the per-frame PSS check.
pub const TRACK_QUALITY_MIN: f64 = 8.0;

/// Re-correlates the subframe-0 PSS around its expected position.
/// `samples[0]` has absolute index `base`; the buffer must extend half a
/// symbol past the PSS.
pub fn resync_check(
    state: &mut SyncState,
    samples: &[Complex64],
    base: u64,
    cfg: &CellConfig,
    corr: &mut PssCorrelator,
    log: &mut ErrLog,
) -> ResyncOutcome {
    let n = cfg.fft_size;
    let w = (n / 2) as i64;
    let expected = (state.frame_start + central_view(n).symbol_body(PSS_SYMBOL) as u64) as i64 - base as i64;
    let lo = expected - w;
    let abs_sf = state.abs_sf(0);
    if lo < 0 || (expected + w) as usize + n > samples.len() {
        log.push(abs_sf, EventKind::SyncLoss, "PSS search window outside buffer");
        return ResyncOutcome::Lost;
    }
    let mut c = Vec::with_capacity(2 * w as usize + 1);
    corr.correlate(&samples[lo as usize..(expected + w) as usize + n], usize::from(state.n_id_2()), &mut c);
    let mag: Vec<f64> = c.iter().map(|v| v.sqrt()).collect();
    let (imax, peak) = mag
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    let mean_pow = c.iter().sum::<f64>() / c.len() as f64;
    let quality = if mean_pow > 0.0 { peak * peak / mean_pow } else { 0.0 };
    if quality < TRACK_QUALITY_MIN {
        log.push(abs_sf, EventKind::SyncLoss, format!("quality {quality:.1}"));
        return ResyncOutcome::Lost;
    }
    let mut frac = 0.0;
    if imax > 0 && imax + 1 < mag.len() {
        let (a, b, d) = (mag[imax - 1], mag[imax], mag[imax + 1]);
        let den = a - 2.0 * b + d;
        if den < 0.0 {
            frac = 0.5 * (a - d) / den;
        }
    }
    let delta = ((imax as f64 + frac).round() as i64) - w;
    state.quality = quality;
    state.frame_start = (state.frame_start as i64 + delta) as u64;
    if delta.unsigned_abs() as usize <= drift_limit(n) {
        if delta != 0 {
            log.push(abs_sf, EventKind::Slew, format!("{delta:+} samples"));
        }
        ResyncOutcome::Tracked { delta }
    } else {
        log.push(abs_sf, EventKind::Resync, format!("jump {delta:+} samples"));
        ResyncOutcome::Resynced { delta }
    }
}
