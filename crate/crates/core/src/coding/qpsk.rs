//! Gray-mapped QPSK with unit average energy.

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use super::SoftBits;
use crate::error::{Error, Result};

pub fn qpsk_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::OddLength(bits.len()));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|p| {
            let re = if p[0] == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            let im = if p[1] == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            Complex64::new(re, im)
        })
        .collect())
}

/// Per-bit LLRs for equalised symbols with complex noise variance `noise_var`.
pub fn qpsk_soft_demap(symbols: &[Complex64], noise_var: f64) -> SoftBits {
    let scale = 2.0 * std::f64::consts::SQRT_2 / noise_var.max(1e-12);
    let mut out = Vec::with_capacity(symbols.len() * 2);
    for s in symbols {
        out.push((s.re * scale) as f32);
        out.push((s.im * scale) as f32);
    }
    out
}

/// Complex AWGN sample with total variance `noise_var`.
pub fn complex_noise<R: rand::Rng + ?Sized>(rng: &mut R, noise_var: f64) -> Complex64 {
    use rand_distr::{Distribution, StandardNormal};
    let sd = (noise_var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * sd, im * sd)
}

/// Maps bits to QPSK, adds AWGN at `snr_db` (symbol energy over noise) and
/// returns the demapped LLRs. Bit count must be even.
pub fn awgn_qpsk_llr<R: rand::Rng + ?Sized>(bits: &[u8], snr_db: f32, rng: &mut R) -> SoftBits {
    let noise_var = 10f64.powf(-f64::from(snr_db) / 10.0);
    let rx: Vec<Complex64> = qpsk_map(bits)
        .expect("even bit count")
        .into_iter()
        .map(|s| s + complex_noise(rng, noise_var))
        .collect();
    qpsk_soft_demap(&rx, noise_var)
}
