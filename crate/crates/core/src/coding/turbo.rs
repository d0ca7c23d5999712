//! Parallel-concatenated turbo code with QPP interleaver and an iterative
//! max-log-MAP decoder.
//!
//! Constituent encoders are 8-state RSC codes, feedback 1 + D^2 + D^3 and
//! feed-forward 1 + D + D^3, each terminated with three tail steps. Output is
//! stream-major `[d0 | d1 | d2]` with `K + 4` bits per stream.

use super::{hard, BitString, SoftBits};
use crate::error::{Error, Result};
use crate::tables::tables;

pub const MAX_ITERATIONS: usize = 8;
const EXTRINSIC_SCALE: f32 = 0.75;
const NEG: f32 = -1.0e30;

/// QPP interleaver for a shipped block size.
pub fn qpp_interleaver(k: usize) -> Result<Vec<usize>> {
    let &(f1, f2) = tables().qpp.get(&k).ok_or(Error::UnsupportedBlockSize(k))?;
    Ok((0..k).map(|i| (f1 * i + f2 * i * i) % k).collect())
}

pub fn supported_block_sizes() -> impl Iterator<Item = usize> {
    tables().qpp.keys().copied()
}

/// One RSC step: returns (parity, next state). State bits: s1 = bit 0.
#[inline]
fn rsc_step(state: u8, input: u8) -> (u8, u8) {
    let s1 = state & 1;
    let s2 = (state >> 1) & 1;
    let s3 = (state >> 2) & 1;
    let a = input ^ s2 ^ s3;
    let z = a ^ s1 ^ s3;
    (z, (a | (s1 << 1) | (s2 << 2)) & 7)
}

/// Encodes `input`, returning (parity, tail systematic, tail parity).
fn rsc_encode(input: &[u8]) -> (Vec<u8>, [u8; 3], [u8; 3]) {
    let mut state = 0u8;
    let parity = input
        .iter()
        .map(|&b| {
            let (z, ns) = rsc_step(state, b);
            state = ns;
            z
        })
        .collect();
    let mut xt = [0u8; 3];
    let mut zt = [0u8; 3];
    for i in 0..3 {
        // feeding the feedback value drives the register to zero
        let x = ((state >> 1) ^ (state >> 2)) & 1;
        let (z, ns) = rsc_step(state, x);
        xt[i] = x;
        zt[i] = z;
        state = ns;
    }
    debug_assert_eq!(state, 0);
    (parity, xt, zt)
}

pub fn turbo_encode(payload: &[u8]) -> Result<BitString> {
    let k = payload.len();
    let pi = qpp_interleaver(k)?;
    let (z1, x1t, z1t) = rsc_encode(payload);
    let interleaved: Vec<u8> = pi.iter().map(|&i| payload[i]).collect();
    let (z2, x2t, z2t) = rsc_encode(&interleaved);
    let d = k + 4;
    let mut out = vec![0u8; 3 * d];
    out[..k].copy_from_slice(payload);
    out[d..d + k].copy_from_slice(&z1);
    out[2 * d..2 * d + k].copy_from_slice(&z2);
    let tails = tail_layout(k);
    let vals = [x1t, z1t, x2t, z2t];
    for (which, pos) in tails.iter().enumerate() {
        for (j, &p) in pos.iter().enumerate() {
            out[p] = vals[which][j];
        }
    }
    Ok(out)
}

/// Codeword positions of the twelve tail bits: x, z, x', z' (three each).
fn tail_layout(k: usize) -> [[usize; 3]; 4] {
    let d = k + 4;
    let (s0, s1, s2) = (0, d, 2 * d);
    [
        [s0 + k, s2 + k, s1 + k + 1],         // x_K, x_K+1, x_K+2
        [s1 + k, s0 + k + 1, s2 + k + 1],     // z_K, z_K+1, z_K+2
        [s0 + k + 2, s2 + k + 2, s1 + k + 3], // x'_K ...
        [s1 + k + 2, s0 + k + 3, s2 + k + 3], // z'_K ...
    ]
}

/// Max-log-MAP over one constituent trellis. `sys` and `apriori` cover the
/// K information steps; tails are appended. Returns a-posteriori LLRs.
fn bcjr(sys: &[f32], par: &[f32], apriori: &[f32], tail_x: [f32; 3], tail_z: [f32; 3]) -> Vec<f32> {
    let k = sys.len();
    let n = k + 3;
    let sys_at = |i: usize| if i < k { sys[i] + apriori[i] } else { tail_x[i - k] };
    let par_at = |i: usize| if i < k { par[i] } else { tail_z[i - k] };
    // gamma for input u (0/1) with parity z: 0.5 * (Ls*(1-2u) + Lp*(1-2z))
    let mut alpha = vec![[NEG; 8]; n + 1];
    alpha[0][0] = 0.0;
    for i in 0..n {
        let (ls, lp) = (sys_at(i), par_at(i));
        for s in 0..8u8 {
            let a = alpha[i][s as usize];
            if a <= NEG {
                continue;
            }
            for u in 0..2u8 {
                let (z, ns) = rsc_step(s, u);
                let g = 0.5 * (sgn(u) * ls + sgn(z) * lp);
                let slot = &mut alpha[i + 1][ns as usize];
                *slot = slot.max(a + g);
            }
        }
        normalize(&mut alpha[i + 1]);
    }
    let mut beta = [NEG; 8];
    beta[0] = 0.0;
    let mut out = vec![0f32; k];
    for i in (0..n).rev() {
        let (ls, lp) = (sys_at(i), par_at(i));
        let mut nb = [NEG; 8];
        let mut best = [NEG; 2];
        for s in 0..8u8 {
            let a = alpha[i][s as usize];
            for u in 0..2u8 {
                let (z, ns) = rsc_step(s, u);
                let b = beta[ns as usize];
                if b <= NEG {
                    continue;
                }
                let g = 0.5 * (sgn(u) * ls + sgn(z) * lp);
                nb[s as usize] = nb[s as usize].max(g + b);
                if a > NEG {
                    best[u as usize] = best[u as usize].max(a + g + b);
                }
            }
        }
        normalize(&mut nb);
        beta = nb;
        if i < k {
            out[i] = best[0] - best[1];
        }
    }
    out
}

#[inline]
fn sgn(bit: u8) -> f32 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

fn normalize(m: &mut [f32; 8]) {
    let max = m.iter().copied().fold(NEG, f32::max);
    if max > NEG {
        m.iter_mut().for_each(|x| {
            if *x > NEG {
                *x -= max
            }
        });
    }
}

/// Outcome of an iterative decode.
#[derive(Debug, Clone)]
pub struct TurboOutcome {
    pub bits: BitString,
    pub iterations: usize,
    pub check_passed: bool,
}

/// Iterative decode, stopping early once `check` accepts the hard decision.
pub fn turbo_decode_with(
    soft: &[f32],
    payload_len: usize,
    check: impl Fn(&[u8]) -> bool,
) -> Result<TurboOutcome> {
    let k = payload_len;
    let pi = qpp_interleaver(k)?;
    let d = k + 4;
    if soft.len() != 3 * d {
        return Err(Error::Dimension {
            expected: 3 * d,
            got: soft.len(),
        });
    }
    let sys = &soft[..k];
    let par1 = &soft[d..d + k];
    let par2 = &soft[2 * d..2 * d + k];
    let tl = tail_layout(k);
    let pick = |idx: [usize; 3]| [soft[idx[0]], soft[idx[1]], soft[idx[2]]];
    let sys2: Vec<f32> = pi.iter().map(|&i| sys[i]).collect();

    let mut apriori1 = vec![0f32; k];
    let mut bits = vec![0u8; k];
    for it in 1..=MAX_ITERATIONS {
        let post1 = bcjr(sys, par1, &apriori1, pick(tl[0]), pick(tl[1]));
        let ext1: Vec<f32> = (0..k)
            .map(|i| EXTRINSIC_SCALE * (post1[i] - sys[i] - apriori1[i]))
            .collect();
        let apriori2: Vec<f32> = pi.iter().map(|&i| ext1[i]).collect();
        let post2 = bcjr(&sys2, par2, &apriori2, pick(tl[2]), pick(tl[3]));
        for (j, &i) in pi.iter().enumerate() {
            apriori1[i] = EXTRINSIC_SCALE * (post2[j] - sys2[j] - apriori2[j]);
            bits[i] = hard(post2[j]);
        }
        if check(&bits) {
            return Ok(TurboOutcome {
                bits,
                iterations: it,
                check_passed: true,
            });
        }
    }
    Ok(TurboOutcome {
        bits,
        iterations: MAX_ITERATIONS,
        check_passed: false,
    })
}

/// Plain decode: all iterations, no early exit.
pub fn turbo_decode(soft: &[f32], payload_len: usize) -> Result<BitString> {
    Ok(turbo_decode_with(soft, payload_len, |_| false)?.bits)
}

/// Soft values for a turbo codeword, used by tests and link checks.
pub fn turbo_llr(codeword: &[u8]) -> SoftBits {
    super::bits_to_llr(codeword, 4.0)
}
