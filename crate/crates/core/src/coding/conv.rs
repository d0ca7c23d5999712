//! Rate-1/3 tail-biting convolutional code, constraint length 7.
//!
//! Codewords are stream-major: `[d0 | d1 | d2]`, each stream as long as the
//! payload. The encoder starts from the last six payload bits, so the trellis
//! begins and ends in the same state.

use std::sync::LazyLock;

use super::{BitString, SoftBits};
use crate::error::{Error, Result};
use crate::tables::tables;

const STATES: usize = 64;

struct Trellis {
    polys: [u32; 3],
    /// Output bit pattern (d0 d1 d2 as bits 2..0) for each 7-bit register.
    out: [u8; 128],
}

static TRELLIS: LazyLock<Trellis> = LazyLock::new(|| {
    let spec = &tables().conv;
    assert_eq!(spec.constraint_length, 7);
    assert_eq!(spec.polys.len(), 3);
    let polys = [spec.polys[0], spec.polys[1], spec.polys[2]];
    let mut out = [0u8; 128];
    for (r, o) in out.iter_mut().enumerate() {
        for p in polys {
            *o = (*o << 1) | ((r as u32 & p).count_ones() & 1) as u8;
        }
    }
    Trellis { polys, out }
});

/// Register layout: bit 6 = current input, bit 0 = input six steps ago.
/// Before the first step it holds c_{-1}..c_{-6} in bits 6..1.
pub fn conv_encode(payload: &[u8]) -> Result<BitString> {
    let k = payload.len();
    if k == 0 {
        return Err(Error::EmptyPayload);
    }
    let t = &*TRELLIS;
    let mut reg: u32 = 0;
    for i in 1..=6 {
        // c_{-i} wraps to the tail of the payload
        let bit = u32::from(payload[(k * 6 + k - i) % k]);
        reg |= bit << (7 - i);
    }
    let mut out = vec![0u8; 3 * k];
    for (i, &b) in payload.iter().enumerate() {
        reg = (reg >> 1) | (u32::from(b) << 6);
        for (s, p) in t.polys.iter().enumerate() {
            out[s * k + i] = ((reg & p).count_ones() & 1) as u8;
        }
    }
    Ok(out)
}

/// Wrap-around Viterbi decoder over three passes of the circular trellis;
/// the decision is read from the middle pass.
pub fn conv_decode(soft: &[f32], payload_len: usize) -> Result<BitString> {
    if payload_len == 0 {
        return Err(Error::EmptyPayload);
    }
    if soft.len() != 3 * payload_len {
        return Err(Error::Dimension {
            expected: 3 * payload_len,
            got: soft.len(),
        });
    }
    let mut scratch = ViterbiScratch::default();
    Ok(scratch.decode(soft, payload_len))
}

/// Reusable decoder buffers.
#[derive(Default)]
pub struct ViterbiScratch {
    decisions: Vec<u64>,
}

impl ViterbiScratch {
    /// Same as [`conv_decode`] with caller-owned scratch; lengths must agree.
    pub fn decode(&mut self, soft: &[f32], k: usize) -> BitString {
        debug_assert_eq!(soft.len(), 3 * k);
        let t = &*TRELLIS;
        let steps = 3 * k;
        self.decisions.clear();
        self.decisions.resize(steps, 0);
        let mut metric = [0f32; STATES];
        let mut next = [0f32; STATES];
        for step in 0..steps {
            let i = step % k;
            let (l0, l1, l2) = (soft[i], soft[k + i], soft[2 * k + i]);
            // metric contribution for each of the 8 output patterns
            let mut bm = [0f32; 8];
            for (pat, m) in bm.iter_mut().enumerate() {
                let s = |bit: usize, l: f32| if pat >> bit & 1 == 0 { l } else { -l };
                *m = s(2, l0) + s(1, l1) + s(0, l2);
            }
            let mut dec: u64 = 0;
            for ns in 0..STATES {
                let r0 = ns << 1;
                let r1 = r0 | 1;
                let p0 = (ns << 1) & 63;
                let m0 = metric[p0] + bm[t.out[r0] as usize];
                let m1 = metric[p0 | 1] + bm[t.out[r1] as usize];
                if m1 > m0 {
                    next[ns] = m1;
                    dec |= 1 << ns;
                } else {
                    next[ns] = m0;
                }
            }
            self.decisions[step] = dec;
            let max = next.iter().copied().fold(f32::MIN, f32::max);
            for (m, n) in metric.iter_mut().zip(next.iter()) {
                *m = n - max;
            }
        }
        let mut state = metric
            .iter()
            .enumerate()
            .fold((0, f32::MIN), |best, (s, &m)| if m > best.1 { (s, m) } else { best })
            .0;
        let mut out = vec![0u8; k];
        for step in (k..steps).rev() {
            if step < 2 * k {
                out[step - k] = ((state >> 5) & 1) as u8;
            }
            let p = ((self.decisions[step] >> state) & 1) as usize;
            state = ((state << 1) & 63) | p;
        }
        out
    }
}

/// Convenience: perfect LLRs for a codeword.
pub fn codeword_llr(codeword: &[u8]) -> SoftBits {
    super::bits_to_llr(codeword, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::hamming;
    use proptest::prelude::*;

    /// Shift-register oracle: explicit circular convolution with the
    /// generator taps, independent of the packed-register encoder.
    fn oracle(payload: &[u8]) -> Vec<u8> {
        let taps: [[u8; 7]; 3] = [
            [1, 0, 1, 1, 0, 1, 1], // 133
            [1, 1, 1, 1, 0, 0, 1], // 171
            [1, 1, 1, 0, 1, 0, 1], // 165
        ];
        let k = payload.len() as isize;
        let mut out = Vec::new();
        for g in taps {
            for i in 0..k {
                let mut acc = 0u8;
                for (j, &t) in g.iter().enumerate() {
                    acc ^= t & payload[(i - j as isize).rem_euclid(k) as usize];
                }
                out.push(acc);
            }
        }
        out
    }

    fn all_payloads(len: usize) -> impl Iterator<Item = Vec<u8>> {
        (0u32..1 << len).map(move |v| (0..len).map(|i| ((v >> i) & 1) as u8).collect())
    }

    #[test]
    fn zero_payload_gives_zero_codeword() {
        assert!(conv_encode(&[0; 40]).unwrap().iter().all(|&b| b == 0));
    }

    #[test]
    fn single_one_matches_oracle() {
        let p = [0, 0, 0, 1, 0, 0, 0, 0];
        let expect = vec![
            1, 1, 0, 1, 0, 1, 1, 0, // d0
            0, 1, 0, 1, 1, 1, 1, 0, // d1
            0, 1, 0, 1, 1, 1, 0, 1, // d2
        ];
        assert_eq!(oracle(&p), expect);
        assert_eq!(conv_encode(&p).unwrap(), expect);
    }

    #[test]
    fn empty_payload_rejected() {
        assert!(conv_encode(&[]).is_err());
        assert!(conv_decode(&[], 0).is_err());
        assert!(conv_decode(&[1.0; 5], 2).is_err());
    }

    #[test]
    fn exhaustive_round_trip_small_lengths() {
        for len in 1..=10 {
            for p in all_payloads(len) {
                let cw = conv_encode(&p).unwrap();
                assert_eq!(cw, oracle(&p));
                assert_eq!(conv_decode(&codeword_llr(&cw), len).unwrap(), p);
            }
        }
    }

    #[test]
    fn min_distance_len10_allows_two_errors() {
        // minimum weight over all non-zero codewords of the linear code
        let dmin = all_payloads(10)
            .skip(1)
            .map(|p| conv_encode(&p).unwrap().iter().filter(|&&b| b == 1).count())
            .min()
            .unwrap();
        assert!(dmin >= 5, "dmin {dmin}");
        let p = vec![1, 0, 1, 1, 0, 0, 1, 0, 1, 1];
        let cw = conv_encode(&p).unwrap();
        for a in 0..30 {
            for b in a..30 {
                let mut llr = codeword_llr(&cw);
                llr[a] = -llr[a];
                if b != a {
                    llr[b] = -llr[b];
                }
                assert_eq!(conv_decode(&llr, 10).unwrap(), p, "flips {a},{b}");
            }
        }
    }

    #[test]
    fn zero_llrs_still_return_a_candidate() {
        assert_eq!(conv_decode(&[0.0; 60], 20).unwrap().len(), 20);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn noiseless_round_trip(p in proptest::collection::vec(0u8..2, 7..=64)) {
            let cw = conv_encode(&p).unwrap();
            prop_assert_eq!(conv_decode(&codeword_llr(&cw), p.len()).unwrap(), p);
        }

        #[test]
        fn encoder_is_linear(pair in (7usize..40).prop_flat_map(|n| (
            proptest::collection::vec(0u8..2, n),
            proptest::collection::vec(0u8..2, n),
        ))) {
            let (a, b) = pair;
            let x: Vec<u8> = a.iter().zip(&b).map(|(p, q)| p ^ q).collect();
            let ea = conv_encode(&a).unwrap();
            let eb = conv_encode(&b).unwrap();
            let sum: Vec<u8> = ea.iter().zip(&eb).map(|(p, q)| p ^ q).collect();
            prop_assert_eq!(hamming(&conv_encode(&x).unwrap(), &sum), 0);
        }
    }
}
