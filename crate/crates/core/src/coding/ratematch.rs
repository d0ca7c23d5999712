//! Sub-block interleaving and circular-buffer rate matching.
//!
//! A [`RateMatcher`] is an index table: output bit `e` is codeword bit
//! `table[e]`, where codeword bits are addressed stream-major.

use super::{BitString, SoftBits};
use crate::tables::tables;

const COLS: usize = 32;

/// Column-permuted read-out of one stream. `None` marks a dummy position.
pub(crate) fn subblock(d: usize, turbo_parity: bool) -> Vec<Option<usize>> {
    let perm = &tables().subblock_perm;
    let rows = d.div_ceil(COLS);
    let kpi = rows * COLS;
    let nd = kpi - d;
    let y = |k: usize| if k < nd { None } else { Some(k - nd) };
    if turbo_parity {
        (0..kpi)
            .map(|k| y((perm[k / rows] + COLS * (k % rows) + 1) % kpi))
            .collect()
    } else {
        let mut v = Vec::with_capacity(kpi);
        for &col in perm.iter() {
            for row in 0..rows {
                v.push(y(row * COLS + col));
            }
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct RateMatcher {
    codeword_len: usize,
    table: Vec<usize>,
}

impl RateMatcher {
    /// Convolutional-code matcher: three streams of `d` bits to `e` bits.
    pub fn conv(d: usize, e: usize) -> Self {
        let mut w: Vec<usize> = Vec::with_capacity(3 * d);
        for s in 0..3 {
            w.extend(subblock(d, false).into_iter().flatten().map(|i| s * d + i));
        }
        Self::circular(&w, 0, e, 3 * d)
    }

    /// Turbo-code matcher (redundancy version 0, full circular buffer):
    /// three streams of `d = K + 4` bits to `e` bits.
    pub fn turbo(d: usize, e: usize) -> Self {
        let v0 = subblock(d, false);
        let v1 = subblock(d, false);
        let v2 = subblock(d, true);
        let kpi = v0.len();
        let rows = kpi / COLS;
        let mut w: Vec<Option<usize>> = Vec::with_capacity(3 * kpi);
        w.extend(v0);
        for k in 0..kpi {
            w.push(v1[k].map(|i| d + i));
            w.push(v2[k].map(|i| 2 * d + i));
        }
        // k0 = R * (2 * ceil(Ncb / 8R) * rv + 2) with rv = 0; dummies still count
        let k0 = 2 * rows;
        let ncb = w.len();
        let mut table = Vec::with_capacity(e);
        let mut j = 0;
        while table.len() < e {
            if let Some(i) = w[(k0 + j) % ncb] {
                table.push(i);
            }
            j += 1;
        }
        RateMatcher {
            codeword_len: 3 * d,
            table,
        }
    }

    fn circular(w: &[usize], k0: usize, e: usize, codeword_len: usize) -> Self {
        let table = (0..e).map(|j| w[(k0 + j) % w.len()]).collect();
        RateMatcher {
            codeword_len,
            table,
        }
    }

    pub fn output_len(&self) -> usize {
        self.table.len()
    }

    pub fn codeword_len(&self) -> usize {
        self.codeword_len
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn apply(&self, codeword: &[u8]) -> BitString {
        debug_assert_eq!(codeword.len(), self.codeword_len);
        self.table.iter().map(|&i| codeword[i]).collect()
    }

    /// Soft inverse: repeated positions accumulate, punctured ones stay 0.
    pub fn invert(&self, soft: &[f32]) -> SoftBits {
        let mut out = vec![0f32; self.codeword_len];
        self.invert_into(soft, &mut out);
        out
    }

    pub fn invert_into(&self, soft: &[f32], out: &mut [f32]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (&i, &l) in self.table.iter().zip(soft) {
            out[i] += l;
        }
    }
}

pub fn rate_match_conv(codeword: &[u8], target_len: usize) -> BitString {
    RateMatcher::conv(codeword.len() / 3, target_len).apply(codeword)
}

pub fn rate_dematch_conv(soft: &[f32], payload_len: usize) -> SoftBits {
    RateMatcher::conv(payload_len, soft.len()).invert(soft)
}
