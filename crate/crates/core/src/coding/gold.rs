//! Length-31 Gold pseudo-random sequence generator.

const NC: usize = 1600;

/// `length` output bits of the Gold sequence initialised with `c_init`.
pub fn gold_sequence(c_init: u32, length: usize) -> Vec<u8> {
    // bit i of each register holds x(n + i)
    let mut x1: u32 = 1;
    let mut x2: u32 = c_init & 0x7FFF_FFFF;
    let step = |x1: &mut u32, x2: &mut u32| {
        let f1 = (*x1 ^ (*x1 >> 3)) & 1;
        let f2 = (*x2 ^ (*x2 >> 1) ^ (*x2 >> 2) ^ (*x2 >> 3)) & 1;
        *x1 = (*x1 >> 1) | (f1 << 30);
        *x2 = (*x2 >> 1) | (f2 << 30);
    };
    for _ in 0..NC {
        step(&mut x1, &mut x2);
    }
    let mut out = Vec::with_capacity(length);
    for _ in 0..length {
        out.push(((x1 ^ x2) & 1) as u8);
        step(&mut x1, &mut x2);
    }
    out
}

/// In-place XOR of `bits` with a Gold sequence.
pub fn scramble_bits(bits: &mut [u8], c_init: u32) {
    let seq = gold_sequence(c_init, bits.len());
    for (b, c) in bits.iter_mut().zip(seq) {
        *b ^= c;
    }
}

/// Descrambles LLRs: a sequence 1 flips the sign.
pub fn descramble_llr(llr: &mut [f32], seq: &[u8]) {
    for (l, &c) in llr.iter_mut().zip(seq) {
        if c == 1 {
            *l = -*l;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct transcription of the recurrences over explicit vectors.
    fn naive(c_init: u32, len: usize) -> Vec<u8> {
        let total = NC + len + 31;
        let mut x1 = vec![0u8; total];
        let mut x2 = vec![0u8; total];
        x1[0] = 1;
        for i in 0..31 {
            x2[i] = ((c_init >> i) & 1) as u8;
        }
        for n in 0..total - 31 {
            x1[n + 31] = (x1[n + 3] + x1[n]) % 2;
            x2[n + 31] = (x2[n + 3] + x2[n + 2] + x2[n + 1] + x2[n]) % 2;
        }
        (0..len).map(|n| (x1[n + NC] + x2[n + NC]) % 2).collect()
    }

    #[test]
    fn first_outputs_match_step_by_step_oracle() {
        for seed in [0u32, 0x7FFF_FFFF, 1, 0x1234_5678 & 0x7FFF_FFFF] {
            assert_eq!(gold_sequence(seed, 8), naive(seed, 8), "seed {seed:#x}");
            assert_eq!(gold_sequence(seed, 500), naive(seed, 500));
        }
        // frozen from the oracle above
        assert_eq!(naive(0, 8), vec![0, 0, 0, 0, 0, 0, 1, 0]);
    }

    #[test]
    fn deterministic() {
        assert_eq!(gold_sequence(4242, 300), gold_sequence(4242, 300));
    }

    #[test]
    fn distinct_seeds_are_uncorrelated() {
        for (a, b) in [(1u32, 2u32), (100, 101), (503, 1 << 20)] {
            let sa = gold_sequence(a, 1000);
            let sb = gold_sequence(b, 1000);
            let corr: i32 = sa
                .iter()
                .zip(&sb)
                .map(|(&x, &y)| if x == y { 1 } else { -1 })
                .sum();
            assert!((corr as f64 / 1000.0).abs() < 0.1, "{a} {b}: {corr}");
        }
    }
}
