//! Seeded generator of mixed-script strings.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

// (lo, hi) pools sampled uniformly by pool, then by code point.
const POOLS: &[(u32, u32)] = &[
    (0x4E00, 0x9FFF), // unified ideographs
    (0x4E00, 0x9FFF),
    (0x3400, 0x4DBF),   // ext A
    (0x20000, 0x2A6DF), // ext B
    (0x31350, 0x323AF), // ext H
    (0xF900, 0xFAFF),   // compatibility ideographs
    (0x2F00, 0x2FD5),   // Kangxi radicals
    (0x0041, 0x005A),   // A-Z
    (0x0061, 0x007A),   // a-z
    (0x0030, 0x0039),   // ASCII digits
    (0xFF10, 0xFF19),   // fullwidth digits
    (0xFF21, 0xFF3A),   // fullwidth Latin
    (0x0660, 0x0669),   // Arabic-Indic digits
    (0x3000, 0x303F),   // CJK symbols and punctuation
    (0xFF01, 0xFF0F),   // fullwidth punctuation
    (0x0020, 0x002F),   // ASCII space and punctuation
    (0x0009, 0x000D),   // control whitespace
    (0x3040, 0x309F),   // hiragana
    (0x0400, 0x04FF),   // Cyrillic
    (0x0300, 0x036F),   // combining marks
    (0x1F600, 0x1F64F), // emoji
    (0x2460, 0x24FF),   // enclosed alphanumerics
    (0x00A0, 0x00FF),   // Latin-1 supplement
    (0xAC00, 0xD7A3),   // Hangul syllables
];

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_char(rng: &mut StdRng) -> char {
    loop {
        let (lo, hi) = POOLS[rng.random_range(0..POOLS.len())];
        if let Some(c) = char::from_u32(rng.random_range(lo..=hi)) {
            return c;
        }
    }
}

pub fn random_string(rng: &mut StdRng, max_len: usize) -> String {
    let len = rng.random_range(0..=max_len);
    (0..len).map(|_| random_char(rng)).collect()
}

/// `n` strings from a fixed seed.
pub fn corpus(seed: u64, n: usize, max_len: usize) -> Vec<String> {
    let mut r = rng(seed);
    (0..n).map(|_| random_string(&mut r, max_len)).collect()
}
