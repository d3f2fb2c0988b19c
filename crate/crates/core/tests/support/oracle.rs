//! Brute-force reference classifier.
//!
//! Independent of the production classifier: Han blocks are a separate
//! transcription scanned linearly, and every other property comes from the
//! `ucd17_props.txt` fixture rather than a Unicode library.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

/// Blocks.txt entries for the Han ideograph blocks, as `(first, last)`.
pub const HAN_BLOCKS: &[(u32, u32)] = &[
    (0x4E00, 0x9FFF),   // CJK Unified Ideographs
    (0x3400, 0x4DBF),   // Extension A
    (0x20000, 0x2A6DF), // Extension B
    (0x2A700, 0x2B73F), // Extension C
    (0x2B740, 0x2B81F), // Extension D
    (0x2B820, 0x2CEAF), // Extension E
    (0x2CEB0, 0x2EBEF), // Extension F
    (0x2EBF0, 0x2EE5F), // Extension I
    (0x30000, 0x3134F), // Extension G
    (0x31350, 0x323AF), // Extension H
    (0xF900, 0xFAFF),   // CJK Compatibility Ideographs
    (0x2F800, 0x2FA1F), // CJK Compatibility Ideographs Supplement
];

pub const CJK_PUNCT: &[(u32, u32)] = &[(0x3000, 0x303F), (0xFF01, 0xFF65), (0xFE30, 0xFE4F)];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("..")
        .join("core")
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn load_ucd() -> HashMap<String, Vec<(u32, u32)>> {
    let text = std::fs::read_to_string(fixture_path("ucd17_props.txt")).expect("ucd fixture");
    let mut out: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
    let mut current = String::new();
    for line in text.lines() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.split(']').next().unwrap().to_string();
            out.entry(current.clone()).or_default();
            continue;
        }
        let (a, b) = line.split_once("..").unwrap();
        out.get_mut(&current)
            .unwrap()
            .push((u32::from_str_radix(a, 16).unwrap(), u32::from_str_radix(b, 16).unwrap()));
    }
    out
}

const ND: u8 = 1;
const WS: u8 = 2;
const LETTER: u8 = 4;
const MARK: u8 = 8;
const PUNCT: u8 = 16;
const SYMBOL: u8 = 32;
const NUMBER: u8 = 64;
const LATIN: u8 = 128;

/// One flag byte per code point.
pub struct Oracle {
    flags: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    pub cjk_punct_legal: bool,
    pub skip_whitespace: bool,
    pub ascii_digits_only: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            cjk_punct_legal: false,
            skip_whitespace: true,
            ascii_digits_only: false,
        }
    }
}

impl Oracle {
    pub fn new() -> Self {
        let ucd = load_ucd();
        let mut flags = vec![0u8; 0x110000];
        for (section, bit) in [
            ("Nd", ND),
            ("White_Space", WS),
            ("Letter", LETTER),
            ("Mark", MARK),
            ("Punctuation", PUNCT),
            ("Symbol", SYMBOL),
            ("Letter_Number", NUMBER),
            ("Other_Number", NUMBER),
            ("Script_Latin", LATIN),
        ] {
            for &(lo, hi) in &ucd[section] {
                for cp in lo..=hi {
                    flags[cp as usize] |= bit;
                }
            }
        }
        Oracle { flags }
    }

    pub fn nd_ranges() -> Vec<(u32, u32)> {
        load_ucd().remove("Nd").unwrap()
    }

    pub fn is_han(cp: u32) -> bool {
        HAN_BLOCKS.iter().any(|&(lo, hi)| lo <= cp && cp <= hi)
    }

    /// `(class name, legal, counted)`.
    pub fn verdict(&self, cp: u32, opts: OracleOptions) -> (&'static str, bool, bool) {
        let f = self.flags[cp as usize];
        let in_punct = CJK_PUNCT.iter().any(|&(lo, hi)| lo <= cp && cp <= hi);
        let (class, legal) = if Self::is_han(cp) {
            ("han_ideograph", true)
        } else if f & ND != 0 {
            ("decimal_digit", !opts.ascii_digits_only || (0x30..=0x39).contains(&cp))
        } else if f & WS != 0 {
            ("whitespace", false)
        } else if in_punct && f & LETTER == 0 {
            ("cjk_punctuation", opts.cjk_punct_legal)
        } else if f & LETTER != 0 && f & LATIN != 0 {
            ("latin_letter", false)
        } else if f & (LETTER | MARK) != 0 {
            ("other_letter", false)
        } else if f & PUNCT != 0 {
            ("other_punctuation", false)
        } else if f & (SYMBOL | NUMBER) != 0 {
            ("other_symbol", false)
        } else {
            ("control", false)
        };
        let counted = !(class == "whitespace" && opts.skip_whitespace);
        (class, legal, counted)
    }

    /// Naive OLR over an already-normalized string. `None` when degenerate.
    pub fn olr(&self, normalized: &str, opts: OracleOptions) -> Option<(usize, usize, f64)> {
        let mut counted = 0usize;
        let mut illegal = 0usize;
        for c in normalized.chars() {
            let (_, legal, is_counted) = self.verdict(c as u32, opts);
            if is_counted {
                counted += 1;
                if !legal {
                    illegal += 1;
                }
            }
        }
        if counted == 0 {
            None
        } else {
            Some((counted, illegal, illegal as f64 / counted as f64))
        }
    }
}
