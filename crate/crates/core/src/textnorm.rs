//! Pre-scoring text normalization.
//!
//! The pipeline is NFKC followed by whitespace unification: every maximal run
//! of `White_Space` scalar values becomes one U+0020 and the result is trimmed.
//! Letter case is never touched.

use std::fmt;

use unicode_normalization::UnicodeNormalization;

use crate::error::Error;

/// Text that has been through [`normalize`].
///
/// Lengths are counted in Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NormalizedText {
    text: String,
    original_length: usize,
    normalized_length: usize,
}

impl NormalizedText {
    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }

    /// Scalar-value count of the raw input.
    pub fn original_length(&self) -> usize {
        self.original_length
    }

    /// Scalar-value count of the normalized text.
    pub fn normalized_length(&self) -> usize {
        self.normalized_length
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    pub fn chars(&self) -> std::str::Chars<'_> {
        self.text.chars()
    }
}

impl AsRef<str> for NormalizedText {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for NormalizedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// NFKC, then collapse whitespace runs to a single ASCII space and trim.
pub fn normalize(raw: &str) -> NormalizedText {
    let original_length = raw.chars().count();
    let mut text = String::with_capacity(raw.len());
    let mut pending_space = false;
    let mut normalized_length = 0;
    for c in raw.nfkc() {
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space && !text.is_empty() {
            text.push(' ');
            normalized_length += 1;
        }
        pending_space = false;
        text.push(c);
        normalized_length += 1;
    }
    NormalizedText {
        text,
        original_length,
        normalized_length,
    }
}

/// Decode UTF-8 bytes (e.g. read from a file) and normalize them.
///
/// Invalid input is reported with the byte offset of the first bad sequence.
pub fn normalize_bytes(raw: &[u8]) -> Result<NormalizedText, Error> {
    match std::str::from_utf8(raw) {
        Ok(s) => Ok(normalize(s)),
        Err(e) => Err(Error::Decode {
            offset: e.valid_up_to(),
        }),
    }
}
