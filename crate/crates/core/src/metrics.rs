//! Other-Language Rate and Pass@TC.
//!
//! `olr = illegal / counted` over the counted characters of the normalized
//! text, `pass_tc = (olr == 0)`. Text that is empty after normalization is
//! degenerate: `olr = 1`, `pass_tc = false`.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::corpus::{GenerationRecord, RecordKey};
use crate::error::Error;
use crate::script_policy::{CharClass, ScriptPolicy};
use crate::textnorm::{normalize, NormalizedText};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurityScore {
    pub olr: f64,
    pub pass_tc: bool,
    pub counted_chars: usize,
    pub illegal_chars: usize,
    /// Empty after normalization.
    pub degenerate: bool,
    /// Every character of the normalized text, counted or skipped.
    pub class_histogram: BTreeMap<CharClass, usize>,
}

impl PurityScore {
    fn from_tallies(counted_chars: usize, illegal_chars: usize, class_histogram: BTreeMap<CharClass, usize>) -> Self {
        if counted_chars == 0 {
            return PurityScore {
                olr: 1.0,
                pass_tc: false,
                counted_chars,
                illegal_chars,
                degenerate: true,
                class_histogram,
            };
        }
        PurityScore {
            olr: illegal_chars as f64 / counted_chars as f64,
            pass_tc: illegal_chars == 0,
            counted_chars,
            illegal_chars,
            degenerate: false,
            class_histogram,
        }
    }
}

/// Normalize `raw` and score it.
pub fn score(raw: &str, policy: &ScriptPolicy) -> PurityScore {
    score_normalized(&normalize(raw), policy)
}

/// Score text that has already been normalized.
pub fn score_normalized(text: &NormalizedText, policy: &ScriptPolicy) -> PurityScore {
    let mut counted = 0usize;
    let mut illegal = 0usize;
    let mut histogram = BTreeMap::new();
    for c in text.chars() {
        let v = policy.classify(c);
        *histogram.entry(v.class).or_insert(0) += 1;
        if v.counted {
            counted += 1;
            if !v.legal {
                illegal += 1;
            }
        }
    }
    PurityScore::from_tallies(counted, illegal, histogram)
}

fn check_unique(records: &[GenerationRecord]) -> Result<(), Error> {
    let mut seen = HashSet::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.key()) {
            return Err(Error::DuplicateId {
                id: r.key().to_string(),
                path: None,
                line: None,
            });
        }
    }
    Ok(())
}

/// Score every record, preserving input order.
///
/// Uses rayon when the `parallel` feature is enabled; the output is the same
/// either way.
pub fn score_batch(
    records: &[GenerationRecord],
    policy: &ScriptPolicy,
) -> Result<Vec<(RecordKey, PurityScore)>, Error> {
    check_unique(records)?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        Ok(records.par_iter().map(|r| (r.key(), score(&r.text, policy))).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(score_all(records, policy))
    }
}

/// Single-threaded [`score_batch`].
pub fn score_batch_sequential(
    records: &[GenerationRecord],
    policy: &ScriptPolicy,
) -> Result<Vec<(RecordKey, PurityScore)>, Error> {
    check_unique(records)?;
    Ok(score_all(records, policy))
}

fn score_all(records: &[GenerationRecord], policy: &ScriptPolicy) -> Vec<(RecordKey, PurityScore)> {
    records.iter().map(|r| (r.key(), score(&r.text, policy))).collect()
}
