//! Per-family statistics, macro/micro averages and cross-model comparison.
//!
//! Macro averages weight every family equally; micro averages weight each
//! family by its record count. Means are exact rational sums rounded once to
//! `f64`, so they do not depend on record order. Rounding for display happens
//! in `render`, never here.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{Float, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::corpus::{ScoreRecord, TaskFamily};
use crate::error::Error;
use crate::metrics::PurityScore;

/// Anything carrying a per-record purity result.
pub trait Scored {
    fn olr(&self) -> f64;
    fn pass_tc(&self) -> bool;
    fn degenerate(&self) -> bool;
}

impl Scored for PurityScore {
    fn olr(&self) -> f64 {
        self.olr
    }
    fn pass_tc(&self) -> bool {
        self.pass_tc
    }
    fn degenerate(&self) -> bool {
        self.degenerate
    }
}

impl Scored for ScoreRecord {
    fn olr(&self) -> f64 {
        self.olr
    }
    fn pass_tc(&self) -> bool {
        self.pass_tc
    }
    fn degenerate(&self) -> bool {
        self.degenerate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyStats {
    pub family: String,
    pub display_name: String,
    pub n: usize,
    pub mean_olr: f64,
    /// Fraction in [0, 1].
    pub pass_rate: f64,
    pub degenerate_count: usize,
}

#[derive(Debug, Clone, Default)]
pub struct FamilyStatsOutcome {
    /// Manifest order; families without records are omitted.
    pub stats: Vec<FamilyStats>,
    pub warnings: Vec<String>,
}

/// Exact sum of finite doubles, as an integer multiple of 2^-1075.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    scaled: BigInt,
}

impl ExactSum {
    const SCALE: i32 = 1075;

    pub fn add(&mut self, v: f64) {
        self.add_weighted(1, v);
    }

    /// Adds `weight * v` exactly.
    pub fn add_weighted(&mut self, weight: u64, v: f64) {
        assert!(v.is_finite(), "non-finite value in exact sum");
        let (mantissa, exponent, sign) = v.integer_decode();
        let term = BigInt::from(mantissa) * BigInt::from(weight);
        let term = term << ((exponent as i32 + Self::SCALE) as usize);
        if sign < 0 {
            self.scaled -= term;
        } else {
            self.scaled += term;
        }
    }

    /// `sum / divisor`, correctly rounded to the nearest double.
    pub fn div(&self, divisor: u64) -> f64 {
        let denom = BigInt::from(divisor) << (Self::SCALE as usize);
        Ratio::new_raw(self.scaled.clone(), denom)
            .to_f64()
            .expect("finite ratio")
    }
}

/// Group `(family_key, score)` pairs by family.
pub fn family_stats<'a, S, I>(scores: I, manifest: &[TaskFamily]) -> Result<FamilyStatsOutcome, Error>
where
    S: Scored + 'a,
    I: IntoIterator<Item = (&'a str, &'a S)>,
{
    #[derive(Default)]
    struct Acc {
        olr_sum: ExactSum,
        n: usize,
        passes: usize,
        degenerate: usize,
    }
    let mut by_family: BTreeMap<&str, Acc> = BTreeMap::new();
    for (family, s) in scores {
        if !manifest.iter().any(|f| f.key == family) {
            return Err(Error::UnknownFamilyKey(family.to_string()));
        }
        let acc = by_family.entry(family).or_default();
        acc.olr_sum.add(s.olr());
        acc.n += 1;
        acc.passes += usize::from(s.pass_tc());
        acc.degenerate += usize::from(s.degenerate());
    }

    let mut out = FamilyStatsOutcome::default();
    for f in manifest {
        let Some(acc) = by_family.remove(f.key.as_str()) else {
            out.warnings.push(format!("family `{}` has no scored records", f.key));
            continue;
        };
        let n = acc.n;
        out.stats.push(FamilyStats {
            family: f.key.clone(),
            display_name: f.display_name.clone(),
            n,
            mean_olr: acc.olr_sum.div(n as u64),
            pass_rate: acc.passes as f64 / n as f64,
            degenerate_count: acc.degenerate,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub macro_olr: f64,
    pub macro_pass: f64,
    pub micro_olr: f64,
    pub micro_pass: f64,
}

pub fn macro_micro(per_family: &[FamilyStats]) -> Result<Averages, Error> {
    if per_family.is_empty() {
        return Err(Error::Aggregate("no families to average".into()));
    }
    if let Some(f) = per_family.iter().find(|f| f.n == 0) {
        return Err(Error::Aggregate(format!("family `{}` has n = 0", f.family)));
    }
    if let Some(f) = per_family
        .iter()
        .find(|f| !(f.mean_olr.is_finite() && f.pass_rate.is_finite()))
    {
        return Err(Error::Aggregate(format!(
            "family `{}` has a non-finite statistic",
            f.family
        )));
    }
    let k = per_family.len() as u64;
    let total: u64 = per_family.iter().map(|f| f.n as u64).sum();
    let mut m_olr = ExactSum::default();
    let mut m_pass = ExactSum::default();
    let mut w_olr = ExactSum::default();
    let mut w_pass = ExactSum::default();
    for f in per_family {
        m_olr.add(f.mean_olr);
        m_pass.add(f.pass_rate);
        w_olr.add_weighted(f.n as u64, f.mean_olr);
        w_pass.add_weighted(f.n as u64, f.pass_rate);
    }
    Ok(Averages {
        macro_olr: m_olr.div(k),
        macro_pass: m_pass.div(k),
        micro_olr: w_olr.div(total),
        micro_pass: w_pass.div(total),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub model_id: String,
    pub run_id: String,
    pub policy_preset: String,
    pub decoding_preset: String,
    pub per_family: Vec<FamilyStats>,
    pub macro_olr: f64,
    pub macro_pass: f64,
    pub micro_olr: f64,
    pub micro_pass: f64,
    /// Resolved run configuration, for provenance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl AggregateReport {
    pub fn new(
        model_id: &str,
        run_id: &str,
        policy_preset: &str,
        decoding_preset: &str,
        per_family: Vec<FamilyStats>,
    ) -> Result<Self, Error> {
        let avg = macro_micro(&per_family)?;
        Ok(AggregateReport {
            model_id: model_id.to_string(),
            run_id: run_id.to_string(),
            policy_preset: policy_preset.to_string(),
            decoding_preset: decoding_preset.to_string(),
            per_family,
            macro_olr: avg.macro_olr,
            macro_pass: avg.macro_pass,
            micro_olr: avg.micro_olr,
            micro_pass: avg.micro_pass,
            config: None,
        })
    }
}

/// `100 * (baseline - ours) / baseline`; `None` when the baseline is zero.
pub fn relative_reduction_pct(baseline: f64, ours: f64) -> Option<f64> {
    if baseline == 0.0 {
        None
    } else {
        Some(100.0 * (baseline - ours) / baseline)
    }
}

/// Pass-rate difference in percentage points; rates are fractions.
pub fn pp_delta(baseline: f64, ours: f64) -> f64 {
    100.0 * (ours - baseline)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub family: String,
    pub display_name: String,
    /// Positive means less contamination than the baseline.
    pub olr_rel_reduction_pct: Option<f64>,
    pub pass_pp_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub ours_model_id: String,
    pub baseline_model_id: String,
    pub policy_preset: String,
    pub per_family: Vec<ComparisonRow>,
    pub macro_avg: ComparisonRow,
    pub micro_avg: ComparisonRow,
}

pub fn compare(ours: &AggregateReport, baseline: &AggregateReport) -> Result<Comparison, Error> {
    if ours.policy_preset != baseline.policy_preset {
        return Err(Error::Incomparable(format!(
            "policy presets differ: `{}` vs `{}`",
            ours.policy_preset, baseline.policy_preset
        )));
    }
    let ours_keys: BTreeSet<&str> = ours.per_family.iter().map(|f| f.family.as_str()).collect();
    let base_keys: BTreeSet<&str> = baseline.per_family.iter().map(|f| f.family.as_str()).collect();
    if ours_keys != base_keys {
        let asym: Vec<&str> = ours_keys.symmetric_difference(&base_keys).copied().collect();
        return Err(Error::Incomparable(format!("family sets differ: {}", asym.join(", "))));
    }
    let per_family = ours
        .per_family
        .iter()
        .map(|o| {
            let b = baseline
                .per_family
                .iter()
                .find(|b| b.family == o.family)
                .expect("family sets checked above");
            ComparisonRow {
                family: o.family.clone(),
                display_name: o.display_name.clone(),
                olr_rel_reduction_pct: relative_reduction_pct(b.mean_olr, o.mean_olr),
                pass_pp_delta: pp_delta(b.pass_rate, o.pass_rate),
            }
        })
        .collect();
    Ok(Comparison {
        ours_model_id: ours.model_id.clone(),
        baseline_model_id: baseline.model_id.clone(),
        policy_preset: ours.policy_preset.clone(),
        per_family,
        macro_avg: ComparisonRow {
            family: "macro".into(),
            display_name: "Macro-Avg".into(),
            olr_rel_reduction_pct: relative_reduction_pct(baseline.macro_olr, ours.macro_olr),
            pass_pp_delta: pp_delta(baseline.macro_pass, ours.macro_pass),
        },
        micro_avg: ComparisonRow {
            family: "micro".into(),
            display_name: "Micro-Avg".into(),
            olr_rel_reduction_pct: relative_reduction_pct(baseline.micro_olr, ours.micro_olr),
            pass_pp_delta: pp_delta(baseline.micro_pass, ours.micro_pass),
        },
    })
}
