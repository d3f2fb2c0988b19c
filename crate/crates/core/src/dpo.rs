//! Preference-pair construction for DPO training data.
//!
//! For every prompt, the purest qualifying preferred response becomes
//! `chosen` and the most contaminated qualifying candidate becomes `rejected`.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{write_jsonl, GenerationRecord, PromptRecord};
use crate::error::Error;
use crate::metrics::{score, PurityScore};
use crate::script_policy::ScriptPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoThresholds {
    /// A preferred response qualifies when its OLR is at most this.
    pub chosen_max_olr: f64,
    /// A candidate qualifies as rejected when its OLR is at least this.
    pub rejected_min_olr: f64,
}

impl Default for DpoThresholds {
    fn default() -> Self {
        DpoThresholds {
            chosen_max_olr: 0.02,
            rejected_min_olr: 0.10,
        }
    }
}

impl DpoThresholds {
    pub fn validate(&self) -> Result<(), Error> {
        for (name, v) in [
            ("chosen_max_olr", self.chosen_max_olr),
            ("rejected_min_olr", self.rejected_min_olr),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTriplet {
    pub prompt_id: String,
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub chosen_olr: f64,
    pub rejected_olr: f64,
    pub chosen_source: Source,
    pub rejected_source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Source {
    pub model_id: String,
    pub run_id: String,
}

/// One line of the training file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
}

/// One line of the sidecar; line `i` describes line `i` of the training file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub prompt_id: String,
    pub chosen_olr: f64,
    pub rejected_olr: f64,
    pub chosen_model_id: String,
    pub chosen_run_id: String,
    pub rejected_model_id: String,
    pub rejected_run_id: String,
    pub policy_preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BuildSummary {
    pub prompts: usize,
    pub emitted: usize,
    pub skipped_no_preferred: usize,
    pub skipped_preferred_impure: usize,
    pub skipped_no_candidate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpoBuild {
    pub triplets: Vec<PreferenceTriplet>,
    pub summary: BuildSummary,
}

struct Scored<'a> {
    rec: &'a GenerationRecord,
    score: PurityScore,
}

// Lexicographically smallest run_id, then earliest timestamp, then model_id.
fn provenance_order(a: &GenerationRecord, b: &GenerationRecord) -> Ordering {
    a.run_id
        .cmp(&b.run_id)
        .then(a.timestamp.cmp(&b.timestamp))
        .then(a.model_id.cmp(&b.model_id))
}

fn group<'a>(
    records: &'a [GenerationRecord],
    known: &HashSet<&str>,
    policy: &ScriptPolicy,
) -> Result<HashMap<&'a str, Vec<Scored<'a>>>, Error> {
    let mut map: HashMap<&str, Vec<Scored>> = HashMap::new();
    for rec in records {
        if !known.contains(rec.prompt_id.as_str()) {
            return Err(Error::UnknownPrompt(rec.prompt_id.clone()));
        }
        map.entry(rec.prompt_id.as_str()).or_default().push(Scored {
            rec,
            score: score(&rec.text, policy),
        });
    }
    Ok(map)
}

pub fn build_pairs(
    prompts: &[PromptRecord],
    preferred: &[GenerationRecord],
    candidates: &[GenerationRecord],
    policy: &ScriptPolicy,
    thresholds: DpoThresholds,
) -> Result<DpoBuild, Error> {
    thresholds.validate()?;
    let known: HashSet<&str> = prompts.iter().map(|p| p.id.as_str()).collect();
    let preferred = group(preferred, &known, policy)?;
    let candidates = group(candidates, &known, policy)?;

    let mut summary = BuildSummary {
        prompts: prompts.len(),
        ..Default::default()
    };
    let mut triplets = Vec::new();
    for prompt in prompts {
        let Some(pref) = preferred.get(prompt.id.as_str()) else {
            summary.skipped_no_preferred += 1;
            continue;
        };
        let chosen = pref
            .iter()
            .filter(|s| !s.score.degenerate && s.score.olr <= thresholds.chosen_max_olr)
            .min_by(|a, b| {
                a.score
                    .olr
                    .total_cmp(&b.score.olr)
                    .then_with(|| provenance_order(a.rec, b.rec))
            });
        let Some(chosen) = chosen else {
            summary.skipped_preferred_impure += 1;
            continue;
        };
        let rejected = candidates.get(prompt.id.as_str()).and_then(|cands| {
            cands
                .iter()
                .filter(|s| {
                    let flagged = s.rec.annotation.as_deref().is_some_and(|a| !a.is_empty());
                    !s.score.degenerate
                        && (s.score.olr >= thresholds.rejected_min_olr || flagged)
                        && s.score.olr > chosen.score.olr
                        && s.rec.text != chosen.rec.text
                })
                // max OLR; on ties the provenance-smallest record wins
                .min_by(|a, b| {
                    b.score
                        .olr
                        .total_cmp(&a.score.olr)
                        .then_with(|| provenance_order(a.rec, b.rec))
                })
        });
        let Some(rejected) = rejected else {
            summary.skipped_no_candidate += 1;
            continue;
        };
        triplets.push(PreferenceTriplet {
            prompt_id: prompt.id.clone(),
            prompt: prompt.prompt_text(),
            chosen: chosen.rec.text.clone(),
            rejected: rejected.rec.text.clone(),
            chosen_olr: chosen.score.olr,
            rejected_olr: rejected.score.olr,
            chosen_source: Source {
                model_id: chosen.rec.model_id.clone(),
                run_id: chosen.rec.run_id.clone(),
            },
            rejected_source: Source {
                model_id: rejected.rec.model_id.clone(),
                run_id: rejected.rec.run_id.clone(),
            },
            annotation: rejected.rec.annotation.clone(),
        });
    }
    summary.emitted = triplets.len();
    Ok(DpoBuild { triplets, summary })
}

/// `pairs.jsonl` -> `pairs.meta.jsonl`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name.strip_suffix(".jsonl").unwrap_or(&name);
    path.with_file_name(format!("{stem}.meta.jsonl"))
}

/// Write the training file and its provenance sidecar.
pub fn write_pairs(path: &Path, triplets: &[PreferenceTriplet], policy_preset: &str) -> Result<PathBuf, Error> {
    let pairs: Vec<TrainingPair> = triplets
        .iter()
        .map(|t| TrainingPair {
            prompt: t.prompt.clone(),
            chosen: t.chosen.clone(),
            rejected: t.rejected.clone(),
        })
        .collect();
    let meta: Vec<PairMeta> = triplets
        .iter()
        .map(|t| PairMeta {
            prompt_id: t.prompt_id.clone(),
            chosen_olr: t.chosen_olr,
            rejected_olr: t.rejected_olr,
            chosen_model_id: t.chosen_source.model_id.clone(),
            chosen_run_id: t.chosen_source.run_id.clone(),
            rejected_model_id: t.rejected_source.model_id.clone(),
            rejected_run_id: t.rejected_source.run_id.clone(),
            policy_preset: policy_preset.to_string(),
            annotation: t.annotation.clone(),
        })
        .collect();
    write_jsonl(path, &pairs)?;
    let side = sidecar_path(path);
    write_jsonl(&side, &meta)?;
    Ok(side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DecodingConfig;

    fn prompt(id: &str) -> PromptRecord {
        PromptRecord {
            id: id.into(),
            family: "bilingual_purity".into(),
            instruction: "改寫".into(),
            input: "mixed 文字".into(),
        }
    }

    fn gen(id: &str, run: &str, text: &str) -> GenerationRecord {
        GenerationRecord::new(id, "m", run, text, DecodingConfig::paper_fixed())
    }

    fn build(pref: &[GenerationRecord], cands: &[GenerationRecord]) -> DpoBuild {
        build_pairs(
            &[prompt("p")],
            pref,
            cands,
            &ScriptPolicy::paper_strict(),
            DpoThresholds::default(),
        )
        .unwrap()
    }

    // 10 counted characters with `k` Latin letters.
    fn text_with_olr_tenths(k: usize) -> String {
        "A".repeat(k) + &"中".repeat(10 - k)
    }

    #[test]
    fn picks_most_contaminated_candidate() {
        // olr 0.30 and 0.05: only the first clears the 0.10 floor.
        let c1 = gen("p", "r1", &text_with_olr_tenths(3));
        let c2 = gen("p", "r2", &("A".to_string() + &"中".repeat(19)));
        let out = build(&[gen("p", "gold", "純中文")], &[c2, c1]);
        assert_eq!(out.triplets.len(), 1);
        let t = &out.triplets[0];
        assert!((t.rejected_olr - 0.30).abs() < 1e-12);
        assert_eq!(t.chosen_olr, 0.0);
        assert_eq!(t.prompt, "改寫\n\nmixed 文字");
    }

    #[test]
    fn no_candidate_above_floor() {
        let c = gen("p", "r", &("A".to_string() + &"中".repeat(19)));
        let out = build(&[gen("p", "gold", "純中文")], &[c]);
        assert!(out.triplets.is_empty());
        assert_eq!(out.summary.skipped_no_candidate, 1);
    }

    #[test]
    fn impure_preferred_disqualified() {
        let out = build(&[gen("p", "gold", "中A")], &[gen("p", "r", "AAAA")]);
        assert!(out.triplets.is_empty());
        assert_eq!(out.summary.skipped_preferred_impure, 1);
    }

    #[test]
    fn missing_preferred_tallied() {
        let out = build(&[], &[gen("p", "r", "AAAA")]);
        assert_eq!(out.summary.skipped_no_preferred, 1);
        assert_eq!(out.summary.emitted, 0);
    }

    #[test]
    fn ties_break_on_run_id() {
        let a = gen("p", "run-b", &text_with_olr_tenths(5));
        let b = gen("p", "run-a", &("B".repeat(5) + &"文".repeat(5)));
        let out = build(&[gen("p", "gold", "純中文")], &[a, b]);
        assert_eq!(out.triplets[0].rejected_source.run_id, "run-a");
    }

    #[test]
    fn annotated_candidate_bypasses_floor_only() {
        let mut c = gen("p", "r", &("A".to_string() + &"中".repeat(19)));
        c.annotation = Some("faithfulness".into());
        let out = build(&[gen("p", "gold", "純中文")], &[c.clone()]);
        assert_eq!(out.triplets.len(), 1);
        assert_eq!(out.triplets[0].annotation.as_deref(), Some("faithfulness"));

        // Still must be strictly worse than chosen.
        c.text = "也是純中文".into();
        let out = build(&[gen("p", "gold", "純中文")], &[c]);
        assert!(out.triplets.is_empty());
    }

    #[test]
    fn degenerate_responses_never_pair() {
        let out = build(&[gen("p", "gold", "純中文")], &[gen("p", "r", "")]);
        assert!(out.triplets.is_empty());
        let out = build(&[gen("p", "gold", "  ")], &[gen("p", "r", "AAAA")]);
        assert_eq!(out.summary.skipped_preferred_impure, 1);
    }

    #[test]
    fn unknown_prompt_errors() {
        let err = build_pairs(
            &[prompt("p")],
            &[gen("q", "gold", "純")],
            &[],
            &ScriptPolicy::paper_strict(),
            DpoThresholds::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownPrompt(ref id) if id == "q"));
    }

    #[test]
    fn thresholds_validated() {
        let t = DpoThresholds {
            chosen_max_olr: 1.5,
            rejected_min_olr: 0.1,
        };
        assert!(build_pairs(&[], &[], &[], &ScriptPolicy::paper_strict(), t).is_err());
    }

    #[test]
    fn sidecar_naming() {
        assert_eq!(
            sidecar_path(Path::new("out/dpo_pairs.jsonl")),
            Path::new("out/dpo_pairs.meta.jsonl")
        );
        assert_eq!(sidecar_path(Path::new("pairs")), Path::new("pairs.meta.jsonl"));
    }

    #[test]
    fn writes_pair_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let out = build(&[gen("p", "gold", "純中文")], &[gen("p", "r", "AAAA")]);
        let path = dir.path().join("dpo_pairs.jsonl");
        let side = write_pairs(&path, &out.triplets, "paper-strict").unwrap();
        let line = std::fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(v.as_object().unwrap().len(), 3);
        assert_eq!(v["chosen"], "純中文");
        let meta = std::fs::read_to_string(side).unwrap();
        assert!(meta.contains("\"rejected_olr\":1.0"));
    }
}
