//! On-disk record types and JSON Lines I/O.
//!
//! Every file is UTF-8 JSON Lines, one record per line. Text fields are
//! stored verbatim; nothing here normalizes.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, SubsecRound, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFamily {
    pub key: String,
    pub display_name: String,
    pub expected_n: u32,
}

impl TaskFamily {
    pub fn new(key: &str, display_name: &str, expected_n: u32) -> Self {
        TaskFamily {
            key: key.to_string(),
            display_name: display_name.to_string(),
            expected_n,
        }
    }
}

/// The eight evaluation families with their reference prompt counts (660 total).
pub fn default_manifest() -> Vec<TaskFamily> {
    vec![
        TaskFamily::new("entity_translation", "Entity Translation", 80),
        TaskFamily::new("bilingual_purity", "Bilingual Purity", 100),
        TaskFamily::new("sc_conversion", "Sc Conversion", 60),
        TaskFamily::new("structured_json", "Structured Json", 100),
        TaskFamily::new("content_organization", "Content Organization", 60),
        TaskFamily::new("long_form_summary", "Long-Form Summary", 60),
        TaskFamily::new("noise_robustness", "Noise Robustness", 100),
        TaskFamily::new("named_entity_translation", "Named Entity Translation", 100),
    ]
}

pub fn validate_manifest(manifest: &[TaskFamily]) -> Result<(), Error> {
    let mut seen = HashSet::new();
    for f in manifest {
        if f.key.is_empty() {
            return Err(Error::Config("task family key must not be empty".into()));
        }
        if f.expected_n == 0 {
            return Err(Error::Config(format!("task family `{}` has expected_n = 0", f.key)));
        }
        if !seen.insert(f.key.as_str()) {
            return Err(Error::Config(format!("duplicate task family `{}`", f.key)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub family: String,
    pub instruction: String,
    #[serde(default)]
    pub input: String,
}

impl PromptRecord {
    /// The user message: the instruction, then the input after a blank line
    /// when the input is non-empty.
    pub fn prompt_text(&self) -> String {
        if self.input.is_empty() {
            self.instruction.clone()
        } else {
            format!("{}\n\n{}", self.instruction, self.input)
        }
    }
}

pub const PROMPT_TEMPLATE: &str = "{instruction}\\n\\n{input}";

pub const DECODING_PAPER_FIXED: &str = "paper-fixed";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: u32,
    pub repetition_penalty: f64,
}

impl DecodingConfig {
    /// temperature 0.2, top-p 0.9, 1024 new tokens, repetition penalty 1.05.
    pub fn paper_fixed() -> Self {
        DecodingConfig {
            temperature: 0.2,
            top_p: 0.9,
            max_new_tokens: 1024,
            repetition_penalty: 1.05,
        }
    }

    pub fn preset(name: &str) -> Result<Self, Error> {
        match name {
            DECODING_PAPER_FIXED => Ok(Self::paper_fixed()),
            other => Err(Error::Config(format!(
                "unknown decoding preset `{other}` (expected `{DECODING_PAPER_FIXED}`)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.max_new_tokens == 0 {
            return Err(Error::Config("max_new_tokens must be positive".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::Config("temperature must be a non-negative number".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config("top_p must be in (0, 1]".into()));
        }
        if !(self.repetition_penalty.is_finite() && self.repetition_penalty > 0.0) {
            return Err(Error::Config("repetition_penalty must be positive".into()));
        }
        Ok(())
    }
}

/// How a generation was requested, for reproducibility.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestMeta {
    /// Wire name the penalty was sent under.
    pub penalty_field: String,
    pub prompt_template: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt_id: String,
    pub model_id: String,
    pub run_id: String,
    pub text: String,
    pub decoding: DecodingConfig,
    pub timestamp: DateTime<Utc>,
    /// Set when the generation failed; `text` is empty in that case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<RequestMeta>,
    /// Curator note marking a response as rejectable for reasons OLR cannot see.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

impl GenerationRecord {
    pub fn new(prompt_id: &str, model_id: &str, run_id: &str, text: &str, decoding: DecodingConfig) -> Self {
        GenerationRecord {
            prompt_id: prompt_id.to_string(),
            model_id: model_id.to_string(),
            run_id: run_id.to_string(),
            text: text.to_string(),
            decoding,
            timestamp: Utc::now().trunc_subsecs(3),
            error: None,
            request: None,
            annotation: None,
        }
    }

    pub fn key(&self) -> RecordKey {
        RecordKey {
            prompt_id: self.prompt_id.clone(),
            model_id: self.model_id.clone(),
            run_id: self.run_id.clone(),
        }
    }
}

/// `(prompt_id, model_id, run_id)`, unique per generations file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RecordKey {
    pub prompt_id: String,
    pub model_id: String,
    pub run_id: String,
}

impl fmt::Display for RecordKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.prompt_id, self.model_id, self.run_id)
    }
}

/// One line of `scores.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub prompt_id: String,
    pub model_id: String,
    pub run_id: String,
    pub olr: f64,
    pub pass_tc: bool,
    pub counted_chars: usize,
    pub illegal_chars: usize,
    pub degenerate: bool,
    pub policy_preset: String,
}

impl ScoreRecord {
    pub fn new(key: RecordKey, score: &crate::metrics::PurityScore, policy_preset: &str) -> Self {
        ScoreRecord {
            prompt_id: key.prompt_id,
            model_id: key.model_id,
            run_id: key.run_id,
            olr: score.olr,
            pass_tc: score.pass_tc,
            counted_chars: score.counted_chars,
            illegal_chars: score.illegal_chars,
            degenerate: score.degenerate,
            policy_preset: policy_preset.to_string(),
        }
    }
}

/// A validated prompt file.
#[derive(Debug, Clone, Default)]
pub struct PromptPool {
    pub records: Vec<PromptRecord>,
    /// Records per family, in manifest order (families with zero records included).
    pub counts: Vec<(String, usize)>,
    /// Families whose count differs from `expected_n`.
    pub warnings: Vec<String>,
}

impl PromptPool {
    pub fn get(&self, id: &str) -> Option<&PromptRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn family_index(&self) -> BTreeMap<&str, &str> {
        self.records
            .iter()
            .map(|r| (r.id.as_str(), r.family.as_str()))
            .collect()
    }
}

pub fn load_prompts(path: impl AsRef<Path>, manifest: &[TaskFamily]) -> Result<PromptPool, Error> {
    let path = path.as_ref();
    let rows: Vec<(usize, PromptRecord)> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (line, rec) in &rows {
        if !manifest.iter().any(|f| f.key == rec.family) {
            return Err(Error::UnknownFamily {
                path: path.to_path_buf(),
                line: *line,
                family: rec.family.clone(),
            });
        }
        if !seen.insert(rec.id.as_str()) {
            return Err(Error::DuplicateId {
                id: rec.id.clone(),
                path: Some(path.to_path_buf()),
                line: Some(*line),
            });
        }
        *counts.entry(rec.family.as_str()).or_insert(0) += 1;
    }
    let mut warnings = Vec::new();
    let mut ordered = Vec::with_capacity(manifest.len());
    for f in manifest {
        let n = counts.get(f.key.as_str()).copied().unwrap_or(0);
        if n != f.expected_n as usize {
            warnings.push(format!(
                "family `{}`: {} prompts, manifest expects {}",
                f.key, n, f.expected_n
            ));
        }
        ordered.push((f.key.clone(), n));
    }
    Ok(PromptPool {
        records: rows.into_iter().map(|(_, r)| r).collect(),
        counts: ordered,
        warnings,
    })
}

pub fn load_generations(path: impl AsRef<Path>) -> Result<Vec<GenerationRecord>, Error> {
    let path = path.as_ref();
    let rows: Vec<(usize, GenerationRecord)> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    for (line, r) in &rows {
        if !seen.insert(r.key()) {
            return Err(Error::DuplicateId {
                id: r.key().to_string(),
                path: Some(path.to_path_buf()),
                line: Some(*line),
            });
        }
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn save_generations(path: impl AsRef<Path>, records: &[GenerationRecord]) -> Result<(), Error> {
    write_jsonl(path, records)
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>, Error> {
    let path = path.as_ref();
    let rows: Vec<(usize, ScoreRecord)> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    for (line, r) in &rows {
        let key = (r.prompt_id.as_str(), r.model_id.as_str(), r.run_id.as_str());
        if !seen.insert(key) {
            return Err(Error::DuplicateId {
                id: format!("{}/{}/{}", key.0, key.1, key.2),
                path: Some(path.to_path_buf()),
                line: Some(*line),
            });
        }
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn save_scores(path: impl AsRef<Path>, records: &[ScoreRecord]) -> Result<(), Error> {
    write_jsonl(path, records)
}

/// Parse a JSON Lines file, returning each record with its 1-based line number.
/// Blank lines are ignored.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<(usize, T)>, Error> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| {
        let offset = e.valid_up_to();
        Error::Malformed {
            path: path.to_path_buf(),
            line: bytes[..offset].iter().filter(|&&b| b == b'\n').count() + 1,
            message: format!("invalid UTF-8 at byte offset {offset}"),
        }
    })?;
    parse_jsonl(path, text)
}

fn parse_jsonl<T: DeserializeOwned>(path: &Path, text: &str) -> Result<Vec<(usize, T)>, Error> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: strip_position(&e),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

// serde_json appends " at line L column C" relative to the single line it saw.
fn strip_position(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    match msg.rfind(" at line ") {
        Some(idx) => msg[..idx].to_string(),
        None => msg,
    }
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<(), Error> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).expect("records serialize to JSON");
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = fs::File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    fn prompt_line(id: &str, family: &str) -> String {
        serde_json::json!({"id": id, "family": family, "instruction": "翻譯", "input": ""}).to_string()
    }

    fn pool(counts: &[u32]) -> String {
        let manifest = default_manifest();
        let mut lines = Vec::new();
        for (f, &n) in manifest.iter().zip(counts) {
            for i in 0..n {
                lines.push(prompt_line(&format!("{}-{i}", f.key), &f.key));
            }
        }
        lines.join("\n") + "\n"
    }

    #[test]
    fn default_manifest_totals_660() {
        let m = default_manifest();
        assert_eq!(m.len(), 8);
        let ns: Vec<u32> = m.iter().map(|f| f.expected_n).collect();
        assert_eq!(ns, vec![80, 100, 60, 100, 60, 60, 100, 100]);
        assert_eq!(ns.iter().sum::<u32>(), 660);
        validate_manifest(&m).unwrap();
    }

    #[test]
    fn full_pool_loads_without_warnings() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "prompts.jsonl", &pool(&[80, 100, 60, 100, 60, 60, 100, 100]));
        let loaded = load_prompts(&p, &default_manifest()).unwrap();
        assert_eq!(loaded.records.len(), 660);
        assert!(loaded.warnings.is_empty());
    }

    #[test]
    fn short_pool_warns() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "prompts.jsonl", &pool(&[80, 100, 60, 100, 60, 60, 100, 45]));
        let loaded = load_prompts(&p, &default_manifest()).unwrap();
        assert_eq!(loaded.records.len(), 605);
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.warnings[0].contains("named_entity_translation"));
    }

    #[test]
    fn missing_field_names_line_and_field() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{}\n{}\n",
            prompt_line("a", "sc_conversion"),
            r#"{"id":"b","family":"sc_conversion","input":"x"}"#
        );
        let p = write(&dir, "prompts.jsonl", &body);
        let err = load_prompts(&p, &default_manifest()).unwrap_err();
        match err {
            Error::Malformed { line, ref message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("instruction"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_family_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.jsonl", &prompt_line("a", "poetry"));
        assert!(matches!(
            load_prompts(&p, &default_manifest()),
            Err(Error::UnknownFamily { ref family, line: 1, .. }) if family == "poetry"
        ));
        let body = format!(
            "{}\n{}\n",
            prompt_line("a", "sc_conversion"),
            prompt_line("a", "sc_conversion")
        );
        let p = write(&dir, "b.jsonl", &body);
        assert!(matches!(
            load_prompts(&p, &default_manifest()),
            Err(Error::DuplicateId { line: Some(2), .. })
        ));
    }

    #[test]
    fn invalid_utf8_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        fs::write(&p, b"{\"id\":\"a\"}\n\xff\n").unwrap();
        let err = load_generations(&p).unwrap_err();
        assert!(err.to_string().contains("byte offset 11"), "{err}");
    }

    #[test]
    fn empty_file_is_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "g.jsonl", "");
        assert!(load_generations(&p).unwrap().is_empty());
    }

    #[test]
    fn temperature_serializes_exactly() {
        let r = GenerationRecord::new("p", "m", "r", "x", DecodingConfig::paper_fixed());
        let line = serde_json::to_string(&r).unwrap();
        assert!(line.contains(r#""temperature":0.2,"#), "{line}");
        assert!(line.contains(r#""repetition_penalty":1.05"#), "{line}");
        assert!(!line.contains("0.2000"));
    }

    #[test]
    fn round_trip_preserves_text() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.jsonl");
        let mut a = GenerationRecord::new(
            "p1",
            "m",
            "r",
            "𠀀𪜀 😀\n\t「引號」\u{1}",
            DecodingConfig::paper_fixed(),
        );
        a.error = Some("boom".into());
        a.request = Some(RequestMeta {
            penalty_field: "repetition_penalty".into(),
            prompt_template: PROMPT_TEMPLATE.into(),
            attempts: 3,
        });
        let b = GenerationRecord::new("p2", "m", "r", "", DecodingConfig::paper_fixed());
        save_generations(&p, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 2);
        assert_eq!(load_generations(&p).unwrap(), vec![a, b]);
    }

    #[test]
    fn prompt_text_joins_input() {
        let mut r = PromptRecord {
            id: "1".into(),
            family: "sc_conversion".into(),
            instruction: "轉換".into(),
            input: String::new(),
        };
        assert_eq!(r.prompt_text(), "轉換");
        r.input = "简体".into();
        assert_eq!(r.prompt_text(), "轉換\n\n简体");
    }

    #[test]
    fn decoding_validation() {
        DecodingConfig::paper_fixed().validate().unwrap();
        let bad = DecodingConfig {
            max_new_tokens: 0,
            ..DecodingConfig::paper_fixed()
        };
        assert!(bad.validate().is_err());
        assert!(DecodingConfig::preset("greedy").is_err());
    }
}
