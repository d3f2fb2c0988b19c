//! Run configuration (TOML). Unknown keys are rejected.
//!
//! ```toml
//! [policy]
//! preset = "paper-strict"          # or "cjk-punct-lenient"
//! whitespace = "skip"              # or "count-illegal"
//! digits = "any-nd"                # or "ascii-only"
//! han_ranges = ["4E00-9FFF", "3400-4DBF"]
//!
//! [decoding]
//! preset = "paper-fixed"
//!
//! [endpoint]
//! base_url = "http://localhost:8000"
//! model = "my-model"
//! max_in_flight = 4
//!
//! [[family]]
//! key = "sc_conversion"
//! display_name = "Sc Conversion"
//! expected_n = 60
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{default_manifest, validate_manifest, DecodingConfig, TaskFamily, DECODING_PAPER_FIXED};
use crate::dpo::DpoThresholds;
use crate::error::Error;
use crate::script_policy::{CodepointRange, DigitRule, ScriptPolicy, WhitespaceCounting, PRESET_PAPER_STRICT};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub decoding: DecodingSection,
    #[serde(default)]
    pub endpoint: Option<EndpointSection>,
    #[serde(default)]
    pub dpo: Option<DpoThresholds>,
    #[serde(default, rename = "family", skip_serializing_if = "Vec::is_empty")]
    pub families: Vec<TaskFamily>,
    #[serde(default)]
    pub paths: PathsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    #[serde(default = "default_policy_preset")]
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub whitespace: Option<WhitespaceCounting>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digits: Option<DigitRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cjk_punct_legal: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub han_ranges: Option<Vec<CodepointRange>>,
}

fn default_policy_preset() -> String {
    PRESET_PAPER_STRICT.to_string()
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            preset: default_policy_preset(),
            whitespace: None,
            digits: None,
            cjk_punct_legal: None,
            han_ranges: None,
        }
    }
}

impl PolicySection {
    pub fn resolve(&self) -> Result<ScriptPolicy, Error> {
        let mut p = ScriptPolicy::preset(&self.preset)?;
        if let Some(w) = self.whitespace {
            p = p.with_whitespace_counting(w);
        }
        if let Some(d) = self.digits {
            p = p.with_digit_rule(d);
        }
        if let Some(c) = self.cjk_punct_legal {
            p = p.with_cjk_punct_legal(c);
        }
        if let Some(r) = &self.han_ranges {
            p = p.with_han_ranges(r.clone())?;
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodingSection {
    #[serde(default = "default_decoding_preset")]
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_new_tokens: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetition_penalty: Option<f64>,
}

fn default_decoding_preset() -> String {
    DECODING_PAPER_FIXED.to_string()
}

impl Default for DecodingSection {
    fn default() -> Self {
        DecodingSection {
            preset: default_decoding_preset(),
            temperature: None,
            top_p: None,
            max_new_tokens: None,
            repetition_penalty: None,
        }
    }
}

impl DecodingSection {
    /// Returns the preset label (suffixed `+custom` when overridden) and values.
    pub fn resolve(&self) -> Result<(String, DecodingConfig), Error> {
        let mut d = DecodingConfig::preset(&self.preset)?;
        let mut name = self.preset.clone();
        let mut custom = false;
        if let Some(v) = self.temperature {
            custom |= v != d.temperature;
            d.temperature = v;
        }
        if let Some(v) = self.top_p {
            custom |= v != d.top_p;
            d.top_p = v;
        }
        if let Some(v) = self.max_new_tokens {
            custom |= v != d.max_new_tokens;
            d.max_new_tokens = v;
        }
        if let Some(v) = self.repetition_penalty {
            custom |= v != d.repetition_penalty;
            d.repetition_penalty = v;
        }
        d.validate()?;
        if custom {
            name.push_str("+custom");
        }
        Ok((name, d))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSection {
    pub base_url: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_in_flight: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_retries: Option<u32>,
    /// `repetition_penalty` (default) or `frequency_penalty`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_field: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompts: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generations: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, Error> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        validate_manifest(&cfg.manifest())?;
        Ok(cfg)
    }

    /// Parse a config file. Relative `[paths]` entries are taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut cfg.paths;
        for slot in [
            &mut p.prompts,
            &mut p.generations,
            &mut p.scores,
            &mut p.report,
            &mut p.out,
        ] {
            if let Some(v) = slot.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        }
        Ok(cfg)
    }

    /// Configured families, or the built-in eight.
    pub fn manifest(&self) -> Vec<TaskFamily> {
        if self.families.is_empty() {
            default_manifest()
        } else {
            self.families.clone()
        }
    }

    pub fn dpo_thresholds(&self) -> DpoThresholds {
        self.dpo.unwrap_or_default()
    }

    /// Fully resolved settings, embedded in reports for provenance.
    pub fn resolved_json(&self) -> Result<serde_json::Value, Error> {
        let policy = self.policy.resolve()?;
        let (decoding_preset, decoding) = self.decoding.resolve()?;
        Ok(serde_json::json!({
            "policy": policy,
            "decoding_preset": decoding_preset,
            "decoding": decoding,
            "manifest": self.manifest(),
            "dpo": self.dpo_thresholds(),
        }))
    }
}
