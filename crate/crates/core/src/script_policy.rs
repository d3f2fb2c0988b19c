//! Per-character legality under a configurable script policy.
//!
//! A character is legal when it lies in one of the policy's Han ideograph
//! intervals or has General_Category=Nd. Optionally CJK punctuation is legal
//! too. Everything else (Latin letters, other punctuation, symbols, other
//! scripts) counts against the text.

use std::fmt;
use std::str::FromStr;

use icu_properties::props::{GeneralCategory, Script};
use icu_properties::CodePointMapData;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::textnorm::NormalizedText;

/// Named Han blocks that make up the default policy, in code point order.
pub const DEFAULT_HAN_BLOCKS: [(u32, u32, &str); 12] = [
    (0x3400, 0x4DBF, "CJK Unified Ideographs Extension A"),
    (0x4E00, 0x9FFF, "CJK Unified Ideographs"),
    (0xF900, 0xFAFF, "CJK Compatibility Ideographs"),
    (0x20000, 0x2A6DF, "CJK Unified Ideographs Extension B"),
    (0x2A700, 0x2B73F, "CJK Unified Ideographs Extension C"),
    (0x2B740, 0x2B81F, "CJK Unified Ideographs Extension D"),
    (0x2B820, 0x2CEAF, "CJK Unified Ideographs Extension E"),
    (0x2CEB0, 0x2EBEF, "CJK Unified Ideographs Extension F"),
    (0x2EBF0, 0x2EE5F, "CJK Unified Ideographs Extension I"),
    (0x2F800, 0x2FA1F, "CJK Compatibility Ideographs Supplement"),
    (0x30000, 0x3134F, "CJK Unified Ideographs Extension G"),
    (0x31350, 0x323AF, "CJK Unified Ideographs Extension H"),
];

/// CJK Symbols and Punctuation, Vertical Forms, and the punctuation part of
/// Halfwidth and Fullwidth Forms.
pub const CJK_PUNCT_RANGES: [(u32, u32); 3] = [(0x3000, 0x303F), (0xFE30, 0xFE4F), (0xFF01, 0xFF65)];

pub const PRESET_PAPER_STRICT: &str = "paper-strict";
pub const PRESET_CJK_PUNCT_LENIENT: &str = "cjk-punct-lenient";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharClass {
    HanIdeograph,
    DecimalDigit,
    Whitespace,
    CjkPunctuation,
    LatinLetter,
    OtherPunctuation,
    OtherSymbol,
    OtherLetter,
    Control,
}

impl CharClass {
    pub const ALL: [CharClass; 9] = [
        CharClass::HanIdeograph,
        CharClass::DecimalDigit,
        CharClass::Whitespace,
        CharClass::CjkPunctuation,
        CharClass::LatinLetter,
        CharClass::OtherPunctuation,
        CharClass::OtherSymbol,
        CharClass::OtherLetter,
        CharClass::Control,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CharClass::HanIdeograph => "han_ideograph",
            CharClass::DecimalDigit => "decimal_digit",
            CharClass::Whitespace => "whitespace",
            CharClass::CjkPunctuation => "cjk_punctuation",
            CharClass::LatinLetter => "latin_letter",
            CharClass::OtherPunctuation => "other_punctuation",
            CharClass::OtherSymbol => "other_symbol",
            CharClass::OtherLetter => "other_letter",
            CharClass::Control => "control",
        }
    }
}

impl fmt::Display for CharClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inclusive code point interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CodepointRange {
    lo: u32,
    hi: u32,
}

impl CodepointRange {
    pub fn new(lo: u32, hi: u32) -> Result<Self, Error> {
        if lo > hi {
            return Err(Error::Policy(format!("empty interval U+{lo:04X}..U+{hi:04X}")));
        }
        if hi > 0x10FFFF {
            return Err(Error::Policy(format!("U+{hi:04X} is outside the Unicode code space")));
        }
        Ok(CodepointRange { lo, hi })
    }

    pub fn lo(self) -> u32 {
        self.lo
    }

    pub fn hi(self) -> u32 {
        self.hi
    }

    pub fn contains(self, cp: u32) -> bool {
        self.lo <= cp && cp <= self.hi
    }
}

impl fmt::Display for CodepointRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04X}-{:04X}", self.lo, self.hi)
    }
}

/// Accepts `4E00-9FFF`, `U+4E00..U+9FFF` and single code points like `3007`.
impl FromStr for CodepointRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| {
            let t = t.trim();
            let t = t
                .strip_prefix("U+")
                .or_else(|| t.strip_prefix("u+"))
                .or_else(|| t.strip_prefix("0x"))
                .unwrap_or(t);
            u32::from_str_radix(t, 16).map_err(|_| Error::Policy(format!("bad code point `{t}` in `{s}`")))
        };
        let (lo, hi) = match s.split_once("..").or_else(|| s.split_once('-')) {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let v = parse(s)?;
                (v, v)
            }
        };
        CodepointRange::new(lo, hi)
    }
}

impl Serialize for CodepointRange {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CodepointRange {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WhitespaceCounting {
    /// Whitespace is excluded from both numerator and denominator.
    #[default]
    Skip,
    /// Whitespace is counted and illegal.
    CountIllegal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DigitRule {
    /// Any General_Category=Nd code point.
    #[default]
    AnyNd,
    /// Only U+0030..U+0039.
    AsciiOnly,
}

/// The set of legal code points plus counting rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScriptPolicy {
    name: String,
    han_ranges: Vec<CodepointRange>,
    digit_rule: DigitRule,
    whitespace_counting: WhitespaceCounting,
    cjk_punct_legal: bool,
}

impl Default for ScriptPolicy {
    fn default() -> Self {
        Self::paper_strict()
    }
}

impl ScriptPolicy {
    /// Han blocks + Nd, CJK punctuation illegal, whitespace skipped.
    pub fn paper_strict() -> Self {
        let ranges = DEFAULT_HAN_BLOCKS
            .iter()
            .map(|&(lo, hi, _)| CodepointRange { lo, hi })
            .collect();
        ScriptPolicy {
            name: PRESET_PAPER_STRICT.to_string(),
            han_ranges: merge_ranges(ranges),
            digit_rule: DigitRule::AnyNd,
            whitespace_counting: WhitespaceCounting::Skip,
            cjk_punct_legal: false,
        }
    }

    /// As [`paper_strict`](Self::paper_strict) but CJK punctuation is legal.
    pub fn cjk_punct_lenient() -> Self {
        ScriptPolicy {
            name: PRESET_CJK_PUNCT_LENIENT.to_string(),
            cjk_punct_legal: true,
            ..Self::paper_strict()
        }
    }

    pub fn preset(name: &str) -> Result<Self, Error> {
        match name {
            PRESET_PAPER_STRICT => Ok(Self::paper_strict()),
            PRESET_CJK_PUNCT_LENIENT => Ok(Self::cjk_punct_lenient()),
            other => Err(Error::Policy(format!(
                "unknown policy preset `{other}` (expected `{PRESET_PAPER_STRICT}` or `{PRESET_CJK_PUNCT_LENIENT}`)"
            ))),
        }
    }

    /// Replace the Han intervals. Overlapping or touching intervals are merged.
    pub fn with_han_ranges(mut self, ranges: Vec<CodepointRange>) -> Result<Self, Error> {
        if ranges.is_empty() {
            return Err(Error::Policy("han_ranges must not be empty".into()));
        }
        self.han_ranges = merge_ranges(ranges);
        Ok(self.mark_custom())
    }

    pub fn with_digit_rule(mut self, rule: DigitRule) -> Self {
        if rule != self.digit_rule {
            self.digit_rule = rule;
            return self.mark_custom();
        }
        self
    }

    pub fn with_whitespace_counting(mut self, counting: WhitespaceCounting) -> Self {
        if counting != self.whitespace_counting {
            self.whitespace_counting = counting;
            return self.mark_custom();
        }
        self
    }

    pub fn with_cjk_punct_legal(mut self, legal: bool) -> Self {
        if legal != self.cjk_punct_legal {
            self.cjk_punct_legal = legal;
            return self.mark_custom();
        }
        self
    }

    fn mark_custom(mut self) -> Self {
        if !self.name.ends_with("+custom") {
            self.name.push_str("+custom");
        }
        self
    }

    /// Label written into every score and report.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Sorted, disjoint, non-touching intervals.
    pub fn han_ranges(&self) -> &[CodepointRange] {
        &self.han_ranges
    }

    pub fn digit_rule(&self) -> DigitRule {
        self.digit_rule
    }

    pub fn whitespace_counting(&self) -> WhitespaceCounting {
        self.whitespace_counting
    }

    pub fn cjk_punct_legal(&self) -> bool {
        self.cjk_punct_legal
    }

    pub fn is_han(&self, c: char) -> bool {
        let cp = c as u32;
        let idx = self.han_ranges.partition_point(|r| r.hi < cp);
        self.han_ranges.get(idx).is_some_and(|r| r.lo <= cp)
    }

    pub fn classify(&self, c: char) -> CharVerdict {
        let class = char_class(self, c);
        let legal = match class {
            CharClass::HanIdeograph => true,
            CharClass::DecimalDigit => match self.digit_rule {
                DigitRule::AnyNd => true,
                DigitRule::AsciiOnly => c.is_ascii_digit(),
            },
            CharClass::CjkPunctuation => self.cjk_punct_legal,
            _ => false,
        };
        let counted =
            legal || class != CharClass::Whitespace || self.whitespace_counting == WhitespaceCounting::CountIllegal;
        CharVerdict {
            codepoint: c,
            class,
            legal,
            counted,
        }
    }
}

fn merge_ranges(mut ranges: Vec<CodepointRange>) -> Vec<CodepointRange> {
    ranges.sort();
    let mut out: Vec<CodepointRange> = Vec::with_capacity(ranges.len());
    for r in ranges {
        match out.last_mut() {
            Some(last) if r.lo <= last.hi.saturating_add(1) => last.hi = last.hi.max(r.hi),
            _ => out.push(r),
        }
    }
    out
}

fn in_cjk_punct_ranges(cp: u32) -> bool {
    CJK_PUNCT_RANGES.iter().any(|&(lo, hi)| lo <= cp && cp <= hi)
}

// Precedence: Han > Nd > Whitespace > CJK punctuation > Latin > the rest.
fn char_class(policy: &ScriptPolicy, c: char) -> CharClass {
    if policy.is_han(c) {
        return CharClass::HanIdeograph;
    }
    let gc = CodePointMapData::<GeneralCategory>::new().get(c);
    if gc == GeneralCategory::DecimalNumber {
        return CharClass::DecimalDigit;
    }
    if c.is_whitespace() {
        return CharClass::Whitespace;
    }
    let letter = matches!(
        gc,
        GeneralCategory::UppercaseLetter
            | GeneralCategory::LowercaseLetter
            | GeneralCategory::TitlecaseLetter
            | GeneralCategory::ModifierLetter
            | GeneralCategory::OtherLetter
    );
    // Letters inside the punctuation blocks (fullwidth A-Z, iteration marks)
    // keep their letter class.
    if !letter && in_cjk_punct_ranges(c as u32) {
        return CharClass::CjkPunctuation;
    }
    if letter {
        if CodePointMapData::<Script>::new().get(c) == Script::Latin {
            return CharClass::LatinLetter;
        }
        return CharClass::OtherLetter;
    }
    match gc {
        GeneralCategory::NonspacingMark | GeneralCategory::SpacingMark | GeneralCategory::EnclosingMark => {
            CharClass::OtherLetter
        }
        GeneralCategory::ConnectorPunctuation
        | GeneralCategory::DashPunctuation
        | GeneralCategory::OpenPunctuation
        | GeneralCategory::ClosePunctuation
        | GeneralCategory::InitialPunctuation
        | GeneralCategory::FinalPunctuation
        | GeneralCategory::OtherPunctuation => CharClass::OtherPunctuation,
        GeneralCategory::MathSymbol
        | GeneralCategory::CurrencySymbol
        | GeneralCategory::ModifierSymbol
        | GeneralCategory::OtherSymbol
        | GeneralCategory::LetterNumber
        | GeneralCategory::OtherNumber => CharClass::OtherSymbol,
        _ => CharClass::Control,
    }
}

/// Classify `c` under `policy`.
pub fn classify(c: char, policy: &ScriptPolicy) -> CharVerdict {
    policy.classify(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharVerdict {
    pub codepoint: char,
    pub class: CharClass,
    pub legal: bool,
    /// Whether the character participates in the OLR denominator.
    pub counted: bool,
}

/// A maximal run of counted characters sharing one legality.
///
/// `start..end` are scalar-value indices into the normalized text. Skipped
/// characters between two counted characters of the same legality fall inside
/// the span; skipped characters at a boundary belong to no span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LegalitySpan {
    pub start: usize,
    pub end: usize,
    pub legal: bool,
}

pub fn legality_spans(s: &NormalizedText, policy: &ScriptPolicy) -> Vec<LegalitySpan> {
    let mut spans: Vec<LegalitySpan> = Vec::new();
    for (i, c) in s.chars().enumerate() {
        let v = policy.classify(c);
        if !v.counted {
            continue;
        }
        match spans.last_mut() {
            Some(last) if last.legal == v.legal => last.end = i + 1,
            _ => spans.push(LegalitySpan {
                start: i,
                end: i + 1,
                legal: v.legal,
            }),
        }
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textnorm::normalize;

    fn strict() -> ScriptPolicy {
        ScriptPolicy::paper_strict()
    }

    #[test]
    fn han_is_legal() {
        let v = classify('中', &strict());
        assert!(v.legal && v.counted);
        assert_eq!(v.class, CharClass::HanIdeograph);
    }

    #[test]
    fn latin_is_illegal() {
        let v = classify('A', &strict());
        assert!(!v.legal && v.counted);
        assert_eq!(v.class, CharClass::LatinLetter);
    }

    #[test]
    fn ascii_digit_is_legal() {
        let v = classify('5', &strict());
        assert!(v.legal);
        assert_eq!(v.class, CharClass::DecimalDigit);
    }

    #[test]
    fn ideographic_full_stop_depends_on_flag() {
        let v = classify('。', &strict());
        assert!(!v.legal);
        assert_eq!(v.class, CharClass::CjkPunctuation);
        assert!(classify('。', &ScriptPolicy::cjk_punct_lenient()).legal);
    }

    #[test]
    fn extension_a_boundary() {
        assert!(classify('\u{3400}', &strict()).legal);
        assert!(classify('\u{4DBF}', &strict()).legal);
        assert!(!classify('\u{33FF}', &strict()).legal);
        assert!(!classify('\u{4DC0}', &strict()).legal);
    }

    #[test]
    fn arabic_indic_digit_follows_digit_rule() {
        assert!(classify('\u{0660}', &strict()).legal);
        let ascii = strict().with_digit_rule(DigitRule::AsciiOnly);
        let v = classify('\u{0660}', &ascii);
        assert_eq!(v.class, CharClass::DecimalDigit);
        assert!(!v.legal);
        assert!(classify('7', &ascii).legal);
        assert_eq!(ascii.name(), "paper-strict+custom");
    }

    #[test]
    fn whitespace_counting_modes() {
        let v = classify(' ', &strict());
        assert_eq!(v.class, CharClass::Whitespace);
        assert!(!v.legal && !v.counted);
        let counting = strict().with_whitespace_counting(WhitespaceCounting::CountIllegal);
        let v = classify(' ', &counting);
        assert!(!v.legal && v.counted);
    }

    #[test]
    fn ideographic_space_is_whitespace_not_punct() {
        let v = classify('\u{3000}', &ScriptPolicy::cjk_punct_lenient());
        assert_eq!(v.class, CharClass::Whitespace);
        assert!(!v.counted);
    }

    #[test]
    fn fullwidth_letters_stay_latin() {
        let v = classify('Ａ', &ScriptPolicy::cjk_punct_lenient());
        assert_eq!(v.class, CharClass::LatinLetter);
        assert!(!v.legal);
        assert_eq!(classify('！', &strict()).class, CharClass::CjkPunctuation);
    }

    #[test]
    fn other_classes() {
        let p = strict();
        assert_eq!(classify('あ', &p).class, CharClass::OtherLetter);
        assert_eq!(classify('!', &p).class, CharClass::OtherPunctuation);
        assert_eq!(classify('😀', &p).class, CharClass::OtherSymbol);
        assert_eq!(classify('\u{0301}', &p).class, CharClass::OtherLetter);
        assert_eq!(classify('\u{0000}', &p).class, CharClass::Control);
        assert_eq!(classify('\u{E000}', &p).class, CharClass::Control);
        assert_eq!(classify('⼀', &p).class, CharClass::OtherSymbol); // Kangxi radical, not a Han block
    }

    #[test]
    fn default_ranges_are_merged() {
        let p = strict();
        let r = p.han_ranges();
        for w in r.windows(2) {
            assert!(w[0].hi() + 1 < w[1].lo());
        }
        // Extensions C through F and I are contiguous, as are G and H.
        assert_eq!(r.len(), 7);
    }

    #[test]
    fn custom_ranges() {
        let p = strict()
            .with_han_ranges(vec!["4E00-4E10".parse().unwrap(), "4E11..4E20".parse().unwrap()])
            .unwrap();
        assert_eq!(p.han_ranges().len(), 1);
        assert!(p.is_han('\u{4E20}'));
        assert!(!p.is_han('\u{4E21}'));
        assert!(strict().with_han_ranges(vec![]).is_err());
        assert!("9FFF-4E00".parse::<CodepointRange>().is_err());
        assert!("110000".parse::<CodepointRange>().is_err());
        assert_eq!("U+3007".parse::<CodepointRange>().unwrap().to_string(), "3007-3007");
    }

    #[test]
    fn unknown_preset_rejected() {
        assert!(ScriptPolicy::preset("lenient").is_err());
        assert_eq!(
            ScriptPolicy::preset("cjk-punct-lenient").unwrap().name(),
            "cjk-punct-lenient"
        );
    }

    #[test]
    fn spans_alternate() {
        let p = strict();
        let spans = |s: &str| {
            legality_spans(&normalize(s), &p)
                .into_iter()
                .map(|s| (s.start, s.end, s.legal))
                .collect::<Vec<_>>()
        };
        assert_eq!(spans("中A中"), vec![(0, 1, true), (1, 2, false), (2, 3, true)]);
        assert_eq!(spans("你好"), vec![(0, 2, true)]);
        assert_eq!(spans(""), vec![]);
        assert_eq!(spans("中 文"), vec![(0, 3, true)]);
        assert_eq!(spans("中 A"), vec![(0, 1, true), (2, 3, false)]);
    }
}
