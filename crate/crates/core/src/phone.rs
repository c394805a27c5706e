//! Phone-number extraction, canonicalization and metadata lookup.
//!
//! A phone number's identity is its canonical digit string: separators,
//! a leading `+` and a leading `00` international prefix are removed, so the
//! many ways spammers write the same number collapse onto one key. Country
//! and line type come from a bundled static table; nothing here touches the
//! network.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUNDLED_COUNTRIES: &str = include_str!("../data/countries.json");
const BUNDLED_LANGUAGES: &str = include_str!("../data/languages.json");

/// Default inclusive bounds on the number of digits in a canonical number.
pub const DEFAULT_MIN_DIGITS: usize = 7;
pub const DEFAULT_MAX_DIGITS: usize = 15;

/// Country calling codes are prefix-free and at most three digits long.
const MAX_CALLING_CODE_DIGITS: usize = 3;

/// Numbers shorter than this are never split into calling code and national
/// number; short national formats are left to the language heuristic.
const MIN_DIGITS_FOR_CALLING_CODE: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineType {
    TollFree,
    Mobile,
    Landline,
    Voip,
    Unknown,
}

impl fmt::Display for LineType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LineType::TollFree => "toll_free",
            LineType::Mobile => "mobile",
            LineType::Landline => "landline",
            LineType::Voip => "voip",
            LineType::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

/// A validated phone number. Two numbers are the same number iff their
/// canonical strings are equal; every other field is derived from it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhoneNumber {
    pub canonical: String,
    pub country_code: Option<u16>,
    pub country: Option<String>,
    pub line_type: LineType,
}

impl PhoneNumber {
    pub fn country_or_unknown(&self) -> &str {
        self.country.as_deref().unwrap_or("unknown")
    }

    /// The digits after the calling code, when one was resolved.
    pub fn national_number(&self) -> Option<&str> {
        let cc = self.country_code?;
        let len = cc.to_string().len();
        self.canonical.get(len..)
    }
}

/// One occurrence of a phone number inside a piece of text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhoneMatch {
    pub phone: PhoneNumber,
    /// Character (not byte) offsets, half-open.
    pub span: (usize, usize),
    pub raw: String,
    /// The raw form carried a `+` or `00` prefix.
    pub international_prefix: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhoneRejection {
    #[error("too few digits")]
    TooShort,
    #[error("too many digits")]
    TooLong,
    #[error("candidate contains non-numeric characters")]
    NonNumericCore,
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("failed to read country table: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed country table: {0}")]
    Json(#[from] serde_json::Error),
    #[error("calling code {0} appears more than once")]
    DuplicateCallingCode(u16),
    #[error("entry for calling code {0} is invalid: {1}")]
    InvalidEntry(u16, String),
}

/// One row of the country table file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountryEntry {
    pub calling_code: u16,
    pub country: String,
    #[serde(default)]
    pub toll_free_prefixes: Vec<String>,
    /// Inclusive bounds on the national number length (digits after the calling code).
    pub min_len: usize,
    pub max_len: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mobile_prefixes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub landline_prefixes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub voip_prefixes: Vec<String>,
}

/// Calling-code metadata plus the language-to-country map used when a number
/// carries no calling code.
#[derive(Debug, Clone)]
pub struct CountryTable {
    entries: Vec<CountryEntry>,
    by_code: BTreeMap<u16, usize>,
    /// `None` marks a language spoken in several countries.
    languages: BTreeMap<String, Option<String>>,
    min_digits: usize,
    max_digits: usize,
}

static BUNDLED_TABLE: Lazy<CountryTable> =
    Lazy::new(|| CountryTable::from_json(BUNDLED_COUNTRIES).expect("bundled country table is valid"));

impl CountryTable {
    pub fn bundled() -> &'static CountryTable {
        &BUNDLED_TABLE
    }

    pub fn from_json(json: &str) -> Result<Self, TableError> {
        let entries: Vec<CountryEntry> = serde_json::from_str(json)?;
        let languages: BTreeMap<String, Option<String>> = serde_json::from_str(BUNDLED_LANGUAGES)?;
        Self::new(entries, languages)
    }

    pub fn load(path: &Path) -> Result<Self, TableError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn new(entries: Vec<CountryEntry>, languages: BTreeMap<String, Option<String>>) -> Result<Self, TableError> {
        let mut by_code = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.calling_code == 0 || e.calling_code.to_string().len() > MAX_CALLING_CODE_DIGITS {
                return Err(TableError::InvalidEntry(
                    e.calling_code,
                    "calling code must have 1-3 digits".into(),
                ));
            }
            if e.min_len == 0 || e.min_len > e.max_len {
                return Err(TableError::InvalidEntry(
                    e.calling_code,
                    "min_len must be in 1..=max_len".into(),
                ));
            }
            if e.country.trim().is_empty() {
                return Err(TableError::InvalidEntry(e.calling_code, "empty country".into()));
            }
            let prefixes = e
                .toll_free_prefixes
                .iter()
                .chain(&e.mobile_prefixes)
                .chain(&e.landline_prefixes)
                .chain(&e.voip_prefixes);
            for p in prefixes {
                if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(TableError::InvalidEntry(e.calling_code, format!("bad prefix {p:?}")));
                }
            }
            if by_code.insert(e.calling_code, i).is_some() {
                return Err(TableError::DuplicateCallingCode(e.calling_code));
            }
        }
        let languages = languages
            .into_iter()
            .map(|(k, v)| (k.to_ascii_lowercase(), v))
            .collect();
        Ok(Self {
            entries,
            by_code,
            languages,
            min_digits: DEFAULT_MIN_DIGITS,
            max_digits: DEFAULT_MAX_DIGITS,
        })
    }

    /// Override the accepted canonical length window.
    pub fn with_digit_bounds(mut self, min: usize, max: usize) -> Self {
        assert!(min >= 1 && min <= max, "invalid digit bounds {min}..={max}");
        self.min_digits = min;
        self.max_digits = max;
        self
    }

    pub fn digit_bounds(&self) -> (usize, usize) {
        (self.min_digits, self.max_digits)
    }

    pub fn entries(&self) -> &[CountryEntry] {
        &self.entries
    }

    pub fn entry(&self, calling_code: u16) -> Option<&CountryEntry> {
        self.by_code.get(&calling_code).map(|&i| &self.entries[i])
    }

    /// Country for an unambiguous language tag (`"in"`, `"id-ID"`, ...).
    pub fn language_country(&self, tag: &str) -> Option<&str> {
        let primary = tag.split(['-', '_']).next().unwrap_or_default().to_ascii_lowercase();
        self.languages.get(&primary).and_then(|c| c.as_deref())
    }

    /// Split a canonical digit string into calling code and national number.
    fn resolve_calling_code(&self, canonical: &str) -> Option<&CountryEntry> {
        if canonical.len() < MIN_DIGITS_FOR_CALLING_CODE {
            return None;
        }
        (1..=MAX_CALLING_CODE_DIGITS).find_map(|len| {
            let code: u16 = canonical.get(..len)?.parse().ok()?;
            let entry = self.entry(code)?;
            let national = &canonical[len..];
            let fits = (entry.min_len..=entry.max_len).contains(&national.len());
            (fits && !national.starts_with('0')).then_some(entry)
        })
    }
}

/// Canonicalize one candidate substring.
///
/// Every non-digit is dropped; a leading `+` or `00` marks the number as
/// internationally prefixed and the `00` is removed. The result is
/// idempotent: normalizing a canonical string returns it unchanged.
pub fn normalize_phone(raw: &str, table: &CountryTable) -> Result<PhoneNumber, PhoneRejection> {
    normalize_with_prefix(raw, table).map(|(p, _)| p)
}

fn normalize_with_prefix(raw: &str, table: &CountryTable) -> Result<(PhoneNumber, bool), PhoneRejection> {
    if raw.chars().any(char::is_alphabetic) {
        return Err(PhoneRejection::NonNumericCore);
    }
    let mut digits: String = raw.chars().filter(char::is_ascii_digit).collect();
    if digits.is_empty() {
        return Err(PhoneRejection::NonNumericCore);
    }
    let lead = raw.trim_start_matches(|c: char| c.is_whitespace() || c == '(');
    let mut international = lead.starts_with('+');
    if digits.starts_with("00") {
        digits.drain(..2);
        international = true;
    }
    if digits.len() < table.min_digits {
        return Err(PhoneRejection::TooShort);
    }
    if digits.len() > table.max_digits {
        return Err(PhoneRejection::TooLong);
    }
    Ok((phone_from_canonical(digits, table), international))
}

fn phone_from_canonical(canonical: String, table: &CountryTable) -> PhoneNumber {
    let (country_code, country) = match table.resolve_calling_code(&canonical) {
        Some(e) => (Some(e.calling_code), Some(e.country.clone())),
        None => (None, None),
    };
    let mut phone = PhoneNumber {
        canonical,
        country_code,
        country,
        line_type: LineType::Unknown,
    };
    phone.line_type = classify_line_type(&phone, table);
    phone
}

// Digit groups joined by short runs of the separators spammers use. A longer
// run of plain spaces is tolerated so that space-padded forms still match.
static CANDIDATE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"\+?\(?\d(?:(?:[ \t\-.()]{1,3}| {4,12})?\d)*").expect("candidate regex"));

const CURRENCY_SYMBOLS: &[char] = &['$', '€', '£', '¥', '₹'];
const CURRENCY_WORDS: &[&str] = &["rp", "rp.", "rs", "rs.", "idr", "inr", "usd", "aed"];

fn is_currency_context(text: &str, start: usize, end: usize) -> bool {
    let before = text[..start].trim_end_matches([' ', '\t']);
    if before.ends_with(CURRENCY_SYMBOLS) || text[end..].starts_with(CURRENCY_SYMBOLS) {
        return true;
    }
    let last_word = before.rsplit(char::is_whitespace).next().unwrap_or_default();
    CURRENCY_WORDS.contains(&last_word.to_lowercase().as_str())
}

/// Find every phone number in `text`, left to right, without overlaps.
///
/// Candidates that are currency amounts, truncated by a trailing ellipsis,
/// glued to a preceding letter, or outside the digit window are skipped.
pub fn extract_phone_numbers(text: &str, table: &CountryTable) -> Vec<PhoneMatch> {
    let mut out = Vec::new();
    let mut char_pos = 0usize;
    let mut byte_pos = 0usize;
    for m in CANDIDATE.find_iter(text) {
        let (start, end) = (m.start(), m.end());
        let raw = m.as_str();
        if is_currency_context(text, start, end)
            || text[end..].starts_with('…')
            // a digit glued to a preceding letter is part of a code or handle
            || text[..start].chars().next_back().is_some_and(|c| c.is_alphanumeric())
        {
            continue;
        }
        let Ok((phone, international_prefix)) = normalize_with_prefix(raw, table) else {
            continue;
        };
        char_pos += text[byte_pos..start].chars().count();
        let span_start = char_pos;
        let span_len = raw.chars().count();
        char_pos += span_len;
        byte_pos = end;
        out.push(PhoneMatch {
            phone,
            span: (span_start, span_start + span_len),
            raw: raw.to_string(),
            international_prefix,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountryProvenance {
    CallingCode,
    LanguageHeuristic,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountryAssignment {
    pub country: Option<String>,
    pub calling_code: Option<u16>,
    pub provenance: CountryProvenance,
}

/// Calling code first; then the post language if it names one country.
pub fn infer_country(phone: &PhoneNumber, post_language: Option<&str>, table: &CountryTable) -> CountryAssignment {
    if let Some(entry) = table.resolve_calling_code(&phone.canonical) {
        return CountryAssignment {
            country: Some(entry.country.clone()),
            calling_code: Some(entry.calling_code),
            provenance: CountryProvenance::CallingCode,
        };
    }
    if let Some(country) = post_language.and_then(|l| table.language_country(l)) {
        return CountryAssignment {
            country: Some(country.to_string()),
            calling_code: None,
            provenance: CountryProvenance::LanguageHeuristic,
        };
    }
    CountryAssignment {
        country: None,
        calling_code: None,
        provenance: CountryProvenance::Unknown,
    }
}

/// Longest matching prefix of the national number wins; on equal length the
/// order is toll-free, mobile, VoIP, landline.
pub fn classify_line_type(phone: &PhoneNumber, table: &CountryTable) -> LineType {
    let Some(entry) = table.resolve_calling_code(&phone.canonical) else {
        return LineType::Unknown;
    };
    let national = &phone.canonical[entry.calling_code.to_string().len()..];
    let rules = [
        (LineType::TollFree, &entry.toll_free_prefixes),
        (LineType::Mobile, &entry.mobile_prefixes),
        (LineType::Voip, &entry.voip_prefixes),
        (LineType::Landline, &entry.landline_prefixes),
    ];
    let mut best: Option<(usize, LineType)> = None;
    for (kind, prefixes) in rules {
        for p in prefixes.iter().filter(|p| national.starts_with(p.as_str())) {
            if best.is_none_or(|(len, _)| p.len() > len) {
                best = Some((p.len(), kind));
            }
        }
    }
    best.map_or(LineType::Unknown, |(_, kind)| kind)
}
