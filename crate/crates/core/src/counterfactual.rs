//! Counterfactual sample synthesis by table-header replacement.
//!
//! A sample is eligible when one of its table headers appears both as a
//! terminal of the logical form and, word-aligned and case-insensitively, in
//! the label sentence. Synthesis picks one such header and rewrites it in the
//! form and at every matched sentence position. The table is left as is.
//!
//! Replacement headers come from one of two sources:
//! - `RandomString`: a fresh lowercase alphanumeric token;
//! - `Disturb`: another header of the same data type drawn from the
//!   dataset-wide [`HeaderPool`].
//!
//! Every emitted sample draws from its own ChaCha stream keyed by
//! `(seed, emission index)`, so output does not depend on evaluation order.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset_io::Sample;
use crate::logic_form::FormError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("header '{0}' is not in the table")]
    UnknownHeader(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no header of the form can be matched in the label sentence")]
    NotEligible,
    #[error("no other {data_type} header is available to replace '{header}'")]
    PoolExhausted {
        header: String,
        data_type: HeaderDataType,
    },
    #[error("invalid ratio '{0}'")]
    InvalidRatio(String),
    #[error(transparent)]
    Form(#[from] FormError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderDataType {
    String,
    Number,
    Time,
}

impl fmt::Display for HeaderDataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeaderDataType::String => "string",
            HeaderDataType::Number => "number",
            HeaderDataType::Time => "time",
        })
    }
}

/// Column typing thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypeRules {
    /// Fraction of cells that must match a pattern for the column to take
    /// that type.
    pub threshold: f64,
}

impl Default for TypeRules {
    fn default() -> Self {
        TypeRules { threshold: 0.8 }
    }
}

const MONTH: &str = "(?:january|february|march|april|may|june|july|august|september|october|november|december|jan|feb|mar|apr|jun|jul|aug|sep|sept|oct|nov|dec)\\.?";

static DATE_PATTERNS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        r"^\d{1,2}\s*/\s*\d{1,2}\s*/\s*\d{2,4}$".to_string(),
        r"^\d{4}\s*-\s*\d{1,2}\s*-\s*\d{1,2}$".to_string(),
        r"^\d{1,2}\s*-\s*\d{1,2}\s*-\s*\d{4}$".to_string(),
        r"^\d{4}\s*[-–]\s*\d{2,4}$".to_string(),
        r"^\d{1,2}:\d{2}(?::\d{2})?(?:\.\d+)?$".to_string(),
        format!(r"(?i)^(?:\d{{1,2}}(?:st|nd|rd|th)?\s+)?{MONTH}(?:\s+\d{{1,2}}(?:st|nd|rd|th)?)?(?:\s*,?\s*\d{{4}})?$"),
    ]
    .iter()
    .map(|p| Regex::new(p).expect("valid date pattern"))
    .collect()
});

static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?:1[0-9]|20)\d{2}$").unwrap());

fn is_time_cell(cell: &str) -> bool {
    let cell = cell.trim();
    YEAR.is_match(cell) || DATE_PATTERNS.iter().any(|re| re.is_match(cell))
}

fn is_number_cell(cell: &str) -> bool {
    let cleaned: String = cell
        .trim()
        .chars()
        .filter(|c| !matches!(c, ',' | '%') && !c.is_whitespace())
        .collect();
    !cleaned.is_empty() && cleaned.parse::<f64>().is_ok_and(f64::is_finite)
}

fn has_time_hint(header: &str) -> bool {
    let lower = header.to_lowercase();
    ["date", "year", "time"].iter().any(|h| lower.contains(h))
}

/// Type of a column from its cells. When both the time and the number
/// share pass the threshold (bare years), the header name decides.
pub fn classify_column(header: &str, cells: &[&str], rules: TypeRules) -> HeaderDataType {
    if cells.is_empty() {
        return if has_time_hint(header) {
            HeaderDataType::Time
        } else {
            HeaderDataType::String
        };
    }
    let share = |pred: fn(&str) -> bool| {
        cells.iter().filter(|c| pred(c)).count() as f64 / cells.len() as f64
    };
    let time = share(is_time_cell) >= rules.threshold;
    let number = share(is_number_cell) >= rules.threshold;
    match (time, number) {
        (true, true) if has_time_hint(header) => HeaderDataType::Time,
        (true, true) => HeaderDataType::Number,
        (true, false) => HeaderDataType::Time,
        (false, true) => HeaderDataType::Number,
        (false, false) => HeaderDataType::String,
    }
}

pub fn classify_header_type(
    sample: &Sample,
    header: &str,
) -> Result<HeaderDataType, SynthesisError> {
    classify_header_type_with(sample, header, TypeRules::default())
}

pub fn classify_header_type_with(
    sample: &Sample,
    header: &str,
    rules: TypeRules,
) -> Result<HeaderDataType, SynthesisError> {
    let cells = sample
        .column(header)
        .ok_or_else(|| SynthesisError::UnknownHeader(header.to_string()))?;
    Ok(classify_column(header, &cells, rules))
}

/// Every table header of a dataset, grouped by data type. A header keeps
/// the type of the first table it was seen in; pools keep first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HeaderPool {
    pools: BTreeMap<HeaderDataType, Vec<String>>,
    #[serde(skip)]
    types: BTreeMap<String, HeaderDataType>,
}

impl HeaderPool {
    pub fn insert(&mut self, header: &str, data_type: HeaderDataType) -> bool {
        if self.types.contains_key(header) {
            return false;
        }
        self.types.insert(header.to_string(), data_type);
        self.pools
            .entry(data_type)
            .or_default()
            .push(header.to_string());
        true
    }

    pub fn headers(&self, data_type: HeaderDataType) -> &[String] {
        self.pools.get(&data_type).map_or(&[], Vec::as_slice)
    }

    pub fn type_of(&self, header: &str) -> Option<HeaderDataType> {
        self.types.get(header).copied()
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

pub fn build_header_pool(dataset: &[Sample]) -> Result<HeaderPool, SynthesisError> {
    build_header_pool_with(dataset, TypeRules::default())
}

pub fn build_header_pool_with(
    dataset: &[Sample],
    rules: TypeRules,
) -> Result<HeaderPool, SynthesisError> {
    if dataset.is_empty() {
        return Err(SynthesisError::EmptyDataset);
    }
    let mut pool = HeaderPool::default();
    for sample in dataset {
        for header in &sample.table_header {
            if pool.type_of(header).is_none() {
                pool.insert(header, classify_header_type_with(sample, header, rules)?);
            }
        }
    }
    Ok(pool)
}

/// Lowercase and collapse whitespace.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

thread_local! {
    static PHRASE_CACHE: RefCell<HashMap<String, Regex>> = RefCell::new(HashMap::new());
}

/// Byte ranges of `phrase` in `text`: case-insensitive, any whitespace
/// between words, and not glued to a neighbouring letter or digit.
pub fn find_phrase(text: &str, phrase: &str) -> Vec<Range<usize>> {
    let key = normalize(phrase);
    if key.is_empty() || !normalize(text).contains(&key) {
        return Vec::new();
    }
    let re = PHRASE_CACHE.with(|cache| {
        let mut cache = cache.borrow_mut();
        if cache.len() > 4096 {
            cache.clear();
        }
        cache
            .entry(key)
            .or_insert_with_key(|k| {
                let words: Vec<String> = k.split(' ').map(regex::escape).collect();
                Regex::new(&format!("(?i){}", words.join(r"\s+"))).expect("escaped phrase")
            })
            .clone()
    });
    let mut spans = Vec::new();
    let mut start = 0;
    while let Some(m) = re.find_at(text, start) {
        let before = text[..m.start()].chars().next_back();
        let after = text[m.end()..].chars().next();
        let glued = |c: Option<char>| c.is_some_and(char::is_alphanumeric);
        if !glued(before) && !glued(after) {
            spans.push(m.range());
            start = m.end();
        } else {
            start = m.start() + text[m.start()..].chars().next().map_or(1, char::len_utf8);
        }
        if start >= text.len() {
            break;
        }
    }
    spans
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderMatch {
    pub header: String,
    /// Byte ranges in the label sentence.
    pub spans: Vec<Range<usize>>,
}

/// Headers that are terminals of the form and occur in the sentence. An
/// empty result means the sample is filtered out.
pub fn find_replaceable_headers(sample: &Sample) -> Result<Vec<HeaderMatch>, FormError> {
    let tree = sample.tree()?;
    let terminals: HashSet<String> = tree.terminals().map(|n| normalize(&n.name)).collect();
    let mut seen = HashSet::new();
    let mut matches = Vec::new();
    for header in &sample.table_header {
        let key = normalize(header);
        if key.is_empty() || !terminals.contains(&key) || !seen.insert(key.clone()) {
            continue;
        }
        let spans = find_phrase(&sample.sent, &key);
        if !spans.is_empty() {
            matches.push(HeaderMatch {
                header: header.clone(),
                spans,
            });
        }
    }
    Ok(matches)
}

/// How one emitted sample picks its new header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Replacement {
    RandomString,
    Disturb,
}

/// Dataset-level strategy; `Mix` alternates disturb and random strings,
/// starting with disturb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    RandomString,
    Disturb,
    Mix,
}

impl Strategy {
    pub fn replacement_for(self, emission: usize) -> Replacement {
        match self {
            Strategy::RandomString => Replacement::RandomString,
            Strategy::Disturb => Replacement::Disturb,
            Strategy::Mix if emission.is_multiple_of(2) => Replacement::Disturb,
            Strategy::Mix => Replacement::RandomString,
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" | "random_string" | "random-string" => Ok(Strategy::RandomString),
            "disturb" => Ok(Strategy::Disturb),
            "mix" => Ok(Strategy::Mix),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

/// Size of the synthetic set relative to the original, `|S~| / |S|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ratio {
    Finite {
        numerator: u64,
        denominator: u64,
    },
    /// Train on synthetic data only; the emission count is chosen separately.
    Infinite,
}

impl Ratio {
    pub fn whole(r: u64) -> Self {
        Ratio::Finite {
            numerator: r,
            denominator: 1,
        }
    }

    /// `ceil(r * original)`, or `None` for an infinite ratio.
    pub fn target_count(self, original: usize) -> Option<usize> {
        match self {
            Ratio::Finite {
                numerator,
                denominator,
            } => {
                let num = u128::from(numerator) * original as u128;
                let den = u128::from(denominator);
                Some(num.div_ceil(den) as usize)
            }
            Ratio::Infinite => None,
        }
    }
}

impl FromStr for Ratio {
    type Err = SynthesisError;

    /// Accepts `inf`, `a/b`, or a non-negative decimal such as `0.25`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || SynthesisError::InvalidRatio(s.to_string());
        let t = s.trim();
        if matches!(t.to_lowercase().as_str(), "inf" | "infinity" | "∞") {
            return Ok(Ratio::Infinite);
        }
        let digits = |x: &str| !x.is_empty() && x.bytes().all(|b| b.is_ascii_digit());
        let (numerator, denominator) = if let Some((a, b)) = t.split_once('/') {
            let (a, b) = (a.trim(), b.trim());
            if !digits(a) || !digits(b) {
                return Err(invalid());
            }
            (
                a.parse().map_err(|_| invalid())?,
                b.parse().map_err(|_| invalid())?,
            )
        } else {
            let (int, frac) = t.split_once('.').unwrap_or((t, ""));
            if !(digits(int) || (int.is_empty() && digits(frac)))
                || !(frac.is_empty() || digits(frac))
            {
                return Err(invalid());
            }
            let den = 10u64.checked_pow(frac.len() as u32).ok_or_else(invalid)?;
            let num: u64 = format!("{int}{frac}").parse().map_err(|_| invalid())?;
            (num, den)
        };
        if denominator == 0 {
            return Err(invalid());
        }
        Ok(Ratio::Finite {
            numerator,
            denominator,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomStringConfig {
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for RandomStringConfig {
    fn default() -> Self {
        RandomStringConfig {
            min_len: 6,
            max_len: 12,
        }
    }
}

const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

/// Lowercase alphanumeric token that starts with a letter, so it never
/// reads as a number.
pub fn random_header(rng: &mut impl Rng, config: RandomStringConfig) -> String {
    let len = rng.random_range(config.min_len.max(1)..=config.max_len.max(config.min_len.max(1)));
    let mut s = String::with_capacity(len);
    s.push(LETTERS[rng.random_range(0..LETTERS.len())] as char);
    for _ in 1..len {
        s.push(ALNUM[rng.random_range(0..ALNUM.len())] as char);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterfactual {
    /// Index of the source sample in the input dataset.
    pub source: usize,
    pub header: String,
    pub replacement: String,
    pub kind: Replacement,
    pub sample: Sample,
}

fn writable(header: &str) -> bool {
    !header.trim().is_empty() && !header.contains(['{', '}', ';'])
}

/// Replace one uniformly chosen replaceable header of `sample`.
pub fn synthesize_sample(
    sample: &Sample,
    kind: Replacement,
    pool: &HeaderPool,
    random: RandomStringConfig,
    rng: &mut impl Rng,
) -> Result<(HeaderMatch, String, Sample), SynthesisError> {
    let matches = find_replaceable_headers(sample)?;
    if matches.is_empty() {
        return Err(SynthesisError::NotEligible);
    }
    let chosen = matches[rng.random_range(0..matches.len())].clone();
    let original = normalize(&chosen.header);

    let replacement = match kind {
        Replacement::RandomString => random_header(rng, random),
        Replacement::Disturb => {
            let data_type = match pool.type_of(&chosen.header) {
                Some(t) => t,
                None => classify_header_type(sample, &chosen.header)?,
            };
            let candidates: Vec<&String> = pool
                .headers(data_type)
                .iter()
                .filter(|h| writable(h) && normalize(h) != original)
                .collect();
            if candidates.is_empty() {
                return Err(SynthesisError::PoolExhausted {
                    header: chosen.header.clone(),
                    data_type,
                });
            }
            candidates[rng.random_range(0..candidates.len())].clone()
        }
    };

    let tree = sample.tree()?;
    let renamed = tree.rename_terminals(|name| normalize(name) == original, &replacement)?;

    let mut sent = sample.sent.clone();
    for span in chosen.spans.iter().rev() {
        sent.replace_range(span.clone(), &replacement);
    }

    let mut out = sample.clone();
    out.logic_str = renamed.linearize();
    out.sent = sent;
    Ok((chosen, replacement, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub strategy: Strategy,
    pub ratio: Ratio,
    pub seed: u64,
    /// Emission count for an infinite ratio; defaults to `|S|`.
    pub infinite_count: Option<usize>,
    pub random: RandomStringConfig,
}

impl SynthesisConfig {
    pub fn new(strategy: Strategy, ratio: Ratio, seed: u64) -> Self {
        SynthesisConfig {
            strategy,
            ratio,
            seed,
            infinite_count: None,
            random: RandomStringConfig::default(),
        }
    }

    pub fn emission_count(&self, original: usize) -> usize {
        self.ratio
            .target_count(original)
            .unwrap_or_else(|| self.infinite_count.unwrap_or(original))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub samples: Vec<Counterfactual>,
    /// Number of distinct eligible source samples.
    pub eligible: usize,
    /// Disturb draws that fell back to a random string.
    pub fallbacks: usize,
}

/// Random stream for emission `index`.
pub fn emission_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Emit `ceil(r * |S|)` counterfactuals, cycling over the eligible samples
/// in dataset order.
pub fn synthesize_dataset(
    dataset: &[Sample],
    config: &SynthesisConfig,
    pool: &HeaderPool,
) -> Result<Synthesis, SynthesisError> {
    let count = config.emission_count(dataset.len());
    let mut eligible = Vec::new();
    for (idx, sample) in dataset.iter().enumerate() {
        if !find_replaceable_headers(sample)?.is_empty() {
            eligible.push(idx);
        }
    }
    if count == 0 {
        return Ok(Synthesis {
            samples: Vec::new(),
            eligible: eligible.len(),
            fallbacks: 0,
        });
    }
    if eligible.is_empty() {
        return Err(SynthesisError::NotEligible);
    }

    let mut samples = Vec::with_capacity(count);
    let mut fallbacks = 0;
    for k in 0..count {
        let source = eligible[k % eligible.len()];
        let sample = &dataset[source];
        let mut rng = emission_rng(config.seed, k);
        let mut kind = config.strategy.replacement_for(k);
        let result = match synthesize_sample(sample, kind, pool, config.random, &mut rng) {
            Err(SynthesisError::PoolExhausted { .. }) => {
                fallbacks += 1;
                kind = Replacement::RandomString;
                synthesize_sample(sample, kind, pool, config.random, &mut rng)
            }
            other => other,
        };
        let (chosen, replacement, sample) = result?;
        samples.push(Counterfactual {
            source,
            header: chosen.header,
            replacement,
            kind,
            sample,
        });
    }
    Ok(Synthesis {
        samples,
        eligible: eligible.len(),
        fallbacks,
    })
}
