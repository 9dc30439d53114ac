//! Logical-consistency and fluency metrics.
//!
//! BLEC checks that a generated sentence surfaces the operators (through
//! keywords) and the numbers of its logical form; BLEC* also requires the
//! table headers the form mentions. Both are reported as the percentage of
//! samples that pass. Mispredicted-token rate measures how many form tokens
//! never made it into the sentence, and BLEU-4 measures fluency against the
//! label sentences.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counterfactual::normalize;
use crate::dataset_io::Sample;
use crate::logic_form::{FormError, LogicTree, OperatorRegistry, TokenRole};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("{gold} gold samples but {predicted} predictions")]
    LengthMismatch { gold: usize, predicted: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sample {index}: {source}")]
    Form {
        index: usize,
        #[source]
        source: FormError,
    },
    #[error("lexicon: {0}")]
    Lexicon(String),
}

/// Surface keywords signalling each operator. An operator with no keywords
/// is vacuously satisfied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OperatorLexicon {
    keywords: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct LexiconRecord {
    operator: String,
    keywords: Vec<String>,
}

const SUPERLATIVE_HIGH: [&str; 7] = [
    "highest", "largest", "most", "top", "greatest", "maximum", "best",
];
const SUPERLATIVE_LOW: [&str; 6] = [
    "lowest", "smallest", "least", "fewest", "shortest", "minimum",
];
const ORDINALS: [&str; 8] = [
    "second", "third", "fourth", "fifth", "2nd", "3rd", "4th", "5th",
];

impl Default for OperatorLexicon {
    fn default() -> Self {
        let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let ordinal = |stems: &[&str]| {
            ORDINALS
                .iter()
                .flat_map(|o| stems.iter().map(move |s| format!("{o} {s}")))
                .collect::<Vec<_>>()
        };
        let mut keywords = BTreeMap::new();
        keywords.insert("argmax".into(), owned(&SUPERLATIVE_HIGH));
        keywords.insert("max".into(), owned(&SUPERLATIVE_HIGH));
        keywords.insert("argmin".into(), owned(&SUPERLATIVE_LOW));
        keywords.insert("min".into(), owned(&SUPERLATIVE_LOW));
        keywords.insert("nth_argmax".into(), ordinal(&SUPERLATIVE_HIGH));
        keywords.insert("nth_argmin".into(), ordinal(&SUPERLATIVE_LOW));
        keywords.insert("most_greater".into(), owned(&["most", "more than"]));
        keywords.insert(
            "filter_greater".into(),
            owned(&["more than", "greater", "over", "above"]),
        );
        keywords.insert(
            "filter_less".into(),
            owned(&["less than", "under", "below", "fewer"]),
        );
        keywords.insert("count".into(), owned(&["number of", "times", "total of"]));
        keywords.insert("avg".into(), owned(&["average"]));
        keywords.insert("sum".into(), owned(&["sum", "total"]));
        for vacuous in ["eq", "hop", "filter_eq", "all_rows"] {
            keywords.insert(vacuous.into(), Vec::new());
        }
        OperatorLexicon { keywords }
    }
}

impl OperatorLexicon {
    /// Parse either a JSON object mapping operator symbols to keyword lists,
    /// or one `{"operator": .., "keywords": [..]}` record per line. The
    /// result replaces the defaults entirely; missing operators are vacuous.
    pub fn from_json(text: &str) -> Result<Self, MetricError> {
        let raw: BTreeMap<String, Vec<String>> = match serde_json::from_str(text) {
            Ok(map) => map,
            Err(object_err) => {
                let mut map = BTreeMap::new();
                for (i, line) in text
                    .lines()
                    .enumerate()
                    .filter(|(_, l)| !l.trim().is_empty())
                {
                    let record: LexiconRecord = serde_json::from_str(line).map_err(|e| {
                        if i == 0 {
                            MetricError::Lexicon(object_err.to_string())
                        } else {
                            MetricError::Lexicon(format!("line {}: {e}", i + 1))
                        }
                    })?;
                    map.entry(record.operator)
                        .or_insert_with(Vec::new)
                        .extend(record.keywords);
                }
                map
            }
        };
        Ok(OperatorLexicon {
            keywords: raw
                .into_iter()
                .map(|(op, kws)| (op, kws.iter().map(|k| normalize(k)).collect()))
                .collect(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| MetricError::Lexicon(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lexicon serializes")
    }

    pub fn keywords(&self, operator: &str) -> &[String] {
        self.keywords.get(operator).map_or(&[], Vec::as_slice)
    }

    pub fn has_entry(&self, operator: &str) -> bool {
        self.keywords.contains_key(operator)
    }

    pub fn covers(&self, registry: &OperatorRegistry) -> bool {
        registry.symbols().all(|op| self.has_entry(op))
    }

    /// `normalized` must already be lowercased with collapsed whitespace.
    pub fn is_satisfied(&self, operator: &str, normalized: &str) -> bool {
        let kws = self.keywords(operator);
        kws.is_empty() || kws.iter().any(|k| normalized.contains(k.as_str()))
    }
}

static NUMERIC_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?(?:\d[\d,]*(?:\.\d+)?|\.\d+)%?$").unwrap());
static NUMBER_IN_TEXT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\d[\d,]*(?:\.\d+)?|\.\d+").unwrap());

/// Canonical form of a numeric token: sign, grouping commas and `%`
/// dropped, no leading zeros, no trailing fractional zeros.
pub fn canonical_number(token: &str) -> Option<String> {
    if !NUMERIC_TOKEN.is_match(token) {
        return None;
    }
    let digits: String = token
        .chars()
        .filter(|c| c.is_ascii_digit() || *c == '.')
        .collect();
    let (int, frac) = digits.split_once('.').unwrap_or((&digits, ""));
    let int = int.trim_start_matches('0');
    let int = if int.is_empty() { "0" } else { int };
    let frac = frac.trim_end_matches('0');
    Some(if frac.is_empty() {
        int.to_string()
    } else {
        format!("{int}.{frac}")
    })
}

/// Canonical numbers mentioned anywhere in `text`.
pub fn numbers_in(text: &str) -> BTreeSet<String> {
    NUMBER_IN_TEXT
        .find_iter(text)
        .filter_map(|m| canonical_number(m.as_str()))
        .collect()
}

/// What a prediction has to surface to be consistent with a form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Checkables {
    pub operators: BTreeSet<String>,
    pub numbers: BTreeSet<String>,
    /// Normalized header strings.
    pub headers: BTreeSet<String>,
}

pub fn extract_checkables(sample: &Sample) -> Result<Checkables, FormError> {
    Ok(checkables_of(&sample.tree()?, &sample.table_header))
}

pub fn checkables_of(tree: &LogicTree, table_header: &[String]) -> Checkables {
    let headers: BTreeSet<String> = table_header.iter().map(|h| normalize(h)).collect();
    let mut out = Checkables::default();
    for node in tree.nodes() {
        if node.is_operator() {
            out.operators.insert(node.name.clone());
            continue;
        }
        let whole = normalize(&node.name);
        if headers.contains(&whole) {
            out.headers.insert(whole);
            continue;
        }
        for word in node.name.split_whitespace() {
            let key = normalize(word);
            if headers.contains(&key) {
                out.headers.insert(key);
            } else if let Some(n) = canonical_number(word) {
                out.numbers.insert(n);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyMode {
    Blec,
    BlecStar,
}

impl ConsistencyMode {
    pub fn name(self) -> &'static str {
        match self {
            ConsistencyMode::Blec => "BLEC",
            ConsistencyMode::BlecStar => "BLEC*",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Miss {
    Operator(String),
    Number(String),
    Header(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Indicator {
    pub passed: bool,
    pub misses: Vec<Miss>,
}

pub fn check_consistency(
    checkables: &Checkables,
    prediction: &str,
    mode: ConsistencyMode,
    lexicon: &OperatorLexicon,
) -> Indicator {
    let text = normalize(prediction);
    let mentioned = numbers_in(&text);
    let mut misses: Vec<Miss> = checkables
        .operators
        .iter()
        .filter(|op| !lexicon.is_satisfied(op, &text))
        .map(|op| Miss::Operator(op.clone()))
        .collect();
    misses.extend(
        checkables
            .numbers
            .iter()
            .filter(|n| !mentioned.contains(*n))
            .map(|n| Miss::Number(n.clone())),
    );
    if mode == ConsistencyMode::BlecStar {
        misses.extend(
            checkables
                .headers
                .iter()
                .filter(|h| !text.contains(h.as_str()))
                .map(|h| Miss::Header(h.clone())),
        );
    }
    Indicator {
        passed: misses.is_empty(),
        misses,
    }
}

pub fn consistency_indicator(
    sample: &Sample,
    prediction: &str,
    mode: ConsistencyMode,
    lexicon: &OperatorLexicon,
) -> Result<Indicator, FormError> {
    Ok(check_consistency(
        &extract_checkables(sample)?,
        prediction,
        mode,
        lexicon,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleFailure {
    pub index: usize,
    pub misses: Vec<Miss>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub metric: String,
    /// `100 * passed / total`.
    pub score: f64,
    pub indicators: Vec<bool>,
    pub failures: Vec<SampleFailure>,
}

fn check_aligned(gold: usize, predicted: usize) -> Result<(), MetricError> {
    if gold != predicted {
        return Err(MetricError::LengthMismatch { gold, predicted });
    }
    if gold == 0 {
        return Err(MetricError::EmptyDataset);
    }
    Ok(())
}

pub fn corpus_score(
    dataset: &[Sample],
    predictions: &[String],
    mode: ConsistencyMode,
    lexicon: &OperatorLexicon,
) -> Result<ScoreReport, MetricError> {
    check_aligned(dataset.len(), predictions.len())?;
    let mut indicators = Vec::with_capacity(dataset.len());
    let mut failures = Vec::new();
    for (index, (sample, prediction)) in dataset.iter().zip(predictions).enumerate() {
        let ind = consistency_indicator(sample, prediction, mode, lexicon)
            .map_err(|source| MetricError::Form { index, source })?;
        if !ind.passed {
            failures.push(SampleFailure {
                index,
                misses: ind.misses,
            });
        }
        indicators.push(ind.passed);
    }
    let passed = indicators.iter().filter(|&&b| b).count();
    Ok(ScoreReport {
        metric: mode.name().to_string(),
        score: 100.0 * passed as f64 / dataset.len() as f64,
        indicators,
        failures,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MtrOptions {
    /// Also count operator tokens whose keywords are missing.
    pub count_operators: bool,
}

/// Countable form tokens missing from the prediction, divided by the full
/// token count of the form (punctuation included). Countable tokens are the
/// terminal words other than `all_rows`.
pub fn mispredicted_token_rate(sample: &Sample, prediction: &str) -> Result<f64, FormError> {
    Ok(mtr_of(
        &sample.tree()?,
        prediction,
        MtrOptions::default(),
        &OperatorLexicon::default(),
    ))
}

pub fn mtr_of(
    tree: &LogicTree,
    prediction: &str,
    options: MtrOptions,
    lexicon: &OperatorLexicon,
) -> f64 {
    let text = normalize(prediction);
    let mentioned = numbers_in(&text);
    let missing = tree
        .tokens()
        .iter()
        .filter(|token| match token.role {
            TokenRole::TerminalWord if token.text != "all_rows" => {
                match canonical_number(&token.text) {
                    Some(n) => !mentioned.contains(&n),
                    None => !text.contains(&token.text.to_lowercase()),
                }
            }
            TokenRole::Operator if options.count_operators => {
                !lexicon.keywords(&token.text).is_empty()
                    && !lexicon.is_satisfied(&token.text, &text)
            }
            _ => false,
        })
        .count();
    missing as f64 / tree.tokens().len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MtrReport {
    pub mean: f64,
    pub rates: Vec<f64>,
}

pub fn corpus_mtr(
    dataset: &[Sample],
    predictions: &[String],
    options: MtrOptions,
    lexicon: &OperatorLexicon,
) -> Result<MtrReport, MetricError> {
    check_aligned(dataset.len(), predictions.len())?;
    let rates = dataset
        .iter()
        .zip(predictions)
        .enumerate()
        .map(|(index, (sample, pred))| {
            let tree = sample
                .tree()
                .map_err(|source| MetricError::Form { index, source })?;
            Ok(mtr_of(&tree, pred, options, lexicon))
        })
        .collect::<Result<Vec<_>, MetricError>>()?;
    Ok(MtrReport {
        mean: rates.iter().sum::<f64>() / rates.len() as f64,
        rates,
    })
}

static PUNCT_AFTER_NON_DIGIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(\P{N})(\p{P})").unwrap());
static PUNCT_BEFORE_NON_DIGIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(\p{P})(\P{N})").unwrap());
static SYMBOL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\p{S})").unwrap());

/// Lowercasing tokenizer following mteval's international tokenization:
/// punctuation is split off unless it sits between digits, and symbols are
/// always split off.
pub fn nist_tokenize(text: &str) -> Vec<String> {
    let mut s = text
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace("&quot;", "\"")
        .replace("&amp;", "&")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .to_lowercase();
    s = PUNCT_AFTER_NON_DIGIT.replace_all(&s, "$1 $2 ").into_owned();
    s = PUNCT_BEFORE_NON_DIGIT
        .replace_all(&s, " $1 $2")
        .into_owned();
    s = SYMBOL.replace_all(&s, " $1 ").into_owned();
    s.split_whitespace().map(str::to_string).collect()
}

const MAX_ORDER: usize = 4;

/// Corpus statistics behind a BLEU score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
    pub brevity_penalty: f64,
    pub score: f64,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Corpus BLEU-4 in `[0, 100]` with one reference per hypothesis and no
/// smoothing. Orders for which the corpus has no hypothesis n-grams are
/// left out of the geometric mean.
pub fn bleu4(references: &[String], hypotheses: &[String]) -> Result<f64, MetricError> {
    Ok(bleu_stats(references, hypotheses)?.score)
}

pub fn bleu_stats(references: &[String], hypotheses: &[String]) -> Result<BleuStats, MetricError> {
    check_aligned(references.len(), hypotheses.len())?;
    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let mut hyp_len = 0;
    let mut ref_len = 0;
    for (reference, hypothesis) in references.iter().zip(hypotheses) {
        let r = nist_tokenize(reference);
        let h = nist_tokenize(hypothesis);
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(&r, n);
            for (gram, count) in ngram_counts(&h, n) {
                matches[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
            totals[n - 1] += h.len().saturating_sub(n - 1);
        }
    }

    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).min(0.0).exp()
    };
    let mut log_sum = 0.0;
    let mut zero = false;
    for n in 0..MAX_ORDER {
        if totals[n] == 0 {
            continue;
        }
        if matches[n] == 0 {
            zero = true;
            break;
        }
        log_sum += (matches[n] as f64 / totals[n] as f64).ln();
    }
    let score = if zero || hyp_len == 0 {
        0.0
    } else {
        100.0 * brevity_penalty * (log_sum / MAX_ORDER as f64).exp()
    };
    Ok(BleuStats {
        matches,
        totals,
        hyp_len,
        ref_len,
        brevity_penalty,
        score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn eurovision(form: &str, sent: &str) -> Sample {
        Sample::new(
            form,
            sent,
            "bulgaria in the eurovision song contest 2008",
            strings(&["draw", "song", "artist", "televote", "place"]),
            vec![
                strings(&["1", "dj , take me away", "deep zone", "55%", "1"]),
                strings(&["2", "tazi vecher", "grafa", "2%", "9"]),
            ],
        )
    }

    const SAMPLE1: &str =
        "eq { hop { argmax { all_rows ; televote } ; song } ; dj , take me away } = true";

    #[test]
    fn number_canonicalization() {
        assert_eq!(canonical_number("5032").as_deref(), Some("5032"));
        assert_eq!(canonical_number("5,032").as_deref(), Some("5032"));
        assert_eq!(canonical_number("007").as_deref(), Some("7"));
        assert_eq!(canonical_number("45%").as_deref(), Some("45"));
        assert_eq!(canonical_number("1.50").as_deref(), Some("1.5"));
        assert_eq!(canonical_number("0").as_deref(), Some("0"));
        assert_eq!(canonical_number(".5").as_deref(), Some("0.5"));
        assert_eq!(canonical_number("1975s"), None);
        assert_eq!(canonical_number("all_rows"), None);
        assert!(numbers_in("drew more than 24,999 people").contains("24999"));
    }

    #[test]
    fn case_study_checkables() {
        let s = Sample::new(
            "eq { hop { argmax { all_rows ; score } ; attendance } ; 5032 }",
            "",
            "",
            strings(&["date", "score", "attendance"]),
            vec![],
        );
        let c = extract_checkables(&s).unwrap();
        assert_eq!(
            c.operators,
            ["argmax", "eq", "hop"].map(String::from).into()
        );
        assert_eq!(c.numbers, ["5032".to_string()].into());
        assert_eq!(c.headers, ["attendance", "score"].map(String::from).into());
    }

    #[test]
    fn leaf_form_has_nothing_to_check() {
        let s = Sample::new("all_rows", "", "", strings(&["a"]), vec![]);
        let c = extract_checkables(&s).unwrap();
        assert!(c.numbers.is_empty() && c.headers.is_empty());
        let lex = OperatorLexicon::default();
        assert!(
            consistency_indicator(&s, "", ConsistencyMode::BlecStar, &lex)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn sample_one_checkables_and_indicators() {
        let s = eurovision(
            SAMPLE1,
            "the song dj , take me away recevied the largest percentage of televotes .",
        );
        let c = extract_checkables(&s).unwrap();
        assert_eq!(
            c.operators,
            ["argmax", "eq", "hop"].map(String::from).into()
        );
        assert!(c.numbers.is_empty());
        assert_eq!(c.headers, ["song", "televote"].map(String::from).into());

        let lex = OperatorLexicon::default();
        for mode in [ConsistencyMode::Blec, ConsistencyMode::BlecStar] {
            assert!(
                consistency_indicator(&s, &s.sent, mode, &lex)
                    .unwrap()
                    .passed
            );
        }

        let counter = "the song ' tazi vecher ' got the least televote in bulgaria in the eurovision song contest 2008 .";
        let ind = consistency_indicator(&s, counter, ConsistencyMode::Blec, &lex).unwrap();
        assert!(!ind.passed);
        assert_eq!(ind.misses, [Miss::Operator("argmax".into())]);
    }

    #[test]
    fn number_matching_is_grouping_invariant() {
        let s = Sample::new("eq { count { all_rows } ; 5032 }", "", "", vec![], vec![]);
        let lex = OperatorLexicon::default();
        let pass = |p: &str| {
            consistency_indicator(&s, p, ConsistencyMode::Blec, &lex)
                .unwrap()
                .passed
        };
        assert!(pass("the number of games is 5,032"));
        assert!(pass("the number of games is 5032"));
        assert!(!pass("the number of games is 503"));
        assert!(!pass("5032 games"), "count keyword missing");
        assert!(!pass(""));
    }

    #[test]
    fn blec_star_adds_header_failures() {
        let s = eurovision(SAMPLE1, "");
        let lex = OperatorLexicon::default();
        let p = "dj , take me away had the largest share";
        assert!(
            consistency_indicator(&s, p, ConsistencyMode::Blec, &lex)
                .unwrap()
                .passed
        );
        let star = consistency_indicator(&s, p, ConsistencyMode::BlecStar, &lex).unwrap();
        assert!(!star.passed);
        assert_eq!(star.misses.len(), 2);
    }

    #[test]
    fn corpus_scores() {
        let s = eurovision(SAMPLE1, "the largest televote went to the song x");
        let lex = OperatorLexicon::default();
        let data = vec![s.clone(), s];
        let preds = strings(&["the largest televote went to the song x", "nothing"]);
        let report = corpus_score(&data, &preds, ConsistencyMode::Blec, &lex).unwrap();
        assert_eq!(report.score, 50.0);
        assert_eq!(report.indicators, [true, false]);
        assert_eq!(report.failures[0].index, 1);

        assert!(matches!(
            corpus_score(&data, &preds[..1], ConsistencyMode::Blec, &lex),
            Err(MetricError::LengthMismatch {
                gold: 2,
                predicted: 1
            })
        ));
        assert!(matches!(
            corpus_score(&[], &[], ConsistencyMode::Blec, &lex),
            Err(MetricError::EmptyDataset)
        ));
    }

    #[test]
    fn lexicon_covers_registry_and_loads_from_json() {
        let lex = OperatorLexicon::default();
        assert!(lex.covers(&OperatorRegistry::default()));
        assert!(lex
            .keywords("nth_argmin")
            .contains(&"second shortest".to_string()));

        let custom = OperatorLexicon::from_json(r#"{"argmax": ["Highest"]}"#).unwrap();
        assert_eq!(custom.keywords("argmax"), ["highest"]);
        assert!(custom.is_satisfied("argmin", "anything"));
        assert_eq!(OperatorLexicon::from_json(&lex.to_json()).unwrap(), lex);
        assert!(OperatorLexicon::from_json("[1, 2]").is_err());
        let lines = "{\"operator\": \"argmax\", \"keywords\": [\"top\"]}\n\n{\"operator\": \"count\", \"keywords\": [\"number of\"]}\n";
        let records = OperatorLexicon::from_json(lines).unwrap();
        assert_eq!(records.keywords("argmax"), ["top"]);
        assert_eq!(records.keywords("count"), ["number of"]);
    }

    #[test]
    fn mtr_examples() {
        let case = Sample::new(
            "eq { hop { argmax { all_rows ; score } ; attendance } ; 5032 }",
            "",
            "",
            vec![],
            vec![],
        );
        assert_eq!(case.tree().unwrap().tokens().len(), 16);
        let rate =
            mispredicted_token_rate(&case, "the game with the highest score had 5032 spectators")
                .unwrap();
        assert!((rate - 1.0 / 16.0).abs() < 1e-12);

        let hop = Sample::new(
            "hop { argmax { all_rows ; attendance } ; date } = true",
            "",
            "",
            vec![],
            vec![],
        );
        assert_eq!(mispredicted_token_rate(&hop, "").unwrap(), 2.0 / 11.0);
        assert_eq!(
            mispredicted_token_rate(&hop, "the date with the top attendance").unwrap(),
            0.0
        );
        assert_eq!(mispredicted_token_rate(&hop, &hop.logic_str).unwrap(), 0.0);

        let thirteen = Sample::new(
            "hop { argmax { all_rows ; crowd size } ; home team }",
            "",
            "",
            vec![],
            vec![],
        );
        assert_eq!(mispredicted_token_rate(&thirteen, "").unwrap(), 4.0 / 13.0);

        let four = Sample::new(
            "filter_eq { all_rows ; site ; memorial stadium }",
            "",
            "",
            vec![],
            vec![],
        );
        // site, memorial, stadium over 9 tokens
        assert_eq!(mispredicted_token_rate(&four, "").unwrap(), 3.0 / 9.0);
    }

    #[test]
    fn mtr_can_count_operators() {
        let tree = crate::logic_form::parse_str("hop { argmax { all_rows ; attendance } ; date }")
            .unwrap();
        let lex = OperatorLexicon::default();
        let with = MtrOptions {
            count_operators: true,
        };
        assert_eq!(mtr_of(&tree, "attendance date", with, &lex), 1.0 / 11.0);
        assert_eq!(mtr_of(&tree, "highest attendance date", with, &lex), 0.0);
        assert_eq!(
            mtr_of(&tree, "attendance date", MtrOptions::default(), &lex),
            0.0
        );
    }

    #[test]
    fn tokenizer_splits_punctuation_except_between_digits() {
        assert_eq!(
            nist_tokenize("The cat, the HAT."),
            ["the", "cat", ",", "the", "hat", "."]
        );
        assert_eq!(nist_tokenize("24,999 people"), ["24,999", "people"]);
        assert_eq!(nist_tokenize("3.5 km"), ["3.5", "km"]);
        assert_eq!(nist_tokenize("a+b $5"), ["a", "+", "b", "$", "5"]);
        assert_eq!(nist_tokenize("&quot;x&quot;"), ["\"", "x", "\""]);
    }

    #[test]
    fn bleu_edge_cases() {
        let x = strings(&["the cat sat on the mat", "a b"]);
        assert!((bleu4(&x, &x).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(
            bleu4(&strings(&["a b c d"]), &strings(&["w x y z"])).unwrap(),
            0.0
        );
        assert_eq!(bleu4(&strings(&["a b c d"]), &strings(&[""])).unwrap(), 0.0);
        assert!(bleu4(&x, &x[..1]).is_err());
        assert!(bleu4(&[], &[]).is_err());
    }

    #[test]
    fn bleu_matches_hand_count() {
        let r = strings(&["the cat sat on the mat"]);
        let h = strings(&["the cat sat on mat"]);
        let stats = bleu_stats(&r, &h).unwrap();
        assert_eq!(stats.matches, [5, 3, 2, 1]);
        assert_eq!(stats.totals, [5, 4, 3, 2]);
        let precisions: [f64; 4] = [5.0 / 5.0, 3.0 / 4.0, 2.0 / 3.0, 1.0 / 2.0];
        let geo = precisions.iter().product::<f64>().powf(0.25);
        let expected = 100.0 * (1.0f64 - 6.0 / 5.0).exp() * geo;
        assert!((stats.score - expected).abs() < 1e-9);
        assert!((stats.score - 57.89).abs() < 0.01);
    }
}
