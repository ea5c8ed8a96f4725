//! Corpus ingestion: confidence-annotated raw tokens, cleaning, stemming
//! and per-million word frequencies.

use std::collections::HashMap;
use std::path::Path;

use crate::tsv::{fmt_f64, TsvFile, TsvWriter};
use crate::{Error, Result};

/// A surface token with an OCR-style confidence score in 0..=100.
/// Plain-text corpora default to confidence 100.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawToken {
    pub surface: String,
    pub confidence: u8,
}

impl RawToken {
    pub fn new(surface: impl Into<String>, confidence: u8) -> RawToken {
        RawToken {
            surface: surface.into(),
            confidence: confidence.min(100),
        }
    }
}

/// Split on whitespace, strip punctuation/special characters, drop empty
/// and digits-only tokens. All tokens carry confidence 100.
pub fn tokenize(text: &str) -> Vec<RawToken> {
    text.split_whitespace()
        .filter_map(clean_token)
        .map(|t| RawToken::new(t, 100))
        .collect()
}

/// The strip set: anything that is not a Unicode letter or digit.
/// Tokens that are empty or digits-only after stripping are dropped.
fn clean_token(raw: &str) -> Option<String> {
    let cleaned: String = raw.chars().filter(|c| c.is_alphanumeric()).collect();
    if cleaned.is_empty() || cleaned.chars().all(|c| c.is_numeric()) {
        None
    } else {
        Some(cleaned)
    }
}

/// Retain exactly the tokens with confidence >= threshold, in order.
pub fn filter_by_confidence(tokens: Vec<RawToken>, threshold: u8) -> Vec<RawToken> {
    tokens
        .into_iter()
        .filter(|t| t.confidence >= threshold)
        .collect()
}

/// One suffix rewrite, applied after lowercase folding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StemRule {
    pub suffix: String,
    pub replacement: String,
}

impl StemRule {
    pub fn new(suffix: impl Into<String>, replacement: impl Into<String>) -> StemRule {
        StemRule {
            suffix: suffix.into(),
            replacement: replacement.into(),
        }
    }
}

/// Lowercase-fold, then apply the first matching suffix rule. An empty rule
/// list is the lowercase identity. A rule only fires when it leaves a
/// non-empty stem.
pub fn stem(token: &str, rules: &[StemRule]) -> String {
    let lower = token.to_lowercase();
    for rule in rules {
        if let Some(base) = lower.strip_suffix(rule.suffix.as_str()) {
            let stemmed = format!("{base}{}", rule.replacement);
            if !stemmed.is_empty() {
                return stemmed;
            }
        }
    }
    lower
}

/// A cleaned token stream, optionally segmented into sentences.
/// `sentence_ends` holds exclusive end offsets, strictly increasing,
/// with the last equal to the token count.
#[derive(Debug, Clone)]
pub struct Corpus {
    tokens: Vec<String>,
    sentence_ends: Option<Vec<usize>>,
}

impl Corpus {
    pub fn from_tokens(tokens: Vec<String>) -> Corpus {
        Corpus {
            tokens,
            sentence_ends: None,
        }
    }

    pub fn from_sentences(sentences: Vec<Vec<String>>) -> Corpus {
        let mut tokens = Vec::new();
        let mut ends = Vec::new();
        for s in sentences {
            if s.is_empty() {
                continue;
            }
            tokens.extend(s);
            ends.push(tokens.len());
        }
        Corpus {
            tokens,
            sentence_ends: Some(ends),
        }
    }

    /// Clean raw text: sentences split on newlines and terminal `.!?`,
    /// tokens cleaned per [`tokenize`], confidence filtering skipped
    /// (plain text carries no scores).
    pub fn from_text(text: &str) -> Corpus {
        let mut sentences = Vec::new();
        for line in text.lines() {
            for chunk in line.split_inclusive(['.', '!', '?']) {
                let toks: Vec<String> = tokenize(chunk).into_iter().map(|t| t.surface).collect();
                if !toks.is_empty() {
                    sentences.push(toks);
                }
            }
        }
        Corpus::from_sentences(sentences)
    }

    /// Build from confidence-annotated tokens after filtering. The stream
    /// is treated as one sentence per the source ordering (no boundaries).
    pub fn from_raw_tokens(tokens: Vec<RawToken>, threshold: u8) -> Corpus {
        let kept = filter_by_confidence(tokens, threshold)
            .into_iter()
            .filter_map(|t| clean_token(&t.surface))
            .collect();
        Corpus::from_tokens(kept)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Sentence slices; the whole stream when no boundaries are known.
    pub fn sentences(&self) -> Vec<&[String]> {
        match &self.sentence_ends {
            None => {
                if self.tokens.is_empty() {
                    vec![]
                } else {
                    vec![&self.tokens[..]]
                }
            }
            Some(ends) => {
                let mut out = Vec::with_capacity(ends.len());
                let mut start = 0;
                for &end in ends {
                    out.push(&self.tokens[start..end]);
                    start = end;
                }
                out
            }
        }
    }

    /// Read a corpus file: plain UTF-8 text, or TSV with a
    /// `surface<TAB>confidence` header (confidence filtering at `threshold`).
    pub fn read(path: &Path, threshold: u8) -> Result<Corpus> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if text.lines().next() == Some("surface\tconfidence") {
            let file = TsvFile::parse(path, &text)?;
            let mut raw = Vec::with_capacity(file.rows.len());
            for (line, fields) in &file.rows {
                let conf: u8 = fields[1]
                    .parse()
                    .map_err(|_| Error::parse(path, *line, format!("invalid confidence `{}`", fields[1])))?;
                raw.push(RawToken::new(fields[0].clone(), conf));
            }
            Ok(Corpus::from_raw_tokens(raw, threshold))
        } else {
            Ok(Corpus::from_text(&text))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyEntry {
    pub raw_count: u64,
    pub per_million: f64,
    pub log10_pm: f64,
}

/// Per-stem counts with per-million and log10 per-million rates.
/// Absent words are absent, never stored with count 0.
#[derive(Debug, Clone)]
pub struct FrequencyTable {
    entries: HashMap<String, FrequencyEntry>,
    token_count: u64,
}

impl FrequencyTable {
    pub fn token_count(&self) -> u64 {
        self.token_count
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lookup by stem. `None` is the distinct "not present" state.
    pub fn get(&self, stem: &str) -> Option<&FrequencyEntry> {
        self.entries.get(stem)
    }

    /// Stem the surface token with `rules`, then look it up.
    pub fn lookup_word(&self, word: &str, rules: &[StemRule]) -> Option<&FrequencyEntry> {
        self.get(&stem(word, rules))
    }

    /// Rows sorted by descending count, ties broken lexicographically.
    pub fn sorted_entries(&self) -> Vec<(&str, &FrequencyEntry)> {
        let mut rows: Vec<_> = self.entries.iter().map(|(k, v)| (k.as_str(), v)).collect();
        rows.sort_by(|a, b| b.1.raw_count.cmp(&a.1.raw_count).then(a.0.cmp(b.0)));
        rows
    }

    pub fn to_tsv(&self, comment: Option<&str>) -> String {
        let mut w = TsvWriter::new(comment, &["stem", "count", "per_million", "log10_pm"]);
        for (stem, e) in self.sorted_entries() {
            w.row(&[
                stem.to_string(),
                e.raw_count.to_string(),
                fmt_f64(e.per_million),
                fmt_f64(e.log10_pm),
            ]);
        }
        w.finish()
    }

    pub fn read(path: &Path) -> Result<FrequencyTable> {
        let file = TsvFile::read(path)?;
        let (c_stem, c_count) = (file.col("stem")?, file.col("count")?);
        let mut entries = HashMap::new();
        let mut token_count = 0u64;
        for (line, fields) in &file.rows {
            let count: u64 = fields[c_count]
                .parse()
                .map_err(|_| file.err(*line, format!("invalid count `{}`", fields[c_count])))?;
            token_count += count;
            entries.insert(
                fields[c_stem].clone(),
                FrequencyEntry {
                    raw_count: count,
                    per_million: 0.0,
                    log10_pm: 0.0,
                },
            );
        }
        if token_count == 0 {
            return Err(Error::EmptyCorpus);
        }
        // Recompute rates from counts so the file's float rendering is not trusted.
        for e in entries.values_mut() {
            e.per_million = e.raw_count as f64 * 1e6 / token_count as f64;
            e.log10_pm = e.per_million.log10();
        }
        Ok(FrequencyTable {
            entries,
            token_count,
        })
    }
}

/// Count stemmed tokens and derive per-million and log10 rates.
pub fn compute_frequency(corpus: &Corpus, rules: &[StemRule]) -> Result<FrequencyTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let token_count = corpus.token_count() as u64;
    let mut counts: HashMap<String, u64> = HashMap::new();
    for token in corpus.tokens() {
        *counts.entry(stem(token, rules)).or_insert(0) += 1;
    }
    let entries = counts
        .into_iter()
        .map(|(word, raw_count)| {
            let per_million = raw_count as f64 * 1e6 / token_count as f64;
            (
                word,
                FrequencyEntry {
                    raw_count,
                    per_million,
                    log10_pm: per_million.log10(),
                },
            )
        })
        .collect();
    Ok(FrequencyTable {
        entries,
        token_count,
    })
}

/// Parse a stem-rule file: one `suffix<TAB>replacement` per line,
/// `#` comments allowed, replacement may be empty.
pub fn read_stem_rules(path: &Path) -> Result<Vec<StemRule>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(2, '\t');
        let suffix = parts.next().unwrap_or("");
        if suffix.is_empty() {
            return Err(Error::parse(path, i + 1, "empty suffix"));
        }
        rules.push(StemRule::new(suffix, parts.next().unwrap_or("")));
    }
    Ok(rules)
}
