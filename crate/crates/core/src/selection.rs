//! Perplexity-rank stimulus selection, zero-WP flagging and the
//! multicollinearity gate.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::corpus::{FrequencyTable, StemRule};
use crate::embedding::SkipGramModel;
use crate::scoring::{context_distribution, ModelScores};
use crate::stats::{correlation_table, pearson, vif, CorrelationMatrix};
use crate::tsv::{fmt_opt, parse_opt, TsvFile, TsvWriter};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SelectionConfig {
    /// Fraction of the surviving pool selected per model.
    pub fraction: f64,
    pub min_words: usize,
    pub max_words: usize,
    /// Word length bounds in letters.
    pub min_word_len: usize,
    pub max_word_len: usize,
    /// Gate on |r| between the WP columns of different models.
    pub corr_threshold: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            fraction: 1.0 / 3.0,
            min_words: 5,
            max_words: 15,
            min_word_len: 2,
            max_word_len: 17,
            corr_threshold: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RankedSentence {
    pub sentence_id: String,
    pub perplexity: f64,
    /// 1 = lowest perplexity; infinite perplexities rank after all finite.
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct PerplexityRanking {
    pub model_id: String,
    pub entries: Vec<RankedSentence>,
}

impl PerplexityRanking {
    pub fn rank_of(&self, sentence_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.sentence_id == sentence_id)
            .map(|e| e.rank)
    }
}

/// Rank by ascending perplexity, ties broken by sentence id; infinite
/// perplexities after all finite ones.
pub fn rank_sentences(scores: &ModelScores) -> PerplexityRanking {
    let mut entries: Vec<RankedSentence> = scores
        .scores
        .iter()
        .map(|s| RankedSentence {
            sentence_id: s.sentence_id.clone(),
            perplexity: s.perplexity,
            rank: 0,
        })
        .collect();
    entries.sort_by(|a, b| {
        let inf_a = a.perplexity.is_infinite();
        let inf_b = b.perplexity.is_infinite();
        inf_a
            .cmp(&inf_b)
            .then_with(|| a.perplexity.partial_cmp(&b.perplexity).unwrap())
            .then_with(|| a.sentence_id.cmp(&b.sentence_id))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    PerplexityRanking {
        model_id: scores.model_id.clone(),
        entries,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedSentence {
    pub sentence_id: String,
    pub model_id: String,
    /// min over competing models of (their rank - this model's rank).
    pub discriminativeness: i64,
    pub non_discriminative: bool,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub model_ids: Vec<String>,
    pub sentences: Vec<SelectedSentence>,
    pub warning: Option<String>,
}

/// Word-count and word-length filter applied before selection.
fn passes_bounds(tokens: &[String], config: &SelectionConfig) -> bool {
    if tokens.len() < config.min_words || tokens.len() > config.max_words {
        return false;
    }
    tokens.iter().all(|t| {
        let n = t.chars().count();
        n >= config.min_word_len && n <= config.max_word_len
    })
}

/// Pick, per model, the sentences whose perplexity rank under that model
/// beats its rank under every other model by the largest margin. Each
/// sentence goes to at most one model (its best margin).
pub fn select_discriminative(
    rankings: &[PerplexityRanking],
    pool: &[(String, Vec<String>)],
    config: &SelectionConfig,
) -> Result<Selection> {
    assert!(rankings.len() >= 2, "need at least two models");
    let rank_maps: Vec<HashMap<&str, usize>> = rankings
        .iter()
        .map(|r| {
            r.entries
                .iter()
                .map(|e| (e.sentence_id.as_str(), e.rank))
                .collect()
        })
        .collect();

    let survivors: Vec<&(String, Vec<String>)> = pool
        .iter()
        .filter(|(_, tokens)| passes_bounds(tokens, config))
        .collect();
    for (id, _) in &survivors {
        for (m, map) in rank_maps.iter().enumerate() {
            if !map.contains_key(id.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "sentence `{id}` has no rank under model `{}`",
                    rankings[m].model_id
                )));
            }
        }
    }

    let n = survivors.len();
    let target = (config.fraction * n as f64).ceil() as usize;

    // best model per sentence, by max rank margin; ties to the first model
    let mut per_model: Vec<Vec<(i64, &str)>> = vec![Vec::new(); rankings.len()];
    for (id, _) in &survivors {
        let mut best: Option<(usize, i64)> = None;
        for m in 0..rankings.len() {
            let own = rank_maps[m][id.as_str()] as i64;
            let margin = (0..rankings.len())
                .filter(|&o| o != m)
                .map(|o| rank_maps[o][id.as_str()] as i64 - own)
                .min()
                .unwrap();
            if best.is_none_or(|(_, b)| margin > b) {
                best = Some((m, margin));
            }
        }
        let (m, margin) = best.unwrap();
        per_model[m].push((margin, id.as_str()));
    }

    let mut sentences = Vec::new();
    let mut short = Vec::new();
    for (m, ranking) in rankings.iter().enumerate() {
        per_model[m].sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
        if per_model[m].len() < target {
            short.push(ranking.model_id.clone());
        }
        for &(margin, id) in per_model[m].iter().take(target) {
            sentences.push(SelectedSentence {
                sentence_id: id.to_string(),
                model_id: ranking.model_id.clone(),
                discriminativeness: margin,
                non_discriminative: margin <= 0,
            });
        }
    }
    let warning = if short.is_empty() {
        None
    } else {
        Some(format!(
            "fewer surviving sentences than requested ({target}) for models: {}",
            short.join(", ")
        ))
    };
    Ok(Selection {
        model_ids: rankings.iter().map(|r| r.model_id.clone()).collect(),
        sentences,
        warning,
    })
}

/// One word row of the stimulus table.
#[derive(Debug, Clone)]
pub struct StimulusWord {
    pub sentence_id: String,
    pub position: usize,
    pub token: String,
    /// Length in letters.
    pub length: usize,
    /// log10 per-million frequency per corpus; `None` when absent.
    pub wf: Vec<Option<f64>>,
    /// Word probability per model; `None` when undefined (empty context).
    pub wp: Vec<Option<f64>>,
}

/// Selected sentences with per-word predictor rows.
#[derive(Debug, Clone)]
pub struct StimulusSet {
    pub corpus_ids: Vec<String>,
    pub model_ids: Vec<String>,
    pub sentences: Vec<SelectedSentence>,
    pub words: Vec<StimulusWord>,
    pub warning: Option<String>,
}

impl StimulusSet {
    /// Word rows of one sentence, ordered by position.
    pub fn sentence_tokens(&self, sentence_id: &str) -> Vec<String> {
        let mut rows: Vec<&StimulusWord> = self
            .words
            .iter()
            .filter(|w| w.sentence_id == sentence_id)
            .collect();
        rows.sort_by_key(|w| w.position);
        rows.iter().map(|w| w.token.clone()).collect()
    }

    pub fn selected_for(&self, sentence_id: &str) -> Option<&str> {
        self.sentences
            .iter()
            .find(|s| s.sentence_id == sentence_id)
            .map(|s| s.model_id.as_str())
    }

    pub fn to_tsv(&self, comment: Option<&str>) -> String {
        let mut header: Vec<String> = ["sentence_id", "position", "token", "length"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for c in &self.corpus_ids {
            header.push(format!("wf_{c}"));
        }
        for m in &self.model_ids {
            header.push(format!("wp_{m}"));
        }
        header.push("selected_for".into());
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let mut w = TsvWriter::new(comment, &header_refs);
        // rows grouped by sentence then position
        let mut words: Vec<&StimulusWord> = self.words.iter().collect();
        words.sort_by(|a, b| a.sentence_id.cmp(&b.sentence_id).then(a.position.cmp(&b.position)));
        for word in words {
            let mut row = vec![
                word.sentence_id.clone(),
                word.position.to_string(),
                word.token.clone(),
                word.length.to_string(),
            ];
            row.extend(word.wf.iter().map(|v| fmt_opt(*v)));
            row.extend(word.wp.iter().map(|v| fmt_opt(*v)));
            row.push(self.selected_for(&word.sentence_id).unwrap_or("NA").to_string());
            w.row(&row);
        }
        w.finish()
    }

    pub fn read(path: &Path) -> Result<StimulusSet> {
        let file = TsvFile::read(path)?;
        let c_sid = file.col("sentence_id")?;
        let c_pos = file.col("position")?;
        let c_tok = file.col("token")?;
        let c_len = file.col("length")?;
        let c_sel = file.col("selected_for")?;
        let mut wf_cols = Vec::new();
        let mut wp_cols = Vec::new();
        for (i, name) in file.header.iter().enumerate() {
            if let Some(id) = name.strip_prefix("wf_") {
                wf_cols.push((i, id.to_string()));
            } else if let Some(id) = name.strip_prefix("wp_") {
                wp_cols.push((i, id.to_string()));
            }
        }
        let mut words = Vec::new();
        let mut selected: BTreeMap<String, String> = BTreeMap::new();
        for (line, fields) in &file.rows {
            let position: usize = fields[c_pos]
                .parse()
                .map_err(|_| file.err(*line, format!("invalid position `{}`", fields[c_pos])))?;
            let length: usize = fields[c_len]
                .parse()
                .map_err(|_| file.err(*line, format!("invalid length `{}`", fields[c_len])))?;
            let mut wf = Vec::with_capacity(wf_cols.len());
            for (i, _) in &wf_cols {
                wf.push(parse_opt(&fields[*i]).map_err(|m| file.err(*line, m))?);
            }
            let mut wp = Vec::with_capacity(wp_cols.len());
            for (i, _) in &wp_cols {
                wp.push(parse_opt(&fields[*i]).map_err(|m| file.err(*line, m))?);
            }
            if fields[c_sel] != "NA" {
                selected.insert(fields[c_sid].clone(), fields[c_sel].clone());
            }
            words.push(StimulusWord {
                sentence_id: fields[c_sid].clone(),
                position,
                token: fields[c_tok].clone(),
                length,
                wf,
                wp,
            });
        }
        Ok(StimulusSet {
            corpus_ids: wf_cols.into_iter().map(|(_, id)| id).collect(),
            model_ids: wp_cols.into_iter().map(|(_, id)| id).collect(),
            sentences: selected
                .into_iter()
                .map(|(sentence_id, model_id)| SelectedSentence {
                    sentence_id,
                    model_id,
                    discriminativeness: 0,
                    non_discriminative: false,
                })
                .collect(),
            words,
            warning: None,
        })
    }
}

/// Join a selection with scores and frequency tables into per-word
/// predictor rows.
pub fn build_stimulus_set(
    selection: &Selection,
    scores: &[ModelScores],
    freq_tables: &[(String, &FrequencyTable)],
    stem_rules: &[StemRule],
) -> Result<StimulusSet> {
    let mut words = Vec::new();
    for sel in &selection.sentences {
        let base = scores
            .first()
            .and_then(|m| m.scores.iter().find(|s| s.sentence_id == sel.sentence_id))
            .ok_or_else(|| {
                Error::InvalidConfig(format!("no score rows for sentence `{}`", sel.sentence_id))
            })?;
        for (pos, token) in base.tokens.iter().enumerate() {
            let wf = freq_tables
                .iter()
                .map(|(_, table)| table.lookup_word(token, stem_rules).map(|e| e.log10_pm))
                .collect();
            let mut wp = Vec::with_capacity(scores.len());
            for ms in scores {
                let s = ms
                    .scores
                    .iter()
                    .find(|s| s.sentence_id == sel.sentence_id)
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "sentence `{}` missing under model `{}`",
                            sel.sentence_id, ms.model_id
                        ))
                    })?;
                wp.push(s.word_probs[pos]);
            }
            words.push(StimulusWord {
                sentence_id: sel.sentence_id.clone(),
                position: pos,
                token: token.clone(),
                length: token.chars().count(),
                wf,
                wp,
            });
        }
    }
    Ok(StimulusSet {
        corpus_ids: freq_tables.iter().map(|(id, _)| id.clone()).collect(),
        model_ids: scores.iter().map(|m| m.model_id.clone()).collect(),
        sentences: selection.sentences.clone(),
        words,
        warning: selection.warning.clone(),
    })
}

/// A zero- or undefined-WP position with replacement candidates, best first.
#[derive(Debug, Clone)]
pub struct ZeroWpFlag {
    pub sentence_id: String,
    pub position: usize,
    pub token: String,
    pub candidates: Vec<(String, f64)>,
}

/// Report every position with WP zero or undefined under `model_id`,
/// with the `k` most probable vocabulary words in that context. No
/// automatic substitution: replacements need a human judgment call.
pub fn flag_zero_wp(
    stimuli: &StimulusSet,
    model_id: &str,
    model: &SkipGramModel,
    k: usize,
) -> Result<Vec<ZeroWpFlag>> {
    assert!(k >= 1);
    let m_idx = stimuli
        .model_ids
        .iter()
        .position(|m| m == model_id)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown model id `{model_id}`")))?;
    let mut flags = Vec::new();
    let mut sentence_ids: Vec<&str> = stimuli
        .words
        .iter()
        .map(|w| w.sentence_id.as_str())
        .collect();
    sentence_ids.sort_unstable();
    sentence_ids.dedup();
    for sid in sentence_ids {
        let tokens = stimuli.sentence_tokens(sid);
        for word in stimuli
            .words
            .iter()
            .filter(|w| w.sentence_id == sid)
        {
            let needs_flag = match word.wp[m_idx] {
                Some(p) => p == 0.0,
                None => true,
            };
            if !needs_flag {
                continue;
            }
            let candidates = match context_distribution(model, &tokens, word.position)? {
                None => Vec::new(),
                Some(dist) => {
                    let mut idx: Vec<usize> = (0..dist.len()).collect();
                    idx.sort_by(|&a, &b| {
                        dist[b].partial_cmp(&dist[a]).unwrap().then(a.cmp(&b))
                    });
                    idx.into_iter()
                        .take(k)
                        .map(|i| (model.vocab.word(i).to_string(), dist[i]))
                        .collect()
                }
            };
            flags.push(ZeroWpFlag {
                sentence_id: sid.to_string(),
                position: word.position,
                token: word.token.clone(),
                candidates,
            });
        }
    }
    Ok(flags)
}

#[derive(Debug, Clone)]
pub struct MulticollinearityReport {
    pub matrix: CorrelationMatrix,
    pub vif: Vec<(String, f64)>,
    /// Number of rows with every predictor present (VIF sample).
    pub n_complete: usize,
    /// True iff |r| between every pair of WP columns is below the threshold.
    pub pass: bool,
}

/// Pairwise correlations with p-values over all predictor columns, VIF per
/// predictor, and the WP-decorrelation gate.
pub fn verify_multicollinearity(
    stimuli: &StimulusSet,
    config: &SelectionConfig,
) -> Result<MulticollinearityReport> {
    let columns = predictor_columns(stimuli);
    if stimuli.words.len() < 3 {
        return Err(Error::TooFewRows {
            n: stimuli.words.len(),
            needed: 3,
            predictors: columns.len(),
        });
    }
    for (name, col) in &columns {
        let present: Vec<f64> = col.iter().flatten().copied().collect();
        if let Some(first) = present.first() {
            if present.iter().all(|v| v == first) {
                return Err(Error::ZeroVariance(name.clone()));
            }
        }
    }

    let matrix = correlation_table(&columns);

    // complete rows only for VIF
    let n_rows = stimuli.words.len();
    let complete: Vec<usize> = (0..n_rows)
        .filter(|&i| columns.iter().all(|(_, c)| c[i].is_some()))
        .collect();
    let dense: Vec<(String, Vec<f64>)> = columns
        .iter()
        .map(|(name, col)| {
            (
                name.clone(),
                complete.iter().map(|&i| col[i].unwrap()).collect(),
            )
        })
        .collect();
    let vif_values = vif(&dense)?;
    let vif_named: Vec<(String, f64)> = dense
        .iter()
        .map(|(n, _)| n.clone())
        .zip(vif_values)
        .collect();

    // gate: |r| between WP columns of different models
    let mut pass = true;
    let wp_idx: Vec<usize> = columns
        .iter()
        .enumerate()
        .filter(|(_, (n, _))| n.starts_with("wp_"))
        .map(|(i, _)| i)
        .collect();
    for (a, &i) in wp_idx.iter().enumerate() {
        for &j in &wp_idx[a + 1..] {
            match matrix.r[i][j] {
                Some(r) if r.abs() < config.corr_threshold => {}
                _ => pass = false,
            }
        }
    }
    Ok(MulticollinearityReport {
        matrix,
        vif: vif_named,
        n_complete: complete.len(),
        pass,
    })
}

/// Predictor columns of a stimulus table: length, one WF per corpus,
/// one WP per model.
pub fn predictor_columns(stimuli: &StimulusSet) -> Vec<(String, Vec<Option<f64>>)> {
    let mut columns = vec![(
        "length".to_string(),
        stimuli
            .words
            .iter()
            .map(|w| Some(w.length as f64))
            .collect::<Vec<_>>(),
    )];
    for (k, id) in stimuli.corpus_ids.iter().enumerate() {
        columns.push((
            format!("wf_{id}"),
            stimuli.words.iter().map(|w| w.wf[k]).collect(),
        ));
    }
    for (k, id) in stimuli.model_ids.iter().enumerate() {
        columns.push((
            format!("wp_{id}"),
            stimuli.words.iter().map(|w| w.wp[k]).collect(),
        ));
    }
    columns
}

/// |r| between the first two WP columns, over rows where both are present
/// and defined. Used by the simulator's decorrelation gate.
pub fn wp_pair_correlation(words: &[StimulusWord]) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for w in words {
        if let (Some(a), Some(b)) = (w.wp.first().copied().flatten(), w.wp.get(1).copied().flatten())
        {
            xs.push(a);
            ys.push(b);
        }
    }
    pearson(&xs, &ys).map(|(r, _)| r.abs())
}
