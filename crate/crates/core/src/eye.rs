//! Viewing measures (first-fixation duration, gaze duration, total viewing
//! duration) from fixation sequences, plus the exclusion pipeline that joins
//! measures with the stimulus predictors.

use std::collections::HashMap;
use std::path::Path;

use crate::selection::StimulusSet;
use crate::stats::DesignMatrix;
use crate::tsv::{fmt_f64, fmt_opt, parse_f64, parse_opt, TsvFile, TsvWriter};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixation {
    pub word_index: usize,
    pub duration_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub trial_id: String,
    pub sentence_id: String,
    pub fixations: Vec<Fixation>,
}

/// Horizontal word extents of one displayed sentence. Word `i` owns the
/// half-open interval `[start[i], end[i])`; gaps between words and x values
/// off the line map to no word.
#[derive(Debug, Clone)]
pub struct SentenceLayout {
    /// (start_px, end_px) per word, ordered left to right, non-overlapping.
    pub intervals: Vec<(f64, f64)>,
}

impl SentenceLayout {
    /// Lay words out left to right, `char_width` pixels per letter with a
    /// `gap` between words that belongs to neither.
    pub fn from_word_lengths(lengths: &[usize], char_width: f64, gap: f64) -> SentenceLayout {
        let mut intervals = Vec::with_capacity(lengths.len());
        let mut x = 0.0;
        for &len in lengths {
            let end = x + len as f64 * char_width;
            intervals.push((x, end));
            x = end + gap;
        }
        SentenceLayout { intervals }
    }

    pub fn word_at(&self, x: f64) -> Option<usize> {
        self.intervals
            .iter()
            .position(|&(start, end)| x >= start && x < end)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WordMeasures {
    /// Duration of the first fixation of the first run on the word.
    pub ffd: Option<f64>,
    /// Summed duration of the first run on the word.
    pub gd: Option<f64>,
    /// Summed duration of every fixation on the word.
    pub tvd: Option<f64>,
}

/// Per-word measures from a fixation sequence. A run is a maximal block of
/// consecutive fixations on the same word; the first run on a word supplies
/// FFD and GD, all fixations on it supply TVD. With `rightward_only`, FFD
/// and GD are only defined when no word to the right was fixated before the
/// first run began; TVD stays defined either way. Words never fixated get
/// all-absent measures.
pub fn compute_measures(
    fixations: &[Fixation],
    n_words: usize,
    rightward_only: bool,
) -> Result<Vec<WordMeasures>> {
    for f in fixations {
        if f.word_index >= n_words {
            return Err(Error::PositionOutOfRange {
                position: f.word_index,
                len: n_words,
            });
        }
    }
    let mut out = vec![WordMeasures::default(); n_words];
    let mut max_seen: Option<usize> = None;
    let mut i = 0;
    while i < fixations.len() {
        let w = fixations[i].word_index;
        let mut j = i;
        let mut run_total = 0.0;
        while j < fixations.len() && fixations[j].word_index == w {
            run_total += fixations[j].duration_ms;
            j += 1;
        }
        let first_visit = out[w].tvd.is_none();
        let m = &mut out[w];
        if first_visit {
            let first_pass = !rightward_only || max_seen.is_none_or(|seen| seen <= w);
            if first_pass {
                m.ffd = Some(fixations[i].duration_ms);
                m.gd = Some(run_total);
            }
        }
        *m.tvd.get_or_insert(0.0) += run_total;
        max_seen = Some(max_seen.map_or(w, |s| s.max(w)));
        i = j;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ExclusionConfig {
    /// Fixations shorter than this are dropped before runs are built.
    pub min_fixation_ms: f64,
    /// Cells above these caps are blanked; a row is only excluded outright
    /// when every measure is blank.
    pub max_ffd_ms: f64,
    pub max_gd_ms: f64,
    pub max_tvd_ms: f64,
    pub drop_first_last_word: bool,
    pub drop_zero_wp_or_wf: bool,
    pub first_pass_rightward_only: bool,
}

impl Default for ExclusionConfig {
    fn default() -> Self {
        ExclusionConfig {
            min_fixation_ms: 70.0,
            max_ffd_ms: 800.0,
            max_gd_ms: 1000.0,
            max_tvd_ms: 1500.0,
            drop_first_last_word: true,
            drop_zero_wp_or_wf: true,
            first_pass_rightward_only: false,
        }
    }
}

/// Primary reason a word-trial row was excluded, in the fixed priority
/// order used when several apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExcludeReason {
    /// Every fixation on the word fell under the duration floor.
    ShortFixation,
    /// First or last word of the sentence.
    EdgeWord,
    /// A word probability of zero/undefined, or a missing word frequency.
    ZeroWpWf,
    /// Every surviving measure exceeded its duration cap.
    Outlier,
}

impl ExcludeReason {
    pub fn code(self) -> &'static str {
        match self {
            ExcludeReason::ShortFixation => "short_fixation",
            ExcludeReason::EdgeWord => "edge_word",
            ExcludeReason::ZeroWpWf => "zero_wp_wf",
            ExcludeReason::Outlier => "outlier",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeasureRow {
    pub trial_id: String,
    pub sentence_id: String,
    pub position: usize,
    pub token: String,
    pub length: usize,
    pub wf: Vec<Option<f64>>,
    pub wp: Vec<Option<f64>>,
    pub measures: WordMeasures,
    pub excluded: Option<ExcludeReason>,
}

#[derive(Debug, Clone, Default)]
pub struct ExclusionCounts {
    /// Individual fixations under the duration floor.
    pub short_fixations: usize,
    /// Measure cells blanked by a duration cap.
    pub outlier_cells: usize,
    /// Excluded word-trial rows per reason code.
    pub rows: Vec<(&'static str, usize)>,
}

#[derive(Debug, Clone)]
pub struct MeasuresTable {
    pub corpus_ids: Vec<String>,
    pub model_ids: Vec<String>,
    /// One row per fixated (trial, word) pair, ordered by trial then word
    /// position. Excluded rows stay in the table with their reason code.
    pub rows: Vec<MeasureRow>,
    pub exclusions: ExclusionCounts,
}

/// Join trials against the stimulus table and apply the exclusion pipeline.
/// Sub-threshold fixations are removed before run construction; word rows
/// are then checked in fixed order: all-fixations-short, edge word, zero or
/// missing predictor, duration caps. Caps blank only the offending cell —
/// the row is excluded only when nothing survives. Words never fixated at
/// all produce no row.
pub fn apply_exclusions(
    trials: &[Trial],
    stimuli: &StimulusSet,
    config: &ExclusionConfig,
) -> Result<MeasuresTable> {
    let mut counts = ExclusionCounts::default();
    let mut reason_counts: HashMap<&'static str, usize> = HashMap::new();
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for trial in trials {
        let words: Vec<_> = stimuli
            .words
            .iter()
            .filter(|w| w.sentence_id == trial.sentence_id)
            .collect();
        if words.is_empty() {
            missing.push(trial.sentence_id.clone());
            continue;
        }
        let n_words = words.len();
        for f in &trial.fixations {
            if f.word_index >= n_words {
                return Err(Error::PositionOutOfRange {
                    position: f.word_index,
                    len: n_words,
                });
            }
        }
        let kept: Vec<Fixation> = trial
            .fixations
            .iter()
            .copied()
            .filter(|f| f.duration_ms >= config.min_fixation_ms)
            .collect();
        counts.short_fixations += trial.fixations.len() - kept.len();
        let measures = compute_measures(&kept, n_words, config.first_pass_rightward_only)?;

        for (pos, word) in words.iter().enumerate() {
            let fixated_raw = trial.fixations.iter().any(|f| f.word_index == pos);
            if !fixated_raw {
                continue;
            }
            let mut m = measures[pos];
            let mut excluded = None;
            if m.tvd.is_none() {
                excluded = Some(ExcludeReason::ShortFixation);
            } else if config.drop_first_last_word && (pos == 0 || pos == n_words - 1) {
                m = WordMeasures::default();
                excluded = Some(ExcludeReason::EdgeWord);
            } else if config.drop_zero_wp_or_wf
                && (word.wp.iter().any(|p| matches!(p, None | Some(0.0)))
                    || word.wf.iter().any(|f| f.is_none()))
            {
                m = WordMeasures::default();
                excluded = Some(ExcludeReason::ZeroWpWf);
            } else {
                if m.ffd.is_some_and(|v| v > config.max_ffd_ms) {
                    m.ffd = None;
                    counts.outlier_cells += 1;
                }
                if m.gd.is_some_and(|v| v > config.max_gd_ms) {
                    m.gd = None;
                    counts.outlier_cells += 1;
                }
                if m.tvd.is_some_and(|v| v > config.max_tvd_ms) {
                    m.tvd = None;
                    counts.outlier_cells += 1;
                }
                if m.ffd.is_none() && m.gd.is_none() && m.tvd.is_none() {
                    excluded = Some(ExcludeReason::Outlier);
                }
            }
            if let Some(reason) = excluded {
                *reason_counts.entry(reason.code()).or_insert(0) += 1;
            }
            rows.push(MeasureRow {
                trial_id: trial.trial_id.clone(),
                sentence_id: trial.sentence_id.clone(),
                position: pos,
                token: word.token.clone(),
                length: word.length,
                wf: word.wf.clone(),
                wp: word.wp.clone(),
                measures: m,
                excluded,
            });
        }
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::JoinMismatch(missing));
    }
    rows.sort_by(|a, b| a.trial_id.cmp(&b.trial_id).then(a.position.cmp(&b.position)));
    let mut reasons: Vec<(&'static str, usize)> = reason_counts.into_iter().collect();
    reasons.sort();
    counts.rows = reasons;
    Ok(MeasuresTable {
        corpus_ids: stimuli.corpus_ids.clone(),
        model_ids: stimuli.model_ids.clone(),
        rows,
        exclusions: counts,
    })
}

impl MeasuresTable {
    pub fn included_rows(&self) -> impl Iterator<Item = &MeasureRow> {
        self.rows.iter().filter(|r| r.excluded.is_none())
    }

    /// Measures table with exclusion flags:
    /// `trial_id sentence_id word_index ffd gd tvd excluded reason`.
    pub fn measures_tsv(&self, comment: Option<&str>) -> String {
        let mut w = TsvWriter::new(
            comment,
            &["trial_id", "sentence_id", "word_index", "ffd", "gd", "tvd", "excluded", "reason"],
        );
        for row in &self.rows {
            w.row(&[
                row.trial_id.clone(),
                row.sentence_id.clone(),
                row.position.to_string(),
                fmt_opt(row.measures.ffd),
                fmt_opt(row.measures.gd),
                fmt_opt(row.measures.tvd),
                if row.excluded.is_some() { "yes" } else { "no" }.to_string(),
                row.excluded.map_or("NA", |r| r.code()).to_string(),
            ]);
        }
        w.finish()
    }

    /// Analysis table for regression: included rows joined with their
    /// predictors.
    pub fn analysis_tsv(&self, comment: Option<&str>) -> String {
        let mut header: Vec<String> = ["trial_id", "sentence_id", "position", "token", "length"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for c in &self.corpus_ids {
            header.push(format!("wf_{c}"));
        }
        for m in &self.model_ids {
            header.push(format!("wp_{m}"));
        }
        header.extend(["ffd", "gd", "tvd"].iter().map(|s| s.to_string()));
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let mut w = TsvWriter::new(comment, &header_refs);
        for row in self.included_rows() {
            let mut fields = vec![
                row.trial_id.clone(),
                row.sentence_id.clone(),
                row.position.to_string(),
                row.token.clone(),
                row.length.to_string(),
            ];
            fields.extend(row.wf.iter().map(|v| fmt_opt(*v)));
            fields.extend(row.wp.iter().map(|v| fmt_opt(*v)));
            fields.push(fmt_opt(row.measures.ffd));
            fields.push(fmt_opt(row.measures.gd));
            fields.push(fmt_opt(row.measures.tvd));
            w.row(&fields);
        }
        w.finish()
    }

    /// Read an analysis table written by `analysis_tsv`.
    pub fn read(path: &Path) -> Result<MeasuresTable> {
        let file = TsvFile::read(path)?;
        let c_tid = file.col("trial_id")?;
        let c_sid = file.col("sentence_id")?;
        let c_pos = file.col("position")?;
        let c_tok = file.col("token")?;
        let c_len = file.col("length")?;
        let c_ffd = file.col("ffd")?;
        let c_gd = file.col("gd")?;
        let c_tvd = file.col("tvd")?;
        let mut wf_cols = Vec::new();
        let mut wp_cols = Vec::new();
        for (i, name) in file.header.iter().enumerate() {
            if let Some(id) = name.strip_prefix("wf_") {
                wf_cols.push((i, id.to_string()));
            } else if let Some(id) = name.strip_prefix("wp_") {
                wp_cols.push((i, id.to_string()));
            }
        }
        let mut rows = Vec::new();
        for (line, fields) in &file.rows {
            let position: usize = fields[c_pos]
                .parse()
                .map_err(|_| file.err(*line, format!("invalid position `{}`", fields[c_pos])))?;
            let length: usize = fields[c_len]
                .parse()
                .map_err(|_| file.err(*line, format!("invalid length `{}`", fields[c_len])))?;
            let mut wf = Vec::new();
            for (i, _) in &wf_cols {
                wf.push(parse_opt(&fields[*i]).map_err(|m| file.err(*line, m))?);
            }
            let mut wp = Vec::new();
            for (i, _) in &wp_cols {
                wp.push(parse_opt(&fields[*i]).map_err(|m| file.err(*line, m))?);
            }
            let opt = |i: usize| parse_opt(&fields[i]).map_err(|m| file.err(*line, m));
            rows.push(MeasureRow {
                trial_id: fields[c_tid].clone(),
                sentence_id: fields[c_sid].clone(),
                position,
                token: fields[c_tok].clone(),
                length,
                wf,
                wp,
                measures: WordMeasures {
                    ffd: opt(c_ffd)?,
                    gd: opt(c_gd)?,
                    tvd: opt(c_tvd)?,
                },
                excluded: None,
            });
        }
        Ok(MeasuresTable {
            corpus_ids: wf_cols.into_iter().map(|(_, id)| id).collect(),
            model_ids: wp_cols.into_iter().map(|(_, id)| id).collect(),
            rows,
            exclusions: ExclusionCounts::default(),
        })
    }

    /// Regression design for one measure over included rows where that
    /// measure and every predictor are present.
    pub fn design(&self, measure: &str) -> Result<DesignMatrix> {
        if !matches!(measure, "ffd" | "gd" | "tvd") {
            return Err(Error::InvalidConfig(format!(
                "unknown measure `{measure}` (expected ffd, gd or tvd)"
            )));
        }
        let pick = |m: &WordMeasures| match measure {
            "ffd" => m.ffd,
            "gd" => m.gd,
            _ => m.tvd,
        };
        let mut names = vec!["length".to_string()];
        names.extend(self.corpus_ids.iter().map(|c| format!("wf_{c}")));
        names.extend(self.model_ids.iter().map(|m| format!("wp_{m}")));
        let mut y = Vec::new();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for row in self.included_rows() {
            let Some(value) = pick(&row.measures) else {
                continue;
            };
            if row.wf.iter().any(|v| v.is_none()) || row.wp.iter().any(|v| v.is_none()) {
                continue;
            }
            let mut it = columns.iter_mut();
            it.next().unwrap().push(row.length as f64);
            for (col, v) in it.zip(row.wf.iter().chain(&row.wp)) {
                col.push(v.unwrap());
            }
            y.push(value);
        }
        DesignMatrix::new(names, columns, measure, y)
    }
}

/// Read a fixation table: `trial_id sentence_id seq word_index duration_ms`,
/// or with an `x` column instead of `word_index` when `layouts` supplies the
/// word extents per sentence (off-word samples are dropped). Rows are grouped
/// into trials by trial id, ordered by `seq` within each.
pub fn read_fixations(
    path: &Path,
    layouts: Option<&HashMap<String, SentenceLayout>>,
) -> Result<Vec<Trial>> {
    let file = TsvFile::read(path)?;
    let c_tid = file.col("trial_id")?;
    let c_sid = file.col("sentence_id")?;
    let c_seq = file.col("seq")?;
    let c_dur = file.col("duration_ms")?;
    let by_x = file.col("word_index").is_err();
    let c_word = if by_x {
        file.col("x")?
    } else {
        file.col("word_index")?
    };
    let mut trials: Vec<Trial> = Vec::new();
    let mut order: HashMap<String, usize> = HashMap::new();
    let mut seqs: Vec<Vec<(u64, Fixation)>> = Vec::new();
    for (line, fields) in &file.rows {
        let seq: u64 = fields[c_seq]
            .parse()
            .map_err(|_| file.err(*line, format!("invalid seq `{}`", fields[c_seq])))?;
        let duration_ms = parse_f64(&fields[c_dur])
            .filter(|d| d.is_finite() && *d > 0.0)
            .ok_or_else(|| file.err(*line, format!("invalid duration `{}`", fields[c_dur])))?;
        let word_index = if by_x {
            let x = parse_f64(&fields[c_word])
                .ok_or_else(|| file.err(*line, format!("invalid x `{}`", fields[c_word])))?;
            let layout = layouts
                .and_then(|m| m.get(&fields[c_sid]))
                .ok_or_else(|| {
                    file.err(*line, format!("no layout for sentence `{}`", fields[c_sid]))
                })?;
            match layout.word_at(x) {
                Some(w) => w,
                None => continue,
            }
        } else {
            fields[c_word].parse().map_err(|_| {
                file.err(*line, format!("invalid word_index `{}`", fields[c_word]))
            })?
        };
        let key = &fields[c_tid];
        let idx = match order.get(key) {
            Some(&i) => {
                if trials[i].sentence_id != fields[c_sid] {
                    return Err(file.err(
                        *line,
                        format!("trial `{key}` spans more than one sentence"),
                    ));
                }
                i
            }
            None => {
                order.insert(key.clone(), trials.len());
                trials.push(Trial {
                    trial_id: key.clone(),
                    sentence_id: fields[c_sid].clone(),
                    fixations: Vec::new(),
                });
                seqs.push(Vec::new());
                trials.len() - 1
            }
        };
        seqs[idx].push((seq, Fixation { word_index, duration_ms }));
    }
    for (trial, mut seq) in trials.iter_mut().zip(seqs) {
        seq.sort_by_key(|(s, _)| *s);
        trial.fixations = seq.into_iter().map(|(_, f)| f).collect();
    }
    Ok(trials)
}

pub fn fixations_to_tsv(trials: &[Trial], comment: Option<&str>) -> String {
    let mut w = TsvWriter::new(
        comment,
        &["trial_id", "sentence_id", "seq", "word_index", "duration_ms"],
    );
    for trial in trials {
        for (seq, f) in trial.fixations.iter().enumerate() {
            w.row(&[
                trial.trial_id.clone(),
                trial.sentence_id.clone(),
                seq.to_string(),
                f.word_index.to_string(),
                fmt_f64(f.duration_ms),
            ]);
        }
    }
    w.finish()
}
