//! Contextual word probabilities (WP) and sentence perplexities (PP).
//!
//! WP is a full-vocabulary softmax of mean context-to-target scores: the
//! mean of the in-window context words' input vectors is dotted with every
//! output vector and normalized. This is the one place where the skip-gram
//! matrices are read out as a proper probability, which PP requires.

use std::path::Path;

use crate::embedding::SkipGramModel;
use crate::tsv::{fmt_f64, parse_opt, TsvFile, TsvWriter};
use crate::{Error, Result};

/// Per-word probabilities and perplexity of one sentence under one model.
/// `None` word probabilities mark undefined positions (empty context);
/// `f64::INFINITY` perplexity marks zero-probability or undefined words.
#[derive(Debug, Clone)]
pub struct SentenceScore {
    pub sentence_id: String,
    pub tokens: Vec<String>,
    pub word_probs: Vec<Option<f64>>,
    pub perplexity: f64,
}

impl SentenceScore {
    pub fn is_flagged(&self) -> bool {
        self.perplexity.is_infinite()
    }
}

/// Softmax probability of the token at position `t` given the in-vocabulary
/// tokens within the model window around it. OOV targets score 0;
/// an empty context is undefined (`None`).
pub fn word_probability(
    model: &SkipGramModel,
    sentence: &[String],
    t: usize,
) -> Result<Option<f64>> {
    let probs = context_distribution(model, sentence, t)?;
    match probs {
        None => Ok(None),
        Some(probs) => Ok(Some(match model.vocab.index_of(&sentence[t]) {
            Some(idx) => probs[idx],
            None => 0.0,
        })),
    }
}

/// Full softmax distribution over the vocabulary for position `t`, or
/// `None` when no in-vocabulary context word exists within the window.
pub fn context_distribution(
    model: &SkipGramModel,
    sentence: &[String],
    t: usize,
) -> Result<Option<Vec<f64>>> {
    if t >= sentence.len() {
        return Err(Error::PositionOutOfRange {
            position: t,
            len: sentence.len(),
        });
    }
    let window = model.window;
    let lo = t.saturating_sub(window);
    let hi = (t + window).min(sentence.len() - 1);
    let mut mean = vec![0.0f64; model.dim];
    let mut n_ctx = 0usize;
    for (c, word) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
        if c == t {
            continue;
        }
        if let Some(idx) = model.vocab.index_of(word) {
            for (m, v) in mean.iter_mut().zip(model.input_vector(idx)) {
                *m += v;
            }
            n_ctx += 1;
        }
    }
    if n_ctx == 0 {
        return Ok(None);
    }
    for m in mean.iter_mut() {
        *m /= n_ctx as f64;
    }

    let vocab_len = model.vocab.len();
    let mut scores = Vec::with_capacity(vocab_len);
    let mut max = f64::NEG_INFINITY;
    for w in 0..vocab_len {
        let s: f64 = mean
            .iter()
            .zip(model.output_vector(w))
            .map(|(a, b)| a * b)
            .sum();
        max = max.max(s);
        scores.push(s);
    }
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
    Ok(Some(scores))
}

/// PP = 2^(-(1/n) * sum_i log2 p_i). Any zero probability yields the
/// infinite sentinel.
pub fn sentence_perplexity(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::EmptyProbabilities);
    }
    for (i, &p) in probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability {
                position: i,
                value: p,
            });
        }
    }
    if probs.contains(&0.0) {
        return Ok(f64::INFINITY);
    }
    let mean_log2 = probs.iter().map(|p| p.log2()).sum::<f64>() / probs.len() as f64;
    Ok((-mean_log2).exp2())
}

/// Score one sentence under one model.
pub fn score_sentence(
    model: &SkipGramModel,
    sentence_id: impl Into<String>,
    tokens: &[String],
) -> Result<SentenceScore> {
    let mut word_probs = Vec::with_capacity(tokens.len());
    for t in 0..tokens.len() {
        word_probs.push(word_probability(model, tokens, t)?);
    }
    let perplexity = if tokens.is_empty() {
        return Err(Error::EmptyProbabilities);
    } else if word_probs.iter().any(|p| p.is_none() || p == &Some(0.0)) {
        f64::INFINITY
    } else {
        let defined: Vec<f64> = word_probs.iter().map(|p| p.unwrap()).collect();
        sentence_perplexity(&defined)?
    };
    Ok(SentenceScore {
        sentence_id: sentence_id.into(),
        tokens: tokens.to_vec(),
        word_probs,
        perplexity,
    })
}

/// All sentences of one model, in input order.
#[derive(Debug, Clone)]
pub struct ModelScores {
    pub model_id: String,
    pub scores: Vec<SentenceScore>,
    /// Sentences that could not be scored, with the stage error message.
    pub errors: Vec<(String, String)>,
}

/// One SentenceScore per (model, sentence). Per-sentence failures are
/// recorded as flagged rows; the batch never aborts.
pub fn score_corpus(
    models: &[(String, &SkipGramModel)],
    sentences: &[(String, Vec<String>)],
) -> Vec<ModelScores> {
    assert!(!models.is_empty() && !sentences.is_empty());
    models
        .iter()
        .map(|(model_id, model)| {
            let mut scores = Vec::with_capacity(sentences.len());
            let mut errors = Vec::new();
            for (id, tokens) in sentences {
                match score_sentence(model, id.clone(), tokens) {
                    Ok(s) => scores.push(s),
                    Err(e) => errors.push((id.clone(), e.to_string())),
                }
            }
            ModelScores {
                model_id: model_id.clone(),
                scores,
                errors,
            }
        })
        .collect()
}

/// One row per (sentence, model, position):
/// `sentence_id  model_id  position  token  wp  pp`.
pub fn scores_to_tsv(scores: &[ModelScores], comment: Option<&str>) -> String {
    let mut w = TsvWriter::new(
        comment,
        &["sentence_id", "model_id", "position", "token", "wp", "pp"],
    );
    for ms in scores {
        for s in &ms.scores {
            for (pos, token) in s.tokens.iter().enumerate() {
                w.row(&[
                    s.sentence_id.clone(),
                    ms.model_id.clone(),
                    pos.to_string(),
                    token.clone(),
                    match s.word_probs[pos] {
                        Some(p) => fmt_f64(p),
                        None => "NA".into(),
                    },
                    fmt_f64(s.perplexity),
                ]);
            }
        }
    }
    w.finish()
}

/// Read a score TSV back into per-model score lists.
pub fn scores_from_tsv(path: &Path) -> Result<Vec<ModelScores>> {
    let file = TsvFile::read(path)?;
    let c_sid = file.col("sentence_id")?;
    let c_mid = file.col("model_id")?;
    let c_pos = file.col("position")?;
    let c_tok = file.col("token")?;
    let c_wp = file.col("wp")?;
    let c_pp = file.col("pp")?;

    let mut models: Vec<ModelScores> = Vec::new();
    for (line, fields) in &file.rows {
        let model_id = &fields[c_mid];
        if models.last().map(|m| &m.model_id) != Some(model_id) {
            if let Some(existing) = models.iter_mut().find(|m| &m.model_id == model_id) {
                // rows of one model must be contiguous to preserve order
                let _ = existing;
                return Err(file.err(*line, format!("non-contiguous rows for model `{model_id}`")));
            }
            models.push(ModelScores {
                model_id: model_id.clone(),
                scores: Vec::new(),
                errors: Vec::new(),
            });
        }
        let current = models.last_mut().unwrap();
        let pos: usize = fields[c_pos]
            .parse()
            .map_err(|_| file.err(*line, format!("invalid position `{}`", fields[c_pos])))?;
        let sid = &fields[c_sid];
        if current.scores.last().map(|s| &s.sentence_id) != Some(sid) {
            current.scores.push(SentenceScore {
                sentence_id: sid.clone(),
                tokens: Vec::new(),
                word_probs: Vec::new(),
                perplexity: 1.0,
            });
        }
        let sent = current.scores.last_mut().unwrap();
        if pos != sent.tokens.len() {
            return Err(file.err(*line, format!("position {pos} out of order")));
        }
        sent.tokens.push(fields[c_tok].clone());
        sent.word_probs
            .push(parse_opt(&fields[c_wp]).map_err(|m| file.err(*line, m))?);
        sent.perplexity = parse_opt(&fields[c_pp])
            .map_err(|m| file.err(*line, m))?
            .ok_or_else(|| file.err(*line, "pp may not be NA"))?;
    }
    Ok(models)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::embedding::{build_vocab, train, SkipGramModel, TrainConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn words(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    fn model_from(counts: &[(&str, usize)], dim: usize, window: usize) -> SkipGramModel {
        let tokens: Vec<String> = counts
            .iter()
            .flat_map(|(w, c)| std::iter::repeat_n(w.to_string(), *c))
            .collect();
        let vocab = build_vocab(&Corpus::from_tokens(tokens), 1).unwrap();
        SkipGramModel::init(vocab, dim, window, 0)
    }

    fn randomize(model: &mut SkipGramModel, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..model.vocab.len() {
            for v in model.input_vector_mut(i) {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        for i in 0..model.vocab.len() {
            for v in model.output_vector_mut(i) {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
    }

    #[test]
    fn zero_matrices_give_uniform_softmax() {
        let mut m = model_from(&[("a", 3), ("b", 2), ("c", 1)], 4, 2);
        for i in 0..m.vocab.len() {
            for v in m.input_vector_mut(i) {
                *v = 0.0;
            }
        }
        let s = words(&["a", "b", "c"]);
        for t in 0..3 {
            let p = word_probability(&m, &s, t).unwrap().unwrap();
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oov_target_scores_zero() {
        let m = model_from(&[("a", 2), ("b", 2)], 4, 2);
        let s = words(&["a", "unbekannt", "b"]);
        assert_eq!(word_probability(&m, &s, 1).unwrap(), Some(0.0));
    }

    #[test]
    fn hand_computed_softmax() {
        // vocab {a,b}, dim 1, input(a)=input(b)=1, output(a)=1, output(b)=0
        let mut m = model_from(&[("a", 2), ("b", 1)], 1, 2);
        m.input_vector_mut(0)[0] = 1.0;
        m.input_vector_mut(1)[0] = 1.0;
        m.output_vector_mut(0)[0] = 1.0;
        m.output_vector_mut(1)[0] = 0.0;
        let s = words(&["a", "a"]);
        let p = word_probability(&m, &s, 1).unwrap().unwrap();
        let expected = 1.0f64.exp() / (1.0f64.exp() + 1.0);
        assert!((p - expected).abs() < 1e-12);
        assert!((p - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn empty_context_is_undefined() {
        let m = model_from(&[("a", 2), ("b", 2)], 4, 2);
        let s = words(&["a"]);
        assert_eq!(word_probability(&m, &s, 0).unwrap(), None);
        // all-OOV context is also undefined
        let s = words(&["x", "a", "y"]);
        assert_eq!(word_probability(&m, &s, 1).unwrap(), None);
    }

    #[test]
    fn position_out_of_range_is_an_error() {
        let m = model_from(&[("a", 2)], 4, 2);
        assert!(matches!(
            word_probability(&m, &words(&["a"]), 3),
            Err(Error::PositionOutOfRange { position: 3, len: 1 })
        ));
    }

    #[test]
    fn softmax_normalizes_over_vocabulary() {
        let tokens: Vec<String> = (0..20)
            .flat_map(|i| std::iter::repeat_n(format!("w{i}"), 20 - i))
            .collect();
        let vocab = build_vocab(&Corpus::from_tokens(tokens), 1).unwrap();
        let mut m = SkipGramModel::init(vocab, 6, 2, 0);
        randomize(&mut m, 8);
        let s = words(&["w3", "w1", "w5", "w2"]);
        let dist = context_distribution(&m, &s, 2).unwrap().unwrap();
        let total: f64 = dist.iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn oov_context_tokens_are_skipped_not_zero_padded() {
        let mut m = model_from(&[("a", 3), ("b", 2), ("c", 2)], 4, 2);
        randomize(&mut m, 5);
        let with_oov = words(&["a", "zzz", "b"]);
        let without = words(&["a", "b"]);
        // target b, context {a} in both cases
        let p1 = word_probability(&m, &with_oov, 2).unwrap().unwrap();
        let p2 = word_probability(&m, &without, 1).unwrap().unwrap();
        assert!((p1 - p2).abs() < 1e-12);
    }

    #[test]
    fn perplexity_reference_values() {
        assert!((sentence_perplexity(&[0.5, 0.5, 0.5]).unwrap() - 2.0).abs() < 1e-12);
        assert!((sentence_perplexity(&[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        let pp = sentence_perplexity(&[0.25, 0.5]).unwrap();
        assert!((pp - 2.0f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn perplexity_zero_is_infinite_empty_is_error() {
        assert!(sentence_perplexity(&[0.5, 0.0]).unwrap().is_infinite());
        assert!(matches!(
            sentence_perplexity(&[]),
            Err(Error::EmptyProbabilities)
        ));
        assert!(sentence_perplexity(&[0.5, 1.5]).is_err());
    }

    #[test]
    fn perplexity_monotone_and_permutation_invariant() {
        let base = [0.3, 0.6, 0.1, 0.9];
        let pp = sentence_perplexity(&base).unwrap();
        for i in 0..base.len() {
            let mut up = base;
            up[i] = (up[i] + 0.05).min(1.0);
            assert!(sentence_perplexity(&up).unwrap() <= pp + 1e-12);
        }
        let mut perm = base;
        perm.reverse();
        assert!((sentence_perplexity(&perm).unwrap() - pp).abs() < 1e-12);
        perm.swap(0, 2);
        assert!((sentence_perplexity(&perm).unwrap() - pp).abs() < 1e-12);
    }

    #[test]
    fn perplexity_at_least_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let probs: Vec<f64> = (0..rng.gen_range(1..8))
                .map(|_| rng.gen_range(0.001..1.0))
                .collect();
            assert!(sentence_perplexity(&probs).unwrap() >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn score_corpus_composition_and_cardinality() {
        let mut m1 = model_from(&[("a", 3), ("b", 2), ("c", 2)], 4, 2);
        let mut m2 = m1.clone();
        randomize(&mut m1, 1);
        randomize(&mut m2, 2);
        let sentences = vec![
            ("s1".to_string(), words(&["a", "b", "c"])),
            ("s2".to_string(), words(&["c", "a"])),
        ];
        let scored = score_corpus(
            &[("m1".into(), &m1), ("m2".into(), &m2), ("m3".into(), &m1)],
            &sentences,
        );
        assert_eq!(scored.len(), 3);
        assert_eq!(scored.iter().map(|m| m.scores.len()).sum::<usize>(), 6);
        let s = &scored[0].scores[0];
        let defined: Vec<f64> = s.word_probs.iter().map(|p| p.unwrap()).collect();
        let pp = sentence_perplexity(&defined).unwrap();
        assert!((s.perplexity - pp).abs() < 1e-12);
    }

    #[test]
    fn oov_sentence_is_flagged_infinite() {
        let m = model_from(&[("a", 3), ("b", 2)], 4, 2);
        let scored = score_corpus(
            &[("m".into(), &m)],
            &[("s1".to_string(), words(&["a", "xyz", "b"]))],
        );
        let s = &scored[0].scores[0];
        assert!(s.perplexity.is_infinite());
        assert!(s.is_flagged());
    }

    #[test]
    fn trained_model_prefers_the_alternating_partner() {
        // corpus "a b a b ..." in short sentences; given context {a, a},
        // the argmax of the context distribution is b
        let sentences: Vec<Vec<String>> = (0..100)
            .map(|_| words(&["a", "b", "a", "b", "a", "b"]))
            .collect();
        let corpus = Corpus::from_sentences(sentences);
        let cfg = TrainConfig {
            min_count: 1,
            dim: 8,
            epochs: 10,
            seed: 11,
            ..TrainConfig::default()
        };
        let m = train(&corpus, &cfg).unwrap();
        let probe = words(&["a", "b", "a"]);
        let dist = context_distribution(&m, &probe, 1).unwrap().unwrap();
        let b = m.vocab.index_of("b").unwrap();
        let a = m.vocab.index_of("a").unwrap();
        assert!(dist[b] > dist[a], "p(b)={} p(a)={}", dist[b], dist[a]);
    }

    #[test]
    fn score_tsv_round_trip() {
        let mut m = model_from(&[("a", 3), ("b", 2), ("c", 2)], 4, 2);
        randomize(&mut m, 3);
        let sentences = vec![
            ("s1".to_string(), words(&["a", "b", "c"])),
            ("s2".to_string(), words(&["c", "zzz", "a"])),
        ];
        let scored = score_corpus(&[("m".into(), &m)], &sentences);
        let tsv = scores_to_tsv(&scored, Some("test"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.tsv");
        std::fs::write(&path, &tsv).unwrap();
        let loaded = scores_from_tsv(&path).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].scores.len(), 2);
        for (a, b) in loaded[0].scores.iter().zip(&scored[0].scores) {
            assert_eq!(a.sentence_id, b.sentence_id);
            assert_eq!(a.word_probs, b.word_probs);
            assert_eq!(a.perplexity, b.perplexity);
        }
    }
}
