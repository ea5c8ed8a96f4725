//! Skip-gram word embeddings trained with negative sampling.

use std::cell::UnsafeCell;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::{Error, Result};

const MODEL_MAGIC: &[u8; 8] = b"RLMMODEL";
const MODEL_VERSION: u32 = 1;

/// Min-count-filtered vocabulary with dense indices ordered by
/// descending count, lexicographic ties.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    min_count: u64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Count words and keep those with count >= min_count.
pub fn build_vocab(corpus: &Corpus, min_count: u64) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for t in corpus.tokens() {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let words: Vec<String> = kept.iter().map(|(w, _)| w.to_string()).collect();
    let counts: Vec<u64> = kept.iter().map(|&(_, c)| c).collect();
    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    Ok(Vocabulary {
        words,
        counts,
        index,
        min_count,
    })
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Vocabulary threshold: 3 for individual corpora, 5 for the norm corpus.
    pub min_count: u64,
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    /// Floor of the linear learning-rate decay.
    pub min_learning_rate: f64,
    /// Optional subsampling threshold for frequent words (off by default).
    pub subsample: Option<f64>,
    pub seed: u64,
    /// 1 = deterministic single worker; >1 = hogwild threads, loss decrease
    /// guaranteed, reproducibility not.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            min_count: 3,
            dim: 100,
            window: 2,
            epochs: 10,
            negatives: 5,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            subsample: None,
            seed: 1,
            workers: 1,
        }
    }
}

/// Input and output embedding matrices over a vocabulary, row-major.
#[derive(Debug, Clone)]
pub struct SkipGramModel {
    pub vocab: Vocabulary,
    pub dim: usize,
    pub window: usize,
    input: Vec<f64>,
    output: Vec<f64>,
}

impl SkipGramModel {
    /// Input vectors uniform in [-0.5/dim, 0.5/dim], output vectors zero.
    pub fn init(vocab: Vocabulary, dim: usize, window: usize, seed: u64) -> SkipGramModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / dim as f64;
        let input = (0..vocab.len() * dim)
            .map(|_| rng.gen_range(-half..half))
            .collect();
        let output = vec![0.0; vocab.len() * dim];
        SkipGramModel {
            vocab,
            dim,
            window,
            input,
            output,
        }
    }

    pub fn input_vector(&self, i: usize) -> &[f64] {
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output_vector(&self, i: usize) -> &[f64] {
        &self.output[i * self.dim..(i + 1) * self.dim]
    }

    pub fn input_vector_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output_vector_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.output[i * self.dim..(i + 1) * self.dim]
    }

    pub fn matrices(&self) -> (&[f64], &[f64]) {
        (&self.input, &self.output)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Negative-sampling loss of one (center, context) pair:
/// L = -log sigma(u_ctx . v_c) - sum_n log sigma(-u_n . v_c).
pub fn pair_loss(model: &SkipGramModel, center: usize, context: usize, negatives: &[usize]) -> f64 {
    let v = model.input_vector(center);
    let mut loss = -sigmoid(dot(model.output_vector(context), v)).ln();
    for &n in negatives {
        loss -= sigmoid(-dot(model.output_vector(n), v)).ln();
    }
    loss
}

/// One SGD step on the pair loss. The full gradient is evaluated at the
/// current parameters before any update is applied. Returns the loss
/// at the pre-update parameters.
pub fn sgd_step(
    model: &mut SkipGramModel,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
) -> f64 {
    let dim = model.dim;
    let (input, output) = (&mut model.input, &mut model.output);
    train_pair(input, output, dim, center, context, negatives, lr)
}

fn train_pair(
    input: &mut [f64],
    output: &mut [f64],
    dim: usize,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
) -> f64 {
    let vs = center * dim;
    let mut grad_v = vec![0.0; dim];
    let mut loss = 0.0;

    let us = context * dim;
    let s = (0..dim).map(|k| input[vs + k] * output[us + k]).sum::<f64>();
    let sig = sigmoid(s);
    loss -= sig.ln();
    let g = sig - 1.0; // d loss / d s for the positive pair
    for k in 0..dim {
        grad_v[k] += g * output[us + k];
    }
    // update u_ctx with the pre-update v
    for k in 0..dim {
        output[us + k] -= lr * g * input[vs + k];
    }

    for &n in negatives {
        let ns = n * dim;
        let s = (0..dim).map(|k| input[vs + k] * output[ns + k]).sum::<f64>();
        let sig = sigmoid(s);
        loss -= sigmoid(-s).ln();
        // uses the pre-update u_n; callers resample negatives that
        // collide with the context word, so the updated row is not read
        let g = sig;
        for k in 0..dim {
            grad_v[k] += g * output[ns + k];
        }
        for k in 0..dim {
            output[ns + k] -= lr * g * input[vs + k];
        }
    }

    for k in 0..dim {
        input[vs + k] -= lr * grad_v[k];
    }
    loss
}

/// Cumulative sampling table over unigram counts raised to 3/4.
pub struct NoiseTable {
    cumulative: Vec<f64>,
    total: f64,
}

impl NoiseTable {
    pub fn new(vocab: &Vocabulary) -> NoiseTable {
        let mut cumulative = Vec::with_capacity(vocab.len());
        let mut total = 0.0;
        for i in 0..vocab.len() {
            total += (vocab.count(i) as f64).powf(0.75);
            cumulative.push(total);
        }
        NoiseTable { cumulative, total }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let r = rng.gen_range(0.0..self.total);
        self.cumulative.partition_point(|&c| c <= r)
    }

    /// Theoretical probability of word `i`.
    pub fn probability(&self, i: usize) -> f64 {
        let prev = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - prev) / self.total
    }
}

/// In-vocabulary index sequence of one sentence; OOV tokens are dropped
/// before windows are formed.
fn sentence_indices(vocab: &Vocabulary, sentence: &[String]) -> Vec<usize> {
    sentence
        .iter()
        .filter_map(|t| vocab.index_of(t))
        .collect()
}

/// All (center, context) pairs of a sentence for a symmetric window,
/// truncated at the sentence boundaries.
pub fn window_pairs(indices: &[usize], window: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for t in 0..indices.len() {
        let lo = t.saturating_sub(window);
        let hi = (t + window).min(indices.len().saturating_sub(1));
        for c in lo..=hi {
            if c != t {
                pairs.push((indices[t], indices[c]));
            }
        }
    }
    pairs
}

pub struct TrainStats {
    /// Mean per-pair loss per epoch (single-worker mode only).
    pub epoch_mean_loss: Vec<f64>,
    pub total_pairs: u64,
}

pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<SkipGramModel> {
    train_with_stats(corpus, config).map(|(m, _)| m)
}

pub fn train_with_stats(corpus: &Corpus, config: &TrainConfig) -> Result<(SkipGramModel, TrainStats)> {
    let vocab = build_vocab(corpus, config.min_count)?;
    train_on_vocab(corpus, vocab, config)
}

fn train_on_vocab(
    corpus: &Corpus,
    vocab: Vocabulary,
    config: &TrainConfig,
) -> Result<(SkipGramModel, TrainStats)> {
    let mut model = SkipGramModel::init(vocab, config.dim, config.window, config.seed);
    let noise = NoiseTable::new(&model.vocab);

    let sentences: Vec<Vec<usize>> = corpus
        .sentences()
        .iter()
        .map(|s| sentence_indices(&model.vocab, s))
        .filter(|s| s.len() > 1)
        .collect();
    let pairs_per_epoch: u64 = sentences
        .iter()
        .map(|s| window_pairs(s, config.window).len() as u64)
        .sum();
    let total_pairs = pairs_per_epoch * config.epochs as u64;
    if total_pairs == 0 {
        return Err(Error::EmptyCorpus);
    }

    let stats = if config.workers <= 1 {
        train_single_worker(&mut model, &sentences, &noise, config, total_pairs)
    } else {
        train_hogwild(&mut model, &sentences, &noise, config, total_pairs);
        TrainStats {
            epoch_mean_loss: Vec::new(),
            total_pairs,
        }
    };
    Ok((model, stats))
}

fn learning_rate(config: &TrainConfig, processed: u64, total: u64) -> f64 {
    let frac = processed as f64 / total as f64;
    (config.learning_rate * (1.0 - frac)).max(config.min_learning_rate)
}

fn train_single_worker(
    model: &mut SkipGramModel,
    sentences: &[Vec<usize>],
    noise: &NoiseTable,
    config: &TrainConfig,
    total_pairs: u64,
) -> TrainStats {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut processed = 0u64;
    let mut epoch_mean_loss = Vec::with_capacity(config.epochs);
    let dim = model.dim;
    for _epoch in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut loss_n = 0u64;
        for sent in sentences {
            let sent = subsampled(sent, model, config, &mut rng);
            for t in 0..sent.len() {
                let lo = t.saturating_sub(config.window);
                let hi = (t + config.window).min(sent.len() - 1);
                for c in lo..=hi {
                    if c == t {
                        continue;
                    }
                    let lr = learning_rate(config, processed, total_pairs);
                    let negatives =
                        sample_negatives(noise, &mut rng, config.negatives, sent[c], model.vocab.len());
                    let loss = train_pair(
                        &mut model.input,
                        &mut model.output,
                        dim,
                        sent[t],
                        sent[c],
                        &negatives,
                        lr,
                    );
                    loss_sum += loss;
                    loss_n += 1;
                    processed += 1;
                }
            }
        }
        epoch_mean_loss.push(if loss_n > 0 { loss_sum / loss_n as f64 } else { 0.0 });
    }
    TrainStats {
        epoch_mean_loss,
        total_pairs,
    }
}

fn subsampled(
    sent: &[usize],
    model: &SkipGramModel,
    config: &TrainConfig,
    rng: &mut impl Rng,
) -> Vec<usize> {
    match config.subsample {
        None => sent.to_vec(),
        Some(t) => {
            let total: u64 = (0..model.vocab.len()).map(|i| model.vocab.count(i)).sum();
            sent.iter()
                .copied()
                .filter(|&i| {
                    let f = model.vocab.count(i) as f64 / total as f64;
                    let p_keep = (t / f).sqrt().min(1.0);
                    rng.gen_bool(p_keep)
                })
                .collect()
        }
    }
}

fn sample_negatives(
    noise: &NoiseTable,
    rng: &mut impl Rng,
    k: usize,
    context: usize,
    vocab_len: usize,
) -> Vec<usize> {
    let mut negatives = Vec::with_capacity(k);
    for _ in 0..k {
        let mut n = noise.sample(rng);
        if vocab_len > 1 {
            let mut tries = 0;
            while n == context && tries < 32 {
                n = noise.sample(rng);
                tries += 1;
            }
        }
        if n != context || vocab_len == 1 {
            negatives.push(n);
        }
    }
    negatives
}

struct SharedParams {
    input: UnsafeCell<Vec<f64>>,
    output: UnsafeCell<Vec<f64>>,
}

// Hogwild: workers update the matrices without synchronization; lost or
// torn updates are tolerated, the contract is eventual loss decrease.
unsafe impl Sync for SharedParams {}

fn train_hogwild(
    model: &mut SkipGramModel,
    sentences: &[Vec<usize>],
    noise: &NoiseTable,
    config: &TrainConfig,
    total_pairs: u64,
) {
    let dim = model.dim;
    let vocab_len = model.vocab.len();
    let shared = SharedParams {
        input: UnsafeCell::new(std::mem::take(&mut model.input)),
        output: UnsafeCell::new(std::mem::take(&mut model.output)),
    };
    let processed = AtomicU64::new(0);
    let workers = config.workers;
    std::thread::scope(|scope| {
        for w in 0..workers {
            let shared = &shared;
            let processed = &processed;
            scope.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(w as u64 + 1));
                let input = unsafe { &mut *shared.input.get() };
                let output = unsafe { &mut *shared.output.get() };
                for _epoch in 0..config.epochs {
                    for sent in sentences.iter().skip(w).step_by(workers) {
                        for t in 0..sent.len() {
                            let lo = t.saturating_sub(config.window);
                            let hi = (t + config.window).min(sent.len() - 1);
                            for c in lo..=hi {
                                if c == t {
                                    continue;
                                }
                                let done = processed.fetch_add(1, Ordering::Relaxed);
                                let lr = learning_rate(config, done, total_pairs);
                                let negatives = sample_negatives(
                                    noise,
                                    &mut rng,
                                    config.negatives,
                                    sent[c],
                                    vocab_len,
                                );
                                train_pair(input, output, dim, sent[t], sent[c], &negatives, lr);
                            }
                        }
                    }
                }
            });
        }
    });
    model.input = shared.input.into_inner();
    model.output = shared.output.into_inner();
}

/// Byte-exact binary model file: magic, version, shape header, vocabulary
/// block, then the two row-major matrices as little-endian f64.
pub fn save(model: &SkipGramModel, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.vocab.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(model.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(model.window as u32).to_le_bytes());
    buf.extend_from_slice(&model.vocab.min_count().to_le_bytes());
    for i in 0..model.vocab.len() {
        let w = model.vocab.word(i).as_bytes();
        buf.extend_from_slice(&(w.len() as u32).to_le_bytes());
        buf.extend_from_slice(w);
        buf.extend_from_slice(&model.vocab.count(i).to_le_bytes());
    }
    for v in model.input.iter().chain(&model.output) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    path: &'a Path,
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::ModelFormat {
                path: self.path.to_path_buf(),
                offset: self.pos as u64,
                message: format!("truncated while reading {what}"),
            });
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn load(path: &Path) -> Result<SkipGramModel> {
    let mut data = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor {
        path,
        data: &data,
        pos: 0,
    };
    let magic = cur.take(8, "magic")?;
    if magic != MODEL_MAGIC {
        return Err(Error::ModelFormat {
            path: path.to_path_buf(),
            offset: 0,
            message: "bad magic".into(),
        });
    }
    let version = cur.u32("version")?;
    if version != MODEL_VERSION {
        return Err(Error::ModelVersion {
            path: path.to_path_buf(),
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let vocab_len = cur.u64("vocab size")? as usize;
    let dim = cur.u32("dim")? as usize;
    let window = cur.u32("window")? as usize;
    let min_count = cur.u64("min_count")?;
    let mut words = Vec::with_capacity(vocab_len);
    let mut counts = Vec::with_capacity(vocab_len);
    for _ in 0..vocab_len {
        let len = cur.u32("word length")? as usize;
        let offset = cur.pos as u64;
        let bytes = cur.take(len, "word")?;
        let word = std::str::from_utf8(bytes)
            .map_err(|_| Error::ModelFormat {
                path: path.to_path_buf(),
                offset,
                message: "word is not valid UTF-8".into(),
            })?
            .to_string();
        words.push(word);
        counts.push(cur.u64("word count")?);
    }
    let mut input = Vec::with_capacity(vocab_len * dim);
    for _ in 0..vocab_len * dim {
        input.push(cur.f64("input matrix")?);
    }
    let mut output = Vec::with_capacity(vocab_len * dim);
    for _ in 0..vocab_len * dim {
        output.push(cur.f64("output matrix")?);
    }
    if cur.pos != data.len() {
        return Err(Error::ModelFormat {
            path: path.to_path_buf(),
            offset: cur.pos as u64,
            message: "trailing bytes after matrices".into(),
        });
    }
    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    Ok(SkipGramModel {
        vocab: Vocabulary {
            words,
            counts,
            index,
            min_count,
        },
        dim,
        window,
        input,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;

    fn toy_corpus() -> Corpus {
        Corpus::from_tokens(
            ["a", "a", "a", "a", "a", "b", "b", "c", "c", "c"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        )
    }

    #[test]
    fn build_vocab_threshold_is_inclusive() {
        let v = build_vocab(&toy_corpus(), 3).unwrap();
        assert_eq!(v.words(), ["a", "c"]);
        let v1 = build_vocab(&toy_corpus(), 1).unwrap();
        assert_eq!(v1.len(), 3);
        let exact = Corpus::from_tokens(vec!["a".into(), "a".into(), "a".into()]);
        assert_eq!(build_vocab(&exact, 3).unwrap().words(), ["a"]);
    }

    #[test]
    fn build_vocab_order_is_count_then_lex() {
        let c = Corpus::from_tokens(
            ["x", "m", "m", "z", "z"].iter().map(|s| s.to_string()).collect(),
        );
        let v = build_vocab(&c, 1).unwrap();
        assert_eq!(v.words(), ["m", "z", "x"]);
    }

    #[test]
    fn build_vocab_empty_is_error() {
        assert!(matches!(
            build_vocab(&toy_corpus(), 100),
            Err(Error::EmptyVocabulary { min_count: 100 })
        ));
    }

    fn tiny_model(seed: u64) -> SkipGramModel {
        let vocab = build_vocab(&toy_corpus(), 1).unwrap();
        let mut m = SkipGramModel::init(vocab, 4, 2, seed);
        // give output vectors structure too
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 99);
        for v in m.output.iter_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
        m
    }

    #[test]
    fn sgd_step_zero_vectors_stay_zero() {
        let vocab = build_vocab(&toy_corpus(), 1).unwrap();
        let mut m = SkipGramModel::init(vocab, 4, 2, 1);
        for v in m.input.iter_mut() {
            *v = 0.0;
        }
        sgd_step(&mut m, 0, 1, &[2], 0.5);
        assert!(m.input.iter().all(|&v| v == 0.0));
        assert!(m.output.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sgd_step_zero_lr_is_identity() {
        let mut m = tiny_model(2);
        let before = (m.input.clone(), m.output.clone());
        sgd_step(&mut m, 0, 1, &[2, 2], 0.0);
        assert_eq!(m.input, before.0);
        assert_eq!(m.output, before.1);
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        // analytic gradient recovered from one unit-lr step; numeric from
        // central differences of pair_loss with h = 1e-5
        for seed in 0..20 {
            let m0 = tiny_model(seed);
            // negatives must be distinct rows: a repeated row would read its
            // own partial update and the secant would no longer be the
            // gradient at the starting point
            let (center, context, negatives) = (0, 1, vec![2]);
            let mut stepped = m0.clone();
            let lr = 1e-3;
            sgd_step(&mut stepped, center, context, &negatives, lr);
            let h = 1e-5;
            let n_params = m0.input.len() + m0.output.len();
            for idx in 0..n_params {
                let read = |m: &SkipGramModel, i: usize| {
                    if i < m.input.len() { m.input[i] } else { m.output[i - m.input.len()] }
                };
                let write = |m: &mut SkipGramModel, i: usize, v: f64| {
                    if i < m.input.len() { m.input[i] = v } else { let j = i - m.input.len(); m.output[j] = v }
                };
                let analytic = (read(&m0, idx) - read(&stepped, idx)) / lr;
                let mut plus = m0.clone();
                write(&mut plus, idx, read(&m0, idx) + h);
                let mut minus = m0.clone();
                write(&mut minus, idx, read(&m0, idx) - h);
                let numeric = (pair_loss(&plus, center, context, &negatives)
                    - pair_loss(&minus, center, context, &negatives))
                    / (2.0 * h);
                if numeric.abs() > 1e-8 {
                    let rel = (analytic - numeric).abs() / numeric.abs();
                    assert!(rel < 1e-4, "seed {seed} param {idx}: {analytic} vs {numeric}");
                }
            }
        }
    }

    #[test]
    fn window_pair_count_matches_brute_force() {
        let indices = vec![0, 1, 2, 1, 0];
        let pairs = window_pairs(&indices, 2);
        assert_eq!(pairs.len(), 14);
        // brute force: all ordered pairs (t, c) with 0 < |t-c| <= 2
        let mut brute = Vec::new();
        for t in 0..indices.len() {
            for c in 0..indices.len() {
                if t != c && t.abs_diff(c) <= 2 {
                    brute.push((indices[t], indices[c]));
                }
            }
        }
        brute.sort_unstable();
        let mut got = pairs.clone();
        got.sort_unstable();
        assert_eq!(got, brute);
    }

    #[test]
    fn negative_sampling_follows_three_quarter_unigram() {
        let counts = [500u64, 120, 60, 30, 10, 5, 3, 2, 2, 1];
        let tokens: Vec<String> = counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(format!("w{i:02}"), c as usize))
            .collect();
        let vocab = build_vocab(&Corpus::from_tokens(tokens), 1).unwrap();
        let table = NoiseTable::new(&vocab);
        let n = 1_000_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut observed = vec![0u64; vocab.len()];
        for _ in 0..n {
            observed[table.sample(&mut rng)] += 1;
        }
        for i in 0..vocab.len() {
            let p = table.probability(i);
            let se = (n as f64 * p * (1.0 - p)).sqrt();
            let diff = (observed[i] as f64 - n as f64 * p).abs();
            assert!(diff <= 3.0 * se, "word {i}: off by {diff} > 3se {se}");
        }
    }

    fn synthetic_corpus(n: usize) -> Corpus {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut sentences = Vec::new();
        let mut total = 0;
        while total < n {
            let len = rng.gen_range(5..10);
            let topic = rng.gen_range(0..2usize);
            let sent: Vec<String> = (0..len)
                .map(|_| format!("t{}w{}", topic, rng.gen_range(0..15)))
                .collect();
            total += sent.len();
            sentences.push(sent);
        }
        Corpus::from_sentences(sentences)
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let corpus = synthetic_corpus(300);
        let cfg = TrainConfig {
            dim: 8,
            epochs: 2,
            seed: 7,
            ..TrainConfig::default()
        };
        let a = train(&corpus, &cfg).unwrap();
        let b = train(&corpus, &cfg).unwrap();
        assert_eq!(a.input, b.input);
        assert_eq!(a.output, b.output);
    }

    #[test]
    fn mean_loss_decreases_over_epochs() {
        let corpus = synthetic_corpus(1000);
        let cfg = TrainConfig {
            dim: 16,
            epochs: 5,
            seed: 3,
            ..TrainConfig::default()
        };
        let (_, stats) = train_with_stats(&corpus, &cfg).unwrap();
        let first = stats.epoch_mean_loss[0];
        let last = *stats.epoch_mean_loss.last().unwrap();
        assert!(last <= first, "loss went up: {first} -> {last}");
    }

    #[test]
    fn hogwild_training_reduces_positive_pair_loss() {
        let corpus = synthetic_corpus(1000);
        let cfg = TrainConfig {
            dim: 16,
            epochs: 3,
            workers: 2,
            seed: 3,
            ..TrainConfig::default()
        };
        let trained = train(&corpus, &cfg).unwrap();
        let fresh = SkipGramModel::init(trained.vocab.clone(), 16, 2, 3);
        // full negative-sampling objective with an identical negative
        // sequence for both models
        let noise = NoiseTable::new(&trained.vocab);
        let eval = |m: &SkipGramModel| {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let mut loss = 0.0;
            let mut n = 0u64;
            for s in corpus.sentences() {
                let idx = sentence_indices(&m.vocab, s);
                for (center, context) in window_pairs(&idx, m.window) {
                    let negatives =
                        sample_negatives(&noise, &mut rng, 5, context, m.vocab.len());
                    loss += pair_loss(m, center, context, &negatives);
                    n += 1;
                }
            }
            loss / n as f64
        };
        let (after, before) = (eval(&trained), eval(&fresh));
        assert!(after < before, "negative-sampling loss {before} -> {after}");
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let corpus = synthetic_corpus(300);
        let cfg = TrainConfig {
            dim: 8,
            epochs: 1,
            seed: 5,
            ..TrainConfig::default()
        };
        let m = train(&corpus, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save(&m, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(m.input, loaded.input);
        assert_eq!(m.output, loaded.output);
        assert_eq!(m.vocab, loaded.vocab);
        assert_eq!(m.window, loaded.window);
    }

    #[test]
    fn truncated_model_file_is_an_error_with_offset() {
        let m = tiny_model(1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save(&m, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        match load(&path) {
            Err(Error::ModelFormat { offset, .. }) => assert!(offset > 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_names_both_versions() {
        let m = tiny_model(1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save(&m, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8..12].copy_from_slice(&9u32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        match load(&path) {
            Err(Error::ModelVersion { found, expected, .. }) => {
                assert_eq!(found, 9);
                assert_eq!(expected, MODEL_VERSION);
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }
}
