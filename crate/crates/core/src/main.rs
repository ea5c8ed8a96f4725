//! Pipeline CLI: each subcommand is a thin adapter over one library module,
//! reading and writing the documented TSV formats.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use readlm::config::PipelineConfig;
use readlm::corpus::{compute_frequency, read_stem_rules, Corpus, FrequencyTable, StemRule};
use readlm::embedding::{self, SkipGramModel, TrainConfig};
use readlm::eye::{
    apply_exclusions, read_fixations, ExclusionConfig, MeasuresTable, SentenceLayout,
};
use readlm::scoring::{score_corpus, scores_from_tsv, scores_to_tsv, ModelScores};
use readlm::selection::{
    build_stimulus_set, flag_zero_wp, rank_sentences, select_discriminative,
    verify_multicollinearity, SelectionConfig, StimulusSet,
};
use readlm::sim::{end_to_end_check, seed_report_tsv, summary_tsv, SimConfig};
use readlm::stats::{
    correlation_report, correlation_table, ols_fit, regression_report, regression_tsv,
    DesignMatrix,
};
use readlm::tsv::{fmt_f64, TsvFile, TsvWriter};
use readlm::{Error, Result, BUILD_ID};

#[derive(Parser)]
#[command(name = "readlm", version = readlm::BUILD_ID, about = "Individual-corpus language models and eye-movement regression pipeline")]
struct Cli {
    /// Optional key=value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a corpus and write its word-frequency table.
    Ingest(IngestArgs),
    /// Train a skip-gram model on a corpus.
    Train(TrainArgs),
    /// Score sentences under one or more trained models.
    Score(ScoreArgs),
    /// Select discriminative stimulus sentences from a score table.
    Select(SelectArgs),
    /// Compute viewing measures from fixation logs and apply exclusions.
    Measures(MeasuresArgs),
    /// Fit an OLS regression on an analysis table.
    Regress(RegressArgs),
    /// Run the planted-coefficient end-to-end check over seeds.
    Simulate(SimulateArgs),
    /// Render correlation and regression tables from an analysis table.
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Plain text, or TSV with `surface<TAB>confidence` token rows.
    #[arg(long)]
    input: PathBuf,
    /// Suffix-rule stemming table (`suffix<TAB>replacement` lines).
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Minimum recognizer confidence (0-100) for a token to be kept.
    #[arg(long)]
    threshold: Option<u8>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    threshold: Option<u8>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// Trained model file(s), as `id=path` or bare paths (id = file stem).
    #[arg(long, required = true)]
    model: Vec<String>,
    /// Sentence pool: one whitespace-tokenized sentence per line.
    #[arg(long)]
    sentences: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    /// Score table written by `score`.
    #[arg(long)]
    scores: PathBuf,
    /// Word-frequency tables as `id=path`, one per corpus.
    #[arg(long)]
    freq: Vec<String>,
    /// Stemming rules used when looking tokens up in frequency tables.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    corr_threshold: Option<f64>,
    /// Trained model (`id=path`) used to list replacement candidates for
    /// zero-probability words; writes `<out>.flags.tsv`.
    #[arg(long)]
    flag_model: Option<String>,
    /// Number of replacement candidates per flagged word.
    #[arg(long, default_value_t = 5)]
    candidates: usize,
    /// Where to write the correlation/VIF diagnostic report.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MeasuresArgs {
    /// Fixations: `trial_id sentence_id seq word_index|x duration_ms`.
    #[arg(long)]
    fixations: PathBuf,
    /// Stimulus table written by `select`.
    #[arg(long)]
    stimuli: PathBuf,
    /// Word extents (`sentence_id word_index start_px end_px`), required
    /// when fixations carry x coordinates instead of word indices.
    #[arg(long)]
    layout: Option<PathBuf>,
    /// Measures table with exclusion flags.
    #[arg(long)]
    out: PathBuf,
    /// Analysis table (included rows joined with predictors); defaults to
    /// `<out>.analysis.tsv`.
    #[arg(long)]
    analysis_out: Option<PathBuf>,
}

#[derive(Args)]
struct RegressArgs {
    /// Analysis table written by `measures` (or the simulator).
    #[arg(long)]
    table: PathBuf,
    #[arg(long, value_parser = ["ffd", "gd", "tvd"])]
    response: String,
    /// Comma-separated predictor subset (default: all columns).
    #[arg(long)]
    predictors: Option<String>,
    /// Output directory for the text report and its TSV duplicate.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Seed list: `1..20` (inclusive range) or comma-separated values.
    #[arg(long, default_value = "1..20")]
    seeds: String,
    #[arg(long)]
    tokens: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Analysis table written by `measures` (or the simulator).
    #[arg(long)]
    table: PathBuf,
    /// Output directory; also prints to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let config = match &cli.config {
        Some(path) => match PipelineConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => PipelineConfig::default(),
    };
    match run(cli.command, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command, config: &PipelineConfig) -> Result<()> {
    match command {
        Command::Ingest(args) => ingest(args, config),
        Command::Train(args) => train(args, config),
        Command::Score(args) => score(args),
        Command::Select(args) => select(args, config),
        Command::Measures(args) => measures(args, config),
        Command::Regress(args) => regress(args),
        Command::Simulate(args) => simulate(args),
        Command::Report(args) => report(args),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_rules(path: &Option<PathBuf>) -> Result<Vec<StemRule>> {
    match path {
        Some(p) => read_stem_rules(p),
        None => Ok(Vec::new()),
    }
}

/// Split an `id=path` argument; a bare path gets its file stem as id.
fn id_and_path(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((id, path)) => (id.to_string(), PathBuf::from(path)),
        None => {
            let path = PathBuf::from(spec);
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.to_string());
            (id, path)
        }
    }
}

fn ingest(args: IngestArgs, config: &PipelineConfig) -> Result<()> {
    let threshold = args.threshold.unwrap_or(config.confidence_threshold);
    let corpus = Corpus::read(&args.input, threshold)?;
    let rules = load_rules(&args.rules)?;
    let table = compute_frequency(&corpus, &rules)?;
    write_file(&args.out, &table.to_tsv(Some(BUILD_ID)))?;
    eprintln!(
        "ingested {} tokens, {} stems -> {}",
        corpus.token_count(),
        table.len(),
        args.out.display()
    );
    Ok(())
}

fn train(args: TrainArgs, config: &PipelineConfig) -> Result<()> {
    let threshold = args.threshold.unwrap_or(config.confidence_threshold);
    let corpus = Corpus::read(&args.corpus, threshold)?;
    let train_config = TrainConfig {
        dim: args.dim.unwrap_or(config.dim),
        window: args.window.unwrap_or(config.window),
        epochs: args.epochs.unwrap_or(config.epochs),
        min_count: args.min_count.unwrap_or(config.min_count_individual),
        negatives: args.negatives.unwrap_or(config.negatives),
        learning_rate: config.learning_rate,
        min_learning_rate: config.min_learning_rate,
        workers: args.workers.unwrap_or(config.workers),
        seed: args.seed,
        ..TrainConfig::default()
    };
    let (model, stats) = embedding::train_with_stats(&corpus, &train_config)?;
    embedding::save(&model, &args.out)?;
    eprintln!(
        "trained |V|={} dim={} on {} pairs -> {}",
        model.vocab.len(),
        model.dim,
        stats.total_pairs,
        args.out.display()
    );
    Ok(())
}

fn read_sentences(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut sentences = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_string()).collect();
        sentences.push((format!("s{:04}", i + 1), tokens));
    }
    if sentences.is_empty() {
        return Err(Error::parse(path, 1, "no sentences in input"));
    }
    Ok(sentences)
}

fn score(args: ScoreArgs) -> Result<()> {
    let mut models: Vec<(String, SkipGramModel)> = Vec::new();
    for spec in &args.model {
        let (id, path) = id_and_path(spec);
        models.push((id, embedding::load(&path)?));
    }
    let sentences = read_sentences(&args.sentences)?;
    let refs: Vec<(String, &SkipGramModel)> =
        models.iter().map(|(id, m)| (id.clone(), m)).collect();
    let scores = score_corpus(&refs, &sentences);
    for ms in &scores {
        for (id, msg) in &ms.errors {
            eprintln!("warning: {}/{id}: {msg}", ms.model_id);
        }
    }
    write_file(&args.out, &scores_to_tsv(&scores, Some(BUILD_ID)))?;
    eprintln!(
        "scored {} sentences under {} models -> {}",
        sentences.len(),
        scores.len(),
        args.out.display()
    );
    Ok(())
}

fn selection_config(args: &SelectArgs, config: &PipelineConfig) -> SelectionConfig {
    SelectionConfig {
        fraction: args.fraction.unwrap_or(config.fraction),
        min_words: config.min_words,
        max_words: config.max_words,
        min_word_len: config.min_word_len,
        max_word_len: config.max_word_len,
        corr_threshold: args.corr_threshold.unwrap_or(config.corr_threshold),
    }
}

fn select(args: SelectArgs, config: &PipelineConfig) -> Result<()> {
    let scores: Vec<ModelScores> = scores_from_tsv(&args.scores)?;
    if scores.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "selection needs at least two models, the score table has {}",
            scores.len()
        )));
    }
    let sel_config = selection_config(&args, config);
    let rankings: Vec<_> = scores.iter().map(rank_sentences).collect();
    let pool: Vec<(String, Vec<String>)> = scores[0]
        .scores
        .iter()
        .map(|s| (s.sentence_id.clone(), s.tokens.clone()))
        .collect();
    let selection = select_discriminative(&rankings, &pool, &sel_config)?;
    if let Some(w) = &selection.warning {
        eprintln!("warning: {w}");
    }

    let rules = load_rules(&args.rules)?;
    let mut freq_tables: Vec<(String, FrequencyTable)> = Vec::new();
    for spec in &args.freq {
        let (id, path) = id_and_path(spec);
        freq_tables.push((id, FrequencyTable::read(&path)?));
    }
    let freq_refs: Vec<(String, &FrequencyTable)> = freq_tables
        .iter()
        .map(|(id, t)| (id.clone(), t))
        .collect();
    let stimuli = build_stimulus_set(&selection, &scores, &freq_refs, &rules)?;
    write_file(&args.out, &stimuli.to_tsv(Some(BUILD_ID)))?;

    let diag = verify_multicollinearity(&stimuli, &sel_config)?;
    let mut diag_text = format!("# {BUILD_ID}\n");
    diag_text.push_str(&correlation_report(&diag.matrix));
    diag_text.push_str("\nVIF per predictor:\n");
    for (name, v) in &diag.vif {
        diag_text.push_str(&format!("  {name}: {}\n", fmt_f64(*v)));
    }
    diag_text.push_str(&format!(
        "\ncomplete rows: {}\nWP decorrelation gate (|r| < {}): {}\n",
        diag.n_complete,
        fmt_f64(sel_config.corr_threshold),
        if diag.pass { "pass" } else { "FAIL" }
    ));
    let diag_path = args
        .diagnostics
        .clone()
        .unwrap_or_else(|| args.out.with_extension("diagnostics.txt"));
    write_file(&diag_path, &diag_text)?;
    if !diag.pass {
        eprintln!("warning: WP columns remain correlated above the threshold");
    }

    if let Some(spec) = &args.flag_model {
        let (model_id, path) = id_and_path(spec);
        let model = embedding::load(&path)?;
        let flags = flag_zero_wp(&stimuli, &model_id, &model, args.candidates)?;
        let mut w = TsvWriter::new(
            Some(BUILD_ID),
            &["sentence_id", "position", "token", "candidate_rank", "candidate", "candidate_wp"],
        );
        for f in &flags {
            for (rank, (word, wp)) in f.candidates.iter().enumerate() {
                w.row(&[
                    f.sentence_id.clone(),
                    f.position.to_string(),
                    f.token.clone(),
                    (rank + 1).to_string(),
                    word.clone(),
                    fmt_f64(*wp),
                ]);
            }
        }
        let flags_path = args.out.with_extension("flags.tsv");
        write_file(&flags_path, &w.finish())?;
        eprintln!("{} zero-probability words flagged -> {}", flags.len(), flags_path.display());
    }

    eprintln!(
        "selected {} sentences ({} word rows) -> {}",
        stimuli.sentences.len(),
        stimuli.words.len(),
        args.out.display()
    );
    Ok(())
}

/// Layout file: `sentence_id word_index start_px end_px`.
fn read_layouts(path: &Path) -> Result<HashMap<String, SentenceLayout>> {
    let file = TsvFile::read(path)?;
    let c_sid = file.col("sentence_id")?;
    let c_idx = file.col("word_index")?;
    let c_start = file.col("start_px")?;
    let c_end = file.col("end_px")?;
    let mut spans: HashMap<String, Vec<(usize, f64, f64)>> = HashMap::new();
    for (line, fields) in &file.rows {
        let idx: usize = fields[c_idx]
            .parse()
            .map_err(|_| file.err(*line, format!("invalid word_index `{}`", fields[c_idx])))?;
        let start: f64 = fields[c_start]
            .parse()
            .map_err(|_| file.err(*line, format!("invalid start_px `{}`", fields[c_start])))?;
        let end: f64 = fields[c_end]
            .parse()
            .map_err(|_| file.err(*line, format!("invalid end_px `{}`", fields[c_end])))?;
        if end <= start {
            return Err(file.err(*line, "end_px must exceed start_px"));
        }
        spans.entry(fields[c_sid].clone()).or_default().push((idx, start, end));
    }
    let mut layouts = HashMap::new();
    for (sid, mut words) in spans {
        words.sort_by_key(|(idx, _, _)| *idx);
        for (k, (idx, _, _)) in words.iter().enumerate() {
            if *idx != k {
                return Err(Error::InvalidConfig(format!(
                    "layout for `{sid}` is missing word index {k}"
                )));
            }
        }
        for pair in words.windows(2) {
            if pair[1].1 < pair[0].2 {
                return Err(Error::InvalidConfig(format!(
                    "layout intervals overlap in sentence `{sid}`"
                )));
            }
        }
        layouts.insert(
            sid,
            SentenceLayout {
                intervals: words.into_iter().map(|(_, s, e)| (s, e)).collect(),
            },
        );
    }
    Ok(layouts)
}

fn measures(args: MeasuresArgs, config: &PipelineConfig) -> Result<()> {
    let stimuli = StimulusSet::read(&args.stimuli)?;
    let layouts = match &args.layout {
        Some(path) => Some(read_layouts(path)?),
        None => None,
    };
    let trials = read_fixations(&args.fixations, layouts.as_ref())?;
    let exclusion = ExclusionConfig {
        min_fixation_ms: config.min_fixation_ms,
        max_ffd_ms: config.max_ffd_ms,
        max_gd_ms: config.max_gd_ms,
        max_tvd_ms: config.max_tvd_ms,
        drop_first_last_word: config.drop_first_last_word,
        drop_zero_wp_or_wf: config.drop_zero_wp_or_wf,
        first_pass_rightward_only: config.first_pass_rightward_only,
    };
    let table = apply_exclusions(&trials, &stimuli, &exclusion)?;
    write_file(&args.out, &table.measures_tsv(Some(BUILD_ID)))?;
    let analysis_path = args
        .analysis_out
        .clone()
        .unwrap_or_else(|| args.out.with_extension("analysis.tsv"));
    write_file(&analysis_path, &table.analysis_tsv(Some(BUILD_ID)))?;
    let included = table.included_rows().count();
    eprintln!(
        "{} word rows ({included} included) from {} trials -> {} / {}",
        table.rows.len(),
        trials.len(),
        args.out.display(),
        analysis_path.display()
    );
    for (reason, n) in &table.exclusions.rows {
        eprintln!("  excluded {n} rows: {reason}");
    }
    Ok(())
}

fn design_with_predictors(
    table: &MeasuresTable,
    response: &str,
    predictors: &Option<String>,
) -> Result<DesignMatrix> {
    let full = table.design(response)?;
    let Some(wanted) = predictors else {
        return Ok(full);
    };
    let wanted: Vec<&str> = wanted.split(',').map(|s| s.trim()).collect();
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for name in &wanted {
        let Some(i) = full.predictor_names.iter().position(|n| n == name) else {
            return Err(Error::InvalidConfig(format!(
                "unknown predictor `{name}` (available: {})",
                full.predictor_names.join(", ")
            )));
        };
        names.push(full.predictor_names[i].clone());
        columns.push(full.predictors[i].clone());
    }
    DesignMatrix::new(names, columns, response, full.response)
}

fn regress(args: RegressArgs) -> Result<()> {
    let table = MeasuresTable::read(&args.table)?;
    let design = design_with_predictors(&table, &args.response, &args.predictors)?;
    let result = ols_fit(&design)?;
    let text = format!("# {BUILD_ID}\n{}", regression_report(&result));
    let txt_path = args.out.join(format!("regress_{}.txt", args.response));
    let tsv_path = args.out.join(format!("regress_{}.tsv", args.response));
    write_file(&txt_path, &text)?;
    write_file(&tsv_path, &regression_tsv(&result, Some(BUILD_ID)))?;
    print!("{text}");
    Ok(())
}

/// Parse `1..20` (inclusive) or a comma-separated seed list.
fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = |s: &str| Error::InvalidConfig(format!("invalid seed spec `{s}`"));
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad(spec))?;
        let hi: u64 = hi.trim().parse().map_err(|_| bad(spec))?;
        if lo > hi {
            return Err(bad(spec));
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad(spec)))
        .collect()
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let seeds = parse_seeds(&args.seeds)?;
    let mut cfg = SimConfig::default();
    if let Some(tokens) = args.tokens {
        cfg.tokens_per_corpus = tokens;
    }
    let reports = end_to_end_check(&seeds, &cfg);
    write_file(
        &args.out.join("summary.tsv"),
        &summary_tsv(&reports, Some(BUILD_ID)),
    )?;
    for r in &reports {
        write_file(
            &args.out.join(format!("seed_{}.tsv", r.seed)),
            &seed_report_tsv(r, Some(BUILD_ID)),
        )?;
    }
    let ok = reports.iter().filter(|r| r.error.is_none()).count();
    let gate = reports.iter().filter(|r| r.gate_pass).count();
    let covered = reports.iter().filter(|r| r.all_covered()).count();
    eprintln!(
        "{ok}/{} seeds completed; gate passed {gate}; all betas covered {covered} -> {}",
        reports.len(),
        args.out.display()
    );
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let table = MeasuresTable::read(&args.table)?;
    let mut columns: Vec<(String, Vec<Option<f64>>)> = Vec::new();
    columns.push((
        "length".into(),
        table.rows.iter().map(|r| Some(r.length as f64)).collect(),
    ));
    for (k, id) in table.corpus_ids.iter().enumerate() {
        columns.push((
            format!("wf_{id}"),
            table.rows.iter().map(|r| r.wf[k]).collect(),
        ));
    }
    for (k, id) in table.model_ids.iter().enumerate() {
        columns.push((
            format!("wp_{id}"),
            table.rows.iter().map(|r| r.wp[k]).collect(),
        ));
    }
    let matrix = correlation_table(&columns);
    let mut text = format!("# {BUILD_ID}\n");
    text.push_str("Predictor correlations (r above diagonal, p below):\n");
    text.push_str(&correlation_report(&matrix));
    for response in ["ffd", "gd", "tvd"] {
        text.push('\n');
        match table.design(response).and_then(|d| ols_fit(&d)) {
            Ok(result) => text.push_str(&regression_report(&result)),
            Err(e) => text.push_str(&format!("{response}: not fitted ({e})\n")),
        }
    }
    print!("{text}");
    if let Some(dir) = &args.out {
        write_file(&dir.join("report.txt"), &text)?;
    }
    Ok(())
}
