use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rayon::prelude::*;

use bioqa_core::decoder::{logits_to_jsonl, parse_logits_jsonl, NbestConfig};
use bioqa_core::encoder::EncoderConfig;
use bioqa_core::ingest::{
    build_pairs, from_squad_json, parse_bioasq, to_squad_json, undersample_yesno, AbstractStore, BuildOutcome,
    CachedAbstracts, EfetchClient, PairMode, QaPair, Strategy, StrategyConfig, DEFAULT_EFETCH_URL,
};
use bioqa_core::metrics::{evaluate, GoldStandard};
use bioqa_core::postprocess::{answers_to_json, parse_answers_json, DEFAULT_THRESHOLD};
use bioqa_core::predict::{
    assemble, audit_question, audits_from_json, audits_to_json, ensemble_audits, group_by_question, predict_pair,
    LogitTable, PredictConfig, QuestionAudit, Scorer,
};
use bioqa_core::tokenizer::{encode_qa_pair, EncodeConfig, Vocab};
use bioqa_core::trainer::{trace_csv, train, Model, TrainConfig};
use bioqa_core::{Error, QuestionType};

#[derive(Parser)]
#[command(name = "bioqa", version, about = "Extractive biomedical question answering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn challenge questions into SQuAD-layout question/passage pairs
    Convert(ConvertArgs),
    /// Build a WordPiece vocabulary from SQuAD-layout files
    Vocab(VocabArgs),
    /// Fine-tune encoder and heads on one or more stages of pairs
    Train(TrainArgs),
    /// Answer the questions of a SQuAD-layout file
    Predict(PredictArgs),
    /// Score an answers file against challenge gold answers
    Evaluate(EvaluateArgs),
    /// Average several prediction runs into one answers file
    Ensemble(EnsembleArgs),
}

#[derive(Args)]
struct Common {
    /// key=value file supplying defaults for any flag of the subcommand
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit
    #[arg(long)]
    show_config: bool,
    /// Worker threads for per-question work
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct ConvertArgs {
    #[command(flatten)]
    common: Common,
    /// Challenge JSON file
    #[arg(long, required_unless_present = "show_config")]
    input: Option<PathBuf>,
    /// Only this question type; `--output` then names the file
    #[arg(long)]
    qtype: Option<QuestionType>,
    #[arg(long, required_unless_present_any = ["output_dir", "show_config"])]
    output: Option<PathBuf>,
    /// Directory receiving one `<type>.json` per question type
    #[arg(long, conflicts_with = "output")]
    output_dir: Option<PathBuf>,
    #[arg(long, default_value = "snippet_asis")]
    strategy: Strategy,
    /// Sentences added on each side of the snippet for appended_snippet
    #[arg(long, default_value_t = 1)]
    n_append: usize,
    /// Emit unlabelled pairs for every passage
    #[arg(long)]
    inference: bool,
    /// Keep yes/no pairs unbalanced
    #[arg(long)]
    no_balance: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "abstract_cache")]
    cache_dir: PathBuf,
    /// Use cached abstracts only
    #[arg(long)]
    offline: bool,
    #[arg(long, default_value = DEFAULT_EFETCH_URL)]
    efetch_url: String,
    /// Skip questions whose abstracts cannot be resolved
    #[arg(long)]
    keep_going: bool,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct VocabArgs {
    #[command(flatten)]
    common: Common,
    /// SQuAD-layout files (repeatable)
    #[arg(long, required_unless_present = "show_config")]
    input: Vec<PathBuf>,
    #[arg(long, required_unless_present = "show_config")]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 8000)]
    max_size: usize,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Training stage, SQuAD layout; repeat for staged fine-tuning
    #[arg(long = "stage", required_unless_present = "show_config")]
    stages: Vec<PathBuf>,
    #[arg(long, required_unless_present = "show_config")]
    vocab: Option<PathBuf>,
    /// Checkpoint to write
    #[arg(long, required_unless_present = "show_config")]
    output: Option<PathBuf>,
    /// Start from this checkpoint instead of a fresh initialisation
    #[arg(long)]
    init: Option<PathBuf>,
    /// Per-epoch loss trace (CSV)
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 2)]
    heads: usize,
    #[arg(long, default_value_t = 256)]
    ffn: usize,
    #[arg(long, default_value_t = 384)]
    max_seq_len: usize,
    #[arg(long, default_value_t = 128)]
    doc_stride: usize,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    /// SQuAD-layout file of inference pairs
    #[arg(long, required_unless_present = "show_config")]
    input: Option<PathBuf>,
    #[arg(long, required_unless_present = "show_config")]
    vocab: Option<PathBuf>,
    /// Trained checkpoint
    #[arg(long, required_unless_present_any = ["logits", "show_config"], conflicts_with = "logits")]
    model: Option<PathBuf>,
    /// Replay logits (JSON lines) instead of running a model
    #[arg(long)]
    logits: Option<PathBuf>,
    /// Answers file
    #[arg(long, required_unless_present = "show_config")]
    output: Option<PathBuf>,
    /// Per-question candidates for audit; defaults to nbest.json next to the answers
    #[arg(long)]
    nbest: Option<PathBuf>,
    /// Write the logits used, in replay format
    #[arg(long)]
    dump_logits: Option<PathBuf>,
    #[arg(long, default_value_t = 384)]
    max_seq_len: usize,
    #[arg(long, default_value_t = 128)]
    doc_stride: usize,
    #[arg(long, default_value_t = 30)]
    max_answer_tokens: usize,
    /// Candidates kept per window
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD, value_parser = parse_threshold)]
    threshold: f64,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, required_unless_present = "show_config")]
    answers: Option<PathBuf>,
    /// Challenge JSON with gold answers
    #[arg(long, required_unless_present = "show_config")]
    gold: Option<PathBuf>,
    /// Also write the report as JSON
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct EnsembleArgs {
    #[command(flatten)]
    common: Common,
    /// nbest.json of one model (repeatable)
    #[arg(long = "nbest", required_unless_present = "show_config")]
    inputs: Vec<PathBuf>,
    #[arg(long, required_unless_present = "show_config")]
    output: Option<PathBuf>,
    /// Combined candidates for audit
    #[arg(long)]
    nbest_out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD, value_parser = parse_threshold)]
    threshold: f64,
}

fn parse_threshold(s: &str) -> std::result::Result<f64, String> {
    let t: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if t > 0.0 && t < 1.0 {
        Ok(t)
    } else {
        Err(format!("threshold must lie strictly between 0 and 1, got {t}"))
    }
}

/// Inserts `--key=value` arguments read from `--config` right after the
/// subcommand name, so flags given on the command line override them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            path = strs.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(args) };
    let Some(sub_pos) = strs.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(args);
    };
    let root = Cli::command();
    let Some(sub) = root.find_subcommand(&strs[sub_pos]) else { return Ok(args) };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let mut extra = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{path}:{}: expected key=value", n + 1);
        };
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        if key == "config" || key == "show-config" {
            bail!("{path}:{}: `{key}` cannot be set from a config file", n + 1);
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .with_context(|| format!("{path}:{}: unknown key `{key}` for {}", n + 1, sub.get_name()))?;
        if arg.get_action().takes_values() {
            extra.push(OsString::from(format!("--{key}={value}")));
        } else {
            match value {
                "true" => extra.push(OsString::from(format!("--{key}"))),
                "false" => {}
                _ => bail!("{path}:{}: `{key}` takes true or false", n + 1),
            }
        }
    }
    let mut out = args;
    out.splice(sub_pos + 1..sub_pos + 1, extra);
    Ok(out)
}

/// Every flag of the chosen subcommand with its effective value.
fn show_config(matches: &ArgMatches) {
    let root = Cli::command();
    let Some((name, sub)) = matches.subcommand() else { return };
    let Some(cmd) = root.find_subcommand(name) else { return };
    for arg in cmd.get_arguments() {
        let id = arg.get_id().as_str();
        if matches!(id, "config" | "show_config" | "help" | "version") {
            continue;
        }
        let key = arg.get_long().unwrap_or(id);
        match sub.get_raw(id) {
            Some(values) => {
                for v in values {
                    println!("{key}={}", v.to_string_lossy());
                }
            }
            None => println!("# {key} unset"),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Fails early when an output file could not be created.
fn check_output(path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        bail!("output directory {} does not exist", parent.display());
    }
    Ok(())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().with_context(|| format!("--{flag} is required"))
}

fn convert(a: &ConvertArgs) -> Result<()> {
    let parsed = parse_bioasq(&read(required(&a.input, "input")?)?)?;
    if a.qtype.is_some() != a.output.is_some() {
        bail!("--output needs --qtype; use --output-dir for all types");
    }
    match (&a.output, &a.output_dir) {
        (Some(o), _) => check_output(o)?,
        (None, Some(d)) if !d.is_dir() => bail!("output directory {} does not exist", d.display()),
        _ => {}
    }
    let cfg = StrategyConfig::new(a.strategy, a.n_append)?;
    let mode = if a.inference { PairMode::Infer } else { PairMode::Train };
    if parsed.skipped_summary > 0 {
        log::info!("skipped {} summary questions", parsed.skipped_summary);
    }
    for (id, t) in &parsed.skipped_unknown {
        log::warn!("skipped question {id} of unknown type {t}");
    }
    let store: Option<CachedAbstracts> = cfg.strategy.needs_abstracts().then(|| {
        if a.offline {
            CachedAbstracts::offline(&a.cache_dir)
        } else {
            CachedAbstracts::new(&a.cache_dir, Some(Box::new(EfetchClient::new(a.efetch_url.clone()))))
        }
    });
    let questions: Vec<_> = parsed
        .questions
        .iter()
        .filter(|q| a.qtype.is_none_or(|t| t == q.qtype))
        .collect();
    let outcomes: Vec<Result<BuildOutcome, Error>> = pool(a.common.jobs)?.install(|| {
        questions
            .par_iter()
            .map(|q| build_pairs(q, &cfg, store.as_ref().map(|s| s as &dyn AbstractStore), mode))
            .collect()
    });

    println!("{:<8} {:>9} {:>10} {:>7}", "type", "questions", "with_pairs", "pairs");
    let mut totals = BuildOutcome::default();
    let mut failed = 0;
    for t in QuestionType::ALL {
        let mut n_questions = 0;
        let mut with_pairs = 0;
        let mut pairs: Vec<QaPair> = Vec::new();
        for (q, outcome) in questions.iter().zip(&outcomes) {
            if q.qtype != t {
                continue;
            }
            n_questions += 1;
            match outcome {
                Ok(o) => {
                    with_pairs += usize::from(!o.pairs.is_empty());
                    pairs.extend(o.pairs.iter().cloned());
                    totals.passages_without_answer += o.passages_without_answer;
                    totals.snippets_not_found += o.snippets_not_found;
                    totals.answer_fallbacks += o.answer_fallbacks;
                    totals.dropped += o.dropped;
                }
                Err(e) if a.keep_going => {
                    log::warn!("{e}");
                    failed += 1;
                }
                Err(e) => bail!("{e}"),
            }
        }
        if n_questions == 0 {
            continue;
        }
        let before = pairs.len();
        if t == QuestionType::Yesno && mode == PairMode::Train && !a.no_balance && !pairs.is_empty() {
            pairs = undersample_yesno(&pairs, a.seed)?;
        }
        println!("{:<8} {n_questions:>9} {with_pairs:>10} {:>7}", t.as_str(), pairs.len());
        if t == QuestionType::Yesno && mode == PairMode::Train {
            println!("  yesno pairs before undersampling: {before}");
        }
        if pairs.is_empty() {
            log::warn!("no {} pairs produced", t.as_str());
            continue;
        }
        let json = to_squad_json(&pairs, mode == PairMode::Train)?;
        match (&a.output, &a.output_dir) {
            (Some(o), _) => write(o, &json)?,
            (None, Some(d)) => write(&d.join(format!("{}.json", t.as_str())), &json)?,
            (None, None) => {}
        }
    }
    println!(
        "passages without answer: {}, snippets not found: {}, answer fallbacks: {}, dropped: {}",
        totals.passages_without_answer, totals.snippets_not_found, totals.answer_fallbacks, totals.dropped
    );
    if failed > 0 {
        println!("questions skipped after errors: {failed}");
    }
    Ok(())
}

fn vocab(a: &VocabArgs) -> Result<()> {
    let output = required(&a.output, "output")?;
    check_output(output)?;
    let mut texts = Vec::new();
    for path in &a.input {
        for p in from_squad_json(&read(path)?)? {
            texts.push(p.question);
            texts.push(p.context);
        }
    }
    let v = Vocab::from_corpus(texts.iter().map(String::as_str), a.max_size)?;
    v.save(output)?;
    println!("vocabulary: {} tokens", v.len());
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let output = required(&a.output, "output")?;
    check_output(output)?;
    if let Some(t) = &a.trace {
        check_output(t)?;
    }
    let vocab = Vocab::load(required(&a.vocab, "vocab")?)?;
    let enc = EncodeConfig {
        max_seq_len: a.max_seq_len,
        doc_stride: a.doc_stride,
    };
    let mut qtype = None;
    let mut stages = Vec::new();
    for path in &a.stages {
        let pairs = from_squad_json(&read(path)?)?;
        let mut features = Vec::new();
        let mut skipped = 0;
        for p in &pairs {
            if *qtype.get_or_insert(p.qtype) != p.qtype {
                bail!("{}: stages mix question types", path.display());
            }
            match encode_qa_pair(p, &vocab, &enc, true) {
                Ok(f) => features.extend(f),
                Err(Error::Unanswerable { pair_id }) => {
                    log::warn!("pair {pair_id}: answer does not fit any window; skipped");
                    skipped += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
        println!("stage {}: {} pairs, {} features, {skipped} skipped", path.display(), pairs.len(), features.len());
        stages.push(features);
    }
    let qtype = qtype.context("no training pairs")?;
    let init = match &a.init {
        Some(path) => Model::load(path)?,
        None => Model::init(
            EncoderConfig {
                vocab_size: vocab.len(),
                hidden: a.hidden,
                layers: a.layers,
                heads: a.heads,
                ffn: a.ffn,
                max_positions: a.max_seq_len,
            },
            a.seed,
        )?,
    };
    if init.config().vocab_size != vocab.len() {
        bail!("checkpoint vocabulary size {} differs from --vocab ({})", init.config().vocab_size, vocab.len());
    }
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        seed: a.seed,
        question_type: qtype,
    };
    let outcome = train(&stages, &cfg, init)?;
    outcome.model.save(output)?;
    if let Some(t) = &a.trace {
        write(t, &trace_csv(&outcome.trace))?;
    }
    if let Some(last) = outcome.trace.last() {
        println!("{} epochs, final mean loss {:.6}", last.epoch, last.mean_loss);
    }
    Ok(())
}

fn predict(a: &PredictArgs) -> Result<()> {
    let output = required(&a.output, "output")?;
    let nbest_path = a
        .nbest
        .clone()
        .unwrap_or_else(|| output.with_file_name("nbest.json"));
    for p in [Some(output), Some(&nbest_path), a.dump_logits.as_ref()].into_iter().flatten() {
        check_output(p)?;
    }
    let pairs = from_squad_json(&read(required(&a.input, "input")?)?)?;
    let vocab = Vocab::load(required(&a.vocab, "vocab")?)?;
    let model;
    let table;
    let scorer = match (&a.model, &a.logits) {
        (Some(path), _) => {
            model = Model::load(path)?;
            if model.config().max_positions < a.max_seq_len {
                bail!("--max-seq-len {} exceeds the model's {} positions", a.max_seq_len, model.config().max_positions);
            }
            Scorer::Model(&model)
        }
        (None, Some(path)) => {
            table = LogitTable::new(parse_logits_jsonl(&read(path)?)?)?;
            Scorer::Logits(&table)
        }
        (None, None) => bail!("one of --model or --logits is required"),
    };
    let cfg = PredictConfig {
        encode: EncodeConfig {
            max_seq_len: a.max_seq_len,
            doc_stride: a.doc_stride,
        },
        nbest: NbestConfig {
            k: a.k,
            max_answer_tokens: a.max_answer_tokens,
        },
        threshold: a.threshold,
    };
    let groups = group_by_question(&pairs);
    let results: Vec<_> = pool(a.common.jobs)?.install(|| {
        groups
            .par_iter()
            .map(|g| -> Result<_, Error> {
                let preds = g
                    .iter()
                    .map(|p| predict_pair(p, &vocab, scorer, &cfg))
                    .collect::<Result<Vec<_>, _>>()?;
                let audit = audit_question(g, &preds)?;
                let answer = assemble(&audit, cfg.threshold)?;
                Ok((audit, answer, preds))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let audits: Vec<QuestionAudit> = results.iter().map(|r| r.0.clone()).collect();
    let answers: Vec<_> = results.iter().map(|r| r.1.clone()).collect();
    write(output, &answers_to_json(&answers)?)?;
    write(&nbest_path, &audits_to_json(&audits)?)?;
    if let Some(path) = &a.dump_logits {
        let logits: Vec<_> = results
            .iter()
            .flat_map(|r| r.2.iter().flat_map(|p| p.logits.iter().cloned()))
            .collect();
        write(path, &logits_to_jsonl(&logits)?)?;
    }
    let fallbacks = answers.iter().filter(|a| a.list_fallback).count();
    println!("{} questions, {} pairs answered", answers.len(), pairs.len());
    if fallbacks > 0 {
        println!("list answers from top-1 fallback: {fallbacks}");
    }
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    if let Some(r) = &a.report {
        check_output(r)?;
    }
    let answers = parse_answers_json(&read(required(&a.answers, "answers")?)?)?;
    let gold = GoldStandard::from_parsed(&parse_bioasq(&read(required(&a.gold, "gold")?)?)?)?;
    let report = evaluate(&answers, &gold)?;
    print!("{}", report.to_text());
    if let Some(r) = &a.report {
        write(r, &report.to_json()?)?;
    }
    Ok(())
}

fn ensemble_cmd(a: &EnsembleArgs) -> Result<()> {
    let output = required(&a.output, "output")?;
    check_output(output)?;
    if let Some(n) = &a.nbest_out {
        check_output(n)?;
    }
    let runs = a
        .inputs
        .iter()
        .map(|p| audits_from_json(&read(p)?).with_context(|| format!("parsing {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let Some(first) = runs.first() else { bail!("at least one --nbest file is required") };
    for (run, path) in runs.iter().zip(&a.inputs) {
        if run.len() != first.len() {
            bail!("{} covers {} questions, expected {}", path.display(), run.len(), first.len());
        }
    }
    let lookups: Vec<std::collections::HashMap<&str, &QuestionAudit>> = runs
        .iter()
        .map(|r| r.iter().map(|q| (q.id.as_str(), q)).collect())
        .collect();
    let combined: Vec<QuestionAudit> = pool(a.common.jobs)?.install(|| {
        first
            .par_iter()
            .map(|q| -> Result<_> {
                let per_model = lookups
                    .iter()
                    .zip(&a.inputs)
                    .map(|(l, path)| {
                        l.get(q.id.as_str())
                            .map(|x| (*x).clone())
                            .with_context(|| format!("{} lacks question {}", path.display(), q.id))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ensemble_audits(&per_model)?)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let answers = combined
        .iter()
        .map(|q| assemble(q, a.threshold))
        .collect::<Result<Vec<_>, _>>()?;
    write(output, &answers_to_json(&answers)?)?;
    if let Some(n) = &a.nbest_out {
        write(n, &audits_to_json(&combined)?)?;
    }
    println!("{} questions from {} models", answers.len(), runs.len());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = expand_config(std::env::args_os().collect())?;
    let matches = Cli::command().get_matches_from(args);
    let cli = Cli::from_arg_matches(&matches)?;
    let common = match &cli.command {
        Command::Convert(a) => &a.common,
        Command::Vocab(a) => &a.common,
        Command::Train(a) => &a.common,
        Command::Predict(a) => &a.common,
        Command::Evaluate(a) => &a.common,
        Command::Ensemble(a) => &a.common,
    };
    if common.show_config {
        show_config(&matches);
        return Ok(());
    }
    match &cli.command {
        Command::Convert(a) => convert(a),
        Command::Vocab(a) => vocab(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Ensemble(a) => ensemble_cmd(a),
    }
}
