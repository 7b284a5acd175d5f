//! `seq2act` command line: convert, validate, train, parse, eval.
//!
//! Exit codes: 0 success, 1 data errors, 2 usage or configuration errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use seq2act::action::{format_sequence, parse_sequence, Action};
use seq2act::controller::ConstraintLevel;
use seq2act::decode::{parse_tokens, DecodeOptions, ParseResult};
use seq2act::eval::evaluate;
use seq2act::lf::{actions_to_lf, lf_to_actions, lf_to_graph, parse_lf, print_lf, LfError};
use seq2act::model::{ModelConfig, Seq2Act};
use seq2act::schema::{load_schema, KbSchema};
use seq2act::train::{
    load_checkpoint, preprocess, read_corpus, save_checkpoint, tokenize_utterance, train_with,
    EntityMatcher, TrainConfig, TrainError, TrainSchedule,
};

#[derive(Parser)]
#[command(
    name = "seq2act",
    version,
    about = "Sequence-to-action semantic parser"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a corpus between logical forms and action sequences.
    Convert(ConvertArgs),
    /// Check that every logical form is well formed and fits the schema.
    Validate(ValidateArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Parse sentences with a trained model.
    Parse(ParseArgs),
    /// Score predictions against gold logical forms.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Actions,
    Lf,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum)]
    to: Target,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    schema: PathBuf,
    /// Logical forms, one per line, optionally after an utterance and a tab.
    #[arg(long)]
    corpus: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    hidden: usize,
    #[arg(long, default_value_t = 100)]
    word_dim: usize,
    /// Words rarer than this map to `<unk>`.
    #[arg(long, default_value_t = 2)]
    min_count: usize,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    validation_fraction: f64,
    /// Per-epoch metrics as JSON lines. Defaults to the checkpoint path
    /// with `.metrics.jsonl` appended.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Sentences, one per line; anything after a tab is ignored.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "c1c2")]
    level: ConstraintLevel,
    #[arg(long, default_value_t = 5)]
    beam: usize,
    /// Emit JSON lines with per-step diagnostics instead of TSV.
    #[arg(long)]
    explain: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    schema: PathBuf,
    /// Gold corpus, `utterance<TAB>logical form`.
    #[arg(long)]
    corpus: PathBuf,
    /// Output of `parse`.
    #[arg(long)]
    predictions: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Data(String),
    Usage(String),
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn read_schema(path: &Path) -> Result<KbSchema, Failure> {
    load_schema(&read_file(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| {
                usage(format!("cannot create {}: {e}", p.display()))
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_fail(e: io::Error) -> Failure {
    usage(format!("write failed: {e}"))
}

/// Non-blank, non-comment lines with their 1-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn report_lines(errors: &[String]) -> Outcome {
    for e in errors {
        eprintln!("{e}");
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Data(format!("{} line(s) failed", errors.len())))
    }
}

fn lf_error(line: usize, e: &LfError) -> String {
    format!("line {line}: {}: {e}", e.kind())
}

fn convert(a: ConvertArgs) -> Outcome {
    let schema = read_schema(&a.schema)?;
    let text = read_file(&a.corpus)?;
    let mut out = output(a.out.as_deref())?;
    let mut errors = Vec::new();
    for (n, line) in content_lines(&text) {
        let mut cols = line.split('\t');
        let first = cols.next().unwrap_or_default();
        let (prefix, payload) = match cols.next() {
            Some(p) => (Some(first), p.trim()),
            None => (None, first.trim()),
        };
        let converted = match a.to {
            Target::Actions => parse_lf(payload, &schema)
                .and_then(|lf| lf_to_actions(&lf, &schema))
                .map(|seq| format_sequence(&seq))
                .map_err(|e| lf_error(n, &e)),
            Target::Lf => parse_sequence(payload)
                .map_err(|e| format!("line {n}: ActionSyntax: {e}"))
                .and_then(|seq| actions_to_lf(&seq, &schema).map_err(|e| lf_error(n, &e)))
                .map(|lf| print_lf(&lf)),
        };
        match converted {
            Ok(c) => match prefix {
                Some(u) => writeln!(out, "{u}\t{c}"),
                None => writeln!(out, "{c}"),
            }
            .map_err(io_fail)?,
            Err(e) => errors.push(e),
        }
    }
    out.flush().map_err(io_fail)?;
    report_lines(&errors)
}

/// Structural and schema problems of one logical form.
fn check_lf(text: &str, schema: &KbSchema) -> Result<(), String> {
    let lf = parse_lf(text, schema).map_err(|e| format!("{}: {e}", e.kind()))?;
    let graph = lf_to_graph(&lf, schema).map_err(|e| format!("{}: {e}", e.kind()))?;
    let mut problems: Vec<String> = graph
        .validate_wellformed()
        .iter()
        .map(|v| v.to_string())
        .collect();
    problems.extend(
        graph
            .schema_violations(schema)
            .iter()
            .map(|v| v.to_string()),
    );
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems.join("; "))
    }
}

fn validate(a: ValidateArgs) -> Outcome {
    let schema = read_schema(&a.schema)?;
    let text = read_file(&a.corpus)?;
    let mut errors = Vec::new();
    let mut total = 0;
    for (n, line) in content_lines(&text) {
        total += 1;
        let lf = line.split('\t').nth(1).unwrap_or(line).trim();
        if let Err(e) = check_lf(lf, &schema) {
            errors.push(format!("line {n}: {e}"));
        }
    }
    println!("{} of {total} logical forms valid", total - errors.len());
    report_lines(&errors)
}

fn train_failure(e: TrainError) -> Failure {
    match e {
        TrainError::Model(m) => usage(m.to_string()),
        other => Failure::Data(other.to_string()),
    }
}

fn train(a: TrainArgs) -> Outcome {
    let schema = read_schema(&a.schema)?;
    let corpus = read_corpus(&read_file(&a.corpus)?).map_err(train_failure)?;
    let data = preprocess(&corpus, &schema, a.min_count).map_err(train_failure)?;
    log::info!(
        "{} examples, {} words, {} actions",
        data.examples.len(),
        data.words.len(),
        data.actions.len()
    );
    let config = TrainConfig {
        model: ModelConfig {
            hidden_size: a.hidden,
            word_embed_dim: a.word_dim,
            seed: a.seed,
            ..ModelConfig::default()
        },
        schedule: TrainSchedule {
            epochs: a.epochs,
            initial_lr: a.lr,
            ..TrainSchedule::default()
        },
        clip_norm: a.clip_norm,
        validation_fraction: a.validation_fraction,
        min_word_count: a.min_count,
    };
    let metrics_path = a.out.unwrap_or_else(|| {
        let mut p = a.checkpoint.clone().into_os_string();
        p.push(".metrics.jsonl");
        p.into()
    });
    let mut metrics = output(Some(&metrics_path))?;
    let mut write_err = None;
    let (model, _) = train_with(&config, &data, |m| {
        let line = serde_json::to_string(m).expect("metrics serialize");
        if let Err(e) = writeln!(metrics, "{line}").and_then(|_| metrics.flush()) {
            write_err.get_or_insert(e);
        }
    })
    .map_err(train_failure)?;
    if let Some(e) = write_err {
        return Err(io_fail(e));
    }
    save_checkpoint(&model, &a.checkpoint).map_err(|e| usage(e.to_string()))?;
    log::info!("wrote {}", a.checkpoint.display());
    Ok(())
}

/// Actions in the model's vocabulary that the schema does not declare.
fn schema_mismatch(model: &Seq2Act, schema: &KbSchema) -> Option<String> {
    model.actions.actions().iter().find_map(|act| {
        let known = match act {
            Action::AddType(t) => schema.has_type(t),
            Action::AddEdge(r) => r == seq2act::schema::CONST_RELATION || schema.is_relation(r),
            Action::StartOperation(o) | Action::EndOperation(o) => schema.operation(o).is_some(),
            _ => true,
        };
        (!known).then(|| act.to_string())
    })
}

fn parse_line(
    model: &Seq2Act,
    schema: &KbSchema,
    matcher: &EntityMatcher,
    sentence: &str,
    opts: &DecodeOptions,
) -> Result<ParseResult, String> {
    let tokens = tokenize_utterance(sentence);
    let (tokens, map) = matcher.replace(&tokens, schema);
    parse_tokens(model, schema, &tokens, &map, opts).map_err(|e| format!("{}: {e}", e.kind()))
}

fn parse(a: ParseArgs) -> Outcome {
    let schema = read_schema(&a.schema)?;
    let model = load_checkpoint(&a.checkpoint).map_err(|e| usage(e.to_string()))?;
    if let Some(act) = schema_mismatch(&model, &schema) {
        return Err(usage(format!(
            "checkpoint {} uses `{act}`, which {} does not declare",
            a.checkpoint.display(),
            a.schema.display()
        )));
    }
    let text = read_file(&a.corpus)?;
    let inputs: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('\t').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.starts_with('#'))
        .collect();
    let opts = DecodeOptions {
        beam_size: a.beam,
        level: a.level,
        max_steps: None,
    };
    let matcher = EntityMatcher::new(&schema);
    let results = seq2act::par::map(&inputs, |(_, s)| {
        parse_line(&model, &schema, &matcher, s, &opts)
    });
    let mut out = output(a.out.as_deref())?;
    let mut failed = 0;
    for ((n, sentence), r) in inputs.iter().zip(&results) {
        if let Err(e) = r {
            failed += 1;
            log::warn!("line {n}: {e}");
        }
        if a.explain {
            let head = match r {
                Ok(p) => serde_json::json!({
                    "line": n, "utterance": sentence, "logical_form": p.logical_form,
                    "actions": format_sequence(&p.actions), "score": p.score,
                }),
                Err(e) => serde_json::json!({ "line": n, "utterance": sentence, "error": e }),
            };
            writeln!(out, "{head}").map_err(io_fail)?;
            for d in r.iter().flat_map(|p| &p.diagnostics) {
                let mut v = serde_json::to_value(d).expect("diagnostics serialize");
                v["line"] = (*n).into();
                writeln!(out, "{v}").map_err(io_fail)?;
            }
        } else {
            match r {
                Ok(p) => writeln!(out, "{sentence}\t{}\t{}", p.logical_form, p.score),
                Err(e) => writeln!(out, "{sentence}\t\t{e}"),
            }
            .map_err(io_fail)?;
        }
    }
    out.flush().map_err(io_fail)?;
    log::info!("parsed {} of {} lines", inputs.len() - failed, inputs.len());
    Ok(())
}

fn eval(a: EvalArgs) -> Outcome {
    let schema = read_schema(&a.schema)?;
    let gold: Vec<String> = read_corpus(&read_file(&a.corpus)?)
        .map_err(train_failure)?
        .into_iter()
        .map(|r| r.logical_form)
        .collect();
    let text = read_file(&a.predictions)?;
    let preds: Vec<Option<String>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            l.split('\t')
                .nth(1)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
        })
        .collect();
    if preds.len() != gold.len() {
        return Err(Failure::Data(format!(
            "LineCountMismatch: {} predictions for {} gold examples",
            preds.len(),
            gold.len()
        )));
    }
    let report = evaluate(&preds, &gold, &schema);
    print!("{}", report.table());
    if let Some(p) = &a.out {
        std::fs::write(p, report.to_json())
            .map_err(|e| usage(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SEQ2ACT_LOG", "info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert(a) => convert(a),
        Command::Validate(a) => validate(a),
        Command::Train(a) => train(a),
        Command::Parse(a) => parse(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
