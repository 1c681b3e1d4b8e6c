use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use trlsum_core::checkpoint::Checkpoint;
use trlsum_core::corpus::{gen_synthetic, merge_datasets, Dataset, Role, Task, VocabProfile};
use trlsum_core::eval::{score_example, summarize, DatasetScores, EvalReport};
use trlsum_core::rouge::RougeScores;
use trlsum_core::train::{
    log_csv, train_pretrain, train_transfer, LogRow, TrainConfig, TransferMode,
};
use trlsum_core::vocab::{build_vocab, Vocab};

use crate::io::{self, IoError};

#[derive(Parser, Debug)]
#[command(
    name = "trlsum",
    version,
    about = "Pointer-generator summarization with transfer reinforcement learning"
)]
struct Cli {
    /// Overrides the seed of the config or generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic corpus
    GenSynthetic(GenArgs),
    /// Build a vocabulary from one or more corpora
    BuildVocab(VocabArgs),
    /// Cross-entropy pretraining
    Pretrain(PretrainArgs),
    /// Transfer a pretrained checkpoint to a target corpus
    Transfer(TransferArgs),
    /// Beam-decode summaries, one per line
    Decode(DecodeArgs),
    /// ROUGE report over test corpora
    Evaluate(EvalArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_parser = parse_task)]
    task: Task,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = VocabProfile::default().frequent)]
    frequent: usize,
    #[arg(long, default_value_t = VocabProfile::default().rare)]
    rare: usize,
    #[arg(long, default_value_t = 0)]
    rare_offset: usize,
    #[arg(long, default_value_t = VocabProfile::default().rare_rate)]
    rare_rate: f64,
}

#[derive(Args, Debug)]
struct VocabArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    data: Vec<PathBuf>,
    #[arg(long, default_value_t = TrainConfig::default().vocab_k)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PretrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Built from the data with `vocab_k` words if absent.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Training log as CSV.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TransferArgs {
    #[arg(long, value_parser = parse_mode)]
    mode: TransferMode,
    /// Defaults to the config stored in the checkpoint.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Source corpus, required for `trl`.
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Checked against the checkpoint vocabulary.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    test: Vec<PathBuf>,
    /// One per test corpus; defaults to the corpus sizes.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    beam: Option<usize>,
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    s.parse().map_err(|e: trlsum_core::Error| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<TransferMode, String> {
    s.parse().map_err(|e: trlsum_core::Error| e.to_string())
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    File(#[from] IoError),
    #[error("{0}")]
    Data(#[from] trlsum_core::Error),
}

type Result<T> = std::result::Result<T, CliError>;

/// Parses `argv` (program name first) and runs the subcommand. Returns 0 on
/// success, 1 on usage errors and 2 on data or model errors.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e @ CliError::Usage(_)) => {
            eprintln!("error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::GenSynthetic(a) => gen(a, seed.unwrap_or(0)),
        Command::BuildVocab(a) => vocab(a),
        Command::Pretrain(a) => pretrain(a, seed),
        Command::Transfer(a) => transfer(a, seed),
        Command::Decode(a) => decode(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

fn gen(a: GenArgs, seed: u64) -> Result<()> {
    let profile = VocabProfile {
        frequent: a.frequent,
        rare: a.rare,
        rare_offset: a.rare_offset,
        rare_rate: a.rare_rate,
    };
    let ds = gen_synthetic(a.task, a.n, seed, &profile)?;
    io::write_corpus(&a.out, &ds)?;
    eprintln!("wrote {} examples to {}", ds.len(), a.out.display());
    Ok(())
}

fn read_merged(paths: &[PathBuf]) -> Result<Dataset> {
    let mut sets = paths.iter().map(|p| io::read_corpus(p, Role::Source));
    let first = sets
        .next()
        .ok_or_else(|| CliError::Usage("no corpus given".into()))??;
    sets.try_fold(first, |acc, next| Ok(merge_datasets(&acc, &next?)?))
}

fn vocab(a: VocabArgs) -> Result<()> {
    let ds = read_merged(&a.data)?;
    let v = build_vocab(&ds, a.k)?;
    io::write_vocab(&a.out, &v)?;
    eprintln!("vocabulary of {} ids from {} examples", v.size(), ds.len());
    Ok(())
}

fn write_log(path: Option<&Path>, rows: &[LogRow]) -> Result<()> {
    if let Some(p) = path {
        io::write(p, log_csv(rows))?;
    }
    Ok(())
}

fn report_progress(what: &str, rows: &[LogRow]) {
    if let Some(last) = rows.last() {
        eprintln!(
            "{what}: {} steps, last loss_ce {:.4} loss_rl {:.4}",
            last.step, last.loss_ce, last.loss_rl
        );
    }
}

fn pretrain(a: PretrainArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => io::read_config(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let ds = io::read_corpus(&a.data, Role::Source)?;
    let vocab = match &a.vocab {
        Some(p) => io::read_vocab(p)?,
        None => build_vocab(&ds, cfg.vocab_k)?,
    };
    let out = train_pretrain(&cfg, &ds, &vocab).map_err(|source| IoError::Data {
        path: a.data.clone(),
        source,
    })?;
    report_progress("pretrain", &out.log);
    write_log(a.log.as_deref(), &out.log)?;
    io::write_checkpoint(
        &a.out,
        &Checkpoint {
            model: out.model,
            config: cfg,
            vocab,
        },
    )?;
    Ok(())
}

fn check_vocab(expected: &Vocab, path: &Path) -> Result<()> {
    let given = io::read_vocab(path)?;
    if given.content_hash() != expected.content_hash() {
        let source = trlsum_core::Error::VocabMismatch {
            expected: expected.content_hash(),
            found: given.content_hash(),
        };
        return Err(IoError::Data {
            path: path.to_path_buf(),
            source,
        }
        .into());
    }
    Ok(())
}

fn transfer(a: TransferArgs, seed: Option<u64>) -> Result<()> {
    let ck = io::read_checkpoint(&a.checkpoint)?;
    if let Some(p) = &a.vocab {
        check_vocab(&ck.vocab, p)?;
    }
    let mut cfg = match &a.config {
        Some(p) => io::read_config(p)?,
        None => ck.config.clone(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let mc = *ck.model_config();
    cfg.hidden = mc.hidden;
    cfg.emb = mc.emb;
    cfg.pointer = mc.pointer;
    let dg = io::read_corpus(&a.target, Role::Target)?;
    let ds = match (a.mode, &a.source) {
        (_, Some(p)) if a.mode == TransferMode::Trl => io::read_corpus(p, Role::Source)?,
        (TransferMode::Trl, None) => {
            return Err(CliError::Usage(
                "--source is required with --mode trl".into(),
            ))
        }
        _ => Dataset::new("unused", Role::Source, Vec::new())?,
    };
    let out = train_transfer(&cfg, ck.model, &ck.vocab, &ds, &dg, a.mode).map_err(|source| {
        IoError::Data {
            path: a.target.clone(),
            source,
        }
    })?;
    report_progress("transfer", &out.log);
    write_log(a.log.as_deref(), &out.log)?;
    io::write_checkpoint(
        &a.out,
        &Checkpoint {
            model: out.model,
            config: cfg,
            vocab: ck.vocab,
        },
    )?;
    Ok(())
}

fn decode(a: DecodeArgs) -> Result<()> {
    let ck = io::read_checkpoint(&a.checkpoint)?;
    let ds = io::read_corpus(&a.data, Role::Test)?;
    let beam = a.beam.unwrap_or(ck.config.beam);
    let (max_enc, max_dec) = (ck.config.max_enc, ck.config.max_dec);
    let lines = ds
        .examples()
        .par_iter()
        .map(|ex| {
            let article = &ex.article[..ex.article.len().min(max_enc)];
            summarize(&ck.model, &ck.vocab, article, beam, max_dec).map(|w| w.join(" "))
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|source| IoError::Data {
            path: a.data.clone(),
            source,
        })?;
    let mut text = lines.join("\n");
    text.push('\n');
    match &a.out {
        Some(p) => io::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn evaluate(a: EvalArgs) -> Result<()> {
    let ck = io::read_checkpoint(&a.checkpoint)?;
    let beam = a.beam.unwrap_or(ck.config.beam);
    if let Some(w) = &a.weights {
        if w.len() != a.test.len() {
            return Err(CliError::Usage(format!(
                "{} weights for {} test corpora",
                w.len(),
                a.test.len()
            )));
        }
    }
    let mut rows = Vec::with_capacity(a.test.len());
    for (i, path) in a.test.iter().enumerate() {
        let ds = io::read_corpus(path, Role::Test)?;
        let all = ds
            .examples()
            .par_iter()
            .map(|ex| {
                score_example(
                    &ck.model,
                    &ck.vocab,
                    ex,
                    beam,
                    ck.config.max_enc,
                    ck.config.max_dec,
                )
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|source| IoError::Data {
                path: path.clone(),
                source,
            })?;
        let weight = a.weights.as_ref().map_or(ds.len() as f64, |w| w[i]);
        rows.push(DatasetScores {
            name: ds.name.clone(),
            weight,
            scores: RougeScores::mean(&all),
        });
    }
    let report = EvalReport::new(rows).map_err(|e| match e {
        trlsum_core::Error::Invalid(msg) => CliError::Usage(msg),
        other => other.into(),
    })?;
    print!("{}", report.render());
    Ok(())
}
