use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;
use core::str::FromStr;

use super::config::TrainConfig;
use super::loss::{interpolate_on_tape, self_critic_loss, trl_loss};
use super::optim::AdaGrad;
use super::schedule::{
    eta_schedule, lr_schedule, scheduled_sampling_choice, zeta_schedule, SamplingChoice,
};
use crate::corpus::{batch_indices, Dataset, Example};
use crate::decode::{argmax, greedy_decode, sample_decode, ModelPolicy};
use crate::model::{ModelConfig, PointerGenerator};
use crate::rouge::{reward, RewardConfig};
use crate::tensor::{Gradients, Tape, Var};
use crate::vocab::{
    encode_reference, encode_source, encode_target, EncodedSource, Vocab, START, STOP, UNK,
};
use crate::{rng, Error, Result};

const SEED_INIT: u64 = 0x1417;
const PHASE_PRETRAIN: u64 = 1;
const PHASE_COVERAGE: u64 = 2;
const PHASE_TRANSFER: u64 = 3;
const PHASE_SOURCE_CYCLE: u64 = 4;
const STREAM_CE: u64 = 10;
const STREAM_SOURCE: u64 = 11;
const STREAM_TARGET: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferMode {
    /// Continue cross-entropy training on the target dataset only.
    Tl,
    /// Mixed cross-entropy and dual-dataset self-critic training.
    Trl,
}

impl FromStr for TransferMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tl" => Ok(TransferMode::Tl),
            "trl" => Ok(TransferMode::Trl),
            _ => Err(Error::UnknownMode(s.into())),
        }
    }
}

/// An example encoded once for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub src: EncodedSource,
    /// Extended target ids; STOP is appended unless the summary fills
    /// `max_dec`.
    pub target: Vec<usize>,
    /// Reward reference, see [`encode_reference`].
    pub reference: Vec<usize>,
}

pub fn prepare(
    ex: &Example,
    vocab: &Vocab,
    max_enc: usize,
    max_dec: usize,
    pointer: bool,
) -> Prepared {
    let article = &ex.article[..ex.article.len().min(max_enc)];
    let summary = &ex.summary[..ex.summary.len().min(max_dec)];
    let src = encode_source(article, vocab);
    let mut target = encode_target(summary, vocab, &src.mapping);
    if !pointer {
        for id in &mut target {
            if *id >= vocab.size() {
                *id = UNK;
            }
        }
    }
    if target.len() < max_dec {
        target.push(STOP);
    }
    let reference = encode_reference(summary, vocab, &src.mapping);
    Prepared {
        src,
        target,
        reference,
    }
}

pub fn model_config(cfg: &TrainConfig, vocab: &Vocab) -> ModelConfig {
    ModelConfig {
        vocab_size: vocab.size(),
        emb: cfg.emb,
        hidden: cfg.hidden,
        coverage: false,
        pointer: cfg.pointer,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub step: usize,
    /// Per-token cross-entropy.
    pub loss_ce: f64,
    pub loss_rl: f64,
    pub zeta: f64,
    pub eta: f64,
    pub lr: f64,
}

pub const LOG_HEADER: &str = "epoch,step,loss_ce,loss_rl,zeta,eta,lr";

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.epoch, r.step, r.loss_ce, r.loss_rl, r.zeta, r.eta, r.lr
        );
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: PointerGenerator,
    pub log: Vec<LogRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Value of the optimized objective.
    pub loss: f64,
    pub loss_ce: f64,
    pub loss_rl: f64,
    pub grad_norm: f64,
}

struct CeTerms {
    nll: Var,
    coverage: Option<Var>,
    tokens: usize,
}

/// Teacher-forced pass over the target. With probability `zeta` per step
/// the next input is the argmax of the current distribution instead of the
/// ground-truth token.
fn ce_terms(
    model: &PointerGenerator,
    tape: &mut Tape<'_>,
    ex: &Prepared,
    zeta: f64,
    seed: u64,
) -> Result<CeTerms> {
    let mut rng = rng::stream(seed, &[]);
    let enc = model.encode(tape, &ex.src.ids)?;
    let mut state = model.initial_state(tape, &enc);
    let mut prev = START;
    let mut logs = Vec::with_capacity(ex.target.len());
    let mut cov = Vec::new();
    for &y in &ex.target {
        let (out, next) = model.decode_step(tape, prev, &state, &enc, &ex.src)?;
        if y >= tape.size(out.dist) {
            return Err(Error::IdOutOfRange {
                id: y,
                size: tape.size(out.dist),
            });
        }
        logs.push(tape.log_pick(out.dist, y));
        if model.config().coverage {
            cov.push(tape.min_sum(out.attention, state.coverage));
        }
        prev = if zeta > 0.0
            && scheduled_sampling_choice(zeta, &mut rng) == SamplingChoice::ModelOutput
        {
            argmax(tape.value(out.dist))
        } else {
            y
        };
        state = next;
    }
    let total = tape.sum(&logs);
    let nll = tape.scale(total, -1.0);
    let coverage = if cov.is_empty() {
        None
    } else {
        Some(tape.sum(&cov))
    };
    Ok(CeTerms {
        nll,
        coverage,
        tokens: ex.target.len(),
    })
}

/// Batch-mean CE objective (with `λ` times the coverage loss) and the
/// per-token CE for logging.
pub fn ce_objective(
    model: &PointerGenerator,
    tape: &mut Tape<'_>,
    batch: &[&Prepared],
    zeta: f64,
    lambda: f64,
    seed: u64,
) -> Result<(Var, f64)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut parts = Vec::with_capacity(batch.len());
    let (mut nll_total, mut tokens) = (0.0, 0);
    for (i, ex) in batch.iter().enumerate() {
        let t = ce_terms(
            model,
            tape,
            ex,
            zeta,
            rng::derive(seed, &[STREAM_CE, i as u64]),
        )?;
        nll_total += tape.scalar(t.nll);
        tokens += t.tokens;
        parts.push(t.nll);
        if let (Some(c), true) = (t.coverage, lambda > 0.0) {
            parts.push(tape.scale(c, lambda));
        }
    }
    let sum = tape.sum(&parts);
    Ok((
        tape.scale(sum, 1.0 / batch.len() as f64),
        nll_total / tokens as f64,
    ))
}

/// Self-critic term for one example: greedy and sampled decodes, then the
/// sampled ids re-scored on the tape and weighted by the advantage.
/// Returns `None` for the graph when the advantage is zero, with the loss
/// value alongside.
pub fn self_critic_term(
    model: &PointerGenerator,
    tape: &mut Tape<'_>,
    ex: &Prepared,
    max_dec: usize,
    reward_cfg: &RewardConfig,
    seed: u64,
) -> Result<(Option<Var>, f64)> {
    let policy = ModelPolicy::new(model, &ex.src)?;
    let greedy = greedy_decode(&policy, max_dec)?;
    let sampled = sample_decode(&policy, max_dec, seed)?;
    let r_greedy = reward(greedy.tokens(), &ex.reference, reward_cfg);
    let r_sampled = reward(sampled.tokens(), &ex.reference, reward_cfg);
    let value = self_critic_loss(&sampled.logprobs, r_sampled, r_greedy);
    let advantage = r_sampled - r_greedy;
    if advantage == 0.0 {
        return Ok((None, value));
    }
    let enc = model.encode(tape, &ex.src.ids)?;
    let mut state = model.initial_state(tape, &enc);
    let mut prev = START;
    let mut logs = Vec::with_capacity(sampled.ids.len());
    for &id in &sampled.ids {
        let (out, next) = model.decode_step(tape, prev, &state, &enc, &ex.src)?;
        logs.push(tape.log_pick(out.dist, id));
        state = next;
        prev = id;
    }
    let total = tape.sum(&logs);
    Ok((Some(tape.scale(total, -advantage)), value))
}

fn sc_batch(
    model: &PointerGenerator,
    tape: &mut Tape<'_>,
    batch: &[&Prepared],
    max_dec: usize,
    reward_cfg: &RewardConfig,
    seed: u64,
    stream: u64,
) -> Result<(Var, f64)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut parts = Vec::new();
    let mut value = 0.0;
    for (i, ex) in batch.iter().enumerate() {
        let (var, v) = self_critic_term(
            model,
            tape,
            ex,
            max_dec,
            reward_cfg,
            rng::derive(seed, &[stream, i as u64]),
        )?;
        parts.extend(var);
        value += v;
    }
    let n = batch.len() as f64;
    let var = if parts.is_empty() {
        tape.constant(0.0)
    } else {
        let s = tape.sum(&parts);
        tape.scale(s, 1.0 / n)
    };
    Ok((var, value / n))
}

fn apply(
    model: &mut PointerGenerator,
    opt: &mut AdaGrad,
    lr: f64,
    build: impl FnOnce(&PointerGenerator, &mut Tape<'_>) -> Result<(Var, f64, f64)>,
) -> Result<StepReport> {
    let (grads, loss, loss_ce, loss_rl): (Gradients, f64, f64, f64) = {
        let mut tape = Tape::new(model.params());
        let (var, loss_ce, loss_rl) = build(model, &mut tape)?;
        (tape.backward(var)?, tape.scalar(var), loss_ce, loss_rl)
    };
    let grad_norm = opt.step(model.params_mut(), &grads, lr)?;
    Ok(StepReport {
        loss,
        loss_ce,
        loss_rl,
        grad_norm,
    })
}

/// One cross-entropy update, with coverage loss weight `lambda` when the
/// model has coverage enabled.
pub fn ce_step(
    model: &mut PointerGenerator,
    opt: &mut AdaGrad,
    batch: &[&Prepared],
    lr: f64,
    lambda: f64,
    seed: u64,
) -> Result<StepReport> {
    apply(model, opt, lr, |m, tape| {
        let (var, ce) = ce_objective(m, tape, batch, 0.0, lambda, seed)?;
        Ok((var, ce, 0.0))
    })
}

/// Which half of a transfer pair a batch plays. Each side draws its samples
/// from its own stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

impl Side {
    fn stream(self) -> u64 {
        match self {
            Side::Source => STREAM_SOURCE,
            Side::Target => STREAM_TARGET,
        }
    }
}

/// Batch-mean self-critic objective on a single dataset.
pub fn self_critic_objective(
    model: &PointerGenerator,
    tape: &mut Tape<'_>,
    batch: &[&Prepared],
    side: Side,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Var, f64)> {
    sc_batch(
        model,
        tape,
        batch,
        cfg.max_dec,
        &cfg.reward,
        seed,
        side.stream(),
    )
}

/// One self-critic update on a single dataset.
pub fn self_critic_step(
    model: &mut PointerGenerator,
    opt: &mut AdaGrad,
    batch: &[&Prepared],
    lr: f64,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<StepReport> {
    apply(model, opt, lr, |m, tape| {
        let (var, value) = self_critic_objective(m, tape, batch, Side::Source, cfg, seed)?;
        Ok((var, 0.0, value))
    })
}

/// The mixed objective on the tape: `(1-η) CE(target) + η TRL`, where TRL
/// interpolates the source and target self-critic terms by `ζ`.
#[allow(clippy::too_many_arguments)]
pub fn trl_objective(
    model: &PointerGenerator,
    tape: &mut Tape<'_>,
    source: &[&Prepared],
    target: &[&Prepared],
    zeta: f64,
    eta: f64,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Var, f64, f64)> {
    let lambda = if model.config().coverage {
        cfg.coverage_lambda
    } else {
        0.0
    };
    let (ce, ce_tok) = ce_objective(model, tape, target, zeta, lambda, seed)?;
    let (sc_s, v_s) = self_critic_objective(model, tape, source, Side::Source, cfg, seed)?;
    let (sc_g, v_g) = self_critic_objective(model, tape, target, Side::Target, cfg, seed)?;
    let trl = interpolate_on_tape(tape, Some(sc_s), Some(sc_g), zeta)?;
    let total = interpolate_on_tape(tape, Some(ce), Some(trl), eta)?;
    Ok((total, ce_tok, trl_loss(v_s, v_g, zeta)?))
}

#[allow(clippy::too_many_arguments)]
pub fn trl_step(
    model: &mut PointerGenerator,
    opt: &mut AdaGrad,
    source: &[&Prepared],
    target: &[&Prepared],
    zeta: f64,
    eta: f64,
    lr: f64,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<StepReport> {
    apply(model, opt, lr, |m, tape| {
        trl_objective(m, tape, source, target, zeta, eta, cfg, seed)
    })
}

/// Per-token teacher-forced cross-entropy, no update.
pub fn mean_ce(model: &PointerGenerator, examples: &[Prepared]) -> Result<f64> {
    let mut tape = Tape::new(model.params());
    let refs: Vec<&Prepared> = examples.iter().collect();
    Ok(ce_objective(model, &mut tape, &refs, 0.0, 0.0, 0)?.1)
}

fn prepare_all(ds: &Dataset, vocab: &Vocab, cfg: &TrainConfig) -> Result<Vec<Prepared>> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    Ok(ds
        .examples()
        .iter()
        .map(|e| prepare(e, vocab, cfg.max_enc, cfg.max_dec, cfg.pointer))
        .collect())
}

fn pick<'a>(all: &'a [Prepared], idx: &[usize]) -> Vec<&'a Prepared> {
    idx.iter().map(|&i| &all[i]).collect()
}

/// A freshly initialized model for `cfg` and `vocab`, as pretraining
/// starts from.
pub fn init_model(cfg: &TrainConfig, vocab: &Vocab) -> Result<PointerGenerator> {
    PointerGenerator::new(
        model_config(cfg, vocab),
        rng::derive(cfg.seed, &[SEED_INIT]),
        cfg.init_scale,
    )
}

/// Cross-entropy pretraining, followed by `epochs_coverage` epochs with
/// coverage on at the RL learning rate.
pub fn train_pretrain(cfg: &TrainConfig, ds: &Dataset, vocab: &Vocab) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data = prepare_all(ds, vocab, cfg)?;
    let mut model = init_model(cfg, vocab)?;
    let mut opt = AdaGrad::new(model.params(), cfg.grad_clip);
    let mut log = Vec::new();
    let mut step = 0;
    let phases = [
        (
            PHASE_PRETRAIN,
            cfg.epochs_pretrain,
            cfg.gamma0_pretrain,
            false,
        ),
        (PHASE_COVERAGE, cfg.epochs_coverage, cfg.gamma0_rl, true),
    ];
    let mut global_epoch = 0;
    for (phase, epochs, gamma0, coverage) in phases {
        if epochs == 0 {
            continue;
        }
        model.set_coverage(coverage);
        let lambda = if coverage { cfg.coverage_lambda } else { 0.0 };
        for epoch in 1..=epochs {
            global_epoch += 1;
            let lr = lr_schedule(gamma0, epoch)?;
            let phase_seed = rng::derive(cfg.seed, &[phase]);
            for idx in batch_indices(data.len(), cfg.batch_size, phase_seed, epoch as u64)? {
                step += 1;
                let batch = pick(&data, &idx);
                let r = ce_step(
                    &mut model,
                    &mut opt,
                    &batch,
                    lr,
                    lambda,
                    rng::derive(phase_seed, &[step as u64]),
                )?;
                log.push(LogRow {
                    epoch: global_epoch,
                    step,
                    loss_ce: r.loss_ce,
                    loss_rl: 0.0,
                    zeta: 0.0,
                    eta: 0.0,
                    lr,
                });
            }
        }
    }
    Ok(TrainOutcome { model, log })
}

/// Transfer from a pretrained model to the target dataset `dg`.
///
/// TL ignores `ds` entirely. TRL pairs every target batch with the next
/// batch of a reshuffled cycle over `ds`; `ζ` and `η` follow their
/// schedules over the whole run. The optimizer state starts fresh.
pub fn train_transfer(
    cfg: &TrainConfig,
    mut model: PointerGenerator,
    vocab: &Vocab,
    ds: &Dataset,
    dg: &Dataset,
    mode: TransferMode,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if model.config().vocab_size != vocab.size() {
        return Err(Error::Shape(format!(
            "model vocabulary {} differs from {}",
            model.config().vocab_size,
            vocab.size()
        )));
    }
    let target = prepare_all(dg, vocab, cfg)?;
    let mut opt = AdaGrad::new(model.params(), cfg.grad_clip);
    let lambda = if model.config().coverage {
        cfg.coverage_lambda
    } else {
        0.0
    };
    let phase_seed = rng::derive(cfg.seed, &[PHASE_TRANSFER]);
    let per_epoch = target.len().div_ceil(cfg.batch_size);
    let total = per_epoch * cfg.epochs_transfer;
    let mut log = Vec::with_capacity(total);

    let source = match mode {
        TransferMode::Tl => Vec::new(),
        TransferMode::Trl => prepare_all(ds, vocab, cfg)?,
    };
    let cycle_seed = rng::derive(cfg.seed, &[PHASE_SOURCE_CYCLE]);
    let mut cycle: Vec<Vec<usize>> = Vec::new();
    let mut cycle_epoch = 0u64;

    let mut step = 0;
    for epoch in 1..=cfg.epochs_transfer {
        for idx in batch_indices(target.len(), cfg.batch_size, phase_seed, epoch as u64)? {
            step += 1;
            let step_seed = rng::derive(phase_seed, &[step as u64]);
            let batch = pick(&target, &idx);
            let row = match mode {
                TransferMode::Tl => {
                    let lr = lr_schedule(cfg.gamma0_pretrain, epoch)?;
                    let r = ce_step(&mut model, &mut opt, &batch, lr, lambda, step_seed)?;
                    LogRow {
                        epoch,
                        step,
                        loss_ce: r.loss_ce,
                        loss_rl: 0.0,
                        zeta: 0.0,
                        eta: 0.0,
                        lr,
                    }
                }
                TransferMode::Trl => {
                    let lr = lr_schedule(cfg.gamma0_rl, epoch)?;
                    let zeta = zeta_schedule(step, total, cfg.zeta_clip)?;
                    let eta = eta_schedule(cfg.eta_schedule, step, total, cfg.eta_max)?;
                    if cycle.is_empty() {
                        cycle_epoch += 1;
                        cycle =
                            batch_indices(source.len(), cfg.batch_size, cycle_seed, cycle_epoch)?;
                        cycle.reverse();
                    }
                    let sidx = cycle.pop().ok_or(Error::Empty("source dataset"))?;
                    let sbatch = pick(&source, &sidx);
                    let r = trl_step(
                        &mut model, &mut opt, &sbatch, &batch, zeta, eta, lr, cfg, step_seed,
                    )?;
                    LogRow {
                        epoch,
                        step,
                        loss_ce: r.loss_ce,
                        loss_rl: r.loss_rl,
                        zeta,
                        eta,
                        lr,
                    }
                }
            };
            log.push(row);
        }
    }
    Ok(TrainOutcome { model, log })
}
