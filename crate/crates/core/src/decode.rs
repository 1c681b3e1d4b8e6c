//! Greedy decoding, ancestral sampling and beam search.
//!
//! Decoders are written against [`Policy`], a step function from the
//! previously emitted id to a distribution over the extended vocabulary.
//! [`ModelPolicy`] adapts a [`PointerGenerator`] and one encoded source.
//!
//! PAD and START are never emitted: every decoder chooses among the other
//! ids, and recorded log-probabilities are those of the unmasked `p*`.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::model::{DecoderState, EncoderStates, PointerGenerator};
use crate::tensor::{Tape, PROB_FLOOR};
use crate::vocab::{EncodedSource, PAD, START, STOP};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Greedy,
    Sampled,
    Beam,
    GroundTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSequence {
    /// Extended ids, ending at STOP unless cut off at `max_dec`.
    pub ids: Vec<usize>,
    /// `ln p*(id)` for each emitted id.
    pub logprobs: Vec<f64>,
    pub provenance: Provenance,
}

impl DecodedSequence {
    /// Mean per-token log-probability, the beam-search score.
    pub fn score(&self) -> f64 {
        mean_score(&self.logprobs)
    }

    /// Ids with a trailing STOP removed.
    pub fn tokens(&self) -> &[usize] {
        match self.ids.last() {
            Some(&STOP) => &self.ids[..self.ids.len() - 1],
            _ => &self.ids,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn mean_score(logprobs: &[f64]) -> f64 {
    if logprobs.is_empty() {
        return f64::NEG_INFINITY;
    }
    logprobs.iter().sum::<f64>() / logprobs.len() as f64
}

fn log_p(p: f64) -> f64 {
    libm::log(p.max(PROB_FLOOR))
}

pub trait Policy {
    type State: Clone;

    fn extended_size(&self) -> usize;

    fn start(&self) -> Result<Self::State>;

    /// Feeds `prev` and returns `p*` for the next position.
    fn step(&self, state: &Self::State, prev: usize) -> Result<(Vec<f64>, Self::State)>;
}

/// Whether a decoder may emit `id`.
pub fn emittable(id: usize) -> bool {
    id != PAD && id != START
}

fn masked(p: &[f64]) -> Vec<f64> {
    p.iter()
        .enumerate()
        .map(|(i, &x)| if emittable(i) { x } else { 0.0 })
        .collect()
}

/// Smallest id among the maxima.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw for a uniform `u` in `[0, 1)`.
pub fn inverse_cdf(p: &[f64], u: f64) -> usize {
    let total: f64 = p.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &x) in p.iter().enumerate() {
        if x <= 0.0 {
            continue;
        }
        acc += x;
        last_positive = i;
        if target < acc {
            return i;
        }
    }
    last_positive
}

fn check_dist(p: &[f64], size: usize) -> Result<()> {
    if p.len() != size {
        return Err(Error::Shape(alloc::format!(
            "distribution of {} for extended size {size}",
            p.len()
        )));
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("decoder distribution"));
    }
    Ok(())
}

fn run<P: Policy>(
    policy: &P,
    max_dec: usize,
    provenance: Provenance,
    mut choose: impl FnMut(&[f64]) -> usize,
) -> Result<DecodedSequence> {
    let size = policy.extended_size();
    let mut state = policy.start()?;
    let mut prev = START;
    let mut ids = Vec::new();
    let mut logprobs = Vec::new();
    while ids.len() < max_dec {
        let (p, next) = policy.step(&state, prev)?;
        check_dist(&p, size)?;
        let id = choose(&p);
        ids.push(id);
        logprobs.push(log_p(p[id]));
        if id == STOP {
            break;
        }
        state = next;
        prev = id;
    }
    Ok(DecodedSequence {
        ids,
        logprobs,
        provenance,
    })
}

pub fn greedy_decode<P: Policy>(policy: &P, max_dec: usize) -> Result<DecodedSequence> {
    run(policy, max_dec, Provenance::Greedy, |p| argmax(&masked(p)))
}

pub fn sample_decode<P: Policy>(policy: &P, max_dec: usize, seed: u64) -> Result<DecodedSequence> {
    let mut rng = rng::stream(seed, &[0x5a3b]);
    run(policy, max_dec, Provenance::Sampled, |p| {
        inverse_cdf(&masked(p), rng.random::<f64>())
    })
}

/// Log-probabilities of a given id sequence under teacher forcing.
pub fn sequence_logprobs<P: Policy>(policy: &P, ids: &[usize]) -> Result<Vec<f64>> {
    let size = policy.extended_size();
    let mut state = policy.start()?;
    let mut prev = START;
    let mut out = Vec::with_capacity(ids.len());
    for &id in ids {
        if id >= size {
            return Err(Error::IdOutOfRange { id, size });
        }
        let (p, next) = policy.step(&state, prev)?;
        check_dist(&p, size)?;
        out.push(log_p(p[id]));
        state = next;
        prev = id;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Hypothesis<S> {
    pub ids: Vec<usize>,
    pub logprobs: Vec<f64>,
    pub cumulative: f64,
    pub state: S,
}

impl<S> Hypothesis<S> {
    pub fn alive(&self) -> bool {
        self.ids.last() != Some(&STOP)
    }

    fn into_sequence(self) -> DecodedSequence {
        DecodedSequence {
            ids: self.ids,
            logprobs: self.logprobs,
            provenance: Provenance::Beam,
        }
    }
}

/// Length-normalized beam search. Scores are the mean log p* over emitted
/// ids including STOP. The greedy sequence is scored alongside, so the
/// result never scores below it.
pub fn beam_search<P: Policy>(policy: &P, beam: usize, max_dec: usize) -> Result<DecodedSequence> {
    if beam == 0 {
        return Err(Error::Invalid("beam width must be at least 1".into()));
    }
    let size = policy.extended_size();
    let greedy = greedy_decode(policy, max_dec)?;
    if max_dec == 0 {
        return Ok(DecodedSequence {
            provenance: Provenance::Beam,
            ..greedy
        });
    }
    let mut alive = alloc::vec![Hypothesis {
        ids: Vec::new(),
        logprobs: Vec::new(),
        cumulative: 0.0,
        state: policy.start()?
    }];
    let mut finished: Vec<Hypothesis<P::State>> = Vec::new();
    let per_hyp = (2 * beam).min((0..size).filter(|&i| emittable(i)).count());
    for t in 0..max_dec {
        let last = t + 1 == max_dec;
        // (cumulative, parent, token, logp, next state)
        let mut cands = Vec::new();
        for (parent, hyp) in alive.iter().enumerate() {
            let prev = hyp.ids.last().copied().unwrap_or(START);
            let (p, next) = policy.step(&hyp.state, prev)?;
            check_dist(&p, size)?;
            let mut order: Vec<usize> = (0..size).filter(|&i| emittable(i)).collect();
            order.sort_by(|&a, &b| {
                p[b].partial_cmp(&p[a])
                    .unwrap_or(Ordering::Equal)
                    .then(a.cmp(&b))
            });
            for &tok in &order[..per_hyp] {
                let lp = log_p(p[tok]);
                cands.push((hyp.cumulative + lp, parent, tok, lp, next.clone()));
            }
        }
        cands.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut next_alive = Vec::new();
        let mut slots = 0;
        for (cum, parent, tok, lp, state) in cands {
            if slots == beam {
                break;
            }
            let base = &alive[parent];
            let mut ids = base.ids.clone();
            ids.push(tok);
            let mut logprobs = base.logprobs.clone();
            logprobs.push(lp);
            let hyp = Hypothesis {
                ids,
                logprobs,
                cumulative: cum,
                state,
            };
            if tok == STOP {
                finished.push(hyp);
            } else if last {
                finished.push(hyp);
                slots += 1;
            } else {
                next_alive.push(hyp);
                slots += 1;
            }
        }
        alive = next_alive;
        if alive.is_empty() || finished.len() >= beam {
            break;
        }
    }
    let pool = if finished.is_empty() { alive } else { finished };
    let best = pool
        .into_iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| {
            mean_score(&a.logprobs)
                .partial_cmp(&mean_score(&b.logprobs))
                .unwrap_or(Ordering::Equal)
                .then(j.cmp(i))
        })
        .map(|(_, h)| h.into_sequence())
        .ok_or(Error::Empty("beam"))?;
    if greedy.score() > best.score() {
        return Ok(DecodedSequence {
            provenance: Provenance::Beam,
            ..greedy
        });
    }
    Ok(best)
}

/// Decoder state as plain values, so a fresh tape can be used per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub context: Vec<f64>,
    pub coverage: Vec<f64>,
}

/// A model bound to one encoded source with the encoder run once.
pub struct ModelPolicy<'a> {
    model: &'a PointerGenerator,
    source: &'a EncodedSource,
    states: Vec<f64>,
    projected: Vec<f64>,
    final_h: Vec<f64>,
    final_c: Vec<f64>,
}

impl<'a> ModelPolicy<'a> {
    pub fn new(model: &'a PointerGenerator, source: &'a EncodedSource) -> Result<Self> {
        let mut tape = Tape::new(model.params());
        let enc = model.encode(&mut tape, &source.ids)?;
        Ok(ModelPolicy {
            model,
            source,
            states: tape.value(enc.states).to_vec(),
            projected: tape.value(enc.projected).to_vec(),
            final_h: tape.value(enc.final_h).to_vec(),
            final_c: tape.value(enc.final_c).to_vec(),
        })
    }
}

impl Policy for ModelPolicy<'_> {
    type State = ModelState;

    fn extended_size(&self) -> usize {
        self.source.extended_size()
    }

    fn start(&self) -> Result<ModelState> {
        Ok(ModelState {
            h: self.final_h.clone(),
            c: self.final_c.clone(),
            context: alloc::vec![0.0; self.model.config().hidden],
            coverage: alloc::vec![0.0; self.source.len()],
        })
    }

    fn step(&self, state: &ModelState, prev: usize) -> Result<(Vec<f64>, ModelState)> {
        let mut tape = Tape::new(self.model.params());
        let (t, h) = (self.source.len(), self.model.config().hidden);
        let enc = EncoderStates {
            states: tape.leaf(t, h, self.states.clone()),
            projected: tape.leaf(t, h, self.projected.clone()),
            final_h: tape.vector(self.final_h.clone()),
            final_c: tape.vector(self.final_c.clone()),
            len: t,
        };
        let ds = DecoderState {
            h: tape.vector(state.h.clone()),
            c: tape.vector(state.c.clone()),
            context: tape.vector(state.context.clone()),
            coverage: tape.vector(state.coverage.clone()),
        };
        let (out, next) = self
            .model
            .decode_step(&mut tape, prev, &ds, &enc, self.source)?;
        Ok((
            tape.value(out.dist).to_vec(),
            ModelState {
                h: tape.value(next.h).to_vec(),
                c: tape.value(next.c).to_vec(),
                context: tape.value(next.context).to_vec(),
                coverage: tape.value(next.coverage).to_vec(),
            },
        ))
    }
}
