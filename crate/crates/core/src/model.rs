//! The pointer-generator network.
//!
//! Per decoder step `j`, with encoder states `h_i` and decoder state `s_j`:
//!
//! ```text
//! f_ij  = v1 · tanh(W_h h_i + W_s s_j + b1 [+ w_cov cov_ij])
//! α_j   = softmax(f_j)
//! c_j   = Σ_i α_ij h_i
//! p_voc = softmax(V2 (V3 [s_j ⊕ c_j] + b2) + b3)
//! σ_j   = sigmoid(w_c·c_j + w_s·s_j + w_x·x_j + b4)
//! p*_j  = σ_j p_voc (padded to the extended size) + (1 - σ_j) scatter(α_j)
//! ```
//!
//! The decoder LSTM reads `[e(y_{j-1}) ⊕ c_{j-1}]` and starts from the final
//! encoder state with `c_0 = 0`. Ids at or above the vocabulary size embed as
//! UNK. With coverage on, `cov_j` is the sum of all earlier attention vectors.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::tensor::{lstm_cell, ParamId, ParamStore, Tape, Tensor, Var};
use crate::vocab::{EncodedSource, UNK};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub emb: usize,
    pub hidden: usize,
    /// Adds the coverage term to the attention energies.
    pub coverage: bool,
    /// `false` forces σ = 1: a plain attention decoder that cannot copy.
    pub pointer: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ParamIds {
    embedding: ParamId,
    enc_w: ParamId,
    enc_b: ParamId,
    dec_w: ParamId,
    dec_b: ParamId,
    attn_wh: ParamId,
    attn_ws: ParamId,
    attn_b: ParamId,
    attn_v: ParamId,
    attn_wcov: ParamId,
    out_v3: ParamId,
    out_b2: ParamId,
    out_v2: ParamId,
    out_b3: ParamId,
    switch_wc: ParamId,
    switch_ws: ParamId,
    switch_wx: ParamId,
    switch_b: ParamId,
}

/// `(name, rows, cols, is_bias)` for every tensor, in store order.
pub fn param_layout(cfg: &ModelConfig) -> Vec<(&'static str, usize, usize, bool)> {
    let (v, e, h) = (cfg.vocab_size, cfg.emb, cfg.hidden);
    alloc::vec![
        ("embedding", v, e, false),
        ("enc_lstm_w", 4 * h, e + h, false),
        ("enc_lstm_b", 4 * h, 1, true),
        ("dec_lstm_w", 4 * h, e + 2 * h, false),
        ("dec_lstm_b", 4 * h, 1, true),
        ("attn_wh", h, h, false),
        ("attn_ws", h, h, false),
        ("attn_b", h, 1, true),
        ("attn_v", h, 1, false),
        ("attn_wcov", h, 1, false),
        ("out_v3", h, 2 * h, false),
        ("out_b2", h, 1, true),
        ("out_v2", v, h, false),
        ("out_b3", v, 1, true),
        ("switch_wc", 1, h, false),
        ("switch_ws", 1, h, false),
        ("switch_wx", 1, e, false),
        ("switch_b", 1, 1, true),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointerGenerator {
    config: ModelConfig,
    params: ParamStore,
    ids: ParamIds,
}

#[derive(Debug, Clone, Copy)]
pub struct EncoderStates {
    /// `h_1..h_T` stacked, `T x H`.
    pub states: Var,
    /// `W_h h_i` stacked, `T x H`.
    pub projected: Var,
    pub final_h: Var,
    pub final_c: Var,
    pub len: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct DecoderState {
    pub h: Var,
    pub c: Var,
    /// Context vector of the previous step.
    pub context: Var,
    pub coverage: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutput {
    pub attention: Var,
    pub context: Var,
    pub switch: Var,
    pub p_vocab: Var,
    /// Final distribution over the extended vocabulary.
    pub dist: Var,
}

impl PointerGenerator {
    /// Matrices uniform in `(-init_scale, init_scale)`, biases zero.
    pub fn new(config: ModelConfig, seed: u64, init_scale: f64) -> Result<Self> {
        validate(&config)?;
        if !(init_scale > 0.0 && init_scale.is_finite()) {
            return Err(Error::Invalid(format!("init_scale {init_scale}")));
        }
        let mut rng = rng::stream(seed, &[0x1417]);
        let mut params = ParamStore::new();
        let s = init_scale as f32;
        for (name, rows, cols, bias) in param_layout(&config) {
            let data = if bias {
                alloc::vec![0.0; rows * cols]
            } else {
                (0..rows * cols).map(|_| rng.random_range(-s..s)).collect()
            };
            params.add(Tensor::new(name, rows, cols, data)?)?;
        }
        Self::from_params(config, params)
    }

    /// Wraps an existing store; every tensor of [`param_layout`] must be
    /// present with the right shape.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        validate(&config)?;
        let layout = param_layout(&config);
        if params.len() != layout.len() {
            return Err(Error::Shape(format!(
                "{} tensors, expected {}",
                params.len(),
                layout.len()
            )));
        }
        let mut found = Vec::with_capacity(layout.len());
        for (name, rows, cols, _) in layout {
            let id = params
                .find(name)
                .ok_or_else(|| Error::Shape(format!("missing parameter `{name}`")))?;
            let t = params.get(id);
            if (t.rows, t.cols) != (rows, cols) {
                return Err(Error::Shape(format!(
                    "{name}: {}x{}, expected {rows}x{cols}",
                    t.rows, t.cols
                )));
            }
            found.push(id);
        }
        let ids = ParamIds {
            embedding: found[0],
            enc_w: found[1],
            enc_b: found[2],
            dec_w: found[3],
            dec_b: found[4],
            attn_wh: found[5],
            attn_ws: found[6],
            attn_b: found[7],
            attn_v: found[8],
            attn_wcov: found[9],
            out_v3: found[10],
            out_b2: found[11],
            out_v2: found[12],
            out_b3: found[13],
            switch_wc: found[14],
            switch_ws: found[15],
            switch_wx: found[16],
            switch_b: found[17],
        };
        Ok(PointerGenerator {
            config,
            params,
            ids,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore {
        self.params
    }

    pub fn set_coverage(&mut self, on: bool) {
        self.config.coverage = on;
    }

    pub fn set_pointer(&mut self, on: bool) {
        self.config.pointer = on;
    }

    fn embed(&self, tape: &mut Tape<'_>, id: usize) -> Var {
        let e = tape.param(self.ids.embedding);
        let row = if id < self.config.vocab_size { id } else { UNK };
        tape.row(e, row)
    }

    /// Runs the encoder LSTM over source ids. Ids outside the base
    /// vocabulary embed as UNK.
    pub fn encode(&self, tape: &mut Tape<'_>, ids: &[usize]) -> Result<EncoderStates> {
        if ids.is_empty() {
            return Err(Error::Empty("encoder input"));
        }
        let h0 = tape.zeros(self.config.hidden);
        let (mut h, mut c) = (h0, h0);
        let (w, b) = (tape.param(self.ids.enc_w), tape.param(self.ids.enc_b));
        let wh = tape.param(self.ids.attn_wh);
        let mut states = Vec::with_capacity(ids.len());
        let mut projected = Vec::with_capacity(ids.len());
        for &id in ids {
            let x = self.embed(tape, id);
            (h, c) = lstm_cell(tape, x, h, c, w, b)?;
            states.push(h);
            projected.push(tape.matvec(wh, h));
        }
        Ok(EncoderStates {
            states: tape.stack_rows(&states),
            projected: tape.stack_rows(&projected),
            final_h: h,
            final_c: c,
            len: ids.len(),
        })
    }

    pub fn initial_state(&self, tape: &mut Tape<'_>, enc: &EncoderStates) -> DecoderState {
        DecoderState {
            h: enc.final_h,
            c: enc.final_c,
            context: tape.zeros(self.config.hidden),
            coverage: tape.zeros(enc.len),
        }
    }

    /// Returns `(α_j, c_j)`.
    pub fn attend(
        &self,
        tape: &mut Tape<'_>,
        enc: &EncoderStates,
        s: Var,
        coverage: Var,
    ) -> (Var, Var) {
        let ws = tape.param(self.ids.attn_ws);
        let b1 = tape.param(self.ids.attn_b);
        let v1 = tape.param(self.ids.attn_v);
        let q = tape.matvec(ws, s);
        let q = tape.add(q, b1);
        let mut pre = tape.add_rows(enc.projected, q);
        if self.config.coverage {
            let wcov = tape.param(self.ids.attn_wcov);
            let cov_term = tape.outer(coverage, wcov);
            pre = tape.add(pre, cov_term);
        }
        let act = tape.tanh(pre);
        let energies = tape.matvec(act, v1);
        let alpha = tape.softmax(energies);
        let context = tape.matvec_t(enc.states, alpha);
        (alpha, context)
    }

    pub fn vocab_dist(&self, tape: &mut Tape<'_>, s: Var, c: Var) -> Var {
        let v3 = tape.param(self.ids.out_v3);
        let b2 = tape.param(self.ids.out_b2);
        let v2 = tape.param(self.ids.out_v2);
        let b3 = tape.param(self.ids.out_b3);
        let sc = tape.concat(&[s, c]);
        let z = tape.matvec(v3, sc);
        let z = tape.add(z, b2);
        let logits = tape.matvec(v2, z);
        let logits = tape.add(logits, b3);
        tape.softmax(logits)
    }

    /// σ_j; the constant 1 when the pointer is disabled.
    pub fn switch_prob(&self, tape: &mut Tape<'_>, c: Var, s: Var, x_emb: Var) -> Var {
        if !self.config.pointer {
            return tape.constant(1.0);
        }
        let wc = tape.param(self.ids.switch_wc);
        let wss = tape.param(self.ids.switch_ws);
        let wx = tape.param(self.ids.switch_wx);
        let b4 = tape.param(self.ids.switch_b);
        let a = tape.matvec(wc, c);
        let b = tape.matvec(wss, s);
        let x = tape.matvec(wx, x_emb);
        let z = tape.add(a, b);
        let z = tape.add(z, x);
        let z = tape.add(z, b4);
        tape.sigmoid(z)
    }

    pub fn final_dist(
        &self,
        tape: &mut Tape<'_>,
        p_vocab: Var,
        alpha: Var,
        sigma: Var,
        extended_ids: &[usize],
        extended_size: usize,
    ) -> Var {
        let gen = tape.pad(p_vocab, extended_size);
        if !self.config.pointer {
            return gen;
        }
        let gen = tape.scale_by(gen, sigma);
        let copy = tape.scatter(alpha, extended_ids, extended_size);
        let one_minus = tape.one_minus(sigma);
        let copy = tape.scale_by(copy, one_minus);
        tape.add(gen, copy)
    }

    pub fn decode_step(
        &self,
        tape: &mut Tape<'_>,
        prev: usize,
        state: &DecoderState,
        enc: &EncoderStates,
        src: &EncodedSource,
    ) -> Result<(StepOutput, DecoderState)> {
        let ext = src.extended_size();
        if prev >= ext {
            return Err(Error::IdOutOfRange {
                id: prev,
                size: ext,
            });
        }
        if src.extended_ids.len() != enc.len {
            return Err(Error::Shape(format!(
                "{} extended ids for {} encoder states",
                src.extended_ids.len(),
                enc.len
            )));
        }
        if let Some(&bad) = src.extended_ids.iter().find(|&&id| id >= ext) {
            return Err(Error::IdOutOfRange { id: bad, size: ext });
        }
        let x = self.embed(tape, prev);
        let input = tape.concat(&[x, state.context]);
        let (w, b) = (tape.param(self.ids.dec_w), tape.param(self.ids.dec_b));
        let (h, c) = lstm_cell(tape, input, state.h, state.c, w, b)?;
        let (attention, context) = self.attend(tape, enc, h, state.coverage);
        let p_vocab = self.vocab_dist(tape, h, context);
        let switch = self.switch_prob(tape, context, h, x);
        let dist = self.final_dist(tape, p_vocab, attention, switch, &src.extended_ids, ext);
        let coverage = if self.config.coverage {
            tape.add(state.coverage, attention)
        } else {
            state.coverage
        };
        Ok((
            StepOutput {
                attention,
                context,
                switch,
                p_vocab,
                dist,
            },
            DecoderState {
                h,
                c,
                context,
                coverage,
            },
        ))
    }
}

fn validate(cfg: &ModelConfig) -> Result<()> {
    if cfg.vocab_size <= UNK || cfg.emb == 0 || cfg.hidden == 0 {
        return Err(Error::Invalid(format!("model dimensions {cfg:?}")));
    }
    Ok(())
}

/// Value-level reference of the final mixture: `σ p_vocab` on vocabulary
/// slots plus `(1 - σ)` times the attention mass summed per extended id.
pub fn final_dist(
    p_vocab: &[f64],
    alpha: &[f64],
    sigma: f64,
    extended_ids: &[usize],
    extended_size: usize,
) -> Result<Vec<f64>> {
    if alpha.len() != extended_ids.len() {
        return Err(Error::Shape(format!(
            "{} attention weights, {} ids",
            alpha.len(),
            extended_ids.len()
        )));
    }
    if p_vocab.len() > extended_size {
        return Err(Error::Shape(String::from(
            "p_vocab longer than the extended vocabulary",
        )));
    }
    let mut out = alloc::vec![0.0; extended_size];
    for (o, p) in out.iter_mut().zip(p_vocab) {
        *o = sigma * p;
    }
    for (&id, &a) in extended_ids.iter().zip(alpha) {
        if id >= extended_size {
            return Err(Error::IdOutOfRange {
                id,
                size: extended_size,
            });
        }
        out[id] += (1.0 - sigma) * a;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::sigmoid;
    use crate::vocab::{ExtendedMapping, Vocab, START};
    use alloc::vec;
    use alloc::vec::Vec;

    fn cfg(coverage: bool) -> ModelConfig {
        ModelConfig {
            vocab_size: 8,
            emb: 3,
            hidden: 4,
            coverage,
            pointer: true,
        }
    }

    fn source(ids: &[usize], ext: &[usize], vocab_size: usize) -> EncodedSource {
        let words: Vec<(String, u64)> = (4..vocab_size).map(|i| (format!("w{i}"), 1)).collect();
        let v = Vocab::from_ranked(words).unwrap();
        let mut text: Vec<String> = Vec::new();
        for &e in ext {
            text.push(if e < vocab_size {
                format!("w{e}")
            } else {
                format!("oov{e}")
            });
        }
        let src = crate::vocab::encode_source(&text, &v);
        assert_eq!(src.ids, ids);
        src
    }

    fn zero_model(c: ModelConfig) -> PointerGenerator {
        let mut m = PointerGenerator::new(c, 0, 0.1).unwrap();
        for id in m.params().ids().collect::<Vec<_>>() {
            m.params_mut()
                .update(id, |v| v.iter_mut().for_each(|x| *x = 0.0));
        }
        m
    }

    #[test]
    fn layout_and_init() {
        let m = PointerGenerator::new(cfg(false), 3, 0.02).unwrap();
        assert_eq!(m.params().len(), 18);
        for (t, (name, rows, cols, bias)) in
            m.params().tensors().iter().zip(param_layout(&cfg(false)))
        {
            assert_eq!((t.name.as_str(), t.rows, t.cols), (name, rows, cols));
            if bias {
                assert!(t.data.iter().all(|&x| x == 0.0));
            } else {
                assert!(t.data.iter().all(|&x| x.abs() < 0.02));
            }
        }
        assert_eq!(m, PointerGenerator::new(cfg(false), 3, 0.02).unwrap());
        let params = m.clone().into_params();
        assert!(PointerGenerator::from_params(
            ModelConfig {
                hidden: 5,
                ..cfg(false)
            },
            params
        )
        .is_err());
    }

    #[test]
    fn encode_cases() {
        let m = PointerGenerator::new(cfg(false), 1, 0.5).unwrap();
        let mut t = Tape::new(m.params());
        let enc = m.encode(&mut t, &[5]).unwrap();
        assert_eq!(enc.len, 1);
        assert_eq!(t.value(enc.states), t.value(enc.final_h));

        let a = m.encode(&mut t, &[4, 5, 6]).unwrap();
        let b = m.encode(&mut t, &[4, 5, 6]).unwrap();
        assert_eq!(t.value(a.states), t.value(b.states));
        assert!(m.encode(&mut t, &[]).is_err());

        let z = zero_model(cfg(false));
        let mut t = Tape::new(z.params());
        let enc = z.encode(&mut t, &[4, 5, 6]).unwrap();
        assert!(t.value(enc.states).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn attention_single_position_and_symmetry() {
        let m = PointerGenerator::new(cfg(true), 2, 0.5).unwrap();
        let mut t = Tape::new(m.params());
        let enc = m.encode(&mut t, &[6]).unwrap();
        let s = t.vector(vec![0.3, -0.1, 0.2, 0.5]);
        let cov = t.vector(vec![0.7]);
        let (alpha, ctx) = m.attend(&mut t, &enc, s, cov);
        assert_eq!(t.value(alpha), [1.0]);
        assert_eq!(t.value(ctx), t.value(enc.final_h));

        // identical h_i: feed the same token with a state that the LSTM maps
        // to a fixed point is awkward, so build the encoder states directly
        let h = t.vector(vec![0.1, 0.2, -0.3, 0.4]);
        let wh = t.param(m.ids.attn_wh);
        let p = t.matvec(wh, h);
        let states = t.stack_rows(&[h, h, h]);
        let projected = t.stack_rows(&[p, p, p]);
        let same = EncoderStates {
            states,
            projected,
            final_h: h,
            final_c: h,
            len: 3,
        };
        let cov0 = t.zeros(3);
        let (alpha, _) = m.attend(&mut t, &same, s, cov0);
        for a in t.value(alpha) {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn attention_context_is_weighted_sum() {
        let m = PointerGenerator::new(cfg(false), 5, 0.8).unwrap();
        let mut t = Tape::new(m.params());
        let enc = m.encode(&mut t, &[4, 7, 5, 5]).unwrap();
        let s = t.vector(vec![0.2, 0.1, -0.4, 0.3]);
        let cov = t.zeros(4);
        let (alpha, ctx) = m.attend(&mut t, &enc, s, cov);
        let (a, hs) = (t.value(alpha), t.value(enc.states));
        for k in 0..4 {
            let want: f64 = (0..4).map(|i| a[i] * hs[i * 4 + k]).sum();
            assert!((t.value(ctx)[k] - want).abs() < 1e-14);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vocab_dist_matches_matrix_algebra() {
        let m = PointerGenerator::new(cfg(false), 9, 0.7).unwrap();
        let p = m.params();
        let mut t = Tape::new(p);
        let sv = [0.1, -0.2, 0.3, 0.05];
        let cv = [-0.4, 0.2, 0.0, 0.6];
        let s = t.vector(sv.to_vec());
        let c = t.vector(cv.to_vec());
        let out = m.vocab_dist(&mut t, s, c);

        let sc: Vec<f64> = sv.iter().chain(cv.iter()).copied().collect();
        let (v3, b2) = (p.values(m.ids.out_v3), p.values(m.ids.out_b2));
        let (v2, b3) = (p.values(m.ids.out_v2), p.values(m.ids.out_b3));
        let z: Vec<f64> = (0..4)
            .map(|r| (0..8).map(|k| v3[r * 8 + k] * sc[k]).sum::<f64>() + b2[r])
            .collect();
        let logits: Vec<f64> = (0..8)
            .map(|r| (0..4).map(|k| v2[r * 4 + k] * z[k]).sum::<f64>() + b3[r])
            .collect();
        let mx = logits.iter().copied().fold(f64::MIN, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| libm::exp(l - mx)).collect();
        let total: f64 = e.iter().sum();
        for (got, want) in t.value(out).iter().zip(e.iter().map(|x| x / total)) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!((t.value(out).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vocab_dist_uniform_when_output_layer_zero() {
        let mut m = PointerGenerator::new(cfg(false), 9, 0.7).unwrap();
        let (v2, b3) = (m.ids.out_v2, m.ids.out_b3);
        for id in [v2, b3] {
            m.params_mut()
                .update(id, |v| v.iter_mut().for_each(|x| *x = 0.0));
        }
        let mut t = Tape::new(m.params());
        let s = t.vector(vec![0.5; 4]);
        let c = t.vector(vec![-0.5; 4]);
        let out = m.vocab_dist(&mut t, s, c);
        assert!(t.value(out).iter().all(|&p| (p - 0.125).abs() < 1e-15));
    }

    #[test]
    fn switch_cases() {
        let z = zero_model(cfg(false));
        let mut t = Tape::new(z.params());
        let s = t.vector(vec![0.3; 4]);
        let c = t.vector(vec![0.1; 4]);
        let x = t.vector(vec![0.2; 3]);
        let sw = z.switch_prob(&mut t, c, s, x);
        assert_eq!(t.scalar(sw), 0.5);

        let mut m = PointerGenerator::new(cfg(false), 4, 0.5).unwrap();
        let eval = |m: &PointerGenerator| {
            let mut t = Tape::new(m.params());
            let s = t.vector(vec![0.3, -0.2, 0.1, 0.4]);
            let c = t.vector(vec![0.1, 0.5, -0.3, 0.2]);
            let x = t.vector(vec![0.2, -0.6, 0.9]);
            let sw = m.switch_prob(&mut t, c, s, x);
            t.scalar(sw)
        };
        let p = m.params();
        let dot =
            |id: ParamId, v: &[f64]| p.values(id).iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let want = sigmoid(
            dot(m.ids.switch_wc, &[0.1, 0.5, -0.3, 0.2])
                + dot(m.ids.switch_ws, &[0.3, -0.2, 0.1, 0.4])
                + dot(m.ids.switch_wx, &[0.2, -0.6, 0.9])
                + p.values(m.ids.switch_b)[0],
        );
        assert!((eval(&m) - want).abs() < 1e-15);

        let mut last = eval(&m);
        for b in [0.5, 1.0, 2.0] {
            let id = m.ids.switch_b;
            m.params_mut().set(id, 0, b);
            let now = eval(&m);
            assert!(now > last);
            last = now;
        }
    }

    #[test]
    fn final_dist_reference() {
        let uniform = vec![1.0 / 6.0; 6];
        let p = final_dist(&uniform, &[0.3, 0.7], 0.5, &[4, 6], 7).unwrap();
        assert!((p[6] - 0.35).abs() < 1e-15);
        assert!((p[4] - (0.5 / 6.0 + 0.15)).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let gen_only = final_dist(&uniform, &[0.3, 0.7], 1.0, &[4, 6], 7).unwrap();
        assert_eq!(&gen_only[..6], &uniform[..]);
        assert_eq!(gen_only[6], 0.0);

        let copy_only = final_dist(&uniform, &[0.3, 0.7], 0.0, &[4, 6], 7).unwrap();
        assert_eq!(copy_only, [0.0, 0.0, 0.0, 0.0, 0.3, 0.0, 0.7]);

        assert!(final_dist(&uniform, &[1.0], 0.5, &[7], 7).is_err());
    }

    #[test]
    fn final_dist_on_tape_matches_reference() {
        let m = PointerGenerator::new(cfg(false), 4, 0.5).unwrap();
        let mut t = Tape::new(m.params());
        let pv = t.vector(vec![0.1, 0.2, 0.05, 0.05, 0.3, 0.1, 0.1, 0.1]);
        let a = t.vector(vec![0.2, 0.5, 0.3]);
        let s = t.constant(0.4);
        let out = m.final_dist(&mut t, pv, a, s, &[9, 4, 9], 10);
        let want = final_dist(
            &[0.1, 0.2, 0.05, 0.05, 0.3, 0.1, 0.1, 0.1],
            &[0.2, 0.5, 0.3],
            0.4,
            &[9, 4, 9],
            10,
        )
        .unwrap();
        for (g, w) in t.value(out).iter().zip(&want) {
            assert!((g - w).abs() < 1e-15);
        }
    }

    #[test]
    fn decode_step_contracts() {
        let m = PointerGenerator::new(cfg(true), 6, 0.6).unwrap();
        let src = source(&[4, 1, 5, 1], &[4, 8, 5, 9], 8);
        let mut t = Tape::new(m.params());
        let enc = m.encode(&mut t, &src.ids).unwrap();
        let mut state = m.initial_state(&mut t, &enc);
        assert!(t.value(state.context).iter().all(|&x| x == 0.0));
        let mut alphas: Vec<Vec<f64>> = Vec::new();
        let mut prev = START;
        for step in 0..4 {
            let (out, next) = m.decode_step(&mut t, prev, &state, &enc, &src).unwrap();
            let p = t.value(out.dist);
            assert_eq!(p.len(), 10);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let sigma = t.scalar(out.switch);
            assert!(p[8] <= 1.0 - sigma + 1e-12 && p[9] <= 1.0 - sigma + 1e-12);
            alphas.push(t.value(out.attention).to_vec());
            let cov = t.value(next.coverage);
            for i in 0..4 {
                let want: f64 = alphas.iter().map(|a| a[i]).sum();
                assert!((cov[i] - want).abs() < 1e-15, "step {step}");
            }
            prev = if step == 1 { 9 } else { 4 };
            state = next;
        }
        assert!(m.decode_step(&mut t, 10, &state, &enc, &src).is_err());
    }

    #[test]
    fn no_oov_mapping_keeps_vocab_size() {
        let m = PointerGenerator::new(cfg(false), 6, 0.6).unwrap();
        let vocab = Vocab::from_ranked((4..8).map(|i| (format!("w{i}"), 1)).collect()).unwrap();
        let src = EncodedSource {
            ids: vec![4, 5],
            extended_ids: vec![4, 5],
            mapping: ExtendedMapping::empty(&vocab),
        };
        let mut t = Tape::new(m.params());
        let enc = m.encode(&mut t, &src.ids).unwrap();
        let st = m.initial_state(&mut t, &enc);
        let (out, _) = m.decode_step(&mut t, START, &st, &enc, &src).unwrap();
        let sigma = t.scalar(out.switch);
        let want = final_dist(
            t.value(out.p_vocab),
            t.value(out.attention),
            sigma,
            &[4, 5],
            8,
        )
        .unwrap();
        assert_eq!(t.size(out.dist), 8);
        for (g, w) in t.value(out.dist).iter().zip(&want) {
            assert!((g - w).abs() < 1e-15);
        }
    }

    #[test]
    fn two_step_trace_by_hand() {
        // hidden 1, emb 1, vocab 5 (one content word), no OOVs: a scalar
        // trace of both decoder steps, computed without the tape
        let c = ModelConfig {
            vocab_size: 5,
            emb: 1,
            hidden: 1,
            coverage: false,
            pointer: true,
        };
        let m = PointerGenerator::new(c, 11, 0.9).unwrap();
        let p = m.params();
        let v = |name: &str| p.values(p.find(name).unwrap()).to_vec();
        let (emb, ew, eb, dw, db) = (
            v("embedding"),
            v("enc_lstm_w"),
            v("enc_lstm_b"),
            v("dec_lstm_w"),
            v("dec_lstm_b"),
        );
        let (wh, ws, ab, av) = (
            v("attn_wh")[0],
            v("attn_ws")[0],
            v("attn_b")[0],
            v("attn_v")[0],
        );
        let (v3, b2, v2, b3) = (v("out_v3"), v("out_b2")[0], v("out_v2"), v("out_b3"));
        let (wc, wss, wx, b4) = (
            v("switch_wc")[0],
            v("switch_ws")[0],
            v("switch_wx")[0],
            v("switch_b")[0],
        );
        let sig = sigmoid;
        let lstm = |w: &[f64], b: &[f64], inputs: &[f64], h: f64, cc: f64| {
            let z = |k: usize| {
                let n = inputs.len() + 1;
                let row = &w[k * n..(k + 1) * n];
                inputs.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + row[n - 1] * h + b[k]
            };
            let (i, f, g, o) = (sig(z(0)), sig(z(1)), libm::tanh(z(2)), sig(z(3)));
            let c2 = f * cc + i * g;
            (o * libm::tanh(c2), c2)
        };
        let src_ids = [4usize, 4];
        let (mut h, mut cc) = (0.0, 0.0);
        let mut hs = Vec::new();
        for &id in &src_ids {
            (h, cc) = lstm(&ew, &eb, &[emb[id]], h, cc);
            hs.push(h);
        }
        let mut ctx = 0.0;
        let mut prev = START;
        let mut want = Vec::new();
        for _ in 0..2 {
            let x = emb[prev];
            (h, cc) = lstm(&dw, &db, &[x, ctx], h, cc);
            let f: Vec<f64> = hs
                .iter()
                .map(|hi| av * libm::tanh(wh * hi + ws * h + ab))
                .collect();
            let mx = f[0].max(f[1]);
            let e: Vec<f64> = f.iter().map(|x| libm::exp(x - mx)).collect();
            let alpha: Vec<f64> = e.iter().map(|x| x / (e[0] + e[1])).collect();
            ctx = alpha[0] * hs[0] + alpha[1] * hs[1];
            let z = v3[0] * h + v3[1] * ctx + b2;
            let logits: Vec<f64> = (0..5).map(|r| v2[r] * z + b3[r]).collect();
            let lm = logits.iter().copied().fold(f64::MIN, f64::max);
            let le: Vec<f64> = logits.iter().map(|l| libm::exp(l - lm)).collect();
            let tot: f64 = le.iter().sum();
            let sigma = sig(wc * ctx + wss * h + wx * x + b4);
            let mut pstar: Vec<f64> = le.iter().map(|x| sigma * x / tot).collect();
            pstar[4] += (1.0 - sigma) * (alpha[0] + alpha[1]);
            want.push(pstar);
            prev = 4;
        }

        let vocab = Vocab::from_ranked(vec![("w".into(), 1)]).unwrap();
        let src = crate::vocab::encode_source(&["w", "w"], &vocab);
        let mut t = Tape::new(p);
        let enc = m.encode(&mut t, &src.ids).unwrap();
        let mut st = m.initial_state(&mut t, &enc);
        let mut prev = START;
        for w in &want {
            let (out, next) = m.decode_step(&mut t, prev, &st, &enc, &src).unwrap();
            for (g, x) in t.value(out.dist).iter().zip(w) {
                assert!((g - x).abs() < 1e-13, "{g} vs {x}");
            }
            st = next;
            prev = 4;
        }
    }
}
