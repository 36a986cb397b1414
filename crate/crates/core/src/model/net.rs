use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::{lit, ParamId, Params, Scalar, Tape, Tensor, Var};
use super::vocab::{Vocabulary, END, START};
use super::{InputRepr, ModelConfig, OutputRepr};
use crate::corpus::Example;
use crate::editlex::serialize;
use crate::features::{
    featurize_code, featurize_comment, CommentContext, FeatureMatrix, FeatureRecord,
};
use crate::tokenize::TokenSeq;
use crate::{Error, Result};

/// Model-ready token sequences of one example.
#[derive(Clone)]
pub struct Instance {
    /// Code encoder inputs, one sequence per code encoder.
    pub code: Vec<Vec<String>>,
    pub code_features: Option<Vec<Vec<u8>>>,
    pub comment: Vec<String>,
    pub comment_features: Option<Vec<Vec<u8>>>,
    /// Decoder target, without the end marker.
    pub target: Vec<String>,
    /// Comment that decoded edit sequences are applied to.
    pub c_old: TokenSeq,
    decoder_context: Option<std::sync::Arc<CommentContext>>,
}

fn one_hot_rows(m: &FeatureMatrix) -> Vec<Vec<u8>> {
    m.rows.iter().map(FeatureRecord::one_hot).collect()
}

impl Instance {
    pub fn from_example(ex: &Example, config: &ModelConfig) -> Instance {
        let code = match config.input_repr {
            InputRepr::MNew => vec![ex.m_new.texts()],
            InputRepr::MOldAndMNew => vec![ex.m_old.texts(), ex.m_new.texts()],
            InputRepr::MEdit => vec![serialize(&ex.m_edit)],
        };
        let code_features = (config.use_features && config.input_repr == InputRepr::MEdit)
            .then(|| one_hot_rows(&featurize_code(&ex.m_edit, &ex.c_old, &ex.m_old, &ex.m_new)));
        let comment_features = (config.use_features && config.use_comment_encoder).then(|| {
            one_hot_rows(&featurize_comment(
                &ex.c_old, &ex.m_edit, &ex.m_old, &ex.m_new,
            ))
        });
        let target = match config.output_repr {
            OutputRepr::CEdit => ex.c_edit.as_ref().map(serialize).unwrap_or_default(),
            OutputRepr::CNew => ex.c_new.texts(),
        };
        let decoder_context = config.decoder_features.then(|| {
            std::sync::Arc::new(CommentContext::new(
                &ex.c_old, &ex.m_edit, &ex.m_old, &ex.m_new,
            ))
        });
        Instance {
            code,
            code_features,
            comment: if config.use_comment_encoder {
                ex.c_old.texts()
            } else {
                Vec::new()
            },
            comment_features,
            target,
            c_old: ex.c_old.clone(),
            decoder_context,
        }
    }

    /// Input for a generation model scoring `comment` given `m_new`.
    pub fn generation(m_new: &TokenSeq, comment: &[String]) -> Instance {
        Instance {
            code: vec![m_new.texts()],
            code_features: None,
            comment: Vec::new(),
            comment_features: None,
            target: comment.to_vec(),
            c_old: TokenSeq::from_words::<&str>(&[]),
            decoder_context: None,
        }
    }

    /// Copyable token sequences, code first.
    fn sources(&self, with_comment: bool) -> Vec<Vec<&str>> {
        let mut out = vec![self.code.iter().flatten().map(String::as_str).collect()];
        if with_comment {
            out.push(self.comment.iter().map(String::as_str).collect());
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Gru {
    wi: ParamId,
    bi: ParamId,
    wh: ParamId,
    bh: ParamId,
    hidden: usize,
}

#[derive(Debug, Clone)]
struct Encoder {
    layers: Vec<(Gru, Gru)>,
}

#[derive(Debug, Clone)]
struct Layout {
    code_emb: ParamId,
    comment_emb: ParamId,
    code_feat: Option<(ParamId, ParamId)>,
    comment_feat: Option<(ParamId, ParamId)>,
    code_encoders: Vec<Encoder>,
    comment_encoder: Option<Encoder>,
    init: (ParamId, ParamId),
    decoder: Gru,
    attn: Vec<ParamId>,
    combine: (ParamId, ParamId),
    out: (ParamId, ParamId),
    gate: (ParamId, ParamId),
}

/// Edit or generation network with its vocabularies and parameters.
#[derive(Debug, Clone)]
pub struct EditModel<T> {
    pub config: ModelConfig,
    pub code_vocab: Vocabulary,
    pub comment_vocab: Vocabulary,
    pub params: Params<T>,
    layout: Layout,
}

struct Init<'a, T> {
    params: &'a mut Params<T>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> Init<'_, T> {
    fn uniform(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        let data = (0..rows * cols)
            .map(|_| lit(self.rng.gen_range(-0.1..0.1)))
            .collect();
        self.params.add(name, Tensor::from_vec(rows, cols, data))
    }

    fn zeros(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.params.add(name, Tensor::zeros(rows, cols))
    }

    fn gru(&mut self, name: &str, input: usize, hidden: usize) -> Gru {
        Gru {
            wi: self.uniform(&format!("{name}.wi"), input, 3 * hidden),
            bi: self.zeros(&format!("{name}.bi"), 1, 3 * hidden),
            wh: self.uniform(&format!("{name}.wh"), hidden, 3 * hidden),
            bh: self.zeros(&format!("{name}.bh"), 1, 3 * hidden),
            hidden,
        }
    }

    fn encoder(&mut self, name: &str, input: usize, hidden: usize, layers: usize) -> Encoder {
        let layers = (0..layers)
            .map(|l| {
                let width = if l == 0 { input } else { 2 * hidden };
                (
                    self.gru(&format!("{name}.l{l}.fwd"), width, hidden),
                    self.gru(&format!("{name}.l{l}.bwd"), width, hidden),
                )
            })
            .collect();
        Encoder { layers }
    }

    fn linear(&mut self, name: &str, input: usize, output: usize) -> (ParamId, ParamId) {
        (
            self.uniform(&format!("{name}.w"), input, output),
            self.zeros(&format!("{name}.b"), 1, output),
        )
    }
}

/// Dropout mask source; inactive when `rng` is `None` or the rate is 0.
pub(crate) struct Dropout<'r> {
    pub rate: f64,
    pub rng: Option<&'r mut ChaCha8Rng>,
}

impl Dropout<'_> {
    pub fn off() -> Dropout<'static> {
        Dropout {
            rate: 0.0,
            rng: None,
        }
    }

    fn apply<T: Scalar>(&mut self, tape: &mut Tape<'_, T>, x: Var) -> Var {
        let Some(rng) = self.rng.as_deref_mut() else {
            return x;
        };
        if self.rate <= 0.0 {
            return x;
        }
        let keep = 1.0 - self.rate;
        let scale: T = lit(1.0 / keep);
        let mask = (0..tape.value(x).len())
            .map(|_| {
                if rng.gen::<f64>() < keep {
                    scale
                } else {
                    T::zero()
                }
            })
            .collect();
        tape.mask(x, mask)
    }
}

/// Encoder outputs for one instance.
struct Encoded {
    /// Per-position states of each attention source.
    states: Vec<Var>,
    /// `states · W_a`, cached for attention scoring.
    keys: Vec<Var>,
    h0: Var,
}

struct Step {
    h: Var,
    attn_vec: Var,
    pgen: Var,
    gate: Var,
    align: Vec<Var>,
}

/// Output distribution of one decoding step over the vocabulary followed by
/// the instance's out-of-vocabulary source tokens.
#[derive(Debug, Clone)]
pub struct StepDistribution {
    pub probs: Vec<f64>,
}

/// Decoder state of one hypothesis.
#[derive(Clone, Copy)]
pub(crate) struct DecoderState {
    pub h: Var,
    pub attn_vec: Var,
}

impl<T: Scalar> EditModel<T> {
    pub fn new(
        config: ModelConfig,
        code_vocab: Vocabulary,
        comment_vocab: Vocabulary,
    ) -> Result<Self> {
        config.validate()?;
        let mut params = Params::new();
        let layout = Self::allocate(&config, &code_vocab, &comment_vocab, &mut params);
        Ok(EditModel {
            config,
            code_vocab,
            comment_vocab,
            params,
            layout,
        })
    }

    /// Builds vocabularies from `train` (tokens seen at least
    /// `vocab_min_count` times) and initializes parameters from the seed.
    pub fn from_examples(train: &[Example], config: ModelConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let instances: Vec<Instance> = train
            .iter()
            .map(|e| Instance::from_example(e, &config))
            .collect();
        let code_vocab = Vocabulary::build(
            instances
                .iter()
                .flat_map(|i| i.code.iter().map(Vec::as_slice)),
            config.vocab_min_count,
        );
        let comment_vocab = Vocabulary::build(
            instances
                .iter()
                .flat_map(|i| [i.comment.as_slice(), i.target.as_slice()]),
            config.vocab_min_count,
        );
        let base = Vocabulary::from_tokens(std::iter::empty()).len();
        if comment_vocab.len() == base {
            return Err(Error::VocabularyMissing(format!(
                "no comment token occurs at least {} times in the training data",
                config.vocab_min_count
            )));
        }
        Self::new(config, code_vocab, comment_vocab)
    }

    fn allocate(
        config: &ModelConfig,
        code_vocab: &Vocabulary,
        comment_vocab: &Vocabulary,
        params: &mut Params<T>,
    ) -> Layout {
        let mut init = Init {
            params,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        };
        let (e, h, d) = (
            config.embedding_dim,
            config.encoder_hidden,
            config.decoder_hidden,
        );
        let f = FeatureRecord::WIDTH;
        let code_emb = init.uniform("code_emb", code_vocab.len(), e);
        let comment_emb = init.uniform("comment_emb", comment_vocab.len(), e);
        let code_features = config.use_features && config.input_repr == InputRepr::MEdit;
        let comment_features = config.use_features && config.use_comment_encoder;
        let code_feat = code_features.then(|| init.linear("code_feat", e + f, e));
        let comment_feat = comment_features.then(|| init.linear("comment_feat", e + f, e));
        let n_code = if config.input_repr == InputRepr::MOldAndMNew {
            2
        } else {
            1
        };
        let code_encoders = (0..n_code)
            .map(|k| init.encoder(&format!("code_enc{k}"), e, h, config.encoder_layers))
            .collect::<Vec<_>>();
        let comment_encoder = config
            .use_comment_encoder
            .then(|| init.encoder("comment_enc", e, h, config.encoder_layers));
        let n_enc = n_code + usize::from(config.use_comment_encoder);
        let n_src = 1 + usize::from(config.use_comment_encoder);
        let init_proj = init.linear("init", 2 * h * n_enc, d);
        let dec_in = e + d + if config.decoder_features { f } else { 0 };
        let decoder = init.gru("decoder", dec_in, d);
        let attn = (0..n_src)
            .map(|s| init.uniform(&format!("attn{s}"), 2 * h, d))
            .collect();
        let combine = init.linear("combine", d + n_src * 2 * h, d);
        let out = init.linear("out", d, comment_vocab.len());
        let gate = init.linear("gate", d, 1 + n_src);
        Layout {
            code_emb,
            comment_emb,
            code_feat,
            comment_feat,
            code_encoders,
            comment_encoder,
            init: init_proj,
            decoder,
            attn,
            combine,
            out,
            gate,
        }
    }

    pub fn instance(&self, ex: &Example) -> Instance {
        Instance::from_example(ex, &self.config)
    }

    fn gru_cell(&self, tape: &mut Tape<'_, T>, g: &Gru, gx: Var, h: Var) -> Var {
        let n = g.hidden;
        let gh = tape.linear(h, g.wh, Some(g.bh));
        let (xr, xz, xn) = (
            tape.slice_cols(gx, 0, n),
            tape.slice_cols(gx, n, n),
            tape.slice_cols(gx, 2 * n, n),
        );
        let (hr, hz, hn) = (
            tape.slice_cols(gh, 0, n),
            tape.slice_cols(gh, n, n),
            tape.slice_cols(gh, 2 * n, n),
        );
        let r = tape.add(xr, hr);
        let r = tape.sigmoid(r);
        let z = tape.add(xz, hz);
        let z = tape.sigmoid(z);
        let rh = tape.mul(r, hn);
        let cand = tape.add(xn, rh);
        let cand = tape.tanh(cand);
        let keep = tape.one_minus(z);
        let a = tape.mul(keep, cand);
        let b = tape.mul(z, h);
        tape.add(a, b)
    }

    /// Runs one direction over all rows of `x`; returns states in input order.
    fn run_gru(&self, tape: &mut Tape<'_, T>, g: &Gru, x: Var, reverse: bool) -> Vec<Var> {
        let len = tape.value(x).rows;
        let gx = tape.linear(x, g.wi, Some(g.bi));
        let mut h = tape.input(Tensor::zeros(1, g.hidden));
        let mut states = vec![h; len];
        let order: Vec<usize> = if reverse {
            (0..len).rev().collect()
        } else {
            (0..len).collect()
        };
        for t in order {
            let gxt = tape.row(gx, t);
            h = self.gru_cell(tape, g, gxt, h);
            states[t] = h;
        }
        states
    }

    /// Bidirectional multi-layer encoding: per-position states (L × 2H) and
    /// the final summary `[fwd_last; bwd_first]` of the top layer.
    #[allow(clippy::too_many_arguments)]
    fn encode_sequence(
        &self,
        tape: &mut Tape<'_, T>,
        enc: &Encoder,
        emb: ParamId,
        feat: Option<(ParamId, ParamId)>,
        ids: &[usize],
        features: Option<&[Vec<u8>]>,
        drop: &mut Dropout<'_>,
    ) -> (Var, Var) {
        let mut x = tape.embed(emb, ids);
        if let Some((w, b)) = feat {
            let f = FeatureRecord::WIDTH;
            let rows = features.expect("features required by the model configuration");
            assert_eq!(rows.len(), ids.len(), "feature rows must match tokens");
            let data = rows
                .iter()
                .flat_map(|r| r.iter().map(|&v| if v == 1 { T::one() } else { T::zero() }))
                .collect();
            let fv = tape.input(Tensor::from_vec(ids.len(), f, data));
            let joined = tape.concat(&[x, fv]);
            x = tape.linear(joined, w, Some(b));
        }
        x = drop.apply(tape, x);
        let mut last = (x, x);
        for (l, (fwd, bwd)) in enc.layers.iter().enumerate() {
            if l > 0 {
                x = drop.apply(tape, x);
            }
            let f_states = self.run_gru(tape, fwd, x, false);
            let b_states = self.run_gru(tape, bwd, x, true);
            let fs = tape.stack(&f_states);
            let bs = tape.stack(&b_states);
            x = tape.concat(&[fs, bs]);
            last = (*f_states.last().expect("non-empty"), b_states[0]);
        }
        let fin = tape.concat(&[last.0, last.1]);
        (x, fin)
    }

    fn encode(&self, tape: &mut Tape<'_, T>, inst: &Instance, drop: &mut Dropout<'_>) -> Encoded {
        let ly = &self.layout;
        let mut finals = Vec::new();
        let mut code_states = Vec::new();
        let mut offset = 0;
        for (k, enc) in ly.code_encoders.iter().enumerate() {
            let seq = inst.code.get(k).map(Vec::as_slice).unwrap_or(&[]);
            let mut ids: Vec<usize> = seq.iter().map(|t| self.code_vocab.id(t)).collect();
            let feats = inst
                .code_features
                .as_deref()
                .map(|f| &f[offset..offset + seq.len()]);
            offset += seq.len();
            let padded;
            let feats = if ids.is_empty() {
                ids.push(Vocabulary::PAD_ID);
                padded = vec![vec![0u8; FeatureRecord::WIDTH]];
                feats.map(|_| padded.as_slice())
            } else {
                feats
            };
            let (s, f) =
                self.encode_sequence(tape, enc, ly.code_emb, ly.code_feat, &ids, feats, drop);
            code_states.push(s);
            finals.push(f);
        }
        let mut states = vec![if code_states.len() == 1 {
            code_states[0]
        } else {
            tape.stack(&code_states)
        }];
        if let Some(enc) = &ly.comment_encoder {
            let mut ids: Vec<usize> = inst
                .comment
                .iter()
                .map(|t| self.comment_vocab.id(t))
                .collect();
            let padded;
            let mut feats = inst.comment_features.as_deref();
            if ids.is_empty() {
                ids.push(Vocabulary::PAD_ID);
                padded = vec![vec![0u8; FeatureRecord::WIDTH]];
                feats = feats.map(|_| padded.as_slice());
            }
            let (s, f) = self.encode_sequence(
                tape,
                enc,
                ly.comment_emb,
                ly.comment_feat,
                &ids,
                feats,
                drop,
            );
            states.push(s);
            finals.push(f);
        }
        let keys = states
            .iter()
            .zip(&ly.attn)
            .map(|(&s, &w)| tape.linear(s, w, None))
            .collect();
        let fin = tape.concat(&finals);
        let h0 = tape.linear(fin, ly.init.0, Some(ly.init.1));
        let h0 = tape.tanh(h0);
        Encoded { states, keys, h0 }
    }

    fn initial_state(&self, tape: &mut Tape<'_, T>, enc: &Encoded) -> DecoderState {
        let attn_vec = tape.input(Tensor::zeros(1, self.config.decoder_hidden));
        DecoderState {
            h: enc.h0,
            attn_vec,
        }
    }

    fn step(
        &self,
        tape: &mut Tape<'_, T>,
        inst: &Instance,
        enc: &Encoded,
        state: DecoderState,
        prev: &str,
        drop: &mut Dropout<'_>,
    ) -> Step {
        let ly = &self.layout;
        let emb = tape.embed(ly.comment_emb, &[self.comment_vocab.id(prev)]);
        let emb = drop.apply(tape, emb);
        let mut parts = vec![emb, state.attn_vec];
        if self.config.decoder_features {
            let ctx = inst
                .decoder_context
                .as_ref()
                .expect("decoder features require an edit example");
            let rec = ctx.token(prev);
            let data = rec
                .one_hot()
                .into_iter()
                .map(|v| if v == 1 { T::one() } else { T::zero() })
                .collect();
            parts.push(tape.input(Tensor::from_vec(1, FeatureRecord::WIDTH, data)));
        }
        let x = tape.concat(&parts);
        let gx = tape.linear(x, ly.decoder.wi, Some(ly.decoder.bi));
        let h = self.gru_cell(tape, &ly.decoder, gx, state.h);
        let mut ctx_parts = vec![h];
        let mut align = Vec::with_capacity(enc.states.len());
        for (&s, &k) in enc.states.iter().zip(&enc.keys) {
            let scores = tape.matmul_t(h, k);
            let a = tape.softmax(scores);
            ctx_parts.push(tape.matmul(a, s));
            align.push(a);
        }
        let joined = tape.concat(&ctx_parts);
        let av = tape.linear(joined, ly.combine.0, Some(ly.combine.1));
        let av = tape.tanh(av);
        let av_d = drop.apply(tape, av);
        let logits = tape.linear(av_d, ly.out.0, Some(ly.out.1));
        let pgen = tape.softmax(logits);
        let gl = tape.linear(av_d, ly.gate.0, Some(ly.gate.1));
        let gate = tape.softmax(gl);
        Step {
            h,
            attn_vec: av,
            pgen,
            gate,
            align,
        }
    }

    /// Probability node of emitting `token` at this step.
    fn token_prob(
        &self,
        tape: &mut Tape<'_, T>,
        step: &Step,
        sources: &[Vec<&str>],
        token: &str,
    ) -> Var {
        let mut parts = Vec::new();
        let in_vocab = self.comment_vocab.get(token);
        for (s, src) in sources.iter().enumerate() {
            let pos: Vec<usize> = src
                .iter()
                .enumerate()
                .filter(|(_, t)| **t == token)
                .map(|(i, _)| i)
                .collect();
            if !pos.is_empty() {
                let g = tape.pick_sum(step.gate, &[1 + s]);
                let a = tape.pick_sum(step.align[s], &pos);
                parts.push(tape.mul(g, a));
            }
        }
        if in_vocab.is_some() || parts.is_empty() {
            let id = in_vocab.unwrap_or(Vocabulary::UNK_ID);
            let g = tape.pick_sum(step.gate, &[0]);
            let p = tape.pick_sum(step.pgen, &[id]);
            parts.push(tape.mul(g, p));
        }
        if parts.len() == 1 {
            parts[0]
        } else {
            tape.sum(&parts)
        }
    }

    /// Teacher-forced negative log-likelihood summed over the target tokens
    /// and the end marker; returns the loss node and the token count.
    pub(crate) fn nll(
        &self,
        tape: &mut Tape<'_, T>,
        inst: &Instance,
        drop: &mut Dropout<'_>,
    ) -> (Var, usize) {
        let enc = self.encode(tape, inst, drop);
        let sources = inst.sources(self.config.use_comment_encoder);
        let mut state = self.initial_state(tape, &enc);
        let mut prev = START.to_string();
        let mut logs = Vec::with_capacity(inst.target.len() + 1);
        for tok in inst.target.iter().map(String::as_str).chain([END]) {
            let step = self.step(tape, inst, &enc, state, &prev, drop);
            let p = self.token_prob(tape, &step, &sources, tok);
            logs.push(tape.log(p));
            state = DecoderState {
                h: step.h,
                attn_vec: step.attn_vec,
            };
            prev = tok.to_string();
        }
        let total = tape.sum(&logs);
        (tape.scale(total, -T::one()), logs.len())
    }

    /// Log-probability of each target token followed by the end marker,
    /// teacher-forced and without dropout.
    pub fn token_log_probs(&self, inst: &Instance) -> Vec<f64> {
        let mut tape = Tape::new(&self.params);
        let mut drop = Dropout::off();
        let enc = self.encode(&mut tape, inst, &mut drop);
        let sources = inst.sources(self.config.use_comment_encoder);
        let mut state = self.initial_state(&mut tape, &enc);
        let mut prev = START.to_string();
        let mut out = Vec::with_capacity(inst.target.len() + 1);
        for tok in inst.target.iter().map(String::as_str).chain([END]) {
            let step = self.step(&mut tape, inst, &enc, state, &prev, &mut drop);
            let p = self.token_prob(&mut tape, &step, &sources, tok);
            out.push(tape.scalar(p).to_f64().unwrap_or(0.0).ln());
            state = DecoderState {
                h: step.h,
                attn_vec: step.attn_vec,
            };
            prev = tok.to_string();
        }
        out
    }

    /// Mean per-token negative log-likelihood over `instances`, without
    /// dropout.
    pub fn loss(&self, instances: &[Instance]) -> f64 {
        let mut total = 0.0;
        let mut count = 0;
        for inst in instances {
            let mut tape = Tape::new(&self.params);
            let (l, n) = self.nll(&mut tape, inst, &mut Dropout::off());
            total += tape.scalar(l).to_f64().unwrap_or(f64::NAN);
            count += n;
        }
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }

    /// Sum of per-token NLL over `instances` scaled by `1/normalizer`, with
    /// gradients added into `grads`.
    pub(crate) fn accumulate_gradients(
        &self,
        instances: &[&Instance],
        normalizer: f64,
        grads: &mut [Tensor<T>],
        mut drop: Dropout<'_>,
    ) -> f64 {
        let mut total = 0.0;
        let scale: T = lit(1.0 / normalizer);
        for inst in instances {
            let mut tape = Tape::new(&self.params);
            let (l, _) = self.nll(&mut tape, inst, &mut drop);
            let scaled = tape.scale(l, scale);
            total += tape.scalar(scaled).to_f64().unwrap_or(f64::NAN);
            tape.backward(scaled, grads);
        }
        total
    }

    /// Loss and gradient of the batch objective used in training
    /// (per-token mean NLL), without dropout.
    pub fn loss_and_gradients(&self, instances: &[Instance]) -> (f64, Vec<Tensor<T>>) {
        let mut grads = self.params.zero_grads();
        let refs: Vec<&Instance> = instances.iter().collect();
        let tokens: usize = instances.iter().map(|i| i.target.len() + 1).sum();
        let loss =
            self.accumulate_gradients(&refs, tokens.max(1) as f64, &mut grads, Dropout::off());
        (loss, grads)
    }

    /// Out-of-vocabulary source tokens, in first-seen order; they extend the
    /// output id space after the vocabulary.
    pub(crate) fn oov_tokens(&self, inst: &Instance) -> Vec<String> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for src in inst.sources(self.config.use_comment_encoder) {
            for t in src {
                if self.comment_vocab.get(t).is_none() && !seen.contains_key(t) {
                    seen.insert(t, out.len());
                    out.push(t.to_string());
                }
            }
        }
        out
    }

    pub(crate) fn extended_token<'a>(&'a self, id: usize, oov: &'a [String]) -> &'a str {
        let v = self.comment_vocab.len();
        if id < v {
            self.comment_vocab.token(id)
        } else {
            &oov[id - v]
        }
    }

    fn distribution(
        &self,
        tape: &Tape<'_, T>,
        step: &Step,
        sources: &[Vec<&str>],
        oov: &[String],
    ) -> StepDistribution {
        let v = self.comment_vocab.len();
        let gate = &tape.value(step.gate).data;
        let g0 = gate[0].to_f64().unwrap_or(0.0);
        let mut probs: Vec<f64> = tape
            .value(step.pgen)
            .data
            .iter()
            .map(|p| g0 * p.to_f64().unwrap_or(0.0))
            .collect();
        probs.resize(v + oov.len(), 0.0);
        let oov_index: HashMap<&str, usize> = oov
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), v + i))
            .collect();
        for (s, src) in sources.iter().enumerate() {
            let gs = gate[1 + s].to_f64().unwrap_or(0.0);
            let a = &tape.value(step.align[s]).data;
            for (i, t) in src.iter().enumerate() {
                let id = self.comment_vocab.get(t).unwrap_or_else(|| oov_index[t]);
                probs[id] += gs * a[i].to_f64().unwrap_or(0.0);
            }
        }
        StepDistribution { probs }
    }

    /// Teacher-forced distributions for each target position (end marker
    /// included), for inspection.
    pub fn step_distributions(&self, inst: &Instance) -> Vec<StepDistribution> {
        let mut tape = Tape::new(&self.params);
        let mut drop = Dropout::off();
        let enc = self.encode(&mut tape, inst, &mut drop);
        let sources = inst.sources(self.config.use_comment_encoder);
        let oov = self.oov_tokens(inst);
        let mut state = self.initial_state(&mut tape, &enc);
        let mut prev = START.to_string();
        let mut out = Vec::new();
        for tok in inst.target.iter().map(String::as_str).chain([END]) {
            let step = self.step(&mut tape, inst, &enc, state, &prev, &mut drop);
            out.push(self.distribution(&tape, &step, &sources, &oov));
            state = DecoderState {
                h: step.h,
                attn_vec: step.attn_vec,
            };
            prev = tok.to_string();
        }
        out
    }

    /// Incremental decoding interface used by beam search.
    pub(crate) fn start<'p>(
        &'p self,
        tape: &mut Tape<'p, T>,
        inst: &Instance,
    ) -> (Decoding, DecoderState) {
        let enc = self.encode(tape, inst, &mut Dropout::off());
        let state = self.initial_state(tape, &enc);
        let dec = Decoding {
            enc,
            oov: self.oov_tokens(inst),
            sources: inst
                .sources(self.config.use_comment_encoder)
                .into_iter()
                .map(|s| s.into_iter().map(String::from).collect())
                .collect(),
        };
        (dec, state)
    }

    pub(crate) fn advance(
        &self,
        tape: &mut Tape<'_, T>,
        inst: &Instance,
        dec: &Decoding,
        state: DecoderState,
        prev: &str,
    ) -> (StepDistribution, DecoderState) {
        let step = self.step(tape, inst, &dec.enc, state, prev, &mut Dropout::off());
        let sources: Vec<Vec<&str>> = dec
            .sources
            .iter()
            .map(|s| s.iter().map(String::as_str).collect())
            .collect();
        let dist = self.distribution(tape, &step, &sources, &dec.oov);
        (
            dist,
            DecoderState {
                h: step.h,
                attn_vec: step.attn_vec,
            },
        )
    }

    /// Copies embedding rows of tokens shared with `other` (same embedding
    /// width required); returns the number of rows copied.
    pub fn init_embeddings_from(&mut self, other: &EditModel<T>) -> Result<usize> {
        if other.config.embedding_dim != self.config.embedding_dim {
            return Err(Error::Config(format!(
                "embedding width {} does not match {}",
                other.config.embedding_dim, self.config.embedding_dim
            )));
        }
        let mut copied = 0;
        let pairs = [
            (
                self.layout.code_emb,
                &self.code_vocab,
                other.layout.code_emb,
                &other.code_vocab,
            ),
            (
                self.layout.comment_emb,
                &self.comment_vocab,
                other.layout.comment_emb,
                &other.comment_vocab,
            ),
        ];
        for (dst, dst_vocab, src, src_vocab) in pairs {
            for (i, tok) in dst_vocab.tokens().iter().enumerate() {
                if let Some(j) = src_vocab.get(tok) {
                    let row = other.params.get(src).row(j).to_vec();
                    self.params.values[dst.0].row_mut(i).copy_from_slice(&row);
                    copied += 1;
                }
            }
        }
        Ok(copied)
    }

    /// Converts parameters to another precision.
    pub fn cast<U: Scalar>(&self) -> EditModel<U> {
        let values = self
            .params
            .values
            .iter()
            .map(|t| {
                Tensor::from_vec(
                    t.rows,
                    t.cols,
                    t.data
                        .iter()
                        .map(|x| lit(x.to_f64().unwrap_or(0.0)))
                        .collect(),
                )
            })
            .collect();
        EditModel {
            config: self.config.clone(),
            code_vocab: self.code_vocab.clone(),
            comment_vocab: self.comment_vocab.clone(),
            params: Params {
                names: self.params.names.clone(),
                values,
            },
            layout: self.layout.clone(),
        }
    }

    /// Per-token state width of each encoder output and the decoder's
    /// initial state width, for shape checks.
    pub fn shapes(&self, inst: &Instance) -> (Vec<(usize, usize)>, usize) {
        let mut tape = Tape::new(&self.params);
        let enc = self.encode(&mut tape, inst, &mut Dropout::off());
        let states = enc
            .states
            .iter()
            .map(|s| (tape.value(*s).rows, tape.value(*s).cols))
            .collect();
        (states, tape.value(enc.h0).cols)
    }
}

/// Encoder results and copy bookkeeping for incremental decoding.
pub(crate) struct Decoding {
    enc: Encoded,
    pub oov: Vec<String>,
    sources: Vec<Vec<String>>,
}
