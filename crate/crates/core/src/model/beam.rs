use serde::{Deserialize, Serialize};

use super::net::{EditModel, Instance};
use super::tape::{Scalar, Tape};
use super::vocab::{Vocabulary, START};
use super::OutputRepr;
use crate::corpus::Example;
use crate::editlex::{apply_edits_lenient, deserialize_as, Flavor};
use crate::tokenize::TokenSeq;

/// Scores attached to a candidate by decoding and reranking.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentScores {
    /// Length-normalized log-probability from beam search.
    pub beam: f64,
    pub generation: Option<f64>,
    pub similarity: Option<f64>,
    pub combined: Option<f64>,
}

/// One decoded hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Decoder output without the end marker.
    pub tokens: Vec<String>,
    /// Predicted comment after parsing `tokens`.
    pub parsed: TokenSeq,
    /// Position in the beam, best first.
    pub rank: usize,
    pub scores: ComponentScores,
}

struct Hypothesis {
    ids: Vec<usize>,
    tokens: Vec<String>,
    log_prob: f64,
    state: super::net::DecoderState,
}

impl<T: Scalar> EditModel<T> {
    /// Beam search with length-normalized scores (log-probability divided by
    /// the number of emitted tokens, end marker included). Returns up to
    /// `width` candidates, best first.
    pub fn beam_search(&self, inst: &Instance, width: usize) -> Vec<Candidate> {
        let width = width.max(1);
        let mut tape = Tape::new(&self.params);
        let (dec, state) = self.start(&mut tape, inst);
        let mut live = vec![Hypothesis {
            ids: Vec::new(),
            tokens: Vec::new(),
            log_prob: 0.0,
            state,
        }];
        let mut finished: Vec<(f64, Hypothesis)> = Vec::new();
        for _ in 0..self.config.max_decode_len {
            let mut expansions: Vec<(f64, usize, usize, super::net::DecoderState)> = Vec::new();
            for (h, hyp) in live.iter().enumerate() {
                let prev = hyp.tokens.last().map_or(START, String::as_str);
                let (dist, next) = self.advance(&mut tape, inst, &dec, hyp.state, prev);
                let mut scored: Vec<(f64, usize)> = dist
                    .probs
                    .iter()
                    .enumerate()
                    .filter(|(id, p)| {
                        *id != Vocabulary::PAD_ID && *id != Vocabulary::START_ID && **p > 0.0
                    })
                    .map(|(id, p)| (hyp.log_prob + p.ln(), id))
                    .collect();
                scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                expansions.extend(
                    scored
                        .into_iter()
                        .take(width)
                        .map(|(lp, id)| (lp, h, id, next)),
                );
            }
            expansions.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut next_live = Vec::new();
            for (lp, h, id, st) in expansions.into_iter().take(width) {
                let parent = &live[h];
                let mut ids = parent.ids.clone();
                ids.push(id);
                let hyp = Hypothesis {
                    ids,
                    tokens: parent.tokens.clone(),
                    log_prob: lp,
                    state: st,
                };
                if id == Vocabulary::END_ID {
                    finished.push((lp / hyp.ids.len() as f64, hyp));
                } else {
                    let mut hyp = hyp;
                    hyp.tokens
                        .push(self.extended_token(id, &dec.oov).to_string());
                    next_live.push(hyp);
                }
            }
            live = next_live;
            if finished.len() >= width || live.is_empty() {
                break;
            }
        }
        if finished.is_empty() {
            finished = live
                .into_iter()
                .map(|h| (h.log_prob / h.ids.len().max(1) as f64, h))
                .collect();
        }
        finished.sort_by(|a, b| b.0.total_cmp(&a.0));
        finished
            .into_iter()
            .take(width)
            .enumerate()
            .map(|(rank, (score, hyp))| Candidate {
                parsed: self.parse_output(&hyp.tokens, &inst.c_old),
                tokens: hyp.tokens,
                rank,
                scores: ComponentScores {
                    beam: score,
                    ..ComponentScores::default()
                },
            })
            .collect()
    }

    /// Argmax decoding; identical to a beam of width 1.
    pub fn greedy(&self, inst: &Instance) -> Candidate {
        self.beam_search(inst, 1)
            .pop()
            .expect("beam search yields a candidate")
    }

    pub fn predict(&self, example: &Example, width: usize) -> Vec<Candidate> {
        self.beam_search(&self.instance(example), width)
    }

    /// Turns decoder output into a comment: edit sequences are applied to
    /// `c_old` leniently, comment outputs are taken verbatim.
    pub fn parse_output(&self, tokens: &[String], c_old: &TokenSeq) -> TokenSeq {
        match self.config.output_repr {
            OutputRepr::CEdit => {
                let (edits, _) = deserialize_as(tokens, Flavor::CommentCondensed);
                apply_edits_lenient(c_old, &edits).0
            }
            OutputRepr::CNew => TokenSeq::from_words(tokens),
        }
    }

    /// Geometric-mean probability of `comment` given `m_new` under a
    /// generation model; the end marker is excluded and an empty comment
    /// scores 0.
    pub fn generation_likelihood(&self, m_new: &TokenSeq, comment: &TokenSeq) -> f64 {
        if comment.is_empty() {
            return 0.0;
        }
        let inst = Instance::generation(m_new, &comment.texts());
        let logs = self.token_log_probs(&inst);
        let n = comment.len();
        (logs[..n].iter().sum::<f64>() / n as f64).exp()
    }
}
