//! Linear re-scoring of beam candidates.
//!
//! Beam scores are length-normalized log-probabilities; they are
//! exponentiated so every component lies in `[0, 1]` before combination.

use crate::metrics::meteor;
use crate::model::{Candidate, EditModel, Scalar};
use crate::tokenize::TokenSeq;

/// Coefficients of the beam, generation-likelihood and similarity terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub beam: f64,
    pub generation: f64,
    pub similarity: f64,
}

impl Weights {
    pub const EDIT: Weights = Weights {
        beam: 0.5,
        generation: 0.3,
        similarity: 0.2,
    };
    pub const GENERATION: Weights = Weights {
        beam: 0.5,
        generation: 0.0,
        similarity: 0.5,
    };

    pub fn combine(&self, beam_log_prob: f64, generation: f64, similarity: f64) -> f64 {
        self.beam * beam_log_prob.exp()
            + self.generation * generation
            + self.similarity * similarity
    }
}

/// Reorders by combined score, descending; ties keep beam order.
fn sort(mut candidates: Vec<Candidate>) -> Vec<Candidate> {
    candidates.sort_by(|a, b| {
        let (sa, sb) = (
            a.scores.combined.unwrap_or(f64::NEG_INFINITY),
            b.scores.combined.unwrap_or(f64::NEG_INFINITY),
        );
        sb.total_cmp(&sa).then(a.rank.cmp(&b.rank))
    });
    candidates
}

/// Edit-model reranking with a caller-supplied generation likelihood.
pub fn rerank_edit_with(
    mut candidates: Vec<Candidate>,
    c_old: &TokenSeq,
    weights: Weights,
    mut likelihood: impl FnMut(&TokenSeq) -> f64,
) -> Vec<Candidate> {
    let reference = c_old.texts();
    for c in &mut candidates {
        let gen = likelihood(&c.parsed);
        let sim = meteor(&c.parsed.texts(), &reference);
        c.scores.generation = Some(gen);
        c.scores.similarity = Some(sim);
        c.scores.combined = Some(weights.combine(c.scores.beam, gen, sim));
    }
    sort(candidates)
}

/// Edit-model reranking with default coefficients, scoring each parsed
/// candidate under `generator` given `m_new`.
pub fn rerank_edit<T: Scalar>(
    candidates: Vec<Candidate>,
    c_old: &TokenSeq,
    m_new: &TokenSeq,
    generator: &EditModel<T>,
) -> Vec<Candidate> {
    rerank_edit_with(candidates, c_old, Weights::EDIT, |c| {
        generator.generation_likelihood(m_new, c)
    })
}

pub fn rerank_generation_with(
    mut candidates: Vec<Candidate>,
    c_old: &TokenSeq,
    weights: Weights,
) -> Vec<Candidate> {
    let reference = c_old.texts();
    for c in &mut candidates {
        let sim = meteor(&c.parsed.texts(), &reference);
        c.scores.similarity = Some(sim);
        c.scores.combined = Some(weights.combine(c.scores.beam, 0.0, sim));
    }
    sort(candidates)
}

/// Generation-model reranking: beam score and similarity to `c_old`, equally
/// weighted.
pub fn rerank_generation(candidates: Vec<Candidate>, c_old: &TokenSeq) -> Vec<Candidate> {
    rerank_generation_with(candidates, c_old, Weights::GENERATION)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ComponentScores;

    fn cand(rank: usize, words: &str, beam: f64) -> Candidate {
        let tokens: Vec<String> = words.split_whitespace().map(String::from).collect();
        Candidate {
            parsed: TokenSeq::from_words(&tokens),
            tokens,
            rank,
            scores: ComponentScores {
                beam,
                ..ComponentScores::default()
            },
        }
    }

    #[test]
    fn single_candidate_keeps_order() {
        let c_old = TokenSeq::from_words(&["the", "value"]);
        let out = rerank_generation(vec![cand(0, "the value", -0.2)], &c_old);
        assert_eq!(out.len(), 1);
        let sim = meteor(&c_old.texts(), &c_old.texts());
        assert_eq!(
            out[0].scores.combined,
            Some(0.5 * (-0.2f64).exp() + 0.5 * sim)
        );
    }

    #[test]
    fn similarity_breaks_equal_beam_and_generation() {
        let c_old = TokenSeq::from_words(&["the", "roll", "angle"]);
        let cands = vec![cand(0, "a pitch", -0.5), cand(1, "the roll angle", -0.5)];
        let out = rerank_edit_with(cands, &c_old, Weights::EDIT, |_| 0.4);
        assert_eq!(out[0].rank, 1);
    }

    #[test]
    fn ties_keep_beam_order() {
        let c_old = TokenSeq::from_words(&["x"]);
        let cands = vec![cand(0, "y", -1.0), cand(1, "y", -1.0), cand(2, "y", -1.0)];
        let out = rerank_generation(cands, &c_old);
        assert_eq!(out.iter().map(|c| c.rank).collect::<Vec<_>>(), [0, 1, 2]);
    }
}
