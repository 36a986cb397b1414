mod common;

use comment_update::model::{
    load_checkpoint, save_checkpoint, EarlyStopping, InputRepr, Instance, ModelConfig, OutputRepr,
    Trainer, Vocabulary,
};
use comment_update::tokenize::TokenSeq;
use comment_update::{EditModelF32, EditModelF64, Error};

use common::models::*;

#[test]
fn gradients_match_finite_differences() {
    let ex = common::fixture();
    let micro = [ex[18].clone(), ex[21].clone()];
    let (worst, at) = gradient_check(small(ModelConfig::default()), &micro);
    assert!(worst < 1e-4, "{at}: {worst}");
}

#[test]
fn gradients_match_finite_differences_with_decoder_features() {
    let ex = common::fixture();
    let mut c = small(ModelConfig::default());
    c.decoder_features = true;
    c.encoder_layers = 1;
    let (worst, at) = gradient_check(c, &[ex[18].clone(), ex[21].clone()]);
    assert!(worst < 1e-4, "{at}: {worst}");
}

#[test]
fn distributions_are_normalized_and_copy_reaches_oov() {
    let ex = common::fixture();
    for input in InputRepr::ALL {
        for output in OutputRepr::ALL {
            let mut c = small(ModelConfig::default());
            c.input_repr = input;
            c.output_repr = output;
            c.vocab_min_count = 2;
            let model = EditModelF64::from_examples(&ex[..10], c).unwrap();
            for inst in instances(&model, &ex[10..14]) {
                for d in model.step_distributions(&inst) {
                    let total: f64 = d.probs.iter().sum();
                    assert!((total - 1.0).abs() < 1e-6, "{input:?}/{output:?}: {total}");
                }
            }
        }
    }
    // A comment token that never occurs in training is reachable only by copying.
    let model = EditModelF64::from_examples(&ex[..10], small(ModelConfig::default())).unwrap();
    let target = ex
        .iter()
        .skip(10)
        .find(|e| {
            e.c_old
                .texts()
                .iter()
                .any(|t| model.comment_vocab.get(t).is_none())
        })
        .unwrap();
    let inst = model.instance(target);
    let oov = inst
        .comment
        .iter()
        .find(|t| model.comment_vocab.get(t).is_none())
        .unwrap()
        .clone();
    let first_oov_position = {
        let mut seen: Vec<&String> = Vec::new();
        for t in inst.code.iter().flatten().chain(&inst.comment) {
            if model.comment_vocab.get(t).is_none() && !seen.contains(&t) {
                seen.push(t);
            }
        }
        seen.iter().position(|t| **t == oov).unwrap()
    };
    let d = &model.step_distributions(&inst)[0];
    assert!(d.probs[model.comment_vocab.len() + first_oov_position] > 0.0);
    if !inst.code.iter().flatten().any(|t| *t == oov) {
        // Without a source occurrence the token leaves the output space.
        let mut no_copy = inst.clone();
        let keep: Vec<bool> = no_copy.comment.iter().map(|t| *t != oov).collect();
        no_copy.comment.retain(|t| *t != oov);
        no_copy.comment_features = no_copy.comment_features.map(|f| {
            f.into_iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(r, _)| r)
                .collect()
        });
        let reduced = &model.step_distributions(&no_copy)[0];
        assert_eq!(reduced.probs.len(), d.probs.len() - 1);
    }
}

#[test]
fn encoder_shapes_follow_configuration() {
    let ex = common::fixture();
    for input in InputRepr::ALL {
        let c = ModelConfig {
            input_repr: input,
            dropout: 0.0,
            ..ModelConfig::default()
        };
        let model = EditModelF32::from_examples(&ex[..10], c).unwrap();
        let inst = model.instance(&ex[0]);
        let (states, init) = model.shapes(&inst);
        let code_len: usize = inst.code.iter().map(Vec::len).sum();
        assert_eq!(states[0], (code_len, 128));
        assert_eq!(states[1], (inst.comment.len(), 128));
        assert_eq!(init, 128);
    }
}

#[test]
fn six_configurations_train_and_decode() {
    let ex = common::fixture();
    for input in InputRepr::ALL {
        for output in OutputRepr::ALL {
            let c = ModelConfig {
                input_repr: input,
                output_repr: output,
                max_epochs: 1,
                beam_width: 3,
                ..ModelConfig::default()
            };
            let model = EditModelF32::from_examples(&ex[..10], c).unwrap();
            let train = instances(&model, &ex[..10]);
            let mut trainer = Trainer::new(model);
            let log = trainer.fit(&train, &[]).unwrap();
            assert_eq!(log.epochs.len(), 1);
            let model = trainer.into_model();
            for e in &ex[10..12] {
                let cands = model.predict(e, 3);
                assert!(!cands.is_empty() && cands.len() <= 3);
                assert!(cands
                    .windows(2)
                    .all(|w| w[0].scores.beam >= w[1].scores.beam));
            }
        }
    }
}

#[test]
fn nll_decreases_over_first_steps() {
    let ex = common::fixture();
    let c = ModelConfig {
        dropout: 0.0,
        vocab_min_count: 1,
        ..ModelConfig::default()
    };
    let micro = &ex[..2];
    let model = EditModelF32::from_examples(micro, c).unwrap();
    let inst = instances(&model, micro);
    let mut trainer = Trainer::new(model);
    let mut prev = trainer.model.loss(&inst);
    for step in 0..5 {
        trainer.train_epoch(&inst);
        let now = trainer.model.loss(&inst);
        assert!(now < prev, "step {step}: {now} >= {prev}");
        prev = now;
    }
}

/// Argmax decoding through teacher-forced distributions of growing prefixes.
fn reference_greedy(model: &EditModelF64, inst: &Instance) -> Vec<String> {
    let mut probe = inst.clone();
    probe.target.clear();
    let oov = {
        let mut seen: Vec<String> = Vec::new();
        for t in inst.code.iter().flatten().chain(&inst.comment) {
            if model.comment_vocab.get(t).is_none() && !seen.contains(t) {
                seen.push(t.clone());
            }
        }
        seen
    };
    for _ in 0..model.config.max_decode_len {
        let d = model.step_distributions(&probe).pop().unwrap();
        let best = (0..d.probs.len())
            .filter(|&i| i != Vocabulary::PAD_ID && i != Vocabulary::START_ID)
            .fold(None::<usize>, |acc, i| match acc {
                Some(a) if d.probs[a] >= d.probs[i] => Some(a),
                _ => Some(i),
            })
            .unwrap();
        if best == Vocabulary::END_ID {
            break;
        }
        let tok = if best < model.comment_vocab.len() {
            model.comment_vocab.token(best).to_string()
        } else {
            oov[best - model.comment_vocab.len()].clone()
        };
        probe.target.push(tok);
    }
    probe.target
}

#[test]
fn beam_of_one_is_greedy_and_beams_are_sorted() {
    let ex = common::fixture();
    let c = ModelConfig {
        max_epochs: 3,
        max_decode_len: 12,
        ..small(ModelConfig::default())
    };
    let model = EditModelF64::from_examples(&ex[..10], c).unwrap();
    let train = instances(&model, &ex[..10]);
    let mut trainer = Trainer::new(model);
    trainer.fit(&train, &[]).unwrap();
    let model = trainer.into_model();
    for e in &ex[..6] {
        let inst = model.instance(e);
        assert_eq!(
            model.beam_search(&inst, 1)[0].tokens,
            reference_greedy(&model, &inst)
        );
        assert_eq!(model.greedy(&inst), model.beam_search(&inst, 1)[0]);
        let beam = model.beam_search(&inst, 5);
        assert!(beam
            .windows(2)
            .all(|w| w[0].scores.beam >= w[1].scores.beam));
        for (rank, c) in beam.iter().enumerate() {
            assert_eq!(c.rank, rank);
            assert_eq!(c.parsed, model.parse_output(&c.tokens, &e.c_old));
        }
    }
}

/// Trains with default dimensions and no dropout until every training
/// example decodes to its reference comment; returns the epoch reached.
#[test]
fn overfits_ten_examples() {
    let ex = common::fixture();
    let (reached, _) = overfit(&ex[..10], 1);
    assert!(
        reached.is_some(),
        "training exact match did not reach 100% within 500 epochs"
    );
}

#[test]
fn copy_dominates_for_source_only_tokens() {
    let ex = common::copy_fixture();
    let c = ModelConfig {
        dropout: 0.0,
        max_epochs: 500,
        vocab_min_count: 2,
        ..ModelConfig::default()
    };
    let model = EditModelF32::from_examples(&ex, c).unwrap();
    let inst = instances(&model, &ex);
    let mut trainer = Trainer::new(model);
    trainer
        .fit_until(&inst, &[], |epoch, m| {
            epoch % 5 == 0 && m.loss(&inst) < 0.01
        })
        .unwrap();
    let model = trainer.into_model();
    assert!(model.loss(&inst) < 0.01);
    let mut checked = 0;
    for e in &ex {
        let inst = model.instance(e);
        let logs = model.token_log_probs(&inst);
        for (t, lp) in inst.target.iter().zip(&logs) {
            let in_source = inst
                .code
                .iter()
                .flatten()
                .chain(&inst.comment)
                .any(|s| s == t);
            if model.comment_vocab.get(t).is_none() && in_source {
                assert!(lp.exp() > 0.5, "{t}: {}", lp.exp());
                checked += 1;
            }
        }
    }
    assert_eq!(checked, ex.len());
}

#[test]
fn training_is_deterministic() {
    let ex = common::fixture();
    let run = || {
        let c = ModelConfig {
            max_epochs: 3,
            dropout: 0.5,
            batch_size: 4,
            ..small(ModelConfig::default())
        };
        let model = EditModelF32::from_examples(&ex[..10], c).unwrap();
        let train = instances(&model, &ex[..10]);
        let valid = instances(&model, &ex[10..14]);
        let mut t = Trainer::new(model);
        t.fit(&train, &valid).unwrap();
        let losses: Vec<(u64, u64)> = t
            .log
            .epochs
            .iter()
            .map(|e| (e.train_loss.to_bits(), e.valid_loss.to_bits()))
            .collect();
        (losses, t.model.params.values.clone())
    };
    assert_eq!(run(), run());
}

#[test]
fn early_stopping_patience() {
    let mut s = EarlyStopping::new(10);
    assert!(s.observe(5.0));
    assert!(s.observe(4.0));
    for k in 0..9 {
        assert!(!s.observe(4.0 + k as f64 * 0.1));
        assert!(!s.should_stop());
    }
    assert!(!s.observe(4.5));
    assert!(s.should_stop());
    assert_eq!(s.best(), Some(4.0));
    assert!(s.observe(3.0));
    assert!(!s.should_stop());
}

#[test]
fn training_errors() {
    assert!(matches!(
        EditModelF32::from_examples(&[], ModelConfig::default()),
        Err(Error::EmptyCorpus)
    ));
    let ex = common::fixture();
    let c = ModelConfig {
        vocab_min_count: 1000,
        ..ModelConfig::default()
    };
    assert!(matches!(
        EditModelF32::from_examples(&ex, c),
        Err(Error::VocabularyMissing(_))
    ));
    let bad = ModelConfig {
        decoder_hidden: 0,
        ..ModelConfig::default()
    };
    assert!(matches!(
        EditModelF32::from_examples(&ex, bad),
        Err(Error::Config(_))
    ));
    let model = EditModelF32::from_examples(&ex[..4], small(ModelConfig::default())).unwrap();
    let mut trainer = Trainer::new(model);
    assert!(matches!(trainer.fit(&[], &[]), Err(Error::EmptyCorpus)));
}

#[test]
fn generation_likelihood_contract() {
    let ex = common::fixture();
    let c = small(ModelConfig::generation());
    let model = EditModelF64::from_examples(&ex[..10], c).unwrap();
    let m_new = &ex[0].m_new;
    assert_eq!(
        model.generation_likelihood(m_new, &TokenSeq::from_words::<&str>(&[])),
        0.0
    );

    let one = TokenSeq::from_words(&["angle"]);
    let inst = Instance::generation(m_new, &one.texts());
    let d = &model.step_distributions(&inst)[0];
    let id = model.comment_vocab.id("angle");
    assert!((model.generation_likelihood(m_new, &one) - d.probs[id]).abs() < 1e-12);

    let c = &ex[0].c_new;
    let first = model.generation_likelihood(m_new, c);
    let _ = model.generation_likelihood(&ex[3].m_new, &ex[3].c_new);
    assert_eq!(first, model.generation_likelihood(m_new, c));
    let logs = model.token_log_probs(&Instance::generation(m_new, &c.texts()));
    let mean = logs[..c.len()].iter().sum::<f64>() / c.len() as f64;
    assert!((first - mean.exp()).abs() < 1e-12);
}

#[test]
fn checkpoint_round_trip() {
    let ex = common::fixture();
    let model = EditModelF32::from_examples(&ex[..10], small(ModelConfig::default())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&model, &path).unwrap();
    let back: EditModelF32 = load_checkpoint(&path).unwrap();
    assert_eq!(back.config, model.config);
    assert_eq!(back.comment_vocab, model.comment_vocab);
    assert_eq!(back.params.values, model.params.values);
    let inst = instances(&model, &ex[10..12]);
    assert_eq!(back.loss(&inst), model.loss(&inst));

    std::fs::write(&path, b"not a checkpoint").unwrap();
    assert!(matches!(
        load_checkpoint::<f32>(&path),
        Err(Error::Checkpoint(_))
    ));
}

#[test]
fn precision_cast_and_embedding_transfer() {
    let ex = common::fixture();
    let model = EditModelF32::from_examples(&ex[..10], small(ModelConfig::default())).unwrap();
    let wide: EditModelF64 = model.cast();
    let inst = instances(&model, &ex[..3]);
    assert!((wide.loss(&inst) - model.loss(&inst)).abs() < 1e-4);

    let generator =
        EditModelF32::from_examples(&ex[..10], small(ModelConfig::generation())).unwrap();
    let mut edit = model.clone();
    let copied = edit.init_embeddings_from(&generator).unwrap();
    assert!(copied > 0);
    let id = edit.comment_vocab.id("the");
    let gid = generator.comment_vocab.id("the");
    let find = |m: &EditModelF32, name: &str| m.params.find(name).unwrap();
    assert_eq!(
        edit.params.get(find(&edit, "comment_emb")).row(id),
        generator
            .params
            .get(find(&generator, "comment_emb"))
            .row(gid)
    );
}
