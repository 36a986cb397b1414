use comment_update::corpus::Example;
use comment_update::model::{EditModel, Instance, ModelConfig, Scalar, Trainer};
use comment_update::{EditModelF32, EditModelF64};

pub fn small(mut c: ModelConfig) -> ModelConfig {
    c.embedding_dim = 6;
    c.encoder_hidden = 5;
    c.decoder_hidden = 7;
    c.dropout = 0.0;
    c.vocab_min_count = 1;
    c
}

pub fn instances<T: Scalar>(model: &EditModel<T>, ex: &[Example]) -> Vec<Instance> {
    ex.iter().map(|e| model.instance(e)).collect()
}

/// Relative error with a floor on the denominator; entries whose gradients
/// are both below the floor are compared on an absolute scale.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-5)
}

/// Largest relative error between analytic and central-difference gradients,
/// with the parameter entry where it occurs.
pub fn gradient_check(config: ModelConfig, ex: &[Example]) -> (f64, String) {
    let model = EditModelF64::from_examples(ex, config).unwrap();
    let inst = instances(&model, ex);
    let (_, grads) = model.loss_and_gradients(&inst);
    let h = 1e-5;
    let mut worst = (0.0, String::new());
    for (pid, g) in grads.iter().enumerate() {
        for k in 0..g.data.len() {
            let mut plus = model.clone();
            plus.params.values[pid].data[k] += h;
            let mut minus = model.clone();
            minus.params.values[pid].data[k] -= h;
            let numeric = (plus.loss(&inst) - minus.loss(&inst)) / (2.0 * h);
            let e = rel_err(g.data[k], numeric);
            if e >= worst.0 {
                worst = (e, format!("{}[{k}]", model.params.names[pid]));
            }
        }
    }
    worst
}

/// Trains with default dimensions and no dropout until greedy decoding
/// reproduces every training comment; returns the epoch reached.
pub fn overfit(train: &[Example], vocab_min_count: usize) -> (Option<usize>, EditModelF32) {
    let c = ModelConfig {
        dropout: 0.0,
        max_epochs: 500,
        vocab_min_count,
        ..ModelConfig::default()
    };
    let model = EditModelF32::from_examples(train, c).unwrap();
    let inst = instances(&model, train);
    let mut trainer = Trainer::new(model);
    let mut reached = None;
    trainer
        .fit_until(&inst, &[], |epoch, m| {
            if epoch % 5 == 0 {
                let hits = train
                    .iter()
                    .zip(&inst)
                    .filter(|(e, i)| m.greedy(i).parsed.texts() == e.c_new.texts())
                    .count();
                if hits == train.len() {
                    reached = Some(epoch);
                }
            }
            reached.is_some()
        })
        .unwrap();
    (reached, trainer.into_model())
}
