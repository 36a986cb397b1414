//! GRU encoder-decoder models with split attention and a pointer decoder.
//!
//! The edit model encodes a code representation and the old comment with
//! separate bidirectional GRUs and decodes an edit sequence (or the new
//! comment). The generation model is the same network with a single code
//! encoder over the new method and a comment target.

mod beam;
mod checkpoint;
mod net;
mod tape;
mod train;
mod vocab;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use beam::{Candidate, ComponentScores};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use net::{EditModel, Instance, StepDistribution};
pub use tape::{ParamId, Params, Scalar, Tape, Tensor, Var};
pub use train::{Adam, EarlyStopping, EpochRecord, Trainer, TrainingLog};
pub use vocab::Vocabulary;

/// Code representation fed to the code encoder(s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputRepr {
    MNew,
    MOldAndMNew,
    MEdit,
}

/// What the decoder emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputRepr {
    CNew,
    CEdit,
}

impl InputRepr {
    pub const ALL: [InputRepr; 3] = [InputRepr::MNew, InputRepr::MOldAndMNew, InputRepr::MEdit];

    pub fn name(self) -> &'static str {
        match self {
            InputRepr::MNew => "m_new",
            InputRepr::MOldAndMNew => "m_old_and_m_new",
            InputRepr::MEdit => "m_edit",
        }
    }
}

impl OutputRepr {
    pub const ALL: [OutputRepr; 2] = [OutputRepr::CNew, OutputRepr::CEdit];

    pub fn name(self) -> &'static str {
        match self {
            OutputRepr::CNew => "c_new",
            OutputRepr::CEdit => "c_edit",
        }
    }
}

impl FromStr for InputRepr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InputRepr::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown input_repr `{s}`")))
    }
}

impl FromStr for OutputRepr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OutputRepr::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown output_repr `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    /// Per direction.
    pub encoder_hidden: usize,
    pub encoder_layers: usize,
    pub decoder_hidden: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beam_width: usize,
    pub early_stop_patience: usize,
    pub input_repr: InputRepr,
    pub output_repr: OutputRepr,
    /// Encode the old comment as a second source.
    pub use_comment_encoder: bool,
    /// Attach one-hot token features to encoder inputs.
    pub use_features: bool,
    /// Also attach features to decoder input embeddings.
    pub decoder_features: bool,
    pub vocab_min_count: usize,
    pub max_epochs: usize,
    pub max_decode_len: usize,
    /// Global gradient norm bound; 0 disables clipping.
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 64,
            encoder_hidden: 64,
            encoder_layers: 2,
            decoder_hidden: 128,
            dropout: 0.6,
            batch_size: 100,
            learning_rate: 0.001,
            beam_width: 20,
            early_stop_patience: 10,
            input_repr: InputRepr::MEdit,
            output_repr: OutputRepr::CEdit,
            use_comment_encoder: true,
            use_features: true,
            decoder_features: false,
            vocab_min_count: 2,
            max_epochs: 100,
            max_decode_len: 60,
            grad_clip: 5.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Comment generation from the new method alone.
    pub fn generation() -> Self {
        ModelConfig {
            input_repr: InputRepr::MNew,
            output_repr: OutputRepr::CNew,
            use_comment_encoder: false,
            use_features: false,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("embedding_dim", self.embedding_dim),
            ("encoder_hidden", self.encoder_hidden),
            ("encoder_layers", self.encoder_layers),
            ("decoder_hidden", self.decoder_hidden),
            ("batch_size", self.batch_size),
            ("beam_width", self.beam_width),
            ("max_decode_len", self.max_decode_len),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    /// Parses `key=value` lines; `#` starts a comment. Unset keys keep their
    /// defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ModelConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            c.set(k.trim(), v.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<F: FromStr>(key: &str, v: &str) -> Result<F> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
        }
        match key {
            "embedding_dim" => self.embedding_dim = num(key, value)?,
            "encoder_hidden" => self.encoder_hidden = num(key, value)?,
            "encoder_layers" => self.encoder_layers = num(key, value)?,
            "decoder_hidden" => self.decoder_hidden = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "beam_width" => self.beam_width = num(key, value)?,
            "early_stop_patience" => self.early_stop_patience = num(key, value)?,
            "input_repr" => self.input_repr = value.parse()?,
            "output_repr" => self.output_repr = value.parse()?,
            "use_comment_encoder" => self.use_comment_encoder = num(key, value)?,
            "use_features" => self.use_features = num(key, value)?,
            "decoder_features" => self.decoder_features = num(key, value)?,
            "vocab_min_count" => self.vocab_min_count = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "max_decode_len" => self.max_decode_len = num(key, value)?,
            "grad_clip" => self.grad_clip = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "embedding_dim={}", self.embedding_dim)?;
        writeln!(f, "encoder_hidden={}", self.encoder_hidden)?;
        writeln!(f, "encoder_layers={}", self.encoder_layers)?;
        writeln!(f, "decoder_hidden={}", self.decoder_hidden)?;
        writeln!(f, "dropout={}", self.dropout)?;
        writeln!(f, "batch_size={}", self.batch_size)?;
        writeln!(f, "learning_rate={}", self.learning_rate)?;
        writeln!(f, "beam_width={}", self.beam_width)?;
        writeln!(f, "early_stop_patience={}", self.early_stop_patience)?;
        writeln!(f, "input_repr={}", self.input_repr.name())?;
        writeln!(f, "output_repr={}", self.output_repr.name())?;
        writeln!(f, "use_comment_encoder={}", self.use_comment_encoder)?;
        writeln!(f, "use_features={}", self.use_features)?;
        writeln!(f, "decoder_features={}", self.decoder_features)?;
        writeln!(f, "vocab_min_count={}", self.vocab_min_count)?;
        writeln!(f, "max_epochs={}", self.max_epochs)?;
        writeln!(f, "max_decode_len={}", self.max_decode_len)?;
        writeln!(f, "grad_clip={}", self.grad_clip)?;
        writeln!(f, "seed={}", self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ModelConfig::default();
        assert_eq!(
            (
                c.embedding_dim,
                c.encoder_hidden,
                c.encoder_layers,
                c.decoder_hidden
            ),
            (64, 64, 2, 128)
        );
        assert_eq!(
            (c.dropout, c.batch_size, c.learning_rate),
            (0.6, 100, 0.001)
        );
        assert_eq!((c.beam_width, c.early_stop_patience), (20, 10));
        assert_eq!(
            (c.input_repr, c.output_repr),
            (InputRepr::MEdit, OutputRepr::CEdit)
        );
    }

    #[test]
    fn key_value_round_trip() {
        let mut c = ModelConfig::default();
        c.set("input_repr", "m_old_and_m_new").unwrap();
        c.set("dropout", "0.25").unwrap();
        c.set("seed", "17").unwrap();
        assert_eq!(ModelConfig::parse(&c.to_string()).unwrap(), c);
        let parsed =
            ModelConfig::parse("# experiment\noutput_repr = c_new\n\nbeam_width=5 # small\n")
                .unwrap();
        assert_eq!(
            (parsed.output_repr, parsed.beam_width),
            (OutputRepr::CNew, 5)
        );
        assert!(ModelConfig::parse("nope=1").is_err());
        assert!(ModelConfig::parse("dropout=1.5").is_err());
        assert!(ModelConfig::parse("input_repr=ast").is_err());
    }
}
