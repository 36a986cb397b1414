//! Binary checkpoints: magic, version, config text, both vocabularies, then
//! named tensors stored as little-endian `f32`.

use std::io::{Read, Write};
use std::path::Path;

use super::net::EditModel;
use super::tape::{lit, Scalar, Tensor};
use super::vocab::Vocabulary;
use super::ModelConfig;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"CUPDCKPT";
const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

struct Writer<W>(W);

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> Result<()> {
        self.0.write_all(&v.to_le_bytes()).map_err(io)
    }

    fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len() as u32)?;
        self.0.write_all(s.as_bytes()).map_err(io)
    }

    fn vocab(&mut self, v: &Vocabulary) -> Result<()> {
        self.u32(v.len() as u32)?;
        v.tokens().iter().try_for_each(|t| self.str(t))
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.0.len() < n {
            return Err(bad("truncated checkpoint"));
        }
        let (head, rest) = self.0.split_at(n);
        self.0 = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("four bytes"),
        ))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("invalid utf-8"))
    }

    fn vocab(&mut self) -> Result<Vec<String>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.str()).collect()
    }
}

pub fn save_checkpoint<T: Scalar>(model: &EditModel<T>, path: &Path) -> Result<()> {
    let file =
        std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = Writer(std::io::BufWriter::new(file));
    w.0.write_all(MAGIC).map_err(io)?;
    w.u32(VERSION)?;
    w.str(&model.config.to_string())?;
    w.vocab(&model.code_vocab)?;
    w.vocab(&model.comment_vocab)?;
    w.u32(model.params.values.len() as u32)?;
    for (name, t) in model.params.names.iter().zip(&model.params.values) {
        w.str(name)?;
        w.u32(t.rows as u32)?;
        w.u32(t.cols as u32)?;
        for x in &t.data {
            let v = x.to_f32().unwrap_or(f32::NAN);
            w.0.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.0.flush().map_err(io)
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<EditModel<T>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut r = Reader(&bytes);
    if r.take(MAGIC.len())? != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let config = ModelConfig::parse(&r.str()?)?;
    let code = r.vocab()?;
    let comment = r.vocab()?;
    let mut model = EditModel::<T>::new(
        config,
        Vocabulary::from_tokens(code),
        Vocabulary::from_tokens(comment),
    )?;
    let n = r.u32()? as usize;
    if n != model.params.values.len() {
        return Err(bad(format!(
            "expected {} tensors, found {n}",
            model.params.values.len()
        )));
    }
    for _ in 0..n {
        let name = r.str()?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let id = model
            .params
            .find(&name)
            .ok_or_else(|| bad(format!("unknown tensor `{name}`")))?;
        let slot = &mut model.params.values[id.0];
        if (slot.rows, slot.cols) != (rows, cols) {
            return Err(bad(format!(
                "tensor `{name}` is {rows}x{cols}, expected {}x{}",
                slot.rows, slot.cols
            )));
        }
        let raw = r.take(rows * cols * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| lit(f32::from_le_bytes(c.try_into().expect("four bytes")) as f64))
            .collect();
        *slot = Tensor::from_vec(rows, cols, data);
    }
    if !r.0.is_empty() {
        return Err(bad("trailing bytes after tensors"));
    }
    Ok(model)
}
