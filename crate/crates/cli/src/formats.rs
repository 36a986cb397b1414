//! Line formats shared by the subcommands.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use comment_update::corpus::{ingest, read_records_file, Example, Partition, Split};
use comment_update::model::{Candidate, ComponentScores};
use comment_update::tokenize::TokenSeq;
use serde::{Deserialize, Serialize};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes to `path`, or stdout when absent.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

/// Tokenized examples of a corpus file, optionally restricted to one split.
pub fn examples(
    input: &Path,
    partition: Option<&Path>,
    split: Option<Split>,
) -> Result<Vec<Example>> {
    let all = ingest(read_records_file(input)?);
    match (partition, split) {
        (Some(p), Some(s)) => {
            let part = Partition::read(open(p)?)?;
            Ok(part.select(s, &all).into_iter().cloned().collect())
        }
        (None, None) => Ok(all),
        _ => bail!("--partition and --split go together"),
    }
}

/// `id<TAB>space-separated tokens` lines.
pub fn write_rows<'a>(
    mut w: impl Write,
    rows: impl IntoIterator<Item = (&'a str, Vec<String>)>,
) -> Result<()> {
    for (id, toks) in rows {
        writeln!(w, "{id}\t{}", toks.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, rest)) = line.split_once('\t') else {
            bail!("{}:{}: expected `id<TAB>tokens`", path.display(), n + 1);
        };
        out.push((
            id.to_string(),
            rest.split_whitespace().map(String::from).collect(),
        ));
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StoredCandidate {
    pub tokens: Vec<String>,
    pub comment: Vec<String>,
    pub scores: ComponentScores,
}

/// One beam per line.
#[derive(Debug, Serialize, Deserialize)]
pub struct Beam {
    pub id: String,
    pub candidates: Vec<StoredCandidate>,
}

impl Beam {
    pub fn of(id: &str, cands: &[Candidate]) -> Beam {
        let candidates = cands
            .iter()
            .map(|c| StoredCandidate {
                tokens: c.tokens.clone(),
                comment: c.parsed.texts(),
                scores: c.scores.clone(),
            })
            .collect();
        Beam {
            id: id.to_string(),
            candidates,
        }
    }

    pub fn candidates(&self) -> Vec<Candidate> {
        self.candidates
            .iter()
            .enumerate()
            .map(|(rank, c)| Candidate {
                tokens: c.tokens.clone(),
                parsed: TokenSeq::from_words(&c.comment),
                rank,
                scores: c.scores.clone(),
            })
            .collect()
    }
}

pub fn write_beams(mut w: impl Write, beams: &[Beam]) -> Result<()> {
    for b in beams {
        writeln!(w, "{}", serde_json::to_string(b)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_beams(path: &Path) -> Result<Vec<Beam>> {
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), n + 1))?,
        );
    }
    Ok(out)
}
