//! Parallel corpus of simultaneous method and `@return` comment changes.

mod git;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::return_type_subst;
use crate::editlex::{
    deserialize_as, encode_code_edits, encode_comment_edits, serialize, EditKind, EditSequence,
    Flavor,
};
use crate::tokenize::{
    extract_return_statements, extract_return_type, lex_method, method_name, tokenize_comment,
    TokenSeq,
};
use crate::{Error, Result};

pub use git::{extract_documented_methods, mine_repository, DocumentedMethod};

/// One line of a corpus file. The alternative field names used by change
/// extractors are accepted on input.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawRecord {
    #[serde(default)]
    pub id: String,
    pub project: String,
    #[serde(default)]
    pub commit_before: String,
    #[serde(default)]
    pub commit_after: String,
    #[serde(alias = "method_before")]
    pub m_old: String,
    #[serde(alias = "method_after")]
    pub m_new: String,
    #[serde(alias = "comment_before")]
    pub c_old: String,
    #[serde(alias = "comment_after")]
    pub c_new: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub raw: RawRecord,
    pub m_old: TokenSeq,
    pub m_new: TokenSeq,
    pub c_old: TokenSeq,
    pub c_new: TokenSeq,
    pub m_edit: EditSequence,
    /// Absent when both comments tokenize identically.
    pub c_edit: Option<EditSequence>,
}

impl Example {
    pub fn from_raw(raw: RawRecord) -> Result<Example> {
        let m_old = lex_method(&raw.m_old)?;
        let m_new = lex_method(&raw.m_new)?;
        let c_old = tokenize_comment(&raw.c_old)?;
        let c_new = tokenize_comment(&raw.c_new)?;
        let m_edit = encode_code_edits(&m_old, &m_new);
        let c_edit = if c_old.texts() == c_new.texts() {
            None
        } else {
            Some(encode_comment_edits(&c_old, &c_new)?)
        };
        Ok(Example {
            raw,
            m_old,
            m_new,
            c_old,
            c_new,
            m_edit,
            c_edit,
        })
    }

    pub fn id(&self) -> &str {
        &self.raw.id
    }

    pub fn project(&self) -> &str {
        &self.raw.project
    }
}

/// Reads line-delimited records. Lines that fail to parse are logged and
/// skipped; blank lines are ignored.
pub fn read_records(reader: impl BufRead) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawRecord>(&line) {
            Ok(r) => out.push(r),
            Err(e) => log::warn!("line {}: skipping unreadable record: {e}", n + 1),
        }
    }
    Ok(out)
}

pub fn read_records_file(path: &Path) -> Result<Vec<RawRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_records(std::io::BufReader::new(f))
}

pub fn write_records<'a>(
    mut w: impl Write,
    records: impl IntoIterator<Item = &'a RawRecord>,
) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Tokenizes records into examples. Records without an id get one derived
/// from their position; records that fail to tokenize are logged and skipped.
pub fn ingest(records: impl IntoIterator<Item = RawRecord>) -> Vec<Example> {
    ingest_with(records.into_iter().collect(), 1)
}

pub fn ingest_with(records: Vec<RawRecord>, threads: usize) -> Vec<Example> {
    let records: Vec<RawRecord> = records
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            if r.id.is_empty() {
                r.id = format!("ex{i:06}");
            }
            r
        })
        .collect();
    let convert = |r: &RawRecord| match Example::from_raw(r.clone()) {
        Ok(ex) => Some(ex),
        Err(e) => {
            log::warn!("record {}: skipped: {e}", r.id);
            None
        }
    };
    let threads = threads.max(1);
    if threads == 1 || records.len() < 2 {
        return records.iter().filter_map(convert).collect();
    }
    let chunk = records.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = records
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().filter_map(convert).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("ingest worker panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Neither the return type nor any return statement changed.
    NotReturnRelated,
    MethodRenamed,
    /// Comments differ only in case, punctuation or whitespace.
    Stylistic,
    /// Comment or method unchanged at the token level.
    NoChange,
    Duplicate,
}

impl RejectReason {
    pub const ALL: [RejectReason; 5] = [
        RejectReason::NotReturnRelated,
        RejectReason::MethodRenamed,
        RejectReason::Stylistic,
        RejectReason::NoChange,
        RejectReason::Duplicate,
    ];

    pub fn code(self) -> &'static str {
        match self {
            RejectReason::NotReturnRelated => "not_return_related",
            RejectReason::MethodRenamed => "method_renamed",
            RejectReason::Stylistic => "stylistic",
            RejectReason::NoChange => "no_change",
            RejectReason::Duplicate => "duplicate",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<Example>,
    pub rejected: Vec<(Example, RejectReason)>,
}

impl FilterOutcome {
    pub fn reason_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for (_, r) in &self.rejected {
            *m.entry(r.code()).or_insert(0) += 1;
        }
        m
    }
}

fn return_statement_texts(m: &TokenSeq) -> Vec<Vec<String>> {
    extract_return_statements(m)
        .iter()
        .map(TokenSeq::texts)
        .collect()
}

fn is_return_related(ex: &Example) -> bool {
    let old_ty = extract_return_type(&ex.m_old).ok();
    let new_ty = extract_return_type(&ex.m_new).ok();
    old_ty != new_ty || return_statement_texts(&ex.m_old) != return_statement_texts(&ex.m_new)
}

/// Comment words with case and punctuation dropped.
fn normalized_words(c: &TokenSeq) -> Vec<String> {
    c.tokens
        .iter()
        .map(|t| {
            t.text
                .chars()
                .filter(|ch| ch.is_alphanumeric())
                .collect::<String>()
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

fn first_failure(
    ex: &Example,
    seen: &mut HashSet<(String, String, String, String)>,
) -> Option<RejectReason> {
    if !is_return_related(ex) {
        return Some(RejectReason::NotReturnRelated);
    }
    if method_name(&ex.m_old).ok() != method_name(&ex.m_new).ok() {
        return Some(RejectReason::MethodRenamed);
    }
    if normalized_words(&ex.c_old) == normalized_words(&ex.c_new) {
        return Some(RejectReason::Stylistic);
    }
    if ex.c_old.texts() == ex.c_new.texts() || ex.m_old.texts() == ex.m_new.texts() {
        return Some(RejectReason::NoChange);
    }
    let key = (
        ex.raw.m_old.clone(),
        ex.raw.m_new.clone(),
        ex.raw.c_old.clone(),
        ex.raw.c_new.clone(),
    );
    if !seen.insert(key) {
        return Some(RejectReason::Duplicate);
    }
    None
}

/// Applies the corpus filters in order; each rejection records the first
/// filter that failed.
pub fn filter(examples: Vec<Example>) -> FilterOutcome {
    let mut seen = HashSet::new();
    let mut out = FilterOutcome::default();
    for ex in examples {
        match first_failure(&ex, &mut seen) {
            None => out.kept.push(ex),
            Some(r) => out.rejected.push((ex, r)),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        Split::ALL.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

impl Partition {
    pub fn ids(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    fn ids_mut(&mut self, split: Split) -> &mut Vec<String> {
        match split {
            Split::Train => &mut self.train,
            Split::Valid => &mut self.valid,
            Split::Test => &mut self.test,
        }
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        Split::ALL
            .into_iter()
            .find(|s| self.ids(*s).iter().any(|x| x == id))
    }

    /// Selects the examples of one split, in partition order.
    pub fn select<'a>(&self, split: Split, examples: &'a [Example]) -> Vec<&'a Example> {
        let by_id: HashMap<&str, &Example> = examples.iter().map(|e| (e.id(), e)).collect();
        self.ids(split)
            .iter()
            .filter_map(|id| by_id.get(id.as_str()).copied())
            .collect()
    }

    /// One `split<TAB>id` line per example.
    pub fn write(&self, mut w: impl Write) -> Result<()> {
        for s in Split::ALL {
            for id in self.ids(s) {
                writeln!(w, "{}\t{id}", s.name())?;
            }
        }
        Ok(())
    }

    pub fn read(reader: impl BufRead) -> Result<Partition> {
        let mut p = Partition::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (split, id) = line
                .split_once('\t')
                .and_then(|(s, id)| Some((Split::parse(s)?, id)))
                .ok_or_else(|| {
                    Error::Parse(format!("partition line {}: expected `split<TAB>id`", n + 1))
                })?;
            p.ids_mut(split).push(id.to_string());
        }
        Ok(p)
    }
}

/// Assigns whole projects to splits, approximating `ratios` (train, valid,
/// test) by example count. Projects are visited largest first after a seeded
/// shuffle, each going to the split furthest below its target.
pub fn partition(examples: &[Example], ratios: [f64; 3], seed: u64) -> Result<Partition> {
    let mut by_project: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for ex in examples {
        by_project.entry(ex.project()).or_default().push(ex.id());
    }
    if by_project.len() < 3 {
        return Err(Error::InsufficientProjects(by_project.len()));
    }
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || ratios.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Config(format!("invalid split ratios {ratios:?}")));
    }
    let mut projects: Vec<(&str, Vec<&str>)> = by_project.into_iter().collect();
    projects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    projects.sort_by_key(|(_, ids)| std::cmp::Reverse(ids.len()));

    let total = examples.len() as f64;
    let sum: f64 = ratios.iter().sum();
    let targets: Vec<f64> = ratios.iter().map(|r| r / sum * total).collect();
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); 3];
    let mut counts = [0usize; 3];
    for (pi, (_, ids)) in projects.iter().enumerate() {
        let best = (0..3)
            .max_by(|&a, &b| {
                let da = targets[a] - counts[a] as f64;
                let db = targets[b] - counts[b] as f64;
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("three splits");
        assigned[best].push(pi);
        counts[best] += ids.len();
    }
    // Every split with a positive ratio receives at least one project.
    for s in 0..3 {
        if ratios[s] > 0.0 && assigned[s].is_empty() {
            let donor = (0..3)
                .filter(|&d| assigned[d].len() > 1)
                .max_by_key(|&d| assigned[d].len());
            if let Some(d) = donor {
                let (k, _) = assigned[d]
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, &pi)| projects[pi].1.len())
                    .expect("donor has projects");
                let pi = assigned[d].remove(k);
                assigned[s].push(pi);
            }
        }
    }
    let mut out = Partition::default();
    for (s, split) in Split::ALL.into_iter().enumerate() {
        let mut pis = assigned[s].clone();
        pis.sort_unstable();
        for pi in pis {
            out.ids_mut(split)
                .extend(projects[pi].1.iter().map(|id| id.to_string()));
        }
    }
    Ok(out)
}

/// Token-multiset overlap: |old ∩ new| / max(|old|, |new|), 1 for two
/// empty sequences.
pub fn similarity<T: Eq + std::hash::Hash>(old: &[T], new: &[T]) -> f64 {
    let longest = old.len().max(new.len());
    if longest == 0 {
        return 1.0;
    }
    let mut counts: HashMap<&T, isize> = HashMap::new();
    for t in old {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut shared = 0usize;
    for t in new {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                shared += 1;
            }
        }
    }
    shared as f64 / longest as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub mean: f64,
    pub median: f64,
}

impl LengthStats {
    fn of(mut lens: Vec<usize>) -> Self {
        if lens.is_empty() {
            return LengthStats::default();
        }
        lens.sort_unstable();
        let n = lens.len();
        let mean = lens.iter().sum::<usize>() as f64 / n as f64;
        let median = if n % 2 == 1 {
            lens[n / 2] as f64
        } else {
            (lens[n / 2 - 1] + lens[n / 2]) as f64 / 2.0
        };
        LengthStats { mean, median }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub examples: usize,
    pub projects: usize,
    pub m_old_len: LengthStats,
    pub m_new_len: LengthStats,
    pub c_old_len: LengthStats,
    pub c_new_len: LengthStats,
    pub method_similarity: f64,
    pub comment_similarity: f64,
    /// Mean number of comment edit actions per example.
    pub mean_actions: f64,
    /// Comment edit action counts per kind name.
    pub action_counts: BTreeMap<String, usize>,
    /// Fraction of examples whose return-type substitution output equals
    /// the old comment.
    pub rts_unchanged: f64,
}

impl CorpusStats {
    pub fn action_percentages(&self) -> BTreeMap<String, f64> {
        let total: usize = self.action_counts.values().sum();
        self.action_counts
            .iter()
            .map(|(k, v)| {
                (
                    k.clone(),
                    if total == 0 {
                        0.0
                    } else {
                        100.0 * *v as f64 / total as f64
                    },
                )
            })
            .collect()
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "examples            {}", self.examples);
        let _ = writeln!(s, "projects            {}", self.projects);
        for (name, l) in [
            ("m_old length", self.m_old_len),
            ("m_new length", self.m_new_len),
            ("c_old length", self.c_old_len),
            ("c_new length", self.c_new_len),
        ] {
            let _ = writeln!(s, "{name:<20}mean {:.2}  median {:.1}", l.mean, l.median);
        }
        let _ = writeln!(s, "Sim(M_old, M_new)   {:.3}", self.method_similarity);
        let _ = writeln!(s, "Sim(C_old, C_new)   {:.3}", self.comment_similarity);
        let _ = writeln!(s, "actions/example     {:.2}", self.mean_actions);
        let _ = writeln!(s, "rts unchanged       {:.2}%", 100.0 * self.rts_unchanged);
        let pct = self.action_percentages();
        for (k, v) in &self.action_counts {
            let _ = writeln!(s, "  {k:<20}{v:>6}  {:>6.2}%", pct[k]);
        }
        s
    }

    /// `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "examples={}", self.examples);
        let _ = writeln!(s, "projects={}", self.projects);
        for (name, l) in [
            ("m_old_len", self.m_old_len),
            ("m_new_len", self.m_new_len),
            ("c_old_len", self.c_old_len),
            ("c_new_len", self.c_new_len),
        ] {
            let _ = writeln!(s, "{name}_mean={:.4}", l.mean);
            let _ = writeln!(s, "{name}_median={:.1}", l.median);
        }
        let _ = writeln!(s, "sim_method={:.4}", self.method_similarity);
        let _ = writeln!(s, "sim_comment={:.4}", self.comment_similarity);
        let _ = writeln!(s, "mean_actions={:.4}", self.mean_actions);
        let _ = writeln!(s, "rts_unchanged={:.4}", self.rts_unchanged);
        for (k, v) in self.action_percentages() {
            let _ = writeln!(s, "pct_{k}={v:.4}");
        }
        s
    }
}

pub fn stats(examples: &[Example]) -> CorpusStats {
    if examples.is_empty() {
        return CorpusStats::default();
    }
    let n = examples.len() as f64;
    let lens = |f: fn(&Example) -> usize| LengthStats::of(examples.iter().map(f).collect());
    let mut action_counts: BTreeMap<String, usize> = EditKind::ALL
        .iter()
        .filter(|k| **k != EditKind::Keep)
        .map(|k| (k.name().to_string(), 0))
        .collect();
    let mut actions = 0usize;
    for ex in examples {
        for a in ex.c_edit.iter().flat_map(|e| &e.actions) {
            *action_counts.entry(a.kind.name().to_string()).or_insert(0) += 1;
            actions += 1;
        }
    }
    let projects: HashSet<&str> = examples.iter().map(Example::project).collect();
    CorpusStats {
        examples: examples.len(),
        projects: projects.len(),
        m_old_len: lens(|e| e.m_old.len()),
        m_new_len: lens(|e| e.m_new.len()),
        c_old_len: lens(|e| e.c_old.len()),
        c_new_len: lens(|e| e.c_new.len()),
        method_similarity: examples
            .iter()
            .map(|e| similarity(&e.m_old.texts(), &e.m_new.texts()))
            .sum::<f64>()
            / n,
        comment_similarity: examples
            .iter()
            .map(|e| similarity(&e.c_old.texts(), &e.c_new.texts()))
            .sum::<f64>()
            / n,
        mean_actions: actions as f64 / n,
        action_counts,
        rts_unchanged: examples
            .iter()
            .filter(|e| return_type_subst(e).texts() == e.c_old.texts())
            .count() as f64
            / n,
    }
}

/// Derived per-example fields stored beside a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub id: String,
    pub m_edit: Vec<String>,
    #[serde(default)]
    pub c_edit: Option<Vec<String>>,
}

impl Sidecar {
    pub fn of(ex: &Example) -> Sidecar {
        Sidecar {
            id: ex.id().to_string(),
            m_edit: serialize(&ex.m_edit),
            c_edit: ex.c_edit.as_ref().map(serialize),
        }
    }

    pub fn m_edit(&self) -> EditSequence {
        deserialize_as(&self.m_edit, Flavor::Code).0
    }

    pub fn c_edit(&self) -> Option<EditSequence> {
        self.c_edit
            .as_ref()
            .map(|t| deserialize_as(t, Flavor::CommentCondensed).0)
    }
}

pub fn write_sidecar<'a>(
    mut w: impl Write,
    examples: impl IntoIterator<Item = &'a Example>,
) -> Result<()> {
    for ex in examples {
        let line =
            serde_json::to_string(&Sidecar::of(ex)).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_sidecar(reader: impl BufRead) -> Result<HashMap<String, Sidecar>> {
    let mut out = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Sidecar = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("sidecar line {}: {e}", n + 1)))?;
        out.insert(s.id.clone(), s);
    }
    Ok(out)
}
