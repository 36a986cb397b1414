//! Mining driver: walks a repository's history with the `git` tool and pairs
//! documented methods by name across consecutive commits.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;

use super::RawRecord;
use crate::tokenize::{lex_method, method_name};
use crate::{Error, Result};

/// A method preceded by a Javadoc block that has an `@return` tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentedMethod {
    /// Method name as written in the source.
    pub name: String,
    /// Signature and body, annotations excluded.
    pub code: String,
    /// The `@return` clause, starting at the tag.
    pub return_comment: String,
}

fn git(repo: &Path, args: &[&str]) -> Result<String> {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .output()
        .map_err(|e| Error::Io(format!("running git: {e}")))?;
    if !out.status.success() {
        return Err(Error::Io(format!(
            "git {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// Mines records from every pair of consecutive first-parent commits
/// reachable from `HEAD`.
pub fn mine_repository(repo: &Path, project: &str) -> Result<Vec<RawRecord>> {
    let revs = git(repo, &["rev-list", "--reverse", "--first-parent", "HEAD"])?;
    let commits: Vec<&str> = revs.lines().filter(|l| !l.is_empty()).collect();
    let mut out = Vec::new();
    for pair in commits.windows(2) {
        let (before, after) = (pair[0], pair[1]);
        let changed = git(
            repo,
            &["diff", "--name-only", before, after, "--", "*.java"],
        )?;
        for path in changed.lines().filter(|l| !l.is_empty()) {
            let (Ok(old_src), Ok(new_src)) = (
                git(repo, &["show", &format!("{before}:{path}")]),
                git(repo, &["show", &format!("{after}:{path}")]),
            ) else {
                continue;
            };
            for (old, new) in pair_methods(&old_src, &new_src) {
                if old.code == new.code && old.return_comment == new.return_comment {
                    continue;
                }
                out.push(RawRecord {
                    id: format!(
                        "{project}:{}:{path}:{}",
                        &after[..after.len().min(12)],
                        new.name
                    ),
                    project: project.to_string(),
                    commit_before: before.to_string(),
                    commit_after: after.to_string(),
                    m_old: old.code,
                    m_new: new.code,
                    c_old: old.return_comment,
                    c_new: new.return_comment,
                });
            }
        }
    }
    Ok(out)
}

/// Methods whose name is unique in both versions, paired by name.
fn pair_methods(old_src: &str, new_src: &str) -> Vec<(DocumentedMethod, DocumentedMethod)> {
    fn unique(src: &str) -> HashMap<String, DocumentedMethod> {
        let mut seen: HashMap<String, Option<DocumentedMethod>> = HashMap::new();
        for m in extract_documented_methods(src) {
            seen.entry(m.name.clone())
                .and_modify(|e| *e = None)
                .or_insert(Some(m));
        }
        seen.into_iter()
            .filter_map(|(k, v)| v.map(|m| (k, m)))
            .collect()
    }
    let old = unique(old_src);
    let mut new: Vec<(String, DocumentedMethod)> = unique(new_src).into_iter().collect();
    new.sort_by(|a, b| a.0.cmp(&b.0));
    new.into_iter()
        .filter_map(|(name, n)| old.get(&name).map(|o| (o.clone(), n)))
        .collect()
}

/// Finds `/** ... */` blocks carrying `@return` that are followed by a method
/// with a body.
pub fn extract_documented_methods(src: &str) -> Vec<DocumentedMethod> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(off) = src[pos..].find("/**") {
        let doc_start = pos + off;
        let Some(end_off) = src[doc_start + 3..].find("*/") else {
            break;
        };
        let doc_end = doc_start + 3 + end_off + 2;
        pos = doc_end;
        let Some(ret) = return_clause(&src[doc_start..doc_end]) else {
            continue;
        };
        let Some((code_start, code_end)) = method_after(bytes, doc_end) else {
            continue;
        };
        let code = src[code_start..code_end].to_string();
        let Ok(name) = lex_method(&code).and_then(|m| method_name(&m)) else {
            continue;
        };
        let Some(name) = original_name(&code, &name) else {
            continue;
        };
        out.push(DocumentedMethod {
            name,
            code,
            return_comment: ret,
        });
        pos = code_end;
    }
    out
}

/// Recovers the source spelling of a subtokenized name.
fn original_name(code: &str, subtokens: &[String]) -> Option<String> {
    let joined: String = subtokens.concat();
    let head = &code[..code.find('(')?];
    head.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$'))
        .rev()
        .find(|w| !w.is_empty())
        .filter(|w| w.replace(['_', '$'], "").to_lowercase() == joined)
        .map(str::to_string)
}

/// Text of the `@return` tag up to the next block tag, with Javadoc line
/// prefixes removed.
fn return_clause(doc: &str) -> Option<String> {
    let inner = doc.trim_start_matches("/**").trim_end_matches("*/");
    let mut lines = Vec::new();
    let mut inside = false;
    for line in inner.lines() {
        let l = line.trim().trim_start_matches('*').trim();
        if let Some(i) = l.find("@return") {
            if !inside && (i == 0 || !l[..i].ends_with('{')) {
                inside = true;
                lines.push(l[i..].to_string());
                continue;
            }
        }
        if inside {
            if l.starts_with('@') {
                break;
            }
            if !l.is_empty() {
                lines.push(l.to_string());
            }
        }
    }
    inside.then(|| lines.join(" "))
}

/// Span of the declaration following a doc comment: annotations skipped,
/// signature through the matching closing brace. `None` for declarations
/// without a body.
fn method_after(b: &[u8], mut i: usize) -> Option<(usize, usize)> {
    loop {
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < b.len() && b[i] == b'@' {
            i += 1;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'.') {
                i += 1;
            }
            while i < b.len() && b[i] == b' ' {
                i += 1;
            }
            if i < b.len() && b[i] == b'(' {
                i = skip_balanced(b, i, b'(', b')')?;
            }
            continue;
        }
        break;
    }
    let start = i;
    let mut parens = 0i32;
    let mut saw_parens = false;
    while i < b.len() {
        match b[i] {
            b'(' => {
                parens += 1;
                saw_parens = true;
            }
            b')' => parens -= 1,
            b';' | b'=' if parens == 0 => return None,
            b'{' if parens == 0 => {
                if !saw_parens {
                    return None;
                }
                return Some((start, skip_balanced(b, i, b'{', b'}')?));
            }
            _ => {}
        }
        i += 1;
    }
    None
}

/// Index just past the bracket closing the one at `open_at`, skipping
/// string and character literals and comments.
fn skip_balanced(b: &[u8], open_at: usize, open: u8, close: u8) -> Option<usize> {
    let mut depth = 0usize;
    let mut i = open_at;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' => {
                let q = b[i];
                i += 1;
                while i < b.len() && b[i] != q {
                    if b[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
            }
            b'/' if b.get(i + 1) == Some(&b'/') => {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if b.get(i + 1) == Some(&b'*') => {
                i += 2;
                while i + 1 < b.len() && !(b[i] == b'*' && b[i + 1] == b'/') {
                    i += 1;
                }
                i += 1;
            }
            c if c == open => depth += 1,
            c if c == close => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}
