//! Rule-based comment update baselines.

use crate::corpus::Example;
use crate::tokenize::{extract_return_statements, extract_return_type, Token, TokenKind, TokenSeq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    Copy,
    ReturnTypeSubst,
    ReturnTypeSubstNull,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [
        Baseline::Copy,
        Baseline::ReturnTypeSubst,
        Baseline::ReturnTypeSubstNull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Copy => "copy",
            Baseline::ReturnTypeSubst => "rts",
            Baseline::ReturnTypeSubstNull => "rts-null",
        }
    }

    pub fn parse(s: &str) -> Option<Baseline> {
        Baseline::ALL.into_iter().find(|b| b.name() == s)
    }

    pub fn predict(self, example: &Example) -> TokenSeq {
        match self {
            Baseline::Copy => copy_baseline(example),
            Baseline::ReturnTypeSubst => return_type_subst(example),
            Baseline::ReturnTypeSubstNull => return_type_subst_null(example),
        }
    }
}

pub fn copy_baseline(example: &Example) -> TokenSeq {
    example.c_old.clone()
}

/// Replaces every occurrence of the old return type in the comment with the
/// new one when the type changed.
pub fn return_type_subst(example: &Example) -> TokenSeq {
    substitute_return_type(&example.c_old, &example.m_old, &example.m_new)
}

pub fn substitute_return_type(c_old: &TokenSeq, m_old: &TokenSeq, m_new: &TokenSeq) -> TokenSeq {
    let (Ok(old_ty), Ok(new_ty)) = (extract_return_type(m_old), extract_return_type(m_new)) else {
        return c_old.clone();
    };
    if old_ty == new_ty || old_ty.is_empty() {
        return c_old.clone();
    }
    let toks = &c_old.tokens;
    let mut out = Vec::with_capacity(toks.len());
    let mut i = 0;
    let mut replaced = false;
    while i < toks.len() {
        if toks[i..]
            .iter()
            .take(old_ty.len())
            .map(|t| &t.text)
            .eq(old_ty.iter())
        {
            out.extend(
                new_ty
                    .iter()
                    .map(|w| Token::new(w.clone(), TokenKind::Word)),
            );
            i += old_ty.len();
            replaced = true;
        } else {
            out.push(toks[i].clone());
            i += 1;
        }
    }
    if !replaced {
        return c_old.clone();
    }
    TokenSeq::new(out, c_old.source)
}

/// Return-type substitution, then `or null if null` when `null` newly shows
/// up in a return or if statement.
pub fn return_type_subst_null(example: &Example) -> TokenSeq {
    let mut out = return_type_subst(example);
    if mentions_null(&example.m_new) && !mentions_null(&example.m_old) {
        let at = match out.tokens.last() {
            Some(t) if t.text == "." => out.tokens.len() - 1,
            _ => out.tokens.len(),
        };
        let extra = ["or", "null", "if", "null"].map(|w| Token::new(w, TokenKind::Word));
        out.tokens.splice(at..at, extra);
    }
    out
}

/// Whether `null` occurs in a return statement, an if condition, or
/// directly inside an if block.
fn mentions_null(method: &TokenSeq) -> bool {
    let is_null = |t: &Token| t.kind == TokenKind::Keyword && t.text == "null";
    if extract_return_statements(method)
        .iter()
        .any(|s| s.tokens.iter().any(is_null))
    {
        return true;
    }
    let toks = &method.tokens;
    for (i, t) in toks.iter().enumerate() {
        if !(t.kind == TokenKind::Keyword && t.text == "if")
            || toks.get(i + 1).map(|t| t.text.as_str()) != Some("(")
        {
            continue;
        }
        let Some(cond_end) = closing(toks, i + 1, "(", ")") else {
            continue;
        };
        if toks[i + 2..cond_end].iter().any(is_null) {
            return true;
        }
        let body = cond_end + 1;
        if toks.get(body).map(|t| t.text.as_str()) == Some("{") {
            let Some(end) = closing(toks, body, "{", "}") else {
                continue;
            };
            let mut depth = 0;
            for t in &toks[body + 1..end] {
                match t.text.as_str() {
                    "{" => depth += 1,
                    "}" => depth -= 1,
                    _ if depth == 0 && is_null(t) => return true,
                    _ => {}
                }
            }
        } else if toks[body..]
            .iter()
            .take_while(|t| t.text != ";")
            .any(is_null)
        {
            return true;
        }
    }
    false
}

fn closing(toks: &[Token], open_at: usize, open: &str, close: &str) -> Option<usize> {
    let mut depth = 0usize;
    for (j, t) in toks.iter().enumerate().skip(open_at) {
        if t.text == open {
            depth += 1;
        } else if t.text == close {
            depth -= 1;
            if depth == 0 {
                return Some(j);
            }
        }
    }
    None
}
