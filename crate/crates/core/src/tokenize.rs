//! Lexing of Java-like methods and `@return` comments into subtokenized
//! [`TokenSeq`]s.
//!
//! Compound identifiers are split on camelCase, snake_case and letter/digit
//! boundaries. Each resulting subtoken remembers the compound it came from so
//! that shared subtoken features can be recovered later.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Operator,
    Literal,
    Punctuation,
    Word,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// Position of this subtoken inside the compound token it was split from.
    pub parent_index: Option<usize>,
    pub parent_text: Option<String>,
}

impl Token {
    pub fn new(text: impl Into<String>, kind: TokenKind) -> Self {
        Token {
            text: text.into(),
            kind,
            parent_index: None,
            parent_text: None,
        }
    }

    pub fn is_subtoken(&self) -> bool {
        self.parent_index.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Method,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSeq {
    pub tokens: Vec<Token>,
    pub source: Source,
}

impl TokenSeq {
    pub fn new(tokens: Vec<Token>, source: Source) -> Self {
        TokenSeq { tokens, source }
    }

    /// Builds an unannotated comment sequence from plain token texts.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        let tokens = words
            .iter()
            .map(|w| {
                let w = w.as_ref();
                let kind = if is_punct_token(w) {
                    TokenKind::Punctuation
                } else {
                    TokenKind::Word
                };
                Token::new(w, kind)
            })
            .collect();
        TokenSeq {
            tokens,
            source: Source::Comment,
        }
    }

    pub fn texts(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.text.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Space-joined token texts.
    pub fn joined(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Ranges of tokens that came from the same source token.
    pub fn groups(&self) -> Vec<std::ops::Range<usize>> {
        let mut out: Vec<std::ops::Range<usize>> = Vec::new();
        for (i, t) in self.tokens.iter().enumerate() {
            match t.parent_index {
                Some(k) if k > 0 && !out.is_empty() => out.last_mut().unwrap().end = i + 1,
                _ => out.push(i..i + 1),
            }
        }
        out
    }
}

fn is_punct_token(w: &str) -> bool {
    w.chars().all(|c| c.is_ascii_punctuation()) && !w.is_empty()
}

pub const JAVA_KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "short",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "void",
    "volatile",
    "while",
    "true",
    "false",
    "null",
    "var",
];

const MODIFIERS: &[&str] = &[
    "public",
    "private",
    "protected",
    "static",
    "final",
    "abstract",
    "synchronized",
    "native",
    "strictfp",
    "default",
    "transient",
    "volatile",
];

pub fn is_java_keyword(s: &str) -> bool {
    JAVA_KEYWORDS.contains(&s)
}

// Longest first so that maximal munch works by prefix test.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "==", "!=", "<=", ">=", "&&", "||", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "+", "-", "*", "/", "%", "=", "<",
    ">", "!", "~", "?", ":", "&", "|", "^",
];

const PUNCTUATION: &[char] = &['(', ')', '{', '}', '[', ']', ';', ',', '.', '@'];

pub fn is_operator(s: &str) -> bool {
    OPERATORS.contains(&s)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Lower,
    Upper,
    Digit,
    Sep,
}

fn class_of(c: char) -> CharClass {
    if c == '_' || c == '$' {
        CharClass::Sep
    } else if c.is_ascii_digit() {
        CharClass::Digit
    } else if c.is_uppercase() {
        CharClass::Upper
    } else {
        CharClass::Lower
    }
}

/// Splits an identifier-like token on underscores, case transitions and
/// letter/digit transitions. Output is lowercased; a token that does not split
/// yields one subtoken with no index.
pub fn subtokenize(token_text: &str) -> Vec<(String, Option<usize>)> {
    let chars: Vec<char> = token_text.chars().collect();
    let mut pieces: Vec<String> = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let cls = class_of(c);
        if cls == CharClass::Sep {
            if !cur.is_empty() {
                pieces.push(std::mem::take(&mut cur));
            }
            continue;
        }
        if let Some(&prev) = cur.chars().last().as_ref() {
            let pcls = class_of(prev);
            let next = chars.get(i + 1).map(|&n| class_of(n));
            let split = match (pcls, cls) {
                (CharClass::Lower, CharClass::Upper) => true,
                (CharClass::Digit, CharClass::Upper) | (CharClass::Digit, CharClass::Lower) => true,
                (CharClass::Upper, CharClass::Digit) | (CharClass::Lower, CharClass::Digit) => true,
                // "HTTPServer": split before the last capital of an acronym run.
                (CharClass::Upper, CharClass::Upper) => next == Some(CharClass::Lower),
                _ => false,
            };
            if split {
                pieces.push(std::mem::take(&mut cur));
            }
        }
        cur.push(c);
    }
    if !cur.is_empty() {
        pieces.push(cur);
    }
    if pieces.is_empty() {
        return vec![(token_text.to_lowercase(), None)];
    }
    if pieces.len() == 1 {
        return vec![(pieces.remove(0).to_lowercase(), None)];
    }
    pieces
        .into_iter()
        .enumerate()
        .map(|(i, p)| (p.to_lowercase(), Some(i)))
        .collect()
}

fn push_subtokens(out: &mut Vec<Token>, raw: &str, kind: TokenKind) {
    let subs = subtokenize(raw);
    let split = subs.len() > 1;
    for (text, idx) in subs {
        out.push(Token {
            text,
            kind,
            parent_index: idx,
            parent_text: if split { Some(raw.to_string()) } else { None },
        });
    }
}

fn escape_literal(raw: &str) -> String {
    let mut s = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            ' ' => s.push_str("\\u0020"),
            '\t' => s.push_str("\\t"),
            '\n' => s.push_str("\\n"),
            '\r' => s.push_str("\\r"),
            c if c.is_whitespace() => s.push_str(&format!("\\u{:04x}", c as u32)),
            c => s.push(c),
        }
    }
    s
}

/// Lexes a Java-like method into classified, subtokenized tokens.
///
/// Comments are dropped and string/char literals stay whole (quotes kept,
/// inner whitespace escaped).
pub fn lex_method(source_text: &str) -> Result<TokenSeq> {
    let chars: Vec<char> = source_text.chars().collect();
    let mut out = Vec::new();
    let mut stack: Vec<char> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                i += 1;
            }
            i = (i + 2).min(chars.len());
            continue;
        }
        if c == '"' || c == '\'' {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i] != c {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            if i >= chars.len() {
                return Err(Error::UnbalancedDelimiters(format!(
                    "unterminated literal at {start}"
                )));
            }
            i += 1;
            let raw: String = chars[start..i].iter().collect();
            out.push(Token::new(escape_literal(&raw), TokenKind::Literal));
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric() || chars[i] == '.' || chars[i] == '_')
            {
                // stop at a member access such as `1.foo` is impossible in Java; keep it greedy
                i += 1;
            }
            let raw: String = chars[start..i].iter().collect();
            out.push(Token::new(raw.to_lowercase(), TokenKind::Literal));
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$')
            {
                i += 1;
            }
            let raw: String = chars[start..i].iter().collect();
            if is_java_keyword(&raw) {
                out.push(Token::new(raw, TokenKind::Keyword));
            } else {
                push_subtokens(&mut out, &raw, TokenKind::Identifier);
            }
            continue;
        }
        if PUNCTUATION.contains(&c) {
            match c {
                '(' | '{' | '[' => stack.push(c),
                ')' | '}' | ']' => {
                    let want = match c {
                        ')' => '(',
                        '}' => '{',
                        _ => '[',
                    };
                    if stack.pop() != Some(want) {
                        return Err(Error::UnbalancedDelimiters(format!(
                            "unexpected '{c}' at {i}"
                        )));
                    }
                }
                _ => {}
            }
            out.push(Token::new(c.to_string(), TokenKind::Punctuation));
            i += 1;
            continue;
        }
        let rest: String = chars[i..(i + 4).min(chars.len())].iter().collect();
        if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(*op)) {
            out.push(Token::new(*op, TokenKind::Operator));
            i += op.chars().count();
            continue;
        }
        // Unknown symbol (e.g. '#', '\\'): keep as punctuation.
        out.push(Token::new(c.to_string(), TokenKind::Punctuation));
        i += 1;
    }
    if let Some(open) = stack.last() {
        return Err(Error::UnbalancedDelimiters(format!("unclosed '{open}'")));
    }
    Ok(TokenSeq::new(out, Source::Method))
}

fn strip_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '<' {
            let tag_like = chars
                .peek()
                .is_some_and(|n| n.is_ascii_alphabetic() || *n == '/' || *n == '!');
            if tag_like {
                let mut buf = String::new();
                let mut closed = false;
                for n in chars.by_ref() {
                    if n == '>' {
                        closed = true;
                        break;
                    }
                    buf.push(n);
                }
                if closed {
                    out.push(' ');
                } else {
                    out.push('<');
                    out.push_str(&buf);
                }
                continue;
            }
        }
        out.push(c);
    }
    out
}

/// Tokenizes a raw `@return` comment: strips Javadoc framing, HTML tags and
/// the tag itself, splits on whitespace and punctuation (punctuation kept as
/// tokens) and subtokenizes code-like words.
pub fn tokenize_comment(comment_text: &str) -> Result<TokenSeq> {
    let mut body = String::new();
    for line in comment_text.lines() {
        let mut l = line.trim();
        l = l.strip_prefix("/**").unwrap_or(l);
        l = l.strip_suffix("*/").unwrap_or(l);
        let l = l.trim_start().trim_start_matches('*');
        body.push_str(l);
        body.push(' ');
    }
    let stripped = strip_html(&body);
    let mut text = stripped.trim_start();
    if let Some(rest) = text.strip_prefix("@return") {
        text = rest;
    }
    let mut tokens = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, tokens: &mut Vec<Token>| {
        if !word.is_empty() {
            push_subtokens(tokens, word, TokenKind::Word);
            word.clear();
        }
    };
    for c in text.chars() {
        if c.is_whitespace() {
            flush(&mut word, &mut tokens);
        } else if c.is_alphanumeric() || c == '_' {
            word.push(c);
        } else {
            flush(&mut word, &mut tokens);
            tokens.push(Token::new(c.to_string(), TokenKind::Punctuation));
        }
    }
    flush(&mut word, &mut tokens);
    if tokens.is_empty() {
        return Err(Error::EmptyComment);
    }
    Ok(TokenSeq::new(tokens, Source::Comment))
}

/// Position of the method name group: the first identifier followed by `(`
/// at brace depth 0 that is not an annotation.
fn method_name_group(method: &TokenSeq, groups: &[std::ops::Range<usize>]) -> Option<usize> {
    let toks = &method.tokens;
    for (g, range) in groups.iter().enumerate() {
        let first = &toks[range.start];
        if first.text == "{" {
            return None;
        }
        if first.kind != TokenKind::Identifier {
            continue;
        }
        let next = toks.get(range.end);
        if next.map(|t| t.text.as_str()) != Some("(") {
            continue;
        }
        if g > 0 && toks[groups[g - 1].start].text == "@" {
            continue;
        }
        return Some(g);
    }
    None
}

/// Subtokenized method name taken from the signature.
pub fn method_name(method: &TokenSeq) -> Result<Vec<String>> {
    let groups = method.groups();
    let g = method_name_group(method, &groups).ok_or(Error::NoSignature)?;
    Ok(method.tokens[groups[g].clone()]
        .iter()
        .map(|t| t.text.clone())
        .collect())
}

/// Subtokenized return type taken from the method signature.
pub fn extract_return_type(method: &TokenSeq) -> Result<Vec<String>> {
    let groups = method.groups();
    let name = method_name_group(method, &groups).ok_or(Error::NoSignature)?;
    let toks = &method.tokens;
    let mut g = name;
    let mut depth = 0i32;
    let mut collected: Vec<usize> = Vec::new();
    // Walk left over the type: generic brackets, array brackets, qualified names.
    while g > 0 {
        g -= 1;
        let t = &toks[groups[g].start];
        match t.text.as_str() {
            ">" | ">>" | ">>>" => {
                depth += t.text.len() as i32;
                collected.push(g);
                continue;
            }
            "<" => {
                depth -= 1;
                collected.push(g);
                continue;
            }
            "]" | "[" | "," | "?" | "." => {
                collected.push(g);
                continue;
            }
            _ => {}
        }
        if depth > 0 {
            collected.push(g);
            continue;
        }
        let is_type_word = matches!(t.kind, TokenKind::Identifier)
            || (t.kind == TokenKind::Keyword && !MODIFIERS.contains(&t.text.as_str()));
        if !is_type_word {
            break;
        }
        collected.push(g);
        // A qualified type continues leftwards only across a dot.
        if g == 0 || toks[groups[g - 1].start].text != "." {
            break;
        }
    }
    let mut idx: Vec<usize> = collected
        .into_iter()
        .flat_map(|g| groups[g].clone())
        .filter(|&i| matches!(toks[i].kind, TokenKind::Identifier | TokenKind::Keyword))
        .collect();
    idx.sort_unstable();
    if idx.is_empty() {
        return Err(Error::NoSignature);
    }
    Ok(idx.into_iter().map(|i| toks[i].text.clone()).collect())
}

/// Token spans of each `return` statement, without the keyword and the
/// terminating semicolon.
pub fn extract_return_statements(method: &TokenSeq) -> Vec<TokenSeq> {
    let toks = &method.tokens;
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if toks[i].kind == TokenKind::Keyword && toks[i].text == "return" {
            let start = i + 1;
            let mut depth = 0i32;
            let mut j = start;
            while j < toks.len() {
                match toks[j].text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => {
                        if depth == 0 {
                            break;
                        }
                        depth -= 1;
                    }
                    ";" if depth == 0 => break,
                    _ => {}
                }
                j += 1;
            }
            out.push(TokenSeq::new(toks[start..j].to_vec(), method.source));
            i = j;
        }
        i += 1;
    }
    out
}
