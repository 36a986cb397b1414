//! Per-token categorical features for code edit sequences and old comments.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::editlex::{is_edit_keyword, serialize, EditKind, EditSequence};
use crate::tokenize::{
    extract_return_statements, extract_return_type, is_java_keyword, is_operator, Token, TokenKind,
    TokenSeq,
};

/// Subtoken indices at or above this value share one bucket.
pub const SUBTOKEN_INDEX_CAP: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanMembership {
    Insert,
    Delete,
    ReplaceNew,
    ReplaceOld,
    Keep,
    None,
}

impl SpanMembership {
    pub const ALL: [SpanMembership; 6] = [
        SpanMembership::Insert,
        SpanMembership::Delete,
        SpanMembership::ReplaceNew,
        SpanMembership::ReplaceOld,
        SpanMembership::Keep,
        SpanMembership::None,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Det,
    Prep,
    Pron,
    Num,
    Punct,
    Other,
}

impl PosTag {
    pub const ALL: [PosTag; 10] = [
        PosTag::Noun,
        PosTag::Verb,
        PosTag::Adj,
        PosTag::Adv,
        PosTag::Det,
        PosTag::Prep,
        PosTag::Pron,
        PosTag::Num,
        PosTag::Punct,
        PosTag::Other,
    ];
}

/// Whether a token matches something present in the old version, the new
/// version, or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VersionMatch {
    UniqueOld,
    UniqueNew,
    Both,
    None,
}

impl VersionMatch {
    pub const ALL: [VersionMatch; 4] = [
        VersionMatch::UniqueOld,
        VersionMatch::UniqueNew,
        VersionMatch::Both,
        VersionMatch::None,
    ];

    fn from_flags(in_old: bool, in_new: bool) -> Self {
        match (in_old, in_new) {
            (true, true) => VersionMatch::Both,
            (true, false) => VersionMatch::UniqueOld,
            (false, true) => VersionMatch::UniqueNew,
            (false, false) => VersionMatch::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub token: String,
    // code rows
    pub is_edit_keyword: bool,
    pub is_java_keyword: bool,
    pub is_operator: bool,
    pub span_membership: SpanMembership,
    pub matches_comment_token: bool,
    // comment rows
    pub matches_inserted_code: bool,
    pub matches_deleted_code: bool,
    pub matches_replaced_code: bool,
    pub appears_multiple: bool,
    pub is_stop_word: bool,
    pub pos_tag: Option<PosTag>,
    // shared
    pub is_subtoken: bool,
    pub subtoken_index: Option<usize>,
    pub return_stmt_match: VersionMatch,
    pub return_type_match: VersionMatch,
}

impl FeatureRecord {
    fn neutral(token: &str) -> Self {
        FeatureRecord {
            token: token.to_string(),
            is_edit_keyword: false,
            is_java_keyword: false,
            is_operator: false,
            span_membership: SpanMembership::None,
            matches_comment_token: false,
            matches_inserted_code: false,
            matches_deleted_code: false,
            matches_replaced_code: false,
            appears_multiple: false,
            is_stop_word: false,
            pos_tag: None,
            is_subtoken: false,
            subtoken_index: None,
            return_stmt_match: VersionMatch::None,
            return_type_match: VersionMatch::None,
        }
    }

    /// Width of [`FeatureRecord::one_hot`].
    pub const WIDTH: usize = 3 + 6 + 1 + 3 + 2 + 11 + 1 + (SUBTOKEN_INDEX_CAP + 2) + 4 + 4;

    /// Concatenated indicator encoding: booleans take one slot, enums one
    /// slot per value (absent values included).
    pub fn one_hot(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(Self::WIDTH);
        let b = |x: bool| u8::from(x);
        v.extend([
            b(self.is_edit_keyword),
            b(self.is_java_keyword),
            b(self.is_operator),
        ]);
        v.extend(
            SpanMembership::ALL
                .iter()
                .map(|s| b(*s == self.span_membership)),
        );
        v.push(b(self.matches_comment_token));
        v.extend([
            b(self.matches_inserted_code),
            b(self.matches_deleted_code),
            b(self.matches_replaced_code),
        ]);
        v.extend([b(self.appears_multiple), b(self.is_stop_word)]);
        v.extend(PosTag::ALL.iter().map(|p| b(Some(*p) == self.pos_tag)));
        v.push(b(self.pos_tag.is_none()));
        v.push(b(self.is_subtoken));
        v.extend((0..=SUBTOKEN_INDEX_CAP).map(|i| b(self.subtoken_index == Some(i))));
        v.push(b(self.subtoken_index.is_none()));
        v.extend(
            VersionMatch::ALL
                .iter()
                .map(|m| b(*m == self.return_stmt_match)),
        );
        v.extend(
            VersionMatch::ALL
                .iter()
                .map(|m| b(*m == self.return_type_match)),
        );
        debug_assert_eq!(v.len(), Self::WIDTH);
        v
    }

    /// Indices of the set slots in [`FeatureRecord::one_hot`].
    pub fn active(&self) -> Vec<usize> {
        self.one_hot()
            .iter()
            .enumerate()
            .filter(|(_, x)| **x == 1)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureRecord>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Tab-separated columns, one row per token, with a header line.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from(
            "token\tis_edit_keyword\tis_java_keyword\tis_operator\tspan_membership\tmatches_comment_token\t\
             matches_inserted_code\tmatches_deleted_code\tmatches_replaced_code\tappears_multiple\tis_stop_word\t\
             pos_tag\tis_subtoken\tsubtoken_index\treturn_stmt_match\treturn_type_match\n",
        );
        let b = |x: bool| if x { "1" } else { "0" };
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.token,
                b(r.is_edit_keyword),
                b(r.is_java_keyword),
                b(r.is_operator),
                label(&r.span_membership),
                b(r.matches_comment_token),
                b(r.matches_inserted_code),
                b(r.matches_deleted_code),
                b(r.matches_replaced_code),
                b(r.appears_multiple),
                b(r.is_stop_word),
                r.pos_tag.map_or_else(|| "-".to_string(), |p| label(&p)),
                b(r.is_subtoken),
                r.subtoken_index
                    .map_or_else(|| "-".to_string(), |i| i.to_string()),
                label(&r.return_stmt_match),
                label(&r.return_type_match),
            );
        }
        s
    }
}

fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(String::from))
        .unwrap_or_default()
}

/// Part-of-speech tagging over lowercased comment tokens.
pub trait PosTagger {
    fn tag(&self, tokens: &[String]) -> Vec<PosTag>;
}

/// Closed-class lexicon plus suffix rules.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexiconTagger;

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "each", "every", "any", "some", "no",
    "all", "both", "either", "neither", "another", "such",
];
const PREPOSITIONS: &[&str] = &[
    "in",
    "on",
    "at",
    "of",
    "for",
    "to",
    "from",
    "by",
    "with",
    "without",
    "about",
    "into",
    "onto",
    "over",
    "under",
    "between",
    "among",
    "through",
    "during",
    "before",
    "after",
    "above",
    "below",
    "within",
    "upon",
    "via",
    "per",
    "across",
    "against",
    "along",
    "around",
    "behind",
    "beyond",
    "except",
    "inside",
    "outside",
    "since",
    "until",
    "toward",
    "towards",
    "than",
    "as",
    "if",
    "or",
    "and",
    "but",
    "nor",
    "whether",
    "unless",
    "otherwise",
    "while",
    "when",
    "where",
];
const PRONOUNS: &[&str] = &[
    "i",
    "you",
    "he",
    "she",
    "it",
    "we",
    "they",
    "me",
    "him",
    "her",
    "us",
    "them",
    "its",
    "their",
    "our",
    "your",
    "his",
    "my",
    "mine",
    "yours",
    "theirs",
    "itself",
    "themselves",
    "which",
    "who",
    "whom",
    "whose",
    "what",
    "one",
    "ones",
];
const VERBS: &[&str] = &[
    "is",
    "are",
    "was",
    "were",
    "be",
    "been",
    "being",
    "has",
    "have",
    "had",
    "do",
    "does",
    "did",
    "can",
    "could",
    "will",
    "would",
    "shall",
    "should",
    "may",
    "might",
    "must",
    "return",
    "returns",
    "get",
    "gets",
    "set",
    "sets",
    "contains",
    "contain",
    "create",
    "creates",
    "make",
    "makes",
    "find",
    "finds",
    "use",
    "uses",
    "exists",
    "exist",
    "represents",
    "represent",
    "indicates",
    "indicate",
    "denotes",
    "gives",
    "give",
    "throws",
    "throw",
    "add",
    "adds",
    "remove",
    "removes",
    "compute",
    "computes",
    "calculate",
    "calculates",
];
const ADVERBS: &[&str] = &[
    "not",
    "never",
    "always",
    "also",
    "only",
    "already",
    "otherwise",
    "else",
    "just",
    "then",
    "there",
    "here",
    "very",
    "too",
    "again",
    "still",
    "yet",
    "even",
    "ever",
    "now",
    "often",
    "instead",
];
const ADJECTIVES: &[&str] = &[
    "new",
    "old",
    "true",
    "false",
    "null",
    "empty",
    "current",
    "first",
    "last",
    "next",
    "previous",
    "given",
    "specified",
    "same",
    "other",
    "valid",
    "invalid",
    "default",
    "non",
    "full",
    "whole",
    "total",
    "maximum",
    "minimum",
    "max",
    "min",
    "possible",
    "available",
    "unique",
    "own",
    "many",
    "more",
    "most",
    "less",
    "least",
    "few",
    "several",
    "different",
    "single",
    "multiple",
];
const NUMBER_WORDS: &[&str] = &[
    "zero", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

impl LexiconTagger {
    fn tag_one(token: &str) -> PosTag {
        if token.is_empty() {
            return PosTag::Other;
        }
        if token.chars().all(|c| c.is_ascii_punctuation()) {
            return PosTag::Punct;
        }
        if token.chars().all(|c| c.is_ascii_digit()) || NUMBER_WORDS.contains(&token) {
            return PosTag::Num;
        }
        for (list, tag) in [
            (DETERMINERS, PosTag::Det),
            (PRONOUNS, PosTag::Pron),
            (PREPOSITIONS, PosTag::Prep),
            (VERBS, PosTag::Verb),
            (ADVERBS, PosTag::Adv),
            (ADJECTIVES, PosTag::Adj),
        ] {
            if list.contains(&token) {
                return tag;
            }
        }
        if !token.chars().any(|c| c.is_alphabetic()) {
            return PosTag::Other;
        }
        if token.len() > 4 && token.ends_with("ly") {
            return PosTag::Adv;
        }
        if token.len() > 4
            && (token.ends_with("ed") || token.ends_with("ing") || token.ends_with("ize"))
        {
            return PosTag::Verb;
        }
        const ADJ_SUFFIXES: [&str; 8] =
            ["able", "ible", "ous", "ive", "ful", "less", "ical", "ary"];
        if token.len() > 5 && ADJ_SUFFIXES.iter().any(|s| token.ends_with(s)) {
            return PosTag::Adj;
        }
        PosTag::Noun
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, tokens: &[String]) -> Vec<PosTag> {
        tokens
            .iter()
            .map(|t| Self::tag_one(&t.to_lowercase()))
            .collect()
    }
}

pub const STOP_WORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "all",
    "am",
    "an",
    "and",
    "any",
    "are",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "could",
    "did",
    "do",
    "does",
    "doing",
    "down",
    "during",
    "each",
    "few",
    "for",
    "from",
    "further",
    "had",
    "has",
    "have",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "itself",
    "just",
    "me",
    "more",
    "most",
    "my",
    "myself",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "on",
    "once",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "same",
    "she",
    "should",
    "so",
    "some",
    "such",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "under",
    "until",
    "up",
    "very",
    "was",
    "we",
    "were",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "whom",
    "why",
    "will",
    "with",
    "would",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
];

pub fn is_stop_word(s: &str) -> bool {
    STOP_WORDS.contains(&s.to_lowercase().as_str())
}

/// Token sets of the return statements and return type of one method.
struct ReturnInfo {
    stmt: HashSet<String>,
    ty: HashSet<String>,
}

impl ReturnInfo {
    fn of(method: &TokenSeq) -> Self {
        let stmt = extract_return_statements(method)
            .iter()
            .flat_map(|s| s.tokens.iter().map(|t| t.text.to_lowercase()))
            .collect();
        let ty = extract_return_type(method)
            .unwrap_or_default()
            .into_iter()
            .map(|t| t.to_lowercase())
            .collect();
        ReturnInfo { stmt, ty }
    }
}

struct Shared {
    old: ReturnInfo,
    new: ReturnInfo,
}

impl Shared {
    fn new(m_old: &TokenSeq, m_new: &TokenSeq) -> Self {
        Shared {
            old: ReturnInfo::of(m_old),
            new: ReturnInfo::of(m_new),
        }
    }

    fn fill(&self, rec: &mut FeatureRecord, token: Option<&Token>) {
        let key = rec.token.to_lowercase();
        rec.return_stmt_match =
            VersionMatch::from_flags(self.old.stmt.contains(&key), self.new.stmt.contains(&key));
        rec.return_type_match =
            VersionMatch::from_flags(self.old.ty.contains(&key), self.new.ty.contains(&key));
        if let Some(idx) = token.and_then(|t| t.parent_index) {
            rec.is_subtoken = true;
            rec.subtoken_index = Some(idx.min(SUBTOKEN_INDEX_CAP));
        }
    }
}

/// Recovers per-token metadata for each serialized `M_edit` position.
///
/// Old-side spans of the code sequence concatenate to `m_old` and new-side
/// spans to `m_new`; keyword positions map to `None`.
fn code_positions<'a>(
    m_edit: &EditSequence,
    m_old: &'a TokenSeq,
    m_new: &'a TokenSeq,
) -> Vec<(SpanMembership, Option<&'a Token>)> {
    let mut out = Vec::new();
    let (mut old, mut new) = (m_old.tokens.iter(), m_new.tokens.iter());
    let take = |it: &mut std::slice::Iter<'a, Token>,
                n: usize,
                membership: SpanMembership,
                out: &mut Vec<_>| {
        out.extend((0..n).map(|_| (membership, it.next())));
    };
    for a in &m_edit.actions {
        out.push((SpanMembership::None, None));
        match a.kind {
            EditKind::Keep => {
                take(&mut old, a.old_span.len(), SpanMembership::Keep, &mut out);
                new.by_ref().take(a.old_span.len()).for_each(drop);
            }
            EditKind::Insert => take(&mut new, a.new_span.len(), SpanMembership::Insert, &mut out),
            EditKind::Delete => take(&mut old, a.old_span.len(), SpanMembership::Delete, &mut out),
            _ => {
                take(
                    &mut old,
                    a.old_span.len(),
                    SpanMembership::ReplaceOld,
                    &mut out,
                );
                out.push((SpanMembership::None, None));
                take(
                    &mut new,
                    a.new_span.len(),
                    SpanMembership::ReplaceNew,
                    &mut out,
                );
            }
        }
        out.push((SpanMembership::None, None));
    }
    out
}

/// One record per serialized `M_edit` token, keywords included.
pub fn featurize_code(
    m_edit: &EditSequence,
    c_old: &TokenSeq,
    m_old: &TokenSeq,
    m_new: &TokenSeq,
) -> FeatureMatrix {
    let flat = serialize(m_edit);
    let positions = code_positions(m_edit, m_old, m_new);
    debug_assert_eq!(flat.len(), positions.len());
    let comment: HashSet<String> = c_old.tokens.iter().map(|t| t.text.to_lowercase()).collect();
    let shared = Shared::new(m_old, m_new);
    let rows = flat
        .iter()
        .zip(positions)
        .map(|(tok, (membership, meta))| {
            let mut r = FeatureRecord::neutral(tok);
            if is_edit_keyword(tok) {
                r.is_edit_keyword = true;
                return r;
            }
            r.span_membership = membership;
            r.is_java_keyword =
                is_java_keyword(tok) || meta.is_some_and(|t| t.kind == TokenKind::Keyword);
            r.is_operator = is_operator(tok);
            r.matches_comment_token = comment.contains(&tok.to_lowercase());
            shared.fill(&mut r, meta);
            r
        })
        .collect();
    FeatureMatrix { rows }
}

/// One record per old-comment token.
pub fn featurize_comment(
    c_old: &TokenSeq,
    m_edit: &EditSequence,
    m_old: &TokenSeq,
    m_new: &TokenSeq,
) -> FeatureMatrix {
    featurize_comment_with(c_old, m_edit, m_old, m_new, &LexiconTagger)
}

pub fn featurize_comment_with(
    c_old: &TokenSeq,
    m_edit: &EditSequence,
    m_old: &TokenSeq,
    m_new: &TokenSeq,
    tagger: &dyn PosTagger,
) -> FeatureMatrix {
    let ctx = CommentContext::new(c_old, m_edit, m_old, m_new);
    let tags = tagger.tag(&ctx.c_old);
    let rows = c_old
        .tokens
        .iter()
        .zip(tags)
        .map(|(tok, tag)| ctx.record(tok, tag))
        .collect();
    FeatureMatrix { rows }
}

/// Comment-side feature lookup for arbitrary tokens of one example, used for
/// old-comment rows and for decoder inputs.
pub struct CommentContext {
    c_old: Vec<String>,
    inserted: HashSet<String>,
    deleted: HashSet<String>,
    replaced: HashSet<String>,
    shared: Shared,
}

impl CommentContext {
    pub fn new(
        c_old: &TokenSeq,
        m_edit: &EditSequence,
        m_old: &TokenSeq,
        m_new: &TokenSeq,
    ) -> Self {
        let mut inserted = HashSet::new();
        let mut deleted = HashSet::new();
        let mut replaced = HashSet::new();
        for a in &m_edit.actions {
            let lower = |s: &String| s.to_lowercase();
            match a.kind {
                EditKind::Keep => {}
                EditKind::Insert => inserted.extend(a.new_span.iter().map(lower)),
                EditKind::Delete => deleted.extend(a.old_span.iter().map(lower)),
                _ => replaced.extend(a.old_span.iter().chain(&a.new_span).map(lower)),
            }
        }
        CommentContext {
            c_old: c_old.tokens.iter().map(|t| t.text.to_lowercase()).collect(),
            inserted,
            deleted,
            replaced,
            shared: Shared::new(m_old, m_new),
        }
    }

    fn record(&self, tok: &Token, tag: PosTag) -> FeatureRecord {
        let key = tok.text.to_lowercase();
        let mut r = FeatureRecord::neutral(&tok.text);
        r.matches_inserted_code = self.inserted.contains(&key);
        r.matches_deleted_code = self.deleted.contains(&key);
        r.matches_replaced_code = self.replaced.contains(&key);
        r.appears_multiple = self.c_old.iter().filter(|t| **t == key).count() > 1;
        r.is_stop_word = is_stop_word(&key);
        r.pos_tag = Some(tag);
        self.shared.fill(&mut r, Some(tok));
        r
    }

    /// Features of a generated token: edit keywords get only their keyword
    /// flag, other tokens the comment-side fields.
    pub fn token(&self, text: &str) -> FeatureRecord {
        if is_edit_keyword(text) {
            let mut r = FeatureRecord::neutral(text);
            r.is_edit_keyword = true;
            return r;
        }
        let tag = LexiconTagger.tag(&[text.to_lowercase()])[0];
        self.record(&Token::new(text, TokenKind::Word), tag)
    }
}
