//! The edit lexicon.
//!
//! Code diffs become flat `M_edit` sequences (every opcode, `Keep` spans
//! included). Comment diffs become condensed, anchored sequences that omit
//! kept content: each action carries just enough unchanged context for its
//! old span to be unique in the old comment, so a left-to-right walk over the
//! old comment can place it again.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diffcore::{match_sequences, OpTag, Opcode};
use crate::error::{Error, Result};
use crate::tokenize::{Token, TokenKind, TokenSeq};

pub const INSERT: &str = "<Insert>";
pub const INSERT_END: &str = "<InsertEnd>";
pub const DELETE: &str = "<Delete>";
pub const DELETE_END: &str = "<DeleteEnd>";
pub const REPLACE_OLD: &str = "<ReplaceOld>";
pub const REPLACE_NEW: &str = "<ReplaceNew>";
pub const REPLACE_END: &str = "<ReplaceEnd>";
pub const KEEP: &str = "<Keep>";
pub const KEEP_END: &str = "<KeepEnd>";
pub const REPLACE_OLD_KEEP_BEFORE: &str = "<ReplaceOldKeepBefore>";
pub const REPLACE_NEW_KEEP_BEFORE: &str = "<ReplaceNewKeepBefore>";
pub const REPLACE_OLD_KEEP_AFTER: &str = "<ReplaceOldKeepAfter>";
pub const REPLACE_NEW_KEEP_AFTER: &str = "<ReplaceNewKeepAfter>";
pub const INSERT_OLD_KEEP_BEFORE: &str = "<InsertOldKeepBefore>";
pub const INSERT_NEW_KEEP_BEFORE: &str = "<InsertNewKeepBefore>";
pub const INSERT_OLD_KEEP_AFTER: &str = "<InsertOldKeepAfter>";
pub const INSERT_NEW_KEEP_AFTER: &str = "<InsertNewKeepAfter>";
pub const DELETE_OLD_KEEP_BEFORE: &str = "<DeleteOldKeepBefore>";
pub const DELETE_NEW_KEEP_BEFORE: &str = "<DeleteNewKeepBefore>";
pub const DELETE_OLD_KEEP_AFTER: &str = "<DeleteOldKeepAfter>";
pub const DELETE_NEW_KEEP_AFTER: &str = "<DeleteNewKeepAfter>";

/// Every reserved edit keyword.
pub const EDIT_KEYWORDS: [&str; 21] = [
    INSERT,
    INSERT_END,
    DELETE,
    DELETE_END,
    REPLACE_OLD,
    REPLACE_NEW,
    REPLACE_END,
    KEEP,
    KEEP_END,
    REPLACE_OLD_KEEP_BEFORE,
    REPLACE_NEW_KEEP_BEFORE,
    REPLACE_OLD_KEEP_AFTER,
    REPLACE_NEW_KEEP_AFTER,
    INSERT_OLD_KEEP_BEFORE,
    INSERT_NEW_KEEP_BEFORE,
    INSERT_OLD_KEEP_AFTER,
    INSERT_NEW_KEEP_AFTER,
    DELETE_OLD_KEEP_BEFORE,
    DELETE_NEW_KEEP_BEFORE,
    DELETE_OLD_KEEP_AFTER,
    DELETE_NEW_KEEP_AFTER,
];

pub fn is_edit_keyword(s: &str) -> bool {
    EDIT_KEYWORDS.contains(&s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EditKind {
    Insert,
    Delete,
    Replace,
    Keep,
    ReplaceKeepBefore,
    ReplaceKeepAfter,
    InsertKeepBefore,
    InsertKeepAfter,
    DeleteKeepBefore,
    DeleteKeepAfter,
}

impl EditKind {
    pub const ALL: [EditKind; 10] = [
        EditKind::Insert,
        EditKind::Delete,
        EditKind::Replace,
        EditKind::Keep,
        EditKind::ReplaceKeepBefore,
        EditKind::ReplaceKeepAfter,
        EditKind::InsertKeepBefore,
        EditKind::InsertKeepAfter,
        EditKind::DeleteKeepBefore,
        EditKind::DeleteKeepAfter,
    ];

    /// (opening keyword, middle keyword for two-span kinds, closing keyword)
    fn keywords(self) -> (&'static str, Option<&'static str>, &'static str) {
        use EditKind::*;
        match self {
            Insert => (INSERT, None, INSERT_END),
            Delete => (DELETE, None, DELETE_END),
            Keep => (KEEP, None, KEEP_END),
            Replace => (REPLACE_OLD, Some(REPLACE_NEW), REPLACE_END),
            ReplaceKeepBefore => (
                REPLACE_OLD_KEEP_BEFORE,
                Some(REPLACE_NEW_KEEP_BEFORE),
                REPLACE_END,
            ),
            ReplaceKeepAfter => (
                REPLACE_OLD_KEEP_AFTER,
                Some(REPLACE_NEW_KEEP_AFTER),
                REPLACE_END,
            ),
            InsertKeepBefore => (
                INSERT_OLD_KEEP_BEFORE,
                Some(INSERT_NEW_KEEP_BEFORE),
                INSERT_END,
            ),
            InsertKeepAfter => (
                INSERT_OLD_KEEP_AFTER,
                Some(INSERT_NEW_KEEP_AFTER),
                INSERT_END,
            ),
            DeleteKeepBefore => (
                DELETE_OLD_KEEP_BEFORE,
                Some(DELETE_NEW_KEEP_BEFORE),
                DELETE_END,
            ),
            DeleteKeepAfter => (
                DELETE_OLD_KEEP_AFTER,
                Some(DELETE_NEW_KEEP_AFTER),
                DELETE_END,
            ),
        }
    }

    fn from_opening(kw: &str) -> Option<EditKind> {
        EditKind::ALL.into_iter().find(|k| k.keywords().0 == kw)
    }

    pub fn name(self) -> &'static str {
        use EditKind::*;
        match self {
            Insert => "Insert",
            Delete => "Delete",
            Replace => "Replace",
            Keep => "Keep",
            ReplaceKeepBefore => "ReplaceKeepBefore",
            ReplaceKeepAfter => "ReplaceKeepAfter",
            InsertKeepBefore => "InsertKeepBefore",
            InsertKeepAfter => "InsertKeepAfter",
            DeleteKeepBefore => "DeleteKeepBefore",
            DeleteKeepAfter => "DeleteKeepAfter",
        }
    }

    /// Kinds whose payload is the single (old or new) span.
    fn single_span(self) -> bool {
        self.keywords().1.is_none()
    }
}

impl fmt::Display for EditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EditAction {
    pub kind: EditKind,
    pub old_span: Vec<String>,
    pub new_span: Vec<String>,
}

impl EditAction {
    pub fn new<S: Into<String>>(
        kind: EditKind,
        old_span: impl IntoIterator<Item = S>,
        new_span: impl IntoIterator<Item = S>,
    ) -> Self {
        EditAction {
            kind,
            old_span: old_span.into_iter().map(Into::into).collect(),
            new_span: new_span.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// `M_edit`: every opcode, keep spans included.
    Code,
    /// `C_edit`: anchored actions, no keep spans.
    CommentCondensed,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EditSequence {
    pub actions: Vec<EditAction>,
    pub flavor: Flavor,
}

impl EditSequence {
    pub fn empty(flavor: Flavor) -> Self {
        EditSequence {
            actions: Vec::new(),
            flavor,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Flat code edit sequence: one action per opcode between the two methods.
pub fn encode_code_edits(m_old: &TokenSeq, m_new: &TokenSeq) -> EditSequence {
    let old = m_old.texts();
    let new = m_new.texts();
    let actions = match_sequences(&old, &new)
        .into_iter()
        .map(|op| {
            let o = old[op.old_range.clone()].to_vec();
            let n = new[op.new_range.clone()].to_vec();
            match op.tag {
                OpTag::Equal => EditAction {
                    kind: EditKind::Keep,
                    old_span: o,
                    new_span: Vec::new(),
                },
                OpTag::Delete => EditAction {
                    kind: EditKind::Delete,
                    old_span: o,
                    new_span: Vec::new(),
                },
                OpTag::Insert => EditAction {
                    kind: EditKind::Insert,
                    old_span: Vec::new(),
                    new_span: n,
                },
                OpTag::Replace => EditAction {
                    kind: EditKind::Replace,
                    old_span: o,
                    new_span: n,
                },
            }
        })
        .collect();
    EditSequence {
        actions,
        flavor: Flavor::Code,
    }
}

fn count_occurrences(haystack: &[String], needle: &[String]) -> usize {
    if needle.is_empty() || needle.len() > haystack.len() {
        return 0;
    }
    haystack
        .windows(needle.len())
        .filter(|w| *w == needle)
        .count()
}

fn find_from(haystack: &[String], needle: &[String], from: usize) -> Option<usize> {
    if from > haystack.len() {
        return None;
    }
    if needle.is_empty() {
        return Some(from);
    }
    if needle.len() > haystack.len() - from {
        return None;
    }
    haystack[from..]
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Base {
    Replace,
    Insert,
    Delete,
}

/// A raw change region, possibly widened by merging neighbours.
#[derive(Debug, Clone)]
struct Region {
    base: Base,
    old: std::ops::Range<usize>,
    new: std::ops::Range<usize>,
}

impl Region {
    fn from_op(op: &Opcode) -> Self {
        let base = match op.tag {
            OpTag::Insert => Base::Insert,
            OpTag::Delete => Base::Delete,
            _ => Base::Replace,
        };
        Region {
            base,
            old: op.old_range.clone(),
            new: op.new_range.clone(),
        }
    }

    fn merge(&self, later: &Region) -> Region {
        Region {
            base: Base::Replace,
            old: self.old.start..later.old.end,
            new: self.new.start..later.new.end,
        }
    }
}

#[derive(Debug, Clone)]
struct Anchored {
    action: EditAction,
    /// Old-side extent actually claimed, anchors included.
    claimed_end: usize,
}

fn kind_for(base: Base, before: bool, after: bool) -> EditKind {
    match (base, before, after) {
        (Base::Replace, false, false) => EditKind::Replace,
        (Base::Delete, false, false) => EditKind::Delete,
        (Base::Insert, false, false) => EditKind::Insert,
        (Base::Replace, true, _) => EditKind::ReplaceKeepBefore,
        (Base::Replace, false, true) => EditKind::ReplaceKeepAfter,
        (Base::Insert, true, _) => EditKind::InsertKeepBefore,
        (Base::Insert, false, true) => EditKind::InsertKeepAfter,
        (Base::Delete, true, _) => EditKind::DeleteKeepBefore,
        (Base::Delete, false, true) => EditKind::DeleteKeepAfter,
    }
}

/// Tries to make `region` uniquely placeable using unchanged context in
/// `old[lo_bound..region.old.start]` and `old[region.old.end..hi_bound]`.
fn anchor(
    old: &[String],
    new: &[String],
    region: &Region,
    lo_bound: usize,
    hi_bound: usize,
) -> Option<Anchored> {
    let (a1, a2) = (region.old.start, region.old.end);
    let build = |lo: usize, hi: usize| {
        let before = lo < a1;
        let after = hi > a2;
        let mut new_span: Vec<String> = old[lo..a1].to_vec();
        new_span.extend_from_slice(&new[region.new.clone()]);
        new_span.extend_from_slice(&old[a2..hi]);
        Anchored {
            action: EditAction {
                kind: kind_for(region.base, before, after),
                old_span: old[lo..hi].to_vec(),
                new_span,
            },
            claimed_end: hi,
        }
    };
    let unique = |lo: usize, hi: usize| count_occurrences(old, &old[lo..hi]) == 1;

    if region.base != Base::Insert && unique(a1, a2) {
        return Some(build(a1, a2));
    }
    for lo in (lo_bound..a1).rev() {
        if unique(lo, a2) {
            return Some(build(lo, a2));
        }
    }
    for hi in a2 + 1..=hi_bound {
        if unique(a1, hi) {
            return Some(build(a1, hi));
        }
    }
    if lo_bound < a1 {
        for hi in a2 + 1..=hi_bound {
            if unique(lo_bound, hi) {
                return Some(build(lo_bound, hi));
            }
        }
    }
    None
}

/// Condensed, anchored comment edit sequence turning `c_old` into `c_new`.
pub fn encode_comment_edits(c_old: &TokenSeq, c_new: &TokenSeq) -> Result<EditSequence> {
    let old = c_old.texts();
    let new = c_new.texts();
    encode_comment_texts(&old, &new)
}

/// [`encode_comment_edits`] over plain token texts.
pub fn encode_comment_texts(old: &[String], new: &[String]) -> Result<EditSequence> {
    if old == new {
        return Err(Error::NoDistinctChange);
    }
    let mut pending: Vec<Region> = match_sequences(old, new)
        .iter()
        .filter(|op| op.tag != OpTag::Equal)
        .map(Region::from_op)
        .collect();
    pending.reverse();

    let mut done: Vec<(Region, Anchored)> = Vec::new();
    while let Some(region) = pending.pop() {
        let lo_bound = done.last().map_or(0, |(_, a)| a.claimed_end);
        let hi_bound = pending.last().map_or(old.len(), |next| next.old.start);
        if let Some(a) = anchor(old, new, &region, lo_bound, hi_bound) {
            done.push((region, a));
            continue;
        }
        // No unique placement within the free context: absorb a neighbour.
        if let Some(next) = pending.pop() {
            pending.push(region.merge(&next));
        } else if let Some((prev, _)) = done.pop() {
            pending.push(prev.merge(&region));
        } else {
            let whole = EditAction {
                kind: EditKind::Replace,
                old_span: old.to_vec(),
                new_span: new.to_vec(),
            };
            return Ok(EditSequence {
                actions: vec![whole],
                flavor: Flavor::CommentCondensed,
            });
        }
    }
    Ok(EditSequence {
        actions: done.into_iter().map(|(_, a)| a.action).collect(),
        flavor: Flavor::CommentCondensed,
    })
}

/// Non-fatal conditions met while applying edits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApplyWarning {
    /// The anchor span matched more than once ahead of the cursor; the first
    /// match was used.
    AmbiguousAnchor { action: usize, occurrences: usize },
    /// Lenient mode only: the action's anchor was absent and it was skipped.
    SkippedAction { action: usize },
}

/// Cursor state of the left-to-right walk over the old comment and the edit
/// actions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseCursor {
    pub p_old: usize,
    pub p_edit: usize,
}

fn new_token(text: &str) -> Token {
    let kind = if text.chars().all(|c| c.is_ascii_punctuation()) {
        TokenKind::Punctuation
    } else {
        TokenKind::Word
    };
    Token::new(text, kind)
}

fn apply_inner(
    c_old: &TokenSeq,
    edits: &EditSequence,
    lenient: bool,
) -> Result<(TokenSeq, Vec<ApplyWarning>)> {
    let old = c_old.texts();
    let mut out: Vec<Token> = Vec::with_capacity(old.len() + 8);
    let mut warnings = Vec::new();
    let mut cur = ParseCursor::default();
    while cur.p_edit < edits.actions.len() {
        let action = &edits.actions[cur.p_edit];
        let (needle, emit): (&[String], &[String]) = match action.kind {
            EditKind::Keep => (&action.old_span, &action.old_span),
            EditKind::Insert => (&[], &action.new_span),
            _ => (&action.old_span, &action.new_span),
        };
        match find_from(&old, needle, cur.p_old) {
            Some(pos) => {
                if !needle.is_empty() {
                    let ahead = count_occurrences(&old[cur.p_old..], needle);
                    if ahead > 1 {
                        log::debug!(
                            "ambiguous anchor for action {}: {ahead} matches",
                            cur.p_edit
                        );
                        warnings.push(ApplyWarning::AmbiguousAnchor {
                            action: cur.p_edit,
                            occurrences: ahead,
                        });
                    }
                }
                out.extend_from_slice(&c_old.tokens[cur.p_old..pos]);
                out.extend(emit.iter().map(|t| new_token(t)));
                cur.p_old = pos + needle.len();
            }
            None if lenient => warnings.push(ApplyWarning::SkippedAction { action: cur.p_edit }),
            None => {
                return Err(Error::AnchorNotFound {
                    position: cur.p_old,
                    span: needle.join(" "),
                });
            }
        }
        cur.p_edit += 1;
    }
    out.extend_from_slice(&c_old.tokens[cur.p_old..]);
    Ok((TokenSeq::new(out, c_old.source), warnings))
}

/// Applies a condensed edit sequence to `c_old`, producing the edited comment.
pub fn apply_edits(c_old: &TokenSeq, edits: &EditSequence) -> Result<TokenSeq> {
    apply_edits_report(c_old, edits).map(|(seq, _)| seq)
}

/// Like [`apply_edits`], also returning ambiguity warnings.
pub fn apply_edits_report(
    c_old: &TokenSeq,
    edits: &EditSequence,
) -> Result<(TokenSeq, Vec<ApplyWarning>)> {
    apply_inner(c_old, edits, false)
}

/// Best-effort application for model output: actions whose anchor cannot be
/// found are skipped instead of failing.
pub fn apply_edits_lenient(
    c_old: &TokenSeq,
    edits: &EditSequence,
) -> (TokenSeq, Vec<ApplyWarning>) {
    apply_inner(c_old, edits, true).expect("lenient application cannot fail")
}

/// Flat keyword-delimited token stream.
pub fn serialize(edits: &EditSequence) -> Vec<String> {
    let mut out = Vec::new();
    for a in &edits.actions {
        let (open, mid, close) = a.kind.keywords();
        out.push(open.to_string());
        match mid {
            Some(mid) => {
                out.extend(a.old_span.iter().cloned());
                out.push(mid.to_string());
                out.extend(a.new_span.iter().cloned());
            }
            None if a.kind == EditKind::Insert => out.extend(a.new_span.iter().cloned()),
            None => out.extend(a.old_span.iter().cloned()),
        }
        out.push(close.to_string());
    }
    out
}

/// Outcome of reading a (possibly model-generated) flat token stream.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParseReport {
    /// Number of input tokens consumed by well-formed actions.
    pub consumed: usize,
    /// Position and description of the first malformation, if any.
    pub error: Option<(usize, String)>,
}

impl ParseReport {
    pub fn is_well_formed(&self) -> bool {
        self.error.is_none()
    }

    pub fn trailing(&self, total: usize) -> usize {
        total - self.consumed
    }
}

/// Reads a flat token stream, keeping the longest well-formed prefix of
/// actions. Never fails; problems are reported in the [`ParseReport`].
pub fn deserialize_as<S: AsRef<str>>(tokens: &[S], flavor: Flavor) -> (EditSequence, ParseReport) {
    let mut actions = Vec::new();
    let mut report = ParseReport::default();
    let mut i = 0;
    'outer: while i < tokens.len() {
        let start = i;
        let open = tokens[i].as_ref();
        let Some(kind) = EditKind::from_opening(open) else {
            report.error = Some((i, format!("expected an action keyword, found {open:?}")));
            break;
        };
        let (_, mid, close) = kind.keywords();
        i += 1;
        let mut first = Vec::new();
        let mut second = Vec::new();
        let mut in_second = false;
        loop {
            let Some(tok) = tokens.get(i).map(|t| t.as_ref()) else {
                report.error = Some((start, format!("unterminated {kind} action")));
                break 'outer;
            };
            i += 1;
            if tok == close && (mid.is_none() || in_second) {
                break;
            }
            if Some(tok) == mid && !in_second {
                in_second = true;
                continue;
            }
            if is_edit_keyword(tok) {
                report.error = Some((i - 1, format!("unexpected {tok} inside {kind} action")));
                break 'outer;
            }
            if in_second {
                second.push(tok.to_string());
            } else {
                first.push(tok.to_string());
            }
        }
        let action = if kind.single_span() {
            if kind == EditKind::Insert {
                EditAction {
                    kind,
                    old_span: Vec::new(),
                    new_span: first,
                }
            } else {
                EditAction {
                    kind,
                    old_span: first,
                    new_span: Vec::new(),
                }
            }
        } else {
            EditAction {
                kind,
                old_span: first,
                new_span: second,
            }
        };
        actions.push(action);
        report.consumed = i;
    }
    (EditSequence { actions, flavor }, report)
}

/// [`deserialize_as`] with the flavor inferred: sequences carrying `Keep` or
/// bare `Insert` actions are code sequences.
pub fn deserialize<S: AsRef<str>>(tokens: &[S]) -> (EditSequence, ParseReport) {
    let (mut seq, report) = deserialize_as(tokens, Flavor::CommentCondensed);
    if seq
        .actions
        .iter()
        .any(|a| matches!(a.kind, EditKind::Keep | EditKind::Insert))
    {
        seq.flavor = Flavor::Code;
    }
    (seq, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TokenSeq {
        let words: Vec<&str> = s.split_whitespace().collect();
        TokenSeq::from_words(&words)
    }

    fn letters(s: &str) -> TokenSeq {
        let words: Vec<String> = s.chars().map(|c| c.to_string()).collect();
        TokenSeq::from_words(&words)
    }

    fn encode(a: &str, b: &str) -> Vec<EditAction> {
        encode_comment_edits(&letters(a), &letters(b))
            .unwrap()
            .actions
    }

    #[test]
    fn identical_comments_are_rejected() {
        assert_eq!(
            encode_comment_edits(&seq("a b"), &seq("a b")),
            Err(Error::NoDistinctChange)
        );
    }

    #[test]
    fn ambiguous_replace_takes_preceding_anchor() {
        assert_eq!(
            encode("ABCB", "ADCB"),
            vec![EditAction::new(
                EditKind::ReplaceKeepBefore,
                ["A", "B"],
                ["A", "D"]
            )]
        );
    }

    #[test]
    fn insert_at_start_anchors_after() {
        assert_eq!(
            encode("AB", "CAB"),
            vec![EditAction::new(
                EditKind::InsertKeepAfter,
                ["A"],
                ["C", "A"]
            )]
        );
    }

    #[test]
    fn insert_into_empty_comment_is_whole_replace() {
        let empty = TokenSeq::from_words::<&str>(&[]);
        let e = encode_comment_edits(&empty, &seq("a b")).unwrap();
        assert_eq!(
            e.actions,
            vec![EditAction::new(
                EditKind::Replace,
                Vec::<String>::new(),
                vec!["a".into(), "b".into()]
            )]
        );
        assert_eq!(apply_edits(&empty, &e).unwrap().texts(), ["a", "b"]);
    }

    #[test]
    fn unanchorable_change_merges_with_neighbour() {
        // Every context token is repeated, so no single change can be placed on its own.
        for (a, b) in [
            ("AAAA", "AABA"),
            ("ABAB", "ABABAB"),
            ("AA", "A"),
            ("ABAB", "BABA"),
            ("AAA", ""),
        ] {
            let e = encode(a, b);
            let got = apply_edits(
                &letters(a),
                &EditSequence {
                    actions: e,
                    flavor: Flavor::CommentCondensed,
                },
            )
            .unwrap();
            assert_eq!(got.texts(), letters(b).texts(), "{a} -> {b}");
        }
    }

    #[test]
    fn two_separate_changes() {
        let e = encode_comment_edits(&seq("the x of a y"), &seq("the z of a w")).unwrap();
        assert_eq!(
            e.actions,
            vec![
                EditAction::new(EditKind::Replace, ["x"], ["z"]),
                EditAction::new(EditKind::Replace, ["y"], ["w"])
            ]
        );
    }

    #[test]
    fn apply_identity_and_missing_anchor() {
        let c = seq("a b c");
        assert_eq!(
            apply_edits(&c, &EditSequence::empty(Flavor::CommentCondensed)).unwrap(),
            c
        );
        let e = EditSequence {
            actions: vec![EditAction::new(EditKind::Delete, ["q"], [])],
            flavor: Flavor::CommentCondensed,
        };
        assert!(matches!(
            apply_edits(&c, &e),
            Err(Error::AnchorNotFound { .. })
        ));
        let (out, warnings) = apply_edits_lenient(&c, &e);
        assert_eq!(out, c);
        assert_eq!(warnings, vec![ApplyWarning::SkippedAction { action: 0 }]);
    }

    #[test]
    fn ambiguous_anchor_binds_first_occurrence() {
        let c = seq("a b a b");
        let e = EditSequence {
            actions: vec![EditAction::new(EditKind::Replace, ["b"], ["x"])],
            flavor: Flavor::CommentCondensed,
        };
        let (out, warnings) = apply_edits_report(&c, &e).unwrap();
        assert_eq!(out.joined(), "a x a b");
        assert_eq!(
            warnings,
            vec![ApplyWarning::AmbiguousAnchor {
                action: 0,
                occurrences: 2
            }]
        );
    }

    #[test]
    fn serialize_forms() {
        let e = EditSequence {
            actions: vec![EditAction::new(EditKind::Replace, ["B"], ["C"])],
            flavor: Flavor::CommentCondensed,
        };
        assert_eq!(
            serialize(&e),
            ["<ReplaceOld>", "B", "<ReplaceNew>", "C", "<ReplaceEnd>"]
        );
        let e = EditSequence {
            actions: vec![EditAction::new(EditKind::Delete, ["B"], [])],
            flavor: Flavor::CommentCondensed,
        };
        assert_eq!(serialize(&e), ["<Delete>", "B", "<DeleteEnd>"]);
        let e = EditSequence {
            actions: vec![EditAction::new(EditKind::Insert, [], ["x"])],
            flavor: Flavor::Code,
        };
        assert_eq!(serialize(&e), ["<Insert>", "x", "<InsertEnd>"]);
    }

    #[test]
    fn deserialize_is_total() {
        let (s, r) = deserialize(&["<Delete>", "A"]);
        assert!(s.is_empty());
        assert!(!r.is_well_formed());
        assert_eq!(r.consumed, 0);

        let toks = ["<Delete>", "A", "<DeleteEnd>", "junk", "<Delete>"];
        let (s, r) = deserialize(&toks);
        assert_eq!(
            s.actions,
            vec![EditAction::new(EditKind::Delete, ["A"], [])]
        );
        assert_eq!(r.consumed, 3);
        assert_eq!(r.trailing(toks.len()), 2);

        // Closing keyword before the middle keyword of a two-span action.
        let (s, r) = deserialize(&["<ReplaceOld>", "a", "<ReplaceEnd>"]);
        assert!(s.is_empty() && !r.is_well_formed());

        let (s, r) = deserialize::<&str>(&[]);
        assert!(s.is_empty() && r.is_well_formed());
    }

    #[test]
    fn code_edits_for_total_replacement() {
        let e = encode_code_edits(&seq("a"), &seq("b"));
        assert_eq!(
            e.actions,
            vec![EditAction::new(EditKind::Replace, ["a"], ["b"])]
        );
        let e = encode_code_edits(&seq("a b"), &seq("a b"));
        assert_eq!(
            e.actions,
            vec![EditAction::new(EditKind::Keep, ["a", "b"], [])]
        );
    }
}
