use comment_update::editlex::{
    apply_edits, deserialize, deserialize_as, encode_code_edits, encode_comment_edits,
    encode_comment_texts, serialize, EditKind, EditSequence, Flavor,
};
use comment_update::tokenize::TokenSeq;
use proptest::prelude::*;

fn letters(s: &str) -> TokenSeq {
    let words: Vec<String> = s.chars().map(|c| c.to_string()).collect();
    TokenSeq::from_words(&words)
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

/// Single-edit examples with their expected condensed edit sequences.
const WORKED: [(&str, &str, &str); 8] = [
    ("AB", "AC", "<ReplaceOld> B <ReplaceNew> C <ReplaceEnd>"),
    (
        "ABCB",
        "ADCB",
        "<ReplaceOldKeepBefore> A B <ReplaceNewKeepBefore> A D <ReplaceEnd>",
    ),
    (
        "ABCAB",
        "ADCAB",
        "<ReplaceOldKeepAfter> B C <ReplaceNewKeepAfter> D C <ReplaceEnd>",
    ),
    (
        "AB",
        "ABC",
        "<InsertOldKeepBefore> B <InsertNewKeepBefore> B C <InsertEnd>",
    ),
    (
        "AB",
        "CAB",
        "<InsertOldKeepAfter> A <InsertNewKeepAfter> C A <InsertEnd>",
    ),
    ("AB", "A", "<Delete> B <DeleteEnd>"),
    (
        "ABCB",
        "ACB",
        "<DeleteOldKeepBefore> A B <DeleteNewKeepBefore> A <DeleteEnd>",
    ),
    (
        "ABCAB",
        "ACAB",
        "<DeleteOldKeepAfter> B C <DeleteNewKeepAfter> C <DeleteEnd>",
    ),
];

#[test]
fn single_edit_examples_encode_to_expected_sequences() {
    for (old, new, expected) in WORKED {
        let e = encode_comment_edits(&letters(old), &letters(new)).unwrap();
        assert_eq!(serialize(&e), words(expected), "{old} -> {new}");
        assert_eq!(
            apply_edits(&letters(old), &e).unwrap(),
            letters(new),
            "{old} -> {new}"
        );
        let (parsed, report) = deserialize(&words(expected));
        assert!(report.is_well_formed());
        assert_eq!(parsed, e);
    }
}

#[test]
fn degrees_comment_edit() {
    let c_old = TokenSeq::from_words(&words("double the roll euler angle ."));
    let c_new = TokenSeq::from_words(&words("double the roll euler angle in degrees ."));
    let e = encode_comment_edits(&c_old, &c_new).unwrap();
    assert_eq!(e.actions.len(), 1);
    assert_eq!(e.actions[0].kind, EditKind::InsertKeepBefore);
    assert_eq!(apply_edits(&c_old, &e).unwrap(), c_new);
}

#[test]
fn code_edits_cover_both_versions() {
    let old = TokenSeq::from_words(&words("return m . get ( ) ;"));
    let new = TokenSeq::from_words(&words("return Math . to ( m . get ( ) ) ;"));
    let e = encode_code_edits(&old, &new);
    assert_eq!(e.flavor, Flavor::Code);
    let mut rebuilt_old = Vec::new();
    let mut rebuilt_new = Vec::new();
    for a in &e.actions {
        match a.kind {
            EditKind::Keep => {
                rebuilt_old.extend(a.old_span.iter().cloned());
                rebuilt_new.extend(a.old_span.iter().cloned());
            }
            _ => {
                rebuilt_old.extend(a.old_span.iter().cloned());
                rebuilt_new.extend(a.new_span.iter().cloned());
            }
        }
    }
    assert_eq!(rebuilt_old, old.texts());
    assert_eq!(rebuilt_new, new.texts());
}

#[test]
fn serialized_sequences_deserialize_to_themselves() {
    let old = letters("ABCABD");
    let new = letters("XBCABDY");
    let e = encode_comment_edits(&old, &new).unwrap();
    let (back, report) = deserialize_as(&serialize(&e), Flavor::CommentCondensed);
    assert!(report.is_well_formed());
    assert_eq!(back, e);
    assert_eq!(apply_edits(&old, &back).unwrap(), new);
}

#[test]
fn malformed_sequences_parse_best_effort() {
    let toks = words("<ReplaceOld> B <ReplaceNew> C");
    let (e, report) = deserialize_as(&toks, Flavor::CommentCondensed);
    assert!(!report.is_well_formed());
    assert_eq!(e, EditSequence::empty(Flavor::CommentCondensed));
}

fn token_seq() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::sample::select(vec!["a", "b", "c", "d", "e", "the", "."]),
        0..12,
    )
    .prop_map(|v| v.into_iter().map(String::from).collect())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10_000, ..ProptestConfig::default() })]

    #[test]
    fn comment_edits_round_trip(old in token_seq(), new in token_seq()) {
        prop_assume!(old != new);
        let e = encode_comment_texts(&old, &new).unwrap();
        let applied = apply_edits(&TokenSeq::from_words(&old), &e).unwrap();
        prop_assert_eq!(applied.texts(), new.clone());
        let (back, report) = deserialize(&serialize(&e));
        prop_assert!(report.is_well_formed());
        let reapplied = apply_edits(&TokenSeq::from_words(&old), &back).unwrap();
        prop_assert_eq!(reapplied.texts(), new);
    }

    #[test]
    fn deserialize_never_panics(toks in prop::collection::vec(
        prop::sample::select(vec!["<ReplaceOld>", "<ReplaceNew>", "<ReplaceEnd>", "<Delete>", "<DeleteEnd>", "<InsertOldKeepBefore>", "<InsertNewKeepBefore>", "<InsertEnd>", "a", "b"]),
        0..16,
    )) {
        let (e, report) = deserialize(&toks);
        prop_assert!(report.consumed <= toks.len());
        if report.is_well_formed() {
            prop_assert_eq!(serialize(&e).len(), toks.len());
        }
    }
}
