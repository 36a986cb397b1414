mod common;

use comment_update::baselines::Baseline;
use comment_update::metrics::exact_match;

fn exact_rate(b: Baseline) -> f64 {
    let examples = common::fixture();
    let hits = examples
        .iter()
        .filter(|ex| exact_match(&b.predict(ex).texts(), &ex.c_new.texts()))
        .count();
    hits as f64 / examples.len() as f64
}

#[test]
fn copy_never_matches_filtered_corpus() {
    assert_eq!(exact_rate(Baseline::Copy), 0.0);
}

#[test]
fn substitution_fixes_pure_type_changes() {
    let examples = common::fixture();
    let speed = examples.iter().find(|e| e.id() == "alpha-002").unwrap();
    assert_eq!(
        Baseline::ReturnTypeSubst.predict(speed).texts(),
        speed.c_new.texts()
    );
    assert!(exact_rate(Baseline::ReturnTypeSubst) > 0.0);
}

#[test]
fn null_variant_extends_substitution() {
    for ex in common::fixture() {
        let base = Baseline::ReturnTypeSubst.predict(&ex).texts();
        let null = Baseline::ReturnTypeSubstNull.predict(&ex).texts();
        if null != base {
            assert_eq!(null.len(), base.len() + 4, "{}", ex.id());
            assert!(null.windows(4).any(|w| w == ["or", "null", "if", "null"]));
        }
    }
}

#[test]
fn names_round_trip() {
    for b in Baseline::ALL {
        assert_eq!(Baseline::parse(b.name()), Some(b));
    }
    assert_eq!(Baseline::parse("nope"), None);
}
