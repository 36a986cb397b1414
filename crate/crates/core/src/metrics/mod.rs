//! Sentence-level evaluation metrics and corpus aggregation.
//!
//! n-gram statistics are computed by linear scans over slices; comments are
//! short, so this is faster than hashing and keeps the metrics generic over
//! any `PartialEq` token type.

pub mod porter;

use std::fmt::Write as _;

const MAX_N: usize = 4;

pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_BETA: f64 = 3.0;
pub const METEOR_GAMMA: f64 = 0.5;

/// Distinct n-grams with their multiplicities, in first-occurrence order.
struct Counts<'a, T> {
    grams: Vec<(&'a [T], usize)>,
}

impl<'a, T: PartialEq> Counts<'a, T> {
    fn of(seq: &'a [T], n: usize) -> Self {
        let mut grams: Vec<(&'a [T], usize)> = Vec::new();
        if seq.len() >= n {
            for w in seq.windows(n) {
                match grams.iter_mut().find(|(g, _)| *g == w) {
                    Some((_, c)) => *c += 1,
                    None => grams.push((w, 1)),
                }
            }
        }
        Counts { grams }
    }

    fn get(&self, gram: &[T]) -> usize {
        self.grams
            .iter()
            .find(|(g, _)| *g == gram)
            .map_or(0, |(_, c)| *c)
    }

    fn total(&self) -> usize {
        self.grams.iter().map(|(_, c)| c).sum()
    }
}

pub fn exact_match<T: PartialEq>(pred: &[T], reference: &[T]) -> bool {
    pred == reference
}

fn brevity_penalty(pred_len: usize, ref_len: usize) -> f64 {
    if pred_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / pred_len as f64).exp()
    }
}

/// Sentence BLEU-4 with add-one smoothing of zero-match orders n >= 2.
pub fn bleu4<T: PartialEq>(pred: &[T], reference: &[T]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=MAX_N {
        let p = Counts::of(pred, n);
        let r = Counts::of(reference, n);
        let matched: usize = p.grams.iter().map(|(g, c)| (*c).min(r.get(g))).sum();
        let total = p.total();
        let precision = if matched > 0 {
            matched as f64 / total as f64
        } else if n == 1 {
            return 0.0;
        } else {
            1.0 / (total as f64 + 1.0)
        };
        log_sum += precision.ln();
    }
    brevity_penalty(pred.len(), reference.len()) * (log_sum / MAX_N as f64).exp()
}

/// Sentence GLEU: precision credits n-grams shared with the reference and
/// debits those copied from the source that the reference dropped.
pub fn gleu<T: PartialEq>(source: &[T], pred: &[T], reference: &[T]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=MAX_N {
        let h = Counts::of(pred, n);
        let s = Counts::of(source, n);
        let r = Counts::of(reference, n);
        let mut good: i64 = 0;
        let mut penalty: i64 = 0;
        for (g, hc) in &h.grams {
            let rc = r.get(g);
            good += (*hc).min(rc) as i64;
            let dropped = s.get(g).saturating_sub(rc);
            penalty += (*hc).min(dropped) as i64;
        }
        let numerator = (good - penalty).max(0);
        let denominator = (pred.len() + 1).saturating_sub(n);
        if numerator == 0 || denominator == 0 {
            return 0.0;
        }
        log_sum += (numerator as f64 / denominator as f64).ln();
    }
    let bp = (1.0 - reference.len() as f64 / pred.len() as f64).min(0.0);
    (bp + log_sum / MAX_N as f64).exp()
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Per-order SARI components `(keep, delete, add)` F1 scores.
fn sari_order<T: PartialEq>(
    source: &[T],
    pred: &[T],
    reference: &[T],
    n: usize,
) -> (f64, f64, f64) {
    let s = Counts::of(source, n);
    let c = Counts::of(pred, n);
    let r = Counts::of(reference, n);

    // keep: n-grams retained from the source
    let (mut kept, mut kept_good, mut keep_all) = (0, 0, 0);
    // delete: source n-grams removed
    let (mut deleted, mut deleted_good, mut delete_all) = (0, 0, 0);
    for (g, sc) in &s.grams {
        let cc = c.get(g);
        let rc = r.get(g);
        let k = (*sc).min(cc);
        kept += k;
        kept_good += k.min(rc);
        keep_all += (*sc).min(rc);
        let d = sc.saturating_sub(cc);
        let should = sc.saturating_sub(rc);
        deleted += d;
        deleted_good += d.min(should);
        delete_all += should;
    }
    // add: n-gram types new relative to the source
    let added: Vec<&[T]> = c
        .grams
        .iter()
        .map(|(g, _)| *g)
        .filter(|g| s.get(g) == 0)
        .collect();
    let add_good = added.iter().filter(|g| r.get(g) > 0).count();
    let add_all = r.grams.iter().filter(|(g, _)| s.get(g) == 0).count();

    let keep = f1(ratio(kept_good, kept), ratio(kept_good, keep_all));
    let delete = f1(
        ratio(deleted_good, deleted),
        ratio(deleted_good, delete_all),
    );
    let add = f1(ratio(add_good, added.len()), ratio(add_good, add_all));
    (keep, delete, add)
}

/// SARI in [0, 100]: mean over keep/delete/add of the n-gram F1 averaged
/// over n = 1..4.
pub fn sari<T: PartialEq>(source: &[T], pred: &[T], reference: &[T]) -> f64 {
    let (mut keep, mut delete, mut add) = (0.0, 0.0, 0.0);
    for n in 1..=MAX_N {
        let (k, d, a) = sari_order(source, pred, reference, n);
        keep += k;
        delete += d;
        add += a;
    }
    let n = MAX_N as f64;
    100.0 * (keep / n + delete / n + add / n) / 3.0
}

/// Optimal unigram alignment under an equivalence relation given as class
/// ids: maximal number of matches, then fewest chunks.
///
/// Returns `(matches, chunks)`.
pub fn align_chunks(pred_class: &[usize], ref_class: &[usize]) -> (usize, usize) {
    let classes = pred_class
        .iter()
        .chain(ref_class)
        .copied()
        .max()
        .map_or(0, |m| m + 1);
    let mut pred_left = vec![0usize; classes];
    let mut ref_count = vec![0usize; classes];
    for &c in pred_class {
        pred_left[c] += 1;
    }
    for &c in ref_class {
        ref_count[c] += 1;
    }
    // How many pred tokens of each class still have to be aligned.
    let mut need: Vec<usize> = (0..classes)
        .map(|c| pred_left[c].min(ref_count[c]))
        .collect();
    let matches: usize = need.iter().sum();
    if matches == 0 {
        return (0, 0);
    }
    let mut search = ChunkSearch {
        pred: pred_class,
        refs: ref_class,
        used: vec![false; ref_class.len()],
        best: usize::MAX,
        budget: 200_000,
    };
    search.go(0, None, 0, &mut need, &mut pred_left);
    if search.best == usize::MAX {
        // Search budget exhausted before any full alignment: fall back to greedy.
        search.best = greedy_chunks(pred_class, ref_class);
    }
    (matches, search.best)
}

struct ChunkSearch<'a> {
    pred: &'a [usize],
    refs: &'a [usize],
    used: Vec<bool>,
    best: usize,
    budget: usize,
}

impl ChunkSearch<'_> {
    fn go(
        &mut self,
        i: usize,
        prev: Option<usize>,
        chunks: usize,
        need: &mut [usize],
        left: &mut [usize],
    ) {
        if chunks >= self.best {
            return;
        }
        if self.budget == 0 {
            return;
        }
        self.budget -= 1;
        if i == self.pred.len() {
            self.best = chunks;
            return;
        }
        let c = self.pred[i];
        left[c] -= 1;
        if need[c] > 0 {
            // Continuing the current chunk first finds good bounds early.
            let mut order: Vec<usize> = (0..self.refs.len())
                .filter(|&j| !self.used[j] && self.refs[j] == c)
                .collect();
            if let Some(p) = prev {
                if let Some(pos) = order.iter().position(|&j| j == p + 1) {
                    order.swap(0, pos);
                }
            }
            for j in order {
                let extra = usize::from(j == 0 || prev != Some(j - 1));
                self.used[j] = true;
                need[c] -= 1;
                self.go(i + 1, Some(j), chunks + extra, need, left);
                need[c] += 1;
                self.used[j] = false;
            }
        }
        // Leave this token unaligned only if the class can still meet its quota.
        if left[c] >= need[c] {
            self.go(i + 1, None, chunks, need, left);
        }
        left[c] += 1;
    }
}

fn greedy_chunks(pred: &[usize], refs: &[usize]) -> usize {
    let mut used = vec![false; refs.len()];
    let mut chunks = 0;
    let mut prev: Option<usize> = None;
    for &c in pred {
        let next = prev
            .map(|p| p + 1)
            .filter(|&j| j < refs.len() && !used[j] && refs[j] == c);
        let pick = next.or_else(|| (0..refs.len()).find(|&j| !used[j] && refs[j] == c));
        match pick {
            Some(j) => {
                if prev.map(|p| p + 1) != Some(j) {
                    chunks += 1;
                }
                used[j] = true;
                prev = Some(j);
            }
            None => prev = None,
        }
    }
    chunks
}

/// METEOR from alignment statistics.
pub fn meteor_score(matches: usize, chunks: usize, pred_len: usize, ref_len: usize) -> f64 {
    if matches == 0 {
        return 0.0;
    }
    let p = matches as f64 / pred_len as f64;
    let r = matches as f64 / ref_len as f64;
    let f_mean = p * r / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * r);
    let penalty = METEOR_GAMMA * (chunks as f64 / matches as f64).powf(METEOR_BETA);
    f_mean * (1.0 - penalty)
}

/// METEOR over arbitrary tokens with exact matching only.
pub fn meteor_exact<T: PartialEq>(pred: &[T], reference: &[T]) -> f64 {
    let all: Vec<&T> = pred.iter().chain(reference).collect();
    let mut reps: Vec<usize> = Vec::new();
    let classes: Vec<usize> = all
        .iter()
        .enumerate()
        .map(|(i, t)| match reps.iter().position(|&r| all[r] == *t) {
            Some(c) => c,
            None => {
                reps.push(i);
                reps.len() - 1
            }
        })
        .collect();
    let (pc, rc) = classes.split_at(pred.len());
    let (m, ch) = align_chunks(pc, rc);
    meteor_score(m, ch, pred.len(), reference.len())
}

/// METEOR with exact and Porter-stem matching.
pub fn meteor<S: AsRef<str>>(pred: &[S], reference: &[S]) -> f64 {
    let pred_stems: Vec<String> = pred
        .iter()
        .map(|w| porter::stem(&w.as_ref().to_lowercase()))
        .collect();
    let ref_stems: Vec<String> = reference
        .iter()
        .map(|w| porter::stem(&w.as_ref().to_lowercase()))
        .collect();
    meteor_exact(&pred_stems, &ref_stems)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    ExactMatch,
    Bleu4,
    Meteor,
    Sari,
    Gleu,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::ExactMatch,
        Metric::Meteor,
        Metric::Bleu4,
        Metric::Sari,
        Metric::Gleu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::ExactMatch => "xmatch",
            Metric::Bleu4 => "bleu4",
            Metric::Meteor => "meteor",
            Metric::Sari => "sari",
            Metric::Gleu => "gleu",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_lowercase())
    }

    /// Sentence score on the reporting scale (percent for all metrics).
    pub fn sentence<S: AsRef<str> + PartialEq>(
        self,
        source: &[S],
        pred: &[S],
        reference: &[S],
    ) -> f64 {
        match self {
            Metric::ExactMatch => {
                if exact_match(pred, reference) {
                    100.0
                } else {
                    0.0
                }
            }
            Metric::Bleu4 => 100.0 * bleu4(pred, reference),
            Metric::Meteor => 100.0 * meteor(pred, reference),
            Metric::Sari => sari(source, pred, reference),
            Metric::Gleu => 100.0 * gleu(source, pred, reference),
        }
    }
}

/// One evaluated triple.
pub struct EvalItem<'a> {
    pub source: &'a [String],
    pub pred: &'a [String],
    pub reference: &'a [String],
}

/// Corpus scores as the mean of sentence scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub count: usize,
    pub scores: Vec<(Metric, f64)>,
}

impl Report {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        self.scores
            .iter()
            .find(|(m, _)| *m == metric)
            .map(|(_, v)| *v)
    }

    /// `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut s = format!("count={}\n", self.count);
        for (m, v) in &self.scores {
            let _ = writeln!(s, "{}={:.3}", m.name(), v);
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut header = String::from("| n ");
        let mut row = format!("| {} ", self.count);
        for (m, v) in &self.scores {
            let label = match m {
                Metric::ExactMatch => "xMatch",
                Metric::Bleu4 => "BLEU-4",
                Metric::Meteor => "METEOR",
                Metric::Sari => "SARI",
                Metric::Gleu => "GLEU",
            };
            let cell = format!("{v:.3}");
            let w = label.len().max(cell.len());
            let _ = write!(header, "| {label:>w$} ");
            let _ = write!(row, "| {cell:>w$} ");
        }
        format!("{header}|\n{row}|\n")
    }
}

/// Averages sentence scores, computing each item on worker threads. Results
/// do not depend on scheduling.
pub fn evaluate(items: &[EvalItem<'_>], metrics: &[Metric], threads: usize) -> Report {
    let per_item = |item: &EvalItem<'_>| -> Vec<f64> {
        metrics
            .iter()
            .map(|m| m.sentence(item.source, item.pred, item.reference))
            .collect()
    };
    let rows: Vec<Vec<f64>> = if threads <= 1 || items.len() < 2 {
        items.iter().map(per_item).collect()
    } else {
        let chunk = items.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = items
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(per_item).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("metric worker panicked"))
                .collect()
        })
    };
    let count = items.len();
    let scores = metrics
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let mean = if count == 0 {
                0.0
            } else {
                rows.iter().map(|r| r[k]).sum::<f64>() / count as f64
            };
            (*m, mean)
        })
        .collect();
    Report { count, scores }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn bleu_basics() {
        assert!((bleu4(&w("a b c d"), &w("a b c d")) - 1.0).abs() < 1e-12);
        assert_eq!(bleu4(&w("a b"), &w("c d")), 0.0);
        assert_eq!(bleu4(&w(""), &w("c d")), 0.0);
        // p = 3/4, 2/3, 1/2, (0+1)/(1+1)
        let want = (0.75f64 * (2.0 / 3.0) * 0.5 * 0.5).powf(0.25);
        assert!((bleu4(&w("a b c d"), &w("a b c e")) - want).abs() < 1e-12);
    }

    #[test]
    fn meteor_basics() {
        let id = meteor(&w("x y z"), &w("x y z"));
        assert!((id - (1.0 - 0.5 / 27.0)).abs() < 1e-12);
        assert_eq!(meteor(&w("a b"), &w("c d")), 0.0);
        // stem match: "returns" ~ "return"
        assert!(meteor(&w("returns value"), &w("return value")) > 0.9);
        // transposed: two chunks of length 2
        let m = meteor(&w("c d a b"), &w("a b c d"));
        let f = 1.0;
        assert!((m - f * (1.0 - 0.5 * (2.0f64 / 4.0).powi(3))).abs() < 1e-12);
    }

    #[test]
    fn sari_extremes() {
        assert!((sari(&w("a b c"), &w("a b c"), &w("a b c")) - 100.0).abs() < 1e-12);
        assert!((sari(&w("a b"), &w("c d"), &w("c d")) - 100.0).abs() < 1e-12);
        assert!(sari(&w("a b c"), &w("a b c"), &w("a b d")) < 100.0);
    }

    #[test]
    fn gleu_basics() {
        assert!((gleu(&w("a b c d"), &w("a b c e"), &w("a b c e")) - 1.0).abs() < 1e-12);
        assert_eq!(gleu(&w("a b c d"), &w("x y z w"), &w("a b c e")), 0.0);
        let src = w("the value of the item .");
        let reference = w("the value of the item in degrees .");
        assert!(gleu(&src, &src, &reference) <= bleu4(&src, &reference));
    }

    #[test]
    fn aggregation_is_mean_and_thread_independent() {
        let a = (w("a b c d e"), w("a b c d e"), w("a b c d e"));
        let b = (w("a b c d e"), w("a b c d e"), w("a b x d e"));
        let items = [
            EvalItem {
                source: &a.0,
                pred: &a.1,
                reference: &a.2,
            },
            EvalItem {
                source: &b.0,
                pred: &b.1,
                reference: &b.2,
            },
        ];
        let one = evaluate(&items, &Metric::ALL, 1);
        let two = evaluate(&items, &Metric::ALL, 2);
        assert_eq!(one, two);
        assert_eq!(one.get(Metric::ExactMatch), Some(50.0));
        let s = one.to_key_values();
        assert!(s.starts_with("count=2\nxmatch=50.000\n"));
        assert!(one.to_table().contains("xMatch"));
    }

    #[test]
    fn chunk_search_prefers_contiguous() {
        // "a a" vs "a a": one chunk
        assert_eq!(align_chunks(&[0, 0], &[0, 0]), (2, 1));
        assert_eq!(align_chunks(&[0, 1, 0], &[0, 0, 1]), (3, 2));
        assert_eq!(align_chunks(&[], &[0]), (0, 0));
    }
}
