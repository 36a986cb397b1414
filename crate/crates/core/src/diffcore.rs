//! Longest-matching-block sequence matcher producing equal/replace/insert/delete
//! opcodes. Junk handling is disabled, so the result depends only on the two
//! sequences.

use std::collections::HashMap;
use std::hash::Hash;
use std::ops::Range;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpTag {
    Equal,
    Replace,
    Insert,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opcode {
    pub tag: OpTag,
    pub old_range: Range<usize>,
    pub new_range: Range<usize>,
}

impl Opcode {
    fn new(tag: OpTag, old_range: Range<usize>, new_range: Range<usize>) -> Self {
        Opcode {
            tag,
            old_range,
            new_range,
        }
    }
}

/// Longest common block in `old[alo..ahi]` and `new[blo..bhi]`.
///
/// Returns `(i, j, k)` with the smallest `i`, then smallest `j`, among the
/// maximal blocks.
fn longest_match<T: Eq + Hash>(
    old: &[T],
    b2j: &HashMap<&T, Vec<usize>>,
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
) -> (usize, usize, usize) {
    let (mut best_i, mut best_j, mut best_k) = (alo, blo, 0);
    // j2len[j] = length of the match ending at old[i-1], new[j]
    let mut j2len: HashMap<usize, usize> = HashMap::new();
    for (i, item) in old.iter().enumerate().take(ahi).skip(alo) {
        let mut next: HashMap<usize, usize> = HashMap::new();
        if let Some(js) = b2j.get(item) {
            for &j in js {
                if j < blo {
                    continue;
                }
                if j >= bhi {
                    break;
                }
                let k = j
                    .checked_sub(1)
                    .and_then(|p| j2len.get(&p))
                    .copied()
                    .unwrap_or(0)
                    + 1;
                next.insert(j, k);
                if k > best_k {
                    best_i = i + 1 - k;
                    best_j = j + 1 - k;
                    best_k = k;
                }
            }
        }
        j2len = next;
    }
    (best_i, best_j, best_k)
}

/// Matching blocks `(i, j, len)` in increasing order, adjacent blocks merged.
pub fn matching_blocks<T: Eq + Hash>(old: &[T], new: &[T]) -> Vec<(usize, usize, usize)> {
    let mut b2j: HashMap<&T, Vec<usize>> = HashMap::new();
    for (j, item) in new.iter().enumerate() {
        b2j.entry(item).or_default().push(j);
    }
    let mut queue = vec![(0, old.len(), 0, new.len())];
    let mut blocks = Vec::new();
    while let Some((alo, ahi, blo, bhi)) = queue.pop() {
        let (i, j, k) = longest_match(old, &b2j, alo, ahi, blo, bhi);
        if k > 0 {
            blocks.push((i, j, k));
            if alo < i && blo < j {
                queue.push((alo, i, blo, j));
            }
            if i + k < ahi && j + k < bhi {
                queue.push((i + k, ahi, j + k, bhi));
            }
        }
    }
    blocks.sort_unstable();
    let mut merged: Vec<(usize, usize, usize)> = Vec::with_capacity(blocks.len());
    for (i, j, k) in blocks {
        if let Some(last) = merged.last_mut() {
            if last.0 + last.2 == i && last.1 + last.2 == j {
                last.2 += k;
                continue;
            }
        }
        merged.push((i, j, k));
    }
    merged
}

/// Opcodes tiling both sequences, in order.
pub fn match_sequences<T: Eq + Hash>(old: &[T], new: &[T]) -> Vec<Opcode> {
    let mut ops = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut blocks = matching_blocks(old, new);
    blocks.push((old.len(), new.len(), 0));
    for (ai, bj, size) in blocks {
        let tag = match (i < ai, j < bj) {
            (true, true) => Some(OpTag::Replace),
            (true, false) => Some(OpTag::Delete),
            (false, true) => Some(OpTag::Insert),
            (false, false) => None,
        };
        if let Some(tag) = tag {
            ops.push(Opcode::new(tag, i..ai, j..bj));
        }
        i = ai + size;
        j = bj + size;
        if size > 0 {
            ops.push(Opcode::new(OpTag::Equal, ai..i, bj..j));
        }
    }
    ops
}

/// Rebuilds `new` from `old` and the opcodes; used to check round trips.
pub fn apply_opcodes<T: Clone>(old: &[T], new: &[T], ops: &[Opcode]) -> Vec<T> {
    let mut out = Vec::with_capacity(new.len());
    for op in ops {
        match op.tag {
            OpTag::Equal => out.extend_from_slice(&old[op.old_range.clone()]),
            OpTag::Delete => {}
            OpTag::Insert | OpTag::Replace => out.extend_from_slice(&new[op.new_range.clone()]),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ops(a: &str, b: &str) -> Vec<(OpTag, Range<usize>, Range<usize>)> {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        match_sequences(&a, &b)
            .into_iter()
            .map(|o| (o.tag, o.old_range, o.new_range))
            .collect()
    }

    #[test]
    fn replace_tail() {
        assert_eq!(
            ops("ab", "ac"),
            vec![(OpTag::Equal, 0..1, 0..1), (OpTag::Replace, 1..2, 1..2)]
        );
    }

    #[test]
    fn identity() {
        assert_eq!(ops("ab", "ab"), vec![(OpTag::Equal, 0..2, 0..2)]);
        assert!(ops("", "").is_empty());
    }

    #[test]
    fn replace_in_middle() {
        assert_eq!(
            ops("abcab", "adcab"),
            vec![
                (OpTag::Equal, 0..1, 0..1),
                (OpTag::Replace, 1..2, 1..2),
                (OpTag::Equal, 2..5, 2..5)
            ]
        );
    }

    #[test]
    fn empty_sides() {
        assert_eq!(ops("", "ab"), vec![(OpTag::Insert, 0..0, 0..2)]);
        assert_eq!(ops("ab", ""), vec![(OpTag::Delete, 0..2, 0..0)]);
    }

    #[test]
    fn tie_prefers_earliest_old_then_new() {
        // "ab" occurs twice in new; the earliest new position wins.
        assert_eq!(
            ops("ab", "abab"),
            vec![(OpTag::Equal, 0..2, 0..2), (OpTag::Insert, 2..2, 2..4)]
        );
        assert_eq!(
            ops("abab", "ab"),
            vec![(OpTag::Equal, 0..2, 0..2), (OpTag::Delete, 2..4, 2..2)]
        );
    }
}
