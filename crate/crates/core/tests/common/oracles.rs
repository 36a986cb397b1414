use std::collections::{HashMap, HashSet};

pub type Seq = Vec<u8>;

/// Every sequence over `{0, 1, 2}` with length at most `max_len`.
pub fn all_sequences(max_len: usize) -> Vec<Seq> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for sym in 0..3u8 {
                let mut t: Seq = s.clone();
                t.push(sym);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub fn grams(s: &[u8], n: usize) -> HashMap<Vec<u8>, usize> {
    let mut m = HashMap::new();
    if s.len() >= n {
        for i in 0..=s.len() - n {
            *m.entry(s[i..i + n].to_vec()).or_insert(0) += 1;
        }
    }
    m
}

pub fn count(m: &HashMap<Vec<u8>, usize>, g: &[u8]) -> usize {
    m.get(g).copied().unwrap_or(0)
}

pub fn oracle_bleu(p: &[u8], r: &[u8]) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    let mut logs = 0.0;
    for n in 1..=4 {
        let (pg, rg) = (grams(p, n), grams(r, n));
        let total: usize = pg.values().sum();
        let clipped: usize = pg.iter().map(|(g, c)| (*c).min(count(&rg, g))).sum();
        let prec = match (clipped, n) {
            (0, 1) => return 0.0,
            (0, _) => 1.0 / (total + 1) as f64,
            _ => clipped as f64 / total as f64,
        };
        logs += prec.ln() / 4.0;
    }
    let bp = if p.len() >= r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / p.len() as f64).exp()
    };
    bp * logs.exp()
}

pub fn oracle_gleu(s: &[u8], p: &[u8], r: &[u8]) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    let mut logs = 0.0;
    for n in 1..=4 {
        let (sg, pg, rg) = (grams(s, n), grams(p, n), grams(r, n));
        let mut num: i64 = 0;
        for (g, c) in &pg {
            num += (*c).min(count(&rg, g)) as i64;
            num -= (*c).min(count(&sg, g).saturating_sub(count(&rg, g))) as i64;
        }
        let den = p.len() as i64 - n as i64 + 1;
        if num <= 0 || den <= 0 {
            return 0.0;
        }
        logs += (num as f64 / den as f64).ln() / 4.0;
    }
    ((1.0 - r.len() as f64 / p.len() as f64).min(0.0) + logs).exp()
}

pub fn frac(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn oracle_sari(s: &[u8], p: &[u8], r: &[u8]) -> f64 {
    let mut total = 0.0;
    for n in 1..=4 {
        let (sg, pg, rg) = (grams(s, n), grams(p, n), grams(r, n));
        // multiset intersections and differences
        let inter =
            |a: &HashMap<Vec<u8>, usize>, b: &HashMap<Vec<u8>, usize>| -> HashMap<Vec<u8>, usize> {
                a.iter()
                    .map(|(g, c)| (g.clone(), (*c).min(count(b, g))))
                    .filter(|(_, c)| *c > 0)
                    .collect()
            };
        let diff =
            |a: &HashMap<Vec<u8>, usize>, b: &HashMap<Vec<u8>, usize>| -> HashMap<Vec<u8>, usize> {
                a.iter()
                    .map(|(g, c)| (g.clone(), c.saturating_sub(count(b, g))))
                    .filter(|(_, c)| *c > 0)
                    .collect()
            };
        let size = |m: &HashMap<Vec<u8>, usize>| -> usize { m.values().sum() };

        let kept = inter(&sg, &pg);
        let keep = harmonic(
            frac(size(&inter(&kept, &rg)), size(&kept)),
            frac(size(&inter(&kept, &rg)), size(&inter(&sg, &rg))),
        );

        let deleted = diff(&sg, &pg);
        let should = diff(&sg, &rg);
        let del_good = size(&inter(&deleted, &should));
        let delete = harmonic(
            frac(del_good, size(&deleted)),
            frac(del_good, size(&should)),
        );

        let s_types: HashSet<&Vec<u8>> = sg.keys().collect();
        let added: HashSet<&Vec<u8>> = pg.keys().filter(|g| !s_types.contains(g)).collect();
        let wanted: HashSet<&Vec<u8>> = rg.keys().filter(|g| !s_types.contains(g)).collect();
        let add_good = added.intersection(&wanted).count();
        let add = harmonic(frac(add_good, added.len()), frac(add_good, wanted.len()));

        total += (keep + delete + add) / 3.0;
    }
    100.0 * total / 4.0
}

/// Best alignment by enumerating every partial matching of equal tokens.
pub fn oracle_alignment(p: &[u8], r: &[u8]) -> (usize, usize) {
    fn go(
        p: &[u8],
        r: &[u8],
        i: usize,
        used: &mut Vec<bool>,
        map: &mut Vec<Option<usize>>,
        best: &mut (usize, usize),
    ) {
        if i == p.len() {
            let matches = map.iter().flatten().count();
            let mut chunks = 0;
            for k in 0..map.len() {
                if let Some(j) = map[k] {
                    let continues = k > 0 && j > 0 && map[k - 1] == Some(j - 1);
                    if !continues {
                        chunks += 1;
                    }
                }
            }
            if matches > best.0 || (matches == best.0 && chunks < best.1) {
                *best = (matches, chunks);
            }
            return;
        }
        map.push(None);
        go(p, r, i + 1, used, map, best);
        map.pop();
        for j in 0..r.len() {
            if !used[j] && r[j] == p[i] {
                used[j] = true;
                map.push(Some(j));
                go(p, r, i + 1, used, map, best);
                map.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (0, 0);
    go(
        p,
        r,
        0,
        &mut vec![false; r.len()],
        &mut Vec::new(),
        &mut best,
    );
    best
}

pub fn oracle_meteor(p: &[u8], r: &[u8]) -> f64 {
    let (m, ch) = oracle_alignment(p, r);
    if m == 0 {
        return 0.0;
    }
    let precision = m as f64 / p.len() as f64;
    let recall = m as f64 / r.len() as f64;
    let fmean = 10.0 * precision * recall / (recall + 9.0 * precision);
    fmean * (1.0 - 0.5 * (ch as f64 / m as f64).powi(3))
}

/// Whether `s` has some n-gram (n <= 4) more often than `r`.
pub fn source_has_dropped_gram(s: &[u8], r: &[u8]) -> bool {
    (1..=4).any(|n| {
        let (sg, rg) = (grams(s, n), grams(r, n));
        sg.iter().any(|(g, c)| *c > count(&rg, g))
    })
}
