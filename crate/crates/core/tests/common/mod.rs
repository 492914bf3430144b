//! Reference implementations used as test oracles. Each one is written
//! independently of the library code it checks, favouring brute force over
//! efficiency.
#![allow(dead_code)]

use rand::Rng;

/// k-window distillation by exhaustive pairwise ranking: a window is kept
/// when fewer than `⌊l_d/n⌋` windows beat it, where a window beats another
/// if it scores higher or scores the same and starts earlier.
pub fn kwindow_oracle(rows: &[Vec<f64>], n: usize, l_q: usize, l_d: usize) -> Vec<Vec<f64>> {
    let q = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let padded_len = d.div_ceil(n) * n;
    let cell = |i: usize, j: usize| if j < d { rows[i][j] } else { 0.0 };

    let windows = padded_len / n;
    let score = |w: usize| -> f64 {
        let mut total = 0.0;
        for j in w * n..(w + 1) * n {
            let mut best = cell(0, j);
            for i in 1..q {
                if cell(i, j) > best {
                    best = cell(i, j);
                }
            }
            total += best;
        }
        total / n as f64
    };
    let scores: Vec<f64> = (0..windows).map(score).collect();
    let keep = l_d / n;
    let selected: Vec<usize> = (0..windows)
        .filter(|&w| {
            let beaten_by = (0..windows)
                .filter(|&v| scores[v] > scores[w] || (scores[v] == scores[w] && v < w))
                .count();
            beaten_by < keep
        })
        .collect();

    let mut out = vec![vec![0.0; l_d]; l_q];
    for (i, row) in out.iter_mut().enumerate().take(q) {
        let mut col = 0;
        for &w in &selected {
            for j in w * n..(w + 1) * n {
                row[col] = cell(i, j);
                col += 1;
            }
        }
    }
    out
}

/// The `n_s` largest values of `row`, descending, zero-padded.
pub fn kmax_oracle(row: &[f64], n_s: usize) -> Vec<f64> {
    let mut sorted = row.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sorted.resize(n_s.max(sorted.len()), 0.0);
    sorted.truncate(n_s);
    sorted
}

/// Values drawn from a coarse grid so that ties are common.
pub fn tie_prone(rng: &mut impl Rng) -> f64 {
    if rng.gen_bool(0.5) {
        f64::from(rng.gen_range(-4i32..=4)) / 4.0
    } else {
        rng.gen_range(-1.0..1.0)
    }
}

pub fn random_rows(rng: &mut impl Rng, q: usize, d: usize) -> Vec<Vec<f64>> {
    (0..q).map(|_| (0..d).map(|_| tie_prone(rng)).collect()).collect()
}

/// ERR by direct cascade simulation.
pub fn err_oracle(grades: &[i32], k: usize, g_max: i32) -> f64 {
    let mut not_stopped = 1.0;
    let mut total = 0.0;
    for (r, &g) in grades.iter().take(k).enumerate() {
        let g = g.clamp(0, g_max);
        let stop = (2f64.powi(g) - 1.0) / 2f64.powi(g_max);
        total += not_stopped * stop / (r + 1) as f64;
        not_stopped *= 1.0 - stop;
    }
    total
}

/// Every permutation of `items`, by recursive insertion.
pub fn permutations(items: &[i32]) -> Vec<Vec<i32>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(&items[1..]) {
        for pos in 0..=p.len() {
            let mut v = p.clone();
            v.insert(pos, items[0]);
            out.push(v);
        }
    }
    out
}

/// Every non-decreasing sequence of grades in `0..=max` of length `len`.
pub fn multisets(len: usize, max: i32) -> Vec<Vec<i32>> {
    fn go(len: usize, min: i32, max: i32, prefix: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
        if prefix.len() == len {
            out.push(prefix.clone());
            return;
        }
        for g in min..=max {
            prefix.push(g);
            go(len, g, max, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(len, 0, max, &mut Vec::new(), &mut out);
    out
}
