//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the library's likelihood or prior code.

#![allow(dead_code)]

use std::collections::HashMap;

/// All set partitions of `n` items as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max {
            cur.push(b);
            go(i + 1, n, cur, max.max(b + 1), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
    } else {
        go(0, n, &mut Vec::new(), 0, &mut out);
    }
    out
}

pub fn n_blocks(rgs: &[usize]) -> usize {
    rgs.iter().max().map_or(0, |m| m + 1)
}

pub fn block_sizes(rgs: &[usize]) -> Vec<usize> {
    let mut sizes = vec![0; n_blocks(rgs)];
    for &b in rgs {
        sizes[b] += 1;
    }
    sizes
}

/// Canonical relabeling by first appearance.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Beta-Binomial marginal of a fixed 0/1 sequence with `s` ones and `f`
/// zeros, accumulated one observation at a time.
pub fn telescoping_marginal(s: usize, f: usize, a0: f64, b0: f64) -> f64 {
    let mut log_p = 0.0;
    for i in 0..s {
        log_p += ((a0 + i as f64) / (a0 + b0 + i as f64)).ln();
    }
    for i in 0..f {
        log_p += ((b0 + i as f64) / (a0 + b0 + (s + i) as f64)).ln();
    }
    log_p
}

fn rising(x: f64, n: usize) -> f64 {
    (0..n).map(|i| x + i as f64).product()
}

fn falling(k: usize, t: usize) -> f64 {
    (0..t).map(|i| (k - i) as f64).product()
}

/// Mixture-of-finite-mixtures partition prior of a block-size profile with
/// zero-truncated Poisson(gamma) on the number of components, optionally
/// restricted to `1..=cap` and renormalized. Linear-space sums; fine for
/// the small sizes used in tests.
pub fn mfm_partition_prob(sizes: &[usize], gamma: f64, alpha: f64, cap: Option<usize>) -> f64 {
    let n: usize = sizes.iter().sum();
    let t = sizes.len();
    let upper = cap.unwrap_or(400);
    let pois = |k: usize| {
        let mut p = (-gamma).exp();
        for i in 1..=k {
            p *= gamma / i as f64;
        }
        p
    };
    let norm: f64 = (1..=upper).map(pois).sum();
    if t > upper {
        return 0.0;
    }
    let v: f64 = (t..=upper)
        .map(|k| pois(k) / norm * falling(k, t) / rising(k as f64 * alpha, n))
        .sum();
    v * sizes.iter().map(|&m| rising(alpha, m)).product::<f64>()
}

pub fn kmax(size: usize) -> usize {
    (size + 1) / 2
}

pub struct Hyper {
    pub a0: f64,
    pub b0: f64,
    pub gamma_row: f64,
    pub alpha_row: f64,
    pub gamma_col: f64,
    pub alpha_col: f64,
}

pub const UNIT: Hyper = Hyper {
    a0: 1.0,
    b0: 1.0,
    gamma_row: 1.0,
    alpha_row: 1.0,
    gamma_col: 1.0,
    alpha_col: 1.0,
};

/// Unnormalized posterior mass of one examinee partition under a question
/// cluster, data given as `x[i][j]`.
pub fn row_partition_mass(x: &[Vec<u8>], cols: &[usize], rows: &[usize], h: &Hyper) -> f64 {
    let prior = mfm_partition_prob(&block_sizes(rows), h.gamma_row, h.alpha_row, Some(kmax(cols.len())));
    let mut lik = 0.0;
    for b in 0..n_blocks(rows) {
        let mut s = 0;
        let mut f = 0;
        for (i, &r) in rows.iter().enumerate() {
            if r == b {
                for &j in cols {
                    if x[i][j] == 1 {
                        s += 1;
                    } else {
                        f += 1;
                    }
                }
            }
        }
        lik += telescoping_marginal(s, f, h.a0, h.b0);
    }
    prior * lik.exp()
}

/// Marginal of a question cluster: sum over admissible examinee partitions.
pub fn cluster_mass(x: &[Vec<u8>], cols: &[usize], h: &Hyper) -> f64 {
    let cap = kmax(cols.len());
    set_partitions(x.len())
        .iter()
        .filter(|r| n_blocks(r) <= cap)
        .map(|r| row_partition_mass(x, cols, r, h))
        .sum()
}

/// Exact posterior over question partitions (keyed by canonical labels).
pub fn column_posterior(x: &[Vec<u8>], h: &Hyper) -> Vec<(Vec<usize>, f64)> {
    let d = x[0].len();
    let mut out: Vec<(Vec<usize>, f64)> = set_partitions(d)
        .into_iter()
        .map(|c| {
            let prior = mfm_partition_prob(&block_sizes(&c), h.gamma_col, h.alpha_col, None);
            let lik: f64 = (0..n_blocks(&c))
                .map(|b| {
                    let cols: Vec<usize> = (0..d).filter(|&j| c[j] == b).collect();
                    cluster_mass(x, &cols, h)
                })
                .product();
            (c, prior * lik)
        })
        .collect();
    let total: f64 = out.iter().map(|(_, w)| w).sum();
    for (_, w) in &mut out {
        *w /= total;
    }
    out
}

/// Total variation distance between an exact law and empirical counts.
pub fn total_variation(exact: &[(Vec<usize>, f64)], counts: &HashMap<Vec<usize>, usize>) -> f64 {
    let n: usize = counts.values().sum();
    let mut tv = 0.0;
    for (key, p) in exact {
        let q = counts.get(key).copied().unwrap_or(0) as f64 / n as f64;
        tv += (p - q).abs();
    }
    // states outside the exact support
    let known: std::collections::HashSet<&Vec<usize>> = exact.iter().map(|(k, _)| k).collect();
    for (key, &c) in counts {
        if !known.contains(key) {
            tv += c as f64 / n as f64;
        }
    }
    0.5 * tv
}

/// Rand index by enumerating every item pair.
pub fn rand_index_pairs(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            total += 1;
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / total as f64
}

/// All permutations of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// `min over injections of truth into estimate` by trying every ordering of
/// the (zero-padded) estimate.
pub fn brute_matched<F: Fn(f64, f64) -> f64>(estimate: &[f64], truth: &[f64], pad: bool, cost: F) -> f64 {
    let slots = if pad { estimate.len().max(truth.len()) } else { estimate.len() };
    let est: Vec<f64> = (0..slots).map(|j| estimate.get(j).copied().unwrap_or(0.0)).collect();
    permutations(slots)
        .iter()
        .map(|p| truth.iter().enumerate().map(|(i, &t)| cost(est[p[i]], t)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}
