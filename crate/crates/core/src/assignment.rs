//! Minimum-cost injections of a small index set into a larger one.

/// Above this many targets the exhaustive search gives way to the Hungarian
/// algorithm.
pub const EXHAUSTIVE_LIMIT: usize = 8;

/// `min over injective s: {0..rows} -> {0..cols}` of `sum_i cost(i, s(i))`.
/// Requires `rows <= cols`.
pub fn min_injection_cost(rows: usize, cols: usize, cost: impl Fn(usize, usize) -> f64) -> f64 {
    assert!(rows <= cols, "cannot inject {rows} items into {cols} slots");
    if rows == 0 {
        return 0.0;
    }
    if cols <= EXHAUSTIVE_LIMIT {
        exhaustive(rows, cols, &cost)
    } else {
        hungarian(cols, |i, j| if i < rows { cost(i, j) } else { 0.0 })
    }
}

fn exhaustive(rows: usize, cols: usize, cost: &impl Fn(usize, usize) -> f64) -> f64 {
    fn go(
        i: usize,
        rows: usize,
        cols: usize,
        used: &mut [bool],
        acc: f64,
        best: &mut f64,
        cost: &impl Fn(usize, usize) -> f64,
    ) {
        if i == rows {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        for j in 0..cols {
            if !used[j] {
                used[j] = true;
                go(i + 1, rows, cols, used, acc + cost(i, j), best, cost);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, rows, cols, &mut vec![false; cols], 0.0, &mut best, cost);
    best
}

/// Square assignment problem by shortest augmenting paths with potentials.
pub fn hungarian(n: usize, cost: impl Fn(usize, usize) -> f64) -> f64 {
    // 1-based arrays; column 0 is the virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut owner = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost(owner[j] - 1, j - 1)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn simple_swap() {
        let c = [[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(min_injection_cost(2, 2, |i, j| c[i][j]), 0.0);
        assert_eq!(hungarian(2, |i, j| c[i][j]), 0.0);
    }

    #[test]
    fn hungarian_agrees_with_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let cols = rng.random_range(1..=7);
            let rows = rng.random_range(1..=cols);
            let c: Vec<Vec<f64>> = (0..cols)
                .map(|_| (0..cols).map(|_| rng.random::<f64>()).collect())
                .collect();
            let brute = exhaustive(rows, cols, &|i, j| c[i][j]);
            let fast = hungarian(cols, |i, j| if i < rows { c[i][j] } else { 0.0 });
            assert!((brute - fast).abs() < 1e-12, "{brute} vs {fast}");
        }
    }

    #[test]
    fn large_instances_use_assignment() {
        // identity is optimal for a cost that is zero on the diagonal only
        let n = 12;
        let v = min_injection_cost(n, n, |i, j| if i == j { 0.0 } else { 1.0 + (i * j) as f64 });
        assert_eq!(v, 0.0);
    }
}
