//! Deterministic work splitting.
//!
//! Work is always cut into chunks whose boundaries depend only on the problem
//! size, never on the number of workers. Partial results are collected in
//! chunk order and combined by a fixed pairwise tree, so sums are identical to
//! the last bit whether the `std` feature runs them on one thread or many.

use alloc::vec::Vec;

/// Chunk length used by [`sum`] and the vector kernels.
pub const CHUNK: usize = 1024;

/// Pairwise (tree) summation. The tree shape depends only on `values.len()`.
pub fn tree_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            tree_sum(&values[..mid]) + tree_sum(&values[mid..])
        }
    }
}

/// Evaluates `f(i)` for `i in 0..n` and returns the results in index order.
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "std")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "std"))]
    {
        (0..n).map(f).collect()
    }
}

/// Deterministic sum of `f(i)` over `0..n`: sequential inside fixed chunks,
/// tree-combined across chunks.
pub fn sum<F>(n: usize, chunk: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunk = chunk.max(1);
    let chunks = n.div_ceil(chunk);
    let partial = map(chunks, |c| {
        let start = c * chunk;
        let end = (start + chunk).min(n);
        let mut acc = 0.0;
        for i in start..end {
            acc += f(i);
        }
        acc
    });
    tree_sum(&partial)
}

/// Like [`sum`] but accumulates several components at once.
pub fn sum_vec<F>(n: usize, chunk: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let chunk = chunk.max(1);
    let chunks = n.div_ceil(chunk);
    let partial = map(chunks, |c| {
        let start = c * chunk;
        let end = (start + chunk).min(n);
        let mut acc = alloc::vec![0.0; width];
        for i in start..end {
            f(i, &mut acc);
        }
        acc
    });
    let mut out = alloc::vec![0.0; width];
    let mut column = Vec::with_capacity(partial.len());
    for (k, slot) in out.iter_mut().enumerate() {
        column.clear();
        column.extend(partial.iter().map(|p| p[k]));
        *slot = tree_sum(&column);
    }
    out
}

/// Deterministic inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum(a.len(), CHUNK, |i| a[i] * b[i])
}

/// Fills `out[i] = f(i)` in parallel chunks.
pub fn fill<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "std")]
    {
        use rayon::prelude::*;
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, block)| {
            let base = c * CHUNK;
            for (j, v) in block.iter_mut().enumerate() {
                *v = f(base + j);
            }
        });
    }
    #[cfg(not(feature = "std"))]
    {
        for (i, v) in out.iter_mut().enumerate() {
            *v = f(i);
        }
    }
}

/// `y <- y + alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    #[cfg(feature = "std")]
    {
        use rayon::prelude::*;
        y.par_chunks_mut(CHUNK)
            .zip(x.par_chunks(CHUNK))
            .for_each(|(yb, xb)| {
                for (yi, xi) in yb.iter_mut().zip(xb) {
                    *yi += alpha * xi;
                }
            });
    }
    #[cfg(not(feature = "std"))]
    {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    }
}

/// Subtracts the mean so that the entries sum to zero.
pub fn remove_mean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = sum(v.len(), CHUNK, |i| v[i]) / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_sum_matches_exact_small_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(tree_sum(&v), 500500.0);
        assert_eq!(sum(1000, 7, |i| (i + 1) as f64), 500500.0);
    }

    #[test]
    fn sum_is_independent_of_call_order() {
        let f = |i: usize| libm::sin(i as f64 * 0.37) * 1e-3 + 1.0 / (i as f64 + 1.0);
        let a = sum(100_000, CHUNK, f);
        let b = sum(100_000, CHUNK, f);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn sum_vec_components() {
        let out = sum_vec(10, 3, 2, |i, acc| {
            acc[0] += i as f64;
            acc[1] += 1.0;
        });
        assert_eq!(out, alloc::vec![45.0, 10.0]);
    }
}
