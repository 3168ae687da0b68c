//! Small numeric kernels with deterministic reduction order.
//!
//! Sums always run left to right over the storage index, so repeated runs on
//! identical inputs are bit-identical. Row-level parallelism is allowed only
//! where each row is computed independently and written to its own slot; the
//! result then matches the serial order exactly.

use std::sync::OnceLock;

/// Environment variable that caps the size of the internal thread pool.
pub const THREADS_ENV: &str = "ENTROT_THREADS";

/// Rows below this count are always processed serially.
const PAR_MIN_ROWS: usize = 128;

/// Row-parallel work is only worthwhile when the total entry count is large.
const PAR_MIN_ENTRIES: usize = 1 << 16;

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n >= 1);
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        builder
            .build()
            .unwrap_or_else(|_| rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("single-thread pool"))
    })
}

/// Fill an `n_rows x n_cols` row-major matrix by computing each row
/// independently. Parallel and serial paths produce identical bytes because
/// every row is written by exactly one closure call in index order.
pub fn fill_rows<F>(n_rows: usize, n_cols: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let mut data = vec![0.0; n_rows * n_cols];
    if n_rows >= PAR_MIN_ROWS && n_rows * n_cols >= PAR_MIN_ENTRIES {
        use rayon::prelude::*;
        pool().install(|| {
            data.par_chunks_mut(n_cols)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
        });
    } else {
        for (i, row) in data.chunks_mut(n_cols).enumerate() {
            f(i, row);
        }
    }
    data
}

/// Map `0..n` through `f` into a vector, in parallel when large. Each output
/// slot is produced by one closure call, so ordering is deterministic.
pub fn map_indexed<T, F>(n: usize, min_par: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if n >= min_par.max(2) {
        use rayon::prelude::*;
        pool().install(|| (0..n).into_par_iter().map(&f).collect())
    } else {
        (0..n).map(f).collect()
    }
}

/// Like [`map_indexed`] with the default row threshold used by transforms.
pub fn map_rows<F>(n_rows: usize, row_len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync,
{
    let min_par = if n_rows * row_len >= PAR_MIN_ENTRIES {
        PAR_MIN_ROWS
    } else {
        usize::MAX
    };
    map_indexed(n_rows, min_par, f)
}

/// log(sum_i exp(x[i])) with the usual max shift. Returns `-inf` for an empty
/// slice or when every entry is `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let mut s = 0.0;
    for &x in xs {
        s += (x - m).exp();
    }
    m + s.ln()
}

/// Streaming log-sum-exp over `terms(j)` for `j in 0..n`, evaluating each term
/// twice (max pass, then sum pass) to avoid a scratch buffer.
pub fn logsumexp_by(n: usize, terms: impl Fn(usize) -> f64) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for j in 0..n {
        let t = terms(j);
        if t > m {
            m = t;
        }
    }
    if !m.is_finite() {
        return m;
    }
    let mut s = 0.0;
    for j in 0..n {
        s += (terms(j) - m).exp();
    }
    m + s.ln()
}

/// Plain dot product in index order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Mean of `f` under the weight vector `w` (assumed to sum to one).
pub fn weighted_mean(w: &[f64], f: &[f64]) -> f64 {
    dot(w, f)
}

/// Variance of `f` under `w`: two-pass, never negative by construction.
pub fn weighted_variance(w: &[f64], f: &[f64]) -> f64 {
    let m = weighted_mean(w, f);
    let mut s = 0.0;
    for i in 0..w.len() {
        let d = f[i] - m;
        s += w[i] * d * d;
    }
    s
}

/// max(xs) - min(xs); zero for an empty slice.
pub fn oscillation(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in xs {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    hi - lo
}

/// Largest absolute entry; zero for an empty slice.
pub fn sup_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
}

/// Largest absolute difference between two equally long slices.
pub fn sup_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut m = 0.0_f64;
    for i in 0..a.len() {
        m = m.max((a[i] - b[i]).abs());
    }
    m
}

/// Natural logs of the entries; zero weights map to `-inf`.
pub fn ln_weights(w: &[f64]) -> Vec<f64> {
    w.iter()
        .map(|&x| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_naive_on_moderate_inputs() {
        let xs: [f64; 4] = [0.3, -1.2, 2.5, 0.0];
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((logsumexp(&xs) - naive).abs() < 1e-14);
        assert!((logsumexp_by(xs.len(), |j| xs[j]) - naive).abs() < 1e-14);
    }

    #[test]
    fn logsumexp_is_stable_under_large_shifts() {
        let xs = [1000.0, 1000.0];
        let got = logsumexp(&xs);
        assert!((got - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
        let lows = [-1e306, -1e306];
        assert!(logsumexp(&lows).is_finite());
    }

    #[test]
    fn logsumexp_of_empty_or_all_negative_infinity_is_negative_infinity() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_eq!(logsumexp_by(0, |_| 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn weighted_variance_is_nonnegative_and_shift_invariant() {
        let w = [0.25, 0.25, 0.5];
        let f = [1.0, 2.0, -0.5];
        let shifted: Vec<f64> = f.iter().map(|x| x + 7.0).collect();
        let v0 = weighted_variance(&w, &f);
        let v1 = weighted_variance(&w, &shifted);
        assert!(v0 >= 0.0);
        assert!((v0 - v1).abs() < 1e-12);
    }

    #[test]
    fn oscillation_and_sup_norms_behave() {
        assert_eq!(oscillation(&[2.0, -1.0, 0.5]), 3.0);
        assert_eq!(oscillation(&[]), 0.0);
        assert_eq!(sup_abs(&[-3.0, 2.0]), 3.0);
        assert_eq!(sup_abs_diff(&[1.0, 2.0], &[0.5, 4.0]), 2.0);
    }

    #[test]
    fn fill_rows_serial_and_forced_parallel_agree() {
        let n_rows = 300;
        let n_cols = 300;
        let f = |i: usize, row: &mut [f64]| {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = ((i * 31 + j) as f64).sin();
            }
        };
        // n_rows * n_cols exceeds both thresholds, so this exercises the
        // parallel path; the serial reference is computed by hand.
        let par = fill_rows(n_rows, n_cols, f);
        let mut ser = vec![0.0; n_rows * n_cols];
        for (i, row) in ser.chunks_mut(n_cols).enumerate() {
            f(i, row);
        }
        assert_eq!(par, ser);
    }
}
