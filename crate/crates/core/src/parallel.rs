//! Order-deterministic parallel reductions.
//!
//! Work is cut into fixed-size chunks whose boundaries do not depend on the
//! number of worker threads; each chunk is folded sequentially and the chunk
//! results are merged in index order. Floating-point results are therefore
//! bitwise reproducible for any thread count.

use rayon::prelude::*;

/// Samples per chunk.
pub const CHUNK: usize = 256;

/// Folds `item(i)` for `i in 0..count` into accumulators of type `A`.
pub fn chunked_fold<A, I, F, M>(count: usize, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, usize) + Sync,
    M: Fn(&mut A, A),
{
    let chunks = count.div_ceil(CHUNK);
    let partials: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
                fold(&mut acc, i);
            }
            acc
        })
        .collect();
    let mut total = init();
    for p in partials {
        merge(&mut total, p);
    }
    total
}

/// `f(i)` for every `i in 0..count`, in index order.
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_is_thread_count_invariant() {
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                chunked_fold(
                    10_007,
                    || 0.0f64,
                    |acc, i| *acc += 1.0 / (1.0 + i as f64).sqrt(),
                    |acc, p| *acc += p,
                )
            })
        };
        assert_eq!(run(1).to_bits(), run(4).to_bits());
    }
}
