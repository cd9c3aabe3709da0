//! Parallel/sequential execution of chunked work.
//!
//! Hot loops (batch forward/backward passes, candidate-swap evaluation)
//! split their input into fixed-size chunks, map each chunk independently,
//! and reduce the per-chunk results in chunk order. The arithmetic inside a
//! chunk and the reduction order are the same whether chunks run on one
//! thread or many, so outputs are bitwise identical across `Exec` modes and
//! thread counts.

/// How chunked work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    /// Use the rayon thread pool (falls back to sequential when the
    /// `parallel` feature is disabled).
    #[default]
    Parallel,
    /// Run chunks in order on the calling thread.
    Sequential,
}

/// Chunk size for batched model evaluation.
pub const CHUNK: usize = 512;

/// Map `items` in chunks of `chunk_size`, returning per-chunk outputs in
/// chunk order.
pub fn map_chunks<T, R, F>(exec: Exec, items: &[T], chunk_size: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &[T]) -> R + Sync,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items
                .par_chunks(chunk_size)
                .enumerate()
                .map(|(i, c)| f(i, c))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        Exec::Parallel => items
            .chunks(chunk_size)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect(),
        Exec::Sequential => items
            .chunks(chunk_size)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect(),
    }
}

/// Cap the global rayon pool. Safe to call once per process; later calls
/// are ignored. A no-op without the `parallel` feature.
pub fn configure_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let xs: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let sum = |_: usize, c: &[f64]| c.iter().sum::<f64>();
        let a = map_chunks(Exec::Parallel, &xs, 128, sum);
        let b = map_chunks(Exec::Sequential, &xs, 128, sum);
        assert_eq!(a, b);
    }
}
