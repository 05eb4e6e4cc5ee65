//! Thin switch between rayon and sequential execution.
//!
//! With the default `parallel` feature, `map_indexed` fans out over rayon;
//! without it, the sequential path is compiled instead. `map_indexed_serial`
//! is always available so benchmarks can compare the two directly.

/// Map `f` over `0..n`, sequentially.
pub fn map_indexed_serial<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Map `f` over `0..n`, in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    map_indexed_serial(n, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_serial() {
        let f = |i: usize| (i as f64).sqrt();
        assert_eq!(map_indexed(1000, f), map_indexed_serial(1000, f));
    }
}
