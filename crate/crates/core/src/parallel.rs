//! Indexed data-parallel map with deterministic output order.
//!
//! With the `parallel` feature the tasks run on a rayon pool; without it
//! they run in index order on the calling thread. Either way result `i`
//! lands in slot `i`, and the reported error is the one with the lowest
//! index.

use crate::error::Result;

/// Number of workers to use: `0` means "all available".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Workers(pub usize);

impl Workers {
    pub fn sequential() -> Self {
        Workers(1)
    }
}

/// `f(0), f(1), ..., f(n - 1)` in order.
pub fn map_indexed<T, F>(n: usize, workers: Workers, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let results = run(n, workers, &f)?;
    results.into_iter().collect()
}

#[cfg(feature = "parallel")]
fn run<T, F>(n: usize, workers: Workers, f: &F) -> Result<Vec<Result<T>>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    if workers.0 == 1 || n <= 1 {
        return Ok((0..n).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.0)
        .build()
        .map_err(|e| crate::error::Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run<T, F>(n: usize, workers: Workers, f: &F) -> Result<Vec<Result<T>>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let _ = workers;
    Ok((0..n).map(f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn order_is_preserved() {
        for w in [1, 2, 4] {
            let v = map_indexed(100, Workers(w), |i| Ok(i * i)).unwrap();
            assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn first_error_wins() {
        let r: Result<Vec<usize>> = map_indexed(50, Workers(4), |i| {
            if i % 7 == 3 {
                Err(Error::SampleIndex { index: i, max: 0 })
            } else {
                Ok(i)
            }
        });
        assert!(matches!(r, Err(Error::SampleIndex { index: 3, .. })));
    }
}
