//! Ordered data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature the map runs on the current rayon pool;
//! without it, or inside a single-thread pool, it is a plain iterator.
//! Output order always equals input order.

/// Maps `f` over `0..n`, preserving order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if rayon::current_num_threads() > 1 {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Runs `f` with at most `jobs` worker threads (`None` = all cores).
pub fn with_jobs<T, F>(jobs: Option<usize>, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    #[cfg(feature = "parallel")]
    {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            builder = builder.num_threads(j.max(1));
        }
        match builder.build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("thread pool unavailable ({e}); running sequentially");
                f()
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_for_any_job_count() {
        for jobs in [1, 2, 4] {
            let v = with_jobs(Some(jobs), || map_indexed(100, |i| i * i));
            assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
        }
    }
}
