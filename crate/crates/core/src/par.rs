//! Data-parallel helpers.
//!
//! Every parallel map collects into an index-ordered `Vec`, and all reductions
//! downstream are sequential sums over that vector, so results are bitwise
//! identical between [`Exec::Sequential`] and [`Exec::Parallel`].

/// Below this many items a parallel map runs sequentially.
#[cfg(feature = "parallel")]
const MIN_PARALLEL_LEN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise falls back
    /// to the sequential path.
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this mode actually runs on the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Maps `f` over `0..n`, preserving index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            if self == Exec::Parallel && n >= MIN_PARALLEL_LEN {
                use rayon::prelude::*;
                return (0..n).into_par_iter().map(f).collect();
            }
        }
        (0..n).map(f).collect()
    }

    /// Maps `f` over `0..n` regardless of length; used for coarse-grained work
    /// such as independent scenarios.
    pub fn map_tasks<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            if self == Exec::Parallel && n > 1 {
                use rayon::prelude::*;
                return (0..n).into_par_iter().map(f).collect();
            }
        }
        (0..n).map(f).collect()
    }
}

/// Caps the global rayon pool at `threads` workers. Has to run before the
/// first parallel call; a no-op without the `parallel` feature.
pub fn limit_threads(threads: usize) -> crate::Result<()> {
    if threads == 0 {
        return Err(crate::Error::Input("thread count must be positive".into()));
    }
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| crate::Error::Internal(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Sequential sum with Neumaier compensation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
