//! Replicate loops. With the `parallel` feature they run on rayon, otherwise
//! (or with [`Execution::Sequential`]) in a plain loop. Reductions are
//! integer counts, so the result never depends on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether loops actually run in parallel (false without the feature).
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Counts the replicates `0..reps` for which `f` returns true. `f` gets a
/// scratch buffer of length `scratch` that is reused between calls.
pub fn count<F>(reps: u64, scratch: usize, exec: Execution, f: F) -> Result<u64>
where
    F: Fn(u64, &mut [f64]) -> Result<bool> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..reps)
            .into_par_iter()
            .map_init(|| vec![0.0; scratch], |buf, i| f(i, buf))
            .try_fold(|| 0u64, |acc, hit| hit.map(|h| acc + u64::from(h)))
            .try_reduce(|| 0, |a, b| Ok(a + b));
    }
    let _ = exec;
    let mut buf = vec![0.0; scratch];
    let mut total = 0u64;
    for i in 0..reps {
        total += u64::from(f(i, &mut buf)?);
    }
    Ok(total)
}

/// Fills a `rows x width` row-major table, row `i` written by `f(i, row)`.
pub fn fill_rows<F>(rows: usize, width: usize, exec: Execution, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let mut data = vec![0.0; rows * width];
    if width == 0 {
        return data;
    }
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return data;
    }
    let _ = exec;
    for (i, row) in data.chunks_mut(width).enumerate() {
        f(i, row);
    }
    data
}
