use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::samplers::RandomStream;

/// Samples per chunk. Part of the reproducibility contract: chunk `i`
/// always covers the same sample indices and draws from `master.child(i)`.
pub const CHUNK_SIZE: usize = 1024;

/// Runs `f(i, master.child(i))` for `i < count` on a pool of `workers`
/// threads and returns the outputs in index order.
pub fn map_streams<T, F>(count: usize, workers: usize, master: &RandomStream, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut RandomStream) -> T + Sync,
{
    if workers == 0 {
        return Err(Error::WorkerPool("workers must be >= 1".into()));
    }
    let run = |i: usize| f(i, &mut master.child(i as u64));
    if workers == 1 {
        return Ok((0..count).map(run).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::WorkerPool(e.to_string()))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(run).collect()))
}

/// Splits `total` samples into fixed chunks and runs `f(len, stream)` for
/// each chunk; see [`map_streams`]. The result does not depend on `workers`.
pub fn map_chunks<T, F>(total: usize, workers: usize, master: &RandomStream, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut RandomStream) -> T + Sync,
{
    map_streams(total.div_ceil(CHUNK_SIZE), workers, master, |i, stream| {
        f(CHUNK_SIZE.min(total - i * CHUNK_SIZE), stream)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_is_independent_of_worker_count() {
        let master = RandomStream::new(77, 2);
        let draw = |len: usize, s: &mut RandomStream| (0..len).map(|_| s.uniform()).collect::<Vec<_>>();
        let one = map_chunks(5000, 1, &master, draw).unwrap();
        let four = map_chunks(5000, 4, &master, draw).unwrap();
        assert_eq!(one, four);
        assert_eq!(one.iter().map(Vec::len).sum::<usize>(), 5000);
        assert_eq!(one.len(), 5);
        assert!(map_chunks(10, 0, &master, draw).is_err());
    }
}
