//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these dispatch to rayon; without
//! it they run the same closures sequentially. Work is always split so
//! that each output element is produced by exactly one closure call, which
//! keeps results bit-identical between the two builds.

/// How batch-level work (evaluation, caching, benchmark rows) is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Sequential,
    /// Shard across the rayon pool. Falls back to sequential when the
    /// crate is built without `parallel`.
    Parallel,
}

impl Exec {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().map(f).collect(),
            Exec::Parallel => map(items, f),
        }
    }
}

/// Element work below this size is not worth a fork/join.
#[cfg(feature = "parallel")]
pub(crate) const MIN_PAR_WORK: usize = 1 << 15;

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Calls `f(index, chunk)` for each `chunk`-sized piece of `out`.
/// Runs in parallel only when `work` (a rough flop count) is large.
#[cfg(feature = "parallel")]
pub fn for_each_chunk<F>(out: &mut [f64], chunk: usize, work: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    use rayon::prelude::*;
    if chunk == 0 {
        return;
    }
    if work >= MIN_PAR_WORK && rayon::current_num_threads() > 1 {
        out.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    } else {
        out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_chunk<F>(out: &mut [f64], chunk: usize, _work: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if chunk == 0 {
        return;
    }
    out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Runs `f` on a single worker thread so kernel-level parallelism is off.
/// Used for comparable latency measurements.
#[cfg(feature = "parallel")]
pub fn single_threaded<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(1).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn single_threaded<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    f()
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

pub fn worker_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_matches_sequential() {
        let mut a = vec![0.0; 1 << 16];
        for_each_chunk(&mut a, 256, usize::MAX, |i, c| {
            for (j, x) in c.iter_mut().enumerate() {
                *x = (i * 256 + j) as f64 * 0.5;
            }
        });
        assert!(a.iter().enumerate().all(|(k, &x)| x == k as f64 * 0.5));
    }

    #[test]
    fn exec_modes_agree() {
        let items: Vec<u32> = (0..100).collect();
        let s = Exec::Sequential.map(&items, |x| x * x);
        let p = Exec::Parallel.map(&items, |x| x * x);
        assert_eq!(s, p);
    }
}
