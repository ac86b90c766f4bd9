//! Data-parallel helpers.
//!
//! With the `parallel` feature the maps below run on the rayon pool; without
//! it they run in order on the calling thread. Both paths return results in
//! input order, so any reduction done by the caller is bit-identical across
//! thread counts.

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SMOOTHRACE_THREADS";

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to `0..n`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Apply `f` to every element of a mutable slice, preserving order.
#[cfg(feature = "parallel")]
pub fn map_slice_mut<I, T, F>(items: &mut [I], f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(usize, &mut I) -> T + Sync + Send,
{
    items
        .par_iter_mut()
        .enumerate()
        .map(|(i, item)| f(i, item))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice_mut<I, T, F>(items: &mut [I], f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(usize, &mut I) -> T + Sync + Send,
{
    items
        .iter_mut()
        .enumerate()
        .map(|(i, item)| f(i, item))
        .collect()
}

/// Thread cap requested through [`THREADS_ENV`], if any.
pub fn requested_threads() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Install a global pool honoring [`THREADS_ENV`]. Calling it more than once
/// is harmless; only the first call takes effect.
pub fn init_thread_pool() {
    #[cfg(feature = "parallel")]
    if let Some(n) = requested_threads() {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Number of threads the data-parallel helpers will use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Run `f` with the data-parallel helpers limited to `threads` workers.
/// Without the `parallel` feature this simply calls `f`.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v = map_range(1000, |i| i * 3);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 3 * i));
        let mut items: Vec<u64> = (0..257).collect();
        let out = map_slice_mut(&mut items, |i, x| {
            *x += 1;
            i as u64 + *x
        });
        assert!(out.iter().enumerate().all(|(i, &x)| x == 2 * i as u64 + 1));
    }

    #[test]
    fn float_reductions_do_not_depend_on_threads() {
        let f = || {
            map_range(4096, |i| (i as f64 * 0.37).sin() / (1.0 + i as f64))
                .into_iter()
                .sum::<f64>()
        };
        let one = with_threads(1, f);
        let many = with_threads(4, f);
        assert_eq!(one.to_bits(), many.to_bits());
    }
}
