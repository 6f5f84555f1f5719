//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the rayon pool
//! unless the process-wide mode is switched to [`Parallelism::Sequential`].
//! Results always come back in input order, and callers reduce them in that
//! order, so both modes produce bit-identical output.

use std::sync::atomic::{AtomicBool, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    Parallel,
}

static SEQUENTIAL: AtomicBool = AtomicBool::new(false);

pub fn set_parallelism(mode: Parallelism) {
    SEQUENTIAL.store(mode == Parallelism::Sequential, Ordering::Relaxed);
}

pub fn parallelism() -> Parallelism {
    if cfg!(feature = "parallel") && !SEQUENTIAL.load(Ordering::Relaxed) {
        Parallelism::Parallel
    } else {
        Parallelism::Sequential
    }
}

/// `f` over `0..n`, in order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallelism() == Parallelism::Parallel && n > 1 {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_range(items.len(), |i| f(&items[i]))
}

pub fn map_mut<T, R, F>(items: &mut [T], f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(&mut T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallelism() == Parallelism::Parallel && items.len() > 1 {
        use rayon::prelude::*;
        return items.par_iter_mut().map(f).collect();
    }
    items.iter_mut().map(f).collect()
}

/// Applies `f` to fixed-size chunks; the chunk layout does not depend on the mode.
pub fn map_chunks<T, R, F>(items: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    let chunk = chunk.max(1);
    let n = items.len().div_ceil(chunk);
    map_range(n, |i| f(&items[i * chunk..((i + 1) * chunk).min(items.len())]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v: Vec<usize> = (0..100).collect();
        assert_eq!(map(&v, |x| x * 2), (0..100).map(|x| x * 2).collect::<Vec<_>>());
        let sums = map_chunks(&v, 16, |c| c.iter().sum::<usize>());
        assert_eq!(sums.len(), 7);
        assert_eq!(sums.iter().sum::<usize>(), 4950);
    }
}
