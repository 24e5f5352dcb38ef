//! Batch execution helper. With the `parallel` feature (default) batches
//! fan out over a rayon pool; without it, or with `Parallelism::Sequential`,
//! they run as a plain ordered loop. Output order always matches input
//! order.

/// How to run a batch of independent jobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    /// One job at a time, in order.
    Sequential,
    /// All available cores (requires the `parallel` feature; falls back to
    /// sequential without it).
    #[default]
    Auto,
    /// A pool of exactly `n` threads (0 behaves like `Auto`).
    Threads(usize),
}

impl Parallelism {
    /// Canonical interpretation of a `--jobs N` style flag.
    pub fn from_jobs(jobs: Option<usize>) -> Parallelism {
        match jobs {
            None | Some(1) => Parallelism::Sequential,
            Some(0) => Parallelism::Auto,
            Some(n) => Parallelism::Threads(n),
        }
    }
}

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T, U, F>(items: Vec<T>, mode: Parallelism, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    match mode {
        Parallelism::Sequential => items.into_iter().map(f).collect(),
        Parallelism::Auto => items.into_par_iter().map(f).collect(),
        Parallelism::Threads(n) => {
            if n <= 1 {
                if n == 1 {
                    return items.into_iter().map(f).collect();
                }
                return items.into_par_iter().map(f).collect();
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("thread pool");
            pool.install(|| items.into_par_iter().map(f).collect())
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, U, F>(items: Vec<T>, _mode: Parallelism, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Run two closures, concurrently when allowed, returning both results.
#[cfg(feature = "parallel")]
pub(crate) fn join<A, B, RA, RB>(mode: Parallelism, a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    match mode {
        Parallelism::Sequential => (a(), b()),
        _ => rayon::join(a, b),
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn join<A, B, RA, RB>(_mode: Parallelism, a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    (a(), b())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_preserves_order() {
        let out = par_map((0..100).collect(), Parallelism::Auto, |i: i32| i * 2);
        assert_eq!(out, (0..100).map(|i| i * 2).collect::<Vec<_>>());
        let out = par_map((0..100).collect(), Parallelism::Sequential, |i: i32| i * 2);
        assert_eq!(out, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }

    #[test]
    fn jobs_flag_mapping() {
        assert_eq!(Parallelism::from_jobs(None), Parallelism::Sequential);
        assert_eq!(Parallelism::from_jobs(Some(1)), Parallelism::Sequential);
        assert_eq!(Parallelism::from_jobs(Some(0)), Parallelism::Auto);
        assert_eq!(Parallelism::from_jobs(Some(4)), Parallelism::Threads(4));
    }
}
