//! Order-preserving parallel map.
//!
//! Results are always collected in input order and reduced by the caller
//! sequentially, so any thread count yields bit-identical output.

use rayon::prelude::*;

/// Applies `f` to every item using at most `threads` workers (`0` means the
/// rayon default, `1` runs inline on the calling thread).
pub fn ordered_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    if threads == 1 || items.len() <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let run = || items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    if threads == 0 {
        return run();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(run),
        Err(e) => {
            log::warn!("falling back to sequential evaluation: {e}");
            items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_for_any_thread_count() {
        let items: Vec<u64> = (0..257).collect();
        let want: Vec<u64> = items.iter().map(|v| v * v + 1).collect();
        for threads in [0, 1, 2, 7] {
            assert_eq!(ordered_map(&items, threads, |_, v| v * v + 1), want);
        }
    }
}
