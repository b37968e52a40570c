//! Optional thread fan-out for embarrassingly parallel workloads.
//!
//! Results are collected in input order, so the output is bitwise identical
//! for any thread count (including 1, the default).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Set the worker count used by [`ordered_map`]. Values below 1 clamp to 1.
pub fn set_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::Relaxed);
}

pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

/// Apply `f` to every item, returning outputs in input order.
pub fn ordered_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let workers = threads().min(items.len().max(1));
    if workers <= 1 {
        return items.into_iter().map(f).collect();
    }
    let queue: Mutex<std::vec::IntoIter<(usize, T)>> =
        Mutex::new(items.into_iter().enumerate().collect::<Vec<_>>().into_iter());
    let results: Mutex<Vec<(usize, R)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let next = queue.lock().unwrap().next();
                match next {
                    Some((idx, item)) => {
                        let out = f(item);
                        results.lock().unwrap().push((idx, out));
                    }
                    None => break,
                }
            });
        }
    });
    let mut collected = results.into_inner().unwrap();
    collected.sort_by_key(|&(idx, _)| idx);
    collected.into_iter().map(|(_, r)| r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_map_preserves_order() {
        set_threads(4);
        let out = ordered_map((0..100).collect(), |x: i32| x * x);
        set_threads(1);
        assert_eq!(out, (0..100).map(|x| x * x).collect::<Vec<_>>());
    }
}
