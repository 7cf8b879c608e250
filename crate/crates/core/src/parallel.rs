//! A tiny deterministic work-sharing helper.
//!
//! Per-image stages (kernel estimation, analytics, adapter application) are
//! embarrassingly parallel. `map_indexed` fans items out over a fixed number
//! of workers and collects results *by input index*, so the output order, and
//! everything serialized from it, never depends on scheduling. The worker
//! count is capped by the `DEGFORGE_THREADS` environment variable (unset or
//! `0` means one worker per available core).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

pub const THREADS_ENV: &str = "DEGFORGE_THREADS";

/// Effective worker count: `min(DEGFORGE_THREADS or cores, jobs)`, at least 1.
pub fn worker_count(jobs: usize) -> usize {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    cap.min(jobs).max(1)
}

/// Applies `f` to every item, in parallel, returning results in input order.
///
/// `f` must be deterministic in its arguments; with that, the output is
/// identical no matter how many workers run.
pub fn map_indexed<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync,
{
    let n = items.len();
    let workers = worker_count(n);
    if workers <= 1 || n <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, U)>();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let items = &items;
            let f = &f;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                if tx.send((i, f(i, &items[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
    });

    let mut slots: Vec<Option<U>> = (0..n).map(|_| None).collect();
    for (i, out) in rx {
        slots[i] = Some(out);
    }
    slots.into_iter().map(|s| s.expect("slot filled")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_input_order() {
        let items: Vec<usize> = (0..97).collect();
        let out = map_indexed(items, |i, &v| {
            assert_eq!(i, v);
            v * 3
        });
        assert_eq!(out, (0..97).map(|v| v * 3).collect::<Vec<_>>());
    }

    #[test]
    fn order_is_stable_under_forced_concurrency() {
        std::env::set_var(THREADS_ENV, "4");
        let items: Vec<u64> = (0..64).collect();
        let out = map_indexed(items, |_, &v| v * v);
        std::env::remove_var(THREADS_ENV);
        assert_eq!(out, (0..64).map(|v| v * v).collect::<Vec<_>>());
    }

    #[test]
    fn worker_count_respects_job_count() {
        assert_eq!(worker_count(0), 1);
        assert_eq!(worker_count(1), 1);
        assert!(worker_count(1000) >= 1);
    }
}
