//! Deterministic replica-level parallelism: results are keyed by index, so
//! the merged output is identical for any worker count.

/// Applies `f` to `0..count`, fanning out over at most `threads` workers.
/// `f` must derive all randomness from its index.
pub fn run_indexed<T, F>(count: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = threads.max(1).min(count.max(1));
    if threads == 1 {
        return (0..count).map(f).collect();
    }
    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(threads);
        for worker in 0..threads {
            let f = &f;
            handles.push(scope.spawn(move || {
                let mut local = Vec::new();
                let mut i = worker;
                while i < count {
                    local.push((i, f(i)));
                    i += threads;
                }
                local
            }));
        }
        for handle in handles {
            for (i, value) in handle.join().expect("worker panicked") {
                slots[i] = Some(value);
            }
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every index filled"))
        .collect()
}

/// Worker count: explicit flag, else the `HILBERT_RWM_THREADS` environment
/// variable, else one.
pub fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("HILBERT_RWM_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
    .max(1)
}
