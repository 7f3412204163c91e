//! Deterministic data parallelism.
//!
//! Work is split into one contiguous index chunk per worker; each worker
//! produces an accumulator and the accumulators are merged in chunk order.
//! Because every accumulator is integer-valued (counts, histograms, argmax
//! with canonical tie-break), results are identical for any thread count.

/// Number of workers to use when the caller passes 0.
pub fn default_threads() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Splits `0..total` into at most `threads` contiguous chunks, maps each
/// chunk on its own thread, and folds the results in chunk order.
pub fn map_chunks<A, F, M>(total: u64, threads: usize, map: F, merge: M) -> Option<A>
where
    A: Send,
    F: Fn(std::ops::Range<u64>) -> A + Sync,
    M: FnMut(A, A) -> A,
{
    if total == 0 {
        return None;
    }
    let threads = if threads == 0 { default_threads() } else { threads };
    let threads = threads.min(total as usize).max(1);
    if threads == 1 {
        return Some(map(0..total));
    }
    let chunk = total.div_ceil(threads as u64);
    let ranges: Vec<std::ops::Range<u64>> = (0..threads as u64)
        .map(|i| (i * chunk)..((i + 1) * chunk).min(total))
        .filter(|r| !r.is_empty())
        .collect();
    let results: Vec<A> = std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| scope.spawn(|| map(r)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut it = results.into_iter();
    let first = it.next()?;
    Some(it.fold(first, merge))
}
