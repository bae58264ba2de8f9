//! Small shared helpers: thread-capped parallel map, smooth steps,
//! least-squares slope fitting.

/// Number of worker threads: CARLEMAN_LAB_THREADS caps the available
/// parallelism; defaults to the machine's.
pub fn thread_count() -> usize {
    let avail = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    match std::env::var("CARLEMAN_LAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        Some(cap) if cap >= 1 => avail.min(cap),
        _ => avail,
    }
}

/// Deterministic parallel map over a slice; output order matches input.
pub fn parallel_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let threads = thread_count().min(items.len().max(1));
    if threads <= 1 || items.len() < 64 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let mut out: Vec<Option<U>> = Vec::with_capacity(items.len());
    out.resize_with(items.len(), || None);
    std::thread::scope(|scope| {
        let f = &f;
        for (input, output) in items.chunks(chunk).zip(out.chunks_mut(chunk)) {
            scope.spawn(move || {
                for (i, item) in input.iter().enumerate() {
                    output[i] = Some(f(item));
                }
            });
        }
    });
    out.into_iter().map(|v| v.expect("chunk filled")).collect()
}

/// The canonical C-infinity step: 0 for s <= 0, 1 for s >= 1, glued by
/// e^{-1/s} / (e^{-1/s} + e^{-1/(1-s)}) in between. Monotone, all
/// derivatives vanish at the plateau edges.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / s).exp();
        let b = (-1.0 / (1.0 - s)).exp();
        a / (a + b)
    }
}

/// C-infinity bump on (-1, 1): e^{1 - 1/(1 - s^2)} inside, 0 outside.
pub fn smooth_bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Least-squares slope of y against x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}
