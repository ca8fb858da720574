//! Small shared utilities: deterministic sampling, compensated summation,
//! and a bounded thread pool for embarrassingly parallel maps.

/// SplitMix64 generator. Used wherever the library or its verification
/// suite needs reproducible pseudo-random samples.
#[derive(Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Kahan compensated accumulator.
#[derive(Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Number of worker threads used by grid evaluation. Capped by the
/// `MADELUNG_THREADS` environment variable; results never depend on it.
pub fn thread_budget() -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(8);
    match std::env::var("MADELUNG_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => n.min(64),
            _ => available,
        },
        Err(_) => available,
    }
}

/// Evaluate `f(0..count)` across up to `thread_budget()` threads and return
/// the results in index order. Each index is computed exactly once, so the
/// output is identical to the sequential map regardless of thread count.
pub(crate) fn par_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = thread_budget().min(count.max(1));
    if threads <= 1 || count < 32 {
        return (0..count).map(f).collect();
    }
    let chunk = count.div_ceil(threads);
    let mut out: Vec<Option<T>> = Vec::with_capacity(count);
    out.resize_with(count, || None);
    let fref = &f;
    std::thread::scope(|scope| {
        let mut rest = out.as_mut_slice();
        let mut start = 0usize;
        while !rest.is_empty() {
            let take = chunk.min(rest.len());
            let (head, tail) = rest.split_at_mut(take);
            let base = start;
            scope.spawn(move || {
                for (i, slot) in head.iter_mut().enumerate() {
                    *slot = Some(fref(base + i));
                }
            });
            rest = tail;
            start += take;
        }
    });
    out.into_iter()
        .map(|x| x.expect("worker filled slot"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_is_deterministic() {
        let mut a = SplitMix64::new(7);
        let mut b = SplitMix64::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn kahan_beats_naive_on_small_terms() {
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..10_000_000 {
            k.add(1e-16);
        }
        let expected = 1.0 + 1e-9;
        assert!((k.value() - expected).abs() < 1e-14);
    }

    #[test]
    fn par_map_matches_sequential() {
        let seq: Vec<u64> = (0..1000)
            .map(|i| (i as u64).wrapping_mul(2654435761))
            .collect();
        let par = par_map(1000, |i| (i as u64).wrapping_mul(2654435761));
        assert_eq!(seq, par);
    }
}
