//! Data-parallel helpers with a fixed reduction order.
//!
//! Work is split into chunks whose boundaries depend only on the problem size.
//! Per-chunk partial results are combined sequentially in chunk order, so
//! results are bit-identical for any worker count and with or without the
//! `parallel` feature.

use std::ops::Range;
use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Environment variable fixing the worker count.
pub const WORKERS_ENV: &str = "TRIJUNCTION_WORKERS";

/// Execution mode of the chunked kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

pub fn set_mode(mode: Mode) {
    FORCE_SEQUENTIAL.store(mode == Mode::Sequential, Ordering::SeqCst);
}

pub fn mode() -> Mode {
    if cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed) {
        Mode::Parallel
    } else {
        Mode::Sequential
    }
}

/// Configures the global pool from `TRIJUNCTION_WORKERS` if set. Returns the
/// worker count in effect.
pub fn init_from_env() -> usize {
    let requested = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    init_workers(requested)
}

#[cfg(feature = "parallel")]
pub fn init_workers(n: Option<usize>) -> usize {
    if let Some(n) = n {
        // Fails only if the global pool already exists, which is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    rayon::current_num_threads()
}

#[cfg(not(feature = "parallel"))]
pub fn init_workers(_n: Option<usize>) -> usize {
    1
}

fn chunk_ranges(n: usize, chunk: usize) -> impl Iterator<Item = Range<usize>> + Clone {
    let chunk = chunk.max(1);
    (0..n.div_ceil(chunk)).map(move |c| c * chunk..((c + 1) * chunk).min(n))
}

/// Maps every chunk of `0..n` and returns the results in chunk order.
pub fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let ranges: Vec<Range<usize>> = chunk_ranges(n, chunk).collect();
    #[cfg(feature = "parallel")]
    if mode() == Mode::Parallel {
        use rayon::prelude::*;
        return ranges.into_par_iter().map(f).collect();
    }
    ranges.into_iter().map(f).collect()
}

/// Sum of `f` over chunks of `0..n`, combined in chunk order.
pub fn sum_chunks<F>(n: usize, chunk: usize, f: F) -> f64
where
    F: Fn(Range<usize>) -> f64 + Sync + Send,
{
    map_chunks(n, chunk, f).into_iter().sum()
}

/// Calls `f(start, slice)` on consecutive mutable chunks of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    if mode() == Mode::Parallel {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(c, s)| f(c * chunk, s));
        return;
    }
    for (c, s) in data.chunks_mut(chunk).enumerate() {
        f(c * chunk, s);
    }
}

/// Chunk length used by the vector kernels.
pub const VEC_CHUNK: usize = 1 << 14;

/// Dot product with a fixed reduction tree.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_chunks(a.len(), VEC_CHUNK, |r| {
        let (a, b) = (&a[r.clone()], &b[r]);
        let mut acc = [0.0; 4];
        let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
        let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
        for (x, y) in ca.zip(cb) {
            for l in 0..4 {
                acc[l] += x[l] * y[l];
            }
        }
        (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
    })
}

/// `y += s * x`.
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for_each_chunk_mut(y, VEC_CHUNK, |start, ys| {
        for (k, v) in ys.iter_mut().enumerate() {
            *v += s * x[start + k];
        }
    });
}

/// `x *= s`.
pub fn scale(s: f64, x: &mut [f64]) {
    for_each_chunk_mut(x, VEC_CHUNK, |_, xs| xs.iter_mut().for_each(|v| *v *= s));
}

/// Largest absolute entry.
pub fn max_abs(a: &[f64]) -> f64 {
    map_chunks(a.len(), VEC_CHUNK, |r| {
        a[r].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    })
    .into_iter()
    .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_sequential_order() {
        let v: Vec<f64> = (0..100_003).map(|i| ((i as f64) * 0.37).sin()).collect();
        let s = sum_chunks(v.len(), 1000, |r| v[r].iter().sum());
        let mut expect = 0.0;
        for c in v.chunks(1000) {
            expect += c.iter().sum::<f64>();
        }
        assert_eq!(s.to_bits(), expect.to_bits());
    }

    #[test]
    fn modes_agree_bitwise() {
        let a: Vec<f64> = (0..50_000).map(|i| (i as f64).sqrt()).collect();
        let b: Vec<f64> = (0..50_000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        set_mode(Mode::Sequential);
        let s1 = dot(&a, &b);
        set_mode(Mode::Parallel);
        let s2 = dot(&a, &b);
        assert_eq!(s1.to_bits(), s2.to_bits());
    }

    #[test]
    fn axpy_and_scale() {
        let x = vec![1.0; 40_000];
        let mut y = vec![2.0; 40_000];
        axpy(3.0, &x, &mut y);
        scale(0.5, &mut y);
        assert!(y.iter().all(|&v| v == 2.5));
        assert_eq!(max_abs(&[-3.0, 2.0]), 3.0);
    }
}
