//! Deterministic parallel Monte Carlo.
//!
//! Samples are processed in fixed-size batches. Batch `k` draws from the
//! ChaCha8 stream `k` of the run seed, so the sample sequence depends only on
//! `(seed, samples)`. Batch statistics are merged with a pairwise tree in
//! batch order, which makes every estimate bit-identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Complex, Real};

/// Samples per batch (and per RNG stream).
pub const BATCH_SIZE: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    /// Worker threads; `0` uses the global rayon pool. Never changes results.
    pub workers: usize,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        McConfig {
            samples,
            seed,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn batches(&self) -> u64 {
        self.samples.div_ceil(BATCH_SIZE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate<T: Real> {
    pub mean: Complex<T>,
    pub stderr: T,
    pub samples: u64,
    pub seed: u64,
}

impl<T: Real> McEstimate<T> {
    /// `|mean − target| / stderr`, or 0/∞ when the error is exactly zero.
    pub fn z_score(&self, target: Complex<T>) -> f64 {
        let d = crate::scalar::to_f64(crate::scalar::cabs(self.mean - target));
        let se = crate::scalar::to_f64(self.stderr);
        if d == 0.0 {
            0.0
        } else if se == 0.0 {
            f64::INFINITY
        } else {
            d / se
        }
    }

    pub fn within(&self, target: Complex<T>, sigmas: f64) -> bool {
        self.z_score(target) <= sigmas
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "mean": crate::scalar::pair(self.mean),
            "stderr": crate::scalar::to_f64(self.stderr),
            "samples": self.samples,
            "seed": self.seed,
        })
    }
}

/// Running mean and `Σ|x − mean|²` of a complex stream (Welford / Chan).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean_re: f64,
    pub mean_im: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, re: f64, im: f64) {
        self.n += 1;
        let k = self.n as f64;
        let dre = re - self.mean_re;
        let dim = im - self.mean_im;
        self.mean_re += dre / k;
        self.mean_im += dim / k;
        self.m2 += dre * (re - self.mean_re) + dim * (im - self.mean_im);
    }

    pub fn merge(a: &Moments, b: &Moments) -> Moments {
        if a.n == 0 {
            return *b;
        }
        if b.n == 0 {
            return *a;
        }
        let n = a.n + b.n;
        let (na, nb, nf) = (a.n as f64, b.n as f64, n as f64);
        let dre = b.mean_re - a.mean_re;
        let dim = b.mean_im - a.mean_im;
        Moments {
            n,
            mean_re: a.mean_re + dre * nb / nf,
            mean_im: a.mean_im + dim * nb / nf,
            m2: a.m2 + b.m2 + (dre * dre + dim * dim) * na * nb / nf,
        }
    }

    fn estimate<T: Real>(&self, seed: u64) -> McEstimate<T> {
        let n = self.n as f64;
        let var = if self.n > 1 { self.m2.max(0.0) / (n - 1.0) } else { 0.0 };
        McEstimate {
            mean: Complex::new(lit(self.mean_re), lit(self.mean_im)),
            stderr: lit((var / n).sqrt()),
            samples: self.n,
            seed,
        }
    }
}

/// Merges in a fixed binary tree over the slice order.
fn tree_merge(parts: &[Vec<Moments>]) -> Vec<Moments> {
    match parts.len() {
        0 => Vec::new(),
        1 => parts[0].clone(),
        n => {
            let (l, r) = parts.split_at(n / 2);
            let (a, b) = (tree_merge(l), tree_merge(r));
            a.iter().zip(&b).map(|(x, y)| Moments::merge(x, y)).collect()
        }
    }
}

/// RNG for batch `batch` of a run.
pub fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

pub(crate) fn with_workers<R: Send>(workers: usize, job: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Sampling(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

/// Runs `k` complex observables over `cfg.samples` samples.
///
/// `make_state` builds per-batch scratch state; `sample` fills `out` (length
/// `k`) for sample index `i` drawing from `rng`.
pub fn estimate_many<T, S, M, F>(cfg: &McConfig, k: usize, make_state: M, sample: F) -> Result<Vec<McEstimate<T>>>
where
    T: Real,
    S: Send,
    M: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &mut ChaCha8Rng, u64, &mut [Complex<T>]) -> Result<()> + Sync + Send,
{
    if cfg.samples == 0 {
        return Err(Error::Sampling("sample count must be positive".into()));
    }
    let batches = cfg.batches();
    let run = || {
        (0..batches)
            .into_par_iter()
            .map(|bi| {
                let mut rng = batch_rng(cfg.seed, bi);
                let mut state = make_state();
                let mut out = vec![crate::scalar::czero::<T>(); k];
                let mut acc = vec![Moments::default(); k];
                let start = bi * BATCH_SIZE;
                let end = (start + BATCH_SIZE).min(cfg.samples);
                for i in start..end {
                    sample(&mut state, &mut rng, i, &mut out)?;
                    for (m, z) in acc.iter_mut().zip(&out) {
                        if !crate::scalar::is_finite_c(*z) {
                            return Err(Error::Sampling(format!(
                                "non-finite integrand value {z} at sample {i}"
                            )));
                        }
                        m.push(crate::scalar::to_f64(z.re), crate::scalar::to_f64(z.im));
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()
    };
    let parts = with_workers(cfg.workers, run)??;
    Ok(tree_merge(&parts)
        .iter()
        .map(|m| m.estimate(cfg.seed))
        .collect())
}
