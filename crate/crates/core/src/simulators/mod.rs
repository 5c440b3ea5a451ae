//! Monte Carlo for continuous-time examples, in floating point.
//!
//! Paths are simulated in fixed-size chunks. Chunk `i` draws from a ChaCha
//! stream keyed by `(seed, i)` and chunk results are merged in index order,
//! so a report depends only on the seed and the sample count, not on the
//! number of worker threads.

mod brownian;
mod cox;
mod cpp;
mod levy;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use brownian::{simulate_brownian_last_zero, BrownianParams};
pub use cox::{cox_twin, simulate_cox_accessible, CoxScenario};
pub use cpp::{simulate_cpp_last_passage, CppParams, JumpLaw};
pub use levy::{simulate_levy_supremum, LevyParams};

/// Paths per chunk.
pub const CHUNK: u64 = 2048;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub time: f64,
    /// Cell or series label when a curve has several points per time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub estimate: f64,
    pub se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Curve {
    pub name: String,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    /// Largest `|estimate - benchmark| / se` over points with a benchmark.
    /// A zero standard error counts as infinite unless the difference is
    /// below `1e-12`.
    pub fn max_z_score(&self) -> f64 {
        self.points
            .iter()
            .filter_map(|p| p.benchmark.map(|b| z_score(p.estimate, b, p.se)))
            .fold(0.0, f64::max)
    }
}

fn z_score(estimate: f64, target: f64, se: Option<f64>) -> f64 {
    let d = (estimate - target).abs();
    match se {
        _ if d < 1e-12 => 0.0,
        Some(s) if s > 0.0 => d / s,
        _ => f64::INFINITY,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub estimator: String,
    pub estimate: f64,
    /// Sample standard deviation over `√n`; absent when `n < 2`.
    pub se: Option<f64>,
    pub n: u64,
    pub seed: u64,
    pub curves: Vec<Curve>,
    pub diagnostics: BTreeMap<String, serde_json::Value>,
}

impl SimReport {
    /// `|estimate - target|` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        z_score(self.estimate, target, self.se)
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        self.z_score(target) <= k
    }

    /// CSV lines `curve,time,label,estimate,se,benchmark`.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("curve,time,label,estimate,se,benchmark\n");
        let opt = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
        for c in &self.curves {
            for p in &c.points {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    c.name,
                    p.time,
                    p.label.as_deref().unwrap_or(""),
                    p.estimate,
                    opt(p.se),
                    opt(p.benchmark)
                ));
            }
        }
        out
    }
}

/// Running sums for a sample mean.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sumsq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    pub fn flag(&mut self, hit: bool) {
        self.push(if hit { 1.0 } else { 0.0 });
    }

    pub fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sumsq += o.sumsq;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }

    pub fn se(&self) -> Option<f64> {
        if self.n < 2 {
            return None;
        }
        let n = self.n as f64;
        let var = ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        Some((var / n).sqrt())
    }

    pub fn point(&self, time: f64, label: Option<String>, benchmark: Option<f64>) -> CurvePoint {
        CurvePoint {
            time,
            label,
            estimate: self.mean(),
            se: self.se(),
            benchmark,
        }
    }
}

pub(crate) fn merge_all(parts: &mut [Moments], other: &[Moments]) {
    for (a, b) in parts.iter_mut().zip(other) {
        a.merge(b);
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs `f(rng, paths)` on every chunk and returns the results in chunk order.
pub(crate) fn run_chunks<A, F>(n: u64, seed: u64, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> A + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let job = |i: u64| {
        let paths = CHUNK.min(n - i * CHUNK);
        f(&mut chunk_rng(seed, i), paths)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(job).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..chunks).map(job).collect()
    }
}

/// Caps the global worker pool. Only the first call has an effect.
pub fn configure_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_textbook_formulas() {
        let mut m = Moments::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x);
        }
        assert_eq!(m.mean(), 2.5);
        let se = m.se().unwrap();
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
        let mut one = Moments::default();
        one.push(1.0);
        assert!(one.se().is_none());
    }

    #[test]
    fn chunks_are_independent_of_scheduling() {
        let a = run_chunks(5000, 3, |rng, k| {
            use rand::Rng;
            (0..k).map(|_| rng.random::<u32>() as u64).sum::<u64>()
        });
        let b = run_chunks(5000, 3, |rng, k| {
            use rand::Rng;
            (0..k).map(|_| rng.random::<u32>() as u64).sum::<u64>()
        });
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }
}
