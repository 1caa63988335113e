//! Seeded Monte-Carlo ensembles over the disorder.
//!
//! Sample `i` always draws its potential from ChaCha stream `i` of the master
//! seed, and per-sample results are merged in index order, so every ensemble is
//! reproducible bit for bit regardless of thread count.

mod coupling;
mod good;
mod joint;
mod stollmann;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::DEFAULT_MAX_DIM;
use crate::spectral::SpectralTolerances;

pub use coupling::{coupling_probe, CouplingOutcome, CouplingReport, CouplingSample};
pub use good::{g_star, gamma_initial, good_implies_ns_probe, GoodCubeCertificate, GoodVerdict};
pub use joint::{mc_joint_singularity, EnergyGrid};
pub use stollmann::{mc_single_volume_stollmann, mc_two_volume_stollmann, single_volume_bound, two_volume_bound};

/// One-sided 95% normal quantile.
pub const Z95: f64 = 1.645;

/// Bounds below this are reported but not tested.
pub const UNFALSIFIABLE_BELOW: f64 = 1e-30;

/// One-sided Wilson score upper bound for `count` successes in `samples` trials.
pub fn wilson_upper(count: u64, samples: u64, z: f64) -> f64 {
    if samples == 0 {
        return 1.0;
    }
    let n = samples as f64;
    let p = count as f64 / n;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre + spread) / (1.0 + z2 / n)).min(1.0)
}

/// Two-sided Wilson interval at normal quantile `z`.
pub fn wilson_interval(count: u64, samples: u64, z: f64) -> (f64, f64) {
    let n = samples as f64;
    let p = count as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - spread).max(0.0), (centre + spread).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Bound too small for any desk-scale sample to probe.
    Unfalsifiable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Unfalsifiable => "unfalsifiable",
        }
    }
}

/// Event frequencies per threshold with their theoretical bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub experiment: String,
    /// Completed samples.
    pub samples: u64,
    /// `ε` values, or grid steps for energy-quantified events.
    pub thresholds: Vec<f64>,
    pub event_counts: Vec<u64>,
    pub empirical_p: Vec<f64>,
    pub theory_bound: Vec<f64>,
    pub wilson_upper_95: Vec<f64>,
    pub verdicts: Vec<Verdict>,
    pub master_seed: u64,
    pub params_hash: String,
    pub truncated: bool,
}

impl EnsembleResult {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn build(
        experiment: &str,
        samples: u64,
        thresholds: Vec<f64>,
        event_counts: Vec<u64>,
        theory_bound: Vec<f64>,
        master_seed: u64,
        params_hash: String,
        truncated: bool,
    ) -> Self {
        let empirical_p: Vec<f64> = event_counts
            .iter()
            .map(|&c| if samples == 0 { 0.0 } else { c as f64 / samples as f64 })
            .collect();
        let wilson: Vec<f64> = event_counts.iter().map(|&c| wilson_upper(c, samples, Z95)).collect();
        let verdicts = event_counts
            .iter()
            .zip(&wilson)
            .zip(&theory_bound)
            .map(|((&c, &w), &b)| verdict(c, w, b))
            .collect();
        EnsembleResult {
            experiment: experiment.to_string(),
            samples,
            thresholds,
            event_counts,
            empirical_p,
            theory_bound,
            wilson_upper_95: wilson,
            verdicts,
            master_seed,
            params_hash,
            truncated,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| *v != Verdict::Fail)
    }

    /// Flat table `eps_or_E, count, empirical_p, wilson_upper, theory_bound, pass`.
    pub fn csv_rows(&self) -> Vec<[String; 6]> {
        (0..self.thresholds.len())
            .map(|k| {
                [
                    format!("{:e}", self.thresholds[k]),
                    self.event_counts[k].to_string(),
                    format!("{:e}", self.empirical_p[k]),
                    format!("{:e}", self.wilson_upper_95[k]),
                    format!("{:e}", self.theory_bound[k]),
                    self.verdicts[k].as_str().to_string(),
                ]
            })
            .collect()
    }
}

pub const CSV_HEADER: [&str; 6] = ["eps_or_E", "count", "empirical_p", "wilson_upper", "theory_bound", "pass"];

/// The Wilson upper bound must not exceed the theoretical bound. A zero
/// bound describes a null event and is tested exactly.
fn verdict(count: u64, wilson: f64, bound: f64) -> Verdict {
    if bound == 0.0 {
        return if count == 0 { Verdict::Pass } else { Verdict::Fail };
    }
    if bound < UNFALSIFIABLE_BELOW {
        return Verdict::Unfalsifiable;
    }
    if wilson <= bound {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Execution knobs shared by every ensemble.
#[derive(Clone, Debug)]
pub struct McOptions {
    pub max_dim: usize,
    /// Worker threads; `None` uses the global rayon pool.
    pub parallelism: Option<usize>,
    /// Set to stop scheduling new samples; finished ones are kept.
    pub cancel: Option<Arc<AtomicBool>>,
    pub tol: SpectralTolerances,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions { max_dim: DEFAULT_MAX_DIM, parallelism: None, cancel: None, tol: SpectralTolerances::default() }
    }
}

impl McOptions {
    fn cancelled(&self) -> bool {
        self.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed))
    }
}

/// Runs `task(i)` for `i in 0..samples` in parallel; returns the results of
/// the completed prefix in index order and whether the run was cut short.
pub(crate) fn run_samples<T, F>(samples: u64, opts: &McOptions, task: F) -> Result<(Vec<T>, bool)>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let body = || -> Vec<Option<Result<T>>> {
        (0..samples)
            .into_par_iter()
            .map(|i| if opts.cancelled() { None } else { Some(task(i)) })
            .collect()
    };
    let raw = match opts.parallelism {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .expect("thread pool")
            .install(body),
        None => body(),
    };
    let mut out = Vec::with_capacity(raw.len());
    let mut truncated = false;
    for item in raw {
        match item {
            Some(r) => out.push(r?),
            None => {
                truncated = true;
                break;
            }
        }
    }
    Ok((out, truncated))
}

/// Hash of the JSON description of an experiment.
pub(crate) fn params_hash(value: &serde_json::Value) -> String {
    crate::schedule::content_hash(value.to_string().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_frequency() {
        for (c, n) in [(0u64, 100u64), (5, 100), (50, 100), (100, 100), (3, 10_000)] {
            let u = wilson_upper(c, n, Z95);
            assert!(u >= c as f64 / n as f64);
            let (lo, hi) = wilson_interval(c, n, 1.96);
            assert!(lo <= c as f64 / n as f64 && c as f64 / n as f64 <= hi + 1e-15);
        }
        // closed form at zero successes: z^2 / (n + z^2)
        let n = 10_000.0;
        assert!((wilson_upper(0, 10_000, Z95) - Z95 * Z95 / (n + Z95 * Z95)).abs() < 1e-15);
    }

    #[test]
    fn verdict_rules() {
        assert_eq!(verdict(0, 0.01, 0.0), Verdict::Pass);
        assert_eq!(verdict(1, 0.01, 0.0), Verdict::Fail);
        assert_eq!(verdict(0, 0.01, 1e-40), Verdict::Unfalsifiable);
        assert_eq!(verdict(3, 0.01, 0.02), Verdict::Pass);
        assert_eq!(verdict(3, 0.03, 0.02), Verdict::Fail);
    }

    #[test]
    fn merge_is_ordered_and_cancellable() {
        let opts = McOptions { parallelism: Some(4), ..Default::default() };
        let (v, t) = run_samples(100, &opts, |i| Ok(i * i)).unwrap();
        assert!(!t);
        assert_eq!(v, (0..100u64).map(|i| i * i).collect::<Vec<_>>());
        let flag = Arc::new(AtomicBool::new(true));
        let opts = McOptions { cancel: Some(flag), ..Default::default() };
        let (v, t) = run_samples(10, &opts, Ok).unwrap();
        assert!(t && v.is_empty());
    }
}
