//! Simultaneous singularity of two separable cubes at a common energy.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::stollmann::joint_window;
use super::{params_hash, run_samples, EnsembleResult, McOptions};
use crate::error::{Error, Result};
use crate::geometry::{is_separable, Cube};
use crate::model::{assemble, sample_potential, ModelParams};
use crate::schedule::Schedule;
use crate::spectral::{eigenpairs, singular_at, NsThresholds, OffsetTable};

/// Discretization of the energy quantifier over `I`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrid {
    /// Grid step; default `max(L^{-β}, 1e-4)`.
    pub step: Option<f64>,
}

impl EnergyGrid {
    pub fn resolve(&self, schedule: &Schedule, l: i64) -> f64 {
        self.step
            .unwrap_or_else(|| (-(schedule.beta) * (l.max(1) as f64).ln()).exp().max(1e-4))
    }
}

/// Empirical `P{∃E: both cubes (E, δ)-S}` against `L0^{-2p}`.
///
/// `E` ranges over the grid on `I` together with every eigenvalue of the two
/// sampled operators. A cube can only be singular within
/// [`NsThresholds::safe_distance`] of its spectrum, so only grid points that
/// close to both spectra are examined.
pub fn mc_joint_singularity(
    a: &Cube,
    b: &Cube,
    params: &ModelParams,
    schedule: &Schedule,
    grid: &EnergyGrid,
    samples: u64,
    opts: &McOptions,
) -> Result<EnsembleResult> {
    params.validate()?;
    if !is_separable(a, b, params.r0) {
        return Err(Error::NotSeparable);
    }
    let n = a.n();
    let level = schedule
        .level(n)
        .ok_or_else(|| Error::Precondition(format!("schedule has no level for n = {n}")))?;
    let th = NsThresholds::for_cube(schedule, n, a.d(), a.radius)?;
    let step = grid.resolve(schedule, a.radius);
    let (lo, hi) = schedule.interval;
    let last = ((hi - lo) / step).floor() as i64;
    let table = OffsetTable::square(&a.sites(opts.max_dim)?);
    let reach = th.safe_distance(&table).max(opts.tol.singular_tol);
    let window = joint_window(a, b);

    let (events, truncated) = run_samples(samples, opts, |i| {
        let pot = sample_potential(&window, &params.disorder, i);
        let sa = eigenpairs(&assemble(a, params, &pot, opts.max_dim)?.matrix)?;
        let sb = eigenpairs(&assemble(b, params, &pot, opts.max_dim)?.matrix)?;
        let mut ks = BTreeSet::new();
        for lam in &sa.eigenvalues {
            let k_lo = (((lam - reach - lo) / step).ceil() as i64).max(0);
            let k_hi = (((lam + reach - lo) / step).floor() as i64).min(last);
            ks.extend(k_lo..=k_hi);
        }
        let mut candidates: Vec<f64> = ks.into_iter().map(|k| lo + k as f64 * step).collect();
        candidates.extend(sa.eigenvalues.iter().chain(&sb.eigenvalues));
        candidates.sort_by(f64::total_cmp);
        for e in candidates {
            if sa.distance_to(e) > reach || sb.distance_to(e) > reach {
                continue;
            }
            if singular_at(&sa, &table, e, &th, &opts.tol)? && singular_at(&sb, &table, e, &th, &opts.tol)? {
                return Ok(true);
            }
        }
        Ok(false)
    })?;
    let count = events.iter().filter(|&&e| e).count() as u64;
    let bound = (schedule.l0 as f64).powf(-2.0 * level.p);
    Ok(EnsembleResult::build(
        "joint_singularity",
        events.len() as u64,
        vec![step],
        vec![count],
        vec![bound],
        params.disorder.seed,
        params_hash(&json!({
            "experiment": "joint_singularity", "cubes": [a, b], "params": params,
            "schedule": schedule.hash(), "step": step, "samples": samples,
        })),
        truncated,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LatticePoint;
    use crate::model::{DiagonalHopping, DisorderSpec};
    use crate::schedule::{derive_schedule, Level, ScheduleInputs, ToySpec};
    use crate::stochastics::Verdict;

    fn params(g: f64) -> ModelParams {
        ModelParams {
            n: 1,
            d: 1,
            g,
            r: 30.0,
            r0: 1,
            u_amp: 0.0,
            m1: 0.0,
            disorder: DisorderSpec::uniform(1.0, 17),
            diagonal: DiagonalHopping::Unit,
        }
    }

    fn toy(tau: f64) -> Schedule {
        Schedule::toy(ToySpec {
            d: 1,
            rho: 1.0,
            p0: 1.0,
            beta: 1.0,
            levels: vec![Level { n: 1, p: 1.0, s0: 0.6, tau, r: 2.0 * tau + 3.4 }],
            l0: 3,
            k_max: 0,
            m: 1.0,
        })
        .unwrap()
    }

    fn pair() -> (Cube, Cube) {
        (Cube::new(LatticePoint::line(&[0]), 3), Cube::new(LatticePoint::line(&[40]), 3))
    }

    #[test]
    fn strong_disorder_rarely_singular() {
        let (a, b) = pair();
        let res = mc_joint_singularity(&a, &b, &params(1e6), &toy(12.0), &EnergyGrid::default(), 100, &McOptions::default()).unwrap();
        assert!(res.empirical_p[0] <= 0.05, "{res:?}");
    }

    #[test]
    fn tiny_tau_weak_disorder_is_exploratory() {
        let (a, b) = pair();
        let res = mc_joint_singularity(&a, &b, &params(1.0), &toy(0.05), &EnergyGrid::default(), 50, &McOptions::default()).unwrap();
        assert_eq!(res.samples, 50);
        assert!(res.empirical_p[0] > 0.5, "{res:?}");
    }

    #[test]
    fn strict_bound_is_unfalsifiable() {
        let s = derive_schedule(&ScheduleInputs { p0: 40.0, ..ScheduleInputs::strict(2, 1, 1.0) }).unwrap();
        assert!((s.l0 as f64).powf(-2.0 * s.level(2).unwrap().p) <= 3f64.powi(-80));
        let a = Cube::new(LatticePoint::line(&[0, 0]), 1);
        let b = Cube::new(LatticePoint::line(&[60, 60]), 1);
        let p = ModelParams { n: 2, u_amp: 0.5, m1: 1.0, r: 60000.0, ..params(1.0) };
        let res = mc_joint_singularity(&a, &b, &p, &s, &EnergyGrid { step: Some(0.01) }, 5, &McOptions::default()).unwrap();
        assert_eq!(res.verdicts, vec![Verdict::Unfalsifiable]);
    }

    #[test]
    fn non_separable_pair_rejected() {
        let a = Cube::new(LatticePoint::line(&[0]), 3);
        let b = Cube::new(LatticePoint::line(&[10]), 3);
        assert_eq!(
            mc_joint_singularity(&a, &b, &params(1.0), &toy(1.0), &EnergyGrid::default(), 5, &McOptions::default()),
            Err(Error::NotSeparable)
        );
    }
}
