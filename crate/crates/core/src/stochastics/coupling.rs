//! Empirical check of the coupling step: sparse singular sub-cubes plus a
//! non-resonant big cube should give a non-singular big cube.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{params_hash, run_samples, McOptions};
use crate::error::{Error, Result};
use crate::geometry::{cluster_singular_centers, ClusterDecomposition, Cube, LatticePoint};
use crate::model::{assemble, sample_potential, ModelParams, PotentialField};
use crate::schedule::{validate, Schedule};
use crate::spectral::{eigenpairs, singular_at, NsThresholds, OffsetTable, SpectrumReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingOutcome {
    /// Hypotheses hold and the big cube is NS.
    Holds,
    /// Hypotheses hold but the big cube is singular.
    Fails,
    /// Big cube resonant at `E`.
    Resonant,
    /// Cluster or good-set hypotheses fail.
    BadGeometry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSample {
    pub index: u64,
    pub singular_centers: usize,
    pub clusters: usize,
    pub outcome: CouplingOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub l: i64,
    pub big_l: i64,
    pub cover_radius: i64,
    pub energy: f64,
    pub samples: u64,
    pub hypotheses_held: u64,
    pub implication_held: u64,
    /// `implication_held / hypotheses_held`, `None` when no sample qualifies.
    pub implication_rate: Option<f64>,
    pub per_sample: Vec<CouplingSample>,
    pub master_seed: u64,
    pub params_hash: String,
    pub truncated: bool,
}

/// `dist(v, Λ_L(u) \ Λ_l(w))` in the max-norm, for `Λ_l(w) ⊂ Λ_L(u)` containing `v`.
fn interior_margin(v: &LatticePoint, small: &Cube, big: &Cube) -> i64 {
    let mut best = i64::MAX;
    for (k, &x) in v.coords().iter().enumerate() {
        let (w, u) = (small.center.coords()[k], big.center.coords()[k]);
        if w + small.radius < u + big.radius {
            best = best.min(w + small.radius + 1 - x);
        }
        if w - small.radius > u - big.radius {
            best = best.min(x - (w - small.radius - 1));
        }
    }
    best
}

/// The coupling probe at big scale `L = l^4` around `center`.
///
/// Per sample: classify every `l`-sub-cube inside `Λ_L` at `E`, cluster the
/// singular centers (covering radius `cover_radius`), and check that every
/// site outside the clusters lies `l/2`-deep in some NS sub-cube. When all
/// hypotheses hold and `Λ_L` is `E`-NR, record whether `Λ_L` is NS.
#[allow(clippy::too_many_arguments)]
pub fn coupling_probe(
    l: i64,
    center: &LatticePoint,
    params: &ModelParams,
    schedule: &Schedule,
    energy: f64,
    cover_radius: Option<i64>,
    samples: u64,
    opts: &McOptions,
) -> Result<CouplingReport> {
    params.validate()?;
    let n = center.n();
    let coupling_violations: Vec<String> = validate(schedule, None)
        .into_iter()
        .filter(|c| c.id.starts_with("coupling") || c.id.starts_with("s0"))
        .map(|c| c.label())
        .collect();
    if !coupling_violations.is_empty() {
        return Err(Error::InvalidSchedule(coupling_violations));
    }
    let big_l = l.checked_pow(4).ok_or(Error::BudgetExceeded { dim: u128::MAX, max: opts.max_dim })?;
    let big = Cube::new(center.clone(), big_l);
    if big.site_count() > opts.max_dim as u128 {
        return Err(Error::BudgetExceeded { dim: big.site_count(), max: opts.max_dim });
    }
    let cover = cover_radius.unwrap_or((l + 1) / 2);
    // Fail early on the cluster scale guard.
    cluster_singular_centers(&[], l, cover)?;

    let big_sites = big.sites(opts.max_dim)?;
    let sub_centers: Vec<LatticePoint> = Cube::new(center.clone(), big_l - l).sites(opts.max_dim)?;
    let th_small = NsThresholds::for_cube(schedule, n, center.d(), l)?;
    let th_big = NsThresholds::for_cube(schedule, n, center.d(), big_l)?;
    let small_table = OffsetTable::square(&Cube::new(center.clone(), l).sites(opts.max_dim)?);
    let big_table = OffsetTable::square(&big_sites);
    let window = big.projection_hull();

    let (per_sample, truncated) = run_samples(samples, opts, |i| {
        let pot = sample_potential(&window, &params.disorder, i);
        let classify_small = |k: &LatticePoint, pot: &PotentialField| -> Result<bool> {
            let h = assemble(&Cube::new(k.clone(), l), params, pot, opts.max_dim)?;
            singular_at(&eigenpairs(&h.matrix)?, &small_table, energy, &th_small, &opts.tol)
        };
        let mut singular = Vec::new();
        let mut ns_cubes = Vec::new();
        for k in &sub_centers {
            if classify_small(k, &pot)? {
                singular.push(k.clone());
            } else {
                ns_cubes.push(Cube::new(k.clone(), l));
            }
        }
        let dec = cluster_singular_centers(&singular, l, cover)?;
        let sample = |outcome| CouplingSample { index: i, singular_centers: singular.len(), clusters: dec.len(), outcome };
        if !geometry_holds(&dec, &big_sites, &ns_cubes, &big, l) {
            return Ok(sample(CouplingOutcome::BadGeometry));
        }
        let eig: SpectrumReport = eigenpairs(&assemble(&big, params, &pot, opts.max_dim)?.matrix)?;
        if eig.distance_to(energy).ln() < -schedule.beta * th_big.ln_l {
            return Ok(sample(CouplingOutcome::Resonant));
        }
        Ok(sample(if singular_at(&eig, &big_table, energy, &th_big, &opts.tol)? {
            CouplingOutcome::Fails
        } else {
            CouplingOutcome::Holds
        }))
    })?;
    let held = per_sample
        .iter()
        .filter(|s| matches!(s.outcome, CouplingOutcome::Holds | CouplingOutcome::Fails))
        .count() as u64;
    let ok = per_sample.iter().filter(|s| s.outcome == CouplingOutcome::Holds).count() as u64;
    Ok(CouplingReport {
        l,
        big_l,
        cover_radius: cover,
        energy,
        samples: per_sample.len() as u64,
        hypotheses_held: held,
        implication_held: ok,
        implication_rate: (held > 0).then(|| ok as f64 / held as f64),
        per_sample,
        master_seed: params.disorder.seed,
        params_hash: params_hash(&json!({
            "experiment": "coupling", "l": l, "center": center, "params": params,
            "schedule": schedule.hash(), "energy": energy, "cover": cover, "samples": samples,
        })),
        truncated,
    })
}

/// Cluster bounds, and every good site `l/2`-deep inside some NS sub-cube.
fn geometry_holds(dec: &ClusterDecomposition, big_sites: &[LatticePoint], ns_cubes: &[Cube], big: &Cube, l: i64) -> bool {
    if !dec.satisfies_bounds() {
        return false;
    }
    big_sites.iter().filter(|v| dec.is_good(v)).all(|v| {
        ns_cubes
            .iter()
            .any(|c| c.contains(v) && 2 * interior_margin(v, c, big) >= l)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiagonalHopping, DisorderSpec};
    use crate::schedule::{Level, ToySpec};

    fn params() -> ModelParams {
        ModelParams {
            n: 1,
            d: 1,
            g: 1e4,
            r: 22.0,
            r0: 1,
            u_amp: 0.0,
            m1: 0.0,
            disorder: DisorderSpec::uniform(1.0, 4),
            diagonal: DiagonalHopping::Unit,
        }
    }

    fn toy(r: f64) -> Schedule {
        Schedule::toy(ToySpec {
            d: 1,
            rho: 1.0,
            p0: 1.0,
            beta: 1.0,
            levels: vec![Level { n: 1, p: 1.0, s0: 0.6, tau: 8.5, r }],
            l0: 2,
            k_max: 1,
            m: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn margin_geometry() {
        let big = Cube::new(LatticePoint::line(&[0]), 16);
        let small = Cube::new(LatticePoint::line(&[14]), 2);
        assert_eq!(interior_margin(&LatticePoint::line(&[16]), &small, &big), 5);
        assert_eq!(interior_margin(&LatticePoint::line(&[14]), &small, &big), 3);
    }

    #[test]
    fn probe_runs_at_l_two() {
        let rep = coupling_probe(2, &LatticePoint::line(&[0]), &params(), &toy(20.0), 0.0, None, 20, &McOptions::default()).unwrap();
        assert_eq!(rep.big_l, 16);
        assert_eq!(rep.samples, 20);
        assert!(rep.per_sample.iter().any(|s| s.singular_centers == 0 && s.outcome != CouplingOutcome::BadGeometry));
    }

    #[test]
    fn coupling_violation_refused() {
        let err = coupling_probe(2, &LatticePoint::line(&[0]), &params(), &toy(9.0), 0.0, None, 5, &McOptions::default());
        assert!(matches!(err, Err(Error::InvalidSchedule(v)) if v.iter().any(|s| s.starts_with("coupling"))));
    }

    #[test]
    fn budget_guard() {
        let opts = McOptions { max_dim: 1000, ..Default::default() };
        let p = ModelParams { n: 3, r: 40.0, ..params() };
        let err = coupling_probe(4, &LatticePoint::line(&[0, 0, 0]), &p, &toy(20.0), 0.0, None, 1, &opts);
        assert!(matches!(err, Err(Error::BudgetExceeded { .. })));
    }
}
