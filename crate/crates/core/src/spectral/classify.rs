//! Resonance and non-singularity verdicts for a single cube at a single energy.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::sobolev::{default_c0, NormProfile, OffsetTable};
use super::{eigenpairs, green_from_spectrum, SpectralTolerances, SpectrumReport};
use crate::error::{Error, Result};
use crate::geometry::{Cube, LatticePoint};
use crate::model::HamiltonianMatrix;
use crate::schedule::Schedule;

/// Number of points in the diagnostic `s`-grid (endpoints included).
const GRID_POINTS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeClassification {
    pub cube: Cube,
    pub energy: f64,
    pub dist_to_spectrum: f64,
    /// `dist(E, σ) < L^{-β}`.
    pub resonant: bool,
    /// `||G||_s > L^{τ + δ s}` at `s0` or at `r_n`.
    pub singular: bool,
    pub norm_profile: NormProfile,
    /// `(τ + δ s) ln L` per grid point.
    pub log_thresholds: Vec<f64>,
    /// Per-grid-point NS verdict (diagnostic).
    pub grid_ns: Vec<bool>,
    pub c0: f64,
    pub schedule_hash: String,
}

impl CubeClassification {
    pub fn non_singular(&self) -> bool {
        !self.singular
    }

    /// Endpoint NS implies NS on the whole grid.
    pub fn endpoint_consistent(&self) -> bool {
        self.singular || self.grid_ns.iter().all(|&b| b)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("classification serializes")
    }
}

/// Classifies `(Λ, E)` after a fresh eigensolve of `H_Λ`.
pub fn classify(h: &HamiltonianMatrix, energy: f64, schedule: &Schedule, tol: &SpectralTolerances) -> Result<CubeClassification> {
    let spectrum = eigenpairs(&h.matrix)?;
    let table = OffsetTable::square(&h.sites);
    let n = h.cube.n();
    let s0 = schedule.level(n).ok_or_else(|| missing_level(n))?.s0;
    let c0 = default_c0(s0, (n * h.cube.d()) as u32);
    classify_with_spectrum(&h.cube, &spectrum, &table, energy, schedule, c0, tol)
}

fn missing_level(n: usize) -> Error {
    Error::Precondition(format!("schedule has no level for n = {n}"))
}

/// Classification from an existing eigendecomposition and offset table.
///
/// Resonance is decided by `dist(E, σ) < L^{-β}`. The NS test runs at `s0` and
/// `r_n` only; since `ln ||G||_s` is convex in `s` and the threshold
/// `(τ + δ s) ln L` is affine, passing at both ends means passing on
/// `[s0, r_n]`. Energies within `singular_tol` of the spectrum count as
/// resonant and singular.
pub fn classify_with_spectrum(
    cube: &Cube,
    spectrum: &SpectrumReport,
    table: &OffsetTable,
    energy: f64,
    schedule: &Schedule,
    c0: f64,
    tol: &SpectralTolerances,
) -> Result<CubeClassification> {
    let n = cube.n();
    let level = schedule.level(n).ok_or_else(|| missing_level(n))?;
    let ln_l = (cube.radius.max(1) as f64).ln();
    let dist = spectrum.distance_to(energy);
    let resonant = dist == 0.0 || dist.ln() < -schedule.beta * ln_l;
    let (profile, singular_energy) = match green_from_spectrum(spectrum, energy, tol) {
        Ok(g) => (NormProfile::sample(table, &g, level.s0, level.r, GRID_POINTS, c0), false),
        Err(Error::SingularEnergy { .. }) => (NormProfile::infinite(level.s0, level.r, GRID_POINTS, c0), true),
        Err(e) => return Err(e),
    };
    let log_thresholds: Vec<f64> = profile
        .s_values
        .iter()
        .map(|s| (level.tau + schedule.delta * s) * ln_l)
        .collect();
    let grid_ns: Vec<bool> = profile.log_norms.iter().zip(&log_thresholds).map(|(a, b)| a <= b).collect();
    let singular = singular_energy || !(grid_ns[0] && grid_ns[GRID_POINTS - 1]);
    Ok(CubeClassification {
        cube: cube.clone(),
        energy,
        dist_to_spectrum: dist,
        resonant: resonant || singular_energy,
        singular,
        norm_profile: profile,
        log_thresholds,
        grid_ns,
        c0,
        schedule_hash: schedule.hash(),
    })
}

/// Endpoint-only NS test: `true` iff `(Λ, E)` is singular at `s0` or `s_max`.
///
/// Cheaper than [`classify_with_spectrum`]; used inside Monte-Carlo loops.
pub fn singular_at(
    spectrum: &SpectrumReport,
    table: &OffsetTable,
    energy: f64,
    thresholds: &NsThresholds,
    tol: &SpectralTolerances,
) -> Result<bool> {
    let g = match green_from_spectrum(spectrum, energy, tol) {
        Ok(g) => g,
        Err(Error::SingularEnergy { .. }) => return Ok(true),
        Err(e) => return Err(e),
    };
    let sup = table.suprema(&g);
    Ok([thresholds.s0, thresholds.s_max].iter().any(|&s| {
        table.log_norm_from_suprema(&sup, s, thresholds.c0) > (thresholds.tau + thresholds.delta * s) * thresholds.ln_l
    }))
}

/// The numbers entering the NS inequality for one cube size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsThresholds {
    pub s0: f64,
    pub s_max: f64,
    pub tau: f64,
    pub delta: f64,
    pub ln_l: f64,
    pub c0: f64,
}

impl NsThresholds {
    /// Thresholds for an `n`-particle cube of radius `l` under `schedule`,
    /// with the default `C0`.
    pub fn for_cube(schedule: &Schedule, n: usize, d: usize, l: i64) -> Result<Self> {
        let level = schedule.level(n).ok_or_else(|| missing_level(n))?;
        Ok(NsThresholds {
            s0: level.s0,
            s_max: level.r,
            tau: level.tau,
            delta: schedule.delta,
            ln_l: (l.max(1) as f64).ln(),
            c0: default_c0(level.s0, (n * d) as u32),
        })
    }

    /// Distance to the spectrum beyond which NS is guaranteed: every entry
    /// of `G` is at most `1/dist`, so `||G||_s <= K_s / dist`.
    pub fn safe_distance(&self, table: &OffsetTable) -> f64 {
        let ones = vec![1.0; table.offset_count()];
        [self.s0, self.s_max]
            .iter()
            .map(|&s| (table.log_norm_from_suprema(&ones, s, self.c0) - (self.tau + self.delta * s) * self.ln_l).exp())
            .fold(0.0, f64::max)
    }
}

/// Entrywise decay `|G(x', x'')| <= ||x' - x''||^{-(1 - ζ) r_n}` over all pairs
/// with `||x' - x''|| > L/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseDecay {
    pub pairs_checked: usize,
    pub violations: usize,
    /// `max ln(|G| / bound)`; negative when every pair passes.
    pub worst_log_ratio: f64,
}

impl PointwiseDecay {
    pub fn passes(&self) -> bool {
        self.violations == 0
    }
}

pub fn pointwise_decay_check(g: &DMatrix<f64>, sites: &[LatticePoint], l: i64, r_n: f64, zeta: f64) -> PointwiseDecay {
    let rate = (1.0 - zeta) * r_n;
    let mut out = PointwiseDecay { pairs_checked: 0, violations: 0, worst_log_ratio: f64::NEG_INFINITY };
    for (i, x) in sites.iter().enumerate() {
        for (j, y) in sites.iter().enumerate() {
            let k = x.dist(y);
            if 2 * k <= l {
                continue;
            }
            out.pairs_checked += 1;
            let ratio = g[(i, j)].abs().ln() + rate * (k as f64).ln();
            if ratio > 0.0 {
                out.violations += 1;
            }
            out.worst_log_ratio = out.worst_log_ratio.max(ratio);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble, DisorderSpec, ModelParams, PotentialField};
    use crate::schedule::{Level, Schedule, ToySpec};

    fn toy(beta: f64) -> Schedule {
        Schedule::toy(ToySpec {
            d: 1,
            rho: 1.0,
            p0: 1.0,
            beta,
            levels: vec![Level { n: 1, p: 1.0, s0: 0.6, tau: 3.0, r: 8.0 }],
            l0: 3,
            k_max: 0,
            m: 1.0,
        })
        .unwrap()
    }

    fn params() -> ModelParams {
        ModelParams {
            n: 1,
            d: 1,
            g: 1e3,
            r: 10.0,
            r0: 1,
            u_amp: 0.0,
            m1: 0.0,
            disorder: DisorderSpec::uniform(1.0, 0),
            diagonal: Default::default(),
        }
    }

    fn cube() -> Cube {
        Cube::new(LatticePoint::line(&[0]), 3)
    }

    #[test]
    fn far_energy_is_non_singular() {
        let window = crate::geometry::SiteBox::centered(&[0], 3);
        let pot = PotentialField::constant(window, 0.0);
        let h = assemble(&cube(), &params(), &pot, 1000).unwrap();
        let c = classify(&h, 10.0, &toy(1.0), &SpectralTolerances::default()).unwrap();
        assert!(!c.resonant);
        assert!(!c.singular);
        assert!(c.endpoint_consistent());
        // ||G||_{s0} ≈ √C0 / 10
        let expected = (c.c0.sqrt() / 10.0).ln();
        assert!((c.norm_profile.log_norms[0] - expected).abs() < 0.05);
    }

    #[test]
    fn eigenvalue_is_resonant_and_singular() {
        let window = crate::geometry::SiteBox::centered(&[0], 3);
        let pot = PotentialField::constant(window, 0.0);
        let h = assemble(&cube(), &params(), &pot, 1000).unwrap();
        let spec = eigenpairs(&h.matrix).unwrap();
        let c = classify(&h, spec.eigenvalues[2], &toy(1.0), &SpectralTolerances::default()).unwrap();
        assert!(c.resonant && c.singular);
    }

    #[test]
    fn huge_beta_never_resonant_off_spectrum() {
        let window = crate::geometry::SiteBox::centered(&[0], 3);
        let pot = PotentialField::constant(window, 0.0);
        let h = assemble(&cube(), &params(), &pot, 1000).unwrap();
        let c = classify(&h, 0.5, &toy(1e6), &SpectralTolerances::default()).unwrap();
        assert!(!c.resonant);
    }

    #[test]
    fn decay_check_on_diagonal() {
        let sites: Vec<LatticePoint> = (0..6).map(|x| LatticePoint::line(&[x])).collect();
        let g = DMatrix::identity(6, 6);
        let rep = pointwise_decay_check(&g, &sites, 4, 10.0, 0.95);
        assert!(rep.passes());
        assert_eq!(rep.pairs_checked, 2 * (3 + 2 + 1));
    }
}
