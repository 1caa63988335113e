//! The initial scale: cubes whose potential stays `γ` away from `E` are NS
//! once the coupling is large.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{params_hash, run_samples, McOptions};
use crate::error::{Error, Result};
use crate::geometry::Cube;
use crate::model::{assemble, sample_potential, HamiltonianMatrix, ModelParams, PotentialField};
use crate::schedule::Schedule;
use crate::spectral::{eigenpairs, singular_at, NsThresholds, OffsetTable};

/// `γ = ¼ n^{-1/ρ} 3^{-(2n+1)d/ρ} κ^{1/ρ} L0^{-(2p + (2n+1)d)/ρ}`.
pub fn gamma_initial(n: usize, d: usize, rho: f64, kappa: f64, p: f64, l0: f64) -> f64 {
    let width = ((2 * n + 1) * d) as f64;
    0.25 * (n as f64).powf(-1.0 / rho)
        * 3f64.powf(-width / rho)
        * kappa.powf(1.0 / rho)
        * l0.powf(-(2.0 * p + width) / rho)
}

/// `(C, g*)` with `C = ||T + U||_{s0} √C0` measured on the cube and
/// `g* = 2C / γ`.
///
/// With `D = V - E` diagonal and `min |D| > γ`, `||D^{-1}||_{s0} <= √C0 / γ`,
/// so `|g| >= g*` gives `||g^{-1}(T + U)||_{s0} ||D^{-1}||_{s0} <= 1/2`.
pub fn g_star(cube: &Cube, params: &ModelParams, schedule: &Schedule, gamma: f64, max_dim: usize) -> Result<(f64, f64)> {
    let th = NsThresholds::for_cube(schedule, cube.n(), cube.d(), cube.radius)?;
    let pot = PotentialField::constant(cube.projection_hull(), 0.0);
    let h = assemble(cube, params, &pot, max_dim)?;
    let table = OffsetTable::square(&h.sites);
    let c = table.norm(&h.kinetic_interaction(), th.s0, th.c0) * th.c0.sqrt();
    Ok((c, 2.0 * c / gamma))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoodVerdict {
    GoodNs,
    GoodSingular,
    NotGood,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodCubeCertificate {
    pub gamma: f64,
    pub g: f64,
    pub g_star: f64,
    pub measured_c: f64,
    pub c0: f64,
    pub energy: f64,
    pub samples: u64,
    pub good: u64,
    pub not_good: u64,
    /// Sample indices of good cubes that failed NS.
    pub violations: Vec<u64>,
    pub verdicts: Vec<GoodVerdict>,
    pub master_seed: u64,
    pub params_hash: String,
    pub truncated: bool,
}

impl GoodCubeCertificate {
    pub fn verified(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `min_x |V(x) - E|` over the cube, `V(x) = Σ_j V(x_j)`.
fn min_potential_gap(h: &HamiltonianMatrix, energy: f64) -> f64 {
    h.sites
        .iter()
        .map(|x| {
            let v: f64 = x.particles().map(|p| h.potential.get(p).expect("window covers cube")).sum();
            (v - energy).abs()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Draws `samples` potentials; for each `(E, γ)`-good cube verifies `(E, δ)`-NS.
///
/// Refuses to run when `|g| < g*`, where the implication is not claimed.
pub fn good_implies_ns_probe(
    cube: &Cube,
    params: &ModelParams,
    energy: f64,
    schedule: &Schedule,
    gamma: f64,
    samples: u64,
    opts: &McOptions,
) -> Result<GoodCubeCertificate> {
    params.validate()?;
    if !(gamma > 0.0) {
        return Err(Error::Precondition("gamma must be positive".into()));
    }
    let (c, gs) = g_star(cube, params, schedule, gamma, opts.max_dim)?;
    if params.g.abs() < gs * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!("|g| = {} below g* = {gs}", params.g.abs())));
    }
    let th = NsThresholds::for_cube(schedule, cube.n(), cube.d(), cube.radius)?;
    let window = cube.projection_hull();
    let sites = cube.sites(opts.max_dim)?;
    let table = OffsetTable::square(&sites);
    let (verdicts, truncated) = run_samples(samples, opts, |i| {
        let pot = sample_potential(&window, &params.disorder, i);
        let h = assemble(cube, params, &pot, opts.max_dim)?;
        if min_potential_gap(&h, energy) <= gamma {
            return Ok(GoodVerdict::NotGood);
        }
        let eig = eigenpairs(&h.matrix)?;
        Ok(if singular_at(&eig, &table, energy, &th, &opts.tol)? {
            GoodVerdict::GoodSingular
        } else {
            GoodVerdict::GoodNs
        })
    })?;
    let violations = verdicts
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == GoodVerdict::GoodSingular)
        .map(|(i, _)| i as u64)
        .collect();
    let not_good = verdicts.iter().filter(|v| **v == GoodVerdict::NotGood).count() as u64;
    Ok(GoodCubeCertificate {
        gamma,
        g: params.g,
        g_star: gs,
        measured_c: c,
        c0: th.c0,
        energy,
        samples: verdicts.len() as u64,
        good: verdicts.len() as u64 - not_good,
        not_good,
        violations,
        verdicts,
        master_seed: params.disorder.seed,
        params_hash: params_hash(&json!({
            "experiment": "good_ns", "cube": cube, "params": params, "energy": energy,
            "gamma": gamma, "schedule": schedule.hash(), "samples": samples,
        })),
        truncated,
    })
}
