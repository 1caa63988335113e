//! Eigenvalue concentration near a fixed energy and between two cubes.

use nalgebra::DMatrix;
use serde_json::json;

use super::{params_hash, run_samples, EnsembleResult, McOptions};
use crate::error::{Error, Result};
use crate::geometry::{is_weakly_separable, Cube, SiteBox};
use crate::model::{assemble, holder_modulus, sample_potential, ModelParams};
use crate::spectral::distance_to_spectrum;

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `min |a - b|` over two ascending lists.
fn spectral_gap(a: &[f64], b: &[f64]) -> f64 {
    let (mut i, mut j, mut best) = (0, 0, f64::INFINITY);
    while i < a.len() && j < b.len() {
        best = best.min((a[i] - b[j]).abs());
        if a[i] < b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    best
}

/// `n (2L + 1)^{(n+1)d} ς(2ε)`.
pub fn single_volume_bound(cube: &Cube, params: &ModelParams, eps: f64) -> Result<f64> {
    let (n, d, l) = (cube.n() as i32, cube.d() as i32, cube.radius as f64);
    Ok(n as f64 * (2.0 * l + 1.0).powi((n + 1) * d) * holder_modulus(&params.disorder, 2.0 * eps)?)
}

/// `n (2L + 1)^{(2n+1)d} ς(2ε)`.
pub fn two_volume_bound(cube: &Cube, params: &ModelParams, eps: f64) -> Result<f64> {
    let (n, d, l) = (cube.n() as i32, cube.d() as i32, cube.radius as f64);
    Ok(n as f64 * (2.0 * l + 1.0).powi((2 * n + 1) * d) * holder_modulus(&params.disorder, 2.0 * eps)?)
}

fn count_within(values: &[f64], eps_grid: &[f64]) -> Vec<u64> {
    eps_grid
        .iter()
        .map(|&e| values.iter().filter(|&&v| v <= e).count() as u64)
        .collect()
}

/// Empirical `P{dist(E, σ(H_Λ)) <= ε}` per `ε`, against the single-volume bound.
pub fn mc_single_volume_stollmann(
    cube: &Cube,
    params: &ModelParams,
    energy: f64,
    eps_grid: &[f64],
    samples: u64,
    opts: &McOptions,
) -> Result<EnsembleResult> {
    params.validate()?;
    if samples < 100 {
        return Err(Error::Precondition("Stollmann ensembles need at least 100 samples".into()));
    }
    cube.check_budget(opts.max_dim)?;
    let window = cube.projection_hull();
    let (dists, truncated) = run_samples(samples, opts, |i| {
        let pot = sample_potential(&window, &params.disorder, i);
        let h = assemble(cube, params, &pot, opts.max_dim)?;
        Ok(distance_to_spectrum(&sorted_eigenvalues(&h.matrix), energy))
    })?;
    let bounds = eps_grid
        .iter()
        .map(|&e| single_volume_bound(cube, params, e))
        .collect::<Result<Vec<_>>>()?;
    let hash = params_hash(&json!({
        "experiment": "stollmann_single",
        "cube": cube, "params": params, "energy": energy, "eps": eps_grid, "samples": samples,
    }));
    Ok(EnsembleResult::build(
        "stollmann_single",
        dists.len() as u64,
        eps_grid.to_vec(),
        count_within(&dists, eps_grid),
        bounds,
        params.disorder.seed,
        hash,
        truncated,
    ))
}

/// Shared potential window covering both cubes.
pub(crate) fn joint_window(a: &Cube, b: &Cube) -> SiteBox {
    a.projection_hull().hull(&b.projection_hull())
}

/// Empirical `P{dist(σ(H_A), σ(H_B)) <= ε}` with both operators built from one
/// potential sample per draw.
pub fn mc_two_volume_stollmann(
    a: &Cube,
    b: &Cube,
    params: &ModelParams,
    eps_grid: &[f64],
    samples: u64,
    opts: &McOptions,
) -> Result<EnsembleResult> {
    params.validate()?;
    if samples < 100 {
        return Err(Error::Precondition("Stollmann ensembles need at least 100 samples".into()));
    }
    if is_weakly_separable(a, b, params.r0).is_none() {
        return Err(Error::NotWeaklySeparable);
    }
    a.check_budget(opts.max_dim)?;
    let window = joint_window(a, b);
    let (gaps, truncated) = run_samples(samples, opts, |i| {
        let pot = sample_potential(&window, &params.disorder, i);
        let ha = assemble(a, params, &pot, opts.max_dim)?;
        let hb = assemble(b, params, &pot, opts.max_dim)?;
        Ok(spectral_gap(&sorted_eigenvalues(&ha.matrix), &sorted_eigenvalues(&hb.matrix)))
    })?;
    let bounds = eps_grid
        .iter()
        .map(|&e| two_volume_bound(a, params, e))
        .collect::<Result<Vec<_>>>()?;
    let hash = params_hash(&json!({
        "experiment": "stollmann_two",
        "cubes": [a, b], "params": params, "eps": eps_grid, "samples": samples,
    }));
    Ok(EnsembleResult::build(
        "stollmann_two",
        gaps.len() as u64,
        eps_grid.to_vec(),
        count_within(&gaps, eps_grid),
        bounds,
        params.disorder.seed,
        hash,
        truncated,
    ))
}
