//! Eigenfunction localization: centers, power-law envelope fits, the Poisson
//! identity on sub-cubes and the polynomial growth constant.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cube, LatticePoint};
use crate::lattice_sums;
use crate::model::HamiltonianMatrix;
use crate::schedule::least_squares;
use crate::spectral::{eigenpairs, green_from_spectrum, SpectralTolerances, SpectrumReport};

/// Site of the largest `|vec|`; the first such site in lexicographic order on ties.
pub fn localization_center(vec: &[f64], sites: &[LatticePoint]) -> Result<LatticePoint> {
    assert_eq!(vec.len(), sites.len(), "vector and site list differ in length");
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in vec.iter().enumerate() {
        let a = v.abs();
        if a > 0.0 && best.is_none_or(|(j, b)| a > b || (a == b && sites[i] < sites[j])) {
            best = Some((i, a));
        }
    }
    best.map(|(i, _)| sites[i].clone()).ok_or(Error::ZeroVector)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Shell maxima below `floor_tol * max |vec|` are treated as zero.
    pub floor_tol: f64,
    pub exp_cap: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { floor_tol: 1e-14, exp_cap: 64.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub eigen_index: usize,
    pub energy: f64,
    pub center: LatticePoint,
    pub exponent: f64,
    pub fit_r2: f64,
    pub envelope_points: usize,
    pub boundary_margin: i64,
    /// The exponent is `exp_cap` because most shells fell below the floor.
    pub capped: bool,
}

/// Decay exponent from the shell-maximum envelope
/// `m(k) = max_{||x - center|| = k} |vec(x)|`, `k in [min_radius, max_radius]`:
/// minus the least-squares slope of `ln m` against `ln k`.
pub fn fit_power_exponent(
    vec: &[f64],
    sites: &[LatticePoint],
    center: &LatticePoint,
    min_radius: i64,
    max_radius: i64,
    opts: &FitOptions,
) -> Result<DecayFit> {
    if min_radius < 2 || max_radius < min_radius {
        return Err(Error::Precondition(format!("bad annulus [{min_radius}, {max_radius}]")));
    }
    let peak = vec.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::ZeroVector);
    }
    let width = (max_radius - min_radius + 1) as usize;
    let mut shell = vec![None::<f64>; width];
    for (x, v) in sites.iter().zip(vec) {
        let k = x.dist(center);
        if (min_radius..=max_radius).contains(&k) {
            let slot = &mut shell[(k - min_radius) as usize];
            *slot = Some(slot.unwrap_or(0.0).max(v.abs() / peak));
        }
    }
    let present: Vec<(i64, f64)> = shell
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|m| (min_radius + i as i64, m)))
        .collect();
    if present.len() < 3 {
        return Err(Error::InsufficientShells { found: present.len() });
    }
    let usable: Vec<(i64, f64)> = present.iter().copied().filter(|(_, m)| *m >= opts.floor_tol).collect();
    let base = DecayFit {
        eigen_index: 0,
        energy: f64::NAN,
        center: center.clone(),
        exponent: opts.exp_cap,
        fit_r2: 0.0,
        envelope_points: usable.len(),
        boundary_margin: 0,
        capped: true,
    };
    if 2 * (present.len() - usable.len()) >= present.len() {
        return Ok(base);
    }
    if usable.len() < 3 {
        return Err(Error::InsufficientShells { found: usable.len() });
    }
    let xs: Vec<f64> = usable.iter().map(|(k, _)| (*k as f64).ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|(_, m)| m.ln()).collect();
    let (slope, _, r2) = least_squares(&xs, &ys);
    let exponent = -slope;
    Ok(DecayFit { exponent: exponent.min(opts.exp_cap), fit_r2: r2, capped: exponent >= opts.exp_cap, ..base })
}

/// Fits for every eigenvector of `h`; entries whose annulus is too thin
/// are listed in `skipped` with the reason.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub fits: Vec<DecayFit>,
    pub skipped: Vec<(usize, String)>,
}

impl DecayTable {
    pub fn csv_header() -> [&'static str; 6] {
        ["eigen_index", "E", "center", "exponent", "r2", "margin"]
    }

    pub fn csv_rows(&self) -> Vec<[String; 6]> {
        self.fits
            .iter()
            .map(|f| {
                [
                    f.eigen_index.to_string(),
                    format!("{:e}", f.energy),
                    f.center.to_string(),
                    format!("{:e}", f.exponent),
                    format!("{:e}", f.fit_r2),
                    f.boundary_margin.to_string(),
                ]
            })
            .collect()
    }

    pub fn median_exponent(&self) -> Option<f64> {
        let mut e: Vec<f64> = self.fits.iter().map(|f| f.exponent).collect();
        if e.is_empty() {
            return None;
        }
        e.sort_by(f64::total_cmp);
        let m = e.len() / 2;
        Some(if e.len() % 2 == 1 { e[m] } else { 0.5 * (e[m - 1] + e[m]) })
    }
}

/// Fits each eigenvector over shells `[2, boundary margin of its center]`.
pub fn decay_table(h: &HamiltonianMatrix, spectrum: &SpectrumReport, opts: &FitOptions) -> DecayTable {
    let results: Vec<std::result::Result<DecayFit, (usize, String)>> = (0..spectrum.eigenvalues.len())
        .into_par_iter()
        .map(|k| {
            let v: Vec<f64> = spectrum.eigenvectors.column(k).iter().copied().collect();
            let center = localization_center(&v, &h.sites).map_err(|e| (k, e.to_string()))?;
            let margin = h.cube.boundary_margin(&center);
            let fit = fit_power_exponent(&v, &h.sites, &center, 2, margin, opts).map_err(|e| (k, e.to_string()))?;
            Ok(DecayFit { eigen_index: k, energy: spectrum.eigenvalues[k], boundary_margin: margin, ..fit })
        })
        .collect();
    let mut table = DecayTable { fits: Vec::new(), skipped: Vec::new() };
    for r in results {
        match r {
            Ok(f) => table.fits.push(f),
            Err(s) => table.skipped.push(s),
        }
    }
    table
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonCheck {
    pub big_box: Cube,
    pub sub_cube: Cube,
    pub energy: f64,
    pub max_abs_residual: f64,
    /// Bound on the omitted terms with `x''` outside the big box.
    pub truncation_bound: f64,
    /// `max |φ(x)| / (1 + ||x||)^a` on the big box.
    pub growth_constant: f64,
    pub growth_exponent: f64,
    pub passes: bool,
}

/// Residual slack added to the truncation bound when deciding `passes`.
pub const POISSON_SLACK: f64 = 1e-8;

/// `ε1` of the polynomial growth exponent `Nd/2 + ε1`.
pub const GROWTH_EPS: f64 = 0.01;

/// `max_x |vec(x)| / (1 + ||x||)^a`.
pub fn growth_constant(vec: &[f64], sites: &[LatticePoint], a: f64) -> f64 {
    sites
        .iter()
        .zip(vec)
        .map(|(x, v)| v.abs() / (1.0 + x.norm() as f64).powf(a))
        .fold(0.0, f64::max)
}

/// Evaluates `φ(x) + Σ_{x' in Λ, x'' in B \ Λ} G_Λ(E)(x, x') H(x', x'') φ(x'')`
/// for all `x in Λ`, where `H(x', x'') = g^{-1} T(x', x'')` off the diagonal.
///
/// For a big-box eigenpair the identity is exact. The part of the infinite-
/// volume sum with `x''` outside `B` is bounded, assuming the growth
/// `|φ(y)| <= C (1 + ||y||)^a`, by
/// `|g|^{-1} max_x Σ_{x'} |G(x, x')| · n C max_{x'} (2 + ||x'||)^a · Σ_{k >= m} S_d(k) k^{a - r}`,
/// with `m` the least distance from `Λ` to the outside of `B`.
pub fn poisson_residual(
    big: &HamiltonianMatrix,
    energy: f64,
    phi: &DVector<f64>,
    sub_cube: &Cube,
    tol: &SpectralTolerances,
) -> Result<PoissonCheck> {
    if !big.cube.strictly_contains(sub_cube) {
        return Err(Error::CubeNotInterior);
    }
    if phi.len() != big.dim() {
        return Err(Error::ShapeMismatch("eigenvector length differs from the big box".into()));
    }
    let inner: Vec<usize> = (0..big.dim()).filter(|&i| sub_cube.contains(&big.sites[i])).collect();
    let outer: Vec<usize> = (0..big.dim()).filter(|&i| !sub_cube.contains(&big.sites[i])).collect();
    let h_sub = DMatrix::from_fn(inner.len(), inner.len(), |a, b| big.matrix[(inner[a], inner[b])]);
    // Spectral form: LU is too inaccurate near σ(H_Λ), where localized states sit.
    let g = green_from_spectrum(&eigenpairs(&h_sub)?, energy, tol)?;
    // (H_{Λ, B\Λ} φ)(x')
    let coupling = DVector::from_fn(inner.len(), |a, _| {
        outer.iter().map(|&j| big.matrix[(inner[a], j)] * phi[j]).sum::<f64>()
    });
    let correction = &g * coupling;
    let max_abs_residual = inner
        .iter()
        .enumerate()
        .map(|(a, &i)| (phi[i] + correction[a]).abs())
        .fold(0.0, f64::max);

    let (n, d) = (big.cube.n(), big.cube.d());
    let a = (n * d) as f64 / 2.0 + GROWTH_EPS;
    let phi_vec: Vec<f64> = phi.iter().copied().collect();
    let c = growth_constant(&phi_vec, &big.sites, a);
    let g_row = (0..g.nrows()).map(|r| g.row(r).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let m = inner.iter().map(|&i| big.cube.boundary_margin(&big.sites[i])).min().unwrap_or(0) + 1;
    let theta = big.params.r - a;
    let truncation_bound = if theta <= d as f64 || m < 2 {
        f64::INFINITY
    } else {
        let reach = inner
            .iter()
            .map(|&i| (2.0 + big.sites[i].norm() as f64).powf(a))
            .fold(0.0, f64::max);
        g_row * n as f64 * c * reach * lattice_sums::shell_tail_upper(theta, d as u32, (m - 1) as u64) / big.params.g.abs()
    };
    Ok(PoissonCheck {
        big_box: big.cube.clone(),
        sub_cube: sub_cube.clone(),
        energy,
        max_abs_residual,
        truncation_bound,
        growth_constant: c,
        growth_exponent: a,
        passes: max_abs_residual <= truncation_bound + POISSON_SLACK,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    /// Least `C` with `|φ(x)| <= C (1 + ||x||)^{Nd/2 + ε1}` after `φ(0) = 1`.
    pub c: f64,
    pub exponent: f64,
    pub ok: bool,
}

/// Growth constant of `vec` normalized to `vec(0) = 1`.
pub fn generalized_growth_check(vec: &[f64], sites: &[LatticePoint], eps1: f64) -> Result<GrowthCheck> {
    let origin = sites
        .iter()
        .position(|x| x.norm() == 0)
        .ok_or_else(|| Error::Precondition("box does not contain the origin".into()))?;
    let phi0 = vec[origin];
    if phi0 == 0.0 {
        return Err(Error::ZeroAtOrigin);
    }
    let nd = sites[origin].n() * sites[origin].d();
    let exponent = nd as f64 / 2.0 + eps1;
    let normalized: Vec<f64> = vec.iter().map(|v| v / phi0).collect();
    let c = growth_constant(&normalized, sites, exponent);
    Ok(GrowthCheck { c, exponent, ok: c.is_finite() })
}
