//! The finite-volume operator `H = g^{-1}(T + U) + V` on an n-particle cube.

mod disorder;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cube, LatticePoint};
use crate::lattice_sums;

pub use disorder::{
    holder_modulus, sample_potential, stream_rng, DisorderKind, DisorderSpec, PotentialField,
};

/// Value of the hopping kernel on the diagonal `T(x, x)`.
///
/// `T(x, y) = <y_j - x_j>^{-r}` when `x` and `y` differ only in row `j`; for
/// `x = y` every row qualifies, so the diagonal is a convention.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalHopping {
    /// `T(x, x) = <0>^{-r} = 1`.
    #[default]
    Unit,
    /// `T(x, x) = n`, one unit per particle; additive under tensor splitting.
    PerParticle,
    /// `T(x, x) = 0`.
    Zero,
}

impl DiagonalHopping {
    pub fn value(self, n: usize) -> f64 {
        match self {
            DiagonalHopping::Unit => 1.0,
            DiagonalHopping::PerParticle => n as f64,
            DiagonalHopping::Zero => 0.0,
        }
    }
}

/// Physical parameters of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub d: usize,
    /// Coupling; hopping and interaction are scaled by `1/g`.
    pub g: f64,
    /// Hopping decay exponent.
    pub r: f64,
    /// Interaction range.
    pub r0: i64,
    /// Interaction amplitude of the default range-indicator kernel.
    pub u_amp: f64,
    /// Interaction bound `M_1`.
    pub m1: f64,
    pub disorder: DisorderSpec,
    #[serde(default)]
    pub diagonal: DiagonalHopping,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Precondition(m));
        if self.n == 0 || self.d == 0 {
            return fail("n and d must be positive".into());
        }
        if self.g == 0.0 || !self.g.is_finite() {
            return fail(format!("coupling g = {} must be finite and nonzero", self.g));
        }
        if self.r0 < 1 {
            return fail(format!("interaction range r0 = {} must be >= 1", self.r0));
        }
        if self.u_amp.abs() > self.m1 {
            return fail(format!("|u_amp| = {} exceeds M1 = {}", self.u_amp.abs(), self.m1));
        }
        if self.r <= (self.n * self.d) as f64 {
            return fail(format!("hopping exponent r = {} must exceed nd = {}", self.r, self.n * self.d));
        }
        self.disorder.validate()
    }

    /// Same physics for a different particle count (subsystems of PI cubes).
    pub fn with_particles(&self, n: usize) -> Self {
        ModelParams { n, ..self.clone() }
    }

    pub fn kernel(&self) -> RangeIndicator {
        RangeIndicator { r0: self.r0, amp: self.u_amp }
    }
}

/// Symmetric two-body interaction `U(a, b)` of finite range.
pub trait InteractionKernel {
    fn pair(&self, a: &[i64], b: &[i64]) -> f64;

    /// `Σ_{j1 < j2} U(x_{j1}, x_{j2})`.
    fn energy(&self, x: &LatticePoint) -> f64 {
        let n = x.n();
        let mut total = 0.0;
        for a in 0..n {
            for b in a + 1..n {
                total += self.pair(x.particle(a), x.particle(b));
            }
        }
        total
    }
}

/// `U(a, b) = amp * 1{||a - b|| < r0}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeIndicator {
    pub r0: i64,
    pub amp: f64,
}

impl InteractionKernel for RangeIndicator {
    fn pair(&self, a: &[i64], b: &[i64]) -> f64 {
        let dist = a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0);
        if dist < self.r0 {
            self.amp
        } else {
            0.0
        }
    }
}

/// `<k>^{-r}` for a max-norm length `k`.
fn bracket_power(k: i64, r: f64) -> f64 {
    if k <= 1 {
        1.0
    } else {
        (k as f64).powf(-r)
    }
}

/// `T(x, y)`: `<y_j - x_j>^{-r}` if only row `j` differs, 1 if `x = y`, else 0.
pub fn hopping_entry(x: &LatticePoint, y: &LatticePoint, r: f64) -> f64 {
    debug_assert!(x.same_shape(y));
    let mut moved = None;
    for (j, (a, b)) in x.particles().zip(y.particles()).enumerate() {
        if a != b {
            if moved.is_some() {
                return 0.0;
            }
            moved = Some(j);
        }
    }
    match moved {
        None => 1.0,
        Some(j) => {
            let k = x.particle(j).iter().zip(y.particle(j)).map(|(a, b)| (a - b).abs()).max().unwrap();
            bracket_power(k, r)
        }
    }
}

/// Interaction energy of `x` under the default range-indicator kernel.
pub fn interaction_energy(x: &LatticePoint, r0: i64, u_amp: f64) -> f64 {
    RangeIndicator { r0, amp: u_amp }.energy(x)
}

/// Upper bound on the off-diagonal hopping mass of any row:
/// `n * Σ_{k in Z^d, k != 0} <k>^{-r}`.
pub fn row_hopping_bound(n: usize, d: usize, r: f64) -> f64 {
    let (_, upper) = lattice_sums::bracket_zeta(r, d as u32, 4000);
    n as f64 * (upper - 1.0)
}

/// An assembled dense symmetric Hamiltonian with its site map.
#[derive(Clone, Debug)]
pub struct HamiltonianMatrix {
    pub cube: Cube,
    pub sites: Vec<LatticePoint>,
    pub matrix: DMatrix<f64>,
    pub params: ModelParams,
    pub potential: PotentialField,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.sites.len()
    }

    /// `T_Λ + U_Λ` on the same cube, without the `1/g` factor.
    pub fn kinetic_interaction(&self) -> DMatrix<f64> {
        kinetic_interaction_matrix(&self.sites, &self.params, &self.params.kernel())
    }
}

/// Default matrix dimension budget; overridden by `MPLOC_MAX_DIM`.
pub const DEFAULT_MAX_DIM: usize = 5000;

pub fn max_dim_from_env() -> usize {
    std::env::var("MPLOC_MAX_DIM")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_DIM)
}

fn kinetic_interaction_matrix<K: InteractionKernel>(
    sites: &[LatticePoint],
    params: &ModelParams,
    kernel: &K,
) -> DMatrix<f64> {
    let dim = sites.len();
    let n = sites.first().map_or(params.n, |s| s.n());
    let diag = params.diagonal.value(n);
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = diag + kernel.energy(&sites[i]);
        for j in i + 1..dim {
            let t = hopping_entry(&sites[i], &sites[j], params.r);
            if t != 0.0 {
                m[(i, j)] = t;
                m[(j, i)] = t;
            }
        }
    }
    m
}

/// Assembles `g^{-1}(T_Λ + U_Λ) + V_Λ` with Dirichlet truncation to the cube.
pub fn assemble(cube: &Cube, params: &ModelParams, potential: &PotentialField, max_dim: usize) -> Result<HamiltonianMatrix> {
    assemble_with_kernel(cube, params, potential, &params.kernel(), max_dim)
}

/// [`assemble`] with a user interaction kernel.
pub fn assemble_with_kernel<K: InteractionKernel>(
    cube: &Cube,
    params: &ModelParams,
    potential: &PotentialField,
    kernel: &K,
    max_dim: usize,
) -> Result<HamiltonianMatrix> {
    if cube.d() != params.d {
        return Err(Error::ShapeMismatch(format!("cube dimension {} vs model d = {}", cube.d(), params.d)));
    }
    if !(0..cube.n()).all(|j| potential.window.contains_box(&cube.particle_box(j, 0))) {
        return Err(Error::WindowTooSmall);
    }
    let sites = cube.sites(max_dim)?;
    let mut matrix = kinetic_interaction_matrix(&sites, params, kernel);
    matrix /= params.g;
    for (i, x) in sites.iter().enumerate() {
        let v: f64 = x.particles().map(|p| potential.get(p).expect("window checked")).sum();
        matrix[(i, i)] += v;
    }
    Ok(HamiltonianMatrix {
        cube: cube.clone(),
        sites,
        matrix,
        params: params.clone(),
        potential: potential.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SiteBox;

    fn params(n: usize, g: f64, r: f64) -> ModelParams {
        ModelParams {
            n,
            d: 1,
            g,
            r,
            r0: 2,
            u_amp: 1.0,
            m1: 1.0,
            disorder: DisorderSpec::uniform(1.0, 0),
            diagonal: DiagonalHopping::Unit,
        }
    }

    #[test]
    fn hopping_examples() {
        let o = LatticePoint::line(&[0, 0]);
        assert_eq!(hopping_entry(&o, &LatticePoint::line(&[3, 0]), 6.0), 1.0 / 729.0);
        assert_eq!(hopping_entry(&o, &LatticePoint::line(&[3, 1]), 6.0), 0.0);
        assert_eq!(hopping_entry(&o, &o, 6.0), 1.0);
        assert_eq!(hopping_entry(&o, &LatticePoint::line(&[0, -1]), 6.0), 1.0);
    }

    #[test]
    fn interaction_examples() {
        assert_eq!(interaction_energy(&LatticePoint::line(&[0, 1]), 2, 1.0), 1.0);
        assert_eq!(interaction_energy(&LatticePoint::line(&[0, 5]), 2, 1.0), 0.0);
        assert_eq!(interaction_energy(&LatticePoint::line(&[0, 1, 2]), 2, 1.0), 2.0);
    }

    #[test]
    fn single_site_matrix() {
        let cube = Cube::new(LatticePoint::line(&[0]), 0);
        let pot = PotentialField { window: SiteBox { lo: vec![0], hi: vec![0] }, values: vec![0.3] };
        let h = assemble(&cube, &params(1, 4.0, 2.0), &pot, 10).unwrap();
        assert_eq!(h.matrix[(0, 0)], 0.25 + 0.3);
    }

    #[test]
    fn two_particle_out_of_range_site() {
        let cube = Cube::new(LatticePoint::line(&[0, 3]), 0);
        let pot = PotentialField { window: SiteBox { lo: vec![0], hi: vec![3] }, values: vec![0.1, 0.0, 0.0, -0.4] };
        let h = assemble(&cube, &params(2, 2.0, 4.0), &pot, 10).unwrap();
        assert_eq!(h.matrix[(0, 0)], 0.5 * (1.0 + 0.0) + 0.1 - 0.4);
    }

    #[test]
    fn three_site_chain_matrix() {
        let cube = Cube::new(LatticePoint::line(&[0]), 1);
        let pot = PotentialField::constant(SiteBox { lo: vec![-1], hi: vec![1] }, 0.0);
        let h = assemble(&cube, &params(1, 1.0, 2.0), &pot, 10).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.25, 1.0, 1.0, 1.0, 0.25, 1.0, 1.0]);
        assert_eq!(h.matrix, expected);
    }

    #[test]
    fn window_too_small() {
        let cube = Cube::new(LatticePoint::line(&[0]), 2);
        let pot = PotentialField::constant(SiteBox { lo: vec![-1], hi: vec![1] }, 0.0);
        assert!(matches!(assemble(&cube, &params(1, 1.0, 2.0), &pot, 10), Err(Error::WindowTooSmall)));
    }

    #[test]
    fn assembled_matrix_is_exactly_symmetric() {
        let cube = Cube::new(LatticePoint::from_rows(&[[0, 1], [2, 0]]).unwrap(), 1);
        let p = ModelParams { d: 2, r: 5.0, ..params(2, 3.0, 5.0) };
        let pot = sample_potential(&cube.projection_hull(), &p.disorder, 4);
        let h = assemble(&cube, &p, &pot, 1000).unwrap();
        for i in 0..h.dim() {
            for j in 0..h.dim() {
                assert_eq!(h.matrix[(i, j)].to_bits(), h.matrix[(j, i)].to_bits());
            }
        }
    }

    #[test]
    fn row_hopping_mass_bounded() {
        let cube = Cube::new(LatticePoint::line(&[0, 0]), 6);
        let p = params(2, 1.0, 3.0);
        let pot = PotentialField::constant(cube.projection_hull(), 0.0);
        let h = assemble(&cube, &p, &pot, 1000).unwrap();
        let bound = row_hopping_bound(2, 1, 3.0);
        for i in 0..h.dim() {
            let mass: f64 = (0..h.dim())
                .filter(|&j| j != i)
                .map(|j| hopping_entry(&h.sites[i], &h.sites[j], 3.0))
                .sum();
            assert!(mass <= bound, "row {i}: {mass} > {bound}");
        }
    }

    #[test]
    fn kernel_symmetric_and_finite_range() {
        let k = RangeIndicator { r0: 3, amp: 0.7 };
        for a in -5i64..=5 {
            for b in -5i64..=5 {
                assert_eq!(k.pair(&[a], &[b]), k.pair(&[b], &[a]));
                if (a - b).abs() >= 3 {
                    assert_eq!(k.pair(&[a], &[b]), 0.0);
                }
            }
        }
    }

    #[test]
    fn params_validation() {
        let mut p = params(2, 1.0, 3.0);
        assert!(p.validate().is_ok());
        p.u_amp = 2.0;
        assert!(p.validate().is_err());
        let p = params(2, 1.0, 2.0);
        assert!(p.validate().is_err());
    }
}
