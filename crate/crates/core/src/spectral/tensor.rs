//! Spectral splitting of partially interactive cubes.

use crate::error::{Error, Result};
use crate::geometry::unions_intersect_within;
use crate::model::{assemble, HamiltonianMatrix};

/// Sorted multiset `{a + b}`.
pub fn minkowski_spectrum(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| x + y)).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Max elementwise gap between two sorted lists of equal length.
pub fn spectral_mismatch(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spectra of different sizes");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Subsystem Hamiltonians of `H_Λ` for a particle split `J ⊔ J^c`.
///
/// `σ(H_Λ) = σ(H') ⊕ σ(H'') + shift`, where `shift` corrects for the hopping
/// diagonal convention being counted once in `H_Λ` and once per subsystem.
#[derive(Clone, Debug)]
pub struct PiSplit {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub h_first: HamiltonianMatrix,
    pub h_second: HamiltonianMatrix,
    pub shift: f64,
}

/// Builds the split; the particle projections of the two groups must stay at
/// distance `>= r0` so that no cross interaction is switched on.
pub fn pi_subsystems(h: &HamiltonianMatrix, first: &[usize], max_dim: usize) -> Result<PiSplit> {
    let n = h.cube.n();
    let second: Vec<usize> = (0..n).filter(|j| !first.contains(j)).collect();
    if first.is_empty() || second.is_empty() {
        return Err(Error::Precondition("split must leave both groups nonempty".into()));
    }
    let r0 = h.params.r0;
    if unions_intersect_within(&h.cube.projection_of(first, 0), &h.cube.projection_of(&second, 0), r0 - 1) {
        return Err(Error::Precondition(format!("groups interact: projections closer than r0 = {r0}")));
    }
    let sub = |group: &[usize]| {
        let params = h.params.with_particles(group.len());
        assemble(&h.cube.restrict(group), &params, &h.potential, max_dim)
    };
    let diag = h.params.diagonal;
    let shift = (diag.value(n) - diag.value(first.len()) - diag.value(second.len())) / h.params.g;
    Ok(PiSplit {
        first: first.to_vec(),
        h_first: sub(first)?,
        h_second: sub(&second)?,
        second,
        shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Cube, LatticePoint, SiteBox};
    use crate::model::{sample_potential, DiagonalHopping, DisorderSpec, ModelParams};
    use crate::spectral::eigenpairs;

    #[test]
    fn small_examples() {
        assert_eq!(minkowski_spectrum(&[1.0, 2.0], &[10.0, 20.0]), vec![11.0, 12.0, 21.0, 22.0]);
        assert_eq!(minkowski_spectrum(&[3.0, -1.0], &[0.0]), vec![-1.0, 3.0]);
    }

    #[test]
    fn split_reproduces_spectrum() {
        for diagonal in [DiagonalHopping::Unit, DiagonalHopping::PerParticle, DiagonalHopping::Zero] {
            let params = ModelParams {
                n: 2,
                d: 1,
                g: 2.0,
                r: 4.0,
                r0: 2,
                u_amp: 0.7,
                m1: 1.0,
                disorder: DisorderSpec::uniform(1.0, 9),
                diagonal,
            };
            let cube = Cube::new(LatticePoint::line(&[0, 12]), 3);
            let pot = sample_potential(&SiteBox { lo: vec![-5], hi: vec![20] }, &params.disorder, 0);
            let h = assemble(&cube, &params, &pot, 1000).unwrap();
            let split = pi_subsystems(&h, &[0], 1000).unwrap();
            let full = eigenpairs(&h.matrix).unwrap().eigenvalues;
            let a = eigenpairs(&split.h_first.matrix).unwrap().eigenvalues;
            let b = eigenpairs(&split.h_second.matrix).unwrap().eigenvalues;
            let combined: Vec<f64> = minkowski_spectrum(&a, &b).iter().map(|x| x + split.shift).collect();
            assert!(spectral_mismatch(&full, &combined) < 1e-9, "{diagonal:?}");
        }
    }

    #[test]
    fn interacting_split_rejected() {
        let params = ModelParams {
            n: 2,
            d: 1,
            g: 1.0,
            r: 4.0,
            r0: 3,
            u_amp: 0.5,
            m1: 1.0,
            disorder: DisorderSpec::uniform(1.0, 0),
            diagonal: DiagonalHopping::Unit,
        };
        let cube = Cube::new(LatticePoint::line(&[0, 6]), 2);
        let pot = PotentialField::constant(SiteBox { lo: vec![-3], hi: vec![9] }, 0.0);
        let h = assemble(&cube, &params, &pot, 100).unwrap();
        assert!(pi_subsystems(&h, &[0], 100).is_err());
    }

    use crate::model::PotentialField;
}
