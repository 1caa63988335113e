//! Fixtures shared by the benchmarks in `benches/`.

use mploc_core::model::sample_potential;
use mploc_core::{assemble, Cube, DiagonalHopping, DisorderSpec, HamiltonianMatrix, LatticePoint, ModelParams};

pub fn params(n: usize, d: usize) -> ModelParams {
    ModelParams {
        n,
        d,
        g: 20.0,
        r: 6.0,
        r0: 1,
        u_amp: 0.5,
        m1: 1.0,
        disorder: DisorderSpec::uniform(1.0, 42),
        diagonal: DiagonalHopping::Unit,
    }
}

/// `H` on the cube of radius `l` around the origin, realization 0.
pub fn hamiltonian(n: usize, d: usize, l: i64) -> HamiltonianMatrix {
    let cube = Cube::new(LatticePoint::origin(n, d), l);
    let p = params(n, d);
    let pot = sample_potential(&cube.projection_hull(), &p.disorder, 0);
    assemble(&cube, &p, &pot, 5000).expect("fixture fits the budget")
}
