//! The weighted offset norm
//! `||M||_s^2 = C0 Σ_v (sup_{x - y = v} |M(x, y)|)^2 <v>^{2s}`.
//!
//! For fixed offset suprema `a_v`, `s -> log ||M||_s^2` is a log-sum-exp of
//! functions affine in `s`, hence convex. On any `[s0, r]` it therefore lies
//! below the chord through its endpoint values, and a test of the form
//! `log ||M||_s <= a + b s` holds on the whole interval as soon as it holds at
//! both ends.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::geometry::LatticePoint;
use crate::lattice_sums;

/// Head cutoff of the lattice zeta sum behind [`default_c0`].
pub const DEFAULT_C0_CUTOFF: u64 = 2000;

/// `C0(s0) = 2^{2 s0 + 2} S(s0)` with `S(s0) = Σ_{x in Z^D} <x>^{-2 s0}`
/// taken as a rigorous upper bound.
///
/// By `<u>^s <= 2^s (<v>^s + <u - v>^s)`, Young and Cauchy–Schwarz, the offset
/// suprema of a product obey `||a * b||_s <= 2^{s+1} S^{1/2} ||a||_s ||b||_s`,
/// so this `C0` makes the norm submultiplicative at `s0`.
pub fn default_c0(s0: f64, dim: u32) -> f64 {
    assert!(2.0 * s0 > dim as f64, "C0 needs s0 > D/2");
    let (_, upper) = lattice_sums::bracket_zeta(2.0 * s0, dim, DEFAULT_C0_CUTOFF);
    2f64.powf(2.0 * s0 + 2.0) * upper
}

/// Offset classes `v = x - y` of a row/column site pair, reusable across
/// matrices on the same sites.
#[derive(Clone, Debug)]
pub struct OffsetTable {
    rows: usize,
    cols: usize,
    /// Offset class of entry `(i, j)`, row-major.
    class: Vec<u32>,
    /// `ln <v>` per class.
    log_weight: Vec<f64>,
}

impl OffsetTable {
    pub fn new(rows: &[LatticePoint], cols: &[LatticePoint]) -> Self {
        let mut ids: HashMap<Vec<i64>, u32> = HashMap::new();
        let mut log_weight = Vec::new();
        let mut class = Vec::with_capacity(rows.len() * cols.len());
        for x in rows {
            for y in cols {
                let v = x.sub(y);
                let next = ids.len() as u32;
                let id = *ids.entry(v.coords().to_vec()).or_insert_with(|| {
                    log_weight.push((v.bracket() as f64).ln());
                    next
                });
                class.push(id);
            }
        }
        OffsetTable { rows: rows.len(), cols: cols.len(), class, log_weight }
    }

    pub fn square(sites: &[LatticePoint]) -> Self {
        Self::new(sites, sites)
    }

    pub fn offset_count(&self) -> usize {
        self.log_weight.len()
    }

    /// `sup_{x - y = v} |M(x, y)|` per offset class.
    pub fn suprema(&self, m: &DMatrix<f64>) -> Vec<f64> {
        assert_eq!((m.nrows(), m.ncols()), (self.rows, self.cols), "matrix does not match offset table");
        let mut sup = vec![0.0f64; self.log_weight.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let c = self.class[i * self.cols + j] as usize;
                sup[c] = sup[c].max(m[(i, j)].abs());
            }
        }
        sup
    }

    /// `ln ||M||_s` from precomputed suprema; `-inf` for the zero matrix.
    pub fn log_norm_from_suprema(&self, sup: &[f64], s: f64, c0: f64) -> f64 {
        let terms: Vec<f64> = sup
            .iter()
            .zip(&self.log_weight)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, w)| 2.0 * (a.ln() + s * w))
            .collect();
        let Some(top) = terms.iter().copied().reduce(f64::max) else {
            return f64::NEG_INFINITY;
        };
        let sum: f64 = terms.iter().map(|t| (t - top).exp()).sum();
        0.5 * (c0.ln() + top + sum.ln())
    }

    pub fn log_norm(&self, m: &DMatrix<f64>, s: f64, c0: f64) -> f64 {
        self.log_norm_from_suprema(&self.suprema(m), s, c0)
    }

    pub fn norm(&self, m: &DMatrix<f64>, s: f64, c0: f64) -> f64 {
        self.log_norm(m, s, c0).exp()
    }
}

/// `||M||_s` for a matrix with rows indexed by `rows` and columns by `cols`.
///
/// Panics unless `s >= s0`; `s0` only enters through `c0`.
pub fn sobolev_norm(m: &DMatrix<f64>, rows: &[LatticePoint], cols: &[LatticePoint], s: f64, s0: f64, c0: f64) -> f64 {
    assert!(s >= s0, "s = {s} below s0 = {s0}");
    OffsetTable::new(rows, cols).norm(m, s, c0)
}

/// Entrywise consequence of the norm: `|M(x, y)| <= C0^{-1/2} ||M||_s <x - y>^{-s}`.
pub fn pointwise_from_norm(norm_s: f64, s: f64, c0: f64, offset_norm: i64) -> f64 {
    assert!(offset_norm >= 1, "offset norm must be >= 1");
    norm_s / c0.sqrt() * (offset_norm as f64).powf(-s)
}

/// `||G||_s` sampled on a grid of `s` values, stored as natural logs because
/// `<v>^{2s}` overflows for realistic exponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormProfile {
    pub s_values: Vec<f64>,
    pub log_norms: Vec<f64>,
    pub c0: f64,
    pub s0: f64,
}

impl NormProfile {
    /// `n` equally spaced points from `s0` to `s_max`, endpoints included.
    pub fn sample(table: &OffsetTable, m: &DMatrix<f64>, s0: f64, s_max: f64, n: usize, c0: f64) -> Self {
        let sup = table.suprema(m);
        let s_values: Vec<f64> = (0..n)
            .map(|k| if n == 1 { s0 } else { s0 + (s_max - s0) * k as f64 / (n - 1) as f64 })
            .collect();
        let log_norms = s_values.iter().map(|&s| table.log_norm_from_suprema(&sup, s, c0)).collect();
        NormProfile { s_values, log_norms, c0, s0 }
    }

    /// Profile with every norm infinite (no Green's function).
    pub fn infinite(s0: f64, s_max: f64, n: usize, c0: f64) -> Self {
        let s_values: Vec<f64> = (0..n)
            .map(|k| if n == 1 { s0 } else { s0 + (s_max - s0) * k as f64 / (n - 1) as f64 })
            .collect();
        NormProfile { log_norms: vec![f64::INFINITY; n], s_values, c0, s0 }
    }

    pub fn norms(&self) -> Vec<f64> {
        self.log_norms.iter().map(|l| l.exp()).collect()
    }

    pub fn is_monotone(&self) -> bool {
        self.log_norms.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0))
    }

    /// Discrete convexity of `log ||G||_s` on the (possibly uneven) grid.
    pub fn is_log_convex(&self) -> bool {
        let (s, y) = (&self.s_values, &self.log_norms);
        if y.iter().any(|v| !v.is_finite()) {
            return true;
        }
        (1..s.len().saturating_sub(1)).all(|k| {
            let t = (s[k] - s[k - 1]) / (s[k + 1] - s[k - 1]);
            let chord = (1.0 - t) * y[k - 1] + t * y[k + 1];
            y[k] <= chord + 1e-9 * chord.abs().max(1.0)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn line_sites(n: i64) -> Vec<LatticePoint> {
        (0..n).map(|x| LatticePoint::line(&[x])).collect()
    }

    #[test]
    fn identity_and_single_entry() {
        let sites = line_sites(4);
        let c0 = 7.0;
        let id = DMatrix::identity(4, 4);
        assert!((sobolev_norm(&id, &sites, &sites, 1.3, 0.6, c0) - c0.sqrt()).abs() < 1e-12);
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 3)] = -2.5;
        let want = c0.sqrt() * 2.5 * 3f64.powf(1.3);
        assert!((sobolev_norm(&m, &sites, &sites, 1.3, 0.6, c0) - want).abs() < 1e-10);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert!((sobolev_norm(&d, &sites[..2], &sites[..2], 0.7, 0.6, c0) - 3.0 * c0.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pointwise_examples() {
        assert!((pointwise_from_norm(4f64.sqrt(), 2.0, 4.0, 3) - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(pointwise_from_norm(6.0, 5.0, 4.0, 1), 3.0);
    }

    #[test]
    fn default_c0_values() {
        // S(1) on Z = 1 + 2 ζ(2)
        let c0 = default_c0(1.0, 1);
        let s = 1.0 + std::f64::consts::PI.powi(2) / 3.0;
        assert!(c0 >= 16.0 * s && c0 < 16.0 * s * 1.001);
    }

    fn random_matrix(seed: u64, n: usize) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn square_sites(r: i64) -> Vec<LatticePoint> {
        let mut v = Vec::new();
        for a in -r..=r {
            for b in -r..=r {
                v.push(LatticePoint::new(1, 2, vec![a, b]).unwrap());
            }
        }
        v
    }

    #[test]
    fn pointwise_bound_holds_on_random_matrix() {
        let sites = line_sites(20);
        let m = random_matrix(3, 20);
        let table = OffsetTable::square(&sites);
        for s in [0.6, 1.0, 2.0, 4.0, 8.0] {
            let norm = table.norm(&m, s, 5.0);
            for i in 0..20 {
                for j in 0..20 {
                    let k = sites[i].sub(&sites[j]).bracket();
                    assert!(m[(i, j)].abs() <= pointwise_from_norm(norm, s, 5.0, k) * (1.0 + 1e-12));
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn monotone_and_log_convex(seed in any::<u64>(), n in 2usize..16) {
            let sites = line_sites(n as i64);
            let m = random_matrix(seed, n);
            let table = OffsetTable::square(&sites);
            let p = NormProfile::sample(&table, &m, 0.6, 30.0, 9, 3.0);
            prop_assert!(p.is_monotone());
            prop_assert!(p.is_log_convex());
        }

        #[test]
        fn endpoint_sufficiency(seed in any::<u64>(), a in -5.0f64..5.0, b in 0.0f64..3.0) {
            let sites = line_sites(8);
            let m = random_matrix(seed, 8);
            let table = OffsetTable::square(&sites);
            let p = NormProfile::sample(&table, &m, 0.6, 12.0, 25, 3.0);
            let ok = |k: usize| p.log_norms[k] <= a + b * p.s_values[k];
            if ok(0) && ok(24) {
                prop_assert!((0..25).all(ok));
            }
        }

        #[test]
        fn submultiplicative_with_default_c0(seed in any::<u64>()) {
            let sites = square_sites(2);
            let n = sites.len();
            let table = OffsetTable::square(&sites);
            let s0 = 1.1;
            let c0 = default_c0(s0, 2);
            let p1 = random_matrix(seed, n);
            let p2 = random_matrix(seed.wrapping_add(1), n);
            let lhs = table.log_norm(&(&p1 * &p2), s0, c0);
            let rhs = table.log_norm(&p1, s0, c0) + table.log_norm(&p2, s0, c0);
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn perturbation_of_inverse(seed in any::<u64>(), scale in 0.0f64..1.0) {
            let sites = line_sites(10);
            let table = OffsetTable::square(&sites);
            let s0 = 0.6;
            let c0 = default_c0(s0, 1);
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let diag: Vec<f64> = (0..10).map(|_| rng.random_range(1.0..5.0) * if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            let d = DMatrix::from_diagonal(&DVector::from_vec(diag));
            let d_inv = d.clone().try_inverse().unwrap();
            let mut p = random_matrix(seed ^ 0x55, 10);
            p = (&p + p.transpose()) * 0.5;
            let budget = 0.5 / table.norm(&d_inv, s0, c0);
            let pn = table.norm(&p, s0, c0);
            p *= scale * budget / pn;
            let inv = (&d + &p).try_inverse().unwrap();
            prop_assert!(table.norm(&inv, s0, c0) <= 2.0 * table.norm(&d_inv, s0, c0) * (1.0 + 1e-12));
        }
    }
}
