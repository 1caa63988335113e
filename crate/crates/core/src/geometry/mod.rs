//! Lattice points, single-particle boxes and n-particle cubes.
//!
//! All geometry is exact integer arithmetic in the max-norm. A configuration of
//! `n` particles in `Z^d` is stored as an `n x d` row-major coordinate matrix.

mod cluster;
mod separability;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cluster::{cluster_singular_centers, ClusterDecomposition};
pub use separability::{
    canonical_decomposition, distance_to_diagonal, is_completely_separable, is_fully_interactive,
    is_separable, is_weakly_separable, lex_subsets, Side, Witness,
};

/// A point `x = (x_1, ..., x_n)` of `Z^{nd}`; row `j` is particle `j`'s position.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    n: usize,
    d: usize,
    coords: Vec<i64>,
}

impl LatticePoint {
    pub fn new(n: usize, d: usize, coords: Vec<i64>) -> Result<Self> {
        if n == 0 || d == 0 || coords.len() != n * d {
            return Err(Error::ShapeMismatch(format!(
                "expected {n} x {d} coordinates, got {}",
                coords.len()
            )));
        }
        Ok(LatticePoint { n, d, coords })
    }

    /// Builds a point from per-particle rows, all of the same dimension.
    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != d) {
            return Err(Error::ShapeMismatch("ragged particle rows".into()));
        }
        let coords = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(n, d, coords)
    }

    /// `n` particles on the line, one coordinate each.
    pub fn line(coords: &[i64]) -> Self {
        Self::new(coords.len(), 1, coords.to_vec()).expect("nonempty coordinate list")
    }

    pub fn origin(n: usize, d: usize) -> Self {
        Self::new(n, d, vec![0; n * d]).expect("n, d >= 1")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn particle(&self, j: usize) -> &[i64] {
        &self.coords[j * self.d..(j + 1) * self.d]
    }

    pub fn particles(&self) -> impl Iterator<Item = &[i64]> {
        self.coords.chunks(self.d)
    }

    /// Max-norm `||x|| = max_j max_i |x_j^(i)|`.
    pub fn norm(&self) -> i64 {
        self.coords.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// `<x> = max(1, ||x||)`.
    pub fn bracket(&self) -> i64 {
        self.norm().max(1)
    }

    pub fn same_shape(&self, other: &LatticePoint) -> bool {
        self.n == other.n && self.d == other.d
    }

    pub fn dist(&self, other: &LatticePoint) -> i64 {
        debug_assert!(self.same_shape(other));
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or(0)
    }

    pub fn sub(&self, other: &LatticePoint) -> LatticePoint {
        debug_assert!(self.same_shape(other));
        LatticePoint {
            n: self.n,
            d: self.d,
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect(),
        }
    }

    /// The sub-configuration of the particles listed in `subset` (0-based).
    pub fn select(&self, subset: &[usize]) -> LatticePoint {
        let coords = subset.iter().flat_map(|&j| self.particle(j).iter().copied()).collect();
        LatticePoint { n: subset.len(), d: self.d, coords }
    }
}

impl fmt::Display for LatticePoint {
    /// Coordinates within a particle are comma separated, particles by `;`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, row) in self.particles().enumerate() {
            if j > 0 {
                f.write_str(";")?;
            }
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

/// Axis-aligned integer box `[lo, hi]` in `Z^d` (inclusive on both ends).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl SiteBox {
    pub fn centered(center: &[i64], radius: i64) -> Self {
        SiteBox {
            lo: center.iter().map(|c| c - radius).collect(),
            hi: center.iter().map(|c| c + radius).collect(),
        }
    }

    pub fn d(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            return 0;
        }
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l + 1) as usize).product()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(c, (l, h))| l <= c && c <= h)
    }

    pub fn contains_box(&self, other: &SiteBox) -> bool {
        other.is_empty()
            || self
                .lo
                .iter()
                .zip(&self.hi)
                .zip(other.lo.iter().zip(&other.hi))
                .all(|((l, h), (ol, oh))| l <= ol && oh <= h)
    }

    pub fn intersects(&self, other: &SiteBox) -> bool {
        !self.is_empty()
            && !other.is_empty()
            && self
                .lo
                .iter()
                .zip(&self.hi)
                .zip(other.lo.iter().zip(&other.hi))
                .all(|((l, h), (ol, oh))| l.max(ol) <= h.min(oh))
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &SiteBox) -> SiteBox {
        SiteBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| *a.min(b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| *a.max(b)).collect(),
        }
    }

    /// Row-major (last coordinate fastest) position of `x`, if inside.
    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let mut idx = 0usize;
        for ((c, l), h) in x.iter().zip(&self.lo).zip(&self.hi) {
            idx = idx * (h - l + 1) as usize + (c - l) as usize;
        }
        Some(idx)
    }

    /// Points in lexicographic order.
    pub fn points(&self) -> Vec<Vec<i64>> {
        odometer(&self.lo, &self.hi)
    }
}

/// Lexicographic enumeration of the integer box `[lo, hi]`, last axis fastest.
fn odometer(lo: &[i64], hi: &[i64]) -> Vec<Vec<i64>> {
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return Vec::new();
    }
    let total: usize = lo.iter().zip(hi).map(|(l, h)| (h - l + 1) as usize).product();
    let mut out = Vec::with_capacity(total);
    let mut cur = lo.to_vec();
    loop {
        out.push(cur.clone());
        let mut axis = cur.len();
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if cur[axis] < hi[axis] {
                cur[axis] += 1;
                break;
            }
            cur[axis] = lo[axis];
        }
    }
}

/// Whether two unions of boxes share a lattice point.
pub(crate) fn unions_intersect(a: &[SiteBox], b: &[SiteBox]) -> bool {
    a.iter().any(|x| b.iter().any(|y| x.intersects(y)))
}

/// Whether some point of `∪a` lies within max-distance `slack` of `∪b`.
pub(crate) fn unions_intersect_within(a: &[SiteBox], b: &[SiteBox], slack: i64) -> bool {
    a.iter().any(|x| {
        let grown = SiteBox { lo: x.lo.iter().map(|c| c - slack).collect(), hi: x.hi.iter().map(|c| c + slack).collect() };
        b.iter().any(|y| grown.intersects(y))
    })
}

/// The n-particle cube `Λ_L(u)`: the product of the boxes `[u_j - L, u_j + L]^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cube {
    pub center: LatticePoint,
    pub radius: i64,
}

impl Cube {
    pub fn new(center: LatticePoint, radius: i64) -> Self {
        assert!(radius >= 0, "cube radius must be nonnegative");
        Cube { center, radius }
    }

    pub fn n(&self) -> usize {
        self.center.n()
    }

    pub fn d(&self) -> usize {
        self.center.d()
    }

    /// `(2L+1)^{nd}`, saturating at `u128::MAX`.
    pub fn site_count(&self) -> u128 {
        let side = (2 * self.radius + 1) as u128;
        let dims = (self.n() * self.d()) as u32;
        side.checked_pow(dims).unwrap_or(u128::MAX)
    }

    pub fn check_budget(&self, max_dim: usize) -> Result<usize> {
        let count = self.site_count();
        if count > max_dim as u128 {
            return Err(Error::SizeOverflow { sites: count, max: max_dim });
        }
        Ok(count as usize)
    }

    /// All sites in lexicographic order; this order is the matrix index map.
    pub fn sites(&self, max_dim: usize) -> Result<Vec<LatticePoint>> {
        self.check_budget(max_dim)?;
        let lo: Vec<i64> = self.center.coords().iter().map(|c| c - self.radius).collect();
        let hi: Vec<i64> = self.center.coords().iter().map(|c| c + self.radius).collect();
        let (n, d) = (self.n(), self.d());
        Ok(odometer(&lo, &hi)
            .into_iter()
            .map(|coords| LatticePoint { n, d, coords })
            .collect())
    }

    pub fn contains(&self, x: &LatticePoint) -> bool {
        x.same_shape(&self.center) && x.dist(&self.center) <= self.radius
    }

    /// Position of `x` in the lexicographic site order.
    pub fn index_of(&self, x: &LatticePoint) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let side = (2 * self.radius + 1) as usize;
        let idx = x
            .coords()
            .iter()
            .zip(self.center.coords())
            .fold(0usize, |acc, (c, u)| acc * side + (c - u + self.radius) as usize);
        Some(idx)
    }

    /// The single-particle box `Π_j Λ_{L+extra}(u)`.
    pub fn particle_box(&self, j: usize, extra: i64) -> SiteBox {
        SiteBox::centered(self.center.particle(j), self.radius + extra)
    }

    /// `Π_J Λ_{L+extra}(u)` as a union of boxes.
    pub fn projection_of(&self, subset: &[usize], extra: i64) -> Vec<SiteBox> {
        subset.iter().map(|&j| self.particle_box(j, extra)).collect()
    }

    /// Full projection `Π Λ_{L+extra}(u)`.
    pub fn projection(&self, extra: i64) -> Vec<SiteBox> {
        (0..self.n()).map(|j| self.particle_box(j, extra)).collect()
    }

    /// Bounding box of the full projection; a potential window covering the cube.
    pub fn projection_hull(&self) -> SiteBox {
        let boxes = self.projection(0);
        boxes[1..].iter().fold(boxes[0].clone(), |acc, b| acc.hull(b))
    }

    /// The cube of the particles in `subset`, same radius.
    pub fn restrict(&self, subset: &[usize]) -> Cube {
        Cube { center: self.center.select(subset), radius: self.radius }
    }

    /// Whether `inner` is contained in `self` and differs from it.
    pub fn strictly_contains(&self, inner: &Cube) -> bool {
        inner.center.same_shape(&self.center)
            && inner.center.dist(&self.center) + inner.radius <= self.radius
            && inner != self
    }

    /// Distance from `x` to the complement of the cube: `L - ||x - u||`.
    pub fn boundary_margin(&self, x: &LatticePoint) -> i64 {
        self.radius - x.dist(&self.center)
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L={}@({})", self.radius, self.center)
    }
}
