//! Diagonal distance, FI/PI classification and the separability predicates.
//!
//! Index subsets are 0-based `Vec<usize>` in increasing order. Subsets are
//! searched in lexicographic order of their sorted element lists, so
//! `{0} < {0,1} < {0,1,2} < {0,2} < {1} < ...`.

use serde::{Deserialize, Serialize};

use super::{unions_intersect, Cube, LatticePoint};
use crate::error::{Error, Result};

/// Which cube of a pair carries a separability witness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
}

/// A subset `J` on one side with `Π_J Λ_{L+r0}(side)` disjoint from
/// `Π_{J^C} Λ_{L+r0}(side) ∪ Π Λ_{L+r0}(other)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub side: Side,
    pub subset: Vec<usize>,
}

/// Nonempty subsets of `{0..n}` in lexicographic order.
pub fn lex_subsets(n: usize) -> Vec<Vec<usize>> {
    fn grow(n: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let start = prefix.last().map_or(0, |&j| j + 1);
        for j in start..n {
            prefix.push(j);
            out.push(prefix.clone());
            grow(n, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity((1usize << n.min(20)).saturating_sub(1));
    grow(n, &mut Vec::new(), &mut out);
    out
}

fn complement(n: usize, subset: &[usize]) -> Vec<usize> {
    (0..n).filter(|j| !subset.contains(j)).collect()
}

/// `min_{x in Z^d} max_j ||u_j - x||`.
///
/// The max-norm objective separates over coordinates, and along each axis the
/// optimum is the midpoint of the particle range, giving `ceil(range / 2)`.
pub fn distance_to_diagonal(u: &LatticePoint) -> i64 {
    (0..u.d())
        .map(|i| {
            let (lo, hi) = u
                .particles()
                .map(|p| p[i])
                .fold((i64::MAX, i64::MIN), |(lo, hi), c| (lo.min(c), hi.max(c)));
            (hi - lo + 1) / 2
        })
        .max()
        .unwrap_or(0)
}

/// FI iff `dist(u, D_0) <= 2n(L + r0)`; PI otherwise.
pub fn is_fully_interactive(cube: &Cube, r0: i64) -> bool {
    distance_to_diagonal(&cube.center) <= 2 * cube.n() as i64 * (cube.radius + r0)
}

fn check_pair(a: &Cube, b: &Cube) {
    assert!(
        a.center.same_shape(&b.center) && a.radius == b.radius,
        "separability needs cubes of equal shape and radius"
    );
}

fn side_witness(this: &Cube, other: &Cube, r0: i64) -> Option<Vec<usize>> {
    let n = this.n();
    let other_proj = other.projection(r0);
    lex_subsets(n).into_iter().find(|subset| {
        let inside = this.projection_of(subset, r0);
        let mut rest = this.projection_of(&complement(n, subset), r0);
        rest.extend(other_proj.iter().cloned());
        !unions_intersect(&inside, &rest)
    })
}

/// Exhaustive witness search: side `a` first, then side `b`.
///
/// `J = {1..n}` is admitted; its condition reduces to complete separability.
pub fn is_weakly_separable(a: &Cube, b: &Cube, r0: i64) -> Option<Witness> {
    check_pair(a, b);
    if let Some(subset) = side_witness(a, b, r0) {
        return Some(Witness { side: Side::A, subset });
    }
    side_witness(b, a, r0).map(|subset| Witness { side: Side::B, subset })
}

/// Weakly separable and `||u - v|| > 11 n L`.
pub fn is_separable(a: &Cube, b: &Cube, r0: i64) -> bool {
    check_pair(a, b);
    a.center.dist(&b.center) > 11 * a.n() as i64 * a.radius && is_weakly_separable(a, b, r0).is_some()
}

/// `Π Λ_{L+r0}(u) ∩ Π Λ_{L+r0}(v) = ∅`.
pub fn is_completely_separable(a: &Cube, b: &Cube, r0: i64) -> bool {
    check_pair(a, b);
    !unions_intersect(&a.projection(r0), &b.projection(r0))
}

/// Lexicographically smallest proper `J` with `Π_J Λ_{L+r0}` disjoint from
/// `Π_{J^C} Λ_{L+r0}`. Only PI cubes are guaranteed to have one.
pub fn canonical_decomposition(cube: &Cube, r0: i64) -> Result<(Vec<usize>, Vec<usize>)> {
    if is_fully_interactive(cube, r0) {
        return Err(Error::NoDecomposition);
    }
    let n = cube.n();
    lex_subsets(n)
        .into_iter()
        .filter(|s| s.len() < n)
        .find_map(|subset| {
            let rest = complement(n, &subset);
            let disjoint =
                !unions_intersect(&cube.projection_of(&subset, r0), &cube.projection_of(&rest, r0));
            disjoint.then_some((subset, rest))
        })
        .ok_or(Error::NoDecomposition)
}
