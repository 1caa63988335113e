//! Grouping of singular cube centers into well-separated clusters.

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use super::LatticePoint;
use crate::error::{Error, Result};

/// Bad set `B = ∪ Ω_j`, each `Ω_j` the union of boxes of radius `cover_radius`
/// around one chain-equivalence class of centers. Everything else is `G`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterDecomposition {
    pub clusters: Vec<Vec<LatticePoint>>,
    pub l: i64,
    pub cover_radius: i64,
    /// Number of input centers (`J`).
    pub input_count: usize,
}

impl ClusterDecomposition {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Max-norm diameter of the centers of cluster `j`.
    pub fn center_diameter(&self, j: usize) -> i64 {
        let c = &self.clusters[j];
        c.iter()
            .flat_map(|a| c.iter().map(move |b| a.dist(b)))
            .max()
            .unwrap_or(0)
    }

    /// Diameter of `Ω_j` including the covering boxes.
    pub fn diameter(&self, j: usize) -> i64 {
        self.center_diameter(j) + 2 * self.cover_radius
    }

    /// Lattice distance between `Ω_i` and `Ω_j`.
    pub fn distance(&self, i: usize, j: usize) -> i64 {
        let gap = self.clusters[i]
            .iter()
            .flat_map(|a| self.clusters[j].iter().map(move |b| a.dist(b)))
            .min()
            .unwrap_or(i64::MAX);
        (gap - 2 * self.cover_radius).max(0)
    }

    /// Index of the cluster whose covering boxes contain `x`.
    pub fn cluster_of(&self, x: &LatticePoint) -> Option<usize> {
        self.clusters
            .iter()
            .position(|c| c.iter().any(|k| k.dist(x) <= self.cover_radius))
    }

    pub fn in_bad_set(&self, x: &LatticePoint) -> bool {
        self.cluster_of(x).is_some()
    }

    pub fn is_good(&self, x: &LatticePoint) -> bool {
        !self.in_bad_set(x)
    }

    /// `(2J + 1) l^2`.
    pub fn diameter_bound(&self) -> i64 {
        (2 * self.input_count as i64 + 1) * self.l * self.l
    }

    pub fn gap_bound(&self) -> i64 {
        self.l * self.l
    }

    /// Every diameter within `(2J+1) l^2` and every pairwise gap at least `l^2`.
    pub fn satisfies_bounds(&self) -> bool {
        let k = self.len();
        (0..k).all(|j| self.diameter(j) <= self.diameter_bound())
            && (0..k).all(|i| (i + 1..k).all(|j| self.distance(i, j) >= self.gap_bound()))
    }
}

/// Equivalence classes of the chain relation "consecutive centers within `2 l^2`".
///
/// `cover_radius` plays the role of `C̃ l`, so the scale hypothesis `l > 2 C̃`
/// reads `l^2 > 2 cover_radius`. Clusters are returned in order of their first
/// member in the input.
pub fn cluster_singular_centers(
    centers: &[LatticePoint],
    l: i64,
    cover_radius: i64,
) -> Result<ClusterDecomposition> {
    if l < 2 || cover_radius < 0 || l * l <= 2 * cover_radius {
        return Err(Error::ScaleTooSmall { l, cover_radius });
    }
    let link = 2 * l * l;
    let mut uf = UnionFind::<usize>::new(centers.len());
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            if centers[i].dist(&centers[j]) <= link {
                uf.union(i, j);
            }
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    let mut clusters: Vec<Vec<LatticePoint>> = Vec::new();
    for (i, c) in centers.iter().enumerate() {
        let root = uf.find(i);
        match roots.iter().position(|&r| r == root) {
            Some(k) => clusters[k].push(c.clone()),
            None => {
                roots.push(root);
                clusters.push(vec![c.clone()]);
            }
        }
    }
    Ok(ClusterDecomposition { clusters, l, cover_radius, input_count: centers.len() })
}
