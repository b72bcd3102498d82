use std::cmp::Reverse;
use std::collections::BinaryHeap;

use nalgebra::{Matrix3, SymmetricEigen};

use super::PointCloud;
use crate::spatial::NeighborIndex;
use crate::{Error, Result, Vector};

/// How PCA normals (sign-ambiguous) are made consistent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// Point away from the cloud centroid. Correct for star-shaped clouds.
    #[default]
    Centroid,
    /// Propagate along a minimum spanning tree of the kNN graph weighted by
    /// `1 − |n_i · n_j|`, seeded at the highest point.
    SpanningTree,
}

#[derive(Debug, Clone, Copy)]
pub struct NormalOptions {
    pub k: usize,
    pub orientation: Orientation,
    /// Replace normals already present on the cloud.
    pub force: bool,
}

impl Default for NormalOptions {
    fn default() -> Self {
        Self {
            k: 10,
            orientation: Orientation::Centroid,
            force: false,
        }
    }
}

/// Local-PCA normals over each point and its `k` nearest neighbors.
pub fn estimate_normals(cloud: &PointCloud, opts: &NormalOptions) -> Result<PointCloud> {
    if cloud.has_normals() && !opts.force {
        return Ok(cloud.clone());
    }
    let k = opts.k;
    if k < 3 {
        return Err(Error::invalid(format!(
            "normal estimation needs k >= 3, got {k}"
        )));
    }
    if cloud.len() < k + 1 {
        return Err(Error::invalid(format!(
            "normal estimation with k = {k} needs at least {} points, cloud has {}",
            k + 1,
            cloud.len()
        )));
    }
    let points = cloud.points();
    let index = NeighborIndex::new(points);
    let mut normals = Vec::with_capacity(points.len());
    let mut neighborhoods = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        // The query point itself is the first hit.
        let nbrs = index.k_nearest(p, k + 1);
        let mean = nbrs
            .iter()
            .fold(Vector::zeros(), |acc, n| acc + points[n.index].coords)
            / nbrs.len() as f64;
        let mut cov = Matrix3::zeros();
        for n in &nbrs {
            let d = points[n.index].coords - mean;
            cov += d * d.transpose();
        }
        let eig = SymmetricEigen::new(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let (smallest, middle, largest) = (order[0], order[1], order[2]);
        let top = eig.eigenvalues[largest];
        if top.is_nan() || top <= 0.0 || eig.eigenvalues[middle] <= 1e-12 * top {
            return Err(Error::DegenerateNeighborhood { index: i });
        }
        let n: Vector = eig.eigenvectors.column(smallest).into_owned();
        normals.push(n.normalize());
        neighborhoods.push(
            nbrs.into_iter()
                .skip(1)
                .map(|n| n.index)
                .collect::<Vec<_>>(),
        );
    }

    match opts.orientation {
        Orientation::Centroid => {
            let c = cloud.centroid();
            for (n, p) in normals.iter_mut().zip(points) {
                if n.dot(&(p - c)) < 0.0 {
                    *n = -*n;
                }
            }
        }
        Orientation::SpanningTree => orient_by_spanning_tree(cloud, &mut normals, &neighborhoods),
    }
    PointCloud::new(points.to_vec(), Some(normals), cloud.source_tag.clone())
}

fn orient_by_spanning_tree(
    cloud: &PointCloud,
    normals: &mut [Vector],
    neighborhoods: &[Vec<usize>],
) {
    let n = normals.len();
    let mut adjacency: Vec<Vec<usize>> = neighborhoods.to_vec();
    for (i, nb) in neighborhoods.iter().enumerate() {
        for &j in nb {
            adjacency[j].push(i);
        }
    }
    for a in &mut adjacency {
        a.sort_unstable();
        a.dedup();
    }
    let points = cloud.points();
    let centroid = cloud.centroid();
    let mut visited = vec![false; n];
    // Seeds in descending height so every component is reached.
    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by(|&a, &b| points[b].z.total_cmp(&points[a].z).then(a.cmp(&b)));
    for seed in seeds {
        if visited[seed] {
            continue;
        }
        if normals[seed].dot(&(points[seed] - centroid)) < 0.0 {
            normals[seed] = -normals[seed];
        }
        visited[seed] = true;
        let mut heap = BinaryHeap::new();
        let push_edges = |from: usize,
                          heap: &mut BinaryHeap<Reverse<(u64, usize, usize)>>,
                          normals: &[Vector],
                          visited: &[bool]| {
            for &to in &adjacency[from] {
                if !visited[to] {
                    let w = 1.0 - normals[from].dot(&normals[to]).abs();
                    // Non-negative floats order like their bit patterns.
                    heap.push(Reverse((w.max(0.0).to_bits(), from, to)));
                }
            }
        };
        push_edges(seed, &mut heap, normals, &visited);
        while let Some(Reverse((_, from, to))) = heap.pop() {
            if visited[to] {
                continue;
            }
            if normals[from].dot(&normals[to]) < 0.0 {
                normals[to] = -normals[to];
            }
            visited[to] = true;
            push_edges(to, &mut heap, normals, &visited);
        }
    }
}
