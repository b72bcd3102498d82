//! Exact nearest-neighbor queries over a static 3D point set.
//!
//! Results are identical to a brute-force scan, including ties: among points at
//! the same squared distance the lowest index wins.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::Point;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static kd-tree over a borrowed-then-copied point set.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    coords: Vec<[f64; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

/// A neighbor found by a query: index into the indexed set and squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Neighbor {
    pub fn distance(&self) -> f64 {
        self.dist2.sqrt()
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

// Max-heap entry for k-nearest search.
#[derive(PartialEq)]
struct HeapEntry(Neighbor);

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.key_cmp(&other.0)
    }
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl NeighborIndex {
    pub fn new(points: &[Point]) -> Self {
        let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut order: Vec<u32> = (0..coords.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * coords.len() / LEAF_SIZE + 1);
        if !coords.is_empty() {
            build(&coords, &mut order, 0, coords.len(), &mut nodes);
        }
        Self {
            coords,
            order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, index: usize) -> Point {
        let c = self.coords[index];
        Point::new(c[0], c[1], c[2])
    }

    /// Nearest indexed point to `query`; `None` only for an empty index.
    pub fn nearest(&self, query: &Point) -> Option<Neighbor> {
        self.nearest_filtered(query, |_| true)
    }

    /// Nearest point whose index satisfies `accept`.
    pub fn nearest_filtered(
        &self,
        query: &Point,
        accept: impl Fn(usize) -> bool,
    ) -> Option<Neighbor> {
        if self.nodes.is_empty() {
            return None;
        }
        let q = [query.x, query.y, query.z];
        let mut best: Option<Neighbor> = None;
        self.nearest_rec(0, &q, &accept, &mut best);
        best
    }

    fn nearest_rec(
        &self,
        node: usize,
        q: &[f64; 3],
        accept: &impl Fn(usize) -> bool,
        best: &mut Option<Neighbor>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[start..end] {
                    let idx = idx as usize;
                    if !accept(idx) {
                        continue;
                    }
                    let cand = Neighbor {
                        index: idx,
                        dist2: dist2(q, &self.coords[idx]),
                    };
                    if best.is_none_or(|b| cand.key_cmp(&b) == Ordering::Less) {
                        *best = Some(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_rec(near, q, accept, best);
                // Equal plane distance is still visited so a lower-index tie can win.
                if best.is_none_or(|b| diff * diff <= b.dist2) {
                    self.nearest_rec(far, q, accept, best);
                }
            }
        }
    }

    /// The `k` nearest points sorted by (distance, index).
    pub fn k_nearest(&self, query: &Point, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let q = [query.x, query.y, query.z];
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, &q, k, &mut heap);
        let mut out: Vec<Neighbor> = heap.into_iter().map(|e| e.0).collect();
        out.sort_by(|a, b| a.key_cmp(b));
        out
    }

    fn knn_rec(&self, node: usize, q: &[f64; 3], k: usize, heap: &mut BinaryHeap<HeapEntry>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[start..end] {
                    let idx = idx as usize;
                    let cand = Neighbor {
                        index: idx,
                        dist2: dist2(q, &self.coords[idx]),
                    };
                    if heap.len() < k {
                        heap.push(HeapEntry(cand));
                    } else if let Some(worst) = heap.peek() {
                        if cand.key_cmp(&worst.0) == Ordering::Less {
                            heap.pop();
                            heap.push(HeapEntry(cand));
                        }
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_rec(near, q, k, heap);
                let visit = heap.len() < k || heap.peek().is_some_and(|w| diff * diff <= w.0.dist2);
                if visit {
                    self.knn_rec(far, q, k, heap);
                }
            }
        }
    }

    /// All points with squared distance `<= radius²`, sorted by (distance, index).
    pub fn within_radius(&self, query: &Point, radius: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        if self.nodes.is_empty() || radius < 0.0 {
            return out;
        }
        let q = [query.x, query.y, query.z];
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    for &idx in &self.order[start..end] {
                        let idx = idx as usize;
                        let d2 = dist2(&q, &self.coords[idx]);
                        if d2 <= r2 {
                            out.push(Neighbor {
                                index: idx,
                                dist2: d2,
                            });
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let diff = q[axis] - value;
                    if diff <= 0.0 || diff * diff <= r2 {
                        stack.push(left);
                    }
                    if diff > 0.0 || diff * diff <= r2 {
                        stack.push(right);
                    }
                }
            }
        }
        out.sort_by(|a, b| a.key_cmp(b));
        out
    }
}

// Points in the left subtree have coordinate <= value, right subtree >= value.
fn build(
    coords: &[[f64; 3]],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let slice = &mut order[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in slice.iter() {
        let c = coords[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    if hi[axis] - lo[axis] <= 0.0 {
        // All points coincide.
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        coords[a as usize][axis].total_cmp(&coords[b as usize][axis])
    });
    let value = coords[slice[mid] as usize][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build(coords, order, start, start + mid, nodes);
    let right = build(coords, order, start + mid, end, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}
