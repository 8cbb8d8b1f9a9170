//! A box-decomposition tree: midpoint splits with a shrink (inner-box)
//! rule, bucket leaves, priority search for approximate k-nearest
//! neighbors, and exact range counting.
//!
//! Build rule. Each node owns an axis-aligned cell containing all points
//! of its subtree. An internal node either splits its cell at the
//! midpoint of the longest side (ties toward the lower axis index; points
//! on the threshold go to the lower child), or, when more than 3/4 of the
//! points would land in one midpoint child, shrinks to an inner box found
//! by repeated midpoint halving of the tight bounding box. Both children
//! of every internal node then hold at most 3/4 of its points, except
//! that a cluster of exactly coincident points becomes a leaf directly.
//! Consequently `depth <= log_{4/3}(n / bucket_size) + 2`, i.e. at most
//! `2.41 log2(n / bucket_size) + 2`.
//!
//! Search contract. `search_kann(q, k, eps)` visits leaf cells in
//! nondecreasing order of cell distance (ties by node creation order) and
//! stops once the next cell is farther than `r_k / (1 + eps)`, where
//! `r_k` is the current k-th candidate distance. On return, every point
//! that was never visited lies at distance strictly greater than
//! `r_k / (1 + eps)` from the query, and the i-th returned neighbor is a
//! `(1+eps)`-approximate i-th nearest neighbor.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::point::{sq_dist, Neighbor, PointSet};

/// Default number of points a leaf may hold.
pub const DEFAULT_BUCKET_SIZE: usize = 8;

/// Extra shrink factor applied to the termination radius by the
/// fault-injection mode: the search stops early on purpose so that the
/// visit contract demonstrably breaks (negative control for audits).
const FAULT_PREMATURE_FACTOR: f64 = 4.0;

#[derive(Debug, Clone)]
enum Node {
    Split {
        axis: usize,
        threshold: f64,
        low: usize,
        high: usize,
    },
    Shrink {
        inner_lo: Vec<f64>,
        inner_hi: Vec<f64>,
        inside: usize,
        outside: usize,
    },
    Leaf {
        start: usize,
        len: usize,
    },
}

/// Search tree over one (owned) point set.
#[derive(Debug, Clone)]
pub struct KannTree {
    points: PointSet,
    nodes: Vec<Node>,
    root: usize,
    /// Permutation of point indices; every leaf owns a contiguous range.
    order: Vec<usize>,
    root_lo: Vec<f64>,
    root_hi: Vec<f64>,
    bucket_size: usize,
    depth: usize,
}

/// Visit instrumentation returned by [`KannTree::search_kann_instrumented`].
#[derive(Debug, Clone)]
pub struct SearchStats {
    /// Indices of all points whose true distance was computed, in scan
    /// order. Everything else is "unvisited" for the visit contract.
    pub visited: Vec<usize>,
    /// Number of cells popped from the priority queue.
    pub cells_popped: usize,
}

impl KannTree {
    /// Builds a tree over `points` (which the tree takes ownership of).
    pub fn build(points: PointSet, bucket_size: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if bucket_size == 0 {
            return Err(Error::invalid("bucket_size", "must be >= 1"));
        }
        let (root_lo, root_hi) = points.bounding_box()?;
        let mut builder = Builder {
            points: &points,
            nodes: Vec::new(),
            order: (0..points.n()).collect(),
            bucket_size,
            max_depth: 0,
        };
        let root = builder.build_node(&root_lo, &root_hi, 0, points.n(), 0);
        let (nodes, order, depth) = (builder.nodes, builder.order, builder.max_depth);
        Ok(KannTree {
            points,
            nodes,
            root,
            order,
            root_lo,
            root_hi,
            bucket_size,
            depth,
        })
    }

    pub fn n(&self) -> usize {
        self.points.n()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn bucket_size(&self) -> usize {
        self.bucket_size
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Bounding box of the indexed points.
    pub fn bounding_box(&self) -> (&[f64], &[f64]) {
        (&self.root_lo, &self.root_hi)
    }

    /// The k approximate nearest neighbors of `q`, sorted by
    /// (distance, index). With `epsilon = 0` the result is exactly the
    /// brute-force answer, including index tie-breaks.
    pub fn search_kann(&self, q: &[f64], k: usize, epsilon: f64) -> Result<Vec<Neighbor>> {
        self.search_impl(q, k, epsilon, false).map(|(nb, _)| nb)
    }

    /// Like [`search_kann`](Self::search_kann) but also reports which
    /// points were visited. `fault_premature_stop` divides the
    /// termination radius by an extra factor of 4, deliberately breaking
    /// the visit contract; it exists as a negative control so audits can
    /// prove they detect a faulty search.
    pub fn search_kann_instrumented(
        &self,
        q: &[f64],
        k: usize,
        epsilon: f64,
        fault_premature_stop: bool,
    ) -> Result<(Vec<Neighbor>, SearchStats)> {
        self.search_impl(q, k, epsilon, fault_premature_stop)
    }

    fn search_impl(
        &self,
        q: &[f64],
        k: usize,
        epsilon: f64,
        fault: bool,
    ) -> Result<(Vec<Neighbor>, SearchStats)> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: q.len(),
            });
        }
        if k == 0 || k > self.n() {
            return Err(Error::InvalidK { k, n: self.n() });
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid("epsilon", "must be a finite real >= 0"));
        }
        let divisor = (1.0 + epsilon) * if fault { FAULT_PREMATURE_FACTOR } else { 1.0 };

        let mut heap: BinaryHeap<HeapCell> = BinaryHeap::new();
        heap.push(HeapCell {
            dist2: box_sq_dist(q, &self.root_lo, &self.root_hi),
            node: self.root,
            lo: self.root_lo.clone(),
            hi: self.root_hi.clone(),
        });
        // Max-heap of the k best candidates so far, worst on top.
        let mut best: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let mut stats = SearchStats {
            visited: Vec::new(),
            cells_popped: 0,
        };

        while let Some(cell) = heap.pop() {
            stats.cells_popped += 1;
            if best.len() == k {
                let r_k = best.peek().unwrap().dist2.sqrt();
                if cell.dist2.sqrt() > r_k / divisor {
                    break;
                }
            }
            match &self.nodes[cell.node] {
                Node::Leaf { start, len } => {
                    for &idx in &self.order[*start..*start + *len] {
                        stats.visited.push(idx);
                        let d2 = sq_dist(self.points.point(idx), q);
                        let cand = Candidate { dist2: d2, index: idx };
                        if best.len() < k {
                            best.push(cand);
                        } else if cand < *best.peek().unwrap() {
                            best.pop();
                            best.push(cand);
                        }
                    }
                }
                Node::Split {
                    axis,
                    threshold,
                    low,
                    high,
                } => {
                    let mut low_hi = cell.hi.clone();
                    low_hi[*axis] = *threshold;
                    heap.push(HeapCell {
                        dist2: box_sq_dist(q, &cell.lo, &low_hi),
                        node: *low,
                        lo: cell.lo.clone(),
                        hi: low_hi,
                    });
                    let mut high_lo = cell.lo;
                    high_lo[*axis] = *threshold;
                    heap.push(HeapCell {
                        dist2: box_sq_dist(q, &high_lo, &cell.hi),
                        node: *high,
                        lo: high_lo,
                        hi: cell.hi,
                    });
                }
                Node::Shrink {
                    inner_lo,
                    inner_hi,
                    inside,
                    outside,
                } => {
                    heap.push(HeapCell {
                        dist2: box_sq_dist(q, inner_lo, inner_hi),
                        node: *inside,
                        lo: inner_lo.clone(),
                        hi: inner_hi.clone(),
                    });
                    // The outer child keeps the parent cell; the hole is
                    // ignored for the bound, which stays a valid lower
                    // bound on the distance to any of its points.
                    heap.push(HeapCell {
                        dist2: cell.dist2,
                        node: *outside,
                        lo: cell.lo,
                        hi: cell.hi,
                    });
                }
            }
        }

        let out: Vec<Neighbor> = best
            .into_sorted_vec()
            .into_iter()
            .map(|c| Neighbor {
                index: c.index,
                dist: c.dist2.sqrt(),
            })
            .collect();
        debug_assert!(out.len() == k);
        debug_assert!(out.windows(2).all(|w| w[0].dist <= w[1].dist));
        Ok((out, stats))
    }

    /// Indices of all points within distance `r` of `q` (closed ball),
    /// ascending. Exact: agrees with a linear scan using the same
    /// `dist(x, q) <= r` predicate.
    pub fn range_search(&self, q: &[f64], r: f64) -> Result<Vec<usize>> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: q.len(),
            });
        }
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::invalid("r", "must be a finite real >= 0"));
        }
        let mut out = Vec::new();
        let mut stack = vec![(self.root, self.root_lo.clone(), self.root_hi.clone())];
        while let Some((node, lo, hi)) = stack.pop() {
            if box_sq_dist(q, &lo, &hi).sqrt() > r {
                continue;
            }
            match &self.nodes[node] {
                Node::Leaf { start, len } => {
                    for &idx in &self.order[*start..*start + *len] {
                        if sq_dist(self.points.point(idx), q).sqrt() <= r {
                            out.push(idx);
                        }
                    }
                }
                Node::Split {
                    axis,
                    threshold,
                    low,
                    high,
                } => {
                    let mut low_hi = hi.clone();
                    low_hi[*axis] = *threshold;
                    let mut high_lo = lo.clone();
                    high_lo[*axis] = *threshold;
                    stack.push((*low, lo, low_hi));
                    stack.push((*high, high_lo, hi));
                }
                Node::Shrink {
                    inner_lo,
                    inner_hi,
                    inside,
                    outside,
                } => {
                    stack.push((*inside, inner_lo.clone(), inner_hi.clone()));
                    stack.push((*outside, lo, hi));
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Structural self-check used by tests and the verification command:
    /// every point sits in exactly one leaf, inside every ancestor cell,
    /// leaves respect the bucket size unless they hold coincident points,
    /// and the depth honors the documented bound.
    #[doc(hidden)]
    pub fn validate_structure(&self) -> std::result::Result<(), String> {
        let mut seen = vec![false; self.n()];
        let mut stack = vec![(self.root, self.root_lo.clone(), self.root_hi.clone(), 0usize)];
        let mut max_depth = 0usize;
        while let Some((node, lo, hi, depth)) = stack.pop() {
            max_depth = max_depth.max(depth);
            match &self.nodes[node] {
                Node::Leaf { start, len } => {
                    let bucket = &self.order[*start..*start + *len];
                    if bucket.is_empty() {
                        return Err("empty leaf".into());
                    }
                    let first = self.points.point(bucket[0]);
                    let coincident = bucket
                        .iter()
                        .all(|&i| self.points.point(i) == first);
                    if bucket.len() > self.bucket_size && !coincident {
                        return Err(format!("overfull non-coincident leaf of {}", bucket.len()));
                    }
                    for &idx in bucket {
                        if seen[idx] {
                            return Err(format!("point {idx} in two leaves"));
                        }
                        seen[idx] = true;
                        let p = self.points.point(idx);
                        for a in 0..self.dim() {
                            if p[a] < lo[a] || p[a] > hi[a] {
                                return Err(format!("point {idx} outside its cell on axis {a}"));
                            }
                        }
                    }
                }
                Node::Split {
                    axis,
                    threshold,
                    low,
                    high,
                } => {
                    let mut low_hi = hi.clone();
                    low_hi[*axis] = *threshold;
                    let mut high_lo = lo.clone();
                    high_lo[*axis] = *threshold;
                    stack.push((*low, lo, low_hi, depth + 1));
                    stack.push((*high, high_lo, hi, depth + 1));
                }
                Node::Shrink {
                    inner_lo,
                    inner_hi,
                    inside,
                    outside,
                } => {
                    for a in 0..self.dim() {
                        if inner_lo[a] < lo[a] || inner_hi[a] > hi[a] {
                            return Err("inner box leaks outside its cell".into());
                        }
                    }
                    stack.push((*inside, inner_lo.clone(), inner_hi.clone(), depth + 1));
                    stack.push((*outside, lo, hi, depth + 1));
                }
            }
        }
        if let Some(idx) = seen.iter().position(|s| !s) {
            return Err(format!("point {idx} not in any leaf"));
        }
        if max_depth != self.depth {
            return Err(format!("recorded depth {} != walked {max_depth}", self.depth));
        }
        let ratio = (self.n() as f64 / self.bucket_size as f64).max(2.0);
        let bound = (2.41 * ratio.log2()).ceil() as usize + 2;
        if max_depth > bound {
            return Err(format!("depth {max_depth} exceeds bound {bound}"));
        }
        Ok(())
    }
}

struct Builder<'a> {
    points: &'a PointSet,
    nodes: Vec<Node>,
    order: Vec<usize>,
    bucket_size: usize,
    max_depth: usize,
}

impl Builder<'_> {
    fn build_node(
        &mut self,
        cell_lo: &[f64],
        cell_hi: &[f64],
        start: usize,
        end: usize,
        depth: usize,
    ) -> usize {
        let cnt = end - start;
        self.max_depth = self.max_depth.max(depth);
        if cnt <= self.bucket_size || self.all_coincident(start, end) {
            return self.push(Node::Leaf { start, len: cnt });
        }

        // Midpoint split of the cell along its longest side.
        let axis = longest_axis(cell_lo, cell_hi);
        let threshold = 0.5 * (cell_lo[axis] + cell_hi[axis]);
        let mid = self.partition(start, end, |p| p[axis] <= threshold);
        let (n_low, n_high) = (mid - start, end - mid);

        if 4 * n_low.max(n_high) > 3 * cnt {
            // Too lopsided: shrink to an inner box around the dense
            // cluster instead of splitting.
            let (inner_lo, inner_hi) = self.centroid_box(start, end);
            let mid = self.partition(start, end, |p| contains(&inner_lo, &inner_hi, p));
            debug_assert!(mid > start && mid < end);
            let id = self.push(Node::Leaf { start: 0, len: 0 }); // placeholder
            let inside = self.build_node(&inner_lo, &inner_hi, start, mid, depth + 1);
            let outside = self.build_node(cell_lo, cell_hi, mid, end, depth + 1);
            self.nodes[id] = Node::Shrink {
                inner_lo,
                inner_hi,
                inside,
                outside,
            };
            id
        } else {
            let mut low_hi = cell_hi.to_vec();
            low_hi[axis] = threshold;
            let mut high_lo = cell_lo.to_vec();
            high_lo[axis] = threshold;
            let id = self.push(Node::Leaf { start: 0, len: 0 }); // placeholder
            let low = self.build_node(cell_lo, &low_hi, start, mid, depth + 1);
            let high = self.build_node(&high_lo, cell_hi, mid, end, depth + 1);
            self.nodes[id] = Node::Split {
                axis,
                threshold,
                low,
                high,
            };
            id
        }
    }

    /// Finds the inner box for a shrink node: starting from all points of
    /// the range, repeatedly take the tight bounding box, halve it along
    /// its longest side, and keep the fuller half (ties toward the lower
    /// half), until at most 3/4 of the range's points remain. A cluster
    /// of coincident points that never separates is returned as its own
    /// (degenerate) box. The returned box contains exactly the surviving
    /// points of the range.
    fn centroid_box(&self, start: usize, end: usize) -> (Vec<f64>, Vec<f64>) {
        let total = end - start;
        let mut cur: Vec<usize> = self.order[start..end].to_vec();
        loop {
            let (lo, hi) = bbox_of(self.points, &cur);
            if 4 * cur.len() <= 3 * total {
                return (lo, hi);
            }
            let axis = longest_axis(&lo, &hi);
            if hi[axis] <= lo[axis] {
                // Zero extent on every axis: coincident cluster.
                return (lo, hi);
            }
            let threshold = 0.5 * (lo[axis] + hi[axis]);
            let (mut low, mut high) = (Vec::new(), Vec::new());
            for &idx in &cur {
                if self.points.point(idx)[axis] <= threshold {
                    low.push(idx);
                } else {
                    high.push(idx);
                }
            }
            debug_assert!(!low.is_empty() && !high.is_empty());
            cur = if low.len() >= high.len() { low } else { high };
        }
    }

    fn all_coincident(&self, start: usize, end: usize) -> bool {
        let first = self.points.point(self.order[start]);
        self.order[start + 1..end]
            .iter()
            .all(|&i| self.points.point(i) == first)
    }

    /// Partitions `order[start..end]` so that points satisfying `pred`
    /// come first; returns the split position.
    fn partition(&mut self, start: usize, end: usize, pred: impl Fn(&[f64]) -> bool) -> usize {
        let mut mid = start;
        for i in start..end {
            if pred(self.points.point(self.order[i])) {
                self.order.swap(mid, i);
                mid += 1;
            }
        }
        mid
    }

    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }
}

fn longest_axis(lo: &[f64], hi: &[f64]) -> usize {
    let mut best = 0;
    let mut best_ext = hi[0] - lo[0];
    for a in 1..lo.len() {
        let ext = hi[a] - lo[a];
        if ext > best_ext {
            best = a;
            best_ext = ext;
        }
    }
    best
}

fn bbox_of(points: &PointSet, idxs: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut lo = points.point(idxs[0]).to_vec();
    let mut hi = lo.clone();
    for &i in &idxs[1..] {
        for (a, v) in points.point(i).iter().enumerate() {
            if *v < lo[a] {
                lo[a] = *v;
            }
            if *v > hi[a] {
                hi[a] = *v;
            }
        }
    }
    (lo, hi)
}

fn contains(lo: &[f64], hi: &[f64], p: &[f64]) -> bool {
    p.iter()
        .enumerate()
        .all(|(a, v)| *v >= lo[a] && *v <= hi[a])
}

/// Squared distance from `q` to the closed box `[lo, hi]`, accumulated in
/// axis order (matching `sq_dist`, so a point's computed distance never
/// falls below its cell's computed distance).
fn box_sq_dist(q: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut acc = 0.0;
    for a in 0..q.len() {
        let off = if q[a] < lo[a] {
            lo[a] - q[a]
        } else if q[a] > hi[a] {
            q[a] - hi[a]
        } else {
            0.0
        };
        acc += off * off;
    }
    acc
}

/// Priority-queue cell: min-heap by (distance, creation order).
struct HeapCell {
    dist2: f64,
    node: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PartialEq for HeapCell {
    fn eq(&self, other: &Self) -> bool {
        self.dist2 == other.dist2 && self.node == other.node
    }
}
impl Eq for HeapCell {}
impl PartialOrd for HeapCell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapCell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Reversed so BinaryHeap pops the nearest cell; ties broken by
        // node creation order.
        other
            .dist2
            .total_cmp(&self.dist2)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Candidate point: max-heap by (distance, index), so the worst candidate
/// (largest distance, then largest index) sits on top.
struct Candidate {
    dist2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.dist2 == other.dist2 && self.index == other.index
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then_with(|| self.index.cmp(&other.index))
    }
}
