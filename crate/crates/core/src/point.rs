use crate::error::{Error, Result};

/// A set of points in `R^dim`, stored row-major in one contiguous buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    /// Wraps a row-major coordinate buffer. `data.len()` must be a
    /// multiple of `dim` and every coordinate must be finite.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(
                "data",
                format!("length {} is not a multiple of dim {}", data.len(), dim),
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "data",
                format!("non-finite coordinate at flat index {i}"),
            ));
        }
        Ok(PointSet { dim, data })
    }

    /// An empty set that points can be appended to.
    pub fn with_capacity(dim: usize, n: usize) -> Self {
        PointSet {
            dim,
            data: Vec::with_capacity(dim * n),
        }
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Appends one point; the caller guarantees matching dimension.
    pub fn push(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim);
        self.data.extend_from_slice(p);
    }

    /// Axis-aligned bounding box `(lo, hi)` of the set.
    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let mut lo = self.point(0).to_vec();
        let mut hi = lo.clone();
        for p in self.iter().skip(1) {
            for (a, (l, h)) in p.iter().zip(lo.iter_mut().zip(hi.iter_mut())) {
                if *a < *l {
                    *l = *a;
                }
                if *a > *h {
                    *h = *a;
                }
            }
        }
        Ok((lo, hi))
    }
}

/// One answer of a neighbor query: the index of the point in the indexed
/// set and its distance to the query. `dist` always recomputes exactly as
/// `dist(points[index], q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist: f64,
}

/// Squared Euclidean distance, accumulated in coordinate order.
///
/// Both the tree's cell bounds and every caller of `dist` accumulate in
/// the same order, which keeps the lower-bound property of cell distances
/// intact under floating-point rounding.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Compares candidate neighbors by (distance, index).
#[inline]
pub(crate) fn cmp_dist_index(a: (f64, usize), b: (f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}
