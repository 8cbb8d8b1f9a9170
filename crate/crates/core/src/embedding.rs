//! Randomized linear maps into a lower dimension, together with the
//! closed-form expressions that size the target dimension.
//!
//! The sampled matrix `A` (source_dim x target_dim) is normalized so that
//! the composed map `f(p) = scale * A^T p` with `scale = sqrt(d/d')`
//! preserves squared norms in expectation:
//!
//! * gaussian mode draws entries iid `N(0, 1/d)`, so `E||A^T p||^2 =
//!   (d'/d)||p||^2`;
//! * orthonormal mode orthonormalizes gaussian draws column by column, so
//!   `||A^T p||^2` is the squared norm of the projection of `p` onto a
//!   uniformly random `d'`-dimensional subspace, with the same expectation.
//!
//! All randomness comes from `ChaCha8Rng` seeded with a caller-provided
//! `u64`; identical `(dims, mode, seed)` reproduce bit-identical matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::point::PointSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMode {
    /// Entries iid gaussian; distances are preserved only in expectation.
    Gaussian,
    /// Columns orthonormalized by Gram-Schmidt; at `target_dim ==
    /// source_dim` the map is an exact isometry.
    Orthonormal,
}

/// A sampled linear map from `R^source_dim` to `R^target_dim`.
#[derive(Debug, Clone)]
pub struct ProjectionMap {
    source_dim: usize,
    target_dim: usize,
    mode: ProjectionMode,
    seed: u64,
    scale: f64,
    /// Column-major storage: `cols[j*source_dim..(j+1)*source_dim]`
    /// is the j-th column of `A`.
    cols: Vec<f64>,
}

/// Norm threshold below which a Gram-Schmidt column counts as linearly
/// dependent on its predecessors. Raw columns have norm ~1, so anything
/// this small is numerically rank-deficient.
const GRAM_SCHMIDT_TOL: f64 = 1e-12;

impl ProjectionMap {
    /// Samples a fresh map. Requires `1 <= target_dim <= source_dim`.
    pub fn sample(
        source_dim: usize,
        target_dim: usize,
        mode: ProjectionMode,
        seed: u64,
    ) -> Result<Self> {
        if source_dim == 0 {
            return Err(Error::invalid("source_dim", "must be >= 1"));
        }
        if target_dim == 0 || target_dim > source_dim {
            return Err(Error::invalid(
                "target_dim",
                format!("must satisfy 1 <= target_dim <= source_dim ({source_dim})"),
            ));
        }
        let mut attempt_seed = seed;
        loop {
            let mut cols = gaussian_columns(source_dim, target_dim, attempt_seed);
            let ok = match mode {
                ProjectionMode::Gaussian => true,
                ProjectionMode::Orthonormal => orthonormalize(&mut cols, source_dim, target_dim),
            };
            if ok {
                return Ok(ProjectionMap {
                    source_dim,
                    target_dim,
                    mode,
                    seed,
                    scale: (source_dim as f64 / target_dim as f64).sqrt(),
                    cols,
                });
            }
            // Rank deficiency has probability zero for continuous draws;
            // retry deterministically from the next seed.
            attempt_seed = attempt_seed.wrapping_add(1);
        }
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn mode(&self) -> ProjectionMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `sqrt(source_dim / target_dim)`; satisfies
    /// `scale^2 * target_dim == source_dim` up to rounding.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The j-th column of `A`.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j * self.source_dim..(j + 1) * self.source_dim]
    }

    /// Applies the map: `f(p) = scale * A^T p`.
    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.source_dim {
            return Err(Error::DimensionMismatch {
                expected: self.source_dim,
                got: p.len(),
            });
        }
        let mut out = Vec::with_capacity(self.target_dim);
        for j in 0..self.target_dim {
            let col = self.column(j);
            let mut acc = 0.0;
            for i in 0..self.source_dim {
                acc += col[i] * p[i];
            }
            out.push(self.scale * acc);
        }
        Ok(out)
    }

    /// Projects every point of a set, preserving order.
    pub fn project_set(&self, points: &PointSet) -> Result<PointSet> {
        if points.dim() != self.source_dim {
            return Err(Error::DimensionMismatch {
                expected: self.source_dim,
                got: points.dim(),
            });
        }
        let mut out = PointSet::with_capacity(self.target_dim, points.n());
        for p in points.iter() {
            out.push(&self.project(p)?);
        }
        Ok(out)
    }
}

fn gaussian_columns(source_dim: usize, target_dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv_sqrt_d = 1.0 / (source_dim as f64).sqrt();
    let mut cols = Vec::with_capacity(source_dim * target_dim);
    for _ in 0..source_dim * target_dim {
        let g: f64 = rng.sample(StandardNormal);
        cols.push(g * inv_sqrt_d);
    }
    cols
}

/// Classical Gram-Schmidt with one re-orthogonalization pass; returns
/// false if any column is numerically dependent on its predecessors.
fn orthonormalize(cols: &mut [f64], d: usize, d_prime: usize) -> bool {
    for j in 0..d_prime {
        for _pass in 0..2 {
            for prev in 0..j {
                let dot: f64 = (0..d).map(|i| cols[j * d + i] * cols[prev * d + i]).sum();
                for i in 0..d {
                    cols[j * d + i] -= dot * cols[prev * d + i];
                }
            }
        }
        let norm: f64 = (0..d)
            .map(|i| cols[j * d + i] * cols[j * d + i])
            .sum::<f64>()
            .sqrt();
        if norm < GRAM_SCHMIDT_TOL {
            return false;
        }
        for i in 0..d {
            cols[j * d + i] /= norm;
        }
    }
    true
}

/// Inputs to [`target_dimension`]: the instance size and accuracy knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionParams {
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Approximation factor of the search structure the embedding feeds;
    /// enters only through `beta` and `gamma`.
    pub c: f64,
}

impl DimensionParams {
    pub fn new(n: usize, k: usize, epsilon: f64, delta: f64, c: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "must be >= 1"));
        }
        if k == 0 || k > n {
            return Err(Error::InvalidK { k, n });
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid("epsilon", "must lie in (0, 1)"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid("delta", "must lie in (0, 1)"));
        }
        if !(c >= 1.0) {
            return Err(Error::invalid("c", "must be >= 1"));
        }
        Ok(DimensionParams {
            n,
            k,
            epsilon,
            delta,
            c,
        })
    }

    /// `c * (1 + epsilon/2)`, the inner distance threshold.
    pub fn beta(&self) -> f64 {
        self.c * (1.0 + self.epsilon / 2.0)
    }

    /// `c * (1 + epsilon)`, the outer distance threshold.
    pub fn gamma(&self) -> f64 {
        self.c * (1.0 + self.epsilon)
    }
}

/// `t^2 - 2 ln t - 1`: strictly positive for `t != 1`, zero at `t = 1`.
#[inline]
fn sq_log_gap(t: f64) -> f64 {
    t * t - 2.0 * t.ln() - 1.0
}

/// Smallest target dimension for which the failure probability of
/// retrieving a `(1+epsilon)`-approximate neighbor among `k` candidates
/// stays below `delta`:
///
/// `d' = ceil( 2 ln(2n / (delta k)) / (beta^2/gamma^2 - 1 - 2 ln(beta/gamma)) )`.
///
/// Nondecreasing in `n`, nonincreasing in `k` and `delta`.
pub fn target_dimension(params: &DimensionParams) -> Result<usize> {
    let ratio = params.beta() / params.gamma();
    let den = sq_log_gap(ratio);
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::Numeric(format!(
            "degenerate denominator {den} for beta/gamma = {ratio}"
        )));
    }
    let num = 2.0 * (2.0 * params.n as f64 / (params.delta * params.k as f64)).ln();
    if !num.is_finite() {
        return Err(Error::Numeric("non-finite numerator".into()));
    }
    Ok(((num / den).ceil() as isize).max(1) as usize)
}

/// Target dimension under a bounded-expansion assumption on the data:
/// `d' = ceil( 40 ln(c + 2 rho / (k delta)) / epsilon^2 )`.
///
/// `c` must exceed 1; `delta` may be any value in `(0, 1]`.
pub fn target_dimension_expansion(
    c: f64,
    rho: usize,
    k: usize,
    epsilon: f64,
    delta: f64,
) -> Result<usize> {
    if !(c > 1.0) {
        return Err(Error::invalid("c", "must be > 1"));
    }
    if rho == 0 {
        return Err(Error::invalid("rho", "must be >= 1"));
    }
    if k == 0 {
        return Err(Error::invalid("k", "must be >= 1"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("epsilon", "must lie in (0, 1)"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid("delta", "must lie in (0, 1]"));
    }
    let v = 40.0 * (c + 2.0 * rho as f64 / (k as f64 * delta)).ln() / (epsilon * epsilon);
    Ok((v.ceil() as isize).max(1) as usize)
}

/// The dimension heuristic used by the experiments:
/// `d' = ceil(ln n / ln ln n)` (natural logarithms). Requires `n >= 16`
/// so that the inner logarithm is safely positive.
pub fn heuristic_dimension(n: usize) -> Result<usize> {
    if n < 16 {
        return Err(Error::invalid("n", "must be >= 16"));
    }
    let ln_n = (n as f64).ln();
    Ok((ln_n / ln_n.ln()).ceil() as usize)
}

/// Upper bound on the probability that a random projection contracts
/// (`beta < 1`) or expands (`beta > 1`) a unit vector's squared norm past
/// `beta^2 * d'/d`:
///
/// `exp( (d'/2) * (1 - beta^2 + 2 ln beta) )`.
pub fn tail_bound(beta: f64, d_prime: usize) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invalid("beta", "must be a positive real"));
    }
    if d_prime == 0 {
        return Err(Error::invalid("d_prime", "must be >= 1"));
    }
    Ok(((d_prime as f64 / 2.0) * (1.0 - beta * beta + 2.0 * beta.ln())).exp())
}

/// Margin by which the geometric tail-bound sum dominates its budget at
/// scale index `i >= 0`:
///
/// `[t^2 - 2 ln t - 1] - 0.05 (i+1) eps^2` with
/// `t = (1 + eps/2) / (2^i (1 + eps))`.
///
/// Positive for all `i >= 0` and `eps` in `(0, 1)`.
pub fn lemma_gap_i(i: u32, epsilon: f64) -> f64 {
    debug_assert!(epsilon > 0.0 && epsilon < 1.0);
    let t = (1.0 + epsilon / 2.0) / (2f64.powi(i as i32) * (1.0 + epsilon));
    sq_log_gap(t) - 0.05 * (i as f64 + 1.0) * epsilon * epsilon
}

/// Margin between the contraction exponents at radii `1 + x` and
/// `(1 + x)/(1 + 2x)`; positive for all `x > 0`. Mathematically equal to
///
/// `[(1+x)^2 - 2 ln(1+x) - 1] - [(1+x)^2/(1+2x)^2 - 2 ln((1+x)/(1+2x)) - 1]`.
///
/// The gap is `(20/3) x^3 + O(x^4)` near zero while each bracket is
/// `O(x)`, so any evaluation that forms the brackets (or even the
/// combined `4x(1+x)^3/(1+2x)^2 - 2 ln(1+2x)`) cancels away all
/// significant digits for small `x`. Both terms share the expansion
/// `4x - 4x^2 + O(x^3)`; subtracting that prefix from each analytically
/// gives the exactly equivalent
///
/// `4x^3 (3 + 5x) / (1+2x)^2  -  2 [ln(1+2x) - 2x + 2x^2]`
///
/// whose halves are both `O(x^3)`, so the final subtraction is benign.
/// The bracketed log remainder is itself summed by series for small
/// arguments (see `ln_remainder` below).
pub fn lemma_gap_x(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let u = 2.0 * x;
    let one_p2x = 1.0 + u;
    4.0 * x * x * x * (3.0 + 5.0 * x) / (one_p2x * one_p2x) - 2.0 * ln_remainder(u)
}

/// `ln(1+u) - u + u^2/2` for `u >= 0` without cancellation: for small
/// `u` the direct form subtracts two nearly equal `O(u)` quantities to
/// produce an `O(u^3)` result, so there it is summed as the tail of the
/// log series, `sum_{j>=3} (-1)^(j+1) u^j / j`.
fn ln_remainder(u: f64) -> f64 {
    debug_assert!(u >= 0.0);
    if u < 0.25 {
        let mut term = u * u * u;
        let mut j = 3.0;
        let mut acc = 0.0;
        loop {
            let add = term / j * if j as u64 % 2 == 1 { 1.0 } else { -1.0 };
            acc += add;
            if add.abs() <= acc.abs() * f64::EPSILON {
                return acc;
            }
            term *= u;
            j += 1.0;
        }
    } else {
        u.ln_1p() - u + 0.5 * u * u
    }
}
