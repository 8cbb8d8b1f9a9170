//! The full pipeline: project the data once with a random linear map,
//! build the search tree in the projected space, and answer queries by
//! re-ranking the projected candidates by their original distances.
//!
//! A query therefore costs one projection of the query point, one
//! approximate k-nearest-neighbor search in `dim_proj` dimensions, and
//! at most `k` exact distance evaluations in the original space. The
//! projection dimension and the candidate count `k` are chosen by
//! pluggable rules ([`DPrimeRule`], [`KRule`]); with the guarantee rule
//! the candidate list contains an exact nearest neighbor with
//! probability at least `1 - delta`, so the re-ranked answer is within
//! `(1 + epsilon)` of optimal that often.

use crate::embedding::{
    heuristic_dimension, target_dimension, target_dimension_expansion, DimensionParams,
    ProjectionMap, ProjectionMode,
};
use crate::error::{Error, Result};
use crate::point::{dist, Neighbor, PointSet};
use crate::tree::{KannTree, DEFAULT_BUCKET_SIZE};

/// How many candidates the projected-space search returns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KRule {
    /// A fixed candidate count.
    Explicit(usize),
    /// `k = ceil(n^rho)` for a sublinearity exponent `rho` in `(0, 1]`.
    NPowRho(f64),
    /// `k = ceil(sqrt(n))`.
    SqrtN,
    /// `k = ceil(ln n)`.
    LnN,
}

impl KRule {
    pub fn resolve(&self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::EmptyPointSet);
        }
        let k = match *self {
            KRule::Explicit(k) => {
                if k == 0 || k > n {
                    return Err(Error::InvalidK { k, n });
                }
                k
            }
            KRule::NPowRho(rho) => {
                if !(rho > 0.0 && rho <= 1.0) {
                    return Err(Error::invalid("rho", "must lie in (0, 1]"));
                }
                (n as f64).powf(rho).ceil() as usize
            }
            KRule::SqrtN => (n as f64).sqrt().ceil() as usize,
            KRule::LnN => (n as f64).ln().ceil() as usize,
        };
        Ok(k.clamp(1, n))
    }
}

/// How the projection dimension is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DPrimeRule {
    /// A fixed dimension.
    Explicit(usize),
    /// The failure-budget formula: large enough that a query's
    /// candidate list misses all true nearest neighbors with
    /// probability at most `delta`.
    Guarantee,
    /// `ceil(ln n / ln ln n)`: the aggressive small default used by the
    /// experiments.
    Heuristic,
    /// The bounded-growth formula for sets whose doubling rate is at
    /// most `c` on balls holding at least `rho` points.
    Expansion { c: f64, rho: usize },
}

impl DPrimeRule {
    pub fn resolve(&self, n: usize, k: usize, epsilon: f64, delta: f64) -> Result<usize> {
        match *self {
            DPrimeRule::Explicit(d) => {
                if d == 0 {
                    return Err(Error::invalid("dim_proj", "must be >= 1"));
                }
                Ok(d)
            }
            DPrimeRule::Guarantee => {
                // The scale constant cancels out of the formula; pin it
                // to 1 + epsilon, the exclusion-zone scale.
                target_dimension(&DimensionParams::new(n, k, epsilon, delta, 1.0 + epsilon)?)
            }
            DPrimeRule::Heuristic => heuristic_dimension(n),
            DPrimeRule::Expansion { c, rho } => {
                target_dimension_expansion(c, rho, k, epsilon, delta)
            }
        }
    }
}

/// Exponent `rho` for the `k = n^rho` candidate rule: queries stay
/// sublinear in `n` whenever `rho < 1`. Computed as
///
/// `1 - eps^2 / (2 c_t (eps^2 + ln(c_p ln n)))` when `1/eps <= ln n`,
/// `1 - eps^2 / (2 c_t (eps^2 + ln(c_p / eps)))` otherwise,
///
/// for constants `c_t >= 1`, `c_p > 1`. The result must land in
/// `(0, 1)`; anything else reports a numeric error.
pub fn rho_exponent(n: usize, epsilon: f64, c_t: f64, c_p: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("n", "must be >= 2"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("epsilon", "must lie in (0, 1)"));
    }
    if !(c_t >= 1.0) || !c_t.is_finite() {
        return Err(Error::invalid("c_t", "must be a finite real >= 1"));
    }
    if !(c_p > 1.0) || !c_p.is_finite() {
        return Err(Error::invalid("c_p", "must be a finite real > 1"));
    }
    let ln_n = (n as f64).ln();
    let inner = if 1.0 / epsilon <= ln_n {
        (c_p * ln_n).ln()
    } else {
        (c_p / epsilon).ln()
    };
    let rho = 1.0 - epsilon * epsilon / (2.0 * c_t * (epsilon * epsilon + inner));
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Numeric(format!(
            "sublinearity exponent {rho} fell outside (0, 1)"
        )));
    }
    Ok(rho)
}

/// Configuration for [`build_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnnConfig {
    /// Approximation slack; also the slack of the projected search.
    pub epsilon: f64,
    /// Failure budget used by the dimension rules that take one.
    pub delta: f64,
    pub k_rule: KRule,
    pub dprime_rule: DPrimeRule,
    pub projection_mode: ProjectionMode,
    /// Seed for sampling the projection map.
    pub seed: u64,
}

impl AnnConfig {
    /// The configuration the experiments default to: `sqrt(n)`
    /// candidates, heuristic projection dimension, Gaussian entries.
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Self {
        AnnConfig {
            epsilon,
            delta,
            k_rule: KRule::SqrtN,
            dprime_rule: DPrimeRule::Heuristic,
            projection_mode: ProjectionMode::Gaussian,
            seed,
        }
    }
}

/// How the index's parameters were actually resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildReport {
    pub n: usize,
    pub dim: usize,
    /// Projection dimension the rule asked for.
    pub requested_dim_proj: usize,
    /// Projection dimension in effect (capped at `dim`).
    pub dim_proj: usize,
    /// True when the request exceeded the data dimension and was capped.
    pub clamped: bool,
    /// Candidate count in effect.
    pub k: usize,
}

/// A built index: the projection map, the projected-space tree, and the
/// original points for re-ranking.
#[derive(Debug, Clone)]
pub struct AnnIndex {
    config: AnnConfig,
    map: ProjectionMap,
    tree: KannTree,
    points: PointSet,
    report: BuildReport,
}

/// Answer to one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryResult {
    /// The reported neighbor; `dist` is in the original space.
    pub neighbor: Neighbor,
    /// How many original-space distances were evaluated.
    pub true_distance_evals: usize,
}

/// Projects `points`, builds the tree over the projection, and records
/// how `k` and the projection dimension were resolved. A requested
/// projection dimension above the data dimension is capped (projecting
/// up adds nothing), and the cap is flagged in the report.
pub fn build_index(points: PointSet, config: AnnConfig) -> Result<AnnIndex> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if !(config.epsilon >= 0.0) || !config.epsilon.is_finite() {
        return Err(Error::invalid("epsilon", "must be a finite real >= 0"));
    }
    let (n, dim) = (points.n(), points.dim());
    let k = config.k_rule.resolve(n)?;
    let requested = config
        .dprime_rule
        .resolve(n, k, config.epsilon, config.delta)?;
    let dim_proj = requested.min(dim);
    let report = BuildReport {
        n,
        dim,
        requested_dim_proj: requested,
        dim_proj,
        clamped: requested > dim,
        k,
    };
    let map = ProjectionMap::sample(dim, dim_proj, config.projection_mode, config.seed)?;
    let projected = map.project_set(&points)?;
    let tree = KannTree::build(projected, DEFAULT_BUCKET_SIZE)?;
    Ok(AnnIndex {
        config,
        map,
        tree,
        points,
        report,
    })
}

impl AnnIndex {
    pub fn config(&self) -> &AnnConfig {
        &self.config
    }

    pub fn map(&self) -> &ProjectionMap {
        &self.map
    }

    /// The tree over the projected points.
    pub fn tree(&self) -> &KannTree {
        &self.tree
    }

    /// The original (unprojected) points.
    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn report(&self) -> BuildReport {
        self.report
    }

    /// The k candidates of the projected-space search, with
    /// projected-space distances, sorted by (distance, index).
    pub fn projected_candidates(&self, q: &[f64]) -> Result<Vec<Neighbor>> {
        let f_q = self.map.project(q)?;
        self.tree
            .search_kann(&f_q, self.report.k, self.config.epsilon)
    }

    /// Answers `q` with the candidate closest in the original space.
    pub fn query(&self, q: &[f64]) -> Result<QueryResult> {
        self.query_with_early_stop(q, None)
    }

    /// Like [`query`](Self::query), but when `stop_radius` is given the
    /// scan over candidates (in projected order) returns the first one
    /// whose original distance is within the radius, skipping the
    /// remaining distance evaluations. If none qualifies, the best
    /// candidate is returned as usual.
    pub fn query_with_early_stop(
        &self,
        q: &[f64],
        stop_radius: Option<f64>,
    ) -> Result<QueryResult> {
        if let Some(r) = stop_radius {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::invalid("stop_radius", "must be a finite real >= 0"));
            }
        }
        let candidates = self.projected_candidates(q)?;
        let mut best: Option<Neighbor> = None;
        let mut evals = 0usize;
        for c in &candidates {
            let d = dist(self.points.point(c.index), q);
            evals += 1;
            let better = match &best {
                None => true,
                Some(b) => (d, c.index) < (b.dist, b.index),
            };
            if better {
                best = Some(Neighbor {
                    index: c.index,
                    dist: d,
                });
            }
            if let Some(r) = stop_radius {
                if d <= r {
                    return Ok(QueryResult {
                        neighbor: Neighbor {
                            index: c.index,
                            dist: d,
                        },
                        true_distance_evals: evals,
                    });
                }
            }
        }
        Ok(QueryResult {
            neighbor: best.expect("k >= 1 candidates"),
            true_distance_evals: evals,
        })
    }
}
