//! The inherent-k experiment: for each dataset size, project the data
//! and measure the rank the correct answer occupies among the projected
//! neighbors of each query. The per-query rank is the smallest k for
//! which a k-nearest search in the projected space still returns that
//! answer; its growth with n is the quantity the fit command estimates.

use anyhow::{bail, ensure, Result};
use kann::datasets::{gen_gaussian, gen_planted, GaussianSpec, PlantedSpec};
use kann::embedding::{heuristic_dimension, ProjectionMap, ProjectionMode};
use kann::oracle::{eps_nn_set, rank};
use kann::{sq_dist, PointSet};

use crate::record::{ExperimentRecord, RecordContext};

/// Dataset sizes measured when no explicit grid is given.
pub const DEFAULT_N_GRID: &[usize] = &[2000, 4000, 6000, 8000, 10_000, 15_000, 20_000];

/// Mixed into a cell seed to derive projection seeds, so the projection
/// stream never collides with the dataset stream of a nearby cell.
pub const PROJECTION_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Projection seed for repetition `rep` of the cell seeded `cell_seed`.
pub fn projection_seed(cell_seed: u64, rep: u64) -> u64 {
    (cell_seed ^ PROJECTION_SEED_SALT).wrapping_add(rep)
}

/// Which synthetic family an experiment run generates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Queries with one planted neighbor each and far distractors.
    Planted,
    /// A mixture of spherical gaussian clusters centered on the queries.
    Gaussian,
}

impl Family {
    pub fn experiment_name(self) -> &'static str {
        match self {
            Family::Planted => "exp-k-planted",
            Family::Gaussian => "exp-k-gaussian",
        }
    }
}

/// Configuration of one inherent-k run over a grid of dataset sizes.
#[derive(Debug, Clone)]
pub struct ExpKConfig {
    pub family: Family,
    pub n_grid: Vec<usize>,
    pub d: usize,
    pub epsilon: f64,
    pub n_queries: usize,
    /// Planted pair distance (planted family only).
    pub radius: f64,
    /// Projected dimension; `None` applies the heuristic rule per n.
    pub d_prime: Option<usize>,
    /// Independent projections averaged per cell.
    pub proj_reps: u64,
    pub seed: u64,
}

impl ExpKConfig {
    pub fn new(family: Family, d: usize, epsilon: f64, seed: u64) -> Self {
        Self {
            family,
            n_grid: DEFAULT_N_GRID.to_vec(),
            d,
            epsilon,
            n_queries: 100,
            radius: 2.0,
            d_prime: None,
            proj_reps: 1,
            seed,
        }
    }
}

/// Generates each grid cell's dataset and measures it. Cell i is seeded
/// `seed + i`, so a run is reproducible cell by cell.
pub fn run_exp_k(cfg: &ExpKConfig) -> Result<Vec<ExperimentRecord>> {
    ensure!(!cfg.n_grid.is_empty(), "the size grid is empty");
    ensure!(cfg.proj_reps >= 1, "proj_reps must be at least 1");
    let mut records = Vec::new();
    for (cell, &n) in cfg.n_grid.iter().enumerate() {
        let cell_seed = cfg.seed.wrapping_add(cell as u64);
        let d_prime = resolve_d_prime(cfg.d_prime, n)?;
        let ctx = RecordContext {
            experiment: cfg.family.experiment_name().into(),
            n,
            d: cfg.d,
            d_prime,
            k: 0,
            epsilon: cfg.epsilon,
            delta: 0.0,
            seed: cell_seed,
        };
        match cfg.family {
            Family::Planted => {
                let spec =
                    PlantedSpec::new(n, cfg.n_queries, cfg.d, cfg.epsilon, cfg.radius, cell_seed);
                let data = gen_planted(&spec)?;
                let planted: Vec<usize> = data.pairs.iter().map(|p| p.point).collect();
                records.extend(exp_k_planted_cell(
                    &data.points,
                    &data.queries,
                    &planted,
                    d_prime,
                    cfg.proj_reps,
                    &ctx,
                )?);
            }
            Family::Gaussian => {
                let spec = GaussianSpec::new(n, cfg.n_queries, cfg.d, cell_seed);
                let data = gen_gaussian(&spec)?;
                records.extend(exp_k_gaussian_cell(
                    &data.points,
                    &data.queries,
                    cfg.epsilon,
                    d_prime,
                    cfg.proj_reps,
                    &ctx,
                )?);
            }
        }
    }
    Ok(records)
}

fn resolve_d_prime(requested: Option<usize>, n: usize) -> Result<usize> {
    match requested {
        Some(0) => bail!("the projected dimension must be at least 1"),
        Some(d_prime) => Ok(d_prime),
        None => Ok(heuristic_dimension(n)?),
    }
}

fn check_cell_inputs(points: &PointSet, queries: &PointSet, proj_reps: u64) -> Result<()> {
    ensure!(points.n() >= 1, "the point set is empty");
    ensure!(queries.n() >= 1, "the query set is empty");
    ensure!(
        points.dim() == queries.dim(),
        "points have dimension {} but queries have {}",
        points.dim(),
        queries.dim()
    );
    ensure!(proj_reps >= 1, "proj_reps must be at least 1");
    Ok(())
}

/// Measures one cell of the planted family: the correct answer for
/// query i is the planted point `planted[i]`, and its measured rank is
/// its position among the projected neighbors of the projected query.
/// Emits one `rank_q` record per (repetition, query) and one `k_avg`
/// record for the cell mean.
pub fn exp_k_planted_cell(
    points: &PointSet,
    queries: &PointSet,
    planted: &[usize],
    d_prime: usize,
    proj_reps: u64,
    ctx: &RecordContext,
) -> Result<Vec<ExperimentRecord>> {
    check_cell_inputs(points, queries, proj_reps)?;
    ensure!(
        planted.len() == queries.n(),
        "{} planted answers for {} queries",
        planted.len(),
        queries.n()
    );
    if let Some(&bad) = planted.iter().find(|&&p| p >= points.n()) {
        bail!("planted answer index {bad} is out of range for {} points", points.n());
    }
    let mut records = Vec::new();
    let mut rank_sum = 0.0;
    for rep in 0..proj_reps {
        let map = ProjectionMap::sample(
            points.dim(),
            d_prime,
            ProjectionMode::Gaussian,
            projection_seed(ctx.seed, rep),
        )?;
        let projected = map.project_set(points)?;
        for (qi, &pi) in planted.iter().enumerate() {
            let fq = map.project(queries.point(qi))?;
            let k_q = rank(&projected, &fq, projected.point(pi))? as f64;
            rank_sum += k_q;
            records.push(ctx.record("rank_q", k_q));
        }
    }
    let total = (proj_reps as usize * queries.n()) as f64;
    records.push(ctx.record("k_avg", rank_sum / total));
    Ok(records)
}

/// Measures one cell of the gaussian family. No answer is planted, so
/// the correct answer for a query is taken to be the projected-nearest
/// member of its approximate-nearest-neighbor set in the original
/// space: any point within (1+epsilon) of the true nearest distance is
/// an acceptable answer, and the projection is judged by the best of
/// them. Ties in projected distance resolve to the lowest index.
pub fn exp_k_gaussian_cell(
    points: &PointSet,
    queries: &PointSet,
    epsilon: f64,
    d_prime: usize,
    proj_reps: u64,
    ctx: &RecordContext,
) -> Result<Vec<ExperimentRecord>> {
    check_cell_inputs(points, queries, proj_reps)?;
    let acceptable: Vec<Vec<usize>> = queries
        .iter()
        .map(|q| eps_nn_set(points, q, epsilon))
        .collect::<kann::Result<_>>()?;
    let mut records = Vec::new();
    let mut rank_sum = 0.0;
    for rep in 0..proj_reps {
        let map = ProjectionMap::sample(
            points.dim(),
            d_prime,
            ProjectionMode::Gaussian,
            projection_seed(ctx.seed, rep),
        )?;
        let projected = map.project_set(points)?;
        for (qi, candidates) in acceptable.iter().enumerate() {
            let fq = map.project(queries.point(qi))?;
            let best = candidates
                .iter()
                .map(|&pi| (sq_dist(projected.point(pi), &fq), pi))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .expect("an approximate-nearest set is never empty");
            let k_q = rank(&projected, &fq, projected.point(best.1))? as f64;
            rank_sum += k_q;
            records.push(ctx.record("rank_q", k_q));
        }
    }
    let total = (proj_reps as usize * queries.n()) as f64;
    records.push(ctx.record("k_avg", rank_sum / total));
    Ok(records)
}
