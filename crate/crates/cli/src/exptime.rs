//! The wall-clock experiment: build an index over a planted dataset,
//! answer every query with the early-stopping search, and compare the
//! per-query time against a brute-force scan of the original points.
//! Timings use the monotonic clock and take the median of three runs
//! of the whole query batch; correctness metrics are computed once in
//! an untimed pass, so the timed loops do nothing but search.

use std::hint::black_box;
use std::time::Instant;

use anyhow::{ensure, Result};
use kann::datasets::{gen_planted, PlantedSpec};
use kann::embedding::ProjectionMode;
use kann::index::{build_index, AnnConfig, DPrimeRule, KRule};
use kann::oracle::brute_knn;
use kann::PointSet;

use crate::expk::{projection_seed, DEFAULT_N_GRID};
use crate::record::{ExperimentRecord, RecordContext};

/// Each batch is timed this many times; the median is reported.
pub const BATCH_REPS: usize = 3;

/// Relative slack applied to the planted radius when scoring answers
/// and early-stopping the search, absorbing the rounding of a distance
/// recomputed from coordinates.
pub const RADIUS_SLACK: f64 = 1e-9;

/// Configuration of one timing run over a grid of dataset sizes.
#[derive(Debug, Clone)]
pub struct ExpTimeConfig {
    pub n_grid: Vec<usize>,
    pub d: usize,
    pub epsilon: f64,
    pub n_queries: usize,
    /// Planted pair distance.
    pub radius: f64,
    pub seed: u64,
}

impl ExpTimeConfig {
    pub fn new(d: usize, epsilon: f64, seed: u64) -> Self {
        Self {
            n_grid: DEFAULT_N_GRID.to_vec(),
            d,
            epsilon,
            n_queries: 100,
            radius: 2.0,
            seed,
        }
    }
}

/// Human-facing summary of one timing cell; the same numbers also go
/// into the records.
#[derive(Debug, Clone, Copy)]
pub struct CellSummary {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub d_prime: usize,
    pub accuracy: f64,
    pub ann_seconds_per_query: f64,
    pub brute_seconds_per_query: f64,
    pub speedup: f64,
    pub evals_per_query: f64,
    pub build_seconds: f64,
}

pub struct ExpTimeOutcome {
    pub records: Vec<ExperimentRecord>,
    pub cells: Vec<CellSummary>,
}

/// Generates each grid cell's planted dataset and times it. Cell i is
/// seeded `seed + i`, matching the seeding of the rank experiment.
pub fn run_exp_time(cfg: &ExpTimeConfig) -> Result<ExpTimeOutcome> {
    ensure!(!cfg.n_grid.is_empty(), "the size grid is empty");
    let mut records = Vec::new();
    let mut cells = Vec::new();
    for (cell, &n) in cfg.n_grid.iter().enumerate() {
        let cell_seed = cfg.seed.wrapping_add(cell as u64);
        let spec = PlantedSpec::new(n, cfg.n_queries, cfg.d, cfg.epsilon, cfg.radius, cell_seed);
        let data = gen_planted(&spec)?;
        let (cell_records, summary) = exp_time_cell(
            &data.points,
            &data.queries,
            cfg.radius,
            cfg.epsilon,
            cell_seed,
        )?;
        records.extend(cell_records);
        cells.push(summary);
    }
    Ok(ExpTimeOutcome { records, cells })
}

/// Times one dataset: indexed search with early stopping at the slack-
/// adjusted radius versus a brute-force nearest-neighbor scan. An
/// answer is counted accurate when its true distance is within the
/// slack-adjusted radius.
pub fn exp_time_cell(
    points: &PointSet,
    queries: &PointSet,
    radius: f64,
    epsilon: f64,
    cell_seed: u64,
) -> Result<(Vec<ExperimentRecord>, CellSummary)> {
    ensure!(queries.n() >= 1, "the query set is empty");
    ensure!(
        radius.is_finite() && radius > 0.0,
        "the planted radius must be positive and finite"
    );
    let config = AnnConfig {
        epsilon,
        delta: 0.0,
        k_rule: KRule::SqrtN,
        dprime_rule: DPrimeRule::Heuristic,
        projection_mode: ProjectionMode::Gaussian,
        seed: projection_seed(cell_seed, 0),
    };
    let build_start = Instant::now();
    let index = build_index(points.clone(), config)?;
    let build_seconds = build_start.elapsed().as_secs_f64();
    let report = index.report();
    let stop = radius * (1.0 + RADIUS_SLACK);

    // Untimed scoring pass: accuracy and candidate-evaluation counts.
    let mut hits = 0usize;
    let mut evals = 0usize;
    for q in queries.iter() {
        let got = index.query_with_early_stop(q, Some(stop))?;
        if got.neighbor.dist <= stop {
            hits += 1;
        }
        evals += got.true_distance_evals;
    }
    let accuracy = hits as f64 / queries.n() as f64;
    let evals_per_query = evals as f64 / queries.n() as f64;

    let ann_batch = || -> kann::Result<()> {
        for q in queries.iter() {
            black_box(index.query_with_early_stop(q, Some(stop))?);
        }
        Ok(())
    };
    let mut ann_times = Vec::with_capacity(BATCH_REPS);
    for _ in 0..BATCH_REPS {
        let start = Instant::now();
        ann_batch()?;
        ann_times.push(start.elapsed().as_secs_f64());
    }

    let brute_batch = || -> kann::Result<()> {
        for q in queries.iter() {
            black_box(brute_knn(points, q, 1)?);
        }
        Ok(())
    };
    let mut brute_times = Vec::with_capacity(BATCH_REPS);
    for _ in 0..BATCH_REPS {
        let start = Instant::now();
        brute_batch()?;
        brute_times.push(start.elapsed().as_secs_f64());
    }

    let ann_seconds_per_query = median(ann_times) / queries.n() as f64;
    let brute_seconds_per_query = median(brute_times) / queries.n() as f64;
    let speedup = brute_seconds_per_query / ann_seconds_per_query;

    let summary = CellSummary {
        n: points.n(),
        d: points.dim(),
        k: report.k,
        d_prime: report.dim_proj,
        accuracy,
        ann_seconds_per_query,
        brute_seconds_per_query,
        speedup,
        evals_per_query,
        build_seconds,
    };
    let ctx = RecordContext {
        experiment: "exp-time".into(),
        n: points.n(),
        d: points.dim(),
        d_prime: report.dim_proj,
        k: report.k,
        epsilon,
        delta: 0.0,
        seed: cell_seed,
    };
    let records = vec![
        ctx.record("accuracy", accuracy),
        ctx.record("ann_seconds_per_query", ann_seconds_per_query),
        ctx.record("brute_seconds_per_query", brute_seconds_per_query),
        ctx.record("speedup", speedup),
        ctx.record("evals_per_query", evals_per_query),
        ctx.record("build_seconds", build_seconds),
    ];
    Ok((records, summary))
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    samples[samples.len() / 2]
}
