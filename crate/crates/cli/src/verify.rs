//! Self-checks of the library's analytical and structural claims,
//! runnable from the command line. Each check is independent, reports
//! pass/fail with a one-line detail, and is sized to finish quickly;
//! `quick` shrinks the Monte Carlo sizes further for smoke runs.
//!
//! `inject_fault` flips the search into a deliberately broken
//! early-termination mode; the visit-contract audit is then expected to
//! fail, demonstrating that the audit has teeth.

use std::time::Instant;

use anyhow::Result;
use kann::datasets::{gen_planted, verify_planted, PlantedSpec};
use kann::embedding::{lemma_gap_i, lemma_gap_x, tail_bound, ProjectionMap, ProjectionMode};
use kann::oracle::{bad_candidate_count, brute_knn};
use kann::tree::{KannTree, DEFAULT_BUCKET_SIZE};
use kann::{sq_dist, PointSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Shrink Monte Carlo sizes for a fast smoke run.
    pub quick: bool,
    /// Break the search's termination rule on purpose; the
    /// visit-contract audit must then fail.
    pub inject_fault: bool,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn(&VerifyOptions) -> Result<(bool, String)>;

/// Runs every check; failures (including internal errors) are reported
/// in the outcomes rather than returned.
pub fn run_verify(opts: &VerifyOptions) -> Vec<CheckOutcome> {
    let checks: [(&'static str, Check); 6] = [
        ("inequality-grid", check_inequality_grid),
        ("projection-tail", check_projection_tail),
        ("tree-oracle-equivalence", check_tree_oracle),
        ("visit-contract-audit", check_visit_contract),
        ("planted-scan", check_planted_scan),
        ("bad-candidate-rate", check_bad_candidate_rate),
    ];
    checks
        .iter()
        .map(|&(name, check)| {
            let start = Instant::now();
            let (passed, detail) =
                check(opts).unwrap_or_else(|e| (false, format!("error: {e:#}")));
            CheckOutcome {
                name,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

/// The two analytic gap functions behind the dimension bound must be
/// strictly positive over their whole working range.
fn check_inequality_grid(_opts: &VerifyOptions) -> Result<(bool, String)> {
    let mut evaluated = 0usize;
    let mut nonpositive = 0usize;
    for i in 0..=60u32 {
        for j in 1..=99u32 {
            let epsilon = f64::from(j) / 100.0;
            evaluated += 1;
            if !(lemma_gap_i(i, epsilon) > 0.0) {
                nonpositive += 1;
            }
        }
    }
    for t in 0..1000 {
        let x = 10f64.powf(-6.0 + 12.0 * t as f64 / 999.0);
        evaluated += 1;
        if !(lemma_gap_x(x) > 0.0) {
            nonpositive += 1;
        }
    }
    Ok((
        nonpositive == 0,
        format!("{evaluated} grid points, {nonpositive} nonpositive"),
    ))
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return g.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Empirical distortion tails of fresh random projections of unit
/// vectors must stay within twice their analytic bounds.
fn check_projection_tail(opts: &VerifyOptions) -> Result<(bool, String)> {
    let (d, d_prime) = (100usize, 20usize);
    let trials = if opts.quick { 10_000u64 } else { 100_000 };
    let (beta_lo, beta_hi) = (0.5f64, 1.5f64);
    let bound_lo = tail_bound(beta_lo, d_prime)?;
    let bound_hi = tail_bound(beta_hi, d_prime)?;
    let mut vec_rng = ChaCha8Rng::seed_from_u64(opts.seed ^ UNIT_STREAM_SALT);
    let mut count_lo = 0u64;
    let mut count_hi = 0u64;
    for t in 0..trials {
        let map = ProjectionMap::sample(
            d,
            d_prime,
            ProjectionMode::Gaussian,
            opts.seed.wrapping_add(t),
        )?;
        let u = unit_vector(&mut vec_rng, d);
        let y = map.project(&u)?;
        let s: f64 = y.iter().map(|v| v * v).sum();
        if s <= beta_lo * beta_lo {
            count_lo += 1;
        }
        if s >= beta_hi * beta_hi {
            count_hi += 1;
        }
    }
    let freq_lo = count_lo as f64 / trials as f64;
    let freq_hi = count_hi as f64 / trials as f64;
    let passed = freq_lo <= 2.0 * bound_lo && freq_hi <= 2.0 * bound_hi;
    Ok((
        passed,
        format!(
            "{trials} trials: P[contract<={beta_lo}] = {freq_lo:.2e} (cap {:.2e}), \
             P[expand>={beta_hi}] = {freq_hi:.2e} (cap {:.2e})",
            2.0 * bound_lo,
            2.0 * bound_hi
        ),
    ))
}

/// Mixed into the seed of the unit-vector stream so it never collides
/// with the per-trial projection seeds.
const UNIT_STREAM_SALT: u64 = 0x5EED_0F4E_57A1_0001;

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointSet {
    let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-10.0..10.0)).collect();
    PointSet::new(d, data).expect("valid random point set")
}

/// Exact-mode tree search must agree with the brute-force oracle,
/// including tie order, across mixed dimensions and k.
fn check_tree_oracle(opts: &VerifyOptions) -> Result<(bool, String)> {
    let instances = if opts.quick { 10 } else { 100 };
    let n = if opts.quick { 500 } else { 2000 };
    let dims = [2usize, 5, 16];
    let ks = [1usize, 10, 50];
    let queries_per_instance = 3;
    let mut mismatches = 0usize;
    for t in 0..instances {
        let d = dims[t % dims.len()];
        let k = ks[(t / dims.len()) % ks.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(5000 + t as u64));
        let points = random_points(&mut rng, n, d);
        let tree = KannTree::build(points.clone(), DEFAULT_BUCKET_SIZE)?;
        for _ in 0..queries_per_instance {
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-12.0..12.0)).collect();
            let got = tree.search_kann(&q, k, 0.0)?;
            let want = brute_knn(&points, &q, k)?;
            if got != want {
                mismatches += 1;
            }
        }
    }
    Ok((
        mismatches == 0,
        format!("{instances} instances x {queries_per_instance} queries, {mismatches} mismatches"),
    ))
}

/// Audits the search's termination contract: every point not examined
/// by a finished search must lie strictly beyond r_k / (1 + epsilon).
/// With the injected fault the search stops early and this audit is
/// expected to fail.
fn check_visit_contract(opts: &VerifyOptions) -> Result<(bool, String)> {
    let total_queries = if opts.quick { 10 } else { 50 };
    let n = if opts.quick { 500 } else { 2000 };
    // Low dimension makes the tree actually prune, so the audit (and
    // the injected-fault negative control) has teeth; in high
    // dimension the search visits nearly everything and the contract
    // is vacuously true.
    let (d, k, epsilon) = (4usize, 10usize, 0.5f64);
    let per_instance = 10;
    let instances = total_queries / per_instance;
    let mut violations = 0usize;
    for inst in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(9000 + inst as u64));
        let points = random_points(&mut rng, n, d);
        let tree = KannTree::build(points.clone(), DEFAULT_BUCKET_SIZE)?;
        for _ in 0..per_instance {
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-12.0..12.0)).collect();
            let (neighbors, stats) =
                tree.search_kann_instrumented(&q, k, epsilon, opts.inject_fault)?;
            let threshold = neighbors.last().expect("k >= 1").dist / (1.0 + epsilon);
            let mut visited = vec![false; n];
            for &idx in &stats.visited {
                visited[idx] = true;
            }
            violations += (0..n)
                .filter(|&i| !visited[i] && sq_dist(points.point(i), &q).sqrt() <= threshold)
                .count();
        }
    }
    Ok((
        violations == 0,
        format!("{total_queries} audited queries, {violations} unvisited points inside the audit radius"),
    ))
}

/// Regenerates a planted instance at scale and runs the full
/// verification scan (exact pair distances, exclusion margins).
fn check_planted_scan(opts: &VerifyOptions) -> Result<(bool, String)> {
    let spec = if opts.quick {
        PlantedSpec::new(2000, 50, 50, 0.5, 2.0, opts.seed.wrapping_add(77))
    } else {
        PlantedSpec::new(10_000, 100, 200, 0.5, 2.0, opts.seed.wrapping_add(77))
    };
    let data = gen_planted(&spec)?;
    verify_planted(&data, &spec)?;
    Ok((
        true,
        format!(
            "n = {}, {} queries regenerated and scanned clean",
            spec.n, spec.n_queries
        ),
    ))
}

/// On a worst-case shell instance, the measured rate of far points
/// that project close must respect the contraction tail bound.
fn check_bad_candidate_rate(opts: &VerifyOptions) -> Result<(bool, String)> {
    let (d, d_prime, n_shell) = (50usize, 20usize, 500usize);
    let (beta, gamma) = (1.2f64, 1.5f64);
    let trials = if opts.quick { 20u64 } else { 200 };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(31));
    let mut data = vec![0.0; d];
    data[0] = 1.0;
    for _ in 0..n_shell {
        let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        data.extend(g.iter().map(|v| v / norm * gamma * 1.0001));
    }
    let points = PointSet::new(d, data)?;
    let q = vec![0.0; d];
    let mut total_bad = 0usize;
    for t in 0..trials {
        let map = ProjectionMap::sample(
            d,
            d_prime,
            ProjectionMode::Gaussian,
            opts.seed.wrapping_add(1000 + t),
        )?;
        let projected = map.project_set(&points)?;
        let f_q = map.project(&q)?;
        total_bad += bad_candidate_count(&points, &projected, &q, &f_q, beta, gamma)?;
    }
    let rate = total_bad as f64 / (trials as usize * n_shell) as f64;
    let bound = tail_bound(beta / gamma, d_prime)?;
    Ok((
        rate <= 2.0 * bound,
        format!("{trials} trials: bad-candidate rate {rate:.3e} (cap {:.3e})", 2.0 * bound),
    ))
}
