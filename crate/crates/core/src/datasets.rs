//! Synthetic dataset generators for the experiments, plus a small
//! binary on-disk format for point sets and a CSV sidecar for planted
//! query/answer pairs.
//!
//! Two families are provided:
//!
//! * **Planted**: each query gets exactly one point at a known distance
//!   `radius`, with every other point kept strictly outside
//!   `(1 + epsilon) * radius` of every query. The planted point is
//!   therefore the unique `(1+epsilon)`-approximate nearest neighbor of
//!   its query, which gives experiments a ground truth to score
//!   against. Non-planted points are a blend: a per-query shell just
//!   outside the exclusion margin (so queries have near-threshold
//!   distractors at every scale of `n`) and uniform box fill.
//! * **Gaussian**: isotropic clusters of iid normal coordinates around
//!   uniform centers, one cluster per query — a natural easy case with
//!   no planted structure.
//!
//! All randomness comes from `ChaCha8` seeded with the spec's `u64`
//! seed, so generation is reproducible bit-for-bit.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::point::{dist, PointSet};

/// Relative headroom between the exclusion margin enforced during
/// generation and the `(1 + epsilon) * radius` bound verified later;
/// keeps verification immune to rounding in recomputed distances.
const MARGIN_SLACK: f64 = 1e-6;

/// How many placement attempts generation may spend in total, per
/// requested point.
const ATTEMPTS_PER_POINT: usize = 1000;

/// Parameters of a planted-neighbor instance.
#[derive(Debug, Clone)]
pub struct PlantedSpec {
    /// Number of indexed points (including the planted ones).
    pub n: usize,
    /// Number of queries; each plants exactly one point.
    pub n_queries: usize,
    pub dim: usize,
    /// Slack defining the exclusion ball `(1 + epsilon) * radius`.
    pub epsilon: f64,
    /// Exact distance from each query to its planted point.
    pub radius: f64,
    /// Coordinate range for query centers and uniform fill.
    pub range: (f64, f64),
    pub seed: u64,
}

impl PlantedSpec {
    /// Spec with the default coordinate range `[-20, 20]`.
    pub fn new(
        n: usize,
        n_queries: usize,
        dim: usize,
        epsilon: f64,
        radius: f64,
        seed: u64,
    ) -> Self {
        PlantedSpec {
            n,
            n_queries,
            dim,
            epsilon,
            radius,
            range: (-20.0, 20.0),
            seed,
        }
    }

    /// Exclusion radius enforced around every query for every point
    /// other than its own planted one.
    pub fn margin(&self) -> f64 {
        (1.0 + self.epsilon) * self.radius * (1.0 + MARGIN_SLACK)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "must be >= 1"));
        }
        if self.n_queries == 0 || self.n_queries > self.n {
            return Err(Error::invalid(
                "n_queries",
                "must be in 1..=n (each query plants one point)",
            ));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", "must be a finite real > 0"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid("radius", "must be a finite real > 0"));
        }
        if !(self.range.0 < self.range.1)
            || !self.range.0.is_finite()
            || !self.range.1.is_finite()
        {
            return Err(Error::invalid("range", "must be a finite interval"));
        }
        Ok(())
    }
}

/// One planted query/answer pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedPair {
    pub query: usize,
    pub point: usize,
    pub dist: f64,
}

/// A generated planted instance. Points are laid out as: the
/// `n_queries` planted points first (pair `i` is point `i`), then the
/// shell distractors grouped by query, then uniform fill.
#[derive(Debug, Clone)]
pub struct PlantedData {
    pub points: PointSet,
    pub queries: PointSet,
    pub pairs: Vec<PlantedPair>,
}

/// Number of shell distractors generated around each query.
pub fn shell_quota(n: usize, n_queries: usize) -> usize {
    let half_sqrt = ((n as f64).sqrt() / 2.0).ceil() as usize;
    half_sqrt.min((n - n_queries) / n_queries)
}

/// Generates a planted instance. Fails with
/// [`Error::GenerationInfeasible`] when the exclusion margins cannot be
/// satisfied within the attempt budget (e.g. overlapping queries in a
/// tiny low-dimensional box).
pub fn gen_planted(spec: &PlantedSpec) -> Result<PlantedData> {
    spec.validate()?;
    let d = spec.dim;
    let margin = spec.margin();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut budget = Budget::new(ATTEMPTS_PER_POINT * spec.n);

    let mut queries = PointSet::with_capacity(d, spec.n_queries);
    for _ in 0..spec.n_queries {
        let q: Vec<f64> = (0..d)
            .map(|_| rng.random_range(spec.range.0..spec.range.1))
            .collect();
        queries.push(&q);
    }

    let mut points = PointSet::with_capacity(d, spec.n);
    let mut pairs = Vec::with_capacity(spec.n_queries);

    // Planted points: exactly `radius` from their own query, outside
    // the margin of every other query.
    for i in 0..spec.n_queries {
        loop {
            budget.spend()?;
            let p = at_radius(&mut rng, queries.point(i), spec.radius);
            if (0..spec.n_queries).all(|j| j == i || dist(&p, queries.point(j)) >= margin) {
                pairs.push(PlantedPair {
                    query: i,
                    point: i,
                    dist: dist(&p, queries.point(i)),
                });
                points.push(&p);
                break;
            }
        }
    }

    // Shell distractors: just outside the margin of their own query
    // (between the margin and 1.5x the exclusion radius), outside the
    // margin of every other query.
    let quota = shell_quota(spec.n, spec.n_queries);
    let shell_hi = 1.5 * (1.0 + spec.epsilon) * spec.radius;
    for i in 0..spec.n_queries {
        for _ in 0..quota {
            loop {
                budget.spend()?;
                let u = rng.random_range(margin..shell_hi);
                let p = at_radius(&mut rng, queries.point(i), u);
                if (0..spec.n_queries).all(|j| j == i || dist(&p, queries.point(j)) >= margin)
                {
                    points.push(&p);
                    break;
                }
            }
        }
    }

    // Uniform fill for the remainder, outside every margin.
    while points.n() < spec.n {
        budget.spend()?;
        let p: Vec<f64> = (0..d)
            .map(|_| rng.random_range(spec.range.0..spec.range.1))
            .collect();
        if (0..spec.n_queries).all(|j| dist(&p, queries.point(j)) >= margin) {
            points.push(&p);
        }
    }

    Ok(PlantedData {
        points,
        queries,
        pairs,
    })
}

/// Re-checks a planted instance by full scan: every pair sits at the
/// declared radius (within 1e-9) and matches its recorded distance, and
/// no other point intrudes into any query's exclusion ball.
pub fn verify_planted(data: &PlantedData, spec: &PlantedSpec) -> Result<()> {
    let fail = |reason: String| Err(Error::invalid("planted_instance", reason));
    if data.points.n() != spec.n
        || data.queries.n() != spec.n_queries
        || data.pairs.len() != spec.n_queries
        || data.points.dim() != spec.dim
        || data.queries.dim() != spec.dim
    {
        return fail("shape does not match its spec".into());
    }
    let exclusion = (1.0 + spec.epsilon) * spec.radius;
    for (i, pair) in data.pairs.iter().enumerate() {
        if pair.query != i || pair.point >= data.points.n() {
            return fail(format!("pair {i} is out of order or out of range"));
        }
        let q = data.queries.point(i);
        let got = dist(data.points.point(pair.point), q);
        if got != pair.dist {
            return fail(format!(
                "pair {i}: recorded distance {} but measured {got}",
                pair.dist
            ));
        }
        if (got - spec.radius).abs() > 1e-9 {
            return fail(format!(
                "pair {i}: planted distance {got} is off the declared radius {}",
                spec.radius
            ));
        }
        for x in 0..data.points.n() {
            if x == pair.point {
                continue;
            }
            let dx = dist(data.points.point(x), q);
            if dx <= exclusion {
                return fail(format!(
                    "point {x} intrudes at {dx} <= {exclusion} into the ball of query {i}"
                ));
            }
        }
    }
    Ok(())
}

/// Parameters of a Gaussian-cluster instance.
#[derive(Debug, Clone)]
pub struct GaussianSpec {
    pub n: usize,
    /// Number of queries; each is the center of one cluster.
    pub n_queries: usize,
    pub dim: usize,
    /// Coordinate range for the cluster centers.
    pub range: (f64, f64),
    /// Per-cluster coordinate variance is drawn uniformly from here.
    pub var_range: (f64, f64),
    pub seed: u64,
}

impl GaussianSpec {
    /// Spec with default center range `[-20, 20]` and per-coordinate
    /// variance drawn from `[15, 25]`.
    pub fn new(n: usize, n_queries: usize, dim: usize, seed: u64) -> Self {
        GaussianSpec {
            n,
            n_queries,
            dim,
            range: (-20.0, 20.0),
            var_range: (15.0, 25.0),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "must be >= 1"));
        }
        if self.n_queries == 0 || self.n_queries > self.n {
            return Err(Error::invalid("n_queries", "must be in 1..=n"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        if !(self.range.0 < self.range.1)
            || !self.range.0.is_finite()
            || !self.range.1.is_finite()
        {
            return Err(Error::invalid("range", "must be a finite interval"));
        }
        if !(self.var_range.0 > 0.0 && self.var_range.0 < self.var_range.1)
            || !self.var_range.1.is_finite()
        {
            return Err(Error::invalid(
                "var_range",
                "must be a finite interval with positive lower end",
            ));
        }
        Ok(())
    }
}

/// A generated Gaussian-cluster instance. Cluster `i` owns the
/// contiguous run of `cluster_sizes[i]` points following the first
/// `cluster_sizes[..i]` ones.
#[derive(Debug, Clone)]
pub struct GaussianData {
    pub points: PointSet,
    pub queries: PointSet,
    pub cluster_sizes: Vec<usize>,
}

/// Generates a Gaussian-cluster instance: centers uniform in the range,
/// then for each center a variance from `var_range` and points with iid
/// normal coordinates around it. Cluster sizes differ by at most one.
pub fn gen_gaussian(spec: &GaussianSpec) -> Result<GaussianData> {
    spec.validate()?;
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut queries = PointSet::with_capacity(d, spec.n_queries);
    for _ in 0..spec.n_queries {
        let q: Vec<f64> = (0..d)
            .map(|_| rng.random_range(spec.range.0..spec.range.1))
            .collect();
        queries.push(&q);
    }

    let base = spec.n / spec.n_queries;
    let extra = spec.n % spec.n_queries;
    let mut points = PointSet::with_capacity(d, spec.n);
    let mut cluster_sizes = Vec::with_capacity(spec.n_queries);
    for i in 0..spec.n_queries {
        let size = base + usize::from(i < extra);
        cluster_sizes.push(size);
        let sigma = rng
            .random_range(spec.var_range.0..spec.var_range.1)
            .sqrt();
        let center = queries.point(i).to_vec();
        for _ in 0..size {
            let p: Vec<f64> = center
                .iter()
                .map(|c| c + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            points.push(&p);
        }
    }

    Ok(GaussianData {
        points,
        queries,
        cluster_sizes,
    })
}

/// A point at Euclidean distance exactly `r` from `center`, in a
/// uniformly random direction (normalized Gaussian vector).
fn at_radius(rng: &mut ChaCha8Rng, center: &[f64], r: f64) -> Vec<f64> {
    loop {
        let g: Vec<f64> = center
            .iter()
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return center
                .iter()
                .zip(&g)
                .map(|(c, v)| c + r * v / norm)
                .collect();
        }
    }
}

struct Budget {
    left: usize,
    total: usize,
}

impl Budget {
    fn new(total: usize) -> Self {
        Budget { left: total, total }
    }

    fn spend(&mut self) -> Result<()> {
        if self.left == 0 {
            return Err(Error::GenerationInfeasible(format!(
                "exhausted {} placement attempts; the exclusion margins likely \
                 cannot be satisfied in this geometry",
                self.total
            )));
        }
        self.left -= 1;
        Ok(())
    }
}

// --- On-disk formats -----------------------------------------------------

const MAGIC: [u8; 4] = *b"LDNN";
const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: u64 = 4 + 4 + 8 + 4;

/// Header line of the planted-pairs CSV sidecar.
pub const PAIRS_HEADER: &str = "query_idx,point_idx,distance";

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_error(path: &Path, offset: u64, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        reason: reason.into(),
    }
}

/// Writes a point set as `LDNN`, version, point count (u64), dimension
/// (u32), then row-major little-endian f64 coordinates.
pub fn write_dataset(path: impl AsRef<Path>, points: &PointSet) -> Result<()> {
    let path = path.as_ref();
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| io_error(path, e));
    write(&MAGIC)?;
    write(&FORMAT_VERSION.to_le_bytes())?;
    write(&(points.n() as u64).to_le_bytes())?;
    write(&(points.dim() as u32).to_le_bytes())?;
    for v in points.as_slice() {
        write(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Reads a point set written by [`write_dataset`]. The format is
/// strict: bad magic, an unknown version, a zero dimension or count,
/// non-finite coordinates, truncation, and trailing bytes are all
/// errors, reported with the byte offset at fault.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<PointSet> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)
        .map_err(|e| io_error(path, e))?;

    let header = |n: usize, at: u64, what: &str| -> Result<&[u8]> {
        bytes
            .get(at as usize..at as usize + n)
            .ok_or_else(|| format_error(path, bytes.len() as u64, format!("file ends inside {what}")))
    };
    if header(4, 0, "the magic")? != MAGIC {
        return Err(format_error(path, 0, "bad magic (not a dataset file)"));
    }
    let version = u32::from_le_bytes(header(4, 4, "the version")?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(format_error(
            path,
            4,
            format!("unsupported version {version} (expected {FORMAT_VERSION})"),
        ));
    }
    let n = u64::from_le_bytes(header(8, 8, "the point count")?.try_into().unwrap());
    let dim = u32::from_le_bytes(header(4, 16, "the dimension")?.try_into().unwrap());
    if n == 0 {
        return Err(format_error(path, 8, "empty point set"));
    }
    if dim == 0 {
        return Err(format_error(path, 16, "zero dimension"));
    }
    let count = n
        .checked_mul(dim as u64)
        .filter(|&c| c <= (usize::MAX as u64) / 8)
        .ok_or_else(|| format_error(path, 8, "point count times dimension overflows"))?;
    let expected = HEADER_LEN + 8 * count;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(format_error(
            path,
            actual,
            format!("truncated: {actual} bytes, expected {expected}"),
        ));
    }
    if actual > expected {
        return Err(format_error(
            path,
            expected,
            format!("{} trailing bytes after the payload", actual - expected),
        ));
    }
    let mut data = Vec::with_capacity(count as usize);
    for (i, chunk) in bytes[HEADER_LEN as usize..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(format_error(
                path,
                HEADER_LEN + 8 * i as u64,
                format!("non-finite coordinate {v}"),
            ));
        }
        data.push(v);
    }
    PointSet::new(dim as usize, data)
        .map_err(|e| format_error(path, HEADER_LEN, format!("inconsistent payload: {e}")))
}

/// Writes planted pairs as a CSV sidecar with header
/// `query_idx,point_idx,distance`. Distances print in shortest
/// round-trip form, so reading them back is lossless.
pub fn write_pairs(path: impl AsRef<Path>, pairs: &[PlantedPair]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{PAIRS_HEADER}").map_err(|e| io_error(path, e))?;
    for p in pairs {
        writeln!(w, "{},{},{}", p.query, p.point, p.dist).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Reads a pairs CSV written by [`write_pairs`].
pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<PlantedPair>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut pairs = Vec::new();
    let mut offset = 0u64;
    for (lineno, line) in text.lines().enumerate() {
        let bad = |reason: String| format_error(path, offset, reason);
        let trimmed = line.trim_end_matches('\r');
        if lineno == 0 {
            if trimmed != PAIRS_HEADER {
                return Err(bad(format!("expected header `{PAIRS_HEADER}`")));
            }
        } else if !trimmed.is_empty() {
            let mut fields = trimmed.split(',');
            let mut next = |what: &str| {
                fields
                    .next()
                    .ok_or_else(|| bad(format!("line {}: missing {what}", lineno + 1)))
            };
            let query = next("query_idx")?
                .parse::<usize>()
                .map_err(|e| bad(format!("line {}: query_idx: {e}", lineno + 1)))?;
            let point = next("point_idx")?
                .parse::<usize>()
                .map_err(|e| bad(format!("line {}: point_idx: {e}", lineno + 1)))?;
            let dist = next("distance")?
                .parse::<f64>()
                .map_err(|e| bad(format!("line {}: distance: {e}", lineno + 1)))?;
            if fields.next().is_some() {
                return Err(bad(format!("line {}: too many fields", lineno + 1)));
            }
            pairs.push(PlantedPair { query, point, dist });
        }
        offset += line.len() as u64 + 1;
    }
    Ok(pairs)
}
