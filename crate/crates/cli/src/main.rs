//! `kann` — generate synthetic nearest-neighbor benchmarks, build and
//! query random-projection indexes, run the scaling experiments, fit
//! their results, and self-check the library's claims.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kann::datasets::{
    gen_gaussian, gen_planted, read_dataset, read_pairs, verify_planted, write_dataset,
    write_pairs, GaussianSpec, PlantedPair, PlantedSpec,
};
use kann::embedding::ProjectionMode;
use kann::index::{build_index, rho_exponent, AnnConfig, DPrimeRule, KRule};

use kann_cli::expk::{
    exp_k_gaussian_cell, exp_k_planted_cell, run_exp_k, ExpKConfig, Family, DEFAULT_N_GRID,
};
use kann_cli::exptime::{exp_time_cell, run_exp_time, CellSummary, ExpTimeConfig, RADIUS_SLACK};
use kann_cli::fit::{fit_records, FitSelection};
use kann_cli::record::{read_records, write_records, ExperimentRecord, RecordContext};
use kann_cli::verify::{run_verify, VerifyOptions};

#[derive(Parser)]
#[command(
    name = "kann",
    version,
    about = "Approximate nearest-neighbor search through random projections: \
             dataset generation, index benchmarks, and self-checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it to binary files
    #[command(subcommand)]
    Gen(GenFamily),
    /// Build an index over a dataset file and print its parameters
    Build(BuildArgs),
    /// Answer queries from files with a built index
    Query(QueryArgs),
    /// Measure the rank the true answer occupies after projection,
    /// across dataset sizes
    ExpK(ExpKArgs),
    /// Time indexed search against brute force across dataset sizes
    ExpTime(ExpTimeArgs),
    /// Run the library self-checks
    Verify(VerifyArgs),
    /// Fit a power law in n to recorded metrics
    Fit(FitArgs),
}

#[derive(Subcommand)]
enum GenFamily {
    /// Planted instance: each query gets exactly one point at distance
    /// R; every other point lies beyond (1+eps)R of every query
    Planted(GenPlantedArgs),
    /// Gaussian clusters centered on the queries
    Gaussian(GenGaussianArgs),
}

#[derive(Args)]
struct GenPlantedArgs {
    /// Total number of points
    #[arg(long)]
    n: usize,
    /// Number of queries (and planted answers)
    #[arg(long, default_value_t = 100)]
    queries: usize,
    /// Dimension
    #[arg(long)]
    d: usize,
    /// Approximation slack defining the exclusion margin (1+eps)R
    #[arg(long)]
    eps: f64,
    /// Planted pair distance
    #[arg(long = "R", visible_alias = "radius", default_value_t = 2.0)]
    radius: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output prefix: writes PREFIX.x.bin, PREFIX.q.bin, PREFIX.pairs.csv
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct GenGaussianArgs {
    /// Points per cluster (one cluster per query); n = per-query * queries
    #[arg(long = "per-query")]
    per_query: usize,
    /// Number of queries (cluster centers)
    #[arg(long, default_value_t = 100)]
    queries: usize,
    /// Dimension
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output prefix: writes PREFIX.x.bin, PREFIX.q.bin
    #[arg(long)]
    out: String,
}

/// How the index resolves its candidate count and projection dimension.
#[derive(Args)]
struct SearchArgs {
    /// Approximation slack of the search
    #[arg(long)]
    eps: f64,
    /// Failure budget of the guarantee dimension rule
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Explicit candidate count (overrides --k-rule)
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "k-rule", value_enum, default_value_t = KRuleArg::SqrtN)]
    k_rule: KRuleArg,
    /// Exponent for --k-rule n-pow-rho; computed from n and eps when omitted
    #[arg(long)]
    rho: Option<f64>,
    /// Explicit projection dimension (overrides --dprime-rule)
    #[arg(long)]
    dprime: Option<usize>,
    #[arg(long = "dprime-rule", value_enum, default_value_t = DPrimeRuleArg::Heuristic)]
    dprime_rule: DPrimeRuleArg,
    /// Projection entry distribution
    #[arg(long, value_enum, default_value_t = ModeArg::Gaussian)]
    mode: ModeArg,
    /// Seed of the projection map
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum KRuleArg {
    /// k = ceil(sqrt(n))
    SqrtN,
    /// k = ceil(ln n)
    LnN,
    /// k = ceil(n^rho)
    NPowRho,
}

#[derive(Clone, Copy, ValueEnum)]
enum DPrimeRuleArg {
    /// d' = ceil(ln n / ln ln n)
    Heuristic,
    /// d' from the failure-budget formula at the resolved k
    Guarantee,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Independent normal entries
    Gaussian,
    /// Orthonormalized columns
    Orthonormal,
}

impl SearchArgs {
    /// Resolves the flags into an index configuration; `n` is needed
    /// when the sublinearity exponent must be computed from the data.
    fn ann_config(&self, n: usize) -> Result<AnnConfig> {
        let k_rule = match self.k {
            Some(k) => KRule::Explicit(k),
            None => match self.k_rule {
                KRuleArg::SqrtN => KRule::SqrtN,
                KRuleArg::LnN => KRule::LnN,
                KRuleArg::NPowRho => {
                    let rho = match self.rho {
                        Some(rho) => rho,
                        None => rho_exponent(n, self.eps, 1.0, 7.0)
                            .context("deriving the sublinearity exponent")?,
                    };
                    KRule::NPowRho(rho)
                }
            },
        };
        let dprime_rule = match self.dprime {
            Some(dp) => DPrimeRule::Explicit(dp),
            None => match self.dprime_rule {
                DPrimeRuleArg::Heuristic => DPrimeRule::Heuristic,
                DPrimeRuleArg::Guarantee => DPrimeRule::Guarantee,
            },
        };
        let projection_mode = match self.mode {
            ModeArg::Gaussian => ProjectionMode::Gaussian,
            ModeArg::Orthonormal => ProjectionMode::Orthonormal,
        };
        Ok(AnnConfig {
            epsilon: self.eps,
            delta: self.delta,
            k_rule,
            dprime_rule,
            projection_mode,
            seed: self.seed,
        })
    }
}

#[derive(Args)]
struct BuildArgs {
    /// Points file (PREFIX.x.bin)
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct QueryArgs {
    /// Points file (PREFIX.x.bin)
    #[arg(long)]
    data: PathBuf,
    /// Queries file (PREFIX.q.bin)
    #[arg(long = "queries-file")]
    queries_file: PathBuf,
    /// Planted pairs file; enables accuracy scoring against the answers
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Accept the first candidate within this original-space radius
    #[arg(long = "early-stop")]
    early_stop: Option<f64>,
    /// Write per-query answers as CSV (query_idx,point_idx,distance)
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct ExpKArgs {
    /// Which synthetic family to generate
    #[arg(long, value_enum, default_value_t = FamilyArg::Planted)]
    family: FamilyArg,
    /// Comma-separated dataset sizes (default: the standard grid)
    #[arg(long = "n-grid", value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Dimension of generated data
    #[arg(long, default_value_t = 200)]
    d: usize,
    /// Approximation slack
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Queries per cell
    #[arg(long, default_value_t = 100)]
    queries: usize,
    /// Planted pair distance
    #[arg(long = "R", visible_alias = "radius", default_value_t = 2.0)]
    radius: f64,
    /// Fixed projection dimension (default: the heuristic rule per n)
    #[arg(long)]
    dprime: Option<usize>,
    /// Independent projections averaged per cell
    #[arg(long = "proj-reps", default_value_t = 1)]
    proj_reps: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Records file to write
    #[arg(long)]
    out: PathBuf,
    /// Fit a power law to k_avg over the upper half of sizes afterwards
    #[arg(long)]
    fit: bool,
    /// Measure an existing points file instead of generating a grid
    #[arg(long, conflicts_with = "n_grid")]
    data: Option<PathBuf>,
    /// Queries file accompanying --data
    #[arg(long = "queries-file", requires = "data")]
    queries_file: Option<PathBuf>,
    /// Planted pairs accompanying --data (required for --family planted)
    #[arg(long, requires = "data")]
    pairs: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Planted,
    Gaussian,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Planted => Family::Planted,
            FamilyArg::Gaussian => Family::Gaussian,
        }
    }
}

#[derive(Args)]
struct ExpTimeArgs {
    /// Comma-separated dataset sizes (default: the standard grid)
    #[arg(long = "n-grid", value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Dimension of generated data
    #[arg(long, default_value_t = 200)]
    d: usize,
    /// Approximation slack
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Queries per cell
    #[arg(long, default_value_t = 100)]
    queries: usize,
    /// Planted pair distance (also the early-stop/accuracy radius)
    #[arg(long = "R", visible_alias = "radius", default_value_t = 2.0)]
    radius: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Records file to write
    #[arg(long)]
    out: PathBuf,
    /// Fail the run when any cell's accuracy falls below this
    #[arg(long = "accuracy-threshold", default_value_t = 0.9)]
    accuracy_threshold: f64,
    /// Time an existing points file instead of generating a grid
    #[arg(long, conflicts_with = "n_grid")]
    data: Option<PathBuf>,
    /// Queries file accompanying --data
    #[arg(long = "queries-file", requires = "data")]
    queries_file: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Shrink Monte Carlo sizes for a fast smoke run
    #[arg(long)]
    quick: bool,
    /// Break the search's termination rule on purpose; the audit must
    /// then fail (and this command exit nonzero)
    #[arg(long = "inject-fault")]
    inject_fault: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct FitArgs {
    /// Records file written by exp-k or exp-time
    #[arg(long)]
    records: PathBuf,
    /// Experiment column to select (e.g. exp-k-planted)
    #[arg(long)]
    experiment: String,
    /// Metric column to fit
    #[arg(long, default_value = "k_avg")]
    metric: String,
    /// Inclusive lower bound on n (default: the upper half of sizes)
    #[arg(long = "min-n")]
    min_n: Option<usize>,
    /// Inclusive upper bound on n
    #[arg(long = "max-n")]
    max_n: Option<usize>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(GenFamily::Planted(args)) => cmd_gen_planted(args),
        Command::Gen(GenFamily::Gaussian(args)) => cmd_gen_gaussian(args),
        Command::Build(args) => cmd_build(args),
        Command::Query(args) => cmd_query(args),
        Command::ExpK(args) => cmd_exp_k(args),
        Command::ExpTime(args) => cmd_exp_time(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Fit(args) => cmd_fit(args),
    }
}

fn cmd_gen_planted(args: GenPlantedArgs) -> Result<()> {
    let spec = PlantedSpec::new(args.n, args.queries, args.d, args.eps, args.radius, args.seed);
    let data = gen_planted(&spec).context("generating the planted instance")?;
    verify_planted(&data, &spec).context("verifying the generated instance")?;
    let (x_path, q_path) = (format!("{}.x.bin", args.out), format!("{}.q.bin", args.out));
    let pairs_path = format!("{}.pairs.csv", args.out);
    write_dataset(&x_path, &data.points)?;
    write_dataset(&q_path, &data.queries)?;
    write_pairs(&pairs_path, &data.pairs)?;
    println!(
        "planted instance: n = {}, queries = {}, d = {}, pair distance {} (margin {:.6})",
        args.n,
        args.queries,
        args.d,
        args.radius,
        spec.margin()
    );
    println!("verification scan passed");
    println!("wrote {x_path}, {q_path}, {pairs_path}");
    Ok(())
}

fn cmd_gen_gaussian(args: GenGaussianArgs) -> Result<()> {
    let n = args
        .per_query
        .checked_mul(args.queries)
        .context("per-query * queries overflows")?;
    let spec = GaussianSpec::new(n, args.queries, args.d, args.seed);
    let data = gen_gaussian(&spec).context("generating the gaussian instance")?;
    let (x_path, q_path) = (format!("{}.x.bin", args.out), format!("{}.q.bin", args.out));
    write_dataset(&x_path, &data.points)?;
    write_dataset(&q_path, &data.queries)?;
    println!(
        "gaussian instance: n = {} ({} clusters x {} points), d = {}",
        n, args.queries, args.per_query, args.d
    );
    println!("wrote {x_path}, {q_path}");
    Ok(())
}

fn cmd_build(args: BuildArgs) -> Result<()> {
    let points = read_dataset(&args.data)?;
    let config = args.search.ann_config(points.n())?;
    let start = Instant::now();
    let index = build_index(points, config)?;
    let seconds = start.elapsed().as_secs_f64();
    let report = index.report();
    println!("indexed {} points of dimension {}", report.n, report.dim);
    println!("candidate count k = {}", report.k);
    if report.clamped {
        println!(
            "projection dimension d' = {} (rule asked for {}, capped at the data dimension)",
            report.dim_proj, report.requested_dim_proj
        );
    } else {
        println!("projection dimension d' = {}", report.dim_proj);
    }
    println!("tree depth {}", index.tree().depth());
    println!("built in {seconds:.3} s");
    Ok(())
}

fn cmd_query(args: QueryArgs) -> Result<()> {
    let points = read_dataset(&args.data)?;
    let queries = read_dataset(&args.queries_file)?;
    let expected = args.pairs.as_deref().map(read_pairs).transpose()?;
    if let Some(pairs) = &expected {
        ensure!(
            pairs.len() == queries.n(),
            "{} pairs for {} queries",
            pairs.len(),
            queries.n()
        );
    }
    let config = args.search.ann_config(points.n())?;
    let start = Instant::now();
    let index = build_index(points, config)?;
    let build_seconds = start.elapsed().as_secs_f64();
    let report = index.report();

    let mut answers = Vec::with_capacity(queries.n());
    let mut evals = 0usize;
    let start = Instant::now();
    for (qi, q) in queries.iter().enumerate() {
        let got = index.query_with_early_stop(q, args.early_stop)?;
        evals += got.true_distance_evals;
        answers.push(PlantedPair {
            query: qi,
            point: got.neighbor.index,
            dist: got.neighbor.dist,
        });
    }
    let query_seconds = start.elapsed().as_secs_f64();

    println!(
        "answered {} queries with k = {}, d' = {} (build {:.3} s, {:.3e} s/query, {:.1} distance evals/query)",
        queries.n(),
        report.k,
        report.dim_proj,
        build_seconds,
        query_seconds / queries.n() as f64,
        evals as f64 / queries.n() as f64
    );
    if let Some(pairs) = &expected {
        let hits = answers
            .iter()
            .zip(pairs)
            .filter(|(a, p)| a.point == p.point || a.dist <= p.dist * (1.0 + RADIUS_SLACK))
            .count();
        println!(
            "accuracy against the planted answers: {hits}/{} = {:.3}",
            pairs.len(),
            hits as f64 / pairs.len() as f64
        );
    }
    if let Some(out) = &args.out {
        write_pairs(out, &answers)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

/// Reads the planted sidecar into "answer of query i", validating that
/// every query has exactly one pair.
fn planted_answers(pairs: &[PlantedPair], n_queries: usize, n_points: usize) -> Result<Vec<usize>> {
    let mut answers = vec![None; n_queries];
    for p in pairs {
        ensure!(
            p.query < n_queries,
            "pair references query {} but only {} queries were given",
            p.query,
            n_queries
        );
        ensure!(
            p.point < n_points,
            "pair references point {} but only {} points were given",
            p.point,
            n_points
        );
        ensure!(
            answers[p.query].is_none(),
            "query {} has more than one planted pair",
            p.query
        );
        answers[p.query] = Some(p.point);
    }
    answers
        .into_iter()
        .enumerate()
        .map(|(q, a)| a.with_context(|| format!("query {q} has no planted pair")))
        .collect()
}

fn cmd_exp_k(args: ExpKArgs) -> Result<()> {
    let family: Family = args.family.into();
    let records = if let Some(data_path) = &args.data {
        let queries_path = args
            .queries_file
            .as_ref()
            .context("--data also needs --queries-file")?;
        let points = read_dataset(data_path)?;
        let queries = read_dataset(queries_path)?;
        let d_prime = match args.dprime {
            Some(dp) => dp,
            None => kann::embedding::heuristic_dimension(points.n())?,
        };
        let ctx = RecordContext {
            experiment: family.experiment_name().into(),
            n: points.n(),
            d: points.dim(),
            d_prime,
            k: 0,
            epsilon: args.eps,
            delta: 0.0,
            seed: args.seed,
        };
        match family {
            Family::Planted => {
                let pairs_path = args.pairs.as_ref().context(
                    "a planted dataset needs its pairs sidecar: pass --pairs PREFIX.pairs.csv",
                )?;
                let pairs = read_pairs(pairs_path)?;
                let answers = planted_answers(&pairs, queries.n(), points.n())?;
                exp_k_planted_cell(&points, &queries, &answers, d_prime, args.proj_reps, &ctx)?
            }
            Family::Gaussian => exp_k_gaussian_cell(
                &points,
                &queries,
                args.eps,
                d_prime,
                args.proj_reps,
                &ctx,
            )?,
        }
    } else {
        let cfg = ExpKConfig {
            family,
            n_grid: args.n_grid.clone().unwrap_or_else(|| DEFAULT_N_GRID.to_vec()),
            d: args.d,
            epsilon: args.eps,
            n_queries: args.queries,
            radius: args.radius,
            d_prime: args.dprime,
            proj_reps: args.proj_reps,
            seed: args.seed,
        };
        run_exp_k(&cfg)?
    };
    write_records(&args.out, &records)?;
    println!("wrote {} records to {}", records.len(), args.out.display());
    println!("{:>8} {:>8} {:>10}", "n", "d'", "k_avg");
    for r in records.iter().filter(|r| r.metric_name == "k_avg") {
        println!("{:>8} {:>8} {:>10.2}", r.n, r.d_prime, r.metric_value);
    }
    if args.fit {
        let sel = FitSelection {
            experiment: family.experiment_name().into(),
            metric: "k_avg".into(),
            min_n: None,
            max_n: None,
        };
        let fit = fit_records(&records, &sel)?;
        print_fit(&sel, &fit.points, fit.coefficient, fit.exponent);
    }
    Ok(())
}

fn print_fit(sel: &FitSelection, points: &[(usize, f64)], a: f64, rho: f64) {
    let sizes: Vec<String> = points.iter().map(|&(n, _)| n.to_string()).collect();
    println!(
        "fit over n in [{}]: {} ~ {:.4} * n^{:.4}",
        sizes.join(", "),
        sel.metric,
        a,
        rho
    );
}

fn cmd_exp_time(args: ExpTimeArgs) -> Result<()> {
    let (records, cells): (Vec<ExperimentRecord>, Vec<CellSummary>) =
        if let Some(data_path) = &args.data {
            let queries_path = args
                .queries_file
                .as_ref()
                .context("--data also needs --queries-file")?;
            let points = read_dataset(data_path)?;
            let queries = read_dataset(queries_path)?;
            let (records, summary) =
                exp_time_cell(&points, &queries, args.radius, args.eps, args.seed)?;
            (records, vec![summary])
        } else {
            let cfg = ExpTimeConfig {
                n_grid: args.n_grid.clone().unwrap_or_else(|| DEFAULT_N_GRID.to_vec()),
                d: args.d,
                epsilon: args.eps,
                n_queries: args.queries,
                radius: args.radius,
                seed: args.seed,
            };
            let outcome = run_exp_time(&cfg)?;
            (outcome.records, outcome.cells)
        };
    write_records(&args.out, &records)?;
    println!("wrote {} records to {}", records.len(), args.out.display());
    println!(
        "{:>8} {:>6} {:>4} {:>9} {:>12} {:>12} {:>8} {:>9} {:>9}",
        "n", "k", "d'", "accuracy", "ann s/q", "brute s/q", "speedup", "evals/q", "build s"
    );
    for c in &cells {
        println!(
            "{:>8} {:>6} {:>4} {:>9.3} {:>12.3e} {:>12.3e} {:>8.2} {:>9.1} {:>9.3}",
            c.n,
            c.k,
            c.d_prime,
            c.accuracy,
            c.ann_seconds_per_query,
            c.brute_seconds_per_query,
            c.speedup,
            c.evals_per_query,
            c.build_seconds
        );
    }
    let low: Vec<&CellSummary> = cells
        .iter()
        .filter(|c| c.accuracy < args.accuracy_threshold)
        .collect();
    if !low.is_empty() {
        let report: Vec<String> = low
            .iter()
            .map(|c| format!("n = {}: {:.3}", c.n, c.accuracy))
            .collect();
        bail!(
            "accuracy fell below the {} threshold at {}",
            args.accuracy_threshold,
            report.join(", ")
        );
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let opts = VerifyOptions {
        quick: args.quick,
        inject_fault: args.inject_fault,
        seed: args.seed,
    };
    let outcomes = run_verify(&opts);
    let mut failed = 0usize;
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {} ({:.2} s) - {}", o.name, o.seconds, o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        bail!(
            "{failed} of {} checks failed (seed {})",
            outcomes.len(),
            args.seed
        );
    }
    println!("all {} checks passed", outcomes.len());
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let records = read_records(&args.records)?;
    let sel = FitSelection {
        experiment: args.experiment.clone(),
        metric: args.metric.clone(),
        min_n: args.min_n,
        max_n: args.max_n,
    };
    let fit = fit_records(&records, &sel)?;
    for &(n, v) in &fit.points {
        println!("{:>8} {:>12.4}", n, v);
    }
    print_fit(&sel, &fit.points, fit.coefficient, fit.exponent);
    Ok(())
}
