//! The experiment record: one metric value per row, written and read as
//! CSV with a fixed schema. Every experiment command emits these rows,
//! and the fit command consumes them.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// The exact CSV header every records file starts with.
pub const CSV_HEADER: &str = "experiment,n,d,d_prime,k,epsilon,delta,seed,metric_name,metric_value";

/// One measured metric for one experiment cell (or one query of it).
/// Integer fields that a given experiment does not configure are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub n: usize,
    pub d: usize,
    pub d_prime: usize,
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub metric_name: String,
    pub metric_value: f64,
}

/// The fixed (configuration) columns of one experiment cell; stamps out
/// records that differ only in the metric.
#[derive(Debug, Clone)]
pub struct RecordContext {
    pub experiment: String,
    pub n: usize,
    pub d: usize,
    pub d_prime: usize,
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
}

impl RecordContext {
    pub fn record(&self, metric_name: &str, metric_value: f64) -> ExperimentRecord {
        ExperimentRecord {
            experiment: self.experiment.clone(),
            n: self.n,
            d: self.d,
            d_prime: self.d_prime,
            k: self.k,
            epsilon: self.epsilon,
            delta: self.delta,
            seed: self.seed,
            metric_name: metric_name.to_string(),
            metric_value,
        }
    }
}

fn check_field(name: &str, value: &str) -> Result<()> {
    if value.is_empty() || value.contains(',') || value.contains('\n') {
        bail!("record field {name} must be non-empty and free of commas/newlines, got {value:?}");
    }
    Ok(())
}

/// Renders records as CSV text (header included). Floats print in
/// shortest round-trip form.
pub fn render_records(records: &[ExperimentRecord]) -> Result<String> {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        check_field("experiment", &r.experiment)?;
        check_field("metric_name", &r.metric_name)?;
        if !r.metric_value.is_finite() || !r.epsilon.is_finite() || !r.delta.is_finite() {
            bail!(
                "record {}/{} holds a non-finite value",
                r.experiment,
                r.metric_name
            );
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.n,
            r.d,
            r.d_prime,
            r.k,
            r.epsilon,
            r.delta,
            r.seed,
            r.metric_name,
            r.metric_value
        )?;
    }
    Ok(out)
}

pub fn write_records(path: impl AsRef<Path>, records: &[ExperimentRecord]) -> Result<()> {
    let path = path.as_ref();
    let text = render_records(records)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<ExperimentRecord>> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_records(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Parses CSV text written by [`render_records`].
pub fn parse_records(text: &str) -> Result<Vec<ExperimentRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim_end_matches('\r') == CSV_HEADER => {}
        other => bail!(
            "expected header `{CSV_HEADER}`, found {:?}",
            other.map(|(_, l)| l)
        ),
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            bail!("line {}: expected 10 fields, found {}", idx + 1, fields.len());
        }
        let ctx = |what: &str| format!("line {}: {what}", idx + 1);
        records.push(ExperimentRecord {
            experiment: fields[0].to_string(),
            n: fields[1].parse().with_context(|| ctx("n"))?,
            d: fields[2].parse().with_context(|| ctx("d"))?,
            d_prime: fields[3].parse().with_context(|| ctx("d_prime"))?,
            k: fields[4].parse().with_context(|| ctx("k"))?,
            epsilon: fields[5].parse().with_context(|| ctx("epsilon"))?,
            delta: fields[6].parse().with_context(|| ctx("delta"))?,
            seed: fields[7].parse().with_context(|| ctx("seed"))?,
            metric_name: fields[8].to_string(),
            metric_value: fields[9].parse().with_context(|| ctx("metric_value"))?,
        });
    }
    Ok(records)
}
