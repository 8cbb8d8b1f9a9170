//! Power-law fitting of experiment records: least squares on the
//! log-log pairs (ln n, ln metric) recovers the coefficient a and
//! exponent rho of metric ~ a * n^rho.

use std::collections::BTreeMap;

use anyhow::{bail, ensure, Result};

use crate::record::ExperimentRecord;

/// Fits y = a * x^rho by ordinary least squares on logarithms and
/// returns (a, rho). Inputs must be positive; exact power laws are
/// recovered to floating-point accuracy.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    ensure!(
        xs.len() == ys.len(),
        "{} x values against {} y values",
        xs.len(),
        ys.len()
    );
    ensure!(xs.len() >= 2, "a fit needs at least 2 points, got {}", xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        ensure!(
            x.is_finite() && x > 0.0 && y.is_finite() && y > 0.0,
            "fit points must be positive and finite, got ({x}, {y})"
        );
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let mean_x = lx.iter().sum::<f64>() / m;
    let mean_y = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    if sxx == 0.0 {
        bail!("a fit needs at least two distinct x values");
    }
    let sxy: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let rho = sxy / sxx;
    let a = (mean_y - rho * mean_x).exp();
    Ok((a, rho))
}

/// Which records to fit and over which range of n.
#[derive(Debug, Clone)]
pub struct FitSelection {
    pub experiment: String,
    pub metric: String,
    /// Inclusive bounds on n. When both are `None`, the upper half of
    /// the distinct sizes present is used.
    pub min_n: Option<usize>,
    pub max_n: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub coefficient: f64,
    pub exponent: f64,
    /// The (n, mean metric) pairs the fit ran on, ascending in n.
    pub points: Vec<(usize, f64)>,
}

/// Selects matching records, averages the metric per dataset size,
/// restricts to the requested range (default: the upper half of the
/// sizes present), and fits a power law in n.
pub fn fit_records(records: &[ExperimentRecord], sel: &FitSelection) -> Result<FitOutcome> {
    let mut by_n: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in records {
        if r.experiment == sel.experiment && r.metric_name == sel.metric {
            let slot = by_n.entry(r.n).or_insert((0.0, 0));
            slot.0 += r.metric_value;
            slot.1 += 1;
        }
    }
    if by_n.is_empty() {
        bail!(
            "no records match experiment `{}` and metric `{}`",
            sel.experiment,
            sel.metric
        );
    }
    let means: Vec<(usize, f64)> = by_n
        .into_iter()
        .map(|(n, (sum, count))| (n, sum / count as f64))
        .collect();
    let points: Vec<(usize, f64)> = if sel.min_n.is_none() && sel.max_n.is_none() {
        means[means.len() / 2..].to_vec()
    } else {
        let lo = sel.min_n.unwrap_or(0);
        let hi = sel.max_n.unwrap_or(usize::MAX);
        means.into_iter().filter(|&(n, _)| lo <= n && n <= hi).collect()
    };
    if points.len() < 2 {
        bail!(
            "the fit range holds {} point(s); at least 2 sizes are required",
            points.len()
        );
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, v)| v).collect();
    let (coefficient, exponent) = fit_power_law(&xs, &ys)?;
    Ok(FitOutcome {
        coefficient,
        exponent,
        points,
    })
}
