//! Independent reference implementations used to validate the search
//! structures: brute-force nearest neighbors, distance ranks, exact
//! approximate-neighbor sets, projected bad-candidate counts, and a
//! doubling-rate probe for point sets. Everything here is a plain scan
//! with no acceleration, so results serve as ground truth in tests and
//! in the self-verification command.

use crate::error::{Error, Result};
use crate::point::{cmp_dist_index, dist, sq_dist, Neighbor, PointSet};

fn check_query(points: &PointSet, q: &[f64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if q.len() != points.dim() {
        return Err(Error::DimensionMismatch {
            expected: points.dim(),
            got: q.len(),
        });
    }
    Ok(())
}

/// Exact k nearest neighbors of `q` by full scan, sorted by
/// (distance, index) ascending.
pub fn brute_knn(points: &PointSet, q: &[f64], k: usize) -> Result<Vec<Neighbor>> {
    check_query(points, q)?;
    if k == 0 || k > points.n() {
        return Err(Error::InvalidK { k, n: points.n() });
    }
    let mut all: Vec<(f64, usize)> = (0..points.n())
        .map(|i| (sq_dist(points.point(i), q), i))
        .collect();
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, |a, b| cmp_dist_index(*a, *b));
        all.truncate(k);
    }
    all.sort_unstable_by(|a, b| cmp_dist_index(*a, *b));
    Ok(all
        .into_iter()
        .map(|(d2, index)| Neighbor {
            index,
            dist: d2.sqrt(),
        })
        .collect())
}

/// Rank of the point `p` among `points` with respect to `q`: the number
/// of indexed points whose distance to `q` is at most `dist(p, q)`. Both
/// sides are compared after the square root so that a point equal to `p`
/// always counts itself. The smallest possible rank of an indexed point
/// is therefore 1.
pub fn rank(points: &PointSet, q: &[f64], p: &[f64]) -> Result<usize> {
    check_query(points, q)?;
    if p.len() != points.dim() {
        return Err(Error::DimensionMismatch {
            expected: points.dim(),
            got: p.len(),
        });
    }
    let threshold = dist(p, q);
    Ok(points.iter().filter(|x| dist(x, q) <= threshold).count())
}

/// Indices of every `(1+epsilon)`-approximate nearest neighbor of `q`:
/// all points within `(1+epsilon) * d_min` of `q`, where `d_min` is the
/// exact nearest-neighbor distance. Ascending index order.
pub fn eps_nn_set(points: &PointSet, q: &[f64], epsilon: f64) -> Result<Vec<usize>> {
    check_query(points, q)?;
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid("epsilon", "must be a finite real >= 0"));
    }
    let d_min = points
        .iter()
        .map(|x| dist(x, q))
        .min_by(f64::total_cmp)
        .expect("nonempty");
    let threshold = (1.0 + epsilon) * d_min;
    Ok((0..points.n())
        .filter(|&i| dist(points.point(i), q) <= threshold)
        .collect())
}

/// Counts "bad candidates" of a projection: points far from `q` in the
/// original space yet close to the query's image in the projected space.
/// With `r` the exact nearest-neighbor distance of `q` in `points`, a
/// point `x` is bad when `dist(x, q) > gamma * r` in the original space
/// while `dist(f(x), f(q)) <= beta * r` in the projected space. The
/// search analysis needs this count to stay small on average.
pub fn bad_candidate_count(
    points: &PointSet,
    projected: &PointSet,
    q: &[f64],
    projected_q: &[f64],
    beta: f64,
    gamma: f64,
) -> Result<usize> {
    check_query(points, q)?;
    check_query(projected, projected_q)?;
    if points.n() != projected.n() {
        return Err(Error::invalid(
            "projected",
            format!(
                "must pair with points: {} original vs {} projected",
                points.n(),
                projected.n()
            ),
        ));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta", "must be a finite real > 0"));
    }
    if !(gamma >= beta && gamma.is_finite()) {
        return Err(Error::invalid("gamma", "must be finite and >= beta"));
    }
    let r = points
        .iter()
        .map(|x| dist(x, q))
        .min_by(f64::total_cmp)
        .expect("nonempty");
    Ok((0..points.n())
        .filter(|&i| {
            dist(points.point(i), q) > gamma * r
                && dist(projected.point(i), projected_q) <= beta * r
        })
        .count())
}

/// Measures how fast metric balls grow in `points`: the largest observed
/// ratio `|B(c, 2r)| / |B(c, r)|` over a deterministic sample of centers
/// `c` (every `ceil(n/32)`-th point) and radii `r` chosen as the
/// distance from `c` to its `m`-th nearest neighbor for `m = rho, 2 rho,
/// 4 rho, ...`, so every measured ball holds at least `rho` points.
/// Returns at least 1. A set whose rate is bounded by `c` supports the
/// growth-based choice of projection dimension.
pub fn expansion_rate(points: &PointSet, rho: usize) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if rho == 0 {
        return Err(Error::invalid("rho", "must be >= 1"));
    }
    let n = points.n();
    let mut best: f64 = 1.0;
    let step = n.div_ceil(32).max(1);
    for c in (0..n).step_by(step) {
        let center = points.point(c);
        let mut dists: Vec<f64> = points.iter().map(|x| dist(x, center)).collect();
        dists.sort_unstable_by(f64::total_cmp);
        let mut m = rho;
        while m <= n {
            let r = dists[m - 1];
            let count_r = dists.partition_point(|&d| d <= r);
            let count_2r = dists.partition_point(|&d| d <= 2.0 * r);
            best = best.max(count_2r as f64 / count_r as f64);
            m *= 2;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{tail_bound, ProjectionMap, ProjectionMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_points(n: usize, d: usize, seed: u64) -> PointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-20.0..20.0)).collect();
        PointSet::new(d, data).unwrap()
    }

    #[test]
    fn brute_knn_matches_full_sort() {
        for seed in 0..5u64 {
            let ps = random_points(120, 3, seed);
            let q = [0.0, 1.0, -1.0];
            for k in [1usize, 7, 120] {
                let got = brute_knn(&ps, &q, k).unwrap();
                let mut all: Vec<(f64, usize)> = (0..ps.n())
                    .map(|i| (sq_dist(ps.point(i), &q), i))
                    .collect();
                all.sort_by(|a, b| cmp_dist_index(*a, *b));
                for (g, (d2, i)) in got.iter().zip(all.iter().take(k)) {
                    assert_eq!(g.index, *i);
                    assert_eq!(g.dist, d2.sqrt());
                }
            }
        }
    }

    #[test]
    fn brute_knn_breaks_ties_by_index() {
        // Four copies of the same point: ties resolve to lower indices.
        let ps = PointSet::new(1, vec![5.0, 5.0, 1.0, 5.0, 5.0]).unwrap();
        let got = brute_knn(&ps, &[5.0], 3).unwrap();
        let idxs: Vec<usize> = got.iter().map(|x| x.index).collect();
        assert_eq!(idxs, vec![0, 1, 3]);
    }

    #[test]
    fn brute_knn_rejects_bad_inputs() {
        let ps = random_points(10, 2, 0);
        assert!(matches!(
            brute_knn(&ps, &[0.0, 0.0], 0),
            Err(Error::InvalidK { .. })
        ));
        assert!(matches!(
            brute_knn(&ps, &[0.0, 0.0], 11),
            Err(Error::InvalidK { .. })
        ));
        assert!(matches!(
            brute_knn(&ps, &[0.0], 1),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            brute_knn(&PointSet::with_capacity(2, 0), &[0.0, 0.0], 1),
            Err(Error::EmptyPointSet)
        ));
    }

    #[test]
    fn rank_counts_closed_ball_in_root_domain() {
        // Distances to q = 0: 1, 2, 2, 3.
        let ps = PointSet::new(1, vec![1.0, -2.0, 2.0, 3.0]).unwrap();
        assert_eq!(rank(&ps, &[0.0], &[1.0]).unwrap(), 1);
        assert_eq!(rank(&ps, &[0.0], &[2.0]).unwrap(), 3);
        assert_eq!(rank(&ps, &[0.0], &[3.0]).unwrap(), 4);
        assert_eq!(rank(&ps, &[0.0], &[0.5]).unwrap(), 0);
        assert_eq!(rank(&ps, &[0.0], &[9.0]).unwrap(), 4);
    }

    #[test]
    fn rank_of_nearest_point_is_one() {
        for seed in 0..5u64 {
            let ps = random_points(200, 4, 50 + seed);
            let q = [0.0; 4];
            let nn = brute_knn(&ps, &q, 1).unwrap()[0];
            assert_eq!(rank(&ps, &q, ps.point(nn.index)).unwrap(), 1);
        }
    }

    #[test]
    fn eps_nn_set_applies_relative_slack() {
        // Distances to q = 0: 1.0, 1.4, 1.6.
        let ps = PointSet::new(1, vec![1.0, -1.4, 1.6]).unwrap();
        assert_eq!(eps_nn_set(&ps, &[0.0], 0.5).unwrap(), vec![0, 1]);
        assert_eq!(eps_nn_set(&ps, &[0.0], 0.0).unwrap(), vec![0]);
        assert_eq!(eps_nn_set(&ps, &[0.0], 1.0).unwrap(), vec![0, 1, 2]);
        assert!(eps_nn_set(&ps, &[0.0], -0.5).is_err());
    }

    #[test]
    fn eps_nn_set_keeps_all_tied_minima() {
        let ps = PointSet::new(1, vec![2.0, -2.0, 5.0]).unwrap();
        assert_eq!(eps_nn_set(&ps, &[0.0], 0.0).unwrap(), vec![0, 1]);
    }

    #[test]
    fn bad_candidate_count_on_hand_instance() {
        // q = origin; nearest point at distance 1; beta = 1.2,
        // gamma = 1.5. Point 2 sits at true distance 1.6 (> gamma) and
        // projected distance 1.1 (<= beta): exactly one bad candidate.
        let points = PointSet::new(2, vec![1.0, 0.0, 2.0, 0.0, 0.0, 1.6]).unwrap();
        let projected = PointSet::new(2, vec![1.0, 0.0, 2.0, 0.0, 0.0, 1.1]).unwrap();
        let q = [0.0, 0.0];
        let n = bad_candidate_count(&points, &projected, &q, &q, 1.2, 1.5).unwrap();
        assert_eq!(n, 1);
        // An isometric "projection" (the identity) has none.
        let n = bad_candidate_count(&points, &points, &q, &q, 1.2, 1.5).unwrap();
        assert_eq!(n, 0);
        assert!(bad_candidate_count(&points, &projected, &q, &q, 1.5, 1.2).is_err());
        assert!(bad_candidate_count(&points, &projected, &q, &q, 0.0, 1.5).is_err());
    }

    #[test]
    fn bad_candidate_rate_respects_projection_tail_bound() {
        // Worst-case planted instance: the nearest neighbor at distance
        // 1, everything else on a shell just outside gamma. A point goes
        // bad only if the projection contracts its direction below
        // beta / (gamma * 1.0001), so the per-point rate must respect the
        // contraction tail bound at beta/gamma (with Monte Carlo slack).
        let (d, d_prime, n_shell) = (50usize, 20usize, 500usize);
        let (beta, gamma) = (1.2f64, 1.5f64);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut data = vec![0.0; d];
        data[0] = 1.0; // the nearest neighbor, at distance exactly 1
        for _ in 0..n_shell {
            let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            data.extend(g.iter().map(|v| v / norm * gamma * 1.0001));
        }
        let points = PointSet::new(d, data).unwrap();
        let q = vec![0.0; d];
        let trials = 200u64;
        let mut total_bad = 0usize;
        for t in 0..trials {
            let map =
                ProjectionMap::sample(d, d_prime, ProjectionMode::Gaussian, 1_000 + t).unwrap();
            let projected = map.project_set(&points).unwrap();
            let f_q = map.project(&q).unwrap();
            total_bad +=
                bad_candidate_count(&points, &projected, &q, &f_q, beta, gamma).unwrap();
        }
        let per_point_rate = total_bad as f64 / (trials as usize * n_shell) as f64;
        let bound = tail_bound(beta / gamma, d_prime).unwrap();
        assert!(
            per_point_rate <= 2.0 * bound,
            "rate {per_point_rate} exceeds twice the bound {bound}"
        );
        assert!(per_point_rate > 0.0, "test is vacuous: no bad candidate ever");
    }

    #[test]
    fn expansion_rate_on_a_line_grid() {
        // Evenly spaced points on a line: doubling a ball's radius at
        // most roughly doubles its population.
        let n = 512;
        let data: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let ps = PointSet::new(1, data).unwrap();
        let rate = expansion_rate(&ps, 2).unwrap();
        assert!(rate >= 1.4, "rate {rate}");
        assert!(rate <= 3.0, "rate {rate}");
    }

    #[test]
    fn expansion_rate_of_coincident_points_is_one() {
        let ps = PointSet::new(2, vec![1.0; 2 * 40]).unwrap();
        assert_eq!(expansion_rate(&ps, 2).unwrap(), 1.0);
        assert!(expansion_rate(&ps, 0).is_err());
    }
}
