//! End-to-end checks across module boundaries: generated datasets flow
//! through projection, tree search, and re-ranking, and the whole
//! pipeline is reproducible from its seeds.

use kann::datasets::{gen_gaussian, gen_planted, GaussianSpec, PlantedSpec};
use kann::embedding::ProjectionMode;
use kann::index::{build_index, AnnConfig, DPrimeRule, KRule};
use kann::{sq_dist, PointSet};

fn default_config(seed: u64, epsilon: f64) -> AnnConfig {
    AnnConfig {
        epsilon,
        delta: 0.1,
        k_rule: KRule::SqrtN,
        dprime_rule: DPrimeRule::Heuristic,
        projection_mode: ProjectionMode::Gaussian,
        seed,
    }
}

#[test]
fn planted_pipeline_recovers_planted_neighbors() {
    let spec = PlantedSpec::new(2000, 50, 50, 0.5, 2.0, 101);
    let data = gen_planted(&spec).unwrap();
    let index = build_index(data.points.clone(), default_config(7, spec.epsilon)).unwrap();
    let report = index.report();
    assert_eq!(report.k, 45); // ceil(sqrt(2000))
    assert_eq!(report.dim_proj, 4); // ceil(ln n / ln ln n)

    let stop = spec.radius * (1.0 + 1e-9);
    let mut hits = 0;
    for (i, pair) in data.pairs.iter().enumerate() {
        let got = index
            .query_with_early_stop(data.queries.point(i), Some(stop))
            .unwrap();
        if got.neighbor.index == pair.point {
            hits += 1;
            assert!(got.neighbor.dist <= stop);
        } else {
            // Anything else lives outside the exclusion ball.
            assert!(got.neighbor.dist > (1.0 + spec.epsilon) * spec.radius);
        }
    }
    assert!(hits >= 45, "only {hits}/50 planted neighbors recovered");
}

#[test]
fn pipeline_is_reproducible_from_seeds() {
    let spec = PlantedSpec::new(800, 20, 30, 0.5, 2.0, 5);
    let gen = || {
        let data = gen_planted(&spec).unwrap();
        let index = build_index(data.points.clone(), default_config(11, 0.5)).unwrap();
        (0..data.queries.n())
            .map(|i| index.query(data.queries.point(i)).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(gen(), gen());
}

#[test]
fn projected_candidates_match_external_reprojection() {
    let spec = PlantedSpec::new(600, 10, 40, 0.5, 2.0, 23);
    let data = gen_planted(&spec).unwrap();
    let index = build_index(data.points.clone(), default_config(3, 0.5)).unwrap();
    for i in 0..data.queries.n() {
        let q = data.queries.point(i);
        let f_q = index.map().project(q).unwrap();
        for c in index.projected_candidates(q).unwrap() {
            let f_x = index.map().project(data.points.point(c.index)).unwrap();
            assert_eq!(c.dist, sq_dist(&f_x, &f_q).sqrt());
        }
    }
}

#[test]
fn gaussian_pipeline_answers_from_the_query_cluster() {
    let spec = GaussianSpec::new(2000, 50, 50, 31);
    let data = gen_gaussian(&spec).unwrap();
    let index = build_index(data.points.clone(), default_config(17, 0.5)).unwrap();
    let mut start = 0;
    for (i, &size) in data.cluster_sizes.iter().enumerate() {
        let got = index.query(data.queries.point(i)).unwrap();
        assert!(
            (start..start + size).contains(&got.neighbor.index),
            "query {i} answered from outside its own cluster"
        );
        start += size;
    }
}

#[test]
fn guarantee_rule_pipeline_handles_square_projection() {
    // At this scale the guarantee rule wants more dimensions than the
    // data has; the pipeline caps it and still answers exactly from
    // within the exclusion ball.
    let spec = PlantedSpec::new(500, 10, 25, 0.5, 2.0, 77);
    let data = gen_planted(&spec).unwrap();
    let config = AnnConfig {
        epsilon: 0.5,
        delta: 0.1,
        k_rule: KRule::Explicit(20),
        dprime_rule: DPrimeRule::Guarantee,
        projection_mode: ProjectionMode::Orthonormal,
        seed: 2,
    };
    let index = build_index(data.points.clone(), config).unwrap();
    assert!(index.report().clamped);
    assert_eq!(index.report().dim_proj, 25);
    for (i, pair) in data.pairs.iter().enumerate() {
        // Orthonormal square map is an isometry: the planted point is
        // the exact nearest neighbor and must come back.
        let got = index.query(data.queries.point(i)).unwrap();
        assert_eq!(got.neighbor.index, pair.point);
    }
}

#[test]
fn datasets_feed_point_sets_of_matching_shape() {
    let planted = gen_planted(&PlantedSpec::new(100, 5, 12, 0.5, 2.0, 1)).unwrap();
    assert_eq!(planted.points.dim(), planted.queries.dim());
    let gauss = gen_gaussian(&GaussianSpec::new(100, 5, 12, 1)).unwrap();
    assert_eq!(gauss.points.dim(), gauss.queries.dim());
    // Mixing dimensions across sets is caught at the query boundary.
    let index = build_index(planted.points, default_config(0, 0.5)).unwrap();
    let wrong: Vec<f64> = vec![0.0; 13];
    assert!(index.query(&wrong).is_err());
    let _ = PointSet::new(12, vec![0.0; 24]).unwrap();
}
