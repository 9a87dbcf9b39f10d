mod support;

use pacc::clustering::*;
use pacc::rng::seeded;
use pacc::stats::adjusted_rand_index;
use proptest::prelude::*;
use rand::Rng;
use support::*;

#[test]
fn small_instances_reach_the_brute_force_optimum() {
    for seed in 0..12 {
        let points = random_points(8, 2, seed);
        for k in 1..=3 {
            let fit = kmeans(&points, k, seed, 20).unwrap();
            let optimum = brute_force_inertia(&points, k);
            assert!(fit.inertia <= optimum + 1e-9, "seed {seed} k {k}: {} vs {optimum}", fit.inertia);
        }
    }
}

#[test]
fn separated_blobs_are_found() {
    let mut rng = seeded(9);
    let centers = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for i in 0..60 {
        let c = centers[i % 3];
        points.push(c.iter().map(|x| x + rng.random_range(-0.05..0.05)).collect::<Vec<f64>>());
        truth.push(i % 3);
    }
    let fit = kmeans(&points, 3, 1, DEFAULT_RESTARTS).unwrap();
    assert_eq!(adjusted_rand_index(&fit.labels, &truth), 1.0);
    let report = elbow_scan(&points, 1..=6, 1, DEFAULT_RESTARTS).unwrap();
    assert_eq!(select_k(&report).unwrap(), 3);
}

#[test]
fn elbow_inertia_is_non_increasing_in_k() {
    let points = random_points(40, 5, 3);
    let report = elbow_scan(&points, 1..=8, 0, DEFAULT_RESTARTS).unwrap();
    for w in report.rows.windows(2) {
        assert!(w[1].inertia <= w[0].inertia + 1e-9);
    }
}

#[test]
fn elbow_range_is_checked() {
    let points = random_points(5, 2, 0);
    assert!(elbow_scan(&points, 1..=6, 0, 1).is_err());
    assert!(elbow_scan(&points, 0..=3, 0, 1).is_err());
}

#[test]
fn cluster_model_lists_members_in_id_order() {
    let ids: Vec<String> = ["b", "a", "c", "d"].map(String::from).to_vec();
    let points = vec![vec![0.0], vec![0.1], vec![5.0], vec![5.1]];
    let model = cluster_drivers(&ids, &points, 2, 0, 5).unwrap();
    let low = model.assignments["a"];
    assert_eq!(model.members(low), vec!["a", "b"]);
    assert_eq!(model.nearest(&[4.9]), model.assignments["c"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lloyd_iterations_never_raise_inertia(seed in 0u64..10_000, n in 4usize..40, k in 1usize..4) {
        let points = random_points(n, 3, seed);
        let fit = kmeans(&points, k, seed, 1).unwrap();
        for w in fit.trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        }
        let recomputed: f64 = points.iter().zip(&fit.labels).map(|(p, &l)| sq(p, &fit.centroids[l])).sum();
        prop_assert!((recomputed - fit.inertia).abs() < 1e-9 * recomputed.max(1.0));
    }

    #[test]
    fn labels_point_to_the_nearest_centroid(seed in 0u64..10_000, n in 3usize..30) {
        let points = random_points(n, 2, seed);
        let fit = kmeans(&points, 3.min(n), seed, 3).unwrap();
        for (p, &l) in points.iter().zip(&fit.labels) {
            let d = sq(p, &fit.centroids[l]);
            prop_assert!(fit.centroids.iter().all(|c| d <= sq(p, c) + 1e-12));
        }
    }

    #[test]
    fn ari_ignores_label_names(labels in proptest::collection::vec(0usize..4, 2..40), shift in 1usize..4) {
        let renamed: Vec<usize> = labels.iter().map(|l| (l + shift) % 4).collect();
        prop_assert!((adjusted_rand_index(&labels, &renamed) - 1.0).abs() < 1e-12
            || labels.iter().all(|&l| l == labels[0]));
    }
}
