//! Randomized property tests: the incremental split scan against a brute-force
//! oracle, impurity identities, tree structural invariants, metric invariances,
//! and model round-trips.

use proptest::prelude::*;
use smerf::impurity::{
    avg_pairwise_distance, best_split_scan, gini_impurity, sample_variance, split_gain, NodeSample,
};
use smerf::metrics::{auc_pr, auc_roc, rmse_pairs, spearman_per_point};
use smerf::model::{deserialize_forest, serialize_forest};
use smerf::reductions::{
    assert_tree_equivalence, grow_reference_tree, indicator_distance, squared_half_distance,
    LabeledData,
};
use smerf::rng::derive_stream;
use smerf::tree::{grow_tree, TreeNode};
use smerf::types::{DistanceMatrix, FeatureMatrix, Hyperparams, ProjectionMode, Sampling};

fn symmetric_matrix(n: usize) -> impl Strategy<Value = DistanceMatrix> {
    prop::collection::vec(0.0..1.0f64, n * (n + 1) / 2).prop_map(move |upper| {
        let mut values = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                values[i * n + j] = upper[k];
                values[j * n + i] = upper[k];
                k += 1;
            }
        }
        DistanceMatrix::from_flat(n, values).unwrap()
    })
}

/// Brute force over every midpoint threshold, scoring each partition with the
/// standalone `split_gain`, tie-broken exactly as the scan (strictly greater
/// gain wins, so the smallest qualifying threshold is kept).
fn oracle_best_split(
    z: &DistanceMatrix,
    s: &NodeSample,
    values: &[f64],
) -> Option<(f64, f64, usize)> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best: Option<(f64, f64, usize)> = None;
    for k in 1..sorted.len() {
        if sorted[k] > sorted[k - 1] {
            let mid = 0.5 * (sorted[k - 1] + sorted[k]);
            let tau = if mid < sorted[k] { mid } else { sorted[k - 1] };
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for (pos, &row) in s.indices().iter().enumerate() {
                if values[pos] <= tau {
                    left.push(row);
                } else {
                    right.push(row);
                }
            }
            let gain = split_gain(
                z,
                s,
                &NodeSample::new(left.clone()).unwrap(),
                &NodeSample::new(right).unwrap(),
            )
            .unwrap();
            if best.map_or(true, |(_, g, _)| gain > g) {
                best = Some((tau, gain, left.len()));
            }
        }
    }
    best
}

fn random_features(n: usize, p: usize, seed: u64) -> FeatureMatrix {
    use rand::Rng;
    let mut rng = derive_stream(seed, 0);
    let values: Vec<f64> = (0..n * p).map(|_| rng.random_range(0.0..1.0)).collect();
    FeatureMatrix::new(n, p, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scan_matches_brute_force_oracle(
        z in symmetric_matrix(24),
        values in prop::collection::vec(prop::sample::select(vec![0.0, 0.25, 0.25, 0.5, 0.75, 1.0]), 24),
    ) {
        let s = NodeSample::new((0..24).collect()).unwrap();
        let scan = best_split_scan(&z, &s, &values).unwrap();
        let oracle = oracle_best_split(&z, &s, &values);
        match (scan, oracle) {
            (None, None) => {}
            (Some(r), Some((tau, gain, left))) => {
                prop_assert!((r.threshold - tau).abs() < 1e-9, "threshold {} vs {}", r.threshold, tau);
                prop_assert!((r.gain - gain).abs() < 1e-9, "gain {} vs {}", r.gain, gain);
                prop_assert_eq!(r.left_count, left);
            }
            (a, b) => prop_assert!(false, "scan {a:?} vs oracle {b:?}"),
        }
    }

    #[test]
    fn scan_gain_is_consistent_with_partition_gain(
        z in symmetric_matrix(16),
        values in prop::collection::vec(0.0..1.0f64, 16),
    ) {
        let s = NodeSample::new((0..16).collect()).unwrap();
        if let Some(r) = best_split_scan(&z, &s, &values).unwrap() {
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for (pos, &row) in s.indices().iter().enumerate() {
                if values[pos] <= r.threshold {
                    left.push(row);
                } else {
                    right.push(row);
                }
            }
            prop_assert_eq!(left.len(), r.left_count);
            let gain = split_gain(
                &z,
                &s,
                &NodeSample::new(left).unwrap(),
                &NodeSample::new(right).unwrap(),
            )
            .unwrap();
            prop_assert!((r.gain - gain).abs() < 1e-9);
        }
    }

    #[test]
    fn indicator_impurity_equals_gini(labels in prop::collection::vec(0usize..4, 2..40)) {
        let s = NodeSample::new((0..labels.len()).collect()).unwrap();
        let z = indicator_distance(&labels).unwrap();
        let lhs = avg_pairwise_distance(&z, &s).unwrap();
        let rhs = gini_impurity(&labels, &s).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn half_squared_impurity_equals_variance(y in prop::collection::vec(-10.0..10.0f64, 2..40)) {
        let s = NodeSample::new((0..y.len()).collect()).unwrap();
        let z = squared_half_distance(&y).unwrap();
        let lhs = avg_pairwise_distance(&z, &s).unwrap();
        let rhs = sample_variance(&y, &s).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn validate_symmetrizes_near_symmetric_input(
        base in symmetric_matrix(8),
        eps in prop::collection::vec(-1e-12..1e-12f64, 64),
    ) {
        let n = base.n();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| base.get(i, j) + eps[i * n + j]).collect())
            .collect();
        let z = DistanceMatrix::validate(rows, 1e-9).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(z.get(i, j).to_bits(), z.get(j, i).to_bits());
            }
        }
    }

    #[test]
    fn auc_roc_label_flip_complements(
        scores in prop::collection::vec(0.0..1.0f64, 4..30),
        labels in prop::collection::vec(any::<bool>(), 4..30),
    ) {
        let m = scores.len().min(labels.len());
        let scores = &scores[..m];
        let labels = &labels[..m];
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            let auc = auc_roc(scores, labels).unwrap();
            let flipped: Vec<bool> = labels.iter().map(|&l| !l).collect();
            let auc_flip = auc_roc(scores, &flipped).unwrap();
            prop_assert!((auc + auc_flip - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&auc));
            let pr = auc_pr(scores, labels).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&pr));
        }
    }

    #[test]
    fn metric_permutation_invariance(
        scores in prop::collection::vec(0.0..1.0f64, 10),
        labels in prop::collection::vec(any::<bool>(), 10),
        perm_seed in any::<u64>(),
    ) {
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            use rand::seq::SliceRandom;
            let mut order: Vec<usize> = (0..10).collect();
            let mut rng = derive_stream(perm_seed, 0);
            order.shuffle(&mut rng);
            let ps: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
            let pl: Vec<bool> = order.iter().map(|&i| labels[i]).collect();
            prop_assert!((auc_roc(&scores, &labels).unwrap() - auc_roc(&ps, &pl).unwrap()).abs() < 1e-12);
            prop_assert!((auc_pr(&scores, &labels).unwrap() - auc_pr(&ps, &pl).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn rmse_and_spearman_perfect_on_identical_matrices(z in symmetric_matrix(10)) {
        prop_assert_eq!(rmse_pairs(&z, &z).unwrap(), 0.0);
        let (rho, _) = spearman_per_point(&z, &z).unwrap();
        prop_assert!((rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grown_tree_leaves_partition_the_bag(seed in 0u64..500, min_parent in 2usize..8) {
        let x = random_features(40, 5, seed);
        let y: Vec<f64> = (0..40).map(|i| x.row(i)[0] + 0.5 * x.row(i)[1]).collect();
        let z = squared_half_distance(&y).unwrap();
        let hp = Hyperparams {
            num_trees: 1,
            d: 3,
            min_parent,
            seed,
            ..Hyperparams::default()
        };
        let mut rng = derive_stream(seed, 0);
        let tree = grow_tree(&x, &z, &hp, &mut rng).unwrap();
        let mut rows: Vec<usize> = Vec::new();
        for node in &tree.nodes {
            if let TreeNode::Leaf { rows: r, .. } = node {
                prop_assert!(!r.is_empty());
                rows.extend(r);
            }
        }
        rows.sort_unstable();
        let mut bag = tree.bag.clone();
        bag.sort_unstable();
        prop_assert_eq!(rows, bag);
    }

    #[test]
    fn split_nodes_respect_min_parent(seed in 0u64..200) {
        let x = random_features(60, 4, seed);
        let y: Vec<f64> = (0..60).map(|i| x.row(i)[2]).collect();
        let z = squared_half_distance(&y).unwrap();
        let hp = Hyperparams {
            num_trees: 1,
            d: 2,
            min_parent: 6,
            seed,
            ..Hyperparams::default()
        };
        let mut rng = derive_stream(seed, 3);
        let tree = grow_tree(&x, &z, &hp, &mut rng).unwrap();
        // every split node's descendant leaf rows must total >= min_parent
        fn subtree_rows(tree: &smerf::tree::SmerfTree, idx: usize) -> usize {
            match &tree.nodes[idx] {
                TreeNode::Leaf { rows, .. } => rows.len(),
                TreeNode::Split { left, right, .. } => {
                    subtree_rows(tree, *left) + subtree_rows(tree, *right)
                }
            }
        }
        for (idx, node) in tree.nodes.iter().enumerate() {
            if matches!(node, TreeNode::Split { .. }) {
                prop_assert!(subtree_rows(&tree, idx) >= 6);
            }
        }
    }

    #[test]
    fn gini_tree_matches_pairwise_tree_on_indicator(seed in 0u64..60) {
        let x = random_features(50, 4, seed);
        let labels: Vec<usize> = (0..50).map(|i| (x.row(i)[0] > 0.5) as usize + (x.row(i)[1] > 0.5) as usize).collect();
        let z = indicator_distance(&labels).unwrap();
        let hp = Hyperparams {
            num_trees: 1,
            d: 2,
            min_parent: 4,
            seed,
            ..Hyperparams::default()
        };
        let t1 = grow_tree(&x, &z, &hp, &mut derive_stream(seed, 0)).unwrap();
        let labeled = LabeledData::classes(labels).unwrap();
        let t2 = grow_reference_tree(&x, &labeled, &hp, &mut derive_stream(seed, 0)).unwrap();
        let cmp = assert_tree_equivalence(&t1, &t2);
        prop_assert!(cmp.equivalent, "{:?}", cmp.divergence);
    }

    #[test]
    fn variance_tree_matches_pairwise_tree_on_half_squared(seed in 0u64..60) {
        let x = random_features(50, 4, seed);
        let y: Vec<f64> = (0..50).map(|i| x.row(i)[0] * x.row(i)[3]).collect();
        let z = squared_half_distance(&y).unwrap();
        let hp = Hyperparams {
            num_trees: 1,
            d: 2,
            min_parent: 4,
            seed,
            ..Hyperparams::default()
        };
        let t1 = grow_tree(&x, &z, &hp, &mut derive_stream(seed, 0)).unwrap();
        let labeled = LabeledData::responses(y).unwrap();
        let t2 = grow_reference_tree(&x, &labeled, &hp, &mut derive_stream(seed, 0)).unwrap();
        let cmp = assert_tree_equivalence(&t1, &t2);
        prop_assert!(cmp.equivalent, "{:?}", cmp.divergence);
    }

    #[test]
    fn forest_prediction_is_symmetric_in_its_arguments(seed in 0u64..30) {
        let x = random_features(30, 4, seed);
        let y: Vec<f64> = (0..30).map(|i| x.row(i)[0]).collect();
        let z = squared_half_distance(&y).unwrap();
        let hp = Hyperparams {
            num_trees: 5,
            d: 2,
            min_parent: 4,
            seed,
            projection_mode: ProjectionMode::SparseBinary { lambda: 2.0 },
            ..Hyperparams::default()
        };
        let forest = smerf::train_forest(&x, &z, &hp).unwrap();
        let a = forest.predict_pair(x.row(3), x.row(17)).unwrap();
        let b = forest.predict_pair(x.row(17), x.row(3)).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!(a.is_finite());
    }

    #[test]
    fn model_round_trip_is_identity(seed in 0u64..30, subsample in any::<bool>()) {
        let x = random_features(25, 3, seed);
        let y: Vec<f64> = (0..25).map(|i| x.row(i)[1]).collect();
        let z = squared_half_distance(&y).unwrap();
        let hp = Hyperparams {
            num_trees: 4,
            d: 2,
            min_parent: 3,
            seed,
            sampling: if subsample { Sampling::Subsample(20) } else { Sampling::Bootstrap },
            ..Hyperparams::default()
        };
        let forest = smerf::train_forest(&x, &z, &hp).unwrap();
        let bytes = serialize_forest(&forest);
        let loaded = deserialize_forest(&bytes).unwrap();
        prop_assert_eq!(serialize_forest(&loaded), bytes);
        let before = forest.predict_pair(x.row(0), x.row(24)).unwrap();
        let after = loaded.predict_pair(x.row(0), x.row(24)).unwrap();
        prop_assert_eq!(before.to_bits(), after.to_bits());
    }
}
