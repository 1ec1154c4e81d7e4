//! Statistical checks on the pair sampler and correlation harness.

mod common;

use common::{balanced_binary_tree, random_tree};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use taxeval::synthbench::{sample_pairs, SampleMode};

/// On a full binary tree of depth 7 every distance 1..=7 is attainable
/// from every leaf, so realized distances must be uniform. Bounds are the
/// ±3 sigma multinomial envelope.
#[test]
fn distance_histogram_is_uniform_on_balanced_tree() {
    let tree = balanced_binary_tree(7);
    let n = 10_000usize;
    let max_dist = 7usize;
    for mode in [SampleMode::Hp, SampleMode::Hr] {
        let samples = sample_pairs(&tree, n, max_dist, mode, 2718).unwrap();
        let mut histogram = vec![0usize; max_dist + 1];
        for s in &samples {
            histogram[s.distance] += 1;
        }
        let p = 1.0 / max_dist as f64;
        let expected = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for d in 1..=max_dist {
            let count = histogram[d] as f64;
            assert!(
                (count - expected).abs() <= 3.0 * sigma,
                "{mode:?} distance {d}: count {count}, expected {expected} ± {}",
                3.0 * sigma
            );
        }
        assert_eq!(histogram[0], 0);
    }
}

#[test]
fn sampled_distances_are_exact() {
    let tree = balanced_binary_tree(5);
    let samples = sample_pairs(&tree, 2_000, 7, SampleMode::Hp, 99).unwrap();
    for s in &samples {
        assert_eq!(
            s.distance,
            tree.node_distance(s.reference, s.candidate).unwrap()
        );
        assert!(tree.is_leaf(s.reference).unwrap());
        assert!(s.distance >= 1);
    }
}

#[test]
fn hr_mode_always_has_full_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    for _ in 0..10 {
        let tree = random_tree(&mut rng, 60);
        if tree.leaves().iter().all(|&l| tree.depth(l).unwrap() == 0) {
            continue;
        }
        let samples = sample_pairs(&tree, 500, 5, SampleMode::Hr, 7).unwrap();
        for s in &samples {
            assert_eq!(s.hp, 1.0);
            let anc = tree.ancestors(s.reference).unwrap();
            assert!(anc[1..].contains(&s.candidate));
        }
    }
}

#[test]
fn shallow_references_still_realize_uniformly_over_attainable() {
    // chain of depth 3: an hr-mode reference can realize distances 1..=3
    // even though max_dist is 7; the rejection loop must converge.
    let tree = {
        use taxeval::taxonomy::{NodeRecord, TaxonomyTree};
        TaxonomyTree::from_records(&[
            NodeRecord::new("root", None, "R"),
            NodeRecord::new("a", Some("root"), "A"),
            NodeRecord::new("b", Some("a"), "B"),
            NodeRecord::new("leaf", Some("b"), "L"),
        ])
        .unwrap()
    };
    let samples = sample_pairs(&tree, 3_000, 7, SampleMode::Hr, 5).unwrap();
    let mut histogram = [0usize; 8];
    for s in &samples {
        histogram[s.distance] += 1;
    }
    assert_eq!(histogram[4..].iter().sum::<usize>(), 0);
    for d in 1..=3 {
        let frac = histogram[d] as f64 / samples.len() as f64;
        assert!((frac - 1.0 / 3.0).abs() < 0.05, "distance {d}: {frac}");
    }
}
