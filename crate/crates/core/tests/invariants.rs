mod common;

use common::*;
use crack::codelength::{
    leaf_nominal, leaf_numeric, leaf_numeric_gaussian, leaf_numeric_uniform, nml_regret,
    universal_int, NumericStats,
};
use crack::data::robust_min_diff;
use crack::forest::{leaves_partition_rows, CodingTree};
use crack::search::trivial_forest;
use crack::synth::{generate_pair, SyntheticSpec, TypeMode};
use crack::{crack, Attribute, ModelClass, SearchOptions};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn nml_matches_enumeration() {
    check_nml_oracle(12, 5, 1e-9).unwrap();
}

#[test]
fn universal_code_is_strictly_increasing() {
    let mut prev = 0.0;
    for z in 1..5000u64 {
        let l = universal_int(z);
        assert!(l > prev, "L({z}) = {l} not above {prev}");
        prev = l;
    }
}

proptest! {
    #[test]
    fn nominal_leaf_depends_only_on_counts(mut h in prop::collection::vec(0usize..40, 1..6), seed in any::<u64>()) {
        let k = h.len();
        let base = leaf_nominal(&h, k);
        let r = (seed as usize) % k;
        h.rotate_left(r);
        prop_assert!(close(base, leaf_nominal(&h, k), 1e-12));
        h.reverse();
        prop_assert!(close(base, leaf_nominal(&h, k), 1e-12));
    }

    #[test]
    fn nominal_leaf_respects_the_entropy_bound(h in prop::collection::vec(0usize..60, 1..6)) {
        let n: usize = h.iter().sum();
        let k = h.len();
        let cost = leaf_nominal(&h, k);
        prop_assert!(cost >= 0.0 && cost.is_finite());
        prop_assert!(cost <= n as f64 * (k as f64).log2() + nml_regret(n, k) + 1e-9);
    }

    #[test]
    fn numeric_leaf_costs_are_scale_free(
        values in prop::collection::vec(-1e3f64..1e3, 2..60),
        res in 1e-3f64..1.0,
        c in 1e-3f64..1e3,
    ) {
        let s = NumericStats::from_values(&values);
        let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
        let t = NumericStats::from_values(&scaled);
        prop_assert!(close(
            leaf_numeric_gaussian(s.count, s.variance, res),
            leaf_numeric_gaussian(t.count, t.variance, res * c),
            1e-9,
        ));
        prop_assert!(close(
            leaf_numeric_uniform(s.count, s.min, s.max, res),
            leaf_numeric_uniform(t.count, t.min, t.max, res * c),
            1e-9,
        ));
    }

    #[test]
    fn leaf_costs_are_finite_and_non_negative(
        values in prop::collection::vec(-1e6f64..1e6, 0..50),
        res in 1e-6f64..10.0,
        domain in 1.0f64..1e9,
    ) {
        let s = NumericStats::from_values(&values);
        for c in [
            leaf_numeric_gaussian(s.count, s.variance, res),
            leaf_numeric_uniform(s.count, s.min, s.max, res),
            leaf_numeric(&s, res, domain).0,
        ] {
            prop_assert!(c.is_finite() && c >= 0.0, "cost {}", c);
        }
    }

    #[test]
    fn resolution_is_permutation_invariant(mut values in prop::collection::vec(-100i32..100, 2..80), seed in any::<u64>()) {
        let v: Vec<f64> = values.iter().map(|&x| x as f64 / 4.0).collect();
        let a = robust_min_diff(&v, 0.1);
        let r = (seed as usize) % values.len();
        values.rotate_left(r);
        values.reverse();
        let w: Vec<f64> = values.iter().map(|&x| x as f64 / 4.0).collect();
        let b = robust_min_diff(&w, 0.1);
        prop_assert_eq!(a.resolution, b.resolution);
    }

    #[test]
    fn domain_size_scales_with_resolution(values in prop::collection::vec(-50.0f64..50.0, 2..40), c in 0.01f64..100.0) {
        let a = Attribute::numeric_with_resolution("a", values.clone(), 0.5).unwrap();
        let b = Attribute::numeric_with_resolution("b", values.iter().map(|v| v * c).collect(), 0.5 * c).unwrap();
        prop_assert!(close(a.domain_size(), b.domain_size(), 1e-9));
    }
}

fn small_dataset(seed: u64, type_mode: TypeMode) -> crack::Dataset {
    let spec = SyntheticSpec {
        n: 200,
        seed,
        type_mode,
        phi: 0.8,
        ..SyntheticSpec::default()
    };
    generate_pair(&spec, seed as usize).unwrap().dataset
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn searched_trees_partition_rows(seed in 0u64..10_000, mode in 0usize..3) {
        let type_mode = [TypeMode::Nominal, TypeMode::Numeric, TypeMode::Mixed][mode];
        let data = small_dataset(seed, type_mode);
        let r = crack(&data, &ModelClass::unrestricted(data.m()), &SearchOptions::default()).unwrap();
        prop_assert!(leaves_partition_rows(&r.forest, data.n()));
        prop_assert!(leaves_partition_rows(&trivial_forest(&data), data.n()));
        for t in &r.forest.trees {
            let leaf_rows: usize = t.leaves().iter().map(|(_, l)| l.rows.len()).sum();
            prop_assert_eq!(leaf_rows, data.n());
            prop_assert!(t.cost() >= 0.0);
        }
    }

    #[test]
    fn relabelling_keeps_tree_costs(seed in 0u64..10_000) {
        let data = small_dataset(seed, TypeMode::Nominal);
        let mut relabelled = data.clone();
        for (i, a) in data.attributes().iter().enumerate() {
            let k = a.category_count as u32;
            let shift: Vec<u32> = (0..k).map(|c| (c + 1) % k).collect();
            relabelled = relabelled.with_attribute(i, a.relabel(&shift).unwrap()).unwrap();
        }
        let class = ModelClass::unrestricted(data.m());
        let a = crack(&data, &class, &SearchOptions::default()).unwrap();
        let b = crack(&relabelled, &class, &SearchOptions::default()).unwrap();
        prop_assert!(close(a.trivial_cost, b.trivial_cost, 1e-12));
        prop_assert!(close(a.forest.cost(), b.forest.cost(), 1e-9));
        let costs = |f: &crack::CodingForest| f.trees.iter().map(CodingTree::cost).collect::<Vec<_>>();
        for (x, y) in costs(&a.forest).iter().zip(costs(&b.forest)) {
            prop_assert!(close(*x, y, 1e-9));
        }
    }
}
