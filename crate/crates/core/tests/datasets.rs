mod common;

use cobra_core::super_instances::build_super_instances;
use cobra_core::{
    ari, baseline_closure, cross_validate, run_cobra, Dataset, LabelOracle, PairOrdering,
    ReplayOracle,
};
use common::{prepared, raw, simulate_closest_first, BUNDLED};

#[test]
fn iris_dedupes_to_147() {
    let d = raw("iris", "class");
    assert_eq!(d.len(), 150);
    assert_eq!(d.dedupe().len(), 147);
    assert_eq!(d.dim(), 4);
}

#[test]
fn iris_super_instances_partition() {
    let d = prepared("iris");
    let set = build_super_instances(&d, 25, 0, None).unwrap();
    assert_eq!(set.len(), 25);
    let mut ids: Vec<usize> = set.groups.concat();
    ids.sort_unstable();
    assert_eq!(ids, (0..147).collect::<Vec<_>>());
}

#[test]
fn closest_first_on_two_label_pairs() {
    // brute-force simulation: ML(0,1), ML(2,3), CL(1,2); the rest is entailed
    let d = Dataset::from_rows(vec![vec![0.0], vec![1.0], vec![5.0], vec![6.5]], None).unwrap();
    let labels = vec![0, 0, 1, 1];
    let expected = simulate_closest_first(&d, &labels);
    assert_eq!(expected, 3);
    let out = baseline_closure(&d, LabelOracle::new(labels), PairOrdering::ClosestFirst).unwrap();
    assert_eq!(out.oracle_count, expected);
}

#[test]
fn closest_first_matches_brute_force_on_iris() {
    let d = prepared("iris");
    let labels = d.label_ids().unwrap();
    let out = baseline_closure(&d, LabelOracle::new(labels.clone()), PairOrdering::ClosestFirst).unwrap();
    assert_eq!(out.oracle_count, simulate_closest_first(&d, &labels));
}

#[test]
fn closest_first_beats_random_order_everywhere() {
    for &(name, _) in BUNDLED {
        let d = prepared(name);
        let labels = d.label_ids().unwrap();
        let closest =
            baseline_closure(&d, LabelOracle::new(labels.clone()), PairOrdering::ClosestFirst)
                .unwrap()
                .oracle_count as f64;
        let random: f64 = (0..5)
            .map(|seed| {
                baseline_closure(&d, LabelOracle::new(labels.clone()), PairOrdering::Random { seed })
                    .unwrap()
                    .oracle_count as f64
            })
            .sum::<f64>()
            / 5.0;
        assert!(closest <= random, "{name}: closest {closest} > random mean {random}");
    }
}

#[test]
fn separable_pure_data_scores_perfectly_in_every_fold() {
    // five tight, far-apart blobs; one label per blob
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for blob in 0..5 {
        for i in 0..12 {
            rows.push(vec![blob as f64 * 100.0 + (i % 4) as f64 * 0.1, (i / 4) as f64 * 0.1]);
            labels.push(format!("c{blob}"));
        }
    }
    let d = Dataset::from_rows(rows, Some(labels)).unwrap();
    for f in cross_validate(&d, 10, 5, 3).unwrap() {
        assert_eq!(f.ari_test, 1.0, "fold {}", f.fold_index);
        assert_eq!(f.n_clusters_found, 5);
    }
}

#[test]
fn replay_from_another_seed_diverges() {
    let d = prepared("iris");
    let labels = d.label_ids().unwrap();
    let first = run_cobra(&d, 25, LabelOracle::new(labels.clone()), 1, None).unwrap();
    let mut buf = Vec::new();
    first.log.write_ndjson(&mut buf).unwrap();
    let records = cobra_core::query_log::read_ndjson(&buf[..]).unwrap();

    let same = run_cobra(&d, 25, ReplayOracle::new(records.clone()), 1, None).unwrap();
    assert_eq!(same.clustering, first.clustering);

    let other = run_cobra(&d, 25, ReplayOracle::new(records), 2, None).unwrap_err();
    assert!(
        matches!(other, cobra_core::CobraError::Oracle { source: cobra_core::OracleError::Divergence { .. }, .. }),
        "{other}"
    );
}

#[test]
fn cobra_clusters_iris_well_without_folds() {
    let d = prepared("iris");
    let labels = d.label_ids().unwrap();
    let out = run_cobra(&d, 25, LabelOracle::new(labels.clone()), 0, None).unwrap();
    assert_eq!(out.clustering.n_clusters(), 3);
    assert!(ari(&out.clustering.assignment, &labels, None).unwrap() > 0.8);
    let stats = out.store.derived_stats();
    assert!(stats.derivable_pairs > stats.queried);
}
