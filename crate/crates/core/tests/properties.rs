use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use perturbkit::io;
use perturbkit::metrics::{consensus_curve, consensus_score, EvalOptions, Prediction, PredictionSet};
use perturbkit::model::Dataset;
use perturbkit::subsample::{cluster_cost, subsample, BudgetSpec};
use perturbkit::sweep::{self, ResponderParams};
use perturbkit::verification::AnnotationSet;
use perturbkit::{seed, synthetic, Error};

fn pool() -> impl Strategy<Value = Dataset> {
    (prop::collection::vec(1usize..=9, 1..30), 0.0..=1.0f64, any::<u64>())
        .prop_map(|(sizes, yes, s)| synthetic::from_cluster_sizes(&sizes, yes, s))
}

fn predictions(ds: &Dataset, p: f64, s: u64) -> PredictionSet {
    let mut rng = seed::rng(s);
    let mut out = PredictionSet::new();
    for inst in ds.instances() {
        let predicted = if rng.gen_bool(p) {
            inst.label
        } else {
            inst.label.flipped()
        };
        let confidence = Some(rng.gen_range(0.0..=1.0));
        out.insert(inst.id.clone(), Prediction { predicted, confidence })
            .unwrap();
    }
    out
}

fn round_trip_dataset(ds: &Dataset) -> Dataset {
    let mut buf = Vec::new();
    io::write_dataset(ds, &mut buf).unwrap();
    io::read_dataset(buf.as_slice()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn budget_is_spent_greedily(ds in pool(), b in 1.0..80.0f64, c in 1usize..=8, r in 0.0..=1.0f64, s in any::<u64>()) {
        let spec = BudgetSpec::new(b, c, r).with_seed(s);
        let cheapest = ds.clusters().map(|cl| cluster_cost(c.min(cl.size()), r).unwrap()).fold(f64::INFINITY, f64::min);
        let m = match subsample(&ds, &spec) {
            Ok(m) => m,
            Err(Error::BudgetTooSmall { .. }) => {
                prop_assert!(cheapest > b * (1.0 + 1e-9), "refused although a selection costing {cheapest} fits");
                return Ok(());
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert!(m.realized_cost <= b * (1.0 + 1e-9));
        let chosen: BTreeSet<&str> = m.chosen.iter().map(|sel| sel.cluster_id.as_str()).collect();
        let left = b - m.realized_cost;
        for cluster in ds.clusters().filter(|cl| !chosen.contains(cl.cluster_id.as_str())) {
            let cost = cluster_cost(c.min(cluster.size()), r).unwrap();
            prop_assert!(left < cost + 1e-9 * b, "{} (cost {cost}) still fits in {left}", cluster.cluster_id);
        }
        for sel in &m.chosen {
            let cluster = ds.cluster(&sel.cluster_id).unwrap();
            prop_assert!(sel.instance_ids.len() <= c);
            prop_assert_eq!(sel.instance_ids.first(), cluster.seed_id.as_ref());
        }
        prop_assert_eq!(subsample(&ds, &spec).unwrap(), m);
    }

    #[test]
    fn cheaper_perturbations_never_shrink_n(
        ds in pool(), b in 1.0..80.0f64, c in 1usize..=8, r1 in 0.0..=1.0f64, r2 in 0.0..=1.0f64, s in any::<u64>()
    ) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let n = |r: f64| subsample(&ds, &BudgetSpec::new(b, c, r).with_seed(s)).map_or(0, |m| m.realized_n);
        let (cheap, dear) = (n(lo), n(hi));
        prop_assert!(cheap >= dear, "N {cheap} at r={lo} < N {dear} at r={hi}");
    }

    #[test]
    fn exact_multiples_spend_the_whole_budget(c in 1usize..=6, tenths in 0u32..=10, clusters in 1usize..60) {
        let r = f64::from(tenths) / 10.0;
        let b = clusters as f64 * (1.0 + (c - 1) as f64 * r);
        let ds = synthetic::uniform_clusters(clusters + 5, c, 0.5, 1);
        let m = subsample(&ds, &BudgetSpec::new(b, c, r)).unwrap();
        prop_assert_eq!(m.realized_c_count, clusters);
        prop_assert!((m.realized_cost - b).abs() <= 1e-9 * b);
    }

    #[test]
    fn consensus_falls_with_k_on_uniform_sizes(size in 4usize..=8, n in 1usize..40, p in 0.0..=1.0f64, s in any::<u64>()) {
        let ds = synthetic::uniform_clusters(n, size, 0.5, s);
        let preds = predictions(&ds, p, s);
        let curve = consensus_curve(&preds, &ds, &[1, 2, 3, 4], &EvalOptions::default()).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[1].cs_exact <= w[0].cs_exact);
        }
    }

    #[test]
    fn consensus_extremes(ds in pool(), k in 1usize..=3, p in 0.0..=1.0f64, s in any::<u64>()) {
        let preds = predictions(&ds, p, s);
        let Ok(report) = consensus_score(&preds, &ds, k, &EvalOptions::default()) else {
            return Ok(());
        };
        let all_right = report.per_cluster.iter().all(|c| c.m == c.n);
        let none_k = report.per_cluster.iter().all(|c| c.m < k);
        prop_assert_eq!(report.cs_value == 1.0, all_right);
        prop_assert_eq!(report.cs_value == 0.0, none_k);
    }

    #[test]
    fn metrics_ignore_order_and_confidence(ds in pool(), p in 0.0..=1.0f64, s in any::<u64>()) {
        let preds = predictions(&ds, p, s);
        let opts = EvalOptions::default();
        let mut shuffled = ds.instances().to_vec();
        shuffled.shuffle(&mut seed::rng(s ^ 1));
        let permuted = Dataset::new(shuffled);
        let mut stripped = PredictionSet::new();
        for (id, pr) in preds.iter() {
            stripped.insert(id, Prediction { predicted: pr.predicted, confidence: None }).unwrap();
        }
        let acc = perturbkit::accuracy(&preds, &ds, &opts).unwrap();
        prop_assert_eq!(&perturbkit::accuracy(&stripped, &permuted, &opts).unwrap(), &acc);
        let a = consensus_score(&preds, &ds, 1, &opts).unwrap();
        let b = consensus_score(&stripped, &permuted, 1, &opts).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dataset_round_trip_and_line_order(ds in pool(), s in any::<u64>()) {
        let back = round_trip_dataset(&ds);
        prop_assert_eq!(back.instances(), ds.instances());
        let mut buf = Vec::new();
        io::write_dataset(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.shuffle(&mut seed::rng(s));
        let permuted = io::read_dataset(lines.join("\n").as_bytes()).unwrap();
        prop_assert_eq!(permuted.instances(), ds.instances());
    }

    #[test]
    fn predictions_and_annotations_round_trip(ds in pool(), s in any::<u64>()) {
        let preds = predictions(&ds, 0.5, s);
        let mut buf = Vec::new();
        io::write_predictions(&preds, &mut buf).unwrap();
        prop_assert_eq!(io::read_predictions(buf.as_slice()).unwrap(), preds);

        let ann = synthetic::simulate_annotations(&ds, Default::default(), s);
        let mut buf = Vec::new();
        io::write_annotations(&ann, &mut buf).unwrap();
        let back: AnnotationSet = io::read_annotations(buf.as_slice()).unwrap();
        prop_assert_eq!(back.records().collect::<Vec<_>>(), ann.records().collect::<Vec<_>>());
    }

    #[test]
    fn manifests_round_trip(ds in pool(), b in 1.0..50.0f64, c in 1usize..=5, r in 0.0..=1.0f64) {
        let Ok(m) = subsample(&ds, &BudgetSpec::new(b, c, r)) else {
            return Ok(());
        };
        let rec = io::ManifestRecord::new(m.spec.experiment_id(), 2, &m);
        let mut buf = Vec::new();
        io::write_manifests(std::slice::from_ref(&rec), &mut buf).unwrap();
        let back = io::read_manifests(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &vec![rec]);
        prop_assert_eq!(back[0].to_manifest(), m);
    }

    #[test]
    fn aggregation_ignores_record_order(accs in prop::collection::vec(0.0..=1.0f64, 10), s in any::<u64>()) {
        let mut grid = sweep::GridSpec::new(vec![100.0], vec![1, 2], vec![0.5]);
        grid.n_replicas = 5;
        let points = sweep::build_grid(&grid).unwrap();
        let mut records: Vec<io::ResultRecord> = points
            .iter()
            .zip(&accs)
            .map(|(p, &accuracy)| io::ResultRecord {
                experiment_id: p.experiment_id.clone(),
                replica: p.replica,
                eval_set: "dev".into(),
                accuracy,
            })
            .collect();
        let before = sweep::collect_results(&points, &records).unwrap();
        records.shuffle(&mut seed::rng(s));
        let after = sweep::collect_results(&points, &records).unwrap();
        prop_assert_eq!(before.len(), after.len());
        for (x, y) in before.iter().zip(&after) {
            prop_assert_eq!(&x.experiment_id, &y.experiment_id);
            prop_assert!((x.mean - y.mean).abs() < 1e-12 && (x.std - y.std).abs() < 1e-12);
        }
    }
}

#[test]
fn responder_accuracy_converges_to_mixture() {
    let eval = synthetic::uniform_clusters(2500, 4, 0.5, 8);
    for (mastery, rho) in [(0.2, 0.0), (0.6, 0.5), (0.9, 1.0)] {
        let params = ResponderParams {
            mastery_base: mastery,
            rho,
            seed: 3,
            ..Default::default()
        };
        let preds = sweep::simulate_responder(&eval, &params, None).unwrap();
        let acc = perturbkit::accuracy(&preds, &eval, &EvalOptions::default())
            .unwrap()
            .accuracy;
        let expected = mastery * 0.9 + (1.0 - mastery) * 0.5;
        assert!((acc - expected).abs() <= 0.01, "mastery {mastery}: {acc} vs {expected}");
        assert_eq!(expected, params.expected_accuracy(None));
    }
}
