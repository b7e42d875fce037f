//! Accuracy and cluster consensus scores over external predictions.
//!
//! For a cluster of `n` instances of which the model gets `m` right, the
//! consensus score `CS(k)` is the fraction of its size-`k` subsets that are
//! answered entirely correctly, `C(m, k) / C(n, k)`. The dataset score is the
//! unweighted mean over clusters with `n >= k`; smaller clusters are skipped
//! and counted rather than scored as zero.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::model::{Dataset, Label, Split};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub predicted: Label,
    /// Carried through but never used by the metrics.
    pub confidence: Option<f64>,
}

/// Model outputs keyed by instance id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    entries: BTreeMap<String, Prediction>,
}

impl PredictionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, prediction: Prediction) -> Result<()> {
        let id = id.into();
        if let Some(c) = prediction.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::param(format!(
                    "prediction {id:?}: confidence {c} outside [0, 1]"
                )));
            }
        }
        if self.entries.contains_key(&id) {
            return Err(Error::DuplicateKey(format!("prediction id {id:?}")));
        }
        self.entries.insert(id, prediction);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Prediction> {
        self.entries.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Prediction)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Predictions equal to the gold label of every instance.
    pub fn gold(dataset: &Dataset) -> Self {
        let entries = dataset
            .instances()
            .iter()
            .map(|i| {
                (
                    i.id.clone(),
                    Prediction {
                        predicted: i.label,
                        confidence: None,
                    },
                )
            })
            .collect();
        PredictionSet { entries }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scope {
    #[default]
    All,
    Split(Split),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// A missing prediction is an error listing the missing ids.
    #[default]
    Error,
    /// A missing prediction counts as incorrect and is reported.
    Incorrect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    pub scope: Scope,
    pub missing: MissingPolicy,
}

/// Per-instance correctness for the instances in scope, keyed by id.
struct Graded<'a> {
    correct: BTreeMap<&'a str, bool>,
    missing: usize,
}

fn grade<'a>(predictions: &PredictionSet, dataset: &'a Dataset, opts: &EvalOptions) -> Result<Graded<'a>> {
    if let Some((id, _)) = predictions.iter().find(|(id, _)| !dataset.contains(id)) {
        return Err(Error::UnknownPrediction(id.to_string()));
    }
    let in_scope = dataset.instances().iter().filter(|i| match opts.scope {
        Scope::All => true,
        Scope::Split(s) => i.split == Some(s),
    });

    let mut correct = BTreeMap::new();
    let mut missing_ids = Vec::new();
    for inst in in_scope {
        match predictions.get(&inst.id) {
            Some(p) => {
                correct.insert(inst.id.as_str(), p.predicted == inst.label);
            }
            None => {
                missing_ids.push(inst.id.as_str());
                correct.insert(inst.id.as_str(), false);
            }
        }
    }
    if correct.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !missing_ids.is_empty() && opts.missing == MissingPolicy::Error {
        let mut preview = missing_ids.iter().take(10).copied().collect::<Vec<_>>().join(", ");
        if missing_ids.len() > 10 {
            preview.push_str(", ...");
        }
        return Err(Error::MissingPredictions {
            count: missing_ids.len(),
            preview,
        });
    }
    Ok(Graded {
        correct,
        missing: missing_ids.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub n_scored: usize,
    pub n_correct: usize,
    /// Instances without a prediction, counted as incorrect.
    pub n_missing: usize,
}

pub fn accuracy(predictions: &PredictionSet, dataset: &Dataset, opts: &EvalOptions) -> Result<AccuracyReport> {
    let graded = grade(predictions, dataset, opts)?;
    let n_scored = graded.correct.len();
    let n_correct = graded.correct.values().filter(|&&c| c).count();
    Ok(AccuracyReport {
        accuracy: n_correct as f64 / n_scored as f64,
        n_scored,
        n_correct,
        n_missing: graded.missing,
    })
}

/// `C(m, k) / C(n, k)` as `prod_{i<k} (m - i) / (n - i)`, exactly.
pub fn subset_fraction(n: usize, m: usize, k: usize) -> BigRational {
    assert!(m <= n && k <= n, "need m <= n and k <= n");
    if m < k {
        return BigRational::zero();
    }
    let mut num = BigInt::from(1u8);
    let mut den = BigInt::from(1u8);
    for i in 0..k {
        num *= m - i;
        den *= n - i;
    }
    BigRational::new(num, den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterScore {
    pub cluster_id: String,
    pub n: usize,
    pub m: usize,
    pub score: BigRational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusReport {
    pub k: usize,
    pub cs_value: f64,
    pub cs_exact: BigRational,
    pub clusters_scored: usize,
    /// Clusters with fewer than `k` members in scope.
    pub clusters_skipped_small: usize,
    pub n_missing: usize,
    /// Scored clusters in cluster_id order.
    pub per_cluster: Vec<ClusterScore>,
}

fn cluster_tallies(graded: &Graded<'_>, dataset: &Dataset) -> Vec<(String, usize, usize)> {
    dataset
        .clusters()
        .filter_map(|cluster| {
            let mut n = 0;
            let mut m = 0;
            for id in &cluster.members {
                if let Some(&ok) = graded.correct.get(id.as_str()) {
                    n += 1;
                    m += usize::from(ok);
                }
            }
            (n > 0).then(|| (cluster.cluster_id.clone(), n, m))
        })
        .collect()
}

fn score_k(tallies: &[(String, usize, usize)], k: usize, missing: usize) -> Result<ConsensusReport> {
    if k < 1 {
        return Err(Error::param("k must be at least 1"));
    }
    let per_cluster: Vec<ClusterScore> = tallies
        .iter()
        .filter(|(_, n, _)| *n >= k)
        .map(|(id, n, m)| ClusterScore {
            cluster_id: id.clone(),
            n: *n,
            m: *m,
            score: subset_fraction(*n, *m, k),
        })
        .collect();
    if per_cluster.is_empty() {
        let largest = tallies.iter().map(|t| t.1).max().unwrap_or(0);
        return Err(Error::KTooLarge { k, largest });
    }
    let total: BigRational = per_cluster.iter().map(|c| &c.score).sum();
    let cs_exact = total / BigInt::from(per_cluster.len());
    Ok(ConsensusReport {
        k,
        cs_value: cs_exact.to_f64().expect("finite ratio in [0, 1]"),
        cs_exact,
        clusters_scored: per_cluster.len(),
        clusters_skipped_small: tallies.len() - per_cluster.len(),
        n_missing: missing,
        per_cluster,
    })
}

pub fn consensus_score(
    predictions: &PredictionSet,
    dataset: &Dataset,
    k: usize,
    opts: &EvalOptions,
) -> Result<ConsensusReport> {
    if k < 1 {
        return Err(Error::param("k must be at least 1"));
    }
    let graded = grade(predictions, dataset, opts)?;
    score_k(&cluster_tallies(&graded, dataset), k, graded.missing)
}

/// One report per entry of `k_values`, in the given order.
pub fn consensus_curve(
    predictions: &PredictionSet,
    dataset: &Dataset,
    k_values: &[usize],
    opts: &EvalOptions,
) -> Result<Vec<ConsensusReport>> {
    if k_values.is_empty() {
        return Err(Error::param("k_values must not be empty"));
    }
    if k_values.contains(&0) {
        return Err(Error::param("k must be at least 1"));
    }
    let graded = grade(predictions, dataset, opts)?;
    let tallies = cluster_tallies(&graded, dataset);
    k_values.iter().map(|&k| score_k(&tallies, k, graded.missing)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Instance, Kind, PassageRef};
    use crate::synthetic;

    fn flip(predictions: &mut PredictionSet, dataset: &Dataset, ids: &[&str]) {
        let mut fresh = PredictionSet::new();
        for inst in dataset.instances() {
            let predicted = if ids.contains(&inst.id.as_str()) {
                inst.label.flipped()
            } else {
                inst.label
            };
            fresh
                .insert(
                    inst.id.clone(),
                    Prediction {
                        predicted,
                        confidence: None,
                    },
                )
                .unwrap();
        }
        *predictions = fresh;
    }

    #[test]
    fn subset_fraction_examples() {
        assert_eq!(subset_fraction(4, 3, 2), BigRational::new(1.into(), 2.into()));
        assert_eq!(subset_fraction(4, 4, 4), BigRational::from_integer(1.into()));
        assert!(subset_fraction(4, 2, 3).is_zero());
        assert_eq!(subset_fraction(5, 3, 1), BigRational::new(3.into(), 5.into()));
    }

    #[test]
    fn accuracy_examples() {
        let ds = synthetic::from_cluster_sizes(&[4, 3, 3], 0.5, 2);
        let opts = EvalOptions::default();
        let mut p = PredictionSet::gold(&ds);
        assert_eq!(accuracy(&p, &ds, &opts).unwrap().accuracy, 1.0);

        let all: Vec<&str> = ds.instances().iter().map(|i| i.id.as_str()).collect();
        flip(&mut p, &ds, &all);
        assert_eq!(accuracy(&p, &ds, &opts).unwrap().accuracy, 0.0);

        flip(&mut p, &ds, &all[..3]);
        let r = accuracy(&p, &ds, &opts).unwrap();
        assert_eq!((r.n_correct, r.n_scored), (7, 10));
        assert_eq!(r.accuracy, 0.7);
    }

    #[test]
    fn missing_and_unknown_predictions() {
        let ds = synthetic::from_cluster_sizes(&[2, 2], 0.5, 2);
        let mut p = PredictionSet::new();
        let first = &ds.instances()[0];
        p.insert(
            first.id.clone(),
            Prediction {
                predicted: first.label,
                confidence: Some(0.9),
            },
        )
        .unwrap();

        let err = accuracy(&p, &ds, &EvalOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingPredictions { count: 3, .. }));

        let lenient = EvalOptions {
            missing: MissingPolicy::Incorrect,
            ..Default::default()
        };
        let r = accuracy(&p, &ds, &lenient).unwrap();
        assert_eq!((r.n_correct, r.n_missing), (1, 3));

        p.insert(
            "ghost",
            Prediction {
                predicted: Label::Yes,
                confidence: None,
            },
        )
        .unwrap();
        assert!(matches!(accuracy(&p, &ds, &lenient), Err(Error::UnknownPrediction(_))));
    }

    #[test]
    fn prediction_set_rejects_bad_entries() {
        let mut p = PredictionSet::new();
        let pred = Prediction {
            predicted: Label::No,
            confidence: None,
        };
        p.insert("q7", pred).unwrap();
        assert!(matches!(p.insert("q7", pred), Err(Error::DuplicateKey(_))));
        assert!(p
            .insert(
                "q8",
                Prediction {
                    confidence: Some(1.5),
                    ..pred
                }
            )
            .is_err());
    }

    #[test]
    fn single_cluster_consensus() {
        let ds = synthetic::from_cluster_sizes(&[4], 0.5, 1);
        let mut p = PredictionSet::gold(&ds);
        let wrong = ds.instances()[2].id.clone();
        flip(&mut p, &ds, &[wrong.as_str()]);
        let r = consensus_score(&p, &ds, 2, &EvalOptions::default()).unwrap();
        assert_eq!(r.cs_value, 0.5);
        assert_eq!((r.per_cluster[0].n, r.per_cluster[0].m), (4, 3));
    }

    #[test]
    fn curve_on_uniform_three_of_four() {
        let ds = synthetic::uniform_clusters(25, 4, 0.5, 4);
        let wrong: Vec<String> = ds.clusters().map(|c| c.members[1].clone()).collect();
        let mut p = PredictionSet::gold(&ds);
        flip(&mut p, &ds, &wrong.iter().map(String::as_str).collect::<Vec<_>>());
        let curve = consensus_curve(&p, &ds, &[1, 2, 3, 4], &EvalOptions::default()).unwrap();
        let values: Vec<f64> = curve.iter().map(|r| r.cs_value).collect();
        assert_eq!(values, vec![0.75, 0.5, 0.25, 0.0]);

        let perfect = consensus_curve(&PredictionSet::gold(&ds), &ds, &[1, 2, 3, 4], &EvalOptions::default()).unwrap();
        assert!(perfect.iter().all(|r| r.cs_value == 1.0));

        let single = consensus_curve(&p, &ds, &[1], &EvalOptions::default()).unwrap();
        assert_eq!(single[0], consensus_score(&p, &ds, 1, &EvalOptions::default()).unwrap());
    }

    #[test]
    fn small_clusters_are_skipped() {
        let ds = synthetic::from_cluster_sizes(&[1, 2, 4], 0.5, 3);
        let r = consensus_score(&PredictionSet::gold(&ds), &ds, 2, &EvalOptions::default()).unwrap();
        assert_eq!((r.clusters_scored, r.clusters_skipped_small), (2, 1));
        assert!(matches!(
            consensus_score(&PredictionSet::gold(&ds), &ds, 5, &EvalOptions::default()),
            Err(Error::KTooLarge { k: 5, largest: 4 })
        ));
        assert!(consensus_score(&PredictionSet::gold(&ds), &ds, 0, &EvalOptions::default()).is_err());
        assert!(consensus_curve(&PredictionSet::gold(&ds), &ds, &[], &EvalOptions::default()).is_err());
    }

    #[test]
    fn scope_restricts_to_split() {
        let a = synthetic::assign_split(&synthetic::uniform_clusters(2, 2, 0.5, 1), Split::Train);
        let b = synthetic::assign_split(&synthetic::uniform_clusters(3, 2, 0.5, 2), Split::Test);
        let ds = synthetic::concat(&[("a", &a), ("b", &b)]);
        let mut p = PredictionSet::new();
        for inst in ds.instances().iter().filter(|i| i.split == Some(Split::Test)) {
            p.insert(
                inst.id.clone(),
                Prediction {
                    predicted: inst.label,
                    confidence: None,
                },
            )
            .unwrap();
        }
        let opts = EvalOptions {
            scope: Scope::Split(Split::Test),
            ..Default::default()
        };
        assert_eq!(accuracy(&p, &ds, &opts).unwrap().n_scored, 6);
        assert_eq!(consensus_score(&p, &ds, 2, &opts).unwrap().clusters_scored, 3);
        assert!(accuracy(&p, &ds, &EvalOptions::default()).is_err());
    }

    #[test]
    fn confidence_is_ignored() {
        let ds = synthetic::uniform_clusters(10, 3, 0.5, 8);
        let plain = PredictionSet::gold(&ds);
        let mut confident = PredictionSet::new();
        for (i, (id, p)) in plain.iter().enumerate() {
            confident
                .insert(
                    id,
                    Prediction {
                        confidence: Some((i % 10) as f64 / 10.0),
                        ..*p
                    },
                )
                .unwrap();
        }
        let o = EvalOptions::default();
        assert_eq!(
            accuracy(&plain, &ds, &o).unwrap(),
            accuracy(&confident, &ds, &o).unwrap()
        );
        assert_eq!(
            consensus_score(&plain, &ds, 2, &o).unwrap(),
            consensus_score(&confident, &ds, 2, &o).unwrap()
        );
    }

    #[test]
    fn inline_passages_do_not_matter() {
        let v = vec![
            Instance::new("a", "x", "q?", PassageRef::Inline("t".into()), Label::Yes, Kind::Seed),
            Instance::new(
                "b",
                "x",
                "q?",
                PassageRef::Inline("t".into()),
                Label::No,
                Kind::Perturbed,
            ),
        ];
        let ds = Dataset::try_new(v).unwrap();
        let r = consensus_score(&PredictionSet::gold(&ds), &ds, 2, &EvalOptions::default()).unwrap();
        assert_eq!(r.cs_value, 1.0);
    }
}
