//! Seeded synthetic datasets and annotations for tests, examples and
//! desk-scale dry runs of the pipeline.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{Dataset, Instance, Kind, Label, PassageRef, Split};
use crate::seed;
use crate::verification::{AnnotationLabel, AnnotationRecord, AnnotationSet, Phase};

fn cluster_id(i: usize) -> String {
    format!("c{i:06}")
}

fn build(sizes: &[usize], labels: impl Fn(usize, usize) -> Label) -> Vec<Instance> {
    let mut out = Vec::with_capacity(sizes.iter().sum());
    for (ci, &size) in sizes.iter().enumerate() {
        let cid = cluster_id(ci);
        for j in 0..size {
            let kind = if j == 0 { Kind::Seed } else { Kind::Perturbed };
            out.push(Instance::new(
                format!("{cid}-{j:02}"),
                cid.clone(),
                format!("synthetic question {j} of cluster {ci}?"),
                PassageRef::Id(format!("p{ci:06}")),
                labels(ci, j),
                kind,
            ));
        }
    }
    out
}

/// One cluster per entry of `sizes`; each label is yes with probability `yes_fraction`.
pub fn from_cluster_sizes(sizes: &[usize], yes_fraction: f64, seed: u64) -> Dataset {
    let mut rng = seed::rng(seed);
    let draws: Vec<Vec<bool>> = sizes
        .iter()
        .map(|&s| (0..s).map(|_| rng.gen_bool(yes_fraction)).collect())
        .collect();
    Dataset::new(build(sizes, |c, j| if draws[c][j] { Label::Yes } else { Label::No }))
}

pub fn uniform_clusters(n_clusters: usize, size: usize, yes_fraction: f64, seed: u64) -> Dataset {
    from_cluster_sizes(&vec![size; n_clusters], yes_fraction, seed)
}

/// Clusters with the given sizes and exactly `n_yes` yes labels, placed at random.
pub fn with_exact_yes_count(sizes: &[usize], n_yes: usize, seed: u64) -> Dataset {
    let total: usize = sizes.iter().sum();
    assert!(n_yes <= total, "n_yes exceeds the number of instances");
    let mut flags: Vec<bool> = (0..total).map(|i| i < n_yes).collect();
    flags.shuffle(&mut seed::rng(seed));
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &s| {
            let start = *acc;
            *acc += s;
            Some(start)
        })
        .collect();
    Dataset::new(build(
        sizes,
        |c, j| if flags[offsets[c] + j] { Label::Yes } else { Label::No },
    ))
}

/// Assigns every cluster of `dataset` to `split`, returning a new dataset.
pub fn assign_split(dataset: &Dataset, split: Split) -> Dataset {
    let instances = dataset
        .instances()
        .iter()
        .cloned()
        .map(|i| i.with_split(split))
        .collect();
    Dataset::new(instances)
}

/// Concatenates datasets, prefixing ids and cluster ids to keep them unique.
pub fn concat(parts: &[(&str, &Dataset)]) -> Dataset {
    let mut out = Vec::new();
    for (prefix, ds) in parts {
        for inst in ds.instances() {
            let mut inst = inst.clone();
            inst.id = format!("{prefix}{}", inst.id);
            inst.cluster_id = format!("{prefix}{}", inst.cluster_id);
            if let PassageRef::Id(p) = &mut inst.passage {
                *p = format!("{prefix}{p}");
            }
            out.push(inst);
        }
    }
    Dataset::new(out)
}

/// Noisy annotator behaviour for [`simulate_annotations`].
#[derive(Debug, Clone, Copy)]
pub struct AnnotatorNoise {
    /// Probability an annotator answers with the stored label.
    pub p_correct: f64,
    /// Probability of "cannot infer" in phase 1 (taken from the error mass).
    pub p_cannot_infer: f64,
    pub annotators: usize,
}

impl Default for AnnotatorNoise {
    fn default() -> Self {
        AnnotatorNoise {
            p_correct: 0.9,
            p_cannot_infer: 0.05,
            annotators: 3,
        }
    }
}

/// Phase-1 and phase-2 annotations for every perturbed instance.
pub fn simulate_annotations(dataset: &Dataset, noise: AnnotatorNoise, seed: u64) -> AnnotationSet {
    let mut rng = seed::rng(seed);
    let mut set = AnnotationSet::new();
    for inst in dataset.instances().iter().filter(|i| !i.is_seed()) {
        for phase in [Phase::One, Phase::Two] {
            for a in 0..noise.annotators {
                let u: f64 = rng.gen();
                let label = if u < noise.p_correct {
                    inst.label.into()
                } else if phase == Phase::One && u < noise.p_correct + noise.p_cannot_infer {
                    AnnotationLabel::CannotInfer
                } else {
                    inst.label.flipped().into()
                };
                set.insert(AnnotationRecord {
                    question_id: inst.id.clone(),
                    annotator_id: format!("w{a}"),
                    label,
                    phase,
                })
                .expect("generated annotations are unique");
            }
        }
    }
    set
}
