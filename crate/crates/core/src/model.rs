//! Clustered yes/no question data model.
//!
//! A [`Dataset`] is a flat collection of [`Instance`]s plus a derived index
//! grouping them by `cluster_id`. Construction never fails; call
//! [`Dataset::validate`] (or use [`Dataset::try_new`]) to check the
//! structural rules every other module relies on.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Yes,
    No,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Yes => "yes",
            Label::No => "no",
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Yes => Label::No,
            Label::No => Label::Yes,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" => Ok(Label::Yes),
            "no" => Ok(Label::No),
            other => Err(format!("invalid label {other:?} (expected \"yes\" or \"no\")")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Seed,
    Perturbed,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Seed => "seed",
            Kind::Perturbed => "perturbed",
        }
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "seed" => Ok(Kind::Seed),
            "perturbed" => Ok(Kind::Perturbed),
            other => Err(format!("invalid kind {other:?} (expected \"seed\" or \"perturbed\")")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("invalid split {other:?} (expected train, dev or test)")),
        }
    }
}

/// Where an instance's supporting passage lives.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PassageRef {
    /// Key into the dataset's passage store.
    Id(String),
    Inline(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub cluster_id: String,
    pub question: String,
    pub passage: PassageRef,
    pub label: Label,
    pub kind: Kind,
    pub split: Option<Split>,
    /// Set on a perturbation that was promoted to seed after verification
    /// removed the cluster's original seed.
    pub seed_promoted: bool,
    /// Unknown top-level record fields, carried through unchanged.
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Instance {
    pub fn new(
        id: impl Into<String>,
        cluster_id: impl Into<String>,
        question: impl Into<String>,
        passage: PassageRef,
        label: Label,
        kind: Kind,
    ) -> Self {
        Instance {
            id: id.into(),
            cluster_id: cluster_id.into(),
            question: question.into(),
            passage,
            label,
            kind,
            split: None,
            seed_promoted: false,
            extra: serde_json::Map::new(),
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = Some(split);
        self
    }

    pub fn is_seed(&self) -> bool {
        self.kind == Kind::Seed
    }
}

/// A seed plus its perturbations, as indexed by [`Dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub cluster_id: String,
    /// Member ids, sorted.
    pub members: Vec<String>,
    /// `None` only on datasets that fail validation.
    pub seed_id: Option<String>,
    /// The original seed was filtered out and a perturbation stands in for it.
    pub original_seed_filtered: bool,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateId { id: String, count: usize },
    EmptyField { id: String, field: &'static str },
    NoSeed { cluster_id: String },
    MultipleSeeds { cluster_id: String, seed_ids: Vec<String> },
    MixedPassage { cluster_id: String },
    MixedSplit { cluster_id: String },
    UnknownPassage { id: String, passage_id: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { id, count } => {
                write!(f, "duplicate id {id:?} ({count} occurrences)")
            }
            Violation::EmptyField { id, field } => write!(f, "instance {id:?}: empty {field}"),
            Violation::NoSeed { cluster_id } => write!(f, "cluster {cluster_id:?} has no seed member"),
            Violation::MultipleSeeds { cluster_id, seed_ids } => {
                write!(
                    f,
                    "cluster {cluster_id:?} has {} seed members: {}",
                    seed_ids.len(),
                    seed_ids.join(", ")
                )
            }
            Violation::MixedPassage { cluster_id } => {
                write!(f, "cluster {cluster_id:?} members reference different passages")
            }
            Violation::MixedSplit { cluster_id } => {
                write!(f, "cluster {cluster_id:?} straddles splits")
            }
            Violation::UnknownPassage { id, passage_id } => {
                write!(f, "instance {id:?} references unknown passage {passage_id:?}")
            }
        }
    }
}

/// Every violated invariant found by [`Dataset::validate`]. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    /// True if any entry names `needle` as an instance or cluster id.
    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| match v {
            Violation::DuplicateId { id, .. }
            | Violation::EmptyField { id, .. }
            | Violation::UnknownPassage { id, .. } => id == needle,
            Violation::NoSeed { cluster_id }
            | Violation::MultipleSeeds { cluster_id, .. }
            | Violation::MixedPassage { cluster_id }
            | Violation::MixedSplit { cluster_id } => cluster_id == needle,
        })
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    // canonical order: (cluster_id, id)
    instances: Vec<Instance>,
    clusters: BTreeMap<String, Cluster>,
    by_id: HashMap<String, usize>,
    passages: BTreeMap<String, String>,
}

impl Dataset {
    /// Builds the cluster index without checking invariants.
    pub fn new(mut instances: Vec<Instance>) -> Self {
        instances.sort_by(|a, b| (&a.cluster_id, &a.id).cmp(&(&b.cluster_id, &b.id)));

        let mut by_id = HashMap::with_capacity(instances.len());
        let mut clusters: BTreeMap<String, Cluster> = BTreeMap::new();
        for (idx, inst) in instances.iter().enumerate() {
            by_id.entry(inst.id.clone()).or_insert(idx);
            let cluster = clusters.entry(inst.cluster_id.clone()).or_insert_with(|| Cluster {
                cluster_id: inst.cluster_id.clone(),
                members: Vec::new(),
                seed_id: None,
                original_seed_filtered: false,
            });
            cluster.members.push(inst.id.clone());
            if inst.is_seed() && cluster.seed_id.is_none() {
                cluster.seed_id = Some(inst.id.clone());
                cluster.original_seed_filtered = inst.seed_promoted;
            }
        }

        Dataset {
            instances,
            clusters,
            by_id,
            passages: BTreeMap::new(),
        }
    }

    /// Builds and validates, refusing invalid input.
    pub fn try_new(instances: Vec<Instance>) -> Result<Self> {
        let ds = Dataset::new(instances);
        ds.ensure_valid()?;
        Ok(ds)
    }

    pub fn with_passages(mut self, passages: BTreeMap<String, String>) -> Self {
        self.passages = passages;
        self
    }

    pub fn passages(&self) -> &BTreeMap<String, String> {
        &self.passages
    }

    /// Instances in (cluster_id, id) order.
    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn into_instances(self) -> Vec<Instance> {
        self.instances
    }

    pub fn get(&self, id: &str) -> Option<&Instance> {
        self.by_id.get(id).map(|&i| &self.instances[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    /// Clusters in cluster_id order.
    pub fn clusters(&self) -> impl ExactSizeIterator<Item = &Cluster> {
        self.clusters.values()
    }

    pub fn cluster(&self, cluster_id: &str) -> Option<&Cluster> {
        self.clusters.get(cluster_id)
    }

    pub fn cluster_members<'a>(&'a self, cluster: &'a Cluster) -> impl Iterator<Item = &'a Instance> + 'a {
        cluster.members.iter().filter_map(move |id| self.get(id))
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Keeps the instances whose ids are in `ids`; passages carry over.
    pub fn restrict<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Dataset {
        let keep: BTreeSet<&str> = ids.into_iter().collect();
        let instances = self
            .instances
            .iter()
            .filter(|i| keep.contains(i.id.as_str()))
            .cloned()
            .collect();
        Dataset::new(instances).with_passages(self.passages.clone())
    }

    pub fn split(&self, split: Split) -> Dataset {
        let instances = self
            .instances
            .iter()
            .filter(|i| i.split == Some(split))
            .cloned()
            .collect();
        Dataset::new(instances).with_passages(self.passages.clone())
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();

        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for inst in &self.instances {
            *counts.entry(inst.id.as_str()).or_default() += 1;
        }
        for (id, count) in counts {
            if count > 1 {
                violations.push(Violation::DuplicateId {
                    id: id.to_string(),
                    count,
                });
            }
        }

        for inst in &self.instances {
            if inst.id.is_empty() {
                violations.push(Violation::EmptyField {
                    id: inst.id.clone(),
                    field: "id",
                });
            }
            if inst.cluster_id.is_empty() {
                violations.push(Violation::EmptyField {
                    id: inst.id.clone(),
                    field: "cluster_id",
                });
            }
            if let PassageRef::Id(pid) = &inst.passage {
                if !self.passages.is_empty() && !self.passages.contains_key(pid) {
                    violations.push(Violation::UnknownPassage {
                        id: inst.id.clone(),
                        passage_id: pid.clone(),
                    });
                }
            }
        }

        // instances are sorted by cluster_id, so clusters are contiguous runs
        for run in self.instances.chunk_by(|a, b| a.cluster_id == b.cluster_id) {
            let cluster_id = run[0].cluster_id.clone();
            let seeds: Vec<String> = run.iter().filter(|i| i.is_seed()).map(|i| i.id.clone()).collect();
            match seeds.len() {
                0 => violations.push(Violation::NoSeed {
                    cluster_id: cluster_id.clone(),
                }),
                1 => {}
                _ => violations.push(Violation::MultipleSeeds {
                    cluster_id: cluster_id.clone(),
                    seed_ids: seeds,
                }),
            }
            if run.iter().any(|i| i.passage != run[0].passage) {
                violations.push(Violation::MixedPassage {
                    cluster_id: cluster_id.clone(),
                });
            }
            let splits: BTreeSet<Option<Split>> = run.iter().map(|i| i.split).collect();
            if splits.len() > 1 {
                violations.push(Violation::MixedSplit { cluster_id });
            }
        }

        ValidationReport { violations }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::Invalid(report))
        }
    }
}

/// Question and cluster counts for one slice of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Counts {
    pub n_questions: usize,
    pub n_yes: usize,
    pub n_no: usize,
    pub n_clusters: usize,
    pub mean_cluster_size: f64,
    /// Lower-middle element for an even number of clusters.
    pub median_cluster_size: f64,
}

impl Counts {
    /// `n_questions / n_clusters` as an exact fraction.
    pub fn mean_exact(&self) -> Ratio<usize> {
        Ratio::new(self.n_questions, self.n_clusters)
    }

    pub fn yes_fraction(&self) -> f64 {
        self.n_yes as f64 / self.n_questions as f64
    }

    fn from_sizes(n_yes: usize, n_no: usize, mut sizes: Vec<usize>) -> Counts {
        sizes.sort_unstable();
        let n_questions = n_yes + n_no;
        let n_clusters = sizes.len();
        Counts {
            n_questions,
            n_yes,
            n_no,
            n_clusters,
            mean_cluster_size: n_questions as f64 / n_clusters as f64,
            median_cluster_size: sizes[(n_clusters - 1) / 2] as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub overall: Counts,
    /// Only splits that occur in the dataset.
    pub per_split: BTreeMap<Split, Counts>,
}

pub fn compute_stats(dataset: &Dataset) -> Result<DatasetStats> {
    dataset.ensure_valid()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let tally = |clusters: &mut dyn Iterator<Item = &Cluster>| {
        let (mut yes, mut no, mut sizes) = (0, 0, Vec::new());
        for cluster in clusters {
            sizes.push(cluster.size());
            for inst in dataset.cluster_members(cluster) {
                match inst.label {
                    Label::Yes => yes += 1,
                    Label::No => no += 1,
                }
            }
        }
        Counts::from_sizes(yes, no, sizes)
    };

    let overall = tally(&mut dataset.clusters());

    let mut by_split: BTreeMap<Split, Vec<&Cluster>> = BTreeMap::new();
    for cluster in dataset.clusters() {
        // splits are cluster-atomic after validation
        let first = &cluster.members[0];
        if let Some(split) = dataset.get(first).and_then(|i| i.split) {
            by_split.entry(split).or_default().push(cluster);
        }
    }
    let per_split = by_split
        .into_iter()
        .map(|(split, clusters)| (split, tally(&mut clusters.into_iter())))
        .collect();

    Ok(DatasetStats { overall, per_split })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(id: &str, cluster: &str, label: Label, kind: Kind) -> Instance {
        Instance::new(
            id,
            cluster,
            format!("question {id}?"),
            PassageRef::Id(format!("p-{cluster}")),
            label,
            kind,
        )
    }

    fn fixture_235() -> Vec<Instance> {
        // sizes {2, 3, 5}; 6 yes, 4 no
        vec![
            inst("a0", "a", Label::Yes, Kind::Seed),
            inst("a1", "a", Label::No, Kind::Perturbed),
            inst("b0", "b", Label::No, Kind::Seed),
            inst("b1", "b", Label::Yes, Kind::Perturbed),
            inst("b2", "b", Label::Yes, Kind::Perturbed),
            inst("c0", "c", Label::Yes, Kind::Seed),
            inst("c1", "c", Label::No, Kind::Perturbed),
            inst("c2", "c", Label::Yes, Kind::Perturbed),
            inst("c3", "c", Label::No, Kind::Perturbed),
            inst("c4", "c", Label::Yes, Kind::Perturbed),
        ]
    }

    #[test]
    fn label_parsing_is_case_insensitive() {
        assert_eq!("YES".parse::<Label>().unwrap(), Label::Yes);
        assert_eq!(" No ".parse::<Label>().unwrap(), Label::No);
        assert!("maybe".parse::<Label>().is_err());
        assert_eq!(Label::Yes.to_string(), "yes");
    }

    #[test]
    fn well_formed_fixture_is_valid() {
        let ds = Dataset::new(fixture_235());
        assert!(ds.validate().is_valid(), "{}", ds.validate());
        assert_eq!(ds.n_clusters(), 3);
    }

    #[test]
    fn duplicate_id_is_reported() {
        let mut v = fixture_235();
        v.push(inst("a1", "b", Label::Yes, Kind::Perturbed));
        let report = Dataset::new(v).validate();
        assert!(report.violations.contains(&Violation::DuplicateId {
            id: "a1".into(),
            count: 2
        }));
        assert!(report.mentions("a1"));
    }

    #[test]
    fn seedless_and_double_seed_clusters_are_reported() {
        let v = vec![
            inst("x1", "x", Label::Yes, Kind::Perturbed),
            inst("y0", "y", Label::Yes, Kind::Seed),
            inst("y1", "y", Label::No, Kind::Seed),
        ];
        let report = Dataset::new(v).validate();
        assert!(report
            .violations
            .contains(&Violation::NoSeed { cluster_id: "x".into() }));
        assert!(report.mentions("y"));
        assert_eq!(report.len(), 2);
    }

    #[test]
    fn mixed_passage_and_split_are_reported() {
        let mut v = fixture_235();
        v[1].passage = PassageRef::Inline("other text".into());
        v[2] = v[2].clone().with_split(Split::Train);
        let report = Dataset::new(v).validate();
        assert!(report
            .violations
            .contains(&Violation::MixedPassage { cluster_id: "a".into() }));
        assert!(report
            .violations
            .contains(&Violation::MixedSplit { cluster_id: "b".into() }));
    }

    #[test]
    fn unknown_passage_reported_only_with_store() {
        let ds = Dataset::new(fixture_235());
        assert!(ds.validate().is_valid());
        let store = BTreeMap::from([("p-a".to_string(), "text".to_string())]);
        let report = ds.with_passages(store).validate();
        assert!(report.mentions("b0"));
        assert!(!report.mentions("a0"));
    }

    #[test]
    fn stats_of_235_fixture() {
        let stats = compute_stats(&Dataset::new(fixture_235())).unwrap();
        let o = &stats.overall;
        assert_eq!(o.n_questions, 10);
        assert_eq!((o.n_yes, o.n_no), (6, 4));
        assert_eq!(o.n_clusters, 3);
        assert_eq!(o.mean_exact(), Ratio::new(10, 3));
        assert!((o.mean_cluster_size - 10.0 / 3.0).abs() < 1e-15);
        assert_eq!(o.median_cluster_size, 3.0);
        assert!(stats.per_split.is_empty());
    }

    #[test]
    fn median_takes_lower_middle() {
        // sizes {1, 2, 4, 5}: lower-middle is 2
        let mut v = Vec::new();
        for (c, size) in [("a", 1), ("b", 2), ("c", 4), ("d", 5)] {
            for i in 0..size {
                let kind = if i == 0 { Kind::Seed } else { Kind::Perturbed };
                v.push(inst(&format!("{c}{i}"), c, Label::Yes, kind));
            }
        }
        let stats = compute_stats(&Dataset::new(v)).unwrap();
        assert_eq!(stats.overall.median_cluster_size, 2.0);
        assert_eq!(stats.overall.mean_cluster_size, 3.0);
    }

    #[test]
    fn per_split_breakdown() {
        let mut v = fixture_235();
        for i in &mut v {
            i.split = Some(if i.cluster_id == "c" { Split::Test } else { Split::Train });
        }
        let stats = compute_stats(&Dataset::new(v)).unwrap();
        assert_eq!(stats.per_split[&Split::Train].n_questions, 5);
        assert_eq!(stats.per_split[&Split::Train].n_clusters, 2);
        assert_eq!(stats.per_split[&Split::Test].n_questions, 5);
        assert!(!stats.per_split.contains_key(&Split::Dev));
    }

    #[test]
    fn empty_dataset_stats_error() {
        assert!(matches!(compute_stats(&Dataset::new(vec![])), Err(Error::EmptyDataset)));
    }

    #[test]
    fn invalid_dataset_stats_refused() {
        let v = vec![inst("x1", "x", Label::Yes, Kind::Perturbed)];
        assert!(matches!(compute_stats(&Dataset::new(v)), Err(Error::Invalid(_))));
    }

    #[test]
    fn restrict_keeps_requested_ids() {
        let ds = Dataset::new(fixture_235());
        let sub = ds.restrict(["a0", "c0", "c2"]);
        assert_eq!(sub.len(), 3);
        assert_eq!(sub.cluster("c").unwrap().members, vec!["c0", "c2"]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn dataset_strategy() -> impl Strategy<Value = Vec<Instance>> {
            prop::collection::vec((1usize..7, prop::collection::vec(any::<bool>(), 7)), 1..12).prop_map(|clusters| {
                let mut v = Vec::new();
                for (ci, (size, labels)) in clusters.into_iter().enumerate() {
                    for (j, &yes) in labels.iter().take(size).enumerate() {
                        let label = if yes { Label::Yes } else { Label::No };
                        let kind = if j == 0 { Kind::Seed } else { Kind::Perturbed };
                        v.push(inst(&format!("q{ci}_{j}"), &format!("c{ci}"), label, kind));
                    }
                }
                v
            })
        }

        proptest! {
            #[test]
            fn grouping_round_trip(instances in dataset_strategy()) {
                let ds = Dataset::new(instances.clone());
                let mut flattened: Vec<String> = ds.clusters().flat_map(|c| c.members.clone()).collect();
                let mut original: Vec<String> = instances.iter().map(|i| i.id.clone()).collect();
                flattened.sort();
                original.sort();
                prop_assert_eq!(flattened, original);
            }

            #[test]
            fn stats_are_permutation_invariant(instances in dataset_strategy(), seed in any::<u64>()) {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let mut shuffled = instances.clone();
                shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                let a = compute_stats(&Dataset::new(instances)).unwrap();
                let b = compute_stats(&Dataset::new(shuffled)).unwrap();
                prop_assert_eq!(&a, &b);
                prop_assert_eq!(a.overall.mean_exact() * a.overall.n_clusters, Ratio::from_integer(a.overall.n_questions));
                prop_assert_eq!(a.overall.n_yes + a.overall.n_no, a.overall.n_questions);
            }
        }
    }
}
