//! Budget-constrained subsampling of a clustered dataset.
//!
//! Writing a new question costs one budget unit and a perturbation costs `r`
//! units, so taking `s` members of a cluster (its seed plus `s - 1`
//! perturbations) costs `1 + (s - 1) r`. [`subsample`] picks up to `c` members
//! per cluster and admits clusters greedily until the budget `b` is spent,
//! steering the yes/no balance toward a target fraction as it goes.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Cluster, Dataset, Instance, Label};
use crate::seed;

/// Slack allowed when comparing accumulated costs against the budget, so
/// that exact multiples such as `b = 1300, cost = 1.3` are not lost to
/// floating-point rounding.
const BUDGET_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSpec {
    /// Total budget in new-question units.
    pub b: f64,
    /// Maximum members taken from one cluster.
    pub c: usize,
    /// Perturbation cost ratio. 0 is accepted to model free perturbations.
    pub r: f64,
    #[serde(default = "default_target")]
    pub target_yes_fraction: f64,
    #[serde(default = "default_tolerance")]
    pub ratio_tolerance: f64,
    #[serde(default)]
    pub seed: u64,
    /// Every cluster selection contains the cluster's seed.
    #[serde(default = "default_true")]
    pub always_include_seed: bool,
}

fn default_target() -> f64 {
    0.55
}

fn default_tolerance() -> f64 {
    0.02
}

fn default_true() -> bool {
    true
}

impl BudgetSpec {
    pub fn new(b: f64, c: usize, r: f64) -> Self {
        BudgetSpec {
            b,
            c,
            r,
            target_yes_fraction: default_target(),
            ratio_tolerance: default_tolerance(),
            seed: 0,
            always_include_seed: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::param(format!("budget b must be positive, got {}", self.b)));
        }
        if self.c < 1 {
            return Err(Error::param("max cluster size c must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::param(format!("cost ratio r must lie in [0, 1], got {}", self.r)));
        }
        if !(self.target_yes_fraction > 0.0 && self.target_yes_fraction < 1.0) {
            return Err(Error::param(format!(
                "target yes fraction must lie in (0, 1), got {}",
                self.target_yes_fraction
            )));
        }
        if !(self.ratio_tolerance >= 0.0 && self.ratio_tolerance.is_finite()) {
            return Err(Error::param("ratio tolerance must be non-negative"));
        }
        Ok(())
    }

    /// Stable identifier of the `(b, c, r)` point, e.g. `b1500-c4-r0.33`.
    pub fn experiment_id(&self) -> String {
        experiment_id(self.b, self.c, self.r)
    }

    fn fits(&self, cost: f64) -> bool {
        cost <= self.b + BUDGET_EPS * self.b.max(1.0)
    }
}

/// Stable encoding of a grid point; floats use Rust's shortest round-trip form.
pub fn experiment_id(b: f64, c: usize, r: f64) -> String {
    format!("b{b}-c{c}-r{r}")
}

/// Cost of taking `size` members (one seed plus `size - 1` perturbations).
pub fn cluster_cost(size: usize, r: f64) -> Result<f64> {
    if size < 1 {
        return Err(Error::param("cluster size must be at least 1"));
    }
    Ok(1.0 + (size - 1) as f64 * r)
}

/// Number of size-`c` clusters a budget `b` pays for: `floor(b / (1 + (c-1) r))`.
pub fn max_uniform_clusters(b: f64, c: usize, r: f64) -> Result<u64> {
    let spec = BudgetSpec::new(b, c, r);
    spec.validate()?;
    let cost = cluster_cost(c, r)?;
    let mut count = (b / cost).floor();
    if spec.fits((count + 1.0) * cost) {
        count += 1.0;
    } else if !spec.fits(count * cost) {
        count -= 1.0;
    }
    Ok(count.max(0.0) as u64)
}

/// Perturbation cost ratio from unit prices.
pub fn compute_cost_ratio(perturbation_unit_cost: f64, new_question_unit_cost: f64) -> Result<f64> {
    if !(perturbation_unit_cost > 0.0 && new_question_unit_cost > 0.0) {
        return Err(Error::param("unit costs must be positive"));
    }
    let ratio = perturbation_unit_cost / new_question_unit_cost;
    if ratio > 1.0 {
        return Err(Error::param(format!(
            "cost ratio {ratio} exceeds 1: perturbations cost more than new questions"
        )));
    }
    Ok(ratio)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSelection {
    pub cluster_id: String,
    /// Seed first (when included), then perturbations in pick order.
    pub instance_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleManifest {
    pub spec: BudgetSpec,
    /// Selections in admission order.
    pub chosen: Vec<ClusterSelection>,
    pub realized_cost: f64,
    /// `N`: instances selected.
    pub realized_n: usize,
    /// `C`: clusters selected.
    pub realized_c_count: usize,
    pub realized_yes: usize,
    pub realized_yes_fraction: f64,
    /// Non-fatal problems, e.g. an unreachable label balance.
    pub warnings: Vec<String>,
}

impl SubsampleManifest {
    pub fn instance_ids(&self) -> impl Iterator<Item = &str> {
        self.chosen
            .iter()
            .flat_map(|s| s.instance_ids.iter().map(String::as_str))
    }

    pub fn balance_within_tolerance(&self) -> bool {
        (self.realized_yes_fraction - self.spec.target_yes_fraction).abs() <= self.spec.ratio_tolerance
    }

    /// The selected instances as a dataset of their own.
    pub fn materialize(&self, dataset: &Dataset) -> Dataset {
        dataset.restrict(self.instance_ids())
    }
}

/// Running yes/no balance over everything selected so far.
struct BalanceController {
    target: f64,
    yes: usize,
    total: usize,
}

impl BalanceController {
    fn wants(&self, extra_yes: usize, extra_total: usize) -> Label {
        let total = self.total + extra_total;
        if total == 0 {
            return if self.target >= 0.5 { Label::Yes } else { Label::No };
        }
        let frac = (self.yes + extra_yes) as f64 / total as f64;
        if frac < self.target {
            Label::Yes
        } else {
            Label::No
        }
    }

    fn add(&mut self, label: Label) {
        self.total += 1;
        if label == Label::Yes {
            self.yes += 1;
        }
    }
}

/// Clusters of size >= c first, shuffled; then smaller clusters by
/// decreasing size, shuffled within each size.
fn pool_order<'a, R: Rng>(dataset: &'a Dataset, c: usize, rng: &mut R) -> Vec<&'a Cluster> {
    // dataset.clusters() is already in cluster_id order
    let mut large: Vec<&Cluster> = Vec::new();
    let mut small: BTreeMap<std::cmp::Reverse<usize>, Vec<&Cluster>> = BTreeMap::new();
    for cluster in dataset.clusters() {
        if cluster.size() >= c {
            large.push(cluster);
        } else {
            small
                .entry(std::cmp::Reverse(cluster.size()))
                .or_default()
                .push(cluster);
        }
    }
    large.shuffle(rng);
    let mut order = large;
    for (_, mut group) in small {
        group.shuffle(rng);
        order.extend(group);
    }
    order
}

fn select_members<R: Rng>(
    dataset: &Dataset,
    cluster: &Cluster,
    take: usize,
    include_seed: bool,
    balance: &BalanceController,
    rng: &mut R,
) -> Vec<Instance> {
    let mut picks: Vec<Instance> = Vec::with_capacity(take);
    let mut candidates: Vec<&Instance> = Vec::new();
    for inst in dataset.cluster_members(cluster) {
        if include_seed && cluster.seed_id.as_deref() == Some(inst.id.as_str()) {
            picks.push(inst.clone());
        } else {
            candidates.push(inst);
        }
    }
    candidates.shuffle(rng);

    while picks.len() < take && !candidates.is_empty() {
        let yes = picks.iter().filter(|i| i.label == Label::Yes).count();
        let want = balance.wants(yes, picks.len());
        let pos = candidates.iter().position(|i| i.label == want).unwrap_or(0);
        picks.push(candidates.remove(pos).clone());
    }
    picks
}

/// Draws `D(b, c, r)` from `dataset`.
pub fn subsample(dataset: &Dataset, spec: &BudgetSpec) -> Result<SubsampleManifest> {
    spec.validate()?;
    dataset.ensure_valid()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let singleton = cluster_cost(1, spec.r)?;
    if !spec.fits(singleton) {
        return Err(Error::BudgetTooSmall { budget: spec.b });
    }

    let mut rng = seed::rng(spec.seed);
    let pool = pool_order(dataset, spec.c, &mut rng);

    let mut balance = BalanceController {
        target: spec.target_yes_fraction,
        yes: 0,
        total: 0,
    };
    let mut n_clusters = 0usize;
    let cost_of = |n: usize, clusters: usize| clusters as f64 + (n - clusters) as f64 * spec.r;
    let mut chosen = Vec::new();

    for cluster in pool {
        if !spec.fits(cost_of(balance.total, n_clusters) + singleton) {
            break;
        }
        let take = spec.c.min(cluster.size());
        if !spec.fits(cost_of(balance.total + take, n_clusters + 1)) {
            continue;
        }
        let picks = select_members(dataset, cluster, take, spec.always_include_seed, &balance, &mut rng);
        for inst in &picks {
            balance.add(inst.label);
        }
        n_clusters += 1;
        chosen.push(ClusterSelection {
            cluster_id: cluster.cluster_id.clone(),
            instance_ids: picks.into_iter().map(|i| i.id).collect(),
        });
    }

    if chosen.is_empty() {
        // the budget covers a seed, but no cluster's full selection
        return Err(Error::BudgetTooSmall { budget: spec.b });
    }
    let realized_yes_fraction = balance.yes as f64 / balance.total as f64;
    let mut manifest = SubsampleManifest {
        spec: spec.clone(),
        chosen,
        realized_cost: cost_of(balance.total, n_clusters),
        realized_n: balance.total,
        realized_c_count: n_clusters,
        realized_yes: balance.yes,
        realized_yes_fraction,
        warnings: Vec::new(),
    };
    if !manifest.balance_within_tolerance() {
        manifest.warnings.push(format!(
            "label balance infeasible: yes fraction {:.4} is outside {} ± {}",
            realized_yes_fraction, spec.target_yes_fraction, spec.ratio_tolerance
        ));
    }
    Ok(manifest)
}

/// `n_replicas` independent draws; replica `i` uses `replica_seed(base_seed, i)`.
pub fn replicate(
    dataset: &Dataset,
    spec: &BudgetSpec,
    n_replicas: u32,
    base_seed: u64,
) -> Result<Vec<SubsampleManifest>> {
    if n_replicas < 1 {
        return Err(Error::param("n_replicas must be at least 1"));
    }
    (0..n_replicas)
        .into_par_iter()
        .map(|i| {
            let spec = BudgetSpec {
                seed: seed::replica_seed(base_seed, i),
                ..spec.clone()
            };
            subsample(dataset, &spec)
        })
        .collect()
}
