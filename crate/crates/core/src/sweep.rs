//! Experiment sweeps over `(b, c, r)`.
//!
//! A [`GridSpec`] expands into [`ExperimentPoint`]s (Cartesian product times
//! replicas). Each point is materialized into a subsample manifest with a
//! seed derived from `(base_seed, experiment_id, replica)`, and externally
//! measured accuracies are folded back into mean / sample standard deviation
//! rows. [`simulate_responder`] stands in for a trained model so the whole
//! loop can be exercised without training anything.
//!
//! Grid spec files are TOML:
//!
//! ```toml
//! b = 1500                 # scalar or list
//! c = [1, 4]
//! r = { start = 0.1, stop = 1.0, step = 0.1 }   # or an explicit list
//! n_replicas = 5
//! base_seed = 2020
//! ```
//!
//! `r` defaults to 0.1, 0.2, ..., 1.0 and `n_replicas` to 5.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{self, ManifestRecord, ResultRecord};
use crate::metrics::{Prediction, PredictionSet};
use crate::model::Dataset;
use crate::seed;
use crate::subsample::{experiment_id, subsample, BudgetSpec, SubsampleManifest};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub b: Vec<f64>,
    pub c: Vec<usize>,
    pub r: Vec<f64>,
    pub n_replicas: u32,
    pub base_seed: u64,
    pub target_yes_fraction: f64,
    pub ratio_tolerance: f64,
}

/// 0.1, 0.2, ..., 1.0
pub fn default_r_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

impl GridSpec {
    pub fn new(b: Vec<f64>, c: Vec<usize>, r: Vec<f64>) -> Self {
        let defaults = BudgetSpec::new(1.0, 1, 1.0);
        GridSpec {
            b,
            c,
            r,
            n_replicas: 5,
            base_seed: 0,
            target_yes_fraction: defaults.target_yes_fraction,
            ratio_tolerance: defaults.ratio_tolerance,
        }
    }

    /// `b = 1500`, `c ∈ {1, 4}`, `r ∈ {0.1, ..., 1.0}`, 5 replicas.
    pub fn cost_ratio_sweep() -> Self {
        GridSpec::new(vec![1500.0], vec![1, 4], default_r_grid())
    }

    /// `b = 3700`, `c ∈ {1, 2, 3, 4}`, `r = 1`, 5 replicas.
    pub fn cluster_size_sweep() -> Self {
        GridSpec::new(vec![3700.0], vec![1, 2, 3, 4], vec![1.0])
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::GridSpec(e.to_string()))?;
        let known = [
            "b",
            "c",
            "r",
            "n_replicas",
            "base_seed",
            "target_yes_fraction",
            "ratio_tolerance",
        ];
        if let Some(k) = table.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::GridSpec(format!("unknown key {k:?}")));
        }

        let b = match table.get("b") {
            Some(v) => float_list("b", v)?,
            None => return Err(Error::GridSpec("missing key b".into())),
        };
        let c = match table.get("c") {
            Some(v) => float_list("c", v)?
                .into_iter()
                .map(|x| {
                    if x.fract() == 0.0 && x >= 0.0 {
                        Ok(x as usize)
                    } else {
                        Err(Error::GridSpec(format!("c values must be integers, got {x}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?,
            None => return Err(Error::GridSpec("missing key c".into())),
        };
        let r = match table.get("r") {
            Some(v) => float_list("r", v)?,
            None => default_r_grid(),
        };
        let mut spec = GridSpec::new(b, c, r);
        if let Some(v) = table.get("n_replicas") {
            spec.n_replicas = int_value("n_replicas", v)?
                .try_into()
                .map_err(|_| Error::GridSpec("n_replicas out of range".into()))?;
        }
        if let Some(v) = table.get("base_seed") {
            spec.base_seed = int_value("base_seed", v)?;
        }
        if let Some(v) = table.get("target_yes_fraction") {
            spec.target_yes_fraction = float_value("target_yes_fraction", v)?;
        }
        if let Some(v) = table.get("ratio_tolerance") {
            spec.ratio_tolerance = float_value("ratio_tolerance", v)?;
        }
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn budget_spec(&self, point: &ExperimentPoint) -> BudgetSpec {
        BudgetSpec {
            b: point.b,
            c: point.c,
            r: point.r,
            target_yes_fraction: self.target_yes_fraction,
            ratio_tolerance: self.ratio_tolerance,
            seed: point.seed,
            always_include_seed: true,
        }
    }
}

fn float_value(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::GridSpec(format!("{key}: expected a number"))),
    }
}

fn int_value(key: &str, v: &toml::Value) -> Result<u64> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(Error::GridSpec(format!("{key}: expected a non-negative integer"))),
    }
}

fn float_list(key: &str, v: &toml::Value) -> Result<Vec<f64>> {
    match v {
        toml::Value::Array(items) => items.iter().map(|x| float_value(key, x)).collect(),
        toml::Value::Table(range) => {
            let get = |k: &str| {
                range
                    .get(k)
                    .ok_or_else(|| Error::GridSpec(format!("{key}: range needs start, stop and step")))
                    .and_then(|x| float_value(key, x))
            };
            let (start, stop, step) = (get("start")?, get("stop")?, get("step")?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(Error::GridSpec(format!("{key}: empty or invalid range")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            // rounded to 1e-9 so that 0.1 + 2 * 0.1 reads back as 0.3
            Ok((0..=count)
                .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                .collect())
        }
        other => float_value(key, other).map(|x| vec![x]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPoint {
    pub experiment_id: String,
    pub b: f64,
    pub c: usize,
    pub r: f64,
    pub replica: u32,
    pub seed: u64,
}

/// Cartesian product of the value lists times replicas, ordered by
/// (b, c, r, replica) in list order.
pub fn build_grid(spec: &GridSpec) -> Result<Vec<ExperimentPoint>> {
    if spec.b.is_empty() || spec.c.is_empty() || spec.r.is_empty() {
        return Err(Error::param("grid value lists must be non-empty"));
    }
    if spec.n_replicas < 1 {
        return Err(Error::param("n_replicas must be at least 1"));
    }
    let mut points = Vec::new();
    let mut seen = HashSet::new();
    for &b in &spec.b {
        for &c in &spec.c {
            for &r in &spec.r {
                let mut check = BudgetSpec::new(b, c, r);
                check.target_yes_fraction = spec.target_yes_fraction;
                check.ratio_tolerance = spec.ratio_tolerance;
                check.validate()?;
                let id = experiment_id(b, c, r);
                if !seen.insert(id.clone()) {
                    return Err(Error::param(format!("duplicate grid point {id}")));
                }
                for replica in 0..spec.n_replicas {
                    points.push(ExperimentPoint {
                        experiment_id: id.clone(),
                        b,
                        c,
                        r,
                        replica,
                        seed: seed::point_seed(spec.base_seed, &id, replica),
                    });
                }
            }
        }
    }
    Ok(points)
}

pub fn manifest_file_name(point: &ExperimentPoint) -> String {
    format!("{}_rep{}.jsonl", point.experiment_id, point.replica)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexRow {
    pub point: ExperimentPoint,
    pub outcome: std::result::Result<PointSummary, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    /// Relative to the output directory.
    pub manifest: PathBuf,
    pub realized_cost: f64,
    pub realized_c_count: usize,
    pub realized_n: usize,
    pub yes_fraction: f64,
    pub warnings: usize,
}

/// Subsamples every point and returns the manifests alongside the index rows,
/// without touching the filesystem.
pub fn plan_manifests(
    grid: &GridSpec,
    points: &[ExperimentPoint],
    dataset: &Dataset,
) -> Result<Vec<(IndexRow, Option<ManifestRecord>)>> {
    dataset.ensure_valid()?;
    Ok(points
        .par_iter()
        .map(|point| {
            let spec = grid.budget_spec(point);
            match subsample(dataset, &spec) {
                Ok(m) => {
                    let summary = PointSummary {
                        manifest: PathBuf::from("manifests").join(manifest_file_name(point)),
                        realized_cost: m.realized_cost,
                        realized_c_count: m.realized_c_count,
                        realized_n: m.realized_n,
                        yes_fraction: m.realized_yes_fraction,
                        warnings: m.warnings.len(),
                    };
                    let record = ManifestRecord::new(point.experiment_id.clone(), point.replica, &m);
                    (
                        IndexRow {
                            point: point.clone(),
                            outcome: Ok(summary),
                        },
                        Some(record),
                    )
                }
                Err(e) => (
                    IndexRow {
                        point: point.clone(),
                        outcome: Err(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect())
}

/// Writes `manifests/<experiment_id>_rep<k>.jsonl` for every point plus
/// `index.csv` under `out_dir`. Points whose subsample fails are indexed as
/// failed with the reason; they do not abort the run.
pub fn emit_manifests(
    grid: &GridSpec,
    points: &[ExperimentPoint],
    dataset: &Dataset,
    out_dir: &Path,
) -> Result<Vec<IndexRow>> {
    let planned = plan_manifests(grid, points, dataset)?;
    let mut rows = Vec::with_capacity(planned.len());
    for (row, record) in planned {
        if let (Ok(summary), Some(record)) = (&row.outcome, record) {
            let writer = io::create_output(&out_dir.join(&summary.manifest))?;
            io::write_manifests(&[record], writer)?;
        }
        rows.push(row);
    }
    let index = io::create_output(&out_dir.join("index.csv"))?;
    write_index_csv(&rows, index)?;
    Ok(rows)
}

/// Columns: experiment_id, replica, b, c, r, seed, status, manifest,
/// realized_cost, C, N, yes_fraction, warnings, reason.
pub fn write_index_csv<W: Write>(rows: &[IndexRow], writer: W) -> Result<()> {
    let mut w = io::csv_writer(writer);
    w.write_record([
        "experiment_id",
        "replica",
        "b",
        "c",
        "r",
        "seed",
        "status",
        "manifest",
        "realized_cost",
        "C",
        "N",
        "yes_fraction",
        "warnings",
        "reason",
    ])?;
    for row in rows {
        let p = &row.point;
        let mut rec = vec![
            p.experiment_id.clone(),
            p.replica.to_string(),
            io::sig6(p.b),
            p.c.to_string(),
            io::sig6(p.r),
            p.seed.to_string(),
        ];
        match &row.outcome {
            Ok(s) => rec.extend([
                "ok".to_string(),
                s.manifest.to_string_lossy().replace('\\', "/"),
                io::sig6(s.realized_cost),
                s.realized_c_count.to_string(),
                s.realized_n.to_string(),
                io::sig6(s.yes_fraction),
                s.warnings.to_string(),
                String::new(),
            ]),
            Err(reason) => rec.extend([
                "failed".to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                reason.clone(),
            ]),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: experiment_id, replica, b, c, r, realized_cost, C, N, yes_fraction.
pub fn write_manifest_summary_csv<W: Write>(records: &[ManifestRecord], writer: W) -> Result<()> {
    let mut w = io::csv_writer(writer);
    w.write_record([
        "experiment_id",
        "replica",
        "b",
        "c",
        "r",
        "realized_cost",
        "C",
        "N",
        "yes_fraction",
    ])?;
    for m in records {
        w.write_record([
            m.experiment_id.clone(),
            m.replica.to_string(),
            io::sig6(m.b),
            m.c.to_string(),
            io::sig6(m.r),
            io::sig6(m.realized_cost),
            m.realized_c_count.to_string(),
            m.realized_n.to_string(),
            io::sig6(m.realized_yes_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub experiment_id: String,
    pub eval_set: String,
    pub b: f64,
    pub c: usize,
    pub r: f64,
    pub replicas: usize,
    pub expected_replicas: usize,
    pub mean: f64,
    /// Sample (n - 1) standard deviation; 0 for a single replica.
    pub std: f64,
}

impl AggregateRow {
    pub fn complete(&self) -> bool {
        self.replicas == self.expected_replicas
    }
}

pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Groups result records by (experiment_id, eval_set). Rows follow the grid's
/// point order, then eval_set name.
pub fn collect_results(points: &[ExperimentPoint], records: &[ResultRecord]) -> Result<Vec<AggregateRow>> {
    let mut order: Vec<&ExperimentPoint> = Vec::new();
    let mut replicas: HashMap<&str, HashSet<u32>> = HashMap::new();
    for p in points {
        let set = replicas.entry(p.experiment_id.as_str()).or_default();
        if set.is_empty() {
            order.push(p);
        }
        set.insert(p.replica);
    }

    let mut grouped: HashMap<(&str, &str), BTreeMap<u32, f64>> = HashMap::new();
    for rec in records {
        let known = replicas
            .get(rec.experiment_id.as_str())
            .ok_or_else(|| Error::param(format!("result for unknown experiment {:?}", rec.experiment_id)))?;
        if !known.contains(&rec.replica) {
            return Err(Error::param(format!(
                "result for unknown replica {} of {}",
                rec.replica, rec.experiment_id
            )));
        }
        let slot = grouped
            .entry((rec.experiment_id.as_str(), rec.eval_set.as_str()))
            .or_default();
        if slot.insert(rec.replica, rec.accuracy).is_some() {
            return Err(Error::DuplicateKey(format!(
                "result ({}, replica {}, {})",
                rec.experiment_id, rec.replica, rec.eval_set
            )));
        }
    }

    let mut rows = Vec::new();
    for p in order {
        let mut sets: Vec<(&str, &BTreeMap<u32, f64>)> = grouped
            .iter()
            .filter(|((id, _), _)| *id == p.experiment_id)
            .map(|((_, set), v)| (*set, v))
            .collect();
        sets.sort_by_key(|(set, _)| *set);
        for (eval_set, by_replica) in sets {
            let values: Vec<f64> = by_replica.values().copied().collect();
            let (mean, std) = mean_and_sample_std(&values);
            rows.push(AggregateRow {
                experiment_id: p.experiment_id.clone(),
                eval_set: eval_set.to_string(),
                b: p.b,
                c: p.c,
                r: p.r,
                replicas: values.len(),
                expected_replicas: replicas[p.experiment_id.as_str()].len(),
                mean,
                std,
            });
        }
    }
    Ok(rows)
}

/// Columns: experiment_id, eval_set, b, c, r, replicas, expected_replicas,
/// complete, mean_accuracy, std_accuracy.
pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], writer: W) -> Result<()> {
    let mut w = io::csv_writer(writer);
    w.write_record([
        "experiment_id",
        "eval_set",
        "b",
        "c",
        "r",
        "replicas",
        "expected_replicas",
        "complete",
        "mean_accuracy",
        "std_accuracy",
    ])?;
    for row in rows {
        w.write_record([
            row.experiment_id.clone(),
            row.eval_set.clone(),
            io::sig6(row.b),
            row.c.to_string(),
            io::sig6(row.r),
            row.replicas.to_string(),
            row.expected_replicas.to_string(),
            row.complete().to_string(),
            io::sig6(row.mean),
            io::sig6(row.std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `mastery(N) = clamp(a - beta * N^(-alpha), 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LearningCurve {
    pub a: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl LearningCurve {
    pub fn mastery(&self, n: usize) -> f64 {
        if n == 0 {
            return if self.beta > 0.0 { 0.0 } else { self.a.clamp(0.0, 1.0) };
        }
        (self.a - self.beta * (n as f64).powf(-self.alpha)).clamp(0.0, 1.0)
    }
}

/// A seeded stand-in for a trained model.
///
/// Each cluster is "mastered" with probability `mastery`; members of a
/// mastered cluster are answered correctly with probability `p_mastered`,
/// others with `p_unmastered`. With probability `rho` a member reuses the
/// cluster's shared uniform draw instead of its own, so `rho = 1` makes a
/// cluster all-right or all-wrong together.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponderParams {
    pub p_mastered: f64,
    pub p_unmastered: f64,
    pub mastery_base: f64,
    pub learning_curve: Option<LearningCurve>,
    /// Weight of the learning curve against `mastery_base` when a training
    /// manifest is supplied.
    pub curve_weight: f64,
    pub rho: f64,
    pub seed: u64,
}

impl Default for ResponderParams {
    fn default() -> Self {
        ResponderParams {
            p_mastered: 0.9,
            p_unmastered: 0.5,
            mastery_base: 0.6,
            learning_curve: None,
            curve_weight: 1.0,
            rho: 0.0,
            seed: 0,
        }
    }
}

impl ResponderParams {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_mastered", self.p_mastered),
            ("p_unmastered", self.p_unmastered),
            ("mastery_base", self.mastery_base),
            ("curve_weight", self.curve_weight),
            ("rho", self.rho),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.p_mastered < self.p_unmastered {
            return Err(Error::param("p_mastered must be at least p_unmastered"));
        }
        if let Some(lc) = &self.learning_curve {
            if !(lc.a.is_finite() && lc.beta.is_finite() && lc.alpha.is_finite()) {
                return Err(Error::param("learning curve parameters must be finite"));
            }
        }
        Ok(())
    }

    pub fn mastery(&self, training: Option<&SubsampleManifest>) -> f64 {
        match (training, &self.learning_curve) {
            (Some(m), Some(curve)) => {
                (1.0 - self.curve_weight) * self.mastery_base + self.curve_weight * curve.mastery(m.realized_n)
            }
            _ => self.mastery_base,
        }
    }

    /// Closed-form marginal accuracy `mastery * p_m + (1 - mastery) * p_u`.
    pub fn expected_accuracy(&self, training: Option<&SubsampleManifest>) -> f64 {
        let m = self.mastery(training);
        m * self.p_mastered + (1.0 - m) * self.p_unmastered
    }
}

/// Predictions for every instance of `eval`. Each cluster draws from its own
/// stream seeded by `(params.seed, cluster_id)`, and the number of draws does
/// not depend on the parameters, so runs that differ only in mastery or `rho`
/// share their random numbers.
pub fn simulate_responder(
    eval: &Dataset,
    params: &ResponderParams,
    training: Option<&SubsampleManifest>,
) -> Result<PredictionSet> {
    params.validate()?;
    let mastery = params.mastery(training);
    let mut out = PredictionSet::new();
    for cluster in eval.clusters() {
        let mut rng = seed::rng(seed::stable_hash(params.seed, &[cluster.cluster_id.as_bytes()]));
        let mastered = rng.gen::<f64>() < mastery;
        let shared: f64 = rng.gen();
        let p = if mastered {
            params.p_mastered
        } else {
            params.p_unmastered
        };
        for inst in eval.cluster_members(cluster) {
            let pick: f64 = rng.gen();
            let own: f64 = rng.gen();
            let u = if pick < params.rho { shared } else { own };
            let predicted = if u < p { inst.label } else { inst.label.flipped() };
            out.insert(
                inst.id.clone(),
                Prediction {
                    predicted,
                    confidence: None,
                },
            )?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{accuracy, consensus_score, EvalOptions};
    use crate::synthetic;

    #[test]
    fn grid_sizes() {
        let mut g = GridSpec::cluster_size_sweep();
        assert_eq!(build_grid(&g).unwrap().len(), 20);
        assert_eq!(build_grid(&GridSpec::cost_ratio_sweep()).unwrap().len(), 100);
        g = GridSpec::new(vec![10.0], vec![2], vec![0.5]);
        g.n_replicas = 1;
        assert_eq!(build_grid(&g).unwrap().len(), 1);
    }

    #[test]
    fn grid_order_and_seeds() {
        let mut g = GridSpec::new(vec![10.0, 20.0], vec![1, 2], vec![0.5]);
        g.n_replicas = 2;
        g.base_seed = 3;
        let pts = build_grid(&g).unwrap();
        let ids: Vec<(String, u32)> = pts.iter().map(|p| (p.experiment_id.clone(), p.replica)).collect();
        assert_eq!(ids[0], ("b10-c1-r0.5".to_string(), 0));
        assert_eq!(ids[1], ("b10-c1-r0.5".to_string(), 1));
        assert_eq!(ids[2].0, "b10-c2-r0.5");
        assert_eq!(ids[4].0, "b20-c1-r0.5");
        assert_eq!(pts[3].seed, seed::point_seed(3, "b10-c2-r0.5", 1));
        // extending the grid leaves existing seeds alone
        g.r.push(0.7);
        let more = build_grid(&g).unwrap();
        assert_eq!(more[0].seed, pts[0].seed);
    }

    #[test]
    fn grid_rejects_bad_values() {
        assert!(build_grid(&GridSpec::new(vec![], vec![1], vec![1.0])).is_err());
        assert!(build_grid(&GridSpec::new(vec![10.0], vec![0], vec![1.0])).is_err());
        assert!(build_grid(&GridSpec::new(vec![10.0], vec![1], vec![1.5])).is_err());
        assert!(build_grid(&GridSpec::new(vec![10.0], vec![1, 1], vec![1.0])).is_err());
    }

    #[test]
    fn parse_grid_spec() {
        let g = GridSpec::parse(
            "b = 1500\nc = [1, 4]\nr = { start = 0.1, stop = 1.0, step = 0.1 }\nn_replicas = 5\nbase_seed = 9\n",
        )
        .unwrap();
        assert_eq!(g.b, vec![1500.0]);
        assert_eq!(g.c, vec![1, 4]);
        assert_eq!(g.r, default_r_grid());
        assert_eq!(g.base_seed, 9);

        let g = GridSpec::parse("b = [1000.0]\nc = 4\nr = [0, 1]").unwrap();
        assert_eq!((g.r.clone(), g.n_replicas), (vec![0.0, 1.0], 5));
        let g = GridSpec::parse("b = 10\nc = 2").unwrap();
        assert_eq!(g.r.len(), 10);

        assert!(GridSpec::parse("c = 1").is_err());
        assert!(GridSpec::parse("b = 1\nc = 1.5").is_err());
        assert!(GridSpec::parse("b = 1\nc = 1\nbogus = 2").is_err());
        assert!(GridSpec::parse("b = [").is_err());
    }

    #[test]
    fn aggregate_mean_and_std() {
        let (m, s) = mean_and_sample_std(&[0.70, 0.72, 0.74, 0.71, 0.73]);
        assert!((m - 0.72).abs() < 1e-12);
        // sqrt(0.001 / 4)
        assert!((s - 0.0158113883).abs() < 1e-9);
        assert_eq!(mean_and_sample_std(&[0.5]), (0.5, 0.0));
    }

    fn rec(id: &str, replica: u32, set: &str, acc: f64) -> ResultRecord {
        ResultRecord {
            experiment_id: id.into(),
            replica,
            eval_set: set.into(),
            accuracy: acc,
        }
    }

    #[test]
    fn collect_groups_and_flags() {
        let mut g = GridSpec::new(vec![100.0], vec![4], vec![0.5]);
        g.n_replicas = 5;
        let pts = build_grid(&g).unwrap();
        let id = &pts[0].experiment_id;
        let mut records: Vec<ResultRecord> = [0.70, 0.72, 0.74, 0.71, 0.73]
            .iter()
            .enumerate()
            .map(|(i, &a)| rec(id, i as u32, "dev", a))
            .collect();
        records.push(rec(id, 0, "multirc", 0.6));
        let rows = collect_results(&pts, &records).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].eval_set, "dev");
        assert!(rows[0].complete());
        assert!((rows[0].std - 0.0158114).abs() < 1e-6);
        assert_eq!((rows[1].replicas, rows[1].std), (1, 0.0));
        assert!(!rows[1].complete());

        records.reverse();
        assert_eq!(collect_results(&pts, &records).unwrap(), rows);

        records.push(rec(id, 0, "multirc", 0.6));
        assert!(matches!(collect_results(&pts, &records), Err(Error::DuplicateKey(_))));
        assert!(collect_results(&pts, &[rec("nope", 0, "x", 0.1)]).is_err());
        assert!(collect_results(&pts, &[rec(id, 9, "x", 0.1)]).is_err());
    }

    #[test]
    fn emit_writes_manifests_and_index() {
        let ds = synthetic::uniform_clusters(200, 4, 0.5, 2);
        let mut g = GridSpec::new(vec![0.5, 40.0], vec![1, 4], vec![0.5]);
        g.n_replicas = 2;
        let pts = build_grid(&g).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let rows = emit_manifests(&g, &pts, &ds, dir.path()).unwrap();
        assert_eq!(rows.len(), 8);
        let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
        assert_eq!(failed, 4);
        assert!(rows[0].outcome.as_ref().unwrap_err().contains("budget too small"));
        let files = std::fs::read_dir(dir.path().join("manifests")).unwrap().count();
        assert_eq!(files, 4);
        let index = std::fs::read_to_string(dir.path().join("index.csv")).unwrap();
        assert_eq!(index.lines().count(), 9);
        assert!(index.lines().nth(1).unwrap().contains(",failed,"));
    }

    #[test]
    fn learning_curve_is_clamped_and_monotone() {
        let lc = LearningCurve {
            a: 0.95,
            beta: 2.0,
            alpha: 0.5,
        };
        assert_eq!(lc.mastery(0), 0.0);
        assert_eq!(lc.mastery(1), 0.0);
        assert!((lc.mastery(400) - 0.85).abs() < 1e-12);
        assert!(lc.mastery(1000) < lc.mastery(4000));
    }

    #[test]
    fn responder_degenerate_cases() {
        let ds = synthetic::uniform_clusters(100, 4, 0.5, 3);
        let perfect = ResponderParams {
            p_mastered: 1.0,
            p_unmastered: 1.0,
            ..Default::default()
        };
        let p = simulate_responder(&ds, &perfect, None).unwrap();
        assert_eq!(accuracy(&p, &ds, &EvalOptions::default()).unwrap().accuracy, 1.0);

        let all_or_nothing = ResponderParams {
            p_mastered: 1.0,
            p_unmastered: 0.0,
            rho: 1.0,
            seed: 4,
            ..Default::default()
        };
        let p = simulate_responder(&ds, &all_or_nothing, None).unwrap();
        let r = consensus_score(&p, &ds, 1, &EvalOptions::default()).unwrap();
        assert!(r.per_cluster.iter().all(|c| c.m == 0 || c.m == c.n));
        assert!(r.per_cluster.iter().any(|c| c.m == 0) && r.per_cluster.iter().any(|c| c.m == c.n));
    }

    #[test]
    fn responder_is_seeded() {
        let ds = synthetic::uniform_clusters(50, 3, 0.5, 3);
        let params = ResponderParams {
            seed: 11,
            rho: 0.3,
            ..Default::default()
        };
        assert_eq!(
            simulate_responder(&ds, &params, None).unwrap(),
            simulate_responder(&ds, &params, None).unwrap()
        );
        let other = ResponderParams {
            seed: 12,
            ..params.clone()
        };
        assert_ne!(
            simulate_responder(&ds, &params, None).unwrap(),
            simulate_responder(&ds, &other, None).unwrap()
        );
    }

    #[test]
    fn responder_validation() {
        let bad = ResponderParams {
            p_mastered: 0.3,
            p_unmastered: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ResponderParams {
            rho: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
