//! Line-delimited JSON records and CSV reports.
//!
//! Every record kind is one JSON object per line, UTF-8. Blank lines are
//! skipped. Labels are read case-insensitively and written lowercase.
//! Unknown top-level fields of instance and manifest records are kept and
//! written back unchanged.
//!
//! | kind        | fields                                                                      |
//! |-------------|-----------------------------------------------------------------------------|
//! | instance    | `id`, `cluster_id`, `question`, `passage` or `passage_id`, `label`, `kind`, `split`? |
//! | annotation  | `question_id`, `annotator_id`, `label` (`yes`/`no`/`cannot_infer`), `phase` (1/2) |
//! | prediction  | `id`, `predicted` (`yes`/`no`), `confidence`? in [0, 1]                     |
//! | manifest    | `experiment_id`, `replica`, `b`, `c`, `r`, `seed`, `instance_ids`, ...      |
//! | result      | `experiment_id`, `replica`, `eval_set`, `accuracy`                          |

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::metrics::{Prediction, PredictionSet};
use crate::model::{Dataset, Instance, Kind, Label, PassageRef, Split};
use crate::subsample::{BudgetSpec, ClusterSelection, SubsampleManifest};
use crate::verification::{AnnotationLabel, AnnotationRecord, AnnotationSet, Phase};

/// Opens `path` for reading; `-` is standard input.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let file = File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Box::new(BufReader::new(file)))
}

/// Creates `path` for writing (parents included); `-` is standard output.
pub fn create_output(path: &Path) -> Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufWriter::new(io::stdout())));
    }
    let wrap = |source| Error::File {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(wrap)?;
    }
    Ok(Box::new(BufWriter::new(File::create(path).map_err(wrap)?)))
}

/// Non-blank lines parsed as JSON objects, with 1-based line numbers.
fn json_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, Map<String, Value>)>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line_no = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(Error::Io(e))),
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(obj)) => Ok((line_no, obj)),
            Ok(_) => Err(Error::record(line_no, "record is not a JSON object")),
            Err(e) => Err(Error::record(line_no, format!("malformed JSON: {e}"))),
        })
    })
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    line: usize,
}

impl<'a> Fields<'a> {
    fn opt_str(&self, name: &str) -> Result<Option<&'a str>> {
        match self.obj.get(name) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(Error::record(self.line, format!("field {name} must be a string"))),
        }
    }

    fn str(&self, name: &str) -> Result<&'a str> {
        self.opt_str(name)?
            .ok_or_else(|| Error::record(self.line, format!("missing field {name}")))
    }

    fn parsed<T: std::str::FromStr<Err = String>>(&self, name: &str) -> Result<T> {
        self.str(name)?
            .parse()
            .map_err(|e| Error::record(self.line, format!("field {name}: {e}")))
    }

    fn opt_f64(&self, name: &str) -> Result<Option<f64>> {
        match self.obj.get(name) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| Error::record(self.line, format!("field {name} must be a number"))),
        }
    }

    fn u64(&self, name: &str) -> Result<u64> {
        match self.obj.get(name) {
            None | Some(Value::Null) => Err(Error::record(self.line, format!("missing field {name}"))),
            Some(v) => v
                .as_u64()
                .ok_or_else(|| Error::record(self.line, format!("field {name} must be a non-negative integer"))),
        }
    }
}

const INSTANCE_FIELDS: [&str; 9] = [
    "id",
    "cluster_id",
    "question",
    "passage",
    "passage_id",
    "label",
    "kind",
    "split",
    "seed_promoted",
];

fn parse_instance(obj: &Map<String, Value>, line: usize) -> Result<Instance> {
    let f = Fields { obj, line };
    let passage = match (f.opt_str("passage")?, f.opt_str("passage_id")?) {
        (Some(text), None) => PassageRef::Inline(text.to_string()),
        (None, Some(id)) => PassageRef::Id(id.to_string()),
        (Some(_), Some(_)) => return Err(Error::record(line, "both passage and passage_id present")),
        (None, None) => return Err(Error::record(line, "missing field passage or passage_id")),
    };
    let split = match f.opt_str("split")? {
        Some(s) => Some(
            s.parse::<Split>()
                .map_err(|e| Error::record(line, format!("field split: {e}")))?,
        ),
        None => None,
    };
    let seed_promoted = match obj.get("seed_promoted") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => return Err(Error::record(line, "field seed_promoted must be a boolean")),
    };
    let extra = obj
        .iter()
        .filter(|(k, _)| !INSTANCE_FIELDS.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    Ok(Instance {
        id: f.str("id")?.to_string(),
        cluster_id: f.str("cluster_id")?.to_string(),
        question: f.str("question")?.to_string(),
        passage,
        label: f.parsed::<Label>("label")?,
        kind: f.parsed::<Kind>("kind")?,
        split,
        seed_promoted,
        extra,
    })
}

fn instance_to_json(inst: &Instance) -> Map<String, Value> {
    let mut obj = inst.extra.clone();
    obj.insert("id".into(), inst.id.clone().into());
    obj.insert("cluster_id".into(), inst.cluster_id.clone().into());
    obj.insert("question".into(), inst.question.clone().into());
    match &inst.passage {
        PassageRef::Id(id) => obj.insert("passage_id".into(), id.clone().into()),
        PassageRef::Inline(text) => obj.insert("passage".into(), text.clone().into()),
    };
    obj.insert("label".into(), inst.label.as_str().into());
    obj.insert("kind".into(), inst.kind.as_str().into());
    if let Some(split) = inst.split {
        obj.insert("split".into(), split.as_str().into());
    }
    if inst.seed_promoted {
        obj.insert("seed_promoted".into(), true.into());
    }
    obj
}

/// Parses instance records without checking dataset invariants.
pub fn read_dataset_unvalidated<R: BufRead>(reader: R) -> Result<Dataset> {
    let instances = json_lines(reader)
        .map(|rec| rec.and_then(|(line, obj)| parse_instance(&obj, line)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(instances))
}

/// Parses and validates a dataset; invalid datasets are an error carrying
/// the full validation report.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let ds = read_dataset_unvalidated(reader)?;
    ds.ensure_valid()?;
    Ok(ds)
}

pub fn read_dataset_file(path: &Path) -> Result<Dataset> {
    read_dataset(open_input(path)?)
}

/// Writes one record per instance, sorted by (cluster_id, id).
pub fn write_dataset<W: Write>(dataset: &Dataset, mut writer: W) -> Result<()> {
    for inst in dataset.instances() {
        serde_json::to_writer(&mut writer, &instance_to_json(inst)).map_err(io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_predictions<R: BufRead>(reader: R) -> Result<PredictionSet> {
    let mut set = PredictionSet::new();
    for rec in json_lines(reader) {
        let (line, obj) = rec?;
        let f = Fields { obj: &obj, line };
        let id = f.str("id")?;
        let predicted = f.parsed::<Label>("predicted")?;
        let confidence = f.opt_f64("confidence")?;
        if set.get(id).is_some() {
            return Err(Error::DuplicateKey(format!("prediction id {id:?} (line {line})")));
        }
        set.insert(id, Prediction { predicted, confidence })
            .map_err(|e| Error::record(line, e.to_string()))?;
    }
    Ok(set)
}

pub fn write_predictions<W: Write>(predictions: &PredictionSet, mut writer: W) -> Result<()> {
    for (id, p) in predictions.iter() {
        let mut obj = Map::new();
        obj.insert("id".into(), id.into());
        obj.insert("predicted".into(), p.predicted.as_str().into());
        if let Some(c) = p.confidence {
            obj.insert("confidence".into(), c.into());
        }
        serde_json::to_writer(&mut writer, &obj).map_err(io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_annotations<R: BufRead>(reader: R) -> Result<AnnotationSet> {
    let mut set = AnnotationSet::new();
    for rec in json_lines(reader) {
        let (line, obj) = rec?;
        let f = Fields { obj: &obj, line };
        let phase_no = f.u64("phase")?;
        let phase = Phase::from_number(phase_no)
            .ok_or_else(|| Error::record(line, format!("field phase: expected 1 or 2, got {phase_no}")))?;
        let record = AnnotationRecord {
            question_id: f.str("question_id")?.to_string(),
            annotator_id: f.str("annotator_id")?.to_string(),
            label: f.parsed::<AnnotationLabel>("label")?,
            phase,
        };
        set.insert(record).map_err(|e| match e {
            Error::DuplicateKey(k) => Error::DuplicateKey(format!("{k} (line {line})")),
            other => Error::record(line, other.to_string()),
        })?;
    }
    Ok(set)
}

pub fn write_annotations<W: Write>(annotations: &AnnotationSet, mut writer: W) -> Result<()> {
    for rec in annotations.records() {
        let mut obj = Map::new();
        obj.insert("question_id".into(), rec.question_id.into());
        obj.insert("annotator_id".into(), rec.annotator_id.into());
        obj.insert("label".into(), rec.label.as_str().into());
        obj.insert("phase".into(), rec.phase.number().into());
        serde_json::to_writer(&mut writer, &obj).map_err(io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// One subsampling draw as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub experiment_id: String,
    pub replica: u32,
    pub b: f64,
    pub c: usize,
    pub r: f64,
    pub seed: u64,
    pub target_yes_fraction: f64,
    pub ratio_tolerance: f64,
    pub always_include_seed: bool,
    pub instance_ids: Vec<String>,
    pub clusters: Vec<ClusterSelection>,
    pub realized_cost: f64,
    pub realized_n: usize,
    pub realized_c_count: usize,
    pub realized_yes: usize,
    pub realized_yes_fraction: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl ManifestRecord {
    pub fn new(experiment_id: impl Into<String>, replica: u32, manifest: &SubsampleManifest) -> Self {
        let spec = &manifest.spec;
        ManifestRecord {
            experiment_id: experiment_id.into(),
            replica,
            b: spec.b,
            c: spec.c,
            r: spec.r,
            seed: spec.seed,
            target_yes_fraction: spec.target_yes_fraction,
            ratio_tolerance: spec.ratio_tolerance,
            always_include_seed: spec.always_include_seed,
            instance_ids: manifest.instance_ids().map(str::to_string).collect(),
            clusters: manifest.chosen.clone(),
            realized_cost: manifest.realized_cost,
            realized_n: manifest.realized_n,
            realized_c_count: manifest.realized_c_count,
            realized_yes: manifest.realized_yes,
            realized_yes_fraction: manifest.realized_yes_fraction,
            warnings: manifest.warnings.clone(),
            extra: Map::new(),
        }
    }

    pub fn to_manifest(&self) -> SubsampleManifest {
        SubsampleManifest {
            spec: BudgetSpec {
                b: self.b,
                c: self.c,
                r: self.r,
                target_yes_fraction: self.target_yes_fraction,
                ratio_tolerance: self.ratio_tolerance,
                seed: self.seed,
                always_include_seed: self.always_include_seed,
            },
            chosen: self.clusters.clone(),
            realized_cost: self.realized_cost,
            realized_n: self.realized_n,
            realized_c_count: self.realized_c_count,
            realized_yes: self.realized_yes,
            realized_yes_fraction: self.realized_yes_fraction,
            warnings: self.warnings.clone(),
        }
    }
}

pub fn write_manifests<W: Write>(records: &[ManifestRecord], mut writer: W) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut writer, rec).map_err(io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_manifests<R: BufRead>(reader: R) -> Result<Vec<ManifestRecord>> {
    json_lines(reader)
        .map(|rec| {
            let (line, obj) = rec?;
            serde_json::from_value(Value::Object(obj)).map_err(|e| Error::record(line, e.to_string()))
        })
        .collect()
}

/// An externally measured accuracy for one replica of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment_id: String,
    pub replica: u32,
    pub eval_set: String,
    pub accuracy: f64,
}

pub fn read_results<R: BufRead>(reader: R) -> Result<Vec<ResultRecord>> {
    json_lines(reader)
        .map(|rec| {
            let (line, obj) = rec?;
            let r: ResultRecord =
                serde_json::from_value(Value::Object(obj)).map_err(|e| Error::record(line, e.to_string()))?;
            if !(0.0..=1.0).contains(&r.accuracy) {
                return Err(Error::record(line, format!("accuracy {} outside [0, 1]", r.accuracy)));
            }
            Ok(r)
        })
        .collect()
}

pub fn write_results<W: Write>(records: &[ResultRecord], mut writer: W) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut writer, rec).map_err(io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Formats `x` with 6 significant digits, like C's `%.6g`.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer)
}
