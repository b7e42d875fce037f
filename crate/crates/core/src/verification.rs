//! Two-phase question verification.
//!
//! Phase 1 asks several annotators to answer each question with yes, no or
//! "cannot be inferred"; a question survives only with a strict-majority yes
//! or no. Phase 2 re-annotates the survivors individually with yes/no only and
//! again keeps strict majorities. Strict majority means `count > n / 2`, so an
//! even number of annotators can tie and filter.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Dataset, Instance, Kind, Label};

/// A phase-1 answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnnotationLabel {
    Yes,
    No,
    CannotInfer,
}

impl AnnotationLabel {
    pub const ALL: [AnnotationLabel; 3] = [AnnotationLabel::Yes, AnnotationLabel::No, AnnotationLabel::CannotInfer];

    pub fn as_str(self) -> &'static str {
        match self {
            AnnotationLabel::Yes => "yes",
            AnnotationLabel::No => "no",
            AnnotationLabel::CannotInfer => "cannot_infer",
        }
    }

    pub fn as_label(self) -> Option<Label> {
        match self {
            AnnotationLabel::Yes => Some(Label::Yes),
            AnnotationLabel::No => Some(Label::No),
            AnnotationLabel::CannotInfer => None,
        }
    }
}

impl From<Label> for AnnotationLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Yes => AnnotationLabel::Yes,
            Label::No => AnnotationLabel::No,
        }
    }
}

impl FromStr for AnnotationLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" => Ok(AnnotationLabel::Yes),
            "no" => Ok(AnnotationLabel::No),
            "cannot_infer" => Ok(AnnotationLabel::CannotInfer),
            other => Err(format!(
                "invalid annotation label {other:?} (expected yes, no or cannot_infer)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    One,
    Two,
}

impl Phase {
    pub fn number(self) -> u8 {
        match self {
            Phase::One => 1,
            Phase::Two => 2,
        }
    }

    pub fn from_number(n: u64) -> Option<Phase> {
        match n {
            1 => Some(Phase::One),
            2 => Some(Phase::Two),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub question_id: String,
    pub annotator_id: String,
    pub label: AnnotationLabel,
    pub phase: Phase,
}

/// Annotations keyed by question, then phase, then annotator.
#[derive(Debug, Clone, Default)]
pub struct AnnotationSet {
    by_question: BTreeMap<String, BTreeMap<Phase, BTreeMap<String, AnnotationLabel>>>,
    len: usize,
}

impl AnnotationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = AnnotationRecord>) -> Result<Self> {
        let mut set = AnnotationSet::new();
        for r in records {
            set.insert(r)?;
        }
        Ok(set)
    }

    /// Rejects a second label from the same annotator for the same question
    /// and phase, and `cannot_infer` in phase 2.
    pub fn insert(&mut self, record: AnnotationRecord) -> Result<()> {
        if record.phase == Phase::Two && record.label == AnnotationLabel::CannotInfer {
            return Err(Error::param(format!(
                "question {:?}: phase 2 annotations are yes/no only",
                record.question_id
            )));
        }
        let slot = self
            .by_question
            .entry(record.question_id.clone())
            .or_default()
            .entry(record.phase)
            .or_default();
        if slot.contains_key(&record.annotator_id) {
            return Err(Error::DuplicateKey(format!(
                "(question {:?}, annotator {:?}, phase {})",
                record.question_id,
                record.annotator_id,
                record.phase.number()
            )));
        }
        slot.insert(record.annotator_id, record.label);
        self.len += 1;
        Ok(())
    }

    pub fn labels(&self, question_id: &str, phase: Phase) -> Vec<AnnotationLabel> {
        self.by_question
            .get(question_id)
            .and_then(|p| p.get(&phase))
            .map(|m| m.values().copied().collect())
            .unwrap_or_default()
    }

    pub fn question_ids(&self) -> impl Iterator<Item = &str> {
        self.by_question.keys().map(String::as_str)
    }

    /// All records in (question, phase, annotator) order.
    pub fn records(&self) -> impl Iterator<Item = AnnotationRecord> + '_ {
        self.by_question.iter().flat_map(|(q, phases)| {
            phases.iter().flat_map(move |(phase, annotators)| {
                annotators.iter().map(move |(a, label)| AnnotationRecord {
                    question_id: q.clone(),
                    annotator_id: a.clone(),
                    label: *label,
                    phase: *phase,
                })
            })
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Decision {
    Keep,
    Filter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reason {
    Ok,
    NoMajority,
    MajorityCannotInfer,
    Phase2Disagreement,
    MissingAnnotations,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::Ok => "ok",
            Reason::NoMajority => "no_majority",
            Reason::MajorityCannotInfer => "majority_cannot_infer",
            Reason::Phase2Disagreement => "phase2_disagreement",
            Reason::MissingAnnotations => "missing_annotations",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationOutcome {
    pub question_id: String,
    pub decision: Decision,
    /// Present exactly when the decision is `Keep`.
    pub resolved_label: Option<Label>,
    pub reason: Reason,
}

impl VerificationOutcome {
    fn keep(question_id: &str, label: Label) -> Self {
        VerificationOutcome {
            question_id: question_id.to_string(),
            decision: Decision::Keep,
            resolved_label: Some(label),
            reason: Reason::Ok,
        }
    }

    fn filter(question_id: &str, reason: Reason) -> Self {
        VerificationOutcome {
            question_id: question_id.to_string(),
            decision: Decision::Filter,
            resolved_label: None,
            reason,
        }
    }

    pub fn is_kept(&self) -> bool {
        self.decision == Decision::Keep
    }
}

/// The label held by strictly more than half of `labels`, if any.
pub fn strict_majority<T: Copy + Eq + Ord>(labels: &[T]) -> Option<T> {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts
        .into_iter()
        .find(|&(_, count)| 2 * count > labels.len())
        .map(|(l, _)| l)
}

pub fn aggregate_phase1(question_id: &str, labels: &[AnnotationLabel], required: usize) -> VerificationOutcome {
    if labels.len() < required.max(1) {
        return VerificationOutcome::filter(question_id, Reason::MissingAnnotations);
    }
    match strict_majority(labels) {
        None => VerificationOutcome::filter(question_id, Reason::NoMajority),
        Some(AnnotationLabel::CannotInfer) => VerificationOutcome::filter(question_id, Reason::MajorityCannotInfer),
        Some(l) => VerificationOutcome::keep(question_id, l.as_label().expect("yes/no")),
    }
}

pub fn aggregate_phase2(question_id: &str, labels: &[Label], required: usize) -> VerificationOutcome {
    if labels.len() < required.max(1) {
        return VerificationOutcome::filter(question_id, Reason::MissingAnnotations);
    }
    match strict_majority(labels) {
        Some(l) => VerificationOutcome::keep(question_id, l),
        None => VerificationOutcome::filter(question_id, Reason::Phase2Disagreement),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationPolicy {
    pub phase1_annotators: usize,
    pub phase2_annotators: usize,
    /// When false, phase 2 is skipped and the phase-1 label is final.
    pub require_phase2: bool,
    /// Seeds keep their stored label without being verified.
    pub exempt_seeds: bool,
}

impl Default for VerificationPolicy {
    fn default() -> Self {
        VerificationPolicy {
            phase1_annotators: 3,
            phase2_annotators: 3,
            require_phase2: true,
            exempt_seeds: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhaseStats {
    pub total: usize,
    pub kept: usize,
    pub filtered_no_majority: usize,
    pub filtered_cannot_infer: usize,
    pub filtered_disagreement: usize,
    pub filtered_missing: usize,
    /// Phase 1: kept questions whose resolved label differs from the stored
    /// one. Phase 2: kept questions whose label differs from phase 1.
    pub label_flips: usize,
}

impl PhaseStats {
    fn record(&mut self, outcome: &VerificationOutcome) {
        self.total += 1;
        match outcome.reason {
            Reason::Ok => self.kept += 1,
            Reason::NoMajority => self.filtered_no_majority += 1,
            Reason::MajorityCannotInfer => self.filtered_cannot_infer += 1,
            Reason::Phase2Disagreement => self.filtered_disagreement += 1,
            Reason::MissingAnnotations => self.filtered_missing += 1,
        }
    }

    /// kept / total; 1.0 for a phase that saw no questions.
    pub fn yield_rate(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.kept as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerificationReport {
    pub phase1: PhaseStats,
    /// `None` when the policy skips phase 2.
    pub phase2: Option<PhaseStats>,
    /// Final outcome per verified question, keyed by id. Exempt seeds are absent.
    pub outcomes: BTreeMap<String, VerificationOutcome>,
    pub seeds_exempted: usize,
    /// Clusters that had perturbations and were reduced to their seed alone.
    pub degraded_to_singleton: Vec<String>,
    /// Clusters whose seed was filtered; a surviving perturbation was promoted.
    pub seed_lost: Vec<String>,
    /// Clusters with no surviving member.
    pub emptied: Vec<String>,
}

impl VerificationReport {
    pub fn reason_histogram(&self) -> BTreeMap<Reason, usize> {
        let mut h = BTreeMap::new();
        for o in self.outcomes.values() {
            *h.entry(o.reason).or_default() += 1;
        }
        h
    }
}

/// Filters `dataset` down to the questions that pass every required phase,
/// relabelling survivors with their verified label.
pub fn run_verification(
    dataset: &Dataset,
    annotations: &AnnotationSet,
    policy: &VerificationPolicy,
) -> Result<(Dataset, VerificationReport)> {
    if let Some(unknown) = annotations.question_ids().find(|q| !dataset.contains(q)) {
        return Err(Error::UnknownQuestion(unknown.to_string()));
    }

    let mut report = VerificationReport::default();
    let mut phase2 = PhaseStats::default();
    let mut survivors: Vec<Instance> = Vec::new();

    for inst in dataset.instances() {
        if inst.is_seed() && policy.exempt_seeds {
            report.seeds_exempted += 1;
            survivors.push(inst.clone());
            continue;
        }

        let first = aggregate_phase1(
            &inst.id,
            &annotations.labels(&inst.id, Phase::One),
            policy.phase1_annotators,
        );
        report.phase1.record(&first);
        let Some(first_label) = first.resolved_label else {
            report.outcomes.insert(inst.id.clone(), first);
            continue;
        };
        if first_label != inst.label {
            report.phase1.label_flips += 1;
        }

        let outcome = if policy.require_phase2 {
            let labels: Vec<Label> = annotations
                .labels(&inst.id, Phase::Two)
                .into_iter()
                .filter_map(AnnotationLabel::as_label)
                .collect();
            let second = aggregate_phase2(&inst.id, &labels, policy.phase2_annotators);
            phase2.record(&second);
            if second.resolved_label.is_some_and(|l| l != first_label) {
                phase2.label_flips += 1;
            }
            second
        } else {
            first
        };

        if let Some(label) = outcome.resolved_label {
            let mut kept = inst.clone();
            kept.label = label;
            survivors.push(kept);
        }
        report.outcomes.insert(inst.id.clone(), outcome);
    }
    if policy.require_phase2 {
        report.phase2 = Some(phase2);
    }

    // cluster bookkeeping; survivors are in (cluster_id, id) order
    let mut by_cluster: BTreeMap<String, Vec<Instance>> = BTreeMap::new();
    for inst in survivors {
        by_cluster.entry(inst.cluster_id.clone()).or_default().push(inst);
    }
    let mut output = Vec::with_capacity(dataset.len());
    for cluster in dataset.clusters() {
        let Some(mut members) = by_cluster.remove(&cluster.cluster_id) else {
            report.emptied.push(cluster.cluster_id.clone());
            continue;
        };
        if !members.iter().any(Instance::is_seed) {
            let promoted = &mut members[0];
            promoted.kind = Kind::Seed;
            promoted.seed_promoted = true;
            report.seed_lost.push(cluster.cluster_id.clone());
        }
        if cluster.size() > 1 && members.len() == 1 {
            report.degraded_to_singleton.push(cluster.cluster_id.clone());
        }
        output.extend(members);
    }

    let filtered = Dataset::new(output).with_passages(dataset.passages().clone());
    Ok((filtered, report))
}
