//! Proximity clustering of noteworthy utterances, extractor threshold
//! calibration and tau selection.

use std::fmt::Write as _;
use serde::Serialize;

use crate::corpus::{derive_gold_clusters, AnnotatedRecord, SectionScheme};
use crate::error::{Error, Result};
use crate::extract::{gold_labels, select_noteworthy, SectionScores, Thresholds};

/// Utterances believed to support one note sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EvidenceCluster {
    /// Section position in the active scheme.
    pub section: usize,
    /// Sorted ascending, nonempty.
    pub indices: Vec<usize>,
}

impl EvidenceCluster {
    pub fn new(section: usize, mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        debug_assert!(!indices.is_empty(), "evidence clusters are nonempty");
        EvidenceCluster { section, indices }
    }

    pub fn first(&self) -> usize {
        self.indices[0]
    }
}

/// Groups sorted utterance indices so that any two indices with at most
/// `tau` utterances strictly between them share a cluster, closed under
/// transitivity. Clusters come out ordered by first index.
///
/// On sorted input the transitive closure reduces to cutting the sequence
/// wherever consecutive indices are too far apart.
pub fn proximity_cluster(indices: &[usize], tau: usize) -> Vec<Vec<usize>> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in sorted {
        match out.last_mut() {
            Some(current) if i - current[current.len() - 1] - 1 <= tau => current.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

pub fn cluster_section(indices: &[usize], section: usize, tau: usize) -> Vec<EvidenceCluster> {
    proximity_cluster(indices, tau)
        .into_iter()
        .map(|c| EvidenceCluster { section, indices: c })
        .collect()
}

fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Jaccard-weighted F1 between two clusterings of the same section.
///
/// Pairs are matched greedily in order of decreasing Jaccard overlap (ties
/// by predicted then gold position), each cluster used at most once.
/// Precision and recall are the summed matched Jaccard over the number of
/// predicted and gold clusters. Two empty clusterings score 1.
pub fn cluster_alignment_score(predicted: &[Vec<usize>], gold: &[Vec<usize>]) -> f64 {
    if predicted.is_empty() && gold.is_empty() {
        return 1.0;
    }
    if predicted.is_empty() || gold.is_empty() {
        return 0.0;
    }
    let mut pairs = Vec::new();
    for (p, pc) in predicted.iter().enumerate() {
        for (g, gc) in gold.iter().enumerate() {
            let j = jaccard(pc, gc);
            if j > 0.0 {
                pairs.push((j, p, g));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; predicted.len()];
    let mut used_g = vec![false; gold.len()];
    let mut matched = 0.0;
    for (j, p, g) in pairs {
        if !used_p[p] && !used_g[g] {
            used_p[p] = true;
            used_g[g] = true;
            matched += j;
        }
    }
    let precision = matched / predicted.len() as f64;
    let recall = matched / gold.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMode {
    /// Match the total predicted cluster count to the gold count per section.
    ClusterMatched,
    /// Maximise per-section F1 against gold labels, ignoring clusters.
    CountFree,
}

impl std::str::FromStr for CalibrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cluster-matched" | "cluster_matched" => Ok(CalibrationMode::ClusterMatched),
            "count-free" | "count_free" => Ok(CalibrationMode::CountFree),
            other => Err(Error::validation(format!("unknown calibration mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub section: String,
    pub threshold: f64,
    pub predicted_clusters: usize,
    pub gold_clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub thresholds: Thresholds,
    pub rows: Vec<CalibrationRow>,
}

impl Calibration {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("section\tthreshold\tpredicted_clusters\tgold_clusters\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{:.6}\t{}\t{}",
                r.section, r.threshold, r.predicted_clusters, r.gold_clusters
            );
        }
        out
    }
}

/// Observed scores of one label column, ascending and unique, plus a
/// sentinel that selects nothing: 1.0 when every score is below 1, else the
/// next float above 1.
fn candidate_thresholds(scores: &[SectionScores], label: usize) -> Vec<f64> {
    let mut values: Vec<f64> = scores
        .iter()
        .flat_map(|s| s.rows.iter().map(move |r| r[label]))
        .collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let max = values.last().copied().unwrap_or(0.0);
    values.push(if max < 1.0 { 1.0 } else { max.next_up() });
    values.dedup();
    values
}

fn count_clusters(scores: &[SectionScores], label: usize, threshold: f64, tau: usize) -> usize {
    scores
        .iter()
        .map(|s| {
            let sel: Vec<usize> = (0..s.rows.len()).filter(|&i| s.rows[i][label] >= threshold).collect();
            proximity_cluster(&sel, tau).len()
        })
        .sum()
}

fn label_f1(scores: &[SectionScores], labels: &[Vec<Vec<bool>>], label: usize, threshold: f64) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (s, l) in scores.iter().zip(labels) {
        for (row, gold) in s.rows.iter().zip(l) {
            match (row[label] >= threshold, gold[label]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
    }
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Per-label thresholds from validation scores.
///
/// `labels[c][i][s]` is the gold label of utterance `i` of conversation `c`
/// for column `s`; `gold_counts[s]` the number of gold clusters. Every
/// candidate threshold is evaluated exactly; ties go to the larger threshold.
pub fn calibrate_columns(
    scores: &[SectionScores],
    labels: &[Vec<Vec<bool>>],
    gold_counts: &[usize],
    column_names: &[String],
    tau: usize,
    mode: CalibrationMode,
) -> Result<Calibration> {
    if scores.is_empty() {
        return Err(Error::validation("threshold calibration needs a nonempty validation split"));
    }
    let n_labels = column_names.len();
    let mut values = Vec::with_capacity(n_labels);
    let mut rows = Vec::with_capacity(n_labels);
    for label in 0..n_labels {
        let candidates = candidate_thresholds(scores, label);
        let mut best: Option<(f64, f64)> = None; // (objective to minimise, threshold)
        for &theta in &candidates {
            let objective = match mode {
                CalibrationMode::ClusterMatched => {
                    (count_clusters(scores, label, theta, tau) as f64 - gold_counts[label] as f64).abs()
                }
                CalibrationMode::CountFree => -label_f1(scores, labels, label, theta),
            };
            // candidates ascend, so `<=` keeps the largest threshold among ties
            if best.is_none_or(|(b, _)| objective <= b) {
                best = Some((objective, theta));
            }
        }
        let theta = best.map(|(_, t)| t).unwrap_or(1.0);
        values.push(theta);
        rows.push(CalibrationRow {
            section: column_names[label].clone(),
            threshold: theta,
            predicted_clusters: count_clusters(scores, label, theta, tau),
            gold_clusters: gold_counts[label],
        });
    }
    Ok(Calibration {
        thresholds: Thresholds { values },
        rows,
    })
}

/// Section-wise calibration of a multi-label extractor on validation records.
pub fn calibrate_thresholds(
    scores: &[SectionScores],
    records: &[AnnotatedRecord],
    scheme: &SectionScheme,
    tau: usize,
    mode: CalibrationMode,
) -> Result<Calibration> {
    if records.len() != scores.len() {
        return Err(Error::validation("one score matrix per validation record is required"));
    }
    let labels: Vec<Vec<Vec<bool>>> = records.iter().map(|r| gold_labels(r, scheme, false)).collect();
    let mut gold_counts = vec![0usize; scheme.len()];
    for r in records {
        for (s, cl) in derive_gold_clusters(r, scheme).iter().enumerate() {
            gold_counts[s] += cl.len();
        }
    }
    let names: Vec<String> = scheme.ids().map(str::to_string).collect();
    calibrate_columns(scores, &labels, &gold_counts, &names, tau, mode)
}

/// Threshold for a binary (any-section) extractor, tuned by F1.
pub fn calibrate_binary(scores: &[SectionScores], records: &[AnnotatedRecord], scheme: &SectionScheme) -> Result<Calibration> {
    let labels: Vec<Vec<Vec<bool>>> = records.iter().map(|r| gold_labels(r, scheme, true)).collect();
    let gold = records.iter().map(|r| r.note.evidence_union().len()).sum();
    calibrate_columns(scores, &labels, &[gold], &["any".to_string()], 0, CalibrationMode::CountFree)
}

/// Scores of every candidate tau and the winner (smallest tau among ties).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauSelection {
    pub tau: usize,
    pub scores: Vec<(usize, f64)>,
}

impl TauSelection {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("tau\tscore\tselected\n");
        for (t, s) in &self.scores {
            let _ = writeln!(out, "{t}\t{s:.6}\t{}", (*t == self.tau) as u8);
        }
        out
    }
}

/// Evaluates `objective` at each candidate and returns the argmax.
pub fn tune_tau(candidates: &[usize], mut objective: impl FnMut(usize) -> Result<f64>) -> Result<TauSelection> {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() {
        return Err(Error::validation("no candidate tau values"));
    }
    let mut scores = Vec::with_capacity(sorted.len());
    let mut best: Option<(f64, usize)> = None;
    for tau in sorted {
        let s = objective(tau)?;
        scores.push((tau, s));
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, tau));
        }
    }
    Ok(TauSelection {
        tau: best.expect("nonempty").1,
        scores,
    })
}

/// Cheap tau objective: calibrate thresholds at `tau`, cluster the
/// selected utterances and average the alignment score against gold
/// clusters over every (record, section) pair where either side is nonempty.
pub fn alignment_objective(
    scores: &[SectionScores],
    records: &[AnnotatedRecord],
    scheme: &SectionScheme,
    tau: usize,
    mode: CalibrationMode,
) -> Result<f64> {
    let cal = calibrate_thresholds(scores, records, scheme, tau, mode)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (s, r) in scores.iter().zip(records) {
        let selected = select_noteworthy(s, &cal.thresholds);
        let gold = derive_gold_clusters(r, scheme);
        for (sec, sel) in selected.iter().enumerate() {
            let pred = proximity_cluster(sel, tau);
            let g: Vec<Vec<usize>> = gold[sec].iter().map(|c| c.indices.clone()).collect();
            if pred.is_empty() && g.is_empty() {
                continue;
            }
            total += cluster_alignment_score(&pred, &g);
            count += 1;
        }
    }
    Ok(if count == 0 { 1.0 } else { total / count as f64 })
}
