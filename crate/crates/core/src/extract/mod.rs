//! Noteworthy-utterance classification.
//!
//! Logistic regression over windowed TF-IDF features, one output per
//! section (multi-label) or a single any-section output (binary).

mod features;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::KvConfig;
use crate::corpus::{AnnotatedRecord, Conversation, SectionScheme};
use crate::error::{Error, Result};
use crate::metrics::classification::{classification_report, ClassificationReport};

pub use features::{fit_feature_space, FeatureSpace, FeatureVector};

pub const EXTRACTOR_FORMAT: &str = "notegen-extractor/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorMode {
    Multilabel,
    Binary,
}

impl std::str::FromStr for ExtractorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multilabel" => Ok(ExtractorMode::Multilabel),
            "binary" => Ok(ExtractorMode::Binary),
            other => Err(Error::validation(format!("unknown extractor mode `{other}`"))),
        }
    }
}

/// Per-utterance, per-label noteworthiness probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionScores {
    pub rows: Vec<Vec<f64>>,
}

/// Per-label decision thresholds; an utterance is selected when its score
/// is at least the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub values: Vec<f64>,
}

impl Thresholds {
    pub fn uniform(n: usize, value: f64) -> Self {
        Thresholds { values: vec![value; n] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorHyperParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    /// Stop once the epoch loss improves by less than this.
    pub tolerance: f64,
}

impl Default for ExtractorHyperParams {
    fn default() -> Self {
        ExtractorHyperParams {
            learning_rate: 0.05,
            epochs: 20,
            batch_size: 32,
            l2: 1e-5,
            tolerance: 1e-5,
        }
    }
}

impl ExtractorHyperParams {
    pub fn from_kv(kv: &mut KvConfig) -> Result<Self> {
        let d = Self::default();
        Ok(ExtractorHyperParams {
            learning_rate: kv.get("extractor.learning_rate", d.learning_rate)?,
            epochs: kv.get("extractor.epochs", d.epochs)?,
            batch_size: kv.get("extractor.batch_size", d.batch_size)?,
            l2: kv.get("extractor.l2", d.l2)?,
            tolerance: kv.get("extractor.tolerance", d.tolerance)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorModel {
    pub format: String,
    pub mode: ExtractorMode,
    pub labels: Vec<String>,
    pub space: FeatureSpace,
    /// One dense weight row per label.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Mean training loss after each epoch.
    pub epoch_loss: Vec<f64>,
}

/// Gold labels of every utterance: `labels[i][s]` is true when utterance `i`
/// supports some sentence of section `s`. Binary mode has one column, the
/// union over sections.
pub fn gold_labels(record: &AnnotatedRecord, scheme: &SectionScheme, binary: bool) -> Vec<Vec<bool>> {
    let n = record.conversation.len();
    let cols = if binary { 1 } else { scheme.len() };
    let mut out = vec![vec![false; cols]; n];
    for s in &record.note.sentences {
        let col = if binary {
            0
        } else {
            match scheme.position(&s.section) {
                Some(p) => p,
                None => continue,
            }
        };
        for &e in &s.evidence {
            out[e][col] = true;
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `-log sigmoid(z)` for label 1, `-log(1-sigmoid(z))` for 0.
fn bce_logit(z: f64, y: bool) -> f64 {
    let z = if y { z } else { -z };
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

impl ExtractorModel {
    pub fn zeros(mode: ExtractorMode, labels: Vec<String>, space: FeatureSpace) -> Self {
        let dim = space.dim();
        let n = labels.len();
        ExtractorModel {
            format: EXTRACTOR_FORMAT.into(),
            mode,
            labels,
            space,
            weights: vec![vec![0.0; dim]; n],
            bias: vec![0.0; n],
        }
    }

    fn logits(&self, x: &FeatureVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| x.dot(w) + b)
            .collect()
    }

    /// Mean loss (summed over labels) and its gradient on a batch.
    pub fn loss_and_gradient(&self, batch: &[(&FeatureVector, &[bool])], l2: f64) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
        let n = batch.len().max(1) as f64;
        let mut gw = vec![vec![0.0; self.space.dim()]; self.labels.len()];
        let mut gb = vec![0.0; self.labels.len()];
        let mut loss = 0.0;
        for (x, y) in batch {
            for (l, z) in self.logits(x).into_iter().enumerate() {
                loss += bce_logit(z, y[l]);
                let d = (sigmoid(z) - if y[l] { 1.0 } else { 0.0 }) / n;
                gb[l] += d;
                for &(i, v) in &x.entries {
                    gw[l][i] += d * v;
                }
            }
        }
        loss /= n;
        for (w, g) in self.weights.iter().zip(gw.iter_mut()) {
            for (wi, gi) in w.iter().zip(g.iter_mut()) {
                loss += 0.5 * l2 * wi * wi;
                *gi += l2 * wi;
            }
        }
        (loss, gw, gb)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Runtime(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: ExtractorModel = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if m.format != EXTRACTOR_FORMAT {
            return Err(Error::validation(format!(
                "{}: unsupported extractor format `{}`",
                path.display(),
                m.format
            )));
        }
        m.space.reindex();
        Ok(m)
    }
}

fn training_examples(records: &[AnnotatedRecord], space: &FeatureSpace, scheme: &SectionScheme, binary: bool) -> Vec<(FeatureVector, Vec<bool>)> {
    records
        .iter()
        .flat_map(|r| space.featurize(&r.conversation).into_iter().zip(gold_labels(r, scheme, binary)))
        .collect()
}

/// Trains a logistic-regression extractor with Adam on shuffled mini-batches.
pub fn train_extractor(
    train: &[AnnotatedRecord],
    space: &FeatureSpace,
    scheme: &SectionScheme,
    mode: ExtractorMode,
    hp: &ExtractorHyperParams,
    seed: u64,
) -> Result<(ExtractorModel, TrainLog)> {
    if train.is_empty() {
        return Err(Error::validation("extractor training needs a nonempty training split"));
    }
    let binary = mode == ExtractorMode::Binary;
    let labels: Vec<String> = if binary {
        vec!["any".into()]
    } else {
        scheme.ids().map(str::to_string).collect()
    };
    let mut model = ExtractorModel::zeros(mode, labels, space.clone());
    let examples = training_examples(train, space, scheme, binary);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_labels = model.labels.len();
    let dim = space.dim();
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut m_w = vec![vec![0.0; dim]; n_labels];
    let mut v_w = vec![vec![0.0; dim]; n_labels];
    let mut m_b = vec![0.0; n_labels];
    let mut v_b = vec![0.0; n_labels];
    let mut t = 0i32;
    let mut log = TrainLog { epoch_loss: Vec::new() };
    let mut previous = f64::INFINITY;

    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hp.batch_size.max(1)) {
            let batch: Vec<(&FeatureVector, &[bool])> = chunk.iter().map(|&i| (&examples[i].0, examples[i].1.as_slice())).collect();
            let (loss, gw, gb) = model.loss_and_gradient(&batch, hp.l2);
            t += 1;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("extractor loss diverged at epoch {epoch}, step {t}")));
            }
            let c1 = 1.0 - b1.powi(t);
            let c2 = 1.0 - b2.powi(t);
            for l in 0..n_labels {
                for i in 0..dim {
                    let g = gw[l][i];
                    if g == 0.0 && m_w[l][i] == 0.0 {
                        continue;
                    }
                    m_w[l][i] = b1 * m_w[l][i] + (1.0 - b1) * g;
                    v_w[l][i] = b2 * v_w[l][i] + (1.0 - b2) * g * g;
                    model.weights[l][i] -= hp.learning_rate * (m_w[l][i] / c1) / ((v_w[l][i] / c2).sqrt() + eps);
                }
                let g = gb[l];
                m_b[l] = b1 * m_b[l] + (1.0 - b1) * g;
                v_b[l] = b2 * v_b[l] + (1.0 - b2) * g * g;
                model.bias[l] -= hp.learning_rate * (m_b[l] / c1) / ((v_b[l] / c2).sqrt() + eps);
            }
        }
        let all: Vec<(&FeatureVector, &[bool])> = examples.iter().map(|(x, y)| (x, y.as_slice())).collect();
        let (loss, _, _) = model.loss_and_gradient(&all, hp.l2);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("extractor loss diverged after epoch {epoch}")));
        }
        log.epoch_loss.push(loss);
        if (previous - loss).abs() < hp.tolerance {
            break;
        }
        previous = loss;
    }
    Ok((model, log))
}

/// Probabilities for every utterance of `conv`.
pub fn score_utterances(model: &ExtractorModel, conv: &Conversation) -> SectionScores {
    SectionScores {
        rows: model
            .space
            .featurize(conv)
            .iter()
            .map(|x| model.logits(x).into_iter().map(sigmoid).collect())
            .collect(),
    }
}

/// Selected utterance indices per label, ascending. Selection is `score >= threshold`.
pub fn select_noteworthy(scores: &SectionScores, thresholds: &Thresholds) -> Vec<Vec<usize>> {
    (0..thresholds.values.len())
        .map(|l| {
            scores
                .rows
                .iter()
                .enumerate()
                .filter(|(_, r)| r[l] >= thresholds.values[l])
                .map(|(i, _)| i)
                .collect()
        })
        .collect()
}

/// Table-style report over every (utterance, label) pair of `records`.
pub fn evaluate_extractor(model: &ExtractorModel, records: &[AnnotatedRecord], scheme: &SectionScheme) -> ClassificationReport {
    let binary = model.mode == ExtractorMode::Binary;
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for r in records {
        scores.extend(score_utterances(model, &r.conversation).rows);
        labels.extend(gold_labels(r, scheme, binary));
    }
    classification_report(&scores, &labels, &model.labels, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Note, NoteSentence, Split, Utterance};

    fn toy_record(id: &str) -> AnnotatedRecord {
        // "pain ..." utterances support subjective, "pill ..." support plan
        let texts = ["pain in knee", "hello there", "pill daily", "hello again", "pain worse", "nice weather"];
        AnnotatedRecord {
            conversation: Conversation {
                id: id.into(),
                utterances: texts.iter().enumerate().map(|(i, t)| Utterance::new(i, "A", *t)).collect(),
            },
            note: Note {
                sentences: vec![
                    NoteSentence::new("subjective", "pain", vec![0, 4]),
                    NoteSentence::new("plan", "pill", vec![2]),
                ],
            },
            split: Split::Train,
        }
    }

    fn trained(mode: ExtractorMode, seed: u64) -> (ExtractorModel, Vec<AnnotatedRecord>) {
        let scheme = SectionScheme::synthetic();
        let recs = vec![toy_record("a"), toy_record("b")];
        let space = fit_feature_space(&recs, 0).unwrap();
        let hp = ExtractorHyperParams {
            epochs: 200,
            tolerance: 0.0,
            ..Default::default()
        };
        (train_extractor(&recs, &space, &scheme, mode, &hp, seed).unwrap().0, recs)
    }

    #[test]
    fn separable_set_is_learned() {
        let scheme = SectionScheme::synthetic();
        let (model, recs) = trained(ExtractorMode::Multilabel, 1);
        let report = evaluate_extractor(&model, &recs, &scheme);
        assert_eq!(report.accuracy, 1.0);
        // objective and assessment never positive
        for r in &recs {
            for row in score_utterances(&model, &r.conversation).rows {
                assert!(row[1] < 0.5 && row[2] < 0.5);
            }
        }
        assert!(report.per_label[1].auc.is_none());
    }

    #[test]
    fn binary_mode_single_column() {
        let (model, recs) = trained(ExtractorMode::Binary, 1);
        assert_eq!(model.weights.len(), 1);
        let s = score_utterances(&model, &recs[0].conversation);
        assert!(s.rows[0][0] > 0.5 && s.rows[2][0] > 0.5 && s.rows[1][0] < 0.5);
    }

    #[test]
    fn same_seed_same_weights() {
        assert_eq!(trained(ExtractorMode::Multilabel, 9).0, trained(ExtractorMode::Multilabel, 9).0);
    }

    #[test]
    fn zero_model_scores_half_and_bias_is_monotone() {
        let recs = vec![toy_record("a")];
        let space = fit_feature_space(&recs, 1).unwrap();
        let mut m = ExtractorModel::zeros(ExtractorMode::Multilabel, vec!["s".into()], space);
        let before = score_utterances(&m, &recs[0].conversation);
        assert!(before.rows.iter().all(|r| r[0] == 0.5));
        m.bias[0] += 0.3;
        let after = score_utterances(&m, &recs[0].conversation);
        assert!(before.rows.iter().zip(&after.rows).all(|(a, b)| b[0] > a[0]));
    }

    #[test]
    fn selection_rule() {
        let s = SectionScores {
            rows: vec![vec![0.2], vec![0.7], vec![0.9]],
        };
        assert_eq!(select_noteworthy(&s, &Thresholds::uniform(1, 0.7)), vec![vec![1, 2]]);
        assert_eq!(select_noteworthy(&s, &Thresholds::uniform(1, 0.0)), vec![vec![0, 1, 2]]);
        assert!(select_noteworthy(&s, &Thresholds::uniform(1, 1.0))[0].is_empty());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let recs = vec![toy_record("a")];
        let scheme = SectionScheme::synthetic();
        let space = fit_feature_space(&recs, 1).unwrap();
        let mut m = ExtractorModel::zeros(ExtractorMode::Multilabel, scheme.ids().map(String::from).collect(), space.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        use rand::Rng;
        for row in m.weights.iter_mut() {
            for w in row.iter_mut() {
                *w = rng.gen_range(-0.5..0.5);
            }
        }
        let ex = training_examples(&recs, &space, &scheme, false);
        let batch: Vec<(&FeatureVector, &[bool])> = ex.iter().map(|(x, y)| (x, y.as_slice())).collect();
        let l2 = 0.01;
        let (_, gw, gb) = m.loss_and_gradient(&batch, l2);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for l in 0..m.labels.len() {
            for i in (0..m.space.dim()).step_by(3) {
                let orig = m.weights[l][i];
                m.weights[l][i] = orig + h;
                let up = m.loss_and_gradient(&batch, l2).0;
                m.weights[l][i] = orig - h;
                let down = m.loss_and_gradient(&batch, l2).0;
                m.weights[l][i] = orig;
                let fd = (up - down) / (2.0 * h);
                let rel = (fd - gw[l][i]).abs() / fd.abs().max(gw[l][i].abs()).max(1e-3);
                worst = worst.max(rel);
            }
            let orig = m.bias[l];
            m.bias[l] = orig + h;
            let up = m.loss_and_gradient(&batch, l2).0;
            m.bias[l] = orig - h;
            let down = m.loss_and_gradient(&batch, l2).0;
            m.bias[l] = orig;
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((fd - gb[l]).abs() / fd.abs().max(1e-3));
        }
        assert!(worst < 1e-5, "max relative error {worst}");
    }

    #[test]
    fn round_trip_file() {
        let (model, recs) = trained(ExtractorMode::Multilabel, 2);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ext.json");
        model.save(&p).unwrap();
        let back = ExtractorModel::load(&p).unwrap();
        assert_eq!(score_utterances(&back, &recs[0].conversation), score_utterances(&model, &recs[0].conversation));
    }
}
